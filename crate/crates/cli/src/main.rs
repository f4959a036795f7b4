//! `lambda-heom`: propagate the Λ-system hierarchy, sweep parameters, check
//! convergence in the truncation order, cross-validate against the oracles
//! and plot the resulting traces.

mod config;
mod error;
mod output;
mod plot;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use lambda_heom::analysis::{validate, ConvergenceReport, Verdict};
use lambda_heom::{MethodOutput, Registry};
use rayon::prelude::*;
use serde_json::Value;

use crate::config::{read_json, resolve, sweep_points, JobDocument, Preset, SweepAxis, SweepPoint};
use crate::error::{CliError, CliResult};
use crate::output::{csv_name, read_trace, write_trace, Manifest, RunEntry};
use crate::plot::{render, Curve, Layout};

#[derive(Debug, Parser)]
#[command(name = "lambda-heom", version, about = "Dark-state fidelity of a driven Λ system in non-Markovian baths")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON job document; defaults apply to every missing field. A manifest
    /// written by an earlier `simulate` or `sweep` replays its runs.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, env = "LAMBDA_HEOM_OUT", default_value = "lambda-heom-out")]
    out: PathBuf,

    /// Override a setting after the config file, e.g. `--set Gamma=1` or
    /// `--set baths.a.gamma=0.3`. Repeatable; applied in order.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Concurrent runs for sweeps and convergence studies.
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Propagate one configuration and write its trace.
    Simulate,
    /// Propagate one configuration per value of a parameter.
    Sweep {
        /// One of Gamma, gamma, N, h, tau, delta.
        #[arg(long)]
        axis: SweepAxis,
        #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
        values: Vec<f64>,
        #[arg(long, value_enum)]
        preset: Option<Preset>,
    },
    /// Compare traces across hierarchy orders.
    Convergence {
        /// Orders to compare (default from the document, 10,20).
        #[arg(long, value_delimiter = ',')]
        orders: Option<Vec<usize>>,
        /// Largest acceptable max |ΔF| between any two orders.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Cross-check the hierarchy against the oracles and the Markov closure.
    Validate,
    /// Draw traces into an SVG line chart.
    Plot {
        /// Trace CSVs; alternatively use --manifest.
        csv: Vec<PathBuf>,
        /// Plot every run of a manifest, labeled as recorded there.
        #[arg(long, conflicts_with = "csv")]
        manifest: Option<PathBuf>,
        /// Legend labels, one per CSV (default: file stems).
        #[arg(long, value_delimiter = ',')]
        labels: Vec<String>,
        #[arg(long, value_enum, default_value = "fidelity")]
        layout: Layout,
        #[arg(long, default_value = "Dark-state fidelity")]
        title: String,
        /// SVG path (default: <out>/fidelity.svg).
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

struct Job {
    label: String,
    csv: String,
    document: JobDocument,
}

struct Context {
    common: Common,
    registry: Registry,
    started: Instant,
}

impl Context {
    fn document(&self, file: Option<&Value>) -> CliResult<JobDocument> {
        let doc = resolve(file, &self.common.overrides)?;
        self.registry.create(&doc.method, &doc.method_options())?;
        Ok(doc)
    }

    fn config_value(&self) -> CliResult<Option<Value>> {
        self.common.config.as_deref().map(read_json).transpose()
    }

    fn out_dir(&self) -> CliResult<&Path> {
        let dir = self.common.out.as_path();
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(dir)
    }

    fn pool(&self) -> CliResult<rayon::ThreadPool> {
        let workers = match self.common.workers {
            Some(0) => return Err(CliError::Usage("--workers must be at least 1".into())),
            Some(n) => n,
            None => std::thread::available_parallelism().map_or(1, |n| n.get()),
        };
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start {workers} workers: {e}")))
    }

    fn propagate(&self, doc: &JobDocument) -> CliResult<MethodOutput> {
        let method = self.registry.create(&doc.method, &doc.method_options())?;
        Ok(method.propagate(&doc.run_config())?)
    }

    /// Runs the jobs on the worker pool, then writes every CSV from this
    /// thread in job order.
    fn run_jobs(&self, jobs: Vec<Job>, manifest: &mut Manifest) -> CliResult<Vec<MethodOutput>> {
        let pool = self.pool()?;
        let results: Vec<CliResult<MethodOutput>> = pool.install(|| jobs.par_iter().map(|j| self.propagate(&j.document)).collect());
        let dir = self.out_dir()?;
        let mut outputs = Vec::with_capacity(jobs.len());
        for (job, result) in jobs.into_iter().zip(results) {
            let out = result.inspect_err(|_| eprintln!("run `{}` failed", job.label))?;
            write_trace(&dir.join(&job.csv), &out.trace)?;
            let last = out.trace.last().map_or(f64::NAN, |r| r.fidelity);
            println!("{}: F(t_end) = {last:.6} -> {}", job.label, job.csv);
            manifest.runs.push(RunEntry {
                label: job.label,
                csv: job.csv,
                config: job.document,
                diagnostics: out.diagnostics.clone(),
            });
            outputs.push(out);
        }
        Ok(outputs)
    }

    fn finish(&self, mut manifest: Manifest) -> CliResult<()> {
        manifest.wall_clock_seconds = self.started.elapsed().as_secs_f64();
        let path = manifest.write(self.out_dir()?)?;
        println!("manifest: {}", path.display());
        match manifest.verdict {
            Some(Verdict::Fail) => Err(CliError::VerdictFailed(format!("{} verdict: FAIL", manifest.subcommand))),
            _ => Ok(()),
        }
    }
}

fn simulate(ctx: &Context) -> CliResult<()> {
    let file = ctx.config_value()?;
    if let Some(value) = file.as_ref().filter(|v| Manifest::is_manifest(v)) {
        return replay(ctx, value.clone());
    }
    let doc = ctx.document(file.as_ref())?;
    let mut manifest = Manifest::new("simulate", doc.clone());
    let job = Job {
        label: doc.method.clone(),
        csv: csv_name(0, &doc.method),
        document: doc,
    };
    ctx.run_jobs(vec![job], &mut manifest)?;
    ctx.finish(manifest)
}

/// Re-runs every entry of a manifest from its recorded document.
fn replay(ctx: &Context, value: Value) -> CliResult<()> {
    if !ctx.common.overrides.is_empty() {
        return Err(CliError::Usage("--set cannot be combined with a manifest replay".into()));
    }
    let recorded = Manifest::from_value(value)?;
    let mut manifest = Manifest::new(&recorded.subcommand, recorded.config.clone());
    let jobs = recorded
        .runs
        .into_iter()
        .map(|r| Job {
            label: r.label,
            csv: r.csv,
            document: r.config,
        })
        .collect();
    ctx.run_jobs(jobs, &mut manifest)?;
    ctx.finish(manifest)
}

fn sweep(ctx: &Context, axis: SweepAxis, values: &[f64], preset: Option<Preset>) -> CliResult<()> {
    let base = ctx.document(ctx.config_value()?.as_ref())?;
    let points = sweep_points(&base, axis, values, preset)?;
    let mut manifest = Manifest::new("sweep", base);
    let jobs = points
        .into_iter()
        .enumerate()
        .map(|(i, SweepPoint { label, document })| Job {
            csv: csv_name(i, &label),
            label,
            document,
        })
        .collect();
    ctx.run_jobs(jobs, &mut manifest)?;
    ctx.finish(manifest)
}

fn convergence(ctx: &Context, orders: Option<Vec<usize>>, threshold: Option<f64>) -> CliResult<()> {
    let mut base = ctx.document(ctx.config_value()?.as_ref())?;
    if base.method != "hierarchy" {
        return Err(CliError::Usage("convergence compares hierarchy orders; use method=hierarchy".into()));
    }
    if let Some(orders) = orders {
        base.convergence.orders = orders;
    }
    if let Some(threshold) = threshold {
        base.convergence.threshold = threshold;
    }
    let orders = base.convergence.orders.clone();
    if orders.is_empty() {
        return Err(CliError::Usage("convergence needs at least one order".into()));
    }
    let mut manifest = Manifest::new("convergence", base.clone());
    let jobs = orders
        .iter()
        .enumerate()
        .map(|(i, &order)| {
            let label = format!("N={order}");
            Job {
                csv: csv_name(i, &label),
                label,
                document: JobDocument { order, ..base.clone() },
            }
        })
        .collect();
    let outputs = ctx.run_jobs(jobs, &mut manifest)?;
    let traces: Vec<_> = outputs.into_iter().map(|o| o.trace).collect();
    let report = ConvergenceReport::from_traces(&orders, &traces, base.convergence.threshold)?;
    for p in &report.pairs {
        println!("N={} vs N={}: max |dF| = {:.3e}", p.order_a, p.order_b, p.max_delta);
    }
    println!("convergence: {} (threshold {:.1e})", report.verdict, report.threshold);
    manifest.verdict = Some(report.verdict);
    manifest.convergence = Some(report);
    ctx.finish(manifest)
}

fn validate_command(ctx: &Context) -> CliResult<()> {
    let doc = ctx.document(ctx.config_value()?.as_ref())?;
    let report = validate(&doc.run_config(), &doc.oracle, &doc.validation)?;
    for c in &report.checks {
        let dev = c.deviation.map_or("n/a".to_owned(), |d| format!("{d:.3e}"));
        println!("{} {}: max |dF| = {dev} (tolerance {:.0e}); {}", c.verdict, c.name, c.tolerance, c.note);
    }
    println!("validation: {}", report.verdict);
    let mut manifest = Manifest::new("validate", doc);
    manifest.verdict = Some(report.verdict);
    manifest.validation = Some(report);
    ctx.finish(manifest)
}

fn plot_command(
    ctx: &Context,
    csv: Vec<PathBuf>,
    manifest: Option<PathBuf>,
    labels: Vec<String>,
    layout: Layout,
    title: &str,
    output: Option<PathBuf>,
) -> CliResult<()> {
    let inputs: Vec<(String, PathBuf)> = match manifest {
        Some(path) => {
            let m = Manifest::from_value(read_json(&path)?)?;
            let dir = path.parent().unwrap_or(Path::new("."));
            m.runs.into_iter().map(|r| (r.label, dir.join(r.csv))).collect()
        }
        None => {
            if !labels.is_empty() && labels.len() != csv.len() {
                return Err(CliError::Usage(format!("{} labels for {} CSV files", labels.len(), csv.len())));
            }
            csv.into_iter()
                .enumerate()
                .map(|(i, p)| {
                    let label = labels.get(i).cloned().unwrap_or_else(|| {
                        p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned())
                    });
                    (label, p)
                })
                .collect()
        }
    };
    let curves = inputs
        .into_iter()
        .map(|(label, path)| Ok(Curve { label, trace: read_trace(&path)? }))
        .collect::<CliResult<Vec<_>>>()?;
    let svg = render(&curves, layout, title)?;
    let path = match output {
        Some(p) => p,
        None => ctx.out_dir()?.join("fidelity.svg"),
    };
    fs::write(&path, svg).map_err(|e| CliError::io(&path, e))?;
    println!("plot: {}", path.display());
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    let ctx = Context {
        common: cli.common,
        registry: Registry::builtin(),
        started: Instant::now(),
    };
    match cli.command {
        Command::Simulate => simulate(&ctx),
        Command::Sweep { axis, values, preset } => sweep(&ctx, axis, &values, preset),
        Command::Convergence { orders, threshold } => convergence(&ctx, orders, threshold),
        Command::Validate => validate_command(&ctx),
        Command::Plot {
            csv,
            manifest,
            labels,
            layout,
            title,
            output,
        } => plot_command(&ctx, csv, manifest, labels, layout, &title, output),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
