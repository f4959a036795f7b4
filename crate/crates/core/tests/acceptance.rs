//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

use std::process::ExitCode;
use std::thread;
use std::time::{Duration, Instant};

use lambda_heom::integrator::Propagation;
use lambda_heom::oracle::{convergence_gate, schrodinger_propagate, OracleSettings};
use lambda_heom::{
    coupling_matrices, db_basis_coefficients, propagate, propagate_markov, BathParams, Baths, Component,
    FidelityTrace, PulseTrain, RunConfig, SystemParams, C64,
};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn config(coupling: f64, bandwidth: f64, t_end: f64) -> RunConfig {
    RunConfig {
        t_end,
        baths: Baths::symmetric(BathParams::new(coupling, bandwidth).unwrap()),
        ..RunConfig::default()
    }
}

/// Propagates all configs on separate threads, preserving order.
fn run_all(configs: &[RunConfig]) -> Vec<Propagation> {
    thread::scope(|s| {
        let handles: Vec<_> = configs.iter().map(|c| s.spawn(move || propagate(c))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("propagation thread panicked").expect("propagation failed"))
            .collect()
    })
}

fn strictly_increasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[0] < w[1])
}

fn max_deviation_from_one(trace: &FidelityTrace) -> f64 {
    trace.fidelities().map(|f| (f - 1.0).abs()).fold(0.0, f64::max)
}

fn closed_system_exactness() -> Outcome {
    let run = propagate(&config(0.0, 0.6, 50.0)).unwrap();
    let dev = max_deviation_from_one(&run.trace);
    outcome(dev < 1e-9, format!("max |F - 1| = {dev:.3e} over {} samples", run.trace.len()))
}

fn hierarchy_order_convergence() -> Outcome {
    let base = config(1.0, 0.6, 50.0);
    let runs = run_all(&[RunConfig { order: 10, ..base }, RunConfig { order: 20, ..base }]);
    let delta = runs[0].trace.max_fidelity_deviation(&runs[1].trace).unwrap();
    outcome(delta < 1e-5, format!("max |F10 - F20| = {delta:.3e}"))
}

fn coupling_strength_ordering() -> Outcome {
    let couplings = [1.0, 0.5, 0.1];
    let mut configs: Vec<RunConfig> = couplings.iter().map(|&g| config(g, 0.6, 50.0)).collect();
    configs[0].t_end = 100.0;
    let runs = run_all(&configs);
    let crossings: Vec<f64> = runs
        .iter()
        .map(|r| r.trace.first_time_below(0.9).unwrap_or(f64::INFINITY))
        .collect();
    let ordered = strictly_increasing(&crossings) && crossings[2].is_finite();

    let strong = &runs[0].trace;
    let (lo, hi) = strong.band(40.0, 50.0).unwrap();
    let (lo_ext, hi_ext) = strong.band(40.0, 100.0).unwrap();
    let (lo_late, hi_late) = strong.band(20.0, 100.0).unwrap();
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
    let band_stable = rel(lo_ext, lo) < 0.2 && rel(hi_ext, hi) < 0.2;
    let mid = 0.5 * (lo + hi);
    let stationary_by_20 = rel(lo_late, mid) < 0.2 && rel(hi_late, mid) < 0.2;
    outcome(
        ordered && band_stable && stationary_by_20,
        format!(
            "first F<0.9 at t = {:.2} / {:.2} / {:.2} for Gamma = 1 / 0.5 / 0.1; \
             Gamma=1 band [40,50] = ({lo:.6}, {hi:.6}), [40,100] = ({lo_ext:.6}, {hi_ext:.6}), \
             [20,100] = ({lo_late:.6}, {hi_late:.6})",
            crossings[0], crossings[1], crossings[2]
        ),
    )
}

fn bandwidth_ordering() -> Outcome {
    let bandwidths = [0.3, 0.6, 1.2, 3.0];
    let configs: Vec<RunConfig> = bandwidths.iter().map(|&g| config(0.1, g, 20.0)).collect();
    let finals: Vec<f64> = run_all(&configs)
        .iter()
        .map(|r| r.trace.fidelity_at(20.0).unwrap())
        .collect();
    let reversed: Vec<f64> = finals.iter().rev().copied().collect();
    outcome(
        strictly_increasing(&reversed),
        format!(
            "F(20) = {:.4} / {:.4} / {:.4} / {:.4} for gamma = 0.3 / 0.6 / 1.2 / 3",
            finals[0], finals[1], finals[2], finals[3]
        ),
    )
}

fn oracle_settings(rwa: bool) -> OracleSettings {
    OracleSettings {
        modes: 401,
        window: 12.0,
        n_max: 2,
        rwa,
        dt: 0.005,
    }
}

fn rwa_persistence() -> Outcome {
    let settings = oracle_settings(true);
    let run = schrodinger_propagate(&settings.problem(&config(0.1, 0.6, 2.0)).unwrap()).unwrap();
    let dev = max_deviation_from_one(&run.trace);
    outcome(
        dev < 1e-3,
        format!(
            "max |F - 1| = {dev:.3e}, excitation drift {:.3e}, norm error {:.3e}, basis {}",
            run.excitation_drift, run.norm_error, run.basis_size
        ),
    )
}

fn oracle_cross_validation() -> Outcome {
    let base = config(0.1, 0.6, 2.0);
    let (hierarchy, gate) = thread::scope(|s| {
        let h = s.spawn(|| propagate(&base).unwrap().trace);
        let g = convergence_gate(&base, &oracle_settings(false)).unwrap();
        (h.join().unwrap(), g)
    });
    let delta = hierarchy.max_fidelity_deviation(&gate.run.trace).unwrap();
    outcome(
        gate.passed && delta < 1e-2,
        format!(
            "gate {}: {}; max |F_hierarchy - F_oracle| = {delta:.3e}",
            if gate.passed { "passed" } else { "FAILED" },
            gate.describe()
        ),
    )
}

fn markov_closure() -> Outcome {
    let c = config(0.1, 20.0, 50.0);
    let (h, m) = thread::scope(|s| {
        let m = s.spawn(|| propagate_markov(&c).unwrap().trace);
        (propagate(&c).unwrap().trace, m.join().unwrap())
    });
    let delta = h.max_fidelity_deviation(&m).unwrap();
    outcome(delta < 2e-2, format!("max |F_hierarchy - F_markov| = {delta:.3e}"))
}

fn pulse_strength_ordering() -> Outcome {
    let strengths = [0.0, 3.0, 6.0];
    let configs: Vec<RunConfig> = strengths
        .iter()
        .map(|&h| RunConfig {
            pulse: PulseTrain::enabled(h, 0.2, 0.1).unwrap(),
            ..config(0.1, 0.6, 50.0)
        })
        .collect();
    let finals: Vec<f64> = run_all(&configs)
        .iter()
        .map(|r| r.trace.fidelity_at(50.0).unwrap())
        .collect();
    let ordered = strictly_increasing(&finals);
    let deficit = 1.0 - finals[0];
    let floor = 0.95 * (1.0 - deficit);
    let recovered = (finals[2] - finals[0]) / deficit;
    outcome(
        ordered && finals[2] > floor,
        format!(
            "F(50) = {:.4} / {:.4} / {:.4} for h = 0 / 3 / 6; floor {floor:.4}; {:.0}% of the unpulsed deficit recovered",
            finals[0],
            finals[1],
            finals[2],
            100.0 * recovered
        ),
    )
}

fn pulse_period_ordering() -> Outcome {
    let periods = [0.8, 0.4, 0.2];
    let configs: Vec<RunConfig> = periods
        .iter()
        .map(|&tau| RunConfig {
            pulse: PulseTrain::fixed_area(0.6, tau, 0.5).unwrap(),
            ..config(0.1, 0.6, 50.0)
        })
        .collect();
    let finals: Vec<f64> = run_all(&configs)
        .iter()
        .map(|r| r.trace.fidelity_at(50.0).unwrap())
        .collect();
    outcome(
        strictly_increasing(&finals),
        format!(
            "F(50) = {:.4} / {:.4} / {:.4} for tau = 0.8 / 0.4 / 0.2",
            finals[0], finals[1], finals[2]
        ),
    )
}

/// Coupling matrices as multiples of i, one row per line.
const COUPLING_A: [[i8; 9]; 9] = [
    [0, 0, 0, 1, 0, 0, -1, 0, 0],
    [0, 0, 0, 0, 0, 0, 0, 0, 0],
    [0, 0, 0, -1, 0, 0, 1, 0, 0],
    [1, 0, -1, 0, 0, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 0, 0, 0, 1],
    [0, 0, 0, 0, 0, 0, 0, -1, 0],
    [-1, 0, 1, 0, 0, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, -1, 0, 0, 0],
    [0, 0, 0, 0, 1, 0, 0, 0, 0],
];

const COUPLING_B: [[i8; 9]; 9] = [
    [0, 0, 0, 0, 0, 0, 0, 0, 0],
    [0, 0, 0, 0, 1, 0, 0, -1, 0],
    [0, 0, 0, 0, -1, 0, 0, 1, 0],
    [0, 0, 0, 0, 0, 1, 0, 0, 0],
    [0, 1, -1, 0, 0, 0, 0, 0, 0],
    [0, 0, 0, 1, 0, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 0, 0, 0, -1],
    [0, -1, 1, 0, 0, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 0, -1, 0, 0],
];

fn structural_invariants() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;

    let strong = propagate(&config(1.0, 0.6, 50.0)).unwrap().trace;
    let drift = strong.max_trace_drift();
    let herm = strong.max_hermiticity_error();
    ok &= drift < 1e-9 && herm < 1e-8;
    notes.push(format!("trace drift {drift:.2e}, hermiticity {herm:.2e}"));

    let final_state = |dt: f64| {
        let c = RunConfig {
            dt,
            sample_every: 0.04,
            order: 4,
            ..config(0.1, 0.6, 5.0)
        };
        propagate(&c).unwrap().final_state.as_slice().to_vec()
    };
    let diff = |a: &[C64], b: &[C64]| a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
    let (y1, y2, y3) = (final_state(0.04), final_state(0.02), final_state(0.01));
    let order = (diff(&y1, &y2) / diff(&y2, &y3)).log2();
    ok &= order >= 3.7;
    notes.push(format!("RK4 order {order:.2}"));

    let mut identity_err = 0.0_f64;
    for (d1, d2) in [(0.5, 0.2), (0.3, -0.9), (1.4, 0.05)] {
        let p = SystemParams::real(-1.0, -1.2, 0.0, d1, d2).unwrap();
        for k in 0..50 {
            let t = 0.37 * k as f64;
            let (ka, kb) = db_basis_coefficients(&p, t).lower_level_kets(&p, t);
            let one = C64::new(1.0, 0.0);
            let zero = C64::default();
            for (got, want) in ka.iter().zip([one, zero, zero]).chain(kb.iter().zip([zero, one, zero])) {
                identity_err = identity_err.max((got - want).norm());
            }
        }
    }
    ok &= identity_err < 1e-12;
    notes.push(format!("dark/bright re-expansion error {identity_err:.2e}"));

    let (la, lb) = coupling_matrices();
    let mut mismatches = 0;
    for (computed, table) in [(&la, &COUPLING_A), (&lb, &COUPLING_B)] {
        for (r, row) in Component::ALL.iter().enumerate() {
            for (c, col) in Component::ALL.iter().enumerate() {
                if computed.entry(*row, *col) != C64::new(0.0, f64::from(table[r][c])) {
                    mismatches += 1;
                }
            }
        }
    }
    ok &= mismatches == 0;
    notes.push(format!("{mismatches} coupling-matrix entry mismatches"));

    outcome(ok, notes.join("; "))
}

type Criterion = (&'static str, fn() -> Outcome, Option<Duration>);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("closed-system exactness", closed_system_exactness, Some(Duration::from_secs(5))),
        ("hierarchy order convergence", hierarchy_order_convergence, Some(Duration::from_secs(60))),
        ("decay ordering in coupling strength", coupling_strength_ordering, None),
        ("decay ordering in bath bandwidth", bandwidth_ordering, None),
        ("dark-state persistence without counter-rotating terms", rwa_persistence, Some(Duration::from_secs(120))),
        ("hierarchy against explicit-bath oracle", oracle_cross_validation, Some(Duration::from_secs(300))),
        ("Markov closure at large bandwidth", markov_closure, None),
        ("pulse strength ordering", pulse_strength_ordering, None),
        ("pulse period ordering at fixed area", pulse_period_ordering, None),
        ("structural invariants", structural_invariants, Some(Duration::from_secs(30))),
    ];
    let mut failures = 0;
    for (k, (name, check, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let on_time = budget.is_none_or(|b| elapsed <= b);
        let passed = result.passed && on_time;
        failures += usize::from(!passed);
        let timing = match budget {
            Some(b) => format!("{:.1}s of {}s", elapsed.as_secs_f64(), b.as_secs()),
            None => format!("{:.1}s", elapsed.as_secs_f64()),
        };
        println!(
            "{} criterion {}: {name}: {} [{timing}]",
            if passed { "PASS" } else { "FAIL" },
            k + 1,
            result.detail
        );
    }
    if failures == 0 {
        println!("acceptance: all {} criteria passed", criteria.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failures} of {} criteria failed", criteria.len());
        ExitCode::FAILURE
    }
}
