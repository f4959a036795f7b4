//! Convergence and cross-validation reports built on top of the propagators.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{propagate, propagate_markov, FidelityTrace, RunConfig};
use crate::model::{BathParams, Baths};
use crate::oracle::{convergence_gate, schrodinger_propagate, OracleSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Pass,
    /// The reference could not be trusted, so nothing was concluded.
    Inconclusive,
    Fail,
}

impl Verdict {
    fn from_deviation(deviation: f64, tolerance: f64) -> Self {
        if deviation < tolerance {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    /// Fail dominates Inconclusive, which dominates Pass.
    pub fn combine(verdicts: impl IntoIterator<Item = Verdict>) -> Verdict {
        verdicts.into_iter().max().unwrap_or(Verdict::Pass)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Inconclusive => "INCONCLUSIVE",
            Verdict::Fail => "FAIL",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDelta {
    pub order_a: usize,
    pub order_b: usize,
    pub max_delta: f64,
}

/// Pairwise max |ΔF| between runs that differ only in hierarchy order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub orders: Vec<usize>,
    pub threshold: f64,
    pub pairs: Vec<PairDelta>,
    pub verdict: Verdict,
}

impl ConvergenceReport {
    /// `traces[i]` must belong to `orders[i]` and all traces must share a grid.
    pub fn from_traces(orders: &[usize], traces: &[FidelityTrace], threshold: f64) -> Result<Self> {
        if orders.is_empty() {
            return Err(Error::invalid("orders", "need at least one order"));
        }
        if orders.len() != traces.len() {
            return Err(Error::invalid("orders", "one trace per order is required"));
        }
        let mut pairs = Vec::new();
        for i in 0..orders.len() {
            for j in i + 1..orders.len() {
                if traces[i].len() != traces[j].len() {
                    return Err(Error::GridMismatch(format!(
                        "N = {} has {} samples, N = {} has {}",
                        orders[i],
                        traces[i].len(),
                        orders[j],
                        traces[j].len()
                    )));
                }
                pairs.push(PairDelta {
                    order_a: orders[i],
                    order_b: orders[j],
                    max_delta: traces[i].max_fidelity_deviation(&traces[j])?,
                });
            }
        }
        let verdict = Verdict::combine(pairs.iter().map(|p| Verdict::from_deviation(p.max_delta, threshold)));
        Ok(Self {
            orders: orders.to_vec(),
            threshold,
            pairs,
            verdict,
        })
    }

    pub fn max_delta(&self) -> f64 {
        self.pairs.iter().map(|p| p.max_delta).fold(0.0, f64::max)
    }
}

/// Propagates `config` once per order and compares the traces.
pub fn convergence(config: &RunConfig, orders: &[usize], threshold: f64) -> Result<ConvergenceReport> {
    let traces = orders
        .iter()
        .map(|&order| propagate(&RunConfig { order, ..*config }).map(|p| p.trace))
        .collect::<Result<Vec<_>>>()?;
    ConvergenceReport::from_traces(orders, &traces, threshold)
}

/// Tolerances and reference settings of [`validate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ValidationSettings {
    /// Duration of the oracle comparisons.
    pub oracle_t_end: f64,
    pub oracle_tolerance: f64,
    pub rwa_tolerance: f64,
    /// Bath bandwidth at which the Markov closure is compared.
    pub markov_bandwidth: f64,
    pub markov_t_end: f64,
    pub markov_tolerance: f64,
}

impl Default for ValidationSettings {
    fn default() -> Self {
        Self {
            oracle_t_end: 2.0,
            oracle_tolerance: 1e-2,
            rwa_tolerance: 1e-3,
            markov_bandwidth: 20.0,
            markov_t_end: 50.0,
            markov_tolerance: 2e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationCheck {
    pub name: String,
    /// None when the reference run could not be used.
    pub deviation: Option<f64>,
    pub tolerance: f64,
    pub verdict: Verdict,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<ValidationCheck>,
    pub verdict: Verdict,
}

impl ValidationReport {
    pub fn check(&self, name: &str) -> Option<&ValidationCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn inconclusive(name: &str, tolerance: f64, note: String) -> ValidationCheck {
    ValidationCheck {
        name: name.into(),
        deviation: None,
        tolerance,
        verdict: Verdict::Inconclusive,
        note,
    }
}

fn measured(name: &str, deviation: f64, tolerance: f64, note: String) -> ValidationCheck {
    ValidationCheck {
        name: name.into(),
        deviation: Some(deviation),
        tolerance,
        verdict: Verdict::from_deviation(deviation, tolerance),
        note,
    }
}

/// Hierarchy against the full oracle, RWA oracle against F ≡ 1, and the
/// hierarchy at large bandwidth against the Markov closure.
///
/// The oracle checks run to `settings.oracle_t_end`. Cutoff leakage and a
/// failed oracle convergence gate make the affected check INCONCLUSIVE.
pub fn validate(config: &RunConfig, oracle: &OracleSettings, settings: &ValidationSettings) -> Result<ValidationReport> {
    let short = RunConfig {
        t_end: settings.oracle_t_end,
        ..*config
    };
    let mut checks = Vec::with_capacity(3);

    let full = OracleSettings {
        rwa: false,
        ..*oracle
    };
    let hierarchy = propagate(&short)?.trace;
    checks.push(match convergence_gate(&short, &full) {
        Ok(gate) if gate.passed => {
            let dev = hierarchy.max_fidelity_deviation(&gate.run.trace)?;
            measured("oracle", dev, settings.oracle_tolerance, gate.describe())
        }
        Ok(gate) => inconclusive(
            "oracle",
            settings.oracle_tolerance,
            format!("oracle convergence gate failed: {}", gate.describe()),
        ),
        Err(e @ Error::CutoffLeakage { .. }) => inconclusive("oracle", settings.oracle_tolerance, e.to_string()),
        Err(e) => return Err(e),
    });

    let rwa = OracleSettings {
        rwa: true,
        ..*oracle
    };
    checks.push(match schrodinger_propagate(&rwa.problem(&short)?) {
        Ok(run) => {
            let dev = run.trace.fidelities().map(|f| (f - 1.0).abs()).fold(0.0, f64::max);
            let note = format!("excitation drift {:.3e}, norm error {:.3e}", run.excitation_drift, run.norm_error);
            measured("oracle-rwa", dev, settings.rwa_tolerance, note)
        }
        Err(e @ Error::CutoffLeakage { .. }) => inconclusive("oracle-rwa", settings.rwa_tolerance, e.to_string()),
        Err(e) => return Err(e),
    });

    let wide = |b: BathParams| BathParams::new(b.coupling(), settings.markov_bandwidth);
    let markov_config = RunConfig {
        t_end: settings.markov_t_end,
        baths: Baths::new(wide(config.baths.a)?, wide(config.baths.b)?),
        ..*config
    };
    let h = propagate(&markov_config)?.trace;
    let m = propagate_markov(&markov_config)?.trace;
    checks.push(measured(
        "markov",
        h.max_fidelity_deviation(&m)?,
        settings.markov_tolerance,
        format!("gamma = {} at N = {}", settings.markov_bandwidth, config.order),
    ));

    let verdict = Verdict::combine(checks.iter().map(|c| c.verdict));
    Ok(ValidationReport { checks, verdict })
}
