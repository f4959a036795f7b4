//! Named propagation methods behind a common trait object.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{propagate, propagate_markov, FidelityTrace, RunConfig};
use crate::oracle::{schrodinger_propagate, OracleSettings};

/// Result of one propagation: the trace plus method-specific scalars
/// (norm error, leakage bound, node count, ...).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MethodOutput {
    pub trace: FidelityTrace,
    pub diagnostics: BTreeMap<String, f64>,
}

/// Options that only some methods read.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MethodOptions {
    pub oracle: OracleSettings,
}

pub trait Propagator: Send + Sync {
    fn name(&self) -> &str;
    fn propagate(&self, config: &RunConfig) -> Result<MethodOutput>;
}

type Factory = Box<dyn Fn(&MethodOptions) -> Box<dyn Propagator> + Send + Sync>;

/// Maps method names to constructors.
pub struct Registry {
    factories: BTreeMap<String, Factory>,
}

impl std::fmt::Debug for Registry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Registry").field("methods", &self.names()).finish()
    }
}

impl Registry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    /// `hierarchy`, `markov`, `oracle` and `oracle-rwa`.
    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register("hierarchy", |_| Box::new(HierarchyMethod));
        r.register("markov", |_| Box::new(MarkovMethod));
        r.register("oracle", |o| {
            Box::new(OracleMethod {
                name: "oracle",
                settings: OracleSettings { rwa: false, ..o.oracle },
            })
        });
        r.register("oracle-rwa", |o| {
            Box::new(OracleMethod {
                name: "oracle-rwa",
                settings: OracleSettings { rwa: true, ..o.oracle },
            })
        });
        r
    }

    /// Adds or replaces the method called `name`.
    pub fn register<F>(&mut self, name: &str, factory: F)
    where
        F: Fn(&MethodOptions) -> Box<dyn Propagator> + Send + Sync + 'static,
    {
        self.factories.insert(name.to_owned(), Box::new(factory));
    }

    pub fn names(&self) -> Vec<&str> {
        self.factories.keys().map(String::as_str).collect()
    }

    pub fn create(&self, name: &str, options: &MethodOptions) -> Result<Box<dyn Propagator>> {
        self.factories
            .get(name)
            .map(|f| f(options))
            .ok_or_else(|| Error::UnknownMethod(name.to_owned(), self.names().join(", ")))
    }
}

impl Default for Registry {
    fn default() -> Self {
        Self::builtin()
    }
}

struct HierarchyMethod;

impl Propagator for HierarchyMethod {
    fn name(&self) -> &str {
        "hierarchy"
    }

    fn propagate(&self, config: &RunConfig) -> Result<MethodOutput> {
        let run = propagate(config)?;
        let mut diagnostics = BTreeMap::new();
        diagnostics.insert("nodes".into(), run.final_state.node_count() as f64);
        diagnostics.insert("max_trace_drift".into(), run.trace.max_trace_drift());
        diagnostics.insert("max_herm_err".into(), run.trace.max_hermiticity_error());
        Ok(MethodOutput {
            trace: run.trace,
            diagnostics,
        })
    }
}

struct MarkovMethod;

impl Propagator for MarkovMethod {
    fn name(&self) -> &str {
        "markov"
    }

    fn propagate(&self, config: &RunConfig) -> Result<MethodOutput> {
        let run = propagate_markov(config)?;
        let mut diagnostics = BTreeMap::new();
        diagnostics.insert("max_trace_drift".into(), run.trace.max_trace_drift());
        Ok(MethodOutput {
            trace: run.trace,
            diagnostics,
        })
    }
}

struct OracleMethod {
    name: &'static str,
    settings: OracleSettings,
}

impl Propagator for OracleMethod {
    fn name(&self) -> &str {
        self.name
    }

    fn propagate(&self, config: &RunConfig) -> Result<MethodOutput> {
        let run = schrodinger_propagate(&self.settings.problem(config)?)?;
        let diagnostics = BTreeMap::from([
            ("basis_size".to_owned(), run.basis_size as f64),
            ("norm_error".to_owned(), run.norm_error),
            ("cutoff_leakage".to_owned(), run.cutoff_leakage),
            ("top_sector_population".to_owned(), run.top_sector_population),
            ("excitation_drift".to_owned(), run.excitation_drift),
        ]);
        Ok(MethodOutput {
            trace: run.trace,
            diagnostics,
        })
    }
}
