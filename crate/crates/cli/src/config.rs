//! Job documents: one JSON object mirroring the run configuration, plus
//! `key=value` overrides addressed by dotted paths.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use lambda_heom::analysis::ValidationSettings;
use lambda_heom::oracle::OracleSettings;
use lambda_heom::{Baths, MethodOptions, PulseTrain, RunConfig, SystemParams};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceSettings {
    pub orders: Vec<usize>,
    pub threshold: f64,
}

impl Default for ConvergenceSettings {
    fn default() -> Self {
        Self {
            orders: vec![10, 20],
            threshold: 1e-5,
        }
    }
}

/// Everything needed to reproduce one invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JobDocument {
    /// Registry name of the propagator.
    pub method: String,
    pub t_end: f64,
    pub dt: f64,
    pub sample_every: f64,
    #[serde(rename = "N")]
    pub order: usize,
    pub params: SystemParams,
    pub baths: Baths,
    pub pulse: PulseTrain,
    pub oracle: OracleSettings,
    pub validation: ValidationSettings,
    pub convergence: ConvergenceSettings,
}

impl Default for JobDocument {
    fn default() -> Self {
        let run = RunConfig::default();
        Self {
            method: "hierarchy".into(),
            t_end: run.t_end,
            dt: run.dt,
            sample_every: run.sample_every,
            order: run.order,
            params: run.params,
            baths: run.baths,
            pulse: run.pulse,
            oracle: OracleSettings::default(),
            validation: ValidationSettings::default(),
            convergence: ConvergenceSettings::default(),
        }
    }
}

impl JobDocument {
    pub fn run_config(&self) -> RunConfig {
        RunConfig {
            t_end: self.t_end,
            dt: self.dt,
            sample_every: self.sample_every,
            order: self.order,
            params: self.params,
            baths: self.baths,
            pulse: self.pulse,
        }
    }

    pub fn method_options(&self) -> MethodOptions {
        MethodOptions { oracle: self.oracle }
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("job documents always serialize")
    }

    /// Deserializes with the failing field path in the error.
    pub fn from_value(value: Value) -> CliResult<Self> {
        serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            CliError::config(path, e.into_inner().to_string())
        })
    }
}

/// Shorthand keys and the dotted paths they expand to. Pulse shorthands also
/// switch the pulse train on.
fn expand_key(key: &str) -> Vec<&str> {
    match key {
        "Gamma" => vec!["baths.a.Gamma", "baths.b.Gamma"],
        "gamma" => vec!["baths.a.gamma", "baths.b.gamma"],
        "h" => vec!["pulse.h", "pulse.enabled"],
        "tau" => vec!["pulse.tau", "pulse.enabled"],
        "delta" => vec!["pulse.delta", "pulse.enabled"],
        other => vec![other],
    }
}

/// Replaces the leaf at `path`, which must already exist in `doc`.
fn set_path(doc: &mut Value, path: &str, value: Value) -> CliResult<()> {
    let mut node = doc;
    for part in path.split('.') {
        node = node
            .as_object_mut()
            .and_then(|m| m.get_mut(part))
            .ok_or_else(|| CliError::config(path, "no such setting"))?;
    }
    *node = value;
    Ok(())
}

/// Parses `raw` as JSON, falling back to a plain string.
fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_owned()))
}

pub fn apply_override(doc: &mut Value, key: &str, value: Value) -> CliResult<()> {
    for path in expand_key(key) {
        if path == "pulse.enabled" {
            set_path(doc, path, Value::Bool(true))?;
        } else {
            set_path(doc, path, value.clone())?;
        }
    }
    Ok(())
}

/// Applies `key=value` strings in order.
pub fn apply_overrides(doc: &mut Value, overrides: &[String]) -> CliResult<()> {
    for raw in overrides {
        let (key, value) = raw
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("override `{raw}` is not of the form key=value")))?;
        apply_override(doc, key.trim(), parse_value(value.trim()))?;
    }
    Ok(())
}

/// Copies every key of `overlay` onto `base`, recursing into objects.
/// Keys unknown to `base` are rejected with their full path.
fn merge(base: &mut Map<String, Value>, overlay: Map<String, Value>, prefix: &str) -> CliResult<()> {
    for (key, value) in overlay {
        let path = if prefix.is_empty() {
            key.clone()
        } else {
            format!("{prefix}.{key}")
        };
        match (base.get_mut(&key), value) {
            (None, _) => return Err(CliError::config(path, "unknown field")),
            (Some(Value::Object(inner)), Value::Object(overlay)) => merge(inner, overlay, &path)?,
            (Some(slot), value) => *slot = value,
        }
    }
    Ok(())
}

/// Defaults, overlaid with `file` and then with `overrides`.
pub fn resolve(file: Option<&Value>, overrides: &[String]) -> CliResult<JobDocument> {
    let mut doc = JobDocument::default().to_value();
    if let Some(file) = file {
        let Value::Object(overlay) = file.clone() else {
            return Err(CliError::config("", "the config must be a JSON object"));
        };
        let Value::Object(base) = &mut doc else { unreachable!() };
        merge(base, overlay, "")?;
    }
    apply_overrides(&mut doc, overrides)?;
    JobDocument::from_value(doc)
}

pub fn read_json(path: &Path) -> CliResult<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::config(path.display().to_string(), e.to_string()))
}

/// Parameters a sweep may vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    Gamma,
    #[serde(rename = "gamma")]
    Bandwidth,
    N,
    #[serde(rename = "h")]
    Strength,
    #[serde(rename = "tau")]
    Period,
    #[serde(rename = "delta")]
    Duration,
}

impl SweepAxis {
    pub const ALL: [SweepAxis; 6] = [
        SweepAxis::Gamma,
        SweepAxis::Bandwidth,
        SweepAxis::N,
        SweepAxis::Strength,
        SweepAxis::Period,
        SweepAxis::Duration,
    ];

    pub fn key(self) -> &'static str {
        match self {
            SweepAxis::Gamma => "Gamma",
            SweepAxis::Bandwidth => "gamma",
            SweepAxis::N => "N",
            SweepAxis::Strength => "h",
            SweepAxis::Period => "tau",
            SweepAxis::Duration => "delta",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for SweepAxis {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        Self::ALL.into_iter().find(|a| a.key() == s).ok_or_else(|| {
            let names: Vec<_> = Self::ALL.iter().map(|a| a.key()).collect();
            CliError::Usage(format!("sweep axis `{s}` is not one of {}", names.join(", ")))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Δ = τ/2 and h = 0.6/Δ, i.e. pulse area 0.6 per period; sweeps τ.
    FixedArea,
}

pub const FIXED_AREA: f64 = 0.6;

/// One point of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub label: String,
    pub document: JobDocument,
}

/// Expands `base` along `axis`, one document per value.
pub fn sweep_points(base: &JobDocument, axis: SweepAxis, values: &[f64], preset: Option<Preset>) -> CliResult<Vec<SweepPoint>> {
    if values.is_empty() {
        return Err(CliError::Usage("a sweep needs at least one value".into()));
    }
    if preset == Some(Preset::FixedArea) && axis != SweepAxis::Period {
        return Err(CliError::Usage("the fixed-area preset sweeps tau".into()));
    }
    values
        .iter()
        .map(|&v| {
            let mut doc = base.to_value();
            let value = if axis == SweepAxis::N {
                if !(v >= 0.0 && v.fract() == 0.0) {
                    return Err(CliError::Usage(format!("N must be a non-negative integer, got {v}")));
                }
                Value::from(v as u64)
            } else {
                Value::from(v)
            };
            apply_override(&mut doc, axis.key(), value)?;
            if preset == Some(Preset::FixedArea) {
                let delta = 0.5 * v;
                apply_override(&mut doc, "delta", Value::from(delta))?;
                apply_override(&mut doc, "h", Value::from(FIXED_AREA / delta))?;
            }
            Ok(SweepPoint {
                label: format!("{}={}", axis.key(), v),
                document: JobDocument::from_value(doc)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn defaults_resolve_to_reference_run() {
        let doc = resolve(None, &[]).unwrap();
        assert_eq!(doc, JobDocument::default());
        assert_eq!(doc.run_config(), RunConfig::default());
        assert_eq!(doc.method, "hierarchy");
    }

    #[test]
    fn shorthands_set_both_baths_and_enable_pulses() {
        let doc = resolve(None, &["Gamma=1".into(), "gamma=0.3".into(), "tau=0.2".into(), "delta=0.1".into(), "h=6".into()]).unwrap();
        assert_eq!(doc.baths.a.coupling(), 1.0);
        assert_eq!(doc.baths.b.coupling(), 1.0);
        assert_eq!(doc.baths.b.bandwidth(), 0.3);
        assert!(doc.pulse.is_enabled());
        assert_eq!((doc.pulse.strength(), doc.pulse.period(), doc.pulse.duration()), (6.0, 0.2, 0.1));
    }

    #[test]
    fn dotted_paths_and_string_values() {
        let doc = resolve(None, &["baths.b.Gamma=0.2".into(), "method=markov".into(), "N=4".into()]).unwrap();
        assert_eq!(doc.baths.a.coupling(), 0.1);
        assert_eq!(doc.baths.b.coupling(), 0.2);
        assert_eq!(doc.method, "markov");
        assert_eq!(doc.order, 4);
    }

    #[test]
    fn errors_carry_field_paths() {
        match resolve(None, &["baths.a.gamma=-1".into()]) {
            Err(CliError::Config { path, .. }) => assert_eq!(path, "baths.a"),
            other => panic!("unexpected {other:?}"),
        }
        match resolve(Some(&json!({"params": {"omega4": 1}})), &[]) {
            Err(CliError::Config { path, .. }) => assert_eq!(path, "params.omega4"),
            other => panic!("unexpected {other:?}"),
        }
        match resolve(Some(&json!({"dt": "small"})), &[]) {
            Err(CliError::Config { path, .. }) => assert_eq!(path, "dt"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(resolve(None, &["nothing=1".into()]), Err(CliError::Config { .. })));
        assert!(matches!(resolve(None, &["dt".into()]), Err(CliError::Usage(_))));
    }

    #[test]
    fn file_values_merge_into_defaults() {
        let doc = resolve(Some(&json!({"t_end": 2, "baths": {"a": {"Gamma": 0.5}}})), &["t_end=3".into()]).unwrap();
        assert_eq!(doc.t_end, 3.0);
        assert_eq!(doc.baths.a.coupling(), 0.5);
        assert_eq!(doc.baths.a.bandwidth(), 0.6);
        assert_eq!(doc.baths.b.coupling(), 0.1);
    }

    #[test]
    fn documents_round_trip_exactly() {
        let doc = resolve(None, &["Gamma=0.123456789012345678".into(), "params.Omega1=[0.5,0.1]".into()]).unwrap();
        let back = JobDocument::from_value(serde_json::from_str(&serde_json::to_string(&doc).unwrap()).unwrap()).unwrap();
        assert_eq!(back, doc);
    }

    #[test]
    fn sweep_axes_are_restricted() {
        assert_eq!("tau".parse::<SweepAxis>().unwrap(), SweepAxis::Period);
        assert!("dt".parse::<SweepAxis>().is_err());
        let base = JobDocument::default();
        assert!(sweep_points(&base, SweepAxis::Gamma, &[], None).is_err());
        assert!(sweep_points(&base, SweepAxis::N, &[2.5], None).is_err());
        assert!(sweep_points(&base, SweepAxis::Gamma, &[0.1], Some(Preset::FixedArea)).is_err());
    }

    #[test]
    fn fixed_area_preset_sets_duration_and_strength() {
        let points = sweep_points(&JobDocument::default(), SweepAxis::Period, &[0.8, 0.4, 0.2], Some(Preset::FixedArea)).unwrap();
        assert_eq!(points.len(), 3);
        for (p, tau) in points.iter().zip([0.8, 0.4, 0.2]) {
            let pulse = p.document.pulse;
            assert!(pulse.is_enabled());
            assert_eq!(pulse.period(), tau);
            assert_eq!(pulse.duration(), 0.5 * tau);
            assert!((pulse.strength() * pulse.duration() - FIXED_AREA).abs() < 1e-12);
        }
        assert_eq!(points[2].label, "tau=0.2");
    }

    #[test]
    fn order_sweep_uses_integers() {
        let points = sweep_points(&JobDocument::default(), SweepAxis::N, &[4.0, 10.0], None).unwrap();
        assert_eq!(points[0].document.order, 4);
        assert_eq!(points[1].label, "N=10");
    }
}
