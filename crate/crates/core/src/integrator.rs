//! Fixed-step RK4 propagation with steps split at pulse discontinuities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::{markov_dissipator, system_matrix_at_level};
use crate::hierarchy::{init_state, HierarchyState, HierarchySystem};
use crate::model::{
    bloch_to_density, dark_state, density_to_bloch, fidelity_with_tolerance, Baths, BlochVector,
    DensityMatrix, PulseTrain, SystemParams, C64,
};

/// Tolerance on trace drift and on the pre-clamp fidelity during propagation.
pub const DRIFT_TOLERANCE: f64 = 1e-6;

/// A linear ODE dy/dt = G(t, c) y where c is the pulse level, held constant
/// by the caller over each sub-step.
pub trait LinearDynamics {
    fn dim(&self) -> usize;

    /// Overwrites `dy` with the derivative at `(t, level)`.
    fn derivative(&self, t: f64, level: f64, y: &[C64], dy: &mut [C64]);
}

/// Classical RK4 with preallocated stage buffers.
#[derive(Debug, Clone)]
pub struct Rk4 {
    k1: Vec<C64>,
    k2: Vec<C64>,
    k3: Vec<C64>,
    k4: Vec<C64>,
    scratch: Vec<C64>,
}

impl Rk4 {
    pub fn new(dim: usize) -> Self {
        let z = vec![C64::default(); dim];
        Self {
            k1: z.clone(),
            k2: z.clone(),
            k3: z.clone(),
            k4: z.clone(),
            scratch: z,
        }
    }

    pub fn step<S: LinearDynamics + ?Sized>(&mut self, system: &S, t: f64, h: f64, level: f64, y: &mut [C64]) {
        system.derivative(t, level, y, &mut self.k1);
        for (s, (y, k)) in self.scratch.iter_mut().zip(y.iter().zip(&self.k1)) {
            *s = y + k * (0.5 * h);
        }
        system.derivative(t + 0.5 * h, level, &self.scratch, &mut self.k2);
        for (s, (y, k)) in self.scratch.iter_mut().zip(y.iter().zip(&self.k2)) {
            *s = y + k * (0.5 * h);
        }
        system.derivative(t + 0.5 * h, level, &self.scratch, &mut self.k3);
        for (s, (y, k)) in self.scratch.iter_mut().zip(y.iter().zip(&self.k3)) {
            *s = y + k * h;
        }
        system.derivative(t + h, level, &self.scratch, &mut self.k4);
        let w = h / 6.0;
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += w * (self.k1[i] + 2.0 * (self.k2[i] + self.k3[i]) + self.k4[i]);
        }
    }
}

/// Uniform step grid with samples every `stride` steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepGrid {
    pub dt: f64,
    pub steps: usize,
    pub stride: usize,
}

impl StepGrid {
    pub fn new(t_end: f64, dt: f64, sample_every: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid("dt", "must be > 0"));
        }
        if !(sample_every.is_finite() && sample_every >= dt) {
            return Err(Error::invalid("sample_every", "must be >= dt"));
        }
        if !(t_end.is_finite() && t_end >= sample_every) {
            return Err(Error::invalid("t_end", "must be >= sample_every"));
        }
        let steps = whole_multiple(t_end, dt).ok_or_else(|| {
            Error::invalid("t_end", format!("must be an integer multiple of dt = {dt}"))
        })?;
        let stride = whole_multiple(sample_every, dt).ok_or_else(|| {
            Error::invalid("sample_every", format!("must be an integer multiple of dt = {dt}"))
        })?;
        Ok(Self { dt, steps, stride })
    }

    pub fn time(&self, step: usize) -> f64 {
        step as f64 * self.dt
    }
}

fn whole_multiple(x: f64, unit: f64) -> Option<usize> {
    let n = (x / unit).round();
    ((n * unit - x).abs() <= 1e-9 * x.abs().max(unit) && n >= 1.0).then_some(n as usize)
}

/// Integrates `y` over the grid, calling `observe` at t = 0 and at every
/// sample time. Steps straddling a pulse edge are split at the edge and the
/// pulse level is frozen per sub-step.
pub fn integrate<S, F>(
    system: &S,
    pulse: &PulseTrain,
    grid: &StepGrid,
    y: &mut [C64],
    mut observe: F,
) -> Result<()>
where
    S: LinearDynamics + ?Sized,
    F: FnMut(f64, &[C64]) -> Result<()>,
{
    let mut rk = Rk4::new(system.dim());
    observe(0.0, y)?;
    for k in 0..grid.steps {
        let t0 = grid.time(k);
        let t1 = grid.time(k + 1);
        let margin = 1e-12 * t1.abs().max(1.0);
        let mut a = t0;
        for edge in pulse
            .edges_within(t0, t1, margin)
            .into_iter()
            .chain(std::iter::once(t1))
        {
            let level = pulse.level(0.5 * (a + edge));
            rk.step(system, a, edge - a, level, y);
            a = edge;
        }
        if (k + 1) % grid.stride == 0 {
            observe(t1, y)?;
        }
    }
    Ok(())
}

/// Settings of one propagation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub t_end: f64,
    pub dt: f64,
    pub sample_every: f64,
    /// Hierarchy truncation order.
    #[serde(rename = "N")]
    pub order: usize,
    pub params: SystemParams,
    pub baths: Baths,
    pub pulse: PulseTrain,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            t_end: 50.0,
            dt: 1e-3,
            sample_every: 0.05,
            order: 10,
            params: SystemParams::default(),
            baths: Baths::default(),
            pulse: PulseTrain::disabled(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<StepGrid> {
        let grid = StepGrid::new(self.t_end, self.dt, self.sample_every)?;
        if self.pulse.is_enabled() && self.dt > 0.5 * self.pulse.duration() {
            return Err(Error::invalid(
                "dt",
                format!(
                    "must resolve each pulse: dt <= delta/2 = {}",
                    0.5 * self.pulse.duration()
                ),
            ));
        }
        Ok(grid)
    }
}

/// One sample of a propagated trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    #[serde(rename = "F")]
    pub fidelity: f64,
    pub rho11: f64,
    pub rho22: f64,
    pub rho33: f64,
    pub re_rho12: f64,
    pub im_rho12: f64,
    pub trace: f64,
    pub herm_err: f64,
}

impl TraceRow {
    /// Builds a row from ρ(t), failing if the trace or the dark-state overlap
    /// left their tolerance band.
    pub fn evaluate(t: f64, rho: &DensityMatrix, params: &SystemParams, tol: f64) -> Result<Self> {
        let trace = rho.trace();
        let drift = (trace - 1.0).norm();
        if drift.is_nan() || drift > tol {
            return Err(Error::Numerical {
                quantity: "trace drift",
                t,
                value: drift,
                tolerance: tol,
            });
        }
        let fidelity = fidelity_with_tolerance(rho, params, t, tol)?;
        Ok(Self {
            t,
            fidelity,
            rho11: rho.get(0, 0).re,
            rho22: rho.get(1, 1).re,
            rho33: rho.get(2, 2).re,
            re_rho12: rho.get(0, 1).re,
            im_rho12: rho.get(0, 1).im,
            trace: trace.re,
            herm_err: rho.hermiticity_error(),
        })
    }
}

/// Sampled F(t) and reduced-state diagnostics, strictly increasing in t.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FidelityTrace {
    rows: Vec<TraceRow>,
}

impl FidelityTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_rows(rows: Vec<TraceRow>) -> Result<Self> {
        if rows.windows(2).any(|w| w[1].t.partial_cmp(&w[0].t) != Some(std::cmp::Ordering::Greater)) {
            return Err(Error::GridMismatch("sample times must be strictly increasing".into()));
        }
        Ok(Self { rows })
    }

    pub fn push(&mut self, row: TraceRow) {
        debug_assert!(self.rows.last().is_none_or(|l| row.t > l.t));
        self.rows.push(row);
    }

    pub fn rows(&self) -> &[TraceRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(|r| r.t)
    }

    pub fn fidelities(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(|r| r.fidelity)
    }

    /// F at sample time `t` (matched to 1e-9).
    pub fn fidelity_at(&self, t: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| (r.t - t).abs() <= 1e-9 * t.abs().max(1.0))
            .map(|r| r.fidelity)
    }

    /// First sample time with F < `threshold`.
    pub fn first_time_below(&self, threshold: f64) -> Option<f64> {
        self.rows.iter().find(|r| r.fidelity < threshold).map(|r| r.t)
    }

    /// (min, max) of F over samples with t in `[from, to]`.
    pub fn band(&self, from: f64, to: f64) -> Option<(f64, f64)> {
        let eps = 1e-9 * to.abs().max(1.0);
        self.rows
            .iter()
            .filter(|r| r.t >= from - eps && r.t <= to + eps)
            .fold(None, |acc, r| match acc {
                None => Some((r.fidelity, r.fidelity)),
                Some((lo, hi)) => Some((lo.min(r.fidelity), hi.max(r.fidelity))),
            })
    }

    pub fn max_trace_drift(&self) -> f64 {
        self.rows.iter().map(|r| (r.trace - 1.0).abs()).fold(0.0, f64::max)
    }

    pub fn max_hermiticity_error(&self) -> f64 {
        self.rows.iter().map(|r| r.herm_err).fold(0.0, f64::max)
    }

    /// max |F_self − F_other| over the samples both traces share.
    ///
    /// The shorter trace's grid must be a prefix of the longer one's.
    pub fn max_fidelity_deviation(&self, other: &FidelityTrace) -> Result<f64> {
        let n = self.len().min(other.len());
        if n == 0 {
            return Err(Error::GridMismatch("empty trace".into()));
        }
        let mut worst = 0.0_f64;
        for (a, b) in self.rows[..n].iter().zip(&other.rows[..n]) {
            if (a.t - b.t).abs() > 1e-9 * a.t.abs().max(1.0) {
                return Err(Error::GridMismatch(format!("t = {} vs t = {}", a.t, b.t)));
            }
            worst = worst.max((a.fidelity - b.fidelity).abs());
        }
        Ok(worst)
    }
}

/// Hierarchy propagation result; `final_state` allows chaining runs.
#[derive(Debug, Clone)]
pub struct Propagation {
    pub trace: FidelityTrace,
    pub final_state: HierarchyState,
}

pub fn propagate(config: &RunConfig) -> Result<Propagation> {
    let grid = config.validate()?;
    let system = HierarchySystem::new(config.order, config.params, config.baths);
    let mut state = init_state(config.order, &config.params);
    let mut trace = FidelityTrace::new();
    let params = config.params;
    integrate(&system, &config.pulse, &grid, state.as_mut_slice(), |t, y| {
        trace.push(sample(t, y, &params)?);
        Ok(())
    })?;
    state.set_time(grid.time(grid.steps));
    Ok(Propagation {
        trace,
        final_state: state,
    })
}

fn sample(t: f64, y: &[C64], params: &SystemParams) -> Result<TraceRow> {
    let mut top = BlochVector::zero();
    top.0.copy_from_slice(&y[..9]);
    TraceRow::evaluate(t, &bloch_to_density(&top), params, DRIFT_TOLERANCE)
}

/// Single 9-vector under the γ → ∞ closure of the hierarchy.
#[derive(Debug, Clone)]
pub struct MarkovSystem {
    params: SystemParams,
    dissipator: crate::generator::SparseGenerator,
}

impl MarkovSystem {
    pub fn new(params: SystemParams, baths: Baths) -> Self {
        Self {
            params,
            dissipator: markov_dissipator(&baths).sparse(),
        }
    }
}

impl LinearDynamics for MarkovSystem {
    fn dim(&self) -> usize {
        9
    }

    fn derivative(&self, t: f64, level: f64, y: &[C64], dy: &mut [C64]) {
        dy.fill(C64::default());
        system_matrix_at_level(&self.params, t, level)
            .sparse()
            .apply_add(y, dy);
        self.dissipator.apply_add(y, dy);
    }
}

#[derive(Debug, Clone)]
pub struct MarkovPropagation {
    pub trace: FidelityTrace,
    pub final_state: BlochVector,
}

/// Same contract as [`propagate`]; `config.order` is ignored.
pub fn propagate_markov(config: &RunConfig) -> Result<MarkovPropagation> {
    let grid = config.validate()?;
    let system = MarkovSystem::new(config.params, config.baths);
    let mut state = density_to_bloch(&DensityMatrix::pure(&dark_state(&config.params, 0.0)));
    let mut trace = FidelityTrace::new();
    let params = config.params;
    integrate(&system, &config.pulse, &grid, &mut state.0, |t, y| {
        trace.push(sample(t, y, &params)?);
        Ok(())
    })?;
    Ok(MarkovPropagation {
        trace,
        final_state: state,
    })
}
