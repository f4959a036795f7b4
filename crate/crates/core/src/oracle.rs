//! Brute-force reference: Schrödinger propagation of the three-level system
//! together with explicitly discretized baths in a truncated Fock space.
//!
//! Each bath is replaced by modes on a symmetric frequency window [−W, W]
//! whose weights sample the full-line Lorentzian (Γγ²/2π)/(γ² + ω²). That is
//! the spectral weight whose Fourier transform is the exponential correlation
//! (Γγ/2)e^(−γ|τ|); the negative frequencies are a modelling device required
//! to reproduce it, not a statement about a physical bath. The hierarchy does
//! not depend on this choice.
//!
//! The baths start in the vacuum, the Fock space keeps at most `n_max` bath
//! excitations in total, and the state is stepped with the same RK4 driver
//! as the hierarchy. Nothing is renormalized; norm and cutoff leakage are
//! monitored instead.

use std::collections::HashMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{integrate, FidelityTrace, LinearDynamics, RunConfig, StepGrid, TraceRow, DRIFT_TOLERANCE};
use crate::model::{dark_state, BathParams, DensityMatrix, PulseTrain, SystemParams, C64};

/// Upper limit on the population estimated to have left the Fock truncation.
pub const CUTOFF_LEAKAGE_LIMIT: f64 = 1e-3;

/// Largest change of F allowed when the mode spacing is doubled.
pub const MODE_CONVERGENCE_TOLERANCE: f64 = 5e-3;

/// Largest change of F allowed when `n_max` is lowered by one.
pub const CUTOFF_CONVERGENCE_TOLERANCE: f64 = 5e-3;

/// Limit on norm drift for the convergence gate.
pub const NORM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathMode {
    pub frequency: f64,
    pub coupling: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedBath {
    modes: Vec<BathMode>,
    parent: BathParams,
    window: f64,
    quadrature_error: f64,
}

impl DiscretizedBath {
    pub fn modes(&self) -> &[BathMode] {
        &self.modes
    }

    pub fn parent(&self) -> &BathParams {
        &self.parent
    }

    pub fn window(&self) -> f64 {
        self.window
    }

    /// Σ g_k², the discrete estimate of α(0).
    pub fn coupling_sum(&self) -> f64 {
        self.modes.iter().map(|m| m.coupling * m.coupling).sum()
    }

    /// Σ g_k² e^(−iω_kτ).
    pub fn correlation(&self, tau: f64) -> C64 {
        self.modes
            .iter()
            .map(|m| m.coupling * m.coupling * C64::from_polar(1.0, -m.frequency * tau))
            .sum()
    }

    /// max |Σ g_k² e^(−iω_kτ) − α(τ)| for τ ∈ [0, 3/γ], computed once at
    /// construction.
    pub fn quadrature_error(&self) -> f64 {
        self.quadrature_error
    }
}

/// `modes` equally spaced frequencies on [−`window`, `window`].
///
/// Each weight g_k² is the Lorentzian integrated over the mode's bin; the two
/// outermost bins extend to ±∞ so that Σ g_k² equals α(0) exactly. Interior
/// weights agree with (Γγ²/2π)/(γ² + ω_k²)·δω to second order in δω.
pub fn discretize_bath(bath: &BathParams, modes: usize, window: f64) -> Result<DiscretizedBath> {
    if modes < 2 {
        return Err(Error::invalid("oracle.modes", "need at least 2 modes"));
    }
    let gamma = bath.bandwidth();
    if !(window.is_finite() && window > 2.0 * gamma) {
        return Err(Error::invalid(
            "oracle.window",
            format!("must exceed 2*gamma = {} to represent the Lorentzian", 2.0 * gamma),
        ));
    }
    let spacing = 2.0 * window / (modes - 1) as f64;
    let scale = 0.5 * bath.coupling() * gamma;
    let cumulative = |x: f64| scale * ((x / gamma).atan() / PI + 0.5);
    let frequencies: Vec<f64> = (0..modes).map(|k| -window + k as f64 * spacing).collect();
    let mut lower = 0.0;
    let mut out = Vec::with_capacity(modes);
    for (k, &w) in frequencies.iter().enumerate() {
        let upper = if k + 1 == modes {
            scale
        } else {
            cumulative(w + 0.5 * spacing)
        };
        let weight = (upper - lower).max(0.0);
        lower = upper;
        out.push(BathMode {
            frequency: w,
            coupling: weight.sqrt(),
        });
    }
    let mut bath_out = DiscretizedBath {
        modes: out,
        parent: *bath,
        window,
        quadrature_error: 0.0,
    };
    let tau_max = 3.0 / gamma;
    let samples = 600;
    bath_out.quadrature_error = (0..=samples)
        .map(|s| {
            let tau = tau_max * s as f64 / samples as f64;
            (bath_out.correlation(tau) - bath.correlation(tau)).norm()
        })
        .fold(0.0, f64::max);
    Ok(bath_out)
}

/// One annihilation step a_k|state⟩ = sqrt(n_k)|target⟩.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lowering {
    pub mode: u32,
    pub target: u32,
    pub factor: f64,
}

/// Bath occupation states with at most `n_max` excitations over all modes.
///
/// A state is stored as the sorted multiset of its excited mode indices; the
/// full basis is this set tensored with the 3 system levels.
#[derive(Debug, Clone)]
pub struct FockBasis {
    mode_count: usize,
    n_max: usize,
    offsets: Vec<usize>,
    occupied: Vec<u32>,
    index: HashMap<Box<[u32]>, u32>,
    lower_offsets: Vec<usize>,
    lowerings: Vec<Lowering>,
}

impl FockBasis {
    pub const SYSTEM_DIM: usize = 3;

    pub fn new(mode_count: usize, n_max: usize) -> Result<Self> {
        if n_max < 1 {
            return Err(Error::invalid("oracle.n_max", "cutoff must be at least 1"));
        }
        if mode_count == 0 {
            return Err(Error::invalid("oracle.modes", "need at least one mode"));
        }
        let mut offsets = vec![0];
        let mut occupied = Vec::new();
        let mut current = Vec::with_capacity(n_max);
        for n in 0..=n_max {
            enumerate_multisets(mode_count as u32, n, 0, &mut current, &mut |s| {
                occupied.extend_from_slice(s);
                offsets.push(occupied.len());
            });
        }
        let len = offsets.len() - 1;
        if len > u32::MAX as usize / 4 {
            return Err(Error::invalid("oracle", "Fock basis too large"));
        }
        let mut index = HashMap::with_capacity(len);
        for i in 0..len {
            index.insert(occupied[offsets[i]..offsets[i + 1]].into(), i as u32);
        }
        let mut lower_offsets = vec![0];
        let mut lowerings = Vec::new();
        let mut scratch = Vec::with_capacity(n_max);
        for i in 0..len {
            let s = &occupied[offsets[i]..offsets[i + 1]];
            let mut p = 0;
            while p < s.len() {
                let mode = s[p];
                let count = s[p..].iter().take_while(|&&m| m == mode).count();
                scratch.clear();
                scratch.extend_from_slice(&s[..p]);
                scratch.extend_from_slice(&s[p + 1..]);
                lowerings.push(Lowering {
                    mode,
                    target: index[scratch.as_slice()],
                    factor: (count as f64).sqrt(),
                });
                p += count;
            }
            lower_offsets.push(lowerings.len());
        }
        Ok(Self {
            mode_count,
            n_max,
            offsets,
            occupied,
            index,
            lower_offsets,
            lowerings,
        })
    }

    pub fn mode_count(&self) -> usize {
        self.mode_count
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Number of bath occupation states.
    pub fn bath_len(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Size of the full system ⊗ bath basis.
    pub fn len(&self) -> usize {
        Self::SYSTEM_DIM * self.bath_len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Sorted excited-mode multiset of bath state `i`.
    pub fn occupation(&self, i: usize) -> &[u32] {
        &self.occupied[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn excitations(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn index_of(&self, occupation: &[u32]) -> Option<usize> {
        self.index.get(occupation).map(|&i| i as usize)
    }

    pub fn lowerings(&self, i: usize) -> &[Lowering] {
        &self.lowerings[self.lower_offsets[i]..self.lower_offsets[i + 1]]
    }
}

fn enumerate_multisets(modes: u32, remaining: usize, start: u32, current: &mut Vec<u32>, emit: &mut impl FnMut(&[u32])) {
    if remaining == 0 {
        emit(current);
        return;
    }
    for m in start..modes {
        current.push(m);
        enumerate_multisets(modes, remaining - 1, m, current, emit);
        current.pop();
    }
}

/// Number of multisets of size ≤ `n_max` over `modes` elements, C(modes + n_max, n_max).
pub fn fock_dimension(modes: usize, n_max: usize) -> usize {
    let mut c: u128 = 1;
    for k in 1..=n_max as u128 {
        c = c * (modes as u128 + k) / k;
    }
    c as usize
}

/// Row-gather sparse operator on the bath index: out[r] += Σ c · x[col].
#[derive(Debug, Clone, Default)]
struct Gather {
    offsets: Vec<usize>,
    cols: Vec<u32>,
    coeffs: Vec<f64>,
}

impl Gather {
    fn from_rows(rows: Vec<Vec<(u32, f64)>>) -> Self {
        let mut g = Gather {
            offsets: Vec::with_capacity(rows.len() + 1),
            ..Default::default()
        };
        g.offsets.push(0);
        for row in rows {
            for (c, v) in row {
                g.cols.push(c);
                g.coeffs.push(v);
            }
            g.offsets.push(g.cols.len());
        }
        g
    }

    #[inline]
    fn apply_add(&self, x: &[C64], out: &mut [C64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = C64::default();
            for e in self.offsets[r]..self.offsets[r + 1] {
                acc += self.coeffs[e] * x[self.cols[e] as usize];
            }
            *o += acc;
        }
    }
}

/// Collective operators B = Σ_k g_k a_k of one bath and its adjoint, as
/// gathers over the bath index.
#[derive(Debug, Clone)]
struct BathOperators {
    annihilate: Gather,
    create: Gather,
    quadrature: Gather,
    coupling_sum: f64,
}

impl BathOperators {
    fn new(basis: &FockBasis, couplings: &[f64], first_mode: usize) -> Self {
        let nb = basis.bath_len();
        let range = first_mode..first_mode + couplings.len();
        let mut create_rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); nb];
        let mut annihilate_rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); nb];
        for (i, row) in create_rows.iter_mut().enumerate() {
            for l in basis.lowerings(i) {
                let m = l.mode as usize;
                if range.contains(&m) {
                    let c = couplings[m - first_mode] * l.factor;
                    if c != 0.0 {
                        // (B† x)[i] picks up x[target]; (B x)[target] picks up x[i]
                        row.push((l.target, c));
                        annihilate_rows[l.target as usize].push((i as u32, c));
                    }
                }
            }
        }
        let quadrature_rows = create_rows
            .iter()
            .zip(&annihilate_rows)
            .map(|(c, a)| c.iter().chain(a).copied().collect())
            .collect();
        Self {
            annihilate: Gather::from_rows(annihilate_rows),
            create: Gather::from_rows(create_rows),
            quadrature: Gather::from_rows(quadrature_rows),
            coupling_sum: couplings.iter().map(|g| g * g).sum(),
        }
    }
}

/// Inputs of one oracle propagation.
#[derive(Debug, Clone)]
pub struct OracleProblem {
    pub params: SystemParams,
    pub bath_a: DiscretizedBath,
    pub bath_b: DiscretizedBath,
    pub n_max: usize,
    /// Keep only the rotating terms of the coupling.
    pub rwa: bool,
    pub pulse: PulseTrain,
    pub t_end: f64,
    pub dt: f64,
    pub sample_every: f64,
}

#[derive(Debug, Clone)]
pub struct OracleRun {
    pub trace: FidelityTrace,
    /// max |‖ψ‖ − 1| over the samples.
    pub norm_error: f64,
    /// First-order bound on the population that left the truncated space.
    pub cutoff_leakage: f64,
    /// Largest population seen in the top (n = n_max) excitation sector.
    pub top_sector_population: f64,
    /// max |⟨N_bath + |3⟩⟨3|⟩(t) − ⟨…⟩(0)|.
    pub excitation_drift: f64,
    pub basis_size: usize,
}

struct OracleSystem<'a> {
    basis: &'a FockBasis,
    params: SystemParams,
    bath_energy: Vec<f64>,
    a: BathOperators,
    b: BathOperators,
    rwa: bool,
}

impl<'a> OracleSystem<'a> {
    fn new(problem: &OracleProblem, basis: &'a FockBasis) -> Self {
        let freqs: Vec<f64> = problem
            .bath_a
            .modes()
            .iter()
            .chain(problem.bath_b.modes())
            .map(|m| m.frequency)
            .collect();
        let bath_energy = (0..basis.bath_len())
            .map(|i| basis.occupation(i).iter().map(|&k| freqs[k as usize]).sum())
            .collect();
        let ga: Vec<f64> = problem.bath_a.modes().iter().map(|m| m.coupling).collect();
        let gb: Vec<f64> = problem.bath_b.modes().iter().map(|m| m.coupling).collect();
        Self {
            basis,
            params: problem.params,
            bath_energy,
            a: BathOperators::new(basis, &ga, 0),
            b: BathOperators::new(basis, &gb, ga.len()),
            rwa: problem.rwa,
        }
    }

    fn split(y: &[C64], nb: usize) -> [&[C64]; 3] {
        [&y[..nb], &y[nb..2 * nb], &y[2 * nb..]]
    }

    /// ‖P_out H ψ‖, the rate amplitude flowing above the cutoff.
    fn outflow(&self, y: &[C64]) -> f64 {
        let nb = self.basis.bath_len();
        let [p1, p2, p3] = Self::split(y, nb);
        let top = |x: &[C64]| -> Vec<C64> {
            x.iter()
                .enumerate()
                .map(|(i, z)| if self.basis.excitations(i) == self.basis.n_max { *z } else { C64::default() })
                .collect()
        };
        let zero = vec![C64::default(); nb];
        // System parts of the coupling that accompany a bath creation operator.
        let (va, vb): ([Vec<C64>; 3], [Vec<C64>; 3]) = if self.rwa {
            ([top(p3), zero.clone(), zero.clone()], [zero.clone(), top(p3), zero.clone()])
        } else {
            ([top(p3), zero.clone(), top(p1)], [zero.clone(), top(p3), top(p2)])
        };
        let lower = |ops: &BathOperators, v: &[Vec<C64>; 3]| -> [Vec<C64>; 3] {
            std::array::from_fn(|s| {
                let mut out = vec![C64::default(); nb];
                ops.annihilate.apply_add(&v[s], &mut out);
                out
            })
        };
        let dot = |x: &[Vec<C64>; 3], y: &[Vec<C64>; 3]| -> C64 {
            (0..3)
                .map(|s| x[s].iter().zip(&y[s]).map(|(a, b)| a.conj() * b).sum::<C64>())
                .sum()
        };
        let norm2 = |x: &[Vec<C64>; 3]| dot(x, x).re;
        let ba_va = lower(&self.a, &va);
        let bb_vb = lower(&self.b, &vb);
        let bb_va = lower(&self.b, &va);
        let ba_vb = lower(&self.a, &vb);
        let total = norm2(&ba_va)
            + self.a.coupling_sum * norm2(&va)
            + norm2(&bb_vb)
            + self.b.coupling_sum * norm2(&vb)
            + 2.0 * dot(&bb_va, &ba_vb).re;
        total.max(0.0).sqrt()
    }
}

impl LinearDynamics for OracleSystem<'_> {
    fn dim(&self) -> usize {
        self.basis.len()
    }

    fn derivative(&self, t: f64, level: f64, y: &[C64], dy: &mut [C64]) {
        let nb = self.basis.bath_len();
        let e1 = self.params.drive1_at(t);
        let e2 = self.params.drive2_at(t);
        let energies = self.params.level_energies();
        let shifts = [-level, -level, 0.0];
        {
            let [y1, y2, y3] = Self::split(y, nb);
            let (d1, rest) = dy.split_at_mut(nb);
            let (d2, d3) = rest.split_at_mut(nb);
            for i in 0..nb {
                let e = self.bath_energy[i];
                d1[i] = (energies[0] + shifts[0] + e) * y1[i] + e1.conj() * y3[i];
                d2[i] = (energies[1] + shifts[1] + e) * y2[i] + e2.conj() * y3[i];
                d3[i] = (energies[2] + shifts[2] + e) * y3[i] + e1 * y1[i] + e2 * y2[i];
            }
            if self.rwa {
                self.a.annihilate.apply_add(y1, d3);
                self.b.annihilate.apply_add(y2, d3);
                self.a.create.apply_add(y3, d1);
                self.b.create.apply_add(y3, d2);
            } else {
                self.a.quadrature.apply_add(y3, d1);
                self.a.quadrature.apply_add(y1, d3);
                self.b.quadrature.apply_add(y2, d3);
                self.b.quadrature.apply_add(y3, d2);
            }
        }
        for z in dy.iter_mut() {
            *z = C64::new(z.im, -z.re);
        }
    }
}

fn reduced_density(y: &[C64], nb: usize) -> DensityMatrix {
    let mut m = [[C64::default(); 3]; 3];
    for (s, row) in m.iter_mut().enumerate() {
        for (r, v) in row.iter_mut().enumerate() {
            *v = y[s * nb..(s + 1) * nb]
                .iter()
                .zip(&y[r * nb..(r + 1) * nb])
                .map(|(a, b)| a * b.conj())
                .sum();
        }
    }
    DensityMatrix(m)
}

/// Propagation without the cutoff-leakage gate; used by the convergence
/// study, where under-resolved runs are expected.
pub fn propagate_unchecked(problem: &OracleProblem) -> Result<OracleRun> {
    let grid = StepGrid::new(problem.t_end, problem.dt, problem.sample_every)?;
    if problem.pulse.is_enabled() && problem.dt > 0.5 * problem.pulse.duration() {
        return Err(Error::invalid("oracle.dt", "must be <= delta/2 when pulses are enabled"));
    }
    let modes = problem.bath_a.modes().len() + problem.bath_b.modes().len();
    let basis = FockBasis::new(modes, problem.n_max)?;
    let system = OracleSystem::new(problem, &basis);
    let nb = basis.bath_len();
    let vacuum = basis.index_of(&[]).expect("vacuum is always present");
    let mut psi = vec![C64::default(); basis.len()];
    let d = dark_state(&problem.params, 0.0);
    for s in 0..3 {
        psi[s * nb + vacuum] = d[s];
    }

    let excitation_number = |y: &[C64]| -> f64 {
        (0..3)
            .map(|s| {
                y[s * nb..(s + 1) * nb]
                    .iter()
                    .enumerate()
                    .map(|(i, z)| z.norm_sqr() * (basis.excitations(i) + usize::from(s == 2)) as f64)
                    .sum::<f64>()
            })
            .sum()
    };
    let initial_excitation = excitation_number(&psi);

    let mut trace = FidelityTrace::new();
    let mut norm_error = 0.0_f64;
    let mut top_population = 0.0_f64;
    let mut excitation_drift = 0.0_f64;
    let mut outflow_integral = 0.0;
    let mut last_outflow_time = 0.0;
    let mut last_outflow = system.outflow(&psi);
    let params = problem.params;
    // Outflow is sampled on the output grid and integrated with the
    // trapezoidal rule; it is a smooth envelope on that scale.
    integrate(&system, &problem.pulse, &grid, &mut psi, |t, y| {
        if t > 0.0 {
            let now = system.outflow(y);
            outflow_integral += 0.5 * (now + last_outflow) * (t - last_outflow_time);
            last_outflow = now;
            last_outflow_time = t;
        }
        let norm = y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        norm_error = norm_error.max((norm - 1.0).abs());
        let top: f64 = (0..3)
            .map(|s| {
                y[s * nb..(s + 1) * nb]
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| basis.excitations(*i) == basis.n_max())
                    .map(|(_, z)| z.norm_sqr())
                    .sum::<f64>()
            })
            .sum();
        top_population = top_population.max(top);
        excitation_drift = excitation_drift.max((excitation_number(y) - initial_excitation).abs());
        let rho = reduced_density(y, nb);
        trace.push(TraceRow::evaluate(t, &rho, &params, DRIFT_TOLERANCE)?);
        Ok(())
    })?;

    Ok(OracleRun {
        trace,
        norm_error,
        cutoff_leakage: outflow_integral * outflow_integral,
        top_sector_population: top_population,
        excitation_drift,
        basis_size: basis.len(),
    })
}

/// Propagates |D(0)⟩ ⊗ |vac⟩ and fails if the Fock truncation leaked more
/// than [`CUTOFF_LEAKAGE_LIMIT`].
pub fn schrodinger_propagate(problem: &OracleProblem) -> Result<OracleRun> {
    let run = propagate_unchecked(problem)?;
    if run.cutoff_leakage > CUTOFF_LEAKAGE_LIMIT {
        return Err(Error::CutoffLeakage {
            bound: run.cutoff_leakage,
            limit: CUTOFF_LEAKAGE_LIMIT,
        });
    }
    Ok(run)
}

/// Discretization settings of the oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleSettings {
    /// Modes per bath.
    pub modes: usize,
    /// Half width W of the frequency window.
    pub window: f64,
    pub n_max: usize,
    pub rwa: bool,
    pub dt: f64,
}

impl Default for OracleSettings {
    fn default() -> Self {
        Self {
            modes: 401,
            window: 12.0,
            n_max: 2,
            rwa: false,
            dt: 0.005,
        }
    }
}

impl OracleSettings {
    /// Builds the problem for `config`; only `t_end`, `sample_every`, the
    /// system, the baths and the pulses are taken from it.
    pub fn problem(&self, config: &RunConfig) -> Result<OracleProblem> {
        Ok(OracleProblem {
            params: config.params,
            bath_a: discretize_bath(&config.baths.a, self.modes, self.window)?,
            bath_b: discretize_bath(&config.baths.b, self.modes, self.window)?,
            n_max: self.n_max,
            rwa: self.rwa,
            pulse: config.pulse,
            t_end: config.t_end,
            dt: self.dt,
            sample_every: config.sample_every,
        })
    }
}

/// Outcome of the oracle's self-convergence check.
#[derive(Debug, Clone)]
pub struct ConvergenceGate {
    pub run: OracleRun,
    /// max |ΔF| between `modes` and roughly half as many modes.
    pub mode_delta: f64,
    /// max |ΔF| between `n_max` and `n_max − 1` (None when n_max = 1).
    pub cutoff_delta: Option<f64>,
    pub passed: bool,
}

impl ConvergenceGate {
    pub fn describe(&self) -> String {
        format!(
            "cutoff leakage {:.3e} (limit {:.0e}), norm error {:.3e}, mode delta {:.3e}, cutoff delta {}",
            self.run.cutoff_leakage,
            CUTOFF_LEAKAGE_LIMIT,
            self.run.norm_error,
            self.mode_delta,
            self.cutoff_delta.map_or("n/a".into(), |d| format!("{d:.3e}")),
        )
    }
}

/// Runs the oracle at `settings` plus a run with the mode spacing doubled and
/// one with the cutoff lowered, and reports whether the discretization is
/// converged well enough to serve as a reference.
pub fn convergence_gate(config: &RunConfig, settings: &OracleSettings) -> Result<ConvergenceGate> {
    let run = propagate_unchecked(&settings.problem(config)?)?;
    let coarse = OracleSettings {
        modes: settings.modes.div_ceil(2).max(2),
        ..*settings
    };
    let coarse_run = propagate_unchecked(&coarse.problem(config)?)?;
    let mode_delta = run.trace.max_fidelity_deviation(&coarse_run.trace)?;
    let cutoff_delta = if settings.n_max >= 2 {
        let lower = OracleSettings {
            n_max: settings.n_max - 1,
            ..*settings
        };
        let lower_run = propagate_unchecked(&lower.problem(config)?)?;
        Some(run.trace.max_fidelity_deviation(&lower_run.trace)?)
    } else {
        None
    };
    let passed = run.cutoff_leakage <= CUTOFF_LEAKAGE_LIMIT
        && run.norm_error <= NORM_TOLERANCE
        && mode_delta <= MODE_CONVERGENCE_TOLERANCE
        && cutoff_delta.is_none_or(|d| d <= CUTOFF_CONVERGENCE_TOLERANCE);
    Ok(ConvergenceGate {
        run,
        mode_delta,
        cutoff_delta,
        passed,
    })
}
