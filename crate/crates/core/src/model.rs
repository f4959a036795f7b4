//! Physical parameters, dark and bright states, Bloch-vector and density-matrix
//! conversions, and the dark-state fidelity.
//!
//! Frequencies are dimensionless: the level splitting ω₃ − ω₁ sets the unit.

use std::fmt;
use std::ops::{Index, IndexMut};

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Default gate for [`fidelity`].
pub const FIDELITY_TOLERANCE: f64 = 1e-8;

/// Energies and resonant drive couplings of the Λ system.
///
/// The two drives are pinned to resonance: ω_a = ω₃ − ω₁ and ω_b = ω₃ − ω₂.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SystemParamsRepr", into = "SystemParamsRepr")]
pub struct SystemParams {
    omega1: f64,
    omega2: f64,
    omega3: f64,
    drive1: C64,
    drive2: C64,
}

impl SystemParams {
    pub fn new(omega1: f64, omega2: f64, omega3: f64, drive1: C64, drive2: C64) -> Result<Self> {
        for (field, v) in [("omega1", omega1), ("omega2", omega2), ("omega3", omega3)] {
            if !v.is_finite() {
                return Err(Error::invalid(field, "must be finite"));
            }
        }
        for (field, v) in [("Omega1", drive1), ("Omega2", drive2)] {
            if !v.is_finite() {
                return Err(Error::invalid(field, "must be finite"));
            }
        }
        if omega3 - omega1 <= 0.0 {
            return Err(Error::invalid("omega3", "level 3 must lie above level 1"));
        }
        if omega3 - omega2 <= 0.0 {
            return Err(Error::invalid("omega3", "level 3 must lie above level 2"));
        }
        if (drive1.norm_sqr() + drive2.norm_sqr()).sqrt() <= 0.0 {
            return Err(Error::invalid(
                "Omega1",
                "at least one drive must be nonzero for the dark state to exist",
            ));
        }
        Ok(Self {
            omega1,
            omega2,
            omega3,
            drive1,
            drive2,
        })
    }

    /// Real drive couplings; the common case.
    pub fn real(omega1: f64, omega2: f64, omega3: f64, drive1: f64, drive2: f64) -> Result<Self> {
        Self::new(omega1, omega2, omega3, drive1.into(), drive2.into())
    }

    pub fn omega1(&self) -> f64 {
        self.omega1
    }

    pub fn omega2(&self) -> f64 {
        self.omega2
    }

    pub fn omega3(&self) -> f64 {
        self.omega3
    }

    /// Ω₁, coupling of the drive on the 1 ↔ 3 transition.
    pub fn drive1(&self) -> C64 {
        self.drive1
    }

    /// Ω₂, coupling of the drive on the 2 ↔ 3 transition.
    pub fn drive2(&self) -> C64 {
        self.drive2
    }

    pub fn delta31(&self) -> f64 {
        self.omega3 - self.omega1
    }

    pub fn delta32(&self) -> f64 {
        self.omega3 - self.omega2
    }

    pub fn delta21(&self) -> f64 {
        self.omega2 - self.omega1
    }

    /// Ω = sqrt(|Ω₁|² + |Ω₂|²).
    pub fn rabi(&self) -> f64 {
        (self.drive1.norm_sqr() + self.drive2.norm_sqr()).sqrt()
    }

    /// Ω₁(t) = Ω₁ e^(−iΔ₃₁t).
    pub fn drive1_at(&self, t: f64) -> C64 {
        self.drive1 * C64::from_polar(1.0, -self.delta31() * t)
    }

    /// Ω₂(t) = Ω₂ e^(−iΔ₃₂t).
    pub fn drive2_at(&self, t: f64) -> C64 {
        self.drive2 * C64::from_polar(1.0, -self.delta32() * t)
    }

    pub fn level_energies(&self) -> [f64; 3] {
        [self.omega1, self.omega2, self.omega3]
    }
}

impl Default for SystemParams {
    /// ω₁ = −1, ω₂ = −1.2, ω₃ = 0, Ω₁ = 0.5, Ω₂ = 0.2.
    fn default() -> Self {
        Self::real(-1.0, -1.2, 0.0, 0.5, 0.2).expect("reference parameters are valid")
    }
}

#[derive(Serialize, Deserialize)]
struct SystemParamsRepr {
    omega1: f64,
    omega2: f64,
    omega3: f64,
    #[serde(rename = "Omega1", with = "complex_value")]
    drive1: C64,
    #[serde(rename = "Omega2", with = "complex_value")]
    drive2: C64,
}

impl TryFrom<SystemParamsRepr> for SystemParams {
    type Error = Error;

    fn try_from(r: SystemParamsRepr) -> Result<Self> {
        SystemParams::new(r.omega1, r.omega2, r.omega3, r.drive1, r.drive2)
    }
}

impl From<SystemParams> for SystemParamsRepr {
    fn from(p: SystemParams) -> Self {
        Self {
            omega1: p.omega1,
            omega2: p.omega2,
            omega3: p.omega3,
            drive1: p.drive1,
            drive2: p.drive2,
        }
    }
}

/// Complex numbers in configs: either a bare real number or `[re, im]`.
pub mod complex_value {
    use super::*;

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Real(f64),
        Pair([f64; 2]),
    }

    pub fn serialize<S: Serializer>(z: &C64, s: S) -> std::result::Result<S::Ok, S::Error> {
        [z.re, z.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<C64, D::Error> {
        Ok(match Repr::deserialize(d)? {
            Repr::Real(re) => C64::new(re, 0.0),
            Repr::Pair([re, im]) => C64::new(re, im),
        })
    }
}

/// One Ornstein-Uhlenbeck bath with correlation α(τ) = (Γγ/2) e^(−γ|τ|).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BathParamsRepr", into = "BathParamsRepr")]
pub struct BathParams {
    coupling: f64,
    bandwidth: f64,
}

impl BathParams {
    /// `coupling` is Γ (the Markovian decay rate), `bandwidth` is γ (the
    /// inverse correlation time).
    pub fn new(coupling: f64, bandwidth: f64) -> Result<Self> {
        if !(coupling.is_finite() && coupling >= 0.0) {
            return Err(Error::invalid("Gamma", "must be finite and >= 0"));
        }
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(Error::invalid("gamma", "must be finite and > 0"));
        }
        Ok(Self {
            coupling,
            bandwidth,
        })
    }

    /// Γ.
    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    /// γ.
    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn correlation(&self, tau: f64) -> f64 {
        0.5 * self.coupling * self.bandwidth * (-self.bandwidth * tau.abs()).exp()
    }

    /// Γγ/2, the weight of the downward tier coupling.
    pub(crate) fn tier_weight(&self) -> f64 {
        0.5 * self.coupling * self.bandwidth
    }
}

#[derive(Serialize, Deserialize)]
struct BathParamsRepr {
    #[serde(rename = "Gamma")]
    coupling: f64,
    #[serde(rename = "gamma")]
    bandwidth: f64,
}

impl TryFrom<BathParamsRepr> for BathParams {
    type Error = Error;

    fn try_from(r: BathParamsRepr) -> Result<Self> {
        BathParams::new(r.coupling, r.bandwidth)
    }
}

impl From<BathParams> for BathParamsRepr {
    fn from(b: BathParams) -> Self {
        Self {
            coupling: b.coupling,
            bandwidth: b.bandwidth,
        }
    }
}

/// Bath `a` couples to the 1 ↔ 3 transition, bath `b` to 2 ↔ 3.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Baths {
    pub a: BathParams,
    pub b: BathParams,
}

impl Baths {
    pub fn new(a: BathParams, b: BathParams) -> Self {
        Self { a, b }
    }

    /// Both baths with the same Γ and γ.
    pub fn symmetric(bath: BathParams) -> Self {
        Self { a: bath, b: bath }
    }
}

impl Default for Baths {
    fn default() -> Self {
        Self::symmetric(BathParams::new(0.1, 0.6).expect("valid"))
    }
}

/// Rectangular leakage-elimination pulses: c(t) = h while (t mod τ) ∈ [0, Δ).
///
/// The pulses enter the Hamiltonian as R(t) = −c(t)(|1⟩⟨1| + |2⟩⟨2|).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PulseTrainRepr", into = "PulseTrainRepr")]
pub struct PulseTrain {
    enabled: bool,
    strength: f64,
    period: f64,
    duration: f64,
}

impl PulseTrain {
    pub fn new(enabled: bool, strength: f64, period: f64, duration: f64) -> Result<Self> {
        if !(strength.is_finite() && strength >= 0.0) {
            return Err(Error::invalid("pulse.h", "must be finite and >= 0"));
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::invalid("pulse.tau", "must be finite and > 0"));
        }
        if !(duration.is_finite() && (0.0..=period).contains(&duration)) {
            return Err(Error::invalid("pulse.delta", "must satisfy 0 <= delta <= tau"));
        }
        Ok(Self {
            enabled,
            strength,
            period,
            duration,
        })
    }

    pub fn disabled() -> Self {
        Self {
            enabled: false,
            strength: 0.0,
            period: 1.0,
            duration: 0.0,
        }
    }

    pub fn enabled(strength: f64, period: f64, duration: f64) -> Result<Self> {
        Self::new(true, strength, period, duration)
    }

    /// Pulses with fixed area per period: Δ = `duty`·τ and h = `area`/Δ.
    pub fn fixed_area(area: f64, period: f64, duty: f64) -> Result<Self> {
        if !(duty > 0.0 && duty <= 1.0) {
            return Err(Error::invalid("duty", "must lie in (0, 1]"));
        }
        let duration = duty * period;
        Self::enabled(area / duration, period, duration)
    }

    pub fn is_enabled(&self) -> bool {
        self.enabled
    }

    /// h.
    pub fn strength(&self) -> f64 {
        self.strength
    }

    /// τ.
    pub fn period(&self) -> f64 {
        self.period
    }

    /// Δ.
    pub fn duration(&self) -> f64 {
        self.duration
    }

    /// c(t).
    pub fn level(&self, t: f64) -> f64 {
        if !self.enabled || self.duration == 0.0 {
            return 0.0;
        }
        if t.rem_euclid(self.period) < self.duration {
            self.strength
        } else {
            0.0
        }
    }

    /// Discontinuities of c(t) strictly inside `(from, to)`, in increasing order.
    ///
    /// Edges closer than `margin` to either end are treated as coinciding with
    /// it and skipped.
    pub fn edges_within(&self, from: f64, to: f64, margin: f64) -> Vec<f64> {
        let mut edges = Vec::new();
        if !self.enabled || self.duration == 0.0 || self.duration == self.period {
            return edges;
        }
        let first = (from / self.period).floor() as i64;
        let last = (to / self.period).ceil() as i64;
        for l in first..=last {
            let start = l as f64 * self.period;
            for edge in [start, start + self.duration] {
                if edge > from + margin && edge < to - margin {
                    edges.push(edge);
                }
            }
        }
        edges
    }
}

impl Default for PulseTrain {
    fn default() -> Self {
        Self::disabled()
    }
}

#[derive(Serialize, Deserialize)]
struct PulseTrainRepr {
    #[serde(default)]
    enabled: bool,
    #[serde(default)]
    h: f64,
    #[serde(default = "unit")]
    tau: f64,
    #[serde(default)]
    delta: f64,
}

fn unit() -> f64 {
    1.0
}

impl TryFrom<PulseTrainRepr> for PulseTrain {
    type Error = Error;

    fn try_from(r: PulseTrainRepr) -> Result<Self> {
        PulseTrain::new(r.enabled, r.h, r.tau, r.delta)
    }
}

impl From<PulseTrain> for PulseTrainRepr {
    fn from(p: PulseTrain) -> Self {
        Self {
            enabled: p.enabled,
            h: p.strength,
            tau: p.period,
            delta: p.duration,
        }
    }
}

/// Slots of the 9-component Bloch vector, in storage order.
///
/// `Aij` holds the expectation of |i⟩⟨j|, which is the density-matrix element
/// ⟨j|ρ|i⟩.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Component {
    A11,
    A22,
    A33,
    A31,
    A32,
    A21,
    A13,
    A23,
    A12,
}

impl Component {
    pub const ALL: [Component; 9] = [
        Component::A11,
        Component::A22,
        Component::A33,
        Component::A31,
        Component::A32,
        Component::A21,
        Component::A13,
        Component::A23,
        Component::A12,
    ];

    pub const fn index(self) -> usize {
        self as usize
    }

    /// Zero-based level pair `(i, j)` of the operator |i⟩⟨j|.
    pub const fn levels(self) -> (usize, usize) {
        match self {
            Component::A11 => (0, 0),
            Component::A22 => (1, 1),
            Component::A33 => (2, 2),
            Component::A31 => (2, 0),
            Component::A32 => (2, 1),
            Component::A21 => (1, 0),
            Component::A13 => (0, 2),
            Component::A23 => (1, 2),
            Component::A12 => (0, 1),
        }
    }

    /// The slot holding the Hermitian-conjugate operator.
    pub const fn conjugate(self) -> Component {
        match self {
            Component::A31 => Component::A13,
            Component::A13 => Component::A31,
            Component::A32 => Component::A23,
            Component::A23 => Component::A32,
            Component::A21 => Component::A12,
            Component::A12 => Component::A21,
            diag => diag,
        }
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BlochVector(pub [C64; 9]);

impl BlochVector {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.0
    }

    /// A₁₁ + A₂₂ + A₃₃.
    pub fn population_sum(&self) -> C64 {
        self[Component::A11] + self[Component::A22] + self[Component::A33]
    }

    /// Largest violation of A_ij = conj(A_ji), including Im A_ii.
    pub fn hermiticity_error(&self) -> f64 {
        Component::ALL
            .iter()
            .map(|&c| (self[c] - self[c.conjugate()].conj()).norm())
            .fold(0.0, f64::max)
    }
}

impl Index<Component> for BlochVector {
    type Output = C64;

    fn index(&self, c: Component) -> &C64 {
        &self.0[c.index()]
    }
}

impl IndexMut<Component> for BlochVector {
    fn index_mut(&mut self, c: Component) -> &mut C64 {
        &mut self.0[c.index()]
    }
}

/// Reduced density matrix, `rho[i][j] = ⟨i|ρ|j⟩` over levels 1, 2, 3.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix(pub [[C64; 3]; 3]);

impl DensityMatrix {
    /// |ψ⟩⟨ψ|.
    pub fn pure(psi: &[C64; 3]) -> Self {
        let mut m = [[C64::default(); 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = psi[i] * psi[j].conj();
            }
        }
        Self(m)
    }

    pub fn maximally_mixed() -> Self {
        let mut m = [[C64::default(); 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = C64::new(1.0 / 3.0, 0.0);
        }
        Self(m)
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[i][j]
    }

    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    /// max |ρ − ρ†| over entries.
    pub fn hermiticity_error(&self) -> f64 {
        let mut err = 0.0_f64;
        for i in 0..3 {
            for j in 0..3 {
                err = err.max((self.0[i][j] - self.0[j][i].conj()).norm());
            }
        }
        err
    }

    /// ⟨ψ|ρ|ψ⟩.
    pub fn expectation(&self, psi: &[C64; 3]) -> C64 {
        let mut acc = C64::default();
        for i in 0..3 {
            for j in 0..3 {
                acc += psi[i].conj() * self.0[i][j] * psi[j];
            }
        }
        acc
    }
}

/// |D(t)⟩ = (Ω₂/Ω) e^(−iω₁t)|1⟩ − (Ω₁/Ω) e^(−iω₂t)|2⟩.
pub fn dark_state(params: &SystemParams, t: f64) -> [C64; 3] {
    let rabi = params.rabi();
    [
        params.drive2 / rabi * C64::from_polar(1.0, -params.omega1 * t),
        -params.drive1 / rabi * C64::from_polar(1.0, -params.omega2 * t),
        C64::default(),
    ]
}

/// |B(t)⟩ = (Ω₁/Ω) e^(−iω₁t)|1⟩ + (Ω₂/Ω) e^(−iω₂t)|2⟩.
///
/// Orthogonal to [`dark_state`] whenever Ω₁*Ω₂ is real.
pub fn bright_state(params: &SystemParams, t: f64) -> [C64; 3] {
    let rabi = params.rabi();
    [
        params.drive1 / rabi * C64::from_polar(1.0, -params.omega1 * t),
        params.drive2 / rabi * C64::from_polar(1.0, -params.omega2 * t),
        C64::default(),
    ]
}

pub fn bloch_to_density(v: &BlochVector) -> DensityMatrix {
    let mut m = [[C64::default(); 3]; 3];
    for c in Component::ALL {
        let (i, j) = c.levels();
        m[j][i] = v[c];
    }
    DensityMatrix(m)
}

pub fn density_to_bloch(rho: &DensityMatrix) -> BlochVector {
    let mut v = BlochVector::zero();
    for c in Component::ALL {
        let (i, j) = c.levels();
        v[c] = rho.0[j][i];
    }
    v
}

/// F(t) = sqrt(⟨D(t)|ρ|D(t)⟩), gated at [`FIDELITY_TOLERANCE`].
pub fn fidelity(rho: &DensityMatrix, params: &SystemParams, t: f64) -> Result<f64> {
    fidelity_with_tolerance(rho, params, t, FIDELITY_TOLERANCE)
}

/// Same as [`fidelity`] with an explicit gate: ρ must be Hermitian within
/// `tol` and ⟨D|ρ|D⟩ must lie in `[−tol, 1 + tol]` before being clamped.
pub fn fidelity_with_tolerance(
    rho: &DensityMatrix,
    params: &SystemParams,
    t: f64,
    tol: f64,
) -> Result<f64> {
    let herm = rho.hermiticity_error();
    if herm > tol {
        return Err(Error::Numerical {
            quantity: "hermiticity error",
            t,
            value: herm,
            tolerance: tol,
        });
    }
    let overlap = rho.expectation(&dark_state(params, t)).re;
    if !(-tol..=1.0 + tol).contains(&overlap) {
        return Err(Error::Numerical {
            quantity: "dark-state population",
            t,
            value: overlap,
            tolerance: tol,
        });
    }
    Ok(overlap.clamp(0.0, 1.0).sqrt())
}

/// Coefficients of the system-bath coupling rewritten in the {D, B, 3} basis.
///
/// The coupling only contains |D(t)⟩⟨3| and |B(t)⟩⟨3| (plus conjugates); there
/// is no |D⟩⟨B| channel, so the dark state can only leak through level 3. The
/// bath-b rows use g_{b,k}* in the creation part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DbCoefficients {
    /// |D⟩⟨3| coupled to bath a.
    pub dark_a: C64,
    /// |D⟩⟨3| coupled to bath b.
    pub dark_b: C64,
    /// |B⟩⟨3| coupled to bath a.
    pub bright_a: C64,
    /// |B⟩⟨3| coupled to bath b.
    pub bright_b: C64,
}

pub fn db_basis_coefficients(params: &SystemParams, t: f64) -> DbCoefficients {
    let rabi = params.rabi();
    let phase1 = C64::from_polar(1.0, params.omega1 * t);
    let phase2 = C64::from_polar(1.0, params.omega2 * t);
    DbCoefficients {
        dark_a: params.drive2.conj() / rabi * phase1,
        dark_b: -params.drive1.conj() / rabi * phase2,
        bright_a: params.drive1.conj() / rabi * phase1,
        bright_b: params.drive2.conj() / rabi * phase2,
    }
}

impl DbCoefficients {
    /// Expands the bath-a and bath-b system operators back onto |1⟩, |2⟩:
    /// returns the lower-level kets multiplying ⟨3| for each bath.
    pub fn lower_level_kets(&self, params: &SystemParams, t: f64) -> ([C64; 3], [C64; 3]) {
        let d = dark_state(params, t);
        let b = bright_state(params, t);
        let combine = |cd: C64, cb: C64| [cd * d[0] + cb * b[0], cd * d[1] + cb * b[1], C64::default()];
        (
            combine(self.dark_a, self.bright_a),
            combine(self.dark_b, self.bright_b),
        )
    }
}
