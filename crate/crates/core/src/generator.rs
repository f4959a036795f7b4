//! 9×9 generators acting on Bloch vectors.
//!
//! Ordering of rows and columns follows [`Component`]. The pulse enters only
//! through the four coherence rows that pair a lower level with |3⟩: the
//! commutator of R(t) = −c(t)(|1⟩⟨1| + |2⟩⟨2|) with |3⟩⟨i| is +c(t)|3⟩⟨i|,
//! so iΔ₃ᵢ becomes i(Δ₃ᵢ + c(t)) there (and the conjugate rows follow). Drive
//! phases e^(−iΔ₃ᵢt) belong to the fixed laser frequencies and are left alone.

use std::ops::{Add, Mul};

use crate::model::{Baths, BlochVector, Component, PulseTrain, SystemParams, C64};

use Component::*;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Generator9(pub [[C64; 9]; 9]);

impl Default for Generator9 {
    fn default() -> Self {
        Self::zero()
    }
}

impl Generator9 {
    pub fn zero() -> Self {
        Self([[C64::default(); 9]; 9])
    }

    pub fn identity() -> Self {
        let mut m = Self::zero();
        for k in 0..9 {
            m.0[k][k] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn entry(&self, row: Component, col: Component) -> C64 {
        self.0[row.index()][col.index()]
    }

    fn set(&mut self, row: Component, col: Component, v: C64) {
        self.0[row.index()][col.index()] = v;
    }

    pub fn apply(&self, v: &BlochVector) -> BlochVector {
        let mut out = BlochVector::zero();
        for (r, row) in self.0.iter().enumerate() {
            out.0[r] = row.iter().zip(v.0.iter()).map(|(a, b)| a * b).sum();
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut m = *self;
        for row in m.0.iter_mut() {
            for v in row.iter_mut() {
                *v *= s;
            }
        }
        m
    }

    pub fn nonzero_count(&self) -> usize {
        self.0.iter().flatten().filter(|v| **v != C64::default()).count()
    }

    /// Nonzero entries as a compact kernel.
    pub fn sparse(&self) -> SparseGenerator {
        let mut entries = Vec::with_capacity(32);
        for (r, row) in self.0.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                if *v != C64::default() {
                    entries.push((r as u8, c as u8, *v));
                }
            }
        }
        SparseGenerator { entries }
    }
}

impl Add for Generator9 {
    type Output = Generator9;

    fn add(mut self, rhs: Generator9) -> Generator9 {
        for r in 0..9 {
            for c in 0..9 {
                self.0[r][c] += rhs.0[r][c];
            }
        }
        self
    }
}

impl Mul for Generator9 {
    type Output = Generator9;

    fn mul(self, rhs: Generator9) -> Generator9 {
        let mut m = Generator9::zero();
        for r in 0..9 {
            for c in 0..9 {
                m.0[r][c] = (0..9).map(|k| self.0[r][k] * rhs.0[k][c]).sum();
            }
        }
        m
    }
}

/// Nonzero entries of a [`Generator9`] in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGenerator {
    entries: Vec<(u8, u8, C64)>,
}

impl SparseGenerator {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `out += self · v`.
    #[inline]
    pub fn apply_add(&self, v: &[C64], out: &mut [C64]) {
        for &(r, c, a) in &self.entries {
            out[r as usize] += a * v[c as usize];
        }
    }
}

const fn i(s: f64) -> C64 {
    C64::new(0.0, s)
}

/// H(t) with the pulse evaluated at `t`.
pub fn system_matrix(params: &SystemParams, pulse: &PulseTrain, t: f64) -> Generator9 {
    system_matrix_at_level(params, t, pulse.level(t))
}

/// H(t) with an explicit pulse level c; the integrator uses this to hold c
/// constant across a sub-step.
pub fn system_matrix_at_level(params: &SystemParams, t: f64, level: f64) -> Generator9 {
    let o1 = params.drive1_at(t);
    let o2 = params.drive2_at(t);
    let (o1c, o2c) = (o1.conj(), o2.conj());
    let d31 = params.delta31() + level;
    let d32 = params.delta32() + level;
    let d21 = params.delta21();
    let iu = i(1.0);
    let mut h = Generator9::zero();

    h.set(A11, A31, iu * o1);
    h.set(A11, A13, -iu * o1c);

    h.set(A22, A32, iu * o2);
    h.set(A22, A23, -iu * o2c);

    h.set(A33, A31, -iu * o1);
    h.set(A33, A32, -iu * o2);
    h.set(A33, A13, iu * o1c);
    h.set(A33, A23, iu * o2c);

    h.set(A31, A11, iu * o1c);
    h.set(A31, A33, -iu * o1c);
    h.set(A31, A31, i(d31));
    h.set(A31, A21, iu * o2c);

    h.set(A32, A22, iu * o2c);
    h.set(A32, A33, -iu * o2c);
    h.set(A32, A32, i(d32));
    h.set(A32, A12, iu * o1c);

    h.set(A21, A31, iu * o2);
    h.set(A21, A21, i(d21));
    h.set(A21, A23, -iu * o1c);

    h.set(A13, A11, -iu * o1);
    h.set(A13, A33, iu * o1);
    h.set(A13, A13, i(-d31));
    h.set(A13, A12, -iu * o2);

    h.set(A23, A22, -iu * o2);
    h.set(A23, A33, iu * o2);
    h.set(A23, A21, -iu * o1);
    h.set(A23, A23, i(-d32));

    h.set(A12, A32, iu * o1);
    h.set(A12, A13, -iu * o2c);
    h.set(A12, A12, i(-d21));

    h
}

const LA_ENTRIES: [(Component, Component, f64); 12] = [
    (A11, A31, 1.0),
    (A11, A13, -1.0),
    (A33, A31, -1.0),
    (A33, A13, 1.0),
    (A31, A11, 1.0),
    (A31, A33, -1.0),
    (A32, A12, 1.0),
    (A21, A23, -1.0),
    (A13, A11, -1.0),
    (A13, A33, 1.0),
    (A23, A21, -1.0),
    (A12, A32, 1.0),
];

const LB_ENTRIES: [(Component, Component, f64); 12] = [
    (A22, A32, 1.0),
    (A22, A23, -1.0),
    (A33, A32, -1.0),
    (A33, A23, 1.0),
    (A31, A21, 1.0),
    (A32, A22, 1.0),
    (A32, A33, -1.0),
    (A21, A31, 1.0),
    (A13, A12, -1.0),
    (A23, A22, -1.0),
    (A23, A33, 1.0),
    (A12, A13, -1.0),
];

fn from_entries(entries: &[(Component, Component, f64)]) -> Generator9 {
    let mut m = Generator9::zero();
    for &(r, c, s) in entries {
        m.set(r, c, i(s));
    }
    m
}

/// The constant bath-coupling matrices (L_a, L_b); every nonzero entry is ±i.
pub fn coupling_matrices() -> (Generator9, Generator9) {
    (from_entries(&LA_ENTRIES), from_entries(&LB_ENTRIES))
}

/// H(t) + (Γ_a/2)L_a² + (Γ_b/2)L_b².
///
/// Obtained from the hierarchy at γ → ∞ by setting the first-tier derivative
/// to zero, which gives A^(1,0) ≈ (Γ_a/2) L_a A^(0,0) and likewise for b.
pub fn markov_limit_generator(
    params: &SystemParams,
    baths: &Baths,
    pulse: &PulseTrain,
    t: f64,
) -> Generator9 {
    markov_limit_generator_at_level(params, baths, t, pulse.level(t))
}

pub fn markov_limit_generator_at_level(
    params: &SystemParams,
    baths: &Baths,
    t: f64,
    level: f64,
) -> Generator9 {
    system_matrix_at_level(params, t, level) + markov_dissipator(baths)
}

/// (Γ_a/2)L_a² + (Γ_b/2)L_b²; time independent.
pub fn markov_dissipator(baths: &Baths) -> Generator9 {
    let (la, lb) = coupling_matrices();
    (la * la).scale(0.5 * baths.a.coupling()) + (lb * lb).scale(0.5 * baths.b.coupling())
}
