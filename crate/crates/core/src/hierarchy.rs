//! Truncated hierarchy {A^(m,n) : m + n ≤ N} and its right-hand side.
//!
//! Node (m, n) evolves as
//!
//! ```text
//! dA^(m,n)/dt = −(mγ_a + nγ_b) A^(m,n) + H(t) A^(m,n)
//!             + L_a [ m(Γ_aγ_a/2) A^(m−1,n) + A^(m+1,n) ]
//!             + L_b [ n(Γ_bγ_b/2) A^(m,n−1) + A^(m,n+1) ]
//! ```
//!
//! with nodes outside 0 ≤ m, n and m + n ≤ N identically zero. Node (0, 0)
//! is the physical Bloch vector.

use crate::generator::{coupling_matrices, system_matrix_at_level, SparseGenerator};
use crate::integrator::LinearDynamics;
use crate::model::{
    bloch_to_density, dark_state, density_to_bloch, Baths, BlochVector, DensityMatrix, PulseTrain,
    SystemParams, C64,
};

const NONE: u32 = u32::MAX;

/// Dense triangular node layout, ordered by tier m + n and then by m.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HierarchyLayout {
    order: usize,
    nodes: Vec<(u32, u32)>,
    up_a: Vec<u32>,
    up_b: Vec<u32>,
    down_a: Vec<u32>,
    down_b: Vec<u32>,
}

impl HierarchyLayout {
    pub fn new(order: usize) -> Self {
        let mut nodes = Vec::with_capacity((order + 1) * (order + 2) / 2);
        for tier in 0..=order {
            for m in 0..=tier {
                nodes.push((m as u32, (tier - m) as u32));
            }
        }
        let lookup = |m: i64, n: i64| -> u32 {
            if m < 0 || n < 0 || (m + n) as usize > order {
                return NONE;
            }
            let tier = (m + n) as usize;
            (tier * (tier + 1) / 2 + m as usize) as u32
        };
        let mut up_a = Vec::with_capacity(nodes.len());
        let mut up_b = Vec::with_capacity(nodes.len());
        let mut down_a = Vec::with_capacity(nodes.len());
        let mut down_b = Vec::with_capacity(nodes.len());
        for &(m, n) in &nodes {
            let (m, n) = (m as i64, n as i64);
            up_a.push(lookup(m + 1, n));
            up_b.push(lookup(m, n + 1));
            down_a.push(lookup(m - 1, n));
            down_b.push(lookup(m, n - 1));
        }
        Self {
            order,
            nodes,
            up_a,
            up_b,
            down_a,
            down_b,
        }
    }

    /// Truncation order N.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, k: usize) -> (usize, usize) {
        let (m, n) = self.nodes[k];
        (m as usize, n as usize)
    }

    pub fn index_of(&self, m: usize, n: usize) -> Option<usize> {
        if m + n > self.order {
            return None;
        }
        let tier = m + n;
        Some(tier * (tier + 1) / 2 + m)
    }
}

/// All hierarchy nodes at one time, stored flat (9 components per node).
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyState {
    layout: HierarchyLayout,
    data: Vec<C64>,
    t: f64,
}

impl HierarchyState {
    pub fn zeros(order: usize) -> Self {
        let layout = HierarchyLayout::new(order);
        let data = vec![C64::default(); 9 * layout.len()];
        Self { layout, data, t: 0.0 }
    }

    pub fn layout(&self) -> &HierarchyLayout {
        &self.layout
    }

    pub fn order(&self) -> usize {
        self.layout.order
    }

    pub fn node_count(&self) -> usize {
        self.layout.len()
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub(crate) fn set_time(&mut self, t: f64) {
        self.t = t;
    }

    /// Node (m, n); zero when outside the truncation.
    pub fn node(&self, m: usize, n: usize) -> BlochVector {
        match self.layout.index_of(m, n) {
            Some(k) => {
                let mut v = BlochVector::zero();
                v.0.copy_from_slice(&self.data[9 * k..9 * k + 9]);
                v
            }
            None => BlochVector::zero(),
        }
    }

    pub fn set_node(&mut self, m: usize, n: usize, v: &BlochVector) {
        let k = self
            .layout
            .index_of(m, n)
            .expect("node outside the truncated hierarchy");
        self.data[9 * k..9 * k + 9].copy_from_slice(&v.0);
    }

    pub fn top(&self) -> BlochVector {
        self.node(0, 0)
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }
}

/// A^(0,0)(0) is the dark-state projector; every other node starts at zero.
pub fn init_state(order: usize, params: &SystemParams) -> HierarchyState {
    let mut state = HierarchyState::zeros(order);
    let top = density_to_bloch(&DensityMatrix::pure(&dark_state(params, 0.0)));
    state.set_node(0, 0, &top);
    state
}

/// Time derivative of every node at time `t`, returned in the same layout.
pub fn rhs(
    state: &HierarchyState,
    t: f64,
    params: &SystemParams,
    baths: &Baths,
    pulse: &PulseTrain,
) -> HierarchyState {
    let system = HierarchySystem::new(state.order(), *params, *baths);
    let mut out = HierarchyState::zeros(state.order());
    system.derivative(t, pulse.level(t), &state.data, &mut out.data);
    out.t = t;
    out
}

pub fn top_density(state: &HierarchyState) -> DensityMatrix {
    bloch_to_density(&state.top())
}

/// The hierarchy as a linear ODE for the integrator.
#[derive(Debug, Clone)]
pub struct HierarchySystem {
    layout: HierarchyLayout,
    params: SystemParams,
    la: SparseGenerator,
    lb: SparseGenerator,
    damping: Vec<f64>,
    weight_a: Vec<f64>,
    weight_b: Vec<f64>,
}

impl HierarchySystem {
    pub fn new(order: usize, params: SystemParams, baths: Baths) -> Self {
        let layout = HierarchyLayout::new(order);
        let (la, lb) = coupling_matrices();
        let mut damping = Vec::with_capacity(layout.len());
        let mut weight_a = Vec::with_capacity(layout.len());
        let mut weight_b = Vec::with_capacity(layout.len());
        for k in 0..layout.len() {
            let (m, n) = layout.node(k);
            damping.push(-(m as f64 * baths.a.bandwidth() + n as f64 * baths.b.bandwidth()));
            weight_a.push(m as f64 * baths.a.tier_weight());
            weight_b.push(n as f64 * baths.b.tier_weight());
        }
        Self {
            layout,
            params,
            la: la.sparse(),
            lb: lb.sparse(),
            damping,
            weight_a,
            weight_b,
        }
    }

    pub fn layout(&self) -> &HierarchyLayout {
        &self.layout
    }
}

impl LinearDynamics for HierarchySystem {
    fn dim(&self) -> usize {
        9 * self.layout.len()
    }

    fn derivative(&self, t: f64, level: f64, y: &[C64], dy: &mut [C64]) {
        let h = system_matrix_at_level(&self.params, t, level).sparse();
        let l = &self.layout;
        let node = |k: u32| -> Option<&[C64]> {
            (k != NONE).then(|| &y[9 * k as usize..9 * k as usize + 9])
        };
        for k in 0..l.len() {
            let own = &y[9 * k..9 * k + 9];
            let out = &mut dy[9 * k..9 * k + 9];
            let damp = self.damping[k];
            for c in 0..9 {
                out[c] = damp * own[c];
            }
            h.apply_add(own, out);

            for (lmat, up, down, w) in [
                (&self.la, l.up_a[k], l.down_a[k], self.weight_a[k]),
                (&self.lb, l.up_b[k], l.down_b[k], self.weight_b[k]),
            ] {
                let mut feed = [C64::default(); 9];
                let mut any = false;
                if let Some(u) = node(up) {
                    feed.copy_from_slice(u);
                    any = true;
                }
                if let Some(d) = node(down) {
                    if w != 0.0 {
                        for c in 0..9 {
                            feed[c] += w * d[c];
                        }
                        any = true;
                    }
                }
                if any {
                    lmat.apply_add(&feed, out);
                }
            }
        }
    }
}
