//! Per-clique lifted variables, cost matrices, the equality-constraint
//! operator and the sampling operators shared by every ADMM iteration.
//!
//! A clique with nodes `V(0) < … < V(k-1)` owns a symmetric `d × d` matrix,
//! `d = k·n + 1`:
//!
//! ```text
//!        ┌ Q_00 … Q_0,k-1  p_0 ┐
//!  X  =  │  ⋮        ⋮      ⋮  │      Q_uv ≈ p_u p_vᵀ,  p_u ≈ column V(u) of P
//!        │ Q_k-1,0 …       p_k-1│
//!        └ p_0ᵀ  …  p_k-1ᵀ   1  ┘
//! ```
//!
//! Vectorization is column-major over the full matrix, so entry `(row, col)`
//! sits at `col·d + row`.

use std::collections::BTreeMap;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use thiserror::Error;

use crate::cliquegraph::{clique_cover, support_graph, CliqueCover, CoverStrategy, SupportGraph};
use crate::instances::{Permutation, ProblemInstance, Sense};
use crate::sparse::CsrMatrix;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("size mismatch: {0}")]
    SizeMismatch(String),
    #[error("constraint Gram matrix is numerically rank deficient (condition estimate {condition:.3e})")]
    RankDeficient { condition: f64 },
    #[error("sampler Gram matrix lacks the two-value block structure: {0}")]
    GramStructure(String),
    #[error("closed-form H inverse deviates from the numeric inverse by {deviation:.3e} for {slots} slots")]
    HMismatch { slots: usize, deviation: f64 },
}

/// Condition number above which the constraint Gram matrix is rejected.
pub const MAX_CONDITION: f64 = 1e12;
/// Agreement required between the closed-form and numeric H inverses.
pub const H_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VariableLayout {
    pub n: usize,
    pub k: usize,
}

impl VariableLayout {
    pub fn new(n: usize, k: usize) -> Self {
        Self { n, k }
    }

    pub fn d(&self) -> usize {
        self.k * self.n + 1
    }

    /// Index of the border row/column holding `p_u` and the corner.
    pub fn corner(&self) -> usize {
        self.k * self.n
    }

    /// Side length of the interior (everything but the border).
    pub fn interior(&self) -> usize {
        self.k * self.n
    }

    /// First row of block `u`.
    pub fn offset(&self, u: usize) -> usize {
        u * self.n
    }

    /// Column-major position of `(row, col)`.
    pub fn index(&self, row: usize, col: usize) -> usize {
        col * self.d() + row
    }

    /// Constraint count per clique.
    pub fn m_e(&self) -> usize {
        let (n, k) = (self.n, self.k);
        k * (n + 2) + k * (k - 1) + 1
    }
}

/// Builds the equality rows `𝒜 x = b` acting on one clique variable.
///
/// Per slot `u`: `trace Q_uu = 1`, off-diagonal sum of `Q_uu` = 0 and
/// `diag Q_uu − p_u = 0` with `p_u` read as the average of its row and column
/// copies. Per pair `u < v`: symmetrized `trace Q_uv = 0` and `1ᵀ Q_uv 1 = 1`.
/// Finally the corner is pinned to 1.
pub fn build_constraints(n: usize, k: usize) -> (CsrMatrix, DVector<f64>) {
    let lay = VariableLayout::new(n, k);
    let c = lay.corner();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(lay.m_e());
    let mut rhs = Vec::with_capacity(lay.m_e());
    for u in 0..k {
        let o = lay.offset(u);
        rows.push((0..n).map(|a| (lay.index(o + a, o + a), 1.0)).collect());
        rhs.push(1.0);
        let mut off = Vec::with_capacity(n * (n - 1));
        for a in 0..n {
            for b in 0..n {
                if a != b {
                    off.push((lay.index(o + a, o + b), 1.0));
                }
            }
        }
        rows.push(off);
        rhs.push(0.0);
        for l in 0..n {
            rows.push(vec![(lay.index(o + l, o + l), 1.0), (lay.index(o + l, c), -0.5), (lay.index(c, o + l), -0.5)]);
            rhs.push(0.0);
        }
    }
    for u in 0..k {
        for v in u + 1..k {
            let (ou, ov) = (lay.offset(u), lay.offset(v));
            let mut tr = Vec::with_capacity(2 * n);
            for a in 0..n {
                tr.push((lay.index(ou + a, ov + a), 0.5));
                tr.push((lay.index(ov + a, ou + a), 0.5));
            }
            rows.push(tr);
            rhs.push(0.0);
            let mut all = Vec::with_capacity(2 * n * n);
            for a in 0..n {
                for b in 0..n {
                    all.push((lay.index(ou + a, ov + b), 0.5));
                    all.push((lay.index(ov + b, ou + a), 0.5));
                }
            }
            rows.push(all);
            rhs.push(1.0);
        }
    }
    rows.push(vec![(lay.index(c, c), 1.0)]);
    rhs.push(1.0);
    let d2 = lay.d() * lay.d();
    (CsrMatrix::from_rows(d2, &rows), DVector::from_vec(rhs))
}

/// Builds the border samplers `𝓑_0 … 𝓑_{k-1}` (each `n × d²`) and the
/// interior selector `𝓓` (`(kn)² × d²`, column-major over the interior).
pub fn build_samplers(n: usize, k: usize) -> (Vec<CsrMatrix>, CsrMatrix) {
    let lay = VariableLayout::new(n, k);
    let c = lay.corner();
    let d2 = lay.d() * lay.d();
    let samplers = (0..k)
        .map(|s| {
            let o = lay.offset(s);
            let rows: Vec<Vec<(usize, f64)>> =
                (0..n).map(|l| vec![(lay.index(o + l, c), 0.5), (lay.index(c, o + l), 0.5)]).collect();
            CsrMatrix::from_rows(d2, &rows)
        })
        .collect();
    let m = lay.interior();
    let mut rows = Vec::with_capacity(m * m);
    for col in 0..m {
        for row in 0..m {
            rows.push(vec![(lay.index(row, col), 1.0)]);
        }
    }
    (samplers, CsrMatrix::from_rows(d2, &rows))
}

/// Closed-form inverse of `(α−β)I_m + βJ_m`.
pub fn h_matrix(m: usize, alpha: f64, beta: f64) -> DMatrix<f64> {
    let diag = 1.0 / (alpha - beta);
    let off = beta / ((alpha - beta) * (alpha - beta + m as f64 * beta));
    DMatrix::from_fn(m, m, |a, b| if a == b { diag - off } else { -off })
}

/// Reads `(α, β)` off the Gram matrix of the stacked operator
/// `[𝓑_0ᵀ 0; 0 𝓑_1ᵀ; I I]` (two slots of one node in different cliques) and
/// checks that it has the `(α−β)I + β J⊗I` structure.
pub fn measure_alpha_beta(samplers: &[CsrMatrix]) -> Result<(f64, f64), ModelError> {
    let (n, d2) = (samplers[0].nrows(), samplers[0].ncols());
    // Rows of the transposed stack: column a·n + ℓ of the stacked operator.
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(2 * n);
    for a in 0..2 {
        let sampler = &samplers[a.min(samplers.len() - 1)];
        for l in 0..n {
            let mut row: Vec<(usize, f64)> = sampler.row(l).map(|(c, v)| (a * d2 + c, v)).collect();
            row.push((2 * d2 + l, 1.0));
            rows.push(row);
        }
    }
    let kt = CsrMatrix::from_rows(2 * d2 + n, &rows);
    let gram = kt.mul_transpose_dense(&kt);
    let alpha = gram[(0, 0)];
    let beta = gram[(0, n)];
    for p in 0..2 * n {
        for q in 0..2 * n {
            let expect = if p == q {
                alpha
            } else if p % n == q % n {
                beta
            } else {
                0.0
            };
            if gram[(p, q)] != expect {
                return Err(ModelError::GramStructure(format!("entry ({p}, {q}) = {}, expected {expect}", gram[(p, q)])));
            }
        }
    }
    Ok((alpha, beta))
}

/// Operators and factorizations shared by every clique.
#[derive(Debug, Clone)]
pub struct ConstraintSystem {
    pub a: CsrMatrix,
    pub b: DVector<f64>,
    pub samplers: Vec<CsrMatrix>,
    pub interior: CsrMatrix,
    pub chol_aat: Cholesky<f64, Dyn>,
    pub alpha: f64,
    pub beta: f64,
    /// `H` for each slot count that occurs.
    pub h: BTreeMap<usize, DMatrix<f64>>,
    pub condition: f64,
}

impl ConstraintSystem {
    /// Factorizes `𝒜𝒜ᵀ`, measures `α, β` and validates `H` for each slot count.
    pub fn precompute(n: usize, k: usize, slot_counts: impl IntoIterator<Item = usize>) -> Result<Self, ModelError> {
        let (a, b) = build_constraints(n, k);
        let (samplers, interior) = build_samplers(n, k);
        let aat = a.mul_transpose_dense(&a);
        let eig = SymmetricEigen::new(aat.clone());
        let (lo, hi) = eig.eigenvalues.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v.abs())));
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if condition > MAX_CONDITION {
            return Err(ModelError::RankDeficient { condition });
        }
        let chol_aat = Cholesky::new(aat).ok_or(ModelError::RankDeficient { condition: f64::INFINITY })?;
        let (alpha, beta) = measure_alpha_beta(&samplers)?;
        let mut h = BTreeMap::new();
        for m in slot_counts {
            if h.contains_key(&m) {
                continue;
            }
            let closed = h_matrix(m, alpha, beta);
            let gram = DMatrix::from_fn(m, m, |p, q| if p == q { alpha } else { beta });
            let numeric = gram.try_inverse().ok_or(ModelError::HMismatch { slots: m, deviation: f64::INFINITY })?;
            let deviation = (&closed - &numeric).amax();
            if deviation > H_TOLERANCE {
                return Err(ModelError::HMismatch { slots: m, deviation });
            }
            h.insert(m, closed);
        }
        Ok(Self { a, b, samplers, interior, chol_aat, alpha, beta, h, condition })
    }

    pub fn m_e(&self) -> usize {
        self.a.nrows()
    }
}

/// Per-clique cost matrices such that `Σ_r ⟨C_r, X_r⟩` reproduces the
/// instance objective on lifted permutations.
///
/// Edge `(i, j)` contributes `M = B(i,j)·A + B(j,i)·Aᵀ`, half to block
/// `(u, v)` and half (transposed) to block `(v, u)`. The linear term, plus
/// `B(i,i)·A(a,a)` from self loops, is spread evenly over the diagonal blocks
/// of every slot of node `i`.
pub fn build_costs(
    inst: &ProblemInstance,
    graph: &SupportGraph,
    cover: &CliqueCover,
    diag_weights: Option<&DMatrix<f64>>,
) -> Result<Vec<DMatrix<f64>>, ModelError> {
    let n = inst.n();
    if graph.n != n || cover.n != n {
        return Err(ModelError::SizeMismatch(format!("instance has n = {n}, graph {}, cover {}", graph.n, cover.n)));
    }
    if let Some(w) = diag_weights {
        if w.nrows() != n || w.ncols() != n {
            return Err(ModelError::SizeMismatch("diagonal weights must be n x n".into()));
        }
    }
    let lay = VariableLayout::new(n, cover.k);
    let d = lay.d();
    let mut costs = vec![DMatrix::zeros(d, d); cover.len()];
    for (e, edge) in graph.edges.iter().enumerate() {
        let r = cover.edge_owner[e];
        let u = cover.local_of(r, edge.i).expect("edge endpoint in its clique");
        let v = cover.local_of(r, edge.j).expect("edge endpoint in its clique");
        let (ou, ov) = (lay.offset(u), lay.offset(v));
        let c = &mut costs[r];
        for a in 0..n {
            for b in 0..n {
                let m = edge.forward * inst.a[(a, b)] + edge.backward * inst.a[(b, a)];
                c[(ou + a, ov + b)] += 0.5 * m;
                c[(ov + b, ou + a)] += 0.5 * m;
            }
        }
    }
    let mut linear = diag_weights.cloned().unwrap_or_else(|| DMatrix::zeros(n, n));
    for i in 0..n {
        let bii = graph.self_loops[i];
        if bii != 0.0 {
            for a in 0..n {
                linear[(a, i)] += bii * inst.a[(a, a)];
            }
        }
    }
    for i in 0..n {
        let slots = &cover.slots[i];
        let share = 1.0 / slots.len() as f64;
        for slot in slots {
            let o = lay.offset(slot.local);
            for a in 0..n {
                costs[slot.clique][(o + a, o + a)] += share * linear[(a, i)];
            }
        }
    }
    Ok(costs)
}

/// Lifts a permutation to one rank-one clique variable per clique.
pub fn lift(layout: VariableLayout, cover: &CliqueCover, sigma: &Permutation) -> Vec<DMatrix<f64>> {
    let d = layout.d();
    cover
        .cliques
        .iter()
        .map(|set| {
            let mut v = DVector::zeros(d);
            for (u, &node) in set.iter().enumerate() {
                v[layout.offset(u) + sigma[node]] = 1.0;
            }
            v[d - 1] = 1.0;
            &v * v.transpose()
        })
        .collect()
}

/// Shifts the off-diagonal of `A` and the linear term by their means.
///
/// Off-diagonal blocks of a feasible lift sum to one and diagonal blocks have
/// unit trace, so the shift changes every feasible objective by the same
/// constant, which is returned alongside.
pub fn centered_instance(inst: &ProblemInstance) -> (ProblemInstance, f64) {
    let n = inst.n();
    let off: f64 = (0..n).flat_map(|a| (0..n).filter(move |&b| b != a).map(move |b| (a, b))).map(|ab| inst.a[ab]).sum();
    let a_mean = off / (n * (n - 1)) as f64;
    let mut out = inst.clone();
    for a in 0..n {
        for b in 0..n {
            if a != b {
                out.a[(a, b)] -= a_mean;
            }
        }
    }
    let edge_weight: f64 = inst.b.triplets().filter(|(i, j, _)| i != j).map(|(_, _, w)| w).sum();
    let mut offset = a_mean * edge_weight;
    if let Some(w) = out.linear.as_mut() {
        let w_mean = w.mean();
        w.add_scalar_mut(-w_mean);
        offset += w_mean * n as f64;
    }
    (out, offset)
}

/// Everything the solver needs for one instance at one clique size.
#[derive(Debug, Clone)]
pub struct SdpModel {
    pub layout: VariableLayout,
    pub graph: SupportGraph,
    pub cover: CliqueCover,
    /// Native-sense costs: `Σ_r ⟨C_r, X_r⟩` is the objective of the instance.
    pub costs: Vec<DMatrix<f64>>,
    /// Costs with the part that is constant on the feasible set removed:
    /// `Σ_r ⟨C_r, X_r⟩ = Σ_r ⟨C̃_r, X_r⟩ + offset` for every feasible lift.
    pub centered_costs: Vec<DMatrix<f64>>,
    pub offset: f64,
    /// Costs handed to the solver, which always minimizes:
    /// `sign · C̃_r / cost_scale` with `sign = −1` for maximization.
    pub solver_costs: Vec<DMatrix<f64>>,
    pub cost_scale: f64,
    pub sense: Sense,
    pub system: ConstraintSystem,
}

impl SdpModel {
    pub fn build(inst: &ProblemInstance, k: usize, strategy: CoverStrategy) -> Result<Self, crate::Error> {
        let graph = support_graph(&inst.b)?;
        let cover = clique_cover(&graph, k, strategy)?;
        Self::from_cover(inst, graph, cover)
    }

    pub fn from_cover(inst: &ProblemInstance, graph: SupportGraph, cover: CliqueCover) -> Result<Self, crate::Error> {
        let layout = VariableLayout::new(inst.n(), cover.k);
        let costs = build_costs(inst, &graph, &cover, inst.linear.as_ref())?;
        let (centered, offset) = centered_instance(inst);
        let centered_costs = build_costs(&centered, &graph, &cover, centered.linear.as_ref())?;
        let system = ConstraintSystem::precompute(layout.n, layout.k, cover.slots.iter().map(Vec::len))?;
        let mut model = Self {
            layout,
            graph,
            cover,
            solver_costs: Vec::new(),
            costs,
            centered_costs,
            offset,
            cost_scale: 1.0,
            sense: inst.sense,
            system,
        };
        model.set_cost_scale(1.0);
        Ok(model)
    }

    /// Rescales the solver costs by `1/scale`; objectives reported by the
    /// solver are multiplied back.
    pub fn set_cost_scale(&mut self, scale: f64) {
        assert!(scale > 0.0 && scale.is_finite(), "cost scale must be positive");
        let sign = match self.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        self.cost_scale = scale;
        self.solver_costs = self.centered_costs.iter().map(|c| c * (sign / scale)).collect();
    }

    /// Largest absolute cost entry, the natural scale for the solver costs.
    pub fn cost_magnitude(&self) -> f64 {
        self.centered_costs.iter().map(|c| c.amax()).fold(0.0, f64::max)
    }

    pub fn num_cliques(&self) -> usize {
        self.cover.len()
    }

    /// Converts a solver-side (minimization, scaled) objective to native sense.
    pub fn to_native(&self, solver_value: f64) -> f64 {
        let v = solver_value * self.cost_scale;
        match self.sense {
            Sense::Minimize => v + self.offset,
            Sense::Maximize => self.offset - v,
        }
    }

    pub fn lift(&self, sigma: &Permutation) -> Vec<DMatrix<f64>> {
        lift(self.layout, &self.cover, sigma)
    }

    /// `Σ_r ⟨C_r, X_r⟩` in native sense.
    pub fn objective(&self, xs: &[DMatrix<f64>]) -> f64 {
        self.costs.iter().zip(xs).map(|(c, x)| c.dot(x)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_count() {
        let (a, b) = build_constraints(3, 2);
        assert_eq!(a.nrows(), 13);
        assert_eq!(b.len(), 13);
        assert_eq!(VariableLayout::new(3, 2).m_e(), 13);
    }

    #[test]
    fn interior_selector_size() {
        let (_, dd) = build_samplers(5, 2);
        assert_eq!(dd.nrows(), 4 * 25);
        assert_eq!(dd.ncols(), 11 * 11);
    }

    #[test]
    fn alpha_beta_values() {
        let (b, _) = build_samplers(4, 3);
        assert_eq!(measure_alpha_beta(&b).unwrap(), (1.5, 1.0));
    }

    #[test]
    fn single_slot_h() {
        let h = h_matrix(1, 1.5, 1.0);
        assert!((h[(0, 0)] - 1.0 / 1.5).abs() < 1e-15);
    }

    #[test]
    fn zero_flow_means_zero_costs() {
        let b = DMatrix::from_fn(4, 4, |i, j| if j == i + 1 { 1.0 } else { 0.0 });
        let inst = ProblemInstance::new("z", DMatrix::zeros(4, 4), &b, Sense::Minimize).unwrap();
        let m = SdpModel::build(&inst, 2, CoverStrategy::Greedy).unwrap();
        assert!(m.costs.iter().all(|c| c.amax() == 0.0));
    }
}
