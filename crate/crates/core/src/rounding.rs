//! Recovering a permutation from the solver state and reporting gaps.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::admm::{border_sample, SolverState};
use crate::instances::{Permutation, ProblemInstance};
use crate::lap::lex_min_assignment;
use crate::sdpmodel::SdpModel;

/// Row/column-sum deviation above which a recovered matrix is flagged.
pub const STOCHASTIC_WARNING: f64 = 1e-2;

#[derive(Debug, Error, PartialEq)]
pub enum RoundingError {
    #[error("gap is undefined for a zero reference value")]
    UndefinedGap,
    #[error("forbidden-assignment mask admits no permutation")]
    Infeasible,
    #[error("size mismatch: {0}")]
    SizeMismatch(String),
}

/// Averages the border copies of every node's column over all of its slots.
/// Column `i` of the result estimates column `i` of the permutation matrix.
pub fn assemble_doubly_stochastic(state: &SolverState, model: &SdpModel) -> DMatrix<f64> {
    let xs: Vec<&DMatrix<f64>> = state.cliques.iter().map(|c| &c.x).collect();
    assemble_from_cliques(model, &xs)
}

pub fn assemble_from_cliques(model: &SdpModel, xs: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let lay = model.layout;
    let n = lay.n;
    let samples: Vec<DMatrix<f64>> = xs.iter().map(|x| border_sample(lay, x)).collect();
    let mut p = DMatrix::zeros(n, n);
    for (i, slots) in model.cover.slots.iter().enumerate() {
        for slot in slots {
            let mut col = p.column_mut(i);
            col += samples[slot.clique].column(slot.local);
        }
        let mut col = p.column_mut(i);
        col /= slots.len() as f64;
    }
    p.apply(|v| *v = v.max(0.0));
    p
}

/// Largest deviation of any row or column sum from 1.
pub fn stochastic_deviation(p: &DMatrix<f64>) -> (f64, f64) {
    let rows = (0..p.nrows()).map(|i| (p.row(i).sum() - 1.0).abs()).fold(0.0, f64::max);
    let cols = (0..p.ncols()).map(|j| (p.column(j).sum() - 1.0).abs()).fold(0.0, f64::max);
    (rows, cols)
}

/// Permutation maximizing `Σ_i P(σ(i), i)`; ties go to the lexicographically
/// smallest `σ`.
pub fn project_to_permutation(p: &DMatrix<f64>) -> Permutation {
    let cost = -p.transpose();
    Permutation::new(lex_min_assignment(&cost)).expect("assignment is a bijection")
}

/// Objective of `sigma` in the instance's native sense.
pub fn evaluate(inst: &ProblemInstance, sigma: &Permutation) -> f64 {
    inst.objective(sigma)
}

/// Relative gap in percent, `100 · |v* − v| / |v*|`.
pub fn gap(v: f64, v_star: f64) -> Result<f64, RoundingError> {
    if v_star == 0.0 {
        return Err(RoundingError::UndefinedGap);
    }
    Ok(100.0 * (v_star - v).abs() / v_star.abs())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundedSolution {
    #[serde(skip)]
    pub p_ds: DMatrix<f64>,
    /// One-based permutation.
    pub sigma: Vec<usize>,
    pub rounded_value: f64,
    pub sdp_bound: f64,
    pub gap_bound_pct: Option<f64>,
    pub gap_rounded_pct: Option<f64>,
    pub row_sum_deviation: f64,
    pub col_sum_deviation: f64,
}

impl RoundedSolution {
    pub fn new(p_ds: DMatrix<f64>, sigma: &Permutation, rounded_value: f64, sdp_bound: f64, optimum: Option<f64>) -> Self {
        let (row_sum_deviation, col_sum_deviation) = stochastic_deviation(&p_ds);
        Self {
            p_ds,
            sigma: sigma.one_based(),
            rounded_value,
            sdp_bound,
            gap_bound_pct: optimum.and_then(|o| gap(sdp_bound, o).ok()),
            gap_rounded_pct: optimum.and_then(|o| gap(rounded_value, o).ok()),
            row_sum_deviation,
            col_sum_deviation,
        }
    }

    pub fn stochastic_warning(&self) -> bool {
        self.row_sum_deviation > STOCHASTIC_WARNING || self.col_sum_deviation > STOCHASTIC_WARNING
    }
}
