//! Doubly stochastic baseline: `min ‖AD − DB‖_F` over the Birkhoff polytope
//! with forbidden entries, by monotone FISTA and Dykstra projections.

use nalgebra::DMatrix;

use crate::lap::perfect_matching;
use crate::rounding::RoundingError;

/// Stop when the gradient-mapping norm falls below this value.
pub const DS_TOLERANCE: f64 = 1e-6;
pub const DS_MAX_ITERS: usize = 5000;
const DYKSTRA_TOLERANCE: f64 = 1e-12;
const DYKSTRA_MAX_ITERS: usize = 2000;

#[derive(Debug, Clone)]
pub struct DsResult {
    pub d: DMatrix<f64>,
    pub iterations: usize,
    /// Objective `½‖AD − DB‖²` of the accepted iterate, one entry per iteration.
    pub objective: Vec<f64>,
    pub gradient_mapping: f64,
}

/// Orthogonal projection onto `{D : D1 = 1, Dᵀ1 = 1}`.
fn project_affine(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows() as f64;
    let r: Vec<f64> = (0..x.nrows()).map(|i| 1.0 - x.row(i).sum()).collect();
    let c: Vec<f64> = (0..x.ncols()).map(|j| 1.0 - x.column(j).sum()).collect();
    let total: f64 = r.iter().sum();
    DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] + r[i] / n + c[j] / n - total / (n * n))
}

/// Projects onto the doubly stochastic matrices vanishing where `mask` is 1.
pub fn project_ds(x: &DMatrix<f64>, mask: &DMatrix<f64>) -> DMatrix<f64> {
    let clamp = |m: &DMatrix<f64>| DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| if mask[(i, j)] != 0.0 { 0.0 } else { m[(i, j)].max(0.0) });
    let mut cur = x.clone();
    let mut p = DMatrix::zeros(x.nrows(), x.ncols());
    let mut q = DMatrix::zeros(x.nrows(), x.ncols());
    for _ in 0..DYKSTRA_MAX_ITERS {
        let a = project_affine(&(&cur + &p));
        p = &cur + &p - &a;
        let b = clamp(&(&a + &q));
        q = &a + &q - &b;
        let change = (&b - &cur).amax();
        cur = b;
        if change < DYKSTRA_TOLERANCE {
            break;
        }
    }
    cur
}

fn objective(a: &DMatrix<f64>, b: &DMatrix<f64>, d: &DMatrix<f64>) -> f64 {
    0.5 * (a * d - d * b).norm_squared()
}

fn gradient(a: &DMatrix<f64>, b: &DMatrix<f64>, d: &DMatrix<f64>) -> DMatrix<f64> {
    let r = a * d - d * b;
    a.transpose() * &r - r * b.transpose()
}

/// Solves the relaxation; `mask(i, j) = 1` forbids `D(i, j) > 0`.
pub fn ds_baseline(a: &DMatrix<f64>, b: &DMatrix<f64>, mask: &DMatrix<f64>) -> Result<DsResult, RoundingError> {
    let n = a.nrows();
    if a.ncols() != n || b.shape() != (n, n) || mask.shape() != (n, n) {
        return Err(RoundingError::SizeMismatch("A, B and K must all be n x n".into()));
    }
    let adj: Vec<Vec<usize>> = (0..n).map(|i| (0..n).filter(|&j| mask[(i, j)] == 0.0).collect()).collect();
    if perfect_matching(&adj, n).is_none() {
        return Err(RoundingError::Infeasible);
    }
    let lip = (a.norm() + b.norm()).powi(2).max(1e-12);
    let mut x = project_ds(&DMatrix::from_element(n, n, 1.0 / n as f64), mask);
    let mut fx = objective(a, b, &x);
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut history = vec![fx];
    let mut mapping = f64::INFINITY;
    let mut iterations = 0;
    while iterations < DS_MAX_ITERS {
        iterations += 1;
        let z = project_ds(&(&y - gradient(a, b, &y) / lip), mask);
        mapping = lip * (&y - &z).norm();
        let fz = objective(a, b, &z);
        let x_prev = x.clone();
        if fz <= fx {
            x = z.clone();
            fx = fz;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = &x + (&z - &x) * (t / t_next) + (&x - &x_prev) * ((t - 1.0) / t_next);
        t = t_next;
        history.push(fx);
        if mapping <= DS_TOLERANCE {
            break;
        }
    }
    Ok(DsResult { d: x, iterations, objective: history, gradient_mapping: mapping })
}
