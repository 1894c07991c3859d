//! Three-block ADMM on the dual of the clique relaxation.
//!
//! Internally the relaxation is a minimization, `min Σ_r ⟨ĉ_r, X_r⟩`, with
//! `ĉ_r` the solver costs of [`SdpModel`]. The dual variables are grouped in
//! three blocks, `(s, t)`, `(y)` and `(z, w)`; `x` and `g` are the multipliers
//! of the dual constraints and converge to the primal clique variables and to
//! the columns of the doubly stochastic matrix respectively.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sdpmodel::{SdpModel, VariableLayout};

/// Largest `‖x_r‖_∞` tolerated before the run is declared divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e12;
/// Largest asymmetry accepted by [`project_psd`], relative to `max(1, ‖M‖_∞)`.
pub const SYMMETRY_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Convergent variant with the extra middle-block half step.
    #[default]
    Conic3c,
    /// Direct extension of two-block ADMM, blocks in order 1-2-3.
    Direct123,
    /// Direct extension, blocks in order 1-3-2.
    Direct132,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Conic3c => "conic3c",
            Mode::Direct123 => "direct123",
            Mode::Direct132 => "direct132",
        })
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "conic3c" => Ok(Mode::Conic3c),
            "direct123" => Ok(Mode::Direct123),
            "direct132" => Ok(Mode::Direct132),
            other => Err(format!("unknown mode {other:?} (expected conic3c, direct123 or direct132)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub rho: f64,
    pub tau: f64,
    pub max_iters: usize,
    /// Stop once `η ≤ tol`; checked at trace points. Zero runs to `max_iters`.
    pub tol: f64,
    pub mode: Mode,
    /// Worker threads; `None` uses the hardware default.
    pub threads: Option<usize>,
    /// Residuals are evaluated and recorded every this many iterations.
    pub trace_every: usize,
    /// Rebalance `rho` between primal and dual infeasibility during the
    /// first half of the run; `rho` is then frozen.
    pub adaptive_rho: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { rho: 1.0, tau: 1.0, max_iters: 1000, tol: 0.0, mode: Mode::Conic3c, threads: None, trace_every: 10, adaptive_rho: true }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(SolveError::InvalidConfig(format!("rho must be positive, got {}", self.rho)));
        }
        if !(0.0..=1.618).contains(&self.tau) {
            return Err(SolveError::InvalidConfig(format!("tau must lie in [0, 1.618], got {}", self.tau)));
        }
        if self.max_iters == 0 {
            return Err(SolveError::InvalidConfig("max_iters must be at least 1".into()));
        }
        if self.trace_every == 0 {
            return Err(SolveError::InvalidConfig("trace_every must be at least 1".into()));
        }
        if self.tol < 0.0 {
            return Err(SolveError::InvalidConfig("tol must be nonnegative".into()));
        }
        if self.threads == Some(0) {
            return Err(SolveError::InvalidConfig("threads must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("matrix handed to the PSD projection is not symmetric (max asymmetry {asymmetry:.3e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("eigensolver did not converge on a {dim}x{dim} matrix with Frobenius norm {norm:.3e}")]
    Eigen { dim: usize, norm: f64 },
    #[error("{mode} diverged at iteration {iteration} (max |x| = {magnitude:.3e})")]
    Divergence { iteration: usize, mode: Mode, magnitude: f64, history: Vec<TraceRow> },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("could not start worker threads: {0}")]
    ThreadPool(String),
}

/// Euclidean projection of a symmetric matrix onto the PSD cone.
pub fn project_psd(m: &DMatrix<f64>) -> Result<DMatrix<f64>, SolveError> {
    let asymmetry = (m - m.transpose()).amax();
    if asymmetry > SYMMETRY_TOLERANCE * m.amax().max(1.0) {
        return Err(SolveError::NotSymmetric { asymmetry });
    }
    let sym = (m + m.transpose()) * 0.5;
    let dim = sym.nrows();
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 100 * dim.max(10))
        .ok_or_else(|| SolveError::Eigen { dim, norm: m.norm() })?;
    Ok(psd_from_eigen(&eig))
}

fn psd_from_eigen(eig: &SymmetricEigen<f64, nalgebra::Dyn>) -> DMatrix<f64> {
    let dim = eig.eigenvalues.len();
    let keep: Vec<usize> = (0..dim).filter(|&i| eig.eigenvalues[i] > 0.0).collect();
    if keep.is_empty() {
        return DMatrix::zeros(dim, dim);
    }
    let mut u = DMatrix::zeros(dim, keep.len());
    for (c, &i) in keep.iter().enumerate() {
        let scale = eig.eigenvalues[i].sqrt();
        u.set_column(c, &(eig.eigenvectors.column(i) * scale));
    }
    let r = &u * u.transpose();
    (&r + r.transpose()) * 0.5
}

/// Dual and multiplier variables of one clique.
#[derive(Debug, Clone, PartialEq)]
pub struct CliqueState {
    pub x: DMatrix<f64>,
    pub s: DMatrix<f64>,
    pub y: DVector<f64>,
    /// Interior multiplier, stored as a `kn × kn` matrix.
    pub z: DMatrix<f64>,
    /// Border multipliers, column `u` belongs to slot `u`.
    pub w: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub cliques: Vec<CliqueState>,
    /// Column `i` is `g_i`.
    pub g: DMatrix<f64>,
    pub t: DVector<f64>,
    pub iter: usize,
}

impl SolverState {
    pub fn zeros(model: &SdpModel) -> Self {
        let lay = model.layout;
        let (n, k, d) = (lay.n, lay.k, lay.d());
        let clique = CliqueState {
            x: DMatrix::zeros(d, d),
            s: DMatrix::zeros(d, d),
            y: DVector::zeros(model.system.m_e()),
            z: DMatrix::zeros(k * n, k * n),
            w: DMatrix::zeros(n, k),
        };
        Self { cliques: vec![clique; model.num_cliques()], g: DMatrix::zeros(n, n), t: DVector::zeros(n), iter: 0 }
    }

    fn max_abs_x(&self) -> f64 {
        self.cliques.iter().map(|c| c.x.iter().fold(0.0f64, |m, v| if v.is_finite() { m.max(v.abs()) } else { f64::INFINITY })).fold(0.0, f64::max)
    }
}

/// `𝒜ᵀy` as a `d × d` matrix.
pub fn constraint_adjoint(model: &SdpModel, y: &DVector<f64>) -> DMatrix<f64> {
    let d = model.layout.d();
    let mut out = DMatrix::zeros(d, d);
    model.system.a.add_transpose_mul(y.as_slice(), 1.0, out.as_mut_slice());
    out
}

/// `𝒜x` for a `d × d` clique matrix.
pub fn constraint_apply(model: &SdpModel, x: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_vec(model.system.a.mul_vec(x.as_slice()))
}

/// `𝓓ᵀz`: the interior matrix embedded with a zero border.
pub fn interior_adjoint(lay: VariableLayout, z: &DMatrix<f64>) -> DMatrix<f64> {
    let d = lay.d();
    let mut out = DMatrix::zeros(d, d);
    out.view_mut((0, 0), (d - 1, d - 1)).copy_from(z);
    out
}

/// `𝓑_u m` for every slot `u`, as the columns of an `n × k` matrix.
pub fn border_sample(lay: VariableLayout, m: &DMatrix<f64>) -> DMatrix<f64> {
    let c = lay.corner();
    DMatrix::from_fn(lay.n, lay.k, |l, u| {
        let r = lay.offset(u) + l;
        0.5 * (m[(r, c)] + m[(c, r)])
    })
}

/// Adds `scale · Σ_u 𝓑_uᵀ w_u` to `out`.
pub fn add_border_adjoint(lay: VariableLayout, w: &DMatrix<f64>, scale: f64, out: &mut DMatrix<f64>) {
    let c = lay.corner();
    for u in 0..lay.k {
        for l in 0..lay.n {
            let r = lay.offset(u) + l;
            let v = 0.5 * scale * w[(l, u)];
            out[(r, c)] += v;
            out[(c, r)] += v;
        }
    }
}

/// `Σ_{slots of i} w` for every node, as the columns of an `n × n` matrix.
fn node_sums(model: &SdpModel, state: &SolverState) -> DMatrix<f64> {
    let n = model.layout.n;
    let mut sums = DMatrix::zeros(n, n);
    for (i, slots) in model.cover.slots.iter().enumerate() {
        let mut col = DVector::zeros(n);
        for slot in slots {
            col += state.cliques[slot.clique].w.column(slot.local);
        }
        sums.set_column(i, &col);
    }
    sums
}

/// Block 1: closed-form `t` and the PSD projection for every `s_r`.
pub fn update_block1(state: &mut SolverState, model: &SdpModel, cfg: &SolverConfig) -> Result<(), SolveError> {
    let lay = model.layout;
    let n = lay.n;
    let rho = cfg.rho;
    let sums = node_sums(model, state);
    let mut t = DVector::zeros(n);
    for i in 0..n {
        t += sums.column(i) - state.g.column(i) / rho;
    }
    t /= n as f64;
    t.add_scalar_mut(1.0 / (n as f64 * rho));
    state.t = t;

    state
        .cliques
        .par_iter_mut()
        .zip(model.solver_costs.par_iter())
        .try_for_each(|(cl, c)| -> Result<(), SolveError> {
            let mut m = c - interior_adjoint(lay, &cl.z) - constraint_adjoint(model, &cl.y) - &cl.x / rho;
            add_border_adjoint(lay, &cl.w, -1.0, &mut m);
            cl.s = project_psd(&m)?;
            Ok(())
        })
}

/// Block 2: the least-squares `y_r` through the cached Cholesky factor.
pub fn update_y(state: &mut SolverState, model: &SdpModel, cfg: &SolverConfig) {
    let lay = model.layout;
    let rho = cfg.rho;
    let b = &model.system.b;
    state.cliques.par_iter_mut().zip(model.solver_costs.par_iter()).for_each(|(cl, c)| {
        let mut m = c - &cl.s - interior_adjoint(lay, &cl.z) - &cl.x / rho;
        add_border_adjoint(lay, &cl.w, -1.0, &mut m);
        let rhs = constraint_apply(model, &m) + b / rho;
        cl.y = model.system.chol_aat.solve(&rhs);
    });
}

/// Block 3: `z_r` by projection onto the nonnegative orthant, then the
/// border multipliers node by node through `H`.
pub fn update_block3(state: &mut SolverState, model: &SdpModel, cfg: &SolverConfig) {
    let lay = model.layout;
    let (n, k) = (lay.n, lay.k);
    let rho = cfg.rho;
    let samples: Vec<DMatrix<f64>> = state
        .cliques
        .par_iter_mut()
        .zip(model.solver_costs.par_iter())
        .map(|(cl, c)| {
            let v = constraint_adjoint(model, &cl.y) + &cl.s + &cl.x / rho - c;
            cl.z = v.view((0, 0), (k * n, k * n)).map(|e| (-e).max(0.0));
            border_sample(lay, &v)
        })
        .collect();

    let t = &state.t;
    let g = &state.g;
    let updates: Vec<Vec<DVector<f64>>> = model
        .cover
        .slots
        .par_iter()
        .enumerate()
        .map(|(i, slots)| {
            let h = &model.system.h[&slots.len()];
            let shift = t + g.column(i) / rho;
            let dev: Vec<DVector<f64>> =
                slots.iter().map(|sl| samples[sl.clique].column(sl.local) - &shift).collect();
            (0..slots.len())
                .map(|a| {
                    let mut w = DVector::zeros(n);
                    for (b, db) in dev.iter().enumerate() {
                        w -= db * h[(a, b)];
                    }
                    w
                })
                .collect()
        })
        .collect();
    for (slots, ws) in model.cover.slots.iter().zip(updates) {
        for (sl, w) in slots.iter().zip(ws) {
            state.cliques[sl.clique].w.set_column(sl.local, &w);
        }
    }
}

/// Dual-constraint residual `−ĉ + s + 𝓓ᵀz + 𝒜ᵀy + Σ𝓑ᵀw` of one clique.
fn dual_residual(model: &SdpModel, cl: &CliqueState, c: &DMatrix<f64>) -> DMatrix<f64> {
    let lay = model.layout;
    let mut r = &cl.s - c + interior_adjoint(lay, &cl.z) + constraint_adjoint(model, &cl.y);
    add_border_adjoint(lay, &cl.w, 1.0, &mut r);
    r
}

/// Multiplier ascent on `x` and `g` with step `τρ`.
pub fn update_multipliers(state: &mut SolverState, model: &SdpModel, cfg: &SolverConfig) {
    let step = cfg.tau * cfg.rho;
    state.cliques.par_iter_mut().zip(model.solver_costs.par_iter()).for_each(|(cl, c)| {
        let r = dual_residual(model, cl, c);
        cl.x += r * step;
    });
    let sums = node_sums(model, state);
    for i in 0..model.layout.n {
        let delta = (&state.t - sums.column(i)) * step;
        let mut col = state.g.column_mut(i);
        col += delta;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ResidualReport {
    pub eta_p: f64,
    pub eta_d: f64,
    pub eta_k: f64,
    pub eta_kstar: f64,
    pub eta_pcone: f64,
    pub eta_pstar: f64,
    pub eta_c1: f64,
    pub eta_c2: f64,
    pub eta_max: f64,
    /// `Σ_r ⟨C_r, x_r⟩` in the instance's native sense.
    pub primal_obj: f64,
    /// `Σ_r b_eᵀy_r + 1ᵀt`, mapped to the native sense.
    pub dual_obj: f64,
}

/// One row of the convergence trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    #[serde(rename = "eta_P")]
    pub eta_p: f64,
    #[serde(rename = "eta_D")]
    pub eta_d: f64,
    #[serde(rename = "eta_K")]
    pub eta_k: f64,
    #[serde(rename = "eta_Kstar")]
    pub eta_kstar: f64,
    #[serde(rename = "eta_Pcone")]
    pub eta_pcone: f64,
    #[serde(rename = "eta_Pstar")]
    pub eta_pstar: f64,
    #[serde(rename = "eta_C1")]
    pub eta_c1: f64,
    #[serde(rename = "eta_C2")]
    pub eta_c2: f64,
    pub eta_max: f64,
    pub primal_obj: f64,
    pub dual_obj: f64,
    pub seconds: f64,
}

impl TraceRow {
    fn new(iter: usize, r: &ResidualReport, seconds: f64) -> Self {
        Self {
            iter,
            eta_p: r.eta_p,
            eta_d: r.eta_d,
            eta_k: r.eta_k,
            eta_kstar: r.eta_kstar,
            eta_pcone: r.eta_pcone,
            eta_pstar: r.eta_pstar,
            eta_c1: r.eta_c1,
            eta_c2: r.eta_c2,
            eta_max: r.eta_max,
            primal_obj: r.primal_obj,
            dual_obj: r.dual_obj,
            seconds,
        }
    }
}

/// Writes trace rows as CSV with the standard header.
pub fn write_trace_csv<W: Write>(rows: &[TraceRow], out: W) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(out);
    if rows.is_empty() {
        wtr.write_record([
            "iter", "eta_P", "eta_D", "eta_K", "eta_Kstar", "eta_Pcone", "eta_Pstar", "eta_C1", "eta_C2", "eta_max",
            "primal_obj", "dual_obj", "seconds",
        ])?;
    }
    for row in rows {
        wtr.serialize(row)?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Default)]
struct Partial {
    ax_b: f64,
    dual: f64,
    x_sq: f64,
    s_sq: f64,
    z_sq: f64,
    negx_sq: f64,
    negs_sq: f64,
    dx_neg_sq: f64,
    z_neg_sq: f64,
    xs: f64,
    xz: f64,
    primal: f64,
    by: f64,
}

/// Normalized primal, dual, cone and complementarity residuals.
pub fn residuals(state: &SolverState, model: &SdpModel) -> Result<ResidualReport, SolveError> {
    let lay = model.layout;
    let b = &model.system.b;
    let m = lay.interior();
    let parts: Vec<Partial> = state
        .cliques
        .par_iter()
        .zip(model.solver_costs.par_iter())
        .map(|(cl, c)| -> Result<Partial, SolveError> {
            let ax = constraint_apply(model, &cl.x) - b;
            let dual = dual_residual(model, cl, c);
            let negx = project_psd(&(-&cl.x))?;
            let negs = project_psd(&(-&cl.s))?;
            let dx = cl.x.view((0, 0), (m, m));
            Ok(Partial {
                ax_b: ax.norm_squared(),
                dual: dual.norm_squared(),
                x_sq: cl.x.norm_squared(),
                s_sq: cl.s.norm_squared(),
                z_sq: cl.z.norm_squared(),
                negx_sq: negx.norm_squared(),
                negs_sq: negs.norm_squared(),
                dx_neg_sq: dx.iter().map(|v| v.min(0.0).powi(2)).sum(),
                z_neg_sq: cl.z.iter().map(|v| v.min(0.0).powi(2)).sum(),
                xs: cl.x.dot(&cl.s),
                xz: dx.dot(&cl.z),
                primal: c.dot(&cl.x),
                by: b.dot(&cl.y),
            })
        })
        .collect::<Result<_, _>>()?;
    let mut tot = Partial::default();
    for p in &parts {
        tot.ax_b += p.ax_b;
        tot.dual += p.dual;
        tot.x_sq += p.x_sq;
        tot.s_sq += p.s_sq;
        tot.z_sq += p.z_sq;
        tot.negx_sq += p.negx_sq;
        tot.negs_sq += p.negs_sq;
        tot.dx_neg_sq += p.dx_neg_sq;
        tot.z_neg_sq += p.z_neg_sq;
        tot.xs += p.xs;
        tot.xz += p.xz;
        tot.primal += p.primal;
        tot.by += p.by;
    }
    let denom = 1.0 + (lay.n as f64).sqrt() * b.norm();
    let (xf, sf, zf) = (tot.x_sq.sqrt(), tot.s_sq.sqrt(), tot.z_sq.sqrt());
    let mut r = ResidualReport {
        eta_p: tot.ax_b.sqrt() / denom,
        eta_d: tot.dual.sqrt() / denom,
        eta_k: tot.negx_sq.sqrt() / (1.0 + xf),
        eta_kstar: tot.negs_sq.sqrt() / (1.0 + sf),
        eta_pcone: tot.dx_neg_sq.sqrt() / (1.0 + xf),
        eta_pstar: tot.z_neg_sq.sqrt() / (1.0 + zf),
        eta_c1: tot.xs.abs() / (1.0 + xf + sf),
        eta_c2: tot.xz.abs() / (1.0 + xf + zf),
        eta_max: 0.0,
        primal_obj: model.to_native(tot.primal),
        dual_obj: model.to_native(tot.by + state.t.sum()),
    };
    r.eta_max = [r.eta_p, r.eta_d, r.eta_k, r.eta_kstar, r.eta_pcone, r.eta_pstar, r.eta_c1, r.eta_c2]
        .into_iter()
        .fold(0.0, f64::max);
    Ok(r)
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub state: SolverState,
    pub history: Vec<TraceRow>,
    pub report: ResidualReport,
    pub iterations: usize,
    pub seconds: f64,
    pub threads: usize,
    /// `rho` in effect at the end of the run.
    pub final_rho: f64,
}

impl SolveResult {
    pub fn primal_obj(&self) -> f64 {
        self.report.primal_obj
    }

    pub fn dual_obj(&self) -> f64 {
        self.report.dual_obj
    }
}

/// Resolves the worker count: explicit value, else `QAPSDP_THREADS`, else
/// the hardware default.
pub fn resolve_threads(explicit: Option<usize>) -> usize {
    explicit
        .or_else(|| std::env::var("QAPSDP_THREADS").ok().and_then(|v| v.trim().parse().ok()).filter(|&t| t > 0))
        .unwrap_or_else(|| std::thread::available_parallelism().map(|p| p.get()).unwrap_or(1))
}

/// Runs the configured ADMM variant from the all-zero state.
pub fn solve(model: &SdpModel, cfg: &SolverConfig) -> Result<SolveResult, SolveError> {
    solve_from(model, cfg, SolverState::zeros(model))
}

/// Runs the configured ADMM variant from a given state.
pub fn solve_from(model: &SdpModel, cfg: &SolverConfig, state: SolverState) -> Result<SolveResult, SolveError> {
    cfg.validate()?;
    let threads = resolve_threads(cfg.threads);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| SolveError::ThreadPool(e.to_string()))?;
    pool.install(|| run(model, cfg, state, threads))
}

/// One full iteration in the configured block order.
pub fn iterate(state: &mut SolverState, model: &SdpModel, cfg: &SolverConfig) -> Result<(), SolveError> {
    match cfg.mode {
        Mode::Conic3c => {
            update_block1(state, model, cfg)?;
            update_y(state, model, cfg);
            update_block3(state, model, cfg);
            update_y(state, model, cfg);
        }
        Mode::Direct123 => {
            update_block1(state, model, cfg)?;
            update_y(state, model, cfg);
            update_block3(state, model, cfg);
        }
        Mode::Direct132 => {
            update_block1(state, model, cfg)?;
            update_block3(state, model, cfg);
            update_y(state, model, cfg);
        }
    }
    update_multipliers(state, model, cfg);
    state.iter += 1;
    Ok(())
}

/// Iterations between `rho` rebalancing checks.
pub const ADAPT_EVERY: usize = 50;
/// Imbalance between primal and dual infeasibility that triggers a change.
pub const ADAPT_RATIO: f64 = 3.0;
pub const ADAPT_FACTOR: f64 = 2.0;

/// New `rho` after comparing primal infeasibility and complementarity
/// (`η_P`, `η_K`, `η_Pcone`, `η_C1`, `η_C2`) against dual infeasibility
/// (`η_D`, `η_K*`, `η_P*`).
pub fn rebalanced_rho(rho: f64, r: &ResidualReport) -> f64 {
    let primal = r.eta_p.max(r.eta_k).max(r.eta_pcone).max(r.eta_c1).max(r.eta_c2);
    let dual = r.eta_d.max(r.eta_kstar).max(r.eta_pstar);
    if primal > ADAPT_RATIO * dual {
        rho / ADAPT_FACTOR
    } else if dual > ADAPT_RATIO * primal {
        rho * ADAPT_FACTOR
    } else {
        rho
    }
}

fn run(model: &SdpModel, cfg: &SolverConfig, mut state: SolverState, threads: usize) -> Result<SolveResult, SolveError> {
    let start = Instant::now();
    let mut history = Vec::new();
    let mut report = None;
    let first = state.iter;
    let mut cur = cfg.clone();
    for _ in 0..cfg.max_iters {
        iterate(&mut state, model, &cur)?;
        let magnitude = state.max_abs_x();
        if !(magnitude <= DIVERGENCE_LIMIT) {
            return Err(SolveError::Divergence { iteration: state.iter, mode: cfg.mode, magnitude, history });
        }
        let done = state.iter - first == cfg.max_iters;
        if state.iter % cfg.trace_every == 0 || done {
            let r = residuals(&state, model)?;
            history.push(TraceRow::new(state.iter, &r, start.elapsed().as_secs_f64()));
            report = Some(r);
            if cfg.tol > 0.0 && r.eta_max <= cfg.tol {
                break;
            }
        } else {
            report = None;
        }
        let elapsed = state.iter - first;
        if cfg.adaptive_rho && elapsed % ADAPT_EVERY == 0 && 2 * elapsed <= cfg.max_iters {
            let r = match report {
                Some(r) => r,
                None => residuals(&state, model)?,
            };
            cur.rho = rebalanced_rho(cur.rho, &r);
        }
    }
    let report = match report {
        Some(r) => r,
        None => residuals(&state, model)?,
    };
    Ok(SolveResult {
        iterations: state.iter - first,
        state,
        history,
        report,
        seconds: start.elapsed().as_secs_f64(),
        threads,
        final_rho: cur.rho,
    })
}
