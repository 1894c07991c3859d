//! Instance → relaxation → ADMM → rounded permutation, with gap reporting.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::admm::{solve, Mode, ResidualReport, SolveResult, SolverConfig};
use crate::cliquegraph::CoverStrategy;
use crate::instances::{Permutation, ProblemInstance};
use crate::rounding::{assemble_doubly_stochastic, project_to_permutation, RoundedSolution};
use crate::sdpmodel::SdpModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOptions {
    pub k: usize,
    pub cover: CoverStrategy,
    pub solver: SolverConfig,
    /// Divide the costs by this factor before solving; `None` uses
    /// [`default_cost_scale`].
    pub cost_scale: Option<f64>,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self { k: 2, cover: CoverStrategy::Greedy, solver: SolverConfig::default(), cost_scale: None }
    }
}

/// Results of one solve, in the instance's native orientation and sense.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub instance: String,
    pub n: usize,
    pub k: usize,
    pub mode: Mode,
    pub cover: CoverStrategy,
    pub iters: usize,
    pub rho: f64,
    /// `rho` at the end of the run (differs from `rho` under adaptation).
    pub rho_final: f64,
    pub tau: f64,
    pub threads: usize,
    pub cliques: usize,
    pub m_e: usize,
    pub alpha: f64,
    pub beta: f64,
    /// `true` when `A` and `B` were exchanged so the sparser one drives the cover.
    pub swapped: bool,
    pub cost_scale: f64,
    pub eta: ResidualReport,
    pub bound: f64,
    pub dual_bound: f64,
    pub rounded: f64,
    pub optimum: Option<f64>,
    pub gap_bound_pct: Option<f64>,
    pub gap_rounded_pct: Option<f64>,
    pub sigma: Vec<usize>,
    pub row_sum_deviation: f64,
    pub col_sum_deviation: f64,
    /// Run-dependent values kept apart so reruns compare equal elsewhere.
    pub meta: RunMeta,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub seconds: f64,
}

/// Random permutations drawn by [`objective_spread`].
pub const SPREAD_SAMPLES: usize = 256;
const SPREAD_SEED: u64 = 0x5eed;

/// Standard deviation of the objective over seeded uniformly random
/// permutations.
pub fn objective_spread(inst: &ProblemInstance) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(SPREAD_SEED);
    let mut order: Vec<usize> = (0..inst.n()).collect();
    let values: Vec<f64> = (0..SPREAD_SAMPLES)
        .map(|_| {
            order.shuffle(&mut rng);
            inst.objective(&Permutation::new(order.clone()).expect("shuffle is a bijection"))
        })
        .collect();
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64).sqrt()
}

/// Objective spread, falling back to the largest centered cost entry (or 1)
/// when every sampled permutation scores the same.
pub fn default_cost_scale(inst: &ProblemInstance, model: &SdpModel) -> f64 {
    [objective_spread(inst), model.cost_magnitude(), 1.0].into_iter().find(|v| *v > 0.0 && v.is_finite()).unwrap_or(1.0)
}

pub fn run_pipeline(inst: &ProblemInstance, opts: &PipelineOptions) -> Result<(RunReport, SolveResult), crate::Error> {
    let (oriented, swapped) = inst.oriented();
    let mut model = SdpModel::build(&oriented, opts.k, opts.cover)?;
    let scale = opts.cost_scale.unwrap_or_else(|| default_cost_scale(inst, &model));
    model.set_cost_scale(scale);
    let result = solve(&model, &opts.solver)?;
    let p = assemble_doubly_stochastic(&result.state, &model);
    let sigma_oriented = project_to_permutation(&p);
    let sigma = if swapped { sigma_oriented.inverse() } else { sigma_oriented };
    let rounded = inst.objective(&sigma);
    let bound = result.report.primal_obj;
    let sol = RoundedSolution::new(p, &sigma, rounded, bound, inst.known_optimum);
    let report = RunReport {
        instance: inst.name.clone(),
        n: inst.n(),
        k: opts.k,
        mode: opts.solver.mode,
        cover: opts.cover,
        iters: result.iterations,
        rho: opts.solver.rho,
        rho_final: result.final_rho,
        tau: opts.solver.tau,
        threads: result.threads,
        cliques: model.num_cliques(),
        m_e: model.system.m_e(),
        alpha: model.system.alpha,
        beta: model.system.beta,
        swapped,
        cost_scale: model.cost_scale,
        eta: result.report,
        bound,
        dual_bound: result.report.dual_obj,
        rounded,
        optimum: inst.known_optimum,
        gap_bound_pct: sol.gap_bound_pct,
        gap_rounded_pct: sol.gap_rounded_pct,
        sigma: sol.sigma.clone(),
        row_sum_deviation: sol.row_sum_deviation,
        col_sum_deviation: sol.col_sum_deviation,
        meta: RunMeta { seconds: result.seconds },
    };
    Ok((report, result))
}
