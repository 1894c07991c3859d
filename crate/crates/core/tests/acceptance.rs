//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary so the verdicts always reach the test log. A
//! criterion whose inputs are not shipped with the repository, or whose wall
//! clock budget assumes more cores than the host has, is reported as FAIL
//! with the reason and does not change the exit status; every other FAIL
//! does.

mod common;

use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use qapsdp_core::admm::write_trace_csv;
use qapsdp_core::sdpmodel::{build_constraints, build_samplers, h_matrix, ConstraintSystem};
use qapsdp_core::{
    assign, brute_force_qap, parse_qaplib, parse_tsplib, run_pipeline, simulate, tsp_to_qap, AssignOptions, CoverStrategy,
    Mode, NoiseSigma, OptimumRegistry, Permutation, PipelineOptions, ProblemInstance, SdpModel, Sense, ShiftStats,
    SolverConfig,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Pinned tolerances and budgets.
mod pinned {
    pub const OBJECTIVE_REL: f64 = 1e-9;
    pub const H_ABS: f64 = 1e-10;
    pub const UPDATE_ABS: f64 = 1e-8;
    pub const BOUND_ETA: f64 = 1e-5;
    pub const BOUND_REL: f64 = 1e-3;
    pub const BOUND_MAX_ITERS: usize = 1_000_000;
    pub const DESK_ITERS: usize = 1000;
    pub const CHR12A_BOUND_REF: f64 = 0.6;
    pub const CHR12A_BOUND_BAND: f64 = 3.0;
    pub const CHR12A_ROUNDED_MAX: f64 = 10.0;
    pub const CHR15C_MAX: f64 = 2.0;
    pub const GR21_BOUND_REF: f64 = 4.0;
    pub const GR21_BOUND_BAND: f64 = 5.0;
    pub const DIVERGENCE_ITERS: usize = 2000;
    pub const DIVERGENCE_ETA: f64 = 1e-1;
    pub const NMR_FLOOR: f64 = 85.0;
    pub const NMR_SEEDS: u64 = 10;
    pub const NMR_SIGMA: (f64, f64) = (0.08, 0.16);
    pub const C1_SECONDS: f64 = 10.0;
    pub const C2_SECONDS: f64 = 5.0;
    pub const C3_SECONDS: f64 = 30.0;
    pub const C4_SECONDS: f64 = 600.0;
    pub const C5_SECONDS: f64 = 900.0;
    pub const C6_SECONDS: f64 = 1800.0;
    pub const C7_SECONDS: f64 = 1200.0;
    /// Core count the runtime budgets were stated for.
    pub const BUDGET_THREADS: usize = 8;
}

/// First 60 residues of ubiquitin.
const UBIQUITIN_60: &str = "MQIFVKTLTGKTITLEVEPSDTIENVKAKIQDKEGIPPDQQRLIFAGKQLEDGRTLSDYN";
/// Twenty residues without prolines, whose tokens create interchangeable segments.
const ZERO_NOISE_CHAIN: &str = "ACDEFGHIKLMNQRSTVWYA";

enum Verdict {
    Pass(String),
    Fail(String),
    /// Not attainable in this environment.
    Unattainable(String),
}

struct Log {
    hard_failures: usize,
    unattainable: usize,
    passed: usize,
}

impl Log {
    fn record(&mut self, id: usize, title: &str, v: Verdict) {
        match v {
            Verdict::Pass(d) => {
                self.passed += 1;
                println!("criterion {id} PASS  {title}: {d}");
            }
            Verdict::Fail(d) => {
                self.hard_failures += 1;
                println!("criterion {id} FAIL  {title}: {d}");
            }
            Verdict::Unattainable(d) => {
                self.unattainable += 1;
                println!("criterion {id} FAIL  {title}: unattainable here: {d}");
            }
        }
    }
}

fn info(msg: &str) {
    println!("            {msg}");
}

fn data(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(rel)
}

fn host_threads() -> usize {
    std::thread::available_parallelism().map(|p| p.get()).unwrap_or(1)
}

/// Verdict for a correctness outcome with a wall-clock budget attached.
fn timed(ok: bool, detail: String, seconds: f64, budget: f64) -> Verdict {
    let detail = format!("{detail}; {seconds:.1} s (budget {budget:.0} s)");
    if !ok {
        Verdict::Fail(detail)
    } else if seconds <= budget {
        Verdict::Pass(detail)
    } else if host_threads() < pinned::BUDGET_THREADS {
        Verdict::Unattainable(format!("{detail} on {} core(s)", host_threads()))
    } else {
        Verdict::Fail(detail)
    }
}

/// Positive weights, so the optimum is nonzero and the relative tolerance is meaningful.
fn random_sparse_instance(rng: &mut ChaCha8Rng, n: usize, symmetric_a: bool, sense: Sense) -> ProblemInstance {
    let mut a = DMatrix::from_fn(n, n, |_, _| rng.random_range(1..10) as f64);
    if symmetric_a {
        a = &a + a.transpose();
    }
    let mut b = DMatrix::zeros(n, n);
    for i in 0..n - 1 {
        b[(i, i + 1)] = rng.random_range(1..4) as f64;
    }
    for _ in 0..n / 3 {
        let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
        if i != j {
            b[(i, j)] += 1.0;
        }
    }
    ProblemInstance::new("random", a, &b, sense).unwrap()
}

fn random_permutation(rng: &mut ChaCha8Rng, n: usize) -> Permutation {
    let mut v: Vec<usize> = (0..n).collect();
    v.shuffle(rng);
    Permutation::new(v).unwrap()
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut worst_eq, mut worst_rel) = (0.0f64, 0.0f64);
    for inst_id in 0..10 {
        let n = rng.random_range(4..=10);
        let k = 2 + inst_id % 2;
        let inst = random_sparse_instance(&mut rng, n, inst_id % 2 == 0, Sense::Minimize);
        let model = SdpModel::build(&inst, k, CoverStrategy::Greedy).unwrap();
        let b_dense = inst.b.to_dense();
        for _ in 0..5 {
            let sigma = random_permutation(&mut rng, n);
            let xs = model.lift(&sigma);
            for x in &xs {
                let ax = DVector::from_vec(model.system.a.mul_vec(x.as_slice()));
                worst_eq = worst_eq.max((ax - &model.system.b).amax());
            }
            let lifted: f64 = model.costs.iter().zip(&xs).map(|(c, x)| (c * x).trace()).sum();
            let p = sigma.to_matrix();
            // Facilities index A and nodes index B, so A enters transposed.
            let direct = (inst.a.transpose() * &p * &b_dense * p.transpose()).trace();
            worst_rel = worst_rel.max((lifted - direct).abs() / direct.abs().max(1.0));
        }
    }
    let ok = worst_eq == 0.0 && worst_rel <= pinned::OBJECTIVE_REL;
    timed(ok, format!("50 lifts, max |A x - b| = {worst_eq:e}, max relative objective error = {worst_rel:.2e}"), start.elapsed().as_secs_f64(), pinned::C1_SECONDS)
}

fn criterion_2() -> Verdict {
    let start = Instant::now();
    let mut problems = Vec::new();
    for (n, k) in [(3, 2), (5, 2), (6, 3), (8, 3), (7, 4)] {
        let (samplers, interior) = build_samplers(n, k);
        let mut ops = samplers.clone();
        ops.push(interior);
        for p in 0..ops.len() {
            for q in 0..ops.len() {
                if p != q && ops[p].mul_transpose_dense(&ops[q]).amax() != 0.0 {
                    problems.push(format!("n={n} k={k}: operators {p} and {q} overlap"));
                }
            }
        }
        let (a, _) = build_constraints(n, k);
        let m_e = k * (n + 2) + k * (k - 1) + 1;
        let rank = a.to_dense().svd(false, false).rank(1e-9);
        if a.nrows() != m_e || rank != m_e {
            problems.push(format!("n={n} k={k}: {} rows, rank {rank}, expected {m_e}", a.nrows()));
        }
    }
    // H against the numeric inverse of the Gram block of one node seen from m cliques.
    let n = 4;
    let (samplers, _) = build_samplers(n, 2);
    let bt = samplers[0].to_dense().transpose();
    let sys = ConstraintSystem::precompute(n, 2, 1..=6).unwrap();
    let mut worst = 0.0f64;
    for m in 1..=6 {
        let (rows, cols) = (bt.nrows(), bt.ncols());
        let mut stacked = DMatrix::zeros(m * rows + n, m * cols);
        for s in 0..m {
            stacked.view_mut((s * rows, s * cols), (rows, cols)).copy_from(&bt);
            stacked.view_mut((m * rows, s * cols), (n, n)).copy_from(&DMatrix::identity(n, n));
        }
        let numeric = (stacked.transpose() * &stacked).try_inverse().unwrap();
        let closed = h_matrix(m, sys.alpha, sys.beta).kronecker(&DMatrix::<f64>::identity(n, n));
        worst = worst.max((numeric - closed).amax());
    }
    if worst > pinned::H_ABS {
        problems.push(format!("H deviates by {worst:e}"));
    }
    let detail = if problems.is_empty() { format!("samplers orthogonal, A Aᵀ full rank with m_E rows, H error {worst:.1e}") } else { problems.join("; ") };
    timed(problems.is_empty(), detail, start.elapsed().as_secs_f64(), pinned::C2_SECONDS)
}

fn criterion_3() -> Verdict {
    let start = Instant::now();
    let dev = common::update_deviations();
    let ok = dev.iter().all(|d| *d <= pinned::UPDATE_ABS);
    let detail = format!("max deviation t {:.1e}, s {:.1e}, y {:.1e}, (z, w) {:.1e}", dev[0], dev[1], dev[2], dev[3]);
    timed(ok, detail, start.elapsed().as_secs_f64(), pinned::C3_SECONDS)
}

fn criterion_4() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut problems = Vec::new();
    let mut worst_eta = 0.0f64;
    for id in 0..20 {
        let n = 4 + id % 5;
        let sense = if id % 4 == 3 { Sense::Maximize } else { Sense::Minimize };
        let inst = random_sparse_instance(&mut rng, n, id % 2 == 0, sense);
        let (_, opt) = brute_force_qap(&inst).unwrap();
        let k = if n >= 6 && id % 3 == 0 { 3 } else { 2 };
        let opts = PipelineOptions {
            k,
            solver: SolverConfig { max_iters: pinned::BOUND_MAX_ITERS, tol: pinned::BOUND_ETA, trace_every: 50, threads: Some(1), ..SolverConfig::default() },
            ..PipelineOptions::default()
        };
        let (r, _) = run_pipeline(&inst, &opts).unwrap();
        worst_eta = worst_eta.max(r.eta.eta_max);
        let slack = pinned::BOUND_REL * opt.abs();
        let (bound_ok, rounded_ok) = match sense {
            Sense::Minimize => (r.bound <= opt + slack, r.rounded >= opt),
            Sense::Maximize => (r.bound >= opt - slack, r.rounded <= opt),
        };
        if r.eta.eta_max > pinned::BOUND_ETA {
            problems.push(format!("#{id} (n={n}, k={k}) stalled at eta {:.1e} after {} iterations", r.eta.eta_max, r.iters));
        }
        if !bound_ok || !rounded_ok {
            problems.push(format!("#{id} (n={n}, k={k}, {sense:?}): opt {opt}, bound {:.4}, rounded {}", r.bound, r.rounded));
        }
    }
    let detail = if problems.is_empty() { format!("20 instances, max final eta {worst_eta:.1e}") } else { problems.join("; ") };
    timed(problems.is_empty(), detail, start.elapsed().as_secs_f64(), pinned::C4_SECONDS)
}

fn load(path: &Path, registry: &OptimumRegistry) -> Option<ProblemInstance> {
    let text = std::fs::read_to_string(path).ok()?;
    let name = path.file_stem()?.to_str()?.to_string();
    let mut inst =
        if path.extension()? == "tsp" { tsp_to_qap(&parse_tsplib(&text).unwrap()) } else { parse_qaplib(&text).unwrap() };
    inst.known_optimum = registry.optimum(&name);
    inst.name = name;
    Some(inst)
}

fn desk(k: usize, threads: Option<usize>) -> PipelineOptions {
    PipelineOptions { k, solver: SolverConfig { max_iters: pinned::DESK_ITERS, threads, ..SolverConfig::default() }, ..PipelineOptions::default() }
}

fn criterion_5(reg: &OptimumRegistry) -> Verdict {
    let cases = [("qaplib/chr12a.dat", 4), ("qaplib/chr15c.dat", 3), ("tsplib/gr21.tsp", 3)];
    let missing: Vec<&str> = cases.iter().filter(|(p, _)| !data(&format!("instances/{p}")).exists()).map(|(p, _)| *p).collect();
    // Supplementary runs on the instances that do ship with the repository.
    for (path, k) in [("qaplib/chr12c.dat", 4), ("tsplib/gr17.tsp", 3)] {
        let inst = load(&data(&format!("instances/{path}")), reg).unwrap();
        let start = Instant::now();
        let (r, _) = run_pipeline(&inst, &desk(k, None)).unwrap();
        let e = reg.get(&inst.name).unwrap();
        info(&format!(
            "supplementary {} k={k}: bound gap {:.2}% (reference {:.1}), rounded gap {:.2}% (reference {:.1}), {:.1} s",
            inst.name,
            r.gap_bound_pct.unwrap(),
            e.reference_bound_gap(k).unwrap(),
            r.gap_rounded_pct.unwrap(),
            e.reference_rounded_gap(k).unwrap(),
            start.elapsed().as_secs_f64()
        ));
    }
    if !missing.is_empty() {
        return Verdict::Unattainable(format!("instance files not shipped: {}", missing.join(", ")));
    }
    let mut problems = Vec::new();
    let mut details = Vec::new();
    let mut slowest = 0.0f64;
    for (path, k) in cases {
        let inst = load(&data(&format!("instances/{path}")), reg).unwrap();
        let start = Instant::now();
        let (r, _) = run_pipeline(&inst, &desk(k, Some(pinned::BUDGET_THREADS))).unwrap();
        slowest = slowest.max(start.elapsed().as_secs_f64());
        let (gb, gr) = (r.gap_bound_pct.unwrap(), r.gap_rounded_pct.unwrap());
        details.push(format!("{} bound {gb:.2}% rounded {gr:.2}%", inst.name));
        let ok = match inst.name.as_str() {
            "chr12a" => (gb - pinned::CHR12A_BOUND_REF).abs() <= pinned::CHR12A_BOUND_BAND && gr <= pinned::CHR12A_ROUNDED_MAX,
            "chr15c" => gb <= pinned::CHR15C_MAX && gr <= pinned::CHR15C_MAX,
            _ => (gb - pinned::GR21_BOUND_REF).abs() <= pinned::GR21_BOUND_BAND,
        };
        if !ok {
            problems.push(inst.name.clone());
        }
    }
    timed(problems.is_empty(), details.join(", "), slowest, pinned::C5_SECONDS)
}

/// Final η and whether η ever reached the threshold, from a trace.
fn eta_summary(history: &[qapsdp_core::admm::TraceRow]) -> (f64, bool) {
    let last = history.last().map(|r| r.eta_max).unwrap_or(f64::INFINITY);
    (last, history.iter().any(|r| r.eta_max <= pinned::DIVERGENCE_ETA))
}

fn divergence_pair(inst: &ProblemInstance) -> ((f64, bool), (f64, bool), f64) {
    let start = Instant::now();
    let run = |mode| {
        let opts = PipelineOptions {
            k: 3,
            cost_scale: Some(1.0),
            solver: SolverConfig { max_iters: pinned::DIVERGENCE_ITERS, mode, adaptive_rho: false, trace_every: 10, ..SolverConfig::default() },
            ..PipelineOptions::default()
        };
        match run_pipeline(inst, &opts) {
            Ok((_, res)) => eta_summary(&res.history),
            Err(qapsdp_core::Error::Solve(qapsdp_core::SolveError::Divergence { .. })) => (f64::INFINITY, false),
            Err(e) => panic!("{e}"),
        }
    };
    let conic = run(Mode::Conic3c);
    let direct = run(Mode::Direct123);
    (conic, direct, start.elapsed().as_secs_f64())
}

fn criterion_6(reg: &OptimumRegistry) -> Verdict {
    let gr17 = load(&data("instances/tsplib/gr17.tsp"), reg).unwrap();
    let (c, d, secs) = divergence_pair(&gr17);
    info(&format!(
        "supplementary gr17 k=3, unscaled costs, rho fixed at 1: conic3c final eta {:.3e}, direct123 final eta {:.3e} (reached {}: {}), {secs:.1} s",
        c.0, d.0, pinned::DIVERGENCE_ETA, d.1
    ));
    let Some(gr21) = load(&data("instances/tsplib/gr21.tsp"), reg) else {
        return Verdict::Unattainable("instance file not shipped: tsplib/gr21.tsp".into());
    };
    let (c, d, secs) = divergence_pair(&gr21);
    let ok = c.0 < d.0 && !d.1;
    timed(ok, format!("conic3c final eta {:.3e}, direct123 final eta {:.3e}, direct123 reached {}: {}", c.0, d.0, pinned::DIVERGENCE_ETA, d.1), secs, pinned::C6_SECONDS)
}

fn criterion_7() -> Verdict {
    let start = Instant::now();
    let stats = ShiftStats::from_path(&data("nmr/shift_stats.csv")).unwrap();
    let opts = AssignOptions { pipeline: desk(2, None), ..AssignOptions::default() };
    let exact = simulate(ZERO_NOISE_CHAIN, &stats, NoiseSigma::new(0.0, 0.0).unwrap(), 0).unwrap();
    let r = assign(&exact, &stats, &opts).unwrap();
    let mut problems = Vec::new();
    if r.score.precision != 100.0 || r.score.recall != 100.0 {
        problems.push(format!("zero noise: precision {:.1}, recall {:.1}", r.score.precision, r.score.recall));
    }
    let sigma = NoiseSigma::new(pinned::NMR_SIGMA.0, pinned::NMR_SIGMA.1).unwrap();
    let mut precisions = Vec::new();
    for seed in 0..pinned::NMR_SEEDS {
        let set = simulate(UBIQUITIN_60, &stats, sigma, seed).unwrap();
        let r = assign(&set, &stats, &opts).unwrap();
        precisions.push(r.score.precision);
    }
    let mean = precisions.iter().sum::<f64>() / precisions.len() as f64;
    if mean < pinned::NMR_FLOOR {
        problems.push(format!("mean precision {mean:.1} below {}", pinned::NMR_FLOOR));
    }
    let per_seed: Vec<String> = precisions.iter().map(|p| format!("{p:.1}")).collect();
    let detail = format!("zero noise {:.0}/{:.0}; noisy mean precision {mean:.1} over seeds [{}]", r.score.precision, r.score.recall, per_seed.join(" "));
    let detail = if problems.is_empty() { detail } else { format!("{detail}; {}", problems.join("; ")) };
    timed(problems.is_empty(), detail, start.elapsed().as_secs_f64(), pinned::C7_SECONDS)
}

/// Trace CSV with the wall-clock column removed.
fn trace_without_seconds(history: &[qapsdp_core::admm::TraceRow]) -> String {
    let mut buf = Vec::new();
    write_trace_csv(history, &mut buf).unwrap();
    String::from_utf8(buf).unwrap().lines().map(|l| l.rsplit_once(',').unwrap().0.to_string()).collect::<Vec<_>>().join("\n")
}

fn criterion_8(reg: &OptimumRegistry) -> Verdict {
    let rerun = |inst: &ProblemInstance| {
        let a = run_pipeline(inst, &desk(4, Some(2))).unwrap().1;
        let b = run_pipeline(inst, &desk(4, Some(2))).unwrap().1;
        (trace_without_seconds(&a.history), trace_without_seconds(&b.history))
    };
    let chr12c = load(&data("instances/qaplib/chr12c.dat"), reg).unwrap();
    let (a, b) = rerun(&chr12c);
    info(&format!("supplementary chr12c k=4, 2 threads: traces identical: {}", a == b));
    let Some(chr12a) = load(&data("instances/qaplib/chr12a.dat"), reg) else {
        return Verdict::Unattainable("instance file not shipped: qaplib/chr12a.dat".into());
    };
    let (a, b) = rerun(&chr12a);
    if a == b {
        Verdict::Pass(format!("{} identical trace rows", a.lines().count() - 1))
    } else {
        Verdict::Fail("traces differ".into())
    }
}

fn main() {
    let reg = OptimumRegistry::from_path(&data("registry/optima.csv")).unwrap();
    // Published reference values pinned above must agree with the registry.
    assert_eq!(reg.get("chr12a").unwrap().reference_bound_gap(4), Some(pinned::CHR12A_BOUND_REF));
    assert_eq!(reg.get("gr21").unwrap().reference_bound_gap(3), Some(pinned::GR21_BOUND_REF));

    // Optional criterion numbers on the command line restrict the run.
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wanted = |id: usize| only.is_empty() || only.contains(&id);
    let mut log = Log { hard_failures: 0, unattainable: 0, passed: 0 };
    println!("acceptance on {} core(s)", host_threads());
    let criteria: [(&str, &dyn Fn() -> Verdict); 8] = [
        ("lift feasibility and objective identity", &criterion_1),
        ("operator algebra", &criterion_2),
        ("update-formula oracles", &criterion_3),
        ("bound validity", &criterion_4),
        ("desk-scale reproduction", &|| criterion_5(&reg)),
        ("divergence of the direct extension", &|| criterion_6(&reg)),
        ("NMR end to end", &criterion_7),
        ("determinism", &|| criterion_8(&reg)),
    ];
    for (i, (title, run)) in criteria.iter().enumerate() {
        if wanted(i + 1) {
            log.record(i + 1, title, run());
        }
    }
    println!("acceptance: {} pass, {} fail ({} unattainable here)", log.passed, log.hard_failures + log.unattainable, log.unattainable);
    if log.hard_failures > 0 {
        std::process::exit(1);
    }
}
