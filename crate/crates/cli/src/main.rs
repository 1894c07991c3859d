use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qapsdp_core::admm::write_trace_csv;
use qapsdp_core::nmr::{self, AssignOptions, NoiseSigma, ShiftStats, SimulationMeta};
use qapsdp_core::{
    parse_qaplib, parse_tsplib, run_pipeline, tsp_to_qap, CoverStrategy, Error, Mode, OptimumRegistry, PipelineOptions,
    ProblemInstance, RunReport, SolveError, SolverConfig,
};
use serde::Serialize;

const BUNDLED_STATS: &str = include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/nmr/shift_stats.csv"));

#[derive(Parser)]
#[command(name = "qapsdp", version, about = "Clique-based SDP bounds for sparse quadratic assignment problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance and report the bound, the rounded value and the gaps.
    Solve(SolveArgs),
    /// Solve every registered instance of a directory at several clique sizes.
    Bench(BenchArgs),
    /// Simulate and assign NMR spin systems.
    #[command(subcommand)]
    Nmr(NmrCommand),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Qaplib,
    Tsplib,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Conic3c,
    Direct123,
    Direct132,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Conic3c => Mode::Conic3c,
            ModeArg::Direct123 => Mode::Direct123,
            ModeArg::Direct132 => Mode::Direct132,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CoverArg {
    Greedy,
    Windows,
}

impl From<CoverArg> for CoverStrategy {
    fn from(c: CoverArg) -> Self {
        match c {
            CoverArg::Greedy => CoverStrategy::Greedy,
            CoverArg::Windows => CoverStrategy::Windows,
        }
    }
}

#[derive(Args)]
struct SolverArgs {
    /// ADMM iterations.
    #[arg(long, default_value_t = 1000)]
    iters: usize,
    /// Penalty parameter (initial value when adaptation is on).
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    /// Multiplier step length, in (0, 1.618].
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    /// Block update order.
    #[arg(long, value_enum, default_value = "conic3c")]
    mode: ModeArg,
    /// Worker threads; overrides QAPSDP_THREADS, which overrides the hardware default.
    #[arg(long)]
    threads: Option<usize>,
    /// Stop early once the convergence measure falls below this value (0 = never).
    #[arg(long, default_value_t = 0.0)]
    tol: f64,
    /// Residuals are recorded every this many iterations.
    #[arg(long, default_value_t = 10)]
    trace_every: usize,
    /// Keep rho fixed instead of rebalancing it during the first half of the run.
    #[arg(long)]
    fixed_rho: bool,
    /// Divide costs by this factor before solving (default: objective spread).
    #[arg(long)]
    cost_scale: Option<f64>,
    /// How node sets are chosen.
    #[arg(long, value_enum, default_value = "greedy")]
    cover: CoverArg,
}

impl SolverArgs {
    fn pipeline(&self, k: usize) -> PipelineOptions {
        PipelineOptions {
            k,
            cover: self.cover.into(),
            cost_scale: self.cost_scale,
            solver: SolverConfig {
                rho: self.rho,
                tau: self.tau,
                max_iters: self.iters,
                tol: self.tol,
                mode: self.mode.into(),
                threads: self.threads,
                trace_every: self.trace_every,
                adaptive_rho: !self.fixed_rho,
            },
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    /// Instance file.
    #[arg(long)]
    instance: PathBuf,
    /// File format (default: from the extension, `.tsp` is TSPLIB).
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Nodes per clique variable.
    #[arg(long, default_value_t = 2)]
    clique_size: usize,
    #[command(flatten)]
    solver: SolverArgs,
    /// Registry CSV providing the known optimum for gap reporting.
    #[arg(long)]
    registry: Option<PathBuf>,
    /// Known optimum (overrides the registry).
    #[arg(long)]
    optimum: Option<f64>,
    /// Results JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Convergence trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Clique cover JSON.
    #[arg(long)]
    dump_cover: Option<PathBuf>,
    /// Print model dimensions and operator constants.
    #[arg(long)]
    verbose: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// Directory with instance files.
    #[arg(long)]
    dir: PathBuf,
    /// Which file type to pick up: `.dat` for qaplib, `.tsp` for tsplib.
    #[arg(long, value_enum)]
    suite: Format,
    /// Registry CSV with known optima.
    #[arg(long)]
    registry: PathBuf,
    /// Comma-separated clique sizes.
    #[arg(long, value_delimiter = ',', default_value = "2,3,4")]
    clique_sizes: Vec<usize>,
    #[command(flatten)]
    solver: SolverArgs,
    /// Output table CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum NmrCommand {
    /// Generate noisy spin systems for a sequence.
    Simulate(SimulateArgs),
    /// Assign spin systems to residues and score against the recorded truth.
    Assign(AssignArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Sequence file (one-letter codes; FASTA header lines are ignored).
    #[arg(long)]
    sequence: PathBuf,
    /// Noise on the predecessor carbons, `alpha,beta` in ppm.
    #[arg(long, default_value = "0.08,0.16")]
    sigma: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Shift statistics CSV (default: the bundled table).
    #[arg(long)]
    stats: Option<PathBuf>,
    /// Spin-system CSV; the truth goes to `<out>.meta.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AssignArgs {
    /// Spin-system CSV.
    #[arg(long)]
    spin_systems: PathBuf,
    /// Sidecar with sequence and truth (default: `<spin-systems>.meta.json`).
    #[arg(long)]
    meta: Option<PathBuf>,
    /// Shift statistics CSV (default: the bundled table).
    #[arg(long)]
    stats: Option<PathBuf>,
    /// Weight of the residue-typing term.
    #[arg(long, default_value_t = nmr::DEFAULT_GAMMA)]
    gamma: f64,
    #[arg(long, default_value_t = 2)]
    clique_size: usize,
    /// Noise levels inside the sequential distance (default: those recorded by the simulation).
    #[arg(long)]
    match_sigma: Option<String>,
    #[command(flatten)]
    solver: SolverArgs,
    /// Also run the doubly stochastic baseline.
    #[arg(long)]
    ds: bool,
    /// Report JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure with the exit status it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Solve(SolveError::Divergence { .. }) => 3,
            Error::Solve(SolveError::InvalidConfig(_)) => 2,
            Error::Parse(_) | Error::Instance(_) | Error::Graph(_) | Error::Nmr(_) | Error::Io(_) => 2,
            _ => 1,
        };
        Self { code, message: e.to_string() }
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Nmr(NmrCommand::Simulate(a)) => cmd_simulate(a),
        Command::Nmr(NmrCommand::Assign(a)) => cmd_assign(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).map_err(|e| Failure { code: 1, message: format!("cannot write {}: {e}", path.display()) })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CmdResult {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Failure { code: 1, message: e.to_string() })?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| Failure { code: 1, message: e.to_string() })
}

fn stem(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("instance").to_string()
}

fn load_instance(path: &Path, format: Option<Format>) -> Result<ProblemInstance, Failure> {
    let text = read_text(path)?;
    let format = format.unwrap_or(if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("tsp")) { Format::Tsplib } else { Format::Qaplib });
    let mut inst = match format {
        Format::Qaplib => parse_qaplib(&text).map_err(Error::from)?,
        Format::Tsplib => tsp_to_qap(&parse_tsplib(&text).map_err(Error::from)?),
    };
    inst.name = stem(path);
    Ok(inst)
}

fn load_registry(path: &Path) -> Result<OptimumRegistry, Failure> {
    OptimumRegistry::from_csv_str(&read_text(path)?).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn fmt_gap(g: Option<f64>) -> String {
    g.map(|v| format!("{v:.2}%")).unwrap_or_else(|| "n/a".into())
}

fn write_trace(path: &Path, rows: &[qapsdp_core::admm::TraceRow]) -> CmdResult {
    let mut w = create(path)?;
    write_trace_csv(rows, &mut w).map_err(|e| Failure { code: 1, message: e.to_string() })
}

fn cmd_solve(a: SolveArgs) -> CmdResult {
    let mut inst = load_instance(&a.instance, a.format)?;
    if let Some(reg) = &a.registry {
        inst.known_optimum = load_registry(reg)?.optimum(&inst.name);
    }
    if a.optimum.is_some() {
        inst.known_optimum = a.optimum;
    }
    let opts = a.solver.pipeline(a.clique_size);
    let (report, result) = match run_pipeline(&inst, &opts) {
        Ok(r) => r,
        Err(Error::Solve(SolveError::Divergence { iteration, mode, magnitude, history })) => {
            if let Some(t) = &a.trace {
                write_trace(t, &history)?;
            }
            return Err(Failure { code: 3, message: format!("{mode} diverged at iteration {iteration} (max |x| = {magnitude:.3e})") });
        }
        Err(e) => return Err(e.into()),
    };
    if a.verbose {
        eprintln!(
            "n = {}, k = {}, cliques = {}, m_E = {}, alpha = {}, beta = {}, swapped = {}, cost scale = {:.6e}, rho {} -> {}",
            report.n,
            report.k,
            report.cliques,
            report.m_e,
            report.alpha,
            report.beta,
            report.swapped,
            report.cost_scale,
            report.rho,
            report.rho_final
        );
    }
    if let Some(t) = &a.trace {
        write_trace(t, &result.history)?;
    }
    if let Some(path) = &a.dump_cover {
        let (oriented, _) = inst.oriented();
        let model = qapsdp_core::SdpModel::build(&oriented, a.clique_size, opts.cover)?;
        write_json(path, &model.cover)?;
    }
    if let Some(out) = &a.out {
        write_json(out, &report)?;
    }
    println!(
        "{} n={} k={} iters={} eta={:.3e} bound={:.4} rounded={} gap_bound={} gap_rounded={} threads={} time={:.2}s",
        report.instance,
        report.n,
        report.k,
        report.iters,
        report.eta.eta_max,
        report.bound,
        report.rounded,
        fmt_gap(report.gap_bound_pct),
        fmt_gap(report.gap_rounded_pct),
        report.threads,
        report.meta.seconds
    );
    Ok(())
}

/// One row of the benchmark table.
#[derive(Debug, Serialize)]
struct RunRecord {
    instance: String,
    n: usize,
    k: usize,
    mode: String,
    iters: usize,
    rho: f64,
    tau: f64,
    eta_max: f64,
    bound: f64,
    rounded: f64,
    gap_bound_pct: Option<f64>,
    gap_rounded_pct: Option<f64>,
    seconds: f64,
    threads: usize,
}

impl From<&RunReport> for RunRecord {
    fn from(r: &RunReport) -> Self {
        Self {
            instance: r.instance.clone(),
            n: r.n,
            k: r.k,
            mode: r.mode.to_string(),
            iters: r.iters,
            rho: r.rho,
            tau: r.tau,
            eta_max: r.eta.eta_max,
            bound: r.bound,
            rounded: r.rounded,
            gap_bound_pct: r.gap_bound_pct,
            gap_rounded_pct: r.gap_rounded_pct,
            seconds: r.meta.seconds,
            threads: r.threads,
        }
    }
}

fn median(v: &mut [f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 0 { 0.5 * (v[m - 1] + v[m]) } else { v[m] })
}

fn summarize(label: &str, mut v: Vec<f64>) {
    let mean = if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 };
    match median(&mut v) {
        Some(med) => println!("{label}: mean {mean:.2}%, median {med:.2}% over {} runs", v.len()),
        None => println!("{label}: no runs"),
    }
}

fn cmd_bench(a: BenchArgs) -> CmdResult {
    let registry = load_registry(&a.registry)?;
    let ext = match a.suite {
        Format::Qaplib => "dat",
        Format::Tsplib => "tsp",
    };
    let entries = std::fs::read_dir(&a.dir).map_err(|e| Failure::input(format!("cannot read {}: {e}", a.dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case(ext)))
        .collect();
    files.sort();
    let mut table = csv::Writer::from_writer(create(&a.out)?);
    let csv_err = |e: csv::Error| Failure { code: 1, message: e.to_string() };
    let (mut bound_gaps, mut rounded_gaps) = (Vec::new(), Vec::new());
    let mut rows = 0;
    for path in &files {
        let name = stem(path);
        let Some(optimum) = registry.optimum(&name) else {
            eprintln!("warning: {name} is not in the registry; skipped");
            continue;
        };
        let mut inst = load_instance(path, Some(a.suite))?;
        inst.known_optimum = Some(optimum);
        for &k in &a.clique_sizes {
            if k < 2 || k > inst.n() {
                eprintln!("warning: clique size {k} does not fit {name} (n = {}); skipped", inst.n());
                continue;
            }
            let (report, _) = run_pipeline(&inst, &a.solver.pipeline(k))?;
            let rec = RunRecord::from(&report);
            bound_gaps.extend(rec.gap_bound_pct);
            rounded_gaps.extend(rec.gap_rounded_pct);
            println!("{name} k={k} bound gap {} rounded gap {}", fmt_gap(rec.gap_bound_pct), fmt_gap(rec.gap_rounded_pct));
            table.serialize(&rec).map_err(csv_err)?;
            rows += 1;
        }
    }
    if rows == 0 {
        table
            .write_record([
                "instance", "n", "k", "mode", "iters", "rho", "tau", "eta_max", "bound", "rounded", "gap_bound_pct",
                "gap_rounded_pct", "seconds", "threads",
            ])
            .map_err(csv_err)?;
    }
    table.flush().map_err(|e| Failure { code: 1, message: e.to_string() })?;
    summarize("bound gap", bound_gaps);
    summarize("rounded gap", rounded_gaps);
    Ok(())
}

fn parse_pair(s: &str) -> Result<NoiseSigma, Failure> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let bad = || Failure::input(format!("expected two comma-separated numbers, got {s:?}"));
    if parts.len() != 2 {
        return Err(bad());
    }
    let alpha: f64 = parts[0].parse().map_err(|_| bad())?;
    let beta: f64 = parts[1].parse().map_err(|_| bad())?;
    NoiseSigma::new(alpha, beta).map_err(|e| Failure::input(e.to_string()))
}

fn load_stats(path: Option<&Path>) -> Result<ShiftStats, Failure> {
    let parsed = match path {
        Some(p) => ShiftStats::from_reader(read_text(p)?.as_bytes()),
        None => ShiftStats::from_reader(BUNDLED_STATS.as_bytes()),
    };
    parsed.map_err(|e| Failure::input(e.to_string()))
}

fn read_sequence(path: &Path) -> Result<String, Failure> {
    let text = read_text(path)?;
    Ok(text.lines().filter(|l| !l.trim_start().starts_with('>')).flat_map(|l| l.chars().filter(|c| !c.is_whitespace())).collect())
}

fn meta_path(systems: &Path) -> PathBuf {
    let mut s = systems.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn cmd_simulate(a: SimulateArgs) -> CmdResult {
    let sigma = parse_pair(&a.sigma)?;
    let stats = load_stats(a.stats.as_deref())?;
    let sequence = read_sequence(&a.sequence)?;
    let set = nmr::simulate(&sequence, &stats, sigma, a.seed).map_err(Error::from)?;
    let mut w = create(&a.out)?;
    nmr::write_spin_systems(&set.systems, &mut w).map_err(Error::from)?;
    write_json(&meta_path(&a.out), &SimulationMeta::new(&set, a.seed))?;
    println!("{} spin systems for {} residues written to {}", set.len(), set.sequence.len(), a.out.display());
    Ok(())
}

#[derive(Serialize)]
struct AssignReport<'a> {
    precision: f64,
    recall: f64,
    correct_count: usize,
    expected: usize,
    assigned: usize,
    /// One-based system id per residue position.
    sigma: &'a [usize],
    truth: Vec<usize>,
    correct: &'a [bool],
    objective: f64,
    truth_objective: f64,
    gamma: f64,
    ds: Option<DsReport>,
    solve: &'a RunReport,
}

#[derive(Serialize)]
struct DsReport {
    precision: f64,
    recall: f64,
    sigma: Vec<usize>,
}

fn cmd_assign(a: AssignArgs) -> CmdResult {
    let stats = load_stats(a.stats.as_deref())?;
    let systems = nmr::read_spin_systems(read_text(&a.spin_systems)?.as_bytes()).map_err(Error::from)?;
    let meta_file = a.meta.clone().unwrap_or_else(|| meta_path(&a.spin_systems));
    let meta: SimulationMeta = serde_json::from_str(&read_text(&meta_file)?)
        .map_err(|e| Failure::input(format!("{}: {e}", meta_file.display())))?;
    let set = meta.into_set(systems)?;
    let opts = AssignOptions {
        pipeline: a.solver.pipeline(a.clique_size),
        gamma: a.gamma,
        match_sigma: a.match_sigma.as_deref().map(parse_pair).transpose()?,
        epsilon: nmr::EPSILON_START,
    };
    let result = nmr::assign(&set, &stats, &opts)?;
    let ds = if a.ds {
        let (sigma, score) = nmr::assign_ds(&set, &stats, &opts)?;
        Some(DsReport { precision: score.precision, recall: score.recall, sigma: sigma.one_based() })
    } else {
        None
    };
    println!(
        "precision {:.1} recall {:.1} ({} of {} correct){}",
        result.score.precision,
        result.score.recall,
        result.score.correct,
        result.score.expected,
        ds.as_ref().map(|d| format!("; DS baseline precision {:.1} recall {:.1}", d.precision, d.recall)).unwrap_or_default()
    );
    if let Some(out) = &a.out {
        let report = AssignReport {
            precision: result.score.precision,
            recall: result.score.recall,
            correct_count: result.score.correct,
            expected: result.score.expected,
            assigned: result.score.assigned,
            sigma: &result.sigma,
            truth: set.truth.one_based(),
            correct: &result.correct,
            objective: result.objective,
            truth_objective: result.truth_objective,
            gamma: a.gamma,
            ds,
            solve: &result.report,
        };
        write_json(out, &report)?;
    }
    Ok(())
}
