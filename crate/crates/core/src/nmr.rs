//! NMR resonance assignment as a sparse QAP: spin systems are matched to
//! residue positions along the backbone path.
//!
//! Orientation follows the rest of the crate: rows of the cost matrices are
//! spin systems, columns are residue positions, and `σ(position) = system`.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

use crate::cliquegraph::GraphError;
use crate::ds::ds_baseline;
use crate::instances::{Permutation, ProblemInstance, Sense};
use crate::lap::perfect_matching;
use crate::pipeline::{run_pipeline, PipelineOptions, RunReport};
use crate::rounding::project_to_permutation;

pub const DEFAULT_GAMMA: f64 = 0.1;
pub const LOW_NOISE: NoiseSigma = NoiseSigma { alpha: 0.08, beta: 0.16 };
pub const HIGH_NOISE: NoiseSigma = NoiseSigma { alpha: 0.16, beta: 0.32 };
/// First p-value threshold of the forbidden-assignment search.
pub const EPSILON_START: f64 = 1e-2;
const EPSILON_FLOOR: f64 = 1e-300;

#[derive(Debug, Error, PartialEq)]
pub enum NmrError {
    #[error("unknown residue {0:?}")]
    UnknownResidue(char),
    #[error("empty sequence")]
    EmptySequence,
    #[error("noise sigma must be finite and non-negative, got ({0}, {1})")]
    BadSigma(f64, f64),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("shift statistics: {0}")]
    Stats(String),
    #[error("spin-system file: {0}")]
    Format(String),
}

/// Backbone atoms used for residue typing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Atom {
    N,
    HN,
    CA,
    CB,
}

impl Atom {
    pub const ALL: [Atom; 4] = [Atom::N, Atom::HN, Atom::CA, Atom::CB];

    fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "N" => Some(Atom::N),
            "HN" | "H" => Some(Atom::HN),
            "CA" => Some(Atom::CA),
            "CB" => Some(Atom::CB),
            _ => None,
        }
    }
}

/// Residues that contribute no spin system and are represented by tokens.
pub fn is_token_residue(residue: char) -> bool {
    residue == 'P'
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSigma {
    pub alpha: f64,
    pub beta: f64,
}

impl NoiseSigma {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, NmrError> {
        if !(alpha.is_finite() && beta.is_finite() && alpha >= 0.0 && beta >= 0.0) {
            return Err(NmrError::BadSigma(alpha, beta));
        }
        Ok(Self { alpha, beta })
    }

    fn is_zero(&self) -> bool {
        self.alpha == 0.0 && self.beta == 0.0
    }
}

/// Per-residue mean and standard deviation of each atom's shift (ppm).
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftStats {
    entries: BTreeMap<(char, Atom), (f64, f64)>,
}

impl ShiftStats {
    /// Reads the `residue,atom,mean,std` CSV.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self, NmrError> {
        #[derive(Deserialize)]
        struct Row {
            residue: String,
            atom: String,
            mean: f64,
            std: f64,
        }
        let mut entries = BTreeMap::new();
        let mut rdr = csv::Reader::from_reader(reader);
        for (line, row) in rdr.deserialize::<Row>().enumerate() {
            let row = row.map_err(|e| NmrError::Stats(format!("row {}: {e}", line + 1)))?;
            let mut chars = row.residue.trim().chars();
            let residue = match (chars.next(), chars.next()) {
                (Some(c), None) => c.to_ascii_uppercase(),
                _ => return Err(NmrError::Stats(format!("row {}: residue must be one letter", line + 1))),
            };
            let atom = Atom::parse(&row.atom).ok_or_else(|| NmrError::Stats(format!("row {}: unknown atom {:?}", line + 1, row.atom)))?;
            if !(row.std > 0.0 && row.std.is_finite() && row.mean.is_finite()) {
                return Err(NmrError::Stats(format!("row {}: std must be positive", line + 1)));
            }
            entries.insert((residue, atom), (row.mean, row.std));
        }
        if entries.is_empty() {
            return Err(NmrError::Stats("no rows".into()));
        }
        Ok(Self { entries })
    }

    pub fn from_path(path: &Path) -> Result<Self, crate::Error> {
        Ok(Self::from_reader(std::fs::File::open(path)?)?)
    }

    pub fn get(&self, residue: char, atom: Atom) -> Option<(f64, f64)> {
        self.entries.get(&(residue, atom)).copied()
    }

    pub fn knows(&self, residue: char) -> bool {
        self.entries.range((residue, Atom::N)..=(residue, Atom::CB)).next().is_some()
    }

    fn check_sequence(&self, sequence: &str) -> Result<Vec<char>, NmrError> {
        let residues: Vec<char> = sequence.trim().chars().map(|c| c.to_ascii_uppercase()).collect();
        if residues.is_empty() {
            return Err(NmrError::EmptySequence);
        }
        match residues.iter().find(|c| !self.knows(**c)) {
            Some(c) => Err(NmrError::UnknownResidue(*c)),
            None => Ok(residues),
        }
    }
}

/// Observed frequencies of one spin system; `None` marks a missing value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinSystem {
    pub id: usize,
    pub n: Option<f64>,
    pub hn: Option<f64>,
    pub ca: Option<f64>,
    pub cb: Option<f64>,
    pub ca_prev: Option<f64>,
    pub cb_prev: Option<f64>,
}

impl SpinSystem {
    pub fn token(id: usize) -> Self {
        Self { id, n: None, hn: None, ca: None, cb: None, ca_prev: None, cb_prev: None }
    }

    pub fn is_token(&self) -> bool {
        self.n.is_none() && self.hn.is_none() && self.ca.is_none() && self.cb.is_none()
    }

    pub fn shift(&self, atom: Atom) -> Option<f64> {
        match atom {
            Atom::N => self.n,
            Atom::HN => self.hn,
            Atom::CA => self.ca,
            Atom::CB => self.cb,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinSystemSet {
    /// `systems[s].id == s`; the list order is shuffled relative to the chain.
    pub systems: Vec<SpinSystem>,
    pub sequence: String,
    /// `truth[position]` is the system observed at that residue.
    pub truth: Permutation,
    pub noise: NoiseSigma,
}

impl SpinSystemSet {
    pub fn len(&self) -> usize {
        self.systems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.systems.is_empty()
    }

    pub fn residues(&self) -> Vec<char> {
        self.sequence.chars().collect()
    }
}

/// Draws true shifts per residue, builds systems whose predecessor carbons
/// carry Gaussian noise, and shuffles them.
pub fn simulate(sequence: &str, stats: &ShiftStats, noise: NoiseSigma, seed: u64) -> Result<SpinSystemSet, NmrError> {
    let noise = NoiseSigma::new(noise.alpha, noise.beta)?;
    let residues = stats.check_sequence(sequence)?;
    let n = residues.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |mean: f64, sd: f64, rng: &mut ChaCha8Rng| Normal::new(mean, sd).expect("finite parameters").sample(rng);

    let truth_shifts: Vec<BTreeMap<Atom, f64>> = residues
        .iter()
        .map(|&r| Atom::ALL.iter().filter_map(|&a| stats.get(r, a).map(|(m, s)| (a, draw(m, s, &mut rng)))).collect())
        .collect();
    let noise_ca = Normal::new(0.0, noise.alpha).expect("valid sigma");
    let noise_cb = Normal::new(0.0, noise.beta).expect("valid sigma");

    let mut chain: Vec<SpinSystem> = Vec::with_capacity(n);
    for (pos, &res) in residues.iter().enumerate() {
        if is_token_residue(res) {
            chain.push(SpinSystem::token(0));
            continue;
        }
        let own = &truth_shifts[pos];
        let (ca_prev, cb_prev) = match pos.checked_sub(1) {
            Some(p) => (
                truth_shifts[p].get(&Atom::CA).map(|v| v + noise_ca.sample(&mut rng)),
                truth_shifts[p].get(&Atom::CB).map(|v| v + noise_cb.sample(&mut rng)),
            ),
            None => (None, None),
        };
        chain.push(SpinSystem {
            id: 0,
            n: own.get(&Atom::N).copied(),
            hn: own.get(&Atom::HN).copied(),
            ca: own.get(&Atom::CA).copied(),
            cb: own.get(&Atom::CB).copied(),
            ca_prev,
            cb_prev,
        });
    }

    // order[s] = position whose system lands at slot s.
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut truth = vec![0; n];
    let systems = order
        .iter()
        .enumerate()
        .map(|(slot, &pos)| {
            truth[pos] = slot;
            SpinSystem { id: slot, ..chain[pos].clone() }
        })
        .collect();
    Ok(SpinSystemSet {
        systems,
        sequence: residues.iter().collect(),
        truth: Permutation::new(truth).expect("shuffle is a bijection"),
        noise,
    })
}

/// Sequential-match distance `A` and its kernel `Ā = exp(−A/‖A‖_F)`.
///
/// `A(i, j)` compares system `i`'s own carbons with system `j`'s predecessor
/// carbons. Terms with a missing side are dropped; a pair with no comparable
/// term gets the value a true match would have in expectation (one per term).
pub fn sequential_cost(set: &SpinSystemSet, sigma: NoiseSigma) -> Result<(DMatrix<f64>, DMatrix<f64>), NmrError> {
    let n = set.len();
    if n < 2 {
        return Err(NmrError::Degenerate("at least two spin systems are required".into()));
    }
    let sigma = if sigma.alpha > 0.0 && sigma.beta > 0.0 { sigma } else { LOW_NOISE };
    let term = |a: Option<f64>, b: Option<f64>, s: f64| a.zip(b).map(|(x, y)| ((x - y) / s).powi(2));
    let a = DMatrix::from_fn(n, n, |i, j| {
        let (si, sj) = (&set.systems[i], &set.systems[j]);
        let alpha = term(si.ca, sj.ca_prev, sigma.alpha);
        let beta = term(si.cb, sj.cb_prev, sigma.beta);
        match (alpha, beta) {
            (None, None) => 2.0,
            (x, y) => x.unwrap_or(0.0) + y.unwrap_or(0.0),
        }
    });
    let norm = a.norm();
    if norm == 0.0 || !norm.is_finite() {
        return Err(NmrError::Degenerate("sequential distance matrix has zero norm".into()));
    }
    let kernel = a.map(|v| (-v / norm).exp());
    Ok((a, kernel))
}

/// Residue-typing statistics between systems (rows) and positions (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct TypingScores {
    pub z: DMatrix<f64>,
    /// `exp(−Z/‖Z‖_F)`.
    pub w: DMatrix<f64>,
    /// χ² survival probability of each entry of `z`.
    pub p_value: DMatrix<f64>,
    /// `1` forbids the pairing.
    pub k: DMatrix<f64>,
    /// Threshold at which `k` first admitted a perfect matching.
    pub epsilon: f64,
}

/// Chi-square statistic of system `s` against residue type `res`, together
/// with its number of terms.
fn typing_statistic(s: &SpinSystem, res: char, stats: &ShiftStats) -> (f64, usize) {
    Atom::ALL
        .iter()
        .filter_map(|&atom| {
            let (mean, sd) = stats.get(res, atom)?;
            let v = s.shift(atom)?;
            Some(((v - mean) / sd).powi(2))
        })
        .fold((0.0, 0), |(z, c), t| (z + t, c + 1))
}

/// Survival probability of a χ² statistic with `df` degrees of freedom.
pub fn chi2_survival(z: f64, df: usize) -> f64 {
    if df == 0 {
        return if z <= 0.0 { 1.0 } else { 0.0 };
    }
    ChiSquared::new(df as f64).expect("positive df").sf(z)
}

pub fn typing_scores(set: &SpinSystemSet, stats: &ShiftStats, epsilon: f64) -> Result<TypingScores, NmrError> {
    let residues = stats.check_sequence(&set.sequence)?;
    let n = set.len();
    if residues.len() != n {
        return Err(NmrError::Degenerate(format!("{} systems for {} residues", n, residues.len())));
    }
    let mut z = DMatrix::zeros(n, n);
    let mut p_value = DMatrix::zeros(n, n);
    let mut incompatible = Vec::new();
    for (i, s) in set.systems.iter().enumerate() {
        for (j, &res) in residues.iter().enumerate() {
            if s.is_token() != is_token_residue(res) {
                incompatible.push((i, j));
                continue;
            }
            let (stat, terms) = typing_statistic(s, res, stats);
            z[(i, j)] = stat;
            p_value[(i, j)] = chi2_survival(stat, terms.saturating_sub(1));
        }
    }
    // Tokens only fit token residues: give those pairs the worst observed score.
    let worst = z.iter().fold(0.0f64, |m, v| m.max(*v));
    for (i, j) in incompatible {
        z[(i, j)] = worst;
        p_value[(i, j)] = 0.0;
    }
    let norm = z.norm();
    let w = if norm > 0.0 { z.map(|v| (-v / norm).exp()) } else { DMatrix::from_element(n, n, 1.0) };

    let mut eps = epsilon;
    loop {
        let k = p_value.map(|p| if p < eps { 1.0 } else { 0.0 });
        let adj: Vec<Vec<usize>> = (0..n).map(|i| (0..n).filter(|&j| k[(i, j)] == 0.0).collect()).collect();
        if perfect_matching(&adj, n).is_some() || eps <= EPSILON_FLOOR {
            let k = if perfect_matching(&adj, n).is_some() { k } else { DMatrix::zeros(n, n) };
            return Ok(TypingScores { z, w, p_value, k, epsilon: eps });
        }
        eps /= 10.0;
    }
}

/// Directed path adjacency: position `i` precedes `i + 1`.
pub fn path_adjacency(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| if j == i + 1 { 1.0 } else { 0.0 })
}

/// Maximization instance with `A = Ā`, the path as structure graph, and the
/// typing term `(1/γ) exp(−γ Z/‖Z‖_F)` as linear weights.
pub fn nmr_cost(kernel: &DMatrix<f64>, z: &DMatrix<f64>, gamma: f64) -> Result<ProblemInstance, crate::Error> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(NmrError::Degenerate(format!("gamma must be positive, got {gamma}")).into());
    }
    let n = kernel.nrows();
    let norm = z.norm();
    let linear = z.map(|v| if norm > 0.0 { (-gamma * v / norm).exp() / gamma } else { 1.0 / gamma });
    let inst = ProblemInstance::new("nmr", kernel.clone(), &path_adjacency(n), Sense::Maximize)?;
    Ok(inst.with_linear(linear)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub correct: usize,
    pub expected: usize,
    pub assigned: usize,
    pub precision: f64,
    pub recall: f64,
}

/// `N_c`, `N_m`, `N_a` and the percentages `100·N_c/N_m`, `100·N_c/N_a`.
pub fn score_counts(correct: usize, expected: usize, assigned: usize) -> Score {
    let pct = |a: usize, b: usize| if b == 0 { 0.0 } else { 100.0 * a as f64 / b as f64 };
    Score { correct, expected, assigned, precision: pct(correct, expected), recall: pct(correct, assigned) }
}

/// Scores an assignment; token systems are not counted.
pub fn score(set: &SpinSystemSet, sigma: &Permutation) -> (Score, Vec<bool>) {
    let flags: Vec<bool> = (0..set.len()).map(|pos| sigma[pos] == set.truth[pos]).collect();
    let real: Vec<usize> = (0..set.len()).filter(|&pos| !set.systems[set.truth[pos]].is_token()).collect();
    let correct = real.iter().filter(|&&pos| flags[pos]).count();
    let assigned = real.len();
    (score_counts(correct, real.len(), assigned), flags)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignOptions {
    pub pipeline: PipelineOptions,
    pub gamma: f64,
    /// Sigmas inside the sequential distance; `None` reuses the simulation noise.
    pub match_sigma: Option<NoiseSigma>,
    pub epsilon: f64,
}

impl Default for AssignOptions {
    fn default() -> Self {
        Self { pipeline: PipelineOptions::default(), gamma: DEFAULT_GAMMA, match_sigma: None, epsilon: EPSILON_START }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    /// One-based system index per residue position.
    pub sigma: Vec<usize>,
    pub score: Score,
    pub correct: Vec<bool>,
    pub objective: f64,
    pub truth_objective: f64,
    pub report: RunReport,
}

fn match_sigma(set: &SpinSystemSet, opts: &AssignOptions) -> NoiseSigma {
    opts.match_sigma.unwrap_or(if set.noise.is_zero() { LOW_NOISE } else { set.noise })
}

/// Builds the assignment QAP of `set`.
pub fn build_instance(set: &SpinSystemSet, stats: &ShiftStats, opts: &AssignOptions) -> Result<(ProblemInstance, TypingScores), crate::Error> {
    if set.len() < 2 {
        return Err(GraphError::TooSmall.into());
    }
    let (_, kernel) = sequential_cost(set, match_sigma(set, opts))?;
    let typing = typing_scores(set, stats, opts.epsilon)?;
    let inst = nmr_cost(&kernel, &typing.z, opts.gamma)?;
    Ok((inst, typing))
}

/// Solves the relaxation, rounds, and scores against the recorded truth.
pub fn assign(set: &SpinSystemSet, stats: &ShiftStats, opts: &AssignOptions) -> Result<Assignment, crate::Error> {
    let (inst, _) = build_instance(set, stats, opts)?;
    let (report, _) = run_pipeline(&inst, &opts.pipeline)?;
    let sigma = Permutation::new(report.sigma.iter().map(|s| s - 1).collect())?;
    let (score, correct) = score(set, &sigma);
    Ok(Assignment {
        sigma: sigma.one_based(),
        score,
        correct,
        objective: inst.objective(&sigma),
        truth_objective: inst.objective(&set.truth),
        report,
    })
}

/// Doubly stochastic baseline with the typing mask as hard constraints.
pub fn assign_ds(set: &SpinSystemSet, stats: &ShiftStats, opts: &AssignOptions) -> Result<(Permutation, Score), crate::Error> {
    let (_, kernel) = sequential_cost(set, match_sigma(set, opts))?;
    let typing = typing_scores(set, stats, opts.epsilon)?;
    let result = ds_baseline(&kernel, &path_adjacency(set.len()), &typing.k)?;
    let sigma = project_to_permutation(&result.d);
    let (s, _) = score(set, &sigma);
    Ok((sigma, s))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

/// Writes the `id,N,HN,CA,CB,CA_prev,CB_prev` CSV; missing values are empty.
pub fn write_spin_systems<W: Write>(systems: &[SpinSystem], out: W) -> Result<(), NmrError> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| NmrError::Format(e.to_string());
    w.write_record(["id", "N", "HN", "CA", "CB", "CA_prev", "CB_prev"]).map_err(err)?;
    for s in systems {
        w.write_record([
            s.id.to_string(),
            fmt_opt(s.n),
            fmt_opt(s.hn),
            fmt_opt(s.ca),
            fmt_opt(s.cb),
            fmt_opt(s.ca_prev),
            fmt_opt(s.cb_prev),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| NmrError::Format(e.to_string()))
}

pub fn read_spin_systems<R: Read>(input: R) -> Result<Vec<SpinSystem>, NmrError> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers().map_err(|e| NmrError::Format(e.to_string()))?.clone();
    let expected = ["id", "N", "HN", "CA", "CB", "CA_prev", "CB_prev"];
    if headers.iter().map(str::trim).ne(expected.iter().copied()) {
        return Err(NmrError::Format(format!("header must be {}", expected.join(","))));
    }
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| NmrError::Format(format!("row {}: {e}", line + 1)))?;
        let field = |k: usize| -> Result<Option<f64>, NmrError> {
            let s = rec.get(k).unwrap_or("").trim();
            if s.is_empty() {
                return Ok(None);
            }
            let v: f64 = s.parse().map_err(|_| NmrError::Format(format!("row {}: bad number {s:?}", line + 1)))?;
            if !v.is_finite() {
                return Err(NmrError::Format(format!("row {}: non-finite value", line + 1)));
            }
            Ok(Some(v))
        };
        let id = rec.get(0).unwrap_or("").trim().parse().map_err(|_| NmrError::Format(format!("row {}: bad id", line + 1)))?;
        out.push(SpinSystem { id, n: field(1)?, hn: field(2)?, ca: field(3)?, cb: field(4)?, ca_prev: field(5)?, cb_prev: field(6)? });
    }
    Ok(out)
}

/// Sidecar for a simulated set: everything except the systems themselves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationMeta {
    pub sequence: String,
    /// One-based system id per residue position.
    pub truth: Vec<usize>,
    pub sigma: (f64, f64),
    pub seed: u64,
}

impl SimulationMeta {
    pub fn new(set: &SpinSystemSet, seed: u64) -> Self {
        Self { sequence: set.sequence.clone(), truth: set.truth.one_based(), sigma: (set.noise.alpha, set.noise.beta), seed }
    }

    /// Reassembles a set from its systems; ids must be `0..n` in order.
    pub fn into_set(self, mut systems: Vec<SpinSystem>) -> Result<SpinSystemSet, crate::Error> {
        systems.sort_by_key(|s| s.id);
        if systems.iter().enumerate().any(|(i, s)| s.id != i) {
            return Err(NmrError::Format("system ids must be 0..n".into()).into());
        }
        if systems.len() != self.sequence.chars().count() || self.truth.len() != systems.len() {
            return Err(NmrError::Format("system count does not match the sequence".into()).into());
        }
        let truth = Permutation::new(self.truth.iter().map(|t| t.wrapping_sub(1)).collect())?;
        Ok(SpinSystemSet { systems, sequence: self.sequence, truth, noise: NoiseSigma::new(self.sigma.0, self.sigma.1)? })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const STATS: &str = "residue,atom,mean,std\nA,N,123.2,3.5\nA,HN,8.19,0.58\nA,CA,53.1,2.0\nA,CB,19.0,1.8\n\
G,N,109.6,3.7\nG,HN,8.33,0.63\nG,CA,45.4,1.3\nP,CA,63.3,1.5\nP,CB,31.8,1.2\n";

    fn stats() -> ShiftStats {
        ShiftStats::from_reader(STATS.as_bytes()).unwrap()
    }

    #[test]
    fn unknown_residue_is_named() {
        assert_eq!(simulate("AXG", &stats(), LOW_NOISE, 1).unwrap_err(), NmrError::UnknownResidue('X'));
    }

    #[test]
    fn zero_noise_copies_predecessor() {
        let set = simulate("AAGAPA", &stats(), NoiseSigma::new(0.0, 0.0).unwrap(), 3).unwrap();
        for pos in 1..set.len() {
            let cur = &set.systems[set.truth[pos]];
            let prev = &set.systems[set.truth[pos - 1]];
            if !cur.is_token() && !prev.is_token() {
                assert_eq!(cur.ca_prev, prev.ca);
                assert_eq!(cur.cb_prev, prev.cb);
            }
        }
        assert!(set.systems[set.truth[4]].is_token());
        assert_eq!(set.systems[set.truth[2]].cb, None);
    }

    #[test]
    fn counts() {
        let s = score_counts(60, 66, 66);
        assert!((s.precision - 90.909).abs() < 1e-3 && (s.recall - 90.909).abs() < 1e-3);
    }

    #[test]
    fn csv_round_trip() {
        let set = simulate("AGAPA", &stats(), LOW_NOISE, 9).unwrap();
        let mut buf = Vec::new();
        write_spin_systems(&set.systems, &mut buf).unwrap();
        let back = read_spin_systems(buf.as_slice()).unwrap();
        assert_eq!(back.len(), set.len());
        for (a, b) in back.iter().zip(&set.systems) {
            assert_eq!(a.is_token(), b.is_token());
            assert_eq!(a.cb.is_some(), b.cb.is_some());
            assert!((a.ca.unwrap_or(0.0) - b.ca.unwrap_or(0.0)).abs() < 1e-12);
        }
    }
}
