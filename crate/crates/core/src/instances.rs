//! QAPLIB / TSPLIB readers, the uniform problem model and a brute-force oracle.
//!
//! Objective convention used throughout the crate: for a permutation `σ` that
//! places facility `σ(i)` (an index of `A`) on node `i` (an index of `B`),
//!
//! ```text
//! value(σ) = Σ_{i,j} A(σ(i), σ(j)) · B(i, j)  +  Σ_i W(σ(i), i)
//! ```
//!
//! where the linear term `W` is only present for instances that carry diagonal
//! weights (the NMR assignment problem).

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sparse::CsrMatrix;

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("format error at token {position}: {message}")]
    Format { position: usize, message: String },
    #[error("expected {expected} tokens, got {got}")]
    TokenCount { expected: usize, got: usize },
    #[error("unsupported {what}: {value}")]
    Unsupported { what: &'static str, value: String },
    #[error("format error: {0}")]
    Invalid(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum InstanceError {
    #[error("brute force refuses n = {n} (limit {limit})")]
    TooLarge { n: usize, limit: usize },
    #[error("invalid permutation: {0}")]
    BadPermutation(String),
    #[error("instance error: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Minimize,
    Maximize,
}

impl Sense {
    /// `true` when `a` is strictly better than `b` under this sense.
    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            Sense::Minimize => a < b,
            Sense::Maximize => a > b,
        }
    }
}

/// A permutation `σ` of `{0, …, n-1}`; `σ(i)` is the facility placed on node `i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(map: Vec<usize>) -> Result<Self, InstanceError> {
        let n = map.len();
        let mut seen = vec![false; n];
        for &v in &map {
            if v >= n || seen[v] {
                return Err(InstanceError::BadPermutation(format!("{map:?} is not a bijection")));
            }
            seen[v] = true;
        }
        Ok(Self(map))
    }

    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.0.len()];
        for (i, &v) in self.0.iter().enumerate() {
            inv[v] = i;
        }
        Self(inv)
    }

    /// Permutation matrix with `P(σ(i), i) = 1`.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        let n = self.0.len();
        let mut p = DMatrix::zeros(n, n);
        for (i, &v) in self.0.iter().enumerate() {
            p[(v, i)] = 1.0;
        }
        p
    }

    /// One-based rendering, the way QAPLIB solution files list permutations.
    pub fn one_based(&self) -> Vec<usize> {
        self.0.iter().map(|v| v + 1).collect()
    }
}

impl std::ops::Index<usize> for Permutation {
    type Output = usize;
    fn index(&self, i: usize) -> &usize {
        &self.0[i]
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.one_based().iter().map(|v| v.to_string()).collect();
        write!(f, "[{}]", parts.join(" "))
    }
}

/// A quadratic assignment instance `opt_σ value(σ)`.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub name: String,
    /// Dense flow/distance matrix indexed by facilities.
    pub a: DMatrix<f64>,
    /// Sparse structure graph indexed by nodes.
    pub b: CsrMatrix,
    pub sense: Sense,
    /// Optional linear term `W(facility, node)`.
    pub linear: Option<DMatrix<f64>>,
    pub known_optimum: Option<f64>,
}

impl ProblemInstance {
    pub fn new(name: impl Into<String>, a: DMatrix<f64>, b: &DMatrix<f64>, sense: Sense) -> Result<Self, InstanceError> {
        let n = a.nrows();
        if a.ncols() != n || b.nrows() != n || b.ncols() != n {
            return Err(InstanceError::Invalid(format!(
                "A is {}x{}, B is {}x{}; both must be n x n",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols()
            )));
        }
        if n < 2 {
            return Err(InstanceError::Invalid(format!("n = {n}; at least 2 nodes are required")));
        }
        Ok(Self { name: name.into(), a, b: dense_to_csr(b), sense, linear: None, known_optimum: None })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn nnz_b(&self) -> usize {
        self.b.nnz()
    }

    pub fn nnz_a(&self) -> usize {
        self.a.iter().filter(|v| **v != 0.0).count()
    }

    pub fn with_linear(mut self, w: DMatrix<f64>) -> Result<Self, InstanceError> {
        if w.nrows() != self.n() || w.ncols() != self.n() {
            return Err(InstanceError::Invalid("linear term must be n x n".into()));
        }
        self.linear = Some(w);
        Ok(self)
    }

    /// Objective value of `sigma` in the instance's native sense.
    pub fn objective(&self, sigma: &Permutation) -> f64 {
        assert_eq!(sigma.len(), self.n(), "permutation size mismatch");
        let quad: f64 = self.b.triplets().map(|(i, j, w)| self.a[(sigma[i], sigma[j])] * w).sum();
        let lin: f64 = match &self.linear {
            Some(w) => (0..self.n()).map(|i| w[(sigma[i], i)]).sum(),
            None => 0.0,
        };
        quad + lin
    }

    /// Returns the instance with `A` and `B` exchanged, so that the sparser
    /// matrix plays the structure-graph role. The flag tells whether a swap
    /// happened; permutations of the swapped instance map back via
    /// [`Permutation::inverse`].
    pub fn oriented(&self) -> (Self, bool) {
        if self.linear.is_some() || self.nnz_b() <= self.nnz_a() {
            return (self.clone(), false);
        }
        let swapped = Self {
            name: self.name.clone(),
            a: self.b.to_dense(),
            b: dense_to_csr(&self.a),
            sense: self.sense,
            linear: None,
            known_optimum: self.known_optimum,
        };
        (swapped, true)
    }

    /// Serializes to QAPLIB text (n, A, B).
    pub fn to_qaplib(&self) -> String {
        let n = self.n();
        let mut out = format!("{n}\n\n");
        let b = self.b.to_dense();
        for m in [&self.a, &b] {
            for i in 0..n {
                let row: Vec<String> = (0..n).map(|j| format_number(m[(i, j)])).collect();
                out.push_str(&row.join(" "));
                out.push('\n');
            }
            out.push('\n');
        }
        out
    }
}

fn format_number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:?}")
    }
}

pub(crate) fn dense_to_csr(m: &DMatrix<f64>) -> CsrMatrix {
    let mut t = Vec::new();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if m[(i, j)] != 0.0 {
                t.push((i, j, m[(i, j)]));
            }
        }
    }
    CsrMatrix::from_triplets(m.nrows(), m.ncols(), &t)
}

/// Parses QAPLIB text: `n`, then `n²` entries of `A` and `n²` entries of `B`.
pub fn parse_qaplib(text: &str) -> Result<ProblemInstance, ParseError> {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    let first = tokens.first().ok_or(ParseError::TokenCount { expected: 1, got: 0 })?;
    let n: usize = first
        .parse()
        .map_err(|_| ParseError::Format { position: 1, message: format!("expected matrix size, found {first:?}") })?;
    if n < 2 {
        return Err(ParseError::Invalid(format!("n = {n}; at least 2 is required")));
    }
    let expected = 1 + 2 * n * n;
    if tokens.len() != expected {
        return Err(ParseError::TokenCount { expected, got: tokens.len() });
    }
    let mut values = Vec::with_capacity(2 * n * n);
    for (pos, tok) in tokens.iter().enumerate().skip(1) {
        let v: f64 = tok
            .parse()
            .map_err(|_| ParseError::Format { position: pos + 1, message: format!("non-numeric token {tok:?}") })?;
        values.push(v);
    }
    let a = DMatrix::from_row_slice(n, n, &values[..n * n]);
    let b = DMatrix::from_row_slice(n, n, &values[n * n..]);
    let inst = ProblemInstance::new("", a, &b, Sense::Minimize).map_err(|e| ParseError::Invalid(e.to_string()))?;
    Ok(inst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[allow(non_camel_case_types)]
pub enum WeightKind {
    EUC_2D,
    GEO,
    ATT,
    EXPLICIT,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[allow(non_camel_case_types)]
pub enum ExplicitFormat {
    FULL_MATRIX,
    UPPER_ROW,
    LOWER_DIAG_ROW,
    UPPER_DIAG_ROW,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TspInstance {
    pub name: String,
    pub dimension: usize,
    pub weight_kind: WeightKind,
    pub coords: Option<Vec<(f64, f64)>>,
    pub explicit_matrix: Option<DMatrix<f64>>,
    pub explicit_format: Option<ExplicitFormat>,
}

fn nint(x: f64) -> f64 {
    (x + 0.5).floor()
}

fn geo_radians(x: f64) -> f64 {
    const PI: f64 = 3.141592;
    let deg = x.trunc();
    let min = x - deg;
    PI * (deg + 5.0 * min / 3.0) / 180.0
}

impl TspInstance {
    /// Edge weight between nodes `i` and `j` (zero-based).
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        match self.weight_kind {
            WeightKind::EXPLICIT => self.explicit_matrix.as_ref().expect("explicit matrix")[(i, j)],
            kind => {
                let c = self.coords.as_ref().expect("coordinates");
                let (xi, yi) = c[i];
                let (xj, yj) = c[j];
                match kind {
                    WeightKind::EUC_2D => nint(((xi - xj).powi(2) + (yi - yj).powi(2)).sqrt()),
                    WeightKind::ATT => {
                        let r = (((xi - xj).powi(2) + (yi - yj).powi(2)) / 10.0).sqrt();
                        let t = nint(r);
                        if t < r {
                            t + 1.0
                        } else {
                            t
                        }
                    }
                    WeightKind::GEO => {
                        const RRR: f64 = 6378.388;
                        let (lat_i, lon_i) = (geo_radians(xi), geo_radians(yi));
                        let (lat_j, lon_j) = (geo_radians(xj), geo_radians(yj));
                        let q1 = (lon_i - lon_j).cos();
                        let q2 = (lat_i - lat_j).cos();
                        let q3 = (lat_i + lat_j).cos();
                        (RRR * (0.5 * ((1.0 + q1) * q2 - (1.0 - q1) * q3)).acos() + 1.0).trunc()
                    }
                    WeightKind::EXPLICIT => unreachable!(),
                }
            }
        }
    }

    pub fn distance_matrix(&self) -> DMatrix<f64> {
        let n = self.dimension;
        DMatrix::from_fn(n, n, |i, j| self.distance(i, j))
    }

    /// Length of the closed tour visiting nodes in `order`.
    pub fn tour_length(&self, order: &[usize]) -> f64 {
        (0..order.len()).map(|k| self.distance(order[k], order[(k + 1) % order.len()])).sum()
    }
}

/// Parses a symmetric TSPLIB file.
pub fn parse_tsplib(text: &str) -> Result<TspInstance, ParseError> {
    let mut name = String::new();
    let mut dimension: Option<usize> = None;
    let mut kind: Option<WeightKind> = None;
    let mut format: Option<ExplicitFormat> = None;
    let mut coord_tokens: Option<Vec<String>> = None;
    let mut weight_tokens: Option<Vec<String>> = None;

    let mut lines = text.lines().peekable();
    while let Some(raw) = lines.next() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line == "EOF" {
            break;
        }
        let section = match line {
            "NODE_COORD_SECTION" => Some(&mut coord_tokens),
            "EDGE_WEIGHT_SECTION" => Some(&mut weight_tokens),
            "DISPLAY_DATA_SECTION" | "TOUR_SECTION" | "FIXED_EDGES_SECTION" => None,
            _ => {
                let (key, value) = match line.split_once(':') {
                    Some((k, v)) => (k.trim(), v.trim()),
                    None => {
                        return Err(ParseError::Invalid(format!("unrecognized line {line:?}")));
                    }
                };
                match key {
                    "NAME" => name = value.to_string(),
                    "TYPE" => {
                        if value != "TSP" {
                            return Err(ParseError::Unsupported { what: "TYPE", value: value.to_string() });
                        }
                    }
                    "DIMENSION" => {
                        dimension = Some(
                            value
                                .parse()
                                .map_err(|_| ParseError::Invalid(format!("DIMENSION {value:?} is not an integer")))?,
                        )
                    }
                    "EDGE_WEIGHT_TYPE" => {
                        kind = Some(match value {
                            "EUC_2D" => WeightKind::EUC_2D,
                            "GEO" => WeightKind::GEO,
                            "ATT" => WeightKind::ATT,
                            "EXPLICIT" => WeightKind::EXPLICIT,
                            other => {
                                return Err(ParseError::Unsupported {
                                    what: "EDGE_WEIGHT_TYPE",
                                    value: other.to_string(),
                                })
                            }
                        })
                    }
                    "EDGE_WEIGHT_FORMAT" => {
                        format = Some(match value {
                            "FULL_MATRIX" => ExplicitFormat::FULL_MATRIX,
                            "UPPER_ROW" => ExplicitFormat::UPPER_ROW,
                            "LOWER_DIAG_ROW" => ExplicitFormat::LOWER_DIAG_ROW,
                            "UPPER_DIAG_ROW" => ExplicitFormat::UPPER_DIAG_ROW,
                            "FUNCTION" => continue,
                            other => {
                                return Err(ParseError::Unsupported {
                                    what: "EDGE_WEIGHT_FORMAT",
                                    value: other.to_string(),
                                })
                            }
                        })
                    }
                    // informational keys
                    "COMMENT" | "DISPLAY_DATA_TYPE" | "NODE_COORD_TYPE" => {}
                    other => return Err(ParseError::Unsupported { what: "key", value: other.to_string() }),
                }
                continue;
            }
        };
        // Collect tokens up to the next keyword line or EOF.
        let mut toks = Vec::new();
        while let Some(next) = lines.peek() {
            let t = next.trim();
            if t == "EOF" || t.ends_with("_SECTION") || t.contains(':') {
                break;
            }
            toks.extend(t.split_whitespace().map(str::to_string));
            lines.next();
        }
        if let Some(slot) = section {
            *slot = Some(toks);
        }
    }

    let dimension = dimension.ok_or_else(|| ParseError::Invalid("missing DIMENSION".into()))?;
    if dimension < 2 {
        return Err(ParseError::Invalid(format!("DIMENSION {dimension} is too small")));
    }
    let kind = kind.ok_or_else(|| ParseError::Invalid("missing EDGE_WEIGHT_TYPE".into()))?;
    let parse_f = |t: &str, pos: usize| -> Result<f64, ParseError> {
        t.parse().map_err(|_| ParseError::Format { position: pos, message: format!("non-numeric token {t:?}") })
    };

    match kind {
        WeightKind::EXPLICIT => {
            let format = format.ok_or_else(|| ParseError::Invalid("EXPLICIT type without EDGE_WEIGHT_FORMAT".into()))?;
            let toks = weight_tokens.ok_or_else(|| ParseError::Invalid("missing EDGE_WEIGHT_SECTION".into()))?;
            let n = dimension;
            let expected = match format {
                ExplicitFormat::FULL_MATRIX => n * n,
                ExplicitFormat::UPPER_ROW => n * (n - 1) / 2,
                ExplicitFormat::LOWER_DIAG_ROW | ExplicitFormat::UPPER_DIAG_ROW => n * (n + 1) / 2,
            };
            if toks.len() != expected {
                return Err(ParseError::Invalid(format!(
                    "DIMENSION {n} with {format:?} needs {expected} weights, found {}",
                    toks.len()
                )));
            }
            let vals: Vec<f64> = toks.iter().enumerate().map(|(p, t)| parse_f(t, p + 1)).collect::<Result<_, _>>()?;
            let mut m = DMatrix::zeros(n, n);
            let mut it = vals.into_iter();
            match format {
                ExplicitFormat::FULL_MATRIX => {
                    for i in 0..n {
                        for j in 0..n {
                            m[(i, j)] = it.next().unwrap();
                        }
                    }
                }
                ExplicitFormat::UPPER_ROW => {
                    for i in 0..n {
                        for j in i + 1..n {
                            let v = it.next().unwrap();
                            m[(i, j)] = v;
                            m[(j, i)] = v;
                        }
                    }
                }
                ExplicitFormat::LOWER_DIAG_ROW => {
                    for i in 0..n {
                        for j in 0..=i {
                            let v = it.next().unwrap();
                            m[(i, j)] = v;
                            m[(j, i)] = v;
                        }
                    }
                }
                ExplicitFormat::UPPER_DIAG_ROW => {
                    for i in 0..n {
                        for j in i..n {
                            let v = it.next().unwrap();
                            m[(i, j)] = v;
                            m[(j, i)] = v;
                        }
                    }
                }
            }
            for i in 0..n {
                m[(i, i)] = 0.0;
            }
            for i in 0..n {
                for j in 0..i {
                    if m[(i, j)] != m[(j, i)] {
                        return Err(ParseError::Invalid(format!("explicit matrix is not symmetric at ({}, {})", i + 1, j + 1)));
                    }
                }
            }
            Ok(TspInstance {
                name,
                dimension: n,
                weight_kind: kind,
                coords: None,
                explicit_matrix: Some(m),
                explicit_format: Some(format),
            })
        }
        _ => {
            let toks = coord_tokens.ok_or_else(|| ParseError::Invalid("missing NODE_COORD_SECTION".into()))?;
            if toks.len() != 3 * dimension {
                return Err(ParseError::Invalid(format!(
                    "DIMENSION {dimension} needs {} coordinate tokens, found {}",
                    3 * dimension,
                    toks.len()
                )));
            }
            let mut coords = vec![(0.0, 0.0); dimension];
            let mut filled = vec![false; dimension];
            for (k, chunk) in toks.chunks(3).enumerate() {
                let id: usize = chunk[0].parse().map_err(|_| ParseError::Format {
                    position: 3 * k + 1,
                    message: format!("bad node id {:?}", chunk[0]),
                })?;
                if id == 0 || id > dimension || filled[id - 1] {
                    return Err(ParseError::Invalid(format!("node id {id} out of range or repeated")));
                }
                coords[id - 1] = (parse_f(&chunk[1], 3 * k + 2)?, parse_f(&chunk[2], 3 * k + 3)?);
                filled[id - 1] = true;
            }
            Ok(TspInstance {
                name,
                dimension,
                weight_kind: kind,
                coords: Some(coords),
                explicit_matrix: None,
                explicit_format: None,
            })
        }
    }
}

/// TSP as a QAP: `A` is the distance matrix and `B` the directed cycle
/// `1 → 2 → … → n → 1`, so that `value(σ)` is the length of the tour `σ`.
pub fn tsp_to_qap(t: &TspInstance) -> ProblemInstance {
    let n = t.dimension;
    let a = t.distance_matrix();
    let cycle: Vec<(usize, usize, f64)> = (0..n).map(|i| (i, (i + 1) % n, 1.0)).collect();
    ProblemInstance {
        name: t.name.clone(),
        a,
        b: CsrMatrix::from_triplets(n, n, &cycle),
        sense: Sense::Minimize,
        linear: None,
        known_optimum: None,
    }
}

/// Largest instance accepted by [`brute_force_qap`].
pub const BRUTE_FORCE_LIMIT: usize = 10;

/// Exhaustive search over all `n!` permutations in lexicographic order; the
/// first optimum found (the lexicographically smallest) wins ties.
pub fn brute_force_qap(inst: &ProblemInstance) -> Result<(Permutation, f64), InstanceError> {
    let n = inst.n();
    if n > BRUTE_FORCE_LIMIT {
        return Err(InstanceError::TooLarge { n, limit: BRUTE_FORCE_LIMIT });
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = perm.clone();
    let mut best_val = inst.objective(&Permutation(perm.clone()));
    while next_permutation(&mut perm) {
        let v = inst.objective(&Permutation(perm.clone()));
        if inst.sense.better(v, best_val) {
            best_val = v;
            best.copy_from_slice(&perm);
        }
    }
    Ok((Permutation(best), best_val))
}

/// Advances to the next lexicographic permutation, returning `false` after the last.
pub fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Known optimum and published reference gaps for one named instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub name: String,
    #[serde(default)]
    pub suite: Option<String>,
    pub optimum: f64,
    #[serde(default)]
    pub eig_gap: Option<f64>,
    #[serde(default)]
    pub path_gap: Option<f64>,
    #[serde(default)]
    pub csdp_bound_k2: Option<f64>,
    #[serde(default)]
    pub csdp_bound_k3: Option<f64>,
    #[serde(default)]
    pub csdp_bound_k4: Option<f64>,
    #[serde(default)]
    pub csdp_rounded_k2: Option<f64>,
    #[serde(default)]
    pub csdp_rounded_k3: Option<f64>,
    #[serde(default)]
    pub csdp_rounded_k4: Option<f64>,
}

impl RegistryEntry {
    pub fn reference_bound_gap(&self, k: usize) -> Option<f64> {
        match k {
            2 => self.csdp_bound_k2,
            3 => self.csdp_bound_k3,
            4 => self.csdp_bound_k4,
            _ => None,
        }
    }

    pub fn reference_rounded_gap(&self, k: usize) -> Option<f64> {
        match k {
            2 => self.csdp_rounded_k2,
            3 => self.csdp_rounded_k3,
            4 => self.csdp_rounded_k4,
            _ => None,
        }
    }
}

/// Instance name → optimum registry, read from CSV with a `name,optimum`
/// header plus optional reference-gap columns.
#[derive(Debug, Clone, Default)]
pub struct OptimumRegistry {
    entries: BTreeMap<String, RegistryEntry>,
}

impl OptimumRegistry {
    pub fn from_csv_str(text: &str) -> Result<Self, ParseError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let mut entries = BTreeMap::new();
        for (row, rec) in rdr.deserialize::<RegistryEntry>().enumerate() {
            let e = rec.map_err(|e| ParseError::Invalid(format!("registry row {}: {e}", row + 1)))?;
            if !(e.optimum > 0.0) {
                return Err(ParseError::Invalid(format!("registry optimum for {} must be positive", e.name)));
            }
            entries.insert(e.name.clone(), e);
        }
        Ok(Self { entries })
    }

    pub fn from_path(path: &Path) -> Result<Self, crate::Error> {
        let text = std::fs::read_to_string(path)?;
        Ok(Self::from_csv_str(&text)?)
    }

    pub fn get(&self, name: &str) -> Option<&RegistryEntry> {
        self.entries.get(name)
    }

    pub fn optimum(&self, name: &str) -> Option<f64> {
        self.get(name).map(|e| e.optimum)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &RegistryEntry> {
        self.entries.values()
    }
}
