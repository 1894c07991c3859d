//! Fixtures shared by the benchmarks.

use nalgebra::DMatrix;
use qapsdp_core::{parse_tsplib, tsp_to_qap, ProblemInstance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Symmetric matrix with uniform entries in [-1, 1].
pub fn random_symmetric(d: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    (&m + m.transpose()) * 0.5
}

/// One of the bundled TSPLIB instances as a QAP.
pub fn tsplib(name: &str) -> ProblemInstance {
    let path = format!("{}/../../data/instances/tsplib/{name}.tsp", env!("CARGO_MANIFEST_DIR"));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"));
    let mut inst = tsp_to_qap(&parse_tsplib(&text).expect("bundled file parses"));
    inst.name = name.to_string();
    inst
}
