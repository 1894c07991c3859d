//! Clique-based semidefinite relaxations of sparse quadratic assignment
//! problems, solved with a convergent three-block ADMM.
//!
//! The pipeline is: parse an instance ([`instances`]), cover the edges of its
//! structure graph with fixed-size node sets ([`cliquegraph`]), build one
//! lifted PSD variable per node set ([`sdpmodel`]), run the splitting method
//! ([`admm`]) and round the recovered doubly stochastic matrix to a
//! permutation ([`rounding`]). [`nmr`] builds the resonance-assignment
//! application on top of the same machinery.

pub mod admm;
pub mod cliquegraph;
pub mod ds;
mod error;
pub mod instances;
pub mod lap;
pub mod nmr;
pub mod pipeline;
pub mod rounding;
pub mod sdpmodel;
pub mod sparse;

pub use admm::{solve, Mode, ResidualReport, SolveError, SolveResult, SolverConfig, SolverState};
pub use cliquegraph::{clique_cover, support_graph, CliqueCover, CoverStrategy, GraphError, SupportGraph};
pub use error::{Error, Result};
pub use instances::{
    brute_force_qap, parse_qaplib, parse_tsplib, tsp_to_qap, OptimumRegistry, Permutation, ProblemInstance, Sense,
    TspInstance,
};
pub use nmr::{assign, simulate, AssignOptions, NoiseSigma, ShiftStats, SpinSystem, SpinSystemSet};
pub use pipeline::{run_pipeline, PipelineOptions, RunReport};
pub use rounding::{evaluate, gap, project_to_permutation, RoundedSolution};
pub use sdpmodel::{SdpModel, VariableLayout};
pub use sparse::CsrMatrix;
