//! Simulation and Many-to-One estimation for a branching diffusion of
//! colonies that split at a rate proportional to their share of the total
//! resource, under correlated environmental noise.
//!
//! Two simulators are provided: [`direct`] for the population itself and
//! [`spinal`] for the size-biased spine process. [`estimators`] pairs every
//! population functional with a weighted spinal estimator, and [`oracles`]
//! holds the closed-form quantities and bounds used to check both.

// `!(x > 0.0)` style tests are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod direct;
pub mod dynamics;
pub mod error;
pub mod estimators;
pub mod model;
pub mod oracles;
pub mod path;
pub mod population;
pub mod quadrature;
pub mod rng;
pub mod spinal;

pub use direct::{sample_uniform_colony, simulate_direct, DirectSimulator, TrajectoryObservables};
pub use dynamics::{advance_traits, apply_increment, DriftMode, ModeAssignment, NoiseIncrement};
pub use error::{ModelError, Result};
pub use estimators::{
    compare_methods, estimate, estimate_many, Comparison, EstimateReport, EstimatorOptions, Functional, Method,
};
pub use model::{alpha_beta, split_moments, validate, ModelParams, SplitLaw, SplitMoments};
pub use oracles::{BoundPair, OracleRow};
pub use path::{NoPath, PathRecorder, PathRow, PathSink};
pub use population::{Colony, Label, PopulationState};
pub use rng::RngStream;
pub use spinal::{choose_initial_spine, simulate_spinal, spine_fraction, SpinalMode, SpinalSimulator, SpinalState};
