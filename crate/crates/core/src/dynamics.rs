//! Exact transitions of the correlated geometric Brownian trait dynamics
//! between branching events.
//!
//! Over an interval of length `dt` every colony trait is multiplied by
//! `exp((drift - σ²/2) dt + σ/√(1+δ²) (ΔB_u + δ ΔW))`, with one environmental
//! increment ΔW shared by the whole population and one intrinsic increment
//! ΔB_u per colony.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{ModelError, Result};
use crate::model::ModelParams;
use crate::population::PopulationState;

/// Which deterministic drift a colony follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriftMode {
    /// Original process: drift a.
    Direct,
    /// The spine of the biased process: drift a + σ².
    SpinalSpine,
    /// Any other colony of the biased process: drift a + σ²δ²/(1+δ²).
    SpinalNonSpine,
}

impl DriftMode {
    pub fn drift(self, params: &ModelParams) -> f64 {
        match self {
            DriftMode::Direct => params.a,
            DriftMode::SpinalSpine => params.a + params.sigma * params.sigma,
            DriftMode::SpinalNonSpine => params.a + params.environmental_variance(),
        }
    }
}

/// Mode of every colony for one call to [`advance_traits`].
#[derive(Debug, Clone, Copy)]
pub enum ModeAssignment<'a> {
    /// Same mode for every colony.
    All(DriftMode),
    /// Colony `spine` follows the spine drift, all others the non-spine drift.
    Spinal { spine: usize },
    /// One mode per colony, in population order.
    PerColony(&'a [DriftMode]),
}

impl ModeAssignment<'_> {
    fn check(&self, n: usize) -> Result<()> {
        match *self {
            ModeAssignment::All(_) => Ok(()),
            ModeAssignment::Spinal { spine } if spine < n => Ok(()),
            ModeAssignment::Spinal { spine } => Err(ModelError::InvalidSpine(spine)),
            ModeAssignment::PerColony(modes) if modes.len() == n => Ok(()),
            ModeAssignment::PerColony(modes) => Err(ModelError::ModeAssignmentMismatch {
                given: modes.len(),
                expected: n,
            }),
        }
    }

    fn mode(&self, index: usize) -> DriftMode {
        match *self {
            ModeAssignment::All(mode) => mode,
            ModeAssignment::Spinal { spine } if spine == index => DriftMode::SpinalSpine,
            ModeAssignment::Spinal { .. } => DriftMode::SpinalNonSpine,
            ModeAssignment::PerColony(modes) => modes[index],
        }
    }
}

/// Gaussian increments driving one transition.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseIncrement {
    /// Shared environmental increment ΔW ~ N(0, dt).
    pub d_w: f64,
    /// Intrinsic increments ΔB_u ~ N(0, dt), one per colony.
    pub d_b: Vec<f64>,
}

impl NoiseIncrement {
    pub fn sample<R: Rng + ?Sized>(colonies: usize, dt: f64, rng: &mut R) -> Self {
        let sd = dt.sqrt();
        let d_w = sd * rng.sample::<f64, _>(StandardNormal);
        let d_b = (0..colonies)
            .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Self { d_w, d_b }
    }
}

/// Precomputed per-parameter constants of the lognormal transition.
#[derive(Debug, Clone, Copy)]
pub(crate) struct TraitKernel {
    scale: f64,
    env_scale: f64,
    log_drift_direct: f64,
    log_drift_spine: f64,
    log_drift_nonspine: f64,
    noiseless: bool,
}

impl TraitKernel {
    pub(crate) fn new(params: &ModelParams) -> Self {
        let half_var = 0.5 * params.sigma * params.sigma;
        let scale = params.noise_scale();
        Self {
            scale,
            env_scale: scale * params.delta,
            log_drift_direct: DriftMode::Direct.drift(params) - half_var,
            log_drift_spine: DriftMode::SpinalSpine.drift(params) - half_var,
            log_drift_nonspine: DriftMode::SpinalNonSpine.drift(params) - half_var,
            noiseless: params.sigma == 0.0,
        }
    }

    fn log_drift(&self, mode: DriftMode) -> f64 {
        match mode {
            DriftMode::Direct => self.log_drift_direct,
            DriftMode::SpinalSpine => self.log_drift_spine,
            DriftMode::SpinalNonSpine => self.log_drift_nonspine,
        }
    }

    /// Samples and applies the transition in place; no validation.
    pub(crate) fn advance<R: Rng + ?Sized>(
        &self,
        state: &mut PopulationState,
        dt: f64,
        modes: ModeAssignment<'_>,
        rng: &mut R,
    ) {
        let end = state.time() + dt;
        if dt > 0.0 && !state.is_extinct() {
            let sd = dt.sqrt();
            let common = if self.noiseless {
                0.0
            } else {
                self.env_scale * sd * rng.sample::<f64, _>(StandardNormal)
            };
            let mut total = 0.0;
            for (i, colony) in state.colonies_mut().iter_mut().enumerate() {
                let mut exponent = self.log_drift(modes.mode(i)) * dt + common;
                if !self.noiseless {
                    exponent += self.scale * sd * rng.sample::<f64, _>(StandardNormal);
                }
                colony.trait_value = positive(colony.trait_value * exponent.exp());
                total += colony.trait_value;
            }
            state.set_total(total);
        }
        state.set_time(end);
    }

    fn apply(&self, state: &mut PopulationState, dt: f64, modes: ModeAssignment<'_>, noise: &NoiseIncrement) {
        let common = self.env_scale * noise.d_w;
        let mut total = 0.0;
        for (i, colony) in state.colonies_mut().iter_mut().enumerate() {
            let exponent = self.log_drift(modes.mode(i)) * dt + common + self.scale * noise.d_b[i];
            colony.trait_value = positive(colony.trait_value * exponent.exp());
            total += colony.trait_value;
        }
        state.set_total(total);
        let end = state.time() + dt;
        state.set_time(end);
    }
}

/// Traits are kept strictly positive when the exponential underflows.
#[inline]
fn positive(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        f64::MIN_POSITIVE
    }
}

fn check_call(state: &PopulationState, dt: f64, modes: &ModeAssignment<'_>) -> Result<()> {
    if !(dt >= 0.0) {
        return Err(ModelError::NegativeTimeStep(dt));
    }
    if state.is_extinct() {
        return Err(ModelError::EmptyPopulation);
    }
    modes.check(state.n())
}

/// Advances every trait by `dt` with freshly sampled noise.
pub fn advance_traits<R: Rng + ?Sized>(
    state: &mut PopulationState,
    params: &ModelParams,
    dt: f64,
    modes: ModeAssignment<'_>,
    rng: &mut R,
) -> Result<()> {
    check_call(state, dt, &modes)?;
    TraitKernel::new(params).advance(state, dt, modes, rng);
    Ok(())
}

/// Deterministic transition for given increments.
pub fn apply_increment(
    state: &mut PopulationState,
    params: &ModelParams,
    dt: f64,
    modes: ModeAssignment<'_>,
    noise: &NoiseIncrement,
) -> Result<()> {
    check_call(state, dt, &modes)?;
    if noise.d_b.len() != state.n() {
        return Err(ModelError::ModeAssignmentMismatch {
            given: noise.d_b.len(),
            expected: state.n(),
        });
    }
    TraitKernel::new(params).apply(state, dt, modes, noise);
    Ok(())
}
