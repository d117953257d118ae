//! Monte-Carlo estimators of population functionals, by direct simulation or
//! by the Many-to-One identity on the spinal process.
//!
//! Every functional E[Σ_u f(X^u_t, R_t)] equals R₀e^{(a−μ)t} E[f(Ŷ_t, R̂_t)/Ŷ_t]
//! under the spinal law, and the uniform-sample functional E[F(X^U_t)1{N_t>0}]
//! equals R₀e^{(a−μ)t} E[F(Ŷ_t)/(Ŷ_t N̂_t)]. The registry:
//!
//! | functional               | direct value           | spinal integrand |
//! |--------------------------|------------------------|------------------|
//! | mean_total_resource      | R_t                    | 1                |
//! | second_moment_resource   | R_t²                   | R̂_t              |
//! | variance_total_resource  | R_t², R_t (delta method) | R̂_t            |
//! | survival_probability     | 1{N_t > 0}             | 1/R̂_t            |
//! | sampled_colony_trait     | X^U_t 1{N_t > 0}       | 1/N̂_t            |
//! | mean_population_size     | N_t                    | 1/Ŷ_t            |
//! | concentration_tail(γ)    | Σ X^u 1{X^u ≥ γR_t}    | 1{Ẑ_t ≥ γ}       |
//! | sum_sq_over_r            | Σ (X^u)²/R_t           | Ẑ_t              |
//!
//! Trajectories run in fixed-size chunks whose accumulators are merged in
//! chunk order, so reports do not depend on the number of worker threads.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::direct::{DirectSimulator, TrajectoryObservables};
use crate::error::{ModelError, Result};
use crate::model::{validate, ModelParams};
use crate::oracles::mean_resource;
use crate::path::NoPath;
use crate::population::PopulationState;
use crate::rng::RngStream;
use crate::spinal::{SpinalMode, SpinalSimulator, SpinalState};

/// Trajectories per work unit.
pub const CHUNK_SIZE: u64 = 1024;

/// Spinal trajectories draw from streams with this bit set, so the two
/// methods are independent under one seed.
const SPINAL_STREAM_BIT: u64 = 1 << 63;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Functional {
    MeanTotalResource,
    SecondMomentResource,
    VarianceTotalResource,
    SurvivalProbability,
    SampledColonyTrait,
    MeanPopulationSize,
    ConcentrationTail(f64),
    SumSqOverR,
}

impl Functional {
    /// Every functional, with the given thresholds for the tail.
    pub fn registry(gammas: &[f64]) -> Vec<Functional> {
        let mut all = vec![
            Functional::MeanTotalResource,
            Functional::SecondMomentResource,
            Functional::VarianceTotalResource,
            Functional::SurvivalProbability,
            Functional::SampledColonyTrait,
            Functional::MeanPopulationSize,
        ];
        all.extend(gammas.iter().map(|&g| Functional::ConcentrationTail(g)));
        all.push(Functional::SumSqOverR);
        all
    }

    pub fn gamma(&self) -> Option<f64> {
        match *self {
            Functional::ConcentrationTail(g) => Some(g),
            _ => None,
        }
    }

    fn check(&self) -> Result<()> {
        match *self {
            Functional::ConcentrationTail(g) if !(g > 0.0 && g <= 1.0) => Err(ModelError::InvalidParameter {
                field: "gamma",
                reason: format!("gamma must lie in (0, 1], got {g}"),
            }),
            _ => Ok(()),
        }
    }

    /// Per-trajectory value under the original process. For the variance
    /// this is R_t²; the pair (R_t, R_t²) is accumulated internally.
    pub fn direct_value(&self, obs: &TrajectoryObservables) -> f64 {
        match *self {
            Functional::MeanTotalResource => obs.r_t,
            Functional::SecondMomentResource | Functional::VarianceTotalResource => obs.r_t * obs.r_t,
            Functional::SurvivalProbability => f64::from(u8::from(obs.survived)),
            Functional::SampledColonyTrait => obs.sampled_trait,
            Functional::MeanPopulationSize => obs.n_t as f64,
            Functional::ConcentrationTail(g) => obs.tail(g).unwrap_or_else(|| tail_mass_missing(g)),
            Functional::SumSqOverR => obs.sum_sq_over_r,
        }
    }

    /// Per-trajectory weighted value under the spinal process, prefactor
    /// R₀e^{(a−μ)t} included. For the variance this is the second moment.
    pub fn spinal_value(&self, state: &SpinalState) -> f64 {
        let integrand = match *self {
            Functional::MeanTotalResource => 1.0,
            Functional::SecondMomentResource | Functional::VarianceTotalResource => state.r(),
            Functional::SurvivalProbability => 1.0 / state.r(),
            Functional::SampledColonyTrait => 1.0 / state.n() as f64,
            Functional::MeanPopulationSize => 1.0 / state.spine_trait(),
            Functional::ConcentrationTail(g) => f64::from(u8::from(state.spine_fraction() >= g)),
            Functional::SumSqOverR => state.spine_fraction(),
        };
        state.many_to_one_prefactor() * integrand
    }
}

fn tail_mass_missing(gamma: f64) -> f64 {
    panic!("tail mass for gamma = {gamma} was not recorded")
}

impl fmt::Display for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Functional::MeanTotalResource => f.write_str("mean_total_resource"),
            Functional::SecondMomentResource => f.write_str("second_moment_resource"),
            Functional::VarianceTotalResource => f.write_str("variance_total_resource"),
            Functional::SurvivalProbability => f.write_str("survival_probability"),
            Functional::SampledColonyTrait => f.write_str("sampled_colony_trait"),
            Functional::MeanPopulationSize => f.write_str("mean_population_size"),
            Functional::ConcentrationTail(g) => write!(f, "concentration_tail({g})"),
            Functional::SumSqOverR => f.write_str("sum_sq_over_r"),
        }
    }
}

impl FromStr for Functional {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self> {
        let unknown = || ModelError::UnknownFunctional(s.to_owned());
        let functional = match s.trim() {
            "mean_total_resource" => Functional::MeanTotalResource,
            "second_moment_resource" => Functional::SecondMomentResource,
            "variance_total_resource" => Functional::VarianceTotalResource,
            "survival_probability" => Functional::SurvivalProbability,
            "sampled_colony_trait" => Functional::SampledColonyTrait,
            "mean_population_size" => Functional::MeanPopulationSize,
            "sum_sq_over_r" => Functional::SumSqOverR,
            other => {
                let gamma = other
                    .strip_prefix("concentration_tail(")
                    .and_then(|rest| rest.strip_suffix(')'))
                    .ok_or_else(unknown)?;
                Functional::ConcentrationTail(gamma.trim().parse().map_err(|_| unknown())?)
            }
        };
        functional.check()?;
        Ok(functional)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    Direct,
    #[default]
    Spinal,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Direct => "direct",
            Method::Spinal => "spinal",
        })
    }
}

impl FromStr for Method {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Method::Direct),
            "spinal" => Ok(Method::Spinal),
            other => Err(ModelError::InvalidParameter {
                field: "method",
                reason: format!("method must be direct or spinal, got {other}"),
            }),
        }
    }
}

/// Running count, means, second central moments and co-moment of a pair of
/// samples. Merging follows Chan et al., so any fixed merge order gives the
/// same result as a single pass up to rounding.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PairAccumulator {
    n: u64,
    mean_x: f64,
    mean_y: f64,
    m2_x: f64,
    m2_y: f64,
    c_xy: f64,
}

impl PairAccumulator {
    pub fn push(&mut self, x: f64, y: f64) {
        self.n += 1;
        let n = self.n as f64;
        let dx = x - self.mean_x;
        let dy = y - self.mean_y;
        self.mean_x += dx / n;
        self.mean_y += dy / n;
        self.m2_x += dx * (x - self.mean_x);
        self.m2_y += dy * (y - self.mean_y);
        self.c_xy += dx * (y - self.mean_y);
    }

    pub fn merge(&mut self, other: &PairAccumulator) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        let dx = other.mean_x - self.mean_x;
        let dy = other.mean_y - self.mean_y;
        self.mean_x += dx * nb / n;
        self.mean_y += dy * nb / n;
        self.m2_x += other.m2_x + dx * dx * na * nb / n;
        self.m2_y += other.m2_y + dy * dy * na * nb / n;
        self.c_xy += other.c_xy + dx * dy * na * nb / n;
        self.n += other.n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean_x(&self) -> f64 {
        self.mean_x
    }

    pub fn mean_y(&self) -> f64 {
        self.mean_y
    }

    /// Unbiased sample variance of x.
    pub fn var_x(&self) -> f64 {
        self.m2_x / (self.n as f64 - 1.0)
    }

    pub fn var_y(&self) -> f64 {
        self.m2_y / (self.n as f64 - 1.0)
    }

    pub fn cov_xy(&self) -> f64 {
        self.c_xy / (self.n as f64 - 1.0)
    }
}

/// Per-functional tallies for one chunk.
#[derive(Debug, Clone, Default)]
struct Tally {
    moments: PairAccumulator,
    non_finite: u64,
    f32_overflows: u64,
}

impl Tally {
    fn push(&mut self, x: f64, y: f64) {
        if !x.is_finite() || !y.is_finite() {
            self.non_finite += 1;
        }
        if (x as f32).is_infinite() || (y as f32).is_infinite() {
            self.f32_overflows += 1;
        }
        self.moments.push(x, y);
    }

    fn merge(&mut self, other: &Tally) {
        self.moments.merge(&other.moments);
        self.non_finite += other.non_finite;
        self.f32_overflows += other.f32_overflows;
    }
}

/// Result of one estimator run.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub estimate: f64,
    /// Per-trajectory variance; for the delta-method variance estimate this is
    /// the variance of the influence values.
    pub sample_variance: f64,
    pub std_error: f64,
    pub n_traj: u64,
    pub wall_ms: f64,
    pub method: Method,
    pub functional: Functional,
    pub seed: u64,
    pub t: f64,
    /// Trajectories whose contribution was infinite or NaN.
    pub non_finite: u64,
    /// Trajectories whose contribution would overflow single precision.
    pub f32_overflows: u64,
}

/// Knobs beyond the core inputs of [`estimate`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EstimatorOptions {
    pub spinal_mode: SpinalMode,
}

/// Estimates one functional at time `t` from `n_traj` trajectories.
pub fn estimate(
    functional: Functional,
    method: Method,
    params: &ModelParams,
    init: &PopulationState,
    t: f64,
    n_traj: u64,
    seed: u64,
) -> Result<EstimateReport> {
    let mut reports = estimate_many(
        &[functional],
        method,
        params,
        init,
        t,
        n_traj,
        seed,
        EstimatorOptions::default(),
    )?;
    Ok(reports.remove(0))
}

/// Estimates several functionals from one shared set of trajectories.
#[allow(clippy::too_many_arguments)]
pub fn estimate_many(
    functionals: &[Functional],
    method: Method,
    params: &ModelParams,
    init: &PopulationState,
    t: f64,
    n_traj: u64,
    seed: u64,
    options: EstimatorOptions,
) -> Result<Vec<EstimateReport>> {
    validate(params)?;
    if n_traj < 2 {
        return Err(ModelError::TooFewTrajectories(n_traj as usize));
    }
    if init.is_extinct() {
        return Err(ModelError::EmptyPopulation);
    }
    if !(t >= init.time()) || !t.is_finite() {
        return Err(ModelError::EndBeforeStart {
            time: init.time(),
            t_end: t,
        });
    }
    for f in functionals {
        f.check()?;
    }
    let start = Instant::now();
    let tallies = match method {
        Method::Direct => run_direct(functionals, params, init, t, n_traj, seed)?,
        Method::Spinal => run_spinal(functionals, params, init, t, n_traj, seed, options.spinal_mode)?,
    };
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let exact_mean = mean_resource(init.r(), params.a, params.mu, t - init.time());
    Ok(functionals
        .iter()
        .zip(tallies)
        .map(|(&functional, tally)| {
            let (estimate, sample_variance) = summarize(functional, method, &tally.moments, exact_mean);
            EstimateReport {
                estimate,
                sample_variance,
                std_error: (sample_variance / n_traj as f64).sqrt(),
                n_traj,
                wall_ms,
                method,
                functional,
                seed,
                t,
                non_finite: tally.non_finite,
                f32_overflows: tally.f32_overflows,
            }
        })
        .collect())
}

/// Point estimate and per-trajectory variance.
fn summarize(functional: Functional, method: Method, m: &PairAccumulator, exact_mean: f64) -> (f64, f64) {
    match (functional, method) {
        (Functional::VarianceTotalResource, Method::Direct) => {
            // Var = E[R²] − E[R]², gradient (1, −2E[R]) on (R², R)
            let mean_r = m.mean_y();
            let estimate = m.mean_x() - mean_r * mean_r;
            let g = -2.0 * mean_r;
            let influence = m.var_x() + 2.0 * g * m.cov_xy() + g * g * m.var_y();
            (estimate, influence.max(0.0))
        }
        // E[R_t] is exact under the spinal law; only E[R²] is random
        (Functional::VarianceTotalResource, Method::Spinal) => (m.mean_x() - exact_mean * exact_mean, m.var_x()),
        _ => (m.mean_x(), m.var_x()),
    }
}

fn chunks(n_traj: u64) -> Vec<(u64, u64)> {
    (0..n_traj.div_ceil(CHUNK_SIZE))
        .map(|c| (c * CHUNK_SIZE, ((c + 1) * CHUNK_SIZE).min(n_traj)))
        .collect()
}

fn merge_in_order(per_chunk: Vec<Vec<Tally>>, width: usize) -> Vec<Tally> {
    let mut total = vec![Tally::default(); width];
    for chunk in &per_chunk {
        for (acc, part) in total.iter_mut().zip(chunk) {
            acc.merge(part);
        }
    }
    total
}

fn run_direct(
    functionals: &[Functional],
    params: &ModelParams,
    init: &PopulationState,
    t: f64,
    n_traj: u64,
    seed: u64,
) -> Result<Vec<Tally>> {
    let sim = DirectSimulator::new(params)?;
    let gammas: Vec<f64> = functionals.iter().filter_map(Functional::gamma).collect();
    let per_chunk = chunks(n_traj)
        .into_par_iter()
        .map(|(lo, hi)| {
            let mut tallies = vec![Tally::default(); functionals.len()];
            for index in lo..hi {
                let mut rng = RngStream::new(seed, index);
                let (state, extinction) = sim.run(init, t, &mut rng, &mut NoPath)?;
                let obs = TrajectoryObservables::from_state(&state, &gammas, extinction, &mut rng);
                for (tally, f) in tallies.iter_mut().zip(functionals) {
                    let x = f.direct_value(&obs);
                    let y = if *f == Functional::VarianceTotalResource {
                        obs.r_t
                    } else {
                        0.0
                    };
                    tally.push(x, y);
                }
            }
            Ok(tallies)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(merge_in_order(per_chunk, functionals.len()))
}

fn run_spinal(
    functionals: &[Functional],
    params: &ModelParams,
    init: &PopulationState,
    t: f64,
    n_traj: u64,
    seed: u64,
    mode: SpinalMode,
) -> Result<Vec<Tally>> {
    let sim = SpinalSimulator::new(params, mode)?;
    let per_chunk = chunks(n_traj)
        .into_par_iter()
        .map(|(lo, hi)| {
            let mut tallies = vec![Tally::default(); functionals.len()];
            for index in lo..hi {
                let mut rng = RngStream::new(seed, index | SPINAL_STREAM_BIT);
                let state = sim.run(init, t, &mut rng, &mut NoPath)?;
                for (tally, f) in tallies.iter_mut().zip(functionals) {
                    tally.push(f.spinal_value(&state), 0.0);
                }
            }
            Ok(tallies)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(merge_in_order(per_chunk, functionals.len()))
}

/// Side-by-side run of both estimators on one functional.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub direct: EstimateReport,
    pub spinal: EstimateReport,
    /// Analytic value if one exists, otherwise the inverse-variance pooled
    /// estimate of the two methods.
    pub reference: f64,
    pub reference_is_analytic: bool,
    pub relative_error_direct: f64,
    pub relative_error_spinal: f64,
    /// (variance × seconds per trajectory) of direct over spinal; above 1
    /// means the spinal estimator reaches a given precision faster.
    pub efficiency_ratio: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn compare_methods(
    functional: Functional,
    params: &ModelParams,
    init: &PopulationState,
    t: f64,
    n_traj_direct: u64,
    n_traj_spinal: u64,
    seed: u64,
) -> Result<Comparison> {
    let direct = estimate(functional, Method::Direct, params, init, t, n_traj_direct, seed)?;
    let spinal = estimate(functional, Method::Spinal, params, init, t, n_traj_spinal, seed)?;
    let analytic = match functional {
        Functional::MeanTotalResource => Some(mean_resource(init.r(), params.a, params.mu, t - init.time())),
        _ => None,
    };
    let reference = analytic.unwrap_or_else(|| pooled(&direct, &spinal));
    let relative = |r: &EstimateReport| ((r.estimate - reference) / reference).abs();
    Ok(Comparison {
        relative_error_direct: relative(&direct),
        relative_error_spinal: relative(&spinal),
        efficiency_ratio: cost(&direct) / cost(&spinal),
        reference,
        reference_is_analytic: analytic.is_some(),
        direct,
        spinal,
    })
}

fn cost(report: &EstimateReport) -> f64 {
    report.sample_variance * report.wall_ms / report.n_traj as f64
}

fn pooled(a: &EstimateReport, b: &EstimateReport) -> f64 {
    let (va, vb) = (a.std_error * a.std_error, b.std_error * b.std_error);
    match (va > 0.0, vb > 0.0) {
        (true, true) => (a.estimate / va + b.estimate / vb) / (1.0 / va + 1.0 / vb),
        (false, _) => a.estimate,
        (true, false) => b.estimate,
    }
}
