//! Event-driven simulation of the original colonial process.
//!
//! While the population is alive the total fission rate is Σ λx/R = λ and the
//! total death rate is μN, so inter-event times are exactly exponential with
//! rate λ + μN. Traits are carried to each event time by the exact lognormal
//! transition, then the event is resolved against the post-diffusion traits.

use rand::Rng;
use rand_distr::Exp1;

use crate::dynamics::{DriftMode, ModeAssignment, TraitKernel};
use crate::error::{ModelError, Result};
use crate::model::{validate, ModelParams, SplitSampler};
use crate::path::{GridCursor, NoPath, PathSink};
use crate::population::{Label, PopulationState};

/// Terminal functionals of one direct trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryObservables {
    /// Whether any colony is alive at the end time.
    pub survived: bool,
    pub n_t: usize,
    pub r_t: f64,
    pub sup_trait: f64,
    /// Σ x² / R.
    pub sum_sq_over_r: f64,
    /// Trait of one colony chosen uniformly at random, 0 if extinct.
    pub sampled_trait: f64,
    /// `(γ, Σ x·1{x/R ≥ γ})` for every requested γ.
    pub tail_mass: Vec<(f64, f64)>,
    /// Time at which the last colony died, if it did.
    pub extinction_time: Option<f64>,
}

impl TrajectoryObservables {
    pub fn from_state<R: Rng + ?Sized>(
        state: &PopulationState,
        gammas: &[f64],
        extinction_time: Option<f64>,
        rng: &mut R,
    ) -> Self {
        let r = state.r();
        let sampled_trait = sample_uniform_index(state, rng)
            .map(|i| state.colonies()[i].trait_value)
            .unwrap_or(0.0);
        let tail_mass = gammas
            .iter()
            .map(|&gamma| {
                let mass = if state.is_extinct() {
                    0.0
                } else {
                    state.traits().filter(|&x| x / r >= gamma).sum()
                };
                (gamma, mass)
            })
            .collect();
        Self {
            survived: !state.is_extinct(),
            n_t: state.n(),
            r_t: r,
            sup_trait: state.sup_trait(),
            sum_sq_over_r: state.sum_sq_over_r(),
            sampled_trait,
            tail_mass,
            extinction_time,
        }
    }

    /// Mass above the given threshold, if it was requested.
    pub fn tail(&self, gamma: f64) -> Option<f64> {
        self.tail_mass.iter().find(|(g, _)| *g == gamma).map(|&(_, mass)| mass)
    }
}

/// Validated simulator for repeated trajectories with one parameter set.
#[derive(Debug, Clone)]
pub struct DirectSimulator {
    params: ModelParams,
    kernel: TraitKernel,
    split: SplitSampler,
}

impl DirectSimulator {
    pub fn new(params: &ModelParams) -> Result<Self> {
        validate(params)?;
        Ok(Self {
            params: *params,
            kernel: TraitKernel::new(params),
            split: params.split_law.sampler(),
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Runs one trajectory to `t_end`. Returns the final state and the
    /// extinction time, if extinction happened.
    pub fn run<R: Rng + ?Sized, S: PathSink>(
        &self,
        init: &PopulationState,
        t_end: f64,
        rng: &mut R,
        sink: &mut S,
    ) -> Result<(PopulationState, Option<f64>)> {
        if !(t_end >= init.time()) || !t_end.is_finite() {
            return Err(ModelError::EndBeforeStart {
                time: init.time(),
                t_end,
            });
        }
        let lambda = self.params.lambda;
        let mu = self.params.mu;
        let mut state = init.clone();
        let mut extinction_time = None;
        let mut grid = GridCursor::new(sink.grid_step(), state.time());
        sink.record(&state, None);
        loop {
            if state.is_extinct() {
                state.freeze_extinct(t_end);
                break;
            }
            let n = state.n();
            let total_rate = lambda + mu * n as f64;
            let tau: f64 = rng.sample::<f64, _>(Exp1) / total_rate;
            let event_time = state.time() + tau;
            if event_time >= t_end {
                if !self.advance_to(&mut state, t_end, rng, sink, &mut grid) {
                    sink.record(&state, None);
                }
                break;
            }
            self.advance_to(&mut state, event_time, rng, sink, &mut grid);
            if rng.random::<f64>() * total_rate < lambda {
                let level = rng.random::<f64>() * state.r();
                let index = state.select_by_trait(level);
                let theta = self.split.sample(rng);
                state.split(index, theta);
            } else {
                let index = rng.random_range(0..n);
                state.remove(index);
                if state.is_extinct() {
                    extinction_time = Some(event_time);
                }
            }
            sink.record(&state, None);
        }
        Ok((state, extinction_time))
    }

    fn advance_to<R: Rng + ?Sized, S: PathSink>(
        &self,
        state: &mut PopulationState,
        target: f64,
        rng: &mut R,
        sink: &mut S,
        grid: &mut Option<GridCursor>,
    ) -> bool {
        let modes = ModeAssignment::All(DriftMode::Direct);
        let mut recorded_target = false;
        if let Some(cursor) = grid.as_mut() {
            while let Some(g) = cursor.next_before(target) {
                if g > state.time() {
                    self.kernel.advance(state, g - state.time(), modes, rng);
                    state.set_time(g);
                    sink.record(state, None);
                    recorded_target = g == target;
                }
            }
        }
        self.kernel.advance(state, target - state.time(), modes, rng);
        state.set_time(target);
        recorded_target
    }
}

/// Simulates one direct trajectory and its terminal observables.
pub fn simulate_direct<R: Rng + ?Sized>(
    params: &ModelParams,
    init: &PopulationState,
    t_end: f64,
    gammas: &[f64],
    rng: &mut R,
) -> Result<(PopulationState, TrajectoryObservables)> {
    let sim = DirectSimulator::new(params)?;
    let (state, extinction) = sim.run(init, t_end, rng, &mut NoPath)?;
    let obs = TrajectoryObservables::from_state(&state, gammas, extinction, rng);
    Ok((state, obs))
}

/// Uniformly chosen living colony, `None` if extinct.
pub fn sample_uniform_colony<R: Rng + ?Sized>(state: &PopulationState, rng: &mut R) -> Option<Label> {
    sample_uniform_index(state, rng).map(|i| state.colonies()[i].label.clone())
}

fn sample_uniform_index<R: Rng + ?Sized>(state: &PopulationState, rng: &mut R) -> Option<usize> {
    if state.is_extinct() {
        None
    } else {
        Some(rng.random_range(0..state.n()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SplitLaw;
    use crate::path::PathRecorder;
    use crate::rng::RngStream;

    #[test]
    fn noiseless_immortal_mass_is_deterministic() {
        let p = ModelParams::new(1.3, 0.0, 0.0, 2.0, 0.0, SplitLaw::Uniform).unwrap();
        let init = PopulationState::uniform(1, 1.0).unwrap();
        for seed in 0..20 {
            let mut rng = RngStream::new(seed, 0);
            let (state, obs) = simulate_direct(&p, &init, 1.0, &[], &mut rng).unwrap();
            assert!(state.n() >= 1);
            assert!(((obs.r_t - 1.3f64.exp()) / 1.3f64.exp()).abs() < 1e-12);
            assert!(state.audit().is_ok());
        }
    }

    #[test]
    fn rejects_end_before_start() {
        let p = ModelParams::default();
        let init = PopulationState::new(2.0, &[1.0]).unwrap();
        let mut rng = RngStream::new(0, 0);
        assert!(matches!(
            simulate_direct(&p, &init, 1.0, &[], &mut rng),
            Err(ModelError::EndBeforeStart { .. })
        ));
        let mut bad = p;
        bad.lambda = -1.0;
        assert!(simulate_direct(&bad, &init, 3.0, &[], &mut rng).is_err());
    }

    #[test]
    fn extinct_trajectory_freezes() {
        let p = ModelParams::new(1.0, 0.5, 0.5, 0.1, 5.0, SplitLaw::Uniform).unwrap();
        let init = PopulationState::uniform(1, 1.0).unwrap();
        let mut extinct = 0;
        for seed in 0..200 {
            let mut rng = RngStream::new(seed, 3);
            let (state, obs) = simulate_direct(&p, &init, 10.0, &[0.5], &mut rng).unwrap();
            if !obs.survived {
                extinct += 1;
                assert_eq!(state.time(), 10.0);
                assert_eq!(obs.r_t, 0.0);
                assert_eq!(obs.sampled_trait, 0.0);
                assert_eq!(obs.tail(0.5), Some(0.0));
                let te = obs.extinction_time.unwrap();
                assert!(te > 0.0 && te < 10.0);
            }
        }
        assert!(extinct > 150);
    }

    #[test]
    fn observables_are_ordered() {
        let p = ModelParams::new(1.0, 1.0, 0.5, 3.0, 0.5, SplitLaw::Uniform).unwrap();
        let init = PopulationState::uniform(3, 3.0).unwrap();
        for seed in 0..200 {
            let mut rng = RngStream::new(seed, 0);
            let (state, obs) = simulate_direct(&p, &init, 2.0, &[0.0, 0.5, 1.0], &mut rng).unwrap();
            assert!(state.audit().is_ok());
            assert!(obs.sum_sq_over_r <= obs.sup_trait * (1.0 + 1e-12));
            assert!(obs.sup_trait <= obs.r_t * (1.0 + 1e-12));
            if obs.survived {
                assert!((obs.tail(0.0).unwrap() - obs.r_t).abs() <= 1e-9 * obs.r_t);
            }
        }
    }

    #[test]
    fn uniform_colony_sampling_edge_cases() {
        let mut rng = RngStream::new(5, 0);
        let single = PopulationState::uniform(1, 2.0).unwrap();
        assert_eq!(sample_uniform_colony(&single, &mut rng), Some(Label::root(1)));
        let mut empty = single.clone();
        empty.remove(0);
        assert_eq!(sample_uniform_colony(&empty, &mut rng), None);
    }

    #[test]
    fn path_recording_hits_grid_and_events() {
        let p = ModelParams::new(1.0, 0.3, 0.3, 2.0, 0.5, SplitLaw::Uniform).unwrap();
        let init = PopulationState::uniform(2, 2.0).unwrap();
        let sim = DirectSimulator::new(&p).unwrap();
        let mut rec = PathRecorder::new(Some(0.25));
        let mut rng = RngStream::new(9, 0);
        let (state, _) = sim.run(&init, 2.0, &mut rng, &mut rec).unwrap();
        let times: Vec<f64> = rec.rows().iter().map(|r| r.time).collect();
        assert_eq!(times[0], 0.0);
        if !state.is_extinct() {
            for k in 1..=8 {
                let g = k as f64 * 0.25;
                assert!(times.contains(&g), "missing grid time {g}");
            }
        }
        assert!(times.windows(2).all(|w| w[0] <= w[1]));
        assert!(rec.rows().iter().all(|r| r.spine.is_none()));
    }
}
