//! The ψ-spine process for ψ(x) = x.
//!
//! One distinguished colony, the spine, never dies and diffuses with drift
//! a + σ²; the other colonies diffuse with drift a + σ²δ²/(1+δ²) and die at
//! rate μ. Colonies split at rate λx/R̂ as in the original process. When the
//! spine splits, the new spine is a child picked proportionally to its trait.
//!
//! The state carries ∫ 𝒢ψ/ψ ds, which for ψ(x) = x is the constant a − μ
//! integrated over time; `R̂₀ exp(∫ 𝒢ψ/ψ ds)` is the Many-to-One prefactor.

use rand::Rng;
use rand_distr::Exp1;

use crate::dynamics::{ModeAssignment, TraitKernel};
use crate::error::{ModelError, Result};
use crate::model::{validate, ModelParams, SplitSampler};
use crate::path::{GridCursor, NoPath, PathSink};
use crate::population::{Label, PopulationState};

/// Inflation of the thinning proposal rate over the true event rate.
pub const THINNING_INFLATION: f64 = 1.5;

/// How inter-event times are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpinalMode {
    /// Exponential times at the exact total rate λ + μ(N̂ − 1).
    #[default]
    Exact,
    /// Proposals at an inflated rate, accepted with probability true/proposed.
    Thinning,
}

/// A spinal population together with its weight accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinalState {
    pub base: PopulationState,
    spine: usize,
    g_psi_integral: f64,
    compensation: f64,
    initial_mass: f64,
}

impl SpinalState {
    /// Starts a spinal state with the given spine index.
    pub fn new(base: PopulationState, spine: usize) -> Result<Self> {
        if spine >= base.n() {
            return Err(ModelError::InvalidSpine(spine));
        }
        let initial_mass = base.r();
        Ok(Self {
            base,
            spine,
            g_psi_integral: 0.0,
            compensation: 0.0,
            initial_mass,
        })
    }

    pub fn spine_index(&self) -> usize {
        self.spine
    }

    pub fn spine_label(&self) -> &Label {
        &self.base.colonies()[self.spine].label
    }

    /// Ŷ, the spine's trait.
    pub fn spine_trait(&self) -> f64 {
        self.base.colonies()[self.spine].trait_value
    }

    /// N̂.
    pub fn n(&self) -> usize {
        self.base.n()
    }

    /// R̂.
    pub fn r(&self) -> f64 {
        self.base.r()
    }

    pub fn time(&self) -> f64 {
        self.base.time()
    }

    /// Accumulated ∫ 𝒢ψ/ψ ds.
    pub fn g_psi_integral(&self) -> f64 {
        self.g_psi_integral + self.compensation
    }

    /// R̂ at the start of the trajectory, ⟨ν₀, ψ⟩.
    pub fn initial_mass(&self) -> f64 {
        self.initial_mass
    }

    /// ⟨ν₀, ψ⟩ exp(∫ 𝒢ψ/ψ ds) = R₀e^{(a−μ)t}.
    pub fn many_to_one_prefactor(&self) -> f64 {
        self.initial_mass * self.g_psi_integral().exp()
    }

    /// Ẑ = Ŷ / R̂.
    pub fn spine_fraction(&self) -> f64 {
        spine_fraction(self)
    }

    /// Neumaier-compensated accumulation of `rate · dt`.
    fn accumulate(&mut self, rate: f64, dt: f64) {
        let term = rate * dt;
        let sum = self.g_psi_integral + term;
        if self.g_psi_integral.abs() >= term.abs() {
            self.compensation += (self.g_psi_integral - sum) + term;
        } else {
            self.compensation += (term - sum) + self.g_psi_integral;
        }
        self.g_psi_integral = sum;
    }
}

/// Fraction of the total resource held by the spine, in (0, 1].
pub fn spine_fraction(state: &SpinalState) -> f64 {
    if state.n() == 1 {
        return 1.0;
    }
    (state.spine_trait() / state.r()).min(1.0)
}

/// Picks the initial spine with probability proportional to its trait.
pub fn choose_initial_spine<R: Rng + ?Sized>(init: &PopulationState, rng: &mut R) -> Result<Label> {
    let index = choose_initial_spine_index(init, rng)?;
    Ok(init.colonies()[index].label.clone())
}

fn choose_initial_spine_index<R: Rng + ?Sized>(init: &PopulationState, rng: &mut R) -> Result<usize> {
    if init.is_extinct() {
        return Err(ModelError::EmptyPopulation);
    }
    if init.n() == 1 {
        return Ok(0);
    }
    Ok(init.select_by_trait(rng.random::<f64>() * init.r()))
}

/// Validated spinal simulator for repeated trajectories.
#[derive(Debug, Clone)]
pub struct SpinalSimulator {
    params: ModelParams,
    kernel: TraitKernel,
    split: SplitSampler,
    mode: SpinalMode,
    g_psi_rate: f64,
}

impl SpinalSimulator {
    pub fn new(params: &ModelParams, mode: SpinalMode) -> Result<Self> {
        validate(params)?;
        Ok(Self {
            params: *params,
            kernel: TraitKernel::new(params),
            split: params.split_law.sampler(),
            mode,
            g_psi_rate: params.a - params.mu,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn mode(&self) -> SpinalMode {
        self.mode
    }

    /// Chooses the initial spine and runs one trajectory to `t_end`.
    pub fn run<R: Rng + ?Sized, S: PathSink>(
        &self,
        init: &PopulationState,
        t_end: f64,
        rng: &mut R,
        sink: &mut S,
    ) -> Result<SpinalState> {
        if !(t_end >= init.time()) || !t_end.is_finite() {
            return Err(ModelError::EndBeforeStart {
                time: init.time(),
                t_end,
            });
        }
        let spine = choose_initial_spine_index(init, rng)?;
        let mut state = SpinalState::new(init.clone(), spine)?;
        let mut grid = GridCursor::new(sink.grid_step(), state.time());
        sink.record(&state.base, Some(state.spine));
        let lambda = self.params.lambda;
        let mu = self.params.mu;
        loop {
            let rate = lambda + mu * (state.n() - 1) as f64;
            let proposal_rate = match self.mode {
                SpinalMode::Exact => rate,
                SpinalMode::Thinning => THINNING_INFLATION * rate,
            };
            let tau: f64 = rng.sample::<f64, _>(Exp1) / proposal_rate;
            let event_time = state.time() + tau;
            if event_time >= t_end {
                if !self.advance_to(&mut state, t_end, rng, sink, &mut grid) {
                    sink.record(&state.base, Some(state.spine));
                }
                break;
            }
            self.advance_to(&mut state, event_time, rng, sink, &mut grid);
            let level = rng.random::<f64>() * proposal_rate;
            if level < rate {
                self.resolve_event(&mut state, level, rng);
                sink.record(&state.base, Some(state.spine));
            }
        }
        Ok(state)
    }

    /// `level` is uniform on [0, λ + μ(N̂ − 1)): below λ a fission, above it
    /// the death of a uniformly chosen non-spine colony.
    fn resolve_event<R: Rng + ?Sized>(&self, state: &mut SpinalState, level: f64, rng: &mut R) {
        let lambda = self.params.lambda;
        if level < lambda {
            let index = state.base.select_by_trait(rng.random::<f64>() * state.base.r());
            let theta = self.split.sample(rng);
            let second = state.base.split(index, theta);
            if index == state.spine {
                // child 1 holds θx, child 2 holds (1 − θ)x
                if rng.random::<f64>() >= theta {
                    state.spine = second;
                }
            }
        } else {
            let n = state.n();
            debug_assert!(n > 1, "death event with only the spine alive");
            let mut victim = rng.random_range(0..n - 1);
            if victim >= state.spine {
                victim += 1;
            }
            let last = n - 1;
            state.base.remove(victim);
            if state.spine == last {
                state.spine = victim;
            }
        }
    }

    fn advance_to<R: Rng + ?Sized, S: PathSink>(
        &self,
        state: &mut SpinalState,
        target: f64,
        rng: &mut R,
        sink: &mut S,
        grid: &mut Option<GridCursor>,
    ) -> bool {
        let mut recorded_target = false;
        if let Some(cursor) = grid.as_mut() {
            while let Some(g) = cursor.next_before(target) {
                if g > state.time() {
                    self.step(state, g, rng);
                    sink.record(&state.base, Some(state.spine));
                    recorded_target = g == target;
                }
            }
        }
        self.step(state, target, rng);
        recorded_target
    }

    fn step<R: Rng + ?Sized>(&self, state: &mut SpinalState, target: f64, rng: &mut R) {
        let dt = target - state.time();
        let modes = ModeAssignment::Spinal { spine: state.spine };
        self.kernel.advance(&mut state.base, dt, modes, rng);
        state.base.set_time(target);
        state.accumulate(self.g_psi_rate, dt);
    }
}

/// Simulates one spinal trajectory from `init` to `t_end`.
pub fn simulate_spinal<R: Rng + ?Sized>(
    params: &ModelParams,
    init: &PopulationState,
    t_end: f64,
    rng: &mut R,
    mode: SpinalMode,
) -> Result<SpinalState> {
    SpinalSimulator::new(params, mode)?.run(init, t_end, rng, &mut NoPath)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SplitLaw;
    use crate::path::PathRecorder;
    use crate::rng::RngStream;

    fn params() -> ModelParams {
        ModelParams::new(1.2, 0.7, 0.5, 2.0, 0.8, SplitLaw::Uniform).unwrap()
    }

    #[test]
    fn spine_stays_alive_and_prefactor_telescopes() {
        let p = params();
        let init = PopulationState::uniform(4, 2.0).unwrap();
        for mode in [SpinalMode::Exact, SpinalMode::Thinning] {
            let sim = SpinalSimulator::new(&p, mode).unwrap();
            for seed in 0..100 {
                let mut rng = RngStream::new(seed, 1);
                let s = sim.run(&init, 3.0, &mut rng, &mut NoPath).unwrap();
                assert!(s.n() >= 1);
                assert!(s.spine_index() < s.n());
                assert!(s.base.audit().is_ok());
                assert_eq!(s.time(), 3.0);
                let exact = 2.0 * ((p.a - p.mu) * 3.0).exp();
                assert!(((s.many_to_one_prefactor() - exact) / exact).abs() < 1e-13);
                let z = s.spine_fraction();
                assert!(z > 0.0 && z <= 1.0);
            }
        }
    }

    #[test]
    fn single_colony_fraction_is_one() {
        let state = SpinalState::new(PopulationState::uniform(1, 3.0).unwrap(), 0).unwrap();
        assert_eq!(state.spine_fraction(), 1.0);
        assert_eq!(state.spine_label(), &Label::root(1));
        assert!(matches!(
            SpinalState::new(PopulationState::uniform(2, 3.0).unwrap(), 2),
            Err(ModelError::InvalidSpine(2))
        ));
    }

    #[test]
    fn death_of_last_colony_relabels_spine() {
        let p = params();
        let sim = SpinalSimulator::new(&p, SpinalMode::Exact).unwrap();
        let base = PopulationState::new(0.0, &[1.0, 2.0, 3.0]).unwrap();
        for seed in 0..50 {
            let mut state = SpinalState::new(base.clone(), 2).unwrap();
            let label = state.spine_label().clone();
            let mut rng = RngStream::new(seed, 0);
            // any level above λ is a death
            sim.resolve_event(&mut state, p.lambda + 0.1, &mut rng);
            assert_eq!(state.n(), 2);
            assert_eq!(state.spine_label(), &label);
            assert_eq!(state.spine_trait(), 3.0);
        }
    }

    #[test]
    fn initial_spine_is_size_biased() {
        let init = PopulationState::new(0.0, &[1.0, 3.0]).unwrap();
        let mut rng = RngStream::new(17, 0);
        let heavy = (0..20_000)
            .filter(|_| choose_initial_spine(&init, &mut rng).unwrap() == Label::root(2))
            .count() as f64
            / 20_000.0;
        // 0.75 with standard deviation ≈ 0.003
        assert!((heavy - 0.75).abs() < 0.015);
        let mut empty = init.clone();
        empty.remove(0);
        empty.remove(0);
        assert_eq!(choose_initial_spine(&empty, &mut rng), Err(ModelError::EmptyPopulation));
    }

    #[test]
    fn path_rows_flag_exactly_one_spine_per_time() {
        let p = params();
        let sim = SpinalSimulator::new(&p, SpinalMode::Exact).unwrap();
        let mut rec = PathRecorder::new(Some(0.5));
        let mut rng = RngStream::new(4, 0);
        sim.run(&PopulationState::uniform(3, 3.0).unwrap(), 2.0, &mut rng, &mut rec)
            .unwrap();
        let rows = rec.rows();
        let mut i = 0;
        while i < rows.len() {
            let mut j = i;
            let mut spines = 0;
            while j < rows.len() && rows[j].time == rows[i].time {
                spines += usize::from(rows[j].spine == Some(true));
                j += 1;
            }
            assert_eq!(spines, 1, "time {}", rows[i].time);
            i = j;
        }
    }

    #[test]
    fn compensated_sum_is_accurate() {
        let mut state = SpinalState::new(PopulationState::uniform(1, 1.0).unwrap(), 0).unwrap();
        for _ in 0..1_000_000 {
            state.accumulate(0.1, 1e-3);
        }
        assert!((state.g_psi_integral() - 100.0).abs() < 1e-12);
    }
}
