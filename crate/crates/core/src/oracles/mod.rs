//! Closed-form quantities and bounds for the colonial process.
//!
//! These are ground truth for the simulators: the mean resource, the
//! extinction-time series of the M/M/∞ population size, bounds on E[N_t],
//! Var[R_t] and the long-time spine fraction E[Ẑ∞], and the stationary law
//! of the spinal population size.

pub mod special;

use crate::error::{ModelError, Result};
use crate::model::{alpha_beta, split_moments, validate, ModelParams};
use crate::population::PopulationState;

pub use special::{ei, ei_scaled};

/// A lower and upper bound on one quantity, with the assumptions they need.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundPair {
    pub lower: f64,
    pub upper: f64,
    pub assumptions: Vec<String>,
}

impl BoundPair {
    fn new(lower: f64, upper: f64) -> Self {
        Self {
            lower,
            upper,
            assumptions: Vec::new(),
        }
    }

    fn assuming(mut self, note: &str) -> Self {
        self.assumptions.push(note.to_owned());
        self
    }

    /// Whether `value` lies in `[lower − slack, upper + slack]`.
    pub fn contains_with_slack(&self, value: f64, slack: f64) -> bool {
        value >= self.lower - slack && value <= self.upper + slack
    }
}

fn check_rate(field: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ModelError::InvalidParameter {
            field,
            reason: format!("{field} must be positive, got {value}"),
        })
    }
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(ModelError::InvalidParameter {
            field: "t",
            reason: format!("t must be non-negative, got {t}"),
        })
    }
}

/// E[T₀] for the population size started from `n0` colonies:
/// Σ_{k<N₀} k!/(λρ^k) Σ_{j>k} ρ^j/j! with ρ = λ/μ.
pub fn mean_extinction_time(n0: usize, lambda: f64, mu: f64) -> Result<f64> {
    check_rate("lambda", lambda)?;
    check_rate("mu", mu)?;
    if n0 == 0 {
        return Err(ModelError::InvalidInitialPopulation("n0 must be at least 1".into()));
    }
    let rho = lambda / mu;
    let mut total = 0.0;
    for k in 0..n0 {
        // ρ^{j-k} k!/j! = Π_{i=k+1}^{j} ρ/i
        let mut term = 1.0;
        let mut inner = 0.0;
        let mut j = k + 1;
        loop {
            term *= rho / j as f64;
            inner += term;
            if j as f64 > rho && term < 1e-14 * inner {
                break;
            }
            j += 1;
        }
        total += inner;
    }
    Ok(total / lambda)
}

/// E[R_t] = R₀e^{(a−μ)t}.
pub fn mean_resource(r0: f64, a: f64, mu: f64, t: f64) -> f64 {
    r0 * ((a - mu) * t).exp()
}

/// Bounds on P(N_t > 0): e^{−μt} ≤ P ≤ 1 ∧ E[T₀]/t.
pub fn survival_probability_bounds(n0: usize, lambda: f64, mu: f64, t: f64) -> Result<BoundPair> {
    check_time(t)?;
    let mean_t0 = mean_extinction_time(n0, lambda, mu)?;
    let upper = if t > 0.0 { (mean_t0 / t).min(1.0) } else { 1.0 };
    Ok(BoundPair::new((-mu * t).exp(), upper))
}

/// Bounds on E[N_t]. Lower: (λt + N₀)e^{−μt}. Upper: integrates
/// dE[N]/dt ≤ λ(1 ∧ t₁/t) − μE[N] with t₁ = N₀(e^{λ/μ} − 1)/λ, which brings
/// in Ei for t > t₁ and decays like 1/t.
pub fn mean_popsize_bounds(n0: usize, lambda: f64, mu: f64, t: f64) -> Result<BoundPair> {
    check_rate("lambda", lambda)?;
    check_rate("mu", mu)?;
    check_time(t)?;
    if n0 == 0 {
        return Err(ModelError::InvalidInitialPopulation("n0 must be at least 1".into()));
    }
    let n0 = n0 as f64;
    let rho = lambda / mu;
    let decay = (-mu * t).exp();
    let lower = (lambda * t + n0) * decay;
    let t1 = n0 * rho.exp_m1() / lambda;
    let upper = if t <= t1 {
        rho * (-(-mu * t).exp_m1()) + n0 * decay
    } else {
        let n_t1 = rho * (-(-mu * t1).exp_m1()) + n0 * (-mu * t1).exp();
        let since_t1 = (-mu * (t - t1)).exp();
        // (Ei(μt) − Ei(μt₁))e^{−μt} without forming Ei(μt)
        let ei_part = ei_scaled(mu * t) - ei_scaled(mu * t1) * since_t1;
        n_t1 * since_t1 + n0 * rho.exp_m1() * ei_part
    };
    Ok(BoundPair::new(lower, upper))
}

/// Bounds on Var[R_t] for unit initial traits, i.e. E[Ŷ₀] = 1.
pub fn variance_resource_bounds(params: &ModelParams, r0: f64, t: f64) -> Result<BoundPair> {
    variance_resource_bounds_with_spine_mean(params, r0, 1.0, t)
}

/// Bounds on Var[R_t] started from `init`; the initial spine has mean trait
/// E[Ŷ₀] = Σx²/R₀.
pub fn variance_resource_bounds_for(params: &ModelParams, init: &PopulationState, t: f64) -> Result<BoundPair> {
    if init.is_extinct() {
        return Err(ModelError::EmptyPopulation);
    }
    let r0 = init.r();
    let spine_mean = init.traits().map(|x| x * x).sum::<f64>() / r0;
    variance_resource_bounds_with_spine_mean(params, r0, spine_mean, t)
}

/// Bounds on Var[R_t] from E[R_t²] = R₀e^{(a−μ)t}E[R̂_t], with
/// y₀e^{(a+σ²−2λK)t} ≤ E[Ŷ_t] ≤ y₀e^{(a+σ²)t} and K = E[Θ(1−Θ)].
pub fn variance_resource_bounds_with_spine_mean(
    params: &ModelParams,
    r0: f64,
    spine_mean: f64,
    t: f64,
) -> Result<BoundPair> {
    validate(params)?;
    check_rate("r0", r0)?;
    check_rate("spine_mean", spine_mean)?;
    check_time(t)?;
    let k = split_moments(&params.split_law)?.e_theta_1mtheta;
    let sigma2 = params.sigma * params.sigma;
    let env = params.environmental_variance();
    let feed = params.mu + params.intrinsic_variance();
    let gap = feed - 2.0 * params.lambda * k;
    let share = spine_mean / r0;

    let env_growth = (env * t).exp();
    let upper_ratio = share * ((params.mu + sigma2) * t).exp() + (1.0 - share) * env_growth;
    let lower_ratio = if gap == 0.0 {
        equal_rates_lower_ratio(feed, share, env, t)
    } else {
        // (e^{gap·t} − 1)/gap, exact as gap → 0
        let growth = (gap * t).exp_m1() / gap;
        env_growth * (1.0 + feed * share * growth)
    };
    let scale = r0 * r0 * (2.0 * (params.a - params.mu) * t).exp();
    Ok(BoundPair::new(scale * (lower_ratio - 1.0), scale * (upper_ratio - 1.0))
        .assuming("E[R_t^2] = R0 e^{(a-mu)t} E[R_hat_t] with 0 <= Z_hat <= 1"))
}

/// Lower bound ratio on the surface μ + σ²/(1+δ²) = 2λE[Θ(1−Θ)].
fn equal_rates_lower_ratio(feed: f64, share: f64, env: f64, t: f64) -> f64 {
    (feed * share * t + 1.0) * (env * t).exp()
}

/// Bounds on lim E[Ẑ_t], the long-time mean spine fraction.
///
/// Upper: the smaller of the positive root of 2(α+β)z² − (2β−1)z − 1 and
/// M = 2(1 + 8β/27)/(√(1 + 8α(1 + 8β/27)) + 1). Lower: the larger of
/// (β + βq + 2)/(2β − 4(λ/μ)E[Θ ln Θ] + 2) and q = (μ/λ)(1 − e^{−λ/μ}); the
/// first term requires a symmetric split law and is dropped otherwise.
pub fn spine_fraction_bounds(params: &ModelParams) -> Result<BoundPair> {
    let (alpha, beta) = alpha_beta(params)?;
    let moments = split_moments(&params.split_law)?;
    let rho = params.lambda / params.mu;

    let b = 2.0 * beta - 1.0;
    let root = (b + (b * b + 8.0 * (alpha + beta)).sqrt()) / (4.0 * (alpha + beta));
    let c = 1.0 + 8.0 * beta / 27.0;
    let m = 2.0 * c / ((1.0 + 8.0 * alpha * c).sqrt() + 1.0);
    let upper = root.min(m);

    let q = inverse_mean_spinal_popsize(rho);
    let mut bounds = if params.split_law.is_symmetric() {
        let ratio = (beta + beta * q + 2.0) / (2.0 * beta - 4.0 * rho * moments.e_theta_lntheta + 2.0);
        BoundPair::new(ratio.max(q), upper).assuming("symmetric split law")
    } else {
        BoundPair::new(q, upper).assuming("split law asymmetric: symmetric-only lower term omitted")
    };
    bounds.assumptions.push("mu > 0".into());
    Ok(bounds)
}

/// Reference value (√(1 + 8α₀) − 1)/(4γα₀), α₀ = λE[Θ(1−Θ)]/μ, for the
/// share of resource held by colonies above fraction γ when
/// σ²/(1+δ²) → 0. Informational only at finite noise.
pub fn low_noise_concentration_reference(params: &ModelParams, gamma: f64) -> Result<f64> {
    let (alpha, _) = alpha_beta(params)?;
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(ModelError::InvalidParameter {
            field: "gamma",
            reason: format!("gamma must lie in (0, 1], got {gamma}"),
        });
    }
    Ok(((1.0 + 8.0 * alpha).sqrt() - 1.0) / (4.0 * gamma * alpha))
}

/// (1/ρ)(1 − e^{−ρ}), the stationary E[1/N̂] for ρ = λ/μ.
fn inverse_mean_spinal_popsize(rho: f64) -> f64 {
    -(-rho).exp_m1() / rho
}

/// Stationary law of the spinal population size: N̂∞ − 1 ~ Poisson(λ/μ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationarySpinalPopsize {
    rho: f64,
}

impl StationarySpinalPopsize {
    pub fn ratio(&self) -> f64 {
        self.rho
    }

    /// P(N̂∞ = k) = e^{−ρ}ρ^{k−1}/(k−1)!, zero for k = 0.
    pub fn pmf(&self, k: usize) -> f64 {
        if k == 0 {
            return 0.0;
        }
        let m = (k - 1) as f64;
        (-self.rho + m * self.rho.ln() - ln_factorial(k - 1)).exp()
    }

    /// Probabilities for k = 0..=max_k.
    pub fn probabilities(&self, max_k: usize) -> Vec<f64> {
        (0..=max_k).map(|k| self.pmf(k)).collect()
    }

    /// E[1/N̂∞] = (μ/λ)(1 − e^{−λ/μ}).
    pub fn inverse_mean(&self) -> f64 {
        inverse_mean_spinal_popsize(self.rho)
    }

    pub fn mean(&self) -> f64 {
        1.0 + self.rho
    }
}

pub fn spinal_stationary_popsize(lambda: f64, mu: f64) -> Result<StationarySpinalPopsize> {
    check_rate("lambda", lambda)?;
    check_rate("mu", mu)?;
    Ok(StationarySpinalPopsize { rho: lambda / mu })
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// One row of an oracle reference curve.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleRow {
    pub t: f64,
    pub quantity: String,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub point: Option<f64>,
}

impl OracleRow {
    pub fn bounds(t: f64, quantity: &str, bounds: &BoundPair) -> Self {
        Self {
            t,
            quantity: quantity.to_owned(),
            lower: Some(bounds.lower),
            upper: Some(bounds.upper),
            point: None,
        }
    }

    pub fn point(t: f64, quantity: &str, value: f64) -> Self {
        Self {
            t,
            quantity: quantity.to_owned(),
            lower: None,
            upper: None,
            point: Some(value),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SplitLaw;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn extinction_time_single_colony_closed_form() {
        let e = std::f64::consts::E;
        assert!(rel(mean_extinction_time(1, 1.0, 1.0).unwrap(), e - 1.0) < 1e-13);
        assert!(rel(mean_extinction_time(1, 2.0, 1.0).unwrap(), (e * e - 1.0) / 2.0) < 1e-13);
    }

    #[test]
    fn extinction_time_series_values() {
        // 30-digit evaluation of the double series
        let cases = [
            ((2, 1.0, 1.0), 2.436_563_656_918_090_5),
            ((3, 3.0, 1.0), 9.007_315_441_652_865),
            ((5, 2.0, 0.5), 37.998_554_713_393_937),
        ];
        for ((n0, l, m), expected) in cases {
            assert!(rel(mean_extinction_time(n0, l, m).unwrap(), expected) < 1e-12);
        }
    }

    #[test]
    fn extinction_time_monotone() {
        let mut prev = 0.0;
        for n0 in 1..8 {
            let v = mean_extinction_time(n0, 1.5, 1.0).unwrap();
            assert!(v > prev);
            prev = v;
        }
        let mut prev = 0.0;
        for i in 1..30 {
            let v = mean_extinction_time(2, 0.3 * i as f64, 1.0).unwrap();
            assert!(v > prev);
            prev = v;
        }
        assert!(mean_extinction_time(1, 0.0, 1.0).is_err());
        assert!(mean_extinction_time(0, 1.0, 1.0).is_err());
    }

    #[test]
    fn mean_resource_cases() {
        assert!(rel(mean_resource(10.0, 1.0, 0.5, 2.0), 27.182_818_284_590_45) < 1e-15);
        assert_eq!(mean_resource(3.0, 1.0, 0.5, 0.0), 3.0);
        assert_eq!(mean_resource(3.0, 0.7, 0.7, 12.0), 3.0);
    }

    #[test]
    fn popsize_bounds_at_time_zero() {
        let b = mean_popsize_bounds(4, 3.0, 1.0, 0.0).unwrap();
        assert_eq!(b.lower, 4.0);
        assert_eq!(b.upper, 4.0);
    }

    #[test]
    fn popsize_upper_bound_decays_like_inverse_time() {
        for t in [50.0, 80.0, 200.0] {
            let a = mean_popsize_bounds(1, 3.0, 1.0, t).unwrap().upper;
            let b = mean_popsize_bounds(1, 3.0, 1.0, 2.0 * t).unwrap().upper;
            assert!((b / a / 0.5 - 1.0).abs() < 0.05, "t={t} ratio={}", b / a);
        }
    }

    #[test]
    fn popsize_upper_bound_continuous_at_t1() {
        let (n0, l, m) = (2usize, 3.0, 1.0);
        let t1 = n0 as f64 * (3f64.exp() - 1.0) / l;
        let before = mean_popsize_bounds(n0, l, m, t1 * (1.0 - 1e-9)).unwrap().upper;
        let after = mean_popsize_bounds(n0, l, m, t1 * (1.0 + 1e-9)).unwrap().upper;
        assert!(rel(after, before) < 1e-7);
    }

    #[test]
    fn survival_bounds() {
        let b = survival_probability_bounds(1, 1.0, 1.0, 10.0).unwrap();
        assert!(rel(b.upper, (std::f64::consts::E - 1.0) / 10.0) < 1e-13);
        assert!(rel(b.lower, (-10f64).exp()) < 1e-15);
        assert_eq!(survival_probability_bounds(1, 1.0, 1.0, 0.0).unwrap().upper, 1.0);
    }

    #[test]
    fn variance_bounds_vanish_at_time_zero() {
        let p = ModelParams::new(5.0, 1.0, 1.0, 10.0, 1.0, SplitLaw::Uniform).unwrap();
        let b = variance_resource_bounds(&p, 15.0, 0.0).unwrap();
        assert_eq!(b.lower, 0.0);
        assert_eq!(b.upper, 0.0);
    }

    #[test]
    fn variance_upper_bound_without_noise() {
        let (r0, t) = (4.0, 1.5);
        let p = ModelParams::new(1.0, 0.0, 3.0, 2.0, 0.5, SplitLaw::Uniform).unwrap();
        let b = variance_resource_bounds(&p, r0, t).unwrap();
        let scale = r0 * r0 * (2.0 * (p.a - p.mu) * t).exp();
        let expected = scale * ((p.mu * t).exp() / r0 + (r0 - 1.0) / r0 - 1.0);
        assert!(rel(b.upper, expected) < 1e-13);
    }

    #[test]
    fn variance_lower_bound_continuous_across_equal_rates_surface() {
        // μ + σ²/(1+δ²) = 2λ/6 at λ = 4.5, μ = 1, σ = 1, δ = 1
        let p = ModelParams::new(1.0, 1.0, 1.0, 4.5, 1.0, SplitLaw::Uniform).unwrap();
        let feed = p.mu + p.intrinsic_variance();
        assert_eq!(feed - 2.0 * p.lambda / 6.0, 0.0);
        let generic = |lambda: f64, t: f64| {
            let gap = feed - 2.0 * lambda / 6.0;
            (p.environmental_variance() * t).exp() * (1.0 + feed / 3.0 * (gap * t).exp_m1() / gap)
        };
        // the gap shifts the ratio by about feed·share·gap·t²/2
        let t = 0.1;
        let linear = equal_rates_lower_ratio(feed, 1.0 / 3.0, p.environmental_variance(), t);
        assert!((generic(p.lambda + 1e-4, t) - linear).abs() < 1e-6);
        assert!((generic(p.lambda - 1e-4, t) - linear).abs() < 1e-6);
        let t = 2.0;
        let linear = equal_rates_lower_ratio(feed, 1.0 / 3.0, p.environmental_variance(), t);
        assert!(rel(generic(p.lambda + 1e-12, t), linear) < 1e-9);

        let on = variance_resource_bounds(&p, 3.0, t).unwrap();
        let mut near = p;
        near.lambda += 1e-4;
        let off = variance_resource_bounds(&near, 3.0, t).unwrap();
        assert!(rel(off.lower, on.lower) < 1e-3);
    }

    #[test]
    fn variance_bounds_follow_initial_spine_mean() {
        let p = ModelParams::new(1.0, 0.8, 0.5, 2.0, 0.5, SplitLaw::Uniform).unwrap();
        let unit = PopulationState::new(0.0, &[1.0; 5]).unwrap();
        let a = variance_resource_bounds_for(&p, &unit, 2.0).unwrap();
        let b = variance_resource_bounds(&p, 5.0, 2.0).unwrap();
        assert!(rel(a.lower, b.lower) < 1e-14 && rel(a.upper, b.upper) < 1e-14);
        let single = PopulationState::new(0.0, &[5.0]).unwrap();
        let c = variance_resource_bounds_for(&p, &single, 2.0).unwrap();
        assert!(c.upper > a.upper);
    }

    #[test]
    fn spine_fraction_reference_point() {
        let p = ModelParams::new(1.0, 1.0, 1.0, 3.0, 1.0, SplitLaw::Uniform).unwrap();
        let b = spine_fraction_bounds(&p).unwrap();
        // α = β = 1/2: root = 1/√2, M = 2(31/27)/(√(1+4·31/27)+1)
        let m = 2.0 * (31.0 / 27.0) / ((1.0 + 4.0 * 31.0 / 27.0f64).sqrt() + 1.0);
        assert!(rel(b.upper, m.min(1.0 / 2f64.sqrt())) < 1e-14);
        let q = (1.0 - (-3f64).exp()) / 3.0;
        let ratio = (0.5 + 0.5 * q + 2.0) / (1.0 + 3.0 + 2.0);
        assert!(rel(b.lower, ratio.max(q)) < 1e-14);
        assert!(b.lower <= b.upper);
    }

    #[test]
    fn spine_fraction_upper_root_limit_at_half_beta() {
        // 2β = 1: root = 1/√(2α + 1)
        let p = ModelParams::new(1.0, 2f64.sqrt() / 2.0, 0.0, 3.0, 1.0, SplitLaw::Uniform).unwrap();
        let (alpha, beta) = alpha_beta(&p).unwrap();
        assert!((beta - 0.5).abs() < 1e-15);
        let b = 2.0 * beta - 1.0;
        let root = (b + (b * b + 8.0 * (alpha + beta)).sqrt()) / (4.0 * (alpha + beta));
        assert!(rel(root, 1.0 / (2.0 * alpha + 1.0).sqrt()) < 1e-14);
    }

    #[test]
    fn spine_fraction_m_is_finite_as_alpha_vanishes() {
        let p = ModelParams::new(1.0, 1.0, 0.0, 1e-12, 1.0, SplitLaw::Uniform).unwrap();
        let b = spine_fraction_bounds(&p).unwrap();
        assert!(b.upper.is_finite() && b.upper <= 1.0 + 1e-12);
    }

    #[test]
    fn spine_fraction_lower_bound_large_noise_limit() {
        // (β + βq + 2)/(2β + c) → (1 + q)/2 as β → ∞
        let q = (1.0 - (-3f64).exp()) / 3.0;
        let p = ModelParams::new(1.0, 1e4, 0.0, 3.0, 1.0, SplitLaw::Uniform).unwrap();
        let b = spine_fraction_bounds(&p).unwrap();
        assert!((b.lower - (1.0 + q) / 2.0).abs() < 1e-6);
    }

    #[test]
    fn spine_fraction_asymmetric_law_drops_symmetric_term() {
        let p = ModelParams::new(1.0, 1.0, 1.0, 3.0, 1.0, SplitLaw::Deterministic(0.2)).unwrap();
        let b = spine_fraction_bounds(&p).unwrap();
        assert!(rel(b.lower, (1.0 - (-3f64).exp()) / 3.0) < 1e-14);
        assert!(b.assumptions.iter().any(|a| a.contains("asymmetric")));
        let mut z = p;
        z.mu = 0.0;
        assert_eq!(spine_fraction_bounds(&z), Err(ModelError::ZeroDeathRate));
    }

    #[test]
    fn stationary_popsize_law() {
        let law = spinal_stationary_popsize(3.0, 1.0).unwrap();
        assert!((law.inverse_mean() - 0.316_737_643_877_378_7).abs() < 1e-15);
        let total: f64 = law.probabilities(80).iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        let brute: f64 = (1..80).map(|k| law.pmf(k) / k as f64).sum();
        assert!((brute - law.inverse_mean()).abs() < 1e-12);
        let tiny = spinal_stationary_popsize(1e-9, 1.0).unwrap();
        assert!((tiny.pmf(1) - 1.0).abs() < 1e-8);
        assert!(spinal_stationary_popsize(0.0, 1.0).is_err());
    }

    #[test]
    fn low_noise_reference() {
        let p = ModelParams::new(1.0, 0.0, 0.0, 3.0, 1.0, SplitLaw::Uniform).unwrap();
        let v = low_noise_concentration_reference(&p, 0.75).unwrap();
        assert!(rel(v, (5f64.sqrt() - 1.0) / 1.5) < 1e-14);
    }
}
