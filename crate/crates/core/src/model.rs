//! Model parameters, the fission split law and the moments of the split law
//! that enter the long-time bounds.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::error::{ModelError, Result};
use crate::quadrature::GaussLegendre;

/// Largest supported ratio of environmental to intrinsic noise.
pub const MAX_DELTA: f64 = 1e6;

/// Default number of Gauss-Legendre nodes per panel for split-law moments.
pub const SPLIT_QUADRATURE_NODES: usize = 64;

const GRADED_LEVELS: u32 = 60;

/// Law of the fraction Θ of the parent's trait inherited by the first child.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum SplitLaw {
    /// Θ = p almost surely.
    Deterministic(f64),
    /// Θ uniform on (0, 1).
    #[default]
    Uniform,
    /// Θ ~ Beta(shape, shape).
    SymmetricBeta(f64),
}

impl SplitLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SplitLaw::Deterministic(p) => {
                if p > 0.0 && p < 1.0 {
                    Ok(())
                } else {
                    Err(ModelError::SplitOutOfRange(p))
                }
            }
            SplitLaw::Uniform => Ok(()),
            SplitLaw::SymmetricBeta(shape) => {
                if shape > 0.0 && shape.is_finite() {
                    Ok(())
                } else {
                    Err(ModelError::InvalidBetaShape(shape))
                }
            }
        }
    }

    /// Whether Θ and 1 − Θ have the same law.
    pub fn is_symmetric(&self) -> bool {
        match *self {
            SplitLaw::Deterministic(p) => p == 0.5,
            SplitLaw::Uniform | SplitLaw::SymmetricBeta(_) => true,
        }
    }

    /// Prepared sampler; panics on an invalid law, so validate first.
    pub fn sampler(&self) -> SplitSampler {
        match *self {
            SplitLaw::Deterministic(p) => SplitSampler::Fixed(p),
            SplitLaw::Uniform => SplitSampler::Uniform,
            SplitLaw::SymmetricBeta(shape) => {
                SplitSampler::Beta(Beta::new(shape, shape).expect("validated beta shape"))
            }
        }
    }
}

impl fmt::Display for SplitLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitLaw::Deterministic(p) => write!(f, "det:{p}"),
            SplitLaw::Uniform => write!(f, "uniform"),
            SplitLaw::SymmetricBeta(shape) => write!(f, "beta:{shape}"),
        }
    }
}

impl FromStr for SplitLaw {
    type Err = ModelError;

    /// Parses `uniform`, `det:<p>` or `beta:<shape>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || ModelError::InvalidParameter {
            field: "theta_law",
            reason: format!("expected uniform, det:<p> or beta:<shape>, got `{s}`"),
        };
        let law = if s.eq_ignore_ascii_case("uniform") {
            SplitLaw::Uniform
        } else if let Some(p) = s.strip_prefix("det:") {
            SplitLaw::Deterministic(p.trim().parse().map_err(|_| bad())?)
        } else if let Some(shape) = s.strip_prefix("beta:") {
            SplitLaw::SymmetricBeta(shape.trim().parse().map_err(|_| bad())?)
        } else {
            return Err(bad());
        };
        law.validate()?;
        Ok(law)
    }
}

/// Sampler for Θ with any per-law setup done once.
#[derive(Debug, Clone, Copy)]
pub enum SplitSampler {
    Fixed(f64),
    Uniform,
    Beta(Beta<f64>),
}

impl SplitSampler {
    /// Draws Θ strictly inside (0, 1).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            SplitSampler::Fixed(p) => *p,
            SplitSampler::Uniform => loop {
                let u: f64 = rng.random();
                if u > 0.0 {
                    return u;
                }
            },
            SplitSampler::Beta(beta) => loop {
                let u = beta.sample(rng);
                if u > 0.0 && u < 1.0 {
                    return u;
                }
            },
        }
    }
}

/// The two moments of Θ used by the resource-sharing bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitMoments {
    /// E[Θ(1 − Θ)], in (0, 1/4].
    pub e_theta_1mtheta: f64,
    /// E[Θ ln Θ], negative.
    pub e_theta_lntheta: f64,
}

/// Moments of the split law: closed form for deterministic and uniform laws,
/// graded Gauss-Legendre quadrature for the symmetric beta law.
pub fn split_moments(law: &SplitLaw) -> Result<SplitMoments> {
    split_moments_with_nodes(law, SPLIT_QUADRATURE_NODES)
}

/// [`split_moments`] with an explicit number of nodes per quadrature panel.
pub fn split_moments_with_nodes(law: &SplitLaw, nodes: usize) -> Result<SplitMoments> {
    law.validate()?;
    Ok(match *law {
        SplitLaw::Deterministic(p) => SplitMoments {
            e_theta_1mtheta: p * (1.0 - p),
            e_theta_lntheta: p * p.ln(),
        },
        SplitLaw::Uniform => SplitMoments {
            e_theta_1mtheta: 1.0 / 6.0,
            e_theta_lntheta: -0.25,
        },
        SplitLaw::SymmetricBeta(shape) => beta_moments(shape, nodes),
    })
}

/// Integrates against the unnormalised Beta(s, s) kernel. The integrand gets
/// (θ, 1 − θ, ln θ), all computed without cancellation. Each half of (0, 1)
/// is mapped by θ = w^p with p = max(1, 1/s), which cancels the algebraic
/// endpoint singularity, and then integrated on panels graded towards w = 0.
fn beta_moments(shape: f64, nodes: usize) -> SplitMoments {
    let rule = GaussLegendre::new(nodes);
    let exponent = shape - 1.0;
    let power = shape.recip().max(1.0);
    let width = 0.5f64.powf(power.recip());
    let integrate = |g: &dyn Fn(f64, f64, f64) -> f64| -> f64 {
        let half = |near_one: bool| {
            rule.integrate_graded(width, GRADED_LEVELS, |w| {
                let ln_w = w.ln();
                let v = (power * ln_w).exp();
                let ln_v = power * ln_w;
                let ln_other = (-v).ln_1p();
                let (theta, rest, ln_theta) = if near_one {
                    (1.0 - v, v, ln_other)
                } else {
                    (v, 1.0 - v, ln_v)
                };
                let log_weight = exponent * (ln_v + ln_other) + power.ln() + (power - 1.0) * ln_w;
                g(theta, rest, ln_theta) * log_weight.exp()
            })
        };
        half(false) + half(true)
    };
    let norm = integrate(&|_, _, _| 1.0);
    let k = integrate(&|theta, rest, _| theta * rest) / norm;
    let l = integrate(&|theta, _, ln_theta| theta * ln_theta) / norm;
    SplitMoments {
        e_theta_1mtheta: k,
        e_theta_lntheta: l,
    }
}

/// Parameters of the colonial branching diffusion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Growth rate of a colony's trait.
    pub a: f64,
    /// Total noise intensity.
    pub sigma: f64,
    /// Environmental-to-intrinsic noise ratio.
    pub delta: f64,
    /// Population fission rate; a colony of trait x splits at rate λx/R.
    pub lambda: f64,
    /// Per-colony death rate.
    pub mu: f64,
    pub split_law: SplitLaw,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            a: 1.0,
            sigma: 1.0,
            delta: 1.0,
            lambda: 3.0,
            mu: 1.0,
            split_law: SplitLaw::Uniform,
        }
    }
}

impl ModelParams {
    pub fn new(a: f64, sigma: f64, delta: f64, lambda: f64, mu: f64, split_law: SplitLaw) -> Result<Self> {
        let params = Self {
            a,
            sigma,
            delta,
            lambda,
            mu,
            split_law,
        };
        validate(&params)?;
        Ok(params)
    }

    /// σ/√(1+δ²), the factor multiplying dB + δ dW.
    pub fn noise_scale(&self) -> f64 {
        self.sigma / (1.0 + self.delta * self.delta).sqrt()
    }

    /// σ²/(1+δ²): variance rate of the intrinsic part of the log-trait noise.
    pub fn intrinsic_variance(&self) -> f64 {
        self.sigma * self.sigma / (1.0 + self.delta * self.delta)
    }

    /// σ²δ²/(1+δ²): variance rate of the shared environmental part.
    pub fn environmental_variance(&self) -> f64 {
        let d2 = self.delta * self.delta;
        self.sigma * self.sigma * d2 / (1.0 + d2)
    }
}

/// Checks every parameter constraint, naming the first violated field.
pub fn validate(params: &ModelParams) -> Result<()> {
    fn check(field: &'static str, value: f64, ok: bool, rule: &str) -> Result<()> {
        if !value.is_finite() {
            return Err(ModelError::InvalidParameter {
                field,
                reason: format!("{field} must be finite, got {value}"),
            });
        }
        if ok {
            Ok(())
        } else {
            Err(ModelError::InvalidParameter {
                field,
                reason: format!("{field} must be {rule}, got {value}"),
            })
        }
    }
    check("a", params.a, params.a > 0.0, "positive")?;
    check("sigma", params.sigma, params.sigma >= 0.0, "non-negative")?;
    check(
        "delta",
        params.delta,
        (0.0..=MAX_DELTA).contains(&params.delta),
        "in [0, 1e6]",
    )?;
    check("lambda", params.lambda, params.lambda > 0.0, "positive")?;
    check("mu", params.mu, params.mu >= 0.0, "non-negative")?;
    params.split_law.validate()
}

/// α = λE[Θ(1−Θ)]/μ and β = σ²/(μ(1+δ²)).
pub fn alpha_beta(params: &ModelParams) -> Result<(f64, f64)> {
    validate(params)?;
    if params.mu == 0.0 {
        return Err(ModelError::ZeroDeathRate);
    }
    let moments = split_moments(&params.split_law)?;
    let alpha = params.lambda * moments.e_theta_1mtheta / params.mu;
    let beta = params.intrinsic_variance() / params.mu;
    Ok((alpha, beta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn base() -> ModelParams {
        ModelParams::new(1.0, 1.0, 1.0, 3.0, 1.0, SplitLaw::Uniform).unwrap()
    }

    #[test]
    fn validate_accepts_reference_parameters() {
        assert!(validate(&base()).is_ok());
    }

    #[test]
    fn validate_names_violated_field() {
        let mut p = base();
        p.a = -1.0;
        let err = validate(&p).unwrap_err();
        assert!(err.to_string().contains("a must be positive"), "{err}");

        let mut p = base();
        p.lambda = 0.0;
        assert!(matches!(
            validate(&p),
            Err(ModelError::InvalidParameter { field: "lambda", .. })
        ));

        let mut p = base();
        p.mu = f64::NAN;
        assert!(matches!(
            validate(&p),
            Err(ModelError::InvalidParameter { field: "mu", .. })
        ));

        let mut p = base();
        p.delta = 2e6;
        assert!(validate(&p).is_err());
    }

    #[test]
    fn deterministic_split_rejects_endpoints() {
        for p in [0.0, 1.0, -0.5, 1.5] {
            let err = SplitLaw::Deterministic(p).validate().unwrap_err();
            assert!(err.to_string().contains("split must lie in open (0,1)"));
        }
        assert!(SplitLaw::SymmetricBeta(0.0).validate().is_err());
    }

    #[test]
    fn split_law_parses_cli_syntax() {
        assert_eq!("uniform".parse::<SplitLaw>().unwrap(), SplitLaw::Uniform);
        assert_eq!("det:0.3".parse::<SplitLaw>().unwrap(), SplitLaw::Deterministic(0.3));
        assert_eq!("beta:2".parse::<SplitLaw>().unwrap(), SplitLaw::SymmetricBeta(2.0));
        assert!("det:1".parse::<SplitLaw>().is_err());
        assert!("gamma:2".parse::<SplitLaw>().is_err());
        let law = SplitLaw::SymmetricBeta(0.5);
        assert_eq!(law.to_string().parse::<SplitLaw>().unwrap(), law);
    }

    #[test]
    fn deterministic_half_moments() {
        let m = split_moments(&SplitLaw::Deterministic(0.5)).unwrap();
        assert_eq!(m.e_theta_1mtheta, 0.25);
        assert!((m.e_theta_lntheta + 0.5 * 2f64.ln()).abs() < 1e-15);
        assert!((m.e_theta_lntheta + 0.346574).abs() < 1e-6);
    }

    #[test]
    fn uniform_moments_match_quadrature() {
        let m = split_moments(&SplitLaw::Uniform).unwrap();
        assert!((m.e_theta_1mtheta - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(m.e_theta_lntheta, -0.25);
        // Beta(1,1) is the uniform law; the quadrature path must agree.
        let q = split_moments(&SplitLaw::SymmetricBeta(1.0)).unwrap();
        assert!((q.e_theta_1mtheta - 1.0 / 6.0).abs() < 1e-13);
        assert!((q.e_theta_lntheta + 0.25).abs() < 1e-13);
    }

    #[test]
    fn beta_two_moment() {
        let m = split_moments(&SplitLaw::SymmetricBeta(2.0)).unwrap();
        // shape²/((2 shape)(2 shape + 1)) = 4/20
        assert!((m.e_theta_1mtheta - 0.2).abs() < 1e-13);
    }

    #[test]
    fn beta_quadrature_converged_against_finer_rule() {
        for shape in [0.3, 0.5, 1.0, 2.0, 3.7, 10.0, 50.0] {
            let law = SplitLaw::SymmetricBeta(shape);
            let coarse = split_moments_with_nodes(&law, 64).unwrap();
            let fine = split_moments_with_nodes(&law, 640).unwrap();
            let rel = |x: f64, y: f64| ((x - y) / y).abs();
            assert!(
                rel(coarse.e_theta_1mtheta, fine.e_theta_1mtheta) < 1e-10,
                "shape {shape}"
            );
            assert!(
                rel(coarse.e_theta_lntheta, fine.e_theta_lntheta) < 1e-10,
                "shape {shape}"
            );
        }
    }

    #[test]
    fn alpha_beta_reference_values() {
        let (alpha, beta) = alpha_beta(&base()).unwrap();
        assert!((alpha - 0.5).abs() < 1e-15);
        assert!((beta - 0.5).abs() < 1e-15);

        let mut p = base();
        p.sigma = 0.0;
        assert_eq!(alpha_beta(&p).unwrap().1, 0.0);

        p.mu = 0.0;
        let err = alpha_beta(&p).unwrap_err();
        assert_eq!(err.to_string(), "alpha/beta undefined for mu = 0");
    }

    #[test]
    fn sampled_splits_stay_inside_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for law in [
            SplitLaw::Uniform,
            SplitLaw::Deterministic(0.2),
            SplitLaw::SymmetricBeta(0.05),
            SplitLaw::SymmetricBeta(4.0),
        ] {
            let sampler = law.sampler();
            for _ in 0..20_000 {
                let theta = sampler.sample(&mut rng);
                assert!(theta > 0.0 && theta < 1.0);
            }
        }
    }
}
