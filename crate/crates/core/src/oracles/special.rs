//! Exponential integral Ei(x) = ∫_{-∞}^x e^s/s ds for x > 0.

/// Euler-Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Above this argument the asymptotic expansion is used.
const ASYMPTOTIC_THRESHOLD: f64 = 40.0;

/// Ei(x) for x > 0; NaN otherwise. Overflows to +∞ beyond x ≈ 709.
pub fn ei(x: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NAN;
    }
    if x <= ASYMPTOTIC_THRESHOLD {
        ei_series(x)
    } else {
        let scaled = ei_asymptotic_scaled(x);
        if x < 700.0 {
            scaled * x.exp()
        } else {
            // e^x overflows before the product does
            (scaled.ln() + x).exp()
        }
    }
}

/// Ei(x)·e^{−x} for x > 0, finite for every argument.
pub fn ei_scaled(x: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NAN;
    }
    if x <= ASYMPTOTIC_THRESHOLD {
        ei_series(x) * (-x).exp()
    } else {
        ei_asymptotic_scaled(x)
    }
}

/// γ + ln x + Σ_{k≥1} x^k/(k·k!); every term is positive for x > 0.
fn ei_series(x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 0.0;
    for k in 1..500 {
        let kf = k as f64;
        term *= x / kf;
        let contribution = term / kf;
        sum += contribution;
        if contribution < 1e-17 * sum {
            break;
        }
    }
    EULER_GAMMA + x.ln() + sum
}

/// (1/x) Σ_k k!/x^k, truncated at the smallest term.
fn ei_asymptotic_scaled(x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        let next = term * k as f64 / x;
        if next >= term || next < 1e-17 * sum {
            break;
        }
        term = next;
        sum += term;
    }
    sum / x
}
