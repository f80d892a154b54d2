//! Small closed-form helpers shared by the model generators.

use std::f64::consts::FRAC_1_SQRT_2;

/// `1 / sqrt(2 * pi)`.
const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal cumulative distribution function, accurate to a few
/// ulps across the whole line (complementary error function under the
/// hood, so the tails do not cancel).
pub(crate) fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal density.
pub(crate) fn norm_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal quantile. A library seed estimate polished by two
/// Newton steps against [`norm_cdf`], so that the pair round-trips at
/// full double precision; this matters because deterministic clocks
/// built from the quantile are later compared against probabilities
/// rebuilt from the distribution function.
pub(crate) fn norm_ppf(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile needs p in (0, 1), got {p}");
    use statrs::distribution::ContinuousCDF;
    let seed = statrs::distribution::Normal::new(0.0, 1.0)
        .expect("standard normal is well formed")
        .inverse_cdf(p);
    let mut z = seed;
    for _ in 0..2 {
        let err = norm_cdf(z) - p;
        let d = norm_pdf(z);
        if d <= f64::MIN_POSITIVE {
            break;
        }
        z -= err / d;
    }
    z
}

/// Probability that a Brownian motion currently at distance `gap ≥ 0`
/// above a level reaches that level within clock time `dt`, by the
/// reflection principle. Returns 1 at `gap = 0` and 0 when `dt = 0`.
pub(crate) fn hit_probability(gap: f64, dt: f64) -> f64 {
    if gap <= 0.0 {
        return 1.0;
    }
    if dt <= 0.0 {
        return 0.0;
    }
    2.0 * norm_cdf(-gap / dt.sqrt())
}

/// Predictable variance of one step of a Brownian motion started at
/// `x > 0` and absorbed at zero, over a cell of length `dt`:
/// `E[(X' − x)²]` where `X'` is the end-of-cell value of the absorbed
/// motion. Closed form via the reflection principle; clamped at zero
/// against rounding for `x` near the barrier.
pub(crate) fn absorbed_step_variance(x: f64, dt: f64) -> f64 {
    if dt <= 0.0 {
        return 0.0;
    }
    if x <= 0.0 {
        return 0.0;
    }
    let s = dt.sqrt();
    let a = x / s;
    let second_moment = (x * x + dt) * (2.0 * norm_cdf(a) - 1.0) + 2.0 * x * s * norm_pdf(a);
    (second_moment - x * x).max(0.0)
}
