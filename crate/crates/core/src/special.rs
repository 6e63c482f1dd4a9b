//! Special functions: normal tail probabilities, polygamma, Poisson CDF.

use libm::erfc;
use statrs::function::gamma::gamma_ur;

pub use statrs::function::gamma::digamma;

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `2 * (1 - Φ(|z|))`, computed from the upper tail directly.
pub fn two_sided_p(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0)
}

/// `P(X <= k)` for `X ~ Poisson(rate)`, `k` a nonnegative integer.
pub fn poisson_cdf(k: f64, rate: f64) -> f64 {
    if k < 0.0 {
        return 0.0;
    }
    gamma_ur(k.floor() + 1.0, rate)
}

// Shift the argument up with the recurrence until the asymptotic series is
// accurate to double precision.
const ASYMPTOTIC_FROM: f64 = 12.0;

/// ψ'(x) for x > 0.
pub fn trigamma(mut x: f64) -> f64 {
    debug_assert!(x > 0.0);
    let mut acc = 0.0;
    while x < ASYMPTOTIC_FROM {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let x2 = 1.0 / (x * x);
    // 1/x + 1/(2x²) + Σ B_2k / x^(2k+1)
    let series = x2
        * (1.0 / 6.0
            - x2 * (1.0 / 30.0 - x2 * (1.0 / 42.0 - x2 * (1.0 / 30.0 - x2 * (5.0 / 66.0 - x2 * 691.0 / 2730.0)))));
    acc + 1.0 / x + x2 / 2.0 + series / x
}

/// ψ''(x) for x > 0.
pub fn tetragamma(mut x: f64) -> f64 {
    debug_assert!(x > 0.0);
    let mut acc = 0.0;
    while x < ASYMPTOTIC_FROM {
        acc -= 2.0 / (x * x * x);
        x += 1.0;
    }
    let x2 = 1.0 / (x * x);
    // -1/x² - 1/x³ - Σ (2k+1) B_2k / x^(2k+2)
    let series = x2
        * (3.0 / 6.0
            - x2 * (5.0 / 30.0 - x2 * (7.0 / 42.0 - x2 * (9.0 / 30.0 - x2 * (11.0 * 5.0 / 66.0)))));
    acc - x2 - x2 / x - series * x2
}

/// Solves `trigamma(y) = x` for y > 0 by Newton's method on `1/trigamma`,
/// which is monotone from the starting point `0.5 + 1/x`. Stops once the
/// relative step falls below 1e-8.
pub fn trigamma_inverse(x: f64) -> f64 {
    assert!(x > 0.0, "trigamma_inverse needs a positive argument, got {x}");
    if x > 1e7 {
        return 1.0 / x.sqrt();
    }
    if x < 1e-6 {
        return 1.0 / x;
    }
    let mut y = 0.5 + 1.0 / x;
    for _ in 0..100 {
        let tri = trigamma(y);
        let step = tri * (1.0 - tri / x) / tetragamma(y);
        y += step;
        if -step / y < 1e-8 {
            break;
        }
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    // Brute-force series ψ'(x) = Σ 1/(x+k)², tail closed by the integral.
    fn trigamma_series(x: f64) -> f64 {
        let n = 200_000;
        let head: f64 = (0..n).map(|k| 1.0 / ((x + k as f64) * (x + k as f64))).sum();
        let t = x + n as f64;
        head + 1.0 / t + 0.5 / (t * t) + 1.0 / (6.0 * t * t * t)
    }

    #[test]
    fn trigamma_against_series() {
        for x in [0.1, 0.5, 1.0, 2.5, 7.0, 19.0, 50.0, 400.0] {
            let want = trigamma_series(x);
            assert!((trigamma(x) - want).abs() < 1e-12 * want.max(1.0), "x={x}");
        }
        assert!((trigamma(1.0) - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-14);
    }

    #[test]
    fn tetragamma_is_derivative_of_trigamma() {
        for x in [0.3, 1.0, 4.0, 11.5, 12.5, 90.0] {
            let h = 1e-5 * x;
            let fd = (trigamma(x + h) - trigamma(x - h)) / (2.0 * h);
            assert!((tetragamma(x) - fd).abs() < 1e-6 * fd.abs(), "x={x}");
        }
        // ψ''(1) = -2 ζ(3)
        assert!((tetragamma(1.0) + 2.0 * 1.2020569031595942).abs() < 1e-13);
    }

    #[test]
    fn trigamma_inverse_round_trips() {
        for y in [0.05, 0.5, 1.0, 3.0, 19.0, 250.0, 1e4] {
            let x = trigamma(y);
            let back = trigamma_inverse(x);
            assert!((back - y).abs() < 1e-6 * y, "y={y} back={back}");
        }
    }

    #[test]
    fn normal_tails() {
        assert_eq!(two_sided_p(0.0), 1.0);
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((two_sided_p(1.959963984540054) - 0.05).abs() < 1e-14);
        assert!((normal_cdf(-1.0) + normal_cdf(1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn poisson_cdf_small_cases() {
        // P(X <= 0) = e^-λ, P(X <= 1) = e^-λ (1 + λ)
        let l: f64 = 2.5;
        assert!((poisson_cdf(0.0, l) - (-l).exp()).abs() < 1e-15);
        assert!((poisson_cdf(1.0, l) - (-l).exp() * (1.0 + l)).abs() < 1e-15);
    }
}
