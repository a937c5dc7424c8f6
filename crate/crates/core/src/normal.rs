//! Standard normal CDF helpers evaluated through the (complementary) error
//! function, with log-space variants that stay finite deep in the tails.

use libm::{erf, erfc};
use statrs::function::erf::erfc_inv;
use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

/// `ln(sqrt(2 pi))`
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard normal CDF.
pub fn ndtr(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

/// Standard normal quantile function.
pub fn ndtri(p: f64) -> f64 {
    -SQRT_2 * erfc_inv(2.0 * p)
}

/// `ln Phi(z)`, accurate for very negative `z` where `Phi(z)` underflows.
pub fn log_ndtr(z: f64) -> f64 {
    if z > 6.0 {
        (-ndtr(-z)).ln_1p()
    } else if z > -37.0 {
        ndtr(z).ln()
    } else {
        // asymptotic expansion of the Mills ratio
        let z2 = z * z;
        let series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
        -0.5 * z2 - LN_SQRT_2PI - (-z).ln() + series.ln()
    }
}

/// `ln(Phi(hi) - Phi(lo))` for `lo <= hi`.
pub fn log_ndtr_diff(lo: f64, hi: f64) -> f64 {
    debug_assert!(lo <= hi, "log_ndtr_diff: {lo} > {hi}");
    if lo == hi {
        return f64::NEG_INFINITY;
    }
    if lo >= 0.0 {
        // reflect into the lower tail
        return log_ndtr_diff(-hi, -lo);
    }
    if hi > 0.0 {
        // straddles zero: erf has no cancellation here
        return (0.5 * (erf(hi * FRAC_1_SQRT_2) - erf(lo * FRAC_1_SQRT_2))).ln();
    }
    let log_hi = log_ndtr(hi);
    let log_lo = log_ndtr(lo);
    log_hi + (-(log_lo - log_hi).exp_m1()).ln()
}

/// Gaussian density with mean `mu` and standard deviation `sigma`.
pub fn gauss_pdf(x: f64, mu: f64, sigma: f64) -> f64 {
    let z = (x - mu) / sigma;
    (-0.5 * z * z).exp() / ((2.0 * PI).sqrt() * sigma)
}

/// Numerically stable `ln(sum(exp(xs)))`; `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(xs: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + xs.into_iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Composite Simpson integration of the standard normal density.
    fn simpson_cdf_diff(lo: f64, hi: f64) -> f64 {
        let n = 20_000;
        let h = (hi - lo) / n as f64;
        let f = |x: f64| (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
        let mut acc = f(lo) + f(hi);
        for i in 1..n {
            let x = lo + i as f64 * h;
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        acc * h / 3.0
    }

    #[test]
    fn ndtr_matches_quadrature() {
        for &(lo, hi) in &[(-5.0, 5.0), (-1.0, 0.5), (0.0, 2.5), (-2.5, 2.5), (1.0, 3.0)] {
            let expected = simpson_cdf_diff(lo, hi);
            let got = ndtr(hi) - ndtr(lo);
            assert!((got - expected).abs() < 1e-12, "{lo}..{hi}: {got} vs {expected}");
            assert!((log_ndtr_diff(lo, hi) - expected.ln()).abs() < 1e-11);
        }
    }

    #[test]
    fn log_ndtr_is_continuous_across_branches() {
        for &z in &[-37.0, 6.0] {
            let a = log_ndtr(z - 1e-9);
            let b = log_ndtr(z + 1e-9);
            assert!((a - b).abs() < 1e-6 * a.abs().max(1e-12), "{z}: {a} vs {b}");
        }
        assert!(log_ndtr(-60.0).is_finite());
        assert!((log_ndtr(-60.0) - (-1_805.013_560_680_567)).abs() < 1e-6);
    }

    #[test]
    fn log_ndtr_diff_deep_tail_stays_finite() {
        let v = log_ndtr_diff(40.0, 41.0);
        assert!(v.is_finite() && v < -700.0);
        let narrow = log_ndtr_diff(-1e-10, 1e-10);
        let expected = (2e-10 / (2.0 * PI).sqrt()).ln();
        assert!((narrow - expected).abs() < 1e-9);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &p in &[1e-10, 0.01, 0.25, 0.5, 0.75, 0.99, 1.0 - 1e-10] {
            let z = ndtri(p);
            assert!((ndtr(z) - p).abs() < 1e-14 + 1e-12 * p, "{p}");
        }
    }

    #[test]
    fn log_sum_exp_handles_infinities() {
        assert_eq!(log_sum_exp(Vec::<f64>::new()), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(vec![f64::NEG_INFINITY, 0.0]), 0.0);
        assert!((log_sum_exp(vec![1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }
}
