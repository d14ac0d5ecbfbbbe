//! Small numerically stable helpers shared by the scale-function algebra.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// `(e^t - 1) / t`, equal to 1 at `t = 0`.
#[inline]
pub fn expm1_ratio(t: f64) -> f64 {
    if t.abs() < 1e-8 {
        1.0 + 0.5 * t
    } else {
        t.exp_m1() / t
    }
}

/// `∫_0^len e^{rate·y} dy`, stable when `rate·len` is small.
#[inline]
pub fn exp_integral(rate: f64, len: f64) -> f64 {
    len * expm1_ratio(rate * len)
}

/// `∫_lo^hi e^{rate·y} dy` with the exponent folded into a single factor.
#[inline]
pub fn exp_integral_between(rate: f64, lo: f64, hi: f64) -> f64 {
    (rate * lo).exp() * exp_integral(rate, hi - lo)
}

/// Standard normal CDF.
#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal density.
#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm1_ratio_is_continuous_at_zero() {
        assert_eq!(expm1_ratio(0.0), 1.0);
        for t in [0.99e-8, 1.01e-8, -0.99e-8, -1.01e-8] {
            let series = 1.0 + t / 2.0 + t * t / 6.0;
            assert!((expm1_ratio(t) - series).abs() < 1e-15);
        }
    }

    #[test]
    fn exp_integral_matches_direct_formula() {
        let (rate, lo, hi) = (0.7_f64, 0.3_f64, 2.1_f64);
        let direct = ((rate * hi).exp() - (rate * lo).exp()) / rate;
        assert!((exp_integral_between(rate, lo, hi) - direct).abs() < 1e-14);
        assert!((exp_integral(0.0, 2.5) - 2.5).abs() < 1e-15);
    }

    #[test]
    fn normal_cdf_reference_values() {
        assert!((norm_cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((norm_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
        assert!((norm_cdf(-3.0) - 0.001_349_898_031_630_094_6).abs() < 1e-17);
    }
}
