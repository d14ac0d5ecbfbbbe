//! Globally adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! Panels are refined worst-first until the summed error estimate falls
//! below `max(abs, rel * |I|)`. The refinement sequence depends only on the
//! integrand values, so results are bit-reproducible.

use crate::error::{Error, Result};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Default cap on the number of panels (2^16).
pub const MAX_PANELS: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    pub const fn new(abs: f64, rel: f64) -> Self {
        Self { abs, rel }
    }

    pub const fn absolute(abs: f64) -> Self {
        Self { abs, rel: 0.0 }
    }

    fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }

    /// Same tolerance scaled by `factor` (both components).
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            abs: self.abs * factor,
            rel: self.rel * factor,
        }
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self::new(1e-13, 1e-11)
    }
}

/// Value and error estimate of a finished integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub panels: usize,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.lo.total_cmp(&self.lo))
    }
}

fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Panel {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut abs_sum = kronrod.abs();
    let mut f1 = [0.0; 7];
    let mut f2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let a = f(center - dx);
        let b = f(center + dx);
        f1[j] = a;
        f2[j] = b;
        kronrod += WGK[j] * (a + b);
        abs_sum += WGK[j] * (a.abs() + b.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (a + b);
        }
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        asc += WGK[j] * ((f1[j] - mean).abs() + (f2[j] - mean).abs());
    }
    let value = kronrod * half;
    let resabs = abs_sum * half.abs();
    let resasc = asc * half.abs();
    let mut error = ((kronrod - gauss) * half).abs();
    if resasc != 0.0 && error != 0.0 {
        error = resasc * (200.0 * error / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * resabs);
    }
    if !value.is_finite() {
        error = f64::INFINITY;
    }
    Panel {
        lo,
        hi,
        value,
        error,
    }
}

/// Adaptive integrator with a tolerance and a panel cap.
#[derive(Debug, Clone, Copy)]
pub struct Integrator {
    pub tol: Tolerance,
    pub max_panels: usize,
}

impl Default for Integrator {
    fn default() -> Self {
        Self::new(Tolerance::default())
    }
}

impl Integrator {
    pub fn new(tol: Tolerance) -> Self {
        Self {
            tol,
            max_panels: MAX_PANELS,
        }
    }

    /// Integrate `f` over `[lo, hi]`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, lo: f64, hi: f64) -> Result<Integral> {
        self.integrate_with_breaks(f, &[lo, hi])
    }

    /// Integrate over `[points[0], points[last]]`, starting from one panel per
    /// consecutive pair. Use the interior points for known kinks or jumps.
    pub fn integrate_with_breaks<F: Fn(f64) -> f64>(&self, f: F, points: &[f64]) -> Result<Integral> {
        if points.len() < 2 {
            return Err(Error::InvalidArgument(
                "quadrature needs at least two points".into(),
            ));
        }
        let (lo, hi) = (points[0], points[points.len() - 1]);
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "quadrature bounds must be finite, got [{lo}, {hi}]"
            )));
        }
        let mut heap = BinaryHeap::new();
        let mut value = 0.0;
        let mut error = 0.0;
        for w in points.windows(2) {
            if w[1] <= w[0] {
                continue;
            }
            let panel = gauss_kronrod(&f, w[0], w[1]);
            value += panel.value;
            error += panel.error;
            heap.push(panel);
        }
        if heap.is_empty() {
            return Ok(Integral {
                value: 0.0,
                error: 0.0,
                panels: 0,
            });
        }
        while error > self.tol.target(value) {
            if heap.len() >= self.max_panels {
                return Err(Error::Quadrature {
                    lo,
                    hi,
                    error,
                    panels: heap.len(),
                });
            }
            let worst = heap.pop().expect("heap is non-empty");
            let mid = 0.5 * (worst.lo + worst.hi);
            if !(mid > worst.lo && mid < worst.hi) {
                return Err(Error::Quadrature {
                    lo,
                    hi,
                    error,
                    panels: heap.len() + 1,
                });
            }
            let left = gauss_kronrod(&f, worst.lo, mid);
            let right = gauss_kronrod(&f, mid, worst.hi);
            value += left.value + right.value - worst.value;
            error += left.error + right.error - worst.error;
            heap.push(left);
            heap.push(right);
            if heap.len() % 64 == 0 {
                // re-sum to stop drift in the running totals
                let (v, e) = heap
                    .iter()
                    .fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
                value = v;
                error = e;
            }
        }
        let mut panels: Vec<Panel> = heap.into_vec();
        panels.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        let (value, error) = panels
            .iter()
            .fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
        Ok(Integral {
            value,
            error,
            panels: panels.len(),
        })
    }
}

/// Shorthand for integrating with the default tolerance.
pub fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> Result<f64> {
    Integrator::default().integrate(f, lo, hi).map(|i| i.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let i = integrate(|x| 7.0 * x.powi(4) - 2.0 * x.powi(3) + x - 1.0, -3.0, 10.0).unwrap();
        let prim = |x: f64| 7.0 / 5.0 * x.powi(5) - 0.5 * x.powi(4) + 0.5 * x * x - x;
        assert!((i - (prim(10.0) - prim(-3.0))).abs() < 1e-8);
    }

    #[test]
    fn inverse_sqrt_singularity() {
        let i = Integrator::new(Tolerance::new(1e-10, 1e-10))
            .integrate(|x| 1.0 / x.sqrt(), 0.0, 1.0)
            .unwrap();
        assert!((i.value - 2.0).abs() < 1e-8, "{:?}", i);
    }

    #[test]
    fn jump_handled_by_breakpoint() {
        let f = |x: f64| if x < 0.3 { 1.0 } else { 2.0 };
        let i = Integrator::default()
            .integrate_with_breaks(f, &[0.0, 0.3, 1.0])
            .unwrap();
        assert!((i.value - 1.7).abs() < 1e-14);
    }

    #[test]
    fn reports_non_convergence() {
        let integ = Integrator {
            tol: Tolerance::absolute(1e-15),
            max_panels: 8,
        };
        let err = integ.integrate(|x| (1.0 / x).sin(), 1e-6, 1.0).unwrap_err();
        assert!(matches!(err, Error::Quadrature { .. }));
    }

    #[test]
    fn empty_interval_is_zero() {
        assert_eq!(integrate(|x| x, 1.0, 1.0).unwrap(), 0.0);
    }
}
