//! Scale functions `W^(p)`, `Z_p(x, θ)` and the convolution scale
//! `𝒲_a^(p,s)` for the two concrete models.
//!
//! Every `W^(p)` here is a two-term exponential mixture
//! `a₁e^{Φ(p)x} + a₂e^{θ_p x}` on `[0, ∞)`, so the integrals inside `Z` and
//! `𝒲` have exact antiderivatives. Pointwise `W` uses a factored form that
//! stays accurate when the two rates nearly coincide.

use crate::error::{Error, Result};
use crate::levy_model::{LaplaceExponent, LevyModel, Roots};
use crate::numerics::{exp_integral, exp_integral_between};
use crate::quadrature::Integrator;

/// `coef · e^{rate·x}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpTerm {
    pub coef: f64,
    pub rate: f64,
}

/// Smallest root gap used for the exponential-mixture coefficients.
const MIN_ROOT_GAP: f64 = 1e-6;

/// Relative distance below which `θ` is treated as coinciding with a rate.
const NEAR_RATE: f64 = 1e-4;

/// `W^(p)` for a fixed model and killing rate.
#[derive(Debug, Clone, Copy)]
pub struct ScaleFunction {
    model: LevyModel,
    p: f64,
    roots: Roots,
    /// Killing rate the mixture coefficients were built with; differs from
    /// `p` only in the double-root case (`p = 0`, `ψ'(0+) = 0`).
    algebra_p: f64,
    terms: [ExpTerm; 2],
}

fn mixture_terms(model: &LevyModel, roots: &Roots) -> [ExpTerm; 2] {
    let gap = roots.phi - roots.theta;
    match *model {
        LevyModel::BrownianRisk { sigma, .. } => {
            let k = 2.0 / (sigma * sigma * gap);
            [
                ExpTerm { coef: k, rate: roots.phi },
                ExpTerm { coef: -k, rate: roots.theta },
            ]
        }
        LevyModel::CramerLundbergExp { c, alpha, .. } => [
            ExpTerm {
                coef: (alpha + roots.phi) / (c * gap),
                rate: roots.phi,
            },
            ExpTerm {
                coef: -(alpha + roots.theta) / (c * gap),
                rate: roots.theta,
            },
        ],
    }
}

impl ScaleFunction {
    pub fn new(model: &LevyModel, p: f64) -> Self {
        let roots = model.roots(p);
        let mut algebra_p = p;
        let mut algebra_roots = roots;
        while algebra_roots.phi - algebra_roots.theta < MIN_ROOT_GAP {
            algebra_p = if algebra_p == 0.0 { 1e-16 } else { 4.0 * algebra_p };
            algebra_roots = model.roots(algebra_p);
        }
        Self {
            model: *model,
            p,
            roots,
            algebra_p,
            terms: mixture_terms(model, &algebra_roots),
        }
    }

    pub fn model(&self) -> &LevyModel {
        &self.model
    }

    pub fn rate(&self) -> f64 {
        self.p
    }

    pub fn roots(&self) -> Roots {
        self.roots
    }

    pub fn terms(&self) -> &[ExpTerm; 2] {
        &self.terms
    }

    /// `W^(p)(x)`, zero for `x < 0`.
    pub fn eval(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        let Roots { phi, theta, .. } = self.roots;
        let gap = phi - theta;
        if gap * x > 30.0 {
            let t = mixture_terms(&self.model, &self.roots);
            return t[0].coef * (t[0].rate * x).exp() + t[1].coef * (t[1].rate * x).exp();
        }
        match self.model {
            LevyModel::BrownianRisk { sigma, .. } => {
                2.0 / (sigma * sigma) * (theta * x).exp() * exp_integral(gap, x)
            }
            LevyModel::CramerLundbergExp { c, alpha, .. } => {
                (theta * x).exp() * ((alpha + theta) * exp_integral(gap, x) + (gap * x).exp()) / c
            }
        }
    }

    /// `∫_0^x e^{−θy} W^(p)(y) dy`.
    pub fn laplace_partial(&self, theta: f64, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        self.terms
            .iter()
            .map(|t| t.coef * exp_integral(t.rate - theta, x))
            .sum()
    }

    /// `Z_p(x, θ) = e^{θx}(1 − ψ_p(θ)∫_0^x e^{−θy}W^(p)(y)dy)`, and `e^{θx}`
    /// for `x < 0`.
    ///
    /// The `e^{θx}` coefficient cancels identically away from the mixture
    /// rates, so it is dropped there; this keeps `Z_p(b, θ)` accurate for
    /// large `b` and `θ > Φ(p)`.
    pub fn z(&self, x: f64, theta: f64) -> f64 {
        if x < 0.0 {
            return (theta * x).exp();
        }
        let psi_p = self.model.psi(theta) - self.algebra_p;
        let near = self
            .terms
            .iter()
            .position(|t| (t.rate - theta).abs() < NEAR_RATE * (1.0 + theta.abs()));
        match near {
            None => self
                .terms
                .iter()
                .map(|t| psi_p * t.coef * (t.rate * x).exp() / (theta - t.rate))
                .sum(),
            Some(j) => {
                let mut lead = 1.0;
                let mut rest = 0.0;
                for (k, t) in self.terms.iter().enumerate() {
                    if k == j {
                        continue;
                    }
                    let w = psi_p * t.coef / (theta - t.rate);
                    lead -= w;
                    rest += w * (t.rate * x).exp();
                }
                let tj = self.terms[j];
                (theta * x).exp() * (lead - psi_p * tj.coef * exp_integral(tj.rate - theta, x)) + rest
            }
        }
    }
}

/// `∫_lo^hi W₁(x − y) W₂(y) dy`, restricted to where both arguments are
/// non-negative.
pub fn convolve(w1: &ScaleFunction, w2: &ScaleFunction, x: f64, lo: f64, hi: f64) -> f64 {
    let lo = lo.max(0.0);
    let hi = hi.min(x);
    if hi <= lo {
        return 0.0;
    }
    let mut total = 0.0;
    for b in w1.terms() {
        for a in w2.terms() {
            let d = a.rate - b.rate;
            total += b.coef * a.coef * (b.rate * x + d * lo).exp() * exp_integral(d, hi - lo);
        }
    }
    total
}

/// Convolution scale `𝒲_a^(p,s)` with both `W^(p+s)` and `W^(p)` prebuilt.
#[derive(Debug, Clone, Copy)]
pub struct ScriptW {
    /// `W^(p+s)`
    pub upper: ScaleFunction,
    /// `W^(p)`
    pub base: ScaleFunction,
    pub s: f64,
}

impl ScriptW {
    pub fn new(model: &LevyModel, p: f64, s: f64) -> Self {
        Self {
            upper: ScaleFunction::new(model, p + s),
            base: ScaleFunction::new(model, p),
            s,
        }
    }

    /// `W^(p+s)(x) − s∫_0^a W^(p+s)(x−y) W^(p)(y) dy`.
    pub fn eval(&self, a: f64, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        self.upper.eval(x) - self.s * convolve(&self.upper, &self.base, x, 0.0, a)
    }

    /// `W^(p)(x) + s∫_a^x W^(p+s)(x−y) W^(p)(y) dy`.
    pub fn eval_alt(&self, a: f64, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        self.base.eval(x) + self.s * convolve(&self.upper, &self.base, x, a, x)
    }
}

/// `W^(p)(x)`.
#[allow(non_snake_case)]
pub fn W(model: &LevyModel, p: f64, x: f64) -> f64 {
    ScaleFunction::new(model, p).eval(x)
}

/// `Z_p(x, θ)`.
#[allow(non_snake_case)]
pub fn Z(model: &LevyModel, p: f64, x: f64, theta: f64) -> f64 {
    ScaleFunction::new(model, p).z(x, theta)
}

/// `𝒲_a^(p,s)(x)`.
pub fn script_w(model: &LevyModel, p: f64, s: f64, a: f64, x: f64) -> f64 {
    ScriptW::new(model, p, s).eval(a, x)
}

/// `𝒲_a^(p,s)(x)` through the alternative `W^(p) + s∫_a^x` representation.
pub fn script_w_alt(model: &LevyModel, p: f64, s: f64, a: f64, x: f64) -> f64 {
    ScriptW::new(model, p, s).eval_alt(a, x)
}

/// `∫_0^∞ e^{−θz} 𝒲_a^(p,s)(a + z) dz = Z_p(a, θ) / ψ_{p+s}(θ)` for
/// `θ > Φ(p+s)`.
pub fn script_w_laplace(model: &LevyModel, p: f64, s: f64, a: f64, theta: f64) -> Result<f64> {
    let phi = model.phi_inverse(p + s);
    if !(theta > phi) {
        return Err(Error::InvalidArgument(format!(
            "Laplace transform of the convolution scale needs theta > Phi(p+s) = {phi}, got {theta}"
        )));
    }
    Ok(Z(model, p, a, theta) / (model.psi(theta) - p - s))
}

/// `𝒲_a^(p,s)(x)` by adaptive quadrature of the defining convolution over
/// pointwise `W` values. Cross-check for the exact algebra.
pub fn script_w_by_quadrature(
    model: &LevyModel,
    p: f64,
    s: f64,
    a: f64,
    x: f64,
    integrator: &Integrator,
) -> Result<f64> {
    if x < 0.0 {
        return Ok(0.0);
    }
    let upper = ScaleFunction::new(model, p + s);
    let base = ScaleFunction::new(model, p);
    let hi = a.min(x);
    let conv = if hi > 0.0 {
        integrator
            .integrate(|y| upper.eval(x - y) * base.eval(y), 0.0, hi)?
            .value
    } else {
        0.0
    };
    Ok(upper.eval(x) - s * conv)
}

/// Same as [`script_w_by_quadrature`] through the `W^(p) + s∫_a^x` form.
pub fn script_w_alt_by_quadrature(
    model: &LevyModel,
    p: f64,
    s: f64,
    a: f64,
    x: f64,
    integrator: &Integrator,
) -> Result<f64> {
    if x < 0.0 {
        return Ok(0.0);
    }
    let upper = ScaleFunction::new(model, p + s);
    let base = ScaleFunction::new(model, p);
    let lo = a.max(0.0);
    let conv = if x > lo {
        integrator
            .integrate(|y| upper.eval(x - y) * base.eval(y), lo, x)?
            .value
    } else {
        0.0
    };
    Ok(base.eval(x) + s * conv)
}

/// `Z_p(x, θ)` with the inner integral done by quadrature.
pub fn z_by_quadrature(model: &LevyModel, p: f64, x: f64, theta: f64, integrator: &Integrator) -> Result<f64> {
    if x < 0.0 {
        return Ok((theta * x).exp());
    }
    let w = ScaleFunction::new(model, p);
    let inner = integrator
        .integrate(|y| (-theta * y).exp() * w.eval(y), 0.0, x)?
        .value;
    Ok((theta * x).exp() * (1.0 - (model.psi(theta) - p) * inner))
}

/// `∫_lo^hi e^{rate·y} dy`, re-exported for callers building their own
/// mixtures.
pub fn exp_segment(rate: f64, lo: f64, hi: f64) -> f64 {
    exp_integral_between(rate, lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::Tolerance;
    use proptest::prelude::*;

    fn bm() -> LevyModel {
        LevyModel::brownian(1.0, 1.0).unwrap()
    }

    fn cl() -> LevyModel {
        LevyModel::cramer_lundberg(2.0, 1.0, 1.0).unwrap()
    }

    fn tight() -> Integrator {
        Integrator::new(Tolerance::new(1e-14, 1e-13))
    }

    #[test]
    fn w_examples() {
        for m in [bm(), cl()] {
            assert_eq!(W(&m, 0.4, -0.5), 0.0);
        }
        assert!((W(&bm(), 0.0, 1.0) - (1.0 - (-2.0f64).exp())).abs() < 1e-15);
        assert!((W(&cl(), 0.0, 0.0) - 0.5).abs() < 1e-15);
        assert_eq!(W(&bm(), 0.0, 0.0), 0.0);
    }

    #[test]
    fn brownian_unit_sigma_matches_two_exponential_form() {
        let (c, q) = (1.3, 0.7);
        let m = LevyModel::brownian(c, 1.0).unwrap();
        let d = (c * c + 2.0 * q as f64).sqrt();
        for x in [0.1, 1.0, 4.0] {
            let printed = ((x * (d - c)).exp() - (-x * (d + c)).exp()) / d;
            assert!((W(&m, q, x) - printed).abs() < 1e-13 * printed);
            let z_printed = q / d * ((x * (d - c)).exp() / (d - c) + (-x * (d + c)).exp() / (d + c));
            assert!((Z(&m, q, x, 0.0) - z_printed).abs() < 1e-13 * z_printed);
        }
    }

    #[test]
    fn w_laplace_transform() {
        for m in [bm(), cl(), LevyModel::brownian(0.5, 1.7).unwrap()] {
            for p in [0.0, 0.3, 2.0] {
                let w = ScaleFunction::new(&m, p);
                let theta = m.phi_inverse(p) + 0.5;
                // tail below e^{-0.5 T} < 1e-12
                let t = 60.0;
                let num = tight().integrate(|y| (-theta * y).exp() * w.eval(y), 0.0, t).unwrap().value;
                let exact = 1.0 / (m.psi(theta) - p);
                assert!((num - exact).abs() < 1e-9, "{m:?} p={p}: {num} vs {exact}");
                assert!((w.laplace_partial(theta, t) - num).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn z_examples() {
        for m in [bm(), cl()] {
            assert!((Z(&m, 0.5, -1.0, 0.3) - (-0.3f64).exp()).abs() < 1e-15);
            assert!((Z(&m, 0.5, 0.0, 0.7) - 1.0).abs() < 1e-14);
            assert!((Z(&m, 0.0, 2.0, 0.0) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn z_matches_quadrature_including_near_rate_branch() {
        for m in [bm(), cl()] {
            for (p, theta) in [(0.5, 0.0), (0.5, 0.3), (0.2, 2.0)] {
                for x in [0.3, 1.7, 5.0] {
                    let exact = Z(&m, p, x, theta);
                    let num = z_by_quadrature(&m, p, x, theta, &tight()).unwrap();
                    assert!((exact - num).abs() < 1e-10 * exact.abs().max(1.0), "{m:?} {p} {theta} {x}");
                }
            }
            let p = 0.4;
            let phi = m.phi_inverse(p);
            for x in [0.5, 3.0] {
                assert!((Z(&m, p, x, phi) - (phi * x).exp()).abs() < 1e-12 * (phi * x).exp());
                let close = Z(&m, p, x, phi + 1e-6);
                let num = z_by_quadrature(&m, p, x, phi + 1e-6, &tight()).unwrap();
                assert!((close - num).abs() < 1e-10 * num);
            }
        }
    }

    #[test]
    fn w_ratio_limit_at_large_barrier() {
        for m in [bm(), cl()] {
            for p in [0.0, 0.5] {
                let w = ScaleFunction::new(&m, p);
                let phi = m.phi_inverse(p);
                let b = 50.0;
                for x in [0.5, 2.0] {
                    let ratio = w.eval(x + b) / w.eval(b);
                    assert!((ratio - (phi * x).exp()).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn z_over_w_limit_at_large_barrier() {
        for m in [bm(), cl()] {
            for p in [0.1, 0.5] {
                let w = ScaleFunction::new(&m, p);
                let phi = m.phi_inverse(p);
                for theta in [phi + 0.2, phi + 1.5] {
                    let ratio = w.z(50.0, theta) / w.eval(50.0);
                    let limit = (m.psi(theta) - p) / (theta - phi);
                    assert!((ratio - limit).abs() < 1e-6 * limit.abs().max(1.0), "{m:?} {p} {theta}: {ratio} {limit}");
                }
            }
        }
    }

    #[test]
    fn w_is_strictly_increasing() {
        // drift 1/2 keeps W^(0) resolvable in double precision up to x = 20
        for m in [LevyModel::brownian(0.5, 1.0).unwrap(), cl()] {
            for p in [0.0, 0.5] {
                let w = ScaleFunction::new(&m, p);
                let mut prev = w.eval(0.0);
                for k in 1..=2000 {
                    let v = w.eval(k as f64 * 0.01);
                    assert!(v > prev, "{m:?} p={p} k={k}");
                    prev = v;
                }
            }
        }
    }

    #[test]
    fn zero_drift_double_root_stays_accurate() {
        let m = LevyModel::brownian(0.0, 1.0).unwrap();
        assert!((W(&m, 0.0, 1.5) - 3.0).abs() < 1e-14);
        let pair = ScriptW::new(&m, 0.0, 0.3);
        let q = script_w_by_quadrature(&m, 0.0, 0.3, 0.7, 1.4, &tight()).unwrap();
        assert!((pair.eval(0.7, 1.4) - q).abs() < 1e-8);
    }

    #[test]
    fn script_w_examples() {
        for m in [bm(), cl()] {
            assert!((script_w(&m, 0.3, 0.0, 0.8, 1.2) - W(&m, 0.3, 1.2)).abs() < 1e-15);
            assert!((script_w(&m, 0.3, 0.5, 0.0, 1.2) - W(&m, 0.8, 1.2)).abs() < 1e-15);
            let (p, s, a, x) = (0.2, 0.3, 0.7, 1.4);
            let f1 = script_w(&m, p, s, a, x);
            let f2 = script_w_alt(&m, p, s, a, x);
            let q1 = script_w_by_quadrature(&m, p, s, a, x, &tight()).unwrap();
            let q2 = script_w_alt_by_quadrature(&m, p, s, a, x, &tight()).unwrap();
            assert!((f1 - f2).abs() < 1e-12);
            assert!((q1 - q2).abs() < 1e-9);
            assert!((f1 - q1).abs() < 1e-10);
        }
    }

    #[test]
    fn script_w_laplace_examples() {
        for m in [bm(), cl()] {
            let v = script_w_laplace(&m, 0.0, 0.0, 0.0, 2.0).unwrap();
            assert!((v - 1.0 / m.psi(2.0)).abs() < 1e-15);
            let phi = m.phi_inverse(0.5);
            assert!(script_w_laplace(&m, 0.1, 0.4, 0.5, phi).is_err());
            assert!(script_w_laplace(&m, 0.1, 0.4, 0.5, phi - 0.1).is_err());
        }
        let m = bm();
        let sw = ScriptW::new(&m, 0.1, 0.4);
        let num = tight()
            .integrate(|z| (-3.0 * z).exp() * sw.eval(0.5, 0.5 + z), 0.0, 40.0)
            .unwrap()
            .value;
        let exact = script_w_laplace(&m, 0.1, 0.4, 0.5, 3.0).unwrap();
        assert!((num - exact).abs() < 1e-7);
    }

    proptest! {
        #[test]
        fn two_convolution_forms_agree(p in 0.0f64..2.0, s in -1.0f64..2.0, a in -0.5f64..3.0, x in -0.5f64..5.0) {
            prop_assume!(p + s >= 0.0);
            for m in [bm(), cl()] {
                let sw = ScriptW::new(&m, p, s);
                let f1 = sw.eval(a, x);
                let f2 = sw.eval_alt(a, x);
                prop_assert!((f1 - f2).abs() < 1e-9 * f1.abs().max(1.0), "{:?}: {} vs {}", m, f1, f2);
            }
        }
    }
}
