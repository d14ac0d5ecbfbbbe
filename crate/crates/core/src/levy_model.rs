//! The two concrete spectrally negative risk models and their Laplace
//! exponents.
//!
//! * Brownian risk: `X_t = x + c t + σ B_t`, with `ψ(θ) = cθ + σ²θ²/2`.
//! * Cramér–Lundberg with exponential claims: `X_t = x + c t − Σ C_i`,
//!   claims arriving at rate `η` with sizes `Exp(α)`, so
//!   `ψ(θ) = cθ − ηθ/(α + θ)`.
//!
//! Both exponents are rational/quadratic, so `ψ(θ) = q` has exactly two real
//! roots `θ_q ≤ 0 ≤ Φ(q)` (for `q ≥ 0` under net profit) and every scale
//! function is a two-term exponential mixture.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// A Laplace exponent `ψ(θ) = log E[e^{θ X_1}]` of a spectrally negative
/// Lévy process.
///
/// Implementing this trait is enough to get `Φ` through bracketed root
/// finding; scale functions are only provided for [`LevyModel`].
pub trait LaplaceExponent {
    fn psi(&self, theta: f64) -> f64;

    fn psi_prime(&self, theta: f64) -> f64;

    /// Right inverse `Φ(p) = sup{θ ≥ 0 : ψ(θ) = p}`.
    fn phi(&self, p: f64) -> f64 {
        phi_by_bracketing(self, p)
    }
}

/// Largest root of `ψ(θ) = p` on `[0, ∞)`.
///
/// Doubles an upper bracket until `ψ(hi) > p`, then bisects to a relative
/// width of 1e-13. Convexity of `ψ` with `ψ(0) = 0 ≤ p` makes the bracket
/// `[0, hi]` contain only the up-crossing at `Φ(p)`.
pub fn phi_by_bracketing<L: LaplaceExponent + ?Sized>(psi: &L, p: f64) -> f64 {
    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    while psi.psi(hi) <= p {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return f64::INFINITY;
        }
    }
    if p == 0.0 && psi.psi_prime(0.0) >= 0.0 {
        return 0.0;
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if psi.psi(mid) <= p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * hi.max(f64::MIN_POSITIVE) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Both roots of `ψ(θ) = q` together with the discriminant of the
/// underlying quadratic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Roots {
    /// Larger root, `Φ(q)`.
    pub phi: f64,
    /// Smaller root, `θ_q`.
    pub theta: f64,
    pub discriminant: f64,
}

/// Concrete risk model. Construct through [`LevyModel::brownian`] or
/// [`LevyModel::cramer_lundberg`] to get parameter validation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", deny_unknown_fields)]
pub enum LevyModel {
    #[serde(rename = "brownian")]
    BrownianRisk { c: f64, sigma: f64 },
    #[serde(rename = "cramer_lundberg")]
    CramerLundbergExp { c: f64, eta: f64, alpha: f64 },
}

impl LevyModel {
    pub fn brownian(c: f64, sigma: f64) -> Result<Self> {
        let m = LevyModel::BrownianRisk { c, sigma };
        m.validate()?;
        Ok(m)
    }

    pub fn cramer_lundberg(c: f64, eta: f64, alpha: f64) -> Result<Self> {
        let m = LevyModel::CramerLundbergExp { c, eta, alpha };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LevyModel::BrownianRisk { c, sigma } => {
                if !c.is_finite() {
                    return Err(Error::InvalidModel(format!("drift c must be finite, got {c}")));
                }
                if !(sigma > 0.0 && sigma.is_finite()) {
                    return Err(Error::InvalidModel(format!("sigma must be > 0, got {sigma}")));
                }
            }
            LevyModel::CramerLundbergExp { c, eta, alpha } => {
                for (name, v) in [("c", c), ("eta", eta), ("alpha", alpha)] {
                    if !(v > 0.0 && v.is_finite()) {
                        return Err(Error::InvalidModel(format!("{name} must be > 0, got {v}")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Parse a model from a JSON object such as
    /// `{"model":"brownian","c":1.0,"sigma":1.0}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let m: LevyModel = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    /// Parse a model from a TOML table with the same keys as the JSON form.
    pub fn from_toml(text: &str) -> Result<Self> {
        let m: LevyModel = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    /// Premium / drift rate `c`.
    pub fn premium(&self) -> f64 {
        match *self {
            LevyModel::BrownianRisk { c, .. } | LevyModel::CramerLundbergExp { c, .. } => c,
        }
    }

    /// True for paths of bounded variation (`W(0) > 0`).
    pub fn has_bounded_variation(&self) -> bool {
        matches!(self, LevyModel::CramerLundbergExp { .. })
    }

    pub fn laplace_exponent(&self, theta: f64) -> f64 {
        self.psi(theta)
    }

    /// `ψ'(0+) = E[X_1]`.
    pub fn drift_mean(&self) -> f64 {
        match *self {
            LevyModel::BrownianRisk { c, .. } => c,
            LevyModel::CramerLundbergExp { c, eta, alpha } => c - eta / alpha,
        }
    }

    /// `(E[X_1])_+`.
    pub fn drift_mean_positive(&self) -> f64 {
        self.drift_mean().max(0.0)
    }

    pub fn net_profit(&self) -> bool {
        self.drift_mean() > 0.0
    }

    /// Both roots of `ψ(θ) = q`, computed without cancellation: the root of
    /// larger magnitude comes from the quadratic formula, the other from the
    /// product of the roots.
    pub fn roots(&self, q: f64) -> Roots {
        match *self {
            LevyModel::BrownianRisk { c, sigma } => {
                // σ²θ²/2 + cθ − q = 0, product of roots = −2q/σ²
                let s2 = sigma * sigma;
                let disc = c * c + 2.0 * s2 * q;
                let sq = disc.sqrt();
                let product = -2.0 * q / s2;
                let (phi, theta) = if c > 0.0 {
                    let theta = (-c - sq) / s2;
                    (product / theta, theta)
                } else {
                    let phi = (-c + sq) / s2;
                    let theta = if phi > 0.0 { product / phi } else { 0.0 };
                    (phi, theta)
                };
                Roots {
                    phi,
                    theta,
                    discriminant: disc,
                }
            }
            LevyModel::CramerLundbergExp { c, eta, alpha } => cl_roots(c, eta, alpha, q),
        }
    }

    /// `Φ(p)`, closed form for both models.
    pub fn phi_inverse(&self, p: f64) -> f64 {
        self.roots(p).phi
    }
}

/// Roots of `cθ² + (cα − η − q)θ − qα = 0`, i.e. of `ψ(θ) = q` for the
/// Cramér–Lundberg model with exponential claims.
pub fn cl_roots(c: f64, eta: f64, alpha: f64, q: f64) -> Roots {
    let b = q + eta - c * alpha;
    let disc = b * b + 4.0 * c * alpha * q;
    let sq = disc.sqrt();
    let product = -q * alpha / c;
    let (phi, theta) = if b < 0.0 {
        let theta = (b - sq) / (2.0 * c);
        (product / theta, theta)
    } else {
        let phi = (b + sq) / (2.0 * c);
        let theta = if phi > 0.0 { product / phi } else { 0.0 };
        (phi, theta)
    };
    Roots {
        phi,
        theta,
        discriminant: disc,
    }
}

impl LaplaceExponent for LevyModel {
    fn psi(&self, theta: f64) -> f64 {
        match *self {
            LevyModel::BrownianRisk { c, sigma } => c * theta + 0.5 * sigma * sigma * theta * theta,
            LevyModel::CramerLundbergExp { c, eta, alpha } => c * theta - eta * theta / (alpha + theta),
        }
    }

    fn psi_prime(&self, theta: f64) -> f64 {
        match *self {
            LevyModel::BrownianRisk { c, sigma } => c + sigma * sigma * theta,
            LevyModel::CramerLundbergExp { c, eta, alpha } => {
                c - eta * alpha / ((alpha + theta) * (alpha + theta))
            }
        }
    }

    fn phi(&self, p: f64) -> f64 {
        self.phi_inverse(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bm() -> LevyModel {
        LevyModel::brownian(1.0, 1.0).unwrap()
    }

    fn cl() -> LevyModel {
        LevyModel::cramer_lundberg(2.0, 1.0, 1.0).unwrap()
    }

    struct Generic(LevyModel);

    impl LaplaceExponent for Generic {
        fn psi(&self, t: f64) -> f64 {
            self.0.psi(t)
        }
        fn psi_prime(&self, t: f64) -> f64 {
            self.0.psi_prime(t)
        }
    }

    #[test]
    fn laplace_exponent_examples() {
        assert_eq!(bm().laplace_exponent(0.0), 0.0);
        assert!((bm().laplace_exponent(1.0) - 1.5).abs() < 1e-15);
        assert!((cl().laplace_exponent(1.0) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn drift_mean_examples() {
        assert_eq!(bm().drift_mean(), 1.0);
        assert_eq!(cl().drift_mean(), 1.0);
        let bad = LevyModel::cramer_lundberg(1.0, 2.0, 1.0).unwrap();
        assert_eq!(bad.drift_mean(), -1.0);
        assert!(!bad.net_profit());
        assert_eq!(bad.drift_mean_positive(), 0.0);
    }

    #[test]
    fn phi_examples() {
        assert_eq!(bm().phi_inverse(0.0), 0.0);
        assert!((bm().phi_inverse(1.5) - 1.0).abs() < 1e-14);
        assert!((phi_by_bracketing(&Generic(bm()), 1.5) - 1.0).abs() < 1e-12);
        let phi = cl().phi_inverse(1.0);
        assert!((phi - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((cl().psi(phi) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn cl_roots_examples() {
        let r0 = cl().roots(0.0);
        assert_eq!(r0.phi, 0.0);
        assert!((r0.theta + 0.5).abs() < 1e-15);
        assert!((r0.discriminant - 1.0).abs() < 1e-15);
        let r1 = cl().roots(1.0);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((r1.phi - h).abs() < 1e-15);
        assert!((r1.theta + h).abs() < 1e-15);
        assert!((r1.discriminant - 8.0).abs() < 1e-14);
        assert!((cl().psi(r1.theta) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn phi_without_net_profit_is_positive_at_zero() {
        let bad = LevyModel::cramer_lundberg(1.0, 2.0, 1.0).unwrap();
        let phi0 = bad.phi_inverse(0.0);
        assert!((phi0 - 1.0).abs() < 1e-14);
        assert!((phi_by_bracketing(&Generic(bad), 0.0) - 1.0).abs() < 1e-12);
        let neg = LevyModel::brownian(-1.0, 1.0).unwrap();
        assert!((neg.phi_inverse(0.0) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(LevyModel::brownian(1.0, 0.0).is_err());
        assert!(LevyModel::cramer_lundberg(1.0, -1.0, 1.0).is_err());
        assert!(LevyModel::cramer_lundberg(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn parses_config_objects() {
        let m = LevyModel::from_json(r#"{"model":"brownian","c":1.0,"sigma":1.0}"#).unwrap();
        assert_eq!(m, bm());
        let m = LevyModel::from_json(r#"{"model":"cramer_lundberg","c":2.0,"eta":1.0,"alpha":1.0}"#).unwrap();
        assert_eq!(m, cl());
        let m = LevyModel::from_toml("model = \"cramer_lundberg\"\nc = 2.0\neta = 1.0\nalpha = 1.0\n").unwrap();
        assert_eq!(m, cl());
        assert!(LevyModel::from_json(r#"{"model":"brownian","c":1.0,"sigma":1.0,"mu":3}"#).is_err());
        assert!(LevyModel::from_json(r#"{"model":"brownian","c":1.0,"sigma":-1.0}"#).is_err());
    }

    #[test]
    fn residual_on_log_grid() {
        for model in [bm(), cl(), LevyModel::brownian(0.3, 2.0).unwrap(), LevyModel::cramer_lundberg(1.5, 3.0, 2.5).unwrap()] {
            for k in 0..=90 {
                let p = 10f64.powf(-6.0 + 9.0 * k as f64 / 90.0);
                let phi = model.phi_inverse(p);
                assert!((model.psi(phi) - p).abs() < 1e-10 * p.max(1.0), "{model:?} p={p}");
            }
        }
    }

    proptest! {
        #[test]
        fn psi_is_convex(t1 in 0.0f64..20.0, gap in 0.01f64..20.0, w in 0.0f64..1.0) {
            let t2 = t1 + gap;
            for model in [bm(), cl()] {
                let mid = model.psi(w * t1 + (1.0 - w) * t2);
                let chord = w * model.psi(t1) + (1.0 - w) * model.psi(t2);
                prop_assert!(mid <= chord + 1e-12 * chord.abs().max(1.0));
            }
        }

        #[test]
        fn closed_form_roots_match_root_finding(p in 1e-6f64..1e3, c in 0.5f64..3.0, eta in 0.1f64..3.0, alpha in 0.2f64..3.0) {
            let model = LevyModel::cramer_lundberg(c, eta, alpha).unwrap();
            let closed = model.phi_inverse(p);
            let generic = phi_by_bracketing(&Generic(model), p);
            prop_assert!((closed - generic).abs() < 1e-10 * closed.max(1.0));
            let roots = model.roots(p);
            prop_assert!((model.psi(roots.theta) - p).abs() < 1e-9 * p.max(1.0));
            prop_assert!(roots.theta <= 0.0 && roots.phi >= 0.0);
        }
    }
}
