//! Law of `X_r` and integrals against the tilted measure `(z/r) P(X_r ∈ dz)`.

use crate::error::{Error, Result};
use crate::levy_model::LevyModel;
use crate::numerics::{norm_cdf, norm_pdf};
use crate::quadrature::{Integrator, Tolerance};
use statrs::function::gamma::gamma_lr;
use std::f64::consts::PI;

/// Gaussian truncation half-width in standard deviations.
pub const GAUSS_WIDTH: f64 = 12.0;

/// Series terms allowed before a compound-Poisson series is declared divergent.
pub const SERIES_CAP: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub location: f64,
    pub mass: f64,
}

/// Law of `X_r`: optional atom plus a density on the continuous support
/// `[support_lo, support_hi]` (truncated where the density is negligible).
#[derive(Debug, Clone, Copy)]
pub struct TransitionMeasure {
    model: LevyModel,
    r: f64,
    pub atom: Option<Atom>,
    pub support_lo: f64,
    pub support_hi: f64,
}

/// `Σ_{m≥0} u^m / (m!(m+1)!)` as `(mantissa, log_scale)`.
fn bessel_series(u: f64) -> (f64, f64) {
    const RESCALE: f64 = 1e280;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut log_scale = 0.0;
    let mut m = 0usize;
    loop {
        term *= u / ((m + 1) as f64 * (m + 2) as f64);
        sum += term;
        m += 1;
        if sum > RESCALE {
            sum /= RESCALE;
            term /= RESCALE;
            log_scale += RESCALE.ln();
        }
        if term < 1e-16 * sum || m >= SERIES_CAP {
            return (sum, log_scale);
        }
    }
}

impl TransitionMeasure {
    pub fn new(model: &LevyModel, r: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidArgument(format!("time horizon must be positive and finite, got {r}")));
        }
        Ok(match *model {
            LevyModel::BrownianRisk { c, sigma } => {
                let sd = sigma * r.sqrt();
                Self {
                    model: *model,
                    r,
                    atom: None,
                    support_lo: c * r - GAUSS_WIDTH * sd,
                    support_hi: c * r + GAUSS_WIDTH * sd,
                }
            }
            LevyModel::CramerLundbergExp { c, eta, alpha } => {
                // density ~ exp(-(√(αy) − √(ηr))²) at claim total y
                let y_max = ((eta * r).sqrt() + 9.0).powi(2) / alpha;
                Self {
                    model: *model,
                    r,
                    atom: Some(Atom {
                        location: c * r,
                        mass: (-eta * r).exp(),
                    }),
                    support_lo: c * r - y_max,
                    support_hi: c * r,
                }
            }
        })
    }

    pub fn model(&self) -> &LevyModel {
        &self.model
    }

    pub fn horizon(&self) -> f64 {
        self.r
    }

    /// Density of the continuous part of the law at `z`.
    pub fn density(&self, z: f64) -> f64 {
        let r = self.r;
        match self.model {
            LevyModel::BrownianRisk { c, sigma } => {
                let sd = sigma * r.sqrt();
                norm_pdf((z - c * r) / sd) / sd
            }
            LevyModel::CramerLundbergExp { c, eta, alpha } => {
                let y = c * r - z;
                if y <= 0.0 {
                    return 0.0;
                }
                let lam = alpha * eta * r;
                let (s, log_scale) = bessel_series(lam * y);
                (lam.ln() - eta * r - alpha * y + s.ln() + log_scale).exp()
            }
        }
    }

    /// `∫ f(z) (z/r) P(X_r ∈ dz)` over `z ≥ lo`; the atom counts when its
    /// location is at least `lo`.
    pub fn integrate_tilted_from<F: Fn(f64) -> f64>(&self, f: F, lo: f64, integrator: &Integrator) -> Result<f64> {
        self.integrate_tilted_growing(f, lo, 0.0, integrator)
    }

    /// As [`Self::integrate_tilted_from`] for `f` of exponential order
    /// `growth`; the Gaussian truncation follows the tilted mean
    /// `cr + growth·σ²r`.
    pub fn integrate_tilted_growing<F: Fn(f64) -> f64>(
        &self,
        f: F,
        lo: f64,
        growth: f64,
        integrator: &Integrator,
    ) -> Result<f64> {
        let r = self.r;
        let hi = match self.model {
            LevyModel::BrownianRisk { sigma, .. } => self.support_hi + growth.max(0.0) * sigma * sigma * r,
            LevyModel::CramerLundbergExp { .. } => self.support_hi,
        };
        let mut total = 0.0;
        if let Some(a) = self.atom {
            if a.location >= lo && a.location > 0.0 {
                total += f(a.location) * a.location / r * a.mass;
            }
        }
        let lo = lo.max(0.0).max(self.support_lo);
        if hi > lo {
            total += integrator.integrate(|z| f(z) * z / r * self.density(z), lo, hi)?.value;
        }
        Ok(total)
    }

    /// `∫_0^∞ f(z) (z/r) P(X_r ∈ dz)` with absolute error target `tol`.
    pub fn integrate_tilted<F: Fn(f64) -> f64>(&self, f: F, tol: f64) -> Result<f64> {
        self.integrate_tilted_from(f, 0.0, &Integrator::new(Tolerance::absolute(tol)))
    }

    /// Atom mass plus the density integrated over the whole truncated support.
    pub fn total_mass(&self, tol: f64) -> Result<f64> {
        let atom = self.atom.map_or(0.0, |a| a.mass);
        let body = Integrator::new(Tolerance::absolute(tol))
            .integrate(|z| self.density(z), self.support_lo, self.support_hi)?
            .value;
        Ok(atom + body)
    }
}

/// `transition_measure(model, r)`.
pub fn transition_measure(model: &LevyModel, r: f64) -> Result<TransitionMeasure> {
    TransitionMeasure::new(model, r)
}

/// `E[e^{kX_r} X_r⁺] / r` for `X_r ~ N(cr, σ²r)`.
pub fn gaussian_tilted_moment(c: f64, sigma: f64, r: f64, k: f64) -> f64 {
    let sd = sigma * r.sqrt();
    let mu = r * (c + sigma * sigma * k);
    let log_mgf = r * (c * k + 0.5 * sigma * sigma * k * k);
    log_mgf.exp() * (mu * norm_cdf(mu / sd) + sd * norm_pdf(mu / sd)) / r
}

/// Tilted partial moments with tilts `√(c²+2q) − c` and `−(√(c²+2q) + c)`,
/// unit volatility.
pub fn psi1_psi2(c: f64, r: f64, q: f64) -> (f64, f64) {
    let d = (c * c + 2.0 * q).sqrt();
    let base = (-r * c * c / 2.0).exp() / (2.0 * PI * r).sqrt();
    let growth = (r * q).exp() * d;
    (
        base + growth * norm_cdf(r.sqrt() * d),
        base - growth * norm_cdf(-r.sqrt() * d),
    )
}

/// `∫_0^∞ e^{f z} z P(X_r ∈ dz)` for the exponential-claims model, through
/// regularized lower incomplete gamma functions.
pub fn cl_tilt_integral(model: &LevyModel, r: f64, f: f64) -> Result<f64> {
    let LevyModel::CramerLundbergExp { c, eta, alpha } = *model else {
        return Err(Error::Unsupported("incomplete-gamma series needs exponential claims".into()));
    };
    let beta = alpha + f;
    if !(beta > 0.0) {
        return Err(Error::InvalidArgument(format!("tilt {f} must exceed -alpha = {}", -alpha)));
    }
    let cr = c * r;
    let x = beta * cr;
    let u = alpha * eta * r / beta;
    // w = u^{m+1}/(m+1)!, v = u^{m+1}/m!
    let mut w = u;
    let mut v = u;
    let mut sum = cr;
    for m in 0..SERIES_CAP {
        let term = w * cr * gamma_lr((m + 1) as f64, x) - v * gamma_lr((m + 2) as f64, x) / beta;
        sum += term;
        if (m as f64) > x && (m as f64) > u && term.abs() < 1e-17 * sum.abs() {
            return Ok(((f * c - eta) * r).exp() * sum);
        }
        w *= u / (m + 2) as f64;
        v *= u / (m + 1) as f64;
    }
    Err(Error::Series { terms: SERIES_CAP })
}

/// Closed-form `P(τ_z⁺ ≤ r)` for Brownian motion with drift.
pub fn brownian_first_passage_cdf(c: f64, sigma: f64, z: f64, r: f64) -> f64 {
    let sd = sigma * r.sqrt();
    norm_cdf((c * r - z) / sd) + (2.0 * c * z / (sigma * sigma)).exp() * norm_cdf((-z - c * r) / sd)
}

/// `P(τ_z⁺ ≤ r) = ∫_0^r (z/s) P(X_s ∈ dz)/dz ds`, with the no-claim atom of
/// the exponential-claims model reaching `z` at time `z/c`.
pub fn kendall_first_passage_cdf(model: &LevyModel, z: f64, r: f64) -> Result<f64> {
    if !(z > 0.0 && r > 0.0) {
        return Err(Error::InvalidArgument(format!("level and horizon must be positive, got z={z}, r={r}")));
    }
    let integrator = Integrator::new(Tolerance::new(1e-12, 1e-10));
    let density = |s: f64| -> f64 {
        match TransitionMeasure::new(model, s) {
            Ok(m) => z / s * m.density(z),
            Err(_) => 0.0,
        }
    };
    match *model {
        LevyModel::BrownianRisk { .. } => Ok(integrator.integrate(density, 0.0, r)?.value),
        LevyModel::CramerLundbergExp { c, eta, .. } => {
            let hit = z / c;
            if r <= hit {
                return Ok(0.0);
            }
            let body = integrator.integrate(density, hit, r)?.value;
            Ok((-eta * hit).exp() + body)
        }
    }
}
