//! Delayed scale functions `Λ`, `𝓕`, the constant `Ω` and the Parisian
//! ruin identities under the mixed clock `κ_r^q = κ^q ∧ κ_r`.
//!
//! Ruin happens the first time an excursion below zero outlasts either its
//! own exponential clock of rate `q` or the deterministic grace period `r`.
//! `r = ∞` and `q = 0` are flags that select the exponential-only and
//! deterministic-only identities.

use crate::error::{Error, Result};
use crate::levy_model::{LaplaceExponent, LevyModel};
use crate::numerics::{expm1_ratio, norm_cdf};
use crate::quadrature::{Integrator, Tolerance};
use crate::scale_fn::{ScaleFunction, ScriptW};
use crate::transition::{psi1_psi2, TransitionMeasure};
use serde::{Deserialize, Serialize};

/// Parameters of a ruin query. `r = f64::INFINITY` switches the
/// deterministic delay off, `q = 0` the exponential one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuinQuery {
    pub x: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default)]
    pub p: f64,
    #[serde(default)]
    pub q: f64,
    #[serde(serialize_with = "ser_horizon", deserialize_with = "de_horizon")]
    pub r: f64,
    #[serde(default)]
    pub lambda: f64,
}

fn ser_horizon<S: serde::Serializer>(r: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if r.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*r)
    }
}

fn de_horizon<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }
    match Raw::deserialize(d)? {
        Raw::Num(v) => Ok(v),
        Raw::Text(t) => parse_horizon(&t).map_err(serde::de::Error::custom),
    }
}

/// Parses a delay, accepting `inf`/`infinity` for the exponential-only limit.
pub fn parse_horizon(text: &str) -> std::result::Result<f64, String> {
    match text.trim().to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" | "∞" => Ok(f64::INFINITY),
        t => t.parse::<f64>().map_err(|e| format!("invalid delay {text:?}: {e}")),
    }
}

/// Which delay mechanisms are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayKind {
    Mixed,
    Exponential,
    Deterministic,
    Classical,
}

impl RuinQuery {
    pub fn new(x: f64, r: f64, q: f64) -> Self {
        Self {
            x,
            b: None,
            p: 0.0,
            q,
            r,
            lambda: 0.0,
        }
    }

    pub fn with_barrier(mut self, b: f64) -> Self {
        self.b = Some(b);
        self
    }

    pub fn with_discount(mut self, p: f64) -> Self {
        self.p = p;
        self
    }

    pub fn with_tilt(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn delay_kind(&self) -> DelayKind {
        match (self.r.is_infinite(), self.q == 0.0) {
            (false, false) => DelayKind::Mixed,
            (true, false) => DelayKind::Exponential,
            (false, true) => DelayKind::Deterministic,
            (true, true) => DelayKind::Classical,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !self.x.is_finite() {
            return bad(format!("initial surplus must be finite, got {}", self.x));
        }
        if !(self.p >= 0.0 && self.p.is_finite()) {
            return bad(format!("p must be finite and non-negative, got {}", self.p));
        }
        if !(self.q >= 0.0 && self.q.is_finite()) {
            return bad(format!("q must be finite and non-negative, got {}", self.q));
        }
        if !(self.r > 0.0) {
            return bad(format!("r must be positive (or inf), got {}", self.r));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be finite and non-negative, got {}", self.lambda));
        }
        if let Some(b) = self.b {
            if !b.is_finite() {
                return bad(format!("barrier must be finite, got {b}"));
            }
            if self.x > b {
                return bad(format!("initial surplus {} exceeds barrier {b}", self.x));
            }
        }
        Ok(())
    }

    fn barrier(&self) -> Result<f64> {
        self.b
            .ok_or_else(|| Error::InvalidArgument("this quantity needs an upper barrier b".into()))
    }
}

/// Arguments of `Λ^(p)(x; r, s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaParams {
    pub p: f64,
    pub s: f64,
    pub r: f64,
    pub x: f64,
}

impl LambdaParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.p >= 0.0 && self.p + self.s >= 0.0 && self.r > 0.0 && self.r.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "need p >= 0, p + s >= 0 and finite r > 0, got p={}, s={}, r={}",
                self.p, self.s, self.r
            )));
        }
        Ok(())
    }
}

/// Representation used to evaluate `Λ^(p)(x; r, s)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LambdaForm {
    /// `∫ 𝒲_z^(p+s,−s)(x+z) (z/r) P(X_r ∈ dz)`
    Convolution,
    /// `∫ 𝒲_x^(p,s)(x+z) (z/r) P(X_r ∈ dz)`
    FixedCutoff,
    /// `Λ^(p+s)(x,r) − s∫_0^x Λ^(p+s)(y,r) W^(p)(x−y) dy`
    Renewal,
}

/// Quadrature targets for the tilted space integrals (`inner`) and the time
/// or renewal integrals wrapped around them (`outer`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Precision {
    pub inner: Tolerance,
    pub outer: Tolerance,
}

impl Default for Precision {
    fn default() -> Self {
        Self {
            inner: Tolerance::new(1e-14, 1e-12),
            outer: Tolerance::new(1e-13, 1e-10),
        }
    }
}

impl Precision {
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            inner: self.inner.scaled(factor),
            outer: self.outer.scaled(factor),
        }
    }
}

/// `Λ^(p)(·; ·, s)` with its scale functions prebuilt.
#[derive(Debug, Clone, Copy)]
pub struct DelayedScale {
    model: LevyModel,
    kernel: ScriptW,
    growth: f64,
}

impl DelayedScale {
    pub fn new(model: &LevyModel, p: f64, s: f64) -> Self {
        Self {
            model: *model,
            kernel: ScriptW::new(model, p + s, -s),
            growth: model.phi_inverse(p).max(model.phi_inverse(p + s)),
        }
    }

    /// `Λ^(p)(x; r, s)`.
    pub fn eval(&self, x: f64, r: f64, integrator: &Integrator) -> Result<f64> {
        let m = TransitionMeasure::new(&self.model, r)?;
        m.integrate_tilted_growing(|z| self.kernel.eval(z, x + z), (-x).max(0.0), self.growth, integrator)
    }

    /// `∫_0^r w(u) Λ^(p)(x; u, s) du` over `u = v²`, which absorbs the
    /// `u^{-1/2}` blow-up of unbounded-variation paths at `u = 0`.
    pub fn time_integral<Wt: Fn(f64) -> f64>(
        &self,
        x: f64,
        r: f64,
        weight: Wt,
        prec: &Precision,
    ) -> Result<f64> {
        let inner = Integrator::new(prec.inner);
        let outer = Integrator::new(prec.outer);
        let top = r.sqrt();
        let mut points = vec![0.0];
        if let LevyModel::CramerLundbergExp { c, .. } = self.model {
            // the no-claim atom reaches −x at u = −x/c, where Λ jumps
            if x < 0.0 {
                let v = (-x / c).sqrt();
                if v < top {
                    points.push(v);
                }
            }
        }
        points.push(top);
        let failure = std::cell::Cell::new(None);
        let value = outer
            .integrate_with_breaks(
                |v| {
                    if v <= 0.0 {
                        return 0.0;
                    }
                    let u = v * v;
                    match self.eval(x, u, &inner) {
                        Ok(l) => 2.0 * v * weight(u) * l,
                        Err(e) => {
                            failure.set(Some(e));
                            0.0
                        }
                    }
                },
                &points,
            )?
            .value;
        match failure.into_inner() {
            Some(e) => Err(e),
            None => Ok(value),
        }
    }
}

/// Relative rounding level of assembled terms.
const CANCELLATION_EPS: f64 = 1e-13;
/// Cancellation error above which the renewal form takes over.
const CANCELLATION_SWITCH: f64 = 1e-9;
/// Cancellation error above which no value is returned.
const CANCELLATION_LIMIT: f64 = 1e-6;

/// Analytic evaluator for one model at a fixed precision.
#[derive(Debug, Clone, Copy)]
pub struct Parisian {
    model: LevyModel,
    prec: Precision,
}

impl Parisian {
    pub fn new(model: &LevyModel) -> Self {
        Self::with_precision(model, Precision::default())
    }

    pub fn with_precision(model: &LevyModel, prec: Precision) -> Self {
        Self { model: *model, prec }
    }

    pub fn model(&self) -> &LevyModel {
        &self.model
    }

    pub fn precision(&self) -> &Precision {
        &self.prec
    }

    fn inner(&self) -> Integrator {
        Integrator::new(self.prec.inner)
    }

    fn outer(&self) -> Integrator {
        Integrator::new(self.prec.outer)
    }

    /// `Λ^(p)(x, r) = ∫ W^(p)(x+z) (z/r) P(X_r ∈ dz)`.
    pub fn lambda_det(&self, p: f64, x: f64, r: f64) -> Result<f64> {
        LambdaParams { p, s: 0.0, r, x }.validate()?;
        DelayedScale::new(&self.model, p, 0.0).eval(x, r, &self.inner())
    }

    /// `Λ^(p)(x; r, s)`.
    pub fn lambda_mixed(&self, params: LambdaParams) -> Result<f64> {
        self.lambda_mixed_form(params, LambdaForm::Convolution)
    }

    pub fn lambda_mixed_form(&self, params: LambdaParams, form: LambdaForm) -> Result<f64> {
        params.validate()?;
        let LambdaParams { p, s, r, x } = params;
        let inner = self.inner();
        match form {
            LambdaForm::Convolution => DelayedScale::new(&self.model, p, s).eval(x, r, &inner),
            LambdaForm::FixedCutoff => {
                let kernel = ScriptW::new(&self.model, p, s);
                let growth = self.model.phi_inverse(p).max(self.model.phi_inverse(p + s));
                TransitionMeasure::new(&self.model, r)?.integrate_tilted_growing(
                    |z| kernel.eval(x, x + z),
                    (-x).max(0.0),
                    growth,
                    &inner,
                )
            }
            LambdaForm::Renewal => {
                let upper = DelayedScale::new(&self.model, p + s, 0.0);
                let lead = upper.eval(x, r, &inner)?;
                if x <= 0.0 || s == 0.0 {
                    return Ok(lead);
                }
                let w = ScaleFunction::new(&self.model, p);
                let failure = std::cell::Cell::new(None);
                let conv = self
                    .outer()
                    .integrate(
                        |y| match upper.eval(y, r, &inner) {
                            Ok(l) => l * w.eval(x - y),
                            Err(e) => {
                                failure.set(Some(e));
                                0.0
                            }
                        },
                        0.0,
                        x,
                    )?
                    .value;
                if let Some(e) = failure.into_inner() {
                    return Err(e);
                }
                Ok(lead - s * conv)
            }
        }
    }

    /// `𝓕^(p,λ)(x; r, s)`.
    ///
    /// The coefficient `(ψ_p(λ)e^{ψ_{p+s}(λ)r} − s)/ψ_{p+s}(λ)` is evaluated as
    /// `e^{Ar} + s·r·(e^{Ar} − 1)/(Ar)` with `A = ψ_{p+s}(λ)`, which equals
    /// `1 + sr` at `A = 0`.
    pub fn f_cal(&self, p: f64, lambda: f64, x: f64, r: f64, s: f64) -> Result<f64> {
        LambdaParams { p, s, r, x }.validate()?;
        if !(lambda >= 0.0) {
            return Err(Error::InvalidArgument(format!("lambda must be non-negative, got {lambda}")));
        }
        let psi = self.model.psi(lambda);
        let a = psi - p - s;
        let coef = (a * r).exp() + s * r * expm1_ratio(a * r);
        let z = ScaleFunction::new(&self.model, p).z(x, lambda);
        let psi_p = psi - p;
        if psi_p == 0.0 {
            return Ok(coef * z);
        }
        let integral = DelayedScale::new(&self.model, p, s).time_integral(
            x,
            r,
            |u| (psi * (r - u) - (p + s) * r).exp(),
            &self.prec,
        )?;
        Ok(coef * z - psi_p * integral)
    }

    /// `D(s) = ∫ Z_{p+q}(z, Φ(p)) (z/s) P(X_s ∈ dz)`, the normaliser in `Ω`.
    pub fn omega_denominator(&self, p: f64, q: f64, s: f64) -> Result<f64> {
        let phi_p = self.model.phi_inverse(p);
        let zf = ScaleFunction::new(&self.model, p + q);
        let growth = self.model.phi_inverse(p + q);
        TransitionMeasure::new(&self.model, s)?.integrate_tilted_growing(|z| zf.z(z, phi_p), 0.0, growth, &self.inner())
    }

    /// `Ω^(p)(r, q)`. At `p = 0` the factor `p/Φ(p)` is replaced by its limit
    /// `(E[X_1])₊` and the remaining `p`-proportional term vanishes.
    pub fn omega(&self, p: f64, r: f64, q: f64) -> Result<f64> {
        if !(p >= 0.0 && q >= 0.0 && r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "omega needs p, q >= 0 and finite r > 0, got p={p}, q={q}, r={r}"
            )));
        }
        let den = self.omega_denominator(p, q, r)?;
        if p == 0.0 {
            return Ok(self.model.drift_mean_positive() / den);
        }
        let phi_p = self.model.phi_inverse(p);
        let decay = (-(p + q) * r).exp();
        let lead = p / ((p + q) * phi_p) * (q + p * decay);
        let tail = p * self.omega_time_integral(p, q, r)?;
        Ok((lead + tail) / den)
    }

    /// `e^{−(p+q)r} ∫_0^r D(s) ds` with `D` as in [`Self::omega_denominator`].
    pub fn omega_time_integral(&self, p: f64, q: f64, r: f64) -> Result<f64> {
        let failure = std::cell::Cell::new(None);
        let value = self
            .outer()
            .integrate(
                |v| {
                    if v <= 0.0 {
                        return 0.0;
                    }
                    let u = v * v;
                    match self.omega_denominator(p, q, u) {
                        Ok(d) => 2.0 * v * d * (-(p + q) * r).exp(),
                        Err(e) => {
                            failure.set(Some(e));
                            0.0
                        }
                    }
                },
                0.0,
                r.sqrt(),
            )?
            .value;
        match failure.into_inner() {
            Some(e) => Err(e),
            None => Ok(value),
        }
    }

    /// `E_x[e^{−pκ + λX_κ}; κ < τ_b⁺]` for the mixed clock.
    pub fn joint_lt_ruin(&self, query: &RuinQuery) -> Result<f64> {
        query.validate()?;
        let b = query.barrier()?;
        let RuinQuery { x, p, q, r, lambda, .. } = *query;
        self.finite_delay(r)?;
        let lx = self.lambda_mixed(LambdaParams { p, s: q, r, x })?;
        let lb = self.lambda_mixed(LambdaParams { p, s: q, r, x: b })?;
        let fx = self.f_cal(p, lambda, x, r, q)?;
        let fb = self.f_cal(p, lambda, b, r, q)?;
        let term = lx / lb * fb;
        self.guarded(fx, term, || self.renewal_lt(p, lambda, q, r, x, Some(b)))
    }

    /// `a − b`, or the fallback when `a` and `b` nearly cancel. The fallback
    /// exists for exponential claims only.
    fn guarded<F: FnOnce() -> Result<f64>>(&self, a: f64, b: f64, fallback: F) -> Result<f64> {
        let magnitude = a.abs() + b.abs();
        if !magnitude.is_finite() {
            return Err(Error::Unsupported("intermediate terms overflow at these parameters".into()));
        }
        let bound = magnitude * CANCELLATION_EPS;
        if bound <= CANCELLATION_SWITCH {
            return Ok(a - b);
        }
        match self.model {
            LevyModel::CramerLundbergExp { .. } => fallback(),
            // the difference must stand well clear of its rounding error
            LevyModel::BrownianRisk { .. } if bound <= CANCELLATION_LIMIT && bound <= 0.01 * (a - b).abs() => Ok(a - b),
            LevyModel::BrownianRisk { .. } => Err(Error::Cancellation { magnitude, bound }),
        }
    }

    /// `E_x[e^{−pτ_0⁻}; τ_0⁻ < τ_b⁺]` (or `τ_0⁻ < ∞` without `b`) for
    /// exponential claims, as a combination of bounded terms.
    ///
    /// With `W^(p) = a₁e^{ρ₁x} + a₂e^{ρ₂x}` one has `Σ aₖ/ρₖ = 1/p`, so
    /// `Z_p = Σ (p aₖ/ρₖ) e^{ρₖx}` and the `e^{ρ₁x}e^{ρ₁b}` products cancel
    /// exactly.
    pub fn classical_down_lt_stable(&self, p: f64, x: f64, b: Option<f64>) -> Result<f64> {
        if !matches!(self.model, LevyModel::CramerLundbergExp { .. }) || !(p > 0.0) {
            return Err(Error::Unsupported("stable form needs exponential claims and p > 0".into()));
        }
        let w = ScaleFunction::new(&self.model, p);
        let [t1, t2] = *w.terms();
        let cross = p * t2.coef * (1.0 / t2.rate - 1.0 / t1.rate);
        match b {
            None => Ok(cross * (t2.rate * x).exp()),
            Some(b) => {
                let num = ((t1.rate - t2.rate) * (x - b) + t2.rate * x).exp() - (t2.rate * x).exp();
                let den = t1.coef + t2.coef * ((t2.rate - t1.rate) * b).exp();
                Ok(-cross * t1.coef * num / den)
            }
        }
    }

    /// Ruin transform by renewal at level 0: the undershoot below 0 is
    /// `Exp(α)` whatever happened before, and each excursion is a race
    /// between recovery and the clock.
    /// `E[up(−U)]` and `E[clock(−U)]` for the race from an `Exp(α)`
    /// undershoot `U`; exponential claims only.
    pub fn undershoot_race_means(&self, p: f64, lambda: f64, q: f64, r: f64) -> Result<(f64, f64)> {
        let LevyModel::CramerLundbergExp { c, alpha, .. } = self.model else {
            return Err(Error::Unsupported("undershoot law is explicit for exponential claims only".into()));
        };
        let cache = std::cell::RefCell::new(std::collections::HashMap::new());
        let failure = std::cell::Cell::new(None);
        let race = |u: f64| -> (f64, f64) {
            if let Some(v) = cache.borrow().get(&u.to_bits()) {
                return *v;
            }
            let v = match self.race_lemma(-u, p, lambda, q, r) {
                Ok(v) => v,
                Err(e) => {
                    failure.set(Some(e));
                    (0.0, 0.0)
                }
            };
            cache.borrow_mut().insert(u.to_bits(), v);
            v
        };
        // recovery within r needs undershoot below c·r
        let tail = 40.0 / alpha;
        let kink = (c * r).min(tail);
        let density = |u: f64| alpha * (-alpha * u).exp();
        let outer = self.outer();
        let mean_up = outer.integrate(|u| density(u) * race(u).0, 0.0, kink)?.value;
        let mean_clock = outer
            .integrate_with_breaks(|u| density(u) * race(u).1, &[0.0, kink, tail])?
            .value;
        match failure.into_inner() {
            Some(e) => Err(e),
            None => Ok((mean_up, mean_clock)),
        }
    }

    /// Ruin transform by renewal at level 0: the undershoot below 0 is
    /// `Exp(α)` whatever happened before, and each excursion is a race
    /// between recovery and the clock.
    fn renewal_lt(&self, p: f64, lambda: f64, q: f64, r: f64, x: f64, b: Option<f64>) -> Result<f64> {
        let (mean_up, mean_clock) = self.undershoot_race_means(p, lambda, q, r)?;
        let l0 = self.classical_down_lt_stable(p, 0.0, b)?;
        let v0 = l0 * mean_clock / (1.0 - l0 * mean_up);
        if x < 0.0 {
            let (up, clock) = self.race_lemma(x, p, lambda, q, r)?;
            return Ok(clock + up * v0);
        }
        Ok(self.classical_down_lt_stable(p, x, b)? * (mean_clock + mean_up * v0))
    }

    /// [`Self::joint_lt_ruin`] and [`Self::lt_ruin_infinite`] by renewal at
    /// level 0; exponential claims only.
    pub fn lt_ruin_renewal(&self, query: &RuinQuery) -> Result<f64> {
        query.validate()?;
        let RuinQuery { x, b, p, q, r, lambda } = *query;
        self.finite_delay(r)?;
        self.renewal_lt(p, lambda, q, r, x, b)
    }

    /// `E_x[e^{−pτ_b⁺}; τ_b⁺ < κ] = Λ^(p)(x;r,q)/Λ^(p)(b;r,q)`.
    pub fn exit_lt(&self, query: &RuinQuery) -> Result<f64> {
        query.validate()?;
        let b = query.barrier()?;
        let RuinQuery { x, p, q, r, .. } = *query;
        self.finite_delay(r)?;
        let lx = self.lambda_mixed(LambdaParams { p, s: q, r, x })?;
        let lb = self.lambda_mixed(LambdaParams { p, s: q, r, x: b })?;
        Ok(lx / lb)
    }

    /// `E_x[e^{−pκ}; κ < τ_b⁺]`.
    pub fn lt_ruin_two_sided(&self, query: &RuinQuery) -> Result<f64> {
        self.joint_lt_ruin(&query.with_tilt(0.0))
    }

    /// `E_x[e^{−pκ}; κ < ∞] = 𝓕^(p)(x;r,q) − Ω^(p)(r,q)Λ^(p)(x;r,q)`.
    pub fn lt_ruin_infinite(&self, query: &RuinQuery) -> Result<f64> {
        query.validate()?;
        let RuinQuery { x, p, q, r, .. } = *query;
        self.finite_delay(r)?;
        if p == 0.0 {
            return self.ruin_prob_mixed(x, r, q);
        }
        let f = self.f_cal(p, 0.0, x, r, q)?;
        let omega = self.omega(p, r, q)?;
        let l = self.lambda_mixed(LambdaParams { p, s: q, r, x })?;
        self.guarded(f, omega * l, || self.renewal_lt(p, 0.0, q, r, x, None))
    }

    /// `P_x(κ_r^q < ∞)`.
    pub fn ruin_prob_mixed(&self, x: f64, r: f64, q: f64) -> Result<f64> {
        RuinQuery::new(x, r, q).validate()?;
        self.finite_delay(r)?;
        let mean = self.model.drift_mean_positive();
        if mean == 0.0 {
            return Ok(1.0);
        }
        let l = self.lambda_mixed(LambdaParams { p: 0.0, s: q, r, x })?;
        let den = self.omega_denominator(0.0, q, r)?;
        Ok(1.0 - mean * l / den)
    }

    /// `P_x(κ^q < ∞) = 1 − (E[X_1])₊ (Φ(q)/q) Z(x, Φ(q))`.
    pub fn ruin_prob_exp_delay(&self, x: f64, q: f64) -> Result<f64> {
        if !(q > 0.0 && q.is_finite()) {
            return Err(Error::InvalidArgument(format!("q must be positive, got {q}")));
        }
        let mean = self.model.drift_mean_positive();
        let phi_q = self.model.phi_inverse(q);
        Ok(1.0 - mean * phi_q / q * ScaleFunction::new(&self.model, 0.0).z(x, phi_q))
    }

    /// `P_x(κ_r < ∞) = 1 − (E[X_1])₊ Λ(x,r)/∫(z/r)P(X_r ∈ dz)`.
    pub fn ruin_prob_det_delay(&self, x: f64, r: f64) -> Result<f64> {
        self.finite_delay(r)?;
        self.ruin_prob_mixed(x, r, 0.0)
    }

    /// `P_x(τ_0⁻ < ∞) = 1 − (E[X_1])₊ W(x)`.
    pub fn ruin_prob_classical(&self, x: f64) -> f64 {
        1.0 - self.model.drift_mean_positive() * ScaleFunction::new(&self.model, 0.0).eval(x)
    }

    /// `E_x[e^{−pτ_0⁺}; τ_0⁺ ≤ e_q ∧ r]` and
    /// `E_x[e^{−p(e_q∧r) + λX_{e_q∧r}}; τ_0⁺ > e_q ∧ r]` for `x ≤ 0`.
    pub fn race_lemma(&self, x: f64, p: f64, lambda: f64, q: f64, r: f64) -> Result<(f64, f64)> {
        if x > 0.0 {
            return Err(Error::InvalidArgument(format!("the race starts at or below zero, got x={x}")));
        }
        self.finite_delay(r)?;
        let up = (-(p + q) * r).exp() * self.lambda_det(p + q, x, r)?;
        // below zero Z_p(x,λ) = e^{λx} and Λ^(p)(x;u,q) = Λ^(p+q)(x,u)
        let clock = self.f_cal(p, lambda, x, r, q)? - up;
        Ok((up, clock))
    }

    fn finite_delay(&self, r: f64) -> Result<()> {
        if r.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(
                "the mixed-delay formulas need a finite r; use the exponential-delay identities".into(),
            ))
        }
    }

    /// Evaluates `quantity` for `query`, routing the `r = ∞` and `q = 0`
    /// flags to their dedicated identities.
    pub fn evaluate(&self, quantity: Quantity, query: &RuinQuery) -> Result<(f64, &'static str)> {
        query.validate()?;
        let RuinQuery { x, p, q, r, lambda, .. } = *query;
        let kind = query.delay_kind();
        let exp_only = |this: &Self| -> Result<(f64, &'static str)> {
            let ex = ExponentialDelay::new(&this.model);
            let b = query.barrier();
            Ok(match quantity {
                Quantity::ExitLt => (ex.exit_lt(p, q, x, b?), "exponential_delay_exit"),
                Quantity::LtTwoSided => (ex.lt_two_sided(p, q, x, b?), "exponential_delay_two_sided"),
                Quantity::JointLt if lambda == 0.0 => (ex.lt_two_sided(p, q, x, b?), "exponential_delay_two_sided"),
                Quantity::JointLt => {
                    return Err(Error::Unsupported(
                        "joint transform with lambda > 0 needs a finite delay r".into(),
                    ))
                }
                Quantity::LtInfinite => (ex.lt_infinite(p, q, x), "exponential_delay_infinite"),
                Quantity::RuinProb | Quantity::RuinExp => {
                    (this.ruin_prob_exp_delay(x, q)?, "exponential_delay_ruin")
                }
                Quantity::RuinDet => unreachable!(),
                Quantity::RuinClassical => unreachable!(),
            })
        };
        match quantity {
            Quantity::RuinClassical => return Ok((self.ruin_prob_classical(x), "classical_ruin")),
            Quantity::RuinExp => {
                return Ok((self.ruin_prob_exp_delay(x, q)?, "exponential_delay_ruin"));
            }
            Quantity::RuinDet => {
                return Ok((self.ruin_prob_det_delay(x, r)?, "deterministic_delay_ruin"));
            }
            _ => {}
        }
        match kind {
            DelayKind::Classical => {
                let cl = Classical::new(&self.model);
                let b = query.barrier();
                Ok(match quantity {
                    Quantity::ExitLt => (cl.exit_lt(p, x, b?), "classical_exit"),
                    Quantity::JointLt => (cl.joint_lt(p, lambda, x, b?), "classical_two_sided"),
                    Quantity::LtTwoSided => (cl.joint_lt(p, 0.0, x, b?), "classical_two_sided"),
                    Quantity::LtInfinite => (cl.lt_infinite(p, x), "classical_infinite"),
                    _ => (self.ruin_prob_classical(x), "classical_ruin"),
                })
            }
            DelayKind::Exponential => exp_only(self),
            DelayKind::Mixed | DelayKind::Deterministic => {
                let tag = |mixed: &'static str, det: &'static str| {
                    if kind == DelayKind::Mixed {
                        mixed
                    } else {
                        det
                    }
                };
                Ok(match quantity {
                    Quantity::JointLt => (self.joint_lt_ruin(query)?, tag("mixed_delay_joint", "deterministic_delay_joint")),
                    Quantity::ExitLt => (self.exit_lt(query)?, tag("mixed_delay_exit", "deterministic_delay_exit")),
                    Quantity::LtTwoSided => (
                        self.lt_ruin_two_sided(query)?,
                        tag("mixed_delay_two_sided", "deterministic_delay_two_sided"),
                    ),
                    Quantity::LtInfinite => (
                        self.lt_ruin_infinite(query)?,
                        tag("mixed_delay_infinite", "deterministic_delay_infinite"),
                    ),
                    _ => (self.ruin_prob_mixed(x, r, q)?, tag("mixed_delay_ruin", "deterministic_delay_ruin")),
                })
            }
        }
    }
}

/// Quantities exposed through [`compute`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    JointLt,
    ExitLt,
    LtTwoSided,
    LtInfinite,
    RuinProb,
    RuinExp,
    RuinDet,
    RuinClassical,
}

impl Quantity {
    pub const ALL: [Quantity; 8] = [
        Quantity::JointLt,
        Quantity::ExitLt,
        Quantity::LtTwoSided,
        Quantity::LtInfinite,
        Quantity::RuinProb,
        Quantity::RuinExp,
        Quantity::RuinDet,
        Quantity::RuinClassical,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Quantity::JointLt => "joint_lt",
            Quantity::ExitLt => "exit_lt",
            Quantity::LtTwoSided => "lt_two_sided",
            Quantity::LtInfinite => "lt_infinite",
            Quantity::RuinProb => "ruin_prob",
            Quantity::RuinExp => "ruin_exp",
            Quantity::RuinDet => "ruin_det",
            Quantity::RuinClassical => "ruin_classical",
        }
    }
}

impl std::str::FromStr for Quantity {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Quantity::ALL
            .into_iter()
            .find(|q| q.name() == s)
            .ok_or_else(|| format!("unknown quantity {s:?}"))
    }
}

/// Value of a computed quantity with the identity it came from and an error
/// estimate: the gap to a re-run at a hundredfold looser precision, which
/// overstates the error of the value itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Computation {
    pub value: f64,
    pub method: &'static str,
    pub est_error: f64,
}

pub fn compute(model: &LevyModel, quantity: Quantity, query: &RuinQuery, prec: Precision) -> Result<Computation> {
    let (value, method) = Parisian::with_precision(model, prec).evaluate(quantity, query)?;
    let (coarse, _) = Parisian::with_precision(model, prec.scaled(100.0)).evaluate(quantity, query)?;
    Ok(Computation {
        value,
        method,
        est_error: (value - coarse).abs(),
    })
}

/// Identities for a purely exponential delay of rate `q`.
#[derive(Debug, Clone, Copy)]
pub struct ExponentialDelay {
    model: LevyModel,
}

impl ExponentialDelay {
    pub fn new(model: &LevyModel) -> Self {
        Self { model: *model }
    }

    /// `Z_p(x, Φ(p+q)) / Z_p(b, Φ(p+q))`.
    pub fn exit_lt(&self, p: f64, q: f64, x: f64, b: f64) -> f64 {
        let w = ScaleFunction::new(&self.model, p);
        let phi = self.model.phi_inverse(p + q);
        w.z(x, phi) / w.z(b, phi)
    }

    /// `q/(p+q) (Z_p(x,0) − Z_p(x,Φ(p+q))/Z_p(b,Φ(p+q)) Z_p(b,0))`.
    pub fn lt_two_sided(&self, p: f64, q: f64, x: f64, b: f64) -> f64 {
        let w = ScaleFunction::new(&self.model, p);
        let phi = self.model.phi_inverse(p + q);
        q / (p + q) * (w.z(x, 0.0) - w.z(x, phi) / w.z(b, phi) * w.z(b, 0.0))
    }

    /// `b → ∞` limit of [`Self::lt_two_sided`]:
    /// `q/(p+q) (Z_p(x,0) − Z_p(x,Φ(p+q)) · p(Φ(p+q) − Φ(p))/(qΦ(p)))`.
    pub fn lt_infinite(&self, p: f64, q: f64, x: f64) -> f64 {
        let w = ScaleFunction::new(&self.model, p);
        let phi_pq = self.model.phi_inverse(p + q);
        let ratio = if p == 0.0 {
            self.model.drift_mean_positive() * phi_pq / q
        } else {
            let phi_p = self.model.phi_inverse(p);
            p * (phi_pq - phi_p) / (q * phi_p)
        };
        q / (p + q) * (w.z(x, 0.0) - w.z(x, phi_pq) * ratio)
    }
}

/// Identities without any delay.
#[derive(Debug, Clone, Copy)]
pub struct Classical {
    model: LevyModel,
}

impl Classical {
    pub fn new(model: &LevyModel) -> Self {
        Self { model: *model }
    }

    /// `W^(p)(x)/W^(p)(b)`.
    pub fn exit_lt(&self, p: f64, x: f64, b: f64) -> f64 {
        let w = ScaleFunction::new(&self.model, p);
        w.eval(x) / w.eval(b)
    }

    /// `Z_p(x,λ) − W^(p)(x)/W^(p)(b) Z_p(b,λ)`.
    pub fn joint_lt(&self, p: f64, lambda: f64, x: f64, b: f64) -> f64 {
        let w = ScaleFunction::new(&self.model, p);
        w.z(x, lambda) - w.eval(x) / w.eval(b) * w.z(b, lambda)
    }

    /// `E_x[e^{−pτ_0⁻}; τ_0⁻ < ∞] = Z_p(x,0) − (p/Φ(p)) W^(p)(x)`.
    pub fn lt_infinite(&self, p: f64, x: f64) -> f64 {
        let w = ScaleFunction::new(&self.model, p);
        let ratio = if p == 0.0 {
            self.model.drift_mean_positive()
        } else {
            p / self.model.phi_inverse(p)
        };
        w.z(x, 0.0) - ratio * w.eval(x)
    }
}

/// Coefficients of `𝒲_z^(q,−q)(x+z) = A₁(x)e^{z(D−c)} + A₂(x)e^{−z(D+c)}`
/// for unit-volatility Brownian motion, `D = √(c²+2q)`, `x ≥ 0`.
pub fn brownian_a1_a2(c: f64, x: f64, q: f64) -> (f64, f64) {
    let d = (c * c + 2.0 * q).sqrt();
    let decay = (-2.0 * c * x).exp();
    let lo = q / (c * d * (d - c));
    let hi = q / (c * d * (d + c));
    (lo - hi * decay, hi - lo * decay)
}

/// Mixed-delay ruin probability of `X_t = ct + B_t` from the two tilted
/// Gaussian moments:
/// `1 − c(A₁Ψ₁ + A₂Ψ₂)/(qΨ₁/((D−c)D) + qΨ₂/((D+c)D))`.
pub fn brownian_ruin_closed(c: f64, x: f64, r: f64, q: f64) -> f64 {
    1.0 - c * brownian_ratio(c, x, r, q)
}

/// The same expression without the leading `E[X_1] = c` factor, as it is
/// sometimes displayed; agrees with [`brownian_ruin_closed`] only at `c = 1`.
pub fn brownian_ruin_closed_as_printed(c: f64, x: f64, r: f64, q: f64) -> f64 {
    1.0 - brownian_ratio(c, x, r, q)
}

fn brownian_ratio(c: f64, x: f64, r: f64, q: f64) -> f64 {
    let d = (c * c + 2.0 * q).sqrt();
    let (a1, a2) = brownian_a1_a2(c, x, q);
    let (p1, p2) = psi1_psi2(c, r, q);
    let den = q / ((d - c) * d) * p1 + q / ((d + c) * d) * p2;
    (a1 * p1 + a2 * p2) / den
}

/// `r → ∞` limit of [`brownian_ruin_closed`]: `e^{−2cx}(D−c)/(D+c)`.
pub fn brownian_exp_delay_limit(c: f64, x: f64, q: f64) -> f64 {
    let d = (c * c + 2.0 * q).sqrt();
    (-2.0 * c * x).exp() * (d - c) / (d + c)
}

/// Classical ruin probability of `ct + σB_t`: `e^{−2cx/σ²}` for `c > 0`.
pub fn brownian_classical_ruin(c: f64, sigma: f64, x: f64) -> f64 {
    if c <= 0.0 || x < 0.0 {
        1.0
    } else {
        (-2.0 * c * x / (sigma * sigma)).exp()
    }
}

/// Classical ruin probability with exponential claims:
/// `(η/(cα)) e^{−(α−η/c)x}` under net profit.
pub fn cl_classical_ruin(c: f64, eta: f64, alpha: f64, x: f64) -> f64 {
    if c * alpha <= eta || x < 0.0 {
        1.0
    } else {
        eta / (c * alpha) * (-(alpha - eta / c) * x).exp()
    }
}

/// `P(X_r ≤ y)` for Gaussian `X_r`; handy reference for the verify suite.
pub fn gaussian_cdf(c: f64, sigma: f64, r: f64, y: f64) -> f64 {
    norm_cdf((y - c * r) / (sigma * r.sqrt()))
}
