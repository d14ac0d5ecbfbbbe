//! Self-checks: analytic identities, limiting regimes, agreement with
//! simulation and monotonicity, gathered into one deterministic report.
//!
//! A [`Check`] passes when `|lhs − rhs| ≤ tol`. An [`Observation`] records
//! readings that are reported but not judged, such as alternative readings of
//! a displayed formula.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use statrs::function::gamma::gamma_lr;

use crate::error::{Error, Result};
use crate::levy_model::{cl_roots, phi_by_bracketing, LaplaceExponent, LevyModel};
use crate::montecarlo::{
    brownian_refinement, estimate_exit_below, estimate_functional, estimate_functionals, estimate_occupation,
    estimate_upcrossing_lt, Functional, MCEstimate, SimConfig,
};
use crate::parisian::{
    brownian_a1_a2, brownian_exp_delay_limit, brownian_ruin_closed, brownian_ruin_closed_as_printed, Classical,
    DelayedScale, ExponentialDelay, LambdaForm, LambdaParams, Parisian, Precision, RuinQuery,
};
use crate::quadrature::{Integrator, Tolerance};
use crate::scale_fn::{z_by_quadrature, ScaleFunction, ScriptW};
use crate::transition::{
    brownian_first_passage_cdf, cl_tilt_integral, kendall_first_passage_cdf, psi1_psi2, TransitionMeasure,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    /// Reduced grids and path counts, for quick runs.
    Fast,
    /// Grids and path counts used by the acceptance tests.
    Full,
}

impl FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "fast" => Ok(Level::Fast),
            "full" => Ok(Level::Full),
            other => Err(format!("unknown level {other:?}, expected fast or full")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub abs_err: f64,
    pub tol: f64,
    pub passed: bool,
    /// The identity or result being exercised, in words.
    pub provenance: String,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub note: String,
}

impl Check {
    pub fn new(name: impl Into<String>, lhs: f64, rhs: f64, tol: f64, provenance: &str) -> Self {
        let abs_err = (lhs - rhs).abs();
        Self {
            name: name.into(),
            lhs,
            rhs,
            abs_err,
            tol,
            // NaN fails
            passed: abs_err <= tol,
            provenance: provenance.into(),
            note: String::new(),
        }
    }

    /// Check whose sides come from fallible computations; an error fails it.
    pub fn from_results(name: impl Into<String>, sides: Result<(f64, f64)>, tol: f64, provenance: &str) -> Self {
        match sides {
            Ok((lhs, rhs)) => Self::new(name, lhs, rhs, tol, provenance),
            Err(e) => {
                let mut c = Self::new(name, f64::NAN, f64::NAN, tol, provenance);
                c.note = format!("error: {e}");
                c
            }
        }
    }

    /// Simulation against an analytic value, with tolerance
    /// `max(3·stderr, allowance)`.
    pub fn against_simulation(
        name: impl Into<String>,
        estimate: Result<MCEstimate>,
        analytic: Result<f64>,
        allowance: f64,
        provenance: &str,
    ) -> Self {
        match (estimate, analytic) {
            (Ok(est), Ok(value)) => {
                let tol = (3.0 * est.stderr).max(allowance);
                let mut c = Self::new(name, est.point, value, tol, provenance);
                c.note = format!(
                    "stderr {:.3e}, n {}, seed {}, censored {}",
                    est.stderr, est.n_paths, est.seed, est.censored
                );
                if est.censoring_exceeds_bound {
                    c.note.push_str(", censored mass exceeds a tenth of the stderr");
                }
                c
            }
            (Err(e), _) | (_, Err(e)) => Self::from_results(name, Err(e), allowance, provenance),
        }
    }

    /// A count of violations; passes only at zero.
    pub fn count(name: impl Into<String>, violations: usize, note: String, provenance: &str) -> Self {
        let mut c = Self::new(name, violations as f64, 0.0, 0.0, provenance);
        c.note = note;
        c
    }

    fn with_note(mut self, note: impl Into<String>) -> Self {
        let note = note.into();
        if self.note.is_empty() {
            self.note = note;
        } else {
            self.note = format!("{}; {note}", self.note);
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Observation {
    pub name: String,
    pub description: String,
    pub readings: BTreeMap<String, f64>,
}

impl Observation {
    fn new(name: impl Into<String>, description: &str, readings: &[(&str, Result<f64>)]) -> Self {
        Self {
            name: name.into(),
            description: description.into(),
            readings: readings
                .iter()
                .map(|(k, v)| (k.to_string(), v.as_ref().copied().unwrap_or(f64::NAN)))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Summary {
    pub checks: usize,
    pub passed: usize,
    pub failed: usize,
    pub observations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub checks: Vec<Check>,
    pub observations: Vec<Observation>,
    pub summary: Summary,
}

impl VerificationReport {
    /// Sorted by name, so equal inputs give byte-identical output.
    pub fn new(mut checks: Vec<Check>, mut observations: Vec<Observation>) -> Self {
        checks.sort_by(|a, b| a.name.cmp(&b.name));
        observations.sort_by(|a, b| a.name.cmp(&b.name));
        let passed = checks.iter().filter(|c| c.passed).count();
        let summary = Summary {
            checks: checks.len(),
            passed,
            failed: checks.len() - passed,
            observations: observations.len(),
        };
        Self {
            checks,
            observations,
            summary,
        }
    }

    pub fn merge<I: IntoIterator<Item = VerificationReport>>(reports: I) -> Self {
        let (mut checks, mut observations) = (Vec::new(), Vec::new());
        for r in reports {
            checks.extend(r.checks);
            observations.extend(r.observations);
        }
        Self::new(checks, observations)
    }

    pub fn all_passed(&self) -> bool {
        self.summary.failed == 0
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// Checks whose name starts with `prefix`.
    pub fn matching<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a Check> + 'a {
        self.checks.iter().filter(move |c| c.name.starts_with(prefix))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_table(&self) -> String {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(4).max(4);
        let mut out = String::new();
        let _ = writeln!(out, "{:<6} {:<width$} {:>12} {:>12}", "status", "name", "abs_err", "tol");
        for c in &self.checks {
            let status = if c.passed { "PASS" } else { "FAIL" };
            let _ = writeln!(out, "{status:<6} {:<width$} {:>12.3e} {:>12.3e}", c.name, c.abs_err, c.tol);
        }
        for o in &self.observations {
            let readings: Vec<String> = o.readings.iter().map(|(k, v)| format!("{k}={v:.10}")).collect();
            let _ = writeln!(out, "{:<6} {:<width$} {}", "NOTE", o.name, readings.join(" "));
        }
        let s = &self.summary;
        let _ = writeln!(
            out,
            "{} checks, {} passed, {} failed, {} observations",
            s.checks, s.passed, s.failed, s.observations
        );
        out
    }
}

/// Brownian `(1, 1)` and exponential claims `(2, 1, 1)`.
pub fn default_models() -> Vec<LevyModel> {
    vec![
        LevyModel::BrownianRisk { c: 1.0, sigma: 1.0 },
        LevyModel::CramerLundbergExp {
            c: 2.0,
            eta: 1.0,
            alpha: 1.0,
        },
    ]
}

fn tag(model: &LevyModel) -> &'static str {
    match model {
        LevyModel::BrownianRisk { .. } => "brownian",
        LevyModel::CramerLundbergExp { .. } => "cramer_lundberg",
    }
}

fn name(suite: &str, check: &str, model: &LevyModel, point: &str) -> String {
    format!("{suite}.{check}.{}.{point}", tag(model))
}

/// 64-bit FNV-1a, for seeds that depend only on the check name.
fn stable_hash(text: &str) -> u64 {
    text.bytes()
        .fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

fn sim_cfg(n_paths: u64, dt: f64, seed: u64, label: &str) -> SimConfig {
    SimConfig {
        n_paths,
        dt,
        seed: seed ^ stable_hash(label),
        ..SimConfig::default()
    }
}

fn fine() -> Integrator {
    Integrator::new(Tolerance::new(1e-13, 1e-11))
}

/// `∫_0^∞ f` for an integrand decaying at least like `e^{−κt}` eventually:
/// the range doubles until the tail bound `|f(T)|/κ` is below `1e-12`.
/// Returns the integral and the tail bound.
fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, kappa: f64, breaks: &[f64], start: f64) -> Result<(f64, f64)> {
    let mut top = start;
    let mut tail = f(top).abs() / kappa;
    while tail > 1e-12 {
        top *= 2.0;
        tail = f(top).abs() / kappa;
        if top > 1e4 {
            return Err(Error::Unsupported("integrand does not decay".into()));
        }
    }
    let mut points = vec![0.0];
    points.extend(breaks.iter().copied().filter(|&b| b > 0.0 && b < top));
    points.push(top);
    Ok((fine().integrate_with_breaks(f, &points)?.value, tail))
}

/// Records the first error raised inside an integrand.
struct Capture(std::cell::Cell<Option<Error>>);

impl Capture {
    fn new() -> Self {
        Self(std::cell::Cell::new(None))
    }

    fn take(&self, r: Result<f64>) -> f64 {
        r.unwrap_or_else(|e| {
            self.0.set(Some(e));
            0.0
        })
    }

    fn finish<T>(self, value: T) -> Result<T> {
        match self.0.into_inner() {
            Some(e) => Err(e),
            None => Ok(value),
        }
    }
}

fn first_passage_cdf(model: &LevyModel, z: f64, r: f64) -> Result<f64> {
    match *model {
        LevyModel::BrownianRisk { c, sigma } => Ok(brownian_first_passage_cdf(c, sigma, z, r)),
        LevyModel::CramerLundbergExp { .. } => kendall_first_passage_cdf(model, z, r),
    }
}

/// Brownian drift with unit volatility, the case of the explicit displays.
fn unit_brownian(model: &LevyModel) -> Option<f64> {
    match *model {
        LevyModel::BrownianRisk { c, sigma } if sigma == 1.0 => Some(c),
        _ => None,
    }
}

// Identity suite

/// Points used by [`run_identity_suite`].
#[derive(Debug, Clone)]
pub struct IdentityGrid {
    pub laplace_rates: Vec<f64>,
    pub lambda_zero: Vec<(f64, f64)>,
    pub form_draws: usize,
    pub seed: u64,
    pub mc_paths: u64,
}

impl IdentityGrid {
    pub fn for_level(level: Level, seed: u64) -> Self {
        let full = level == Level::Full;
        let pts = [0.1, 0.5, 1.0, 2.0];
        let lambda_zero = if full {
            pts.iter().flat_map(|&q| pts.iter().map(move |&r| (q, r))).collect()
        } else {
            vec![(0.1, 0.5), (1.0, 2.0)]
        };
        Self {
            laplace_rates: if full { vec![0.0, 0.3, 1.0, 2.5] } else { vec![0.0, 1.0] },
            lambda_zero,
            form_draws: if full { 50 } else { 5 },
            seed,
            mc_paths: if full { 1_000_000 } else { 100_000 },
        }
    }
}

pub fn run_identity_suite(model: &LevyModel, grid: &IdentityGrid) -> VerificationReport {
    let mut checks = Vec::new();
    scale_identities(model, grid, &mut checks);
    transition_identities(model, &mut checks);
    delayed_identities(model, grid, &mut checks);
    ruin_identities(model, &mut checks);
    if matches!(model, LevyModel::CramerLundbergExp { .. }) {
        exit_simulations(model, grid, &mut checks);
    }
    VerificationReport::new(checks, Vec::new())
}

fn scale_identities(model: &LevyModel, grid: &IdentityGrid, out: &mut Vec<Check>) {
    const ID: &str = "identity";
    for &p in &grid.laplace_rates {
        let w = ScaleFunction::new(model, p);
        let phi = model.phi_inverse(p);
        for gap in [0.5, 2.0] {
            let theta = phi + gap;
            let sides = integrate_to_infinity(|y| (-theta * y).exp() * w.eval(y), gap, &[], 8.0)
                .map(|(v, tail)| (v, 1.0 / (model.psi(theta) - p), tail));
            let tail = sides.as_ref().map(|s| s.2).unwrap_or(f64::NAN);
            out.push(
                Check::from_results(
                    name(ID, "laplace_w", model, &format!("p={p},theta={theta:.6}")),
                    sides.map(|s| (s.0, s.1)),
                    1e-8,
                    "Laplace transform of W^(p) equals 1/(psi(theta) - p)",
                )
                .with_note(format!("truncation bound {tail:.1e}")),
            );
        }
    }

    for (p, s, a) in [(0.2, 0.5, 1.0), (0.5, -0.3, 0.7), (0.0, 0.4, 2.0)] {
        let sw = ScriptW::new(model, p, s);
        let growth = model.phi_inverse(p + s);
        let theta = growth + 1.0;
        let sides = integrate_to_infinity(|z| (-theta * z).exp() * sw.eval(a, a + z), 1.0, &[], 8.0).map(|(v, _)| {
            let w = ScaleFunction::new(model, p);
            (v, w.z(a, theta) / (model.psi(theta) - p - s))
        });
        out.push(Check::from_results(
            name(ID, "laplace_script_w", model, &format!("p={p},s={s},a={a}")),
            sides,
            1e-7,
            "Laplace transform of the two-rate scale function past its cutoff",
        ));
    }

    for (p, s, a, x) in [(0.3, 0.6, 0.5, 1.5), (0.5, -0.3, 1.0, 2.0), (0.0, 1.0, 0.2, 3.0), (1.0, 0.5, 1.5, 1.5)] {
        let sw = ScriptW::new(model, p, s);
        let (v, alt) = (sw.eval(a, x), sw.eval_alt(a, x));
        out.push(Check::new(
            name(ID, "script_w_forms", model, &format!("p={p},s={s},a={a},x={x}")),
            v,
            alt,
            1e-9 * v.abs().max(1.0),
            "the two convolution forms of the two-rate scale function agree",
        ));
    }

    for p in [0.1, 0.5] {
        let w = ScaleFunction::new(model, p);
        let phi = model.phi_inverse(p);
        let big = 50.0;
        out.push(Check::new(
            name(ID, "w_ratio_limit", model, &format!("p={p}")),
            w.eval(big + 1.0) / w.eval(big),
            phi.exp(),
            1e-6,
            "W^(p)(x+y)/W^(p)(x) tends to exp(Phi(p) y)",
        ));
        let theta = phi + 1.0;
        out.push(Check::new(
            name(ID, "z_over_w_limit", model, &format!("p={p},theta={theta:.6}")),
            w.z(big, theta) / w.eval(big),
            (model.psi(theta) - p) / (theta - phi),
            1e-6,
            "Z_p(x,theta)/W^(p)(x) tends to (psi(theta) - p)/(theta - Phi(p))",
        ));
    }

    for p in [0.5, 2.0] {
        let w = ScaleFunction::new(model, p);
        let mut violations = 0;
        let mut prev = 0.0;
        for k in 1..=2000 {
            let v = w.eval(k as f64 * 0.01);
            if !(v > prev) {
                violations += 1;
            }
            prev = v;
        }
        out.push(Check::count(
            name(ID, "w_increasing", model, &format!("p={p}")),
            violations,
            "grid step 0.01 on (0, 20]".into(),
            "W^(p) is strictly increasing",
        ));
    }

    for (p, x, theta) in [(0.2, 1.3, 0.0), (0.5, 2.0, 0.7), (1.0, 0.4, 2.0)] {
        out.push(Check::from_results(
            name(ID, "z_quadrature", model, &format!("p={p},x={x},theta={theta}")),
            z_by_quadrature(model, p, x, theta, &fine()).map(|q| (ScaleFunction::new(model, p).z(x, theta), q)),
            1e-9,
            "Z_p(x,theta) from its defining integral",
        ));
    }

    let mut worst: f64 = 0.0;
    for k in 0..=45 {
        let p = 10f64.powf(-6.0 + k as f64 * 0.2);
        worst = worst.max((model.psi(model.phi_inverse(p)) - p).abs());
    }
    out.push(Check::new(
        name(ID, "phi_residual", model, "p=1e-6..1e3"),
        worst,
        0.0,
        1e-10,
        "Phi(p) solves psi(theta) = p",
    ));
    let mut worst: f64 = 0.0;
    for k in 0..=30 {
        let p = 10f64.powf(-4.0 + k as f64 * 0.2);
        let phi = model.phi_inverse(p);
        worst = worst.max((phi - phi_by_bracketing(model, p)).abs() / phi.max(1.0));
    }
    out.push(Check::new(
        name(ID, "phi_bracketing", model, "p=1e-4..1e2"),
        worst,
        0.0,
        1e-10,
        "closed-form roots agree with bracketing on psi",
    ));

    if let Some(c) = unit_brownian(model) {
        let (q, x) = (0.5, 1.7);
        let d = (c * c + 2.0 * q).sqrt();
        let w = ScaleFunction::new(model, q);
        let shown_w = (((d - c) * x).exp() - (-(d + c) * x).exp()) / d;
        let shown_z = q / d * (((d - c) * x).exp() / (d - c) + (-(d + c) * x).exp() / (d + c));
        let shown_w0 = (1.0 - (-2.0 * c * x).exp()) / c;
        let prov = "explicit Brownian scale functions";
        out.push(Check::new(name(ID, "explicit_w", model, "q=0.5,x=1.7"), w.eval(x), shown_w, 1e-12, prov));
        out.push(Check::new(name(ID, "explicit_z", model, "q=0.5,x=1.7"), w.z(x, 0.0), shown_z, 1e-12, prov));
        out.push(Check::new(
            name(ID, "explicit_w", model, "q=0,x=1.7"),
            ScaleFunction::new(model, 0.0).eval(x),
            shown_w0,
            1e-12,
            prov,
        ));
        let z = 0.6;
        let (a1, a2) = brownian_a1_a2(c, x, q);
        out.push(Check::new(
            name(ID, "explicit_script_w", model, "q=0.5,x=1.7,z=0.6"),
            ScriptW::new(model, q, -q).eval(z, x + z),
            a1 * ((d - c) * z).exp() + a2 * (-(d + c) * z).exp(),
            1e-12,
            "two-exponential form of the Brownian kernel in z",
        ));
    }
    if let LevyModel::CramerLundbergExp { c, eta, alpha } = *model {
        let (p, q, x, z) = (0.3, 0.5, 1.7, 0.6);
        out.push(Check::new(
            name(ID, "explicit_script_w", model, "p=0.3,q=0.5,x=1.7,z=0.6"),
            ScriptW::new(model, p, q).eval(z, x),
            shown_cl_script_w(c, eta, alpha, p, q, x, z),
            1e-10,
            "explicit two-rate scale function for exponential claims",
        ));
    }
}

/// Displayed expansion of `𝒲_z^(p,q)(x)` for exponential claims.
fn shown_cl_script_w(c: f64, eta: f64, alpha: f64, p: f64, q: f64, x: f64, z: f64) -> f64 {
    let (a, b) = (cl_roots(c, eta, alpha, p), cl_roots(c, eta, alpha, p + q));
    let delta = |r: &crate::levy_model::Roots| (c * (r.phi - r.theta)).powi(2);
    let s = (delta(&b) * delta(&a)).sqrt();
    let inner = |k: f64| {
        (alpha + a.phi) / (k - a.phi) * (a.phi * z).exp() - (alpha + a.theta) / (k - a.theta) * (a.theta * z).exp()
    };
    q * (alpha + b.phi) / s * (b.phi * (x - z)).exp() * inner(b.phi)
        - q * (alpha + b.theta) / s * (b.theta * (x - z)).exp() * inner(b.theta)
}

fn transition_identities(model: &LevyModel, out: &mut Vec<Check>) {
    const ID: &str = "identity";
    for r in [0.1, 1.0, 5.0] {
        out.push(Check::from_results(
            name(ID, "transition_mass", model, &format!("r={r}")),
            TransitionMeasure::new(model, r).and_then(|m| m.total_mass(1e-12)).map(|v| (v, 1.0)),
            1e-9,
            "the transition law has unit mass",
        ));
    }
    let horizon = 200.0;
    out.push(Check::from_results(
        name(ID, "first_passage_total", model, "z=1,r=200"),
        kendall_first_passage_cdf(model, 1.0, horizon).map(|v| (v, 1.0)),
        1e-3,
        "first passage above a level is certain under positive drift (Kendall)",
    ));
    if let LevyModel::BrownianRisk { c, sigma } = *model {
        for (z, r) in [(0.5, 1.0), (2.0, 3.0)] {
            out.push(Check::from_results(
                name(ID, "kendall_brownian", model, &format!("z={z},r={r}")),
                kendall_first_passage_cdf(model, z, r).map(|k| (k, brownian_first_passage_cdf(c, sigma, z, r))),
                1e-9,
                "Kendall's identity against the Brownian first-passage law",
            ));
        }
    }
    if let LevyModel::CramerLundbergExp { .. } = model {
        let roots = model.roots(0.5);
        for f in [roots.phi, roots.theta, 0.0] {
            for r in [0.5, 1.0, 2.0] {
                let sides = cl_tilt_integral(model, r, f).and_then(|series| {
                    let m = TransitionMeasure::new(model, r)?;
                    let quad = m.integrate_tilted(|z| (f * z).exp(), 1e-13)? * r;
                    Ok((series, quad))
                });
                out.push(Check::from_results(
                    name(ID, "tilt_series", model, &format!("f={f:.6},r={r}")),
                    sides,
                    1e-7,
                    "incomplete-gamma series for the tilted partial moment",
                ));
            }
        }
    }
    if let Some(c0) = unit_brownian(model) {
        let _ = c0;
        for c in [0.5, 1.0, 2.0] {
            let bm = LevyModel::BrownianRisk { c, sigma: 1.0 };
            for r in [0.5, 1.0, 2.0] {
                for q in [0.5, 1.0, 2.0] {
                    let d = (c * c + 2.0 * q).sqrt();
                    let (p1, p2) = psi1_psi2(c, r, q);
                    let quad = |k: f64| -> Result<f64> {
                        let m = TransitionMeasure::new(&bm, r)?;
                        m.integrate_tilted_growing(|z| (k * z).exp(), 0.0, k.max(0.0), &fine())
                    };
                    let point = format!("c={c},r={r},q={q}");
                    let prov = "Gaussian tilted partial moments";
                    out.push(Check::from_results(
                        format!("identity.psi1_closed_form.brownian.{point}"),
                        quad(d - c).map(|v| (p1, v)),
                        1e-8 * p1.abs().max(1.0),
                        prov,
                    ));
                    out.push(Check::from_results(
                        format!("identity.psi2_closed_form.brownian.{point}"),
                        quad(-(d + c)).map(|v| (p2, v)),
                        1e-8,
                        prov,
                    ));
                }
            }
        }
    }
}

fn delayed_identities(model: &LevyModel, grid: &IdentityGrid, out: &mut Vec<Check>) {
    const ID: &str = "identity";
    let an = Parisian::new(model);
    for &(q, r) in &grid.lambda_zero {
        let sides = an.lambda_det(q, 0.0, r).map(|v| (v, (q * r).exp()));
        out.push(Check::from_results(
            name(ID, "lambda_at_zero", model, &format!("q={q},r={r}")),
            sides,
            1e-8 * (q * r).exp(),
            "Lambda^(q)(0, r) = exp(q r)",
        ));
    }

    let kink = |y: f64| match *model {
        LevyModel::CramerLundbergExp { c, .. } => vec![(y / c).sqrt()],
        _ => vec![],
    };
    for (theta, q, y) in [(2.0, 0.5, 0.5), (1.5, 0.2, 1.0)] {
        let cap = Capture::new();
        let sides = integrate_to_infinity(
            |v| {
                if v <= 0.0 {
                    return 0.0;
                }
                let r = v * v;
                2.0 * v * (-theta * r).exp() * cap.take(an.lambda_det(q, -y, r))
            },
            // in v, the integrand decays faster than exp(-(theta - q) v)
            theta - q,
            &kink(y),
            4.0,
        );
        let sides = cap
            .finish(sides)
            .and_then(|s| s)
            .map(|(v, _)| (v, (-model.phi_inverse(theta) * y).exp() / (theta - q)));
        out.push(Check::from_results(
            name(ID, "lambda_time_laplace", model, &format!("theta={theta},q={q},y={y}")),
            sides,
            1e-6,
            "Laplace transform in r of Lambda^(q)(-y, r)",
        ));
    }

    for (theta, y) in [(1.0, 0.5), (2.0, 1.5)] {
        let cap = Capture::new();
        let sides = integrate_to_infinity(
            |v| {
                if v <= 0.0 {
                    return 0.0;
                }
                let r = v * v;
                let tail = TransitionMeasure::new(model, r)
                    .and_then(|m| m.integrate_tilted_from(|_| 1.0, y, &Integrator::new(Tolerance::new(1e-14, 1e-12))));
                2.0 * v * (-theta * r).exp() * cap.take(tail)
            },
            theta,
            &kink(y),
            4.0,
        );
        let sides = cap
            .finish(sides)
            .and_then(|s| s)
            .map(|(v, _)| (v, (-model.phi_inverse(theta) * y).exp() / model.phi_inverse(theta)));
        out.push(Check::from_results(
            name(ID, "tilted_tail_laplace", model, &format!("theta={theta},y={y}")),
            sides,
            1e-6,
            "Laplace transform in r of the tilted tail of X_r beyond y",
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(grid.seed ^ stable_hash(tag(model)));
    for k in 0..grid.form_draws {
        let params = LambdaParams {
            p: rng.gen_range(0.0..1.0),
            s: rng.gen_range(0.0..1.0),
            r: rng.gen_range(0.25..2.0),
            x: rng.gen_range(-1.0..3.0),
        };
        let forms = [LambdaForm::Convolution, LambdaForm::FixedCutoff, LambdaForm::Renewal];
        let values: Result<Vec<f64>> = forms.iter().map(|&f| an.lambda_mixed_form(params, f)).collect();
        let sides = values.map(|v| {
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (lo, hi)
        });
        out.push(
            Check::from_results(
                name(ID, "lambda_forms", model, &format!("draw{k:02}")),
                sides,
                1e-7,
                "convolution, fixed-cutoff and renewal forms of Lambda agree",
            )
            .with_note(format!(
                "p={:.6} s={:.6} r={:.6} x={:.6}",
                params.p, params.s, params.r, params.x
            )),
        );
    }

    let prec = Precision::default();
    for (p, q, r, x) in [(0.2, 0.5, 1.0, 1.0), (0.0, 1.0, 0.5, -0.3)] {
        let lhs = DelayedScale::new(model, p, q).time_integral(x, r, |_| 1.0, &prec);
        let kernel = ScriptW::new(model, p + q, -q);
        let lo = (-x).max(0.0);
        let top = match *model {
            LevyModel::BrownianRisk { c, sigma } => {
                c * r + model.phi_inverse(p + q) * sigma * sigma * r + 12.0 * sigma * r.sqrt()
            }
            LevyModel::CramerLundbergExp { c, .. } => c * r,
        };
        let cap = Capture::new();
        let rhs = fine().integrate(
            |z| {
                if z <= 0.0 {
                    return 0.0;
                }
                kernel.eval(z, x + z) * cap.take(first_passage_cdf(model, z, r))
            },
            lo,
            top,
        );
        let rhs = cap.finish(rhs).and_then(|v| v.map(|i| i.value));
        out.push(Check::from_results(
            name(ID, "lambda_time_integral", model, &format!("p={p},q={q},r={r},x={x}")),
            lhs.and_then(|l| rhs.map(|r| (l, r))),
            1e-5,
            "time integral of Lambda through first-passage probabilities",
        ));
    }
}

fn ruin_identities(model: &LevyModel, out: &mut Vec<Check>) {
    const ID: &str = "identity";
    let an = Parisian::new(model);
    for (x, b, r, q) in [(1.0, 3.0, 1.0, 0.5), (0.0, 2.0, 0.5, 1.0), (-0.5, 2.0, 1.0, 0.5)] {
        let query = RuinQuery::new(x, r, q).with_barrier(b);
        let sides = an
            .exit_lt(&query)
            .and_then(|e| an.lt_ruin_two_sided(&query).map(|t| (e + t, 1.0)));
        out.push(Check::from_results(
            name(ID, "exit_partition", model, &format!("x={x},b={b},r={r},q={q}")),
            sides,
            1e-7,
            "without discounting, exit above and ruin partition the outcomes",
        ));
    }
    for x in [-1.0, -0.3] {
        let sides = an.race_lemma(x, 0.0, 0.0, 0.5, 1.0).map(|(u, c)| (u + c, 1.0));
        out.push(Check::from_results(
            name(ID, "race_partition", model, &format!("x={x},r=1,q=0.5")),
            sides,
            1e-8,
            "recovery and clock expiry partition an excursion",
        ));
    }
    if let Some(_c) = unit_brownian(model) {
        for c in [0.5, 1.0, 2.0] {
            let bm = LevyModel::BrownianRisk { c, sigma: 1.0 };
            let generic = Parisian::new(&bm);
            for x in [0.5, 1.0, 2.0] {
                for (r, q) in [(0.5, 0.5), (1.0, 1.0), (2.0, 0.25)] {
                    out.push(Check::from_results(
                        format!("identity.brownian_closed_form.brownian.c={c},x={x},r={r},q={q}"),
                        generic.ruin_prob_mixed(x, r, q).map(|g| (brownian_ruin_closed(c, x, r, q), g)),
                        1e-8,
                        "closed-form Brownian mixed-delay ruin against the general formula",
                    ));
                }
            }
        }
    }
    if matches!(model, LevyModel::CramerLundbergExp { .. }) {
        let (x, b, p, lambda, q, r) = (1.0, 4.0, 0.2, 0.3, 0.5, 1.0);
        let point = "x=1,b=4,p=0.2,lambda=0.3,q=0.5,r=1";
        let parts = (|| -> Result<[(f64, f64); 2]> {
            let (mean_up, mean_clock) = an.undershoot_race_means(p, lambda, q, r)?;
            let down = an.classical_down_lt_stable(p, x, Some(b))?;
            let w = ScaleFunction::new(model, p);
            let ratio = w.eval(x) / w.eval(b);
            let decay = (-(p + q) * r).exp();
            let lx = an.lambda_mixed(LambdaParams { p, s: q, r, x })?;
            let lb = an.lambda_mixed(LambdaParams { p, s: q, r, x: b })?;
            let fx = an.f_cal(p, lambda, x, r, q)?;
            let fb = an.f_cal(p, lambda, b, r, q)?;
            Ok([
                (decay * (lx - ratio * lb), down * mean_up),
                ((fx - decay * lx) - ratio * (fb - decay * lb), down * mean_clock),
            ])
        })();
        let labels = [
            ("excursion_recovery", "first excursion below zero ends in recovery"),
            ("excursion_clock", "first excursion below zero ends in ruin"),
        ];
        for (k, (check, prov)) in labels.iter().enumerate() {
            out.push(Check::from_results(
                name(ID, check, model, point),
                parts.as_ref().map(|v| v[k]).map_err(|e| Error::Unsupported(e.to_string())),
                1e-8,
                prov,
            ));
        }
    }
    for (x, b, p) in [(1.0, 3.0, 0.5)] {
        let kink = match *model {
            LevyModel::CramerLundbergExp { c, .. } => vec![(b - x) / c],
            _ => vec![],
        };
        let cap = Capture::new();
        let lhs = integrate_to_infinity(
            |t| {
                if t <= 0.0 {
                    return 0.0;
                }
                p * (-p * t).exp() * cap.take(first_passage_cdf(model, b - x, t))
            },
            p,
            &kink,
            16.0,
        );
        let sides = cap
            .finish(lhs)
            .and_then(|v| v)
            .map(|(v, _)| (v, (-model.phi_inverse(p) * (b - x)).exp()));
        out.push(Check::from_results(
            name(ID, "upcrossing_lt", model, &format!("x={x},b={b},p={p}")),
            sides,
            1e-7,
            "Laplace transform of the first passage time above b",
        ));
    }
}

fn exit_simulations(model: &LevyModel, grid: &IdentityGrid, out: &mut Vec<Check>) {
    const ID: &str = "identity";
    let n = grid.mc_paths;
    let (x, b, p) = (1.0, 3.0, 0.5);
    let label = name(ID, "upcrossing_lt_simulated", model, "x=1,b=3,p=0.5");
    out.push(Check::against_simulation(
        label.clone(),
        estimate_upcrossing_lt(model, x, b, p, &sim_cfg(n, 1e-3, grid.seed, &label)),
        Ok((-model.phi_inverse(p) * (b - x)).exp()),
        0.0,
        "Laplace transform of the first passage time above b",
    ));

    let (x, a, b, p, s) = (2.0, 1.0, 4.0, 0.3, 0.6);
    let ws = ScaleFunction::new(model, s);
    let wp = ScaleFunction::new(model, p);
    let sw = ScriptW::new(model, s, p - s);
    let analytic = sw.eval(a, x) - wp.eval(x - a) / wp.eval(b - a) * sw.eval(a, b);
    let label = name(ID, "exit_below_weighted", model, "x=2,a=1,b=4,p=0.3,s=0.6");
    out.push(Check::against_simulation(
        label.clone(),
        estimate_exit_below(model, x, a, b, p, |y| ws.eval(y), &sim_cfg(n, 1e-3, grid.seed, &label)),
        Ok(analytic),
        0.0,
        "discounted W^(s) of the undershoot at the first passage below a",
    ));

    let (x, a, p) = (0.0, 1.0, 0.5);
    let edges = [-2.0, -1.0, 0.0, 0.5, 1.0];
    let label = name(ID, "killed_potential", model, "x=0,a=1,p=0.5");
    let estimates = estimate_occupation(model, x, a, p, &edges, &sim_cfg(n, 1e-3, grid.seed, &label));
    let w = ScaleFunction::new(model, p);
    let decay = (model.phi_inverse(p) * (x - a)).exp();
    // ∫ W over [0, u]
    let wbar = |u: f64| w.laplace_partial(0.0, u);
    for k in 0..edges.len() - 1 {
        let (lo, hi) = (edges[k], edges[k + 1]);
        let exact = decay * (wbar(a - lo) - wbar(a - hi)) - (wbar(x - lo) - wbar(x - hi));
        out.push(Check::against_simulation(
            format!("{label},bin=[{lo},{hi})"),
            estimates.as_ref().map(|v| v[k].clone()).map_err(|e| Error::Unsupported(e.to_string())),
            Ok(exact),
            0.0,
            "discounted occupation below a before the first passage above a",
        ));
    }
}

// Limit suite

pub fn run_limit_suite(model: &LevyModel, level: Level) -> VerificationReport {
    const ID: &str = "limit";
    let _ = level;
    let an = Parisian::new(model);
    let ex = ExponentialDelay::new(model);
    let cl = Classical::new(model);
    let mut out = Vec::new();

    let (p, q, x, b) = (0.2, 0.5, 1.0, 3.0);
    let long = 50.0;
    let q_long = RuinQuery::new(x, long, q).with_discount(p);
    let two = q_long.with_barrier(b);
    let prov = "long deterministic delays recover the exponential delay";
    let point = "p=0.2,q=0.5,x=1,b=3,r=50";
    out.push(Check::from_results(
        name(ID, "long_delay_exit", model, point),
        an.exit_lt(&two).map(|v| (v, ex.exit_lt(p, q, x, b))),
        1e-5,
        prov,
    ));
    out.push(Check::from_results(
        name(ID, "long_delay_two_sided", model, point),
        an.lt_ruin_two_sided(&two).map(|v| (v, ex.lt_two_sided(p, q, x, b))),
        1e-5,
        prov,
    ));
    out.push(Check::from_results(
        name(ID, "long_delay_infinite", model, "p=0.2,q=0.5,x=1,r=50"),
        an.lt_ruin_infinite(&q_long).map(|v| (v, ex.lt_infinite(p, q, x))),
        1e-5,
        prov,
    ));
    out.push(Check::from_results(
        name(ID, "long_delay_ruin", model, "q=0.5,x=1,r=50"),
        an.ruin_prob_mixed(x, long, q)
            .and_then(|v| an.ruin_prob_exp_delay(x, q).map(|e| (v, e))),
        1e-5,
        prov,
    ));

    let small_q = 1e-6;
    let r = 1.0;
    let prov = "a vanishing clock rate recovers the deterministic delay";
    out.push(Check::from_results(
        name(ID, "slow_clock_ruin", model, "x=1,r=1"),
        an.ruin_prob_mixed(x, r, small_q)
            .and_then(|v| an.ruin_prob_det_delay(x, r).map(|d| (v, d))),
        1e-4,
        prov,
    ));
    let det = RuinQuery::new(x, r, 0.0).with_barrier(b).with_discount(p);
    let slow = RuinQuery::new(x, r, small_q).with_barrier(b).with_discount(p);
    out.push(Check::from_results(
        name(ID, "slow_clock_exit", model, "p=0.2,x=1,b=3,r=1"),
        an.exit_lt(&slow).and_then(|v| an.exit_lt(&det).map(|d| (v, d))),
        1e-4,
        prov,
    ));
    out.push(Check::from_results(
        name(ID, "slow_clock_joint", model, "p=0.2,lambda=0.3,x=1,b=3,r=1"),
        an.joint_lt_ruin(&slow.with_tilt(0.3))
            .and_then(|v| an.joint_lt_ruin(&det.with_tilt(0.3)).map(|d| (v, d))),
        1e-4,
        prov,
    ));

    // √r convergence near small x; x is chosen to keep the gap below 1e-2
    let x0 = match model {
        LevyModel::BrownianRisk { .. } => 2.0,
        LevyModel::CramerLundbergExp { .. } => 1.0,
    };
    let b0 = x0 + 2.0;
    let short = 1e-3;
    let prov = "vanishing delays recover classical ruin";
    let point = format!("x={x0},r=1e-3,q=0.5");
    out.push(Check::from_results(
        name(ID, "short_delay_ruin", model, &point),
        an.ruin_prob_mixed(x0, short, 0.5).map(|v| (v, an.ruin_prob_classical(x0))),
        1e-2,
        prov,
    ));
    out.push(Check::from_results(
        name(ID, "fast_clock_ruin", model, &format!("x={x0},q=1e4")),
        an.ruin_prob_exp_delay(x0, 1e4).map(|v| (v, an.ruin_prob_classical(x0))),
        1e-2,
        prov,
    ));
    let base = RuinQuery::new(x0, short, 0.5).with_barrier(b0);
    out.push(Check::from_results(
        name(ID, "short_delay_two_sided", model, &format!("p=0,x={x0},b={b0},r=1e-3,q=1e3")),
        an.lt_ruin_two_sided(&RuinQuery::new(x0, short, 1e3).with_barrier(b0))
            .map(|v| (v, cl.joint_lt(0.0, 0.0, x0, b0))),
        1e-2,
        prov,
    ));
    out.push(Check::from_results(
        name(ID, "short_delay_exit", model, &format!("p=0.2,{point},b={b0}")),
        an.exit_lt(&base.with_discount(0.2)).map(|v| (v, cl.exit_lt(0.2, x0, b0))),
        1e-2,
        prov,
    ));
    out.push(Check::from_results(
        name(ID, "short_delay_joint", model, &format!("p=0.2,lambda=0.3,{point},b={b0}")),
        an.joint_lt_ruin(&base.with_discount(0.2).with_tilt(0.3))
            .map(|v| (v, cl.joint_lt(0.2, 0.3, x0, b0))),
        1e-2,
        prov,
    ));
    out.push(Check::from_results(
        name(ID, "short_delay_infinite", model, &format!("p=0.2,{point}")),
        an.lt_ruin_infinite(&RuinQuery::new(x0, short, 0.5).with_discount(0.2))
            .map(|v| (v, cl.lt_infinite(0.2, x0))),
        1e-2,
        prov,
    ));

    if let Some(c) = unit_brownian(model) {
        for x in [0.5, 1.0, 2.0] {
            for q in [0.25, 1.0] {
                out.push(Check::from_results(
                    name(ID, "brownian_long_delay_closed", model, &format!("c={c},x={x},q={q}")),
                    an.ruin_prob_exp_delay(x, q).map(|e| (brownian_exp_delay_limit(c, x, q), e)),
                    1e-10,
                    "long-delay limit of the closed Brownian formula",
                ));
            }
        }
    }
    VerificationReport::new(out, Vec::new())
}

// Oracle suite

/// Path counts and steps for [`run_oracle_suite`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    pub cl_paths: u64,
    pub bm_paths: u64,
    /// Coarsest Brownian step; the finer ones are `dt/2` and `dt/4`.
    pub bm_dt: f64,
    pub seed: u64,
}

impl OracleConfig {
    pub fn for_level(level: Level, seed: u64) -> Self {
        Self {
            cl_paths: if level == Level::Full { 1_000_000 } else { 100_000 },
            bm_paths: 40_000,
            bm_dt: 1e-2,
            seed,
        }
    }
}

/// Discretisation allowance for Brownian skeletons.
const BM_ALLOWANCE: f64 = 1e-2;

pub fn run_oracle_suite(model: &LevyModel, cfg: &OracleConfig) -> VerificationReport {
    let mut out = Vec::new();
    match model {
        LevyModel::CramerLundbergExp { .. } => oracle_exact(model, cfg, &mut out),
        LevyModel::BrownianRisk { .. } => oracle_skeleton(model, cfg, &mut out),
    }
    VerificationReport::new(out, Vec::new())
}

fn oracle_exact(model: &LevyModel, cfg: &OracleConfig, out: &mut Vec<Check>) {
    const ID: &str = "oracle";
    let an = Parisian::new(model);
    let run = |label: &str, query: &RuinQuery, f: Functional| {
        estimate_functional(model, query, f, &sim_cfg(cfg.cl_paths, 1e-3, cfg.seed, label))
    };
    for (x, r, q) in [(1.0, 1.0, 0.5), (0.5, 2.0, 0.2), (2.0, 0.5, 1.0)] {
        let label = name(ID, "ruin_prob", model, &format!("x={x},r={r},q={q}"));
        let query = RuinQuery::new(x, r, q);
        out.push(Check::against_simulation(
            label.clone(),
            run(&label, &query, Functional::RuinProb),
            an.ruin_prob_mixed(x, r, q),
            0.0,
            "mixed-delay ruin probability",
        ));
    }
    let base = RuinQuery::new(1.0, 1.0, 0.5).with_barrier(4.0);
    for p in [0.0, 0.2] {
        let label = name(ID, "two_sided", model, &format!("x=1,b=4,p={p},q=0.5,r=1"));
        let query = base.with_discount(p);
        out.push(Check::against_simulation(
            label.clone(),
            run(&label, &query, Functional::JointLt),
            an.lt_ruin_two_sided(&query),
            0.0,
            "discounted ruin before reaching b",
        ));
    }
    let joint = base.with_discount(0.2).with_tilt(0.3);
    let label = name(ID, "joint", model, "x=1,b=4,p=0.2,lambda=0.3,q=0.5,r=1");
    out.push(Check::against_simulation(
        label.clone(),
        run(&label, &joint, Functional::JointLt),
        an.joint_lt_ruin(&joint),
        0.0,
        "joint transform of ruin time and deficit",
    ));
    let label = name(ID, "exit", model, "x=1,b=4,p=0.2,q=0.5,r=1");
    out.push(Check::against_simulation(
        label.clone(),
        run(&label, &joint, Functional::ExitLt),
        an.exit_lt(&joint),
        0.0,
        "discounted exit above b before ruin",
    ));
    let infinite = RuinQuery::new(1.0, 1.0, 0.5).with_discount(0.2);
    let label = name(ID, "infinite", model, "x=1,p=0.2,q=0.5,r=1");
    out.push(Check::against_simulation(
        label.clone(),
        run(&label, &infinite, Functional::JointLt),
        an.lt_ruin_infinite(&infinite),
        0.0,
        "discounted ruin without an upper barrier",
    ));

    for (p, lambda) in [(0.2, 0.3), (0.0, 0.0)] {
        let x = -0.5;
        let point = format!("x=-0.5,p={p},lambda={lambda},q=0.5,r=1");
        let label = name(ID, "race", model, &point);
        let query = RuinQuery::new(x, 1.0, 0.5).with_discount(p).with_tilt(lambda);
        let est = estimate_functionals(
            model,
            &query,
            &[Functional::RaceUp, Functional::RaceClock],
            &sim_cfg(cfg.cl_paths, 1e-3, cfg.seed, &label),
        );
        let exact = an.race_lemma(x, p, lambda, 0.5, 1.0);
        let pick = |k: usize| -> (Result<MCEstimate>, Result<f64>) {
            (
                est.as_ref().map(|v| v[k].clone()).map_err(|e| Error::Unsupported(e.to_string())),
                exact
                    .as_ref()
                    .map(|v| if k == 0 { v.0 } else { v.1 })
                    .map_err(|e| Error::Unsupported(e.to_string())),
            )
        };
        let (e, a) = pick(0);
        out.push(Check::against_simulation(
            name(ID, "race_up", model, &point),
            e,
            a,
            0.0,
            "recovery before the clock",
        ));
        let (e, a) = pick(1);
        out.push(Check::against_simulation(
            name(ID, "race_clock", model, &point),
            e,
            a,
            0.0,
            "clock before recovery",
        ));
        if p == 0.0 && lambda == 0.0 {
            let sides = est.map(|v| (v[0].point + v[1].point, 1.0));
            out.push(Check::from_results(
                name(ID, "race_partition", model, &point),
                sides,
                1e-12,
                "each simulated excursion ends in exactly one way",
            ));
        }
    }
}

fn oracle_skeleton(model: &LevyModel, cfg: &OracleConfig, out: &mut Vec<Check>) {
    const ID: &str = "oracle";
    let an = Parisian::new(model);
    let study_check = |label: String, query: &RuinQuery, f: Functional, analytic: Result<f64>, out: &mut Vec<Check>| {
        let study = brownian_refinement(model, query, f, &sim_cfg(cfg.bm_paths, cfg.bm_dt, cfg.seed, &label));
        let trend = study.as_ref().ok().map(|s| {
            let pts: Vec<String> = s
                .estimates
                .iter()
                .zip(s.dts)
                .map(|(e, dt)| format!("dt={dt:e}: {:.6}", e.point))
                .collect();
            format!("{}; extrapolated {:.6}", pts.join(", "), s.extrapolated)
        });
        let finest = study.as_ref().map(|s| s.estimates[2].clone()).map_err(|e| Error::Unsupported(e.to_string()));
        let mut c = Check::against_simulation(label, finest, analytic, BM_ALLOWANCE, "Brownian skeleton estimate");
        if let Some(t) = trend {
            c = c.with_note(t);
        }
        out.push(c);
        study
    };
    for (x, r, q) in [(0.5, 1.0, 0.5), (1.0, 2.0, 1.0)] {
        let label = name(ID, "ruin_prob", model, &format!("x={x},r={r},q={q}"));
        let _ = study_check(label, &RuinQuery::new(x, r, q), Functional::RuinProb, an.ruin_prob_mixed(x, r, q), out);
    }
    let (x, r) = (0.5, 1.0);
    let label = name(ID, "ruin_prob", model, "x=0.5,r=1,q=0");
    let study = study_check(
        label,
        &RuinQuery::new(x, r, 0.0),
        Functional::RuinProb,
        an.ruin_prob_det_delay(x, r),
        out,
    );
    let trend = study.map(|s| {
        let toward = (s.estimates[2].point - s.estimates[0].point).signum()
            == (an.ruin_prob_det_delay(x, r).unwrap_or(f64::NAN) - s.estimates[0].point).signum();
        ((s.is_monotone() && toward) as u8 as f64, 1.0)
    });
    out.push(Check::from_results(
        name(ID, "refinement_trend", model, "x=0.5,r=1,q=0"),
        trend,
        0.0,
        "skeleton estimates move monotonically toward the exact value as dt shrinks",
    ));
    let query = RuinQuery::new(1.0, 1.0, 0.5).with_barrier(3.0).with_discount(0.2);
    let label = name(ID, "two_sided", model, "x=1,b=3,p=0.2,q=0.5,r=1");
    let _ = study_check(label, &query, Functional::JointLt, an.lt_ruin_two_sided(&query), out);
    let label = name(ID, "exit", model, "x=1,b=3,p=0.2,q=0.5,r=1");
    let _ = study_check(label, &query, Functional::ExitLt, an.exit_lt(&query), out);
}

// Property suite

pub fn run_property_suite(model: &LevyModel, level: Level) -> VerificationReport {
    const ID: &str = "property";
    let (xs, rs, qs): (Vec<f64>, Vec<f64>, Vec<f64>) = if level == Level::Full {
        (
            vec![0.0, 0.5, 1.0, 2.0, 4.0],
            vec![0.25, 0.5, 1.0, 2.0, 4.0],
            vec![0.1, 0.25, 0.5, 1.0, 2.0],
        )
    } else {
        (vec![0.0, 1.0, 4.0], vec![0.25, 1.0, 4.0], vec![0.1, 0.5, 2.0])
    };
    let an = Parisian::new(model);
    let slack = 1e-9;
    let mut out = Vec::new();
    let mut mixed = vec![vec![vec![f64::NAN; qs.len()]; rs.len()]; xs.len()];
    let mut errors = Vec::new();
    for (i, &x) in xs.iter().enumerate() {
        for (j, &r) in rs.iter().enumerate() {
            for (k, &q) in qs.iter().enumerate() {
                match an.ruin_prob_mixed(x, r, q) {
                    Ok(v) => mixed[i][j][k] = v,
                    Err(e) => errors.push(format!("x={x},r={r},q={q}: {e}")),
                }
            }
        }
    }
    out.push(Check::count(
        name(ID, "evaluable", model, "grid"),
        errors.len(),
        errors.join("; "),
        "the ruin probability evaluates on the whole grid",
    ));

    let mut tally = |label: &str, pairs: Vec<(f64, f64)>, prov: &str| {
        // each pair must satisfy first ≤ second + slack
        let bad: Vec<f64> = pairs.iter().map(|(a, b)| a - b).filter(|d| !(*d <= slack)).collect();
        let worst = bad.iter().copied().fold(0.0, f64::max);
        out.push(Check::count(
            name(ID, label, model, "grid"),
            bad.len(),
            format!("{} pairs, worst excess {worst:.3e}", pairs.len()),
            prov,
        ));
    };
    let (ni, nj, nk) = (xs.len(), rs.len(), qs.len());
    let mut pairs = Vec::new();
    for j in 0..nj {
        for k in 0..nk {
            for i in 1..ni {
                pairs.push((mixed[i][j][k], mixed[i - 1][j][k]));
            }
        }
    }
    tally("decreasing_in_x", pairs, "more initial capital lowers the ruin probability");
    let mut pairs = Vec::new();
    for i in 0..ni {
        for k in 0..nk {
            for j in 1..nj {
                pairs.push((mixed[i][j][k], mixed[i][j - 1][k]));
            }
        }
    }
    tally("decreasing_in_r", pairs, "a longer deterministic delay lowers the ruin probability");
    let mut pairs = Vec::new();
    for i in 0..ni {
        for j in 0..nj {
            for k in 1..nk {
                pairs.push((mixed[i][j][k - 1], mixed[i][j][k]));
            }
        }
    }
    tally("increasing_in_q", pairs, "a faster exponential clock raises the ruin probability");
    let mut pairs = Vec::new();
    for (i, &x) in xs.iter().enumerate() {
        let classical = an.ruin_prob_classical(x);
        for (j, &r) in rs.iter().enumerate() {
            let det = an.ruin_prob_det_delay(x, r).unwrap_or(f64::NAN);
            for (k, &q) in qs.iter().enumerate() {
                let exp = an.ruin_prob_exp_delay(x, q).unwrap_or(f64::NAN);
                let v = mixed[i][j][k];
                pairs.push((det.max(exp), v));
                pairs.push((v, classical));
                pairs.push((0.0, v));
            }
        }
    }
    tally(
        "sandwich",
        pairs,
        "single-clock probabilities bound the mixed one below, classical ruin above",
    );
    VerificationReport::new(out, Vec::new())
}

// Observations

pub fn observations(model: &LevyModel) -> Vec<Observation> {
    const ID: &str = "observation";
    let an = Parisian::new(model);
    let mut out = Vec::new();
    let (p, q, x) = (0.2, 0.5, 1.0);
    let zp = ScaleFunction::new(model, p);
    let phi_pq = model.phi_inverse(p + q);
    out.push(Observation::new(
        name(ID, "f_cal_long_delay", model, "p=0.2,lambda=0,q=0.5,x=1"),
        "F^(p,0)(x; r, q) at r = 50 against two readings of its long-delay limit",
        &[
            ("at_r50", an.f_cal(p, 0.0, x, 50.0, q)),
            ("reading_q_share", Ok(q / (p + q) * zp.z(x, 0.0))),
            ("reading_two_terms", Ok((q * zp.z(x, 0.0) + p * zp.z(x, phi_pq)) / (p + q))),
        ],
    ));
    let ds = DelayedScale::new(model, p, q);
    let prec = Precision::default();
    let zpq = ScaleFunction::new(model, p + q).z(x, model.phi_inverse(0.0));
    out.push(Observation::new(
        name(ID, "lambda_time_integral_growth", model, "p=0.2,q=0.5,x=1"),
        "time integral of Lambda^(p)(x; s, q) over [0, r] against a final-value reading",
        &[
            ("r10", ds.time_integral(x, 10.0, |_| 1.0, &prec)),
            ("r30", ds.time_integral(x, 30.0, |_| 1.0, &prec)),
            ("final_value_reading", Ok(-zpq / (p + q))),
        ],
    ));

    match *model {
        LevyModel::CramerLundbergExp { c, eta, alpha } => {
            let (q, x, z) = (0.5, 1.7, 0.6);
            let w = ScaleFunction::new(model, q);
            let rq = model.roots(q);
            let gap = c * (rq.phi - rq.theta);
            let point = "q=0.5,x=1.7";
            out.push(Observation::new(
                name(ID, "explicit_w_display", model, point),
                "displayed W^(q) for exponential claims against the implemented one",
                &[
                    (
                        "display",
                        Ok(((rq.phi * x).exp() / (alpha + rq.phi) - (rq.theta * x).exp() / (alpha + rq.theta)) / gap),
                    ),
                    ("implemented", Ok(w.eval(x))),
                ],
            ));
            out.push(Observation::new(
                name(ID, "explicit_z_display", model, point),
                "displayed Z_q(x, 0) and the same display with its second sign flipped",
                &[
                    (
                        "display",
                        Ok(((q - c * rq.theta) * (rq.phi * x).exp() + (q - c * rq.phi) * (rq.theta * x).exp()) / gap),
                    ),
                    (
                        "sign_flipped",
                        Ok(((q - c * rq.theta) * (rq.phi * x).exp() - (q - c * rq.phi) * (rq.theta * x).exp()) / gap),
                    ),
                    ("implemented", Ok(w.z(x, 0.0))),
                ],
            ));
            let r0 = model.roots(0.0);
            let rq2 = (c * (r0.phi - r0.theta)).powi(2) * gap * gap;
            let s = rq2.sqrt();
            let second = q * (alpha + r0.theta) / s
                * (r0.theta * x).exp()
                * ((alpha + rq.phi) / (r0.theta - rq.phi) * (rq.phi * z).exp()
                    - (alpha + rq.theta) / (r0.theta - rq.theta) * (rq.theta * z).exp());
            let lead = |k: f64| {
                q * alpha / s * (k / rq.phi * (rq.phi * z).exp() - (alpha + rq.theta) / rq.theta * (rq.theta * z).exp())
            };
            out.push(Observation::new(
                name(ID, "explicit_kernel_display", model, "q=0.5,x=1.7,z=0.6"),
                "displayed expansion of the kernel at x + z, literally and with (alpha + Phi(q)) in the first bracket",
                &[
                    ("display", Ok(lead(alpha) + second)),
                    ("first_bracket_amended", Ok(lead(alpha + rq.phi) + second)),
                    ("implemented", Ok(ScriptW::new(model, q, -q).eval(z, x + z))),
                ],
            ));
            let (r, f) = (1.0, rq.phi);
            let beta = alpha + f;
            let cr = c * r;
            let lit = (|| {
                let u = alpha * eta * r;
                let (mut w1, mut v1, mut sum) = (u, u, 1.0);
                for m in 0..400 {
                    sum += w1 * cr * gamma_lr((m + 1) as f64, beta * cr) - v1 * gamma_lr((m + 2) as f64, beta * cr) / beta;
                    w1 *= u / (m + 2) as f64;
                    v1 *= u / (m + 1) as f64;
                }
                ((f * c - eta) * r).exp() * sum
            })();
            out.push(Observation::new(
                name(ID, "tilt_series_display", model, "q=0.5,r=1,f=Phi(q)"),
                "incomplete-gamma series as displayed against the implemented series and quadrature",
                &[
                    ("display", Ok(lit)),
                    ("implemented", cl_tilt_integral(model, r, f)),
                    (
                        "quadrature",
                        TransitionMeasure::new(model, r).and_then(|m| m.integrate_tilted(|z| (f * z).exp(), 1e-13).map(|v| v * r)),
                    ),
                ],
            ));
        }
        LevyModel::BrownianRisk { c, sigma } if sigma == 1.0 => {
            let point = format!("c=2,x=1,r=1,q=0.5");
            let bm2 = LevyModel::BrownianRisk { c: 2.0, sigma: 1.0 };
            out.push(Observation::new(
                format!("observation.brownian_closed_display.brownian.{point}"),
                "closed Brownian ruin formula as displayed, without the leading drift factor",
                &[
                    ("display", Ok(brownian_ruin_closed_as_printed(2.0, 1.0, 1.0, 0.5))),
                    ("with_drift_factor", Ok(brownian_ruin_closed(2.0, 1.0, 1.0, 0.5))),
                    ("general_formula", Parisian::new(&bm2).ruin_prob_mixed(1.0, 1.0, 0.5)),
                ],
            ));
            let (q, x, z, r) = (0.5, 1.7, 0.6, 1.0);
            let d = (c * c + 2.0 * q).sqrt();
            let decay = (-2.0 * c * x).exp();
            let four = ((d - c) * z).exp() / (d - c) + (-(d + c) * z).exp() / (d + c)
                - decay * ((d - c) * z).exp() / (d + c)
                - decay * (-(d + c) * z).exp() / (d - c);
            let zq = |y: f64| q / d * (((d - c) * y).exp() / (d - c) + (-(d + c) * y).exp() / (d + c));
            let kernel = ScriptW::new(model, q, -q);
            out.push(Observation::new(
                name(ID, "kernel_four_term_display", model, "q=0.5,x=1.7,z=0.6"),
                "four-exponential display of the kernel, literally and scaled by q/(c D)",
                &[
                    ("display", Ok(four)),
                    ("scaled", Ok(four * q / (c * d))),
                    ("implemented", Ok(kernel.eval(z, x + z))),
                ],
            ));
            out.push(Observation::new(
                name(ID, "kernel_intermediate_display", model, "q=0.5,x=1.7,z=0.6"),
                "intermediate display Z_q(x,0)/c (1 - exp(-2cx)) against the kernel at x and at x + z",
                &[
                    ("display", Ok(zq(x) / c * (1.0 - decay))),
                    ("kernel_at_x", Ok(kernel.eval(z, x))),
                    ("kernel_at_x_plus_z", Ok(kernel.eval(z, x + z))),
                ],
            ));
            let (p1, p2) = psi1_psi2(c, r, q);
            let base = (-r * c * c / 2.0).exp() / (2.0 * std::f64::consts::PI * r).sqrt();
            let growth = (r * q).exp() * d;
            let n = |t: f64| crate::numerics::norm_cdf(t);
            out.push(Observation::new(
                name(ID, "psi_sign_readings", model, "r=1,q=0.5"),
                "tilted Gaussian moments as displayed and with the opposite sign on the growth term",
                &[
                    ("psi1_display", Ok(p1)),
                    ("psi1_flipped", Ok(base - growth * n(r.sqrt() * d))),
                    ("psi2_display", Ok(p2)),
                    ("psi2_flipped", Ok(base + growth * n(-r.sqrt() * d))),
                ],
            ));
        }
        _ => {}
    }
    out
}

/// In-scope topics and the name prefixes that cover them.
pub const COVERAGE: &[(&str, &[&str])] = &[
    ("Laplace characterisation of W", &["identity.laplace_w."]),
    ("two-rate scale function", &["identity.laplace_script_w.", "identity.script_w_forms."]),
    ("scale function asymptotics", &["identity.w_ratio_limit.", "identity.z_over_w_limit."]),
    ("scale function monotonicity", &["identity.w_increasing."]),
    ("Z from its defining integral", &["identity.z_quadrature."]),
    ("right inverse of psi", &["identity.phi_residual.", "identity.phi_bracketing."]),
    ("transition law", &["identity.transition_mass.", "identity.first_passage_total."]),
    ("tilted partial moments", &["identity.tilt_series.", "identity.psi1_closed_form."]),
    ("Lambda at zero", &["identity.lambda_at_zero."]),
    ("Lambda Laplace transforms in r", &["identity.lambda_time_laplace.", "identity.tilted_tail_laplace."]),
    ("Lambda representations", &["identity.lambda_forms."]),
    ("Kendall time integral", &["identity.lambda_time_integral."]),
    ("exit and ruin partition", &["identity.exit_partition.", "identity.race_partition."]),
    ("explicit Brownian formulas", &["identity.brownian_closed_form.", "identity.explicit_w."]),
    ("excursion decomposition", &["identity.excursion_recovery.", "identity.excursion_clock."]),
    ("first passage above", &["identity.upcrossing_lt."]),
    ("exit below with weights", &["identity.exit_below_weighted."]),
    ("killed potential", &["identity.killed_potential."]),
    ("long deterministic delay", &["limit.long_delay_"]),
    ("vanishing clock rate", &["limit.slow_clock_"]),
    ("classical degenerations", &["limit.short_delay_", "limit.fast_clock_ruin."]),
    ("simulated ruin probability", &["oracle.ruin_prob."]),
    ("simulated transforms", &["oracle.two_sided.", "oracle.exit."]),
    ("simulated joint and race", &["oracle.joint.", "oracle.race_up.", "oracle.race_clock."]),
    ("Brownian step refinement", &["oracle.refinement_trend."]),
    ("monotonicity and bounds", &["property.decreasing_in_x.", "property.sandwich."]),
];

/// Topics from [`COVERAGE`] and whether the report has a check for each.
pub fn coverage(report: &VerificationReport) -> Vec<(&'static str, bool)> {
    COVERAGE
        .iter()
        .map(|(topic, prefixes)| {
            let hit = prefixes.iter().all(|p| report.checks.iter().any(|c| c.name.starts_with(p)));
            (*topic, hit)
        })
        .collect()
}

/// All suites and observations for each model.
pub fn run_all(models: &[LevyModel], level: Level, seed: u64) -> VerificationReport {
    let grid = IdentityGrid::for_level(level, seed);
    let oracle = OracleConfig::for_level(level, seed);
    let mut parts = Vec::new();
    for m in models {
        parts.push(run_identity_suite(m, &grid));
        parts.push(run_limit_suite(m, level));
        parts.push(run_oracle_suite(m, &oracle));
        parts.push(run_property_suite(m, level));
        parts.push(VerificationReport::new(Vec::new(), observations(m)));
    }
    VerificationReport::merge(parts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn check_passes_within_tolerance() {
        assert!(Check::new("a", 1.0, 1.0 + 1e-9, 1e-8, "").passed);
        assert!(!Check::new("a", 1.0, 1.1, 1e-8, "").passed);
        assert!(!Check::new("a", f64::NAN, 1.0, 1.0, "").passed);
        let failed = Check::from_results("a", Err(Error::Unsupported("x".into())), 1.0, "");
        assert!(!failed.passed && failed.note.contains("error"));
    }

    #[test]
    fn report_is_sorted_and_summarised() {
        let r = VerificationReport::new(
            vec![Check::new("b", 0.0, 0.0, 0.0, ""), Check::new("a", 0.0, 1.0, 0.0, "")],
            Vec::new(),
        );
        assert_eq!(r.checks[0].name, "a");
        assert_eq!((r.summary.passed, r.summary.failed), (1, 1));
        assert!(!r.all_passed());
        assert!(r.to_table().contains("FAIL"));
    }

    #[test]
    fn stable_hash_is_fnv() {
        assert_eq!(stable_hash(""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(stable_hash("a"), 0xaf63_dc4c_8601_ec8c);
    }

    #[test]
    fn fast_run_covers_every_topic() {
        let report = run_all(&default_models(), Level::Fast, 42);
        let missing: Vec<_> = coverage(&report).into_iter().filter(|t| !t.1).collect();
        assert!(missing.is_empty(), "{missing:?}");
        assert!(report.all_passed(), "{:?}", report.failures().collect::<Vec<_>>());
        assert_eq!(report.summary.observations, 12);
    }

    #[test]
    fn level_parses() {
        assert_eq!("fast".parse::<Level>(), Ok(Level::Fast));
        assert!("slow".parse::<Level>().is_err());
    }
}
