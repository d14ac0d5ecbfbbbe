//! Monte Carlo oracle for the Parisian functionals.
//!
//! The exponential-claims model is simulated exactly, event by event. The
//! Brownian model is simulated on an Euler skeleton with linear
//! interpolation of level crossings; excursions shorter than a step are
//! missed, so its estimates carry an `O(√dt)` bias.
//!
//! Every path draws from its own ChaCha8 stream keyed by `(seed, path
//! index)`, and partial sums are reduced in a fixed order, so estimates do
//! not depend on the number of worker threads.

use crate::error::{Error, Result};
use crate::levy_model::LevyModel;
use crate::parisian::RuinQuery;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

/// Paths per parallel work item.
const CHUNK: u64 = 2048;

/// Ruin probability from the escape level onward; paths reaching it without
/// an upper barrier are stopped as survivors.
pub const ESCAPE_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig {
    pub n_paths: u64,
    pub horizon: f64,
    pub dt: f64,
    pub seed: u64,
    pub antithetic: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_paths: 100_000,
            horizon: 500.0,
            dt: 1e-3,
            seed: 42,
            antithetic: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self, model: &LevyModel, query: &RuinQuery) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n_paths == 0 {
            return bad("n_paths must be at least 1".into());
        }
        if !(self.horizon > 0.0) || (query.r.is_finite() && self.horizon <= query.r) {
            return bad(format!("horizon {} must exceed the delay r = {}", self.horizon, query.r));
        }
        if let LevyModel::BrownianRisk { .. } = model {
            if !(self.dt > 0.0) {
                return bad(format!("dt must be positive, got {}", self.dt));
            }
            if query.r.is_finite() && self.dt > query.r / 100.0 {
                return bad(format!("dt = {} exceeds r/100 = {}", self.dt, query.r / 100.0));
            }
        }
        Ok(())
    }
}

/// Outcome of one simulated path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RuinEvent {
    pub ruined: bool,
    pub ruin_time: f64,
    /// `X` at ruin, `≤ 0`; zero when not ruined.
    pub deficit: f64,
    pub exited_above: bool,
    pub exit_time: f64,
    /// The upper exit was the survival (escape) level rather than a barrier.
    pub escaped: bool,
    pub censor: bool,
    /// Excursions below zero started before the path ended.
    pub excursions: u32,
}

impl RuinEvent {
    fn ruin(t: f64, deficit: f64, excursions: u32) -> Self {
        Self {
            ruined: true,
            ruin_time: t,
            deficit: deficit.min(0.0),
            exited_above: false,
            exit_time: f64::NAN,
            escaped: false,
            censor: false,
            excursions,
        }
    }

    fn exit(t: f64, escaped: bool, excursions: u32) -> Self {
        Self {
            ruined: false,
            ruin_time: f64::NAN,
            deficit: 0.0,
            exited_above: true,
            exit_time: t,
            escaped,
            censor: false,
            excursions,
        }
    }

    fn censored(excursions: u32) -> Self {
        Self {
            ruined: false,
            ruin_time: f64::NAN,
            deficit: 0.0,
            exited_above: false,
            exit_time: f64::NAN,
            escaped: false,
            censor: true,
            excursions,
        }
    }
}

/// Functionals estimated from simulated paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Functional {
    /// `1{κ < τ_b⁺}` (`1{κ < ∞}` without a barrier)
    RuinProb,
    /// `e^{−pκ + λX_κ} 1{κ < τ_b⁺}`
    JointLt,
    /// `e^{−pτ_b⁺} 1{τ_b⁺ < κ}`
    ExitLt,
    /// `e^{−pτ_0⁺} 1{τ_0⁺ ≤ e_q ∧ r}` from `x ≤ 0`
    RaceUp,
    /// `e^{−p(e_q∧r) + λX_{e_q∧r}} 1{τ_0⁺ > e_q ∧ r}` from `x ≤ 0`
    RaceClock,
}

impl Functional {
    fn sample(&self, e: &RuinEvent, q: &RuinQuery) -> f64 {
        match self {
            Functional::RuinProb => e.ruined as u8 as f64,
            Functional::JointLt | Functional::RaceClock => {
                if e.ruined {
                    (-q.p * e.ruin_time + q.lambda * e.deficit).exp()
                } else {
                    0.0
                }
            }
            Functional::ExitLt | Functional::RaceUp => {
                if e.exited_above && !e.escaped {
                    (-q.p * e.exit_time).exp()
                } else {
                    0.0
                }
            }
        }
    }

    fn is_race(&self) -> bool {
        matches!(self, Functional::RaceUp | Functional::RaceClock)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MCEstimate {
    pub point: f64,
    pub stderr: f64,
    pub n_paths: u64,
    pub seed: u64,
    pub censored: u64,
    /// Censored mass exceeds a tenth of the standard error.
    pub censoring_exceeds_bound: bool,
    pub truncation_bias_note: String,
}

/// Uniform, exponential and normal draws from one path's stream, optionally
/// mirrored for the antithetic partner.
struct Draws {
    rng: ChaCha8Rng,
    mirror: bool,
}

impl Draws {
    fn new(seed: u64, stream: u64, mirror: bool) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng, mirror }
    }

    /// Uniform on `(0, 1)`, symmetric under `u ↦ 1 − u`.
    fn uniform(&mut self) -> f64 {
        let u = ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64);
        if self.mirror {
            1.0 - u
        } else {
            u
        }
    }

    fn exp(&mut self, rate: f64) -> f64 {
        -self.uniform().ln() / rate
    }

    fn normal(&mut self) -> f64 {
        let z: f64 = StandardNormal.sample(&mut self.rng);
        if self.mirror {
            -z
        } else {
            z
        }
    }

    /// `min(e_q, r)` for a fresh excursion.
    fn clock(&mut self, q: f64, r: f64) -> f64 {
        let e = if q > 0.0 { self.exp(q) } else { f64::INFINITY };
        e.min(r)
    }
}

/// Level above which classical ruin has probability below `tol`, or `∞`
/// without net profit.
pub fn escape_level(model: &LevyModel, tol: f64) -> f64 {
    match *model {
        LevyModel::BrownianRisk { c, sigma } => {
            if c > 0.0 {
                sigma * sigma * (1.0 / tol).ln() / (2.0 * c)
            } else {
                f64::INFINITY
            }
        }
        LevyModel::CramerLundbergExp { c, eta, alpha } => {
            let decay = alpha - eta / c;
            if decay > 0.0 {
                ((eta / (c * alpha) / tol).ln() / decay).max(0.0)
            } else {
                f64::INFINITY
            }
        }
    }
}

/// Upper stopping level: the barrier if present, else the escape level.
fn stopping_level(model: &LevyModel, query: &RuinQuery) -> (f64, bool) {
    match query.b {
        Some(b) => (b, false),
        None => (escape_level(model, ESCAPE_TOL).max(query.x), true),
    }
}

#[derive(Debug, Clone, Copy)]
struct ClPath {
    c: f64,
    eta: f64,
    alpha: f64,
    q: f64,
    r: f64,
    top: f64,
    escape: bool,
    horizon: f64,
}

impl ClPath {
    fn run(&self, start: f64, draws: &mut Draws) -> RuinEvent {
        let Self { c, eta, alpha, q, r, top, escape, horizon } = *self;
        let mut t = 0.0;
        let mut x = start;
        let mut excursions = 0u32;
        let mut deadline = f64::INFINITY;
        if x >= top {
            return RuinEvent::exit(0.0, escape, 0);
        }
        if x < 0.0 {
            excursions = 1;
            deadline = draws.clock(q, r);
        }
        loop {
            let gap = draws.exp(eta);
            if x >= 0.0 {
                let reach = (top - x) / c;
                if reach <= gap {
                    let te = t + reach;
                    return if te > horizon {
                        RuinEvent::censored(excursions)
                    } else {
                        RuinEvent::exit(te, escape, excursions)
                    };
                }
                if t + gap > horizon {
                    return RuinEvent::censored(excursions);
                }
                t += gap;
                x += c * gap - draws.exp(alpha);
                if x < 0.0 {
                    excursions += 1;
                    deadline = t + draws.clock(q, r);
                }
            } else {
                let recover = -x / c;
                let left = deadline - t;
                if left <= gap && left <= recover {
                    return if deadline > horizon {
                        RuinEvent::censored(excursions)
                    } else {
                        RuinEvent::ruin(deadline, x + c * left, excursions)
                    };
                }
                if recover <= gap {
                    // the residual claim time is again Exp(η)
                    t += recover;
                    x = 0.0;
                    if t > horizon {
                        return RuinEvent::censored(excursions);
                    }
                    if x >= top {
                        return RuinEvent::exit(t, escape, excursions);
                    }
                    continue;
                }
                if t + gap > horizon {
                    return RuinEvent::censored(excursions);
                }
                t += gap;
                x += c * gap - draws.exp(alpha);
            }
        }
    }
}

/// Lazily drawn excursion clocks shared by coupled skeleton trackers, so the
/// k-th excursion of every resolution uses the same clock.
struct ClockBank {
    draws: Draws,
    q: f64,
    r: f64,
    lens: Vec<f64>,
}

impl ClockBank {
    fn get(&mut self, k: usize) -> f64 {
        while self.lens.len() <= k {
            let v = self.draws.clock(self.q, self.r);
            self.lens.push(v);
        }
        self.lens[k]
    }
}

/// Excursion bookkeeping on one resolution of a Brownian skeleton.
#[derive(Debug, Clone, Copy)]
struct Tracker {
    t: f64,
    x: f64,
    below: bool,
    deadline: f64,
    excursions: u32,
    done: Option<RuinEvent>,
}

impl Tracker {
    fn new(start: f64, top: f64, escape: bool, bank: &mut ClockBank) -> Self {
        let mut tr = Self {
            t: 0.0,
            x: start,
            below: false,
            deadline: f64::INFINITY,
            excursions: 0,
            done: None,
        };
        if start >= top {
            tr.done = Some(RuinEvent::exit(0.0, escape, 0));
        } else if start < 0.0 {
            tr.below = true;
            tr.deadline = bank.get(0);
            tr.excursions = 1;
        }
        tr
    }

    fn observe(&mut self, t1: f64, x1: f64, top: f64, escape: bool, horizon: f64, bank: &mut ClockBank) {
        if self.done.is_some() {
            return;
        }
        let (t0, x0) = (self.t, self.x);
        let at = |level: f64| t0 + (level - x0) / (x1 - x0) * (t1 - t0);
        let value_at = |t: f64| x0 + (x1 - x0) * (t - t0) / (t1 - t0);
        if !self.below {
            if x1 >= top {
                self.done = Some(RuinEvent::exit(at(top), escape, self.excursions));
            } else if x1 < 0.0 {
                let start = at(0.0);
                self.deadline = start + bank.get(self.excursions as usize);
                self.excursions += 1;
                self.below = true;
                if self.deadline <= t1 {
                    self.done = Some(RuinEvent::ruin(self.deadline, value_at(self.deadline), self.excursions));
                }
            }
        } else if x1 >= 0.0 {
            let back = at(0.0);
            if self.deadline <= back {
                self.done = Some(RuinEvent::ruin(self.deadline, value_at(self.deadline), self.excursions));
            } else {
                self.below = false;
                if x1 >= top {
                    let te = if x1 > 0.0 { back + top / x1 * (t1 - back) } else { back };
                    self.done = Some(RuinEvent::exit(te, escape, self.excursions));
                }
            }
        } else if self.deadline <= t1 {
            self.done = Some(RuinEvent::ruin(self.deadline, value_at(self.deadline), self.excursions));
        }
        self.t = t1;
        self.x = x1;
        if self.done.is_none() && t1 >= horizon {
            self.done = Some(RuinEvent::censored(self.excursions));
        }
        if let Some(e) = self.done {
            if (e.ruined && e.ruin_time > horizon) || (e.exited_above && e.exit_time > horizon) {
                self.done = Some(RuinEvent::censored(self.excursions));
            }
        }
    }
}

/// Brownian skeleton on step `h` with trackers observing every
/// `strides[i]`-th point.
#[allow(clippy::too_many_arguments)]
fn bm_paths(
    c: f64,
    sigma: f64,
    start: f64,
    top: f64,
    escape: bool,
    horizon: f64,
    h: f64,
    strides: &[usize],
    noise: &mut Draws,
    bank: &mut ClockBank,
) -> Vec<RuinEvent> {
    let mut trackers: Vec<Tracker> = strides.iter().map(|_| Tracker::new(start, top, escape, bank)).collect();
    let drift = c * h;
    let vol = sigma * h.sqrt();
    let mut x = start;
    let mut k: usize = 0;
    while trackers.iter().any(|t| t.done.is_none()) {
        x += drift + vol * noise.normal();
        k += 1;
        let t = k as f64 * h;
        for (tr, &s) in trackers.iter_mut().zip(strides) {
            if k % s == 0 {
                tr.observe(t, x, top, escape, horizon, bank);
            }
        }
    }
    trackers.into_iter().map(|t| t.done.unwrap()).collect()
}

/// Sum and sum of squares of per-path (or per-pair) samples.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: u64,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.n += 1;
        self.sum += v;
        self.sum_sq += v * v;
    }

    fn merge(&mut self, o: &Moments) {
        self.n += o.n;
        self.sum += o.sum;
        self.sum_sq += o.sum_sq;
    }

    fn mean_stderr(&self) -> (f64, f64) {
        let n = self.n as f64;
        let mean = self.sum / n;
        if self.n < 2 {
            return (mean, 0.0);
        }
        let var = ((self.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
        (mean, (var / n).sqrt())
    }
}

#[derive(Debug, Clone, Default)]
struct Tally {
    per_level: Vec<Vec<Moments>>,
    censored: Vec<u64>,
}

/// The simulation kernel: path index and mirror flag to one event per
/// resolution.
trait Engine: Sync {
    fn levels(&self) -> usize;
    fn run(&self, index: u64, mirror: bool) -> Vec<RuinEvent>;
}

struct ClEngine {
    path: ClPath,
    start: f64,
    seed: u64,
}

impl Engine for ClEngine {
    fn levels(&self) -> usize {
        1
    }

    fn run(&self, index: u64, mirror: bool) -> Vec<RuinEvent> {
        let mut d = Draws::new(self.seed, index, mirror);
        vec![self.path.run(self.start, &mut d)]
    }
}

struct BmEngine {
    c: f64,
    sigma: f64,
    start: f64,
    q: f64,
    r: f64,
    top: f64,
    escape: bool,
    horizon: f64,
    h: f64,
    strides: Vec<usize>,
    seed: u64,
}

impl Engine for BmEngine {
    fn levels(&self) -> usize {
        self.strides.len()
    }

    fn run(&self, index: u64, mirror: bool) -> Vec<RuinEvent> {
        let mut noise = Draws::new(self.seed, 2 * index, mirror);
        let mut bank = ClockBank {
            draws: Draws::new(self.seed, 2 * index + 1, mirror),
            q: self.q,
            r: self.r,
            lens: Vec::new(),
        };
        bm_paths(
            self.c,
            self.sigma,
            self.start,
            self.top,
            self.escape,
            self.horizon,
            self.h,
            &self.strides,
            &mut noise,
            &mut bank,
        )
    }
}

fn tally<E: Engine>(engine: &E, query: &RuinQuery, functionals: &[Functional], cfg: &SimConfig) -> Tally {
    let levels = engine.levels();
    let units = if cfg.antithetic { cfg.n_paths.div_ceil(2) } else { cfg.n_paths };
    let chunks = units.div_ceil(CHUNK);
    let empty = || Tally {
        per_level: vec![vec![Moments::default(); functionals.len()]; levels],
        censored: vec![0; levels],
    };
    let parts: Vec<Tally> = (0..chunks)
        .into_par_iter()
        .map(|ci| {
            let mut t = empty();
            for u in ci * CHUNK..((ci + 1) * CHUNK).min(units) {
                let first = engine.run(u, false);
                let second = if cfg.antithetic { Some(engine.run(u, true)) } else { None };
                for lvl in 0..levels {
                    for (fi, f) in functionals.iter().enumerate() {
                        let mut v = f.sample(&first[lvl], query);
                        if let Some(s) = &second {
                            v = 0.5 * (v + f.sample(&s[lvl], query));
                        }
                        t.per_level[lvl][fi].push(v);
                    }
                    t.censored[lvl] += first[lvl].censor as u64;
                    if let Some(s) = &second {
                        t.censored[lvl] += s[lvl].censor as u64;
                    }
                }
            }
            t
        })
        .collect();
    let mut total = empty();
    for p in &parts {
        for lvl in 0..levels {
            for fi in 0..functionals.len() {
                total.per_level[lvl][fi].merge(&p.per_level[lvl][fi]);
            }
            total.censored[lvl] += p.censored[lvl];
        }
    }
    total
}

fn effective_query(query: &RuinQuery, functionals: &[Functional]) -> Result<RuinQuery> {
    let races = functionals.iter().filter(|f| f.is_race()).count();
    if races == 0 {
        return Ok(*query);
    }
    if races != functionals.len() {
        return Err(Error::InvalidArgument("race functionals cannot be mixed with others in one run".into()));
    }
    if query.x > 0.0 {
        return Err(Error::InvalidArgument(format!("the race starts at or below zero, got x={}", query.x)));
    }
    Ok(query.with_barrier(0.0))
}

fn build_note(model: &LevyModel, query: &RuinQuery, top: f64, escape: bool, cfg: &SimConfig, dt: Option<f64>) -> String {
    let mut note = format!("horizon {}", cfg.horizon);
    if escape && top.is_finite() {
        note.push_str(&format!(
            "; survivors stopped at level {top:.6} where classical ruin is below {ESCAPE_TOL:e}"
        ));
    }
    if let (LevyModel::BrownianRisk { .. }, Some(dt)) = (model, dt) {
        note.push_str(&format!(
            "; Euler skeleton dt={dt:e}, excursions shorter than a step are missed (bias O(sqrt(dt)))"
        ));
    }
    if query.p > 0.0 {
        note.push_str(&format!("; discount bound e^(-p*horizon) = {:e}", (-query.p * cfg.horizon).exp()));
    }
    note
}

fn finish(m: &Moments, censored: u64, cfg: &SimConfig, note: String) -> MCEstimate {
    let (point, stderr) = m.mean_stderr();
    let n_paths = if cfg.antithetic { 2 * m.n } else { m.n };
    let censored_mass = censored as f64 / n_paths as f64;
    MCEstimate {
        point,
        stderr,
        n_paths,
        seed: cfg.seed,
        censored,
        censoring_exceeds_bound: censored_mass > stderr / 10.0 && censored > 0,
        truncation_bias_note: note,
    }
}

/// Estimates several functionals from one batch of paths.
pub fn estimate_functionals(
    model: &LevyModel,
    query: &RuinQuery,
    functionals: &[Functional],
    cfg: &SimConfig,
) -> Result<Vec<MCEstimate>> {
    let query = effective_query(query, functionals)?;
    query.validate()?;
    cfg.validate(model, &query)?;
    let (top, escape) = stopping_level(model, &query);
    match *model {
        LevyModel::CramerLundbergExp { c, eta, alpha } => {
            let engine = ClEngine {
                path: ClPath {
                    c,
                    eta,
                    alpha,
                    q: query.q,
                    r: query.r,
                    top,
                    escape,
                    horizon: cfg.horizon,
                },
                start: query.x,
                seed: cfg.seed,
            };
            let t = tally(&engine, &query, functionals, cfg);
            let note = build_note(model, &query, top, escape, cfg, None);
            Ok(t.per_level[0].iter().map(|m| finish(m, t.censored[0], cfg, note.clone())).collect())
        }
        LevyModel::BrownianRisk { .. } => {
            let study = run_bm(model, &query, functionals, cfg, &[1], top, escape)?;
            Ok(study.into_iter().next().unwrap())
        }
    }
}

fn run_bm(
    model: &LevyModel,
    query: &RuinQuery,
    functionals: &[Functional],
    cfg: &SimConfig,
    strides: &[usize],
    top: f64,
    escape: bool,
) -> Result<Vec<Vec<MCEstimate>>> {
    let LevyModel::BrownianRisk { c, sigma } = *model else {
        unreachable!()
    };
    // the coarsest tracker steps by cfg.dt
    let fine = *strides.iter().max().unwrap();
    let h = cfg.dt / fine as f64;
    let strides = strides.to_vec();
    let engine = BmEngine {
        c,
        sigma,
        start: query.x,
        q: query.q,
        r: query.r,
        top,
        escape,
        horizon: cfg.horizon,
        h,
        strides: strides.clone(),
        seed: cfg.seed,
    };
    let t = tally(&engine, query, functionals, cfg);
    Ok((0..strides.len())
        .map(|lvl| {
            let note = build_note(model, query, top, escape, cfg, Some(h * strides[lvl] as f64));
            t.per_level[lvl]
                .iter()
                .map(|m| finish(m, t.censored[lvl], cfg, note.clone()))
                .collect()
        })
        .collect())
}

pub fn estimate_functional(
    model: &LevyModel,
    query: &RuinQuery,
    functional: Functional,
    cfg: &SimConfig,
) -> Result<MCEstimate> {
    Ok(estimate_functionals(model, query, &[functional], cfg)?.remove(0))
}

/// Outcomes of individual paths, in path order.
pub fn simulate_paths(model: &LevyModel, query: &RuinQuery, cfg: &SimConfig) -> Result<Vec<RuinEvent>> {
    query.validate()?;
    cfg.validate(model, query)?;
    let (top, escape) = stopping_level(model, query);
    let events = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| match *model {
            LevyModel::CramerLundbergExp { c, eta, alpha } => {
                let path = ClPath {
                    c,
                    eta,
                    alpha,
                    q: query.q,
                    r: query.r,
                    top,
                    escape,
                    horizon: cfg.horizon,
                };
                path.run(query.x, &mut Draws::new(cfg.seed, i, false))
            }
            LevyModel::BrownianRisk { c, sigma } => {
                let mut noise = Draws::new(cfg.seed, 2 * i, false);
                let mut bank = ClockBank {
                    draws: Draws::new(cfg.seed, 2 * i + 1, false),
                    q: query.q,
                    r: query.r,
                    lens: Vec::new(),
                };
                bm_paths(c, sigma, query.x, top, escape, cfg.horizon, cfg.dt, &[1], &mut noise, &mut bank)[0]
            }
        })
        .collect();
    Ok(events)
}

/// `simulate_cl_path`: outcomes of exponential-claims paths.
pub fn simulate_cl_paths(model: &LevyModel, query: &RuinQuery, cfg: &SimConfig) -> Result<Vec<RuinEvent>> {
    match model {
        LevyModel::CramerLundbergExp { .. } => simulate_paths(model, query, cfg),
        _ => Err(Error::InvalidArgument("exact event simulation needs exponential claims".into())),
    }
}

/// `simulate_bm_path`: outcomes of Brownian skeleton paths with step `cfg.dt`.
pub fn simulate_bm_paths(model: &LevyModel, query: &RuinQuery, cfg: &SimConfig) -> Result<Vec<RuinEvent>> {
    match model {
        LevyModel::BrownianRisk { .. } => simulate_paths(model, query, cfg),
        _ => Err(Error::InvalidArgument("skeleton simulation needs the Brownian model".into())),
    }
}

/// Coupled Brownian estimates at steps `dt`, `dt/2`, `dt/4` on shared noise,
/// and the `√dt` extrapolation `2·est(dt/4) − est(dt)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefinementStudy {
    pub dts: [f64; 3],
    pub estimates: Vec<MCEstimate>,
    pub extrapolated: f64,
    /// Conservative: treats the two estimates as independent.
    pub extrapolated_stderr: f64,
}

impl RefinementStudy {
    /// Estimates move monotonically as the step shrinks.
    pub fn is_monotone(&self) -> bool {
        let e: Vec<f64> = self.estimates.iter().map(|m| m.point).collect();
        (e[0] <= e[1] && e[1] <= e[2]) || (e[0] >= e[1] && e[1] >= e[2])
    }
}

pub fn brownian_refinement(
    model: &LevyModel,
    query: &RuinQuery,
    functional: Functional,
    cfg: &SimConfig,
) -> Result<RefinementStudy> {
    if !matches!(model, LevyModel::BrownianRisk { .. }) {
        return Err(Error::InvalidArgument("refinement study applies to the Brownian model".into()));
    }
    let functionals = [functional];
    let query = effective_query(query, &functionals)?;
    query.validate()?;
    cfg.validate(model, &query)?;
    let (top, escape) = stopping_level(model, &query);
    let levels = run_bm(model, &query, &functionals, cfg, &[4, 2, 1], top, escape)?;
    let estimates: Vec<MCEstimate> = levels.into_iter().map(|mut v| v.remove(0)).collect();
    let coarse = &estimates[0];
    let finest = &estimates[2];
    Ok(RefinementStudy {
        dts: [cfg.dt, cfg.dt / 2.0, cfg.dt / 4.0],
        extrapolated: 2.0 * finest.point - coarse.point,
        extrapolated_stderr: (4.0 * finest.stderr.powi(2) + coarse.stderr.powi(2)).sqrt(),
        estimates,
    })
}

fn cl_params(model: &LevyModel) -> Result<(f64, f64, f64)> {
    match *model {
        LevyModel::CramerLundbergExp { c, eta, alpha } => Ok((c, eta, alpha)),
        _ => Err(Error::InvalidArgument("exact event simulation needs exponential claims".into())),
    }
}

fn mean_of<F: Fn(&mut Draws) -> f64 + Sync>(cfg: &SimConfig, sample: F) -> MCEstimate {
    let chunks = cfg.n_paths.div_ceil(CHUNK);
    let parts: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|ci| {
            let mut m = Moments::default();
            for i in ci * CHUNK..((ci + 1) * CHUNK).min(cfg.n_paths) {
                m.push(sample(&mut Draws::new(cfg.seed, i, false)));
            }
            m
        })
        .collect();
    let mut total = Moments::default();
    for p in &parts {
        total.merge(p);
    }
    finish(&total, 0, cfg, format!("horizon {}", cfg.horizon))
}

/// `E_x[e^{−pτ_b⁺}]` by exact simulation, `x ≤ b`.
pub fn estimate_upcrossing_lt(model: &LevyModel, x: f64, b: f64, p: f64, cfg: &SimConfig) -> Result<MCEstimate> {
    let (c, eta, alpha) = cl_params(model)?;
    Ok(mean_of(cfg, |d| {
        let (mut t, mut y) = (0.0, x);
        loop {
            let gap = d.exp(eta);
            if y + c * gap >= b {
                t += (b - y) / c;
                return if t > cfg.horizon { 0.0 } else { (-p * t).exp() };
            }
            t += gap;
            if t > cfg.horizon {
                return 0.0;
            }
            y += c * gap - d.exp(alpha);
        }
    }))
}

/// `E_x[e^{−pτ_a⁻} g(X_{τ_a⁻}); τ_a⁻ < τ_b⁺]` by exact simulation.
pub fn estimate_exit_below<G: Fn(f64) -> f64 + Sync>(
    model: &LevyModel,
    x: f64,
    a: f64,
    b: f64,
    p: f64,
    g: G,
    cfg: &SimConfig,
) -> Result<MCEstimate> {
    let (c, eta, alpha) = cl_params(model)?;
    if !(a <= x && x <= b) {
        return Err(Error::InvalidArgument(format!("need a <= x <= b, got a={a}, x={x}, b={b}")));
    }
    Ok(mean_of(cfg, |d| {
        let (mut t, mut y) = (0.0, x);
        loop {
            let gap = d.exp(eta);
            if y + c * gap >= b {
                return 0.0;
            }
            t += gap;
            if t > cfg.horizon {
                return 0.0;
            }
            y += c * gap - d.exp(alpha);
            if y < a {
                return (-p * t).exp() * g(y);
            }
        }
    }))
}

/// `∫_0^∞ e^{−pt} 1{X_t ∈ [e_k, e_{k+1}), t < τ_a⁺} dt` per bin by exact
/// simulation, `x ≤ a`, one estimate per bin.
pub fn estimate_occupation(
    model: &LevyModel,
    x: f64,
    a: f64,
    p: f64,
    edges: &[f64],
    cfg: &SimConfig,
) -> Result<Vec<MCEstimate>> {
    let (c, eta, alpha) = cl_params(model)?;
    if x > a || edges.len() < 2 {
        return Err(Error::InvalidArgument("need x <= a and at least one bin".into()));
    }
    let bins = edges.len() - 1;
    let chunks = cfg.n_paths.div_ceil(CHUNK);
    // time in [lo, hi) along a segment rising from (t0, y0) at slope c
    let add = |acc: &mut [f64], t0: f64, y0: f64, y1: f64| {
        for k in 0..bins {
            let lo = edges[k].max(y0);
            let hi = edges[k + 1].min(y1);
            if hi > lo {
                let s0 = t0 + (lo - y0) / c;
                let s1 = t0 + (hi - y0) / c;
                acc[k] += if p > 0.0 { ((-p * s0).exp() - (-p * s1).exp()) / p } else { s1 - s0 };
            }
        }
    };
    let parts: Vec<Vec<Moments>> = (0..chunks)
        .into_par_iter()
        .map(|ci| {
            let mut m = vec![Moments::default(); bins];
            let mut acc = vec![0.0; bins];
            for i in ci * CHUNK..((ci + 1) * CHUNK).min(cfg.n_paths) {
                let mut d = Draws::new(cfg.seed, i, false);
                acc.iter_mut().for_each(|v| *v = 0.0);
                let (mut t, mut y) = (0.0, x);
                loop {
                    let gap = d.exp(eta);
                    let top = y + c * gap;
                    if top >= a {
                        add(&mut acc, t, y, a);
                        break;
                    }
                    add(&mut acc, t, y, top);
                    t += gap;
                    if t > cfg.horizon {
                        break;
                    }
                    y = top - d.exp(alpha);
                }
                for k in 0..bins {
                    m[k].push(acc[k]);
                }
            }
            m
        })
        .collect();
    let mut total = vec![Moments::default(); bins];
    for part in &parts {
        for k in 0..bins {
            total[k].merge(&part[k]);
        }
    }
    Ok(total
        .iter()
        .map(|m| finish(m, 0, cfg, format!("horizon {}", cfg.horizon)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parisian::{cl_classical_ruin, Parisian};

    fn cl() -> LevyModel {
        LevyModel::cramer_lundberg(2.0, 1.0, 1.0).unwrap()
    }

    fn small(n: u64) -> SimConfig {
        SimConfig {
            n_paths: n,
            ..SimConfig::default()
        }
    }

    #[test]
    fn reproducible_and_accounted() {
        let q = RuinQuery::new(1.0, 1.0, 0.5).with_barrier(4.0);
        let cfg = small(5000);
        let a = estimate_functional(&cl(), &q, Functional::RuinProb, &cfg).unwrap();
        let b = estimate_functional(&cl(), &q, Functional::RuinProb, &cfg).unwrap();
        assert_eq!(a, b);
        let ev = simulate_cl_paths(&cl(), &q, &cfg).unwrap();
        assert_eq!(ev.len(), 5000);
        for e in &ev {
            assert_eq!(e.ruined as u8 + e.exited_above as u8 + e.censor as u8, 1);
            assert!(e.deficit <= 0.0);
        }
        let freq = ev.iter().filter(|e| e.ruined).count() as f64 / 5000.0;
        assert!((freq - a.point).abs() < 1e-15);
    }

    #[test]
    fn thread_count_does_not_matter() {
        let q = RuinQuery::new(1.0, 1.0, 0.5);
        let cfg = small(20_000);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let a = one.install(|| estimate_functional(&cl(), &q, Functional::JointLt, &cfg).unwrap());
        let b = three.install(|| estimate_functional(&cl(), &q, Functional::JointLt, &cfg).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn no_clock_means_no_ruin() {
        let q = RuinQuery::new(0.5, f64::INFINITY, 0.0);
        let e = estimate_functional(&cl(), &q, Functional::RuinProb, &small(5000)).unwrap();
        assert_eq!(e.point, 0.0);
    }

    #[test]
    fn degenerate_clocks_give_classical_ruin() {
        let exact = cl_classical_ruin(2.0, 1.0, 1.0, 1.0);
        for q in [RuinQuery::new(1.0, 1e-6, 0.0), RuinQuery::new(1.0, 10.0, 1e6)] {
            let e = estimate_functional(&cl(), &q, Functional::RuinProb, &small(100_000)).unwrap();
            assert!((e.point - exact).abs() < 3.0 * e.stderr, "{q:?}: {} ± {} vs {exact}", e.point, e.stderr);
        }
    }

    #[test]
    fn exponential_clock_matches_formula() {
        let e = estimate_functional(&cl(), &RuinQuery::new(1.0, f64::INFINITY, 0.5), Functional::RuinProb, &small(100_000)).unwrap();
        let exact = Parisian::new(&cl()).ruin_prob_exp_delay(1.0, 0.5).unwrap();
        assert!((e.point - exact).abs() < 3.0 * e.stderr, "{} ± {} vs {exact}", e.point, e.stderr);
    }

    #[test]
    fn race_partition_simulated() {
        let q = RuinQuery::new(-0.5, 1.0, 0.5);
        let est = estimate_functionals(&cl(), &q, &[Functional::RaceUp, Functional::RaceClock], &small(20_000)).unwrap();
        assert!((est[0].point + est[1].point - 1.0).abs() < 1e-12);
        assert!(estimate_functional(&cl(), &RuinQuery::new(0.5, 1.0, 0.5), Functional::RaceUp, &small(10)).is_err());
    }

    #[test]
    fn discounted_two_sided_matches_formula() {
        let q = RuinQuery::new(1.0, 1.0, 0.5).with_discount(2.0).with_barrier(4.0);
        let e = estimate_functional(&cl(), &q, Functional::JointLt, &small(100_000)).unwrap();
        let exact = Parisian::new(&cl()).lt_ruin_two_sided(&q).unwrap();
        assert!((e.point - exact).abs() < 3.0 * e.stderr, "{} ± {} vs {exact}", e.point, e.stderr);
    }

    #[test]
    fn per_excursion_ruin_is_geometric() {
        // undershoots are Exp(α), so every excursion has the same ruin chance
        let q = RuinQuery::new(0.0, f64::INFINITY, 0.5).with_barrier(100.0);
        let ev = simulate_cl_paths(&cl(), &q, &small(100_000)).unwrap();
        let mut rates = Vec::new();
        for k in 1..=3u32 {
            let reached = ev.iter().filter(|e| e.excursions >= k).count() as f64;
            let ruined_at = ev.iter().filter(|e| e.ruined && e.excursions == k).count() as f64;
            let rate = ruined_at / reached;
            rates.push((rate, (rate * (1.0 - rate) / reached).sqrt()));
        }
        for w in rates.windows(2) {
            let se = (w[0].1.powi(2) + w[1].1.powi(2)).sqrt();
            assert!((w[0].0 - w[1].0).abs() < 4.0 * se, "{rates:?}");
        }
    }

    #[test]
    fn antithetic_pairs() {
        let q = RuinQuery::new(1.0, 1.0, 0.5);
        let cfg = SimConfig {
            antithetic: true,
            ..small(20_000)
        };
        let e = estimate_functional(&cl(), &q, Functional::RuinProb, &cfg).unwrap();
        assert_eq!(e.n_paths, 20_000);
        let exact = Parisian::new(&cl()).ruin_prob_mixed(1.0, 1.0, 0.5).unwrap();
        assert!((e.point - exact).abs() < 4.0 * e.stderr);
    }

    #[test]
    fn brownian_without_noise_never_ruins() {
        let m = LevyModel::brownian(1.0, 1e-3).unwrap();
        let cfg = SimConfig {
            n_paths: 200,
            dt: 1e-3,
            ..SimConfig::default()
        };
        let e = estimate_functional(&m, &RuinQuery::new(0.5, 1.0, 0.5), Functional::RuinProb, &cfg).unwrap();
        assert_eq!(e.point, 0.0);
    }

    #[test]
    fn config_checks() {
        let m = LevyModel::brownian(1.0, 1.0).unwrap();
        let q = RuinQuery::new(0.5, 1.0, 0.5);
        let coarse = SimConfig { dt: 0.1, ..small(10) };
        assert!(estimate_functional(&m, &q, Functional::RuinProb, &coarse).is_err());
        let short = SimConfig { horizon: 0.5, ..small(10) };
        assert!(estimate_functional(&cl(), &q, Functional::RuinProb, &short).is_err());
        assert!(estimate_functional(&cl(), &q, Functional::RuinProb, &small(0)).is_err());
    }

    #[test]
    fn brownian_refinement_trends_to_formula() {
        let m = LevyModel::brownian(1.0, 1.0).unwrap();
        let cfg = SimConfig {
            n_paths: 40_000,
            dt: 1e-2,
            ..SimConfig::default()
        };
        let q = RuinQuery::new(0.5, 1.0, 0.0);
        let study = brownian_refinement(&m, &q, Functional::RuinProb, &cfg).unwrap();
        let exact = Parisian::new(&m).ruin_prob_det_delay(0.5, 1.0).unwrap();
        assert!(study.is_monotone(), "{study:?}");
        assert!(study.estimates[0].point > study.estimates[2].point);
        assert!((study.extrapolated - exact).abs() < 3.0 * study.extrapolated_stderr, "{study:?} vs {exact}");
    }
}
