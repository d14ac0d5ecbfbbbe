//! `parisian`: Parisian ruin quantities, simulation and self-checks from the
//! command line.
//!
//! Exit status is 0 on success, 1 when a computation fails (or a verify
//! check does) and 2 on usage or config errors.

mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use parisian_core::montecarlo::{brownian_refinement, estimate_functional, Functional, SimConfig};
use parisian_core::parisian::{compute, parse_horizon, Quantity, RuinQuery};
use parisian_core::scale_fn::{ScaleFunction, ScriptW};
use parisian_core::transition::TransitionMeasure;
use parisian_core::verify::{default_models, run_all, Level};
use parisian_core::{Error, LevyModel};
use serde_json::json;

use config::{CliConfig, Format};

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Compute(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidModel(_) | Error::InvalidArgument(_) | Error::Config(_) => Failure::Usage(e.to_string()),
            _ => Failure::Compute(e.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "parisian", version, about = "Parisian ruin with mixed delays for Levy risk processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate one quantity.
    #[command(allow_negative_numbers = true)]
    Compute {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_quantity)]
        quantity: Quantity,
        #[command(flatten)]
        query: QueryArgs,
    },
    /// Sweep one query parameter and emit `name,value` rows.
    #[command(allow_negative_numbers = true)]
    Table {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_quantity, default_value = "ruin_prob")]
        quantity: Quantity,
        #[command(flatten)]
        query: QueryArgs,
        #[arg(long, value_enum)]
        sweep: Sweep,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long, default_value_t = 11)]
        steps: usize,
    },
    /// Monte Carlo estimate of a path functional.
    #[command(allow_negative_numbers = true)]
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "ruin_prob")]
        functional: FunctionalArg,
        #[command(flatten)]
        query: QueryArgs,
        #[arg(long, default_value_t = 100_000)]
        paths: u64,
        /// Skeleton step for the Brownian model.
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 500.0)]
        horizon: f64,
        #[arg(long)]
        antithetic: bool,
        /// Brownian only: also run dt/2 and dt/4 on shared noise.
        #[arg(long)]
        refine: bool,
    },
    /// Tilted transition law `(z/r) P(X_r ∈ dz)`: density on a grid and atom.
    #[command(allow_negative_numbers = true)]
    Transition {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        r: f64,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long, default_value_t = 11)]
        steps: usize,
    },
    /// Scale functions on a grid.
    #[command(allow_negative_numbers = true)]
    Scale {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "w")]
        kind: ScaleKind,
        #[arg(long, default_value_t = 0.0)]
        p: f64,
        /// Argument of `Z_p(x, θ)`.
        #[arg(long, default_value_t = 0.0)]
        theta: f64,
        /// Rate shift of the two-rate function.
        #[arg(long, default_value_t = 0.0)]
        s: f64,
        /// Cutoff of the two-rate function.
        #[arg(long, default_value_t = 0.0)]
        a: f64,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long, default_value_t = 11)]
        steps: usize,
    },
    /// Run the verification suites; exit 1 if any check fails.
    Verify {
        /// Config whose model replaces the two default models.
        #[arg(long = "model-config", alias = "config")]
        config: Option<PathBuf>,
        #[arg(long, default_value = "fast", value_parser = parse_level)]
        level: Level,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// Model or full config file, JSON or TOML.
    #[arg(long = "model-config", alias = "config")]
    config: Option<PathBuf>,
    /// Inline model instead of a config file.
    #[arg(long, value_enum, requires = "c")]
    model: Option<ModelKind>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug, Clone)]
struct QueryArgs {
    #[arg(long)]
    x: f64,
    /// Deterministic delay; `inf` switches it off.
    #[arg(long, value_parser = parse_horizon, default_value = "inf")]
    r: f64,
    /// Exponential clock rate; 0 switches it off.
    #[arg(long, default_value_t = 0.0)]
    q: f64,
    #[arg(long, default_value_t = 0.0)]
    p: f64,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
}

impl QueryArgs {
    fn query(&self) -> RuinQuery {
        RuinQuery {
            x: self.x,
            b: self.b,
            p: self.p,
            q: self.q,
            r: self.r,
            lambda: self.lambda,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModelKind {
    Brownian,
    CramerLundberg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Sweep {
    X,
    R,
    Q,
    P,
    B,
    Lambda,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum FunctionalArg {
    RuinProb,
    JointLt,
    ExitLt,
    RaceUp,
    RaceClock,
}

impl From<FunctionalArg> for Functional {
    fn from(f: FunctionalArg) -> Self {
        match f {
            FunctionalArg::RuinProb => Functional::RuinProb,
            FunctionalArg::JointLt => Functional::JointLt,
            FunctionalArg::ExitLt => Functional::ExitLt,
            FunctionalArg::RaceUp => Functional::RaceUp,
            FunctionalArg::RaceClock => Functional::RaceClock,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum ScaleKind {
    /// `W^(p)(x)`
    W,
    /// `Z_p(x, θ)`
    Z,
    /// `𝒲_a^(p,s)(x)`
    ScriptW,
}

fn parse_quantity(s: &str) -> Result<Quantity, String> {
    s.parse()
}

fn parse_level(s: &str) -> Result<Level, String> {
    s.parse()
}

/// Model, precision and output settings after merging flags over the file.
struct Resolved {
    config: CliConfig,
    format: Format,
    output: Option<PathBuf>,
}

impl Common {
    fn resolve(&self, default_format: Format) -> Result<Resolved, Failure> {
        let mut config = match (&self.config, self.model) {
            (Some(_), Some(_)) => return Err(Failure::Usage("give either --model-config or --model, not both".into())),
            (Some(path), None) => config::load(path)?,
            (None, Some(kind)) => CliConfig {
                model: self.inline_model(kind)?,
                output_format: None,
                output_path: None,
                seed: None,
                tolerances: Default::default(),
            },
            (None, None) => return Err(Failure::Usage("a model is required: --model-config FILE or --model KIND".into())),
        };
        if self.seed.is_some() {
            config.seed = self.seed;
        }
        Ok(Resolved {
            format: self.format.or(config.output_format).unwrap_or(default_format),
            output: self.output.clone().or_else(|| config.output_path.clone()),
            config,
        })
    }

    fn inline_model(&self, kind: ModelKind) -> Result<LevyModel, Failure> {
        let need = |v: Option<f64>, name: &str| v.ok_or_else(|| Failure::Usage(format!("--{name} is required for this model")));
        let c = need(self.c, "c")?;
        Ok(match kind {
            ModelKind::Brownian => LevyModel::brownian(c, need(self.sigma, "sigma")?)?,
            ModelKind::CramerLundberg => LevyModel::cramer_lundberg(c, need(self.eta, "eta")?, need(self.alpha, "alpha")?)?,
        })
    }
}

fn emit(text: &str, output: Option<&PathBuf>) -> Result<(), Failure> {
    match output {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Failure::Compute(format!("cannot write to stdout: {e}")))
        }
    }
}

fn to_json(value: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("values serialize");
    s.push('\n');
    s
}

/// `n` evenly spaced points from `from` to `to`.
fn grid(from: f64, to: f64, n: usize) -> Result<Vec<f64>, Failure> {
    if n == 0 || !from.is_finite() || !to.is_finite() {
        return Err(Failure::Usage("grid needs finite ends and at least one step".into()));
    }
    if n == 1 {
        return Ok(vec![from]);
    }
    Ok((0..n).map(|k| from + (to - from) * k as f64 / (n - 1) as f64).collect())
}

fn csv(header: &str, rows: &[(f64, f64)]) -> String {
    let mut s = format!("{header}\n");
    for (a, b) in rows {
        s.push_str(&format!("{a},{b}\n"));
    }
    s
}

fn run(cli: Cli) -> Result<bool, Failure> {
    match cli.command {
        Command::Compute { common, quantity, query } => {
            let r = common.resolve(Format::Json)?;
            let query = query.query();
            let c = compute(&r.config.model, quantity, &query, r.config.precision()?)?;
            let text = match r.format {
                Format::Json => to_json(&json!({
                    "quantity": quantity.name(),
                    "value": c.value,
                    "method": c.method,
                    "est_error": c.est_error,
                    "model": r.config.model,
                    "query": query,
                })),
                Format::Csv => format!("quantity,value,method,est_error\n{},{},{},{}\n", quantity.name(), c.value, c.method, c.est_error),
            };
            emit(&text, r.output.as_ref())?;
        }
        Command::Table {
            common,
            quantity,
            query,
            sweep,
            from,
            to,
            steps,
        } => {
            let r = common.resolve(Format::Csv)?;
            let prec = r.config.precision()?;
            let name = match sweep {
                Sweep::X => "x",
                Sweep::R => "r",
                Sweep::Q => "q",
                Sweep::P => "p",
                Sweep::B => "b",
                Sweep::Lambda => "lambda",
            };
            let mut rows = Vec::new();
            for v in grid(from, to, steps)? {
                let mut q = query.query();
                match sweep {
                    Sweep::X => q.x = v,
                    Sweep::R => q.r = v,
                    Sweep::Q => q.q = v,
                    Sweep::P => q.p = v,
                    Sweep::B => q.b = Some(v),
                    Sweep::Lambda => q.lambda = v,
                }
                rows.push((v, compute(&r.config.model, quantity, &q, prec)?.value));
            }
            let text = match r.format {
                Format::Csv => csv(&format!("{name},value"), &rows),
                Format::Json => to_json(&json!({
                    "quantity": quantity.name(),
                    "sweep": name,
                    "model": r.config.model,
                    "query": query.query(),
                    "rows": rows.iter().map(|(a, b)| json!({name: a, "value": b})).collect::<Vec<_>>(),
                })),
            };
            emit(&text, r.output.as_ref())?;
        }
        Command::Simulate {
            common,
            functional,
            query,
            paths,
            dt,
            horizon,
            antithetic,
            refine,
        } => {
            let r = common.resolve(Format::Json)?;
            let query = query.query();
            let cfg = SimConfig {
                n_paths: paths,
                horizon,
                dt,
                seed: r.config.seed.unwrap_or(SimConfig::default().seed),
                antithetic,
            };
            let f = Functional::from(functional);
            let mut body = if refine {
                let study = brownian_refinement(&r.config.model, &query, f, &cfg)?;
                let finest = study.estimates[2].clone();
                json!({
                    "estimate": finest.point,
                    "stderr": finest.stderr,
                    "n": finest.n_paths,
                    "censored": finest.censored,
                    "refinement": study,
                })
            } else {
                let e = estimate_functional(&r.config.model, &query, f, &cfg)?;
                json!({
                    "estimate": e.point,
                    "stderr": e.stderr,
                    "n": e.n_paths,
                    "censored": e.censored,
                    "censoring_exceeds_bound": e.censoring_exceeds_bound,
                    "note": e.truncation_bias_note,
                })
            };
            body["functional"] = json!(f);
            body["seed"] = json!(cfg.seed);
            body["model"] = json!(r.config.model);
            body["query"] = json!(query);
            let text = match r.format {
                Format::Json => to_json(&body),
                Format::Csv => format!("estimate,stderr,n,censored\n{},{},{},{}\n", body["estimate"], body["stderr"], body["n"], body["censored"]),
            };
            emit(&text, r.output.as_ref())?;
        }
        Command::Transition {
            common,
            r: horizon,
            from,
            to,
            steps,
        } => {
            let r = common.resolve(Format::Csv)?;
            let m = TransitionMeasure::new(&r.config.model, horizon)?;
            let rows: Vec<(f64, f64)> = grid(from, to, steps)?.into_iter().map(|z| (z, m.density(z))).collect();
            let text = match r.format {
                Format::Csv => csv("z,density", &rows),
                Format::Json => to_json(&json!({
                    "model": r.config.model,
                    "r": horizon,
                    "atom": m.atom.map(|a| json!({"location": a.location, "mass": a.mass})),
                    "rows": rows.iter().map(|(z, d)| json!({"z": z, "density": d})).collect::<Vec<_>>(),
                })),
            };
            emit(&text, r.output.as_ref())?;
        }
        Command::Scale {
            common,
            kind,
            p,
            theta,
            s,
            a,
            from,
            to,
            steps,
        } => {
            let r = common.resolve(Format::Csv)?;
            let model = r.config.model;
            if !(p >= 0.0 && p + s >= 0.0) {
                return Err(Failure::Usage(format!("need p >= 0 and p + s >= 0, got p={p}, s={s}")));
            }
            let w = ScaleFunction::new(&model, p);
            let sw = ScriptW::new(&model, p, s);
            let rows: Vec<(f64, f64)> = grid(from, to, steps)?
                .into_iter()
                .map(|x| {
                    let v = match kind {
                        ScaleKind::W => w.eval(x),
                        ScaleKind::Z => w.z(x, theta),
                        ScaleKind::ScriptW => sw.eval(a, x),
                    };
                    (x, v)
                })
                .collect();
            let text = match r.format {
                Format::Csv => csv("x,value", &rows),
                Format::Json => to_json(&json!({
                    "model": model,
                    "kind": format!("{kind:?}").to_lowercase(),
                    "p": p,
                    "rows": rows.iter().map(|(x, v)| json!({"x": x, "value": v})).collect::<Vec<_>>(),
                })),
            };
            emit(&text, r.output.as_ref())?;
        }
        Command::Verify {
            config,
            level,
            seed,
            output,
        } => {
            let models = match config {
                Some(path) => vec![config::load(&path)?.model],
                None => default_models(),
            };
            let report = run_all(&models, level, seed);
            let mut text = report.to_json();
            text.push('\n');
            emit(&text, output.as_ref())?;
            eprint!("{}", report.to_table());
            return Ok(report.all_passed());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}\n\nUsage: parisian <compute|table|simulate|transition|scale|verify> [OPTIONS]; see --help");
            ExitCode::from(2)
        }
        Err(Failure::Compute(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
