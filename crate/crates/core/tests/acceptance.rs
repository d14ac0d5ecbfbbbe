//! Acceptance criteria, one line each. Runs without the test harness so the
//! lines are always printed; exits non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use parisian_core::verify::*;
use parisian_core::LevyModel;

const SEED: u64 = 42;

struct Outcome {
    passed: bool,
    detail: String,
}

/// Every check under each prefix passes, and each prefix has at least one.
fn all_pass(report: &VerificationReport, prefixes: &[String]) -> Outcome {
    let mut missing = Vec::new();
    let mut failed = Vec::new();
    let mut total = 0;
    for p in prefixes {
        let hits: Vec<&Check> = report.matching(p).collect();
        if hits.is_empty() {
            missing.push(p.clone());
        }
        total += hits.len();
        failed.extend(hits.into_iter().filter(|c| !c.passed).map(|c| {
            format!("{} (err {:.3e} > tol {:.3e}{}{})", c.name, c.abs_err, c.tol, if c.note.is_empty() { "" } else { "; " }, c.note)
        }));
    }
    let passed = missing.is_empty() && failed.is_empty();
    let mut detail = format!("{total} checks");
    if !missing.is_empty() {
        detail.push_str(&format!("; no checks for {}", missing.join(", ")));
    }
    if !failed.is_empty() {
        detail.push_str(&format!("; failed: {}", failed.join(", ")));
    }
    Outcome { passed, detail }
}

fn within(o: Outcome, elapsed: Duration, budget: Duration) -> Outcome {
    let fast = elapsed <= budget;
    Outcome {
        passed: o.passed && fast,
        detail: format!("{}; {:.1}s of {}s budget", o.detail, elapsed.as_secs_f64(), budget.as_secs()),
    }
}

fn per_model(suite_check: &[&str], models: &[&str]) -> Vec<String> {
    suite_check
        .iter()
        .flat_map(|s| models.iter().map(move |m| format!("{s}.{m}.")))
        .collect()
}

fn main() -> ExitCode {
    let models = default_models();
    let bm = models.iter().find(|m| matches!(m, LevyModel::BrownianRisk { .. })).unwrap();
    let cl = models.iter().find(|m| matches!(m, LevyModel::CramerLundbergExp { .. })).unwrap();
    let both = ["brownian", "cramer_lundberg"];
    let level = Level::Full;

    let t = Instant::now();
    let grid = IdentityGrid::for_level(level, SEED);
    let identity = VerificationReport::merge(models.iter().map(|m| run_identity_suite(m, &grid)));
    let identity_time = t.elapsed();

    let limit = VerificationReport::merge(models.iter().map(|m| run_limit_suite(m, level)));

    let oracle_cfg = OracleConfig::for_level(level, SEED);
    let t = Instant::now();
    let oracle_cl = run_oracle_suite(cl, &oracle_cfg);
    let oracle_time = t.elapsed();
    let oracle_bm = run_oracle_suite(bm, &oracle_cfg);

    let property = VerificationReport::merge(models.iter().map(|m| run_property_suite(m, level)));
    let obs = VerificationReport::new(Vec::new(), models.iter().flat_map(observations).collect());
    let assembled = VerificationReport::merge([
        identity.clone(),
        limit.clone(),
        oracle_cl.clone(),
        oracle_bm.clone(),
        property.clone(),
        obs,
    ]);

    let mut results: Vec<(&str, Outcome)> = Vec::new();

    let c1 = per_model(
        &[
            "identity.laplace_w",
            "identity.laplace_script_w",
            "identity.lambda_at_zero",
            "identity.lambda_time_laplace",
            "identity.tilted_tail_laplace",
            "identity.lambda_forms",
            "identity.lambda_time_integral",
        ],
        &both,
    );
    results.push((
        "identity suite",
        within(all_pass(&identity, &c1), identity_time, Duration::from_secs(120)),
    ));

    let c2 = per_model(
        &[
            "limit.long_delay_exit",
            "limit.long_delay_two_sided",
            "limit.long_delay_infinite",
            "limit.long_delay_ruin",
            "limit.slow_clock_ruin",
            "limit.slow_clock_exit",
            "limit.slow_clock_joint",
            "limit.short_delay_ruin",
            "limit.fast_clock_ruin",
            "limit.short_delay_two_sided",
            "limit.short_delay_exit",
        ],
        &both,
    );
    let mut c2 = c2;
    c2.push("limit.brownian_long_delay_closed.brownian.".into());
    results.push(("limit suite", all_pass(&limit, &c2)));

    let c3: Vec<String> = [
        "oracle.ruin_prob",
        "oracle.two_sided.cramer_lundberg.x=1,b=4,p=0,",
        "oracle.two_sided.cramer_lundberg.x=1,b=4,p=0.2,",
        "oracle.joint",
        "oracle.exit",
        "oracle.race_up",
        "oracle.race_clock",
    ]
    .iter()
    .map(|s| if s.contains("cramer_lundberg") { s.to_string() } else { format!("{s}.cramer_lundberg.") })
    .collect();
    results.push((
        "exact compound Poisson oracle at 1e6 paths",
        within(all_pass(&oracle_cl, &c3), oracle_time, Duration::from_secs(300)),
    ));

    let brownian = VerificationReport::merge([identity.clone(), oracle_bm.clone()]);
    let c4: Vec<String> = [
        "identity.brownian_closed_form.brownian.",
        "identity.psi1_closed_form.brownian.",
        "identity.psi2_closed_form.brownian.",
        "oracle.ruin_prob.brownian.",
        "oracle.refinement_trend.brownian.",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let mut o4 = all_pass(&brownian, &c4);
    let closed = brownian.matching("identity.brownian_closed_form.").count();
    o4.passed &= closed == 27;
    o4.detail.push_str(&format!("; closed-form grid has {closed} points"));
    results.push(("Brownian closed form and skeleton simulation", o4));

    let c5 = per_model(
        &["property.decreasing_in_x", "property.decreasing_in_r", "property.increasing_in_q", "property.sandwich", "property.evaluable"],
        &both,
    );
    results.push(("monotonicity and sandwich on the 5x5x5 grid", all_pass(&property, &c5)));

    let partitions = VerificationReport::merge([identity.clone(), oracle_cl.clone()]);
    let mut c6 = per_model(&["identity.exit_partition", "identity.race_partition"], &both);
    c6.push("oracle.race_partition.cramer_lundberg.".into());
    c6.push("oracle.race_up.cramer_lundberg.x=-0.5,p=0,lambda=0,".into());
    c6.push("oracle.race_clock.cramer_lundberg.x=-0.5,p=0,lambda=0,".into());
    results.push(("partition checks", all_pass(&partitions, &c6)));

    let t = Instant::now();
    let rerun = run_all(&models, level, SEED);
    let same = rerun.to_json() == assembled.to_json();
    results.push((
        "byte-identical reports for a fixed seed",
        Outcome {
            passed: same,
            detail: format!(
                "{} bytes, {} checks, rerun in {:.1}s",
                rerun.to_json().len(),
                rerun.summary.checks,
                t.elapsed().as_secs_f64()
            ),
        },
    ));

    let mut ok = true;
    for (k, (title, o)) in results.iter().enumerate() {
        println!("criterion {}: {} - {title}: {}", k + 1, if o.passed { "PASS" } else { "FAIL" }, o.detail);
        ok &= o.passed;
    }
    let s = &assembled.summary;
    println!("all suites: {} checks, {} passed, {} failed", s.checks, s.passed, s.failed);
    for c in assembled.failures() {
        println!("  failing check outside the criteria: {} (err {:.3e}, tol {:.3e}; {})", c.name, c.abs_err, c.tol, c.note);
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
