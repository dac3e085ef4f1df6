//! Command execution and artifact writing.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use gamma_lab::evaluator::lambda_delta;
use gamma_lab::gamma::{estimate_gamma_step, estimate_kappa, pointwise_scan};
use gamma_lab::gridfn::{lp_distance, parse_text, to_text};
use gamma_lab::invariants::{random_corpus, run_invariants};
use gamma_lab::recovery::recover_piecewise_linear;
use gamma_lab::{KappaEstimate, PlFn, Profile, VERSION};
use serde_json::{json, Value};

use crate::error::CliError;
use crate::plan::{Command, ExperimentPlan};

pub const CSV_VERSION: &str = "csv v1";

/// Everything a command produces. Nothing here depends on the clock.
#[derive(Debug, Default)]
pub struct Artifacts {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    pub summary: Value,
    pub text: String,
    /// `(file name, gridfn text)`
    pub functions: Vec<(String, String)>,
    /// Set when the command ran but its check did not pass.
    pub failure: Option<CliError>,
}

/// Shortest round-trip form; exponent notation for very small or large magnitudes.
fn num(x: f64) -> String {
    let a = x.abs();
    if x.is_infinite() && x > 0.0 {
        "inf".into()
    } else if a != 0.0 && !(1e-4..1e16).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

fn round9(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

pub fn execute(plan: &ExperimentPlan) -> Result<Artifacts, CliError> {
    log::info!("command {} with {} ladder entries", plan.command.name(), plan.ladder.len());
    match plan.command {
        Command::CheckProfile => check_profile(plan),
        Command::Eval => eval(plan),
        Command::Scan => scan(plan),
        Command::Kappa | Command::Gamma1d => constant(plan),
        Command::Recover => recover(plan),
        Command::Invariants => invariants(plan),
    }
}

fn check_profile(plan: &ExperimentPlan) -> Result<Artifacts, CliError> {
    let phi = plan.profile.build()?;
    let r = phi.verify_conditions();
    let pass = r.passes();
    let norm = r.normalization.map(round9);
    let norm_s = norm.map(num).unwrap_or_else(|| "nan".into());
    let mut text = format!("normalization {norm_s}, {}\n", if pass { "pass" } else { "fail" });
    let _ = writeln!(text, "kind {} p {} scale {}", r.kind.name(), r.p, r.scale);
    let _ = writeln!(text, "alpha declared {} measured {}", r.alpha_declared, r.alpha_measured);
    let _ = writeln!(text, "beta declared {} measured {}", r.beta_declared, r.beta_measured);
    if let Some(e) = &r.normalization_error {
        let _ = writeln!(text, "normalization error: {e}");
    }
    Ok(Artifacts {
        columns: vec!["kind", "p", "scale", "normalization", "alpha", "beta", "pass"],
        rows: vec![vec![
            r.kind.name().into(),
            num(r.p),
            num(r.scale),
            norm_s,
            num(r.alpha_declared),
            num(r.beta_declared),
            pass.to_string(),
        ]],
        summary: json!({ "report": r, "normalization_rounded": norm, "pass": pass }),
        text,
        functions: vec![],
        failure: (!pass).then(|| CliError::Lab(gamma_lab::LabError::DegenerateProfile("profile fails admissibility".into()))),
    })
}

fn eval(plan: &ExperimentPlan) -> Result<Artifacts, CliError> {
    let phi = plan.profile.build()?;
    let u = plan.function.build()?;
    let mut rows = Vec::new();
    let mut entries = Vec::new();
    let mut text = String::new();
    for &d in &plan.ladder {
        let e = lambda_delta(&u, u.domain(), d, &phi, &plan.quad)?;
        let (loc, jump) = match &e.divergence_certificate {
            Some(c) => (num(c.location), num(c.jump)),
            None => (String::new(), String::new()),
        };
        rows.push(vec![num(d), num(e.value), num(e.error_estimate), e.is_divergent().to_string(), loc, jump]);
        let _ = writeln!(text, "delta {d}: energy {} (error {})", num(e.value), e.error_estimate);
        entries.push(json!({ "delta": d, "energy": num(e.value), "error_estimate": e.error_estimate,
            "certificate": e.divergence_certificate }));
    }
    Ok(Artifacts {
        columns: vec!["delta", "energy", "error_estimate", "divergent", "certificate_location", "certificate_jump"],
        rows,
        summary: json!({ "energies": entries }),
        text,
        ..Default::default()
    })
}

fn scan(plan: &ExperimentPlan) -> Result<Artifacts, CliError> {
    let phi = plan.profile.build()?;
    let u = plan.function.build()?;
    let s = pointwise_scan(&u, u.domain(), &phi, &plan.ladder, &plan.quad)?;
    let rows = (0..s.ladder.len())
        .map(|i| {
            vec![num(s.ladder[i]), num(s.values[i]), num(s.error_estimates[i]), num(s.target), num(s.target - s.values[i])]
        })
        .collect();
    let mut text = String::new();
    for i in 0..s.ladder.len() {
        let _ = writeln!(text, "delta {}: energy {} (target {})", s.ladder[i], s.values[i], s.target);
    }
    let _ = writeln!(text, "increasing: {}", s.is_increasing());
    if let Some(l) = s.extrapolated_limit() {
        let _ = writeln!(text, "extrapolated limit {l}");
    }
    Ok(Artifacts {
        columns: vec!["delta", "energy", "error_estimate", "target", "gap"],
        rows,
        summary: json!({ "scan": s, "increasing": s.is_increasing() }),
        text,
        ..Default::default()
    })
}

fn minimizer_files(est: &KappaEstimate, prefix: &str) -> Vec<(String, String)> {
    est.minimizers
        .iter()
        .enumerate()
        .map(|(i, f)| (format!("{prefix}_{i}.plfn"), to_text(f)))
        .collect()
}

fn constant(plan: &ExperimentPlan) -> Result<Artifacts, CliError> {
    let phi = plan.profile.build()?;
    let est = if plan.command == Command::Kappa {
        estimate_kappa(&phi, &plan.ladder, plan.nodes, &plan.opt)?
    } else {
        estimate_gamma_step(&phi, &plan.ladder, plan.nodes, &plan.opt)?
    };
    let name = est.target.name();
    let files = minimizer_files(&est, &format!("{name}_minimizer"));
    let rows = est
        .per_delta
        .iter()
        .zip(&files)
        .map(|(m, (f, _))| {
            vec![
                num(m.delta),
                num(m.energy),
                num(m.constraint),
                m.starts.to_string(),
                est.seed.to_string(),
                num(m.epsilon),
                m.feasible_starts.to_string(),
                m.best_start.clone(),
                f.clone(),
            ]
        })
        .collect();
    let mut text = format!("{name} estimate {} ({} profile, p = {})\n", est.value, est.profile, est.p);
    let _ = writeln!(text, "tail minimum {}, extrapolated {}", est.tail_minimum, est.extrapolated_limit);
    let _ = writeln!(text, "bracket [{}, {}]", est.bracket.0, est.bracket.1);
    for m in &est.per_delta {
        let _ = writeln!(text, "delta {}: {} from {} (constraint {})", m.delta, m.energy, m.best_start, m.constraint);
    }
    Ok(Artifacts {
        columns: vec![
            "delta",
            "best_energy",
            "constraint",
            "starts",
            "seed",
            "epsilon",
            "feasible_starts",
            "best_start",
            "function_file",
        ],
        rows,
        summary: json!({ "estimate": est, "value": est.value }),
        text,
        functions: files,
        failure: None,
    })
}

fn base_candidate(plan: &ExperimentPlan, phi: &Profile) -> Result<(PlFn, f64, Option<KappaEstimate>), CliError> {
    let base_delta = plan.recover_base_delta.unwrap_or(plan.ladder[0]);
    if let Some(path) = &plan.recover_base_file {
        if plan.recover_base_delta.is_none() {
            return Err(CliError::Config("recover.base_file needs recover.base_delta".into()));
        }
        let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        return Ok((parse_text(&text)?, base_delta, None));
    }
    let est = estimate_kappa(phi, &[base_delta], plan.nodes, &plan.opt)?;
    let best = est.minimizers[0].clone();
    Ok((best, base_delta, Some(est)))
}

fn recover(plan: &ExperimentPlan) -> Result<Artifacts, CliError> {
    let phi = plan.profile.build()?;
    let target = plan.function.build()?;
    let (base, base_delta, est) = base_candidate(plan, &phi)?;
    let p = phi.p();
    let mut rows = Vec::new();
    let mut files = vec![("recover_base.plfn".to_string(), to_text(&base))];
    let mut entries = Vec::new();
    let mut text = format!("base candidate at delta {base_delta}\n");
    for (i, &d) in plan.ladder.iter().enumerate() {
        let v = recover_piecewise_linear(&target, d, &base, base_delta, &phi, &plan.quad)?;
        let e = lambda_delta(&v, v.domain(), d, &phi, &plan.quad)?;
        let dist = lp_distance(&v, &target, p, target.domain());
        let file = format!("recover_{i}.plfn");
        rows.push(vec![num(d), num(base_delta), num(e.value), num(dist), v.num_segments().to_string(), file.clone()]);
        let _ = writeln!(text, "delta {d}: energy {} at L^p distance {dist}", num(e.value));
        entries.push(json!({ "delta": d, "energy": num(e.value), "lp_distance": dist, "segments": v.num_segments() }));
        files.push((file, to_text(&v)));
    }
    Ok(Artifacts {
        columns: vec!["delta", "base_delta", "energy", "lp_distance", "segments", "function_file"],
        rows,
        summary: json!({ "base_delta": base_delta, "base_estimate": est, "recoveries": entries }),
        text,
        functions: files,
        failure: None,
    })
}

fn invariants(plan: &ExperimentPlan) -> Result<Artifacts, CliError> {
    let phi = plan.profile.build()?;
    let corpus = random_corpus::<f64>(plan.seed, plan.invariants_count);
    let rep = run_invariants(&corpus, &[phi], &plan.ladder, &plan.quad, &plan.invariants_threads, plan.seed)?;
    let count_failures = |tag: &str| rep.failures.iter().filter(|f| f.contains(tag)).count();
    let sym = count_failures("changed the energy");
    let mono = count_failures("exceeds the energy");
    let det = count_failures("thread count");
    let rows = vec![
        vec!["symmetry".into(), rep.symmetry_checks.to_string(), sym.to_string(), num(rep.max_symmetry_deviation)],
        vec!["monotonicity".into(), rep.monotonicity_checks.to_string(), mono.to_string(), String::new()],
        vec!["determinism".into(), rep.determinism_checks.to_string(), det.to_string(), String::new()],
    ];
    let mut text = format!("{} cases, {} failures\n", rep.cases, rep.failures.len());
    for f in &rep.failures {
        let _ = writeln!(text, "{f}");
    }
    let failure = (!rep.passed()).then(|| CliError::Invariant(format!("{} failed checks", rep.failures.len())));
    Ok(Artifacts {
        columns: vec!["check", "count", "failures", "max_deviation"],
        rows,
        summary: json!({ "report": rep, "passed": rep.passed() }),
        text,
        functions: vec![],
        failure,
    })
}

/// The effective configuration minus the output directory, which would make
/// artifacts of identical plans differ by location.
fn artifact_config(plan: &ExperimentPlan) -> impl Iterator<Item = (&String, &String)> {
    plan.effective.iter().filter(|(k, _)| k.as_str() != "output.dir")
}

fn csv_text(plan: &ExperimentPlan, a: &Artifacts) -> String {
    let mut s = format!("# gamma-lab {VERSION} {CSV_VERSION}\n# command={}\n", plan.command.name());
    for (k, v) in artifact_config(plan) {
        let _ = writeln!(s, "# {k}={v}");
    }
    s.push_str(&a.columns.join(","));
    s.push('\n');
    for r in &a.rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Writes `results.csv`, `summary.json`, `summary.txt` and the function files.
pub fn write_artifacts(plan: &ExperimentPlan, a: &Artifacts) -> Result<(), CliError> {
    let dir = &plan.out_dir;
    write(&dir.join("results.csv"), &csv_text(plan, a))?;
    let summary = json!({
        "version": VERSION,
        "csv_schema": CSV_VERSION,
        "command": plan.command.name(),
        "config": artifact_config(plan).collect::<std::collections::BTreeMap<_, _>>(),
        "result": a.summary,
        "passed": a.failure.is_none(),
    });
    let json = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Io(e.to_string()))?;
    write(&dir.join("summary.json"), &(json + "\n"))?;
    let mut text = format!("gamma-lab {VERSION}: {}\n", plan.command.name());
    text.push_str(&a.text);
    write(&dir.join("summary.txt"), &text)?;
    for (name, body) in &a.functions {
        let header = format!("# gamma-lab {VERSION} command={} seed={}\n", plan.command.name(), plan.seed);
        write(&dir.join(name), &(header + body))?;
    }
    Ok(())
}
