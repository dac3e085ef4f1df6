//! Experiment runner behind the `gamma-lab` binary: configuration parsing,
//! command execution and deterministic artifacts.

pub mod error;
pub mod plan;
pub mod run;

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Parser;

pub use error::CliError;
pub use plan::{parse_config, Command, ExperimentPlan};

#[derive(Debug, Parser)]
#[command(name = "gamma-lab", version, about = "Non-local energy experiments in one dimension")]
pub struct Args {
    #[arg(value_enum)]
    pub command: Command,
    /// indicator, saturating, compact or table
    #[arg(long)]
    pub profile: Option<String>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Comma list, `geom:start:factor:count` or `log:start:count`
    #[arg(long)]
    pub ladder: Option<String>,
    /// U, H[:c], tent, const:c, affine:slope:intercept, or a function file
    #[arg(long = "fn")]
    pub function: Option<String>,
    #[arg(long)]
    pub nodes: Option<usize>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Any configuration key, as key=value; repeatable
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

fn ladder_setting(s: &str) -> Result<(&'static str, String), CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    Ok(match parts.as_slice() {
        ["geom", a, f, n] => ("ladder.geometric", format!("{a},{f},{n}")),
        ["log", a, n] => ("ladder.log", format!("{a},{n}")),
        [list] => ("ladder.values", list.to_string()),
        _ => return Err(CliError::Config(format!("cannot parse ladder `{s}`"))),
    })
}

/// Config file keys overridden by `--set` and then by the dedicated flags.
pub fn settings_from_args(args: &Args) -> Result<BTreeMap<String, String>, CliError> {
    let mut m = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            parse_config(&text)?
        }
        None => BTreeMap::new(),
    };
    let sets: String = args.set.iter().map(|s| format!("{s}\n")).collect();
    let over = parse_config(&sets)?;
    let put = |m: &mut BTreeMap<String, String>, k: &str, v: String| {
        // a ladder flag replaces any ladder from the config file
        if plan::is_ladder_key(k) {
            m.retain(|key, _| !plan::is_ladder_key(key));
        }
        m.insert(k.to_string(), v);
    };
    for (k, v) in over {
        put(&mut m, &k, v);
    }
    if args.delta.is_some() && args.ladder.is_some() {
        return Err(CliError::Config("conflicting ladder specifications: --delta and --ladder".into()));
    }
    if let Some(v) = &args.profile {
        put(&mut m, "profile.kind", v.clone());
    }
    if let Some(v) = args.p {
        put(&mut m, "profile.p", v.to_string());
    }
    if let Some(v) = args.delta {
        put(&mut m, "delta", v.to_string());
    }
    if let Some(v) = &args.ladder {
        let (k, v) = ladder_setting(v)?;
        put(&mut m, k, v);
    }
    if let Some(v) = &args.function {
        put(&mut m, "function", v.clone());
    }
    if let Some(v) = args.nodes {
        put(&mut m, "opt.nodes", v.to_string());
    }
    if let Some(v) = args.restarts {
        put(&mut m, "opt.restarts", v.to_string());
    }
    if let Some(v) = args.seed {
        put(&mut m, "seed", v.to_string());
    }
    if let Some(v) = &args.out {
        put(&mut m, "output.dir", v.display().to_string());
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(v: &[&str]) -> Args {
        Args::parse_from(std::iter::once("gamma-lab").chain(v.iter().copied()))
    }

    #[test]
    fn minimal_eval_flags() {
        let a = args(&["eval", "--profile", "indicator", "--p", "1", "--delta", "0.1", "--fn", "U"]);
        let plan = ExperimentPlan::resolve(a.command, settings_from_args(&a).unwrap()).unwrap();
        assert_eq!(plan.ladder, vec![0.1]);
        assert_eq!(plan.seed, 0);
        assert_eq!(plan.effective["quad.rel_tol"], "0.000000001");
    }

    #[test]
    fn ladder_flags() {
        let a = args(&["scan", "--ladder", "geom:0.1:0.5:3"]);
        let plan = ExperimentPlan::resolve(a.command, settings_from_args(&a).unwrap()).unwrap();
        assert_eq!(plan.ladder, vec![0.1, 0.05, 0.025]);
        let a = args(&["scan", "--ladder", "0.1", "--delta", "0.1"]);
        assert!(settings_from_args(&a).is_err());
        let a = args(&["scan", "--set", "opt.bogus=1"]);
        assert_eq!(settings_from_args(&a).unwrap_err().exit_code(), 2);
    }
}
