//! Experiment plans: flat `key = value` configuration with section prefixes,
//! merged with command-line flags. Unknown keys are errors.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use gamma_lab::evaluator::FarFieldPolicy;
use gamma_lab::gamma::{geometric_ladder, log_ladder, validate_ladder};
use gamma_lab::gridfn::{make_affine, make_heaviside, parse_text};
use gamma_lab::profile::{PhiProfile, ProfileKind, Table};
use gamma_lab::{Interval, OptimizerConfig, PlFn, Profile, QuadConfig};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    CheckProfile,
    Eval,
    Scan,
    Kappa,
    Gamma1d,
    Recover,
    Invariants,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::CheckProfile => "check-profile",
            Command::Eval => "eval",
            Command::Scan => "scan",
            Command::Kappa => "kappa",
            Command::Gamma1d => "gamma1d",
            Command::Recover => "recover",
            Command::Invariants => "invariants",
        }
    }

    fn default_ladder(self) -> &'static str {
        match self {
            Command::Kappa | Command::Gamma1d | Command::Recover => "0.004,0.002,0.001",
            Command::Eval | Command::CheckProfile | Command::Invariants => "0.1",
            Command::Scan => "0.1,0.01,0.001",
        }
    }
}

const KEYS: &[&str] = &[
    "command",
    "profile.kind",
    "profile.p",
    "profile.scale",
    "profile.table",
    "function",
    "delta",
    "ladder.values",
    "ladder.geometric",
    "ladder.log",
    "quad.rel_tol",
    "quad.abs_tol",
    "quad.gauss_order",
    "quad.max_depth",
    "quad.max_cells",
    "quad.band_refinement",
    "quad.probe_levels",
    "quad.far_field",
    "quad.allow_unnormalized",
    "opt.nodes",
    "opt.restarts",
    "opt.anneal_moves",
    "opt.moves_per_temperature",
    "opt.t0",
    "opt.cooling",
    "opt.target_acceptance",
    "opt.polish_passes",
    "opt.polish_budget",
    "opt.epsilon_scale",
    "opt.epsilon_exponent",
    "seed",
    "output.dir",
    "recover.base_delta",
    "recover.base_file",
    "invariants.count",
    "invariants.threads",
];

const LADDER_KEYS: &[&str] = &["delta", "ladder.values", "ladder.geometric", "ladder.log"];

pub fn is_ladder_key(k: &str) -> bool {
    LADDER_KEYS.contains(&k)
}

/// Parses `key = value` lines. `[section]` headers prefix the keys that follow;
/// `#` starts a comment.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    let mut section = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |m: String| CliError::Config(format!("line {}: {m}", i + 1));
        if let Some(name) = line.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or_else(|| bad(format!("unterminated section `{line}`")))?;
            section = name.trim().to_string();
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| bad(format!("expected key = value, got `{line}`")))?;
        let key = if section.is_empty() { k.trim().to_string() } else { format!("{section}.{}", k.trim()) };
        if !KEYS.contains(&key.as_str()) {
            return Err(bad(format!("unknown key `{key}`")));
        }
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(bad(format!("duplicate key `{key}`")));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub enum FunctionSpec {
    Identity,
    Step(f64),
    Tent,
    Constant(f64),
    Affine { slope: f64, intercept: f64 },
    File(PathBuf),
}

impl FunctionSpec {
    /// `U`, `H[:c]`, `tent`, `const:c`, `affine:slope:intercept`, or a path.
    pub fn parse(s: &str) -> Result<Self, CliError> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |t: &str| t.parse::<f64>().map_err(|_| CliError::Config(format!("bad number `{t}` in function `{s}`")));
        Ok(match parts.as_slice() {
            ["U"] | ["identity"] => FunctionSpec::Identity,
            ["H"] | ["step"] => FunctionSpec::Step(0.5),
            ["H", c] | ["step", c] => FunctionSpec::Step(num(c)?),
            ["tent"] => FunctionSpec::Tent,
            ["const", c] => FunctionSpec::Constant(num(c)?),
            ["affine", a, b] => FunctionSpec::Affine { slope: num(a)?, intercept: num(b)? },
            _ if Path::new(s).exists() || s.contains('/') || s.contains('.') => FunctionSpec::File(PathBuf::from(s)),
            _ => return Err(CliError::Config(format!("unknown function `{s}`"))),
        })
    }

    pub fn build(&self) -> Result<PlFn, CliError> {
        Ok(match self {
            FunctionSpec::Identity => make_affine(Interval::unit(), 1.0, 0.0),
            FunctionSpec::Step(c) => make_heaviside(Interval::unit(), *c)?,
            FunctionSpec::Tent => PlFn::continuous(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 0.0])?,
            FunctionSpec::Constant(c) => make_affine(Interval::unit(), 0.0, *c),
            FunctionSpec::Affine { slope, intercept } => make_affine(Interval::unit(), *slope, *intercept),
            FunctionSpec::File(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
                parse_text(&text)?
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSpec {
    pub kind: ProfileKind,
    pub p: f64,
    /// `None` normalizes automatically.
    pub scale: Option<f64>,
    pub table: Option<PathBuf>,
}

impl ProfileSpec {
    pub fn build(&self) -> Result<Profile, CliError> {
        let base = match (self.kind, &self.table) {
            (ProfileKind::Tabulated, Some(path)) => {
                let t = Table::from_file(path)?;
                PhiProfile::tabulated(t, self.p)?
            }
            (ProfileKind::Tabulated, None) => {
                return Err(CliError::Config("profile.kind = table needs profile.table".into()));
            }
            (k, _) => match self.scale {
                Some(s) => return Ok(PhiProfile::builtin(k, self.p, s)?),
                None => match k {
                    ProfileKind::IndicatorStep => PhiProfile::indicator_step(self.p)?,
                    ProfileKind::SaturatingPower => PhiProfile::saturating_power(self.p)?,
                    _ => PhiProfile::compact_bump(self.p)?,
                },
            },
        };
        Ok(match self.scale {
            Some(s) if self.kind == ProfileKind::Tabulated => base.with_scale(s)?,
            None if self.kind == ProfileKind::Tabulated => base.normalize()?,
            _ => base,
        })
    }
}

fn parse_kind(s: &str) -> Result<ProfileKind, CliError> {
    Ok(match s {
        "indicator" => ProfileKind::IndicatorStep,
        "saturating" => ProfileKind::SaturatingPower,
        "compact" => ProfileKind::CompactBump,
        "table" => ProfileKind::Tabulated,
        _ => return Err(CliError::Config(format!("unknown profile kind `{s}`"))),
    })
}

#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub command: Command,
    pub profile: ProfileSpec,
    pub function: FunctionSpec,
    pub ladder: Vec<f64>,
    pub quad: QuadConfig,
    pub opt: OptimizerConfig,
    pub nodes: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub recover_base_delta: Option<f64>,
    pub recover_base_file: Option<PathBuf>,
    pub invariants_count: usize,
    pub invariants_threads: Vec<usize>,
    /// Every key with its resolved value, in key order.
    pub effective: BTreeMap<String, String>,
}

fn list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>, CliError> {
    v.split(',')
        .map(|t| t.trim().parse::<T>().map_err(|_| CliError::Config(format!("{key}: bad entry `{t}`"))))
        .collect()
}

fn one<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.parse::<T>().map_err(|_| CliError::Config(format!("{key}: cannot parse `{v}`")))
}

impl ExperimentPlan {
    /// Resolves defaults over `settings`, which holds config-file keys already
    /// overridden by flags.
    pub fn resolve(command: Command, mut settings: BTreeMap<String, String>) -> Result<Self, CliError> {
        if let Some(c) = settings.get("command") {
            if c != command.name() {
                return Err(CliError::Config(format!("config names command `{c}` but `{}` was requested", command.name())));
            }
        }
        let ladders: Vec<&&str> = LADDER_KEYS.iter().filter(|k| settings.contains_key(**k)).collect();
        if ladders.len() > 1 {
            return Err(CliError::Config(format!(
                "conflicting ladder specifications: {}",
                ladders.iter().map(|k| **k).collect::<Vec<_>>().join(", ")
            )));
        }
        if ladders.is_empty() {
            settings.insert("ladder.values".into(), command.default_ladder().into());
        }
        let qd = QuadConfig::default();
        let od = OptimizerConfig::default();
        let defaults: [(&str, String); 30] = [
            ("command", command.name().into()),
            ("profile.kind", "indicator".into()),
            ("profile.p", "1".into()),
            ("profile.scale", "auto".into()),
            ("profile.table", "".into()),
            ("function", "U".into()),
            ("quad.rel_tol", qd.rel_tol.to_string()),
            ("quad.abs_tol", qd.abs_tol.to_string()),
            ("quad.gauss_order", qd.gauss_order.to_string()),
            ("quad.max_depth", qd.max_subdivision_depth.to_string()),
            ("quad.max_cells", qd.max_cells.to_string()),
            ("quad.band_refinement", qd.diagonal_band_refinement.to_string()),
            ("quad.probe_levels", qd.divergence_probe_levels.to_string()),
            ("quad.far_field", "analytic".into()),
            ("quad.allow_unnormalized", "false".into()),
            ("opt.nodes", "16".into()),
            ("opt.restarts", od.restarts.to_string()),
            ("opt.anneal_moves", od.anneal_moves.to_string()),
            ("opt.moves_per_temperature", od.moves_per_temperature.to_string()),
            ("opt.t0", od.t0.to_string()),
            ("opt.cooling", od.cooling.to_string()),
            ("opt.target_acceptance", od.target_acceptance.to_string()),
            ("opt.polish_passes", od.polish_passes.to_string()),
            ("opt.polish_budget", od.polish_budget.to_string()),
            ("opt.epsilon_scale", od.epsilon_scale.to_string()),
            ("opt.epsilon_exponent", od.epsilon_exponent.to_string()),
            ("seed", "0".into()),
            ("output.dir", "out".into()),
            ("invariants.count", "100".into()),
            ("invariants.threads", "1,4".into()),
        ];
        for (k, v) in defaults {
            settings.entry(k.to_string()).or_insert(v);
        }
        let s = &settings;
        let get = |k: &str| s.get(k).map(String::as_str).unwrap_or("");

        let kind = parse_kind(get("profile.kind"))?;
        let scale = match get("profile.scale") {
            "auto" => None,
            v => Some(one::<f64>("profile.scale", v)?),
        };
        let table = Some(get("profile.table")).filter(|t| !t.is_empty()).map(PathBuf::from);
        let profile = ProfileSpec { kind, p: one("profile.p", get("profile.p"))?, scale, table };

        let ladder = if let Some(v) = s.get("delta") {
            vec![one::<f64>("delta", v)?]
        } else if let Some(v) = s.get("ladder.values") {
            list::<f64>("ladder.values", v)?
        } else if let Some(v) = s.get("ladder.geometric") {
            let g = list::<f64>("ladder.geometric", v)?;
            if g.len() != 3 {
                return Err(CliError::Config("ladder.geometric = start,factor,count".into()));
            }
            geometric_ladder(g[0], g[1], g[2] as usize)?
        } else {
            let g = list::<f64>("ladder.log", get("ladder.log"))?;
            if g.len() != 2 {
                return Err(CliError::Config("ladder.log = start,count".into()));
            }
            log_ladder(g[0], g[1] as usize)?
        };
        validate_ladder(&ladder)?;

        let quad = QuadConfig {
            gauss_order: one("quad.gauss_order", get("quad.gauss_order"))?,
            max_subdivision_depth: one("quad.max_depth", get("quad.max_depth"))?,
            max_cells: one("quad.max_cells", get("quad.max_cells"))?,
            rel_tol: one("quad.rel_tol", get("quad.rel_tol"))?,
            abs_tol: one("quad.abs_tol", get("quad.abs_tol"))?,
            diagonal_band_refinement: one("quad.band_refinement", get("quad.band_refinement"))?,
            divergence_probe_levels: one("quad.probe_levels", get("quad.probe_levels"))?,
            far_field_cutoff_policy: match get("quad.far_field") {
                "analytic" => FarFieldPolicy::AnalyticTail,
                "cutoff" => FarFieldPolicy::HardCutoff,
                v => return Err(CliError::Config(format!("quad.far_field: expected analytic or cutoff, got `{v}`"))),
            },
            allow_unnormalized: one("quad.allow_unnormalized", get("quad.allow_unnormalized"))?,
        };
        quad.validate()?;
        let seed: u64 = one("seed", get("seed"))?;
        let opt = OptimizerConfig {
            restarts: one("opt.restarts", get("opt.restarts"))?,
            anneal_moves: one("opt.anneal_moves", get("opt.anneal_moves"))?,
            moves_per_temperature: one("opt.moves_per_temperature", get("opt.moves_per_temperature"))?,
            t0: one("opt.t0", get("opt.t0"))?,
            cooling: one("opt.cooling", get("opt.cooling"))?,
            target_acceptance: one("opt.target_acceptance", get("opt.target_acceptance"))?,
            polish_passes: one("opt.polish_passes", get("opt.polish_passes"))?,
            polish_budget: one("opt.polish_budget", get("opt.polish_budget"))?,
            epsilon_scale: one("opt.epsilon_scale", get("opt.epsilon_scale"))?,
            epsilon_exponent: one("opt.epsilon_exponent", get("opt.epsilon_exponent"))?,
            seed,
            quad,
        };
        opt.validate()?;
        let threads = list::<usize>("invariants.threads", get("invariants.threads"))?;
        if threads.iter().any(|t| *t == 0) {
            return Err(CliError::Config("invariants.threads entries must be positive".into()));
        }
        Ok(Self {
            command,
            function: FunctionSpec::parse(get("function"))?,
            profile,
            ladder,
            quad,
            opt,
            nodes: one("opt.nodes", get("opt.nodes"))?,
            seed,
            out_dir: PathBuf::from(get("output.dir")),
            recover_base_delta: s.get("recover.base_delta").map(|v| one("recover.base_delta", v)).transpose()?,
            recover_base_file: s.get("recover.base_file").map(PathBuf::from),
            invariants_count: one("invariants.count", get("invariants.count"))?,
            invariants_threads: threads,
            effective: settings,
        })
    }

    /// The effective configuration as `key = value` lines.
    pub fn config_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.effective {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}
