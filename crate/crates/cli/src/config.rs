//! Experiment descriptions in a flat `section.key = value` text format.
//!
//! ```text
//! # reference network
//! network.n = 16
//! network.k = 8
//! network.l = 6
//! network.r1 = 1.0            # scalar broadcasts to every user
//! network.r2 = [0.6, 0.6, 0.6, 0.6, 0.6, 0.6]
//! network.sigma2 = 1.0
//! constraint.kind = per_pu     # or `sum`
//! constraint.p_db = 0.0        # interference threshold per primary user
//! sweep.snr_db = [0, 10, 20]
//! sweep.alpha = [0.01, 0.1]    # optional
//! sweep.beta = [0, 0.5, 1]     # optional
//! run.mode = mc_sweep          # de_sweep | mc_sweep | optimize | validate
//! run.objective = de           # optimize only: de | mc
//! run.trials = 10000
//! run.seed = 1
//! run.nu = de                  # de | mc | per_realization
//! run.nu_batch = 500
//! run.beta_step = 0.01
//! run.output = out.csv
//! ```
//!
//! `#` starts a comment anywhere outside a value that is a plain word or
//! number; lists are comma-separated inside brackets.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use pprzf::montecarlo::{NuMode, DEFAULT_NU_BATCH, DEFAULT_TRIALS};
use pprzf::{ConstraintCase, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    DeSweep,
    McSweep,
    Optimize,
    Validate,
}

impl Mode {
    fn name(self) -> &'static str {
        match self {
            Mode::DeSweep => "de_sweep",
            Mode::McSweep => "mc_sweep",
            Mode::Optimize => "optimize",
            Mode::Validate => "validate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Objective {
    De,
    Mc,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub scenario: Scenario,
    pub snr_grid_db: Vec<f64>,
    pub alpha_grid: Option<Vec<f64>>,
    pub beta_grid: Option<Vec<f64>>,
    pub trials: usize,
    pub seed: u64,
    pub mode: Mode,
    pub objective: Objective,
    pub nu: NuMode,
    pub beta_step: f64,
    pub output_path: String,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            scenario: Scenario::uniform(16, 8, 6, 1.0, 0.6, 0.0),
            snr_grid_db: (0..=8).map(|i| -10.0 + 5.0 * i as f64).collect(),
            alpha_grid: None,
            beta_grid: None,
            trials: DEFAULT_TRIALS,
            seed: 1,
            mode: Mode::McSweep,
            objective: Objective::De,
            nu: NuMode::De,
            beta_step: 0.01,
            output_path: "pprzf.csv".into(),
        }
    }
}

/// A configuration problem, naming the offending key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn err(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        field: field.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Value {
    List(Vec<String>),
    Word(String),
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn parse_value(raw: &str) -> Value {
    let raw = raw.trim();
    if let Some(inner) = raw.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
        let items = inner
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
        Value::List(items)
    } else {
        Value::Word(raw.trim_matches('"').to_string())
    }
}

struct Entries {
    map: BTreeMap<String, Value>,
}

impl Entries {
    fn take(&mut self, key: &str) -> Option<Value> {
        self.map.remove(key)
    }

    fn word(&mut self, key: &str) -> Result<Option<String>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::Word(w)) => Ok(Some(w)),
            Some(Value::List(_)) => Err(err(key, "expected a single value, found a list")),
        }
    }

    fn number<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>, ConfigError> {
        self.word(key)?
            .map(|w| {
                w.parse::<T>()
                    .map_err(|_| err(key, format!("cannot parse `{w}` as a number")))
            })
            .transpose()
    }

    fn reals(&mut self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        let items = match self.take(key) {
            None => return Ok(None),
            Some(Value::Word(w)) => vec![w],
            Some(Value::List(items)) => items,
        };
        items
            .iter()
            .map(|s| {
                let v: f64 = s
                    .parse()
                    .map_err(|_| err(key, format!("cannot parse `{s}` as a number")))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(err(key, "values must be finite"))
                }
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }
}

/// Per-user gains: a single value broadcasts, a list must have `count`
/// entries.
fn gains(
    values: Option<Vec<f64>>,
    count: usize,
    key: &str,
    default: f64,
) -> Result<Vec<f64>, ConfigError> {
    match values {
        None => Ok(vec![default; count]),
        Some(v) if v.len() == 1 => Ok(vec![v[0]; count]),
        Some(v) if v.len() == count => Ok(v),
        Some(v) => Err(err(
            key,
            format!("has {} entries, expected 1 or {count}", v.len()),
        )),
    }
}

pub fn parse(text: &str) -> Result<ExperimentSpec, ConfigError> {
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = strip_comment(line).trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(&format!("line {}", lineno + 1), "expected `key = value`"))?;
        let key = key.trim().to_string();
        if map.insert(key.clone(), parse_value(value)).is_some() {
            return Err(err(&key, "given more than once"));
        }
    }
    let mut e = Entries { map };
    let d = ExperimentSpec::default();

    let n = e
        .number::<usize>("network.n")?
        .unwrap_or(d.scenario.n_antennas);
    let k = e.number::<usize>("network.k")?.unwrap_or(d.scenario.n_sus);
    let l = e.number::<usize>("network.l")?.unwrap_or(d.scenario.n_pus);
    let r1 = e.reals("network.r1")?;
    let r2 = e.reals("network.r2")?;
    let scenario = Scenario {
        n_antennas: n,
        n_sus: k,
        n_pus: l,
        r1: gains(r1, k, "network.r1", 1.0)?,
        r2: gains(r2, l, "network.r2", 0.6)?,
        sigma2: e.number("network.sigma2")?.unwrap_or(1.0),
        p_db: e.number("constraint.p_db")?.unwrap_or(0.0),
        case: match e.word("constraint.kind")?.as_deref() {
            None | Some("per_pu") => ConstraintCase::PerPu,
            Some("sum") => ConstraintCase::Sum,
            Some(other) => {
                return Err(err(
                    "constraint.kind",
                    format!("unknown kind `{other}` (per_pu | sum)"),
                ))
            }
        },
    };
    let mode = match e.word("run.mode")?.as_deref() {
        None => d.mode,
        Some("de_sweep") => Mode::DeSweep,
        Some("mc_sweep") => Mode::McSweep,
        Some("optimize") => Mode::Optimize,
        Some("validate") => Mode::Validate,
        Some(other) => return Err(err("run.mode", format!("unknown mode `{other}`"))),
    };
    let objective = match e.word("run.objective")?.as_deref() {
        None | Some("de") => Objective::De,
        Some("mc") => Objective::Mc,
        Some(other) => {
            return Err(err(
                "run.objective",
                format!("unknown objective `{other}` (de | mc)"),
            ))
        }
    };
    let batch = e.number::<usize>("run.nu_batch")?;
    let nu = match e.word("run.nu")?.as_deref() {
        None | Some("de") => NuMode::De,
        Some("mc") => NuMode::Mc {
            batch: batch.unwrap_or(DEFAULT_NU_BATCH),
        },
        Some("per_realization") => NuMode::PerRealization,
        Some(other) => {
            return Err(err(
                "run.nu",
                format!("unknown mode `{other}` (de | mc | per_realization)"),
            ))
        }
    };
    let spec = ExperimentSpec {
        scenario,
        snr_grid_db: e.reals("sweep.snr_db")?.unwrap_or(d.snr_grid_db),
        alpha_grid: e.reals("sweep.alpha")?,
        beta_grid: e.reals("sweep.beta")?,
        trials: e.number("run.trials")?.unwrap_or(d.trials),
        seed: e.number("run.seed")?.unwrap_or(d.seed),
        mode,
        objective,
        nu,
        beta_step: e.number("run.beta_step")?.unwrap_or(d.beta_step),
        output_path: e.word("run.output")?.unwrap_or(d.output_path),
    };
    if let Some(key) = e.map.keys().next() {
        return Err(err(key, "unknown key"));
    }
    validate(&spec)?;
    Ok(spec)
}

pub fn validate(spec: &ExperimentSpec) -> Result<(), ConfigError> {
    let s = &spec.scenario;
    if s.n_antennas == 0 || s.n_sus == 0 || s.n_pus == 0 {
        return Err(err("network", "n, k and l must be positive"));
    }
    if s.n_pus > s.n_antennas {
        return Err(err(
            "network.l",
            format!("must not exceed network.n = {}", s.n_antennas),
        ));
    }
    if s.r1.len() != s.n_sus || s.r1.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
        return Err(err(
            "network.r1",
            "needs one positive gain per secondary user",
        ));
    }
    if s.r2.len() != s.n_pus || s.r2.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
        return Err(err(
            "network.r2",
            "needs one positive gain per primary user",
        ));
    }
    if !(s.sigma2 > 0.0 && s.sigma2.is_finite()) {
        return Err(err("network.sigma2", "must be positive"));
    }
    if !s.p_db.is_finite() {
        return Err(err("constraint.p_db", "must be finite"));
    }
    if spec.mode != Mode::Validate && spec.snr_grid_db.is_empty() {
        return Err(err("sweep.snr_db", "must not be empty"));
    }
    if let Some(a) = &spec.alpha_grid {
        if a.is_empty() {
            return Err(err("sweep.alpha", "must not be empty when given"));
        }
        if a.iter().any(|&x| x <= 0.0) {
            return Err(err("sweep.alpha", "values must be positive"));
        }
        if spec.beta_grid.is_none() && spec.mode != Mode::Optimize {
            return Err(err("sweep.beta", "required when sweep.alpha is given"));
        }
    }
    if let Some(b) = &spec.beta_grid {
        if b.is_empty() {
            return Err(err("sweep.beta", "must not be empty when given"));
        }
        if b.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
            return Err(err("sweep.beta", "values must lie in [0, 1]"));
        }
    }
    let needs_mc = matches!(spec.mode, Mode::McSweep)
        || (spec.mode == Mode::Optimize && spec.objective == Objective::Mc);
    if needs_mc && spec.trials < 2 {
        return Err(err(
            "run.trials",
            "Monte-Carlo modes need at least 2 trials",
        ));
    }
    if let NuMode::Mc { batch } = spec.nu {
        if batch < 2 {
            return Err(err("run.nu_batch", "needs at least 2 draws"));
        }
    }
    if !(spec.beta_step > 0.0 && spec.beta_step <= 1.0) {
        return Err(err("run.beta_step", "must lie in (0, 1]"));
    }
    if spec.output_path.is_empty() {
        return Err(err("run.output", "must not be empty"));
    }
    Ok(())
}

fn list(values: &[f64]) -> String {
    let items: Vec<String> = values.iter().map(|v| format!("{v:?}")).collect();
    format!("[{}]", items.join(", "))
}

/// Writes `spec` in the format accepted by [`parse`]; `parse(serialize(s)) == s`.
pub fn serialize(spec: &ExperimentSpec) -> String {
    let s = &spec.scenario;
    let mut out = String::new();
    let _ = writeln!(out, "network.n = {}", s.n_antennas);
    let _ = writeln!(out, "network.k = {}", s.n_sus);
    let _ = writeln!(out, "network.l = {}", s.n_pus);
    let _ = writeln!(out, "network.r1 = {}", list(&s.r1));
    let _ = writeln!(out, "network.r2 = {}", list(&s.r2));
    let _ = writeln!(out, "network.sigma2 = {:?}", s.sigma2);
    let kind = match s.case {
        ConstraintCase::PerPu => "per_pu",
        ConstraintCase::Sum => "sum",
    };
    let _ = writeln!(out, "constraint.kind = {kind}");
    let _ = writeln!(out, "constraint.p_db = {:?}", s.p_db);
    let _ = writeln!(out, "sweep.snr_db = {}", list(&spec.snr_grid_db));
    if let Some(a) = &spec.alpha_grid {
        let _ = writeln!(out, "sweep.alpha = {}", list(a));
    }
    if let Some(b) = &spec.beta_grid {
        let _ = writeln!(out, "sweep.beta = {}", list(b));
    }
    let _ = writeln!(out, "run.mode = {}", spec.mode.name());
    let objective = match spec.objective {
        Objective::De => "de",
        Objective::Mc => "mc",
    };
    let _ = writeln!(out, "run.objective = {objective}");
    let _ = writeln!(out, "run.trials = {}", spec.trials);
    let _ = writeln!(out, "run.seed = {}", spec.seed);
    match spec.nu {
        NuMode::De => {
            let _ = writeln!(out, "run.nu = de");
        }
        NuMode::Mc { batch } => {
            let _ = writeln!(out, "run.nu = mc");
            let _ = writeln!(out, "run.nu_batch = {batch}");
        }
        NuMode::PerRealization => {
            let _ = writeln!(out, "run.nu = per_realization");
        }
    }
    let _ = writeln!(out, "run.beta_step = {:?}", spec.beta_step);
    let _ = writeln!(out, "run.output = {}", spec.output_path);
    out
}
