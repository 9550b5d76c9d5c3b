//! Flat `key=value` run configuration.
//!
//! One pair per line, `#` starts a comment, keys match the CLI flag names
//! (`-` and `_` are interchangeable). Scenario defaults are applied first,
//! then every explicit pair in order, so later pairs (CLI flags) win.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::basis::BasisKind;
use crate::error::{Error, Result};
use crate::scenarios::{InitialCondition, SWITCH_OFFSET, SWITCH_PERIOD};
use crate::velocity::{Constraint, VelocityCoefficients};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioName {
    Fixed,
    Switching,
    Custom,
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScenarioName::Fixed => "fixed",
            ScenarioName::Switching => "switching",
            ScenarioName::Custom => "custom",
        })
    }
}

impl FromStr for ScenarioName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fixed" | "fixed_flow" => Ok(ScenarioName::Fixed),
            "switching" | "switching_flow" => Ok(ScenarioName::Switching),
            "custom" => Ok(ScenarioName::Custom),
            other => Err(Error::InvalidInput(format!("unknown scenario '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlKind {
    Prescribed,
    Greedy,
    Horizon,
}

impl fmt::Display for ControlKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ControlKind::Prescribed => "prescribed",
            ControlKind::Greedy => "greedy",
            ControlKind::Horizon => "horizon",
        })
    }
}

impl FromStr for ControlKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "prescribed" => Ok(ControlKind::Prescribed),
            "greedy" => Ok(ControlKind::Greedy),
            "horizon" => Ok(ControlKind::Horizon),
            other => Err(Error::InvalidInput(format!("unknown control '{other}'"))),
        }
    }
}

/// Initial data in text form: `step` or `modes:m,n=v;m,n=v`.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialSpec {
    Step,
    Modes(Vec<((usize, usize), f64)>),
}

impl InitialSpec {
    pub fn to_condition(&self) -> InitialCondition {
        match self {
            InitialSpec::Step => InitialCondition::Step,
            InitialSpec::Modes(list) => InitialCondition::Modes(list.clone()),
        }
    }
}

impl fmt::Display for InitialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialSpec::Step => f.write_str("step"),
            InitialSpec::Modes(list) => {
                f.write_str("modes:")?;
                for (idx, ((m, n), v)) in list.iter().enumerate() {
                    if idx > 0 {
                        f.write_str(";")?;
                    }
                    write!(f, "{m},{n}={v:?}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for InitialSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("step") {
            return Ok(InitialSpec::Step);
        }
        let body = s
            .strip_prefix("modes:")
            .ok_or_else(|| Error::InvalidInput(format!("initial must be 'step' or 'modes:m,n=v;...', got '{s}'")))?;
        let bad = || Error::InvalidInput(format!("malformed mode list '{body}'"));
        let mut list = Vec::new();
        for item in body.split(';').map(str::trim).filter(|t| !t.is_empty()) {
            let (idx, v) = item.split_once('=').ok_or_else(bad)?;
            let (m, n) = idx.split_once(',').ok_or_else(bad)?;
            list.push((
                (m.trim().parse().map_err(|_| bad())?, n.trim().parse().map_err(|_| bad())?),
                v.trim().parse().map_err(|_| bad())?,
            ));
        }
        Ok(InitialSpec::Modes(list))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub scenario: ScenarioName,
    pub basis: BasisKind,
    pub n: usize,
    pub m: usize,
    pub kappa: f64,
    pub t_final: f64,
    pub dt: f64,
    pub initial: InitialSpec,
    pub control: ControlKind,
    pub constraint: Constraint,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub dump_modes: bool,
    /// Prescribed custom velocity, `alpha_kl` in row-major `(k, l)` order.
    pub alpha: Vec<f64>,
    /// Optional matching `beta_kl`; derived from the linkage when empty.
    pub beta: Vec<f64>,
    pub segments: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub trials: usize,
    pub record_every: usize,
    pub resample_every: usize,
    /// Times at which to write `field_<t>.csv`.
    pub field_times: Vec<f64>,
    pub field_grid: usize,
    /// Truncations for the bound growth study.
    pub growth: Vec<usize>,
    pub energy_tol: f64,
}

fn list<T: fmt::Debug>(v: &[T]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",")
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| Error::InvalidInput(format!("{key}: cannot parse '{s}'"))))
        .collect()
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::InvalidInput(format!("{key}: cannot parse '{value}'")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::InvalidInput(format!("{key}: expected a boolean, got '{value}'"))),
    }
}

/// Canonical key spelling: lowercase except `N`/`M`, `_` separators.
pub fn normalize_key(key: &str) -> String {
    let k = key.trim().replace('-', "_");
    match k.as_str() {
        "n" | "N" => "N".into(),
        "m" | "M" => "M".into(),
        _ => k.to_ascii_lowercase(),
    }
}

/// Splits config text into `(line, key, value)` triples.
pub fn parse_pairs(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Config {
            line: idx + 1,
            msg: format!("expected key=value, got '{line}'"),
        })?;
        if k.trim().is_empty() {
            return Err(Error::Config {
                line: idx + 1,
                msg: "empty key".into(),
            });
        }
        out.push((idx + 1, normalize_key(k), v.trim().to_string()));
    }
    Ok(out)
}

impl ScenarioSpec {
    pub fn defaults(scenario: ScenarioName) -> Self {
        let mut spec = Self {
            scenario,
            basis: BasisKind::SineSine,
            n: 8,
            m: 2,
            kappa: 0.01,
            t_final: 1.0,
            dt: 1e-3,
            initial: InitialSpec::Modes(vec![((1, 1), 1.0)]),
            control: ControlKind::Prescribed,
            constraint: Constraint::L2Unit,
            seed: 7,
            output_dir: PathBuf::from("out"),
            dump_modes: false,
            alpha: Vec::new(),
            beta: Vec::new(),
            segments: 1,
            max_iter: 50,
            tol: 1e-9,
            trials: 1000,
            record_every: 1,
            resample_every: 1,
            field_times: Vec::new(),
            field_grid: 65,
            growth: vec![2, 4, 8],
            energy_tol: 1e-4,
        };
        match scenario {
            ScenarioName::Fixed => {}
            ScenarioName::Switching => {
                spec.basis = BasisKind::CosineCosine;
                spec.kappa = 0.001;
                spec.t_final = 5.0;
                spec.dt = 0.00125;
                spec.initial = InitialSpec::Step;
            }
            ScenarioName::Custom => {
                spec.n = 4;
                spec.m = 4;
                spec.initial = InitialSpec::Modes(vec![((1, 1), 1.0), ((2, 1), 0.5)]);
                spec.control = ControlKind::Greedy;
            }
        }
        spec
    }

    /// Defaults for the scenario named in `pairs` (last one wins, `fallback`
    /// if absent), then every pair applied in order, then validation.
    pub fn from_pairs(pairs: &[(usize, String, String)], fallback: ScenarioName) -> Result<Self> {
        let mut scenario = fallback;
        for (line, k, v) in pairs {
            if k == "scenario" {
                scenario = v.parse().map_err(|e: Error| at_line(*line, e))?;
            }
        }
        let mut spec = Self::defaults(scenario);
        for (line, k, v) in pairs {
            spec.set(k, v).map_err(|e| at_line(*line, e))?;
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_text(text: &str, fallback: ScenarioName) -> Result<Self> {
        Self::from_pairs(&parse_pairs(text)?, fallback)
    }

    pub fn from_file(path: &Path, fallback: ScenarioName) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?, fallback)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match normalize_key(key).as_str() {
            "scenario" => self.scenario = value.parse()?,
            "basis" => self.basis = value.parse()?,
            "N" => self.n = parse_value(key, value)?,
            "M" => self.m = parse_value(key, value)?,
            "kappa" => self.kappa = parse_value(key, value)?,
            "t_final" => self.t_final = parse_value(key, value)?,
            "dt" => self.dt = parse_value(key, value)?,
            "initial" => self.initial = value.parse()?,
            "control" => self.control = value.parse()?,
            "constraint" => self.constraint = value.parse()?,
            "seed" => self.seed = parse_value(key, value)?,
            "output_dir" => self.output_dir = PathBuf::from(value.trim()),
            "dump_modes" => self.dump_modes = parse_bool(key, value)?,
            "alpha" => self.alpha = parse_list(key, value)?,
            "beta" => self.beta = parse_list(key, value)?,
            "segments" => self.segments = parse_value(key, value)?,
            "max_iter" => self.max_iter = parse_value(key, value)?,
            "tol" => self.tol = parse_value(key, value)?,
            "trials" => self.trials = parse_value(key, value)?,
            "record_every" => self.record_every = parse_value(key, value)?,
            "resample_every" => self.resample_every = parse_value(key, value)?,
            "field_times" => self.field_times = parse_list(key, value)?,
            "field_grid" => self.field_grid = parse_value(key, value)?,
            "growth" => self.growth = parse_list(key, value)?,
            "energy_tol" => self.energy_tol = parse_value(key, value)?,
            other => return Err(Error::InvalidInput(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if self.n == 0 || self.m == 0 {
            return bad("N and M must be at least 1".into());
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return bad(format!("kappa must be non-negative, got {}", self.kappa));
        }
        if !(self.t_final > 0.0 && self.dt > 0.0) {
            return bad("t_final and dt must be positive".into());
        }
        if self.segments == 0 || self.record_every == 0 || self.resample_every == 0 {
            return bad("segments, record_every and resample_every must be at least 1".into());
        }
        if self.initial == InitialSpec::Step && self.basis != BasisKind::CosineCosine {
            return Err(Error::BasisMismatch(
                "the step initial condition needs the cosine basis".into(),
            ));
        }
        match self.scenario {
            ScenarioName::Fixed | ScenarioName::Switching => {
                let want = if self.scenario == ScenarioName::Fixed {
                    BasisKind::SineSine
                } else {
                    BasisKind::CosineCosine
                };
                if self.basis != want {
                    return Err(Error::BasisMismatch(format!(
                        "the {} scenario uses the {want} basis",
                        self.scenario
                    )));
                }
                if self.control != ControlKind::Prescribed {
                    return bad(format!("the {} scenario has a prescribed velocity", self.scenario));
                }
            }
            ScenarioName::Custom => {
                if self.control == ControlKind::Prescribed && self.alpha.is_empty() {
                    return bad("a prescribed custom flow needs alpha".into());
                }
            }
        }
        if self.scenario == ScenarioName::Switching {
            for boundary in [SWITCH_OFFSET, SWITCH_PERIOD - SWITCH_OFFSET] {
                let ratio = boundary / self.dt;
                if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
                    return bad(format!("dt={} must divide the switching interval {boundary}", self.dt));
                }
            }
        }
        if !self.alpha.is_empty() {
            self.custom_velocity()?;
        }
        Ok(())
    }

    /// The prescribed custom velocity from `alpha` (and `beta` if given).
    pub fn custom_velocity(&self) -> Result<VelocityCoefficients> {
        let len = self.m * self.m;
        if self.alpha.len() != len {
            return Err(Error::DimensionMismatch {
                what: "alpha coefficients (M*M)",
                expected: len,
                got: self.alpha.len(),
            });
        }
        if self.beta.is_empty() {
            VelocityCoefficients::from_alpha(self.m, &self.alpha)
        } else {
            VelocityCoefficients::new(self.m, self.alpha.clone(), self.beta.clone())
        }
    }

    /// Every key in canonical order; `from_text` of the result reproduces
    /// `self` exactly.
    pub fn to_config_string(&self) -> String {
        let rows: [(&str, String); 25] = [
            ("scenario", self.scenario.to_string()),
            ("basis", self.basis.to_string()),
            ("N", self.n.to_string()),
            ("M", self.m.to_string()),
            ("kappa", format!("{:?}", self.kappa)),
            ("t_final", format!("{:?}", self.t_final)),
            ("dt", format!("{:?}", self.dt)),
            ("initial", self.initial.to_string()),
            ("control", self.control.to_string()),
            ("constraint", self.constraint.to_string()),
            ("seed", self.seed.to_string()),
            ("output_dir", self.output_dir.display().to_string()),
            ("dump_modes", self.dump_modes.to_string()),
            ("alpha", list(&self.alpha)),
            ("beta", list(&self.beta)),
            ("segments", self.segments.to_string()),
            ("max_iter", self.max_iter.to_string()),
            ("tol", format!("{:?}", self.tol)),
            ("trials", self.trials.to_string()),
            ("record_every", self.record_every.to_string()),
            ("resample_every", self.resample_every.to_string()),
            ("field_times", list(&self.field_times)),
            ("field_grid", self.field_grid.to_string()),
            ("growth", list(&self.growth)),
            ("energy_tol", format!("{:?}", self.energy_tol)),
        ];
        rows.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}

fn at_line(line: usize, e: Error) -> Error {
    match e {
        Error::Config { .. } => e,
        other => Error::Config {
            line,
            msg: other.to_string(),
        },
    }
}
