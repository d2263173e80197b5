// SPDX-License-Identifier: Apache-2.0

//! Experiment configuration.
//!
//! The config file is plain text, one `key = value` per line. `#` starts a
//! comment. Grid keys take comma-separated lists; every combination of their
//! values is one cell.
//!
//! | key            | kind  | default      |
//! |----------------|-------|--------------|
//! | `n`            | list  | `8000`       |
//! | `d`            | list  | `5`          |
//! | `p`            | list  | `2`          |
//! | `eps`          | list  | `0.5`        |
//! | `delta`        | list  | `1e-5`       |
//! | `estimator`    | list  | `simple`     |
//! | `family`       | list  | `student`    |
//! | `reps`         | int   | `10`         |
//! | `seed`         | u64   | `0`          |
//! | `out`          | path  | `results`    |
//! | `jobs`         | int   | all cores    |
//! | `k`            | int or `auto` | `auto`: min(⌈1600 ln n⌉, ⌊n/2⌋) |
//! | `tc`           | int   | `40`         |
//! | `radius_mult`  | real  | `1`          |
//! | `moment_bound` | real  | `1`          |
//! | `diameter`     | real  | `2`          |
//! | `curvature`    | real  | `1`          |
//!
//! `estimator` is `simple` or `iterative`; `family` is `gaussian`, `student`
//! or `pareto`. Command-line flags override file values.

use crate::error::{io_err, CliError, Result};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    MeanBench,
    OptBench,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::MeanBench => "mean-bench",
            Mode::OptBench => "opt-bench",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    Simple,
    Iterative,
}

impl FromStr for EstimatorKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "simple" => Ok(Self::Simple),
            "iterative" => Ok(Self::Iterative),
            _ => Err("expected `simple` or `iterative`".into()),
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Simple => "simple",
            Self::Iterative => "iterative",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyKind {
    Gaussian,
    Student,
    Pareto,
}

impl FromStr for FamilyKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "student" => Ok(Self::Student),
            "pareto" => Ok(Self::Pareto),
            _ => Err("expected `gaussian`, `student` or `pareto`".into()),
        }
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Gaussian => "gaussian",
            Self::Student => "student",
            Self::Pareto => "pareto",
        })
    }
}

impl FamilyKind {
    pub fn family(self, p: f64) -> heavydp::Family {
        match self {
            Self::Gaussian => heavydp::Family::Gaussian,
            Self::Student => heavydp::Family::student_like(p),
            Self::Pareto => heavydp::Family::pareto_symmetric(p),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub n: Vec<usize>,
    pub d: Vec<usize>,
    pub p: Vec<f64>,
    pub eps: Vec<f64>,
    pub delta: Vec<f64>,
    pub estimator: Vec<EstimatorKind>,
    pub family: Vec<FamilyKind>,
    pub reps: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub jobs: Option<usize>,
    /// Group count; `None` derives it from n.
    pub k: Option<usize>,
    pub tc: usize,
    pub radius_mult: f64,
    pub moment_bound: f64,
    pub diameter: f64,
    pub curvature: f64,
    /// Write measured wall time; when false the column is 0 so that output
    /// files are byte-identical across runs.
    pub record_wall_time: bool,
}

fn parse_one<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value.trim().parse::<T>().map_err(|e| CliError::InvalidValue {
        key: key.into(),
        value: value.into(),
        msg: e.to_string(),
    })
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_one(key, s))
        .collect()
}

impl ExperimentConfig {
    pub fn new(mode: Mode) -> Self {
        Self {
            mode,
            n: vec![8000],
            d: vec![5],
            p: vec![2.0],
            eps: vec![0.5],
            delta: vec![1e-5],
            estimator: vec![EstimatorKind::Simple],
            family: vec![FamilyKind::Student],
            reps: 10,
            seed: 0,
            out: PathBuf::from("results"),
            jobs: None,
            k: None,
            tc: 40,
            radius_mult: 1.0,
            moment_bound: 1.0,
            diameter: 2.0,
            curvature: 1.0,
            record_wall_time: true,
        }
    }

    /// Set one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "n" => self.n = parse_list(key, value)?,
            "d" => self.d = parse_list(key, value)?,
            "p" => self.p = parse_list(key, value)?,
            "eps" => self.eps = parse_list(key, value)?,
            "delta" => self.delta = parse_list(key, value)?,
            "estimator" => self.estimator = parse_list(key, value)?,
            "family" => self.family = parse_list(key, value)?,
            "reps" => self.reps = parse_one(key, value)?,
            "seed" => self.seed = parse_one(key, value)?,
            "out" => self.out = PathBuf::from(value.trim()),
            "jobs" => self.jobs = Some(parse_one(key, value)?),
            "k" if value.trim() == "auto" => self.k = None,
            "k" => self.k = Some(parse_one(key, value)?),
            "tc" => self.tc = parse_one(key, value)?,
            "radius_mult" => self.radius_mult = parse_one(key, value)?,
            "moment_bound" => self.moment_bound = parse_one(key, value)?,
            "diameter" => self.diameter = parse_one(key, value)?,
            "curvature" => self.curvature = parse_one(key, value)?,
            _ => return Err(CliError::UnknownKey(key.into())),
        }
        Ok(())
    }

    /// Apply every `key = value` line of `text`.
    pub fn apply_text(&mut self, text: &str, path: &Path) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| CliError::ConfigSyntax {
                path: path.into(),
                line: i + 1,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            self.set(key.trim(), value).map_err(|e| CliError::ConfigSyntax {
                path: path.into(),
                line: i + 1,
                msg: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        self.apply_text(&text, path)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(CliError::Invalid(msg.into()));
        if self.n.is_empty()
            || self.d.is_empty()
            || self.p.is_empty()
            || self.eps.is_empty()
            || self.delta.is_empty()
            || self.estimator.is_empty()
            || self.family.is_empty()
        {
            return bad("every grid key needs at least one value");
        }
        if self.reps == 0 {
            return bad("reps must be at least 1");
        }
        if self.n.iter().any(|&n| n < 2) {
            return bad("n must be at least 2");
        }
        if self.d.contains(&0) {
            return bad("d must be at least 1");
        }
        if self.p.iter().any(|p| !(p.is_finite() && *p >= 2.0)) {
            return bad("p must be at least 2");
        }
        if self.eps.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return bad("eps must be positive");
        }
        if self.delta.iter().any(|d| !(*d > 0.0 && *d < 1.0)) {
            return bad("delta must lie in (0, 1)");
        }
        if self.jobs == Some(0) {
            return bad("jobs must be at least 1");
        }
        if self.k == Some(0) {
            return bad("k must be at least 1");
        }
        if self.tc == 0 {
            return bad("tc must be at least 1");
        }
        for (name, v) in [
            ("radius_mult", self.radius_mult),
            ("moment_bound", self.moment_bound),
            ("diameter", self.diameter),
            ("curvature", self.curvature),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(CliError::Invalid(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    /// `key = value` lines that reproduce this config.
    pub fn echo(&self) -> String {
        fn join<T: fmt::Display>(v: &[T]) -> String {
            v.iter().map(T::to_string).collect::<Vec<_>>().join(", ")
        }
        let mut s = String::new();
        let mut line = |k: &str, v: String| s.push_str(&format!("{k} = {v}\n"));
        line("mode", self.mode.to_string());
        line("n", join(&self.n));
        line("d", join(&self.d));
        line("p", join(&self.p));
        line("eps", join(&self.eps));
        line("delta", join(&self.delta));
        line("estimator", join(&self.estimator));
        line("family", join(&self.family));
        line("reps", self.reps.to_string());
        line("seed", self.seed.to_string());
        line("k", self.k.map_or("auto".into(), |k| k.to_string()));
        line("tc", self.tc.to_string());
        line("radius_mult", self.radius_mult.to_string());
        line("moment_bound", self.moment_bound.to_string());
        line("diameter", self.diameter.to_string());
        line("curvature", self.curvature.to_string());
        s
    }
}

/// Default group count min(⌈1600 ln n⌉, ⌊n/2⌋), i.e. 800 ln(1/β) at β = 1/n².
pub fn default_groups(n: usize) -> usize {
    let k = (1600.0 * (n as f64).ln()).ceil() as usize;
    k.min(n / 2).max(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_values_and_comments() {
        let mut c = ExperimentConfig::new(Mode::MeanBench);
        c.apply_text(
            "# sweep\nn = 2000, 8000 ,32000\nestimator = simple, iterative # both\n\nreps=3\n",
            Path::new("x.cfg"),
        )
        .unwrap();
        assert_eq!(c.n, vec![2000, 8000, 32000]);
        assert_eq!(c.estimator, vec![EstimatorKind::Simple, EstimatorKind::Iterative]);
        assert_eq!(c.reps, 3);
        c.validate().unwrap();
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let mut c = ExperimentConfig::new(Mode::MeanBench);
        let e = c.apply_text("n = 10\nnonsense\n", Path::new("x.cfg")).unwrap_err();
        assert_eq!(e.to_string(), "x.cfg:2: expected `key = value`, got `nonsense`");
        let e = c.apply_text("d = 3\ncolour = red\n", Path::new("x.cfg")).unwrap_err();
        assert!(e.to_string().starts_with("x.cfg:2: unknown config key"));
        let e = c.apply_text("eps = 0.5, x\n", Path::new("x.cfg")).unwrap_err();
        assert!(e.to_string().starts_with("x.cfg:1: invalid value `x`"));
    }

    #[test]
    fn validation() {
        let mut c = ExperimentConfig::new(Mode::OptBench);
        c.delta = vec![1.0];
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::new(Mode::OptBench);
        c.n = vec![];
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::new(Mode::OptBench);
        c.reps = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn default_group_count() {
        assert_eq!(default_groups(100), 50);
        assert_eq!(default_groups(1_000_000), 22_105);
    }

    #[test]
    fn echo_round_trips() {
        let mut c = ExperimentConfig::new(Mode::MeanBench);
        c.set("eps", "0.1, 0.2").unwrap();
        c.set("k", "80").unwrap();
        let mut d = ExperimentConfig::new(Mode::MeanBench);
        let text: String = c.echo().lines().filter(|l| !l.starts_with("mode")).map(|l| format!("{l}\n")).collect();
        d.apply_text(&text, Path::new("echo")).unwrap();
        assert_eq!(c, d);
    }
}
