//! Flat `key = value` experiment configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Lists are comma
//! separated; seed lists also accept a half-open range `a..b`.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::params::AlgoConfig;

/// Environment variable naming the directory that holds `ratings.csv` and
/// `movies.csv`.
pub const DATA_DIR_ENV: &str = "MIXCLASS_DATA_DIR";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    SupportSim,
    RecoverySweep,
    MovieLens,
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "support-sim" => Ok(Self::SupportSim),
            "recovery-sweep" => Ok(Self::RecoverySweep),
            "movielens" => Ok(Self::MovieLens),
            _ => Err(Error::Config(format!("unknown experiment kind `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algorithm {
    TwoStage,
    OneStage,
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two-stage" => Ok(Self::TwoStage),
            "one-stage" => Ok(Self::OneStage),
            _ => Err(Error::Config(format!("unknown algorithm `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub n: usize,
    pub k: usize,
    pub ell: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub seeds: Vec<u64>,
    /// Seed of the planted instance for recovery sweeps.
    pub instance_seed: u64,
    pub algo: AlgoConfig,
    /// RUFF row budgets for support sweeps; empty means fractions of the
    /// full budget.
    pub rows: Vec<usize>,
    /// Labels per component for recovery sweeps.
    pub labels: Vec<usize>,
    pub algorithm: Algorithm,
    pub exact_oracle: bool,
    pub ratings: Option<PathBuf>,
    pub movies: Option<PathBuf>,
    pub users: Option<(u32, u32)>,
    pub min_common: usize,
    pub m1: usize,
    pub m2: usize,
    pub out: PathBuf,
    pub plot: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::SupportSim,
            n: 200,
            k: 5,
            ell: 2,
            epsilon: 0.1,
            delta: 0.0,
            seeds: (0..20).collect(),
            instance_seed: 0,
            algo: AlgoConfig::default(),
            rows: Vec::new(),
            labels: vec![400, 1600, 6400],
            algorithm: Algorithm::TwoStage,
            exact_oracle: false,
            ratings: None,
            movies: None,
            users: None,
            min_common: 500,
            m1: 10,
            m2: 20,
            out: PathBuf::from("results.csv"),
            plot: None,
        }
    }
}

fn num<T: FromStr>(key: &str, v: &str, line: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse().map_err(|e| Error::Config(format!("line {line}: `{key}`: {e}")))
}

fn list<T: FromStr>(key: &str, v: &str, line: usize) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| num(key, s, line)).collect()
}

fn seeds(v: &str, line: usize) -> Result<Vec<u64>> {
    if let Some((a, b)) = v.split_once("..") {
        let (a, b): (u64, u64) = (num("seeds", a.trim(), line)?, num("seeds", b.trim(), line)?);
        return Ok((a..b).collect());
    }
    list("seeds", v, line)
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let s = raw.trim();
            if s.is_empty() || s.starts_with('#') {
                continue;
            }
            let (key, v) = s
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {line}: expected `key = value`")))?;
            let (key, v) = (key.trim(), v.trim());
            match key {
                "kind" => c.kind = v.parse()?,
                "n" => c.n = num(key, v, line)?,
                "k" => c.k = num(key, v, line)?,
                "ell" => c.ell = num(key, v, line)?,
                "epsilon" => c.epsilon = num(key, v, line)?,
                "delta" => c.delta = num(key, v, line)?,
                "seeds" => c.seeds = seeds(v, line)?,
                "instance_seed" => c.instance_seed = num(key, v, line)?,
                "c_d" => c.algo.families.c_d = num(key, v, line)?,
                "c_m" => c.algo.families.c_m = num(key, v, line)?,
                "c_c" => c.algo.families.c_c = num(key, v, line)?,
                "c_g" => c.algo.c_g = num(key, v, line)?,
                "batch_slack" => c.algo.batch_slack = num(key, v, line)?,
                "failure_budget" => c.algo.failure_budget = num(key, v, line)?,
                "rows" => c.rows = list(key, v, line)?,
                "labels" => c.labels = list(key, v, line)?,
                "algorithm" => c.algorithm = v.parse()?,
                "oracle" => {
                    c.exact_oracle = match v {
                        "exact" => true,
                        "simulated" => false,
                        _ => return Err(Error::Config(format!("line {line}: oracle must be exact or simulated"))),
                    }
                }
                "ratings" => c.ratings = Some(PathBuf::from(v)),
                "movies" => c.movies = Some(PathBuf::from(v)),
                "users" => {
                    let u: Vec<u32> = list(key, v, line)?;
                    match u[..] {
                        [a, b] => c.users = Some((a, b)),
                        _ => return Err(Error::Config(format!("line {line}: users needs two ids"))),
                    }
                }
                "min_common" => c.min_common = num(key, v, line)?,
                "m1" => c.m1 = num(key, v, line)?,
                "m2" => c.m2 = num(key, v, line)?,
                "out" => c.out = PathBuf::from(v),
                "plot" => c.plot = Some(PathBuf::from(v)),
                _ => return Err(Error::Config(format!("line {line}: unknown key `{key}`"))),
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.k == 0 || self.ell == 0 {
            return Err(Error::Config("n, k and ell must be positive".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seed list is empty".into()));
        }
        if self.kind == ExperimentKind::SupportSim && self.ell != 2 {
            return Err(Error::Config("support-sim runs the two-component pipeline; set ell = 2".into()));
        }
        if self.kind == ExperimentKind::RecoverySweep && !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::Config(format!("epsilon must lie in (0,1), got {}", self.epsilon)));
        }
        self.algo.validate()
    }

    /// Dataset paths: explicit keys first, then `$MIXCLASS_DATA_DIR`.
    pub fn dataset_paths(&self) -> Result<(PathBuf, PathBuf)> {
        let dir = std::env::var_os(DATA_DIR_ENV).map(PathBuf::from);
        let pick = |explicit: &Option<PathBuf>, name: &str| {
            explicit
                .clone()
                .or_else(|| dir.as_ref().map(|d| d.join(name)))
                .ok_or_else(|| Error::Config(format!("no path for {name}: set the key or {DATA_DIR_ENV}")))
        };
        Ok((pick(&self.ratings, "ratings.csv")?, pick(&self.movies, "movies.csv")?))
    }
}
