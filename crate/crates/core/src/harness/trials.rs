//! Planted instances and the simulation sweeps.

use std::time::{Duration, Instant};

use itertools::Itertools;
use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;

use super::config::{Algorithm, ExperimentConfig};
use crate::error::{Error, Result};
use crate::oracle::{CountOracle, ExactOracle, MixtureInstance, Problem, QueryLedger, Simulator, SparseVector};
use crate::recovery::{self, RecoveryOptions};
use crate::rng;
use crate::setfam::{self, FamilyKind, SetFamily};
use crate::support::SupportMatrix;
use crate::two_mix;

fn gaussian_entries(r: &mut impl Rng, coords: &[usize]) -> Vec<(usize, f64)> {
    coords
        .iter()
        .map(|&i| loop {
            let x: f64 = r.sample(StandardNormal);
            if x != 0.0 {
                break (i, x);
            }
        })
        .collect()
}

/// `ell` components with `k`-sparse supports, each owning at least one
/// coordinate outside all other supports. Entries are Gaussian, normalized.
pub fn planted_separable(n: usize, k: usize, ell: usize, seed: u64) -> Result<MixtureInstance> {
    if k == 0 || ell == 0 || n < ell + k - 1 {
        return Err(Error::InvalidParameter(format!("cannot plant ell = {ell} separable {k}-sparse vectors in n = {n}")));
    }
    let mut r = rng::substream(seed, "planted-separable");
    let reps = index::sample(&mut r, n, ell).into_vec();
    let rest: Vec<usize> = (0..n).filter(|i| !reps.contains(i)).collect();
    let comps = reps
        .iter()
        .map(|&rep| {
            let mut coords: Vec<usize> = index::sample(&mut r, rest.len(), k - 1).into_iter().map(|j| rest[j]).collect();
            coords.push(rep);
            coords.sort_unstable();
            SparseVector::new(n, gaussian_entries(&mut r, &coords))
        })
        .collect::<Result<Vec<_>>>()?;
    MixtureInstance::new(comps, 0.0)
}

/// `ell` components with independent uniformly random `k`-subsets as
/// supports; no separability is enforced.
pub fn planted_supports(n: usize, k: usize, ell: usize, seed: u64) -> Result<MixtureInstance> {
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!("cannot plant {k}-sparse vectors in n = {n}")));
    }
    let mut r = rng::substream(seed, "planted-supports");
    let comps = (0..ell)
        .map(|_| {
            let mut coords = index::sample(&mut r, n, k).into_vec();
            coords.sort_unstable();
            SparseVector::new(n, gaussian_entries(&mut r, &coords))
        })
        .collect::<Result<Vec<_>>>()?;
    MixtureInstance::new(comps, 0.0)
}

pub fn true_support(inst: &MixtureInstance) -> SupportMatrix {
    let cols: Vec<Vec<usize>> = inst.components().iter().map(SparseVector::support).collect();
    SupportMatrix::from_columns(inst.n(), &cols).expect("supports lie in range")
}

/// Disagreeing bits over `n * ell` after the best column matching.
pub fn relative_hamming(truth: &SupportMatrix, est: &SupportMatrix) -> f64 {
    let (n, ell) = (truth.n(), truth.ell());
    if n == 0 || ell == 0 {
        return 0.0;
    }
    let cost: Vec<Vec<usize>> = (0..ell)
        .map(|t| (0..ell).map(|s| (0..n).filter(|&i| truth.get(i, t) != est.get(i, s)).count()).collect())
        .collect();
    let best = (0..ell)
        .permutations(ell)
        .map(|p| (0..ell).map(|t| cost[t][p[t]]).sum::<usize>())
        .min()
        .unwrap_or(0);
    best as f64 / (n * ell) as f64
}

#[derive(Clone, Debug)]
pub struct TrialResult {
    pub seed: u64,
    pub hamming: Option<f64>,
    pub l2_errors: Vec<f64>,
    pub ledger: QueryLedger,
    pub wall: Duration,
    /// Set when the pipeline failed and the fallback was scored.
    pub failure: Option<String>,
}

/// Full RUFF budget `(rows, set size)` for the support stage.
pub fn ruff_budget(p: &Problem, cfg: &ExperimentConfig) -> (usize, usize) {
    let t = (p.ell * p.k).min(p.n.saturating_sub(1)).max(1);
    let f = &cfg.algo.families;
    (setfam::ruff_alphabet(p.n, t, 0.5, f), setfam::ruff_set_size(p.n, t, 0.5, f))
}

/// RUFF with `rows` rows and the full-budget density of ones.
pub fn ruff_with_rows(p: &Problem, cfg: &ExperimentConfig, rows: usize, seed: u64) -> Result<SetFamily> {
    let (full_rows, full_d) = ruff_budget(p, cfg);
    let d = if rows >= full_rows {
        full_d
    } else {
        ((full_d as f64 * rows as f64 / full_rows as f64).round() as usize).clamp(rows.min(1), rows)
    };
    let t = (p.ell * p.k).min(p.n.saturating_sub(1)).max(1);
    SetFamily::random_uniform(p.n, rows, d, FamilyKind::Ruff { d, t, alpha: 0.5 }, seed)
}

fn make_oracle(inst: MixtureInstance, exact: bool, seed: u64) -> Box<dyn CountOracle> {
    if exact {
        Box::new(ExactOracle::new(inst))
    } else {
        Box::new(Simulator::new(inst, seed))
    }
}

/// One two-component support trial at a RUFF row budget. Pipeline failures
/// score the all-zero guess.
pub fn support_trial(cfg: &ExperimentConfig, rows: usize, seed: u64) -> Result<TrialResult> {
    let start = Instant::now();
    let inst = planted_supports(cfg.n, cfg.k, 2, rng::derive_seed(seed, "instance"))?;
    let truth = true_support(&inst);
    let p = inst.problem(cfg.k);
    let ruff = ruff_with_rows(&p, cfg, rows, rng::derive_seed(seed, "sweep-ruff"))?;
    let mut oracle = make_oracle(inst, cfg.exact_oracle, seed);
    let (est, failure) = match two_mix::l2_support_with(oracle.as_mut(), &p, &cfg.algo, &ruff, seed) {
        Ok(x) => (x, None),
        Err(e @ (Error::AssumptionViolated(_) | Error::EstimationFailure(_) | Error::ConstructionFailure(_))) => {
            (SupportMatrix::from_columns(cfg.n, &[vec![], vec![]])?, Some(e.to_string()))
        }
        Err(e) => return Err(e),
    };
    Ok(TrialResult {
        seed,
        hamming: Some(relative_hamming(&truth, &est)),
        l2_errors: Vec::new(),
        ledger: oracle.ledger().clone(),
        wall: start.elapsed(),
        failure,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SupportPoint {
    pub rows: usize,
    pub mean_hamming: f64,
    pub stderr: f64,
}

/// Budgets swept when the config gives none, as fractions of the full one.
pub const DEFAULT_ROW_FRACTIONS: [f64; 7] = [0.0, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0];

pub fn row_budgets(cfg: &ExperimentConfig) -> Vec<usize> {
    if !cfg.rows.is_empty() {
        return cfg.rows.clone();
    }
    let p = Problem { n: cfg.n, ell: 2, k: cfg.k, mu_min: 1.0, delta: 0.0 };
    let full = ruff_budget(&p, cfg).0;
    DEFAULT_ROW_FRACTIONS.iter().map(|f| (f * full as f64).round() as usize).collect()
}

pub fn run_support_trials(cfg: &ExperimentConfig) -> Result<Vec<SupportPoint>> {
    row_budgets(cfg)
        .into_iter()
        .map(|rows| {
            let h = cfg
                .seeds
                .iter()
                .map(|&s| support_trial(cfg, rows, s).map(|t| t.hamming.unwrap_or(0.0)))
                .collect::<Result<Vec<_>>>()?;
            let (mean_hamming, stderr) = mean_stderr(&h);
            log::info!("rows {rows}: mean hamming {mean_hamming:.5}");
            Ok(SupportPoint { rows, mean_hamming, stderr })
        })
        .collect()
}

/// One recovery trial on `inst` with `labels` Gaussian labels per component.
pub fn recovery_trial(
    cfg: &ExperimentConfig,
    inst: &MixtureInstance,
    labels: usize,
    seed: u64,
) -> Result<TrialResult> {
    let start = Instant::now();
    let p = inst.problem(cfg.k);
    let mut oracle = make_oracle(inst.clone(), cfg.exact_oracle, seed);
    let run = match cfg.algorithm {
        Algorithm::TwoStage => {
            let opts = RecoveryOptions { labels: Some(labels), ..Default::default() };
            recovery::two_stage_recover(oracle.as_mut(), &p, &cfg.algo, cfg.epsilon, seed, &opts)
        }
        Algorithm::OneStage => recovery::one_stage_recover(oracle.as_mut(), &p, &cfg.algo, cfg.epsilon, seed, Some(labels)),
    };
    let (l2_errors, failure) = match run {
        Ok(r) => (r.evaluate(inst.components())?.errors, None),
        Err(e @ (Error::AssumptionViolated(_) | Error::EstimationFailure(_) | Error::ConstructionFailure(_))) => {
            (vec![2.0; inst.ell()], Some(e.to_string()))
        }
        Err(e) => return Err(e),
    };
    Ok(TrialResult { seed, hamming: None, l2_errors, ledger: oracle.ledger().clone(), wall: start.elapsed(), failure })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecoveryPoint {
    pub m: usize,
    pub median_l2: f64,
    pub iqr: f64,
}

/// Median and interquartile range of the max component error per label count.
pub fn run_recovery_sweep(cfg: &ExperimentConfig) -> Result<Vec<RecoveryPoint>> {
    let inst = planted_separable(cfg.n, cfg.k, cfg.ell, cfg.instance_seed)?;
    cfg.labels
        .iter()
        .map(|&m| {
            let errs = cfg
                .seeds
                .iter()
                .map(|&s| recovery_trial(cfg, &inst, m, s).map(|t| t.l2_errors.iter().copied().fold(0.0, f64::max)))
                .collect::<Result<Vec<_>>>()?;
            let median_l2 = quantile(&errs, 0.5);
            Ok(RecoveryPoint { m, median_l2, iqr: quantile(&errs, 0.75) - quantile(&errs, 0.25) })
        })
        .collect()
}

pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Linear-interpolation quantile.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}
