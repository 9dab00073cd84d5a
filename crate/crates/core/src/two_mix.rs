//! Two-component mixtures without the separability assumption.
//!
//! Supports are split using one pivot coordinate. When the supports differ a
//! coordinate owned by one component forces that component's response; when
//! they coincide, `±1` queries are issued and their two responses are aligned
//! to a pivot query.

use crate::error::{Error, Result};
use crate::oracle::{CountOracle, Phase, Problem, ResponseSet, SparseVector};
use crate::params::AlgoConfig;
use crate::recovery::{self, LabeledQuerySet, RecoveryResult};
use crate::rng::{self, SignField};
use crate::setfam::SetFamily;
use crate::support::{self, SupportMatrix};

/// Per-component responses to a pair of queries `(v0, v)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AlignmentTuple {
    pub beta1: (i8, i8),
    pub beta2: (i8, i8),
}

/// A pivot query with two distinct nonzero responses. Component 1 is by
/// convention the one answering `+1` to it.
#[derive(Clone, Debug, PartialEq)]
pub struct PivotState {
    pub v0: Vec<f64>,
    pub response: ResponseSet,
}

impl PivotState {
    pub fn new(v0: Vec<f64>, response: ResponseSet) -> Result<Self> {
        if response.pos != 1 || response.neg != 1 {
            return Err(Error::InvalidParameter(format!("pivot response must be {{+1,-1}}, got {response}")));
        }
        Ok(Self { v0, response })
    }
}

fn ensure_two(oracle: &dyn CountOracle) -> Result<()> {
    if oracle.ell() != 2 {
        return Err(Error::InvalidParameter(format!("two-component routine called with ell = {}", oracle.ell())));
    }
    Ok(())
}

/// Responses of the two components to `v`, from the estimated counts.
pub fn classify_response_set(oracle: &mut dyn CountOracle, v: &[f64], batch: usize, phase: Phase) -> Result<ResponseSet> {
    ensure_two(oracle)?;
    Ok(oracle.counts(v, batch, phase)?.response_set())
}

fn add(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

/// The one symbol left after removing `symbol` from a two-element set.
fn other(r: &ResponseSet, symbol: i8) -> Option<i8> {
    r.without(symbol).and_then(|rest| rest.symbols().first().copied())
}

/// Both queries have a zero response. Component 1 is the one with the zero
/// on `v0`; the zeros belong to the same component iff `v0 + v` still has a
/// zero response.
pub fn align_zero_zero(
    oracle: &mut dyn CountOracle,
    v0: &[f64],
    r0: ResponseSet,
    v: &[f64],
    r: ResponseSet,
    batch: usize,
) -> Result<AlignmentTuple> {
    let a = other(&r0, 0).ok_or_else(|| Error::InvalidParameter(format!("no zero in response {r0}")))?;
    let b = other(&r, 0).ok_or_else(|| Error::InvalidParameter(format!("no zero in response {r}")))?;
    let sum = classify_response_set(oracle, &add(v0, 1.0, v), batch, Phase::Align)?;
    Ok(if sum.contains(0) {
        AlignmentTuple { beta1: (0, 0), beta2: (a, b) }
    } else {
        AlignmentTuple { beta1: (0, b), beta2: (a, 0) }
    })
}

/// Dominating multiplier for `±1` queries: a nonzero projection on the
/// `delta` grid is at least `delta`, and any projection is at most `sqrt(k)`.
pub fn pm_inf(p: &Problem) -> f64 {
    let floor = if p.delta > 0.0 { p.delta } else { p.mu_min };
    10.0 * (p.k.max(1) as f64).sqrt() / floor
}

/// Pivot answers `{+1,-1}` and `v` has a zero response. In `v0 + inf v` the
/// nonzero component of `v` answers `s`, and the zero component keeps its
/// pivot answer.
pub fn align_pivot_zero(
    oracle: &mut dyn CountOracle,
    pivot: &PivotState,
    v: &[f64],
    r: ResponseSet,
    inf: f64,
    batch: usize,
) -> Result<AlignmentTuple> {
    let s = other(&r, 0).ok_or_else(|| Error::InvalidParameter(format!("no zero in response {r}")))?;
    let combined = classify_response_set(oracle, &add(&pivot.v0, inf, v), batch, Phase::Align)?;
    let t = other(&combined, s)
        .ok_or_else(|| Error::EstimationFailure(format!("combined response {combined} lacks {s:+}")))?;
    match t {
        1 => Ok(AlignmentTuple { beta1: (1, 0), beta2: (-1, s) }),
        -1 => Ok(AlignmentTuple { beta1: (1, s), beta2: (-1, 0) }),
        _ => Err(Error::EstimationFailure(format!("combined response {combined} has a zero"))),
    }
}

/// Positive reduced fractions `c/d` with `1 <= c, d <= ceil(sqrt(k)/delta)`,
/// ascending, with the midpoint of every consecutive pair interleaved.
///
/// Two consecutive fractions can be exactly the two sign changes of an
/// anti-aligned pair, in which case only a value strictly between them
/// collapses the response.
pub fn eta_grid(k: usize, delta: f64) -> Result<Vec<f64>> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Config(format!("the alignment sweep needs delta > 0, got {delta}")));
    }
    let n = ((k.max(1) as f64).sqrt() / delta - 1e-9).ceil().max(1.0) as u64;
    let mut fr: Vec<(u64, u64)> = Vec::new();
    for d in 1..=n {
        for c in 1..=n {
            if gcd(c, d) == 1 {
                fr.push((c, d));
            }
        }
    }
    fr.sort_by(|a, b| (a.0 * b.1).cmp(&(b.0 * a.1)));
    let vals: Vec<f64> = fr.iter().map(|&(c, d)| c as f64 / d as f64).collect();
    let mut out = Vec::with_capacity(2 * vals.len());
    for (i, &x) in vals.iter().enumerate() {
        if i > 0 {
            out.push(0.5 * (vals[i - 1] + x));
        }
        out.push(x);
    }
    Ok(out)
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Pivot and `v` both answer `{+1,-1}`. Sweeps `eta v0 + v`; a response
/// with a single distinct symbol means the `+1` answers belong to different
/// components.
pub fn align_pivot_pm(
    oracle: &mut dyn CountOracle,
    pivot: &PivotState,
    v: &[f64],
    grid: &[f64],
    batch: usize,
) -> Result<AlignmentTuple> {
    for &eta in grid {
        let q: Vec<f64> = pivot.v0.iter().zip(v).map(|(a, b)| eta * a + b).collect();
        if classify_response_set(oracle, &q, batch, Phase::Align)?.distinct().len() == 1 {
            return Ok(AlignmentTuple { beta1: (1, -1), beta2: (-1, 1) });
        }
    }
    Ok(AlignmentTuple { beta1: (1, 1), beta2: (-1, -1) })
}

/// Support pair from `|S(i)|` and the intersections: coordinates in both
/// supports, then singly-owned coordinates split by whether they share a
/// component with the first singly-owned one.
pub fn l2_support(oracle: &mut dyn CountOracle, p: &Problem, cfg: &AlgoConfig, seed: u64) -> Result<SupportMatrix> {
    let ruff = support::ruff_for(p, cfg, rng::derive_seed(seed, "support-ruff"))?;
    l2_support_with(oracle, p, cfg, &ruff, seed)
}

/// [`l2_support`] with a caller-supplied RUFF.
pub fn l2_support_with(
    oracle: &mut dyn CountOracle,
    p: &Problem,
    cfg: &AlgoConfig,
    ruff: &SetFamily,
    seed: u64,
) -> Result<SupportMatrix> {
    ensure_two(oracle)?;
    let (_, s, gram) = support::estimate_gram_with(oracle, p, cfg, ruff, seed)?;
    let n = s.len();
    let (mut a, mut b) = (Vec::new(), Vec::new());
    match (0..n).find(|&i| s[i] == 1) {
        None => {
            a = (0..n).filter(|&i| s[i] > 0).collect();
            b = a.clone();
        }
        Some(i0) => {
            for j in 0..n {
                match s[j] {
                    2 => {
                        a.push(j);
                        b.push(j);
                    }
                    1 if gram.get(i0, j) == 1 => a.push(j),
                    1 => b.push(j),
                    _ => {}
                }
            }
        }
    }
    SupportMatrix::from_columns(n, &[a, b])
}

fn zero_to_plus(y: i8) -> i8 {
    if y == 0 {
        1
    } else {
        y
    }
}

/// Case table for the pair `(v + s inf e_p, v)`: returns the responses
/// `(y, z)` of the component without `p` and the component owning `p`.
pub fn decode_case1(forced: ResponseSet, plain: ResponseSet) -> (i8, i8) {
    let y = if forced.pos == 2 {
        1
    } else if forced.neg == 1 {
        -1
    } else {
        0
    };
    let z = match y {
        1 if plain.pos == 2 => 1,
        1 if plain.neg == 1 => -1,
        -1 if plain.pos == 1 => 1,
        -1 if plain.neg == 2 => -1,
        0 if plain.pos == 1 => 1,
        0 if plain.neg == 1 => -1,
        _ => 0,
    };
    (y, z)
}

#[derive(Clone, Debug, Default)]
pub struct TwoMixOptions {
    /// Labeled queries per stream; defaults to the config formula.
    pub labels: Option<usize>,
}

/// Different supports: a coordinate `p` owned by one component makes that
/// component answer `+1` to `v + s inf e_p`, which reveals the other
/// component's answer and then, against `v`, its own.
pub fn l2_recover_diff_support(
    oracle: &mut dyn CountOracle,
    p: &Problem,
    supports: &SupportMatrix,
    epsilon: f64,
    cfg: &AlgoConfig,
    seed: u64,
    opts: &TwoMixOptions,
) -> Result<RecoveryResult> {
    ensure_two(oracle)?;
    let start = oracle.ledger().clone();
    let cols = supports.columns();
    let only = |a: usize, b: usize| cols[a].iter().copied().find(|i| !cols[b].contains(i));
    let (owner, pc) = match (only(0, 1), only(1, 0)) {
        (Some(q), _) => (0, q),
        (None, Some(q)) => (1, q),
        (None, None) => return Err(Error::InvalidParameter("supports are identical".into())),
    };
    let inf = recovery::inf_value(p)?;
    let m = opts.labels.unwrap_or_else(|| cfg.gaussian_labels(p.k, epsilon));
    let batch = cfg.batch(2, 2 * m + 1);
    let mut ep = vec![0.0; p.n];
    ep[pc] = 1.0;
    let s = if oracle.counts(&ep, batch, Phase::Sign)?.pos >= 1 { 1.0 } else { -1.0 };
    let field = recovery::gaussian_field(seed);
    let mut own = LabeledQuerySet::new(p.n, cols[owner].clone());
    let mut rest = LabeledQuerySet::new(p.n, cols[1 - owner].clone());
    for i in 0..m {
        let g = |j: usize| field.entry(i as u64, 0, j);
        let forced = oracle.counts_by(&|j| if j == pc { g(j) + s * inf } else { g(j) }, batch, Phase::Recovery);
        let plain = oracle.counts_by(&g, batch, Phase::Recovery);
        let (y, z) = decode_case1(forced.response_set(), plain.response_set());
        own.push_by(&g, zero_to_plus(z))?;
        rest.push_by(&g, zero_to_plus(y))?;
    }
    let mut est = [recovery::onebit_estimate(&own, p.k)?, recovery::onebit_estimate(&rest, p.k)?];
    let mut labels = [own.labels().to_vec(), rest.labels().to_vec()];
    if owner == 1 {
        est.swap(0, 1);
        labels.swap(0, 1);
    }
    Ok(RecoveryResult {
        estimates: est.to_vec(),
        support: supports.clone(),
        reps: Vec::new(),
        signs: Vec::new(),
        labels: labels.to_vec(),
        ledger: oracle.ledger().since(&start),
    })
}

/// `subgaussian_estimate`: the averaging estimator applied to `±1` queries.
pub fn subgaussian_estimate(lqs: &LabeledQuerySet, k: usize) -> Result<SparseVector> {
    recovery::onebit_estimate(lqs, k)
}

/// Same supports: `±1` queries on `support`, aligned to a pivot query.
pub fn l2_recover_same_support(
    oracle: &mut dyn CountOracle,
    p: &Problem,
    support: &[usize],
    epsilon: f64,
    cfg: &AlgoConfig,
    seed: u64,
    opts: &TwoMixOptions,
) -> Result<RecoveryResult> {
    ensure_two(oracle)?;
    let grid = eta_grid(p.k, p.delta)?;
    let start = oracle.ledger().clone();
    let m = opts.labels.unwrap_or_else(|| cfg.gaussian_labels(p.k, epsilon));
    let batch = cfg.batch(2, m * (grid.len() + 2));
    let field = SignField::new(rng::derive_seed(seed, "pm-queries"));
    let query = |i: usize| -> Vec<f64> {
        let mut v = vec![0.0; p.n];
        support.iter().for_each(|&j| v[j] = field.entry(i as u64, j));
        v
    };
    let inf = pm_inf(p);
    let mut one = LabeledQuerySet::new(p.n, support.to_vec());
    let mut two = LabeledQuerySet::new(p.n, support.to_vec());
    let mut w: Vec<(usize, ResponseSet)> = Vec::new();
    for i in 0..m {
        let v = query(i);
        let r = classify_response_set(oracle, &v, batch, Phase::Recovery)?;
        if let [y] = r.distinct()[..] {
            one.push_by(&|j| v[j], zero_to_plus(y))?;
            two.push_by(&|j| v[j], zero_to_plus(y))?;
        } else {
            w.push((i, r));
        }
    }
    if one.is_empty() && w.is_empty() {
        return Err(Error::InsufficientData("no labeled queries".into()));
    }
    let pivot = w.iter().find(|(_, r)| r.pos == 1 && r.neg == 1).copied();
    match pivot {
        Some((i0, r0)) => {
            let piv = PivotState::new(query(i0), r0)?;
            for &(i, r) in &w {
                let v = query(i);
                let a = if i == i0 {
                    AlignmentTuple { beta1: (1, 1), beta2: (-1, -1) }
                } else if r.contains(0) {
                    align_pivot_zero(oracle, &piv, &v, r, inf, batch)?
                } else {
                    align_pivot_pm(oracle, &piv, &v, &grid, batch)?
                };
                one.push_by(&|j| v[j], zero_to_plus(a.beta1.1))?;
                two.push_by(&|j| v[j], zero_to_plus(a.beta2.1))?;
            }
        }
        None if !w.is_empty() => {
            let (i0, r0) = w[0];
            let v0 = query(i0);
            for &(i, r) in &w {
                let v = query(i);
                let a = if i == i0 {
                    let s = other(&r0, 0).unwrap_or(0);
                    AlignmentTuple { beta1: (0, 0), beta2: (s, s) }
                } else {
                    align_zero_zero(oracle, &v0, r0, &v, r, batch)?
                };
                one.push_by(&|j| v[j], zero_to_plus(a.beta1.1))?;
                two.push_by(&|j| v[j], zero_to_plus(a.beta2.1))?;
            }
        }
        None => {}
    }
    let estimates = vec![subgaussian_estimate(&one, p.k)?, subgaussian_estimate(&two, p.k)?];
    for e in &estimates {
        if e.max_abs() > 0.5 {
            log::warn!("estimate has max entry {:.3}; ±1-query recovery is only reliable for spread-out vectors", e.max_abs());
        }
    }
    let n = p.n;
    Ok(RecoveryResult {
        estimates,
        support: SupportMatrix::from_columns(n, &[support.to_vec(), support.to_vec()])?,
        reps: Vec::new(),
        signs: Vec::new(),
        labels: vec![one.labels().to_vec(), two.labels().to_vec()],
        ledger: oracle.ledger().since(&start),
    })
}

/// Full two-component pipeline. With `dense` the support stage is skipped
/// and every coordinate is treated as shared.
pub fn l2_recover(
    oracle: &mut dyn CountOracle,
    p: &Problem,
    epsilon: f64,
    cfg: &AlgoConfig,
    seed: u64,
    dense: bool,
    opts: &TwoMixOptions,
) -> Result<RecoveryResult> {
    let start = oracle.ledger().clone();
    let mut r = if dense {
        let all: Vec<usize> = (0..p.n).collect();
        l2_recover_same_support(oracle, &Problem { k: p.n, ..*p }, &all, epsilon, cfg, seed, opts)?
    } else {
        let x = l2_support(oracle, p, cfg, seed)?;
        if x.column(0) == x.column(1) {
            l2_recover_same_support(oracle, p, &x.column(0), epsilon, cfg, seed, opts)?
        } else {
            l2_recover_diff_support(oracle, p, &x, epsilon, cfg, seed, opts)?
        }
    };
    r.ledger = oracle.ledger().since(&start);
    Ok(r)
}
