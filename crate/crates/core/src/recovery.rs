//! Estimating every component to a target accuracy once supports are known:
//! the averaging one-bit estimator, the two-stage algorithm with modified
//! Gaussian queries and the fully non-adaptive single-stage battery.

use itertools::Itertools;

use crate::error::{Error, Result};
use crate::oracle::{CountEstimate, CountOracle, Phase, Problem, QueryLedger, SparseVector};
use crate::params::AlgoConfig;
use crate::rng::{self, GaussianField, GAUSSIAN_BOUND};
use crate::setfam::{self, FamilyKind, SetFamily};
use crate::support::{self, SupportMatrix, SupportRecovery};

/// Queries restricted to a target support, with their `±1` labels.
/// `rows[i][j]` is the entry of query `i` at coordinate `support[j]`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LabeledQuerySet {
    n: usize,
    support: Vec<usize>,
    rows: Vec<Vec<f64>>,
    labels: Vec<i8>,
}

impl LabeledQuerySet {
    pub fn new(n: usize, support: Vec<usize>) -> Self {
        Self { n, support, rows: Vec::new(), labels: Vec::new() }
    }

    /// Restrict dense queries to `support`.
    pub fn from_dense(support: Vec<usize>, queries: &[Vec<f64>], labels: &[i8]) -> Result<Self> {
        if queries.len() != labels.len() {
            return Err(Error::DimensionMismatch { expected: queries.len(), got: labels.len() });
        }
        let n = queries.first().map_or(0, Vec::len);
        let mut s = Self::new(n, support);
        for (q, &y) in queries.iter().zip(labels) {
            if q.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: q.len() });
            }
            s.push_by(&|i| q[i], y)?;
        }
        Ok(s)
    }

    pub fn push_by(&mut self, v: &dyn Fn(usize) -> f64, label: i8) -> Result<()> {
        if label != 1 && label != -1 {
            return Err(Error::InvalidParameter(format!("label must be ±1, got {label}")));
        }
        self.rows.push(self.support.iter().map(|&i| v(i)).collect());
        self.labels.push(label);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn flipped(&self) -> Self {
        let mut s = self.clone();
        s.labels.iter_mut().for_each(|y| *y = -*y);
        s
    }
}

/// Average `y v` over the target support, keep the `k` largest magnitudes
/// and normalize.
pub fn onebit_estimate(lqs: &LabeledQuerySet, k: usize) -> Result<SparseVector> {
    if lqs.is_empty() {
        return Err(Error::InsufficientData("no labeled queries".into()));
    }
    let m = lqs.len() as f64;
    let mut agg = vec![0.0; lqs.support.len()];
    for (row, &y) in lqs.rows.iter().zip(&lqs.labels) {
        for (a, &x) in agg.iter_mut().zip(row) {
            *a += y as f64 * x;
        }
    }
    let mut order: Vec<usize> = (0..agg.len()).collect();
    order.sort_by(|&a, &b| agg[b].abs().total_cmp(&agg[a].abs()).then(a.cmp(&b)));
    let kept = order.into_iter().take(k).map(|j| (lqs.support[j], agg[j] / m));
    let v = SparseVector::new(lqs.n, kept)?;
    if v.norm() == 0.0 {
        return Err(Error::EstimationFailure("aggregate is the zero vector".into()));
    }
    Ok(v.normalized())
}

/// Permutation-minimized error against the truth.
#[derive(Clone, Debug, PartialEq)]
pub struct Matching {
    /// `sigma[t]` is the estimate matched to truth component `t`.
    pub sigma: Vec<usize>,
    pub errors: Vec<f64>,
    pub max_error: f64,
}

/// Minimize `max_t ||beta^t / |beta^t| - est[sigma(t)]||` over all `sigma`,
/// preferring the lexicographically smallest on ties.
pub fn match_and_error(estimates: &[SparseVector], truth: &[SparseVector]) -> Result<Matching> {
    let ell = truth.len();
    if estimates.len() != ell {
        return Err(Error::DimensionMismatch { expected: ell, got: estimates.len() });
    }
    if ell > 8 {
        return Err(Error::InvalidParameter(format!("matching is brute force, ell = {ell} > 8")));
    }
    let truth: Vec<SparseVector> = truth.iter().map(SparseVector::normalized).collect();
    let d: Vec<Vec<f64>> = truth.iter().map(|b| estimates.iter().map(|e| b.distance(e)).collect()).collect();
    let mut best: Option<Matching> = None;
    for sigma in (0..ell).permutations(ell) {
        let errors: Vec<f64> = (0..ell).map(|t| d[t][sigma[t]]).collect();
        let max_error = errors.iter().copied().fold(0.0, f64::max);
        if best.as_ref().is_none_or(|b| max_error < b.max_error) {
            best = Some(Matching { sigma, errors, max_error });
        }
    }
    Ok(best.unwrap_or(Matching { sigma: vec![], errors: vec![], max_error: 0.0 }))
}

/// Output of a recovery run, components in support-column order.
#[derive(Clone, Debug)]
pub struct RecoveryResult {
    pub estimates: Vec<SparseVector>,
    pub support: SupportMatrix,
    pub reps: Vec<usize>,
    pub signs: Vec<i8>,
    /// Decoded Gaussian labels per component.
    pub labels: Vec<Vec<i8>>,
    pub ledger: QueryLedger,
}

impl RecoveryResult {
    pub fn evaluate(&self, truth: &[SparseVector]) -> Result<Matching> {
        match_and_error(&self.estimates, truth)
    }
}

/// Dominating entry: ten times the largest possible Gaussian inner product
/// over the lightest nonzero magnitude.
pub fn inf_value(p: &Problem) -> Result<f64> {
    if !(p.mu_min > 0.0 && p.mu_min.is_finite()) {
        return Err(Error::Config(format!("mu_min must be positive and finite, got {}", p.mu_min)));
    }
    Ok(10.0 * GAUSSIAN_BOUND * (p.k.max(1) as f64).sqrt() / p.mu_min)
}

/// Label of component `t` from a modified Gaussian query: every other
/// component is forced to its representative sign, so `pos` exceeds
/// `p_t = #{t' != t : s_t' = +1}` exactly when component `t` answers `+1`.
pub fn decode_modified(c: CountEstimate, signs: &[i8], t: usize) -> i8 {
    let p_t = signs.iter().enumerate().filter(|&(s, &x)| s != t && x == 1).count();
    let y = if c.pos != p_t { 1 } else { -1 };
    let n_t = signs.len() - 1 - p_t;
    let expect_neg = n_t + (y == -1 && c.z == 0) as usize;
    if c.neg != expect_neg && c.z == 0 {
        log::debug!("modified-query negcount {} disagrees with expected {expect_neg}", c.neg);
    }
    y
}

#[derive(Clone, Debug, Default)]
pub struct RecoveryOptions {
    /// Gaussian labels per component; defaults to the config formula.
    pub labels: Option<usize>,
    /// Row key of the Gaussian field used for component `t`.
    pub row_keys: Option<Vec<u64>>,
    /// Seed of the Gaussian field; defaults to one derived from the run seed.
    pub gaussian_seed: Option<u64>,
}

pub fn gaussian_field(seed: u64) -> GaussianField {
    GaussianField::new(rng::derive_seed(seed, "gaussian"))
}

/// Two-stage recovery: support and representative signs first, then
/// modified Gaussian queries per component.
pub fn two_stage_recover(
    oracle: &mut dyn CountOracle,
    p: &Problem,
    cfg: &AlgoConfig,
    epsilon: f64,
    seed: u64,
    opts: &RecoveryOptions,
) -> Result<RecoveryResult> {
    check_epsilon(epsilon)?;
    let inf = inf_value(p)?;
    let start = oracle.ledger().clone();
    let SupportRecovery { x, ruff, .. } = support::recover_support(oracle, p, cfg, seed)?;
    let reps = x.representatives()?;
    let signs = support::recover_rep_signs_retrying(oracle, &x, &ruff, p, cfg, seed)?;
    let m = opts.labels.unwrap_or_else(|| cfg.gaussian_labels(p.k, epsilon));
    let field = opts.gaussian_seed.map_or_else(|| gaussian_field(seed), GaussianField::new);
    let batch = cfg.batch(p.ell, p.ell * m);
    let mut estimates = Vec::with_capacity(p.ell);
    let mut labels = Vec::with_capacity(p.ell);
    for t in 0..p.ell {
        let row = opts.row_keys.as_ref().map_or(t as u64, |r| r[t]);
        let forced: Vec<usize> = (0..p.ell).filter(|&s| s != t).map(|s| reps[s]).collect();
        let mut lqs = LabeledQuerySet::new(p.n, x.column(t));
        for i in 0..m {
            let g = |j: usize| field.entry(i as u64, row, j);
            let v = |j: usize| if forced.contains(&j) { inf } else { g(j) };
            let y = decode_modified(oracle.counts_by(&v, batch, Phase::Recovery), &signs, t);
            lqs.push_by(&g, y)?;
        }
        estimates.push(onebit_estimate(&lqs, p.k)?);
        labels.push(lqs.labels().to_vec());
    }
    Ok(RecoveryResult { estimates, support: x, reps, signs, labels, ledger: oracle.ledger().since(&start) })
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!("epsilon must lie in (0,1), got {epsilon}")));
    }
    Ok(())
}

/// The whole single-stage battery, fixed before any oracle call.
#[derive(Clone, Debug)]
pub struct OneStagePlan {
    pub problem: Problem,
    pub ruff: SetFamily,
    pub puff: SetFamily,
    pub puff_seed: u64,
    /// `(ell, ell k)`-CFF whose indicator rows carry the dominating entries.
    pub cff: SetFamily,
    pub field: GaussianField,
    pub inf: f64,
    pub blocks: usize,
    pub ruff_batch: usize,
    pub puff_batch: usize,
    pub cff_batch: usize,
}

/// One query of the battery, in execution order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QueryId {
    Ruff { row: usize },
    Puff { weight: usize, row: usize },
    Gaussian { block: usize, row: usize },
}

/// Responses to a full battery.
#[derive(Clone, Debug)]
pub struct BatteryResponses {
    pub ruff: Vec<CountEstimate>,
    /// `count(p) = max_w nz`.
    pub puff: Vec<usize>,
    /// `gaussian[block][row]`.
    pub gaussian: Vec<Vec<CountEstimate>>,
}

impl OneStagePlan {
    pub fn new(p: &Problem, cfg: &AlgoConfig, epsilon: f64, seed: u64, blocks: Option<usize>) -> Result<Self> {
        check_epsilon(epsilon)?;
        cfg.validate()?;
        let inf = inf_value(p)?;
        let ruff = support::ruff_for(p, cfg, rng::derive_seed(seed, "support-ruff"))?;
        let puff_seed = rng::derive_seed(seed, "support-puff-0");
        let puff = support::puff_for(p, cfg, puff_seed)?;
        let cff = if p.ell == 1 {
            SetFamily::new(1, vec![Vec::new(); p.n], FamilyKind::Custom)?
        } else {
            let t = (p.ell * p.k).min(p.n.saturating_sub(p.ell)).max(1);
            setfam::construct_cff(p.n, p.ell, t, rng::derive_seed(seed, "one-stage-cff"), &cfg.families)?
        };
        let blocks = blocks.unwrap_or_else(|| cfg.gaussian_labels(p.k, epsilon));
        Ok(Self {
            problem: *p,
            ruff_batch: cfg.batch(p.ell, ruff.m()),
            puff_batch: cfg.batch(p.ell, puff.m() * (p.ell + 1)),
            cff_batch: cfg.batch(p.ell, cff.m() * blocks),
            ruff,
            puff,
            puff_seed,
            cff,
            field: gaussian_field(seed),
            inf,
            blocks,
        })
    }

    pub fn query_count(&self) -> usize {
        self.ruff.m() + self.puff.m() * (self.problem.ell + 1) + self.cff.m() * self.blocks
    }

    /// All query ids in execution order.
    pub fn ids(&self) -> impl Iterator<Item = QueryId> + '_ {
        let ruff = (0..self.ruff.m()).map(|row| QueryId::Ruff { row });
        let puff = (0..self.puff.m())
            .flat_map(move |row| (0..=self.problem.ell).map(move |weight| QueryId::Puff { weight, row }));
        let gauss = (0..self.blocks).flat_map(move |block| (0..self.cff.m()).map(move |row| QueryId::Gaussian { block, row }));
        ruff.chain(puff).chain(gauss)
    }

    /// Coordinate `j` of query `id`, given the rows' member lists.
    fn entry(&self, id: QueryId, members: &Members, j: usize) -> f64 {
        let has = |rows: &[Vec<usize>], r: usize| rows[r].binary_search(&j).is_ok();
        match id {
            QueryId::Ruff { row } => has(&members.ruff, row) as u8 as f64,
            QueryId::Puff { weight, row } => {
                if has(&members.puff, row) {
                    support::puff_weights(self.puff_seed).entry(weight as u64, row as u64, j)
                } else {
                    0.0
                }
            }
            QueryId::Gaussian { block, row } => {
                if has(&members.cff, row) {
                    self.inf
                } else {
                    self.field.entry(block as u64, row as u64, j)
                }
            }
        }
    }

    fn members(&self) -> Members {
        Members { ruff: self.ruff.row_members(), puff: self.puff.row_members(), cff: self.cff.row_members() }
    }

    fn batch(&self, id: QueryId) -> (usize, Phase) {
        match id {
            QueryId::Ruff { .. } => (self.ruff_batch, Phase::SupportRuff),
            QueryId::Puff { .. } => (self.puff_batch, Phase::SupportPuff),
            QueryId::Gaussian { .. } => (self.cff_batch, Phase::Recovery),
        }
    }

    /// Every query as a dense vector with its batchsize; intended for small
    /// instances and audits.
    pub fn materialize(&self) -> Vec<(QueryId, Vec<f64>, usize)> {
        let members = self.members();
        self.ids()
            .map(|id| (id, (0..self.problem.n).map(|j| self.entry(id, &members, j)).collect(), self.batch(id).0))
            .collect()
    }

    /// Issue the whole battery.
    pub fn execute(&self, oracle: &mut dyn CountOracle) -> BatteryResponses {
        let members = self.members();
        let ell = self.problem.ell;
        let mut out = BatteryResponses {
            ruff: Vec::with_capacity(self.ruff.m()),
            puff: vec![0; self.puff.m()],
            gaussian: vec![Vec::with_capacity(self.cff.m()); self.blocks],
        };
        for id in self.ids() {
            let (batch, phase) = self.batch(id);
            let c = oracle.counts_by(&|j| self.entry(id, &members, j), batch, phase);
            match id {
                QueryId::Ruff { .. } => out.ruff.push(c),
                QueryId::Puff { row, weight } => {
                    debug_assert!(weight <= ell);
                    out.puff[row] = out.puff[row].max(c.nz);
                }
                QueryId::Gaussian { block, .. } => out.gaussian[block].push(c),
            }
        }
        out
    }

    /// For each component, the first CFF row whose members inside `U` are
    /// exactly the other components' representatives.
    pub fn isolating_rows(&self, x: &SupportMatrix, reps: &[usize]) -> Result<Vec<usize>> {
        let mut in_u = vec![false; x.n()];
        x.union().iter().for_each(|&i| in_u[i] = true);
        let rows = self.cff.row_members();
        (0..self.problem.ell)
            .map(|t| {
                let mut want: Vec<usize> = (0..reps.len()).filter(|&s| s != t).map(|s| reps[s]).collect();
                want.sort_unstable();
                rows.iter()
                    .position(|r| r.iter().copied().filter(|&i| in_u[i]).eq(want.iter().copied()))
                    .ok_or_else(|| Error::ConstructionFailure(format!("no CFF row isolates the representatives other than component {t}")))
            })
            .collect()
    }

    /// Decode supports, signs and per-component labels from the responses.
    pub fn decode(&self, r: &BatteryResponses) -> Result<RecoveryResult> {
        let p = &self.problem;
        let s_sizes = support::s_sizes_from_counts(&self.ruff, &r.ruff, p.ell)?;
        let unions = support::union_sizes_from_counts(&self.puff, &s_sizes, &r.puff)?;
        let gram = support::build_gram(&s_sizes, &unions)?;
        let x = support::factorize_support(&gram, p.ell)?;
        let reps = x.representatives()?;
        let signs = support::rep_signs_from_counts(&x, &self.ruff, &r.ruff)?;
        let rows = self.isolating_rows(&x, &reps)?;
        let mut estimates = Vec::with_capacity(p.ell);
        let mut labels = Vec::with_capacity(p.ell);
        for t in 0..p.ell {
            let row = rows[t];
            let mut lqs = LabeledQuerySet::new(p.n, x.column(t));
            for (block, counts) in r.gaussian.iter().enumerate() {
                let y = decode_modified(counts[row], &signs, t);
                lqs.push_by(&|j| self.field.entry(block as u64, row as u64, j), y)?;
            }
            estimates.push(onebit_estimate(&lqs, p.k)?);
            labels.push(lqs.labels().to_vec());
        }
        Ok(RecoveryResult { estimates, support: x, reps, signs, labels, ledger: QueryLedger::default() })
    }
}

struct Members {
    ruff: Vec<Vec<usize>>,
    puff: Vec<Vec<usize>>,
    cff: Vec<Vec<usize>>,
}

/// Single-stage recovery; construction failures re-plan the battery with a
/// fresh seed.
pub fn one_stage_recover(
    oracle: &mut dyn CountOracle,
    p: &Problem,
    cfg: &AlgoConfig,
    epsilon: f64,
    seed: u64,
    blocks: Option<usize>,
) -> Result<RecoveryResult> {
    let start = oracle.ledger().clone();
    let mut attempt = 0;
    loop {
        let plan_seed = if attempt == 0 { seed } else { rng::derive_seed(seed, &format!("replan-{attempt}")) };
        let plan = OneStagePlan::new(p, cfg, epsilon, plan_seed, blocks)?;
        let responses = plan.execute(oracle);
        match plan.decode(&responses) {
            Err(Error::ConstructionFailure(msg)) if attempt < cfg.max_reseeds => {
                log::info!("re-planning single-stage battery after: {msg}");
                attempt += 1;
            }
            r => {
                let mut r = r?;
                r.ledger = oracle.ledger().since(&start);
                return Ok(r);
            }
        }
    }
}
