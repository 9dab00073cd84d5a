//! The mixture oracle, its simulator and the batched count estimator.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::rng;

/// Relative tolerance under which a projection is treated as exactly zero.
///
/// Grid instances produce cancellations such as `0.6 * 0.8 - 0.8 * 0.6` that
/// floating point leaves at `1e-17` instead of zero.
pub const ZERO_TOL: f64 = 1e-10;

/// `+1` for `x >= 0`, `-1` otherwise.
#[inline]
pub fn sign(x: f64) -> i8 {
    if x >= 0.0 {
        1
    } else {
        -1
    }
}

/// A real vector stored by its nonzero coordinates (ascending).
#[derive(Clone, Debug, PartialEq)]
pub struct SparseVector {
    n: usize,
    entries: Vec<(usize, f64)>,
    norm: f64,
}

impl SparseVector {
    /// Zero values are dropped; repeated or out-of-range coordinates are errors.
    pub fn new(n: usize, entries: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut entries: Vec<(usize, f64)> = entries.into_iter().filter(|e| e.1 != 0.0).collect();
        entries.sort_by_key(|e| e.0);
        if let Some(&(i, _)) = entries.iter().find(|e| e.0 >= n) {
            return Err(Error::InvalidParameter(format!("coordinate {i} outside dimension {n}")));
        }
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidParameter("repeated coordinate".into()));
        }
        if entries.iter().any(|e| !e.1.is_finite()) {
            return Err(Error::InvalidParameter("non-finite entry".into()));
        }
        let norm = entries.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt();
        Ok(Self { n, entries, norm })
    }

    pub fn from_dense(v: &[f64]) -> Self {
        Self::new(v.len(), v.iter().copied().enumerate()).expect("dense input is well formed")
    }

    pub fn zeros(n: usize) -> Self {
        Self { n, entries: Vec::new(), norm: 0.0 }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn support(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.0).collect()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.entries
            .binary_search_by_key(&i, |e| e.0)
            .map_or(0.0, |p| self.entries[p].1)
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.n];
        for &(i, x) in &self.entries {
            v[i] = x;
        }
        v
    }

    pub fn is_unit(&self) -> bool {
        (self.norm - 1.0).abs() <= 1e-12
    }

    /// This vector scaled to unit norm (the zero vector stays zero).
    pub fn normalized(&self) -> Self {
        if self.norm == 0.0 {
            return self.clone();
        }
        let entries = self.entries.iter().map(|&(i, x)| (i, x / self.norm)).collect::<Vec<_>>();
        let norm = entries.iter().map(|e: &(usize, f64)| e.1 * e.1).sum::<f64>().sqrt();
        Self { n: self.n, entries, norm }
    }

    pub fn neg(&self) -> Self {
        Self {
            n: self.n,
            entries: self.entries.iter().map(|&(i, x)| (i, -x)).collect(),
            norm: self.norm,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, e| m.max(e.1.abs()))
    }

    /// Euclidean distance to `other` (same dimension assumed).
    pub fn distance(&self, other: &SparseVector) -> f64 {
        let (mut a, mut b) = (self.entries.iter().peekable(), other.entries.iter().peekable());
        let mut s = 0.0;
        loop {
            match (a.peek(), b.peek()) {
                (Some(&&(i, x)), Some(&&(j, y))) => {
                    if i == j {
                        s += (x - y) * (x - y);
                        a.next();
                        b.next();
                    } else if i < j {
                        s += x * x;
                        a.next();
                    } else {
                        s += y * y;
                        b.next();
                    }
                }
                (Some(&&(_, x)), None) => {
                    s += x * x;
                    a.next();
                }
                (None, Some(&&(_, y))) => {
                    s += y * y;
                    b.next();
                }
                (None, None) => break,
            }
        }
        s.sqrt()
    }

    /// `<v, self>` with `v` given coordinatewise, snapped to zero under
    /// [`ZERO_TOL`] relative cancellation.
    pub fn project_by(&self, v: &dyn Fn(usize) -> f64) -> f64 {
        let (mut s, mut mag) = (0.0, 0.0);
        for &(i, x) in &self.entries {
            let t = v(i) * x;
            s += t;
            mag += t.abs();
        }
        if s.abs() <= ZERO_TOL * mag {
            0.0
        } else {
            s
        }
    }

    pub fn project(&self, v: &[f64]) -> f64 {
        self.project_by(&|i| v[i])
    }
}

impl fmt::Display for SparseVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.entries.len())?;
        for &(i, x) in &self.entries {
            write!(f, " {i}:{x}")?;
        }
        Ok(())
    }
}

/// What an algorithm is told about the hidden instance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Problem {
    pub n: usize,
    pub ell: usize,
    pub k: usize,
    /// Lower bound on the nonzero magnitudes; sizes the dominating entries.
    pub mu_min: f64,
    /// Precision grid, 0 when unconstrained.
    pub delta: f64,
}

/// The hidden classifiers held by the simulator.
#[derive(Clone, Debug, PartialEq)]
pub struct MixtureInstance {
    n: usize,
    components: Vec<SparseVector>,
    delta: f64,
    mu_min: f64,
}

impl MixtureInstance {
    /// Components are normalized to unit norm. With `delta > 0` every
    /// normalized entry must be an integer multiple of `delta`.
    pub fn new(components: Vec<SparseVector>, delta: f64) -> Result<Self> {
        let n = components
            .first()
            .ok_or_else(|| Error::InvalidParameter("an instance needs at least one component".into()))?
            .n();
        if components.iter().any(|c| c.n() != n) {
            return Err(Error::InvalidParameter("components of different dimension".into()));
        }
        if components.iter().any(|c| c.norm() == 0.0) {
            return Err(Error::InvalidParameter("zero component".into()));
        }
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::InvalidParameter(format!("delta must be >= 0, got {delta}")));
        }
        let components: Vec<SparseVector> = components.iter().map(SparseVector::normalized).collect();
        if delta > 0.0 {
            for (t, c) in components.iter().enumerate() {
                for &(i, x) in c.entries() {
                    let q = x / delta;
                    if (q - q.round()).abs() > 1e-9 {
                        return Err(Error::InvalidParameter(format!(
                            "component {t} entry {i} = {x} is not a multiple of delta = {delta}"
                        )));
                    }
                }
            }
        }
        let mu_min = components
            .iter()
            .flat_map(|c| c.entries().iter().map(|e| e.1.abs()))
            .fold(f64::INFINITY, f64::min);
        Ok(Self { n, components, delta, mu_min })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn ell(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[SparseVector] {
        &self.components
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn mu_min(&self) -> f64 {
        self.mu_min
    }

    /// Largest support size over the components.
    pub fn sparsity(&self) -> usize {
        self.components.iter().map(|c| c.entries().len()).max().unwrap_or(0)
    }

    pub fn problem(&self, k: usize) -> Problem {
        Problem { n: self.n, ell: self.ell(), k, mu_min: self.mu_min, delta: self.delta }
    }

    /// Exact `(pos, neg, z)` for query `v`.
    pub fn exact_counts_by(&self, v: &dyn Fn(usize) -> f64) -> CountEstimate {
        let (mut pos, mut neg, mut z) = (0, 0, 0);
        for c in &self.components {
            let p = c.project_by(v);
            if p > 0.0 {
                pos += 1;
            } else if p < 0.0 {
                neg += 1;
            } else {
                z += 1;
            }
        }
        CountEstimate { pos, neg, z, nz: pos + neg }
    }

    pub fn exact_counts(&self, v: &[f64]) -> Result<CountEstimate> {
        check_dim(self.n, v.len())?;
        Ok(self.exact_counts_by(&|i| v[i]))
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {} {}", self.n, self.ell(), self.delta)?;
        for c in &self.components {
            writeln!(w, "{c}")?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty()));
        let (ln, header) = lines.next().ok_or_else(|| Error::parse(1, "empty instance file"))?;
        let header = header?;
        let tok: Vec<&str> = header.split_whitespace().collect();
        if tok.len() != 3 {
            return Err(Error::parse(ln, "expected `n ell delta`"));
        }
        let n: usize = tok[0].parse().map_err(|e| Error::parse(ln, format!("n: {e}")))?;
        let ell: usize = tok[1].parse().map_err(|e| Error::parse(ln, format!("ell: {e}")))?;
        let delta: f64 = tok[2].parse().map_err(|e| Error::parse(ln, format!("delta: {e}")))?;
        let mut components = Vec::with_capacity(ell);
        for _ in 0..ell {
            let (ln, line) = lines
                .next()
                .ok_or_else(|| Error::parse(ln + components.len() + 1, "missing component line"))?;
            let line = line?;
            let mut tok = line.split_whitespace();
            let k: usize = tok
                .next()
                .ok_or_else(|| Error::parse(ln, "empty component line"))?
                .parse()
                .map_err(|e| Error::parse(ln, format!("k: {e}")))?;
            let entries = tok
                .map(|t| {
                    let (i, x) = t.split_once(':').ok_or_else(|| Error::parse(ln, format!("bad entry `{t}`")))?;
                    let i: usize = i.parse().map_err(|e| Error::parse(ln, format!("index: {e}")))?;
                    let x: f64 = x.parse().map_err(|e| Error::parse(ln, format!("value: {e}")))?;
                    Ok((i, x))
                })
                .collect::<Result<Vec<_>>>()?;
            if entries.len() != k {
                return Err(Error::parse(ln, format!("declared {k} entries, found {}", entries.len())));
            }
            components.push(SparseVector::new(n, entries).map_err(|e| Error::parse(ln, e.to_string()))?);
        }
        Self::new(components, delta)
    }
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// Number of components with positive, negative, zero and nonzero projection.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct CountEstimate {
    pub pos: usize,
    pub neg: usize,
    pub z: usize,
    pub nz: usize,
}

impl CountEstimate {
    pub fn new(pos: usize, neg: usize, z: usize) -> Self {
        Self { pos, neg, z, nz: pos + neg }
    }

    pub fn ell(&self) -> usize {
        self.pos + self.neg + self.z
    }

    /// Estimator of Algorithm "Query" from the response sums: `sum_y` and
    /// `sum_z` over the `batch` repetitions of `v` and `-v`, and `neg_y` the
    /// number of `-1` responses to `v`.
    pub fn from_sums(ell: usize, batch: usize, sum_y: i64, sum_z: i64, neg_y: usize) -> Self {
        let (l, t) = (ell as f64, batch as f64);
        let z_hat = (l * (sum_y + sum_z) as f64 / (2.0 * t)).round();
        let neg_hat = (l * neg_y as f64 / t).round();
        let z = z_hat.clamp(0.0, l) as usize;
        let neg = neg_hat.clamp(0.0, (ell - z) as f64) as usize;
        let nz = ell - z;
        Self { pos: nz - neg, neg, z, nz }
    }

    pub fn response_set(&self) -> ResponseSet {
        ResponseSet { pos: self.pos, neg: self.neg, zero: self.z }
    }
}

/// Multiset of component responses over `{-1, 0, +1}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ResponseSet {
    pub pos: usize,
    pub neg: usize,
    pub zero: usize,
}

impl ResponseSet {
    pub fn len(&self) -> usize {
        self.pos + self.neg + self.zero
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn count(&self, symbol: i8) -> usize {
        match symbol {
            1 => self.pos,
            -1 => self.neg,
            0 => self.zero,
            _ => 0,
        }
    }

    pub fn contains(&self, symbol: i8) -> bool {
        self.count(symbol) > 0
    }

    /// Distinct symbols, ascending.
    pub fn distinct(&self) -> Vec<i8> {
        [-1, 0, 1].into_iter().filter(|&s| self.contains(s)).collect()
    }

    /// All symbols with multiplicity, ascending.
    pub fn symbols(&self) -> Vec<i8> {
        let mut v = vec![-1; self.neg];
        v.extend(std::iter::repeat_n(0, self.zero));
        v.extend(std::iter::repeat_n(1, self.pos));
        v
    }

    /// The multiset with one copy of `symbol` removed.
    pub fn without(&self, symbol: i8) -> Option<ResponseSet> {
        let mut r = *self;
        let slot = match symbol {
            1 => &mut r.pos,
            -1 => &mut r.neg,
            0 => &mut r.zero,
            _ => return None,
        };
        *slot = slot.checked_sub(1)?;
        Some(r)
    }
}

impl fmt::Display for ResponseSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.symbols().iter().map(|x| format!("{x:+}")).collect();
        write!(f, "{{{}}}", s.join(","))
    }
}

pub fn response_set(c: CountEstimate) -> ResponseSet {
    c.response_set()
}

/// Query phases tracked by the ledger.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Phase {
    SupportRuff,
    SupportPuff,
    Sign,
    Recovery,
    Align,
}

impl Phase {
    pub const ALL: [Phase; 5] = [Phase::SupportRuff, Phase::SupportPuff, Phase::Sign, Phase::Recovery, Phase::Align];

    pub fn label(self) -> &'static str {
        match self {
            Phase::SupportRuff => "support-ruff",
            Phase::SupportPuff => "support-puff",
            Phase::Sign => "sign",
            Phase::Recovery => "recovery",
            Phase::Align => "align",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Oracle-call accounting.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct QueryLedger {
    total: u64,
    phases: BTreeMap<Phase, u64>,
}

impl QueryLedger {
    pub fn record(&mut self, phase: Phase, calls: u64) {
        self.total += calls;
        *self.phases.entry(phase).or_insert(0) += calls;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn phase(&self, phase: Phase) -> u64 {
        self.phases.get(&phase).copied().unwrap_or(0)
    }

    pub fn phases(&self) -> impl Iterator<Item = (Phase, u64)> + '_ {
        self.phases.iter().map(|(&p, &c)| (p, c))
    }

    pub fn merge(&mut self, other: &QueryLedger) {
        for (p, c) in other.phases() {
            self.record(p, c);
        }
    }

    /// Calls recorded since `earlier`, a previous snapshot of this ledger.
    pub fn since(&self, earlier: &QueryLedger) -> QueryLedger {
        let mut d = QueryLedger::default();
        for (p, c) in self.phases() {
            let prev = earlier.phase(p);
            if c > prev {
                d.record(p, c - prev);
            }
        }
        d
    }
}

/// Anything that answers batched count queries against a hidden mixture.
pub trait CountOracle {
    fn n(&self) -> usize;
    fn ell(&self) -> usize;

    /// Count estimate for the query whose coordinate `i` is `v(i)`, using
    /// `2 * batch` oracle calls.
    fn counts_by(&mut self, v: &dyn Fn(usize) -> f64, batch: usize, phase: Phase) -> CountEstimate;

    fn ledger(&self) -> &QueryLedger;

    fn counts(&mut self, v: &[f64], batch: usize, phase: Phase) -> Result<CountEstimate> {
        check_dim(self.n(), v.len())?;
        Ok(self.counts_by(&|i| v[i], batch, phase))
    }
}

/// Simulated mixture oracle with a seeded stream and a ledger.
#[derive(Clone, Debug)]
pub struct Simulator {
    inst: MixtureInstance,
    rng: ChaCha8Rng,
    ledger: QueryLedger,
}

impl Simulator {
    pub fn new(inst: MixtureInstance, seed: u64) -> Self {
        Self { inst, rng: rng::substream(seed, "oracle"), ledger: QueryLedger::default() }
    }

    pub fn instance(&self) -> &MixtureInstance {
        &self.inst
    }

    /// One oracle call: a uniformly chosen component's sign on `v`.
    pub fn respond(&mut self, v: &[f64], phase: Phase) -> Result<i8> {
        check_dim(self.inst.n(), v.len())?;
        let j = self.rng.random_range(0..self.inst.ell());
        self.ledger.record(phase, 1);
        Ok(sign(self.inst.components[j].project(v)))
    }

    /// Algorithm "Query" via `2 * batch` literal calls to [`respond`](Self::respond).
    pub fn estimate_counts_naive(&mut self, v: &[f64], batch: usize, phase: Phase) -> Result<CountEstimate> {
        if batch == 0 {
            return Err(Error::InvalidParameter("batchsize must be >= 1".into()));
        }
        let minus: Vec<f64> = v.iter().map(|x| -x).collect();
        let (mut sum_y, mut sum_z, mut neg_y) = (0i64, 0i64, 0usize);
        for _ in 0..batch {
            let y = self.respond(v, phase)?;
            sum_y += y as i64;
            neg_y += (y < 0) as usize;
            sum_z += self.respond(&minus, phase)? as i64;
        }
        Ok(CountEstimate::from_sums(self.inst.ell(), batch, sum_y, sum_z, neg_y))
    }

    fn binomial(&mut self, trials: usize, successes: usize) -> usize {
        let ell = self.inst.ell();
        if successes == 0 {
            0
        } else if successes == ell {
            trials
        } else {
            Binomial::new(trials as u64, successes as f64 / ell as f64)
                .expect("probability lies in (0,1)")
                .sample(&mut self.rng) as usize
        }
    }
}

impl CountOracle for Simulator {
    fn n(&self) -> usize {
        self.inst.n()
    }

    fn ell(&self) -> usize {
        self.inst.ell()
    }

    /// Same distribution as [`Simulator::estimate_counts_naive`]: the number
    /// of `-1` answers to `v` is Binomial(batch, neg/ell) and the number of
    /// `+1` answers to `-v` is Binomial(batch, (neg+z)/ell).
    fn counts_by(&mut self, v: &dyn Fn(usize) -> f64, batch: usize, phase: Phase) -> CountEstimate {
        let batch = batch.max(1);
        let exact = self.inst.exact_counts_by(v);
        let neg_y = self.binomial(batch, exact.neg);
        let plus_z = self.binomial(batch, exact.neg + exact.z);
        self.ledger.record(phase, 2 * batch as u64);
        let sum_y = batch as i64 - 2 * neg_y as i64;
        let sum_z = 2 * plus_z as i64 - batch as i64;
        CountEstimate::from_sums(self.inst.ell(), batch, sum_y, sum_z, neg_y)
    }

    fn ledger(&self) -> &QueryLedger {
        &self.ledger
    }
}

/// Brute-force oracle returning exact counts; records calls like the simulator.
#[derive(Clone, Debug)]
pub struct ExactOracle {
    inst: MixtureInstance,
    ledger: QueryLedger,
}

impl ExactOracle {
    pub fn new(inst: MixtureInstance) -> Self {
        Self { inst, ledger: QueryLedger::default() }
    }

    pub fn instance(&self) -> &MixtureInstance {
        &self.inst
    }
}

impl CountOracle for ExactOracle {
    fn n(&self) -> usize {
        self.inst.n()
    }

    fn ell(&self) -> usize {
        self.inst.ell()
    }

    fn counts_by(&mut self, v: &dyn Fn(usize) -> f64, batch: usize, phase: Phase) -> CountEstimate {
        self.ledger.record(phase, 2 * batch.max(1) as u64);
        self.inst.exact_counts_by(v)
    }

    fn ledger(&self) -> &QueryLedger {
        &self.ledger
    }
}

/// Smallest `T` with `4 exp(-T / (2 ell^2)) <= failure_budget / universe`.
pub fn default_batchsize(ell: usize, failure_budget: f64, universe: usize) -> usize {
    default_batchsize_with_slack(ell, failure_budget, universe, 1.0)
}

/// [`default_batchsize`] scaled by `slack` before rounding up.
pub fn default_batchsize_with_slack(ell: usize, failure_budget: f64, universe: usize, slack: f64) -> usize {
    let l = ell.max(1) as f64;
    let t = 2.0 * l * l * (4.0 * universe.max(1) as f64 / failure_budget).ln();
    ((slack * t).ceil() as usize).max(1)
}
