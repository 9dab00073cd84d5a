//! Randomized set-family designs (RUFF, UFF, PUFF, general CFF) and their
//! exhaustive verifiers.
//!
//! A family holds `n` subsets of the alphabet `[m]`. Its indicator matrix is
//! `m x n` with column `j` the indicator of `H_j`; the matrix rows are what
//! get issued as oracle queries.

use std::fmt;
use std::io::{BufRead, Write};

use itertools::Itertools;
use rand::Rng;

use crate::error::{Error, Result};
use crate::params::FamilyConstants;
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FamilyKind {
    /// `(d, t, alpha)`-robust union-free family.
    Ruff { d: usize, t: usize, alpha: f64 },
    /// `(r, t)`-cover-free family.
    Cff { r: usize, t: usize },
    /// Any other family (hand-built fixtures, degenerate batteries).
    Custom,
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FamilyKind::Ruff { d, t, alpha } => write!(f, "ruff {d} {t} {alpha}"),
            FamilyKind::Cff { r, t } => write!(f, "cff {r} {t}"),
            FamilyKind::Custom => write!(f, "custom"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SetFamily {
    m: usize,
    sets: Vec<Vec<usize>>,
    kind: FamilyKind,
}

impl SetFamily {
    /// Build a family, sorting and deduplicating every set.
    pub fn new(m: usize, sets: Vec<Vec<usize>>, kind: FamilyKind) -> Result<Self> {
        let mut sets = sets;
        for (j, set) in sets.iter_mut().enumerate() {
            set.sort_unstable();
            set.dedup();
            if let Some(&bad) = set.iter().find(|&&e| e >= m) {
                return Err(Error::InvalidParameter(format!(
                    "set {j} contains {bad}, outside alphabet of size {m}"
                )));
            }
        }
        if let FamilyKind::Ruff { d, .. } = kind {
            if let Some((j, s)) = sets.iter().enumerate().find(|(_, s)| s.len() != d) {
                return Err(Error::InvalidParameter(format!(
                    "RUFF set {j} has {} elements, expected d = {d}",
                    s.len()
                )));
            }
        }
        Ok(Self { m, sets, kind })
    }

    /// `n` independent uniformly random `d`-subsets of `[m]`.
    pub fn random_uniform(n: usize, m: usize, d: usize, kind: FamilyKind, seed: u64) -> Result<Self> {
        if d > m {
            return Err(Error::InvalidParameter(format!("d = {d} exceeds m = {m}")));
        }
        let mut rng = rng::substream(seed, "setfam-uniform");
        // Partial Fisher-Yates over a persistent permutation: each prefix of
        // length d is a uniform d-subset regardless of the pool's prior order.
        let mut pool: Vec<usize> = (0..m).collect();
        let sets = (0..n)
            .map(|_| {
                for i in 0..d {
                    let j = rng.random_range(i..m);
                    pool.swap(i, j);
                }
                pool[..d].to_vec()
            })
            .collect();
        Self::new(m, sets, kind)
    }

    pub fn n(&self) -> usize {
        self.sets.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn sets(&self) -> &[Vec<usize>] {
        &self.sets
    }

    pub fn set(&self, j: usize) -> &[usize] {
        &self.sets[j]
    }

    /// For each alphabet element (matrix row), the sorted list of sets
    /// (matrix columns) containing it.
    pub fn row_members(&self) -> Vec<Vec<usize>> {
        let mut rows = vec![Vec::new(); self.m];
        for (j, set) in self.sets.iter().enumerate() {
            for &e in set {
                rows[e].push(j);
            }
        }
        rows
    }

    /// The `m x n` 0/1 indicator matrix, row-major.
    pub fn indicator_matrix(&self) -> Vec<Vec<u8>> {
        let mut a = vec![vec![0u8; self.n()]; self.m];
        for (j, set) in self.sets.iter().enumerate() {
            for &e in set {
                a[e][j] = 1;
            }
        }
        a
    }

    /// Inverse of [`indicator_matrix`](Self::indicator_matrix).
    pub fn from_indicator(a: &[Vec<u8>], kind: FamilyKind) -> Result<Self> {
        let m = a.len();
        let n = a.first().map_or(0, Vec::len);
        if a.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidParameter("ragged indicator matrix".into()));
        }
        let sets = (0..n)
            .map(|j| (0..m).filter(|&i| a[i][j] != 0).collect())
            .collect();
        Self::new(m, sets, kind)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {} {}", self.m, self.n(), self.kind)?;
        for set in &self.sets {
            writeln!(w, "{}", set.iter().join(" "))?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::parse(1, "empty family file"))??;
        let tok: Vec<&str> = header.split_whitespace().collect();
        if tok.len() < 3 {
            return Err(Error::parse(1, "expected `m n kind params`"));
        }
        let num = |i: usize| -> Result<usize> {
            tok.get(i)
                .ok_or_else(|| Error::parse(1, "missing header field"))?
                .parse()
                .map_err(|e| Error::parse(1, format!("{e}")))
        };
        let m = num(0)?;
        let n = num(1)?;
        let kind = match tok[2] {
            "ruff" => FamilyKind::Ruff {
                d: num(3)?,
                t: num(4)?,
                alpha: tok
                    .get(5)
                    .ok_or_else(|| Error::parse(1, "missing alpha"))?
                    .parse()
                    .map_err(|e| Error::parse(1, format!("{e}")))?,
            },
            "cff" => FamilyKind::Cff { r: num(3)?, t: num(4)? },
            "custom" => FamilyKind::Custom,
            other => return Err(Error::parse(1, format!("unknown family kind `{other}`"))),
        };
        let mut sets = Vec::with_capacity(n);
        for (i, line) in lines.enumerate() {
            let line = line?;
            if sets.len() == n {
                if line.trim().is_empty() {
                    continue;
                }
                return Err(Error::parse(i + 2, "more sets than declared"));
            }
            let set = line
                .split_whitespace()
                .map(|s| s.parse::<usize>().map_err(|e| Error::parse(i + 2, format!("{e}"))))
                .collect::<Result<Vec<_>>>()?;
            sets.push(set);
        }
        if sets.len() != n {
            return Err(Error::parse(sets.len() + 2, format!("expected {n} sets, found {}", sets.len())));
        }
        Self::new(m, sets, kind)
    }
}

fn log_n(n: usize) -> f64 {
    (n.max(2) as f64).ln()
}

/// RUFF set size `d = ceil(c_d t ln n / alpha)`.
pub fn ruff_set_size(n: usize, t: usize, alpha: f64, c: &FamilyConstants) -> usize {
    (c.c_d * t as f64 * log_n(n) / alpha).ceil() as usize
}

/// RUFF alphabet size `m = ceil(c_m t^2 ln n / alpha^2)`.
pub fn ruff_alphabet(n: usize, t: usize, alpha: f64, c: &FamilyConstants) -> usize {
    (c.c_m * (t * t) as f64 * log_n(n) / (alpha * alpha)).ceil() as usize
}

/// CFF alphabet size: the larger of `c_c t^{r+1} ln n` and the explicit
/// union bound for the Bernoulli(1/(t+1)) design with failure target
/// `eta = n^-2`.
pub fn cff_alphabet(n: usize, r: usize, t: usize, c: &FamilyConstants) -> usize {
    let (nf, rf, tf) = (n.max(2) as f64, r as f64, t as f64);
    let shaped = c.c_c * tf.powi(r as i32 + 1) * log_n(n);
    let tr = tf + rf;
    let union_bound = std::f64::consts::E
        * (tf + 1.0).powi(r as i32)
        * (tr * (std::f64::consts::E * nf / tr).ln().max(0.0) + rf * tr.ln() + 2.0 * nf.ln());
    shaped.max(union_bound).ceil().max(1.0) as usize
}

/// Random `(d, t, alpha)`-RUFF candidate of size `n`; the property holds
/// with high probability but is not certified here.
pub fn construct_ruff(n: usize, t: usize, alpha: f64, seed: u64, c: &FamilyConstants) -> Result<SetFamily> {
    if n == 0 || t == 0 {
        return Err(Error::InvalidParameter("construct_ruff needs n >= 1 and t >= 1".into()));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0,1], got {alpha}")));
    }
    let d = ruff_set_size(n, t, alpha, c);
    let m = ruff_alphabet(n, t, alpha, c);
    SetFamily::random_uniform(n, m, d, FamilyKind::Ruff { d, t, alpha }, seed)
}

/// Random `(r, t)`-CFF candidate: every matrix entry i.i.d.
/// Bernoulli(1/(t+1)), `H_j` the rows holding a one in column `j`.
pub fn construct_cff(n: usize, r: usize, t: usize, seed: u64, c: &FamilyConstants) -> Result<SetFamily> {
    if r == 0 || t == 0 {
        return Err(Error::InvalidParameter("construct_cff needs r >= 1 and t >= 1".into()));
    }
    if n < r + t {
        return Err(Error::InvalidParameter(format!("construct_cff needs n >= r + t, got n = {n}, r + t = {}", r + t)));
    }
    let m = cff_alphabet(n, r, t, c);
    let p = 1.0 / (t as f64 + 1.0);
    let mut rng = rng::substream(seed, "setfam-cff");
    // Geometric gaps between successes reproduce an i.i.d. Bernoulli column.
    let log_q = (1.0 - p).ln();
    let sets = (0..n)
        .map(|_| {
            let mut set = Vec::new();
            let mut pos = 0usize;
            loop {
                let u: f64 = 1.0 - rng.random::<f64>();
                let gap = (u.ln() / log_q).floor();
                if !gap.is_finite() || pos as f64 + gap >= m as f64 {
                    break;
                }
                pos += gap as usize;
                set.push(pos);
                pos += 1;
            }
            set
        })
        .collect();
    SetFamily::new(m, sets, FamilyKind::Cff { r, t })
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc.saturating_mul((n - i) as u128) / (i as u128 + 1))
}

/// Fixed-width bitset over a small universe.
#[derive(Clone)]
struct Bits(Vec<u64>);

impl Bits {
    fn zeros(len: usize) -> Self {
        Bits(vec![0; len.div_ceil(64)])
    }
    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }
    fn or_assign(&mut self, o: &Bits) {
        self.0.iter_mut().zip(&o.0).for_each(|(a, b)| *a |= b);
    }
    fn count(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }
}

/// Exhaustive `(d, t, alpha)`-RUFF check: for every `t`-subset `T` and every
/// `j` outside it, `|H_j \ U_{i in T} H_i| > (1 - alpha) d`.
pub fn verify_ruff(f: &SetFamily, t: usize, alpha: f64, cap: u128) -> Result<bool> {
    let n = f.n();
    if n == 0 {
        return Ok(true);
    }
    let d = f.set(0).len();
    if f.sets().iter().any(|s| s.len() != d) {
        return Err(Error::InvalidParameter("verify_ruff needs equal-size sets".into()));
    }
    if t == 0 {
        return Err(Error::InvalidParameter("verify_ruff needs t >= 1".into()));
    }
    let required = binomial(n - 1, t).saturating_mul(n as u128);
    if required > cap {
        return Err(Error::BudgetExceeded { required, cap });
    }
    if t > n - 1 {
        return Ok(true);
    }
    let mut pos_in_j = vec![usize::MAX; f.m()];
    for j in 0..n {
        let hj = f.set(j);
        for (p, &e) in hj.iter().enumerate() {
            pos_in_j[e] = p;
        }
        // masks[i]: which elements of H_j are also in H_i.
        let masks: Vec<(usize, Bits)> = (0..n)
            .filter(|&i| i != j)
            .map(|i| {
                let mut b = Bits::zeros(d);
                for &e in f.set(i) {
                    if pos_in_j[e] != usize::MAX {
                        b.set(pos_in_j[e]);
                    }
                }
                (i, b)
            })
            .collect();
        let ok = masks.iter().combinations(t).all(|combo| {
            let mut cover = Bits::zeros(d);
            for (_, b) in combo {
                cover.or_assign(b);
            }
            (d - cover.count()) as f64 > (1.0 - alpha) * d as f64
        });
        for &e in hj {
            pos_in_j[e] = usize::MAX;
        }
        if !ok {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Exhaustive `(r, t)`-CFF check: for all disjoint `T1`, `T2` with
/// `|T1| = r`, `|T2| = t`, the intersection over `T1` is not covered by the
/// union over `T2`.
pub fn verify_cff(f: &SetFamily, r: usize, t: usize, cap: u128) -> Result<bool> {
    let n = f.n();
    if r == 0 || t == 0 || n < r + t {
        return Err(Error::InvalidParameter(format!(
            "verify_cff needs r, t >= 1 and n >= r + t (n = {n}, r = {r}, t = {t})"
        )));
    }
    let required = binomial(n, r).saturating_mul(binomial(n - r, t));
    if required > cap {
        return Err(Error::BudgetExceeded { required, cap });
    }
    let mut member = vec![false; f.m()];
    for t1 in (0..n).combinations(r) {
        let mut inter: Vec<usize> = f.set(t1[0]).to_vec();
        for &i in &t1[1..] {
            f.set(i).iter().for_each(|&e| member[e] = true);
            inter.retain(|&e| member[e]);
            f.set(i).iter().for_each(|&e| member[e] = false);
        }
        if inter.is_empty() {
            return Ok(false);
        }
        let mut pos = vec![usize::MAX; f.m()];
        for (p, &e) in inter.iter().enumerate() {
            pos[e] = p;
        }
        let masks: Vec<Bits> = (0..n)
            .filter(|i| !t1.contains(i))
            .map(|i| {
                let mut b = Bits::zeros(inter.len());
                for &e in f.set(i) {
                    if pos[e] != usize::MAX {
                        b.set(pos[e]);
                    }
                }
                b
            })
            .collect();
        let ok = masks.iter().combinations(t).all(|combo| {
            let mut cover = Bits::zeros(inter.len());
            for b in combo {
                cover.or_assign(b);
            }
            cover.count() < inter.len()
        });
        if !ok {
            return Ok(false);
        }
    }
    Ok(true)
}
