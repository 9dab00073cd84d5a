//! Support recovery for all components: `|S(i)|` from a RUFF battery,
//! `|S(i) u S(j)|` from weighted PUFF batteries, the Gram matrix
//! `Z = X X^T`, and its binary factorization.
//!
//! `S(i)` is the set of components whose support contains coordinate `i`,
//! and `U` the union of all supports.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::oracle::{CountEstimate, CountOracle, Phase, Problem};
use crate::params::AlgoConfig;
use crate::rng::{self, UniformField};
use crate::setfam::{self, FamilyKind, SetFamily};

/// `n x ell` binary support matrix, column `t` the support of component `t`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SupportMatrix {
    n: usize,
    ell: usize,
    x: Vec<Vec<u8>>,
}

impl SupportMatrix {
    pub fn from_rows(ell: usize, x: Vec<Vec<u8>>) -> Result<Self> {
        if x.iter().any(|r| r.len() != ell || r.iter().any(|&b| b > 1)) {
            return Err(Error::InvalidParameter("support rows must be binary of length ell".into()));
        }
        Ok(Self { n: x.len(), ell, x })
    }

    pub fn from_columns(n: usize, cols: &[Vec<usize>]) -> Result<Self> {
        let mut x = vec![vec![0u8; cols.len()]; n];
        for (t, col) in cols.iter().enumerate() {
            for &i in col {
                if i >= n {
                    return Err(Error::InvalidParameter(format!("coordinate {i} outside dimension {n}")));
                }
                x[i][t] = 1;
            }
        }
        Ok(Self { n, ell: cols.len(), x })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn get(&self, i: usize, t: usize) -> u8 {
        self.x[i][t]
    }

    pub fn rows(&self) -> &[Vec<u8>] {
        &self.x
    }

    pub fn column(&self, t: usize) -> Vec<usize> {
        (0..self.n).filter(|&i| self.x[i][t] == 1).collect()
    }

    pub fn columns(&self) -> Vec<Vec<usize>> {
        (0..self.ell).map(|t| self.column(t)).collect()
    }

    /// Coordinates in at least one support.
    pub fn union(&self) -> Vec<usize> {
        (0..self.n).filter(|&i| self.x[i].contains(&1)).collect()
    }

    pub fn gram(&self) -> GramMatrix {
        let mut z = vec![vec![0u32; self.n]; self.n];
        let u = self.union();
        for &i in &u {
            for &j in &u {
                z[i][j] = (0..self.ell).map(|t| (self.x[i][t] & self.x[j][t]) as u32).sum();
            }
        }
        GramMatrix { z }
    }

    /// `rep_t`: the smallest coordinate owned by column `t` alone.
    pub fn representatives(&self) -> Result<Vec<usize>> {
        (0..self.ell)
            .map(|t| {
                (0..self.n)
                    .find(|&i| self.x[i][t] == 1 && self.x[i].iter().map(|&b| b as usize).sum::<usize>() == 1)
                    .ok_or_else(|| {
                        Error::AssumptionViolated(format!("component {t} has no coordinate outside the other supports"))
                    })
            })
            .collect()
    }

    /// This matrix with columns permuted into ascending lexicographic order of
    /// their supports; equal canonical forms mean equal up to permutation.
    pub fn canonical(&self) -> SupportMatrix {
        let mut cols = self.columns();
        cols.sort();
        SupportMatrix::from_columns(self.n, &cols).expect("columns are in range")
    }

    pub fn same_up_to_permutation(&self, other: &SupportMatrix) -> bool {
        self.n == other.n && self.ell == other.ell && self.canonical() == other.canonical()
    }
}

/// `Z[i][j] = |S(i) n S(j)|`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GramMatrix {
    z: Vec<Vec<u32>>,
}

impl GramMatrix {
    pub fn new(z: Vec<Vec<u32>>) -> Result<Self> {
        let n = z.len();
        if z.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidParameter("Gram matrix must be square".into()));
        }
        for i in 0..n {
            for j in 0..n {
                if z[i][j] != z[j][i] {
                    return Err(Error::InvalidParameter(format!("Gram matrix asymmetric at ({i},{j})")));
                }
            }
        }
        Ok(Self { z })
    }

    pub fn n(&self) -> usize {
        self.z.len()
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.z[i][j]
    }

    pub fn rows(&self) -> &[Vec<u32>] {
        &self.z
    }
}

/// Clamped family parameters so batteries exist for every `n >= 1`.
fn ruff_t(p: &Problem) -> usize {
    (p.ell * p.k).min(p.n.saturating_sub(1)).max(1)
}

/// RUFF battery for `|S(i)|` and sign recovery.
pub fn ruff_for(p: &Problem, cfg: &AlgoConfig, seed: u64) -> Result<SetFamily> {
    setfam::construct_ruff(p.n, ruff_t(p), 0.5, seed, &cfg.families)
}

/// `(2, ell k)`-CFF battery for pairwise union sizes. Below three columns no
/// CFF exists; a single row holding every coordinate isolates the only pair.
pub fn puff_for(p: &Problem, cfg: &AlgoConfig, seed: u64) -> Result<SetFamily> {
    if p.n < 3 {
        return SetFamily::new(1, vec![vec![0]; p.n], FamilyKind::Custom);
    }
    let t = (p.ell * p.k).min(p.n - 2).max(1);
    setfam::construct_cff(p.n, 2, t, seed, &cfg.families)
}

fn member(row: &[usize], i: usize) -> bool {
    row.binary_search(&i).is_ok()
}

/// Count estimates for every indicator row of `family`.
pub fn query_rows(oracle: &mut dyn CountOracle, family: &SetFamily, batch: usize, phase: Phase) -> Vec<CountEstimate> {
    family
        .row_members()
        .iter()
        .map(|row| oracle.counts_by(&|i| if member(row, i) { 1.0 } else { 0.0 }, batch, phase))
        .collect()
}

/// `|S(i)|` from the RUFF row counts: `C_h` holds the coordinates for which at
/// least half of their rows have `nz >= h`, and `|S(i)| = h` on `C_h \ C_{h+1}`.
pub fn s_sizes_from_counts(ruff: &SetFamily, counts: &[CountEstimate], ell: usize) -> Result<Vec<usize>> {
    if counts.len() != ruff.m() {
        return Err(Error::DimensionMismatch { expected: ruff.m(), got: counts.len() });
    }
    let mut prev: Option<Vec<bool>> = None;
    let mut sizes = vec![0usize; ruff.n()];
    for h in 1..=ell {
        let c_h: Vec<bool> = ruff
            .sets()
            .iter()
            .map(|set| {
                let hits = set.iter().filter(|&&r| counts[r].nz >= h).count();
                !set.is_empty() && hits as f64 >= 0.5 * set.len() as f64
            })
            .collect();
        if let Some(prev) = &prev {
            if c_h.iter().zip(prev).any(|(&now, &before)| now && !before) {
                return Err(Error::EstimationFailure(format!("C_{h} is not contained in C_{}", h - 1)));
            }
        }
        for (i, &inside) in c_h.iter().enumerate() {
            if inside {
                sizes[i] = h;
            }
        }
        prev = Some(c_h);
    }
    Ok(sizes)
}

pub fn compute_s_sizes(oracle: &mut dyn CountOracle, ruff: &SetFamily, batch: usize) -> Result<Vec<usize>> {
    let counts = query_rows(oracle, ruff, batch, Phase::SupportRuff);
    s_sizes_from_counts(ruff, &counts, oracle.ell())
}

/// Uniform(0,1) weights of the `ell + 1` PUFF matrices `B^(w)`.
pub fn puff_weights(seed: u64) -> UniformField {
    UniformField::new(rng::derive_seed(seed, "puff-weights"))
}

/// `count(p) = max_w nz(B^(w)[p])` for every PUFF row `p`.
pub fn query_puff(
    oracle: &mut dyn CountOracle,
    puff: &SetFamily,
    weights: UniformField,
    batch: usize,
) -> Vec<usize> {
    let ell = oracle.ell();
    puff.row_members()
        .iter()
        .enumerate()
        .map(|(p, row)| {
            (0..=ell)
                .map(|w| {
                    let v = |i: usize| if member(row, i) { weights.entry(w as u64, p as u64, i) } else { 0.0 };
                    oracle.counts_by(&v, batch, Phase::SupportPuff).nz
                })
                .max()
                .unwrap_or(0)
        })
        .collect()
}

/// `|S(i) u S(j)|` for all pairs, backed by the isolated pairs inside `U`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnionSizes {
    s: Vec<usize>,
    pairs: HashMap<(usize, usize), usize>,
}

impl UnionSizes {
    pub fn get(&self, i: usize, j: usize) -> usize {
        let (si, sj) = (self.s[i], self.s[j]);
        if i == j || sj == 0 {
            si
        } else if si == 0 {
            sj
        } else {
            self.pairs[&(i.min(j), i.max(j))]
        }
    }

    pub fn s_sizes(&self) -> &[usize] {
        &self.s
    }
}

/// For every pair in `U`, the first PUFF row whose members inside `U` are
/// exactly that pair. Fails if any pair has none.
pub fn isolating_pair_rows(puff: &SetFamily, u: &[usize]) -> Result<HashMap<(usize, usize), usize>> {
    let mut in_u = vec![false; puff.n()];
    u.iter().for_each(|&i| in_u[i] = true);
    let mut rows = HashMap::new();
    for (p, row) in puff.row_members().iter().enumerate() {
        let hit: Vec<usize> = row.iter().copied().filter(|&i| in_u[i]).take(3).collect();
        if let [a, b] = hit[..] {
            rows.entry((a, b)).or_insert(p);
        }
    }
    for (x, &i) in u.iter().enumerate() {
        for &j in &u[x + 1..] {
            if !rows.contains_key(&(i, j)) {
                return Err(Error::ConstructionFailure(format!("no PUFF row isolates the pair ({i}, {j})")));
            }
        }
    }
    Ok(rows)
}

pub fn union_sizes_from_counts(puff: &SetFamily, s_sizes: &[usize], counts: &[usize]) -> Result<UnionSizes> {
    let u: Vec<usize> = (0..s_sizes.len()).filter(|&i| s_sizes[i] > 0).collect();
    let rows = isolating_pair_rows(puff, &u)?;
    let pairs = rows.into_iter().map(|(pair, p)| (pair, counts[p])).collect();
    Ok(UnionSizes { s: s_sizes.to_vec(), pairs })
}

pub fn compute_union_sizes(
    oracle: &mut dyn CountOracle,
    s_sizes: &[usize],
    puff: &SetFamily,
    weights: UniformField,
    batch: usize,
) -> Result<UnionSizes> {
    if s_sizes.len() != puff.n() {
        return Err(Error::DimensionMismatch { expected: puff.n(), got: s_sizes.len() });
    }
    // Fail before spending queries when this draw cannot isolate every pair.
    let u: Vec<usize> = (0..s_sizes.len()).filter(|&i| s_sizes[i] > 0).collect();
    isolating_pair_rows(puff, &u)?;
    let counts = query_puff(oracle, puff, weights, batch);
    union_sizes_from_counts(puff, s_sizes, &counts)
}

/// `Z[i][j] = |S(i)| + |S(j)| - |S(i) u S(j)|`.
pub fn build_gram(s_sizes: &[usize], unions: &UnionSizes) -> Result<GramMatrix> {
    let n = s_sizes.len();
    let mut z = vec![vec![0u32; n]; n];
    let u: Vec<usize> = (0..n).filter(|&i| s_sizes[i] > 0).collect();
    for &i in &u {
        for &j in &u {
            let inter = (s_sizes[i] + s_sizes[j]) as i64 - unions.get(i, j) as i64;
            if inter < 0 || inter as usize > s_sizes[i].min(s_sizes[j]) {
                return Err(Error::EstimationFailure(format!(
                    "inconsistent sizes at ({i},{j}): |S(i)| = {}, |S(j)| = {}, union = {}",
                    s_sizes[i],
                    s_sizes[j],
                    unions.get(i, j)
                )));
            }
            z[i][j] = inter as u32;
        }
    }
    GramMatrix::new(z)
}

/// Binary factorization `Z = X X^T` under the separability assumption:
/// coordinates with `Z[i][i] = 1` cluster by `Z[i][j] = 1` into one group per
/// component, and every other row is read off against the group
/// representatives. Columns are ordered by representative.
pub fn factorize_support(z: &GramMatrix, ell: usize) -> Result<SupportMatrix> {
    let n = z.n();
    let mut reps: Vec<usize> = Vec::new();
    for i in (0..n).filter(|&i| z.get(i, i) == 1) {
        if !reps.iter().any(|&r| z.get(i, r) == 1) {
            reps.push(i);
        }
    }
    if reps.len() != ell {
        return Err(Error::AssumptionViolated(format!(
            "found {} singleton clusters, expected {ell}",
            reps.len()
        )));
    }
    let x: Vec<Vec<u8>> = (0..n)
        .map(|i| reps.iter().map(|&r| z.get(i, r).min(1) as u8).collect())
        .collect();
    let x = SupportMatrix { n, ell, x };
    if x.gram() != *z {
        return Err(Error::EstimationFailure("Gram matrix has no consistent binary factorization".into()));
    }
    Ok(x)
}

/// Everything produced on the way to the support matrix.
#[derive(Clone, Debug)]
pub struct SupportRecovery {
    pub x: SupportMatrix,
    pub s_sizes: Vec<usize>,
    pub gram: GramMatrix,
    pub ruff: SetFamily,
    pub ruff_counts: Vec<CountEstimate>,
}

/// `|S(i)|` and the Gram matrix, with PUFF re-seeds on isolation failures.
pub fn estimate_gram(
    oracle: &mut dyn CountOracle,
    p: &Problem,
    cfg: &AlgoConfig,
    seed: u64,
) -> Result<(SetFamily, Vec<CountEstimate>, Vec<usize>, GramMatrix)> {
    let ruff = ruff_for(p, cfg, rng::derive_seed(seed, "support-ruff"))?;
    let (counts, s_sizes, gram) = estimate_gram_with(oracle, p, cfg, &ruff, seed)?;
    Ok((ruff, counts, s_sizes, gram))
}

/// [`estimate_gram`] with a caller-supplied RUFF.
pub fn estimate_gram_with(
    oracle: &mut dyn CountOracle,
    p: &Problem,
    cfg: &AlgoConfig,
    ruff: &SetFamily,
    seed: u64,
) -> Result<(Vec<CountEstimate>, Vec<usize>, GramMatrix)> {
    let counts = query_rows(oracle, ruff, cfg.batch(p.ell, ruff.m()), Phase::SupportRuff);
    let s_sizes = s_sizes_from_counts(ruff, &counts, p.ell)?;
    let mut attempt = 0;
    let unions = loop {
        let puff_seed = rng::derive_seed(seed, &format!("support-puff-{attempt}"));
        let puff = puff_for(p, cfg, puff_seed)?;
        let batch = cfg.batch(p.ell, puff.m() * (p.ell + 1));
        match compute_union_sizes(oracle, &s_sizes, &puff, puff_weights(puff_seed), batch) {
            Err(Error::ConstructionFailure(msg)) if attempt < cfg.max_reseeds => {
                log::info!("re-seeding PUFF after: {msg}");
                attempt += 1;
            }
            r => break r?,
        }
    };
    let gram = build_gram(&s_sizes, &unions)?;
    Ok((counts, s_sizes, gram))
}

pub fn recover_support(oracle: &mut dyn CountOracle, p: &Problem, cfg: &AlgoConfig, seed: u64) -> Result<SupportRecovery> {
    cfg.validate()?;
    let (ruff, ruff_counts, s_sizes, gram) = estimate_gram(oracle, p, cfg, seed)?;
    let x = factorize_support(&gram, p.ell)?;
    Ok(SupportRecovery { x, s_sizes, gram, ruff, ruff_counts })
}

/// For each column, the first RUFF row whose members inside `U` are exactly
/// `{rep_t}`.
pub fn isolating_rep_rows(x: &SupportMatrix, ruff: &SetFamily) -> Result<Vec<usize>> {
    let reps = x.representatives()?;
    let mut in_u = vec![false; x.n()];
    x.union().iter().for_each(|&i| in_u[i] = true);
    let rows = ruff.row_members();
    reps.iter()
        .map(|&r| {
            ruff.set(r)
                .iter()
                .copied()
                .find(|&p| rows[p].iter().all(|&i| i == r || !in_u[i]))
                .ok_or_else(|| Error::ConstructionFailure(format!("no RUFF row isolates coordinate {r}")))
        })
        .collect()
}

/// Sign of each component at its representative: `+1` iff the isolating
/// row's query has a positive response.
pub fn rep_signs_from_counts(x: &SupportMatrix, ruff: &SetFamily, counts: &[CountEstimate]) -> Result<Vec<i8>> {
    Ok(isolating_rep_rows(x, ruff)?
        .into_iter()
        .map(|p| if counts[p].pos > 0 { 1 } else { -1 })
        .collect())
}

/// Compute-sign with fresh queries on the isolating rows of `ruff`.
pub fn recover_rep_signs(
    oracle: &mut dyn CountOracle,
    x: &SupportMatrix,
    ruff: &SetFamily,
    batch: usize,
) -> Result<Vec<i8>> {
    let rows = ruff.row_members();
    isolating_rep_rows(x, ruff)?
        .into_iter()
        .map(|p| {
            let row = &rows[p];
            let c = oracle.counts_by(&|i| if member(row, i) { 1.0 } else { 0.0 }, batch, Phase::Sign);
            Ok(if c.pos > 0 { 1 } else { -1 })
        })
        .collect()
}

/// [`recover_rep_signs`], drawing a fresh RUFF when `ruff` has no isolating
/// row for some representative.
pub fn recover_rep_signs_retrying(
    oracle: &mut dyn CountOracle,
    x: &SupportMatrix,
    ruff: &SetFamily,
    p: &Problem,
    cfg: &AlgoConfig,
    seed: u64,
) -> Result<Vec<i8>> {
    let batch = cfg.batch(p.ell, p.ell);
    let mut attempt = 0;
    let mut fam = ruff.clone();
    loop {
        match recover_rep_signs(oracle, x, &fam, batch) {
            Err(Error::ConstructionFailure(msg)) if attempt < cfg.max_reseeds => {
                log::info!("re-seeding sign RUFF after: {msg}");
                attempt += 1;
                fam = ruff_for(p, cfg, rng::derive_seed(seed, &format!("sign-ruff-{attempt}")))?;
            }
            r => return r,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{ExactOracle, MixtureInstance, Simulator, SparseVector};
    use rand::Rng;

    fn inst(n: usize, comps: &[&[(usize, f64)]]) -> MixtureInstance {
        MixtureInstance::new(comps.iter().map(|c| SparseVector::new(n, c.iter().copied()).unwrap()).collect(), 0.0)
            .unwrap()
    }

    /// Direct support computations from the planted vectors.
    fn truth(m: &MixtureInstance) -> SupportMatrix {
        SupportMatrix::from_columns(m.n(), &m.components().iter().map(|c| c.support()).collect::<Vec<_>>()).unwrap()
    }

    fn true_s(m: &MixtureInstance) -> Vec<usize> {
        (0..m.n()).map(|i| m.components().iter().filter(|c| c.get(i) != 0.0).count()).collect()
    }

    fn example() -> MixtureInstance {
        // Supports {1,2} and {2,3} in 1-indexed terms.
        inst(4, &[&[(0, 0.6), (1, 0.8)], &[(1, -0.5), (2, 0.7)]])
    }

    #[test]
    fn s_sizes_example() {
        let m = example();
        let p = m.problem(2);
        let cfg = AlgoConfig::default();
        let ruff = ruff_for(&p, &cfg, 1).unwrap();
        let mut o = ExactOracle::new(m.clone());
        assert_eq!(compute_s_sizes(&mut o, &ruff, 1).unwrap(), vec![1, 2, 1, 0]);
        assert_eq!(true_s(&m), vec![1, 2, 1, 0]);

        let one = inst(5, &[&[(0, 1.0)]]);
        let ruff = ruff_for(&one.problem(1), &cfg, 2).unwrap();
        assert_eq!(compute_s_sizes(&mut ExactOracle::new(one), &ruff, 1).unwrap(), vec![1, 0, 0, 0, 0]);
    }

    #[test]
    fn union_and_gram_example() {
        let m = example();
        let p = m.problem(2);
        let cfg = AlgoConfig::default();
        let mut o = ExactOracle::new(m.clone());
        let s = vec![1, 2, 1, 0];
        let puff = puff_for(&p, &cfg, 4).unwrap();
        let u = compute_union_sizes(&mut o, &s, &puff, puff_weights(4), 1).unwrap();
        assert_eq!((u.get(0, 1), u.get(0, 2), u.get(1, 2), u.get(0, 3)), (2, 2, 2, 1));
        assert_eq!(u.get(1, 1), 2);
        assert_eq!(u.get(3, 0), 1);
        let z = build_gram(&s, &u).unwrap();
        let expect = vec![vec![1, 1, 0, 0], vec![1, 2, 1, 0], vec![0, 1, 1, 0], vec![0, 0, 0, 0]];
        assert_eq!(z.rows(), &expect[..]);
        assert_eq!(z, truth(&m).gram());
        let x = factorize_support(&z, 2).unwrap();
        assert_eq!(x.rows(), &[vec![1, 0], vec![1, 1], vec![0, 1], vec![0, 0]][..]);
    }

    #[test]
    fn factorize_examples() {
        let mut z = vec![vec![0u32; 5]; 5];
        for i in 0..3 {
            z[i][i] = 1;
        }
        let x = factorize_support(&GramMatrix::new(z).unwrap(), 3).unwrap();
        assert_eq!(x.columns(), vec![vec![0], vec![1], vec![2]]);

        let z = GramMatrix::new(vec![vec![1, 1], vec![1, 1]]).unwrap();
        assert!(matches!(factorize_support(&z, 2), Err(Error::AssumptionViolated(_))));
    }

    #[test]
    fn gram_rejects_inconsistency() {
        let s = vec![1, 1];
        let u = UnionSizes { s: s.clone(), pairs: HashMap::from([((0, 1), 3)]) };
        assert!(matches!(build_gram(&s, &u), Err(Error::EstimationFailure(_))));
    }

    #[test]
    fn disjoint_supports_give_block_gram() {
        let m = inst(6, &[&[(0, 1.0), (1, 1.0)], &[(3, 1.0), (4, -1.0)]]);
        let z = truth(&m).gram();
        assert_eq!(z.get(0, 1), 1);
        assert_eq!(z.get(0, 3), 0);
        assert_eq!(z.get(4, 4), 1);
    }

    #[test]
    fn rep_sign_examples() {
        let cfg = AlgoConfig::default();
        for (b2, expect) in [(1.0, vec![1, 1]), (-1.0, vec![1, -1])] {
            let m = inst(3, &[&[(0, 0.6), (1, 0.8)], &[(2, b2)]]);
            let x = truth(&m);
            assert_eq!(x.representatives().unwrap(), vec![0, 2]);
            let ruff = ruff_for(&m.problem(2), &cfg, 9).unwrap();
            let mut o = Simulator::new(m, 1);
            assert_eq!(recover_rep_signs(&mut o, &x, &ruff, 48).unwrap(), expect);
        }
        let m = inst(3, &[&[(1, -1.0)]]);
        let ruff = ruff_for(&m.problem(1), &cfg, 0).unwrap();
        assert_eq!(recover_rep_signs(&mut ExactOracle::new(m.clone()), &truth(&m), &ruff, 1).unwrap(), vec![-1]);
    }

    #[test]
    fn single_component_support() {
        let m = inst(30, &[&[(3, 0.5), (17, -0.5), (20, 0.7)]]);
        let p = m.problem(3);
        let r = recover_support(&mut Simulator::new(m.clone(), 3), &p, &AlgoConfig::default(), 3).unwrap();
        assert_eq!(r.x, truth(&m));
    }

    #[test]
    fn nested_supports_are_rejected() {
        let m = inst(20, &[&[(2, 0.6), (5, 0.8)], &[(2, 0.3), (5, -0.4), (9, 0.5)]]);
        let err = recover_support(&mut ExactOracle::new(m.clone()), &m.problem(3), &AlgoConfig::default(), 0);
        assert!(matches!(err, Err(Error::AssumptionViolated(_))), "{err:?}");
    }

    #[test]
    fn gram_is_psd() {
        let mut r = rng::substream(1, "psd");
        for _ in 0..20 {
            let n = r.random_range(3..15);
            let x: Vec<Vec<u8>> = (0..n).map(|_| (0..3).map(|_| r.random_range(0..2)).collect()).collect();
            let z = SupportMatrix::from_rows(3, x).unwrap().gram();
            let mat = nalgebra::DMatrix::from_fn(n, n, |i, j| z.get(i, j) as f64);
            assert_eq!(mat, mat.transpose());
            let eig = mat.symmetric_eigen();
            assert!(eig.eigenvalues.iter().all(|&l| l >= -1e-8));
        }
    }

    proptest::proptest! {
        #[test]
        fn factorization_recovers_planted(n in 4usize..50, ell in 1usize..5, seed in 0u64..10_000) {
            let mut r = rng::substream(seed, "factor");
            let n = n.max(ell);
            let mut x: Vec<Vec<u8>> = (0..n).map(|_| (0..ell).map(|_| r.random_range(0..2)).collect()).collect();
            let owners = rand::seq::index::sample(&mut r, n, ell);
            for (t, i) in owners.iter().enumerate() {
                x[i] = (0..ell).map(|s| (s == t) as u8).collect();
            }
            let x = SupportMatrix::from_rows(ell, x).unwrap();
            let got = factorize_support(&x.gram(), ell).unwrap();
            proptest::prop_assert!(got.same_up_to_permutation(&x));
        }
    }
}
