use itertools::Itertools;
use rand::{Rng, SeedableRng};

use mixclass::oracle::{ExactOracle, MixtureInstance, SparseVector};
use mixclass::params::AlgoConfig;
use mixclass::oracle::Problem;
use mixclass::setfam::{verify_ruff, SetFamily};
use mixclass::support::{self, SupportMatrix};
use mixclass::two_mix::l2_support_with;

/// First RUFF draw that passes the verifier; tiny `n` makes unlucky draws
/// common.
fn verified_ruff(p: &Problem, cfg: &AlgoConfig, seed: u64) -> SetFamily {
    (seed..)
        .map(|s| support::ruff_for(p, cfg, s).unwrap())
        .find(|f| match f.kind() {
            mixclass::setfam::FamilyKind::Ruff { t, alpha, .. } => verify_ruff(f, t, alpha, cfg.verify_cap).unwrap(),
            _ => true,
        })
        .unwrap()
}

/// All pairs of nonempty supports of size at most `k`, nested, equal and
/// overlapping ones included.
#[test]
fn l2_support_exhaustive_small() {
    let mut r = rand::rngs::StdRng::seed_from_u64(9);
    let mut cases = 0;
    for n in 1..=6 {
        for k in 1..=3 {
            let cols: Vec<Vec<usize>> = (1..=k.min(n)).flat_map(|s| (0..n).combinations(s)).collect();
            for (a, b) in cols.iter().cartesian_product(&cols) {
                let comp = |c: &[usize], r: &mut rand::rngs::StdRng| {
                    SparseVector::new(n, c.iter().map(|&i| (i, r.random_range(0.2..1.0) * if r.random() { 1.0 } else { -1.0 })))
                        .unwrap()
                };
                let inst = MixtureInstance::new(vec![comp(a, &mut r), comp(b, &mut r)], 0.0).unwrap();
                let truth = SupportMatrix::from_columns(n, &[a.clone(), b.clone()]).unwrap();
                let (p, cfg) = (inst.problem(k), AlgoConfig::default());
                let ruff = verified_ruff(&p, &cfg, cases);
                let x = l2_support_with(&mut ExactOracle::new(inst.clone()), &p, &cfg, &ruff, cases)
                    .unwrap_or_else(|e| panic!("{a:?} {b:?}: {e}"));
                assert!(x.same_up_to_permutation(&truth), "n={n} {a:?} {b:?} -> {:?}", x.columns());
                cases += 1;
            }
        }
    }
    assert!(cases > 500);
}
