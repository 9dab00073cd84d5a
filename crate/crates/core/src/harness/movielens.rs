//! MovieLens ingestion and the two-user genre-preference experiment.
//!
//! Movies are kept when their mean rating lies in `[2.5, 3.5]`. A rating of
//! at least 3 is a like; a user likes a genre when they like at least half of
//! the kept movies of that genre they rated.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::oracle::{self, CountEstimate, Phase, QueryLedger};
use crate::params::AlgoConfig;
use crate::rng;
use crate::setfam::{FamilyKind, SetFamily};
use crate::support;

pub const GENRES: [&str; 20] = [
    "(no genres listed)",
    "Action",
    "Adventure",
    "Animation",
    "Children",
    "Comedy",
    "Crime",
    "Documentary",
    "Drama",
    "Fantasy",
    "Film-Noir",
    "Horror",
    "IMAX",
    "Musical",
    "Mystery",
    "Romance",
    "Sci-Fi",
    "Thriller",
    "War",
    "Western",
];

pub const LIKE_THRESHOLD: f64 = 3.0;
pub const MEAN_RANGE: (f64, f64) = (2.5, 3.5);

pub fn genre_index(name: &str) -> Option<usize> {
    GENRES.binary_search(&name).ok()
}

fn parse_err(rec: Option<&csv::Position>, msg: impl Into<String>) -> Error {
    Error::Parse { line: rec.map_or(0, |p| p.line() as usize), msg: msg.into() }
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse { line, msg: format!("{other:?}") },
    }
}

fn field<'a>(rec: &'a csv::StringRecord, i: usize, name: &str) -> Result<&'a str> {
    rec.get(i).map(str::trim).ok_or_else(|| parse_err(rec.position(), format!("missing column `{name}`")))
}

fn number<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, name: &str) -> Result<T> {
    let raw = field(rec, i, name)?;
    raw.parse().map_err(|_| parse_err(rec.position(), format!("bad {name} `{raw}`")))
}

/// Ratings restricted to the kept movies.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MovieLens {
    /// Genre indicator per kept movie.
    movies: BTreeMap<u32, Vec<u8>>,
    /// Rating per user per kept movie.
    ratings: BTreeMap<u32, BTreeMap<u32, f64>>,
}

impl MovieLens {
    pub fn load(ratings: &Path, movies: &Path) -> Result<Self> {
        let open = |p: &Path| {
            std::fs::File::open(p).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", p.display()))))
        };
        Self::from_readers(open(ratings)?, open(movies)?)
    }

    /// Parse `userId,movieId,rating,timestamp` and `movieId,title,genres`.
    /// Row order does not affect the result.
    pub fn from_readers(ratings: impl Read, movies: impl Read) -> Result<Self> {
        let mut genres: BTreeMap<u32, Vec<u8>> = BTreeMap::new();
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(movies);
        for rec in rdr.records() {
            let rec = rec.map_err(csv_err)?;
            let id: u32 = number(&rec, 0, "movieId")?;
            let mut ind = vec![0u8; GENRES.len()];
            for g in field(&rec, 2, "genres")?.split('|') {
                let gi = genre_index(g.trim()).ok_or_else(|| parse_err(rec.position(), format!("unknown genre `{g}`")))?;
                ind[gi] = 1;
            }
            if genres.insert(id, ind).is_some() {
                return Err(parse_err(rec.position(), format!("duplicate movieId {id}")));
            }
        }
        let mut all: BTreeMap<u32, BTreeMap<u32, f64>> = BTreeMap::new();
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(ratings);
        for rec in rdr.records() {
            let rec = rec.map_err(csv_err)?;
            let user: u32 = number(&rec, 0, "userId")?;
            let movie: u32 = number(&rec, 1, "movieId")?;
            let rating: f64 = number(&rec, 2, "rating")?;
            if !(0.0..=5.0).contains(&rating) {
                return Err(parse_err(rec.position(), format!("rating {rating} outside [0, 5]")));
            }
            if !genres.contains_key(&movie) {
                return Err(parse_err(rec.position(), format!("movieId {movie} is not in the movies file")));
            }
            if all.entry(user).or_default().insert(movie, rating).is_some() {
                return Err(parse_err(rec.position(), format!("user {user} rated movie {movie} twice")));
            }
        }
        let mut sums: BTreeMap<u32, (f64, usize)> = BTreeMap::new();
        for r in all.values() {
            for (&m, &x) in r {
                let e = sums.entry(m).or_default();
                e.0 += x;
                e.1 += 1;
            }
        }
        let kept: BTreeSet<u32> = sums
            .into_iter()
            .filter(|&(_, (s, c))| {
                let mean = s / c as f64;
                (MEAN_RANGE.0..=MEAN_RANGE.1).contains(&mean)
            })
            .map(|(m, _)| m)
            .collect();
        let movies = genres.into_iter().filter(|(m, _)| kept.contains(m)).collect();
        let ratings = all
            .into_iter()
            .map(|(u, r)| (u, r.into_iter().filter(|(m, _)| kept.contains(m)).collect::<BTreeMap<_, _>>()))
            .filter(|(_, r)| !r.is_empty())
            .collect();
        Ok(Self { movies, ratings })
    }

    pub fn movies(&self) -> &BTreeMap<u32, Vec<u8>> {
        &self.movies
    }

    pub fn users(&self) -> impl Iterator<Item = u32> + '_ {
        self.ratings.keys().copied()
    }

    pub fn ratings_of(&self, user: u32) -> Option<&BTreeMap<u32, f64>> {
        self.ratings.get(&user)
    }

    pub fn likes(&self, user: u32, movie: u32) -> Option<bool> {
        self.ratings.get(&user)?.get(&movie).map(|&r| r >= LIKE_THRESHOLD)
    }

    /// Genre preference vector; genres the user never rated default to 0.
    pub fn preference(&self, user: u32) -> Vec<u8> {
        let mut liked = vec![0usize; GENRES.len()];
        let mut seen = vec![0usize; GENRES.len()];
        for (m, &r) in self.ratings.get(&user).into_iter().flatten() {
            for (g, _) in self.movies[m].iter().enumerate().filter(|(_, &b)| b == 1) {
                seen[g] += 1;
                liked[g] += usize::from(r >= LIKE_THRESHOLD);
            }
        }
        seen.iter().zip(&liked).map(|(&s, &l)| u8::from(s > 0 && 2 * l >= s)).collect()
    }

    pub fn common(&self, u1: u32, u2: u32) -> Vec<u32> {
        match (self.ratings.get(&u1), self.ratings.get(&u2)) {
            (Some(a), Some(b)) => a.keys().filter(|m| b.contains_key(m)).copied().collect(),
            _ => Vec::new(),
        }
    }

    /// User pairs with at least `min_common` kept movies in common.
    pub fn pairs_with_common(&self, min_common: usize) -> Vec<(u32, u32)> {
        let users: Vec<u32> = self.users().filter(|u| self.ratings[u].len() >= min_common).collect();
        users
            .iter()
            .tuple_combinations()
            .filter(|(&a, &b)| self.common(a, b).len() >= min_common)
            .map(|(&a, &b)| (a, b))
            .collect()
    }

    pub fn pair(&self, u1: u32, u2: u32, min_common: usize) -> Result<PreferenceInstance> {
        for u in [u1, u2] {
            if !self.ratings.contains_key(&u) {
                return Err(Error::InsufficientData(format!("user {u} has no kept ratings")));
            }
        }
        if u1 == u2 {
            return Err(Error::InvalidParameter("the two users must differ".into()));
        }
        let common = self.common(u1, u2);
        if common.len() < min_common {
            return Err(Error::InsufficientData(format!(
                "users {u1} and {u2} share {} kept movies, need {min_common}",
                common.len()
            )));
        }
        let pool = common
            .iter()
            .map(|&m| PoolMovie {
                id: m,
                genres: self.movies[&m].clone(),
                likes: [self.likes(u1, m) == Some(true), self.likes(u2, m) == Some(true)],
            })
            .collect();
        let common: BTreeSet<u32> = common.into_iter().collect();
        let test = [u1, u2].map(|u| {
            self.ratings[&u]
                .iter()
                .filter(|(m, _)| !common.contains(m))
                .map(|(&m, &r)| (self.movies[&m].clone(), r >= LIKE_THRESHOLD))
                .collect()
        });
        Ok(PreferenceInstance { users: [u1, u2], prefs: [self.preference(u1), self.preference(u2)], pool, test })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PoolMovie {
    pub id: u32,
    pub genres: Vec<u8>,
    pub likes: [bool; 2],
}

/// A user pair: ground-truth preferences, the commonly rated movies used as
/// queries, and a per-user test set of movies only that user rated.
#[derive(Clone, Debug, PartialEq)]
pub struct PreferenceInstance {
    pub users: [u32; 2],
    pub prefs: [Vec<u8>; 2],
    pub pool: Vec<PoolMovie>,
    pub test: [Vec<(Vec<u8>, bool)>; 2],
}

/// Answers a movie query with the like bit of a uniformly random user of the
/// pair.
pub struct PairOracle<'a> {
    pool: &'a [PoolMovie],
    rng: ChaCha8Rng,
    ledger: QueryLedger,
}

impl<'a> PairOracle<'a> {
    pub fn new(pool: &'a [PoolMovie], seed: u64) -> Self {
        Self { pool, rng: rng::substream(seed, "movielens-oracle"), ledger: QueryLedger::default() }
    }

    /// Estimated number of users liking the movie, from `batch` calls.
    pub fn likes_count(&mut self, movie: usize, batch: usize, phase: Phase) -> CountEstimate {
        let likes = (0..batch).filter(|_| self.pool[movie].likes[self.rng.random_range(0..2)]).count();
        self.ledger.record(phase, batch as u64);
        let nz = ((2 * likes) as f64 / batch.max(1) as f64).round().min(2.0) as usize;
        CountEstimate::new(nz, 0, 2 - nz)
    }

    pub fn ledger(&self) -> &QueryLedger {
        &self.ledger
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct UserMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
}

impl UserMetrics {
    fn mean(xs: &[UserMetrics]) -> UserMetrics {
        let n = xs.len().max(1) as f64;
        UserMetrics {
            accuracy: xs.iter().map(|m| m.accuracy).sum::<f64>() / n,
            precision: xs.iter().map(|m| m.precision).sum::<f64>() / n,
            recall: xs.iter().map(|m| m.recall).sum::<f64>() / n,
        }
    }
}

/// Accuracy, precision and recall of "likes a movie iff it has a liked
/// genre". Precision and recall are 0 when undefined.
pub fn score(pref: &[u8], test: &[(Vec<u8>, bool)]) -> UserMetrics {
    let (mut tp, mut fp, mut fneg, mut correct) = (0usize, 0usize, 0usize, 0usize);
    for (genres, truth) in test {
        let pred = genres.iter().zip(pref).any(|(&g, &p)| g == 1 && p == 1);
        correct += usize::from(pred == *truth);
        match (pred, *truth) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            _ => {}
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    UserMetrics { accuracy: ratio(correct, test.len()), precision: ratio(tp, tp + fp), recall: ratio(tp, tp + fneg) }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MovieLensRun {
    pub seed: u64,
    /// Recovered preferences, matched to the users.
    pub prefs: [Vec<u8>; 2],
    pub metrics: [UserMetrics; 2],
    pub calls: u64,
}

/// Recover both preference vectors from `m1` RUFF-style movie queries and
/// `m2` alignment queries, each drawn without replacement from the commonly
/// rated movies.
///
/// Stage 1 treats genre `i` as set `H_i` = the sampled movies carrying it
/// and reads `|S(i)|` off the like counts. Stage 2 aligns every genre liked
/// by exactly one user against the first such genre through a movie whose
/// genres meet the liked union in exactly that pair. Genres with no such
/// movie are placed with the pivot.
pub fn recover_pair(inst: &PreferenceInstance, m1: usize, m2: usize, cfg: &AlgoConfig, seed: u64) -> Result<MovieLensRun> {
    if m1.max(m2) > inst.pool.len() {
        return Err(Error::InsufficientData(format!(
            "asked for {} query movies, only {} are rated by both users",
            m1.max(m2),
            inst.pool.len()
        )));
    }
    for t in &inst.test {
        if t.is_empty() {
            return Err(Error::InsufficientData("a user has no test movies".into()));
        }
    }
    let g = GENRES.len();
    let sample = |m: usize, label: &str| {
        let mut order: Vec<usize> = (0..inst.pool.len()).collect();
        order.shuffle(&mut rng::substream(seed, label));
        order.truncate(m);
        order
    };
    let (stage1, stage2) = (sample(m1, "movielens-stage1"), sample(m2, "movielens-stage2"));
    let batch = oracle::default_batchsize_with_slack(2, cfg.failure_budget, (m1 + m2).max(1), cfg.batch_slack);
    let mut oracle = PairOracle::new(&inst.pool, seed);

    let counts: Vec<CountEstimate> = stage1.iter().map(|&r| oracle.likes_count(r, batch, Phase::SupportRuff)).collect();
    let align: Vec<CountEstimate> = stage2.iter().map(|&r| oracle.likes_count(r, batch, Phase::Align)).collect();

    let sets: Vec<Vec<usize>> =
        (0..g).map(|i| (0..m1).filter(|&r| inst.pool[stage1[r]].genres[i] == 1).collect()).collect();
    let s = support::s_sizes_from_counts(&SetFamily::new(m1, sets, FamilyKind::Custom)?, &counts, 2)?;

    let union: Vec<usize> = (0..g).filter(|&i| s[i] >= 1).collect();
    let single: Vec<usize> = (0..g).filter(|&i| s[i] == 1).collect();
    let mut side = [vec![0u8; g], vec![0u8; g]];
    for i in (0..g).filter(|&i| s[i] == 2) {
        side[0][i] = 1;
        side[1][i] = 1;
    }
    if let Some(&pivot) = single.first() {
        side[0][pivot] = 1;
        for &j in &single[1..] {
            let row = stage2.iter().position(|&r| {
                let gs = &inst.pool[r].genres;
                gs[pivot] == 1 && gs[j] == 1 && union.iter().filter(|&&u| gs[u] == 1).count() == 2
            });
            // One liking user means both genres belong to the same user.
            let same = row.is_none_or(|r| align[r].nz == 1);
            side[usize::from(!same)][j] = 1;
        }
    }

    let [a, b] = side;
    let straight = [score(&a, &inst.test[0]), score(&b, &inst.test[1])];
    let swapped = [score(&b, &inst.test[0]), score(&a, &inst.test[1])];
    let avg = |m: &[UserMetrics; 2]| m[0].accuracy + m[1].accuracy;
    let (prefs, metrics) = if avg(&swapped) > avg(&straight) { ([b, a], swapped) } else { ([a, b], straight) };
    Ok(MovieLensRun { seed, prefs, metrics, calls: oracle.ledger().total() })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MovieLensSummary {
    pub users: [u32; 2],
    pub m1: usize,
    pub m2: usize,
    pub metrics: [UserMetrics; 2],
    pub runs: Vec<MovieLensRun>,
}

pub fn run_pair(inst: &PreferenceInstance, m1: usize, m2: usize, cfg: &AlgoConfig, seeds: &[u64]) -> Result<MovieLensSummary> {
    let runs = seeds.iter().map(|&s| recover_pair(inst, m1, m2, cfg, s)).collect::<Result<Vec<_>>>()?;
    let per_user = |u: usize| UserMetrics::mean(&runs.iter().map(|r| r.metrics[u]).collect::<Vec<_>>());
    Ok(MovieLensSummary { users: inst.users, m1, m2, metrics: [per_user(0), per_user(1)], runs })
}

/// Planted two-user dataset with separable genre preferences, as
/// `(ratings.csv, movies.csv, preferences)`.
///
/// User 1 likes Action and Comedy, user 2 likes Drama and Horror. Every
/// genre has `singles` single-genre movies rated by both, each pivot pair of
/// liked genres has `pairs` two-genre movies, and each user rates `exclusive`
/// movies alone. Likes are rated 3.5, dislikes 2.5.
pub fn planted_fixture(singles: usize, pairs: usize, exclusive: usize) -> (String, String, [Vec<u8>; 2]) {
    let liked = [["Action", "Comedy"], ["Drama", "Horror"]].map(|l| l.map(|n| genre_index(n).unwrap()));
    let pref = |u: usize| (0..GENRES.len()).map(|g| u8::from(liked[u].contains(&g))).collect::<Vec<u8>>();
    let likes = |u: usize, gs: &[usize]| gs.iter().any(|g| liked[u].contains(g));
    let mut movies = String::from("movieId,title,genres\n");
    let mut ratings = String::from("userId,movieId,rating,timestamp\n");
    let mut id = 0u32;
    let mut add = |gs: &[usize], raters: &[usize]| {
        id += 1;
        let names = gs.iter().map(|&g| GENRES[g]).join("|");
        writeln!(movies, "{id},\"Movie {id}, planted\",{names}").unwrap();
        for &u in raters {
            let r = if likes(u, gs) { 3.5 } else { 2.5 };
            writeln!(ratings, "{},{id},{r},0", u + 1).unwrap();
        }
    };
    for g in 0..GENRES.len() {
        for _ in 0..singles {
            add(&[g], &[0, 1]);
        }
    }
    let pivot = liked[0][0];
    for &j in [liked[0][1], liked[1][0], liked[1][1]].iter() {
        for _ in 0..pairs {
            add(&[pivot, j], &[0, 1]);
        }
    }
    for u in 0..2 {
        for e in 0..exclusive {
            add(&[e % GENRES.len()], &[u]);
        }
    }
    (ratings, movies, [pref(0), pref(1)])
}
