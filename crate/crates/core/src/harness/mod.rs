//! Experiment harness: planted sweeps, the MovieLens pipeline and their
//! output tables.

pub mod config;
pub mod emit;
pub mod movielens;
pub mod trials;

use std::fs::File;
use std::io::BufWriter;

pub use config::{Algorithm, ExperimentConfig, ExperimentKind};

use crate::error::{Error, Result};

/// Run the configured experiment and write its CSV (and plot file if set).
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<()> {
    cfg.validate()?;
    let out = || File::create(&cfg.out).map(BufWriter::new);
    let plot: Vec<(f64, f64, f64)>;
    let header;
    match cfg.kind {
        ExperimentKind::SupportSim => {
            let pts = trials::run_support_trials(cfg)?;
            emit::write_support_csv(out()?, &pts)?;
            plot = pts.iter().map(|p| (p.rows as f64, p.mean_hamming, p.stderr)).collect();
            header = "rows mean_hamming stderr";
        }
        ExperimentKind::RecoverySweep => {
            let pts = trials::run_recovery_sweep(cfg)?;
            emit::write_recovery_csv(out()?, &pts)?;
            plot = pts.iter().map(|p| (p.m as f64, p.median_l2, p.iqr)).collect();
            header = "m median_l2 iqr";
        }
        ExperimentKind::MovieLens => {
            let (ratings, movies) = cfg.dataset_paths()?;
            let ml = movielens::MovieLens::load(&ratings, &movies)?;
            let pairs = match cfg.users {
                Some(p) => vec![p],
                None => ml.pairs_with_common(cfg.min_common),
            };
            if pairs.is_empty() {
                return Err(Error::InsufficientData(format!("no user pair shares {} kept movies", cfg.min_common)));
            }
            let rows = pairs
                .into_iter()
                .map(|(a, b)| {
                    let inst = ml.pair(a, b, cfg.min_common)?;
                    movielens::run_pair(&inst, cfg.m1, cfg.m2, &cfg.algo, &cfg.seeds)
                })
                .collect::<Result<Vec<_>>>()?;
            emit::write_movielens_csv(out()?, &rows)?;
            plot = rows.iter().map(|s| ((s.m1 + s.m2) as f64, s.metrics[0].accuracy, s.metrics[1].accuracy)).collect();
            header = "m1+m2 acc1 acc2";
        }
    }
    if let Some(p) = &cfg.plot {
        emit::write_plot(File::create(p).map(BufWriter::new)?, header, &plot)?;
    }
    Ok(())
}
