//! CSV tables and plain-text plot data for the experiments.

use std::io::Write;

use super::movielens::MovieLensSummary;
use super::trials::{RecoveryPoint, SupportPoint};
use crate::error::Result;

pub fn write_support_csv<W: Write>(mut w: W, points: &[SupportPoint]) -> Result<()> {
    writeln!(w, "rows,mean_hamming,stderr")?;
    for p in points {
        writeln!(w, "{},{:.6},{:.6}", p.rows, p.mean_hamming, p.stderr)?;
    }
    Ok(())
}

pub fn write_recovery_csv<W: Write>(mut w: W, points: &[RecoveryPoint]) -> Result<()> {
    writeln!(w, "m,median_l2,iqr")?;
    for p in points {
        writeln!(w, "{},{:.6},{:.6}", p.m, p.median_l2, p.iqr)?;
    }
    Ok(())
}

pub fn write_movielens_csv<W: Write>(mut w: W, rows: &[MovieLensSummary]) -> Result<()> {
    writeln!(w, "user1,user2,m1,m2,acc1,prec1,rec1,acc2,prec2,rec2")?;
    for s in rows {
        let [a, b] = s.metrics;
        writeln!(
            w,
            "{},{},{},{},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4}",
            s.users[0], s.users[1], s.m1, s.m2, a.accuracy, a.precision, a.recall, b.accuracy, b.precision, b.recall
        )?;
    }
    Ok(())
}

/// `x y err` per line, one header comment; readable by gnuplot.
pub fn write_plot<W: Write>(mut w: W, header: &str, points: &[(f64, f64, f64)]) -> Result<()> {
    writeln!(w, "# {header}")?;
    for (x, y, e) in points {
        writeln!(w, "{x} {y:.6} {e:.6}")?;
    }
    Ok(())
}
