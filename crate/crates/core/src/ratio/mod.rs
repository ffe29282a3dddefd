//! Likelihood-ratio proportionality and the partitions it induces.
//!
//! `y` is proportional to `x` over a grid when the densities vanish at the
//! same grid points and the log-ratio `log f(y) - log f(x)` is constant, up
//! to `tol`, over the grid points where both are positive.

mod canonical;
mod partition;
mod union_find;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::model::{Corpus, Model, ModelError, ParamGrid};

pub use canonical::{
    canonical_equal, canonical_log_statistic, canonical_statistic, log_sum_exp, MixtureSpec,
};
pub use partition::{refines, statistic_partition, Partition, StatisticPartition};
pub use union_find::UnionFind;

pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum RatioError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("partitions are over different corpora (`{left}` vs `{right}`)")]
    CorpusMismatch { left: String, right: String },
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("invalid mixture: {0}")]
    InvalidMixture(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProportionalityVerdict {
    pub in_d: bool,
    /// The constant `h` with `f(y) = h f(x)` on the grid, when `in_d`.
    pub h: Option<f64>,
    /// Max minus min of the finite log-ratios.
    pub log_spread: f64,
    /// Grid point whose log-ratio deviates most from the mean.
    pub witness_theta: Option<Vec<f64>>,
    /// First grid point where exactly one of the two densities is zero.
    pub zero_pattern_conflict: Option<Vec<f64>>,
}

fn check_tol(tol: f64) -> Result<(), RatioError> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(RatioError::InvalidTolerance(tol))
    }
}

/// Decides proportionality from precomputed log-densities over `grid`.
pub fn proportional_from_logs(
    grid: &ParamGrid,
    log_x: &[f64],
    log_y: &[f64],
    tol: f64,
) -> ProportionalityVerdict {
    debug_assert_eq!(log_x.len(), grid.len());
    debug_assert_eq!(log_y.len(), grid.len());

    let conflict = log_x
        .iter()
        .zip(log_y)
        .position(|(&a, &b)| (a == f64::NEG_INFINITY) != (b == f64::NEG_INFINITY))
        .map(|k| grid.points[k].clone());

    let ratios: Vec<(usize, f64)> = log_x
        .iter()
        .zip(log_y)
        .enumerate()
        .filter(|(_, (&a, &b))| a.is_finite() && b.is_finite())
        .map(|(k, (&a, &b))| (k, b - a))
        .collect();

    let (mut lo, mut hi, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
    for &(_, r) in &ratios {
        lo = lo.min(r);
        hi = hi.max(r);
        sum += r;
    }
    let log_spread = if ratios.is_empty() { 0.0 } else { hi - lo };
    let mean = if ratios.is_empty() {
        0.0
    } else {
        sum / ratios.len() as f64
    };

    let witness_theta = if log_spread > tol {
        ratios
            .iter()
            .max_by(|a, b| (a.1 - mean).abs().total_cmp(&(b.1 - mean).abs()))
            .map(|&(k, _)| grid.points[k].clone())
    } else {
        None
    };

    let in_d = conflict.is_none() && log_spread <= tol;
    ProportionalityVerdict {
        in_d,
        h: in_d.then(|| mean.exp()),
        log_spread,
        witness_theta,
        zero_pattern_conflict: conflict,
    }
}

/// Log-densities of one sample point over every grid point.
pub fn log_row(m: &Model, grid: &ParamGrid, x: &[f64]) -> Result<Vec<f64>, ModelError> {
    grid.points.iter().map(|t| m.log_density(t, x)).collect()
}

/// One row of log-densities per corpus point.
pub fn log_table(
    m: &Model,
    grid: &ParamGrid,
    corpus: &Corpus,
) -> Result<Vec<Vec<f64>>, ModelError> {
    corpus
        .points
        .par_iter()
        .map(|x| log_row(m, grid, x))
        .collect()
}

/// Is `y` in `D(x, grid)`?
pub fn proportional(
    m: &Model,
    grid: &ParamGrid,
    x: &[f64],
    y: &[f64],
    tol: f64,
) -> Result<ProportionalityVerdict, RatioError> {
    check_tol(tol)?;
    grid.check_dim(m.param_dim())?;
    let lx = log_row(m, grid, x)?;
    let ly = log_row(m, grid, y)?;
    Ok(proportional_from_logs(grid, &lx, &ly, tol))
}

/// All verdicts for index pairs `i < j`, in lexicographic order.
pub fn pair_verdicts(
    grid: &ParamGrid,
    table: &[Vec<f64>],
    tol: f64,
) -> Vec<((usize, usize), ProportionalityVerdict)> {
    let n = table.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    pairs
        .into_par_iter()
        .map(|(i, j)| {
            (
                (i, j),
                proportional_from_logs(grid, &table[i], &table[j], tol),
            )
        })
        .collect()
}

/// Connected components of the proportionality graph on the corpus.
pub fn ratio_partition(
    m: &Model,
    grid: &ParamGrid,
    corpus: &Corpus,
    tol: f64,
) -> Result<Partition, RatioError> {
    check_tol(tol)?;
    grid.check_dim(m.param_dim())?;
    corpus.check_dim(m.sample_dim())?;
    let table = log_table(m, grid, corpus)?;
    let mut uf = UnionFind::new(corpus.len());
    for ((i, j), v) in pair_verdicts(grid, &table, tol) {
        if v.in_d {
            uf.union(i, j);
        }
    }
    Ok(Partition::from_union_find(&mut uf, corpus.label.clone()))
}
