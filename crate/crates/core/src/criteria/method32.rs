use rayon::prelude::*;

use super::{
    check_tol, corpus_probe, probe, CriteriaError, Finding, NeighborValue, Status, Verdict,
};
use crate::model::{Corpus, Model, ParamGrid, Statistic};
use crate::ratio::{log_table, pair_verdicts};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Method32Options {
    pub tol: f64,
    pub neighbor_count: usize,
    /// Largest admissible distance from a probe point to its nearest theta0 point.
    pub radius: f64,
}

impl Default for Method32Options {
    fn default() -> Self {
        Method32Options {
            tol: crate::ratio::DEFAULT_TOL,
            neighbor_count: 4,
            radius: 0.5,
        }
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt()
}

/// Pairs where `T(x) = T(y)` and `y in D(x, grid)` disagree, in index order.
pub fn pair_biconditional(
    m: &Model,
    s: &Statistic,
    grid: &ParamGrid,
    corpus: &Corpus,
    tol: f64,
) -> Result<Vec<Finding>, CriteriaError> {
    check_tol(tol)?;
    let values = corpus
        .points
        .iter()
        .map(|x| s.apply(x))
        .collect::<Result<Vec<_>, _>>()?;
    let table = log_table(m, grid, corpus)?;
    Ok(pair_verdicts(grid, &table, tol)
        .into_iter()
        .filter_map(|((i, j), v)| {
            let eq = s.values_equal(&values[i], &values[j]);
            (eq != v.in_d).then(|| Finding::Biconditional {
                i,
                j,
                x: corpus.points[i].clone(),
                y: corpus.points[j].clone(),
                t_x: values[i].clone(),
                t_y: values[j].clone(),
                statistic_equal: eq,
                proportional: v,
            })
        })
        .collect())
}

/// Approximation findings for one probe point. The neighbors are the
/// `neighbor_count` nearest theta0 points, listed from far to near.
///
/// A finite grid cannot exhibit a limit, so the check is a local Lipschitz
/// envelope: with `L` the largest secant slope of `log f(., x)` among the
/// neighbors, each neighbor at distance `d` must satisfy
/// `|log f_n - log f| <= 2 L d + tol`. A zero target needs the nearest
/// neighbor to be zero as well.
fn approximation(
    m: &Model,
    theta: &[f64],
    theta0: &ParamGrid,
    corpus: &Corpus,
    opts: &Method32Options,
) -> Result<Vec<Finding>, CriteriaError> {
    let mut near: Vec<(f64, usize)> = theta0
        .points
        .iter()
        .enumerate()
        .map(|(k, p)| (distance(p, theta), k))
        .collect();
    near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    near.truncate(opts.neighbor_count);
    let Some(&(closest, ci)) = near.first() else {
        return Ok(vec![Finding::Sparse {
            theta: theta.to_vec(),
            nearest: None,
            distance: f64::INFINITY,
            radius: opts.radius,
        }]);
    };
    if closest > opts.radius {
        return Ok(vec![Finding::Sparse {
            theta: theta.to_vec(),
            nearest: Some(theta0.points[ci].clone()),
            distance: closest,
            radius: opts.radius,
        }]);
    }
    near.reverse();

    let mut out = Vec::new();
    for x in &corpus.points {
        let target = m.log_density(theta, x)?;
        let sequence = near
            .iter()
            .map(|&(d, k)| {
                Ok(NeighborValue {
                    theta: theta0.points[k].clone(),
                    distance: d,
                    log_density: m.log_density(&theta0.points[k], x)?,
                })
            })
            .collect::<Result<Vec<_>, CriteriaError>>()?;

        let mut slope = 0.0f64;
        for (a, p) in sequence.iter().enumerate() {
            for q in &sequence[a + 1..] {
                let dl = (p.log_density - q.log_density).abs();
                if dl.is_finite() {
                    slope = slope.max(dl / distance(&p.theta, &q.theta));
                }
            }
        }

        let reason = if target == f64::NEG_INFINITY {
            let last = sequence.last().map(|v| v.log_density);
            (last != Some(f64::NEG_INFINITY))
                .then(|| "density is zero at theta but not at its nearest neighbor".to_string())
        } else if sequence.iter().any(|v| v.log_density == f64::NEG_INFINITY) {
            Some("density vanishes along the sequence but not at theta".to_string())
        } else {
            sequence
                .iter()
                .find(|v| (v.log_density - target).abs() > 2.0 * slope * v.distance + opts.tol)
                .map(|v| {
                    format!(
                        "log density at distance {:e} is off by {:e}, outside the envelope",
                        v.distance,
                        (v.log_density - target).abs()
                    )
                })
        };
        if let Some(reason) = reason {
            out.push(Finding::Approximation {
                theta: theta.to_vec(),
                x: x.clone(),
                target,
                sequence,
                slope,
                reason,
            });
        }
    }
    Ok(out)
}

pub fn check_method_32(
    m: &Model,
    s: &Statistic,
    theta0: &ParamGrid,
    theta_probe: &ParamGrid,
    corpus: &Corpus,
    opts: &Method32Options,
) -> Result<Verdict, CriteriaError> {
    check_tol(opts.tol)?;
    if opts.neighbor_count == 0 {
        return Err(CriteriaError::Invalid(
            "neighbor count must be positive".into(),
        ));
    }
    if opts.radius.is_nan() || opts.radius <= 0.0 {
        return Err(CriteriaError::Invalid(format!(
            "radius must be positive, got {}",
            opts.radius
        )));
    }
    theta0.check_dim(m.param_dim())?;
    theta_probe.check_dim(m.param_dim())?;
    corpus.check_dim(m.sample_dim())?;

    let phase_a: Vec<Finding> = theta_probe
        .points
        .par_iter()
        .map(|t| approximation(m, t, theta0, corpus, opts))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .flatten()
        .collect();

    let full = theta0.union(theta_probe);
    let phase_b = pair_biconditional(m, s, &full, corpus, opts.tol)?;

    let mut witnesses = vec![
        probe("theta0", theta0),
        probe("theta_probe", theta_probe),
        corpus_probe(corpus),
    ];
    let (status, narrative) = if !phase_a.is_empty() {
        let sparse = phase_a
            .iter()
            .filter(|f| matches!(f, Finding::Sparse { .. }))
            .count();
        (
            Status::Inconclusive,
            format!(
                "approximation phase failed ({sparse} probe point(s) too far from theta0, {} sequence failure(s)); \
                 the method's hypothesis is not supported on this probe",
                phase_a.len() - sparse
            ),
        )
    } else if !phase_b.is_empty() {
        (
            Status::Refuted,
            format!(
                "{} pair(s) break T(x) = T(y) <=> y in D(x, theta0 + probe)",
                phase_b.len()
            ),
        )
    } else {
        (
            Status::VerifiedOnProbe,
            format!(
                "nearest-neighbor sequences ({} per probe point) stay within the local envelope on every corpus point, \
                 and T(x) = T(y) <=> y in D(x, theta0 + probe) on all corpus pairs; \
                 the almost-everywhere limit is checked on the corpus only",
                opts.neighbor_count
            ),
        )
    };
    witnesses.extend(phase_a);
    witnesses.extend(phase_b);
    Ok(Verdict {
        status,
        witnesses,
        narrative,
    })
}
