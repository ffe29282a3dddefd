use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_tol, corpus_probe, parse_field, probe, CriteriaError, Finding, Status, Verdict};
use crate::expr::{self, Expr};
use crate::model::{Corpus, Model, ParamGrid, Statistic};

/// A claimed split `f(theta, x) = g(T(x), theta) * h(x)`.
///
/// Inside `g`, `x[k]` is the k-th statistic component and `n` the statistic
/// dimension; `h` reads the sample only.
#[derive(Debug, Clone)]
pub struct Factorization {
    g: Expr,
    h: Expr,
    g_text: String,
    h_text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorizationDoc {
    pub g: String,
    pub h: String,
}

impl Factorization {
    pub fn parse(
        g: &str,
        h: &str,
        m: &Model,
        s: &Statistic,
    ) -> Result<Factorization, CriteriaError> {
        if s.sample_dim() != m.sample_dim() {
            return Err(CriteriaError::Invalid(format!(
                "statistic reads {} coordinates, model samples have {}",
                s.sample_dim(),
                m.sample_dim()
            )));
        }
        Ok(Factorization {
            g: parse_field("g", g, s.codomain_dim(), m.param_dim())?,
            h: parse_field("h", h, m.sample_dim(), 0)?,
            g_text: g.into(),
            h_text: h.into(),
        })
    }

    pub fn from_doc(
        doc: &FactorizationDoc,
        m: &Model,
        s: &Statistic,
    ) -> Result<Factorization, CriteriaError> {
        Factorization::parse(&doc.g, &doc.h, m, s)
    }

    pub fn g_text(&self) -> &str {
        &self.g_text
    }

    pub fn h_text(&self) -> &str {
        &self.h_text
    }

    /// `log g(T(x), theta) + log h(x)`.
    pub fn log_value(&self, s: &Statistic, theta: &[f64], x: &[f64]) -> Result<f64, CriteriaError> {
        let t = s.apply(x)?;
        let lg = expr::eval_log(&self.g, &t, theta)?.value;
        let lh = expr::eval_log(&self.h, x, &[])?.value;
        if lg == f64::NEG_INFINITY || lh == f64::NEG_INFINITY {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(lg + lh)
    }
}

pub fn check_factorization(
    m: &Model,
    s: &Statistic,
    fac: &Factorization,
    grid: &ParamGrid,
    corpus: &Corpus,
    tol: f64,
) -> Result<Verdict, CriteriaError> {
    check_tol(tol)?;
    grid.check_dim(m.param_dim())?;
    corpus.check_dim(m.sample_dim())?;

    let cells: Vec<(&Vec<f64>, &Vec<f64>)> = grid
        .points
        .iter()
        .flat_map(|t| corpus.points.iter().map(move |x| (t, x)))
        .collect();
    let results = cells
        .par_iter()
        .map(|&(theta, x)| -> Result<Option<Finding>, CriteriaError> {
            let lf = m.log_density(theta, x)?;
            let lgh = fac.log_value(s, theta, x)?;
            let ok = if lf == f64::NEG_INFINITY || lgh == f64::NEG_INFINITY {
                lf == lgh
            } else {
                (lf - lgh).abs() <= tol
            };
            Ok((!ok).then(|| Finding::FactorizationMismatch {
                theta: theta.clone(),
                x: x.clone(),
                log_density: lf,
                log_factorized: lgh,
            }))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mismatches: Vec<Finding> = results.into_iter().flatten().collect();

    if mismatches.is_empty() {
        Ok(Verdict {
            status: Status::VerifiedOnProbe,
            witnesses: vec![probe("grid", grid), corpus_probe(corpus)],
            narrative: format!(
                "f = g(T) h holds at all {} grid x corpus cells within {tol:e} in log scale, zero patterns exact",
                cells.len()
            ),
        })
    } else {
        Ok(Verdict {
            status: Status::Refuted,
            narrative: format!(
                "factorization fails at {} of {} grid x corpus cells",
                mismatches.len(),
                cells.len()
            ),
            witnesses: mismatches,
        })
    }
}
