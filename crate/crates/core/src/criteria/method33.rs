use serde::{Deserialize, Serialize};

use super::{parse_field, probe, CriteriaError, Finding, Status, Verdict};
use crate::expr::{self, Expr};
use crate::model::{Measure, Model, ModelDoc, ModelError, ParamGrid, SmokeGrid};

/// `f(theta, x) = exp(sum eta_i(theta) T_i(x) - B(theta)) h(x)`.
#[derive(Debug, Clone)]
pub struct ExpFamSpec {
    k: usize,
    sample_dim: usize,
    param_dim: usize,
    eta: Vec<Expr>,
    b: Expr,
    t: Vec<Expr>,
    h: Expr,
    doc: ExpFamDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpFamDoc {
    pub k: usize,
    pub eta: Vec<String>,
    #[serde(rename = "B")]
    pub b: String,
    #[serde(rename = "T")]
    pub t: Vec<String>,
    pub h: String,
    /// Sample dimension; `n` in `B` refers to it. Defaults to 1.
    #[serde(default = "one")]
    pub sample_dim: usize,
    #[serde(default = "one")]
    pub param_dim: usize,
}

fn one() -> usize {
    1
}

fn reads_coordinates(e: &Expr) -> bool {
    let mut found = false;
    e.visit(&mut |n| {
        if matches!(n, Expr::Sample(_) | Expr::Aggregate { .. }) {
            found = true;
        }
    });
    found
}

impl ExpFamSpec {
    pub fn from_doc(doc: &ExpFamDoc) -> Result<ExpFamSpec, CriteriaError> {
        if doc.k == 0 {
            return Err(CriteriaError::Invalid("k must be positive".into()));
        }
        if doc.eta.len() != doc.k || doc.t.len() != doc.k {
            return Err(CriteriaError::Invalid(format!(
                "k = {} but {} eta and {} T components were given",
                doc.k,
                doc.eta.len(),
                doc.t.len()
            )));
        }
        if doc.sample_dim == 0 || doc.param_dim == 0 {
            return Err(CriteriaError::Invalid(
                "sample_dim and param_dim must be positive".into(),
            ));
        }
        let (sd, pd) = (doc.sample_dim, doc.param_dim);
        let theta_only = |field: String, text: &str| -> Result<Expr, CriteriaError> {
            let e = parse_field(&field, text, sd, pd)?;
            if reads_coordinates(&e) {
                return Err(CriteriaError::Invalid(format!(
                    "{field} must not read the sample"
                )));
            }
            Ok(e)
        };
        let eta = doc
            .eta
            .iter()
            .enumerate()
            .map(|(i, s)| theta_only(format!("eta[{i}]"), s))
            .collect::<Result<Vec<_>, _>>()?;
        let b = theta_only("B".into(), &doc.b)?;
        let t = doc
            .t
            .iter()
            .enumerate()
            .map(|(i, s)| parse_field(&format!("T[{i}]"), s, sd, 0))
            .collect::<Result<Vec<_>, _>>()?;
        let h = parse_field("h", &doc.h, sd, 0)?;
        Ok(ExpFamSpec {
            k: doc.k,
            sample_dim: sd,
            param_dim: pd,
            eta,
            b,
            t,
            h,
            doc: doc.clone(),
        })
    }

    pub fn load(text: &str) -> Result<ExpFamSpec, CriteriaError> {
        let doc: ExpFamDoc =
            serde_json::from_str(text).map_err(|e| CriteriaError::Model(ModelError::Json(e)))?;
        ExpFamSpec::from_doc(&doc)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn doc(&self) -> &ExpFamDoc {
        &self.doc
    }

    /// `(1, eta_1(theta), ..., eta_k(theta))`.
    pub fn row(&self, theta: &[f64]) -> Result<Vec<f64>, CriteriaError> {
        let zeros = vec![0.0; self.sample_dim];
        let mut row = vec![1.0];
        for (i, e) in self.eta.iter().enumerate() {
            let v = expr::eval(e, &zeros, theta).value;
            if !v.is_finite() {
                return Err(CriteriaError::NonFinite {
                    what: format!("eta[{i}]"),
                    theta: theta.to_vec(),
                });
            }
            row.push(v);
        }
        Ok(row)
    }

    /// Log-density straight from the parts, `-inf` where `h` vanishes.
    pub fn log_density(&self, theta: &[f64], x: &[f64]) -> Result<f64, CriteriaError> {
        let zeros = vec![0.0; self.sample_dim];
        let lh = expr::eval_log(&self.h, x, &[])?.value;
        if lh == f64::NEG_INFINITY {
            return Ok(lh);
        }
        let mut s = -expr::eval(&self.b, &zeros, theta).value;
        for (e, t) in self.eta.iter().zip(&self.t) {
            s += expr::eval(e, &zeros, theta).value * expr::eval(t, x, &[]).value;
        }
        Ok(s + lh)
    }

    /// The density as a model, for use with the other checks.
    pub fn to_model(&self, name: &str, smoke_grid: Option<SmokeGrid>) -> Result<Model, ModelError> {
        let terms: Vec<String> = self
            .doc
            .eta
            .iter()
            .zip(&self.doc.t)
            .map(|(e, t)| format!("({e})*({t})"))
            .collect();
        let density = format!(
            "exp({} - ({})) * ({})",
            terms.join(" + "),
            self.doc.b,
            self.doc.h
        );
        Model::from_doc(&ModelDoc {
            name: name.into(),
            sample_dim: self.sample_dim,
            param_dim: self.param_dim,
            measure: Measure::Lebesgue,
            density,
            overrides: None,
            smoke_grid,
        })
    }

    /// The sufficient statistic `(T_1, ..., T_k)` as statistic component texts.
    pub fn statistic_components(&self) -> Vec<&str> {
        self.doc.t.iter().map(String::as_str).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankReport {
    pub rank: usize,
    /// Probe indices of the pivot rows, ascending.
    pub rows: Vec<usize>,
    pub pivot_tol: f64,
}

/// `1e-10` times the largest column norm.
pub fn default_pivot_tol(matrix: &[Vec<f64>]) -> f64 {
    let cols = matrix.first().map_or(0, Vec::len);
    let largest = (0..cols)
        .map(|j| matrix.iter().map(|r| r[j] * r[j]).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    1e-10 * largest
}

/// Numerical rank by Gaussian elimination with full pivoting; a pivot at or
/// below `pivot_tol` in magnitude ends the elimination.
pub fn numerical_rank(matrix: &[Vec<f64>], pivot_tol: f64) -> RankReport {
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    let mut row_ids: Vec<usize> = (0..a.len()).collect();
    let rows = a.len();
    let cols = a.first().map_or(0, Vec::len);
    let mut rank = 0;
    while rank < rows.min(cols) {
        let (mut pi, mut pj, mut best) = (rank, rank, -1.0);
        for (i, r) in a.iter().enumerate().skip(rank) {
            for (j, v) in r.iter().enumerate().skip(rank) {
                if v.abs() > best {
                    (pi, pj, best) = (i, j, v.abs());
                }
            }
        }
        if best <= pivot_tol {
            break;
        }
        a.swap(rank, pi);
        row_ids.swap(rank, pi);
        for r in a.iter_mut() {
            r.swap(rank, pj);
        }
        let pivot = a[rank].clone();
        for r in a.iter_mut().skip(rank + 1) {
            let f = r[rank] / pivot[rank];
            for (v, p) in r.iter_mut().zip(&pivot).skip(rank) {
                *v -= f * p;
            }
        }
        rank += 1;
    }
    let mut chosen = row_ids[..rank].to_vec();
    chosen.sort_unstable();
    RankReport {
        rank,
        rows: chosen,
        pivot_tol,
    }
}

/// Determinant by LU with partial pivoting.
pub fn determinant(matrix: &[Vec<f64>]) -> f64 {
    let mut a = matrix.to_vec();
    let n = a.len();
    let mut det = 1.0;
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
            .unwrap_or(c);
        if a[p][c] == 0.0 {
            return 0.0;
        }
        if p != c {
            a.swap(p, c);
            det = -det;
        }
        det *= a[c][c];
        let pivot = a[c].clone();
        for r in a.iter_mut().skip(c + 1) {
            let f = r[c] / pivot[c];
            for (v, q) in r.iter_mut().zip(&pivot).skip(c) {
                *v -= f * q;
            }
        }
    }
    det
}

pub fn check_method_33(
    ef: &ExpFamSpec,
    grid: &ParamGrid,
    pivot_tol: Option<f64>,
) -> Result<Verdict, CriteriaError> {
    let need = ef.k + 1;
    if grid.len() < need {
        return Err(CriteriaError::ProbeTooSmall {
            need,
            got: grid.len(),
        });
    }
    grid.check_dim(ef.param_dim)?;
    if let Some(t) = pivot_tol {
        if !(t > 0.0 && t.is_finite()) {
            return Err(CriteriaError::Invalid(format!(
                "pivot tolerance must be positive, got {t}"
            )));
        }
    }
    let matrix = grid
        .points
        .iter()
        .map(|t| ef.row(t))
        .collect::<Result<Vec<_>, _>>()?;
    let tol = pivot_tol.unwrap_or_else(|| default_pivot_tol(&matrix));
    let r = numerical_rank(&matrix, tol);

    let mut witnesses = vec![probe("probe", grid)];
    if r.rank == need {
        let sub: Vec<Vec<f64>> = r.rows.iter().map(|&i| matrix[i].clone()).collect();
        let det = determinant(&sub);
        witnesses.push(Finding::RankWitness {
            rank: r.rank,
            thetas: r.rows.iter().map(|&i| grid.points[i].clone()).collect(),
            rows: r.rows,
            matrix: sub,
            determinant: det,
            pivot_tol: tol,
        });
        Ok(Verdict {
            status: Status::VerifiedOnProbe,
            witnesses,
            narrative: format!(
                "1, eta_1, ..., eta_{} are affinely independent: the witness rows give a nonsingular \
                 {need}x{need} matrix (determinant {det:e}), so any affine relation on the parameter space \
                 is trivial and T is minimal sufficient",
                ef.k
            ),
        })
    } else {
        witnesses.push(Finding::RankDeficient {
            rank: r.rank,
            required: need,
            pivot_tol: tol,
        });
        Ok(Verdict {
            status: Status::Inconclusive,
            witnesses,
            narrative: format!(
                "rank {} < {need} on this probe; a deficient probe does not show affine dependence on the whole \
                 parameter space",
                r.rank
            ),
        })
    }
}
