//! Probe-relative checks of minimal sufficiency.
//!
//! Every check returns a [`Verdict`]. `Refuted` always carries a concrete
//! witness; `VerifiedOnProbe` holds relative to the supplied grids and
//! corpus only, except for a full-rank exponential-family witness, which is
//! a genuine certificate.

mod factorization;
mod method31;
mod method32;
mod method33;

use serde::Serialize;
use thiserror::Error;

use crate::expr::ParseError;
use crate::model::{Corpus, ModelError, ParamGrid};
use crate::ratio::{ProportionalityVerdict, RatioError};

pub use factorization::{check_factorization, Factorization, FactorizationDoc};
pub use method31::{check_method_31, SufficiencyEvidence};
pub use method32::{check_method_32, pair_biconditional, Method32Options};
pub use method33::{
    check_method_33, default_pivot_tol, determinant, numerical_rank, ExpFamDoc, ExpFamSpec,
    RankReport,
};

#[derive(Debug, Error)]
pub enum CriteriaError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Ratio(#[from] RatioError),
    #[error("{field}: {source}")]
    Parse {
        field: String,
        #[source]
        source: ParseError,
    },
    #[error("{0}")]
    Invalid(String),
    #[error("probe has {got} points, at least {need} are required")]
    ProbeTooSmall { need: usize, got: usize },
    #[error("{what} is not finite at theta = {theta:?}")]
    NonFinite { what: String, theta: Vec<f64> },
}

impl From<crate::expr::EvalError> for CriteriaError {
    fn from(e: crate::expr::EvalError) -> Self {
        CriteriaError::Invalid(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Refuted,
    VerifiedOnProbe,
    Inconclusive,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Refuted => "refuted",
            Status::VerifiedOnProbe => "verified_on_probe",
            Status::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NeighborValue {
    pub theta: Vec<f64>,
    pub distance: f64,
    pub log_density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Finding {
    /// The grid or corpus a verdict is relative to.
    Probe {
        role: String,
        label: String,
        size: usize,
    },
    PairSummary {
        pairs: usize,
        proportional: usize,
        equal_statistic: usize,
    },
    /// A pair in the same likelihood-ratio class with different statistic values.
    PairImplication {
        i: usize,
        j: usize,
        x: Vec<f64>,
        y: Vec<f64>,
        t_x: Vec<f64>,
        t_y: Vec<f64>,
        proportional: ProportionalityVerdict,
    },
    /// A pair where statistic equality and proportionality disagree.
    Biconditional {
        i: usize,
        j: usize,
        x: Vec<f64>,
        y: Vec<f64>,
        t_x: Vec<f64>,
        t_y: Vec<f64>,
        statistic_equal: bool,
        proportional: ProportionalityVerdict,
    },
    FactorizationMismatch {
        theta: Vec<f64>,
        x: Vec<f64>,
        log_density: f64,
        log_factorized: f64,
    },
    Sufficiency {
        evidence: String,
        status: Status,
        witnesses: Vec<Finding>,
    },
    /// A neighbor sequence that does not approach the target density.
    Approximation {
        theta: Vec<f64>,
        x: Vec<f64>,
        target: f64,
        sequence: Vec<NeighborValue>,
        slope: f64,
        reason: String,
    },
    Sparse {
        theta: Vec<f64>,
        nearest: Option<Vec<f64>>,
        distance: f64,
        radius: f64,
    },
    RankWitness {
        rank: usize,
        rows: Vec<usize>,
        thetas: Vec<Vec<f64>>,
        matrix: Vec<Vec<f64>>,
        determinant: f64,
        pivot_tol: f64,
    },
    RankDeficient {
        rank: usize,
        required: usize,
        pivot_tol: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub status: Status,
    pub witnesses: Vec<Finding>,
    pub narrative: String,
}

impl Verdict {
    pub fn is_verified(&self) -> bool {
        self.status == Status::VerifiedOnProbe
    }
}

fn probe(role: &str, grid: &ParamGrid) -> Finding {
    Finding::Probe {
        role: role.into(),
        label: grid.label.clone(),
        size: grid.len(),
    }
}

fn corpus_probe(corpus: &Corpus) -> Finding {
    Finding::Probe {
        role: "corpus".into(),
        label: corpus.label.clone(),
        size: corpus.len(),
    }
}

fn check_tol(tol: f64) -> Result<(), CriteriaError> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(RatioError::InvalidTolerance(tol).into())
    }
}

fn parse_field(
    field: &str,
    text: &str,
    sample_dim: usize,
    param_dim: usize,
) -> Result<crate::expr::Expr, CriteriaError> {
    crate::expr::parse(text, sample_dim, param_dim).map_err(|source| CriteriaError::Parse {
        field: field.into(),
        source,
    })
}
