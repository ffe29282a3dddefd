//! Dominated families, statistics, parameter grids and sample corpora.
//!
//! Everything here is immutable after construction. Densities are stored as
//! parsed [`Expr`] trees together with the source text they came from, and a
//! model may carry a finite table of pointwise overrides: density values that
//! replace the formula at exact `(theta, x)` pairs. Overrides are how a
//! different version of the same density is represented.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{self, EvalError, Expr, ParseError};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("cannot parse {field}: {source}")]
    Parse {
        field: String,
        #[source]
        source: ParseError,
    },
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        got: usize,
    },
    #[error("negative density {value} at theta={theta:?}, x={x:?}")]
    NegativeDensity {
        theta: Vec<f64>,
        x: Vec<f64>,
        value: f64,
    },
    #[error("density is {kind} at theta={theta:?}, x={x:?}")]
    UndefinedDensity {
        theta: Vec<f64>,
        x: Vec<f64>,
        kind: &'static str,
    },
    #[error("override already present at theta={theta:?}, x={x:?}")]
    ClashingOverride { theta: Vec<f64>, x: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    Lebesgue,
    Counting,
}

/// A replacement density value at one exact `(theta, x)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Override {
    pub theta: Vec<f64>,
    pub x: Vec<f64>,
    pub value: f64,
}

/// A number in a JSON document: either a JSON number or a string holding a
/// closed expression such as `"1/3"` or `"-sqrt(2)"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Num(f64),
    Text(String),
}

impl Scalar {
    pub fn value(&self) -> Result<f64, ParseError> {
        match self {
            Scalar::Num(v) => Ok(*v),
            Scalar::Text(s) => expr::parse_constant(s),
        }
    }
}

fn scalars_to_points(points: &[Vec<Scalar>], what: &str) -> Result<Vec<Vec<f64>>, ModelError> {
    points
        .iter()
        .map(|p| {
            p.iter()
                .map(|s| {
                    s.value().map_err(|source| ModelError::Parse {
                        field: what.to_string(),
                        source,
                    })
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmokeGrid {
    pub x: Vec<Vec<Scalar>>,
    pub theta: Vec<Vec<Scalar>>,
}

/// The model document format.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDoc {
    pub name: String,
    pub sample_dim: usize,
    pub param_dim: usize,
    pub measure: Measure,
    pub density: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overrides: Option<Vec<Override>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoke_grid: Option<SmokeGrid>,
}

/// Bit pattern of a point, with `-0.0` folded into `0.0`.
fn point_key(v: &[f64]) -> Vec<u64> {
    v.iter()
        .map(|&c| if c == 0.0 { 0u64 } else { c.to_bits() })
        .collect()
}

pub(crate) fn same_point(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && point_key(a) == point_key(b)
}

#[derive(Debug, Clone)]
pub struct Model {
    name: String,
    sample_dim: usize,
    param_dim: usize,
    measure: Measure,
    density_text: String,
    density: Expr,
    overrides: Vec<Override>,
    override_index: HashMap<(Vec<u64>, Vec<u64>), usize>,
}

const SMOKE_X: [f64; 8] = [-2.5, -1.0, -0.5, 0.0, 0.3, 0.7, 1.5, 3.0];
// Positive so that scale and other positive-parameter families load without
// a custom grid.
const SMOKE_THETA: [f64; 8] = [0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 5.0];

fn default_smoke(sample_dim: usize, param_dim: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let xs = (0..8)
        .map(|k| (0..sample_dim).map(|i| SMOKE_X[(k + 3 * i) % 8]).collect())
        .collect();
    let thetas = (0..8)
        .map(|k| (0..param_dim).map(|j| SMOKE_THETA[(k + j) % 8]).collect())
        .collect();
    (xs, thetas)
}

impl Model {
    /// Parses the density and runs the non-negativity check on the default
    /// 8x8 smoke grid.
    pub fn new(
        name: impl Into<String>,
        sample_dim: usize,
        param_dim: usize,
        measure: Measure,
        density: &str,
    ) -> Result<Model, ModelError> {
        let model = Model::unchecked(name.into(), sample_dim, param_dim, measure, density)?;
        let (xs, thetas) = default_smoke(sample_dim, param_dim);
        model.smoke_check(&xs, &thetas)?;
        Ok(model)
    }

    fn unchecked(
        name: String,
        sample_dim: usize,
        param_dim: usize,
        measure: Measure,
        density: &str,
    ) -> Result<Model, ModelError> {
        if sample_dim == 0 || param_dim == 0 {
            return Err(ModelError::Schema(
                "sample_dim and param_dim must be positive".into(),
            ));
        }
        let parsed =
            expr::parse(density, sample_dim, param_dim).map_err(|source| ModelError::Parse {
                field: "density".into(),
                source,
            })?;
        Ok(Model {
            name,
            sample_dim,
            param_dim,
            measure,
            density_text: density.to_string(),
            density: parsed,
            overrides: Vec::new(),
            override_index: HashMap::new(),
        })
    }

    pub fn from_doc(doc: &ModelDoc) -> Result<Model, ModelError> {
        let mut model = Model::unchecked(
            doc.name.clone(),
            doc.sample_dim,
            doc.param_dim,
            doc.measure,
            &doc.density,
        )?;
        if let Some(overrides) = &doc.overrides {
            model = model.with_overrides(overrides.iter().cloned())?;
        }
        let (xs, thetas) = match &doc.smoke_grid {
            Some(grid) => (
                scalars_to_points(&grid.x, "smoke_grid.x")?,
                scalars_to_points(&grid.theta, "smoke_grid.theta")?,
            ),
            None => default_smoke(doc.sample_dim, doc.param_dim),
        };
        model.smoke_check(&xs, &thetas)?;
        Ok(model)
    }

    fn smoke_check(&self, xs: &[Vec<f64>], thetas: &[Vec<f64>]) -> Result<(), ModelError> {
        for theta in thetas {
            for x in xs {
                self.log_density(theta, x)?;
            }
        }
        Ok(())
    }

    /// Returns a copy with extra overrides installed. Fails if any pair is
    /// already overridden.
    pub fn with_overrides(
        &self,
        overrides: impl IntoIterator<Item = Override>,
    ) -> Result<Model, ModelError> {
        let mut out = self.clone();
        for o in overrides {
            check_len("override theta", self.param_dim, o.theta.len())?;
            check_len("override x", self.sample_dim, o.x.len())?;
            if o.value.is_nan() || o.value < 0.0 || o.value.is_infinite() {
                return Err(ModelError::NegativeDensity {
                    theta: o.theta,
                    x: o.x,
                    value: o.value,
                });
            }
            let key = (point_key(&o.theta), point_key(&o.x));
            if out.override_index.contains_key(&key) {
                return Err(ModelError::ClashingOverride {
                    theta: o.theta,
                    x: o.x,
                });
            }
            out.override_index.insert(key, out.overrides.len());
            out.overrides.push(o);
        }
        Ok(out)
    }

    pub fn without_overrides(&self) -> Model {
        let mut out = self.clone();
        out.overrides.clear();
        out.override_index.clear();
        out
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn sample_dim(&self) -> usize {
        self.sample_dim
    }

    pub fn param_dim(&self) -> usize {
        self.param_dim
    }

    pub fn measure(&self) -> Measure {
        self.measure
    }

    pub fn density(&self) -> &Expr {
        &self.density
    }

    pub fn density_text(&self) -> &str {
        &self.density_text
    }

    pub fn overrides(&self) -> &[Override] {
        &self.overrides
    }

    pub fn override_at(&self, theta: &[f64], x: &[f64]) -> Option<f64> {
        if self.overrides.is_empty() {
            return None;
        }
        self.override_index
            .get(&(point_key(theta), point_key(x)))
            .map(|&i| self.overrides[i].value)
    }

    /// Log of the density at `(theta, x)`; `-inf` encodes a zero density.
    pub fn log_density(&self, theta: &[f64], x: &[f64]) -> Result<f64, ModelError> {
        check_len("theta", self.param_dim, theta.len())?;
        check_len("x", self.sample_dim, x.len())?;
        if let Some(v) = self.override_at(theta, x) {
            return Ok(v.ln());
        }
        let r = expr::eval_log(&self.density, x, theta).map_err(|e| match e {
            EvalError::NegativeDensity { value } => ModelError::NegativeDensity {
                theta: theta.to_vec(),
                x: x.to_vec(),
                value,
            },
        })?;
        if r.value.is_nan() {
            return Err(ModelError::UndefinedDensity {
                theta: theta.to_vec(),
                x: x.to_vec(),
                kind: "NaN",
            });
        }
        if r.value == f64::INFINITY {
            return Err(ModelError::UndefinedDensity {
                theta: theta.to_vec(),
                x: x.to_vec(),
                kind: "infinite",
            });
        }
        Ok(r.value)
    }

    /// Density on the linear scale, override-aware.
    pub fn density_at(&self, theta: &[f64], x: &[f64]) -> Result<f64, ModelError> {
        self.log_density(theta, x).map(f64::exp)
    }
}

pub fn load_model(text: &str) -> Result<Model, ModelError> {
    let doc: ModelDoc = serde_json::from_str(text)?;
    Model::from_doc(&doc)
}

fn check_len(what: &str, expected: usize, got: usize) -> Result<(), ModelError> {
    if expected == got {
        Ok(())
    } else {
        Err(ModelError::DimensionMismatch {
            what: what.to_string(),
            expected,
            got,
        })
    }
}

/// Grid and corpus document format.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointsDoc {
    pub label: String,
    pub points: Vec<Vec<Scalar>>,
}

/// A finite, ordered set of distinct parameter points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamGrid {
    pub label: String,
    pub points: Vec<Vec<f64>>,
}

impl ParamGrid {
    pub fn new(label: impl Into<String>, points: Vec<Vec<f64>>) -> Result<ParamGrid, ModelError> {
        if points.is_empty() {
            return Err(ModelError::Schema("parameter grid is empty".into()));
        }
        let dim = points[0].len();
        let mut seen = std::collections::HashSet::new();
        for p in &points {
            check_len("grid point", dim, p.len())?;
            if !seen.insert(point_key(p)) {
                return Err(ModelError::Schema(format!("duplicate grid point {p:?}")));
            }
        }
        Ok(ParamGrid {
            label: label.into(),
            points,
        })
    }

    /// One-dimensional grid from scalars.
    pub fn scalar(label: impl Into<String>, values: &[f64]) -> Result<ParamGrid, ModelError> {
        ParamGrid::new(label, values.iter().map(|&v| vec![v]).collect())
    }

    pub fn from_doc(doc: &PointsDoc) -> Result<ParamGrid, ModelError> {
        ParamGrid::new(doc.label.clone(), scalars_to_points(&doc.points, "grid")?)
    }

    pub fn load(text: &str) -> Result<ParamGrid, ModelError> {
        ParamGrid::from_doc(&serde_json::from_str(text)?)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    /// Points of `self` followed by the points of `other` not already present.
    pub fn union(&self, other: &ParamGrid) -> ParamGrid {
        let mut points = self.points.clone();
        for p in &other.points {
            if !points.iter().any(|q| same_point(p, q)) {
                points.push(p.clone());
            }
        }
        ParamGrid {
            label: format!("{}+{}", self.label, other.label),
            points,
        }
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        self.points.iter().any(|q| same_point(p, q))
    }

    pub fn check_dim(&self, param_dim: usize) -> Result<(), ModelError> {
        check_len(&format!("grid `{}`", self.label), param_dim, self.dim())
    }
}

/// Sample points a check is run over.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Corpus {
    pub label: String,
    pub points: Vec<Vec<f64>>,
}

impl Corpus {
    pub fn new(label: impl Into<String>, points: Vec<Vec<f64>>) -> Result<Corpus, ModelError> {
        if points.is_empty() {
            return Err(ModelError::Schema("corpus is empty".into()));
        }
        let dim = points[0].len();
        for p in &points {
            check_len("corpus point", dim, p.len())?;
        }
        Ok(Corpus {
            label: label.into(),
            points,
        })
    }

    pub fn from_doc(doc: &PointsDoc) -> Result<Corpus, ModelError> {
        Corpus::new(doc.label.clone(), scalars_to_points(&doc.points, "corpus")?)
    }

    pub fn load(text: &str) -> Result<Corpus, ModelError> {
        Corpus::from_doc(&serde_json::from_str(text)?)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn check_dim(&self, sample_dim: usize) -> Result<(), ModelError> {
        check_len(
            &format!("corpus `{}`", self.label),
            sample_dim,
            self.points[0].len(),
        )
    }
}

/// Components of a vector-valued statistic. Each `sorted` entry is an
/// elementwise expression in the bound index `i` and expands to `n` output
/// slots holding its values in ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct StatisticSpec {
    pub components: Vec<Expr>,
    pub sorted: Vec<Expr>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatisticDoc {
    pub name: String,
    #[serde(default)]
    pub components: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sorted: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

pub const DEFAULT_STATISTIC_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct Statistic {
    name: String,
    spec: StatisticSpec,
    sample_dim: usize,
    codomain_dim: usize,
    tolerance: f64,
}

impl Statistic {
    pub fn new(
        name: impl Into<String>,
        components: &[&str],
        sorted: &[&str],
        sample_dim: usize,
        tolerance: Option<f64>,
    ) -> Result<Statistic, ModelError> {
        let parse_field = |field: String, text: &str, binders: &[&str]| {
            // Statistics see the sample only.
            expr::parse_with_binders(text, sample_dim, 0, binders)
                .map_err(|source| ModelError::Parse { field, source })
        };
        let components = components
            .iter()
            .enumerate()
            .map(|(k, t)| parse_field(format!("components[{k}]"), t, &[]))
            .collect::<Result<Vec<_>, _>>()?;
        let sorted = sorted
            .iter()
            .enumerate()
            .map(|(k, t)| parse_field(format!("sorted[{k}]"), t, &["i"]))
            .collect::<Result<Vec<_>, _>>()?;
        let codomain_dim = components.len() + sorted.len() * sample_dim;
        if codomain_dim == 0 {
            return Err(ModelError::Schema("statistic has no components".into()));
        }
        let tolerance = tolerance.unwrap_or(DEFAULT_STATISTIC_TOLERANCE);
        if tolerance.is_nan() || tolerance < 0.0 {
            return Err(ModelError::Schema("tolerance must be non-negative".into()));
        }
        Ok(Statistic {
            name: name.into(),
            spec: StatisticSpec { components, sorted },
            sample_dim,
            codomain_dim,
            tolerance,
        })
    }

    pub fn identity(sample_dim: usize) -> Statistic {
        let comps: Vec<String> = (0..sample_dim).map(|i| format!("x[{i}]")).collect();
        let refs: Vec<&str> = comps.iter().map(String::as_str).collect();
        Statistic::new("identity", &refs, &[], sample_dim, Some(0.0))
            .expect("identity statistic is well formed")
    }

    pub fn from_doc(doc: &StatisticDoc, sample_dim: usize) -> Result<Statistic, ModelError> {
        let comps: Vec<&str> = doc.components.iter().map(String::as_str).collect();
        let sorted: Vec<&str> = doc.sorted.iter().flatten().map(String::as_str).collect();
        Statistic::new(doc.name.clone(), &comps, &sorted, sample_dim, doc.tolerance)
    }

    pub fn load(text: &str, sample_dim: usize) -> Result<Statistic, ModelError> {
        Statistic::from_doc(&serde_json::from_str(text)?, sample_dim)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn spec(&self) -> &StatisticSpec {
        &self.spec
    }

    pub fn sample_dim(&self) -> usize {
        self.sample_dim
    }

    pub fn codomain_dim(&self) -> usize {
        self.codomain_dim
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        check_len("statistic input", self.sample_dim, x.len())?;
        let mut out = Vec::with_capacity(self.codomain_dim);
        for c in &self.spec.components {
            out.push(expr::eval(c, x, &[]).value);
        }
        for s in &self.spec.sorted {
            let mut block: Vec<f64> = (0..x.len())
                .map(|i| expr::eval_with(s, x, &[], &[("i", i)]).value)
                .collect();
            block.sort_by(f64::total_cmp);
            out.extend(block);
        }
        Ok(out)
    }

    /// Componentwise `|a - b| <= tol * max(1, |a|, |b|)`; exact when `tol` is 0.
    pub fn values_equal(&self, a: &[f64], b: &[f64]) -> bool {
        values_equal(a, b, self.tolerance)
    }
}

pub fn values_equal(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(&u, &v)| u == v || (u - v).abs() <= tol * 1f64.max(u.abs()).max(v.abs()))
}

pub fn apply_statistic(s: &Statistic, x: &[f64]) -> Result<Vec<f64>, ModelError> {
    s.apply(x)
}
