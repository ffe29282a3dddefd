//! Exact checks on finite sample spaces.
//!
//! A [`FiniteModel`] lists one probability vector per probe parameter, with
//! arbitrary-precision rational entries. Nothing here touches floating point.

mod pfanzagl;

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::ratio::{Partition, RatioError};

pub use pfanzagl::{demo_pfanzagl, four_point_model, PfanzaglReport};

pub type Rational = BigRational;

#[derive(Debug, Error)]
pub enum FiniteError {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Schema(String),
    #[error("`{0}` is not a rational number")]
    Rational(String),
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("partition is over `{got}` with {len} points, model `{want}` has {points}")]
    PartitionMismatch {
        got: String,
        len: usize,
        want: String,
        points: usize,
    },
    #[error(transparent)]
    Ratio(#[from] RatioError),
}

/// Parses `p/q`, an integer, or a plain decimal such as `0.25`.
pub fn parse_rational(text: &str) -> Result<Rational, FiniteError> {
    let t = text.trim();
    let bad = || FiniteError::Rational(text.to_string());
    if let Some((p, q)) = t.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| bad())?;
        let q: BigInt = q.trim().parse().map_err(|_| bad())?;
        if q.is_zero() {
            return Err(bad());
        }
        return Ok(Rational::new(p, q));
    }
    if let Some((int, frac)) = t.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let negative = int.starts_with('-');
        let digits = format!("{}{frac}", int.trim_start_matches(['-', '+']));
        let mut v = Rational::new(
            digits.parse::<BigInt>().map_err(|_| bad())?,
            BigInt::from(10u32).pow(frac.len() as u32),
        );
        if negative {
            v = -v;
        }
        return Ok(v);
    }
    Ok(Rational::from_integer(t.parse().map_err(|_| bad())?))
}

/// `p/q`, or `p` for integers.
pub fn format_rational(q: &Rational) -> String {
    q.to_string()
}

fn ser_rational<S: Serializer>(q: &Rational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format_rational(q))
}

/// Serializes as a `"p/q"` string.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Exact(#[serde(serialize_with = "ser_rational")] pub Rational);

impl fmt::Display for Exact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

fn exact_row(row: &[Rational]) -> Vec<Exact> {
    row.iter().cloned().map(Exact).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiniteModelDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub points: Vec<String>,
    pub probe: Vec<String>,
    pub pmf: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiniteModel {
    pub name: String,
    pub points: Vec<String>,
    pub probe: Vec<Rational>,
    /// One row per probe parameter, one column per point.
    pub pmf: Vec<Vec<Rational>>,
}

impl FiniteModel {
    pub fn new(
        name: impl Into<String>,
        points: Vec<String>,
        probe: Vec<Rational>,
        pmf: Vec<Vec<Rational>>,
    ) -> Result<FiniteModel, FiniteError> {
        let schema = |m: String| Err(FiniteError::Schema(m));
        if points.is_empty() || probe.is_empty() {
            return schema("points and probe must be non-empty".into());
        }
        for (i, p) in points.iter().enumerate() {
            if points[..i].contains(p) {
                return schema(format!("point label `{p}` is repeated"));
            }
        }
        for (i, t) in probe.iter().enumerate() {
            if probe[..i].contains(t) {
                return schema(format!("probe parameter {t} is repeated"));
            }
        }
        if pmf.len() != probe.len() {
            return schema(format!(
                "{} pmf rows for {} probe parameters",
                pmf.len(),
                probe.len()
            ));
        }
        for (row, t) in pmf.iter().zip(&probe) {
            if row.len() != points.len() {
                return schema(format!(
                    "pmf row for {t} has {} entries, expected {}",
                    row.len(),
                    points.len()
                ));
            }
            if let Some(v) = row.iter().find(|v| v.is_negative()) {
                return schema(format!("pmf row for {t} has negative entry {v}"));
            }
            let total: Rational = row.iter().sum();
            if !total.is_one() {
                return schema(format!("pmf row for {t} sums to {total}, not 1"));
            }
        }
        Ok(FiniteModel {
            name: name.into(),
            points,
            probe,
            pmf,
        })
    }

    pub fn from_doc(doc: &FiniteModelDoc) -> Result<FiniteModel, FiniteError> {
        let probe = doc
            .probe
            .iter()
            .map(|s| parse_rational(s))
            .collect::<Result<_, _>>()?;
        let pmf = doc
            .pmf
            .iter()
            .map(|r| {
                r.iter()
                    .map(|s| parse_rational(s))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<_, _>>()?;
        FiniteModel::new(
            doc.name.clone().unwrap_or_else(|| "finite".into()),
            doc.points.clone(),
            probe,
            pmf,
        )
    }

    pub fn load(text: &str) -> Result<FiniteModel, FiniteError> {
        FiniteModel::from_doc(&serde_json::from_str(text)?)
    }

    pub fn to_doc(&self) -> FiniteModelDoc {
        FiniteModelDoc {
            name: Some(self.name.clone()),
            points: self.points.clone(),
            probe: self.probe.iter().map(format_rational).collect(),
            pmf: self
                .pmf
                .iter()
                .map(|r| r.iter().map(format_rational).collect())
                .collect(),
        }
    }

    pub fn point_index(&self, label: &str) -> Result<usize, FiniteError> {
        self.points
            .iter()
            .position(|p| p == label)
            .ok_or_else(|| FiniteError::UnknownLabel(label.into()))
    }

    /// Index of a probe parameter given as a rational string.
    pub fn probe_index(&self, label: &str) -> Result<usize, FiniteError> {
        let q = parse_rational(label)?;
        self.probe
            .iter()
            .position(|t| *t == q)
            .ok_or_else(|| FiniteError::UnknownLabel(label.into()))
    }

    /// `(p_theta(x))` over the probe.
    pub fn column(&self, x: usize) -> Vec<Rational> {
        self.pmf.iter().map(|r| r[x].clone()).collect()
    }

    fn check_partition(&self, p: &Partition) -> Result<(), FiniteError> {
        if p.corpus_label != self.name || p.len() != self.points.len() {
            return Err(FiniteError::PartitionMismatch {
                got: p.corpus_label.clone(),
                len: p.len(),
                want: self.name.clone(),
                points: self.points.len(),
            });
        }
        Ok(())
    }
}

/// A map from point labels to value labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelStatistic {
    pub name: String,
    pub values: BTreeMap<String, String>,
}

impl LabelStatistic {
    pub fn new<I, K, V>(name: impl Into<String>, values: I) -> LabelStatistic
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        LabelStatistic {
            name: name.into(),
            values: values
                .into_iter()
                .map(|(k, v)| (k.into(), v.into()))
                .collect(),
        }
    }

    pub fn identity(fm: &FiniteModel) -> LabelStatistic {
        LabelStatistic::new("identity", fm.points.iter().map(|p| (p.clone(), p.clone())))
    }

    pub fn load(text: &str) -> Result<LabelStatistic, FiniteError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Values in point order; fails unless the map is total on the points.
    pub fn values_on(&self, fm: &FiniteModel) -> Result<Vec<&str>, FiniteError> {
        fm.points
            .iter()
            .map(|p| {
                self.values.get(p).map(String::as_str).ok_or_else(|| {
                    FiniteError::Schema(format!(
                        "statistic `{}` has no value at point `{p}`",
                        self.name
                    ))
                })
            })
            .collect()
    }

    pub fn partition(&self, fm: &FiniteModel) -> Result<Partition, FiniteError> {
        Ok(Partition::from_keys(&self.values_on(fm)?, fm.name.clone()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionalWitness {
    pub block: Vec<String>,
    pub point: String,
    pub theta_a: Exact,
    pub theta_b: Exact,
    pub conditional_a: Exact,
    pub conditional_b: Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SufficiencyCheck {
    pub sufficient: bool,
    pub witness: Option<ConditionalWitness>,
}

/// A partition is sufficient when, inside every block, the conditional law
/// `p_theta(x) / p_theta(block)` is the same for every probe parameter that
/// gives the block positive mass.
pub fn is_sufficient_partition(
    fm: &FiniteModel,
    p: &Partition,
) -> Result<SufficiencyCheck, FiniteError> {
    fm.check_partition(p)?;
    for block in &p.blocks {
        let mut reference: Option<(usize, Vec<Rational>)> = None;
        for (k, row) in fm.pmf.iter().enumerate() {
            let mass: Rational = block.iter().map(|&x| &row[x]).sum();
            if mass.is_zero() {
                continue;
            }
            let cond: Vec<Rational> = block.iter().map(|&x| &row[x] / &mass).collect();
            match &reference {
                None => reference = Some((k, cond)),
                Some((k0, c0)) => {
                    if let Some(pos) = (0..block.len()).find(|&i| c0[i] != cond[i]) {
                        return Ok(SufficiencyCheck {
                            sufficient: false,
                            witness: Some(ConditionalWitness {
                                block: block.iter().map(|&x| fm.points[x].clone()).collect(),
                                point: fm.points[block[pos]].clone(),
                                theta_a: Exact(fm.probe[*k0].clone()),
                                theta_b: Exact(fm.probe[k].clone()),
                                conditional_a: Exact(c0[pos].clone()),
                                conditional_b: Exact(cond[pos].clone()),
                            }),
                        });
                    }
                }
            }
        }
    }
    Ok(SufficiencyCheck {
        sufficient: true,
        witness: None,
    })
}

/// Exact likelihood-ratio partition: same zero pattern over the probe and a
/// constant ratio wherever positive. Relative to the probe; a degenerate
/// probe gives a coarser partition than the true minimal one.
pub fn minimal_partition(fm: &FiniteModel) -> Partition {
    let keys: Vec<Vec<Rational>> = (0..fm.points.len())
        .map(|x| {
            let col = fm.column(x);
            match col.iter().find(|v| !v.is_zero()).cloned() {
                None => col,
                Some(first) => col.into_iter().map(|v| v / &first).collect(),
            }
        })
        .collect();
    Partition::from_keys(&keys, fm.name.clone())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FunctionCheck {
    pub holds: bool,
    /// Two points where `s` agrees and `t` does not.
    pub witness: Option<(String, String)>,
}

/// Is `t` a function of `s` on the model's points?
pub fn is_function_of(
    t: &LabelStatistic,
    s: &LabelStatistic,
    fm: &FiniteModel,
) -> Result<FunctionCheck, FiniteError> {
    let tv = t.values_on(fm)?;
    let sv = s.values_on(fm)?;
    for i in 0..tv.len() {
        for j in (i + 1)..tv.len() {
            if sv[i] == sv[j] && tv[i] != tv[j] {
                return Ok(FunctionCheck {
                    holds: false,
                    witness: Some((fm.points[i].clone(), fm.points[j].clone())),
                });
            }
        }
    }
    Ok(FunctionCheck {
        holds: true,
        witness: None,
    })
}

pub fn tv_between(fm: &FiniteModel, a: usize, b: usize) -> Rational {
    let total: Rational = fm.pmf[a]
        .iter()
        .zip(&fm.pmf[b])
        .map(|(p, q)| (p - q).abs())
        .sum();
    total / Rational::from_integer(2.into())
}

/// Total variation distance between two probe parameters, given as rationals.
pub fn tv_distance(
    fm: &FiniteModel,
    theta_a: &str,
    theta_b: &str,
) -> Result<Rational, FiniteError> {
    Ok(tv_between(
        fm,
        fm.probe_index(theta_a)?,
        fm.probe_index(theta_b)?,
    ))
}

/// Every set partition of `0..n`, as sorted blocks ordered by first element.
pub fn set_partitions(n: usize) -> Vec<Vec<Vec<usize>>> {
    fn go(i: usize, n: usize, blocks: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
        if i == n {
            out.push(blocks.clone());
            return;
        }
        for b in 0..blocks.len() {
            blocks[b].push(i);
            go(i + 1, n, blocks, out);
            blocks[b].pop();
        }
        blocks.push(vec![i]);
        go(i + 1, n, blocks, out);
        blocks.pop();
    }
    let mut out = Vec::new();
    go(0, n, &mut Vec::new(), &mut out);
    out
}

pub(crate) fn exact_table(rows: &[Vec<Rational>]) -> Vec<Vec<Exact>> {
    rows.iter().map(|r| exact_row(r)).collect()
}
