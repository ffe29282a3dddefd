use super::{
    check_factorization, check_tol, corpus_probe, probe, CriteriaError, Factorization, Finding,
    Status, Verdict,
};
use crate::model::{Corpus, Model, ParamGrid, Statistic};
use crate::ratio::{log_table, pair_verdicts};

/// Why `T` may be taken as sufficient. The pair test never establishes this.
#[derive(Debug, Clone, Copy)]
pub enum SufficiencyEvidence<'a> {
    Missing,
    CertifiedByUser,
    /// Checked on the same grid and corpus before the pair test runs.
    ValidatedByFactorization(&'a Factorization),
}

pub fn check_method_31(
    m: &Model,
    s: &Statistic,
    theta0: &ParamGrid,
    corpus: &Corpus,
    tol: f64,
    evidence: SufficiencyEvidence<'_>,
) -> Result<Verdict, CriteriaError> {
    check_tol(tol)?;
    theta0.check_dim(m.param_dim())?;
    corpus.check_dim(m.sample_dim())?;
    if s.sample_dim() != m.sample_dim() {
        return Err(CriteriaError::Invalid(format!(
            "statistic reads {} coordinates, model samples have {}",
            s.sample_dim(),
            m.sample_dim()
        )));
    }

    let mut witnesses = vec![probe("theta0", theta0), corpus_probe(corpus)];
    let sufficiency = match evidence {
        SufficiencyEvidence::Missing => {
            return Ok(Verdict {
                status: Status::Inconclusive,
                witnesses,
                narrative:
                    "no sufficiency evidence for T was supplied; the method's hypothesis is unmet, \
                            so nothing follows from the pair test"
                        .into(),
            })
        }
        SufficiencyEvidence::CertifiedByUser => Finding::Sufficiency {
            evidence: "certified_by_user".into(),
            status: Status::VerifiedOnProbe,
            witnesses: vec![],
        },
        SufficiencyEvidence::ValidatedByFactorization(fac) => {
            let v = check_factorization(m, s, fac, theta0, corpus, tol)?;
            let failed = !v.is_verified();
            let f = Finding::Sufficiency {
                evidence: "validated_by_factorization".into(),
                status: v.status,
                witnesses: v.witnesses,
            };
            if failed {
                witnesses.push(f);
                return Ok(Verdict {
                    status: Status::Inconclusive,
                    witnesses,
                    narrative: "the supplied factorization does not hold on the probe, so sufficiency of T \
                                is not established"
                        .into(),
                });
            }
            f
        }
    };
    witnesses.push(sufficiency);

    let values = corpus
        .points
        .iter()
        .map(|x| s.apply(x))
        .collect::<Result<Vec<_>, _>>()?;
    let table = log_table(m, theta0, corpus)?;
    let verdicts = pair_verdicts(theta0, &table, tol);

    let mut proportional = 0;
    let mut equal = 0;
    let mut violations = Vec::new();
    for ((i, j), v) in &verdicts {
        let same_t = s.values_equal(&values[*i], &values[*j]);
        proportional += v.in_d as usize;
        equal += same_t as usize;
        if v.in_d && !same_t {
            violations.push(Finding::PairImplication {
                i: *i,
                j: *j,
                x: corpus.points[*i].clone(),
                y: corpus.points[*j].clone(),
                t_x: values[*i].clone(),
                t_y: values[*j].clone(),
                proportional: v.clone(),
            });
        }
    }
    witnesses.push(Finding::PairSummary {
        pairs: verdicts.len(),
        proportional,
        equal_statistic: equal,
    });

    if violations.is_empty() {
        Ok(Verdict {
            status: Status::VerifiedOnProbe,
            witnesses,
            narrative: format!(
                "every proportional pair over theta0 ({proportional} of {}) has equal statistic values",
                verdicts.len()
            ),
        })
    } else {
        let n = violations.len();
        witnesses.extend(violations);
        Ok(Verdict {
            status: Status::Refuted,
            witnesses,
            narrative: format!(
                "{n} pair(s) are proportional over theta0 but T differs, so y in D(x, theta0) does not imply T(x) = T(y)"
            ),
        })
    }
}
