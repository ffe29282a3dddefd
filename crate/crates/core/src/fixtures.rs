//! Shipped example inputs, embedded at build time.
//!
//! Each fixture is a directory of JSON documents under `fixtures/`; the same
//! files can be passed to the command-line tool.

use crate::criteria::{CriteriaError, ExpFamSpec, Factorization, FactorizationDoc};
use crate::finite::{FiniteError, FiniteModel, LabelStatistic};
use crate::model::{load_model, Corpus, Model, ModelError, ParamGrid, Statistic};

#[derive(Debug, Clone, Copy)]
pub struct Fixture {
    pub name: &'static str,
    files: &'static [(&'static str, &'static str)],
}

macro_rules! fixture {
    ($dir:literal, [$($file:literal),* $(,)?]) => {
        Fixture {
            name: $dir,
            files: &[$(($file, include_str!(concat!("../fixtures/", $dir, "/", $file, ".json")))),*],
        }
    };
}

pub const ALL: &[Fixture] = &[
    fixture!(
        "ex41-cauchy-scale",
        [
            "corpus",
            "factorization",
            "model",
            "mutant",
            "mutant_factorization",
            "statistic",
            "theta0"
        ]
    ),
    fixture!(
        "ex42-shifted-exponential",
        [
            "corpus",
            "factorization",
            "model",
            "mutant",
            "mutant_factorization",
            "statistic",
            "theta0"
        ]
    ),
    fixture!(
        "ex43-truncated-normal",
        [
            "corpus",
            "factorization",
            "model",
            "mutant",
            "mutant_factorization",
            "statistic",
            "theta0"
        ]
    ),
    fixture!(
        "ex44-triangle-pairs",
        [
            "corpus",
            "factorization",
            "model",
            "mutant",
            "mutant_factorization",
            "statistic",
            "theta0"
        ]
    ),
    fixture!(
        "ex45-cauchy-location",
        [
            "corpus",
            "model",
            "mutant",
            "probe",
            "sparse_theta0",
            "statistic",
            "theta0"
        ]
    ),
    fixture!(
        "ex46-normal-scale",
        [
            "corpus",
            "expfam",
            "expfam_mutant",
            "factorization",
            "model",
            "probe",
            "statistic",
            "theta0"
        ]
    ),
    fixture!(
        "four-point",
        [
            "corpus",
            "factorization",
            "finite",
            "model",
            "statistic",
            "t_label",
            "theta0"
        ]
    ),
    fixture!("logit", ["expfam", "probe"]),
    fixture!(
        "modified-statistic",
        [
            "corpus",
            "factorization",
            "model",
            "raw",
            "statistic",
            "theta0"
        ]
    ),
    fixture!("versions", ["corpus", "theta0"]),
];

pub fn get(name: &str) -> Option<&'static Fixture> {
    ALL.iter().find(|f| f.name == name)
}

fn missing(fixture: &str, file: &str) -> ModelError {
    ModelError::Schema(format!("fixture `{fixture}` has no `{file}.json`"))
}

impl Fixture {
    pub fn text(&self, file: &str) -> Option<&'static str> {
        self.files.iter().find(|(f, _)| *f == file).map(|(_, t)| *t)
    }

    pub fn has(&self, file: &str) -> bool {
        self.text(file).is_some()
    }

    fn need(&self, file: &str) -> Result<&'static str, ModelError> {
        self.text(file).ok_or_else(|| missing(self.name, file))
    }

    pub fn model(&self) -> Result<Model, ModelError> {
        load_model(self.need("model")?)
    }

    pub fn grid(&self, file: &str) -> Result<ParamGrid, ModelError> {
        ParamGrid::load(self.need(file)?)
    }

    pub fn corpus(&self) -> Result<Corpus, ModelError> {
        Corpus::load(self.need("corpus")?)
    }

    pub fn statistic(&self, file: &str, sample_dim: usize) -> Result<Statistic, ModelError> {
        Statistic::load(self.need(file)?, sample_dim)
    }

    pub fn factorization(
        &self,
        file: &str,
        m: &Model,
        s: &Statistic,
    ) -> Result<Factorization, CriteriaError> {
        let doc: FactorizationDoc =
            serde_json::from_str(self.need(file)?).map_err(ModelError::Json)?;
        Factorization::from_doc(&doc, m, s)
    }

    pub fn expfam(&self, file: &str) -> Result<ExpFamSpec, CriteriaError> {
        ExpFamSpec::load(self.need(file)?)
    }

    pub fn finite(&self) -> Result<FiniteModel, FiniteError> {
        FiniteModel::load(
            self.text("finite")
                .ok_or_else(|| FiniteError::Schema("no finite model".into()))?,
        )
    }

    pub fn label_statistic(&self, file: &str) -> Result<LabelStatistic, FiniteError> {
        LabelStatistic::load(
            self.text(file)
                .ok_or_else(|| FiniteError::Schema(format!("no `{file}.json`")))?,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn everything_loads() {
        for f in ALL {
            if f.has("model") {
                let m = f.model().unwrap();
                for file in ["theta0", "probe", "sparse_theta0"] {
                    if f.has(file) {
                        f.grid(file).unwrap().check_dim(m.param_dim()).unwrap();
                    }
                }
                if f.has("corpus") {
                    f.corpus().unwrap().check_dim(m.sample_dim()).unwrap();
                }
                for file in ["statistic", "mutant", "raw"] {
                    if f.has(file) {
                        f.statistic(file, m.sample_dim()).unwrap();
                    }
                }
            }
            for file in ["expfam", "expfam_mutant"] {
                if f.has(file) {
                    f.expfam(file).unwrap();
                }
            }
        }
        get("four-point").unwrap().finite().unwrap();
    }
}
