//! The `minsuff` command-line tool.
//!
//! Exit codes: 0 verified on probe or demo reproduced, 1 refuted, 2
//! inconclusive, 3 input or specification error.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::criteria::{
    check_factorization, check_method_31, check_method_32, check_method_33, ExpFamSpec,
    Factorization, FactorizationDoc, Method32Options, Status, SufficiencyEvidence, Verdict,
};
use crate::expr::{self, parse_constant};
use crate::finite::{
    format_rational, is_sufficient_partition, minimal_partition, tv_distance, FiniteModel,
    LabelStatistic,
};
use crate::model::{load_model, Corpus, Model, ParamGrid, Statistic};
use crate::ratio::{
    canonical_statistic, ratio_partition, refines, statistic_partition, MixtureSpec, DEFAULT_TOL,
};
use crate::versions::{demo_versions, perturb, VersionAssignment};

pub const EXIT_OK: i32 = 0;
pub const EXIT_REFUTED: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;
pub const EXIT_INPUT: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "minsuff",
    version,
    about = "Likelihood-ratio checks for minimal sufficiency"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Log-spread tolerance for proportionality and factorization checks.
    #[arg(long, global = true, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    /// Absolute pivot threshold for the rank test (default 1e-10 x largest column norm).
    #[arg(long, global = true)]
    pub pivot_tol: Option<f64>,
    /// Nearest theta0 points per probe point in the approximation check.
    #[arg(long, global = true, default_value_t = 4)]
    pub neighbors: usize,
    /// Largest admissible distance from a probe point to theta0.
    #[arg(long, global = true, default_value_t = 0.5)]
    pub radius: f64,
    /// Also write the JSON report to this file.
    #[arg(long, global = true)]
    pub report: Option<PathBuf>,
    /// Print the JSON report.
    #[arg(long, global = true, conflicts_with = "text")]
    pub json: bool,
    /// Print a human-readable summary (default).
    #[arg(long, global = true)]
    pub text: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate a density or expression.
    Eval(EvalArgs),
    /// Likelihood-ratio partition of a corpus, or the minimal partition of a finite model.
    Partition(PartitionArgs),
    #[command(subcommand)]
    Check(CheckCommand),
    #[command(subcommand)]
    Demo(DemoCommand),
    /// Exact total variation distance between two probe parameters of a finite model.
    Tv(TvArgs),
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, conflicts_with = "expr")]
    pub model: Option<PathBuf>,
    /// Expression text, evaluated with `--sample-dim` and `--param-dim`.
    #[arg(long)]
    pub expr: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub sample_dim: usize,
    #[arg(long, default_value_t = 1)]
    pub param_dim: usize,
    /// Comma-separated parameter, e.g. `1/3,2`.
    #[arg(long, allow_hyphen_values = true)]
    pub theta: Option<String>,
    /// Comma-separated sample point.
    #[arg(long, allow_hyphen_values = true)]
    pub x: Option<String>,
    #[arg(long, conflicts_with = "theta")]
    pub grid: Option<PathBuf>,
    #[arg(long, conflicts_with = "x")]
    pub corpus: Option<PathBuf>,
    /// Version assignment to install before evaluating.
    #[arg(long)]
    pub assignment: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PartitionArgs {
    #[arg(long, required_unless_present = "finite")]
    pub model: Option<PathBuf>,
    #[arg(long, required_unless_present = "finite")]
    pub grid: Option<PathBuf>,
    #[arg(long, required_unless_present = "finite")]
    pub corpus: Option<PathBuf>,
    /// Compare with the partition induced by this statistic.
    #[arg(long)]
    pub statistic: Option<PathBuf>,
    /// Include canonical statistic vectors under the default mixture over the grid.
    #[arg(long)]
    pub canonical: bool,
    #[arg(long)]
    pub assignment: Option<PathBuf>,
    /// Finite model; prints its exact minimal partition.
    #[arg(long, conflicts_with_all = ["model", "grid", "corpus", "statistic", "canonical", "assignment"])]
    pub finite: Option<PathBuf>,
    /// With `--finite`: check sufficiency of this label statistic's partition.
    #[arg(long, requires = "finite")]
    pub label_statistic: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum CheckCommand {
    /// Pair implication: proportional over theta0 implies equal statistic.
    M31(M31Args),
    /// Approximation and biconditional check over theta0 and a probe.
    M32(M32Args),
    /// Affine independence of the natural parameters on a probe.
    M33(M33Args),
    /// Validate f = g(T) h on grid x corpus.
    Factorization(FactorizationArgs),
}

#[derive(Debug, Args)]
pub struct M31Args {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub statistic: PathBuf,
    #[arg(long)]
    pub theta0: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    /// Factorization `{"g", "h"}` certifying sufficiency.
    #[arg(long, conflicts_with = "certified")]
    pub factorization: Option<PathBuf>,
    /// Take sufficiency of the statistic as given.
    #[arg(long)]
    pub certified: bool,
}

#[derive(Debug, Args)]
pub struct M32Args {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub statistic: PathBuf,
    #[arg(long)]
    pub theta0: PathBuf,
    #[arg(long)]
    pub probe: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
}

#[derive(Debug, Args)]
pub struct M33Args {
    #[arg(long)]
    pub expfam: PathBuf,
    #[arg(long)]
    pub probe: PathBuf,
}

#[derive(Debug, Args)]
pub struct FactorizationArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub statistic: PathBuf,
    #[arg(long)]
    pub factorization: PathBuf,
    #[arg(long)]
    pub grid: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum DemoCommand {
    /// The four-point counterexample to separation-based minimality.
    Pfanzagl {
        /// Use the reference measure with mass 1/4 per point.
        #[arg(long)]
        scaled: bool,
    },
    /// Version perturbations of the Gaussian density.
    Versions {
        #[arg(long, default_value_t = 2)]
        n: usize,
        /// Corpus file; defaults to {(1,-1), (0,0), (2,-2)}.
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct TvArgs {
    /// Finite model; defaults to the four-point model.
    #[arg(long)]
    pub finite: Option<PathBuf>,
    #[arg(allow_hyphen_values = true)]
    pub theta_a: String,
    #[arg(allow_hyphen_values = true)]
    pub theta_b: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub tool_version: String,
    pub command: String,
    pub inputs: Vec<InputDigest>,
    pub status: String,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    pub findings: Value,
    pub timing_ms: u64,
}

#[derive(Debug)]
pub struct InputError(pub String);

impl<E: std::fmt::Display> From<E> for InputError {
    fn from(e: E) -> Self {
        InputError(e.to_string())
    }
}

struct Inputs(Vec<InputDigest>);

impl Inputs {
    fn read(&mut self, role: &str, path: &Path) -> Result<String, InputError> {
        let bytes =
            std::fs::read(path).map_err(|e| InputError(format!("{}: {e}", path.display())))?;
        self.0.push(InputDigest {
            role: role.into(),
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
        String::from_utf8(bytes).map_err(|_| InputError(format!("{}: not UTF-8", path.display())))
    }

    fn with_context<T, E: std::fmt::Display>(
        path: &Path,
        r: Result<T, E>,
    ) -> Result<T, InputError> {
        r.map_err(|e| InputError(format!("{}: {e}", path.display())))
    }

    fn model(&mut self, path: &Path, assignment: Option<&Path>) -> Result<Model, InputError> {
        let text = self.read("model", path)?;
        let m = Self::with_context(path, load_model(&text))?;
        match assignment {
            None => Ok(m),
            Some(a) => {
                let text = self.read("assignment", a)?;
                let va = Self::with_context(a, VersionAssignment::load(&text))?;
                Self::with_context(a, perturb(&m, &va))
            }
        }
    }

    fn grid(&mut self, role: &str, path: &Path) -> Result<ParamGrid, InputError> {
        let text = self.read(role, path)?;
        Self::with_context(path, ParamGrid::load(&text))
    }

    fn corpus(&mut self, path: &Path) -> Result<Corpus, InputError> {
        let text = self.read("corpus", path)?;
        Self::with_context(path, Corpus::load(&text))
    }

    fn statistic(&mut self, path: &Path, sample_dim: usize) -> Result<Statistic, InputError> {
        let text = self.read("statistic", path)?;
        Self::with_context(path, Statistic::load(&text, sample_dim))
    }

    fn factorization(
        &mut self,
        path: &Path,
        m: &Model,
        s: &Statistic,
    ) -> Result<Factorization, InputError> {
        let text = self.read("factorization", path)?;
        let doc: FactorizationDoc = Self::with_context(path, serde_json::from_str(&text))?;
        Self::with_context(path, Factorization::from_doc(&doc, m, s))
    }

    fn finite(&mut self, path: &Path) -> Result<FiniteModel, InputError> {
        let text = self.read("finite", path)?;
        Self::with_context(path, FiniteModel::load(&text))
    }
}

fn parse_vector(text: &str) -> Result<Vec<f64>, InputError> {
    if text.trim().is_empty() {
        return Ok(vec![]);
    }
    text.split(',')
        .map(|s| parse_constant(s.trim()).map_err(|e| InputError(format!("`{s}`: {e}"))))
        .collect()
}

fn status_exit(s: Status) -> i32 {
    match s {
        Status::VerifiedOnProbe => EXIT_OK,
        Status::Refuted => EXIT_REFUTED,
        Status::Inconclusive => EXIT_INCONCLUSIVE,
    }
}

struct Outcome {
    status: String,
    exit_code: i32,
    verdict: Option<Verdict>,
    findings: Value,
}

impl Outcome {
    fn verdict(v: Verdict) -> Outcome {
        Outcome {
            status: v.status.as_str().into(),
            exit_code: status_exit(v.status),
            verdict: Some(v),
            findings: Value::Null,
        }
    }

    fn done(findings: Value) -> Outcome {
        Outcome {
            status: "ok".into(),
            exit_code: EXIT_OK,
            verdict: None,
            findings,
        }
    }
}

fn run_eval(a: &EvalArgs, inputs: &mut Inputs) -> Result<Outcome, InputError> {
    let model = match (&a.model, &a.expr) {
        (Some(p), _) => Some(inputs.model(p, a.assignment.as_deref())?),
        (None, Some(_)) if a.assignment.is_some() => {
            return Err(InputError("--assignment needs --model".into()));
        }
        (None, Some(_)) => None,
        (None, None) => return Err(InputError("give --model or --expr".into())),
    };
    let thetas: Vec<Vec<f64>> = match (&a.theta, &a.grid) {
        (Some(t), _) => vec![parse_vector(t)?],
        (None, Some(g)) => inputs.grid("grid", g)?.points,
        (None, None) => vec![vec![]],
    };
    let xs: Vec<Vec<f64>> = match (&a.x, &a.corpus) {
        (Some(x), _) => vec![parse_vector(x)?],
        (None, Some(c)) => inputs.corpus(c)?.points,
        (None, None) => vec![vec![]],
    };

    let mut rows = Vec::new();
    match (&model, &a.expr) {
        (Some(m), _) => {
            for t in &thetas {
                for x in &xs {
                    let l = m.log_density(t, x)?;
                    rows.push(json!({"theta": t, "x": x, "log_density": l, "density": l.exp()}));
                }
            }
        }
        (None, Some(text)) => {
            let e = expr::parse(text, a.sample_dim, a.param_dim)?;
            for t in &thetas {
                for x in &xs {
                    if x.len() != a.sample_dim || t.len() != a.param_dim {
                        return Err(InputError(format!(
                            "expected x of length {} and theta of length {}",
                            a.sample_dim, a.param_dim
                        )));
                    }
                    let v = expr::eval(&e, x, t);
                    let log = expr::eval_log(&e, x, t).ok().map(|r| r.value);
                    rows.push(json!({"theta": t, "x": x, "value": v.value, "nan": v.nan, "log_value": log}));
                }
            }
        }
        (None, None) => unreachable!(),
    }
    Ok(Outcome::done(json!({ "values": rows })))
}

fn run_partition(a: &PartitionArgs, inputs: &mut Inputs, tol: f64) -> Result<Outcome, InputError> {
    if let Some(f) = &a.finite {
        let fm = inputs.finite(f)?;
        let min = minimal_partition(&fm);
        let labels = |p: &crate::ratio::Partition| -> Vec<Vec<String>> {
            p.blocks
                .iter()
                .map(|b| b.iter().map(|&i| fm.points[i].clone()).collect())
                .collect()
        };
        let mut out = json!({
            "model": fm.name,
            "probe": fm.probe.iter().map(format_rational).collect::<Vec<_>>(),
            "minimal_partition": labels(&min),
        });
        if let Some(p) = &a.label_statistic {
            let text = inputs.read("label_statistic", p)?;
            let t = Inputs::with_context(p, LabelStatistic::load(&text))?;
            let tp = t.partition(&fm)?;
            let check = is_sufficient_partition(&fm, &tp)?;
            out["statistic_partition"] = json!(labels(&tp));
            out["statistic_sufficient"] = serde_json::to_value(&check)?;
            out["statistic_refines_minimal"] = json!(refines(&tp, &min)?);
            out["minimal_refines_statistic"] = json!(refines(&min, &tp)?);
        }
        return Ok(Outcome::done(out));
    }

    let (Some(mp), Some(gp), Some(cp)) = (&a.model, &a.grid, &a.corpus) else {
        return Err(InputError(
            "--model, --grid and --corpus are required".into(),
        ));
    };
    let m = inputs.model(mp, a.assignment.as_deref())?;
    let grid = inputs.grid("grid", gp)?;
    let corpus = inputs.corpus(cp)?;
    let rp = ratio_partition(&m, &grid, &corpus, tol)?;
    let mut out = json!({ "ratio_partition": rp });
    if let Some(sp) = &a.statistic {
        let s = inputs.statistic(sp, m.sample_dim())?;
        let st = statistic_partition(&s, &corpus)?;
        out["statistic_refines_ratio"] = json!(refines(&st.partition, &rp)?);
        out["ratio_refines_statistic"] = json!(refines(&rp, &st.partition)?);
        out["statistic_partition"] = serde_json::to_value(&st)?;
    }
    if a.canonical {
        let mix = MixtureSpec::default_for(grid.clone());
        let vectors = corpus
            .points
            .iter()
            .map(|x| canonical_statistic(&m, &mix, x))
            .collect::<Result<Vec<_>, _>>()?;
        out["mixture_weights"] = json!(mix.weights);
        out["canonical_statistic"] = json!(vectors);
    }
    Ok(Outcome::done(out))
}

fn run_check(c: &CheckCommand, inputs: &mut Inputs, cli: &Cli) -> Result<Outcome, InputError> {
    let v = match c {
        CheckCommand::M31(a) => {
            let m = inputs.model(&a.model, None)?;
            let s = inputs.statistic(&a.statistic, m.sample_dim())?;
            let t0 = inputs.grid("theta0", &a.theta0)?;
            let corpus = inputs.corpus(&a.corpus)?;
            let fac = match &a.factorization {
                Some(p) => Some(inputs.factorization(p, &m, &s)?),
                None => None,
            };
            let evidence = match (&fac, a.certified) {
                (Some(f), _) => SufficiencyEvidence::ValidatedByFactorization(f),
                (None, true) => SufficiencyEvidence::CertifiedByUser,
                (None, false) => SufficiencyEvidence::Missing,
            };
            check_method_31(&m, &s, &t0, &corpus, cli.tol, evidence)?
        }
        CheckCommand::M32(a) => {
            let m = inputs.model(&a.model, None)?;
            let s = inputs.statistic(&a.statistic, m.sample_dim())?;
            let t0 = inputs.grid("theta0", &a.theta0)?;
            let probe = inputs.grid("probe", &a.probe)?;
            let corpus = inputs.corpus(&a.corpus)?;
            let opts = Method32Options {
                tol: cli.tol,
                neighbor_count: cli.neighbors,
                radius: cli.radius,
            };
            check_method_32(&m, &s, &t0, &probe, &corpus, &opts)?
        }
        CheckCommand::M33(a) => {
            let text = inputs.read("expfam", &a.expfam)?;
            let ef = Inputs::with_context(&a.expfam, ExpFamSpec::load(&text))?;
            let probe = inputs.grid("probe", &a.probe)?;
            check_method_33(&ef, &probe, cli.pivot_tol)?
        }
        CheckCommand::Factorization(a) => {
            let m = inputs.model(&a.model, None)?;
            let s = inputs.statistic(&a.statistic, m.sample_dim())?;
            let fac = inputs.factorization(&a.factorization, &m, &s)?;
            let grid = inputs.grid("grid", &a.grid)?;
            let corpus = inputs.corpus(&a.corpus)?;
            check_factorization(&m, &s, &fac, &grid, &corpus, cli.tol)?
        }
    };
    Ok(Outcome::verdict(v))
}

fn run_demo(d: &DemoCommand, inputs: &mut Inputs, tol: f64) -> Result<Outcome, InputError> {
    let (reproduced, status, findings) = match d {
        DemoCommand::Pfanzagl { scaled } => {
            let r = crate::finite::demo_pfanzagl(*scaled);
            (r.reproduced, r.status.clone(), serde_json::to_value(&r)?)
        }
        DemoCommand::Versions { n, corpus } => {
            let c = match corpus {
                Some(p) => inputs.corpus(p)?,
                None => crate::fixtures::get("versions")
                    .expect("shipped fixture")
                    .corpus()?,
            };
            let r = demo_versions(*n, &c, tol)?;
            (r.reproduced, r.status.clone(), serde_json::to_value(&r)?)
        }
    };
    Ok(Outcome {
        status,
        exit_code: if reproduced { EXIT_OK } else { EXIT_REFUTED },
        verdict: None,
        findings,
    })
}

fn run_tv(a: &TvArgs, inputs: &mut Inputs) -> Result<Outcome, InputError> {
    let fm = match &a.finite {
        Some(p) => inputs.finite(p)?,
        None => crate::fixtures::get("four-point")
            .expect("shipped fixture")
            .finite()?,
    };
    let d = tv_distance(&fm, &a.theta_a, &a.theta_b)?;
    Ok(Outcome::done(json!({
        "model": fm.name,
        "theta_a": a.theta_a,
        "theta_b": a.theta_b,
        "distance": format_rational(&d),
    })))
}

fn text_summary(r: &Report) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "status: {} (exit {})", r.status, r.exit_code);
    if let Some(v) = &r.verdict {
        let _ = writeln!(s, "{}", v.narrative);
        for w in &v.witnesses {
            let _ = writeln!(s, "  {}", serde_json::to_string(w).unwrap_or_default());
        }
    }
    match &r.findings {
        Value::Null => {}
        Value::Object(map) => {
            for (k, v) in map {
                let _ = writeln!(s, "{k}: {}", serde_json::to_string(v).unwrap_or_default());
            }
        }
        other => {
            let _ = writeln!(s, "{other}");
        }
    }
    for i in &r.inputs {
        let _ = writeln!(s, "input {} {} sha256:{}", i.role, i.path, i.sha256);
    }
    s
}

fn configure_threads() -> Result<(), InputError> {
    let Ok(v) = std::env::var("MINSUFF_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        InputError(format!(
            "MINSUFF_THREADS must be a positive integer, got `{v}`"
        ))
    })?;
    // A second call in the same process fails harmlessly; the first pool stays.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}

/// Runs the tool on parsed arguments and returns the report.
pub fn execute(cli: &Cli, command: String) -> Result<Report, InputError> {
    let start = Instant::now();
    let mut inputs = Inputs(Vec::new());
    let outcome = match &cli.command {
        Command::Eval(a) => run_eval(a, &mut inputs)?,
        Command::Partition(a) => run_partition(a, &mut inputs, cli.tol)?,
        Command::Check(c) => run_check(c, &mut inputs, cli)?,
        Command::Demo(d) => run_demo(d, &mut inputs, cli.tol)?,
        Command::Tv(a) => run_tv(a, &mut inputs)?,
    };
    Ok(Report {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        command,
        inputs: inputs.0,
        status: outcome.status,
        exit_code: outcome.exit_code,
        verdict: outcome.verdict,
        findings: outcome.findings,
        timing_ms: start.elapsed().as_millis() as u64,
    })
}

/// Entry point; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let argv: Vec<std::ffi::OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("minsuff: {}", e.0);
        return EXIT_INPUT;
    }
    let command = argv
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join(" ");
    let report = match execute(&cli, command) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("minsuff: {}", e.0);
            return EXIT_INPUT;
        }
    };
    let json = match serde_json::to_string_pretty(&report) {
        Ok(j) => j,
        Err(e) => {
            eprintln!("minsuff: {e}");
            return EXIT_INPUT;
        }
    };
    if let Some(p) = &cli.report {
        if let Err(e) = std::fs::write(p, format!("{json}\n")) {
            eprintln!("minsuff: {}: {e}", p.display());
            return EXIT_INPUT;
        }
    }
    // A closed stdout (for example `| head`) is not an error of the run.
    let mut out = std::io::stdout().lock();
    let _ = if cli.json {
        writeln!(out, "{json}")
    } else {
        write!(out, "{}", text_summary(&report))
    };
    report.exit_code
}
