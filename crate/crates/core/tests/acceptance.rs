//! One PASS/FAIL line per acceptance criterion. Runs as a plain binary
//! (`harness = false`) and exits non-zero if any criterion fails.

use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use minsuff::criteria::{check_method_31, SufficiencyEvidence};
use minsuff::finite::{
    demo_pfanzagl, four_point_model, is_function_of, is_sufficient_partition, minimal_partition,
    set_partitions, tv_distance, LabelStatistic, Rational,
};
use minsuff::fixtures;
use minsuff::model::{Model, ParamGrid, Statistic};
use minsuff::ratio::{
    canonical_equal, canonical_log_statistic, proportional, refines, MixtureSpec, Partition,
    DEFAULT_TOL,
};
use minsuff::versions::{demo_versions, gaussian_model, VersionPair};
use num_traits::{Signed, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Outcome = Result<String, String>;
type Check = fn() -> Outcome;

fn fixture_dir(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

fn file(fixture: &str, stem: &str) -> String {
    fixture_dir(fixture)
        .join(format!("{stem}.json"))
        .display()
        .to_string()
}

struct Run {
    code: i32,
    json: Value,
    elapsed: Duration,
}

fn cli(args: &[&str]) -> Result<Run, String> {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_minsuff"))
        .arg("--json")
        .args(args)
        .output()
        .map_err(|e| format!("spawn failed: {e}"))?;
    let elapsed = start.elapsed();
    let code = out.status.code().ok_or("killed by a signal")?;
    let json = serde_json::from_slice(&out.stdout).map_err(|e| {
        format!(
            "{args:?}: bad JSON ({e}); stderr: {}",
            String::from_utf8_lossy(&out.stderr)
        )
    })?;
    Ok(Run {
        code,
        json,
        elapsed,
    })
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ensure_fast(r: &Run, limit: Duration, what: &str) -> Result<(), String> {
    ensure(r.elapsed < limit, || {
        format!("{what} took {:?}, limit {limit:?}", r.elapsed)
    })
}

fn q(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

fn rational_of(v: &Value) -> Result<Rational, String> {
    let s = v
        .as_str()
        .ok_or_else(|| format!("expected a rational string, got {v}"))?;
    minsuff::finite::parse_rational(s).map_err(|e| e.to_string())
}

fn four_point_counterexample() -> Outcome {
    let r = cli(&["demo", "pfanzagl"])?;
    ensure(r.code == 0, || format!("exit {}", r.code))?;
    ensure_fast(&r, Duration::from_secs(1), "demo")?;
    let f = &r.json["findings"];

    let blocks = &f["minimal"]["partition"]["blocks"];
    ensure(
        *blocks == serde_json::json!([["1", "2"], ["3", "4"]]),
        || format!("minimal partition {blocks}"),
    )?;

    // theta/3, 2 theta/3, (1 - theta)/3, 2 (1 - theta)/3
    let probe = [q(1, 4), q(1, 2), q(3, 4)];
    let rows = f["densities"].as_array().ok_or("no densities")?;
    ensure(rows.len() == 3, || "expected three probe rows".into())?;
    for (t, row) in probe.iter().zip(rows) {
        let one = Rational::from_integer(1.into());
        let expect = [
            t / q(3, 1),
            t * q(2, 3),
            (&one - t) / q(3, 1),
            (&one - t) * q(2, 3),
        ];
        let got = row
            .as_array()
            .ok_or("row")?
            .iter()
            .map(rational_of)
            .collect::<Result<Vec<_>, _>>()?;
        ensure(got == expect, || format!("theta {t}: {got:?}"))?;
    }
    let vectors = f["separation"]["vectors"]
        .as_array()
        .ok_or("no separation table")?;
    ensure(
        vectors.len() == 4 && f["separation"]["distinct"] == true,
        || "separation table".into(),
    )?;

    let w = &f["u_not_function_of_t"];
    ensure(
        w["holds"] == false && w["witness"] == serde_json::json!(["1", "2"]),
        || format!("function check {w}"),
    )?;

    // Same facts from the library, without the CLI.
    let fm = four_point_model(&probe);
    let t = LabelStatistic::new("T", [("1", "1"), ("2", "1"), ("3", "0"), ("4", "0")]);
    let u = LabelStatistic::identity(&fm);
    let check = is_function_of(&u, &t, &fm).map_err(|e| e.to_string())?;
    ensure(
        !check.holds && check.witness == Some(("1".into(), "2".into())),
        || format!("{check:?}"),
    )?;
    ensure(demo_pfanzagl(false).reproduced, || {
        "library demo not reproduced".into()
    })?;
    Ok(format!(
        "exit 0 in {:?}, minimal {{1,2}},{{3,4}}, witness (1,2)",
        r.elapsed
    ))
}

fn version_collapse() -> Outcome {
    let r = cli(&["demo", "versions", "--n", "2"])?;
    ensure(r.code == 0, || format!("exit {}", r.code))?;
    ensure_fast(&r, Duration::from_secs(1), "demo")?;
    let f = &r.json["findings"];
    ensure(
        f["corpus"] == serde_json::json!([[1.0, -1.0], [0.0, 0.0], [2.0, -2.0]]),
        || format!("corpus {}", f["corpus"]),
    )?;

    let pairs = f["equal_sum_pairs"].as_array().ok_or("no pairs")?;
    ensure(pairs.len() == 3, || {
        format!("{} equal-sum pairs", pairs.len())
    })?;
    let mut saw_e = false;
    for p in pairs {
        ensure(p["unperturbed"]["in_d"] == true, || {
            format!("unperturbed not in D: {p}")
        })?;
        ensure(p["perturbed"]["in_d"] == false, || {
            format!("perturbed still in D: {p}")
        })?;
        ensure(!p["perturbed"]["zero_pattern_conflict"].is_null(), || {
            format!("no zero-pattern witness: {p}")
        })?;
        if p["x"] == serde_json::json!([1.0, -1.0]) && p["y"] == serde_json::json!([0.0, 0.0]) {
            let h = p["unperturbed"]["h"].as_f64().ok_or("h missing")?;
            let e = std::f64::consts::E;
            ensure((h - e).abs() <= 1e-12 * e, || {
                format!("h = {h}, expected e")
            })?;
            saw_e = true;
        }
    }
    ensure(saw_e, || "pair (1,-1),(0,0) not reported".into())?;

    let before = serde_json::to_string(&f["m31_unperturbed"]).map_err(|e| e.to_string())?;
    let after = serde_json::to_string(&f["m31_perturbed"]).map_err(|e| e.to_string())?;
    ensure(before == after, || {
        "m31 verdicts differ between versions".into()
    })?;
    ensure(
        f["m31_unperturbed"]["status"] == "verified_on_probe",
        || "m31 not verified".into(),
    )?;

    // Re-run the m31 pair test directly on both versions of the model.
    let report = demo_versions(
        2,
        &fixtures::get("versions")
            .unwrap()
            .corpus()
            .map_err(|e| e.to_string())?,
        DEFAULT_TOL,
    )
    .map_err(|e| e.to_string())?;
    let m = gaussian_model(2).map_err(|e| e.to_string())?;
    let pm = minsuff::versions::perturb(&m, &report.assignment).map_err(|e| e.to_string())?;
    let theta0 =
        ParamGrid::scalar("theta0", &minsuff::versions::DEMO_THETA0).map_err(|e| e.to_string())?;
    let corpus = fixtures::get("versions")
        .unwrap()
        .corpus()
        .map_err(|e| e.to_string())?;
    let s = Statistic::new("sum", &["sum{i}(x[i])"], &[], 2, None).map_err(|e| e.to_string())?;
    let run = |model: &Model| {
        check_method_31(
            model,
            &s,
            &theta0,
            &corpus,
            DEFAULT_TOL,
            SufficiencyEvidence::CertifiedByUser,
        )
        .map(|v| serde_json::to_string(&v).unwrap())
        .map_err(|e| e.to_string())
    };
    ensure(run(&m)? == run(&pm)?, || {
        "library m31 verdicts differ".into()
    })?;
    ensure(
        report
            .assignment
            .pairs
            .iter()
            .all(|VersionPair { theta, .. }| !theta0.contains(theta)),
        || "theta0 meets the assignment".into(),
    )?;
    Ok(format!(
        "exit 0 in {:?}, h = e, 3/3 pairs split, m31 byte-identical",
        r.elapsed
    ))
}

fn det3(m: [[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn rank_test() -> Outcome {
    let d = "ex46-normal-scale";
    let r = cli(&[
        "check",
        "m33",
        "--expfam",
        &file(d, "expfam"),
        "--probe",
        &file(d, "probe"),
    ])?;
    ensure(r.code == 0, || format!("exit {}", r.code))?;
    ensure_fast(&r, Duration::from_secs(1), "m33")?;
    let w = r.json["verdict"]["witnesses"]
        .as_array()
        .and_then(|ws| ws.iter().find(|w| w["kind"] == "rank_witness"))
        .ok_or("no rank witness")?;
    ensure(w["rank"] == 3, || format!("rank {}", w["rank"]))?;
    let thetas: Vec<f64> = w["thetas"]
        .as_array()
        .ok_or("thetas")?
        .iter()
        .map(|t| t[0].as_f64().unwrap())
        .collect();
    ensure(thetas == [1.0, 2.0, 3.0], || {
        format!("witness thetas {thetas:?}")
    })?;
    // rows (1, 1/t, -1/(2 t^2))
    let row = |t: f64| [1.0, 1.0 / t, -1.0 / (2.0 * t * t)];
    let oracle = det3([row(1.0), row(2.0), row(3.0)]);
    let got = w["determinant"].as_f64().ok_or("determinant")?;
    ensure((got - oracle).abs() <= 1e-12 * oracle.abs(), || {
        format!("det {got} vs cofactor {oracle}")
    })?;

    let m = cli(&[
        "check",
        "m33",
        "--expfam",
        &file(d, "expfam_mutant"),
        "--probe",
        &file(d, "probe"),
    ])?;
    ensure(m.code == 2 && m.json["status"] == "inconclusive", || {
        format!("mutant exit {}", m.code)
    })?;
    ensure_fast(&m, Duration::from_secs(1), "m33 mutant")?;
    Ok(format!(
        "rank 3, det {got:.15} (cofactor {oracle:.15}), mutant inconclusive"
    ))
}

/// Recomputes a reported pair from the linear-scale density: proportional
/// over `grid` iff the zero patterns agree and the ratios spread by at most
/// `tol` in log scale.
fn independently_proportional(m: &Model, grid: &ParamGrid, x: &[f64], y: &[f64], tol: f64) -> bool {
    let mut ratios = Vec::new();
    for t in &grid.points {
        let (fx, fy) = (m.density_at(t, x).unwrap(), m.density_at(t, y).unwrap());
        match (fx > 0.0, fy > 0.0) {
            (true, true) => ratios.push((fy / fx).ln()),
            (false, false) => {}
            _ => return false,
        }
    }
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    ratios.is_empty() || hi - lo <= tol
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array()
        .map(|a| a.iter().filter_map(Value::as_f64).collect())
        .unwrap_or_default()
}

fn fixture_suite() -> Outcome {
    let start = Instant::now();
    let mut notes = Vec::new();
    for name in [
        "ex41-cauchy-scale",
        "ex42-shifted-exponential",
        "ex43-truncated-normal",
        "ex44-triangle-pairs",
    ] {
        let fx = fixtures::get(name).unwrap();
        let m = fx.model().map_err(|e| e.to_string())?;
        let theta0 = fx.grid("theta0").map_err(|e| e.to_string())?;
        let common = [
            "--model",
            &file(name, "model"),
            "--theta0",
            &file(name, "theta0"),
            "--corpus",
            &file(name, "corpus"),
        ];
        let args = |stat: &str, fac: &str| {
            let mut a = vec!["check".to_string(), "m31".into()];
            a.extend(common.iter().map(|s| s.to_string()));
            a.extend([
                "--statistic".into(),
                file(name, stat),
                "--factorization".into(),
                file(name, fac),
            ]);
            a
        };
        let ok = args("statistic", "factorization");
        let r = cli(&ok.iter().map(String::as_str).collect::<Vec<_>>())?;
        ensure(r.code == 0, || format!("{name}: exit {}", r.code))?;

        let bad = args("mutant", "mutant_factorization");
        let r = cli(&bad.iter().map(String::as_str).collect::<Vec<_>>())?;
        ensure(r.code == 1, || format!("{name} mutant: exit {}", r.code))?;
        let mutant = fx
            .statistic("mutant", m.sample_dim())
            .map_err(|e| e.to_string())?;
        let witnesses: Vec<&Value> = r.json["verdict"]["witnesses"]
            .as_array()
            .ok_or("witnesses")?
            .iter()
            .filter(|w| w["kind"] == "pair_implication")
            .collect();
        ensure(!witnesses.is_empty(), || {
            format!("{name} mutant: no witness pair")
        })?;
        for w in &witnesses {
            let (x, y) = (floats(&w["x"]), floats(&w["y"]));
            ensure(
                independently_proportional(&m, &theta0, &x, &y, 1e-9),
                || format!("{name}: {x:?} {y:?} not proportional"),
            )?;
            let (tx, ty) = (mutant.apply(&x).unwrap(), mutant.apply(&y).unwrap());
            ensure(!mutant.values_equal(&tx, &ty), || {
                format!("{name}: mutant values agree at {x:?} {y:?}")
            })?;
        }
        notes.push(format!("{name} {} witness(es)", witnesses.len()));
    }

    let name = "ex45-cauchy-location";
    let fx = fixtures::get(name).unwrap();
    let m = fx.model().map_err(|e| e.to_string())?;
    let grid = fx.grid("theta0").unwrap().union(&fx.grid("probe").unwrap());
    let base = |stat: &str| {
        vec![
            "check".to_string(),
            "m32".into(),
            "--model".into(),
            file(name, "model"),
            "--theta0".into(),
            file(name, "theta0"),
            "--probe".into(),
            file(name, "probe"),
            "--corpus".into(),
            file(name, "corpus"),
            "--statistic".into(),
            file(name, stat),
        ]
    };
    let r = cli(&base("statistic")
        .iter()
        .map(String::as_str)
        .collect::<Vec<_>>())?;
    ensure(r.code == 0, || format!("{name}: exit {}", r.code))?;
    let r = cli(&base("mutant")
        .iter()
        .map(String::as_str)
        .collect::<Vec<_>>())?;
    ensure(r.code == 1, || format!("{name} mutant: exit {}", r.code))?;
    let mutant = fx.statistic("mutant", 3).unwrap();
    let witnesses: Vec<&Value> = r.json["verdict"]["witnesses"]
        .as_array()
        .ok_or("witnesses")?
        .iter()
        .filter(|w| w["kind"] == "biconditional")
        .collect();
    ensure(!witnesses.is_empty(), || {
        format!("{name} mutant: no witness pair")
    })?;
    for w in &witnesses {
        let (x, y) = (floats(&w["x"]), floats(&w["y"]));
        let same_t = mutant.values_equal(&mutant.apply(&x).unwrap(), &mutant.apply(&y).unwrap());
        let prop = independently_proportional(&m, &grid, &x, &y, 1e-9);
        ensure(same_t != prop, || {
            format!("{name}: pair {x:?} {y:?} is consistent")
        })?;
    }
    notes.push(format!("{name} {} witness(es)", witnesses.len()));

    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(10), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!("{} in {elapsed:?}", notes.join(", ")))
}

fn equivalence_properties() -> Outcome {
    let tol = DEFAULT_TOL;
    let mut rng = ChaCha8Rng::seed_from_u64(20261019);
    let models: Vec<(Model, (f64, f64))> = [
        "ex41-cauchy-scale",
        "ex42-shifted-exponential",
        "ex43-truncated-normal",
        "ex45-cauchy-location",
        "ex46-normal-scale",
        "modified-statistic",
    ]
    .iter()
    .map(|n| (fixtures::get(n).unwrap().model().unwrap(), (0.2, 3.0)))
    .collect();

    let (mut proportional_pairs, mut transitive_chains) = (0, 0);
    for k in 0..1000 {
        let (m, (lo, hi)) = &models[k % models.len()];
        let d = m.sample_dim();
        let size = rng.gen_range(2..8);
        let small: Vec<f64> = (0..size).map(|_| rng.gen_range(*lo..*hi)).collect();
        let extra: Vec<f64> = (0..rng.gen_range(1..4))
            .map(|_| rng.gen_range(*lo..*hi))
            .collect();
        let grid = ParamGrid::scalar("g", &small).unwrap();
        let bigger = grid.union(&ParamGrid::scalar("e", &extra).unwrap());
        let x: Vec<f64> = (0..d).map(|_| rng.gen_range(0.5..3.0)).collect();
        // Permutations and sign flips keep many pairs proportional.
        let shuffle = |rng: &mut ChaCha8Rng| {
            let mut y = x.clone();
            y.shuffle(rng);
            if rng.gen_bool(0.3) {
                y.iter_mut().for_each(|v| *v = -*v);
            }
            if rng.gen_bool(0.2) {
                y[0] += 0.25;
            }
            y
        };
        let (y, z) = (shuffle(&mut rng), shuffle(&mut rng));
        let p = |a: &[f64], b: &[f64], g: &ParamGrid, t: f64| {
            proportional(m, g, a, b, t).map_err(|e| e.to_string())
        };

        let refl = p(&x, &x, &grid, tol)?;
        ensure(
            refl.in_d && refl.h == Some(1.0) && refl.log_spread == 0.0,
            || format!("reflexivity at {x:?}: {refl:?}"),
        )?;

        let (xy, yx) = (p(&x, &y, &grid, tol)?, p(&y, &x, &grid, tol)?);
        ensure(xy.in_d == yx.in_d, || {
            format!("symmetry of membership {x:?} {y:?}")
        })?;
        if let (Some(a), Some(b)) = (xy.h, yx.h) {
            let prod = a * b;
            ensure(
                prod >= (-2.0 * tol).exp() && prod <= (2.0 * tol).exp(),
                || format!("h product {prod} at {x:?} {y:?}"),
            )?;
            proportional_pairs += 1;
        }

        let yz = p(&y, &z, &grid, tol)?;
        if xy.in_d && yz.in_d {
            let xz = p(&x, &z, &grid, 2.0 * tol)?;
            ensure(xz.in_d, || format!("transitivity {x:?} {y:?} {z:?}"))?;
            transitive_chains += 1;
        }

        let big = p(&x, &y, &bigger, tol)?;
        ensure(!big.in_d || xy.in_d, || format!("monotonicity {x:?} {y:?}"))?;
    }
    Ok(format!(
        "1000 instances, {proportional_pairs} proportional pairs, {transitive_chains} transitive chains, 0 failures"
    ))
}

fn finite_exact() -> Outcome {
    let fm = four_point_model(&[q(1, 4), q(1, 2), q(3, 4)]);
    let minimal = minimal_partition(&fm);
    let expected = Partition::from_blocks(
        vec![vec![0, 1], vec![2, 3]],
        minimal.corpus_label.clone(),
        4,
    )
    .unwrap();
    ensure(minimal == expected, || {
        format!("minimal {:?}", minimal.blocks)
    })?;

    let all = set_partitions(4);
    ensure(all.len() == 15, || format!("{} partitions", all.len()))?;
    let mut sufficient = 0;
    for blocks in all {
        let p = Partition::from_blocks(blocks, minimal.corpus_label.clone(), 4).unwrap();
        if is_sufficient_partition(&fm, &p)
            .map_err(|e| e.to_string())?
            .sufficient
        {
            sufficient += 1;
            ensure(refines(&p, &minimal).unwrap(), || {
                format!("{:?} is sufficient but not finer than minimal", p.blocks)
            })?;
        }
    }
    ensure(sufficient == 4, || {
        format!("{sufficient} sufficient partitions, expected 4")
    })?;

    let d = tv_distance(&fm, "1/4", "1/2").map_err(|e| e.to_string())?;
    ensure(d == q(1, 4), || format!("tv(1/4, 1/2) = {d}"))?;

    let labels = ["1/4", "1/2", "3/4"];
    let tv = |a: &str, b: &str| tv_distance(&fm, a, b).unwrap();
    let mut triples = 0;
    for a in labels {
        ensure(tv(a, a).is_zero(), || format!("tv({a}, {a}) != 0"))?;
        for b in labels {
            ensure(!tv(a, b).is_negative() && tv(a, b) == tv(b, a), || {
                format!("tv({a}, {b})")
            })?;
            for c in labels {
                ensure(tv(a, c) <= tv(a, b) + tv(b, c), || {
                    format!("triangle {a} {b} {c}")
                })?;
                triples += 1;
            }
        }
    }
    Ok(format!(
        "15 partitions, 4 sufficient, all finer than minimal; tv = 1/4; {triples} triples"
    ))
}

fn canonical_statistic() -> Outcome {
    let tol = 1e-9;
    let mut notes = Vec::new();
    let mut total = 0;
    for name in [
        "ex41-cauchy-scale",
        "ex42-shifted-exponential",
        "ex43-truncated-normal",
        "ex44-triangle-pairs",
        "ex45-cauchy-location",
        "ex46-normal-scale",
        "modified-statistic",
    ] {
        let fx = fixtures::get(name).unwrap();
        let m = fx.model().unwrap();
        let grid = fx.grid("theta0").unwrap();
        let corpus = fx.corpus().unwrap();
        let mix = MixtureSpec::default_for(grid.clone());
        let mut kept = Vec::new();
        for x in &corpus.points {
            let lf = mix.log_density(&m, x).map_err(|e| e.to_string())?;
            if lf.is_finite() {
                kept.push((
                    x,
                    canonical_log_statistic(&m, &mix, x).map_err(|e| e.to_string())?,
                ));
            }
        }
        let mut pairs = 0;
        for (i, (x, gx)) in kept.iter().enumerate() {
            for (y, gy) in &kept[i + 1..] {
                let in_d = proportional(&m, &grid, x, y, tol)
                    .map_err(|e| e.to_string())?
                    .in_d;
                let same = canonical_equal(gx, gy, tol);
                ensure(in_d == same, || {
                    format!("{name}: {x:?} {y:?} in_D={in_d} canonical_equal={same}")
                })?;
                pairs += 1;
            }
        }
        total += pairs;
        notes.push(format!("{name} {pairs}"));
    }
    Ok(format!("{total} pairs, 0 failures ({})", notes.join(", ")))
}

fn main() {
    let criteria: [(&str, Check); 7] = [
        (
            "four-point counterexample reproduced exactly",
            four_point_counterexample,
        ),
        (
            "version perturbation collapses pointwise proportionality",
            version_collapse,
        ),
        ("rank test on the normal scale family", rank_test),
        ("fixture suite with mutants", fixture_suite),
        ("equivalence-relation properties", equivalence_properties),
        ("finite exact coarsest sufficiency", finite_exact),
        (
            "canonical statistic matches proportionality",
            canonical_statistic,
        ),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail}", k + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {why}", k + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
