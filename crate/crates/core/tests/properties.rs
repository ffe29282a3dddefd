use std::collections::BTreeSet;

use minsuff::criteria::{
    check_method_31, check_method_33, numerical_rank, pair_biconditional, Finding, Status,
    SufficiencyEvidence,
};
use minsuff::expr::{eval, eval_log, parse, unparse, AggOp, BinOp, CmpOp, Cond, Expr, Func, Index};
use minsuff::finite::{
    is_sufficient_partition, minimal_partition, set_partitions, tv_between, FiniteModel, Rational,
};
use minsuff::fixtures;
use minsuff::model::{Corpus, Model, ParamGrid};
use minsuff::ratio::{proportional, ratio_partition, refines, Partition, DEFAULT_TOL};
use minsuff::versions::{demo_versions, gaussian_model, perturb, VersionAssignment, VersionPair};
use num_traits::{Signed, Zero};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SD: usize = 3;
const PD: usize = 2;

fn leaf(bound: bool) -> BoxedStrategy<Expr> {
    let mut options: Vec<BoxedStrategy<Expr>> = vec![
        (0u32..1000, 0u32..4)
            .prop_map(|(m, e)| Expr::Num(m as f64 / 10f64.powi(e as i32)))
            .boxed(),
        Just(Expr::Pi).boxed(),
        Just(Expr::SampleSize).boxed(),
        (0..SD).prop_map(|i| Expr::Sample(Index::Fixed(i))).boxed(),
        (0..PD).prop_map(Expr::Param).boxed(),
    ];
    if bound {
        options.push(Just(Expr::Sample(Index::Bound("i".into()))).boxed());
    }
    proptest::strategy::Union::new(options).boxed()
}

fn binop() -> impl Strategy<Value = BinOp> {
    prop_oneof![
        Just(BinOp::Add),
        Just(BinOp::Sub),
        Just(BinOp::Mul),
        Just(BinOp::Div),
        Just(BinOp::Pow)
    ]
}

fn cmpop() -> impl Strategy<Value = CmpOp> {
    prop_oneof![
        Just(CmpOp::Lt),
        Just(CmpOp::Le),
        Just(CmpOp::Gt),
        Just(CmpOp::Ge),
        Just(CmpOp::Eq)
    ]
}

fn fold_left(items: Vec<Cond>, join: fn(Box<Cond>, Box<Cond>) -> Cond) -> Cond {
    let mut it = items.into_iter();
    let first = it.next().expect("non-empty");
    it.fold(first, |acc, c| join(Box::new(acc), Box::new(c)))
}

fn expr_tree(bound: bool) -> BoxedStrategy<Expr> {
    leaf(bound)
        .prop_recursive(4, 24, 3, move |inner| {
            let inner_bound = if bound {
                inner.clone()
            } else {
                expr_tree(true)
            };
            let cmp = (cmpop(), inner.clone(), inner.clone())
                .prop_map(|(op, lhs, rhs)| Cond::Compare { op, lhs, rhs });
            let cond =
                prop::collection::vec(prop::collection::vec(cmp, 1..3), 1..3).prop_map(|ors| {
                    fold_left(
                        ors.into_iter()
                            .map(|ands| fold_left(ands, Cond::And))
                            .collect(),
                        Cond::Or,
                    )
                });
            let agg = prop_oneof![
                Just(AggOp::Sum),
                Just(AggOp::Prod),
                Just(AggOp::Min),
                Just(AggOp::Max)
            ];
            let func = prop_oneof![
                Just(Func::Exp),
                Just(Func::Log),
                Just(Func::Abs),
                Just(Func::Sqrt)
            ];
            let mut options: Vec<BoxedStrategy<Expr>> = vec![
                inner.clone().prop_map(|e| Expr::Neg(Box::new(e))).boxed(),
                (binop(), inner.clone(), inner.clone())
                    .prop_map(|(op, l, r)| Expr::Binary {
                        op,
                        lhs: Box::new(l),
                        rhs: Box::new(r),
                    })
                    .boxed(),
                (func, inner.clone())
                    .prop_map(|(func, a)| Expr::Call {
                        func,
                        arg: Box::new(a),
                    })
                    .boxed(),
                cond.prop_map(|c| Expr::Indicator(Box::new(c))).boxed(),
            ];
            if !bound {
                options.push(
                    (agg, inner_bound)
                        .prop_map(|(op, body)| Expr::Aggregate {
                            op,
                            binder: "i".into(),
                            body: Box::new(body),
                        })
                        .boxed(),
                );
            }
            proptest::strategy::Union::new(options)
        })
        .boxed()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn parse_unparse_round_trip(e in expr_tree(false)) {
        let text = unparse(&e);
        let back = parse(&text, SD, PD).map_err(|err| TestCaseError::fail(format!("{text}: {err}")))?;
        prop_assert_eq!(back, e, "{}", text);
    }
}

#[derive(Clone, Copy)]
enum Domain {
    Real,
    Labels,
}

fn continuous_models() -> Vec<(&'static str, Model, Domain, (f64, f64))> {
    let mut out = Vec::new();
    for f in fixtures::ALL.iter().filter(|f| f.has("model")) {
        let m = f.model().unwrap();
        let (domain, theta) = if f.name == "four-point" {
            (Domain::Labels, (0.05, 0.95))
        } else {
            (Domain::Real, (0.2, 4.0))
        };
        out.push((f.name, m, domain, theta));
    }
    out
}

#[test]
fn log_evaluation_matches_linear_evaluation() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (name, m, domain, (lo, hi)) in continuous_models() {
        let mut positive = 0;
        for _ in 0..1000 {
            let x: Vec<f64> = (0..m.sample_dim())
                .map(|_| match domain {
                    Domain::Real => rng.gen_range(-1.0..4.0),
                    Domain::Labels => rng.gen_range(1..=4) as f64,
                })
                .collect();
            let theta: Vec<f64> = (0..m.param_dim()).map(|_| rng.gen_range(lo..hi)).collect();
            let lin = eval(m.density(), &x, &theta).value;
            let log = eval_log(m.density(), &x, &theta).unwrap().value;
            if lin > 0.0 && lin < 1e300 {
                positive += 1;
                let back = log.exp();
                assert!(
                    (back - lin).abs() <= 1e-12 * lin.max(1.0),
                    "{name}: x={x:?} theta={theta:?} lin={lin} exp(log)={back}"
                );
            } else if lin == 0.0 {
                assert_eq!(log, f64::NEG_INFINITY, "{name}: x={x:?} theta={theta:?}");
            }
        }
        assert!(positive > 0, "{name}: no positive samples");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn sorted_statistics_ignore_coordinate_order(
        x in prop::collection::vec(-5.0f64..5.0, 3),
        perm in Just(vec![0usize, 1, 2]).prop_shuffle(),
    ) {
        let y: Vec<f64> = perm.iter().map(|&k| x[k]).collect();
        for name in ["ex41-cauchy-scale", "ex45-cauchy-location"] {
            let s = fixtures::get(name).unwrap().statistic("statistic", 3).unwrap();
            prop_assert_eq!(s.apply(&x).unwrap(), s.apply(&y).unwrap());
        }
    }

    #[test]
    fn perturbation_is_local(
        cells in prop::collection::vec(((-3i32..3), (-6i32..6), (-6i32..6)), 1..5),
        probes in prop::collection::vec(((-3i32..3), (-6i32..6), (-6i32..6)), 1..30),
    ) {
        let m = gaussian_model(2).unwrap();
        let mut pairs: Vec<VersionPair> = Vec::new();
        for (t, a, b) in cells {
            let theta = vec![t as f64 + 0.5];
            if pairs.iter().all(|p| p.theta != theta) {
                pairs.push(VersionPair { theta, x: vec![a as f64 / 2.0, b as f64 / 2.0] });
            }
        }
        let assignment = VersionAssignment::new(pairs).unwrap();
        let pm = perturb(&m, &assignment).unwrap();
        for (t, a, b) in probes {
            let theta = [t as f64 + 0.5];
            let x = [a as f64 / 2.0, b as f64 / 2.0];
            let hit = assignment.pairs.iter().any(|p| p.theta == theta && p.x == x);
            let (before, after) = (m.log_density(&theta, &x).unwrap(), pm.log_density(&theta, &x).unwrap());
            if hit {
                prop_assert_eq!(after, f64::NEG_INFINITY);
            } else {
                prop_assert_eq!(before.to_bits(), after.to_bits());
            }
        }
    }

    #[test]
    fn ratio_partition_ignores_corpus_order(perm in Just((0..24).collect::<Vec<usize>>()).prop_shuffle()) {
        let f = fixtures::get("ex41-cauchy-scale").unwrap();
        let m = f.model().unwrap();
        let grid = f.grid("theta0").unwrap();
        let corpus = f.corpus().unwrap();
        prop_assume!(perm.len() == corpus.len());
        let shuffled = Corpus::new("shuffled", perm.iter().map(|&k| corpus.points[k].clone()).collect()).unwrap();
        let as_sets = |p: &Partition, c: &Corpus| -> BTreeSet<BTreeSet<String>> {
            p.blocks
                .iter()
                .map(|b| b.iter().map(|&i| format!("{:?}", c.points[i])).collect())
                .collect()
        };
        let a = ratio_partition(&m, &grid, &corpus, DEFAULT_TOL).unwrap();
        let b = ratio_partition(&m, &grid, &shuffled, DEFAULT_TOL).unwrap();
        prop_assert_eq!(as_sets(&a, &corpus), as_sets(&b, &shuffled));
    }

    #[test]
    fn proportionality_shrinks_as_the_grid_grows(
        extra in prop::collection::vec(0.1f64..5.0, 1..6),
        i in 0usize..24,
        j in 0usize..24,
    ) {
        for name in ["ex41-cauchy-scale", "modified-statistic", "ex46-normal-scale"] {
            let f = fixtures::get(name).unwrap();
            let m = f.model().unwrap();
            let t0 = f.grid("theta0").unwrap();
            let corpus = f.corpus().unwrap();
            let (x, y) = (&corpus.points[i % corpus.len()], &corpus.points[j % corpus.len()]);
            let bigger = t0.union(&ParamGrid::scalar("extra", &extra).unwrap());
            let small = proportional(&m, &t0, x, y, DEFAULT_TOL).unwrap();
            let big = proportional(&m, &bigger, x, y, DEFAULT_TOL).unwrap();
            prop_assert!(!big.in_d || small.in_d, "{}: {:?} {:?}", name, x, y);
        }
    }

    #[test]
    fn rank_ignores_row_and_column_doubling(row in 0usize..3, col in 0usize..3, by_row in any::<bool>()) {
        let f = fixtures::get("ex46-normal-scale").unwrap();
        let ef = f.expfam("expfam").unwrap();
        let probe = f.grid("probe").unwrap();
        let mut matrix: Vec<Vec<f64>> = probe.points.iter().map(|t| ef.row(t).unwrap()).collect();
        let before = numerical_rank(&matrix, 1e-10);
        if by_row {
            let k = row % matrix.len();
            matrix[k].iter_mut().for_each(|v| *v *= 2.0);
        } else {
            matrix.iter_mut().for_each(|r| r[col] *= 2.0);
        }
        let after = numerical_rank(&matrix, 1e-10);
        prop_assert_eq!(before.rank, after.rank);
    }
}

#[test]
fn normal_scale_methods_agree() {
    let f = fixtures::get("ex46-normal-scale").unwrap();
    let m = f.model().unwrap();
    let s = f.statistic("statistic", 2).unwrap();
    let fac = f.factorization("factorization", &m, &s).unwrap();
    let m31 = check_method_31(
        &m,
        &s,
        &f.grid("theta0").unwrap(),
        &f.corpus().unwrap(),
        DEFAULT_TOL,
        SufficiencyEvidence::ValidatedByFactorization(&fac),
    )
    .unwrap();
    let m33 = check_method_33(
        &f.expfam("expfam").unwrap(),
        &f.grid("probe").unwrap(),
        None,
    )
    .unwrap();
    assert_eq!(m31.status, Status::VerifiedOnProbe);
    assert_eq!(m33.status, Status::VerifiedOnProbe);
}

/// The biconditional over theta0 alone is the forward pair test plus its converse.
#[test]
fn biconditional_splits_into_both_implications() {
    for (name, stat) in [
        ("ex41-cauchy-scale", "mutant"),
        ("ex45-cauchy-location", "mutant"),
        ("modified-statistic", "raw"),
        ("ex44-triangle-pairs", "statistic"),
    ] {
        let f = fixtures::get(name).unwrap();
        let m = f.model().unwrap();
        let s = f.statistic(stat, m.sample_dim()).unwrap();
        let t0 = f.grid("theta0").unwrap();
        let corpus = f.corpus().unwrap();
        let bi: BTreeSet<(usize, usize, bool)> =
            pair_biconditional(&m, &s, &t0, &corpus, DEFAULT_TOL)
                .unwrap()
                .into_iter()
                .filter_map(|w| match w {
                    Finding::Biconditional {
                        i,
                        j,
                        statistic_equal,
                        ..
                    } => Some((i, j, statistic_equal)),
                    _ => None,
                })
                .collect();
        let forward: BTreeSet<(usize, usize, bool)> = check_method_31(
            &m,
            &s,
            &t0,
            &corpus,
            DEFAULT_TOL,
            SufficiencyEvidence::CertifiedByUser,
        )
        .unwrap()
        .witnesses
        .into_iter()
        .filter_map(|w| match w {
            Finding::PairImplication { i, j, .. } => Some((i, j, false)),
            _ => None,
        })
        .collect();
        let mut converse = BTreeSet::new();
        let values: Vec<Vec<f64>> = corpus.points.iter().map(|x| s.apply(x).unwrap()).collect();
        for i in 0..corpus.len() {
            for j in (i + 1)..corpus.len() {
                let eq = s.values_equal(&values[i], &values[j]);
                let v = proportional(&m, &t0, &corpus.points[i], &corpus.points[j], DEFAULT_TOL)
                    .unwrap();
                if eq && !v.in_d {
                    converse.insert((i, j, true));
                }
            }
        }
        let union: BTreeSet<_> = forward.union(&converse).copied().collect();
        assert_eq!(bi, union, "{name}");
    }
}

fn random_finite(weights: &[Vec<u8>]) -> FiniteModel {
    let points: Vec<String> = (0..weights[0].len()).map(|k| format!("p{k}")).collect();
    let probe: Vec<Rational> = (0..weights.len())
        .map(|k| Rational::new((k as i64 + 1).into(), (weights.len() as i64 + 1).into()))
        .collect();
    let pmf = weights
        .iter()
        .map(|row| {
            let total: i64 = row.iter().map(|&w| w as i64).sum();
            row.iter()
                .map(|&w| Rational::new((w as i64).into(), total.into()))
                .collect()
        })
        .collect();
    FiniteModel::new("random", points, probe, pmf).unwrap()
}

fn finite_weights() -> impl Strategy<Value = Vec<Vec<u8>>> {
    (2usize..6, 2usize..5).prop_flat_map(|(points, probe)| {
        prop::collection::vec(prop::collection::vec(0u8..4, points), probe)
            .prop_filter("rows need mass", |rows| {
                rows.iter().all(|r| r.iter().any(|&w| w > 0))
            })
            // A point that is null under every parameter can join any block.
            .prop_filter("points need mass", |rows| {
                (0..rows[0].len()).all(|x| rows.iter().any(|r| r[x] > 0))
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn tv_is_a_pseudo_metric(weights in finite_weights()) {
        let fm = random_finite(&weights);
        let k = fm.probe.len();
        for a in 0..k {
            prop_assert!(tv_between(&fm, a, a).is_zero());
            for b in 0..k {
                let d = tv_between(&fm, a, b);
                prop_assert!(!d.is_negative());
                prop_assert!(d <= Rational::from_integer(1.into()));
                prop_assert_eq!(&d, &tv_between(&fm, b, a));
                for c in 0..k {
                    prop_assert!(tv_between(&fm, a, c) <= &d + tv_between(&fm, b, c));
                }
            }
        }
    }

    #[test]
    fn minimal_partition_is_sufficient_and_coarsest(weights in finite_weights()) {
        let fm = random_finite(&weights);
        let minimal = minimal_partition(&fm);
        prop_assert!(is_sufficient_partition(&fm, &minimal).unwrap().sufficient);
        for blocks in set_partitions(fm.points.len()) {
            let p = Partition::from_blocks(blocks, minimal.corpus_label.clone(), fm.points.len()).unwrap();
            if is_sufficient_partition(&fm, &p).unwrap().sufficient {
                prop_assert!(refines(&p, &minimal).unwrap());
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn versions_collapse_and_leave_theta0_alone(
        base in prop::collection::vec((-4i32..4, -4i32..4), 1..5),
        shift in 1i32..3,
    ) {
        let mut points: Vec<Vec<f64>> = Vec::new();
        for (a, b) in base {
            let (a, b) = (a as f64 / 2.0, b as f64 / 2.0);
            let s = shift as f64 / 2.0;
            for p in [vec![a, b], vec![a + s, b - s]] {
                if !points.contains(&p) {
                    points.push(p);
                }
            }
        }
        let corpus = Corpus::new("random", points).unwrap();
        let r = demo_versions(2, &corpus, DEFAULT_TOL).unwrap();
        prop_assert!(r.reproduced, "{}", r.status);
        prop_assert!(r.collapsed_to_diagonal);
        prop_assert!(r.m31_identical);
        for pair in &r.equal_sum_pairs {
            prop_assert!(pair.unperturbed.in_d);
            prop_assert!(!pair.perturbed.in_d);
            prop_assert!(!pair.perturbed_conflicts.is_empty());
        }
        for cell in &r.changed_cells {
            prop_assert!(r.assignment.pairs.iter().any(|p| p.theta == cell.theta));
        }
    }
}
