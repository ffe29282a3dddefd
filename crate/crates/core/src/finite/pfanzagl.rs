use num_traits::{One, Zero};
use serde::Serialize;

use super::{
    exact_table, is_function_of, is_sufficient_partition, minimal_partition, tv_between, Exact,
    FiniteModel, FunctionCheck, LabelStatistic, Rational, SufficiencyCheck,
};
use crate::ratio::{refines, Partition};

/// Four points with `p(1) = t/3, p(2) = 2t/3, p(3) = (1-t)/3, p(4) = 2(1-t)/3`.
pub fn four_point_model(probe: &[Rational]) -> FiniteModel {
    let third = Rational::new(1.into(), 3.into());
    let two = Rational::from_integer(2.into());
    let pmf = probe
        .iter()
        .map(|t| {
            let s = Rational::one() - t;
            vec![
                t * &third,
                &two * t * &third,
                &s * &third,
                &two * &s * &third,
            ]
        })
        .collect();
    FiniteModel::new(
        "pfanzagl",
        ["1", "2", "3", "4"].iter().map(|s| s.to_string()).collect(),
        probe.to_vec(),
        pmf,
    )
    .expect("four-point rows sum to one for any probe in [0, 1]")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelledPartition {
    pub blocks: Vec<Vec<String>>,
}

fn labelled(fm: &FiniteModel, p: &Partition) -> LabelledPartition {
    LabelledPartition {
        blocks: p
            .blocks
            .iter()
            .map(|b| b.iter().map(|&i| fm.points[i].clone()).collect())
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockConditionals {
    pub block: Vec<String>,
    /// One row per probe parameter.
    pub conditionals: Vec<Vec<Exact>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SufficiencyStep {
    pub statistic: String,
    pub partition: LabelledPartition,
    pub check: SufficiencyCheck,
    pub conditionals: Vec<BlockConditionals>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparationStep {
    /// Density vector of each point across the probe.
    pub vectors: Vec<(String, Vec<Exact>)>,
    pub distinct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinimalStep {
    pub partition: LabelledPartition,
    pub equals_t_partition: bool,
    pub u_strictly_refines: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TvEntry {
    pub theta_a: Exact,
    pub theta_b: Exact,
    pub distance: Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PfanzaglReport {
    pub status: String,
    pub reproduced: bool,
    pub points: Vec<String>,
    pub probe: Vec<Exact>,
    /// Mass of each point under the dominating measure.
    pub reference_measure: Vec<Exact>,
    pub pmf: Vec<Vec<Exact>>,
    /// Densities with respect to the reference measure, one row per probe parameter.
    pub densities: Vec<Vec<Exact>>,
    pub t_sufficient: SufficiencyStep,
    pub u_sufficient: SufficiencyStep,
    pub separation: SeparationStep,
    pub u_not_function_of_t: FunctionCheck,
    pub minimal: MinimalStep,
    pub tv_distances: Vec<TvEntry>,
    pub narrative: String,
}

fn sufficiency_step(fm: &FiniteModel, s: &LabelStatistic) -> SufficiencyStep {
    let p = s.partition(fm).expect("statistic is total on the model");
    let check = is_sufficient_partition(fm, &p).expect("partition is over the model");
    let conditionals = p
        .blocks
        .iter()
        .map(|b| BlockConditionals {
            block: b.iter().map(|&i| fm.points[i].clone()).collect(),
            conditionals: fm
                .pmf
                .iter()
                .map(|row| {
                    let mass: Rational = b.iter().map(|&i| &row[i]).sum();
                    b.iter()
                        .map(|&i| {
                            Exact(if mass.is_zero() {
                                Rational::zero()
                            } else {
                                &row[i] / &mass
                            })
                        })
                        .collect()
                })
                .collect(),
        })
        .collect();
    SufficiencyStep {
        statistic: s.name.clone(),
        partition: labelled(fm, &p),
        check,
        conditionals,
    }
}

/// The full four-point counterexample on the probe `{1/4, 1/2, 3/4}`. With
/// `scaled`, the reference measure puts mass `1/4` on each point, so the
/// densities are four times the pmf.
pub fn demo_pfanzagl(scaled: bool) -> PfanzaglReport {
    let probe: Vec<Rational> = [1, 2, 3]
        .iter()
        .map(|&k| Rational::new(k.into(), 4.into()))
        .collect();
    let fm = four_point_model(&probe);
    let scale = Rational::from_integer(if scaled { 4 } else { 1 }.into());
    let densities: Vec<Vec<Rational>> = fm
        .pmf
        .iter()
        .map(|r| r.iter().map(|v| v * &scale).collect())
        .collect();

    let t = LabelStatistic::new(
        "T = 1{1,2}",
        [("1", "1"), ("2", "1"), ("3", "0"), ("4", "0")],
    );
    let u = LabelStatistic::new(
        "U = identity",
        fm.points.iter().map(|p| (p.clone(), p.clone())),
    );

    let t_sufficient = sufficiency_step(&fm, &t);
    let u_sufficient = sufficiency_step(&fm, &u);

    let columns: Vec<Vec<Rational>> = (0..fm.points.len())
        .map(|x| densities.iter().map(|r| r[x].clone()).collect())
        .collect();
    let distinct = (0..columns.len()).all(|i| (0..i).all(|j| columns[i] != columns[j]));
    let separation = SeparationStep {
        vectors: fm
            .points
            .iter()
            .zip(&columns)
            .map(|(p, c)| (p.clone(), c.iter().cloned().map(Exact).collect()))
            .collect(),
        distinct,
    };

    let not_function = is_function_of(&u, &t, &fm).expect("statistics are total");

    let minimal = minimal_partition(&fm);
    let tp = t.partition(&fm).expect("total");
    let up = u.partition(&fm).expect("total");
    let equals_t = minimal == tp;
    let strictly = refines(&up, &minimal).expect("same model") && up != minimal;
    let minimal_step = MinimalStep {
        partition: labelled(&fm, &minimal),
        equals_t_partition: equals_t,
        u_strictly_refines: strictly,
    };

    let mut tv_distances = Vec::new();
    for a in 0..fm.probe.len() {
        for b in (a + 1)..fm.probe.len() {
            tv_distances.push(TvEntry {
                theta_a: Exact(fm.probe[a].clone()),
                theta_b: Exact(fm.probe[b].clone()),
                distance: Exact(tv_between(&fm, a, b)),
            });
        }
    }

    let reproduced = t_sufficient.check.sufficient
        && u_sufficient.check.sufficient
        && distinct
        && !not_function.holds
        && equals_t
        && strictly;
    let status = if reproduced {
        "criterion refuted, counterexample reproduced"
    } else {
        "counterexample not reproduced"
    };

    PfanzaglReport {
        status: status.into(),
        reproduced,
        points: fm.points.clone(),
        probe: fm.probe.iter().cloned().map(Exact).collect(),
        reference_measure: vec![Exact(Rational::one() / &scale); fm.points.len()],
        pmf: exact_table(&fm.pmf),
        densities: exact_table(&densities),
        t_sufficient,
        u_sufficient,
        separation,
        u_not_function_of_t: not_function,
        minimal: minimal_step,
        tv_distances,
        narrative: "T = 1{1,2} is sufficient (conditionals 1/3, 2/3 in each block do not depend on theta). \
                    The identity U is sufficient and the density vectors separate all four points, which is \
                    the separation hypothesis that would certify U as minimal. Yet U is not a function of T \
                    (points 1 and 2 share T and differ in U), and the likelihood-ratio partition equals T's, \
                    strictly coarser than U's. So separation by densities does not imply minimality."
            .into(),
    }
}
