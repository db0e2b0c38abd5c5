#![allow(dead_code)]

use std::collections::BTreeSet;

use matchopt::gen::{generate_random, GenParams};
use matchopt::market::{CountingRule, Instance, InstitutionIdx, Matching, StudentIdx};
use matchopt::objectives::{builtin, Objective};
use matchopt::Rational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rat(n: i64) -> Rational {
    Rational::from_integer(n.into())
}

/// Small random parameters inside the default oracle budget.
pub fn small_params(seed: u64) -> GenParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    if rng.gen_bool(0.4) {
        // Square single-seat markets with full lists and independent
        // priorities; these often have several stable matchings.
        let n = rng.gen_range(3..=5);
        return GenParams {
            n_students: n,
            n_institutions: n,
            q_max: 1,
            n_categories: rng.gen_range(1..=3),
            categories_per_student: rng.gen_range(1..=2),
            bound_density: rng.gen_range(0.3..=0.9),
            family_rate: rng.gen_range(0.0..=0.6),
            list_length: n,
            correlation: rng.gen_range(0.0..=0.2),
            counting_rule: if rng.gen_bool(0.2) {
                CountingRule::OneToOne
            } else {
                CountingRule::OneToAll
            },
        };
    }
    let n_institutions = rng.gen_range(2..=5);
    let q_max = rng.gen_range(1..=3);
    // Enough students to fill most seats.
    let seats = n_institutions * (q_max as usize + 1) / 2;
    GenParams {
        n_students: rng.gen_range(seats.min(10)..=10).max(2),
        n_institutions,
        q_max,
        n_categories: rng.gen_range(1..=3),
        categories_per_student: rng.gen_range(1..=2),
        bound_density: rng.gen_range(0.3..=0.9),
        family_rate: rng.gen_range(0.0..=0.6),
        list_length: rng.gen_range(2..=n_institutions),
        correlation: if rng.gen_bool(0.8) {
            rng.gen_range(0.0..=0.3)
        } else {
            rng.gen_range(0.0..=1.0)
        },
        counting_rule: if rng.gen_bool(0.2) {
            CountingRule::OneToOne
        } else {
            CountingRule::OneToAll
        },
    }
}

pub fn small_instance(seed: u64) -> Instance {
    generate_random(&small_params(seed), seed)
        .expect("valid parameters")
        .to_instance()
        .expect("generated instances validate")
}

/// The built-in objectives checked against the oracle.
pub fn objectives() -> Vec<Box<dyn Objective<Rational>>> {
    ["one2all", "one2one", "siblings", "one2all-max"]
        .iter()
        .map(|n| builtin(n).expect("built-in"))
        .collect()
}

/// `M(i) \ M'(i)` is wholly above or wholly below `M'(i) \ M(i)` in the
/// priority of `i`.
pub fn best_or_worst(inst: &Instance, i: InstitutionIdx, a: &Matching, b: &Matching) -> bool {
    let (sa, sb) = sets_at(inst, i, a, b);
    let diff: Vec<StudentIdx> = sa.difference(&sb).copied().collect();
    let back: Vec<StudentIdx> = sb.difference(&sa).copied().collect();
    let above = |x: &[StudentIdx], y: &[StudentIdx]| {
        x.iter().all(|&s| y.iter().all(|&t| inst.institution_prefers(i, s, t)))
    };
    above(&diff, &back) || above(&back, &diff)
}

/// The same statement read against the whole union `M(i) ∪ M'(i)`.
pub fn best_or_worst_of_union(inst: &Instance, i: InstitutionIdx, a: &Matching, b: &Matching) -> bool {
    let (sa, sb) = sets_at(inst, i, a, b);
    let diff: BTreeSet<StudentIdx> = sa.difference(&sb).copied().collect();
    let mut union: Vec<StudentIdx> = sa.union(&sb).copied().collect();
    inst.sort_by_priority(i, &mut union);
    let k = diff.len();
    let top: BTreeSet<StudentIdx> = union[..k].iter().copied().collect();
    let bottom: BTreeSet<StudentIdx> = union[union.len() - k..].iter().copied().collect();
    diff == top || diff == bottom
}

fn sets_at(
    inst: &Instance,
    i: InstitutionIdx,
    a: &Matching,
    b: &Matching,
) -> (BTreeSet<StudentIdx>, BTreeSet<StudentIdx>) {
    (
        a.students_at(inst, i).into_iter().collect(),
        b.students_at(inst, i).into_iter().collect(),
    )
}

/// Student-optimal element of `candidates`, if one dominates all others.
pub fn student_optimal(inst: &Instance, candidates: &[Matching]) -> Option<Matching> {
    candidates
        .iter()
        .find(|m| {
            candidates
                .iter()
                .all(|o| matchopt::market::weakly_student_dominates(inst, m, o))
        })
        .cloned()
}
