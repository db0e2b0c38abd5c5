//! Diversity-constrained deferred acceptance (DC-DA) and its
//! egalitarian relaxation.
//!
//! Lower bounds are folded into upper bounds on non-members using the fact
//! that `|M(i)|` is the same in every stable matching:
//! `u_i^{≠c} = |M0(i)| − ℓ_i^c`. DC-DA then walks down the lattice from
//! `M0`, banning the lowest-ranked offending student (and everyone below
//! her) whenever a cap is exceeded, until every cap holds or a detector
//! proves no stable matching can satisfy them.

use serde::Serialize;
use thiserror::Error;

use crate::da::{init_state, DaOutcome, DaState, Infeasibility, Restriction};
use crate::market::{CategoryIdx, CountingRule, Instance, InstitutionIdx, Matching};

/// The two caps derived from one declared bound.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Cap {
    pub institution: InstitutionIdx,
    pub category: CategoryIdx,
    /// Cap on category members; `None` when no upper bound was declared.
    pub members: Option<i64>,
    /// Cap on non-members: `|M0(i)| − ℓ`. Negative when the lower bound
    /// exceeds the fill.
    pub non_members: i64,
}

/// A lower bound that no stable matching can reach: `ℓ_i^c > |M0(i)|`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FillWitness {
    pub institution: InstitutionIdx,
    pub category: CategoryIdx,
    pub lower: u32,
    pub fill: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct UpperBoundSystem {
    /// One entry per declared bound, institutions in instance order, bounds
    /// in declaration order.
    pub caps: Vec<Cap>,
    /// `|M0(i)|`, the fill of every institution.
    pub fill: Vec<usize>,
    pub witnesses: Vec<FillWitness>,
}

/// Derives the member and non-member caps from `inst`'s bounds and the
/// invariant fill of `m0`.
pub fn transform_bounds(inst: &Instance, m0: &Matching) -> UpperBoundSystem {
    let mut fill = vec![0usize; inst.num_institutions()];
    for (_, i) in m0.edges() {
        fill[i] += 1;
    }
    let mut caps = Vec::new();
    let mut witnesses = Vec::new();
    for i in 0..inst.num_institutions() {
        for b in inst.bounds(i) {
            let non_members = fill[i] as i64 - b.lower as i64;
            if non_members < 0 {
                witnesses.push(FillWitness {
                    institution: i,
                    category: b.category,
                    lower: b.lower,
                    fill: fill[i],
                });
            }
            caps.push(Cap {
                institution: i,
                category: b.category,
                members: b.upper.map(i64::from),
                non_members,
            });
        }
    }
    UpperBoundSystem {
        caps,
        fill,
        witnesses,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoSolutionWitness {
    /// A relaxed non-member cap is negative.
    LowerBoundAboveFill(FillWitness),
    /// An institution with free seats in `M0` breaks a cap. Its set is the
    /// same in every stable matching.
    UnfilledInstitutionViolates {
        institution: InstitutionIdx,
        category: CategoryIdx,
    },
    /// The DA engine proved no stable matching avoids the barred edges.
    Detector(Infeasibility),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BoundStatus {
    pub institution: InstitutionIdx,
    pub category: CategoryIdx,
    pub lower: u32,
    pub upper: Option<u32>,
    /// Members of the category at the institution (one-to-all count).
    pub count: usize,
    pub lower_violation: usize,
    pub upper_violation: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct DcDaReport {
    pub delta: u32,
    /// Rounds of cap checking that forbade something.
    pub iterations: usize,
    pub barred_edges: usize,
    pub proposals: usize,
    pub cursor_steps: usize,
    pub edges: usize,
    /// Bound status on the last stable matching reached.
    pub bounds: Vec<BoundStatus>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DcDaResult {
    Solution {
        matching: Matching,
        report: DcDaReport,
    },
    NoSolution {
        witness: NoSolutionWitness,
        report: DcDaReport,
    },
}

impl DcDaResult {
    pub fn matching(&self) -> Option<&Matching> {
        match self {
            DcDaResult::Solution { matching, .. } => Some(matching),
            DcDaResult::NoSolution { .. } => None,
        }
    }

    pub fn report(&self) -> &DcDaReport {
        match self {
            DcDaResult::Solution { report, .. } | DcDaResult::NoSolution { report, .. } => report,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum DcDaError {
    #[error("DC-DA counts every category membership; the instance uses one-to-one counting")]
    OneToOneCounting,
}

/// Per-bound counts on `m`.
pub fn bound_status(inst: &Instance, m: &Matching) -> Vec<BoundStatus> {
    let sets = m.institution_sets(inst);
    let mut out = Vec::new();
    for (i, set) in sets.iter().enumerate() {
        for b in inst.bounds(i) {
            let count = set.iter().filter(|&&s| inst.has_category(s, b.category)).count();
            out.push(BoundStatus {
                institution: i,
                category: b.category,
                lower: b.lower,
                upper: b.upper,
                count,
                lower_violation: (b.lower as usize).saturating_sub(count),
                upper_violation: b.upper.map_or(0, |u| count.saturating_sub(u as usize)),
            });
        }
    }
    out
}

/// Finds the student-optimal maximally diverse stable matching, or
/// certifies that none exists.
pub fn dc_da(inst: &Instance) -> Result<DcDaResult, DcDaError> {
    if inst.counting_rule() != CountingRule::OneToAll {
        return Err(DcDaError::OneToOneCounting);
    }
    let base = init_state(inst);
    Ok(run_relaxed(base, 0))
}

/// Smallest uniform relaxation `δ` of every cap under which DC-DA succeeds,
/// with the matching it returns: the student-optimal stable matching whose
/// largest bound violation is minimal.
pub fn egalitarian_dcda(inst: &Instance) -> Result<(u32, Matching, DcDaReport), DcDaError> {
    if inst.counting_rule() != CountingRule::OneToAll {
        return Err(DcDaError::OneToOneCounting);
    }
    let base = init_state(inst);
    let limit = (0..inst.num_institutions())
        .flat_map(|i| {
            std::iter::once(inst.capacity(i) as u32).chain(inst.bounds(i).iter().map(|b| b.lower))
        })
        .max()
        .unwrap_or(0);
    for delta in 0..=limit {
        if let DcDaResult::Solution { matching, report } = run_relaxed(base.clone(), delta) {
            return Ok((delta, matching, report));
        }
    }
    unreachable!("at δ = {limit} every cap exceeds every possible count")
}

/// DC-DA with every cap raised by `delta`, starting from a fresh state.
pub fn dc_da_relaxed(inst: &Instance, delta: u32) -> Result<DcDaResult, DcDaError> {
    if inst.counting_rule() != CountingRule::OneToAll {
        return Err(DcDaError::OneToOneCounting);
    }
    Ok(run_relaxed(init_state(inst), delta))
}

fn run_relaxed(mut state: DaState<'_>, delta: u32) -> DcDaResult {
    let inst = state.instance();
    let system = transform_bounds(inst, state.initial_matching());
    let delta_i = delta as i64;
    let mut report = DcDaReport {
        delta,
        edges: inst.num_edges(),
        ..Default::default()
    };

    let finish = |state: &DaState<'_>, mut report: DcDaReport| {
        let stats = state.stats();
        report.proposals = stats.proposals;
        report.cursor_steps = stats.cursor_steps();
        report.barred_edges = state.barred_edge_count();
        report.bounds = bound_status(inst, &state.matching());
        report
    };

    if let Some(w) = system
        .witnesses
        .iter()
        .find(|w| (w.fill as i64) - (w.lower as i64) + delta_i < 0)
    {
        return DcDaResult::NoSolution {
            witness: NoSolutionWitness::LowerBoundAboveFill(w.clone()),
            report: finish(&state, report),
        };
    }

    // caps grouped by institution, declaration order preserved
    let mut caps_at: Vec<Vec<&Cap>> = vec![Vec::new(); inst.num_institutions()];
    for cap in &system.caps {
        caps_at[cap.institution].push(cap);
    }

    let mut dirty: Vec<InstitutionIdx> = (0..inst.num_institutions()).collect();
    loop {
        let mut restrictions = Vec::new();
        for &i in &dirty {
            for cap in &caps_at[i] {
                let c = cap.category;
                let members = state.held(i).filter(|&s| inst.has_category(s, c)).count() as i64;
                let others = state.held_count(i) as i64 - members;
                let over_members = cap.members.is_some_and(|u| members > u + delta_i);
                let over_others = others > cap.non_members + delta_i;
                if !(over_members || over_others) {
                    continue;
                }
                if state.is_unfilled(i) {
                    return DcDaResult::NoSolution {
                        witness: NoSolutionWitness::UnfilledInstitutionViolates {
                            institution: i,
                            category: c,
                        },
                        report: finish(&state, report),
                    };
                }
                let lowest = state
                    .held(i)
                    .rev()
                    .find(|&s| inst.has_category(s, c) == over_members)
                    .expect("an exceeded cap has at least one counted student");
                restrictions.push(Restriction::AtOrBelow(lowest, i));
            }
        }
        if restrictions.is_empty() {
            let matching = state.matching();
            return DcDaResult::Solution {
                matching,
                report: finish(&state, report),
            };
        }
        report.iterations += 1;
        match state.forbid_and_resume(&restrictions) {
            DaOutcome::Stable(_) => {
                dirty = state.take_touched();
            }
            DaOutcome::Infeasible(reason) => {
                return DcDaResult::NoSolution {
                    witness: NoSolutionWitness::Detector(reason),
                    report: finish(&state, report),
                };
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::da::run_da;
    use crate::fixtures;
    use crate::market::RawInstance;

    #[test]
    fn ex_two_caps() {
        let inst = fixtures::ex_two();
        let sys = transform_bounds(&inst, &run_da(&inst));
        assert_eq!(sys.caps.len(), 1);
        assert_eq!(sys.caps[0].members, Some(0));
        assert_eq!(sys.caps[0].non_members, 1);
        assert!(sys.witnesses.is_empty());
    }

    #[test]
    fn cap_arithmetic() {
        // Two students fill i; ℓ^B = u^B = 1 gives u^{≠B} = 1; ℓ^A = 3 is
        // out of reach.
        let raw = RawInstance::new(CountingRule::OneToAll)
            .student("a", &["i"], &["A"])
            .student("b", &["i"], &["B"])
            .institution("i", 3, &["a", "b"])
            .bound("i", "B", 1, Some(1))
            .bound("i", "A", 3, None);
        let inst = Instance::validate(raw).unwrap();
        let sys = transform_bounds(&inst, &run_da(&inst));
        assert_eq!(sys.caps[0].non_members, 1);
        assert_eq!(sys.caps[1].non_members, -1);
        assert_eq!(sys.witnesses.len(), 1);
        assert_eq!(sys.witnesses[0].lower, 3);
        let res = dc_da(&inst).unwrap();
        assert!(matches!(
            res,
            DcDaResult::NoSolution {
                witness: NoSolutionWitness::LowerBoundAboveFill(_),
                ..
            }
        ));
    }

    #[test]
    fn ex_two_solution_is_mi() {
        let inst = fixtures::ex_two();
        let res = dc_da(&inst).unwrap();
        assert_eq!(res.matching(), Some(&fixtures::ex_two_mi(&inst)));
        assert_eq!(res.report().iterations, 1);
        assert!(res.report().cursor_steps <= inst.num_edges());
    }

    #[test]
    fn ex_two_blocked_has_no_solution() {
        let inst = fixtures::ex_two_blocked();
        assert!(matches!(dc_da(&inst).unwrap(), DcDaResult::NoSolution { .. }));
    }

    #[test]
    fn no_bounds_returns_m0() {
        let inst = fixtures::ex_sib();
        let res = dc_da(&inst).unwrap();
        assert_eq!(res.matching(), Some(&run_da(&inst)));
        assert_eq!(res.report().iterations, 0);
    }

    #[test]
    fn egalitarian_fixtures() {
        let inst = fixtures::ex_two();
        let (d, m, _) = egalitarian_dcda(&inst).unwrap();
        assert_eq!(d, 0);
        assert_eq!(m, fixtures::ex_two_mi(&inst));

        let inst = fixtures::ex_two_four_caps();
        let (d, m, _) = egalitarian_dcda(&inst).unwrap();
        assert_eq!(d, 1);
        assert_eq!(m, fixtures::ex_two_ms(&inst));

        let inst = fixtures::ex_unique();
        let (d, m, _) = egalitarian_dcda(&inst).unwrap();
        assert_eq!(d, 0);
        assert_eq!(m, run_da(&inst));
    }

    #[test]
    fn one_to_one_counting_is_rejected() {
        let mut raw = fixtures::ex_two_raw();
        raw.counting_rule = CountingRule::OneToOne;
        let inst = Instance::validate(raw).unwrap();
        assert_eq!(dc_da(&inst), Err(DcDaError::OneToOneCounting));
    }

    #[test]
    fn unfilled_violation_is_immediate() {
        // i has a free seat in M0 and holds an A student over a zero cap.
        let raw = RawInstance::new(CountingRule::OneToAll)
            .student("a", &["i"], &["A"])
            .institution("i", 2, &["a"])
            .bound("i", "A", 0, Some(0));
        let inst = Instance::validate(raw).unwrap();
        let res = dc_da(&inst).unwrap();
        assert!(matches!(
            res,
            DcDaResult::NoSolution {
                witness: NoSolutionWitness::UnfilledInstitutionViolates { .. },
                ..
            }
        ));
    }
}
