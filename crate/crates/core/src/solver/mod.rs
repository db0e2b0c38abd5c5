//! Minimum-objective stable matchings.
//!
//! Set objectives are linearized into edge weights over the stable-set
//! catalog, the market is cloned into a one-to-one market, and a
//! minimum-weight stable matching is read off a minimum closure of the
//! rotation poset.

pub mod clone;
pub mod flow;
pub mod rotations;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::market::{Instance, InstitutionIdx, Matching, StudentIdx};
use crate::objectives::{
    lexicographic_combine, per_institution, student_rank_costs, threshold_objective, Objective,
};
use crate::scalar::Scalar;
use crate::stable_sets::{enumerate_stable_sets, AgentSide, StableSetCatalog};

use self::clone::{clone_reduction, ClonedMarket};
use self::flow::min_weight_closure;
use self::rotations::{discover_rotations, weigh_rotations, Rotations};

/// Edge weights `ω` plus a constant offset.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeWeights<T> {
    weights: BTreeMap<(StudentIdx, InstitutionIdx), T>,
    pub offset: T,
}

impl<T: Scalar> Default for EdgeWeights<T> {
    fn default() -> Self {
        EdgeWeights {
            weights: BTreeMap::new(),
            offset: T::zero(),
        }
    }
}

impl<T: Scalar> EdgeWeights<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, s: StudentIdx, i: InstitutionIdx) -> T {
        self.weights.get(&(s, i)).cloned().unwrap_or_else(T::zero)
    }

    pub fn set(&mut self, s: StudentIdx, i: InstitutionIdx, w: T) {
        if w.is_zero() {
            self.weights.remove(&(s, i));
        } else {
            self.weights.insert((s, i), w);
        }
    }

    /// Non-zero weights in edge order.
    pub fn nonzero(&self) -> impl Iterator<Item = ((StudentIdx, InstitutionIdx), &T)> + '_ {
        self.weights.iter().map(|(&e, w)| (e, w))
    }

    /// `Σ_{e∈M} ω(e)`, without the offset.
    pub fn weight_of(&self, m: &Matching) -> T {
        m.edges().fold(T::zero(), |acc, (s, i)| acc + self.get(s, i))
    }

    /// `Σ_{e∈M} ω(e)` plus the offset.
    pub fn total(&self, m: &Matching) -> T {
        self.weight_of(m) + self.offset.clone()
    }

    /// Pointwise sum.
    pub fn plus(&self, other: &EdgeWeights<T>) -> EdgeWeights<T> {
        let mut out = self.clone();
        for (&(s, i), w) in &other.weights {
            out.set(s, i, out.get(s, i) + w.clone());
        }
        out.offset = out.offset + other.offset.clone();
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum LinearizeError {
    #[error("catalog lists {found:?} agents, expected {expected:?}")]
    WrongSide { expected: AgentSide, found: AgentSide },
    #[error("stable set of agent {agent} contains the unprocessed cutoff partner {partner}")]
    UnprocessedCutoff { agent: usize, partner: usize },
}

/// Turns `g` into edge weights so that every catalog entry `E` of every
/// institution satisfies `Σ_{e∈E} ω(e) = g(E)`. Entries are processed from
/// the institution's favourite set down; each one fixes the weight of its
/// cutoff edge.
pub fn linearize<T: Scalar>(
    inst: &Instance,
    catalog: &StableSetCatalog,
    g: &dyn Objective<T>,
) -> Result<EdgeWeights<T>, LinearizeError> {
    if catalog.side != AgentSide::Institutions {
        return Err(LinearizeError::WrongSide {
            expected: AgentSide::Institutions,
            found: catalog.side,
        });
    }
    let mut out = EdgeWeights::new();
    for agent in &catalog.agents {
        let i = agent.agent;
        if agent.empty_everywhere {
            out.offset = out.offset + g.eval(inst, i, &[]);
            continue;
        }
        let cutoffs: HashSet<StudentIdx> = agent.sets.iter().filter_map(|set| set.cutoff()).collect();
        let mut done: HashSet<StudentIdx> = HashSet::new();
        for set in agent.sets.iter().rev() {
            let cutoff = set.cutoff().expect("non-empty stable set");
            let mut rest = T::zero();
            for &s in &set.partners {
                if s == cutoff {
                    continue;
                }
                if cutoffs.contains(&s) && !done.contains(&s) {
                    return Err(LinearizeError::UnprocessedCutoff {
                        agent: i,
                        partner: s,
                    });
                }
                rest = rest + out.get(s, i);
            }
            out.set(cutoff, i, g.eval(inst, i, &set.partners) - rest);
            done.insert(cutoff);
        }
    }
    Ok(out)
}

/// Per-student costs `h_s`: one per acceptable institution and one for
/// staying unmatched.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StudentCosts<T> {
    pub costs: HashMap<(StudentIdx, InstitutionIdx), T>,
    pub unmatched: Vec<T>,
}

impl<T: Scalar> StudentCosts<T> {
    pub fn zero(inst: &Instance) -> Self {
        StudentCosts {
            costs: HashMap::new(),
            unmatched: vec![T::zero(); inst.num_students()],
        }
    }

    /// `h_s(i)` is the position of `i` in `s`'s list.
    pub fn ranks(inst: &Instance) -> Self {
        StudentCosts {
            costs: student_rank_costs(inst),
            unmatched: vec![T::zero(); inst.num_students()],
        }
    }

    pub fn cost(&self, s: StudentIdx, i: Option<InstitutionIdx>) -> T {
        match i {
            Some(i) => self.costs.get(&(s, i)).cloned().unwrap_or_else(T::zero),
            None => self.unmatched[s].clone(),
        }
    }

    pub fn total(&self, m: &Matching) -> T {
        (0..m.num_students()).fold(T::zero(), |acc, s| acc + self.cost(s, m.partner(s)))
    }
}

/// Student-side linearization: `ω(s, i) = h_s(i)`, and students unmatched
/// everywhere contribute `h_s(∅)` to the offset.
pub fn linearize_students<T: Scalar>(
    catalog: &StableSetCatalog,
    h: &StudentCosts<T>,
) -> Result<EdgeWeights<T>, LinearizeError> {
    if catalog.side != AgentSide::Students {
        return Err(LinearizeError::WrongSide {
            expected: AgentSide::Students,
            found: catalog.side,
        });
    }
    let mut out = EdgeWeights::new();
    for agent in &catalog.agents {
        let s = agent.agent;
        if agent.empty_everywhere {
            out.offset = out.offset + h.cost(s, None);
            continue;
        }
        for set in &agent.sets {
            for &i in &set.partners {
                out.set(s, i, h.cost(s, Some(i)));
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMode {
    Utilitarian,
    Egalitarian,
    TwoSided,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolveDiagnostics<T> {
    pub catalog_sets: usize,
    pub rotations: usize,
    /// Rotations eliminated to reach the answer.
    pub closure_size: usize,
    pub cut_value: T,
    /// Thresholds tried by the egalitarian scan.
    pub thresholds: usize,
    /// `Σ_s h_s(M(s))` for two-sided solves.
    pub student_value: Option<T>,
}

#[derive(Clone, Debug)]
pub struct SolveReport<T> {
    pub matching: Matching,
    pub objective: String,
    pub mode: SolveMode,
    pub student_optimal: bool,
    /// Recomputed from the matching: `Σ_i g_i(M(i))`, `max_i g_i(M(i))`,
    /// or `Σ_i g_i(M(i)) + Σ_s h_s(M(s))` depending on the mode.
    pub value: T,
    pub per_institution: Vec<T>,
    pub weights: EdgeWeights<T>,
    pub diagnostics: SolveDiagnostics<T>,
    pub wall_time: Duration,
    pub oracle_value: Option<T>,
}

/// Result of a minimum-weight stable matching computation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MinWeight<T> {
    pub matching: Matching,
    /// `Σ_{e∈M} ω(e)` plus the offset.
    pub weight: T,
    pub closure_size: usize,
    pub cut_value: T,
}

/// Holds the parts of the pipeline that do not depend on the objective:
/// the institution catalog, the clone and its rotations.
pub struct Solver<'a> {
    inst: &'a Instance,
    catalog: StableSetCatalog,
    clone: ClonedMarket,
    rotations: Rotations,
}

impl<'a> Solver<'a> {
    pub fn new(inst: &'a Instance) -> Self {
        let catalog = enumerate_stable_sets(inst, AgentSide::Institutions);
        let clone = clone_reduction(inst);
        let rotations = discover_rotations(&clone.instance);
        Solver {
            inst,
            catalog,
            clone,
            rotations,
        }
    }

    pub fn instance(&self) -> &'a Instance {
        self.inst
    }

    pub fn catalog(&self) -> &StableSetCatalog {
        &self.catalog
    }

    pub fn clone_market(&self) -> &ClonedMarket {
        &self.clone
    }

    pub fn rotations(&self) -> &Rotations {
        &self.rotations
    }

    pub fn linearize<T: Scalar>(&self, g: &dyn Objective<T>) -> EdgeWeights<T> {
        linearize(self.inst, &self.catalog, g).expect("catalog built by this solver")
    }

    /// A stable matching minimizing `Σ_{e∈M} ω(e)`. Among minimizers the
    /// one closest to the student-optimal matching is returned.
    pub fn min_weight<T: Scalar>(&self, w: &EdgeWeights<T>) -> MinWeight<T> {
        let (deltas, _) = weigh_rotations(&self.rotations, |s, seat| w.get(s, self.clone.owner(seat)));
        let closure = min_weight_closure(&deltas, &self.rotations.predecessors);
        let matching = self.clone.project(&self.rotations.apply(&closure.chosen));
        MinWeight {
            weight: w.total(&matching),
            closure_size: closure.chosen.iter().filter(|&&c| c).count(),
            cut_value: closure.cut_value,
            matching,
        }
    }

    fn institution_values<T: Scalar>(&self, g: &dyn Objective<T>, m: &Matching) -> Vec<T> {
        per_institution(self.inst, g, &m.institution_sets(self.inst))
    }

    #[allow(clippy::too_many_arguments)]
    fn report<T: Scalar>(
        &self,
        g: &dyn Objective<T>,
        mode: SolveMode,
        student_optimal: bool,
        weights: EdgeWeights<T>,
        found: MinWeight<T>,
        thresholds: usize,
        student_value: Option<T>,
        started: Instant,
    ) -> SolveReport<T> {
        let per_institution = self.institution_values(g, &found.matching);
        let sum = per_institution.iter().fold(T::zero(), |acc, v| acc + v.clone());
        let value = match mode {
            SolveMode::Utilitarian => sum,
            SolveMode::Egalitarian => per_institution.iter().max().cloned().unwrap_or_else(T::zero),
            SolveMode::TwoSided => sum + student_value.clone().unwrap_or_else(T::zero),
        };
        SolveReport {
            matching: found.matching,
            objective: g.name(),
            mode,
            student_optimal,
            value,
            per_institution,
            weights,
            diagnostics: SolveDiagnostics {
                catalog_sets: self.catalog.total_sets(),
                rotations: self.rotations.len(),
                closure_size: found.closure_size,
                cut_value: found.cut_value,
                thresholds,
                student_value,
            },
            wall_time: started.elapsed(),
            oracle_value: None,
        }
    }

    pub fn solve_utilitarian<T: Scalar>(&self, g: &dyn Objective<T>) -> SolveReport<T> {
        let started = Instant::now();
        let weights = self.linearize(g);
        let found = self.min_weight(&weights);
        self.report(g, SolveMode::Utilitarian, false, weights, found, 0, None, started)
    }

    /// Distinct values of `g` over all catalog entries, ascending.
    pub fn catalog_values<T: Scalar>(&self, g: &dyn Objective<T>) -> Vec<T> {
        let mut values: Vec<T> = self
            .catalog
            .agents
            .iter()
            .flat_map(|a| a.sets.iter().map(move |set| g.eval(self.inst, a.agent, &set.partners)))
            .collect();
        values.sort();
        values.dedup();
        values
    }

    /// Smallest catalog value `R` such that some stable matching keeps
    /// every institution at or below `R`, with the threshold weights and
    /// the witness found for it.
    fn min_max_threshold<T: Scalar>(&self, g: &dyn Objective<T>) -> (T, usize, EdgeWeights<T>, MinWeight<T>) {
        let values = self.catalog_values(g);
        let mut tried = 0;
        for r in values {
            tried += 1;
            let thr = threshold_objective(g, r.clone());
            let weights = self.linearize(&thr);
            let found = self.min_weight(&weights);
            if found.weight.is_zero() {
                return (r, tried, weights, found);
            }
        }
        unreachable!("the largest catalog value bounds every stable matching")
    }

    pub fn solve_egalitarian<T: Scalar>(&self, g: &dyn Objective<T>) -> SolveReport<T> {
        let started = Instant::now();
        let (_, tried, weights, found) = self.min_max_threshold(g);
        self.report(g, SolveMode::Egalitarian, false, weights, found, tried, None, started)
    }

    /// Minimizes `Σ_i g_i(M(i)) + Σ_s h_s(M(s))`.
    pub fn solve_two_sided<T: Scalar>(&self, g: &dyn Objective<T>, h: &StudentCosts<T>) -> SolveReport<T> {
        let started = Instant::now();
        let students = enumerate_stable_sets(self.inst, AgentSide::Students);
        let weights = self
            .linearize(g)
            .plus(&linearize_students(&students, h).expect("student catalog"));
        let found = self.min_weight(&weights);
        let student_value = h.total(&found.matching);
        self.report(g, SolveMode::TwoSided, false, weights, found, 0, Some(student_value), started)
    }

    /// Among the optima of `g` under `mode`, the one every student weakly
    /// prefers to all others.
    pub fn solve_student_optimal<T: Scalar>(&self, g: &dyn Objective<T>, mode: SolveMode) -> SolveReport<T> {
        let started = Instant::now();
        let costs = student_rank_costs::<T>(self.inst);
        match mode {
            SolveMode::Utilitarian => {
                let lex = lexicographic_combine(self.inst, g, costs, &self.catalog);
                let weights = self.linearize(&lex);
                let found = self.min_weight(&weights);
                self.report(g, mode, true, weights, found, 0, None, started)
            }
            SolveMode::Egalitarian => {
                let (r, tried, _, _) = self.min_max_threshold(g);
                let thr = threshold_objective(g, r);
                let lex = lexicographic_combine(self.inst, &thr, costs, &self.catalog);
                let weights = self.linearize(&lex);
                let found = self.min_weight(&weights);
                self.report(g, mode, true, weights, found, tried, None, started)
            }
            SolveMode::TwoSided => panic!("student-optimal tie-breaking applies to one-sided modes"),
        }
    }
}

pub fn min_weight_stable_matching<T: Scalar>(inst: &Instance, w: &EdgeWeights<T>) -> Matching {
    Solver::new(inst).min_weight(w).matching
}

pub fn solve_utilitarian<T: Scalar>(inst: &Instance, g: &dyn Objective<T>) -> SolveReport<T> {
    Solver::new(inst).solve_utilitarian(g)
}

pub fn solve_egalitarian<T: Scalar>(inst: &Instance, g: &dyn Objective<T>) -> SolveReport<T> {
    Solver::new(inst).solve_egalitarian(g)
}

pub fn solve_two_sided<T: Scalar>(inst: &Instance, g: &dyn Objective<T>, h: &StudentCosts<T>) -> SolveReport<T> {
    Solver::new(inst).solve_two_sided(g, h)
}

pub fn solve_student_optimal_among_optima<T: Scalar>(
    inst: &Instance,
    g: &dyn Objective<T>,
    mode: SolveMode,
) -> SolveReport<T> {
    Solver::new(inst).solve_student_optimal(g, mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::objectives::{OneToAll, Siblings, Zero};
    use num_rational::BigRational;

    type Q = BigRational;

    fn q(n: i64) -> Q {
        Q::from_integer(n.into())
    }

    #[test]
    fn ex_two_weights() {
        let inst = fixtures::ex_two();
        let cat = enumerate_stable_sets(&inst, AgentSide::Institutions);
        let w: EdgeWeights<Q> = linearize(&inst, &cat, &OneToAll).unwrap();
        assert_eq!(w.get(1, 0), q(0));
        assert_eq!(w.get(0, 0), q(1));
        assert_eq!(w.get(0, 1), q(0));
        assert_eq!(w.get(1, 1), q(0));
        assert_eq!(w.offset, q(0));
    }

    #[test]
    fn ex_sib_weights() {
        let inst = fixtures::ex_sib();
        let cat = enumerate_stable_sets(&inst, AgentSide::Institutions);
        let w: EdgeWeights<Q> = linearize(&inst, &cat, &Siblings).unwrap();
        let i2 = inst.institution_index("i2").unwrap();
        let s = |id: &str| inst.student_index(id).unwrap();
        assert_eq!(w.get(s("s3"), i2), q(-1));
        assert_eq!(w.get(s("s2"), i2), q(1));
    }

    #[test]
    fn zero_objective_gives_zero_weights() {
        let inst = fixtures::ex_sib();
        let cat = enumerate_stable_sets(&inst, AgentSide::Institutions);
        let w: EdgeWeights<Q> = linearize(&inst, &cat, &Zero).unwrap();
        assert_eq!(w.nonzero().count(), 0);
        assert_eq!(w.offset, q(0));
        assert_eq!(min_weight_stable_matching(&inst, &w), fixtures::ex_sib_ms(&inst));
    }

    #[test]
    fn student_catalog_is_rejected_by_institution_linearization() {
        let inst = fixtures::ex_two();
        let cat = enumerate_stable_sets(&inst, AgentSide::Students);
        assert!(matches!(
            linearize::<Q>(&inst, &cat, &OneToAll),
            Err(LinearizeError::WrongSide { .. })
        ));
    }

    #[test]
    fn fixture_solves() {
        let inst = fixtures::ex_two();
        let r = solve_utilitarian::<Q>(&inst, &OneToAll);
        assert_eq!(r.value, q(0));
        assert_eq!(r.matching, fixtures::ex_two_mi(&inst));

        let inst = fixtures::ex_sib();
        let r = solve_utilitarian::<Q>(&inst, &Siblings);
        assert_eq!(r.value, q(-1));
        assert_eq!(r.matching, fixtures::ex_sib_mi(&inst));

        let inst = fixtures::ex_two_four_caps();
        let r = solve_egalitarian::<Q>(&inst, &OneToAll);
        assert_eq!(r.value, q(1));
        let r = solve_student_optimal_among_optima::<Q>(&inst, &OneToAll, SolveMode::Egalitarian);
        assert_eq!(r.matching, fixtures::ex_two_ms(&inst));
    }

    #[test]
    fn two_sided_prefers_ms_with_expensive_i2() {
        let inst = fixtures::ex_two();
        let mut h = StudentCosts::<Q>::zero(&inst);
        h.costs.insert((0, 0), q(0));
        h.costs.insert((0, 1), q(10));
        let r = solve_two_sided(&inst, &OneToAll, &h);
        assert_eq!(r.matching, fixtures::ex_two_ms(&inst));
        assert_eq!(r.value, q(1));
    }

    #[test]
    fn rank_costs_with_zero_objective_return_m0() {
        let inst = fixtures::ex_sib();
        let r = solve_two_sided::<Q>(&inst, &Zero, &StudentCosts::ranks(&inst));
        assert_eq!(r.matching, fixtures::ex_sib_ms(&inst));
    }
}
