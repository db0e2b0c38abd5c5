//! Exhaustive ground truth for small markets.
//!
//! Two independent enumerations of all stable matchings: a pruned search
//! over assignments, and a breadth-first closure of the student-optimal
//! matching of the seat clone under rotation elimination. They are
//! required to agree.

use std::collections::{BTreeSet, HashSet, VecDeque};

use thiserror::Error;

use crate::da::run_da;
use crate::market::{is_stable, Instance, InstitutionIdx, Matching, StudentIdx};
use crate::objectives::Objective;
use crate::scalar::Scalar;
use crate::solver::clone::clone_reduction;
use crate::solver::StudentCosts;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Budget {
    pub max_students: usize,
    pub max_institutions: usize,
    pub max_capacity: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_students: 10,
            max_institutions: 5,
            max_capacity: 3,
        }
    }
}

impl Budget {
    pub fn check(&self, inst: &Instance) -> Result<(), OracleError> {
        let q = (0..inst.num_institutions())
            .map(|i| inst.capacity(i))
            .max()
            .unwrap_or(0);
        for (what, limit, actual) in [
            ("students", self.max_students, inst.num_students()),
            ("institutions", self.max_institutions, inst.num_institutions()),
            ("capacity", self.max_capacity, q),
        ] {
            if actual > limit {
                return Err(OracleError::BudgetExceeded { what, limit, actual });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("oracle refuses: {actual} {what} exceeds the budget of {limit}")]
    BudgetExceeded {
        what: &'static str,
        limit: usize,
        actual: usize,
    },
    #[error("enumeration strategies disagree: search found {search}, rotation closure found {closure}")]
    StrategiesDisagree { search: usize, closure: usize },
}

/// All stable matchings, sorted and deduplicated.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Enumeration {
    pub matchings: Vec<Matching>,
}

impl Enumeration {
    pub fn len(&self) -> usize {
        self.matchings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matchings.is_empty()
    }

    /// Distinct sets each institution receives, every set best first.
    pub fn projections(&self, inst: &Instance) -> Vec<BTreeSet<Vec<StudentIdx>>> {
        let mut out = vec![BTreeSet::new(); inst.num_institutions()];
        for m in &self.matchings {
            for i in 0..inst.num_institutions() {
                out[i].insert(m.students_at(inst, i));
            }
        }
        out
    }
}

/// Every stable matching, by both strategies.
pub fn enumerate_all_stable(inst: &Instance, budget: &Budget) -> Result<Enumeration, OracleError> {
    let search = enumerate_by_search(inst, budget)?;
    let closure = enumerate_by_rotations(inst, budget)?;
    if search != closure {
        return Err(OracleError::StrategiesDisagree {
            search: search.len(),
            closure: closure.len(),
        });
    }
    Ok(Enumeration { matchings: search })
}

struct Search<'a> {
    inst: &'a Instance,
    assignment: Vec<Option<InstitutionIdx>>,
    members: Vec<Vec<StudentIdx>>,
    found: Vec<Matching>,
}

impl Search<'_> {
    /// A pair `(t, i)` with `t` already placed and preferring `i` blocks
    /// every completion unless `i` can still end up full of students it
    /// ranks above `t`.
    fn doomed(&self, assigned: usize) -> bool {
        let inst = self.inst;
        (0..inst.num_institutions()).any(|i| {
            let prefs = inst.institution_prefs(i);
            prefs.iter().enumerate().any(|(r, &t)| {
                if t >= assigned || self.assignment[t] == Some(i) {
                    return false;
                }
                if !inst.student_prefers(t, Some(i), self.assignment[t]) {
                    return false;
                }
                let mut above = 0;
                for &m in &self.members[i] {
                    if inst.institution_rank(i, m).expect("edge") > r {
                        return true;
                    }
                    above += 1;
                }
                let open = prefs[..r].iter().filter(|&&u| u >= assigned).count();
                above + open < inst.capacity(i)
            })
        })
    }

    fn run(&mut self, s: StudentIdx) {
        if s == self.inst.num_students() {
            let m = Matching::from_assignment(self.assignment.clone());
            if is_stable(self.inst, &m).map(|r| r.is_stable()).unwrap_or(false) {
                self.found.push(m);
            }
            return;
        }
        let options: Vec<Option<InstitutionIdx>> = self
            .inst
            .student_prefs(s)
            .iter()
            .map(|&i| Some(i))
            .chain([None])
            .collect();
        for o in options {
            if let Some(i) = o {
                if self.members[i].len() == self.inst.capacity(i) {
                    continue;
                }
                self.members[i].push(s);
            }
            self.assignment[s] = o;
            if !self.doomed(s + 1) {
                self.run(s + 1);
            }
            self.assignment[s] = None;
            if let Some(i) = o {
                self.members[i].pop();
            }
        }
    }
}

/// Recursive assignment of students with stability pruning.
pub fn enumerate_by_search(inst: &Instance, budget: &Budget) -> Result<Vec<Matching>, OracleError> {
    budget.check(inst)?;
    let mut search = Search {
        inst,
        assignment: vec![None; inst.num_students()],
        members: vec![Vec::new(); inst.num_institutions()],
        found: Vec::new(),
    };
    search.run(0);
    let mut found = search.found;
    found.sort();
    found.dedup();
    Ok(found)
}

/// Cycles of exposed rotations in a stable one-to-one matching, each as
/// the students it moves and their new partners.
fn exposed(inst: &Instance, m: &Matching) -> Vec<Vec<(StudentIdx, InstitutionIdx)>> {
    let mut holder = vec![None; inst.num_institutions()];
    for (x, w) in m.edges() {
        holder[w] = Some(x);
    }
    let next: Vec<Option<StudentIdx>> = (0..inst.num_students())
        .map(|x| {
            let w0 = m.partner(x)?;
            let prefs = inst.student_prefs(x);
            let from = inst.student_rank(x, w0).expect("edge") + 1;
            for &w in &prefs[from..] {
                let y = holder[w]?;
                if inst.institution_prefers(w, x, y) {
                    return Some(y);
                }
            }
            None
        })
        .collect();
    let mut cycles = Vec::new();
    let mut seen = HashSet::new();
    for start in 0..inst.num_students() {
        let mut path = Vec::new();
        let mut x = start;
        let mut on_path = HashSet::new();
        loop {
            if seen.contains(&x) {
                break;
            }
            if !on_path.insert(x) {
                let at = path.iter().position(|&p| p == x).expect("on path");
                let cycle: Vec<StudentIdx> = path[at..].to_vec();
                cycles.push(
                    (0..cycle.len())
                        .map(|k| {
                            let y = cycle[(k + 1) % cycle.len()];
                            (cycle[k], m.partner(y).expect("matched"))
                        })
                        .collect(),
                );
                break;
            }
            path.push(x);
            match next[x] {
                Some(y) => x = y,
                None => break,
            }
        }
        seen.extend(path);
    }
    cycles
}

/// Closure of the clone's student-optimal matching under elimination of
/// exposed rotations, projected back to the original market.
pub fn enumerate_by_rotations(inst: &Instance, budget: &Budget) -> Result<Vec<Matching>, OracleError> {
    budget.check(inst)?;
    let clone = clone_reduction(inst);
    let start = run_da(&clone.instance);
    let mut seen = HashSet::from([start.clone()]);
    let mut queue = VecDeque::from([start]);
    while let Some(m) = queue.pop_front() {
        for cycle in exposed(&clone.instance, &m) {
            let mut next = m.clone();
            for &(x, w) in &cycle {
                next.set_partner(x, Some(w));
            }
            if seen.insert(next.clone()) {
                queue.push_back(next);
            }
        }
    }
    let mut out: Vec<Matching> = seen.iter().map(|m| clone.project(m)).collect();
    out.sort();
    out.dedup();
    Ok(out)
}

#[derive(Debug)]
pub enum OracleMode<'a, T> {
    Utilitarian,
    Egalitarian,
    TwoSided(&'a StudentCosts<T>),
}

impl<T> Clone for OracleMode<'_, T> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<T> Copy for OracleMode<'_, T> {}

/// The objective value of one matching.
pub fn evaluate<T: Scalar>(inst: &Instance, g: &dyn Objective<T>, mode: OracleMode<'_, T>, m: &Matching) -> T {
    let values = (0..inst.num_institutions()).map(|i| g.eval(inst, i, &m.students_at(inst, i)));
    match mode {
        OracleMode::Utilitarian => values.fold(T::zero(), |a, v| a + v),
        OracleMode::Egalitarian => values.max().unwrap_or_else(T::zero),
        OracleMode::TwoSided(h) => values.fold(T::zero(), |a, v| a + v) + h.total(m),
    }
}

/// The optimum over all stable matchings and every matching attaining it.
pub fn oracle_optimum<T: Scalar>(
    inst: &Instance,
    g: &dyn Objective<T>,
    mode: OracleMode<'_, T>,
    budget: &Budget,
) -> Result<(T, Vec<Matching>), OracleError> {
    let all = enumerate_all_stable(inst, budget)?;
    Ok(optimum_over(inst, g, mode, &all))
}

/// Same as [`oracle_optimum`] over an existing enumeration.
pub fn optimum_over<T: Scalar>(
    inst: &Instance,
    g: &dyn Objective<T>,
    mode: OracleMode<'_, T>,
    all: &Enumeration,
) -> (T, Vec<Matching>) {
    let scored: Vec<(T, &Matching)> = all
        .matchings
        .iter()
        .map(|m| (evaluate(inst, g, mode, m), m))
        .collect();
    let best = scored
        .iter()
        .map(|(v, _)| v.clone())
        .min()
        .expect("every market has a stable matching");
    let argmin = scored
        .into_iter()
        .filter(|(v, _)| *v == best)
        .map(|(_, m)| m.clone())
        .collect();
    (best, argmin)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::objectives::{OneToAll, Siblings};

    #[test]
    fn fixture_enumerations() {
        let b = Budget::default();
        let inst = fixtures::ex_two();
        let all = enumerate_all_stable(&inst, &b).unwrap();
        let mut want = vec![fixtures::ex_two_ms(&inst), fixtures::ex_two_mi(&inst)];
        want.sort();
        assert_eq!(all.matchings, want);

        let inst = fixtures::ex_unique();
        let all = enumerate_all_stable(&inst, &b).unwrap();
        assert_eq!(all.matchings, vec![fixtures::ex_unique_matching(&inst)]);

        let inst = fixtures::ex_sib();
        let all = enumerate_all_stable(&inst, &b).unwrap();
        let mut want = vec![fixtures::ex_sib_ms(&inst), fixtures::ex_sib_mi(&inst)];
        want.sort();
        assert_eq!(all.matchings, want);
    }

    #[test]
    fn fixture_optima() {
        let b = Budget::default();
        let inst = fixtures::ex_two();
        let (v, arg) = oracle_optimum::<i64>(&inst, &OneToAll, OracleMode::Utilitarian, &b).unwrap();
        assert_eq!((v, arg), (0, vec![fixtures::ex_two_mi(&inst)]));

        let inst = fixtures::ex_sib();
        let (v, arg) = oracle_optimum::<i64>(&inst, &Siblings, OracleMode::Utilitarian, &b).unwrap();
        assert_eq!((v, arg), (-1, vec![fixtures::ex_sib_mi(&inst)]));

        let inst = fixtures::ex_two_four_caps();
        let (v, arg) = oracle_optimum::<i64>(&inst, &OneToAll, OracleMode::Egalitarian, &b).unwrap();
        assert_eq!(v, 1);
        assert_eq!(arg.len(), 2);
    }

    #[test]
    fn budget_is_enforced() {
        let inst = fixtures::ex_sib();
        let tight = Budget {
            max_capacity: 1,
            ..Budget::default()
        };
        assert_eq!(
            enumerate_all_stable(&inst, &tight),
            Err(OracleError::BudgetExceeded {
                what: "capacity",
                limit: 1,
                actual: 2
            })
        );
    }
}
