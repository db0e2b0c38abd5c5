//! Rotations of a one-to-one market and their precedence order.
//!
//! Starting from the student-optimal matching, exposed rotations are
//! eliminated one at a time until the institution-optimal matching is
//! reached. Every rotation of the market appears exactly once on such a
//! chain, and the chain order is a linear extension of the precedence
//! order.

use std::collections::HashMap;

use serde::Serialize;

use crate::da::run_da;
use crate::market::{Instance, InstitutionIdx, Matching, StudentIdx};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RotationMove {
    pub student: StudentIdx,
    pub from: InstitutionIdx,
    pub to: InstitutionIdx,
}

/// A cyclic exchange: every student moves to the partner of the next one.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Rotation {
    pub moves: Vec<RotationMove>,
}

#[derive(Clone, Debug)]
pub struct Rotations {
    /// Student-optimal matching.
    pub base: Matching,
    /// Institution-optimal matching.
    pub last: Matching,
    /// Chain order.
    pub rotations: Vec<Rotation>,
    /// Direct predecessors of each rotation, by index.
    pub predecessors: Vec<Vec<usize>>,
}

struct Walker<'a> {
    inst: &'a Instance,
    seat_of: Vec<Option<InstitutionIdx>>,
    student_at: Vec<Option<StudentIdx>>,
    /// Next list position to examine for each student.
    cursor: Vec<usize>,
}

impl Walker<'_> {
    /// The first institution below the student's partner that prefers her
    /// to its own partner, with that partner. `None` when the scan runs off
    /// the list or meets an institution with nobody assigned.
    fn next(&mut self, x: StudentIdx) -> Option<(InstitutionIdx, StudentIdx)> {
        let prefs = self.inst.student_prefs(x);
        while self.cursor[x] < prefs.len() {
            let w = prefs[self.cursor[x]];
            let y = self.student_at[w]?;
            if self.inst.institution_prefers(w, x, y) {
                return Some((w, y));
            }
            self.cursor[x] += 1;
        }
        None
    }

    fn exposed_cycle(&mut self) -> Option<Vec<StudentIdx>> {
        let n = self.seat_of.len();
        // 0 unvisited, 1 on the current path, 2 finished
        let mut mark = vec![0u8; n];
        for start in 0..n {
            if mark[start] != 0 || self.seat_of[start].is_none() {
                continue;
            }
            let mut path = Vec::new();
            let mut x = start;
            loop {
                mark[x] = 1;
                path.push(x);
                match self.next(x) {
                    None => break,
                    Some((_, y)) if mark[y] == 1 => {
                        let at = path.iter().position(|&p| p == y).expect("on path");
                        return Some(path.split_off(at));
                    }
                    Some((_, y)) if mark[y] == 2 => break,
                    Some((_, y)) => x = y,
                }
            }
            for p in path {
                mark[p] = 2;
            }
        }
        None
    }
}

/// Finds every rotation of a one-to-one market (all capacities 1).
pub fn discover_rotations(inst: &Instance) -> Rotations {
    assert!(
        (0..inst.num_institutions()).all(|w| inst.capacity(w) <= 1),
        "rotations are computed on one-to-one markets"
    );
    let base = run_da(inst);
    let mut student_at = vec![None; inst.num_institutions()];
    for (x, w) in base.edges() {
        student_at[w] = Some(x);
    }
    let cursor = (0..inst.num_students())
        .map(|x| base.partner(x).map_or(0, |w| inst.student_rank(x, w).expect("edge") + 1))
        .collect();
    let mut walker = Walker {
        inst,
        seat_of: base.assignment().to_vec(),
        student_at,
        cursor,
    };

    let mut rotations: Vec<Rotation> = Vec::new();
    let mut predecessors: Vec<Vec<usize>> = Vec::new();
    let mut produced_by: HashMap<(StudentIdx, InstitutionIdx), usize> = HashMap::new();
    // Per institution: (rotation, rank of the partner it brought in).
    let mut history: Vec<Vec<(usize, usize)>> = vec![Vec::new(); inst.num_institutions()];
    let base_rank: Vec<Option<usize>> = (0..inst.num_institutions())
        .map(|w| walker.student_at[w].map(|x| inst.institution_rank(w, x).expect("edge")))
        .collect();

    while let Some(cycle) = walker.exposed_cycle() {
        let id = rotations.len();
        let moves: Vec<RotationMove> = (0..cycle.len())
            .map(|k| {
                let x = cycle[k];
                let y = cycle[(k + 1) % cycle.len()];
                RotationMove {
                    student: x,
                    from: walker.seat_of[x].expect("matched"),
                    to: walker.seat_of[y].expect("matched"),
                }
            })
            .collect();

        let mut preds = Vec::new();
        for mv in &moves {
            if let Some(&p) = produced_by.get(&(mv.student, mv.from)) {
                preds.push(p);
            }
            let prefs = inst.student_prefs(mv.student);
            let lo = inst.student_rank(mv.student, mv.from).expect("edge") + 1;
            let hi = inst.student_rank(mv.student, mv.to).expect("edge");
            for &w in &prefs[lo..hi] {
                let r = inst.institution_rank(w, mv.student).expect("edge");
                let Some(b) = base_rank[w] else { continue };
                if b < r {
                    continue;
                }
                let crossing = history[w].iter().find(|&&(_, nr)| nr < r);
                debug_assert!(crossing.is_some(), "skipped institution already prefers its partner");
                if let Some(&(p, _)) = crossing {
                    preds.push(p);
                }
            }
        }
        preds.sort_unstable();
        preds.dedup();

        for mv in &moves {
            walker.seat_of[mv.student] = Some(mv.to);
            walker.student_at[mv.to] = Some(mv.student);
            walker.cursor[mv.student] = inst.student_rank(mv.student, mv.to).expect("edge") + 1;
            produced_by.insert((mv.student, mv.to), id);
            history[mv.to].push((id, inst.institution_rank(mv.to, mv.student).expect("edge")));
        }
        rotations.push(Rotation { moves });
        predecessors.push(preds);
    }

    Rotations {
        base,
        last: Matching::from_assignment(walker.seat_of),
        rotations,
        predecessors,
    }
}

impl Rotations {
    pub fn len(&self) -> usize {
        self.rotations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rotations.is_empty()
    }

    pub fn is_closed(&self, chosen: &[bool]) -> bool {
        (0..self.len()).all(|k| !chosen[k] || self.predecessors[k].iter().all(|&p| chosen[p]))
    }

    /// Eliminates the chosen rotations from the base matching in chain
    /// order. `chosen` must be closed.
    pub fn apply(&self, chosen: &[bool]) -> Matching {
        let mut m = self.base.clone();
        for (rot, _) in self.rotations.iter().zip(chosen).filter(|(_, &c)| c) {
            for mv in &rot.moves {
                m.set_partner(mv.student, Some(mv.to));
            }
        }
        m
    }
}

/// Rotations together with their weight changes under an edge weight.
#[derive(Clone, Debug)]
pub struct RotationPoset<T> {
    pub rotations: Rotations,
    /// Weight gained minus weight lost by each rotation.
    pub deltas: Vec<T>,
    pub base_weight: T,
}

pub fn build_rotation_poset<T: Scalar>(
    inst: &Instance,
    weight: impl Fn(StudentIdx, InstitutionIdx) -> T,
) -> RotationPoset<T> {
    let rotations = discover_rotations(inst);
    let (deltas, base_weight) = weigh_rotations(&rotations, weight);
    RotationPoset {
        rotations,
        deltas,
        base_weight,
    }
}

/// Per-rotation weight changes and the weight of the base matching.
pub fn weigh_rotations<T: Scalar>(
    rotations: &Rotations,
    weight: impl Fn(StudentIdx, InstitutionIdx) -> T,
) -> (Vec<T>, T) {
    let deltas = rotations
        .rotations
        .iter()
        .map(|rot| {
            rot.moves.iter().fold(T::zero(), |acc, mv| {
                acc + weight(mv.student, mv.to) - weight(mv.student, mv.from)
            })
        })
        .collect();
    let base_weight = rotations
        .base
        .edges()
        .fold(T::zero(), |acc, (x, w)| acc + weight(x, w));
    (deltas, base_weight)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::market::is_stable;
    use crate::solver::clone::clone_reduction;

    #[test]
    fn ex_two_has_one_rotation() {
        let inst = fixtures::ex_two();
        let rot = discover_rotations(&inst);
        assert_eq!(rot.len(), 1);
        assert_eq!(rot.base, fixtures::ex_two_ms(&inst));
        assert_eq!(rot.last, fixtures::ex_two_mi(&inst));
        let mut moves = rot.rotations[0].moves.clone();
        moves.sort_by_key(|m| m.student);
        assert_eq!(
            moves,
            vec![
                RotationMove { student: 0, from: 0, to: 1 },
                RotationMove { student: 1, from: 1, to: 0 },
            ]
        );
    }

    #[test]
    fn ex_unique_has_none() {
        let inst = fixtures::ex_unique();
        assert!(discover_rotations(&inst).is_empty());
    }

    #[test]
    fn ex_sib_clone_has_one_rotation() {
        let inst = fixtures::ex_sib();
        let c = clone_reduction(&inst);
        let rot = discover_rotations(&c.instance);
        assert_eq!(rot.len(), 1);
        assert_eq!(c.project(&rot.base), fixtures::ex_sib_ms(&inst));
        assert_eq!(c.project(&rot.last), fixtures::ex_sib_mi(&inst));
        assert!(is_stable(&c.instance, &rot.last).unwrap().is_stable());
    }

    #[test]
    fn deltas_sum_to_the_full_chain() {
        let inst = fixtures::ex_two();
        let poset = build_rotation_poset(&inst, |s, i| if (s, i) == (0, 0) { 1i64 } else { 0 });
        assert_eq!(poset.deltas, vec![-1]);
        assert_eq!(poset.base_weight, 1);
    }
}
