//! Student-proposing deferred acceptance with a growing set of forbidden
//! edges.
//!
//! A [`DaState`] is created by [`init_state`], which runs plain DA to the
//! student-optimal matching `M0` and freezes two baseline facts about it:
//! the institutions left with free seats (`R`) and the students left
//! unmatched. Forbidding edges and resuming never restarts the proposal
//! sequence; each student walks her list at most once over the lifetime of
//! the state, so the total work is bounded by `|E|`.
//!
//! Breaking a marriage `(s, i)` removes `s` from `i` and bans `s` together
//! with every student `i` ranks below her, stored as a per-institution
//! threshold instead of materialised edges. Students currently held at `i`
//! beneath the threshold are evicted with her: in any stable matching that
//! avoids the edge, `i` is full of students it prefers to `s`.
//!
//! A proposal along an explicitly forbidden edge is treated as an
//! acceptance followed by an immediate break, which is what keeps the edge
//! from blocking the final matching.

use std::collections::{BTreeSet, HashSet, VecDeque};

use serde::Serialize;

use crate::market::{Instance, InstitutionIdx, Matching, StudentIdx};

/// Why a resume proved that no stable matching avoids the forbidden edges.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "detector", rename_all = "snake_case")]
pub enum Infeasibility {
    /// A student held by an institution with free seats in `M0` was
    /// removed. Such institutions keep the same set in every stable
    /// matching.
    DisplacedInvariantStudent {
        student: StudentIdx,
        institution: InstitutionIdx,
    },
    /// A student proposed to an institution that had free seats in `M0`
    /// and is not her `M0` partner.
    ProposalToUnfilled {
        student: StudentIdx,
        institution: InstitutionIdx,
    },
    /// A student matched in `M0` ran off the end of her list.
    Exhausted { student: StudentIdx },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DaOutcome {
    Stable(Matching),
    Infeasible(Infeasibility),
}

impl DaOutcome {
    pub fn stable(self) -> Option<Matching> {
        match self {
            DaOutcome::Stable(m) => Some(m),
            DaOutcome::Infeasible(_) => None,
        }
    }
}

/// One entry of a forbid request.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Restriction {
    /// Forbid exactly this edge.
    Edge(StudentIdx, InstitutionIdx),
    /// Forbid the edge and every edge from a student the institution ranks
    /// below this one.
    AtOrBelow(StudentIdx, InstitutionIdx),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    Propose { student: String, institution: String },
    Skip { student: String, institution: String },
    Reject { student: String, institution: String },
    Break { student: String, institution: String },
    Ban { institution: String, from_rank: usize },
    Infeasible { reason: Infeasibility },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct DaStats {
    /// Proposals that reached an institution.
    pub proposals: usize,
    /// Proposals skipped because of a ban.
    pub skipped: usize,
    pub rejections: usize,
    pub breaks: usize,
}

impl DaStats {
    /// Every step of every student's cursor.
    pub fn cursor_steps(&self) -> usize {
        self.proposals + self.skipped
    }
}

#[derive(Clone, Debug)]
struct Baseline {
    matching: Matching,
    unfilled: Vec<bool>,
    unmatched: Vec<bool>,
}

#[derive(Clone, Debug)]
pub struct DaState<'a> {
    inst: &'a Instance,
    assignment: Vec<Option<InstitutionIdx>>,
    cursor: Vec<usize>,
    held: Vec<BTreeSet<(usize, StudentIdx)>>,
    forbidden: HashSet<(StudentIdx, InstitutionIdx)>,
    ban: Vec<usize>,
    queue: VecDeque<StudentIdx>,
    baseline: Option<Baseline>,
    failed: Option<Infeasibility>,
    touched: Vec<bool>,
    stats: DaStats,
    trace: Option<Vec<TraceEvent>>,
}

/// The student-optimal stable matching.
pub fn run_da(inst: &Instance) -> Matching {
    init_state(inst).matching()
}

/// Runs DA to `M0` and freezes the baseline used by the infeasibility
/// detectors.
pub fn init_state(inst: &Instance) -> DaState<'_> {
    DaState::start(inst, false)
}

/// As [`init_state`], recording a trace of every event.
pub fn init_state_traced(inst: &Instance) -> DaState<'_> {
    DaState::start(inst, true)
}

impl<'a> DaState<'a> {
    fn start(inst: &'a Instance, traced: bool) -> Self {
        let mut state = DaState {
            inst,
            assignment: vec![None; inst.num_students()],
            cursor: vec![0; inst.num_students()],
            held: vec![BTreeSet::new(); inst.num_institutions()],
            forbidden: HashSet::new(),
            ban: vec![usize::MAX; inst.num_institutions()],
            queue: (0..inst.num_students()).collect(),
            baseline: None,
            failed: None,
            touched: vec![false; inst.num_institutions()],
            stats: DaStats::default(),
            trace: traced.then(Vec::new),
        };
        state
            .drain()
            .expect("unrestricted deferred acceptance cannot fail");
        let matching = state.matching();
        state.baseline = Some(Baseline {
            unfilled: (0..inst.num_institutions())
                .map(|i| state.held[i].len() < inst.capacity(i))
                .collect(),
            unmatched: (0..inst.num_students())
                .map(|s| state.assignment[s].is_none())
                .collect(),
            matching,
        });
        state.touched.iter_mut().for_each(|t| *t = false);
        state
    }

    pub fn instance(&self) -> &'a Instance {
        self.inst
    }

    /// The current provisional matching.
    pub fn matching(&self) -> Matching {
        Matching::from_assignment(self.assignment.clone())
    }

    pub fn partner(&self, s: StudentIdx) -> Option<InstitutionIdx> {
        self.assignment[s]
    }

    /// Students held by `i`, best first.
    pub fn held(&self, i: InstitutionIdx) -> impl DoubleEndedIterator<Item = StudentIdx> + '_ {
        self.held[i].iter().map(|&(_, s)| s)
    }

    pub fn held_count(&self, i: InstitutionIdx) -> usize {
        self.held[i].len()
    }

    /// The student `i` currently ranks lowest among those it holds.
    pub fn worst_at(&self, i: InstitutionIdx) -> Option<StudentIdx> {
        self.held[i].last().map(|&(_, s)| s)
    }

    /// `M0`, the student-optimal stable matching.
    pub fn initial_matching(&self) -> &Matching {
        &self.baseline.as_ref().expect("initialised").matching
    }

    /// Was `i` left with free seats by `M0`?
    pub fn is_unfilled(&self, i: InstitutionIdx) -> bool {
        self.baseline.as_ref().expect("initialised").unfilled[i]
    }

    /// Was `s` unmatched in `M0`?
    pub fn was_unmatched(&self, s: StudentIdx) -> bool {
        self.baseline.as_ref().expect("initialised").unmatched[s]
    }

    pub fn unfilled_institutions(&self) -> Vec<InstitutionIdx> {
        (0..self.inst.num_institutions())
            .filter(|&i| self.is_unfilled(i))
            .collect()
    }

    pub fn unmatched_students(&self) -> Vec<StudentIdx> {
        (0..self.inst.num_students())
            .filter(|&s| self.was_unmatched(s))
            .collect()
    }

    /// The explicitly forbidden edges.
    pub fn forbidden(&self) -> &HashSet<(StudentIdx, InstitutionIdx)> {
        &self.forbidden
    }

    /// Rank threshold at `i`: students at or below it may not propose.
    pub fn ban_threshold(&self, i: InstitutionIdx) -> Option<usize> {
        (self.ban[i] != usize::MAX).then_some(self.ban[i])
    }

    /// Is the edge barred, either explicitly or through a ban?
    pub fn is_barred(&self, s: StudentIdx, i: InstitutionIdx) -> bool {
        self.forbidden.contains(&(s, i))
            || self
                .inst
                .institution_rank(i, s)
                .is_some_and(|r| r >= self.ban[i])
    }

    /// Number of distinct edges barred so far, explicit or banned.
    pub fn barred_edge_count(&self) -> usize {
        let banned: usize = (0..self.inst.num_institutions())
            .map(|i| {
                let len = self.inst.institution_prefs(i).len();
                len.saturating_sub(self.ban[i].min(len))
            })
            .sum();
        let explicit_only = self
            .forbidden
            .iter()
            .filter(|&&(s, i)| {
                self.inst
                    .institution_rank(i, s)
                    .is_some_and(|r| r < self.ban[i])
            })
            .count();
        banned + explicit_only
    }

    pub fn stats(&self) -> DaStats {
        self.stats
    }

    pub fn failure(&self) -> Option<Infeasibility> {
        self.failed
    }

    /// Recorded events, if tracing was requested.
    pub fn trace(&self) -> Option<&[TraceEvent]> {
        self.trace.as_deref()
    }

    /// Institutions whose held set changed since the last call.
    pub fn take_touched(&mut self) -> Vec<InstitutionIdx> {
        let out = (0..self.touched.len()).filter(|&i| self.touched[i]).collect();
        self.touched.iter_mut().for_each(|t| *t = false);
        out
    }

    /// Adds restrictions, breaks every marriage they hit and resumes the
    /// proposal sequence. Returns the student-optimal stable matching
    /// avoiding everything forbidden so far, or the detector that proved
    /// none exists. Once infeasible, the state stays infeasible.
    pub fn forbid_and_resume(&mut self, restrictions: &[Restriction]) -> DaOutcome {
        if let Some(reason) = self.failed {
            return DaOutcome::Infeasible(reason);
        }
        for &r in restrictions {
            let res = match r {
                Restriction::Edge(s, i) => {
                    self.forbidden.insert((s, i));
                    if self.assignment[s] == Some(i) {
                        self.break_marriage(s, i)
                    } else {
                        Ok(())
                    }
                }
                Restriction::AtOrBelow(s, i) => match self.inst.institution_rank(i, s) {
                    Some(rank) => self.ban_from(i, rank),
                    None => Ok(()),
                },
            };
            if let Err(reason) = res {
                return self.fail(reason);
            }
        }
        match self.drain() {
            Ok(()) => DaOutcome::Stable(self.matching()),
            Err(reason) => self.fail(reason),
        }
    }

    fn fail(&mut self, reason: Infeasibility) -> DaOutcome {
        self.failed = Some(reason);
        if let Some(t) = self.trace.as_mut() {
            t.push(TraceEvent::Infeasible { reason });
        }
        DaOutcome::Infeasible(reason)
    }

    fn break_marriage(&mut self, s: StudentIdx, i: InstitutionIdx) -> Result<(), Infeasibility> {
        let rank = self
            .inst
            .institution_rank(i, s)
            .expect("matched edges are acceptable");
        self.ban_from(i, rank)
    }

    /// Bans every student of rank `>= rank` at `i`, evicting those held.
    fn ban_from(&mut self, i: InstitutionIdx, rank: usize) -> Result<(), Infeasibility> {
        let evicted: Vec<(usize, StudentIdx)> = self.held[i].range((rank, 0)..).copied().collect();
        if let (Some(b), Some(&(_, s))) = (&self.baseline, evicted.first()) {
            if b.unfilled[i] {
                return Err(Infeasibility::DisplacedInvariantStudent {
                    student: s,
                    institution: i,
                });
            }
        }
        if rank < self.ban[i] {
            self.ban[i] = rank;
            if let Some(t) = self.trace.as_mut() {
                t.push(TraceEvent::Ban {
                    institution: self.inst.institution_id(i).to_string(),
                    from_rank: rank,
                });
            }
        }
        for (r, s) in evicted {
            self.held[i].remove(&(r, s));
            self.assignment[s] = None;
            self.queue.push_back(s);
            self.touched[i] = true;
            self.stats.breaks += 1;
            if let Some(t) = self.trace.as_mut() {
                t.push(TraceEvent::Break {
                    student: self.inst.student_id(s).to_string(),
                    institution: self.inst.institution_id(i).to_string(),
                });
            }
        }
        Ok(())
    }

    fn drain(&mut self) -> Result<(), Infeasibility> {
        while let Some(s) = self.queue.pop_front() {
            if self.assignment[s].is_none() {
                self.propose_from(s)?;
            }
        }
        Ok(())
    }

    /// Walks `s` down her list until some institution holds her or the
    /// list runs out.
    fn propose_from(&mut self, s: StudentIdx) -> Result<(), Infeasibility> {
        let inst = self.inst;
        let prefs = inst.student_prefs(s);
        loop {
            let Some(&i) = prefs.get(self.cursor[s]) else {
                return match &self.baseline {
                    Some(b) if !b.unmatched[s] => Err(Infeasibility::Exhausted { student: s }),
                    _ => Ok(()),
                };
            };
            self.cursor[s] += 1;
            let rank = inst.institution_rank(i, s).expect("symmetric acceptability");
            if rank >= self.ban[i] {
                self.stats.skipped += 1;
                self.log(|| TraceEvent::Skip {
                    student: inst.student_id(s).to_string(),
                    institution: inst.institution_id(i).to_string(),
                });
                continue;
            }
            if let Some(b) = &self.baseline {
                if b.unfilled[i] {
                    if b.matching.partner(s) != Some(i) {
                        return Err(Infeasibility::ProposalToUnfilled {
                            student: s,
                            institution: i,
                        });
                    }
                    if self.forbidden.contains(&(s, i)) {
                        return Err(Infeasibility::DisplacedInvariantStudent {
                            student: s,
                            institution: i,
                        });
                    }
                }
            }
            self.stats.proposals += 1;
            self.log(|| TraceEvent::Propose {
                student: inst.student_id(s).to_string(),
                institution: inst.institution_id(i).to_string(),
            });
            if self.forbidden.contains(&(s, i)) {
                self.ban_from(i, rank)?;
                continue;
            }
            self.held[i].insert((rank, s));
            self.assignment[s] = Some(i);
            self.touched[i] = true;
            if self.held[i].len() > inst.capacity(i) {
                let (_, worst) = self.held[i].pop_last().expect("over capacity");
                self.assignment[worst] = None;
                self.stats.rejections += 1;
                self.log(|| TraceEvent::Reject {
                    student: inst.student_id(worst).to_string(),
                    institution: inst.institution_id(i).to_string(),
                });
                if worst == s {
                    continue;
                }
                self.queue.push_back(worst);
            }
            return Ok(());
        }
    }

    fn log(&mut self, event: impl FnOnce() -> TraceEvent) {
        if let Some(t) = self.trace.as_mut() {
            t.push(event());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::market::is_stable;

    #[test]
    fn da_on_fixtures() {
        let inst = fixtures::ex_two();
        assert_eq!(run_da(&inst), fixtures::ex_two_ms(&inst));
        let inst = fixtures::ex_unique();
        assert_eq!(run_da(&inst), fixtures::ex_unique_matching(&inst));
        let inst = fixtures::ex_sib();
        assert_eq!(run_da(&inst), fixtures::ex_sib_ms(&inst));
    }

    #[test]
    fn baseline_sets() {
        let inst = fixtures::ex_two();
        let st = init_state(&inst);
        assert!(st.unfilled_institutions().is_empty());
        assert!(st.unmatched_students().is_empty());

        let inst = fixtures::ex_sib();
        let st = init_state(&inst);
        assert!(st.unfilled_institutions().is_empty());
        assert!(st.unmatched_students().is_empty());

        let mut raw = fixtures::ex_sib_raw();
        raw.institutions[1].capacity = 3;
        let inst = Instance::validate(raw).unwrap();
        let st = init_state(&inst);
        assert_eq!(st.unfilled_institutions(), vec![1]);
    }

    #[test]
    fn forbidding_moves_ex_two_to_mi_then_fails() {
        let inst = fixtures::ex_two();
        let mut st = init_state(&inst);
        let out = st.forbid_and_resume(&[Restriction::Edge(0, 0)]);
        assert_eq!(out, DaOutcome::Stable(fixtures::ex_two_mi(&inst)));
        let out = st.forbid_and_resume(&[Restriction::Edge(1, 0)]);
        assert!(matches!(out, DaOutcome::Infeasible(_)));
        // Sticky.
        assert!(matches!(st.forbid_and_resume(&[]), DaOutcome::Infeasible(_)));
    }

    #[test]
    fn empty_forbid_is_a_no_op() {
        let inst = fixtures::ex_sib();
        let mut st = init_state(&inst);
        let before = st.matching();
        assert_eq!(st.forbid_and_resume(&[]), DaOutcome::Stable(before));
    }

    #[test]
    fn forbidding_an_unmatched_edge_defers_the_break() {
        // (s2, i1) is not in MS. It only matters once s2 reaches i1.
        let inst = fixtures::ex_two();
        let mut st = init_state(&inst);
        let out = st.forbid_and_resume(&[Restriction::Edge(1, 0)]);
        assert_eq!(out, DaOutcome::Stable(fixtures::ex_two_ms(&inst)));
        assert_eq!(st.ban_threshold(0), None);
        let out = st.forbid_and_resume(&[Restriction::Edge(0, 0)]);
        assert!(matches!(out, DaOutcome::Infeasible(_)));
    }

    #[test]
    fn breaking_at_an_unfilled_institution_is_infeasible() {
        let mut raw = fixtures::ex_sib_raw();
        raw.institutions[1].capacity = 3;
        let inst = Instance::validate(raw).unwrap();
        let mut st = init_state(&inst);
        let m0 = st.matching();
        let (s, _) = m0.edges().find(|&(_, i)| i == 1).unwrap();
        let out = st.forbid_and_resume(&[Restriction::Edge(s, 1)]);
        assert!(matches!(
            out,
            DaOutcome::Infeasible(Infeasibility::DisplacedInvariantStudent { institution: 1, .. })
        ));
    }

    #[test]
    fn at_or_below_bans_the_tail() {
        let inst = fixtures::ex_sib();
        let mut st = init_state(&inst);
        // i1 holds {s1, s4}; ban s1 and everyone below her at i1.
        let out = st.forbid_and_resume(&[Restriction::AtOrBelow(0, 0)]);
        let m = out.stable().unwrap();
        assert_eq!(m, fixtures::ex_sib_mi(&inst));
        assert!(is_stable(&inst, &m).unwrap().is_stable());
        assert!(st.is_barred(2, 0));
        assert!(!st.is_barred(3, 0));
        assert_eq!(st.barred_edge_count(), 2);
    }

    #[test]
    fn trace_records_proposals() {
        let inst = fixtures::ex_two();
        let st = init_state_traced(&inst);
        let trace = st.trace().unwrap();
        let proposals = trace
            .iter()
            .filter(|e| matches!(e, TraceEvent::Propose { .. }))
            .count();
        assert_eq!(proposals, st.stats().proposals);
        assert_eq!(proposals, 2);
    }
}
