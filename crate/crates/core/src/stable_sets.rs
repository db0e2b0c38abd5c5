//! Enumeration of stable sets: for each agent, every distinct set of
//! partners it receives across all stable matchings.
//!
//! Starting from `M0`, the agent's current lowest-ranked partner is
//! forbidden and DA resumes; each resume lands on the student-optimal
//! stable matching avoiding everything forbidden so far, which gives the
//! agent its next stable set. The loop stops when a detector fires. Every
//! agent gets its own copy of the post-DA state.

use serde::Serialize;

use crate::da::{init_state, DaOutcome, DaState, Restriction};
use crate::market::{Instance, StudentIdx};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentSide {
    Institutions,
    Students,
}

/// One stable set, partners sorted best first by the owning agent.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct StableSet {
    pub partners: Vec<usize>,
}

impl StableSet {
    pub fn is_empty(&self) -> bool {
        self.partners.is_empty()
    }

    /// The owner's least preferred partner.
    pub fn cutoff(&self) -> Option<usize> {
        self.partners.last().copied()
    }

    /// The owner's most preferred partner.
    pub fn top(&self) -> Option<usize> {
        self.partners.first().copied()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AgentCatalog {
    pub agent: usize,
    /// Discovery order. For institutions that is pessimal first, for
    /// students it is best first.
    pub sets: Vec<StableSet>,
    /// The only stable set is `∅`.
    pub empty_everywhere: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StableSetCatalog {
    pub side: AgentSide,
    pub agents: Vec<AgentCatalog>,
    /// Cursor steps spent across all per-agent enumerations.
    pub work: usize,
}

impl StableSetCatalog {
    pub fn of(&self, agent: usize) -> &AgentCatalog {
        &self.agents[agent]
    }

    /// Total number of stable sets over all agents.
    pub fn total_sets(&self) -> usize {
        self.agents.iter().map(|a| a.sets.len()).sum()
    }
}

pub fn enumerate_stable_sets(inst: &Instance, side: AgentSide) -> StableSetCatalog {
    let base = init_state(inst);
    enumerate_from(&base, side)
}

/// Enumerates starting from an already-initialised state, which is cloned
/// for every agent.
pub fn enumerate_from(base: &DaState<'_>, side: AgentSide) -> StableSetCatalog {
    let inst = base.instance();
    let mut work = base.stats().cursor_steps();
    let agents = match side {
        AgentSide::Institutions => (0..inst.num_institutions())
            .map(|i| {
                let first: Vec<StudentIdx> = base.held(i).collect();
                if first.is_empty() || base.is_unfilled(i) {
                    return AgentCatalog {
                        agent: i,
                        empty_everywhere: first.is_empty(),
                        sets: vec![StableSet { partners: first }],
                    };
                }
                let mut state = base.clone();
                let mut sets = Vec::new();
                loop {
                    sets.push(StableSet {
                        partners: state.held(i).collect(),
                    });
                    let worst = state.worst_at(i).expect("full institution");
                    if let DaOutcome::Infeasible(_) =
                        state.forbid_and_resume(&[Restriction::Edge(worst, i)])
                    {
                        break;
                    }
                }
                work += state.stats().cursor_steps() - base.stats().cursor_steps();
                AgentCatalog {
                    agent: i,
                    sets,
                    empty_everywhere: false,
                }
            })
            .collect(),
        AgentSide::Students => (0..inst.num_students())
            .map(|s| {
                let Some(first) = base.partner(s) else {
                    return AgentCatalog {
                        agent: s,
                        sets: vec![StableSet { partners: vec![] }],
                        empty_everywhere: true,
                    };
                };
                let mut state = base.clone();
                let mut sets = vec![StableSet {
                    partners: vec![first],
                }];
                let mut current = first;
                while let DaOutcome::Stable(m) = state.forbid_and_resume(&[Restriction::Edge(s, current)]) {
                    current = m.partner(s).expect("matched students stay matched");
                    sets.push(StableSet {
                        partners: vec![current],
                    });
                }
                work += state.stats().cursor_steps() - base.stats().cursor_steps();
                AgentCatalog {
                    agent: s,
                    sets,
                    empty_everywhere: false,
                }
            })
            .collect(),
    };
    StableSetCatalog { side, agents, work }
}
