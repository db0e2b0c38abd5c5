//! Seat cloning: every institution with capacity `q` becomes `q` unit
//! seats sharing its priority list. Students rank the seats of an
//! institution contiguously, seat 1 first.

use std::collections::HashSet;

use crate::market::{CountingRule, Instance, InstitutionIdx, Matching, RawInstance, RawInstitution, RawStudent};

/// A one-to-one market built from a many-to-one one.
#[derive(Clone, Debug)]
pub struct ClonedMarket {
    pub instance: Instance,
    /// Original institution owning each seat.
    pub seat_owner: Vec<InstitutionIdx>,
    /// Seats of each original institution, seat 1 first.
    pub seats_of: Vec<Vec<usize>>,
}

pub fn clone_reduction(inst: &Instance) -> ClonedMarket {
    let mut seat_owner = Vec::new();
    let mut seats_of = Vec::with_capacity(inst.num_institutions());
    for i in 0..inst.num_institutions() {
        let seats: Vec<usize> = (0..inst.capacity(i))
            .map(|_| {
                seat_owner.push(i);
                seat_owner.len() - 1
            })
            .collect();
        seats_of.push(seats);
    }

    let mut names: Vec<String> = Vec::with_capacity(seat_owner.len());
    for (i, seats) in seats_of.iter().enumerate() {
        for k in 0..seats.len() {
            names.push(format!("{}#{}", inst.institution_id(i), k + 1));
        }
    }
    let unique: HashSet<&str> = names.iter().map(String::as_str).collect();
    let clash = unique.len() != names.len()
        || (0..inst.num_students()).any(|s| unique.contains(inst.student_id(s)));
    if clash {
        names = (0..seat_owner.len()).map(|k| format!("#seat{k}")).collect();
    }

    let students = (0..inst.num_students())
        .map(|s| RawStudent {
            id: inst.student_id(s).to_string(),
            prefs: inst
                .student_prefs(s)
                .iter()
                .flat_map(|&i| seats_of[i].iter().map(|&w| names[w].clone()))
                .collect(),
            categories: Vec::new(),
        })
        .collect();
    let institutions = seat_owner
        .iter()
        .enumerate()
        .map(|(w, &i)| RawInstitution {
            id: names[w].clone(),
            capacity: 1,
            prefs: inst
                .institution_prefs(i)
                .iter()
                .map(|&s| inst.student_id(s).to_string())
                .collect(),
            bounds: Vec::new(),
        })
        .collect();
    let raw = RawInstance {
        students,
        institutions,
        families: Vec::new(),
        edge_costs: Vec::new(),
        counting_rule: CountingRule::OneToAll,
    };
    let instance = Instance::validate(raw).expect("a clone of a valid instance is valid");
    ClonedMarket {
        instance,
        seat_owner,
        seats_of,
    }
}

impl ClonedMarket {
    pub fn num_seats(&self) -> usize {
        self.seat_owner.len()
    }

    pub fn owner(&self, seat: usize) -> InstitutionIdx {
        self.seat_owner[seat]
    }

    /// Maps a clone matching back to the original market.
    pub fn project(&self, m: &Matching) -> Matching {
        Matching::from_assignment(
            m.assignment()
                .iter()
                .map(|w| w.map(|w| self.seat_owner[w]))
                .collect(),
        )
    }

    /// Seats the students of each institution in priority order, which is
    /// the only way a stable matching of the original lifts to a stable
    /// one of the clone.
    pub fn lift(&self, inst: &Instance, m: &Matching) -> Matching {
        let mut out = Matching::empty(m.num_students());
        for i in 0..inst.num_institutions() {
            for (k, s) in m.students_at(inst, i).into_iter().enumerate() {
                out.set_partner(s, Some(self.seats_of[i][k]));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::da::run_da;
    use crate::fixtures;
    use crate::market::is_stable;

    #[test]
    fn ex_sib_has_four_seats() {
        let inst = fixtures::ex_sib();
        let c = clone_reduction(&inst);
        let ids: Vec<&str> = (0..c.num_seats())
            .map(|w| c.instance.institution_id(w))
            .collect();
        assert_eq!(ids, vec!["i1#1", "i1#2", "i2#1", "i2#2"]);
        let s1 = inst.student_index("s1").unwrap();
        let prefs: Vec<&str> = c
            .instance
            .student_prefs(s1)
            .iter()
            .map(|&w| c.instance.institution_id(w))
            .collect();
        assert_eq!(prefs, vec!["i1#1", "i1#2", "i2#1", "i2#2"]);
    }

    #[test]
    fn unit_capacities_keep_the_market() {
        let inst = fixtures::ex_two();
        let c = clone_reduction(&inst);
        assert_eq!(c.num_seats(), inst.num_institutions());
        for s in 0..inst.num_students() {
            assert_eq!(c.instance.student_prefs(s), inst.student_prefs(s));
        }
    }

    #[test]
    fn lift_and_project_round_trip() {
        let inst = fixtures::ex_sib();
        let c = clone_reduction(&inst);
        for m in [fixtures::ex_sib_ms(&inst), fixtures::ex_sib_mi(&inst)] {
            let lifted = c.lift(&inst, &m);
            assert!(is_stable(&c.instance, &lifted).unwrap().is_stable());
            assert_eq!(c.project(&lifted), m);
        }
        let m0 = run_da(&c.instance);
        assert_eq!(c.project(&m0), run_da(&inst));
    }
}
