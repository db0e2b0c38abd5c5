//! The three small reference markets used throughout the tests, docs and
//! the `fixtures/` directory.
//!
//! * `EX-UNIQUE`: two students, two single-seat institutions, one stable
//!   matching.
//! * `EX-TWO`: two students, two single-seat institutions, exactly two
//!   stable matchings (student-optimal `MS`, institution-optimal `MI`), with
//!   a zero cap on category `A` at `i1`.
//! * `EX-SIB`: four students, two institutions with two seats each, and the
//!   family `{s1, s3}`.

use crate::market::{CountingRule, Instance, Matching, RawInstance};

pub fn ex_unique_raw() -> RawInstance {
    RawInstance::new(CountingRule::OneToAll)
        .student("s1", &["i1", "i2"], &[])
        .student("s2", &["i1", "i2"], &[])
        .institution("i1", 1, &["s2", "s1"])
        .institution("i2", 1, &["s2", "s1"])
}

pub fn ex_unique() -> Instance {
    Instance::validate(ex_unique_raw()).expect("EX-UNIQUE is valid")
}

pub fn ex_two_raw() -> RawInstance {
    RawInstance::new(CountingRule::OneToAll)
        .student("s1", &["i1", "i2"], &["A"])
        .student("s2", &["i2", "i1"], &["B"])
        .institution("i1", 1, &["s2", "s1"])
        .institution("i2", 1, &["s1", "s2"])
        .bound("i1", "A", 0, Some(0))
}

pub fn ex_two() -> Instance {
    Instance::validate(ex_two_raw()).expect("EX-TWO is valid")
}

/// EX-TWO plus `u^A = 0` at `i2`: no stable matching meets every cap.
pub fn ex_two_blocked() -> Instance {
    Instance::validate(ex_two_raw().bound("i2", "A", 0, Some(0))).expect("valid")
}

/// EX-TWO with `u^A = u^B = 0` at both institutions: every stable
/// matching has a maximum violation of one.
pub fn ex_two_four_caps() -> Instance {
    let raw = RawInstance::new(CountingRule::OneToAll)
        .student("s1", &["i1", "i2"], &["A"])
        .student("s2", &["i2", "i1"], &["B"])
        .institution("i1", 1, &["s2", "s1"])
        .institution("i2", 1, &["s1", "s2"])
        .bound("i1", "A", 0, Some(0))
        .bound("i1", "B", 0, Some(0))
        .bound("i2", "A", 0, Some(0))
        .bound("i2", "B", 0, Some(0));
    Instance::validate(raw).expect("valid")
}

pub fn ex_sib_raw() -> RawInstance {
    RawInstance::new(CountingRule::OneToAll)
        .student("s1", &["i1", "i2"], &[])
        .student("s2", &["i2", "i1"], &[])
        .student("s3", &["i2", "i1"], &[])
        .student("s4", &["i1", "i2"], &[])
        .institution("i1", 2, &["s2", "s4", "s1", "s3"])
        .institution("i2", 2, &["s1", "s3", "s2", "s4"])
        .family("f1", &["s1", "s3"])
}

pub fn ex_sib() -> Instance {
    Instance::validate(ex_sib_raw()).expect("EX-SIB is valid")
}

fn by_ids(inst: &Instance, pairs: &[(&str, &str)]) -> Matching {
    let edges: Vec<_> = pairs
        .iter()
        .map(|(s, i)| {
            (
                inst.student_index(s).expect("known student"),
                inst.institution_index(i).expect("known institution"),
            )
        })
        .collect();
    Matching::from_edges(inst.num_students(), &edges)
}

/// `{(s2,i1), (s1,i2)}`
pub fn ex_unique_matching(inst: &Instance) -> Matching {
    by_ids(inst, &[("s2", "i1"), ("s1", "i2")])
}

/// `MS = {(s1,i1), (s2,i2)}`
pub fn ex_two_ms(inst: &Instance) -> Matching {
    by_ids(inst, &[("s1", "i1"), ("s2", "i2")])
}

/// `MI = {(s1,i2), (s2,i1)}`
pub fn ex_two_mi(inst: &Instance) -> Matching {
    by_ids(inst, &[("s1", "i2"), ("s2", "i1")])
}

/// `MS = {(s1,i1), (s4,i1), (s2,i2), (s3,i2)}`
pub fn ex_sib_ms(inst: &Instance) -> Matching {
    by_ids(inst, &[("s1", "i1"), ("s4", "i1"), ("s2", "i2"), ("s3", "i2")])
}

/// `MI = {(s2,i1), (s4,i1), (s1,i2), (s3,i2)}`
pub fn ex_sib_mi(inst: &Instance) -> Matching {
    by_ids(inst, &[("s2", "i1"), ("s4", "i1"), ("s1", "i2"), ("s3", "i2")])
}
