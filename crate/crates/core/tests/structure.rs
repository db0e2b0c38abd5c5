//! Small hand-built markets pinning down which structural statements hold
//! exactly and which only in a weaker form.

mod common;

use matchopt::market::{CountingRule, Instance, RawInstance};
use matchopt::oracle::{enumerate_all_stable, Budget};
use matchopt::stable_sets::{enumerate_stable_sets, AgentSide};

use common::{best_or_worst, best_or_worst_of_union};

/// `i` holds two seats and ranks a > b > c. Students a and c want `i`
/// first, b wants `j` first; `j` ranks c > b.
fn swap_market() -> Instance {
    let raw = RawInstance::new(CountingRule::OneToAll)
        .student("a", &["i"], &[])
        .student("b", &["j", "i"], &[])
        .student("c", &["i", "j"], &[])
        .institution("i", 2, &["a", "b", "c"])
        .institution("j", 1, &["c", "b"]);
    Instance::validate(raw).unwrap()
}

#[test]
fn differences_are_ordered_against_each_other_not_the_union() {
    let inst = swap_market();
    let all = enumerate_all_stable(&inst, &Budget::default()).unwrap();
    assert_eq!(all.len(), 2);
    let (m, o) = (&all.matchings[0], &all.matchings[1]);
    assert!(best_or_worst(&inst, 0, m, o));
    assert!(best_or_worst(&inst, 0, o, m));
    // {a, b} against {a, c}: b is neither the best nor the worst of {a, b, c}.
    let against_union = best_or_worst_of_union(&inst, 0, m, o) && best_or_worst_of_union(&inst, 0, o, m);
    assert!(!against_union);
}

#[test]
fn distinct_stable_sets_can_share_a_top() {
    let inst = swap_market();
    let cat = enumerate_stable_sets(&inst, AgentSide::Institutions);
    let sets = &cat.of(0).sets;
    assert_eq!(sets.len(), 2);
    assert_eq!(sets[0].top(), sets[1].top());
    assert_ne!(sets[0].cutoff(), sets[1].cutoff());
    let rank = |s| inst.institution_rank(0, s).unwrap();
    assert!(rank(sets[1].cutoff().unwrap()) < rank(sets[0].cutoff().unwrap()));
}
