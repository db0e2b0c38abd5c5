//! Institutional set objectives `g_i(S)` and the transforms applied to
//! them (thresholding, lexicographic tie-breaking, weighted sums).
//!
//! Lower values are better for every objective here.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_rational::BigRational;

use crate::market::{Instance, InstitutionIdx, StudentIdx};
use crate::scalar::{denominator_lcm, from_usize, Scalar};
use crate::stable_sets::StableSetCatalog;

/// A set function evaluated per institution.
///
/// `students` is the set assigned to `institution`; order is irrelevant.
pub trait Objective<T: Scalar>: Send + Sync {
    fn name(&self) -> String;
    fn eval(&self, inst: &Instance, institution: InstitutionIdx, students: &[StudentIdx]) -> T;
}

impl<T: Scalar, O: Objective<T> + ?Sized> Objective<T> for &O {
    fn name(&self) -> String {
        (**self).name()
    }
    fn eval(&self, inst: &Instance, i: InstitutionIdx, s: &[StudentIdx]) -> T {
        (**self).eval(inst, i, s)
    }
}

impl<T: Scalar, O: Objective<T> + ?Sized> Objective<T> for Box<O> {
    fn name(&self) -> String {
        (**self).name()
    }
    fn eval(&self, inst: &Instance, i: InstitutionIdx, s: &[StudentIdx]) -> T {
        (**self).eval(inst, i, s)
    }
}

/// Per-category member counts where every membership counts.
fn membership_counts(inst: &Instance, students: &[StudentIdx]) -> Vec<usize> {
    let mut eta = vec![0usize; inst.num_categories()];
    for &s in students {
        for &c in inst.categories_of(s) {
            eta[c] += 1;
        }
    }
    eta
}

fn bound_violation(lower: u32, upper: Option<u32>, count: usize) -> usize {
    (lower as usize).saturating_sub(count) + upper.map_or(0, |u| count.saturating_sub(u as usize))
}

/// Total bound violation at `i` when each student counts toward every
/// category she belongs to.
pub fn eval_one_to_all<T: Scalar>(inst: &Instance, i: InstitutionIdx, students: &[StudentIdx]) -> T {
    let eta = membership_counts(inst, students);
    let total: usize = inst
        .bounds(i)
        .iter()
        .map(|b| bound_violation(b.lower, b.upper, eta[b.category]))
        .sum();
    from_usize(total)
}

/// Largest single bound violation at `i` under one-to-all counting.
pub fn eval_one_to_all_max<T: Scalar>(inst: &Instance, i: InstitutionIdx, students: &[StudentIdx]) -> T {
    let eta = membership_counts(inst, students);
    let worst = inst
        .bounds(i)
        .iter()
        .map(|b| {
            let lo = (b.lower as usize).saturating_sub(eta[b.category]);
            let hi = b.upper.map_or(0, |u| eta[b.category].saturating_sub(u as usize));
            lo.max(hi)
        })
        .max()
        .unwrap_or(0);
    from_usize(worst)
}

/// Which side of a category's quota a slot class stands for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlotKind {
    /// Seats up to the lower bound, weight 2.
    Lower(usize),
    /// Seats between lower and upper bound, weight 1.
    Upper(usize),
    /// Everything else, weight 0.
    Slack,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SlotClass {
    pub kind: SlotKind,
    pub capacity: usize,
    pub weight: i64,
}

/// Auxiliary bipartite graph for one-to-one counting: students on the left,
/// capacitated slot classes on the right. A maximum-weight complete
/// matching of the students equals `|S| + Σℓ − g(S)`.
#[derive(Clone, Debug)]
pub struct GadgetGraph {
    /// The left side: students with at least one category.
    pub students: Vec<StudentIdx>,
    pub slots: Vec<SlotClass>,
    /// `(position in students, slot class)`
    pub edges: Vec<(usize, usize)>,
    pub lower_sum: usize,
}

impl GadgetGraph {
    /// Builds the graph for `i` and `students`. Students with no category
    /// are left out: they cannot be typed, and count toward nothing.
    pub fn build(inst: &Instance, i: InstitutionIdx, students: &[StudentIdx]) -> GadgetGraph {
        let left: Vec<StudentIdx> = students
            .iter()
            .copied()
            .filter(|&s| !inst.categories_of(s).is_empty())
            .collect();
        let n = left.len();
        let mut slots = Vec::new();
        // category -> (lower slot, upper slot)
        let mut class_of: HashMap<usize, (Option<usize>, usize)> = HashMap::new();
        let mut lower_sum = 0;
        for b in inst.bounds(i) {
            lower_sum += b.lower as usize;
            let lower_slot = (b.lower > 0).then(|| {
                slots.push(SlotClass {
                    kind: SlotKind::Lower(b.category),
                    capacity: b.lower as usize,
                    weight: 2,
                });
                slots.len() - 1
            });
            let span = b.upper.map_or(n, |u| ((u - b.lower) as usize).min(n));
            slots.push(SlotClass {
                kind: SlotKind::Upper(b.category),
                capacity: span,
                weight: 1,
            });
            class_of.insert(b.category, (lower_slot, slots.len() - 1));
        }
        // Categories without a declared bound: no lower, no upper.
        for &s in &left {
            for &c in inst.categories_of(s) {
                class_of.entry(c).or_insert_with(|| {
                    slots.push(SlotClass {
                        kind: SlotKind::Upper(c),
                        capacity: n,
                        weight: 1,
                    });
                    (None, slots.len() - 1)
                });
            }
        }
        slots.push(SlotClass {
            kind: SlotKind::Slack,
            capacity: inst.capacity(i).max(n),
            weight: 0,
        });
        let slack = slots.len() - 1;

        let mut edges = Vec::new();
        for (pos, &s) in left.iter().enumerate() {
            for &c in inst.categories_of(s) {
                let (lo, up) = class_of[&c];
                if let Some(lo) = lo {
                    edges.push((pos, lo));
                }
                edges.push((pos, up));
            }
            edges.push((pos, slack));
        }
        GadgetGraph {
            students: left,
            slots,
            edges,
            lower_sum,
        }
    }

    /// Weight of a maximum-weight matching covering every student.
    pub fn max_weight(&self) -> i64 {
        let n = self.students.len();
        let m = self.slots.len();
        let source = n + m;
        let sink = source + 1;
        let mut net = CostFlow::new(sink + 1);
        for s in 0..n {
            net.add_arc(source, s, 1, 0);
        }
        for &(s, k) in &self.edges {
            net.add_arc(s, n + k, 1, -self.slots[k].weight);
        }
        for (k, slot) in self.slots.iter().enumerate() {
            net.add_arc(n + k, sink, slot.capacity as i64, 0);
        }
        let (flow, cost) = net.min_cost_flow(source, sink, n as i64);
        debug_assert_eq!(flow, n as i64, "slack admits every student");
        -cost
    }
}

/// Successive-shortest-path min-cost flow on small integer networks.
struct CostFlow {
    head: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<i64>,
    cost: Vec<i64>,
}

impl CostFlow {
    fn new(nodes: usize) -> Self {
        CostFlow {
            head: vec![Vec::new(); nodes],
            to: Vec::new(),
            cap: Vec::new(),
            cost: Vec::new(),
        }
    }

    fn add_arc(&mut self, u: usize, v: usize, cap: i64, cost: i64) {
        self.head[u].push(self.to.len());
        self.to.push(v);
        self.cap.push(cap);
        self.cost.push(cost);
        self.head[v].push(self.to.len());
        self.to.push(u);
        self.cap.push(0);
        self.cost.push(-cost);
    }

    fn min_cost_flow(&mut self, s: usize, t: usize, limit: i64) -> (i64, i64) {
        let n = self.head.len();
        let (mut flow, mut total) = (0, 0);
        while flow < limit {
            // Bellman-Ford: residual costs may be negative.
            let mut dist = vec![i64::MAX; n];
            let mut via = vec![usize::MAX; n];
            dist[s] = 0;
            let mut changed = true;
            while changed {
                changed = false;
                for u in 0..n {
                    if dist[u] == i64::MAX {
                        continue;
                    }
                    for &a in &self.head[u] {
                        let v = self.to[a];
                        if self.cap[a] > 0 && dist[u] + self.cost[a] < dist[v] {
                            dist[v] = dist[u] + self.cost[a];
                            via[v] = a;
                            changed = true;
                        }
                    }
                }
            }
            if dist[t] == i64::MAX {
                break;
            }
            let mut push = limit - flow;
            let mut v = t;
            while v != s {
                let a = via[v];
                push = push.min(self.cap[a]);
                v = self.to[a ^ 1];
            }
            let mut v = t;
            while v != s {
                let a = via[v];
                self.cap[a] -= push;
                self.cap[a ^ 1] += push;
                v = self.to[a ^ 1];
            }
            flow += push;
            total += push * dist[t];
        }
        (flow, total)
    }
}

/// Minimum total bound violation at `i` over all ways of typing each
/// student as exactly one of her categories.
pub fn eval_one_to_one<T: Scalar>(inst: &Instance, i: InstitutionIdx, students: &[StudentIdx]) -> T {
    let h = GadgetGraph::build(inst, i, students);
    let value = (h.students.len() + h.lower_sum) as i64 - h.max_weight();
    T::from_i64(value)
}

/// Minus the number of families placed entirely at `i`.
pub fn eval_siblings<T: Scalar>(inst: &Instance, _i: InstitutionIdx, students: &[StudentIdx]) -> T {
    let together = inst
        .families()
        .iter()
        .filter(|f| f.members.iter().all(|m| students.contains(m)))
        .count();
    -from_usize::<T>(together)
}

#[derive(Clone, Copy, Debug, Default)]
pub struct OneToAll;

impl<T: Scalar> Objective<T> for OneToAll {
    fn name(&self) -> String {
        "one2all".into()
    }
    fn eval(&self, inst: &Instance, i: InstitutionIdx, s: &[StudentIdx]) -> T {
        eval_one_to_all(inst, i, s)
    }
}

/// Per-institution maximum violation; the egalitarian counterpart of
/// [`OneToAll`].
#[derive(Clone, Copy, Debug, Default)]
pub struct OneToAllMax;

impl<T: Scalar> Objective<T> for OneToAllMax {
    fn name(&self) -> String {
        "one2all-max".into()
    }
    fn eval(&self, inst: &Instance, i: InstitutionIdx, s: &[StudentIdx]) -> T {
        eval_one_to_all_max(inst, i, s)
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct OneToOne;

impl<T: Scalar> Objective<T> for OneToOne {
    fn name(&self) -> String {
        "one2one".into()
    }
    fn eval(&self, inst: &Instance, i: InstitutionIdx, s: &[StudentIdx]) -> T {
        eval_one_to_one(inst, i, s)
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Siblings;

impl<T: Scalar> Objective<T> for Siblings {
    fn name(&self) -> String {
        "siblings".into()
    }
    fn eval(&self, inst: &Instance, i: InstitutionIdx, s: &[StudentIdx]) -> T {
        eval_siblings(inst, i, s)
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Zero;

impl<T: Scalar> Objective<T> for Zero {
    fn name(&self) -> String {
        "zero".into()
    }
    fn eval(&self, _: &Instance, _: InstitutionIdx, _: &[StudentIdx]) -> T {
        T::zero()
    }
}

/// Wraps a closure as an objective.
pub struct FnObjective<F> {
    name: String,
    f: F,
}

impl<F> FnObjective<F> {
    pub fn new(name: impl Into<String>, f: F) -> Self {
        FnObjective { name: name.into(), f }
    }
}

impl<T, F> Objective<T> for FnObjective<F>
where
    T: Scalar,
    F: Fn(&Instance, InstitutionIdx, &[StudentIdx]) -> T + Send + Sync,
{
    fn name(&self) -> String {
        self.name.clone()
    }
    fn eval(&self, inst: &Instance, i: InstitutionIdx, s: &[StudentIdx]) -> T {
        (self.f)(inst, i, s)
    }
}

/// `Σ coefficient · objective`
pub struct WeightedSum<T: Scalar> {
    pub terms: Vec<(T, Box<dyn Objective<T>>)>,
}

impl<T: Scalar> Objective<T> for WeightedSum<T> {
    fn name(&self) -> String {
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(w, g)| format!("{}={}", g.name(), w))
            .collect();
        format!("mix:{}", parts.join(","))
    }
    fn eval(&self, inst: &Instance, i: InstitutionIdx, s: &[StudentIdx]) -> T {
        self.terms
            .iter()
            .fold(T::zero(), |acc, (w, g)| acc + w.clone() * g.eval(inst, i, s))
    }
}

/// Binary threshold: `0` when `g(S) ≤ threshold`, else `1`.
pub struct Threshold<'a, T: Scalar> {
    pub inner: &'a dyn Objective<T>,
    pub threshold: T,
}

pub fn threshold_objective<T: Scalar>(g: &dyn Objective<T>, threshold: T) -> Threshold<'_, T> {
    Threshold { inner: g, threshold }
}

impl<T: Scalar> Objective<T> for Threshold<'_, T> {
    fn name(&self) -> String {
        format!("{}<={}", self.inner.name(), self.threshold)
    }
    fn eval(&self, inst: &Instance, i: InstitutionIdx, s: &[StudentIdx]) -> T {
        if self.inner.eval(inst, i, s) <= self.threshold {
            T::zero()
        } else {
            T::one()
        }
    }
}

/// `g` scaled so that it always dominates, plus an additive edge cost `z`.
pub struct Lexicographic<'a, T: Scalar> {
    pub inner: &'a dyn Objective<T>,
    /// Multiplier on `g`; zero when `g` is constant on every institution's
    /// catalog and has been dropped.
    pub scale: T,
    pub costs: HashMap<(StudentIdx, InstitutionIdx), T>,
}

impl<T: Scalar> Lexicographic<'_, T> {
    pub fn edge_cost(&self, s: StudentIdx, i: InstitutionIdx) -> T {
        self.costs.get(&(s, i)).cloned().unwrap_or_else(T::zero)
    }
}

impl<T: Scalar> Objective<T> for Lexicographic<'_, T> {
    fn name(&self) -> String {
        format!("lex({})", self.inner.name())
    }
    fn eval(&self, inst: &Instance, i: InstitutionIdx, s: &[StudentIdx]) -> T {
        let primary = if self.scale.is_zero() {
            T::zero()
        } else {
            self.inner.eval(inst, i, s) * self.scale.clone()
        };
        s.iter()
            .fold(primary, |acc, &st| acc + self.edge_cost(st, i))
    }
}

/// Combines `g` with edge costs `z` so that `g` is lexicographically more
/// important: `ĝ(S) = g(S)·D·max|z|·(|E|+1) + Σ_{e∈S} z(e)`, where `1/D`
/// is the granularity of the catalog values of `g` (the lcm of their
/// denominators). Any two matchings whose totals of `g` differ then differ
/// by at least `max|z|·(|E|+1)` in the scaled term, more than any `z`
/// total can make up.
///
/// When `g` takes a single value on every institution's catalog there is
/// no gap to scale by, and `ĝ` is the `z` term alone. When `z` is zero
/// everywhere `ĝ = g`.
pub fn lexicographic_combine<'a, T: Scalar>(
    inst: &Instance,
    g: &'a dyn Objective<T>,
    costs: HashMap<(StudentIdx, InstitutionIdx), T>,
    catalog: &StableSetCatalog,
) -> Lexicographic<'a, T> {
    let mut values = Vec::new();
    let mut has_gap = false;
    for agent in &catalog.agents {
        let vals: Vec<T> = agent
            .sets
            .iter()
            .map(|set| g.eval(inst, agent.agent, &set.partners))
            .collect();
        if vals.iter().any(|v| *v != vals[0]) {
            has_gap = true;
        }
        values.extend(vals);
    }
    let max_cost = inst
        .edges()
        .map(|(s, i)| costs.get(&(s, i)).map(|c| c.abs()).unwrap_or_else(T::zero))
        .max()
        .unwrap_or_else(T::zero);
    let scale = if !has_gap {
        T::zero()
    } else if max_cost.is_zero() {
        T::one()
    } else {
        let lcm: BigInt = denominator_lcm(values.iter());
        let lcm = T::from_rational(&BigRational::from_integer(lcm))
            .expect("an integer is representable in every scalar type");
        lcm * max_cost * from_usize::<T>(inst.num_edges() + 1)
    };
    Lexicographic {
        inner: g,
        scale,
        costs,
    }
}

/// Student tie-breaking costs: `z(s, i)` is the position of `i` in `s`'s
/// list.
pub fn student_rank_costs<T: Scalar>(inst: &Instance) -> HashMap<(StudentIdx, InstitutionIdx), T> {
    inst.edges()
        .map(|(s, i)| ((s, i), from_usize(inst.student_rank(s, i).expect("edge"))))
        .collect()
}

/// Looks up a built-in objective by its CLI name.
pub fn builtin<T: Scalar>(name: &str) -> Option<Box<dyn Objective<T>>> {
    Some(match name {
        "one2all" => Box::new(OneToAll),
        "one2all-max" => Box::new(OneToAllMax),
        "one2one" => Box::new(OneToOne),
        "siblings" => Box::new(Siblings),
        "zero" => Box::new(Zero),
        _ => return None,
    })
}

/// Evaluates `g` on every institution of a matching.
pub fn per_institution<T: Scalar>(
    inst: &Instance,
    g: &dyn Objective<T>,
    sets: &[Vec<StudentIdx>],
) -> Vec<T> {
    sets.iter()
        .enumerate()
        .map(|(i, set)| g.eval(inst, i, set))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::market::{CountingRule, RawInstance};
    use crate::stable_sets::{enumerate_stable_sets, AgentSide};
    use num_rational::Rational64;

    fn pair_instance(rule: CountingRule) -> Instance {
        let raw = RawInstance::new(rule)
            .student("sa", &["i"], &["A", "B"])
            .student("sb", &["i"], &["A"])
            .institution("i", 2, &["sa", "sb"])
            .bound("i", "A", 1, Some(1))
            .bound("i", "B", 1, Some(1));
        Instance::validate(raw).unwrap()
    }

    #[test]
    fn one_to_all_values() {
        let inst = fixtures::ex_two();
        assert_eq!(eval_one_to_all::<i64>(&inst, 0, &[0]), 1);
        assert_eq!(eval_one_to_all::<i64>(&inst, 0, &[1]), 0);
        let inst = pair_instance(CountingRule::OneToAll);
        assert_eq!(eval_one_to_all::<i64>(&inst, 0, &[0, 1]), 1);
    }

    #[test]
    fn one_to_one_values() {
        let inst = pair_instance(CountingRule::OneToOne);
        assert_eq!(eval_one_to_one::<i64>(&inst, 0, &[0, 1]), 0);
        assert_eq!(eval_one_to_one::<i64>(&inst, 0, &[1]), 1);
        let inst = fixtures::ex_sib();
        assert_eq!(eval_one_to_one::<i64>(&inst, 0, &[]), 0);
    }

    #[test]
    fn gadget_identity_on_the_pair() {
        let inst = pair_instance(CountingRule::OneToOne);
        let h = GadgetGraph::build(&inst, 0, &[0, 1]);
        assert!(h.slots.iter().all(|s| (0..=2).contains(&s.weight)));
        assert_eq!(h.max_weight(), 4);
    }

    #[test]
    fn sibling_values() {
        let inst = fixtures::ex_sib();
        assert_eq!(eval_siblings::<i64>(&inst, 1, &[0, 2]), -1);
        assert_eq!(eval_siblings::<i64>(&inst, 1, &[1, 2]), 0);
        let inst = fixtures::ex_two();
        assert_eq!(eval_siblings::<i64>(&inst, 0, &[0]), 0);
    }

    #[test]
    fn threshold_values() {
        let inst = fixtures::ex_two();
        let one = FnObjective::new("one", |_: &Instance, _, _: &[usize]| 1i64);
        let minus = FnObjective::new("minus", |_: &Instance, _, _: &[usize]| -1i64);
        assert_eq!(threshold_objective(&one, 0).eval(&inst, 0, &[]), 1);
        assert_eq!(threshold_objective(&one, 1).eval(&inst, 0, &[]), 0);
        assert_eq!(threshold_objective(&minus, -1).eval(&inst, 0, &[]), 0);
    }

    #[test]
    fn lexicographic_scale_on_ex_two() {
        let inst = fixtures::ex_two();
        let cat = enumerate_stable_sets(&inst, AgentSide::Institutions);
        let costs: HashMap<_, _> = inst.edges().map(|e| (e, 1i64)).collect();
        let lex = lexicographic_combine(&inst, &OneToAll, costs, &cat);
        // g ∈ {0, 1} at i1, max|z| = 1, |E| = 4.
        assert_eq!(lex.scale, 5);
        assert_eq!(lex.eval(&inst, 0, &[0]), 5 + 1);
        assert_eq!(lex.eval(&inst, 0, &[1]), 1);
    }

    #[test]
    fn lexicographic_degenerate_cases() {
        let inst = fixtures::ex_two();
        let cat = enumerate_stable_sets(&inst, AgentSide::Institutions);
        let costs = student_rank_costs::<i64>(&inst);
        let lex = lexicographic_combine(&inst, &Zero, costs, &cat);
        assert_eq!(lex.scale, 0);
        assert_eq!(lex.eval(&inst, 1, &[0]), 1);
        let lex = lexicographic_combine(&inst, &OneToAll, HashMap::<_, i64>::new(), &cat);
        assert_eq!(lex.scale, 1);
        assert_eq!(lex.eval(&inst, 0, &[0]), 1);
    }

    #[test]
    fn lexicographic_uses_value_granularity() {
        let inst = fixtures::ex_two();
        let cat = enumerate_stable_sets(&inst, AgentSide::Institutions);
        let half = FnObjective::new("half", |_: &Instance, _, s: &[usize]| {
            Rational64::new(s.first().map_or(0, |&x| x as i64), 2)
        });
        let costs: HashMap<_, _> = inst.edges().map(|e| (e, Rational64::from_integer(1))).collect();
        let lex = lexicographic_combine(&inst, &half, costs, &cat);
        assert_eq!(lex.scale, Rational64::from_integer(2 * 5));
    }

    #[test]
    fn weighted_sum_and_names() {
        let inst = fixtures::ex_sib();
        let mix = WeightedSum::<i64> {
            terms: vec![(2, builtin("siblings").unwrap()), (1, builtin("one2all").unwrap())],
        };
        assert_eq!(mix.eval(&inst, 1, &[0, 2]), -2);
        assert_eq!(mix.name(), "mix:siblings=2,one2all=1");
        assert!(builtin::<i64>("nope").is_none());
    }
}
