//! Dinic max-flow over exact scalars, and the minimum-weight closure
//! problem solved with it.

use std::collections::VecDeque;

use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct FlowNetwork<T> {
    adj: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<T>,
}

impl<T: Scalar> FlowNetwork<T> {
    pub fn new(nodes: usize) -> Self {
        FlowNetwork {
            adj: vec![Vec::new(); nodes],
            to: Vec::new(),
            cap: Vec::new(),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.adj.len()
    }

    pub fn add_arc(&mut self, u: usize, v: usize, cap: T) {
        self.adj[u].push(self.to.len());
        self.to.push(v);
        self.cap.push(cap);
        self.adj[v].push(self.to.len());
        self.to.push(u);
        self.cap.push(T::zero());
    }

    fn levels(&self, s: usize) -> Vec<usize> {
        let mut level = vec![usize::MAX; self.adj.len()];
        level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &a in &self.adj[u] {
                let v = self.to[a];
                if level[v] == usize::MAX && self.cap[a].is_positive() {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        level
    }

    fn augment(&mut self, u: usize, t: usize, limit: T, level: &[usize], next: &mut [usize]) -> T {
        if u == t {
            return limit;
        }
        while next[u] < self.adj[u].len() {
            let a = self.adj[u][next[u]];
            let v = self.to[a];
            if self.cap[a].is_positive() && level[v] == level[u] + 1 {
                let bottleneck = if self.cap[a] < limit {
                    self.cap[a].clone()
                } else {
                    limit.clone()
                };
                let pushed = self.augment(v, t, bottleneck, level, next);
                if pushed.is_positive() {
                    self.cap[a] = self.cap[a].clone() - pushed.clone();
                    self.cap[a ^ 1] = self.cap[a ^ 1].clone() + pushed.clone();
                    return pushed;
                }
            }
            next[u] += 1;
        }
        T::zero()
    }

    /// Pushes a maximum flow from `s` to `t` and returns its value.
    /// Terminates for any exact capacities: Dinic's phase count does not
    /// depend on their magnitude.
    pub fn max_flow(&mut self, s: usize, t: usize) -> T {
        let unbounded: T = self
            .adj[s]
            .iter()
            .map(|&a| self.cap[a].clone())
            .fold(T::zero(), |acc, c| acc + c)
            + T::one();
        let mut total = T::zero();
        loop {
            let level = self.levels(s);
            if level[t] == usize::MAX {
                return total;
            }
            let mut next = vec![0usize; self.adj.len()];
            loop {
                let pushed = self.augment(s, t, unbounded.clone(), &level, &mut next);
                if !pushed.is_positive() {
                    break;
                }
                total = total + pushed;
            }
        }
    }

    /// Nodes reachable from `s` in the residual network.
    pub fn residual_reachable(&self, s: usize) -> Vec<bool> {
        let level = self.levels(s);
        level.iter().map(|&l| l != usize::MAX).collect()
    }
}

/// Result of a minimum-weight closure computation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Closure<T> {
    /// Membership per item.
    pub chosen: Vec<bool>,
    /// Sum of the chosen weights.
    pub weight: T,
    /// Value of the minimum cut.
    pub cut_value: T,
}

/// Finds a set of items closed under `requires` (choosing `k` forces every
/// item in `requires[k]`) with minimum total weight. Among minimum sets the
/// smallest one is returned: the source side of the residual network after
/// a maximum flow.
pub fn min_weight_closure<T: Scalar>(weights: &[T], requires: &[Vec<usize>]) -> Closure<T> {
    let n = weights.len();
    let source = n;
    let sink = n + 1;
    let infinite = weights
        .iter()
        .fold(T::one(), |acc, w| acc + w.abs());
    let mut net = FlowNetwork::new(n + 2);
    let mut gain = T::zero();
    for (k, w) in weights.iter().enumerate() {
        if w.is_negative() {
            net.add_arc(source, k, -w.clone());
            gain = gain + (-w.clone());
        } else if w.is_positive() {
            net.add_arc(k, sink, w.clone());
        }
        for &p in &requires[k] {
            net.add_arc(k, p, infinite.clone());
        }
    }
    let cut_value = net.max_flow(source, sink);
    let reach = net.residual_reachable(source);
    let chosen: Vec<bool> = (0..n).map(|k| reach[k]).collect();
    let weight = weights
        .iter()
        .zip(&chosen)
        .filter(|(_, &c)| c)
        .fold(T::zero(), |acc, (w, _)| acc + w.clone());
    debug_assert_eq!(weight, cut_value.clone() - gain, "closure weight equals cut minus gain");
    Closure {
        chosen,
        weight,
        cut_value,
    }
}
