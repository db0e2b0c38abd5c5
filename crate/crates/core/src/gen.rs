//! Seeded random markets.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::{BoundEntry, Bounds, InstanceFile, InstitutionEntry, StudentEntry};
use crate::market::CountingRule;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenParams {
    pub n_students: usize,
    pub n_institutions: usize,
    /// Capacities are drawn uniformly from `1..=q_max`.
    pub q_max: u32,
    pub n_categories: usize,
    /// Each student draws between 0 and this many distinct categories.
    pub categories_per_student: usize,
    /// Probability that an institution declares a bound on a category.
    pub bound_density: f64,
    /// Probability that a student forms a family with the next one.
    pub family_rate: f64,
    /// Length of every student's list, capped by the number of
    /// institutions.
    pub list_length: usize,
    /// 0 gives independent institution priorities, 1 a single global
    /// ranking.
    pub correlation: f64,
    pub counting_rule: CountingRule,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            n_students: 6,
            n_institutions: 3,
            q_max: 2,
            n_categories: 2,
            categories_per_student: 1,
            bound_density: 0.5,
            family_rate: 0.2,
            list_length: 3,
            correlation: 0.5,
            counting_rule: CountingRule::OneToAll,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum GenError {
    #[error("list_length must be positive")]
    ZeroListLength,
    #[error("q_max must be positive")]
    ZeroCapacity,
    #[error("{0} must lie in [0, 1]")]
    OutOfRange(&'static str),
}

impl GenParams {
    pub fn check(&self) -> Result<(), GenError> {
        if self.list_length == 0 {
            return Err(GenError::ZeroListLength);
        }
        if self.q_max == 0 {
            return Err(GenError::ZeroCapacity);
        }
        for (name, v) in [
            ("bound_density", self.bound_density),
            ("family_rate", self.family_rate),
            ("correlation", self.correlation),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(GenError::OutOfRange(name));
            }
        }
        Ok(())
    }
}

pub fn generate_random(params: &GenParams, seed: u64) -> Result<InstanceFile, GenError> {
    params.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = params.n_students;
    let m = params.n_institutions;
    let sid = |s: usize| format!("s{}", s + 1);
    let iid = |i: usize| format!("i{}", i + 1);
    let cid = |c: usize| format!("c{}", c + 1);

    let global: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
    let capacity: Vec<u32> = (0..m).map(|_| rng.gen_range(1..=params.q_max)).collect();

    let mut lists: Vec<Vec<usize>> = Vec::with_capacity(n);
    let mut applicants: Vec<Vec<usize>> = vec![Vec::new(); m];
    let mut all: Vec<usize> = (0..m).collect();
    for s in 0..n {
        let (picked, _) = all.partial_shuffle(&mut rng, params.list_length.min(m));
        let list: Vec<usize> = picked.to_vec();
        for &i in &list {
            applicants[i].push(s);
        }
        lists.push(list);
    }
    // Every institution needs at least one applicant.
    if n > 0 {
        for i in 0..m {
            if applicants[i].is_empty() {
                let s = rng.gen_range(0..n);
                lists[s].push(i);
                applicants[i].push(s);
            }
        }
    }

    let mut institutions = Vec::with_capacity(m);
    for i in 0..m {
        let mut keyed: Vec<(f64, usize)> = applicants[i]
            .iter()
            .map(|&s| {
                let own: f64 = rng.gen();
                (params.correlation * global[s] + (1.0 - params.correlation) * own, s)
            })
            .collect();
        keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut bounds = Vec::new();
        for c in 0..params.n_categories {
            if rng.gen_bool(params.bound_density) {
                let cap = capacity[i];
                let lower = rng.gen_range(0..=cap / 2);
                let upper = if rng.gen_bool(0.25) {
                    None
                } else {
                    Some(rng.gen_range(lower..=cap))
                };
                bounds.push((cid(c), BoundEntry { lower, upper }));
            }
        }
        institutions.push(InstitutionEntry {
            id: iid(i),
            capacity: capacity[i],
            prefs: keyed.into_iter().map(|(_, s)| sid(s)).collect(),
            bounds: Bounds(bounds),
        });
    }

    let mut cats: Vec<usize> = (0..params.n_categories).collect();
    let mut students: Vec<StudentEntry> = (0..n)
        .map(|s| {
            let k = rng.gen_range(0..=params.categories_per_student.min(params.n_categories));
            cats.shuffle(&mut rng);
            let mut mine = cats[..k].to_vec();
            mine.sort_unstable();
            StudentEntry {
                id: sid(s),
                prefs: lists[s].iter().map(|&i| iid(i)).collect(),
                categories: mine.into_iter().map(cid).collect(),
                family: None,
            }
        })
        .collect();

    let mut families = 0;
    let mut s = 0;
    while s + 1 < n {
        if rng.gen_bool(params.family_rate) {
            families += 1;
            students[s].family = Some(format!("f{families}"));
            students[s + 1].family = Some(format!("f{families}"));
            s += 2;
        } else {
            s += 1;
        }
    }

    Ok(InstanceFile {
        students,
        institutions,
        counting_rule: params.counting_rule,
        edge_costs: Vec::new(),
        meta: Some(serde_json::json!({ "seed": seed })),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::print_instance;

    #[test]
    fn same_seed_same_bytes() {
        let p = GenParams::default();
        let a = generate_random(&p, 7).unwrap().to_json();
        let b = generate_random(&p, 7).unwrap().to_json();
        assert_eq!(a, b);
        assert_ne!(a, generate_random(&p, 8).unwrap().to_json());
    }

    #[test]
    fn output_is_valid_and_round_trips() {
        for seed in 0..50 {
            let p = GenParams {
                n_students: 8,
                n_institutions: 4,
                q_max: 3,
                n_categories: 3,
                categories_per_student: 2,
                ..GenParams::default()
            };
            let inst = generate_random(&p, seed).unwrap().to_instance().unwrap();
            let again = crate::io::parse_instance(&print_instance(&inst)).unwrap();
            assert_eq!(again, inst);
        }
    }

    #[test]
    fn full_correlation_gives_one_ranking() {
        let p = GenParams {
            n_students: 10,
            n_institutions: 4,
            correlation: 1.0,
            ..GenParams::default()
        };
        let inst = generate_random(&p, 3).unwrap().to_instance().unwrap();
        for a in 0..4 {
            for b in 0..4 {
                for s in 0..10 {
                    for t in 0..10 {
                        if s == t {
                            continue;
                        }
                        let both = [a, b].iter().all(|&i| inst.is_edge(s, i) && inst.is_edge(t, i));
                        if both {
                            assert_eq!(
                                inst.institution_prefers(a, s, t),
                                inst.institution_prefers(b, s, t)
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn tiny_instance_and_bad_params() {
        let p = GenParams {
            n_students: 2,
            n_institutions: 2,
            list_length: 2,
            ..GenParams::default()
        };
        let inst = generate_random(&p, 1).unwrap().to_instance().unwrap();
        assert!(crate::oracle::Budget::default().check(&inst).is_ok());
        let bad = GenParams {
            list_length: 0,
            ..GenParams::default()
        };
        assert_eq!(generate_random(&bad, 1), Err(GenError::ZeroListLength));
    }
}
