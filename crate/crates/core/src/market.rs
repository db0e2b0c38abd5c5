//! Market model: instances, matchings, validation, stability and the
//! meet/join lattice operations on stable matchings.
//!
//! Agents are addressed externally by opaque string ids and internally by
//! dense indices in instance order. An unmatched student is the absence of
//! an edge; rank comparisons treat "unmatched" as worse than every
//! acceptable partner.

use std::collections::{HashMap, HashSet};
use std::fmt;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type StudentIdx = usize;
pub type InstitutionIdx = usize;
pub type CategoryIdx = usize;

/// How a multi-category student counts toward category quotas.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountingRule {
    /// A student counts toward every category she belongs to.
    #[default]
    OneToAll,
    /// A student counts toward exactly one of her categories.
    OneToOne,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawStudent {
    pub id: String,
    pub prefs: Vec<String>,
    pub categories: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawBound {
    pub category: String,
    pub lower: u32,
    /// `None` is an absent upper bound.
    pub upper: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawInstitution {
    pub id: String,
    pub capacity: u32,
    pub prefs: Vec<String>,
    pub bounds: Vec<RawBound>,
}

/// An unvalidated market description, as read from a file or assembled by
/// hand. [`Instance::validate`] turns it into an [`Instance`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RawInstance {
    pub students: Vec<RawStudent>,
    pub institutions: Vec<RawInstitution>,
    pub families: Vec<(String, Vec<String>)>,
    pub edge_costs: Vec<(String, String, BigRational)>,
    pub counting_rule: CountingRule,
}

impl RawInstance {
    pub fn new(counting_rule: CountingRule) -> Self {
        RawInstance {
            counting_rule,
            ..Default::default()
        }
    }

    pub fn student(mut self, id: &str, prefs: &[&str], categories: &[&str]) -> Self {
        self.students.push(RawStudent {
            id: id.to_string(),
            prefs: prefs.iter().map(|s| s.to_string()).collect(),
            categories: categories.iter().map(|s| s.to_string()).collect(),
        });
        self
    }

    pub fn institution(mut self, id: &str, capacity: u32, prefs: &[&str]) -> Self {
        self.institutions.push(RawInstitution {
            id: id.to_string(),
            capacity,
            prefs: prefs.iter().map(|s| s.to_string()).collect(),
            bounds: Vec::new(),
        });
        self
    }

    /// Declares a `(lower, upper)` bound for `category` at `institution`.
    /// Panics if the institution has not been added yet.
    pub fn bound(mut self, institution: &str, category: &str, lower: u32, upper: Option<u32>) -> Self {
        let inst = self
            .institutions
            .iter_mut()
            .find(|i| i.id == institution)
            .expect("bound declared for an unknown institution");
        inst.bounds.push(RawBound {
            category: category.to_string(),
            lower,
            upper,
        });
        self
    }

    pub fn family(mut self, id: &str, members: &[&str]) -> Self {
        self.families
            .push((id.to_string(), members.iter().map(|s| s.to_string()).collect()));
        self
    }

    pub fn edge_cost(mut self, student: &str, institution: &str, cost: BigRational) -> Self {
        self.edge_costs
            .push((student.to_string(), institution.to_string(), cost));
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("duplicate student id {0:?}")]
    DuplicateStudent(String),
    #[error("duplicate institution id {0:?}")]
    DuplicateInstitution(String),
    #[error("student {student:?} lists unknown institution {institution:?}")]
    UnknownInstitution { student: String, institution: String },
    #[error("institution {institution:?} lists unknown student {student:?}")]
    UnknownStudent { institution: String, student: String },
    #[error("duplicate preference entry {entry:?} in the list of {agent:?}")]
    DuplicatePreference { agent: String, entry: String },
    #[error("asymmetric acceptability: {student:?} and {institution:?}")]
    AsymmetricAcceptability { student: String, institution: String },
    #[error("agent {0:?} has no acceptable partner")]
    NoAcceptablePartner(String),
    #[error("institution {0:?} has zero capacity")]
    ZeroCapacity(String),
    #[error("lower bound exceeds upper for category {category:?} at {institution:?} ({lower} > {upper})")]
    LowerExceedsUpper {
        institution: String,
        category: String,
        lower: u32,
        upper: u32,
    },
    #[error("category {category:?} bounded twice at {institution:?}")]
    DuplicateBound { institution: String, category: String },
    #[error("duplicate category {category:?} for student {student:?}")]
    DuplicateCategory { student: String, category: String },
    #[error("family {family:?} names unknown student {student:?}")]
    UnknownFamilyMember { family: String, student: String },
    #[error("families overlap: student {student:?} is in {first:?} and {second:?}")]
    OverlappingFamilies {
        student: String,
        first: String,
        second: String,
    },
    #[error("family {0:?} is empty")]
    EmptyFamily(String),
    #[error("duplicate family id {0:?}")]
    DuplicateFamily(String),
    #[error("edge cost on ({student:?}, {institution:?}) which is not an acceptable pair")]
    CostOnMissingEdge { student: String, institution: String },
    #[error("duplicate edge cost on ({student:?}, {institution:?})")]
    DuplicateCost { student: String, institution: String },
}

/// Every invariant violation found in a [`RawInstance`].
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub struct ValidationErrors(pub Vec<ValidationError>);

impl fmt::Display for ValidationErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, e) in self.0.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bound {
    pub category: CategoryIdx,
    pub lower: u32,
    pub upper: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Family {
    pub id: String,
    pub members: Vec<StudentIdx>,
}

/// A validated, immutable market.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    student_ids: Vec<String>,
    institution_ids: Vec<String>,
    category_ids: Vec<String>,
    capacity: Vec<usize>,
    student_prefs: Vec<Vec<InstitutionIdx>>,
    institution_prefs: Vec<Vec<StudentIdx>>,
    student_rank: Vec<HashMap<InstitutionIdx, usize>>,
    institution_rank: Vec<HashMap<StudentIdx, usize>>,
    student_categories: Vec<Vec<CategoryIdx>>,
    bounds: Vec<Vec<Bound>>,
    families: Vec<Family>,
    family_of: Vec<Option<usize>>,
    edge_costs: Vec<((StudentIdx, InstitutionIdx), BigRational)>,
    counting_rule: CountingRule,
}

impl Instance {
    /// Checks every invariant of `raw` and builds the internal indices.
    /// All violations are reported, not just the first.
    pub fn validate(raw: RawInstance) -> Result<Instance, ValidationErrors> {
        let mut errors = Vec::new();

        let mut student_index = HashMap::new();
        for (k, s) in raw.students.iter().enumerate() {
            if student_index.insert(s.id.clone(), k).is_some() {
                errors.push(ValidationError::DuplicateStudent(s.id.clone()));
            }
        }
        let mut inst_index = HashMap::new();
        for (k, i) in raw.institutions.iter().enumerate() {
            if inst_index.insert(i.id.clone(), k).is_some() {
                errors.push(ValidationError::DuplicateInstitution(i.id.clone()));
            }
            if i.capacity == 0 {
                errors.push(ValidationError::ZeroCapacity(i.id.clone()));
            }
        }

        let mut category_ids: Vec<String> = Vec::new();
        let mut category_index: HashMap<String, usize> = HashMap::new();
        let mut intern = |c: &str| -> usize {
            if let Some(&k) = category_index.get(c) {
                return k;
            }
            category_ids.push(c.to_string());
            category_index.insert(c.to_string(), category_ids.len() - 1);
            category_ids.len() - 1
        };

        let mut student_prefs = Vec::with_capacity(raw.students.len());
        let mut student_categories = Vec::with_capacity(raw.students.len());
        for s in &raw.students {
            let mut list = Vec::new();
            let mut seen = HashSet::new();
            for name in &s.prefs {
                match inst_index.get(name) {
                    None => errors.push(ValidationError::UnknownInstitution {
                        student: s.id.clone(),
                        institution: name.clone(),
                    }),
                    Some(&i) => {
                        if seen.insert(i) {
                            list.push(i);
                        } else {
                            errors.push(ValidationError::DuplicatePreference {
                                agent: s.id.clone(),
                                entry: name.clone(),
                            });
                        }
                    }
                }
            }
            if s.prefs.is_empty() {
                errors.push(ValidationError::NoAcceptablePartner(s.id.clone()));
            }
            student_prefs.push(list);

            let mut cats = Vec::new();
            for c in &s.categories {
                let k = intern(c);
                if cats.contains(&k) {
                    errors.push(ValidationError::DuplicateCategory {
                        student: s.id.clone(),
                        category: c.clone(),
                    });
                } else {
                    cats.push(k);
                }
            }
            cats.sort_unstable();
            student_categories.push(cats);
        }

        let mut institution_prefs = Vec::with_capacity(raw.institutions.len());
        let mut bounds = Vec::with_capacity(raw.institutions.len());
        for i in &raw.institutions {
            let mut list = Vec::new();
            let mut seen = HashSet::new();
            for name in &i.prefs {
                match student_index.get(name) {
                    None => errors.push(ValidationError::UnknownStudent {
                        institution: i.id.clone(),
                        student: name.clone(),
                    }),
                    Some(&s) => {
                        if seen.insert(s) {
                            list.push(s);
                        } else {
                            errors.push(ValidationError::DuplicatePreference {
                                agent: i.id.clone(),
                                entry: name.clone(),
                            });
                        }
                    }
                }
            }
            if i.prefs.is_empty() {
                errors.push(ValidationError::NoAcceptablePartner(i.id.clone()));
            }
            institution_prefs.push(list);

            let mut declared: Vec<Bound> = Vec::new();
            for b in &i.bounds {
                let c = intern(&b.category);
                if declared.iter().any(|d| d.category == c) {
                    errors.push(ValidationError::DuplicateBound {
                        institution: i.id.clone(),
                        category: b.category.clone(),
                    });
                    continue;
                }
                if let Some(u) = b.upper {
                    if b.lower > u {
                        errors.push(ValidationError::LowerExceedsUpper {
                            institution: i.id.clone(),
                            category: b.category.clone(),
                            lower: b.lower,
                            upper: u,
                        });
                    }
                }
                declared.push(Bound {
                    category: c,
                    lower: b.lower,
                    upper: b.upper,
                });
            }
            bounds.push(declared);
        }

        let student_rank: Vec<HashMap<_, _>> = student_prefs
            .iter()
            .map(|l| l.iter().enumerate().map(|(r, &i)| (i, r)).collect())
            .collect();
        let institution_rank: Vec<HashMap<_, _>> = institution_prefs
            .iter()
            .map(|l| l.iter().enumerate().map(|(r, &s)| (s, r)).collect())
            .collect();

        for (s, list) in student_prefs.iter().enumerate() {
            for &i in list {
                if !institution_rank[i].contains_key(&s) {
                    errors.push(ValidationError::AsymmetricAcceptability {
                        student: raw.students[s].id.clone(),
                        institution: raw.institutions[i].id.clone(),
                    });
                }
            }
        }
        for (i, list) in institution_prefs.iter().enumerate() {
            for &s in list {
                if !student_rank[s].contains_key(&i) {
                    errors.push(ValidationError::AsymmetricAcceptability {
                        student: raw.students[s].id.clone(),
                        institution: raw.institutions[i].id.clone(),
                    });
                }
            }
        }

        let mut family_of: Vec<Option<usize>> = vec![None; raw.students.len()];
        let mut families = Vec::new();
        let mut family_names = HashSet::new();
        for (name, members) in &raw.families {
            if !family_names.insert(name.clone()) {
                errors.push(ValidationError::DuplicateFamily(name.clone()));
            }
            if members.is_empty() {
                errors.push(ValidationError::EmptyFamily(name.clone()));
            }
            let f = families.len();
            let mut idx = Vec::new();
            for m in members {
                match student_index.get(m) {
                    None => errors.push(ValidationError::UnknownFamilyMember {
                        family: name.clone(),
                        student: m.clone(),
                    }),
                    Some(&s) => match family_of[s] {
                        Some(other) if other != f => {
                            errors.push(ValidationError::OverlappingFamilies {
                                student: m.clone(),
                                first: raw.families[other].0.clone(),
                                second: name.clone(),
                            })
                        }
                        Some(_) => {}
                        None => {
                            family_of[s] = Some(f);
                            idx.push(s);
                        }
                    },
                }
            }
            idx.sort_unstable();
            families.push(Family {
                id: name.clone(),
                members: idx,
            });
        }

        let mut edge_costs = Vec::new();
        let mut seen_cost = HashSet::new();
        for (s, i, cost) in &raw.edge_costs {
            let pair = (student_index.get(s), inst_index.get(i));
            let ok = match pair {
                (Some(&sk), Some(&ik)) => student_rank[sk].contains_key(&ik),
                _ => false,
            };
            if !ok {
                errors.push(ValidationError::CostOnMissingEdge {
                    student: s.clone(),
                    institution: i.clone(),
                });
                continue;
            }
            let key = (student_index[s], inst_index[i]);
            if !seen_cost.insert(key) {
                errors.push(ValidationError::DuplicateCost {
                    student: s.clone(),
                    institution: i.clone(),
                });
                continue;
            }
            edge_costs.push((key, cost.clone()));
        }

        if !errors.is_empty() {
            return Err(ValidationErrors(errors));
        }

        Ok(Instance {
            student_ids: raw.students.iter().map(|s| s.id.clone()).collect(),
            institution_ids: raw.institutions.iter().map(|i| i.id.clone()).collect(),
            category_ids,
            capacity: raw.institutions.iter().map(|i| i.capacity as usize).collect(),
            student_prefs,
            institution_prefs,
            student_rank,
            institution_rank,
            student_categories,
            bounds,
            families,
            family_of,
            edge_costs,
            counting_rule: raw.counting_rule,
        })
    }

    /// Inverse of [`Instance::validate`].
    pub fn to_raw(&self) -> RawInstance {
        RawInstance {
            students: (0..self.num_students())
                .map(|s| RawStudent {
                    id: self.student_ids[s].clone(),
                    prefs: self.student_prefs[s]
                        .iter()
                        .map(|&i| self.institution_ids[i].clone())
                        .collect(),
                    categories: self.student_categories[s]
                        .iter()
                        .map(|&c| self.category_ids[c].clone())
                        .collect(),
                })
                .collect(),
            institutions: (0..self.num_institutions())
                .map(|i| RawInstitution {
                    id: self.institution_ids[i].clone(),
                    capacity: self.capacity[i] as u32,
                    prefs: self.institution_prefs[i]
                        .iter()
                        .map(|&s| self.student_ids[s].clone())
                        .collect(),
                    bounds: self.bounds[i]
                        .iter()
                        .map(|b| RawBound {
                            category: self.category_ids[b.category].clone(),
                            lower: b.lower,
                            upper: b.upper,
                        })
                        .collect(),
                })
                .collect(),
            families: self
                .families
                .iter()
                .map(|f| {
                    (
                        f.id.clone(),
                        f.members.iter().map(|&s| self.student_ids[s].clone()).collect(),
                    )
                })
                .collect(),
            edge_costs: self
                .edge_costs
                .iter()
                .map(|((s, i), c)| {
                    (
                        self.student_ids[*s].clone(),
                        self.institution_ids[*i].clone(),
                        c.clone(),
                    )
                })
                .collect(),
            counting_rule: self.counting_rule,
        }
    }

    pub fn num_students(&self) -> usize {
        self.student_ids.len()
    }

    pub fn num_institutions(&self) -> usize {
        self.institution_ids.len()
    }

    pub fn num_categories(&self) -> usize {
        self.category_ids.len()
    }

    /// |E|, the number of acceptable pairs.
    pub fn num_edges(&self) -> usize {
        self.student_prefs.iter().map(Vec::len).sum()
    }

    pub fn student_id(&self, s: StudentIdx) -> &str {
        &self.student_ids[s]
    }

    pub fn institution_id(&self, i: InstitutionIdx) -> &str {
        &self.institution_ids[i]
    }

    pub fn category_id(&self, c: CategoryIdx) -> &str {
        &self.category_ids[c]
    }

    pub fn student_index(&self, id: &str) -> Option<StudentIdx> {
        self.student_ids.iter().position(|x| x == id)
    }

    pub fn institution_index(&self, id: &str) -> Option<InstitutionIdx> {
        self.institution_ids.iter().position(|x| x == id)
    }

    pub fn category_index(&self, id: &str) -> Option<CategoryIdx> {
        self.category_ids.iter().position(|x| x == id)
    }

    pub fn capacity(&self, i: InstitutionIdx) -> usize {
        self.capacity[i]
    }

    pub fn student_prefs(&self, s: StudentIdx) -> &[InstitutionIdx] {
        &self.student_prefs[s]
    }

    pub fn institution_prefs(&self, i: InstitutionIdx) -> &[StudentIdx] {
        &self.institution_prefs[i]
    }

    /// Position of `i` in `s`'s list (0 = best).
    pub fn student_rank(&self, s: StudentIdx, i: InstitutionIdx) -> Option<usize> {
        self.student_rank[s].get(&i).copied()
    }

    /// Position of `s` in `i`'s list (0 = best).
    pub fn institution_rank(&self, i: InstitutionIdx, s: StudentIdx) -> Option<usize> {
        self.institution_rank[i].get(&s).copied()
    }

    pub fn is_edge(&self, s: StudentIdx, i: InstitutionIdx) -> bool {
        self.student_rank[s].contains_key(&i)
    }

    /// Does `s` strictly prefer `a` to `b`? `None` is "unmatched".
    pub fn student_prefers(&self, s: StudentIdx, a: Option<InstitutionIdx>, b: Option<InstitutionIdx>) -> bool {
        let r = |x: Option<InstitutionIdx>| x.and_then(|i| self.student_rank(s, i)).unwrap_or(usize::MAX);
        r(a) < r(b)
    }

    /// Does `i` strictly prefer `a` to `b`?
    pub fn institution_prefers(&self, i: InstitutionIdx, a: StudentIdx, b: StudentIdx) -> bool {
        let r = |x| self.institution_rank(i, x).unwrap_or(usize::MAX);
        r(a) < r(b)
    }

    pub fn categories_of(&self, s: StudentIdx) -> &[CategoryIdx] {
        &self.student_categories[s]
    }

    pub fn has_category(&self, s: StudentIdx, c: CategoryIdx) -> bool {
        self.student_categories[s].binary_search(&c).is_ok()
    }

    /// Declared bounds of `i`, in declaration order.
    pub fn bounds(&self, i: InstitutionIdx) -> &[Bound] {
        &self.bounds[i]
    }

    pub fn families(&self) -> &[Family] {
        &self.families
    }

    pub fn family_of(&self, s: StudentIdx) -> Option<usize> {
        self.family_of[s]
    }

    pub fn edge_costs(&self) -> &[((StudentIdx, InstitutionIdx), BigRational)] {
        &self.edge_costs
    }

    pub fn counting_rule(&self) -> CountingRule {
        self.counting_rule
    }

    /// All acceptable pairs, grouped by student in preference order.
    pub fn edges(&self) -> impl Iterator<Item = (StudentIdx, InstitutionIdx)> + '_ {
        self.student_prefs
            .iter()
            .enumerate()
            .flat_map(|(s, l)| l.iter().map(move |&i| (s, i)))
    }

    /// Sorts `students` best-first by `i`'s priority.
    pub fn sort_by_priority(&self, i: InstitutionIdx, students: &mut [StudentIdx]) {
        students.sort_by_key(|&s| self.institution_rank(i, s).unwrap_or(usize::MAX));
    }
}

/// A set of student-institution edges, stored as each student's partner.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Matching {
    assignment: Vec<Option<InstitutionIdx>>,
}

impl Matching {
    pub fn empty(num_students: usize) -> Self {
        Matching {
            assignment: vec![None; num_students],
        }
    }

    pub fn from_assignment(assignment: Vec<Option<InstitutionIdx>>) -> Self {
        Matching { assignment }
    }

    /// Builds a matching from `(student, institution)` edges.
    pub fn from_edges(num_students: usize, edges: &[(StudentIdx, InstitutionIdx)]) -> Self {
        let mut m = Matching::empty(num_students);
        for &(s, i) in edges {
            m.assignment[s] = Some(i);
        }
        m
    }

    pub fn partner(&self, s: StudentIdx) -> Option<InstitutionIdx> {
        self.assignment[s]
    }

    pub fn set_partner(&mut self, s: StudentIdx, i: Option<InstitutionIdx>) {
        self.assignment[s] = i;
    }

    pub fn assignment(&self) -> &[Option<InstitutionIdx>] {
        &self.assignment
    }

    pub fn num_students(&self) -> usize {
        self.assignment.len()
    }

    /// Number of matched edges.
    pub fn size(&self) -> usize {
        self.assignment.iter().filter(|p| p.is_some()).count()
    }

    pub fn edges(&self) -> impl Iterator<Item = (StudentIdx, InstitutionIdx)> + '_ {
        self.assignment
            .iter()
            .enumerate()
            .filter_map(|(s, p)| p.map(|i| (s, i)))
    }

    pub fn contains(&self, s: StudentIdx, i: InstitutionIdx) -> bool {
        self.assignment[s] == Some(i)
    }

    /// Students assigned to `i`, best first by `i`'s priority.
    pub fn students_at(&self, inst: &Instance, i: InstitutionIdx) -> Vec<StudentIdx> {
        let mut v: Vec<_> = (0..self.assignment.len())
            .filter(|&s| self.assignment[s] == Some(i))
            .collect();
        inst.sort_by_priority(i, &mut v);
        v
    }

    /// `students_at` for every institution at once.
    pub fn institution_sets(&self, inst: &Instance) -> Vec<Vec<StudentIdx>> {
        let mut sets = vec![Vec::new(); inst.num_institutions()];
        for (s, i) in self.edges() {
            sets[i].push(s);
        }
        for (i, set) in sets.iter_mut().enumerate() {
            inst.sort_by_priority(i, set);
        }
        sets
    }

    /// Renders the matching as `(student id, institution id)` pairs.
    pub fn describe(&self, inst: &Instance) -> Vec<(String, Option<String>)> {
        self.assignment
            .iter()
            .enumerate()
            .map(|(s, p)| {
                (
                    inst.student_id(s).to_string(),
                    p.map(|i| inst.institution_id(i).to_string()),
                )
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum MatchingError {
    #[error("matching covers {found} students, instance has {expected}")]
    WrongSize { expected: usize, found: usize },
    #[error("matched pair (student {0}, institution {1}) is not acceptable")]
    NotAcceptable(StudentIdx, InstitutionIdx),
    #[error("institution {institution} holds {held} students, capacity {capacity}")]
    OverCapacity {
        institution: InstitutionIdx,
        held: usize,
        capacity: usize,
    },
    #[error("lattice operations need stable inputs; {0} blocking edge(s) found")]
    NotStable(usize),
}

/// The edges that block a matching. Empty iff the matching is stable.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BlockingReport {
    pub blocking_edges: Vec<(StudentIdx, InstitutionIdx)>,
}

impl BlockingReport {
    pub fn is_stable(&self) -> bool {
        self.blocking_edges.is_empty()
    }
}

/// Checks that `m` is a matching of `inst` at all (size, acceptability,
/// capacity).
pub fn check_matching(inst: &Instance, m: &Matching) -> Result<(), MatchingError> {
    if m.num_students() != inst.num_students() {
        return Err(MatchingError::WrongSize {
            expected: inst.num_students(),
            found: m.num_students(),
        });
    }
    let mut load = vec![0usize; inst.num_institutions()];
    for (s, i) in m.edges() {
        if i >= inst.num_institutions() || !inst.is_edge(s, i) {
            return Err(MatchingError::NotAcceptable(s, i));
        }
        load[i] += 1;
    }
    for (i, &held) in load.iter().enumerate() {
        if held > inst.capacity(i) {
            return Err(MatchingError::OverCapacity {
                institution: i,
                held,
                capacity: inst.capacity(i),
            });
        }
    }
    Ok(())
}

/// Lists every blocking edge of `m`: a non-matching edge `(s, i)` where `s`
/// prefers `i` to her partner and `i` has a free seat or holds someone it
/// ranks below `s`.
pub fn is_stable(inst: &Instance, m: &Matching) -> Result<BlockingReport, MatchingError> {
    check_matching(inst, m)?;
    let sets = m.institution_sets(inst);
    let mut report = BlockingReport::default();
    for s in 0..inst.num_students() {
        let own = m.partner(s);
        for &i in inst.student_prefs(s) {
            if Some(i) == own {
                break;
            }
            let set = &sets[i];
            let blocks = set.len() < inst.capacity(i)
                || set
                    .last()
                    .is_some_and(|&worst| inst.institution_prefers(i, s, worst));
            if blocks {
                report.blocking_edges.push((s, i));
            }
        }
    }
    Ok(report)
}

fn require_stable(inst: &Instance, m: &Matching) -> Result<(), MatchingError> {
    let report = is_stable(inst, m)?;
    if report.is_stable() {
        Ok(())
    } else {
        Err(MatchingError::NotStable(report.blocking_edges.len()))
    }
}

/// Every student takes the better of her two partners.
pub fn join(inst: &Instance, a: &Matching, b: &Matching) -> Result<Matching, MatchingError> {
    require_stable(inst, a)?;
    require_stable(inst, b)?;
    Ok(Matching::from_assignment(
        (0..inst.num_students())
            .map(|s| {
                if inst.student_prefers(s, b.partner(s), a.partner(s)) {
                    b.partner(s)
                } else {
                    a.partner(s)
                }
            })
            .collect(),
    ))
}

/// Every student takes the worse of her two partners.
pub fn meet(inst: &Instance, a: &Matching, b: &Matching) -> Result<Matching, MatchingError> {
    require_stable(inst, a)?;
    require_stable(inst, b)?;
    Ok(Matching::from_assignment(
        (0..inst.num_students())
            .map(|s| {
                if inst.student_prefers(s, a.partner(s), b.partner(s)) {
                    b.partner(s)
                } else {
                    a.partner(s)
                }
            })
            .collect(),
    ))
}

/// True when every student weakly prefers her partner in `a` to the one in `b`.
pub fn weakly_student_dominates(inst: &Instance, a: &Matching, b: &Matching) -> bool {
    (0..inst.num_students()).all(|s| !inst.student_prefers(s, b.partner(s), a.partner(s)))
}
