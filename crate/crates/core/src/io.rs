//! JSON instance and report files.
//!
//! Exact rationals travel as strings: `"3"`, `"-2/7"` or `"0.125"`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::market::{CountingRule, Instance, Matching, RawBound, RawInstance, RawInstitution, RawStudent, ValidationErrors};
use crate::solver::{EdgeWeights, SolveReport};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid instance: {0}")]
    Invalid(#[from] ValidationErrors),
    #[error("bad rational {0:?}")]
    Rational(String),
    #[error("unknown {kind} {id:?} in matching")]
    UnknownId { kind: &'static str, id: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("bad rational {0:?}")]
pub struct ParseRationalError(pub String);

/// Parses `"n"`, `"n/d"` or a decimal such as `"-1.25"` exactly.
pub fn parse_rational(text: &str) -> Result<BigRational, ParseRationalError> {
    let err = || ParseRationalError(text.to_string());
    let t = text.trim();
    if let Some((n, d)) = t.split_once('/') {
        let n = BigInt::from_str(n.trim()).map_err(|_| err())?;
        let d = BigInt::from_str(d.trim()).map_err(|_| err())?;
        if d.is_zero() {
            return Err(err());
        }
        return Ok(BigRational::new(n, d));
    }
    let (neg, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t.strip_prefix('+').unwrap_or(t)),
    };
    let (whole, frac) = body.split_once('.').unwrap_or((body, ""));
    if whole.is_empty() && frac.is_empty() {
        return Err(err());
    }
    if !whole.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(err());
    }
    let digits = format!("{whole}{frac}");
    let n = BigInt::from_str(if digits.is_empty() { "0" } else { &digits }).map_err(|_| err())?;
    let d = num_traits::pow(BigInt::from(10), frac.len());
    let r = BigRational::new(n, d);
    Ok(if neg { -r } else { r })
}

pub fn format_rational(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudentEntry {
    pub id: String,
    pub prefs: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundEntry {
    #[serde(default)]
    pub lower: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<u32>,
}

/// Category bounds keyed by category, in declaration order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Bounds(pub Vec<(String, BoundEntry)>);

impl Serialize for Bounds {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for Bounds {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct OrderedVisitor;
        impl<'de> Visitor<'de> for OrderedVisitor {
            type Value = Bounds;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map from category to {lower, upper}")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<Bounds, A::Error> {
                let mut out: Vec<(String, BoundEntry)> = Vec::new();
                while let Some((k, v)) = access.next_entry::<String, BoundEntry>()? {
                    if out.iter().any(|(seen, _)| *seen == k) {
                        return Err(serde::de::Error::custom(format!("duplicate category {k:?}")));
                    }
                    out.push((k, v));
                }
                Ok(Bounds(out))
            }
        }
        deserializer.deserialize_map(OrderedVisitor)
    }
}

impl Bounds {
    fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstitutionEntry {
    pub id: String,
    pub capacity: u32,
    pub prefs: Vec<String>,
    #[serde(default, skip_serializing_if = "Bounds::is_empty")]
    pub bounds: Bounds,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeCostEntry {
    pub student: String,
    pub institution: String,
    pub cost: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub students: Vec<StudentEntry>,
    pub institutions: Vec<InstitutionEntry>,
    #[serde(default)]
    pub counting_rule: CountingRule,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub edge_costs: Vec<EdgeCostEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<Value>,
}

impl InstanceFile {
    pub fn to_raw(&self) -> Result<RawInstance, IoError> {
        let mut families: Vec<(String, Vec<String>)> = Vec::new();
        for s in &self.students {
            if let Some(f) = &s.family {
                match families.iter_mut().find(|(id, _)| id == f) {
                    Some((_, members)) => members.push(s.id.clone()),
                    None => families.push((f.clone(), vec![s.id.clone()])),
                }
            }
        }
        let edge_costs = self
            .edge_costs
            .iter()
            .map(|e| {
                let c = parse_rational(&e.cost).map_err(|_| IoError::Rational(e.cost.clone()))?;
                Ok((e.student.clone(), e.institution.clone(), c))
            })
            .collect::<Result<Vec<_>, IoError>>()?;
        Ok(RawInstance {
            students: self
                .students
                .iter()
                .map(|s| RawStudent {
                    id: s.id.clone(),
                    prefs: s.prefs.clone(),
                    categories: s.categories.clone(),
                })
                .collect(),
            institutions: self
                .institutions
                .iter()
                .map(|i| RawInstitution {
                    id: i.id.clone(),
                    capacity: i.capacity,
                    prefs: i.prefs.clone(),
                    bounds: i
                        .bounds
                        .0
                        .iter()
                        .map(|(c, b)| RawBound {
                            category: c.clone(),
                            lower: b.lower,
                            upper: b.upper,
                        })
                        .collect(),
                })
                .collect(),
            families,
            edge_costs,
            counting_rule: self.counting_rule,
        })
    }

    pub fn to_instance(&self) -> Result<Instance, IoError> {
        Ok(Instance::validate(self.to_raw()?)?)
    }

    pub fn from_instance(inst: &Instance) -> InstanceFile {
        let raw = inst.to_raw();
        let family_of = |id: &str| {
            raw.families
                .iter()
                .find(|(_, members)| members.iter().any(|m| m == id))
                .map(|(f, _)| f.clone())
        };
        InstanceFile {
            students: raw
                .students
                .iter()
                .map(|s| StudentEntry {
                    id: s.id.clone(),
                    prefs: s.prefs.clone(),
                    categories: s.categories.clone(),
                    family: family_of(&s.id),
                })
                .collect(),
            institutions: raw
                .institutions
                .iter()
                .map(|i| InstitutionEntry {
                    id: i.id.clone(),
                    capacity: i.capacity,
                    prefs: i.prefs.clone(),
                    bounds: Bounds(
                        i.bounds
                            .iter()
                            .map(|b| {
                                (
                                    b.category.clone(),
                                    BoundEntry {
                                        lower: b.lower,
                                        upper: b.upper,
                                    },
                                )
                            })
                            .collect(),
                    ),
                })
                .collect(),
            counting_rule: raw.counting_rule,
            edge_costs: raw
                .edge_costs
                .iter()
                .map(|(s, i, c)| EdgeCostEntry {
                    student: s.clone(),
                    institution: i.clone(),
                    cost: format_rational(c),
                })
                .collect(),
            meta: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance files always serialize")
    }

    pub fn from_json(text: &str) -> Result<InstanceFile, IoError> {
        Ok(serde_json::from_str(text)?)
    }
}

pub fn parse_instance(text: &str) -> Result<Instance, IoError> {
    InstanceFile::from_json(text)?.to_instance()
}

pub fn load_instance(path: &Path) -> Result<Instance, IoError> {
    parse_instance(&std::fs::read_to_string(path)?)
}

pub fn print_instance(inst: &Instance) -> String {
    InstanceFile::from_instance(inst).to_json()
}

/// SHA-256 of the canonical printed form.
pub fn instance_digest(inst: &Instance) -> String {
    hex::encode(Sha256::digest(print_instance(inst).as_bytes()))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatchEntry {
    pub student: String,
    pub institution: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveEntry {
    pub name: String,
    pub mode: String,
    pub value: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstitutionValue {
    pub institution: String,
    pub value: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportFile {
    pub command: String,
    pub instance_digest: String,
    /// `ok`, `no_solution` or `infeasible`.
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matching: Option<Vec<MatchEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<ObjectiveEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_institution: Vec<InstitutionValue>,
    #[serde(default)]
    pub diagnostics: Value,
    #[serde(default)]
    pub timing: Value,
    /// Command-specific payload: catalogs, enumerations, weight tables.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extra: Option<Value>,
}

impl ReportFile {
    pub fn new(command: &str, inst: &Instance) -> ReportFile {
        ReportFile {
            command: command.to_string(),
            instance_digest: instance_digest(inst),
            status: "ok".to_string(),
            matching: None,
            objective: None,
            per_institution: Vec::new(),
            diagnostics: json!({}),
            timing: json!({}),
            extra: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }

    /// The matching named by the report, checked against `inst`.
    pub fn matching(&self, inst: &Instance) -> Result<Option<Matching>, IoError> {
        self.matching
            .as_ref()
            .map(|entries| matching_from_entries(inst, entries))
            .transpose()
    }
}

pub fn matching_entries(inst: &Instance, m: &Matching) -> Vec<MatchEntry> {
    (0..inst.num_students())
        .map(|s| MatchEntry {
            student: inst.student_id(s).to_string(),
            institution: m.partner(s).map(|i| inst.institution_id(i).to_string()),
        })
        .collect()
}

pub fn matching_from_entries(inst: &Instance, entries: &[MatchEntry]) -> Result<Matching, IoError> {
    let mut m = Matching::empty(inst.num_students());
    for e in entries {
        let s = inst.student_index(&e.student).ok_or_else(|| IoError::UnknownId {
            kind: "student",
            id: e.student.clone(),
        })?;
        let i = match &e.institution {
            Some(id) => Some(inst.institution_index(id).ok_or_else(|| IoError::UnknownId {
                kind: "institution",
                id: id.clone(),
            })?),
            None => None,
        };
        m.set_partner(s, i);
    }
    Ok(m)
}

/// Non-zero weights as `{student, institution, weight}` rows plus the
/// offset.
pub fn weights_table(inst: &Instance, w: &EdgeWeights<BigRational>) -> Value {
    let rows: Vec<Value> = w
        .nonzero()
        .map(|((s, i), v)| {
            json!({
                "student": inst.student_id(s),
                "institution": inst.institution_id(i),
                "weight": format_rational(v),
            })
        })
        .collect();
    json!({ "offset": format_rational(&w.offset), "weights": rows })
}

/// Fills the matching, objective and diagnostics of a report from a solve.
pub fn solve_report(command: &str, inst: &Instance, r: &SolveReport<BigRational>, with_weights: bool) -> ReportFile {
    let mut out = ReportFile::new(command, inst);
    out.matching = Some(matching_entries(inst, &r.matching));
    let mode = serde_json::to_value(r.mode)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default();
    out.objective = Some(ObjectiveEntry {
        name: r.objective.clone(),
        mode,
        value: format_rational(&r.value),
    });
    out.per_institution = r
        .per_institution
        .iter()
        .enumerate()
        .map(|(i, v)| InstitutionValue {
            institution: inst.institution_id(i).to_string(),
            value: format_rational(v),
        })
        .collect();
    let d = &r.diagnostics;
    out.diagnostics = json!({
        "student_optimal": r.student_optimal,
        "catalog_sets": d.catalog_sets,
        "rotations": d.rotations,
        "closure_size": d.closure_size,
        "cut_value": format_rational(&d.cut_value),
        "thresholds": d.thresholds,
        "student_value": d.student_value.as_ref().map(format_rational),
        "oracle_value": r.oracle_value.as_ref().map(format_rational),
    });
    out.timing = json!({ "wall_ms": r.wall_time.as_secs_f64() * 1e3 });
    if with_weights {
        out.extra = Some(json!({ "edge_weights": weights_table(inst, &r.weights) }));
    }
    out
}

/// Reads a student cost file: `{"costs": [{student, institution, cost}],
/// "unmatched": {student: cost}}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudentCostFile {
    #[serde(default)]
    pub costs: Vec<EdgeCostEntry>,
    #[serde(default)]
    pub unmatched: std::collections::BTreeMap<String, String>,
}

impl StudentCostFile {
    pub fn to_costs(&self, inst: &Instance) -> Result<crate::solver::StudentCosts<BigRational>, IoError> {
        let mut h = crate::solver::StudentCosts::zero(inst);
        for e in &self.costs {
            let s = inst.student_index(&e.student).ok_or_else(|| IoError::UnknownId {
                kind: "student",
                id: e.student.clone(),
            })?;
            let i = inst.institution_index(&e.institution).ok_or_else(|| IoError::UnknownId {
                kind: "institution",
                id: e.institution.clone(),
            })?;
            let c = parse_rational(&e.cost).map_err(|_| IoError::Rational(e.cost.clone()))?;
            h.costs.insert((s, i), c);
        }
        for (id, c) in &self.unmatched {
            let s = inst.student_index(id).ok_or_else(|| IoError::UnknownId {
                kind: "student",
                id: id.clone(),
            })?;
            h.unmatched[s] = parse_rational(c).map_err(|_| IoError::Rational(c.clone()))?;
        }
        Ok(h)
    }
}

/// Edge costs declared in the instance, as student costs.
pub fn instance_costs(inst: &Instance) -> crate::solver::StudentCosts<BigRational> {
    let mut h = crate::solver::StudentCosts::zero(inst);
    for ((s, i), c) in inst.edge_costs() {
        h.costs.insert((*s, *i), c.clone());
    }
    h
}
