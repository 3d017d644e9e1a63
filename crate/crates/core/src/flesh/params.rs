use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use super::FleshError;
use crate::ccl::{
    ParamValue, ParameterDecl, ParameterFile, RawValue, Steerable, Strictness, ThornManifest,
};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ParamKey {
    pub thorn: String,
    pub name: String,
}

impl ParamKey {
    pub fn new(thorn: &str, name: &str) -> Self {
        ParamKey {
            thorn: thorn.to_string(),
            name: name.to_string(),
        }
    }
}

impl fmt::Display for ParamKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}::{}", self.thorn, self.name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueSource {
    Default,
    File,
    Steered,
}

#[derive(Debug, Clone, Serialize)]
pub struct ParamEntry {
    pub decl: ParameterDecl,
    pub implementation: String,
    pub value: ParamValue,
    pub source: ValueSource,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PendingSteer {
    pub key: ParamKey,
    pub value: ParamValue,
    pub requested_at: u64,
}

/// One applied steer: `iteration` is the boundary at which it took effect.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteerRecord {
    pub iteration: u64,
    pub thorn: String,
    pub name: String,
    pub old: ParamValue,
    pub new: ParamValue,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum SteerRejection {
    UnknownParameter {
        parameter: String,
    },
    NotSteerable {
        parameter: String,
    },
    RangeViolation {
        parameter: String,
        value: String,
        ranges: String,
    },
    BadValue {
        parameter: String,
        message: String,
    },
}

impl fmt::Display for SteerRejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SteerRejection::UnknownParameter { parameter } => {
                write!(f, "parameter {parameter} does not exist")
            }
            SteerRejection::NotSteerable { parameter } => {
                write!(f, "parameter {parameter} is not steerable")
            }
            SteerRejection::RangeViolation {
                parameter,
                value,
                ranges,
            } => {
                write!(
                    f,
                    "{parameter} = {value} is outside the allowed ranges: {ranges}"
                )
            }
            SteerRejection::BadValue { parameter, message } => write!(f, "{parameter}: {message}"),
        }
    }
}

/// Immutable view of every parameter value, taken once per iteration so
/// that all blocks observe the same values.
#[derive(Debug, Clone, Default)]
pub struct ParamValues {
    map: Arc<BTreeMap<String, BTreeMap<String, ParamValue>>>,
}

impl ParamValues {
    pub fn get(&self, thorn: &str, name: &str) -> Option<&ParamValue> {
        self.map.get(thorn)?.get(name)
    }

    pub fn get_key(&self, key: &ParamKey) -> Option<&ParamValue> {
        self.get(&key.thorn, &key.name)
    }

    /// True if both views share the same underlying snapshot.
    pub fn same_snapshot(&self, other: &ParamValues) -> bool {
        Arc::ptr_eq(&self.map, &other.map)
    }
}

#[derive(Debug, Clone, Default)]
pub struct ParameterTable {
    entries: BTreeMap<ParamKey, ParamEntry>,
    pending: VecDeque<PendingSteer>,
    history: Vec<SteerRecord>,
    iteration: u64,
    snapshot: ParamValues,
}

impl ParameterTable {
    pub fn entries(&self) -> impl Iterator<Item = (&ParamKey, &ParamEntry)> {
        self.entries.iter()
    }

    pub fn entry(&self, key: &ParamKey) -> Option<&ParamEntry> {
        self.entries.get(key)
    }

    pub fn get(&self, thorn: &str, name: &str) -> Option<&ParamValue> {
        self.entries
            .get(&ParamKey::new(thorn, name))
            .map(|e| &e.value)
    }

    /// Finds the entry named `name` under a thorn or implementation `scope`.
    pub fn lookup(&self, scope: &str, name: &str) -> Option<&ParamKey> {
        self.entries
            .iter()
            .find(|(k, e)| {
                k.name == name
                    && (k.thorn.eq_ignore_ascii_case(scope)
                        || e.implementation.eq_ignore_ascii_case(scope))
            })
            .map(|(k, _)| k)
    }

    pub fn pending(&self) -> impl Iterator<Item = &PendingSteer> {
        self.pending.iter()
    }

    pub fn history(&self) -> &[SteerRecord] {
        &self.history
    }

    /// Iteration currently executing; steers take effect at the next one.
    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn values(&self) -> ParamValues {
        self.snapshot.clone()
    }

    /// Validates a steering request and queues it. Returns the iteration at
    /// which the new value becomes visible.
    pub fn steer(
        &mut self,
        scope: &str,
        name: &str,
        raw: &RawValue,
    ) -> Result<u64, SteerRejection> {
        let parameter = format!("{scope}::{name}");
        let key =
            self.lookup(scope, name)
                .cloned()
                .ok_or_else(|| SteerRejection::UnknownParameter {
                    parameter: parameter.clone(),
                })?;
        let decl = &self.entries[&key].decl;
        let parameter = key.to_string();
        if decl.steerable != Steerable::Always {
            return Err(SteerRejection::NotSteerable { parameter });
        }
        let value = decl
            .coerce(raw)
            .map_err(|message| SteerRejection::BadValue {
                parameter: parameter.clone(),
                message,
            })?;
        if !decl.admits(&value) {
            return Err(SteerRejection::RangeViolation {
                parameter,
                value: raw.text().to_string(),
                ranges: decl.range_descriptions(),
            });
        }
        self.pending.push_back(PendingSteer {
            key,
            value,
            requested_at: self.iteration,
        });
        Ok(self.iteration + 1)
    }

    /// Moves to `iteration` and applies every queued steer, in request
    /// order. Called exactly once per iteration boundary.
    pub fn begin_iteration(&mut self, iteration: u64) -> Vec<SteerRecord> {
        self.iteration = iteration;
        let mut applied = Vec::new();
        while let Some(p) = self.pending.pop_front() {
            let entry = self
                .entries
                .get_mut(&p.key)
                .expect("pending steer for a known key");
            let record = SteerRecord {
                iteration,
                thorn: p.key.thorn.clone(),
                name: p.key.name.clone(),
                old: std::mem::replace(&mut entry.value, p.value),
                new: entry.value.clone(),
            };
            entry.source = ValueSource::Steered;
            applied.push(record);
        }
        if !applied.is_empty() {
            self.history.extend(applied.iter().cloned());
            self.refresh_snapshot();
        }
        applied
    }

    fn refresh_snapshot(&mut self) {
        let mut map: BTreeMap<String, BTreeMap<String, ParamValue>> = BTreeMap::new();
        for (k, e) in &self.entries {
            map.entry(k.thorn.clone())
                .or_default()
                .insert(k.name.clone(), e.value.clone());
        }
        self.snapshot = ParamValues { map: Arc::new(map) };
    }
}

/// Builds the parameter table for `active` thorns from `pf`. `available`
/// lets assignments to known but inactive thorns be told apart from
/// misspellings. Non-fatal findings are pushed onto `warnings` as
/// (level, message).
pub fn bind_parameters(
    active: &[ThornManifest],
    available: &[ThornManifest],
    pf: &ParameterFile,
    warnings: &mut Vec<(u32, String)>,
) -> Result<ParameterTable, FleshError> {
    let mut entries = BTreeMap::new();
    for m in active {
        for decl in &m.parameters {
            entries.insert(
                ParamKey::new(&m.thorn_name, &decl.name),
                ParamEntry {
                    decl: decl.clone(),
                    implementation: m.implements().to_string(),
                    value: decl.default.clone(),
                    source: ValueSource::Default,
                },
            );
        }
    }

    for a in &pf.assignments {
        let Some(m) = active.iter().find(|m| m.answers_to(&a.scope)) else {
            let inactive = available.iter().any(|m| m.answers_to(&a.scope));
            match (inactive, pf.strictness) {
                (true, Strictness::Strict) => {
                    return Err(FleshError::InactiveThorn {
                        scope: a.scope.clone(),
                        name: a.name.clone(),
                    })
                }
                (true, _) => warnings.push((
                    1,
                    format!(
                        "ignoring parameter {}::{}: thorn {} is not active",
                        a.scope, a.name, a.scope
                    ),
                )),
                (false, Strictness::Relaxed) => warnings.push((
                    1,
                    format!(
                        "ignoring parameter {}::{}: no such thorn or implementation",
                        a.scope, a.name
                    ),
                )),
                (false, _) => {
                    return Err(FleshError::UnknownParameter {
                        scope: a.scope.clone(),
                        name: a.name.clone(),
                    })
                }
            }
            continue;
        };
        let key = ParamKey::new(&m.thorn_name, &a.name);
        let Some(entry) = entries.get_mut(&key) else {
            if pf.strictness == Strictness::Relaxed {
                warnings.push((
                    1,
                    format!(
                        "ignoring parameter {}::{}: it does not exist",
                        a.scope, a.name
                    ),
                ));
                continue;
            }
            return Err(FleshError::UnknownParameter {
                scope: a.scope.clone(),
                name: a.name.clone(),
            });
        };
        if entry.source == ValueSource::File {
            return Err(FleshError::DuplicateAssignment {
                thorn: key.thorn,
                name: key.name,
            });
        }
        let value = entry
            .decl
            .coerce(&a.value)
            .map_err(|reason| FleshError::BadValue {
                thorn: key.thorn.clone(),
                name: key.name.clone(),
                reason,
            })?;
        if !entry.decl.admits(&value) {
            return Err(FleshError::RangeViolation {
                thorn: key.thorn,
                name: key.name,
                value: a.value.text().to_string(),
                ranges: entry.decl.range_descriptions(),
            });
        }
        entry.value = value;
        entry.source = ValueSource::File;
    }

    let mut table = ParameterTable {
        entries,
        ..Default::default()
    };
    table.refresh_snapshot();
    Ok(table)
}
