//! The framework core: assembles active thorns into a consistent
//! configuration and owns the parameter database, the warning channel,
//! introspection and provenance archiving.

mod introspect;
mod params;
mod provenance;
mod warn;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::{Arc, RwLock};

use serde::Serialize;
use thiserror::Error;

use crate::ccl::{
    ParamScope, ParameterFile, QualifiedName, ThornManifest, VariableGroup, Visibility,
};

pub use introspect::{
    introspect, Database, ParamInfo, Query, QueryResult, RunStatus, ThornInfo, VarInfo,
};
pub use params::{
    bind_parameters, ParamEntry, ParamKey, ParamValues, ParameterTable, PendingSteer, SteerRecord,
    SteerRejection, ValueSource,
};
pub use provenance::{archive_provenance, ProvenanceManifest, SourceFile, ThornArchive};
pub use warn::{warn, Origin, WarnAction, WarningEvent, WarningLog};

/// Index of a variable group in [`Configuration::variables`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Serialize)]
pub struct VariableInfo {
    pub id: VarId,
    pub thorn: String,
    pub implementation: String,
    pub group: VariableGroup,
}

impl VariableInfo {
    /// `implementation::group`
    pub fn full_name(&self) -> String {
        format!("{}::{}", self.implementation, self.group.name)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FleshError {
    #[error("thorn `{0}` named in ActiveThorns was not found")]
    UnknownThorn(String),
    #[error("interface {interface} not provided by any active thorn (inherited by {thorn})")]
    MissingInterface { thorn: String, interface: String },
    #[error("interface {interface} is implemented by both {first} and {second}")]
    InterfaceConflict {
        interface: String,
        first: String,
        second: String,
    },
    #[error("parameter {scope}::{name} does not exist")]
    UnknownParameter { scope: String, name: String },
    #[error("parameter {scope}::{name} is set for thorn {scope}, which is not active")]
    InactiveThorn { scope: String, name: String },
    #[error("parameter {thorn}::{name} set twice")]
    DuplicateAssignment { thorn: String, name: String },
    #[error("parameter {thorn}::{name}: {reason}")]
    BadValue {
        thorn: String,
        name: String,
        reason: String,
    },
    #[error("parameter {thorn}::{name} = {value} is outside the allowed ranges: {ranges}")]
    RangeViolation {
        thorn: String,
        name: String,
        value: String,
        ranges: String,
    },
    #[error("thorn {thorn} may not access variable {variable}")]
    AccessDenied { thorn: String, variable: String },
    #[error("thorn {thorn} references unknown variable {variable}")]
    UnknownVariable { thorn: String, variable: String },
    #[error("thorn {thorn}: variable name {variable} is ambiguous")]
    AmbiguousVariable { thorn: String, variable: String },
    #[error("thorn {thorn} may not read parameter {param}")]
    ParameterAccess { thorn: String, param: String },
}

/// The assembled set of active thorns.
#[derive(Debug)]
pub struct Configuration {
    pub active_thorns: Vec<ThornManifest>,
    /// Interface name to the active thorn providing it.
    pub implementation_map: BTreeMap<String, String>,
    pub variables: Vec<VariableInfo>,
    /// Variable groups each thorn may access.
    pub access_table: BTreeMap<String, BTreeSet<VarId>>,
    pub parameters: Arc<RwLock<ParameterTable>>,
    /// Non-fatal findings from assembly and parameter binding, as
    /// (level, message).
    pub startup_warnings: Vec<(u32, String)>,
}

/// Assembles the thorns named in `pf` out of the `available` manifests and
/// binds the parameter file. Fails without side effects on any
/// inconsistency.
pub fn assemble(
    available: &[ThornManifest],
    pf: &ParameterFile,
) -> Result<Configuration, FleshError> {
    let mut active: Vec<ThornManifest> = Vec::new();
    for name in &pf.active_thorns {
        let m = available
            .iter()
            .find(|m| m.thorn_name.eq_ignore_ascii_case(name))
            .ok_or_else(|| FleshError::UnknownThorn(name.clone()))?;
        if !active.iter().any(|a| a.thorn_name == m.thorn_name) {
            active.push(m.clone());
        }
    }

    let mut implementation_map: BTreeMap<String, String> = BTreeMap::new();
    for m in &active {
        if let Some(first) =
            implementation_map.insert(m.implements().to_string(), m.thorn_name.clone())
        {
            return Err(FleshError::InterfaceConflict {
                interface: m.implements().to_string(),
                first,
                second: m.thorn_name.clone(),
            });
        }
    }
    for m in &active {
        for inh in &m.interface.inherits {
            if !implementation_map.contains_key(inh) {
                return Err(FleshError::MissingInterface {
                    thorn: m.thorn_name.clone(),
                    interface: inh.clone(),
                });
            }
        }
    }

    let mut variables = Vec::new();
    for m in &active {
        for g in &m.interface.variable_groups {
            variables.push(VariableInfo {
                id: VarId(variables.len()),
                thorn: m.thorn_name.clone(),
                implementation: m.implements().to_string(),
                group: g.clone(),
            });
        }
    }

    let mut access_table = BTreeMap::new();
    for m in &active {
        let mut set: BTreeSet<VarId> = variables
            .iter()
            .filter(|v| v.thorn == m.thorn_name)
            .map(|v| v.id)
            .collect();
        for provider in inherited_thorns(&active, &implementation_map, m) {
            set.extend(
                variables
                    .iter()
                    .filter(|v| v.thorn == provider && v.group.visibility == Visibility::Public)
                    .map(|v| v.id),
            );
        }
        access_table.insert(m.thorn_name.clone(), set);
    }

    let mut startup_warnings = Vec::new();
    let table = bind_parameters(&active, available, pf, &mut startup_warnings)?;

    Ok(Configuration {
        active_thorns: active,
        implementation_map,
        variables,
        access_table,
        parameters: Arc::new(RwLock::new(table)),
        startup_warnings,
    })
}

/// Thorns whose interfaces `m` inherits, directly or through other
/// inherited interfaces.
fn inherited_thorns(
    active: &[ThornManifest],
    implementation_map: &BTreeMap<String, String>,
    m: &ThornManifest,
) -> Vec<String> {
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut queue: VecDeque<&str> = m.interface.inherits.iter().map(String::as_str).collect();
    let mut out = Vec::new();
    while let Some(imp) = queue.pop_front() {
        if !seen.insert(imp.to_string()) {
            continue;
        }
        let Some(thorn) = implementation_map.get(imp) else {
            continue;
        };
        if *thorn == m.thorn_name {
            continue;
        }
        out.push(thorn.clone());
        if let Some(provider) = active.iter().find(|a| a.thorn_name == *thorn) {
            queue.extend(provider.interface.inherits.iter().map(String::as_str));
        }
    }
    out
}

impl Configuration {
    pub fn thorn(&self, name: &str) -> Option<&ThornManifest> {
        self.active_thorns.iter().find(|m| m.thorn_name == name)
    }

    /// Active thorn whose name or implementation is `scope`.
    pub fn thorn_for_scope(&self, scope: &str) -> Option<&ThornManifest> {
        self.active_thorns.iter().find(|m| m.answers_to(scope))
    }

    pub fn variable(&self, id: VarId) -> &VariableInfo {
        &self.variables[id.0]
    }

    pub fn variable_by_full_name(&self, name: &str) -> Option<&VariableInfo> {
        let q = QualifiedName::parse(name);
        match &q.scope {
            Some(scope) => {
                let owner = self.thorn_for_scope(scope)?;
                self.variables
                    .iter()
                    .find(|v| v.thorn == owner.thorn_name && v.group.name == q.name)
            }
            None => {
                let mut it = self.variables.iter().filter(|v| v.group.name == q.name);
                let first = it.next()?;
                it.next().is_none().then_some(first)
            }
        }
    }

    /// Resolves a variable reference made by `thorn`, enforcing the access
    /// table. Unqualified names prefer the thorn's own groups, then
    /// accessible inherited ones.
    pub fn resolve_variable(&self, thorn: &str, q: &QualifiedName) -> Result<VarId, FleshError> {
        let unknown = || FleshError::UnknownVariable {
            thorn: thorn.to_string(),
            variable: q.to_string(),
        };
        let allowed = self.access_table.get(thorn);
        let id = match &q.scope {
            Some(scope) => {
                let owner = self.thorn_for_scope(scope).ok_or_else(unknown)?;
                self.variables
                    .iter()
                    .find(|v| v.thorn == owner.thorn_name && v.group.name == q.name)
                    .ok_or_else(unknown)?
                    .id
            }
            None => {
                if let Some(v) = self
                    .variables
                    .iter()
                    .find(|v| v.thorn == thorn && v.group.name == q.name)
                {
                    v.id
                } else {
                    let candidates: Vec<&VariableInfo> = self
                        .variables
                        .iter()
                        .filter(|v| {
                            v.group.name == q.name && allowed.is_some_and(|a| a.contains(&v.id))
                        })
                        .collect();
                    match candidates.as_slice() {
                        [one] => one.id,
                        [] => {
                            return if self.variables.iter().any(|v| v.group.name == q.name) {
                                Err(FleshError::AccessDenied {
                                    thorn: thorn.into(),
                                    variable: q.to_string(),
                                })
                            } else {
                                Err(unknown())
                            }
                        }
                        _ => {
                            return Err(FleshError::AmbiguousVariable {
                                thorn: thorn.into(),
                                variable: q.to_string(),
                            })
                        }
                    }
                }
            }
        };
        if allowed.is_some_and(|a| a.contains(&id)) {
            Ok(id)
        } else {
            Err(FleshError::AccessDenied {
                thorn: thorn.to_string(),
                variable: self.variable(id).full_name(),
            })
        }
    }

    /// Resolves a parameter reference made by code of `thorn`. Private
    /// parameters are visible to their own thorn only; restricted ones also
    /// to thorns inheriting the owner's interface.
    pub fn resolve_parameter(
        &self,
        thorn: &str,
        q: &QualifiedName,
    ) -> Result<ParamKey, FleshError> {
        let owner = match &q.scope {
            None => self.thorn(thorn),
            Some(scope) => self.thorn_for_scope(scope),
        }
        .ok_or_else(|| FleshError::UnknownParameter {
            scope: q.scope.clone().unwrap_or_else(|| thorn.to_string()),
            name: q.name.clone(),
        })?;
        let decl = owner
            .parameter(&q.name)
            .ok_or_else(|| FleshError::UnknownParameter {
                scope: owner.thorn_name.clone(),
                name: q.name.clone(),
            })?;
        let visible = owner.thorn_name == thorn
            || (decl.scope == ParamScope::Restricted
                && self.thorn(thorn).is_some_and(|me| {
                    inherited_thorns(&self.active_thorns, &self.implementation_map, me)
                        .contains(&owner.thorn_name)
                }));
        if !visible {
            return Err(FleshError::ParameterAccess {
                thorn: thorn.to_string(),
                param: format!("{}::{}", owner.thorn_name, q.name),
            });
        }
        Ok(ParamKey::new(&owner.thorn_name, &q.name))
    }
}
