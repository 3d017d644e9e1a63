use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use serde::Serialize;

use super::Configuration;
use crate::ccl::{ParamValue, Steerable};
use crate::schedule::{dump_schedule, NodeId, ScheduleTree};

#[derive(Debug, Clone, Serialize)]
pub struct ThornInfo {
    pub name: String,
    pub implements: String,
    pub inherits: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VarInfo {
    /// `implementation::group`
    pub name: String,
    pub thorn: String,
    pub group: String,
    pub kind: String,
    pub data_type: String,
    pub timelevels: u32,
    pub dims: Option<u8>,
    pub public: bool,
    pub description: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ParamInfo {
    pub thorn: String,
    pub name: String,
    pub data_type: String,
    pub value: ParamValue,
    pub default: ParamValue,
    pub source: String,
    pub steerable: bool,
    pub description: String,
    pub ranges: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScheduleEntry {
    pub name: String,
    pub thorn: String,
    pub group: bool,
    #[serde(rename = "if")]
    pub if_condition: Option<String>,
    #[serde(rename = "while")]
    pub while_condition: Option<String>,
    pub description: String,
    pub children: Vec<ScheduleEntry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScheduleBin {
    pub bin: String,
    pub items: Vec<ScheduleEntry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScheduleInfo {
    pub bins: Vec<ScheduleBin>,
    pub listing: String,
}

/// Latest published state of a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunStatus {
    pub iteration: u64,
    pub time: f64,
    pub state: String,
    pub bin: Option<String>,
    /// Next schedule item the cursor will consider.
    pub next_item: Option<String>,
    /// Routine calls executed so far.
    pub trace_len: usize,
    /// The run loop is blocked waiting for a control command.
    pub waiting: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Query {
    ListThorns,
    ListVariables {
        thorn: Option<String>,
    },
    ListParameters {
        thorn: Option<String>,
        steerable_only: bool,
    },
    GetSchedule,
    GetRunState,
}

impl Query {
    /// Builds a query from its kind name and string arguments.
    pub fn parse(kind: &str, args: &BTreeMap<String, String>) -> Result<Query, String> {
        let thorn = args.get("thorn").cloned();
        Ok(match kind {
            "list_thorns" => Query::ListThorns,
            "list_variables" => Query::ListVariables { thorn },
            "list_parameters" => Query::ListParameters {
                thorn,
                steerable_only: args
                    .get("steerable_only")
                    .is_some_and(|v| matches!(v.as_str(), "1" | "true" | "yes")),
            },
            "get_schedule" => Query::GetSchedule,
            "get_run_state" => Query::GetRunState,
            other => return Err(format!("unknown query kind `{other}`")),
        })
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum QueryResult {
    Thorns(Vec<ThornInfo>),
    Variables(Vec<VarInfo>),
    Parameters(Vec<ParamInfo>),
    Schedule(ScheduleInfo),
    RunState(RunStatus),
}

/// The run-time database thorns and tools query.
#[derive(Debug, Clone)]
pub struct Database {
    pub config: Arc<Configuration>,
    pub tree: Arc<ScheduleTree>,
    pub status: Arc<RwLock<RunStatus>>,
}

impl Database {
    pub fn new(config: Arc<Configuration>, tree: Arc<ScheduleTree>) -> Self {
        Database {
            config,
            tree,
            status: Arc::default(),
        }
    }
}

pub fn introspect(db: &Database, query: &Query) -> QueryResult {
    let cfg = &db.config;
    let matches_thorn = |filter: &Option<String>, thorn: &str| {
        filter.as_deref().is_none_or(|f| {
            f.eq_ignore_ascii_case(thorn) || cfg.thorn(thorn).is_some_and(|m| m.answers_to(f))
        })
    };
    match query {
        Query::ListThorns => QueryResult::Thorns(
            cfg.active_thorns
                .iter()
                .map(|m| ThornInfo {
                    name: m.thorn_name.clone(),
                    implements: m.implements().to_string(),
                    inherits: m.interface.inherits.clone(),
                })
                .collect(),
        ),
        Query::ListVariables { thorn } => QueryResult::Variables(
            cfg.variables
                .iter()
                .filter(|v| matches_thorn(thorn, &v.thorn))
                .map(|v| VarInfo {
                    name: v.full_name(),
                    thorn: v.thorn.clone(),
                    group: v.group.name.clone(),
                    kind: format!("{:?}", v.group.kind).to_uppercase(),
                    data_type: format!("{:?}", v.group.data_type).to_uppercase(),
                    timelevels: v.group.timelevels,
                    dims: v.group.dims,
                    public: v.group.visibility == crate::ccl::Visibility::Public,
                    description: v.group.description.clone(),
                })
                .collect(),
        ),
        Query::ListParameters {
            thorn,
            steerable_only,
        } => {
            let table = cfg.parameters.read().unwrap();
            QueryResult::Parameters(
                table
                    .entries()
                    .filter(|(k, e)| {
                        matches_thorn(thorn, &k.thorn)
                            && (!steerable_only || e.decl.steerable == Steerable::Always)
                    })
                    .map(|(k, e)| ParamInfo {
                        thorn: k.thorn.clone(),
                        name: k.name.clone(),
                        data_type: e.decl.data_type.to_string(),
                        value: e.value.clone(),
                        default: e.decl.default.clone(),
                        source: format!("{:?}", e.source).to_lowercase(),
                        steerable: e.decl.steerable == Steerable::Always,
                        description: e.decl.description.clone(),
                        ranges: e
                            .decl
                            .ranges
                            .iter()
                            .map(|r| r.description().to_string())
                            .collect(),
                    })
                    .collect(),
            )
        }
        Query::GetSchedule => {
            let tree = &db.tree;
            QueryResult::Schedule(ScheduleInfo {
                bins: tree
                    .bins
                    .iter()
                    .map(|(bin, list)| ScheduleBin {
                        bin: bin.name().to_string(),
                        items: list.iter().map(|&id| entry(tree, id)).collect(),
                    })
                    .collect(),
                listing: dump_schedule(tree, cfg),
            })
        }
        Query::GetRunState => QueryResult::RunState(db.status.read().unwrap().clone()),
    }
}

fn entry(tree: &ScheduleTree, id: NodeId) -> ScheduleEntry {
    let n = &tree.nodes[id];
    ScheduleEntry {
        name: n.item.name.clone(),
        thorn: n.thorn.clone(),
        group: n.item.is_group,
        if_condition: n.item.if_condition.as_ref().map(ToString::to_string),
        while_condition: n.item.while_condition.as_ref().map(ToString::to_string),
        description: n.item.description.clone(),
        children: n.children.iter().map(|&c| entry(tree, c)).collect(),
    }
}
