//! Self-assembly of the schedule tree from the active thorns' schedule
//! items, and the cursor that walks it.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::ccl::{Bin, DataType, GroupKind, Location, ParamType, QualifiedName, ScheduleItem};
use crate::flesh::{Configuration, FleshError, ParamKey, VarId};

pub type NodeId = usize;

/// A compiled IF/WHILE reference.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Guard {
    Param(ParamKey),
    /// INT grid scalar.
    Scalar(VarId),
}

#[derive(Debug, Clone, Serialize)]
pub struct ScheduleNode {
    pub id: NodeId,
    pub thorn: String,
    pub item: ScheduleItem,
    pub if_guard: Option<Guard>,
    pub while_guard: Option<Guard>,
    pub storage: Vec<(VarId, Option<u32>)>,
    pub sync: Vec<VarId>,
    pub reads: Vec<VarId>,
    pub writes: Vec<VarId>,
    pub children: Vec<NodeId>,
    pub parent: Option<NodeId>,
}

impl ScheduleNode {
    /// `thorn::name`
    pub fn label(&self) -> String {
        format!("{}::{}", self.thorn, self.item.name)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScheduleTree {
    pub bins: Vec<(Bin, Vec<NodeId>)>,
    pub nodes: Vec<ScheduleNode>,
    /// Non-fatal findings as (level, message).
    pub warnings: Vec<(u32, String)>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("schedule cycle in {location}: {}", .members.join(" -> "))]
    Cycle {
        location: String,
        members: Vec<String>,
    },
    #[error("schedule item {item} is IN group `{group}`, which no active thorn defines")]
    UnknownGroup { item: String, group: String },
    #[error("schedule group `{group}` is defined by both {first} and {second}")]
    DuplicateGroup {
        group: String,
        first: String,
        second: String,
    },
    #[error("schedule groups contain themselves: {}", .0.join(", "))]
    GroupCycle(Vec<String>),
    #[error("schedule item {item}: {message}")]
    Guard { item: String, message: String },
    #[error("schedule item {item}: {source}")]
    Variable { item: String, source: FleshError },
}

fn bin_slot(b: Bin) -> usize {
    b.index()
}

/// Places every schedule item of the active thorns and orders siblings.
pub fn build_schedule(config: &Configuration) -> Result<ScheduleTree, ScheduleError> {
    // Collect in activation order, then file order.
    let mut nodes: Vec<ScheduleNode> = Vec::new();
    for m in &config.active_thorns {
        for item in &m.schedule_items {
            let label = format!("{}::{}", m.thorn_name, item.name);
            let resolve = |q: &QualifiedName| {
                config.resolve_variable(&m.thorn_name, q).map_err(|source| {
                    ScheduleError::Variable {
                        item: label.clone(),
                        source,
                    }
                })
            };
            let storage = item
                .storage
                .iter()
                .map(|s| resolve(&s.group).map(|id| (id, s.timelevels)))
                .collect::<Result<_, _>>()?;
            let sync: Vec<VarId> = item.sync.iter().map(resolve).collect::<Result<_, _>>()?;
            for id in &sync {
                if config.variable(*id).group.kind == GroupKind::Scalar {
                    return Err(ScheduleError::Variable {
                        item: label.clone(),
                        source: FleshError::UnknownVariable {
                            thorn: m.thorn_name.clone(),
                            variable: format!(
                                "{} (scalars cannot be synchronized)",
                                config.variable(*id).full_name()
                            ),
                        },
                    });
                }
            }
            let reads = item.reads.iter().map(resolve).collect::<Result<_, _>>()?;
            let writes = item.writes.iter().map(resolve).collect::<Result<_, _>>()?;
            let guard = |q: &Option<QualifiedName>,
                         allow_scalar: bool|
             -> Result<Option<Guard>, ScheduleError> {
                q.as_ref()
                    .map(|q| compile_guard(config, &m.thorn_name, &label, q, allow_scalar))
                    .transpose()
            };
            nodes.push(ScheduleNode {
                id: nodes.len(),
                thorn: m.thorn_name.clone(),
                if_guard: guard(&item.if_condition, false)?,
                while_guard: guard(&item.while_condition, true)?,
                item: item.clone(),
                storage,
                sync,
                reads,
                writes,
                children: Vec::new(),
                parent: None,
            });
        }
    }

    let mut groups: BTreeMap<String, NodeId> = BTreeMap::new();
    for n in nodes.iter().filter(|n| n.item.is_group) {
        if let Some(&first) = groups.get(&n.item.name) {
            return Err(ScheduleError::DuplicateGroup {
                group: n.item.name.clone(),
                first: nodes[first].thorn.clone(),
                second: n.thorn.clone(),
            });
        }
        groups.insert(n.item.name.clone(), n.id);
    }

    let mut bins: Vec<(Bin, Vec<NodeId>)> = Bin::ALL.iter().map(|b| (*b, Vec::new())).collect();
    let mut children: Vec<Vec<NodeId>> = vec![Vec::new(); nodes.len()];
    for n in &nodes {
        match &n.item.location {
            Location::At(b) => bins[bin_slot(*b)].1.push(n.id),
            Location::In(g) => {
                let &gid = groups.get(g).ok_or_else(|| ScheduleError::UnknownGroup {
                    item: n.label(),
                    group: g.clone(),
                })?;
                children[gid].push(n.id);
            }
        }
    }
    for (id, c) in children.into_iter().enumerate() {
        for &child in &c {
            nodes[child].parent = Some(id);
        }
        nodes[id].children = c;
    }

    // Every group must hang off a bin; anything else is nested in itself.
    let mut reachable = vec![false; nodes.len()];
    let mut stack: Vec<NodeId> = bins.iter().flat_map(|(_, l)| l.iter().copied()).collect();
    while let Some(id) = stack.pop() {
        if !reachable[id] {
            reachable[id] = true;
            stack.extend(nodes[id].children.iter().copied());
        }
    }
    let stranded: Vec<String> = nodes
        .iter()
        .filter(|n| n.item.is_group && !reachable[n.id])
        .map(|n| n.item.name.clone())
        .collect();
    if !stranded.is_empty() {
        return Err(ScheduleError::GroupCycle(stranded));
    }

    let mut warnings = Vec::new();
    for (bin, list) in bins.iter_mut() {
        *list = order_siblings(&nodes, list, bin.name(), &mut warnings)?;
    }
    for id in 0..nodes.len() {
        if nodes[id].item.is_group {
            let location = format!("group {}", nodes[id].item.name);
            let ordered = order_siblings(&nodes, &nodes[id].children, &location, &mut warnings)?;
            nodes[id].children = ordered;
        }
    }

    Ok(ScheduleTree {
        bins,
        nodes,
        warnings,
    })
}

fn compile_guard(
    config: &Configuration,
    thorn: &str,
    label: &str,
    q: &QualifiedName,
    allow_scalar: bool,
) -> Result<Guard, ScheduleError> {
    let err = |message: String| ScheduleError::Guard {
        item: label.to_string(),
        message,
    };
    if let Ok(key) = config.resolve_parameter(thorn, q) {
        let table = config.parameters.read().unwrap();
        let ty = table.entry(&key).map(|e| e.decl.data_type);
        return match ty {
            Some(ParamType::Boolean | ParamType::Int) => Ok(Guard::Param(key)),
            Some(t) => Err(err(format!(
                "guard `{q}` is a {t} parameter (needs BOOLEAN or INT)"
            ))),
            None => Err(err(format!("guard `{q}` does not resolve"))),
        };
    }
    if allow_scalar {
        if let Ok(id) = config.resolve_variable(thorn, q) {
            let g = &config.variable(id).group;
            if g.kind == GroupKind::Scalar && g.data_type == DataType::Int {
                return Ok(Guard::Scalar(id));
            }
            return Err(err(format!("guard `{q}` is not an INT scalar")));
        }
    }
    Err(err(format!(
        "guard `{q}` matches no accessible parameter{}",
        if allow_scalar { " or scalar" } else { "" }
    )))
}

fn refers_to(node: &ScheduleNode, config_ref: &str) -> bool {
    let q = QualifiedName::parse(config_ref);
    q.name == node.item.name
        && q.scope
            .as_deref()
            .is_none_or(|s| s.eq_ignore_ascii_case(&node.thorn))
}

/// Kahn's algorithm over one sibling list; among ready nodes the one
/// earliest in (activation, file) order goes first.
fn order_siblings(
    nodes: &[ScheduleNode],
    list: &[NodeId],
    location: &str,
    warnings: &mut Vec<(u32, String)>,
) -> Result<Vec<NodeId>, ScheduleError> {
    let n = list.len();
    let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut indeg = vec![0usize; n];
    let mut add_edge = |from: usize, to: usize, succ: &mut Vec<Vec<usize>>| {
        if !succ[from].contains(&to) {
            succ[from].push(to);
            indeg[to] += 1;
        }
    };
    for (i, &id) in list.iter().enumerate() {
        let item = &nodes[id].item;
        for (clause, refs, before) in [
            ("BEFORE", &item.before, true),
            ("AFTER", &item.after, false),
        ] {
            for r in refs {
                let targets: Vec<usize> = (0..n)
                    .filter(|&j| j != i && refers_to(&nodes[list[j]], r))
                    .collect();
                if targets.is_empty() {
                    warnings.push((
                        2,
                        format!(
                            "{} {clause} {r}: no such item in {location}; constraint ignored",
                            nodes[id].label()
                        ),
                    ));
                }
                for j in targets {
                    if before {
                        add_edge(i, j, &mut succ);
                    } else {
                        add_edge(j, i, &mut succ);
                    }
                }
            }
        }
    }

    let mut ready: BinaryHeap<Reverse<usize>> =
        (0..n).filter(|&i| indeg[i] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(i)) = ready.pop() {
        order.push(list[i]);
        for &j in &succ[i] {
            indeg[j] -= 1;
            if indeg[j] == 0 {
                ready.push(Reverse(j));
            }
        }
    }
    if order.len() == n {
        return Ok(order);
    }

    // Walk predecessors inside the remainder until a node repeats.
    let mut pred: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, s) in succ.iter().enumerate() {
        for &j in s {
            pred[j].push(i);
        }
    }
    let mut seen: Vec<Option<usize>> = vec![None; n];
    let mut path = Vec::new();
    let mut cur = (0..n).find(|&i| indeg[i] > 0).unwrap();
    while seen[cur].is_none() {
        seen[cur] = Some(path.len());
        path.push(cur);
        cur = *pred[cur].iter().find(|&&p| indeg[p] > 0).unwrap();
    }
    let mut cycle: Vec<usize> = path[seen[cur].unwrap()..].to_vec();
    cycle.reverse();
    // Start from the earliest member for stable messages.
    let start = cycle
        .iter()
        .enumerate()
        .min_by_key(|(_, &i)| i)
        .map(|(k, _)| k)
        .unwrap();
    cycle.rotate_left(start);
    let mut members: Vec<String> = cycle.iter().map(|&i| nodes[list[i]].label()).collect();
    members.push(members[0].clone());
    Err(ScheduleError::Cycle {
        location: location.to_string(),
        members,
    })
}

/// One schedule step.
#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    /// Execute a routine.
    Call {
        node: NodeId,
        bin: Bin,
        iteration: u64,
    },
    /// A group is about to run its children.
    GroupEnter {
        node: NodeId,
        bin: Bin,
    },
    /// A group finished one pass over its children.
    GroupExit {
        node: NodeId,
        bin: Bin,
    },
    /// Every item of `bin` has run.
    BinBoundary {
        bin: Bin,
        iteration: u64,
    },
    /// A new evolution iteration starts.
    IterationBoundary {
        iteration: u64,
    },
    Done,
}

/// Supplies guard values and the termination condition to the cursor.
pub trait Evaluator {
    fn guard(&mut self, guard: &Guard) -> Result<bool, String>;
    /// Whether evolution iteration `next` should run.
    fn continue_evolution(&mut self, next: u64) -> bool;
}

pub const INIT_BINS: [Bin; 4] = [Bin::Startup, Bin::Paramcheck, Bin::Initial, Bin::Analysis];
pub const EVOLUTION_BINS: [Bin; 4] = [Bin::Prestep, Bin::Evol, Bin::Poststep, Bin::Analysis];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stage {
    Setup,
    Evolving,
    Terminating,
    Done,
}

#[derive(Debug, Clone)]
struct Frame {
    items: Vec<NodeId>,
    pos: usize,
    /// The node at `pos` passed its IF and is looping on WHILE.
    in_while: bool,
    group: Option<NodeId>,
}

/// Position in the schedule; produces exactly the trace of a full run.
#[derive(Debug, Clone)]
pub struct ScheduleCursor {
    stage: Stage,
    queue: VecDeque<Bin>,
    stack: Vec<Frame>,
    bin: Option<Bin>,
    iteration: u64,
    counts: Vec<u64>,
}

impl ScheduleCursor {
    pub fn new(tree: &ScheduleTree) -> Self {
        ScheduleCursor {
            stage: Stage::Setup,
            queue: INIT_BINS.into_iter().collect(),
            stack: Vec::new(),
            bin: None,
            iteration: 0,
            counts: vec![0; tree.nodes.len()],
        }
    }

    pub fn bin(&self) -> Option<Bin> {
        self.bin
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn is_done(&self) -> bool {
        self.stage == Stage::Done
    }

    /// Times `node` has been entered so far.
    pub fn count(&self, node: NodeId) -> u64 {
        self.counts[node]
    }

    /// The node the cursor will consider next within the current bin, before
    /// guard evaluation.
    pub fn upcoming(&self) -> Option<NodeId> {
        self.stack
            .iter()
            .rev()
            .find_map(|f| f.items.get(f.pos).copied())
    }

    /// Path of group nodes enclosing the cursor, outermost first.
    pub fn open_groups(&self) -> Vec<NodeId> {
        self.stack.iter().filter_map(|f| f.group).collect()
    }

    /// Switches to the TERMINATE bin after the current step; used for
    /// requested shutdowns.
    pub fn terminate(&mut self) {
        if matches!(self.stage, Stage::Setup | Stage::Evolving) {
            self.stack.clear();
            self.queue = [Bin::Terminate].into_iter().collect();
            self.stage = Stage::Terminating;
        }
    }

    pub fn next_step(
        &mut self,
        tree: &ScheduleTree,
        eval: &mut dyn Evaluator,
    ) -> Result<Step, ScheduleError> {
        loop {
            let Some(top) = self.stack.last_mut() else {
                if let Some(bin) = self.queue.pop_front() {
                    self.bin = Some(bin);
                    let items = tree.bins[bin_slot(bin)].1.clone();
                    self.stack.push(Frame {
                        items,
                        pos: 0,
                        in_while: false,
                        group: None,
                    });
                    continue;
                }
                match self.stage {
                    Stage::Setup | Stage::Evolving => {
                        if eval.continue_evolution(self.iteration + 1) {
                            self.iteration += 1;
                            self.stage = Stage::Evolving;
                            self.queue = EVOLUTION_BINS.into_iter().collect();
                            return Ok(Step::IterationBoundary {
                                iteration: self.iteration,
                            });
                        }
                        self.stage = Stage::Terminating;
                        self.queue = [Bin::Terminate].into_iter().collect();
                        continue;
                    }
                    Stage::Terminating => {
                        self.stage = Stage::Done;
                        self.bin = None;
                        return Ok(Step::Done);
                    }
                    Stage::Done => return Ok(Step::Done),
                }
            };
            let bin = self.bin.expect("bin set while frames are open");
            if top.pos >= top.items.len() {
                let frame = self.stack.pop().unwrap();
                return Ok(match frame.group {
                    Some(node) => Step::GroupExit { node, bin },
                    None => Step::BinBoundary {
                        bin,
                        iteration: self.iteration,
                    },
                });
            }
            let id = top.items[top.pos];
            let node = &tree.nodes[id];
            let guard_err = |message: String| ScheduleError::Guard {
                item: node.label(),
                message,
            };
            if !top.in_while {
                if let Some(g) = &node.if_guard {
                    if !eval.guard(g).map_err(guard_err)? {
                        top.pos += 1;
                        continue;
                    }
                }
            }
            if let Some(g) = &node.while_guard {
                if !eval.guard(g).map_err(guard_err)? {
                    top.pos += 1;
                    top.in_while = false;
                    continue;
                }
                top.in_while = true;
            } else {
                top.pos += 1;
            }
            self.counts[id] += 1;
            if node.item.is_group {
                self.stack.push(Frame {
                    items: node.children.clone(),
                    pos: 0,
                    in_while: false,
                    group: Some(id),
                });
                return Ok(Step::GroupEnter { node: id, bin });
            }
            return Ok(Step::Call {
                node: id,
                bin,
                iteration: self.iteration,
            });
        }
    }
}

/// Deterministic indented listing of the tree.
pub fn dump_schedule(tree: &ScheduleTree, config: &Configuration) -> String {
    let mut out = String::new();
    for (bin, list) in &tree.bins {
        let _ = writeln!(out, "{bin}");
        for &id in list {
            dump_node(tree, config, id, 1, &mut out);
        }
    }
    out
}

fn dump_node(
    tree: &ScheduleTree,
    config: &Configuration,
    id: NodeId,
    depth: usize,
    out: &mut String,
) {
    let n = &tree.nodes[id];
    let names = |ids: &[VarId]| {
        ids.iter()
            .map(|v| config.variable(*v).full_name())
            .collect::<Vec<_>>()
            .join(", ")
    };
    let mut line = format!(
        "{}{}{}",
        "  ".repeat(depth),
        if n.item.is_group { "GROUP " } else { "" },
        n.label()
    );
    if let Some(q) = &n.item.if_condition {
        let _ = write!(line, "  IF {q}");
    }
    if let Some(q) = &n.item.while_condition {
        let _ = write!(line, "  WHILE {q}");
    }
    if !n.storage.is_empty() {
        let s: Vec<String> = n
            .storage
            .iter()
            .map(|(v, tl)| match tl {
                Some(t) => format!("{}[{t}]", config.variable(*v).full_name()),
                None => config.variable(*v).full_name(),
            })
            .collect();
        let _ = write!(line, "  STORAGE: {}", s.join(", "));
    }
    if !n.sync.is_empty() {
        let _ = write!(line, "  SYNC: {}", names(&n.sync));
    }
    let _ = write!(line, "  \"{}\"", n.item.description);
    let _ = writeln!(out, "{line}");
    for &c in &n.children {
        dump_node(tree, config, c, depth + 1, out);
    }
}

#[cfg(test)]
mod tests {
    use std::path::Path;

    use super::*;
    use crate::ccl::{parse_parameter_file, ThornManifest};
    use crate::flesh::assemble;

    fn config(schedule: &str) -> Configuration {
        let m = ThornManifest::from_texts(
            "t",
            "implements: t\nINT counter TYPE=SCALAR \"c\"",
            "BOOLEAN flag \"f\" { } no",
            schedule,
            Path::new("t"),
        )
        .unwrap();
        assemble(&[m], &parse_parameter_file("ActiveThorns = \"t\"").unwrap()).unwrap()
    }

    fn evol_names(tree: &ScheduleTree) -> Vec<String> {
        tree.bins[Bin::Evol.index()]
            .1
            .iter()
            .map(|&i| tree.nodes[i].item.name.clone())
            .collect()
    }

    #[test]
    fn after_chain() {
        let cfg = config("schedule C AT evol AFTER B {} \"c\"\nschedule B AT evol AFTER A {} \"b\"\nschedule A AT evol {} \"a\"");
        assert_eq!(evol_names(&build_schedule(&cfg).unwrap()), ["A", "B", "C"]);
    }

    #[test]
    fn cycle_names_members() {
        let cfg =
            config("schedule A AT evol AFTER B {} \"a\"\nschedule B AT evol AFTER A {} \"b\"");
        let err = build_schedule(&cfg).unwrap_err();
        let ScheduleError::Cycle { members, .. } = &err else {
            panic!("{err}")
        };
        assert_eq!(members, &["t::A", "t::B", "t::A"]);
    }

    #[test]
    fn unknown_reference_warns() {
        let cfg = config("schedule A AT evol AFTER missing {} \"a\"");
        let tree = build_schedule(&cfg).unwrap();
        assert_eq!(tree.warnings.len(), 1);
        assert_eq!(tree.warnings[0].0, 2);
    }

    #[test]
    fn nested_group() {
        let cfg = config(
            "schedule GROUP my_analysis AT analysis {} \"g\"\nschedule X IN my_analysis {} \"x\"",
        );
        let tree = build_schedule(&cfg).unwrap();
        let g = tree.bins[Bin::Analysis.index()].1[0];
        assert_eq!(tree.nodes[g].children.len(), 1);
        assert_eq!(tree.nodes[tree.nodes[g].children[0]].item.name, "X");
    }

    #[test]
    fn missing_group() {
        let cfg = config("schedule X IN nowhere {} \"x\"");
        assert!(matches!(
            build_schedule(&cfg),
            Err(ScheduleError::UnknownGroup { .. })
        ));
    }

    #[test]
    fn self_nested_groups() {
        let cfg = config("schedule GROUP g1 IN g2 {} \"a\"\nschedule GROUP g2 IN g1 {} \"b\"");
        assert!(matches!(
            build_schedule(&cfg),
            Err(ScheduleError::GroupCycle(_))
        ));
    }

    struct Counter {
        counter: i64,
        iterations: u64,
        flag: bool,
    }

    impl Evaluator for Counter {
        fn guard(&mut self, g: &Guard) -> Result<bool, String> {
            Ok(match g {
                Guard::Scalar(_) => self.counter > 0,
                Guard::Param(_) => self.flag,
            })
        }
        fn continue_evolution(&mut self, next: u64) -> bool {
            next <= self.iterations
        }
    }

    fn trace(tree: &ScheduleTree, eval: &mut Counter) -> Vec<Step> {
        let mut c = ScheduleCursor::new(tree);
        let mut out = Vec::new();
        loop {
            let s = c.next_step(tree, eval).unwrap();
            if let Step::Call { node, .. } = s {
                if tree.nodes[node].item.name == "dec" {
                    eval.counter -= 1;
                }
            }
            out.push(s.clone());
            if s == Step::Done {
                return out;
            }
        }
    }

    #[test]
    fn while_scalar_counts_down() {
        let cfg = config("schedule dec AT initial WHILE counter {} \"d\"");
        let tree = build_schedule(&cfg).unwrap();
        let steps = trace(
            &tree,
            &mut Counter {
                counter: 3,
                iterations: 0,
                flag: false,
            },
        );
        assert_eq!(
            steps
                .iter()
                .filter(|s| matches!(s, Step::Call { .. }))
                .count(),
            3
        );
    }

    #[test]
    fn if_false_never_runs_and_empty_evol_iterates() {
        let cfg = config("schedule r AT evol IF flag {} \"r\"");
        let tree = build_schedule(&cfg).unwrap();
        let steps = trace(
            &tree,
            &mut Counter {
                counter: 0,
                iterations: 5,
                flag: false,
            },
        );
        assert_eq!(
            steps
                .iter()
                .filter(|s| matches!(s, Step::Call { .. }))
                .count(),
            0
        );
        assert_eq!(
            steps
                .iter()
                .filter(|s| matches!(s, Step::IterationBoundary { .. }))
                .count(),
            5
        );
        let steps = trace(
            &tree,
            &mut Counter {
                counter: 0,
                iterations: 5,
                flag: true,
            },
        );
        assert_eq!(
            steps
                .iter()
                .filter(|s| matches!(s, Step::Call { .. }))
                .count(),
            5
        );
    }

    #[test]
    fn guard_type_checked() {
        let m = ThornManifest::from_texts(
            "t",
            "implements: t",
            "REAL speed \"s\" { (*:*) :: \"any\" } 1.0",
            "schedule s AT evol IF speed {} \"s\"",
            Path::new("t"),
        )
        .unwrap();
        let cfg = assemble(&[m], &parse_parameter_file("ActiveThorns = \"t\"").unwrap()).unwrap();
        assert!(matches!(
            build_schedule(&cfg),
            Err(ScheduleError::Guard { .. })
        ));
    }

    #[test]
    fn dump_is_stable() {
        let cfg =
            config("schedule GROUP g AT evol WHILE counter {} \"g\"\nschedule X IN g {} \"x\"");
        let tree = build_schedule(&cfg).unwrap();
        let text = dump_schedule(&tree, &cfg);
        assert_eq!(text, dump_schedule(&build_schedule(&cfg).unwrap(), &cfg));
        assert!(text.contains("  GROUP t::g  WHILE counter  \"g\"\n    t::X  \"x\""));
    }
}
