//! Runs an assembled configuration: walks the schedule, dispatches routines
//! over the driver's blocks, applies steering at iteration boundaries and
//! honours execution-control commands.

mod code;
mod context;
mod control;
mod slice;

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

pub use code::{CodeRegistry, ExactSolution, Routine, RoutineError, ThornCode};
pub use context::{GlobalCtx, LocalCtx, Params};
pub use control::{
    Command, ControlError, ControlState, RunControl, Slice, SliceAxis, SliceError, SliceSpec,
};
pub use slice::build_slice;

use crate::ccl::{Bin, GroupKind, ParamValue, ParameterFile, ThornManifest};
use crate::driver::{decompose, DomainSpec, DriverError, GridHierarchy, VarStorage};
use crate::flesh::{
    archive_provenance, assemble, warn, Configuration, Database, FleshError, Origin, ParamValues,
    ParameterTable, RunStatus, VarId, WarnAction, WarningEvent, WarningLog,
};
use crate::schedule::{
    build_schedule, Evaluator, Guard, NodeId, ScheduleCursor, ScheduleError, ScheduleTree, Step,
};
use context::Effects;
use control::{Checkpoint, Decision};

/// Interface name every grid driver thorn implements.
pub const DRIVER_INTERFACE: &str = "driver";

/// A local routine's result on one rank, with the warnings it raised.
type RankResult = (Result<(), RoutineError>, Vec<(u32, String)>);

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Warnings at or below this level are fatal.
    pub error_level: u32,
    /// Where output, masks, trace and provenance go; `None` writes nothing.
    pub output_dir: Option<PathBuf>,
    /// Overrides the driver's `nprocs`.
    pub nprocs: Option<usize>,
    pub provenance: bool,
    /// Print warnings to standard output as they happen.
    pub echo_warnings: bool,
    pub start_paused: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            error_level: 0,
            output_dir: None,
            nprocs: None,
            provenance: true,
            echo_warnings: false,
            start_paused: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum SetupError {
    #[error(transparent)]
    Flesh(#[from] FleshError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Driver(#[from] DriverError),
    #[error("no code registered for routine {routine} of thorn {thorn}")]
    MissingCode { thorn: String, routine: String },
    #[error("no active thorn implements `{DRIVER_INTERFACE}`")]
    NoDriver,
    #[error("{0}")]
    Config(String),
    #[error("fatal warning during startup: {0}")]
    Fatal(WarningEvent),
    #[error("I/O error: {0}")]
    Io(String),
}

/// How a run ended.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", content = "detail", rename_all = "lowercase")]
pub enum RunOutcome {
    Completed,
    /// Stopped cleanly on request.
    Terminated,
    Fatal(WarningEvent),
    Aborted(String),
    Error(String),
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunOutcome::Completed | RunOutcome::Terminated => 0,
            _ => 1,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            RunOutcome::Completed => "completed",
            RunOutcome::Terminated => "terminated",
            RunOutcome::Fatal(_) => "fatal",
            RunOutcome::Aborted(_) => "aborted",
            RunOutcome::Error(_) => "error",
        }
    }
}

impl fmt::Display for RunOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunOutcome::Fatal(e) => write!(f, "fatal: {e}"),
            RunOutcome::Aborted(m) => write!(f, "aborted: {m}"),
            RunOutcome::Error(m) => write!(f, "error: {m}"),
            other => f.write_str(other.label()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEntry {
    pub iteration: u64,
    pub bin: Bin,
    pub thorn: String,
    pub routine: String,
}

impl fmt::Display for TraceEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "I={} BIN={} {}::{}",
            self.iteration, self.bin, self.thorn, self.routine
        )
    }
}

/// Driver settings fixed at startup.
#[derive(Debug, Clone, Serialize)]
pub struct DriverSettings {
    pub thorn: String,
    pub domain: DomainSpec,
    pub poison_new_memory: bool,
    pub poison_value: f64,
    pub courant_limit: f64,
    pub dt: f64,
    pub max_iterations: u64,
}

fn read_driver(
    values: &ParamValues,
    thorn: &str,
    nprocs: Option<usize>,
) -> Result<DriverSettings, SetupError> {
    let get = |name: &str| -> Result<&ParamValue, SetupError> {
        values.get(thorn, name).ok_or_else(|| {
            SetupError::Config(format!("driver thorn {thorn} lacks parameter {name}"))
        })
    };
    let real = |name: &str| {
        get(name).and_then(|v| {
            v.as_f64()
                .ok_or_else(|| SetupError::Config(format!("{thorn}::{name} must be numeric")))
        })
    };
    let int = |name: &str| {
        get(name).and_then(|v| {
            v.as_i64()
                .ok_or_else(|| SetupError::Config(format!("{thorn}::{name} must be INT")))
        })
    };
    let boolean = |name: &str| {
        get(name).and_then(|v| {
            v.as_bool()
                .ok_or_else(|| SetupError::Config(format!("{thorn}::{name} must be BOOLEAN")))
        })
    };
    let count = |name: &str| int(name).map(|v| v.max(0) as usize);

    let domain = DomainSpec {
        dims: count("dims")?,
        lower: [real("xmin")?, real("ymin")?, real("zmin")?],
        upper: [real("xmax")?, real("ymax")?, real("zmax")?],
        points: [count("nx")?, count("ny")?, count("nz")?],
        ghost_width: count("ghost_width")?,
        nprocs: nprocs.unwrap_or(count("nprocs")?),
        convergence_level: int("convergence_level")?.max(0) as u32,
        convergence_factor: real("convergence_factor")?,
    };
    let geometry = domain.geometry()?;
    let mut dt = real("dtfac")? * geometry.min_dx();
    let final_time = real("final_time")?;
    let max_iterations = if final_time > 0.0 {
        let steps = ((final_time / dt) - 1e-9).ceil().max(1.0) as u64;
        dt = final_time / steps as f64;
        steps
    } else {
        int("max_iterations")?.max(0) as u64
    };
    Ok(DriverSettings {
        thorn: thorn.to_string(),
        domain,
        poison_new_memory: boolean("poison_new_memory")?,
        poison_value: real("poison_value")?,
        courant_limit: real("courant_limit")?,
        dt,
        max_iterations,
    })
}

/// A configured run.
pub struct Simulation {
    config: Arc<Configuration>,
    tree: Arc<ScheduleTree>,
    registry: Arc<CodeRegistry>,
    hierarchy: GridHierarchy,
    cursor: ScheduleCursor,
    log: WarningLog,
    control: Arc<RunControl>,
    db: Database,
    settings: DriverSettings,
    params: ParamValues,
    iteration: u64,
    time: f64,
    terminate_requested: bool,
    trace: Vec<TraceEntry>,
    output_dir: Option<PathBuf>,
    out_vars: Vec<VarId>,
    outcome: Option<RunOutcome>,
}

impl Simulation {
    /// Assembles the thorns named in `pf` and prepares the grid. Nothing
    /// runs until [`Simulation::run`] or [`Simulation::advance`].
    pub fn new(
        available: &[ThornManifest],
        pf: &ParameterFile,
        registry: Arc<CodeRegistry>,
        options: RunOptions,
    ) -> Result<Simulation, SetupError> {
        let config = assemble(available, pf)?;
        let log = WarningLog::new(options.error_level, options.echo_warnings);
        let emit = |origin: &str, findings: &[(u32, String)]| -> Result<(), SetupError> {
            for (level, message) in findings {
                if warn(
                    &log,
                    *level,
                    Origin::new("flesh", origin),
                    0,
                    message.clone(),
                ) == WarnAction::Fatal
                {
                    return Err(SetupError::Fatal(log.all().pop().unwrap()));
                }
            }
            Ok(())
        };
        emit("bind_parameters", &config.startup_warnings)?;
        let tree = build_schedule(&config)?;
        emit("build_schedule", &tree.warnings)?;

        for n in tree.nodes.iter().filter(|n| !n.item.is_group) {
            if registry.routine(&n.thorn, &n.item.name).is_none() {
                return Err(SetupError::MissingCode {
                    thorn: n.thorn.clone(),
                    routine: n.item.name.clone(),
                });
            }
        }

        let driver = config
            .active_thorns
            .iter()
            .find(|m| m.implements().eq_ignore_ascii_case(DRIVER_INTERFACE))
            .ok_or(SetupError::NoDriver)?
            .thorn_name
            .clone();
        let params = config.parameters.read().unwrap().values();
        let settings = read_driver(&params, &driver, options.nprocs)?;
        let geometry = settings.domain.geometry()?;
        for v in &config.variables {
            if let Some(d) = v.group.dims.filter(|_| v.group.kind != GroupKind::Scalar) {
                if d as usize != geometry.dims {
                    return Err(SetupError::Config(format!(
                        "variable {} has DIM={d} but the grid has {} dimensions",
                        v.full_name(),
                        geometry.dims
                    )));
                }
            }
        }
        let patches = decompose(
            &geometry,
            settings.domain.nprocs,
            settings.domain.ghost_width,
        )?;
        let vars = config
            .variables
            .iter()
            .map(|v| VarStorage {
                name: v.full_name(),
                kind: v.group.kind,
                declared_timelevels: v.group.timelevels as usize,
                active: 0,
            })
            .collect();
        let poison = settings.poison_new_memory.then_some(settings.poison_value);
        let hierarchy =
            GridHierarchy::new(geometry, patches, settings.domain.ghost_width, vars, poison);

        let out_vars = match params.get(&driver, "out_vars").and_then(ParamValue::as_str) {
            Some(list) => list
                .split_whitespace()
                .map(|name| {
                    config
                        .variable_by_full_name(name)
                        .map(|v| v.id)
                        .ok_or_else(|| {
                            SetupError::Config(format!("out_vars names unknown variable `{name}`"))
                        })
                })
                .collect::<Result<_, _>>()?,
            None => Vec::new(),
        };

        let config = Arc::new(config);
        let tree = Arc::new(tree);
        if let Some(dir) = &options.output_dir {
            fs::create_dir_all(dir)
                .map_err(|e| SetupError::Io(format!("{}: {e}", dir.display())))?;
            if options.provenance {
                archive_provenance(&config, pf, &registry.sources(), &dir.join("provenance"))
                    .map_err(|e| SetupError::Io(e.to_string()))?;
            }
        }

        let control = Arc::new(RunControl::new());
        if options.start_paused {
            control.start_paused();
        }
        let db = Database::new(config.clone(), tree.clone());
        let cursor = ScheduleCursor::new(&tree);
        let sim = Simulation {
            config,
            tree,
            registry,
            hierarchy,
            cursor,
            log,
            control,
            db,
            settings,
            params,
            iteration: 0,
            time: 0.0,
            terminate_requested: false,
            trace: Vec::new(),
            output_dir: options.output_dir,
            out_vars,
            outcome: None,
        };
        sim.publish(sim.control.state(), false);
        Ok(sim)
    }

    pub fn config(&self) -> &Arc<Configuration> {
        &self.config
    }

    pub fn tree(&self) -> &Arc<ScheduleTree> {
        &self.tree
    }

    pub fn hierarchy(&self) -> &GridHierarchy {
        &self.hierarchy
    }

    pub fn settings(&self) -> &DriverSettings {
        &self.settings
    }

    pub fn database(&self) -> Database {
        self.db.clone()
    }

    pub fn control(&self) -> Arc<RunControl> {
        self.control.clone()
    }

    pub fn warnings(&self) -> WarningLog {
        self.log.clone()
    }

    pub fn parameters(&self) -> Arc<RwLock<ParameterTable>> {
        self.config.parameters.clone()
    }

    /// Parameter values visible to routines in the current iteration.
    pub fn params(&self) -> &ParamValues {
        &self.params
    }

    pub fn trace(&self) -> &[TraceEntry] {
        &self.trace
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn outcome(&self) -> Option<&RunOutcome> {
        self.outcome.as_ref()
    }

    pub fn variable(&self, name: &str) -> Option<VarId> {
        self.config.variable_by_full_name(name).map(|v| v.id)
    }

    /// Runs to the end and reports how it finished.
    pub fn run(&mut self) -> RunOutcome {
        while self.advance().is_some() {}
        self.outcome.clone().expect("finished run has an outcome")
    }

    /// Performs one schedule step. Returns `None` once the run is over.
    pub fn advance(&mut self) -> Option<Step> {
        if self.outcome.is_some() {
            return None;
        }
        let step = {
            let mut eval = Eval {
                params: &self.params,
                hierarchy: &self.hierarchy,
                control: &self.control,
                max_iterations: self.settings.max_iterations,
                terminate: &mut self.terminate_requested,
                probe: Probe {
                    config: &self.config,
                    hierarchy: &self.hierarchy,
                    status: &self.db.status,
                    iteration: self.iteration,
                    time: self.time,
                    bin: self.cursor.bin(),
                    next_item: None,
                    trace_len: self.trace.len(),
                },
            };
            self.cursor.next_step(&self.tree, &mut eval)
        };
        let step = match step {
            Ok(s) => s,
            Err(e) => {
                self.finish(RunOutcome::Error(e.to_string()));
                return None;
            }
        };
        let result = match &step {
            Step::IterationBoundary { iteration } => self.begin_iteration(*iteration),
            Step::Call { node, bin, .. } => self.call(*node, *bin),
            Step::GroupEnter { node, .. } => self.apply_storage(*node),
            Step::GroupExit { node, .. } => self.sync_after(*node),
            Step::BinBoundary {
                bin: Bin::Analysis, ..
            } => self.end_of_iteration(),
            Step::BinBoundary { .. } => Ok(()),
            Step::Done => Err(if self.terminate_requested {
                RunOutcome::Terminated
            } else {
                RunOutcome::Completed
            }),
        };
        if let Err(outcome) = result {
            self.finish(outcome);
        }
        Some(step)
    }

    fn finish(&mut self, outcome: RunOutcome) {
        if let Some(dir) = &self.output_dir {
            let text: String = self.trace.iter().map(|t| format!("{t}\n")).collect();
            if let Err(e) = fs::write(dir.join("trace.log"), text) {
                eprintln!("cannot write trace: {e}");
            }
        }
        self.control.finish();
        let mut status = self.status_snapshot(ControlState::Finished, false);
        status.state = outcome.label().to_string();
        *self.db.status.write().unwrap() = status;
        self.outcome = Some(outcome);
    }

    fn status_snapshot(&self, state: ControlState, waiting: bool) -> RunStatus {
        RunStatus {
            iteration: self.iteration,
            time: self.time,
            state: state.name().to_string(),
            bin: self.cursor.bin().map(|b| b.name().to_string()),
            next_item: self.cursor.upcoming().map(|n| self.tree.nodes[n].label()),
            trace_len: self.trace.len(),
            waiting,
        }
    }

    fn publish(&self, state: ControlState, waiting: bool) {
        *self.db.status.write().unwrap() = self.status_snapshot(state, waiting);
    }

    fn begin_iteration(&mut self, iteration: u64) -> Result<(), RunOutcome> {
        {
            let mut table = self.config.parameters.write().unwrap();
            table.begin_iteration(iteration);
            self.params = table.values();
        }
        self.iteration = iteration;
        self.time = iteration as f64 * self.settings.dt;
        for i in 0..self.hierarchy.vars.len() {
            if self.hierarchy.vars[i].active >= 2 {
                self.hierarchy
                    .rotate(VarId(i))
                    .map_err(|e| RunOutcome::Error(e.to_string()))?;
            }
        }
        self.publish(self.control.state(), false);
        Ok(())
    }

    fn apply_storage(&mut self, node: NodeId) -> Result<(), RunOutcome> {
        let n = &self.tree.nodes[node];
        for &(v, tl) in &n.storage {
            let levels = tl
                .map(|t| t as usize)
                .unwrap_or(self.hierarchy.vars[v.0].declared_timelevels);
            self.hierarchy
                .enable_storage(v, levels)
                .map_err(|e| RunOutcome::Error(format!("{}: {e}", n.label())))?;
        }
        Ok(())
    }

    fn sync_after(&mut self, node: NodeId) -> Result<(), RunOutcome> {
        let n = &self.tree.nodes[node];
        for &v in &n.sync {
            self.hierarchy
                .sync(v)
                .map_err(|e| RunOutcome::Error(format!("{}: SYNC {e}", n.label())))?;
        }
        Ok(())
    }

    fn call(&mut self, node: NodeId, bin: Bin) -> Result<(), RunOutcome> {
        let probe = Probe {
            config: &self.config,
            hierarchy: &self.hierarchy,
            status: &self.db.status,
            iteration: self.iteration,
            time: self.time,
            bin: Some(bin),
            next_item: Some(self.tree.nodes[node].label()),
            trace_len: self.trace.len(),
        };
        if probe.checkpoint(&self.control, Checkpoint::Item) == Decision::Terminate {
            self.terminate_requested = true;
        }
        self.apply_storage(node)?;

        let tree = self.tree.clone();
        let n = &tree.nodes[node];
        let routine = self
            .registry
            .routine(&n.thorn, &n.item.name)
            .cloned()
            .ok_or_else(|| RunOutcome::Error(format!("no code for {}", n.label())))?;
        let (thorn, name) = (n.thorn.as_str(), n.item.name.as_str());
        let origin = || Origin::new(thorn, name);
        match routine {
            Routine::Local(f) => {
                let (config, params) = (&*self.config, &self.params);
                let (iteration, time, dt) = (self.iteration, self.time, self.settings.dt);
                let results: Vec<RankResult> = self
                    .hierarchy
                    .rank_views()
                    .into_par_iter()
                    .map(|view| {
                        let mut ctx = LocalCtx {
                            thorn,
                            routine: name,
                            config,
                            view,
                            params,
                            iteration,
                            time,
                            dt,
                            warnings: Vec::new(),
                        };
                        let r = f(&mut ctx);
                        (r, ctx.warnings)
                    })
                    .collect();
                let mut fatal = None;
                for (_, warnings) in &results {
                    for (level, message) in warnings {
                        if warn(&self.log, *level, origin(), self.iteration, message.clone())
                            == WarnAction::Fatal
                            && fatal.is_none()
                        {
                            fatal = self.log.all().pop();
                        }
                    }
                }
                if let Some((rank, (Err(e), _))) =
                    results.iter().enumerate().find(|(_, (r, _))| r.is_err())
                {
                    return Err(RunOutcome::Error(format!(
                        "{} on rank {rank}: {e}",
                        n.label()
                    )));
                }
                if let Some(event) = fatal {
                    return Err(RunOutcome::Fatal(event));
                }
            }
            Routine::Global(f) => {
                let mut effects = Effects::default();
                let mut ctx = GlobalCtx {
                    thorn,
                    routine: name,
                    config: &self.config,
                    hierarchy: &mut self.hierarchy,
                    params: &self.params,
                    iteration: self.iteration,
                    time: self.time,
                    dt: self.settings.dt,
                    log: &self.log,
                    effects: &mut effects,
                    output_dir: self.output_dir.as_deref(),
                    courant_limit: self.settings.courant_limit,
                };
                let r = f(&mut ctx);
                if let Err(e) = r {
                    return Err(RunOutcome::Error(format!("{}: {e}", n.label())));
                }
                if let Some(event) = effects.fatal {
                    return Err(RunOutcome::Fatal(event));
                }
                if let Some(reason) = effects.abort {
                    return Err(RunOutcome::Aborted(reason));
                }
                if effects.terminate {
                    self.terminate_requested = true;
                }
            }
        }
        self.sync_after(node)?;
        self.trace.push(TraceEntry {
            iteration: self.iteration,
            bin,
            thorn: thorn.to_string(),
            routine: name.to_string(),
        });
        self.publish(self.control.state(), false);
        Ok(())
    }

    /// Output, checksums and the poison check after the last ANALYSIS item
    /// of an iteration.
    fn end_of_iteration(&mut self) -> Result<(), RunOutcome> {
        let driver = self.settings.thorn.clone();
        let int = |name: &str| {
            self.params
                .get(&driver, name)
                .and_then(ParamValue::as_i64)
                .unwrap_or(0)
        };
        let err = |e: DriverError| RunOutcome::Error(e.to_string());
        let (out_every, checksum_every) = (int("out_every"), int("checksum_every"));
        let it = self.iteration;

        if let Some(dir) = &self.output_dir {
            if out_every > 0 && it.is_multiple_of(out_every as u64) {
                for &v in &self.out_vars {
                    if self.hierarchy.has_storage(v) {
                        self.hierarchy
                            .write_ascii(v, dir, it, self.time)
                            .map_err(err)?;
                    }
                }
            }
            if checksum_every > 0 && it.is_multiple_of(checksum_every as u64) {
                let mut lines = String::new();
                for i in 0..self.hierarchy.vars.len() {
                    let v = VarId(i);
                    if self.hierarchy.has_storage(v)
                        && self.hierarchy.vars[i].kind != GroupKind::Scalar
                    {
                        let sum = self.hierarchy.checksum(v, 0).map_err(err)?;
                        lines.push_str(&format!(
                            "{it} {} {sum:016x}\n",
                            self.hierarchy.vars[i].name
                        ));
                    }
                }
                append(&dir.join("checksums.txt"), &lines)
                    .map_err(|e| RunOutcome::Error(e.to_string()))?;
            }
        }

        let check = self
            .params
            .get(&driver, "check_for_poison")
            .and_then(ParamValue::as_bool)
            .unwrap_or(false);
        if check {
            let poison = self.settings.poison_value;
            for i in 0..self.hierarchy.vars.len() {
                let v = VarId(i);
                if !self.hierarchy.has_storage(v)
                    || self.hierarchy.vars[i].kind == GroupKind::Scalar
                {
                    continue;
                }
                let hits = self.hierarchy.find_poison(v, 0, poison).map_err(err)?;
                // One warning per point, so the report names the full set.
                for hit in hits {
                    let dims = self.hierarchy.geometry.dims;
                    let index: Vec<String> =
                        hit.index[..dims].iter().map(ToString::to_string).collect();
                    let group = &self.config.variable(v).group.name;
                    let message = format!(
                        "At iteration {it}: timelevel 0, component {}, variable \"{group}\" contains poison at [{}]",
                        hit.rank,
                        index.join(",")
                    );
                    if warn(
                        &self.log,
                        1,
                        Origin::new(&driver, "check_poison"),
                        it,
                        message,
                    ) == WarnAction::Fatal
                    {
                        return Err(RunOutcome::Fatal(self.log.all().pop().unwrap()));
                    }
                }
            }
        }
        self.publish(self.control.state(), false);
        Ok(())
    }
}

fn append(path: &Path, text: &str) -> std::io::Result<()> {
    let mut f = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)?;
    f.write_all(text.as_bytes())
}

/// Everything a checkpoint needs to answer slices and publish status.
struct Probe<'a> {
    config: &'a Configuration,
    hierarchy: &'a GridHierarchy,
    status: &'a RwLock<RunStatus>,
    iteration: u64,
    time: f64,
    bin: Option<Bin>,
    next_item: Option<String>,
    trace_len: usize,
}

impl Probe<'_> {
    fn checkpoint(&self, control: &RunControl, kind: Checkpoint) -> Decision {
        control.checkpoint(
            kind,
            &|spec| build_slice(self.config, self.hierarchy, spec, self.iteration),
            &|state, waiting| {
                *self.status.write().unwrap() = RunStatus {
                    iteration: self.iteration,
                    time: self.time,
                    state: state.name().to_string(),
                    bin: self.bin.map(|b| b.name().to_string()),
                    next_item: self.next_item.clone(),
                    trace_len: self.trace_len,
                    waiting,
                };
            },
        )
    }
}

struct Eval<'a> {
    params: &'a ParamValues,
    hierarchy: &'a GridHierarchy,
    control: &'a RunControl,
    max_iterations: u64,
    terminate: &'a mut bool,
    probe: Probe<'a>,
}

impl Evaluator for Eval<'_> {
    fn guard(&mut self, guard: &Guard) -> Result<bool, String> {
        match guard {
            Guard::Param(key) => self
                .params
                .get_key(key)
                .and_then(ParamValue::truthy)
                .ok_or_else(|| format!("parameter {key} is not BOOLEAN or INT")),
            Guard::Scalar(v) => self
                .hierarchy
                .scalar(*v, 0)
                .map(|x| x as i64 != 0)
                .map_err(|e| e.to_string()),
        }
    }

    fn continue_evolution(&mut self, next: u64) -> bool {
        if !*self.terminate && next <= self.max_iterations {
            self.probe.bin = None;
            self.probe.next_item = None;
            if self.probe.checkpoint(self.control, Checkpoint::Iteration) == Decision::Terminate {
                *self.terminate = true;
            }
        }
        !*self.terminate && next <= self.max_iterations
    }
}
