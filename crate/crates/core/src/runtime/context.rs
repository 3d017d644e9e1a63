use std::path::Path;

use super::code::RoutineError;
use crate::ccl::{ParamValue, QualifiedName};
use crate::driver::{
    check_timestep, Field, FieldMut, Geometry, GridHierarchy, Idx, IndexBox, Patch, RankView,
    ReduceOp,
};
use crate::flesh::{
    warn, Configuration, Origin, ParamValues, VarId, WarnAction, WarningEvent, WarningLog,
};

/// Parameter reads on behalf of one thorn, subject to visibility rules.
#[derive(Clone, Copy)]
pub struct Params<'a> {
    thorn: &'a str,
    config: &'a Configuration,
    values: &'a ParamValues,
}

impl<'a> Params<'a> {
    pub fn get(&self, name: &str) -> Result<&'a ParamValue, RoutineError> {
        let key = self
            .config
            .resolve_parameter(self.thorn, &QualifiedName::parse(name))?;
        self.values
            .get_key(&key)
            .ok_or_else(|| RoutineError::Failed(format!("parameter {key} has no value")))
    }

    fn typed<T>(
        &self,
        name: &str,
        what: &str,
        f: impl Fn(&'a ParamValue) -> Option<T>,
    ) -> Result<T, RoutineError> {
        let v = self.get(name)?;
        f(v).ok_or_else(|| RoutineError::Failed(format!("parameter {name} = {v} is not {what}")))
    }

    pub fn real(&self, name: &str) -> Result<f64, RoutineError> {
        self.typed(name, "numeric", ParamValue::as_f64)
    }

    pub fn int(&self, name: &str) -> Result<i64, RoutineError> {
        self.typed(name, "an INT", ParamValue::as_i64)
    }

    pub fn boolean(&self, name: &str) -> Result<bool, RoutineError> {
        self.typed(name, "a BOOLEAN", ParamValue::as_bool)
    }

    pub fn text(&self, name: &str) -> Result<&'a str, RoutineError> {
        self.typed(name, "a KEYWORD or STRING", ParamValue::as_str)
    }

    /// The raw snapshot, identical for every block in an iteration.
    pub fn snapshot(&self) -> &'a ParamValues {
        self.values
    }
}

/// What a routine sees when it runs on one rank's block.
pub struct LocalCtx<'a> {
    pub(crate) thorn: &'a str,
    pub(crate) routine: &'a str,
    pub(crate) config: &'a Configuration,
    pub(crate) view: RankView<'a>,
    pub(crate) params: &'a ParamValues,
    pub(crate) iteration: u64,
    pub(crate) time: f64,
    pub(crate) dt: f64,
    pub(crate) warnings: Vec<(u32, String)>,
}

impl LocalCtx<'_> {
    pub fn thorn(&self) -> &str {
        self.thorn
    }

    pub fn routine(&self) -> &str {
        self.routine
    }

    pub fn params(&self) -> Params<'_> {
        Params {
            thorn: self.thorn,
            config: self.config,
            values: self.params,
        }
    }

    pub fn var(&self, name: &str) -> Result<VarId, RoutineError> {
        Ok(self
            .config
            .resolve_variable(self.thorn, &QualifiedName::parse(name))?)
    }

    /// Copy of this block's buffer (owned points and ghosts).
    pub fn read(&self, name: &str, tl: usize) -> Result<Field, RoutineError> {
        let v = self.var(name)?;
        Ok(self.view.field(v, tl)?)
    }

    pub fn write(&mut self, name: &str, tl: usize) -> Result<FieldMut<'_>, RoutineError> {
        let v = self.var(name)?;
        Ok(self.view.field_mut(v, tl)?)
    }

    pub fn scalar(&self, name: &str) -> Result<f64, RoutineError> {
        let v = self.var(name)?;
        Ok(self.view.scalar(v, 0)?)
    }

    pub fn patch(&self) -> &Patch {
        self.view.patch
    }

    pub fn rank(&self) -> usize {
        self.view.patch.rank
    }

    pub fn owned(&self) -> IndexBox {
        self.view.patch.owned
    }

    pub fn geometry(&self) -> &Geometry {
        self.view.geometry
    }

    pub fn coord(&self, g: Idx) -> [f64; 3] {
        self.view.geometry.coord(g)
    }

    pub fn is_physical_boundary(&self, g: Idx) -> bool {
        self.view.geometry.is_physical_boundary(g)
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Queued and emitted after all blocks finish, in rank order.
    pub fn warn(&mut self, level: u32, message: impl Into<String>) {
        self.warnings.push((level, message.into()));
    }
}

/// Side effects a collective routine requests from the run loop.
#[derive(Debug, Default)]
pub(crate) struct Effects {
    pub fatal: Option<WarningEvent>,
    pub terminate: bool,
    pub abort: Option<String>,
}

/// What a routine sees when it runs once for the whole grid.
pub struct GlobalCtx<'a> {
    pub(crate) thorn: &'a str,
    pub(crate) routine: &'a str,
    pub(crate) config: &'a Configuration,
    pub(crate) hierarchy: &'a mut GridHierarchy,
    pub(crate) params: &'a ParamValues,
    pub(crate) iteration: u64,
    pub(crate) time: f64,
    pub(crate) dt: f64,
    pub(crate) log: &'a WarningLog,
    pub(crate) effects: &'a mut Effects,
    pub(crate) output_dir: Option<&'a Path>,
    pub(crate) courant_limit: f64,
}

impl GlobalCtx<'_> {
    pub fn thorn(&self) -> &str {
        self.thorn
    }

    pub fn routine(&self) -> &str {
        self.routine
    }

    pub fn params(&self) -> Params<'_> {
        Params {
            thorn: self.thorn,
            config: self.config,
            values: self.params,
        }
    }

    pub fn config(&self) -> &Configuration {
        self.config
    }

    pub fn var(&self, name: &str) -> Result<VarId, RoutineError> {
        Ok(self
            .config
            .resolve_variable(self.thorn, &QualifiedName::parse(name))?)
    }

    /// Read-only access for collective checks.
    pub fn hierarchy(&self) -> &GridHierarchy {
        self.hierarchy
    }

    pub fn geometry(&self) -> &Geometry {
        &self.hierarchy.geometry
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn output_dir(&self) -> Option<&Path> {
        self.output_dir
    }

    pub fn reduce(&self, name: &str, tl: usize, op: ReduceOp) -> Result<f64, RoutineError> {
        let v = self.var(name)?;
        Ok(self.hierarchy.reduce(v, tl, op)?)
    }

    pub fn checksum(&self, name: &str, tl: usize) -> Result<u64, RoutineError> {
        let v = self.var(name)?;
        Ok(self.hierarchy.checksum(v, tl)?)
    }

    pub fn gather(&self, name: &str, tl: usize) -> Result<Vec<f64>, RoutineError> {
        let v = self.var(name)?;
        Ok(self.hierarchy.gather(v, tl)?)
    }

    pub fn gather_points(
        &self,
        name: &str,
        tl: usize,
        points: &[Idx],
    ) -> Result<Vec<f64>, RoutineError> {
        let v = self.var(name)?;
        Ok(self.hierarchy.gather_points(v, tl, points)?)
    }

    /// Writes values on owners and on every ghost copy.
    pub fn scatter_points(
        &mut self,
        name: &str,
        tl: usize,
        values: &[(Idx, f64)],
    ) -> Result<(), RoutineError> {
        let v = self.var(name)?;
        Ok(self.hierarchy.scatter_points(v, tl, values)?)
    }

    pub fn sync(&mut self, name: &str) -> Result<(), RoutineError> {
        let v = self.var(name)?;
        Ok(self.hierarchy.sync(v)?)
    }

    pub fn scalar(&self, name: &str) -> Result<f64, RoutineError> {
        let v = self.var(name)?;
        Ok(self.hierarchy.scalar(v, 0)?)
    }

    pub fn set_scalar(&mut self, name: &str, value: f64) -> Result<(), RoutineError> {
        let v = self.var(name)?;
        Ok(self.hierarchy.set_scalar(v, 0, value)?)
    }

    /// Emits a warning now; a fatal one stops the run after this routine.
    pub fn warn(&mut self, level: u32, message: impl Into<String>) -> WarnAction {
        let message = message.into();
        let action = warn(
            self.log,
            level,
            Origin::new(self.thorn, self.routine),
            self.iteration,
            message.clone(),
        );
        if action == WarnAction::Fatal && self.effects.fatal.is_none() {
            self.effects.fatal = Some(WarningEvent {
                level,
                origin: Origin::new(self.thorn, self.routine),
                iteration: self.iteration,
                message,
            });
        }
        action
    }

    /// Finish the current iteration, run TERMINATE, and stop cleanly.
    pub fn request_terminate(&mut self) {
        self.effects.terminate = true;
    }

    /// Stop right after this routine with a failing exit status.
    pub fn request_abort(&mut self, reason: impl Into<String>) {
        self.effects.abort = Some(reason.into());
    }

    /// Courant check against the driver's `courant_limit`; a violation is a
    /// level-0 warning.
    pub fn check_timestep(&mut self, max_speed: f64) -> Result<f64, f64> {
        let limit = self.courant_limit;
        let dt = self.dt;
        let result = check_timestep(dt, max_speed, &self.hierarchy.geometry, limit);
        if let Err(factor) = result {
            let dx = self.hierarchy.geometry.min_dx();
            self.warn(
                0,
                format!("Courant factor {factor} exceeds courant_limit {limit} (speed {max_speed}, dt {dt}, dx {dx})"),
            );
        }
        result
    }
}
