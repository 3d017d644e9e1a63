use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use super::context::{GlobalCtx, LocalCtx};
use crate::driver::DriverError;
use crate::flesh::{FleshError, ParamValues, SourceFile};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RoutineError {
    #[error(transparent)]
    Access(#[from] FleshError),
    #[error(transparent)]
    Driver(#[from] DriverError),
    #[error("{0}")]
    Failed(String),
}

pub type LocalFn = dyn Fn(&mut LocalCtx<'_>) -> Result<(), RoutineError> + Send + Sync;
pub type GlobalFn = dyn Fn(&mut GlobalCtx<'_>) -> Result<(), RoutineError> + Send + Sync;
pub type ExactFn = dyn Fn(&ParamValues, [f64; 3], f64) -> f64 + Send + Sync;
pub type OrderFn = dyn Fn(&ParamValues) -> f64 + Send + Sync;

/// Compiled code behind a scheduled routine.
#[derive(Clone)]
pub enum Routine {
    /// Runs once per rank on that rank's block, possibly in parallel.
    Local(Arc<LocalFn>),
    /// Runs once, collectively, with access to reductions and exchanges.
    Global(Arc<GlobalFn>),
}

impl fmt::Debug for Routine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Routine::Local(_) => "Routine::Local",
            Routine::Global(_) => "Routine::Global",
        })
    }
}

/// Analytic solution of one variable, used by convergence tests.
#[derive(Clone)]
pub struct ExactSolution {
    /// Group name of the variable.
    pub variable: String,
    pub eval: Arc<ExactFn>,
    /// Expected convergence order for the configured parameters.
    pub order: Option<Arc<OrderFn>>,
}

impl fmt::Debug for ExactSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ExactSolution({})", self.variable)
    }
}

/// The routines, archived sources and optional exact solution of one thorn.
#[derive(Debug, Clone, Default)]
pub struct ThornCode {
    pub name: String,
    pub routines: BTreeMap<String, Routine>,
    pub sources: Vec<SourceFile>,
    pub exact: Option<ExactSolution>,
}

impl ThornCode {
    pub fn new(name: &str) -> Self {
        ThornCode {
            name: name.to_string(),
            ..Default::default()
        }
    }

    pub fn local(
        mut self,
        routine: &str,
        f: impl Fn(&mut LocalCtx<'_>) -> Result<(), RoutineError> + Send + Sync + 'static,
    ) -> Self {
        self.routines
            .insert(routine.to_string(), Routine::Local(Arc::new(f)));
        self
    }

    pub fn global(
        mut self,
        routine: &str,
        f: impl Fn(&mut GlobalCtx<'_>) -> Result<(), RoutineError> + Send + Sync + 'static,
    ) -> Self {
        self.routines
            .insert(routine.to_string(), Routine::Global(Arc::new(f)));
        self
    }

    pub fn source(mut self, path: &str, contents: &'static str) -> Self {
        self.sources.push(SourceFile {
            path: path.to_string(),
            contents,
        });
        self
    }

    pub fn exact(
        mut self,
        variable: &str,
        f: impl Fn(&ParamValues, [f64; 3], f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.exact = Some(ExactSolution {
            variable: variable.to_string(),
            eval: Arc::new(f),
            order: None,
        });
        self
    }

    /// Nominal order of accuracy; call after [`ThornCode::exact`].
    pub fn nominal_order(
        mut self,
        f: impl Fn(&ParamValues) -> f64 + Send + Sync + 'static,
    ) -> Self {
        if let Some(e) = self.exact.as_mut() {
            e.order = Some(Arc::new(f));
        }
        self
    }
}

/// Maps thorn names to their compiled code.
#[derive(Debug, Clone, Default)]
pub struct CodeRegistry {
    thorns: BTreeMap<String, ThornCode>,
}

impl CodeRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, code: ThornCode) -> &mut Self {
        self.thorns.insert(code.name.clone(), code);
        self
    }

    pub fn with(mut self, code: ThornCode) -> Self {
        self.register(code);
        self
    }

    pub fn thorn(&self, name: &str) -> Option<&ThornCode> {
        self.thorns.get(name)
    }

    pub fn routine(&self, thorn: &str, routine: &str) -> Option<&Routine> {
        self.thorns.get(thorn)?.routines.get(routine)
    }

    pub fn sources(&self) -> BTreeMap<String, Vec<SourceFile>> {
        self.thorns
            .iter()
            .map(|(k, v)| (k.clone(), v.sources.clone()))
            .collect()
    }

    pub fn exact_solutions(&self) -> impl Iterator<Item = (&str, &ExactSolution)> {
        self.thorns
            .iter()
            .filter_map(|(k, v)| v.exact.as_ref().map(|e| (k.as_str(), e)))
    }
}
