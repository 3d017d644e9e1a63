//! Regression tests against committed reference output, and measurement of
//! convergence orders.
//!
//! A regression case is a parameter file `thorns/<thorn>/test/<case>.par`
//! with its reference output in `thorns/<thorn>/test/<case>/`.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use regex::Regex;
use serde::Serialize;
use thiserror::Error;

use crate::ccl::{parse_parameter_file, CclError, QualifiedName, RawValue, ThornManifest};
use crate::driver::ExactSum;
use crate::flesh::VarId;
use crate::runtime::{CodeRegistry, RunOptions, SetupError, Simulation, DRIVER_INTERFACE};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Parse { path: String, source: CclError },
    #[error(transparent)]
    Setup(#[from] SetupError),
    #[error("run at convergence level {level} ended with {outcome}")]
    Run { level: u32, outcome: String },
    #[error("{0}")]
    Levels(String),
    #[error("grids are not nested: {0}")]
    NotNested(String),
    #[error("{0}")]
    Variable(String),
    #[error("I/O error: {0}")]
    Io(String),
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> HarnessError + '_ {
    move |e| HarnessError::Io(format!("{}: {e}", path.display()))
}

/// Numeric fields match if either bound holds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs: 1e-12,
            rel: 1e-12,
        }
    }
}

impl Tolerance {
    pub fn accepts(&self, produced: f64, reference: f64) -> bool {
        if produced.to_bits() == reference.to_bits() || (produced.is_nan() && reference.is_nan()) {
            return true;
        }
        let dev = (produced - reference).abs();
        dev <= self.abs || dev <= self.rel * reference.abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionCase {
    pub thorn: String,
    pub name: String,
    pub parfile: PathBuf,
    pub reference: PathBuf,
    pub tolerance: Tolerance,
}

impl RegressionCase {
    pub fn id(&self) -> String {
        format!("{}/{}", self.thorn, self.name)
    }
}

/// Finds every `test/*.par` of the given thorns (all when `only` is empty).
pub fn discover_cases(
    thorns: &[ThornManifest],
    only: &[String],
) -> Result<Vec<RegressionCase>, HarnessError> {
    let mut cases = Vec::new();
    for m in thorns {
        if !only.is_empty() && !only.iter().any(|t| t == &m.thorn_name) {
            continue;
        }
        let dir = m.source_dir.join("test");
        if !dir.is_dir() {
            continue;
        }
        let mut pars: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(io_err(&dir))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "par"))
            .collect();
        pars.sort();
        for parfile in pars {
            let name = parfile
                .file_stem()
                .unwrap_or_default()
                .to_string_lossy()
                .into_owned();
            cases.push(RegressionCase {
                thorn: m.thorn_name.clone(),
                reference: dir.join(&name),
                name,
                parfile,
                tolerance: Tolerance::default(),
            });
        }
    }
    if let Some(missing) = only
        .iter()
        .find(|t| !thorns.iter().any(|m| &m.thorn_name == *t))
    {
        return Err(HarnessError::Levels(format!("unknown thorn `{missing}`")));
    }
    Ok(cases)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseStatus {
    Pass,
    Fail,
    /// References were rewritten from this run.
    Blessed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseResult {
    pub case: String,
    pub status: CaseStatus,
    /// Largest deviation over all numeric fields; 0 for a bitwise match.
    pub max_abs_dev: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub problems: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestReport {
    pub cases: Vec<CaseResult>,
}

impl TestReport {
    pub fn failures(&self) -> impl Iterator<Item = &CaseResult> {
        self.cases.iter().filter(|c| c.status == CaseStatus::Fail)
    }

    pub fn success(&self) -> bool {
        self.failures().next().is_none()
    }

    pub fn table(&self) -> String {
        let width = self
            .cases
            .iter()
            .map(|c| c.case.len())
            .max()
            .unwrap_or(4)
            .max(4);
        let mut out = format!("{:<width$}  {:<7}  {}\n", "case", "status", "max_abs_dev");
        for c in &self.cases {
            let status = match c.status {
                CaseStatus::Pass => "pass",
                CaseStatus::Fail => "FAIL",
                CaseStatus::Blessed => "blessed",
            };
            out.push_str(&format!(
                "{:<width$}  {status:<7}  {:.3e}\n",
                c.case, c.max_abs_dev
            ));
            for p in &c.problems {
                out.push_str(&format!("{:<width$}    {p}\n", ""));
            }
        }
        let failed = self.failures().count();
        out.push_str(&format!("{} case(s), {failed} failed\n", self.cases.len()));
        out
    }
}

#[derive(Debug, Clone, Default)]
pub struct TestOptions {
    /// Cases run concurrently; 0 or 1 runs them one after another.
    pub jobs: usize,
    /// Overrides the driver's rank count for every case.
    pub nprocs: Option<usize>,
    /// Replace the references with this run's output.
    pub bless: bool,
    /// Parent of the per-case scratch directories; the system temp dir by
    /// default.
    pub scratch: Option<PathBuf>,
}

pub fn run_all_tests(
    thorns: &[ThornManifest],
    registry: Arc<CodeRegistry>,
    cases: &[RegressionCase],
    options: &TestOptions,
) -> TestReport {
    let run = || {
        cases
            .par_iter()
            .map(|c| run_case(thorns, registry.clone(), c, options))
            .collect()
    };
    let cases = if options.jobs > 1 {
        match rayon::ThreadPoolBuilder::new()
            .num_threads(options.jobs)
            .build()
        {
            Ok(pool) => pool.install(run),
            Err(_) => cases
                .iter()
                .map(|c| run_case(thorns, registry.clone(), c, options))
                .collect(),
        }
    } else {
        cases
            .iter()
            .map(|c| run_case(thorns, registry.clone(), c, options))
            .collect()
    };
    TestReport { cases }
}

fn run_case(
    thorns: &[ThornManifest],
    registry: Arc<CodeRegistry>,
    case: &RegressionCase,
    options: &TestOptions,
) -> CaseResult {
    let fail = |problems: Vec<String>| CaseResult {
        case: case.id(),
        status: CaseStatus::Fail,
        max_abs_dev: 0.0,
        problems,
    };
    let scratch = match &options.scratch {
        Some(dir) => fs::create_dir_all(dir)
            .and_then(|_| tempfile::Builder::new().prefix("case-").tempdir_in(dir)),
        None => tempfile::Builder::new().prefix("thornlet-case-").tempdir(),
    };
    let scratch = match scratch {
        Ok(s) => s,
        Err(e) => return fail(vec![format!("cannot create scratch directory: {e}")]),
    };
    let out = scratch.path().to_path_buf();
    let text = match fs::read_to_string(&case.parfile) {
        Ok(t) => t,
        Err(e) => return fail(vec![format!("{}: {e}", case.parfile.display())]),
    };
    let pf = match parse_parameter_file(&text) {
        Ok(pf) => pf,
        Err(e) => return fail(vec![format!("{}: {e}", case.parfile.display())]),
    };
    let opts = RunOptions {
        output_dir: Some(out.clone()),
        nprocs: options.nprocs,
        provenance: false,
        ..RunOptions::default()
    };
    let mut sim = match Simulation::new(thorns, &pf, registry, opts) {
        Ok(s) => s,
        Err(e) => return fail(vec![format!("setup failed: {e}")]),
    };
    let outcome = sim.run();
    if outcome.exit_code() != 0 {
        let mut problems = vec![format!("run ended with {outcome}")];
        problems.extend(sim.warnings().lines());
        return fail(problems);
    }

    if options.bless {
        let result = (|| -> std::io::Result<()> {
            if case.reference.exists() {
                fs::remove_dir_all(&case.reference)?;
            }
            fs::create_dir_all(&case.reference)?;
            for name in list_files(&out)? {
                fs::copy(out.join(&name), case.reference.join(&name))?;
            }
            Ok(())
        })();
        return match result {
            Ok(()) => CaseResult {
                case: case.id(),
                status: CaseStatus::Blessed,
                max_abs_dev: 0.0,
                problems: vec![],
            },
            Err(e) => fail(vec![format!("cannot write references: {e}")]),
        };
    }

    let (produced, reference) = match (list_files(&out), list_files(&case.reference)) {
        (Ok(p), Ok(r)) => (p, r),
        (Err(e), _) | (_, Err(e)) => return fail(vec![format!("cannot list output: {e}")]),
    };
    let mut problems = Vec::new();
    let mut max_dev: f64 = 0.0;
    for name in reference.difference(&produced) {
        problems.push(format!("{name}: expected output was not produced"));
    }
    for name in produced.difference(&reference) {
        problems.push(format!("{name}: missing reference file"));
    }
    for name in produced.intersection(&reference) {
        match compare_files(&out.join(name), &case.reference.join(name), case.tolerance) {
            Ok(dev) => max_dev = max_dev.max(dev),
            Err(msg) => problems.push(format!("{name}: {msg}")),
        }
    }
    CaseResult {
        case: case.id(),
        status: if problems.is_empty() {
            CaseStatus::Pass
        } else {
            CaseStatus::Fail
        },
        max_abs_dev: max_dev,
        problems,
    }
}

fn list_files(dir: &Path) -> std::io::Result<BTreeSet<String>> {
    if !dir.is_dir() {
        return Ok(BTreeSet::new());
    }
    let mut out = BTreeSet::new();
    for e in fs::read_dir(dir)? {
        let e = e?;
        if e.file_type()?.is_file() {
            out.insert(e.file_name().to_string_lossy().into_owned());
        }
    }
    Ok(out)
}

pub fn compare_files(produced: &Path, reference: &Path, tol: Tolerance) -> Result<f64, String> {
    let a = fs::read_to_string(produced).map_err(|e| e.to_string())?;
    let b = fs::read_to_string(reference).map_err(|e| e.to_string())?;
    compare_text(&a, &b, tol)
}

enum Piece<'a> {
    Text(&'a str),
    Real(f64, &'a str),
}

/// Splits text into literal runs and floating-point numbers. Integers and
/// digits embedded in words (hex digests, names) stay literal.
fn pieces(text: &str) -> Vec<Piece<'_>> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| {
        Regex::new(
            r"[-+]?(?:\d+\.\d*(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?|\d+[eE][-+]?\d+|inf|NaN)",
        )
        .unwrap()
    });
    let word =
        |c: Option<char>| c.is_some_and(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.');
    let mut out = Vec::new();
    let mut last = 0;
    for m in re.find_iter(text) {
        if word(text[..m.start()].chars().next_back()) || word(text[m.end()..].chars().next()) {
            continue;
        }
        let Ok(v) = m.as_str().parse::<f64>() else {
            continue;
        };
        if m.start() > last {
            out.push(Piece::Text(&text[last..m.start()]));
        }
        out.push(Piece::Real(v, m.as_str()));
        last = m.end();
    }
    if last < text.len() {
        out.push(Piece::Text(&text[last..]));
    }
    out
}

/// Compares line by line. Floating-point fields must agree within `tol`;
/// everything else must match exactly. Returns the largest numeric
/// deviation.
pub fn compare_text(produced: &str, reference: &str, tol: Tolerance) -> Result<f64, String> {
    let (pl, rl): (Vec<&str>, Vec<&str>) =
        (produced.lines().collect(), reference.lines().collect());
    if pl.len() != rl.len() {
        return Err(format!("{} lines, reference has {}", pl.len(), rl.len()));
    }
    let mut max_dev: f64 = 0.0;
    for (n, (a, b)) in pl.iter().zip(&rl).enumerate() {
        let line = n + 1;
        let (pa, pb) = (pieces(a), pieces(b));
        if pa.len() != pb.len() {
            return Err(format!("line {line} differs: `{a}` vs reference `{b}`"));
        }
        for (x, y) in pa.iter().zip(&pb) {
            match (x, y) {
                (Piece::Text(s), Piece::Text(t)) if s == t => {}
                (Piece::Real(u, us), Piece::Real(v, vs)) => {
                    if !tol.accepts(*u, *v) {
                        return Err(format!(
                            "line {line}: {us} differs from reference {vs} beyond tolerance"
                        ));
                    }
                    if u.is_finite() && v.is_finite() {
                        max_dev = max_dev.max((u - v).abs());
                    }
                }
                _ => return Err(format!("line {line} differs: `{a}` vs reference `{b}`")),
            }
        }
    }
    Ok(max_dev)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorMode {
    /// Compare against the thorn's registered exact solution.
    Exact,
    /// Compare successive resolutions with each other.
    #[serde(rename = "self")]
    SelfConvergence,
}

impl FromStr for ErrorMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(ErrorMode::Exact),
            "self" => Ok(ErrorMode::SelfConvergence),
            other => Err(format!(
                "unknown error mode `{other}` (expected exact or self)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelError {
    pub level: u32,
    pub dx: f64,
    /// Exact mode: L2 error at the final time. Self mode: L2 norm of the
    /// difference to the next finer level; absent for the finest.
    pub error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceResult {
    pub variable: String,
    pub mode: ErrorMode,
    pub final_time: f64,
    /// Coarsest first.
    pub levels: Vec<LevelError>,
    pub orders: Vec<f64>,
    pub nominal_order: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ConvergenceOptions {
    pub levels: Vec<u32>,
    pub factor: f64,
    pub mode: ErrorMode,
    /// Variable to measure; defaults to the one with a registered exact
    /// solution.
    pub variable: Option<String>,
    pub nprocs: Option<usize>,
}

struct LevelRun {
    level: u32,
    dx: f64,
    time: f64,
    points: usize,
    values: Vec<f64>,
    error: Option<f64>,
    nominal: Option<f64>,
    variable: String,
}

/// L2 norm with the grid cell volume as weight.
fn l2(values: impl Iterator<Item = f64>, volume: f64) -> f64 {
    (values.map(|v| v * v).collect::<ExactSum>().value() * volume).sqrt()
}

pub fn measure_convergence(
    thorns: &[ThornManifest],
    registry: Arc<CodeRegistry>,
    pf_text: &str,
    options: &ConvergenceOptions,
) -> Result<ConvergenceResult, HarnessError> {
    let needed = match options.mode {
        ErrorMode::Exact => 2,
        ErrorMode::SelfConvergence => 3,
    };
    let distinct: BTreeSet<u32> = options.levels.iter().copied().collect();
    if distinct.len() < needed {
        return Err(HarnessError::Levels(format!(
            "need at least {needed} distinct levels for {} mode, got {}",
            if needed == 2 { "exact" } else { "self" },
            distinct.len()
        )));
    }
    let pf = parse_parameter_file(pf_text).map_err(|source| HarnessError::Parse {
        path: "<parfile>".into(),
        source,
    })?;
    let driver = thorns
        .iter()
        .find(|m| {
            pf.active_thorns
                .iter()
                .any(|a| a.eq_ignore_ascii_case(&m.thorn_name))
                && m.implements() == DRIVER_INTERFACE
        })
        .map(|m| m.thorn_name.clone())
        .ok_or(SetupError::NoDriver)?;

    let run_level = |level: u32| -> Result<LevelRun, HarnessError> {
        let mut pf = pf.clone();
        pf.set(
            &driver,
            "convergence_level",
            RawValue::Number(level.to_string()),
        );
        pf.set(
            &driver,
            "convergence_factor",
            RawValue::Number(format!("{:?}", options.factor)),
        );
        let opts = RunOptions {
            provenance: false,
            nprocs: options.nprocs,
            ..RunOptions::default()
        };
        let mut sim = Simulation::new(thorns, &pf, registry.clone(), opts)?;
        let outcome = sim.run();
        if outcome.exit_code() != 0 {
            return Err(HarnessError::Run {
                level,
                outcome: outcome.to_string(),
            });
        }
        let config = sim.config().clone();
        let exact = config.active_thorns.iter().find_map(|m| {
            registry
                .thorn(&m.thorn_name)
                .and_then(|c| c.exact.as_ref())
                .map(|e| (m.thorn_name.clone(), e.clone()))
        });
        let v: VarId = match (&options.variable, &exact) {
            (Some(name), _) => config
                .variable_by_full_name(name)
                .map(|v| v.id)
                .ok_or_else(|| HarnessError::Variable(format!("unknown variable `{name}`")))?,
            (None, Some((thorn, e))) => config
                .resolve_variable(thorn, &QualifiedName::parse(&e.variable))
                .map_err(|e| HarnessError::Variable(e.to_string()))?,
            (None, None) => {
                return Err(HarnessError::Variable(
                    "no active thorn registers an exact solution; name a variable".into(),
                ))
            }
        };
        let h = sim.hierarchy();
        let values = h
            .gather(v, 0)
            .map_err(|e| HarnessError::Variable(e.to_string()))?;
        let geom = &h.geometry;
        let error = match (options.mode, &exact) {
            (ErrorMode::Exact, Some((_, e))) => {
                let diffs = geom
                    .global
                    .iter()
                    .zip(&values)
                    .map(|(g, u)| u - (e.eval)(sim.params(), geom.coord(g), sim.time()));
                Some(l2(diffs, geom.cell_volume()))
            }
            (ErrorMode::Exact, None) => {
                return Err(HarnessError::Variable(
                    "exact mode needs a registered exact solution".into(),
                ))
            }
            (ErrorMode::SelfConvergence, _) => None,
        };
        Ok(LevelRun {
            level,
            dx: geom.min_dx(),
            time: sim.time(),
            points: geom.global.len(),
            nominal: exact
                .as_ref()
                .and_then(|(_, e)| e.order.as_ref().map(|f| f(sim.params()))),
            variable: config.variable(v).full_name(),
            values,
            error,
        })
    };

    let mut runs = distinct
        .iter()
        .rev()
        .map(|&l| run_level(l))
        .collect::<Result<Vec<_>, _>>()?;
    // Coarsest first, independent of how the levels were listed.
    runs.sort_by(|a, b| b.dx.total_cmp(&a.dx));
    let t0 = runs[0].time;
    if let Some(r) = runs
        .iter()
        .find(|r| (r.time - t0).abs() > 1e-9 * t0.abs().max(1.0))
    {
        return Err(HarnessError::Levels(format!(
            "final times differ between levels ({t0} vs {}); set the driver's final_time",
            r.time
        )));
    }

    let mut levels: Vec<LevelError> = Vec::new();
    let mut orders = Vec::new();
    match options.mode {
        ErrorMode::Exact => {
            for r in &runs {
                levels.push(LevelError {
                    level: r.level,
                    dx: r.dx,
                    error: r.error,
                });
            }
            for w in runs.windows(2) {
                let (c, f) = (&w[0], &w[1]);
                orders.push((c.error.unwrap() / f.error.unwrap()).ln() / (c.dx / f.dx).ln());
            }
        }
        ErrorMode::SelfConvergence => {
            // Restrict every level to the coarsest grid by index subsampling.
            let coarse = &runs[0];
            let dims_ok = |r: &LevelRun| {
                let ratio = coarse.dx / r.dx;
                let k = ratio.round();
                if (ratio - k).abs() > 1e-9 * ratio {
                    return Err(HarnessError::NotNested(format!(
                        "dx {} does not divide dx {}",
                        r.dx, coarse.dx
                    )));
                }
                Ok(k as usize)
            };
            let n_coarse = coarse.points;
            let mut restricted = Vec::new();
            for r in &runs {
                let k = dims_ok(r)?;
                if r.values.len() != (n_coarse - 1) * k + 1 && n_coarse > 1 {
                    return Err(HarnessError::NotNested(
                        "self mode supports 1-D grids whose spacing ratio is an integer".into(),
                    ));
                }
                restricted.push((0..n_coarse).map(|i| r.values[i * k]).collect::<Vec<f64>>());
            }
            let diffs: Vec<f64> = restricted
                .windows(2)
                .map(|w| l2(w[0].iter().zip(&w[1]).map(|(a, b)| a - b), coarse.dx))
                .collect();
            for (i, r) in runs.iter().enumerate() {
                levels.push(LevelError {
                    level: r.level,
                    dx: r.dx,
                    error: diffs.get(i).copied(),
                });
            }
            for i in 0..diffs.len() - 1 {
                orders.push((diffs[i] / diffs[i + 1]).ln() / (runs[i].dx / runs[i + 1].dx).ln());
            }
        }
    }
    Ok(ConvergenceResult {
        variable: runs[0].variable.clone(),
        mode: options.mode,
        final_time: t0,
        levels,
        orders,
        nominal_order: runs[0].nominal,
    })
}
