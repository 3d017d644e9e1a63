use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use thornlet::ccl::{
    lint_thorn, parse_parameter_file, ParameterFile, Severity, Strictness, ThornManifest,
};
use thornlet::flesh::{warn, Origin};
use thornlet::harness::{
    discover_cases, measure_convergence, run_all_tests, ConvergenceOptions, ErrorMode, TestOptions,
};
use thornlet::runtime::{RunOptions, Simulation};
use thornlet::schedule::dump_schedule;
use thornlet::thorns;
use thornlet_steerd::{serve, SteerHandle, TOKEN_ENV};

#[derive(Parser)]
#[command(
    name = "thornlet",
    version,
    about = "Run, test and steer thorn-based simulations"
)]
struct Cli {
    /// Directory containing one subdirectory per thorn.
    #[arg(long, global = true, env = "THORNLET_THORNS")]
    thorn_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a parameter file.
    Run(RunArgs),
    /// Check thorn declaration files without running anything.
    Lint {
        /// Thorn directories; all known thorns when omitted.
        dirs: Vec<PathBuf>,
    },
    /// Run the regression cases in each thorn's test directory.
    Test(TestArgs),
    /// Measure the convergence order of a parameter file.
    Converge(ConvergeArgs),
}

#[derive(Args)]
struct RunArgs {
    parfile: PathBuf,
    /// Serve the steering API on this address, e.g. 127.0.0.1:8080.
    #[arg(long)]
    serve: Option<String>,
    /// Warnings at or below this level are fatal.
    #[arg(long, default_value_t = 0)]
    error_level: u32,
    /// Parameter strictness: relaxed, normal (default) or strict.
    #[arg(long)]
    strictness: Option<Strictness>,
    /// Output directory; defaults to the parameter file's name.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    nprocs: Option<usize>,
    /// Print the assembled schedule and exit.
    #[arg(long)]
    dump_schedule: bool,
    /// Extra assignment `thorn::name=value`; may be repeated.
    #[arg(long = "set", value_name = "ASSIGNMENT")]
    sets: Vec<String>,
    /// Skip writing source archives.
    #[arg(long)]
    no_provenance: bool,
    /// Start paused; needs --serve to be resumed.
    #[arg(long, requires = "serve")]
    paused: bool,
    /// Do not echo warnings.
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Args)]
struct TestArgs {
    /// Limit to these thorns.
    thorns: Vec<String>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    nprocs: Option<usize>,
    /// Rewrite the references from this run.
    #[arg(long)]
    bless: bool,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ConvergeArgs {
    parfile: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
    levels: Vec<u32>,
    #[arg(long, default_value_t = 2.0)]
    factor: f64,
    /// exact or self
    #[arg(long, default_value = "exact")]
    mode: ErrorMode,
    /// Variable to measure; defaults to the one with an exact solution.
    #[arg(long)]
    variable: Option<String>,
    #[arg(long)]
    nprocs: Option<usize>,
    #[arg(long)]
    json: bool,
}

fn fail(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("thornlet: {msg}");
    ExitCode::FAILURE
}

fn load(dir: &Path) -> Result<Vec<ThornManifest>, String> {
    ThornManifest::load_all(dir).map_err(|e| e.to_string())
}

fn read_parfile(path: &Path) -> Result<ParameterFile, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_parameter_file(&text).map_err(|e| format!("{}: {e}", path.display()))
}

/// Parses `thorn::name=value` with the parameter-file grammar.
fn apply_set(pf: &mut ParameterFile, text: &str) -> Result<(), String> {
    let parsed = parse_parameter_file(&format!("ActiveThorns = \"x\"\n{text}\n"))
        .map_err(|e| format!("--set {text}: {e}"))?;
    let a = parsed
        .assignments
        .into_iter()
        .next()
        .ok_or_else(|| format!("--set {text}: expected thorn::name=value"))?;
    pf.set(&a.scope, &a.name, a.value);
    Ok(())
}

fn run(thorn_dir: &Path, args: RunArgs) -> ExitCode {
    let available = match load(thorn_dir) {
        Ok(t) => t,
        Err(e) => return fail(e),
    };
    let mut pf = match read_parfile(&args.parfile) {
        Ok(pf) => pf,
        Err(e) => return fail(e),
    };
    if let Some(s) = args.strictness {
        pf.strictness = s;
    }
    for s in &args.sets {
        if let Err(e) = apply_set(&mut pf, s) {
            return fail(e);
        }
    }
    let output_dir = args.output_dir.clone().unwrap_or_else(|| {
        PathBuf::from(
            args.parfile
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or("output".into()),
        )
    });
    let options = RunOptions {
        error_level: args.error_level,
        output_dir: (!args.dump_schedule).then_some(output_dir),
        nprocs: args.nprocs,
        provenance: !args.no_provenance,
        echo_warnings: !args.quiet,
        start_paused: args.paused,
    };
    let mut sim = match Simulation::new(&available, &pf, Arc::new(thorns::registry()), options) {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    if args.dump_schedule {
        print!("{}", dump_schedule(sim.tree(), sim.config()));
        return ExitCode::SUCCESS;
    }
    let _server = match &args.serve {
        Some(addr) => {
            let handle = SteerHandle::new(&sim).with_token(std::env::var(TOKEN_ENV).ok());
            match serve(handle, addr) {
                Ok(server) => {
                    println!("steering API on http://{}", server.addr());
                    Some(server)
                }
                Err(e) => {
                    warn(
                        &sim.warnings(),
                        0,
                        Origin::new("steerd", "serve"),
                        0,
                        format!("cannot bind {addr}: {e}"),
                    );
                    return fail(format!("cannot bind {addr}: {e}"));
                }
            }
        }
        None => None,
    };
    let outcome = sim.run();
    println!(
        "run {outcome} at iteration {} (time {})",
        sim.iteration(),
        sim.time()
    );
    ExitCode::from(outcome.exit_code() as u8)
}

fn lint(thorn_dir: &Path, dirs: Vec<PathBuf>) -> ExitCode {
    let dirs = if dirs.is_empty() {
        match load(thorn_dir) {
            Ok(all) => all.into_iter().map(|m| m.source_dir).collect(),
            Err(e) => return fail(e),
        }
    } else {
        dirs
    };
    let mut errors = 0;
    for dir in dirs {
        match ThornManifest::load(&dir) {
            Ok(m) => {
                for d in lint_thorn(&m) {
                    println!("{d}");
                    errors += usize::from(d.severity == Severity::Error);
                }
            }
            Err(e) => {
                println!("error: {e}");
                errors += 1;
            }
        }
    }
    if errors > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

fn test(thorn_dir: &Path, args: TestArgs) -> ExitCode {
    let available = match load(thorn_dir) {
        Ok(t) => t,
        Err(e) => return fail(e),
    };
    let cases = match discover_cases(&available, &args.thorns) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let options = TestOptions {
        jobs: args.jobs,
        nprocs: args.nprocs,
        bless: args.bless,
        scratch: None,
    };
    let report = run_all_tests(&available, Arc::new(thorns::registry()), &cases, &options);
    if args.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&report.cases).unwrap_or_default()
        );
    } else {
        print!("{}", report.table());
    }
    if report.success() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn converge(thorn_dir: &Path, args: ConvergeArgs) -> ExitCode {
    let available = match load(thorn_dir) {
        Ok(t) => t,
        Err(e) => return fail(e),
    };
    let text = match fs::read_to_string(&args.parfile) {
        Ok(t) => t,
        Err(e) => return fail(format!("{}: {e}", args.parfile.display())),
    };
    let options = ConvergenceOptions {
        levels: args.levels,
        factor: args.factor,
        mode: args.mode,
        variable: args.variable,
        nprocs: args.nprocs,
    };
    let result =
        match measure_convergence(&available, Arc::new(thorns::registry()), &text, &options) {
            Ok(r) => r,
            Err(e) => return fail(e),
        };
    if args.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&result).unwrap_or_default()
        );
        return ExitCode::SUCCESS;
    }
    println!("variable {} at t = {}", result.variable, result.final_time);
    println!("{:>5}  {:>12}  {:>12}", "level", "dx", "error");
    for l in &result.levels {
        let e = l.error.map_or("-".to_string(), |e| format!("{e:.6e}"));
        println!("{:>5}  {:>12.6e}  {e:>12}", l.level, l.dx);
    }
    let orders: Vec<String> = result.orders.iter().map(|p| format!("{p:.4}")).collect();
    println!("orders: {}", orders.join(" "));
    if let Some(n) = result.nominal_order {
        println!("nominal order: {n}");
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let thorn_dir = cli.thorn_dir.unwrap_or_else(thorns::thorn_dir);
    match cli.command {
        Cmd::Run(args) => run(&thorn_dir, args),
        Cmd::Lint { dirs } => lint(&thorn_dir, dirs),
        Cmd::Test(args) => test(&thorn_dir, args),
        Cmd::Converge(args) => converge(&thorn_dir, args),
    }
}
