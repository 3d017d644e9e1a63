//! End-to-end acceptance checks. Each test prints one PASS/FAIL line to
//! stderr (bypassing the harness's capture) and fails on FAIL.

mod reference;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{Read, Write};
use std::net::{SocketAddr, TcpStream};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use regex::Regex;
use serde_json::{json, Value};
use thornlet::ccl::Bin;
use thornlet::ccl::{parse_param, parse_parameter_file, ParamScope, ThornManifest};
use thornlet::driver::{slab_sizes, ReduceOp};
use thornlet::flesh::{assemble, FleshError, VarId};
use thornlet::runtime::{build_slice, RunOptions, RunOutcome, Simulation, SliceSpec};
use thornlet::schedule::{build_schedule, ScheduleError};
use thornlet::thorns::{load_thorns, registry, thorn_dir};
use thornlet_steerd::{serve, SteerHandle};

type Check = Result<String, String>;

fn report(name: &str, result: Check) {
    let line = match &result {
        Ok(detail) => format!("acceptance PASS  {name}: {detail}\n"),
        Err(detail) => format!("acceptance FAIL  {name}: {detail}\n"),
    };
    let _ = std::io::stderr().write_all(line.as_bytes());
    if let Err(detail) = result {
        panic!("{name}: {detail}");
    }
}

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn root() -> PathBuf {
    thorn_dir().join("..")
}

fn par(name: &str) -> String {
    fs::read_to_string(root().join("par").join(name)).unwrap()
}

fn thornlet(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_thornlet"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn text(out: &Output) -> String {
    format!(
        "{}{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    )
}

fn simulation(
    thorns: &[ThornManifest],
    text: &str,
    nprocs: Option<usize>,
    out: Option<&Path>,
) -> Simulation {
    let pf = parse_parameter_file(text).unwrap();
    let options = RunOptions {
        nprocs,
        output_dir: out.map(Path::to_path_buf),
        provenance: false,
        ..RunOptions::default()
    };
    Simulation::new(thorns, &pf, Arc::new(registry()), options).unwrap()
}

#[test]
fn parameter_gate() {
    report(
        "parameter gate",
        (|| -> Check {
            let start = Instant::now();
            let block = "private:\nREAL central_density \"The star's central density\"\n{\n  (0.0:* :: \"The central density must be positive\"\n} 1.0\n";
            let decls = parse_param(block).map_err(|e| format!("verbatim block rejected: {e}"))?;
            ensure!(
                decls.len() == 1 && decls[0].scope == ParamScope::Private,
                "unexpected declarations {decls:?}"
            );

            let thorns = load_thorns().unwrap();
            let bind = |text: &str, strict: bool| {
                let mut pf = parse_parameter_file(text).unwrap();
                if strict {
                    pf.strictness = thornlet::ccl::Strictness::Strict;
                }
                assemble(&thorns, &pf).map(|_| ())
            };
            let base = "ActiveThorns = \"slabdriver star\"\n";
            let err = bind(&format!("{base}star::central_density = -1.0"), false)
                .err()
                .ok_or("-1.0 accepted")?;
            ensure!(
                err.to_string()
                    .contains("The central density must be positive"),
                "message lacks range text: {err}"
            );
            let err = bind(&format!("{base}star::central_densty = 2.0"), false)
                .err()
                .ok_or("misspelling accepted")?;
            ensure!(
                matches!(err, FleshError::UnknownParameter { .. }),
                "misspelling gave {err}"
            );
            let inactive = format!("{base}diskdemo::variant = \"fixed\"");
            ensure!(
                bind(&inactive, false).is_ok(),
                "normal mode rejected an inactive-thorn assignment"
            );
            let err = bind(&inactive, true)
                .err()
                .ok_or("strict mode accepted an inactive-thorn assignment")?;
            ensure!(
                matches!(err, FleshError::InactiveThorn { .. }),
                "strict mode gave {err}"
            );
            let elapsed = start.elapsed();

            // The same gate through the command line.
            let dir = tempfile::tempdir().unwrap();
            let pf = dir.path().join("bad.par");
            fs::write(&pf, format!("{base}star::central_density = -1.0\n")).unwrap();
            let out = thornlet(
                &["run", pf.to_str().unwrap(), "--no-provenance"],
                dir.path(),
            );
            ensure!(!out.status.success(), "CLI exit was success");
            ensure!(
                text(&out).contains("The central density must be positive"),
                "CLI output: {}",
                text(&out)
            );
            ensure!(elapsed < Duration::from_secs(1), "gate took {elapsed:?}");
            Ok(format!("verbatim block parsed; -1.0, misspelling and strict inactive assignment aborted in {elapsed:.2?}"))
        })(),
    );
}

/// Lexicographically first permutation of `0..n` that satisfies every
/// `(before, after)` edge, found by brute force.
fn oracle_order(n: usize, edges: &[(usize, usize)]) -> Option<Vec<usize>> {
    fn extend(n: usize, edges: &[(usize, usize)], prefix: &mut Vec<usize>) -> bool {
        if prefix.len() == n {
            let pos = |x: usize| prefix.iter().position(|&y| y == x).unwrap();
            return edges.iter().all(|&(a, b)| pos(a) < pos(b));
        }
        for x in 0..n {
            if !prefix.contains(&x) {
                prefix.push(x);
                if extend(n, edges, prefix) {
                    return true;
                }
                prefix.pop();
            }
        }
        false
    }
    let mut prefix = Vec::new();
    extend(n, edges, &mut prefix).then_some(prefix)
}

fn schedule_for(n: usize, edges: &[(usize, usize, bool)]) -> Result<Vec<usize>, ScheduleError> {
    let mut sched = String::new();
    for i in 0..n {
        sched.push_str(&format!("schedule s{i} AT evol"));
        for &(a, b, as_before) in edges {
            if as_before && a == i {
                sched.push_str(&format!(" BEFORE s{b}"));
            }
            if !as_before && b == i {
                sched.push_str(&format!(" AFTER s{a}"));
            }
        }
        sched.push_str(" {} \"x\"\n");
    }
    let m = ThornManifest::from_texts("t", "implements: t", "", &sched, Path::new("t")).unwrap();
    let cfg = assemble(&[m], &parse_parameter_file("ActiveThorns = \"t\"").unwrap()).unwrap();
    let tree = build_schedule(&cfg)?;
    Ok(tree.bins[Bin::Evol.index()]
        .1
        .iter()
        .map(|&id| tree.nodes[id].item.name[1..].parse().unwrap())
        .collect())
}

#[test]
fn schedule_ordering() {
    report(
        "schedule ordering",
        (|| -> Check {
            let mut rng = StdRng::seed_from_u64(0x5eed);
            let (mut ordered, mut cyclic) = (0, 0);
            for trial in 0..500 {
                let n = rng.random_range(1..=8);
                let count = rng.random_range(0..=n + 2);
                let edges: Vec<(usize, usize, bool)> = (0..count)
                    .map(|_| {
                        (
                            rng.random_range(0..n),
                            rng.random_range(0..n),
                            rng.random_bool(0.5),
                        )
                    })
                    .filter(|(a, b, _)| a != b)
                    .collect();
                let plain: Vec<(usize, usize)> = edges.iter().map(|&(a, b, _)| (a, b)).collect();
                match (oracle_order(n, &plain), schedule_for(n, &edges)) {
                    (Some(want), Ok(got)) => {
                        ensure!(
                            want == got,
                            "trial {trial}: oracle {want:?}, framework {got:?} for {plain:?}"
                        );
                        ordered += 1;
                    }
                    (None, Err(ScheduleError::Cycle { members, .. })) => {
                        let ids: Vec<usize> = members
                            .iter()
                            .map(|m| m.trim_start_matches("t::s").parse().unwrap())
                            .collect();
                        ensure!(
                            ids.windows(2).all(|w| plain.contains(&(w[0], w[1]))),
                            "trial {trial}: reported {members:?} is not a cycle of {plain:?}"
                        );
                        cyclic += 1;
                    }
                    (want, got) => {
                        return Err(format!("trial {trial}: oracle {want:?}, framework {got:?}"))
                    }
                }
            }
            // A hand-injected cycle names exactly its members.
            let err = schedule_for(
                5,
                &[(0, 1, true), (1, 2, false), (2, 3, true), (3, 1, false)],
            )
            .unwrap_err();
            let ScheduleError::Cycle { members, .. } = &err else {
                return Err(format!("expected a cycle, got {err}"));
            };
            ensure!(
                members == &["t::s1", "t::s2", "t::s3", "t::s1"],
                "cycle named as {members:?}"
            );
            Ok(format!("500 trials matched the brute-force oracle ({ordered} ordered, {cyclic} cyclic); injected cycle named {}", members.join(" -> ")))
        })(),
    );
}

#[test]
fn nan_example() {
    report(
        "NaN example",
        (|| -> Check {
            let dir = tempfile::tempdir().unwrap();
            let parfile = root().join("par/advect_nan_demo.par");
            let out = thornlet(
                &[
                    "run",
                    parfile.to_str().unwrap(),
                    "--output-dir",
                    "cli",
                    "--no-provenance",
                ],
                dir.path(),
            );
            let log = text(&out);
            ensure!(
                out.status.success(),
                "terminate did not exit cleanly: {log}"
            );
            ensure!(
                log.contains("WARNING level 1 from nanchecker"),
                "no NaNChecker warning: {log}"
            );
            ensure!(
                log.contains("run terminated"),
                "run did not terminate: {log}"
            );

            let thorns = load_thorns().unwrap();
            let mut sim = simulation(&thorns, &par("advect_nan_demo.par"), None, Some(dir.path()));
            ensure!(
                sim.run() == RunOutcome::Terminated,
                "library run did not terminate"
            );
            let masks: Vec<PathBuf> = fs::read_dir(dir.path())
                .unwrap()
                .map(|e| e.unwrap().path())
                .filter(|p| p.to_string_lossy().contains(".nanmask."))
                .collect();
            ensure!(masks.len() == 1, "expected one mask file, found {masks:?}");
            let mask = thornlet::sentinel::read_mask(&masks[0]).unwrap();
            ensure!(
                !mask.points.is_empty() && mask.iteration <= 200,
                "mask {mask:?}"
            );
            ensure!(
                mask.iteration == sim.iteration(),
                "mask from iteration {} but run stopped at {}",
                mask.iteration,
                sim.iteration()
            );
            let phi = sim.variable("advect::phi").unwrap();
            let h = sim.hierarchy();
            let values = h.gather(phi, 0).unwrap();
            let dx = h.geometry.dx[0];
            for p in &mask.points {
                let v = values[p[0]];
                ensure!(
                    v.abs() < 10.0 * dx * dx,
                    "phi[{}] = {v:e} is not below 10 dx^2 = {:e}",
                    p[0],
                    10.0 * dx * dx
                );
            }
            Ok(format!(
            "{} NaN point(s) in flux at iteration {}; warning issued, mask written, clean exit; max |phi| at mask below 10 dx^2",
            mask.points.len(),
            mask.iteration
        ))
        })(),
    );
}

#[test]
fn poison_example() {
    report(
        "poison example",
        (|| -> Check {
            let thorns = load_thorns().unwrap();
            let mut buggy = simulation(&thorns, &par("poison_demo_buggy.par"), None, None);
            ensure!(
                buggy.run() == RunOutcome::Completed,
                "buggy run did not complete"
            );
            let format = Regex::new(r#"^At iteration (\d+): timelevel (\d+), component (\d+), variable "(\w+)" contains poison at \[(\d+),(\d+)\]$"#).unwrap();
            let mut seen: BTreeMap<u64, BTreeSet<(usize, usize)>> = BTreeMap::new();
            for w in buggy.warnings().all() {
                let c = format
                    .captures(&w.message)
                    .ok_or_else(|| format!("unexpected warning format: {}", w.message))?;
                ensure!(&c[4] == "g", "poison reported in {}", &c[4]);
                ensure!(&c[2] == "0", "timelevel {}", &c[2]);
                ensure!(
                    c[1].parse::<u64>().unwrap() == w.iteration,
                    "iteration mismatch in {}",
                    w.message
                );
                seen.entry(w.iteration)
                    .or_default()
                    .insert((c[5].parse().unwrap(), c[6].parse().unwrap()));
            }
            let n = buggy.hierarchy().geometry.global.hi;
            let boundary: BTreeSet<(usize, usize)> = (0..n[0])
                .flat_map(|i| (0..n[1]).map(move |j| (i, j)))
                .filter(|&(i, j)| i == 0 || j == 0 || i == n[0] - 1 || j == n[1] - 1)
                .collect();
            ensure!(!seen.is_empty(), "no poison reported");
            for (it, set) in &seen {
                ensure!(
                    set == &boundary,
                    "iteration {it}: {} points reported, boundary has {}",
                    set.len(),
                    boundary.len()
                );
            }
            let spec = SliceSpec {
                variable: "disk::g".into(),
                timelevel: 0,
                fixed: vec![(1, 0)],
                stride: 1,
            };
            let slice = build_slice(buggy.config(), buggy.hierarchy(), &spec, buggy.iteration())
                .map_err(|e| e.to_string())?;
            let values = slice.values.as_array().unwrap();
            ensure!(
                values.iter().all(|v| v.as_f64() == Some(2.0e6)),
                "slice values {values:?}"
            );

            let mut fixed = simulation(&thorns, &par("poison_demo_fixed.par"), None, None);
            ensure!(
                fixed.run() == RunOutcome::Completed,
                "fixed run did not complete"
            );
            ensure!(
                fixed.warnings().is_empty(),
                "fixed variant warned: {:?}",
                fixed.warnings().lines()
            );
            Ok(format!(
            "buggy run reported exactly the {} boundary points of g at iterations {:?}; slice = 2.0e6; fixed run silent",
            boundary.len(),
            seen.keys().collect::<Vec<_>>()
        ))
        })(),
    );
}

#[test]
fn convergence() {
    report(
        "convergence",
        (|| -> Check {
            let dir = tempfile::tempdir().unwrap();
            let lw = root().join("par/advect_convergence.par");
            let upwind = dir.path().join("upwind.par");
            fs::write(
                &upwind,
                par("advect_convergence.par").replace("\"lax-wendroff\"", "\"upwind\""),
            )
            .unwrap();
            let pf = parse_parameter_file(&par("advect_convergence.par")).unwrap();
            let real = |scope: &str, name: &str, default: f64| {
                pf.assignments
                    .iter()
                    .find(|a| a.scope == scope && a.name == name)
                    .map_or(default, |a| a.value.text().parse().unwrap())
            };
            let mut summary = Vec::new();
            for (file, method, range) in [
                (lw.as_path(), reference::Method::LaxWendroff, 1.8..=2.2),
                (upwind.as_path(), reference::Method::Upwind, 0.8..=1.2),
            ] {
                let out = thornlet(
                    &[
                        "converge",
                        file.to_str().unwrap(),
                        "--levels=0,1,2",
                        "--factor=2",
                        "--mode=exact",
                        "--json",
                    ],
                    dir.path(),
                );
                ensure!(out.status.success(), "converge failed: {}", text(&out));
                let result: Value =
                    serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
                let orders: Vec<f64> = result["orders"]
                    .as_array()
                    .unwrap()
                    .iter()
                    .map(|v| v.as_f64().unwrap())
                    .collect();
                ensure!(orders.len() == 2, "orders {orders:?}");
                ensure!(
                    orders.iter().all(|p| range.contains(p)),
                    "{method:?}: orders {orders:?} outside {range:?}"
                );
                for level in result["levels"].as_array().unwrap() {
                    let l = level["level"].as_u64().unwrap() as u32;
                    let problem = reference::Problem {
                        n: (real("slabdriver", "nx", 101.0) as usize - 1) / 2usize.pow(l) + 1,
                        dtfac: real("slabdriver", "dtfac", 0.5),
                        t_final: real("slabdriver", "final_time", 1.0),
                        v: real("advect1d", "velocity", 1.0),
                        x0: real("advect1d", "x0", 0.5),
                        sigma: real("advect1d", "sigma", 0.1),
                    };
                    let want = reference::l2_error(&problem, method);
                    let got = level["error"].as_f64().unwrap();
                    ensure!(
                        (got - want).abs() <= 1e-9 * want,
                        "{method:?} level {l}: framework {got:e}, reference {want:e}"
                    );
                }
                summary.push(format!("{method:?} p = {:.3}, {:.3}", orders[0], orders[1]));
            }
            Ok(format!(
                "{}; errors agree with the reference integrator to 1e-9",
                summary.join("; ")
            ))
        })(),
    );
}

/// Every regular file under `dir`, by relative path.
fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_file() {
            out.insert(
                path.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&path).unwrap(),
            );
        }
    }
    out
}

fn reductions(sim: &Simulation) -> Vec<(String, u64)> {
    let h = sim.hierarchy();
    let mut out = Vec::new();
    for (i, var) in h.vars.iter().enumerate() {
        if var.active == 0 || var.kind == thornlet::ccl::GroupKind::Scalar {
            continue;
        }
        for op in [
            ReduceOp::L1,
            ReduceOp::L2,
            ReduceOp::Linf,
            ReduceOp::Min,
            ReduceOp::Max,
            ReduceOp::Sum,
        ] {
            out.push((
                format!("{} {op:?}", var.name),
                h.reduce(VarId(i), 0, op).unwrap().to_bits(),
            ));
        }
        out.push((
            format!("{} checksum", var.name),
            h.checksum(VarId(i), 0).unwrap(),
        ));
    }
    out
}

#[test]
fn decomposition_transparency() {
    report(
        "decomposition transparency",
        (|| -> Check {
            let dir = tempfile::tempdir().unwrap();
            let thorns = load_thorns().unwrap();
            let mut pars: Vec<PathBuf> = fs::read_dir(root().join("par"))
                .unwrap()
                .map(|e| e.unwrap().path())
                .collect();
            pars.sort();
            let mut compared = 0;
            for parfile in &pars {
                let stem = parfile.file_stem().unwrap().to_string_lossy().into_owned();
                let mut outputs = Vec::new();
                let mut reduced = Vec::new();
                for nprocs in ["1", "2", "4"] {
                    let out_dir = dir.path().join(format!("{stem}-{nprocs}"));
                    let out = thornlet(
                        &[
                            "run",
                            parfile.to_str().unwrap(),
                            "--nprocs",
                            nprocs,
                            "--output-dir",
                            out_dir.to_str().unwrap(),
                            "--no-provenance",
                            "--quiet",
                        ],
                        dir.path(),
                    );
                    ensure!(
                        out.status.success(),
                        "{stem} on {nprocs} ranks: {}",
                        text(&out)
                    );
                    outputs.push(files(&out_dir));
                    let mut sim = simulation(
                        &thorns,
                        &fs::read_to_string(parfile).unwrap(),
                        Some(nprocs.parse().unwrap()),
                        None,
                    );
                    sim.run();
                    reduced.push(reductions(&sim));
                }
                ensure!(!outputs[0].is_empty(), "{stem} wrote nothing");
                for k in 1..3 {
                    ensure!(
                        outputs[k] == outputs[0],
                        "{stem}: output files differ between 1 and {} ranks",
                        [1, 2, 4][k]
                    );
                    ensure!(
                        reduced[k] == reduced[0],
                        "{stem}: reductions differ between 1 and {} ranks",
                        [1, 2, 4][k]
                    );
                }
                compared += outputs[0].len();
            }
            Ok(format!("{} parameter files, {compared} output files and all reductions identical on 1, 2 and 4 ranks", pars.len()))
        })(),
    );
}

#[test]
fn sync_check() {
    report(
        "sync check",
        (|| -> Check {
            let (nx, nprocs) = (41, 3);
            let text = format!(
                "ActiveThorns = \"slabdriver advect1d synccheck\"\n\
             slabdriver::nx = {nx}\nslabdriver::nprocs = {nprocs}\nslabdriver::max_iterations = 3\n\
             synccheck::check_vars = \"advect::phi\"\n"
            );
            let dir = thorn_dir().join("advect1d");
            let original = fs::read_to_string(dir.join("schedule.ccl")).unwrap();
            let without = original.replacen("  WRITES: phi\n  SYNC: phi\n", "  WRITES: phi\n", 1);
            ensure!(
                without != original,
                "could not find the SYNC clause to remove"
            );
            let load = |schedule: &str| {
                let mut thorns = load_thorns().unwrap();
                let slot = thorns
                    .iter_mut()
                    .find(|m| m.thorn_name == "advect1d")
                    .unwrap();
                let read = |f: &str| fs::read_to_string(dir.join(f)).unwrap();
                *slot = ThornManifest::from_texts(
                    "advect1d",
                    &read("interface.ccl"),
                    &read("param.ccl"),
                    schedule,
                    &dir,
                )
                .unwrap();
                thorns
            };

            // Independently derived ghost layout: one layer at each inter-rank face.
            let sizes = slab_sizes(nx, nprocs).unwrap();
            let mut expected: BTreeSet<(usize, usize, usize)> = BTreeSet::new();
            let mut start = 0;
            for (rank, &size) in sizes.iter().enumerate() {
                if rank > 0 {
                    expected.insert((rank, rank - 1, start - 1));
                }
                if rank + 1 < nprocs {
                    expected.insert((rank, rank + 1, start + size));
                }
                start += size;
            }

            let line = Regex::new(r#"^variable "advect::phi": (\d+) ghost value\(s\) on rank (\d+) differ from owner rank (\d+) at ((?:\[\d+\] ?)+)$"#).unwrap();
            let mut broken = simulation(&load(&without), &text, None, None);
            broken.run();
            let mut per_iteration: BTreeMap<u64, BTreeSet<(usize, usize, usize)>> = BTreeMap::new();
            for w in broken.warnings().all() {
                let c = line
                    .captures(&w.message)
                    .ok_or_else(|| format!("unexpected warning: {}", w.message))?;
                let (rank, owner): (usize, usize) = (c[2].parse().unwrap(), c[3].parse().unwrap());
                let points: Vec<usize> = c[4]
                    .split_whitespace()
                    .map(|p| p.trim_matches(['[', ']']).parse().unwrap())
                    .collect();
                ensure!(
                    points.len() == c[1].parse::<usize>().unwrap(),
                    "count mismatch in {}",
                    w.message
                );
                for p in points {
                    per_iteration
                        .entry(w.iteration)
                        .or_default()
                        .insert((rank, owner, p));
                }
            }
            ensure!(
                per_iteration.len() == 3,
                "flags at iterations {:?}",
                per_iteration.keys().collect::<Vec<_>>()
            );
            for (it, got) in &per_iteration {
                ensure!(
                    got == &expected,
                    "iteration {it}: flagged {got:?}, stale ghosts are {expected:?}"
                );
            }

            let mut restored = simulation(&load(&original), &text, None, None);
            restored.run();
            ensure!(
                restored.warnings().is_empty(),
                "restored clause still flagged: {:?}",
                restored.warnings().lines()
            );
            Ok(format!("without SYNC every step flagged exactly {expected:?} (rank, owner, index); with SYNC the report is empty"))
        })(),
    );
}

#[test]
fn warning_escalation() {
    report(
        "warning escalation",
        (|| -> Check {
            let dir = tempfile::tempdir().unwrap();
            let parfile = dir.path().join("probe.par");
            fs::write(
            &parfile,
            "ActiveThorns = \"slabdriver warnprobe\"\nslabdriver::nx = 11\nslabdriver::max_iterations = 2\nwarnprobe::at_iteration = 1\n",
        )
        .unwrap();
            let mut table = Vec::new();
            for error_level in 0..=2u32 {
                for level in 0..=3u32 {
                    let out = thornlet(
                        &[
                            "run",
                            parfile.to_str().unwrap(),
                            "--error-level",
                            &error_level.to_string(),
                            "--set",
                            &format!("warnprobe::level = {level}"),
                            "--output-dir",
                            "out",
                            "--no-provenance",
                        ],
                        dir.path(),
                    );
                    let nonzero = !out.status.success();
                    ensure!(
                        nonzero == (level <= error_level),
                        "error_level {error_level}, warning level {level}: exit {:?}\n{}",
                        out.status.code(),
                        text(&out)
                    );
                    ensure!(
                        text(&out).contains(&format!("probe warning of level {level}")),
                        "warning not shown"
                    );
                    table.push(if nonzero { '1' } else { '0' });
                }
                table.push(' ');
            }
            Ok(format!(
                "nonzero exit matrix (rows error_level 0..2, cols level 0..3): {}",
                table.iter().collect::<String>().trim()
            ))
        })(),
    );
}

fn copy_tree(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for entry in fs::read_dir(from).unwrap() {
        let path = entry.unwrap().path();
        let target = to.join(path.file_name().unwrap());
        if path.is_dir() {
            copy_tree(&path, &target);
        } else {
            fs::copy(&path, &target).unwrap();
        }
    }
}

#[test]
fn regression_harness() {
    report(
        "regression harness",
        (|| -> Check {
            let start = Instant::now();
            let dir = tempfile::tempdir().unwrap();
            let out = thornlet(&["test", "--json"], dir.path());
            ensure!(out.status.success(), "pristine tree failed: {}", text(&out));
            let cases: Value = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
            let total = cases.as_array().unwrap().len();
            ensure!(total > 1, "only {total} case(s)");

            let copy = dir.path().join("thorns");
            copy_tree(&thorn_dir(), &copy);
            let target = copy.join("advect1d/test/lax_wendroff/phi.asc");
            let original = fs::read_to_string(&target).unwrap();
            let mut lines: Vec<String> = original.lines().map(String::from).collect();
            let k = lines.len() / 2;
            let mut fields: Vec<String> = lines[k].split_whitespace().map(String::from).collect();
            let value: f64 = fields.last().unwrap().parse().unwrap();
            *fields.last_mut().unwrap() = format!("{:.16e}", value + 1e-6);
            lines[k] = fields.join(" ");
            fs::write(&target, lines.join("\n") + "\n").unwrap();

            let out = thornlet(
                &["--thorn-dir", copy.to_str().unwrap(), "test", "--json"],
                dir.path(),
            );
            ensure!(!out.status.success(), "perturbed tree passed");
            let cases: Value = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
            let failed: Vec<String> = cases
                .as_array()
                .unwrap()
                .iter()
                .filter(|c| c["status"] != "pass")
                .map(|c| c["case"].as_str().unwrap_or("?").to_string())
                .collect();
            ensure!(
                failed == ["advect1d/lax_wendroff"],
                "failed cases {failed:?}"
            );
            let elapsed = start.elapsed();
            ensure!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
            Ok(format!(
                "{total} cases pass on a pristine tree; a 1e-6 change fails only {}; {elapsed:.2?}",
                failed[0]
            ))
        })(),
    );
}

fn http(addr: SocketAddr, method: &str, path: &str, body: Option<Value>) -> (u16, Value) {
    let mut stream = TcpStream::connect(addr).unwrap();
    stream
        .set_read_timeout(Some(Duration::from_secs(20)))
        .unwrap();
    let body = body.map(|b| b.to_string()).unwrap_or_default();
    write!(
        stream,
        "{method} {path} HTTP/1.1\r\nHost: t\r\nConnection: close\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{body}",
        body.len()
    )
    .unwrap();
    let mut raw = String::new();
    stream.read_to_string(&mut raw).unwrap();
    let status = raw[9..12].parse().unwrap();
    let payload = raw.split_once("\r\n\r\n").map_or("", |(_, p)| p);
    (status, serde_json::from_str(payload).unwrap_or(Value::Null))
}

fn await_status(addr: SocketAddr, what: impl Fn(&Value) -> bool) -> Result<Value, String> {
    let deadline = Instant::now() + Duration::from_secs(20);
    loop {
        let (_, st) = http(addr, "GET", "/api/status", None);
        if what(&st) {
            return Ok(st);
        }
        if Instant::now() > deadline {
            return Err(format!("timed out waiting; last status {st}"));
        }
        thread::sleep(Duration::from_millis(2));
    }
}

#[test]
fn steering_api() {
    report(
        "steering API",
        (|| -> Check {
            let thorns = load_thorns().unwrap();
            let text = "ActiveThorns = \"slabdriver advect1d nanchecker star\"\n\
                    slabdriver::nx = 101\nslabdriver::max_iterations = 12\n\
                    nanchecker::check_vars = \"advect::flux\"\n";
            let pf = parse_parameter_file(text).unwrap();
            let options = RunOptions {
                start_paused: true,
                provenance: false,
                ..RunOptions::default()
            };
            let mut sim = Simulation::new(&thorns, &pf, Arc::new(registry()), options).unwrap();
            let server = serve(SteerHandle::new(&sim), "127.0.0.1:0").map_err(|e| e.to_string())?;
            let addr = server.addr();
            let run = thread::spawn(move || sim.run());
            let control = |cmd: &str| {
                http(
                    addr,
                    "POST",
                    "/api/control",
                    Some(json!({ "command": cmd })),
                )
            };
            let waiting = |s: &Value| s["waiting"] == json!(true);

            // Walk into the evolution loop: through initial data, then one item.
            let st = await_status(addr, waiting)?;
            control("step-iteration");
            let st = await_status(addr, |s| waiting(s) && s["trace_len"] != st["trace_len"])?;
            control("step-item");
            let st = await_status(addr, |s| waiting(s) && s["trace_len"] != st["trace_len"])?;
            let i = st["iteration"].as_u64().unwrap();
            ensure!(i >= 1, "not inside the evolution loop: {st}");

            let (code, body) = http(
                addr,
                "PUT",
                "/api/parameters/nanchecker/check_every",
                Some(json!({"value": 3})),
            );
            ensure!(
                code == 200 && body["effective_at"] == json!(i + 1),
                "steer at I={i} returned {code} {body}"
            );
            let (code, body) = http(
                addr,
                "PUT",
                "/api/parameters/advect1d/velocity",
                Some(json!({"value": 0.5})),
            );
            ensure!(code == 403, "non-steerable gave {code} {body}");
            let (code, body) = http(
                addr,
                "PUT",
                "/api/parameters/star/central_density",
                Some(json!({"value": -1.0})),
            );
            ensure!(
                code == 400
                    && body["error"]
                        .as_str()
                        .unwrap_or("")
                        .contains("The central density must be positive"),
                "out of range gave {code} {body}"
            );

            let (code, _) = control("pause");
            ensure!(code == 200, "pause gave {code}");
            let before = await_status(addr, waiting)?["trace_len"].as_u64().unwrap();
            for k in 1..=3 {
                let (code, body) = control("step-item");
                ensure!(code == 200, "step-item gave {code} {body}");
                await_status(addr, |s| waiting(s) && s["trace_len"] == json!(before + k))?;
            }
            thread::sleep(Duration::from_millis(150));
            let (_, st) = http(addr, "GET", "/api/status", None);
            ensure!(
                st["trace_len"] == json!(before + 3),
                "trace moved from {before} to {}",
                st["trace_len"]
            );
            control("resume");
            let outcome = run.join().unwrap();
            ensure!(outcome == RunOutcome::Completed, "run ended {outcome}");

            let (_, steering) = http(addr, "GET", "/api/steering", None);
            let history = steering["history"].as_array().unwrap();
            ensure!(
                history.len() == 1
                    && history[0]["iteration"] == json!(i + 1)
                    && history[0]["name"] == "check_every",
                "history {history:?}"
            );
            server.shutdown();
            Ok(format!("PUT at I={i} effective at {}; 403 and 400 as required; three step-items advanced the trace by exactly 3", i + 1))
        })(),
    );
}

#[test]
fn provenance() {
    report(
        "provenance",
        (|| -> Check {
            let dir = tempfile::tempdir().unwrap();
            let parfile = root().join("par/poison_demo_fixed.par");
            let mut archives = Vec::new();
            for run in ["a", "b"] {
                let out = thornlet(
                    &[
                        "run",
                        parfile.to_str().unwrap(),
                        "--output-dir",
                        run,
                        "--quiet",
                    ],
                    dir.path(),
                );
                ensure!(out.status.success(), "{}", text(&out));
                archives.push(files(&dir.path().join(run).join("provenance")));
            }
            let tars: Vec<&String> = archives[0].keys().filter(|k| k.ends_with(".tar")).collect();
            ensure!(tars.len() == 2, "archives {tars:?}");
            for name in &tars {
                ensure!(
                    archives[0][*name] == archives[1][*name],
                    "{name} differs between runs"
                );
                let thorn = name.trim_end_matches(".tar");
                let mut tar = tar::Archive::new(archives[0][*name].as_slice());
                let mut found = None;
                for entry in tar.entries().unwrap() {
                    let mut entry = entry.unwrap();
                    if entry.path().unwrap() == Path::new(thorn).join("param.ccl") {
                        let mut bytes = Vec::new();
                        entry.read_to_end(&mut bytes).unwrap();
                        found = Some(bytes);
                    }
                }
                let original = fs::read(thorn_dir().join(thorn).join("param.ccl")).unwrap();
                ensure!(
                    found.as_ref() == Some(&original),
                    "{thorn}/param.ccl not reproduced"
                );
            }
            Ok(format!("{} per-thorn tarballs byte-identical across two runs; param.ccl unpacks byte-for-byte", tars.len()))
        })(),
    );
}
