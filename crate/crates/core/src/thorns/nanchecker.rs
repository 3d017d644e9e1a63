//! Scans the listed variables for NaN and infinite values every
//! `check_every` iterations, writes a mask file of the offending points and
//! then warns, terminates or aborts per `action_if_found`.

use crate::runtime::{GlobalCtx, RoutineError, ThornCode};
use crate::sentinel::{nan_scan, write_mask, NanClass, NanMask};

pub const NAME: &str = "nanchecker";

fn class_name(c: NanClass) -> &'static str {
    match c {
        NanClass::Nan => "nan",
        NanClass::PosInf => "+inf",
        NanClass::NegInf => "-inf",
    }
}

fn check(ctx: &mut GlobalCtx<'_>) -> Result<(), RoutineError> {
    let p = ctx.params();
    let every = p.int("check_every")?.max(1) as u64;
    if !ctx.iteration().is_multiple_of(every) {
        return Ok(());
    }
    let action = p.text("action_if_found")?.to_string();
    let write = p.boolean("out_nanmask")?;
    let names: Vec<String> = p
        .text("check_vars")?
        .split_whitespace()
        .map(String::from)
        .collect();

    let mut found = false;
    for name in names {
        let var = ctx.config().variable_by_full_name(&name).ok_or_else(|| {
            RoutineError::Failed(format!("check_vars names unknown variable `{name}`"))
        })?;
        let (v, full) = (var.id, var.full_name());
        if !ctx.hierarchy().has_storage(v) {
            continue;
        }
        let report = nan_scan(ctx.hierarchy(), v, 0, ctx.iteration())?;
        if report.count == 0 {
            continue;
        }
        found = true;
        let first: Vec<String> = report.points[0].iter().map(ToString::to_string).collect();
        ctx.warn(
            1,
            format!(
                "{} NaN/Inf value(s) in variable \"{full}\" at iteration {}, first at [{}] ({})",
                report.count,
                ctx.iteration(),
                first.join(","),
                class_name(report.classes[0])
            ),
        );
        if let (true, Some(dir)) = (write, ctx.output_dir()) {
            let geom = ctx.geometry();
            let shape = (0..geom.dims).map(|d| geom.global.extent(d)).collect();
            write_mask(&NanMask::from_report(&report, shape), dir)
                .map_err(|e| RoutineError::Failed(format!("cannot write mask file: {e}")))?;
        }
    }
    if found {
        match action.as_str() {
            "terminate" => ctx.request_terminate(),
            "abort" => ctx.request_abort("NaNChecker found non-finite values"),
            _ => {}
        }
    }
    Ok(())
}

pub fn code() -> ThornCode {
    ThornCode::new(NAME)
        .global("nan_check", check)
        .source("src/nanchecker.rs", include_str!("nanchecker.rs"))
}
