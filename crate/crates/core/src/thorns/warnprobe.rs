//! Issues one warning of a configurable level, for exercising the
//! escalation rules.

use crate::runtime::{GlobalCtx, RoutineError, ThornCode};

pub const NAME: &str = "warnprobe";

fn probe(ctx: &mut GlobalCtx<'_>) -> Result<(), RoutineError> {
    let p = ctx.params();
    let (level, at) = (p.int("level")?, p.int("at_iteration")?);
    if ctx.iteration() as i64 == at {
        ctx.warn(level as u32, format!("probe warning of level {level}"));
    }
    Ok(())
}

pub fn code() -> ThornCode {
    ThornCode::new(NAME)
        .global("warn_probe", probe)
        .source("src/warnprobe.rs", include_str!("warnprobe.rs"))
}
