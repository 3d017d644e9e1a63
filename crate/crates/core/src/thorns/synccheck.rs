//! Verifies after every step that the ghost zones of the listed variables
//! agree bit for bit with their owners.

use std::collections::BTreeMap;

use crate::runtime::{GlobalCtx, RoutineError, ThornCode};
use crate::sentinel::check_sync;

pub const NAME: &str = "synccheck";

fn verify(ctx: &mut GlobalCtx<'_>) -> Result<(), RoutineError> {
    let names: Vec<String> = ctx
        .params()
        .text("check_vars")?
        .split_whitespace()
        .map(String::from)
        .collect();
    for name in names {
        let var = ctx.config().variable_by_full_name(&name).ok_or_else(|| {
            RoutineError::Failed(format!("check_vars names unknown variable `{name}`"))
        })?;
        let (v, full) = (var.id, var.full_name());
        if !ctx.hierarchy().has_storage(v) {
            continue;
        }
        let dims = ctx.geometry().dims;
        let mut by_pair: BTreeMap<(usize, usize), Vec<Vec<usize>>> = BTreeMap::new();
        for m in check_sync(ctx.hierarchy(), v)? {
            by_pair
                .entry((m.rank, m.owner))
                .or_default()
                .push(m.index[..dims].to_vec());
        }
        for ((rank, owner), points) in by_pair {
            let at: Vec<String> = points
                .iter()
                .map(|p| {
                    format!(
                        "[{}]",
                        p.iter()
                            .map(ToString::to_string)
                            .collect::<Vec<_>>()
                            .join(",")
                    )
                })
                .collect();
            ctx.warn(
                1,
                format!(
                    "variable \"{full}\": {} ghost value(s) on rank {rank} differ from owner rank {owner} at {}",
                    points.len(),
                    at.join(" ")
                ),
            );
        }
    }
    Ok(())
}

pub fn code() -> ThornCode {
    ThornCode::new(NAME)
        .global("sync_verify", verify)
        .source("src/synccheck.rs", include_str!("synccheck.rs"))
}
