use serde_json::Value;

use super::control::{Slice, SliceAxis, SliceError, SliceSpec};
use crate::ccl::GroupKind;
use crate::driver::GridHierarchy;
use crate::flesh::Configuration;

/// Cuts a 1-D or 2-D slice out of the global field. Dimensions listed in
/// `spec.fixed` are pinned; every other used dimension is free.
pub fn build_slice(
    config: &Configuration,
    h: &GridHierarchy,
    spec: &SliceSpec,
    iteration: u64,
) -> Result<Slice, SliceError> {
    let var = config
        .variable_by_full_name(&spec.variable)
        .ok_or_else(|| SliceError::UnknownVariable(spec.variable.clone()))?;
    let v = var.id;
    if var.group.kind == GroupKind::Scalar {
        return Err(SliceError::BadIndex(format!(
            "{} is a scalar",
            spec.variable
        )));
    }
    if !h.has_storage(v) {
        return Err(SliceError::NoStorage(spec.variable.clone()));
    }
    let active = h.var(v).active;
    if spec.timelevel >= active {
        return Err(SliceError::BadIndex(format!(
            "timelevel {} not active ({active} active)",
            spec.timelevel
        )));
    }
    if spec.stride == 0 {
        return Err(SliceError::BadIndex("stride must be positive".into()));
    }
    let geom = &h.geometry;
    let mut base = [0usize; 3];
    let mut pinned = [false; 3];
    for &(d, i) in &spec.fixed {
        if d >= geom.dims {
            return Err(SliceError::BadIndex(format!(
                "dimension {d} is not used by a {}-D grid",
                geom.dims
            )));
        }
        if pinned[d] {
            return Err(SliceError::BadIndex(format!("dimension {d} fixed twice")));
        }
        if i >= geom.global.extent(d) {
            return Err(SliceError::BadIndex(format!(
                "index {i} out of range in dimension {d}"
            )));
        }
        pinned[d] = true;
        base[d] = i;
    }
    let free: Vec<usize> = (0..geom.dims).filter(|&d| !pinned[d]).collect();
    if free.is_empty() || free.len() > 2 {
        return Err(SliceError::BadIndex(format!(
            "a slice needs 1 or 2 free dimensions, got {}",
            free.len()
        )));
    }

    let data = h
        .gather(v, spec.timelevel)
        .map_err(|e| SliceError::Unavailable(e.to_string()))?;
    let at = |g: [usize; 3]| Value::from(data[geom.global.offset(g)]);
    let ticks = |d: usize| {
        (0..geom.global.extent(d))
            .step_by(spec.stride)
            .collect::<Vec<_>>()
    };
    let axes = free
        .iter()
        .map(|&d| SliceAxis {
            dim: d,
            coordinates: ticks(d)
                .into_iter()
                .map(|i| geom.lower[d] + i as f64 * geom.dx[d])
                .collect(),
        })
        .collect();
    let values = match free[..] {
        [a] => Value::Array(
            ticks(a)
                .into_iter()
                .map(|i| {
                    let mut g = base;
                    g[a] = i;
                    at(g)
                })
                .collect(),
        ),
        [a, b] => Value::Array(
            ticks(a)
                .into_iter()
                .map(|i| {
                    Value::Array(
                        ticks(b)
                            .into_iter()
                            .map(|j| {
                                let mut g = base;
                                g[a] = i;
                                g[b] = j;
                                at(g)
                            })
                            .collect(),
                    )
                })
                .collect(),
        ),
        _ => unreachable!(),
    };
    Ok(Slice {
        variable: var.full_name(),
        iteration,
        timelevel: spec.timelevel,
        axes,
        values,
    })
}
