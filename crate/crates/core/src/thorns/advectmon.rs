//! Mass-conservation monitor: the integral of phi over one period, and its
//! drift from the value after initial data.

use crate::driver::ExactSum;
use crate::runtime::{GlobalCtx, RoutineError, ThornCode};

pub const NAME: &str = "advectmon";

/// Sum of phi times dx over the distinct points of the periodic grid (the
/// last point duplicates the first).
pub fn periodic_mass(phi: &[f64], dx: f64) -> f64 {
    let distinct = &phi[..phi.len().saturating_sub(1)];
    distinct.iter().copied().collect::<ExactSum>().value() * dx
}

fn mass(ctx: &GlobalCtx<'_>) -> Result<f64, RoutineError> {
    let phi = ctx.gather("advect::phi", 0)?;
    Ok(periodic_mass(&phi, ctx.geometry().dx[0]))
}

fn init(ctx: &mut GlobalCtx<'_>) -> Result<(), RoutineError> {
    let m = mass(ctx)?;
    ctx.set_scalar("mass", m)?;
    ctx.set_scalar("initial_mass", m)?;
    ctx.set_scalar("mass_residual", 0.0)
}

fn check(ctx: &mut GlobalCtx<'_>) -> Result<(), RoutineError> {
    let m = mass(ctx)?;
    let residual = m - ctx.scalar("initial_mass")?;
    ctx.set_scalar("mass", m)?;
    ctx.set_scalar("mass_residual", residual)
}

pub fn code() -> ThornCode {
    ThornCode::new(NAME)
        .global("advectmon_init", init)
        .global("advectmon_check", check)
        .source("src/advectmon.rs", include_str!("advectmon.rs"))
}
