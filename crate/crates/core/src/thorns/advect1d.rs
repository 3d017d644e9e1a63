//! Linear advection of a Gaussian on a periodic 1-D grid. The flux
//! F = phi^(3/2) is computed without clamping, so round-off undershoots of
//! phi show up as NaNs.
//!
//! The end points are identified: point 0 and point N-1 hold the same value.
//! Interior points are updated per block, the identified pair by a
//! collective boundary routine.

use crate::flesh::ParamValues;
use crate::runtime::{GlobalCtx, LocalCtx, RoutineError, ThornCode};

pub const NAME: &str = "advect1d";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Upwind,
    LaxWendroff,
}

impl Scheme {
    pub fn parse(s: &str) -> Result<Scheme, RoutineError> {
        match s {
            "upwind" => Ok(Scheme::Upwind),
            "lax-wendroff" => Ok(Scheme::LaxWendroff),
            other => Err(RoutineError::Failed(format!("unknown scheme `{other}`"))),
        }
    }

    /// New value at a point from its old neighbourhood; `c = v dt / dx`.
    pub fn apply(self, c: f64, left: f64, centre: f64, right: f64) -> f64 {
        match self {
            Scheme::Upwind if c >= 0.0 => centre - c * (centre - left),
            Scheme::Upwind => centre - c * (right - centre),
            Scheme::LaxWendroff => {
                centre - 0.5 * c * (right - left) + 0.5 * c * c * (right - 2.0 * centre + left)
            }
        }
    }
}

/// The Gaussian profile translated by `v t` on a domain of length `period`.
pub fn gaussian(x: f64, t: f64, x0: f64, sigma: f64, v: f64, period: f64) -> f64 {
    let mut d = x - x0 - v * t;
    d -= period * (d / period).round();
    (-(d * d) / (sigma * sigma)).exp()
}

fn period(p: &ParamValues) -> f64 {
    let get = |n| {
        p.get("slabdriver", n)
            .and_then(|v| v.as_f64())
            .unwrap_or(f64::NAN)
    };
    get("xmax") - get("xmin")
}

fn exact(p: &ParamValues, x: [f64; 3], t: f64) -> f64 {
    let get = |n| p.get(NAME, n).and_then(|v| v.as_f64()).unwrap_or(f64::NAN);
    gaussian(x[0], t, get("x0"), get("sigma"), get("velocity"), period(p))
}

fn paramcheck(ctx: &mut GlobalCtx<'_>) -> Result<(), RoutineError> {
    let v = ctx.params().real("velocity")?;
    let _ = ctx.check_timestep(v.abs());
    Ok(())
}

fn init(ctx: &mut LocalCtx<'_>) -> Result<(), RoutineError> {
    let p = ctx.params();
    let (x0, sigma, snapshot) = (p.real("x0")?, p.real("sigma")?, p.snapshot());
    let len = period(snapshot);
    let owned = ctx.owned();
    let xs: Vec<f64> = owned.iter().map(|g| ctx.coord(g)[0]).collect();
    let mut phi = ctx.write("phi", 0)?;
    for (g, x) in owned.iter().zip(xs) {
        phi.set(g, gaussian(x, 0.0, x0, sigma, 0.0, len));
    }
    Ok(())
}

fn evolve(ctx: &mut LocalCtx<'_>) -> Result<(), RoutineError> {
    let p = ctx.params();
    let scheme = Scheme::parse(p.text("scheme")?)?;
    let c = p.real("velocity")? * ctx.dt() / ctx.geometry().dx[0];
    let n = ctx.geometry().global.hi[0];
    let owned = ctx.owned();
    let old = ctx.read("phi", 1)?;
    let mut new = ctx.write("phi", 0)?;
    for i in owned.lo[0].max(1)..owned.hi[0].min(n - 1) {
        new.set1(
            i,
            scheme.apply(c, old.at1(i - 1), old.at1(i), old.at1(i + 1)),
        );
    }
    Ok(())
}

fn boundary(ctx: &mut GlobalCtx<'_>) -> Result<(), RoutineError> {
    let p = ctx.params();
    let scheme = Scheme::parse(p.text("scheme")?)?;
    let c = p.real("velocity")? * ctx.dt() / ctx.geometry().dx[0];
    let n = ctx.geometry().global.hi[0];
    let old = ctx.gather_points("phi", 1, &[[n - 2, 0, 0], [0, 0, 0], [1, 0, 0]])?;
    let value = scheme.apply(c, old[0], old[1], old[2]);
    ctx.scatter_points("phi", 0, &[([0, 0, 0], value), ([n - 1, 0, 0], value)])
}

fn derived(ctx: &mut LocalCtx<'_>) -> Result<(), RoutineError> {
    let owned = ctx.owned();
    let phi = ctx.read("phi", 0)?;
    let mut flux = ctx.write("flux", 0)?;
    for g in owned.iter() {
        let p = phi.at(g);
        // Deliberately unclamped: a tiny negative phi gives NaN.
        flux.set(g, p * p.sqrt());
    }
    Ok(())
}

pub fn code() -> ThornCode {
    ThornCode::new(NAME)
        .global("advect_paramcheck", paramcheck)
        .local("advect_init", init)
        .local("advect_evolve", evolve)
        .global("advect_boundary", boundary)
        .local("advect_derived", derived)
        .exact("phi", exact)
        .nominal_order(|p| match p.get(NAME, "scheme").and_then(|v| v.as_str()) {
            Some("lax-wendroff") => 2.0,
            _ => 1.0,
        })
        .source("src/advect1d.rs", include_str!("advect1d.rs"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_are_preserved() {
        for s in [Scheme::Upwind, Scheme::LaxWendroff] {
            assert_eq!(s.apply(0.8, 1.0, 1.0, 1.0), 1.0);
        }
    }

    #[test]
    fn unit_courant_upwind_shifts() {
        assert_eq!(Scheme::Upwind.apply(1.0, 3.0, 5.0, 7.0), 3.0);
    }

    #[test]
    fn gaussian_peak_and_period() {
        assert_eq!(gaussian(0.5, 0.0, 0.5, 0.1, 1.0, 1.0), 1.0);
        assert_eq!(
            gaussian(0.0, 0.0, 0.5, 0.1, 0.0, 1.0),
            gaussian(1.0, 0.0, 0.5, 0.1, 0.0, 1.0)
        );
        assert!((gaussian(0.2, 0.7, 0.5, 0.1, 1.0, 1.0) - 1.0).abs() < 1e-12);
    }
}
