//! A static background field `g` next to an evolved density `rho` on a 2-D
//! grid. The buggy variant initialises `g` on interior points only, so with
//! poisoning on its whole physical boundary keeps the poison value.

use crate::runtime::{LocalCtx, RoutineError, ThornCode};

pub const NAME: &str = "diskdemo";

pub fn background(x: [f64; 3]) -> f64 {
    1.0 + x[0] * x[0] + x[1] * x[1]
}

pub fn density(x: [f64; 3]) -> f64 {
    (-(x[0] * x[0] + x[1] * x[1]) / 0.1).exp()
}

fn init(ctx: &mut LocalCtx<'_>) -> Result<(), RoutineError> {
    let points: Vec<_> = ctx
        .owned()
        .iter()
        .filter(|&g| !ctx.is_physical_boundary(g))
        .map(|g| (g, ctx.coord(g)))
        .collect();
    let mut g = ctx.write("g", 0)?;
    for &(i, x) in &points {
        g.set(i, background(x));
    }
    let mut rho = ctx.write("rho", 0)?;
    for &(i, x) in &points {
        rho.set(i, density(x));
    }
    Ok(())
}

fn boundary(ctx: &mut LocalCtx<'_>) -> Result<(), RoutineError> {
    let fixed = ctx.params().text("variant")? == "fixed";
    let points: Vec<_> = ctx
        .owned()
        .iter()
        .filter(|&g| ctx.is_physical_boundary(g))
        .map(|g| (g, ctx.coord(g)))
        .collect();
    let mut rho = ctx.write("rho", 0)?;
    for &(i, x) in &points {
        rho.set(i, density(x));
    }
    if fixed {
        let mut g = ctx.write("g", 0)?;
        for &(i, x) in &points {
            g.set(i, background(x));
        }
    }
    Ok(())
}

fn evolve(ctx: &mut LocalCtx<'_>) -> Result<(), RoutineError> {
    let rate = ctx.params().real("damping")? * ctx.dt();
    let owned = ctx.owned();
    let g = ctx.read("g", 0)?;
    let old = ctx.read("rho", 1)?;
    let mut rho = ctx.write("rho", 0)?;
    for i in owned.iter() {
        rho.set(i, old.at(i) * (-rate / g.at(i)).exp());
    }
    Ok(())
}

pub fn code() -> ThornCode {
    ThornCode::new(NAME)
        .local("disk_init", init)
        .local("disk_boundary", boundary)
        .local("disk_evolve", evolve)
        .source("src/diskdemo.rs", include_str!("diskdemo.rs"))
}
