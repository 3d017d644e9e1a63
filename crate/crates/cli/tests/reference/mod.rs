//! Stand-alone periodic advection integrator used to cross-check the
//! framework's convergence errors. It shares nothing with the framework
//! except the problem statement: a Gaussian `exp(-(x-x0)^2/sigma^2)` moved
//! at speed `v` around `[0, 1)`, sampled at `n` points including both end
//! points, with `dt = dtfac * dx` shortened to land exactly on `t_final`.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Upwind,
    LaxWendroff,
}

pub struct Problem {
    pub n: usize,
    pub dtfac: f64,
    pub t_final: f64,
    pub v: f64,
    pub x0: f64,
    pub sigma: f64,
}

fn profile(p: &Problem, x: f64, t: f64) -> f64 {
    let mut d = (x - p.x0 - p.v * t) % 1.0;
    if d > 0.5 {
        d -= 1.0;
    } else if d < -0.5 {
        d += 1.0;
    }
    (-(d / p.sigma).powi(2)).exp()
}

/// Returns the L2 error (weighted by dx, over all `n` points) at `t_final`.
pub fn l2_error(p: &Problem, method: Method) -> f64 {
    let m = p.n - 1; // distinct points on the circle
    let dx = 1.0 / m as f64;
    let steps = (p.t_final / (p.dtfac * dx) - 1e-9).ceil() as usize;
    let dt = p.t_final / steps as f64;
    let c = p.v * dt / dx;
    let mut u: Vec<f64> = (0..m).map(|i| profile(p, i as f64 * dx, 0.0)).collect();
    let mut next = vec![0.0; m];
    for _ in 0..steps {
        for i in 0..m {
            let (l, r) = (u[(i + m - 1) % m], u[(i + 1) % m]);
            next[i] = match method {
                Method::Upwind if c >= 0.0 => u[i] - c * (u[i] - l),
                Method::Upwind => u[i] - c * (r - u[i]),
                Method::LaxWendroff => {
                    u[i] - 0.5 * c * (r - l) + 0.5 * c * c * (r - 2.0 * u[i] + l)
                }
            };
        }
        std::mem::swap(&mut u, &mut next);
    }
    let t = steps as f64 * dt;
    let sum: f64 = (0..p.n)
        .map(|i| (u[i % m] - profile(p, i as f64 * dx, t)).powi(2))
        .sum();
    (sum * dx).sqrt()
}
