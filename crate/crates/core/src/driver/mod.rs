//! The grid driver: slab decomposition over simulated ranks, distributed
//! storage with timelevels and poisoning, ghost exchange, checksums,
//! reductions, Courant checks and ASCII output.

mod field;
mod hierarchy;
mod reduce;

use serde::Serialize;
use thiserror::Error;

pub use field::{Field, FieldMut};
pub use hierarchy::{fnv1a, GridHierarchy, PoisonHit, RankView, VarStorage};
pub use reduce::{ExactSum, ReduceOp};

/// Global grid index; unused dimensions are 0.
pub type Idx = [usize; 3];

/// Half-open box of global indices. Unused dimensions span `0..1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct IndexBox {
    pub lo: Idx,
    pub hi: Idx,
}

impl IndexBox {
    pub fn extent(&self, d: usize) -> usize {
        self.hi[d].saturating_sub(self.lo[d])
    }

    pub fn len(&self) -> usize {
        (0..3).map(|d| self.extent(d)).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, g: Idx) -> bool {
        (0..3).all(|d| g[d] >= self.lo[d] && g[d] < self.hi[d])
    }

    /// Row-major offset of `g` within this box (last index fastest).
    pub fn offset(&self, g: Idx) -> usize {
        debug_assert!(self.contains(g), "{g:?} outside {self:?}");
        ((g[0] - self.lo[0]) * self.extent(1) + (g[1] - self.lo[1])) * self.extent(2)
            + (g[2] - self.lo[2])
    }

    /// All indices in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = Idx> + '_ {
        let b = *self;
        (b.lo[0]..b.hi[0]).flat_map(move |i| {
            (b.lo[1]..b.hi[1]).flat_map(move |j| (b.lo[2]..b.hi[2]).map(move |k| [i, j, k]))
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DriverError {
    #[error("invalid domain: {0}")]
    Domain(String),
    #[error("variable {0} has no storage")]
    NoStorage(String),
    #[error(
        "variable {var}: storage already active with {active} timelevels, requested {requested}"
    )]
    TimelevelMismatch {
        var: String,
        active: usize,
        requested: usize,
    },
    #[error("variable {var}: timelevel {tl} not available ({active} active)")]
    BadTimelevel {
        var: String,
        tl: usize,
        active: usize,
    },
    #[error("variable {0} has a single timelevel and cannot be rotated")]
    SingleTimelevel(String),
    #[error("variable {0} is a scalar")]
    Scalar(String),
    #[error("variable {0} is not a scalar")]
    NotScalar(String),
    #[error("I/O error: {0}")]
    Io(String),
}

/// Grid extent and resolution before decomposition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DomainSpec {
    pub dims: usize,
    pub lower: [f64; 3],
    pub upper: [f64; 3],
    /// Base-level points per dimension.
    pub points: [usize; 3],
    pub ghost_width: usize,
    pub nprocs: usize,
    pub convergence_level: u32,
    pub convergence_factor: f64,
}

impl DomainSpec {
    /// Points per dimension at the configured convergence level:
    /// `N_level - 1 = (N_base - 1) / factor^level`, which must come out as
    /// a positive integer.
    pub fn level_points(&self) -> Result<[usize; 3], DriverError> {
        let mut out = [1; 3];
        let scale = self.convergence_factor.powi(self.convergence_level as i32);
        for (d, slot) in out.iter_mut().enumerate().take(self.dims) {
            let intervals = (self.points[d] as f64 - 1.0) / scale;
            let rounded = intervals.round();
            if rounded < 1.0 || (intervals - rounded).abs() > 1e-9 * intervals.max(1.0) {
                return Err(DriverError::Domain(format!(
                    "{} intervals in dimension {d} are not divisible by convergence_factor^level = {scale}",
                    self.points[d] - 1
                )));
            }
            *slot = rounded as usize + 1;
        }
        Ok(out)
    }

    pub fn geometry(&self) -> Result<Geometry, DriverError> {
        if !(1..=3).contains(&self.dims) {
            return Err(DriverError::Domain(format!(
                "dims must be 1, 2 or 3, got {}",
                self.dims
            )));
        }
        if self.ghost_width == 0 {
            return Err(DriverError::Domain("ghost_width must be at least 1".into()));
        }
        if self.nprocs == 0 {
            return Err(DriverError::Domain("nprocs must be at least 1".into()));
        }
        if self.convergence_factor <= 1.0 {
            return Err(DriverError::Domain(
                "convergence_factor must exceed 1".into(),
            ));
        }
        let n = self.level_points()?;
        let mut dx = [0.0; 3];
        for d in 0..self.dims {
            if n[d] < 2 {
                return Err(DriverError::Domain(format!(
                    "dimension {d} needs at least 2 points"
                )));
            }
            if self.upper[d] <= self.lower[d] {
                return Err(DriverError::Domain(format!(
                    "dimension {d} has an empty extent"
                )));
            }
            dx[d] = (self.upper[d] - self.lower[d]) / (n[d] - 1) as f64;
        }
        Ok(Geometry {
            dims: self.dims,
            global: IndexBox { lo: [0; 3], hi: n },
            lower: self.lower,
            dx,
        })
    }
}

/// Global index space and coordinates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Geometry {
    pub dims: usize,
    pub global: IndexBox,
    pub lower: [f64; 3],
    /// Spacing per used dimension; unused entries are 0.
    pub dx: [f64; 3],
}

impl Geometry {
    pub fn coord(&self, g: Idx) -> [f64; 3] {
        let mut x = [0.0; 3];
        for d in 0..self.dims {
            x[d] = self.lower[d] + g[d] as f64 * self.dx[d];
        }
        x
    }

    pub fn min_dx(&self) -> f64 {
        self.dx[..self.dims]
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Volume element used by norms.
    pub fn cell_volume(&self) -> f64 {
        self.dx[..self.dims].iter().product()
    }

    /// The decomposed dimension.
    pub fn slab_dim(&self) -> usize {
        self.dims - 1
    }

    /// True if `g` lies on the outer boundary of the domain.
    pub fn is_physical_boundary(&self, g: Idx) -> bool {
        (0..self.dims).any(|d| g[d] == 0 || g[d] + 1 == self.global.hi[d])
    }
}

/// One simulated rank's share of the grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Patch {
    pub rank: usize,
    pub owned: IndexBox,
    /// Owned box plus ghost layers at inter-rank faces.
    pub local: IndexBox,
    /// Ghost layer below along the slab dimension (not a physical face).
    pub ghost_lower: bool,
    pub ghost_upper: bool,
}

/// Balanced slab sizes: the first `n % p` ranks get one extra point.
pub fn slab_sizes(n: usize, nprocs: usize) -> Result<Vec<usize>, DriverError> {
    if nprocs == 0 || nprocs > n {
        return Err(DriverError::Domain(format!(
            "cannot split {n} points over {nprocs} ranks"
        )));
    }
    Ok((0..nprocs)
        .map(|r| n / nprocs + usize::from(r < n % nprocs))
        .collect())
}

pub fn decompose(
    geom: &Geometry,
    nprocs: usize,
    ghost_width: usize,
) -> Result<Vec<Patch>, DriverError> {
    let d = geom.slab_dim();
    let n = geom.global.extent(d);
    let sizes = slab_sizes(n, nprocs)?;
    if nprocs > 1 && sizes.iter().any(|&s| s < ghost_width) {
        return Err(DriverError::Domain(format!(
            "each rank must own at least ghost_width = {ghost_width} points along the decomposed dimension"
        )));
    }
    let mut start = 0;
    let mut out = Vec::with_capacity(nprocs);
    for (rank, &size) in sizes.iter().enumerate() {
        let mut owned = geom.global;
        owned.lo[d] = start;
        owned.hi[d] = start + size;
        let ghost_lower = rank > 0;
        let ghost_upper = rank + 1 < nprocs;
        let mut local = owned;
        if ghost_lower {
            local.lo[d] -= ghost_width;
        }
        if ghost_upper {
            local.hi[d] += ghost_width;
        }
        out.push(Patch {
            rank,
            owned,
            local,
            ghost_lower,
            ghost_upper,
        });
        start += size;
    }
    Ok(out)
}

/// Courant factor `max_speed * dt / min dx`; `Err(factor)` when it exceeds
/// `limit`.
pub fn check_timestep(dt: f64, max_speed: f64, geom: &Geometry, limit: f64) -> Result<f64, f64> {
    let factor = max_speed * dt / geom.min_dx();
    if factor > limit {
        Err(factor)
    } else {
        Ok(factor)
    }
}
