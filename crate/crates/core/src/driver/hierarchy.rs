use std::fs::OpenOptions;
use std::hash::Hasher;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::reduce::Partial;
use super::{DriverError, Field, FieldMut, Geometry, Idx, IndexBox, Patch, ReduceOp};
use crate::ccl::GroupKind;
use crate::flesh::VarId;

/// FNV-1a (64-bit) over the little-endian bytes of `values`.
pub fn fnv1a(values: impl IntoIterator<Item = f64>) -> u64 {
    let mut h = fnv::FnvHasher::default();
    for v in values {
        h.write(&v.to_le_bytes());
    }
    h.finish()
}

/// Storage bookkeeping for one variable group.
#[derive(Debug, Clone, Serialize)]
pub struct VarStorage {
    pub name: String,
    pub kind: GroupKind,
    pub declared_timelevels: usize,
    /// Allocated timelevels; 0 when storage is off.
    pub active: usize,
}

/// First-found poison location, reported per owning rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PoisonHit {
    pub index: Idx,
    pub rank: usize,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct RankData {
    /// `[var][timelevel]` local buffers.
    pub(crate) vars: Vec<Vec<Vec<f64>>>,
}

/// Distributed storage for every variable group of a run. Ranks are
/// simulated; collective operations below act on all of them at once.
#[derive(Debug, Clone)]
pub struct GridHierarchy {
    pub geometry: Geometry,
    pub patches: Vec<Patch>,
    pub ghost_width: usize,
    pub vars: Vec<VarStorage>,
    pub(crate) ranks: Vec<RankData>,
    /// `[var][timelevel]` for scalar groups.
    scalars: Vec<Vec<f64>>,
    /// Value written into newly allocated memory, if poisoning is on.
    pub poison: Option<f64>,
    /// Owning rank of every index along the slab dimension.
    owner: Vec<usize>,
}

impl GridHierarchy {
    pub fn new(
        geometry: Geometry,
        patches: Vec<Patch>,
        ghost_width: usize,
        vars: Vec<VarStorage>,
        poison: Option<f64>,
    ) -> Self {
        let d = geometry.slab_dim();
        let mut owner = vec![0; geometry.global.extent(d)];
        for p in &patches {
            for slot in &mut owner[p.owned.lo[d]..p.owned.hi[d]] {
                *slot = p.rank;
            }
        }
        let nvars = vars.len();
        GridHierarchy {
            ranks: vec![
                RankData {
                    vars: vec![Vec::new(); nvars]
                };
                patches.len()
            ],
            scalars: vec![Vec::new(); nvars],
            geometry,
            patches,
            ghost_width,
            vars,
            poison,
            owner,
        }
    }

    pub fn nprocs(&self) -> usize {
        self.patches.len()
    }

    pub fn owner_of(&self, g: Idx) -> usize {
        self.owner[g[self.geometry.slab_dim()]]
    }

    pub fn var(&self, v: VarId) -> &VarStorage {
        &self.vars[v.0]
    }

    pub fn has_storage(&self, v: VarId) -> bool {
        self.vars[v.0].active > 0
    }

    fn is_scalar(&self, v: VarId) -> bool {
        self.vars[v.0].kind == GroupKind::Scalar
    }

    pub fn enable_storage(&mut self, v: VarId, timelevels: usize) -> Result<(), DriverError> {
        let meta = &self.vars[v.0];
        if meta.active > 0 {
            if meta.active != timelevels {
                return Err(DriverError::TimelevelMismatch {
                    var: meta.name.clone(),
                    active: meta.active,
                    requested: timelevels,
                });
            }
            return Ok(());
        }
        let fill = self.poison.unwrap_or(0.0);
        if self.is_scalar(v) {
            self.scalars[v.0] = vec![fill; timelevels];
        } else {
            for (rank, p) in self.ranks.iter_mut().zip(&self.patches) {
                rank.vars[v.0] = vec![vec![fill; p.local.len()]; timelevels];
            }
        }
        self.vars[v.0].active = timelevels;
        Ok(())
    }

    pub fn disable_storage(&mut self, v: VarId) {
        self.scalars[v.0].clear();
        for rank in &mut self.ranks {
            rank.vars[v.0].clear();
        }
        self.vars[v.0].active = 0;
    }

    pub fn check_timelevel(&self, v: VarId, tl: usize) -> Result<(), DriverError> {
        let meta = &self.vars[v.0];
        if meta.active == 0 {
            return Err(DriverError::NoStorage(meta.name.clone()));
        }
        if tl >= meta.active {
            return Err(DriverError::BadTimelevel {
                var: meta.name.clone(),
                tl,
                active: meta.active,
            });
        }
        Ok(())
    }

    fn check_grid(&self, v: VarId, tl: usize) -> Result<(), DriverError> {
        if self.is_scalar(v) {
            return Err(DriverError::Scalar(self.vars[v.0].name.clone()));
        }
        self.check_timelevel(v, tl)
    }

    pub fn field(&self, rank: usize, v: VarId, tl: usize) -> Result<Field, DriverError> {
        self.check_grid(v, tl)?;
        Ok(Field {
            data: self.ranks[rank].vars[v.0][tl].clone(),
            local: self.patches[rank].local,
        })
    }

    pub fn field_mut(
        &mut self,
        rank: usize,
        v: VarId,
        tl: usize,
    ) -> Result<FieldMut<'_>, DriverError> {
        self.check_grid(v, tl)?;
        Ok(FieldMut {
            data: &mut self.ranks[rank].vars[v.0][tl],
            local: self.patches[rank].local,
        })
    }

    pub fn scalar(&self, v: VarId, tl: usize) -> Result<f64, DriverError> {
        if !self.is_scalar(v) {
            return Err(DriverError::NotScalar(self.vars[v.0].name.clone()));
        }
        self.check_timelevel(v, tl)?;
        Ok(self.scalars[v.0][tl])
    }

    pub fn set_scalar(&mut self, v: VarId, tl: usize, value: f64) -> Result<(), DriverError> {
        self.scalar(v, tl)?;
        self.scalars[v.0][tl] = value;
        Ok(())
    }

    /// Copies owner values into every inter-rank ghost layer of timelevel
    /// 0. Physical boundaries are left alone.
    pub fn sync(&mut self, v: VarId) -> Result<(), DriverError> {
        self.check_grid(v, 0)?;
        let d = self.geometry.slab_dim();
        for r in 0..self.nprocs() {
            let p = self.patches[r].clone();
            for (has, neighbor, range) in [
                (
                    p.ghost_lower,
                    r.wrapping_sub(1),
                    p.local.lo[d]..p.owned.lo[d],
                ),
                (p.ghost_upper, r + 1, p.owned.hi[d]..p.local.hi[d]),
            ] {
                if !has {
                    continue;
                }
                let mut ghost = p.local;
                ghost.lo[d] = range.start;
                ghost.hi[d] = range.end;
                let src_box = self.patches[neighbor].local;
                for g in ghost.iter() {
                    let value = self.ranks[neighbor].vars[v.0][0][src_box.offset(g)];
                    self.ranks[r].vars[v.0][0][p.local.offset(g)] = value;
                }
            }
        }
        Ok(())
    }

    /// Owned values of every rank assembled in global row-major order.
    pub fn gather(&self, v: VarId, tl: usize) -> Result<Vec<f64>, DriverError> {
        self.check_grid(v, tl)?;
        Ok(self
            .geometry
            .global
            .iter()
            .map(|g| self.value_at(v, tl, g))
            .collect())
    }

    fn value_at(&self, v: VarId, tl: usize, g: Idx) -> f64 {
        let r = self.owner_of(g);
        self.ranks[r].vars[v.0][tl][self.patches[r].local.offset(g)]
    }

    /// Values at global indices, read from their owners.
    pub fn gather_points(
        &self,
        v: VarId,
        tl: usize,
        points: &[Idx],
    ) -> Result<Vec<f64>, DriverError> {
        self.check_grid(v, tl)?;
        Ok(points.iter().map(|&g| self.value_at(v, tl, g)).collect())
    }

    /// Writes values at global indices on the owner and on every rank that
    /// holds a ghost copy.
    pub fn scatter_points(
        &mut self,
        v: VarId,
        tl: usize,
        values: &[(Idx, f64)],
    ) -> Result<(), DriverError> {
        self.check_grid(v, tl)?;
        for &(g, value) in values {
            for (rank, p) in self.ranks.iter_mut().zip(&self.patches) {
                if p.local.contains(g) {
                    rank.vars[v.0][tl][p.local.offset(g)] = value;
                }
            }
        }
        Ok(())
    }

    pub fn checksum(&self, v: VarId, tl: usize) -> Result<u64, DriverError> {
        if self.is_scalar(v) {
            self.check_timelevel(v, tl)?;
            return Ok(fnv1a([self.scalars[v.0][tl]]));
        }
        self.check_grid(v, tl)?;
        Ok(fnv1a(
            self.geometry.global.iter().map(|g| self.value_at(v, tl, g)),
        ))
    }

    /// Reduction over owned points; partial results are formed per rank
    /// and combined in rank order.
    pub fn reduce(&self, v: VarId, tl: usize, op: ReduceOp) -> Result<f64, DriverError> {
        self.check_grid(v, tl)?;
        let partials: Vec<Partial> = self
            .patches
            .iter()
            .map(|p| {
                let buf = &self.ranks[p.rank].vars[v.0][tl];
                let vals: Vec<f64> = p.owned.iter().map(|g| buf[p.local.offset(g)]).collect();
                op.partial(vals.iter())
            })
            .collect();
        Ok(op.combine(&partials, self.geometry.cell_volume()))
    }

    /// Every owned index whose value equals `poison` exactly, in global
    /// row-major order.
    pub fn find_poison(
        &self,
        v: VarId,
        tl: usize,
        poison: f64,
    ) -> Result<Vec<PoisonHit>, DriverError> {
        self.check_grid(v, tl)?;
        Ok(self
            .geometry
            .global
            .iter()
            .filter(|&g| self.value_at(v, tl, g) == poison)
            .map(|g| PoisonHit {
                index: g,
                rank: self.owner_of(g),
            })
            .collect())
    }

    /// Shifts timelevel k to k+1; timelevel 0 becomes scratch, poisoned if
    /// poisoning is on.
    pub fn rotate(&mut self, v: VarId) -> Result<(), DriverError> {
        let meta = &self.vars[v.0];
        if meta.active == 0 {
            return Err(DriverError::NoStorage(meta.name.clone()));
        }
        if meta.active < 2 {
            return Err(DriverError::SingleTimelevel(meta.name.clone()));
        }
        if self.is_scalar(v) {
            self.scalars[v.0].rotate_right(1);
            if let Some(p) = self.poison {
                self.scalars[v.0][0] = p;
            }
            return Ok(());
        }
        for rank in &mut self.ranks {
            let tls = &mut rank.vars[v.0];
            tls.rotate_right(1);
            if let Some(p) = self.poison {
                tls[0].fill(p);
            }
        }
        Ok(())
    }

    /// Appends `iter time x [y [z]] value` lines in global index order, or a
    /// single `iter time value` line for a scalar.
    pub fn write_ascii(
        &self,
        v: VarId,
        dir: &Path,
        iteration: u64,
        time: f64,
    ) -> Result<std::path::PathBuf, DriverError> {
        let short = self.vars[v.0]
            .name
            .rsplit("::")
            .next()
            .unwrap_or_default()
            .to_string();
        let path = dir.join(format!("{short}.asc"));
        let mut text = String::new();
        let values = if self.vars[v.0].kind == GroupKind::Scalar {
            text.push_str(&format!(
                "{iteration} {time:.16e} {:.16e}\n",
                self.scalar(v, 0)?
            ));
            Vec::new()
        } else {
            self.gather(v, 0)?
        };
        for (g, value) in self.geometry.global.iter().zip(values) {
            let x = self.geometry.coord(g);
            text.push_str(&format!("{iteration} {time:.16e}"));
            for xd in &x[..self.geometry.dims] {
                text.push_str(&format!(" {xd:.16e}"));
            }
            text.push_str(&format!(" {value:.16e}\n"));
        }
        let io = |e: std::io::Error| DriverError::Io(format!("{}: {e}", path.display()));
        std::fs::create_dir_all(dir).map_err(io)?;
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io)?;
        f.write_all(text.as_bytes()).map_err(io)?;
        Ok(path)
    }

    /// Ghost-layer boxes of `rank` (inter-rank faces only).
    pub fn ghost_boxes(&self, rank: usize) -> Vec<IndexBox> {
        let d = self.geometry.slab_dim();
        let p = &self.patches[rank];
        let mut out = Vec::new();
        if p.ghost_lower {
            let mut b = p.local;
            b.hi[d] = p.owned.lo[d];
            out.push(b);
        }
        if p.ghost_upper {
            let mut b = p.local;
            b.lo[d] = p.owned.hi[d];
            out.push(b);
        }
        out
    }

    /// Owner-side value for a ghost index of `rank`, and the ghost's own
    /// copy, on timelevel 0.
    pub fn ghost_pair(&self, v: VarId, rank: usize, g: Idx) -> (f64, f64) {
        let p = &self.patches[rank];
        let mine = self.ranks[rank].vars[v.0][0][p.local.offset(g)];
        (self.value_at(v, 0, g), mine)
    }

    /// One mutable view per rank, for per-block routine execution.
    pub fn rank_views(&mut self) -> Vec<RankView<'_>> {
        let (patches, geometry, vars, scalars) =
            (&self.patches, &self.geometry, &self.vars, &self.scalars);
        patches
            .iter()
            .zip(self.ranks.iter_mut())
            .map(|(patch, data)| RankView {
                patch,
                geometry,
                vars,
                scalars,
                data,
            })
            .collect()
    }
}

/// A rank's local slice of the hierarchy. Scalars are read-only here.
#[derive(Debug)]
pub struct RankView<'a> {
    pub patch: &'a Patch,
    pub geometry: &'a Geometry,
    vars: &'a [VarStorage],
    scalars: &'a [Vec<f64>],
    data: &'a mut RankData,
}

impl RankView<'_> {
    fn check(&self, v: VarId, tl: usize) -> Result<(), DriverError> {
        let meta = &self.vars[v.0];
        if meta.kind == GroupKind::Scalar {
            return Err(DriverError::Scalar(meta.name.clone()));
        }
        if meta.active == 0 {
            return Err(DriverError::NoStorage(meta.name.clone()));
        }
        if tl >= meta.active {
            return Err(DriverError::BadTimelevel {
                var: meta.name.clone(),
                tl,
                active: meta.active,
            });
        }
        Ok(())
    }

    pub fn field(&self, v: VarId, tl: usize) -> Result<Field, DriverError> {
        self.check(v, tl)?;
        Ok(Field {
            data: self.data.vars[v.0][tl].clone(),
            local: self.patch.local,
        })
    }

    pub fn field_mut(&mut self, v: VarId, tl: usize) -> Result<FieldMut<'_>, DriverError> {
        self.check(v, tl)?;
        Ok(FieldMut {
            data: &mut self.data.vars[v.0][tl],
            local: self.patch.local,
        })
    }

    pub fn scalar(&self, v: VarId, tl: usize) -> Result<f64, DriverError> {
        let meta = &self.vars[v.0];
        if meta.kind != GroupKind::Scalar {
            return Err(DriverError::NotScalar(meta.name.clone()));
        }
        if tl >= meta.active {
            return Err(if meta.active == 0 {
                DriverError::NoStorage(meta.name.clone())
            } else {
                DriverError::BadTimelevel {
                    var: meta.name.clone(),
                    tl,
                    active: meta.active,
                }
            });
        }
        Ok(self.scalars[v.0][tl])
    }
}
