//! Correctness checks that ride the schedule: NaN/Inf scanning with mask
//! files, and ghost-zone sync verification.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::driver::{DriverError, GridHierarchy, Idx};
use crate::flesh::VarId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NanClass {
    Nan,
    #[serde(rename = "+inf")]
    PosInf,
    #[serde(rename = "-inf")]
    NegInf,
}

impl NanClass {
    pub fn of(x: f64) -> Option<NanClass> {
        if x.is_nan() {
            Some(NanClass::Nan)
        } else if x == f64::INFINITY {
            Some(NanClass::PosInf)
        } else if x == f64::NEG_INFINITY {
            Some(NanClass::NegInf)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NanReport {
    pub variable: String,
    pub iteration: u64,
    pub count: usize,
    /// Global indices, trimmed to the grid's dimensionality.
    pub points: Vec<Vec<usize>>,
    pub classes: Vec<NanClass>,
}

fn trim(g: Idx, dims: usize) -> Vec<usize> {
    g[..dims].to_vec()
}

/// Scans the owned region of timelevel `tl` for non-finite values.
pub fn nan_scan(
    h: &GridHierarchy,
    v: VarId,
    tl: usize,
    iteration: u64,
) -> Result<NanReport, DriverError> {
    let values = h.gather(v, tl)?;
    let dims = h.geometry.dims;
    let mut points = Vec::new();
    let mut classes = Vec::new();
    for (g, x) in h.geometry.global.iter().zip(values) {
        if let Some(c) = NanClass::of(x) {
            points.push(trim(g, dims));
            classes.push(c);
        }
    }
    Ok(NanReport {
        variable: h.var(v).name.clone(),
        iteration,
        count: points.len(),
        points,
        classes,
    })
}

/// Mask file contents: `<var>.nanmask.<iter>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NanMask {
    pub variable: String,
    pub iteration: u64,
    pub shape: Vec<usize>,
    pub points: Vec<Vec<usize>>,
}

impl NanMask {
    pub fn from_report(report: &NanReport, shape: Vec<usize>) -> Self {
        let mut points = report.points.clone();
        points.sort();
        NanMask {
            variable: report.variable.clone(),
            iteration: report.iteration,
            shape,
            points,
        }
    }

    pub fn file_name(&self) -> String {
        let short = self.variable.rsplit("::").next().unwrap_or(&self.variable);
        format!("{short}.nanmask.{}.json", self.iteration)
    }
}

pub fn write_mask(mask: &NanMask, dir: &Path) -> io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(mask.file_name());
    fs::write(
        &path,
        serde_json::to_string(mask).map_err(io::Error::other)?,
    )?;
    Ok(path)
}

pub fn read_mask(path: &Path) -> io::Result<NanMask> {
    serde_json::from_str(&fs::read_to_string(path)?).map_err(io::Error::other)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyncMismatch {
    pub index: Vec<usize>,
    /// Rank holding the stale ghost copy.
    pub rank: usize,
    pub owner: usize,
    pub ghost_value: f64,
    pub owner_value: f64,
}

/// Compares every inter-rank ghost cell of timelevel 0 with its owner's
/// value, bit for bit.
pub fn check_sync(h: &GridHierarchy, v: VarId) -> Result<Vec<SyncMismatch>, DriverError> {
    h.check_timelevel(v, 0)?;
    let dims = h.geometry.dims;
    let mut out = Vec::new();
    for rank in 0..h.nprocs() {
        for b in h.ghost_boxes(rank) {
            for g in b.iter() {
                let (owner_value, ghost_value) = h.ghost_pair(v, rank, g);
                if owner_value.to_bits() != ghost_value.to_bits() {
                    out.push(SyncMismatch {
                        index: trim(g, dims),
                        rank,
                        owner: h.owner_of(g),
                        ghost_value,
                        owner_value,
                    });
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ccl::GroupKind;
    use crate::driver::{decompose, DomainSpec, VarStorage};

    fn grid(nprocs: usize) -> GridHierarchy {
        let spec = DomainSpec {
            dims: 1,
            lower: [0.0; 3],
            upper: [1.0, 0.0, 0.0],
            points: [10, 1, 1],
            ghost_width: 2,
            nprocs,
            convergence_level: 0,
            convergence_factor: 2.0,
        };
        let g = spec.geometry().unwrap();
        let p = decompose(&g, nprocs, 2).unwrap();
        let vars = vec![VarStorage {
            name: "a::f".into(),
            kind: GroupKind::Gf,
            declared_timelevels: 1,
            active: 0,
        }];
        let mut h = GridHierarchy::new(g, p, 2, vars, None);
        h.enable_storage(VarId(0), 1).unwrap();
        h
    }

    #[test]
    fn classification() {
        let mut h = grid(2);
        h.field_mut(0, VarId(0), 0).unwrap().set1(3, f64::NAN);
        h.field_mut(1, VarId(0), 0)
            .unwrap()
            .set1(7, f64::NEG_INFINITY);
        let r = nan_scan(&h, VarId(0), 0, 4).unwrap();
        assert_eq!(r.points, [vec![3], vec![7]]);
        assert_eq!(r.classes, [NanClass::Nan, NanClass::NegInf]);
        let mask = NanMask::from_report(&r, vec![10]);
        let dir = tempfile::tempdir().unwrap();
        let path = write_mask(&mask, dir.path()).unwrap();
        assert!(path.ends_with("f.nanmask.4.json"));
        assert!(fs::read_to_string(&path)
            .unwrap()
            .contains("\"points\":[[3],[7]]"));
        assert_eq!(read_mask(&path).unwrap(), mask);
    }

    #[test]
    fn stale_ghosts_reported() {
        let mut h = grid(2);
        assert!(check_sync(&h, VarId(0)).unwrap().is_empty());
        // Rank 0 owns 0..5; rank 1 holds ghosts 3 and 4.
        h.field_mut(0, VarId(0), 0).unwrap().set1(4, 1.0);
        h.field_mut(0, VarId(0), 0).unwrap().set1(1, 1.0);
        let m = check_sync(&h, VarId(0)).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!((m[0].index[0], m[0].rank, m[0].owner), (4, 1, 0));
        h.sync(VarId(0)).unwrap();
        assert!(check_sync(&h, VarId(0)).unwrap().is_empty());
        assert!(check_sync(&grid(1), VarId(0)).unwrap().is_empty());
    }
}
