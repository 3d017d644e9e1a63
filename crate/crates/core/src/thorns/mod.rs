//! Demo thorns shipped with the framework. Their declaration files live in
//! the workspace `thorns/` directory; the routines are compiled in here.

pub mod advect1d;
pub mod advectmon;
pub mod diskdemo;
pub mod nanchecker;
pub mod synccheck;
pub mod warnprobe;

use std::path::PathBuf;

use crate::ccl::{ManifestError, ThornManifest};
use crate::runtime::{CodeRegistry, ThornCode};

/// Directory holding one subdirectory per shipped thorn.
pub fn thorn_dir() -> PathBuf {
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../thorns"))
}

pub fn load_thorns() -> Result<Vec<ThornManifest>, ManifestError> {
    ThornManifest::load_all(&thorn_dir())
}

/// Code for every shipped thorn. Thorns without routines are registered
/// too so that they are known to the registry.
pub fn registry() -> CodeRegistry {
    CodeRegistry::new()
        .with(ThornCode::new("slabdriver"))
        .with(ThornCode::new("star"))
        .with(advect1d::code())
        .with(advectmon::code())
        .with(diskdemo::code())
        .with(nanchecker::code())
        .with(synccheck::code())
        .with(warnprobe::code())
}
