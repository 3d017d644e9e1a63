use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use super::{
    parse_interface, parse_param, parse_schedule, CclError, ImplementationInterface, ParameterDecl,
    ScheduleItem,
};

pub const INTERFACE_FILE: &str = "interface.ccl";
pub const PARAM_FILE: &str = "param.ccl";
pub const SCHEDULE_FILE: &str = "schedule.ccl";

/// `[A-Za-z_][A-Za-z0-9_]*`
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("{}: {source}", path.display())]
    Parse { path: PathBuf, source: CclError },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("`{0}` is not a valid thorn name")]
    BadName(String),
}

impl ManifestError {
    /// Declaration file and line the error points at, when known.
    pub fn location(&self) -> Option<(String, usize)> {
        match self {
            ManifestError::Parse { path, source } => Some((
                path.file_name()
                    .map(|f| f.to_string_lossy().into_owned())
                    .unwrap_or_default(),
                source.line,
            )),
            _ => None,
        }
    }
}

/// The three parsed declaration files of one thorn.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThornManifest {
    pub thorn_name: String,
    pub interface: ImplementationInterface,
    pub parameters: Vec<ParameterDecl>,
    pub schedule_items: Vec<ScheduleItem>,
    pub source_dir: PathBuf,
}

impl ThornManifest {
    /// Loads `interface.ccl`, `param.ccl` and `schedule.ccl` from `dir`.
    /// The thorn is named after the directory.
    pub fn load(dir: &Path) -> Result<Self, ManifestError> {
        let name = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let read = |file: &str| {
            let path = dir.join(file);
            fs::read_to_string(&path).map_err(|source| ManifestError::Io { path, source })
        };
        let (itf, par, sch) = (
            read(INTERFACE_FILE)?,
            read(PARAM_FILE)?,
            read(SCHEDULE_FILE)?,
        );
        Self::from_texts(&name, &itf, &par, &sch, dir)
    }

    pub fn from_texts(
        name: &str,
        interface: &str,
        param: &str,
        schedule: &str,
        dir: &Path,
    ) -> Result<Self, ManifestError> {
        if !is_identifier(name) {
            return Err(ManifestError::BadName(name.to_string()));
        }
        let wrap = |file: &str, source: CclError| ManifestError::Parse {
            path: dir.join(file),
            source,
        };
        Ok(ThornManifest {
            thorn_name: name.to_string(),
            interface: parse_interface(interface).map_err(|e| wrap(INTERFACE_FILE, e))?,
            parameters: parse_param(param).map_err(|e| wrap(PARAM_FILE, e))?,
            schedule_items: parse_schedule(schedule).map_err(|e| wrap(SCHEDULE_FILE, e))?,
            source_dir: dir.to_path_buf(),
        })
    }

    pub fn implements(&self) -> &str {
        &self.interface.implements
    }

    pub fn parameter(&self, name: &str) -> Option<&ParameterDecl> {
        self.parameters.iter().find(|p| p.name == name)
    }

    /// True if `scope` names this thorn or its implementation.
    pub fn answers_to(&self, scope: &str) -> bool {
        scope.eq_ignore_ascii_case(&self.thorn_name)
            || scope.eq_ignore_ascii_case(&self.interface.implements)
    }

    /// Loads every subdirectory of `root` that contains an `interface.ccl`,
    /// sorted by name.
    pub fn load_all(root: &Path) -> Result<Vec<ThornManifest>, ManifestError> {
        let entries = fs::read_dir(root).map_err(|source| ManifestError::Io {
            path: root.to_path_buf(),
            source,
        })?;
        let mut dirs: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join(INTERFACE_FILE).is_file())
            .collect();
        dirs.sort();
        dirs.iter().map(|d| ThornManifest::load(d)).collect()
    }
}
