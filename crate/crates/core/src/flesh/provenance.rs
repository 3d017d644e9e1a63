use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::Configuration;
use crate::ccl::ParameterFile;

/// A source file compiled into the binary, archived with its thorn.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceFile {
    /// Path inside the thorn's archive, e.g. `src/lib.rs`.
    pub path: String,
    pub contents: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThornArchive {
    pub thorn: String,
    pub archive: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceManifest {
    pub timestamp: String,
    pub thorns: Vec<ThornArchive>,
    pub parameter_file: String,
}

/// Writes `<thorn>.tar` for every active thorn and `manifest.json` into
/// `output_dir`, returning the manifest path. Archives hold the thorn's
/// declaration directory (minus its `test/` cases) and `sources`, with
/// sorted entries and zeroed metadata so identical inputs give identical
/// bytes.
pub fn archive_provenance(
    config: &Configuration,
    pf: &ParameterFile,
    sources: &BTreeMap<String, Vec<SourceFile>>,
    output_dir: &Path,
) -> io::Result<PathBuf> {
    fs::create_dir_all(output_dir)?;
    let mut thorns = Vec::new();
    for m in &config.active_thorns {
        let mut files: BTreeMap<String, Vec<u8>> = BTreeMap::new();
        if m.source_dir.is_dir() {
            collect(&m.source_dir, &m.source_dir, &mut files)?;
        }
        for s in sources.get(&m.thorn_name).into_iter().flatten() {
            files.insert(s.path.clone(), s.contents.as_bytes().to_vec());
        }
        let bytes = deterministic_tar(&m.thorn_name, &files)?;
        let name = format!("{}.tar", m.thorn_name);
        fs::write(output_dir.join(&name), &bytes)?;
        thorns.push(ThornArchive {
            thorn: m.thorn_name.clone(),
            archive: name,
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
    }
    let manifest = ProvenanceManifest {
        timestamp: chrono::Utc::now().to_rfc3339(),
        thorns,
        parameter_file: pf.source.clone(),
    };
    let path = output_dir.join("manifest.json");
    fs::write(
        &path,
        serde_json::to_string_pretty(&manifest).map_err(io::Error::other)?,
    )?;
    Ok(path)
}

fn collect(root: &Path, dir: &Path, files: &mut BTreeMap<String, Vec<u8>>) -> io::Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let rel = path.strip_prefix(root).expect("walk stays under root");
        if path.is_dir() {
            if dir == root && rel == Path::new("test") {
                continue;
            }
            collect(root, &path, files)?;
        } else {
            let key = rel
                .components()
                .map(|c| c.as_os_str().to_string_lossy())
                .collect::<Vec<_>>()
                .join("/");
            files.insert(key, fs::read(&path)?);
        }
    }
    Ok(())
}

fn deterministic_tar(prefix: &str, files: &BTreeMap<String, Vec<u8>>) -> io::Result<Vec<u8>> {
    let mut builder = tar::Builder::new(Vec::new());
    for (path, data) in files {
        let mut header = tar::Header::new_ustar();
        header.set_size(data.len() as u64);
        header.set_mode(0o644);
        header.set_mtime(0);
        header.set_uid(0);
        header.set_gid(0);
        header.set_entry_type(tar::EntryType::Regular);
        builder.append_data(&mut header, format!("{prefix}/{path}"), data.as_slice())?;
    }
    builder.into_inner()
}
