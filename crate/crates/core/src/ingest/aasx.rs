//! AASX subset: a ZIP archive whose `aasx/manifest.json` lists the shell
//! documents it carries, e.g. `{"shells": ["shells/dac.json"]}`.

use std::collections::BTreeMap;
use std::io::{Cursor, Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use zip::write::SimpleFileOptions;

use super::IngestError;
use crate::aas::{parse_shell, serialize_shell, AdministrationShell};

pub const MANIFEST_PATH: &str = "aasx/manifest.json";

#[derive(Serialize, Deserialize)]
struct Manifest {
    shells: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AasxPackage {
    entries: BTreeMap<String, Vec<u8>>,
    manifest: Vec<String>,
}

impl AasxPackage {
    pub fn new(
        entries: BTreeMap<String, Vec<u8>>,
        manifest: Vec<String>,
    ) -> Result<Self, IngestError> {
        if manifest.is_empty() {
            return Err(IngestError::Archive("empty manifest".into()));
        }
        if let Some(missing) = manifest.iter().find(|p| !entries.contains_key(*p)) {
            return Err(IngestError::Archive(format!(
                "manifest references missing entry `{missing}`"
            )));
        }
        Ok(AasxPackage { entries, manifest })
    }

    /// Packs shells as `shells/{index}_{idShort}.json` entries.
    pub fn from_shells(shells: &[AdministrationShell]) -> Result<Self, IngestError> {
        let mut entries = BTreeMap::new();
        let mut manifest = Vec::new();
        for (i, shell) in shells.iter().enumerate() {
            let path = format!("shells/{i:03}_{}.json", shell.id_short);
            entries.insert(path.clone(), serialize_shell(shell).into_bytes());
            manifest.push(path);
        }
        Self::new(entries, manifest)
    }

    pub fn manifest(&self) -> &[String] {
        &self.manifest
    }

    pub fn entries(&self) -> &BTreeMap<String, Vec<u8>> {
        &self.entries
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, IngestError> {
        let archive_err = |e: zip::result::ZipError| IngestError::Archive(e.to_string());
        let mut archive = zip::ZipArchive::new(Cursor::new(bytes)).map_err(archive_err)?;
        let mut entries = BTreeMap::new();
        for i in 0..archive.len() {
            let mut file = archive.by_index(i).map_err(archive_err)?;
            if file.is_dir() {
                continue;
            }
            let mut content = Vec::new();
            file.read_to_end(&mut content)
                .map_err(|e| IngestError::Archive(format!("reading `{}`: {e}", file.name())))?;
            entries.insert(file.name().to_string(), content);
        }
        let manifest_bytes = entries
            .get(MANIFEST_PATH)
            .ok_or_else(|| IngestError::Archive(format!("missing manifest `{MANIFEST_PATH}`")))?;
        let manifest: Manifest = serde_json::from_slice(manifest_bytes)
            .map_err(|e| IngestError::Archive(format!("malformed manifest: {e}")))?;
        Self::new(entries, manifest.shells)
    }

    /// Deterministic archive bytes: entries in path order with a fixed
    /// timestamp.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut writer = zip::ZipWriter::new(Cursor::new(Vec::new()));
        let options = SimpleFileOptions::default()
            .compression_method(zip::CompressionMethod::Deflated)
            .last_modified_time(zip::DateTime::default());
        let manifest = serde_json::to_vec_pretty(&Manifest {
            shells: self.manifest.clone(),
        })
        .expect("manifest serializes");
        let mut files: BTreeMap<&str, &[u8]> = self
            .entries
            .iter()
            .map(|(k, v)| (k.as_str(), v.as_slice()))
            .collect();
        files.insert(MANIFEST_PATH, &manifest);
        for (path, content) in files {
            writer
                .start_file(path, options)
                .expect("in-memory zip write");
            writer.write_all(content).expect("in-memory zip write");
        }
        writer.finish().expect("in-memory zip write").into_inner()
    }

    /// Parses the manifest's documents concurrently; the result keeps
    /// manifest order.
    pub fn shells(&self) -> Result<Vec<AdministrationShell>, IngestError> {
        self.manifest
            .par_iter()
            .map(|path| {
                let bytes = &self.entries[path];
                let text = std::str::from_utf8(bytes)
                    .map_err(|e| IngestError::Archive(format!("`{path}` is not UTF-8: {e}")))?;
                parse_shell(text).map_err(|source| IngestError::Document {
                    path: path.clone(),
                    source,
                })
            })
            .collect()
    }
}

pub fn read_aasx(bytes: &[u8]) -> Result<Vec<AdministrationShell>, IngestError> {
    AasxPackage::from_bytes(bytes)?.shells()
}
