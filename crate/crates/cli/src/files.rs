//! File IO with content hashing for run manifests.

use std::fs;
use std::path::{Path, PathBuf};

use csc_core::io::{decode_csct, decode_cscd, decode_pnm, encode_csct, encode_cscd, encode_pnm};
use csc_core::{ConvDictionary, Tensor3};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Tracks every file a run reads and writes.
#[derive(Debug, Default)]
pub struct FileLog {
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
}

impl FileLog {
    pub fn read(&mut self, path: &Path) -> CliResult<Vec<u8>> {
        let bytes = fs::read(path).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
        self.inputs.push(FileRecord {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        });
        Ok(bytes)
    }

    pub fn write(&mut self, path: &Path, bytes: &[u8]) -> CliResult<()> {
        write_raw(path, bytes)?;
        self.outputs.push(FileRecord {
            path: path.display().to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    pub fn read_tensor(&mut self, path: &Path) -> CliResult<Tensor3> {
        let bytes = self.read(path)?;
        decode_csct(&bytes).map_err(CliError::core(path.display().to_string()))
    }

    pub fn read_dictionary(&mut self, path: &Path) -> CliResult<ConvDictionary> {
        let bytes = self.read(path)?;
        decode_cscd(&bytes).map_err(CliError::core(path.display().to_string()))
    }

    pub fn read_image(&mut self, path: &Path) -> CliResult<Tensor3> {
        let bytes = self.read(path)?;
        decode_pnm(&bytes).map_err(CliError::core(path.display().to_string()))
    }

    /// CSCT tensor or PGM/PPM image, told apart by magic bytes.
    pub fn read_signal(&mut self, path: &Path) -> CliResult<Tensor3> {
        let bytes = self.read(path)?;
        let decoded = if bytes.starts_with(csc_core::io::CSCT_MAGIC) {
            decode_csct(&bytes)
        } else {
            decode_pnm(&bytes)
        };
        decoded.map_err(CliError::core(path.display().to_string()))
    }

    pub fn write_tensor(&mut self, path: &Path, t: &Tensor3) -> CliResult<()> {
        self.write(path, &encode_csct(t))
    }

    pub fn write_dictionary(&mut self, path: &Path, d: &ConvDictionary) -> CliResult<()> {
        self.write(path, &encode_cscd(d))
    }

    pub fn write_image(&mut self, path: &Path, t: &Tensor3) -> CliResult<()> {
        let bytes = encode_pnm(t).map_err(CliError::core(path.display().to_string()))?;
        self.write(path, &bytes)
    }
}

pub fn write_raw(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|source| CliError::Io {
            path: parent.display().to_string(),
            source,
        })?;
    }
    fs::write(path, bytes).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// `.pgm` for one channel, `.ppm` for three.
pub fn image_name(dir: &Path, stem: &str, channels: usize) -> PathBuf {
    dir.join(format!("{stem}.{}", if channels == 3 { "ppm" } else { "pgm" }))
}
