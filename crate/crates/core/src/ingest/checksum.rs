use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use md5::{Digest, Md5};

use super::IngestError;

pub fn md5_hex(path: &Path) -> Result<String, IngestError> {
    let mut file = File::open(path).map_err(|e| IngestError::io(path, e))?;
    let mut hasher = Md5::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf).map_err(|e| IngestError::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

fn valid_digest(s: &str) -> bool {
    s.len() == 32 && s.chars().all(|c| c.is_ascii_hexdigit())
}

/// True iff the MD5 of the file's raw bytes equals `expected` (hex, any case).
pub fn verify_checksum(path: &Path, expected: &str) -> Result<bool, IngestError> {
    let expected = expected.trim();
    if !valid_digest(expected) {
        return Err(IngestError::InvalidDigest(expected.to_string()));
    }
    Ok(md5_hex(path)?.eq_ignore_ascii_case(expected))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub digest: String,
    pub file_name: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ManifestStatus {
    Match,
    Mismatch { actual: String },
    Missing,
}

/// Parse `md5sum`-style lines: `<hex>  <name>` (or `<hex> *<name>`).
/// Blank lines and `#` comments are skipped.
pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>, IngestError> {
    let mut entries = Vec::new();
    for line in text.lines() {
        let line = line.trim_end();
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let (digest, rest) = line
            .split_once(' ')
            .ok_or_else(|| IngestError::InvalidDigest(line.to_string()))?;
        if !valid_digest(digest) {
            return Err(IngestError::InvalidDigest(digest.to_string()));
        }
        let name = rest
            .strip_prefix(' ')
            .or_else(|| rest.strip_prefix('*'))
            .unwrap_or(rest);
        entries.push(ManifestEntry {
            digest: digest.to_ascii_lowercase(),
            file_name: name.to_string(),
        });
    }
    Ok(entries)
}

/// Check every manifest entry against files in `dir`.
pub fn verify_manifest(
    manifest: &Path,
    dir: &Path,
) -> Result<Vec<(ManifestEntry, PathBuf, ManifestStatus)>, IngestError> {
    let file = File::open(manifest).map_err(|e| IngestError::io(manifest, e))?;
    let mut text = String::new();
    for line in BufReader::new(file).lines() {
        text.push_str(&line.map_err(|e| IngestError::io(manifest, e))?);
        text.push('\n');
    }
    let mut out = Vec::new();
    for entry in parse_manifest(&text)? {
        let path = dir.join(&entry.file_name);
        let status = if !path.is_file() {
            ManifestStatus::Missing
        } else {
            let actual = md5_hex(&path)?;
            if actual == entry.digest {
                ManifestStatus::Match
            } else {
                ManifestStatus::Mismatch { actual }
            }
        };
        out.push((entry, path, status));
    }
    Ok(out)
}
