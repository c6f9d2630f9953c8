//! Download instructions and checksum verification. Nothing is downloaded.

use crate::error::CliError;
use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::io::Read;
use std::path::{Path, PathBuf};

pub const SOURCES: [(&str, &str); 3] = [
    ("Antwerp Sigfox fingerprint dataset", "10.5281/zenodo.1193563"),
    ("train/validation/test split", "10.5281/zenodo.3228744"),
    ("reference experiment code", "10.5281/zenodo.3228752"),
];

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let mut f = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| CliError::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Parses `sha256sum` output: `<hex>  <name>` per line.
fn parse_checksums(text: &str) -> HashMap<String, String> {
    text.lines()
        .filter_map(|l| {
            let (hash, name) = l.trim().split_once(char::is_whitespace)?;
            let name = name.trim_start().trim_start_matches('*');
            Some((name.to_string(), hash.to_ascii_lowercase()))
        })
        .collect()
}

pub fn fetch(verify: &[PathBuf], sha256: Option<&str>, checksums: Option<&Path>) -> Result<(), CliError> {
    if verify.is_empty() {
        println!("Automatic download is not supported. Fetch the files from Zenodo:");
        for (what, doi) in SOURCES {
            println!("  {what}: https://doi.org/{doi}");
        }
        println!("Place them in $RFF_DATA_DIR as sigfox_dataset_antwerp.csv and split.csv,");
        println!("then check them with: rf-fingerprint fetch --verify FILE [--sha256 HEX | --checksums SUMS]");
        return Ok(());
    }
    if sha256.is_some() && verify.len() != 1 {
        return Err(CliError::input("--sha256 applies to a single --verify file"));
    }
    let expected = match checksums {
        Some(p) => parse_checksums(&std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?),
        None => HashMap::new(),
    };
    let mut mismatched = Vec::new();
    for path in verify {
        let actual = sha256_file(path)?;
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        let want = sha256
            .map(str::to_ascii_lowercase)
            .or_else(|| expected.get(&path.display().to_string()).or_else(|| expected.get(name)).cloned());
        let status = match want {
            Some(w) if w == actual => "OK",
            Some(_) => {
                mismatched.push(path.display().to_string());
                "MISMATCH"
            }
            None => "UNCHECKED",
        };
        println!("{actual}  {}  {status}", path.display());
    }
    if mismatched.is_empty() {
        Ok(())
    } else {
        Err(CliError::input(format!("checksum mismatch: {}", mismatched.join(", "))))
    }
}
