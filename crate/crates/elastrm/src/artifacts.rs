//! On-disk artifacts. Binary files are little-endian and start with a magic
//! string, a format version and the 64-character hex config hash.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use elastrm_core::scatmat::ScatteringMatrixBlocks;
use elastrm_core::trm::{FarFieldOperator, ImagingGrid};
use elastrm_core::{Error as CoreError, C64};

use crate::error::CliError;

pub const OPERATOR_MAGIC: &[u8; 8] = b"ELOPER\0\0";
pub const IMAGE_MAGIC: &[u8; 8] = b"ELIMAG\0\0";
pub const FORMAT_VERSION: u32 = 1;

pub fn read_esmx(path: &Path, order: usize) -> Result<ScatteringMatrixBlocks, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    ScatteringMatrixBlocks::from_esmx_bytes(&bytes, order, path.display().to_string()).map_err(CliError::Input)
}

pub fn write_esmx(path: &Path, blocks: &ScatteringMatrixBlocks) -> Result<(), CliError> {
    write_bytes(path, &blocks.to_esmx_bytes())
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(value).expect("JSON values serialize");
    s.push('\n');
    write_bytes(path, s.as_bytes())
}

fn header(magic: &[u8; 8], hash: &str) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(magic);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    let mut h = [b'0'; 64];
    for (d, s) in h.iter_mut().zip(hash.bytes()) {
        *d = s;
    }
    out.extend_from_slice(&h);
    out
}

/// Operator file: header, `n_theta: u32, n_phi: u32, kappa_p, kappa_s,
/// omega, noise: f64`, then the matrix column-major as (re, im) pairs.
pub fn encode_operator(op: &FarFieldOperator, hash: &str) -> Vec<u8> {
    let mut out = header(OPERATOR_MAGIC, hash);
    out.extend_from_slice(&(op.grid.n_theta as u32).to_le_bytes());
    out.extend_from_slice(&(op.grid.n_phi as u32).to_le_bytes());
    for v in [op.material.kappa_p, op.material.kappa_s, op.material.omega, op.noise_level] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for z in op.matrix.iter() {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    out
}

/// Decoded operator file contents.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorFile {
    pub hash: String,
    pub n_theta: usize,
    pub n_phi: usize,
    pub kappa_p: f64,
    pub kappa_s: f64,
    pub omega: f64,
    pub noise: f64,
    /// Column-major entries.
    pub entries: Vec<C64>,
}

pub fn decode_operator(bytes: &[u8]) -> Result<OperatorFile, CliError> {
    let fmt = |offset: usize, reason: &str| CliError::Input(CoreError::Format { offset, reason: reason.into() });
    let head = 8 + 4 + 64 + 8 + 32;
    if bytes.len() < head {
        return Err(fmt(bytes.len(), "truncated operator header"));
    }
    if &bytes[..8] != OPERATOR_MAGIC {
        return Err(fmt(0, "not an operator file"));
    }
    let u = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let f = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    if u(8) != FORMAT_VERSION {
        return Err(fmt(8, "unsupported operator format version"));
    }
    let hash = String::from_utf8_lossy(&bytes[12..76]).into_owned();
    let (n_theta, n_phi) = (u(76) as usize, u(80) as usize);
    let n = 3 * n_theta * n_phi;
    if bytes.len() != head + 16 * n * n {
        return Err(fmt(bytes.len(), "operator size does not match its grid"));
    }
    let entries = (0..n * n).map(|k| C64::new(f(head + 16 * k), f(head + 16 * k + 8))).collect();
    Ok(OperatorFile { hash, n_theta, n_phi, kappa_p: f(84), kappa_s: f(92), omega: f(100), noise: f(108), entries })
}

/// Image files: `<stem>.bin` (header then f64 values, x fastest) and a
/// `<stem>.hdr` text sidecar.
pub fn write_image(dir: &Path, stem: &str, img: &ImagingGrid, hash: &str) -> Result<(PathBuf, PathBuf), CliError> {
    let mut bin = header(IMAGE_MAGIC, hash);
    for c in img.spec.counts {
        bin.extend_from_slice(&(c as u64).to_le_bytes());
    }
    for v in &img.values {
        bin.extend_from_slice(&v.to_le_bytes());
    }
    let bin_path = dir.join(format!("{stem}.bin"));
    write_bytes(&bin_path, &bin)?;
    let s = &img.spec;
    let hdr = format!(
        "format = \"ELIMAG\"\nversion = {FORMAT_VERSION}\nconfig_hash = \"{hash}\"\norigin = [{}, {}, {}]\nspacing = [{}, {}, {}]\ncounts = [{}, {}, {}]\norder = \"x fastest, then y, then z\"\ncutoff = {}\n",
        s.origin.x, s.origin.y, s.origin.z, s.spacing.x, s.spacing.y, s.spacing.z, s.counts[0], s.counts[1], s.counts[2], img.cutoff
    );
    let hdr_path = dir.join(format!("{stem}.hdr"));
    write_bytes(&hdr_path, hdr.as_bytes())?;
    Ok((bin_path, hdr_path))
}

/// CSV of the z-plane nearest `z`: columns x, y, value.
pub fn write_image_slice(path: &Path, img: &ImagingGrid, z: f64, hash: &str) -> Result<(), CliError> {
    let s = &img.spec;
    let k = (((z - s.origin.z) / s.spacing.z).round().max(0.0) as usize).min(s.counts[2].saturating_sub(1));
    let mut w = csv_writer(path, hash)?;
    w.write_record(["x", "y", "value"]).map_err(|e| csv_err(path, e))?;
    for j in 0..s.counts[1] {
        for i in 0..s.counts[0] {
            let idx = s.index(i, j, k);
            let p = s.point(idx);
            w.serialize((p.x, p.y, img.values[idx])).map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// CSV writer whose first line is a `# config_hash=` comment.
pub fn csv_writer(path: &Path, hash: &str) -> Result<csv::Writer<fs::File>, CliError> {
    let mut f = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    writeln!(f, "# config_hash={hash}").map_err(|e| CliError::io(path, e))?;
    Ok(csv::Writer::from_writer(f))
}

pub fn csv_err(path: &Path, e: csv::Error) -> CliError {
    CliError::io(path, std::io::Error::other(e.to_string()))
}
