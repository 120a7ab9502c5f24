//! On-disk artifacts: snapshot tensors, JSON reports and CSV tables.
//!
//! Each artifact is produced by exactly one writer call, after the data it
//! holds is complete.

use anipar_core::solver::{Integrator, Trajectory};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: malformed snapshot file: {msg}")]
    Malformed { path: PathBuf, msg: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ArtifactError + '_ {
    move |source| ArtifactError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn ensure_dir(dir: &Path) -> Result<(), ArtifactError> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

/// Pretty JSON with a trailing newline. Key order follows the type definitions.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ArtifactError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| ArtifactError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

/// Float formatted with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// RFC 4180 CSV.
pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<(), ArtifactError> {
    let csv_err = |source| ArtifactError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_path(path)
        .map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub format: String,
    /// `[snapshots, m_1, .., m_N]`; data is row-major in this shape.
    pub shape: Vec<usize>,
    pub modes: Vec<usize>,
    pub times: Vec<f64>,
    pub lengths: Vec<f64>,
    pub grid: Vec<usize>,
    pub integrator: Integrator,
    pub kappa: f64,
}

pub const SNAPSHOT_FORMAT: &str = "anipar-snapshots/f64-le";

/// `u64` LE header length, JSON header, then the coefficients as `f64` LE.
pub fn write_snapshots(path: &Path, traj: &Trajectory) -> Result<(), ArtifactError> {
    let mut shape = vec![traj.snapshots.len()];
    shape.extend(&traj.modes);
    let header = SnapshotHeader {
        format: SNAPSHOT_FORMAT.into(),
        shape,
        modes: traj.modes.clone(),
        times: traj.times(),
        lengths: traj.domain.lengths().to_vec(),
        grid: traj.grid.clone(),
        integrator: traj.integrator,
        kappa: traj.kappa,
    };
    let json = serde_json::to_vec(&header).map_err(|source| ArtifactError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    let mut buf = Vec::with_capacity(8 + json.len() + 8 * traj.snapshots.len() * traj.snapshots[0].c.len());
    buf.extend_from_slice(&(json.len() as u64).to_le_bytes());
    buf.extend_from_slice(&json);
    for s in &traj.snapshots {
        for v in s.c.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(&buf).map_err(io_err(path))
}

pub fn read_snapshots(path: &Path) -> Result<(SnapshotHeader, Vec<f64>), ArtifactError> {
    let malformed = |msg: &str| ArtifactError::Malformed {
        path: path.to_path_buf(),
        msg: msg.to_string(),
    };
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(io_err(path))?;
    if bytes.len() < 8 {
        return Err(malformed("truncated length prefix"));
    }
    let hlen = u64::from_le_bytes(bytes[..8].try_into().expect("8 bytes")) as usize;
    let body = bytes.get(8..8 + hlen).ok_or_else(|| malformed("truncated header"))?;
    let header: SnapshotHeader = serde_json::from_slice(body).map_err(|source| ArtifactError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    let data = &bytes[8 + hlen..];
    let count: usize = header.shape.iter().product();
    if data.len() != 8 * count {
        return Err(malformed(&format!(
            "expected {count} values, found {} bytes",
            data.len()
        )));
    }
    let values = data
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok((header, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_keep_17_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(0.1).parse::<f64>().unwrap(), 0.1);
        assert_eq!(fmt_f64(0.0), "0.0000000000000000e0");
    }

    #[test]
    fn csv_quotes_when_needed() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        write_csv(&p, &["a".into(), "b".into()], &[vec!["1".into(), "x, y".into()]]).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "a,b\r\n1,\"x, y\"\r\n");
    }
}
