//! Output files. Every data file `F` gets a sidecar `F.manifest.json`
//! with its digest, the scenario digest, seed, grid descriptors and the
//! library version. Outputs carry no timestamps, so reruns are
//! byte-identical.

use std::fs;
use std::path::{Path, PathBuf};

use planewave_core::geometry::{MediumParams, SpatialPoint};
use planewave_core::synthesis::ChannelRealization;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};
use crate::scenario::{hex, Engine, Scenario};

#[derive(Debug, Clone, Serialize)]
pub struct GridDescriptor {
    pub mode: String,
    pub resolution: Vec<usize>,
    pub nodes: usize,
    /// Rim strip in units of κ (3D only).
    pub rim_cut: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub file: String,
    pub format: String,
    pub sha256: String,
    pub bytes: u64,
    pub command: String,
    pub scenario: Option<String>,
    pub scenario_sha256: String,
    pub config_hash: String,
    pub seed: u64,
    pub n_realizations: Option<u64>,
    pub shape: Vec<usize>,
    pub medium: MediumParams,
    pub wavelength_m: f64,
    pub receive_grid: Option<GridDescriptor>,
    pub source_grid: Option<GridDescriptor>,
    pub receivers: Vec<SpatialPoint>,
    pub sources: Vec<SpatialPoint>,
    pub library: Library,
}

#[derive(Debug, Clone, Serialize)]
pub struct Library {
    pub name: &'static str,
    pub version: &'static str,
}

pub const LIBRARY: Library = Library { name: env!("CARGO_PKG_NAME"), version: env!("CARGO_PKG_VERSION") };

/// Run-level context shared by every output of a command.
pub struct Context<'a> {
    pub command: &'static str,
    pub scenario: &'a Scenario,
    pub engine: Option<&'a Engine>,
    pub receivers: Vec<SpatialPoint>,
    pub sources: Vec<SpatialPoint>,
    pub n_realizations: Option<u64>,
}

impl Context<'_> {
    fn grids(&self) -> (Option<GridDescriptor>, Option<GridDescriptor>) {
        match self.engine {
            Some(Engine::Spatial(s)) => {
                let c = s.config();
                let d = |g: &planewave_core::spectral_support::DiskGrid| GridDescriptor {
                    mode: format!("{:?}", g.mode).to_lowercase(),
                    resolution: vec![g.resolution.0, g.resolution.1],
                    nodes: g.len(),
                    rim_cut: Some(g.rim_cut / g.medium.kappa),
                };
                (Some(d(&c.receive_grid)), Some(d(&c.source_grid)))
            }
            Some(Engine::Planar(p)) => {
                let d = |g: &planewave_core::synthesis::LineGrid| GridDescriptor {
                    mode: format!("{:?}", g.mode).to_lowercase(),
                    resolution: vec![g.len()],
                    nodes: g.len(),
                    rim_cut: None,
                };
                (Some(d(&p.receive_grid)), Some(d(&p.source_grid)))
            }
            None => (None, None),
        }
    }

    fn manifest(&self, path: &Path, format: &str, shape: Vec<usize>, bytes: &[u8]) -> Result<Manifest> {
        let (receive_grid, source_grid) = self.grids();
        Ok(Manifest {
            file: path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default(),
            format: format.to_owned(),
            sha256: hex(&Sha256::digest(bytes)),
            bytes: bytes.len() as u64,
            command: self.command.to_owned(),
            scenario: self.scenario.name.clone(),
            scenario_sha256: self.scenario.digest(),
            config_hash: format!("{:016x}", self.engine.map_or(0, Engine::fingerprint)),
            seed: self.scenario.seed,
            n_realizations: self.n_realizations,
            shape,
            medium: self.scenario.medium()?,
            wavelength_m: self.scenario.wavelength_m,
            receive_grid,
            source_grid,
            receivers: self.receivers.clone(),
            sources: self.sources.clone(),
            library: LIBRARY,
        })
    }

    /// Writes `bytes` to `dir/name` plus its manifest sidecar.
    pub fn emit(&self, dir: &Path, name: &str, bytes: &[u8], format: &str, shape: Vec<usize>) -> Result<PathBuf> {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(CliError::io(&path))?;
        let m = self.manifest(&path, format, shape, bytes)?;
        let side = dir.join(format!("{name}.manifest.json"));
        fs::write(&side, json_bytes(&m)?).map_err(CliError::io(&side))?;
        Ok(path)
    }
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(CliError::io(dir))
}

pub fn json_bytes<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut b = serde_json::to_vec_pretty(v)?;
    b.push(b'\n');
    Ok(b)
}

/// CSV `realization,receiver,source,re,im`.
pub fn channel_csv(reals: &[ChannelRealization]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["realization", "receiver", "source", "re", "im"])?;
    for r in reals {
        for i in 0..r.n_receivers() {
            for j in 0..r.n_sources() {
                let v = r.get(i, j);
                w.serialize((r.realization, i, j, v.re, v.im))?;
            }
        }
    }
    w.into_inner().map_err(|e| CliError::Io { path: PathBuf::from("<csv>"), source: e.into_error() })
}

/// Little-endian complex64 (`f32` real, `f32` imaginary), C order.
pub fn channel_blob(reals: &[ChannelRealization]) -> Vec<u8> {
    let mut out = Vec::with_capacity(reals.iter().map(|r| r.h.len() * 8).sum());
    for v in reals.iter().flat_map(|r| r.h.iter()) {
        out.extend_from_slice(&(v.re as f32).to_le_bytes());
        out.extend_from_slice(&(v.im as f32).to_le_bytes());
    }
    out
}

/// Generic CSV from a header and rows of numbers.
pub fn table_csv(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| CliError::Io { path: PathBuf::from("<csv>"), source: e.into_error() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use planewave_core::C64;

    fn real(h: Vec<C64>) -> ChannelRealization {
        ChannelRealization {
            h,
            receivers: vec![SpatialPoint::ORIGIN],
            sources: vec![SpatialPoint::ORIGIN, SpatialPoint::new(1.0, 0.0, 0.0)],
            seed: 0,
            realization: 7,
            config_hash: 0,
        }
    }

    #[test]
    fn blob_layout() {
        let b = channel_blob(&[real(vec![C64::new(1.0, -2.0), C64::new(0.5, 0.25)])]);
        assert_eq!(b.len(), 16);
        assert_eq!(&b[0..4], &1f32.to_le_bytes());
        assert_eq!(&b[4..8], &(-2f32).to_le_bytes());
        assert_eq!(&b[12..16], &0.25f32.to_le_bytes());
    }

    #[test]
    fn csv_rows() {
        let s = String::from_utf8(channel_csv(&[real(vec![C64::new(1.0, -2.0), C64::new(0.5, 0.25)])]).unwrap()).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines, ["realization,receiver,source,re,im", "7,0,0,1.0,-2.0", "7,0,1,0.5,0.25"]);
    }
}
