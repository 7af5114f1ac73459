//! Binary persistence: one tensor file per mode, one lambda file per bond,
//! a pattern table and a JSON manifest.

use super::{MpsState, Tensor3, TruncationReport};
use crate::error::{Error, Result};
use crate::hafnian::PhotonPattern;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

const TENSOR_MAGIC: &[u8; 8] = b"GBSMPS-T";
const LAMBDA_MAGIC: &[u8; 8] = b"GBSMPS-L";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpsManifest {
    pub format_version: u32,
    pub modes: usize,
    pub d: usize,
    pub chi: usize,
    pub bond_dims: Vec<usize>,
    pub center_error: f64,
    pub report: TruncationReport,
    /// Hash of the configuration and input that produced the state.
    pub config_hash: String,
}

fn tensor_path(dir: &Path, k: usize) -> std::path::PathBuf {
    dir.join(format!("mode_{k:04}.bin"))
}

fn lambda_path(dir: &Path, k: usize) -> std::path::PathBuf {
    dir.join(format!("bond_{k:04}.bin"))
}

pub fn save_mps(mps: &MpsState, dir: &Path, config_hash: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (k, g) in mps.gammas.iter().enumerate() {
        let mut buf = Vec::with_capacity(28 + 16 * g.data.len());
        buf.extend_from_slice(TENSOR_MAGIC);
        for v in [FORMAT_VERSION, k as u32, g.d as u32, g.left as u32, g.right as u32] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for z in &g.data {
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
        fs::File::create(tensor_path(dir, k))?.write_all(&buf)?;
    }
    for (k, lam) in mps.lambdas.iter().enumerate() {
        let mut buf = Vec::with_capacity(20 + 8 * lam.len());
        buf.extend_from_slice(LAMBDA_MAGIC);
        for v in [FORMAT_VERSION, k as u32, lam.len() as u32] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for x in lam {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        fs::File::create(lambda_path(dir, k))?.write_all(&buf)?;
    }
    let patterns: Vec<Vec<Vec<usize>>> =
        mps.patterns.iter().map(|b| b.iter().map(|p| p.0.clone()).collect()).collect();
    fs::write(dir.join("patterns.json"), serde_json::to_vec(&patterns)?)?;
    let manifest = MpsManifest {
        format_version: FORMAT_VERSION,
        modes: mps.modes,
        d: mps.d,
        chi: mps.chi,
        bond_dims: mps.bond_dims(),
        center_error: mps.report.center_error,
        report: mps.report.clone(),
        config_hash: config_hash.to_string(),
    };
    fs::write(dir.join("manifest.json"), serde_json::to_vec_pretty(&manifest)?)?;
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<MpsManifest> {
    Ok(serde_json::from_slice(&fs::read(dir.join("manifest.json"))?)?)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    what: String,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Parse(format!("{}: truncated file", self.what)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn header(&mut self, magic: &[u8; 8], k: usize) -> Result<()> {
        if self.take(8)? != magic {
            return Err(Error::Parse(format!("{}: bad magic", self.what)));
        }
        let version = self.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Parse(format!("{}: unsupported version {version}", self.what)));
        }
        let idx = self.u32()? as usize;
        if idx != k {
            return Err(Error::Parse(format!("{}: index {idx}, expected {k}", self.what)));
        }
        Ok(())
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    fs::File::open(path)?.read_to_end(&mut buf)?;
    Ok(buf)
}

pub fn load_mps(dir: &Path) -> Result<(MpsState, MpsManifest)> {
    let manifest = read_manifest(dir)?;
    let mut gammas = Vec::with_capacity(manifest.modes);
    for k in 0..manifest.modes {
        let path = tensor_path(dir, k);
        let buf = read_file(&path)?;
        let mut r = Reader { buf: &buf, pos: 0, what: path.display().to_string() };
        r.header(TENSOR_MAGIC, k)?;
        let (d, left, right) = (r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
        let mut t = Tensor3::zeros(d, left, right);
        for z in t.data.iter_mut() {
            *z = Complex64::new(r.f64()?, r.f64()?);
        }
        gammas.push(t);
    }
    let mut lambdas = Vec::new();
    for k in 0..manifest.modes.saturating_sub(1) {
        let path = lambda_path(dir, k);
        let buf = read_file(&path)?;
        let mut r = Reader { buf: &buf, pos: 0, what: path.display().to_string() };
        r.header(LAMBDA_MAGIC, k)?;
        let len = r.u32()? as usize;
        lambdas.push((0..len).map(|_| r.f64()).collect::<Result<Vec<_>>>()?);
    }
    let raw: Vec<Vec<Vec<usize>>> = serde_json::from_slice(&fs::read(dir.join("patterns.json"))?)?;
    let patterns = raw.into_iter().map(|b| b.into_iter().map(PhotonPattern).collect()).collect();
    let state = MpsState {
        modes: manifest.modes,
        d: manifest.d,
        chi: manifest.chi,
        gammas,
        lambdas,
        patterns,
        report: manifest.report.clone(),
    };
    Ok((state, manifest))
}
