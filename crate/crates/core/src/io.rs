//! Plain-text formats for matrices, transmissions and sample files.
//!
//! Matrix files start with the mode count `M` on its own line, followed by
//! `2M` rows of `2M` numbers (real matrices) or `M` rows of `M` `re im`
//! pairs (complex matrices). Lines starting with `#` are ignored.

use crate::error::{Error, Result};
use crate::gaussian::CovMatrix;
use crate::hafnian::PhotonPattern;
use crate::linalg::{CMat, RMat};
use crate::sampler::{Detector, SampleBatch};
use num_complex::Complex64;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_numbers(line: &str, lineno: usize) -> Result<Vec<f64>> {
    line.split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| Error::Parse(format!("line {lineno}: '{t}' is not a number"))))
        .collect()
}

fn parse_header(lines: &mut dyn Iterator<Item = (usize, &str)>) -> Result<usize> {
    let (no, line) = lines.next().ok_or_else(|| Error::Parse("empty file".into()))?;
    line.parse::<usize>().map_err(|_| Error::Parse(format!("line {no}: expected the mode count, got '{line}'")))
}

/// Parses a real `2M x 2M` matrix.
pub fn parse_real_matrix(text: &str) -> Result<RMat> {
    let mut lines = content_lines(text);
    let m = parse_header(&mut lines)?;
    let n = 2 * m;
    let mut data = Vec::with_capacity(n * n);
    for row in 0..n {
        let (no, line) = lines.next().ok_or_else(|| Error::Parse(format!("expected {n} rows, found {row}")))?;
        let vals = parse_numbers(line, no)?;
        if vals.len() != n {
            return Err(Error::Parse(format!("line {no}: expected {n} values, found {}", vals.len())));
        }
        data.extend(vals);
    }
    if let Some((no, _)) = lines.next() {
        return Err(Error::Parse(format!("line {no}: unexpected trailing data")));
    }
    Ok(RMat::from_row_slice(n, n, &data))
}

pub fn format_real_matrix(m: &RMat) -> String {
    let mut out = format!("{}\n", m.nrows() / 2);
    for r in 0..m.nrows() {
        let row: Vec<String> = m.row(r).iter().map(|x| format!("{x:e}")).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

/// Parses an `M x M` complex matrix.
pub fn parse_complex_matrix(text: &str) -> Result<CMat> {
    let mut lines = content_lines(text);
    let m = parse_header(&mut lines)?;
    let mut data = Vec::with_capacity(m * m);
    for row in 0..m {
        let (no, line) = lines.next().ok_or_else(|| Error::Parse(format!("expected {m} rows, found {row}")))?;
        let vals = parse_numbers(line, no)?;
        if vals.len() != 2 * m {
            return Err(Error::Parse(format!("line {no}: expected {} values, found {}", 2 * m, vals.len())));
        }
        data.extend(vals.chunks(2).map(|c| Complex64::new(c[0], c[1])));
    }
    if let Some((no, _)) = lines.next() {
        return Err(Error::Parse(format!("line {no}: unexpected trailing data")));
    }
    Ok(CMat::from_row_slice(m, m, &data))
}

pub fn format_complex_matrix(m: &CMat) -> String {
    let mut out = format!("{}\n", m.nrows());
    for r in 0..m.nrows() {
        let row: Vec<String> = m.row(r).iter().map(|z| format!("{:e} {:e}", z.re, z.im)).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn read_real_matrix(path: &Path) -> Result<RMat> {
    parse_real_matrix(&fs::read_to_string(path)?)
}

pub fn write_real_matrix(path: &Path, m: &RMat) -> Result<()> {
    Ok(fs::write(path, format_real_matrix(m))?)
}

pub fn read_covariance(path: &Path) -> Result<CovMatrix> {
    CovMatrix::new(read_real_matrix(path)?)
}

pub fn write_covariance(path: &Path, v: &CovMatrix) -> Result<()> {
    write_real_matrix(path, v.data())
}

pub fn read_complex_matrix(path: &Path) -> Result<CMat> {
    parse_complex_matrix(&fs::read_to_string(path)?)
}

pub fn write_complex_matrix(path: &Path, m: &CMat) -> Result<()> {
    Ok(fs::write(path, format_complex_matrix(m))?)
}

/// Transmissions: whitespace-separated values.
pub fn parse_values(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (no, line) in content_lines(text) {
        out.extend(parse_numbers(line, no)?);
    }
    Ok(out)
}

pub fn format_values(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:e}\n")).collect()
}

pub fn format_samples(batch: &SampleBatch) -> String {
    let mut out = format!(
        "# modes={} shots={} seed={} detector={}\n",
        batch.modes, batch.shots, batch.seed, batch.detector
    );
    for p in &batch.patterns {
        let _ = writeln!(out, "{p}");
    }
    out
}

pub fn parse_samples(text: &str) -> Result<SampleBatch> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::Parse("empty sample file".into()))?;
    let header = header
        .strip_prefix('#')
        .ok_or_else(|| Error::Parse("sample file must start with a '# modes=...' header".into()))?;
    let (mut modes, mut shots, mut seed, mut detector) = (None, None, None, None);
    for field in header.split_whitespace() {
        let (key, value) =
            field.split_once('=').ok_or_else(|| Error::Parse(format!("malformed header field '{field}'")))?;
        let bad = || Error::Parse(format!("bad header value '{field}'"));
        match key {
            "modes" => modes = Some(value.parse::<usize>().map_err(|_| bad())?),
            "shots" => shots = Some(value.parse::<usize>().map_err(|_| bad())?),
            "seed" => seed = Some(value.parse::<u64>().map_err(|_| bad())?),
            "detector" => detector = Some(value.parse::<Detector>()?),
            _ => return Err(Error::Parse(format!("unknown header field '{key}'"))),
        }
    }
    let missing = |k: &str| Error::Parse(format!("header lacks '{k}'"));
    let modes = modes.ok_or_else(|| missing("modes"))?;
    let shots = shots.ok_or_else(|| missing("shots"))?;
    let mut patterns = Vec::with_capacity(shots);
    for (i, line) in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let counts = line
            .split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|_| Error::Parse(format!("line {}: bad count '{t}'", i + 1))))
            .collect::<Result<Vec<_>>>()?;
        if counts.len() != modes {
            return Err(Error::Parse(format!("line {}: expected {modes} counts, found {}", i + 1, counts.len())));
        }
        patterns.push(PhotonPattern(counts));
    }
    if patterns.len() != shots {
        return Err(Error::Parse(format!("header says {shots} shots, file has {}", patterns.len())));
    }
    Ok(SampleBatch::new(
        modes,
        seed.ok_or_else(|| missing("seed"))?,
        detector.ok_or_else(|| missing("detector"))?,
        patterns,
    ))
}

pub fn read_samples(path: &Path) -> Result<SampleBatch> {
    parse_samples(&fs::read_to_string(path)?)
}

pub fn write_samples(path: &Path, batch: &SampleBatch) -> Result<()> {
    Ok(fs::write(path, format_samples(batch))?)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}
