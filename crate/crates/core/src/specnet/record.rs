//! Training triples and the frequency-domain normalization.
//!
//! Each beam vector `y` is scaled by `alpha = max |A^H y / N_ch|`, the peak of
//! its beamformed spectrum; its IAA label is scaled by the same factor.

use std::io::{BufRead, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::array::{dbf_spectrum, SteeringMatrix};
use crate::error::{Error, Result};
use crate::iaa::IaaResult;

/// Real parts followed by imaginary parts.
pub fn realify(y: &[Complex64]) -> Vec<f64> {
    y.iter().map(|v| v.re).chain(y.iter().map(|v| v.im)).collect()
}

pub fn normalization_factor(a: &SteeringMatrix, y: &[Complex64]) -> Result<f64> {
    Ok(dbf_spectrum(a, y)?
        .iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    /// `realify(y / alpha)`, length `2 N_ch`.
    pub input: Vec<f64>,
    /// `|s_IAA| / alpha`, length L.
    pub label: Vec<f64>,
    pub alpha: f64,
}

impl SampleRecord {
    pub fn n_ch(&self) -> usize {
        self.input.len() / 2
    }

    pub fn grid_len(&self) -> usize {
        self.label.len()
    }
}

/// `None` when `alpha == 0` (an all-zero beam vector); such bins carry no
/// information and are dropped from datasets.
pub fn make_record(
    a: &SteeringMatrix,
    y: &[Complex64],
    iaa_label: &IaaResult,
) -> Result<Option<SampleRecord>> {
    if iaa_label.coeffs.len() != a.l() {
        return Err(Error::DimensionMismatch {
            expected: a.l(),
            found: iaa_label.coeffs.len(),
        });
    }
    let alpha = normalization_factor(a, y)?;
    if alpha == 0.0 {
        return Ok(None);
    }
    let scaled: Vec<Complex64> = y.iter().map(|v| v / alpha).collect();
    Ok(Some(SampleRecord {
        input: realify(&scaled),
        label: iaa_label.coeffs.iter().map(|c| c.norm() / alpha).collect(),
        alpha,
    }))
}

/// Records sharing one input width and grid size.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub n_ch: usize,
    pub l: usize,
    pub records: Vec<SampleRecord>,
}

impl Dataset {
    pub fn new(records: Vec<SampleRecord>) -> Result<Self> {
        let first = records.first().ok_or(Error::Empty("dataset"))?;
        let (n_ch, l) = (first.n_ch(), first.grid_len());
        for r in &records {
            if r.input.len() != 2 * n_ch || r.label.len() != l {
                return Err(Error::ShapeMismatch {
                    expected: format!("input {}, label {}", 2 * n_ch, l),
                    found: format!("input {}, label {}", r.input.len(), r.label.len()),
                });
            }
        }
        Ok(Self { n_ch, l, records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// First line of a record file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordHeader {
    pub format: String,
    pub version: u32,
    pub n_ch: usize,
    pub grid_len: usize,
    pub count: usize,
    pub geometry_id: String,
    pub iaa_config_hash: String,
    /// `[input(2 n_ch) | label(grid_len) | alpha]`, little-endian f32.
    pub layout: String,
    #[serde(default)]
    pub config_hash: Option<String>,
    #[serde(default)]
    pub toolkit_version: Option<String>,
}

pub(crate) const RECORD_FORMAT: &str = "azsr-records";

impl RecordHeader {
    pub fn new(n_ch: usize, grid_len: usize, count: usize, geometry_id: &str, iaa_config_hash: &str) -> Self {
        Self {
            format: RECORD_FORMAT.into(),
            version: 1,
            n_ch,
            grid_len,
            count,
            geometry_id: geometry_id.into(),
            iaa_config_hash: iaa_config_hash.into(),
            layout: "input|label|alpha f32le".into(),
            config_hash: None,
            toolkit_version: Some(crate::VERSION.into()),
        }
    }

    fn record_floats(&self) -> usize {
        2 * self.n_ch + self.grid_len + 1
    }
}

pub fn write_records<W: Write>(mut w: W, header: &RecordHeader, records: &[SampleRecord]) -> Result<()> {
    if header.count != records.len() {
        return Err(Error::Format(format!(
            "header count {} but {} records given",
            header.count,
            records.len()
        )));
    }
    serde_json::to_writer(&mut w, header)?;
    w.write_all(b"\n")?;
    let mut buf = Vec::with_capacity(header.record_floats() * 4);
    for r in records {
        buf.clear();
        encode_record(&mut buf, r, header.n_ch, header.grid_len)?;
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

/// Appends one record's payload bytes, for writers that stream records
/// before the final count is known.
pub fn encode_record(buf: &mut Vec<u8>, r: &SampleRecord, n_ch: usize, grid_len: usize) -> Result<()> {
    if r.input.len() != 2 * n_ch || r.label.len() != grid_len {
        return Err(Error::ShapeMismatch {
            expected: format!("input {}, label {}", 2 * n_ch, grid_len),
            found: format!("input {}, label {}", r.input.len(), r.label.len()),
        });
    }
    for v in r.input.iter().chain(&r.label).chain(std::iter::once(&r.alpha)) {
        buf.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    Ok(())
}

pub fn read_records<R: BufRead>(mut r: R) -> Result<(RecordHeader, Vec<SampleRecord>)> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    let header: RecordHeader = serde_json::from_str(line.trim_end())
        .map_err(|e| Error::Format(format!("record header: {e}")))?;
    if header.format != RECORD_FORMAT {
        return Err(Error::Format(format!("not a record file: {}", header.format)));
    }
    let per = header.record_floats();
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let expected = header.count * per * 4;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "expected {expected} payload bytes for {} records, found {}",
            header.count,
            bytes.len()
        )));
    }
    let floats: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect();
    let n_in = 2 * header.n_ch;
    let records = floats
        .chunks_exact(per)
        .map(|c| SampleRecord {
            input: c[..n_in].to_vec(),
            label: c[n_in..n_in + header.grid_len].to_vec(),
            alpha: c[per - 1],
        })
        .collect();
    Ok((header, records))
}
