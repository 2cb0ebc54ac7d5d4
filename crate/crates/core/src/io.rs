//! On-disk formats for radar cubes and range-azimuth maps.
//!
//! Cube files hold one JSON header line followed by little-endian `f32`
//! pairs `(re, im)` in C order, outermost axis first and channel innermost.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::db_scale;
use crate::pipeline::{RaMap, RdcCube, WindowKind};
use crate::scene::AdcCube;

const CUBE_FORMAT: &str = "azsr-cube";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CubeKind {
    Adc,
    Rdc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeHeader {
    pub format: String,
    pub version: u32,
    pub kind: CubeKind,
    /// `[fast, slow, channel]` for ADC, `[range, doppler, channel]` for RDC.
    pub dims: [usize; 3],
    pub dtype: String,
    /// Transform convention applied to produce the data, if any.
    #[serde(default)]
    pub fft: Option<String>,
    #[serde(default)]
    pub window: Option<WindowKind>,
    pub geometry_id: String,
    #[serde(default)]
    pub config_hash: Option<String>,
    #[serde(default)]
    pub toolkit_version: Option<String>,
}

impl CubeHeader {
    pub fn adc(cube: &AdcCube, geometry_id: &str) -> Self {
        Self::base(CubeKind::Adc, cube.dims(), geometry_id)
    }

    pub fn rdc(cube: &RdcCube, geometry_id: &str, window: WindowKind) -> Self {
        let mut h = Self::base(CubeKind::Rdc, cube.dims(), geometry_id);
        h.fft = Some("forward unnormalized, fast and slow time".into());
        h.window = Some(window);
        h
    }

    fn base(kind: CubeKind, dims: [usize; 3], geometry_id: &str) -> Self {
        Self {
            format: CUBE_FORMAT.into(),
            version: 1,
            kind,
            dims,
            dtype: "complex f32le interleaved".into(),
            fft: None,
            window: None,
            geometry_id: geometry_id.into(),
            config_hash: None,
            toolkit_version: Some(crate::VERSION.into()),
        }
    }

    pub fn with_config_hash(mut self, hash: &str) -> Self {
        self.config_hash = Some(hash.into());
        self
    }
}

pub fn write_cube<W: Write>(mut w: W, header: &CubeHeader, data: &[Complex64]) -> Result<()> {
    let n: usize = header.dims.iter().product();
    if data.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: data.len(),
        });
    }
    serde_json::to_writer(&mut w, header)?;
    w.write_all(b"\n")?;
    let mut buf = Vec::with_capacity(n * 8);
    for v in data {
        buf.extend_from_slice(&(v.re as f32).to_le_bytes());
        buf.extend_from_slice(&(v.im as f32).to_le_bytes());
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

pub fn read_cube<R: BufRead>(mut r: R) -> Result<(CubeHeader, Vec<Complex64>)> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    let header: CubeHeader =
        serde_json::from_str(line.trim_end()).map_err(|e| Error::Format(format!("cube header: {e}")))?;
    if header.format != CUBE_FORMAT {
        return Err(Error::Format(format!("not a cube file: {}", header.format)));
    }
    let n: usize = header.dims.iter().product();
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != n * 8 {
        return Err(Error::Format(format!(
            "expected {} payload bytes for dims {:?}, found {}",
            n * 8,
            header.dims,
            bytes.len()
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|b| {
            Complex64::new(
                f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
                f32::from_le_bytes([b[4], b[5], b[6], b[7]]) as f64,
            )
        })
        .collect();
    Ok((header, data))
}

pub fn save_adc_cube(path: &Path, cube: &AdcCube, header: &CubeHeader) -> Result<()> {
    write_cube(BufWriter::new(File::create(path)?), header, &cube.data)
}

pub fn load_adc_cube(path: &Path) -> Result<(AdcCube, CubeHeader)> {
    let (header, data) = read_cube(BufReader::new(File::open(path)?))?;
    if header.kind != CubeKind::Adc {
        return Err(Error::Format("expected an ADC cube".into()));
    }
    let [n_fast, n_slow, n_ch] = header.dims;
    Ok((
        AdcCube {
            n_fast,
            n_slow,
            n_ch,
            data,
        },
        header,
    ))
}

pub fn save_rdc_cube(path: &Path, cube: &RdcCube, header: &CubeHeader) -> Result<()> {
    write_cube(BufWriter::new(File::create(path)?), header, &cube.data)
}

pub fn load_rdc_cube(path: &Path) -> Result<(RdcCube, CubeHeader)> {
    let (header, data) = read_cube(BufReader::new(File::open(path)?))?;
    if header.kind != CubeKind::Rdc {
        return Err(Error::Format("expected an RDC cube".into()));
    }
    let [n_range, n_doppler, n_ch] = header.dims;
    Ok((
        RdcCube {
            n_range,
            n_doppler,
            n_ch,
            data,
        },
        header,
    ))
}

/// Binary PGM (`P5`), rows = range bins, columns = azimuth cells. Values are
/// divided by the map maximum (unless already normalized) and quantized to
/// 8 or 16 bits.
pub fn write_pgm<W: Write>(mut w: W, map: &RaMap, bits: u8) -> Result<()> {
    let maxval: u32 = match bits {
        8 => 255,
        16 => 65535,
        _ => return Err(Error::InvalidConfig(format!("PGM depth must be 8 or 16, got {bits}"))),
    };
    let scale = if map.normalized {
        1.0
    } else {
        let peak = map.max();
        if peak > 0.0 {
            1.0 / peak
        } else {
            0.0
        }
    };
    write!(w, "P5\n{} {}\n{}\n", map.cols, map.rows, maxval)?;
    let mut buf = Vec::with_capacity(map.data.len() * (bits as usize / 8));
    for v in &map.data {
        let q = ((v * scale).clamp(0.0, 1.0) * maxval as f64).round() as u32;
        if bits == 8 {
            buf.push(q as u8);
        } else {
            buf.extend_from_slice(&(q as u16).to_be_bytes());
        }
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

pub fn save_pgm(path: &Path, map: &RaMap, bits: u8) -> Result<()> {
    write_pgm(BufWriter::new(File::create(path)?), map, bits)
}

/// dB-scale PGM, floored at `-dynamic_range_db` relative to the peak.
pub fn save_pgm_db(path: &Path, map: &RaMap, bits: u8, dynamic_range_db: f64) -> Result<()> {
    save_pgm(path, &db_scale(map, dynamic_range_db), bits)
}

/// Comma-separated rows with shortest round-trip float formatting.
pub fn write_csv<W: Write>(mut w: W, map: &RaMap) -> Result<()> {
    for r in 0..map.rows {
        let line: Vec<String> = map.row(r).iter().map(|v| format!("{v:?}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(path: &Path, map: &RaMap) -> Result<()> {
    write_csv(BufWriter::new(File::create(path)?), map)
}

pub fn read_csv<R: BufRead>(r: R) -> Result<RaMap> {
    let mut data = Vec::new();
    let mut rows = 0;
    let mut cols = None;
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Format(format!("line {}: {e}", i + 1)))?;
        match cols {
            None => cols = Some(row.len()),
            Some(c) if c != row.len() => {
                return Err(Error::Format(format!(
                    "line {} has {} columns, expected {c}",
                    i + 1,
                    row.len()
                )))
            }
            _ => {}
        }
        data.extend(row);
        rows += 1;
    }
    let cols = cols.ok_or(Error::Empty("csv map"))?;
    RaMap::new(rows, cols, data)
}

pub fn load_csv(path: &Path) -> Result<RaMap> {
    read_csv(BufReader::new(File::open(path)?))
}
