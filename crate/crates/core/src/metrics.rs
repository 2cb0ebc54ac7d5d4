//! Image-quality metrics over range-azimuth maps.

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::pipeline::RaMap;

pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_RADIUS: usize = 5;
pub const SSIM_WINDOW: usize = 2 * SSIM_RADIUS + 1;
const K1: f64 = 0.01;
const K2: f64 = 0.03;

fn same_dims(truth: &RaMap, pred: &RaMap) -> Result<()> {
    if truth.rows != pred.rows || truth.cols != pred.cols {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{}", truth.rows, truth.cols),
            found: format!("{}x{}", pred.rows, pred.cols),
        });
    }
    Ok(())
}

fn mse(truth: &RaMap, pred: &RaMap) -> f64 {
    let n = truth.data.len().max(1) as f64;
    truth
        .data
        .iter()
        .zip(&pred.data)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n
}

/// Mean squared error over the population variance of `truth`.
pub fn nmse(truth: &RaMap, pred: &RaMap) -> Result<f64> {
    same_dims(truth, pred)?;
    if truth.data.is_empty() {
        return Err(Error::Empty("map"));
    }
    let n = truth.data.len() as f64;
    let mean = truth.data.iter().sum::<f64>() / n;
    let var = truth.data.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    if var == 0.0 {
        return Err(Error::ConstantTruth);
    }
    Ok(mse(truth, pred) / var)
}

/// `10 log10(peak^2 / MSE)`; identical maps give `+inf`.
pub fn psnr(truth: &RaMap, pred: &RaMap, peak: f64) -> Result<f64> {
    same_dims(truth, pred)?;
    let m = mse(truth, pred);
    if m == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / m).log10())
}

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    for (i, w) in k.iter_mut().enumerate() {
        let x = i as f64 - SSIM_RADIUS as f64;
        *w = (-0.5 * x * x / (SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|w| *w /= s);
    k
}

/// Separable Gaussian filter evaluated only where the whole window fits.
fn filter_valid(data: &[f64], rows: usize, cols: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let out_cols = cols - 2 * SSIM_RADIUS;
    let out_rows = rows - 2 * SSIM_RADIUS;
    let mut horiz = vec![0.0; rows * out_cols];
    for r in 0..rows {
        let row = &data[r * cols..(r + 1) * cols];
        for c in 0..out_cols {
            horiz[r * out_cols + c] = k.iter().zip(&row[c..c + SSIM_WINDOW]).map(|(w, v)| w * v).sum();
        }
    }
    let mut out = vec![0.0; out_rows * out_cols];
    for r in 0..out_rows {
        for c in 0..out_cols {
            out[r * out_cols + c] = k
                .iter()
                .enumerate()
                .map(|(i, w)| w * horiz[(r + i) * out_cols + c])
                .sum();
        }
    }
    out
}

/// Mean structural similarity with an 11x11 Gaussian window (sigma 1.5),
/// unit dynamic range, averaged over positions where the window fits.
pub fn ssim(truth: &RaMap, pred: &RaMap) -> Result<f64> {
    same_dims(truth, pred)?;
    let (rows, cols) = (truth.rows, truth.cols);
    if rows < SSIM_WINDOW || cols < SSIM_WINDOW {
        return Err(Error::MapTooSmall {
            rows,
            cols,
            window: SSIM_WINDOW,
        });
    }
    let k = gaussian_kernel();
    let x = &truth.data;
    let y = &pred.data;
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();
    let [ux, uy, uxx, uyy, uxy] = [x, y, &xx, &yy, &xy].map(|d| filter_valid(d, rows, cols, &k));
    let c1 = K1 * K1;
    let c2 = K2 * K2;
    let total: f64 = (0..ux.len())
        .map(|i| {
            let (mx, my) = (ux[i], uy[i]);
            let vx = uxx[i] - mx * mx;
            let vy = uyy[i] - my * my;
            let vxy = uxy[i] - mx * my;
            ((2.0 * mx * my + c1) * (2.0 * vxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
        })
        .sum();
    Ok(total / ux.len() as f64)
}

/// Maps magnitudes to `[0, 1]` on a decibel scale: `20 log10(v / max)`
/// floored at `-dynamic_range_db`, then shifted and scaled.
pub fn db_scale(map: &RaMap, dynamic_range_db: f64) -> RaMap {
    let peak = map.max();
    let data = map
        .data
        .iter()
        .map(|&v| {
            if peak <= 0.0 || v <= 0.0 {
                return 0.0;
            }
            let db = (20.0 * (v / peak).log10()).max(-dynamic_range_db);
            (db + dynamic_range_db) / dynamic_range_db
        })
        .collect();
    let mut out = RaMap::new(map.rows, map.cols, data).expect("same dims");
    out.normalized = true;
    out
}

/// PSNR serialized as a number, or the string `"inf"` when infinite.
mod psnr_serde {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) if s == "inf" => Ok(f64::INFINITY),
            Repr::Str(s) => Err(serde::de::Error::custom(format!("bad psnr value {s}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMetrics {
    pub frame: String,
    pub nmse: f64,
    pub ssim: f64,
    #[serde(with = "psnr_serde")]
    pub psnr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub nmse: f64,
    pub ssim: f64,
    #[serde(with = "psnr_serde")]
    pub psnr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub label: String,
    pub frames: Vec<FrameMetrics>,
    pub mean: MetricSummary,
    pub median: MetricSummary,
}

/// Metrics of one frame on maps already normalized to `[0, 1]`.
pub fn frame_metrics(frame: &str, truth: &RaMap, pred: &RaMap) -> Result<FrameMetrics> {
    Ok(FrameMetrics {
        frame: frame.into(),
        nmse: nmse(truth, pred)?,
        ssim: ssim(truth, pred)?,
        psnr_db: psnr(truth, pred, 1.0)?,
    })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

impl MetricReport {
    pub fn from_frames(label: &str, frames: Vec<FrameMetrics>) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::Empty("frames"));
        }
        let col = |f: fn(&FrameMetrics) -> f64| frames.iter().map(f).collect::<Vec<_>>();
        let (n, s, p) = (col(|f| f.nmse), col(|f| f.ssim), col(|f| f.psnr_db));
        Ok(Self {
            label: label.into(),
            mean: MetricSummary {
                nmse: mean(&n),
                ssim: mean(&s),
                psnr_db: mean(&p),
            },
            median: MetricSummary {
                nmse: median(&n),
                ssim: median(&s),
                psnr_db: median(&p),
            },
            frames,
        })
    }

    /// Evaluates `(name, truth, pred)` triples in parallel; maps are
    /// normalized by their global maximum first.
    pub fn evaluate(label: &str, pairs: &[(String, RaMap, RaMap)]) -> Result<Self> {
        let frames = pairs
            .par_iter()
            .map(|(name, t, p)| frame_metrics(name, &t.normalized(), &p.normalized()))
            .collect::<Result<Vec<_>>>()?;
        Self::from_frames(label, frames)
    }

    /// One row per frame, then the `mean` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("frame,nmse,ssim,psnr_db\n");
        let fmt_psnr = |p: f64| {
            if p.is_infinite() {
                "inf".to_string()
            } else {
                format!("{p:.6}")
            }
        };
        for f in &self.frames {
            out.push_str(&format!("{},{:.8},{:.8},{}\n", f.frame, f.nmse, f.ssim, fmt_psnr(f.psnr_db)));
        }
        let m = &self.mean;
        out.push_str(&format!("mean,{:.8},{:.8},{}\n", m.nmse, m.ssim, fmt_psnr(m.psnr_db)));
        out
    }
}

/// Text table laid out as `config | NMSE↓ | SSIM↑ | PSNR↑` using the mean row.
pub fn format_table(reports: &[MetricReport]) -> String {
    let width = reports.iter().map(|r| r.label.len()).max().unwrap_or(0).max(6);
    let mut out = format!("{:<width$}  {:>10}  {:>8}  {:>10}\n", "config", "NMSE↓", "SSIM↑", "PSNR↑");
    for r in reports {
        let p = if r.mean.psnr_db.is_infinite() {
            "inf".to_string()
        } else {
            format!("{:.3}", r.mean.psnr_db)
        };
        out.push_str(&format!(
            "{:<width$}  {:>10.4}  {:>8.4}  {:>10}\n",
            r.label, r.mean.nmse, r.mean.ssim, p
        ));
    }
    out
}
