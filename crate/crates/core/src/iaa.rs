//! Single-snapshot Iterative Adaptive Approach.
//!
//! Each iteration rebuilds the covariance `R = A diag(P) A^H` from the current
//! power spectrum, factors it once, and evaluates the weighted-least-squares
//! amplitude at every grid angle as
//!
//! ```text
//! s_l = a_l^H R^-1 y / (a_l^H R^-1 a_l)
//! ```
//!
//! With `R = L L^H`, both quadratic forms reduce to inner products of
//! `L^-1 a_l` and `L^-1 y`, so each column costs a single triangular solve.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array::{dbf_spectrum, SteeringMatrix};
use crate::error::{Error, Result};
use crate::latency::{time_per_vector, LatencyReport};
use crate::linalg::Cholesky;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IaaConfig {
    pub max_iters: usize,
    /// Stop once the largest power change, relative to the previous peak
    /// power, falls below this.
    pub rel_tol: f64,
    /// Diagonal loading as a fraction of `trace(R) / n_ch`.
    pub loading: f64,
}

impl Default for IaaConfig {
    fn default() -> Self {
        Self {
            max_iters: 15,
            rel_tol: 1e-4,
            loading: 1e-6,
        }
    }
}

impl IaaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("IAA max_iters must be at least 1".into()));
        }
        if self.rel_tol.is_nan() || self.rel_tol < 0.0 {
            return Err(Error::InvalidConfig("IAA rel_tol must be nonnegative".into()));
        }
        if !self.loading.is_finite() || self.loading < 0.0 {
            return Err(Error::InvalidConfig("IAA loading must be finite and nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IaaResult {
    pub coeffs: Vec<Complex64>,
    /// `|coeffs|^2`.
    pub power: Vec<f64>,
    pub iters_used: usize,
    pub converged: bool,
}

impl IaaResult {
    pub fn magnitudes(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.norm()).collect()
    }
}

/// Scratch buffers for one IAA run; reused across vectors by batch workers.
#[derive(Debug, Default)]
pub struct IaaWorkspace {
    cov: Vec<Complex64>,
    col: Vec<Complex64>,
    whitened_y: Vec<Complex64>,
}

pub fn iaa_spectrum(a: &SteeringMatrix, y: &[Complex64], cfg: &IaaConfig) -> Result<IaaResult> {
    iaa_spectrum_with(a, y, cfg, &mut IaaWorkspace::default())
}

pub fn iaa_spectrum_with(
    a: &SteeringMatrix,
    y: &[Complex64],
    cfg: &IaaConfig,
    ws: &mut IaaWorkspace,
) -> Result<IaaResult> {
    cfg.validate()?;
    if y.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    let n = a.n_ch();
    let l = a.l();

    let mut coeffs = dbf_spectrum(a, y)?;
    let mut power: Vec<f64> = coeffs.iter().map(|c| c.norm_sqr()).collect();

    if power.iter().all(|&p| p == 0.0) {
        return Ok(IaaResult {
            coeffs: vec![Complex64::new(0.0, 0.0); l],
            power: vec![0.0; l],
            iters_used: 1,
            converged: true,
        });
    }

    let mut iters_used = 0;
    let mut converged = false;
    while iters_used < cfg.max_iters {
        iters_used += 1;

        let cov = &mut ws.cov;
        cov.clear();
        cov.resize(n * n, Complex64::new(0.0, 0.0));
        for (col, &p) in a.columns().zip(&power) {
            if p == 0.0 {
                continue;
            }
            for m in 0..n {
                let pa = col[m] * p;
                let row = &mut cov[m * n..m * n + m + 1];
                for (dst, an) in row.iter_mut().zip(col) {
                    *dst += pa * an.conj();
                }
            }
        }
        // |a_l|^2 = n_ch for every column, so trace(R) / n_ch = sum(P).
        let load = cfg.loading * power.iter().sum::<f64>();
        for m in 0..n {
            cov[m * n + m].re += load;
        }
        let chol = Cholesky::factor(std::mem::take(cov), n)?;

        ws.whitened_y.clear();
        ws.whitened_y.extend_from_slice(y);
        chol.forward_solve(&mut ws.whitened_y);

        for (k, col) in a.columns().enumerate() {
            ws.col.clear();
            ws.col.extend_from_slice(col);
            chol.forward_solve(&mut ws.col);
            let mut num = Complex64::new(0.0, 0.0);
            let mut den = 0.0;
            for (z, w) in ws.col.iter().zip(&ws.whitened_y) {
                num += z.conj() * w;
                den += z.norm_sqr();
            }
            coeffs[k] = num / den;
        }
        ws.cov = chol.into_buffer();

        let prev_peak = power.iter().cloned().fold(0.0, f64::max);
        let mut change: f64 = 0.0;
        for (p, c) in power.iter_mut().zip(&coeffs) {
            let next = c.norm_sqr();
            change = change.max((next - *p).abs());
            *p = next;
        }
        if change / (prev_peak + f64::EPSILON) < cfg.rel_tol {
            converged = true;
            break;
        }
    }

    Ok(IaaResult {
        coeffs,
        power,
        iters_used,
        converged,
    })
}

/// Runs IAA on every vector. Order is preserved and a failing vector does not
/// stop the rest of the batch.
pub fn iaa_batch<V>(a: &SteeringMatrix, vectors: &[V], cfg: &IaaConfig) -> Vec<Result<IaaResult>>
where
    V: AsRef<[Complex64]> + Sync,
{
    vectors
        .par_iter()
        .map_init(IaaWorkspace::default, |ws, y| {
            iaa_spectrum_with(a, y.as_ref(), cfg, ws)
        })
        .collect()
}

/// Median/mean per-vector IAA latency on the current thread.
pub fn time_iaa<V>(a: &SteeringMatrix, vectors: &[V], cfg: &IaaConfig, warmup: usize) -> LatencyReport
where
    V: AsRef<[Complex64]>,
{
    let mut ws = IaaWorkspace::default();
    let mut report = time_per_vector("iaa", a.n_ch(), a.l(), vectors, warmup, |y| {
        let _ = std::hint::black_box(iaa_spectrum_with(a, y.as_ref(), cfg, &mut ws));
    });
    report.iterations = Some(cfg.max_iters);
    report.workers = 1;
    report
}
