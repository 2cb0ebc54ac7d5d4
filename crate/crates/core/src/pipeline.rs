//! ADC cube -> range-Doppler-channel cube -> per-bin angular spectra ->
//! Doppler-averaged range-azimuth map.
//!
//! FFT convention: unnormalized forward transform, `X[k] = sum_n x[n] e^{-j 2 pi k n / N}`,
//! over fast time (range) and slow time (Doppler) independently per channel.
//! A window, when selected, multiplies the samples before each transform.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::array::{dbf_spectrum, dbf_spectrum_fft, SteeringMatrix};
use crate::error::{Error, Result};
use crate::iaa::{iaa_spectrum_with, IaaConfig, IaaWorkspace};
use crate::scene::AdcCube;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    #[default]
    Rectangular,
    /// Periodic Hann, `0.5 (1 - cos(2 pi n / N))`.
    Hann,
}

impl WindowKind {
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            WindowKind::Rectangular => vec![1.0; n],
            WindowKind::Hann => (0..n)
                .map(|i| 0.5 * (1.0 - (2.0 * PI * i as f64 / n as f64).cos()))
                .collect(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            WindowKind::Rectangular => "rectangular",
            WindowKind::Hann => "hann",
        }
    }
}

/// Range-Doppler-channel cube indexed `[range][doppler][channel]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RdcCube {
    pub n_range: usize,
    pub n_doppler: usize,
    pub n_ch: usize,
    pub data: Vec<Complex64>,
}

impl RdcCube {
    pub fn dims(&self) -> [usize; 3] {
        [self.n_range, self.n_doppler, self.n_ch]
    }

    #[inline]
    fn offset(&self, r: usize, d: usize) -> usize {
        (r * self.n_doppler + d) * self.n_ch
    }

    pub fn get(&self, r: usize, d: usize, c: usize) -> Complex64 {
        self.data[self.offset(r, d) + c]
    }

    pub fn bins(&self) -> usize {
        self.n_range * self.n_doppler
    }
}

pub fn adc_to_rdc(cube: &AdcCube, range_trunc: usize, window: WindowKind) -> Result<RdcCube> {
    let (nf, ns, nc) = (cube.n_fast, cube.n_slow, cube.n_ch);
    if range_trunc == 0 || range_trunc > nf {
        return Err(Error::RangeTruncation {
            requested: range_trunc,
            available: nf,
        });
    }
    let mut planner = FftPlanner::<f64>::new();
    let fft_fast = planner.plan_fft_forward(nf);
    let fft_slow = planner.plan_fft_forward(ns);
    let w_fast = window.coefficients(nf);
    let w_slow = window.coefficients(ns);

    // Range transform: one column per (slow, channel) pair, keeping range_trunc bins.
    let mut ranged = vec![Complex64::new(0.0, 0.0); range_trunc * ns * nc];
    let mut buf = vec![Complex64::new(0.0, 0.0); nf];
    for w in 0..ns {
        for c in 0..nc {
            for (f, (b, wf)) in buf.iter_mut().zip(&w_fast).enumerate() {
                *b = cube.get(f, w, c) * *wf;
            }
            fft_fast.process(&mut buf);
            for (r, v) in buf.iter().take(range_trunc).enumerate() {
                ranged[(r * ns + w) * nc + c] = *v;
            }
        }
    }

    let mut buf = vec![Complex64::new(0.0, 0.0); ns];
    for r in 0..range_trunc {
        for c in 0..nc {
            for (w, (b, ww)) in buf.iter_mut().zip(&w_slow).enumerate() {
                *b = ranged[(r * ns + w) * nc + c] * *ww;
            }
            fft_slow.process(&mut buf);
            for (d, v) in buf.iter().enumerate() {
                ranged[(r * ns + d) * nc + c] = *v;
            }
        }
    }

    Ok(RdcCube {
        n_range: range_trunc,
        n_doppler: ns,
        n_ch: nc,
        data: ranged,
    })
}

/// The channel fiber at one range-Doppler bin, borrowed from the cube.
pub fn extract_beam_vector(rdc: &RdcCube, range_idx: usize, doppler_idx: usize) -> Result<&[Complex64]> {
    if range_idx >= rdc.n_range || doppler_idx >= rdc.n_doppler {
        return Err(Error::BinOutOfBounds {
            range: range_idx,
            doppler: doppler_idx,
            n_range: rdc.n_range,
            n_doppler: rdc.n_doppler,
        });
    }
    let o = rdc.offset(range_idx, doppler_idx);
    Ok(&rdc.data[o..o + rdc.n_ch])
}

/// Anything that maps a beam vector to a nonnegative length-L spectrum.
///
/// Implementations must be shareable across worker threads; `assemble_rda`
/// calls them concurrently.
pub trait SpectrumEstimator: Sync {
    fn name(&self) -> &str;

    fn grid_len(&self) -> usize;

    fn estimate(&self, y: &[Complex64]) -> Result<Vec<f64>>;

    /// Batched form; estimators with a faster batched path override this.
    fn estimate_batch(&self, ys: &[&[Complex64]]) -> Vec<Result<Vec<f64>>> {
        ys.iter().map(|y| self.estimate(y)).collect()
    }
}

/// `|A^H y| / N_ch`, through the FFT when the manifold allows it.
pub struct DbfEstimator<'a> {
    pub manifold: &'a SteeringMatrix,
}

impl SpectrumEstimator for DbfEstimator<'_> {
    fn name(&self) -> &str {
        "dbf"
    }

    fn grid_len(&self) -> usize {
        self.manifold.l()
    }

    fn estimate(&self, y: &[Complex64]) -> Result<Vec<f64>> {
        let spec = if self.manifold.has_fft_path() {
            dbf_spectrum_fft(self.manifold, y)?
        } else {
            dbf_spectrum(self.manifold, y)?
        };
        Ok(spec.into_iter().map(|c| c.norm()).collect())
    }
}

pub struct IaaEstimator<'a> {
    pub manifold: &'a SteeringMatrix,
    pub config: IaaConfig,
}

impl SpectrumEstimator for IaaEstimator<'_> {
    fn name(&self) -> &str {
        "iaa"
    }

    fn grid_len(&self) -> usize {
        self.manifold.l()
    }

    fn estimate(&self, y: &[Complex64]) -> Result<Vec<f64>> {
        self.estimate_batch(&[y]).pop().expect("one result per input")
    }

    fn estimate_batch(&self, ys: &[&[Complex64]]) -> Vec<Result<Vec<f64>>> {
        let mut ws = IaaWorkspace::default();
        ys.iter()
            .map(|y| {
                iaa_spectrum_with(self.manifold, y, &self.config, &mut ws).map(|r| r.magnitudes())
            })
            .collect()
    }
}

/// Range-Doppler-azimuth magnitudes indexed `[range][doppler][angle]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RdaCube {
    pub n_range: usize,
    pub n_doppler: usize,
    pub l: usize,
    pub data: Vec<f64>,
}

impl RdaCube {
    pub fn dims(&self) -> [usize; 3] {
        [self.n_range, self.n_doppler, self.l]
    }

    pub fn slice(&self, r: usize, d: usize) -> &[f64] {
        let o = (r * self.n_doppler + d) * self.l;
        &self.data[o..o + self.l]
    }
}

/// Bins handed to an estimator per work item. Fixed so the partition, and
/// with it every floating-point result, is independent of the worker count.
const BINS_PER_CHUNK: usize = 128;

/// Applies `estimator` to every range-Doppler bin on the current rayon pool.
pub fn assemble_rda(rdc: &RdcCube, estimator: &dyn SpectrumEstimator) -> Result<RdaCube> {
    let l = estimator.grid_len();
    let bins = rdc.bins();
    let chunks: Vec<Vec<Result<Vec<f64>>>> = (0..bins)
        .collect::<Vec<_>>()
        .par_chunks(BINS_PER_CHUNK)
        .map(|idx| {
            let ys: Vec<&[Complex64]> = idx
                .iter()
                .map(|&b| {
                    let o = b * rdc.n_ch;
                    &rdc.data[o..o + rdc.n_ch]
                })
                .collect();
            estimator.estimate_batch(&ys)
        })
        .collect();

    let mut data = Vec::with_capacity(bins * l);
    for (b, res) in chunks.into_iter().flatten().enumerate() {
        let (range, doppler) = (b / rdc.n_doppler, b % rdc.n_doppler);
        let wrap = |e: Error| Error::EstimatorFailed {
            range,
            doppler,
            source: Box::new(e),
        };
        let spec = res.map_err(wrap)?;
        if spec.len() != l {
            return Err(wrap(Error::DimensionMismatch {
                expected: l,
                found: spec.len(),
            }));
        }
        data.extend(spec.into_iter().map(|v| v.max(0.0)));
    }
    Ok(RdaCube {
        n_range: rdc.n_range,
        n_doppler: rdc.n_doppler,
        l,
        data,
    })
}

/// Range-azimuth image, row-major `[range][angle]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RaMap {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
    pub normalized: bool,
    /// Set when normalization was requested on an all-zero map.
    pub all_zero: bool,
}

impl RaMap {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        let all_zero = data.iter().all(|&v| v == 0.0);
        Ok(Self {
            rows,
            cols,
            data,
            normalized: false,
            all_zero,
        })
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn max(&self) -> f64 {
        self.data.iter().cloned().fold(0.0, f64::max)
    }

    /// `(row, col)` of the largest entry; first occurrence wins.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, v) in self.data.iter().enumerate() {
            if *v > self.data[best] {
                best = i;
            }
        }
        (best / self.cols, best % self.cols)
    }

    /// Divided by the global maximum; an all-zero map is returned unchanged
    /// with `all_zero` set.
    pub fn normalized(&self) -> Self {
        let peak = self.max();
        let mut out = self.clone();
        out.normalized = true;
        if peak > 0.0 {
            out.data.iter_mut().for_each(|v| *v /= peak);
            out.all_zero = false;
        } else {
            out.all_zero = true;
        }
        out
    }
}

pub fn rda_to_ra(rda: &RdaCube, normalize: bool) -> RaMap {
    let mut data = vec![0.0; rda.n_range * rda.l];
    let inv = 1.0 / rda.n_doppler as f64;
    for r in 0..rda.n_range {
        let row = &mut data[r * rda.l..(r + 1) * rda.l];
        for d in 0..rda.n_doppler {
            for (acc, v) in row.iter_mut().zip(rda.slice(r, d)) {
                *acc += v;
            }
        }
        row.iter_mut().for_each(|v| *v *= inv);
    }
    let map = RaMap::new(rda.n_range, rda.l, data).expect("dims consistent by construction");
    if normalize {
        map.normalized()
    } else {
        map
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::{steering_vector, AngularGrid, ArrayGeometry};
    use crate::scene::{simulate_adc_cube, SceneSpec, TargetSpec};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn target_cube(n_ch: usize, sin_theta: f64, r: f64, d: f64) -> (ArrayGeometry, AdcCube) {
        let g = ArrayGeometry::ula(n_ch).unwrap();
        let scene = SceneSpec::noiseless(vec![TargetSpec::at(sin_theta, c(0.8, 0.3)).with_bins(r, d)]);
        let cube = simulate_adc_cube(&g, &scene, 256, 64).unwrap();
        (g, cube)
    }

    #[test]
    fn single_target_peaks_at_its_bin() {
        let (g, cube) = target_cube(4, 0.3, 10.0, 5.0);
        let rdc = adc_to_rdc(&cube, 100, WindowKind::Rectangular).unwrap();
        assert_eq!(rdc.dims(), [100, 64, 4]);
        let peak = rdc.get(10, 5, 0).norm();
        assert!((peak - 256.0 * 64.0 * c(0.8, 0.3).norm()).abs() < 1e-6);
        for r in 0..100 {
            for d in 0..64 {
                if (r, d) != (10, 5) {
                    for ch in 0..4 {
                        assert!(rdc.get(r, d, ch).norm() <= 1e-9 * peak);
                    }
                }
            }
        }
        let y = extract_beam_vector(&rdc, 10, 5).unwrap();
        let a = steering_vector(&g, 0.3).unwrap();
        for (v, s) in y.iter().zip(&a) {
            assert!((v / y[0] - s).norm() < 1e-9);
        }
    }

    #[test]
    fn constant_channel_concentrates_at_dc() {
        let mut cube = AdcCube::zeros(32, 16, 2);
        for f in 0..32 {
            for w in 0..16 {
                let i = cube.index(f, w, 1);
                cube.data[i] = c(1.0, 0.0);
            }
        }
        let rdc = adc_to_rdc(&cube, 32, WindowKind::Rectangular).unwrap();
        assert!((rdc.get(0, 0, 1) - c(512.0, 0.0)).norm() < 1e-9);
        for r in 0..32 {
            for d in 0..16 {
                if (r, d) != (0, 0) {
                    assert!(rdc.get(r, d, 1).norm() <= 1e-9);
                }
                assert_eq!(rdc.get(r, d, 0), c(0.0, 0.0));
            }
        }
    }

    #[test]
    fn hann_window_scales_dc() {
        let mut cube = AdcCube::zeros(16, 8, 1);
        cube.data.iter_mut().for_each(|v| *v = c(1.0, 0.0));
        let rdc = adc_to_rdc(&cube, 16, WindowKind::Hann).unwrap();
        // Periodic Hann sums to N/2 on each axis.
        assert!((rdc.get(0, 0, 0).re - 8.0 * 4.0).abs() < 1e-9);
    }

    #[test]
    fn truncation_bounds() {
        let cube = AdcCube::zeros(8, 4, 1);
        assert!(adc_to_rdc(&cube, 9, WindowKind::Rectangular).is_err());
        assert!(adc_to_rdc(&cube, 0, WindowKind::Rectangular).is_err());
        assert_eq!(adc_to_rdc(&cube, 8, WindowKind::Rectangular).unwrap().n_range, 8);
    }

    #[test]
    fn extract_returns_exact_fiber() {
        let rdc = RdcCube {
            n_range: 2,
            n_doppler: 3,
            n_ch: 2,
            data: (0..12).map(|i| c(i as f64, -(i as f64))).collect(),
        };
        assert_eq!(extract_beam_vector(&rdc, 1, 2).unwrap(), &[c(10.0, -10.0), c(11.0, -11.0)]);
        assert!(matches!(
            extract_beam_vector(&rdc, 2, 0),
            Err(Error::BinOutOfBounds { .. })
        ));
        assert!(extract_beam_vector(&rdc, 0, 3).is_err());
    }

    struct Constant(Vec<f64>);

    impl SpectrumEstimator for Constant {
        fn name(&self) -> &str {
            "constant"
        }
        fn grid_len(&self) -> usize {
            self.0.len()
        }
        fn estimate(&self, _: &[Complex64]) -> Result<Vec<f64>> {
            Ok(self.0.clone())
        }
    }

    struct FailsAt(usize);

    impl SpectrumEstimator for FailsAt {
        fn name(&self) -> &str {
            "fails"
        }
        fn grid_len(&self) -> usize {
            4
        }
        fn estimate(&self, y: &[Complex64]) -> Result<Vec<f64>> {
            if y[0].re as usize == self.0 {
                Err(Error::NonFinite)
            } else {
                Ok(vec![0.0; 4])
            }
        }
    }

    #[test]
    fn constant_estimator_fills_every_slice() {
        let rdc = RdcCube {
            n_range: 3,
            n_doppler: 5,
            n_ch: 2,
            data: vec![c(1.0, 0.0); 30],
        };
        let est = Constant(vec![0.5, 1.5, 2.5]);
        let rda = assemble_rda(&rdc, &est).unwrap();
        assert_eq!(rda.dims(), [3, 5, 3]);
        for r in 0..3 {
            for d in 0..5 {
                assert_eq!(rda.slice(r, d), &[0.5, 1.5, 2.5]);
            }
        }
    }

    #[test]
    fn estimator_failure_reports_bin() {
        let rdc = RdcCube {
            n_range: 4,
            n_doppler: 3,
            n_ch: 1,
            data: (0..12).map(|i| c(i as f64, 0.0)).collect(),
        };
        match assemble_rda(&rdc, &FailsAt(7)) {
            Err(Error::EstimatorFailed { range, doppler, .. }) => assert_eq!((range, doppler), (2, 1)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dbf_zero_cube_gives_zero_rda() {
        let g = ArrayGeometry::ula(4).unwrap();
        let a = SteeringMatrix::new(&g, &AngularGrid::new(32).unwrap());
        let rdc = adc_to_rdc(&AdcCube::zeros(16, 8, 4), 10, WindowKind::Rectangular).unwrap();
        let rda = assemble_rda(&rdc, &DbfEstimator { manifold: &a }).unwrap();
        assert!(rda.data.iter().all(|v| *v == 0.0));
        let ra = rda_to_ra(&rda, true);
        assert!(ra.all_zero && ra.normalized);
        assert!(ra.data.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn dbf_and_iaa_localize_single_target() {
        let grid = AngularGrid::new(256).unwrap();
        let k = 150;
        let s = grid.sin_values()[k];
        let (g, cube) = target_cube(8, s, 12.0, 40.0);
        let a = SteeringMatrix::new(&g, &grid);
        let rdc = adc_to_rdc(&cube, 100, WindowKind::Rectangular).unwrap();
        let dbf = DbfEstimator { manifold: &a };
        let iaa = IaaEstimator {
            manifold: &a,
            config: IaaConfig::default(),
        };
        for est in [&dbf as &dyn SpectrumEstimator, &iaa] {
            let rda = assemble_rda(&rdc, est).unwrap();
            let slice = rda.slice(12, 40);
            let best = (0..256).max_by(|&i, &j| slice[i].total_cmp(&slice[j])).unwrap();
            assert_eq!(best, k, "{}", est.name());
            assert_eq!(rda_to_ra(&rda, true).argmax(), (12, k), "{}", est.name());
        }
    }

    #[test]
    fn parallel_assembly_is_bit_identical() {
        let grid = AngularGrid::new(64).unwrap();
        let g = ArrayGeometry::ula(6).unwrap();
        let scene = SceneSpec {
            targets: vec![TargetSpec::at(0.2, c(1.0, 0.0)).with_bins(3.0, 2.0)],
            noise_sigma: 0.1,
            seed: 4,
        };
        let cube = simulate_adc_cube(&g, &scene, 32, 16).unwrap();
        let rdc = adc_to_rdc(&cube, 20, WindowKind::Hann).unwrap();
        let a = SteeringMatrix::new(&g, &grid);
        let est = IaaEstimator {
            manifold: &a,
            config: IaaConfig::default(),
        };
        let run = |w: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .unwrap()
                .install(|| assemble_rda(&rdc, &est).unwrap())
        };
        assert_eq!(run(1).data, run(4).data);
    }

    #[test]
    fn doppler_mean() {
        let rda = RdaCube {
            n_range: 2,
            n_doppler: 4,
            l: 3,
            data: vec![2.0; 24],
        };
        let ra = rda_to_ra(&rda, false);
        assert!(ra.data.iter().all(|v| *v == 2.0));
        assert!(!ra.normalized);

        let mut data = vec![0.0; 24];
        for v in &mut data[(4 + 2) * 3..(4 + 2) * 3 + 3] {
            *v = 6.0;
        }
        let rda = RdaCube { data, ..rda };
        let ra = rda_to_ra(&rda, false);
        assert_eq!(ra.row(1), &[1.5, 1.5, 1.5]);
        assert_eq!(ra.row(0), &[0.0, 0.0, 0.0]);
        let n = rda_to_ra(&rda, true);
        assert_eq!(n.max(), 1.0);
        assert!(n.data.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
