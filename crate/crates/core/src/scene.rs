//! Synthetic point-target scenes: single-snapshot beam vectors and full
//! fast-time x slow-time x channel ADC cubes.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::array::{steering_vector, ArrayGeometry};
use crate::error::{Error, Result};

/// Mixes an item index into a base seed (splitmix64 finalizer), so batch
/// items get independent streams regardless of how they are scheduled.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub sin_theta: f64,
    pub amplitude: Complex64,
    #[serde(default)]
    pub range_bin: f64,
    #[serde(default)]
    pub doppler_bin: f64,
}

impl TargetSpec {
    pub fn at(sin_theta: f64, amplitude: Complex64) -> Self {
        Self {
            sin_theta,
            amplitude,
            range_bin: 0.0,
            doppler_bin: 0.0,
        }
    }

    pub fn with_bins(mut self, range_bin: f64, doppler_bin: f64) -> Self {
        self.range_bin = range_bin;
        self.doppler_bin = doppler_bin;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(-1.0..=1.0).contains(&self.sin_theta) {
            return Err(Error::SinOutOfRange(self.sin_theta));
        }
        if !(self.amplitude.norm() > 0.0) {
            return Err(Error::InvalidConfig("target amplitude must be nonzero".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub targets: Vec<TargetSpec>,
    /// Per-element complex noise standard deviation.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SceneSpec {
    pub fn noiseless(targets: Vec<TargetSpec>) -> Self {
        Self {
            targets,
            noise_sigma: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(Error::InvalidConfig("noise_sigma must be finite and >= 0".into()));
        }
        self.targets.iter().try_for_each(TargetSpec::validate)
    }
}

/// Circular complex Gaussian with `E|n|^2 = sigma^2`.
struct ComplexNoise {
    normal: Option<Normal<f64>>,
}

impl ComplexNoise {
    fn new(sigma: f64) -> Self {
        let normal = (sigma > 0.0)
            .then(|| Normal::new(0.0, sigma / std::f64::consts::SQRT_2).expect("sigma is finite"));
        Self { normal }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> Complex64 {
        match &self.normal {
            Some(n) => Complex64::new(n.sample(rng), n.sample(rng)),
            None => Complex64::new(0.0, 0.0),
        }
    }
}

/// `y = sum_k s_k a(theta_k) + n`.
pub fn simulate_beam_vector(geom: &ArrayGeometry, scene: &SceneSpec) -> Result<Vec<Complex64>> {
    scene.validate()?;
    let mut y = vec![Complex64::new(0.0, 0.0); geom.n_ch()];
    for t in &scene.targets {
        for (v, a) in y.iter_mut().zip(steering_vector(geom, t.sin_theta)?) {
            *v += t.amplitude * a;
        }
    }
    let noise = ComplexNoise::new(scene.noise_sigma);
    let mut rng = rng_for(scene.seed);
    for v in &mut y {
        *v += noise.sample(&mut rng);
    }
    Ok(y)
}

/// Raw complex samples indexed `[fast][slow][channel]`, channel fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct AdcCube {
    pub n_fast: usize,
    pub n_slow: usize,
    pub n_ch: usize,
    pub data: Vec<Complex64>,
}

impl AdcCube {
    pub const DEFAULT_FAST: usize = 256;
    pub const DEFAULT_SLOW: usize = 64;

    pub fn zeros(n_fast: usize, n_slow: usize, n_ch: usize) -> Self {
        Self {
            n_fast,
            n_slow,
            n_ch,
            data: vec![Complex64::new(0.0, 0.0); n_fast * n_slow * n_ch],
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.n_fast, self.n_slow, self.n_ch]
    }

    #[inline]
    pub fn index(&self, f: usize, w: usize, c: usize) -> usize {
        (f * self.n_slow + w) * self.n_ch + c
    }

    pub fn get(&self, f: usize, w: usize, c: usize) -> Complex64 {
        self.data[self.index(f, w, c)]
    }
}

/// Each target contributes `s a(theta) exp(j 2 pi (r f / N_fast + d w / N_slow))`,
/// so an unnormalized forward 2D FFT puts `N_fast N_slow s a(theta)` at bin
/// `(r, d)` for integer bins.
pub fn simulate_adc_cube(
    geom: &ArrayGeometry,
    scene: &SceneSpec,
    n_fast: usize,
    n_slow: usize,
) -> Result<AdcCube> {
    if n_fast == 0 || n_slow == 0 {
        return Err(Error::InvalidConfig("cube dimensions must be positive".into()));
    }
    scene.validate()?;
    let n_ch = geom.n_ch();
    let mut cube = AdcCube::zeros(n_fast, n_slow, n_ch);
    for t in &scene.targets {
        let channel: Vec<Complex64> = steering_vector(geom, t.sin_theta)?
            .into_iter()
            .map(|a| a * t.amplitude)
            .collect();
        let fast: Vec<Complex64> = (0..n_fast)
            .map(|f| Complex64::from_polar(1.0, 2.0 * PI * t.range_bin * f as f64 / n_fast as f64))
            .collect();
        let slow: Vec<Complex64> = (0..n_slow)
            .map(|w| Complex64::from_polar(1.0, 2.0 * PI * t.doppler_bin * w as f64 / n_slow as f64))
            .collect();
        for (f, pf) in fast.iter().enumerate() {
            for (w, pw) in slow.iter().enumerate() {
                let phase = pf * pw;
                let base = (f * n_slow + w) * n_ch;
                for (dst, ch) in cube.data[base..base + n_ch].iter_mut().zip(&channel) {
                    *dst += phase * ch;
                }
            }
        }
    }
    let noise = ComplexNoise::new(scene.noise_sigma);
    if scene.noise_sigma > 0.0 {
        let mut rng = rng_for(scene.seed);
        for v in &mut cube.data {
            *v += noise.sample(&mut rng);
        }
    }
    Ok(cube)
}

/// Distribution of random training scenes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenePolicy {
    /// Targets per scene are uniform in `1..=k_max`.
    pub k_max: usize,
    /// Minimum pairwise separation in grid cells of width `2 / grid_len`.
    pub min_separation_cells: f64,
    pub grid_len: usize,
    /// Amplitude magnitudes are log-uniform in this interval; phases uniform.
    pub amplitude_range: [f64; 2],
    /// SNR of the strongest target, uniform in dB over this interval.
    pub snr_db_range: [f64; 2],
    /// Range bins are drawn from `0..range_bins` (integers when `integer_bins`).
    pub range_bins: usize,
    pub doppler_bins: usize,
    pub integer_bins: bool,
}

impl Default for ScenePolicy {
    fn default() -> Self {
        Self {
            k_max: 3,
            min_separation_cells: 2.0,
            grid_len: 256,
            amplitude_range: [0.05, 1.0],
            snr_db_range: [0.0, 30.0],
            range_bins: 100,
            doppler_bins: 64,
            integer_bins: true,
        }
    }
}

impl ScenePolicy {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidPolicy(m.to_string()));
        let [amin, amax] = self.amplitude_range;
        let [smin, smax] = self.snr_db_range;
        if self.k_max == 0 {
            return bad("k_max must be at least 1");
        }
        if self.grid_len == 0 {
            return bad("grid_len must be positive");
        }
        if !(self.min_separation_cells >= 0.0) || !self.min_separation_cells.is_finite() {
            return bad("min_separation_cells must be finite and >= 0");
        }
        if !(amin > 0.0 && amin <= amax && amax.is_finite()) {
            return bad("amplitude_range must satisfy 0 < lo <= hi");
        }
        if !(smin.is_finite() && smax.is_finite() && smin <= smax) {
            return bad("snr_db_range must be finite with lo <= hi");
        }
        if self.range_bins == 0 || self.doppler_bins == 0 {
            return bad("range_bins and doppler_bins must be positive");
        }
        let sep = self.min_separation_cells * 2.0 / self.grid_len as f64;
        if (self.k_max as f64 - 1.0) * sep >= 1.0 {
            return bad("k_max targets cannot fit with the requested separation");
        }
        Ok(())
    }
}

const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;

pub fn sample_training_scene(rng_seed: u64, policy: &ScenePolicy) -> Result<SceneSpec> {
    policy.validate()?;
    let mut rng = rng_for(rng_seed);
    let k = rng.random_range(1..=policy.k_max);
    let sep = policy.min_separation_cells * 2.0 / policy.grid_len as f64;
    let [amin, amax] = policy.amplitude_range;
    let (lmin, lmax) = (amin.ln(), amax.ln());

    let mut targets: Vec<TargetSpec> = Vec::with_capacity(k);
    while targets.len() < k {
        let mut placed = None;
        for _ in 0..MAX_PLACEMENT_ATTEMPTS {
            let s: f64 = rng.random_range(-1.0..1.0);
            if targets.iter().all(|t| (t.sin_theta - s).abs() >= sep) {
                placed = Some(s);
                break;
            }
        }
        let Some(sin_theta) = placed else {
            return Err(Error::InvalidPolicy(
                "could not place targets with the requested separation".into(),
            ));
        };
        let mag = if lmin == lmax {
            amin
        } else {
            rng.random_range(lmin..lmax).exp()
        };
        let phase = rng.random_range(0.0..2.0 * PI);
        let (range_bin, doppler_bin) = if policy.integer_bins {
            (
                rng.random_range(0..policy.range_bins) as f64,
                rng.random_range(0..policy.doppler_bins) as f64,
            )
        } else {
            (
                rng.random_range(0.0..policy.range_bins as f64),
                rng.random_range(0.0..policy.doppler_bins as f64),
            )
        };
        targets.push(TargetSpec {
            sin_theta,
            amplitude: Complex64::from_polar(mag, phase),
            range_bin,
            doppler_bin,
        });
    }

    let [smin, smax] = policy.snr_db_range;
    let snr_db = if smin == smax {
        smin
    } else {
        rng.random_range(smin..smax)
    };
    let ref_power = targets
        .iter()
        .map(|t| t.amplitude.norm_sqr())
        .fold(0.0, f64::max);
    let noise_sigma = (ref_power / 10f64.powf(snr_db / 10.0)).sqrt();
    Ok(SceneSpec {
        targets,
        noise_sigma,
        seed: rng.random(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ula(n: usize) -> ArrayGeometry {
        ArrayGeometry::ula(n).unwrap()
    }

    #[test]
    fn single_noiseless_target_is_its_steering_vector() {
        let g = ula(8);
        let scene = SceneSpec::noiseless(vec![TargetSpec::at(0.3, Complex64::new(1.0, 0.0))]);
        let y = simulate_beam_vector(&g, &scene).unwrap();
        assert_eq!(y, steering_vector(&g, 0.3).unwrap());
    }

    #[test]
    fn empty_noiseless_scene_is_zero() {
        let y = simulate_beam_vector(&ula(5), &SceneSpec::noiseless(vec![])).unwrap();
        assert!(y.iter().all(|v| v.norm() == 0.0));
        let cube = simulate_adc_cube(&ula(3), &SceneSpec::noiseless(vec![]), 8, 4).unwrap();
        assert!(cube.data.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn superposition() {
        let g = ula(10);
        let t1 = TargetSpec::at(-0.2, Complex64::new(0.5, 0.1));
        let t2 = TargetSpec::at(0.6, Complex64::new(-0.3, 0.8));
        let both = simulate_beam_vector(&g, &SceneSpec::noiseless(vec![t1.clone(), t2.clone()])).unwrap();
        let a = simulate_beam_vector(&g, &SceneSpec::noiseless(vec![t1])).unwrap();
        let b = simulate_beam_vector(&g, &SceneSpec::noiseless(vec![t2])).unwrap();
        for ((v, p), q) in both.iter().zip(&a).zip(&b) {
            assert!((v - (p + q)).norm() < 1e-15);
        }
    }

    #[test]
    fn rejects_invalid_targets() {
        let g = ula(4);
        let bad = SceneSpec::noiseless(vec![TargetSpec::at(1.5, Complex64::new(1.0, 0.0))]);
        assert!(simulate_beam_vector(&g, &bad).is_err());
        let zero = SceneSpec::noiseless(vec![TargetSpec::at(0.1, Complex64::new(0.0, 0.0))]);
        assert!(simulate_beam_vector(&g, &zero).is_err());
    }

    #[test]
    fn same_seed_same_noise() {
        let g = ula(16);
        let scene = SceneSpec {
            targets: vec![TargetSpec::at(0.1, Complex64::new(1.0, 0.0))],
            noise_sigma: 0.3,
            seed: 99,
        };
        assert_eq!(
            simulate_beam_vector(&g, &scene).unwrap(),
            simulate_beam_vector(&g, &scene).unwrap()
        );
        let other = SceneSpec { seed: 100, ..scene.clone() };
        assert_ne!(
            simulate_beam_vector(&g, &scene).unwrap(),
            simulate_beam_vector(&g, &other).unwrap()
        );
    }

    #[test]
    fn noise_variance_matches_sigma() {
        let g = ula(4);
        let sigma = 0.7;
        let mut acc = [0.0f64; 4];
        let trials = 100_000;
        for i in 0..trials {
            let scene = SceneSpec {
                targets: vec![],
                noise_sigma: sigma,
                seed: derive_seed(5, i),
            };
            for (a, v) in acc.iter_mut().zip(simulate_beam_vector(&g, &scene).unwrap()) {
                *a += v.norm_sqr();
            }
        }
        for a in acc {
            let var = a / trials as f64;
            assert!((var / (sigma * sigma) - 1.0).abs() < 0.02, "var {var}");
        }
    }

    #[test]
    fn snr_bookkeeping() {
        let g = ula(8);
        let policy = ScenePolicy {
            k_max: 1,
            amplitude_range: [1.0, 1.0],
            snr_db_range: [12.0, 12.0],
            ..ScenePolicy::default()
        };
        let mut noise_power = 0.0;
        let mut count = 0.0;
        for i in 0..10_000 {
            let scene = sample_training_scene(derive_seed(77, i), &policy).unwrap();
            let t = &scene.targets[0];
            let clean = simulate_beam_vector(&g, &SceneSpec { noise_sigma: 0.0, ..scene.clone() }).unwrap();
            let noisy = simulate_beam_vector(&g, &scene).unwrap();
            for (a, b) in noisy.iter().zip(&clean) {
                noise_power += (a - b).norm_sqr() / t.amplitude.norm_sqr();
                count += 1.0;
            }
        }
        let snr_db = -10.0 * (noise_power / count).log10();
        assert!((snr_db - 12.0).abs() < 0.2, "snr {snr_db}");
    }

    #[test]
    fn cube_target_phase_progression() {
        let g = ula(3);
        let amp = Complex64::new(0.5, -0.5);
        let scene = SceneSpec::noiseless(vec![TargetSpec::at(0.25, amp).with_bins(3.0, 2.0)]);
        let cube = simulate_adc_cube(&g, &scene, 16, 8).unwrap();
        assert_eq!(cube.dims(), [16, 8, 3]);
        let a = steering_vector(&g, 0.25).unwrap();
        let expect = amp * a[2] * Complex64::from_polar(1.0, 2.0 * PI * (3.0 * 5.0 / 16.0 + 2.0 * 7.0 / 8.0));
        assert!((cube.get(5, 7, 2) - expect).norm() < 1e-12);
    }

    #[test]
    fn policy_single_target_fixed_snr() {
        let policy = ScenePolicy {
            k_max: 1,
            snr_db_range: [20.0, 20.0],
            ..ScenePolicy::default()
        };
        for i in 0..200 {
            let s = sample_training_scene(i, &policy).unwrap();
            assert_eq!(s.targets.len(), 1);
            let t = &s.targets[0];
            let snr = 10.0 * (t.amplitude.norm_sqr() / s.noise_sigma.powi(2)).log10();
            assert!((snr - 20.0).abs() < 1e-9);
        }
    }

    #[test]
    fn policy_respects_separation_and_bounds() {
        let policy = ScenePolicy {
            k_max: 6,
            ..ScenePolicy::default()
        };
        let min_sep = 2.0 * 2.0 / 256.0;
        for i in 0..500 {
            let s = sample_training_scene(derive_seed(1, i), &policy).unwrap();
            assert!((1..=6).contains(&s.targets.len()));
            for (j, a) in s.targets.iter().enumerate() {
                assert!((-1.0..1.0).contains(&a.sin_theta));
                let m = a.amplitude.norm();
                assert!((0.05..=1.0).contains(&m));
                assert!(a.range_bin < 100.0 && a.range_bin.fract() == 0.0);
                assert!(a.doppler_bin < 64.0);
                for b in &s.targets[j + 1..] {
                    assert!((a.sin_theta - b.sin_theta).abs() >= min_sep);
                }
            }
        }
    }

    #[test]
    fn policy_is_deterministic() {
        let policy = ScenePolicy::default();
        let draw = || -> Vec<SceneSpec> {
            (0..10_000)
                .map(|i| sample_training_scene(derive_seed(42, i), &policy).unwrap())
                .collect()
        };
        assert_eq!(draw(), draw());
    }

    #[test]
    fn invalid_policies_rejected() {
        let cases = [
            ScenePolicy { k_max: 0, ..ScenePolicy::default() },
            ScenePolicy { amplitude_range: [0.0, 1.0], ..ScenePolicy::default() },
            ScenePolicy { amplitude_range: [1.0, 0.5], ..ScenePolicy::default() },
            ScenePolicy { snr_db_range: [10.0, 0.0], ..ScenePolicy::default() },
            ScenePolicy { k_max: 200, min_separation_cells: 2.0, ..ScenePolicy::default() },
        ];
        for p in cases {
            assert!(matches!(sample_training_scene(1, &p), Err(Error::InvalidPolicy(_))));
        }
    }

    #[test]
    fn scene_json_round_trip() {
        let s = sample_training_scene(3, &ScenePolicy::default()).unwrap();
        let text = serde_json::to_string_pretty(&s).unwrap();
        let back: SceneSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(s, back);
    }
}
