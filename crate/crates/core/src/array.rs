//! Array geometry, the sin-uniform angular grid, steering vectors and
//! classical digital beamforming.
//!
//! Element spacings are stored in wavelengths, so the steering phase of
//! element `n` toward `sin(theta)` is `2*pi*spacings[n]*sin(theta)`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A linear array described by element offsets from the reference element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    spacings: Vec<f64>,
}

impl ArrayGeometry {
    /// Uniform linear array with half-wavelength spacing.
    pub fn ula(n_ch: usize) -> Result<Self> {
        if n_ch == 0 {
            return Err(Error::InvalidGeometry("element count must be positive".into()));
        }
        Ok(Self {
            spacings: (0..n_ch).map(|n| n as f64 * 0.5).collect(),
        })
    }

    pub fn from_spacings(spacings: Vec<f64>) -> Result<Self> {
        match spacings.first() {
            None => return Err(Error::InvalidGeometry("no elements".into())),
            Some(&d0) if d0 != 0.0 => {
                return Err(Error::InvalidGeometry(format!(
                    "reference element must sit at 0, found {d0}"
                )))
            }
            _ => {}
        }
        if spacings.iter().any(|d| !d.is_finite()) {
            return Err(Error::InvalidGeometry("non-finite spacing".into()));
        }
        if spacings.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGeometry("spacings must be strictly increasing".into()));
        }
        Ok(Self { spacings })
    }

    pub fn n_ch(&self) -> usize {
        self.spacings.len()
    }

    pub fn spacings(&self) -> &[f64] {
        &self.spacings
    }

    /// True for the half-wavelength ULA, the only layout with an FFT path.
    pub fn is_half_wavelength_ula(&self) -> bool {
        self.spacings
            .iter()
            .enumerate()
            .all(|(n, &d)| d == n as f64 * 0.5)
    }

    /// Short identifier written into file headers.
    pub fn id(&self) -> String {
        if self.is_half_wavelength_ula() {
            format!("ula{}", self.n_ch())
        } else {
            let bytes: Vec<u8> = self.spacings.iter().flat_map(|d| d.to_le_bytes()).collect();
            format!("custom{}-{}", self.n_ch(), &crate::hash::hex_digest(&bytes)[..12])
        }
    }
}

/// `l` grid points uniformly spaced in sin(theta) over [-1, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct AngularGrid {
    sin_values: Vec<f64>,
    theta_values: Vec<f64>,
}

impl AngularGrid {
    pub fn new(l: usize) -> Result<Self> {
        if l == 0 {
            return Err(Error::InvalidConfig("grid size must be positive".into()));
        }
        let sin_values: Vec<f64> = (0..l).map(|k| Self::sin_at(k, l)).collect();
        let theta_values = sin_values.iter().map(|s| s.asin().to_degrees()).collect();
        Ok(Self {
            sin_values,
            theta_values,
        })
    }

    fn sin_at(k: usize, l: usize) -> f64 {
        -1.0 + 2.0 * k as f64 / l as f64
    }

    pub fn len(&self) -> usize {
        self.sin_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sin_values.is_empty()
    }

    pub fn sin_values(&self) -> &[f64] {
        &self.sin_values
    }

    /// Grid angles in degrees.
    pub fn theta_values(&self) -> &[f64] {
        &self.theta_values
    }

    /// Grid spacing in the sin domain.
    pub fn step(&self) -> f64 {
        2.0 / self.len() as f64
    }

    /// Index of the grid point closest to `sin_theta`.
    pub fn nearest_index(&self, sin_theta: f64) -> usize {
        let k = ((sin_theta + 1.0) / self.step()).round();
        (k.max(0.0) as usize).min(self.len() - 1)
    }
}

pub fn steering_vector(geom: &ArrayGeometry, sin_theta: f64) -> Result<Vec<Complex64>> {
    if !(-1.0..=1.0).contains(&sin_theta) {
        return Err(Error::SinOutOfRange(sin_theta));
    }
    Ok(steering_unchecked(geom.spacings(), sin_theta).collect())
}

fn steering_unchecked(spacings: &[f64], sin_theta: f64) -> impl Iterator<Item = Complex64> + '_ {
    spacings
        .iter()
        .map(move |&d| Complex64::from_polar(1.0, 2.0 * PI * d * sin_theta))
}

/// The manifold `A = [a(theta_1), ..., a(theta_L)]`, stored column by column.
#[derive(Clone)]
pub struct SteeringMatrix {
    geometry: ArrayGeometry,
    grid: AngularGrid,
    columns: Vec<Complex64>,
    fft: Option<Arc<dyn Fft<f64>>>,
}

impl std::fmt::Debug for SteeringMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SteeringMatrix")
            .field("n_ch", &self.n_ch())
            .field("l", &self.l())
            .finish()
    }
}

impl SteeringMatrix {
    pub fn new(geometry: &ArrayGeometry, grid: &AngularGrid) -> Self {
        let columns = grid
            .sin_values()
            .iter()
            .flat_map(|&s| steering_unchecked(geometry.spacings(), s))
            .collect();
        let fft = (geometry.is_half_wavelength_ula() && geometry.n_ch() <= grid.len())
            .then(|| FftPlanner::new().plan_fft_forward(grid.len()));
        Self {
            geometry: geometry.clone(),
            grid: grid.clone(),
            columns,
            fft,
        }
    }

    pub fn n_ch(&self) -> usize {
        self.geometry.n_ch()
    }

    pub fn l(&self) -> usize {
        self.grid.len()
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        &self.geometry
    }

    pub fn grid(&self) -> &AngularGrid {
        &self.grid
    }

    /// Column `k`, i.e. `a(theta_k)`.
    pub fn column(&self, k: usize) -> &[Complex64] {
        let n = self.n_ch();
        &self.columns[k * n..(k + 1) * n]
    }

    pub fn entry(&self, n: usize, k: usize) -> Complex64 {
        self.columns[k * self.n_ch() + n]
    }

    pub fn columns(&self) -> impl ExactSizeIterator<Item = &[Complex64]> {
        self.columns.chunks_exact(self.n_ch())
    }

    /// Whether [`dbf_spectrum_fft`] is available for this manifold.
    pub fn has_fft_path(&self) -> bool {
        self.fft.is_some()
    }

    fn check_len(&self, y: &[Complex64]) -> Result<()> {
        if y.len() != self.n_ch() {
            return Err(Error::DimensionMismatch {
                expected: self.n_ch(),
                found: y.len(),
            });
        }
        Ok(())
    }
}

pub fn build_steering_matrix(geom: &ArrayGeometry, grid: &AngularGrid) -> SteeringMatrix {
    SteeringMatrix::new(geom, grid)
}

/// `A^H y / N_ch` by explicit matrix product.
pub fn dbf_spectrum(a: &SteeringMatrix, y: &[Complex64]) -> Result<Vec<Complex64>> {
    a.check_len(y)?;
    let scale = 1.0 / a.n_ch() as f64;
    Ok(a.columns()
        .map(|col| {
            col.iter()
                .zip(y)
                .fold(Complex64::new(0.0, 0.0), |acc, (c, v)| acc + c.conj() * v)
                * scale
        })
        .collect())
}

/// Same spectrum as [`dbf_spectrum`], evaluated with one zero-padded FFT.
///
/// With `sin_k = -1 + 2k/L` and half-wavelength spacing,
/// `conj(a_n(k)) = (-1)^n exp(-j 2 pi n k / L)`, so the spectrum is the
/// length-L DFT of `(-1)^n y_n`.
pub fn dbf_spectrum_fft(a: &SteeringMatrix, y: &[Complex64]) -> Result<Vec<Complex64>> {
    a.check_len(y)?;
    let fft = a.fft.as_ref().ok_or_else(|| {
        Error::InvalidGeometry("FFT beamforming needs a half-wavelength ULA with n_ch <= L".into())
    })?;
    let scale = 1.0 / a.n_ch() as f64;
    let mut buf = vec![Complex64::new(0.0, 0.0); a.l()];
    for (n, (dst, v)) in buf.iter_mut().zip(y).enumerate() {
        *dst = if n % 2 == 0 { *v } else { -*v } * scale;
    }
    fft.process(&mut buf);
    Ok(buf)
}
