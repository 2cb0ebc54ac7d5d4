use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::mlp::MlpModel;
use super::record::{normalization_factor, realify};
use super::Real;
use crate::array::SteeringMatrix;
use crate::error::{Error, Result};
use crate::pipeline::SpectrumEstimator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InferenceMode {
    /// Scale the input by `1/alpha` and the output by `alpha`, the exact
    /// inverse of the training-time scaling.
    #[default]
    Normalized,
    /// Feed the raw beam vector.
    Direct,
}

fn prepare(a: &SteeringMatrix, y: &[Complex64], mode: InferenceMode) -> Result<(Vec<f64>, f64)> {
    match mode {
        InferenceMode::Direct => Ok((realify(y), 1.0)),
        InferenceMode::Normalized => {
            let alpha = normalization_factor(a, y)?;
            if alpha == 0.0 {
                return Ok((Vec::new(), 0.0));
            }
            let scaled: Vec<Complex64> = y.iter().map(|v| v / alpha).collect();
            Ok((realify(&scaled), alpha))
        }
    }
}

fn check<T: Real>(model: &MlpModel<T>, a: &SteeringMatrix) -> Result<()> {
    if model.n_ch() != a.n_ch() || model.grid_len() != a.l() {
        return Err(Error::ShapeMismatch {
            expected: format!("n_ch {}, L {}", a.n_ch(), a.l()),
            found: format!("model n_ch {}, L {}", model.n_ch(), model.grid_len()),
        });
    }
    Ok(())
}

/// Network spectrum for one beam vector; negative outputs clamp to zero.
pub fn infer_spectrum<T: Real>(
    model: &MlpModel<T>,
    a: &SteeringMatrix,
    y: &[Complex64],
    mode: InferenceMode,
) -> Result<Vec<f64>> {
    check(model, a)?;
    if y.len() != a.n_ch() {
        return Err(Error::DimensionMismatch {
            expected: a.n_ch(),
            found: y.len(),
        });
    }
    let (input, scale) = prepare(a, y, mode)?;
    if scale == 0.0 {
        return Ok(vec![0.0; model.grid_len()]);
    }
    let input: Vec<T> = input.into_iter().map(T::from_f64).collect();
    let out = model.forward(&input)?;
    Ok(out
        .into_iter()
        .map(|v| (v.to_f64().unwrap() * scale).max(0.0))
        .collect())
}

/// The network as a drop-in [`SpectrumEstimator`], with a batched forward pass.
pub struct NetworkEstimator<'a, T = f32> {
    pub model: &'a MlpModel<T>,
    pub manifold: &'a SteeringMatrix,
    pub mode: InferenceMode,
}

impl<'a, T: Real> NetworkEstimator<'a, T> {
    pub fn new(model: &'a MlpModel<T>, manifold: &'a SteeringMatrix, mode: InferenceMode) -> Result<Self> {
        check(model, manifold)?;
        Ok(Self { model, manifold, mode })
    }
}

impl<T: Real> SpectrumEstimator for NetworkEstimator<'_, T> {
    fn name(&self) -> &str {
        "network"
    }

    fn grid_len(&self) -> usize {
        self.model.grid_len()
    }

    fn estimate(&self, y: &[Complex64]) -> Result<Vec<f64>> {
        infer_spectrum(self.model, self.manifold, y, self.mode)
    }

    fn estimate_batch(&self, ys: &[&[Complex64]]) -> Vec<Result<Vec<f64>>> {
        let l = self.model.grid_len();
        let mut prepared = Vec::with_capacity(ys.len());
        for y in ys {
            prepared.push(if y.len() == self.manifold.n_ch() {
                prepare(self.manifold, y, self.mode)
            } else {
                Err(Error::DimensionMismatch {
                    expected: self.manifold.n_ch(),
                    found: y.len(),
                })
            });
        }
        let live: Vec<usize> = prepared
            .iter()
            .enumerate()
            .filter(|(_, p)| matches!(p, Ok((_, s)) if *s != 0.0))
            .map(|(i, _)| i)
            .collect();
        let mut inputs = Vec::with_capacity(live.len() * self.model.input_len());
        for &i in &live {
            if let Ok((x, _)) = &prepared[i] {
                inputs.extend(x.iter().map(|v| T::from_f64(*v)));
            }
        }
        let outputs = match self.model.forward_batch(&inputs, live.len()) {
            Ok(o) => o,
            Err(e) => {
                let msg = e.to_string();
                return ys.iter().map(|_| Err(Error::Format(msg.clone()))).collect();
            }
        };
        let mut rows = outputs.chunks_exact(l.max(1));
        let mut live_iter = live.iter().peekable();
        prepared
            .into_iter()
            .enumerate()
            .map(|(i, p)| {
                let (_, scale) = p?;
                if live_iter.peek() == Some(&&i) {
                    live_iter.next();
                    let row = rows.next().expect("one output row per live input");
                    Ok(row
                        .iter()
                        .map(|v| (v.to_f64().unwrap() * scale).max(0.0))
                        .collect())
                } else {
                    Ok(vec![0.0; l])
                }
            })
            .collect()
    }
}
