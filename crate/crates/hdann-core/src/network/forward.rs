//! Forward evaluation with per-layer trace retention for backprop.

use super::{LayerOp, Network, NetworkError, ParamStore};
use crate::basis::eval_basis_vector;

/// Clamp into [0, 1] ahead of a basis expansion. Min-max scaling fitted on
/// a training fold can push held-out features slightly outside the unit
/// interval; basis functions are only defined on it.
#[inline]
pub(crate) fn clamp_unit(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Derivative of [`clamp_unit`]: 1 inside the interval, 0 outside.
#[inline]
pub(crate) fn clamp_unit_deriv(x: f64) -> f64 {
    if (0.0..=1.0).contains(&x) {
        1.0
    } else {
        0.0
    }
}

/// Retained values for one hidden layer.
#[derive(Debug, Clone)]
pub struct LayerTrace {
    /// Pre-activation z.
    pub pre: Vec<f64>,
    /// Post-activation output.
    pub post: Vec<f64>,
    /// Clamped input (additive layers only).
    pub clamped_in: Option<Vec<f64>>,
    /// Basis values of the clamped input, `[source * q + (r - 1)]`
    /// (additive layers only).
    pub basis: Option<Vec<f64>>,
}

/// Retained values for one sample's forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub input: Vec<f64>,
    pub layers: Vec<LayerTrace>,
    /// Clamped last-hidden output (additive output only).
    pub out_clamped: Option<Vec<f64>>,
    /// Basis values at the output expansion (additive output only).
    pub out_basis: Option<Vec<f64>>,
    pub y: f64,
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

impl Network {
    /// Scalar prediction plus the retained per-layer values.
    pub fn forward(&self, params: &ParamStore, x: &[f64]) -> Result<(f64, ForwardTrace), NetworkError> {
        self.check_params(params)?;
        if x.len() != self.spec.d {
            return Err(NetworkError::DimensionMismatch { expected: self.spec.d, got: x.len() });
        }
        Ok(self.forward_unchecked(params, x))
    }

    pub(crate) fn forward_unchecked(&self, params: &ParamStore, x: &[f64]) -> (f64, ForwardTrace) {
        let values = &params.values;
        let mut layers = Vec::with_capacity(self.layout.layers.len());
        let mut current: &[f64] = x;

        for seg in &self.layout.layers {
            let mut pre = vec![0.0; seg.out_width];
            let trace = match seg.op {
                LayerOp::Affine => {
                    for (k, z) in pre.iter_mut().enumerate() {
                        let row = &values[seg.coeff_off + k * seg.in_width
                            ..seg.coeff_off + (k + 1) * seg.in_width];
                        *z = values[seg.bias_off + k] + dot(row, current);
                    }
                    let post: Vec<f64> = pre.iter().map(|&z| seg.act.apply(z)).collect();
                    LayerTrace { pre, post, clamped_in: None, basis: None }
                }
                LayerOp::Additive => {
                    let clamped: Vec<f64> = current.iter().map(|&v| clamp_unit(v)).collect();
                    let mut basis = vec![0.0; seg.in_width * seg.q];
                    for (j, &u) in clamped.iter().enumerate() {
                        eval_basis_vector(self.spec.basis, u, &mut basis[j * seg.q..(j + 1) * seg.q]);
                    }
                    let block = seg.in_width * seg.q;
                    for (k, z) in pre.iter_mut().enumerate() {
                        let row = &values[seg.coeff_off + k * block..seg.coeff_off + (k + 1) * block];
                        *z = values[seg.bias_off + k] + dot(row, &basis);
                    }
                    let post: Vec<f64> = pre.iter().map(|&z| seg.act.apply(z)).collect();
                    LayerTrace { pre, post, clamped_in: Some(clamped), basis: Some(basis) }
                }
            };
            layers.push(trace);
            current = &layers.last().unwrap().post;
        }

        let out = &self.layout.output;
        let (y, out_clamped, out_basis) = match out.op {
            LayerOp::Affine => {
                let w = &values[out.coeff_off..out.coeff_off + out.in_width];
                (values[out.bias_off] + dot(w, current), None, None)
            }
            LayerOp::Additive => {
                let clamped: Vec<f64> = current.iter().map(|&v| clamp_unit(v)).collect();
                let mut basis = vec![0.0; out.in_width * out.q];
                for (k, &u) in clamped.iter().enumerate() {
                    eval_basis_vector(self.spec.basis, u, &mut basis[k * out.q..(k + 1) * out.q]);
                }
                let coeffs = &values[out.coeff_off..out.coeff_off + out.coeff_len()];
                (values[out.bias_off] + dot(coeffs, &basis), Some(clamped), Some(basis))
            }
        };

        let y_final = y;
        (
            y_final,
            ForwardTrace { input: x.to_vec(), layers, out_clamped, out_basis, y: y_final },
        )
    }

    /// Row-wise forward over an `n x d` row-major matrix; identical to `n`
    /// independent [`Network::forward`] calls.
    pub fn forward_batch(
        &self,
        params: &ParamStore,
        x: &[f64],
        n: usize,
    ) -> Result<(Vec<f64>, Vec<ForwardTrace>), NetworkError> {
        self.check_params(params)?;
        self.check_batch(x, n)?;
        let d = self.spec.d;
        let mut preds = Vec::with_capacity(n);
        let mut traces = Vec::with_capacity(n);
        for i in 0..n {
            let (y, trace) = self.forward_unchecked(params, &x[i * d..(i + 1) * d]);
            preds.push(y);
            traces.push(trace);
        }
        Ok((preds, traces))
    }

    /// Predictions only; no traces are retained.
    pub fn predict_batch(
        &self,
        params: &ParamStore,
        x: &[f64],
        n: usize,
    ) -> Result<Vec<f64>, NetworkError> {
        self.check_params(params)?;
        self.check_batch(x, n)?;
        let d = self.spec.d;
        Ok((0..n)
            .map(|i| self.forward_unchecked(params, &x[i * d..(i + 1) * d]).0)
            .collect())
    }

    fn check_batch(&self, x: &[f64], n: usize) -> Result<(), NetworkError> {
        if x.len() != n * self.spec.d {
            return Err(NetworkError::DimensionMismatch {
                expected: n * self.spec.d,
                got: x.len(),
            });
        }
        Ok(())
    }
}
