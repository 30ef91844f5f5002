//! Reverse-mode gradients, ADAM updates and the training loop.
//!
//! The objective is the mean squared error over the batch, so the learning
//! rate does not have to scale with batch size. Training stops either at
//! `max_epochs` or when the full-training-set MSE fails to improve by more
//! than `stop_delta` over the most recent `stop_window` checks ("plateau").
//! Checks happen per epoch by default; `stop_granularity` can move them to
//! per-batch.

use crate::network::{clamp_unit_deriv, LayerOp, Network, NetworkError, ParamStore};
use crate::network::{ForwardTrace, LayerTrace};
use crate::basis::eval_basis_deriv;
use crate::rng::{rng_for, shuffled_indices, stream};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopGranularity {
    #[serde(rename = "epoch")]
    Epoch,
    #[serde(rename = "batch")]
    Batch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    #[serde(rename = "lr")]
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub stop_window: usize,
    pub stop_delta: f64,
    pub seed: u64,
    #[serde(default = "default_granularity")]
    pub stop_granularity: StopGranularity,
}

fn default_granularity() -> StopGranularity {
    StopGranularity::Epoch
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            batch_size: 512,
            max_epochs: 10_000,
            stop_window: 10,
            stop_delta: 1e-3,
            seed: 0,
            stop_granularity: StopGranularity::Epoch,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.learning_rate > 0.0) {
            return Err(TrainError::InvalidConfig("learning rate must be > 0".into()));
        }
        if self.stop_delta < 0.0 {
            return Err(TrainError::InvalidConfig("stop_delta must be >= 0".into()));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.stop_window == 0 {
            return Err(TrainError::InvalidConfig(
                "batch_size, max_epochs and stop_window must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("empty batch or training set")]
    Empty,
    #[error("prediction and target lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// Mean of squared residuals; empty inputs are rejected.
pub fn loss_mse(pred: &[f64], target: &[f64]) -> Result<f64, TrainError> {
    if pred.is_empty() {
        return Err(TrainError::Empty);
    }
    if pred.len() != target.len() {
        return Err(TrainError::LengthMismatch(pred.len(), target.len()));
    }
    let sum: f64 = pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(sum / pred.len() as f64)
}

/// ADAM first/second-moment state. Constants are the usual defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

impl AdamState {
    pub fn new(len: usize) -> AdamState {
        AdamState { m: vec![0.0; len], v: vec![0.0; len], t: 0 }
    }
}

/// One ADAM update with bias correction; increments the step counter.
pub fn adam_step(state: &mut AdamState, params: &mut ParamStore, grads: &[f64], lr: f64) {
    debug_assert_eq!(state.m.len(), params.values.len());
    debug_assert_eq!(grads.len(), params.values.len());
    state.t += 1;
    let bc1 = 1.0 - ADAM_BETA1.powi(state.t as i32);
    let bc2 = 1.0 - ADAM_BETA2.powi(state.t as i32);
    for i in 0..grads.len() {
        let g = grads[i];
        state.m[i] = ADAM_BETA1 * state.m[i] + (1.0 - ADAM_BETA1) * g;
        state.v[i] = ADAM_BETA2 * state.v[i] + (1.0 - ADAM_BETA2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params.values[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
    }
}

impl Network {
    /// Gradient of the batch-mean squared error with respect to every
    /// parameter. Samples are processed in batch order and accumulated
    /// sequentially, so the result is deterministic.
    pub fn backward(
        &self,
        params: &ParamStore,
        x: &[f64],
        y: &[f64],
    ) -> Result<Vec<f64>, TrainError> {
        if y.is_empty() {
            return Err(TrainError::Empty);
        }
        self.check_params(params)?;
        let d = self.spec().d;
        if x.len() != y.len() * d {
            return Err(TrainError::LengthMismatch(x.len(), y.len() * d));
        }
        let mut grads = vec![0.0; self.param_count()];
        let inv_n = 1.0 / y.len() as f64;
        for (i, &target) in y.iter().enumerate() {
            let (pred, trace) = self.forward_unchecked(params, &x[i * d..(i + 1) * d]);
            let upstream = 2.0 * (pred - target) * inv_n;
            self.backprop_sample(params, &trace, upstream, &mut grads);
        }
        Ok(grads)
    }

    /// Accumulates one sample's gradient contribution into `grads`,
    /// walking the retained trace from the output back to layer 0.
    fn backprop_sample(&self, params: &ParamStore, trace: &ForwardTrace, upstream: f64, grads: &mut [f64]) {
        let layout = self.layout();
        let values = &params.values;
        let basis_family = self.spec().basis;

        let last_post: &[f64] = trace
            .layers
            .last()
            .map(|l| l.post.as_slice())
            .unwrap_or(&trace.input);

        // Output combination: gradient of coefficients and of the last
        // hidden output.
        let out = &layout.output;
        let mut d_hidden: Vec<f64> = vec![0.0; out.in_width];
        grads[out.bias_off] += upstream;
        match out.op {
            LayerOp::Affine => {
                for k in 0..out.in_width {
                    grads[out.coeff_off + k] += upstream * last_post[k];
                    d_hidden[k] = upstream * values[out.coeff_off + k];
                }
            }
            LayerOp::Additive => {
                let basis = trace.out_basis.as_ref().expect("additive output trace");
                let clamped = trace.out_clamped.as_ref().expect("additive output trace");
                for k in 0..out.in_width {
                    let base = out.coeff_off + k * out.q;
                    let mut d_u = 0.0;
                    for r in 1..=out.q {
                        grads[base + r - 1] += upstream * basis[k * out.q + r - 1];
                        d_u += values[base + r - 1] * eval_basis_deriv(basis_family, r, clamped[k]);
                    }
                    d_hidden[k] = upstream * d_u * clamp_unit_deriv(last_post[k]);
                }
            }
        }

        // Hidden layers, last to first.
        for (l, seg) in layout.layers.iter().enumerate().rev() {
            let layer: &LayerTrace = &trace.layers[l];
            let below: &[f64] = if l == 0 {
                &trace.input
            } else {
                &trace.layers[l - 1].post
            };
            // dz_k = d_post_k * act'(z_k)
            let dz: Vec<f64> = layer
                .pre
                .iter()
                .zip(&d_hidden)
                .map(|(&z, &dp)| dp * seg.act.apply_deriv(z))
                .collect();

            let mut d_below = vec![0.0; seg.in_width];
            match seg.op {
                LayerOp::Affine => {
                    for (k, &dzk) in dz.iter().enumerate() {
                        grads[seg.bias_off + k] += dzk;
                        if dzk == 0.0 {
                            continue;
                        }
                        let row = seg.coeff_off + k * seg.in_width;
                        for j in 0..seg.in_width {
                            grads[row + j] += dzk * below[j];
                            d_below[j] += dzk * values[row + j];
                        }
                    }
                }
                LayerOp::Additive => {
                    let basis = layer.basis.as_ref().expect("additive layer trace");
                    let clamped = layer.clamped_in.as_ref().expect("additive layer trace");
                    let block = seg.in_width * seg.q;
                    // Upstream derivative through the clamped input is only
                    // needed above layer 0; the first layer's inputs are data.
                    let need_below = l > 0;
                    let mut basis_deriv = Vec::new();
                    if need_below {
                        basis_deriv = vec![0.0; block];
                        for (j, &u) in clamped.iter().enumerate() {
                            for r in 1..=seg.q {
                                basis_deriv[j * seg.q + r - 1] =
                                    eval_basis_deriv(basis_family, r, u);
                            }
                        }
                    }
                    for (k, &dzk) in dz.iter().enumerate() {
                        grads[seg.bias_off + k] += dzk;
                        if dzk == 0.0 {
                            continue;
                        }
                        let row = seg.coeff_off + k * block;
                        for idx in 0..block {
                            grads[row + idx] += dzk * basis[idx];
                        }
                        if need_below {
                            for j in 0..seg.in_width {
                                let mut acc = 0.0;
                                for r in 0..seg.q {
                                    acc += values[row + j * seg.q + r] * basis_deriv[j * seg.q + r];
                                }
                                d_below[j] += dzk * acc;
                            }
                        }
                    }
                    if need_below {
                        for (j, db) in d_below.iter_mut().enumerate() {
                            *db *= clamp_unit_deriv(below[j]);
                        }
                    }
                }
            }
            d_hidden = d_below;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    #[serde(rename = "plateau")]
    Plateau,
    #[serde(rename = "max_epochs")]
    MaxEpochs,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StopReason::Plateau => "plateau",
            StopReason::MaxEpochs => "max_epochs",
        })
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub stop_reason: StopReason,
    /// Full-training-set MSE after each epoch, standardized scale.
    pub epoch_mse: Vec<f64>,
    pub wall_seconds: f64,
}

/// Tracks the plateau rule: stop once `stop_window` consecutive checks fail
/// to improve on the best MSE seen at the window start by more than
/// `stop_delta`.
struct PlateauTracker {
    best: f64,
    streak: usize,
    window: usize,
    delta: f64,
}

impl PlateauTracker {
    fn new(initial_mse: f64, window: usize, delta: f64) -> Self {
        PlateauTracker { best: initial_mse, streak: 0, window, delta }
    }

    /// Returns true when training should stop.
    fn observe(&mut self, mse: f64) -> bool {
        if self.best - mse > self.delta {
            self.best = mse;
            self.streak = 0;
            false
        } else {
            self.streak += 1;
            self.streak >= self.window
        }
    }
}

/// Trains `params` in place on the given set (responses already
/// standardized, features in [0, 1]) and reports the per-epoch loss curve.
///
/// Epoch structure: seeded Fisher-Yates shuffle, mini-batches of
/// `batch_size` (a final short batch is allowed), one ADAM step per batch.
pub fn train(
    net: &Network,
    params: &mut ParamStore,
    x: &[f64],
    y: &[f64],
    config: &TrainConfig,
) -> Result<TrainReport, TrainError> {
    config.validate()?;
    if y.is_empty() {
        return Err(TrainError::Empty);
    }
    let started = std::time::Instant::now();
    let n = y.len();
    let d = net.spec().d;
    if x.len() != n * d {
        return Err(TrainError::LengthMismatch(x.len(), n * d));
    }

    let full_mse = |params: &ParamStore| -> Result<f64, TrainError> {
        let preds = net.predict_batch(params, x, n)?;
        loss_mse(&preds, y)
    };

    let mut adam = AdamState::new(net.param_count());
    let mut tracker = PlateauTracker::new(full_mse(params)?, config.stop_window, config.stop_delta);
    let mut epoch_mse = Vec::new();
    let mut stop_reason = StopReason::MaxEpochs;
    let mut epochs_run = 0;

    let mut batch_x = vec![0.0; config.batch_size.min(n) * d];
    let mut batch_y = vec![0.0; config.batch_size.min(n)];

    'epochs: for epoch in 0..config.max_epochs {
        let mut rng = rng_for(config.seed, &[stream::SHUFFLE, epoch as u64]);
        let order = shuffled_indices(n, &mut rng);

        for batch in order.chunks(config.batch_size) {
            for (slot, &i) in batch.iter().enumerate() {
                batch_x[slot * d..(slot + 1) * d].copy_from_slice(&x[i * d..(i + 1) * d]);
                batch_y[slot] = y[i];
            }
            let grads = net.backward(params, &batch_x[..batch.len() * d], &batch_y[..batch.len()])?;
            adam_step(&mut adam, params, &grads, config.learning_rate);

            if config.stop_granularity == StopGranularity::Batch {
                let mse = full_mse(params)?;
                if tracker.observe(mse) {
                    epochs_run = epoch + 1;
                    epoch_mse.push(mse);
                    stop_reason = StopReason::Plateau;
                    break 'epochs;
                }
            }
        }
        epochs_run = epoch + 1;
        let mse = full_mse(params)?;
        epoch_mse.push(mse);
        if config.stop_granularity == StopGranularity::Epoch && tracker.observe(mse) {
            stop_reason = StopReason::Plateau;
            break;
        }
    }

    Ok(TrainReport {
        epochs_run,
        stop_reason,
        epoch_mse,
        wall_seconds: started.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::ActivationKind;
    use crate::basis::BasisFamily;
    use crate::network::{NetworkKind, NetworkSpec, Slot};
    use crate::rng::rng_for;
    use rand::Rng;

    fn spec(kind: NetworkKind, d: usize, l: usize, p: usize, q: usize) -> NetworkSpec {
        NetworkSpec {
            kind,
            d,
            layers: l,
            width: p,
            basis_count: q,
            sigma: ActivationKind::Relu,
            g: ActivationKind::Logistic,
            basis: BasisFamily::Polynomial,
        }
    }

    #[test]
    fn loss_examples() {
        assert_eq!(loss_mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(loss_mse(&[1.0, 1.0], &[0.0, 2.0]).unwrap(), 1.0);
        assert_eq!(loss_mse(&[3.0], &[0.0]).unwrap(), 9.0);
        assert!(matches!(loss_mse(&[], &[]), Err(TrainError::Empty)));
    }

    #[test]
    fn zero_residual_means_zero_gradient() {
        // Zero params predict 0 everywhere; target 0 gives zero residual.
        let net = Network::new(spec(NetworkKind::Hdann1, 2, 2, 3, 2)).unwrap();
        let params = ParamStore::zeros(net.param_count());
        let x = [0.2, 0.4, 0.6, 0.8];
        let grads = net.backward(&params, &x, &[0.0, 0.0]).unwrap();
        assert!(grads.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn output_bias_gradient_hand_value() {
        // DNN(L=1, d=1, p=1, relu), hw=1, hb=0, ow=1, ob=0, sample
        // (x=0.5, y=0): pred = 0.5, d(loss)/d(output bias) = 2*0.5 = 1.
        let net = Network::new(spec(NetworkKind::Dnn, 1, 1, 1, 0)).unwrap();
        let layout = net.layout();
        let mut params = ParamStore::zeros(net.param_count());
        params.values
            [layout.offset(&Slot::HiddenWeight { layer: 0, node: 0, source: 0 }).unwrap()] = 1.0;
        params.values[layout.offset(&Slot::OutputWeight { node: 0 }).unwrap()] = 1.0;
        let grads = net.backward(&params, &[0.5], &[0.0]).unwrap();
        assert_eq!(grads[layout.offset(&Slot::OutputBias).unwrap()], 1.0);
    }

    /// Central finite-difference check across every architecture, basis and
    /// activation; this is the module's load-bearing invariant.
    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = rng_for(2024, &[0xbeef]);
        for kind in NetworkKind::ALL {
            for basis in [BasisFamily::Polynomial, BasisFamily::Cosine] {
                for sigma in [ActivationKind::Logistic, ActivationKind::Tanh, ActivationKind::Relu]
                {
                    let mut s = spec(kind, 3, 2, 4, 3);
                    s.sigma = sigma;
                    s.basis = basis;
                    let net = Network::new(s).unwrap();
                    let params = net.init_xavier(rng.gen());
                    let n = 8;
                    let x: Vec<f64> = (0..n * 3).map(|_| rng.gen::<f64>()).collect();
                    let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    let worst = max_fd_discrepancy(&net, &params, &x, &y, n);
                    assert!(
                        worst < 1e-4,
                        "{kind} {basis} {sigma}: max relative discrepancy {worst}"
                    );
                }
            }
        }
    }

    pub(crate) fn max_fd_discrepancy(
        net: &Network,
        params: &ParamStore,
        x: &[f64],
        y: &[f64],
        n: usize,
    ) -> f64 {
        let grads = net.backward(params, x, y).unwrap();
        let h = 1e-5;
        let mut worst = 0.0f64;
        for i in 0..grads.len() {
            if grads[i].abs() <= 1e-6 {
                continue;
            }
            let mut plus = params.clone();
            plus.values[i] += h;
            let mut minus = params.clone();
            minus.values[i] -= h;
            let lp = loss_mse(&net.predict_batch(&plus, x, n).unwrap(), y).unwrap();
            let lm = loss_mse(&net.predict_batch(&minus, x, n).unwrap(), y).unwrap();
            let fd = (lp - lm) / (2.0 * h);
            let rel = (fd - grads[i]).abs() / grads[i].abs().max(1e-8);
            worst = worst.max(rel);
        }
        worst
    }

    #[test]
    fn adam_zero_gradient_is_identity() {
        let mut params = ParamStore { values: vec![1.0, -2.0, 0.5] };
        let snapshot = params.clone();
        let mut state = AdamState::new(3);
        adam_step(&mut state, &mut params, &[0.0, 0.0, 0.0], 1e-4);
        assert_eq!(params, snapshot);
        assert_eq!(state.t, 1);
    }

    #[test]
    fn adam_first_step_magnitude() {
        // Fresh state, gradient g: step is lr * g / (|g| + eps) = ~lr.
        let mut params = ParamStore { values: vec![0.0] };
        let mut state = AdamState::new(1);
        adam_step(&mut state, &mut params, &[0.5], 1e-4);
        assert!((params.values[0] + 1e-4).abs() < 1e-10, "{}", params.values[0]);
    }

    #[test]
    fn adam_deterministic() {
        let grads = [0.1, -0.3, 0.7];
        let run = || {
            let mut params = ParamStore { values: vec![1.0, 2.0, 3.0] };
            let mut state = AdamState::new(3);
            for _ in 0..5 {
                adam_step(&mut state, &mut params, &grads, 1e-3);
            }
            (params, state)
        };
        let (p1, s1) = run();
        let (p2, s2) = run();
        assert_eq!(p1, p2);
        assert_eq!(s1, s2);
    }

    #[test]
    fn adam_step_size_bounded() {
        let mut rng = rng_for(55, &[0xaaaa]);
        let lr = 1e-3;
        let mut params = ParamStore { values: vec![0.0; 16] };
        let mut state = AdamState::new(16);
        for _ in 0..200 {
            let grads: Vec<f64> = (0..16).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let before = params.values.clone();
            adam_step(&mut state, &mut params, &grads, lr);
            for (b, a) in before.iter().zip(&params.values) {
                assert!((a - b).abs() <= 10.0 * lr + 1e-12);
            }
        }
    }

    #[test]
    fn plateau_on_constant_zero_loss() {
        // Zero target, zero init: loss is stuck at 0, so training stops
        // after exactly stop_window epochs.
        let net = Network::new(spec(NetworkKind::Dann, 2, 1, 2, 2)).unwrap();
        let mut params = ParamStore::zeros(net.param_count());
        let x: Vec<f64> = (0..40).map(|i| (i as f64) / 40.0).collect();
        let y = vec![0.0; 20];
        let config = TrainConfig { batch_size: 8, ..TrainConfig::default() };
        let report = train(&net, &mut params, &x, &y, &config).unwrap();
        assert_eq!(report.epochs_run, config.stop_window);
        assert_eq!(report.stop_reason, StopReason::Plateau);
        assert_eq!(report.epoch_mse.len(), report.epochs_run);
        assert!(params.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn max_epochs_stop() {
        let net = Network::new(spec(NetworkKind::Dnn, 2, 1, 2, 0)).unwrap();
        let mut params = net.init_xavier(3);
        let x = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
        let y = [1.0, 2.0, 3.0];
        let config = TrainConfig { max_epochs: 1, batch_size: 2, ..TrainConfig::default() };
        let report = train(&net, &mut params, &x, &y, &config).unwrap();
        assert_eq!(report.epochs_run, 1);
        assert_eq!(report.stop_reason, StopReason::MaxEpochs);
    }

    #[test]
    fn training_reduces_loss_and_is_reproducible() {
        let data = crate::data::gen_model1(200, 9).unwrap();
        let scaler = crate::data::ScalerY::fit(&data.y).unwrap();
        let y_st = scaler.apply_vec(&data.y);
        let s = spec(NetworkKind::Dann, 6, 1, 8, 3);
        let net = Network::new(s).unwrap();
        let config = TrainConfig {
            batch_size: 64,
            max_epochs: 60,
            seed: 4,
            ..TrainConfig::default()
        };
        let run = || {
            let mut params = net.init_xavier(12);
            let report = train(&net, &mut params, &data.x, &y_st, &config).unwrap();
            (params, report)
        };
        let (p1, r1) = run();
        let (p2, r2) = run();
        assert_eq!(p1, p2);
        assert_eq!(r1.epoch_mse, r2.epoch_mse);
        assert!(
            r1.epoch_mse.last().unwrap() <= r1.epoch_mse.first().unwrap(),
            "final {} vs first {}",
            r1.epoch_mse.last().unwrap(),
            r1.epoch_mse.first().unwrap()
        );
    }

    #[test]
    fn batch_granularity_stops() {
        let net = Network::new(spec(NetworkKind::Dnn, 1, 1, 1, 0)).unwrap();
        let mut params = ParamStore::zeros(net.param_count());
        let x = [0.5; 12];
        let y = [0.0; 12];
        let config = TrainConfig {
            batch_size: 4,
            stop_granularity: StopGranularity::Batch,
            ..TrainConfig::default()
        };
        let report = train(&net, &mut params, &x, &y, &config).unwrap();
        assert_eq!(report.stop_reason, StopReason::Plateau);
        // 10 batch-level checks at 3 batches per epoch stop inside epoch 4.
        assert_eq!(report.epochs_run, 4);
    }
}
