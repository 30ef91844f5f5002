//! Grid-search execution, best/small selection and experiment drivers.

mod presets;
mod report;
mod study;

pub use presets::{desk_grids, desk_train_config, paper_grids, paper_train_config};
pub use report::{emit_report, fmt_f64, parse_records, write_records_csv, ReportPaths};
pub use study::{
    prepare_kfold_sample, prepare_simulation_sample, retrain_record, run_kfold_study,
    run_simulation_study, spec_from_record, summarize, FoldDetail, KindSelection, SampleSizes,
    SelectionTag, StudyBundle, SummaryRow,
};

use crate::activation::ActivationKind;
use crate::basis::BasisFamily;
use crate::data::{DataError, Dataset, ScalerY};
use crate::network::{Network, NetworkError, NetworkKind, NetworkSpec};
use crate::rng::{derive_seed, stream};
use crate::training::{train, loss_mse, TrainConfig, TrainError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("report io: {0}")]
    Io(#[from] std::io::Error),
    #[error("report csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("records file {path}, row {row}: {reason}")]
    MalformedRecords { path: String, row: usize, reason: String },
}

/// Hyperparameter lists for one network kind. `q` and `basis` are ignored
/// for the DNN; `sigma` still enumerates for the DANN even though its
/// layers only use g, matching how the combination counts are defined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub kind: NetworkKind,
    #[serde(rename = "L")]
    pub l_values: Vec<usize>,
    #[serde(rename = "p")]
    pub p_values: Vec<usize>,
    #[serde(rename = "q", default)]
    pub q_values: Vec<usize>,
    #[serde(rename = "sigma", default = "default_sigma_list")]
    pub sigma_values: Vec<ActivationKind>,
    #[serde(rename = "basis", default)]
    pub basis_values: Vec<BasisFamily>,
}

fn default_sigma_list() -> Vec<ActivationKind> {
    vec![ActivationKind::Logistic]
}

impl GridSpec {
    /// Cartesian product in deterministic order (L, p, q, sigma, basis).
    pub fn expand(&self, d: usize) -> Result<Vec<NetworkSpec>, HarnessError> {
        if self.l_values.is_empty() || self.p_values.is_empty() || self.sigma_values.is_empty() {
            return Err(HarnessError::Config(format!(
                "grid for {} has an empty L, p or sigma list",
                self.kind
            )));
        }
        let uses_basis = self.kind.uses_basis();
        if uses_basis && (self.q_values.is_empty() || self.basis_values.is_empty()) {
            return Err(HarnessError::Config(format!(
                "grid for {} needs non-empty q and basis lists",
                self.kind
            )));
        }
        let qs: &[usize] = if uses_basis { &self.q_values } else { &[0] };
        let bases: &[BasisFamily] =
            if uses_basis { &self.basis_values } else { &[BasisFamily::Polynomial] };

        let mut specs = Vec::new();
        for &l in &self.l_values {
            for &p in &self.p_values {
                for &q in qs {
                    for &sigma in &self.sigma_values {
                        for &basis in bases {
                            let spec = NetworkSpec {
                                kind: self.kind,
                                d,
                                layers: l,
                                width: p,
                                basis_count: q,
                                sigma,
                                g: ActivationKind::Logistic,
                                basis,
                            };
                            spec.validate()?;
                            specs.push(spec);
                        }
                    }
                }
            }
        }
        Ok(specs)
    }
}

/// One grid cell's result. A failed run (diverged or errored training)
/// carries NaN errors and is skipped by the selectors.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub kind: NetworkKind,
    pub l: usize,
    pub p: usize,
    pub q: usize,
    pub sigma: ActivationKind,
    /// None for the DNN (no basis expansion anywhere).
    pub basis: Option<BasisFamily>,
    pub validation_error: f64,
    pub test_error: f64,
    pub training_time_sec: f64,
    pub n_params: usize,
    pub seed: u64,
    pub sample_id: usize,
}

impl RunRecord {
    pub fn failed(&self) -> bool {
        !self.validation_error.is_finite() || !self.test_error.is_finite()
    }

    fn from_spec(spec: &NetworkSpec, seed: u64, sample_id: usize) -> RunRecord {
        RunRecord {
            kind: spec.kind,
            l: spec.layers,
            p: spec.width,
            q: spec.basis_count,
            sigma: spec.sigma,
            basis: spec.kind.uses_basis().then_some(spec.basis),
            validation_error: f64::NAN,
            test_error: f64::NAN,
            training_time_sec: 0.0,
            n_params: crate::network::param_count(spec),
            seed,
            sample_id,
        }
    }
}

/// How `training_time_sec` is recorded. Wall-clock times vary between
/// invocations; `Zero` keeps report files byte-reproducible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Timing {
    #[serde(rename = "wall")]
    #[default]
    Wall,
    #[serde(rename = "zero")]
    Zero,
}

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub seed: u64,
    pub threads: usize,
    pub timing: Timing,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { seed: 0, threads: 1, timing: Timing::Wall }
    }
}

/// One Monte-Carlo sample or fold, ready to train on: features scaled,
/// training responses standardized, validation/test responses kept in the
/// original scale.
#[derive(Debug, Clone)]
pub struct PreparedSample {
    pub sample_id: usize,
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
    pub scaler_y: ScalerY,
}

impl PreparedSample {
    /// Standardizes the training response and bundles the parts.
    pub fn assemble(
        sample_id: usize,
        train: Dataset,
        val: Dataset,
        test: Dataset,
    ) -> Result<PreparedSample, HarnessError> {
        let scaler_y = ScalerY::fit(&train.y)?;
        let mut train = train;
        train.y = scaler_y.apply_vec(&train.y);
        Ok(PreparedSample { sample_id, train, val, test, scaler_y })
    }
}

fn run_one(
    spec: &NetworkSpec,
    index: usize,
    sample: &PreparedSample,
    train_cfg: &TrainConfig,
    opts: &RunOptions,
) -> RunRecord {
    let run_seed = derive_seed(opts.seed, &[stream::RUN, sample.sample_id as u64, index as u64]);
    let mut record = RunRecord::from_spec(spec, run_seed, sample.sample_id);
    let net = match Network::new(*spec) {
        Ok(net) => net,
        Err(_) => return record,
    };
    let started = std::time::Instant::now();
    let mut params = net.init_xavier(run_seed);
    let cfg = TrainConfig { seed: run_seed, ..*train_cfg };
    if train(&net, &mut params, &sample.train.x, &sample.train.y, &cfg).is_err() {
        return record;
    }
    let elapsed = started.elapsed().as_secs_f64();

    let original_scale_mse = |ds: &Dataset| -> Option<f64> {
        let preds = net.predict_batch(&params, &ds.x, ds.n).ok()?;
        loss_mse(&sample.scaler_y.invert_vec(&preds), &ds.y).ok()
    };
    record.validation_error = original_scale_mse(&sample.val).unwrap_or(f64::NAN);
    record.test_error = original_scale_mse(&sample.test).unwrap_or(f64::NAN);
    record.training_time_sec = match opts.timing {
        Timing::Wall => elapsed,
        Timing::Zero => 0.0,
    };
    record
}

/// Trains every spec on the sample and reports one record per spec, in
/// spec order regardless of the execution schedule. Each run's RNG streams
/// derive from (seed, sample id, spec index), so parallel and serial
/// execution produce identical records.
pub fn run_grid(
    specs: &[NetworkSpec],
    sample: &PreparedSample,
    train_cfg: &TrainConfig,
    opts: &RunOptions,
) -> Result<Vec<RunRecord>, HarnessError> {
    train_cfg.validate()?;
    if opts.threads <= 1 {
        return Ok(specs
            .iter()
            .enumerate()
            .map(|(i, spec)| run_one(spec, i, sample, train_cfg, opts))
            .collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads)
        .build()
        .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;
    use rayon::prelude::*;
    Ok(pool.install(|| {
        specs
            .par_iter()
            .enumerate()
            .map(|(i, spec)| run_one(spec, i, sample, train_cfg, opts))
            .collect()
    }))
}

/// Lowest validation error; ties prefer fewer parameters, then earlier
/// spec order. Failed records never win.
pub fn select_best(records: &[RunRecord]) -> Option<&RunRecord> {
    records
        .iter()
        .filter(|r| !r.failed())
        .min_by(|a, b| {
            a.validation_error
                .total_cmp(&b.validation_error)
                .then(a.n_params.cmp(&b.n_params))
        })
}

/// Fewest parameters among records strictly beating the reference DNN
/// validation error; ties prefer lower validation error, then spec order.
/// None when nothing qualifies (the "NA" row).
pub fn select_small(records: &[RunRecord], dnn_best_val: f64) -> Option<&RunRecord> {
    records
        .iter()
        .filter(|r| !r.failed() && r.validation_error < dnn_best_val)
        .min_by(|a, b| {
            a.n_params
                .cmp(&b.n_params)
                .then(a.validation_error.total_cmp(&b.validation_error))
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_dnn_grid() -> GridSpec {
        GridSpec {
            kind: NetworkKind::Dnn,
            l_values: (1..=9).map(|t| 2 * t).collect(),
            p_values: vec![8, 32, 128, 512, 2048],
            q_values: vec![],
            sigma_values: vec![ActivationKind::Logistic, ActivationKind::Relu, ActivationKind::Tanh],
            basis_values: vec![],
        }
    }

    fn paper_proposed_grid(kind: NetworkKind) -> GridSpec {
        GridSpec {
            kind,
            l_values: vec![1, 3, 5, 7, 9],
            p_values: vec![4, 16, 64, 256, 1024],
            q_values: vec![3, 5, 7, 9, 11],
            sigma_values: vec![ActivationKind::Logistic, ActivationKind::Relu, ActivationKind::Tanh],
            basis_values: vec![BasisFamily::Polynomial, BasisFamily::Cosine],
        }
    }

    #[test]
    fn paper_grid_cardinalities() {
        assert_eq!(paper_dnn_grid().expand(6).unwrap().len(), 135);
        for kind in NetworkKind::PROPOSED {
            assert_eq!(paper_proposed_grid(kind).expand(6).unwrap().len(), 750, "{kind}");
        }
    }

    #[test]
    fn singleton_grid() {
        let grid = GridSpec {
            kind: NetworkKind::Hdann1,
            l_values: vec![3],
            p_values: vec![16],
            q_values: vec![5],
            sigma_values: vec![ActivationKind::Relu],
            basis_values: vec![BasisFamily::Polynomial],
        };
        let specs = grid.expand(6).unwrap();
        assert_eq!(specs.len(), 1);
        assert_eq!(specs[0].layers, 3);
        assert_eq!(specs[0].g, ActivationKind::Logistic);
    }

    #[test]
    fn expansion_cardinality_is_product_of_lengths() {
        let grid = paper_proposed_grid(NetworkKind::Dann);
        let expect = grid.l_values.len()
            * grid.p_values.len()
            * grid.q_values.len()
            * grid.sigma_values.len()
            * grid.basis_values.len();
        assert_eq!(grid.expand(4).unwrap().len(), expect);
    }

    #[test]
    fn empty_lists_rejected() {
        let mut grid = paper_proposed_grid(NetworkKind::Dann);
        grid.q_values.clear();
        assert!(matches!(grid.expand(6), Err(HarnessError::Config(_))));
        let mut grid = paper_dnn_grid();
        grid.l_values.clear();
        assert!(matches!(grid.expand(6), Err(HarnessError::Config(_))));
    }

    fn record(val: f64, params: usize) -> RunRecord {
        RunRecord {
            kind: NetworkKind::Hdann1,
            l: 1,
            p: 4,
            q: 3,
            sigma: ActivationKind::Relu,
            basis: Some(BasisFamily::Polynomial),
            validation_error: val,
            test_error: val,
            training_time_sec: 0.0,
            n_params: params,
            seed: 0,
            sample_id: 0,
        }
    }

    #[test]
    fn select_best_rules() {
        let single = [record(0.5, 100)];
        assert_eq!(select_best(&single).unwrap().n_params, 100);
        let two = [record(0.5, 100), record(0.4, 200)];
        assert_eq!(select_best(&two).unwrap().n_params, 200);
        let tie = [record(0.4, 100), record(0.4, 50)];
        assert_eq!(select_best(&tie).unwrap().n_params, 50);
        let with_failed = [record(f64::NAN, 1), record(0.9, 70)];
        assert_eq!(select_best(&with_failed).unwrap().n_params, 70);
        assert!(select_best(&[record(f64::NAN, 1)]).is_none());
    }

    #[test]
    fn select_small_rules() {
        let records = [record(0.3, 100), record(0.2, 500)];
        assert_eq!(select_small(&records, 0.4).unwrap().n_params, 100);
        // Nothing beats the DNN: the NA case.
        assert!(select_small(&records, 0.1).is_none());
        assert!(select_small(&records, 0.2).is_none());
        // Qualifying tie on parameters: lower validation error wins.
        let tie = [record(0.35, 100), record(0.25, 100)];
        assert_eq!(select_small(&tie, 0.4).unwrap().validation_error, 0.25);
        // Bounds used by the harness invariants.
        assert_eq!(select_small(&records, f64::INFINITY).unwrap().n_params, 100);
        assert!(select_small(&records, f64::NEG_INFINITY).is_none());
    }
}
