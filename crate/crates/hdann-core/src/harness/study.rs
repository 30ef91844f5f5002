//! Monte-Carlo and k-fold experiment drivers.

use super::{
    run_grid, select_best, select_small, GridSpec, HarnessError, PreparedSample, RunOptions,
    RunRecord,
};
use crate::data::{
    gen_model1, gen_model2, split_kfold, split_train_val, Dataset, ModelId, ScalerX, ScalerY,
};
use crate::network::{NetworkKind, NetworkSpec};
use crate::rng::{derive_seed, stream};
use crate::training::TrainConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SelectionTag {
    #[serde(rename = "best")]
    Best,
    #[serde(rename = "small")]
    Small,
}

impl std::fmt::Display for SelectionTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SelectionTag::Best => "best",
            SelectionTag::Small => "small",
        })
    }
}

/// Per-sample winner(s) for one network kind: the best-tuned cell and,
/// for proposed networks, the smallest cell beating the sample's
/// best-tuned DNN (absent when nothing qualifies).
#[derive(Debug, Clone)]
pub struct KindSelection {
    pub sample_id: usize,
    pub kind: NetworkKind,
    pub best: Option<RunRecord>,
    pub small: Option<RunRecord>,
}

/// One row of the averaged comparison table.
#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub kind: NetworkKind,
    pub selection: SelectionTag,
    pub avg_test_error: Option<f64>,
    pub avg_n_params: Option<f64>,
    /// Samples contributing to the averages.
    pub n_contributing: usize,
}

/// Scalers and index sets of one fold, kept for leakage checks.
#[derive(Debug, Clone)]
pub struct FoldDetail {
    pub fold: usize,
    pub test_idx: Vec<usize>,
    pub train_idx: Vec<usize>,
    pub val_idx: Vec<usize>,
    pub scaler_x: ScalerX,
    pub scaler_y: ScalerY,
}

#[derive(Debug, Clone, Default)]
pub struct StudyBundle {
    /// Every grid cell's record, ordered by sample then spec index.
    pub records: Vec<RunRecord>,
    pub selections: Vec<KindSelection>,
    pub summary: Vec<SummaryRow>,
    pub failed_records: usize,
    /// Populated by k-fold studies only.
    pub fold_details: Vec<FoldDetail>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SampleSizes {
    pub n_train: usize,
    #[serde(default = "default_holdout")]
    pub n_val: usize,
    #[serde(default = "default_holdout")]
    pub n_test: usize,
}

fn default_holdout() -> usize {
    500
}

fn expand_all(grids: &[GridSpec], d: usize) -> Result<Vec<NetworkSpec>, HarnessError> {
    if grids.is_empty() {
        return Err(HarnessError::Config("no grids given".into()));
    }
    let mut specs = Vec::new();
    for grid in grids {
        specs.extend(grid.expand(d)?);
    }
    Ok(specs)
}

/// Builds the per-sample selections and cross-sample averages from an
/// ordered record list. The small rule needs the sample's best-tuned DNN;
/// without one, small selections are absent for that sample.
pub fn summarize(records: &[RunRecord]) -> (Vec<KindSelection>, Vec<SummaryRow>) {
    let mut sample_ids: Vec<usize> = records.iter().map(|r| r.sample_id).collect();
    sample_ids.dedup();

    let mut selections = Vec::new();
    for &sid in &sample_ids {
        let sample_records: Vec<&RunRecord> =
            records.iter().filter(|r| r.sample_id == sid).collect();
        let of_kind = |kind: NetworkKind| -> Vec<RunRecord> {
            sample_records.iter().filter(|r| r.kind == kind).map(|r| (*r).clone()).collect()
        };
        let dnn_records = of_kind(NetworkKind::Dnn);
        let dnn_best = select_best(&dnn_records).cloned();
        let dnn_best_val = dnn_best.as_ref().map(|r| r.validation_error);
        for kind in NetworkKind::ALL {
            let kind_records = of_kind(kind);
            if kind_records.is_empty() {
                continue;
            }
            let best = select_best(&kind_records).cloned();
            let small = if kind == NetworkKind::Dnn {
                None
            } else {
                dnn_best_val.and_then(|v| select_small(&kind_records, v)).cloned()
            };
            selections.push(KindSelection { sample_id: sid, kind, best, small });
        }
    }

    let mut summary = Vec::new();
    for kind in NetworkKind::ALL {
        let rows: Vec<&KindSelection> = selections.iter().filter(|s| s.kind == kind).collect();
        if rows.is_empty() {
            continue;
        }
        let tags: &[SelectionTag] = if kind == NetworkKind::Dnn {
            &[SelectionTag::Best]
        } else {
            &[SelectionTag::Best, SelectionTag::Small]
        };
        for &tag in tags {
            let chosen: Vec<&RunRecord> = rows
                .iter()
                .filter_map(|s| match tag {
                    SelectionTag::Best => s.best.as_ref(),
                    SelectionTag::Small => s.small.as_ref(),
                })
                .collect();
            let n = chosen.len();
            let (avg_err, avg_params) = if n == 0 {
                (None, None)
            } else {
                (
                    Some(chosen.iter().map(|r| r.test_error).sum::<f64>() / n as f64),
                    Some(chosen.iter().map(|r| r.n_params as f64).sum::<f64>() / n as f64),
                )
            };
            summary.push(SummaryRow {
                kind,
                selection: tag,
                avg_test_error: avg_err,
                avg_n_params: avg_params,
                n_contributing: n,
            });
        }
    }
    (selections, summary)
}

fn finish_bundle(records: Vec<RunRecord>, fold_details: Vec<FoldDetail>) -> StudyBundle {
    let failed_records = records.iter().filter(|r| r.failed()).count();
    let (selections, summary) = summarize(&records);
    StudyBundle { records, selections, summary, failed_records, fold_details }
}

/// Rebuilds one Monte-Carlo sample's prepared data from the study seed.
pub fn prepare_simulation_sample(
    model: ModelId,
    sizes: SampleSizes,
    sample_id: usize,
    study_seed: u64,
) -> Result<PreparedSample, HarnessError> {
    let generate = match model {
        ModelId::One => gen_model1,
        ModelId::Two => gen_model2,
    };
    let data_seed = derive_seed(study_seed, &[stream::SAMPLE, sample_id as u64]);
    let train = generate(sizes.n_train, derive_seed(data_seed, &[0]))?;
    let val = generate(sizes.n_val, derive_seed(data_seed, &[1]))?;
    let test = generate(sizes.n_test, derive_seed(data_seed, &[2]))?;
    PreparedSample::assemble(sample_id, train, val, test)
}

/// Rebuilds one fold's prepared data from the stored fold detail.
pub fn prepare_kfold_sample(
    dataset: &Dataset,
    detail: &FoldDetail,
) -> Result<PreparedSample, HarnessError> {
    let train = detail.scaler_x.transform(&dataset.subset(&detail.train_idx));
    let val = detail.scaler_x.transform(&dataset.subset(&detail.val_idx));
    let test = detail.scaler_x.transform(&dataset.subset(&detail.test_idx));
    PreparedSample::assemble(detail.fold, train, val, test)
}

/// The spec a record was produced from, reconstructed for retraining.
pub fn spec_from_record(record: &RunRecord, d: usize) -> NetworkSpec {
    NetworkSpec {
        kind: record.kind,
        d,
        layers: record.l,
        width: record.p,
        basis_count: record.q,
        sigma: record.sigma,
        g: crate::activation::ActivationKind::Logistic,
        basis: record.basis.unwrap_or(crate::basis::BasisFamily::Polynomial),
    }
}

/// Re-runs one record's training with its recorded seed; because every run
/// derives all randomness from that seed, the result is the exact
/// parameter vector the grid run produced.
pub fn retrain_record(
    record: &RunRecord,
    sample: &PreparedSample,
    train_cfg: &TrainConfig,
) -> Result<(NetworkSpec, crate::network::ParamStore), HarnessError> {
    let spec = spec_from_record(record, sample.train.d);
    let net = crate::network::Network::new(spec)?;
    let mut params = net.init_xavier(record.seed);
    let cfg = TrainConfig { seed: record.seed, ..*train_cfg };
    crate::training::train(&net, &mut params, &sample.train.x, &sample.train.y, &cfg)?;
    Ok((spec, params))
}

/// Monte-Carlo simulation study: per sample, fresh train/validation/test
/// draws from the data model, training-set response standardization, a
/// full grid run and best/small selection; averages across samples.
pub fn run_simulation_study(
    model: ModelId,
    sizes: SampleSizes,
    n_monte_carlo: usize,
    grids: &[GridSpec],
    train_cfg: &TrainConfig,
    opts: &RunOptions,
) -> Result<StudyBundle, HarnessError> {
    if n_monte_carlo == 0 {
        return Err(HarnessError::Config("need at least one Monte-Carlo sample".into()));
    }
    let specs = expand_all(grids, 6)?;
    let mut records = Vec::with_capacity(n_monte_carlo * specs.len());
    for r in 0..n_monte_carlo {
        let sample = prepare_simulation_sample(model, sizes, r, opts.seed)?;
        records.extend(run_grid(&specs, &sample, train_cfg, opts)?);
    }
    Ok(finish_bundle(records, Vec::new()))
}

/// k-fold study on a fixed dataset: each fold is held out as the test set,
/// the rest splits 3:1 into train/validation, and feature/response scalers
/// are refit on the fold's training part only.
pub fn run_kfold_study(
    dataset: &Dataset,
    k: usize,
    grids: &[GridSpec],
    train_cfg: &TrainConfig,
    opts: &RunOptions,
) -> Result<StudyBundle, HarnessError> {
    if k < 2 || k > dataset.n {
        return Err(HarnessError::Config(format!(
            "k = {k} must lie in 2..=n (n = {})",
            dataset.n
        )));
    }
    let specs = expand_all(grids, dataset.d)?;
    let folds = split_kfold(dataset.n, k, derive_seed(opts.seed, &[stream::FOLDS]));

    let mut records = Vec::with_capacity(k * specs.len());
    let mut fold_details = Vec::with_capacity(k);
    for (r, test_idx) in folds.iter().enumerate() {
        let mut in_test = vec![false; dataset.n];
        for &i in test_idx {
            in_test[i] = true;
        }
        let rest: Vec<usize> = (0..dataset.n).filter(|&i| !in_test[i]).collect();
        let fold_seed = derive_seed(opts.seed, &[stream::SAMPLE, r as u64]);
        let (train_idx, val_idx) = split_train_val(&rest, fold_seed);

        let scaler_x = ScalerX::fit(&dataset.subset(&train_idx))?;
        let mut detail = FoldDetail {
            fold: r,
            test_idx: test_idx.clone(),
            train_idx,
            val_idx,
            scaler_x,
            scaler_y: ScalerY { mean: 0.0, sd: 1.0 },
        };
        let sample = prepare_kfold_sample(dataset, &detail)?;
        detail.scaler_y = sample.scaler_y;
        fold_details.push(detail);
        records.extend(run_grid(&specs, &sample, train_cfg, opts)?);
    }
    Ok(finish_bundle(records, fold_details))
}
