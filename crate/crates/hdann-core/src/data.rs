//! Synthetic data models, scalers, splits and CSV ingestion.

use crate::rng::{rng_for, shuffled_indices, stream, NormalSource};
use rand::Rng;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("dataset io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}, column {column:?}: cannot parse {value:?} as a number")]
    Parse { row: usize, column: String, value: String },
    #[error("response column {0:?} not found in header")]
    MissingColumn(String),
    #[error("row {row}, column {column:?}: value is not finite")]
    NonFinite { row: usize, column: String },
    #[error("row {row}: response {value} must be positive under a log transform")]
    NonPositiveResponse { row: usize, value: f64 },
    #[error("dataset has no rows")]
    EmptyDataset,
    #[error("feature {column:?} is constant on the training fold")]
    ConstantFeature { column: String },
    #[error("response is constant; cannot standardize")]
    ConstantResponse,
    #[error("unknown data model {0:?}; expected 1 or 2")]
    UnknownModel(String),
}

/// Feature matrix (row-major) plus response vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub n: usize,
    pub d: usize,
    pub feature_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(x: Vec<f64>, y: Vec<f64>, d: usize) -> Result<Dataset, DataError> {
        let n = y.len();
        if n == 0 {
            return Err(DataError::EmptyDataset);
        }
        assert_eq!(x.len(), n * d, "feature matrix shape mismatch");
        Ok(Dataset { x, y, n, d, feature_names: None })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    /// Rows at the given indices, in the given order.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        let mut x = Vec::with_capacity(idx.len() * self.d);
        let mut y = Vec::with_capacity(idx.len());
        for &i in idx {
            x.extend_from_slice(self.row(i));
            y.push(self.y[i]);
        }
        Dataset { x, y, n: idx.len(), d: self.d, feature_names: self.feature_names.clone() }
    }

    fn feature_name(&self, j: usize) -> String {
        self.feature_names
            .as_ref()
            .map(|names| names[j].clone())
            .unwrap_or_else(|| format!("x{}", j + 1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelId {
    One,
    Two,
}

impl std::str::FromStr for ModelId {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, DataError> {
        match s {
            "1" => Ok(ModelId::One),
            "2" => Ok(ModelId::Two),
            _ => Err(DataError::UnknownModel(s.to_string())),
        }
    }
}

/// Noiseless regression function for one row of either model.
pub fn mean_function(model: ModelId, row: &[f64]) -> f64 {
    match model {
        ModelId::One => {
            let cube = |v: f64| v * v * v;
            (cube(row[0]) + cube(row[1]) + cube(row[2]) - cube(row[3]) - cube(row[4]) - cube(row[5]))
                .exp()
        }
        ModelId::Two => {
            let inner = 1.0 + row[0] + 2.0 * row[1] * row[1] + 3.0 * row[2] * row[2] * row[2]
                - row[3].exp()
                - (row[4] + 1.0).ln()
                - (row[5] - 0.5).abs();
            inner * inner
        }
    }
}

/// Noiseless mean values for every row of a feature matrix.
pub fn gen_mean_only(model: ModelId, x: &[f64], n: usize) -> Vec<f64> {
    (0..n).map(|i| mean_function(model, &x[i * 6..(i + 1) * 6])).collect()
}

const NOISE_SD: f64 = 0.1;

fn gen_model(model: ModelId, n: usize, seed: u64) -> Result<Dataset, DataError> {
    if n == 0 {
        return Err(DataError::EmptyDataset);
    }
    let d = 6;
    let mut feat_rng = rng_for(seed, &[stream::FEATURES]);
    let mut x = Vec::with_capacity(n * d);
    for _ in 0..n * d {
        x.push(feat_rng.gen::<f64>());
    }
    let mut noise = NormalSource::new(rng_for(seed, &[stream::NOISE]));
    let y: Vec<f64> = (0..n)
        .map(|i| mean_function(model, &x[i * d..(i + 1) * d]) + NOISE_SD * noise.next_standard())
        .collect();
    Dataset::new(x, y, d)
}

/// Model 1: Y = exp(x1^3 + x2^3 + x3^3 - x4^3 - x5^3 - x6^3) + N(0, 0.1^2),
/// features iid U(0, 1).
pub fn gen_model1(n: usize, seed: u64) -> Result<Dataset, DataError> {
    gen_model(ModelId::One, n, seed)
}

/// Model 2: Y = (1 + x1 + 2 x2^2 + 3 x3^3 - exp(x4) - ln(x5 + 1)
/// - |x6 - 0.5|)^2 + N(0, 0.1^2), features iid U(0, 1).
pub fn gen_model2(n: usize, seed: u64) -> Result<Dataset, DataError> {
    gen_model(ModelId::Two, n, seed)
}

/// Response standardization fitted on a training set.
/// Uses the sample (n-1) standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalerY {
    pub mean: f64,
    pub sd: f64,
}

impl ScalerY {
    pub fn fit(y: &[f64]) -> Result<ScalerY, DataError> {
        if y.is_empty() {
            return Err(DataError::EmptyDataset);
        }
        let n = y.len() as f64;
        let mean = y.iter().sum::<f64>() / n;
        let ss: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
        let sd = (ss / (n - 1.0)).sqrt();
        if !(sd > 0.0) {
            return Err(DataError::ConstantResponse);
        }
        Ok(ScalerY { mean, sd })
    }

    pub fn apply(&self, v: f64) -> f64 {
        (v - self.mean) / self.sd
    }

    pub fn invert(&self, v: f64) -> f64 {
        v * self.sd + self.mean
    }

    pub fn apply_vec(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|&v| self.apply(v)).collect()
    }

    pub fn invert_vec(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|&v| self.invert(v)).collect()
    }
}

/// Per-feature min-max scaling fitted on a training fold. Out-of-fold rows
/// may map outside [0, 1]; the network clamps ahead of basis expansions.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalerX {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl ScalerX {
    pub fn fit(train: &Dataset) -> Result<ScalerX, DataError> {
        let mut mins = vec![f64::INFINITY; train.d];
        let mut maxs = vec![f64::NEG_INFINITY; train.d];
        for i in 0..train.n {
            for (j, &v) in train.row(i).iter().enumerate() {
                mins[j] = mins[j].min(v);
                maxs[j] = maxs[j].max(v);
            }
        }
        for j in 0..train.d {
            if !(maxs[j] > mins[j]) {
                return Err(DataError::ConstantFeature { column: train.feature_name(j) });
            }
        }
        Ok(ScalerX { mins, maxs })
    }

    pub fn transform_value(&self, j: usize, v: f64) -> f64 {
        (v - self.mins[j]) / (self.maxs[j] - self.mins[j])
    }

    pub fn transform(&self, ds: &Dataset) -> Dataset {
        let mut out = ds.clone();
        for i in 0..out.n {
            for j in 0..out.d {
                out.x[i * out.d + j] = self.transform_value(j, ds.x[i * ds.d + j]);
            }
        }
        out
    }
}

/// Random partition of `0..n` into k folds whose sizes differ by at most 1.
pub fn split_kfold(n: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    assert!(k >= 1 && k <= n, "need 1 <= k <= n");
    let mut rng = rng_for(seed, &[stream::FOLDS]);
    let order = shuffled_indices(n, &mut rng);
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut cursor = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        folds.push(order[cursor..cursor + size].to_vec());
        cursor += size;
    }
    folds
}

/// Random 3:1 split of the given indices; the train side gets
/// round(0.75 n) elements with ties toward train.
pub fn split_train_val(indices: &[usize], seed: u64) -> (Vec<usize>, Vec<usize>) {
    let n = indices.len();
    let train_n = (3 * n + 2) / 4;
    let mut rng = rng_for(seed, &[stream::TRAIN_VAL]);
    let order = shuffled_indices(n, &mut rng);
    let mut train: Vec<usize> = order[..train_n].iter().map(|&i| indices[i]).collect();
    let mut val: Vec<usize> = order[train_n..].iter().map(|&i| indices[i]).collect();
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

/// Loads a numeric CSV with a header row. The response column is moved to
/// `y`; remaining columns become features in header order. With
/// `log_response`, y is the natural log of the raw response and nonpositive
/// responses are rejected.
pub fn load_csv(
    path: &Path,
    response_column: &str,
    log_response: bool,
) -> Result<Dataset, DataError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let resp_idx = headers
        .iter()
        .position(|h| h == response_column)
        .ok_or_else(|| DataError::MissingColumn(response_column.to_string()))?;
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != resp_idx)
        .map(|(_, h)| h.clone())
        .collect();

    let mut x = Vec::new();
    let mut y = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        // 1-based data row numbers in errors; header is row 0.
        let row = row_idx + 1;
        for (j, field) in record.iter().enumerate() {
            let value: f64 = field.trim().parse().map_err(|_| DataError::Parse {
                row,
                column: headers[j].clone(),
                value: field.to_string(),
            })?;
            if !value.is_finite() {
                return Err(DataError::NonFinite { row, column: headers[j].clone() });
            }
            if j == resp_idx {
                if log_response {
                    if value <= 0.0 {
                        return Err(DataError::NonPositiveResponse { row, value });
                    }
                    y.push(value.ln());
                } else {
                    y.push(value);
                }
            } else {
                x.push(value);
            }
        }
    }
    let d = feature_names.len();
    let mut ds = Dataset::new(x, y, d)?;
    ds.feature_names = Some(feature_names);
    Ok(ds)
}

/// Writes a dataset in the same CSV shape `load_csv` reads: header of
/// feature names then the response name, floats with 17 significant digits.
pub fn write_csv(path: &Path, ds: &Dataset, response_name: &str) -> Result<(), DataError> {
    let mut writer = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (0..ds.d).map(|j| ds.feature_name(j)).collect();
    header.push(response_name.to_string());
    writer.write_record(&header)?;
    for i in 0..ds.n {
        let mut record: Vec<String> =
            ds.row(i).iter().map(|&v| crate::harness::fmt_f64(v)).collect();
        record.push(crate::harness::fmt_f64(ds.y[i]));
        writer.write_record(&record)?;
    }
    writer.flush().map_err(DataError::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn mean_function_model1_examples() {
        assert_eq!(mean_function(ModelId::One, &[0.0; 6]), 1.0);
        assert_eq!(mean_function(ModelId::One, &[1.0; 6]), 1.0);
        assert_relative_eq!(
            mean_function(ModelId::One, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
            std::f64::consts::E,
            max_relative = 1e-12
        );
    }

    #[test]
    fn mean_function_model2_examples() {
        assert_relative_eq!(mean_function(ModelId::Two, &[0.0; 6]), 0.25, max_relative = 1e-12);
        assert_relative_eq!(
            mean_function(ModelId::Two, &[0.0, 0.0, 0.0, 0.0, 0.0, 0.5]),
            0.0,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            mean_function(ModelId::Two, &[1.0, 1.0, 1.0, 0.0, 0.0, 0.5]),
            36.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn generators_are_deterministic_per_seed() {
        let a = gen_model1(50, 7).unwrap();
        let b = gen_model1(50, 7).unwrap();
        let c = gen_model1(50, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.x.iter().all(|&v| (0.0..1.0).contains(&v)));
    }

    #[test]
    fn noise_statistics() {
        let n = 100_000;
        let cases: [(ModelId, fn(usize, u64) -> Result<Dataset, DataError>); 2] =
            [(ModelId::One, gen_model1), (ModelId::Two, gen_model2)];
        for (model, gen) in cases {
            let ds = gen(n, 123).unwrap();
            let means = gen_mean_only(model, &ds.x, ds.n);
            let resid: Vec<f64> = ds.y.iter().zip(&means).map(|(y, m)| y - m).collect();
            let mean = resid.iter().sum::<f64>() / n as f64;
            let var = resid.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (n - 1) as f64;
            assert!(mean.abs() < 0.002, "{model:?}: residual mean {mean}");
            assert!((var - 0.01).abs() < 0.001, "{model:?}: residual var {var}");
        }
    }

    #[test]
    fn scaler_y_examples() {
        // Sample (n-1) standard deviation: for [0, 2] that is sqrt(2).
        let s = ScalerY::fit(&[0.0, 2.0]).unwrap();
        assert_eq!(s.mean, 1.0);
        assert_eq!(s.sd, std::f64::consts::SQRT_2);
        let st = s.apply_vec(&[0.0, 2.0]);
        assert!((st[0] + 1.0 / std::f64::consts::SQRT_2).abs() < 1e-15);
        assert!((st[1] - 1.0 / std::f64::consts::SQRT_2).abs() < 1e-15);
        let y = [3.1, -0.4, 12.9, 5.5];
        let s = ScalerY::fit(&y).unwrap();
        let st = s.apply_vec(&y);
        let mean = st.iter().sum::<f64>() / st.len() as f64;
        let sd = (st.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 3.0).sqrt();
        assert!(mean.abs() < 1e-10);
        assert!((sd - 1.0).abs() < 1e-10);
        for (orig, round) in y.iter().zip(s.invert_vec(&st)) {
            assert!((orig - round).abs() < 1e-12);
        }
        assert!(matches!(ScalerY::fit(&[5.0, 5.0, 5.0]), Err(DataError::ConstantResponse)));
    }

    #[test]
    fn scaler_x_examples() {
        let train = Dataset::new(vec![2.0, 4.0], vec![0.0, 0.0], 1).unwrap();
        let s = ScalerX::fit(&train).unwrap();
        assert_eq!(s.transform_value(0, 3.0), 0.5);
        assert_eq!(s.transform_value(0, 5.0), 1.5);
        let constant = Dataset::new(vec![2.0, 2.0], vec![0.0, 0.0], 1).unwrap();
        assert!(matches!(ScalerX::fit(&constant), Err(DataError::ConstantFeature { .. })));
    }

    #[test]
    fn scaler_x_identity_on_unit_range_features() {
        let train =
            Dataset::new(vec![0.0, 1.0, 1.0, 0.0, 0.25, 0.5], vec![0.0; 3], 2).unwrap();
        let s = ScalerX::fit(&train).unwrap();
        let out = s.transform(&train);
        assert_eq!(out.x, train.x);
    }

    #[test]
    fn kfold_partitions() {
        let folds = split_kfold(10, 5, 3);
        assert!(folds.iter().all(|f| f.len() == 2));
        let folds11 = split_kfold(11, 5, 3);
        let mut sizes: Vec<usize> = folds11.iter().map(Vec::len).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![2, 2, 2, 2, 3]);
        let mut all: Vec<usize> = folds11.into_iter().flatten().collect();
        all.sort_unstable();
        assert_eq!(all, (0..11).collect::<Vec<_>>());
        assert_eq!(split_kfold(40, 5, 9), split_kfold(40, 5, 9));
        assert_ne!(split_kfold(40, 5, 9), split_kfold(40, 5, 10));
    }

    #[test]
    fn train_val_split_ratio() {
        let idx: Vec<usize> = (0..8).collect();
        let (train, val) = split_train_val(&idx, 1);
        assert_eq!((train.len(), val.len()), (6, 2));
        let idx: Vec<usize> = (100..200).collect();
        let (train, val) = split_train_val(&idx, 1);
        assert_eq!((train.len(), val.len()), (75, 25));
        let mut union: Vec<usize> = train.iter().chain(&val).copied().collect();
        union.sort_unstable();
        assert_eq!(union, idx);
        // Ties go to train: n = 10 gives 8/2.
        let idx: Vec<usize> = (0..10).collect();
        let (train, val) = split_train_val(&idx, 5);
        assert_eq!((train.len(), val.len()), (8, 2));
    }

    #[test]
    fn csv_round_trip_and_log_response() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("toy.csv");
        std::fs::write(
            &path,
            format!("a,b,mhv\n0.5,1.5,1.0\n0.25,2.5,{}\n", std::f64::consts::E),
        )
        .unwrap();
        let ds = load_csv(&path, "mhv", true).unwrap();
        assert_eq!(ds.d, 2);
        assert_eq!(ds.feature_names.as_deref(), Some(&["a".to_string(), "b".to_string()][..]));
        assert!((ds.y[0] - 0.0).abs() < 1e-12);
        assert!((ds.y[1] - 1.0).abs() < 1e-12);

        let out = dir.path().join("echo.csv");
        write_csv(&out, &ds, "mhv").unwrap();
        let back = load_csv(&out, "mhv", false).unwrap();
        assert_eq!(back.x, ds.x);
        assert_eq!(back.y, ds.y);
    }

    #[test]
    fn csv_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "a,b,y\n1.0,abc,3.0\n").unwrap();
        match load_csv(&path, "y", false) {
            Err(DataError::Parse { row, column, value }) => {
                assert_eq!((row, column.as_str(), value.as_str()), (1, "b", "abc"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(matches!(
            load_csv(&path, "missing", false),
            Err(DataError::MissingColumn(_))
        ));
        std::fs::write(&path, "a,y\n1.0,-2.0\n").unwrap();
        assert!(matches!(
            load_csv(&path, "y", true),
            Err(DataError::NonPositiveResponse { row: 1, .. })
        ));
        std::fs::write(&path, "a,y\nNaN,2.0\n").unwrap();
        assert!(matches!(load_csv(&path, "y", false), Err(DataError::NonFinite { .. })));
    }
}
