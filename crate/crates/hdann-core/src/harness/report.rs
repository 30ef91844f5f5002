//! CSV report emission and ingestion.
//!
//! Three files per study: `records.csv` (every grid cell), `selection.csv`
//! (the averaged best/small comparison), `plotdata.csv` (parameter count
//! versus validation error, plot-ready). Floats are serialized with 17
//! significant digits so files round-trip exactly.

use super::study::StudyBundle;
use super::{HarnessError, RunRecord};
use crate::network::NetworkKind;
use std::path::{Path, PathBuf};

pub const RECORDS_HEADER: &str =
    "network,L,p,q,sigma,basis,validation_error,test_error,training_time_sec,n_params,seed,sample_id";

/// 17 significant digits; enough to reconstruct any f64 exactly.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else if v.is_infinite() {
        (if v > 0.0 { "inf" } else { "-inf" }).to_string()
    } else {
        format!("{v:.16e}")
    }
}

fn parse_f64(s: &str) -> Option<f64> {
    match s {
        "NaN" => Some(f64::NAN),
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        _ => s.parse().ok(),
    }
}

#[derive(Debug, Clone)]
pub struct ReportPaths {
    pub records: PathBuf,
    pub selection: PathBuf,
    pub plotdata: PathBuf,
}

pub fn write_records_csv(path: &Path, records: &[RunRecord]) -> Result<(), HarnessError> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(RECORDS_HEADER.split(','))?;
    for r in records {
        writer.write_record([
            r.kind.name().to_string(),
            r.l.to_string(),
            r.p.to_string(),
            r.q.to_string(),
            r.sigma.name().to_string(),
            r.basis.map(|b| b.name().to_string()).unwrap_or_default(),
            fmt_f64(r.validation_error),
            fmt_f64(r.test_error),
            fmt_f64(r.training_time_sec),
            r.n_params.to_string(),
            r.seed.to_string(),
            r.sample_id.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads a `records.csv` back into records; the inverse of
/// [`write_records_csv`].
pub fn parse_records(path: &Path) -> Result<Vec<RunRecord>, HarnessError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let malformed = |row: usize, reason: String| HarnessError::MalformedRecords {
        path: path.display().to_string(),
        row,
        reason,
    };
    let headers = reader.headers()?.iter().collect::<Vec<_>>().join(",");
    if headers != RECORDS_HEADER {
        return Err(malformed(0, format!("unexpected header {headers:?}")));
    }
    let mut records = Vec::new();
    for (i, result) in reader.records().enumerate() {
        let row = i + 1;
        let rec = result?;
        if rec.len() != 12 {
            return Err(malformed(row, format!("expected 12 fields, got {}", rec.len())));
        }
        let field = |j: usize| rec.get(j).unwrap();
        let num = |j: usize| -> Result<f64, HarnessError> {
            parse_f64(field(j))
                .ok_or_else(|| malformed(row, format!("bad float {:?}", field(j))))
        };
        let int = |j: usize| -> Result<usize, HarnessError> {
            field(j)
                .parse()
                .map_err(|_| malformed(row, format!("bad integer {:?}", field(j))))
        };
        let kind: NetworkKind = field(0)
            .parse()
            .map_err(|_| malformed(row, format!("bad network kind {:?}", field(0))))?;
        let basis = if field(5).is_empty() {
            None
        } else {
            Some(
                field(5)
                    .parse()
                    .map_err(|_| malformed(row, format!("bad basis {:?}", field(5))))?,
            )
        };
        records.push(RunRecord {
            kind,
            l: int(1)?,
            p: int(2)?,
            q: int(3)?,
            sigma: field(4)
                .parse()
                .map_err(|_| malformed(row, format!("bad sigma {:?}", field(4))))?,
            basis,
            validation_error: num(6)?,
            test_error: num(7)?,
            training_time_sec: num(8)?,
            n_params: int(9)?,
            seed: field(10)
                .parse()
                .map_err(|_| malformed(row, format!("bad seed {:?}", field(10))))?,
            sample_id: int(11)?,
        });
    }
    Ok(records)
}

fn write_selection_csv(path: &Path, bundle: &StudyBundle) -> Result<(), HarnessError> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["network", "selection", "avg_test_error", "avg_n_params", "n_contributing"])?;
    for row in &bundle.summary {
        writer.write_record([
            row.kind.name().to_string(),
            row.selection.to_string(),
            row.avg_test_error.map(fmt_f64).unwrap_or_else(|| "NA".into()),
            row.avg_n_params.map(fmt_f64).unwrap_or_else(|| "NA".into()),
            row.n_contributing.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

fn write_plotdata_csv(path: &Path, records: &[RunRecord]) -> Result<(), HarnessError> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["network", "basis", "log10_n_params", "validation_error"])?;
    for r in records {
        writer.write_record([
            r.kind.name().to_string(),
            r.basis.map(|b| b.name().to_string()).unwrap_or_default(),
            fmt_f64((r.n_params as f64).log10()),
            fmt_f64(r.validation_error),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Writes `records.csv`, `selection.csv` and `plotdata.csv` under `out_dir`
/// (created if missing).
pub fn emit_report(bundle: &StudyBundle, out_dir: &Path) -> Result<ReportPaths, HarnessError> {
    std::fs::create_dir_all(out_dir)?;
    let paths = ReportPaths {
        records: out_dir.join("records.csv"),
        selection: out_dir.join("selection.csv"),
        plotdata: out_dir.join("plotdata.csv"),
    };
    write_records_csv(&paths.records, &bundle.records)?;
    write_selection_csv(&paths.selection, bundle)?;
    write_plotdata_csv(&paths.plotdata, &bundle.records)?;
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::super::study::{summarize, SelectionTag};
    use super::*;
    use crate::activation::ActivationKind;
    use crate::basis::BasisFamily;

    fn record(kind: NetworkKind, val: f64, params: usize, sample_id: usize) -> RunRecord {
        RunRecord {
            kind,
            l: 3,
            p: 16,
            q: if kind == NetworkKind::Dnn { 0 } else { 5 },
            sigma: ActivationKind::Tanh,
            basis: kind.uses_basis().then_some(BasisFamily::Cosine),
            validation_error: val,
            test_error: val * 0.9,
            training_time_sec: 1.25,
            n_params: params,
            seed: 42,
            sample_id,
        }
    }

    fn bits(records: &[RunRecord]) -> Vec<(u64, u64, u64)> {
        records
            .iter()
            .map(|r| {
                (
                    r.validation_error.to_bits(),
                    r.test_error.to_bits(),
                    r.training_time_sec.to_bits(),
                )
            })
            .collect()
    }

    #[test]
    fn records_round_trip_including_nan_and_dnn_blank_basis() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.csv");
        let records = vec![
            record(NetworkKind::Dnn, 0.038_979_999_123, 215_681, 0),
            record(NetworkKind::Hdann1, f64::NAN, 1_249, 0),
            record(NetworkKind::Dann, 1.0 / 3.0, 665_089, 1),
        ];
        write_records_csv(&path, &records).unwrap();
        let back = parse_records(&path).unwrap();
        assert_eq!(back.len(), records.len());
        assert_eq!(bits(&back), bits(&records));
        assert_eq!(back[0].basis, None);
        assert_eq!(back[1].basis, Some(BasisFamily::Cosine));
        assert_eq!(back[2].kind, NetworkKind::Dann);
        assert_eq!(back[2].n_params, 665_089);

        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), RECORDS_HEADER);
        assert!(text.contains(",,"), "DNN basis field should be empty");
    }

    #[test]
    fn parse_rejects_malformed_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.csv");
        std::fs::write(
            &path,
            format!("{RECORDS_HEADER}\nDNN,3,16,0,tanh,,x,1.0,0.0,10,1,0\n"),
        )
        .unwrap();
        assert!(matches!(
            parse_records(&path),
            Err(HarnessError::MalformedRecords { row: 1, .. })
        ));
        std::fs::write(&path, "foo,bar\n1,2\n").unwrap();
        assert!(matches!(
            parse_records(&path),
            Err(HarnessError::MalformedRecords { row: 0, .. })
        ));
    }

    #[test]
    fn report_files_and_plotdata_log10() {
        let dir = tempfile::tempdir().unwrap();
        let records =
            vec![record(NetworkKind::Dnn, 0.4, 1000, 0), record(NetworkKind::Hdann2, 0.3, 100, 0)];
        let (selections, summary) = summarize(&records);
        let bundle = StudyBundle {
            records,
            selections,
            summary,
            failed_records: 0,
            fold_details: Vec::new(),
        };
        let paths = emit_report(&bundle, dir.path()).unwrap();
        let plot = std::fs::read_to_string(&paths.plotdata).unwrap();
        let row = plot.lines().nth(1).unwrap();
        assert!(row.starts_with("DNN,,"));
        assert!(row.contains(&fmt_f64(3.0)), "{row}");
        let selection = std::fs::read_to_string(&paths.selection).unwrap();
        // HDANN2 beats the DNN on validation error, so its small row exists.
        assert!(selection.contains("HDANN2,small"));
        assert!(!selection.contains("NA"), "{selection}");
    }

    #[test]
    fn empty_bundle_writes_headers_only() {
        let dir = tempfile::tempdir().unwrap();
        let bundle = StudyBundle::default();
        let paths = emit_report(&bundle, dir.path()).unwrap();
        for (path, header) in [
            (&paths.records, RECORDS_HEADER),
            (&paths.selection, "network,selection,avg_test_error,avg_n_params,n_contributing"),
            (&paths.plotdata, "network,basis,log10_n_params,validation_error"),
        ] {
            let text = std::fs::read_to_string(path).unwrap();
            assert_eq!(text.trim_end(), header);
        }
        assert!(parse_records(&paths.records).unwrap().is_empty());
    }

    #[test]
    fn na_selection_row() {
        // The proposed network never beats the DNN: small row must be NA.
        let records = vec![
            record(NetworkKind::Dnn, 0.1, 1000, 0),
            record(NetworkKind::Hdann3, 0.5, 10, 0),
        ];
        let (selections, summary) = summarize(&records);
        let small = summary
            .iter()
            .find(|s| s.kind == NetworkKind::Hdann3 && s.selection == SelectionTag::Small)
            .unwrap();
        assert_eq!(small.n_contributing, 0);
        assert!(small.avg_test_error.is_none());
        let dir = tempfile::tempdir().unwrap();
        let bundle = StudyBundle {
            records,
            selections,
            summary,
            failed_records: 0,
            fold_details: Vec::new(),
        };
        let paths = emit_report(&bundle, dir.path()).unwrap();
        let text = std::fs::read_to_string(&paths.selection).unwrap();
        assert!(text.contains("HDANN3,small,NA,NA,0"), "{text}");
    }
}
