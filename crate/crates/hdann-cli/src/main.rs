//! `hdann` — simulate data, run grid/k-fold studies, emit reports.

mod config;

use clap::{Parser, Subcommand, ValueEnum};
use config::{GridFileConfig, KfoldFileConfig};
use hdann_core::data::{self, DataError, ModelId};
use hdann_core::harness::{
    self, emit_report, parse_records, prepare_kfold_sample, prepare_simulation_sample,
    retrain_record, run_kfold_study, run_simulation_study, summarize, HarnessError, RunOptions,
    SampleSizes, SelectionTag, StudyBundle, Timing,
};
use hdann_core::network::{self, param_count, NetworkKind, NetworkSpec};
use hdann_core::training::{TrainConfig, TrainError};
use hdann_core::{ActivationKind, BasisFamily};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "hdann", version, about = "Deep additive neural network experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    /// Small grids (L in {1,3}, p in {4,16}, q in {3,5}, ReLU, both bases).
    Desk,
    /// The full grids: 135 DNN cells, 750 cells per proposed network.
    Paper,
}

#[derive(Clone, Copy, ValueEnum)]
enum TimingArg {
    Wall,
    Zero,
}

impl From<TimingArg> for Timing {
    fn from(t: TimingArg) -> Timing {
        match t {
            TimingArg::Wall => Timing::Wall,
            TimingArg::Zero => Timing::Zero,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic dataset from Model 1 or 2 and write x1..x6,y CSV.
    Simulate {
        #[arg(long)]
        model: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte-Carlo grid study on synthetic data.
    Grid {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        preset: Option<PresetArg>,
        /// Data model (1 or 2); overrides the config file.
        #[arg(long)]
        model: Option<u8>,
        #[arg(long)]
        n_train: Option<usize>,
        #[arg(long)]
        n_val: Option<usize>,
        #[arg(long)]
        n_test: Option<usize>,
        #[arg(long)]
        monte_carlo: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        /// wall: record wall-clock training times; zero: byte-reproducible files.
        #[arg(long, value_enum)]
        timing: Option<TimingArg>,
        /// Retrain the selected cells and write their parameter files.
        #[arg(long)]
        save_models: bool,
        /// Store model parameters as a JSON array instead of a .bin sidecar.
        #[arg(long)]
        portable: bool,
    },
    /// k-fold study on a CSV dataset.
    Kfold {
        #[arg(long)]
        data: PathBuf,
        /// Response column name.
        #[arg(long)]
        response: String,
        /// Use ln(response) as the regression target.
        #[arg(long)]
        log_response: bool,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        preset: Option<PresetArg>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        #[arg(long, value_enum)]
        timing: Option<TimingArg>,
        #[arg(long)]
        save_models: bool,
        #[arg(long)]
        portable: bool,
    },
    /// Recompute selection.csv and plotdata.csv from an existing records.csv.
    Report {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the closed-form parameter count of an architecture.
    Paramcount {
        #[arg(long)]
        kind: String,
        #[arg(long)]
        d: usize,
        #[arg(long = "L")]
        layers: usize,
        #[arg(long)]
        p: usize,
        #[arg(long, default_value_t = 0)]
        q: usize,
    },
}

enum CliError {
    Config(String),
    Data(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Data(m) => m,
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> CliError {
        match e {
            HarnessError::Config(_) | HarnessError::Network(_) => CliError::Config(e.to_string()),
            HarnessError::Train(TrainError::InvalidConfig(_)) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> CliError {
        match e {
            DataError::UnknownModel(_) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<network::ModelIoError> for CliError {
    fn from(e: network::ModelIoError) -> CliError {
        CliError::Data(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))
}

fn preset_grids(preset: Option<PresetArg>) -> Vec<harness::GridSpec> {
    match preset.unwrap_or(PresetArg::Desk) {
        PresetArg::Desk => harness::desk_grids(),
        PresetArg::Paper => harness::paper_grids(),
    }
}

fn preset_train(preset: Option<PresetArg>, seed: u64) -> TrainConfig {
    match preset.unwrap_or(PresetArg::Desk) {
        PresetArg::Desk => harness::desk_train_config(seed),
        PresetArg::Paper => harness::paper_train_config(seed),
    }
}

fn print_summary(bundle: &StudyBundle) {
    println!("network  selection  avg_test_error  avg_n_params  n");
    for row in &bundle.summary {
        let err = row
            .avg_test_error
            .map(|v| format!("{v:.5}"))
            .unwrap_or_else(|| "NA".into());
        let params = row
            .avg_n_params
            .map(|v| format!("{v:.1}"))
            .unwrap_or_else(|| "NA".into());
        println!(
            "{:<8} {:<10} {:>14} {:>13} {:>2}",
            row.kind.name(),
            row.selection.to_string(),
            err,
            params,
            row.n_contributing
        );
    }
}

fn save_selected_models<F>(
    bundle: &StudyBundle,
    train_cfg: &TrainConfig,
    out: &Path,
    portable: bool,
    label: &str,
    mut rebuild: F,
) -> Result<(), CliError>
where
    F: FnMut(usize) -> Result<harness::PreparedSample, CliError>,
{
    let models_dir = out.join("models");
    std::fs::create_dir_all(&models_dir)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", models_dir.display())))?;
    for selection in &bundle.selections {
        let sample = rebuild(selection.sample_id)?;
        for (tag, record) in [
            (SelectionTag::Best, selection.best.as_ref()),
            (SelectionTag::Small, selection.small.as_ref()),
        ] {
            let Some(record) = record else { continue };
            let (spec, params) = retrain_record(record, &sample, train_cfg)?;
            let base = models_dir.join(format!(
                "{label}{}-{}-{}",
                selection.sample_id,
                record.kind.name(),
                tag
            ));
            network::save_params(&base, &spec, &params, portable)?;
        }
    }
    println!("selected models written to {}", models_dir.display());
    Ok(())
}

fn finish_study(bundle: &StudyBundle, out: &Path) -> Result<u8, CliError> {
    let paths = emit_report(bundle, out)?;
    print_summary(bundle);
    println!("reports written to {}", out.display());
    let _ = paths;
    if bundle.failed_records > 0 {
        eprintln!(
            "warning: {} of {} runs failed (NaN records retained)",
            bundle.failed_records,
            bundle.records.len()
        );
        Ok(4)
    } else {
        Ok(0)
    }
}

fn run(command: Command) -> Result<u8, CliError> {
    match command {
        Command::Simulate { model, n, seed, out } => {
            let model: ModelId = model.parse()?;
            if n == 0 {
                return Err(CliError::Config("--n must be at least 1".into()));
            }
            let ds = match model {
                ModelId::One => data::gen_model1(n, seed)?,
                ModelId::Two => data::gen_model2(n, seed)?,
            };
            data::write_csv(&out, &ds, "y")?;
            println!("wrote {} rows to {}", ds.n, out.display());
            Ok(0)
        }
        Command::Grid {
            config,
            preset,
            model,
            n_train,
            n_val,
            n_test,
            monte_carlo,
            seed,
            out,
            threads,
            timing,
            save_models,
            portable,
        } => {
            let mut cfg: GridFileConfig = match &config {
                Some(path) => load_json(path)?,
                None => GridFileConfig::default(),
            };
            if let Some(m) = model {
                cfg.model = m;
            }
            if let Some(n) = n_train {
                cfg.n_train = n;
            }
            if let Some(n) = n_val {
                cfg.n_val = n;
            }
            if let Some(n) = n_test {
                cfg.n_test = n;
            }
            if let Some(mc) = monte_carlo {
                cfg.monte_carlo = mc;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(t) = timing {
                cfg.timing = t.into();
            }
            let model = match cfg.model {
                1 => ModelId::One,
                2 => ModelId::Two,
                other => {
                    return Err(CliError::Config(format!("model must be 1 or 2, got {other}")))
                }
            };
            let grids = if cfg.grids.is_empty() { preset_grids(preset) } else { cfg.grids.clone() };
            let train_cfg = cfg.train.unwrap_or_else(|| preset_train(preset, cfg.seed));
            let sizes =
                SampleSizes { n_train: cfg.n_train, n_val: cfg.n_val, n_test: cfg.n_test };
            let opts = RunOptions { seed: cfg.seed, threads, timing: cfg.timing };
            let bundle =
                run_simulation_study(model, sizes, cfg.monte_carlo, &grids, &train_cfg, &opts)?;
            if save_models {
                save_selected_models(&bundle, &train_cfg, &out, portable, "sample", |sid| {
                    prepare_simulation_sample(model, sizes, sid, opts.seed).map_err(CliError::from)
                })?;
            }
            finish_study(&bundle, &out)
        }
        Command::Kfold {
            data: data_path,
            response,
            log_response,
            config,
            preset,
            k,
            seed,
            out,
            threads,
            timing,
            save_models,
            portable,
        } => {
            let mut cfg: KfoldFileConfig = match &config {
                Some(path) => load_json(path)?,
                None => KfoldFileConfig::default(),
            };
            if let Some(k) = k {
                cfg.k = k;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(t) = timing {
                cfg.timing = t.into();
            }
            let dataset = data::load_csv(&data_path, &response, log_response)?;
            let grids = if cfg.grids.is_empty() { preset_grids(preset) } else { cfg.grids.clone() };
            let train_cfg = cfg.train.unwrap_or_else(|| preset_train(preset, cfg.seed));
            let opts = RunOptions { seed: cfg.seed, threads, timing: cfg.timing };
            let bundle = run_kfold_study(&dataset, cfg.k, &grids, &train_cfg, &opts)?;
            if save_models {
                let details = bundle.fold_details.clone();
                save_selected_models(&bundle, &train_cfg, &out, portable, "fold", |sid| {
                    prepare_kfold_sample(&dataset, &details[sid]).map_err(CliError::from)
                })?;
            }
            finish_study(&bundle, &out)
        }
        Command::Report { records, out } => {
            let records = parse_records(&records)?;
            let (selections, summary) = summarize(&records);
            let failed_records = records.iter().filter(|r| r.failed()).count();
            let bundle = StudyBundle {
                records,
                selections,
                summary,
                failed_records,
                fold_details: Vec::new(),
            };
            finish_study(&bundle, &out)
        }
        Command::Paramcount { kind, d, layers, p, q } => {
            let kind: NetworkKind = kind
                .parse()
                .map_err(|e: network::NetworkError| CliError::Config(e.to_string()))?;
            let spec = NetworkSpec {
                kind,
                d,
                layers,
                width: p,
                basis_count: q,
                sigma: ActivationKind::Logistic,
                g: ActivationKind::Logistic,
                basis: BasisFamily::Polynomial,
            };
            spec.validate()
                .map_err(|e| CliError::Config(e.to_string()))?;
            println!("{}", param_count(&spec));
            Ok(0)
        }
    }
}
