//! `vsdl`: simulate corridor CSI datasets, train localization models and
//! evaluate them.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vsdl_core::bundle::{Bundle, SystemKind};
use vsdl_core::csi::{Dataset, FeatureSet, Split};
use vsdl_core::eval::{cdf_csv, comparison_table, config_hash, evaluate_bundle, run_experiment, ExperimentConfig};
use vsdl_core::{Error, ErrorKind};

#[derive(Parser)]
#[command(name = "vsdl", version, about = "View-selective deep learning for WiFi CSI localization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML experiment configuration; defaults apply to missing keys.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set train.alpha=0.3`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Seed for this run, replacing the configured one.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset from the topology and channel settings.
    Simulate {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Output dataset (JSON lines).
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Train one system on the training split of a dataset.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(short, long)]
        data: PathBuf,
        /// vsdl, vdl or dnn.
        #[arg(long, default_value = "vsdl")]
        system: SystemKind,
        /// Output bundle directory.
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Predict locations for every packet in a dataset file.
    Predict {
        #[arg(short, long)]
        model: PathBuf,
        #[arg(short, long)]
        data: PathBuf,
        /// Output CSV.
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Score a trained bundle on the test split of a dataset.
    Evaluate {
        #[arg(short, long)]
        model: PathBuf,
        #[arg(short, long)]
        data: PathBuf,
        /// Directory for `report.json` and `cdf.csv`.
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Simulate, train and evaluate every configured system for every seed.
    Compare {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Directory for `results.json`, `table.txt` and `cdf.csv`.
        #[arg(short, long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Io => 1,
        ErrorKind::Config => 2,
        ErrorKind::Data => 3,
        ErrorKind::Training => 4,
    }
}

fn load_config(args: &ConfigArgs) -> Result<ExperimentConfig, Error> {
    let text = match &args.config {
        Some(p) => fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
        None => String::new(),
    };
    ExperimentConfig::from_toml_with_overrides(&text, &args.overrides)
}

fn read_dataset(path: &Path) -> Result<Dataset, Error> {
    let f = File::open(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    Dataset::read_jsonl(BufReader::new(f))
}

fn write_file(path: &Path, contents: &str) -> Result<(), Error> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, contents)?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(e.into())
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Simulate { cfg, out } => {
            let config = load_config(&cfg)?;
            let mut sim = config.simulation;
            if let Some(seed) = cfg.seed {
                sim.seed = seed;
            }
            let dataset = sim.generate()?;
            if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            let mut w = BufWriter::new(File::create(&out)?);
            dataset.write_jsonl(&mut w)?;
            w.flush()?;
            let train = dataset.split(Split::Train).count();
            println!("wrote {} packets ({} train, {} test) to {}", dataset.records.len(), train, dataset.records.len() - train, out.display());
        }
        Command::Train { cfg, data, system, out } => {
            let config = load_config(&cfg)?;
            let mut train_cfg = config.train;
            if let Some(seed) = cfg.seed {
                train_cfg.seed = seed;
            }
            let dataset = read_dataset(&data)?;
            let train = FeatureSet::from_records(&dataset.header, dataset.split(Split::Train))?;
            if train.is_empty() {
                return Err(Error::Data("dataset has no training packets".into()));
            }
            let (bundle, summary) = Bundle::train(system, &dataset.header, &train, &train_cfg)?;
            bundle.save(&out)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::Predict { model, data, out } => {
            let bundle = Bundle::load(&model)?;
            let dataset = read_dataset(&data)?;
            bundle.data.check_compatible(&dataset.header)?;
            let set = FeatureSet::from_records(&dataset.header, &dataset.records)?;
            let pred = bundle.predict_features(&set)?;
            let meters = pred.meters(&bundle.data.normalization);
            let views = pred.u_hat.ncols();
            let mut w = csv::Writer::from_writer(Vec::new());
            let mut header = vec!["point_id".to_string(), "packet".into(), "x_m".into(), "y_m".into()];
            header.extend((1..=views).map(|k| format!("u_hat_{k}")));
            w.write_record(&header).map_err(csv_error)?;
            for i in 0..set.len() {
                let mut row = vec![set.point_ids[i].to_string(), set.packets[i].to_string(), meters[[i, 0]].to_string(), meters[[i, 1]].to_string()];
                row.extend((0..views).map(|k| pred.u_hat[[i, k]].to_string()));
                w.write_record(&row).map_err(csv_error)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
            write_file(&out, &String::from_utf8_lossy(&bytes))?;
            println!("wrote {} predictions to {}", set.len(), out.display());
        }
        Command::Evaluate { model, data, out } => {
            let bundle = Bundle::load(&model)?;
            let dataset = read_dataset(&data)?;
            let hash = config_hash(&bundle.config)?;
            let report = evaluate_bundle(&bundle, &dataset, &hash)?;
            fs::create_dir_all(&out)?;
            write_file(&out.join("report.json"), &(serde_json::to_string_pretty(&report)? + "\n"))?;
            write_file(&out.join("cdf.csv"), &cdf_csv(std::slice::from_ref(&report))?)?;
            println!("{}: mean {:.4} m, median {:.4} m over {} packets", bundle.kind().label(), report.mean_m, report.median_m, report.samples);
        }
        Command::Compare { cfg, out } => {
            let mut config = load_config(&cfg)?;
            if let Some(seed) = cfg.seed {
                config.seeds = vec![seed];
            }
            let result = run_experiment(&config)?;
            fs::create_dir_all(&out)?;
            let table = comparison_table(&result);
            write_file(&out.join("results.json"), &(serde_json::to_string_pretty(&result)? + "\n"))?;
            write_file(&out.join("table.txt"), &table)?;
            write_file(&out.join("cdf.csv"), &cdf_csv(&result.reports)?)?;
            print!("{table}");
        }
    }
    Ok(())
}
