use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use molsets::chem::{build_graph, FeaturizedGraph};
use molsets::data::{
    build_examples, generate_synthetic, load_dataset, split_dataset, write_dataset,
    write_dataset_to, GraphCache, LoadMode, MixtureRecord,
};
use molsets::model::{ModelConfig, MolSetsModel, Ordering, Variant};
use molsets::nn::ConvKind;
use molsets::screen::{
    enumerate_binary_candidates, permute_mixture, read_smiles_list, run_screening,
    write_screening,
};
use molsets::train::{evaluate, save_history, train, TrainConfig};
use molsets::{Error, ErrorClass, Result};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

#[derive(Parser)]
#[command(name = "molsets", version, about = "Electrolyte mixture conductivity model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the featurized graph of a SMILES string as JSON.
    Featurize {
        smiles: String,
        /// Molecular weight override in Daltons.
        #[arg(long)]
        mol_weight: Option<f64>,
    },
    /// Replace temperature series with 298 K targets.
    Prepare {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Skip bad rows instead of aborting.
        #[arg(long)]
        lenient: bool,
    },
    /// Shuffle and split into train/val/test CSVs.
    Split {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Three positive ratios.
        #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [3.0, 1.0, 1.0])]
        ratios: Vec<f64>,
    },
    /// Write a synthetic dataset.
    Synth {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Standard deviation of Gaussian target noise.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Output CSV; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a model and write its checkpoint.
    Train {
        /// JSON with training settings and optional architecture overrides.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "molsets")]
        variant: Variant,
        #[arg(long, default_value = "graphconv")]
        conv: ConvKind,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        val: PathBuf,
        #[arg(long, default_value = "model.json")]
        out: PathBuf,
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Print correlation metrics of a checkpoint on a dataset.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Rank equal-weight binary mixtures of the listed solvents and salts.
    Screen {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        solvents: PathBuf,
        #[arg(long)]
        salts: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare predictions on each mixture and a reordered copy of it.
    PermuteTest {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write the pooled solvent representation of each mixture.
    ExportReprs {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Output CSV; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Training file: every training setting plus optional architecture
/// overrides applied to both encoders.
#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct TrainFile {
    #[serde(flatten)]
    train: TrainConfig,
    model_seed: Option<u64>,
    num_layers: Option<usize>,
    hidden_dim: Option<usize>,
    representation_dim: Option<usize>,
    attention_dim: Option<usize>,
    rho_hidden: Option<Vec<usize>>,
}

impl TrainFile {
    fn model_config(&self, conv: ConvKind, variant: Variant) -> ModelConfig {
        let mut cfg = ModelConfig::tuned(conv, variant);
        for gnn in [&mut cfg.solvent_gnn, &mut cfg.salt_gnn] {
            if let Some(v) = self.num_layers {
                gnn.num_layers = v;
            }
            if let Some(v) = self.hidden_dim {
                gnn.hidden_dim = v;
            }
            if let Some(v) = self.representation_dim {
                gnn.representation_dim = v;
            }
        }
        if let Some(v) = self.attention_dim {
            cfg.attention_dim = v;
        }
        if let Some(v) = &self.rho_hidden {
            cfg.rho_hidden = v.clone();
        }
        cfg
    }
}

#[derive(Serialize)]
struct TrainSummary {
    epochs: usize,
    best_epoch: usize,
    best_val_loss: f64,
    stopped_early: bool,
    checkpoint: String,
}

#[derive(Serialize)]
struct PermuteSummary {
    variant: Variant,
    n: usize,
    max_abs_diff: f64,
    mean_abs_diff: f64,
    fraction_above_1e_6: f64,
}

fn records(path: &Path) -> Result<Vec<MixtureRecord>> {
    Ok(load_dataset(path, LoadMode::Strict)?.records)
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

/// Ok(true) on full success, Ok(false) on partial success.
fn run(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Featurize { smiles, mol_weight } => {
            let g = build_graph(&smiles, mol_weight)?;
            print_json(&FeaturizedGraph::from(&g))?;
        }
        Command::Prepare {
            input,
            out,
            lenient,
        } => {
            let mode = if lenient { LoadMode::Lenient } else { LoadMode::Strict };
            let report = load_dataset(&input, mode)?;
            for s in &report.skipped {
                eprintln!("skipped line {}: {}", s.line, s.message);
            }
            let prepared = report
                .records
                .iter()
                .map(|r| {
                    r.prepared()
                        .map_err(|e| Error::Data(format!("mixture {}: {e}", r.mixture_id)))
                })
                .collect::<Result<Vec<_>>>()?;
            write_dataset(&out, &prepared)?;
            return Ok(report.skipped.is_empty());
        }
        Command::Split {
            input,
            out_dir,
            seed,
            ratios,
        } => {
            let recs = records(&input)?;
            let (a, b, c) = split_dataset(&recs, (ratios[0], ratios[1], ratios[2]), seed)?;
            std::fs::create_dir_all(&out_dir)?;
            for (name, part) in [("train.csv", a), ("val.csv", b), ("test.csv", c)] {
                write_dataset(out_dir.join(name), &part)?;
            }
        }
        Command::Synth {
            n,
            seed,
            noise,
            out,
        } => {
            let recs = generate_synthetic(n, seed, noise)?;
            match out {
                Some(p) => write_dataset(p, &recs)?,
                None => write_dataset_to(std::io::stdout().lock(), &recs)?,
            }
        }
        Command::Train {
            config,
            variant,
            conv,
            data,
            val,
            out,
            history,
        } => {
            let file: TrainFile = match config {
                Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
                None => TrainFile::default(),
            };
            let model_cfg = file.model_config(conv, variant);
            let model = MolSetsModel::new(model_cfg, file.model_seed.unwrap_or(file.train.seed))?;
            let mut cache = GraphCache::new();
            let train_set = build_examples(&records(&data)?, &mut cache)?;
            let val_set = build_examples(&records(&val)?, &mut cache)?;
            let outcome = train(model, &train_set, &val_set, &file.train)?;
            outcome.model.save(&out)?;
            if let Some(h) = history {
                save_history(h, &outcome.history)?;
            }
            print_json(&TrainSummary {
                epochs: outcome.history.len(),
                best_epoch: outcome.best_epoch,
                best_val_loss: outcome.history[outcome.best_epoch].val_loss,
                stopped_early: outcome.stopped_early,
                checkpoint: out.display().to_string(),
            })?;
        }
        Command::Eval { checkpoint, data } => {
            let model = MolSetsModel::load(&checkpoint)?;
            let examples = build_examples(&records(&data)?, &mut GraphCache::new())?;
            print_json(&evaluate(&model, &examples)?)?;
        }
        Command::Screen {
            checkpoint,
            solvents,
            salts,
            out,
        } => {
            let model = MolSetsModel::load(&checkpoint)?;
            let candidates =
                enumerate_binary_candidates(&read_smiles_list(solvents)?, &read_smiles_list(salts)?)?;
            let report = run_screening(&model, &candidates);
            let file = std::fs::File::create(&out)?;
            write_screening(std::io::BufWriter::new(file), &report.results)?;
            for s in &report.skipped {
                let c = &s.candidate;
                eprintln!("skipped {} + {} / {}: {}", c.solvent_a, c.solvent_b, c.salt, s.reason);
            }
            eprintln!(
                "screened {} candidates, {} skipped",
                report.results.len(),
                report.skipped.len()
            );
            return Ok(report.skipped.is_empty());
        }
        Command::PermuteTest {
            checkpoint,
            data,
            seed,
        } => {
            let model = MolSetsModel::load(&checkpoint)?;
            let mut cache = GraphCache::new();
            let mut diffs = Vec::new();
            for (i, r) in records(&data)?.iter().enumerate() {
                if r.solvent_smiles.len() < 2 {
                    continue;
                }
                let permuted = permute_mixture(r, seed.wrapping_add(i as u64))?;
                let a = model.predict_ordered(&cache.mixture_input(r)?, Ordering::AsGiven)?;
                let b = model.predict_ordered(&cache.mixture_input(&permuted)?, Ordering::AsGiven)?;
                diffs.push((a - b).abs());
            }
            let n = diffs.len();
            print_json(&PermuteSummary {
                variant: model.variant(),
                n,
                max_abs_diff: diffs.iter().copied().fold(0.0, f64::max),
                mean_abs_diff: diffs.iter().sum::<f64>() / n.max(1) as f64,
                fraction_above_1e_6: diffs.iter().filter(|&&d| d > 1e-6).count() as f64
                    / n.max(1) as f64,
            })?;
        }
        Command::ExportReprs {
            checkpoint,
            data,
            out,
        } => {
            let model = MolSetsModel::load(&checkpoint)?;
            let mut cache = GraphCache::new();
            let sink: Box<dyn Write> = match out {
                Some(p) => Box::new(std::io::BufWriter::new(std::fs::File::create(p)?)),
                None => Box::new(std::io::stdout().lock()),
            };
            let mut w = csv::Writer::from_writer(sink);
            let mut header_done = false;
            for r in records(&data)? {
                let z = model.export_representation(&cache.mixture_input(&r)?)?;
                if !header_done {
                    let mut h = vec!["mixture_id".to_string()];
                    h.extend((0..z.len()).map(|i| format!("r{i}")));
                    w.write_record(&h)?;
                    header_done = true;
                }
                let mut row = vec![r.mixture_id.clone()];
                row.extend(z.iter().map(|v| format!("{v}")));
                w.write_record(&row)?;
            }
            w.flush()?;
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_DATA),
        Err(e) => {
            eprintln!("error: {e}");
            match e.class() {
                ErrorClass::Data => ExitCode::from(EXIT_DATA),
                ErrorClass::Numeric => ExitCode::from(EXIT_NUMERIC),
            }
        }
    }
}
