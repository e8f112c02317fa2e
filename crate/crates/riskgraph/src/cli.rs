//! Argument parsing and output for the `riskgraph` binary.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;

use riskgraph_core::model::TrainConfig;

use crate::commands::{self, SynthOptions};
use crate::config::{self, ConfigFile};
use crate::error::{CliResult, Failure};
use crate::report;
use crate::{io, smesd};

#[derive(Debug, Parser)]
#[command(
    name = "riskgraph",
    version,
    about = "Bankruptcy risk from enterprise knowledge graphs"
)]
pub struct Cli {
    /// JSON config file: {"data": ..., "out": ..., "train": {...}}
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Indicator correlations and group t-tests
    Analyze {
        #[arg(long, value_name = "DIR")]
        data: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// welch or pooled
        #[arg(long, default_value = "welch")]
        ttest: String,
        /// Write the report here instead of stdout
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Write a planted-signal synthetic graph in the schema files
    GenSynth {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Enterprises
        #[arg(long, default_value_t = 60)]
        n: usize,
        /// Persons; a quarter of the enterprises when omitted
        #[arg(long)]
        persons: Option<usize>,
        /// Signal strength in [0, 1]
        #[arg(long, default_value_t = 1.0)]
        strength: f64,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Train and write checkpoint.json, epochs.jsonl and summary.json
    Train {
        #[arg(long, value_name = "DIR")]
        data: Option<PathBuf>,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        #[command(flatten)]
        train: TrainFlags,
    },
    /// Metrics of a checkpoint on one split, as JSON
    Eval {
        #[arg(long, value_name = "DIR")]
        data: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        checkpoint: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long, value_enum, default_value_t = MetricsFormat::Json)]
        format: MetricsFormat,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Finite-difference check of the full loss on a small synthetic graph
    Gradcheck {
        /// Enterprises
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        persons: usize,
        #[arg(long, default_value_t = 1e-6)]
        h: f64,
        /// Largest acceptable relative error
        #[arg(long, default_value_t = 1e-4)]
        threshold: f64,
        #[command(flatten)]
        train: TrainFlags,
    },
    /// Train once per value of one dimension and tabulate test metrics
    Sweep {
        /// input_dim, output_dim, lawsuit_dim or supplement_dim
        #[arg(long)]
        param: String,
        /// Comma-separated values
        #[arg(long, value_delimiter = ',', required = true)]
        grid: Vec<usize>,
        /// Data directory; a synthetic graph is used when absent
        #[arg(long, value_name = "DIR")]
        data: Option<PathBuf>,
        /// Enterprises of the synthetic graph
        #[arg(long, default_value_t = 200)]
        synth_n: usize,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        #[command(flatten)]
        train: TrainFlags,
    },
    /// Convert a CSV export of the SME dataset to the schema files
    ConvertSmesd {
        #[arg(long, value_name = "DIR")]
        input: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[arg(long, default_value = "2021-12-31")]
        snapshot_date: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricsFormat {
    Json,
    Text,
}

/// Training configuration flags. Anything without a dedicated flag can be
/// set with `--set key=value`.
#[derive(Debug, Clone, Default, Args)]
pub struct TrainFlags {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub input_dim: Option<usize>,
    #[arg(long)]
    pub output_dim: Option<usize>,
    #[arg(long)]
    pub lawsuit_dim: Option<usize>,
    #[arg(long)]
    pub supplement_dim: Option<usize>,
    #[arg(long)]
    pub lr_max: Option<f64>,
    /// full, no_intra, no_hyper or no_heter
    #[arg(long)]
    pub ablation: Option<String>,
    /// encoder or frequency
    #[arg(long)]
    pub intra_variant: Option<String>,
    /// typed or merged
    #[arg(long)]
    pub hyper_variant: Option<String>,
    /// Any training key, e.g. --set conv_form=classical
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = config::parse_override)]
    pub set: Vec<(String, Value)>,
}

impl TrainFlags {
    pub fn overrides(&self) -> Vec<(String, Value)> {
        let mut out = Vec::new();
        let mut put = |k: &str, v: Option<Value>| {
            if let Some(v) = v {
                out.push((k.to_string(), v));
            }
        };
        put("seed", self.seed.map(Value::from));
        put("epochs", self.epochs.map(Value::from));
        put("input_dim", self.input_dim.map(Value::from));
        put("output_dim", self.output_dim.map(Value::from));
        put("lawsuit_dim", self.lawsuit_dim.map(Value::from));
        put("supplement_dim", self.supplement_dim.map(Value::from));
        put("lr_max", self.lr_max.map(Value::from));
        put("ablation", self.ablation.clone().map(Value::from));
        put("intra_variant", self.intra_variant.clone().map(Value::from));
        put("hyper_variant", self.hyper_variant.clone().map(Value::from));
        out.extend(self.set.iter().cloned());
        out
    }

    pub fn resolve(&self, file: Option<&ConfigFile>) -> CliResult<TrainConfig> {
        config::resolve_train(file, &self.overrides())
    }
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => fs::write(path, text)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(Failure::Runtime),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|()| stdout.flush())
                .context("writing to stdout")
                .map_err(Failure::Runtime)
        }
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    let file = cli.config.as_deref().map(ConfigFile::load).transpose()?;
    let file = file.as_ref();
    match cli.command {
        Command::Analyze {
            data,
            format,
            ttest,
            out,
        } => {
            let variant = commands::parse_ttest(&ttest)?;
            let dir = config::resolve_data(data.as_deref(), file)?;
            let report = commands::analyze(&dir, variant)?;
            match format {
                Format::Text => emit(out.as_deref(), &report::stats_text(&report)),
                Format::Csv => {
                    eprintln!("{}", report::stats_footer(&report));
                    emit(out.as_deref(), &report::stats_csv(&report))
                }
            }
        }
        Command::GenSynth {
            seed,
            n,
            persons,
            strength,
            out,
        } => {
            let options = SynthOptions {
                seed,
                n_enterprises: n,
                n_persons: persons.unwrap_or(n / 4),
                strength,
            };
            let dir = config::resolve_out(out.as_deref(), file, "synth");
            for p in commands::gen_synth(&options, &dir)? {
                println!("wrote {}", p.display());
            }
            Ok(())
        }
        Command::Train { data, out, train } => {
            let config = train.resolve(file)?;
            let dir = config::resolve_data(data.as_deref(), file)?;
            let ds = io::load_dataset(&dir)?;
            let out = config::resolve_out(out.as_deref(), file, "run");
            let run = commands::train_run(&ds, &config, &out)?;
            println!(
                "best epoch {} (validation score {:.6})",
                run.outcome.best_epoch, run.outcome.best_score
            );
            print!("{}", report::metrics_text("val", &run.val));
            if let Some(test) = &run.test {
                print!("{}", report::metrics_text("test", test));
            }
            for p in &run.files {
                println!("wrote {}", p.display());
            }
            Ok(())
        }
        Command::Eval {
            data,
            checkpoint,
            split,
            format,
            out,
        } => {
            let split = commands::parse_split(&split)?;
            let dir = config::resolve_data(data.as_deref(), file)?;
            let ds = io::load_dataset(&dir)?;
            let metrics = commands::eval_checkpoint(&ds, &checkpoint, split)?;
            let text = match format {
                MetricsFormat::Json => {
                    let mut t = serde_json::to_string_pretty(&serde_json::json!({
                        "split": split.as_str(),
                        "metrics": metrics,
                    }))
                    .context("metrics")?;
                    t.push('\n');
                    t
                }
                MetricsFormat::Text => report::metrics_text(split.as_str(), &metrics),
            };
            emit(out.as_deref(), &text)
        }
        Command::Gradcheck {
            n,
            persons,
            h,
            threshold,
            train,
        } => {
            let config = train.resolve(file)?;
            let kg = commands::gradcheck_graph(config.seed, n, persons)?;
            let r = commands::gradcheck(&kg, &config, h)?;
            println!("nodes              {}", kg.node_count());
            println!("coordinates        {}", r.checked);
            println!("max relative error {:.3e}", r.max_rel_error);
            if let Some((name, i)) = &r.worst {
                println!(
                    "worst              {name}[{i}]: analytic {:.6e} numeric {:.6e}",
                    r.analytic, r.numeric
                );
            }
            println!("loss               {:.6}", r.loss);
            println!(
                "resolution         {:.3e} (one rounding unit of the loss per step)",
                r.resolution
            );
            println!(
                "unresolved         {} coordinates below 1e4 x resolution",
                r.unresolved
            );
            if r.max_rel_error <= threshold {
                println!("PASS (threshold {threshold:e})");
                Ok(())
            } else {
                println!("FAIL (threshold {threshold:e})");
                Err(Failure::Runtime(anyhow::anyhow!(
                    "max relative error {:.3e} exceeds {threshold:e}",
                    r.max_rel_error
                )))
            }
        }
        Command::Sweep {
            param,
            grid,
            data,
            synth_n,
            out,
            train,
        } => {
            let config = train.resolve(file)?;
            let ds = match config::resolve_data(data.as_deref(), file).ok() {
                Some(dir) => io::load_dataset(&dir)?,
                None => {
                    let options = SynthOptions {
                        seed: config.seed,
                        n_enterprises: synth_n,
                        n_persons: synth_n / 4,
                        strength: 1.0,
                    };
                    let kg = riskgraph_core::ekg::gen_synthetic(&options.config())
                        .map_err(|e| Failure::from_core(e, "sweep"))?;
                    io::Dataset {
                        kg,
                        supplement: None,
                    }
                }
            };
            let rows = commands::sweep(&ds, &config, &param, &grid)?;
            emit(out.as_deref(), &report::sweep_csv(&param, &rows))
        }
        Command::ConvertSmesd {
            input,
            out,
            snapshot_date,
        } => {
            for p in smesd::convert(&input, &out, &snapshot_date)? {
                println!("wrote {}", p.display());
            }
            Ok(())
        }
    }
}
