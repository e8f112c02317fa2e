//! The work behind each subcommand, free of argument parsing and printing.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use riskgraph_core::ekg::{
    gen_synthetic, EnterpriseKg, HyperedgeType, Relation, Split, SynthConfig,
};
use riskgraph_core::model::{
    class_weights, evaluate, forward, init_model, loss, train, GraphInputs, MetricsReport,
    TrainConfig, TrainOutcome,
};
use riskgraph_core::numeric::{grad_check_params, GradCheckReport};
use riskgraph_core::stats::{build_table1, StatsReport, TTestVariant};

use crate::checkpoint::Checkpoint;
use crate::error::{CliResult, DataError, Failure};
use crate::io::{self, Dataset};
use crate::report::SweepRow;

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const EPOCH_LOG_FILE: &str = "epochs.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";

pub fn analyze(data: &Path, variant: TTestVariant) -> CliResult<StatsReport> {
    let ds = io::load_dataset(data)?;
    build_table1(&ds.kg, variant).map_err(|e| Failure::from_core(e, "analyze"))
}

/// Synthetic graph options of `gen-synth` and `sweep`.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthOptions {
    pub seed: u64,
    pub n_enterprises: usize,
    pub n_persons: usize,
    pub strength: f64,
}

impl SynthOptions {
    pub fn config(&self) -> SynthConfig {
        SynthConfig::new(self.seed, self.n_enterprises, self.n_persons, self.strength)
    }
}

pub fn gen_synth(options: &SynthOptions, out: &Path) -> CliResult<Vec<PathBuf>> {
    let kg = gen_synthetic(&options.config()).map_err(|e| Failure::from_core(e, "gen-synth"))?;
    io::write_ekg(&kg, out)
        .with_context(|| format!("writing {}", out.display()))
        .map_err(Failure::Runtime)
}

pub fn inputs(ds: &Dataset, config: &TrainConfig) -> CliResult<GraphInputs> {
    if let Some(width) = ds
        .supplement
        .as_ref()
        .and_then(|m| m.values().next())
        .map(Vec::len)
    {
        if width != config.supplement_dim {
            return Err(Failure::config(format!(
                "embeddings have width {width} but supplement_dim is {}",
                config.supplement_dim
            )));
        }
    }
    GraphInputs::new(&ds.kg, config, ds.supplement.as_ref())
        .map_err(|e| Failure::from_core(e, "graph inputs"))
}

/// Output of [`train_run`].
#[derive(Debug, Clone)]
pub struct TrainRun {
    pub outcome: TrainOutcome,
    pub val: MetricsReport,
    pub test: Option<MetricsReport>,
    pub files: Vec<PathBuf>,
}

/// Trains on `ds`, then writes the checkpoint, the epoch log and a summary
/// into `out`.
pub fn train_run(ds: &Dataset, config: &TrainConfig, out: &Path) -> CliResult<TrainRun> {
    let inputs = inputs(ds, config)?;
    if ds.kg.splits.train.is_empty() || ds.kg.splits.val.is_empty() {
        return Err(Failure::config(
            "training needs non-empty train and val splits",
        ));
    }
    let outcome = train(&inputs, config).map_err(|e| Failure::from_core(e, "train"))?;
    let val = evaluate(&outcome.params, &inputs, config, Split::Val)
        .map_err(|e| Failure::from_core(e, "eval"))?;
    let test = if ds.kg.splits.test.is_empty() {
        None
    } else {
        Some(
            evaluate(&outcome.params, &inputs, config, Split::Test)
                .map_err(|e| Failure::from_core(e, "eval"))?,
        )
    };

    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let ck = Checkpoint::new(
        config,
        &outcome.params,
        outcome.best_epoch,
        outcome.best_score,
        outcome.class_weights,
    );
    let ck_path = out.join(CHECKPOINT_FILE);
    ck.save(&ck_path)
        .with_context(|| format!("writing {}", ck_path.display()))?;

    let log_path = out.join(EPOCH_LOG_FILE);
    let mut log = String::new();
    for e in &outcome.log {
        log.push_str(&serde_json::to_string(e).context("epoch log")?);
        log.push('\n');
    }
    fs::write(&log_path, log).with_context(|| format!("writing {}", log_path.display()))?;

    let summary_path = out.join(SUMMARY_FILE);
    let summary = serde_json::json!({
        "best_epoch": outcome.best_epoch,
        "best_score": outcome.best_score,
        "class_weights": outcome.class_weights,
        "val": val,
        "test": test,
    });
    let mut text = serde_json::to_string_pretty(&summary).context("summary")?;
    text.push('\n');
    fs::write(&summary_path, text)
        .with_context(|| format!("writing {}", summary_path.display()))?;

    Ok(TrainRun {
        outcome,
        val,
        test,
        files: vec![ck_path, log_path, summary_path],
    })
}

/// Evaluates a checkpoint on one split of `ds`, with the checkpoint's own
/// configuration.
pub fn eval_checkpoint(ds: &Dataset, checkpoint: &Path, split: Split) -> CliResult<MetricsReport> {
    let ck = Checkpoint::load(checkpoint)?;
    let config = ck.config.clone();
    config
        .validate()
        .map_err(|e| Failure::from_core(e, "checkpoint config"))?;
    let inputs = inputs(ds, &config)?;
    ck.matches(&init_model(&config, &inputs))
        .map_err(|m| DataError::file(checkpoint, format!("{m}; was it trained on this data?")))?;
    let params = ck.store().map_err(|m| DataError::file(checkpoint, m))?;
    if ds.kg.splits.get(split).is_empty() {
        return Err(Failure::config(format!(
            "split `{}` is empty",
            split.as_str()
        )));
    }
    evaluate(&params, &inputs, &config, split).map_err(|e| Failure::from_core(e, "eval"))
}

/// Small graph for gradient checking: `n` enterprises and `persons`
/// persons, holder/investor, branch and manager edges, industry and area
/// hyperedges.
pub fn gradcheck_graph(seed: u64, n: usize, persons: usize) -> CliResult<EnterpriseKg> {
    let mut c = SynthConfig::new(seed, n, persons, 1.0);
    c.relations = vec![
        Relation::HolderInvestor,
        Relation::Branch,
        Relation::Manager,
    ];
    c.hyperedge_types = vec![HyperedgeType::Industry, HyperedgeType::Area];
    c.n_industries = Some(3);
    c.n_areas = Some(2);
    gen_synthetic(&c).map_err(|e| Failure::from_core(e, "gradcheck graph"))
}

/// Central-difference check of the full training loss over every parameter
/// of a freshly initialized model.
pub fn gradcheck(kg: &EnterpriseKg, config: &TrainConfig, h: f64) -> CliResult<GradCheckReport> {
    let inputs =
        GraphInputs::new(kg, config, None).map_err(|e| Failure::from_core(e, "gradcheck"))?;
    let (nodes, labels) = inputs
        .labeled(Split::Train)
        .map_err(|e| Failure::from_core(e, "gradcheck"))?;
    let weights = class_weights(config.class_weights, &labels)
        .map_err(|e| Failure::from_core(e, "gradcheck"))?;
    let params = init_model(config, &inputs);
    grad_check_params(
        |tape, bound| {
            let f = forward(tape, &inputs, bound, config)?;
            loss(tape, f.probs, &nodes, &labels, weights)
        },
        &params,
        h,
    )
    .map_err(|e| Failure::from_core(e, "gradcheck"))
}

/// Dimensions a sweep may vary.
pub const SWEEP_PARAMS: [&str; 4] = ["input_dim", "output_dim", "lawsuit_dim", "supplement_dim"];

pub fn with_dim(config: &TrainConfig, param: &str, value: usize) -> CliResult<TrainConfig> {
    let mut c = config.clone();
    match param {
        "input_dim" => c.input_dim = value,
        "output_dim" => c.output_dim = value,
        "lawsuit_dim" => c.lawsuit_dim = value,
        "supplement_dim" => c.supplement_dim = value,
        other => {
            return Err(Failure::config(format!(
                "cannot sweep `{other}`; choose one of {}",
                SWEEP_PARAMS.join(", ")
            )))
        }
    }
    c.validate().map_err(|e| Failure::from_core(e, "sweep"))?;
    Ok(c)
}

/// Trains once per grid value, in parallel, and reports test metrics in
/// grid order. Supplied embeddings are only used when their width matches.
pub fn sweep(
    ds: &Dataset,
    base: &TrainConfig,
    param: &str,
    grid: &[usize],
) -> CliResult<Vec<SweepRow>> {
    if ds.kg.splits.test.is_empty() {
        return Err(Failure::config(
            "sweep reports test metrics; the test split is empty",
        ));
    }
    let configs = grid
        .iter()
        .map(|&v| with_dim(base, param, v))
        .collect::<CliResult<Vec<_>>>()?;
    let results: Vec<CliResult<SweepRow>> = std::thread::scope(|scope| {
        let handles: Vec<_> = configs
            .iter()
            .zip(grid)
            .map(|(config, &value)| {
                scope.spawn(move || -> CliResult<SweepRow> {
                    let mut local = ds.clone();
                    let keep = local
                        .supplement
                        .as_ref()
                        .and_then(|m| m.values().next())
                        .is_some_and(|v| v.len() == config.supplement_dim);
                    if !keep {
                        local.supplement = None::<BTreeMap<String, Vec<f64>>>;
                    }
                    let inputs = inputs(&local, config)?;
                    let outcome =
                        train(&inputs, config).map_err(|e| Failure::from_core(e, "sweep"))?;
                    let metrics = evaluate(&outcome.params, &inputs, config, Split::Test)
                        .map_err(|e| Failure::from_core(e, "sweep"))?;
                    Ok(SweepRow {
                        value,
                        best_epoch: outcome.best_epoch,
                        metrics,
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join().unwrap_or_else(|_| {
                    Err(Failure::Runtime(anyhow::anyhow!("sweep worker panicked")))
                })
            })
            .collect()
    });
    results.into_iter().collect()
}

pub fn parse_ttest(raw: &str) -> CliResult<TTestVariant> {
    match raw.to_ascii_lowercase().as_str() {
        "welch" => Ok(TTestVariant::Welch),
        "pooled" | "student" => Ok(TTestVariant::Pooled),
        other => Err(Failure::config(format!(
            "unknown t-test variant `{other}`; use welch or pooled"
        ))),
    }
}

pub fn parse_split(raw: &str) -> CliResult<Split> {
    Split::ALL
        .into_iter()
        .find(|s| s.as_str() == raw || (raw == "validation" && *s == Split::Val))
        .ok_or_else(|| Failure::config(format!("unknown split `{raw}`; use train, val or test")))
}
