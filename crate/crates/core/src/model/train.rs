use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::ekg::{Label, Split};
use crate::error::{Error, Result};
use crate::numeric::{cosine_annealing_lr, AdamState, Tape};
use crate::params::ParamStore;

use super::{forward, init_model, loss, ClassWeights, GraphInputs, MetricsReport, TrainConfig};

/// Metrics of the parameters at the start of one epoch, before its update.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Step size of this epoch's update; `None` for the closing evaluation
    /// of the final parameters.
    pub lr: Option<f64>,
    pub loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
    pub val_f1: f64,
    pub val_auc: Option<f64>,
    pub score: f64,
    pub best_score: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters with the best validation score.
    pub params: ParamStore,
    pub best_epoch: usize,
    pub best_score: f64,
    pub log: Vec<EpochLog>,
    /// `(survive, bankrupt)` loss weights used.
    pub class_weights: (f64, f64),
}

/// Resolves the configured class weights against the train labels.
pub fn class_weights(weights: ClassWeights, train: &[Label]) -> Result<(f64, f64)> {
    match weights {
        ClassWeights::Uniform => Ok((1.0, 1.0)),
        ClassWeights::Fixed { survive, bankrupt } => Ok((survive, bankrupt)),
        ClassWeights::Balanced => {
            let bankrupt = train.iter().filter(|&&l| l == Label::Bankrupt).count();
            if bankrupt == 0 {
                return Err(Error::Config(String::from(
                    "balanced class weights need a bankrupt enterprise in the train split",
                )));
            }
            Ok((1.0, (train.len() - bankrupt) as f64 / bankrupt as f64))
        }
    }
}

fn split_nodes(inputs: &GraphInputs, split: Split, name: &str) -> Result<(Vec<usize>, Vec<Label>)> {
    let (nodes, labels) = inputs.labeled(split)?;
    if nodes.is_empty() {
        return Err(Error::Config(alloc::format!("the {name} split is empty")));
    }
    Ok((nodes, labels))
}

fn select(scores: &[f64], nodes: &[usize]) -> Vec<f64> {
    nodes.iter().map(|&i| scores[i]).collect()
}

/// Full-batch training with Adam and a cosine step-size schedule. The
/// parameters scoring best on validation (mean of accuracy and F1) are
/// kept; ties go to the earlier epoch.
pub fn train(inputs: &GraphInputs, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let (train_nodes, train_labels) = split_nodes(inputs, Split::Train, "train")?;
    let (val_nodes, val_labels) = split_nodes(inputs, Split::Val, "validation")?;
    let weights = class_weights(config.class_weights, &train_labels)?;

    let mut params = init_model(config, inputs);
    let mut adam = AdamState::new(&params, config.lr_max);
    let mut best: Option<(f64, usize, ParamStore)> = None;
    let mut log = Vec::with_capacity(config.epochs + 1);

    for epoch in 0..=config.epochs {
        let mut tape = Tape::new();
        let bound = params.bind(&mut tape);
        let f = forward(&mut tape, inputs, &bound, config).map_err(|e| match e {
            Error::NonFinite { .. } => Error::NonFiniteLoss { epoch },
            other => other,
        })?;
        let l = loss(&mut tape, f.probs, &train_nodes, &train_labels, weights)?;
        let loss_value = tape.value(l).item();
        if !loss_value.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        let scores = bankrupt_column(tape.value(f.probs));
        let train_m = MetricsReport::compute(&select(&scores, &train_nodes), &train_labels);
        let val_m = MetricsReport::compute(&select(&scores, &val_nodes), &val_labels);
        let score = val_m.selection_score();
        if best.as_ref().is_none_or(|(s, _, _)| score > *s) {
            best = Some((score, epoch, params.clone()));
        }

        let lr = (epoch < config.epochs)
            .then(|| cosine_annealing_lr(epoch, config.epochs, config.lr_max, config.lr_min))
            .transpose()?;
        log.push(EpochLog {
            epoch,
            lr,
            loss: loss_value,
            train_acc: train_m.accuracy,
            val_acc: val_m.accuracy,
            val_f1: val_m.f1,
            val_auc: val_m.auc,
            score,
            best_score: best.as_ref().map_or(score, |b| b.0),
        });
        let Some(lr) = lr else { break };

        let grads = bound.gradients(&tape.backward(l)?);
        drop(bound);
        adam.lr = lr;
        adam.update(&mut params, &grads)?;
    }

    let (best_score, best_epoch, params) = best.expect("at least one evaluation");
    Ok(TrainOutcome {
        params,
        best_epoch,
        best_score,
        log,
        class_weights: weights,
    })
}

fn bankrupt_column(probs: &crate::numeric::Tensor) -> Vec<f64> {
    (0..probs.rows()).map(|r| probs.get(r, 1)).collect()
}

/// Bankruptcy probability of every enterprise.
pub fn predict_scores(
    params: &ParamStore,
    inputs: &GraphInputs,
    config: &TrainConfig,
) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape);
    let f = forward(&mut tape, inputs, &bound, config)?;
    Ok(bankrupt_column(tape.value(f.probs)))
}

pub fn evaluate(
    params: &ParamStore,
    inputs: &GraphInputs,
    config: &TrainConfig,
    split: Split,
) -> Result<MetricsReport> {
    let (nodes, labels) = split_nodes(inputs, split, split.as_str())?;
    let scores = predict_scores(params, inputs, config)?;
    Ok(MetricsReport::compute(&select(&scores, &nodes), &labels))
}
