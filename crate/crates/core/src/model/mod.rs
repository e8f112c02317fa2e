//! Fusion of intra-risk and contagion risk, the prediction head, the loss,
//! training and evaluation.
//!
//! ```text
//! z_cont = (z + z^) W_cont
//! z_bar  = lambda * GELU(z_cont) + (1 - lambda) * MLP(h)
//! y~     = softmax(z_bar W_p + b_p)
//! L      = -sum_i w_{y_i} ln y~_{i, y_i}
//! ```
//!
//! `z` is the hypergraph output and `z^` the heterogeneous-graph output for
//! enterprises. Only enterprises are classified.

mod config;
mod inputs;
mod metrics;
mod train;

use alloc::vec::Vec;

pub use config::*;
pub use inputs::{stand_in_supplement, GraphInputs};
pub use metrics::{auc, Confusion, MetricsReport, THRESHOLD};
pub use train::{class_weights, evaluate, predict_scores, train, EpochLog, TrainOutcome};

use crate::ekg::{Label, FEATURE_COUNT};
use crate::error::Result;
use crate::heter::{self, HeterTrace};
use crate::hyper::{self, epsilon_name, w_hp_name};
use crate::intra::{self, range_index, ATTR_DIM};
use crate::numeric::{Index, Tape, Tensor, Var};
use crate::params::{init_params, Bound, ParamSpec, ParamStore};

/// Floor of the log argument in the loss.
pub const LOG_FLOOR: f64 = 1e-12;

/// Every parameter of the model for `inputs` under `config`.
pub fn param_specs(config: &TrainConfig, inputs: &GraphInputs) -> Vec<ParamSpec> {
    let d = config.input_dim;
    let dp = config.output_dim;
    let sup = config.supplement_dim;
    let mut specs = Vec::new();

    match config.intra_variant {
        IntraVariant::Encoder => {
            let (a, b, c) = config.lawsuit_widths();
            specs.push(ParamSpec::glorot("intra.cause_table", 3, a));
            specs.push(ParamSpec::glorot("intra.court_table", 4, b));
            specs.push(ParamSpec::glorot("intra.verdict_table", 4, c));
            specs.push(ParamSpec::glorot("intra.W_risk", config.lawsuit_dim, d));
            specs.push(ParamSpec::glorot("intra.W_e", ATTR_DIM + d + sup, d));
            if config.trainable_decay {
                // overwritten with the configured rates by init_model
                specs.push(ParamSpec::constant("intra.log_w", &[2, 1], 0.0));
            }
        }
        IntraVariant::Frequency => {
            specs.push(ParamSpec::glorot("intra.W_freq", FEATURE_COUNT + sup, d));
        }
    }

    for l in 0..config.hyper_layers {
        let rows = if l == 0 { d } else { dp };
        specs.push(ParamSpec::glorot(w_hp_name(l), rows, dp));
    }
    let types = inputs.hyper.types.len().max(1) as f64;
    for (kind, _) in &inputs.hyper.types {
        specs.push(ParamSpec::constant(epsilon_name(kind), &[], 1.0 / types));
    }

    specs.extend(heter::param_specs(config, &inputs.heter));

    let mlp_in = match config.fusion_mlp_input {
        MlpInput::Intra => d,
        MlpInput::Heter => dp,
    };
    specs.push(ParamSpec::glorot("fusion.W_cont", dp, dp));
    specs.push(ParamSpec::constant("fusion.lambda_raw", &[], 0.0));
    specs.push(ParamSpec::glorot("fusion.mlp.W1", mlp_in, dp));
    specs.push(ParamSpec::constant("fusion.mlp.b1", &[dp], 0.0));
    specs.push(ParamSpec::glorot("fusion.mlp.W2", dp, dp));
    specs.push(ParamSpec::constant("fusion.mlp.b2", &[dp], 0.0));
    specs.push(ParamSpec::glorot("predict.W_p", dp, 2));
    specs.push(ParamSpec::constant("predict.b_p", &[2], 0.0));
    specs
}

/// Fresh parameters. Trainable decay rates start at the configured values.
pub fn init_model(config: &TrainConfig, inputs: &GraphInputs) -> ParamStore {
    let mut store = init_params(&param_specs(config, inputs), config.seed);
    if store.contains("intra.log_w") {
        let rates = [
            crate::math::ln(config.w_recent),
            crate::math::ln(config.w_old),
        ];
        store.insert(
            "intra.log_w",
            Tensor::matrix(2, 1, rates.to_vec()).expect("2 x 1"),
        );
    }
    store
}

/// Intermediate values of one forward pass.
#[derive(Clone, Debug)]
pub struct Forward {
    /// Intra-risk representations of all nodes, `n x d`.
    pub h: Var,
    /// Hypergraph output, `n_e x d'`.
    pub z: Var,
    /// Heterogeneous-graph output for enterprises, `n_e x d'`.
    pub z_hat: Var,
    pub lambda: Var,
    pub z_bar: Var,
    /// Class probabilities `(survive, bankrupt)` per enterprise.
    pub probs: Var,
    pub trace: Option<HeterTrace>,
}

/// `lambda GELU((z + z^) W_cont) + (1 - lambda) MLP(m)`.
pub fn fuse(
    tape: &mut Tape,
    z: Var,
    z_hat: Var,
    mlp_input: Var,
    params: &Bound,
    config: &TrainConfig,
) -> Result<(Var, Var)> {
    let sum = tape.add(z, z_hat)?;
    let cont = tape.matmul(sum, params.var("fusion.W_cont")?)?;
    let cont = tape.gelu(cont, config.gelu)?;
    let lambda = tape.sigmoid(params.var("fusion.lambda_raw")?)?;
    let a = tape.matmul(mlp_input, params.var("fusion.mlp.W1")?)?;
    let a = tape.add_row(a, params.var("fusion.mlp.b1")?)?;
    let a = tape.relu(a)?;
    let m = tape.matmul(a, params.var("fusion.mlp.W2")?)?;
    let m = tape.add_row(m, params.var("fusion.mlp.b2")?)?;
    let left = tape.scale(cont, lambda)?;
    let one_minus = tape.affine(lambda, -1.0, 1.0)?;
    let right = tape.scale(m, one_minus)?;
    Ok((tape.add(left, right)?, lambda))
}

/// `softmax(z_bar W_p + b_p)` row by row.
pub fn predict(tape: &mut Tape, z_bar: Var, params: &Bound) -> Result<Var> {
    let logits = tape.matmul(z_bar, params.var("predict.W_p")?)?;
    let logits = tape.add_row(logits, params.var("predict.b_p")?)?;
    tape.softmax_rows(logits)
}

/// Full forward pass over the graph.
pub fn forward(
    tape: &mut Tape,
    inputs: &GraphInputs,
    params: &Bound,
    config: &TrainConfig,
) -> Result<Forward> {
    let n_e = inputs.n_enterprises();
    let h = intra::encode_intra(tape, &inputs.intra, params, config)?;
    let enterprises = range_index(0, n_e);
    let h_e = if inputs.n_nodes() == n_e {
        h
    } else {
        tape.gather_rows(h, enterprises.clone())?
    };
    let zeros = || Tensor::zeros(&[n_e, config.output_dim]);

    let z = if config.ablation == Ablation::NoHyper {
        tape.constant(zeros())
    } else {
        hyper::hyper_encode(tape, h_e, &inputs.hyper, params, config)?
    };
    let (z_hat, trace) = if config.ablation == Ablation::NoHeter {
        (tape.constant(zeros()), None)
    } else {
        let (all, trace) = heter::heter_encode(tape, h, &inputs.heter, params, config)?;
        let z_hat = if inputs.n_nodes() == n_e {
            all
        } else {
            tape.gather_rows(all, enterprises)?
        };
        (z_hat, Some(trace))
    };
    let mlp_input = match config.fusion_mlp_input {
        MlpInput::Intra => h_e,
        MlpInput::Heter => z_hat,
    };
    let (z_bar, lambda) = fuse(tape, z, z_hat, mlp_input, params, config)?;
    let probs = predict(tape, z_bar, params)?;
    Ok(Forward {
        h,
        z,
        z_hat,
        lambda,
        z_bar,
        probs,
        trace,
    })
}

/// `-sum_i w_{y_i} ln max(p_{i, y_i}, 1e-12)` over `nodes`.
/// `weights` is `(survive, bankrupt)`.
pub fn loss(
    tape: &mut Tape,
    probs: Var,
    nodes: &[usize],
    labels: &[Label],
    weights: (f64, f64),
) -> Result<Var> {
    let index: Index = nodes.to_vec().into();
    let rows = tape.gather_rows(probs, index)?;
    let cols: Index = labels
        .iter()
        .map(|l| usize::from(l.bit()))
        .collect::<Vec<_>>()
        .into();
    let picked = tape.pick_cols(rows, cols)?;
    let logs = tape.ln_clamped(picked, LOG_FLOOR)?;
    let w: Vec<f64> = labels
        .iter()
        .map(|l| match l {
            Label::Survive => weights.0,
            Label::Bankrupt => weights.1,
        })
        .collect();
    let w = tape.constant(Tensor::matrix(labels.len(), 1, w)?);
    let weighted = tape.mul(logs, w)?;
    let total = tape.sum(weighted)?;
    tape.affine(total, -1.0, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ekg::{gen_synthetic, SynthConfig};
    use crate::numeric::gelu;

    fn small() -> (GraphInputs, TrainConfig) {
        let kg = gen_synthetic(&SynthConfig::new(11, 24, 6, 1.0)).unwrap();
        let config = TrainConfig {
            input_dim: 4,
            output_dim: 3,
            lawsuit_dim: 5,
            supplement_dim: 3,
            ..TrainConfig::default()
        };
        (GraphInputs::new(&kg, &config, None).unwrap(), config)
    }

    #[test]
    fn probabilities_sum_to_one() {
        let (inputs, config) = small();
        let params = init_model(&config, &inputs);
        let mut tape = Tape::new();
        let b = params.bind(&mut tape);
        let f = forward(&mut tape, &inputs, &b, &config).unwrap();
        let p = tape.value(f.probs);
        assert_eq!(p.rows(), inputs.n_enterprises());
        for r in 0..p.rows() {
            assert!((p.row(r)[0] + p.row(r)[1] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_head_gives_even_odds() {
        let mut p = ParamStore::new();
        p.insert("predict.W_p", Tensor::zeros(&[2, 2]));
        p.insert("predict.b_p", Tensor::zeros(&[2]));
        let mut tape = Tape::new();
        let b = p.bind(&mut tape);
        let z = tape.constant(Tensor::matrix(1, 2, vec![3.0, -1.0]).unwrap());
        let y = predict(&mut tape, z, &b).unwrap();
        assert_eq!(tape.value(y).data(), &[0.5, 0.5]);

        p.insert("predict.b_p", Tensor::vector(vec![3f64.ln(), 0.0]));
        let mut tape = Tape::new();
        let b = p.bind(&mut tape);
        let z = tape.constant(Tensor::zeros(&[1, 2]));
        let y = predict(&mut tape, z, &b).unwrap();
        assert!((tape.value(y).data()[0] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn loss_examples() {
        let mut tape = Tape::new();
        let p = tape.constant(Tensor::matrix(2, 2, vec![0.5, 0.5, 0.0, 1.0]).unwrap());
        let one = loss(&mut tape, p, &[0], &[Label::Bankrupt], (1.0, 1.0)).unwrap();
        assert!((tape.value(one).item() - 2f64.ln()).abs() < 1e-15);
        let sure = loss(&mut tape, p, &[1], &[Label::Bankrupt], (1.0, 1.0)).unwrap();
        assert_eq!(tape.value(sure).item(), 0.0);
        let wrong = loss(&mut tape, p, &[1], &[Label::Survive], (1.0, 1.0)).unwrap();
        assert!((tape.value(wrong).item() + LOG_FLOOR.ln()).abs() < 1e-9);
    }

    #[test]
    fn doubling_bankrupt_weight_doubles_its_terms() {
        let mut tape = Tape::new();
        let p = tape.constant(Tensor::matrix(2, 2, vec![0.3, 0.7, 0.6, 0.4]).unwrap());
        let labels = [Label::Bankrupt, Label::Survive];
        let eval = |tape: &mut Tape, nodes: &[usize], l: &[Label], w| {
            let v = loss(tape, p, nodes, l, w).unwrap();
            tape.value(v).item()
        };
        let base = eval(&mut tape, &[0, 1], &labels, (1.0, 1.0));
        let doubled = eval(&mut tape, &[0, 1], &labels, (1.0, 2.0));
        let bankrupt = eval(&mut tape, &[0], &labels[..1], (1.0, 1.0));
        assert!((doubled - base - bankrupt).abs() < 1e-15);
    }

    fn fuse_with(lambda_raw: f64, z: Tensor, z_hat: Tensor) -> (Tensor, Tensor, Tensor) {
        let config = TrainConfig {
            input_dim: 2,
            output_dim: 2,
            ..TrainConfig::default()
        };
        let mut p = ParamStore::new();
        p.insert(
            "fusion.W_cont",
            Tensor::matrix(2, 2, vec![1.0, 0.5, -0.3, 2.0]).unwrap(),
        );
        p.insert("fusion.lambda_raw", Tensor::scalar(lambda_raw));
        p.insert("fusion.mlp.W1", Tensor::identity(2));
        p.insert("fusion.mlp.b1", Tensor::vector(vec![0.1, 0.0]));
        p.insert(
            "fusion.mlp.W2",
            Tensor::matrix(2, 2, vec![1.0, 1.0, 0.0, 1.0]).unwrap(),
        );
        p.insert("fusion.mlp.b2", Tensor::vector(vec![0.0, -0.2]));
        let mut tape = Tape::new();
        let b = p.bind(&mut tape);
        let zv = tape.constant(z.clone());
        let zh = tape.constant(z_hat.clone());
        let h = tape.constant(Tensor::matrix(1, 2, vec![0.7, -0.4]).unwrap());
        let (out, _) = fuse(&mut tape, zv, zh, h, &b, &config).unwrap();
        let cont = z
            .zip_map(&z_hat, |a, b| a + b)
            .matmul(p.get("fusion.W_cont").unwrap())
            .unwrap()
            .map(|v| gelu(v, GeluKind::Tanh));
        // MLP by hand: relu([0.8, -0.4]) = [0.8, 0], then [0.8, 0.8 - 0.2]
        let mlp = Tensor::matrix(1, 2, vec![0.8, 0.6]).unwrap();
        (tape.value(out).clone(), cont, mlp)
    }

    use crate::numeric::GeluKind;

    #[test]
    fn fusion_endpoints() {
        let z = Tensor::matrix(1, 2, vec![0.4, 1.0]).unwrap();
        let zh = Tensor::matrix(1, 2, vec![-0.1, 0.3]).unwrap();
        let (out, cont, _) = fuse_with(40.0, z.clone(), zh.clone());
        assert!(out.max_abs_diff(&cont) < 1e-12);
        let (out, _, mlp) = fuse_with(-40.0, z.clone(), zh);
        assert!(out.max_abs_diff(&mlp) < 1e-12);
        // z^ = -z cancels the contagion term
        let (out, _, mlp) = fuse_with(0.0, z.clone(), z.map(|v| -v));
        assert!(out.max_abs_diff(&mlp.map(|v| 0.5 * v)) < 1e-15);
    }

    #[test]
    fn no_hyper_leaves_hyper_gradients_zero() {
        let (inputs, mut config) = small();
        config.ablation = Ablation::NoHyper;
        let params = init_model(&config, &inputs);
        let mut tape = Tape::new();
        let b = params.bind(&mut tape);
        let f = forward(&mut tape, &inputs, &b, &config).unwrap();
        let (nodes, labels) = inputs.labeled(crate::ekg::Split::Train).unwrap();
        let l = loss(&mut tape, f.probs, &nodes, &labels, (1.0, 1.0)).unwrap();
        let grads = b.gradients(&tape.backward(l).unwrap());
        let mut seen = 0;
        for (name, g) in params.names().iter().zip(&grads) {
            if name.starts_with("hyper.") {
                seen += 1;
                assert!(g.data().iter().all(|&v| v == 0.0), "{name}");
            }
        }
        assert!(seen >= 3);
    }

    #[test]
    fn trainable_decay_starts_at_configured_rates() {
        let (inputs, mut config) = small();
        config.trainable_decay = true;
        let params = init_model(&config, &inputs);
        let w = params.get("intra.log_w").unwrap();
        assert!((w.data()[0].exp() - 0.1).abs() < 1e-15 && w.data()[1].abs() < 1e-15);
    }
}
