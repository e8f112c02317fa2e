//! Acceptance suite. Prints one PASS or FAIL line per criterion and fails
//! if any criterion fails. Criteria 10 and 11 need the released SME dataset
//! and are reported as skipped.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::collections::BTreeMap;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use riskgraph::commands::{gradcheck, gradcheck_graph};
use riskgraph_core::ekg::{
    gen_synthetic, HyperedgeType, IncidenceMatrix, Label, Relation, Split, SynthConfig,
};
use riskgraph_core::heter::{self, heter_encode, GraphEdge, HeterGraph};
use riskgraph_core::hyper::{
    build_theta, epsilon_name, hyper_conv_layer, hyper_encode, w_hp_name, HyperGraph, ThetaOperator,
};
use riskgraph_core::model::{
    auc, evaluate, forward, init_model, train, Ablation, ConvForm, MetricsReport, TrainConfig,
};
use riskgraph_core::numeric::{Tape, Tensor};
use riskgraph_core::params::{init_params, ParamSpec, ParamStore};
use riskgraph_core::rng::StreamRng;
use riskgraph_core::stats::{build_table1, correlation, t_test, TTestVariant};

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// 1: central differences on the full loss of a 12-node graph

fn gradient_fidelity() -> Verdict {
    let start = Instant::now();
    let kg = gradcheck_graph(1, 10, 2).map_err(|e| e.to_string())?;
    let config = TrainConfig {
        seed: 1,
        ..TrainConfig::default()
    };
    let r = gradcheck(&kg, &config, 1e-6).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let worst = r.worst.as_ref().map_or(String::new(), |(name, i)| {
        format!(
            " at {name}[{i}] (analytic {:.4e}, numeric {:.4e})",
            r.analytic, r.numeric
        )
    });
    check(
        kg.node_count() == 12 && r.max_rel_error <= 1e-4 && secs < 30.0,
        format!(
            "{} nodes, {} coordinates, max relative error {:.3e}{worst}; resolution {:.2e}, {} unresolved; {secs:.1}s",
            kg.node_count(),
            r.checked,
            r.max_rel_error,
            r.resolution,
            r.unresolved
        ),
    )
}

// 2: hypergraph operator and convolution against dense brute force

fn hypergraph_operator() -> Verdict {
    let mut worst: f64 = 0.0;
    for seed in 0..50 {
        let mut rng = support::rng(seed, "acceptance.hypergraph");
        let n = rng.random_range(1..=15);
        let edges = support::random_hyperedges(&mut rng, n);
        let inc = IncidenceMatrix::from_members(HyperedgeType::Industry, n, &edges)
            .map_err(|e| e.to_string())?;
        let unit = vec![1.0; edges.len()];
        let dense = support::brute_theta(n, &edges, &unit);
        let theta = build_theta(&inc, None).map_err(|e| e.to_string())?;
        worst = worst.max(support::max_abs_diff(&support::to_rows(&theta), &dense));

        let (d_in, d_out) = (rng.random_range(1..=6), rng.random_range(1..=6));
        let x = support::random_tensor(&mut rng, n, d_in);
        let w = support::random_tensor(&mut rng, d_in, d_out);
        let xw = support::dense_matmul(&support::to_rows(&x), &support::to_rows(&w));
        let mixed = support::dense_matmul(&dense, &xw);
        let expected: Vec<Vec<f64>> = xw
            .iter()
            .zip(&mixed)
            .map(|(a, b)| a.iter().zip(b).map(|(p, q)| p - q).collect())
            .collect();
        let op = Arc::new(ThetaOperator::new(&inc));
        let mut tape = Tape::new();
        let (xv, wv) = (tape.constant(x), tape.constant(w));
        let out = hyper_conv_layer(&mut tape, xv, &op, wv, ConvForm::Laplacian)
            .map_err(|e| e.to_string())?;
        worst = worst.max(support::max_abs_diff(
            &support::to_rows(tape.value(out)),
            &expected,
        ));
    }
    check(
        worst <= 1e-10,
        format!("50 random hypergraphs, max abs deviation {worst:.2e}"),
    )
}

// 3: attention, holder weights, output weights and probabilities sum to one

fn worst_segment_sum(w: &Tensor, segment: &[usize]) -> f64 {
    let mut sums: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (row, &s) in segment.iter().enumerate() {
        let acc = sums.entry(s).or_insert_with(|| vec![0.0; w.cols()]);
        for (a, v) in acc.iter_mut().zip(w.row(row)) {
            *a += v;
        }
    }
    sums.values()
        .flatten()
        .map(|v| (v - 1.0).abs())
        .fold(0.0, f64::max)
}

fn normalization() -> Verdict {
    let mut rng = support::rng(3, "acceptance.normalization");
    let mut worst: f64 = 0.0;
    let mut groups = 0usize;
    for pass in 0..100u64 {
        let kg = gen_synthetic(&SynthConfig::new(
            pass,
            rng.random_range(10..=30),
            rng.random_range(2..=10),
            rng.random_range(0.0..=1.0),
        ))
        .map_err(|e| e.to_string())?;
        let config = TrainConfig {
            heter_blocks: rng.random_range(1..=2),
            ..support::small_config(pass)
        };
        let inputs = support::inputs(&kg, &config);
        let params = init_model(&config, &inputs);
        let mut tape = Tape::new();
        let bound = params.bind(&mut tape);
        let f = forward(&mut tape, &inputs, &bound, &config).map_err(|e| e.to_string())?;
        let probs = tape.value(f.probs);
        for r in 0..probs.rows() {
            worst = worst.max((probs.row(r).iter().sum::<f64>() - 1.0).abs());
        }
        let trace = f.trace.ok_or("forward pass without trace")?;
        for e in &trace.entity {
            worst = worst.max(worst_segment_sum(tape.value(e.weights), &e.dst));
            groups += 1;
        }
        for (beta, owner) in &trace.beta {
            worst = worst.max(worst_segment_sum(tape.value(*beta), owner));
            groups += 1;
        }
    }
    check(
        worst <= 1e-12 && groups > 0,
        format!("100 forward passes, {groups} weight groups, max deviation {worst:.2e}"),
    )
}

// 4: relabeling nodes permutes the encoder outputs

fn permutation(rng: &mut StreamRng, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

fn permute_rows(x: &Tensor, perm: &[usize]) -> Tensor {
    let mut out = Tensor::zeros(&[x.rows(), x.cols()]);
    for (i, &p) in perm.iter().enumerate() {
        for (c, &v) in x.row(i).iter().enumerate() {
            out.set(p, c, v);
        }
    }
    out
}

fn hyper_output(
    n: usize,
    types: &[(HyperedgeType, Vec<Vec<usize>>)],
    x: &Tensor,
    params: &ParamStore,
    config: &TrainConfig,
) -> Tensor {
    let graph = HyperGraph {
        types: types
            .iter()
            .map(|(kind, edges)| {
                let inc = IncidenceMatrix::from_members(*kind, n, edges).unwrap();
                (
                    kind.as_str().to_string(),
                    Arc::new(ThetaOperator::new(&inc)),
                )
            })
            .collect(),
        n_enterprises: n,
    };
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape);
    let xv = tape.constant(x.clone());
    let z = hyper_encode(&mut tape, xv, &graph, &bound, config).unwrap();
    tape.value(z).clone()
}

fn hyper_relabel_diff(rng: &mut StreamRng, case: u64) -> f64 {
    let n = rng.random_range(2..=12);
    let config = TrainConfig {
        input_dim: 4,
        output_dim: 3,
        ..TrainConfig::default()
    };
    let types: Vec<_> = [HyperedgeType::Industry, HyperedgeType::Area]
        .into_iter()
        .map(|k| (k, support::random_hyperedges(rng, n)))
        .collect();
    let mut specs: Vec<ParamSpec> = (0..config.hyper_layers)
        .map(|l| ParamSpec::glorot(w_hp_name(l), if l == 0 { 4 } else { 3 }, 3))
        .collect();
    for (k, _) in &types {
        specs.push(ParamSpec::constant(
            epsilon_name(k.as_str()),
            &[],
            rng.random_range(0.1..1.0),
        ));
    }
    let params = init_params(&specs, case);
    let x = support::random_tensor(rng, n, 4);
    let perm = permutation(rng, n);
    let moved: Vec<_> = types
        .iter()
        .map(|(k, edges)| {
            (
                *k,
                edges
                    .iter()
                    .map(|m| m.iter().map(|&v| perm[v]).collect())
                    .collect(),
            )
        })
        .collect();
    let base = hyper_output(n, &types, &x, &params, &config);
    let after = hyper_output(n, &moved, &permute_rows(&x, &perm), &params, &config);
    permute_rows(&base, &perm).max_abs_diff(&after)
}

fn heter_output(
    graph: &HeterGraph,
    h: &Tensor,
    params: &ParamStore,
    config: &TrainConfig,
) -> Tensor {
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape);
    let hv = tape.constant(h.clone());
    let (out, _) = heter_encode(&mut tape, hv, graph, &bound, config).unwrap();
    tape.value(out).clone()
}

fn heter_relabel_diff(rng: &mut StreamRng, case: u64) -> f64 {
    let n_e = rng.random_range(2..=9);
    let n_p = rng.random_range(0..=3);
    let n = n_e + n_p;
    let config = TrainConfig {
        input_dim: 4,
        output_dim: 4,
        bn_identity: true,
        ..TrainConfig::default()
    };
    let mut edges = Vec::new();
    for _ in 0..rng.random_range(1..=2 * n) {
        let relation = Relation::ALL[rng.random_range(0..Relation::ALL.len())];
        let from_person = !matches!(relation, Relation::HolderInvestor | Relation::Branch);
        if from_person && n_p == 0 {
            continue;
        }
        let src = if from_person {
            n_e + rng.random_range(0..n_p)
        } else {
            rng.random_range(0..n_e)
        };
        edges.push(GraphEdge {
            src,
            dst: rng.random_range(0..n_e),
            relation,
            weight: relation.is_weighted().then(|| rng.random_range(0.1..2.0)),
        });
    }
    let graph = HeterGraph::new(n, n_e, &edges, false).unwrap();
    let params = init_params(&heter::param_specs(&config, &graph), case);
    let h = support::random_tensor(rng, n, 4);

    // enterprises and persons are relabeled within their own ranges
    let mut perm = permutation(rng, n_e);
    perm.extend(permutation(rng, n_p).into_iter().map(|p| p + n_e));
    let mut moved = edges.clone();
    moved.reverse();
    for e in &mut moved {
        e.src = perm[e.src];
        e.dst = perm[e.dst];
    }
    let moved_graph = HeterGraph::new(n, n_e, &moved, false).unwrap();
    let base = heter_output(&graph, &h, &params, &config);
    let after = heter_output(&moved_graph, &permute_rows(&h, &perm), &params, &config);
    permute_rows(&base, &perm).max_abs_diff(&after)
}

fn equivariance() -> Verdict {
    let mut rng = support::rng(4, "acceptance.relabel");
    let (mut hyper, mut heter): (f64, f64) = (0.0, 0.0);
    for case in 0..20 {
        hyper = hyper.max(hyper_relabel_diff(&mut rng, case));
        heter = heter.max(heter_relabel_diff(&mut rng, case));
    }
    check(
        hyper <= 1e-10 && heter <= 1e-10,
        format!(
            "20 relabelings each, max deviation hypergraph {hyper:.2e}, heterogeneous {heter:.2e}"
        ),
    )
}

// 5: AUC against pair counting, metrics against the confusion matrix

fn metrics() -> Verdict {
    let mut rng = support::rng(5, "acceptance.metrics");
    let (mut auc_mismatch, mut identity_mismatch, mut two_class) = (0, 0, 0);
    for _ in 0..200 {
        let n = rng.random_range(1..=50);
        let levels = rng.random_range(2..=20);
        let scores: Vec<f64> = (0..n)
            .map(|_| f64::from(rng.random_range(0..levels)) / f64::from(levels))
            .collect();
        let labels: Vec<Label> = (0..n)
            .map(|_| Label::from_bit(u8::from(rng.random_bool(0.4))).unwrap())
            .collect();
        let expected = support::brute_auc(&scores, &labels);
        two_class += usize::from(expected.is_some());
        auc_mismatch += usize::from(auc(&scores, &labels) != expected);

        let m = MetricsReport::compute(&scores, &labels);
        let c = m.confusion;
        let predicted = scores.iter().filter(|&&s| s >= 0.5).count();
        let positives = labels.iter().filter(|&&l| l == Label::Bankrupt).count();
        let mut ok = c.total() == n
            && c.tp + c.fp == predicted
            && c.tp + c.r#fn == positives
            && m.accuracy == (c.tp + c.tn) as f64 / n as f64;
        if c.tp + c.fp > 0 {
            ok &= m.precision == c.tp as f64 / (c.tp + c.fp) as f64;
        }
        if c.tp + c.r#fn > 0 {
            ok &= m.recall == c.tp as f64 / (c.tp + c.r#fn) as f64;
        }
        if m.precision + m.recall > 0.0 {
            ok &= m.f1 == 2.0 * m.precision * m.recall / (m.precision + m.recall);
        }
        identity_mismatch += usize::from(!ok);
    }
    check(
        auc_mismatch == 0 && identity_mismatch == 0,
        format!("200 instances ({two_class} with both classes): {auc_mismatch} AUC mismatches, {identity_mismatch} identity violations"),
    )
}

// 6: correlation and t statistics against exact rationals; null data is
// rarely starred

fn statistics() -> Verdict {
    let mut rng = support::rng(6, "acceptance.stats");
    let ints = |rng: &mut StreamRng, n: usize, lo: i64, hi: i64| -> Vec<i64> {
        (0..n).map(|_| rng.random_range(lo..=hi)).collect()
    };
    let varies = |xs: &[i64]| xs.iter().any(|&x| x != xs[0]);
    let floats = |xs: &[i64]| xs.iter().map(|&x| x as f64).collect::<Vec<f64>>();
    let (mut r_err, mut t_err): (f64, f64) = (0.0, 0.0);
    let mut done = 0;
    while done < 50 {
        let n = rng.random_range(3..=25);
        let x = ints(&mut rng, n, -30, 30);
        let y = ints(&mut rng, n, 0, 1);
        let (na, nb) = (rng.random_range(2..=15), rng.random_range(2..=15));
        let a = ints(&mut rng, na, -20, 20);
        let b = ints(&mut rng, nb, -20, 20);
        if !varies(&x) || !varies(&y) || !varies(&a) || !varies(&b) {
            continue;
        }
        let (r2, sign) = support::exact_r2(&x, &y);
        let r = correlation(&floats(&x), &floats(&y))
            .map_err(|e| e.to_string())?
            .r;
        r_err = r_err.max((r - f64::from(sign) * support::to_f64(&r2).sqrt()).abs());
        for (variant, welch) in [(TTestVariant::Welch, true), (TTestVariant::Pooled, false)] {
            let (t2, sign, _) = support::exact_t2(&a, &b, welch);
            let reference = f64::from(sign) * support::to_f64(&t2).sqrt();
            let t = t_test(&floats(&a), &floats(&b), variant)
                .map_err(|e| e.to_string())?
                .t;
            t_err = t_err.max((t - reference).abs() / reference.abs().max(1.0));
        }
        done += 1;
    }

    let (mut starred, mut rows) = (0, 0);
    for seed in 0..20 {
        let kg = gen_synthetic(&SynthConfig::new(seed, 300, 75, 0.0)).map_err(|e| e.to_string())?;
        for row in build_table1(&kg, TTestVariant::Welch)
            .map_err(|e| e.to_string())?
            .rows
        {
            if row.p_corr.is_some() {
                rows += 1;
                starred += usize::from(row.stars_corr() >= 2);
            }
        }
    }
    let share = starred as f64 / rows as f64;
    check(
        r_err <= 1e-10 && t_err <= 1e-10 && rows > 0 && share <= 0.15,
        format!(
            "50 samples: max error r {r_err:.2e}, t {t_err:.2e}; null data starred {starred} of {rows} rows ({:.1}%)",
            100.0 * share
        ),
    )
}

// 7: the model fits a small planted graph

fn overfit() -> Verdict {
    let start = Instant::now();
    let kg = gen_synthetic(&SynthConfig::new(0, 60, 15, 1.0)).map_err(|e| e.to_string())?;
    let config = TrainConfig::default();
    let out = train(&support::inputs(&kg, &config), &config).map_err(|e| e.to_string())?;
    let best = out.log.iter().map(|e| e.train_acc).fold(0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();
    check(
        best >= 0.98 && secs < 60.0,
        format!("60 enterprises, best train accuracy {best:.4}; {secs:.1}s"),
    )
}

// 8: removing any component costs test AUC

fn ablation_ordering() -> Verdict {
    let mut totals = [0.0; 4];
    for seed in 0..10 {
        let mut synth = SynthConfig::new(seed, 300, 75, 1.0);
        synth.hyperedge_types = vec![HyperedgeType::Industry];
        let kg = gen_synthetic(&synth).map_err(|e| e.to_string())?;
        for (k, ablation) in Ablation::ALL.into_iter().enumerate() {
            let config = TrainConfig {
                seed,
                ablation,
                ..TrainConfig::default()
            };
            let inputs = support::inputs(&kg, &config);
            let out = train(&inputs, &config).map_err(|e| e.to_string())?;
            let m =
                evaluate(&out.params, &inputs, &config, Split::Test).map_err(|e| e.to_string())?;
            totals[k] += m.auc.ok_or("test split lacks a class")?;
        }
    }
    let means: Vec<f64> = totals.iter().map(|t| t / 10.0).collect();
    let full = Ablation::ALL
        .iter()
        .position(|a| *a == Ablation::Full)
        .unwrap();
    let ok = means
        .iter()
        .enumerate()
        .all(|(k, &m)| k == full || means[full] >= m + 0.02);
    let listed: Vec<String> = Ablation::ALL
        .iter()
        .zip(&means)
        .map(|(a, m)| format!("{} {m:.4}", a.as_str()))
        .collect();
    check(
        ok,
        format!("mean test AUC over 10 seeds: {}", listed.join(", ")),
    )
}

// 9: two training runs of the binary write identical checkpoints

fn determinism() -> Verdict {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let bin = env!("CARGO_BIN_EXE_riskgraph");
    let run = |args: &[&str]| -> Result<(), String> {
        let out = Command::new(bin)
            .args(args)
            .output()
            .map_err(|e| e.to_string())?;
        check(
            out.status.success(),
            String::from_utf8_lossy(&out.stderr).into_owned(),
        )
        .map(drop)
    };
    let data = tmp.path().join("data");
    let data = data.to_str().unwrap();
    run(&["gen-synth", "--seed", "0", "--n", "60", "--out", data])?;
    let mut checkpoints = Vec::new();
    for k in 0..2 {
        let out = tmp.path().join(format!("run{k}"));
        run(&["train", "--data", data, "--out", out.to_str().unwrap()])?;
        checkpoints.push(fs::read(out.join("checkpoint.json")).map_err(|e| e.to_string())?);
    }
    check(
        checkpoints[0] == checkpoints[1],
        format!(
            "two runs, checkpoint of {} bytes each, identical: {}",
            checkpoints[0].len(),
            checkpoints[0] == checkpoints[1]
        ),
    )
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 9] = [
        ("gradient fidelity", gradient_fidelity),
        ("hypergraph operator", hypergraph_operator),
        ("normalization", normalization),
        ("permutation equivariance", equivariance),
        ("metrics", metrics),
        ("statistics", statistics),
        ("small-graph fit", overfit),
        ("ablation ordering", ablation_ordering),
        ("determinism", determinism),
    ];
    let mut failed = Vec::new();
    for (k, (name, run)) in criteria.into_iter().enumerate() {
        let verdict = panic::catch_unwind(AssertUnwindSafe(run))
            .unwrap_or_else(|_| Err("panicked".to_string()));
        match verdict {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail}", k + 1),
            Err(detail) => {
                println!("criterion {}: FAIL {name}: {detail}", k + 1);
                failed.push(k + 1);
            }
        }
    }
    println!("criterion 10: SKIPPED needs the SME dataset");
    println!("criterion 11: SKIPPED needs the SME dataset");
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
