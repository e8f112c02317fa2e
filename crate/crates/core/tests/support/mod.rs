//! Independent reference computations and graph builders shared by the
//! integration tests. Nothing here calls the code under test except to build
//! inputs.
#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use rand::Rng;

use riskgraph_core::ekg::{
    gen_synthetic, EnterpriseKg, HyperedgeType, Label, Relation, SynthConfig,
};
use riskgraph_core::model::{GraphInputs, TrainConfig};
use riskgraph_core::numeric::Tensor;
use riskgraph_core::rng::{stream, StreamRng};

pub fn rng(seed: u64, purpose: &str) -> StreamRng {
    stream(seed, purpose)
}

/// Random hyperedges over `n` nodes; some nodes may be left uncovered.
pub fn random_hyperedges(rng: &mut StreamRng, n: usize) -> Vec<Vec<usize>> {
    let m = rng.random_range(1..=n);
    (0..m)
        .map(|_| {
            let size = rng.random_range(1..=n.min(5));
            let mut members: Vec<usize> = Vec::new();
            while members.len() < size {
                let v = rng.random_range(0..n);
                if !members.contains(&v) {
                    members.push(v);
                }
            }
            members
        })
        .collect()
}

pub fn random_tensor(rng: &mut StreamRng, rows: usize, cols: usize) -> Tensor {
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    Tensor::matrix(rows, cols, data).unwrap()
}

/// Dense normalized hypergraph operator built entry by entry from the
/// incidence matrix: `sum_e H(u,e) w_e H(v,e) / (De(e) sqrt(Dv(u) Dv(v)))`.
/// Both degrees are plain membership counts; uncovered nodes have degree 1
/// and so give zero rows.
pub fn brute_theta(n: usize, edges: &[Vec<usize>], weights: &[f64]) -> Vec<Vec<f64>> {
    let h = |v: usize, e: usize| if edges[e].contains(&v) { 1.0 } else { 0.0 };
    let dv: Vec<f64> = (0..n)
        .map(|v| {
            let d: f64 = (0..edges.len()).map(|e| h(v, e)).sum();
            if d == 0.0 {
                1.0
            } else {
                d
            }
        })
        .collect();
    let de: Vec<f64> = (0..edges.len())
        .map(|e| (0..n).map(|v| h(v, e)).sum())
        .collect();
    let mut out = vec![vec![0.0; n]; n];
    for (u, row) in out.iter_mut().enumerate() {
        for (v, cell) in row.iter_mut().enumerate() {
            for e in 0..edges.len() {
                *cell += h(u, e) * weights[e] * h(v, e) / de[e];
            }
            *cell /= (dv[u] * dv[v]).sqrt();
        }
    }
    out
}

pub fn dense_matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let inner = b.len();
    let cols = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| (0..inner).map(|k| row[k] * b[k][j]).sum())
                .collect()
        })
        .collect()
}

pub fn to_rows(t: &Tensor) -> Vec<Vec<f64>> {
    (0..t.rows()).map(|r| t.row(r).to_vec()).collect()
}

pub fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| {
            assert_eq!(x.len(), y.len());
            x.iter().zip(y).map(|(p, q)| (p - q).abs())
        })
        .fold(0.0, f64::max)
}

/// Fraction of (positive, negative) pairs ranked correctly, ties counting
/// one half.
pub fn brute_auc(scores: &[f64], labels: &[Label]) -> Option<f64> {
    let pos: Vec<f64> = pick(scores, labels, Label::Bankrupt);
    let neg: Vec<f64> = pick(scores, labels, Label::Survive);
    if pos.is_empty() || neg.is_empty() {
        return None;
    }
    let mut wins = 0.0;
    for p in &pos {
        for q in &neg {
            if p > q {
                wins += 1.0;
            } else if p == q {
                wins += 0.5;
            }
        }
    }
    Some(wins / (pos.len() as f64 * neg.len() as f64))
}

fn pick(scores: &[f64], labels: &[Label], class: Label) -> Vec<f64> {
    scores
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l == class)
        .map(|(&s, _)| s)
        .collect()
}

pub fn rational(x: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(x))
}

fn exact_mean(xs: &[i64]) -> BigRational {
    xs.iter().map(|&x| rational(x)).sum::<BigRational>() / rational(xs.len() as i64)
}

fn exact_ss(xs: &[i64]) -> BigRational {
    let m = exact_mean(xs);
    xs.iter()
        .map(|&x| {
            let d = rational(x) - &m;
            &d * &d
        })
        .sum()
}

/// Exact Pearson `r^2` and the sign of `r`.
pub fn exact_r2(x: &[i64], y: &[i64]) -> (BigRational, i32) {
    let (mx, my) = (exact_mean(x), exact_mean(y));
    let sxy: BigRational = x
        .iter()
        .zip(y)
        .map(|(&a, &b)| (rational(a) - &mx) * (rational(b) - &my))
        .sum();
    let sign = if sxy.is_zero() {
        0
    } else if sxy.is_positive() {
        1
    } else {
        -1
    };
    (&sxy * &sxy / (exact_ss(x) * exact_ss(y)), sign)
}

/// Exact `(t^2, sign of t, df)` of the two-sample t statistic, `a` minus `b`.
pub fn exact_t2(a: &[i64], b: &[i64], welch: bool) -> (BigRational, i32, BigRational) {
    let (na, nb) = (rational(a.len() as i64), rational(b.len() as i64));
    let one = rational(1);
    let va = exact_ss(a) / (&na - &one);
    let vb = exact_ss(b) / (&nb - &one);
    let diff = exact_mean(a) - exact_mean(b);
    let (se2, df) = if welch {
        let (qa, qb) = (&va / &na, &vb / &nb);
        let df = (&qa + &qb) * (&qa + &qb) / (&qa * &qa / (&na - &one) + &qb * &qb / (&nb - &one));
        (qa + qb, df)
    } else {
        let df = &na + &nb - rational(2);
        let pooled = ((&na - &one) * va + (&nb - &one) * vb) / &df;
        (pooled * (one.clone() / &na + one / &nb), df)
    };
    let sign = if diff.is_zero() {
        0
    } else if diff.is_positive() {
        1
    } else {
        -1
    };
    (&diff * &diff / se2, sign, df)
}

pub fn to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap()
}

/// Two-sided Student-t tail `P(|T| >= |t|)` for integer degrees of freedom,
/// from the closed-form trigonometric series of the central probability.
pub fn t_two_sided_integer_df(t: f64, df: u32) -> f64 {
    assert!(df >= 1);
    let theta = (t.abs() / f64::from(df).sqrt()).atan();
    let (s, c) = theta.sin_cos();
    let c2 = c * c;
    let central = if df % 2 == 1 {
        let mut sum = 0.0;
        if df > 1 {
            let mut term = 1.0;
            sum = 1.0;
            let mut k = 1;
            while 2 * k + 1 < df {
                term *= c2 * f64::from(2 * k) / f64::from(2 * k + 1);
                sum += term;
                k += 1;
            }
        }
        2.0 / std::f64::consts::PI * (theta + s * c * sum)
    } else {
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1;
        while 2 * k < df {
            term *= c2 * f64::from(2 * k - 1) / f64::from(2 * k);
            sum += term;
            k += 1;
        }
        s * sum
    };
    1.0 - central
}

/// Twelve-node graph: 10 enterprises, 2 persons, holder/investor, branch and
/// manager edges, industry and area hyperedges.
pub fn twelve_node_kg(seed: u64) -> EnterpriseKg {
    let mut c = SynthConfig::new(seed, 10, 2, 1.0);
    c.relations = vec![
        Relation::HolderInvestor,
        Relation::Branch,
        Relation::Manager,
    ];
    c.hyperedge_types = vec![HyperedgeType::Industry, HyperedgeType::Area];
    c.n_industries = Some(3);
    c.n_areas = Some(2);
    gen_synthetic(&c).unwrap()
}

/// A small configuration that keeps every branch and block active.
pub fn small_config(seed: u64) -> TrainConfig {
    TrainConfig {
        input_dim: 5,
        output_dim: 4,
        lawsuit_dim: 6,
        supplement_dim: 3,
        seed,
        ..TrainConfig::default()
    }
}

pub fn inputs(kg: &EnterpriseKg, config: &TrainConfig) -> GraphInputs {
    GraphInputs::new(kg, config, None).unwrap()
}
