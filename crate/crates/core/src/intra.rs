//! Intra-risk encoder.
//!
//! Each visible lawsuit is embedded as `[cause | court | verdict]`, scaled by
//! the time decay `g = 1 / (1 + w * months)` and summed per enterprise. The
//! sum goes through `W_risk`, and the result is concatenated with the
//! normalized attributes and the supplement vector before the final map
//! `W_e`:
//!
//! ```text
//! h_i = [b_i | (sum_k g_ik s_ik) W_risk | u_i] W_e
//! ```
//!
//! Persons have no attributes or lawsuits, so only their supplement block
//! is non-zero.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::ekg::{EnterpriseKg, RECENT_MONTHS};
use crate::error::{domain, Result};
use crate::model::{Ablation, IntraVariant, TrainConfig};
use crate::numeric::{Index, Tape, Tensor, Var};
use crate::params::Bound;

/// Width of the attribute block.
pub const ATTR_DIM: usize = 3;

/// `1 / (1 + w * delta)` with the recent rate up to two years and the old
/// rate after.
pub fn time_decay(delta_months: f64, w_recent: f64, w_old: f64) -> Result<f64> {
    if !(delta_months >= 0.0) {
        return Err(domain(
            "time_decay",
            format!("negative interval {delta_months}"),
        ));
    }
    let w = if delta_months <= f64::from(RECENT_MONTHS) {
        w_recent
    } else {
        w_old
    };
    Ok(1.0 / (1.0 + w * delta_months))
}

/// All visible lawsuits of a graph, flattened for batched embedding.
#[derive(Clone, Debug, PartialEq)]
pub struct LawsuitBatch {
    /// Owning enterprise of each lawsuit.
    pub owner: Index,
    pub cause: Index,
    pub court: Index,
    pub verdict: Index,
    /// Whole months before observation, as a `K x 1` column.
    pub months: Tensor,
    /// 0 for recent lawsuits, 1 for older ones.
    pub regime: Index,
}

impl LawsuitBatch {
    pub fn from_kg(kg: &EnterpriseKg) -> Self {
        let mut owner = Vec::new();
        let mut cause = Vec::new();
        let mut court = Vec::new();
        let mut verdict = Vec::new();
        let mut months = Vec::new();
        let mut regime = Vec::new();
        for i in 0..kg.enterprises.len() {
            for (l, m) in kg.visible_lawsuits(i) {
                owner.push(i);
                cause.push(l.cause.table_row());
                court.push(l.court.index());
                verdict.push(l.verdict.index());
                months.push(f64::from(m));
                regime.push(usize::from(m > RECENT_MONTHS));
            }
        }
        let k = months.len();
        Self {
            owner: owner.into(),
            cause: cause.into(),
            court: court.into(),
            verdict: verdict.into(),
            months: Tensor::matrix(k, 1, months).expect("one month count per lawsuit"),
            regime: regime.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.owner.len()
    }

    pub fn is_empty(&self) -> bool {
        self.owner.is_empty()
    }
}

/// Constant inputs of the intra-risk encoder.
#[derive(Clone, Debug)]
pub struct IntraInputs {
    pub n_enterprises: usize,
    pub n_persons: usize,
    /// Normalized attributes, `n_e x 3`.
    pub attrs: Tensor,
    /// Normalized twelve-column count table, `n_e x 12`.
    pub frequency: Tensor,
    /// Supplement vectors for enterprises then persons.
    pub supplement: Tensor,
    pub lawsuits: LawsuitBatch,
}

/// Lawsuit embeddings `s`, `K x lawsuit_dim`.
pub fn embed_lawsuits(tape: &mut Tape, batch: &LawsuitBatch, params: &Bound) -> Result<Var> {
    let cause = tape.gather_rows(params.var("intra.cause_table")?, batch.cause.clone())?;
    let court = tape.gather_rows(params.var("intra.court_table")?, batch.court.clone())?;
    let verdict = tape.gather_rows(params.var("intra.verdict_table")?, batch.verdict.clone())?;
    tape.concat_cols(&[cause, court, verdict])
}

/// Decay factor per lawsuit, `K x 1`. Trainable rates are stored as logs.
pub fn decay_weights(
    tape: &mut Tape,
    batch: &LawsuitBatch,
    params: &Bound,
    config: &TrainConfig,
) -> Result<Var> {
    if config.trainable_decay {
        let rates = tape.exp(params.var("intra.log_w")?)?;
        let w = tape.gather_rows(rates, batch.regime.clone())?;
        let months = tape.constant(batch.months.clone());
        let wm = tape.mul(w, months)?;
        let denom = tape.affine(wm, 1.0, 1.0)?;
        return tape.recip(denom);
    }
    let data = batch
        .months
        .data()
        .iter()
        .map(|&m| time_decay(m, config.w_recent, config.w_old))
        .collect::<Result<Vec<f64>>>()?;
    Ok(tape.constant(Tensor::matrix(batch.len(), 1, data)?))
}

/// Per-enterprise lawsuit risk `h^r`, `n_e x input_dim`.
pub fn aggregate_lawsuits(
    tape: &mut Tape,
    batch: &LawsuitBatch,
    n_enterprises: usize,
    params: &Bound,
    config: &TrainConfig,
) -> Result<Var> {
    if batch.is_empty() {
        return Ok(tape.constant(Tensor::zeros(&[n_enterprises, config.input_dim])));
    }
    let s = embed_lawsuits(tape, batch, params)?;
    let g = decay_weights(tape, batch, params, config)?;
    let weighted = tape.mul_col(s, g)?;
    let summed = tape.segment_sum(weighted, batch.owner.clone(), n_enterprises)?;
    tape.matmul(summed, params.var("intra.W_risk")?)
}

/// Intra-risk representations `h` for enterprises then persons,
/// `(n_e + n_p) x input_dim`.
pub fn encode_intra(
    tape: &mut Tape,
    inputs: &IntraInputs,
    params: &Bound,
    config: &TrainConfig,
) -> Result<Var> {
    let n_e = inputs.n_enterprises;
    let n_p = inputs.n_persons;
    let sup_dim = inputs.supplement.cols();
    let ablate = config.ablation == Ablation::NoIntra;
    let u_e = tape.constant(rows_of(&inputs.supplement, 0, n_e));

    let (own, weight) = match config.intra_variant {
        IntraVariant::Encoder => {
            let (b, hr) = if ablate {
                let b = tape.constant(Tensor::zeros(&[n_e, ATTR_DIM]));
                let hr = tape.constant(Tensor::zeros(&[n_e, config.input_dim]));
                (b, hr)
            } else {
                let b = tape.constant(inputs.attrs.clone());
                let hr = aggregate_lawsuits(tape, &inputs.lawsuits, n_e, params, config)?;
                (b, hr)
            };
            (vec![b, hr], params.var("intra.W_e")?)
        }
        IntraVariant::Frequency => {
            let f = if ablate {
                Tensor::zeros(&[n_e, inputs.frequency.cols()])
            } else {
                inputs.frequency.clone()
            };
            (vec![tape.constant(f)], params.var("intra.W_freq")?)
        }
    };
    let own_width: usize = own.iter().map(|&v| tape.value(v).cols()).sum();
    let mut parts = own;
    parts.push(u_e);
    let mut all = tape.concat_cols(&parts)?;
    if n_p > 0 {
        let mut person = Tensor::zeros(&[n_p, own_width + sup_dim]);
        for p in 0..n_p {
            let src = inputs.supplement.row(n_e + p);
            let width = own_width + sup_dim;
            person.data_mut()[p * width + own_width..(p + 1) * width].copy_from_slice(src);
        }
        let person = tape.constant(person);
        all = tape.concat_rows(&[all, person])?;
    }
    tape.matmul(all, weight)
}

fn rows_of(t: &Tensor, start: usize, count: usize) -> Tensor {
    let cols = t.cols();
    Tensor::matrix(
        count,
        cols,
        t.data()[start * cols..(start + count) * cols].to_vec(),
    )
    .expect("row slice")
}

/// Shared index `0..n`.
pub(crate) fn range_index(start: usize, end: usize) -> Index {
    let v: Vec<usize> = (start..end).collect();
    Arc::from(v)
}
