//! Central finite-difference checks against tape gradients.

use alloc::string::String;

use super::{Tape, Tensor, Var};
use crate::error::{domain, Result};
use crate::math;
use crate::params::{Bound, ParamStore};

/// `|a - b| / max(|a|, |b|, 1e-8)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = math::abs(analytic).max(math::abs(numeric)).max(1e-8);
    math::abs(analytic - numeric) / denom
}

fn check_step(h: f64) -> Result<()> {
    if !(1e-7..=1e-4).contains(&h) {
        return Err(domain(
            "grad_check",
            alloc::format!("step {h} outside [1e-7, 1e-4]"),
        ));
    }
    Ok(())
}

/// Largest relative error between the tape gradient of `f` at `point` and
/// central differences with step `h`.
pub fn grad_check<F>(f: F, point: &Tensor, h: f64) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    check_step(h)?;
    let mut tape = Tape::new();
    let x = tape.param(point.clone());
    let y = f(&mut tape, x)?;
    let grads = tape.backward(y)?;
    let analytic = grads
        .get(x)
        .cloned()
        .unwrap_or_else(|| Tensor::zeros(point.shape()));

    let eval = |p: Tensor| -> Result<f64> {
        let mut tape = Tape::new();
        let x = tape.param(p);
        let y = f(&mut tape, x)?;
        Ok(tape.value(y).item())
    };

    let mut worst = 0.0f64;
    for i in 0..point.len() {
        let mut plus = point.clone();
        plus.data_mut()[i] += h;
        let mut minus = point.clone();
        minus.data_mut()[i] -= h;
        let numeric = (eval(plus)? - eval(minus)?) / (2.0 * h);
        worst = worst.max(relative_error(analytic.data()[i], numeric));
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter name and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
    /// Loss at the unperturbed point.
    pub loss: f64,
    /// One rounding unit of the loss expressed as a gradient,
    /// `eps * |loss| / (2h)`. Central differences cannot resolve gradient
    /// differences much below this.
    pub resolution: f64,
    /// Coordinates whose gradient magnitude is under `1e4 * resolution`, so
    /// that a relative error of `1e-4` is below what the differences resolve.
    pub unresolved: usize,
}

/// Finite-difference check of a scalar loss over every coordinate of every
/// parameter in `params`.
pub fn grad_check_params<F>(f: F, params: &ParamStore, h: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &Bound) -> Result<Var>,
{
    check_step(h)?;
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape);
    let loss = f(&mut tape, &bound)?;
    let grads = tape.backward(loss)?;
    let analytic = bound.gradients(&grads);
    let base = tape.value(loss).item();
    let resolution = f64::EPSILON * math::abs(base) / (2.0 * h);

    let eval = |store: &ParamStore| -> Result<f64> {
        let mut tape = Tape::new();
        let bound = store.bind(&mut tape);
        let loss = f(&mut tape, &bound)?;
        Ok(tape.value(loss).item())
    };

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
        loss: base,
        resolution,
        unresolved: 0,
    };
    let mut probe = params.clone();
    for (p, name) in params.names().iter().enumerate() {
        for i in 0..params.values()[p].len() {
            let original = params.values()[p].data()[i];
            probe.values_mut()[p].data_mut()[i] = original + h;
            let up = eval(&probe)?;
            probe.values_mut()[p].data_mut()[i] = original - h;
            let down = eval(&probe)?;
            probe.values_mut()[p].data_mut()[i] = original;

            let numeric = (up - down) / (2.0 * h);
            let a = analytic[p].data()[i];
            let err = relative_error(a, numeric);
            report.checked += 1;
            if math::abs(a).max(math::abs(numeric)) < 1e4 * resolution {
                report.unresolved += 1;
            }
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = err.max(report.max_rel_error);
                report.worst = Some((name.clone(), i));
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}
