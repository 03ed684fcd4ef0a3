use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Denominator floor for the relative error, so that gradients near zero are
/// compared on an absolute scale.
pub const REL_ERROR_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// `max |a - n| / max(|a|, |n|, REL_ERROR_FLOOR)` over all entries.
    pub max_rel_error: f64,
    pub worst_index: Option<usize>,
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    pub tolerance: f64,
    pub passed: bool,
}

/// Compares the tape gradient of `f` at `point` with central differences.
///
/// `f` receives a fresh tape and the handle of `point` (registered as a
/// parameter) and must return a scalar. Non-finite differences count as
/// failures.
pub fn gradient_check<F>(f: F, point: &Tensor, tolerance: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    let mut tape = Tape::new();
    let p = tape.param(point.clone());
    let out = f(&mut tape, p)?;
    let grads = tape.backward(out)?;
    let analytic = grads.get_or_zeros(p, point).into_data();

    let eval = |x: Tensor| -> Result<f64> {
        let mut tape = Tape::new();
        let p = tape.param(x);
        let out = f(&mut tape, p)?;
        tape.value(out).item().ok_or(Error::NonScalarLoss {
            rows: tape.value(out).rows(),
            cols: tape.value(out).cols(),
        })
    };

    let mut numeric = Vec::with_capacity(point.len());
    let mut max_rel_error: f64 = 0.0;
    let mut worst_index = None;
    for i in 0..point.len() {
        let mut plus = point.clone();
        plus.data_mut()[i] += FD_STEP;
        let mut minus = point.clone();
        minus.data_mut()[i] -= FD_STEP;
        let n = match (eval(plus), eval(minus)) {
            (Ok(fp), Ok(fm)) => (fp - fm) / (2.0 * FD_STEP),
            _ => f64::NAN,
        };
        numeric.push(n);
        let a = analytic[i];
        let err = if n.is_finite() && a.is_finite() {
            (a - n).abs() / a.abs().max(n.abs()).max(REL_ERROR_FLOOR)
        } else {
            f64::INFINITY
        };
        if err > max_rel_error || worst_index.is_none() {
            max_rel_error = max_rel_error.max(err);
            worst_index = Some(i);
        }
    }
    Ok(GradCheckReport {
        max_rel_error,
        worst_index,
        analytic,
        numeric,
        tolerance,
        passed: max_rel_error < tolerance,
    })
}
