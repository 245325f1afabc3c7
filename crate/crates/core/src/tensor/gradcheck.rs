//! Central-difference gradient checking.
//!
//! The error for one coordinate is `|analytic - numeric| / max(1, |analytic|)`;
//! checks report the maximum over all coordinates.

use super::{Graph, Tensor, Var};
use crate::error::{Error, Result};

/// Default step for central differences.
pub const DEFAULT_EPSILON: f64 = 1e-5;

/// Tolerance used by the gradient-check suite.
pub const TOLERANCE: f64 = 1e-4;

/// Compares the tape gradient of `f` at `x` against central differences.
///
/// `f` receives a fresh graph and the variable holding `x`, and must return a
/// scalar. It is evaluated twice at `x` first; differing results are reported
/// as [`Error::NonDeterministic`].
pub fn grad_check<F>(f: F, x: &Tensor, epsilon: f64) -> Result<f64>
where
    F: Fn(&mut Graph, Var) -> Result<Var>,
{
    grad_check_with_fault(f, x, epsilon, None)
}

/// [`grad_check`] with the analytic pass run under
/// [`Graph::inject_backward_fault`]; the numeric pass is unaffected.
#[doc(hidden)]
pub fn grad_check_with_fault<F>(f: F, x: &Tensor, epsilon: f64, fault: Option<(&str, f64)>) -> Result<f64>
where
    F: Fn(&mut Graph, Var) -> Result<Var>,
{
    let mut g = Graph::new();
    if let Some((op, factor)) = fault {
        g.inject_backward_fault(op, factor);
    }
    let xv = g.param(x.clone());
    let out = f(&mut g, xv)?;
    g.backward(out)?;
    let analytic = g.grad(xv).cloned().unwrap_or_else(|| Tensor::zeros(x.shape().to_vec()));

    let value = |t: &Tensor| -> Result<f64> {
        let mut g = Graph::new();
        let v = g.constant(t.clone());
        let out = f(&mut g, v)?;
        Ok(g.value(out).item())
    };
    finite_difference_error(&analytic, x, epsilon, value)
}

/// Compares a supplied analytic gradient against central differences of
/// `value` around `x`.
pub fn finite_difference_error<F>(analytic: &Tensor, x: &Tensor, epsilon: f64, value: F) -> Result<f64>
where
    F: Fn(&Tensor) -> Result<f64>,
{
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
    }
    if analytic.shape() != x.shape() {
        return Err(Error::Shape(format!(
            "analytic gradient {:?} vs input {:?}",
            analytic.shape(),
            x.shape()
        )));
    }
    let first = value(x)?;
    let second = value(x)?;
    if first.to_bits() != second.to_bits() {
        return Err(Error::NonDeterministic(format!(
            "repeated evaluation gave {first} then {second}"
        )));
    }

    let mut probe = x.clone();
    let mut worst: f64 = 0.0;
    for i in 0..x.numel() {
        let orig = x.data()[i];
        probe.data_mut()[i] = orig + epsilon;
        let plus = value(&probe)?;
        probe.data_mut()[i] = orig - epsilon;
        let minus = value(&probe)?;
        probe.data_mut()[i] = orig;
        let numeric = (plus - minus) / (2.0 * epsilon);
        let a = analytic.data()[i];
        worst = worst.max((a - numeric).abs() / a.abs().max(1.0));
    }
    Ok(worst)
}
