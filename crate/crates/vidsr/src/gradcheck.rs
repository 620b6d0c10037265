//! Finite-difference verification of analytic gradients.
//!
//! The checker evaluates a scalar-valued function twice per input element
//! with a central difference of step `1e-5` (in `f64`) and compares against
//! the gradients produced by one backward pass. It is deliberately
//! independent of the backward implementations: only forward evaluations are
//! used on the numeric side.

use crate::error::Result;
use crate::tensor::{Tensor, TensorData};

/// Outcome of a gradient check.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub passed: bool,
    pub tolerance: f64,
    pub worst_rel_err: f64,
    /// (input index, element index) of the worst disagreement.
    pub worst_at: (usize, usize),
    pub elements_checked: usize,
}

impl std::fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}: worst rel err {:.3e} at input {} elem {} ({} elements, tol {:.1e})",
            if self.passed { "pass" } else { "FAIL" },
            self.worst_rel_err,
            self.worst_at.0,
            self.worst_at.1,
            self.elements_checked,
            self.tolerance
        )
    }
}

pub const FD_STEP: f64 = 1e-5;

/// Checks the analytic gradient of `f` with respect to every input.
///
/// `f` must be a pure function of its inputs returning a scalar tensor; it is
/// re-invoked for each perturbed evaluation, so any operation graph it builds
/// internally is rebuilt from scratch.
pub fn gradient_check<F>(f: F, inputs: &[TensorData<f64>], tolerance: f64) -> Result<GradCheckReport>
where
    F: Fn(&[Tensor<f64>]) -> Result<Tensor<f64>>,
{
    // Analytic gradients.
    let leaves: Vec<Tensor<f64>> = inputs
        .iter()
        .map(|d| Tensor::leaf(d.clone(), true))
        .collect();
    let out = f(&leaves)?;
    out.backward()?;
    let analytic: Vec<Option<TensorData<f64>>> = leaves.iter().map(|l| l.grad()).collect();

    let eval = |perturbed: &[TensorData<f64>]| -> Result<f64> {
        let leaves: Vec<Tensor<f64>> = perturbed
            .iter()
            .map(|d| Tensor::leaf(d.clone(), false))
            .collect();
        Ok(f(&leaves)?.item())
    };

    let mut worst = 0.0f64;
    let mut worst_at = (0usize, 0usize);
    let mut checked = 0usize;
    let mut work: Vec<TensorData<f64>> = inputs.to_vec();
    for (ii, input) in inputs.iter().enumerate() {
        for ei in 0..input.numel() {
            let orig = input.data()[ei];
            work[ii].data_mut()[ei] = orig + FD_STEP;
            let plus = eval(&work)?;
            work[ii].data_mut()[ei] = orig - FD_STEP;
            let minus = eval(&work)?;
            work[ii].data_mut()[ei] = orig;

            let numeric = (plus - minus) / (2.0 * FD_STEP);
            let a = analytic[ii].as_ref().map_or(0.0, |g| g.data()[ei]);
            let denom = a.abs().max(numeric.abs()).max(1e-6);
            let rel = (a - numeric).abs() / denom;
            checked += 1;
            if rel > worst {
                worst = rel;
                worst_at = (ii, ei);
            }
        }
    }
    Ok(GradCheckReport {
        passed: worst < tolerance,
        tolerance,
        worst_rel_err: worst,
        worst_at,
        elements_checked: checked,
    })
}
