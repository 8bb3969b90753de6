//! Central finite-difference gradient checking.

use crate::error::Result;
use crate::nn::graph::{Gradients, SetHandle};
use crate::nn::tensor::ParamSet;

/// Per-parameter maximum relative error between analytic and numeric
/// gradients.
#[derive(Debug, Clone, Default)]
pub struct GradCheckReport {
    pub entries: Vec<(String, f64)>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.entries.iter().map(|(_, e)| *e).fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&(String, f64)> {
        self.entries
            .iter()
            .max_by(|a, b| a.1.total_cmp(&b.1))
    }
}

/// `|a - n| / max(|a|, |n|, floor)`. The floor keeps vanishing gradients
/// from turning rounding noise into large relative errors.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    const FLOOR: f64 = 1e-6;
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR)
}

/// Compares the gradients returned by `loss_fn` with central differences of
/// step `h` for every entry of every parameter in `params`.
///
/// `loss_fn` evaluates the model on the given parameters and returns the loss,
/// the gradients of one backward pass, and the handle the set was registered
/// under.
pub fn gradient_check<F>(params: &mut ParamSet, h: f64, mut loss_fn: F) -> Result<GradCheckReport>
where
    F: FnMut(&ParamSet) -> Result<(f64, Gradients, SetHandle)>,
{
    let (_, grads, handle) = loss_fn(params)?;
    let ids: Vec<_> = params.ids().collect();
    let mut report = GradCheckReport::default();
    for id in ids {
        let n = params.get(id).len();
        let analytic = grads
            .get(handle, id)
            .map(<[f64]>::to_vec)
            .unwrap_or_else(|| vec![0.0; n]);
        let mut worst = 0.0f64;
        for j in 0..n {
            let orig = params.get(id).values()[j];
            params.get_mut(id).values_mut()[j] = orig + h;
            let (plus, _, _) = loss_fn(params)?;
            params.get_mut(id).values_mut()[j] = orig - h;
            let (minus, _, _) = loss_fn(params)?;
            params.get_mut(id).values_mut()[j] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            worst = worst.max(relative_error(analytic[j], numeric));
        }
        report.entries.push((params.name(id).to_string(), worst));
    }
    Ok(report)
}
