use crate::error::{Error, Result};

/// Outcome of a finite-difference gradient comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    /// `max_i |analytic_i - numeric_i| / max(1, |numeric_i|)`.
    pub max_rel_error: f64,
    /// Coordinate where the maximum occurred.
    pub worst_index: usize,
}

impl GradCheck {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error < tol
    }
}

/// Compares `analytic` against central differences of `f` at `params`.
pub fn grad_check<F>(mut f: F, params: &[f64], analytic: &[f64], eps: f64) -> Result<GradCheck>
where
    F: FnMut(&[f64]) -> f64,
{
    if params.len() != analytic.len() {
        return Err(Error::shape(
            "grad_check",
            format!("{} params, {} gradient entries", params.len(), analytic.len()),
        ));
    }
    if !(1e-7..=1e-3).contains(&eps) {
        return Err(Error::config("eps", format!("{eps} outside [1e-7, 1e-3]")));
    }
    let mut probe = params.to_vec();
    let mut worst = GradCheck {
        max_rel_error: 0.0,
        worst_index: 0,
    };
    for i in 0..params.len() {
        probe[i] = params[i] + eps;
        let up = f(&probe);
        probe[i] = params[i] - eps;
        let down = f(&probe);
        probe[i] = params[i];
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFinite(format!("grad_check probe at coordinate {i}")));
        }
        let numeric = (up - down) / (2.0 * eps);
        let rel = (analytic[i] - numeric).abs() / numeric.abs().max(1.0);
        if rel > worst.max_rel_error {
            worst = GradCheck {
                max_rel_error: rel,
                worst_index: i,
            };
        }
    }
    Ok(worst)
}
