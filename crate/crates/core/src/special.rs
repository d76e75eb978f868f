//! Regularized incomplete beta function with input checks.

use crate::error::{invalid, Result};

pub use statrs::function::beta::ln_beta;

/// `I_x(a, b)` for `a, b > 0` and `x` in `[0, 1]`.
pub fn beta_inc(a: f64, b: f64, x: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) || !(0.0..=1.0).contains(&x) {
        return Err(invalid(format!(
            "incomplete beta needs a, b > 0 and 0 <= x <= 1, got ({a}, {b}, {x})"
        )));
    }
    statrs::function::beta::checked_beta_reg(a, b, x).map_err(|e| invalid(e.to_string()))
}
