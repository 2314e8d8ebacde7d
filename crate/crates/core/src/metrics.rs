//! Dictionary recovery error with greedy atom matching, and PSNR.

use crate::error::{Error, Result};
use crate::model::Dictionary;
use crate::numerics::Matrix;

/// Default threshold on the recovery error for declaring exact recovery.
pub const EXACT_RECOVERY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryError {
    pub r_err: f64,
    /// `matching[p]` is the ground-truth atom assigned to estimated atom `p`.
    pub matching: Vec<usize>,
}

/// Mean of `1 - |<d_hat_p, d0_{j_p}>|` over estimated atoms `p` in index
/// order, where `j_p` is the still-unmatched ground-truth atom with the
/// largest absolute inner product (lowest index on ties). Both dictionaries
/// are column-normalized first.
pub fn recovery_error(d_hat: &Dictionary, d0: &Dictionary) -> Result<RecoveryError> {
    if d_hat.atoms().shape() != d0.atoms().shape() {
        return Err(Error::dims(
            "recovery_error",
            format!("{:?} vs {:?}", d_hat.atoms().shape(), d0.atoms().shape()),
        ));
    }
    let (a, _) = d_hat.normalize();
    let (b, _) = d0.normalize();
    let gram = a.atoms().transpose() * b.atoms();
    let l = gram.nrows();
    let mut free = vec![true; l];
    let mut matching = Vec::with_capacity(l);
    let mut total = 0.0;
    for p in 0..l {
        let mut best = usize::MAX;
        let mut best_val = f64::NEG_INFINITY;
        for j in (0..l).filter(|&j| free[j]) {
            let v = gram[(p, j)].abs();
            if v > best_val {
                best_val = v;
                best = j;
            }
        }
        free[best] = false;
        matching.push(best);
        total += 1.0 - best_val.min(1.0);
    }
    Ok(RecoveryError {
        r_err: (total / l as f64).clamp(0.0, 1.0),
        matching,
    })
}

pub fn is_exact_recovery(d_hat: &Dictionary, d0: &Dictionary, tol: f64) -> Result<bool> {
    Ok(recovery_error(d_hat, d0)?.r_err <= tol)
}

/// `10 log10(peak^2 / MSE)`; `+inf` for identical inputs.
pub fn psnr(reference: &Matrix, test: &Matrix, peak: f64) -> Result<f64> {
    if reference.shape() != test.shape() {
        return Err(Error::dims(
            "psnr",
            format!("{:?} vs {:?}", reference.shape(), test.shape()),
        ));
    }
    let mse = (reference - test).norm_squared() / reference.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

/// Formats a PSNR value, printing `inf` for identical images.
pub fn format_db(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{v:.2}")
    }
}
