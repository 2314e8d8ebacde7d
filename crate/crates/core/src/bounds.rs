//! Closed-form lower bounds on the number of training samples needed for the
//! necessary conditions of unique complete-dictionary recovery to hold.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub m: usize,
    pub theta: f64,
    pub epsilon: f64,
    /// Counting bound with `|Omega|` replaced by its mean `theta m n`, solved
    /// for the smallest self-consistent `n`: `(m - 1) / (1 - theta)`.
    pub n0: f64,
    pub n1: f64,
    pub n2: f64,
    pub n3: f64,
    pub n_star: f64,
    pub n_star_rounded: u64,
}

/// `m + |Omega| / m - 1`: fewer samples leave the recovery system underdetermined.
pub fn compute_n0(m: usize, omega_size: usize) -> f64 {
    m as f64 + omega_size as f64 / m as f64 - 1.0
}

/// `(m - 1)/(1 - theta) * (a + sqrt(a^2 - 1))` with `a = 1 - log_term / (4 (m - 1)(1 - theta))`.
fn quadratic_root(m: f64, theta: f64, log_term: f64) -> f64 {
    let a = 1.0 - log_term / (4.0 * (m - 1.0) * (1.0 - theta));
    (m - 1.0) / (1.0 - theta) * (a + (a * a - 1.0).sqrt())
}

pub fn n1(m: usize, theta: f64, epsilon: f64) -> f64 {
    let mf = m as f64;
    quadratic_root(mf, theta, epsilon.ln() / mf)
}

pub fn n2(m: usize, theta: f64, epsilon: f64) -> f64 {
    let mf = m as f64;
    quadratic_root(mf, theta, epsilon.ln() - mf.ln())
}

pub fn n3(m: usize, theta: f64, epsilon: f64) -> f64 {
    let mf = m as f64;
    (epsilon.ln() - mf.ln() - (mf - 1.0).ln()) / (1.0 - theta * (1.0 - theta)).ln()
}

pub fn compute_bounds(m: usize, theta: f64, epsilon: f64) -> Result<BoundReport> {
    if m < 2 {
        return Err(Error::Domain(format!("m = {m} must be at least 2")));
    }
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::Domain(format!("theta = {theta} must lie in (0, 1)")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Domain(format!("epsilon = {epsilon} must lie in (0, 1)")));
    }
    let (b1, b2, b3) = (n1(m, theta, epsilon), n2(m, theta, epsilon), n3(m, theta, epsilon));
    let n_star = b2.max(b3);
    Ok(BoundReport {
        m,
        theta,
        epsilon,
        n0: (m as f64 - 1.0) / (1.0 - theta),
        n1: b1,
        n2: b2,
        n3: b3,
        n_star,
        // f64::round rounds half away from zero.
        n_star_rounded: n_star.round() as u64,
    })
}

/// Limit of `n / m` above which all three conditions hold asymptotically.
pub fn asymptotic_threshold(theta: f64) -> Result<f64> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::Domain(format!("theta = {theta} must lie in (0, 1)")));
    }
    Ok(1.0 / (1.0 - theta))
}
