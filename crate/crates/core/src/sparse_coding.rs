//! Orthogonal matching pursuit.

use nalgebra::{DVector, DVectorView};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dictionary, SparseCoeffs, SupportPattern};
use crate::numerics::{least_squares, Matrix};

/// Atoms must have unit norm within this tolerance.
pub const NORMALIZATION_TOL: f64 = 1e-9;
/// Stop once the residual falls below this fraction of `|y|`.
pub const RELATIVE_EXIT: f64 = 1e-12;
/// An atom whose component orthogonal to the selected span is shorter than
/// this is numerically dependent on them.
const DEPENDENCE_TOL: f64 = 1e-10;

/// Stopping rule. At least one of the two limits must be set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmpConfig {
    /// Maximum number of atoms per signal.
    pub k: Option<usize>,
    /// Stop when the residual l2 norm is at or below this value.
    pub residual_tol: Option<f64>,
}

impl OmpConfig {
    pub fn sparsity(k: usize) -> Self {
        Self {
            k: Some(k),
            residual_tol: None,
        }
    }

    pub fn residual(tol: f64) -> Self {
        Self {
            k: None,
            residual_tol: Some(tol),
        }
    }

    pub fn validate(&self, l: usize) -> Result<()> {
        match (self.k, self.residual_tol) {
            (None, None) => Err(Error::Config("OMP needs a sparsity or a residual limit".into())),
            (Some(k), _) if k > l => Err(Error::Config(format!("OMP sparsity {k} exceeds {l} atoms"))),
            (_, Some(t)) if !(t >= 0.0) => Err(Error::Config(format!("OMP residual tolerance {t} < 0"))),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Sparsity,
    ResidualTolerance,
    ExactFit,
    /// Every atom was tried or the signal dimension was exhausted.
    AtomsExhausted,
    /// The best atom was already selected or numerically dependent on the
    /// selection; the code holds the partial result up to that point.
    Breakdown,
}

#[derive(Debug, Clone)]
pub struct SparseCode {
    /// Atoms in selection order.
    pub support: Vec<usize>,
    /// Least-squares coefficients aligned with `support`.
    pub coeffs: Vec<f64>,
    /// Residual norm before the first selection and after each one.
    pub residual_history: Vec<f64>,
    pub stop: StopReason,
}

impl SparseCode {
    pub fn residual_norm(&self) -> f64 {
        *self.residual_history.last().unwrap()
    }
}

pub fn omp_encode(d: &Dictionary, y: &DVector<f64>, cfg: &OmpConfig) -> Result<SparseCode> {
    cfg.validate(d.l())?;
    d.check_normalized(NORMALIZATION_TOL)?;
    if y.len() != d.m() {
        return Err(Error::dims(
            "omp_encode",
            format!("signal length {} vs m = {}", y.len(), d.m()),
        ));
    }
    Ok(encode(d.atoms(), y.as_view(), cfg))
}

fn encode(atoms: &Matrix, y: DVectorView<f64>, cfg: &OmpConfig) -> SparseCode {
    let (m, l) = atoms.shape();
    let limit = cfg.k.unwrap_or(l).min(l).min(m);
    let y_norm = y.norm();
    let mut residual = y.into_owned();
    let mut history = vec![y_norm];
    let mut support: Vec<usize> = Vec::new();
    let mut selected = vec![false; l];
    // Orthonormal basis of the selected atoms and the triangular factor R
    // with D_S = Q R, both grown one column per step.
    let mut q: Vec<DVector<f64>> = Vec::new();
    let mut r = Matrix::zeros(limit, limit);

    let stop = loop {
        let rn = *history.last().unwrap();
        if rn <= RELATIVE_EXIT * y_norm || rn == 0.0 {
            break StopReason::ExactFit;
        }
        if cfg.residual_tol.is_some_and(|t| rn <= t) {
            break StopReason::ResidualTolerance;
        }
        if support.len() == limit {
            break if cfg.k.is_some_and(|k| k == limit) {
                StopReason::Sparsity
            } else {
                StopReason::AtomsExhausted
            };
        }

        let corr = atoms.tr_mul(&residual);
        let mut best = 0;
        let mut best_val = -1.0;
        for (j, c) in corr.iter().enumerate() {
            if c.abs() > best_val {
                best_val = c.abs();
                best = j;
            }
        }
        if selected[best] {
            break StopReason::Breakdown;
        }

        let atom = atoms.column(best);
        let mut v = atom.into_owned();
        let mut coords = DVector::zeros(q.len());
        // Two passes of Gram-Schmidt keep Q orthonormal to working precision.
        for _ in 0..2 {
            for (t, qt) in q.iter().enumerate() {
                let c = qt.dot(&v);
                coords[t] += c;
                v.axpy(-c, qt, 1.0);
            }
        }
        let diag = v.norm();
        if diag < DEPENDENCE_TOL {
            break StopReason::Breakdown;
        }
        v /= diag;
        let k = q.len();
        for t in 0..k {
            r[(t, k)] = coords[t];
        }
        r[(k, k)] = diag;

        let proj = v.dot(&residual);
        residual.axpy(-proj, &v, 1.0);
        q.push(v);
        support.push(best);
        selected[best] = true;
        history.push(residual.norm());
    };

    let coeffs = solve_upper(&r, &q, &y);
    SparseCode {
        support,
        coeffs,
        residual_history: history,
        stop,
    }
}

/// Back substitution for `R x = Q^T y`.
fn solve_upper(r: &Matrix, q: &[DVector<f64>], y: &DVectorView<f64>) -> Vec<f64> {
    let k = q.len();
    let mut x: Vec<f64> = q.iter().map(|qt| qt.dot(y)).collect();
    for i in (0..k).rev() {
        let mut s = x[i];
        for t in i + 1..k {
            s -= r[(i, t)] * x[t];
        }
        x[i] = s / r[(i, i)];
    }
    x
}

/// Column-wise OMP of `y`; the pattern collects each column's support.
pub fn omp_encode_all(d: &Dictionary, y: &Matrix, cfg: &OmpConfig) -> Result<SparseCoeffs> {
    cfg.validate(d.l())?;
    d.check_normalized(NORMALIZATION_TOL)?;
    if y.nrows() != d.m() {
        return Err(Error::dims(
            "omp_encode_all",
            format!("signals have {} rows, m = {}", y.nrows(), d.m()),
        ));
    }
    let n = y.ncols();
    let mut values = Matrix::zeros(d.l(), n);
    let mut entries = Vec::new();
    for j in 0..n {
        let code = encode(d.atoms(), y.column(j), cfg);
        for (&i, &c) in code.support.iter().zip(&code.coeffs) {
            if !c.is_finite() {
                return Err(Error::Column {
                    column: j,
                    source: Box::new(Error::NonFinite),
                });
            }
            values[(i, j)] = c;
            entries.push((i, j));
        }
    }
    let pattern = SupportPattern::from_entries(d.l(), n, entries)?;
    SparseCoeffs::new(values, pattern)
}

/// Least-squares coefficients of every column of `y` restricted to its
/// support in `pattern` (minimum-norm when the selected atoms are dependent).
pub fn pattern_coefficients(d: &Dictionary, y: &Matrix, pattern: &SupportPattern) -> Result<SparseCoeffs> {
    if y.nrows() != d.m() || pattern.l() != d.l() || pattern.n() != y.ncols() {
        return Err(Error::dims(
            "pattern_coefficients",
            format!(
                "y {:?}, dictionary {}x{}, pattern {}x{}",
                y.shape(),
                d.m(),
                d.l(),
                pattern.l(),
                pattern.n()
            ),
        ));
    }
    let mut values = Matrix::zeros(d.l(), y.ncols());
    for (j, support) in pattern.column_supports().iter().enumerate() {
        if support.is_empty() {
            continue;
        }
        let a = d.atoms().select_columns(support);
        let c = least_squares(&a, &y.columns(j, 1).into_owned()).map_err(|e| Error::Column {
            column: j,
            source: Box::new(e),
        })?;
        for (r, &i) in support.iter().enumerate() {
            values[(i, j)] = c[(r, 0)];
        }
    }
    SparseCoeffs::new(values, pattern.clone())
}
