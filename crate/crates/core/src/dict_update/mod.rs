//! Dictionary-update algorithms and the alternating learning driver.
//!
//! Every BLOTLESS solver works on the inverse formulation `H Y = X`, where
//! `H` is the (pseudo-)inverse of a non-overcomplete (sub-)dictionary and
//! `X` is constrained to a given sparsity pattern.

mod baselines;
mod blotless;
mod learn;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{SparseCoeffs, ZERO_ATOM_TOL};
use crate::numerics::Matrix;

pub use baselines::{ksvd_update, mod_update};
pub use blotless::{
    block_ranges, blotless_block_update, blotless_ls, dictionary_from_inverse, itertls_update, partls_update,
    stls_objective, stls_update, tls_truncation, StlsResult, TlsTruncation,
};
pub use learn::{
    learn, learn_tracked, update_dictionary, write_history_csv, IterationRecord, LearnConfig, LearnResult,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MethodKind {
    Mod,
    Ksvd,
    BlotlessLs,
    BlotlessPartls,
    BlotlessItertls,
    BlotlessStls,
}

impl MethodKind {
    pub const ALL: [MethodKind; 6] = [
        MethodKind::Mod,
        MethodKind::Ksvd,
        MethodKind::BlotlessLs,
        MethodKind::BlotlessPartls,
        MethodKind::BlotlessItertls,
        MethodKind::BlotlessStls,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MethodKind::Mod => "MOD",
            MethodKind::Ksvd => "KSVD",
            MethodKind::BlotlessLs => "BLOTLESS_LS",
            MethodKind::BlotlessPartls => "BLOTLESS_PARTLS",
            MethodKind::BlotlessItertls => "BLOTLESS_ITERTLS",
            MethodKind::BlotlessStls => "BLOTLESS_STLS",
        }
    }

    pub fn is_blotless(self) -> bool {
        !matches!(self, MethodKind::Mod | MethodKind::Ksvd)
    }
}

impl std::fmt::Display for MethodKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for MethodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_uppercase().replace('-', "_");
        MethodKind::ALL
            .into_iter()
            .find(|k| k.name() == key)
            .ok_or_else(|| Error::Config(format!("unknown update method {s:?}")))
    }
}

/// How a BLOTLESS block turns its solve into atoms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DictionaryFit {
    /// `D_T = Y_r X_T^+`, the least-squares atoms for the updated
    /// coefficients. Used for undercomplete blocks in either mode.
    LeastSquares,
    /// `D_T = H^+` for complete blocks, failing when `H` is rank deficient.
    Inverse,
}

/// Update method plus its inner-solver settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UpdateMethod {
    pub kind: MethodKind,
    pub itertls_max_iters: usize,
    pub itertls_tol: f64,
    pub stls_max_iters: usize,
    /// Largest `m * n` accepted by the STLS solver.
    pub stls_size_cap: usize,
    /// Atoms per BLOTLESS block; `None` means `m`.
    pub block_size: Option<usize>,
    pub dictionary_fit: DictionaryFit,
}

impl Default for UpdateMethod {
    fn default() -> Self {
        Self {
            kind: MethodKind::BlotlessItertls,
            itertls_max_iters: 10,
            itertls_tol: 1e-8,
            stls_max_iters: 10,
            stls_size_cap: 64 * 200,
            block_size: None,
            dictionary_fit: DictionaryFit::LeastSquares,
        }
    }
}

impl UpdateMethod {
    pub fn new(kind: MethodKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn with_block_size(mut self, b: usize) -> Self {
        self.block_size = Some(b);
        self
    }

    /// Block size for signal dimension `m`, validated against `1 <= b <= m`.
    pub fn block_size_for(&self, m: usize) -> Result<usize> {
        let b = self.block_size.unwrap_or(m);
        if b == 0 || b > m {
            return Err(Error::Config(format!("block size {b} must lie in 1..={m}")));
        }
        Ok(b)
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        if self.itertls_max_iters == 0 || self.stls_max_iters == 0 {
            return Err(Error::Config("inner iteration budgets must be positive".into()));
        }
        if !(self.itertls_tol >= 0.0) {
            return Err(Error::Config(format!("itertls_tol = {}", self.itertls_tol)));
        }
        self.block_size_for(m).map(|_| ())
    }
}

/// Estimate of `H`, the (pseudo-)inverse of a non-overcomplete dictionary.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseEstimate {
    pub h: Matrix,
}

impl InverseEstimate {
    pub fn row_sums(&self) -> Vec<f64> {
        self.h.row_iter().map(|r| r.sum()).collect()
    }
}

/// `|Y - D X|_F`.
pub fn objective(y: &Matrix, d: &Matrix, x: &SparseCoeffs) -> f64 {
    (y - d * x.values()).norm()
}

/// Replaces dead atoms (zero norm or unused) by the worst-represented
/// training columns, normalized, and clears their coefficient rows. Columns
/// are taken in order of decreasing residual norm, each at most once.
pub(crate) fn replace_dead_atoms(y: &Matrix, d: &mut Matrix, x: &mut SparseCoeffs) {
    let l = d.ncols();
    let dead: Vec<usize> = (0..l)
        .filter(|&i| d.column(i).norm() <= ZERO_ATOM_TOL || x.pattern().row(i).is_empty())
        .collect();
    if dead.is_empty() {
        return;
    }
    for &i in &dead {
        x.clear_row(i);
    }
    let residual = y - &*d * x.values();
    let mut order: Vec<(usize, f64)> = (0..y.ncols())
        .map(|j| (j, residual.column(j).norm()))
        .filter(|&(j, _)| y.column(j).norm() > ZERO_ATOM_TOL)
        .collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    for (t, &i) in dead.iter().enumerate() {
        match order.get(t) {
            Some(&(j, _)) => {
                let col = y.column(j);
                d.set_column(i, &(col / col.norm()));
            }
            None => {
                // No usable training column: fall back to a canonical vector.
                let mut e = Matrix::zeros(d.nrows(), 1);
                e[(i % d.nrows(), 0)] = 1.0;
                d.set_column(i, &e.column(0));
            }
        }
    }
}

/// Normalizes the atoms of `d` in place and moves their norms into `x`.
pub(crate) fn normalize_pair(d: &mut Matrix, x: &mut SparseCoeffs) {
    let norms: Vec<f64> = d.column_iter().map(|c| c.norm()).collect();
    for (j, mut col) in d.column_iter_mut().enumerate() {
        col /= norms[j];
    }
    x.scale_rows(&norms);
}
