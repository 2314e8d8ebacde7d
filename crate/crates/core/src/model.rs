//! Dictionaries, sparsity patterns and sparse coefficient matrices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{check_finite, Matrix};

/// Column norms at or below this are treated as zero atoms.
pub const ZERO_ATOM_TOL: f64 = 1e-300;

/// An `m x l` matrix whose columns (atoms) are all nonzero.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    atoms: Matrix,
}

impl Dictionary {
    pub fn new(atoms: Matrix) -> Result<Self> {
        check_finite(&atoms)?;
        if atoms.ncols() == 0 || atoms.nrows() == 0 {
            return Err(Error::dims("Dictionary::new", "empty dictionary"));
        }
        if let Some(index) = atoms.column_iter().position(|c| c.norm() <= ZERO_ATOM_TOL) {
            return Err(Error::ZeroAtom { index });
        }
        Ok(Self { atoms })
    }

    pub fn atoms(&self) -> &Matrix {
        &self.atoms
    }

    pub fn into_atoms(self) -> Matrix {
        self.atoms
    }

    /// Signal dimension.
    pub fn m(&self) -> usize {
        self.atoms.nrows()
    }

    /// Atom count.
    pub fn l(&self) -> usize {
        self.atoms.ncols()
    }

    /// Returns the unit-norm dictionary and the column norms `s`, so that
    /// `D = D' diag(s)` and `D X = D' (diag(s) X)`.
    pub fn normalize(&self) -> (Dictionary, Vec<f64>) {
        let mut atoms = self.atoms.clone();
        let mut scaling = Vec::with_capacity(self.l());
        for mut col in atoms.column_iter_mut() {
            let norm = col.norm();
            col /= norm;
            scaling.push(norm);
        }
        (Dictionary { atoms }, scaling)
    }

    /// Fails with the first atom whose norm differs from one by more than `tol`.
    pub fn check_normalized(&self, tol: f64) -> Result<()> {
        for (index, col) in self.atoms.column_iter().enumerate() {
            let norm = col.norm();
            if (norm - 1.0).abs() > tol {
                return Err(Error::NotNormalized { index, norm });
            }
        }
        Ok(())
    }
}

/// Per-row supports `Omega_i` of an `l x n` coefficient matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PatternRepr", into = "PatternRepr")]
pub struct SupportPattern {
    l: usize,
    n: usize,
    rows: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct PatternRepr {
    l: usize,
    n: usize,
    rows: Vec<Vec<usize>>,
}

impl TryFrom<PatternRepr> for SupportPattern {
    type Error = Error;

    fn try_from(r: PatternRepr) -> Result<Self> {
        SupportPattern::new(r.l, r.n, r.rows)
    }
}

impl From<SupportPattern> for PatternRepr {
    fn from(p: SupportPattern) -> Self {
        PatternRepr {
            l: p.l,
            n: p.n,
            rows: p.rows,
        }
    }
}

impl SupportPattern {
    /// `rows[i]` must be strictly increasing with entries below `n`.
    pub fn new(l: usize, n: usize, rows: Vec<Vec<usize>>) -> Result<Self> {
        if rows.len() != l {
            return Err(Error::dims(
                "SupportPattern::new",
                format!("{} row supports for l = {l}", rows.len()),
            ));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Config(format!("row {i} support is not strictly increasing")));
            }
            if row.last().is_some_and(|&j| j >= n) {
                return Err(Error::Config(format!("row {i} support has an index >= n = {n}")));
            }
        }
        Ok(Self { l, n, rows })
    }

    pub fn empty(l: usize, n: usize) -> Self {
        Self {
            l,
            n,
            rows: vec![Vec::new(); l],
        }
    }

    pub fn full(l: usize, n: usize) -> Self {
        Self {
            l,
            n,
            rows: vec![(0..n).collect(); l],
        }
    }

    /// Support of the exactly nonzero entries of `x`.
    pub fn of_nonzeros(x: &Matrix) -> Self {
        let rows = (0..x.nrows())
            .map(|i| (0..x.ncols()).filter(|&j| x[(i, j)] != 0.0).collect())
            .collect();
        Self {
            l: x.nrows(),
            n: x.ncols(),
            rows,
        }
    }

    /// Builds a pattern from a list of `(row, column)` pairs.
    pub fn from_entries(l: usize, n: usize, entries: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut rows = vec![Vec::new(); l];
        for (i, j) in entries {
            if i >= l || j >= n {
                return Err(Error::dims(
                    "SupportPattern::from_entries",
                    format!("({i}, {j}) outside {l}x{n}"),
                ));
            }
            rows[i].push(j);
        }
        for row in &mut rows {
            row.sort_unstable();
            row.dedup();
        }
        Ok(Self { l, n, rows })
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    /// `|Omega|`.
    pub fn size(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.rows[i].binary_search(&j).is_ok()
    }

    /// Complement of `Omega_i` within `0..n`.
    pub fn complement(&self, i: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n - self.rows[i].len());
        let mut it = self.rows[i].iter().peekable();
        for j in 0..self.n {
            if it.peek() == Some(&&j) {
                it.next();
            } else {
                out.push(j);
            }
        }
        out
    }

    /// Supports of each column, in increasing row order.
    pub fn column_supports(&self) -> Vec<Vec<usize>> {
        let mut cols = vec![Vec::new(); self.n];
        for (i, row) in self.rows.iter().enumerate() {
            for &j in row {
                cols[j].push(i);
            }
        }
        cols
    }

    /// All `(row, column)` pairs, row-major.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().map(move |&j| (i, j)))
    }

    /// Restriction to the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            l: rows.len(),
            n: self.n,
            rows: rows.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    /// Number of `(row, column)` slots in exactly one of the two patterns.
    pub fn hamming_distance(&self, other: &SupportPattern) -> usize {
        self.rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| {
                let common = a.iter().filter(|j| b.binary_search(j).is_ok()).count();
                a.len() + b.len() - 2 * common
            })
            .sum()
    }
}

/// Coefficient matrix that vanishes outside its pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCoeffs {
    values: Matrix,
    pattern: SupportPattern,
}

impl SparseCoeffs {
    /// Fails unless `values` is exactly zero off `pattern`.
    pub fn new(values: Matrix, pattern: SupportPattern) -> Result<Self> {
        if values.shape() != (pattern.l, pattern.n) {
            return Err(Error::dims(
                "SparseCoeffs::new",
                format!("values {:?}, pattern {}x{}", values.shape(), pattern.l, pattern.n),
            ));
        }
        check_finite(&values)?;
        for i in 0..pattern.l {
            let comp = pattern.complement(i);
            if comp.iter().any(|&j| values[(i, j)] != 0.0) {
                return Err(Error::Config(format!("row {i} has nonzeros outside its support")));
            }
        }
        Ok(Self { values, pattern })
    }

    pub fn zeros(pattern: SupportPattern) -> Self {
        Self {
            values: Matrix::zeros(pattern.l, pattern.n),
            pattern,
        }
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn pattern(&self) -> &SupportPattern {
        &self.pattern
    }

    pub fn into_parts(self) -> (Matrix, SupportPattern) {
        (self.values, self.pattern)
    }

    /// Multiplies row `i` by `factors[i]`.
    pub fn scale_rows(&mut self, factors: &[f64]) {
        for (i, mut row) in self.values.row_iter_mut().enumerate() {
            row *= factors[i];
        }
    }

    /// Clears row `i`, values and support.
    pub(crate) fn clear_row(&mut self, i: usize) {
        self.values.row_mut(i).fill(0.0);
        self.pattern.rows[i].clear();
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            values: self.values.select_rows(rows),
            pattern: self.pattern.select_rows(rows),
        }
    }

    /// Overwrites the listed rows with the rows of `block`.
    pub(crate) fn set_rows(&mut self, rows: &[usize], block: &SparseCoeffs) {
        for (b, &i) in rows.iter().enumerate() {
            self.values.row_mut(i).copy_from(&block.values.row(b));
            self.pattern.rows[i] = block.pattern.rows[b].clone();
        }
    }
}

/// Keeps the entries of `x` on `pattern` and zeroes the rest.
pub fn project_to_pattern(x: &Matrix, pattern: &SupportPattern) -> Result<SparseCoeffs> {
    if x.shape() != (pattern.l, pattern.n) {
        return Err(Error::dims(
            "project_to_pattern",
            format!("x {:?}, pattern {}x{}", x.shape(), pattern.l, pattern.n),
        ));
    }
    check_finite(x)?;
    let mut values = Matrix::zeros(pattern.l, pattern.n);
    for (i, j) in pattern.entries() {
        values[(i, j)] = x[(i, j)];
    }
    Ok(SparseCoeffs {
        values,
        pattern: pattern.clone(),
    })
}

/// Samples plus the generating ground truth and metadata.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    pub samples: Matrix,
    pub ground_truth: Option<(Dictionary, SparseCoeffs)>,
    pub seed: u64,
    pub theta: f64,
    pub snr_db: Option<f64>,
}
