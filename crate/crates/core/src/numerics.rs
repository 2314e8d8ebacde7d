//! Dense linear-algebra kernels shared by every solver.
//!
//! All routines are sequential and deterministic: identical input bits give
//! identical output bits. Singular values below [`RANK_RTOL`] times the
//! largest singular value count as zero wherever a rank decision is made.

use std::io::{BufRead, Write};

use faer::linalg::solvers::{Solve, SolveLstsq};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;

/// Relative cutoff below which a singular value is treated as zero.
pub const RANK_RTOL: f64 = 1e-12;

pub fn check_finite(a: &Matrix) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

/// Thin singular value decomposition `a = u * diag(s) * vt`.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub u: Matrix,
    /// Non-increasing, nonnegative.
    pub s: Vec<f64>,
    pub vt: Matrix,
}

impl SvdFactors {
    pub fn largest(&self) -> f64 {
        self.s.first().copied().unwrap_or(0.0)
    }

    /// Number of singular values above `RANK_RTOL * s_max`.
    pub fn rank(&self) -> usize {
        numerical_rank(&self.s)
    }

    pub fn reconstruct(&self) -> Matrix {
        self.reconstruct_rank(self.s.len())
    }

    /// Minimum-norm least-squares solution `V_r diag(1/s_r) U_r^T b` of the
    /// factored system, with `r` the numerical rank.
    pub fn solve(&self, b: &Matrix) -> Matrix {
        let r = self.rank();
        let mut utb = self.u.columns(0, r).transpose() * b;
        for (i, mut row) in utb.row_iter_mut().enumerate() {
            row /= self.s[i];
        }
        self.vt.rows(0, r).transpose() * utb
    }

    /// Sum of the leading `r` singular triplets.
    pub fn reconstruct_rank(&self, r: usize) -> Matrix {
        let r = r.min(self.s.len());
        let mut us = self.u.columns(0, r).into_owned();
        for (j, mut col) in us.column_iter_mut().enumerate() {
            col *= self.s[j];
        }
        us * self.vt.rows(0, r)
    }
}

fn decompose(a: Matrix) -> Result<SvdFactors> {
    let (rows, cols) = a.shape();
    let k = rows.min(cols);
    if k == 0 {
        return Ok(SvdFactors {
            u: Matrix::zeros(rows, 0),
            s: Vec::new(),
            vt: Matrix::zeros(0, cols),
        });
    }
    let scale = a.amax();
    if scale == 0.0 {
        return Ok(SvdFactors {
            u: Matrix::identity(rows, k),
            s: vec![0.0; k],
            vt: Matrix::identity(k, cols),
        });
    }
    let f = match faer_svd(&a, 1.0) {
        Ok(f) => f,
        // The iteration occasionally stalls on badly scaled input; retry on a
        // unit-scale copy before giving up.
        Err(_) => faer_svd(&a, 1.0 / scale)
            .map(|mut f| {
                f.s.iter_mut().for_each(|v| *v *= scale);
                f
            })
            .map_err(|e| Error::Numerical(format!("SVD did not converge: {e:?}")))?,
    };
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| f.s[j].total_cmp(&f.s[i]).then(i.cmp(&j)));
    Ok(SvdFactors {
        u: Matrix::from_fn(rows, k, |i, c| f.u[(i, order[c])]),
        s: order.iter().map(|&i| f.s[i]).collect(),
        vt: Matrix::from_fn(k, cols, |r, j| f.vt[(order[r], j)]),
    })
}

/// Unsorted thin SVD of `factor * a`.
fn faer_svd(a: &Matrix, factor: f64) -> std::result::Result<SvdFactors, faer::linalg::svd::SvdError> {
    let (rows, cols) = a.shape();
    let k = rows.min(cols);
    let fa = faer::Mat::<f64>::from_fn(rows, cols, |i, j| factor * a[(i, j)]);
    let f = fa.thin_svd()?;
    let (fu, fs, fv) = (f.U(), f.S().column_vector(), f.V());
    Ok(SvdFactors {
        u: Matrix::from_fn(rows, k, |i, c| fu[(i, c)]),
        s: (0..k).map(|i| fs[i]).collect(),
        vt: Matrix::from_fn(k, cols, |r, j| fv[(j, r)]),
    })
}

/// Number of singular values above `RANK_RTOL` times the largest.
pub fn numerical_rank(s: &[f64]) -> usize {
    let cutoff = RANK_RTOL * s.iter().copied().fold(0.0, f64::max);
    s.iter().filter(|&&v| v > cutoff && v > 0.0).count()
}

pub fn svd(a: &Matrix) -> Result<SvdFactors> {
    check_finite(a)?;
    decompose(a.clone())
}

/// Right singular vectors of `a` spanning all of `R^cols`, as the columns of
/// the returned matrix, ordered by non-increasing singular value. When
/// `rows < cols` the missing singular values are zero and the trailing
/// columns span the null space.
pub fn right_singular_basis(a: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    check_finite(a)?;
    let (rows, cols) = a.shape();
    let square = if rows < cols {
        let mut p = Matrix::zeros(cols, cols);
        p.rows_mut(0, rows).copy_from(a);
        p
    } else if rows > cols {
        // A = Q R shares its singular values and right vectors with R.
        let fa = faer::Mat::<f64>::from_fn(rows, cols, |i, j| a[(i, j)]);
        let qr = fa.qr();
        let r = qr.thin_R();
        Matrix::from_fn(cols, cols, |i, j| r[(i, j)])
    } else {
        a.clone()
    };
    let f = decompose(square)?;
    Ok((f.s, f.vt.transpose()))
}

/// Minimum-norm minimizer of `||a x - b||_F`.
pub fn least_squares(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.nrows() != b.nrows() {
        return Err(Error::dims(
            "least_squares",
            format!("a has {} rows, b has {}", a.nrows(), b.nrows()),
        ));
    }
    check_finite(b)?;
    Ok(svd(a)?.solve(b))
}

/// Least squares for a system expected to have full column rank, by
/// column-pivoted QR. Returns `None` when `a` is numerically rank deficient,
/// i.e. some `|R_kk|` is at most `RANK_RTOL * |R_00|`.
pub fn least_squares_full_rank(a: &Matrix, b: &Matrix) -> Result<Option<Matrix>> {
    let (rows, cols) = a.shape();
    if rows != b.nrows() {
        return Err(Error::dims(
            "least_squares_full_rank",
            format!("a has {rows} rows, b has {}", b.nrows()),
        ));
    }
    check_finite(a)?;
    check_finite(b)?;
    if cols == 0 || rows < cols {
        return Ok(None);
    }
    let fa = faer::Mat::<f64>::from_fn(rows, cols, |i, j| a[(i, j)]);
    let qr = fa.col_piv_qr();
    let r = qr.R();
    let top = r[(0, 0)].abs();
    if !(top > 0.0) || (0..cols).any(|k| r[(k, k)].abs() <= RANK_RTOL * top) {
        return Ok(None);
    }
    let fb = faer::Mat::<f64>::from_fn(rows, b.ncols(), |i, j| b[(i, j)]);
    let x = qr.solve_lstsq(&fb);
    let out = Matrix::from_fn(cols, b.ncols(), |i, j| x[(i, j)]);
    check_finite(&out)?;
    Ok(Some(out))
}

/// Moore-Penrose pseudo-inverse.
pub fn pseudo_inverse(a: &Matrix) -> Result<Matrix> {
    let f = svd(a)?;
    let r = f.rank();
    let mut v = f.vt.rows(0, r).transpose();
    for (j, mut col) in v.column_iter_mut().enumerate() {
        col /= f.s[j];
    }
    Ok(v * f.u.columns(0, r).transpose())
}

/// Best rank-`r` approximation in the Frobenius norm.
pub fn truncate_rank(a: &Matrix, r: usize) -> Result<Matrix> {
    let max = a.nrows().min(a.ncols());
    if r == 0 || r > max {
        return Err(Error::RankOutOfRange { rank: r, max });
    }
    Ok(svd(a)?.reconstruct_rank(r))
}

/// Separable convex quadratic `0.5 * sum_k weights[k] * z_k^2`.
///
/// Zero weights are allowed; the program is then only well posed when the
/// constraints pin the unweighted variables.
#[derive(Debug, Clone)]
pub struct QuadraticForm {
    pub weights: Vec<f64>,
}

impl QuadraticForm {
    pub fn diagonal(weights: Vec<f64>) -> Self {
        Self { weights }
    }

    pub fn dense(&self) -> Matrix {
        Matrix::from_diagonal(&DVector::from_column_slice(&self.weights))
    }
}

/// Solves `min 0.5 z^T W z + g^T z  s.t.  A z = c` for diagonal `W >= 0`.
///
/// The positively weighted variables are eliminated from the KKT system,
/// leaving a system in the multipliers and the unweighted variables that is
/// factored with full pivoting. A numerically singular reduced system means
/// the KKT matrix is singular, which is reported as degenerate constraints.
pub fn solve_eq_qp(hessian: &QuadraticForm, linear: &Matrix, jacobian: &Matrix, rhs: &Matrix) -> Result<Matrix> {
    let nvar = jacobian.ncols();
    let ncon = jacobian.nrows();
    if hessian.weights.len() != nvar || linear.shape() != (nvar, 1) || rhs.shape() != (ncon, 1) {
        return Err(Error::dims(
            "solve_eq_qp",
            format!(
                "{} weights, linear {:?}, jacobian {:?}, rhs {:?}",
                hessian.weights.len(),
                linear.shape(),
                jacobian.shape(),
                rhs.shape()
            ),
        ));
    }
    if hessian.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::Domain("quadratic weights must be finite and nonnegative".into()));
    }
    check_finite(linear)?;
    check_finite(jacobian)?;
    check_finite(rhs)?;

    let free: Vec<usize> = (0..nvar).filter(|&k| hessian.weights[k] == 0.0).collect();
    let dim = ncon + free.len();

    // Reduced KKT:  [ S    A_Z ] [  lambda ]   [ -c - A_P W^-1 g_P ]
    //               [ A_Z^T  0 ] [ -z_Z    ] = [ -g_Z              ]
    let mut kkt = Matrix::zeros(dim, dim);
    let mut top = -rhs.clone();
    let mut nz: Vec<usize> = Vec::with_capacity(ncon);
    for k in 0..nvar {
        let w = hessian.weights[k];
        if w == 0.0 {
            continue;
        }
        let col = jacobian.column(k);
        nz.clear();
        nz.extend((0..ncon).filter(|&i| col[i] != 0.0));
        let g = linear[(k, 0)];
        for &i in &nz {
            let ai = col[i] / w;
            for &j in &nz {
                kkt[(i, j)] += ai * col[j];
            }
            top[(i, 0)] -= ai * g;
        }
    }
    for (q, &k) in free.iter().enumerate() {
        for i in 0..ncon {
            let a = jacobian[(i, k)];
            kkt[(i, ncon + q)] = a;
            kkt[(ncon + q, i)] = a;
        }
    }
    let mut b = Matrix::zeros(dim, 1);
    b.rows_mut(0, ncon).copy_from(&top);
    for (q, &k) in free.iter().enumerate() {
        b[(ncon + q, 0)] = -linear[(k, 0)];
    }

    let fk = faer::Mat::<f64>::from_fn(dim, dim, |i, j| kkt[(i, j)]);
    let lu = fk.full_piv_lu();
    let u = lu.U();
    let diag = (0..dim).map(|i| u[(i, i)].abs());
    let diag_max = diag.clone().fold(0.0f64, f64::max);
    let diag_min = diag.fold(f64::INFINITY, f64::min);
    if dim > 0 && !(diag_max > 0.0 && diag_min > RANK_RTOL * diag_max) {
        return Err(Error::DegenerateConstraints);
    }
    let fb = faer::Mat::<f64>::from_fn(dim, 1, |i, _| b[(i, 0)]);
    let fsol = lu.solve(&fb);
    let sol = Matrix::from_fn(dim, 1, |i, _| fsol[(i, 0)]);
    check_finite(&sol)?;

    let lambda = sol.rows(0, ncon);
    let mut z = Matrix::zeros(nvar, 1);
    for k in 0..nvar {
        let w = hessian.weights[k];
        if w > 0.0 {
            let at_lambda = jacobian.column(k).dot(&lambda.column(0));
            z[(k, 0)] = -(linear[(k, 0)] + at_lambda) / w;
        }
    }
    for (q, &k) in free.iter().enumerate() {
        z[(k, 0)] = -sol[(ncon + q, 0)];
    }
    Ok(z)
}

/// Writes `rows cols` followed by one line per row with 17 significant digits.
pub fn write_matrix<W: Write>(mut out: W, a: &Matrix) -> Result<()> {
    writeln!(out, "{} {}", a.nrows(), a.ncols())?;
    for i in 0..a.nrows() {
        let line: Vec<String> = (0..a.ncols()).map(|j| format!("{:.16e}", a[(i, j)])).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

pub fn read_matrix<R: BufRead>(input: R) -> Result<Matrix> {
    let mut tokens = Vec::new();
    for line in input.lines() {
        let line = line?;
        tokens.extend(line.split_whitespace().map(str::to_owned));
    }
    let mut it = tokens.into_iter();
    let mut dim = |name: &str| -> Result<usize> {
        it.next()
            .ok_or_else(|| Error::Parse(format!("missing {name}")))?
            .parse::<usize>()
            .map_err(|e| Error::Parse(format!("bad {name}: {e}")))
    };
    let rows = dim("row count")?;
    let cols = dim("column count")?;
    let values: Vec<f64> = it
        .map(|t| {
            t.parse::<f64>()
                .map_err(|e| Error::Parse(format!("bad entry {t:?}: {e}")))
        })
        .collect::<Result<_>>()?;
    if values.len() != rows * cols {
        return Err(Error::Parse(format!(
            "expected {} entries, found {}",
            rows * cols,
            values.len()
        )));
    }
    let a = Matrix::from_row_slice(rows, cols, &values);
    check_finite(&a)?;
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    fn rel(a: &Matrix, b: &Matrix) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    #[test]
    fn svd_identity_and_diagonal() {
        let f = svd(&Matrix::identity(3, 3)).unwrap();
        assert_eq!(f.s, vec![1.0, 1.0, 1.0]);

        let d = Matrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 2.0]);
        let f = svd(&d).unwrap();
        assert!((f.s[0] - 3.0).abs() < 1e-14 && (f.s[1] - 2.0).abs() < 1e-14);
        for m in [&f.u, &f.vt] {
            for v in m.iter() {
                assert!(v.abs() < 1e-14 || (v.abs() - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn svd_matches_gram_eigenvalues() {
        let a = random(4, 3, 7);
        let f = svd(&a).unwrap();
        let gram = a.transpose() * &a;
        let mut eig: Vec<f64> = gram
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .map(|v| v.max(0.0).sqrt())
            .collect();
        eig.sort_by(|x, y| y.partial_cmp(x).unwrap());
        for (s, e) in f.s.iter().zip(&eig) {
            assert!((s - e).abs() < 1e-12, "{s} vs {e}");
        }
        assert!(f.s.windows(2).all(|w| w[0] >= w[1]));
        let err = (f.reconstruct() - &a).norm();
        assert!(err <= 1e-8 * f.largest() * 4.0);
    }

    #[test]
    fn svd_rejects_nan() {
        let mut a = Matrix::identity(2, 2);
        a[(0, 1)] = f64::NAN;
        assert!(matches!(svd(&a), Err(Error::NonFinite)));
    }

    #[test]
    fn svd_is_deterministic() {
        let a = random(6, 5, 3);
        let f1 = svd(&a).unwrap();
        let f2 = svd(&a).unwrap();
        assert_eq!(f1.u, f2.u);
        assert_eq!(f1.s, f2.s);
        assert_eq!(f1.vt, f2.vt);
    }

    #[test]
    fn least_squares_examples() {
        let b = random(2, 3, 1);
        let x = least_squares(&Matrix::identity(2, 2), &b).unwrap();
        assert!(rel(&x, &b) < 1e-14);

        let a = Matrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let b = Matrix::from_row_slice(2, 1, &[0.0, 2.0]);
        let x = least_squares(&a, &b).unwrap();
        assert!((x[(0, 0)] - 1.0).abs() < 1e-14);

        assert!(matches!(
            least_squares(&Matrix::zeros(3, 2), &Matrix::zeros(2, 1)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn least_squares_normal_equations_and_optimality() {
        let a = random(6, 3, 11);
        let b = random(6, 2, 12);
        let x = least_squares(&a, &b).unwrap();
        let normal = a.transpose() * (&a * &x - &b);
        assert!(normal.norm() < 1e-8);

        let base = (&a * &x - &b).norm();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..20 {
            let dir = Matrix::from_fn(3, 2, |_, _| rng.random_range(-1.0..1.0));
            let dir = &dir / dir.norm();
            let perturbed = (&a * (&x + dir * 1e-3) - &b).norm();
            assert!(perturbed >= base);
        }
    }

    #[test]
    fn least_squares_rank_deficient_is_minimum_norm() {
        // Two identical columns: minimum-norm solution splits the weight evenly.
        let a = Matrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, 0.0, 0.0]);
        let b = Matrix::from_row_slice(3, 1, &[2.0, 4.0, 0.0]);
        let x = least_squares(&a, &b).unwrap();
        assert!((x[(0, 0)] - 1.0).abs() < 1e-12 && (x[(1, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pseudo_inverse_examples() {
        let p = pseudo_inverse(&Matrix::identity(3, 3)).unwrap();
        assert!(rel(&p, &Matrix::identity(3, 3)) < 1e-14);

        let d = Matrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]);
        let p = pseudo_inverse(&d).unwrap();
        let expect = Matrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.0]);
        assert!((p - expect).norm() < 1e-14);
    }

    #[test]
    fn pseudo_inverse_moore_penrose_identities() {
        let a = random(3, 5, 13);
        let p = pseudo_inverse(&a).unwrap();
        assert!(rel(&(&a * &p * &a), &a) < 1e-8);
        assert!(rel(&(&p * &a * &p), &p) < 1e-8);
        let ap = &a * &p;
        let pa = &p * &a;
        assert!(rel(&ap.transpose(), &ap) < 1e-8);
        assert!(rel(&pa.transpose(), &pa) < 1e-8);
    }

    #[test]
    fn full_rank_least_squares_matches_svd_path() {
        let a = random(7, 3, 23);
        let b = random(7, 2, 24);
        let x = least_squares_full_rank(&a, &b).unwrap().unwrap();
        assert!(rel(&x, &least_squares(&a, &b).unwrap()) < 1e-12);

        let mut d = a.clone();
        let c0 = d.column(0).into_owned();
        d.set_column(2, &(c0 * 2.0));
        assert!(least_squares_full_rank(&d, &b).unwrap().is_none());
        assert!(least_squares_full_rank(&random(2, 3, 1), &random(2, 1, 2))
            .unwrap()
            .is_none());
    }

    #[test]
    fn truncate_rank_examples() {
        let u = random(4, 1, 5);
        let v = random(1, 3, 6);
        let a = &u * &v;
        assert!(rel(&truncate_rank(&a, 1).unwrap(), &a) < 1e-12);

        let d = Matrix::from_diagonal(&DVector::from_vec(vec![3.0, 2.0, 1.0]));
        let t = truncate_rank(&d, 2).unwrap();
        let expect = Matrix::from_diagonal(&DVector::from_vec(vec![3.0, 2.0, 0.0]));
        assert!((t - expect).norm() < 1e-12);

        assert!(matches!(truncate_rank(&d, 0), Err(Error::RankOutOfRange { .. })));
        assert!(matches!(truncate_rank(&d, 4), Err(Error::RankOutOfRange { .. })));
    }

    #[test]
    fn truncate_rank_eckart_young() {
        let a = random(5, 5, 17);
        let f = svd(&a).unwrap();
        let t = truncate_rank(&a, 3).unwrap();
        let err2 = (&a - &t).norm_squared();
        let tail = f.s[3].powi(2) + f.s[4].powi(2);
        assert!((err2 - tail).abs() <= 1e-8 * tail);
    }

    #[test]
    fn eq_qp_symmetric_projection() {
        // min |x|^2 s.t. x1 + x2 = 2
        let h = QuadraticForm::diagonal(vec![2.0, 2.0]);
        let g = Matrix::zeros(2, 1);
        let a = Matrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let c = Matrix::from_row_slice(1, 1, &[2.0]);
        let z = solve_eq_qp(&h, &g, &a, &c).unwrap();
        assert!((z[(0, 0)] - 1.0).abs() < 1e-14 && (z[(1, 0)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eq_qp_coordinate_pinning() {
        // min |x - (3,0)|^2 s.t. x2 = 1
        let h = QuadraticForm::diagonal(vec![2.0, 2.0]);
        let g = Matrix::from_row_slice(2, 1, &[-6.0, 0.0]);
        let a = Matrix::from_row_slice(1, 2, &[0.0, 1.0]);
        let c = Matrix::from_row_slice(1, 1, &[1.0]);
        let z = solve_eq_qp(&h, &g, &a, &c).unwrap();
        assert!((z[(0, 0)] - 3.0).abs() < 1e-14 && (z[(1, 0)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eq_qp_matches_dense_kkt() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let nvar = 7;
        let ncon = 3;
        // Two unweighted variables exercise the elimination path.
        let weights: Vec<f64> = (0..nvar)
            .map(|k| if k < 2 { 0.0 } else { rng.random_range(0.5..2.0) })
            .collect();
        let h = QuadraticForm::diagonal(weights);
        let g = Matrix::from_fn(nvar, 1, |_, _| rng.random_range(-1.0..1.0));
        let a = Matrix::from_fn(ncon, nvar, |_, _| rng.random_range(-1.0..1.0));
        let c = Matrix::from_fn(ncon, 1, |_, _| rng.random_range(-1.0..1.0));
        let z = solve_eq_qp(&h, &g, &a, &c).unwrap();

        let dim = nvar + ncon;
        let mut kkt = Matrix::zeros(dim, dim);
        kkt.view_mut((0, 0), (nvar, nvar)).copy_from(&h.dense());
        kkt.view_mut((0, nvar), (nvar, ncon)).copy_from(&a.transpose());
        kkt.view_mut((nvar, 0), (ncon, nvar)).copy_from(&a);
        let mut rhs = Matrix::zeros(dim, 1);
        rhs.rows_mut(0, nvar).copy_from(&(-&g));
        rhs.rows_mut(nvar, ncon).copy_from(&c);
        let oracle = least_squares(&kkt, &rhs).unwrap();
        assert!(rel(&z, &oracle.rows(0, nvar).into_owned()) < 1e-10);
    }

    #[test]
    fn eq_qp_rank_deficient_constraints() {
        let h = QuadraticForm::diagonal(vec![1.0, 1.0, 1.0]);
        let g = Matrix::zeros(3, 1);
        let a = Matrix::from_row_slice(2, 3, &[1.0, 1.0, 0.0, 2.0, 2.0, 0.0]);
        let c = Matrix::from_row_slice(2, 1, &[1.0, 2.0]);
        assert!(matches!(solve_eq_qp(&h, &g, &a, &c), Err(Error::DegenerateConstraints)));
    }

    #[test]
    fn matrix_text_roundtrip_is_exact() {
        let a = random(3, 4, 21) * 1e-3;
        let mut buf = Vec::new();
        write_matrix(&mut buf, &a).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("3 4\n"));
        let b = read_matrix(&buf[..]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn matrix_text_rejects_short_input() {
        assert!(matches!(read_matrix(&b"2 2\n1 2 3\n"[..]), Err(Error::Parse(_))));
    }
}
