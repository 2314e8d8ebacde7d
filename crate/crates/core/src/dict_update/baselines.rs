//! MOD and K-SVD.

use crate::error::{Error, Result};
use crate::model::{Dictionary, SparseCoeffs, ZERO_ATOM_TOL};
use crate::numerics::{pseudo_inverse, svd, Matrix};

use super::replace_dead_atoms;

/// Least-squares dictionary `Y X^+` for fixed coefficients. Atoms whose
/// coefficient row is zero are replaced by worst-represented training
/// columns. Atoms are not normalized.
pub fn mod_update(y: &Matrix, x: &SparseCoeffs) -> Result<Dictionary> {
    check_dims("mod_update", y, x)?;
    if x.values().iter().all(|&v| v == 0.0) {
        return Err(Error::Domain("MOD needs a nonzero coefficient matrix".into()));
    }
    let mut d = y * pseudo_inverse(x.values())?;
    let mut x = x.clone();
    replace_dead_atoms(y, &mut d, &mut x);
    Dictionary::new(d)
}

/// One K-SVD sweep over the atoms in index order. Each atom and its
/// coefficients on `Omega_i` become the top singular triplet of the
/// restricted residual, with the signs the SVD returns. An atom with an empty
/// support is replaced by the worst-represented training column.
pub fn ksvd_update(y: &Matrix, d: &Dictionary, x: &SparseCoeffs) -> Result<(Dictionary, SparseCoeffs)> {
    check_dims("ksvd_update", y, x)?;
    if d.m() != y.nrows() || d.l() != x.pattern().l() {
        return Err(Error::dims(
            "ksvd_update",
            format!(
                "dictionary {}x{}, y {:?}, x {:?}",
                d.m(),
                d.l(),
                y.shape(),
                x.values().shape()
            ),
        ));
    }
    let mut atoms = d.atoms().clone();
    let (mut vals, pattern) = x.clone().into_parts();
    let mut residual = y - &atoms * &vals;
    let mut used = vec![false; y.ncols()];

    for i in 0..d.l() {
        let support = pattern.row(i);
        if support.is_empty() {
            let pick = (0..y.ncols())
                .filter(|&j| !used[j] && y.column(j).norm() > ZERO_ATOM_TOL)
                .map(|j| (j, residual.column(j).norm()))
                .fold(None, |best: Option<(usize, f64)>, c| match best {
                    Some(b) if b.1 >= c.1 => Some(b),
                    _ => Some(c),
                });
            if let Some((j, _)) = pick {
                used[j] = true;
                let col = y.column(j);
                atoms.set_column(i, &(col / col.norm()));
            }
            continue;
        }
        // Restricted residual with atom i added back.
        let mut e = Matrix::zeros(y.nrows(), support.len());
        for (c, &j) in support.iter().enumerate() {
            e.set_column(c, &(residual.column(j) + atoms.column(i) * vals[(i, j)]));
        }
        let f = svd(&e)?;
        let sigma = f.s[0];
        atoms.set_column(i, &f.u.column(0));
        for (c, &j) in support.iter().enumerate() {
            vals[(i, j)] = sigma * f.vt[(0, c)];
            let upd = e.column(c) - atoms.column(i) * vals[(i, j)];
            residual.set_column(j, &upd);
        }
    }
    Ok((Dictionary::new(atoms)?, SparseCoeffs::new(vals, pattern)?))
}

fn check_dims(op: &'static str, y: &Matrix, x: &SparseCoeffs) -> Result<()> {
    if y.ncols() != x.pattern().n() {
        return Err(Error::dims(
            op,
            format!("y has {} columns, x has {}", y.ncols(), x.pattern().n()),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dict_update::objective;
    use crate::model::SupportPattern;
    use crate::synth::{add_noise, gen_training_set, GenConfig, Stream};

    fn dense(x: Matrix) -> SparseCoeffs {
        let p = SupportPattern::of_nonzeros(&x);
        SparseCoeffs::new(x, p).unwrap()
    }

    #[test]
    fn mod_identity_coefficients() {
        let mut s = Stream::new(1, 1);
        let y = Matrix::from_fn(4, 4, |_, _| s.gaussian());
        let d = mod_update(&y, &dense(Matrix::identity(4, 4))).unwrap();
        assert!((d.atoms() - &y).norm() < 1e-12);
    }

    #[test]
    fn mod_exact_and_optimal() {
        let set = gen_training_set(&GenConfig::new(6, 6, 60, 0.5, 43)).unwrap();
        let (d0, x0) = set.ground_truth.clone().unwrap();
        let d = mod_update(&set.samples, &x0).unwrap();
        assert!((d.atoms() - d0.atoms()).norm() < 1e-8);

        let noisy = add_noise(&set.samples, 10.0, 43).unwrap();
        let d = mod_update(&noisy, &x0).unwrap();
        assert!(objective(&noisy, d.atoms(), &x0) <= objective(&noisy, d0.atoms(), &x0));
    }

    #[test]
    fn mod_rejects_zero() {
        let x = SparseCoeffs::zeros(SupportPattern::empty(2, 3));
        assert!(mod_update(&Matrix::zeros(2, 3), &x).is_err());
    }

    #[test]
    fn ksvd_rank_one_exact() {
        let u = Matrix::from_column_slice(3, 1, &[0.6, 0.0, 0.8]);
        let v = Matrix::from_row_slice(1, 4, &[0.5, -0.5, 0.5, 0.5]);
        let y = &u * &v * 3.0;
        let d = Dictionary::new(Matrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0])).unwrap();
        let x = dense(Matrix::from_element(1, 4, 1.0));
        let (d1, x1) = ksvd_update(&y, &d, &x).unwrap();
        assert!(objective(&y, d1.atoms(), &x1) < 1e-12);
        let sign = d1.atoms()[(0, 0)].signum();
        assert!((d1.atoms() - &u * sign).norm() < 1e-12);
        assert!((x1.values() - &v * (3.0 * sign)).norm() < 1e-12);
    }

    #[test]
    fn ksvd_sweep_not_worse() {
        let set = gen_training_set(&GenConfig::new(8, 8, 80, 0.3, 5)).unwrap();
        let (_, x0) = set.ground_truth.clone().unwrap();
        let d = crate::synth::random_dictionary(8, 8, 9, 1).unwrap().normalize().0;
        let x = crate::model::project_to_pattern(&(d.atoms().transpose() * &set.samples), x0.pattern()).unwrap();
        let before = objective(&set.samples, d.atoms(), &x);
        let (d1, x1) = ksvd_update(&set.samples, &d, &x).unwrap();
        assert!(objective(&set.samples, d1.atoms(), &x1) <= before + 1e-12);
    }

    #[test]
    fn ksvd_single_atom_matches_singular_tail() {
        let set = gen_training_set(&GenConfig::new(8, 8, 40, 0.4, 47)).unwrap();
        let (_, x0) = set.ground_truth.clone().unwrap();
        let mut s = Stream::new(47, 2);
        let y = set.samples.map(|v| v + 0.1 * s.gaussian());
        let d = crate::synth::random_dictionary(8, 8, 47, 3).unwrap().normalize().0;
        // Only atom 0 may change: give the other atoms empty supports and no coefficients.
        let rows: Vec<Vec<usize>> = (0..8)
            .map(|i| if i == 0 { x0.pattern().row(0).to_vec() } else { vec![] })
            .collect();
        let p = SupportPattern::new(8, 40, rows).unwrap();
        let x = crate::model::project_to_pattern(x0.values(), &p).unwrap();
        let support = p.row(0).to_vec();
        let e = y.select_columns(&support);
        let tail: f64 = svd(&e).unwrap().s[1..].iter().map(|v| v * v).sum();
        let (d1, x1) = ksvd_update(&y, &d, &x).unwrap();
        let fit = e - d1.atoms().column(0) * x1.values().row(0).select_columns(&support);
        assert!((fit.norm_squared() - tail).abs() <= 1e-10 * tail.max(1.0));
    }

    #[test]
    fn ksvd_atom_is_locally_optimal() {
        let set = gen_training_set(&GenConfig::new(6, 6, 50, 0.4, 3)).unwrap();
        let (_, x0) = set.ground_truth.clone().unwrap();
        let mut s = Stream::new(3, 9);
        let y = set.samples.map(|v| v + 0.2 * s.gaussian());
        let d = crate::synth::random_dictionary(6, 6, 3, 4).unwrap().normalize().0;
        let (d1, x1) = ksvd_update(&y, &d, &x0).unwrap();
        // Restricted residual of the last atom, which is final after the sweep.
        let i = 5;
        let support = x1.pattern().row(i).to_vec();
        let others = d1.atoms() * x1.values() - d1.atoms().column(i) * x1.values().row(i);
        let e = (&y - others).select_columns(&support);
        let base = (&e - d1.atoms().column(i) * x1.values().row(i).select_columns(&support)).norm();
        for _ in 0..20 {
            let da = Matrix::from_fn(6, 1, |_, _| 1e-3 * s.gaussian());
            let dx = Matrix::from_fn(1, support.len(), |_, _| 1e-3 * s.gaussian());
            let atom = d1.atoms().column(i) + da;
            let row = x1.values().row(i).select_columns(&support) + dx;
            assert!((&e - atom * row).norm() >= base - 1e-12);
        }
    }

    #[test]
    fn ksvd_replaces_empty_atom() {
        let y = Matrix::from_row_slice(2, 2, &[3.0, 0.0, 4.0, 1.0]);
        let d = Dictionary::new(Matrix::identity(2, 2)).unwrap();
        let p = SupportPattern::new(2, 2, vec![vec![1], vec![]]).unwrap();
        let mut v = Matrix::zeros(2, 2);
        v[(0, 1)] = 1.0;
        let x = SparseCoeffs::new(v, p).unwrap();
        let (d1, x1) = ksvd_update(&y, &d, &x).unwrap();
        assert!((d1.atoms()[(0, 1)] - 0.6).abs() < 1e-15);
        assert!(x1.values().row(1).iter().all(|&v| v == 0.0));
    }
}
