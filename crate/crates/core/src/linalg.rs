//! Small dense least-squares kernels shared by the estimators and tests.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative tolerance below which a column's component orthogonal to the
/// preceding columns is treated as zero.
pub(crate) const RANK_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub(crate) struct LsFit {
    pub coef: DVector<f64>,
    pub resid: DVector<f64>,
    pub xtx_inv: DMatrix<f64>,
    pub rss: f64,
}

/// Index of the first column that is numerically a linear combination of the
/// columns before it (sequential Gram-Schmidt with re-orthogonalisation).
pub(crate) fn first_dependent_column(x: &DMatrix<f64>) -> Option<usize> {
    let n = x.nrows();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(x.ncols());
    for j in 0..x.ncols() {
        let col = x.column(j).into_owned();
        let norm = col.norm();
        if norm == 0.0 || !norm.is_finite() || basis.len() == n {
            return Some(j);
        }
        let mut v = col;
        for _ in 0..2 {
            for q in &basis {
                let proj = q.dot(&v);
                v.axpy(-proj, q, 1.0);
            }
        }
        let rem = v.norm();
        if rem <= RANK_TOL * norm {
            return Some(j);
        }
        basis.push(v / rem);
    }
    None
}

/// Fails with the name of the first linearly dependent column.
pub(crate) fn check_full_rank(x: &DMatrix<f64>, names: &[String]) -> Result<()> {
    match first_dependent_column(x) {
        Some(j) => Err(Error::RankDeficient(
            names.get(j).cloned().unwrap_or_else(|| format!("#{j}")),
        )),
        None => Ok(()),
    }
}

/// Least squares by Householder QR. `names` label the columns of `x` for
/// rank-deficiency errors.
pub(crate) fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>, names: &[String]) -> Result<LsFit> {
    let (n, k) = x.shape();
    if n < k {
        return Err(Error::DegreesOfFreedom(format!(
            "{n} observations for {k} regressors"
        )));
    }
    check_full_rank(x, names)?;
    let qr = x.clone().qr();
    let r = qr.r();
    let q = qr.q();
    let qty = q.transpose() * y;
    let coef = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::RankDeficient("triangular factor is singular".into()))?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or_else(|| Error::RankDeficient("triangular factor is singular".into()))?;
    let xtx_inv = &r_inv * r_inv.transpose();
    let resid = y - x * &coef;
    let rss = resid.norm_squared();
    Ok(LsFit {
        coef,
        resid,
        xtx_inv,
        rss,
    })
}

/// Orthogonal projection of every column of `x` onto the column space of `z`.
pub(crate) fn project(z: &DMatrix<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
    let q = z.clone().qr().q();
    &q * (q.transpose() * x)
}

/// `scale * A (sum_i u_i^2 x_i x_i') A` with `A = bread`.
pub(crate) fn sandwich(bread: &DMatrix<f64>, x: &DMatrix<f64>, resid: &DVector<f64>, scale: f64) -> DMatrix<f64> {
    let k = x.ncols();
    let mut meat = DMatrix::<f64>::zeros(k, k);
    for i in 0..x.nrows() {
        let row = x.row(i);
        let w = resid[i] * resid[i];
        for a in 0..k {
            let ra = row[a] * w;
            for b in a..k {
                meat[(a, b)] += ra * row[b];
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            meat[(a, b)] = meat[(b, a)];
        }
    }
    bread * meat * bread * scale
}

/// Moore-Penrose inverse of a symmetric matrix together with its numerical rank.
pub(crate) fn pinv_symmetric(a: &DMatrix<f64>) -> (DMatrix<f64>, usize) {
    let n = a.nrows();
    let sym = (a + a.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let max_abs = eig.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let tol = max_abs * (n.max(1) as f64) * 1e-12;
    let mut out = DMatrix::<f64>::zeros(n, n);
    let mut rank = 0;
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda.abs() > tol && lambda.abs() > 0.0 {
            rank += 1;
            let v = eig.eigenvectors.column(i);
            out += (&v * v.transpose()) / lambda;
        }
    }
    (out, rank)
}

/// Symmetric inverse via Cholesky, falling back to LU.
pub(crate) fn inverse(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if let Some(ch) = a.clone().cholesky() {
        return Some(ch.inverse());
    }
    a.clone().try_inverse()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|j| format!("x{j}")).collect()
    }

    #[test]
    fn duplicated_column_is_detected() {
        let x = DMatrix::from_row_slice(4, 3, &[1.0, 2.0, 2.0, 1.0, 3.0, 3.0, 1.0, 5.0, 5.0, 1.0, 7.0, 7.0]);
        assert_eq!(first_dependent_column(&x), Some(2));
        let err = least_squares(&x, &DVector::from_element(4, 1.0), &names(3)).unwrap_err();
        assert!(matches!(err, Error::RankDeficient(ref c) if c == "x2"));
    }

    #[test]
    fn exact_fit_recovers_coefficients() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let y = DVector::from_vec(vec![3.0, 5.0, 7.0, 9.0]);
        let fit = least_squares(&x, &y, &names(2)).unwrap();
        assert!((fit.coef[0] - 3.0).abs() < 1e-12);
        assert!((fit.coef[1] - 2.0).abs() < 1e-12);
        assert!(fit.rss < 1e-20);
    }

    #[test]
    fn pinv_of_singular_matrix_has_reduced_rank() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let (p, rank) = pinv_symmetric(&a);
        assert_eq!(rank, 1);
        let back = &a * &p * &a;
        assert!((back - a).norm() < 1e-12);
    }
}
