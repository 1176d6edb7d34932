//! Dense factorizations shared by the recovery and source modules.

use nalgebra::{Complex, DMatrix};

/// Thin singular value decomposition `A = U diag(s) Vᵀ`, `s` descending.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub s: Vec<f64>,
    pub v: DMatrix<f64>,
}

impl Svd {
    /// Number of singular values above `rel · s_max`.
    pub fn rank(&self, rel: f64) -> usize {
        let top = self.s.first().copied().unwrap_or(0.0);
        self.s.iter().filter(|&&x| x > rel * top).count()
    }

    /// Minimum-norm least-squares solution of `A X = B`, dropping singular
    /// values below `rel · s_max`.
    pub fn solve(&self, b: &DMatrix<f64>, rel: f64) -> DMatrix<f64> {
        let r = self.rank(rel);
        let mut c = self.u.columns(0, r).transpose() * b;
        for (i, mut row) in c.row_iter_mut().enumerate() {
            row /= self.s[i];
        }
        self.v.columns(0, r) * c
    }

    pub fn pseudo_inverse(&self, rel: f64) -> DMatrix<f64> {
        self.solve(&DMatrix::identity(self.u.nrows(), self.u.nrows()), rel)
    }
}

fn to_faer(a: &DMatrix<f64>) -> faer::Mat<f64> {
    faer::Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

fn from_faer(a: faer::MatRef<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

/// Thin SVD. Non-finite input yields an empty factorization.
pub fn svd(a: &DMatrix<f64>) -> Svd {
    let k = a.nrows().min(a.ncols());
    match to_faer(a).thin_svd() {
        Ok(f) => Svd {
            u: from_faer(f.U()),
            s: (0..k).map(|i| f.S().column_vector()[i]).collect(),
            v: from_faer(f.V()),
        },
        Err(_) => Svd {
            u: DMatrix::zeros(a.nrows(), 0),
            s: Vec::new(),
            v: DMatrix::zeros(a.ncols(), 0),
        },
    }
}

/// Eigenvalues of a general square matrix.
pub fn eigenvalues(a: &DMatrix<f64>) -> Vec<Complex<f64>> {
    to_faer(a)
        .eigenvalues()
        .map(|ev| ev.into_iter().map(|z| Complex::new(z.re, z.im)).collect())
        .unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check(a: &DMatrix<f64>) {
        let f = svd(a);
        let rebuilt = &f.u * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(f.s.clone())) * f.v.transpose();
        assert!((rebuilt - a).amax() <= 1e-12 * a.amax().max(1.0));
        assert!(f.s.windows(2).all(|w| w[0] >= w[1]));
        let k = f.s.len();
        assert!((f.u.transpose() * &f.u - DMatrix::<f64>::identity(k, k)).amax() < 1e-12);
        assert!((f.v.transpose() * &f.v - DMatrix::<f64>::identity(k, k)).amax() < 1e-12);
    }

    #[test]
    fn reconstructs_random_and_clustered_matrices() {
        check(&DMatrix::from_fn(9, 4, |i, j| ((3 * i + 7 * j) as f64).sin()));
        check(&DMatrix::from_fn(4, 9, |i, j| ((3 * i + 7 * j) as f64).cos()));
        // Orthonormal columns with one row removed: six singular values at 1.
        let q = DMatrix::from_fn(31, 7, |i, j| ((i * (j + 1)) as f64 * 0.37 + j as f64).sin()).qr().q();
        for cut in 0..31 {
            let rows: Vec<usize> = (0..31).filter(|&r| r != cut).collect();
            check(&q.select_rows(&rows));
        }
    }

    #[test]
    fn least_squares_and_pseudo_inverse() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 2.0, 0.0, 0.0]);
        let f = svd(&a);
        assert_eq!(f.rank(1e-12), 2);
        let p = f.pseudo_inverse(1e-12);
        assert!((p * &a - DMatrix::<f64>::identity(2, 2)).amax() < 1e-15);
        let b = DMatrix::from_column_slice(3, 1, &[1.0, 4.0, 5.0]);
        let x = f.solve(&b, 1e-12);
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn real_spectrum_of_a_similarity() {
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 0.9, 0.5]));
        let s = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0]);
        let a = &s * d * s.clone().try_inverse().unwrap();
        let mut ev: Vec<f64> = eigenvalues(&a).iter().map(|z| z.re).collect();
        ev.sort_by(f64::total_cmp);
        for (x, y) in ev.iter().zip([0.5, 0.9, 1.0]) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
