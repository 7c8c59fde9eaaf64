use std::ops::{Add, Index, IndexMut, Mul, Sub};

use crate::linalg::Vector;
use crate::scalar::Real;

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T = f64> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let nrows = rows.len();
        assert!(nrows > 0, "matrix must be nonempty");
        let ncols = rows[0].len();
        assert!(ncols > 0, "matrix must be nonempty");
        let mut data = Vec::with_capacity(nrows * ncols);
        for r in rows {
            assert_eq!(r.len(), ncols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            rows: nrows,
            cols: ncols,
            data,
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn diagonal(entries: &[T]) -> Self {
        let n = entries.len();
        let mut m = Self::zeros(n, n);
        for (i, &e) in entries.iter().enumerate() {
            m[(i, i)] = e;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn scale(&self, factor: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| x * factor).collect(),
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul: inner dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] = out[(i, j)] + a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn apply(&self, x: &Vector<T>) -> Vector<T> {
        assert_eq!(self.cols, x.dim(), "apply: dimension mismatch");
        Vector::from_fn(self.rows, |i| {
            (0..self.cols).map(|j| self[(i, j)] * x[j]).sum()
        })
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|&x| x * x).sum::<T>().sqrt()
    }

    /// Rectangular block copy, rows `r0..r1`, cols `c0..c1`.
    pub fn submatrix(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> Self {
        assert!(r0 < r1 && r1 <= self.rows && c0 < c1 && c1 <= self.cols);
        Self::from_fn(r1 - r0, c1 - c0, |i, j| self[(r0 + i, c0 + j)])
    }

    /// Block copy picking arbitrary row/column index lists.
    pub fn select(&self, row_idx: &[usize], col_idx: &[usize]) -> Self {
        Self::from_fn(row_idx.len(), col_idx.len(), |i, j| {
            self[(row_idx[i], col_idx[j])]
        })
    }

    /// Singular values, nonincreasing.
    ///
    /// Computed as the square roots of the eigenvalues of `A^T A`, which a
    /// cyclic Jacobi sweep drives to diagonal form. The matrices in this lab
    /// are at most a few hundred on a side, where Jacobi is plenty and
    /// converges to near machine precision.
    pub fn singular_values(&self) -> Vec<T> {
        assert!(
            self.rows > 0 && self.cols > 0,
            "singular_values: empty matrix"
        );
        let gram = self.transpose().matmul(self);
        let mut eig = jacobi_eigenvalues(gram);
        for e in &mut eig {
            *e = e.max(T::zero()).sqrt();
        }
        eig.sort_by(|a, b| b.partial_cmp(a).unwrap());
        eig
    }

    pub fn max_singular_value(&self) -> T {
        self.singular_values()[0]
    }

    /// Spectral radius (largest eigenvalue modulus) of a square matrix.
    ///
    /// Uses `rho(A) = lim ||A^k||^(1/k)` evaluated by repeated squaring with
    /// per-step normalization, so powers never overflow. After `m` squarings
    /// the exponent is `2^m`; with `m = 60` the polynomial factors in
    /// `||A^k||` contribute less than one ulp to the root.
    pub fn spectral_radius(&self) -> T {
        assert!(self.is_square(), "spectral_radius: matrix must be square");
        let mut b = self.clone();
        let mut log_scale = 0.0f64;
        let squarings = 60;
        for _ in 0..squarings {
            let s = b.frobenius_norm();
            if s == T::zero() {
                return T::zero();
            }
            let inv = T::one() / s;
            b = b.scale(inv);
            b = b.matmul(&b);
            log_scale = 2.0 * (log_scale + s.to_f64().unwrap().ln());
        }
        let final_norm = b.frobenius_norm().to_f64().unwrap();
        let k = 2.0f64.powi(squarings);
        T::of(((final_norm.ln() + log_scale) / k).exp())
    }

    /// Solve `self * x = rhs` by Gaussian elimination with partial pivoting.
    /// Returns `None` when a pivot falls below `~n * eps * scale`.
    pub fn solve(&self, rhs: &Vector<T>) -> Option<Vector<T>> {
        assert!(self.is_square(), "solve: matrix must be square");
        assert_eq!(self.rows, rhs.dim(), "solve: dimension mismatch");
        let n = self.rows;
        let mut a = self.clone();
        let mut b = rhs.clone();
        let scale = self.frobenius_norm().max(T::one());
        let tol = scale * T::epsilon() * T::of(n as f64 * 8.0);
        for col in 0..n {
            let pivot_row = (col..n)
                .max_by(|&i, &j| a[(i, col)].abs().partial_cmp(&a[(j, col)].abs()).unwrap())
                .unwrap();
            if a[(pivot_row, col)].abs() <= tol {
                return None;
            }
            if pivot_row != col {
                for j in 0..n {
                    let tmp = a[(col, j)];
                    a[(col, j)] = a[(pivot_row, j)];
                    a[(pivot_row, j)] = tmp;
                }
                let tmp = b[col];
                b[col] = b[pivot_row];
                b[pivot_row] = tmp;
            }
            let pivot = a[(col, col)];
            for row in col + 1..n {
                let factor = a[(row, col)] / pivot;
                if factor == T::zero() {
                    continue;
                }
                for j in col..n {
                    let v = a[(col, j)];
                    a[(row, j)] = a[(row, j)] - factor * v;
                }
                let bc = b[col];
                b[row] = b[row] - factor * bc;
            }
        }
        let mut x = Vector::zeros(n);
        for row in (0..n).rev() {
            let mut acc = b[row];
            for j in row + 1..n {
                acc = acc - a[(row, j)] * x[j];
            }
            x[row] = acc / a[(row, row)];
        }
        Some(x)
    }
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
fn jacobi_eigenvalues<T: Real>(mut s: Matrix<T>) -> Vec<T> {
    assert!(s.is_square());
    let n = s.rows();
    if n == 1 {
        return vec![s[(0, 0)]];
    }
    let norm = s.frobenius_norm();
    if norm == T::zero() {
        return vec![T::zero(); n];
    }
    let tol = norm * T::epsilon();
    let half = T::of(0.5);
    for _sweep in 0..100 {
        let mut off = T::zero();
        for i in 0..n {
            for j in i + 1..n {
                off = off + s[(i, j)] * s[(i, j)];
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = s[(p, q)];
                if apq.abs() <= tol * T::of(1e-3) {
                    continue;
                }
                let app = s[(p, p)];
                let aqq = s[(q, q)];
                let theta = half * (aqq - app) / apq;
                // Stable tangent of the rotation angle.
                let t = {
                    let sign = if theta >= T::zero() {
                        T::one()
                    } else {
                        -T::one()
                    };
                    sign / (theta.abs() + (theta * theta + T::one()).sqrt())
                };
                let c = T::one() / (t * t + T::one()).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let skp = s[(k, p)];
                    let skq = s[(k, q)];
                    s[(k, p)] = c * skp - sn * skq;
                    s[(k, q)] = sn * skp + c * skq;
                }
                for k in 0..n {
                    let spk = s[(p, k)];
                    let sqk = s[(q, k)];
                    s[(p, k)] = c * spk - sn * sqk;
                    s[(q, k)] = sn * spk + c * sqk;
                }
            }
        }
    }
    (0..n).map(|i| s[(i, i)]).collect()
}

impl<T: Real> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T: Real> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl<T: Real> Add for &Matrix<T> {
    type Output = Matrix<T>;
    fn add(self, rhs: Self) -> Matrix<T> {
        assert!(self.rows == rhs.rows && self.cols == rhs.cols, "add: shape mismatch");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(&a, &b)| a + b)
                .collect(),
        }
    }
}

impl<T: Real> Sub for &Matrix<T> {
    type Output = Matrix<T>;
    fn sub(self, rhs: Self) -> Matrix<T> {
        assert!(self.rows == rhs.rows && self.cols == rhs.cols, "sub: shape mismatch");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(&a, &b)| a - b)
                .collect(),
        }
    }
}

impl<T: Real> Mul for &Matrix<T> {
    type Output = Matrix<T>;
    fn mul(self, rhs: Self) -> Matrix<T> {
        self.matmul(rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix<f64> {
        Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-2.0..2.0))
    }

    #[test]
    fn identity_singular_values_are_ones() {
        let sv = Matrix::<f64>::identity(3).singular_values();
        for s in sv {
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn diagonal_singular_values_are_sorted_magnitudes() {
        let m = Matrix::<f64>::diagonal(&[3.0, -4.0]);
        let sv = m.singular_values();
        assert!((sv[0] - 4.0).abs() < 1e-12);
        assert!((sv[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn rotation_scaling_block_singular_values() {
        // [[1-eta^2, eta], [-eta, 1-eta^2]] has both singular values equal to
        // sqrt((1-eta^2)^2 + eta^2).
        let eta = 0.1f64;
        let a = 1.0 - eta * eta;
        let m = Matrix::from_rows(&[vec![a, eta], vec![-eta, a]]);
        let expected = (a * a + eta * eta).sqrt();
        assert!((expected - 0.995037688).abs() < 1e-8);
        for s in m.singular_values() {
            assert!((s - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_values_match_transpose() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = rng.gen_range(1..9);
            let m = random_matrix(&mut rng, n, n);
            let a = m.singular_values();
            let b = m.transpose().singular_values();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-9, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn weyl_subadditivity_of_max_singular_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..30 {
            let n = rng.gen_range(2..8);
            let p = random_matrix(&mut rng, n, n);
            let q = random_matrix(&mut rng, n, n);
            let sum = &p + &q;
            assert!(
                sum.max_singular_value()
                    <= p.max_singular_value() + q.max_singular_value() + 1e-9
            );
        }
    }

    #[test]
    fn jacobi_relative_accuracy_on_known_spectrum() {
        // Orthogonal similarity keeps singular values; build Q D Q^T with a
        // chain of plane rotations and spread-out magnitudes.
        // Spread chosen so the Gram-matrix squaring keeps full relative
        // accuracy; the iteration matrices this is used on sit near identity.
        let d = [5.0f64, 1.0, 0.31, 0.017];
        let mut q = Matrix::<f64>::identity(4);
        let angles = [0.3f64, 1.1, -0.7, 0.9, 2.0, -1.3];
        let mut idx = 0;
        for i in 0..4 {
            for j in i + 1..4 {
                let mut rot = Matrix::<f64>::identity(4);
                let (s, c) = angles[idx].sin_cos();
                rot[(i, i)] = c;
                rot[(j, j)] = c;
                rot[(i, j)] = -s;
                rot[(j, i)] = s;
                q = q.matmul(&rot);
                idx += 1;
            }
        }
        let m = q.matmul(&Matrix::diagonal(&d)).matmul(&q.transpose());
        let sv = m.singular_values();
        for (got, want) in sv.iter().zip(&d) {
            assert!(
                (got - want).abs() / want < 1e-10,
                "relative error too large: {got} vs {want}"
            );
        }
    }

    #[test]
    fn spectral_radius_examples() {
        let m = Matrix::<f64>::diagonal(&[0.5, -3.0, 2.0]);
        assert!((m.spectral_radius() - 3.0).abs() < 1e-9);

        // Complex pair (1 - eta^2) +/- i*eta.
        let eta = 0.3f64;
        let a = 1.0 - eta * eta;
        let rot = Matrix::<f64>::from_rows(&[vec![a, eta], vec![-eta, a]]);
        let expected = (a * a + eta * eta).sqrt();
        assert!((rot.spectral_radius() - expected).abs() < 1e-9);

        // Defective Jordan block: eigenvalue 1 with polynomial growth.
        let jordan = Matrix::<f64>::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]);
        assert!((jordan.spectral_radius() - 1.0).abs() < 1e-9);

        let zero = Matrix::<f64>::zeros(3, 3);
        assert_eq!(zero.spectral_radius(), 0.0);
    }

    #[test]
    fn solve_recovers_known_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let n = rng.gen_range(1..10);
            let a = random_matrix(&mut rng, n, n);
            let x = Vector::from_fn(n, |_| rng.gen_range(-3.0..3.0));
            let b = a.apply(&x);
            if let Some(got) = a.solve(&b) {
                assert!((&got - &x).norm() < 1e-8 * (1.0 + x.norm()));
            }
        }
    }

    #[test]
    fn solve_reports_singularity() {
        let a = Matrix::<f64>::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(a.solve(&Vector::new(vec![1.0, 2.0])).is_none());
    }
}
