//! Small dense linear algebra: a row-major matrix, a symmetric
//! eigendecomposition (Householder tridiagonalisation followed by implicit
//! QL), and spectral pseudo-inverses built on it.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::{Error, Result};

/// Relative cutoff below which spectral values count as zero.
pub const DEFAULT_RTOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Input(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::Input(format!(
                "cannot multiply a {}x{} matrix by a vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in 0..i {
                worst = worst.max(libm::fabs(self[(i, j)] - self[(j, i)]));
            }
        }
        worst
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// `A = V diag(values) V^T` for symmetric `A`.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// Unsorted eigenvalues.
    pub values: Vec<f64>,
    /// Row `j` is the unit eigenvector for `values[j]`.
    pub vectors_by_row: Matrix,
}

impl SymmetricEigen {
    /// Only the lower triangle of `a` is trusted to be symmetric with the
    /// upper one; callers are expected to pass an exactly symmetric matrix.
    pub fn new(a: &Matrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Input(format!(
                "eigendecomposition needs a square matrix, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        if a.as_slice().iter().any(|x| !x.is_finite()) {
            return Err(Error::Input("matrix has non-finite entries".into()));
        }
        let n = a.rows();
        if n == 0 {
            return Ok(SymmetricEigen {
                values: Vec::new(),
                vectors_by_row: Matrix::zeros(0, 0),
            });
        }
        let mut v = a.clone();
        let mut d = vec![0.0; n];
        let mut e = vec![0.0; n];
        tridiagonalize(&mut v, &mut d, &mut e);
        // Column-oriented rotations are applied to rows of the transpose.
        let mut w = v.transpose();
        ql_implicit(&mut w, &mut d, &mut e)?;
        Ok(SymmetricEigen {
            values: d,
            vectors_by_row: w,
        })
    }

    pub fn max_abs_value(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, &x| m.max(libm::fabs(x)))
    }

    /// Number of eigenvalues above `rtol * max |lambda|` in magnitude.
    pub fn rank(&self, rtol: f64) -> usize {
        let cutoff = rtol * self.max_abs_value();
        self.values
            .iter()
            .filter(|&&x| libm::fabs(x) > cutoff)
            .count()
    }

    fn inverted_values(&self, rtol: f64) -> Vec<f64> {
        let cutoff = rtol * self.max_abs_value();
        self.values
            .iter()
            .map(|&x| {
                if libm::fabs(x) > cutoff && x != 0.0 {
                    1.0 / x
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// `A^+ b` without forming `A^+`.
    pub fn pinv_apply(&self, b: &[f64], rtol: f64) -> Result<Vec<f64>> {
        let n = self.values.len();
        if b.len() != n {
            return Err(Error::Input(format!(
                "right-hand side has length {}, expected {n}",
                b.len()
            )));
        }
        let inv = self.inverted_values(rtol);
        let mut out = vec![0.0; n];
        for (j, &s) in inv.iter().enumerate() {
            if s == 0.0 {
                continue;
            }
            let u = self.vectors_by_row.row(j);
            let coef = s * u.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
            for (o, &x) in out.iter_mut().zip(u) {
                *o += coef * x;
            }
        }
        Ok(out)
    }

    pub fn pinv(&self, rtol: f64) -> Matrix {
        let n = self.values.len();
        let inv = self.inverted_values(rtol);
        let mut out = Matrix::zeros(n, n);
        for (j, &s) in inv.iter().enumerate() {
            if s == 0.0 {
                continue;
            }
            let u = self.vectors_by_row.row(j);
            for r in 0..n {
                let scaled = s * u[r];
                if scaled == 0.0 {
                    continue;
                }
                let row = out.row_mut(r);
                for (o, &x) in row.iter_mut().zip(u) {
                    *o += scaled * x;
                }
            }
        }
        out
    }
}

/// Moore-Penrose pseudo-inverse of a symmetric matrix, treating eigenvalues
/// with `|lambda| <= rtol * max |lambda|` as zero.
pub fn pinv_symmetric(a: &Matrix, rtol: f64) -> Result<Matrix> {
    Ok(SymmetricEigen::new(a)?.pinv(rtol))
}

// Householder reduction to tridiagonal form (EISPACK tred2). On return `v`
// holds the accumulated orthogonal transform (eigenvectors in columns), `d`
// the diagonal and `e[1..]` the subdiagonal.
fn tridiagonalize(v: &mut Matrix, d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for j in 0..n {
        d[j] = v[(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for &x in &d[..i] {
            scale += libm::fabs(x);
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
                v[(j, i)] = 0.0;
            }
        } else {
            for x in &mut d[..i] {
                *x /= scale;
                h += *x * *x;
            }
            let mut f = d[i - 1];
            let mut g = libm::sqrt(h);
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for x in &mut e[..i] {
                *x = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[(j, i)] = f;
                g = e[j] + v[(j, j)] * f;
                for k in j + 1..i {
                    g += v[(k, j)] * d[k];
                    e[k] += v[(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }

    for i in 0..n - 1 {
        v[(n - 1, i)] = v[(i, i)];
        v[(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[(k, i + 1)] * v[(k, j)];
                }
                for k in 0..=i {
                    v[(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1, j)];
        v[(n - 1, j)] = 0.0;
    }
    v[(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

// Implicit-shift QL on the tridiagonal (EISPACK tql2). `w` is the transpose
// of the tred2 transform, so each Givens rotation touches two contiguous rows.
fn ql_implicit(w: &mut Matrix, d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let max_iter = 64 * n.max(1);
    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    for l in 0..n {
        tst1 = tst1.max(libm::fabs(d[l]) + libm::fabs(e[l]));
        let mut m = l;
        while m < n {
            if libm::fabs(e[m]) <= eps * tst1 {
                break;
            }
            m += 1;
        }
        // e[n-1] == 0 so m < n always.
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > max_iter {
                    return Err(Error::Input(format!(
                        "symmetric eigensolver did not converge for eigenvalue {l}"
                    )));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = libm::hypot(p, 1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for x in &mut d[l + 2..n] {
                    *x -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = libm::hypot(p, e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    rotate_rows(w, i, s, c);
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if libm::fabs(e[l]) <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

#[inline]
fn rotate_rows(w: &mut Matrix, i: usize, s: f64, c: f64) {
    let cols = w.cols();
    let (head, tail) = w.data.split_at_mut((i + 1) * cols);
    let lo = &mut head[i * cols..];
    let hi = &mut tail[..cols];
    for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
        let h = *b;
        *b = s * *a + c * h;
        *a = c * *a - s * h;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(n: usize, f: impl Fn(usize, usize) -> f64) -> Matrix {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let x = f(i, j);
                m[(i, j)] = x;
                m[(j, i)] = x;
            }
        }
        m
    }

    fn reconstruct(eig: &SymmetricEigen) -> Matrix {
        let n = eig.values.len();
        let mut out = Matrix::zeros(n, n);
        for (j, &lam) in eig.values.iter().enumerate() {
            let u = eig.vectors_by_row.row(j);
            for r in 0..n {
                for c in 0..n {
                    out[(r, c)] += lam * u[r] * u[c];
                }
            }
        }
        out
    }

    #[test]
    fn diagonal_matrix() {
        let m = sym(3, |i, j| if i == j { [3.0, -1.0, 0.5][i] } else { 0.0 });
        let mut vals = SymmetricEigen::new(&m).unwrap().values;
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(vals, vec![-1.0, 0.5, 3.0]);
    }

    #[test]
    fn reconstructs_dense_symmetric() {
        let m = sym(7, |i, j| libm::sin((i * 7 + j * 3) as f64) + if i == j { 2.0 } else { 0.0 });
        let eig = SymmetricEigen::new(&m).unwrap();
        let back = reconstruct(&eig);
        for (a, b) in back.as_slice().iter().zip(m.as_slice()) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        // orthonormal rows
        for a in 0..7 {
            for b in 0..7 {
                let dot: f64 = eig
                    .vectors_by_row
                    .row(a)
                    .iter()
                    .zip(eig.vectors_by_row.row(b))
                    .map(|(x, y)| x * y)
                    .sum();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pinv_of_rank_deficient_gram() {
        // Gram of [1 1; 1 1] has rank 1: pinv = A / 4.
        let m = sym(2, |_, _| 2.0);
        let p = pinv_symmetric(&m, DEFAULT_RTOL).unwrap();
        for &x in p.as_slice() {
            assert!((x - 0.125).abs() < 1e-15);
        }
        assert_eq!(SymmetricEigen::new(&m).unwrap().rank(DEFAULT_RTOL), 1);
    }

    #[test]
    fn pinv_apply_matches_pinv() {
        let m = sym(5, |i, j| ((i + 1) * (j + 1)) as f64 + if i == j { 1.0 } else { 0.0 });
        let eig = SymmetricEigen::new(&m).unwrap();
        let b = [1.0, -2.0, 0.5, 3.0, 0.0];
        let direct = eig.pinv(DEFAULT_RTOL).mul_vec(&b).unwrap();
        let applied = eig.pinv_apply(&b, DEFAULT_RTOL).unwrap();
        for (x, y) in direct.iter().zip(&applied) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_and_empty_matrices() {
        let z = Matrix::zeros(3, 3);
        let eig = SymmetricEigen::new(&z).unwrap();
        assert_eq!(eig.rank(DEFAULT_RTOL), 0);
        assert_eq!(eig.pinv(DEFAULT_RTOL), Matrix::zeros(3, 3));
        assert!(SymmetricEigen::new(&Matrix::zeros(0, 0)).unwrap().values.is_empty());
    }

    #[test]
    fn rejects_non_square_and_non_finite() {
        assert!(SymmetricEigen::new(&Matrix::zeros(2, 3)).is_err());
        let mut m = Matrix::identity(2);
        m[(0, 1)] = f64::NAN;
        assert!(SymmetricEigen::new(&m).is_err());
    }
}
