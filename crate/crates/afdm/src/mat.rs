//! Minimal dense complex matrix used for channel matrices and oracle checks.
//!
//! Row-major storage. This is deliberately small: the hot paths of the
//! simulator never touch dense matrix-matrix products, so no effort is spent
//! on blocking or SIMD here.

use num_complex::Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    nrows: usize,
    ncols: usize,
    data: Vec<Complex64>,
}

impl CMat {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, data: vec![Complex64::ZERO; nrows * ncols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::ONE;
        }
        m
    }

    pub fn from_fn(nrows: usize, ncols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(nrows * ncols);
        for i in 0..nrows {
            for j in 0..ncols {
                data.push(f(i, j));
            }
        }
        Self { nrows, ncols, data }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [Complex64] {
        &mut self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    /// y = M x.
    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.ncols, "mul_vec: length mismatch");
        (0..self.nrows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// y = Mᴴ x.
    pub fn adjoint_mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.nrows, "adjoint_mul_vec: length mismatch");
        let mut y = vec![Complex64::ZERO; self.ncols];
        for (i, &xi) in x.iter().enumerate() {
            for (a, yj) in self.row(i).iter().zip(y.iter_mut()) {
                *yj += a.conj() * xi;
            }
        }
        y
    }

    pub fn adjoint(&self) -> CMat {
        CMat::from_fn(self.ncols, self.nrows, |i, j| self[(j, i)].conj())
    }

    /// Naive O(nmk) product; oracle/test use only.
    pub fn matmul(&self, other: &CMat) -> CMat {
        assert_eq!(self.ncols, other.nrows, "matmul: dimension mismatch");
        let mut out = CMat::zeros(self.nrows, other.ncols);
        for i in 0..self.nrows {
            for k in 0..self.ncols {
                let a = self[(i, k)];
                if a == Complex64::ZERO {
                    continue;
                }
                let (dst, src) = (out.row_mut(i), other.row(k));
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// ‖self − other‖_F.
    pub fn frobenius_distance(&self, other: &CMat) -> f64 {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

impl std::ops::Index<(usize, usize)> for CMat {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.ncols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.ncols + j]
    }
}

/// ‖x − y‖₂ / ‖y‖₂.
pub fn rel_l2_error(x: &[Complex64], y: &[Complex64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let num: f64 = x.iter().zip(y).map(|(a, b)| (a - b).norm_sqr()).sum();
    let den: f64 = y.iter().map(|b| b.norm_sqr()).sum();
    (num / den).sqrt()
}

pub fn l2_norm(x: &[Complex64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
