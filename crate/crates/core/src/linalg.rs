//! Small dense symmetric matrices.

use nalgebra::{DMatrix, SymmetricEigen};

/// Largest dimension a [`SymMatrix`] may take.
pub const MAX_DIM: usize = 64;

/// Dense symmetric matrix stored as its packed lower triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

#[inline]
fn packed(i: usize, j: usize) -> usize {
    let (r, c) = if i >= j { (i, j) } else { (j, i) };
    r * (r + 1) / 2 + c
}

impl SymMatrix {
    /// Zero matrix of dimension `n`.
    ///
    /// Panics when `n` is zero or above [`MAX_DIM`]; use [`SymMatrix::try_zeros`]
    /// to get an error instead.
    pub fn zeros(n: usize) -> Self {
        Self::try_zeros(n).expect("SymMatrix dimension must be in 1..=MAX_DIM")
    }

    pub fn try_zeros(n: usize) -> crate::Result<Self> {
        if n == 0 {
            return Err(crate::Error::Validation(
                "matrix dimension must be positive".into(),
            ));
        }
        if n > MAX_DIM {
            return Err(crate::Error::DimensionCap(n));
        }
        Ok(Self {
            n,
            data: vec![0.0; n * (n + 1) / 2],
        })
    }

    /// Builds from a function of the lower-triangle indices `(i, j)`, `j <= i`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                m.data[packed(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    /// The all-ones matrix `J_n`.
    pub fn ones(n: usize) -> Self {
        Self::from_fn(n, |_, _| 1.0)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.n && j < self.n, "index out of bounds");
        self.data[packed(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(i < self.n && j < self.n, "index out of bounds");
        self.data[packed(i, j)] = v;
    }

    /// `a * self + b * other`.
    pub fn lin_comb(&self, a: f64, other: &SymMatrix, b: f64) -> SymMatrix {
        assert_eq!(self.n, other.n, "dimension mismatch");
        SymMatrix {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// Row-major entries of the full matrix.
    pub fn to_row_major(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n * self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                out.push(self.get(i, j));
            }
        }
        out
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.to_dense())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &SymMatrix) -> f64 {
        assert_eq!(self.n, other.n, "dimension mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Factor `L` with `L L' = self`, built from the eigendecomposition with
    /// negative eigenvalues clipped to zero. Works for singular matrices.
    pub fn psd_factor(&self) -> DMatrix<f64> {
        let eig = SymmetricEigen::new(self.to_dense());
        let mut q = eig.eigenvectors;
        for (k, &lam) in eig.eigenvalues.iter().enumerate() {
            let s = lam.max(0.0).sqrt();
            q.column_mut(k).scale_mut(s);
        }
        q
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn packed_storage_is_symmetric() {
        let mut m = SymMatrix::zeros(3);
        m.set(0, 2, 5.0);
        assert_eq!(m.get(2, 0), 5.0);
        assert_eq!(
            m.to_row_major(),
            vec![0.0, 0.0, 5.0, 0.0, 0.0, 0.0, 5.0, 0.0, 0.0]
        );
    }

    #[test]
    fn dimension_cap() {
        assert!(SymMatrix::try_zeros(MAX_DIM).is_ok());
        assert_eq!(
            SymMatrix::try_zeros(MAX_DIM + 1),
            Err(crate::Error::DimensionCap(MAX_DIM + 1))
        );
        assert!(SymMatrix::try_zeros(0).is_err());
    }

    #[test]
    fn psd_factor_of_singular_matrix() {
        let m = SymMatrix::from_fn(2, |_, _| 1.0);
        let l = m.psd_factor();
        let back = &l * l.transpose();
        assert!((back - m.to_dense()).abs().max() < 1e-14);
    }
}
