//! Dense matrix types exchanged between modules.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Complex Hermitian matrix, stored densely.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    inner: DMatrix<Complex64>,
}

impl HermitianMatrix {
    /// Wraps `m` after checking Hermiticity to `tol` (absolute).
    pub fn new(m: DMatrix<Complex64>, tol: f64) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::BadDimension(format!("{}x{} matrix", m.nrows(), m.ncols())));
        }
        let n = m.nrows();
        for i in 0..n {
            for j in i..n {
                if (m[(i, j)] - m[(j, i)].conj()).norm() > tol {
                    return Err(Error::SizeMismatch(format!("entry ({i},{j}) breaks Hermiticity")));
                }
            }
        }
        Ok(Self { inner: m })
    }

    pub(crate) fn from_real_symmetric(m: &DMatrix<f64>) -> Self {
        Self { inner: m.map(|x| Complex64::new(x, 0.0)) }
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.inner[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<Complex64> {
        &self.inner
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let eig = nalgebra::SymmetricEigen::try_new(self.inner.clone(), f64::EPSILON, 10_000)
            .ok_or(Error::EigensolveFailure { t: f64::NAN })?;
        let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        Ok(v)
    }
}

/// Scattering matrix: entry (n, m) is the amplitude to end in n having started in m.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeMatrix(pub DMatrix<Complex64>);

impl AmplitudeMatrix {
    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, n: usize, m: usize) -> Complex64 {
        self.0[(n, m)]
    }

    /// max |S†S − I|.
    pub fn unitarity_defect(&self) -> f64 {
        let prod = self.0.adjoint() * &self.0;
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((prod[(i, j)] - target).norm());
            }
        }
        worst
    }

    pub fn probabilities(&self) -> ProbabilityMatrix {
        ProbabilityMatrix(self.0.map(|z| z.norm_sqr()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (&self.0 - &other.0).iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }
}

/// Transition probabilities; entry (n, m) = P(m → n).
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMatrix(pub DMatrix<f64>);

impl ProbabilityMatrix {
    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    /// Builds from rows, as the formulas are usually written.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        Self(DMatrix::from_fn(n, rows.first().map_or(0, Vec::len), |i, j| rows[i][j]))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, n: usize, m: usize) -> f64 {
        self.0[(n, m)]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.0.row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    pub fn column(&self, m: usize) -> Vec<f64> {
        self.0.column(m).iter().copied().collect()
    }

    /// Largest deviation of any row or column sum from 1.
    pub fn stochasticity_defect(&self) -> f64 {
        let rows = self.0.row_iter().map(|r| (r.sum() - 1.0).abs());
        let cols = self.0.column_iter().map(|c| (c.sum() - 1.0).abs());
        rows.chain(cols).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (&self.0 - &other.0).iter().fold(0.0, |acc, x| acc.max(x.abs()))
    }

    /// `P'[a][b] = P[perm[a]][perm[b]]`: the matrix seen after relabeling
    /// new level `a` as old level `perm[a]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.dim();
        Self(DMatrix::from_fn(n, n, |a, b| self.0[(perm[a], perm[b])]))
    }

    pub fn product(&self, right: &Self) -> Self {
        Self(&self.0 * &right.0)
    }
}
