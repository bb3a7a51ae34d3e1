use nalgebra::DMatrix;

use crate::error::{shape_err, Error, Result};
use crate::numerics::RngStream;

/// Low-rank parameterization of the antisymmetric null-field matrices.
///
/// Each Cholesky coordinate `(a, b)` receives the null field
/// `s_ab (L[:, a] w_b - L[:, b] w_a)` with `w = L^{-1}(z - mu)` and
/// `s_ab = sum_l B[l, a] C[l, b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AvfParams {
    b_matrix: DMatrix<f64>,
    c_matrix: DMatrix<f64>,
    s_matrix: DMatrix<f64>,
}

impl AvfParams {
    pub fn new(b_matrix: DMatrix<f64>, c_matrix: DMatrix<f64>) -> Result<Self> {
        if b_matrix.shape() != c_matrix.shape() {
            return Err(shape_err(format!("B is {:?} but C is {:?}", b_matrix.shape(), c_matrix.shape())));
        }
        if b_matrix.nrows() == 0 || b_matrix.ncols() == 0 {
            return Err(Error::InvalidParameter("rank and dimension must be >= 1".into()));
        }
        if b_matrix.iter().chain(c_matrix.iter()).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("AVF parameters".into()));
        }
        let s_matrix = b_matrix.tr_mul(&c_matrix);
        Ok(Self { b_matrix, c_matrix, s_matrix })
    }

    pub fn zeros(rank: usize, dim: usize) -> Result<Self> {
        Self::new(DMatrix::zeros(rank, dim), DMatrix::zeros(rank, dim))
    }

    /// Entries i.i.d. `N(0, scale^2)`.
    pub fn random(rank: usize, dim: usize, scale: f64, rng: &mut RngStream) -> Result<Self> {
        let b = DMatrix::from_fn(rank, dim, |_, _| scale * rng.normal());
        let c = DMatrix::from_fn(rank, dim, |_, _| scale * rng.normal());
        Self::new(b, c)
    }

    pub fn rank(&self) -> usize {
        self.b_matrix.nrows()
    }

    pub fn dim(&self) -> usize {
        self.b_matrix.ncols()
    }

    pub fn b_matrix(&self) -> &DMatrix<f64> {
        &self.b_matrix
    }

    pub fn c_matrix(&self) -> &DMatrix<f64> {
        &self.c_matrix
    }

    /// `s_ab = sum_l B[l, a] C[l, b]`.
    pub fn s(&self, a: usize, b: usize) -> f64 {
        self.s_matrix[(a, b)]
    }

    /// `A^{ab} = s_ab (E_ab - E_ba)`, antisymmetric with zero trace.
    pub fn a_matrix(&self, a: usize, b: usize) -> DMatrix<f64> {
        let d = self.dim();
        let mut m = DMatrix::zeros(d, d);
        if a != b {
            m[(a, b)] = self.s(a, b);
            m[(b, a)] = -self.s(a, b);
        }
        m
    }

    /// `B` then `C`, both row-major.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.b_matrix.len());
        out.extend(self.b_matrix.transpose().iter());
        out.extend(self.c_matrix.transpose().iter());
        out
    }

    /// Inverse of [`AvfParams::to_vec`].
    pub fn from_vec(rank: usize, dim: usize, values: &[f64]) -> Result<Self> {
        let n = rank * dim;
        if values.len() != 2 * n {
            return Err(shape_err(format!("{} values for rank {rank}, dim {dim}", values.len())));
        }
        let b = DMatrix::from_row_slice(rank, dim, &values[..n]);
        let c = DMatrix::from_row_slice(rank, dim, &values[n..]);
        Self::new(b, c)
    }
}
