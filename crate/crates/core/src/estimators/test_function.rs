use nalgebra::{DMatrix, DVector};

use crate::error::{shape_err, Error, Result};
use crate::numerics::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TestFunctionKind {
    /// `cos(sum_ij Q_ij z_i / D)`
    Cosine,
    /// `z^T Q z`
    Quadratic,
    /// `(z^T Q z)^2`
    Quartic,
    /// `|z|^2`
    SqNorm,
    /// `c . z`
    Linear,
    Constant,
}

impl TestFunctionKind {
    pub fn name(&self) -> &'static str {
        match self {
            TestFunctionKind::Cosine => "cosine",
            TestFunctionKind::Quadratic => "quadratic",
            TestFunctionKind::Quartic => "quartic",
            TestFunctionKind::SqNorm => "sq_norm",
            TestFunctionKind::Linear => "linear",
            TestFunctionKind::Constant => "constant",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            TestFunctionKind::Cosine,
            TestFunctionKind::Quadratic,
            TestFunctionKind::Quartic,
            TestFunctionKind::SqNorm,
            TestFunctionKind::Linear,
            TestFunctionKind::Constant,
        ]
        .into_iter()
        .find(|k| k.name() == s)
    }
}

/// A scalar objective `f(z)` with its exact gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    kind: TestFunctionKind,
    dim: usize,
    coupling: Option<DMatrix<f64>>,
    /// `Q + Q^T` for the quadratic forms, `Q 1 / D` for the cosine, `c` for linear.
    linear_map: Option<DMatrix<f64>>,
    direction: Option<DVector<f64>>,
    constant: f64,
}

fn check_square(q: &DMatrix<f64>) -> Result<usize> {
    if q.nrows() != q.ncols() || q.nrows() == 0 {
        return Err(shape_err(format!("coupling matrix must be square and non-empty, got {:?}", q.shape())));
    }
    Ok(q.nrows())
}

impl TestFunction {
    pub fn cosine(q: DMatrix<f64>) -> Result<Self> {
        let d = check_square(&q)?;
        let dir = q.column_sum() / d as f64;
        Ok(Self { kind: TestFunctionKind::Cosine, dim: d, coupling: Some(q), linear_map: None, direction: Some(dir), constant: 0.0 })
    }

    pub fn quadratic(q: DMatrix<f64>) -> Result<Self> {
        let d = check_square(&q)?;
        let sym = &q + q.transpose();
        Ok(Self { kind: TestFunctionKind::Quadratic, dim: d, coupling: Some(q), linear_map: Some(sym), direction: None, constant: 0.0 })
    }

    pub fn quartic(q: DMatrix<f64>) -> Result<Self> {
        let d = check_square(&q)?;
        let sym = &q + q.transpose();
        Ok(Self { kind: TestFunctionKind::Quartic, dim: d, coupling: Some(q), linear_map: Some(sym), direction: None, constant: 0.0 })
    }

    pub fn sq_norm(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be >= 1".into()));
        }
        Ok(Self { kind: TestFunctionKind::SqNorm, dim, coupling: None, linear_map: None, direction: None, constant: 0.0 })
    }

    pub fn linear(c: DVector<f64>) -> Result<Self> {
        if c.is_empty() {
            return Err(Error::InvalidParameter("dimension must be >= 1".into()));
        }
        Ok(Self { kind: TestFunctionKind::Linear, dim: c.len(), coupling: None, linear_map: None, direction: Some(c), constant: 0.0 })
    }

    pub fn constant(dim: usize, value: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be >= 1".into()));
        }
        Ok(Self { kind: TestFunctionKind::Constant, dim, coupling: None, linear_map: None, direction: None, constant: value })
    }

    /// One of the synthetic functions with a fresh random coupling matrix.
    pub fn synthetic(kind: TestFunctionKind, dim: usize, rng: &mut RngStream) -> Result<Self> {
        match kind {
            TestFunctionKind::Cosine => Self::cosine(synthetic_coupling_matrix(dim, rng)),
            TestFunctionKind::Quadratic => Self::quadratic(synthetic_coupling_matrix(dim, rng)),
            TestFunctionKind::Quartic => Self::quartic(synthetic_coupling_matrix(dim, rng)),
            TestFunctionKind::SqNorm => Self::sq_norm(dim),
            TestFunctionKind::Linear => Self::linear(DVector::from_fn(dim, |_, _| rng.normal())),
            TestFunctionKind::Constant => Self::constant(dim, 1.0),
        }
    }

    pub fn kind(&self) -> TestFunctionKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coupling_matrix(&self) -> Option<&DMatrix<f64>> {
        self.coupling.as_ref()
    }

    /// Coefficients of the linear function.
    pub fn direction(&self) -> Option<&DVector<f64>> {
        match self.kind {
            TestFunctionKind::Linear => self.direction.as_ref(),
            _ => None,
        }
    }

    pub fn constant_value(&self) -> f64 {
        self.constant
    }

    fn quad_form(&self, z: &DVector<f64>) -> f64 {
        let q = self.coupling.as_ref().expect("quadratic forms carry Q");
        z.dot(&(q * z))
    }

    pub fn value(&self, z: &DVector<f64>) -> f64 {
        match self.kind {
            TestFunctionKind::Cosine => self.direction.as_ref().expect("cosine direction").dot(z).cos(),
            TestFunctionKind::Quadratic => self.quad_form(z),
            TestFunctionKind::Quartic => self.quad_form(z).powi(2),
            TestFunctionKind::SqNorm => z.norm_squared(),
            TestFunctionKind::Linear => self.direction.as_ref().expect("linear coefficients").dot(z),
            TestFunctionKind::Constant => self.constant,
        }
    }

    pub fn gradient(&self, z: &DVector<f64>) -> DVector<f64> {
        match self.kind {
            TestFunctionKind::Cosine => {
                let dir = self.direction.as_ref().expect("cosine direction");
                dir * -dir.dot(z).sin()
            }
            TestFunctionKind::Quadratic => self.linear_map.as_ref().expect("symmetric part") * z,
            TestFunctionKind::Quartic => {
                let sym = self.linear_map.as_ref().expect("symmetric part");
                sym * z * (2.0 * self.quad_form(z))
            }
            TestFunctionKind::SqNorm => z * 2.0,
            TestFunctionKind::Linear => self.direction.clone().expect("linear coefficients"),
            TestFunctionKind::Constant => DVector::zeros(z.len()),
        }
    }
}

/// Strictly lower-triangular Bernoulli(1/2) entries, symmetrized.
pub fn synthetic_coupling_matrix(dim: usize, rng: &mut RngStream) -> DMatrix<f64> {
    let mut q = DMatrix::zeros(dim, dim);
    for a in 0..dim {
        for b in 0..a {
            if rng.bernoulli(0.5) {
                q[(a, b)] = 1.0;
                q[(b, a)] = 1.0;
            }
        }
    }
    q
}
