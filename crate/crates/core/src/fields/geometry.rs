use nalgebra::{DMatrix, DVector};

/// Whitened pairwise coordinates for components sharing a diagonal scale.
///
/// With `z~ = z / sigma`, `mu~_j = mu_j / sigma` and the unit direction
/// `mu^_jk = (mu~_j - mu~_k) / |mu~_j - mu~_k|`, the point splits into a part
/// along `mu^_jk` and a part perpendicular to it. Both means share the same
/// perpendicular part.
#[derive(Debug, Clone)]
pub struct MixtureGeometry {
    pub z_tilde: DVector<f64>,
    pub mu_tilde: DMatrix<f64>,
    /// `mu^_jk`, row-major over `(j, k)`; `None` when the means coincide.
    pub mu_hat: Vec<Option<DVector<f64>>>,
    /// `z~ . mu^_jk`
    pub z_par: DMatrix<f64>,
    /// `mu~_j . mu^_jk`
    pub mu_par: DMatrix<f64>,
    /// `|mu~_j - mu~_k|`
    pub gap: DMatrix<f64>,
    /// `|z~_perp - mu~_perp|^2`, the squared perpendicular offset from either mean.
    pub perp_dist_sq: DMatrix<f64>,
    /// `|z~_perp|`, the uncentered perpendicular norm.
    pub z_perp_norm: DMatrix<f64>,
}

/// Means closer than this in whitened units are treated as identical.
pub const DEGENERATE_GAP: f64 = 1e-12;

impl MixtureGeometry {
    pub fn new(z: &DVector<f64>, means: &DMatrix<f64>, scale: &DVector<f64>) -> Self {
        let k = means.nrows();
        let z_tilde = z.component_div(scale);
        let mu_tilde = DMatrix::from_fn(k, z.len(), |j, i| means[(j, i)] / scale[i]);
        let mut mu_hat = vec![None; k * k];
        let mut z_par = DMatrix::zeros(k, k);
        let mut mu_par = DMatrix::zeros(k, k);
        let mut gap = DMatrix::zeros(k, k);
        let mut perp_dist_sq = DMatrix::zeros(k, k);
        let mut z_perp_norm = DMatrix::zeros(k, k);
        let z_sq = z_tilde.norm_squared();
        for j in 0..k {
            let mj = mu_tilde.row(j).transpose();
            let rel = &z_tilde - &mj;
            let rel_sq = rel.norm_squared();
            for kk in 0..k {
                if kk == j {
                    continue;
                }
                let delta = &mj - mu_tilde.row(kk).transpose();
                let g = delta.norm();
                if g < DEGENERATE_GAP {
                    continue;
                }
                let u = delta / g;
                let zp = z_tilde.dot(&u);
                let rel_par = rel.dot(&u);
                z_par[(j, kk)] = zp;
                mu_par[(j, kk)] = mj.dot(&u);
                gap[(j, kk)] = g;
                perp_dist_sq[(j, kk)] = (rel_sq - rel_par * rel_par).max(0.0);
                z_perp_norm[(j, kk)] = (z_sq - zp * zp).max(0.0).sqrt();
                mu_hat[j * k + kk] = Some(u);
            }
        }
        Self { z_tilde, mu_tilde, mu_hat, z_par, mu_par, gap, perp_dist_sq, z_perp_norm }
    }

    pub fn n_components(&self) -> usize {
        self.mu_tilde.nrows()
    }

    pub fn direction(&self, j: usize, k: usize) -> Option<&DVector<f64>> {
        self.mu_hat[j * self.n_components() + k].as_ref()
    }
}
