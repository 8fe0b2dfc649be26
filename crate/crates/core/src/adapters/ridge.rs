use crate::error::check_dim;
use crate::linalg::{kron, lambda_min_sym};
use crate::{Error, Matrix, Result, Vector};

/// Incremental ridge regression on `vec(Θ̂)` with regressors `Z = cᵀ ⊗ Y(x)`.
///
/// Stores `Σ ZᵀZ` and `Σ Zᵀy`; memory is `O((p̄h)²)` regardless of data volume.
#[derive(Clone, Debug, PartialEq)]
pub struct RidgeMetaAdapter {
    lambda: f64,
    rows: usize,
    cols: usize,
    gram: Matrix,
    moment: Vector,
    samples: usize,
}

impl RidgeMetaAdapter {
    /// Regression for a `rows × cols` (`p̄ × h`) parameter matrix.
    pub fn new(lambda: f64, rows: usize, cols: usize) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter("ridge lambda must be positive"));
        }
        let q = rows * cols;
        Ok(Self {
            lambda,
            rows,
            cols,
            gram: Matrix::zeros(q, q),
            moment: Vector::zeros(q),
            samples: 0,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    /// `V = λI + Σ ZᵀZ`.
    pub fn gram(&self) -> Matrix {
        let q = self.gram.nrows();
        &self.gram + Matrix::identity(q, q) * self.lambda
    }

    pub fn moment(&self) -> &Vector {
        &self.moment
    }

    /// Adds one regressor block `Z` (`n × p̄h`) and target `y`.
    pub fn accumulate(&mut self, z: &Matrix, y: &Vector) -> Result<()> {
        check_dim("ridge regressor width", self.gram.ncols(), z.ncols())?;
        check_dim("ridge target", z.nrows(), y.len())?;
        self.gram += z.tr_mul(z);
        self.moment += z.tr_mul(y);
        self.samples += 1;
        Ok(())
    }

    /// Same as [`accumulate`](Self::accumulate) with `Z = cᵀ ⊗ Y`, using
    /// `ZᵀZ = ccᵀ ⊗ YᵀY` and `Zᵀy = c ⊗ Yᵀy`.
    pub fn accumulate_structured(&mut self, c: &Vector, yx: &Matrix, y: &Vector) -> Result<()> {
        check_dim("ridge latent", self.cols, c.len())?;
        check_dim("ridge basis width", self.rows, yx.ncols())?;
        check_dim("ridge target", yx.nrows(), y.len())?;
        let cc = c * c.transpose();
        self.gram += kron(&cc, &yx.tr_mul(yx));
        let yty = yx.tr_mul(y);
        for j in 0..self.cols {
            let mut seg = self.moment.rows_mut(j * self.rows, self.rows);
            seg.axpy(c[j], &yty, 1.0);
        }
        self.samples += 1;
        Ok(())
    }

    /// Adds a batch of generic regressor blocks.
    pub fn accumulate_batch<'a>(&mut self, batch: impl IntoIterator<Item = (&'a Matrix, &'a Vector)>) -> Result<()> {
        for (z, y) in batch {
            self.accumulate(z, y)?;
        }
        Ok(())
    }

    /// `Θ̂` with `vec(Θ̂) = V⁻¹ Σ Zᵀy`, by Cholesky.
    pub fn solve(&self) -> Result<Matrix> {
        let v = self.gram();
        let chol = v.clone().cholesky().ok_or_else(|| Error::IllConditioned(lambda_min_sym(&v)))?;
        let sol = chol.solve(&self.moment);
        if sol.iter().any(|s| !s.is_finite()) {
            return Err(Error::IllConditioned(lambda_min_sym(&v)));
        }
        Ok(Matrix::from_column_slice(self.rows, self.cols, sol.as_slice()))
    }

    /// `λ_min(V − λI)`, the environment-diversity statistic.
    pub fn diversity_lambda_min(&self) -> f64 {
        lambda_min_sym(&self.gram)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::kronecker_row;
    use alloc::vec::Vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
        Matrix::from_fn(r, c, |_, _| 2.0 * rng.random::<f64>() - 1.0)
    }

    #[test]
    fn empty_batch_leaves_gram() {
        let mut a = RidgeMetaAdapter::new(0.5, 2, 2).unwrap();
        a.accumulate_batch(Vec::new()).unwrap();
        assert_eq!(a.gram(), Matrix::identity(4, 4) * 0.5);
        assert_eq!(a.solve().unwrap(), Matrix::zeros(2, 2));
        assert_eq!(a.diversity_lambda_min(), 0.0);
    }

    #[test]
    fn identity_regressor_adds_identity() {
        let mut a = RidgeMetaAdapter::new(1.0, 3, 1).unwrap();
        a.accumulate(&Matrix::identity(3, 3), &Vector::zeros(3)).unwrap();
        assert_eq!(a.gram(), Matrix::identity(3, 3) * 2.0);
    }

    #[test]
    fn incremental_matches_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (n, p, h) = (2, 3, 2);
        let mut a = RidgeMetaAdapter::new(0.1, p, h).unwrap();
        let mut zs = Vec::new();
        for _ in 0..50 {
            let c = rand_mat(&mut rng, h, 1).column(0).into_owned();
            let yx = rand_mat(&mut rng, n, p);
            let y = rand_mat(&mut rng, n, 1).column(0).into_owned();
            a.accumulate_structured(&c, &yx, &y).unwrap();
            zs.push((kronecker_row(&c, &yx), y));
        }
        let mut v = Matrix::identity(p * h, p * h) * 0.1;
        let mut m = Vector::zeros(p * h);
        for (z, y) in &zs {
            v += z.transpose() * z;
            m += z.transpose() * y;
        }
        assert!((a.gram() - v).amax() < 1e-8);
        assert!((a.moment() - m).amax() < 1e-8);
    }

    #[test]
    fn exact_recovery_noiseless() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (n, p, h) = (2, 3, 2);
        let theta = rand_mat(&mut rng, p, h);
        let mut a = RidgeMetaAdapter::new(1e-10, p, h).unwrap();
        for _ in 0..40 {
            let c = rand_mat(&mut rng, h, 1).column(0).into_owned();
            let yx = rand_mat(&mut rng, n, p);
            let y = &yx * &theta * &c;
            a.accumulate_structured(&c, &yx, &y).unwrap();
        }
        assert!((a.solve().unwrap() - theta).norm() < 1e-6);
    }

    #[test]
    fn heavy_regularisation_shrinks_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut a = RidgeMetaAdapter::new(1e12, 2, 2).unwrap();
        for _ in 0..10 {
            let c = rand_mat(&mut rng, 2, 1).column(0).into_owned();
            let yx = rand_mat(&mut rng, 1, 2);
            a.accumulate_structured(&c, &yx, &Vector::from_element(1, 5.0)).unwrap();
        }
        assert!(a.solve().unwrap().amax() < 1e-9);
    }

    #[test]
    fn repeated_environment_is_rank_deficient() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut a = RidgeMetaAdapter::new(1e-3, 3, 2).unwrap();
        let c = Vector::from_column_slice(&[0.6, 0.8]);
        for _ in 0..100 {
            let yx = rand_mat(&mut rng, 2, 3);
            a.accumulate_structured(&c, &yx, &Vector::zeros(2)).unwrap();
        }
        assert!(a.diversity_lambda_min().abs() < 1e-9);
    }

    #[test]
    fn diverse_environments_grow_lambda_min() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut a = RidgeMetaAdapter::new(1e-3, 3, 2).unwrap();
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 1..=20 {
            let mut c = rand_mat(&mut rng, 2, 1).column(0).into_owned();
            c /= c.norm();
            for _ in 0..10 {
                let yx = rand_mat(&mut rng, 2, 3);
                a.accumulate_structured(&c, &yx, &Vector::zeros(2)).unwrap();
            }
            xs.push(i as f64);
            ys.push(a.diversity_lambda_min());
        }
        assert!(crate::linalg::ls_slope(&xs, &ys) > 0.0);
    }

    #[test]
    fn dimension_mismatch() {
        let mut a = RidgeMetaAdapter::new(1.0, 2, 2).unwrap();
        assert!(a.accumulate(&Matrix::zeros(1, 3), &Vector::zeros(1)).is_err());
        assert!(RidgeMetaAdapter::new(0.0, 1, 1).is_err());
    }
}
