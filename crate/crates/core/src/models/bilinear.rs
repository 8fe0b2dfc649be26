use crate::error::check_dim;
use crate::features::MatrixBasis;
use crate::linalg::unvec;
use crate::{Matrix, Result, Vector};

use super::{LossEval, Model};

/// `F = Y(x) Θ̂ ĉ` with `Θ̂ ∈ ℝ^{p̄×h}`; convex in each block separately.
#[derive(Clone, Debug, PartialEq)]
pub struct BilinearModel {
    y: MatrixBasis,
    theta: Matrix,
    c: Vector,
}

impl BilinearModel {
    pub fn new(y: MatrixBasis, latent_dim: usize) -> Self {
        let p = y.cols();
        Self {
            y,
            theta: Matrix::zeros(p, latent_dim),
            c: Vector::zeros(latent_dim),
        }
    }

    pub fn basis(&self) -> &MatrixBasis {
        &self.y
    }

    pub fn theta(&self) -> &Matrix {
        &self.theta
    }

    pub fn set_theta(&mut self, theta: Matrix) -> Result<()> {
        check_dim("bilinear meta rows", self.theta.nrows(), theta.nrows())?;
        check_dim("bilinear meta cols", self.theta.ncols(), theta.ncols())?;
        self.theta = theta;
        Ok(())
    }
}

impl Model for BilinearModel {
    fn output_dim(&self) -> usize {
        self.y.output_dim()
    }

    fn latent_dim(&self) -> usize {
        self.c.len()
    }

    fn meta_dim(&self) -> usize {
        self.theta.len()
    }

    fn latent(&self) -> &Vector {
        &self.c
    }

    fn set_latent(&mut self, c: Vector) -> Result<()> {
        check_dim("bilinear latent", self.c.len(), c.len())?;
        self.c = c;
        Ok(())
    }

    fn meta_params(&self) -> Vector {
        Vector::from_column_slice(self.theta.as_slice())
    }

    fn set_meta_params(&mut self, theta: &[f64]) -> Result<()> {
        self.theta = unvec(theta, self.theta.nrows(), self.theta.ncols())?;
        Ok(())
    }

    fn predict_with(&self, x: &Vector, c: &Vector) -> Vector {
        self.y.basis_eval(x) * (&self.theta * c)
    }

    fn loss_and_grads_with(&self, x: &Vector, y: &Vector, c: &Vector) -> LossEval {
        let yx = self.y.basis_eval(x);
        let yt = &yx * &self.theta;
        let r = &yt * c - y;
        // ∇_Θ̂ = 2 Yᵀ r ĉᵀ, flattened column-major.
        let g_theta = yx.tr_mul(&r) * c.transpose() * 2.0;
        LossEval {
            value: r.norm_squared(),
            grad_theta: Vector::from_column_slice(g_theta.as_slice()),
            grad_c: yt.tr_mul(&r) * 2.0,
        }
    }
}
