//! Function classes `F(φ(x; Θ̂), ĉ)` with loss and gradient evaluation.
//!
//! Every model splits its parameters into a meta block `Θ̂` (flattened
//! column-major) and a latent block `ĉ`. The loss is `‖F − y‖²`.

mod bilinear;
mod deep;
mod superposition;

use alloc::vec::Vec;

use crate::linalg::project_ball;
use crate::{Matrix, Result, Vector};

pub use bilinear::BilinearModel;
pub use deep::{power_iteration, DeepConfig, DeepModel, DenseLayer};
pub use superposition::SuperpositionModel;

/// Loss value and gradients with respect to both parameter blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct LossEval {
    pub value: f64,
    pub grad_theta: Vector,
    pub grad_c: Vector,
}

pub trait Model {
    /// Dimension of the prediction.
    fn output_dim(&self) -> usize;
    fn latent_dim(&self) -> usize;
    fn meta_dim(&self) -> usize;

    fn latent(&self) -> &Vector;
    fn set_latent(&mut self, c: Vector) -> Result<()>;

    fn meta_params(&self) -> Vector;
    fn set_meta_params(&mut self, theta: &[f64]) -> Result<()>;

    fn predict_with(&self, x: &Vector, c: &Vector) -> Vector;

    fn loss_and_grads_with(&self, x: &Vector, y: &Vector, c: &Vector) -> LossEval;

    fn predict(&self, x: &Vector) -> Vector {
        self.predict_with(x, self.latent())
    }

    fn loss_and_grads(&self, x: &Vector, y: &Vector) -> LossEval {
        self.loss_and_grads_with(x, y, self.latent())
    }

    fn loss(&self, x: &Vector, y: &Vector) -> f64 {
        (self.predict(x) - y).norm_squared()
    }
}

/// `Z = cᵀ ⊗ Y(x)`, so that `Z · vec(Θ) = Y(x) Θ c` with column-major `vec`.
pub fn kronecker_row(c: &Vector, yx: &Matrix) -> Matrix {
    let (n, p) = yx.shape();
    let mut z = Matrix::zeros(n, p * c.len());
    for (j, cj) in c.iter().enumerate() {
        if *cj != 0.0 {
            z.view_mut((0, j * p), (n, p)).copy_from(&(yx * *cj));
        }
    }
    z
}

/// Euclidean-ball projection of the latent block.
pub fn project_latent<M: Model + ?Sized>(model: &mut M, radius: f64) -> Result<()> {
    let mut c = model.latent().clone();
    project_ball(c.as_mut_slice(), radius);
    model.set_latent(c)
}

/// Frobenius-ball projection of the meta block.
pub fn project_meta<M: Model + ?Sized>(model: &mut M, radius: f64) -> Result<()> {
    let mut theta = model.meta_params();
    project_ball(theta.as_mut_slice(), radius);
    model.set_meta_params(theta.as_slice())
}

/// The three model classes behind one owner.
#[derive(Clone, Debug, PartialEq)]
pub enum ModelKind {
    Superposition(SuperpositionModel),
    Bilinear(BilinearModel),
    Deep(DeepModel),
}

macro_rules! dispatch {
    ($self:ident, $m:ident => $e:expr) => {
        match $self {
            ModelKind::Superposition($m) => $e,
            ModelKind::Bilinear($m) => $e,
            ModelKind::Deep($m) => $e,
        }
    };
}

impl Model for ModelKind {
    fn output_dim(&self) -> usize {
        dispatch!(self, m => m.output_dim())
    }
    fn latent_dim(&self) -> usize {
        dispatch!(self, m => m.latent_dim())
    }
    fn meta_dim(&self) -> usize {
        dispatch!(self, m => m.meta_dim())
    }
    fn latent(&self) -> &Vector {
        dispatch!(self, m => m.latent())
    }
    fn set_latent(&mut self, c: Vector) -> Result<()> {
        dispatch!(self, m => m.set_latent(c))
    }
    fn meta_params(&self) -> Vector {
        dispatch!(self, m => m.meta_params())
    }
    fn set_meta_params(&mut self, theta: &[f64]) -> Result<()> {
        dispatch!(self, m => m.set_meta_params(theta))
    }
    fn predict_with(&self, x: &Vector, c: &Vector) -> Vector {
        dispatch!(self, m => m.predict_with(x, c))
    }
    fn loss_and_grads_with(&self, x: &Vector, y: &Vector, c: &Vector) -> LossEval {
        dispatch!(self, m => m.loss_and_grads_with(x, y, c))
    }
}

/// Central finite-difference gradients of the loss, `(∇_Θ̂, ∇_ĉ)`.
///
/// Test and check-suite oracle; independent of every analytic gradient.
pub fn finite_difference_grads<M: Model + Clone>(model: &M, x: &Vector, y: &Vector, step: f64) -> (Vector, Vector) {
    let theta = model.meta_params();
    let mut probe = model.clone();
    let mut g_theta = Vec::with_capacity(theta.len());
    let mut work = theta.clone();
    for k in 0..theta.len() {
        work[k] = theta[k] + step;
        probe.set_meta_params(work.as_slice()).expect("same shape");
        let plus = probe.loss(x, y);
        work[k] = theta[k] - step;
        probe.set_meta_params(work.as_slice()).expect("same shape");
        let minus = probe.loss(x, y);
        work[k] = theta[k];
        g_theta.push((plus - minus) / (2.0 * step));
    }
    probe.set_meta_params(theta.as_slice()).expect("same shape");
    let c = model.latent().clone();
    let mut g_c = Vec::with_capacity(c.len());
    let mut cw = c.clone();
    for k in 0..c.len() {
        cw[k] = c[k] + step;
        let plus = (probe.predict_with(x, &cw) - y).norm_squared();
        cw[k] = c[k] - step;
        let minus = (probe.predict_with(x, &cw) - y).norm_squared();
        cw[k] = c[k];
        g_c.push((plus - minus) / (2.0 * step));
    }
    (Vector::from_vec(g_theta), Vector::from_vec(g_c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::vec_of;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
        Matrix::from_fn(r, c, |_, _| rng.random::<f64>() * 2.0 - 1.0)
    }

    #[test]
    fn kronecker_scalar_latent() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let y = random_matrix(&mut rng, 3, 4);
        assert_eq!(kronecker_row(&Vector::from_element(1, 1.0), &y), y);
        assert_eq!(kronecker_row(&Vector::zeros(2), &y), Matrix::zeros(3, 8));
    }

    #[test]
    fn kronecker_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let (n, p, h) = (
                rng.random_range(1..=8),
                rng.random_range(1..=8),
                rng.random_range(1..=8),
            );
            let y = random_matrix(&mut rng, n, p);
            let theta = random_matrix(&mut rng, p, h);
            let c = random_matrix(&mut rng, h, 1).column(0).into_owned();
            let lhs = kronecker_row(&c, &y) * vec_of(&theta);
            let rhs = &y * &theta * &c;
            assert!((lhs - rhs).amax() <= 1e-12);
        }
    }
}
