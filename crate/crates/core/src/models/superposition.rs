use crate::error::check_dim;
use crate::features::MatrixBasis;
use crate::{Result, Vector};

use super::{LossEval, Model};

/// `F = Y₁(x) Θ̂ + Y₂(x) ĉ`; the loss is jointly convex in `(Θ̂, ĉ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SuperpositionModel {
    y1: MatrixBasis,
    y2: MatrixBasis,
    theta: Vector,
    c: Vector,
}

impl SuperpositionModel {
    pub fn new(y1: MatrixBasis, y2: MatrixBasis) -> Result<Self> {
        check_dim("superposition basis rows", y1.output_dim(), y2.output_dim())?;
        let (p, h) = (y1.cols(), y2.cols());
        Ok(Self {
            y1,
            y2,
            theta: Vector::zeros(p),
            c: Vector::zeros(h),
        })
    }

    pub fn y1(&self) -> &MatrixBasis {
        &self.y1
    }

    pub fn y2(&self) -> &MatrixBasis {
        &self.y2
    }

    pub fn theta(&self) -> &Vector {
        &self.theta
    }
}

impl Model for SuperpositionModel {
    fn output_dim(&self) -> usize {
        self.y1.output_dim()
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
        check_dim("superposition latent", self.c.len(), c.len())?;
        self.c = c;
        Ok(())
    }

    fn meta_params(&self) -> Vector {
        self.theta.clone()
    }

    fn set_meta_params(&mut self, theta: &[f64]) -> Result<()> {
        check_dim("superposition meta", self.theta.len(), theta.len())?;
        self.theta.copy_from_slice(theta);
        Ok(())
    }

    fn predict_with(&self, x: &Vector, c: &Vector) -> Vector {
        self.y1.basis_eval(x) * &self.theta + self.y2.basis_eval(x) * c
    }

    fn loss_and_grads_with(&self, x: &Vector, y: &Vector, c: &Vector) -> LossEval {
        let y1 = self.y1.basis_eval(x);
        let y2 = self.y2.basis_eval(x);
        let r = &y1 * &self.theta + &y2 * c - y;
        LossEval {
            value: r.norm_squared(),
            grad_theta: y1.tr_mul(&r) * 2.0,
            grad_c: y2.tr_mul(&r) * 2.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{BasisLayout, RffBasis};
    use crate::models::finite_difference_grads;
    use crate::Matrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model(seed: u64) -> SuperpositionModel {
        let y1 = MatrixBasis::with_columns(2, 2, 12, BasisLayout::BlockDiagonal, 0.7, seed).unwrap();
        let y2 = MatrixBasis::with_columns(2, 2, 6, BasisLayout::BlockDiagonal, 0.7, seed + 1).unwrap();
        SuperpositionModel::new(y1, y2).unwrap()
    }

    fn randomize(m: &mut SuperpositionModel, rng: &mut ChaCha8Rng) {
        let t: alloc::vec::Vec<f64> = (0..m.meta_dim()).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        m.set_meta_params(&t).unwrap();
        m.set_latent(Vector::from_fn(m.latent_dim(), |_, _| rng.random::<f64>() * 2.0 - 1.0)).unwrap();
    }

    #[test]
    fn zero_parameters_predict_zero() {
        let m = model(0);
        assert_eq!(m.predict(&Vector::from_element(2, 0.4)), Vector::zeros(2));
    }

    #[test]
    fn scalar_hand_arithmetic() {
        // √2·cos(π/4) = 1, so Y1 = Y2 = 1.
        let rff = RffBasis::from_parts(
            Matrix::zeros(1, 1),
            Vector::from_element(1, core::f64::consts::FRAC_PI_4),
            1.0,
            0,
        )
        .unwrap();
        let basis = MatrixBasis::new(rff, 1, BasisLayout::BlockDiagonal);
        let mut m = SuperpositionModel::new(basis.clone(), basis).unwrap();
        m.set_meta_params(&[1.0]).unwrap();
        m.set_latent(Vector::from_element(1, 1.0)).unwrap();
        let e = m.loss_and_grads(&Vector::zeros(1), &Vector::from_element(1, 1.0));
        assert!((e.value - 1.0).abs() < 1e-12);
        assert!((e.grad_theta[0] - 2.0).abs() < 1e-12);
        assert!((e.grad_c[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_residual_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut m = model(1);
        randomize(&mut m, &mut rng);
        let x = Vector::from_column_slice(&[0.2, -0.5]);
        let e = m.loss_and_grads(&x, &m.predict(&x));
        assert_eq!(e.value, 0.0);
        assert!(e.grad_theta.amax() == 0.0 && e.grad_c.amax() == 0.0);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for k in 0..100 {
            let mut m = model(k);
            randomize(&mut m, &mut rng);
            let x = Vector::from_fn(2, |_, _| rng.random::<f64>() * 4.0 - 2.0);
            let y = Vector::from_fn(2, |_, _| rng.random::<f64>() * 4.0 - 2.0);
            let e = m.loss_and_grads(&x, &y);
            let (gt, gc) = finite_difference_grads(&m, &x, &y, 1e-5);
            assert!((&e.grad_theta - &gt).norm() <= 1e-4 * gt.norm().max(1e-8));
            assert!((&e.grad_c - &gc).norm() <= 1e-4 * gc.norm().max(1e-8));
        }
    }

    #[test]
    fn jointly_convex_midpoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut a = model(7);
        let mut b = model(7);
        for _ in 0..200 {
            randomize(&mut a, &mut rng);
            randomize(&mut b, &mut rng);
            let x = Vector::from_fn(2, |_, _| rng.random::<f64>() * 4.0 - 2.0);
            let y = Vector::from_fn(2, |_, _| rng.random::<f64>() * 4.0 - 2.0);
            let mut mid = a.clone();
            mid.set_meta_params(((a.meta_params() + b.meta_params()) * 0.5).as_slice()).unwrap();
            mid.set_latent((a.latent() + b.latent()) * 0.5).unwrap();
            assert!(mid.loss(&x, &y) <= 0.5 * (a.loss(&x, &y) + b.loss(&x, &y)) + 1e-9);
        }
    }
}
