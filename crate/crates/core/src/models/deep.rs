use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // inherent f64 methods shadow it when std is linked
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::check_dim;
use crate::{Error, Matrix, Result, Vector};

use super::{LossEval, Model};

/// Power-iteration floor per normalisation.
pub const MIN_POWER_ITERS: usize = 5;
const MAX_POWER_ITERS: usize = 5000;
const POWER_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeepConfig {
    pub input_dim: usize,
    pub output_dim: usize,
    pub latent_dim: usize,
    pub hidden: Vec<usize>,
    pub spectral_bound: f64,
    pub seed: u64,
}

impl Default for DeepConfig {
    fn default() -> Self {
        Self {
            input_dim: 2,
            output_dim: 1,
            latent_dim: 20,
            hidden: vec![64, 64, 64],
            spectral_bound: 2.0,
            seed: 0,
        }
    }
}

/// `a ↦ W a + b`, with the warm-start vector of the power iteration on `WᵀW`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    pub w: Matrix,
    pub b: Vector,
    pub u: Vector,
}

/// Estimates `σ₁(W)` by power iteration on `WᵀW`, updating the unit vector `u`.
///
/// Runs at least `min_iters` sweeps and stops once successive lower bounds
/// `‖Wu‖ ≤ ‖Wᵀv‖ ≤ σ₁` agree to a relative `1e-9`.
pub fn power_iteration(w: &Matrix, u: &mut Vector, min_iters: usize) -> f64 {
    if w.is_empty() {
        return 0.0;
    }
    if u.norm() == 0.0 {
        u.fill(1.0);
    }
    let n = u.norm();
    *u /= n;
    let mut sigma = 0.0;
    for k in 0..MAX_POWER_ITERS {
        let mut v = w * &*u;
        let lower = v.norm();
        if lower == 0.0 {
            return 0.0;
        }
        v /= lower;
        let mut next = w.tr_mul(&v);
        sigma = next.norm();
        next /= sigma;
        *u = next;
        if k + 1 >= min_iters && sigma - lower <= POWER_TOL * sigma {
            break;
        }
    }
    sigma
}

/// MLP `φ(x; Θ̂) ∈ ℝ^{n×h}` with tanh hidden layers and a linear head whose
/// `n·h` outputs are reshaped column-major; `F = φ(x) ĉ`.
#[derive(Clone, Debug, PartialEq)]
pub struct DeepModel {
    layers: Vec<DenseLayer>,
    output_dim: usize,
    latent_dim: usize,
    spectral_bound: f64,
    c: Vector,
}

struct Forward {
    /// Layer inputs `a_0 = x, a_1, …, a_{L−1}`.
    acts: Vec<Vector>,
    out: Vector,
}

impl DeepModel {
    pub fn new(cfg: &DeepConfig) -> Result<Self> {
        if !(cfg.spectral_bound > 0.0) || cfg.input_dim == 0 || cfg.output_dim == 0 {
            return Err(Error::InvalidParameter("deep model needs positive dimensions and bound"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut dims = vec![cfg.input_dim];
        dims.extend(cfg.hidden.iter().copied());
        dims.push(cfg.output_dim * cfg.latent_dim);
        let layers = dims
            .windows(2)
            .map(|d| {
                let (fan_in, fan_out) = (d[0], d[1]);
                // Glorot weights; non-zero biases keep φ(0) ≠ 0 so ĉ can act at the origin.
                let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
                DenseLayer {
                    w: Matrix::from_fn(fan_out, fan_in, |_, _| a * (2.0 * rng.random::<f64>() - 1.0)),
                    b: Vector::from_fn(fan_out, |_, _| (2.0 * rng.random::<f64>() - 1.0) / (fan_in as f64).sqrt()),
                    u: Vector::from_fn(fan_in, |_, _| rng.random::<f64>() - 0.5),
                }
            })
            .collect();
        let mut model = Self {
            layers,
            output_dim: cfg.output_dim,
            latent_dim: cfg.latent_dim,
            spectral_bound: cfg.spectral_bound,
            c: Vector::zeros(cfg.latent_dim),
        };
        model.spectral_normalize();
        Ok(model)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn spectral_bound(&self) -> f64 {
        self.spectral_bound
    }

    /// Lipschitz constant of `x ↦ vec φ(x)` implied by the per-layer bounds.
    pub fn lipschitz_bound(&self) -> f64 {
        self.spectral_bound.powi(self.layers.len() as i32)
    }

    /// `W ← W · min(1, bound/σ₁(W))` for every layer.
    pub fn spectral_normalize(&mut self) {
        let bound = self.spectral_bound;
        for layer in &mut self.layers {
            let sigma = power_iteration(&layer.w, &mut layer.u, MIN_POWER_ITERS);
            if sigma > bound {
                layer.w *= bound / sigma;
            }
        }
    }

    fn forward(&self, x: &Vector) -> Forward {
        let last = self.layers.len() - 1;
        let mut acts = Vec::with_capacity(self.layers.len());
        let mut a = x.clone();
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = &layer.w * &a + &layer.b;
            if k < last {
                z.apply(|v| *v = v.tanh());
            }
            acts.push(core::mem::replace(&mut a, z));
        }
        Forward { acts, out: a }
    }

    /// `φ(x)` as an `n×h` matrix.
    pub fn phi(&self, x: &Vector) -> Matrix {
        Matrix::from_column_slice(self.output_dim, self.latent_dim, self.forward(x).out.as_slice())
    }
}

impl Model for DeepModel {
    fn output_dim(&self) -> usize {
        self.output_dim
    }

    fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    fn meta_dim(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    fn latent(&self) -> &Vector {
        &self.c
    }

    fn set_latent(&mut self, c: Vector) -> Result<()> {
        check_dim("deep latent", self.latent_dim, c.len())?;
        self.c = c;
        Ok(())
    }

    /// Per layer: `vec(W)` then `b`.
    fn meta_params(&self) -> Vector {
        let mut out = Vec::with_capacity(self.meta_dim());
        for l in &self.layers {
            out.extend_from_slice(l.w.as_slice());
            out.extend_from_slice(l.b.as_slice());
        }
        Vector::from_vec(out)
    }

    fn set_meta_params(&mut self, theta: &[f64]) -> Result<()> {
        check_dim("deep meta", self.meta_dim(), theta.len())?;
        let mut k = 0;
        for l in &mut self.layers {
            let nw = l.w.len();
            l.w.as_mut_slice().copy_from_slice(&theta[k..k + nw]);
            k += nw;
            let nb = l.b.len();
            l.b.as_mut_slice().copy_from_slice(&theta[k..k + nb]);
            k += nb;
        }
        Ok(())
    }

    fn predict_with(&self, x: &Vector, c: &Vector) -> Vector {
        self.phi(x) * c
    }

    fn loss_and_grads_with(&self, x: &Vector, y: &Vector, c: &Vector) -> LossEval {
        let fwd = self.forward(x);
        let phi = Matrix::from_column_slice(self.output_dim, self.latent_dim, fwd.out.as_slice());
        let r = &phi * c - y;
        let grad_c = phi.tr_mul(&r) * 2.0;
        // ∂ℓ/∂φ = 2 r ĉᵀ; its column-major vec is the gradient at the head output.
        let mut delta = Vector::from_column_slice((&r * c.transpose() * 2.0).as_slice());
        let mut grads: Vec<(Matrix, Vector)> = Vec::with_capacity(self.layers.len());
        for (k, layer) in self.layers.iter().enumerate().rev() {
            let a = &fwd.acts[k];
            grads.push((&delta * a.transpose(), delta.clone()));
            if k > 0 {
                let mut back = layer.w.tr_mul(&delta);
                back.zip_apply(a, |d, act| *d *= 1.0 - act * act);
                delta = back;
            }
        }
        grads.reverse();
        let mut flat = Vec::with_capacity(self.meta_dim());
        for (gw, gb) in &grads {
            flat.extend_from_slice(gw.as_slice());
            flat.extend_from_slice(gb.as_slice());
        }
        LossEval {
            value: r.norm_squared(),
            grad_theta: Vector::from_vec(flat),
            grad_c,
        }
    }
}
