//! Disturbance models for `w_t^(i)`.

use alloc::vec::Vec;
#[allow(unused_imports)] // inherent f64 methods shadow it when std is linked
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Vector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DisturbanceKind {
    /// Norm exactly `W`, independent random signs per component at every step.
    BoundedAdversarial,
    /// Gaussian `N(0, R²)` per component, clipped to `‖w‖ ≤ W`.
    SubGaussian,
    /// `w ≡ (W/√d)·1`.
    Constant,
    Zero,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceSpec {
    pub kind: DisturbanceKind,
    /// Norm bound `W`.
    pub bound: f64,
    /// Per-component sub-Gaussian parameter `R` (only for [`DisturbanceKind::SubGaussian`]).
    #[serde(default)]
    pub sub_gaussian_r: f64,
}

impl Default for DisturbanceSpec {
    fn default() -> Self {
        Self::zero()
    }
}

impl DisturbanceSpec {
    pub fn zero() -> Self {
        Self {
            kind: DisturbanceKind::Zero,
            bound: 0.0,
            sub_gaussian_r: 0.0,
        }
    }

    pub fn constant(bound: f64) -> Self {
        Self {
            kind: DisturbanceKind::Constant,
            bound,
            sub_gaussian_r: 0.0,
        }
    }

    pub fn bounded(bound: f64) -> Self {
        Self {
            kind: DisturbanceKind::BoundedAdversarial,
            bound,
            sub_gaussian_r: 0.0,
        }
    }

    /// Clipped Gaussian with the default clip radius `W = 4R√dim`.
    pub fn sub_gaussian(r: f64, dim: usize) -> Self {
        Self {
            kind: DisturbanceKind::SubGaussian,
            bound: 4.0 * r * (dim as f64).sqrt(),
            sub_gaussian_r: r,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bound >= 0.0 && self.sub_gaussian_r >= 0.0) {
            return Err(Error::InvalidParameter("disturbance bound and R must be non-negative"));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, dim: usize, rng: &mut R) -> Vector {
        match self.kind {
            DisturbanceKind::Zero => Vector::zeros(dim),
            DisturbanceKind::Constant => {
                Vector::from_element(dim, self.bound / (dim.max(1) as f64).sqrt())
            }
            DisturbanceKind::BoundedAdversarial => {
                let a = self.bound / (dim.max(1) as f64).sqrt();
                Vector::from_fn(dim, |_, _| if rng.random::<bool>() { a } else { -a })
            }
            DisturbanceKind::SubGaussian => {
                let mut w = Vector::from_fn(dim, |_, _| {
                    let z: f64 = StandardNormal.sample(rng);
                    self.sub_gaussian_r * z
                });
                let n = w.norm();
                if n > self.bound {
                    w *= self.bound / n;
                }
                w
            }
        }
    }

    /// `len` consecutive samples.
    pub fn stream<R: Rng + ?Sized>(&self, dim: usize, len: usize, rng: &mut R) -> Vec<Vector> {
        (0..len).map(|_| self.sample(dim, rng)).collect()
    }
}
