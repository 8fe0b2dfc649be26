//! Random Fourier features and the matrix-valued bases built from them.

use alloc::vec::Vec;
use core::f64::consts::{PI, SQRT_2};
#[allow(unused_imports)] // inherent f64 methods shadow it when std is linked
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::check_dim;
use crate::linalg::median;
use crate::{Error, Matrix, Result, Vector};

/// `z(x) = √(2/D) cos(Ωx + b)`, `Ω_ij ~ N(0, σ²)`, `b_j ~ U[0, 2π)`.
///
/// Approximates the Gaussian kernel `exp(−σ²‖x − x′‖²/2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RffBasis {
    omega: Matrix,
    phases: Vector,
    sigma: f64,
    seed: u64,
}

impl RffBasis {
    pub fn new(input_dim: usize, num_features: usize, sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter("RFF bandwidth must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let omega = Matrix::from_fn(num_features, input_dim, |_, _| {
            let s: f64 = StandardNormal.sample(&mut rng);
            sigma * s
        });
        let phases = Vector::from_fn(num_features, |_, _| rng.random::<f64>() * 2.0 * PI);
        Ok(Self {
            omega,
            phases,
            sigma,
            seed,
        })
    }

    /// Builds a basis from explicit frequencies and phases (e.g. a reloaded sidecar).
    pub fn from_parts(omega: Matrix, phases: Vector, sigma: f64, seed: u64) -> Result<Self> {
        check_dim("RFF phases", omega.nrows(), phases.len())?;
        Ok(Self {
            omega,
            phases,
            sigma,
            seed,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.omega.ncols()
    }

    pub fn num_features(&self) -> usize {
        self.omega.nrows()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn omega(&self) -> &Matrix {
        &self.omega
    }

    pub fn phases(&self) -> &Vector {
        &self.phases
    }

    /// `z(x)`; `‖z(x)‖ ≤ √2`.
    pub fn rff_eval(&self, x: &Vector) -> Vector {
        let d = self.num_features();
        if d == 0 {
            return Vector::zeros(0);
        }
        let scale = (2.0 / d as f64).sqrt();
        let mut z = &self.omega * x + &self.phases;
        z.apply(|v| *v = scale * v.cos());
        z
    }
}

/// Median-heuristic bandwidth `σ = 1/median‖x_a − x_b‖` over distinct sample pairs.
///
/// At most `max_pairs` consecutive-stride pairs are used. Returns 1 when the
/// samples are all identical.
pub fn median_heuristic_sigma(samples: &[Vector], max_pairs: usize) -> f64 {
    let n = samples.len();
    if n < 2 {
        return 1.0;
    }
    let mut dists = Vec::new();
    let total = n * (n - 1) / 2;
    let stride = (total / max_pairs.max(1)).max(1);
    let mut k = 0usize;
    'outer: for a in 0..n {
        for b in (a + 1)..n {
            if k.is_multiple_of(stride) {
                dists.push((&samples[a] - &samples[b]).norm());
                if dists.len() >= max_pairs {
                    break 'outer;
                }
            }
            k += 1;
        }
    }
    match median(&mut dists) {
        Some(m) if m > 0.0 => 1.0 / m,
        _ => 1.0,
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisLayout {
    /// Row `r` holds `z(x)` in columns `rD..(r+1)D`; `p = nD`.
    #[default]
    BlockDiagonal,
    /// Every row equals `z(x)`; `p = D`.
    Shared,
}

/// `Y : ℝ^k → ℝ^{n×p}` assembled from one RFF map.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixBasis {
    rff: RffBasis,
    output_dim: usize,
    layout: BasisLayout,
}

impl MatrixBasis {
    pub fn new(rff: RffBasis, output_dim: usize, layout: BasisLayout) -> Self {
        Self {
            rff,
            output_dim,
            layout,
        }
    }

    /// Basis with `cols` columns; for the block-diagonal layout `cols` must be
    /// a multiple of `output_dim`.
    pub fn with_columns(
        input_dim: usize,
        output_dim: usize,
        cols: usize,
        layout: BasisLayout,
        sigma: f64,
        seed: u64,
    ) -> Result<Self> {
        let features = match layout {
            BasisLayout::BlockDiagonal => {
                if output_dim == 0 || !cols.is_multiple_of(output_dim) {
                    return Err(Error::InvalidParameter(
                        "block-diagonal basis width must be a multiple of the output dimension",
                    ));
                }
                cols / output_dim
            }
            BasisLayout::Shared => cols,
        };
        Ok(Self::new(RffBasis::new(input_dim, features, sigma, seed)?, output_dim, layout))
    }

    pub fn rff(&self) -> &RffBasis {
        &self.rff
    }

    pub fn layout(&self) -> BasisLayout {
        self.layout
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn input_dim(&self) -> usize {
        self.rff.input_dim()
    }

    pub fn cols(&self) -> usize {
        match self.layout {
            BasisLayout::BlockDiagonal => self.output_dim * self.rff.num_features(),
            BasisLayout::Shared => self.rff.num_features(),
        }
    }

    pub fn basis_eval(&self, x: &Vector) -> Matrix {
        let z = self.rff.rff_eval(x);
        let d = z.len();
        let mut y = Matrix::zeros(self.output_dim, self.cols());
        for r in 0..self.output_dim {
            let offset = match self.layout {
                BasisLayout::BlockDiagonal => r * d,
                BasisLayout::Shared => 0,
            };
            for j in 0..d {
                y[(r, offset + j)] = z[j];
            }
        }
        y
    }

    /// Certified `sup_x ‖Y(x)‖`.
    pub fn bound_constant(&self) -> f64 {
        if self.rff.num_features() == 0 || self.output_dim == 0 {
            return 0.0;
        }
        match self.layout {
            // Blocks act on disjoint columns: ‖Y‖ = max_r ‖z‖.
            BasisLayout::BlockDiagonal => SQRT_2,
            // Y = 1 zᵀ has rank one: ‖Y‖ = √n ‖z‖.
            BasisLayout::Shared => (2.0 * self.output_dim as f64).sqrt(),
        }
    }
}
