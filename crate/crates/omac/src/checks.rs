//! Invariant check suites. Each check returns a verdict with its measured
//! margin; a failing check is data, not an error.

use omac_core::adapters::{OgdAdapter, RidgeMetaAdapter, StepSchedule};
use omac_core::controller::{run_sequence, ControlLaw, Estimator, InnerReset, MetaAdapter, OmacController, PendulumLaw, PseudoInverseLaw, Variant};
use omac_core::disturbance::DisturbanceSpec;
use omac_core::dynamics::{ControlAffinePlant, Pendulum, PendulumParams, Plant};
use omac_core::features::{BasisLayout, MatrixBasis};
use omac_core::linalg::{kron, ls_slope, median, spectral_norm, vec_of};
use omac_core::metrics::{ace, estimate_eiss_constants, eiss_bound, EissConstants, EpisodeLog};
use omac_core::models::{
    finite_difference_grads, kronecker_row, BilinearModel, DeepConfig, DeepModel, Model, ModelKind, SuperpositionModel,
};
use omac_core::{Matrix, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::benchmark::CheckVerdict;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    All,
    Eiss,
    Regret,
    Ridge,
    Gradients,
    Spectral,
    Kronecker,
}

pub fn run_suite(suite: Suite) -> Vec<CheckVerdict> {
    let mut out = Vec::new();
    let all = suite == Suite::All;
    if all || suite == Suite::Eiss {
        out.push(eiss_randomized(100));
        out.push(eiss_tightness());
        out.push(eiss_negative());
    }
    if all || suite == Suite::Regret {
        out.push(ogd_regret(&[100, 1_000, 10_000], 10));
        out.push(nested_regret(50));
    }
    if all || suite == Suite::Ridge {
        out.push(ridge_trend(10));
        out.push(ridge_degenerate());
    }
    if all || suite == Suite::Gradients {
        out.push(gradients(100));
    }
    if all || suite == Suite::Spectral {
        out.push(spectral(100));
    }
    if all || suite == Suite::Kronecker {
        out.push(kronecker(100));
    }
    out
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Vector {
    Vector::from_fn(n, |_, _| normal(rng))
}

fn normal_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
    Matrix::from_fn(r, c, |_, _| normal(rng))
}

/// Scalar plant `x⁺ = a x + u − f + w` with `f = c₀ sin x + c₁`.
fn scalar_plant(a: f64) -> ControlAffinePlant {
    ControlAffinePlant::scalar(a, |x, c| Vector::from_element(1, c[0] * x[0].sin() + c[1]))
}

fn scalar_eiss(a: f64) -> EissConstants {
    estimate_eiss_constants(&Matrix::from_element(1, 1, a)).expect("|a| < 1")
}

fn episode(
    estimator: &mut Estimator,
    plant: &dyn Plant,
    law: &dyn ControlLaw,
    conditions: &[Vector],
    disturbance: &DisturbanceSpec,
    horizon: usize,
    rng: &mut ChaCha8Rng,
) -> omac_core::Result<EpisodeLog> {
    let d = plant.output_dim();
    let streams: Vec<Vec<Vector>> = conditions.iter().map(|_| disturbance.stream(d, horizon, rng)).collect();
    run_sequence(estimator, plant, law, conditions, &streams, plant.initial_state())
}

fn random_disturbance(rng: &mut ChaCha8Rng, d: usize) -> DisturbanceSpec {
    let w = rng.random_range(0.0..0.5);
    match rng.random_range(0..3) {
        0 => DisturbanceSpec::bounded(w),
        1 => DisturbanceSpec::constant(w),
        _ => DisturbanceSpec::sub_gaussian(w / 4.0, d),
    }
}

/// `ace ≤ eiss_bound` with no tolerance, half scalar and half pendulum episodes.
pub fn eiss_randomized(instances: usize) -> CheckVerdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1e_aa_01);
    let mut held = 0;
    let mut min_margin = f64::INFINITY;
    let mut errors = Vec::new();
    let pend = Pendulum::new(PendulumParams::default()).expect("default pendulum");
    let pend_law = PendulumLaw::lqr(pend.clone(), [1.0, 1.0], 1.0).expect("lqr");
    let pend_eiss = estimate_eiss_constants(&pend_law.closed_loop_matrix()).expect("stable closed loop");
    for k in 0..instances {
        let mut estimator = if rng.random_bool(0.5) {
            Estimator::NoAdapt
        } else {
            Estimator::Omniscient
        };
        let result = if k % 2 == 0 {
            let a = rng.random_range(-0.9..0.9);
            let plant = scalar_plant(a);
            let law = PseudoInverseLaw::new(plant.clone());
            let conditions: Vec<Vector> = (0..3).map(|_| normal_vec(&mut rng, 2) * 0.3).collect();
            let dist = random_disturbance(&mut rng, 1);
            episode(&mut estimator, &plant, &law, &conditions, &dist, 200, &mut rng)
                .and_then(|log| Ok((ace(&log)?, eiss_bound(&log, &scalar_eiss(a))?)))
        } else {
            let conditions: Vec<Vector> = (0..2)
                .map(|_| Vector::from_fn(2, |_, _| rng.random_range(-4.0..4.0)))
                .collect();
            let dist = random_disturbance(&mut rng, 1);
            episode(&mut estimator, &pend, &pend_law, &conditions, &dist, 200, &mut rng)
                .and_then(|log| Ok((ace(&log)?, eiss_bound(&log, &pend_eiss)?)))
        };
        match result {
            Ok((a, b)) => {
                if a <= b {
                    held += 1;
                }
                min_margin = min_margin.min(b - a);
            }
            Err(e) => errors.push(format!("instance {k}: {e}")),
        }
    }
    CheckVerdict::new(
        "eiss_randomized",
        held == instances,
        format!("{held}/{instances} within bound, min margin {min_margin:.3e}{}", fmt_errors(&errors)),
    )
}

fn fmt_errors(errors: &[String]) -> String {
    if errors.is_empty() {
        String::new()
    } else {
        format!("; errors: {}", errors.join("; "))
    }
}

/// Constant disturbance on a contracting scalar system over `T` steps:
/// `(ace, γ|w|/(1−ρ))`.
pub fn constant_disturbance_episode(a: f64, w: f64, horizon: usize) -> (f64, EissConstants, EpisodeLog) {
    let plant = scalar_plant(a);
    let law = PseudoInverseLaw::new(plant.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let log = episode(
        &mut Estimator::Omniscient,
        &plant,
        &law,
        &[Vector::zeros(2)],
        &DisturbanceSpec::constant(w),
        horizon,
        &mut rng,
    )
    .expect("contracting scalar system");
    (ace(&log).expect("non-empty"), scalar_eiss(a), log)
}

/// ACE of the constant-disturbance system within 2% of `γ|w|/(1−ρ)` at `T = 2000`.
pub fn eiss_tightness() -> CheckVerdict {
    let w = 1.0;
    let (a, k, _) = constant_disturbance_episode(0.5, w, 2000);
    let limit = k.gain() * w;
    let rel = (a - limit).abs() / limit;
    CheckVerdict::new(
        "eiss_tightness",
        rel <= 0.02,
        format!("ace {a:.6} vs gamma|w|/(1-rho) {limit:.6}, relative gap {rel:.3e}"),
    )
}

/// Halving `γ` must break the bound on the constant-disturbance system.
pub fn eiss_negative() -> CheckVerdict {
    let (a, k, log) = constant_disturbance_episode(0.5, 1.0, 2000);
    let halved = EissConstants::new(k.beta, k.rho, 0.5 * k.gamma).expect("valid constants");
    let bound = eiss_bound(&log, &halved).expect("non-empty");
    CheckVerdict::new(
        "eiss_negative",
        a > bound,
        format!("with halved gamma: ace {a:.6} vs bound {bound:.6} (violation expected)"),
    )
}

/// `argmin_{‖x‖≤r} xᵀHx − 2gᵀx` by bisection on the multiplier of the ball.
pub fn ball_constrained_quadratic_min(h: &Matrix, g: &Vector, r: f64) -> Vector {
    let n = g.len();
    let solve = |mu: f64| -> Vector {
        let m = h + Matrix::identity(n, n) * mu;
        m.clone()
            .cholesky()
            .map(|c| c.solve(g))
            .unwrap_or_else(|| m.pseudo_inverse(1e-14).expect("svd") * g)
    };
    let x0 = solve(0.0);
    if x0.norm() <= r {
        return x0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while solve(hi).norm() > r {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if solve(mid).norm() > r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    solve(hi)
}

/// OGD on `f_t(x) = ‖A_t x − b_t‖²` over a ball: regret `≤ 1.5·G·D·√T`.
pub fn ogd_regret(horizons: &[usize], per_horizon: usize) -> CheckVerdict {
    let results: Vec<(usize, f64, f64)> = horizons
        .iter()
        .flat_map(|&t| (0..per_horizon).map(move |k| (t, k)))
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&(horizon, k)| {
            let mut rng = ChaCha8Rng::seed_from_u64((horizon * 1000 + k) as u64);
            let dim = rng.random_range(1..=5);
            let radius = rng.random_range(0.5..3.0);
            let center = normal_vec(&mut rng, dim) * 2.0;
            let family: Vec<(Matrix, Vector)> = (0..horizon)
                .map(|_| {
                    let a = normal_mat(&mut rng, dim, dim) / (dim as f64).sqrt();
                    let b = &a * &center + normal_vec(&mut rng, dim) * 0.5;
                    (a, b)
                })
                .collect();
            let g = family
                .iter()
                .map(|(a, b)| {
                    let s = spectral_norm(a);
                    2.0 * s * (s * radius + b.norm())
                })
                .fold(0.0, f64::max);
            let d = 2.0 * radius;
            let mut ogd = OgdAdapter::ball(radius, StepSchedule::InverseSqrt { d, g });
            let mut x = Vector::zeros(dim);
            let mut loss = 0.0;
            let mut hess = Matrix::zeros(dim, dim);
            let mut lin = Vector::zeros(dim);
            for (a, b) in &family {
                let r = a * &x - b;
                loss += r.norm_squared();
                let grad = a.tr_mul(&r) * 2.0;
                ogd.step(x.as_mut_slice(), grad.as_slice()).expect("finite gradient");
                hess += a.tr_mul(a);
                lin += a.tr_mul(b);
            }
            let best = ball_constrained_quadratic_min(&hess, &lin, radius);
            let best_loss: f64 = family.iter().map(|(a, b)| (a * &best - b).norm_squared()).sum();
            let regret = loss - best_loss;
            (horizon, regret, 1.5 * g * d * (horizon as f64).sqrt())
        })
        .collect();
    let held = results.iter().filter(|(_, r, b)| r <= b).count();
    let worst = results.iter().map(|(_, r, b)| r / b).fold(f64::NEG_INFINITY, f64::max);
    CheckVerdict::new(
        "ogd_regret",
        held == results.len(),
        format!(
            "{held}/{} instances within 1.5GD√T over T in {horizons:?}, max regret/bound {worst:.3e}",
            results.len()
        ),
    )
}

/// Outcome of one nested-OCO instance.
#[derive(Clone, Copy, Debug)]
pub struct NestedRegret {
    pub total: f64,
    pub outer: f64,
    pub inner: f64,
}

/// Runs the convex meta-loop on a noiseless superposition system with
/// `(Θ, c⁽ⁱ⁾)` inside the balls, so the joint comparator loss is exactly 0.
pub fn nested_instance(seed: u64) -> NestedRegret {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (input, n, p, h) = (3, 2, 8, 4);
    let (n_env, horizon) = (10, 50);
    let y1 = MatrixBasis::with_columns(input, n, p, BasisLayout::BlockDiagonal, 1.0, seed ^ 1).expect("basis");
    let y2 = MatrixBasis::with_columns(input, n, h, BasisLayout::BlockDiagonal, 1.0, seed ^ 2).expect("basis");
    let (k_theta, k_c) = (4.0, 2.0);
    let mut theta = normal_vec(&mut rng, p);
    theta *= 0.5 * k_theta / theta.norm();
    let envs: Vec<Vector> = (0..n_env)
        .map(|_| {
            let c = normal_vec(&mut rng, h);
            &c * (rng.random_range(0.1..0.5) * k_c / c.norm())
        })
        .collect();
    let model = ModelKind::Superposition(SuperpositionModel::new(y1.clone(), y2.clone()).expect("bases"));
    let outer = OgdAdapter::ball(k_theta, StepSchedule::InverseSqrt { d: 2.0 * k_theta, g: 50.0 * horizon as f64 });
    let inner = OgdAdapter::ball(k_c, StepSchedule::InverseSqrt { d: 2.0 * k_c, g: 20.0 });
    let mut ctrl = OmacController::new(model, Variant::Convex, MetaAdapter::Ogd(outer), inner, InnerReset::Zero)
        .expect("convex wiring");

    let (mut total, mut outer_regret, mut inner_regret) = (0.0, 0.0, 0.0);
    let mut g_outer_sum = Vector::zeros(p);
    for c in &envs {
        let theta_hat = ctrl.model().meta_params();
        let mut g_env = Vector::zeros(p);
        let mut g_inner_sum = Vector::zeros(h);
        for _ in 0..horizon {
            let x = normal_vec(&mut rng, input);
            let y = y1.basis_eval(&x) * &theta + y2.basis_eval(&x) * c;
            let c_hat = ctrl.model().latent().clone();
            let eval = ctrl.model().loss_and_grads(&x, &y);
            total += eval.value;
            g_env += &eval.grad_theta;
            inner_regret += eval.grad_c.dot(&c_hat);
            g_inner_sum += &eval.grad_c;
            ctrl.observe(&x, &y).expect("finite");
        }
        inner_regret += k_c * g_inner_sum.norm();
        outer_regret += g_env.dot(&theta_hat);
        g_outer_sum += g_env;
        ctrl.meta_update(None).expect("ogd step");
        ctrl.reset_inner().expect("reset");
    }
    outer_regret += k_theta * g_outer_sum.norm();
    NestedRegret {
        total,
        outer: outer_regret,
        inner: inner_regret,
    }
}

/// Total regret `≤ 𝒜₁ + 𝒜₂ + 1e-6` on random superposition systems.
pub fn nested_regret(instances: usize) -> CheckVerdict {
    let results: Vec<NestedRegret> = (0..instances as u64).into_par_iter().map(|s| nested_instance(1000 + s)).collect();
    let held = results.iter().filter(|r| r.total <= r.outer + r.inner + 1e-6).count();
    let min_slack = results
        .iter()
        .map(|r| r.outer + r.inner - r.total)
        .fold(f64::INFINITY, f64::min);
    CheckVerdict::new(
        "nested_regret",
        held == instances,
        format!("{held}/{instances} decompositions hold, min slack {min_slack:.3e}"),
    )
}

/// Synthetic bilinear regression: `y = Y(x) Θ c + w`, clipped-Gaussian `w`.
pub struct RidgeSetup {
    pub basis: MatrixBasis,
    pub theta: Matrix,
    pub noise: DisturbanceSpec,
    pub samples_per_env: usize,
    pub lambda: f64,
}

impl RidgeSetup {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let basis = MatrixBasis::with_columns(2, 2, 6, BasisLayout::BlockDiagonal, 1.0, seed ^ 0xb).expect("basis");
        let theta = normal_mat(&mut rng, 6, 3);
        Self {
            basis,
            theta,
            noise: DisturbanceSpec::sub_gaussian(0.1, 2),
            samples_per_env: 20,
            lambda: 1.0,
        }
    }

    /// `‖Θ̂⁽ⁱ⁾ − Θ‖²_F` after each environment, and the final adapter.
    pub fn run(&self, envs: &[Vector], rng: &mut ChaCha8Rng) -> (Vec<f64>, RidgeMetaAdapter) {
        let (p, h) = self.theta.shape();
        let mut ridge = RidgeMetaAdapter::new(self.lambda, p, h).expect("positive lambda");
        let mut errors = Vec::with_capacity(envs.len());
        for c in envs {
            for _ in 0..self.samples_per_env {
                let x = normal_vec(rng, 2);
                let yx = self.basis.basis_eval(&x);
                let y = &yx * &self.theta * c + self.noise.sample(2, rng);
                ridge.accumulate_structured(c, &yx, &y).expect("dimensions");
            }
            let est = ridge.solve().expect("λ > 0");
            errors.push((est - &self.theta).norm_squared());
        }
        (errors, ridge)
    }
}

/// Log-log slope of `‖Θ̂⁽ⁱ⁾ − Θ‖²` over `i ∈ [5, 50]` for diverse environments.
pub fn ridge_trend_slopes(seeds: usize) -> Vec<f64> {
    (0..seeds as u64)
        .into_par_iter()
        .map(|s| {
            let setup = RidgeSetup::new(500 + s);
            let mut rng = ChaCha8Rng::seed_from_u64(900 + s);
            let envs: Vec<Vector> = (0..50).map(|_| normal_vec(&mut rng, 3)).collect();
            let (errors, _) = setup.run(&envs, &mut rng);
            let xs: Vec<f64> = (5..=50).map(|i| (i as f64).ln()).collect();
            let ys: Vec<f64> = (5..=50).map(|i| errors[i - 1].ln()).collect();
            ls_slope(&xs, &ys)
        })
        .collect()
}

pub fn ridge_trend(seeds: usize) -> CheckVerdict {
    let mut slopes = ridge_trend_slopes(seeds);
    let m = median(&mut slopes).unwrap_or(f64::NAN);
    CheckVerdict::new(
        "ridge_slope",
        m <= -0.7,
        format!("median log-log slope {m:.3} over {seeds} seeds (need <= -0.7)"),
    )
}

/// Repeated `c`: `λ_min(V − λI)` stays 0 and the error keeps the part of `Θ`
/// orthogonal to `c`.
pub fn ridge_degenerate() -> CheckVerdict {
    let setup = RidgeSetup::new(77);
    let mut rng = ChaCha8Rng::seed_from_u64(78);
    let c = normal_vec(&mut rng, 3);
    let envs = vec![c.clone(); 50];
    let (errors, ridge) = setup.run(&envs, &mut rng);
    let gram = ridge.gram() - Matrix::identity(18, 18) * setup.lambda;
    let scale = spectral_norm(&gram);
    let lmin = ridge.diversity_lambda_min();
    let proj = Matrix::identity(3, 3) - &c * c.transpose() / c.norm_squared();
    let floor = (&setup.theta * proj).norm_squared();
    let last = *errors.last().expect("50 environments");
    let pinned = lmin.abs() <= 1e-9 * scale;
    let stuck = last >= floor * (1.0 - 1e-9);
    CheckVerdict::new(
        "ridge_degenerate",
        pinned && stuck,
        format!("lambda_min {lmin:.3e} (scale {scale:.3e}), error {last:.4} vs floor {floor:.4}"),
    )
}

fn relative_error(analytic: &Vector, reference: &Vector) -> f64 {
    (analytic - reference).norm() / reference.norm().max(1e-8)
}

/// Max relative error of analytic vs central-difference gradients for one model.
pub fn gradient_error(model: &ModelKind, x: &Vector, y: &Vector) -> f64 {
    let eval = model.loss_and_grads(x, y);
    let (fd_theta, fd_c) = finite_difference_grads(model, x, y, 1e-5);
    relative_error(&eval.grad_theta, &fd_theta).max(relative_error(&eval.grad_c, &fd_c))
}

/// A random model of class `k % 3` with random parameters and a random sample.
pub fn random_gradient_instance(k: usize) -> (ModelKind, Vector, Vector) {
    let mut rng = ChaCha8Rng::seed_from_u64(0x9_0000 + k as u64);
    let input = rng.random_range(1..=4);
    let n = rng.random_range(1..=3);
    let h = rng.random_range(1..=5);
    let sigma = rng.random_range(0.3..2.0);
    let layout = if rng.random_bool(0.5) {
        BasisLayout::BlockDiagonal
    } else {
        BasisLayout::Shared
    };
    let mut model = match k % 3 {
        0 => {
            let y1 = MatrixBasis::with_columns(input, n, 4 * n, layout, sigma, k as u64).expect("basis");
            let y2_layout = if h % n == 0 { layout } else { BasisLayout::Shared };
            let y2 = MatrixBasis::with_columns(input, n, h, y2_layout, sigma, k as u64 + 1).expect("basis");
            ModelKind::Superposition(SuperpositionModel::new(y1, y2).expect("bases"))
        }
        1 => {
            let y = MatrixBasis::with_columns(input, n, 3 * n, layout, sigma, k as u64).expect("basis");
            ModelKind::Bilinear(BilinearModel::new(y, h))
        }
        _ => ModelKind::Deep(
            DeepModel::new(&DeepConfig {
                input_dim: input,
                output_dim: n,
                latent_dim: h,
                hidden: vec![64, 64, 64],
                spectral_bound: 2.0,
                seed: k as u64,
            })
            .expect("deep model"),
        ),
    };
    let theta = normal_vec(&mut rng, model.meta_dim()) * 0.3;
    model.set_meta_params(theta.as_slice()).expect("meta dim");
    model.set_latent(normal_vec(&mut rng, h)).expect("latent dim");
    let x = normal_vec(&mut rng, input);
    let y = normal_vec(&mut rng, n);
    (model, x, y)
}

/// Relative error `< 1e-4` on `instances` random instances per model class.
pub fn gradients(instances: usize) -> CheckVerdict {
    let errs: Vec<(usize, f64)> = (0..3 * instances)
        .into_par_iter()
        .map(|k| {
            let (m, x, y) = random_gradient_instance(k);
            (k % 3, gradient_error(&m, &x, &y))
        })
        .collect();
    let worst = |class: usize| errs.iter().filter(|e| e.0 == class).map(|e| e.1).fold(0.0, f64::max);
    let (s, b, d) = (worst(0), worst(1), worst(2));
    CheckVerdict::new(
        "gradients",
        s < 1e-4 && b < 1e-4 && d < 1e-4,
        format!("max relative error: superposition {s:.2e}, bilinear {b:.2e}, deep {d:.2e}"),
    )
}

/// Top singular value of a normalised random layer, `(σ₁, bound)`.
pub fn spectral_instance(k: usize) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5_0000 + k as u64);
    let rows = rng.random_range(1..=64);
    let cols = rng.random_range(1..=64);
    let bound = rng.random_range(0.5..4.0);
    let mut model = DeepModel::new(&DeepConfig {
        input_dim: cols,
        output_dim: rows,
        latent_dim: 1,
        hidden: Vec::new(),
        spectral_bound: bound,
        seed: k as u64,
    })
    .expect("single layer");
    let scale = rng.random_range(0.1..20.0);
    let layer = &mut model.layers_mut()[0];
    layer.w = normal_mat(&mut rng, rows, cols) * scale;
    layer.u = normal_vec(&mut rng, cols);
    model.spectral_normalize();
    (spectral_norm(&model.layers()[0].w), bound)
}

pub fn spectral(instances: usize) -> CheckVerdict {
    let worst = (0..instances)
        .into_par_iter()
        .map(|k| {
            let (s, b) = spectral_instance(k);
            s / b
        })
        .reduce(|| 0.0, f64::max);
    CheckVerdict::new(
        "spectral_normalization",
        worst <= 1.001,
        format!("max sigma_1/bound {worst:.6} over {instances} layers (exact SVD)"),
    )
}

/// `|Z vec(Θ) − Y Θ c|_∞` on one random instance, with `Z` from the
/// explicit Kronecker product `cᵀ ⊗ Y`.
pub fn kronecker_instance(k: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(0x4_0000 + k as u64);
    let n = rng.random_range(1..=8);
    let p = rng.random_range(1..=8);
    let h = rng.random_range(1..=8);
    let y = normal_mat(&mut rng, n, p);
    let theta = normal_mat(&mut rng, p, h);
    let c = normal_vec(&mut rng, h);
    let direct = &y * &theta * &c;
    let z = kronecker_row(&c, &y);
    let z_kron = kron(&Matrix::from_row_slice(1, h, c.as_slice()), &y);
    let a = (&z * vec_of(&theta) - &direct).amax();
    let b = (&z_kron * vec_of(&theta) - &direct).amax();
    a.max(b)
}

pub fn kronecker(instances: usize) -> CheckVerdict {
    let worst = (0..instances).map(kronecker_instance).fold(0.0, f64::max);
    CheckVerdict::new(
        "kronecker_identity",
        worst <= 1e-12,
        format!("max |Z vec(Theta) - Y Theta c| = {worst:.3e} over {instances} instances"),
    )
}
