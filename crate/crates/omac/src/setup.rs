//! Per-seed construction of plants, control laws, streams, bases and estimators.

use omac_core::adapters::{
    convex_rate_schedules, AdamState, OgdAdapter, RidgeMetaAdapter, ScheduleConstants, StepSchedule,
};
use omac_core::controller::{
    CascadedQuadController, ControlLaw, Estimator, MetaAdapter, OmacController, PendulumLaw, Variant,
};
use omac_core::dynamics::{wind_sequence, Pendulum, Plant, Quadrotor, WindSampling, WindSchedule};
use omac_core::features::{median_heuristic_sigma, MatrixBasis};
use omac_core::metrics::{estimate_eiss_constants, EissConstants};
use omac_core::models::{BilinearModel, DeepConfig, DeepModel, Model, ModelKind, SuperpositionModel};
use omac_core::{Matrix, Vector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use crate::config::{
    Bandwidth, ControllerConfig, ControllerKind, DeepOptimizer, ExperimentConfig, InnerSchedule, OuterSchedule,
    PlantConfig, SamplingConfig,
};

/// Derives an independent 64-bit seed for a named stream.
pub fn sub_seed(seed: u64, label: &str) -> u64 {
    let digest = Sha256::new()
        .chain_update(seed.to_le_bytes())
        .chain_update(label.as_bytes())
        .finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("32-byte digest"))
}

/// SHA-256 over the environment and disturbance streams, hex encoded.
pub fn stream_hash(conditions: &[Vector], disturbances: &[Vec<Vector>]) -> String {
    let mut h = Sha256::new();
    for c in conditions {
        for v in c.iter() {
            h.update(v.to_le_bytes());
        }
    }
    for stream in disturbances {
        for w in stream {
            for v in w.iter() {
                h.update(v.to_le_bytes());
            }
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Bases shared by every controller of one seed. `theta0` is the common
/// initial `Θ̂^(1)` of the bilinear baseline and bi-convex variants.
#[derive(Clone, Debug)]
pub struct Bases {
    pub sigma: f64,
    pub y1: MatrixBasis,
    pub y2: MatrixBasis,
    pub y: MatrixBasis,
    pub theta0: Matrix,
}

/// Everything a controller run on one seed consumes.
pub struct SeedSetup {
    pub seed: u64,
    pub plant: Box<dyn Plant>,
    pub law: Box<dyn ControlLaw>,
    pub eiss: Option<EissConstants>,
    pub conditions: Vec<Vector>,
    pub disturbances: Vec<Vec<Vector>>,
    pub bases: Bases,
    pub inner: StepSchedule,
    pub x0: Vector,
}

/// Plant, its control law and, for linear closed loops, the e-ISS constants.
pub type PlantBundle = (Box<dyn Plant>, Box<dyn ControlLaw>, Option<EissConstants>);

pub fn plant_and_law(plant: &PlantConfig) -> omac_core::Result<PlantBundle> {
    Ok(match plant {
        PlantConfig::Pendulum { params, lqr } => {
            let pend = Pendulum::new(*params)?;
            let law = PendulumLaw::lqr(pend.clone(), lqr.q, lqr.r)?;
            let eiss = estimate_eiss_constants(&law.closed_loop_matrix())?;
            (Box::new(pend), Box::new(law), Some(eiss))
        }
        PlantConfig::Quadrotor { params, gains } => {
            let quad = Quadrotor::new(*params)?;
            let law = CascadedQuadController::new(*params, *gains)?;
            (Box::new(quad), Box::new(law), None)
        }
    })
}

pub fn wind_schedule(cfg: &ExperimentConfig) -> WindSchedule {
    let dim = cfg.plant.wind_dim();
    let hw = cfg.wind.bound.half_widths(dim);
    let sampling = match &cfg.wind.sampling {
        SamplingConfig::RandomUniform => WindSampling::RandomUniform,
        SamplingConfig::FixedList { conditions } => {
            WindSampling::FixedList(conditions.iter().map(|c| Vector::from_column_slice(c)).collect())
        }
    };
    WindSchedule {
        count: cfg.outer_iterations,
        dwell: cfg.wind.dwell,
        lo: Vector::from_iterator(dim, hw.iter().map(|h| -h)),
        hi: Vector::from_column_slice(&hw),
        sampling,
    }
}

/// Per-seed streams, pilot rollout, bases and the shared inner schedule.
pub fn seed_setup(cfg: &ExperimentConfig, seed: u64) -> anyhow::Result<SeedSetup> {
    let (plant, law, eiss) = plant_and_law(&cfg.plant)?;
    let conditions = wind_sequence(&wind_schedule(cfg), sub_seed(seed, "wind"))?;
    let horizon = cfg.horizon();
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, "disturbance"));
    let d = plant.output_dim();
    let disturbances: Vec<Vec<Vector>> = (0..cfg.outer_iterations)
        .map(|_| cfg.disturbance.stream(d, horizon, &mut rng))
        .collect();
    let x0 = plant.initial_state();

    // Pilot rollout with f̂ ≡ 0 on the first environments.
    let pilot_n = cfg.features.pilot_envs.clamp(1, cfg.outer_iterations);
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    let mut x = x0.clone();
    for (c, ws) in conditions[..pilot_n].iter().zip(&disturbances[..pilot_n]) {
        for w in ws {
            inputs.push(plant.feature_input(&x));
            targets.push(plant.unknown(&x, c) - w);
            let u = law.control(&x, &Vector::zeros(d))?;
            x = plant.step(&x, &u, c, w).map_err(|e| anyhow::anyhow!("pilot rollout failed: {e}"))?;
        }
    }

    let sigma = match cfg.features.bandwidth {
        Bandwidth::Fixed(s) => s,
        Bandwidth::Named(_) => median_heuristic_sigma(&inputs, 20_000),
    };
    let bases = make_bases(cfg, seed, sigma, inputs[0].len(), d)?;

    let inner = match cfg.inner.schedule {
        InnerSchedule::Fixed { eta } => StepSchedule::Fixed(eta),
        InnerSchedule::InverseSqrt { d, g } => StepSchedule::InverseSqrt { d, g },
        InnerSchedule::Pilot { margin } => {
            let mut g_max: f64 = 0.0;
            for ctrl in &cfg.controllers {
                if let Some(model) = initial_model(cfg, seed, &bases, ctrl, inputs[0].len(), d)? {
                    for (xf, y) in inputs.iter().zip(&targets) {
                        g_max = g_max.max(model.loss_and_grads(xf, y).grad_c.norm());
                    }
                }
            }
            StepSchedule::InverseSqrt {
                d: 2.0 * cfg.inner.radius,
                g: (margin * g_max).max(1e-12),
            }
        }
    };

    Ok(SeedSetup {
        seed,
        plant,
        law,
        eiss,
        conditions,
        disturbances,
        bases,
        inner,
        x0,
    })
}

fn make_bases(cfg: &ExperimentConfig, seed: u64, sigma: f64, input_dim: usize, d: usize) -> anyhow::Result<Bases> {
    let f = &cfg.features;
    let h = f.latent_dim;
    let p = f.meta_width();
    let pbar = f.bilinear_width();
    let y1 = MatrixBasis::with_columns(input_dim, d, p, f.layout, sigma, sub_seed(seed, "basis-y1"))?;
    let y2 = MatrixBasis::with_columns(input_dim, d, h, f.layout, sigma, sub_seed(seed, "basis-y2"))?;
    let y = MatrixBasis::with_columns(input_dim, d, pbar, f.layout, sigma, sub_seed(seed, "basis-y"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, "theta0"));
    // Entries N(0, 1/h): each row of Y(x)Θ̂ has the norm of the RFF row it mixes.
    let scale = (h as f64).sqrt().recip();
    let theta0 = Matrix::from_fn(pbar, h, |_, _| {
        let z: f64 = StandardNormal.sample(&mut rng);
        scale * z
    });
    Ok(Bases {
        sigma,
        y1,
        y2,
        y,
        theta0,
    })
}

/// The model a controller starts from, `None` for the non-learning ones.
pub fn initial_model(
    cfg: &ExperimentConfig,
    seed: u64,
    bases: &Bases,
    ctrl: &ControllerConfig,
    input_dim: usize,
    d: usize,
) -> anyhow::Result<Option<ModelKind>> {
    let h = cfg.features.latent_dim;
    let bilinear = || -> anyhow::Result<ModelKind> {
        let mut m = BilinearModel::new(bases.y.clone(), h);
        m.set_theta(bases.theta0.clone())?;
        Ok(ModelKind::Bilinear(m))
    };
    Ok(match &ctrl.kind {
        ControllerKind::NoAdapt | ControllerKind::Omniscient => None,
        ControllerKind::Baseline | ControllerKind::BiConvex { .. } => Some(bilinear()?),
        ControllerKind::BilinearRidge { .. } => {
            Some(ModelKind::Bilinear(BilinearModel::new(bases.y.clone(), h)))
        }
        ControllerKind::Convex { .. } => Some(ModelKind::Superposition(SuperpositionModel::new(
            bases.y1.clone(),
            bases.y2.clone(),
        )?)),
        ControllerKind::Deep {
            hidden, spectral_bound, ..
        } => Some(ModelKind::Deep(DeepModel::new(&DeepConfig {
            input_dim,
            output_dim: d,
            latent_dim: h,
            hidden: hidden.clone(),
            spectral_bound: *spectral_bound,
            seed: sub_seed(seed, "deep-init"),
        })?)),
    })
}

/// Builds the estimator for one controller on one seed.
pub fn build_estimator(cfg: &ExperimentConfig, setup: &SeedSetup, ctrl: &ControllerConfig) -> anyhow::Result<Estimator> {
    let d = setup.plant.output_dim();
    let input_dim = setup.bases.y.input_dim();
    let Some(model) = initial_model(cfg, setup.seed, &setup.bases, ctrl, input_dim, d)? else {
        return Ok(match ctrl.kind {
            ControllerKind::Omniscient => Estimator::Omniscient,
            _ => Estimator::NoAdapt,
        });
    };
    let inner = OgdAdapter::ball(cfg.inner.radius, setup.inner);
    let outer_ogd = |meta: &OuterSchedule, radius: f64| -> anyhow::Result<OgdAdapter> {
        let schedule = match meta.explicit() {
            Some(s) => s,
            None => {
                let k = ScheduleConstants {
                    k1: setup.bases.y1.bound_constant(),
                    k2: setup.bases.y2.bound_constant(),
                    k_theta: radius,
                    k_c: cfg.inner.radius,
                    w: cfg.disturbance.bound,
                };
                convex_rate_schedules(&k, cfg.horizon())?.0
            }
        };
        Ok(OgdAdapter::ball(radius, schedule))
    };
    let (variant, meta, radius) = match &ctrl.kind {
        ControllerKind::Baseline => (Variant::ElementWise { observe_env: false }, MetaAdapter::Frozen, f64::INFINITY),
        ControllerKind::Convex { meta, meta_radius } => {
            (Variant::Convex, MetaAdapter::Ogd(outer_ogd(meta, *meta_radius)?), f64::INFINITY)
        }
        ControllerKind::BiConvex {
            observe_env,
            meta,
            meta_radius,
        } => (
            Variant::ElementWise {
                observe_env: *observe_env,
            },
            MetaAdapter::Ogd(outer_ogd(meta, *meta_radius)?),
            f64::INFINITY,
        ),
        ControllerKind::BilinearRidge { lambda } => {
            let pbar = cfg.features.bilinear_width();
            (
                Variant::BilinearRidge,
                MetaAdapter::Ridge(RidgeMetaAdapter::new(*lambda, pbar, cfg.features.latent_dim)?),
                f64::INFINITY,
            )
        }
        ControllerKind::Deep {
            lr,
            epochs,
            minibatch,
            optimizer,
            ..
        } => {
            let meta = match optimizer {
                DeepOptimizer::Adam => MetaAdapter::Adam {
                    state: AdamState::new(model.meta_dim(), *lr),
                    epochs: *epochs,
                    minibatch: if *minibatch == 0 { cfg.horizon() } else { *minibatch },
                },
                DeepOptimizer::GradientDescent => MetaAdapter::GradientDescent {
                    lr: *lr,
                    epochs: *epochs,
                },
            };
            (Variant::Deep, meta, f64::INFINITY)
        }
        ControllerKind::NoAdapt | ControllerKind::Omniscient => unreachable!("handled above"),
    };
    let ctrl = OmacController::new(model, variant, meta, inner, cfg.inner.reset)?.with_meta_radius(radius);
    Ok(Estimator::learned(ctrl))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sub_seeds_are_distinct_and_stable() {
        assert_eq!(sub_seed(1, "wind"), sub_seed(1, "wind"));
        assert_ne!(sub_seed(1, "wind"), sub_seed(1, "disturbance"));
        assert_ne!(sub_seed(1, "wind"), sub_seed(2, "wind"));
    }

    #[test]
    fn hash_changes_with_streams() {
        let c = vec![Vector::from_element(2, 1.0)];
        let w = vec![vec![Vector::from_element(1, 0.5)]];
        let w2 = vec![vec![Vector::from_element(1, 0.25)]];
        assert_eq!(stream_hash(&c, &w), stream_hash(&c, &w));
        assert_ne!(stream_hash(&c, &w), stream_hash(&c, &w2));
    }
}
