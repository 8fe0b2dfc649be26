//! The meta-loop: predict, act, observe `y = f − w`, adapt `ĉ`; adapt `Θ̂`
//! between environments.

mod law;
mod omac;

use alloc::vec::Vec;

use crate::dynamics::Plant;
use crate::metrics::{EnvState, EpisodeLog, StepRecord};
use crate::models::Model;
use crate::{Error, Result, Vector};

pub use law::{decompose_force, dlqr, CascadedQuadController, ControlLaw, PendulumLaw, PseudoInverseLaw, QuadGains};
pub use omac::{Estimator, InnerReset, MetaAdapter, OmacController, Variant};

/// Log of one environment and the state it ended in.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeOutcome {
    pub log: EpisodeLog,
    pub final_state: Vector,
}

/// Runs `T = disturbances.len()` steps in environment `c` (outer index `outer`),
/// starting from `x0`. Divergence is reported with its `(i, t)`.
pub fn run_episode(
    estimator: &mut Estimator,
    plant: &dyn Plant,
    law: &dyn ControlLaw,
    c: &Vector,
    disturbances: &[Vector],
    outer: usize,
    x0: Vector,
) -> Result<EpisodeOutcome> {
    let mut log = EpisodeLog::new();
    let mut x = x0;
    for (k, w) in disturbances.iter().enumerate() {
        let t = k + 1;
        let at = |e: Error| e.at_step(outer, t);
        let features = plant.feature_input(&x);
        let f_true = plant.unknown(&x, c);
        let f_hat = match estimator {
            Estimator::NoAdapt => Vector::zeros(plant.output_dim()),
            Estimator::Omniscient => f_true.clone(),
            Estimator::Learned(ctrl) => ctrl.predict(&features),
        };
        let u = law.control(&x, &f_hat).map_err(at)?;
        let next = plant.step(&x, &u, c, w).map_err(at)?;
        let y = &f_true - w;
        let residual = match law.closed_loop_nominal(&x) {
            Some(nominal) => &next - nominal,
            None => &y - &f_hat,
        };
        let state = EnvState::new(plant.regulated(&x), t, outer).map_err(at)?;
        let record = StepRecord::new(state, u, f_true, f_hat, w.clone(), residual);
        if let Estimator::Learned(ctrl) = estimator {
            ctrl.observe(&features, &record.y).map_err(at)?;
        }
        log.push(record);
        x = next;
    }
    Ok(EpisodeOutcome { log, final_state: x })
}

/// The full meta-loop over `conditions`, with the state carried across
/// environment switches. `disturbances[i]` is the stream of environment `i`.
pub fn run_sequence(
    estimator: &mut Estimator,
    plant: &dyn Plant,
    law: &dyn ControlLaw,
    conditions: &[Vector],
    disturbances: &[Vec<Vector>],
    x0: Vector,
) -> Result<EpisodeLog> {
    run_sequence_with(estimator, plant, law, conditions, disturbances, x0, |_, _| {})
}

/// [`run_sequence`] with a hook called after each meta update as `(i, estimator)`.
pub fn run_sequence_with(
    estimator: &mut Estimator,
    plant: &dyn Plant,
    law: &dyn ControlLaw,
    conditions: &[Vector],
    disturbances: &[Vec<Vector>],
    x0: Vector,
    mut after_meta: impl FnMut(usize, &Estimator),
) -> Result<EpisodeLog> {
    crate::error::check_dim("disturbance streams", conditions.len(), disturbances.len())?;
    let mut log = EpisodeLog::new();
    let mut x = x0;
    for (k, (c, w)) in conditions.iter().zip(disturbances).enumerate() {
        let outcome = run_episode(estimator, plant, law, c, w, k + 1, x)?;
        if let Estimator::Learned(ctrl) = estimator {
            let revealed = ctrl.variant().observes_env().then_some(c);
            ctrl.meta_update(revealed).map_err(|e| e.at_step(k + 1, w.len()))?;
            ctrl.reset_inner()?;
        }
        after_meta(k + 1, estimator);
        log.extend(outcome.log);
        x = outcome.final_state;
    }
    Ok(log)
}

/// Latent dimension of the learned estimator, if any.
pub fn latent_dim(estimator: &Estimator) -> Option<usize> {
    estimator.controller().map(|c| c.model().latent_dim())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapters::{AdamState, OgdAdapter, RidgeMetaAdapter, StepSchedule};
    use crate::dynamics::{ControlAffinePlant, Pendulum, PendulumParams};
    use crate::features::{BasisLayout, MatrixBasis};
    use crate::metrics::{ace, estimate_eiss_constants, eiss_bound};
    use crate::models::{BilinearModel, DeepConfig, DeepModel, ModelKind, SuperpositionModel};
    use crate::{Matrix, Vector};
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar_plant(f: f64) -> ControlAffinePlant {
        ControlAffinePlant::scalar(0.5, move |_, _| Vector::from_element(1, f))
    }

    fn consts(v: f64, n: usize) -> Vec<Vector> {
        vec![Vector::from_element(1, v); n]
    }

    fn bilinear(seed: u64, h: usize) -> BilinearModel {
        BilinearModel::new(
            MatrixBasis::with_columns(1, 1, 6, BasisLayout::BlockDiagonal, 1.0, seed).unwrap(),
            h,
        )
    }

    fn inner() -> OgdAdapter {
        OgdAdapter::ball(5.0, StepSchedule::InverseSqrt { d: 10.0, g: 10.0 })
    }

    #[test]
    fn omniscient_cancels_exactly() {
        let plant = scalar_plant(0.7);
        let law = PseudoInverseLaw::new(plant.clone());
        let out = run_episode(
            &mut Estimator::Omniscient,
            &plant,
            &law,
            &Vector::zeros(1),
            &consts(0.0, 50),
            1,
            Vector::zeros(1),
        )
        .unwrap();
        assert!(out.log.records().iter().all(|r| r.x[0] == 0.0));
        assert_eq!(out.final_state[0], 0.0);
    }

    #[test]
    fn no_adapt_fixed_point() {
        let (f, w) = (0.3, 0.1);
        let plant = scalar_plant(f);
        let law = PseudoInverseLaw::new(plant.clone());
        let out = run_episode(
            &mut Estimator::NoAdapt,
            &plant,
            &law,
            &Vector::zeros(1),
            &consts(w, 200),
            1,
            Vector::zeros(1),
        )
        .unwrap();
        // x⁺ = 0.5x − (f − w) → x∞ = −2(f − w).
        assert!((out.final_state[0] + 2.0 * (f - w)).abs() < 1e-12);
    }

    #[test]
    fn y_is_f_minus_w_bit_exact() {
        let plant = ControlAffinePlant::scalar(0.5, |x, c| Vector::from_element(1, (x[0] + c[0]).sin()));
        let law = PseudoInverseLaw::new(plant.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let w: Vec<Vector> = (0..100).map(|_| Vector::from_element(1, rng.random::<f64>() - 0.5)).collect();
        let out = run_episode(&mut Estimator::NoAdapt, &plant, &law, &Vector::from_element(1, 0.4), &w, 1, Vector::zeros(1)).unwrap();
        for r in out.log.records() {
            assert_eq!(r.y, &r.f_true - &r.w);
        }
    }

    #[test]
    fn divergence_carries_step_index() {
        let plant = ControlAffinePlant::scalar(0.5, |x, _| Vector::from_element(1, if x[0] > 0.5 { f64::NAN } else { -1.0 }));
        let law = PseudoInverseLaw::new(plant.clone());
        let err = run_episode(&mut Estimator::NoAdapt, &plant, &law, &Vector::zeros(1), &consts(0.0, 10), 3, Vector::zeros(1))
            .unwrap_err();
        assert!(matches!(err, Error::StateDiverged(Some(idx)) if idx.outer == 3 && idx.inner == 2));
    }

    #[test]
    fn inner_regret_against_hindsight_latent() {
        // Unknown term lies in the span of Y₂ for a fixed c; Θ̂ = 0 so only ĉ adapts.
        let y1 = MatrixBasis::with_columns(1, 1, 4, BasisLayout::BlockDiagonal, 0.8, 1).unwrap();
        let y2 = MatrixBasis::with_columns(1, 1, 5, BasisLayout::BlockDiagonal, 0.8, 2).unwrap();
        let truth = Vector::from_column_slice(&[0.5, -1.0, 0.3, 0.8, -0.2]);
        let y2c = y2.clone();
        let tc = truth.clone();
        let plant = ControlAffinePlant::scalar(0.5, move |x, _| y2c.basis_eval(x) * &tc);
        let law = PseudoInverseLaw::new(plant.clone());
        let model = ModelKind::Superposition(SuperpositionModel::new(y1, y2.clone()).unwrap());
        let k_c = 3.0;
        let g = 2.0 * 2f64.sqrt() * (2f64.sqrt() * k_c + 2f64.sqrt() * truth.norm() + 0.1);
        let d = 2.0 * k_c;
        let ogd = OgdAdapter::ball(k_c, StepSchedule::InverseSqrt { d, g });
        let meta = MetaAdapter::Ogd(OgdAdapter::ball(1.0, StepSchedule::Fixed(0.0)));
        let ctrl = OmacController::new(model, Variant::Convex, meta, ogd, InnerReset::Zero).unwrap();
        let mut est = Estimator::learned(ctrl);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let horizon = 2000;
        let w: Vec<Vector> = (0..horizon).map(|_| Vector::from_element(1, 0.1 * (2.0 * rng.random::<f64>() - 1.0))).collect();
        let out = run_episode(&mut est, &plant, &law, &Vector::zeros(1), &w, 1, Vector::from_element(1, 1.0)).unwrap();
        let recs = out.log.records();
        // Hindsight ĉ*: ball-constrained least squares by projected gradient.
        let xs: Vec<Vector> = recs.iter().map(|r| r.x.clone()).collect();
        let a = Matrix::from_fn(horizon, 5, |t, j| y2.basis_eval(&xs[t])[(0, j)]);
        let b = Vector::from_fn(horizon, |t, _| recs[t].y[0]);
        let ata = a.transpose() * &a;
        let atb = a.transpose() * &b;
        let step = 1.0 / crate::linalg::spectral_norm(&ata);
        let mut c_star = Vector::zeros(5);
        for _ in 0..20_000 {
            c_star -= (&ata * &c_star - &atb) * step;
            crate::linalg::project_ball(c_star.as_mut_slice(), k_c);
        }
        let hindsight: f64 = (&a * &c_star - &b).norm_squared();
        assert!(hindsight <= (&a * &truth - &b).norm_squared() + 1e-9);
        let online: f64 = recs.iter().map(|r| r.loss).sum();
        assert!(online - hindsight <= 1.5 * g * d * (horizon as f64).sqrt());
        assert!((online - hindsight) / (horizon as f64) < 0.05);
    }

    #[test]
    fn zero_residual_keeps_theta() {
        let y1 = MatrixBasis::with_columns(1, 1, 4, BasisLayout::BlockDiagonal, 0.8, 1).unwrap();
        let y2 = MatrixBasis::with_columns(1, 1, 3, BasisLayout::BlockDiagonal, 0.8, 2).unwrap();
        let deep = DeepModel::new(&DeepConfig {
            input_dim: 1,
            output_dim: 1,
            latent_dim: 3,
            hidden: vec![8],
            spectral_bound: 2.0,
            seed: 1,
        })
        .unwrap();
        let meta_dim = deep.meta_dim();
        let cases = vec![
            (
                ModelKind::Superposition(SuperpositionModel::new(y1, y2).unwrap()),
                Variant::Convex,
                MetaAdapter::Ogd(OgdAdapter::ball(10.0, StepSchedule::Fixed(0.1))),
            ),
            (
                ModelKind::Bilinear(bilinear(3, 3)),
                Variant::ElementWise { observe_env: false },
                MetaAdapter::Ogd(OgdAdapter::ball(10.0, StepSchedule::Fixed(0.1))),
            ),
            (
                ModelKind::Bilinear(bilinear(3, 3)),
                Variant::BilinearRidge,
                MetaAdapter::Ridge(RidgeMetaAdapter::new(1.0, 6, 3).unwrap()),
            ),
            (
                ModelKind::Deep(deep),
                Variant::Deep,
                MetaAdapter::Adam {
                    state: AdamState::new(meta_dim, 1e-3),
                    epochs: 2,
                    minibatch: 4,
                },
            ),
        ];
        for (model, variant, meta) in cases {
            let mut ctrl = OmacController::new(model, variant, meta, inner(), InnerReset::Zero).unwrap();
            let before = ctrl.model().meta_params();
            for k in 0..10 {
                let x = Vector::from_element(1, 0.1 * k as f64);
                // ĉ = 0 and Θ̂ = 0 for linear heads, so y = F = 0 is residual-free.
                let y = ctrl.predict(&x);
                ctrl.observe(&x, &y).unwrap();
            }
            ctrl.meta_update(Some(&Vector::zeros(3))).unwrap();
            assert_eq!(ctrl.model().meta_params(), before, "{variant:?}");
        }
    }

    #[test]
    fn ridge_meta_update_recovers_theta() {
        let (p, h) = (6, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let theta = Matrix::from_fn(p, h, |_, _| rng.random::<f64>() - 0.5);
        let truth = bilinear(5, h);
        let ridge = RidgeMetaAdapter::new(1e-8, p, h).unwrap();
        let mut ctrl = OmacController::new(
            ModelKind::Bilinear(truth.clone()),
            Variant::BilinearRidge,
            MetaAdapter::Ridge(ridge),
            inner(),
            InnerReset::Zero,
        )
        .unwrap();
        for j in 0..h {
            let c = Vector::from_fn(h, |k, _| if k == j { 1.0 } else { 0.0 });
            for t in 0..40 {
                let x = Vector::from_element(1, t as f64 * 0.37 - 7.0);
                let y = truth.basis().basis_eval(&x) * &theta * &c;
                ctrl.observe(&x, &y).unwrap();
            }
            ctrl.meta_update(Some(&c)).unwrap();
            ctrl.reset_inner().unwrap();
        }
        let ModelKind::Bilinear(m) = ctrl.model() else { unreachable!() };
        assert!((m.theta() - &theta).norm() < 1e-6);
    }

    #[test]
    fn observe_env_is_enforced() {
        let mut ctrl = OmacController::new(
            ModelKind::Bilinear(bilinear(1, 2)),
            Variant::BilinearRidge,
            MetaAdapter::Ridge(RidgeMetaAdapter::new(1.0, 6, 2).unwrap()),
            inner(),
            InnerReset::Zero,
        )
        .unwrap();
        assert_eq!(ctrl.meta_update(None), Err(Error::ObserveEnvRequired));
    }

    #[test]
    fn mismatched_wiring_rejected() {
        let r = OmacController::new(
            ModelKind::Bilinear(bilinear(1, 2)),
            Variant::Convex,
            MetaAdapter::Ogd(OgdAdapter::ball(1.0, StepSchedule::Fixed(0.1))),
            inner(),
            InnerReset::Zero,
        );
        assert!(r.is_err());
    }

    #[test]
    fn reset_policies() {
        let make = |reset| {
            OmacController::new(ModelKind::Bilinear(bilinear(1, 2)), Variant::ElementWise { observe_env: false }, MetaAdapter::Frozen, inner(), reset).unwrap()
        };
        let c = Vector::from_column_slice(&[0.3, -0.2]);
        let mut zero = make(InnerReset::Zero);
        zero.model_mut().set_latent(c.clone()).unwrap();
        zero.reset_inner().unwrap();
        assert_eq!(zero.model().latent(), &Vector::zeros(2));
        let mut carry = make(InnerReset::CarryOver);
        carry.model_mut().set_latent(c.clone()).unwrap();
        carry.reset_inner().unwrap();
        assert_eq!(carry.model().latent(), &c);
    }

    fn pendulum_setup() -> (Pendulum, PendulumLaw) {
        let pend = Pendulum::new(PendulumParams::default()).unwrap();
        let law = PendulumLaw::lqr(pend.clone(), [1.0, 1.0], 1.0).unwrap();
        (pend, law)
    }

    #[test]
    fn default_reset_after_three_environments() {
        let (pend, law) = pendulum_setup();
        let y = MatrixBasis::with_columns(2, 1, 6, BasisLayout::BlockDiagonal, 1.0, 2).unwrap();
        let mut model = BilinearModel::new(y, 4);
        model.set_theta(Matrix::from_element(6, 4, 0.1)).unwrap();
        let ctrl = OmacController::new(ModelKind::Bilinear(model), Variant::ElementWise { observe_env: false }, MetaAdapter::Frozen, inner(), InnerReset::default()).unwrap();
        let mut est = Estimator::learned(ctrl);
        let conds = vec![Vector::from_column_slice(&[1.0, 0.0]); 3];
        let w = vec![vec![Vector::zeros(1); 20]; 3];
        run_sequence(&mut est, &pend, &law, &conds, &w, Vector::zeros(2)).unwrap();
        assert_eq!(est.controller().unwrap().model().latent(), &Vector::zeros(4));
        assert_eq!(est.controller().unwrap().outer_iteration(), 4);
    }

    #[test]
    fn baseline_theta_frozen_and_eiss_bound_holds_on_pendulum() {
        let (pend, law) = pendulum_setup();
        let k = estimate_eiss_constants(&law.closed_loop_matrix()).unwrap();
        let y = MatrixBasis::with_columns(2, 1, 30, BasisLayout::BlockDiagonal, 0.5, 3).unwrap();
        let mut model = BilinearModel::new(y, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        model.set_theta(Matrix::from_fn(30, 5, |_, _| rng.random::<f64>() - 0.5)).unwrap();
        let theta0 = model.meta_params();
        let ctrl = OmacController::new(ModelKind::Bilinear(model), Variant::ElementWise { observe_env: false }, MetaAdapter::Frozen, inner(), InnerReset::Zero).unwrap();
        let mut est = Estimator::learned(ctrl);
        let conds: Vec<Vector> = (0..5).map(|_| Vector::from_fn(2, |_, _| 4.0 * (2.0 * rng.random::<f64>() - 1.0))).collect();
        let w: Vec<Vec<Vector>> = (0..5).map(|_| (0..200).map(|_| Vector::from_element(1, rng.random::<f64>() - 0.5)).collect()).collect();
        let log = run_sequence(&mut est, &pend, &law, &conds, &w, Vector::zeros(2)).unwrap();
        assert_eq!(est.controller().unwrap().model().meta_params(), theta0);
        assert!(log.is_complete(5, 200));
        assert!(ace(&log).unwrap() <= eiss_bound(&log, &k).unwrap());
    }
}
