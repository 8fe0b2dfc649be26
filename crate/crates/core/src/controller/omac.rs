//! The meta-adaptive estimator: an inner adapter on `ĉ` every step and a meta
//! adapter on `Θ̂` once per environment.

use alloc::boxed::Box;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::adapters::{AdamState, OgdAdapter, RidgeMetaAdapter};
use crate::models::{project_meta, Model, ModelKind};
use crate::{Error, Matrix, Result, Vector};

/// Which meta-adaptive wiring is in use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Superposition model; linearised costs for both adapters.
    Convex,
    /// Bilinear model with OGD on `Θ̂`. With `observe_env` the meta cost uses
    /// the revealed `c^(i)`, otherwise the logged `ĉ_t`.
    ElementWise { observe_env: bool },
    /// Bilinear model with ridge regression on `Θ̂` from the revealed `c^(i)`.
    BilinearRidge,
    /// Spectrally normalised network; the meta cost replays the episode.
    Deep,
}

impl Variant {
    pub fn observes_env(&self) -> bool {
        matches!(self, Variant::ElementWise { observe_env: true } | Variant::BilinearRidge)
    }
}

/// How `ĉ` is initialised at the start of each environment.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InnerReset {
    #[default]
    Zero,
    CarryOver,
    /// Centre of the inner ball; the balls are origin-centred, so this is `0`.
    Center,
}

#[derive(Clone, Debug, PartialEq)]
pub enum MetaAdapter {
    /// One projected step on `Σ_t ∇_Θ̂ ℓ_t` per environment.
    Ogd(OgdAdapter),
    Ridge(RidgeMetaAdapter),
    /// `epochs` passes over the stored episode in minibatches, spectral
    /// normalisation after every step.
    Adam {
        state: AdamState,
        epochs: usize,
        minibatch: usize,
    },
    /// Plain gradient descent on the summed episode loss.
    GradientDescent { lr: f64, epochs: usize },
    /// `Θ̂` never changes (the baseline).
    Frozen,
}

/// One buffered inner step.
#[derive(Clone, Debug, PartialEq)]
struct Sample {
    x: Vector,
    y: Vector,
    c: Vector,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OmacController {
    model: ModelKind,
    variant: Variant,
    meta: MetaAdapter,
    inner: OgdAdapter,
    reset: InnerReset,
    /// Frobenius radius applied to `Θ̂` after non-OGD meta steps.
    meta_radius: f64,
    buffer: Vec<Sample>,
    outer: usize,
}

impl OmacController {
    pub fn new(
        model: ModelKind,
        variant: Variant,
        meta: MetaAdapter,
        inner: OgdAdapter,
        reset: InnerReset,
    ) -> Result<Self> {
        let wiring_ok = matches!(
            (&variant, &model, &meta),
            (_, _, MetaAdapter::Frozen)
                | (Variant::Convex, ModelKind::Superposition(_), MetaAdapter::Ogd(_))
                | (Variant::ElementWise { .. }, ModelKind::Bilinear(_), MetaAdapter::Ogd(_))
                | (Variant::BilinearRidge, ModelKind::Bilinear(_), MetaAdapter::Ridge(_))
                | (Variant::Deep, ModelKind::Deep(_), MetaAdapter::Adam { .. } | MetaAdapter::GradientDescent { .. })
        );
        if !wiring_ok {
            return Err(Error::InvalidParameter("model and meta adapter do not match the variant"));
        }
        if let (MetaAdapter::Adam { state, minibatch, .. }, m) = (&meta, &model) {
            if state.dim() != m.meta_dim() || *minibatch == 0 {
                return Err(Error::InvalidParameter("Adam state must match the meta dimension"));
            }
        }
        Ok(Self {
            model,
            variant,
            meta,
            inner,
            reset,
            meta_radius: f64::INFINITY,
            buffer: Vec::new(),
            outer: 1,
        })
    }

    pub fn with_meta_radius(mut self, radius: f64) -> Self {
        self.meta_radius = radius;
        self
    }

    pub fn model(&self) -> &ModelKind {
        &self.model
    }

    pub fn model_mut(&mut self) -> &mut ModelKind {
        &mut self.model
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn meta_adapter(&self) -> &MetaAdapter {
        &self.meta
    }

    pub fn inner_adapter(&self) -> &OgdAdapter {
        &self.inner
    }

    /// Index of the environment currently being adapted to, from 1.
    pub fn outer_iteration(&self) -> usize {
        self.outer
    }

    pub fn predict(&self, x: &Vector) -> Vector {
        self.model.predict(x)
    }

    /// Inner adaptation after observing `y_t`: one OGD step on `ĉ` with the
    /// gradient of `ℓ(Θ̂, ·)` at the current `ĉ_t` (the same step for the
    /// linearised and the exact cost). Returns `ℓ_t` at the pre-update `ĉ_t`.
    pub fn observe(&mut self, x: &Vector, y: &Vector) -> Result<f64> {
        let c = self.model.latent().clone();
        let eval = self.model.loss_and_grads(x, y);
        let mut next = c.clone();
        self.inner.step(next.as_mut_slice(), eval.grad_c.as_slice())?;
        self.model.set_latent(next)?;
        self.buffer.push(Sample {
            x: x.clone(),
            y: y.clone(),
            c,
        });
        Ok(eval.value)
    }

    /// Environment-diversity statistic when the meta adapter is ridge.
    pub fn lambda_min(&self) -> Option<f64> {
        match &self.meta {
            MetaAdapter::Ridge(r) => Some(r.diversity_lambda_min()),
            _ => None,
        }
    }

    /// Meta adaptation from the buffered episode, then buffer clear.
    pub fn meta_update(&mut self, c_observed: Option<&Vector>) -> Result<()> {
        if self.variant.observes_env() && c_observed.is_none() {
            return Err(Error::ObserveEnvRequired);
        }
        let buffer = core::mem::take(&mut self.buffer);
        match &mut self.meta {
            MetaAdapter::Frozen => {}
            MetaAdapter::Ogd(ogd) => {
                let mut grad = Vector::zeros(self.model.meta_dim());
                for s in &buffer {
                    let c = match (self.variant, c_observed) {
                        (Variant::ElementWise { observe_env: true }, Some(c)) => c,
                        _ => &s.c,
                    };
                    grad += self.model.loss_and_grads_with(&s.x, &s.y, c).grad_theta;
                }
                let mut theta = self.model.meta_params();
                ogd.step(theta.as_mut_slice(), grad.as_slice())?;
                self.model.set_meta_params(theta.as_slice())?;
            }
            MetaAdapter::Ridge(ridge) => {
                let (ModelKind::Bilinear(m), Some(c)) = (&mut self.model, c_observed) else {
                    return Err(Error::ObserveEnvRequired);
                };
                for s in &buffer {
                    ridge.accumulate_structured(c, &m.basis().basis_eval(&s.x), &s.y)?;
                }
                let theta: Matrix = ridge.solve()?;
                m.set_theta(theta)?;
            }
            MetaAdapter::Adam {
                state,
                epochs,
                minibatch,
            } => {
                for _ in 0..*epochs {
                    for batch in buffer.chunks(*minibatch) {
                        let mut grad = Vector::zeros(state.dim());
                        for s in batch {
                            grad += self.model.loss_and_grads_with(&s.x, &s.y, &s.c).grad_theta;
                        }
                        grad /= batch.len() as f64;
                        let mut theta = self.model.meta_params();
                        state.step(theta.as_mut_slice(), grad.as_slice())?;
                        self.model.set_meta_params(theta.as_slice())?;
                        if let ModelKind::Deep(d) = &mut self.model {
                            d.spectral_normalize();
                        }
                    }
                }
            }
            MetaAdapter::GradientDescent { lr, epochs } => {
                for _ in 0..*epochs {
                    let mut grad = Vector::zeros(self.model.meta_dim());
                    for s in &buffer {
                        grad += self.model.loss_and_grads_with(&s.x, &s.y, &s.c).grad_theta;
                    }
                    let theta = self.model.meta_params() - grad * *lr;
                    self.model.set_meta_params(theta.as_slice())?;
                    if let ModelKind::Deep(d) = &mut self.model {
                        d.spectral_normalize();
                    }
                }
            }
        }
        if !matches!(self.meta, MetaAdapter::Ogd(_) | MetaAdapter::Frozen) && self.meta_radius.is_finite() {
            project_meta(&mut self.model, self.meta_radius)?;
        }
        self.outer += 1;
        Ok(())
    }

    /// Initialises `ĉ` for the next environment and restarts the inner schedule.
    pub fn reset_inner(&mut self) -> Result<()> {
        match self.reset {
            InnerReset::Zero | InnerReset::Center => {
                let h = self.model.latent_dim();
                self.model.set_latent(Vector::zeros(h))?;
            }
            InnerReset::CarryOver => {}
        }
        self.inner.reset_counter();
        Ok(())
    }
}

/// Source of the prediction `f̂`.
#[derive(Clone, Debug, PartialEq)]
pub enum Estimator {
    /// `f̂ ≡ 0`.
    NoAdapt,
    /// `f̂ = f(x, c)`.
    Omniscient,
    Learned(Box<OmacController>),
}

impl Estimator {
    pub fn learned(ctrl: OmacController) -> Self {
        Estimator::Learned(Box::new(ctrl))
    }

    pub fn controller(&self) -> Option<&OmacController> {
        match self {
            Estimator::Learned(c) => Some(c),
            _ => None,
        }
    }
}
