//! Discrete-time plants `x_{t+1} = f0(x) + B(x)u − f(x, c) + w` and friends.

mod pendulum;
mod quadrotor;
mod wind;

use alloc::sync::Arc;
use core::fmt;
use serde::{Deserialize, Serialize};

use crate::error::check_dim;
use crate::{Error, Matrix, Result, Vector};

pub use pendulum::{pendulum_unknown_dynamics, Pendulum, PendulumIntegrator, PendulumParams};
pub use quadrotor::{
    quadrotor_step, surrogate_aero_force, AeroParams, QuadState, Quadrotor, QuadrotorParams,
    ORTHOGONALITY_PRE_TOL, ORTHOGONALITY_FAIL_TOL,
};
pub use wind::{wind_sequence, WindSampling, WindSchedule};

/// Default integration step, seconds.
pub const DEFAULT_DT: f64 = 0.01;

/// A simulated plant with environment-dependent unknown dynamics.
///
/// The disturbance `w` and the unknown term `f` share the dimension
/// [`Plant::output_dim`].
pub trait Plant: Send + Sync {
    fn state_dim(&self) -> usize;
    fn control_dim(&self) -> usize;
    /// Dimension of `f(x, c)` and of `w`.
    fn output_dim(&self) -> usize;
    fn dt(&self) -> f64;

    fn initial_state(&self) -> Vector {
        Vector::zeros(self.state_dim())
    }

    /// The true unknown dynamics `f(x, c)`.
    fn unknown(&self, x: &Vector, c: &Vector) -> Vector;

    /// Advances one step. Non-finite results are [`Error::StateDiverged`].
    fn step(&self, x: &Vector, u: &Vector, c: &Vector, w: &Vector) -> Result<Vector>;

    /// The part of the state whose norm the average control error measures.
    fn regulated(&self, x: &Vector) -> Vector {
        x.clone()
    }

    /// Input handed to the learned bases.
    fn feature_input(&self, x: &Vector) -> Vector {
        x.clone()
    }
}

/// How the unknown term enters the dynamics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlantForm {
    /// `x⁺ = f0(x) + B(x)u − f(x,c) + w`, `rank B = n`.
    FullActuation,
    /// `x⁺ = f0(x) + B(x)(u − f(x,c) + w)`; `B` may be rank deficient.
    Matched,
}

type StateMap = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;
type ActuationMap = Arc<dyn Fn(&Vector) -> Matrix + Send + Sync>;
type UnknownMap = Arc<dyn Fn(&Vector, &Vector) -> Vector + Send + Sync>;

/// Generic control-affine plant given by closures.
#[derive(Clone)]
pub struct ControlAffinePlant {
    n: usize,
    m: usize,
    form: PlantForm,
    dt: f64,
    nominal: StateMap,
    actuation: ActuationMap,
    unknown: UnknownMap,
}

impl fmt::Debug for ControlAffinePlant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ControlAffinePlant")
            .field("n", &self.n)
            .field("m", &self.m)
            .field("form", &self.form)
            .field("dt", &self.dt)
            .finish_non_exhaustive()
    }
}

impl ControlAffinePlant {
    pub fn new(
        n: usize,
        m: usize,
        form: PlantForm,
        dt: f64,
        nominal: impl Fn(&Vector) -> Vector + Send + Sync + 'static,
        actuation: impl Fn(&Vector) -> Matrix + Send + Sync + 'static,
        unknown: impl Fn(&Vector, &Vector) -> Vector + Send + Sync + 'static,
    ) -> Result<Self> {
        if dt <= 0.0 {
            return Err(Error::InvalidParameter("dt must be positive"));
        }
        Ok(Self {
            n,
            m,
            form,
            dt,
            nominal: Arc::new(nominal),
            actuation: Arc::new(actuation),
            unknown: Arc::new(unknown),
        })
    }

    /// Linear nominal part `f0(x) = A x`, constant `B`.
    pub fn linear(
        a: Matrix,
        b: Matrix,
        form: PlantForm,
        unknown: impl Fn(&Vector, &Vector) -> Vector + Send + Sync + 'static,
    ) -> Result<Self> {
        check_dim("linear plant B rows", a.nrows(), b.nrows())?;
        let (n, m) = b.shape();
        Self::new(
            n,
            m,
            form,
            DEFAULT_DT,
            move |x| &a * x,
            move |_| b.clone(),
            unknown,
        )
    }

    /// `x⁺ = a·x + u − f(x, c) + w` on the real line.
    pub fn scalar(
        a: f64,
        unknown: impl Fn(&Vector, &Vector) -> Vector + Send + Sync + 'static,
    ) -> Self {
        Self::linear(
            Matrix::from_element(1, 1, a),
            Matrix::identity(1, 1),
            PlantForm::FullActuation,
            unknown,
        )
        .expect("1x1 dimensions agree")
    }

    pub fn form(&self) -> PlantForm {
        self.form
    }

    /// `f0(x)`.
    pub fn nominal(&self, x: &Vector) -> Vector {
        (self.nominal)(x)
    }

    /// `B(x)`.
    pub fn actuation(&self, x: &Vector) -> Matrix {
        (self.actuation)(x)
    }
}

impl Plant for ControlAffinePlant {
    fn state_dim(&self) -> usize {
        self.n
    }

    fn control_dim(&self) -> usize {
        self.m
    }

    fn output_dim(&self) -> usize {
        match self.form {
            PlantForm::FullActuation => self.n,
            PlantForm::Matched => self.m,
        }
    }

    fn dt(&self) -> f64 {
        self.dt
    }

    fn unknown(&self, x: &Vector, c: &Vector) -> Vector {
        (self.unknown)(x, c)
    }

    fn step(&self, x: &Vector, u: &Vector, c: &Vector, w: &Vector) -> Result<Vector> {
        check_dim("plant state", self.n, x.len())?;
        check_dim("plant control", self.m, u.len())?;
        check_dim("plant disturbance", self.output_dim(), w.len())?;
        let b = self.actuation(x);
        let f = self.unknown(x, c);
        check_dim("plant unknown dynamics", self.output_dim(), f.len())?;
        let next = match self.form {
            PlantForm::FullActuation => self.nominal(x) + b * u - f + w,
            PlantForm::Matched => self.nominal(x) + b * (u - f + w),
        };
        finite(next)
    }
}

pub(crate) fn finite(x: Vector) -> Result<Vector> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(Error::StateDiverged(None))
    }
}
