//! Inverted pendulum with 2-D wind, unknown damping and gravity mismatch.
//!
//! Continuous model: `m l² θ̈ − m l ĝ sin θ = u + f(θ, θ̇, c) − w`, with state
//! `x = (θ, θ̇)`. The unknown term and the disturbance torque are held constant
//! over a step, so `f − w` is exactly the torque that entered.

#[allow(unused_imports)] // inherent f64 methods shadow it when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::{finite, Plant, DEFAULT_DT};
use crate::error::check_dim;
use crate::{Error, Matrix, Result, Vector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PendulumIntegrator {
    /// `x⁺ = A x + B (u + m l ĝ sin θ + f − w)` with the forward-Euler `A`, `B`.
    Euler,
    /// Classical RK4 on the continuous model with zero-order hold inputs.
    #[default]
    Rk4,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PendulumParams {
    pub m: f64,
    pub l: f64,
    /// True gravity.
    pub g: f64,
    /// Gravity the controller believes in.
    pub g_hat: f64,
    /// Damping coefficient.
    pub alpha1: f64,
    /// Air-drag coefficient.
    pub alpha2: f64,
    pub dt: f64,
    pub integrator: PendulumIntegrator,
}

impl Default for PendulumParams {
    fn default() -> Self {
        Self {
            m: 1.0,
            l: 1.0,
            g: 9.81,
            g_hat: 9.0,
            alpha1: 0.3,
            alpha2: 0.5,
            dt: DEFAULT_DT,
            integrator: PendulumIntegrator::Rk4,
        }
    }
}

impl PendulumParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.m > 0.0 && self.l > 0.0 && self.dt > 0.0) {
            return Err(Error::InvalidParameter("pendulum m, l, dt must be positive"));
        }
        Ok(())
    }
}

/// `l⃗ × F_wind − α₁ θ̇ + m l (g − ĝ) sin θ` with `F_wind = α₂ ‖r‖ r`,
/// `r = w − (l θ̇ cos θ, −l θ̇ sin θ)` and `l⃗ = (l sin θ, −l cos θ)`.
pub fn pendulum_unknown_dynamics(theta: f64, theta_dot: f64, wind: [f64; 2], p: &PendulumParams) -> f64 {
    let (s, c) = theta.sin_cos();
    let rx = wind[0] - p.l * theta_dot * c;
    let ry = wind[1] + p.l * theta_dot * s;
    let speed = (rx * rx + ry * ry).sqrt();
    let (fx, fy) = (p.alpha2 * speed * rx, p.alpha2 * speed * ry);
    let (lx, ly) = (p.l * s, -p.l * c);
    let drag = lx * fy - ly * fx;
    drag - p.alpha1 * theta_dot + p.m * p.l * (p.g - p.g_hat) * s
}

#[derive(Clone, Debug, PartialEq)]
pub struct Pendulum {
    pub params: PendulumParams,
}

impl Pendulum {
    pub fn new(params: PendulumParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params })
    }

    /// Forward-Euler state matrix `[[1, δ], [0, 1]]`.
    pub fn a_matrix(&self) -> Matrix {
        Matrix::from_row_slice(2, 2, &[1.0, self.params.dt, 0.0, 1.0])
    }

    /// Forward-Euler input matrix `[0; δ/(m l²)]`.
    pub fn b_matrix(&self) -> Matrix {
        let p = &self.params;
        Matrix::from_column_slice(2, 1, &[0.0, p.dt / (p.m * p.l * p.l)])
    }

    /// Gravity torque the controller cancels, `m l ĝ sin θ`.
    pub fn gravity_compensation(&self, theta: f64) -> f64 {
        self.params.m * self.params.l * self.params.g_hat * theta.sin()
    }

    /// Total energy `½ m l² θ̇² + m l g cos θ` of the unforced pendulum with `g = ĝ`.
    pub fn energy(&self, x: &Vector) -> f64 {
        let p = &self.params;
        0.5 * p.m * p.l * p.l * x[1] * x[1] + p.m * p.l * p.g_hat * x[0].cos()
    }

    fn accel(&self, theta: f64, torque: f64) -> f64 {
        let p = &self.params;
        (self.gravity_compensation(theta) + torque) / (p.m * p.l * p.l)
    }
}

fn wind_of(c: &Vector) -> [f64; 2] {
    [c.get(0).copied().unwrap_or(0.0), c.get(1).copied().unwrap_or(0.0)]
}

impl Plant for Pendulum {
    fn state_dim(&self) -> usize {
        2
    }

    fn control_dim(&self) -> usize {
        1
    }

    fn output_dim(&self) -> usize {
        1
    }

    fn dt(&self) -> f64 {
        self.params.dt
    }

    fn unknown(&self, x: &Vector, c: &Vector) -> Vector {
        Vector::from_element(1, pendulum_unknown_dynamics(x[0], x[1], wind_of(c), &self.params))
    }

    fn step(&self, x: &Vector, u: &Vector, c: &Vector, w: &Vector) -> Result<Vector> {
        check_dim("pendulum state", 2, x.len())?;
        check_dim("pendulum control", 1, u.len())?;
        check_dim("pendulum disturbance", 1, w.len())?;
        let torque = u[0] + self.unknown(x, c)[0] - w[0];
        let h = self.params.dt;
        let (theta, omega) = (x[0], x[1]);
        let next = match self.params.integrator {
            PendulumIntegrator::Euler => {
                Vector::from_column_slice(&[theta + h * omega, omega + h * self.accel(theta, torque)])
            }
            PendulumIntegrator::Rk4 => {
                let deriv = |th: f64, om: f64| (om, self.accel(th, torque));
                let k1 = deriv(theta, omega);
                let k2 = deriv(theta + 0.5 * h * k1.0, omega + 0.5 * h * k1.1);
                let k3 = deriv(theta + 0.5 * h * k2.0, omega + 0.5 * h * k2.1);
                let k4 = deriv(theta + h * k3.0, omega + h * k3.1);
                Vector::from_column_slice(&[
                    theta + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
                    omega + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
                ])
            }
        };
        finite(next)
    }
}
