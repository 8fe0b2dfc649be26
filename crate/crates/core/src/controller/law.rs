//! Certainty-equivalence control laws.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::dynamics::{ControlAffinePlant, Pendulum, PlantForm, QuadState, QuadrotorParams};
use crate::error::check_dim;
use crate::linalg::{pinv, rank, spectral_radius, vee};
use crate::{Error, Matrix, Result, Vector};

/// Maps a state and a prediction `f̂` to a control input.
pub trait ControlLaw: Send + Sync {
    fn control(&self, x: &Vector, f_hat: &Vector) -> Result<Vector>;

    /// The stabilised nominal map `x ↦ f0_cl(x)` if the closed loop has one;
    /// the logged residual is then `x_{t+1} − f0_cl(x_t)`.
    fn closed_loop_nominal(&self, _x: &Vector) -> Option<Vector> {
        None
    }
}

/// `u = B(x)† f̂` on a control-affine plant.
#[derive(Clone, Debug)]
pub struct PseudoInverseLaw {
    plant: ControlAffinePlant,
}

impl PseudoInverseLaw {
    pub fn new(plant: ControlAffinePlant) -> Self {
        Self { plant }
    }
}

impl ControlLaw for PseudoInverseLaw {
    fn control(&self, x: &Vector, f_hat: &Vector) -> Result<Vector> {
        if f_hat.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite prediction"));
        }
        let b = self.plant.actuation(x);
        match self.plant.form() {
            PlantForm::FullActuation => {
                let r = rank(&b);
                if r < b.nrows() {
                    return Err(Error::ActuationRank {
                        rank: r,
                        required: b.nrows(),
                    });
                }
                check_dim("prediction", b.nrows(), f_hat.len())?;
                Ok(pinv(&b) * f_hat)
            }
            // The unknown term already enters through B.
            PlantForm::Matched => {
                check_dim("prediction", b.ncols(), f_hat.len())?;
                Ok(f_hat.clone())
            }
        }
    }

    fn closed_loop_nominal(&self, x: &Vector) -> Option<Vector> {
        Some(self.plant.nominal(x))
    }
}

/// Discrete-time LQR gain `K` from the stabilising Riccati solution.
pub fn dlqr(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix) -> Result<Matrix> {
    let mut p = q.clone();
    for _ in 0..200_000 {
        let bt_p = b.transpose() * &p;
        let s = r + &bt_p * b;
        let s_inv = s.try_inverse().ok_or(Error::InvalidParameter("LQR: singular R + BᵀPB"))?;
        let k = &s_inv * &bt_p * a;
        let next = q + a.transpose() * &p * a - a.transpose() * &p * b * &k;
        let diff = (&next - &p).amax();
        p = next;
        if diff <= 1e-12 * p.amax().max(1.0) {
            let k = s_inv * b.transpose() * &p * a;
            let cl = a - b * &k;
            let sr = spectral_radius(&cl)?;
            if sr >= 1.0 {
                return Err(Error::NotStable(sr));
            }
            return Ok(k);
        }
    }
    Err(Error::InvalidParameter("LQR: Riccati iteration did not converge"))
}

/// `u = −Kx − m l ĝ sin θ − f̂`.
#[derive(Clone, Debug, PartialEq)]
pub struct PendulumLaw {
    pendulum: Pendulum,
    k: [f64; 2],
}

impl PendulumLaw {
    pub fn new(pendulum: Pendulum, k: [f64; 2]) -> Result<Self> {
        let law = Self { pendulum, k };
        let sr = spectral_radius(&law.closed_loop_matrix())?;
        if sr >= 1.0 {
            return Err(Error::NotStable(sr));
        }
        Ok(law)
    }

    /// Gain from discrete LQR on `(A, B)` with `Q = diag(q)`, `R = r`.
    pub fn lqr(pendulum: Pendulum, q: [f64; 2], r: f64) -> Result<Self> {
        let a = pendulum.a_matrix();
        let b = pendulum.b_matrix();
        let k = dlqr(
            &a,
            &b,
            &Matrix::from_diagonal(&Vector::from_column_slice(&q)),
            &Matrix::from_element(1, 1, r),
        )?;
        Self::new(pendulum, [k[(0, 0)], k[(0, 1)]])
    }

    pub fn gain(&self) -> [f64; 2] {
        self.k
    }

    /// `A − BK`.
    pub fn closed_loop_matrix(&self) -> Matrix {
        let k = Matrix::from_row_slice(1, 2, &self.k);
        self.pendulum.a_matrix() - self.pendulum.b_matrix() * k
    }
}

impl ControlLaw for PendulumLaw {
    fn control(&self, x: &Vector, f_hat: &Vector) -> Result<Vector> {
        check_dim("pendulum state", 2, x.len())?;
        check_dim("prediction", 1, f_hat.len())?;
        let u = -self.k[0] * x[0] - self.k[1] * x[1] - self.pendulum.gravity_compensation(x[0]) - f_hat[0];
        Ok(Vector::from_element(1, u))
    }

    fn closed_loop_nominal(&self, x: &Vector) -> Option<Vector> {
        Some(self.closed_loop_matrix() * x)
    }
}

/// Position PD with force feed-forward, kinematic decomposition, and a PD
/// attitude loop on `e_R = ½ vee(R_dᵀR − RᵀR_d)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadGains {
    /// Diagonal of `K_P`.
    pub kp: [f64; 3],
    /// Diagonal of `K_D`.
    pub kd: [f64; 3],
    /// Attitude stiffness per unit inertia, rad/s².
    pub k_r: f64,
    /// Attitude damping per unit inertia, 1/s.
    pub k_omega: f64,
    pub max_thrust: f64,
}

impl Default for QuadGains {
    fn default() -> Self {
        Self {
            kp: [4.0, 4.0, 4.0],
            kd: [3.5, 3.5, 3.5],
            k_r: 150.0,
            k_omega: 20.0,
            max_thrust: 40.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CascadedQuadController {
    params: QuadrotorParams,
    kp: Matrix3<f64>,
    kd: Matrix3<f64>,
    gains: QuadGains,
}

impl CascadedQuadController {
    pub fn new(params: QuadrotorParams, gains: QuadGains) -> Result<Self> {
        let positive = gains.kp.iter().chain(gains.kd.iter()).all(|g| *g > 0.0)
            && gains.k_r > 0.0
            && gains.k_omega > 0.0
            && gains.max_thrust > 0.0;
        if !positive {
            return Err(Error::InvalidParameter("quadrotor gains must be positive"));
        }
        Ok(Self {
            params,
            kp: Matrix3::from_diagonal(&Vector3::from(gains.kp)),
            kd: Matrix3::from_diagonal(&Vector3::from(gains.kd)),
            gains,
        })
    }

    /// `f_d = −m g − m(K_P p + K_D v) − f̂`.
    pub fn desired_force(&self, p: &Vector3<f64>, v: &Vector3<f64>, f_hat: &Vector3<f64>) -> Vector3<f64> {
        let m = self.params.mass;
        -self.params.gravity_vector() * m - (self.kp * p + self.kd * v) * m - f_hat
    }
}

/// `(R_d, T_d)` with `R_d e₃ ∥ f_d`, zero yaw, `T_d = ‖f_d‖`.
pub fn decompose_force(f_d: &Vector3<f64>) -> (Matrix3<f64>, f64) {
    let t = f_d.norm();
    let z = if t > 1e-9 { f_d / t } else { Vector3::z() };
    let mut y = z.cross(&Vector3::x());
    if y.norm() < 1e-9 {
        y = z.cross(&Vector3::y());
    }
    let y = y.normalize();
    let x = y.cross(&z);
    (Matrix3::from_columns(&[x, y, z]), t)
}

impl ControlLaw for CascadedQuadController {
    fn control(&self, x: &Vector, f_hat: &Vector) -> Result<Vector> {
        check_dim("prediction", 3, f_hat.len())?;
        let s = QuadState::from_vector(x)?;
        let f_hat = Vector3::new(f_hat[0], f_hat[1], f_hat[2]);
        let f_d = self.desired_force(&s.p, &s.v, &f_hat);
        let (r_d, _) = decompose_force(&f_d);
        // Thrust along the current body axis.
        let thrust = f_d.dot(&s.r.column(2)).clamp(0.0, self.gains.max_thrust);
        let e_r = vee(&(r_d.transpose() * s.r - s.r.transpose() * r_d)) * 0.5;
        let j = self.params.inertia_matrix();
        let tau = j * (-e_r * self.gains.k_r - s.omega * self.gains.k_omega) - (j * s.omega).cross(&s.omega);
        Ok(Vector::from_column_slice(&[thrust, tau.x, tau.y, tau.z]))
    }
}
