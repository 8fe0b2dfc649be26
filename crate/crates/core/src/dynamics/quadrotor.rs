//! 6-DoF quadrotor: `ṗ = v`, `m v̇ = m g + R f_T + f`, `Ṙ = R S(ω)`,
//! `J ω̇ = J ω × ω + τ`, integrated with RK4 and Gram-Schmidt re-orthonormalisation.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::{Plant, DEFAULT_DT};
use crate::error::check_dim;
use crate::linalg::{orthogonality_error, orthonormalize, skew};
use crate::{Error, Result, Vector};

/// Attitude accepted as input to a step.
pub const ORTHOGONALITY_PRE_TOL: f64 = 1e-6;
/// Drift within one step that counts as an integration failure.
pub const ORTHOGONALITY_FAIL_TOL: f64 = 1e-3;

/// Body-frame quadratic drag coefficients of the surrogate aerodynamic model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AeroParams {
    /// In the rotor plane (body x and y).
    pub c_xy: f64,
    /// Along the thrust axis (body z).
    pub c_z: f64,
}

impl Default for AeroParams {
    fn default() -> Self {
        Self {
            c_xy: 0.04,
            c_z: 0.12,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadrotorParams {
    pub mass: f64,
    /// Row-major inertia matrix.
    pub inertia: [[f64; 3]; 3],
    pub gravity: [f64; 3],
    pub aero: AeroParams,
    pub dt: f64,
}

impl Default for QuadrotorParams {
    fn default() -> Self {
        Self {
            mass: 1.0,
            inertia: [[0.02, 0.0, 0.0], [0.0, 0.02, 0.0], [0.0, 0.0, 0.04]],
            gravity: [0.0, 0.0, -9.81],
            aero: AeroParams::default(),
            dt: DEFAULT_DT,
        }
    }
}

impl QuadrotorParams {
    pub fn inertia_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.inertia[i][j])
    }

    pub fn gravity_vector(&self) -> Vector3<f64> {
        Vector3::from(self.gravity)
    }

    pub fn validate(&self) -> Result<()> {
        let j = self.inertia_matrix();
        if !(self.mass > 0.0 && self.dt > 0.0) {
            return Err(Error::InvalidParameter("quadrotor mass and dt must be positive"));
        }
        if (j - j.transpose()).amax() > 1e-12 || j.cholesky().is_none() {
            return Err(Error::InvalidParameter("inertia must be symmetric positive definite"));
        }
        Ok(())
    }
}

/// Position, velocity (world frame), attitude and body angular velocity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadState {
    pub p: Vector3<f64>,
    pub v: Vector3<f64>,
    pub r: Matrix3<f64>,
    pub omega: Vector3<f64>,
}

impl Default for QuadState {
    fn default() -> Self {
        Self {
            p: Vector3::zeros(),
            v: Vector3::zeros(),
            r: Matrix3::identity(),
            omega: Vector3::zeros(),
        }
    }
}

impl QuadState {
    pub const DIM: usize = 18;

    /// Layout `[p, v, vec(R), ω]` with `vec` column-major.
    pub fn to_vector(&self) -> Vector {
        let mut out = Vector::zeros(Self::DIM);
        out.rows_mut(0, 3).copy_from(&self.p);
        out.rows_mut(3, 3).copy_from(&self.v);
        out.rows_mut(6, 9).copy_from_slice(self.r.as_slice());
        out.rows_mut(15, 3).copy_from(&self.omega);
        out
    }

    pub fn from_vector(x: &Vector) -> Result<Self> {
        check_dim("quadrotor state", Self::DIM, x.len())?;
        Ok(Self {
            p: Vector3::new(x[0], x[1], x[2]),
            v: Vector3::new(x[3], x[4], x[5]),
            r: Matrix3::from_column_slice(&x.as_slice()[6..15]),
            omega: Vector3::new(x[15], x[16], x[17]),
        })
    }

    fn is_finite(&self) -> bool {
        self.p.iter().chain(self.v.iter()).chain(self.r.iter()).chain(self.omega.iter()).all(|v| v.is_finite())
    }
}

/// Multiplicative drag surrogate `f = −R D Rᵀ v_rel ‖v_rel‖`, `v_rel = v − w`,
/// `D = diag(c_xy, c_xy, c_z)`.
///
/// The force couples relative wind and attitude, so it is not a sum of a
/// state-only and a wind-only term.
pub fn surrogate_aero_force(
    v: &Vector3<f64>,
    r: &Matrix3<f64>,
    wind: &Vector3<f64>,
    aero: &AeroParams,
) -> Vector3<f64> {
    let v_rel = v - wind;
    let body = r.transpose() * v_rel;
    let drag = Vector3::new(aero.c_xy * body.x, aero.c_xy * body.y, aero.c_z * body.z);
    -(r * drag) * v_rel.norm()
}

#[derive(Clone, Copy)]
struct Deriv {
    p: Vector3<f64>,
    v: Vector3<f64>,
    r: Matrix3<f64>,
    omega: Vector3<f64>,
}

/// One RK4 step with thrust, body torque and external force held over `dt`.
pub fn quadrotor_step(
    params: &QuadrotorParams,
    state: &QuadState,
    thrust: f64,
    tau: &Vector3<f64>,
    f_aero: &Vector3<f64>,
) -> Result<QuadState> {
    let pre = orthogonality_error(&state.r);
    if pre > ORTHOGONALITY_PRE_TOL {
        return Err(Error::AttitudeIntegration(pre));
    }
    let j = params.inertia_matrix();
    let j_inv = j.try_inverse().ok_or(Error::InvalidParameter("singular inertia"))?;
    let g = params.gravity_vector();
    let m = params.mass;
    let f_t = Vector3::new(0.0, 0.0, thrust);

    let deriv = |s: &QuadState| Deriv {
        p: s.v,
        v: g + (s.r * f_t + f_aero) / m,
        r: s.r * skew(&s.omega),
        omega: j_inv * ((j * s.omega).cross(&s.omega) + tau),
    };
    let advance = |s: &QuadState, d: &Deriv, h: f64| QuadState {
        p: s.p + d.p * h,
        v: s.v + d.v * h,
        r: s.r + d.r * h,
        omega: s.omega + d.omega * h,
    };

    let h = params.dt;
    let k1 = deriv(state);
    let k2 = deriv(&advance(state, &k1, 0.5 * h));
    let k3 = deriv(&advance(state, &k2, 0.5 * h));
    let k4 = deriv(&advance(state, &k3, h));
    let combine = |a: Vector3<f64>, b: Vector3<f64>, c: Vector3<f64>, d: Vector3<f64>| {
        (a + b * 2.0 + c * 2.0 + d) * (h / 6.0)
    };
    let mut next = QuadState {
        p: state.p + combine(k1.p, k2.p, k3.p, k4.p),
        v: state.v + combine(k1.v, k2.v, k3.v, k4.v),
        r: state.r + (k1.r + k2.r * 2.0 + k3.r * 2.0 + k4.r) * (h / 6.0),
        omega: state.omega + combine(k1.omega, k2.omega, k3.omega, k4.omega),
    };
    if !next.is_finite() {
        return Err(Error::StateDiverged(None));
    }
    let drift = orthogonality_error(&next.r);
    if drift > ORTHOGONALITY_FAIL_TOL {
        return Err(Error::AttitudeIntegration(drift));
    }
    next.r = orthonormalize(&next.r);
    Ok(next)
}

/// Quadrotor plant with the surrogate aerodynamic force as the unknown term.
///
/// Control `u = (T, τx, τy, τz)`; the applied external force is `f(x, c) − w`.
/// The regulated output is the position, the feature input `(v, vec(R))`.
#[derive(Clone, Debug, PartialEq)]
pub struct Quadrotor {
    pub params: QuadrotorParams,
}

impl Quadrotor {
    pub fn new(params: QuadrotorParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params })
    }
}

fn wind3(c: &Vector) -> Vector3<f64> {
    Vector3::from_fn(|i, _| c.get(i).copied().unwrap_or(0.0))
}

impl Plant for Quadrotor {
    fn state_dim(&self) -> usize {
        QuadState::DIM
    }

    fn control_dim(&self) -> usize {
        4
    }

    fn output_dim(&self) -> usize {
        3
    }

    fn dt(&self) -> f64 {
        self.params.dt
    }

    fn initial_state(&self) -> Vector {
        QuadState::default().to_vector()
    }

    fn unknown(&self, x: &Vector, c: &Vector) -> Vector {
        let v = Vector3::new(x[3], x[4], x[5]);
        let r = Matrix3::from_column_slice(&x.as_slice()[6..15]);
        let f = surrogate_aero_force(&v, &r, &wind3(c), &self.params.aero);
        Vector::from_column_slice(f.as_slice())
    }

    fn step(&self, x: &Vector, u: &Vector, c: &Vector, w: &Vector) -> Result<Vector> {
        check_dim("quadrotor control", 4, u.len())?;
        check_dim("quadrotor disturbance", 3, w.len())?;
        let state = QuadState::from_vector(x)?;
        let f = self.unknown(x, c);
        let applied = Vector3::new(f[0] - w[0], f[1] - w[1], f[2] - w[2]);
        let tau = Vector3::new(u[1], u[2], u[3]);
        let next = quadrotor_step(&self.params, &state, u[0], &tau, &applied)?;
        Ok(next.to_vector())
    }

    fn regulated(&self, x: &Vector) -> Vector {
        x.rows(0, 3).into_owned()
    }

    fn feature_input(&self, x: &Vector) -> Vector {
        x.rows(3, 12).into_owned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> QuadrotorParams {
        QuadrotorParams::default()
    }

    #[test]
    fn hover_is_an_equilibrium() {
        let p = params();
        let mut s = QuadState::default();
        let hover = p.mass * p.gravity_vector().norm();
        for _ in 0..500 {
            s = quadrotor_step(&p, &s, hover, &Vector3::zeros(), &Vector3::zeros()).unwrap();
        }
        assert!(s.v.norm() < 1e-12);
        assert!(s.p.norm() < 1e-12);
        assert!((s.r - Matrix3::identity()).amax() < 1e-12);
    }

    #[test]
    fn free_fall() {
        let p = params();
        let mut s = QuadState::default();
        for k in 1..=100 {
            s = quadrotor_step(&p, &s, 0.0, &Vector3::zeros(), &Vector3::zeros()).unwrap();
            let expected = -9.81 * k as f64 * p.dt;
            assert!((s.v.z - expected).abs() < 1e-10);
        }
    }

    #[test]
    fn torque_free_principal_spin_is_conserved() {
        let p = params();
        let mut s = QuadState {
            omega: Vector3::new(0.0, 0.0, 3.0),
            ..QuadState::default()
        };
        let w0 = s.omega.norm();
        for _ in 0..1000 {
            let prev = s.omega.norm();
            s = quadrotor_step(&p, &s, 0.0, &Vector3::zeros(), &Vector3::zeros()).unwrap();
            assert!((s.omega.norm() - prev).abs() < 1e-8);
            for row in 0..3 {
                assert!((s.r.row(row).norm() - 1.0).abs() < 1e-6);
            }
        }
        assert!((s.omega.norm() - w0).abs() < 1e-8);
        // R rotated about z by ω t.
        let angle = 3.0 * 1000.0 * p.dt;
        assert!((s.r[(0, 0)] - angle.cos()).abs() < 1e-6);
    }

    #[test]
    fn non_orthogonal_attitude_is_rejected() {
        let p = params();
        let s = QuadState {
            r: Matrix3::identity() * 1.01,
            ..QuadState::default()
        };
        assert!(matches!(
            quadrotor_step(&p, &s, 0.0, &Vector3::zeros(), &Vector3::zeros()),
            Err(Error::AttitudeIntegration(_))
        ));
    }

    #[test]
    fn violent_spin_fails_loudly() {
        let p = params();
        let s = QuadState {
            omega: Vector3::new(400.0, 300.0, 0.0),
            ..QuadState::default()
        };
        assert!(matches!(
            quadrotor_step(&p, &s, 0.0, &Vector3::zeros(), &Vector3::zeros()),
            Err(Error::AttitudeIntegration(_))
        ));
    }

    #[test]
    fn aero_zero_relative_wind() {
        let v = Vector3::new(1.0, -2.0, 0.5);
        let f = surrogate_aero_force(&v, &Matrix3::identity(), &v, &AeroParams::default());
        assert_eq!(f, Vector3::zeros());
    }

    #[test]
    fn aero_is_quadratic_in_relative_wind() {
        let a = AeroParams::default();
        let r = orthonormalize(&Matrix3::new(1.0, 0.2, 0.0, -0.2, 1.0, 0.1, 0.0, -0.1, 1.0));
        let w = Vector3::new(2.0, -1.0, 0.3);
        let v1 = Vector3::new(0.5, 0.5, 0.0);
        let v2 = w + (v1 - w) * 2.0;
        let f1 = surrogate_aero_force(&v1, &r, &w, &a);
        let f2 = surrogate_aero_force(&v2, &r, &w, &a);
        assert!((f2 - f1 * 4.0).norm() < 1e-12);
    }

    #[test]
    fn aero_depends_on_wind_and_attitude() {
        let a = AeroParams::default();
        let v = Vector3::zeros();
        let f1 = surrogate_aero_force(&v, &Matrix3::identity(), &Vector3::new(3.0, 0.0, 0.0), &a);
        let f2 = surrogate_aero_force(&v, &Matrix3::identity(), &Vector3::new(0.0, 3.0, 1.0), &a);
        assert!((f1 - f2).norm() > 1e-3);
        let tilted = orthonormalize(&Matrix3::new(0.0, 0.0, 1.0, 0.0, 1.0, 0.0, -1.0, 0.0, 0.0));
        let f3 = surrogate_aero_force(&v, &tilted, &Vector3::new(3.0, 0.0, 0.0), &a);
        assert!((f1 - f3).norm() > 1e-3);
    }

    #[test]
    fn plant_vector_roundtrip_and_outputs() {
        let quad = Quadrotor::new(params()).unwrap();
        let x = quad.initial_state();
        assert_eq!(QuadState::from_vector(&x).unwrap(), QuadState::default());
        assert_eq!(quad.regulated(&x).len(), 3);
        assert_eq!(quad.feature_input(&x).len(), 12);
        let hover = Vector::from_column_slice(&[9.81, 0.0, 0.0, 0.0]);
        let next = quad
            .step(&x, &hover, &Vector::zeros(3), &Vector::zeros(3))
            .unwrap();
        assert!((next - x).norm() < 1e-12);
    }

    #[test]
    fn inertia_must_be_positive_definite() {
        let mut p = params();
        p.inertia[2][2] = -1.0;
        assert!(Quadrotor::new(p).is_err());
    }
}
