//! Online update rules: projected OGD, ridge meta-regression, Adam, and the
//! learning-rate schedules that make the nested regret bound go through.

mod adam;
mod ridge;

use alloc::vec::Vec;
#[allow(unused_imports)] // inherent f64 methods shadow it when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::check_dim;
use crate::linalg::project_ball;
use crate::{Error, Result};

pub use adam::AdamState;
pub use ridge::RidgeMetaAdapter;

/// Step size as a function of the 1-based step counter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepSchedule {
    /// `η_t = D/(G√t)`.
    InverseSqrt { d: f64, g: f64 },
    Fixed(f64),
}

impl StepSchedule {
    pub fn rate(&self, t: usize) -> f64 {
        match *self {
            StepSchedule::InverseSqrt { d, g } => d / (g * (t.max(1) as f64).sqrt()),
            StepSchedule::Fixed(eta) => eta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            StepSchedule::InverseSqrt { d, g } => d >= 0.0 && g > 0.0 && d.is_finite() && g.is_finite(),
            StepSchedule::Fixed(eta) => eta >= 0.0 && eta.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter("step schedule constants must be finite, G > 0"))
        }
    }
}

/// Feasible set of a projected update.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProjectionSet {
    /// Euclidean ball; an infinite radius is unconstrained.
    Ball(f64),
    /// Consecutive blocks `(length, radius)`, each projected onto its own ball.
    ProductOfBalls(Vec<(usize, f64)>),
}

impl ProjectionSet {
    pub fn project(&self, x: &mut [f64]) {
        match self {
            ProjectionSet::Ball(r) => project_ball(x, *r),
            ProjectionSet::ProductOfBalls(blocks) => {
                let mut k = 0;
                for &(len, r) in blocks {
                    project_ball(&mut x[k..k + len], r);
                    k += len;
                }
            }
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let inside = |v: &[f64], r: f64| v.iter().map(|a| a * a).sum::<f64>().sqrt() <= r * (1.0 + 1e-12);
        match self {
            ProjectionSet::Ball(r) => inside(x, *r),
            ProjectionSet::ProductOfBalls(blocks) => {
                let mut k = 0;
                blocks.iter().all(|&(len, r)| {
                    let ok = inside(&x[k..k + len], r);
                    k += len;
                    ok
                })
            }
        }
    }

    /// Diameter of the set.
    pub fn diameter(&self) -> f64 {
        match self {
            ProjectionSet::Ball(r) => 2.0 * r,
            ProjectionSet::ProductOfBalls(blocks) => {
                2.0 * blocks.iter().map(|&(_, r)| r * r).sum::<f64>().sqrt()
            }
        }
    }
}

/// Projected online gradient descent `x ← Π(x − η_t ∇)`.
#[derive(Clone, Debug, PartialEq)]
pub struct OgdAdapter {
    pub projection: ProjectionSet,
    pub schedule: StepSchedule,
    t: usize,
}

impl OgdAdapter {
    pub fn new(projection: ProjectionSet, schedule: StepSchedule) -> Self {
        Self {
            projection,
            schedule,
            t: 0,
        }
    }

    pub fn ball(radius: f64, schedule: StepSchedule) -> Self {
        Self::new(ProjectionSet::Ball(radius), schedule)
    }

    /// Number of steps taken since the last reset.
    pub fn counter(&self) -> usize {
        self.t
    }

    pub fn reset_counter(&mut self) {
        self.t = 0;
    }

    /// Applies one update in place and returns the step size used.
    pub fn step(&mut self, param: &mut [f64], grad: &[f64]) -> Result<f64> {
        check_dim("OGD gradient", param.len(), grad.len())?;
        self.t += 1;
        let eta = self.schedule.rate(self.t);
        for (p, g) in param.iter_mut().zip(grad) {
            *p -= eta * g;
        }
        self.projection.project(param);
        Ok(eta)
    }
}

/// Radii and basis bounds entering the convex-case schedules.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConstants {
    /// `sup ‖Y₁(x)‖`.
    pub k1: f64,
    /// `sup ‖Y₂(x)‖`.
    pub k2: f64,
    pub k_theta: f64,
    pub k_c: f64,
    /// Disturbance bound `W`.
    pub w: f64,
}

impl ScheduleConstants {
    pub fn c1(&self) -> f64 {
        4.0 * self.k1 * self.k1 * self.k_theta + 4.0 * self.k1 * self.k2 * self.k_c + 2.0 * self.k1 * self.w
    }

    pub fn c2(&self) -> f64 {
        4.0 * self.k2 * self.k2 * self.k_c + 4.0 * self.k1 * self.k2 * self.k_theta + 2.0 * self.k2 * self.w
    }
}

/// `(η̄^(i), η_t^(i)) = (2K_Θ/(C₁T√i), 2K_c/(C₂√t))` as two schedules.
pub fn convex_rate_schedules(k: &ScheduleConstants, horizon: usize) -> Result<(StepSchedule, StepSchedule)> {
    let (c1, c2) = (k.c1(), k.c2());
    if !(c1 > 0.0 && c2 > 0.0) || horizon == 0 {
        return Err(Error::InvalidParameter("schedule constants must be positive"));
    }
    Ok((
        StepSchedule::InverseSqrt {
            d: 2.0 * k.k_theta,
            g: c1 * horizon as f64,
        },
        StepSchedule::InverseSqrt {
            d: 2.0 * k.k_c,
            g: c2,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut a = OgdAdapter::ball(2.0, StepSchedule::Fixed(0.3));
        let mut x = [0.5, -1.0];
        a.step(&mut x, &[0.0, 0.0]).unwrap();
        assert_eq!(x, [0.5, -1.0]);
    }

    #[test]
    fn first_step_scalar() {
        let mut a = OgdAdapter::ball(2.0, StepSchedule::InverseSqrt { d: 1.0, g: 1.0 });
        let mut x = [0.0];
        assert_eq!(a.step(&mut x, &[-1.0]).unwrap(), 1.0);
        assert_eq!(x, [1.0]);
    }

    #[test]
    fn regret_on_scalar_quadratic() {
        let k = 2.0;
        let (g, d) = (2.0 * (k + 1.0), 2.0 * k);
        let mut a = OgdAdapter::ball(k, StepSchedule::InverseSqrt { d, g });
        let mut x = [-2.0];
        let horizon = 10_000;
        let mut regret = 0.0;
        for _ in 0..horizon {
            regret += (x[0] - 1.0) * (x[0] - 1.0);
            let grad = [2.0 * (x[0] - 1.0)];
            a.step(&mut x, &grad).unwrap();
        }
        assert!(regret <= 1.5 * g * d * (horizon as f64).sqrt());
    }

    #[test]
    fn schedule_arithmetic() {
        let k = ScheduleConstants {
            k1: 1.0,
            k2: 1.0,
            k_theta: 1.0,
            k_c: 1.0,
            w: 0.0,
        };
        assert_eq!((k.c1(), k.c2()), (8.0, 8.0));
        let (outer, inner) = convex_rate_schedules(&k, 1).unwrap();
        assert_eq!(inner.rate(1), 0.25);
        assert_eq!(outer.rate(1), 0.25);
        assert!((outer.rate(4) - 0.125).abs() < 1e-15);
        let zero = ScheduleConstants { k_theta: 0.0, k_c: 0.0, w: 0.0, ..k };
        assert!(convex_rate_schedules(&zero, 10).is_err());
    }

    #[test]
    fn product_of_balls() {
        let set = ProjectionSet::ProductOfBalls(vec![(2, 1.0), (1, 3.0)]);
        let mut x = [3.0, 4.0, -5.0];
        set.project(&mut x);
        assert!((x[0] - 0.6).abs() < 1e-15 && (x[1] - 0.8).abs() < 1e-15 && x[2] == -3.0);
        assert!((set.diameter() - 2.0 * 10f64.sqrt()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn iterates_stay_in_ball(
            start in proptest::collection::vec(-10.0f64..10.0, 3),
            grads in proptest::collection::vec(proptest::collection::vec(-50.0f64..50.0, 3), 1..50),
            radius in 0.1f64..5.0,
        ) {
            let mut a = OgdAdapter::ball(radius, StepSchedule::InverseSqrt { d: 1.0, g: 0.5 });
            let mut x = start.clone();
            a.projection.project(&mut x);
            for g in &grads {
                a.step(&mut x, g).unwrap();
                prop_assert!(a.projection.contains(&x));
            }
        }
    }
}
