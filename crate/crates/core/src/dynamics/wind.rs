//! Environment (wind) sequences `c^(1..N)`.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result, Vector};

/// Signature of an adversarial environment picker: `(i, previous conditions) -> c^(i)`.
pub type AdversaryFn = Arc<dyn Fn(usize, &[Vector]) -> Vector + Send + Sync>;

#[derive(Clone)]
pub enum WindSampling {
    /// Independent uniform draws in the box.
    RandomUniform,
    /// The given list, verbatim.
    FixedList(Vec<Vector>),
    /// Chosen by a callback; results are clamped into the box.
    Adversarial(AdversaryFn),
}

impl fmt::Debug for WindSampling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WindSampling::RandomUniform => f.write_str("RandomUniform"),
            WindSampling::FixedList(l) => f.debug_tuple("FixedList").field(l).finish(),
            WindSampling::Adversarial(_) => f.write_str("Adversarial(..)"),
        }
    }
}

/// `N` environments, each held for `dwell` seconds, inside the box `[lo, hi]`.
#[derive(Clone, Debug)]
pub struct WindSchedule {
    pub count: usize,
    pub dwell: f64,
    pub lo: Vector,
    pub hi: Vector,
    pub sampling: WindSampling,
}

impl WindSchedule {
    /// Symmetric box `[-k, k]^dim` with random sampling.
    pub fn uniform(count: usize, dwell: f64, dim: usize, k: f64) -> Self {
        Self {
            count,
            dwell,
            lo: Vector::from_element(dim, -k),
            hi: Vector::from_element(dim, k),
            sampling: WindSampling::RandomUniform,
        }
    }

    /// Inner horizon `T = round(dwell / dt)`.
    pub fn horizon(&self, dt: f64) -> usize {
        let steps = self.dwell / dt;
        (steps + 0.5) as usize
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.lo.len() != self.hi.len() || self.lo.iter().zip(self.hi.iter()).any(|(l, h)| l > h) {
            return Err(Error::InvalidParameter("wind box must satisfy lo <= hi"));
        }
        if self.dwell <= 0.0 {
            return Err(Error::InvalidParameter("dwell must be positive"));
        }
        if let WindSampling::FixedList(list) = &self.sampling {
            if list.len() != self.count {
                return Err(Error::InvalidParameter("fixed wind list length must equal N"));
            }
            if list.iter().any(|c| !self.contains(c)) {
                return Err(Error::InvalidParameter("fixed wind condition outside the box"));
            }
        }
        Ok(())
    }

    pub fn contains(&self, c: &Vector) -> bool {
        c.len() == self.lo.len()
            && c.iter().zip(self.lo.iter().zip(self.hi.iter())).all(|(v, (l, h))| *l <= *v && *v <= *h)
    }

    fn clamp(&self, c: &Vector) -> Vector {
        Vector::from_fn(self.dim(), |i, _| {
            c.get(i).copied().unwrap_or(0.0).clamp(self.lo[i], self.hi[i])
        })
    }
}

/// The environment sequence for one seed.
pub fn wind_sequence(schedule: &WindSchedule, seed: u64) -> Result<Vec<Vector>> {
    schedule.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(match &schedule.sampling {
        WindSampling::FixedList(list) => list.clone(),
        WindSampling::RandomUniform => (0..schedule.count)
            .map(|_| {
                Vector::from_fn(schedule.dim(), |i, _| {
                    let (lo, hi) = (schedule.lo[i], schedule.hi[i]);
                    lo + (hi - lo) * rng.random::<f64>()
                })
            })
            .collect(),
        WindSampling::Adversarial(pick) => {
            let mut out: Vec<Vector> = Vec::with_capacity(schedule.count);
            for i in 1..=schedule.count {
                let c = schedule.clamp(&pick(i, &out));
                out.push(c);
            }
            out
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn fixed_list_is_verbatim() {
        let list = vec![
            Vector::from_column_slice(&[1.0, 0.0]),
            Vector::from_column_slice(&[-2.0, 3.0]),
        ];
        let mut s = WindSchedule::uniform(2, 2.0, 2, 4.0);
        s.sampling = WindSampling::FixedList(list.clone());
        assert_eq!(wind_sequence(&s, 9).unwrap(), list);
    }

    #[test]
    fn same_seed_same_sequence() {
        let s = WindSchedule::uniform(20, 2.0, 3, 4.0);
        assert_eq!(wind_sequence(&s, 5).unwrap(), wind_sequence(&s, 5).unwrap());
        assert_ne!(wind_sequence(&s, 5).unwrap(), wind_sequence(&s, 6).unwrap());
    }

    #[test]
    fn horizon_from_dwell() {
        assert_eq!(WindSchedule::uniform(1, 2.0, 2, 1.0).horizon(0.01), 200);
    }

    #[test]
    fn adversary_is_clamped() {
        let mut s = WindSchedule::uniform(3, 1.0, 2, 1.0);
        s.sampling = WindSampling::Adversarial(Arc::new(|i, prev: &[Vector]| {
            assert_eq!(prev.len(), i - 1);
            Vector::from_element(2, 10.0 * i as f64)
        }));
        for c in wind_sequence(&s, 0).unwrap() {
            assert!(s.contains(&c));
            assert_eq!(c[0], 1.0);
        }
    }

    #[test]
    fn bad_box_rejected() {
        let mut s = WindSchedule::uniform(3, 1.0, 2, 1.0);
        s.lo[0] = 2.0;
        assert!(wind_sequence(&s, 0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]
        #[test]
        fn random_draws_stay_in_box(seed in any::<u64>(), k in 0.1f64..10.0) {
            let s = WindSchedule::uniform(500, 2.0, 2, k);
            for c in wind_sequence(&s, seed).unwrap() {
                prop_assert!(s.contains(&c));
            }
        }
    }
}
