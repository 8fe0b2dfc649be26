//! Episode logs, the average control error (ACE) and the e-ISS based bound on it.

use alloc::vec::Vec;
use core::fmt::Write;
#[allow(unused_imports)] // inherent f64 methods shadow it when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::linalg::spectral_norm;
use crate::{Error, Matrix, Result, Vector};

/// Power-sweep horizon for [`estimate_eiss_constants`].
pub const EISS_SWEEP_HORIZON: usize = 500;
/// Margin added to the spectral radius in [`estimate_eiss_constants`].
pub const EISS_RHO_MARGIN: f64 = 1e-6;

/// System state at inner step `t` of outer iteration `i` (both 1-based).
#[derive(Clone, Debug, PartialEq)]
pub struct EnvState {
    pub x: Vector,
    pub t: usize,
    pub i: usize,
}

impl EnvState {
    pub fn new(x: Vector, t: usize, i: usize) -> Result<Self> {
        if t == 0 || i == 0 {
            return Err(Error::InvalidParameter("step indices are 1-based"));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::StateDiverged(None));
        }
        Ok(Self { x, t, i })
    }
}

/// Constants of the exponential input-to-state stability estimate
/// `‖x_t‖ ≤ β ρ^{t-1} ‖x_1‖ + γ Σ_k ρ^{t-1-k} ‖v_k‖`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EissConstants {
    pub beta: f64,
    pub rho: f64,
    pub gamma: f64,
}

impl EissConstants {
    pub fn new(beta: f64, rho: f64, gamma: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rho) {
            return Err(Error::InvalidParameter("rho must lie in [0, 1)"));
        }
        if !(beta >= 0.0 && gamma >= 0.0) {
            return Err(Error::InvalidParameter("beta and gamma must be non-negative"));
        }
        Ok(Self { beta, rho, gamma })
    }

    /// `γ / (1 − ρ)`, the gain from residual RMS to ACE.
    pub fn gain(&self) -> f64 {
        self.gamma / (1.0 - self.rho)
    }

    /// Upper bound on the ACE of the omniscient controller under `‖w‖ ≤ W`.
    pub fn omniscient_bound(&self, w_bound: f64) -> f64 {
        self.gain() * w_bound
    }
}

/// One inner step of one outer iteration.
///
/// `y` is always built as `f_true − w`, never measured, so the loss seen by the
/// adapters is exactly the one recorded here.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub outer: usize,
    pub step: usize,
    /// Regulated state (what ACE averages the norm of).
    pub x: Vector,
    pub u: Vector,
    pub f_true: Vector,
    pub f_hat: Vector,
    pub w: Vector,
    pub y: Vector,
    pub loss: f64,
    /// `x_{t+1} − f0(x_t)` for the stabilised nominal map `f0`; the input `v_t`
    /// of the e-ISS inequality.
    pub residual: Vector,
}

impl StepRecord {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        state: EnvState,
        u: Vector,
        f_true: Vector,
        f_hat: Vector,
        w: Vector,
        residual: Vector,
    ) -> Self {
        let y = &f_true - &w;
        let loss = (&f_hat - &y).norm_squared();
        Self {
            outer: state.i,
            step: state.t,
            x: state.x,
            u,
            f_true,
            f_hat,
            w,
            y,
            loss,
            residual,
        }
    }

    /// `‖f̂ − f‖`.
    pub fn prediction_error(&self) -> f64 {
        (&self.f_hat - &self.f_true).norm()
    }
}

/// Per-step records of a run over `N` environments of `T` steps each.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EpisodeLog {
    records: Vec<StepRecord>,
}

/// Per-outer-iteration means.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationSummary {
    pub outer: usize,
    pub mean_ctrl_err: f64,
    pub mean_pred_err: f64,
}

impl EpisodeLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, record: StepRecord) {
        self.records.push(record);
    }

    pub fn extend(&mut self, other: EpisodeLog) {
        self.records.extend(other.records);
    }

    pub fn records(&self) -> &[StepRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Whether the log holds exactly `n·t` records.
    pub fn is_complete(&self, n: usize, t: usize) -> bool {
        self.records.len() == n * t
    }

    /// Records of outer iteration `i`.
    pub fn outer(&self, i: usize) -> impl Iterator<Item = &StepRecord> {
        self.records.iter().filter(move |r| r.outer == i)
    }

    /// Mean control error `‖x‖` and prediction error `‖f̂ − f‖` per outer iteration,
    /// in order of first appearance.
    pub fn iteration_summaries(&self) -> Vec<IterationSummary> {
        let mut out: Vec<(usize, f64, f64, usize)> = Vec::new();
        for r in &self.records {
            let slot = match out.iter().position(|s| s.0 == r.outer) {
                Some(p) => p,
                None => {
                    out.push((r.outer, 0.0, 0.0, 0));
                    out.len() - 1
                }
            };
            let s = &mut out[slot];
            s.1 += r.x.norm();
            s.2 += r.prediction_error();
            s.3 += 1;
        }
        out.into_iter()
            .map(|(outer, c, p, k)| IterationSummary {
                outer,
                mean_ctrl_err: c / k as f64,
                mean_pred_err: p / k as f64,
            })
            .collect()
    }

    /// CSV with header `i,t,x0..,u0..,f0..,fhat0..,w0..,loss`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> core::fmt::Result {
        let dims = self.records.first().map(|r| {
            (r.x.len(), r.u.len(), r.f_true.len(), r.f_hat.len(), r.w.len())
        });
        let (nx, nu, nf, nfh, nw) = dims.unwrap_or((0, 0, 0, 0, 0));
        write!(out, "i,t")?;
        for (prefix, n) in [("x", nx), ("u", nu), ("f", nf), ("fhat", nfh), ("w", nw)] {
            for k in 0..n {
                write!(out, ",{prefix}{k}")?;
            }
        }
        writeln!(out, ",loss")?;
        for r in &self.records {
            write!(out, "{},{}", r.outer, r.step)?;
            for v in [&r.x, &r.u, &r.f_true, &r.f_hat, &r.w] {
                for x in v.iter() {
                    write!(out, ",{x}")?;
                }
            }
            writeln!(out, ",{}", r.loss)?;
        }
        Ok(())
    }
}

/// Average control error `(1/TN) Σ_i Σ_t ‖x_t^(i)‖`.
pub fn ace(log: &EpisodeLog) -> Result<f64> {
    if log.is_empty() {
        return Err(Error::EmptyEpisode);
    }
    let total: f64 = log.records().iter().map(|r| r.x.norm()).sum();
    Ok(total / log.len() as f64)
}

/// `(γ/(1−ρ)) · sqrt((1/TN) Σ ‖v_t‖²)` with `v_t` the logged residuals.
pub fn eiss_bound(log: &EpisodeLog, k: &EissConstants) -> Result<f64> {
    if log.is_empty() {
        return Err(Error::EmptyEpisode);
    }
    let mean_sq: f64 =
        log.records().iter().map(|r| r.residual.norm_squared()).sum::<f64>() / log.len() as f64;
    Ok(k.gain() * mean_sq.sqrt())
}

/// Estimates e-ISS constants for the linear map `x ↦ A x`.
///
/// `ρ` is the larger of `spectral_radius(A) + 1e-6` and `‖A^K‖^{1/K}` with
/// `K = 500`; the second term guarantees `‖(A/ρ)^K‖ ≤ 1`, so by
/// submultiplicativity the sweep maximum `γ = max_{k<K} ‖A^k‖/ρ^k` bounds
/// `‖A^k‖/ρ^k` for every `k`. `β = γ`.
pub fn estimate_eiss_constants(a: &Matrix) -> Result<EissConstants> {
    let sr = crate::linalg::spectral_radius(a)?;
    if sr >= 1.0 {
        return Err(Error::NotStable(sr));
    }
    let n = a.nrows();
    if n == 0 {
        return EissConstants::new(1.0, EISS_RHO_MARGIN, 1.0);
    }

    // log ‖A^K‖ through normalised powers.
    let mut power = Matrix::identity(n, n);
    let mut log_scale = 0.0;
    let mut vanished = false;
    for _ in 0..EISS_SWEEP_HORIZON {
        power = a * &power;
        let s = power.norm();
        if s == 0.0 {
            vanished = true;
            break;
        }
        power /= s;
        log_scale += s.ln();
    }
    let rho_k = if vanished {
        0.0
    } else {
        ((log_scale + spectral_norm(&power).ln()) / EISS_SWEEP_HORIZON as f64).exp()
    };
    let rho = (sr + EISS_RHO_MARGIN).max(rho_k);
    if rho >= 1.0 {
        return Err(Error::NotStable(rho));
    }

    let scaled = a / rho;
    let mut p = Matrix::identity(n, n);
    let mut gamma: f64 = 1.0;
    for _ in 1..EISS_SWEEP_HORIZON {
        p = &scaled * &p;
        gamma = gamma.max(spectral_norm(&p));
    }
    EissConstants::new(gamma, rho, gamma)
}
