//! Riemannian gradient descent toward prescribed TT-ranks.
//!
//! The objective is `ℒ(𝒲̂) = ½‖𝒲 − 𝒲̂‖_F²`, evaluated entirely in TT
//! arithmetic. Each step takes the free gradient step
//! `𝒲̂ − η∇ℒ(𝒲̂)` (ranks grow) and retracts it back to the target ranks
//! with [`retract_orthogonal`].

mod bounds;
mod trace;

pub use bounds::{
    check_gradient_dominated, check_theorem1_bounds, check_unsquared_domination, BoundCheck, BoundReport,
    UnsquaredReading, UnsquaredReport,
};
pub use trace::{ConvergenceTrace, TraceRecord};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::retraction::{retract_orthogonal, Retractable};
use crate::tt::{RankCap, RankProfile, TTVector};

/// Smoothness constant `H` of the loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Smoothness {
    Known(f64),
    /// Estimated by power iteration on the Hessian action of the loss.
    Auto,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RgdConfig {
    pub eta: f64,
    pub max_steps: usize,
    pub target_ranks: RankProfile,
    pub smoothness: Smoothness,
    /// Stop once `‖∇ℒ‖² ≤ stop_tol`. `None` means `1e-14 ×` the initial value.
    pub stop_tol: Option<f64>,
}

impl RgdConfig {
    /// `η = 1`, ten steps, `H = 1`, default stopping rule.
    pub fn new(target_ranks: RankProfile) -> Self {
        Self {
            eta: 1.0,
            max_steps: 10,
            target_ranks,
            smoothness: Smoothness::Known(1.0),
            stop_tol: None,
        }
    }

    /// Checks `T ≥ 1`, `stop_tol ≥ 0` and `η ∈ (0, 2/H)`.
    pub fn validate(&self, h: f64) -> Result<()> {
        if self.max_steps == 0 {
            return Err(Error::Config("max_steps must be at least 1".into()));
        }
        if let Some(tol) = self.stop_tol {
            if !(tol.is_finite() && tol >= 0.0) {
                return Err(Error::Config(format!(
                    "stop_tol must be a non-negative number, got {tol}"
                )));
            }
        }
        check_step_size(self.eta, h)
    }
}

pub(crate) fn check_step_size(eta: f64, h: f64) -> Result<()> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::Config(format!("smoothness H must be positive, got {h}")));
    }
    if !(eta.is_finite() && eta > 0.0 && eta < 2.0 / h) {
        return Err(Error::Config(format!("η = {eta} outside (0, 2/H) = (0, {})", 2.0 / h)));
    }
    Ok(())
}

/// `½‖𝒲_ref − 𝒲̂‖_F²`
pub fn tt_distance_loss<T: Retractable>(w_ref: &T, w_hat: &T) -> Result<f64> {
    let d = w_ref.to_train().add(&w_hat.to_train().scale(-1.0))?;
    Ok(0.5 * d.norm().powi(2))
}

/// Euclidean gradient `𝒲̂ − 𝒲_ref` of [`tt_distance_loss`] with respect to
/// `w_hat`, with interior ranks `R̂_k + R_k`.
pub fn loss_gradient<T: Retractable>(w_ref: &T, w_hat: &T) -> Result<T> {
    let g = w_hat.to_train().add(&w_ref.to_train().scale(-1.0))?;
    w_hat.with_train(g)
}

/// Result of one [`rgd_step`].
#[derive(Debug, Clone)]
pub struct RgdStep<T> {
    /// Retracted iterate `𝒲̂^(t+1)`.
    pub next: T,
    /// `ℒ(𝒲̂^(t))`
    pub loss: f64,
    /// `‖∇ℒ(𝒲̂^(t))‖²`
    pub grad_norm_sq: f64,
}

/// `𝒲̂^(t+1) = ℛ(𝒲̂^(t) − η∇ℒ(𝒲̂^(t)))` with the pre-step loss and gradient norm.
pub fn rgd_step<T: Retractable>(w_hat: &T, w_ref: &T, cfg: &RgdConfig) -> Result<RgdStep<T>> {
    let hat = w_hat.to_train();
    let grad = hat.add(&w_ref.to_train().scale(-1.0))?;
    let grad_norm_sq = grad.norm().powi(2);
    let free = hat.add(&grad.scale(-cfg.eta))?;
    let (next, _) = retract_orthogonal(&free, &RankCap::Profile(cfg.target_ranks.clone()))?;
    if !grad_norm_sq.is_finite() {
        return Err(Error::NumericalFailure("gradient norm is not finite".into()));
    }
    Ok(RgdStep {
        next: w_hat.with_train(next)?,
        loss: 0.5 * grad_norm_sq,
        grad_norm_sq,
    })
}

/// Estimates the largest Hessian eigenvalue of the loss at `at` by power
/// iteration, using gradient differences as the Hessian action.
pub fn estimate_smoothness<T: Retractable>(w_ref: &T, at: &T, iters: usize, seed: u64) -> Result<f64> {
    let base = at.to_train();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = TTVector::random(base.shape(), &RankProfile::uniform(base.order(), 1)?, &mut rng)?;
    v = v.scale(1.0 / v.norm());
    let g0 = loss_gradient(w_ref, at)?.to_train();
    let mut h = 0.0;
    for _ in 0..iters.max(1) {
        let shifted = at.with_train(base.add(&v)?)?;
        let hv = loss_gradient(w_ref, &shifted)?.to_train().add(&g0.scale(-1.0))?;
        h = v.dot(&hv)?;
        let n = hv.norm();
        if n == 0.0 {
            break;
        }
        // keep the direction's ranks bounded between iterations
        let (r, _) = retract_orthogonal(&hv.scale(1.0 / n), &RankCap::Max(1))?;
        v = r.scale(1.0 / r.norm());
    }
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::NumericalFailure(format!(
            "smoothness estimate {h} is not positive"
        )));
    }
    Ok(h)
}

/// Resolves `H` for a config against a concrete problem.
pub fn smoothness_constant<T: Retractable>(cfg: &RgdConfig, w_ref: &T) -> Result<f64> {
    match cfg.smoothness {
        Smoothness::Known(h) => Ok(h),
        Smoothness::Auto => estimate_smoothness(w_ref, w_ref, 20, 0),
    }
}

/// Approximates `w_ref` by a tensor with ranks `cfg.target_ranks`.
///
/// Starts from `𝒲̂^(0) = ℛ(𝒲_ref)` and runs [`rgd_step`] until the squared
/// gradient norm falls to the stopping tolerance or `T` steps have been taken.
/// If every rank of `w_ref` is already within the target, `w_ref` is returned
/// unchanged with a single zero-loss record.
pub fn rgd_compress<T: Retractable + Clone>(w_ref: &T, cfg: &RgdConfig) -> Result<(T, ConvergenceTrace)> {
    let h = smoothness_constant(cfg, w_ref)?;
    cfg.validate(h)?;
    let train = w_ref.to_train();
    if cfg.target_ranks.order() != train.order() {
        return Err(Error::InvalidRanks(format!(
            "target ranks {} do not match a train of order {}",
            cfg.target_ranks,
            train.order()
        )));
    }
    let ranks = train.ranks();
    if ranks.le(&cfg.target_ranks) {
        let trace = ConvergenceTrace::new(
            vec![TraceRecord {
                step: 0,
                loss: 0.0,
                grad_norm_sq: 0.0,
                ranks: ranks.clone(),
            }],
            0.0,
            ranks,
        )?;
        return Ok((w_ref.clone(), trace));
    }

    let (mut w, _) = retract_orthogonal(w_ref, &RankCap::Profile(cfg.target_ranks.clone()))?;
    let mut records = Vec::with_capacity(cfg.max_steps);
    let mut tol = cfg.stop_tol;
    for t in 0..cfg.max_steps {
        let step = rgd_step(&w, w_ref, cfg)?;
        let tol = *tol.get_or_insert(1e-14 * step.grad_norm_sq);
        records.push(TraceRecord {
            step: t,
            loss: step.loss,
            grad_norm_sq: step.grad_norm_sq,
            ranks: w.to_train().ranks(),
        });
        if step.grad_norm_sq <= tol {
            break;
        }
        w = step.next;
    }
    let final_loss = tt_distance_loss(w_ref, &w)?;
    let final_ranks = w.to_train().ranks();
    Ok((w, ConvergenceTrace::new(records, final_loss, final_ranks)?))
}
