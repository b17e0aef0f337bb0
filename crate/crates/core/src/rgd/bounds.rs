//! Run-time checks of the convergence and performance guarantees.
//!
//! With `c = 2 / (η(2 − Hη))` and `ℒ*` supplied by the caller:
//!
//! * max bound: `max_t ‖∇ℒ(𝒲^(t))‖² ≤ c·(ℒ(𝒲^(0)) − ℒ*)`
//! * min bound: `min_t ‖∇ℒ(𝒲^(t))‖² ≤ c·(ℒ(𝒲^(0)) − ℒ*) / T`
//! * gradient domination: `ℒ(𝒲^(t)) − ℒ* ≤ τ‖∇ℒ(𝒲^(t))‖²` for every `t`
//! * performance: the domination inequality at `α = argmin_t ‖∇ℒ(𝒲^(t))‖²`
//!
//! Every check reports `slack = bound − observed` and passes when
//! `slack ≥ −1e-9`.

use super::check_step_size;
use super::trace::ConvergenceTrace;
use crate::error::{Error, Result};
use crate::retraction::Retractable;

const SLACK_TOL: f64 = -1e-9;

/// One inequality `observed ≤ bound`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    pub observed: f64,
    pub bound: f64,
    pub slack: f64,
    pub ok: bool,
}

impl BoundCheck {
    fn new(observed: f64, bound: f64) -> Self {
        let slack = bound - observed;
        Self {
            observed,
            bound,
            slack,
            ok: slack >= SLACK_TOL,
        }
    }
}

/// Outcome of the bound checks; each field is `None` when not evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BoundReport {
    pub max_grad: Option<BoundCheck>,
    pub min_grad: Option<BoundCheck>,
    pub dominated: Option<BoundCheck>,
    pub performance: Option<BoundCheck>,
}

impl BoundReport {
    pub fn max_grad_bound_ok(&self) -> bool {
        self.max_grad.is_some_and(|c| c.ok)
    }

    pub fn min_grad_bound_ok(&self) -> bool {
        self.min_grad.is_some_and(|c| c.ok)
    }

    pub fn dominated_ok(&self) -> bool {
        self.dominated.is_some_and(|c| c.ok)
    }

    pub fn performance_bound_ok(&self) -> bool {
        self.performance.is_some_and(|c| c.ok)
    }

    /// True when every evaluated check passed.
    pub fn all_ok(&self) -> bool {
        self.checks().iter().all(|(_, c)| c.ok)
    }

    /// Evaluated checks with their names.
    pub fn checks(&self) -> Vec<(&'static str, BoundCheck)> {
        [
            ("max_grad", self.max_grad),
            ("min_grad", self.min_grad),
            ("dominated", self.dominated),
            ("performance", self.performance),
        ]
        .into_iter()
        .filter_map(|(n, c)| c.map(|c| (n, c)))
        .collect()
    }

    /// Fields set in `other` replace those in `self`.
    pub fn merge(self, other: BoundReport) -> BoundReport {
        BoundReport {
            max_grad: other.max_grad.or(self.max_grad),
            min_grad: other.min_grad.or(self.min_grad),
            dominated: other.dominated.or(self.dominated),
            performance: other.performance.or(self.performance),
        }
    }
}

/// Checks the max- and min-gradient bounds on a trace with `T = trace.len()`.
pub fn check_theorem1_bounds(trace: &ConvergenceTrace, h: f64, eta: f64, loss_star: f64) -> Result<BoundReport> {
    check_step_size(eta, h)?;
    if !loss_star.is_finite() {
        return Err(Error::Config(format!("ℒ* must be finite, got {loss_star}")));
    }
    let g = trace.grad_norms_sq();
    let c = 2.0 / (eta * (2.0 - h * eta));
    let budget = c * (trace.records()[0].loss - loss_star);
    let max = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = g.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(BoundReport {
        max_grad: Some(BoundCheck::new(max, budget)),
        min_grad: Some(BoundCheck::new(min, budget / g.len() as f64)),
        ..BoundReport::default()
    })
}

/// Checks `ℒ − ℒ* ≤ τ‖∇ℒ‖²` on every record (the tightest one is reported)
/// and at the iterate with the smallest gradient.
pub fn check_gradient_dominated(trace: &ConvergenceTrace, tau: f64, loss_star: f64) -> Result<BoundReport> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::Config(format!("τ must be positive, got {tau}")));
    }
    let checks: Vec<BoundCheck> = trace
        .records()
        .iter()
        .map(|r| BoundCheck::new(r.loss - loss_star, tau * r.grad_norm_sq))
        .collect();
    let tightest = checks
        .iter()
        .copied()
        .min_by(|a, b| a.slack.total_cmp(&b.slack))
        .expect("non-empty trace");
    let alpha = trace
        .records()
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.grad_norm_sq.total_cmp(&b.1.grad_norm_sq))
        .map(|(i, _)| i)
        .expect("non-empty trace");
    Ok(BoundReport {
        dominated: Some(tightest),
        performance: Some(checks[alpha]),
        ..BoundReport::default()
    })
}

/// One way of reading the claim that the Frobenius norm is 1-gradient dominated.
#[derive(Debug, Clone, PartialEq)]
pub struct UnsquaredReading {
    pub name: &'static str,
    pub inequality: &'static str,
    pub check: BoundCheck,
}

/// Evaluation of `ℒ(𝒲̂) = ‖𝒲̂ − 𝒲‖_F` (unsquared, `ℒ* = 0`) on dense tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct UnsquaredReport {
    pub loss: f64,
    pub grad_norm: f64,
    pub readings: Vec<UnsquaredReading>,
}

/// Evaluates the unsquared Frobenius-distance loss and its gradient
/// `d/‖d‖` densely and checks each reading of the domination claim.
pub fn check_unsquared_domination<T: Retractable>(w_ref: &T, w_hat: &T) -> Result<UnsquaredReport> {
    let (r, h) = (w_ref.to_train().full(), w_hat.to_train().full());
    if r.shape() != h.shape() {
        return Err(Error::ShapeMismatch("reference and estimate differ in shape".into()));
    }
    let d: Vec<f64> = h.data().iter().zip(r.data()).map(|(a, b)| a - b).collect();
    let loss = crate::tensor::frobenius(&d);
    let grad_norm = if loss > 0.0 {
        crate::tensor::frobenius(&d.iter().map(|x| x / loss).collect::<Vec<_>>())
    } else {
        0.0
    };
    let readings = vec![
        UnsquaredReading {
            name: "printed_chain",
            inequality: "ℒ − ℒ* ≤ sqrt(Σ d²)",
            check: BoundCheck::new(loss, loss),
        },
        UnsquaredReading {
            name: "squared",
            inequality: "ℒ − ℒ* ≤ 1·‖∇ℒ‖²",
            check: BoundCheck::new(loss, grad_norm * grad_norm),
        },
        UnsquaredReading {
            name: "unsquared",
            inequality: "ℒ − ℒ* ≤ ‖∇ℒ‖_F",
            check: BoundCheck::new(loss, grad_norm),
        },
        UnsquaredReading {
            name: "scaled",
            inequality: "ℒ − ℒ* ≤ ‖∇ℒ‖_F·ℒ",
            check: BoundCheck::new(loss, grad_norm * loss),
        },
    ];
    Ok(UnsquaredReport {
        loss,
        grad_norm,
        readings,
    })
}
