//! Preimages by projected gradient ascent on the unit sphere.
//!
//! The preimage problem is a maximization, so the update is
//! `v ← Π_S(v + η ∇f(v))` with `Π_S(x) = x / ‖x‖`. The first trial step of
//! every iteration is the Lipschitz step `η = (2‖Σ_k β_k v_k‖)⁻¹` for the
//! Gaussian kernel; it is halved (at most 30 times) whenever the trial point
//! would lower the objective, so the objective trace never decreases.
//! Acceptance compares `f(v_new) - f(v)` evaluated from the displacement
//! rather than two rounded values of `f`, so steps keep being accepted until
//! the gradient itself, not the objective, reaches machine resolution. The
//! recorded trace is the running sum of these increments.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::KernelFamily;
use crate::kpca::{KpcaModel, PreimageObjective};
use crate::linalg;

const MAX_HALVINGS: usize = 30;

pub fn project_to_sphere(x: &[f64]) -> Result<Vec<f64>> {
    let r = linalg::norm(x);
    if r == 0.0 || !r.is_finite() {
        return Err(Error::ProjectionAtOrigin);
    }
    Ok(x.iter().map(|v| v / r).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    /// Lipschitz step for the Gaussian kernel; exponential kernels fall back
    /// to a unit trial step.
    PaperLipschitz,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PgdSettings {
    pub max_iterations: usize,
    /// Bound on the Riemannian gradient norm `‖∇f - (vᵀ∇f) v‖`.
    pub stationarity_tol: f64,
    pub step_rule: StepRule,
    pub record_trace: bool,
}

impl Default for PgdSettings {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            stationarity_tol: 1e-8,
            step_rule: StepRule::PaperLipschitz,
            record_trace: false,
        }
    }
}

impl PgdSettings {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument("max_iterations must be at least 1".into()));
        }
        if !(self.stationarity_tol > 0.0) {
            return Err(Error::InvalidArgument("stationarity_tol must be positive".into()));
        }
        if let StepRule::Fixed(eta) = self.step_rule {
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(Error::InvalidArgument(format!("fixed step must be positive, got {eta}")));
            }
        }
        Ok(())
    }
}

/// A step size together with whether the Lipschitz formula had to be
/// replaced by the unit fallback.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSize {
    pub eta: f64,
    pub fallback: bool,
}

/// `η = (2‖Σ_k Σ_j 𝐯_k v_kj R(w - t_j)‖)⁻¹`, where `𝐯_k` is the `k`-th
/// eigenvector (length `n`). The inner sum is `Σ_k β_k 𝐯_k`, i.e. the combined
/// coefficient vector of the objective.
pub fn paper_step_size(obj: &PreimageObjective<'_>) -> StepSize {
    let norm = linalg::norm(obj.coefficients());
    if norm > 0.0 && norm.is_finite() {
        StepSize { eta: 1.0 / (2.0 * norm), fallback: false }
    } else {
        StepSize { eta: 1.0, fallback: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreimageResult {
    pub preimage: Vec<f64>,
    pub iterations: usize,
    pub final_objective: f64,
    pub converged: bool,
    /// Riemannian gradient norm at the returned point.
    pub stationarity: f64,
    pub step: StepSize,
    pub trace: Option<Vec<f64>>,
}

/// `v_new - v` with its radial part fixed so that both ends sit on the unit
/// sphere to second order. Rounding leaves `‖v_new‖ - 1` near machine epsilon,
/// and with a large normal gradient that error would swamp the increment of
/// a short tangential step.
fn sphere_step(v: &[f64], v_new: &[f64]) -> Vec<f64> {
    let mut step: Vec<f64> = v_new.iter().zip(v).map(|(a, b)| a - b).collect();
    // unit vectors satisfy v·step = -‖step‖²/2
    let excess = linalg::dot(v, &step) + 0.5 * linalg::dot(&step, &step);
    for (s, vi) in step.iter_mut().zip(v) {
        *s -= excess * vi;
    }
    step
}

fn riemannian_gradient(v: &[f64], g: &[f64]) -> Vec<f64> {
    let radial = linalg::dot(v, g);
    g.iter().zip(v).map(|(gi, vi)| gi - radial * vi).collect()
}

pub fn solve_preimage(obj: &PreimageObjective<'_>, start: &[f64], settings: &PgdSettings) -> Result<PreimageResult> {
    settings.validate()?;
    let start_norm = linalg::norm(start);
    if (start_norm - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidArgument(format!("start must lie on the sphere, norm is {start_norm}")));
    }
    if start.len() != obj.model().dim() {
        return Err(Error::DimensionMismatch(format!(
            "start has dimension {} but the model has {}",
            start.len(),
            obj.model().dim()
        )));
    }

    let step = match settings.step_rule {
        StepRule::Fixed(eta) => StepSize { eta, fallback: false },
        StepRule::PaperLipschitz => match obj.model().spec().family() {
            KernelFamily::Gaussian => paper_step_size(obj),
            KernelFamily::Exponential => StepSize { eta: 1.0, fallback: true },
        },
    };

    let mut v = project_to_sphere(start)?;
    let mut f = obj.value(&v);
    if !f.is_finite() {
        return Err(Error::NonFinite { iteration: 0 });
    }
    let mut trace = settings.record_trace.then(|| vec![f]);
    let mut converged = false;
    let mut iterations = 0;
    let mut stationarity = f64::INFINITY;

    for it in 0..settings.max_iterations {
        let g = obj.gradient(&v);
        if g.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { iteration: it });
        }
        stationarity = linalg::norm(&riemannian_gradient(&v, &g));
        if stationarity <= settings.stationarity_tol {
            converged = true;
            break;
        }

        let mut eta = step.eta;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = v.iter().zip(&g).map(|(a, b)| a + eta * b).collect();
            let candidate = match project_to_sphere(&trial) {
                Ok(c) => c,
                Err(_) => {
                    eta *= 0.5;
                    continue;
                }
            };
            let gain = obj.increment_along(&v, &sphere_step(&v, &candidate));
            if !gain.is_finite() {
                return Err(Error::NonFinite { iteration: it + 1 });
            }
            if gain >= 0.0 {
                accepted = Some((candidate, gain));
                break;
            }
            eta *= 0.5;
        }
        iterations = it + 1;
        match accepted {
            Some((candidate, gain)) => {
                let moved = candidate != v;
                v = candidate;
                f += gain;
                if let Some(t) = trace.as_mut() {
                    t.push(f);
                }
                if !moved {
                    // the step fell below the resolution of v
                    break;
                }
            }
            None => break,
        }
    }

    // the running sum drifts from a fresh evaluation only by rounding
    let final_objective = obj.value(&v);
    if !final_objective.is_finite() {
        return Err(Error::NonFinite { iteration: iterations });
    }
    if !converged {
        let g = obj.gradient(&v);
        stationarity = linalg::norm(&riemannian_gradient(&v, &g));
        converged = stationarity <= settings.stationarity_tol;
    }

    Ok(PreimageResult {
        preimage: v,
        iterations,
        final_objective,
        converged,
        stationarity,
        step,
        trace,
    })
}

/// Results of a batch solve, index-aligned with the queries. Failed queries
/// leave a `None` slot and an entry in `errors`.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchPreimages {
    pub results: Vec<Option<PreimageResult>>,
    pub errors: Vec<(usize, Error)>,
}

impl BatchPreimages {
    pub fn len(&self) -> usize {
        self.results.len()
    }

    pub fn is_empty(&self) -> bool {
        self.results.is_empty()
    }
}

/// Solves every query independently, starting from the query itself.
/// Queries run in parallel; the output does not depend on the schedule.
pub fn batch_preimages(model: &KpcaModel, queries: &[Vec<f64>], settings: &PgdSettings) -> BatchPreimages {
    let outcomes: Vec<Result<PreimageResult>> = queries
        .par_iter()
        .map(|w| {
            let obj = model.objective(w)?;
            solve_preimage(&obj, w, settings)
        })
        .collect();
    let mut results = Vec::with_capacity(outcomes.len());
    let mut errors = Vec::new();
    for (i, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(r) => results.push(Some(r)),
            Err(e) => {
                results.push(None);
                errors.push((i, e));
            }
        }
    }
    BatchPreimages { results, errors }
}
