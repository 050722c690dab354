//! S, LMS, τ, MM and M estimators built on the candidate search.

use crate::data::{CensoredSample, FitResult};
use crate::error::{Error, Result};
use crate::inner::{c_objective, irwls_from, s_inner, tau_inner, InnerFit, InnerProblem};
use crate::linalg;
use crate::loss::{dominated_by, LossFunction};
use crate::scale::ScaleConfig;

use super::search::{criterion_search, fitted_inner_search, inner_m_fit, weights_at, Criterion, SearchOutcome};
use super::{generate_candidates, quad_form, scatter_matrix, CandidateSet, SearchConfig};

/// Maximum number of `β ← β + γ̂(β)` polish steps.
const POLISH_STEPS: usize = 10;

fn shifts(cands: &CandidateSet, beta: &[f64]) -> Vec<Vec<f64>> {
    cands.betas.iter().map(|b| linalg::sub(b, beta)).collect()
}

/// Applies `β ← β + γ̂(β)` while `γ̂'Aγ̂` decreases.
fn polish(
    sample: &CensoredSample,
    cands: &CandidateSet,
    a_n: &[f64],
    out: &mut SearchOutcome,
    inner: impl Fn(&CensoredSample, &[f64], &[Vec<f64>]) -> Result<InnerFit>,
) -> Result<()> {
    for _ in 0..POLISH_STEPS {
        if out.scale.exact_fit {
            break;
        }
        let beta = linalg::add(&out.beta, &out.gamma);
        let fit = inner(sample, &beta, &shifts(cands, &beta))?;
        out.evaluations += cands.len();
        let obj = quad_form(a_n, &fit.gamma);
        if obj >= out.objective {
            break;
        }
        out.beta = beta;
        out.gamma = fit.gamma;
        out.gamma_index = None;
        out.objective = obj;
        out.criterion = fit.criterion;
        out.scale = fit.scale;
    }
    Ok(())
}

fn scale_search(sample: &CensoredSample, cands: &CandidateSet, cfg: &SearchConfig, scale: &ScaleConfig) -> Result<FitResult> {
    let a_n = scatter_matrix(sample, cfg.a_n);
    let mut out = criterion_search(sample, cands, Criterion::Scale(scale), &a_n, cfg.prune)?;
    if cfg.refine {
        polish(sample, cands, &a_n, &mut out, |s, beta, g| s_inner(&weights_at(s, beta)?, s, g, scale, true))?;
    }
    Ok(FitResult {
        beta: out.beta,
        scale: if out.scale.exact_fit { 0.0 } else { out.scale.scale },
        objective: out.objective,
        n_candidates_evaluated: out.evaluations,
        converged: !out.scale.saturated,
        exact_fit: out.scale.exact_fit,
    })
}

/// S-estimator with loss `rho1` and scale right-hand side `b`.
pub fn s_estimate(sample: &CensoredSample, cfg: &SearchConfig, rho1: LossFunction, b: f64) -> Result<FitResult> {
    let cands = generate_candidates(sample, cfg)?;
    s_estimate_with(sample, &cands, cfg, rho1, b)
}

pub fn s_estimate_with(
    sample: &CensoredSample,
    cands: &CandidateSet,
    cfg: &SearchConfig,
    rho1: LossFunction,
    b: f64,
) -> Result<FitResult> {
    scale_search(sample, cands, cfg, &ScaleConfig::new(rho1, b)?)
}

/// Least median of squares: jump loss with `b = 1/2`.
pub fn lms_estimate(sample: &CensoredSample, cfg: &SearchConfig) -> Result<FitResult> {
    let cands = generate_candidates(sample, cfg)?;
    lms_estimate_with(sample, &cands, cfg)
}

pub fn lms_estimate_with(sample: &CensoredSample, cands: &CandidateSet, cfg: &SearchConfig) -> Result<FitResult> {
    scale_search(sample, cands, cfg, &ScaleConfig::lms())
}

/// τ-estimator; `rho2` must be dominated by `rho1` after normalizing by the
/// suprema. `scale` in the result is the τ-scale.
pub fn tau_estimate(
    sample: &CensoredSample,
    cfg: &SearchConfig,
    rho1: LossFunction,
    rho2: LossFunction,
    b: f64,
) -> Result<FitResult> {
    let cands = generate_candidates(sample, cfg)?;
    tau_estimate_with(sample, &cands, cfg, rho1, rho2, b)
}

pub fn tau_estimate_with(
    sample: &CensoredSample,
    cands: &CandidateSet,
    cfg: &SearchConfig,
    rho1: LossFunction,
    rho2: LossFunction,
    b: f64,
) -> Result<FitResult> {
    if !dominated_by(&rho2, &rho1) {
        return Err(Error::InvalidInput("tau requires rho2 dominated by rho1".into()));
    }
    let scale = ScaleConfig::new(rho1, b)?;
    let a_n = scatter_matrix(sample, cfg.a_n);
    let mut out = criterion_search(sample, cands, Criterion::Tau(&scale, &rho2), &a_n, cfg.prune)?;
    if cfg.refine {
        polish(sample, cands, &a_n, &mut out, |s, beta, g| tau_inner(&weights_at(s, beta)?, s, g, &scale, &rho2))?;
    }
    Ok(FitResult {
        beta: out.beta,
        scale: if out.scale.exact_fit { 0.0 } else { out.criterion },
        objective: out.objective,
        n_candidates_evaluated: out.evaluations,
        converged: !out.scale.saturated,
        exact_fit: out.scale.exact_fit,
    })
}

/// MM-estimator: an S fit followed by an IRWLS step with `rho2` at the
/// S-scale.
pub fn mm_estimate(
    sample: &CensoredSample,
    cfg: &SearchConfig,
    rho1: LossFunction,
    rho2: LossFunction,
    b: f64,
) -> Result<FitResult> {
    if !dominated_by(&rho2, &rho1) {
        return Err(Error::InvalidInput("MM requires rho2 dominated by rho1".into()));
    }
    let s_fit = s_estimate(sample, cfg, rho1, b)?;
    mm_estimate_from(sample, &s_fit, rho2, cfg)
}

/// MM step launched from an existing S fit.
pub fn mm_estimate_from(sample: &CensoredSample, s_fit: &FitResult, rho2: LossFunction, cfg: &SearchConfig) -> Result<FitResult> {
    if s_fit.exact_fit || s_fit.scale <= 0.0 {
        return Ok(s_fit.clone());
    }
    let w = weights_at(sample, &s_fit.beta)?;
    let prob = InnerProblem::new(&w, sample, s_fit.scale, rho2);
    let zero = vec![0.0; sample.p()];
    let r0 = c_objective(&prob, &zero)?;
    let fit = irwls_from(&prob, &zero, &cfg.irwls)?;
    let (gamma, objective) = if fit.objective <= r0 { (fit.gamma, fit.objective) } else { (zero, r0) };
    Ok(FitResult {
        beta: linalg::add(&s_fit.beta, &gamma),
        scale: s_fit.scale,
        objective,
        n_candidates_evaluated: s_fit.n_candidates_evaluated,
        converged: fit.converged && s_fit.converged,
        exact_fit: false,
    })
}

/// M-estimator at a fixed scale: the candidate whose inner fit is smallest in
/// the `A_n`-norm. Inner fits start from the best candidate shift.
pub fn m_estimate(sample: &CensoredSample, cfg: &SearchConfig, rho: LossFunction, s_n: f64) -> Result<FitResult> {
    let cands = generate_candidates(sample, cfg)?;
    m_estimate_with(sample, &cands, cfg, rho, s_n)
}

pub fn m_estimate_with(
    sample: &CensoredSample,
    cands: &CandidateSet,
    cfg: &SearchConfig,
    rho: LossFunction,
    s_n: f64,
) -> Result<FitResult> {
    if !(s_n > 0.0 && s_n.is_finite()) {
        return Err(Error::InvalidInput(format!("M-estimation needs a positive scale, got {s_n}")));
    }
    let a_n = scatter_matrix(sample, cfg.a_n);
    let (j, mut gamma, mut objective, mut value, mut converged) = fitted_inner_search(cands, &a_n, |beta| {
        let fit = inner_m_fit(sample, beta, rho, s_n, &cfg.irwls, &shifts(cands, beta))?;
        Ok((fit.gamma, fit.objective, fit.converged))
    })?;
    let mut beta = cands.betas[j].clone();
    let mut evaluations = cands.len();
    if cfg.refine {
        for _ in 0..POLISH_STEPS {
            let next = linalg::add(&beta, &gamma);
            let fit = inner_m_fit(sample, &next, rho, s_n, &cfg.irwls, &shifts(cands, &next))?;
            evaluations += 1;
            let obj = quad_form(&a_n, &fit.gamma);
            if obj >= objective {
                break;
            }
            beta = next;
            gamma = fit.gamma;
            objective = obj;
            value = fit.objective;
            converged = fit.converged;
        }
    }
    let _ = value;
    Ok(FitResult { beta, scale: s_n, objective, n_candidates_evaluated: evaluations, converged, exact_fit: false })
}
