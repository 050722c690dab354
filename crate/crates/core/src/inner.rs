//! Inner regressions `γ̂(β)` of the censored residuals at a fixed `β`.
//!
//! All objectives are expectations under `H*`, so each evaluation is a pass
//! over the nonzero `π_ij` atoms; weighted normal equations are assembled
//! row by row from those atoms without forming any `n × n` object.

use crate::data::CensoredSample;
use crate::error::{Error, Result};
use crate::km::RedistributionWeights;
use crate::linalg::{self, NormalEquations};
use crate::loss::LossFunction;
use crate::scale::{self, ScaleConfig, ScaleEstimate, TauEstimate};

/// M-type inner problem at fixed scale.
#[derive(Debug, Clone, Copy)]
pub struct InnerProblem<'a> {
    pub weights: &'a RedistributionWeights,
    pub sample: &'a CensoredSample,
    pub scale: f64,
    pub loss: LossFunction,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct IrwlsConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub ridge: f64,
}

impl Default for IrwlsConfig {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 500, ridge: 1e-12 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IrwlsOutcome {
    pub gamma: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective at the start and after every accepted step.
    pub trace: Vec<f64>,
}

impl<'a> InnerProblem<'a> {
    pub fn new(weights: &'a RedistributionWeights, sample: &'a CensoredSample, scale: f64, loss: LossFunction) -> Self {
        Self { weights, sample, scale, loss }
    }

    fn check(&self, gamma: &[f64]) -> Result<()> {
        if !(self.scale > 0.0) {
            return Err(Error::InvalidInput(format!("inner problem needs a positive scale, got {}", self.scale)));
        }
        if gamma.len() != self.sample.p() {
            return Err(Error::DimensionMismatch { expected: self.sample.p(), got: gamma.len() });
        }
        Ok(())
    }
}

/// `C(γ) = Σ_ij ρ((r_j − γ'x_i)/s) π_ij`.
pub fn c_objective(prob: &InnerProblem<'_>, gamma: &[f64]) -> Result<f64> {
    prob.check(gamma)?;
    let g = prob.sample.fitted(gamma);
    Ok(objective_at(prob, &g, |t| prob.loss.rho(t)))
}

fn objective_at(prob: &InnerProblem<'_>, g: &[f64], rho: impl Fn(f64) -> f64) -> f64 {
    let a = prob.weights.atoms();
    let inv = 1.0 / prob.scale;
    (0..a.len()).map(|k| a.mass[k] * rho((a.value[k] - g[a.row[k] as usize]) * inv)).sum()
}

/// One weighted least squares solve with atom weights `π_ij·w(t_ij)`.
fn wls_step(prob: &InnerProblem<'_>, g: &[f64], weight: &impl Fn(f64) -> f64, ridge: f64) -> Option<Vec<f64>> {
    let a = prob.weights.atoms();
    let n = prob.sample.n();
    let inv = 1.0 / prob.scale;
    let mut wsum = vec![0.0; n];
    let mut wval = vec![0.0; n];
    for k in 0..a.len() {
        let i = a.row[k] as usize;
        let w = a.mass[k] * weight((a.value[k] - g[i]) * inv);
        wsum[i] += w;
        wval[i] += w * a.value[k];
    }
    let mut ne = NormalEquations::new(prob.sample.p());
    for (i, x) in prob.sample.rows().enumerate() {
        if wsum[i] > 0.0 {
            ne.add(x, wsum[i], wval[i] / wsum[i]);
        }
    }
    ne.solve(ridge)
}

/// Iteratively reweighted least squares from an arbitrary start, using
/// weights `w(t)` and monitoring the objective `rho`.
pub(crate) fn irwls_with(
    prob: &InnerProblem<'_>,
    start: &[f64],
    cfg: &IrwlsConfig,
    rho: impl Fn(f64) -> f64,
    weight: impl Fn(f64) -> f64,
) -> Result<IrwlsOutcome> {
    prob.check(start)?;
    let mut gamma = start.to_vec();
    let mut g = prob.sample.fitted(&gamma);
    let mut obj = objective_at(prob, &g, &rho);
    let mut trace = vec![obj];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        iterations += 1;
        let Some(next) = wls_step(prob, &g, &weight, cfg.ridge) else {
            break;
        };
        let g_next = prob.sample.fitted(&next);
        let obj_next = objective_at(prob, &g_next, &rho);
        if !obj_next.is_finite() || obj_next > obj + 1e-13 * obj.abs() {
            break;
        }
        let step = linalg::norm(&linalg::sub(&next, &gamma));
        gamma = next;
        g = g_next;
        obj = obj_next;
        trace.push(obj);
        if step <= cfg.tol * (1.0 + linalg::norm(&gamma)) {
            converged = true;
            break;
        }
    }
    Ok(IrwlsOutcome { gamma, objective: obj, iterations, converged, trace })
}

/// Local minimizer of `C(γ)` reached by IRWLS from `γ = 0`; never worse than
/// `γ = 0`.
pub fn irwls_minimize(prob: &InnerProblem<'_>, cfg: &IrwlsConfig) -> Result<IrwlsOutcome> {
    irwls_from(prob, &vec![0.0; prob.sample.p()], cfg)
}

pub fn irwls_from(prob: &InnerProblem<'_>, start: &[f64], cfg: &IrwlsConfig) -> Result<IrwlsOutcome> {
    if !prob.loss.is_differentiable() || prob.loss == LossFunction::Absolute {
        return Err(Error::NotDifferentiable(prob.loss.name()));
    }
    let loss = prob.loss;
    irwls_with(prob, start, cfg, |t| loss.rho(t), |t| loss.weight(t))
}

/// Inner score `Σ_ij ψ((r_j − γ'x_i)/s) x_i π_ij`.
pub fn inner_score(prob: &InnerProblem<'_>, gamma: &[f64]) -> Result<Vec<f64>> {
    prob.check(gamma)?;
    let g = prob.sample.fitted(gamma);
    let a = prob.weights.atoms();
    let inv = 1.0 / prob.scale;
    let mut out = vec![0.0; prob.sample.p()];
    for k in 0..a.len() {
        let i = a.row[k] as usize;
        let psi = prob.loss.psi((a.value[k] - g[i]) * inv)?;
        for (o, x) in out.iter_mut().zip(prob.sample.row(i)) {
            *o += a.mass[k] * psi * x;
        }
    }
    Ok(out)
}

/// Selected inner fit.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerFit {
    pub gamma: Vec<f64>,
    /// Index of the winning candidate.
    pub index: usize,
    pub scale: ScaleEstimate,
    /// Criterion value (`S_n` or `τ_n`).
    pub criterion: f64,
    pub refined: bool,
}

/// Scratch state for evaluating many shifts against one set of weights.
pub(crate) struct ShiftEvaluator<'a> {
    pub weights: &'a RedistributionWeights,
    buf: Vec<f64>,
}

impl<'a> ShiftEvaluator<'a> {
    pub fn new(weights: &'a RedistributionWeights) -> Self {
        Self { weights, buf: Vec::with_capacity(weights.atoms().len()) }
    }

    /// Loads the row shift `g_i = γ'x_i` and returns the shifted atoms.
    pub fn load(&mut self, g: &[f64]) -> &[f64] {
        scale::shift_atoms(self.weights.atoms(), g, &mut self.buf);
        &self.buf
    }

    pub fn mass(&self) -> &'a [f64] {
        &self.weights.atoms().mass
    }

    pub fn m_scale(&mut self, g: &[f64], cfg: &ScaleConfig) -> Result<ScaleEstimate> {
        let mass = self.mass();
        let t = self.load(g);
        scale::m_scale_values(t, mass, cfg, 0.0)
    }

    pub fn tau(&mut self, g: &[f64], cfg: &ScaleConfig, rho2: &LossFunction) -> Result<TauEstimate> {
        let mass = self.mass();
        let t = self.load(g);
        scale::tau_scale_values(t, mass, cfg, rho2, 0.0)
    }
}

/// Maximum number of I-steps in the optional post-selection refinement.
pub const REFINE_STEPS: usize = 20;

/// S-estimator of regression of the residuals: the candidate shift with the
/// smallest M-scale (lowest index on ties), optionally followed by
/// IRWLS steps at the winning scale that are kept only while the scale does
/// not increase.
pub fn s_inner(
    weights: &RedistributionWeights,
    sample: &CensoredSample,
    candidates: &[Vec<f64>],
    cfg: &ScaleConfig,
    refine: bool,
) -> Result<InnerFit> {
    if candidates.is_empty() {
        return Err(Error::InvalidInput("no inner candidates".into()));
    }
    let mut ev = ShiftEvaluator::new(weights);
    let mut best: Option<(usize, ScaleEstimate)> = None;
    for (k, gamma) in candidates.iter().enumerate() {
        if gamma.len() != sample.p() {
            return Err(Error::DimensionMismatch { expected: sample.p(), got: gamma.len() });
        }
        let est = ev.m_scale(&sample.fitted(gamma), cfg)?;
        if best.as_ref().map_or(true, |(_, b)| est.scale < b.scale) {
            best = Some((k, est));
        }
    }
    let (index, est) = best.expect("nonempty");
    let mut fit = InnerFit { gamma: candidates[index].clone(), index, scale: est, criterion: est.scale, refined: false };
    if refine {
        refine_s(&mut fit, &mut ev, sample, cfg)?;
    }
    Ok(fit)
}

pub(crate) fn refine_s(fit: &mut InnerFit, ev: &mut ShiftEvaluator<'_>, sample: &CensoredSample, cfg: &ScaleConfig) -> Result<()> {
    if fit.scale.exact_fit || !cfg.rho1.is_differentiable() {
        return Ok(());
    }
    let rho = cfg.rho1;
    for _ in 0..REFINE_STEPS {
        let prob = InnerProblem::new(ev.weights, sample, fit.scale.scale, rho);
        let g = sample.fitted(&fit.gamma);
        let Some(next) = wls_step(&prob, &g, &|t| rho.weight(t), 1e-12) else {
            break;
        };
        let est = ev.m_scale(&sample.fitted(&next), cfg)?;
        if est.scale > fit.scale.scale {
            break;
        }
        let step = linalg::norm(&linalg::sub(&next, &fit.gamma));
        fit.gamma = next;
        fit.scale = est;
        fit.criterion = est.scale;
        fit.refined = true;
        if step <= 1e-10 * (1.0 + linalg::norm(&fit.gamma)) || est.exact_fit {
            break;
        }
    }
    Ok(())
}

/// τ-estimator of regression of the residuals over candidate shifts.
pub fn tau_inner(
    weights: &RedistributionWeights,
    sample: &CensoredSample,
    candidates: &[Vec<f64>],
    cfg: &ScaleConfig,
    rho2: &LossFunction,
) -> Result<InnerFit> {
    if candidates.is_empty() {
        return Err(Error::InvalidInput("no inner candidates".into()));
    }
    let mut ev = ShiftEvaluator::new(weights);
    let mut best: Option<(usize, TauEstimate)> = None;
    for (k, gamma) in candidates.iter().enumerate() {
        if gamma.len() != sample.p() {
            return Err(Error::DimensionMismatch { expected: sample.p(), got: gamma.len() });
        }
        let est = ev.tau(&sample.fitted(gamma), cfg, rho2)?;
        if best.as_ref().map_or(true, |(_, b)| est.tau < b.tau) {
            best = Some((k, est));
        }
    }
    let (index, est) = best.expect("nonempty");
    Ok(InnerFit { gamma: candidates[index].clone(), index, scale: est.scale, criterion: est.tau, refined: false })
}
