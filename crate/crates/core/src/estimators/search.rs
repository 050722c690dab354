//! The candidate search over `β_j` with inner shifts `γ ∈ {β_k − β_j}`.
//!
//! With pruning, `κ` holds the best outer criterion seen so far. For the
//! next `β_j` the shifts split into a small set (`γ'Aγ ≤ κ`) and a large
//! set. `β_j` can only improve on `κ` if the inner minimizer lies in the
//! small set, so the large set is scanned against `ω = min_small S` and the
//! scan stops at the first shift that beats `ω`. The pruned and unpruned
//! searches select the same `β_j`.

use crate::data::{residuals, CensoredSample};
use crate::error::Result;
use crate::inner::{c_objective, irwls_from, InnerProblem, IrwlsConfig, IrwlsOutcome, ShiftEvaluator};
use crate::km::{kaplan_meier, RedistributionWeights};
use crate::loss::LossFunction;
use crate::scale::{compare_scale, Comparison, ScaleConfig, ScaleEstimate};

use super::{quad_form, CandidateSet};

/// Inner criterion minimized over candidate shifts.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Criterion<'a> {
    Scale(&'a ScaleConfig),
    Tau(&'a ScaleConfig, &'a LossFunction),
}

impl Criterion<'_> {
    fn evaluate(&self, ev: &mut ShiftEvaluator<'_>, g: &[f64]) -> Result<(f64, ScaleEstimate)> {
        match *self {
            Criterion::Scale(cfg) => {
                let s = ev.m_scale(g, cfg)?;
                Ok((s.scale, s))
            }
            Criterion::Tau(cfg, rho2) => {
                let t = ev.tau(g, cfg, rho2)?;
                Ok((t.tau, t.scale))
            }
        }
    }

    fn compare(&self, ev: &mut ShiftEvaluator<'_>, g: &[f64], threshold: f64) -> Comparison {
        match *self {
            Criterion::Scale(cfg) => {
                let mass = ev.mass();
                let t = ev.load(g);
                compare_scale(t, mass, cfg, 0.0, threshold)
            }
            Criterion::Tau(..) => Comparison::Undecided,
        }
    }
}

/// Winner of a candidate search.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    /// Index of the selected `β_j`.
    pub index: usize,
    pub beta: Vec<f64>,
    /// `γ̂(β̂)`.
    pub gamma: Vec<f64>,
    /// Index `k` of the winning shift `β_k − β̂`, when it is a candidate shift.
    pub gamma_index: Option<usize>,
    /// `γ̂'A_nγ̂`.
    pub objective: f64,
    /// Inner criterion at the winner (`S_n` or `τ_n`).
    pub criterion: f64,
    pub scale: ScaleEstimate,
    /// Inner criterion evaluations performed.
    pub evaluations: usize,
}

pub(crate) fn weights_at(sample: &CensoredSample, beta: &[f64]) -> Result<RedistributionWeights> {
    kaplan_meier(&residuals(sample, beta)?)
}

/// Row shifts `γ'x_i = X(β_k − β_j)` without forming `γ`.
#[inline]
fn row_shift(fk: &[f64], fj: &[f64], out: &mut [f64]) {
    for ((o, a), b) in out.iter_mut().zip(fk).zip(fj) {
        *o = a - b;
    }
}

/// Outer order: smaller `γ̂'Aγ̂`, then smaller inner criterion; earlier `j`
/// wins full ties. The second key matters because several candidates can
/// have `γ̂ = 0` exactly.
fn improves(obj: f64, crit: f64, kappa: f64, best: &Option<(usize, usize, f64, ScaleEstimate)>) -> bool {
    match best {
        None => true,
        Some((_, _, c, _)) => obj < kappa || (obj == kappa && crit < *c),
    }
}

pub(crate) fn criterion_search(
    sample: &CensoredSample,
    cands: &CandidateSet,
    crit: Criterion<'_>,
    a_n: &[f64],
    prune: bool,
) -> Result<SearchOutcome> {
    let n_cand = cands.len();
    let fitted: Vec<Vec<f64>> = cands.betas.iter().map(|b| sample.fitted(b)).collect();
    let mut g = vec![0.0; sample.n()];
    let mut evaluations = 0;
    let mut kappa = f64::INFINITY;
    let mut best: Option<(usize, usize, f64, ScaleEstimate)> = None;
    let mut dist = vec![0.0; n_cand];
    let mut diff = vec![0.0; sample.p()];

    for j in 0..n_cand {
        for (k, d) in dist.iter_mut().enumerate() {
            for ((o, a), b) in diff.iter_mut().zip(&cands.betas[k]).zip(&cands.betas[j]) {
                *o = a - b;
            }
            *d = quad_form(a_n, &diff);
        }
        if prune && !dist.iter().any(|d| *d <= kappa) {
            continue;
        }
        let w = weights_at(sample, &cands.betas[j])?;
        let mut ev = ShiftEvaluator::new(&w);

        if prune {
            let mut omega: Option<(usize, f64, ScaleEstimate)> = None;
            for k in (0..n_cand).filter(|&k| dist[k] <= kappa) {
                row_shift(&fitted[k], &fitted[j], &mut g);
                let (v, s) = crit.evaluate(&mut ev, &g)?;
                evaluations += 1;
                if omega.as_ref().map_or(true, |(_, o, _)| v < *o) {
                    omega = Some((k, v, s));
                }
            }
            let (idx, om, om_scale) = omega.expect("small set is nonempty");
            let mut beaten = false;
            for k in (0..n_cand).filter(|&k| dist[k] > kappa) {
                row_shift(&fitted[k], &fitted[j], &mut g);
                evaluations += 1;
                beaten = match crit.compare(&mut ev, &g, om) {
                    Comparison::Below => true,
                    Comparison::Above => false,
                    Comparison::Undecided => {
                        let (v, _) = crit.evaluate(&mut ev, &g)?;
                        v < om || (v == om && k < idx)
                    }
                };
                if beaten {
                    break;
                }
            }
            if !beaten && improves(dist[idx], om, kappa, &best) {
                kappa = dist[idx];
                best = Some((j, idx, om, om_scale));
            }
        } else {
            let mut arg: Option<(usize, f64, ScaleEstimate)> = None;
            for k in 0..n_cand {
                row_shift(&fitted[k], &fitted[j], &mut g);
                let (v, s) = crit.evaluate(&mut ev, &g)?;
                evaluations += 1;
                if arg.as_ref().map_or(true, |(_, o, _)| v < *o) {
                    arg = Some((k, v, s));
                }
            }
            let (idx, v, s) = arg.expect("nonempty candidate set");
            if improves(dist[idx], v, kappa, &best) {
                kappa = dist[idx];
                best = Some((j, idx, v, s));
            }
        }
    }

    let (j, k, criterion, scale) = best.expect("first candidate always evaluated");
    Ok(SearchOutcome {
        index: j,
        beta: cands.betas[j].clone(),
        gamma: cands.betas[k].iter().zip(&cands.betas[j]).map(|(a, b)| a - b).collect(),
        gamma_index: Some(k),
        objective: kappa,
        criterion,
        scale,
        evaluations,
    })
}

/// `γ̂(β)` for an M-type inner problem at fixed scale: IRWLS started from
/// whichever of `0` and `starts` has the smallest `C(γ)` (first on ties).
/// With a redescending loss, IRWLS from 0 alone stalls at `γ = 0` whenever
/// `β` is so far off that every residual is rejected.
pub fn inner_m_fit(
    sample: &CensoredSample,
    beta: &[f64],
    loss: LossFunction,
    scale: f64,
    cfg: &IrwlsConfig,
    starts: &[Vec<f64>],
) -> Result<IrwlsOutcome> {
    let w = weights_at(sample, beta)?;
    let prob = InnerProblem::new(&w, sample, scale, loss);
    let zero = vec![0.0; sample.p()];
    let mut best = (c_objective(&prob, &zero)?, &zero);
    for g in starts {
        let c = c_objective(&prob, g)?;
        if c < best.0 {
            best = (c, g);
        }
    }
    irwls_from(&prob, best.1, cfg)
}

/// Outer search where `γ̂(β_j)` comes from a caller-supplied inner fit.
pub(crate) fn fitted_inner_search(
    cands: &CandidateSet,
    a_n: &[f64],
    mut inner: impl FnMut(&[f64]) -> Result<(Vec<f64>, f64, bool)>,
) -> Result<(usize, Vec<f64>, f64, f64, bool)> {
    let mut best: Option<(usize, Vec<f64>, f64, f64, bool)> = None;
    for (j, beta) in cands.betas.iter().enumerate() {
        let (gamma, value, converged) = inner(beta)?;
        let obj = quad_form(a_n, &gamma);
        if best.as_ref().map_or(true, |b| obj < b.2 || (obj == b.2 && value < b.3)) {
            best = Some((j, gamma, obj, value, converged));
        }
    }
    Ok(best.expect("nonempty candidate set"))
}
