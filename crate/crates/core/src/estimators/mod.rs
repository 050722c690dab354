//! Outer estimation: candidate generation, the κ-pruned candidate search and
//! the public estimators.
//!
//! The robust estimators (S, LMS, τ, M) pick, among candidate coefficient
//! vectors `β_j`, the one whose inner fit `γ̂(β_j)` is smallest in the
//! `A_n`-norm. MM adds an IRWLS correction to the S fit. LS (Buckley–James),
//! L1 and GM are the non-robust or low-breakdown baselines.

mod baselines;
mod candidates;
mod robust;
mod search;

use serde::{Deserialize, Serialize};

pub use baselines::{buckley_james_ls, gm_estimate, gm_score, l1_estimate, l1_estimate_with};
pub use candidates::{generate_candidates, CandidateSet};
pub use robust::{
    lms_estimate, lms_estimate_with, m_estimate, m_estimate_with, mm_estimate, mm_estimate_from, s_estimate,
    s_estimate_with, tau_estimate, tau_estimate_with,
};
pub use search::{inner_m_fit, SearchOutcome};

use crate::data::{CensoredSample, FitResult};
use crate::error::{Error, Result};
use crate::inner::IrwlsConfig;
use crate::linalg;
use crate::loss::{LossFunction, MM_BISQUARE_C, S_BISQUARE_C, TAU_BISQUARE_C};

/// Choice of the matrix `A_n` in the outer criterion `γ'A_nγ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnKind {
    #[default]
    Identity,
    /// Diagonal of squared covariate MADs; the intercept entry is 1.
    MadDiagonal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub n_candidates: usize,
    pub seed: u64,
    pub a_n: AnKind,
    /// Post-search polish `β ← β + γ̂(β)` (and I-step refinement of inner
    /// S fits). Off reproduces pure candidate selection.
    pub refine: bool,
    pub rng_stream_id: u64,
    /// κ-pruning of the S/LMS/τ search.
    pub prune: bool,
    pub irwls: IrwlsConfig,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            n_candidates: 500,
            seed: 0,
            a_n: AnKind::Identity,
            refine: false,
            rng_stream_id: 0,
            prune: true,
            irwls: IrwlsConfig::default(),
        }
    }
}

/// Number of subsamples needed so that at least one is outlier-free with
/// probability `confidence` when a fraction `contamination` is bad.
pub fn subsamples_needed(p: usize, contamination: f64, confidence: f64) -> usize {
    let clean = (1.0 - contamination).powi(p as i32);
    if clean >= 1.0 {
        return 1;
    }
    ((1.0 - confidence).ln() / (1.0 - clean).ln()).ceil().max(1.0) as usize
}

/// `A_n` as a row-major `p × p` matrix.
pub fn scatter_matrix(sample: &CensoredSample, kind: AnKind) -> Vec<f64> {
    let p = sample.p();
    let mut a = vec![0.0; p * p];
    for k in 0..p {
        a[k * p + k] = match kind {
            AnKind::Identity => 1.0,
            AnKind::MadDiagonal if k == 0 && sample.has_intercept() => 1.0,
            AnKind::MadDiagonal => {
                let col = sample.column(k);
                let med = linalg::median(&col);
                let dev: Vec<f64> = col.iter().map(|v| (v - med).abs()).collect();
                let mad = linalg::median(&dev);
                if mad > 0.0 {
                    mad * mad
                } else {
                    1.0
                }
            }
        };
    }
    a
}

/// `v'Av`.
pub fn quad_form(a: &[f64], v: &[f64]) -> f64 {
    let p = v.len();
    let mut acc = 0.0;
    for r in 0..p {
        acc += v[r] * linalg::dot(&a[r * p..(r + 1) * p], v);
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Ls,
    L1,
    Lms,
    S,
    Mm,
    Tau,
    M,
    Gm,
}

impl Estimator {
    pub const ALL: [Estimator; 8] = [
        Estimator::Ls,
        Estimator::L1,
        Estimator::Lms,
        Estimator::S,
        Estimator::Mm,
        Estimator::Tau,
        Estimator::M,
        Estimator::Gm,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Estimator::Ls => "ls",
            Estimator::L1 => "l1",
            Estimator::Lms => "lms",
            Estimator::S => "s",
            Estimator::Mm => "mm",
            Estimator::Tau => "tau",
            Estimator::M => "m",
            Estimator::Gm => "gm",
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Estimator::Ls => "LS",
            Estimator::L1 => "L1",
            Estimator::Lms => "LMS",
            Estimator::S => "S",
            Estimator::Mm => "MM",
            Estimator::Tau => "TAU",
            Estimator::M => "M",
            Estimator::Gm => "GM",
        }
    }
}

impl std::str::FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Estimator::ALL
            .into_iter()
            .find(|e| e.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidInput(format!("unknown estimator '{s}'")))
    }
}

impl std::fmt::Display for Estimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Tuning shared by the dispatcher [`fit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorOptions {
    pub search: SearchConfig,
    /// `b/a` of the S-scale.
    pub b_over_a: f64,
    /// Bisquare constant of the S-scale.
    pub c1: f64,
    /// Bisquare constant of the MM and M steps.
    pub c2: f64,
    /// Bisquare constant of the second τ loss.
    pub c_tau: f64,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        Self { search: SearchConfig::default(), b_over_a: 0.5, c1: S_BISQUARE_C, c2: MM_BISQUARE_C, c_tau: TAU_BISQUARE_C }
    }
}

impl EstimatorOptions {
    pub fn rho1(&self) -> Result<LossFunction> {
        LossFunction::bisquare(self.c1)
    }

    pub fn b(&self) -> Result<f64> {
        if !(self.b_over_a > 0.0 && self.b_over_a < 1.0) {
            return Err(Error::InvalidInput(format!("b/a must lie in (0, 1), got {}", self.b_over_a)));
        }
        Ok(self.b_over_a * self.rho1()?.sup())
    }
}

/// Fits `estimator` with the given options.
pub fn fit(sample: &CensoredSample, estimator: Estimator, opts: &EstimatorOptions) -> Result<FitResult> {
    let cfg = &opts.search;
    match estimator {
        Estimator::Ls => buckley_james_ls(sample, cfg),
        Estimator::L1 => l1_estimate(sample, cfg),
        Estimator::Lms => lms_estimate(sample, cfg),
        Estimator::Gm => gm_estimate(sample, cfg),
        Estimator::S => s_estimate(sample, cfg, opts.rho1()?, opts.b()?),
        Estimator::Mm => mm_estimate(sample, cfg, opts.rho1()?, LossFunction::bisquare(opts.c2)?, opts.b()?),
        Estimator::Tau => tau_estimate(sample, cfg, opts.rho1()?, LossFunction::bisquare(opts.c_tau)?, opts.b()?),
        Estimator::M => {
            let s_fit = s_estimate(sample, cfg, opts.rho1()?, opts.b()?)?;
            if s_fit.exact_fit {
                return Ok(s_fit);
            }
            m_estimate(sample, cfg, LossFunction::bisquare(opts.c2)?, s_fit.scale)
        }
    }
}

/// Fits several estimators to one sample, sharing the candidate set and the
/// S fit behind MM and M. Results follow the order of `estimators`.
pub fn fit_many(sample: &CensoredSample, estimators: &[Estimator], opts: &EstimatorOptions) -> Vec<Result<FitResult>> {
    let cfg = &opts.search;
    let needs_cands = estimators.iter().any(|e| !matches!(e, Estimator::Ls | Estimator::Gm));
    let cands: Option<Result<CandidateSet>> = if needs_cands { Some(generate_candidates(sample, cfg)) } else { None };
    let mut s_fit: Option<Result<FitResult>> = None;
    let mut out = Vec::with_capacity(estimators.len());
    for &e in estimators {
        let r = (|| -> Result<FitResult> {
            let cands = || cands.as_ref().expect("generated").as_ref().map_err(Clone::clone);
            let s_of = |s_fit: &mut Option<Result<FitResult>>| -> Result<FitResult> {
                s_fit
                    .get_or_insert_with(|| s_estimate_with(sample, cands()?, cfg, opts.rho1()?, opts.b()?))
                    .clone()
            };
            match e {
                Estimator::Ls | Estimator::Gm => fit(sample, e, opts),
                Estimator::L1 => l1_estimate_with(sample, cands()?, cfg),
                Estimator::Lms => lms_estimate_with(sample, cands()?, cfg),
                Estimator::S => s_of(&mut s_fit),
                Estimator::Tau => {
                    tau_estimate_with(sample, cands()?, cfg, opts.rho1()?, LossFunction::bisquare(opts.c_tau)?, opts.b()?)
                }
                Estimator::Mm => {
                    let rho2 = LossFunction::bisquare(opts.c2)?;
                    if !crate::loss::dominated_by(&rho2, &opts.rho1()?) {
                        return Err(Error::InvalidInput("MM requires rho2 dominated by rho1".into()));
                    }
                    mm_estimate_from(sample, &s_of(&mut s_fit)?, rho2, cfg)
                }
                Estimator::M => {
                    let s = s_of(&mut s_fit)?;
                    if s.exact_fit {
                        return Ok(s);
                    }
                    m_estimate_with(sample, cands()?, cfg, LossFunction::bisquare(opts.c2)?, s.scale)
                }
            }
        })();
        out.push(r);
    }
    out
}
