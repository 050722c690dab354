//! Monte Carlo harness for the simple censored regression model
//! `y = α + βx + u`, `x, u ~ N(0, 1)`, censored by `c ~ N(1, 1)`, with optional
//! leverage contamination, plus the objective-curve experiment.

use std::time::Instant;

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{residuals, CensoredSample};
use crate::error::{Error, Result};
use crate::estimators::{fit, generate_candidates, fit_many, inner_m_fit, quad_form, scatter_matrix, Estimator, EstimatorOptions};
use crate::inner::{inner_score, InnerProblem};
use crate::km::kaplan_meier;
use crate::linalg;
use crate::loss::LossFunction;
use crate::rng::{self, Purpose};

/// Slopes of the contamination tables.
pub const CONTAMINATION_SLOPES: [f64; 7] = [2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0];

/// Estimators reported in the tables, in column order.
pub const TABLE_ESTIMATORS: [Estimator; 6] =
    [Estimator::S, Estimator::Lms, Estimator::Ls, Estimator::Mm, Estimator::Gm, Estimator::L1];

/// Replicates at desk scale and in the full study.
pub const DESK_REPLICATES: usize = 200;
pub const FULL_REPLICATES: usize = 1000;

/// Acceptable fraction of failed fits per estimator.
pub const MAX_FAILURE_RATE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contamination {
    pub count: usize,
    pub x0: f64,
    pub m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationScenario {
    pub n: usize,
    /// `(α, β)`.
    pub beta0: Vec<f64>,
    pub noise_sd: f64,
    pub censor_mean: f64,
    pub censor_sd: f64,
    /// When false no observation is censored.
    pub censoring: bool,
    /// Contaminated rows are replaced by `(x0, m·x0)`, uncensored.
    pub contamination_count: usize,
    pub x0: f64,
    pub m: f64,
    pub replicates: usize,
    pub seed: u64,
}

impl Default for SimulationScenario {
    fn default() -> Self {
        Self {
            n: 100,
            beta0: vec![0.0, 1.5],
            noise_sd: 1.0,
            censor_mean: 1.0,
            censor_sd: 1.0,
            censoring: true,
            contamination_count: 0,
            x0: 0.0,
            m: 0.0,
            replicates: DESK_REPLICATES,
            seed: 0,
        }
    }
}

impl SimulationScenario {
    pub fn contaminated(mut self, x0: f64, m: f64) -> Self {
        self.contamination_count = 10;
        self.x0 = x0;
        self.m = m;
        self
    }

    pub fn contamination(&self) -> Option<Contamination> {
        (self.contamination_count > 0).then_some(Contamination { count: self.contamination_count, x0: self.x0, m: self.m })
    }

    /// Parses a flat TOML scenario; missing keys take the defaults.
    pub fn from_toml(text: &str) -> Result<Self> {
        let scn: Self = toml::from_str(text).map_err(|e| Error::InvalidInput(format!("scenario: {e}")))?;
        scn.check()?;
        Ok(scn)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat scenario serializes")
    }

    pub fn check(&self) -> Result<()> {
        if self.beta0.len() != 2 {
            return Err(Error::InvalidInput("beta0 must be (intercept, slope)".into()));
        }
        if self.n < 3 {
            return Err(Error::TooFewObservations { n: self.n, p: 2 });
        }
        if self.contamination_count > self.n {
            return Err(Error::InvalidInput("contamination count exceeds n".into()));
        }
        if !(self.noise_sd >= 0.0 && self.censor_sd >= 0.0) {
            return Err(Error::InvalidInput("standard deviations must be nonnegative".into()));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidInput("replicates must be positive".into()));
        }
        Ok(())
    }
}

/// Draws replicate `index`; rows are drawn as `(x, u, c)` triples from the
/// stream of `(seed, index)`.
pub fn generate_replicate(scn: &SimulationScenario, index: u64) -> Result<CensoredSample> {
    scn.check()?;
    let mut r = rng::replicate_stream(scn.seed, index, Purpose::Data);
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let (mut y, mut rows, mut delta) = (Vec::with_capacity(scn.n), Vec::with_capacity(scn.n), Vec::with_capacity(scn.n));
    for _ in 0..scn.n {
        let x: f64 = std.sample(&mut r);
        let u = scn.noise_sd * std.sample(&mut r);
        let c = scn.censor_mean + scn.censor_sd * std.sample(&mut r);
        let full = scn.beta0[0] + scn.beta0[1] * x + u;
        let observed = !scn.censoring || full <= c;
        y.push(if observed { full } else { c });
        rows.push(vec![x]);
        delta.push(observed);
    }
    if let Some(ct) = scn.contamination() {
        for i in 0..ct.count {
            rows[i][0] = ct.x0;
            y[i] = ct.m * ct.x0;
            delta[i] = true;
        }
    }
    CensoredSample::from_rows(y, &rows, delta, true)
}

/// Options for replicate `index`: candidates come from their own stream.
pub fn replicate_options(scn: &SimulationScenario, opts: &EstimatorOptions, index: u64) -> EstimatorOptions {
    let mut o = opts.clone();
    o.search.seed = scn.seed;
    o.search.rng_stream_id = rng::stream_id(index, Purpose::Candidates);
    o
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorRecord {
    pub estimator: String,
    pub mse: f64,
    pub n_fail: usize,
    pub replicates: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub x0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub records: Vec<EstimatorRecord>,
    pub censoring_rate: f64,
    /// `slopes[e][r]`: slope of estimator `e` on replicate `r`, `None` on
    /// failure.
    pub slopes: Vec<Vec<Option<f64>>>,
    pub runtime_secs: f64,
}

struct Replicate {
    censored: usize,
    slopes: Vec<Option<f64>>,
}

/// Fits every estimator to every replicate and aggregates slope MSEs.
/// Replicates run in parallel on the current rayon pool; sums are taken in
/// replicate order, so results do not depend on the number of workers.
pub fn run_table(scn: &SimulationScenario, estimators: &[Estimator], opts: &EstimatorOptions) -> Result<SimulationResult> {
    if estimators.is_empty() {
        return Err(Error::InvalidInput("no estimators selected".into()));
    }
    scn.check()?;
    let start = Instant::now();
    let reps: Vec<Replicate> = (0..scn.replicates as u64)
        .into_par_iter()
        .map(|r| -> Result<Replicate> {
            let sample = generate_replicate(scn, r)?;
            let o = replicate_options(scn, opts, r);
            let slopes = fit_many(&sample, estimators, &o)
                .into_iter()
                .map(|f| f.ok().map(|f| f.beta[1]).filter(|s| s.is_finite()))
                .collect();
            Ok(Replicate { censored: sample.censored_count(), slopes })
        })
        .collect::<Result<_>>()?;

    let truth = scn.beta0[1];
    let contamination = scn.contamination();
    let mut records = Vec::with_capacity(estimators.len());
    let mut slopes = Vec::with_capacity(estimators.len());
    for (e, est) in estimators.iter().enumerate() {
        let col: Vec<Option<f64>> = reps.iter().map(|r| r.slopes[e]).collect();
        let ok: Vec<f64> = col.iter().flatten().copied().collect();
        let n_fail = col.len() - ok.len();
        if n_fail as f64 > MAX_FAILURE_RATE * scn.replicates as f64 {
            return Err(Error::FailureRate {
                estimator: est.label().into(),
                failures: n_fail,
                replicates: scn.replicates,
            });
        }
        let mse = ok.iter().map(|s| (s - truth).powi(2)).sum::<f64>() / ok.len().max(1) as f64;
        records.push(EstimatorRecord {
            estimator: est.label().into(),
            mse,
            n_fail,
            replicates: scn.replicates,
            seed: scn.seed,
            x0: contamination.map(|c| c.x0),
            m: contamination.map(|c| c.m),
        });
        slopes.push(col);
    }
    let censored: usize = reps.iter().map(|r| r.censored).sum();
    Ok(SimulationResult {
        records,
        censoring_rate: censored as f64 / (scn.replicates * scn.n) as f64,
        slopes,
        runtime_secs: start.elapsed().as_secs_f64(),
    })
}

/// Empirical censoring fraction over `replicates` clean samples, without
/// fitting.
pub fn censoring_rate(scn: &SimulationScenario, replicates: usize) -> Result<f64> {
    let counts: Vec<usize> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| generate_replicate(scn, r).map(|s| s.censored_count()))
        .collect::<Result<_>>()?;
    Ok(counts.iter().sum::<usize>() as f64 / (replicates * scn.n) as f64)
}

/// Scenarios of table 1 (clean), 2 (`x0 = 1`) or 3 (`x0 = 10`).
pub fn table_scenarios(table: u8, replicates: usize, seed: u64) -> Result<Vec<SimulationScenario>> {
    let base = SimulationScenario { replicates, seed, ..Default::default() };
    let x0 = match table {
        1 => return Ok(vec![base]),
        2 => 1.0,
        3 => 10.0,
        _ => return Err(Error::InvalidInput(format!("unknown table {table}; expected 1, 2 or 3"))),
    };
    Ok(CONTAMINATION_SLOPES.iter().map(|&m| base.clone().contaminated(x0, m)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub beta: f64,
    pub intercept: f64,
    pub gamma_norm: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveReport {
    pub rows: Vec<CurvePoint>,
    /// Scale at which the inner M fits are computed.
    pub scale: f64,
    pub argmin: usize,
    /// The minimum sits on the first or last grid point.
    pub edge_minimum: bool,
}

/// For each slope `b` on the grid: intercept from the KM median of
/// `y* − b·x`, then `‖γ̂(β)‖` from the M inner fit with the MM loss at the
/// S-scale (started from the best candidate shift), and the slope component of the score
/// `Σ_ij ψ(r_j/s) x_i π_ij`.
pub fn objective_curve(sample: &CensoredSample, grid: &[f64], opts: &EstimatorOptions) -> Result<CurveReport> {
    if sample.p() != 2 || !sample.has_intercept() {
        return Err(Error::InvalidInput("objective curve needs p = 2 with intercept".into()));
    }
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty grid".into()));
    }
    let s_fit = fit(sample, Estimator::S, opts)?;
    let scale = if s_fit.scale > 0.0 {
        s_fit.scale
    } else {
        let y = sample.y();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / y.len() as f64).sqrt();
        if sd > 0.0 {
            sd
        } else {
            1.0
        }
    };
    let rho = LossFunction::bisquare(opts.c2)?;
    let a_n = scatter_matrix(sample, opts.search.a_n);
    let cands = generate_candidates(sample, &opts.search)?;
    let rows = grid
        .par_iter()
        .map(|&b| -> Result<CurvePoint> {
            let intercept = kaplan_meier(&residuals(sample, &[0.0, b])?)?.median();
            let beta = [intercept, b];
            let starts: Vec<Vec<f64>> = cands.betas.iter().map(|c| linalg::sub(c, &beta)).collect();
            let inner = inner_m_fit(sample, &beta, rho, scale, &opts.search.irwls, &starts)?;
            let w = kaplan_meier(&residuals(sample, &beta)?)?;
            let score = inner_score(&InnerProblem::new(&w, sample, scale, rho), &[0.0, 0.0])?[1];
            Ok(CurvePoint { beta: b, intercept, gamma_norm: quad_form(&a_n, &inner.gamma).sqrt(), score })
        })
        .collect::<Result<Vec<_>>>()?;
    let argmin = (0..rows.len()).fold(0, |best, k| if rows[k].gamma_norm < rows[best].gamma_norm { k } else { best });
    Ok(CurveReport { edge_minimum: argmin == 0 || argmin + 1 == rows.len(), argmin, rows, scale })
}

/// `steps` evenly spaced points from `lo` to `hi` inclusive.
pub fn grid(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => vec![],
        1 => vec![lo],
        _ => (0..steps).map(|k| lo + (hi - lo) * k as f64 / (steps - 1) as f64).collect(),
    }
}
