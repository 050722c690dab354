//! Finite-sample breakdown lower bound and empirical breakdown probes.
//!
//! With `q` the largest number of covariate vectors on a hyperplane through
//! the origin and `m` censored observations, an S-type estimator with scale
//! ratio `b/a` cannot be broken by fewer than
//! `k₀ = min(n(1 − b/a) − q − m, n·b/a − m)` replaced observations.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::data::{CensoredObservation, CensoredSample};
use crate::error::{Error, Result};
use crate::estimators::{fit, Estimator, EstimatorOptions};
use crate::linalg;
use crate::rng::{self, Purpose};

/// Default limit on the number of hyperplanes examined by [`compute_q`].
pub const DEFAULT_Q_BUDGET: usize = 1_000_000;

/// Default outlier magnitudes for [`empirical_breakdown_probe`].
pub const PROBE_MAGNITUDES: [f64; 3] = [1e2, 1e4, 1e6];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownReport {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub m: usize,
    pub b_over_a: f64,
    pub k0: f64,
    pub gamma_bound: f64,
    /// Bound at the best `b/a`: `(n − p + 1 − 2m)/(2n)`.
    pub optimal_bound: f64,
    /// False when `q` is only a sampled lower bound, in which case
    /// `gamma_bound` may overstate the true bound.
    pub q_exact: bool,
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn determinant(mut a: Vec<f64>, d: usize) -> f64 {
    let mut det = 1.0;
    for c in 0..d {
        let piv = (c..d).max_by(|&i, &j| a[i * d + c].abs().total_cmp(&a[j * d + c].abs())).unwrap();
        if a[piv * d + c] == 0.0 {
            return 0.0;
        }
        if piv != c {
            for k in 0..d {
                a.swap(piv * d + k, c * d + k);
            }
            det = -det;
        }
        let pv = a[c * d + c];
        det *= pv;
        for r in c + 1..d {
            let f = a[r * d + c] / pv;
            for k in c..d {
                a[r * d + k] -= f * a[c * d + k];
            }
        }
    }
    det
}

/// Normal of the hyperplane spanned by `p − 1` vectors (generalized cross
/// product), or `None` if they are dependent.
fn normal(rows: &[&[f64]], p: usize) -> Option<Vec<f64>> {
    let d = p - 1;
    let theta: Vec<f64> = (0..p)
        .map(|skip| {
            let mut minor = Vec::with_capacity(d * d);
            for r in rows {
                minor.extend(r.iter().enumerate().filter(|(k, _)| *k != skip).map(|(_, v)| *v));
            }
            let sgn = if skip % 2 == 0 { 1.0 } else { -1.0 };
            sgn * determinant(minor, d)
        })
        .collect();
    let scale: f64 = rows.iter().map(|r| linalg::norm(r)).product();
    let nt = linalg::norm(&theta);
    (nt > 1e-12 * scale.max(f64::MIN_POSITIVE)).then_some(theta)
}

fn incident(sample: &CensoredSample, theta: &[f64]) -> usize {
    let nt = linalg::norm(theta);
    sample.rows().filter(|x| linalg::dot(theta, x).abs() <= 1e-10 * nt * linalg::norm(x)).count()
}

/// `q = max_{‖θ‖=1} #{i : θ'x_i = 0}`. Exact when the `(p−1)`-subsets of rows
/// number at most `budget`; otherwise `budget` random subsets give a lower
/// bound and the flag is false.
pub fn compute_q(sample: &CensoredSample, budget: usize) -> (usize, bool) {
    let (n, p) = (sample.n(), sample.p());
    if p == 1 {
        return (sample.rows().filter(|x| x[0] == 0.0).count(), true);
    }
    let d = p - 1;
    let mut best = d;
    let mut visit = |idx: &[usize]| {
        let rows: Vec<&[f64]> = idx.iter().map(|&i| sample.row(i)).collect();
        if let Some(theta) = normal(&rows, p) {
            best = best.max(incident(sample, &theta));
        }
    };
    if binomial(n, d) <= budget as f64 {
        let mut idx: Vec<usize> = (0..d).collect();
        loop {
            visit(&idx);
            let Some(pos) = (0..d).rev().find(|&k| idx[k] < n - d + k) else {
                break;
            };
            idx[pos] += 1;
            for k in pos + 1..d {
                idx[k] = idx[k - 1] + 1;
            }
        }
        (best, true)
    } else {
        let mut r = rng::stream(0, rng::stream_id(0, Purpose::Probe));
        for _ in 0..budget {
            let idx = index::sample(&mut r, n, d).into_vec();
            visit(&idx);
        }
        (best, false)
    }
}

/// Bound from the counts alone.
pub fn breakdown_from_counts(n: usize, p: usize, q: usize, m: usize, b_over_a: f64) -> Result<BreakdownReport> {
    if !(b_over_a > 0.0 && b_over_a < 1.0) {
        return Err(Error::InvalidInput(format!("b/a must lie in (0, 1), got {b_over_a}")));
    }
    if n == 0 || q > n || m > n {
        return Err(Error::InvalidInput(format!("inconsistent counts n={n}, q={q}, m={m}")));
    }
    let nf = n as f64;
    let k0 = (nf * (1.0 - b_over_a) - q as f64 - m as f64).min(nf * b_over_a - m as f64);
    let optimal = ((nf - p as f64 + 1.0 - 2.0 * m as f64) / (2.0 * nf)).max(0.0);
    Ok(BreakdownReport {
        n,
        p,
        q,
        m,
        b_over_a,
        k0,
        gamma_bound: k0.max(0.0) / nf,
        optimal_bound: optimal,
        q_exact: true,
    })
}

pub fn breakdown_bound(sample: &CensoredSample, b_over_a: f64) -> Result<BreakdownReport> {
    breakdown_bound_with_budget(sample, b_over_a, DEFAULT_Q_BUDGET)
}

pub fn breakdown_bound_with_budget(sample: &CensoredSample, b_over_a: f64, budget: usize) -> Result<BreakdownReport> {
    if !(b_over_a > 0.0 && b_over_a < 1.0) {
        return Err(Error::InvalidInput(format!("b/a must lie in (0, 1), got {b_over_a}")));
    }
    let (q, exact) = compute_q(sample, budget);
    let mut report = breakdown_from_counts(sample.n(), sample.p(), q, sample.censored_count(), b_over_a)?;
    report.q_exact = exact;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub k: usize,
    pub magnitudes: Vec<f64>,
    /// `‖β̂(Z*) − β̂(Z)‖` per magnitude.
    pub displacements: Vec<f64>,
    pub max_displacement: f64,
    pub clean_beta: Vec<f64>,
}

/// Uncensored leverage outliers replacing the first `k` rows: non-intercept
/// covariates `M(1 + i/(10k))` and response `M` times their sum, so the
/// outliers pull the fit towards slopes of order `M`.
pub fn leverage_outliers(sample: &CensoredSample, k: usize, magnitude: f64) -> Vec<(usize, CensoredObservation)> {
    (0..k)
        .map(|i| {
            let v = magnitude * (1.0 + i as f64 / (10.0 * k as f64));
            let x: Vec<f64> = (0..sample.p())
                .map(|c| if c == 0 && sample.has_intercept() { 1.0 } else { v })
                .collect();
            let y = magnitude * v;
            (i, CensoredObservation { y_star: y, x, delta: true })
        })
        .collect()
}

/// Replaces `k` observations with leverage outliers at each magnitude and
/// reports how far the fit moves.
pub fn empirical_breakdown_probe(
    sample: &CensoredSample,
    estimator: Estimator,
    opts: &EstimatorOptions,
    k: usize,
    magnitudes: &[f64],
) -> Result<ProbeReport> {
    if k >= sample.n() {
        return Err(Error::InvalidInput(format!("cannot replace {k} of {} observations", sample.n())));
    }
    let clean = fit(sample, estimator, opts)?;
    let mut displacements = Vec::with_capacity(magnitudes.len());
    for &m in magnitudes {
        let d = if k == 0 {
            0.0
        } else {
            let wrap = |e| Error::Probe { magnitude: m, source: Box::new(e) };
            let contaminated = sample.with_rows_replaced(&leverage_outliers(sample, k, m)).map_err(wrap)?;
            let f = fit(&contaminated, estimator, opts).map_err(wrap)?;
            linalg::norm(&linalg::sub(&f.beta, &clean.beta))
        };
        displacements.push(d);
    }
    Ok(ProbeReport {
        k,
        magnitudes: magnitudes.to_vec(),
        max_displacement: displacements.iter().fold(0.0, |a: f64, b| a.max(*b)),
        displacements,
        clean_beta: clean.beta,
    })
}
