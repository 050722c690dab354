//! Observed-data types shared by every estimator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// One observed row `(y*, x, δ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CensoredObservation {
    /// `min(y, c)`.
    pub y_star: f64,
    pub x: Vec<f64>,
    /// `true` when the response was observed (uncensored).
    pub delta: bool,
}

/// A right-censored regression sample stored row-major.
///
/// When `has_intercept` is set the first covariate column is the constant 1.
/// Construction only checks shapes and finiteness; rank and the `n > p`
/// requirement are checked by [`validate`], which every estimator calls.
#[derive(Debug, Clone, PartialEq)]
pub struct CensoredSample {
    y: Vec<f64>,
    x: Vec<f64>,
    delta: Vec<bool>,
    n: usize,
    p: usize,
    has_intercept: bool,
}

impl CensoredSample {
    /// Builds a sample from a row-major `n × p` design.
    pub fn new(y: Vec<f64>, x: Vec<f64>, delta: Vec<bool>, p: usize, has_intercept: bool) -> Result<Self> {
        let n = y.len();
        if p == 0 {
            return Err(Error::InvalidInput("covariate dimension must be positive".into()));
        }
        if x.len() != n * p {
            return Err(Error::DimensionMismatch { expected: n * p, got: x.len() });
        }
        if delta.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: delta.len() });
        }
        if y.iter().chain(x.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sample"));
        }
        if has_intercept && (0..n).any(|i| x[i * p] != 1.0) {
            return Err(Error::InvalidInput("intercept column must be identically 1".into()));
        }
        Ok(Self { y, x, delta, n, p, has_intercept })
    }

    /// Builds a sample from covariate rows, prepending a column of ones when
    /// `intercept` is set.
    pub fn from_rows(y: Vec<f64>, rows: &[Vec<f64>], delta: Vec<bool>, intercept: bool) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        let p = k + usize::from(intercept);
        let mut x = Vec::with_capacity(rows.len() * p);
        for row in rows {
            if row.len() != k {
                return Err(Error::DimensionMismatch { expected: k, got: row.len() });
            }
            if intercept {
                x.push(1.0);
            }
            x.extend_from_slice(row);
        }
        Self::new(y, x, delta, p, intercept)
    }

    pub fn from_observations(obs: &[CensoredObservation], has_intercept: bool) -> Result<Self> {
        let p = obs.first().map_or(0, |o| o.x.len());
        let mut x = Vec::with_capacity(obs.len() * p);
        for o in obs {
            if o.x.len() != p {
                return Err(Error::DimensionMismatch { expected: p, got: o.x.len() });
            }
            x.extend_from_slice(&o.x);
        }
        Self::new(
            obs.iter().map(|o| o.y_star).collect(),
            x,
            obs.iter().map(|o| o.delta).collect(),
            p,
            has_intercept,
        )
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn has_intercept(&self) -> bool {
        self.has_intercept
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn delta(&self) -> &[bool] {
        &self.delta
    }

    /// Row-major design matrix.
    pub fn design(&self) -> &[f64] {
        &self.x
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.x.chunks_exact(self.p)
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.rows().map(|r| r[k]).collect()
    }

    pub fn observation(&self, i: usize) -> CensoredObservation {
        CensoredObservation { y_star: self.y[i], x: self.row(i).to_vec(), delta: self.delta[i] }
    }

    /// Number of censored observations.
    pub fn censored_count(&self) -> usize {
        self.delta.iter().filter(|d| !**d).count()
    }

    /// `X·beta` for every row.
    pub fn fitted(&self, beta: &[f64]) -> Vec<f64> {
        self.rows().map(|r| linalg::dot(r, beta)).collect()
    }

    /// Copy with responses replaced; shape and censoring are unchanged.
    pub fn with_response(&self, y: Vec<f64>) -> Result<Self> {
        Self::new(y, self.x.clone(), self.delta.clone(), self.p, self.has_intercept)
    }

    /// Copy with the listed rows replaced.
    pub fn with_rows_replaced(&self, replacements: &[(usize, CensoredObservation)]) -> Result<Self> {
        let mut y = self.y.clone();
        let mut x = self.x.clone();
        let mut delta = self.delta.clone();
        for (i, obs) in replacements {
            if *i >= self.n {
                return Err(Error::InvalidInput(format!("row {i} out of range")));
            }
            if obs.x.len() != self.p {
                return Err(Error::DimensionMismatch { expected: self.p, got: obs.x.len() });
            }
            y[*i] = obs.y_star;
            x[i * self.p..(i + 1) * self.p].copy_from_slice(&obs.x);
            delta[*i] = obs.delta;
        }
        Self::new(y, x, delta, self.p, self.has_intercept)
    }

    /// Copy with the listed rows removed.
    pub fn without_rows(&self, drop: &[usize]) -> Result<Self> {
        let keep: Vec<usize> = (0..self.n).filter(|i| !drop.contains(i)).collect();
        let y = keep.iter().map(|&i| self.y[i]).collect();
        let x = keep.iter().flat_map(|&i| self.row(i).iter().copied()).collect();
        let delta = keep.iter().map(|&i| self.delta[i]).collect();
        Self::new(y, x, delta, self.p, self.has_intercept)
    }
}

/// Censored residuals `r*_i(β) = y*_i − β'x_i` with their indicators.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualVector {
    pub r_star: Vec<f64>,
    pub delta: Vec<bool>,
}

impl ResidualVector {
    pub fn len(&self) -> usize {
        self.r_star.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r_star.is_empty()
    }
}

const RESIDUAL_SNAP: f64 = 1e-12;

pub fn residuals(sample: &CensoredSample, beta: &[f64]) -> Result<ResidualVector> {
    if beta.len() != sample.p() {
        return Err(Error::DimensionMismatch { expected: sample.p(), got: beta.len() });
    }
    // Residuals within rounding of zero (e.g. at the points an exact-fit
    // candidate interpolates) are snapped to 0 so that KM tie handling, not
    // the sign of the rounding error, decides their order.
    let r_star = sample
        .y()
        .iter()
        .zip(sample.rows())
        .map(|(y, x)| {
            let r = y - linalg::dot(x, beta);
            let size = y.abs() + x.iter().zip(beta).map(|(a, b)| (a * b).abs()).sum::<f64>();
            if r.abs() <= RESIDUAL_SNAP * size {
                0.0
            } else {
                r
            }
        })
        .collect();
    Ok(ResidualVector { r_star, delta: sample.delta().to_vec() })
}

/// Summary returned by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub n: usize,
    pub p: usize,
    /// Censored count.
    pub m: usize,
    pub rank: usize,
    /// No two covariate vectors are parallel. Exact general position for
    /// `p ≤ 2`, a necessary condition otherwise.
    pub general_position: bool,
}

pub fn validate(sample: &CensoredSample) -> Result<Diagnostics> {
    let (n, p) = (sample.n(), sample.p());
    if n < p + 1 {
        return Err(Error::TooFewObservations { n, p });
    }
    let m = sample.censored_count();
    if m == n {
        return Err(Error::AllCensored);
    }
    let rank = linalg::rank(sample.design(), n, p);
    if rank < p {
        return Err(Error::RankDeficient { rank, p });
    }
    Ok(Diagnostics { n, p, m, rank, general_position: no_parallel_rows(sample) })
}

fn no_parallel_rows(sample: &CensoredSample) -> bool {
    if sample.p() == 1 {
        return sample.rows().filter(|r| r[0] == 0.0).count() == 0;
    }
    let rows: Vec<&[f64]> = sample.rows().collect();
    for (a, ra) in rows.iter().enumerate() {
        let na = linalg::norm(ra);
        for rb in &rows[a + 1..] {
            let nb = linalg::norm(rb);
            let cos = linalg::dot(ra, rb).abs();
            if (cos - na * nb).abs() <= 1e-12 * na * nb {
                return false;
            }
        }
    }
    true
}

/// Outcome of any estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub beta: Vec<f64>,
    /// Residual scale `s_n`; zero only for exact fits.
    pub scale: f64,
    /// Estimator-specific criterion at the returned fit.
    pub objective: f64,
    /// Inner criterion evaluations (scale computations or inner fits)
    /// performed by the search.
    pub n_candidates_evaluated: usize,
    pub converged: bool,
    pub exact_fit: bool,
}
