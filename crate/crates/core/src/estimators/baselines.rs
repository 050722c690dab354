//! Non-robust or low-breakdown baselines: Buckley–James least squares, L1 and
//! the GM (Mood–Brown type) slope estimator.

use crate::data::{CensoredSample, FitResult};
use crate::km::Atoms;
use crate::error::{Error, Result};
use crate::inner::{irwls_with, InnerProblem};
use crate::linalg;
use crate::loss::LossFunction;

use super::search::{fitted_inner_search, weights_at};
use super::{generate_candidates, scatter_matrix, CandidateSet, SearchConfig};

const BJ_MAX_ITER: usize = 100;
const BJ_TOL: f64 = 1e-10;

fn ols(sample: &CensoredSample, y: &[f64]) -> Result<Vec<f64>> {
    linalg::least_squares(sample.design(), y, None, sample.p())
        .ok_or_else(|| Error::Numerical("singular least squares system".into()))
}

fn close(a: &[f64], b: &[f64]) -> bool {
    linalg::norm(&linalg::sub(a, b)) <= BJ_TOL * (1.0 + linalg::norm(a))
}

/// Buckley–James least squares: censored responses are replaced by
/// `β'x_i + E_KM[u | u > r_i]` and ordinary least squares is refitted until
/// the coefficients settle. A 2-cycle is resolved by averaging and flagged as
/// not converged.
pub fn buckley_james_ls(sample: &CensoredSample, _cfg: &SearchConfig) -> Result<FitResult> {
    let mut beta = ols(sample, sample.y())?;
    let mut prev: Option<Vec<f64>> = None;
    let bound = 1e12 * (1.0 + sample.y().iter().fold(0.0f64, |m, v| m.max(v.abs())));
    let mut converged = false;
    let mut iterations = 0;
    while iterations < BJ_MAX_ITER {
        iterations += 1;
        let w = weights_at(sample, &beta)?;
        let fitted = sample.fitted(&beta);
        let imputed: Vec<f64> = (0..sample.n()).map(|i| fitted[i] + w.conditional_expectation(|u| u, i)).collect();
        let next = ols(sample, &imputed)?;
        if next.iter().any(|v| !v.is_finite() || v.abs() > bound) {
            return Err(Error::Numerical("Buckley-James iterates diverged".into()));
        }
        if close(&next, &beta) {
            beta = next;
            converged = true;
            break;
        }
        if prev.as_ref().is_some_and(|p| close(&next, p)) {
            beta = beta.iter().zip(&next).map(|(a, b)| 0.5 * (a + b)).collect();
            break;
        }
        prev = Some(std::mem::replace(&mut beta, next));
    }
    let w = weights_at(sample, &beta)?;
    let scale = w.weighted_expectation(sample, |u, _| u * u).sqrt();
    Ok(FitResult {
        beta,
        scale,
        objective: scale * scale,
        n_candidates_evaluated: iterations,
        converged,
        exact_fit: scale == 0.0,
    })
}

/// Smoothing stages of the L1 warm start; the last corner is
/// `10^-STAGES · E|r|`.
const L1_SMOOTHING_STAGES: usize = 3;
const L1_MAX_EXCHANGES: usize = 1000;

/// Weighted-L1 inner fit `argmin_γ Σ_ij |r_j − γ'x_i| π_ij`. A Huber-smoothed
/// IRLS with a shrinking corner gives a warm start, and exact basis exchange
/// finishes at the optimal vertex. Returns `(γ, E|r − γ'x|, converged)`.
fn l1_inner(sample: &CensoredSample, beta: &[f64], cfg: &SearchConfig) -> Result<(Vec<f64>, f64, bool)> {
    let w = weights_at(sample, beta)?;
    let mean_abs = w.weighted_expectation(sample, |u, _| u.abs());
    let zero = vec![0.0; sample.p()];
    if mean_abs == 0.0 {
        return Ok((zero, 0.0, true));
    }
    let prob = InnerProblem::new(&w, sample, 1.0, LossFunction::Absolute);
    // Starting from a tiny corner, the points the candidate interpolates get
    // weight 1/ε and pin γ near 0.
    let mut gamma = zero;
    let mut converged = false;
    for k in 0..=L1_SMOOTHING_STAGES {
        let eps = mean_abs * 10f64.powi(-(k as i32));
        let huber = |t: f64| {
            let a = t.abs();
            if a <= eps {
                0.5 * t * t / eps
            } else {
                a - 0.5 * eps
            }
        };
        let fit = irwls_with(&prob, &gamma, &cfg.irwls, huber, |t| 1.0 / t.abs().max(eps))?;
        gamma = fit.gamma;
        converged = fit.converged;
    }
    let l1_at = |g: &[f64]| {
        let f = sample.fitted(g);
        w.weighted_expectation_rows(|u, i| (u - f[i]).abs())
    };
    let mut value = l1_at(&gamma);
    if let Some((vertex, optimal)) = l1_vertex_descent(sample, w.atoms(), &gamma) {
        let v = l1_at(&vertex);
        if v <= value {
            gamma = vertex;
            value = v;
            converged = optimal;
        }
    }
    Ok((gamma, value, converged))
}

/// Exact minimization of `Σ_k m_k |t_k − x_k'γ|` over the atoms by basis
/// exchange, starting from the vertex through the `p` atoms with the
/// smallest residuals at `start`. `None` when no nonsingular basis exists.
fn l1_vertex_descent(sample: &CensoredSample, atoms: &Atoms, start: &[f64]) -> Option<(Vec<f64>, bool)> {
    let p = sample.p();
    let m = atoms.len();
    let x = |k: usize| sample.row(atoms.row[k] as usize);
    let resid = |g: &[f64]| -> Vec<f64> { (0..m).map(|k| atoms.value[k] - linalg::dot(x(k), g)).collect() };
    let objective = |e: &[f64]| -> f64 { e.iter().zip(&atoms.mass).map(|(e, w)| w * e.abs()).sum() };

    let e0 = resid(start);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| e0[a].abs().total_cmp(&e0[b].abs()));
    let mut basis: Vec<usize> = Vec::with_capacity(p);
    let mut rows: Vec<f64> = Vec::with_capacity(p * p);
    for k in order {
        if basis.len() == p {
            break;
        }
        let len = rows.len();
        rows.extend_from_slice(x(k));
        if linalg::rank(&rows, basis.len() + 1, p) == basis.len() + 1 {
            basis.push(k);
        } else {
            rows.truncate(len);
        }
    }
    if basis.len() < p {
        return None;
    }
    let mut gamma = linalg::solve(&rows, &basis.iter().map(|&k| atoms.value[k]).collect::<Vec<_>>())?;
    let mut e = resid(&gamma);
    let mut obj = objective(&e);

    for _ in 0..L1_MAX_EXCHANGES {
        // Subgradient condition: X_B'u = −Σ_{k∉B} m_k sign(e_k) x_k with
        // |u_b| ≤ m_b at the optimum.
        let mut g = vec![0.0; p];
        for k in 0..m {
            if basis.contains(&k) || e[k] == 0.0 {
                continue;
            }
            let s = atoms.mass[k] * e[k].signum();
            for (gi, xi) in g.iter_mut().zip(x(k)) {
                *gi -= s * xi;
            }
        }
        let xb: Vec<f64> = basis.iter().flat_map(|&k| x(k).iter().copied()).collect();
        let mut xbt = vec![0.0; p * p];
        for r in 0..p {
            for c in 0..p {
                xbt[c * p + r] = xb[r * p + c];
            }
        }
        let u = linalg::solve(&xbt, &g)?;
        let (leave, excess) = (0..p)
            .map(|r| (r, u[r].abs() - atoms.mass[basis[r]]))
            .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
        if excess <= 1e-12 {
            return Some((gamma, true));
        }
        let mut rhs = vec![0.0; p];
        rhs[leave] = -u[leave].signum();
        let d = linalg::solve(&xb, &rhs)?;

        // Exact line search: weighted median of the breakpoints e_k / c_k.
        let mut breaks: Vec<(f64, f64, usize)> = (0..m)
            .filter_map(|k| {
                let c = linalg::dot(x(k), &d);
                (c.abs() > 1e-14).then(|| (e[k] / c, atoms.mass[k] * c.abs(), k))
            })
            .collect();
        breaks.sort_by(|a, b| a.0.total_cmp(&b.0));
        let half = 0.5 * breaks.iter().map(|b| b.1).sum::<f64>();
        let mut acc = 0.0;
        let &(h, _, enter) = breaks
            .iter()
            .find(|b| {
                acc += b.1;
                acc >= half
            })
            .unwrap_or(&breaks[breaks.len() - 1]);
        if enter == basis[leave] {
            return Some((gamma, false));
        }
        let next: Vec<f64> = gamma.iter().zip(&d).map(|(g, d)| g + h * d).collect();
        let e_next = resid(&next);
        let obj_next = objective(&e_next);
        if obj_next > obj {
            return Some((gamma, false));
        }
        basis[leave] = enter;
        gamma = next;
        e = e_next;
        obj = obj_next;
    }
    Some((gamma, false))
}

/// L1 estimator: the candidate whose weighted-L1 inner fit is smallest in the
/// `A_n`-norm.
pub fn l1_estimate(sample: &CensoredSample, cfg: &SearchConfig) -> Result<FitResult> {
    let cands = generate_candidates(sample, cfg)?;
    l1_estimate_with(sample, &cands, cfg)
}

pub fn l1_estimate_with(sample: &CensoredSample, cands: &CandidateSet, cfg: &SearchConfig) -> Result<FitResult> {
    let a_n = scatter_matrix(sample, cfg.a_n);
    let (j, _gamma, objective, _value, converged) = fitted_inner_search(cands, &a_n, |b| l1_inner(sample, b, cfg))?;
    let beta = cands.betas[j].clone();
    let w = weights_at(sample, &beta)?;
    let scale = w.weighted_expectation(sample, |u, _| u.abs());
    Ok(FitResult {
        beta,
        scale,
        objective,
        n_candidates_evaluated: cands.len(),
        converged,
        exact_fit: scale == 0.0,
    })
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn require_simple(sample: &CensoredSample) -> Result<()> {
    if sample.p() != 2 || !sample.has_intercept() {
        return Err(Error::InvalidInput("GM needs simple regression: p = 2 with intercept".into()));
    }
    Ok(())
}

/// `(score, α)` at `slope`.
fn gm_eval(sample: &CensoredSample, slope: f64, x: &[f64], m_x: f64) -> Result<(f64, f64)> {
    let w = weights_at(sample, &[0.0, slope])?;
    let alpha = w.median();
    let score = (0..sample.n())
        .map(|i| w.conditional_expectation(|u| sign(u - alpha), i) * sign(x[i] - m_x))
        .sum();
    Ok((score, alpha))
}

/// GM slope score `Σ_i E_KM[sign(u − α(β)) | w_i]·sign(x_i − med x)`, with
/// `α(β)` the KM median of `y* − slope·x`.
pub fn gm_score(sample: &CensoredSample, slope: f64) -> Result<f64> {
    require_simple(sample)?;
    let x = sample.column(1);
    let m_x = linalg::median(&x);
    Ok(gm_eval(sample, slope, &x, m_x)?.0)
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    sorted[((sorted.len() - 1) as f64 * q).floor() as usize]
}

/// GM estimator: bisection on the slope score over a bracket taken from
/// candidate slopes; the intercept is the KM median of `y* − β̂x`.
pub fn gm_estimate(sample: &CensoredSample, cfg: &SearchConfig) -> Result<FitResult> {
    require_simple(sample)?;
    let cands = generate_candidates(sample, cfg)?;
    let x = sample.column(1);
    let m_x = linalg::median(&x);
    let mut slopes: Vec<f64> = cands.betas.iter().map(|b| b[1]).collect();
    slopes.sort_by(f64::total_cmp);
    let mut evals = 0;
    let mut score = |s: f64| {
        evals += 1;
        gm_eval(sample, s, &x, m_x).map(|v| v.0)
    };

    let mut bracket = None;
    for (lo, hi) in [(quantile(&slopes, 0.1), quantile(&slopes, 0.9)), (slopes[0], slopes[slopes.len() - 1])] {
        let (f_lo, f_hi) = (score(lo)?, score(hi)?);
        if f_lo == 0.0 {
            bracket = Some((lo, lo, 0.0));
            break;
        }
        if f_hi == 0.0 {
            bracket = Some((hi, hi, 0.0));
            break;
        }
        if sign(f_lo) != sign(f_hi) {
            bracket = Some((lo, hi, f_lo));
            break;
        }
    }

    let (slope, converged) = match bracket {
        Some((mut lo, mut hi, f_lo)) => {
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi || hi - lo <= 1e-14 * (1.0 + lo.abs() + hi.abs()) {
                    break;
                }
                let f = score(mid)?;
                if f == 0.0 {
                    lo = mid;
                    break;
                }
                if sign(f) == sign(f_lo) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            // The score is a step function, so the root is a jump where two
            // residuals swap order. `lo` sits on a fixed side of it, which
            // keeps the KM order (and so the intercept and scale) equivariant.
            (lo, true)
        }
        None => {
            let mut best = (f64::INFINITY, slopes[0]);
            for &s in &slopes {
                let f = score(s)?.abs();
                if f < best.0 {
                    best = (f, s);
                }
            }
            (best.1, false)
        }
    };

    let (score_at, alpha) = gm_eval(sample, slope, &x, m_x)?;
    let beta = vec![alpha, slope];
    let w = weights_at(sample, &beta)?;
    let scale = w.weighted_expectation(sample, |u, _| u.abs());
    Ok(FitResult {
        beta,
        scale,
        objective: score_at.abs(),
        n_candidates_evaluated: evals,
        converged,
        exact_fit: scale == 0.0,
    })
}
