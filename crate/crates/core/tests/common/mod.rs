//! Independent reference implementations used as test oracles. Nothing here
//! calls into the library's numerical code.
#![allow(dead_code)]

use censreg::CensoredSample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Simple-regression sample `y = a + b x + u`, censored by `N(cmean, 1)`.
/// With `cmean = inf` nothing is censored.
pub fn line_sample(seed: u64, n: usize, a: f64, b: f64, cmean: f64) -> CensoredSample {
    let mut r = rng(seed);
    let nrm = Normal::new(0.0, 1.0).unwrap();
    let (mut y, mut rows, mut d) = (vec![], vec![], vec![]);
    for _ in 0..n {
        let x: f64 = nrm.sample(&mut r);
        let full = a + b * x + nrm.sample(&mut r);
        let c = cmean + nrm.sample(&mut r);
        let obs = full <= c;
        y.push(if obs { full } else { c });
        rows.push(vec![x]);
        d.push(obs);
    }
    if d.iter().all(|v| !v) {
        d[0] = true;
    }
    CensoredSample::from_rows(y, &rows, d, true).unwrap()
}

/// Multiple regression with intercept and `p − 1` normal covariates.
pub fn multi_sample(seed: u64, n: usize, p: usize, cens: f64) -> CensoredSample {
    let mut r = rng(seed);
    let nrm = Normal::new(0.0, 1.0).unwrap();
    let beta: Vec<f64> = (0..p).map(|k| 0.5 + k as f64).collect();
    let (mut y, mut rows, mut d) = (vec![], vec![], vec![]);
    for _ in 0..n {
        let x: Vec<f64> = (1..p).map(|_| nrm.sample(&mut r)).collect();
        let full = beta[0] + x.iter().zip(&beta[1..]).map(|(a, b)| a * b).sum::<f64>() + nrm.sample(&mut r);
        let obs = r.random::<f64>() >= cens;
        let y_star = if obs { full } else { full - r.random::<f64>() * 2.0 };
        y.push(y_star);
        rows.push(x);
        d.push(obs);
    }
    if d.iter().all(|v| !v) {
        d[0] = true;
    }
    CensoredSample::from_rows(y, &rows, d, true).unwrap()
}

pub fn uncensored(s: &CensoredSample) -> CensoredSample {
    CensoredSample::new(s.y().to_vec(), s.design().to_vec(), vec![true; s.n()], s.p(), s.has_intercept()).unwrap()
}

pub fn residuals(s: &CensoredSample, beta: &[f64]) -> Vec<f64> {
    (0..s.n()).map(|i| s.y()[i] - s.row(i).iter().zip(beta).map(|(a, b)| a * b).sum::<f64>()).collect()
}

/// Kaplan–Meier masses from the product-limit formula
/// `Ŝ(t) = Π_{v ≤ t} (1 − d_v / Y_v)` over distinct uncensored values, the
/// jump at `v` split equally among the uncensored points tied at `v`.
/// Censored points at the maximum count as uncensored.
pub fn product_limit(r: &[f64], delta: &[bool]) -> Vec<f64> {
    let n = r.len();
    let max = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let eff: Vec<bool> = (0..n).map(|i| delta[i] || r[i] == max).collect();
    let mut values: Vec<f64> = (0..n).filter(|&i| eff[i]).map(|i| r[i]).collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let mut surv = 1.0;
    let mut pi = vec![0.0; n];
    for v in values {
        let at_risk = r.iter().filter(|&&x| x >= v).count() as f64;
        let tied: Vec<usize> = (0..n).filter(|&i| eff[i] && r[i] == v).collect();
        let next = surv * (1.0 - tied.len() as f64 / at_risk);
        for &i in &tied {
            pi[i] = (surv - next) / tied.len() as f64;
        }
        surv = next;
    }
    pi
}

/// Least squares by modified Gram–Schmidt QR.
pub fn ols(x: &[f64], y: &[f64], p: usize) -> Vec<f64> {
    let n = y.len();
    let mut q: Vec<Vec<f64>> = (0..p).map(|k| (0..n).map(|i| x[i * p + k]).collect()).collect();
    let mut rm = vec![vec![0.0; p]; p];
    for k in 0..p {
        for j in 0..k {
            let d: f64 = (0..n).map(|i| q[j][i] * q[k][i]).sum();
            rm[j][k] = d;
            for i in 0..n {
                q[k][i] -= d * q[j][i];
            }
        }
        let nk = q[k].iter().map(|v| v * v).sum::<f64>().sqrt();
        rm[k][k] = nk;
        for v in q[k].iter_mut() {
            *v /= nk;
        }
    }
    let qty: Vec<f64> = (0..p).map(|k| (0..n).map(|i| q[k][i] * y[i]).sum()).collect();
    let mut b = vec![0.0; p];
    for k in (0..p).rev() {
        b[k] = (qty[k] - (k + 1..p).map(|j| rm[k][j] * b[j]).sum::<f64>()) / rm[k][k];
    }
    b
}

pub fn bisquare_rho(u: f64, c: f64) -> f64 {
    if u.abs() >= c {
        c * c / 6.0
    } else {
        let z = 1.0 - (u / c).powi(2);
        c * c / 6.0 * (1.0 - z * z * z)
    }
}

pub fn bisquare_weight(u: f64, c: f64) -> f64 {
    if u.abs() >= c {
        0.0
    } else {
        (1.0 - (u / c).powi(2)).powi(2)
    }
}

/// Uncensored bisquare M-scale `mean ρ(r/s) = b` by bisection on `s`.
pub fn mscale(r: &[f64], c: f64, b: f64) -> f64 {
    let a = c * c / 6.0;
    let n = r.len() as f64;
    let zeros = r.iter().filter(|v| v.abs() <= 1e-9).count() as f64 / n;
    if zeros > 1.0 - b / a + 1e-12 {
        return 0.0;
    }
    let f = |s: f64| r.iter().map(|v| bisquare_rho(v / s, c)).sum::<f64>() / n - b;
    let (mut lo, mut hi) = (1e-12, 1.0);
    while f(hi) > 0.0 {
        hi *= 2.0;
    }
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Smallest `|r|` order statistic with at least half of the sample at or
/// below it.
pub fn lms_scale(r: &[f64]) -> f64 {
    let mut a: Vec<f64> = r.iter().map(|v| v.abs()).collect();
    a.sort_by(f64::total_cmp);
    a[(a.len() + 1) / 2 - 1]
}

pub fn tau_scale(r: &[f64], c1: f64, b: f64, c2: f64) -> f64 {
    let s = mscale(r, c1, b);
    if s == 0.0 {
        return 0.0;
    }
    s * (r.iter().map(|v| bisquare_rho(v / s, c2)).sum::<f64>() / r.len() as f64).sqrt()
}

/// Classical IRWLS for a bisquare M-regression at fixed scale.
pub fn irwls(s: &CensoredSample, start: &[f64], scale: f64, c: f64) -> Vec<f64> {
    let (n, p) = (s.n(), s.p());
    let mut beta = start.to_vec();
    for _ in 0..2000 {
        let r = residuals(s, &beta);
        let w: Vec<f64> = r.iter().map(|v| bisquare_weight(v / scale, c)).collect();
        let sw: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
        let xw: Vec<f64> = (0..n * p).map(|k| s.design()[k] * sw[k / p]).collect();
        let yw: Vec<f64> = (0..n).map(|i| s.y()[i] * sw[i]).collect();
        let next = ols(&xw, &yw, p);
        let step: f64 = next.iter().zip(&beta).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        beta = next;
        if step < 1e-14 * (1.0 + beta.iter().map(|v| v * v).sum::<f64>().sqrt()) {
            break;
        }
    }
    beta
}

pub fn m_objective(s: &CensoredSample, beta: &[f64], scale: f64, c: f64) -> f64 {
    residuals(s, beta).iter().map(|v| bisquare_rho(v / scale, c)).sum::<f64>() / s.n() as f64
}

/// Exact simple-regression L1 fit: the optimum interpolates two points, so
/// enumerate all pairs.
pub fn l1_exact_line(s: &CensoredSample) -> Vec<f64> {
    let x = s.column(1);
    let y = s.y();
    let mut best = (f64::INFINITY, vec![0.0, 0.0]);
    for i in 0..s.n() {
        for j in i + 1..s.n() {
            if x[i] == x[j] {
                continue;
            }
            let b = (y[j] - y[i]) / (x[j] - x[i]);
            let a = y[i] - b * x[i];
            let obj: f64 = (0..s.n()).map(|k| (y[k] - a - b * x[k]).abs()).sum();
            if obj < best.0 {
                best = (obj, vec![a, b]);
            }
        }
    }
    best.1
}

/// Index of the first minimum.
pub fn argmin(v: &[f64]) -> usize {
    (0..v.len()).fold(0, |b, k| if v[k] < v[b] { k } else { b })
}

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
