//! Small dense kernels: p is tiny (2–10), so these stay allocation-light and
//! avoid pulling a full matrix type through the hot loops.

use nalgebra::DMatrix;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// Solves the row-major `p × p` system `a·z = rhs` in place by Gaussian
/// elimination with partial pivoting. Returns `None` when a pivot falls below
/// `1e-12` times the largest entry of `a`.
pub fn solve(a: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let p = rhs.len();
    debug_assert_eq!(a.len(), p * p);
    let mut m = a.to_vec();
    let mut z = rhs.to_vec();
    let scale = m.iter().fold(0.0_f64, |s, v| s.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return None;
    }
    let tiny = 1e-12 * scale;
    for col in 0..p {
        let piv = (col..p).max_by(|&i, &j| m[i * p + col].abs().total_cmp(&m[j * p + col].abs()))?;
        if m[piv * p + col].abs() <= tiny {
            return None;
        }
        if piv != col {
            for k in 0..p {
                m.swap(col * p + k, piv * p + k);
            }
            z.swap(col, piv);
        }
        let d = m[col * p + col];
        for r in col + 1..p {
            let f = m[r * p + col] / d;
            if f != 0.0 {
                for k in col..p {
                    m[r * p + k] -= f * m[col * p + k];
                }
                z[r] -= f * z[col];
            }
        }
    }
    for col in (0..p).rev() {
        let s: f64 = (col + 1..p).map(|k| m[col * p + k] * z[k]).sum();
        z[col] = (z[col] - s) / m[col * p + col];
    }
    z.iter().all(|v| v.is_finite()).then_some(z)
}

/// Numerical rank of a row-major `n × p` matrix from its singular values.
pub fn rank(x: &[f64], n: usize, p: usize) -> usize {
    if n == 0 || p == 0 {
        return 0;
    }
    let m = DMatrix::from_row_slice(n, p, x);
    let sv = m.singular_values();
    let top = sv.iter().fold(0.0_f64, |a, b| a.max(*b));
    if top == 0.0 {
        return 0;
    }
    let tol = top * (n.max(p) as f64) * f64::EPSILON * 16.0;
    sv.iter().filter(|s| **s > tol).count()
}

/// Accumulator for weighted normal equations `Σ w x x' γ = Σ w x y`.
#[derive(Debug, Clone)]
pub struct NormalEquations {
    p: usize,
    xtx: Vec<f64>,
    xty: Vec<f64>,
}

impl NormalEquations {
    pub fn new(p: usize) -> Self {
        Self { p, xtx: vec![0.0; p * p], xty: vec![0.0; p] }
    }

    #[inline]
    pub fn add(&mut self, x: &[f64], weight: f64, y: f64) {
        let p = self.p;
        for a in 0..p {
            let wa = weight * x[a];
            self.xty[a] += wa * y;
            for b in a..p {
                self.xtx[a * p + b] += wa * x[b];
            }
        }
    }

    /// Solves the system; if it is singular, retries with `ridge · max_diag`
    /// added to the diagonal.
    pub fn solve(&self, ridge: f64) -> Option<Vec<f64>> {
        let p = self.p;
        let mut a = self.xtx.clone();
        for r in 0..p {
            for c in 0..r {
                a[r * p + c] = a[c * p + r];
            }
        }
        if let Some(x) = solve(&a, &self.xty) {
            return Some(x);
        }
        if ridge <= 0.0 {
            return None;
        }
        let max_diag = (0..p).map(|k| a[k * p + k]).fold(0.0_f64, f64::max);
        for k in 0..p {
            a[k * p + k] += ridge * max_diag;
        }
        solve(&a, &self.xty)
    }
}

/// Ordinary (optionally weighted) least squares on row-major `x`.
pub fn least_squares(x: &[f64], y: &[f64], weights: Option<&[f64]>, p: usize) -> Option<Vec<f64>> {
    let mut ne = NormalEquations::new(p);
    for (i, row) in x.chunks_exact(p).enumerate() {
        ne.add(row, weights.map_or(1.0, |w| w[i]), y[i]);
    }
    ne.solve(0.0)
}

/// Lower median (the `⌈n/2⌉`-th order statistic) of a nonempty slice.
pub fn lower_median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    let k = (v.len() - 1) / 2;
    let (_, m, _) = v.select_nth_unstable_by(k, f64::total_cmp);
    *m
}

/// Median with the usual midpoint convention for even lengths.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
