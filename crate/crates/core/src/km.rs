//! Kaplan–Meier weights for censored residuals, written as a redistribution
//! of mass.
//!
//! Each uncensored residual `r_j` keeps its own mass `1/n`; each censored
//! residual `r_i` spreads its `1/n` over the uncensored residuals strictly to
//! its right, proportionally to their KM masses `π_j`. The pairwise masses
//! `π_ij` define a discrete joint law `H*` on `(r_j, x_i)` whose residual
//! marginal is the KM estimator and under which
//! `(1/n) Σ_i E_KM[g(u, x_i) | w_i] = Σ_ij g(r_j, x_i) π_ij`.
//!
//! Conventions:
//! - at tied values uncensored residuals precede censored ones;
//! - censored residuals equal to the sample maximum are treated as uncensored
//!   so that every censored point has somewhere to send its mass;
//! - duplicate uncensored residuals keep separate atoms.

use crate::data::{CensoredSample, ResidualVector};
use crate::error::{Error, Result};

/// Flat list of the nonzero `π_ij`: atom `k` carries mass `mass[k]` at the
/// point `(value[k], x_{row[k]})`, where `value[k] = r_{col[k]}`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Atoms {
    pub row: Vec<u32>,
    pub col: Vec<u32>,
    pub value: Vec<f64>,
    pub mass: Vec<f64>,
}

impl Atoms {
    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    fn push(&mut self, row: usize, col: usize, value: f64, mass: f64) {
        self.row.push(row as u32);
        self.col.push(col as u32);
        self.value.push(value);
        self.mass.push(mass);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RedistributionWeights {
    residuals: Vec<f64>,
    effective: Vec<bool>,
    tail_fixed: Vec<bool>,
    pi: Vec<f64>,
    order: Vec<usize>,
    position: Vec<usize>,
    /// `Σ_{k ∈ M_i} π_k` for censored `i`, zero otherwise.
    tail_mass: Vec<f64>,
    atoms: Atoms,
    cdf_values: Vec<f64>,
    cdf_cum: Vec<f64>,
}

/// One support point of `H*`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointAtom {
    pub residual: f64,
    pub x: Vec<f64>,
    pub mass: f64,
}

/// The discrete joint distribution `H*` of `(u, x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedJointDistribution {
    pub atoms: Vec<JointAtom>,
}

pub fn kaplan_meier(res: &ResidualVector) -> Result<RedistributionWeights> {
    let n = res.r_star.len();
    if res.delta.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: res.delta.len() });
    }
    if res.r_star.iter().any(|r| !r.is_finite()) {
        return Err(Error::NonFinite("residuals"));
    }
    if !res.delta.iter().any(|d| *d) {
        return Err(Error::AllCensored);
    }
    let r = &res.r_star;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| r[a].partial_cmp(&r[b]).expect("finite residuals").then(res.delta[b].cmp(&res.delta[a])));
    let mut position = vec![0; n];
    for (k, &i) in order.iter().enumerate() {
        position[i] = k;
    }

    let max_value = r[order[n - 1]];
    let mut effective = res.delta.clone();
    let mut tail_fixed = vec![false; n];
    for &i in order.iter().rev() {
        if r[i] != max_value {
            break;
        }
        if !effective[i] {
            effective[i] = true;
            tail_fixed[i] = true;
        }
    }

    // Product-limit masses: each uncensored point takes S/(at risk).
    let mut pi = vec![0.0; n];
    let mut surv = 1.0;
    for (k, &i) in order.iter().enumerate() {
        if effective[i] {
            let m = surv / (n - k) as f64;
            pi[i] = m;
            surv -= m;
        }
    }

    let mut tail_mass = vec![0.0; n];
    let mut suffix = 0.0;
    for &i in order.iter().rev() {
        if effective[i] {
            suffix += pi[i];
        } else {
            tail_mass[i] = suffix;
        }
    }

    let inv_n = 1.0 / n as f64;
    let mut atoms = Atoms::default();
    for i in 0..n {
        if effective[i] {
            atoms.push(i, i, r[i], inv_n);
        } else {
            let scale = inv_n / tail_mass[i];
            for &j in &order[position[i] + 1..] {
                if effective[j] {
                    atoms.push(i, j, r[j], pi[j] * scale);
                }
            }
        }
    }

    let mut cdf_values = Vec::new();
    let mut cdf_cum = Vec::new();
    let mut acc = 0.0;
    for &i in &order {
        if effective[i] {
            acc += pi[i];
            cdf_values.push(r[i]);
            cdf_cum.push(acc);
        }
    }

    Ok(RedistributionWeights {
        residuals: r.clone(),
        effective,
        tail_fixed,
        pi,
        order,
        position,
        tail_mass,
        atoms,
        cdf_values,
        cdf_cum,
    })
}

impl RedistributionWeights {
    pub fn n(&self) -> usize {
        self.residuals.len()
    }

    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    /// KM point masses `π_j`, indexed like the residuals.
    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    /// Permutation sorting the residuals ascending.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Indicators after the tail fix.
    pub fn effective_delta(&self) -> &[bool] {
        &self.effective
    }

    /// True when `i` was censored but treated as uncensored because it sits
    /// at the largest residual.
    pub fn is_tail_fixed(&self, i: usize) -> bool {
        self.tail_fixed[i]
    }

    pub fn atoms(&self) -> &Atoms {
        &self.atoms
    }

    /// Nonzero `(i, j, π_ij)` entries.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.atoms.len()).map(|k| (self.atoms.row[k] as usize, self.atoms.col[k] as usize, self.atoms.mass[k]))
    }

    /// Right-continuous KM distribution function `Σ_{r_j ≤ t} π_j`.
    pub fn km_cdf(&self, t: f64) -> f64 {
        let k = self.cdf_values.partition_point(|v| *v <= t);
        if k == 0 {
            0.0
        } else {
            self.cdf_cum[k - 1].min(1.0)
        }
    }

    /// Smallest support point with KM distribution at least 1/2.
    pub fn median(&self) -> f64 {
        let k = self.cdf_cum.partition_point(|c| *c < 0.5 - 1e-12);
        self.cdf_values[k.min(self.cdf_values.len() - 1)]
    }

    /// `E_KM[g(u) | w_i]`: `g(r_i)` for uncensored `i`, otherwise the KM
    /// average of `g` over the uncensored residuals strictly above `r_i`.
    pub fn conditional_expectation(&self, g: impl Fn(f64) -> f64, i: usize) -> f64 {
        if self.effective[i] {
            return g(self.residuals[i]);
        }
        let num: f64 = self.order[self.position[i] + 1..]
            .iter()
            .filter(|&&j| self.effective[j])
            .map(|&j| g(self.residuals[j]) * self.pi[j])
            .sum();
        num / self.tail_mass[i]
    }

    /// `E_{H*}[g(u, x)] = Σ_ij g(r_j, x_i) π_ij`.
    pub fn weighted_expectation(&self, sample: &CensoredSample, g: impl Fn(f64, &[f64]) -> f64) -> f64 {
        let a = &self.atoms;
        (0..a.len()).map(|k| a.mass[k] * g(a.value[k], sample.row(a.row[k] as usize))).sum()
    }

    /// `Σ_ij g(r_j, i) π_ij`, with the row index in place of its covariates.
    pub fn weighted_expectation_rows(&self, g: impl Fn(f64, usize) -> f64) -> f64 {
        let a = &self.atoms;
        (0..a.len()).map(|k| a.mass[k] * g(a.value[k], a.row[k] as usize)).sum()
    }

    pub fn joint(&self, sample: &CensoredSample) -> WeightedJointDistribution {
        WeightedJointDistribution {
            atoms: (0..self.atoms.len())
                .map(|k| JointAtom {
                    residual: self.atoms.value[k],
                    x: sample.row(self.atoms.row[k] as usize).to_vec(),
                    mass: self.atoms.mass[k],
                })
                .collect(),
        }
    }
}
