//! M-scale and τ-scale of shifted residuals under the joint law `H*`.
//!
//! For an inner shift `γ`, the atoms of `H*` become `t = r_j − γ'x_i` with
//! mass `π_ij`; the M-scale solves `Σ π_ij ρ₁(t/s) = b`.

use crate::data::CensoredSample;
use crate::error::{Error, Result};
use crate::km::{Atoms, RedistributionWeights};
use crate::loss::{LossFunction, S_BISQUARE_C};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleConfig {
    pub rho1: LossFunction,
    /// Right-hand side of the scale equation, `0 < b < sup ρ₁`.
    pub b: f64,
    /// Relative width of the final bisection bracket.
    pub tol: f64,
    pub max_iter: usize,
}

impl ScaleConfig {
    pub fn new(rho1: LossFunction, b: f64) -> Result<Self> {
        let a = rho1.sup();
        if !a.is_finite() {
            return Err(Error::InvalidInput(format!("scale loss must be bounded, got {}", rho1.name())));
        }
        if !(b > 0.0 && b < a) {
            return Err(Error::InvalidInput(format!("scale right-hand side must lie in (0, {a}), got {b}")));
        }
        Ok(Self { rho1, b, tol: 1e-10, max_iter: 200 })
    }

    /// Bisquare with `b/a` given.
    pub fn bisquare(c: f64, b_over_a: f64) -> Result<Self> {
        let rho = LossFunction::bisquare(c)?;
        Self::new(rho, b_over_a * rho.sup())
    }

    /// 50% breakdown bisquare M-scale.
    pub fn s_default() -> Self {
        Self::bisquare(S_BISQUARE_C, 0.5).expect("valid constants")
    }

    /// Jump loss with `b = 1/2`: the scale is a median of absolute residuals.
    pub fn lms() -> Self {
        Self::new(LossFunction::Jump, 0.5).expect("valid constants")
    }

    pub fn b_over_a(&self) -> f64 {
        self.b / self.rho1.sup()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleEstimate {
    pub scale: f64,
    /// No positive root: the mass of exactly-zero residuals exceeds `1 − b/a`.
    pub exact_fit: bool,
    /// The root escaped every bracket; `scale` is a large sentinel.
    pub saturated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauEstimate {
    pub tau: f64,
    pub scale: ScaleEstimate,
}

const SATURATION: f64 = 1e300;

/// Relative size below which a shifted atom counts as exactly zero.
pub const SHIFT_SNAP: f64 = 1e-12;

/// Shifted atoms `t_k = value_k − g[row_k]` for a row shift `g = X γ`.
/// Differences within rounding of the operands are snapped to 0, so exact
/// fits are detected per atom rather than against a sample-wide tolerance.
pub fn shift_atoms(atoms: &Atoms, g: &[f64], out: &mut Vec<f64>) {
    out.clear();
    out.extend(atoms.value.iter().zip(&atoms.row).map(|(v, &r)| {
        let g = g[r as usize];
        let t = v - g;
        if t.abs() <= SHIFT_SNAP * (v.abs() + g.abs()) {
            0.0
        } else {
            t
        }
    }));
}

/// `Σ mass·ρ(t/s)`.
pub fn mean_rho(t: &[f64], mass: &[f64], rho: &LossFunction, s: f64) -> f64 {
    let inv = 1.0 / s;
    t.iter().zip(mass).map(|(t, m)| m * rho.rho(t * inv)).sum()
}

fn zero_mass(t: &[f64], mass: &[f64], zero_tol: f64) -> f64 {
    t.iter().zip(mass).filter(|(t, _)| t.abs() <= zero_tol).map(|(_, m)| m).sum()
}

/// Solves `Σ mass·ρ₁(t/s) = b` for `s`.
pub fn m_scale_values(t: &[f64], mass: &[f64], cfg: &ScaleConfig, zero_tol: f64) -> Result<ScaleEstimate> {
    if t.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("shifted residuals"));
    }
    let a = cfg.rho1.sup();
    let exact = ScaleEstimate { scale: 0.0, exact_fit: true, saturated: false };
    if t.is_empty() || zero_mass(t, mass, zero_tol) > 1.0 - cfg.b / a + 1e-12 {
        return Ok(exact);
    }
    if cfg.rho1 == LossFunction::Jump {
        let s = jump_scale(t, mass, cfg.b);
        return Ok(ScaleEstimate { scale: s, exact_fit: s == 0.0, saturated: false });
    }

    let (mut lo, mut hi) = t.iter().fold((f64::INFINITY, 0.0_f64), |(lo, hi), v| {
        let v = v.abs();
        (if v > zero_tol { lo.min(v) } else { lo }, hi.max(v))
    });
    if !lo.is_finite() {
        return Ok(exact);
    }
    let h = |s: f64| mean_rho(t, mass, &cfg.rho1, s);
    while h(lo) < cfg.b {
        lo *= 0.5;
        if lo < f64::MIN_POSITIVE {
            return Ok(exact);
        }
    }
    while h(hi) > cfg.b {
        hi *= 2.0;
        if hi > SATURATION {
            return Ok(ScaleEstimate { scale: SATURATION, exact_fit: false, saturated: true });
        }
    }
    for _ in 0..cfg.max_iter {
        if hi <= lo * (1.0 + cfg.tol) {
            break;
        }
        let mid = (lo * hi).sqrt();
        if h(mid) > cfg.b {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(ScaleEstimate { scale: (lo * hi).sqrt(), exact_fit: false, saturated: false })
}

/// Smallest `|t|` whose mass-weighted distribution reaches `1 − b`; the
/// lower weighted median when `b = 1/2`.
fn jump_scale(t: &[f64], mass: &[f64], b: f64) -> f64 {
    let mut pairs: Vec<(f64, f64)> = t.iter().map(|v| v.abs()).zip(mass.iter().copied()).collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let target = 1.0 - b - 1e-12;
    let mut acc = 0.0;
    for (v, m) in &pairs {
        acc += m;
        if acc >= target {
            return *v;
        }
    }
    pairs.last().map_or(0.0, |p| p.0)
}

/// Outcome of comparing an unknown scale with a threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparison {
    Below,
    Above,
    Undecided,
}

/// Decides whether the scale that [`m_scale_values`] would return lies
/// strictly below or above `threshold`, using one pass over the atoms.
/// `Undecided` means the two are within solver tolerance and the caller must
/// solve.
pub fn compare_scale(t: &[f64], mass: &[f64], cfg: &ScaleConfig, zero_tol: f64, threshold: f64) -> Comparison {
    if threshold <= 0.0 || !threshold.is_finite() {
        return Comparison::Undecided;
    }
    let a = cfg.rho1.sup();
    let mut zero = 0.0;
    let mut below = 0.0;
    let mut at_most = 0.0;
    let mut h = 0.0;
    let inv = 1.0 / threshold;
    let jump = cfg.rho1 == LossFunction::Jump;
    for (t, m) in t.iter().zip(mass) {
        let v = t.abs();
        if v <= zero_tol {
            zero += m;
        }
        if jump {
            if v < threshold {
                below += m;
            }
            if v <= threshold {
                at_most += m;
            }
        } else {
            h += m * cfg.rho1.rho(t * inv);
        }
    }
    if zero > 1.0 - cfg.b / a + 1e-12 {
        return Comparison::Below;
    }
    if jump {
        let target = 1.0 - cfg.b;
        if below >= target + 1e-9 {
            Comparison::Below
        } else if at_most < target - 1e-9 {
            Comparison::Above
        } else {
            Comparison::Undecided
        }
    } else {
        let margin = 2.0 * cfg.tol * cfg.rho1.log_lipschitz() + 1e-12 * a;
        if h < cfg.b - margin {
            Comparison::Below
        } else if h > cfg.b + margin {
            Comparison::Above
        } else {
            Comparison::Undecided
        }
    }
}

/// `τ = s·sqrt(Σ mass·ρ₂(t/s))` with `s` the M-scale.
pub fn tau_scale_values(
    t: &[f64],
    mass: &[f64],
    cfg: &ScaleConfig,
    rho2: &LossFunction,
    zero_tol: f64,
) -> Result<TauEstimate> {
    let scale = m_scale_values(t, mass, cfg, zero_tol)?;
    if scale.exact_fit {
        return Ok(TauEstimate { tau: 0.0, scale });
    }
    let tau = scale.scale * mean_rho(t, mass, rho2, scale.scale).sqrt();
    Ok(TauEstimate { tau, scale })
}

fn shifted_for(w: &RedistributionWeights, sample: &CensoredSample, gamma: &[f64]) -> Result<Vec<f64>> {
    if gamma.len() != sample.p() {
        return Err(Error::DimensionMismatch { expected: sample.p(), got: gamma.len() });
    }
    if w.n() != sample.n() {
        return Err(Error::DimensionMismatch { expected: sample.n(), got: w.n() });
    }
    let g = sample.fitted(gamma);
    let mut t = Vec::with_capacity(w.atoms().len());
    shift_atoms(w.atoms(), &g, &mut t);
    Ok(t)
}

/// M-scale `S_n(β, γ)` of the residuals behind `w`, shifted by `γ`.
pub fn m_scale(w: &RedistributionWeights, sample: &CensoredSample, gamma: &[f64], cfg: &ScaleConfig) -> Result<ScaleEstimate> {
    let t = shifted_for(w, sample, gamma)?;
    m_scale_values(&t, &w.atoms().mass, cfg, 0.0)
}

/// τ-scale `τ_n(β, γ)`. Requires `ρ₂/sup ρ₂ ≤ ρ₁/sup ρ₁`.
pub fn tau_scale(
    w: &RedistributionWeights,
    sample: &CensoredSample,
    gamma: &[f64],
    cfg: &ScaleConfig,
    rho2: &LossFunction,
) -> Result<TauEstimate> {
    if !crate::loss::dominated_by(rho2, &cfg.rho1) {
        return Err(Error::InvalidInput("tau scale requires rho2 dominated by rho1 after normalization".into()));
    }
    let t = shifted_for(w, sample, gamma)?;
    tau_scale_values(&t, &w.atoms().mass, cfg, rho2, 0.0)
}
