//! Loss functions `ρ` and their scores `ψ = ρ'`.
//!
//! Bisquare losses keep the textbook normalization `sup ρ = c²/6`, so `ψ`
//! is exactly `u(1 − (u/c)²)²` inside `[−c, c]`. Right-hand sides of scale
//! equations are always expressed as fractions of `sup ρ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bisquare constant giving a 50% breakdown M-scale (uncensored reference).
pub const S_BISQUARE_C: f64 = 1.5476;
/// Bisquare constant giving 95% normal efficiency for the MM step.
pub const MM_BISQUARE_C: f64 = 4.685;
/// Bisquare constant giving 95% normal efficiency for the τ-scale.
pub const TAU_BISQUARE_C: f64 = 6.08;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossFunction {
    /// Tukey bisquare with tuning constant `c`.
    Bisquare { c: f64 },
    /// `0` for `|u| < 1`, `1` otherwise. Not differentiable.
    Jump,
    /// `|u|`, with score `sign(u)`.
    Absolute,
    /// `u²`.
    Square,
}

impl LossFunction {
    pub fn bisquare(c: f64) -> Result<Self> {
        if c.is_finite() && c > 0.0 {
            Ok(Self::Bisquare { c })
        } else {
            Err(Error::InvalidInput(format!("bisquare tuning constant must be positive, got {c}")))
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Bisquare { .. } => "bisquare",
            Self::Jump => "jump",
            Self::Absolute => "absolute",
            Self::Square => "square",
        }
    }

    #[inline]
    pub fn rho(&self, u: f64) -> f64 {
        match *self {
            Self::Bisquare { c } => {
                let v = u / c;
                let v2 = v * v;
                if v2 >= 1.0 {
                    c * c / 6.0
                } else {
                    let t = 1.0 - v2;
                    c * c / 6.0 * (1.0 - t * t * t)
                }
            }
            Self::Jump => {
                if u.abs() < 1.0 {
                    0.0
                } else {
                    1.0
                }
            }
            Self::Absolute => u.abs(),
            Self::Square => u * u,
        }
    }

    pub fn psi(&self, u: f64) -> Result<f64> {
        match *self {
            Self::Jump => Err(Error::NotDifferentiable("jump")),
            Self::Absolute => Ok(if u > 0.0 {
                1.0
            } else if u < 0.0 {
                -1.0
            } else {
                0.0
            }),
            _ => Ok(u * self.weight(u)),
        }
    }

    /// `ψ(u)/u`, with its limit at 0. Infinite at 0 for the absolute loss.
    #[inline]
    pub fn weight(&self, u: f64) -> f64 {
        match *self {
            Self::Bisquare { c } => {
                let v = u / c;
                let v2 = v * v;
                if v2 >= 1.0 {
                    0.0
                } else {
                    let t = 1.0 - v2;
                    t * t
                }
            }
            Self::Square => 2.0,
            Self::Absolute => 1.0 / u.abs(),
            Self::Jump => f64::NAN,
        }
    }

    /// `sup_u ρ(u)`; infinite for unbounded losses.
    pub fn sup(&self) -> f64 {
        match *self {
            Self::Bisquare { c } => c * c / 6.0,
            Self::Jump => 1.0,
            Self::Absolute | Self::Square => f64::INFINITY,
        }
    }

    pub fn is_bounded(&self) -> bool {
        self.sup().is_finite()
    }

    pub fn is_differentiable(&self) -> bool {
        !matches!(self, Self::Jump)
    }

    /// `sup_u |u ψ(u)|`: bounds how fast `E ρ(t/s)` moves with `log s`.
    pub fn log_lipschitz(&self) -> f64 {
        match *self {
            Self::Bisquare { c } => c * c * 4.0 / 27.0,
            _ => f64::INFINITY,
        }
    }
}

/// `b = target · sup ρ`.
pub fn calibrate_b(f: &LossFunction, target_bdp: f64) -> Result<f64> {
    if !f.is_bounded() {
        return Err(Error::InvalidInput(format!("{} loss is unbounded", f.name())));
    }
    if !(0.0..1.0).contains(&target_bdp) {
        return Err(Error::InvalidInput(format!("breakdown target must lie in [0, 1), got {target_bdp}")));
    }
    Ok(target_bdp * f.sup())
}

/// `E_Φ[g(u)]` under the standard normal by composite Simpson on `[−12, 12]`.
pub fn normal_expectation(g: impl Fn(f64) -> f64) -> f64 {
    const HALF_WIDTH: f64 = 12.0;
    const INTERVALS: usize = 24_000;
    let h = 2.0 * HALF_WIDTH / INTERVALS as f64;
    let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let f = |u: f64| g(u) * norm * (-0.5 * u * u).exp();
    let mut acc = f(-HALF_WIDTH) + f(HALF_WIDTH);
    for k in 1..INTERVALS {
        let u = -HALF_WIDTH + k as f64 * h;
        acc += if k % 2 == 1 { 4.0 } else { 2.0 } * f(u);
    }
    acc * h / 3.0
}

/// `E_Φ[ρ(u)]`: the consistency right-hand side for normal errors.
pub fn calibrate_consistency(f: &LossFunction) -> f64 {
    normal_expectation(|u| f.rho(u))
}

/// Bisquare constant `c` with `E_Φ[ρ_c]/sup ρ_c = target`.
pub fn bisquare_for_breakdown(target: f64) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidInput(format!("breakdown target must lie in (0, 1), got {target}")));
    }
    let ratio = |c: f64| {
        let f = LossFunction::Bisquare { c };
        calibrate_consistency(&f) / f.sup()
    };
    // ratio decreases in c
    let (mut lo, mut hi) = (1e-2, 50.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if ratio(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-10 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Asymptotic efficiency under normal errors of the location M-estimator with
/// a bisquare score: `(E ψ')² / E ψ²`.
pub fn bisquare_normal_efficiency(c: f64) -> f64 {
    let f = LossFunction::Bisquare { c };
    let dpsi = |u: f64| {
        let v = (u / c) * (u / c);
        if v >= 1.0 {
            0.0
        } else {
            (1.0 - v) * (1.0 - 5.0 * v)
        }
    };
    let a = normal_expectation(dpsi);
    let b = normal_expectation(|u| f.psi(u).unwrap().powi(2));
    a * a / b
}

/// True when `ρ₂/sup ρ₂ ≤ ρ₁/sup ρ₁` on a grid over `[0, 3·max(c)]`.
///
/// Bisquare losses are compared after normalizing their suprema, since
/// rescaling either loss by a constant leaves every estimator unchanged.
pub fn dominated_by(rho2: &LossFunction, rho1: &LossFunction) -> bool {
    if !rho1.is_bounded() || !rho2.is_bounded() {
        return false;
    }
    let span = [rho1, rho2]
        .iter()
        .map(|f| match f {
            LossFunction::Bisquare { c } => *c,
            _ => 1.0,
        })
        .fold(1.0_f64, f64::max)
        * 3.0;
    (0..=3000).all(|k| {
        let u = span * k as f64 / 3000.0;
        rho2.rho(u) / rho2.sup() <= rho1.rho(u) / rho1.sup() + 1e-12
    })
}
