//! Law-of-the-logarithm normalization and growth regimes for `p = p_n`.
//!
//! The normalized statistic is
//!
//! ```text
//! z = (M_{n,q}^q − n·E|X₁−X₂|^q) / √(Var(|X₁−X₂|^q) · n · ln p)
//! ```
//!
//! which tends to 2 almost surely under the moment, correlation and growth
//! conditions. All logarithms are natural.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moments::MomentProfile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LawStatistic {
    pub m_pow_q: f64,
    pub n: usize,
    pub p: usize,
    pub q: f64,
    /// `n · E|X₁−X₂|^q`.
    pub center: f64,
    /// `√(Var(|X₁−X₂|^q) · n · ln p)`.
    pub scale: f64,
    pub z: f64,
}

pub fn normalized_statistic(m_pow_q: f64, n: usize, p: usize, profile: &MomentProfile) -> Result<LawStatistic> {
    check_np(n, p)?;
    if !(profile.pair_var_q > 0.0 && profile.pair_var_q.is_finite()) {
        return Err(Error::Degenerate(format!(
            "profile pair variance {} is not positive",
            profile.pair_var_q
        )));
    }
    let nf = n as f64;
    let center = nf * profile.pair_mean_q;
    let scale = (profile.pair_var_q * nf * (p as f64).ln()).sqrt();
    Ok(LawStatistic {
        m_pow_q,
        n,
        p,
        q: profile.q,
        center,
        scale,
        z: (m_pow_q - center) / scale,
    })
}

/// Standard normal case: `(M_n² − 2n) / (2√(2n ln p))`.
pub fn gaussian_z(m_sq: f64, n: usize, p: usize) -> Result<f64> {
    check_np(n, p)?;
    let nf = n as f64;
    Ok((m_sq - 2.0 * nf) / (2.0 * (2.0 * nf * (p as f64).ln()).sqrt()))
}

fn check_np(n: usize, p: usize) -> Result<()> {
    if p < 2 {
        return Err(Error::InsufficientRows { rows: p });
    }
    if n == 0 {
        return Err(Error::param("n must be positive"));
    }
    Ok(())
}

/// How the number of points `p` grows with the dimension `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GrowthRegime {
    /// `c1 ≤ p / n^τ ≤ c2` for one fixed `τ`.
    Polynomial { tau: f64, c1: f64, c2: f64 },
    /// `p = round(exp(c · n^β))`, admissible when `β < α/(2−α)`.
    Exponential { alpha: f64, beta: f64, c: f64 },
}

impl GrowthRegime {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Polynomial { tau, c1, c2 } => {
                if !(tau > 0.0 && tau.is_finite()) {
                    return Err(Error::Regime(format!("tau > 0 violated (tau = {tau})")));
                }
                if !(c1 > 0.0 && c1 <= c2 && c2.is_finite()) {
                    return Err(Error::Regime(format!("0 < c1 <= c2 violated (c1 = {c1}, c2 = {c2})")));
                }
            }
            Self::Exponential { alpha, beta, c } => {
                if !(alpha > 0.0 && alpha <= 0.5) {
                    return Err(Error::Regime(format!("0 < alpha <= 1/2 violated (alpha = {alpha})")));
                }
                if !(beta > 0.0) {
                    return Err(Error::Regime(format!("beta > 0 violated (beta = {beta})")));
                }
                let limit = alpha / (2.0 - alpha);
                if beta >= limit {
                    return Err(Error::Regime(format!(
                        "beta < alpha/(2-alpha) violated: {beta} >= {limit}"
                    )));
                }
                if !(c > 0.0 && c.is_finite()) {
                    return Err(Error::Regime(format!("c > 0 violated (c = {c})")));
                }
            }
        }
        Ok(())
    }
}

/// `(p, n)` pairs along a regime. Polynomial regimes use
/// `p = round(√(c1·c2)·n^τ)` (half up), moved to the nearest integer inside
/// the band `[c1·n^τ, c2·n^τ]` if rounding left it. Exponential regimes use
/// `p = round(exp(c·n^β))`. Every `p` is at least 2.
pub fn regime_sequence(regime: &GrowthRegime, n_values: &[usize]) -> Result<Vec<(usize, usize)>> {
    regime.validate()?;
    if n_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param("n values must be strictly increasing"));
    }
    n_values
        .iter()
        .map(|&n| {
            if n == 0 {
                return Err(Error::param("n values must be positive"));
            }
            let nf = n as f64;
            let p = match *regime {
                GrowthRegime::Polynomial { tau, c1, c2 } => {
                    let scale = nf.powf(tau);
                    let (lo, hi) = (c1 * scale, c2 * scale);
                    let mut p = ((c1 * c2).sqrt() * scale + 0.5).floor();
                    if p < lo {
                        p = lo.ceil();
                    }
                    if p > hi {
                        p = hi.floor();
                    }
                    if p < 2.0 {
                        p = 2.0;
                    }
                    if p < lo || p > hi {
                        return Err(Error::Regime(format!(
                            "no integer p >= 2 satisfies {c1} <= p/n^{tau} <= {c2} at n = {n}"
                        )));
                    }
                    p
                }
                GrowthRegime::Exponential { beta, c, .. } => ((c * nf.powf(beta)).exp() + 0.5).floor().max(2.0),
            };
            if !(p < usize::MAX as f64) {
                return Err(Error::Regime(format!("p overflows at n = {n}")));
            }
            Ok((p as usize, n))
        })
        .collect()
}
