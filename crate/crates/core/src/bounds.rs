//! Population-level sharp bounds on the mean counterfactual outcome under
//! a Q-policy, for each sensitivity model.

use serde::{Deserialize, Serialize};

use crate::coupling::PolicyKind;
use crate::error::{Error, Result};
use crate::tilt::{merged_support, DiscreteDist};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum SensitivityModel {
    /// Outcomes in a known bounded range; equivalent to `OutcomeGap` with
    /// `gamma = 1` after rescaling the outcome to [0, 1].
    BoundedOutcome,
    /// `|nu_a(x, a') - mu_a(x)| <= gamma` for `a' != a`.
    OutcomeGap { gamma: f64 },
    /// `|nu_a(x, a') - mu_a(x)| <= gamma |a' - a|^p`.
    OutcomeGapHolder { gamma: f64, p: f64 },
    /// Propensity odds ratio bounded in `[1/gamma, gamma]`.
    OddsRatio { gamma: f64 },
}

impl SensitivityModel {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            SensitivityModel::BoundedOutcome => true,
            SensitivityModel::OutcomeGap { gamma } => gamma.is_finite() && gamma >= 0.0,
            SensitivityModel::OutcomeGapHolder { gamma, p } => {
                gamma.is_finite() && gamma >= 0.0 && p.is_finite() && p >= 1.0
            }
            SensitivityModel::OddsRatio { gamma } => gamma.is_finite() && gamma >= 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid sensitivity model parameters: {self:?}")))
        }
    }

    pub fn gamma(&self) -> f64 {
        match *self {
            SensitivityModel::BoundedOutcome => 1.0,
            SensitivityModel::OutcomeGap { gamma }
            | SensitivityModel::OutcomeGapHolder { gamma, .. }
            | SensitivityModel::OddsRatio { gamma } => gamma,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionalBound {
    pub center: f64,
    pub lower: f64,
    pub upper: f64,
}

impl ConditionalBound {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, other: &ConditionalBound) -> bool {
        self.lower <= other.lower && other.upper <= self.upper
    }
}

/// Extremes of `E[Y h]` over multipliers `1/gamma <= h <= gamma` with
/// `E[h] = 1`, for a discrete conditional outcome law.
#[derive(Debug, Clone, PartialEq)]
pub struct SharpMultiplier {
    pub quantile_lo: f64,
    pub quantile_hi: f64,
    pub nu_lower: f64,
    pub nu_upper: f64,
    pub mean: f64,
    /// Minimizing multiplier, aligned with the support of the outcome law.
    pub h_lower: Vec<f64>,
    pub h_upper: Vec<f64>,
    /// True when the extreme-tail mass ends strictly inside an atom.
    pub boundary_atom: bool,
}

impl SharpMultiplier {
    /// `(mu - nu_lower, nu_upper - mu)`, the per-arm gaps of the maximal
    /// policy bound.
    pub fn gaps(&self) -> (f64, f64) {
        ((self.mean - self.nu_lower).max(0.0), (self.nu_upper - self.mean).max(0.0))
    }
}

/// `t(x) = sum_a mu(x, a) q(a | x)` on each support point of `x_weights`,
/// and the marginal `tau = sum_x w(x) t(x)`.
pub fn t_and_tau(
    mu: impl Fn(f64, f64) -> f64,
    q_law: impl Fn(f64) -> DiscreteDist,
    x_weights: &DiscreteDist,
) -> (Vec<f64>, f64) {
    let t: Vec<f64> = x_weights.support().iter().map(|&x| q_law(x).expect(|a| mu(x, a))).collect();
    let tau = t.iter().zip(x_weights.mass()).map(|(t, w)| t * w).sum();
    (t, tau)
}

pub fn bounds_maximal_tv(t: f64, tv: f64, gamma_minus: f64, gamma_plus: f64) -> ConditionalBound {
    ConditionalBound { center: t, lower: t - gamma_minus * tv, upper: t + gamma_plus * tv }
}

/// Rank-preserving policy under the Holder-type model: `w_cost` is
/// `W_p^p` between the natural and target laws.
pub fn bounds_monotone_wasserstein(t: f64, w_cost: f64, gamma: f64) -> ConditionalBound {
    ConditionalBound { center: t, lower: t - gamma * w_cost, upper: t + gamma * w_cost }
}

/// Binary treatment with arm-specific gaps `Gamma_a^-`, `Gamma_a^+`.
#[allow(clippy::too_many_arguments)]
pub fn bounds_binary(
    t: f64,
    pi: f64,
    q: f64,
    kind: PolicyKind,
    gamma0m: f64,
    gamma0p: f64,
    gamma1m: f64,
    gamma1p: f64,
) -> Result<ConditionalBound> {
    match kind {
        PolicyKind::Maximal => {
            let gap = (q - pi).abs();
            let (gm, gp) = if q > pi { (gamma1m, gamma1p) } else { (gamma0m, gamma0p) };
            Ok(ConditionalBound { center: t, lower: t - gm * gap, upper: t + gp * gap })
        }
        PolicyKind::Pure => {
            let (w0, w1) = (pi * (1.0 - q), (1.0 - pi) * q);
            Ok(ConditionalBound {
                center: t,
                lower: t - (gamma0m * w0 + gamma1m * w1),
                upper: t + (gamma0p * w0 + gamma1p * w1),
            })
        }
        PolicyKind::RankPreserving => {
            Err(Error::Unsupported("rank-preserving policy is undefined for a binary treatment".into()))
        }
    }
}

/// Greedy solution of the multiplier LP: the extreme `1/(gamma+1)` of the
/// outcome mass receives `gamma`, the rest `1/gamma`, splitting the atom
/// that straddles the boundary.
pub fn sharp_multiplier_bounds(cond_y: &DiscreteDist, gamma: f64) -> Result<SharpMultiplier> {
    if !gamma.is_finite() || gamma < 1.0 {
        return Err(Error::Config(format!("odds-ratio gamma must be >= 1, got {gamma}")));
    }
    let m = 1.0 / (gamma + 1.0);
    let ys = cond_y.support();
    let ps = cond_y.mass();
    let n = ys.len();

    let allocate = |order: &mut dyn Iterator<Item = usize>| {
        let mut h = vec![1.0 / gamma; n];
        let mut left = m;
        let mut split = false;
        for i in order {
            if left <= 0.0 || ps[i] <= 0.0 {
                continue;
            }
            let take = left.min(ps[i]);
            left -= take;
            if take < ps[i] {
                h[i] = (gamma * take + (ps[i] - take) / gamma) / ps[i];
                split = take > 1e-12 * ps[i] && ps[i] - take > 1e-12;
            } else {
                h[i] = gamma;
            }
        }
        (h, split)
    };
    let (h_lower, split_lo) = allocate(&mut (0..n));
    let (h_upper, split_hi) = allocate(&mut (0..n).rev());
    let value = |h: &[f64]| ys.iter().zip(ps).zip(h).map(|((y, p), h)| y * p * h).sum::<f64>();
    let (nu_lower, nu_upper) = if gamma == 1.0 {
        let mu = cond_y.mean();
        (mu, mu)
    } else {
        (value(&h_lower), value(&h_upper))
    };
    Ok(SharpMultiplier {
        quantile_lo: cond_y.quantile(m),
        quantile_hi: cond_y.quantile(gamma * m),
        nu_lower,
        nu_upper,
        mean: cond_y.mean(),
        h_lower,
        h_upper,
        boundary_atom: split_lo || split_hi,
    })
}

/// Maximal policy under the odds-ratio model for a general discrete
/// treatment: `t -/+ sum_a Gamma_a^-/+ (q(a) - pi(a))_+`.
pub fn bounds_odds_ratio_maximal(
    pi: &DiscreteDist,
    q: &DiscreteDist,
    gam_minus: impl Fn(f64) -> f64,
    gam_plus: impl Fn(f64) -> f64,
    t: f64,
) -> ConditionalBound {
    let (mut lo, mut hi) = (0.0, 0.0);
    for a in merged_support(pi, q) {
        let excess = (q.mass_at(a) - pi.mass_at(a)).max(0.0);
        lo += gam_minus(a) * excess;
        hi += gam_plus(a) * excess;
    }
    ConditionalBound { center: t, lower: t - lo, upper: t + hi }
}
