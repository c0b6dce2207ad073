//! Cross-fit one-step estimators of the bound functionals, their
//! per-observation scores, and Wald intervals for the bound endpoints.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::bounds::SensitivityModel;
use crate::coupling::PolicyKind;
use crate::data::{make_folds, Dataset, TreatmentKind};
use crate::error::{Error, Result};
use crate::nuisance::{fit_binary_nuisances, fit_continuous_nuisances, BinaryFit, ContinuousFit, RegressorSpec};

/// Below this sample variance an endpoint's standard error is reported as 0.
pub const VARIANCE_FLOOR: f64 = 1e-20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Minus,
    Plus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FunctionalTag {
    TauContinuous,
    Xi,
    Theta,
    TauBinary,
    Chi,
    Zeta { arm: u8, side: Side },
}

impl FunctionalTag {
    pub fn name(&self) -> String {
        match self {
            FunctionalTag::TauContinuous | FunctionalTag::TauBinary => "tau".into(),
            FunctionalTag::Xi => "xi".into(),
            FunctionalTag::Theta => "theta".into(),
            FunctionalTag::Chi => "chi".into(),
            FunctionalTag::Zeta { arm, side } => {
                let s = match side {
                    Side::Minus => "minus",
                    Side::Plus => "plus",
                };
                format!("zeta_{arm}_{s}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    pub tag: FunctionalTag,
    pub values: Vec<f64>,
}

impl ScoreVector {
    pub fn mean(&self) -> f64 {
        mean(&self.values)
    }

    /// `sd / sqrt(n)` with the `1/n` variance of the score.
    pub fn std_error(&self) -> f64 {
        std_error(self.values.iter().copied())
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn std_error(vals: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = vals.clone().count() as f64;
    let m = vals.clone().sum::<f64>() / n;
    let var = vals.map(|v| (v - m) * (v - m)).sum::<f64>() / n;
    if var < VARIANCE_FLOOR {
        0.0
    } else {
        (var / n).sqrt()
    }
}

pub fn score_tau_continuous(a: f64, y: f64, delta: f64, alpha: f64, gamma: f64) -> f64 {
    (delta * a).exp() / alpha * (y - gamma) + gamma
}

pub fn score_xi(a: f64, delta: f64, alpha: f64, kappa: f64) -> f64 {
    let w = (delta * a).exp();
    let ind = if w < alpha { 1.0 } else { 0.0 };
    (ind - kappa) * (1.0 - w / alpha)
}

/// `e^{dA}/alpha (A - beta) + beta - A`, factored so that it vanishes
/// exactly when the density ratio is 1.
pub fn score_theta(a: f64, delta: f64, alpha: f64, beta: f64) -> f64 {
    ((delta * a).exp() / alpha - 1.0) * (a - beta)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinaryPoint {
    pub pi: f64,
    pub mu0: f64,
    pub mu1: f64,
}

pub fn score_tau_binary(a: f64, y: f64, delta: f64, p: &BinaryPoint) -> f64 {
    let e = delta.exp();
    let BinaryPoint { pi, mu0, mu1 } = *p;
    let alpha = e * pi + 1.0 - pi;
    // inverse weights only enter on their own arm, so 0/0 never arises at pi in {0, 1}
    let phi0 = if a == 1.0 { mu0 } else { (1.0 - a) / (1.0 - pi) * (y - mu0) + mu0 };
    let phi1 = if a == 0.0 { mu1 } else { a / pi * (y - mu1) + mu1 };
    (e * pi * phi1 + (1.0 - pi) * phi0) / alpha + e * (mu1 - mu0) * (a - pi) / (alpha * alpha)
}

pub fn score_chi(a: f64, delta: f64, pi: f64) -> f64 {
    let e = delta.exp();
    let alpha = e * pi + 1.0 - pi;
    pi * (1.0 - pi) / alpha + ((1.0 - pi).powi(2) - e * pi * pi) * (a - pi) / (alpha * alpha)
}

/// Outcome nuisances of one arm at one covariate value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailPoint {
    pub mu: f64,
    pub gamma_lo: f64,
    pub gamma_hi: f64,
    pub kappa_lo: f64,
    pub kappa_hi: f64,
}

/// Debiased score for the odds-ratio width functionals of one arm.
#[allow(clippy::too_many_arguments)]
pub fn score_zeta(a: f64, y: f64, delta: f64, gamma: f64, pi: f64, arm: u8, side: Side, t: &TailPoint) -> f64 {
    let e = delta.exp();
    let alpha = e * pi + 1.0 - pi;
    let g1 = 1.0 - 1.0 / gamma;
    let g2 = gamma - 1.0 / gamma;
    let (pre, p_arm, ind) = if arm == 1 { ((1.0 - pi) / alpha, pi, a) } else { (pi / alpha, 1.0 - pi, 1.0 - a) };
    let d = ((1.0 - pi).powi(2) - e * pi * pi) * (a - pi) / (alpha * alpha);
    let base = p_arm * t.mu + ind * (y - t.mu);
    match side {
        Side::Plus => {
            let tail =
                p_arm * (t.gamma_hi / (1.0 + gamma) + t.kappa_hi) + ind * ((y - t.gamma_hi).max(0.0) - t.kappa_hi);
            pre * (-g1 * base + g2 * tail) + d * (g1 * (t.gamma_hi - t.mu) + g2 * t.kappa_hi)
        }
        Side::Minus => {
            let tail =
                p_arm * (t.kappa_lo - t.gamma_lo / (1.0 + gamma)) - ind * ((t.gamma_lo - y).max(0.0) - t.kappa_lo);
            pre * (g1 * base + g2 * tail) + d * (g1 * (t.mu - t.gamma_lo) + g2 * t.kappa_lo)
        }
    }
}

fn check_len(data: &Dataset, n: usize) -> Result<()> {
    if data.len() != n {
        return Err(Error::Config(format!("nuisance fit has {n} rows but the dataset has {}", data.len())));
    }
    Ok(())
}

fn check_delta(fit: &ContinuousFit, delta: f64) -> Result<()> {
    if fit.delta != delta {
        return Err(Error::Config(format!("nuisances were fitted at delta={} not {delta}", fit.delta)));
    }
    Ok(())
}

fn finish(tag: FunctionalTag, values: Vec<f64>) -> Result<(f64, ScoreVector)> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("non-finite {} score", tag.name())));
    }
    let s = ScoreVector { tag, values };
    Ok((s.mean(), s))
}

pub fn estimate_tau_continuous(data: &Dataset, fit: &ContinuousFit, delta: f64) -> Result<(f64, ScoreVector)> {
    check_len(data, fit.alpha.len())?;
    check_delta(fit, delta)?;
    let v = data
        .rows()
        .iter()
        .enumerate()
        .map(|(i, r)| score_tau_continuous(r.a, r.y, delta, fit.alpha[i], fit.gamma[i]))
        .collect();
    finish(FunctionalTag::TauContinuous, v)
}

pub fn estimate_xi(data: &Dataset, fit: &ContinuousFit, delta: f64) -> Result<(f64, ScoreVector)> {
    check_len(data, fit.alpha.len())?;
    check_delta(fit, delta)?;
    let v = data.rows().iter().enumerate().map(|(i, r)| score_xi(r.a, delta, fit.alpha[i], fit.kappa[i])).collect();
    finish(FunctionalTag::Xi, v)
}

pub fn estimate_theta(data: &Dataset, fit: &ContinuousFit, delta: f64) -> Result<(f64, ScoreVector)> {
    check_len(data, fit.alpha.len())?;
    check_delta(fit, delta)?;
    if let Some(i) = data.rows().iter().position(|r| r.a < 0.0) {
        return Err(Error::Data(format!(
            "the Wasserstein width needs non-negative treatments (row {} has a < 0)",
            i + 1
        )));
    }
    let v = data.rows().iter().enumerate().map(|(i, r)| score_theta(r.a, delta, fit.alpha[i], fit.beta[i])).collect();
    finish(FunctionalTag::Theta, v)
}

pub fn estimate_binary_tau_chi(
    data: &Dataset,
    fit: &BinaryFit,
    delta: f64,
) -> Result<(f64, f64, ScoreVector, ScoreVector)> {
    check_len(data, fit.pi.len())?;
    let rows = data.rows();
    let tau: Vec<f64> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let p = BinaryPoint { pi: fit.pi[i], mu0: fit.mu0[i], mu1: fit.mu1[i] };
            score_tau_binary(r.a, r.y, delta, &p)
        })
        .collect();
    let chi: Vec<f64> = rows.iter().enumerate().map(|(i, r)| score_chi(r.a, delta, fit.pi[i])).collect();
    let (t, ts) = finish(FunctionalTag::TauBinary, tau)?;
    let (c, cs) = finish(FunctionalTag::Chi, chi)?;
    Ok((t, c, ts, cs))
}

pub fn estimate_zeta(
    data: &Dataset,
    fit: &BinaryFit,
    delta: f64,
    gamma: f64,
    arm: u8,
    side: Side,
) -> Result<(f64, ScoreVector)> {
    check_len(data, fit.pi.len())?;
    if fit.gamma != gamma {
        return Err(Error::Config(format!(
            "tail nuisances were fitted at gamma={} but gamma={gamma} was requested",
            fit.gamma
        )));
    }
    if arm > 1 {
        return Err(Error::Config(format!("arm must be 0 or 1, got {arm}")));
    }
    let tails = &fit.tails[arm as usize];
    let mu = if arm == 1 { &fit.mu1 } else { &fit.mu0 };
    let v = data
        .rows()
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let t = TailPoint {
                mu: mu[i],
                gamma_lo: tails.gamma_lo[i],
                gamma_hi: tails.gamma_hi[i],
                kappa_lo: tails.kappa_lo[i],
                kappa_hi: tails.kappa_hi[i],
            };
            score_zeta(r.a, r.y, delta, gamma, fit.pi[i], arm, side, &t)
        })
        .collect();
    finish(FunctionalTag::Zeta { arm, side }, v)
}

/// One side of a bound: `tau -/+ coef * width`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WidthSource {
    None,
    Xi,
    Theta,
    Chi,
    Zeta { arm: u8, side: Side },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompositionRule {
    pub lower: (WidthSource, f64),
    pub upper: (WidthSource, f64),
}

const SUPPORTED_TABLE: &str = "supported (model, policy, treatment) combinations: \
outcome-gap/maximal/continuous (tau +/- gamma*xi); \
outcome-gap/maximal/binary (tau +/- gamma|e^delta-1|chi); \
outcome-gap-holder/monotone/continuous with p=1 and a>=0 (tau +/- sign(delta) gamma*theta); \
outcome-gap-holder/maximal/binary (same as outcome-gap); \
odds-ratio/maximal/binary (zeta composition); \
bounded/maximal/any (outcome-gap with gamma=1 after rescaling y to [0,1])";

fn unsupported(model: &SensitivityModel, policy: PolicyKind, kind: TreatmentKind) -> Error {
    Error::Unsupported(format!(
        "no estimator for model {model:?} with policy {policy:?} and {kind:?} treatment; {SUPPORTED_TABLE}"
    ))
}

/// The sign table of every supported estimator composition.
pub fn composition_rule(
    model: &SensitivityModel,
    policy: PolicyKind,
    kind: TreatmentKind,
    delta: f64,
) -> Result<CompositionRule> {
    use TreatmentKind::*;
    let sym = |src, c| CompositionRule { lower: (src, c), upper: (src, c) };
    let binary_gap = |g: f64| sym(WidthSource::Chi, g * delta.exp_m1().abs());
    match (*model, policy, kind) {
        (SensitivityModel::OutcomeGap { gamma }, PolicyKind::Maximal, Continuous) => Ok(sym(WidthSource::Xi, gamma)),
        (SensitivityModel::OutcomeGap { gamma }, PolicyKind::Maximal, Binary)
        | (SensitivityModel::OutcomeGapHolder { gamma, .. }, PolicyKind::Maximal, Binary) => Ok(binary_gap(gamma)),
        (SensitivityModel::OutcomeGapHolder { gamma, p }, PolicyKind::RankPreserving, Continuous) if p == 1.0 => {
            let s = if delta > 0.0 {
                1.0
            } else if delta < 0.0 {
                -1.0
            } else {
                0.0
            };
            Ok(sym(WidthSource::Theta, s * gamma))
        }
        (SensitivityModel::OddsRatio { .. }, PolicyKind::Maximal, Binary) => {
            if delta > 0.0 {
                let c = delta.exp_m1();
                Ok(CompositionRule {
                    lower: (WidthSource::Zeta { arm: 1, side: Side::Minus }, c),
                    upper: (WidthSource::Zeta { arm: 1, side: Side::Plus }, c),
                })
            } else if delta < 0.0 {
                let c = -delta.exp_m1();
                Ok(CompositionRule {
                    lower: (WidthSource::Zeta { arm: 0, side: Side::Minus }, c),
                    upper: (WidthSource::Zeta { arm: 0, side: Side::Plus }, c),
                })
            } else {
                Ok(sym(WidthSource::None, 0.0))
            }
        }
        _ => Err(unsupported(model, policy, kind)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Endpoint {
    pub value: f64,
    pub se: f64,
    pub ci: (f64, f64),
}

/// `tau + sign * coef * width` with the SE of the jointly composed score.
pub fn compose_endpoint(tau: &ScoreVector, width: Option<&ScoreVector>, sign: f64, coef: f64, z: f64) -> Endpoint {
    let tau_hat = tau.mean();
    let (value, se) = match width {
        Some(w) if coef != 0.0 => {
            let c = sign * coef;
            let value = tau_hat + c * w.mean();
            let se = std_error(tau.values.iter().zip(&w.values).map(|(t, w)| t + c * w));
            (value, se)
        }
        _ => (tau_hat, tau.std_error()),
    };
    Endpoint { value, se, ci: (value - z * se, value + z * se) }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentEstimate {
    pub name: String,
    pub estimate: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportMeta {
    pub delta: f64,
    pub gamma: f64,
    pub model: SensitivityModel,
    pub policy: PolicyKind,
    pub kind: TreatmentKind,
    pub n: usize,
    pub folds: usize,
    pub seed: u64,
    pub level: f64,
    pub regressor: RegressorSpec,
    pub clip_count: usize,
    pub kappa_empty_count: usize,
    /// Outcome range `(l, u)` used to rescale bounded outcomes.
    pub rescale: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub tau_hat: f64,
    /// Estimated bound width `upper - lower` before any clamping.
    pub width_component: f64,
    pub lower: f64,
    pub upper: f64,
    pub se_lower: f64,
    pub se_upper: f64,
    pub ci_lower: (f64, f64),
    pub ci_upper: (f64, f64),
    pub components: Vec<ComponentEstimate>,
    pub warning: Option<String>,
    pub meta: ReportMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateConfig {
    pub model: SensitivityModel,
    pub policy: PolicyKind,
    pub delta: f64,
    pub folds: usize,
    pub seed: u64,
    pub level: f64,
    pub regressor: RegressorSpec,
}

/// Estimated parts feeding the composition: the tau scores and every
/// width functional the rule asks for.
#[derive(Debug, Clone)]
pub struct BoundParts {
    pub tau: ScoreVector,
    pub widths: Vec<(WidthSource, ScoreVector)>,
    pub clip_count: usize,
    pub kappa_empty_count: usize,
}

impl BoundParts {
    fn width(&self, src: WidthSource) -> Option<&ScoreVector> {
        self.widths.iter().find(|w| w.0 == src).map(|w| &w.1)
    }
}

pub fn z_quantile(level: f64) -> f64 {
    let n = Normal::new(0.0, 1.0).expect("standard normal");
    n.inverse_cdf(0.5 + level / 2.0)
}

/// Applies a composition rule to estimated parts.
pub fn compose_bound_report(
    parts: &BoundParts,
    rule: &CompositionRule,
    level: f64,
    meta: ReportMeta,
) -> Result<BoundReport> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Config(format!("level must lie in (0,1), got {level}")));
    }
    let z = z_quantile(level);
    let side = |(src, c): (WidthSource, f64), sign: f64| -> Result<Endpoint> {
        let w = match src {
            WidthSource::None => None,
            s => Some(parts.width(s).ok_or_else(|| Error::Config(format!("missing width scores for {s:?}")))?),
        };
        Ok(compose_endpoint(&parts.tau, w, sign, c, z))
    };
    let lo = side(rule.lower, -1.0)?;
    let hi = side(rule.upper, 1.0)?;
    let mut components =
        vec![ComponentEstimate { name: "tau".into(), estimate: parts.tau.mean(), se: parts.tau.std_error() }];
    for (_, s) in &parts.widths {
        components.push(ComponentEstimate { name: s.tag.name(), estimate: s.mean(), se: s.std_error() });
    }
    let mut report = BoundReport {
        tau_hat: parts.tau.mean(),
        width_component: hi.value - lo.value,
        lower: lo.value,
        upper: hi.value,
        se_lower: lo.se,
        se_upper: hi.se,
        ci_lower: lo.ci,
        ci_upper: hi.ci,
        components,
        warning: None,
        meta,
    };
    if report.lower > report.upper {
        let mid = 0.5 * (report.lower + report.upper);
        report.lower = mid;
        report.upper = mid;
        report.warning = Some("estimated lower bound exceeded the upper bound; both set to their midpoint".into());
    }
    Ok(report)
}

fn estimate_parts(data: &Dataset, cfg: &EstimateConfig, rule: &CompositionRule) -> Result<BoundParts> {
    let plan = make_folds(data.len(), cfg.folds, cfg.seed)?;
    let needed: Vec<WidthSource> =
        [rule.lower.0, rule.upper.0].into_iter().filter(|s| *s != WidthSource::None).fold(Vec::new(), |mut v, s| {
            if !v.contains(&s) {
                v.push(s);
            }
            v
        });
    match data.kind() {
        TreatmentKind::Continuous => {
            let fit = fit_continuous_nuisances(data, cfg.delta, &plan, &cfg.regressor)?;
            let (_, tau) = estimate_tau_continuous(data, &fit, cfg.delta)?;
            let mut widths = Vec::new();
            for s in needed {
                let sv = match s {
                    WidthSource::Xi => estimate_xi(data, &fit, cfg.delta)?.1,
                    WidthSource::Theta => estimate_theta(data, &fit, cfg.delta)?.1,
                    other => return Err(Error::Config(format!("{other:?} is not a continuous-treatment width"))),
                };
                widths.push((s, sv));
            }
            Ok(BoundParts { tau, widths, clip_count: 0, kappa_empty_count: fit.kappa_empty_count() })
        }
        TreatmentKind::Binary => {
            let tail_gamma = match cfg.model {
                SensitivityModel::OddsRatio { gamma } => gamma,
                _ => 1.0,
            };
            let fit = fit_binary_nuisances(data, &plan, &cfg.regressor, tail_gamma)?;
            let (_, _, tau, chi) = estimate_binary_tau_chi(data, &fit, cfg.delta)?;
            let mut widths = Vec::new();
            for s in needed {
                let sv = match s {
                    WidthSource::Chi => chi.clone(),
                    WidthSource::Zeta { arm, side } => estimate_zeta(data, &fit, cfg.delta, tail_gamma, arm, side)?.1,
                    other => return Err(Error::Config(format!("{other:?} is not a binary-treatment width"))),
                };
                widths.push((s, sv));
            }
            Ok(BoundParts { tau, widths, clip_count: fit.clip_count, kappa_empty_count: 0 })
        }
    }
}

/// Fits nuisances, evaluates scores and composes the bound report.
pub fn estimate_bounds(data: &Dataset, cfg: &EstimateConfig) -> Result<BoundReport> {
    cfg.model.validate()?;
    if !cfg.delta.is_finite() {
        return Err(Error::Config(format!("delta must be finite, got {}", cfg.delta)));
    }
    if !(cfg.level > 0.0 && cfg.level < 1.0) {
        return Err(Error::Config(format!("level must lie in (0,1), got {}", cfg.level)));
    }
    if cfg.policy == PolicyKind::Pure {
        return Err(unsupported(&cfg.model, cfg.policy, data.kind()));
    }
    if cfg.model == SensitivityModel::BoundedOutcome {
        return estimate_bounded(data, cfg);
    }
    let rule = composition_rule(&cfg.model, cfg.policy, data.kind(), cfg.delta)?;
    let parts = estimate_parts(data, cfg, &rule)?;
    let meta = ReportMeta {
        delta: cfg.delta,
        gamma: cfg.model.gamma(),
        model: cfg.model,
        policy: cfg.policy,
        kind: data.kind(),
        n: data.len(),
        folds: cfg.folds,
        seed: cfg.seed,
        level: cfg.level,
        regressor: cfg.regressor,
        clip_count: parts.clip_count,
        kappa_empty_count: parts.kappa_empty_count,
        rescale: None,
    };
    compose_bound_report(&parts, &rule, cfg.level, meta)
}

/// Bounded outcomes: rescale `y` to [0, 1] by its observed range, apply the
/// outcome-gap model with gamma = 1, and map the report back.
fn estimate_bounded(data: &Dataset, cfg: &EstimateConfig) -> Result<BoundReport> {
    let ys = data.outcomes();
    let l = ys.iter().copied().fold(f64::INFINITY, f64::min);
    let u = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if u <= l {
        return Err(Error::Data("bounded-outcome model needs a non-constant outcome".into()));
    }
    let s = u - l;
    let scaled = data.map_outcomes(|y| (y - l) / s);
    let inner = EstimateConfig { model: SensitivityModel::OutcomeGap { gamma: 1.0 }, ..cfg.clone() };
    let mut r = estimate_bounds(&scaled, &inner)?;
    let back = |v: f64| l + s * v;
    r.tau_hat = back(r.tau_hat);
    r.width_component *= s;
    r.lower = back(r.lower);
    r.upper = back(r.upper);
    r.se_lower *= s;
    r.se_upper *= s;
    r.ci_lower = (back(r.ci_lower.0), back(r.ci_lower.1));
    r.ci_upper = (back(r.ci_upper.0), back(r.ci_upper.1));
    if let Some(c) = r.components.iter_mut().find(|c| c.name == "tau") {
        c.estimate = back(c.estimate);
        c.se *= s;
    }
    r.meta.model = SensitivityModel::BoundedOutcome;
    r.meta.rescale = Some((l, u));
    Ok(r)
}
