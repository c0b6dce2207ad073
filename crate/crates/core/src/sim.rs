//! Data-generating processes, quadrature ground truths, the pure-vs-maximal
//! truth grid, and second-order remainder probes.

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::bounds::{
    bounds_binary, bounds_odds_ratio_maximal, sharp_multiplier_bounds, ConditionalBound, SensitivityModel,
};
use crate::coupling::{stream_id, tv_distance, wasserstein_line, PolicyKind, Quantile, RngStream, TiltedUniformLaw};
use crate::data::{Dataset, Observation, TreatmentKind};
use crate::error::{Error, Result};
use crate::estimators::{score_chi, score_tau_binary, score_tau_continuous, score_xi, BinaryPoint, Side};
use crate::quad::{integrate_unit, simpson, try_integrate_unit};
use crate::tilt::{incremental_propensity, tilt_discrete, DiscreteDist};

/// Outcome noise scale of the motivating design.
pub const MOTIVATING_NOISE_SD: f64 = 0.25;

/// Nodes used when integrating over a continuous treatment.
const TREATMENT_NODES: usize = 1001;

const PURPOSE_X: u16 = 1;
const PURPOSE_A: u16 = 2;
const PURPOSE_Y: u16 = 3;

#[derive(Debug, Clone, PartialEq)]
pub enum ContinuousTreatment {
    /// `A` in {0, 1} with `P[A = 1] = p`, independent of `X`.
    TwoPoint { p: f64 },
    /// `A | X = x` on [0, 1] with density proportional to
    /// `exp(slope (2x - 1) a)`.
    TiltedUniform { slope: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum DgpSpec {
    /// `X ~ U(0,1)`, `A | X ~ Bern(X)`, `Y = (2A - 1) X + N(0, 0.25^2)`.
    Motivating { n: usize, seed: u64 },
    /// `X ~ U(0,1)` unused by the laws, `A ~ Bern(propensity)`,
    /// `Y | A = a ~ outcome_a`.
    BinaryCustom { n: usize, seed: u64, propensity: f64, outcome0: DiscreteDist, outcome1: DiscreteDist },
    /// `X ~ U(0,1)`, `A | X` from `treatment`,
    /// `Y = coef_a A + coef_x X + N(0, noise_sd^2)`.
    ContinuousCustom { n: usize, seed: u64, treatment: ContinuousTreatment, coef_a: f64, coef_x: f64, noise_sd: f64 },
}

/// Law of the treatment given the covariate.
#[derive(Debug, Clone, PartialEq)]
pub enum TreatmentLaw {
    Discrete(DiscreteDist),
    Tilted(TiltedUniformLaw),
}

impl TreatmentLaw {
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        match self {
            TreatmentLaw::Discrete(d) => d.expect(f),
            TreatmentLaw::Tilted(t) => simpson(|a| f(a) * t.pdf(a), t.lo, t.hi, TREATMENT_NODES),
        }
    }

    /// Expectations of `f` over `A < cut` and `A >= cut`.
    pub fn expect_split(&self, f: impl Fn(f64) -> f64, cut: f64) -> (f64, f64) {
        match self {
            TreatmentLaw::Discrete(d) => {
                let lo = d.iter().filter(|p| p.0 < cut).map(|(a, m)| m * f(a)).sum();
                let hi = d.iter().filter(|p| p.0 >= cut).map(|(a, m)| m * f(a)).sum();
                (lo, hi)
            }
            TreatmentLaw::Tilted(t) => {
                let c = cut.clamp(t.lo, t.hi);
                let g = |a: f64| f(a) * t.pdf(a);
                let lo = if c > t.lo { simpson(g, t.lo, c, TREATMENT_NODES) } else { 0.0 };
                let hi = if c < t.hi { simpson(g, c, t.hi, TREATMENT_NODES) } else { 0.0 };
                (lo, hi)
            }
        }
    }

    pub fn tilt(&self, delta: f64) -> Result<TreatmentLaw> {
        Ok(match self {
            TreatmentLaw::Discrete(d) => TreatmentLaw::Discrete(tilt_discrete(d, delta)?),
            TreatmentLaw::Tilted(t) => TreatmentLaw::Tilted(TiltedUniformLaw { delta: t.delta + delta, ..*t }),
        })
    }

    pub fn quantile(&self, v: f64) -> f64 {
        match self {
            TreatmentLaw::Discrete(d) => d.quantile(v),
            TreatmentLaw::Tilted(t) => t.quantile(v),
        }
    }

    /// `E[e^{dA}]`.
    pub fn alpha(&self, delta: f64) -> f64 {
        self.expect(|a| (delta * a).exp())
    }

    /// Total variation to the tilted law: `E[(1 - e^{dA}/alpha)_+]`.
    pub fn tv_to_tilt(&self, delta: f64) -> Result<f64> {
        if delta == 0.0 {
            return Ok(0.0);
        }
        if let TreatmentLaw::Discrete(d) = self {
            return Ok(tv_distance(d, &tilt_discrete(d, delta)?));
        }
        let alpha = self.alpha(delta);
        let cut = alpha.ln() / delta;
        let (lo, hi) = self.expect_split(|a| (1.0 - (delta * a).exp() / alpha).max(0.0), cut);
        Ok(lo + hi)
    }

    /// `W_p^p` to the tilted law.
    pub fn wasserstein_pp_to_tilt(&self, delta: f64, p: f64) -> Result<f64> {
        let q = self.tilt(delta)?;
        Ok(match (self, &q) {
            (TreatmentLaw::Discrete(a), TreatmentLaw::Discrete(b)) => wasserstein_line(a, b, |d| d.powf(p)),
            _ => integrate_unit(|u| (self.quantile(u) - q.quantile(u)).abs().powf(p)),
        })
    }

    /// `P[A != d]` when `d` is drawn independently from the tilted law.
    pub fn pure_mismatch(&self, delta: f64) -> Result<f64> {
        Ok(match self {
            TreatmentLaw::Discrete(d) => {
                let q = tilt_discrete(d, delta)?;
                1.0 - d.iter().map(|(a, m)| m * q.mass_at(a)).sum::<f64>()
            }
            TreatmentLaw::Tilted(_) => 1.0,
        })
    }
}

/// Law of the outcome given covariate and treatment.
#[derive(Debug, Clone, PartialEq)]
pub enum OutcomeLaw {
    Normal { mean: f64, sd: f64 },
    Discrete(DiscreteDist),
}

impl OutcomeLaw {
    pub fn mean(&self) -> f64 {
        match self {
            OutcomeLaw::Normal { mean, .. } => *mean,
            OutcomeLaw::Discrete(d) => d.mean(),
        }
    }

    /// `(mu - nu^-, nu^+ - mu)`: the sharp odds-ratio gaps at `gamma`.
    pub fn gaps(&self, gamma: f64) -> Result<(f64, f64)> {
        match self {
            OutcomeLaw::Normal { sd, .. } => {
                if gamma < 1.0 {
                    return Err(Error::Config(format!("odds-ratio gamma must be >= 1, got {gamma}")));
                }
                if gamma == 1.0 || *sd == 0.0 {
                    return Ok((0.0, 0.0));
                }
                // the quantile terms cancel, leaving the density at the quantile
                let n = Normal::new(0.0, 1.0).expect("standard normal");
                let z = n.inverse_cdf(gamma / (1.0 + gamma));
                let g = sd * (gamma - 1.0 / gamma) * n.pdf(z);
                Ok((g, g))
            }
            OutcomeLaw::Discrete(d) => Ok(sharp_multiplier_bounds(d, gamma)?.gaps()),
        }
    }
}

impl DgpSpec {
    /// Named designs available from the command line.
    pub fn from_name(name: &str, n: usize, seed: u64) -> Result<Self> {
        match name {
            "motivating" => Ok(DgpSpec::Motivating { n, seed }),
            other => Err(Error::Config(format!("unknown design {other:?}; available: motivating"))),
        }
    }

    pub fn n(&self) -> usize {
        match self {
            DgpSpec::Motivating { n, .. } | DgpSpec::BinaryCustom { n, .. } | DgpSpec::ContinuousCustom { n, .. } => *n,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            DgpSpec::Motivating { seed, .. }
            | DgpSpec::BinaryCustom { seed, .. }
            | DgpSpec::ContinuousCustom { seed, .. } => *seed,
        }
    }

    pub fn kind(&self) -> TreatmentKind {
        match self {
            DgpSpec::ContinuousCustom { .. } => TreatmentKind::Continuous,
            _ => TreatmentKind::Binary,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            DgpSpec::Motivating { .. } => true,
            DgpSpec::BinaryCustom { propensity, .. } => (0.0..=1.0).contains(propensity),
            DgpSpec::ContinuousCustom { treatment, noise_sd, coef_a, coef_x, .. } => {
                let t_ok = match treatment {
                    ContinuousTreatment::TwoPoint { p } => (0.0..=1.0).contains(p),
                    ContinuousTreatment::TiltedUniform { slope } => slope.is_finite(),
                };
                t_ok && *noise_sd >= 0.0 && coef_a.is_finite() && coef_x.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid design parameters: {self:?}")))
        }
    }

    /// `P[A = 1 | X = x]` for binary designs.
    pub fn propensity(&self, x: f64) -> Option<f64> {
        match self {
            DgpSpec::Motivating { .. } => Some(x),
            DgpSpec::BinaryCustom { propensity, .. } => Some(*propensity),
            DgpSpec::ContinuousCustom { .. } => None,
        }
    }

    pub fn treatment_law(&self, x: f64) -> TreatmentLaw {
        match self {
            DgpSpec::Motivating { .. } => TreatmentLaw::Discrete(DiscreteDist::bernoulli(x).expect("x in [0,1]")),
            DgpSpec::BinaryCustom { propensity, .. } => {
                TreatmentLaw::Discrete(DiscreteDist::bernoulli(*propensity).expect("validated propensity"))
            }
            DgpSpec::ContinuousCustom { treatment, .. } => match treatment {
                ContinuousTreatment::TwoPoint { p } => {
                    TreatmentLaw::Discrete(DiscreteDist::bernoulli(*p).expect("validated probability"))
                }
                ContinuousTreatment::TiltedUniform { slope } => {
                    TreatmentLaw::Tilted(TiltedUniformLaw { lo: 0.0, hi: 1.0, delta: slope * (2.0 * x - 1.0) })
                }
            },
        }
    }

    pub fn outcome_law(&self, x: f64, a: f64) -> OutcomeLaw {
        match self {
            DgpSpec::Motivating { .. } => OutcomeLaw::Normal { mean: (2.0 * a - 1.0) * x, sd: MOTIVATING_NOISE_SD },
            DgpSpec::BinaryCustom { outcome0, outcome1, .. } => {
                OutcomeLaw::Discrete(if a == 1.0 { outcome1.clone() } else { outcome0.clone() })
            }
            DgpSpec::ContinuousCustom { coef_a, coef_x, noise_sd, .. } => {
                OutcomeLaw::Normal { mean: coef_a * a + coef_x * x, sd: *noise_sd }
            }
        }
    }

    /// `E[Y | X = x, A = a]`.
    pub fn mu(&self, x: f64, a: f64) -> f64 {
        self.outcome_law(x, a).mean()
    }

    /// Range of the outcome when it is bounded.
    fn outcome_range(&self) -> Option<(f64, f64)> {
        match self {
            DgpSpec::BinaryCustom { outcome0, outcome1, .. } => {
                let (a, b) = (outcome0.hull(), outcome1.hull());
                Some((a.0.min(b.0), a.1.max(b.1)))
            }
            _ => None,
        }
    }
}

fn draw_normal(rng: &mut RngStream) -> f64 {
    use rand::Rng;
    rng.sample(rand_distr::StandardNormal)
}

/// Seeded draw of `n` rows. Each of X, A and the outcome noise comes from
/// its own stream.
pub fn simulate(spec: &DgpSpec) -> Result<Dataset> {
    spec.validate()?;
    let n = spec.n();
    if n == 0 {
        return Err(Error::Config("sample size must be positive".into()));
    }
    let seed = spec.seed();
    let mut rx = RngStream::new(seed, stream_id(0, PURPOSE_X, 0));
    let mut ra = RngStream::new(seed, stream_id(0, PURPOSE_A, 0));
    let mut ry = RngStream::new(seed, stream_id(0, PURPOSE_Y, 0));
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let x = rx.uniform();
        let a = spec.treatment_law(x).quantile(ra.uniform());
        let y = match spec.outcome_law(x, a) {
            OutcomeLaw::Normal { mean, sd } => mean + sd * draw_normal(&mut ry),
            OutcomeLaw::Discrete(d) => d.quantile(ry.uniform()),
        };
        rows.push(Observation { x: vec![x], a, y });
    }
    Dataset::new(rows, spec.kind())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Functional {
    /// Mean outcome under the tilted target law.
    Tau,
    /// `E[pi (1 - pi) / (e^d pi + 1 - pi)]`, binary designs only.
    Chi,
    /// Expected total variation between natural and tilted laws.
    Xi,
    /// `E[beta(X) - E(A | X)]`, the signed expected mean shift.
    Theta,
    /// Odds-ratio width functional of one arm, binary designs only.
    Zeta { arm: u8, side: Side },
    /// `gamma` times the expected pure-policy mismatch probability.
    PureHalfWidth,
    /// `gamma` times the expected total variation.
    MaximalHalfWidth,
}

fn binary_parts(dgp: &DgpSpec, x: f64, delta: f64) -> Result<(f64, f64, f64)> {
    let pi =
        dgp.propensity(x).ok_or_else(|| Error::Unsupported("functional defined for binary designs only".into()))?;
    let alpha = delta.exp() * pi + 1.0 - pi;
    Ok((pi, incremental_propensity(pi, delta), alpha))
}

fn conditional_functional(dgp: &DgpSpec, f: Functional, delta: f64, gamma: f64, x: f64) -> Result<f64> {
    let law = dgp.treatment_law(x);
    Ok(match f {
        Functional::Tau => law.tilt(delta)?.expect(|a| dgp.mu(x, a)),
        Functional::Chi => {
            let (pi, _, alpha) = binary_parts(dgp, x, delta)?;
            pi * (1.0 - pi) / alpha
        }
        Functional::Xi => law.tv_to_tilt(delta)?,
        Functional::Theta => law.tilt(delta)?.expect(|a| a) - law.expect(|a| a),
        Functional::Zeta { arm, side } => {
            let (pi, _, alpha) = binary_parts(dgp, x, delta)?;
            let (gm, gp) = dgp.outcome_law(x, f64::from(arm)).gaps(gamma)?;
            let gap = if side == Side::Plus { gp } else { gm };
            gap * pi * (1.0 - pi) / alpha
        }
        Functional::PureHalfWidth => gamma * law.pure_mismatch(delta)?,
        Functional::MaximalHalfWidth => gamma * law.tv_to_tilt(delta)?,
    })
}

/// Population value of a functional by quadrature over `x` in [0, 1].
pub fn truth_by_quadrature(dgp: &DgpSpec, f: Functional, delta: f64, gamma: f64) -> Result<f64> {
    if !delta.is_finite() || !gamma.is_finite() {
        return Err(Error::Config("delta and gamma must be finite".into()));
    }
    dgp.validate()?;
    try_integrate_unit(|x| conditional_functional(dgp, f, delta, gamma, x))
}

/// Sharp conditional bound at covariate value `x`.
pub fn conditional_bound(
    dgp: &DgpSpec,
    model: &SensitivityModel,
    policy: PolicyKind,
    delta: f64,
    x: f64,
) -> Result<ConditionalBound> {
    model.validate()?;
    let law = dgp.treatment_law(x);
    let t = law.tilt(delta)?.expect(|a| dgp.mu(x, a));
    let flat_gap = |g: f64| (g, g, g, g);
    let unsupported =
        || Error::Unsupported(format!("no population bound for model {model:?} with policy {policy:?} on this design"));
    if let Some(pi) = dgp.propensity(x) {
        let q = incremental_propensity(pi, delta);
        let g = match *model {
            SensitivityModel::OutcomeGap { gamma } | SensitivityModel::OutcomeGapHolder { gamma, .. } => {
                flat_gap(gamma)
            }
            SensitivityModel::BoundedOutcome => {
                let (l, u) = dgp.outcome_range().ok_or_else(unsupported)?;
                flat_gap(u - l)
            }
            SensitivityModel::OddsRatio { gamma } => {
                let (g0m, g0p) = dgp.outcome_law(x, 0.0).gaps(gamma)?;
                let (g1m, g1p) = dgp.outcome_law(x, 1.0).gaps(gamma)?;
                (g0m, g0p, g1m, g1p)
            }
        };
        return bounds_binary(t, pi, q, policy, g.0, g.1, g.2, g.3);
    }
    let half = |w: f64| ConditionalBound { center: t, lower: t - w, upper: t + w };
    match (*model, policy) {
        (SensitivityModel::OutcomeGap { gamma }, PolicyKind::Maximal) => Ok(half(gamma * law.tv_to_tilt(delta)?)),
        (SensitivityModel::OutcomeGap { gamma }, PolicyKind::Pure) => Ok(half(gamma * law.pure_mismatch(delta)?)),
        (SensitivityModel::OutcomeGapHolder { gamma, p }, PolicyKind::RankPreserving) => {
            Ok(half(gamma * law.wasserstein_pp_to_tilt(delta, p)?))
        }
        (SensitivityModel::OddsRatio { gamma }, PolicyKind::Maximal) => match &law {
            TreatmentLaw::Discrete(d) => {
                let q = tilt_discrete(d, delta)?;
                let gaps: Vec<(f64, (f64, f64))> =
                    d.support().iter().map(|&a| Ok((a, dgp.outcome_law(x, a).gaps(gamma)?))).collect::<Result<_>>()?;
                let find = |a: f64| gaps.iter().find(|g| g.0 == a).map(|g| g.1).unwrap_or((0.0, 0.0));
                Ok(bounds_odds_ratio_maximal(d, &q, |a| find(a).0, |a| find(a).1, t))
            }
            TreatmentLaw::Tilted(_) => Err(unsupported()),
        },
        _ => Err(unsupported()),
    }
}

/// Marginal sharp bound: the conditional bound integrated over `x`.
pub fn population_bounds(
    dgp: &DgpSpec,
    model: &SensitivityModel,
    policy: PolicyKind,
    delta: f64,
) -> Result<ConditionalBound> {
    dgp.validate()?;
    Ok(ConditionalBound {
        center: try_integrate_unit(|x| Ok::<_, Error>(conditional_bound(dgp, model, policy, delta, x)?.center))?,
        lower: try_integrate_unit(|x| Ok::<_, Error>(conditional_bound(dgp, model, policy, delta, x)?.lower))?,
        upper: try_integrate_unit(|x| Ok::<_, Error>(conditional_bound(dgp, model, policy, delta, x)?.upper))?,
    })
}

/// `start, start + step, ...` with the endpoint included when the grid
/// lands within half a step of it.
pub fn delta_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(start.is_finite() && stop.is_finite() && step.is_finite()) || step <= 0.0 || stop < start {
        return Err(Error::Config(format!("invalid grid {start}:{stop}:{step}")));
    }
    let m = ((stop - start) / step + 0.5 - 1e-9).floor() as usize;
    Ok((0..=m).map(|i| start + i as f64 * step).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridRow {
    pub delta: f64,
    pub gamma: f64,
    pub policy: PolicyKind,
    pub lower: f64,
    pub upper: f64,
    pub tau: f64,
}

/// Population bounds over a (delta, gamma, policy) grid, in grid order.
pub fn truth_grid(
    dgp: &DgpSpec,
    deltas: &[f64],
    gammas: &[f64],
    policies: &[PolicyKind],
    model: impl Fn(f64) -> SensitivityModel + Sync,
) -> Result<Vec<GridRow>> {
    let cells: Vec<(f64, f64, PolicyKind)> = deltas
        .iter()
        .flat_map(|&d| gammas.iter().flat_map(move |&g| policies.iter().map(move |&p| (d, g, p))))
        .collect();
    cells
        .par_iter()
        .map(|&(delta, gamma, policy)| {
            let b = population_bounds(dgp, &model(gamma), policy, delta)?;
            Ok(GridRow { delta, gamma, policy, lower: b.lower, upper: b.upper, tau: b.center })
        })
        .collect()
}

/// Pure and maximal policy bounds for the motivating design on
/// `delta in [0, 3]` (step 0.05) and `gamma in {0.5, 2}`.
pub fn figure1_grid() -> Result<Vec<GridRow>> {
    let deltas = delta_grid(0.0, 3.0, 0.05)?;
    truth_grid(
        &DgpSpec::Motivating { n: 0, seed: 0 },
        &deltas,
        &[0.5, 2.0],
        &[PolicyKind::Pure, PolicyKind::Maximal],
        |gamma| SensitivityModel::OutcomeGap { gamma },
    )
}

/// How the total-variation score's correction term is weighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KappaForm {
    /// `E[e^{dA} 1(e^{dA} < alpha) | X] / alpha`, as used by the estimator.
    Weighted,
    /// `E[e^{dA} | X, e^{dA} < alpha]`.
    Conditional,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProbeKind {
    TauBinary,
    Chi,
    TauContinuous,
    Xi(KappaForm),
    /// Quantile-perturbation term of the partial-moment nuisance for a
    /// standard normal outcome.
    PartialMoment {
        gamma: f64,
        side: Side,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeResult {
    pub eps: Vec<f64>,
    pub bias: Vec<f64>,
    pub slope: f64,
}

/// Least-squares slope of `log|bias|` on `log eps`.
pub fn loglog_slope(eps: &[f64], bias: &[f64]) -> f64 {
    let xs: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = bias.iter().map(|b| b.abs().ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Design used by the continuous-treatment probes.
pub fn probe_continuous_design() -> DgpSpec {
    DgpSpec::ContinuousCustom {
        n: 0,
        seed: 0,
        treatment: ContinuousTreatment::TiltedUniform { slope: 1.0 },
        coef_a: 1.0,
        coef_x: 1.0,
        noise_sd: 0.25,
    }
}

fn probe_bias(kind: ProbeKind, eps: f64, delta: f64) -> Result<f64> {
    // smooth perturbations; the propensity one vanishes at x = 0 and x = 1
    let h_pi = |x: f64| x * (1.0 - x) * (3.0 * x).sin();
    let h_mu = |x: f64| (2.0 * x).cos();
    match kind {
        ProbeKind::TauBinary | ProbeKind::Chi => {
            let dgp = DgpSpec::Motivating { n: 0, seed: 0 };
            let f = if kind == ProbeKind::TauBinary { Functional::Tau } else { Functional::Chi };
            let truth = truth_by_quadrature(&dgp, f, delta, 1.0)?;
            let est = integrate_unit(|x| {
                let pi = x;
                let p = BinaryPoint {
                    pi: pi + eps * h_pi(x),
                    mu0: dgp.mu(x, 0.0) + eps * h_mu(x),
                    mu1: dgp.mu(x, 1.0) + eps * h_mu(x),
                };
                let mut s = 0.0;
                for (a, w) in [(0.0, 1.0 - pi), (1.0, pi)] {
                    if w > 0.0 {
                        let v = if kind == ProbeKind::TauBinary {
                            score_tau_binary(a, dgp.mu(x, a), delta, &p)
                        } else {
                            score_chi(a, delta, p.pi)
                        };
                        s += w * v;
                    }
                }
                s
            });
            Ok(est - truth)
        }
        ProbeKind::TauContinuous => {
            let dgp = probe_continuous_design();
            let truth = truth_by_quadrature(&dgp, Functional::Tau, delta, 1.0)?;
            let est = integrate_unit(|x| {
                let law = dgp.treatment_law(x);
                let alpha = law.alpha(delta) * (1.0 + eps * h_mu(x));
                let gamma = law.tilt(delta).expect("finite tilt").expect(|a| dgp.mu(x, a)) + eps * (3.0 * x).sin();
                law.expect(|a| score_tau_continuous(a, dgp.mu(x, a), delta, alpha, gamma))
            });
            Ok(est - truth)
        }
        ProbeKind::Xi(form) => {
            if delta == 0.0 {
                return Err(Error::Config("the total-variation probe needs delta != 0".into()));
            }
            let dgp = probe_continuous_design();
            let truth = truth_by_quadrature(&dgp, Functional::Xi, delta, 1.0)?;
            let est = integrate_unit(|x| {
                let law = dgp.treatment_law(x);
                let alpha = law.alpha(delta);
                let w = |a: f64| (delta * a).exp();
                let cut = alpha.ln() / delta;
                let (lo, hi) = law.expect_split(w, cut);
                let (plo, phi) = law.expect_split(|_| 1.0, cut);
                let (below_w, below_p) = if delta > 0.0 { (lo, plo) } else { (hi, phi) };
                let kappa = match form {
                    KappaForm::Weighted => below_w / alpha,
                    KappaForm::Conditional => below_w / below_p,
                };
                let a_t = alpha * (1.0 + eps * h_mu(x));
                let k_t = kappa + eps * (3.0 * x).sin();
                let (slo, shi) = law.expect_split(|a| score_xi(a, delta, a_t, k_t), a_t.ln() / delta);
                slo + shi
            });
            Ok(est - truth)
        }
        ProbeKind::PartialMoment { gamma, side } => {
            let n = Normal::new(0.0, 1.0).expect("standard normal");
            let upper_pm = |c: f64| n.pdf(c) - c * (1.0 - n.cdf(c));
            let lower_pm = |c: f64| c * n.cdf(c) + n.pdf(c);
            Ok(match side {
                Side::Plus => {
                    let g = n.inverse_cdf(gamma / (1.0 + gamma));
                    eps / (1.0 + gamma) + upper_pm(g + eps) - upper_pm(g)
                }
                Side::Minus => {
                    let g = n.inverse_cdf(1.0 / (1.0 + gamma));
                    -eps / (1.0 + gamma) + lower_pm(g + eps) - lower_pm(g)
                }
            })
        }
    }
}

/// Bias of the one-step estimator with oracle nuisances perturbed by
/// `eps` times fixed smooth functions, evaluated by exact integration of
/// the score, together with the fitted log-log decay slope.
pub fn remainder_decay_probe(kind: ProbeKind, eps_grid: &[f64], delta: f64) -> Result<ProbeResult> {
    if eps_grid.len() < 2 || eps_grid.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::Config("probe needs at least two positive eps values".into()));
    }
    let bias: Vec<f64> = eps_grid.iter().map(|&e| probe_bias(kind, e, delta)).collect::<Result<_>>()?;
    Ok(ProbeResult { eps: eps_grid.to_vec(), slope: loglog_slope(eps_grid, &bias), bias })
}

/// Unperturbed bias, for checking the probe's integration floor.
pub fn probe_floor(kind: ProbeKind, delta: f64) -> Result<f64> {
    probe_bias(kind, 0.0, delta)
}
