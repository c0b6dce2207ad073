//! Exponential tilts of treatment laws.
//!
//! A tilt by `delta` reweights a law by `exp(delta * a)` and renormalizes.
//! For a binary treatment this is the incremental propensity intervention,
//! which multiplies the odds of treatment by `exp(delta)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MASS_TOL: f64 = 1e-12;

/// Finite distribution on a strictly increasing real support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDist {
    support: Vec<f64>,
    mass: Vec<f64>,
}

impl DiscreteDist {
    pub fn new(support: Vec<f64>, mass: Vec<f64>) -> Result<Self> {
        if support.is_empty() || support.len() != mass.len() {
            return Err(Error::InvalidDistribution(format!(
                "support ({}) and mass ({}) must be nonempty and of equal length",
                support.len(),
                mass.len()
            )));
        }
        if support.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidDistribution("support must be finite".into()));
        }
        if support.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidDistribution("support must be strictly increasing".into()));
        }
        if mass.iter().any(|&m| !(m >= 0.0) || !m.is_finite()) {
            return Err(Error::InvalidDistribution("masses must be finite and nonnegative".into()));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidDistribution(format!("masses sum to {total}, not 1")));
        }
        Ok(Self { support, mass })
    }

    /// Normalizes nonnegative weights; unsorted or repeated support points
    /// are sorted and merged.
    pub fn from_weights(points: &[(f64, f64)]) -> Result<Self> {
        let mut pts: Vec<(f64, f64)> = points.to_vec();
        if pts.iter().any(|p| !p.0.is_finite() || !(p.1 >= 0.0) || !p.1.is_finite()) {
            return Err(Error::InvalidDistribution("weights must be finite and nonnegative".into()));
        }
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut support: Vec<f64> = Vec::with_capacity(pts.len());
        let mut weight: Vec<f64> = Vec::with_capacity(pts.len());
        for (s, w) in pts {
            if support.last() == Some(&s) {
                *weight.last_mut().unwrap() += w;
            } else {
                support.push(s);
                weight.push(w);
            }
        }
        let total: f64 = weight.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidDistribution("total weight must be positive".into()));
        }
        let mass = weight.iter().map(|w| w / total).collect();
        Self::new(support, mass)
    }

    pub fn point(at: f64) -> Result<Self> {
        Self::new(vec![at], vec![1.0])
    }

    pub fn uniform(support: &[f64]) -> Result<Self> {
        let n = support.len() as f64;
        Self::new(support.to_vec(), vec![1.0 / n; support.len()])
    }

    /// Two-point law on {0, 1} with `P[1] = p`.
    pub fn bernoulli(p: f64) -> Result<Self> {
        Self::new(vec![0.0, 1.0], vec![1.0 - p, p])
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.support.iter().copied().zip(self.mass.iter().copied())
    }

    pub fn mass_at(&self, a: f64) -> f64 {
        match self.support.binary_search_by(|s| s.total_cmp(&a)) {
            Ok(i) => self.mass[i],
            Err(_) => 0.0,
        }
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(a, p)| a * p).sum()
    }

    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.iter().map(|(a, p)| f(a) * p).sum()
    }

    /// `P[A <= a]`.
    pub fn cdf(&self, a: f64) -> f64 {
        let mut c = 0.0;
        for (s, p) in self.iter() {
            if s > a {
                break;
            }
            c += p;
        }
        c.min(1.0)
    }

    /// Left-continuous generalized inverse `inf{a : F(a) >= v}`, skipping
    /// zero-mass atoms.
    pub fn quantile(&self, v: f64) -> f64 {
        let mut c = 0.0;
        let mut last = self.support[0];
        for (s, p) in self.iter() {
            if p <= 0.0 {
                continue;
            }
            c += p;
            last = s;
            if c >= v {
                return s;
            }
        }
        last
    }

    pub fn is_degenerate(&self) -> bool {
        self.mass.iter().filter(|&&p| p > 0.0).count() <= 1
    }

    /// Smallest and largest support points carrying positive mass.
    pub fn hull(&self) -> (f64, f64) {
        let mut it = self.iter().filter(|p| p.1 > 0.0).map(|p| p.0);
        let lo = it.next().unwrap_or(self.support[0]);
        let hi = it.last().unwrap_or(lo);
        (lo, hi)
    }
}

/// Union of two supports, sorted and deduplicated.
pub fn merged_support(p: &DiscreteDist, q: &DiscreteDist) -> Vec<f64> {
    let mut s: Vec<f64> = p.support().iter().chain(q.support()).copied().collect();
    s.sort_by(f64::total_cmp);
    s.dedup();
    s
}

/// Kullback-Leibler divergence `KL(q || p)`; infinite when `q` is not
/// absolutely continuous with respect to `p`.
pub fn kl_divergence(q: &DiscreteDist, p: &DiscreteDist) -> f64 {
    q.iter()
        .filter(|&(_, qm)| qm > 0.0)
        .map(|(a, qm)| {
            let pm = p.mass_at(a);
            if pm <= 0.0 {
                f64::INFINITY
            } else {
                qm * (qm / pm).ln()
            }
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TiltSpec {
    pub delta: f64,
}

impl TiltSpec {
    pub fn new(delta: f64) -> Result<Self> {
        if !delta.is_finite() {
            return Err(Error::Numeric(format!("tilt parameter must be finite, got {delta}")));
        }
        Ok(Self { delta })
    }
}

/// Shifted log-weights `delta * a + ln p(a)` minus their maximum, and that maximum.
fn shifted_log_weights(base: &DiscreteDist, delta: f64) -> Result<(Vec<f64>, f64)> {
    if !delta.is_finite() {
        return Err(Error::Numeric(format!("tilt parameter must be finite, got {delta}")));
    }
    let logw: Vec<f64> =
        base.iter().map(|(a, p)| if p > 0.0 { delta * a + p.ln() } else { f64::NEG_INFINITY }).collect();
    let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::Numeric("tilt exponent overflowed".into()));
    }
    Ok((logw.into_iter().map(|l| l - max).collect(), max))
}

pub fn tilt_discrete(base: &DiscreteDist, delta: f64) -> Result<DiscreteDist> {
    if delta == 0.0 {
        return Ok(base.clone());
    }
    let (shifted, _) = shifted_log_weights(base, delta)?;
    let w: Vec<f64> = shifted.iter().map(|l| l.exp()).collect();
    let total: f64 = w.iter().sum();
    let mass: Vec<f64> = w.iter().map(|x| x / total).collect();
    Ok(DiscreteDist { support: base.support.clone(), mass })
}

/// Propensity after multiplying the odds of treatment by `exp(delta)`.
/// Degenerate propensities are left untouched.
pub fn incremental_propensity(pi: f64, delta: f64) -> f64 {
    if pi <= 0.0 || pi >= 1.0 || delta == 0.0 {
        return pi;
    }
    let odds = delta.exp() * pi;
    let q = odds / (odds + 1.0 - pi);
    if q.is_nan() {
        // exp(delta) overflowed
        1.0
    } else {
        q
    }
}

/// `(alpha, beta)` = (`E[exp(delta A)]`, tilted mean of `A`).
pub fn tilt_moments(base: &DiscreteDist, delta: f64) -> Result<(f64, f64)> {
    let (shifted, max) = shifted_log_weights(base, delta)?;
    let mut s = 0.0;
    let mut sa = 0.0;
    for (l, a) in shifted.iter().zip(base.support()) {
        let w = l.exp();
        s += w;
        sa += a * w;
    }
    let alpha = (max + s.ln()).exp();
    if !alpha.is_finite() {
        return Err(Error::Numeric(format!("E[exp({delta} A)] overflows")));
    }
    Ok((alpha, sa / s))
}

fn tilted_mean_var(base: &DiscreteDist, lambda: f64) -> (f64, f64) {
    let q = tilt_discrete(base, lambda).expect("finite lambda");
    let mean = q.mean();
    let var = q.expect(|a| (a - mean) * (a - mean));
    (mean, var)
}

/// Tilt parameter whose tilted law has mean `m`; this tilt is the
/// KL-closest law to `base` among those with mean `m`.
pub fn tilt_for_mean(base: &DiscreteDist, m: f64) -> Result<f64> {
    let (lo_s, hi_s) = base.hull();
    if !(m > lo_s && m < hi_s) {
        return Err(Error::Infeasible { m, lo: lo_s, hi: hi_s });
    }
    const TOL: f64 = 1e-12;
    let resid = |l: f64| tilted_mean_var(base, l).0 - m;

    let f0 = resid(0.0);
    if f0.abs() <= TOL {
        return Ok(0.0);
    }
    // bracket the root of the increasing map lambda -> tilted mean
    let (mut lo, mut hi) = if f0 < 0.0 { (0.0, 1.0) } else { (-1.0, 0.0) };
    let mut guard = 0;
    while resid(lo) > 0.0 || resid(hi) < 0.0 {
        let w = hi - lo;
        if f0 < 0.0 {
            lo = hi;
            hi += 2.0 * w;
        } else {
            hi = lo;
            lo -= 2.0 * w;
        }
        guard += 1;
        if guard > 200 || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Numeric("could not bracket the tilt parameter".into()));
        }
    }

    let mut x = 0.5 * (lo + hi);
    for _ in 0..500 {
        let (mean, var) = tilted_mean_var(base, x);
        let f = mean - m;
        if f.abs() <= TOL {
            return Ok(x);
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = if var > 0.0 { x - f / var } else { f64::NAN };
        x = if newton.is_finite() && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= f64::EPSILON * (1.0 + x.abs()) {
            return Ok(x);
        }
    }
    Ok(x)
}
