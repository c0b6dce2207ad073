//! Q-policies: the pure, rank-preserving and maximal couplings between the
//! natural treatment and the assigned one, together with the distances they
//! optimize.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tilt::{merged_support, DiscreteDist};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    /// Independent draw from the target law.
    Pure,
    /// `Q^{-1}(Pi(A))`; needs a continuous, interval-supported natural law.
    RankPreserving,
    /// Maximizes `P[A = d]`.
    Maximal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingSample {
    pub a_natural: f64,
    pub a_assigned: f64,
}

/// Counter-based uniform stream. The same `(seed, stream_id)` always
/// yields the same sequence and distinct stream ids are independent, so
/// auxiliary variates can be addressed by (fold, observation, purpose).
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self { seed, stream_id, rng }
    }

    /// Stream positioned after `counter` 64-bit draws.
    pub fn at(seed: u64, stream_id: u64, counter: u64) -> Self {
        let mut s = Self::new(seed, stream_id);
        s.rng.set_word_pos(u128::from(counter) * 2);
        s
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Number of 64-bit draws consumed so far.
    pub fn counter(&self) -> u64 {
        (self.rng.get_word_pos() / 2) as u64
    }

    /// Uniform on [0, 1) with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Packs (fold, purpose, observation) into a stream id.
pub fn stream_id(fold: u16, purpose: u16, obs: u32) -> u64 {
    (u64::from(fold) << 48) | (u64::from(purpose) << 32) | u64::from(obs)
}

/// Anything with a generalized inverse CDF.
pub trait Quantile {
    fn quantile(&self, v: f64) -> f64;
}

impl Quantile for DiscreteDist {
    fn quantile(&self, v: f64) -> f64 {
        DiscreteDist::quantile(self, v)
    }
}

/// A continuous law with explicit CDF and quantile.
pub trait ContinuousLaw: Quantile {
    fn cdf(&self, a: f64) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformLaw {
    pub lo: f64,
    pub hi: f64,
}

impl Quantile for UniformLaw {
    fn quantile(&self, v: f64) -> f64 {
        self.lo + v * (self.hi - self.lo)
    }
}

impl ContinuousLaw for UniformLaw {
    fn cdf(&self, a: f64) -> f64 {
        ((a - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0)
    }
}

/// Exponential tilt of `Unif(lo, hi)`: density proportional to `exp(delta a)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltedUniformLaw {
    pub lo: f64,
    pub hi: f64,
    pub delta: f64,
}

impl TiltedUniformLaw {
    pub fn pdf(&self, a: f64) -> f64 {
        let w = self.hi - self.lo;
        if a < self.lo || a > self.hi {
            return 0.0;
        }
        if self.delta.abs() < 1e-12 {
            return 1.0 / w;
        }
        self.delta * (self.delta * (a - self.lo)).exp() / (self.delta * w).exp_m1()
    }
}

impl Quantile for TiltedUniformLaw {
    fn quantile(&self, v: f64) -> f64 {
        let w = self.hi - self.lo;
        if self.delta.abs() < 1e-12 {
            return self.lo + v * w;
        }
        // ln(1 + v (e^{dw} - 1)) / d, written to stay accurate for small d
        self.lo + (v * (self.delta * w).exp_m1()).ln_1p() / self.delta
    }
}

impl ContinuousLaw for TiltedUniformLaw {
    fn cdf(&self, a: f64) -> f64 {
        let w = self.hi - self.lo;
        let t = (a - self.lo).clamp(0.0, w);
        if self.delta.abs() < 1e-12 {
            return t / w;
        }
        (self.delta * t).exp_m1() / (self.delta * w).exp_m1()
    }
}

pub fn pure_policy_draw(q: &impl Quantile, v: f64) -> f64 {
    q.quantile(v)
}

/// Rank-preserving assignment `Q^{-1}(Pi(a))`.
pub fn monotone_policy_map(pi: &impl ContinuousLaw, q: &impl Quantile, a: f64) -> f64 {
    q.quantile(pi.cdf(a))
}

/// Maximal incremental-style policy for a binary treatment: pushes the
/// natural treatment in the direction of `q - pi`.
pub fn maximal_policy_draw_binary(pi: f64, q: f64, a: f64, v: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&pi) || !(0.0..=1.0).contains(&q) {
        return Err(Error::Config(format!("probabilities must lie in [0,1] (pi={pi}, q={q})")));
    }
    if a != 0.0 && a != 1.0 {
        return Err(Error::Config(format!("binary treatment must be 0 or 1, got {a}")));
    }
    if q == pi {
        return Ok(a);
    }
    if pi == 0.0 || pi == 1.0 {
        return Err(Error::Positivity { pi, q });
    }
    Ok(if q < pi {
        if a == 1.0 && v <= q / pi {
            1.0
        } else {
            0.0
        }
    } else if a == 1.0 || v > (1.0 - q) / (1.0 - pi) {
        1.0
    } else {
        0.0
    })
}

/// Precomputed maximal coupling between two discrete laws.
#[derive(Debug, Clone)]
pub struct MaximalCoupler {
    pi: DiscreteDist,
    q: DiscreteDist,
    tv: f64,
    residual: Option<DiscreteDist>,
}

impl MaximalCoupler {
    pub fn new(pi: &DiscreteDist, q: &DiscreteDist) -> Result<Self> {
        for (a, qm) in q.iter() {
            if qm > 0.0 && pi.mass_at(a) <= 0.0 {
                return Err(Error::Positivity { pi: 0.0, q: qm });
            }
        }
        let tv = tv_distance(pi, q);
        let residual = if tv > 0.0 {
            let pts: Vec<(f64, f64)> = merged_support(pi, q)
                .into_iter()
                .map(|a| {
                    let (pm, qm) = (pi.mass_at(a), q.mass_at(a));
                    (a, (qm - pm.min(qm)).max(0.0))
                })
                .collect();
            DiscreteDist::from_weights(&pts).ok()
        } else {
            None
        };
        Ok(Self { pi: pi.clone(), q: q.clone(), tv, residual })
    }

    pub fn tv(&self) -> f64 {
        self.tv
    }

    /// Probability of keeping the natural value `a`.
    pub fn keep_probability(&self, a: f64) -> f64 {
        let pm = self.pi.mass_at(a);
        if pm <= 0.0 {
            return 1.0;
        }
        (self.q.mass_at(a) / pm).min(1.0)
    }

    pub fn residual(&self) -> Option<&DiscreteDist> {
        self.residual.as_ref()
    }

    pub fn draw(&self, a: f64, v1: f64, v2: f64) -> Result<f64> {
        if self.pi.mass_at(a) <= 0.0 {
            return Err(Error::Config(format!("natural treatment {a} has no mass under pi")));
        }
        if v1 <= self.keep_probability(a) {
            return Ok(a);
        }
        Ok(match &self.residual {
            Some(r) => r.quantile(v2),
            // keep probability is 1 everywhere when TV = 0
            None => a,
        })
    }
}

pub fn maximal_policy_draw_discrete(pi: &DiscreteDist, q: &DiscreteDist, a: f64, v1: f64, v2: f64) -> Result<f64> {
    MaximalCoupler::new(pi, q)?.draw(a, v1, v2)
}

/// `1 - sum min(p, q)` over the merged support.
pub fn tv_distance(p: &DiscreteDist, q: &DiscreteDist) -> f64 {
    let overlap: f64 = merged_support(p, q).into_iter().map(|a| p.mass_at(a).min(q.mass_at(a))).sum();
    (1.0 - overlap).clamp(0.0, 1.0)
}

/// `int_0^1 h(|P^{-1}(u) - Q^{-1}(u)|) du`, exact for discrete laws: both
/// quantile functions are step functions, so the integral is a finite sum
/// over the merged cumulative-mass breakpoints.
pub fn wasserstein_line(p: &DiscreteDist, q: &DiscreteDist, cost: impl Fn(f64) -> f64) -> f64 {
    let pa: Vec<(f64, f64)> = p.iter().filter(|x| x.1 > 0.0).collect();
    let qa: Vec<(f64, f64)> = q.iter().filter(|x| x.1 > 0.0).collect();
    let (mut i, mut j) = (0, 0);
    let (mut rem_p, mut rem_q) = (pa[0].1, qa[0].1);
    let mut total = 0.0;
    loop {
        let step = rem_p.min(rem_q);
        total += step * cost((pa[i].0 - qa[j].0).abs());
        rem_p -= step;
        rem_q -= step;
        // the breakpoint that was reached exactly is the one consumed
        let adv_p = rem_p <= rem_q;
        let adv_q = rem_q <= rem_p;
        if adv_p {
            i += 1;
            if i == pa.len() {
                break;
            }
            rem_p = pa[i].1;
        }
        if adv_q {
            j += 1;
            if j == qa.len() {
                break;
            }
            rem_q = qa[j].1;
        }
    }
    total
}

/// Exact `P[A != d]` for the pure and maximal couplings.
pub fn mismatch_probability_exact(pi: &DiscreteDist, q: &DiscreteDist, kind: PolicyKind) -> Result<f64> {
    match kind {
        PolicyKind::Maximal => Ok(tv_distance(pi, q)),
        PolicyKind::Pure => {
            let agree: f64 = pi.iter().map(|(a, pm)| pm * q.mass_at(a)).sum();
            Ok(1.0 - agree)
        }
        PolicyKind::RankPreserving => {
            Err(Error::Unsupported("rank-preserving coupling needs a continuous natural treatment law".into()))
        }
    }
}

/// Draws `(A, d)` for discrete laws: `A ~ pi`, then the chosen policy.
pub fn sample_discrete(
    pi: &DiscreteDist,
    q: &DiscreteDist,
    kind: PolicyKind,
    rng: &mut RngStream,
) -> Result<CouplingSample> {
    let a = pi.quantile(rng.uniform());
    let assigned = match kind {
        PolicyKind::Pure => pure_policy_draw(q, rng.uniform()),
        PolicyKind::Maximal => {
            let (v1, v2) = (rng.uniform(), rng.uniform());
            maximal_policy_draw_discrete(pi, q, a, v1, v2)?
        }
        PolicyKind::RankPreserving => {
            return Err(Error::Unsupported("rank-preserving coupling needs a continuous natural treatment law".into()))
        }
    };
    Ok(CouplingSample { a_natural: a, a_assigned: assigned })
}
