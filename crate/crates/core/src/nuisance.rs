//! Cross-fit nonparametric nuisance regressions: conditional means, tilt
//! moments, conditional quantiles and partial moments.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FoldPlan, TreatmentKind};
use crate::error::{Error, Result};

/// Propensities are clipped to `[PI_CLIP, 1 - PI_CLIP]` before entering
/// any denominator.
pub const PI_CLIP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegressorMethod {
    Knn,
    Kernel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressorSpec {
    pub method: RegressorMethod,
    /// Neighbour count; `None` uses [`default_k`] of the training size.
    pub k: Option<usize>,
    /// Gaussian bandwidth on the standardized scale; `None` uses a
    /// normal-reference rule.
    pub bandwidth: Option<f64>,
    pub standardize: bool,
}

impl Default for RegressorSpec {
    fn default() -> Self {
        Self { method: RegressorMethod::Knn, k: None, bandwidth: None, standardize: true }
    }
}

impl RegressorSpec {
    pub fn knn(k: usize) -> Self {
        Self { k: Some(k), ..Self::default() }
    }

    pub fn kernel(bandwidth: Option<f64>) -> Self {
        Self { method: RegressorMethod::Kernel, bandwidth, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if self.k == Some(0) {
            return Err(Error::Config("neighbour count must be at least 1".into()));
        }
        if let Some(h) = self.bandwidth {
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::Config(format!("bandwidth must be positive, got {h}")));
            }
        }
        Ok(())
    }
}

/// `max(25, min(ceil(n^0.7), n/2))`, never more than `n`.
pub fn default_k(n: usize) -> usize {
    let k = ((n as f64).powf(0.7).ceil() as usize).min(n / 2).max(25);
    k.min(n).max(1)
}

/// Weighted training points around a query. Weights are unnormalized;
/// every average divides by their sum.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighbors {
    pub idx: Vec<usize>,
    pub w: Vec<f64>,
}

impl Neighbors {
    pub fn mean(&self, f: impl Fn(usize) -> f64) -> f64 {
        self.weighted_mean(|_| 1.0, f)
    }

    /// `sum w g f / sum w g`, accumulated as deviations from the first
    /// value so that a constant `f` is reproduced exactly.
    pub fn weighted_mean(&self, g: impl Fn(usize) -> f64, f: impl Fn(usize) -> f64) -> f64 {
        let f0 = f(self.idx[0]);
        let mut s = 0.0;
        let mut tw = 0.0;
        for (&i, &w) in self.idx.iter().zip(&self.w) {
            let ww = w * g(i);
            s += ww * (f(i) - f0);
            tw += ww;
        }
        f0 + s / tw
    }

    /// Left-continuous weighted quantile `inf{v : F(v) >= level}`.
    pub fn quantile(&self, level: f64, f: impl Fn(usize) -> f64) -> f64 {
        let mut vals: Vec<(f64, f64)> = self.idx.iter().zip(&self.w).map(|(&i, &w)| (f(i), w)).collect();
        vals.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = vals.iter().map(|v| v.1).sum();
        let target = level * total * (1.0 - 1e-12);
        let mut c = 0.0;
        for &(v, w) in &vals {
            c += w;
            if c >= target {
                return v;
            }
        }
        vals.last().map(|v| v.0).unwrap_or(f64::NAN)
    }
}

/// Neighbourhood search over a fixed training design.
#[derive(Debug, Clone)]
pub struct Smoother {
    spec: RegressorSpec,
    center: Vec<f64>,
    scale: Vec<f64>,
    pts: Vec<Vec<f64>>,
    /// For one covariate: training values sorted, with original indices.
    sorted: Option<(Vec<f64>, Vec<usize>)>,
    k: usize,
    bandwidth: f64,
}

impl Smoother {
    pub fn fit(xs: &[&[f64]], spec: &RegressorSpec) -> Result<Self> {
        spec.validate()?;
        let n = xs.len();
        if n == 0 {
            return Err(Error::Data("empty training set".into()));
        }
        let d = xs[0].len();
        let (mut center, mut scale) = (vec![0.0; d], vec![1.0; d]);
        if spec.standardize {
            for j in 0..d {
                let m = xs.iter().map(|x| x[j]).sum::<f64>() / n as f64;
                let v = xs.iter().map(|x| (x[j] - m).powi(2)).sum::<f64>() / n as f64;
                center[j] = m;
                scale[j] = if v > 0.0 { v.sqrt() } else { 1.0 };
            }
        }
        let pts: Vec<Vec<f64>> =
            xs.iter().map(|x| x.iter().enumerate().map(|(j, v)| (v - center[j]) / scale[j]).collect()).collect();
        let sorted = (d == 1).then(|| {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| pts[a][0].total_cmp(&pts[b][0]).then(a.cmp(&b)));
            (order.iter().map(|&i| pts[i][0]).collect(), order)
        });
        let k = spec.k.unwrap_or_else(|| default_k(n)).min(n);
        // normal-reference bandwidth on standardized covariates
        let bandwidth = spec.bandwidth.unwrap_or_else(|| 1.06 * (n as f64).powf(-1.0 / (4.0 + d as f64)));
        Ok(Self { spec: *spec, center, scale, pts, sorted, k, bandwidth })
    }

    pub fn len(&self) -> usize {
        self.pts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pts.is_empty()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter().enumerate().map(|(j, v)| (v - self.center[j]) / self.scale[j]).collect()
    }

    fn dist2(&self, q: &[f64], i: usize) -> f64 {
        self.pts[i].iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    pub fn neighbors(&self, x: &[f64]) -> Neighbors {
        let q = self.standardize(x);
        match self.spec.method {
            RegressorMethod::Knn => self.knn(&q, self.k),
            RegressorMethod::Kernel => {
                let h2 = 2.0 * self.bandwidth * self.bandwidth;
                let w: Vec<f64> = (0..self.len()).map(|i| (-self.dist2(&q, i) / h2).exp()).collect();
                if w.iter().sum::<f64>() <= 0.0 {
                    // no kernel mass reaches the query; fall back to its nearest point
                    return self.knn(&q, 1);
                }
                Neighbors { idx: (0..self.len()).collect(), w }
            }
        }
    }

    fn knn(&self, q: &[f64], k: usize) -> Neighbors {
        let idx = match &self.sorted {
            Some((vals, order)) => {
                let p = vals.partition_point(|&v| v < q[0]);
                let (mut lo, mut hi) = (p, p);
                let mut out = Vec::with_capacity(k);
                while out.len() < k {
                    let left = (lo > 0).then(|| q[0] - vals[lo - 1]);
                    let right = (hi < vals.len()).then(|| vals[hi] - q[0]);
                    match (left, right) {
                        (Some(l), Some(r)) if l <= r => {
                            lo -= 1;
                            out.push(order[lo]);
                        }
                        (Some(_), None) => {
                            lo -= 1;
                            out.push(order[lo]);
                        }
                        _ => {
                            out.push(order[hi]);
                            hi += 1;
                        }
                    }
                }
                out
            }
            None => {
                let mut d: Vec<(f64, usize)> = (0..self.len()).map(|i| (self.dist2(q, i), i)).collect();
                let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
                if k < d.len() {
                    d.select_nth_unstable_by(k - 1, cmp);
                    d.truncate(k);
                }
                d.sort_by(cmp);
                d.into_iter().map(|p| p.1).collect()
            }
        };
        let w = vec![1.0; idx.len()];
        Neighbors { idx, w }
    }
}

/// A fitted conditional-mean predictor.
#[derive(Debug, Clone)]
pub struct MeanRegressor {
    smoother: Smoother,
    target: Vec<f64>,
}

impl MeanRegressor {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.smoother.neighbors(x).mean(|i| self.target[i])
    }
}

pub fn fit_mean_regression(xs: &[&[f64]], target: &[f64], spec: &RegressorSpec) -> Result<MeanRegressor> {
    if xs.len() != target.len() {
        return Err(Error::Data("covariate and target lengths differ".into()));
    }
    Ok(MeanRegressor { smoother: Smoother::fit(xs, spec)?, target: target.to_vec() })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub spec: RegressorSpec,
    pub folds: usize,
    pub seed: u64,
}

/// Out-of-fold nuisance predictions for a continuous treatment, one entry
/// per row.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousFit {
    pub delta: f64,
    pub alpha: Vec<f64>,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    /// `E[e^{dA} 1(e^{dA} < alpha) | X] / alpha`, the weight that makes the
    /// total-variation score first-order insensitive to `alpha`.
    pub kappa: Vec<f64>,
    /// Rows where no neighbour fell below the fitted `alpha`.
    pub kappa_empty: Vec<bool>,
    pub provenance: Provenance,
}

impl ContinuousFit {
    pub fn kappa_empty_count(&self) -> usize {
        self.kappa_empty.iter().filter(|&&e| e).count()
    }
}

/// Per-arm quantile and partial-moment nuisances at levels
/// `1/(1+gamma)` (lo) and `gamma/(1+gamma)` (hi).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ArmTails {
    pub gamma_lo: Vec<f64>,
    pub gamma_hi: Vec<f64>,
    pub kappa_lo: Vec<f64>,
    pub kappa_hi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryFit {
    pub pi: Vec<f64>,
    pub mu0: Vec<f64>,
    pub mu1: Vec<f64>,
    pub tails: [ArmTails; 2],
    /// Odds-ratio parameter the tail nuisances were fitted at.
    pub gamma: f64,
    pub clip_count: usize,
    pub provenance: Provenance,
}

fn fold_rows<'a>(data: &'a Dataset, idx: &[usize]) -> Vec<&'a [f64]> {
    idx.iter().map(|&i| data.rows()[i].x.as_slice()).collect()
}

fn check_plan(data: &Dataset, plan: &FoldPlan) -> Result<()> {
    if plan.n() != data.len() {
        return Err(Error::Config(format!("fold plan covers {} rows but the dataset has {}", plan.n(), data.len())));
    }
    Ok(())
}

pub fn fit_continuous_nuisances(
    data: &Dataset,
    delta: f64,
    plan: &FoldPlan,
    spec: &RegressorSpec,
) -> Result<ContinuousFit> {
    if data.kind() != TreatmentKind::Continuous {
        return Err(Error::Config("continuous nuisances need a continuous-kind dataset".into()));
    }
    if !delta.is_finite() {
        return Err(Error::Config(format!("delta must be finite, got {delta}")));
    }
    check_plan(data, plan)?;
    let n = data.len();
    let rows = data.rows();
    let w: Vec<f64> = rows.iter().map(|r| (delta * r.a).exp()).collect();
    if w.iter().any(|v| !v.is_finite() || *v <= 0.0) {
        return Err(Error::Numeric("exp(delta * a) overflows for this delta".into()));
    }
    let mut out = ContinuousFit {
        delta,
        alpha: vec![0.0; n],
        gamma: vec![0.0; n],
        beta: vec![0.0; n],
        kappa: vec![0.0; n],
        kappa_empty: vec![false; n],
        provenance: Provenance { spec: *spec, folds: plan.k(), seed: plan.seed() },
    };
    for j in 0..plan.k() {
        let train = plan.train_indices(j);
        let eval = plan.eval_indices(j);
        let sm = Smoother::fit(&fold_rows(data, &train), spec)?;
        let preds: Vec<(f64, f64, f64, f64, bool)> = eval
            .par_iter()
            .map(|&i| {
                let nb = sm.neighbors(&rows[i].x);
                let t = |k: usize| train[k];
                let alpha = nb.mean(|k| w[t(k)]);
                let gamma = nb.weighted_mean(|k| w[t(k)], |k| rows[t(k)].y);
                let beta = nb.weighted_mean(|k| w[t(k)], |k| rows[t(k)].a);
                let below = nb.mean(|k| if w[t(k)] < alpha { w[t(k)] } else { 0.0 });
                let empty = nb.idx.iter().all(|&k| w[t(k)] >= alpha);
                (alpha, gamma, beta, below / alpha, empty)
            })
            .collect();
        for (&i, p) in eval.iter().zip(preds) {
            out.alpha[i] = p.0;
            out.gamma[i] = p.1;
            out.beta[i] = p.2;
            out.kappa[i] = p.3;
            out.kappa_empty[i] = p.4;
        }
    }
    Ok(out)
}

fn tail_nuisances(nb: &Neighbors, y: impl Fn(usize) -> f64, gamma: f64) -> (f64, f64, f64, f64, f64) {
    let mu = nb.mean(&y);
    let lo = nb.quantile(1.0 / (1.0 + gamma), &y);
    let hi = nb.quantile(gamma / (1.0 + gamma), &y);
    let k_lo = nb.mean(|k| (lo - y(k)).max(0.0));
    let k_hi = nb.mean(|k| (y(k) - hi).max(0.0));
    (mu, lo, hi, k_lo, k_hi)
}

pub fn fit_binary_nuisances(data: &Dataset, plan: &FoldPlan, spec: &RegressorSpec, gamma: f64) -> Result<BinaryFit> {
    if data.kind() != TreatmentKind::Binary {
        return Err(Error::Config("binary nuisances need a binary-kind dataset".into()));
    }
    if !(gamma.is_finite() && gamma >= 1.0) {
        return Err(Error::Config(format!("tail level parameter must be >= 1, got {gamma}")));
    }
    check_plan(data, plan)?;
    let n = data.len();
    let rows = data.rows();
    let mut fit = BinaryFit {
        pi: vec![0.0; n],
        mu0: vec![0.0; n],
        mu1: vec![0.0; n],
        tails: Default::default(),
        gamma,
        clip_count: 0,
        provenance: Provenance { spec: *spec, folds: plan.k(), seed: plan.seed() },
    };
    for t in fit.tails.iter_mut() {
        *t =
            ArmTails { gamma_lo: vec![0.0; n], gamma_hi: vec![0.0; n], kappa_lo: vec![0.0; n], kappa_hi: vec![0.0; n] };
    }
    for j in 0..plan.k() {
        let train = plan.train_indices(j);
        let eval = plan.eval_indices(j);
        let arms: Vec<Vec<usize>> =
            (0..2).map(|a| train.iter().copied().filter(|&i| rows[i].a == a as f64).collect()).collect();
        if arms.iter().any(|a| a.is_empty()) {
            return Err(Error::Data(format!("a treatment arm is empty in the training rows of fold {j}")));
        }
        let sm_all = Smoother::fit(&fold_rows(data, &train), spec)?;
        let sm_arm =
            [Smoother::fit(&fold_rows(data, &arms[0]), spec)?, Smoother::fit(&fold_rows(data, &arms[1]), spec)?];
        type Row = (f64, [(f64, f64, f64, f64, f64); 2]);
        let preds: Vec<Row> = eval
            .par_iter()
            .map(|&i| {
                let x = &rows[i].x;
                let pi = sm_all.neighbors(x).mean(|k| rows[train[k]].a);
                let arm = |a: usize| {
                    let nb = sm_arm[a].neighbors(x);
                    tail_nuisances(&nb, |k| rows[arms[a][k]].y, gamma)
                };
                (pi, [arm(0), arm(1)])
            })
            .collect();
        for (&i, (pi, arm)) in eval.iter().zip(preds) {
            let clipped = pi.clamp(PI_CLIP, 1.0 - PI_CLIP);
            if clipped != pi {
                fit.clip_count += 1;
            }
            fit.pi[i] = clipped;
            fit.mu0[i] = arm[0].0;
            fit.mu1[i] = arm[1].0;
            for (a, t) in fit.tails.iter_mut().enumerate() {
                t.gamma_lo[i] = arm[a].1;
                t.gamma_hi[i] = arm[a].2;
                t.kappa_lo[i] = arm[a].3;
                t.kappa_hi[i] = arm[a].4;
            }
        }
    }
    Ok(fit)
}
