//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the binary exits nonzero if any criterion fails.

use std::time::{Duration, Instant};

use gpsens::bounds::{sharp_multiplier_bounds, SensitivityModel};
use gpsens::coupling::{
    maximal_policy_draw_binary, mismatch_probability_exact, monotone_policy_map, pure_policy_draw, sample_discrete,
    stream_id, tv_distance, wasserstein_line, ContinuousLaw, MaximalCoupler, PolicyKind, RngStream, TiltedUniformLaw,
    UniformLaw,
};
use gpsens::data::{make_folds, TreatmentKind};
use gpsens::estimators::{
    estimate_binary_tau_chi, estimate_bounds, estimate_theta, estimate_xi, estimate_zeta, EstimateConfig, Side,
};
use gpsens::nuisance::{fit_binary_nuisances, fit_continuous_nuisances, RegressorSpec};
use gpsens::oracle::{
    greedy_multiplier_exact, oracle_min_cost_transport, vertex_lp_exact, Direction, ExactLaw, TransportInstance,
};
use gpsens::sim::{
    figure1_grid, population_bounds, remainder_decay_probe, simulate, truth_by_quadrature, DgpSpec, Functional,
    ProbeKind,
};
use gpsens::tilt::{incremental_propensity, merged_support, tilt_discrete, DiscreteDist};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use rand::Rng;
use rayon::prelude::*;

const MOTIVATING: DgpSpec = DgpSpec::Motivating { n: 0, seed: 0 };

/// Collects failed checks for one criterion.
#[derive(Default)]
struct Checks {
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Checks {
    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(what());
        }
    }

    fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }
}

fn run(id: u8, name: &str, limit: Duration, f: impl FnOnce(&mut Checks)) -> bool {
    let start = Instant::now();
    let mut c = Checks::default();
    f(&mut c);
    let took = start.elapsed();
    c.check(took <= limit, || format!("took {took:.1?}, limit {limit:?}"));
    let pass = c.failures.is_empty();
    println!(
        "[{}] criterion {id}: {name} ({took:.2?}){}{}",
        if pass { "PASS" } else { "FAIL" },
        if c.notes.is_empty() { String::new() } else { format!("; {}", c.notes.join("; ")) },
        if pass { String::new() } else { format!("; failures: {}", c.failures.join(" | ")) },
    );
    pass
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn figure1(c: &mut Checks) {
    let rows = figure1_grid().expect("grid");
    let pick = |p: PolicyKind, g: f64| -> Vec<_> { rows.iter().filter(|r| r.policy == p && r.gamma == g).collect() };
    let tau0 = truth_by_quadrature(&MOTIVATING, Functional::Tau, 0.0, 1.0).unwrap();
    let half = truth_by_quadrature(&MOTIVATING, Functional::PureHalfWidth, 0.0, 2.0).unwrap();
    let max2 = pick(PolicyKind::Maximal, 2.0);
    let pure2 = pick(PolicyKind::Pure, 2.0);
    c.check(max2.len() == 61 && pure2.len() == 61, || "grid should have 61 deltas per cell".into());
    let (m0, p0) = (max2[0], pure2[0]);
    c.check(m0.delta == 0.0, || "grid must start at delta=0".into());
    for (v, want) in [(m0.lower, 1.0 / 6.0), (m0.upper, 1.0 / 6.0)] {
        c.check(close(v, want, 1e-6) && close(v, tau0, 1e-6), || format!("maximal endpoint {v} vs 1/6"));
    }
    for (v, want) in [(p0.lower, 1.0 / 6.0 - 2.0 / 3.0), (p0.upper, 1.0 / 6.0 + 2.0 / 3.0)] {
        c.check(close(v, want, 1e-6), || format!("pure endpoint {v} vs {want}"));
    }
    c.check(close(p0.upper - p0.tau, half, 1e-6), || "pure half-width disagrees with quadrature".into());
    for g in [0.5, 2.0] {
        let m = pick(PolicyKind::Maximal, g);
        let p = pick(PolicyKind::Pure, g);
        c.check(m[0].upper - m[0].lower == 0.0, || format!("maximal width at delta=0, gamma={g} is not 0"));
        c.check(close(p[0].upper - p[0].lower, 2.0 * g / 3.0, 1e-6), || format!("pure width at 0 for gamma={g}"));
        let widths: Vec<f64> = m.iter().map(|r| r.upper - r.lower).collect();
        let mut max_jump: f64 = 0.0;
        for w in widths.windows(2) {
            c.check(w[1] >= w[0] - 1e-12, || format!("maximal width decreases at gamma={g}"));
            max_jump = max_jump.max(w[1] - w[0]);
        }
        // the width 2 gamma E|q - pi| has delta-derivative at most gamma / 2
        c.check(max_jump <= g * 0.05 / 2.0 + 1e-9, || format!("width jump {max_jump} too large"));
        c.check(widths[60] > 0.0, || "maximal width should grow away from 0".into());
        c.note(format!("gamma={g}: maximal width 0 -> {:.4}, pure width {:.4}", widths[60], p[0].upper - p[0].lower));
    }
}

/// Random law with integer support in [-4, 4] and masses `k / den`.
fn rational_law(rng: &mut RngStream, support: &[i32], den: u32, allow_zero: bool) -> DiscreteDist {
    let k = support.len();
    let min = u32::from(!allow_zero);
    let free = den - min * k as u32;
    let mut cuts: Vec<u32> = (0..k - 1).map(|_| rng.random_range(0..=free)).collect();
    cuts.sort_unstable();
    let mut m = Vec::with_capacity(k);
    let mut prev = 0;
    for c in cuts.iter().chain(std::iter::once(&free)) {
        m.push(c - prev + min);
        prev = *c;
    }
    let pts: Vec<(f64, f64)> =
        support.iter().zip(&m).map(|(&a, &w)| (f64::from(a), f64::from(w) / f64::from(den))).collect();
    DiscreteDist::from_weights(&pts).unwrap()
}

fn random_support(rng: &mut RngStream, max: usize) -> Vec<i32> {
    let k = rng.random_range(1..=max);
    let mut all: Vec<i32> = (-4..=4).collect();
    for i in 0..k {
        let j = rng.random_range(i..all.len());
        all.swap(i, j);
    }
    let mut s = all[..k].to_vec();
    s.sort_unstable();
    s
}

fn coupling_exactness(c: &mut Checks) {
    let mut rng = RngStream::new(2, 0);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let support = random_support(&mut rng, 6);
        let den = rng.random_range(support.len() as u32..=120);
        let pi = rational_law(&mut rng, &support, den, false);
        let q = rational_law(&mut rng, &support, den, true);
        let coupler = MaximalCoupler::new(&pi, &q).unwrap();
        let mismatch: f64 = pi
            .iter()
            .map(|(a, m)| {
                m * (1.0 - coupler.keep_probability(a)) * (1.0 - coupler.residual().map_or(0.0, |r| r.mass_at(a)))
            })
            .sum();
        let tv = tv_distance(&pi, &q);
        let flow =
            oracle_min_cost_transport(&TransportInstance::with_cost(pi.clone(), q.clone(), u64::from(den), |a, b| {
                f64::from(u8::from(a != b))
            }))
            .unwrap();
        let units = flow.off_diagonal_units(&pi, &q);
        c.check(close(mismatch * f64::from(den), units as f64, 1e-9), || {
            format!("pair {i}: coupling mismatch {mismatch} vs flow {units}/{den}")
        });
        c.check(close(tv * f64::from(den), units as f64, 1e-9), || format!("pair {i}: tv {tv} vs flow {units}/{den}"));
        let w1 = wasserstein_line(&pi, &q, |d| d);
        let flow_w =
            oracle_min_cost_transport(&TransportInstance::with_cost(pi.clone(), q.clone(), u64::from(den), |a, b| {
                (a - b).abs()
            }))
            .unwrap();
        let w_units = flow_w.value * f64::from(den);
        c.check(close(w_units, w_units.round(), 1e-9) && close(w1 * f64::from(den), w_units.round(), 1e-9), || {
            format!("pair {i}: quantile W1 {w1} vs flow {}", flow_w.value)
        });
        worst = worst.max((mismatch - flow.value).abs()).max((w1 - flow_w.value).abs());
    }
    c.note(format!("100 pairs, worst |coupling - flow| {worst:.1e}"));
}

fn ks_discrete(draws: &[f64], q: &DiscreteDist) -> f64 {
    let n = draws.len() as f64;
    let mut sorted = draws.to_vec();
    sorted.sort_by(f64::total_cmp);
    let support = merged_support(q, &DiscreteDist::uniform(&sorted).unwrap_or_else(|_| q.clone()));
    support
        .into_iter()
        .map(|a| {
            let emp = sorted.partition_point(|&x| x <= a) as f64 / n;
            (emp - q.cdf(a)).abs()
        })
        .fold(0.0, f64::max)
}

fn ks_continuous(draws: &[f64], law: &impl ContinuousLaw) -> f64 {
    let mut s = draws.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = law.cdf(x);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

fn sampler_law(c: &mut Checks) {
    const N: usize = 100_000;
    let laws: Vec<(&str, DiscreteDist, f64)> = vec![
        ("bernoulli", DiscreteDist::bernoulli(0.3).unwrap(), 1.0),
        ("three-point", DiscreteDist::uniform(&[0.0, 1.0, 2.0]).unwrap(), -0.7),
        (
            "five-point",
            DiscreteDist::from_weights(&[(-2.0, 1.0), (-1.0, 2.0), (0.0, 3.0), (1.5, 2.0), (3.0, 1.0)]).unwrap(),
            0.5,
        ),
    ];
    let check_run = |c: &mut Checks, label: String, ks: f64, hits: usize, exact: f64| {
        let se = (exact * (1.0 - exact) / N as f64).sqrt();
        let emp = hits as f64 / N as f64;
        c.check(ks < 0.01, || format!("{label}: KS {ks:.4}"));
        c.check((emp - exact).abs() <= 3.0 * se, || format!("{label}: mismatch {emp} vs exact {exact} (se {se:.2e})"));
    };
    let mut worst_ks: f64 = 0.0;
    for (li, (name, pi, delta)) in laws.iter().enumerate() {
        let q = tilt_discrete(pi, *delta).unwrap();
        for (pk, kind) in [PolicyKind::Pure, PolicyKind::Maximal].into_iter().enumerate() {
            let mut rng = RngStream::new(3, stream_id(li as u16, pk as u16, 0));
            let mut draws = Vec::with_capacity(N);
            let mut hits = 0;
            for _ in 0..N {
                let s = sample_discrete(pi, &q, kind, &mut rng).unwrap();
                hits += usize::from(s.a_natural != s.a_assigned);
                draws.push(s.a_assigned);
            }
            let ks = ks_discrete(&draws, &q);
            worst_ks = worst_ks.max(ks);
            let exact = mismatch_probability_exact(pi, &q, kind).unwrap();
            check_run(c, format!("{name}/{kind:?}"), ks, hits, exact);
        }
    }
    // binary maximal policy on the incremental propensity
    let (pi, delta) = (0.3, 1.0);
    let q = incremental_propensity(pi, delta);
    let mut rng = RngStream::new(3, stream_id(9, 0, 0));
    let (mut ones, mut hits) = (0usize, 0usize);
    for _ in 0..N {
        let a = f64::from(u8::from(rng.uniform() < pi));
        let d = maximal_policy_draw_binary(pi, q, a, rng.uniform()).unwrap();
        ones += usize::from(d == 1.0);
        hits += usize::from(a != d);
    }
    let ks = (ones as f64 / N as f64 - q).abs();
    worst_ks = worst_ks.max(ks);
    check_run(c, "binary maximal".into(), ks, hits, q - pi);
    // continuous natural law: rank-preserving and pure policies
    let base = UniformLaw { lo: 0.0, hi: 1.0 };
    let target = TiltedUniformLaw { lo: 0.0, hi: 1.0, delta: 1.5 };
    for (k, monotone) in [(0u16, true), (1, false)] {
        let mut rng = RngStream::new(3, stream_id(10, k, 0));
        let mut draws = Vec::with_capacity(N);
        let mut hits = 0;
        for _ in 0..N {
            let a = rng.uniform();
            let d = if monotone {
                monotone_policy_map(&base, &target, a)
            } else {
                pure_policy_draw(&target, rng.uniform())
            };
            hits += usize::from(a != d);
            draws.push(d);
        }
        let ks = ks_continuous(&draws, &target);
        worst_ks = worst_ks.max(ks);
        check_run(c, format!("continuous {}", if monotone { "rank-preserving" } else { "pure" }), ks, hits, 1.0);
    }
    c.note(format!("worst KS {worst_ks:.4}"));
}

fn ratio(a: i64, b: i64) -> BigRational {
    BigRational::new(BigInt::from(a), BigInt::from(b))
}

fn sharp_multiplier_lp(c: &mut Checks) {
    let mut rng = RngStream::new(4, 0);
    for i in 0..50 {
        let k = rng.random_range(1..=6usize);
        let den = rng.random_range(k as i64..=60);
        let mut ys: Vec<i64> = (-20..=20).collect();
        for j in 0..k {
            let s = rng.random_range(j..ys.len());
            ys.swap(j, s);
        }
        let mut cuts: Vec<i64> = (0..k - 1).map(|_| rng.random_range(0..=den - k as i64)).collect();
        cuts.sort_unstable();
        let mut prev = 0;
        let mut pts = Vec::new();
        for (j, cut) in cuts.iter().chain(std::iter::once(&(den - k as i64))).enumerate() {
            pts.push((ratio(ys[j], 2), ratio(cut - prev + 1, den)));
            prev = *cut;
        }
        let law = ExactLaw::new(pts).unwrap();
        let gamma = ratio(rng.random_range(2..=12), 2);
        for dir in [Direction::Min, Direction::Max] {
            let (g, h) = greedy_multiplier_exact(&law, &gamma, dir);
            let v = vertex_lp_exact(&law, &gamma, dir);
            c.check(v.as_ref() == Some(&g), || format!("instance {i} {dir:?}: greedy {g} vs vertex {v:?}"));
            let eh: BigRational = h.iter().zip(&law.ps).map(|(h, p)| h * p).sum();
            c.check(eh.is_one(), || format!("instance {i}: E[h] = {eh}"));
        }
    }
    let u = DiscreteDist::uniform(&[1.0, 2.0, 3.0, 4.0]).unwrap();
    let s = sharp_multiplier_bounds(&u, 3.0).unwrap();
    c.check(close(s.nu_lower, 1.5, 1e-12) && close(s.nu_upper, 3.5, 1e-12), || {
        format!("Unif{{1..4}} gamma=3 gave [{}, {}]", s.nu_lower, s.nu_upper)
    });
    for h in [&s.h_lower, &s.h_upper] {
        let eh: f64 = h.iter().zip(u.mass()).map(|(h, p)| h * p).sum();
        c.check(close(eh, 1.0, 1e-12), || format!("E[h] = {eh}"));
    }
    let exact = ExactLaw::from_dist(&u);
    let lo = greedy_multiplier_exact(&exact, &ratio(3, 1), Direction::Min).0;
    let hi = greedy_multiplier_exact(&exact, &ratio(3, 1), Direction::Max).0;
    c.check(lo == ratio(3, 2) && hi == ratio(7, 2), || format!("exact greedy gave [{lo}, {hi}]"));
    c.note("50 random instances agree exactly; Unif{1,2,3,4} at gamma=3 gives [1.5, 3.5]");
}

fn consistency(c: &mut Checks) {
    let data = simulate(&DgpSpec::Motivating { n: 20_000, seed: 20_000 }).unwrap();
    let cont = data.with_kind(TreatmentKind::Continuous).unwrap();
    let plan = make_folds(data.len(), 5, 11).unwrap();
    let spec = RegressorSpec::default();
    let bin = fit_binary_nuisances(&data, &plan, &spec, 1.0).unwrap();
    let mut worst: f64 = 0.0;
    for delta in [-1.0, 0.5, 1.0] {
        let (tau, chi, ts, cs) = estimate_binary_tau_chi(&data, &bin, delta).unwrap();
        let fit = fit_continuous_nuisances(&cont, delta, &plan, &spec).unwrap();
        let (xi, xs) = estimate_xi(&cont, &fit, delta).unwrap();
        let (theta, ths) = estimate_theta(&cont, &fit, delta).unwrap();
        for (name, est, se, f) in [
            ("tau", tau, ts.std_error(), Functional::Tau),
            ("chi", chi, cs.std_error(), Functional::Chi),
            ("xi", xi, xs.std_error(), Functional::Xi),
            ("theta", theta, ths.std_error(), Functional::Theta),
        ] {
            let truth = truth_by_quadrature(&MOTIVATING, f, delta, 1.0).unwrap();
            let z = (est - truth).abs() / se;
            worst = worst.max(z);
            c.check(z <= 3.0, || format!("{name} at delta={delta}: {est:.5} vs {truth:.5}, {z:.2} SEs"));
        }
    }
    c.note(format!("largest standardized error {worst:.2}"));
}

fn coverage(c: &mut Checks) {
    let (delta, gamma) = (1.0, 2.0);
    let model = SensitivityModel::OutcomeGap { gamma };
    let truth = population_bounds(&MOTIVATING, &model, PolicyKind::Maximal, delta).unwrap();
    let hits: Vec<(bool, bool)> = (0..200u64)
        .into_par_iter()
        .map(|rep| {
            let data = simulate(&DgpSpec::Motivating { n: 5000, seed: 1000 + rep }).unwrap();
            let cfg = EstimateConfig {
                model,
                policy: PolicyKind::Maximal,
                delta,
                folds: 5,
                seed: rep,
                level: 0.95,
                regressor: RegressorSpec::default(),
            };
            let r = estimate_bounds(&data, &cfg).unwrap();
            let inside = |ci: (f64, f64), v: f64| ci.0 <= v && v <= ci.1;
            (inside(r.ci_lower, truth.lower), inside(r.ci_upper, truth.upper))
        })
        .collect();
    let lo = hits.iter().filter(|h| h.0).count() as f64 / 200.0;
    let hi = hits.iter().filter(|h| h.1).count() as f64 / 200.0;
    for (name, cov) in [("lower", lo), ("upper", hi)] {
        c.check((0.90..=0.98).contains(&cov), || format!("{name} endpoint coverage {cov}"));
    }
    c.note(format!("coverage lower {lo:.3}, upper {hi:.3}"));
}

fn remainder(c: &mut Checks) {
    let eps = [0.2, 0.1, 0.05, 0.025, 0.0125];
    let mut cases: Vec<(String, ProbeKind, f64)> = Vec::new();
    for d in [-1.0, 0.5, 1.0] {
        cases.push((format!("tau binary d={d}"), ProbeKind::TauBinary, d));
        cases.push((format!("chi d={d}"), ProbeKind::Chi, d));
        cases.push((format!("tau continuous d={d}"), ProbeKind::TauContinuous, d));
    }
    for g in [1.5, 2.0, 4.0] {
        for side in [Side::Minus, Side::Plus] {
            cases.push((
                format!("partial moment gamma={g} {side:?}"),
                ProbeKind::PartialMoment { gamma: g, side },
                0.0,
            ));
        }
    }
    let mut min_slope = f64::INFINITY;
    for (name, kind, d) in cases {
        let s = remainder_decay_probe(kind, &eps, d).unwrap().slope;
        min_slope = min_slope.min(s);
        c.check(s >= 1.8, || format!("{name}: slope {s:.3}"));
    }
    c.note(format!("smallest slope {min_slope:.3}"));
}

fn all_zero(v: &[f64]) -> bool {
    v.iter().all(|&x| x == 0.0)
}

fn boundary_identities(c: &mut Checks) {
    let data = simulate(&DgpSpec::Motivating { n: 2000, seed: 8 }).unwrap();
    let cont = data.with_kind(TreatmentKind::Continuous).unwrap();
    let plan = make_folds(data.len(), 5, 8).unwrap();
    let spec = RegressorSpec::default();

    let fit = fit_continuous_nuisances(&cont, 0.0, &plan, &spec).unwrap();
    let (xi, xs) = estimate_xi(&cont, &fit, 0.0).unwrap();
    let (theta, ts) = estimate_theta(&cont, &fit, 0.0).unwrap();
    c.check(xi == 0.0 && all_zero(&xs.values), || format!("xi at delta=0 is {xi}"));
    c.check(theta == 0.0 && all_zero(&ts.values), || format!("theta at delta=0 is {theta}"));

    let binary_models = [
        SensitivityModel::OutcomeGap { gamma: 2.0 },
        SensitivityModel::OutcomeGapHolder { gamma: 2.0, p: 1.0 },
        SensitivityModel::OddsRatio { gamma: 2.0 },
    ];
    for model in binary_models {
        let cfg = EstimateConfig {
            model,
            policy: PolicyKind::Maximal,
            delta: 0.0,
            folds: 5,
            seed: 8,
            level: 0.95,
            regressor: spec,
        };
        let r = estimate_bounds(&data, &cfg).unwrap();
        c.check(r.lower == r.tau_hat && r.upper == r.tau_hat, || {
            format!("{model:?} at delta=0: [{}, {}] vs tau {}", r.lower, r.upper, r.tau_hat)
        });
    }

    let fit1 = fit_binary_nuisances(&data, &plan, &spec, 1.0).unwrap();
    for arm in [0u8, 1] {
        for side in [Side::Minus, Side::Plus] {
            let (z, zs) = estimate_zeta(&data, &fit1, 1.0, 1.0, arm, side).unwrap();
            c.check(z == 0.0 && all_zero(&zs.values), || format!("zeta arm {arm} {side:?} at gamma=1 is {z}"));
        }
    }

    let laws = law_grid();
    c.check(laws.len() == 20, || "law grid should hold 20 laws".into());
    let deltas = [-2.0, -0.5, 0.5, 2.0];
    for (i, p) in laws.iter().enumerate() {
        c.check(tilt_discrete(p, 0.0).unwrap() == *p, || format!("law {i}: zero tilt is not the identity"));
        for &d1 in &deltas {
            for &d2 in &deltas {
                let two = tilt_discrete(&tilt_discrete(p, d1).unwrap(), d2).unwrap();
                let one = tilt_discrete(p, d1 + d2).unwrap();
                let gap = p.support().iter().map(|&a| (two.mass_at(a) - one.mass_at(a)).abs()).fold(0.0, f64::max);
                c.check(gap < 1e-12, || format!("law {i}: semigroup gap {gap} at ({d1}, {d2})"));
            }
            let q = tilt_discrete(p, d1).unwrap();
            let (lo, hi) = if d1 > 0.0 { (p, &q) } else { (&q, p) };
            let dominated = p.support().iter().all(|&a| hi.cdf(a) <= lo.cdf(a) + 1e-12);
            c.check(dominated, || format!("law {i}: tilt by {d1} breaks stochastic order"));
        }
    }
    c.note("exact zeros at delta=0 and gamma=1; 20-law tilt grid consistent");
}

/// Twenty fixed laws of varied support size, spacing and skew.
fn law_grid() -> Vec<DiscreteDist> {
    let mut out = Vec::new();
    for k in 1..=5usize {
        for shape in 0..4 {
            let pts: Vec<(f64, f64)> = (0..k)
                .map(|j| {
                    let j = j as f64;
                    let a = match shape {
                        0 => j,
                        1 => j * j - 2.0,
                        2 => -1.5 * j,
                        _ => (j + 1.0).ln(),
                    };
                    let w = match shape {
                        0 => 1.0,
                        1 => j + 1.0,
                        2 => 1.0 / (j + 1.0),
                        _ => 1.0 + (j * 1.3).sin().abs(),
                    };
                    (a, w)
                })
                .collect();
            out.push(DiscreteDist::from_weights(&pts).unwrap());
        }
    }
    out
}

fn main() {
    let results = [
        run(1, "population truth grid", Duration::from_secs(10), figure1),
        run(2, "coupling exactness against the flow oracle", Duration::from_secs(30), coupling_exactness),
        run(3, "sampler laws", Duration::from_secs(60), sampler_law),
        run(4, "sharp multiplier LP", Duration::from_secs(60), sharp_multiplier_lp),
        run(5, "estimator consistency", Duration::from_secs(300), consistency),
        run(6, "confidence interval coverage", Duration::from_secs(1200), coverage),
        run(7, "second-order remainder", Duration::from_secs(120), remainder),
        run(8, "exact boundary identities", Duration::from_secs(60), boundary_identities),
    ];
    let failed = results.iter().filter(|p| !**p).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
