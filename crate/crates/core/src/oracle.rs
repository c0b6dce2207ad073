//! Brute-force reference solvers used to check the closed forms: integer
//! min-cost transport, and exact rational solutions of the multiplier LP.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::tilt::DiscreteDist;

/// Largest common denominator accepted when scaling masses to integers.
pub const MAX_DENOMINATOR: u64 = 1_000_000;

#[derive(Debug, Clone)]
pub struct TransportInstance {
    pub supply: DiscreteDist,
    pub demand: DiscreteDist,
    /// `cost[i][j]` between supply atom `i` and demand atom `j`.
    pub cost: Vec<Vec<f64>>,
    /// Every mass times this is (within 1e-9) an integer.
    pub denominator: u64,
}

impl TransportInstance {
    pub fn with_cost(
        supply: DiscreteDist,
        demand: DiscreteDist,
        denominator: u64,
        c: impl Fn(f64, f64) -> f64,
    ) -> Self {
        let cost = supply.support().iter().map(|&a| demand.support().iter().map(|&b| c(a, b)).collect()).collect();
        Self { supply, demand, cost, denominator }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportSolution {
    pub value: f64,
    /// Integer plan in units of `1/denominator`.
    pub plan: Vec<Vec<u64>>,
    pub denominator: u64,
}

impl TransportSolution {
    /// Mass moved between distinct support values, in integer units.
    pub fn off_diagonal_units(&self, supply: &DiscreteDist, demand: &DiscreteDist) -> u64 {
        let mut s = 0;
        for (i, row) in self.plan.iter().enumerate() {
            for (j, &f) in row.iter().enumerate() {
                if supply.support()[i] != demand.support()[j] {
                    s += f;
                }
            }
        }
        s
    }
}

/// Scales masses to integers, rejecting anything not representable at
/// the declared denominator.
pub fn integer_masses(d: &DiscreteDist, denominator: u64) -> Result<Vec<u64>> {
    if denominator == 0 || denominator > MAX_DENOMINATOR {
        return Err(Error::Config(format!("denominator {denominator} outside 1..={MAX_DENOMINATOR}")));
    }
    d.mass()
        .iter()
        .map(|&m| {
            let s = m * denominator as f64;
            let r = s.round();
            if (s - r).abs() > 1e-9 * denominator as f64 {
                Err(Error::Config(format!("mass {m} is not a multiple of 1/{denominator}")))
            } else {
                Ok(r as u64)
            }
        })
        .collect()
}

struct Edge {
    to: usize,
    cap: u64,
    cost: f64,
}

/// Successive shortest paths with Bellman-Ford on the residual graph.
struct FlowGraph {
    edges: Vec<Edge>,
    adj: Vec<Vec<usize>>,
}

impl FlowGraph {
    fn new(n: usize) -> Self {
        Self { edges: Vec::new(), adj: vec![Vec::new(); n] }
    }

    fn add(&mut self, from: usize, to: usize, cap: u64, cost: f64) -> usize {
        let id = self.edges.len();
        self.edges.push(Edge { to, cap, cost });
        self.adj[from].push(id);
        self.edges.push(Edge { to: from, cap: 0, cost: -cost });
        self.adj[to].push(id + 1);
        id
    }

    fn run(&mut self, s: usize, t: usize) -> u64 {
        let n = self.adj.len();
        let mut total = 0;
        loop {
            let mut dist = vec![f64::INFINITY; n];
            let mut prev: Vec<Option<usize>> = vec![None; n];
            dist[s] = 0.0;
            // at most n - 1 relaxation rounds; the graph has no negative cycles
            for _ in 0..n {
                let mut changed = false;
                for u in 0..n {
                    if dist[u].is_infinite() {
                        continue;
                    }
                    for &e in &self.adj[u] {
                        let ed = &self.edges[e];
                        if ed.cap > 0 && dist[u] + ed.cost < dist[ed.to] - 1e-15 {
                            dist[ed.to] = dist[u] + ed.cost;
                            prev[ed.to] = Some(e);
                            changed = true;
                        }
                    }
                }
                if !changed {
                    break;
                }
            }
            if dist[t].is_infinite() {
                return total;
            }
            let mut push = u64::MAX;
            let mut v = t;
            while let Some(e) = prev[v] {
                push = push.min(self.edges[e].cap);
                v = self.edges[e ^ 1].to;
            }
            let mut v = t;
            while let Some(e) = prev[v] {
                self.edges[e].cap -= push;
                self.edges[e ^ 1].cap += push;
                v = self.edges[e ^ 1].to;
            }
            total += push;
        }
    }
}

/// Exact optimal transport between integer-scaled masses.
pub fn oracle_min_cost_transport(inst: &TransportInstance) -> Result<TransportSolution> {
    let sup = integer_masses(&inst.supply, inst.denominator)?;
    let dem = integer_masses(&inst.demand, inst.denominator)?;
    let (ns, nd) = (sup.len(), dem.len());
    if inst.cost.len() != ns || inst.cost.iter().any(|r| r.len() != nd) {
        return Err(Error::Config("cost matrix shape does not match supports".into()));
    }
    let total: u64 = sup.iter().sum();
    if total != dem.iter().sum::<u64>() {
        return Err(Error::Config("unbalanced transport instance".into()));
    }
    let (s, t) = (ns + nd, ns + nd + 1);
    let mut g = FlowGraph::new(ns + nd + 2);
    for (i, &m) in sup.iter().enumerate() {
        g.add(s, i, m, 0.0);
    }
    for (j, &m) in dem.iter().enumerate() {
        g.add(ns + j, t, m, 0.0);
    }
    let mut ids = vec![vec![0; nd]; ns];
    for i in 0..ns {
        for j in 0..nd {
            ids[i][j] = g.add(i, ns + j, total, inst.cost[i][j]);
        }
    }
    let sent = g.run(s, t);
    debug_assert_eq!(sent, total);
    let mut plan = vec![vec![0u64; nd]; ns];
    let mut value = 0.0;
    for i in 0..ns {
        for j in 0..nd {
            let f = g.edges[ids[i][j] ^ 1].cap;
            plan[i][j] = f;
            value += f as f64 * inst.cost[i][j];
        }
    }
    Ok(TransportSolution { value: value / inst.denominator as f64, plan, denominator: inst.denominator })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Min,
    Max,
}

/// A finite outcome law with exact rational atoms (sorted, masses sum to 1).
#[derive(Debug, Clone, PartialEq)]
pub struct ExactLaw {
    pub ys: Vec<BigRational>,
    pub ps: Vec<BigRational>,
}

impl ExactLaw {
    pub fn new(mut pts: Vec<(BigRational, BigRational)>) -> Result<Self> {
        pts.sort_by(|a, b| a.0.cmp(&b.0));
        let total: BigRational = pts.iter().map(|p| p.1.clone()).sum();
        if !total.is_one() || pts.iter().any(|p| p.1.is_negative()) {
            return Err(Error::InvalidDistribution("exact masses must be >= 0 and sum to 1".into()));
        }
        let (ys, ps) = pts.into_iter().unzip();
        Ok(Self { ys, ps })
    }

    /// Exact binary expansion of a float law, renormalized to total 1.
    pub fn from_dist(d: &DiscreteDist) -> Self {
        let ps: Vec<BigRational> = d.mass().iter().map(|&m| rat(m)).collect();
        let total: BigRational = ps.iter().cloned().sum();
        Self { ys: d.support().iter().map(|&y| rat(y)).collect(), ps: ps.into_iter().map(|p| p / &total).collect() }
    }

    pub fn mean(&self) -> BigRational {
        self.ys.iter().zip(&self.ps).map(|(y, p)| y * p).sum()
    }
}

pub fn rat(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite float")
}

pub fn rat_to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Greedy multiplier in exact arithmetic: returns `(value, h)`.
pub fn greedy_multiplier_exact(law: &ExactLaw, gamma: &BigRational, dir: Direction) -> (BigRational, Vec<BigRational>) {
    let n = law.ys.len();
    let inv = gamma.recip();
    let mut h = vec![inv.clone(); n];
    let mut left = (gamma + BigRational::one()).recip();
    let order: Vec<usize> = match dir {
        Direction::Min => (0..n).collect(),
        Direction::Max => (0..n).rev().collect(),
    };
    for i in order {
        let p = &law.ps[i];
        if left.is_zero() || p.is_zero() {
            continue;
        }
        let take = if &left < p { left.clone() } else { p.clone() };
        left -= &take;
        h[i] = (gamma * &take + (p - &take) * &inv) / p;
    }
    let value = law.ys.iter().zip(&law.ps).zip(&h).map(|((y, p), h)| y * p * h).sum();
    (value, h)
}

/// Optimum of `E[Y h]` over `1/gamma <= h <= gamma`, `E[h] = 1`, by
/// enumerating every basic solution: all coordinates but one at a bound,
/// the free one fixed by the equality.
pub fn vertex_lp_exact(law: &ExactLaw, gamma: &BigRational, dir: Direction) -> Option<BigRational> {
    let idx: Vec<usize> = (0..law.ys.len()).filter(|&i| !law.ps[i].is_zero()).collect();
    let n = idx.len();
    let lo = gamma.recip();
    let one = BigRational::one();
    let mut best: Option<BigRational> = None;
    for free in 0..n {
        for mask in 0u64..(1u64 << (n - 1)) {
            let mut acc = BigRational::zero();
            let mut val = BigRational::zero();
            let mut bit = 0;
            for (k, &i) in idx.iter().enumerate() {
                if k == free {
                    continue;
                }
                let h = if mask >> bit & 1 == 1 { gamma.clone() } else { lo.clone() };
                bit += 1;
                acc += &law.ps[i] * &h;
                val += &law.ys[i] * &law.ps[i] * &h;
            }
            let i = idx[free];
            let hf = (&one - &acc) / &law.ps[i];
            if hf < lo || &hf > gamma {
                continue;
            }
            val += &law.ys[i] * &law.ps[i] * &hf;
            best = Some(match best {
                None => val,
                Some(b) => match dir {
                    Direction::Min => b.min(val),
                    Direction::Max => b.max(val),
                },
            });
        }
    }
    best
}

/// Float entry point for the exact greedy solver.
pub fn oracle_sharp_multiplier(cond_y: &DiscreteDist, gamma: f64, dir: Direction) -> f64 {
    let law = ExactLaw::from_dist(cond_y);
    rat_to_f64(&greedy_multiplier_exact(&law, &rat(gamma), dir).0)
}

pub fn big(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::{tv_distance, wasserstein_line};

    fn ratio(a: i64, b: i64) -> BigRational {
        BigRational::new(BigInt::from(a), BigInt::from(b))
    }

    #[test]
    fn flow_tv_binary() {
        let p = DiscreteDist::bernoulli(0.5).unwrap();
        let q = DiscreteDist::bernoulli(0.8).unwrap();
        let inst = TransportInstance::with_cost(p.clone(), q.clone(), 10, |a, b| f64::from(u8::from(a != b)));
        let sol = oracle_min_cost_transport(&inst).unwrap();
        assert!((sol.value - 0.3).abs() < 1e-12);
        assert_eq!(sol.off_diagonal_units(&p, &q), 3);
        assert!((sol.value - tv_distance(&p, &q)).abs() < 1e-12);
    }

    #[test]
    fn flow_w1_three_point() {
        let p = DiscreteDist::uniform(&[0.0, 1.0, 2.0]).unwrap();
        let q = DiscreteDist::new(vec![0.0, 1.0, 2.0], vec![1.0 / 7.0, 2.0 / 7.0, 4.0 / 7.0]).unwrap();
        let inst = TransportInstance::with_cost(p.clone(), q.clone(), 21, |a, b| (a - b).abs());
        let sol = oracle_min_cost_transport(&inst).unwrap();
        // integer value: 21 * W1 = 9 units of distance
        let units: u64 = (0..3)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .map(|(i, j)| sol.plan[i][j] * (i as i64 - j as i64).unsigned_abs())
            .sum();
        assert_eq!(units, 9);
        assert!((sol.value - wasserstein_line(&p, &q, |d| d)).abs() < 1e-12);
    }

    #[test]
    fn flow_identical_marginals() {
        let p = DiscreteDist::uniform(&[1.0, 2.0, 5.0]).unwrap();
        let inst = TransportInstance::with_cost(p.clone(), p.clone(), 3, |a, b| (a - b).powi(2));
        assert_eq!(oracle_min_cost_transport(&inst).unwrap().value, 0.0);
    }

    #[test]
    fn flow_rejects_bad_instances() {
        let p = DiscreteDist::bernoulli(0.5).unwrap();
        let q = DiscreteDist::bernoulli(1.0 / 3.0).unwrap();
        let inst = TransportInstance::with_cost(p, q, 10, |a, b| (a - b).abs());
        assert!(oracle_min_cost_transport(&inst).is_err());
        let p = DiscreteDist::bernoulli(0.5).unwrap();
        let inst = TransportInstance::with_cost(p.clone(), p, 2_000_000, |a, b| (a - b).abs());
        assert!(oracle_min_cost_transport(&inst).is_err());
    }

    #[test]
    fn greedy_and_vertex_uniform_four() {
        let law = ExactLaw::new((1..=4).map(|y| (big(y), ratio(1, 4))).collect()).unwrap();
        let g = big(3);
        let (lo, h) = greedy_multiplier_exact(&law, &g, Direction::Min);
        assert_eq!(lo, ratio(3, 2));
        let eh: BigRational = h.iter().zip(&law.ps).map(|(h, p)| h * p).sum();
        assert!(eh.is_one());
        let (hi, _) = greedy_multiplier_exact(&law, &g, Direction::Max);
        assert_eq!(hi, ratio(7, 2));
        assert_eq!(vertex_lp_exact(&law, &g, Direction::Min).unwrap(), lo);
        assert_eq!(vertex_lp_exact(&law, &g, Direction::Max).unwrap(), hi);
    }

    #[test]
    fn gamma_one_gives_mean() {
        let law = ExactLaw::new(vec![(big(1), ratio(1, 3)), (big(4), ratio(2, 3))]).unwrap();
        for dir in [Direction::Min, Direction::Max] {
            assert_eq!(greedy_multiplier_exact(&law, &big(1), dir).0, law.mean());
            assert_eq!(vertex_lp_exact(&law, &big(1), dir).unwrap(), law.mean());
        }
        let d = DiscreteDist::uniform(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(oracle_sharp_multiplier(&d, 3.0, Direction::Min), 1.5);
        assert_eq!(oracle_sharp_multiplier(&d, 3.0, Direction::Max), 3.5);
    }
}
