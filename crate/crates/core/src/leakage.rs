//! Database leakage: what the user learns about the accepted samples beyond
//! its own input, measured as `I(y_1..y_M; view | x)` in log base `q`.
//!
//! Queries carry one-time-padded inputs and every interference coefficient is
//! padded by server randomness, so the user's view reduces to the statistic
//! its decode exposes. [`leakage_exact`] works on that statistic;
//! [`leakage_full_oracle`] enumerates the whole protocol view on tiny
//! instances and exists to confirm the reduction.

use std::collections::{HashMap, HashSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::PrimeField;
use crate::protocol::{
    ClientRandomness, Database, SchemeConfig, SchemeKind, ServerSharedRandomness, UserInput,
    Variant,
};
use crate::schemes::{answer, gen_query};

/// Largest number of mask draws `d_min^M` marginalised exactly; beyond it the
/// masked entropy is estimated by Monte Carlo.
pub const MASK_EXACT_LIMIT: u128 = 1_000_000;

/// Default cap on enumerated `(x, tuple)` pairs.
pub const DEFAULT_BUDGET: u128 = 1 << 32;

/// The statistic a decode exposes for one instance: distances, consecutive
/// differences mod `q`, or masked distances mod `q`.
pub fn revealed_statistic(
    variant: Variant,
    field: PrimeField,
    x: &[u64],
    ys: &[Vec<u64>],
    w: Option<&[u64]>,
    mu: Option<&[u64]>,
) -> Result<Vec<u64>> {
    let dists: Vec<u64> = ys.iter().map(|y| distance(x, y, w)).collect();
    statistic_from_distances(variant.kind, field, &dists, mu)
}

fn statistic_from_distances(
    kind: SchemeKind,
    field: PrimeField,
    dists: &[u64],
    mu: Option<&[u64]>,
) -> Result<Vec<u64>> {
    match kind {
        SchemeKind::Baseline => Ok(dists.iter().map(|&v| field.reduce(v)).collect()),
        SchemeKind::Diff => Ok(dists
            .windows(2)
            .map(|p| field.sub(field.reduce(p[0]), field.reduce(p[1])))
            .collect()),
        SchemeKind::Mask => {
            let mu = mu.ok_or_else(|| Error::InvalidInput("mask statistic needs a mask draw".into()))?;
            if mu.len() != dists.len() {
                return Err(Error::DimensionMismatch {
                    expected: dists.len(),
                    got: mu.len(),
                });
            }
            Ok(dists
                .iter()
                .zip(mu)
                .map(|(&v, &u)| field.add(field.reduce(v), field.reduce(u)))
                .collect())
        }
    }
}

fn distance(x: &[u64], y: &[u64], w: Option<&[u64]>) -> u64 {
    crate::mask::integer_distance(x, y, w)
}

/// How the accepted tuple `(y_1..y_M)` is drawn given `x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TuplePrior {
    /// Each `y_i` independently uniform over `[0:R]^d \ {x}`.
    IidGrid,
    /// Ordered tuples of pairwise distinct points of `[0:R]^d \ {x}`, uniform.
    DistinctGrid,
    /// Uniform over the listed tuples of pool indices, independent of `x`.
    Listed {
        pool: Vec<Vec<u64>>,
        tuples: Vec<Vec<usize>>,
    },
}

/// Query prior (uniform over `queries`) and conditional tuple prior.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorModel {
    pub r: u64,
    pub d: usize,
    pub m: usize,
    pub queries: Vec<Vec<u64>>,
    pub tuples: TuplePrior,
    /// Public weights for weighted variants.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<u64>>,
}

/// Every point of `[0:R]^d` in lexicographic order.
pub fn grid(r: u64, d: usize) -> Vec<Vec<u64>> {
    let mut out = vec![Vec::with_capacity(d)];
    for _ in 0..d {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..=r).map(move |v| {
                    let mut p = p.clone();
                    p.push(v);
                    p
                })
            })
            .collect();
    }
    out
}

impl PriorModel {
    /// `x` uniform over the whole grid.
    pub fn uniform_grid(r: u64, d: usize, m: usize, tuples: TuplePrior) -> Self {
        PriorModel {
            r,
            d,
            m,
            queries: grid(r, d),
            tuples,
            weights: None,
        }
    }

    /// Queries from `rejected` (all of them, or `n_queries` drawn without
    /// replacement) and up to `n_tuples` distinct ordered tuples of distinct
    /// indices into `accepted`, drawn without replacement.
    pub fn sampled<R: Rng + ?Sized>(
        accepted: &[Vec<u64>],
        rejected: &[Vec<u64>],
        m: usize,
        n_tuples: usize,
        n_queries: Option<usize>,
        r: u64,
        rng: &mut R,
    ) -> Result<Self> {
        if accepted.is_empty() {
            return Err(Error::EmptyPool("accepted pool"));
        }
        if rejected.is_empty() {
            return Err(Error::EmptyPool("rejected pool"));
        }
        if m == 0 || m > accepted.len() {
            return Err(Error::InvalidInput(format!(
                "M = {m} must lie in 1..={}",
                accepted.len()
            )));
        }
        if n_tuples == 0 {
            return Err(Error::InvalidInput("need at least one sampled tuple".into()));
        }
        let d = accepted[0].len();
        let tuples = sample_tuples(accepted.len(), m, n_tuples, rng);
        let mut queries = rejected.to_vec();
        if let Some(n) = n_queries {
            queries.shuffle(rng);
            queries.truncate(n.max(1));
        }
        let prior = PriorModel {
            r,
            d,
            m,
            queries,
            tuples: TuplePrior::Listed {
                pool: accepted.to_vec(),
                tuples,
            },
            weights: None,
        };
        prior.validate()?;
        Ok(prior)
    }

    pub fn describe(&self) -> String {
        let t = match &self.tuples {
            TuplePrior::IidGrid => "iid over grid minus x".to_string(),
            TuplePrior::DistinctGrid => "distinct tuples over grid minus x".to_string(),
            TuplePrior::Listed { pool, tuples } => {
                format!("{} listed tuples from a pool of {}", tuples.len(), pool.len())
            }
        };
        format!(
            "R={} d={} M={}; x uniform over {} points; y {}",
            self.r,
            self.d,
            self.m,
            self.queries.len(),
            t
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.queries.is_empty() {
            return Err(Error::EmptyPool("query prior"));
        }
        if self.m == 0 || self.d == 0 {
            return Err(Error::InvalidInput("M and d must be at least 1".into()));
        }
        let in_range = |p: &Vec<u64>| p.len() == self.d && p.iter().all(|&v| v <= self.r);
        if !self.queries.iter().all(in_range) {
            return Err(Error::InvalidInput(format!(
                "queries must lie in [0:{}]^{}",
                self.r, self.d
            )));
        }
        if let Some(w) = &self.weights {
            if w.len() != self.d {
                return Err(Error::DimensionMismatch {
                    expected: self.d,
                    got: w.len(),
                });
            }
        }
        match &self.tuples {
            TuplePrior::IidGrid | TuplePrior::DistinctGrid => {
                let others = grid_size(self.r, self.d).saturating_sub(1);
                let needed = if self.tuples == TuplePrior::DistinctGrid {
                    self.m as u128
                } else {
                    1
                };
                if others < needed {
                    return Err(Error::InvalidInput("grid too small for the tuple prior".into()));
                }
            }
            TuplePrior::Listed { pool, tuples } => {
                if tuples.is_empty() {
                    return Err(Error::EmptyPool("listed tuples"));
                }
                if !pool.iter().all(in_range) {
                    return Err(Error::InvalidInput(format!(
                        "pool samples must lie in [0:{}]^{}",
                        self.r, self.d
                    )));
                }
                if tuples
                    .iter()
                    .any(|t| t.len() != self.m || t.iter().any(|&i| i >= pool.len()))
                {
                    return Err(Error::InvalidInput(
                        "listed tuples must hold M valid pool indices".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Number of `(x, tuple)` pairs an exact computation walks.
    pub fn support_size(&self) -> u128 {
        let per_x = match &self.tuples {
            TuplePrior::IidGrid => grid_size(self.r, self.d)
                .saturating_sub(1)
                .saturating_pow(self.m as u32),
            TuplePrior::DistinctGrid => {
                let n = grid_size(self.r, self.d).saturating_sub(1);
                (0..self.m as u128).fold(1u128, |acc, k| acc.saturating_mul(n.saturating_sub(k)))
            }
            TuplePrior::Listed { tuples, .. } => tuples.len() as u128,
        };
        per_x.saturating_mul(self.queries.len() as u128)
    }

    /// `H(y | x)` in nats.
    fn tuple_entropy_nats(&self) -> f64 {
        let per_x = |x: &Vec<u64>| -> f64 {
            match &self.tuples {
                TuplePrior::IidGrid => {
                    let n = (grid_size(self.r, self.d) - 1) as f64;
                    self.m as f64 * n.ln()
                }
                TuplePrior::DistinctGrid => {
                    let n = grid_size(self.r, self.d) - 1;
                    (0..self.m as u128).map(|k| ((n - k) as f64).ln()).sum()
                }
                TuplePrior::Listed { tuples, .. } => {
                    let _ = x;
                    let mut counts: HashMap<&[usize], f64> = HashMap::new();
                    for t in tuples {
                        *counts.entry(t.as_slice()).or_default() += 1.0;
                    }
                    entropy_nats(counts.into_values(), tuples.len() as f64)
                }
            }
        };
        match self.tuples {
            // independent of x
            TuplePrior::Listed { .. } => per_x(&self.queries[0]),
            _ => self.queries.iter().map(per_x).sum::<f64>() / self.queries.len() as f64,
        }
    }

    /// The accepted tuples with their probabilities given `x`.
    fn tuples_given(&self, x: &[u64]) -> Vec<(Vec<Vec<u64>>, f64)> {
        match &self.tuples {
            TuplePrior::IidGrid | TuplePrior::DistinctGrid => {
                let others: Vec<Vec<u64>> =
                    grid(self.r, self.d).into_iter().filter(|p| p != x).collect();
                let distinct = self.tuples == TuplePrior::DistinctGrid;
                let mut out = Vec::new();
                let mut idx = Vec::with_capacity(self.m);
                walk_tuples(others.len(), self.m, distinct, &mut idx, &mut |t| {
                    out.push(t.iter().map(|&i| others[i].clone()).collect());
                });
                let p = 1.0 / out.len() as f64;
                out.into_iter().map(|t| (t, p)).collect()
            }
            TuplePrior::Listed { pool, tuples } => {
                let p = 1.0 / tuples.len() as f64;
                tuples
                    .iter()
                    .map(|t| (t.iter().map(|&i| pool[i].clone()).collect(), p))
                    .collect()
            }
        }
    }

    /// Distribution of the distance tuple `(d_1(x)..d_M(x))` given `x`.
    fn distance_tuples(&self, x: &[u64]) -> Vec<(Vec<u64>, f64)> {
        let w = self.weights.as_deref();
        match &self.tuples {
            TuplePrior::IidGrid => {
                // product of identical per-index distance distributions
                let mut hist: HashMap<u64, f64> = HashMap::new();
                let others: Vec<Vec<u64>> =
                    grid(self.r, self.d).into_iter().filter(|p| p != x).collect();
                let p = 1.0 / others.len() as f64;
                for y in &others {
                    *hist.entry(distance(x, y, w)).or_default() += p;
                }
                let mut marginal: Vec<(u64, f64)> = hist.into_iter().collect();
                marginal.sort_unstable_by_key(|e| e.0);
                let mut out: Vec<(Vec<u64>, f64)> = vec![(Vec::with_capacity(self.m), 1.0)];
                for _ in 0..self.m {
                    out = out
                        .into_iter()
                        .flat_map(|(t, pt)| {
                            marginal.iter().map(move |&(v, pv)| {
                                let mut t = t.clone();
                                t.push(v);
                                (t, pt * pv)
                            })
                        })
                        .collect();
                }
                out
            }
            TuplePrior::DistinctGrid => {
                let others: Vec<Vec<u64>> =
                    grid(self.r, self.d).into_iter().filter(|p| p != x).collect();
                let dists: Vec<u64> = others.iter().map(|y| distance(x, y, w)).collect();
                let mut hist: HashMap<Vec<u64>, f64> = HashMap::new();
                let mut count = 0u64;
                let mut idx = Vec::with_capacity(self.m);
                walk_tuples(others.len(), self.m, true, &mut idx, &mut |t| {
                    count += 1;
                    *hist.entry(t.iter().map(|&i| dists[i]).collect()).or_default() += 1.0;
                });
                normalise(hist, count as f64)
            }
            TuplePrior::Listed { pool, tuples } => {
                let dists: Vec<u64> = pool.iter().map(|y| distance(x, y, w)).collect();
                let mut hist: HashMap<Vec<u64>, f64> = HashMap::new();
                for t in tuples {
                    *hist.entry(t.iter().map(|&i| dists[i]).collect()).or_default() += 1.0;
                }
                normalise(hist, tuples.len() as f64)
            }
        }
    }
}

fn grid_size(r: u64, d: usize) -> u128 {
    ((r + 1) as u128).saturating_pow(d as u32)
}

fn normalise(hist: HashMap<Vec<u64>, f64>, total: f64) -> Vec<(Vec<u64>, f64)> {
    hist.into_iter().map(|(k, c)| (k, c / total)).collect()
}

/// Calls `f` on every ordered `m`-tuple of indices below `n` (pairwise
/// distinct when `distinct`).
fn walk_tuples(n: usize, m: usize, distinct: bool, idx: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
    if idx.len() == m {
        f(idx);
        return;
    }
    for i in 0..n {
        if distinct && idx.contains(&i) {
            continue;
        }
        idx.push(i);
        walk_tuples(n, m, distinct, idx, f);
        idx.pop();
    }
}

/// Up to `n` distinct ordered tuples of `m` distinct indices below `pool`,
/// without replacement; every tuple when `n` covers the whole support.
fn sample_tuples<R: Rng + ?Sized>(pool: usize, m: usize, n: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let total = (0..m as u128).fold(1u128, |acc, k| acc.saturating_mul(pool as u128 - k));
    if total <= 2 * n as u128 {
        let mut all = Vec::new();
        let mut idx = Vec::with_capacity(m);
        walk_tuples(pool, m, true, &mut idx, &mut |t| all.push(t.to_vec()));
        all.shuffle(rng);
        all.truncate(n);
        return all;
    }
    let mut seen = HashSet::with_capacity(n);
    let mut out = Vec::with_capacity(n);
    let indices: Vec<usize> = (0..pool).collect();
    while out.len() < n {
        let t: Vec<usize> = indices.choose_multiple(rng, m).copied().collect();
        if seen.insert(t.clone()) {
            out.push(t);
        }
    }
    out
}

fn entropy_nats(weights: impl IntoIterator<Item = f64>, total: f64) -> f64 {
    weights
        .into_iter()
        .filter(|&c| c > 0.0)
        .map(|c| {
            let p = c / total;
            -p * p.ln()
        })
        .sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    MonteCarlo,
    Sampled,
    Oracle,
}

/// Field and mask parameters plus computation limits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeakageParams {
    pub q: PrimeField,
    /// Mask support size; ignored by non-mask variants.
    #[serde(default = "one")]
    pub d_min: u64,
    /// Cap on enumerated `(x, tuple)` pairs.
    #[serde(default = "default_budget")]
    pub budget: u128,
    /// Monte Carlo draws per query when the mask is not marginalised exactly.
    #[serde(default = "default_mc")]
    pub mc_samples: usize,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> u64 {
    1
}

fn default_budget() -> u128 {
    DEFAULT_BUDGET
}

fn default_mc() -> usize {
    20_000
}

impl LeakageParams {
    pub fn new(q: PrimeField) -> Self {
        LeakageParams {
            q,
            d_min: 1,
            budget: DEFAULT_BUDGET,
            mc_samples: default_mc(),
            seed: 0,
        }
    }

    pub fn with_d_min(mut self, d_min: u64) -> Self {
        self.d_min = d_min;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeakageReport {
    pub variant: Variant,
    pub d_min: Option<u64>,
    pub prior: String,
    /// `I(y; view | x)` in log base `q`.
    pub value: f64,
    pub base: u64,
    /// `H(y | x)`, an upper bound on `value`, in the same base.
    pub h_y: f64,
    pub method: Method,
    pub queries: usize,
    /// `(x, tuple)` pairs enumerated.
    pub pairs: u128,
    /// Mask draws marginalised per tuple, when exact.
    pub mask_draws: Option<u128>,
    /// Standard error of a Monte Carlo estimate.
    pub std_error: Option<f64>,
}

impl LeakageReport {
    pub fn scheme(&self) -> String {
        match self.d_min {
            Some(d) => format!("{}(d_min={d})", self.variant.name()),
            None => self.variant.name(),
        }
    }
}

fn check_inputs(variant: Variant, prior: &PriorModel, params: &LeakageParams) -> Result<()> {
    prior.validate()?;
    if variant.weighted != prior.weights.is_some() {
        return Err(Error::InvalidInput(
            "weights must be given exactly for weighted variants".into(),
        ));
    }
    if variant.kind == SchemeKind::Diff && prior.m < 2 {
        return Err(Error::InvalidConfig("difference schemes need M >= 2".into()));
    }
    if variant.kind == SchemeKind::Mask && (params.d_min == 0 || params.d_min > params.q.modulus()) {
        return Err(Error::InvalidConfig(format!(
            "mask support {} must lie in 1..=q",
            params.d_min
        )));
    }
    let pairs = prior.support_size();
    if pairs > params.budget {
        return Err(Error::BudgetExceeded {
            needed: pairs,
            budget: params.budget,
        });
    }
    Ok(())
}

/// Per-query mutual information in nats, with its Monte Carlo variance.
fn leakage_given_x(
    kind: SchemeKind,
    dist: &[(Vec<u64>, f64)],
    params: &LeakageParams,
    m: usize,
    rng: &mut ChaCha20Rng,
) -> (f64, f64) {
    let f = params.q;
    match kind {
        SchemeKind::Baseline | SchemeKind::Diff => {
            let mut hist: HashMap<Vec<u64>, f64> = HashMap::with_capacity(dist.len());
            for (t, p) in dist {
                let s = statistic_from_distances(kind, f, t, None).expect("unmasked statistic");
                *hist.entry(s).or_default() += p;
            }
            (entropy_nats(hist.into_values(), 1.0), 0.0)
        }
        SchemeKind::Mask => {
            let dm = params.d_min;
            let draws = (dm as u128).saturating_pow(m as u32);
            let own = m as f64 * (dm as f64).ln();
            if draws <= MASK_EXACT_LIMIT {
                let pd = 1.0 / draws as f64;
                let mut hist: HashMap<Vec<u64>, f64> = HashMap::with_capacity(dist.len() * draws as usize);
                let mut mu = vec![0u64; m];
                for (t, p) in dist {
                    mu.iter_mut().for_each(|u| *u = 0);
                    for _ in 0..draws {
                        let s = statistic_from_distances(kind, f, t, Some(&mu)).expect("mask statistic");
                        *hist.entry(s).or_default() += p * pd;
                        for u in mu.iter_mut() {
                            *u += 1;
                            if *u < dm {
                                break;
                            }
                            *u = 0;
                        }
                    }
                }
                (entropy_nats(hist.into_values(), 1.0) - own, 0.0)
            } else {
                // H(S) = −E[ln p(S)], p(S) computed exactly over the tuples
                let mut cdf = Vec::with_capacity(dist.len());
                let mut acc = 0.0;
                for (_, p) in dist {
                    acc += p;
                    cdf.push(acc);
                }
                let log_draw = m as f64 * (dm as f64).ln();
                let n = params.mc_samples.max(2);
                let mut sum = 0.0;
                let mut sum_sq = 0.0;
                for _ in 0..n {
                    let u: f64 = rng.random::<f64>() * acc;
                    let k = cdf.partition_point(|&c| c < u).min(dist.len() - 1);
                    let mu: Vec<u64> = (0..m).map(|_| rng.random_range(0..dm)).collect();
                    let s = statistic_from_distances(kind, f, &dist[k].0, Some(&mu)).expect("mask statistic");
                    let ps: f64 = dist
                        .iter()
                        .filter(|(t, _)| {
                            t.iter()
                                .zip(&s)
                                .all(|(&di, &si)| f.sub(si, f.reduce(di)) < dm)
                        })
                        .map(|(_, p)| p)
                        .sum();
                    let v = -(ps.ln() - log_draw);
                    sum += v;
                    sum_sq += v * v;
                }
                let mean = sum / n as f64;
                let var = (sum_sq / n as f64 - mean * mean).max(0.0) / (n - 1) as f64;
                (mean - own, var)
            }
        }
    }
}

/// `I(y; S | x)` for the revealed statistic `S`, averaged over the query
/// prior, marginalising mask draws.
pub fn leakage_exact(variant: Variant, prior: &PriorModel, params: &LeakageParams) -> Result<LeakageReport> {
    check_inputs(variant, prior, params)?;
    let m = prior.m;
    let per_x: Vec<(f64, f64)> = prior
        .queries
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let mut rng = ChaCha20Rng::seed_from_u64(params.seed);
            rng.set_stream(i as u64);
            let dist = prior.distance_tuples(x);
            leakage_given_x(variant.kind, &dist, params, m, &mut rng)
        })
        .collect();
    let nq = per_x.len() as f64;
    let ln_q = (params.q.modulus() as f64).ln();
    let value = per_x.iter().map(|e| e.0).sum::<f64>() / nq / ln_q;
    let is_mask = variant.kind == SchemeKind::Mask;
    let draws = (params.d_min as u128).saturating_pow(m as u32);
    let mc = is_mask && draws > MASK_EXACT_LIMIT;
    Ok(LeakageReport {
        variant,
        d_min: is_mask.then_some(params.d_min),
        prior: prior.describe(),
        value: value.max(0.0),
        base: params.q.modulus(),
        h_y: prior.tuple_entropy_nats() / ln_q,
        method: if mc { Method::MonteCarlo } else { Method::Exact },
        queries: prior.queries.len(),
        pairs: prior.support_size(),
        mask_draws: (is_mask && !mc).then_some(draws),
        std_error: mc.then(|| per_x.iter().map(|e| e.1).sum::<f64>().sqrt() / nq / ln_q),
    })
}

/// Plug-in leakage over sampled tuples from dataset pools, each sampled
/// tuple treated as equally likely.
#[allow(clippy::too_many_arguments)]
pub fn leakage_sampled(
    variant: Variant,
    accepted: &[Vec<u64>],
    rejected: &[Vec<u64>],
    m: usize,
    n_tuples: usize,
    n_queries: Option<usize>,
    r: u64,
    params: &LeakageParams,
) -> Result<LeakageReport> {
    let mut rng = ChaCha20Rng::seed_from_u64(params.seed);
    let prior = PriorModel::sampled(accepted, rejected, m, n_tuples, n_queries, r, &mut rng)?;
    let mut report = leakage_exact(variant, &prior, params)?;
    if report.method == Method::Exact {
        report.method = Method::Sampled;
    }
    Ok(report)
}

/// Largest field, dimension and sample count the full-view oracle accepts.
pub const ORACLE_MAX_Q: u64 = 7;
pub const ORACLE_MAX_D: usize = 2;
pub const ORACLE_MAX_M: usize = 2;

/// `I(y; Q_1..Q_N, A_1..A_N | x)` from the complete joint distribution over
/// `(x, y, Z, Z′, μ)`, pushed through the real query and answer functions.
pub fn leakage_full_oracle(
    variant: Variant,
    prior: &PriorModel,
    params: &LeakageParams,
) -> Result<LeakageReport> {
    check_inputs(variant, prior, params)?;
    if variant.weighted {
        return Err(Error::InvalidConfig("the full-view oracle covers unweighted variants".into()));
    }
    let q = params.q.modulus();
    if q > ORACLE_MAX_Q || prior.d > ORACLE_MAX_D || prior.m > ORACLE_MAX_M {
        return Err(Error::BudgetExceeded {
            needed: (q as u128).pow((prior.d + prior.m) as u32),
            budget: (ORACLE_MAX_Q as u128).pow((ORACLE_MAX_D + ORACLE_MAX_M) as u32),
        });
    }
    let n = variant.servers();
    let config = SchemeConfig {
        scheme: variant.kind,
        weighted: false,
        field: params.q,
        r: prior.r,
        d: prior.d,
        m: prior.m,
        l: 1,
        alphas: (1..=n as u64).collect(),
        d_min: params.d_min,
        sample_scale: 1,
        max_distance: None,
    };
    config.validate()?;
    let len = config.answer_len();
    let is_mask = variant.kind == SchemeKind::Mask;
    let mask_draws = if is_mask { params.d_min.pow(len as u32) } else { 1 };
    let pads = q.pow(prior.d as u32);
    let zprimes = q.pow(len as u32);
    let randomness = pads as f64 * zprimes as f64 * mask_draws as f64;

    let per_x: Vec<Result<(f64, u128)>> = prior
        .queries
        .par_iter()
        .map(|x| {
            let input = UserInput::unweighted(x.clone());
            let tuples = prior.tuples_given(x);
            let mut joint: HashMap<Vec<u64>, f64> = HashMap::new();
            let mut h_given_y = 0.0;
            let mut visited = 0u128;
            for (ys, py) in &tuples {
                let db = Database::new(ys.clone(), prior.r)?;
                let mut given_y: HashMap<Vec<u64>, f64> = HashMap::new();
                for z in 0..pads {
                    let z1 = digits(z, q, prior.d);
                    let mut cr = ClientRandomness::from_parts(z1, Vec::new());
                    let bundle = gen_query(&input, &mut cr, &config)?;
                    for zp in 0..zprimes {
                        for mu in 0..mask_draws {
                            let sr = ServerSharedRandomness {
                                zprime1: digits(zp, q, len),
                                zprime2: Vec::new(),
                                mu: if is_mask { digits(mu, params.d_min, len) } else { Vec::new() },
                            };
                            let mut view = Vec::new();
                            for (k, query) in bundle.per_server.iter().enumerate() {
                                view.extend(query.to_symbols());
                                view.extend(answer(&db, query, &sr, k + 1, &config)?);
                            }
                            *given_y.entry(view).or_default() += 1.0;
                            visited += 1;
                        }
                    }
                }
                for (view, c) in &given_y {
                    *joint.entry(view.clone()).or_default() += py * c / randomness;
                }
                h_given_y += py * entropy_nats(given_y.into_values(), randomness);
            }
            Ok((entropy_nats(joint.into_values(), 1.0) - h_given_y, visited))
        })
        .collect();
    let mut total = 0.0;
    let mut visited = 0u128;
    for r in per_x {
        let (v, c) = r?;
        total += v;
        visited += c;
    }
    let ln_q = (q as f64).ln();
    Ok(LeakageReport {
        variant,
        d_min: is_mask.then_some(params.d_min),
        prior: prior.describe(),
        value: (total / prior.queries.len() as f64 / ln_q).max(0.0),
        base: q,
        h_y: prior.tuple_entropy_nats() / ln_q,
        method: Method::Oracle,
        queries: prior.queries.len(),
        pairs: visited,
        mask_draws: is_mask.then_some(mask_draws as u128),
        std_error: None,
    })
}

/// Little-endian base-`b` digits of `v`, `len` of them.
fn digits(mut v: u64, b: u64, len: usize) -> Vec<u64> {
    (0..len)
        .map(|_| {
            let d = v % b;
            v /= b;
            d
        })
        .collect()
}

/// One printable row per report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LeakageRow {
    pub scheme: String,
    pub prior: String,
    pub leakage: f64,
    pub base: u64,
    pub method: Method,
    pub std_error: Option<f64>,
}

impl From<&LeakageReport> for LeakageRow {
    fn from(r: &LeakageReport) -> Self {
        LeakageRow {
            scheme: r.scheme(),
            prior: r.prior.clone(),
            leakage: r.value,
            base: r.base,
            method: r.method,
            std_error: r.std_error,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct LeakageTable {
    pub rows: Vec<LeakageReport>,
}

impl LeakageTable {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(LeakageRow::from(r))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{:<28} {:>10}  {:>6}  prior\n", "scheme", "leakage", "base");
        for r in &self.rows {
            let value = match r.std_error {
                Some(se) => format!("{:.5}±{:.5}", r.value, se),
                None => format!("{:.5}", r.value),
            };
            out.push_str(&format!("{:<28} {:>10}  {:>6}  {}\n", r.scheme(), value, r.base, r.prior));
        }
        out
    }
}
