//! The six retrieval protocols.
//!
//! Every server answer is a polynomial in the server's evaluation point `α_n`
//! whose constant coefficient is the statistic the user is entitled to (a
//! distance, a distance difference or a masked distance) and whose higher
//! coefficients are interference, one-time-padded by server randomness. The
//! user strips the coefficient it can compute itself, solves the
//! Vandermonde system over all servers' answers and keeps coefficient 0.

use rand::RngCore;

use crate::error::{Error, Result};
use crate::field::PrimeField;
use crate::protocol::{
    cost_of, AnswerBundle, ClientRandomness, Database, QueryBundle, RetrievalResult, Revealed,
    SchemeConfig, SchemeKind, ServerQuery, ServerSharedRandomness, SessionId, UserInput,
};

/// Builds each server's query: `x + α_n Z₁` and, when weighted, `w + α_n Z₂`.
pub fn gen_query(
    input: &UserInput,
    cr: &mut ClientRandomness,
    config: &SchemeConfig,
) -> Result<QueryBundle> {
    input.validate(config)?;
    if cr.z1().len() != config.d || (config.weighted && cr.z2().len() != config.d) {
        return Err(Error::DimensionMismatch {
            expected: config.d,
            got: cr.z1().len(),
        });
    }
    cr.mark_issued()?;
    let f = config.field;
    let pad = |v: &[u64], z: &[u64], alpha: u64| -> Vec<u64> {
        v.iter()
            .zip(z)
            .map(|(&a, &b)| f.add(f.reduce(a), f.mul(alpha, b)))
            .collect()
    };
    let per_server = config
        .alphas
        .iter()
        .map(|&alpha| ServerQuery {
            masked_x: pad(&input.x, cr.z1(), alpha),
            masked_w: input.w.as_ref().map(|w| pad(w, cr.z2(), alpha)),
        })
        .collect();
    Ok(QueryBundle { per_server })
}

fn check_query(db: &Database, query: &ServerQuery, config: &SchemeConfig) -> Result<()> {
    db.check_matches(config)?;
    let expected = config.variant().query_len(config.d);
    if query.symbols() != expected || query.masked_x.len() != config.d {
        return Err(Error::DimensionMismatch {
            expected,
            got: query.symbols(),
        });
    }
    if config.weighted != query.masked_w.is_some() {
        return Err(Error::InvalidInput("query shape does not match variant".into()));
    }
    let q = config.q();
    if query.to_symbols().iter().any(|&v| v >= q) {
        return Err(Error::InvalidInput("query symbol outside the field".into()));
    }
    Ok(())
}

fn alpha_of(n: usize, config: &SchemeConfig) -> Result<u64> {
    n.checked_sub(1)
        .and_then(|i| config.alphas.get(i))
        .map(|&a| config.field.reduce(a))
        .ok_or_else(|| Error::InvalidInput(format!("server index {n} out of range")))
}

/// `(y − Q₁)ᵗ diag(Q₂) (y − Q₁)`, or `‖y − Q‖²` for unweighted queries.
fn server_distance(f: PrimeField, y: &[u64], query: &ServerQuery) -> u64 {
    match &query.masked_w {
        Some(w) => f.weighted_sq_dist(y, &query.masked_x, w),
        None => f.sq_dist(y, &query.masked_x),
    }
}

/// `α Z′₁(i)` plus `α² Z′₂(i)` when weighted.
fn pad_term(f: PrimeField, alpha: u64, sr: &ServerSharedRandomness, i: usize, weighted: bool) -> u64 {
    let mut t = f.mul(alpha, sr.zprime1[i]);
    if weighted {
        t = f.add(t, f.mul(f.mul(alpha, alpha), sr.zprime2[i]));
    }
    t
}

/// Answers for the baseline schemes. `n` is the 1-based server index.
pub fn answer_baseline(
    db: &Database,
    query: &ServerQuery,
    sr: &ServerSharedRandomness,
    n: usize,
    config: &SchemeConfig,
) -> Result<Vec<u64>> {
    answer_distances(db, query, sr, n, config, false)
}

/// Answers for the masked schemes: baseline answers plus `μ(i)` on the
/// distance coefficient.
pub fn answer_mask(
    db: &Database,
    query: &ServerQuery,
    sr: &ServerSharedRandomness,
    n: usize,
    config: &SchemeConfig,
) -> Result<Vec<u64>> {
    answer_distances(db, query, sr, n, config, true)
}

fn answer_distances(
    db: &Database,
    query: &ServerQuery,
    sr: &ServerSharedRandomness,
    n: usize,
    config: &SchemeConfig,
    masked: bool,
) -> Result<Vec<u64>> {
    check_query(db, query, config)?;
    let mut layout = config.clone();
    layout.scheme = if masked {
        SchemeKind::Mask
    } else {
        SchemeKind::Baseline
    };
    sr.check(&layout)?;
    let f = config.field;
    let alpha = alpha_of(n, config)?;
    Ok(db
        .samples()
        .iter()
        .enumerate()
        .map(|(i, y)| {
            let mut a = f.add(server_distance(f, y, query), pad_term(f, alpha, sr, i, config.weighted));
            if masked {
                a = f.add(a, f.reduce(sr.mu[i]));
            }
            a
        })
        .collect())
}

/// Answers for the difference schemes: `M − 1` symbols whose constant
/// coefficient is `d(y_i, x) − d(y_{i+1}, x)`. In the weighted case the cubic
/// `α³` terms cancel in the difference.
pub fn answer_diff(
    db: &Database,
    query: &ServerQuery,
    sr: &ServerSharedRandomness,
    n: usize,
    config: &SchemeConfig,
) -> Result<Vec<u64>> {
    if db.len() < 2 {
        return Err(Error::InvalidInput("difference answers need M >= 2".into()));
    }
    check_query(db, query, config)?;
    let mut layout = config.clone();
    layout.scheme = SchemeKind::Diff;
    sr.check(&layout)?;
    let f = config.field;
    let alpha = alpha_of(n, config)?;
    let dists: Vec<u64> = db
        .samples()
        .iter()
        .map(|y| server_distance(f, y, query))
        .collect();
    Ok(dists
        .windows(2)
        .enumerate()
        .map(|(i, pair)| f.add(f.sub(pair[0], pair[1]), pad_term(f, alpha, sr, i, config.weighted)))
        .collect())
}

/// Dispatches on the configured scheme.
pub fn answer(
    db: &Database,
    query: &ServerQuery,
    sr: &ServerSharedRandomness,
    n: usize,
    config: &SchemeConfig,
) -> Result<Vec<u64>> {
    match config.scheme {
        SchemeKind::Baseline => answer_baseline(db, query, sr, n, config),
        SchemeKind::Diff => answer_diff(db, query, sr, n, config),
        SchemeKind::Mask => answer_mask(db, query, sr, n, config),
    }
}

/// The term of each server's answer that the user can compute alone:
/// `α_n² ‖Z‖²` (unweighted) or `α_n³ Z₁ᵗ diag(Z₂) Z₁` (weighted). Zero for
/// difference schemes, where it cancels.
fn self_terms(cr: &ClientRandomness, config: &SchemeConfig) -> Vec<u64> {
    let f = config.field;
    if config.scheme == SchemeKind::Diff {
        return vec![0; config.servers()];
    }
    let (core, power) = if config.weighted {
        let zz = cr
            .z1()
            .iter()
            .zip(cr.z2())
            .fold(0, |acc, (&a, &b)| f.add(acc, f.mul(b, f.mul(a, a))));
        (zz, 3)
    } else {
        let zz = cr.z1().iter().fold(0, |acc, &a| f.add(acc, f.mul(a, a)));
        (zz, 2)
    };
    config
        .alphas
        .iter()
        .map(|&a| f.mul(f.pow(a, power), core))
        .collect()
}

fn check_answers(answers: &AnswerBundle, config: &SchemeConfig) -> Result<()> {
    let n = config.servers();
    if answers.per_server.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: answers.per_server.len(),
        });
    }
    let len = config.answer_len();
    for a in &answers.per_server {
        if a.len() != len {
            return Err(Error::DimensionMismatch {
                expected: len,
                got: a.len(),
            });
        }
    }
    Ok(())
}

/// Full coefficient vectors `(statistic, interference…)` per index, after
/// removing the self-computable term. Exposed for analysis; decoding only
/// needs coefficient 0.
pub fn decode_coefficients(
    answers: &AnswerBundle,
    cr: &ClientRandomness,
    config: &SchemeConfig,
) -> Result<Vec<Vec<u64>>> {
    check_answers(answers, config)?;
    let f = config.field;
    let vm = config.vandermonde()?;
    let selfs = self_terms(cr, config);
    (0..config.answer_len())
        .map(|i| {
            let rhs: Vec<u64> = answers
                .per_server
                .iter()
                .zip(&selfs)
                .map(|(a, &s)| f.sub(f.reduce(a[i]), s))
                .collect();
            vm.solve(&rhs)
        })
        .collect()
}

/// The statistic (coefficient 0) for every index.
pub fn decode_statistics(
    answers: &AnswerBundle,
    cr: &ClientRandomness,
    config: &SchemeConfig,
) -> Result<Vec<u64>> {
    check_answers(answers, config)?;
    let f = config.field;
    let vm = config.vandermonde()?;
    let selfs = self_terms(cr, config);
    let mut rhs = vec![0; config.servers()];
    Ok((0..config.answer_len())
        .map(|i| {
            for (slot, (a, &s)) in rhs.iter_mut().zip(answers.per_server.iter().zip(&selfs)) {
                *slot = f.sub(f.reduce(a[i]), s);
            }
            vm.solve_constant(&rhs)
        })
        .collect())
}

/// 1-based index of the smallest value, smallest index on ties, and whether
/// the minimum was tied.
fn argmin_first(values: &[u64]) -> (usize, bool) {
    let mut best = 0;
    let mut tied = false;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = i;
            tied = false;
        } else if v == values[best] {
            tied = true;
        }
    }
    (best + 1, tied)
}

/// Sequential champion search over consecutive differences
/// `r(i) = d_i − d_{i+1} (mod q)`.
///
/// The running sum `Σ_{j=θ*}^{i} r(j)` equals `d_{θ*} − d_{i+1}`. The champion
/// is kept when that value lies in `[B+1 : q−1]` (champion strictly closer),
/// otherwise `i+1` takes over, so ties advance to the later index. `B` is
/// `R²Ld` and `q > 2B` must hold.
pub fn algorithm1_argmin(r: &[u64], config: &SchemeConfig) -> usize {
    argmin_from_differences(r, config.field, config.bound())
}

pub fn argmin_from_differences(r: &[u64], field: PrimeField, bound: u64) -> usize {
    let mut theta = 1;
    let mut acc = 0;
    for (idx, &ri) in r.iter().enumerate() {
        let i = idx + 1;
        acc = field.add(acc, field.reduce(ri));
        if acc > bound {
            // champion strictly closer; keep
        } else {
            theta = i + 1;
            acc = 0;
        }
    }
    theta
}

/// Whether decoded differences could have come from true distances in
/// `[0, B]`: every `d_1 − d_k` must be a signed value in `[−B, B]`, and their
/// spread at most `B`.
fn differences_consistent(r: &[u64], field: PrimeField, bound: u64) -> bool {
    let q = field.modulus() as i128;
    let mut acc = 0u64;
    let (mut lo, mut hi) = (0i128, 0i128);
    for &ri in r {
        acc = field.add(acc, ri);
        let signed = if acc as i128 > q / 2 {
            acc as i128 - q
        } else {
            acc as i128
        };
        if signed.unsigned_abs() > bound as u128 {
            return false;
        }
        lo = lo.min(signed);
        hi = hi.max(signed);
    }
    hi - lo <= bound as i128
}

/// Recovers the statistic and picks `θ*`.
pub fn decode(
    answers: &AnswerBundle,
    cr: &ClientRandomness,
    config: &SchemeConfig,
) -> Result<RetrievalResult> {
    let stats = decode_statistics(answers, cr, config)?;
    let bound = config.bound();
    let cost = cost_of(config);
    let result = match config.scheme {
        SchemeKind::Baseline => {
            let (theta_star, _) = argmin_first(&stats);
            let consistent = stats.iter().all(|&v| v <= bound);
            RetrievalResult {
                theta_star,
                revealed: Revealed::Distances(stats),
                cost,
                mask_ambiguous: false,
                consistent,
            }
        }
        SchemeKind::Mask => {
            let (theta_star, tied) = argmin_first(&stats);
            let ceiling = bound.saturating_add(config.d_min - 1);
            let consistent = stats.iter().all(|&v| v <= ceiling);
            RetrievalResult {
                theta_star,
                revealed: Revealed::MaskedDistances(stats),
                cost,
                mask_ambiguous: tied,
                consistent,
            }
        }
        SchemeKind::Diff => {
            let theta_star = algorithm1_argmin(&stats, config);
            let consistent = differences_consistent(&stats, config.field, bound);
            RetrievalResult {
                theta_star,
                revealed: Revealed::Differences(stats),
                cost,
                mask_ambiguous: false,
                consistent,
            }
        }
    };
    Ok(result)
}

/// Client side of one retrieval: owns the pads for a single session.
#[derive(Debug)]
pub struct ClientSession {
    config: SchemeConfig,
    input: UserInput,
    randomness: ClientRandomness,
}

impl ClientSession {
    pub fn new<R: RngCore + ?Sized>(config: SchemeConfig, input: UserInput, rng: &mut R) -> Result<Self> {
        config.validate()?;
        input.validate(&config)?;
        let randomness = ClientRandomness::sample(&config, rng);
        Ok(ClientSession {
            config,
            input,
            randomness,
        })
    }

    pub fn with_randomness(config: SchemeConfig, input: UserInput, randomness: ClientRandomness) -> Result<Self> {
        input.validate(&config)?;
        Ok(ClientSession {
            config,
            input,
            randomness,
        })
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.config
    }

    /// Can be called once per session.
    pub fn queries(&mut self) -> Result<QueryBundle> {
        gen_query(&self.input, &mut self.randomness, &self.config)
    }

    pub fn decode(&self, answers: &AnswerBundle) -> Result<RetrievalResult> {
        decode(answers, &self.randomness, &self.config)
    }
}

/// Runs every server in-process against the same database and shared
/// randomness. The reference path for the networked transport.
pub fn run_in_process(
    config: &SchemeConfig,
    db: &Database,
    input: &UserInput,
    shared: &ServerSharedRandomness,
    cr: ClientRandomness,
) -> Result<RetrievalResult> {
    let mut session = ClientSession::with_randomness(config.clone(), input.clone(), cr)?;
    let queries = session.queries()?;
    let per_server = queries
        .per_server
        .iter()
        .enumerate()
        .map(|(k, q)| answer(db, q, shared, k + 1, config))
        .collect::<Result<Vec<_>>>()?;
    session.decode(&AnswerBundle { per_server })
}

/// [`run_in_process`] with randomness drawn from `rng` and a seed-expanded
/// shared stream.
pub fn retrieve_local<R: RngCore + ?Sized>(
    config: &SchemeConfig,
    db: &Database,
    input: &UserInput,
    seed: &[u8; 32],
    session: &SessionId,
    rng: &mut R,
) -> Result<RetrievalResult> {
    let shared = ServerSharedRandomness::expand(seed, session, config);
    let cr = ClientRandomness::sample(config, rng);
    run_in_process(config, db, input, &shared, cr)
}
