//! Acceptance suite. Each test prints one `[PASS]` or `[FAIL]` line to stderr
//! (uncaptured, so it shows in plain `cargo test` output) and fails on FAIL.

use std::collections::HashMap;
use std::io::Write;
use std::panic::{catch_unwind, UnwindSafe};
use std::path::Path;

use pcr_core::experiments::{mixed_pools, random_seed, run_accuracy_experiment_file, uniform_rows};
use pcr_core::field::next_prime_above;
use pcr_core::leakage::{
    grid, leakage_exact, leakage_full_oracle, leakage_sampled, LeakageParams, PriorModel, TuplePrior,
};
use pcr_core::mask::{closure_membership, expand, min_gaps, FieldExpansion, RejectedSet};
use pcr_core::schemes::{gen_query, retrieve_local, run_in_process};
use pcr_core::transport::{spawn, Client, MessageType, ServerState};
use pcr_core::{
    ClientRandomness, Database, PrimeField, Revealed, SchemeConfig, SchemeKind, ServerSharedRandomness,
    UserInput, Variant,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

type Outcome = Result<String, String>;

fn criterion(id: u8, what: &str, body: impl FnOnce() -> Outcome + UnwindSafe) {
    let outcome = catch_unwind(body).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        Err(format!("panicked: {msg}"))
    });
    let line = match &outcome {
        Ok(detail) => format!("[PASS] {id:>2} {what}: {detail}\n"),
        Err(detail) => format!("[FAIL] {id:>2} {what}: {detail}\n"),
    };
    std::io::stderr().write_all(line.as_bytes()).unwrap();
    if let Err(detail) = outcome {
        panic!("criterion {id} failed: {detail}");
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn field(q: u64) -> PrimeField {
    PrimeField::new(q).unwrap()
}

fn unweighted(kind: SchemeKind) -> Variant {
    Variant::new(kind, false)
}

/// Weighted squared distances computed directly, independent of the library.
fn brute_distances(x: &[u64], rows: &[Vec<u64>], w: Option<&[u64]>) -> Vec<u64> {
    rows.iter()
        .map(|y| {
            x.iter()
                .zip(y)
                .enumerate()
                .map(|(k, (&a, &b))| w.map_or(1, |w| w[k]) * a.abs_diff(b).pow(2))
                .sum()
        })
        .collect()
}

/// 1-based index of the unique minimum, `None` on a tie at the minimum.
fn unique_argmin(dists: &[u64]) -> Option<usize> {
    let min = *dists.iter().min()?;
    let mut hits = dists.iter().enumerate().filter(|(_, &v)| v == min);
    let (i, _) = hits.next()?;
    hits.next().is_none().then_some(i + 1)
}

#[test]
fn c01_grid_leakage_values() {
    criterion(1, "leakage on the R=3 d=3 M=3 grid, q=757", || {
        let prior = PriorModel::uniform_grid(3, 3, 3, TuplePrior::IidGrid);
        let expected = [
            (SchemeKind::Baseline, 1, 1.143),
            (SchemeKind::Diff, 1, 0.940),
            (SchemeKind::Mask, 2, 0.911),
            (SchemeKind::Mask, 3, 0.777),
        ];
        let mut parts = Vec::new();
        for (kind, d_min, want) in expected {
            let params = LeakageParams::new(field(757)).with_d_min(d_min);
            let rep = leakage_exact(unweighted(kind), &prior, &params).map_err(|e| e.to_string())?;
            ensure((rep.value - want).abs() <= 0.005, || {
                format!("{} = {:.5}, expected {want} ± 0.005", rep.scheme(), rep.value)
            })?;
            parts.push(format!("{} {:.5}", rep.scheme(), rep.value));
        }
        Ok(format!("{} (iid tuples over the grid minus x)", parts.join(", ")))
    });
}

#[test]
fn c02_full_view_oracle_matches_statistic() {
    criterion(2, "full-view oracle equals revealed-statistic leakage at q=5", || {
        let prior = PriorModel::uniform_grid(1, 2, 2, TuplePrior::IidGrid);
        let mut worst = 0f64;
        for (kind, d_min) in [(SchemeKind::Baseline, 1), (SchemeKind::Diff, 1), (SchemeKind::Mask, 2)] {
            let params = LeakageParams::new(field(5)).with_d_min(d_min);
            let exact = leakage_exact(unweighted(kind), &prior, &params).map_err(|e| e.to_string())?;
            let oracle = leakage_full_oracle(unweighted(kind), &prior, &params).map_err(|e| e.to_string())?;
            let gap = (exact.value - oracle.value).abs();
            ensure(gap <= 1e-9, || {
                format!("{}: exact {} vs oracle {}", exact.scheme(), exact.value, oracle.value)
            })?;
            worst = worst.max(gap);
        }
        Ok(format!("baseline, diff, mask(d_min=2); max |difference| {worst:.1e}"))
    });
}

#[test]
fn c03_retrieval_matches_brute_force() {
    criterion(3, "end-to-end argmin equals brute force on tie-free instances", || {
        const TRIALS: usize = 1000;
        let mut lines = Vec::new();
        for (vi, variant) in Variant::ALL.into_iter().enumerate() {
            let mut rng = ChaCha20Rng::seed_from_u64(300 + vi as u64);
            let mut done = 0;
            while done < TRIALS {
                let r = rng.random_range(1..=10);
                let d = rng.random_range(1..=5);
                let m = rng.random_range(2..=50);
                let l = if variant.weighted { rng.random_range(1..=4) } else { 1 };
                let rows = uniform_rows(r, d, m, &mut rng);
                let x: Vec<u64> = (0..d).map(|_| rng.random_range(0..=r)).collect();
                let w: Option<Vec<u64>> = variant.weighted.then(|| (0..d).map(|_| rng.random_range(1..=l)).collect());
                let dists = brute_distances(&x, &rows, w.as_deref());
                let Some(truth) = unique_argmin(&dists) else { continue };
                let mut config = SchemeConfig::new(variant, r, d, m, l).map_err(|e| e.to_string())?;
                if variant.kind == SchemeKind::Mask {
                    let mut sorted = dists.clone();
                    sorted.sort_unstable();
                    let d_min = rng.random_range(1..=sorted[1] - sorted[0]);
                    let q = next_prime_above(config.bound() + d_min - 1).max(config.q());
                    config = config
                        .with_modulus(q)
                        .and_then(|c| c.with_d_min(d_min))
                        .map_err(|e| e.to_string())?;
                }
                let db = Database::new(rows, r).map_err(|e| e.to_string())?;
                let input = match &w {
                    Some(w) => UserInput::weighted(x.clone(), w.clone()),
                    None => UserInput::unweighted(x.clone()),
                };
                let seed = random_seed(&mut rng);
                let session: [u8; 16] = rng.random();
                let res = retrieve_local(&config, &db, &input, &seed, &session, &mut rng).map_err(|e| e.to_string())?;
                ensure(res.theta_star == truth && res.consistent, || {
                    format!("{variant}: x={x:?} w={w:?} got {} want {truth}", res.theta_star)
                })?;
                done += 1;
            }
            lines.push(format!("{variant} {done}/{TRIALS}"));
        }
        Ok(lines.join(", "))
    });
}

#[test]
fn c04_wire_symbol_counts() {
    criterion(4, "measured wire symbol counts over TCP", || {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let mut runs = 0;
        for variant in Variant::ALL {
            for &(r, d, m, l) in &[(3u64, 2usize, 2usize, 2u64), (5, 4, 7, 3), (2, 5, 20, 1)] {
                let (d64, m64) = (d as u64, m as u64);
                let answers = if variant.kind == SchemeKind::Diff { m64 - 1 } else { m64 };
                let (upload, download) = if variant.weighted {
                    (6 * d64, 3 * answers)
                } else {
                    (2 * d64, 2 * answers)
                };
                let config = SchemeConfig::new(variant, r, d, m, l).map_err(|e| e.to_string())?;
                let rows = uniform_rows(r, d, m, &mut rng);
                let db = Database::new(rows.clone(), r).map_err(|e| e.to_string())?;
                let seed = random_seed(&mut rng);
                let servers: Vec<_> = (1..=config.servers())
                    .map(|n| spawn("127.0.0.1:0", ServerState::new(config.clone(), db.clone(), seed, n).unwrap()).unwrap())
                    .collect();
                let client = Client::new(config.clone(), servers.iter().map(|s| s.addr().to_string()).collect())
                    .map_err(|e| e.to_string())?;
                let x: Vec<u64> = (0..d).map(|_| rng.random_range(0..=r)).collect();
                let input = if variant.weighted {
                    UserInput::weighted(x, (0..d).map(|_| rng.random_range(1..=l)).collect())
                } else {
                    UserInput::unweighted(x)
                };
                let res = client.retrieve(&input, &mut rng).map_err(|e| e.to_string())?;
                ensure(res.cost.upload == upload && res.cost.download == download, || {
                    format!(
                        "{variant} d={d} M={m}: measured {}+{}, expected {upload}+{download}",
                        res.cost.upload, res.cost.download
                    )
                })?;
                let seen: usize = servers
                    .iter()
                    .flat_map(|s| s.state().transcript())
                    .filter(|t| t.kind == MessageType::Query)
                    .map(|t| t.symbols)
                    .sum();
                ensure(seen as u64 == upload, || format!("{variant}: servers received {seen} query symbols"))?;
                for s in servers {
                    s.shutdown();
                }
                runs += 1;
            }
        }
        Ok(format!(
            "{runs} sessions; 2(d+M), 2(d+M-1), 2(d+M), 6d+3M, 6d+3(M-1), 6d+3M exactly"
        ))
    });
}

/// Pearson statistic and p-value of `symbols` against uniform on `F_q`,
/// binned into `k` contiguous ranges.
fn chi_square_uniform(symbols: &[u64], q: u64, k: u64) -> (f64, f64) {
    let bin = |v: u64| (v as u128 * k as u128 / q as u128) as usize;
    let mut observed = vec![0f64; k as usize];
    for &s in symbols {
        observed[bin(s)] += 1.0;
    }
    // bin b holds the v with b·q ≤ v·k < (b+1)·q
    let lower = |b: u64| (b as u128 * q as u128).div_ceil(k as u128);
    let n = symbols.len() as f64;
    let stat: f64 = (0..k)
        .map(|b| {
            let expected = n * (lower(b + 1) - lower(b)) as f64 / q as f64;
            (observed[b as usize] - expected).powi(2) / expected
        })
        .sum();
    let p = 1.0 - ChiSquared::new((k - 1) as f64).unwrap().cdf(stat);
    (stat, p)
}

#[test]
fn c05_queries_are_uniform() {
    criterion(5, "each server's query is uniform and independent of x and w", || {
        // exact: enumerate every pad at q = 5, d = 2
        let mut exact_cases = 0;
        for weighted in [false, true] {
            let l = if weighted { 2 } else { 1 };
            let config = SchemeConfig::new(Variant::new(SchemeKind::Baseline, weighted), 1, 2, 2, l)
                .and_then(|c| c.with_modulus(5))
                .map_err(|e| e.to_string())?;
            let pads: Vec<Vec<u64>> = grid(4, 2);
            let weights: Vec<Option<Vec<u64>>> = if weighted {
                grid(1, 2).into_iter().map(|w| Some(w.iter().map(|v| v + 1).collect())).collect()
            } else {
                vec![None]
            };
            for x in grid(1, 2) {
                for w in &weights {
                    let input = match w {
                        Some(w) => UserInput::weighted(x.clone(), w.clone()),
                        None => UserInput::unweighted(x.clone()),
                    };
                    let mut counts: Vec<HashMap<Vec<u64>, u64>> = vec![HashMap::new(); config.servers()];
                    let z2s: Vec<Vec<u64>> = if weighted { pads.clone() } else { vec![vec![]] };
                    for z1 in &pads {
                        for z2 in &z2s {
                            let mut cr = ClientRandomness::from_parts(z1.clone(), z2.clone());
                            let qb = gen_query(&input, &mut cr, &config).map_err(|e| e.to_string())?;
                            for (n, sq) in qb.per_server.iter().enumerate() {
                                *counts[n].entry(sq.to_symbols()).or_default() += 1;
                            }
                        }
                    }
                    let outcomes = 5u64.pow(if weighted { 4 } else { 2 });
                    let total = (pads.len() * z2s.len()) as f64;
                    for c in &counts {
                        // total variation distance to uniform over all outcomes
                        let tv = 0.5
                            * (c.values().map(|&k| (k as f64 / total - 1.0 / outcomes as f64).abs()).sum::<f64>()
                                + (outcomes - c.len() as u64) as f64 / outcomes as f64);
                        ensure(tv == 0.0, || format!("x={x:?} w={w:?}: total variation {tv}"))?;
                    }
                    exact_cases += 1;
                }
            }
        }

        // statistical: 10^5 symbols per server at full scale
        let mut worst_p = 1f64;
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        for weighted in [false, true] {
            let config = SchemeConfig::new(Variant::new(SchemeKind::Baseline, weighted), 32, 8, 100, 4)
                .map_err(|e| e.to_string())?;
            let q = config.q();
            let input = if weighted {
                UserInput::weighted(vec![32; 8], vec![4; 8])
            } else {
                UserInput::unweighted(vec![32; 8])
            };
            let per_session = config.variant().query_len(8);
            let sessions = 100_000usize.div_ceil(per_session);
            let mut symbols = vec![Vec::with_capacity(sessions * per_session); config.servers()];
            for _ in 0..sessions {
                let mut cr = ClientRandomness::sample(&config, &mut rng);
                let qb = gen_query(&input, &mut cr, &config).map_err(|e| e.to_string())?;
                for (n, sq) in qb.per_server.iter().enumerate() {
                    symbols[n].extend(sq.to_symbols());
                }
            }
            for (n, s) in symbols.iter().enumerate() {
                let (stat, p) = chi_square_uniform(&s[..100_000], q, 100);
                ensure(p > 0.01, || {
                    format!("weighted={weighted} server {}: chi-square {stat:.1}, p = {p:.4}", n + 1)
                })?;
                worst_p = worst_p.min(p);
            }
        }
        Ok(format!(
            "{exact_cases} (x, w) cases with total variation 0; chi-square on 10^5 symbols per server, min p = {worst_p:.3}"
        ))
    });
}

fn random_prior(rng: &mut ChaCha20Rng) -> PriorModel {
    let r = rng.random_range(1..=2);
    let d = rng.random_range(1..=2);
    let m = rng.random_range(2..=3);
    let points = grid(r, d);
    let mut queries: Vec<Vec<u64>> = points.iter().filter(|_| rng.random_bool(0.6)).cloned().collect();
    if queries.is_empty() {
        queries.push(points[0].clone());
    }
    let tuples = match rng.random_range(0..3) {
        0 => TuplePrior::IidGrid,
        1 if points.len() > m => TuplePrior::DistinctGrid,
        _ => {
            let pool: Vec<Vec<u64>> = (0..rng.random_range(m..=6))
                .map(|_| (0..d).map(|_| rng.random_range(0..=r)).collect())
                .collect();
            let tuples = (0..rng.random_range(2..=12))
                .map(|_| (0..m).map(|_| rng.random_range(0..pool.len())).collect())
                .collect();
            TuplePrior::Listed { pool, tuples }
        }
    };
    PriorModel {
        r,
        d,
        m,
        queries,
        tuples,
        weights: None,
    }
}

#[test]
fn c06_leakage_orderings() {
    criterion(6, "leakage orderings on random small priors", || {
        const PRIORS: usize = 24;
        const SUPPORTS: [u64; 5] = [1, 2, 3, 4, 5];
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let mut checks = 0;
        for k in 0..PRIORS {
            let prior = random_prior(&mut rng);
            let q = field(101);
            let value = |kind, d_min| {
                leakage_exact(unweighted(kind), &prior, &LeakageParams::new(q).with_d_min(d_min))
                    .map(|r| r.value)
                    .map_err(|e| e.to_string())
            };
            let baseline = value(SchemeKind::Baseline, 1)?;
            let diff = value(SchemeKind::Diff, 1)?;
            ensure(diff <= baseline + 1e-12, || format!("prior {k}: diff {diff} > baseline {baseline}"))?;
            let mut previous = baseline;
            for d_min in SUPPORTS {
                let mask = value(SchemeKind::Mask, d_min)?;
                ensure(mask <= previous + 1e-12, || {
                    format!("prior {k} ({}): mask(d_min={d_min}) {mask} exceeds {previous}", prior.describe())
                })?;
                previous = mask;
                checks += 1;
            }
            checks += 1;
        }
        Ok(format!(
            "{PRIORS} priors, {checks} comparisons (diff <= baseline, mask <= baseline, mask non-increasing over d_min 1..=5), 0 violations"
        ))
    });
}

/// All `k`-subsets of `0..n` in lexicographic order.
fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    (0..n)
        .flat_map(|first| {
            subsets(n - first - 1, k - 1)
                .into_iter()
                .map(move |rest| std::iter::once(first).chain(rest.into_iter().map(|i| i + first + 1)).collect())
        })
        .collect()
}

/// Every mask draw in `{0..d_min-1}^M` against one closure point; returns the
/// number of draws checked.
fn every_mask_draw(config: &SchemeConfig, db: &Database, input: &UserInput, truth: usize, seed: u64) -> Result<u64, String> {
    let m = db.len();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut shared = ServerSharedRandomness::expand(&random_seed(&mut rng), &[0; 16], config);
    let mut mu = vec![0u64; m];
    let draws = config.d_min.pow(m as u32);
    for _ in 0..draws {
        shared.mu.clone_from(&mu);
        let cr = ClientRandomness::sample(config, &mut rng);
        let res = run_in_process(config, db, input, &shared, cr).map_err(|e| e.to_string())?;
        if res.theta_star != truth {
            return Err(format!(
                "db={:?} x={:?} mu={mu:?}: decoded {} want {truth}",
                db.samples(),
                input.x,
                res.theta_star
            ));
        }
        for u in mu.iter_mut() {
            *u += 1;
            if *u < config.d_min {
                break;
            }
            *u = 0;
        }
    }
    Ok(draws)
}

#[derive(Default)]
struct ClosureTally {
    instances: u64,
    points: u64,
    draws: u64,
    max_d_min: u64,
}

/// Checks every closure point of `[0:R]^d` under every mask draw; `None` when
/// the rejected set leaves a zero gap.
fn check_closure(samples: Vec<Vec<u64>>, rejected: Vec<Vec<u64>>, r: u64, w: Option<&[u64]>, seed: u64) -> Result<Option<ClosureTally>, String> {
    let (d, m) = (samples[0].len(), samples.len());
    let db = Database::new(samples, r).map_err(|e| e.to_string())?;
    let rejected = RejectedSet::new(rejected, r).map_err(|e| e.to_string())?;
    let d_min = min_gaps(&db, &rejected, w).map_err(|e| e.to_string())?.d_min;
    if d_min == 0 {
        return Ok(None);
    }
    let l = w.map_or(1, |w| *w.iter().max().unwrap());
    let base = SchemeConfig::new(Variant::new(SchemeKind::Mask, w.is_some()), r, d, m, l).map_err(|e| e.to_string())?;
    let q = next_prime_above(base.bound() + d_min - 1).max(base.q());
    let config = base.with_modulus(q).and_then(|c| c.with_d_min(d_min)).map_err(|e| e.to_string())?;
    let mut tally = ClosureTally {
        instances: 1,
        max_d_min: d_min,
        ..Default::default()
    };
    for x in grid(r, d) {
        if db.samples().contains(&x) || !closure_membership(&x, &db, &rejected, w).map_err(|e| e.to_string())? {
            continue;
        }
        let truth = unique_argmin(&brute_distances(&x, db.samples(), w))
            .ok_or_else(|| format!("closure point {x:?} has tied distances"))?;
        let input = match w {
            Some(w) => UserInput::weighted(x, w.to_vec()),
            None => UserInput::unweighted(x),
        };
        tally.draws += every_mask_draw(&config, &db, &input, truth, seed)?;
        tally.points += 1;
    }
    Ok(Some(tally))
}

fn merge(results: Vec<Result<Option<ClosureTally>, String>>) -> Result<ClosureTally, String> {
    let mut total = ClosureTally::default();
    for t in results.into_iter().filter_map(Result::transpose) {
        let t = t?;
        total.instances += t.instances;
        total.points += t.points;
        total.draws += t.draws;
        total.max_d_min = total.max_d_min.max(t.max_d_min);
    }
    Ok(total)
}

#[test]
fn c07_mask_decodes_on_closure() {
    criterion(7, "mask decoding on every closure point and every mask draw", || {
        // every database of two samples on [0:4]^2 with one rejected point
        let (r, d) = (4u64, 2usize);
        let points = grid(r, d);
        let mut pairs = Vec::new();
        for db_idx in subsets(points.len(), 2) {
            for k in (0..points.len()).filter(|k| !db_idx.contains(k)) {
                pairs.push((db_idx.clone(), k));
            }
        }
        let exhaustive = merge(
            pairs
                .par_iter()
                .enumerate()
                .map(|(n, (db_idx, k))| {
                    let samples = db_idx.iter().map(|&i| points[i].clone()).collect();
                    check_closure(samples, vec![points[*k].clone()], r, None, n as u64)
                })
                .collect(),
        )?;
        ensure(exhaustive.max_d_min > 1, || "no instance with a mask support above 1".into())?;

        // random three-sample databases with two rejected points, plain and weighted
        let random = merge(
            (0..400u64)
                .into_par_iter()
                .map(|n| {
                    let mut rng = ChaCha20Rng::seed_from_u64(700 + n);
                    let r = 6;
                    let mut pool = grid(r, 2);
                    let picks: Vec<Vec<u64>> = rand::seq::index::sample(&mut rng, pool.len(), 5)
                        .into_iter()
                        .map(|i| std::mem::take(&mut pool[i]))
                        .collect();
                    let w: Option<Vec<u64>> = (n % 2 == 1).then(|| vec![rng.random_range(1..=3), rng.random_range(1..=3)]);
                    let (samples, rejected) = (picks[..3].to_vec(), picks[3..].to_vec());
                    let probe = Database::new(samples.clone(), r).unwrap();
                    let gap = min_gaps(&probe, &RejectedSet::new(rejected.clone(), r).unwrap(), w.as_deref())
                        .map_err(|e| e.to_string())?
                        .d_min;
                    if gap.pow(3) > 4096 {
                        return Ok(None);
                    }
                    check_closure(samples, rejected, r, w.as_deref(), n)
                })
                .collect(),
        )?;
        ensure(random.instances >= 100, || format!("only {} usable random instances", random.instances))?;
        Ok(format!(
            "all {} positive-gap two-sample databases on [0:4]^2: {} closure points, {} draws, d_min up to {}; {} random three-sample instances on [0:6]^2: {} closure points, {} draws, d_min up to {}; all correct",
            exhaustive.instances,
            exhaustive.points,
            exhaustive.draws,
            exhaustive.max_d_min,
            random.instances,
            random.points,
            random.draws,
            random.max_d_min
        ))
    });
}
#[test]
fn c08_worked_example() {
    criterion(8, "two-sample worked example with field expansion", || {
        let db = Database::new(vec![vec![20, 0], vec![0, 20]], 20).map_err(|e| e.to_string())?;
        let rejected = RejectedSet::new(vec![vec![1, 2], vec![2, 1]], 20).map_err(|e| e.to_string())?;
        let d_min = min_gaps(&db, &rejected, None).map_err(|e| e.to_string())?.d_min;
        ensure(d_min == 40, || format!("d_min = {d_min}, expected 40"))?;
        let config = SchemeConfig::new(unweighted(SchemeKind::Mask), 20, 2, 2, 1)
            .and_then(|c| c.with_d_min(d_min))
            .map_err(|e| e.to_string())?;
        ensure(config.q() == 809, || format!("q = {}", config.q()))?;
        let input = UserInput::unweighted(vec![1, 2]);
        let mut rng = ChaCha20Rng::seed_from_u64(8);

        let sweep = |config: &SchemeConfig, db: &Database, base: [u64; 2], rng: &mut ChaCha20Rng| -> Result<u64, String> {
            let support = config.d_min;
            for m1 in 0..support {
                for m2 in 0..support {
                    let mut shared = ServerSharedRandomness::expand(&random_seed(rng), &[0; 16], config);
                    shared.mu = vec![m1, m2];
                    let cr = ClientRandomness::sample(config, rng);
                    let res = run_in_process(config, db, &input, &shared, cr).map_err(|e| e.to_string())?;
                    let want = Revealed::MaskedDistances(vec![base[0] + m1, base[1] + m2]);
                    ensure(res.revealed == want && res.theta_star == 2, || {
                        format!("mu=({m1},{m2}): revealed {:?}, theta* {}", res.revealed, res.theta_star)
                    })?;
                }
            }
            Ok(support * support)
        };
        let draws = sweep(&config, &db, [365, 325], &mut rng)?;

        let expanded = expand(&db, &rejected, FieldExpansion { scale: 10, q2: 40009 }, &config).map_err(|e| e.to_string())?;
        let support = expanded.gaps.d_min;
        let big = expanded.config.clone().with_d_min(support).map_err(|e| e.to_string())?;
        let draws_after = sweep(&big, &expanded.db, [39605, 39205], &mut rng)?;
        Ok(format!(
            "revealed (365+mu1, 325+mu2) and theta*=2 for all {draws} draws at q=809; after c=10, q=40009 the support is 0..={} and theta*=2 for all {draws_after} draws",
            support - 1
        ))
    });
}

#[test]
fn c09_accuracy_trends() {
    criterion(9, "accuracy trends over quantization levels and mask support", || {
        let spec = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../specs/accuracy-synthetic.json");
        let res = run_accuracy_experiment_file(&spec).map_err(|e| e.to_string())?;
        let rs: Vec<u64> = {
            let mut v: Vec<u64> = res.cells.iter().map(|c| c.r).collect();
            v.sort_unstable();
            v.dedup();
            v
        };
        let ds: Vec<u64> = {
            let mut v: Vec<u64> = res.cells.iter().map(|c| c.d_min).collect();
            v.sort_unstable();
            v.dedup();
            v
        };
        let acc = |r, d| res.accuracy(r, d).unwrap();
        for &d in &ds {
            for w in rs.windows(2) {
                ensure(acc(w[1], d) >= acc(w[0], d), || {
                    format!("d_min={d}: accuracy drops from R={} ({}) to R={} ({})", w[0], acc(w[0], d), w[1], acc(w[1], d))
                })?;
            }
        }
        for &r in &rs {
            for w in ds.windows(2) {
                ensure(acc(r, w[1]) <= acc(r, w[0]), || {
                    format!("R={r}: accuracy rises from d_min={} to d_min={}", w[0], w[1])
                })?;
            }
        }
        let (finest, tightest) = (*rs.last().unwrap(), ds[0]);
        let top = acc(finest, tightest);
        ensure(top >= 0.99, || format!("accuracy at R={finest}, d_min={tightest} is {top}"))?;
        Ok(format!(
            "synthetic pools, M={}, {} queries x {} rounds; monotone in both directions; R={finest} d_min={tightest}: {top:.4}; R={} d_min={}: {:.4}",
            res.m,
            res.queries_per_round,
            res.rounds,
            rs[0],
            ds.last().unwrap(),
            acc(rs[0], *ds.last().unwrap())
        ))
    });
}

#[test]
fn c10_sampled_leakage_ordering() {
    criterion(10, "sampled leakage ordering on mixed-type pools, M=5, q=2003", || {
        // equal statistics give equal sums only up to float rounding
        const TOL: f64 = 1e-9;
        let mut rng = ChaCha20Rng::seed_from_u64(2024);
        let (accepted, rejected) = mixed_pools(10, 4, 16, 717, 560, &mut rng).map_err(|e| e.to_string())?;
        let mut params = LeakageParams::new(field(2003)).with_d_min(2);
        params.seed = 9;
        let run = |kind| {
            leakage_sampled(unweighted(kind), &accepted, &rejected, 5, 10_000, Some(40), 10, &params)
                .map(|r| r.value)
                .map_err(|e| e.to_string())
        };
        let (baseline, diff, mask) = (run(SchemeKind::Baseline)?, run(SchemeKind::Diff)?, run(SchemeKind::Mask)?);
        ensure(baseline + TOL >= diff && diff + TOL >= mask, || {
            format!("baseline {baseline}, diff {diff}, mask {mask}")
        })?;
        Ok(format!(
            "10^4 tuples, 40 queries: baseline {baseline:.7} >= diff {diff:.7} >= mask(d_min=2) {mask:.7}"
        ))
    });
}
