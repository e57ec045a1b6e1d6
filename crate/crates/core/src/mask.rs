//! Preprocessing for the masked schemes.
//!
//! The servers pick the mask support `{0, …, d_min − 1}` so that adding an
//! independent mask to every distance cannot reorder the distances seen from
//! any rejected point: `d_min` is the smallest gap between two accepted
//! samples' distances, taken over the rejected set. All gaps are computed on
//! true integer distances, never modulo `q`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{distance_bound, is_prime, PrimeField};
use crate::protocol::{Database, SchemeConfig};

/// Rejected samples `x_1..x_K` known to the servers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RejectedSet {
    samples: Vec<Vec<u64>>,
}

impl RejectedSet {
    pub fn new(samples: Vec<Vec<u64>>, r: u64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyPool("rejected set"));
        }
        let d = samples[0].len();
        for x in &samples {
            if x.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: x.len(),
                });
            }
            if let Some(v) = x.iter().find(|&&v| v > r) {
                return Err(Error::InvalidInput(format!("rejected entry {v} outside [0:{r}]")));
            }
        }
        Ok(RejectedSet { samples })
    }

    pub fn samples(&self) -> &[Vec<u64>] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn check_disjoint(&self, db: &Database) -> Result<()> {
        for (k, x) in self.samples.iter().enumerate() {
            if db.samples().contains(x) {
                return Err(Error::InvalidInput(format!(
                    "rejected point {} also appears in the database",
                    k + 1
                )));
            }
        }
        Ok(())
    }
}

/// Exact integer `Σ_j w_j (a_j − b_j)²`.
pub fn integer_distance(a: &[u64], b: &[u64], w: Option<&[u64]>) -> u64 {
    a.iter()
        .zip(b)
        .enumerate()
        .map(|(j, (&x, &y))| {
            let diff = x.abs_diff(y);
            w.map_or(1, |w| w[j]) * diff * diff
        })
        .sum()
}

pub fn distances_from(x: &[u64], db: &Database, w: Option<&[u64]>) -> Vec<u64> {
    db.samples().iter().map(|y| integer_distance(x, y, w)).collect()
}

/// Smallest `|d_i − d_j|` over `i ≠ j`, with the pair achieving it.
fn min_pair_gap(dists: &[u64]) -> (u64, usize, usize) {
    let mut order: Vec<usize> = (0..dists.len()).collect();
    order.sort_by_key(|&i| dists[i]);
    order
        .windows(2)
        .map(|w| (dists[w[1]] - dists[w[0]], w[0].min(w[1]), w[0].max(w[1])))
        .min_by_key(|&(g, _, _)| g)
        .expect("at least two samples")
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MaskParams {
    /// `d_k` for each rejected point, in input order.
    pub gaps: Vec<u64>,
    pub d_min: u64,
    /// `(k, i, j)` (0-based) achieving `d_min`.
    pub witness: (usize, usize, usize),
}

impl MaskParams {
    /// The mask support `{0, …, d_min − 1}` as its largest value.
    pub fn support_max(&self) -> Result<u64> {
        if self.d_min == 0 {
            let (k, i, j) = self.witness;
            return Err(Error::ZeroGap { k: k + 1, i: i + 1, j: j + 1 });
        }
        Ok(self.d_min - 1)
    }
}

/// `d_k = min_{i≠j} |d_i(x_k) − d_j(x_k)|` and `d_min = min_k d_k`.
///
/// A zero gap is reported through [`MaskParams::support_max`], which is the
/// only way to obtain a usable support.
pub fn min_gaps(db: &Database, rejected: &RejectedSet, w: Option<&[u64]>) -> Result<MaskParams> {
    if db.len() < 2 {
        return Err(Error::InvalidInput("mask gaps need at least two accepted samples".into()));
    }
    if rejected.samples()[0].len() != db.dim() {
        return Err(Error::DimensionMismatch {
            expected: db.dim(),
            got: rejected.samples()[0].len(),
        });
    }
    let per_k: Vec<(u64, usize, usize)> = rejected
        .samples()
        .iter()
        .map(|x| min_pair_gap(&distances_from(x, db, w)))
        .collect();
    let (k, &(d_min, i, j)) = per_k
        .iter()
        .enumerate()
        .min_by_key(|(_, (g, _, _))| *g)
        .expect("rejected set is nonempty");
    Ok(MaskParams {
        gaps: per_k.iter().map(|p| p.0).collect(),
        d_min,
        witness: (k, i, j),
    })
}

/// Whether `x` lies in the closure of the rejected set: every pairwise
/// distance gap seen from `x` dominates the same gap seen from each rejected
/// point.
pub fn closure_membership(
    x: &[u64],
    db: &Database,
    rejected: &RejectedSet,
    w: Option<&[u64]>,
) -> Result<bool> {
    if db.samples().iter().any(|y| y.as_slice() == x) {
        return Err(Error::QueryInDatabase);
    }
    let dx = distances_from(x, db, w);
    let per_k: Vec<Vec<u64>> = rejected
        .samples()
        .iter()
        .map(|xk| distances_from(xk, db, w))
        .collect();
    let m = dx.len();
    for i in 0..m {
        for j in i + 1..m {
            let gx = dx[i].abs_diff(dx[j]);
            if per_k.iter().any(|dk| dk[i].abs_diff(dk[j]) > gx) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Largest `q^d` for which [`enumerate_closure`] will walk `F_q^d`.
pub const CLOSURE_ENUMERATION_LIMIT: u128 = 1 << 20;

/// Every point of `F_q^d` (coordinates as integers `0..q`) in the closure.
pub fn enumerate_closure(
    db: &Database,
    rejected: &RejectedSet,
    q: u64,
    w: Option<&[u64]>,
) -> Result<Vec<Vec<u64>>> {
    let d = db.dim();
    let size = (q as u128).checked_pow(d as u32).unwrap_or(u128::MAX);
    if size > CLOSURE_ENUMERATION_LIMIT {
        return Err(Error::BudgetExceeded {
            needed: size,
            budget: CLOSURE_ENUMERATION_LIMIT,
        });
    }
    let mut out = Vec::new();
    let mut point = vec![0u64; d];
    for _ in 0..size {
        if !db.samples().contains(&point) && closure_membership(&point, db, rejected, w)? {
            out.push(point.clone());
        }
        for c in point.iter_mut() {
            *c += 1;
            if *c < q {
                break;
            }
            *c = 0;
        }
    }
    Ok(out)
}

/// 0-based first index of the minimum.
fn first_argmin(values: &[u64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = i;
        }
    }
    best
}

/// Whether masked decoding returns the first true argmin for every mask draw
/// with support `{0, …, gap − 1}`.
///
/// Masks are independent per index, so the worst draw puts `gap − 1` on the
/// true argmin `t` and `0` everywhere else: decoding fails for some draw iff
/// some `j ≠ t` has `d_j < d_t + gap − 1`, or `d_j = d_t + gap − 1` with
/// `j < t` (ties go to the smaller index).
pub fn mask_always_correct(dists: &[u64], gap: u64) -> bool {
    if gap == 0 {
        return false;
    }
    let t = first_argmin(dists);
    let ceiling = dists[t] + gap - 1;
    dists
        .iter()
        .enumerate()
        .all(|(j, &dj)| j == t || dj > ceiling || (dj == ceiling && j > t))
}

/// Exhaustive counterpart of [`mask_always_correct`]; `None` when `gap^M`
/// exceeds `limit`.
pub fn mask_always_correct_exhaustive(dists: &[u64], gap: u64, limit: u128) -> Option<bool> {
    let m = dists.len() as u32;
    let draws = (gap as u128).checked_pow(m)?;
    if draws > limit || gap == 0 {
        return None;
    }
    let t = first_argmin(dists);
    let mut mu = vec![0u64; dists.len()];
    let mut masked = dists.to_vec();
    for _ in 0..draws {
        for (slot, (&d, &u)) in masked.iter_mut().zip(dists.iter().zip(&mu)) {
            *slot = d + u;
        }
        if first_argmin(&masked) != t {
            return Some(false);
        }
        for u in mu.iter_mut() {
            *u += 1;
            if *u < gap {
                break;
            }
            *u = 0;
        }
    }
    Some(true)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapSuccess {
    pub gap: u64,
    pub success_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EmpiricalDmin {
    pub table: Vec<GapSuccess>,
    /// Largest candidate whose success rate meets the threshold.
    pub chosen: Option<u64>,
}

/// For each candidate gap, the fraction of sample queries whose masked
/// decode returns the true argmin under every mask draw.
pub fn empirical_dmin(
    db: &Database,
    queries: &[Vec<u64>],
    candidates: &[u64],
    threshold: f64,
    w: Option<&[u64]>,
) -> Result<EmpiricalDmin> {
    if queries.is_empty() {
        return Err(Error::EmptyPool("sample queries"));
    }
    let dists: Vec<Vec<u64>> = queries.iter().map(|x| distances_from(x, db, w)).collect();
    let table: Vec<GapSuccess> = candidates
        .iter()
        .map(|&gap| {
            let ok = dists.iter().filter(|d| mask_always_correct(d, gap)).count();
            GapSuccess {
                gap,
                success_rate: ok as f64 / queries.len() as f64,
            }
        })
        .collect();
    let chosen = table
        .iter()
        .filter(|g| g.success_rate >= threshold)
        .map(|g| g.gap)
        .max();
    Ok(EmpiricalDmin { table, chosen })
}

/// The transform `T: a ↦ c·a` into a larger prime field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct FieldExpansion {
    pub scale: u64,
    pub q2: u64,
}

#[derive(Clone, Debug)]
pub struct ExpandedDatabase {
    /// Samples scaled by `c`; entries in `[0 : c·R]`.
    pub db: Database,
    /// The original configuration moved to `q2`, with the sample scale
    /// multiplied by `c` and the distance bound set to the largest distance
    /// observable from the rejected set.
    pub config: SchemeConfig,
    /// Gaps seen from the (unscaled) rejected points against the scaled
    /// samples; its `d_min` is the enlarged mask support.
    pub gaps: MaskParams,
    pub triples_checked: u64,
    /// Whether `q2` also exceeds `L·d·(c·R)²`, the worst case over every
    /// possible query.
    pub covers_full_range: bool,
}

/// Embeds the database into `F_{q2}` by scaling every sample.
///
/// The transform is applied to the stored samples only; rejected points and
/// user queries stay as they are, so the transform can stay hidden from the
/// user. It is accepted only if, for every rejected point and pair of
/// samples, the distance gap does not shrink and keeps its sign, which
/// preserves every ordering the rejected set can observe.
///
/// `q2` must exceed every masked distance observable from the rejected set,
/// `max_k max_i d_i(x_k) + d_min' − 1`. The resulting configuration records
/// that observable maximum as its distance bound; whether `q2` also covers
/// the worst case over all of `[0:R]^d` is reported in
/// [`ExpandedDatabase::covers_full_range`].
pub fn expand(
    db: &Database,
    rejected: &RejectedSet,
    expansion: FieldExpansion,
    config: &SchemeConfig,
) -> Result<ExpandedDatabase> {
    let FieldExpansion { scale, q2 } = expansion;
    if scale == 0 {
        return Err(Error::ExpansionRejected("scale must be at least 1".into()));
    }
    if !is_prime(q2) {
        return Err(Error::ExpansionRejected(format!("q2 = {q2} is not prime")));
    }
    if q2 <= config.q() {
        return Err(Error::ExpansionRejected(format!(
            "q2 = {q2} must exceed the current modulus {}",
            config.q()
        )));
    }
    let new_scale = config.sample_scale * scale;
    let scaled: Vec<Vec<u64>> = db
        .samples()
        .iter()
        .map(|y| y.iter().map(|&v| v * scale).collect())
        .collect();
    let new_db = Database::new(scaled, config.r * new_scale)?;

    let m = db.len();
    let mut triples = 0u64;
    let mut observed = 0u64;
    for (k, xk) in rejected.samples().iter().enumerate() {
        let before = distances_from(xk, db, None);
        let after = distances_from(xk, &new_db, None);
        observed = observed.max(after.iter().copied().max().unwrap_or(0));
        for i in 0..m {
            for j in i + 1..m {
                triples += 1;
                let b = before[i] as i128 - before[j] as i128;
                let a = after[i] as i128 - after[j] as i128;
                if b.abs() > a.abs() || b.signum() * a.signum() < 0 {
                    return Err(Error::ExpansionRejected(format!(
                        "gap for rejected point {} between samples {} and {} shrinks or flips ({b} -> {a})",
                        k + 1,
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
    }
    let gaps = if m >= 2 {
        min_gaps(&new_db, rejected, None)?
    } else {
        MaskParams {
            gaps: vec![0; rejected.len()],
            d_min: 0,
            witness: (0, 0, 0),
        }
    };
    let reach = observed as u128 + gaps.d_min.max(1) as u128 - 1;
    if q2 as u128 <= reach {
        return Err(Error::ExpansionRejected(format!(
            "q2 = {q2} must exceed the largest observable masked distance {reach}"
        )));
    }
    let full = distance_bound(config.r * new_scale, config.d, config.l) as u128;
    let mut new_config = config.clone();
    new_config.sample_scale = new_scale;
    new_config.max_distance = Some(observed);
    new_config.field = PrimeField::new(q2)?;
    new_config.validate()?;
    Ok(ExpandedDatabase {
        db: new_db,
        config: new_config,
        gaps,
        triples_checked: triples,
        covers_full_range: (q2 as u128) > full,
    })
}

/// Preprocessing summary for operators.
#[derive(Clone, Debug, Serialize)]
pub struct PrepReport {
    pub gaps: Vec<u64>,
    pub d_min: u64,
    pub support_max: Option<u64>,
    pub expansion: Option<ExpansionSummary>,
    pub empirical: Option<EmpiricalDmin>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExpansionSummary {
    pub scale: u64,
    pub q2: u64,
    pub verified: bool,
    pub triples_checked: u64,
    pub d_min_after: u64,
    pub message: Option<String>,
}

/// Gap table, optional field expansion and optional empirical gap table for
/// one database and rejected set. A failed expansion is reported, not
/// raised.
pub fn prepare(
    db: &Database,
    rejected: &RejectedSet,
    config: &SchemeConfig,
    expansion: Option<FieldExpansion>,
    empirical: Option<(&[u64], f64)>,
) -> Result<PrepReport> {
    rejected.check_disjoint(db)?;
    let params = min_gaps(db, rejected, None)?;
    let expansion = expansion.map(|e| match expand(db, rejected, e, config) {
        Ok(x) => ExpansionSummary {
            scale: e.scale,
            q2: e.q2,
            verified: true,
            triples_checked: x.triples_checked,
            d_min_after: x.gaps.d_min,
            message: None,
        },
        Err(err) => ExpansionSummary {
            scale: e.scale,
            q2: e.q2,
            verified: false,
            triples_checked: 0,
            d_min_after: 0,
            message: Some(err.to_string()),
        },
    });
    let empirical = match empirical {
        Some((candidates, threshold)) => {
            Some(empirical_dmin(db, rejected.samples(), candidates, threshold, None)?)
        }
        None => None,
    };
    Ok(PrepReport {
        gaps: params.gaps.clone(),
        d_min: params.d_min,
        support_max: params.support_max().ok(),
        expansion,
        empirical,
    })
}

impl PrepReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,d_k\n");
        for (k, g) in self.gaps.iter().enumerate() {
            out.push_str(&format!("{},{}\n", k + 1, g));
        }
        out.push_str(&format!("# d_min,{}\n", self.d_min));
        match self.support_max {
            Some(s) => out.push_str(&format!("# support,0..={s}\n")),
            None => out.push_str("# support,none (zero gap)\n"),
        }
        if let Some(e) = &self.expansion {
            out.push_str(&format!(
                "# expansion,scale={},q2={},verified={},triples={},d_min_after={}\n",
                e.scale, e.q2, e.verified, e.triples_checked, e.d_min_after
            ));
            if let Some(msg) = &e.message {
                out.push_str(&format!("# expansion_error,{msg}\n"));
            }
        }
        if let Some(emp) = &self.empirical {
            for g in &emp.table {
                out.push_str(&format!("# empirical,gap={},success_rate={}\n", g.gap, g.success_rate));
            }
            match emp.chosen {
                Some(c) => out.push_str(&format!("# empirical_choice,{c}\n")),
                None => out.push_str("# empirical_choice,none\n"),
            }
        }
        out
    }
}
