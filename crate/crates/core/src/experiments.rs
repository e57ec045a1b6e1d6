//! Dataset ingestion, quantization and the experiment drivers: the
//! accuracy/quantization trade-off and leakage tables.

use std::collections::{BTreeSet, HashSet};
use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::field::PrimeField;
use crate::leakage::{self, LeakageParams, LeakageTable, PriorModel, TuplePrior};
use crate::mask::empirical_dmin;
use crate::protocol::{
    ClientRandomness, Database, SchemeConfig, SchemeKind, ServerSharedRandomness, UserInput,
    Variant,
};
use crate::schemes::run_in_process;

/// Real-valued rows with a binary label: `1` accepted, `0` rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealDataset {
    pub features: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
}

impl RealDataset {
    pub fn new(features: Vec<String>, rows: Vec<Vec<f64>>, labels: Vec<u8>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::InvalidInput(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        if let Some(l) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::InvalidInput(format!("label {l} is not binary")));
        }
        for row in &rows {
            if row.len() != features.len() {
                return Err(Error::DimensionMismatch {
                    expected: features.len(),
                    got: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput("non-finite feature value".into()));
            }
        }
        Ok(RealDataset {
            features,
            rows,
            labels,
        })
    }

    /// Integer pools as a labelled dataset.
    pub fn from_pools(accepted: &[Vec<u64>], rejected: &[Vec<u64>]) -> Result<Self> {
        let d = accepted.first().or(rejected.first()).map_or(0, Vec::len);
        let features = (1..=d).map(|j| format!("f{j}")).collect();
        let as_real = |r: &Vec<u64>| r.iter().map(|&v| v as f64).collect::<Vec<f64>>();
        let rows = accepted.iter().chain(rejected).map(as_real).collect();
        let labels = std::iter::repeat_n(1, accepted.len())
            .chain(std::iter::repeat_n(0, rejected.len()))
            .collect();
        RealDataset::new(features, rows, labels)
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }

    pub fn accepted(&self) -> Vec<Vec<f64>> {
        self.pool(1)
    }

    pub fn rejected(&self) -> Vec<Vec<f64>> {
        self.pool(0)
    }

    fn pool(&self, label: u8) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .zip(&self.labels)
            .filter(|(_, &l)| l == label)
            .map(|(r, _)| r.clone())
            .collect()
    }

    /// Drops exact duplicate (row, label) pairs, keeping first occurrences.
    pub fn dedup(&mut self) {
        let mut seen = HashSet::new();
        let mut keep = Vec::with_capacity(self.rows.len());
        for (row, &label) in self.rows.iter().zip(&self.labels) {
            let key: (Vec<u64>, u8) = (row.iter().map(|v| v.to_bits()).collect(), label);
            keep.push(seen.insert(key));
        }
        let mut k = keep.iter();
        self.rows.retain(|_| *k.next().unwrap());
        let mut k = keep.iter();
        self.labels.retain(|_| *k.next().unwrap());
    }
}

/// Rows unique up to first occurrence.
pub fn dedup_rows(rows: &[Vec<u64>]) -> Vec<Vec<u64>> {
    let mut seen = HashSet::new();
    rows.iter().filter(|r| seen.insert(r.to_vec())).cloned().collect()
}

/// Label rule applied to the target column: accepted iff `value <op> threshold`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRule {
    pub op: Comparison,
    pub threshold: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparison {
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = ">")]
    Above,
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = "<")]
    Below,
    #[serde(rename = "==")]
    Equal,
}

impl ThresholdRule {
    pub fn at_least(threshold: f64) -> Self {
        ThresholdRule {
            op: Comparison::AtLeast,
            threshold,
        }
    }

    pub fn accepts(&self, v: f64) -> bool {
        match self.op {
            Comparison::AtLeast => v >= self.threshold,
            Comparison::Above => v > self.threshold,
            Comparison::AtMost => v <= self.threshold,
            Comparison::Below => v < self.threshold,
            Comparison::Equal => v == self.threshold,
        }
    }
}

/// Declared column handling: categorical columns expanded into one indicator
/// per distinct value (sorted), and columns to drop.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ColumnMap {
    #[serde(default)]
    pub one_hot: Vec<String>,
    #[serde(default)]
    pub drop: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IngestOptions {
    pub target: String,
    pub rule: ThresholdRule,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    #[serde(default)]
    pub columns: ColumnMap,
    #[serde(default)]
    pub dedup: bool,
}

fn default_delimiter() -> char {
    ','
}

impl IngestOptions {
    pub fn new(target: &str, rule: ThresholdRule) -> Self {
        IngestOptions {
            target: target.to_string(),
            rule,
            delimiter: ',',
            columns: ColumnMap::default(),
            dedup: false,
        }
    }
}

/// Reads a headed CSV, labels rows with the threshold rule on the target
/// column and keeps every other (non-dropped) column as a feature.
pub fn ingest_csv(path: &Path, opts: &IngestOptions) -> Result<RealDataset> {
    let text = std::fs::read_to_string(path)?;
    ingest_csv_str(&text, opts)
}

pub fn ingest_csv_str(text: &str, opts: &IngestOptions) -> Result<RealDataset> {
    if !opts.delimiter.is_ascii() {
        return Err(Error::InvalidInput("delimiter must be a single ASCII character".into()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(opts.delimiter as u8)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(Error::InvalidInput("CSV has no header".into()));
    }
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::InvalidInput(format!("missing column `{name}`")))
    };
    let target = col(&opts.target)?;
    for name in opts.columns.one_hot.iter().chain(&opts.columns.drop) {
        col(name)?;
    }
    let records: Vec<csv::StringRecord> = reader.records().collect::<std::result::Result<_, _>>()?;
    if records.is_empty() {
        return Err(Error::EmptyPool("CSV rows"));
    }

    enum Kind {
        Numeric,
        OneHot(Vec<String>),
    }
    let mut layout: Vec<(usize, Kind)> = Vec::new();
    let mut features = Vec::new();
    for (j, name) in headers.iter().enumerate() {
        if j == target || opts.columns.drop.contains(name) {
            continue;
        }
        if opts.columns.one_hot.contains(name) {
            let levels: BTreeSet<String> = records.iter().map(|r| r[j].to_string()).collect();
            let levels: Vec<String> = levels.into_iter().collect();
            features.extend(levels.iter().map(|l| format!("{name}={l}")));
            layout.push((j, Kind::OneHot(levels)));
        } else {
            features.push(name.clone());
            layout.push((j, Kind::Numeric));
        }
    }

    let numeric = |rec: &csv::StringRecord, j: usize, line: usize| -> Result<f64> {
        rec[j].parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
            Error::InvalidInput(format!(
                "row {line}: column `{}` holds non-numeric `{}`",
                headers[j], &rec[j]
            ))
        })
    };
    let mut rows = Vec::with_capacity(records.len());
    let mut labels = Vec::with_capacity(records.len());
    for (i, rec) in records.iter().enumerate() {
        let line = i + 2;
        if rec.len() != headers.len() {
            return Err(Error::InvalidInput(format!(
                "row {line} has {} fields, header has {}",
                rec.len(),
                headers.len()
            )));
        }
        labels.push(u8::from(opts.rule.accepts(numeric(rec, target, line)?)));
        let mut row = Vec::with_capacity(features.len());
        for (j, kind) in &layout {
            match kind {
                Kind::Numeric => row.push(numeric(rec, *j, line)?),
                Kind::OneHot(levels) => {
                    row.extend(levels.iter().map(|l| if l == &rec[*j] { 1.0 } else { 0.0 }))
                }
            }
        }
        rows.push(row);
    }
    let mut ds = RealDataset::new(features, rows, labels)?;
    if opts.dedup {
        ds.dedup();
    }
    Ok(ds)
}

/// Per-feature min-max normalisation to `[0, 1]` followed by rounding to
/// `R + 1` levels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantizationSpec {
    pub r: u64,
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl QuantizationSpec {
    /// Ranges taken from `pool` (normally the accepted samples).
    pub fn from_pool(pool: &[Vec<f64>], r: u64) -> Result<Self> {
        if r == 0 {
            return Err(Error::InvalidInput("R must be at least 1".into()));
        }
        let first = pool.first().ok_or(Error::EmptyPool("quantization pool"))?;
        let mut mins = first.clone();
        let mut maxs = first.clone();
        for row in pool {
            for (j, &v) in row.iter().enumerate() {
                mins[j] = mins[j].min(v);
                maxs[j] = maxs[j].max(v);
            }
        }
        Ok(QuantizationSpec { r, mins, maxs })
    }

    /// `round(clip((v − min) / (max − min)) · R)`; constant features map to 0.
    pub fn quantize_row(&self, row: &[f64]) -> Vec<u64> {
        row.iter()
            .enumerate()
            .map(|(j, &v)| {
                let span = self.maxs[j] - self.mins[j];
                if span <= 0.0 {
                    return 0;
                }
                let t = ((v - self.mins[j]) / span).clamp(0.0, 1.0);
                (t * self.r as f64).round() as u64
            })
            .collect()
    }

    pub fn quantize(&self, rows: &[Vec<f64>]) -> Vec<Vec<u64>> {
        rows.iter().map(|r| self.quantize_row(r)).collect()
    }

    pub fn dequantize_row(&self, row: &[u64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, &k)| self.mins[j] + (self.maxs[j] - self.mins[j]) * k as f64 / self.r as f64)
            .collect()
    }
}

/// Uniform integer vectors over `[0:R]^d`.
pub fn uniform_rows<R: Rng + ?Sized>(r: u64, d: usize, n: usize, rng: &mut R) -> Vec<Vec<u64>> {
    (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(0..=r)).collect())
        .collect()
}

pub type Rows = Vec<Vec<u64>>;

/// Mixed-type pools resembling one-hot encoded tabular data: `numeric`
/// skewed features over `[0:R]` followed by `binary` features in `{0, R}`.
/// Rows are unique within each pool and never shared between pools.
pub fn mixed_pools<R: Rng + ?Sized>(
    r: u64,
    numeric: usize,
    binary: usize,
    n_accepted: usize,
    n_rejected: usize,
    rng: &mut R,
) -> Result<(Rows, Rows)> {
    let capacity = ((r + 1) as f64).powi(numeric as i32) * 2f64.powi(binary as i32);
    if capacity < 2.0 * (n_accepted + n_rejected) as f64 {
        return Err(Error::InvalidInput("feature space too small for the requested pools".into()));
    }
    let mut seen = HashSet::new();
    let mut draw = |n: usize, rng: &mut R| {
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let mut row = Vec::with_capacity(numeric + binary);
            for _ in 0..numeric {
                // squaring a uniform skews mass towards 0, like counts and ages
                let u: f64 = rng.random();
                row.push((u * u * r as f64).round() as u64);
            }
            for _ in 0..binary {
                row.push(if rng.random_bool(0.3) { r } else { 0 });
            }
            if seen.insert(row.clone()) {
                out.push(row);
            }
        }
        out
    };
    let accepted = draw(n_accepted, rng);
    let rejected = draw(n_rejected, rng);
    Ok((accepted, rejected))
}

/// Writes integer rows with an `f1..fd` header.
pub fn write_integer_csv(path: &Path, rows: &[Vec<u64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let d = rows.first().map_or(0, Vec::len);
    w.write_record((1..=d).map(|j| format!("f{j}")))?;
    for row in rows {
        w.write_record(row.iter().map(u64::to_string))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads integer rows from a headed CSV.
pub fn read_integer_csv(path: &Path) -> Result<Vec<Vec<u64>>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| {
                s.trim().parse::<u64>().map_err(|_| {
                    Error::InvalidInput(format!("row {}: `{s}` is not a non-negative integer", i + 2))
                })
            })
            .collect::<Result<Vec<u64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyPool("CSV rows"));
    }
    Ok(rows)
}

fn default_variant() -> Variant {
    Variant::new(SchemeKind::Mask, false)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TradeoffSpec {
    pub m: usize,
    pub queries_per_round: usize,
    pub rounds: usize,
    pub r_grid: Vec<u64>,
    pub d_min_grid: Vec<u64>,
    #[serde(default = "default_variant")]
    pub variant: Variant,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TradeoffCell {
    pub r: u64,
    pub d_min: u64,
    /// Mean over rounds of the per-round hit fraction.
    pub accuracy: f64,
    /// Mean fraction of queries whose masked decode is correct for every
    /// mask draw.
    pub guaranteed: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TradeoffResult {
    pub m: usize,
    pub queries_per_round: usize,
    pub rounds: usize,
    pub variant: Variant,
    pub cells: Vec<TradeoffCell>,
}

impl TradeoffResult {
    pub fn accuracy(&self, r: u64, d_min: u64) -> Option<f64> {
        self.cells
            .iter()
            .find(|c| c.r == r && c.d_min == d_min)
            .map(|c| c.accuracy)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for c in &self.cells {
            w.serialize(c)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn real_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// 0-based nearest row, smallest index on ties.
fn nearest(x: &[f64], rows: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, y) in rows.iter().enumerate() {
        let d = real_distance(x, y);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

/// Seed for one (round, query) pair, shared by every grid cell so cells see
/// the same mask stream.
fn derived_seed(seed: u64, round: usize, query: usize) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"pcr/tradeoff/v1");
    h.update(seed.to_le_bytes());
    h.update((round as u64).to_le_bytes());
    h.update((query as u64).to_le_bytes());
    h.finalize().into()
}

/// Accuracy of private retrieval on quantized data against the real-valued
/// nearest neighbour, over a grid of quantization levels and mask supports.
///
/// Each round samples `M` accepted rows as the database and
/// `queries_per_round` rejected rows as queries. A query counts as a hit when
/// the retrieved row is at least as close (in real distance) as the true
/// nearest row.
pub fn run_tradeoff(ds: &RealDataset, spec: &TradeoffSpec) -> Result<TradeoffResult> {
    let accepted = ds.accepted();
    let rejected = ds.rejected();
    if spec.m == 0 || spec.m > accepted.len() {
        return Err(Error::InvalidInput(format!(
            "M = {} must lie in 1..={} (accepted pool)",
            spec.m,
            accepted.len()
        )));
    }
    if spec.queries_per_round == 0 || spec.queries_per_round > rejected.len() {
        return Err(Error::InvalidInput(format!(
            "queries per round {} must lie in 1..={} (rejected pool)",
            spec.queries_per_round,
            rejected.len()
        )));
    }
    if spec.rounds == 0 || spec.r_grid.is_empty() || spec.d_min_grid.is_empty() {
        return Err(Error::InvalidInput("rounds and both grids must be nonempty".into()));
    }
    if spec.variant.kind == SchemeKind::Diff && spec.m < 2 {
        return Err(Error::InvalidInput("difference schemes need M >= 2".into()));
    }
    let quantizers = spec
        .r_grid
        .iter()
        .map(|&r| QuantizationSpec::from_pool(&accepted, r))
        .collect::<Result<Vec<_>>>()?;
    let d = ds.dim();
    let ncell = spec.r_grid.len() * spec.d_min_grid.len();

    let per_round: Vec<Result<Vec<(f64, f64)>>> = (0..spec.rounds)
        .into_par_iter()
        .map(|round| {
            let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
            rng.set_stream(round as u64);
            let db_idx = index::sample(&mut rng, accepted.len(), spec.m).into_vec();
            let q_idx = index::sample(&mut rng, rejected.len(), spec.queries_per_round).into_vec();
            let db_rows: Vec<Vec<f64>> = db_idx.iter().map(|&i| accepted[i].clone()).collect();
            let queries: Vec<Vec<f64>> = q_idx.iter().map(|&i| rejected[i].clone()).collect();
            let truth: Vec<f64> = queries
                .iter()
                .map(|x| real_distance(x, &db_rows[nearest(x, &db_rows)]))
                .collect();
            let mut sums = vec![(0.0, 0.0); ncell];
            for (ri, (&r, quant)) in spec.r_grid.iter().zip(&quantizers).enumerate() {
                let db = Database::new(quant.quantize(&db_rows), r)?;
                let xs = quant.quantize(&queries);
                let guaranteed = empirical_dmin(&db, &xs, &spec.d_min_grid, 1.0, None)?;
                for (di, &dm) in spec.d_min_grid.iter().enumerate() {
                    let config = SchemeConfig::new(spec.variant, r, d, spec.m, 1)?.with_d_min(dm)?;
                    let mut hits = 0usize;
                    for (qi, x) in xs.iter().enumerate() {
                        let input = if spec.variant.weighted {
                            UserInput::weighted(x.clone(), vec![1; d])
                        } else {
                            UserInput::unweighted(x.clone())
                        };
                        let seed = derived_seed(spec.seed, round, qi);
                        let shared = ServerSharedRandomness::expand(&seed, &[0; 16], &config);
                        let cr = ClientRandomness::sample(&config, &mut rng);
                        let got = run_in_process(&config, &db, &input, &shared, cr)?;
                        let retrieved = &db_rows[got.theta_star - 1];
                        let dist = real_distance(&queries[qi], retrieved);
                        if dist <= truth[qi] * (1.0 + 1e-12) + 1e-12 {
                            hits += 1;
                        }
                    }
                    let cell = &mut sums[ri * spec.d_min_grid.len() + di];
                    cell.0 += hits as f64 / xs.len() as f64;
                    cell.1 += guaranteed.table[di].success_rate;
                }
            }
            Ok(sums)
        })
        .collect();
    let mut totals = vec![(0.0, 0.0); ncell];
    for round in per_round {
        for (t, s) in totals.iter_mut().zip(round?) {
            t.0 += s.0;
            t.1 += s.1;
        }
    }
    let n = spec.rounds as f64;
    let mut cells = Vec::with_capacity(ncell);
    for (ri, &r) in spec.r_grid.iter().enumerate() {
        for (di, &d_min) in spec.d_min_grid.iter().enumerate() {
            let (acc, g) = totals[ri * spec.d_min_grid.len() + di];
            cells.push(TradeoffCell {
                r,
                d_min,
                accuracy: acc / n,
                guaranteed: g / n,
            });
        }
    }
    Ok(TradeoffResult {
        m: spec.m,
        queries_per_round: spec.queries_per_round,
        rounds: spec.rounds,
        variant: spec.variant,
        cells,
    })
}

/// Where an integer pool comes from: a CSV path or inline rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PoolSource {
    Path(PathBuf),
    Rows(Vec<Vec<u64>>),
}

impl PoolSource {
    fn load(&self, base: &Path) -> Result<Vec<Vec<u64>>> {
        match self {
            PoolSource::Path(p) => read_integer_csv(&base.join(p)),
            PoolSource::Rows(rows) => Ok(rows.clone()),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridTuples {
    #[default]
    Iid,
    Distinct,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorSpec {
    /// `x` uniform over `[0:R]^d`, tuples over the rest of the grid.
    Grid {
        r: u64,
        d: usize,
        m: usize,
        #[serde(default)]
        tuples: GridTuples,
    },
    /// Queries from the rejected pool, sampled tuples from the accepted pool.
    Sampled {
        accepted: PoolSource,
        rejected: PoolSource,
        r: u64,
        m: usize,
        n_tuples: usize,
        #[serde(default)]
        n_queries: Option<usize>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeRow {
    pub scheme: SchemeKind,
    #[serde(default)]
    pub weighted: bool,
    #[serde(default = "one")]
    pub d_min: u64,
}

fn one() -> u64 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeakageExperimentSpec {
    pub q: u64,
    pub schemes: Vec<SchemeRow>,
    pub prior: PriorSpec,
    #[serde(default)]
    pub weights: Option<Vec<u64>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub budget: Option<u128>,
    #[serde(default)]
    pub mc_samples: Option<usize>,
}

/// One leakage row per scheme entry; pool paths resolve against `base`.
pub fn run_leakage_experiment(spec: &LeakageExperimentSpec, base: &Path) -> Result<LeakageTable> {
    if spec.schemes.is_empty() {
        return Err(Error::InvalidInput("no schemes listed".into()));
    }
    let q = PrimeField::new(spec.q)?;
    let mut prior = match &spec.prior {
        PriorSpec::Grid { r, d, m, tuples } => {
            let t = match tuples {
                GridTuples::Iid => TuplePrior::IidGrid,
                GridTuples::Distinct => TuplePrior::DistinctGrid,
            };
            PriorModel::uniform_grid(*r, *d, *m, t)
        }
        PriorSpec::Sampled {
            accepted,
            rejected,
            r,
            m,
            n_tuples,
            n_queries,
        } => {
            let acc = accepted.load(base)?;
            let rej = rejected.load(base)?;
            let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
            PriorModel::sampled(&acc, &rej, *m, *n_tuples, *n_queries, *r, &mut rng)?
        }
    };
    prior.weights = spec.weights.clone();
    let sampled = matches!(spec.prior, PriorSpec::Sampled { .. });
    let mut rows = Vec::with_capacity(spec.schemes.len());
    for row in &spec.schemes {
        let mut params = LeakageParams::new(q).with_d_min(row.d_min);
        params.seed = spec.seed;
        if let Some(b) = spec.budget {
            params.budget = b;
        }
        if let Some(n) = spec.mc_samples {
            params.mc_samples = n;
        }
        let variant = Variant::new(row.scheme, row.weighted);
        let mut report = leakage::leakage_exact(variant, &prior, &params)?;
        if sampled && report.method == leakage::Method::Exact {
            report.method = leakage::Method::Sampled;
        }
        rows.push(report);
    }
    Ok(LeakageTable { rows })
}

pub fn run_leakage_experiment_file(path: &Path) -> Result<LeakageTable> {
    let spec: LeakageExperimentSpec = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    run_leakage_experiment(&spec, path.parent().unwrap_or(Path::new(".")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSpec {
    Csv {
        path: PathBuf,
        #[serde(flatten)]
        options: IngestOptions,
    },
    /// Uniform integer pools over `[0:levels]^d`, treated as real values.
    Synthetic {
        accepted: usize,
        rejected: usize,
        d: usize,
        levels: u64,
        #[serde(default)]
        seed: u64,
    },
}

impl DatasetSpec {
    pub fn load(&self, base: &Path) -> Result<RealDataset> {
        match self {
            DatasetSpec::Csv { path, options } => ingest_csv(&base.join(path), options),
            DatasetSpec::Synthetic {
                accepted,
                rejected,
                d,
                levels,
                seed,
            } => {
                let mut rng = ChaCha20Rng::seed_from_u64(*seed);
                let acc = uniform_rows(*levels, *d, *accepted, &mut rng);
                let rej = uniform_rows(*levels, *d, *rejected, &mut rng);
                RealDataset::from_pools(&acc, &rej)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyExperimentSpec {
    pub dataset: DatasetSpec,
    #[serde(flatten)]
    pub tradeoff: TradeoffSpec,
}

pub fn run_accuracy_experiment(spec: &AccuracyExperimentSpec, base: &Path) -> Result<TradeoffResult> {
    let ds = spec.dataset.load(base)?;
    run_tradeoff(&ds, &spec.tradeoff)
}

pub fn run_accuracy_experiment_file(path: &Path) -> Result<TradeoffResult> {
    let spec: AccuracyExperimentSpec = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    run_accuracy_experiment(&spec, path.parent().unwrap_or(Path::new(".")))
}

/// A fresh 32-byte seed from `rng`.
pub fn random_seed<R: RngCore + ?Sized>(rng: &mut R) -> [u8; 32] {
    let mut s = [0u8; 32];
    rng.fill_bytes(&mut s);
    s
}
