//! Shared data model for every retrieval scheme: configuration, the
//! replicated database, user input, client and server randomness, the
//! query/answer bundles exchanged, and communication cost accounting.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::field::{distance_bound, PrimeField, VandermondeMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    /// Reveals every distance.
    Baseline,
    /// Reveals consecutive distance differences.
    Diff,
    /// Reveals distances under an additive server-side mask.
    Mask,
}

impl SchemeKind {
    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Baseline => "baseline",
            SchemeKind::Diff => "diff",
            SchemeKind::Mask => "mask",
        }
    }
}

impl std::str::FromStr for SchemeKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "baseline" => Ok(SchemeKind::Baseline),
            "diff" => Ok(SchemeKind::Diff),
            "mask" => Ok(SchemeKind::Mask),
            other => Err(Error::InvalidInput(format!("unknown scheme `{other}`"))),
        }
    }
}

/// One of the six protocols: a scheme kind, with or without private
/// actionability weights.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Variant {
    pub kind: SchemeKind,
    pub weighted: bool,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::new(SchemeKind::Baseline, false),
        Variant::new(SchemeKind::Diff, false),
        Variant::new(SchemeKind::Mask, false),
        Variant::new(SchemeKind::Baseline, true),
        Variant::new(SchemeKind::Diff, true),
        Variant::new(SchemeKind::Mask, true),
    ];

    pub const fn new(kind: SchemeKind, weighted: bool) -> Self {
        Variant { kind, weighted }
    }

    /// Two servers without weights, three with.
    pub fn servers(self) -> usize {
        if self.weighted {
            3
        } else {
            2
        }
    }

    /// Wire identifier, 0..=5 in the order of [`Variant::ALL`].
    pub fn id(self) -> u8 {
        let base = match self.kind {
            SchemeKind::Baseline => 0,
            SchemeKind::Diff => 1,
            SchemeKind::Mask => 2,
        };
        base + if self.weighted { 3 } else { 0 }
    }

    pub fn from_id(id: u8) -> Option<Variant> {
        Variant::ALL.get(id as usize).copied()
    }

    /// Number of answer symbols each server returns.
    pub fn answer_len(self, m: usize) -> usize {
        match self.kind {
            SchemeKind::Diff => m.saturating_sub(1),
            _ => m,
        }
    }

    /// Number of query symbols each server receives.
    pub fn query_len(self, d: usize) -> usize {
        if self.weighted {
            2 * d
        } else {
            d
        }
    }

    pub fn name(self) -> String {
        let base = match self.kind {
            SchemeKind::Baseline => "baseline-pcr",
            SchemeKind::Diff => "diff-pcr",
            SchemeKind::Mask => "mask-pcr",
        };
        if self.weighted {
            format!("{base}+")
        } else {
            base.to_string()
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.name())
    }
}

fn default_l() -> u64 {
    1
}

fn default_d_min() -> u64 {
    1
}

fn default_scale() -> u64 {
    1
}

/// Public parameters agreed on by the user and every server.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub scheme: SchemeKind,
    #[serde(default)]
    pub weighted: bool,
    #[serde(rename = "q")]
    pub field: PrimeField,
    /// Largest feature value.
    pub r: u64,
    pub d: usize,
    pub m: usize,
    /// Largest weight; 1 for unweighted schemes.
    #[serde(default = "default_l")]
    pub l: u64,
    /// Evaluation points, one per server.
    #[serde(default)]
    pub alphas: Vec<u64>,
    /// Mask support is `{0, …, d_min − 1}`; ignored by non-mask schemes.
    #[serde(default = "default_d_min")]
    pub d_min: u64,
    /// Stored samples are scaled by this factor after a field expansion, so
    /// their entries lie in `[0 : R·sample_scale]` while user inputs stay in
    /// `[0 : R]`.
    #[serde(default = "default_scale")]
    pub sample_scale: u64,
    /// Known bound on attainable distances, replacing the worst case
    /// `L·d·(R·sample_scale)²`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_distance: Option<u64>,
}

impl SchemeConfig {
    /// Builds a configuration using the smallest admissible prime, the
    /// default evaluation points `1..=N` and `d_min = 1`.
    pub fn new(variant: Variant, r: u64, d: usize, m: usize, l: u64) -> Result<Self> {
        let l = if variant.weighted { l } else { 1 };
        let mut q = crate::field::min_field_size(r.max(1), d.max(1), l.max(1), variant.kind);
        // the default points 1..=N must be distinct and nonzero mod q
        if q <= variant.servers() as u64 {
            q = crate::field::next_prime_above(variant.servers() as u64);
        }
        let cfg = SchemeConfig {
            scheme: variant.kind,
            weighted: variant.weighted,
            field: PrimeField::new(q)?,
            r,
            d,
            m,
            l,
            alphas: (1..=variant.servers() as u64).collect(),
            d_min: 1,
            sample_scale: 1,
            max_distance: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_modulus(mut self, q: u64) -> Result<Self> {
        self.field = PrimeField::new(q)?;
        self.validate()?;
        Ok(self)
    }

    pub fn with_d_min(mut self, d_min: u64) -> Result<Self> {
        self.d_min = d_min;
        self.validate()?;
        Ok(self)
    }

    pub fn with_alphas(mut self, alphas: Vec<u64>) -> Result<Self> {
        self.alphas = alphas;
        self.validate()?;
        Ok(self)
    }

    pub fn variant(&self) -> Variant {
        Variant::new(self.scheme, self.weighted)
    }

    pub fn q(&self) -> u64 {
        self.field.modulus()
    }

    pub fn servers(&self) -> usize {
        self.variant().servers()
    }

    /// The largest attainable (weighted) squared distance, `R²Ld` unless
    /// overridden. Values in `[0, bound]` are the "non-negative half" for
    /// difference decoding.
    pub fn bound(&self) -> u64 {
        self.max_distance.unwrap_or_else(|| {
            distance_bound(self.r * self.sample_scale.max(1), self.d, self.l)
        })
    }

    /// Largest entry a stored sample may hold.
    pub fn sample_max(&self) -> u64 {
        self.r * self.sample_scale
    }

    pub fn answer_len(&self) -> usize {
        self.variant().answer_len(self.m)
    }

    pub fn vandermonde(&self) -> Result<VandermondeMatrix> {
        VandermondeMatrix::new(self.field, &self.alphas)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.r == 0 || self.d == 0 || self.m == 0 || self.l == 0 {
            return bad("R, d, M and L must all be at least 1".into());
        }
        if !self.weighted && self.l != 1 {
            return bad("L must be 1 for unweighted schemes".into());
        }
        if self.sample_scale == 0 {
            return bad("sample_scale must be at least 1".into());
        }
        let bound = match self.max_distance {
            Some(b) => b as u128,
            None => {
                let rs = self.r as u128 * self.sample_scale as u128;
                rs * rs * self.l as u128 * self.d as u128
            }
        };
        let required = if self.scheme == SchemeKind::Diff {
            2 * bound
        } else {
            bound
        };
        if self.q() as u128 <= required {
            return bad(format!(
                "q = {} must exceed {} for {}",
                self.q(),
                required,
                self.variant()
            ));
        }
        if self.scheme == SchemeKind::Diff && self.m < 2 {
            return bad("difference schemes need at least two samples".into());
        }
        let n = self.servers();
        if self.alphas.len() != n {
            return bad(format!(
                "{} needs {} evaluation points, got {}",
                self.variant(),
                n,
                self.alphas.len()
            ));
        }
        let reduced: Vec<u64> = self.alphas.iter().map(|&a| a % self.q()).collect();
        if reduced.contains(&0) {
            return bad("evaluation points must be nonzero".into());
        }
        for i in 0..n {
            if reduced[i + 1..].contains(&reduced[i]) {
                return bad("evaluation points must be distinct mod q".into());
            }
        }
        if self.d_min == 0 {
            return bad("d_min must be at least 1".into());
        }
        Ok(())
    }
}

/// Accepted samples `y_1..y_M`, each a vector over `[0:R]^d`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Database {
    samples: Vec<Vec<u64>>,
}

impl Database {
    pub fn new(samples: Vec<Vec<u64>>, r: u64) -> Result<Self> {
        let Some(first) = samples.first() else {
            return Err(Error::InvalidInput("database must hold at least one sample".into()));
        };
        let d = first.len();
        if d == 0 {
            return Err(Error::InvalidInput("samples must have at least one feature".into()));
        }
        for (i, y) in samples.iter().enumerate() {
            if y.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: y.len(),
                });
            }
            if let Some(v) = y.iter().find(|&&v| v > r) {
                return Err(Error::InvalidInput(format!(
                    "sample {} has entry {v} outside [0:{r}]",
                    i + 1
                )));
            }
        }
        Ok(Database { samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples[0].len()
    }

    pub fn samples(&self) -> &[Vec<u64>] {
        &self.samples
    }

    /// 0-based access.
    pub fn sample(&self, i: usize) -> &[u64] {
        &self.samples[i]
    }

    pub fn check_matches(&self, config: &SchemeConfig) -> Result<()> {
        if self.len() != config.m {
            return Err(Error::DimensionMismatch {
                expected: config.m,
                got: self.len(),
            });
        }
        if self.dim() != config.d {
            return Err(Error::DimensionMismatch {
                expected: config.d,
                got: self.dim(),
            });
        }
        let max = config.sample_max();
        if let Some(v) = self.samples.iter().flatten().find(|&&v| v > max) {
            return Err(Error::InvalidInput(format!("entry {v} exceeds {max}")));
        }
        Ok(())
    }
}

/// The user's sample `x` and, for weighted schemes, actionability weights.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UserInput {
    pub x: Vec<u64>,
    pub w: Option<Vec<u64>>,
}

impl UserInput {
    pub fn unweighted(x: Vec<u64>) -> Self {
        UserInput { x, w: None }
    }

    pub fn weighted(x: Vec<u64>, w: Vec<u64>) -> Self {
        UserInput { x, w: Some(w) }
    }

    pub fn validate(&self, config: &SchemeConfig) -> Result<()> {
        if self.x.len() != config.d {
            return Err(Error::DimensionMismatch {
                expected: config.d,
                got: self.x.len(),
            });
        }
        if let Some(v) = self.x.iter().find(|&&v| v > config.r) {
            return Err(Error::InvalidInput(format!(
                "feature value {v} outside [0:{}]",
                config.r
            )));
        }
        match (&self.w, config.weighted) {
            (None, false) => Ok(()),
            (Some(w), true) => {
                if w.len() != config.d {
                    return Err(Error::DimensionMismatch {
                        expected: config.d,
                        got: w.len(),
                    });
                }
                if let Some(v) = w.iter().find(|&&v| v == 0 || v > config.l) {
                    return Err(Error::InvalidInput(format!(
                        "weight {v} outside [1:{}]",
                        config.l
                    )));
                }
                Ok(())
            }
            (None, true) => Err(Error::InvalidInput("weighted scheme requires weights".into())),
            (Some(_), false) => Err(Error::InvalidInput(
                "weights supplied to an unweighted scheme".into(),
            )),
        }
    }

    /// Weights as used in distance computations (all ones when absent).
    pub fn weights_or_ones(&self) -> Vec<u64> {
        self.w.clone().unwrap_or_else(|| vec![1; self.x.len()])
    }
}

/// The user's private pads. `z1` pads `x`; `z2` pads `w` and is empty for
/// unweighted schemes. Never transmitted.
#[derive(Clone, Debug)]
pub struct ClientRandomness {
    z1: Vec<u64>,
    z2: Vec<u64>,
    issued: bool,
}

impl ClientRandomness {
    pub fn sample<R: RngCore + ?Sized>(config: &SchemeConfig, rng: &mut R) -> Self {
        let z1 = config.field.sample_uniform(config.d, rng);
        let z2 = if config.weighted {
            config.field.sample_uniform(config.d, rng)
        } else {
            Vec::new()
        };
        ClientRandomness {
            z1,
            z2,
            issued: false,
        }
    }

    /// Explicit pads, for enumeration and tests.
    pub fn from_parts(z1: Vec<u64>, z2: Vec<u64>) -> Self {
        ClientRandomness {
            z1,
            z2,
            issued: false,
        }
    }

    pub fn z1(&self) -> &[u64] {
        &self.z1
    }

    pub fn z2(&self) -> &[u64] {
        &self.z2
    }

    pub(crate) fn mark_issued(&mut self) -> Result<()> {
        if self.issued {
            return Err(Error::RandomnessReused);
        }
        self.issued = true;
        Ok(())
    }
}

pub type Seed = [u8; 32];
pub type SessionId = [u8; 16];

/// Randomness common to all servers and hidden from the user: the
/// interference pads `Z′₁`, `Z′₂` and the masks `μ`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ServerSharedRandomness {
    pub zprime1: Vec<u64>,
    pub zprime2: Vec<u64>,
    pub mu: Vec<u64>,
}

const SHARED_DOMAIN: &[u8] = b"pcr/shared-randomness/v1";

fn stream(seed: &Seed, session: &SessionId, label: &str) -> ChaCha20Rng {
    let mut h = Sha256::new();
    h.update(SHARED_DOMAIN);
    h.update([0u8]);
    h.update(label.as_bytes());
    h.update([0u8]);
    h.update(seed);
    h.update(session);
    let key: [u8; 32] = h.finalize().into();
    ChaCha20Rng::from_seed(key)
}

/// Uniform on `[0, n)` by rejection, `n ≥ 1`.
pub(crate) fn uniform_below<R: RngCore + ?Sized>(rng: &mut R, n: u64) -> u64 {
    let zone = u64::MAX - (u64::MAX % n);
    loop {
        let r = rng.next_u64();
        if r < zone {
            return r % n;
        }
    }
}

impl ServerSharedRandomness {
    /// Deterministically expands a shared seed into the session's streams.
    ///
    /// Each stream (`zprime1`, `zprime2`, `mu`) is an independent ChaCha20
    /// keystream keyed by `SHA-256(domain ‖ label ‖ seed ‖ session)`; element
    /// `i` is the `i`-th draw. Streams a variant does not use are left empty.
    pub fn expand(seed: &Seed, session: &SessionId, config: &SchemeConfig) -> Self {
        let len = config.answer_len();
        let field = config.field;
        let zprime1 = field.sample_uniform(len, &mut stream(seed, session, "zprime1"));
        let zprime2 = if config.weighted {
            field.sample_uniform(len, &mut stream(seed, session, "zprime2"))
        } else {
            Vec::new()
        };
        let mu = if config.scheme == SchemeKind::Mask {
            let mut rng = stream(seed, session, "mu");
            (0..len).map(|_| uniform_below(&mut rng, config.d_min)).collect()
        } else {
            Vec::new()
        };
        ServerSharedRandomness { zprime1, zprime2, mu }
    }

    /// All-zero pads and masks of the right shape.
    pub fn zero(config: &SchemeConfig) -> Self {
        let len = config.answer_len();
        ServerSharedRandomness {
            zprime1: vec![0; len],
            zprime2: if config.weighted { vec![0; len] } else { Vec::new() },
            mu: if config.scheme == SchemeKind::Mask {
                vec![0; len]
            } else {
                Vec::new()
            },
        }
    }

    pub(crate) fn check(&self, config: &SchemeConfig) -> Result<()> {
        let len = config.answer_len();
        let check_len = |v: &[u64]| {
            if v.len() != len {
                Err(Error::DimensionMismatch {
                    expected: len,
                    got: v.len(),
                })
            } else {
                Ok(())
            }
        };
        check_len(&self.zprime1)?;
        if config.weighted {
            check_len(&self.zprime2)?;
        }
        if config.scheme == SchemeKind::Mask {
            check_len(&self.mu)?;
        }
        Ok(())
    }
}

/// What server `n` receives.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ServerQuery {
    pub masked_x: Vec<u64>,
    pub masked_w: Option<Vec<u64>>,
}

impl ServerQuery {
    pub fn symbols(&self) -> usize {
        self.masked_x.len() + self.masked_w.as_ref().map_or(0, Vec::len)
    }

    /// Flattened wire layout: masked `x` then masked `w`.
    pub fn to_symbols(&self) -> Vec<u64> {
        let mut v = self.masked_x.clone();
        if let Some(w) = &self.masked_w {
            v.extend_from_slice(w);
        }
        v
    }

    pub fn from_symbols(symbols: &[u64], config: &SchemeConfig) -> Result<Self> {
        let expected = config.variant().query_len(config.d);
        if symbols.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: symbols.len(),
            });
        }
        let (x, w) = symbols.split_at(config.d);
        Ok(ServerQuery {
            masked_x: x.to_vec(),
            masked_w: config.weighted.then(|| w.to_vec()),
        })
    }
}

/// One query per server, index 0 ↦ server 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryBundle {
    pub per_server: Vec<ServerQuery>,
}

/// One answer vector per server, index 0 ↦ server 1, symbols ordered
/// `i = 1..M` (or `1..M−1`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnswerBundle {
    pub per_server: Vec<Vec<u64>>,
}

/// The per-index statistic the user learns beyond its own randomness.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "values", rename_all = "snake_case")]
pub enum Revealed {
    Distances(Vec<u64>),
    Differences(Vec<u64>),
    MaskedDistances(Vec<u64>),
}

impl Revealed {
    pub fn values(&self) -> &[u64] {
        match self {
            Revealed::Distances(v) | Revealed::Differences(v) | Revealed::MaskedDistances(v) => v,
        }
    }
}

/// Upload and download symbol counts, summed over servers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Cost {
    pub upload: u64,
    pub download: u64,
}

impl Cost {
    pub fn total(&self) -> u64 {
        self.upload + self.download
    }
}

pub fn cost_of(config: &SchemeConfig) -> Cost {
    let v = config.variant();
    let n = v.servers() as u64;
    Cost {
        upload: n * v.query_len(config.d) as u64,
        download: n * v.answer_len(config.m) as u64,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RetrievalResult {
    /// 1-based index of the nearest accepted sample.
    pub theta_star: usize,
    pub revealed: Revealed,
    pub cost: Cost,
    /// Two masked distances tie at the minimum; the smallest index was taken.
    pub mask_ambiguous: bool,
    /// The decoded statistics fall within the ranges honest servers can
    /// produce. A mismatch between server seeds shows up as `false`.
    pub consistent: bool,
}
