//! Deployment file shared by every server and the client.
//!
//! ```json
//! {
//!   "scheme": { "scheme": "mask", "q": 809, "r": 20, "d": 2, "m": 2, "alphas": [1, 2], "d_min": 40 },
//!   "servers": ["127.0.0.1:7001", "127.0.0.1:7002"],
//!   "seed_hex": "…64 hex digits…",
//!   "database": "accepted.csv"
//! }
//! ```
//!
//! Servers read `database` and the seed (from `seed_hex` or the
//! `PCR_SEED_HEX` environment variable); the client only needs `scheme` and
//! `servers`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::read_integer_csv;
use crate::protocol::{Database, SchemeConfig, Seed};

pub const SEED_ENV: &str = "PCR_SEED_HEX";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Deployment {
    pub scheme: SchemeConfig,
    pub servers: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_hex: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub database: Option<PathBuf>,
}

pub fn parse_seed(text: &str) -> Result<Seed> {
    let bytes = hex::decode(text.trim())
        .map_err(|e| Error::InvalidConfig(format!("seed is not hex: {e}")))?;
    bytes
        .try_into()
        .map_err(|b: Vec<u8>| Error::InvalidConfig(format!("seed must be 32 bytes, got {}", b.len())))
}

impl Deployment {
    /// Reads and validates the file; relative database paths are resolved
    /// against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut dep: Deployment = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if let Some(db) = &dep.database {
            if db.is_relative() {
                dep.database = Some(path.parent().unwrap_or(Path::new(".")).join(db));
            }
        }
        dep.validate()?;
        Ok(dep)
    }

    pub fn validate(&self) -> Result<()> {
        self.scheme.validate()?;
        if self.servers.len() != self.scheme.servers() {
            return Err(Error::InvalidConfig(format!(
                "{} needs {} servers, file lists {}",
                self.scheme.variant(),
                self.scheme.servers(),
                self.servers.len()
            )));
        }
        Ok(())
    }

    /// `seed_hex`, else the environment variable.
    pub fn seed(&self) -> Result<Seed> {
        match &self.seed_hex {
            Some(s) => parse_seed(s),
            None => match std::env::var(SEED_ENV) {
                Ok(s) => parse_seed(&s),
                Err(_) => Err(Error::InvalidConfig(format!(
                    "no seed: set seed_hex or {SEED_ENV}"
                ))),
            },
        }
    }

    pub fn load_database(&self) -> Result<Database> {
        let path = self
            .database
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("no database path".into()))?;
        let db = Database::new(read_integer_csv(path)?, self.scheme.sample_max())?;
        db.check_matches(&self.scheme)?;
        Ok(db)
    }
}
