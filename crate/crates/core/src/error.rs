use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("modulus {0} is not prime")]
    NotPrime(u64),
    #[error("modulus {0} exceeds 63 bits")]
    ModulusTooLarge(u64),
    #[error("field elements belong to different moduli ({0} vs {1})")]
    ModulusMismatch(u64, u64),
    #[error("attempted to invert zero")]
    InverseOfZero,
    #[error("evaluation points must be pairwise distinct and nonzero count")]
    DegeneratePoints,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("client randomness already used for a query in this session")]
    RandomnessReused,
    #[error("rejected point {k} is equidistant from accepted samples {i} and {j}; no strict mask exists")]
    ZeroGap { k: usize, i: usize, j: usize },
    #[error("query point lies in the accepted database")]
    QueryInDatabase,
    #[error("field expansion rejected: {0}")]
    ExpansionRejected(String),
    #[error("enumeration budget exceeded: need {needed}, budget {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },
    #[error("empty pool: {0}")]
    EmptyPool(&'static str),
    #[error("malformed frame: {0}")]
    Malformed(String),
    #[error("server error code {0}")]
    Remote(u64),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
