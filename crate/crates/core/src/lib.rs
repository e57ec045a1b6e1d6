//! Private counterfactual retrieval.
//!
//! A user holding a rejected sample `x` learns the index of the nearest
//! accepted sample in a database replicated across non-colluding servers,
//! without any single server learning anything about `x` (or the user's
//! actionability weights). Servers pad every answer so the user sees only a
//! chosen statistic: all distances, consecutive distance differences, or
//! masked distances.
//!
//! Modules:
//! * [`field`]: prime-field arithmetic and Vandermonde solves.
//! * [`protocol`]: configuration, database, randomness, queries and answers.
//! * [`schemes`]: the six query/answer/decode protocols.
//! * [`mask`]: mask-gap preprocessing and field expansion.
//! * [`leakage`]: database leakage as conditional mutual information.
//! * [`experiments`]: data ingestion, quantization and experiment drivers.
//! * [`transport`]: wire format, TCP servers and the retrieval client.

pub mod error;
pub mod experiments;
pub mod field;
pub mod leakage;
pub mod mask;
pub mod protocol;
pub mod schemes;
pub mod transport;

pub use error::{Error, Result};
pub use field::{FieldElement, PrimeField, VandermondeMatrix};
pub use protocol::{
    cost_of, AnswerBundle, ClientRandomness, Cost, Database, QueryBundle, RetrievalResult,
    Revealed, SchemeConfig, SchemeKind, ServerQuery, ServerSharedRandomness, UserInput, Variant,
};
pub use schemes::{decode, gen_query, ClientSession};
