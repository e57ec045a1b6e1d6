//! Fixtures shared by the criterion benches.

use pcr_core::{Database, SchemeConfig, SchemeKind, UserInput, Variant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// A random database and user input for the given shape.
pub fn instance(
    kind: SchemeKind,
    weighted: bool,
    r: u64,
    d: usize,
    m: usize,
    l: u64,
    seed: u64,
) -> (SchemeConfig, Database, UserInput) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let config = SchemeConfig::new(Variant::new(kind, weighted), r, d, m, l).expect("valid shape");
    let samples = (0..m)
        .map(|_| (0..d).map(|_| rng.random_range(0..=r)).collect())
        .collect();
    let db = Database::new(samples, r).expect("entries in range");
    let x = (0..d).map(|_| rng.random_range(0..=r)).collect();
    let input = if weighted {
        UserInput::weighted(x, (0..d).map(|_| rng.random_range(1..=l)).collect())
    } else {
        UserInput::unweighted(x)
    };
    (config, db, input)
}
