//! Arithmetic over a prime field `F_q`, Vandermonde solves, and field-size
//! selection.
//!
//! Elements are carried as raw `u64` canonical representatives inside the
//! protocol hot paths; [`FieldElement`] is the checked, self-describing form
//! used at API boundaries where operands of different moduli could meet.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::SchemeKind;

/// Largest modulus accepted. Products are formed in `u128` before reduction.
pub const MAX_MODULUS: u64 = 1 << 63;

/// A prime field `F_q`, `q < 2^63`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u64", into = "u64")]
pub struct PrimeField {
    q: u64,
}

impl TryFrom<u64> for PrimeField {
    type Error = Error;
    fn try_from(q: u64) -> Result<Self> {
        PrimeField::new(q)
    }
}

impl From<PrimeField> for u64 {
    fn from(f: PrimeField) -> u64 {
        f.q
    }
}

impl PrimeField {
    pub fn new(q: u64) -> Result<Self> {
        if q >= MAX_MODULUS {
            return Err(Error::ModulusTooLarge(q));
        }
        if !is_prime(q) {
            return Err(Error::NotPrime(q));
        }
        Ok(PrimeField { q })
    }

    #[inline]
    pub fn modulus(&self) -> u64 {
        self.q
    }

    #[inline]
    pub fn reduce(&self, v: u64) -> u64 {
        v % self.q
    }

    /// Maps a signed integer to its canonical representative.
    #[inline]
    pub fn from_i64(&self, v: i64) -> u64 {
        v.rem_euclid(self.q as i64) as u64
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        // a, b < 2^63 so the sum cannot overflow
        let c = a + b;
        if c >= self.q {
            c - self.q
        } else {
            c
        }
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.q - b
        }
    }

    #[inline]
    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.q - a
        }
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        ((a as u128 * b as u128) % self.q as u128) as u64
    }

    pub fn pow(&self, mut base: u64, mut exp: u64) -> u64 {
        let mut acc = 1 % self.q;
        base %= self.q;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative inverse via Fermat's little theorem.
    pub fn inv(&self, a: u64) -> Result<u64> {
        let a = a % self.q;
        if a == 0 {
            return Err(Error::InverseOfZero);
        }
        Ok(self.pow(a, self.q - 2))
    }

    pub fn element(&self, v: u64) -> FieldElement {
        FieldElement {
            value: v % self.q,
            modulus: self.q,
        }
    }

    /// Draws `n` i.i.d. uniform elements.
    ///
    /// Uses rejection sampling on 64-bit words so that the result carries no
    /// modulo bias; the accepted zone is the largest multiple of `q` below
    /// `2^64`.
    pub fn sample_uniform<R: RngCore + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<u64> {
        (0..n).map(|_| self.sample_one(rng)).collect()
    }

    pub fn sample_one<R: RngCore + ?Sized>(&self, rng: &mut R) -> u64 {
        let zone = u64::MAX - (u64::MAX % self.q);
        loop {
            let r = rng.next_u64();
            if r < zone {
                return r % self.q;
            }
        }
    }

    /// `Σ_j (a_j − b_j)²` over the field.
    pub fn sq_dist(&self, a: &[u64], b: &[u64]) -> u64 {
        a.iter().zip(b).fold(0, |acc, (&x, &y)| {
            let diff = self.sub(x, y);
            self.add(acc, self.mul(diff, diff))
        })
    }

    /// `Σ_j w_j (a_j − b_j)²` over the field.
    pub fn weighted_sq_dist(&self, a: &[u64], b: &[u64], w: &[u64]) -> u64 {
        a.iter()
            .zip(b)
            .zip(w)
            .fold(0, |acc, ((&x, &y), &wj)| {
                let diff = self.sub(x, y);
                self.add(acc, self.mul(wj, self.mul(diff, diff)))
            })
    }
}

/// A field element that remembers its modulus.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FieldElement {
    value: u64,
    modulus: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldOp {
    Add,
    Sub,
    Mul,
    /// `a · b⁻¹`
    InvMul,
}

impl FieldElement {
    pub fn new(value: u64, modulus: u64) -> Result<Self> {
        Ok(PrimeField::new(modulus)?.element(value))
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    fn field(&self) -> PrimeField {
        PrimeField { q: self.modulus }
    }

    pub fn inv(&self) -> Result<FieldElement> {
        let f = self.field();
        Ok(f.element(f.inv(self.value)?))
    }

    pub fn neg(&self) -> FieldElement {
        let f = self.field();
        f.element(f.neg(self.value))
    }
}

impl std::fmt::Display for FieldElement {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} (mod {})", self.value, self.modulus)
    }
}

pub fn field_op(a: FieldElement, b: FieldElement, kind: FieldOp) -> Result<FieldElement> {
    if a.modulus != b.modulus {
        return Err(Error::ModulusMismatch(a.modulus, b.modulus));
    }
    let f = a.field();
    let v = match kind {
        FieldOp::Add => f.add(a.value, b.value),
        FieldOp::Sub => f.sub(a.value, b.value),
        FieldOp::Mul => f.mul(a.value, b.value),
        FieldOp::InvMul => f.mul(a.value, f.inv(b.value)?),
    };
    Ok(f.element(v))
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Miller–Rabin with the first twelve prime bases, which is exact for every
/// 64-bit input.
pub fn is_prime(n: u64) -> bool {
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 2 {
        return false;
    }
    for &p in &BASES {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for &a in &BASES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Smallest prime strictly greater than `n`.
pub fn next_prime_above(n: u64) -> u64 {
    let mut c = n + 1;
    while !is_prime(c) {
        c += 1;
    }
    c
}

/// Largest possible squared weighted distance, `R²·L·d`.
pub fn distance_bound(r: u64, d: usize, l: u64) -> u64 {
    r * r * l * d as u64
}

/// Smallest admissible prime for a scheme: it must exceed `R²Ld` for the
/// baseline and masked schemes and `2R²Ld` for the difference scheme.
pub fn min_field_size(r: u64, d: usize, l: u64, kind: SchemeKind) -> u64 {
    let bound = distance_bound(r, d, l);
    match kind {
        SchemeKind::Baseline | SchemeKind::Mask => next_prime_above(bound),
        SchemeKind::Diff => next_prime_above(2 * bound),
    }
}

/// Square Vandermonde matrix `V(i, j) = α_i^j` (0-based `j`) with its inverse
/// precomputed, since every decode solves against the same points.
#[derive(Clone, Debug)]
pub struct VandermondeMatrix {
    field: PrimeField,
    points: Vec<u64>,
    entries: Vec<Vec<u64>>,
    inverse: Vec<Vec<u64>>,
}

impl VandermondeMatrix {
    pub fn new(field: PrimeField, points: &[u64]) -> Result<Self> {
        let points: Vec<u64> = points.iter().map(|&p| field.reduce(p)).collect();
        let n = points.len();
        if n == 0 {
            return Err(Error::DegeneratePoints);
        }
        for i in 0..n {
            for j in i + 1..n {
                if points[i] == points[j] {
                    return Err(Error::DegeneratePoints);
                }
            }
        }
        let entries: Vec<Vec<u64>> = points
            .iter()
            .map(|&a| (0..n as u64).map(|j| field.pow(a, j)).collect())
            .collect();
        let inverse = invert(field, &entries)?;
        Ok(VandermondeMatrix {
            field,
            points,
            entries,
            inverse,
        })
    }

    pub fn order(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[u64] {
        &self.points
    }

    pub fn entries(&self) -> &[Vec<u64>] {
        &self.entries
    }

    pub fn mul_vec(&self, c: &[u64]) -> Vec<u64> {
        mat_vec(self.field, &self.entries, c)
    }

    /// Returns the unique `c` with `V·c = rhs`.
    pub fn solve(&self, rhs: &[u64]) -> Result<Vec<u64>> {
        if rhs.len() != self.order() {
            return Err(Error::DimensionMismatch {
                expected: self.order(),
                got: rhs.len(),
            });
        }
        Ok(mat_vec(self.field, &self.inverse, rhs))
    }

    /// Only the constant coefficient of the solve; the decode path discards
    /// the rest.
    pub fn solve_constant(&self, rhs: &[u64]) -> u64 {
        self.inverse[0]
            .iter()
            .zip(rhs)
            .fold(0, |acc, (&a, &b)| self.field.add(acc, self.field.mul(a, b)))
    }
}

fn mat_vec(field: PrimeField, m: &[Vec<u64>], v: &[u64]) -> Vec<u64> {
    m.iter()
        .map(|row| {
            row.iter()
                .zip(v)
                .fold(0, |acc, (&a, &b)| field.add(acc, field.mul(a, b)))
        })
        .collect()
}

/// Gauss–Jordan inversion over `F_q`.
fn invert(field: PrimeField, m: &[Vec<u64>]) -> Result<Vec<Vec<u64>>> {
    let n = m.len();
    let mut aug: Vec<Vec<u64>> = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| u64::from(i == j)));
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .find(|&r| aug[r][col] != 0)
            .ok_or(Error::DegeneratePoints)?;
        aug.swap(col, pivot);
        let inv = field.inv(aug[col][col])?;
        for v in aug[col].iter_mut() {
            *v = field.mul(*v, inv);
        }
        for r in 0..n {
            if r != col && aug[r][col] != 0 {
                let factor = aug[r][col];
                let pivot_row = aug[col].clone();
                for (v, &p) in aug[r].iter_mut().zip(&pivot_row) {
                    *v = field.sub(*v, field.mul(factor, p));
                }
            }
        }
    }
    Ok(aug.into_iter().map(|row| row[n..].to_vec()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn f(q: u64) -> PrimeField {
        PrimeField::new(q).unwrap()
    }

    #[test]
    fn field_op_examples() {
        let a = FieldElement::new(3, 5).unwrap();
        let b = FieldElement::new(4, 5).unwrap();
        assert_eq!(field_op(a, b, FieldOp::Add).unwrap().value(), 2);
        assert_eq!(field_op(a, b, FieldOp::Sub).unwrap().value(), 4);
        // 3 * 4^{-1} = 3 * 4 = 12 = 2 (mod 5)
        assert_eq!(field_op(a, b, FieldOp::InvMul).unwrap().value(), 2);
    }

    #[test]
    fn inverse_of_three_mod_seven() {
        // brute force: the unique b with 3b = 1 (mod 7)
        let expected = (1..7).find(|b| (3 * b) % 7 == 1).unwrap();
        assert_eq!(expected, 5);
        assert_eq!(f(7).inv(3).unwrap(), expected);
    }

    #[test]
    fn mismatched_moduli_and_zero_inverse() {
        let a = FieldElement::new(1, 5).unwrap();
        let b = FieldElement::new(1, 7).unwrap();
        assert!(matches!(
            field_op(a, b, FieldOp::Add),
            Err(Error::ModulusMismatch(5, 7))
        ));
        let z = FieldElement::new(0, 5).unwrap();
        assert!(matches!(
            field_op(a, z, FieldOp::InvMul),
            Err(Error::InverseOfZero)
        ));
        assert!(z.inv().is_err());
    }

    #[test]
    fn rejects_composite_and_huge_moduli() {
        assert!(matches!(PrimeField::new(1), Err(Error::NotPrime(1))));
        assert!(matches!(PrimeField::new(91), Err(Error::NotPrime(91))));
        assert!(matches!(
            PrimeField::new(u64::MAX),
            Err(Error::ModulusTooLarge(_))
        ));
        // largest prime below 2^63
        assert!(PrimeField::new(9_223_372_036_854_775_783).is_ok());
    }

    #[test]
    fn group_axioms_exhaustive_small_fields() {
        for q in (2..=101).filter(|&q| is_prime(q)) {
            let fq = f(q);
            for a in 0..q {
                assert_eq!(fq.add(a, fq.neg(a)), 0);
                assert_eq!(fq.mul(a, 1), a);
                if a != 0 {
                    assert_eq!(fq.mul(a, fq.inv(a).unwrap()), 1);
                }
            }
        }
    }

    #[test]
    fn primality_matches_trial_division() {
        let trial = |n: u64| n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| !n.is_multiple_of(d));
        for n in 0..5000 {
            assert_eq!(is_prime(n), trial(n), "n = {n}");
        }
        // strong pseudoprimes to several small bases are composite
        assert!(!is_prime(3_215_031_751));
        assert!(!is_prime(3_825_123_056_546_413_051));
        assert!(is_prime(1_000_000_007));
        assert!(is_prime((1 << 61) - 1));
    }

    #[test]
    fn min_field_size_examples() {
        assert_eq!(min_field_size(3, 3, 1, SchemeKind::Baseline), 29);
        assert_eq!(min_field_size(3, 3, 1, SchemeKind::Mask), 29);
        assert_eq!(min_field_size(3, 3, 1, SchemeKind::Diff), 59);
        // bound 800; 809 is the next prime
        assert_eq!(min_field_size(20, 2, 1, SchemeKind::Baseline), 809);
        assert_eq!(min_field_size(3, 3, 1, SchemeKind::Baseline), next_prime_above(27));
    }

    #[test]
    fn vandermonde_examples() {
        let m = VandermondeMatrix::new(f(5), &[1, 2]).unwrap();
        assert_eq!(m.entries(), &[vec![1, 1], vec![1, 2]]);
        assert_eq!(m.mul_vec(&[2, 1]), vec![3, 4]);
        assert_eq!(m.solve(&[3, 4]).unwrap(), vec![2, 1]);
        assert_eq!(m.solve_constant(&[3, 4]), 2);

        let m3 = VandermondeMatrix::new(f(7), &[1, 2, 3]).unwrap();
        let rhs = m3.mul_vec(&[5, 0, 6]);
        // 5 + 0a + 6a^2 at a = 1, 2, 3 (mod 7)
        assert_eq!(rhs, vec![11 % 7, 29 % 7, 59 % 7]);
        assert_eq!(m3.solve(&rhs).unwrap(), vec![5, 0, 6]);
    }

    #[test]
    fn vandermonde_rejects_repeated_points_and_bad_rhs() {
        assert!(VandermondeMatrix::new(f(7), &[1, 8]).is_err());
        assert!(VandermondeMatrix::new(f(7), &[]).is_err());
        let m = VandermondeMatrix::new(f(7), &[1, 2]).unwrap();
        assert!(matches!(
            m.solve(&[1, 2, 3]),
            Err(Error::DimensionMismatch { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let fq = f(29);
        let a = fq.sample_uniform(64, &mut ChaCha20Rng::seed_from_u64(9));
        let b = fq.sample_uniform(64, &mut ChaCha20Rng::seed_from_u64(9));
        assert_eq!(a, b);
        assert!(a.iter().all(|&v| v < 29));
        assert!(fq.sample_uniform(0, &mut ChaCha20Rng::seed_from_u64(9)).is_empty());
    }

    #[test]
    fn sampling_passes_chi_square() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let fq = f(29);
        let mut rng = ChaCha20Rng::seed_from_u64(2024);
        let mut counts = [0u64; 29];
        let n = 1_000_000;
        for _ in 0..n {
            counts[fq.sample_one(&mut rng) as usize] += 1;
        }
        let expected = n as f64 / 29.0;
        let stat: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        let crit = ChiSquared::new(28.0).unwrap().inverse_cdf(0.99);
        assert!(stat < crit, "chi2 = {stat}, critical = {crit}");
    }

    proptest! {
        #[test]
        fn vandermonde_round_trip(a in 0u64..1_000_003, b in 0u64..1_000_003, c in 0u64..1_000_003) {
            let fq = f(1_000_003);
            let m2 = VandermondeMatrix::new(fq, &[1, 2]).unwrap();
            prop_assert_eq!(m2.solve(&m2.mul_vec(&[a, b])).unwrap(), vec![a, b]);
            let m3 = VandermondeMatrix::new(fq, &[1, 2, 3]).unwrap();
            prop_assert_eq!(m3.solve(&m3.mul_vec(&[a, b, c])).unwrap(), vec![a, b, c]);
        }

        #[test]
        fn min_field_size_is_tight(r in 1u64..40, d in 1usize..12, l in 1u64..5, diff in any::<bool>()) {
            let kind = if diff { SchemeKind::Diff } else { SchemeKind::Baseline };
            let bound = distance_bound(r, d, l) * if diff { 2 } else { 1 };
            let q = min_field_size(r, d, l, kind);
            prop_assert!(is_prime(q));
            prop_assert!(q > bound);
            prop_assert!(((bound + 1)..q).all(|c| !is_prime(c)));
        }
    }
}
