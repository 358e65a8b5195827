//! Arbitrary-precision number theory shared by the scheme, the attacks and
//! the lattice code: seeded randomness, Miller-Rabin, prime search, extended
//! Euclid and modular inverses.

use std::sync::OnceLock;

use num_bigint::{BigInt, BigUint, RandBigInt, Sign};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Error as RandError, RngCore, SeedableRng};
use rand_chacha::{ChaCha20Rng, ChaCha8Rng};
use thiserror::Error;

/// Witnesses that make Miller-Rabin exact for every n < 2^64.
const DETERMINISTIC_WITNESSES: [u32; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Round count used by the prime generators.
pub const DEFAULT_MR_ROUNDS: u32 = 40;

const SIEVE_PRIME_LIMIT: u32 = 1 << 24;
const SIEVE_WINDOW: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NumTheoryError {
    #[error("{a} has no inverse modulo {m}")]
    NotInvertible { a: BigInt, m: BigInt },
    #[error("modulus must be at least 2")]
    InvalidModulus,
    #[error("prime search gave up after {candidates} candidates")]
    PrimeSearchExhausted { candidates: u64 },
    #[error("prime size of {0} bits is below the minimum of 3")]
    InvalidBitLength(u64),
    #[error("empty range for prime search")]
    EmptyRange,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RandomMode {
    SeededDeterministic,
    SystemEntropy,
}

/// Explicit randomness handle. Every randomized operation in the crate takes
/// one of these; nothing reads global RNG state.
///
/// Seeded sources are ChaCha20 streams, so equal seeds give identical output
/// on every platform.
#[derive(Debug, Clone)]
pub struct RandomSource {
    seed: Option<u64>,
    rng: ChaCha20Rng,
}

impl RandomSource {
    pub fn seeded(seed: u64) -> Self {
        Self {
            seed: Some(seed),
            rng: ChaCha20Rng::seed_from_u64(seed),
        }
    }

    pub fn from_entropy() -> Self {
        Self {
            seed: None,
            rng: ChaCha20Rng::from_entropy(),
        }
    }

    /// Seeded when `seed` is given, system entropy otherwise.
    pub fn from_optional_seed(seed: Option<u64>) -> Self {
        seed.map_or_else(Self::from_entropy, Self::seeded)
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn mode(&self) -> RandomMode {
        match self.seed {
            Some(_) => RandomMode::SeededDeterministic,
            None => RandomMode::SystemEntropy,
        }
    }

    /// Uniform integer in the inclusive range `[lo, hi]`.
    ///
    /// Panics if `lo > hi`.
    pub fn uniform_inclusive(&mut self, lo: &BigUint, hi: &BigUint) -> BigUint {
        assert!(lo <= hi, "empty range");
        let upper = hi + 1u32;
        self.rng.gen_biguint_range(lo, &upper)
    }

    /// Uniform integer with exactly `bits` bits: `[2^(bits-1), 2^bits - 1]`.
    pub fn uniform_bits(&mut self, bits: u64) -> BigUint {
        assert!(bits >= 1);
        let lo = BigUint::one() << (bits - 1);
        let hi = (BigUint::one() << bits) - 1u32;
        self.uniform_inclusive(&lo, &hi)
    }

    pub fn next_u64_value(&mut self) -> u64 {
        self.rng.next_u64()
    }
}

impl RngCore for RandomSource {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), RandError> {
        self.rng.try_fill_bytes(dest)
    }
}

/// Primes below 2^24, computed once.
pub(crate) fn small_primes() -> &'static [u32] {
    static PRIMES: OnceLock<Vec<u32>> = OnceLock::new();
    PRIMES.get_or_init(|| primes_below(SIEVE_PRIME_LIMIT))
}

/// All primes strictly below `limit` (Eratosthenes).
pub fn primes_below(limit: u32) -> Vec<u32> {
    let limit = limit as usize;
    if limit < 3 {
        return Vec::new();
    }
    let mut composite = vec![false; limit];
    let mut out = Vec::new();
    for i in 2..limit {
        if composite[i] {
            continue;
        }
        out.push(i as u32);
        let mut j = i * i;
        while j < limit {
            composite[j] = true;
            j += i;
        }
    }
    out
}

fn rem_u32(n: &BigUint, m: u32) -> u32 {
    let m = u64::from(m);
    n.iter_u32_digits()
        .rev()
        .fold(0u64, |r, d| ((r << 32) | u64::from(d)) % m) as u32
}

/// Miller-Rabin primality test.
///
/// Below 2^64 the answer is exact (fixed witness set). Above it, base 2 is
/// tried first followed by `rounds - 1` further bases drawn from a stream
/// keyed on `n`, so repeated calls agree.
pub fn is_probable_prime(n: &BigUint, rounds: u32) -> bool {
    let rounds = rounds.max(1);
    if n < &BigUint::from(2u32) {
        return false;
    }
    for &p in &DETERMINISTIC_WITNESSES {
        if n == &BigUint::from(p) {
            return true;
        }
        if rem_u32(n, p) == 0 {
            return false;
        }
    }
    let bases: Vec<BigUint> = if n.bits() <= 64 {
        DETERMINISTIC_WITNESSES
            .iter()
            .map(|&a| BigUint::from(a))
            .collect()
    } else {
        let low = n.iter_u64_digits().next().unwrap_or(0);
        let mut stream = ChaCha8Rng::seed_from_u64(low ^ 0x9e37_79b9_7f4a_7c15 ^ n.bits());
        let (lo, hi) = (BigUint::from(3u32), n - 2u32);
        std::iter::once(BigUint::from(2u32))
            .chain((1..rounds).map(|_| stream.gen_biguint_range(&lo, &hi)))
            .collect()
    };
    miller_rabin::all_pass(n, &bases)
}

/// Strong-probable-prime checks for odd `n > 37`, stopping at the first
/// failing base. The `gmp` feature runs the exponentiations in GMP.
#[cfg(not(feature = "gmp"))]
mod miller_rabin {
    use num_bigint::BigUint;
    use num_traits::One;

    pub(super) fn all_pass(n: &BigUint, bases: &[BigUint]) -> bool {
        let n_minus_1 = n - 1u32;
        let s = n_minus_1.trailing_zeros().unwrap_or(0);
        let d = &n_minus_1 >> s;
        bases.iter().all(|a| {
            let mut x = a.modpow(&d, n);
            if x.is_one() || x == n_minus_1 {
                return true;
            }
            for _ in 1..s {
                x = (&x * &x) % n;
                if x == n_minus_1 {
                    return true;
                }
                if x.is_one() {
                    return false;
                }
            }
            false
        })
    }
}

#[cfg(feature = "gmp")]
mod miller_rabin {
    use num_bigint::BigUint;
    use rug::integer::Order;
    use rug::Integer;

    fn to_gmp(v: &BigUint) -> Integer {
        Integer::from_digits(&v.to_u64_digits(), Order::Lsf)
    }

    pub(super) fn all_pass(n: &BigUint, bases: &[BigUint]) -> bool {
        let n = to_gmp(n);
        let n_minus_1 = Integer::from(&n - 1u32);
        let s = n_minus_1.find_one(0).unwrap_or(0);
        let d = Integer::from(&n_minus_1 >> s);
        bases.iter().all(|a| {
            let mut x = match to_gmp(a).pow_mod(&d, &n) {
                Ok(x) => x,
                Err(_) => return false,
            };
            if x == 1u32 || x == n_minus_1 {
                return true;
            }
            for _ in 1..s {
                x.square_mut();
                x %= &n;
                if x == n_minus_1 {
                    return true;
                }
                if x == 1u32 {
                    return false;
                }
            }
            false
        })
    }
}

/// Random prime with exactly `bits` bits.
pub fn random_prime(bits: u64, rng: &mut RandomSource) -> Result<BigUint, NumTheoryError> {
    if bits < 3 {
        return Err(NumTheoryError::InvalidBitLength(bits));
    }
    let lo = BigUint::one() << (bits - 1);
    let hi = (BigUint::one() << bits) - 1u32;
    random_prime_in_range(&lo, &hi, rng)
}

/// Random prime in the inclusive range `[lo, hi]`.
///
/// A uniformly drawn odd start (low bit forced) is walked upward, wrapping at
/// `hi`, until a probable prime appears. Large candidates are first screened
/// by a windowed sieve over odd primes (up to 2^24, scaled down for
/// small sizes). Gives up after
/// `100 * bits(hi)` candidates.
pub fn random_prime_in_range(
    lo: &BigUint,
    hi: &BigUint,
    rng: &mut RandomSource,
) -> Result<BigUint, NumTheoryError> {
    if lo > hi {
        return Err(NumTheoryError::EmptyRange);
    }
    if hi < &BigUint::from(3u32) {
        return Err(NumTheoryError::EmptyRange);
    }
    let budget = 100 * hi.bits();

    let first_odd = if lo.is_odd() { lo.clone() } else { lo + 1u32 };
    if &first_odd > hi {
        return Err(NumTheoryError::PrimeSearchExhausted { candidates: 0 });
    }
    let mut start = rng.uniform_inclusive(lo, hi);
    start |= BigUint::one();
    if &start > hi {
        start = first_odd.clone();
    }

    let sieve_primes: &[u32] = if hi.bits() > 64 {
        let cap = sieve_limit_for(hi.bits());
        let primes = &small_primes()[1..];
        let end = primes.partition_point(|&p| p < cap && BigUint::from(p) < *lo);
        &primes[..end]
    } else {
        &[]
    };

    let mut examined = 0u64;
    let mut window = SieveWindow::new(start, sieve_primes);
    loop {
        for i in 0..SIEVE_WINDOW {
            let candidate = &window.base + BigUint::from(2 * i as u64);
            if &candidate > hi {
                window = SieveWindow::new(first_odd.clone(), sieve_primes);
                break;
            }
            examined += 1;
            if examined > budget {
                return Err(NumTheoryError::PrimeSearchExhausted {
                    candidates: examined - 1,
                });
            }
            if !window.composite[i] && is_probable_prime(&candidate, DEFAULT_MR_ROUNDS) {
                return Ok(candidate);
            }
            if i == SIEVE_WINDOW - 1 {
                window.advance();
            }
        }
    }
}

/// Marks which of `base, base + 2, ..., base + 2(W-1)` have a factor among
/// the sieve primes. Residues of `base` are kept so advancing is cheap.
struct SieveWindow<'a> {
    base: BigUint,
    primes: &'a [u32],
    residues: Vec<u32>,
    composite: Vec<bool>,
}

impl<'a> SieveWindow<'a> {
    fn new(base: BigUint, primes: &'a [u32]) -> Self {
        let residues = primes.iter().map(|&p| rem_u32(&base, p)).collect();
        let mut window = Self {
            base,
            primes,
            residues,
            composite: vec![false; SIEVE_WINDOW],
        };
        window.mark();
        window
    }

    fn mark(&mut self) {
        self.composite.iter_mut().for_each(|c| *c = false);
        for (&p, &r) in self.primes.iter().zip(&self.residues) {
            let p64 = u64::from(p);
            // base + 2i ≡ 0 (mod p)  <=>  i ≡ (p - r) * 2^{-1} (mod p)
            let inv2 = p64.div_ceil(2);
            let mut i = ((p64 - u64::from(r)) % p64 * inv2 % p64) as usize;
            while i < SIEVE_WINDOW {
                self.composite[i] = true;
                i += p as usize;
            }
        }
    }

    fn advance(&mut self) {
        let step = 2 * SIEVE_WINDOW as u64;
        self.base += step;
        for (r, &p) in self.residues.iter_mut().zip(self.primes) {
            *r = ((u64::from(*r) + step) % u64::from(p)) as u32;
        }
        self.mark();
    }
}

fn sieve_limit_for(bits: u64) -> u32 {
    let scaled = bits.saturating_mul(bits).saturating_mul(8);
    scaled.clamp(1 << 10, u64::from(SIEVE_PRIME_LIMIT)) as u32
}

/// Extended Euclid: returns `(g, s, t)` with `g = gcd(a, b) >= 0` and
/// `s*a + t*b = g`. For `a = b = 0` this returns `(0, 0, 0)`.
pub fn ext_gcd(a: &BigInt, b: &BigInt) -> (BigInt, BigInt, BigInt) {
    let (mut old_r, mut r) = (a.clone(), b.clone());
    let (mut old_s, mut s) = (BigInt::one(), BigInt::zero());
    let (mut old_t, mut t) = (BigInt::zero(), BigInt::one());
    while !r.is_zero() {
        let q = old_r.div_floor(&r);
        let next_r = &old_r - &q * &r;
        old_r = std::mem::replace(&mut r, next_r);
        let next_s = &old_s - &q * &s;
        old_s = std::mem::replace(&mut s, next_s);
        let next_t = &old_t - &q * &t;
        old_t = std::mem::replace(&mut t, next_t);
    }
    if old_r.sign() == Sign::Minus {
        (-old_r, -old_s, -old_t)
    } else {
        (old_r, old_s, old_t)
    }
}

/// Inverse of `a` modulo `m`, in `[1, m-1]`.
pub fn mod_inverse(a: &BigInt, m: &BigInt) -> Result<BigInt, NumTheoryError> {
    if m < &BigInt::from(2) {
        return Err(NumTheoryError::InvalidModulus);
    }
    let reduced = a.mod_floor(m);
    let (g, s, _) = ext_gcd(&reduced, m);
    if !g.is_one() {
        return Err(NumTheoryError::NotInvertible {
            a: a.clone(),
            m: m.clone(),
        });
    }
    Ok(s.mod_floor(m))
}

/// [`mod_inverse`] on unsigned operands.
pub fn mod_inverse_uint(a: &BigUint, m: &BigUint) -> Result<BigUint, NumTheoryError> {
    mod_inverse(&BigInt::from(a.clone()), &BigInt::from(m.clone()))
        .map(|x| x.to_biguint().expect("inverse is non-negative"))
}

/// `floor(a / b)` for signed integers and positive `b`.
pub fn floor_div(a: &BigInt, b: &BigInt) -> BigInt {
    a.div_floor(b)
}

/// `ceil(a / b)` for signed integers and positive `b`.
pub fn ceil_div(a: &BigInt, b: &BigInt) -> BigInt {
    -((-a).div_floor(b))
}

/// `2^bits` as a signed integer.
pub fn pow2(bits: u64) -> BigInt {
    BigInt::one() << bits
}

/// True when `x` lies in `[2^(bits-1), 2^bits - 1]`.
pub fn has_exact_bits(x: &BigInt, bits: u64) -> bool {
    x.sign() == Sign::Plus && x.bits() == bits
}

/// Lossy conversion used by reports and the benchmark.
pub fn approx_log2(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 52 {
        return x.to_f64().unwrap_or(0.0).log2();
    }
    let shift = bits - 52;
    let top = (x >> shift).to_f64().unwrap_or(0.0);
    top.log2() + shift as f64
}
