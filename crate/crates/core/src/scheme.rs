//! Key generation, encryption and decryption.
//!
//! Keys are built from two n-bit primes `p > 2^(n-1) + 2^(n-2)` and `q`, an
//! odd n-bit `k1`, `k2 = (q - k1) / 2` and a 2n-bit `u`:
//!
//! ```text
//! e1 = u + p(k1 + k2)        e2 = u - p*k2        e1 - e2 = p*q
//! ```
//!
//! A message `M` in `(2^(n-1), 2^(n-1) + 2^(n-2))` is encrypted with a fresh
//! 3n-bit `X` and `Y = X - M` as `C = X*e1 - Y*e2`. Since `e1 ≡ e2 ≡ u (mod p)`
//! we get `C ≡ M*u (mod p)`, and `M = C*d mod p` with `d = u^{-1} mod p`. No
//! wrap happens because `M < p`.
//!
//! The scheme is linear in `X` and `M` and therefore malleable; nothing here
//! tries to hide that.

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{CheckedSub, One, Zero};
use thiserror::Error;

use crate::numtheory::{
    is_probable_prime, mod_inverse_uint, random_prime_in_range, NumTheoryError, RandomSource,
    DEFAULT_MR_ROUNDS,
};

/// Smallest supported security parameter.
pub const MIN_BITS: u64 = 8;

/// (k1, u) draws tried for one (p, q) pair before the primes are redrawn.
const RESAMPLE_ATTEMPTS: usize = 1000;
/// Prime pairs tried before giving up.
const PRIME_PAIR_ATTEMPTS: usize = 8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SchemeError {
    #[error("security parameter n = {0} is below the minimum of {MIN_BITS}")]
    InvalidSecurityParameter(u64),
    #[error("could not satisfy key constraints after {0} attempts")]
    ResamplingExhausted(usize),
    #[error("invalid key material: {0}")]
    InvalidKeyMaterial(&'static str),
    #[error("message is outside the plaintext window for n = {n}")]
    MessageOutOfRange { n: u64 },
    #[error("key is for n = {key}, message is for n = {message}")]
    ParameterMismatch { key: u64, message: u64 },
    #[error("nonce must be positive")]
    InvalidNonce,
    #[error("decrypted value is outside the plaintext window")]
    PlaintextOutOfRange,
    #[error("payload of {len} bytes exceeds the {max}-byte limit for n = {n}")]
    PayloadTooLarge { len: usize, max: usize, n: u64 },
    #[error("plaintext has no valid length sentinel")]
    MalformedPlaintext,
    #[error(transparent)]
    NumTheory(#[from] NumTheoryError),
}

pub type Result<T> = std::result::Result<T, SchemeError>;

fn pow2(bits: u64) -> BigUint {
    BigUint::one() << bits
}

/// Full generation record. Only the test and attack harness should see this.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyMaterial {
    pub n: u64,
    pub p: BigUint,
    pub q: BigUint,
    pub k1: BigUint,
    pub k2: BigInt,
    pub u: BigUint,
    pub v: BigUint,
    pub d: BigUint,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicKey {
    pub n: u64,
    pub e1: BigUint,
    pub e2: BigUint,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrivateKey {
    pub n: u64,
    pub p: BigUint,
    pub d: BigUint,
}

/// Message integer inside the open window `(2^(n-1), 2^(n-1) + 2^(n-2))`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plaintext {
    value: BigUint,
    n: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Ciphertext(pub BigUint);

/// The per-encryption secret pair `(X, Y = X - M)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncryptionNonce {
    pub x: BigUint,
    pub y: BigInt,
}

/// Exclusive bounds of the plaintext window for `n`.
pub fn plaintext_window(n: u64) -> (BigUint, BigUint) {
    let low = pow2(n - 1);
    let high = &low + pow2(n - 2);
    (low, high)
}

pub fn in_plaintext_window(m: &BigUint, n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let (low, high) = plaintext_window(n);
    m > &low && m < &high
}

impl Plaintext {
    pub fn new(value: BigUint, n: u64) -> Result<Self> {
        if n < MIN_BITS || !in_plaintext_window(&value, n) {
            return Err(SchemeError::MessageOutOfRange { n });
        }
        Ok(Self { value, n })
    }

    pub fn value(&self) -> &BigUint {
        &self.value
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Uniform message from the open plaintext window.
    pub fn random(n: u64, rng: &mut RandomSource) -> Result<Self> {
        if n < MIN_BITS {
            return Err(SchemeError::InvalidSecurityParameter(n));
        }
        let (low, high) = plaintext_window(n);
        let value = rng.uniform_inclusive(&(low + 1u32), &(high - 1u32));
        Self::new(value, n)
    }
}

impl Ciphertext {
    pub fn value(&self) -> &BigUint {
        &self.0
    }
}

impl KeyMaterial {
    /// Builds key material from chosen secrets, bypassing sampling. Validates
    /// the generation constraints but not the 2n-bit size of `e1`/`e2`, which
    /// only the random generator enforces.
    pub fn from_parts(n: u64, p: BigUint, q: BigUint, k1: BigUint, u: BigUint) -> Result<Self> {
        if n < MIN_BITS {
            return Err(SchemeError::InvalidSecurityParameter(n));
        }
        let n_bits = |x: &BigUint| x.bits() == n;
        if !n_bits(&p) || !n_bits(&q) {
            return Err(SchemeError::InvalidKeyMaterial(
                "p and q must have exactly n bits",
            ));
        }
        if p <= pow2(n - 1) + pow2(n - 2) {
            return Err(SchemeError::InvalidKeyMaterial(
                "p must exceed 2^(n-1) + 2^(n-2)",
            ));
        }
        if !is_probable_prime(&p, DEFAULT_MR_ROUNDS) || !is_probable_prime(&q, DEFAULT_MR_ROUNDS) {
            return Err(SchemeError::InvalidKeyMaterial("p and q must be prime"));
        }
        if !n_bits(&k1) || k1.is_even() {
            return Err(SchemeError::InvalidKeyMaterial(
                "k1 must be an odd n-bit integer",
            ));
        }
        if u.bits() != 2 * n {
            return Err(SchemeError::InvalidKeyMaterial(
                "u must have exactly 2n bits",
            ));
        }
        let v = &u % &p;
        if v.is_zero() {
            return Err(SchemeError::InvalidKeyMaterial(
                "u must not be divisible by p",
            ));
        }
        // q and k1 are both odd, so the halving is exact.
        let k2 = (BigInt::from(q.clone()) - BigInt::from(k1.clone())) / 2;
        let d = mod_inverse_uint(&v, &p)?;
        Ok(Self {
            n,
            p,
            q,
            k1,
            k2,
            u,
            v,
            d,
        })
    }

    pub fn public_key(&self) -> PublicKey {
        let p = BigInt::from(self.p.clone());
        let u = BigInt::from(self.u.clone());
        let k1 = BigInt::from(self.k1.clone());
        let e1 = &u + &p * (k1 + &self.k2);
        let e2 = &u - &p * &self.k2;
        PublicKey {
            n: self.n,
            e1: e1.to_biguint().expect("e1 is positive"),
            e2: e2.to_biguint().expect("e2 is positive"),
        }
    }

    pub fn private_key(&self) -> PrivateKey {
        PrivateKey {
            n: self.n,
            p: self.p.clone(),
            d: self.d.clone(),
        }
    }
}

/// Generates a key whose `e1` and `e2` both have exactly 2n bits.
///
/// Because `e1 - e2 = pq` must then fit below `2^(2n-1)`, `q` is drawn from
/// `[2^(n-1), (2^(2n-1) - 1) / p]`. For fixed primes, `k1` is accepted with
/// probability proportional to the number of `u` values that keep both
/// public values in range, and `u` is then uniform over that set. That is the
/// same distribution as redrawing `(k1, u)` until the sizes fit, with far
/// fewer draws.
pub fn generate_keys(n: u64, rng: &mut RandomSource) -> Result<KeyMaterial> {
    if n < MIN_BITS {
        return Err(SchemeError::InvalidSecurityParameter(n));
    }
    let p_lo = pow2(n - 1) + pow2(n - 2) + 1u32;
    let n_max = pow2(n) - 1u32;
    let q_lo = pow2(n - 1);
    let e_lo = pow2(2 * n - 1);
    let e_hi = pow2(2 * n) - 1u32;

    let mut attempts = 0;
    for _ in 0..PRIME_PAIR_ATTEMPTS {
        let p = match random_prime_in_range(&p_lo, &n_max, rng) {
            Ok(p) => p,
            Err(_) => continue,
        };
        let q_hi = ((&e_lo - 1u32) / &p).min(n_max.clone());
        let q = match random_prime_in_range(&q_lo, &q_hi, rng) {
            Ok(q) => q,
            Err(_) => continue,
        };
        let pq = &p * &q;
        // Number of admissible e2 values, i.e. the u-interval length at k2 = 0.
        let max_len = &e_lo - &pq;
        let pi = BigInt::from(p.clone());
        let qi = BigInt::from(q.clone());

        for _ in 0..RESAMPLE_ATTEMPTS {
            attempts += 1;
            let k1 = rng.uniform_bits(n) | BigUint::one();
            let k2 = (&qi - BigInt::from(k1.clone())) / 2;
            let shift: BigInt = &pi * &k2;
            let (u_lo, u_hi) = match shift.sign() {
                Sign::Minus => {
                    let down = shift.magnitude();
                    if &pq + down > e_lo {
                        continue;
                    }
                    (e_lo.clone(), &e_hi - &pq - down)
                }
                _ => {
                    let up = shift.magnitude();
                    if &pq + up > e_lo {
                        continue;
                    }
                    (&e_lo + up, &e_hi - &pq + up)
                }
            };
            if u_lo > u_hi {
                continue;
            }
            let len = &u_hi - &u_lo + 1u32;
            let r = rng.uniform_inclusive(&BigUint::zero(), &(&max_len - 1u32));
            if r >= len {
                continue;
            }
            let u = rng.uniform_inclusive(&u_lo, &u_hi);
            if (&u % &p).is_zero() {
                continue;
            }
            let material = KeyMaterial::from_parts(n, p.clone(), q.clone(), k1, u)?;
            let pk = material.public_key();
            debug_assert_eq!(pk.e1.bits(), 2 * n);
            debug_assert_eq!(pk.e2.bits(), 2 * n);
            if !pk.e1.gcd(&pk.e2).is_one() {
                continue;
            }
            return Ok(material);
        }
    }
    Err(SchemeError::ResamplingExhausted(attempts))
}

/// Largest payload, in bytes, that [`encode`] accepts for `n`.
pub fn max_payload_len(n: u64) -> usize {
    (n.saturating_sub(3) / 8) as usize
}

/// Maps bytes into the plaintext window as
/// `M = 2^(n-1) + 2^(8*len) + int(payload)`.
pub fn encode(payload: &[u8], n: u64) -> Result<Plaintext> {
    if n < MIN_BITS {
        return Err(SchemeError::InvalidSecurityParameter(n));
    }
    let max = max_payload_len(n);
    if payload.len() > max {
        return Err(SchemeError::PayloadTooLarge {
            len: payload.len(),
            max,
            n,
        });
    }
    let body = pow2(8 * payload.len() as u64) + BigUint::from_bytes_be(payload);
    Plaintext::new(pow2(n - 1) + body, n)
}

pub fn decode(m: &Plaintext) -> Result<Vec<u8>> {
    let n = m.n();
    let body = m
        .value()
        .checked_sub(&pow2(n - 1))
        .ok_or(SchemeError::MalformedPlaintext)?;
    if body.is_zero() {
        return Err(SchemeError::MalformedPlaintext);
    }
    let sentinel = body.bits() - 1;
    if sentinel % 8 != 0 {
        return Err(SchemeError::MalformedPlaintext);
    }
    let len = (sentinel / 8) as usize;
    if len > max_payload_len(n) {
        return Err(SchemeError::MalformedPlaintext);
    }
    let payload = body - pow2(sentinel);
    let digits = if payload.is_zero() {
        Vec::new()
    } else {
        payload.to_bytes_be()
    };
    let mut out = vec![0u8; len - digits.len()];
    out.extend_from_slice(&digits);
    Ok(out)
}

/// `C = X*e1 - Y*e2` for a given nonce. Accepts any positive `X`; used by
/// golden vectors and the attack experiments.
pub fn encrypt_with_nonce(
    pk: &PublicKey,
    m: &Plaintext,
    x: &BigUint,
) -> Result<(Ciphertext, EncryptionNonce)> {
    if m.n() != pk.n {
        return Err(SchemeError::ParameterMismatch {
            key: pk.n,
            message: m.n(),
        });
    }
    if x.is_zero() {
        return Err(SchemeError::InvalidNonce);
    }
    let xi = BigInt::from(x.clone());
    let y = &xi - BigInt::from(m.value().clone());
    let c = &xi * BigInt::from(pk.e1.clone()) - &y * BigInt::from(pk.e2.clone());
    let c = c.to_biguint().ok_or(SchemeError::InvalidNonce)?;
    Ok((Ciphertext(c), EncryptionNonce { x: x.clone(), y }))
}

/// Encrypts and hands back the nonce. For white-box experiments only; the
/// nonce must never travel with the ciphertext.
pub fn encrypt_revealing_nonce(
    pk: &PublicKey,
    m: &Plaintext,
    rng: &mut RandomSource,
) -> Result<(Ciphertext, EncryptionNonce)> {
    if m.n() != pk.n {
        return Err(SchemeError::ParameterMismatch {
            key: pk.n,
            message: m.n(),
        });
    }
    let x = rng.uniform_bits(3 * pk.n);
    encrypt_with_nonce(pk, m, &x)
}

pub fn encrypt(pk: &PublicKey, m: &Plaintext, rng: &mut RandomSource) -> Result<Ciphertext> {
    encrypt_revealing_nonce(pk, m, rng).map(|(c, _)| c)
}

pub fn decrypt(sk: &PrivateKey, c: &Ciphertext) -> Result<Plaintext> {
    let m = (c.value() % &sk.p) * &sk.d % &sk.p;
    Plaintext::new(m, sk.n).map_err(|_| SchemeError::PlaintextOutOfRange)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn worked_example() -> KeyMaterial {
        KeyMaterial::from_parts(
            16,
            BigUint::from(65287u32),
            BigUint::from(40829u32),
            BigUint::from(46381u32),
            BigUint::from(3096817651u64),
        )
        .unwrap()
    }

    #[test]
    fn worked_example_keys() {
        let km = worked_example();
        assert_eq!(km.k2, BigInt::from(-2776));
        assert_eq!(km.v, BigUint::from(59380u32));
        assert_eq!(km.d, BigUint::from(49913u32));
        let pk = km.public_key();
        assert_eq!(pk.e1, BigUint::from(5943657286u64));
        assert_eq!(pk.e2, BigUint::from(3278054363u64));
        assert_eq!(&pk.e1 - &pk.e2, &km.p * &km.q);
    }

    #[test]
    fn worked_example_round_trip() {
        let km = worked_example();
        let m = Plaintext::new(BigUint::from(43963u32), 16).unwrap();
        let x = BigUint::from(281474976710656u64);
        let (c, nonce) = encrypt_with_nonce(&km.public_key(), &m, &x).unwrap();
        assert_eq!(nonce.y, BigInt::from(281474976666693u64));
        assert_eq!(c.0, "750300520815394662808057".parse::<BigUint>().unwrap());
        assert_eq!(decrypt(&km.private_key(), &c).unwrap(), m);
    }

    #[test]
    fn from_parts_rejects_bad_material() {
        let p = BigUint::from(65287u32);
        let q = BigUint::from(40829u32);
        let k1 = BigUint::from(46381u32);
        let u = BigUint::from(3096817651u64);
        // p below the 2^15 + 2^14 bound.
        assert!(KeyMaterial::from_parts(16, q.clone(), q.clone(), k1.clone(), u.clone()).is_err());
        // even k1
        assert!(KeyMaterial::from_parts(16, p.clone(), q.clone(), &k1 + 1u32, u.clone()).is_err());
        // u divisible by p
        let u_bad = &p * BigUint::from(50000u32);
        assert!(KeyMaterial::from_parts(16, p.clone(), q.clone(), k1.clone(), u_bad).is_err());
        // composite q
        assert!(KeyMaterial::from_parts(16, p.clone(), &q + 2u32, k1.clone(), u.clone()).is_err());
        assert_eq!(
            KeyMaterial::from_parts(7, p, q, k1, u),
            Err(SchemeError::InvalidSecurityParameter(7))
        );
    }

    #[test]
    fn pinned_seed_draws_the_worked_example_prime() {
        let km = generate_keys(16, &mut RandomSource::seeded(1876)).unwrap();
        assert_eq!(km.p, BigUint::from(65287u32));
        assert_eq!(km.q, BigUint::from(32843u32));
        let pk = km.public_key();
        assert_eq!(&pk.e1 - &pk.e2, &km.p * &km.q);
        let m = Plaintext::random(16, &mut RandomSource::seeded(0)).unwrap();
        let c = encrypt(&pk, &m, &mut RandomSource::seeded(0)).unwrap();
        assert_eq!(decrypt(&km.private_key(), &c).unwrap(), m);
    }

    #[test]
    fn generated_keys_satisfy_invariants() {
        let mut rng = RandomSource::seeded(1);
        for n in [8u64, 9, 16, 32, 64, 128] {
            for _ in 0..20 {
                let km = generate_keys(n, &mut rng).unwrap();
                let pk = km.public_key();
                assert_eq!(pk.e1.bits(), 2 * n);
                assert_eq!(pk.e2.bits(), 2 * n);
                assert_eq!(&pk.e1 - &pk.e2, &km.p * &km.q);
                assert!(km.p > pow2(n - 1) + pow2(n - 2));
                assert_eq!(km.q.bits(), n);
                assert_eq!(km.k1.bits(), n);
                assert!(km.k1.is_odd());
                assert_eq!(
                    km.k2.clone() * 2,
                    BigInt::from(km.q.clone()) - BigInt::from(km.k1.clone())
                );
                assert_eq!(km.u.bits(), 2 * n);
                assert!((&km.d * &km.v % &km.p).is_one());
            }
        }
        assert_eq!(
            generate_keys(7, &mut rng),
            Err(SchemeError::InvalidSecurityParameter(7))
        );
    }

    #[test]
    fn encode_examples() {
        assert_eq!(encode(&[], 16).unwrap().value(), &BigUint::from(32769u32));
        assert_eq!(
            encode(&[0x00], 16).unwrap().value(),
            &BigUint::from(33024u32)
        );
        assert_eq!(
            encode(&[0xff], 16).unwrap().value(),
            &BigUint::from(33279u32)
        );
        assert_eq!(
            encode(&[1, 2], 16),
            Err(SchemeError::PayloadTooLarge {
                len: 2,
                max: 1,
                n: 16
            })
        );
        assert_eq!(max_payload_len(8), 0);
        assert_eq!(max_payload_len(64), 7);
        assert!(encode(&[0xff; 7], 64).is_ok());
    }

    #[test]
    fn decode_inverts_encode() {
        for payload in [&[][..], &[0x00], &[0xff]] {
            assert_eq!(decode(&encode(payload, 16).unwrap()).unwrap(), payload);
        }
        assert_eq!(
            decode(&encode(&[0, 0, 7], 64).unwrap()).unwrap(),
            vec![0, 0, 7]
        );
    }

    #[test]
    fn decode_rejects_missing_sentinel() {
        // 2^15 + 2^3: sentinel bit not on a byte boundary.
        let m = Plaintext::new(BigUint::from(32768u32 + 8), 16).unwrap();
        assert_eq!(decode(&m), Err(SchemeError::MalformedPlaintext));
    }

    #[test]
    fn plaintext_window_is_open() {
        assert!(Plaintext::new(BigUint::from(32768u32), 16).is_err());
        assert!(Plaintext::new(BigUint::from(49152u32), 16).is_err());
        assert!(Plaintext::new(BigUint::from(49151u32), 16).is_ok());
        assert!(Plaintext::new(BigUint::from(32769u32), 16).is_ok());
    }

    #[test]
    fn decrypt_zero_is_out_of_range() {
        let km = worked_example();
        assert_eq!(
            decrypt(&km.private_key(), &Ciphertext(BigUint::zero())),
            Err(SchemeError::PlaintextOutOfRange)
        );
    }

    #[test]
    fn encrypt_checks_parameters() {
        let km = worked_example();
        let m = Plaintext::new(BigUint::from(43963u32), 16).unwrap();
        assert_eq!(
            encrypt_with_nonce(&km.public_key(), &m, &BigUint::zero()),
            Err(SchemeError::InvalidNonce)
        );
        let other = encode(&[], 32).unwrap();
        assert!(matches!(
            encrypt(&km.public_key(), &other, &mut RandomSource::seeded(0)),
            Err(SchemeError::ParameterMismatch { .. })
        ));
    }

    #[test]
    fn ciphertext_identity_and_congruence() {
        let mut rng = RandomSource::seeded(4);
        for n in [16u64, 32, 64] {
            let km = generate_keys(n, &mut rng).unwrap();
            let pk = km.public_key();
            let m = Plaintext::random(n, &mut rng).unwrap();
            let (c, nonce) = encrypt_revealing_nonce(&pk, &m, &mut rng).unwrap();
            assert_eq!(nonce.x.bits(), 3 * n);
            let expected = &nonce.x * (&pk.e1 - &pk.e2) + m.value() * &pk.e2;
            assert_eq!(c.0, expected);
            assert_eq!(&c.0 % &km.p, m.value() * &km.u % &km.p);
            assert!(c.0.bits() + 2 >= 5 * n && c.0.bits() <= 5 * n + 2);
        }
    }
}
