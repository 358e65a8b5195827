//! A public-key scheme whose security rests on factoring `e1 - e2 = pq` and
//! on recovering a sized solution of a linear Diophantine equation, together
//! with the tooling to attack and measure it.
//!
//! - [`numtheory`]: primes, extended Euclid, modular inverses, seeded RNG
//! - [`scheme`]: key generation, encoding, encryption, decryption
//! - [`keyfile`]: text formats for keys and ciphertexts
//! - [`dehp`]: solutions of `C = Ax + By` and their search windows
//! - [`attacks`]: factoring break, Euclidean-division probe, X-search width
//! - [`lattice`]: exact rational LLL and the ciphertext lattice attack
//! - [`bench`]: scaling and ciphertext-expansion measurements

pub mod attacks;
pub mod bench;
pub mod dehp;
pub mod keyfile;
pub mod lattice;
pub mod numtheory;
pub mod scheme;

pub use numtheory::RandomSource;
pub use scheme::{
    decode, decrypt, encode, encrypt, generate_keys, Ciphertext, EncryptionNonce, KeyMaterial,
    Plaintext, PrivateKey, PublicKey, SchemeError,
};
