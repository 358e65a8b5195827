//! Exact rational LLL and the ciphertext lattice attack.
//!
//! The attack embeds `x*e1 - y*e2 - z*C = 0` as
//!
//! ```text
//! (1, 0,  W*e1)
//! (0, 1, -W*e2)
//! (0, 0,  W*C )
//! ```
//!
//! so that `(X, Y, 0) = X*r0 + Y*r1 - r2` is a lattice vector. At correct
//! sizing `(e2, e1, 0)` is far shorter than `(X, Y, 0)` and reduction does not
//! surface the nonce. With `n`-bit nonces it does.

use std::fmt::Write as _;

use num_bigint::{BigInt, BigUint, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::attacks::{AttackFailure, AttackKind, AttackReport};
use crate::numtheory::{approx_log2, pow2, RandomSource};
use crate::scheme::{
    encrypt_revealing_nonce, encrypt_with_nonce, generate_keys, in_plaintext_window, Ciphertext,
    Plaintext, PublicKey, SchemeError,
};

/// Coefficient bound for combinations of reduced rows in the attack scan.
pub const COMBINATION_BOUND: i64 = 4;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LatticeError {
    #[error("basis has no rows")]
    Empty,
    #[error("rows have unequal dimensions")]
    RaggedRows,
    #[error("more rows than columns")]
    TooManyRows,
    #[error("rows are linearly dependent")]
    DependentRows,
    #[error("delta must lie in (1/4, 1]")]
    InvalidDelta,
}

pub type Result<T> = std::result::Result<T, LatticeError>;

/// Linearly independent integer rows of equal dimension.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticeBasis {
    rows: Vec<Vec<BigInt>>,
}

impl LatticeBasis {
    pub fn new(rows: Vec<Vec<BigInt>>) -> Result<Self> {
        let dim = rows.first().ok_or(LatticeError::Empty)?.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(LatticeError::RaggedRows);
        }
        if rows.len() > dim {
            return Err(LatticeError::TooManyRows);
        }
        let basis = Self { rows };
        if basis.gram_determinant().is_zero() {
            return Err(LatticeError::DependentRows);
        }
        Ok(basis)
    }

    pub fn from_i64(rows: &[&[i64]]) -> Result<Self> {
        Self::new(
            rows.iter()
                .map(|r| r.iter().map(|&v| BigInt::from(v)).collect())
                .collect(),
        )
    }

    pub fn rows(&self) -> &[Vec<BigInt>] {
        &self.rows
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// `det(B * B^T)`, nonzero exactly when the rows are independent.
    pub fn gram_determinant(&self) -> BigInt {
        let gram = self
            .rows
            .iter()
            .map(|a| self.rows.iter().map(|b| dot(a, b)).collect())
            .collect();
        determinant(gram)
    }

    /// Determinant of a square basis.
    pub fn determinant(&self) -> Option<BigInt> {
        (self.rows.len() == self.rows[0].len()).then(|| determinant(self.rows.clone()))
    }

    pub fn squared_norms(&self) -> Vec<BigInt> {
        self.rows.iter().map(|r| dot(r, r)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReductionParams {
    pub delta: BigRational,
}

impl ReductionParams {
    pub fn new(delta: BigRational) -> Result<Self> {
        let quarter = BigRational::new(1.into(), 4.into());
        if delta <= quarter || delta > BigRational::one() {
            return Err(LatticeError::InvalidDelta);
        }
        Ok(Self { delta })
    }
}

impl Default for ReductionParams {
    fn default() -> Self {
        Self {
            delta: BigRational::new(3.into(), 4.into()),
        }
    }
}

/// Gram–Schmidt data: `mu[i][j]` for `j < i` and `|b*_i|^2`.
#[derive(Debug, Clone)]
pub struct GramSchmidt {
    pub mu: Vec<Vec<BigRational>>,
    pub norms: Vec<BigRational>,
}

pub fn gram_schmidt(rows: &[Vec<BigInt>]) -> GramSchmidt {
    let k = rows.len();
    let rat_rows: Vec<Vec<BigRational>> = rows
        .iter()
        .map(|r| r.iter().cloned().map(BigRational::from_integer).collect())
        .collect();
    let mut star: Vec<Vec<BigRational>> = Vec::with_capacity(k);
    let mut mu = vec![vec![BigRational::zero(); k]; k];
    let mut norms = Vec::with_capacity(k);
    for i in 0..k {
        let mut v = rat_rows[i].clone();
        for j in 0..i {
            let m = rat_dot(&rat_rows[i], &star[j]) / &norms[j];
            for (vc, sc) in v.iter_mut().zip(&star[j]) {
                *vc -= &m * sc;
            }
            mu[i][j] = m;
        }
        norms.push(rat_dot(&v, &v));
        star.push(v);
    }
    GramSchmidt { mu, norms }
}

/// Every `|mu[i][j]| <= 1/2`.
pub fn is_size_reduced(basis: &LatticeBasis) -> bool {
    let half = BigRational::new(1.into(), 2.into());
    let gs = gram_schmidt(basis.rows());
    (0..basis.rank()).all(|i| (0..i).all(|j| gs.mu[i][j].abs() <= half))
}

/// `(delta - mu[k][k-1]^2) * |b*_{k-1}|^2 <= |b*_k|^2` for every adjacent pair.
pub fn satisfies_lovasz(basis: &LatticeBasis, params: &ReductionParams) -> bool {
    let gs = gram_schmidt(basis.rows());
    (1..basis.rank()).all(|k| {
        let m = &gs.mu[k][k - 1];
        (&params.delta - m * m) * &gs.norms[k - 1] <= gs.norms[k]
    })
}

#[derive(Debug, Clone)]
pub struct Reduction {
    pub basis: LatticeBasis,
    /// Integer matrix `T` with `T * input = output`.
    pub transform: Vec<Vec<BigInt>>,
    pub swaps: u64,
    pub size_reductions: u64,
}

pub fn lll_reduce(basis: &LatticeBasis, params: &ReductionParams) -> LatticeBasis {
    lll_reduce_with_transform(basis, params).basis
}

pub fn lll_reduce_with_transform(basis: &LatticeBasis, params: &ReductionParams) -> Reduction {
    let k = basis.rank();
    let mut b = basis.rows.clone();
    let mut t: Vec<Vec<BigInt>> = (0..k)
        .map(|i| (0..k).map(|j| BigInt::from((i == j) as u8)).collect())
        .collect();
    let mut gs = gram_schmidt(&b);
    let (mut swaps, mut size_reductions) = (0u64, 0u64);
    let mut i = 1;
    while i < k {
        for j in (0..i).rev() {
            let r = gs.mu[i][j].round().to_integer();
            if r.is_zero() {
                continue;
            }
            size_reductions += 1;
            let (lo, hi) = b.split_at_mut(i);
            axpy(&mut hi[0], &r, &lo[j]);
            let (lo, hi) = t.split_at_mut(i);
            axpy(&mut hi[0], &r, &lo[j]);
            let rr = BigRational::from_integer(r);
            for l in 0..j {
                let delta = &rr * &gs.mu[j][l];
                gs.mu[i][l] -= delta;
            }
            gs.mu[i][j] -= rr;
        }
        let m = &gs.mu[i][i - 1];
        if (&params.delta - m * m) * &gs.norms[i - 1] <= gs.norms[i] {
            i += 1;
        } else {
            b.swap(i, i - 1);
            t.swap(i, i - 1);
            swaps += 1;
            gs = gram_schmidt(&b);
            i = (i - 1).max(1);
        }
    }
    Reduction {
        basis: LatticeBasis { rows: b },
        transform: t,
        swaps,
        size_reductions,
    }
}

/// `row -= r * other`
fn axpy(row: &mut [BigInt], r: &BigInt, other: &[BigInt]) {
    for (a, o) in row.iter_mut().zip(other) {
        *a -= r * o;
    }
}

fn dot(a: &[BigInt], b: &[BigInt]) -> BigInt {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn rat_dot(a: &[BigRational], b: &[BigRational]) -> BigRational {
    a.iter()
        .zip(b)
        .fold(BigRational::zero(), |acc, (x, y)| acc + x * y)
}

/// Fraction-free Bareiss elimination.
pub fn determinant(mut m: Vec<Vec<BigInt>>) -> BigInt {
    let n = m.len();
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n {
        if m[k][k].is_zero() {
            match (k + 1..n).find(|&r| !m[r][k].is_zero()) {
                Some(r) => {
                    m.swap(k, r);
                    sign = -sign;
                }
                None => return BigInt::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = &m[i][j] * &m[k][k] - &m[i][k] * &m[k][j];
                m[i][j] = v / &prev;
            }
        }
        prev = m[k][k].clone();
    }
    sign * &m[n - 1][n - 1]
}

/// Default weight `2^(4n+4)`.
pub fn default_weight(n: u64) -> BigInt {
    pow2(4 * n + 4)
}

pub fn build_ciphertext_lattice(
    pk: &PublicKey,
    c: &Ciphertext,
    weight: &BigInt,
) -> Result<LatticeBasis> {
    let e1 = BigInt::from(pk.e1.clone());
    let e2 = BigInt::from(pk.e2.clone());
    let c = BigInt::from(c.value().clone());
    let (zero, one) = (BigInt::zero(), BigInt::one());
    LatticeBasis::new(vec![
        vec![one.clone(), zero.clone(), weight * e1],
        vec![zero.clone(), one, -(weight * e2)],
        vec![zero.clone(), zero, weight * c],
    ])
}

/// Lattice attack expecting a `3n`-bit nonce.
pub fn lattice_attack(pk: &PublicKey, c: &Ciphertext, params: &ReductionParams) -> AttackReport {
    lattice_attack_sized(pk, c, params, 3 * pk.n)
}

/// Lattice attack accepting `x` of exactly `x_bits` bits.
pub fn lattice_attack_sized(
    pk: &PublicKey,
    c: &Ciphertext,
    params: &ReductionParams,
    x_bits: u64,
) -> AttackReport {
    let mut report = empty_report();
    let basis = match build_ciphertext_lattice(pk, c, &default_weight(pk.n)) {
        Ok(b) => b,
        Err(e) => {
            report.failure = Some(AttackFailure::InvalidInstance(e.to_string()));
            return report;
        }
    };
    let reduction = lll_reduce_with_transform(&basis, params);
    report.work_ops = reduction.swaps + reduction.size_reductions;
    report.notes.push(format!(
        "reduced_log2_norms={}",
        format_norms(&reduction.basis)
    ));

    let e1 = BigInt::from(pk.e1.clone());
    let e2 = BigInt::from(pk.e2.clone());
    let target = BigInt::from(c.value().clone());
    let rows = reduction.basis.rows();
    let bound = COMBINATION_BOUND;
    for a in -bound..=bound {
        for b in -bound..=bound {
            for d in 0..=bound {
                // (a, b, d) and its negation give the same candidates up to sign.
                if d == 0 && (b < 0 || (b == 0 && a <= 0)) {
                    continue;
                }
                report.work_ops += 1;
                let coeffs = [a, b, d].map(BigInt::from);
                let v: Vec<BigInt> = (0..3)
                    .map(|col| (0..3).map(|r| &coeffs[r] * &rows[r][col]).sum())
                    .collect();
                if !v[2].is_zero() {
                    continue;
                }
                for s in [1i32, -1] {
                    let x = &v[0] * s;
                    let y = &v[1] * s;
                    if x.sign() != Sign::Plus || x.bits() != x_bits {
                        continue;
                    }
                    let m = &x - &y;
                    if m.sign() != Sign::Plus || !in_plaintext_window(m.magnitude(), pk.n) {
                        continue;
                    }
                    if &x * &e1 - &y * &e2 == target {
                        report.success = true;
                        report.recovered.m = Some(m.magnitude().clone());
                        report.recovered.x = Some(x.magnitude().clone());
                        report.recovered.y = Some(y);
                        return report;
                    }
                }
            }
        }
    }
    report.failure = Some(AttackFailure::NoCandidate);
    report
}

fn empty_report() -> AttackReport {
    AttackReport {
        kind: AttackKind::Lattice,
        success: false,
        recovered: Default::default(),
        work_ops: 0,
        failure: None,
        notes: Vec::new(),
    }
}

fn format_norms(basis: &LatticeBasis) -> String {
    let mut s = String::new();
    for (i, sq) in basis.squared_norms().iter().enumerate() {
        if i > 0 {
            s.push(';');
        }
        let _ = write!(s, "{:.1}", approx_log2(sq.magnitude()) / 2.0);
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `3n`-bit nonce, as produced by [`crate::scheme::encrypt`].
    Correct,
    /// `n`-bit nonce against the same `2n`-bit keys.
    Weakened,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Correct => "correct",
            Regime::Weakened => "weakened",
        }
    }

    pub fn x_bits(self, n: u64) -> u64 {
        match self {
            Regime::Correct => 3 * n,
            Regime::Weakened => n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticeTrial {
    pub n: u64,
    pub regime: Regime,
    pub trial: usize,
    pub success: bool,
    /// Whether the recovered plaintext equals the planted one.
    pub exact: bool,
    pub reduced_norms: String,
    pub work_ops: u64,
}

/// Plants a message under a fresh key per trial and runs the sized attack.
pub fn lattice_experiment(
    n: u64,
    regime: Regime,
    trials: usize,
    rng: &mut RandomSource,
) -> std::result::Result<Vec<LatticeTrial>, SchemeError> {
    let params = ReductionParams::default();
    let mut out = Vec::with_capacity(trials);
    for trial in 0..trials {
        let km = generate_keys(n, rng)?;
        let pk = km.public_key();
        let m = Plaintext::random(n, rng)?;
        let c = match regime {
            Regime::Correct => encrypt_revealing_nonce(&pk, &m, rng)?.0,
            Regime::Weakened => {
                let x = rng.uniform_inclusive(
                    &(BigUint::one() << (n - 1)),
                    &((BigUint::one() << n) - 1u32),
                );
                encrypt_with_nonce(&pk, &m, &x)?.0
            }
        };
        let report = lattice_attack_sized(&pk, &c, &params, regime.x_bits(n));
        let reduced_norms = report
            .notes
            .iter()
            .find_map(|s| s.strip_prefix("reduced_log2_norms="))
            .unwrap_or_default()
            .to_string();
        out.push(LatticeTrial {
            n,
            regime,
            trial,
            success: report.success,
            exact: report.recovered.m.as_ref() == Some(m.value()),
            reduced_norms,
            work_ops: report.work_ops,
        });
    }
    Ok(out)
}

pub const LATTICE_CSV_HEADER: &str = "n,regime,trial,success,reduced_norms,work_ops";

pub fn lattice_csv(trials: &[LatticeTrial]) -> String {
    let mut s = format!("{LATTICE_CSV_HEADER}\n");
    for t in trials {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            t.n,
            t.regime.name(),
            t.trial,
            t.success,
            t.reduced_norms,
            t.work_ops
        );
    }
    s
}
