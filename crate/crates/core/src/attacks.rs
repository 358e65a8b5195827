//! Executable attacks on the scheme.
//!
//! - [`factor_break`]: factor `e1 - e2 = pq`, rebuild `d` from the public key
//!   and decrypt. Any factoring success is a full break.
//! - [`euclidean_probe`]: check whether `floor(C/e1)` or `floor(C/e2)` leak
//!   the nonce.
//! - [`x_search_width`]: count the candidate nonces an attacker walking
//!   `X = X0 + e2*j` would have to try.

use std::fmt::{self, Write as _};

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Zero};

use crate::dehp::{ciphertext_instance, infeasibility_width, DehpError};
use crate::numtheory::{mod_inverse_uint, small_primes, RandomSource};
use crate::scheme::{
    encrypt_revealing_nonce, generate_keys, in_plaintext_window, Ciphertext, EncryptionNonce,
    Plaintext, PublicKey, SchemeError,
};

/// Trial division bound used before switching to rho.
pub const TRIAL_DIVISION_LIMIT: u32 = 1_000_000;
/// Number of products accumulated before each gcd in Brent's loop.
const RHO_BATCH: u64 = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackKind {
    Factor,
    Euclid,
    Lattice,
    DehpWidth,
}

impl AttackKind {
    pub fn name(self) -> &'static str {
        match self {
            AttackKind::Factor => "factor",
            AttackKind::Euclid => "euclid",
            AttackKind::Lattice => "lattice",
            AttackKind::DehpWidth => "dehp-width",
        }
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Why an attack stopped without a result.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AttackFailure {
    BudgetExhausted,
    NoCandidate,
    InvalidInstance(String),
}

impl fmt::Display for AttackFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttackFailure::BudgetExhausted => f.write_str("budget-exhausted"),
            AttackFailure::NoCandidate => f.write_str("no-candidate"),
            AttackFailure::InvalidInstance(why) => write!(f, "invalid-instance ({why})"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Recovered {
    pub p: Option<BigUint>,
    pub q: Option<BigUint>,
    pub d: Option<BigUint>,
    pub m: Option<BigUint>,
    pub x: Option<BigUint>,
    pub y: Option<BigInt>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttackReport {
    pub kind: AttackKind,
    pub success: bool,
    pub recovered: Recovered,
    /// Big-integer operations spent.
    pub work_ops: u64,
    pub failure: Option<AttackFailure>,
    pub notes: Vec<String>,
}

impl AttackReport {
    fn new(kind: AttackKind) -> Self {
        Self {
            kind,
            success: false,
            recovered: Recovered::default(),
            work_ops: 0,
            failure: None,
            notes: Vec::new(),
        }
    }

    /// Ordered `(key, value)` pairs; absent recovered values are skipped.
    pub fn fields(&self) -> Vec<(&'static str, String)> {
        let mut out = vec![
            ("attack", self.kind.to_string()),
            ("success", self.success.to_string()),
        ];
        let r = &self.recovered;
        let mut push = |key, value: &Option<String>| {
            if let Some(v) = value {
                out.push((key, v.clone()));
            }
        };
        push("p", &r.p.as_ref().map(ToString::to_string));
        push("q", &r.q.as_ref().map(ToString::to_string));
        push("d", &r.d.as_ref().map(ToString::to_string));
        push("m", &r.m.as_ref().map(ToString::to_string));
        push("x", &r.x.as_ref().map(ToString::to_string));
        push("y", &r.y.as_ref().map(ToString::to_string));
        out.push(("work_ops", self.work_ops.to_string()));
        if let Some(f) = &self.failure {
            out.push(("failure", f.to_string()));
        }
        out
    }

    /// Human-readable `key: value` lines, notes last.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.fields() {
            let _ = writeln!(s, "{k}: {v}");
        }
        for note in &self.notes {
            let _ = writeln!(s, "note: {note}");
        }
        s
    }

    /// One `key=value` per line; notes are joined with `; `.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.fields() {
            let _ = writeln!(s, "{k}={v}");
        }
        if !self.notes.is_empty() {
            let _ = writeln!(s, "notes={}", self.notes.join("; "));
        }
        s
    }
}

/// Operation counter that refuses to go past its budget.
struct Meter {
    used: u64,
    budget: u64,
}

impl Meter {
    fn charge(&mut self, ops: u64) -> bool {
        self.used += ops;
        self.used <= self.budget
    }
}

enum Factoring {
    Found(BigUint),
    Prime,
    OutOfBudget,
}

fn trial_division(n: &BigUint, meter: &mut Meter) -> Option<Factoring> {
    let limit = n.sqrt().min(BigUint::from(TRIAL_DIVISION_LIMIT));
    for &p in small_primes() {
        if BigUint::from(p) > limit {
            break;
        }
        if !meter.charge(1) {
            return Some(Factoring::OutOfBudget);
        }
        if (n % p).is_zero() {
            return Some(Factoring::Found(BigUint::from(p)));
        }
    }
    if n.sqrt() <= BigUint::from(TRIAL_DIVISION_LIMIT) {
        return Some(Factoring::Prime);
    }
    None
}

/// Brent's variant of Pollard's rho with batched gcds. `n` must be odd,
/// composite and free of small factors.
fn pollard_brent(n: &BigUint, meter: &mut Meter, rng: &mut RandomSource) -> Factoring {
    let two = BigUint::from(2u32);
    let limit = n - 1u32;
    loop {
        let c = rng.uniform_inclusive(&BigUint::one(), &limit);
        let mut y = rng.uniform_inclusive(&BigUint::zero(), &limit);
        let f = |v: &BigUint| (v * v + &c) % n;
        let (mut g, mut r, mut q) = (BigUint::one(), 1u64, BigUint::one());
        let mut x = y.clone();
        let mut ys = y.clone();
        while g.is_one() {
            x = y.clone();
            for _ in 0..r {
                y = f(&y);
            }
            if !meter.charge(r) {
                return Factoring::OutOfBudget;
            }
            let mut k = 0;
            while k < r && g.is_one() {
                ys = y.clone();
                let steps = RHO_BATCH.min(r - k);
                for _ in 0..steps {
                    y = f(&y);
                    let diff = if x > y { &x - &y } else { &y - &x };
                    q = q * diff % n;
                }
                if !meter.charge(2 * steps + 1) {
                    return Factoring::OutOfBudget;
                }
                g = q.gcd(n);
                k += steps;
            }
            r *= 2;
        }
        if &g == n {
            // Batch overshot: replay one step at a time from the saved point.
            loop {
                ys = f(&ys);
                let diff = if x > ys { &x - &ys } else { &ys - &x };
                g = diff.gcd(n);
                if !meter.charge(2) {
                    return Factoring::OutOfBudget;
                }
                if !g.is_one() {
                    break;
                }
            }
        }
        if &g != n && g >= two {
            return Factoring::Found(g);
        }
        // Degenerate cycle; retry with a fresh polynomial.
    }
}

fn find_factor(n: &BigUint, meter: &mut Meter) -> Factoring {
    if let Some(result) = trial_division(n, meter) {
        return result;
    }
    let mut rng = RandomSource::seeded(0x5eed_f2d0);
    pollard_brent(n, meter, &mut rng)
}

/// Decrypts with a candidate prime factor and checks the result against the
/// public equation: `C - M*e2` must be a positive multiple of `e1 - e2`.
fn try_factor(
    candidate: &BigUint,
    pk: &PublicKey,
    c: &Ciphertext,
    modulus: &BigUint,
) -> Option<(BigUint, BigUint, BigUint)> {
    let v = &pk.e2 % candidate;
    let d = mod_inverse_uint(&v, candidate).ok()?;
    let m = (c.value() % candidate) * &d % candidate;
    if !in_plaintext_window(&m, pk.n) {
        return None;
    }
    let rest = BigInt::from(c.value().clone()) - BigInt::from(&m * &pk.e2);
    let (x, r) = rest.div_rem(&BigInt::from(modulus.clone()));
    if !r.is_zero() || x <= BigInt::zero() {
        return None;
    }
    Some((d, m, x.magnitude().clone()))
}

/// Full key recovery by factoring `N = e1 - e2`.
///
/// `p` is the factor above `2^(n-1) + 2^(n-2)`. If both factors clear that
/// bound, both are tried, and the one whose decryption satisfies
/// `C ≡ M*e2 (mod N)` with a positive quotient wins.
pub fn factor_break(pk: &PublicKey, c: &Ciphertext, budget: u64) -> AttackReport {
    let mut report = AttackReport::new(AttackKind::Factor);
    if pk.e1 <= pk.e2 || pk.n < 2 {
        report.failure = Some(AttackFailure::InvalidInstance("e1 must exceed e2".into()));
        return report;
    }
    let modulus = &pk.e1 - &pk.e2;
    let mut meter = Meter { used: 1, budget };

    let factor = match find_factor(&modulus, &mut meter) {
        Factoring::Found(f) => f,
        Factoring::Prime => {
            report.work_ops = meter.used;
            report.failure = Some(AttackFailure::NoCandidate);
            report.notes.push("e1 - e2 has no nontrivial factor".into());
            return report;
        }
        Factoring::OutOfBudget => {
            report.work_ops = meter.used.min(budget);
            report.failure = Some(AttackFailure::BudgetExhausted);
            return report;
        }
    };
    let cofactor = &modulus / &factor;
    debug_assert_eq!(&factor * &cofactor, modulus);
    let bound = (BigUint::one() << (pk.n - 1)) + (BigUint::one() << (pk.n - 2));
    let mut order = [factor, cofactor];
    order.sort_by_key(|f| std::cmp::Reverse(f > &bound));
    if order.iter().all(|f| f > &bound) {
        report
            .notes
            .push("both factors exceed the p bound; trying both".into());
    }

    for (i, candidate) in order.iter().enumerate() {
        meter.used += 6;
        if let Some((d, m, x)) = try_factor(candidate, pk, c, &modulus) {
            let y = BigInt::from(x.clone()) - BigInt::from(m.clone());
            report.success = true;
            report.recovered = Recovered {
                p: Some(candidate.clone()),
                q: Some(order[1 - i].clone()),
                d: Some(d),
                m: Some(m),
                x: Some(x),
                y: Some(y),
            };
            break;
        }
    }
    if !report.success {
        report.failure = Some(AttackFailure::NoCandidate);
    }
    report.work_ops = meter.used;
    report
}

/// White-box check that neither floor quotient reveals the nonce.
/// `success` is true when either one does.
pub fn euclidean_probe(pk: &PublicKey, c: &Ciphertext, nonce: &EncryptionNonce) -> AttackReport {
    let mut report = AttackReport::new(AttackKind::Euclid);
    let q1 = c.value() / &pk.e1;
    let q2 = c.value() / &pk.e2;
    report.work_ops = 2;
    let hit_x = q1 == nonce.x;
    let hit_y = BigInt::from(q2.clone()) == nonce.y;
    report.success = hit_x || hit_y;
    if hit_x {
        report.recovered.x = Some(q1.clone());
    }
    if hit_y {
        report.recovered.y = Some(nonce.y.clone());
    }
    if !report.success {
        report.failure = Some(AttackFailure::NoCandidate);
    }
    report.notes.push(format!("floor(C/e1)={q1}"));
    report.notes.push(format!("floor(C/e2)={q2}"));
    report
}

/// Exact number of `j` that put `X0 + e2*j` in the 3n-bit nonce window.
pub fn x_search_width(pk: &PublicKey, c: &Ciphertext) -> Result<BigInt, DehpError> {
    infeasibility_width(&ciphertext_instance(pk, c)?)
}

/// Report wrapper around [`x_search_width`].
pub fn x_search_report(pk: &PublicKey, c: &Ciphertext) -> AttackReport {
    let mut report = AttackReport::new(AttackKind::DehpWidth);
    report.work_ops = 1;
    match x_search_width(pk, c) {
        Ok(width) => {
            report.failure = Some(AttackFailure::NoCandidate);
            report.notes.push(format!("x_search_width={width}"));
            report.notes.push(format!(
                "log2_width={:.2}",
                crate::numtheory::approx_log2(width.magnitude())
            ));
        }
        Err(e) => report.failure = Some(AttackFailure::InvalidInstance(e.to_string())),
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ExperimentTally {
    pub trials: usize,
    pub successes: usize,
}

/// Runs the Euclidean probe on `trials` fresh (key, message) pairs.
pub fn euclid_experiment(
    n: u64,
    trials: usize,
    rng: &mut RandomSource,
) -> Result<ExperimentTally, SchemeError> {
    let mut tally = ExperimentTally {
        trials,
        ..Default::default()
    };
    for _ in 0..trials {
        let km = generate_keys(n, rng)?;
        let pk = km.public_key();
        let m = Plaintext::random(n, rng)?;
        let (c, nonce) = encrypt_revealing_nonce(&pk, &m, rng)?;
        if euclidean_probe(&pk, &c, &nonce).success {
            tally.successes += 1;
        }
    }
    Ok(tally)
}

/// Plants a message under a fresh key and runs [`factor_break`]; counts exact
/// recoveries.
pub fn factor_experiment(
    n: u64,
    trials: usize,
    budget: u64,
    rng: &mut RandomSource,
) -> Result<ExperimentTally, SchemeError> {
    let mut tally = ExperimentTally {
        trials,
        ..Default::default()
    };
    for _ in 0..trials {
        let km = generate_keys(n, rng)?;
        let pk = km.public_key();
        let m = Plaintext::random(n, rng)?;
        let c = crate::scheme::encrypt(&pk, &m, rng)?;
        let report = factor_break(&pk, &c, budget);
        if report.success && report.recovered.m.as_ref() == Some(m.value()) {
            tally.successes += 1;
        }
    }
    Ok(tally)
}
