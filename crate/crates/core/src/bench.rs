//! Timing and size measurements.
//!
//! Each timing sample runs a batch of repetitions sized to take a few
//! milliseconds, and reports nanoseconds per operation. One warm-up sample is
//! discarded; the record keeps the median of the rest.

use std::fmt::{self, Write as _};
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

use crate::numtheory::RandomSource;
use crate::scheme::{decrypt, encrypt, generate_keys, Plaintext, SchemeError};

/// Minimum number of timed samples per record.
pub const MIN_SAMPLES: usize = 9;
const TARGET_BATCH: Duration = Duration::from_millis(5);
const MAX_REPS: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BenchOp {
    Keygen,
    Encrypt,
    Decrypt,
}

impl BenchOp {
    pub fn name(self) -> &'static str {
        match self {
            BenchOp::Keygen => "keygen",
            BenchOp::Encrypt => "encrypt",
            BenchOp::Decrypt => "decrypt",
        }
    }
}

impl fmt::Display for BenchOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OperandSizes {
    pub m_bits: u64,
    pub c_bits: u64,
    pub e1_bits: u64,
    pub e2_bits: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchRecord {
    pub n: u64,
    pub op: BenchOp,
    pub median_nanos: u128,
    /// Per-operation nanoseconds of each kept sample, in run order.
    pub samples: Vec<u128>,
    pub sizes: OperandSizes,
}

fn median(values: &[u128]) -> u128 {
    let mut v = values.to_vec();
    v.sort_unstable();
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) / 2
    }
}

/// Times `f` in batches; the first batch is a discarded warm-up.
fn sample<F: FnMut()>(samples: usize, mut f: F) -> Vec<u128> {
    let start = Instant::now();
    f();
    let once = start.elapsed().max(Duration::from_nanos(1));
    let reps = (TARGET_BATCH.as_nanos() / once.as_nanos()).clamp(1, MAX_REPS as u128) as u64;
    let mut out = Vec::with_capacity(samples);
    for i in 0..=samples {
        let start = Instant::now();
        for _ in 0..reps {
            f();
        }
        let per_op = (start.elapsed().as_nanos() / reps as u128).max(1);
        if i > 0 {
            out.push(per_op);
        }
    }
    out
}

/// Encrypt and decrypt timings at each `n`, with keys and messages drawn from
/// `seed`. `samples` is raised to [`MIN_SAMPLES`] if smaller.
pub fn run_scaling(ns: &[u64], samples: usize, seed: u64) -> Result<Vec<BenchRecord>, SchemeError> {
    let samples = samples.max(MIN_SAMPLES);
    let mut out = Vec::with_capacity(2 * ns.len());
    for &n in ns {
        let mut rng = RandomSource::seeded(seed ^ n);
        let km = generate_keys(n, &mut rng)?;
        let (pk, sk) = (km.public_key(), km.private_key());
        let m = Plaintext::random(n, &mut rng)?;
        let c = encrypt(&pk, &m, &mut rng)?;
        assert_eq!(decrypt(&sk, &c)?, m, "benchmark key failed to round-trip");
        let sizes = OperandSizes {
            m_bits: m.value().bits(),
            c_bits: c.value().bits(),
            e1_bits: pk.e1.bits(),
            e2_bits: pk.e2.bits(),
        };

        let enc = sample(samples, || {
            std::hint::black_box(encrypt(&pk, &m, &mut rng).unwrap());
        });
        let dec = sample(samples, || {
            std::hint::black_box(decrypt(&sk, &c).unwrap());
        });
        for (op, s) in [(BenchOp::Encrypt, enc), (BenchOp::Decrypt, dec)] {
            out.push(BenchRecord {
                n,
                op,
                median_nanos: median(&s),
                samples: s,
                sizes,
            });
        }
    }
    Ok(out)
}

/// Key generation timings; one key per sample, no batching.
pub fn run_keygen(ns: &[u64], samples: usize, seed: u64) -> Result<Vec<BenchRecord>, SchemeError> {
    let mut out = Vec::with_capacity(ns.len());
    for &n in ns {
        let mut rng = RandomSource::seeded(seed ^ n);
        let mut times = Vec::with_capacity(samples);
        let mut last = None;
        for _ in 0..samples.max(1) {
            let start = Instant::now();
            let km = generate_keys(n, &mut rng)?;
            times.push(start.elapsed().as_nanos().max(1));
            last = Some(km);
        }
        let pk = last.expect("at least one sample").public_key();
        out.push(BenchRecord {
            n,
            op: BenchOp::Keygen,
            median_nanos: median(&times),
            samples: times,
            sizes: OperandSizes {
                m_bits: n,
                c_bits: 0,
                e1_bits: pk.e1.bits(),
                e2_bits: pk.e2.bits(),
            },
        });
    }
    Ok(out)
}

/// Least-squares slope of `ln(median)` against `ln(n)` for one operation.
/// `None` with fewer than two distinct `n`.
pub fn fit_slope(records: &[BenchRecord], op: BenchOp) -> Option<f64> {
    let points: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.op == op)
        .map(|r| ((r.n as f64).ln(), (r.median_nanos as f64).ln()))
        .collect();
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (points.len() >= 2 && sxx > 0.0).then(|| sxy / sxx)
}

pub const SAMPLES_CSV_HEADER: &str = "n,op,trial,nanos";

pub fn samples_csv(records: &[BenchRecord]) -> String {
    let mut s = format!("{SAMPLES_CSV_HEADER}\n");
    for r in records {
        for (trial, nanos) in r.samples.iter().enumerate() {
            let _ = writeln!(s, "{},{},{},{}", r.n, r.op, trial, nanos);
        }
    }
    s
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ratios {
    /// Mean `bitlen(C) / n`.
    pub mc: BigRational,
    /// Mean `(bitlen(e1) + bitlen(e2)) / n`.
    pub me: BigRational,
    pub trials: usize,
}

/// Ciphertext and key expansion over `trials` fresh keys and messages.
pub fn measure_ratios(n: u64, trials: usize, seed: u64) -> Result<Ratios, SchemeError> {
    let mut rng = RandomSource::seeded(seed);
    let (mut c_bits, mut e_bits) = (0u64, 0u64);
    for _ in 0..trials {
        let km = generate_keys(n, &mut rng)?;
        let pk = km.public_key();
        let m = Plaintext::random(n, &mut rng)?;
        c_bits += encrypt(&pk, &m, &mut rng)?.value().bits();
        e_bits += pk.e1.bits() + pk.e2.bits();
    }
    let denom = BigInt::from(n) * BigInt::from(trials);
    let ratio = |num: u64| {
        if trials == 0 {
            BigRational::zero()
        } else {
            BigRational::new(num.into(), denom.clone())
        }
    };
    Ok(Ratios {
        mc: ratio(c_bits),
        me: ratio(e_bits),
        trials,
    })
}

fn rational_to_f64(r: &BigRational) -> f64 {
    let num: f64 = r.numer().to_string().parse().unwrap_or(f64::NAN);
    let den: f64 = r.denom().to_string().parse().unwrap_or(f64::NAN);
    num / den
}

impl Ratios {
    pub fn mc_f64(&self) -> f64 {
        rational_to_f64(&self.mc)
    }
}

/// Medians per record, then fitted slopes and optional ratios.
pub fn summary(records: &[BenchRecord], ratios: Option<(u64, &Ratios)>) -> String {
    let mut s = String::new();
    for r in records {
        let _ = writeln!(
            s,
            "n={} op={} median_ns={} samples={} |C|={} |e1|={} |e2|={}",
            r.n,
            r.op,
            r.median_nanos,
            r.samples.len(),
            r.sizes.c_bits,
            r.sizes.e1_bits,
            r.sizes.e2_bits
        );
    }
    for op in [BenchOp::Keygen, BenchOp::Encrypt, BenchOp::Decrypt] {
        if let Some(slope) = fit_slope(records, op) {
            let _ = writeln!(s, "slope {op}: {slope:.3}");
        }
    }
    if let Some((n, r)) = ratios {
        let _ = writeln!(
            s,
            "ratios n={n} trials={}: M:C = 1:{} ({:.4}), M:|E| = 1:{}",
            r.trials,
            r.mc,
            r.mc_f64(),
            r.me
        );
    }
    s
}
