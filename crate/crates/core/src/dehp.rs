//! Linear Diophantine equations `C = A*x + B*y` with `gcd(A, B) = 1` and
//! unknowns of a declared size.
//!
//! Every solution has the form `x = x0 + B*t`, `y = y0 - A*t`. The sized
//! ("preferred") solution is the one whose coordinates have exactly the
//! declared bit-lengths. How hard it is to pick out depends on how many `t`
//! put `x` in its window: about one when the unknowns are as long as `B`, and
//! about `2^n` when they are n bits longer.

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::numtheory::{ceil_div, ext_gcd, floor_div, has_exact_bits, pow2, RandomSource};
use crate::scheme::{Ciphertext, PublicKey};

/// Windows wider than this are not enumerated by [`solve_case1`].
pub const CASE1_MAX_WIDTH: u64 = 2;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DehpError {
    #[error("coefficients must be positive")]
    NonPositiveCoefficient,
    #[error("gcd(A, B) = {0}, expected 1")]
    NotCoprime(BigInt),
    #[error("gcd(A, B) does not divide C")]
    NoSolution,
    #[error("declared unknown sizes must be positive")]
    InvalidBitLength,
    #[error("x-window holds {0} values of t; not a same-size instance")]
    WindowTooWide(BigInt),
}

pub type Result<T> = std::result::Result<T, DehpError>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiophantineInstance {
    pub a: BigInt,
    pub b: BigInt,
    pub c: BigInt,
    pub x_bits: u64,
    pub y_bits: u64,
    /// When set, the sized unknown is `-y`: the equation reads
    /// `C = A*x - B*Y` with `Y = -y`.
    pub y_negated: bool,
}

impl DiophantineInstance {
    pub fn new(a: BigInt, b: BigInt, c: BigInt, x_bits: u64, y_bits: u64) -> Result<Self> {
        Self::with_sign(a, b, c, x_bits, y_bits, false)
    }

    pub fn with_sign(
        a: BigInt,
        b: BigInt,
        c: BigInt,
        x_bits: u64,
        y_bits: u64,
        y_negated: bool,
    ) -> Result<Self> {
        if !a.is_positive() || !b.is_positive() {
            return Err(DehpError::NonPositiveCoefficient);
        }
        if x_bits == 0 || y_bits == 0 {
            return Err(DehpError::InvalidBitLength);
        }
        let g = a.gcd(&b);
        if !g.is_one() {
            return Err(DehpError::NotCoprime(g));
        }
        Ok(Self {
            a,
            b,
            c,
            x_bits,
            y_bits,
            y_negated,
        })
    }

    /// True when `(x, y)` solves the equation and both unknowns have their
    /// declared sizes (taking the sign convention into account).
    pub fn is_preferred(&self, x: &BigInt, y: &BigInt) -> bool {
        if &self.a * x + &self.b * y != self.c {
            return false;
        }
        let sized_y = if self.y_negated { -y } else { y.clone() };
        has_exact_bits(x, self.x_bits) && has_exact_bits(&sized_y, self.y_bits)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneralSolution {
    pub x0: BigInt,
    pub y0: BigInt,
    /// Step of `x` per unit `t` (equals `B`).
    pub step_x: BigInt,
    /// Step subtracted from `y` per unit `t` (equals `A`).
    pub step_y: BigInt,
}

impl GeneralSolution {
    pub fn at(&self, t: &BigInt) -> (BigInt, BigInt) {
        (&self.x0 + &self.step_x * t, &self.y0 - &self.step_y * t)
    }
}

/// Particular solution with `0 <= x0 < B`, plus the step sizes.
pub fn general_solution(inst: &DiophantineInstance) -> Result<GeneralSolution> {
    let (g, s, _) = ext_gcd(&inst.a, &inst.b);
    if !inst.c.is_multiple_of(&g) {
        return Err(DehpError::NoSolution);
    }
    let x0 = (s * (&inst.c / &g)).mod_floor(&inst.b);
    let y0 = (&inst.c - &inst.a * &x0) / &inst.b;
    Ok(GeneralSolution {
        x0,
        y0,
        step_x: inst.b.clone(),
        step_y: inst.a.clone(),
    })
}

/// Closed range `[t_lo, t_hi]` of parameters that put `x` in its window.
pub fn t_window(inst: &DiophantineInstance, sol: &GeneralSolution) -> (BigInt, BigInt) {
    let lo = ceil_div(&(pow2(inst.x_bits - 1) - &sol.x0), &inst.b);
    let hi = floor_div(&(pow2(inst.x_bits) - 1 - &sol.x0), &inst.b);
    (lo, hi)
}

/// Exact number of `t` with `x0 + B*t` in `[2^(x_bits-1), 2^x_bits - 1]`.
pub fn infeasibility_width(inst: &DiophantineInstance) -> Result<BigInt> {
    let sol = general_solution(inst)?;
    let (lo, hi) = t_window(inst, &sol);
    let width: BigInt = hi - lo + 1;
    Ok(if width.sign() == Sign::Minus {
        BigInt::zero()
    } else {
        width
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WindowScan {
    /// Sized solutions found, in increasing `t`.
    pub candidates: Vec<(BigInt, BigInt)>,
    /// Number of `t` values evaluated.
    pub evaluations: u64,
    /// Set when the cap stopped the scan before the end of the window.
    pub truncated: bool,
}

/// Walks the `t` window from its low end, evaluating at most `cap` values.
pub fn scan_window(inst: &DiophantineInstance, cap: u64) -> Result<WindowScan> {
    let sol = general_solution(inst)?;
    let (lo, hi) = t_window(inst, &sol);
    let mut scan = WindowScan::default();
    let mut t = lo;
    while t <= hi {
        if scan.evaluations == cap {
            scan.truncated = true;
            break;
        }
        scan.evaluations += 1;
        let (x, y) = sol.at(&t);
        if inst.is_preferred(&x, &y) {
            scan.candidates.push((x, y));
        }
        t += 1;
    }
    Ok(scan)
}

/// Recovers every sized solution of a same-size instance by enumerating its
/// (at most two-element) `t` window.
pub fn solve_case1(inst: &DiophantineInstance) -> Result<WindowScan> {
    let width = infeasibility_width(inst)?;
    if width > BigInt::from(CASE1_MAX_WIDTH) {
        return Err(DehpError::WindowTooWide(width));
    }
    scan_window(inst, CASE1_MAX_WIDTH)
}

/// The ciphertext equation `C = X*e1 - Y*e2` as an instance with
/// `A = e1`, `B = e2` and the `y` sign flag set; unknowns are 3n bits.
pub fn ciphertext_instance(pk: &PublicKey, c: &Ciphertext) -> Result<DiophantineInstance> {
    DiophantineInstance::with_sign(
        BigInt::from(pk.e1.clone()),
        BigInt::from(pk.e2.clone()),
        BigInt::from(c.0.clone()),
        3 * pk.n,
        3 * pk.n,
        true,
    )
}

/// An instance built from a known sized solution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlantedInstance {
    pub instance: DiophantineInstance,
    pub x: BigInt,
    pub y: BigInt,
}

fn exact_bits(bits: u64, rng: &mut RandomSource) -> BigInt {
    let lo = pow2(bits - 1);
    let hi: BigInt = pow2(bits) - 1;
    BigInt::from(rng.uniform_inclusive(lo.magnitude(), hi.magnitude()))
}

/// Coprime `n`-bit `A`, `B` and `unknown_bits`-bit `x`, `y`, with
/// `C = A*x + B*y`. Same-size instances use `unknown_bits = n`.
pub fn plant_instance(
    n: u64,
    unknown_bits: u64,
    rng: &mut RandomSource,
) -> Result<PlantedInstance> {
    if n < 2 || unknown_bits == 0 {
        return Err(DehpError::InvalidBitLength);
    }
    let (a, b) = loop {
        let a = exact_bits(n, rng);
        let b = exact_bits(n, rng);
        if a.gcd(&b).is_one() {
            break (a, b);
        }
    };
    let x = exact_bits(unknown_bits, rng);
    let y = exact_bits(unknown_bits, rng);
    let c = &a * &x + &b * &y;
    let instance = DiophantineInstance::new(a, b, c, unknown_bits, unknown_bits)?;
    Ok(PlantedInstance { instance, x, y })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numtheory::RandomSource;
    use crate::scheme::{encrypt_with_nonce, generate_keys, Plaintext};
    use num_bigint::BigUint;

    fn inst(a: i64, b: i64, c: i64, bits: u64) -> DiophantineInstance {
        DiophantineInstance::new(a.into(), b.into(), c.into(), bits, bits).unwrap()
    }

    fn worked_example_instance() -> (DiophantineInstance, BigInt, BigInt) {
        let pk = PublicKey {
            n: 16,
            e1: BigUint::from(5943657286u64),
            e2: BigUint::from(3278054363u64),
        };
        let c = Ciphertext("750300520815394662808057".parse().unwrap());
        let x = BigInt::from(281474976710656u64);
        let y = BigInt::from(281474976666693u64);
        (ciphertext_instance(&pk, &c).unwrap(), x, y)
    }

    #[test]
    fn general_solution_small() {
        // Oracle: exhaustive x0 in [0, 16] with 23*x0 ≡ 794 (mod 17).
        let x0 = (0..17).find(|x| (794 - 23 * x) % 17 == 0).unwrap();
        assert_eq!(x0, 2);
        let sol = general_solution(&inst(23, 17, 794, 5)).unwrap();
        assert_eq!(sol.x0, BigInt::from(2));
        assert_eq!(sol.y0, BigInt::from(44));

        let sol = general_solution(&inst(1, 1, 2, 1)).unwrap();
        assert_eq!((sol.x0, sol.y0), (BigInt::zero(), BigInt::from(2)));
    }

    #[test]
    fn general_solution_identity_over_t() {
        let (instance, _, _) = worked_example_instance();
        let sol = general_solution(&instance).unwrap();
        assert!(sol.x0 >= BigInt::zero() && sol.x0 < instance.b);
        for t in -1000..=1000 {
            let (x, y) = sol.at(&BigInt::from(t));
            assert_eq!(&instance.a * x + &instance.b * y, instance.c);
        }
    }

    #[test]
    fn worked_example_nonce_is_on_the_line() {
        let (instance, x, y) = worked_example_instance();
        let sol = general_solution(&instance).unwrap();
        let t = (&x - &sol.x0) / &sol.step_x;
        assert_eq!(sol.at(&t), (x, -y));
    }

    #[test]
    fn case1_small_examples() {
        // Oracle: all x in [16, 31] with an integral 5-bit y.
        let brute: Vec<(i64, i64)> = (16..32)
            .filter_map(|x| {
                let rest = 794 - 23 * x;
                (rest % 17 == 0).then_some((x, rest / 17))
            })
            .filter(|&(_, y)| (16..32).contains(&y))
            .collect();
        assert_eq!(brute, vec![(19, 21)]);
        let scan = solve_case1(&inst(23, 17, 794, 5)).unwrap();
        assert_eq!(scan.candidates, vec![(BigInt::from(19), BigInt::from(21))]);

        let scan = solve_case1(&inst(23, 17, 23 * 16 + 17 * 16, 5)).unwrap();
        assert!(scan
            .candidates
            .contains(&(BigInt::from(16), BigInt::from(16))));
    }

    #[test]
    fn case1_rejects_wide_windows() {
        let (instance, _, _) = worked_example_instance();
        assert!(matches!(
            solve_case1(&instance),
            Err(DehpError::WindowTooWide(_))
        ));
    }

    #[test]
    fn widths_for_each_sizing() {
        let mut rng = RandomSource::seeded(21);
        for n in [8u64, 16, 32] {
            for _ in 0..20 {
                let (a, b) = loop {
                    let a = BigInt::from(rng.uniform_bits(n));
                    let b = BigInt::from(rng.uniform_bits(n));
                    if a.gcd(&b).is_one() {
                        break (a, b);
                    }
                };
                let x = BigInt::from(rng.uniform_bits(2 * n));
                let y = BigInt::from(rng.uniform_bits(2 * n));
                let c = &a * &x + &b * &y;
                let case2 =
                    DiophantineInstance::new(a.clone(), b.clone(), c, 2 * n, 2 * n).unwrap();
                assert!(infeasibility_width(&case2).unwrap() >= pow2(n - 1));

                let x = BigInt::from(rng.uniform_bits(n));
                let y = BigInt::from(rng.uniform_bits(n));
                let c = &a * &x + &b * &y;
                let case1 = DiophantineInstance::new(a, b, c, n, n).unwrap();
                let w = infeasibility_width(&case1).unwrap();
                assert!(w == BigInt::one() || w == BigInt::from(2));
            }
        }
    }

    #[test]
    fn width_matches_enumeration_on_small_instances() {
        // Oracle: count x in the window with x ≡ x0 (mod B) directly.
        for (a, b, c, bits) in [
            (23i64, 17i64, 794i64, 5u64),
            (7, 5, 300, 7),
            (3, 11, 1000, 8),
        ] {
            let instance = inst(a, b, c, bits);
            let sol = general_solution(&instance).unwrap();
            let x0 = i64::try_from(sol.x0.clone()).unwrap();
            let count = ((1i64 << (bits - 1))..(1i64 << bits))
                .filter(|x| (x - x0).rem_euclid(b) == 0)
                .count();
            assert_eq!(infeasibility_width(&instance).unwrap(), BigInt::from(count));
        }
    }

    #[test]
    fn ciphertext_instances_at_small_n() {
        let mut rng = RandomSource::seeded(8);
        for _ in 0..2 {
            let km = generate_keys(8, &mut rng).unwrap();
            let pk = km.public_key();
            let m = Plaintext::random(8, &mut rng).unwrap();
            let x = rng.uniform_bits(24);
            let (c, nonce) = encrypt_with_nonce(&pk, &m, &x).unwrap();
            let instance = ciphertext_instance(&pk, &c).unwrap();
            assert!(instance.y_negated);
            let xi = BigInt::from(nonce.x.clone());
            assert!(instance.is_preferred(&xi, &-nonce.y.clone()));
            let sol = general_solution(&instance).unwrap();
            let t = (&xi - &sol.x0) / &sol.step_x;
            assert_eq!(sol.at(&t), (xi, -nonce.y));
        }
    }

    #[test]
    fn rejects_bad_instances() {
        assert_eq!(
            DiophantineInstance::new(6.into(), 9.into(), 3.into(), 4, 4),
            Err(DehpError::NotCoprime(3.into()))
        );
        assert_eq!(
            DiophantineInstance::new(0.into(), 9.into(), 3.into(), 4, 4),
            Err(DehpError::NonPositiveCoefficient)
        );
        assert_eq!(
            DiophantineInstance::new(2.into(), 9.into(), 3.into(), 0, 4),
            Err(DehpError::InvalidBitLength)
        );
    }

    #[test]
    fn planted_case1_is_recovered() {
        let mut rng = RandomSource::seeded(40);
        for n in [8u64, 32, 64] {
            for _ in 0..50 {
                let planted = plant_instance(n, n, &mut rng).unwrap();
                let scan = solve_case1(&planted.instance).unwrap();
                assert!(scan.evaluations <= 2);
                assert!(scan
                    .candidates
                    .contains(&(planted.x.clone(), planted.y.clone())));
            }
        }
    }

    #[test]
    fn planted_case2_escapes_capped_scan() {
        let mut rng = RandomSource::seeded(41);
        for _ in 0..3 {
            let planted = plant_instance(40, 80, &mut rng).unwrap();
            assert!(infeasibility_width(&planted.instance).unwrap() >= pow2(39));
            let scan = scan_window(&planted.instance, 1 << 20).unwrap();
            assert!(scan.truncated);
            assert!(!scan
                .candidates
                .contains(&(planted.x.clone(), planted.y.clone())));
        }
    }

    #[test]
    fn scan_respects_cap() {
        let (instance, _, _) = worked_example_instance();
        let scan = scan_window(&instance, 100).unwrap();
        assert_eq!(scan.evaluations, 100);
        assert!(scan.truncated);
    }
}
