//! Acceptance criteria, run in order. Prints one line per criterion and exits
//! non-zero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use dehp_core::attacks::{euclid_experiment, factor_break, x_search_width};
use dehp_core::bench::{fit_slope, measure_ratios, run_scaling, BenchOp};
use dehp_core::dehp::{infeasibility_width, plant_instance, solve_case1};
use dehp_core::lattice::{
    determinant, is_size_reduced, lattice_experiment, lll_reduce_with_transform, satisfies_lovasz,
    LatticeBasis, ReductionParams, Regime,
};
use dehp_core::numtheory::pow2;
use dehp_core::scheme::{encrypt_with_nonce, max_payload_len};
use dehp_core::{
    decode, decrypt, encode, encrypt, generate_keys, Ciphertext, KeyMaterial, Plaintext,
    RandomSource,
};
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn big(s: &str) -> BigUint {
    s.parse().unwrap()
}

fn golden_material() -> KeyMaterial {
    KeyMaterial::from_parts(
        16,
        big("65287"),
        big("40829"),
        big("46381"),
        big("3096817651"),
    )
    .unwrap()
}

fn golden_replay() -> Outcome {
    let km = golden_material();
    let pk = km.public_key();
    let m = Plaintext::new(big("43963"), 16).unwrap();
    let (c, nonce) = encrypt_with_nonce(&pk, &m, &big("281474976710656")).unwrap();
    let back = decrypt(&km.private_key(), &c).unwrap();
    let checks = [
        ("k2", km.k2 == BigInt::from(-2776)),
        ("v", km.v == big("59380")),
        ("e1", pk.e1 == big("5943657286")),
        ("e2", pk.e2 == big("3278054363")),
        ("d", km.d == big("49913")),
        ("Y", nonce.y == BigInt::from(281474976666693u64)),
        ("C", c.0 == big("750300520815394662808057")),
        ("M", back.value() == &big("43963")),
    ];
    let bad: Vec<_> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    outcome(bad.is_empty(), format!("8 values, mismatched: {bad:?}"))
}

fn round_trip() -> Outcome {
    let mut rng = RandomSource::seeded(2);
    let mut failures = 0;
    for n in [16u64, 32, 64, 256] {
        let max = max_payload_len(n);
        for _ in 0..1000 {
            let len = (rng.next_u64_value() % (max as u64 + 1)) as usize;
            let payload: Vec<u8> = (0..len).map(|_| rng.next_u64_value() as u8).collect();
            let km = generate_keys(n, &mut rng).unwrap();
            let c = encrypt(&km.public_key(), &encode(&payload, n).unwrap(), &mut rng).unwrap();
            let ok = decrypt(&km.private_key(), &c)
                .and_then(|m| decode(&m))
                .is_ok_and(|b| b == payload);
            failures += usize::from(!ok);
        }
    }
    outcome(failures == 0, format!("4000 trials, {failures} failures"))
}

fn key_identity() -> Outcome {
    let mut rng = RandomSource::seeded(3);
    let bad = (0..1000)
        .filter(|_| {
            let km = generate_keys(64, &mut rng).unwrap();
            let pk = km.public_key();
            &pk.e1 - &pk.e2 != &km.p * &km.q
        })
        .count();
    let km = golden_material();
    let pk = km.public_key();
    let n_worked = big("2665602923");
    let golden = pk.e1 - pk.e2 == n_worked && km.p * km.q == n_worked;
    outcome(
        bad == 0 && golden,
        format!("1000 keys at n=64, {bad} violations; golden identity {golden}"),
    )
}

fn factoring_break() -> Outcome {
    let mut rng = RandomSource::seeded(4);
    let mut detail = Vec::new();
    let mut pass = true;
    for n in [16u64, 24, 32] {
        let mut hits = 0;
        for _ in 0..50 {
            let km = generate_keys(n, &mut rng).unwrap();
            let pk = km.public_key();
            let m = Plaintext::random(n, &mut rng).unwrap();
            let c = encrypt(&pk, &m, &mut rng).unwrap();
            let r = factor_break(&pk, &c, 10_000_000);
            if r.success && r.recovered.m.as_ref() == Some(m.value()) {
                hits += 1;
            }
        }
        pass &= hits == 50;
        detail.push(format!("n={n}: {hits}/50"));
    }
    let golden = factor_break(
        &golden_material().public_key(),
        &Ciphertext(big("750300520815394662808057")),
        10_000_000,
    );
    let golden_ok = golden.recovered.m == Some(big("43963"));
    outcome(
        pass && golden_ok,
        format!("{}; worked example M=43963 {golden_ok}", detail.join(", ")),
    )
}

fn euclidean_probe() -> Outcome {
    let tally = euclid_experiment(32, 1000, &mut RandomSource::seeded(5)).unwrap();
    outcome(
        tally.successes == 0,
        format!(
            "{} successes in {} trials at n=32",
            tally.successes, tally.trials
        ),
    )
}

fn dehp_widths() -> Outcome {
    let mut rng = RandomSource::seeded(6);
    let n = 32;
    let case1_ok = (0..100).all(|_| {
        let w = infeasibility_width(&plant_instance(n, n, &mut rng).unwrap().instance).unwrap();
        w == BigInt::one() || w == BigInt::from(2)
    });
    let case2_ok = (0..100).all(|_| {
        let inst = plant_instance(n, 2 * n, &mut rng).unwrap().instance;
        infeasibility_width(&inst).unwrap() >= pow2(n - 1)
    });
    let ct_ok = (0..100).all(|_| {
        let km = generate_keys(n, &mut rng).unwrap();
        let pk = km.public_key();
        let c = encrypt(&pk, &Plaintext::random(n, &mut rng).unwrap(), &mut rng).unwrap();
        x_search_width(&pk, &c).unwrap() >= pow2(n - 1)
    });
    outcome(
        case1_ok && case2_ok && ct_ok,
        format!(
            "case1 in {{1,2}} {case1_ok}; case2 >= 2^31 {case2_ok}; ciphertext >= 2^31 {ct_ok}"
        ),
    )
}

fn case1_solver() -> Outcome {
    let mut rng = RandomSource::seeded(7);
    let mut recovered = 0;
    let mut max_evals = 0;
    for _ in 0..1000 {
        let planted = plant_instance(32, 32, &mut rng).unwrap();
        let scan = solve_case1(&planted.instance).unwrap();
        max_evals = max_evals.max(scan.evaluations);
        if scan.evaluations <= 3 && scan.candidates.contains(&(planted.x, planted.y)) {
            recovered += 1;
        }
    }
    outcome(
        recovered == 1000,
        format!("{recovered}/1000 recovered, max {max_evals} evaluations"),
    )
}

fn shortest_in_box(basis: &LatticeBasis, r: i64) -> BigInt {
    let rows = basis.rows();
    let mut best: Option<BigInt> = None;
    for a in -r..=r {
        for b in -r..=r {
            for c in -r..=r {
                if a == 0 && b == 0 && c == 0 {
                    continue;
                }
                let sq: BigInt = (0..3)
                    .map(|col| {
                        let v = BigInt::from(a) * &rows[0][col]
                            + BigInt::from(b) * &rows[1][col]
                            + BigInt::from(c) * &rows[2][col];
                        &v * &v
                    })
                    .sum();
                if best.as_ref().is_none_or(|x| &sq < x) {
                    best = Some(sq);
                }
            }
        }
    }
    best.unwrap()
}

fn lll_correctness() -> Outcome {
    let mut rng = RandomSource::seeded(8);
    let params = ReductionParams::default();
    let (mut done, mut bad) = (0, 0);
    while done < 200 {
        let rows: Vec<Vec<BigInt>> = (0..3)
            .map(|_| {
                (0..3)
                    .map(|_| BigInt::from(rng.next_u64_value() % 2001) - 1000)
                    .collect()
            })
            .collect();
        let Ok(basis) = LatticeBasis::new(rows) else {
            continue;
        };
        done += 1;
        let red = lll_reduce_with_transform(&basis, &params);
        let shortest = red.basis.squared_norms().into_iter().min().unwrap();
        // Factor 2 in norm is factor 4 in squared norm.
        let ok = is_size_reduced(&red.basis)
            && satisfies_lovasz(&red.basis, &params)
            && determinant(red.transform.clone()).abs().is_one()
            && shortest <= shortest_in_box(&basis, 8) * 4;
        bad += usize::from(!ok);
    }
    outcome(bad == 0, format!("{done} bases, {bad} violations"))
}

fn lattice_split() -> Outcome {
    let mut rng = RandomSource::seeded(9);
    let mut detail = Vec::new();
    let mut pass = true;
    for n in [16u64, 24, 32] {
        let correct = lattice_experiment(n, Regime::Correct, 50, &mut rng).unwrap();
        let weak = lattice_experiment(n, Regime::Weakened, 50, &mut rng).unwrap();
        let c = correct.iter().filter(|t| t.success).count();
        let w = weak.iter().filter(|t| t.success && t.exact).count();
        pass &= c == 0 && w >= 45;
        detail.push(format!("n={n}: correct {c}/50, weakened {w}/50"));
    }
    outcome(pass, detail.join(", "))
}

fn ratios() -> Outcome {
    let r = measure_ratios(256, 100, 10).unwrap();
    let four = BigRational::from_integer(4.into());
    let lo = BigRational::new(49.into(), 10.into());
    let hi = BigRational::new(51.into(), 10.into());
    let me_ok = r.me == four;
    let mc_ok = r.mc >= lo && r.mc <= hi;
    let golden_bits = big("750300520815394662808057").bits();
    outcome(
        me_ok && mc_ok && golden_bits == 80,
        format!(
            "M:|E| = 1:{}, M:C = 1:{:.4}, worked example |C| = {golden_bits}",
            r.me,
            r.mc_f64()
        ),
    )
}

fn scaling() -> Outcome {
    let records = run_scaling(&[1024, 2048, 4096, 8192], 9, 1).unwrap();
    let enc = fit_slope(&records, BenchOp::Encrypt).unwrap();
    let dec = fit_slope(&records, BenchOp::Decrypt).unwrap();
    let ok = |s: f64| (0.8..=2.2).contains(&s);
    outcome(
        ok(enc) && ok(dec),
        format!("slopes encrypt {enc:.3}, decrypt {dec:.3}"),
    )
}

type Criterion = (u32, &'static str, fn() -> Outcome, Option<Duration>);

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        (
            1,
            "golden replay",
            golden_replay,
            Some(Duration::from_secs(1)),
        ),
        (2, "round trip", round_trip, Some(Duration::from_secs(60))),
        (3, "key identity", key_identity, None),
        (
            4,
            "factoring break",
            factoring_break,
            Some(Duration::from_secs(120)),
        ),
        (5, "euclidean probe", euclidean_probe, None),
        (6, "dehp widths", dehp_widths, None),
        (7, "case-1 solver", case1_solver, None),
        (8, "lll correctness", lll_correctness, None),
        (
            9,
            "lattice regime split",
            lattice_split,
            Some(Duration::from_secs(120)),
        ),
        (10, "ratios", ratios, None),
        (11, "scaling", scaling, Some(Duration::from_secs(180))),
    ];
    let filter = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (id, name, run, limit) in criteria {
        if filter.as_deref().is_some_and(|f| !name.contains(f)) {
            continue;
        }
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let in_time = limit.is_none_or(|l| elapsed < l);
        let pass = result.pass && in_time;
        failed += usize::from(!pass);
        let limit_text = limit.map_or(String::new(), |l| format!(" (limit {}s)", l.as_secs()));
        println!(
            "criterion {id:>2} {name:<22} {} {:.2}s{limit_text}: {}",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            result.detail
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
