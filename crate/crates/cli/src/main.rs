mod error;

use std::fs::{self, OpenOptions};
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dehp_core::attacks::{euclid_experiment, euclidean_probe, factor_break, x_search_report};
use dehp_core::bench::{measure_ratios, run_keygen, run_scaling, samples_csv, summary};
use dehp_core::keyfile::{self, KeyFileError};
use dehp_core::lattice::{
    lattice_attack_sized, lattice_csv, lattice_experiment, ReductionParams, Regime,
};
use dehp_core::scheme::{encrypt_with_nonce, EncryptionNonce};
use dehp_core::{
    decode, decrypt, encode, encrypt, generate_keys, Ciphertext, KeyMaterial, Plaintext,
    PrivateKey, PublicKey, RandomSource,
};
use num_bigint::{BigInt, BigUint};

use crate::error::CliError;

type Result<T> = std::result::Result<T, CliError>;

#[derive(Parser)]
#[command(
    name = "dehp",
    version,
    about = "DEHP/IFP public-key scheme and attack harness"
)]
struct Cli {
    /// RNG seed; without one, system entropy is used.
    #[arg(long, global = true, env = "DEHP_SEED")]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Kv,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a key pair.
    Keygen {
        #[arg(long)]
        n: u64,
        #[arg(long = "pub")]
        pub_path: PathBuf,
        #[arg(long = "priv")]
        priv_path: PathBuf,
        /// Also store q, k1, k2, u, v in the private file and print them.
        #[arg(long)]
        emit_material: bool,
    },
    /// Encrypt bytes from a file or stdin.
    Encrypt {
        #[arg(long = "pub")]
        pub_path: PathBuf,
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long = "out")]
        output: Option<PathBuf>,
    },
    /// Decrypt a ciphertext file to a file or stdout.
    Decrypt {
        #[arg(long = "priv")]
        priv_path: PathBuf,
        #[arg(long = "ct")]
        ct_path: PathBuf,
        #[arg(long = "out")]
        output: Option<PathBuf>,
    },
    /// Run an attack on a ciphertext, or an attack experiment.
    Attack {
        #[command(subcommand)]
        kind: AttackCommand,
    },
    /// Encrypt/decrypt scaling and expansion ratios.
    Bench {
        #[arg(long, value_delimiter = ',', default_values_t = [1024u64, 2048, 4096, 8192])]
        ns: Vec<u64>,
        #[arg(long, default_value_t = 9)]
        trials: usize,
        /// Raw samples as CSV (n, op, trial, nanos).
        #[arg(long)]
        csv_out: Option<PathBuf>,
        #[arg(long, default_value_t = 256)]
        ratio_n: u64,
        #[arg(long, default_value_t = 100)]
        ratio_trials: usize,
        /// Also time key generation (one key per sample).
        #[arg(long)]
        keygen: bool,
    },
    /// Replay the 16-bit worked example and print a check table.
    Example,
}

#[derive(Args)]
struct Target {
    #[arg(long = "pub")]
    pub_path: PathBuf,
    #[arg(long = "ct")]
    ct_path: PathBuf,
}

#[derive(Args)]
struct Experiment {
    #[arg(long)]
    n: u64,
    #[arg(long, default_value_t = 50)]
    trials: usize,
}

#[derive(Subcommand)]
enum AttackCommand {
    /// Factor e1 - e2 and decrypt.
    Factor {
        #[command(flatten)]
        target: Target,
        #[arg(long, default_value_t = 10_000_000)]
        budget: u64,
    },
    /// Check floor(C/e1) and floor(C/e2) against a known nonce, or run an
    /// experiment over fresh instances when no target is given.
    Euclid {
        #[arg(long = "pub", requires_all = ["ct_path", "x", "y"])]
        pub_path: Option<PathBuf>,
        #[arg(long = "ct")]
        ct_path: Option<PathBuf>,
        #[arg(long)]
        x: Option<BigUint>,
        #[arg(long, allow_hyphen_values = true)]
        y: Option<BigInt>,
        #[arg(long, conflicts_with = "pub_path")]
        n: Option<u64>,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
    },
    /// LLL on the ciphertext lattice, or the regime experiment with --n.
    Lattice {
        #[arg(long = "pub", requires = "ct_path")]
        pub_path: Option<PathBuf>,
        #[arg(long = "ct")]
        ct_path: Option<PathBuf>,
        /// Nonce size to accept; defaults to 3n.
        #[arg(long)]
        nonce_bits: Option<u64>,
        #[arg(long, conflicts_with = "pub_path")]
        n: Option<u64>,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, value_enum, default_value_t = RegimeArg::Correct)]
        regime: RegimeArg,
    },
    /// Count the nonce candidates X0 + e2*j in the 3n-bit window.
    DehpWidth {
        #[command(flatten)]
        target: Target,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum RegimeArg {
    Correct,
    Weakened,
}

impl From<RegimeArg> for Regime {
    fn from(r: RegimeArg) -> Self {
        match r {
            RegimeArg::Correct => Regime::Correct,
            RegimeArg::Weakened => Regime::Weakened,
        }
    }
}

/// Ordered key/value output rendered per `--format`.
struct Record(Vec<(String, String)>);

impl Record {
    fn new() -> Self {
        Record(Vec::new())
    }

    fn push(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        self.0.push((key.into(), value.to_string()));
        self
    }

    fn render(&self, format: Format) -> String {
        match format {
            Format::Text => self.0.iter().map(|(k, v)| format!("{k}: {v}\n")).collect(),
            Format::Kv => self.0.iter().map(|(k, v)| format!("{k}={v}\n")).collect(),
            Format::Csv => {
                let keys: Vec<_> = self.0.iter().map(|(k, _)| k.as_str()).collect();
                let values: Vec<_> = self.0.iter().map(|(_, v)| csv_field(v)).collect();
                format!("{}\n{}\n", keys.join(","), values.join(","))
            }
        }
    }
}

fn csv_field(v: &str) -> String {
    if v.contains([',', '"', '\n']) {
        format!("\"{}\"", v.replace('"', "\"\""))
    } else {
        v.to_string()
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, data: &[u8], secret: bool) -> Result<()> {
    let io_err = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut opts = OpenOptions::new();
    opts.write(true).create(true).truncate(true);
    #[cfg(unix)]
    if secret {
        use std::os::unix::fs::{OpenOptionsExt, PermissionsExt};
        opts.mode(0o600);
        // An existing file keeps its old mode through open(); tighten it.
        if path.exists() {
            fs::set_permissions(path, fs::Permissions::from_mode(0o600)).map_err(io_err)?;
        }
    }
    #[cfg(not(unix))]
    let _ = secret;
    opts.open(path)
        .and_then(|mut f| f.write_all(data))
        .map_err(io_err)
}

fn parse_file<T>(
    path: &Path,
    parse: impl FnOnce(&str) -> std::result::Result<T, KeyFileError>,
) -> Result<T> {
    parse(&read_text(path)?).map_err(|source| CliError::KeyFile {
        path: path.to_path_buf(),
        source,
    })
}

fn load_public(path: &Path) -> Result<PublicKey> {
    parse_file(path, keyfile::parse_public)
}

fn load_private(path: &Path) -> Result<PrivateKey> {
    parse_file(path, keyfile::parse_private)
}

fn load_ciphertext(path: &Path) -> Result<Ciphertext> {
    parse_file(path, keyfile::parse_ciphertext)
}

fn distinct(a: &Path, b: &Path) -> Result<()> {
    let same = match (fs::canonicalize(a), fs::canonicalize(b)) {
        (Ok(x), Ok(y)) => x == y,
        _ => a == b,
    };
    if same {
        return Err(CliError::usage(format!(
            "input and output are the same path: {}",
            a.display()
        )));
    }
    Ok(())
}

fn cmd_keygen(
    n: u64,
    pub_path: &Path,
    priv_path: &Path,
    emit_material: bool,
    rng: &mut RandomSource,
    format: Format,
) -> Result<String> {
    distinct(pub_path, priv_path)?;
    let km = generate_keys(n, rng)?;
    let pk = km.public_key();
    write_file(pub_path, keyfile::serialize_public(&pk).as_bytes(), false)?;
    let private = if emit_material {
        keyfile::serialize_private_with_material(&km)
    } else {
        keyfile::serialize_private(&km.private_key())
    };
    write_file(priv_path, private.as_bytes(), true)?;

    let mut out = Record::new();
    out.push("n", n)
        .push("e1", &pk.e1)
        .push("e2", &pk.e2)
        .push("public", pub_path.display())
        .push("private", priv_path.display());
    if emit_material {
        material_fields(&km, &mut out);
    }
    Ok(out.render(format))
}

fn material_fields(km: &KeyMaterial, out: &mut Record) {
    out.push("p", &km.p)
        .push("q", &km.q)
        .push("k1", &km.k1)
        .push("k2", &km.k2)
        .push("u", &km.u)
        .push("v", &km.v)
        .push("d", &km.d);
}

fn read_input(path: Option<&Path>) -> Result<Vec<u8>> {
    match path {
        Some(p) => fs::read(p).map_err(|source| CliError::Io {
            path: p.to_path_buf(),
            source,
        }),
        None => {
            let mut buf = Vec::new();
            io::stdin()
                .read_to_end(&mut buf)
                .map_err(|source| CliError::Io {
                    path: "<stdin>".into(),
                    source,
                })?;
            Ok(buf)
        }
    }
}

fn write_output(path: Option<&Path>, data: &[u8]) -> Result<()> {
    match path {
        Some(p) => write_file(p, data, false),
        None => io::stdout().write_all(data).map_err(|source| CliError::Io {
            path: "<stdout>".into(),
            source,
        }),
    }
}

fn cmd_encrypt(
    pub_path: &Path,
    input: Option<&Path>,
    output: Option<&Path>,
    rng: &mut RandomSource,
) -> Result<()> {
    if let (Some(i), Some(o)) = (input, output) {
        distinct(i, o)?;
    }
    let pk = load_public(pub_path)?;
    let payload = read_input(input)?;
    let c = encrypt(&pk, &encode(&payload, pk.n)?, rng)?;
    write_output(output, keyfile::serialize_ciphertext(&c).as_bytes())
}

fn cmd_decrypt(priv_path: &Path, ct_path: &Path, output: Option<&Path>) -> Result<()> {
    if let Some(o) = output {
        distinct(ct_path, o)?;
    }
    let sk = load_private(priv_path)?;
    let c = load_ciphertext(ct_path)?;
    let payload = decode(&decrypt(&sk, &c)?)?;
    write_output(output, &payload)
}

fn report_record(report: &dehp_core::attacks::AttackReport) -> Record {
    let mut out = Record::new();
    for (k, v) in report.fields() {
        out.push(k, v);
    }
    for note in &report.notes {
        match note.split_once('=') {
            Some((k, v)) => out.push(k, v),
            None => out.push("note", note),
        };
    }
    out
}

fn cmd_attack(kind: AttackCommand, rng: &mut RandomSource, format: Format) -> Result<String> {
    match kind {
        AttackCommand::Factor { target, budget } => {
            if budget == 0 {
                return Err(CliError::usage("--budget must be positive"));
            }
            let pk = load_public(&target.pub_path)?;
            let c = load_ciphertext(&target.ct_path)?;
            Ok(report_record(&factor_break(&pk, &c, budget)).render(format))
        }
        AttackCommand::DehpWidth { target } => {
            let pk = load_public(&target.pub_path)?;
            let c = load_ciphertext(&target.ct_path)?;
            Ok(report_record(&x_search_report(&pk, &c)).render(format))
        }
        AttackCommand::Euclid {
            pub_path,
            ct_path,
            x,
            y,
            n,
            trials,
        } => {
            if let (Some(pp), Some(cp), Some(x), Some(y)) = (pub_path, ct_path, x, y) {
                let pk = load_public(&pp)?;
                let c = load_ciphertext(&cp)?;
                let report = euclidean_probe(&pk, &c, &EncryptionNonce { x, y });
                return Ok(report_record(&report).render(format));
            }
            let n = n.ok_or_else(|| CliError::usage("give --pub/--ct/--x/--y or --n"))?;
            let tally = euclid_experiment(n, trials, rng)?;
            let mut out = Record::new();
            out.push("attack", "euclid")
                .push("n", n)
                .push("trials", tally.trials)
                .push("successes", tally.successes);
            Ok(out.render(format))
        }
        AttackCommand::Lattice {
            pub_path,
            ct_path,
            nonce_bits,
            n,
            trials,
            regime,
        } => {
            let params = ReductionParams::default();
            if let (Some(pp), Some(cp)) = (pub_path, ct_path) {
                let pk = load_public(&pp)?;
                let c = load_ciphertext(&cp)?;
                let bits = nonce_bits.unwrap_or(3 * pk.n);
                let report = lattice_attack_sized(&pk, &c, &params, bits);
                return Ok(report_record(&report).render(format));
            }
            let n = n.ok_or_else(|| CliError::usage("give --pub/--ct or --n"))?;
            if n < dehp_core::scheme::MIN_BITS {
                return Err(dehp_core::SchemeError::InvalidSecurityParameter(n).into());
            }
            let regime = Regime::from(regime);
            let results = lattice_experiment(n, regime, trials, rng)?;
            if format == Format::Csv {
                return Ok(lattice_csv(&results));
            }
            let successes = results.iter().filter(|t| t.success).count();
            let mut out = Record::new();
            out.push("attack", "lattice")
                .push("n", n)
                .push("regime", regime.name())
                .push("trials", trials)
                .push("successes", successes);
            Ok(out.render(format))
        }
    }
}

struct BenchArgs {
    ns: Vec<u64>,
    trials: usize,
    csv_out: Option<PathBuf>,
    ratio_n: u64,
    ratio_trials: usize,
    keygen: bool,
}

fn cmd_bench(args: BenchArgs, seed: u64, format: Format) -> Result<String> {
    if args.ns.is_empty() || args.ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::usage("--ns must be strictly increasing"));
    }
    if args.ns[0] < 64 || args.ratio_n < 64 {
        return Err(CliError::usage("benchmark sizes must be at least 64"));
    }
    let mut records = run_scaling(&args.ns, args.trials, seed)?;
    if args.keygen {
        records.extend(run_keygen(&args.ns, args.trials, seed)?);
    }
    let ratios = measure_ratios(args.ratio_n, args.ratio_trials, seed)?;
    let csv = samples_csv(&records);
    if let Some(path) = &args.csv_out {
        write_file(path, csv.as_bytes(), false)?;
    }
    Ok(match format {
        Format::Csv if args.csv_out.is_none() => csv,
        _ => summary(&records, Some((args.ratio_n, &ratios))),
    })
}

fn cmd_example(format: Format) -> (String, bool) {
    let big = |s: &str| s.parse::<BigUint>().unwrap();
    let km = KeyMaterial::from_parts(
        16,
        big("65287"),
        big("40829"),
        big("46381"),
        big("3096817651"),
    )
    .expect("worked example material is valid");
    let pk = km.public_key();
    let m = Plaintext::new(big("43963"), 16).expect("in window");
    let (c, nonce) = encrypt_with_nonce(&pk, &m, &big("281474976710656")).expect("valid nonce");
    let back = decrypt(&km.private_key(), &c).map(|p| p.value().to_string());
    let factored = factor_break(&pk, &c, 10_000_000);

    let rows: Vec<(&str, String, String)> = vec![
        ("k2", "-2776".into(), km.k2.to_string()),
        ("v", "59380".into(), km.v.to_string()),
        ("e1", "5943657286".into(), pk.e1.to_string()),
        ("e2", "3278054363".into(), pk.e2.to_string()),
        ("d", "49913".into(), km.d.to_string()),
        ("Y", "281474976666693".into(), nonce.y.to_string()),
        (
            "C",
            "750300520815394662808057".into(),
            c.value().to_string(),
        ),
        ("M", "43963".into(), back.unwrap_or_else(|e| e.to_string())),
        ("e1-e2", "2665602923".into(), (&pk.e1 - &pk.e2).to_string()),
        (
            "factor M",
            "43963".into(),
            factored
                .recovered
                .m
                .map_or("none".into(), |m| m.to_string()),
        ),
    ];
    let all = rows.iter().all(|(_, e, a)| e == a);
    let text = match format {
        Format::Text => {
            let mut s = format!(
                "{:<9} {:<26} {:<26} result\n",
                "value", "expected", "actual"
            );
            for (name, expected, actual) in &rows {
                let verdict = if expected == actual { "PASS" } else { "FAIL" };
                s.push_str(&format!(
                    "{name:<9} {expected:<26} {actual:<26} {verdict}\n"
                ));
            }
            s
        }
        Format::Kv => rows
            .iter()
            .map(|(n, e, a)| format!("{n}={a} {}\n", if e == a { "PASS" } else { "FAIL" }))
            .collect(),
        Format::Csv => {
            let mut s = String::from("value,expected,actual,pass\n");
            for (n, e, a) in &rows {
                s.push_str(&format!("{n},{e},{a},{}\n", e == a));
            }
            s
        }
    };
    (text, all)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let mut rng = RandomSource::from_optional_seed(cli.seed);
    let format = cli.format;
    let text = match cli.command {
        Command::Keygen {
            n,
            pub_path,
            priv_path,
            emit_material,
        } => cmd_keygen(n, &pub_path, &priv_path, emit_material, &mut rng, format)?,
        Command::Encrypt {
            pub_path,
            input,
            output,
        } => {
            cmd_encrypt(&pub_path, input.as_deref(), output.as_deref(), &mut rng)?;
            return Ok(ExitCode::SUCCESS);
        }
        Command::Decrypt {
            priv_path,
            ct_path,
            output,
        } => {
            cmd_decrypt(&priv_path, &ct_path, output.as_deref())?;
            return Ok(ExitCode::SUCCESS);
        }
        Command::Attack { kind } => cmd_attack(kind, &mut rng, format)?,
        Command::Bench {
            ns,
            trials,
            csv_out,
            ratio_n,
            ratio_trials,
            keygen,
        } => {
            let args = BenchArgs {
                ns,
                trials,
                csv_out,
                ratio_n,
                ratio_trials,
                keygen,
            };
            cmd_bench(args, cli.seed.unwrap_or(1), format)?
        }
        Command::Example => {
            let (text, ok) = cmd_example(format);
            print!("{text}");
            return Ok(if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            });
        }
    };
    print!("{text}");
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.into()
        }
    }
}
