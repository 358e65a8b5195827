//! Line-oriented text formats for keys and ciphertexts.
//!
//! ```text
//! DEHP-IFP PUBLIC v1        DEHP-IFP PRIVATE v1       DEHP-IFP CT v1
//! n=<dec>                   n=<dec>                   c=<dec>
//! e1=<dec>                  p=<dec>
//! e2=<dec>                  d=<dec>
//! ```
//!
//! A private file may carry a trailing `DEHP-IFP MATERIAL v1` block with
//! `q`, `k1`, `k2`, `u` and `v` for the attack harness.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use thiserror::Error;

use crate::scheme::{Ciphertext, KeyMaterial, PrivateKey, PublicKey};

const MAGIC: &str = "DEHP-IFP";
const VERSION: &str = "v1";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KeyFileError {
    #[error("missing or malformed header, expected `{MAGIC} {0} {VERSION}`")]
    BadHeader(&'static str),
    #[error("unsupported {kind} version `{version}`")]
    UnsupportedVersion { kind: &'static str, version: String },
    #[error("missing field `{0}`")]
    MissingField(&'static str),
    #[error("duplicate field `{0}`")]
    DuplicateField(String),
    #[error("unknown field `{0}`")]
    UnknownField(String),
    #[error("malformed line {line}: `{text}`")]
    MalformedLine { line: usize, text: String },
    #[error("field `{field}` is not a valid integer")]
    BadInteger { field: &'static str },
    #[error("material block does not match the private key")]
    InconsistentMaterial,
}

pub type Result<T> = std::result::Result<T, KeyFileError>;

/// One `DEHP-IFP <KIND> v1` section with its `key=value` lines.
struct Section {
    kind: String,
    fields: HashMap<String, String>,
}

impl Section {
    fn take<T: FromStr>(&mut self, field: &'static str) -> Result<T> {
        let raw = self
            .fields
            .remove(field)
            .ok_or(KeyFileError::MissingField(field))?;
        raw.parse().map_err(|_| KeyFileError::BadInteger { field })
    }

    fn finish(self) -> Result<()> {
        match self.fields.into_keys().min() {
            Some(extra) => Err(KeyFileError::UnknownField(extra)),
            None => Ok(()),
        }
    }
}

fn parse_sections(text: &str, expected: &'static str) -> Result<Vec<Section>> {
    let mut sections: Vec<Section> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix(MAGIC) {
            let mut parts = rest.split_whitespace();
            let (kind, version) = match (parts.next(), parts.next(), parts.next()) {
                (Some(k), Some(v), None) => (k, v),
                _ => return Err(KeyFileError::BadHeader(expected)),
            };
            if version != VERSION {
                let kind = if sections.is_empty() {
                    expected
                } else {
                    "MATERIAL"
                };
                return Err(KeyFileError::UnsupportedVersion {
                    kind,
                    version: version.to_string(),
                });
            }
            sections.push(Section {
                kind: kind.to_string(),
                fields: HashMap::new(),
            });
            continue;
        }
        let section = sections
            .last_mut()
            .ok_or(KeyFileError::BadHeader(expected))?;
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| KeyFileError::MalformedLine {
                line: idx + 1,
                text: raw.to_string(),
            })?;
        let key = key.trim().to_string();
        if section.fields.contains_key(&key) {
            return Err(KeyFileError::DuplicateField(key));
        }
        section.fields.insert(key, value.trim().to_string());
    }
    match sections.first() {
        Some(first) if first.kind == expected => Ok(sections),
        _ => Err(KeyFileError::BadHeader(expected)),
    }
}

fn single_section(text: &str, kind: &'static str) -> Result<Section> {
    let mut sections = parse_sections(text, kind)?;
    if sections.len() != 1 {
        return Err(KeyFileError::BadHeader(kind));
    }
    Ok(sections.remove(0))
}

pub fn serialize_public(pk: &PublicKey) -> String {
    format!(
        "{MAGIC} PUBLIC {VERSION}\nn={}\ne1={}\ne2={}\n",
        pk.n, pk.e1, pk.e2
    )
}

pub fn parse_public(text: &str) -> Result<PublicKey> {
    let mut s = single_section(text, "PUBLIC")?;
    let pk = PublicKey {
        n: s.take("n")?,
        e1: s.take("e1")?,
        e2: s.take("e2")?,
    };
    s.finish()?;
    Ok(pk)
}

pub fn serialize_private(sk: &PrivateKey) -> String {
    format!(
        "{MAGIC} PRIVATE {VERSION}\nn={}\np={}\nd={}\n",
        sk.n, sk.p, sk.d
    )
}

/// Private key followed by the material block.
pub fn serialize_private_with_material(km: &KeyMaterial) -> String {
    let mut out = serialize_private(&km.private_key());
    let _ = write!(
        out,
        "{MAGIC} MATERIAL {VERSION}\nq={}\nk1={}\nk2={}\nu={}\nv={}\n",
        km.q, km.k1, km.k2, km.u, km.v
    );
    out
}

fn parse_private_section(s: &mut Section) -> Result<PrivateKey> {
    Ok(PrivateKey {
        n: s.take("n")?,
        p: s.take("p")?,
        d: s.take("d")?,
    })
}

/// Parses a private key, ignoring any material block that follows it.
pub fn parse_private(text: &str) -> Result<PrivateKey> {
    parse_private_and_material(text).map(|(sk, _)| sk)
}

/// Parses a private key and, when present, its material block.
pub fn parse_private_and_material(text: &str) -> Result<(PrivateKey, Option<KeyMaterial>)> {
    let mut sections = parse_sections(text, "PRIVATE")?.into_iter();
    let mut head = sections.next().expect("first section checked");
    let sk = parse_private_section(&mut head)?;
    head.finish()?;

    let material = match sections.next() {
        None => None,
        Some(mut m) if m.kind == "MATERIAL" => {
            let q: BigUint = m.take("q")?;
            let k1: BigUint = m.take("k1")?;
            let k2: BigInt = m.take("k2")?;
            let u: BigUint = m.take("u")?;
            let v: BigUint = m.take("v")?;
            m.finish()?;
            let km = KeyMaterial::from_parts(sk.n, sk.p.clone(), q, k1, u)
                .map_err(|_| KeyFileError::InconsistentMaterial)?;
            if km.k2 != k2 || km.v != v || km.d != sk.d {
                return Err(KeyFileError::InconsistentMaterial);
            }
            Some(km)
        }
        Some(_) => return Err(KeyFileError::BadHeader("MATERIAL")),
    };
    if sections.next().is_some() {
        return Err(KeyFileError::BadHeader("PRIVATE"));
    }
    Ok((sk, material))
}

pub fn serialize_ciphertext(c: &Ciphertext) -> String {
    format!("{MAGIC} CT {VERSION}\nc={}\n", c.0)
}

pub fn parse_ciphertext(text: &str) -> Result<Ciphertext> {
    let mut s = single_section(text, "CT")?;
    let c = Ciphertext(s.take("c")?);
    s.finish()?;
    Ok(c)
}
