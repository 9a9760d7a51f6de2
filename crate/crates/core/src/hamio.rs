//! Hamiltonian fixture files.
//!
//! One JSON document per geometry point (see `docs/hamiltonian-schema.md`).
//! Pauli words are read qubit 0 first, and the constant energy (nuclear
//! repulsion plus frozen core) is already folded into the identity term;
//! `core_energy` is informational.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::oracle::commutator_norm;
use crate::pauli::{PauliString, PauliSum, DENSE_LIMIT};
use crate::spinops::{number_operators, s_squared, spin_component, Axis, SpinSector};

pub const SCHEMA_VERSION: u32 = 1;
/// Commutator norm above which a symmetry counts as broken.
pub const PHYSICS_TOL: f64 = 1e-8;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeometryMode {
    Bond,
    SymStretch,
    AntisymStretch,
}

impl GeometryMode {
    pub fn as_str(self) -> &'static str {
        match self {
            GeometryMode::Bond => "bond",
            GeometryMode::SymStretch => "sym-stretch",
            GeometryMode::AntisymStretch => "antisym-stretch",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [GeometryMode::Bond, GeometryMode::SymStretch, GeometryMode::AntisymStretch]
            .into_iter()
            .find(|m| m.as_str() == s)
    }
}

impl fmt::Display for GeometryMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `R(λ) = R0 + λ·ΔR`, lengths in Å.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    pub mode: GeometryMode,
    pub r0: f64,
    pub dr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermRecord {
    pub coefficient: f64,
    pub word: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianRecord {
    pub schema_version: u32,
    pub molecule: String,
    pub geometry_lambda: f64,
    pub geometry_spec: GeometrySpec,
    pub basis: String,
    pub n_spatial: usize,
    pub n_alpha: usize,
    pub n_beta: usize,
    pub core_energy: f64,
    pub terms: Vec<TermRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<Value>,
    /// Unknown top-level fields, kept only by lenient loads.
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum LoadMode {
    /// Unknown top-level fields are an error.
    Strict,
    /// Unknown top-level fields are kept in `extra` and written back on save.
    Lenient,
}

impl HamiltonianRecord {
    pub fn n_qubits(&self) -> usize {
        2 * self.n_spatial
    }

    pub fn n_elec(&self) -> usize {
        self.n_alpha + self.n_beta
    }

    pub fn hamiltonian(&self) -> Result<PauliSum> {
        PauliSum::from_words(
            self.n_qubits(),
            self.terms.iter().map(|t| (t.coefficient, t.word.as_str())),
        )
    }

    /// The declared electron counts with the lowest compatible spin.
    pub fn sector(&self) -> Result<SpinSector> {
        SpinSector::new(self.n_alpha, self.n_beta)
    }

    pub fn key(&self) -> ScanKey {
        ScanKey {
            molecule: self.molecule.to_lowercase(),
            mode: self.geometry_spec.mode,
            lambda_centi: (self.geometry_lambda * 100.0).round() as i64,
        }
    }

    pub fn file_name(&self) -> String {
        self.key().file_name()
    }

    /// Replaces `terms` by the canonical form of `h`.
    pub fn set_hamiltonian(&mut self, h: &PauliSum) {
        self.terms = h
            .terms()
            .iter()
            .map(|t| TermRecord {
                coefficient: t.coefficient,
                word: t.string.to_word(h.n_qubits()),
            })
            .collect();
    }

    fn validate(&self, path: &Path) -> Result<()> {
        let fail = |message: String| {
            Err(Error::Validation {
                path: path.to_path_buf(),
                message,
            })
        };
        if self.schema_version != SCHEMA_VERSION {
            return fail(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.n_spatial == 0 || self.n_qubits() > PauliString::MAX_QUBITS {
            return fail(format!("unsupported n_spatial {}", self.n_spatial));
        }
        if self.n_alpha > self.n_spatial || self.n_beta > self.n_spatial {
            return fail(format!(
                "sector (n_alpha={}, n_beta={}) does not fit {} spatial orbitals",
                self.n_alpha, self.n_beta, self.n_spatial
            ));
        }
        for (k, t) in self.terms.iter().enumerate() {
            if t.word.chars().count() != self.n_qubits() {
                return fail(format!(
                    "terms[{k}].word `{}` has length {}, expected {}",
                    t.word,
                    t.word.chars().count(),
                    self.n_qubits()
                ));
            }
            if let Some(c) = t.word.chars().find(|c| !matches!(c, 'I' | 'X' | 'Y' | 'Z')) {
                return fail(format!("terms[{k}].word contains `{c}`"));
            }
            if !t.coefficient.is_finite() {
                return fail(format!("terms[{k}].coefficient is not finite"));
            }
        }
        for (name, v) in [
            ("geometry_lambda", self.geometry_lambda),
            ("core_energy", self.core_energy),
            ("geometry_spec.r0", self.geometry_spec.r0),
            ("geometry_spec.dr", self.geometry_spec.dr),
        ] {
            if !v.is_finite() {
                return fail(format!("{name} is not finite"));
            }
        }
        Ok(())
    }
}

/// `(molecule, mode, λ)` identity of a scan point; λ is kept to 0.01.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ScanKey {
    pub molecule: String,
    pub mode: GeometryMode,
    pub lambda_centi: i64,
}

impl ScanKey {
    pub fn lambda(&self) -> f64 {
        self.lambda_centi as f64 / 100.0
    }

    /// `{molecule}_{mode}_{±λ with two decimals}.json`.
    pub fn file_name(&self) -> String {
        let sign = if self.lambda_centi < 0 { '-' } else { '+' };
        let a = self.lambda_centi.unsigned_abs();
        format!("{}_{}_{sign}{}.{:02}.json", self.molecule, self.mode, a / 100, a % 100)
    }

    pub fn parse_file_name(name: &str) -> Result<Self> {
        let bad = || Error::arg(format!("`{name}` is not a scan file name"));
        let stem = name.strip_suffix(".json").ok_or_else(bad)?;
        let mut parts = stem.splitn(3, '_');
        let (molecule, mode, lambda) = (
            parts.next().ok_or_else(bad)?,
            parts.next().ok_or_else(bad)?,
            parts.next().ok_or_else(bad)?,
        );
        if molecule.is_empty() || molecule.contains(|c: char| c.is_ascii_uppercase()) {
            return Err(bad());
        }
        let mode = GeometryMode::parse(mode).ok_or_else(bad)?;
        let (sign, digits) = match lambda.split_at_checked(1) {
            Some(("+", d)) => (1, d),
            Some(("-", d)) => (-1, d),
            _ => return Err(bad()),
        };
        let (int, frac) = digits.split_once('.').ok_or_else(bad)?;
        if frac.len() != 2 || int.is_empty() {
            return Err(bad());
        }
        let int: i64 = int.parse().map_err(|_| bad())?;
        let frac: i64 = frac.parse().map_err(|_| bad())?;
        let key = ScanKey {
            molecule: molecule.to_string(),
            mode,
            lambda_centi: sign * (100 * int + frac),
        };
        // reject non-canonical spellings such as "-0.00" or "+01.00"
        if key.file_name() != name {
            return Err(bad());
        }
        Ok(key)
    }
}

/// Reads, validates and canonicalises a record.
pub fn load(path: impl AsRef<Path>, mode: LoadMode) -> Result<HamiltonianRecord> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse(&text, path, mode)
}

pub fn parse(text: &str, path: &Path, mode: LoadMode) -> Result<HamiltonianRecord> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let mut record: HamiltonianRecord =
        serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            field: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
    if mode == LoadMode::Strict {
        if let Some(field) = record.extra.keys().next() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                field: field.clone(),
                message: "unknown field in strict mode".into(),
            });
        }
    }
    record.validate(path)?;
    let h = record.hamiltonian().map_err(|e| Error::Validation {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    record.set_hamiltonian(&h);
    Ok(record)
}

/// Writes the record as pretty JSON via a temporary sibling file.
pub fn save(record: &HamiltonianRecord, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    record.validate(path)?;
    let mut text = serde_json::to_string_pretty(record).map_err(|e| Error::Validation {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    text.push('\n');
    let tmp = tmp_path(path);
    fs::write(&tmp, text)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".tmp");
    path.with_file_name(name)
}

/// Outcome of the dense symmetry checks.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PhysicsReport {
    /// `(check, norm)` for every check that exceeded [`PHYSICS_TOL`].
    pub violations: Vec<(String, f64)>,
    /// Non-fatal oddities, such as an empty term list.
    pub warnings: Vec<String>,
    /// `(check, norm)` for every check run.
    pub checks: Vec<(String, f64)>,
}

impl PhysicsReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Hermiticity and `[H, ·] = 0` for `S_x`, `S_z`, `S²`, `N_α`, `N_β`, dense.
pub fn validate_physics(record: &HamiltonianRecord) -> Result<PhysicsReport> {
    let n = record.n_qubits();
    if n > DENSE_LIMIT {
        return Err(Error::ResourceLimit {
            what: "physics validation",
            n_qubits: n,
            limit: DENSE_LIMIT,
        });
    }
    let mut report = PhysicsReport::default();
    if record.terms.is_empty() {
        report.warnings.push("empty term list".into());
    }
    let h = record.hamiltonian()?.to_dense()?;
    let mut check = |name: &str, value: f64| {
        report.checks.push((name.to_string(), value));
        if value > PHYSICS_TOL {
            report.violations.push((name.to_string(), value));
        }
    };
    check("hermiticity", (&h - h.adjoint()).norm());
    let ns = record.n_spatial;
    let (na, nb) = number_operators(ns)?;
    for (name, op) in [
        ("[H,S_z]", spin_component(Axis::Z, ns)?),
        ("[H,S_x]", spin_component(Axis::X, ns)?),
        ("[H,S^2]", s_squared(ns)?),
        ("[H,N_alpha]", na),
        ("[H,N_beta]", nb),
    ] {
        check(name, commutator_norm(&h, &op.to_dense()?));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> HamiltonianRecord {
        HamiltonianRecord {
            schema_version: 1,
            molecule: "H2".into(),
            geometry_lambda: -0.25,
            geometry_spec: GeometrySpec {
                mode: GeometryMode::Bond,
                r0: 0.74,
                dr: 0.5,
            },
            basis: "STO-3G".into(),
            n_spatial: 1,
            n_alpha: 1,
            n_beta: 1,
            core_energy: 0.7,
            terms: vec![
                TermRecord {
                    coefficient: 0.1,
                    word: "ZI".into(),
                },
                TermRecord {
                    coefficient: 0.1,
                    word: "IZ".into(),
                },
                TermRecord {
                    coefficient: -1.0000000000000002,
                    word: "II".into(),
                },
            ],
            metadata: None,
            extra: BTreeMap::new(),
        }
    }

    #[test]
    fn file_names_round_trip() {
        let key = sample().key();
        assert_eq!(key.file_name(), "h2_bond_-0.25.json");
        assert_eq!(ScanKey::parse_file_name("h2_bond_-0.25.json").unwrap(), key);
        let k = ScanKey::parse_file_name("beh2_antisym-stretch_+1.00.json").unwrap();
        assert_eq!((k.mode, k.lambda_centi), (GeometryMode::AntisymStretch, 100));
        for bad in ["h2_bond_0.25.json", "h2_bond_-0.00.json", "H2_bond_+0.25.json", "h2_twist_+0.25.json", "h2_bond_+0.2.json"] {
            assert!(ScanKey::parse_file_name(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn parse_canonicalises_and_reports_paths() {
        let text = serde_json::to_string(&sample()).unwrap();
        let r = parse(&text, Path::new("x.json"), LoadMode::Strict).unwrap();
        assert_eq!(r.terms[0].word, "II");
        let broken = text.replace("\"word\":\"ZI\"", "\"word\":7");
        match parse(&broken, Path::new("x.json"), LoadMode::Strict) {
            Err(Error::Parse { field, .. }) => assert!(field.starts_with("terms"), "{field}"),
            other => panic!("{other:?}"),
        }
        let short = text.replace("\"ZI\"", "\"Z\"");
        assert!(matches!(
            parse(&short, Path::new("x.json"), LoadMode::Strict),
            Err(Error::Validation { .. })
        ));
        assert!(matches!(
            parse(&text[..text.len() / 2], Path::new("x.json"), LoadMode::Strict),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn strict_and_lenient_extra_fields() {
        let mut v: Value = serde_json::to_value(sample()).unwrap();
        v["comment"] = Value::String("hand edited".into());
        let text = v.to_string();
        assert!(parse(&text, Path::new("x.json"), LoadMode::Strict).is_err());
        let r = parse(&text, Path::new("x.json"), LoadMode::Lenient).unwrap();
        assert_eq!(r.extra["comment"], "hand edited");
        assert!(serde_json::to_string(&r).unwrap().contains("hand edited"));
    }

    #[test]
    fn physics_report_flags_broken_symmetry() {
        let mut r = sample();
        assert!(validate_physics(&r).unwrap().is_clean());
        r.terms.push(TermRecord {
            coefficient: 0.3,
            word: "XI".into(),
        });
        let report = validate_physics(&r).unwrap();
        assert!(report.violations.iter().any(|(n, _)| n == "[H,S_z]"));
        r.terms.clear();
        let report = validate_physics(&r).unwrap();
        assert!(report.is_clean());
        assert!(!report.warnings.is_empty());
    }
}
