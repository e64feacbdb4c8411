//! Physical and numerical parameters of a run.
//!
//! Parameters are read from a flat TOML key/value document whose keys are the
//! physical symbols (`L`, `L_c`, `gamma_r`, ...) in SI units. Absent keys take
//! the default simulation values; unknown keys are rejected.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;
use toml::{Table, Value};

use crate::constants::E_CHARGE;

/// Every key accepted in a configuration document, in canonical order.
pub const KEYS: [&str; 18] = [
    "L", "L_c", "l_p", "n_planes", "eta", "n_atom", "N_j", "n_V", "mu", "gamma", "gamma_r", "gamma_c",
    "gamma_d", "Lambda_0", "omega_0", "T", "omega_max", "N_omega",
];

/// Delta-plane strengths studied for the default crystal, m.
pub const ETA_CHOICES: [f64; 3] = [2.6e-6, 6.4e-6, 2.1e-5];

/// Dipole moment of a transition with the given charge-separation length.
#[inline]
pub fn dipole_moment_si(dipole_length: f64) -> f64 {
    E_CHARGE * dipole_length
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("malformed configuration document: {0}")]
    Parse(String),
    #[error("unknown configuration key(s): {}", .0.join(", "))]
    UnknownKeys(Vec<String>),
    #[error("key `{key}` must be {expected}")]
    Type { key: String, expected: &'static str },
    #[error("invalid parameters: {}", format_violations(.0))]
    Validation(Vec<Violation>),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// A single violated invariant, naming the offending field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// Full parameter set of one simulation. Immutable once loaded.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalParams {
    /// Total cavity length `L`, m.
    pub length: f64,
    /// Photonic crystal length `L_c`, m.
    pub crystal_length: f64,
    /// Lattice constant `l_p`, m.
    pub lattice_constant: f64,
    /// Number of semitransparent planes.
    pub n_planes: usize,
    /// Delta-plane strength `eta`, m.
    pub eta: f64,
    /// Atom density `n_atom`, m⁻³.
    pub n_atom: f64,
    /// Atoms per resonance frequency `N_j`.
    pub atoms_per_frequency: usize,
    /// `n_V = n_atom / N_j`, m⁻³.
    pub n_v: f64,
    /// Transition dipole moment `mu`, C·m.
    pub mu: f64,
    /// Polarization dephasing rate `gamma`, s⁻¹.
    pub gamma: f64,
    /// Thermal relaxation rate `gamma_r`, s⁻¹.
    pub gamma_r: f64,
    /// Photon decay rate `gamma_c`, s⁻¹.
    pub gamma_c: f64,
    /// Detector resolution `gamma_d`, s⁻¹ (used as an angular width).
    pub gamma_d: f64,
    /// Pumping strength `Lambda_0`, s⁻¹.
    pub lambda_0: f64,
    /// Pumping band-gap frequency `omega_0`, rad/s.
    pub omega_0: f64,
    /// Reservoir temperature `T`, K.
    pub temperature: f64,
    /// Upper end of the mode search and atom grid, rad/s.
    pub omega_max: f64,
    /// Number of atom resonance frequencies `N_omega`.
    pub n_omega: usize,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        let n_atom = 5e24;
        let atoms_per_frequency = 600;
        Self {
            length: 1.2e-2,
            crystal_length: 120e-6,
            lattice_constant: 10e-6,
            n_planes: 12,
            eta: 2.1e-5,
            n_atom,
            atoms_per_frequency,
            n_v: n_atom / atoms_per_frequency as f64,
            mu: dipole_moment_si(1.3e-9),
            gamma: 1e14,
            gamma_r: 1e13,
            gamma_c: 1e9,
            gamma_d: 5e11,
            lambda_0: 1e10,
            omega_0: 1.6e14,
            temperature: 400.0,
            omega_max: 5e14,
            n_omega: 500,
        }
    }
}

/// Partially specified parameters, as read from a document.
#[derive(Debug, Default, Clone)]
struct RawParams {
    floats: [Option<f64>; 18],
}

fn key_index(key: &str) -> Option<usize> {
    KEYS.iter().position(|k| *k == key)
}

fn is_integer_key(key: &str) -> bool {
    matches!(key, "n_planes" | "N_j" | "N_omega")
}

impl RawParams {
    fn from_table(table: &Table) -> Result<Self, ConfigError> {
        let unknown: Vec<String> = table.keys().filter(|k| key_index(k).is_none()).cloned().collect();
        if !unknown.is_empty() {
            return Err(ConfigError::UnknownKeys(unknown));
        }
        let mut raw = RawParams::default();
        for (key, value) in table {
            let idx = key_index(key).expect("checked above");
            let x = match value {
                Value::Integer(i) => *i as f64,
                Value::Float(x) if !is_integer_key(key) => *x,
                _ => {
                    return Err(ConfigError::Type {
                        key: key.clone(),
                        expected: if is_integer_key(key) { "an integer" } else { "a number" },
                    })
                }
            };
            if is_integer_key(key) && x < 0.0 {
                return Err(ConfigError::Type { key: key.clone(), expected: "a non-negative integer" });
            }
            raw.floats[idx] = Some(x);
        }
        Ok(raw)
    }

    fn get(&self, key: &str) -> Option<f64> {
        self.floats[key_index(key).expect("known key")]
    }

    fn resolve(&self) -> Result<PhysicalParams, ConfigError> {
        let d = PhysicalParams::default();
        let f = |key: &str, default: f64| self.get(key).unwrap_or(default);
        let u = |key: &str, default: usize| self.get(key).map(|x| x as usize).unwrap_or(default);
        let atoms_per_frequency = u("N_j", d.atoms_per_frequency);
        let nj = atoms_per_frequency as f64;
        let (n_atom, n_v) = match (self.get("n_atom"), self.get("n_V")) {
            (Some(a), Some(v)) => (a, v),
            (Some(a), None) => (a, a / nj),
            (None, Some(v)) => (v * nj, v),
            (None, None) => (d.n_atom, d.n_atom / nj),
        };
        let params = PhysicalParams {
            length: f("L", d.length),
            crystal_length: f("L_c", d.crystal_length),
            lattice_constant: f("l_p", d.lattice_constant),
            n_planes: u("n_planes", d.n_planes),
            eta: f("eta", d.eta),
            n_atom,
            atoms_per_frequency,
            n_v,
            mu: f("mu", d.mu),
            gamma: f("gamma", d.gamma),
            gamma_r: f("gamma_r", d.gamma_r),
            gamma_c: f("gamma_c", d.gamma_c),
            gamma_d: f("gamma_d", d.gamma_d),
            lambda_0: f("Lambda_0", d.lambda_0),
            omega_0: f("omega_0", d.omega_0),
            temperature: f("T", d.temperature),
            omega_max: f("omega_max", d.omega_max),
            n_omega: u("N_omega", d.n_omega),
        };
        params.validate()?;
        Ok(params)
    }
}

/// Parses one `key=value` override. The value uses TOML number syntax.
pub fn parse_override(spec: &str) -> Result<(String, Value), ConfigError> {
    let (key, value) = spec
        .split_once('=')
        .ok_or_else(|| ConfigError::Parse(format!("override `{spec}` is not of the form key=value")))?;
    let key = key.trim();
    let doc = format!("v = {}", value.trim());
    let table: Table = doc
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::Parse(format!("override `{spec}`: {}", e.message())))?;
    let value = table.get("v").cloned().expect("single key document");
    Ok((key.to_string(), value))
}

impl PhysicalParams {
    /// Loads parameters from a TOML document; absent keys take default values.
    pub fn from_toml_str(doc: &str) -> Result<Self, ConfigError> {
        Self::from_toml_str_with_overrides(doc, &[])
    }

    /// Loads parameters from a document, then applies `key=value` overrides,
    /// which take precedence over values in the document.
    pub fn from_toml_str_with_overrides(doc: &str, overrides: &[(String, Value)]) -> Result<Self, ConfigError> {
        let mut table: Table = doc
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.message().to_string()))?;
        for (key, value) in overrides {
            table.insert(key.clone(), value.clone());
        }
        // An override of n_atom alone must not be checked against a stale n_V
        // from the document.
        let overridden = |k: &str| overrides.iter().any(|(key, _)| key == k);
        if overridden("n_atom") && !overridden("n_V") {
            table.remove("n_V");
        } else if overridden("n_V") && !overridden("n_atom") {
            table.remove("n_atom");
        }
        RawParams::from_table(&table)?.resolve()
    }

    /// Reads a configuration file (or defaults when `path` is `None`) and
    /// applies overrides.
    pub fn load(path: Option<&Path>, overrides: &[(String, Value)]) -> Result<Self, ConfigError> {
        let doc = match path {
            Some(p) => fs::read_to_string(p).map_err(|source| ConfigError::Io {
                path: p.display().to_string(),
                source,
            })?,
            None => String::new(),
        };
        Self::from_toml_str_with_overrides(&doc, overrides)
    }

    /// Serializes every field, one `key = value` line each, in canonical key
    /// order. Reloading the output reproduces the parameters bit for bit.
    pub fn to_toml_string(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            match key {
                "n_planes" => out.push_str(&format!("{key} = {}\n", self.n_planes)),
                "N_j" => out.push_str(&format!("{key} = {}\n", self.atoms_per_frequency)),
                "N_omega" => out.push_str(&format!("{key} = {}\n", self.n_omega)),
                _ => out.push_str(&format!("{key} = {:e}\n", self.float(key))),
            }
        }
        out
    }

    fn float(&self, key: &str) -> f64 {
        match key {
            "L" => self.length,
            "L_c" => self.crystal_length,
            "l_p" => self.lattice_constant,
            "eta" => self.eta,
            "n_atom" => self.n_atom,
            "n_V" => self.n_v,
            "mu" => self.mu,
            "gamma" => self.gamma,
            "gamma_r" => self.gamma_r,
            "gamma_c" => self.gamma_c,
            "gamma_d" => self.gamma_d,
            "Lambda_0" => self.lambda_0,
            "omega_0" => self.omega_0,
            "T" => self.temperature,
            "omega_max" => self.omega_max,
            other => unreachable!("not a float key: {other}"),
        }
    }

    /// Checks every invariant and reports all violations at once.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut v = Vec::new();
        let mut fail = |field: &'static str, message: String| v.push(Violation { field, message });

        for key in KEYS.iter().filter(|k| !is_integer_key(k)) {
            if !self.float(key).is_finite() {
                fail(static_key(key), "must be finite".into());
            }
        }
        if !(self.crystal_length > 0.0) {
            fail("L_c", format!("must be positive (got {:e})", self.crystal_length));
        }
        if !(self.length > self.crystal_length) {
            fail("L_c", format!("must be smaller than L = {:e} (got {:e})", self.length, self.crystal_length));
        }
        if !(self.lattice_constant > 0.0) {
            fail("l_p", format!("must be positive (got {:e})", self.lattice_constant));
        }
        let stack = self.lattice_constant * self.n_planes as f64;
        if stack > self.crystal_length * (1.0 + 1e-12) {
            fail(
                "l_p",
                format!("l_p * n_planes = {stack:e} exceeds L_c = {:e}", self.crystal_length),
            );
        }
        if !(self.eta >= 0.0) {
            fail("eta", "must be non-negative".into());
        }
        if !(self.n_atom >= 0.0) {
            fail("n_atom", "must be non-negative".into());
        }
        if self.atoms_per_frequency < 1 {
            fail("N_j", "must be at least 1".into());
        } else {
            let expected = self.n_v * self.atoms_per_frequency as f64;
            if (expected - self.n_atom).abs() > 1e-14 * self.n_atom.abs().max(f64::MIN_POSITIVE) {
                fail(
                    "n_V",
                    format!("n_V * N_j = {expected:e} differs from n_atom = {:e}", self.n_atom),
                );
            }
        }
        if !(self.mu >= 0.0) {
            fail("mu", "must be non-negative".into());
        }
        if !(self.gamma > 0.0) {
            fail("gamma", "must be positive".into());
        }
        for (field, rate) in [
            ("gamma_r", self.gamma_r),
            ("gamma_c", self.gamma_c),
            ("gamma_d", self.gamma_d),
            ("Lambda_0", self.lambda_0),
        ] {
            if !(rate >= 0.0) {
                fail(field, format!("rate must be non-negative (got {rate:e})"));
            }
        }
        if !(self.omega_0 >= 0.0) {
            fail("omega_0", "must be non-negative".into());
        }
        if !(self.temperature > 0.0) {
            fail("T", "must be positive".into());
        }
        if !(self.omega_max > 0.0) {
            fail("omega_max", "must be positive".into());
        }
        if self.n_omega < 1 {
            fail("N_omega", "must be at least 1".into());
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Validation(v))
        }
    }

    /// Returns a copy at the requested simulation scale.
    pub fn scaled(&self, scale: Scale) -> Self {
        match scale {
            Scale::Full => self.clone(),
            Scale::Reduced => Self {
                length: self.length / 10.0,
                n_omega: 100,
                ..self.clone()
            },
        }
    }

    /// Returns a copy with a new atom density, keeping `n_V = n_atom / N_j`.
    pub fn with_n_atom(&self, n_atom: f64) -> Self {
        Self {
            n_atom,
            n_v: n_atom / self.atoms_per_frequency as f64,
            ..self.clone()
        }
    }

    /// Plane positions `z = n * l_p`, `n = 1..=n_planes`.
    pub fn plane_positions(&self) -> Vec<f64> {
        (1..=self.n_planes).map(|n| n as f64 * self.lattice_constant).collect()
    }
}

fn static_key(key: &str) -> &'static str {
    KEYS.iter().find(|k| **k == key).copied().unwrap_or("?")
}

/// Simulation scale. `Reduced` shortens the cavity tenfold and uses 100 atom
/// frequencies over the same frequency range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scale {
    #[default]
    Reduced,
    Full,
}

impl FromStr for Scale {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "reduced" => Ok(Scale::Reduced),
            "full" => Ok(Scale::Full),
            other => Err(format!("unknown scale `{other}` (expected `reduced` or `full`)")),
        }
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scale::Reduced => "reduced",
            Scale::Full => "full",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_table_defaults() {
        let p = PhysicalParams::from_toml_str("").unwrap();
        assert_eq!(p.length, 1.2e-2);
        assert_eq!(p.crystal_length, 120e-6);
        assert_eq!(p.lattice_constant, 10e-6);
        assert_eq!(p.gamma, 1e14);
        assert_eq!(p.gamma_c, 1e9);
        assert_eq!(p.gamma_d, 5e11);
        assert_eq!(p.lambda_0, 1e10);
        assert_eq!(p.omega_0, 1.6e14);
        assert_eq!(p.mu, E_CHARGE * 1.3e-9);
        assert_eq!(p.temperature, 400.0);
        assert_eq!(p.n_planes, 12);
        assert_eq!(p.omega_max, 5e14);
        assert_eq!(p.n_omega, 500);
        assert!(ETA_CHOICES.contains(&p.eta));
    }

    #[test]
    fn crystal_longer_than_cavity_is_rejected() {
        let err = PhysicalParams::from_toml_str("L_c = 2e-2").unwrap_err();
        match err {
            ConfigError::Validation(v) => assert!(v.iter().any(|x| x.field == "L_c")),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn every_violation_is_reported() {
        let err = PhysicalParams::from_toml_str("T = -1.0\ngamma_c = -5.0\nL_c = 1.0").unwrap_err();
        let ConfigError::Validation(v) = err else { panic!("expected validation error") };
        let fields: Vec<_> = v.iter().map(|x| x.field).collect();
        assert!(fields.contains(&"T"));
        assert!(fields.contains(&"gamma_c"));
        assert!(fields.contains(&"L_c"));
    }

    #[test]
    fn n_v_follows_n_atom() {
        let p = PhysicalParams::from_toml_str("n_atom = 5e24\nN_j = 600").unwrap();
        assert!((p.n_v - 8.333_333_333_333e21).abs() / 8.333e21 < 1e-12);
        assert!((p.n_v * 600.0 - p.n_atom).abs() <= 1e-14 * p.n_atom);
    }

    #[test]
    fn inconsistent_n_v_is_rejected() {
        let err = PhysicalParams::from_toml_str("n_atom = 5e24\nn_V = 1e21").unwrap_err();
        let ConfigError::Validation(v) = err else { panic!("expected validation error") };
        assert_eq!(v[0].field, "n_V");
    }

    #[test]
    fn unknown_keys_and_bad_types_are_rejected() {
        assert!(matches!(
            PhysicalParams::from_toml_str("Lc = 1e-4"),
            Err(ConfigError::UnknownKeys(k)) if k == vec!["Lc".to_string()]
        ));
        assert!(matches!(PhysicalParams::from_toml_str("N_omega = 1.5"), Err(ConfigError::Type { .. })));
        assert!(matches!(PhysicalParams::from_toml_str("L = = 3"), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn integers_are_accepted_for_float_keys() {
        let p = PhysicalParams::from_toml_str("T = 300").unwrap();
        assert_eq!(p.temperature, 300.0);
    }

    #[test]
    fn overrides_take_precedence() {
        let doc = "gamma_c = 2e9\nn_atom = 5e24\nn_V = 8.333333333333333e21";
        let ov = vec![parse_override("gamma_c=5e12").unwrap(), parse_override("n_atom = 5e22").unwrap()];
        let p = PhysicalParams::from_toml_str_with_overrides(doc, &ov).unwrap();
        assert_eq!(p.gamma_c, 5e12);
        assert_eq!(p.n_atom, 5e22);
        assert_eq!(p.n_v, 5e22 / 600.0);
        assert!(parse_override("gamma_c").is_err());
    }

    #[test]
    fn dipole_moment_is_linear_in_length() {
        let base = dipole_moment_si(1.3e-9);
        assert!((base - 2.0827e-28).abs() / 2.0827e-28 < 1e-4);
        assert_eq!(dipole_moment_si(0.0), 0.0);
        assert_eq!(dipole_moment_si(2.6e-9), 2.0 * base);
    }

    #[test]
    fn reduced_scale_shortens_cavity() {
        let p = PhysicalParams::default().scaled(Scale::Reduced);
        assert!((p.length - 1.2e-3).abs() < 1e-18);
        assert_eq!(p.n_omega, 100);
        assert_eq!(p.omega_max, 5e14);
        assert_eq!("full".parse::<Scale>().unwrap(), Scale::Full);
        assert!("tiny".parse::<Scale>().is_err());
    }
}
