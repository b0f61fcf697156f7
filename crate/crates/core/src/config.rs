//! Scenario configuration files.
//!
//! Sections in square brackets hold lowercase snake_case keys. Values are
//! decimal numbers with an optional exponent, complex numbers written
//! `re+imj`, or bare words for enumerations. Keys outside any section are
//! addressed by their bare name, the rest as `section.key`.

use std::collections::BTreeMap;
use std::path::Path;

use ini::Ini;
use thiserror::Error;

use crate::params::{rb87_preset, PhysicalPreset, SchemeParams};
use crate::C64;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config syntax error at line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("config key `{key}`: {message}")]
    Value { key: String, message: String },
}

impl ConfigError {
    fn value(key: &str, message: impl Into<String>) -> Self {
        ConfigError::Value {
            key: key.to_string(),
            message: message.into(),
        }
    }

    /// The key the error refers to, when there is one.
    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::UnknownKey(k) | ConfigError::Value { key: k, .. } => Some(k),
            _ => None,
        }
    }
}

/// Every key the scenarios understand.
pub const KNOWN_KEYS: &[&str] = &[
    "preset",
    "scheme.omega_p",
    "scheme.omega_r",
    "scheme.omega_c",
    "scheme.omega_a",
    "scheme.delta_3",
    "scheme.delta_4",
    "scheme.delta_5",
    "scheme.delta_6",
    "scheme.gamma",
    "scheme.gamma_rydberg",
    "scheme.b_squared",
    "scheme.eta_l",
    "scheme.level4_branching",
    "physical.gamma_si",
    "physical.atom_density",
    "physical.l_abs",
    "physical.lambda_m",
    "physical.lambda_l",
    "physical.c6",
    "physical.d43",
    "physical.d61",
    "markers.delta_vdw",
    "markers.delta_dd",
    "markers.separation",
    "steady.omega_m",
    "steady.omega_l",
    "efficiency.d_c",
    "cw1d.input",
    "cw1d.amplitude",
    "cw1d.length",
    "cw1d.points",
    "cw1d.dz",
    "pulse1d.input",
    "pulse1d.amplitude",
    "pulse1d.bandwidth",
    "pulse1d.window",
    "pulse1d.tau_step",
    "pulse1d.length",
    "pulse1d.dz",
    "pulse1d.z_stride",
    "pulse1d.tol",
    "paraxial.port",
    "paraxial.sigma",
    "paraxial.sigma_c",
    "paraxial.peak",
    "paraxial.peak_density",
    "paraxial.length",
    "paraxial.refine",
    "paraxial.dr",
    "paraxial.dz",
    "paraxial.r_max",
    "paraxial.snapshots",
    "rydberg.rydberg_density",
    "rydberg.orientation",
    "rydberg.axis",
    "rydberg.angular",
    "rydberg.cos_theta",
    "rydberg.dd_scale",
    "rydberg.vdw_scale",
    "rydberg.radial_nodes",
    "rydberg.polar_nodes",
    "rydberg.tolerance",
    "sweep.parameter",
    "sweep.scenario",
    "sweep.values",
    "sweep.start",
    "sweep.stop",
    "sweep.points",
    "sweep.scale",
];

/// Flat, ordered key/value view of a configuration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

fn is_snake_case(s: &str) -> bool {
    !s.is_empty()
        && s.starts_with(|c: char| c.is_ascii_lowercase())
        && s.chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let ini = Ini::load_from_str(text).map_err(|e| ConfigError::Syntax {
            line: e.line,
            message: e.msg.to_string(),
        })?;
        let mut cfg = Config::default();
        for (section, props) in ini.iter() {
            if let Some(s) = section {
                if !is_snake_case(s) {
                    return Err(ConfigError::value(s, "section names must be lowercase snake_case"));
                }
            }
            for (k, v) in props.iter() {
                let key = match section {
                    Some(s) => format!("{s}.{k}"),
                    None => k.to_string(),
                };
                if !is_snake_case(k) {
                    return Err(ConfigError::value(&key, "keys must be lowercase snake_case"));
                }
                cfg.insert(&key, v)?;
            }
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    fn insert(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey(key.to_string()));
        }
        self.entries.insert(key.to_string(), value.trim().to_string());
        Ok(())
    }

    /// Apply a `section.key=value` override.
    pub fn set(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| ConfigError::value(assignment.trim(), "override must have the form key=value"))?;
        self.insert(k.trim(), v)
    }

    pub fn set_value(&mut self, key: &str, value: impl ToString) -> Result<(), ConfigError> {
        self.insert(key, &value.to_string())
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    /// Resolved entries in key order.
    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.raw(key).map(|v| parse_real(key, v)).transpose()
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.f64(key)?.unwrap_or(default))
    }

    pub fn positive_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        let v = self.f64_or(key, default)?;
        if !(v > 0.0) {
            return Err(ConfigError::value(key, "must be positive"));
        }
        Ok(v)
    }

    pub fn complex(&self, key: &str) -> Result<Option<C64>, ConfigError> {
        self.raw(key).map(|v| parse_complex(key, v)).transpose()
    }

    pub fn complex_or(&self, key: &str, default: C64) -> Result<C64, ConfigError> {
        Ok(self.complex(key)?.unwrap_or(default))
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v
                .parse::<usize>()
                .map_err(|_| ConfigError::value(key, format!("expected a non-negative integer, got `{v}`"))),
        }
    }

    /// A bare word from `choices`.
    pub fn word_or<'a>(&self, key: &str, choices: &[&'a str], default: &'a str) -> Result<&'a str, ConfigError> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => {
                choices.iter().find(|c| **c == v).copied().ok_or_else(|| {
                    ConfigError::value(key, format!("expected one of {}, got `{v}`", choices.join(", ")))
                })
            }
        }
    }

    /// Comma-separated reals.
    pub fn list(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        self.raw(key)
            .map(|v| {
                v.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| parse_real(key, s))
                    .collect()
            })
            .transpose()
    }

    /// Scheme and physical parameters: the preset (rb87 unless `preset =
    /// none`) overlaid with the `[scheme]` and `[physical]` keys.
    pub fn parameters(&self) -> Result<(SchemeParams, PhysicalPreset), ConfigError> {
        let (mut p, mut phys) = rb87_preset();
        if self.word_or("preset", &["rb87", "none"], "rb87")? == "none" {
            p = SchemeParams::dark();
        }
        let c = |k: &str, d: C64| self.complex_or(&format!("scheme.{k}"), d);
        let r = |k: &str, d: f64| self.f64_or(&format!("scheme.{k}"), d);
        p.omega_p = c("omega_p", p.omega_p)?;
        p.omega_r = c("omega_r", p.omega_r)?;
        p.omega_c = c("omega_c", p.omega_c)?;
        p.omega_a = c("omega_a", p.omega_a)?;
        p.delta_3 = r("delta_3", p.delta_3)?;
        p.delta_4 = r("delta_4", p.delta_4)?;
        p.delta_5 = r("delta_5", p.delta_5)?;
        p.delta_6 = r("delta_6", p.delta_6)?;
        p.gamma = r("gamma", p.gamma)?;
        p.gamma_rydberg = r("gamma_rydberg", p.gamma_rydberg)?;
        p.b_squared = r("b_squared", p.b_squared)?;
        p.eta_l = r("eta_l", p.eta_l)?;
        p.level4_branching = r("level4_branching", p.level4_branching)?;
        if let Err(e) = p.validate() {
            let key = match &e {
                crate::Error::InvalidParameter { name, .. } => format!("scheme.{name}"),
                _ => "scheme".to_string(),
            };
            return Err(ConfigError::value(&key, e.to_string()));
        }

        let f = |k: &str, d: f64| self.f64_or(&format!("physical.{k}"), d);
        phys.gamma_si = f("gamma_si", phys.gamma_si)?;
        phys.atom_density = f("atom_density", phys.atom_density)?;
        phys.l_abs = f("l_abs", phys.l_abs)?;
        phys.lambda_m = f("lambda_m", phys.lambda_m)?;
        phys.lambda_l = f("lambda_l", phys.lambda_l)?;
        phys.gamma_ratio = p.gamma_rydberg / p.gamma;
        for key in ["gamma_si", "atom_density", "l_abs", "lambda_m", "lambda_l"] {
            if !(f(key, 1.0)? > 0.0) {
                return Err(ConfigError::value(&format!("physical.{key}"), "must be positive"));
            }
        }
        phys.c6 = self.f64("physical.c6")?.or(phys.c6);
        phys.d43_magnitude = self.f64("physical.d43")?.or(phys.d43_magnitude);
        phys.d61_magnitude = self.f64("physical.d61")?.or(phys.d61_magnitude);
        Ok((p, phys))
    }
}

pub fn parse_real(key: &str, value: &str) -> Result<f64, ConfigError> {
    let v: f64 = value
        .trim()
        .parse()
        .map_err(|_| ConfigError::value(key, format!("expected a number, got `{value}`")))?;
    if !v.is_finite() {
        return Err(ConfigError::value(key, "must be finite"));
    }
    Ok(v)
}

/// `re`, `re+imj`, `re-imj` or `imj`.
pub fn parse_complex(key: &str, value: &str) -> Result<C64, ConfigError> {
    let s = value.trim();
    let bad = || ConfigError::value(key, format!("expected a complex number re+imj, got `{value}`"));
    let Some(body) = s.strip_suffix('j') else {
        return Ok(C64::new(parse_real(key, s)?, 0.0));
    };
    // split at the last sign that is not part of an exponent
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(i) => (parse_real(key, &body[..i]).map_err(|_| bad())?, &body[i..]),
        None => (0.0, body),
    };
    let im = match im {
        "+" | "" => 1.0,
        "-" => -1.0,
        x => parse_real(key, x).map_err(|_| bad())?,
    };
    Ok(C64::new(re, im))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_preset() {
        let cfg = Config::parse("").unwrap();
        let (p, phys) = cfg.parameters().unwrap();
        assert_eq!((p, phys), rb87_preset());
        let cfg = Config::parse("preset = rb87\n").unwrap();
        assert_eq!(cfg.parameters().unwrap().0, rb87_preset().0);
    }

    #[test]
    fn sections_and_overrides() {
        let mut cfg = Config::parse("[scheme]\nomega_p = 0.5+0.1j\ndelta_4 = 2.5e0\n; comment\n").unwrap();
        cfg.set("scheme.delta_5 = 3").unwrap();
        let (p, _) = cfg.parameters().unwrap();
        assert_eq!(p.omega_p, C64::new(0.5, 0.1));
        assert_eq!(p.delta_4, 2.5);
        assert_eq!(p.delta_5, 3.0);
        assert_eq!(cfg.raw("scheme.delta_5"), Some("3"));
    }

    #[test]
    fn complex_forms() {
        let k = "x";
        assert_eq!(parse_complex(k, "1.5").unwrap(), C64::new(1.5, 0.0));
        assert_eq!(parse_complex(k, "1-2j").unwrap(), C64::new(1.0, -2.0));
        assert_eq!(parse_complex(k, "1e-3+2e-4j").unwrap(), C64::new(1e-3, 2e-4));
        assert_eq!(parse_complex(k, "-2.5j").unwrap(), C64::new(0.0, -2.5));
        assert_eq!(parse_complex(k, "3+j").unwrap(), C64::new(3.0, 1.0));
        assert!(parse_complex(k, "1+2i").is_err());
        assert!(parse_complex(k, "abc").is_err());
    }

    #[test]
    fn errors_name_the_key() {
        let e = Config::parse("[scheme]\nomega_x = 1\n").unwrap_err();
        assert_eq!(e.key(), Some("scheme.omega_x"));
        let cfg = Config::parse("[scheme]\ndelta_4 = two\n").unwrap();
        let e = cfg.parameters().unwrap_err();
        assert_eq!(e.key(), Some("scheme.delta_4"));
        assert!(e.to_string().contains("scheme.delta_4"));
        let cfg = Config::parse("[scheme]\ngamma = -1\n").unwrap();
        assert_eq!(cfg.parameters().unwrap_err().key(), Some("scheme.gamma"));
        let e = Config::parse("[Scheme]\ngamma = 1\n").unwrap_err();
        assert_eq!(e.key(), Some("Scheme"));
        let e = Config::parse("[scheme]\nGamma = 1\n").unwrap_err();
        assert_eq!(e.key(), Some("scheme.Gamma"));
        let mut cfg = Config::default();
        assert!(cfg.set("scheme.gamma").is_err());
        assert_eq!(cfg.word_or("preset", &["rb87"], "rb87").unwrap(), "rb87");
        cfg.set("preset=other").unwrap();
        assert_eq!(
            cfg.word_or("preset", &["rb87", "none"], "rb87").unwrap_err().key(),
            Some("preset")
        );
    }

    #[test]
    fn lists() {
        let cfg = Config::parse("[sweep]\nvalues = 1, 2.5,3e2\n").unwrap();
        assert_eq!(cfg.list("sweep.values").unwrap().unwrap(), vec![1.0, 2.5, 300.0]);
        let cfg = Config::parse("[sweep]\nvalues =\n").unwrap();
        assert!(cfg.list("sweep.values").unwrap().unwrap().is_empty());
    }
}
