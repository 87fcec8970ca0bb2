//! Run configuration: built-in defaults, then a sectioned TOML file, then
//! `--section-key value` flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use boundtele::spectral::Tabulated;
use boundtele::{SpectralDensity, Tolerance};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BathKind {
    Ohmic,
    Semicircle,
    Tabulated,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Bath {
    pub kind: BathKind,
    /// Ohmic coupling strength.
    pub eta: f64,
    /// Ohmicity exponent.
    pub s: f64,
    pub omega_c: f64,
    /// Semicircle coupling, half-bandwidth/2 and band centre.
    pub g: f64,
    pub xi: f64,
    pub omega_r: f64,
    /// Two-column `omega,J` CSV for `kind = "tabulated"`.
    pub table: String,
}

impl Default for Bath {
    fn default() -> Self {
        Self {
            kind: BathKind::Ohmic,
            eta: 0.2,
            s: 1.0,
            omega_c: 10.0,
            g: 0.1,
            xi: 0.08,
            omega_r: 1.0,
            table: String::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct System {
    pub omega0: f64,
    /// Two-mode squeezing of the CV resource.
    pub r: f64,
    /// Coherent amplitude teleported by the CV oracle.
    pub alpha_re: f64,
    pub alpha_im: f64,
}

impl Default for System {
    fn default() -> Self {
        Self {
            omega0: 1.0,
            r: 2.0,
            alpha_re: 0.0,
            alpha_im: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Numerics {
    pub h: f64,
    pub t_max: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
    pub oracle_samples: usize,
    pub oracle_tol: f64,
    pub seed: u64,
    pub theta_nodes: usize,
    pub phi_nodes: usize,
    pub cv_points: usize,
    /// 0 selects the width automatically.
    pub cv_half_width: f64,
    pub sites: usize,
    pub lattice_tol: f64,
    pub plateau_tol: f64,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            h: 1e-3,
            t_max: 100.0,
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            max_intervals: 20_000,
            oracle_samples: 100,
            oracle_tol: 1e-6,
            seed: 1,
            theta_nodes: 24,
            phi_nodes: 24,
            cv_points: 201,
            cv_half_width: 0.0,
            sites: 500,
            lattice_tol: 1e-3,
            plateau_tol: 1e-2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sweep {
    /// One of eta, s, omega_c, g, xi, omega_r, omega0.
    pub param: String,
    pub start: f64,
    pub stop: f64,
    pub count: usize,
    /// Bracket width at which threshold bisection stops.
    pub resolution: f64,
}

impl Default for Sweep {
    fn default() -> Self {
        Self {
            param: "omega_c".into(),
            start: 1.0,
            stop: 10.0,
            count: 181,
            resolution: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Output {
    pub dir: String,
    /// File stem for `<stem>.csv` and `<stem>.json`; empty uses the command name.
    pub stem: String,
    /// Add gamma/omega columns to trajectory CSV.
    pub coeffs: bool,
}

impl Default for Output {
    fn default() -> Self {
        Self {
            dir: ".".into(),
            stem: String::new(),
            coeffs: false,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub bath: Bath,
    pub system: System,
    pub numerics: Numerics,
    pub sweep: Sweep,
    pub output: Output,
}

pub const SWEEP_PARAMS: [&str; 7] = ["eta", "s", "omega_c", "g", "xi", "omega_r", "omega0"];

impl RunConfig {
    pub fn tolerance(&self) -> Tolerance {
        Tolerance {
            abs: self.numerics.abs_tol,
            rel: self.numerics.rel_tol,
            max_intervals: self.numerics.max_intervals,
        }
    }

    pub fn spectral_density(&self) -> boundtele::Result<SpectralDensity> {
        let b = &self.bath;
        match b.kind {
            BathKind::Ohmic => SpectralDensity::ohmic(b.eta, b.s, b.omega_c),
            BathKind::Semicircle => SpectralDensity::semicircle(b.g, b.xi, b.omega_r),
            BathKind::Tabulated if b.table.is_empty() => Err(boundtele::Error::InvalidParameter(
                "bath.table is required for tabulated baths".into(),
            )),
            BathKind::Tabulated => {
                Tabulated::from_csv_path(&b.table).map(SpectralDensity::Tabulated)
            }
        }
    }

    /// Copy with one sweepable parameter replaced.
    pub fn with_param(&self, name: &str, value: f64) -> Result<Self, Failure> {
        let mut c = self.clone();
        let slot = match name {
            "eta" => &mut c.bath.eta,
            "s" => &mut c.bath.s,
            "omega_c" => &mut c.bath.omega_c,
            "g" => &mut c.bath.g,
            "xi" => &mut c.bath.xi,
            "omega_r" => &mut c.bath.omega_r,
            "omega0" => &mut c.system.omega0,
            _ => {
                return Err(Failure::Usage(format!(
                    "unknown sweep parameter '{name}', expected one of {}",
                    SWEEP_PARAMS.join(", ")
                )))
            }
        };
        *slot = value;
        Ok(c)
    }

    /// Evenly spaced sweep grid; an empty range is a usage error.
    pub fn sweep_grid(&self) -> Result<Vec<f64>, Failure> {
        let s = &self.sweep;
        if !SWEEP_PARAMS.contains(&s.param.as_str()) {
            return Err(Failure::Usage(format!(
                "unknown sweep parameter '{}'",
                s.param
            )));
        }
        if !(s.start.is_finite() && s.stop.is_finite()) {
            return Err(Failure::Usage("sweep range must be finite".into()));
        }
        match s.count {
            0 => Err(Failure::Usage("empty sweep range: count = 0".into())),
            1 => Ok(vec![s.start]),
            _ if s.start == s.stop => Err(Failure::Usage(format!(
                "empty sweep range: start = stop = {}",
                s.start
            ))),
            n => {
                let d = (s.stop - s.start) / (n - 1) as f64;
                Ok((0..n)
                    .map(|i| {
                        if i + 1 == n {
                            s.stop
                        } else {
                            s.start + d * i as f64
                        }
                    })
                    .collect())
            }
        }
    }

    pub fn output_path(&self, command: &str, ext: &str) -> PathBuf {
        let stem = if self.output.stem.is_empty() {
            command
        } else {
            &self.output.stem
        };
        Path::new(&self.output.dir).join(format!("{stem}.{ext}"))
    }
}

type Overrides = Vec<(String, String)>;

/// Pulls `--section-key value` / `--key value` pairs (and `=` forms) that
/// name config keys out of `args`; everything else is left for clap.
pub fn split_overrides(args: Vec<String>) -> Result<(Vec<String>, Overrides), Failure> {
    let keys = key_index();
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        let Some(flag) = arg.strip_prefix("--") else {
            rest.push(arg);
            continue;
        };
        let (name, inline) = match flag.split_once('=') {
            Some((n, v)) => (n, Some(v.to_string())),
            None => (flag, None),
        };
        let Some(path) = keys.get(&name.replace('-', "_")) else {
            rest.push(arg);
            continue;
        };
        let value = match inline {
            Some(v) => v,
            None => it
                .next()
                .ok_or_else(|| Failure::Usage(format!("--{name} needs a value")))?,
        };
        overrides.push((path.clone(), value));
    }
    Ok((rest, overrides))
}

/// Maps `section_key` and unambiguous bare `key` spellings to `section.key`.
fn key_index() -> BTreeMap<String, String> {
    let defaults = defaults_table();
    let mut index = BTreeMap::new();
    let mut bare: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (section, body) in &defaults {
        for key in body.as_table().into_iter().flat_map(|t| t.keys()) {
            let path = format!("{section}.{key}");
            index.insert(format!("{section}_{key}"), path.clone());
            bare.entry(key.clone()).or_default().push(path);
        }
    }
    for (key, paths) in bare {
        if let [path] = paths.as_slice() {
            index.entry(key).or_insert_with(|| path.clone());
        }
    }
    index
}

fn defaults_table() -> Table {
    Table::try_from(RunConfig::default()).expect("defaults serialize")
}

pub fn load(file: Option<&Path>, overrides: &[(String, String)]) -> Result<RunConfig, Failure> {
    let mut table = defaults_table();
    if let Some(path) = file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        let user: Table = text
            .parse()
            .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
        for (section, body) in user {
            let Some(Value::Table(target)) = table.get_mut(&section) else {
                return Err(Failure::Usage(format!(
                    "unknown config section [{section}]"
                )));
            };
            let Value::Table(body) = body else {
                return Err(Failure::Usage(format!("[{section}] must be a section")));
            };
            for (k, v) in body {
                if !target.contains_key(&k) {
                    return Err(Failure::Usage(format!("unknown config key {section}.{k}")));
                }
                target.insert(k, v);
            }
        }
    }
    let defaults = defaults_table();
    for (path, raw) in overrides {
        let (section, key) = path.split_once('.').expect("indexed paths are dotted");
        let like = &defaults[section][key];
        let value = coerce(like, raw)
            .ok_or_else(|| Failure::Usage(format!("bad value '{raw}' for {path}")))?;
        table[section]
            .as_table_mut()
            .expect("sections are tables")
            .insert(key.to_string(), value);
    }
    RunConfig::deserialize(Value::Table(table)).map_err(|e| Failure::Usage(e.to_string()))
}

fn coerce(like: &Value, raw: &str) -> Option<Value> {
    Some(match like {
        Value::Float(_) => Value::Float(raw.parse().ok()?),
        Value::Integer(_) => Value::Integer(raw.parse().ok()?),
        Value::Boolean(_) => Value::Boolean(raw.parse().ok()?),
        _ => Value::String(raw.to_string()),
    })
}
