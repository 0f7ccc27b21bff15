//! Experiment configuration: TOML with one section per module.
//!
//! ```toml
//! [run]
//! kind = "cavity-design"        # optional; must agree with the command line
//! out = "results"               # optional; --out wins
//! cache = true
//!
//! [array]
//! species = "Ca40"
//! n_ions = 2000
//! spacing_um = 7.0
//!
//! [cavity]
//! n_system = 5
//! walls = 3                     # or [left, right]
//! tweezer = "2.4 MHz x2pi"
//! wall_thickness = [1, 2, 3, 4] # cavity-design sweep
//! ```
//!
//! Grids are either explicit lists or `{ start, stop, count }` tables, with
//! an optional `unit` for frequency grids and `spacing = "log"`.

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use phonon_forge_core::crystal::{doppler_occupation, unit_scale, IonSpecies};
use serde_json::Value as Json;
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::units::{parse_frequency, parse_unit, FreqUnit};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum RunKind {
    CavityDesign,
    DecayVerify,
    SingleMode,
    TwoMode,
    PhaseDiagram,
}

impl RunKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RunKind::CavityDesign => "cavity-design",
            RunKind::DecayVerify => "decay-verify",
            RunKind::SingleMode => "single-mode",
            RunKind::TwoMode => "two-mode",
            RunKind::PhaseDiagram => "phase-diagram",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            RunKind::CavityDesign,
            RunKind::DecayVerify,
            RunKind::SingleMode,
            RunKind::TwoMode,
            RunKind::PhaseDiagram,
        ]
        .into_iter()
        .find(|k| k.as_str() == s)
    }
}

#[derive(Debug, Clone)]
pub struct RunSettings {
    pub kind: Option<RunKind>,
    pub out: Option<PathBuf>,
    pub cache: bool,
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct ArraySettings {
    pub species: IonSpecies,
    pub n_ions: Option<usize>,
    /// m
    pub spacing: f64,
    pub edge_trap: Vec<f64>,
    /// rad/s
    pub omega0: f64,
}

#[derive(Debug, Clone)]
pub struct VerifySettings {
    /// Index among the non-wall cavity modes; all of them when unset.
    pub mode: Option<usize>,
    /// `1/omega0`; defaults to the pre-revival window.
    pub t_max: Option<f64>,
    pub samples: usize,
}

#[derive(Debug, Clone)]
pub struct CavitySettings {
    pub n_system: usize,
    pub wall_left: usize,
    pub wall_right: usize,
    pub center: Option<usize>,
    /// rad/s
    pub tweezer: f64,
    /// omega0 units
    pub window: Option<f64>,
    pub wall_thickness: Vec<usize>,
    /// rad/s
    pub tweezers: Vec<f64>,
    pub verify: VerifySettings,
}

#[derive(Debug, Clone)]
pub struct EvolveSettings {
    pub eta_omega: f64,
    /// Multiples of `1/kappa`.
    pub t_max_kappa: f64,
    pub samples: usize,
}

#[derive(Debug, Clone)]
pub struct SingleModeSettings {
    pub omega: f64,
    pub kappa: f64,
    pub n_th: f64,
    pub gamma: f64,
    pub delta_b: f64,
    pub eta_omega: Vec<f64>,
    pub lineshape: Vec<f64>,
    pub lineshape_points: usize,
    /// Half-span of the lineshape grid in units of the widest linewidth.
    pub lineshape_span: f64,
    pub evolve: Option<EvolveSettings>,
}

#[derive(Debug, Clone)]
pub struct PhaseSettings {
    pub eta_omega: Vec<f64>,
    pub e_com0: Vec<f64>,
    pub e_br0: f64,
}

#[derive(Debug, Clone)]
pub struct TwoModeSettings {
    pub omega_com: f64,
    pub kappa_com: f64,
    pub omega_br: f64,
    pub kappa_br: f64,
    pub n_th_com: f64,
    pub n_th_br: f64,
    pub gamma: f64,
    pub delta: f64,
    pub driven_ion: usize,
    pub eta_omega: Option<f64>,
    pub initial: Vec<(f64, f64)>,
    pub t_max: Option<f64>,
    pub sample_dt: f64,
    pub rtol: f64,
    pub record_every: usize,
    pub phase: Option<PhaseSettings>,
}

#[derive(Debug, Clone)]
pub struct Config {
    /// SHA-256 of the canonical (key-sorted) form of the file.
    pub hash: String,
    pub run: RunSettings,
    pub array: ArraySettings,
    pub cavity: Option<CavitySettings>,
    pub singlemode: Option<SingleModeSettings>,
    pub twomode: Option<TwoModeSettings>,
}

struct Section<'a> {
    path: String,
    table: &'a Table,
    used: RefCell<BTreeSet<String>>,
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::String(_) => "a string",
        Value::Integer(_) => "an integer",
        Value::Float(_) => "a float",
        Value::Boolean(_) => "a boolean",
        Value::Datetime(_) => "a datetime",
        Value::Array(_) => "an array",
        Value::Table(_) => "a table",
    }
}

fn as_number(v: &Value) -> Option<f64> {
    match v {
        Value::Integer(i) => Some(*i as f64),
        Value::Float(f) => Some(*f),
        _ => None,
    }
}

impl<'a> Section<'a> {
    fn new(path: impl Into<String>, table: &'a Table) -> Self {
        Self {
            path: path.into(),
            table,
            used: RefCell::new(BTreeSet::new()),
        }
    }

    fn key_path(&self, key: &str) -> String {
        if self.path.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.path)
        }
    }

    fn err(&self, key: &str, msg: impl Into<String>) -> ConfigError {
        ConfigError::new(self.key_path(key), msg)
    }

    fn get(&self, key: &str) -> Option<&'a Value> {
        self.used.borrow_mut().insert(key.to_string());
        self.table.get(key)
    }

    fn required<T>(&self, key: &str, v: Option<T>) -> Result<T> {
        v.ok_or_else(|| self.err(key, "missing required key"))
    }

    fn number(&self, key: &str) -> Result<Option<f64>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => {
                let x = as_number(v)
                    .ok_or_else(|| self.err(key, format!("expected a number, found {}", type_name(v))))?;
                if !x.is_finite() {
                    return Err(self.err(key, "must be finite"));
                }
                Ok(Some(x))
            }
        }
    }

    fn positive(&self, key: &str) -> Result<Option<f64>> {
        let v = self.number(key)?;
        if let Some(x) = v {
            if x <= 0.0 {
                return Err(self.err(key, format!("must be positive, got {x}")));
            }
        }
        Ok(v)
    }

    fn non_negative(&self, key: &str) -> Result<Option<f64>> {
        let v = self.number(key)?;
        if let Some(x) = v {
            if x < 0.0 {
                return Err(self.err(key, format!("must be non-negative, got {x}")));
            }
        }
        Ok(v)
    }

    fn count(&self, key: &str) -> Result<Option<usize>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as usize)),
            Some(v) => Err(self.err(
                key,
                format!("expected a non-negative integer, found {}", type_name(v)),
            )),
        }
    }

    fn string(&self, key: &str) -> Result<Option<&'a str>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.as_str())),
            Some(v) => Err(self.err(key, format!("expected a string, found {}", type_name(v)))),
        }
    }

    fn boolean(&self, key: &str) -> Result<Option<bool>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Boolean(b)) => Ok(Some(*b)),
            Some(v) => Err(self.err(key, format!("expected a boolean, found {}", type_name(v)))),
        }
    }

    /// Frequency string, returned in units of omega0.
    fn frequency(&self, key: &str, omega0: f64) -> Result<Option<f64>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => {
                let (v, unit) = parse_frequency(s).map_err(|m| self.err(key, m))?;
                Ok(Some(unit.to_omega0(v, omega0)))
            }
            Some(v) => Err(self.err(
                key,
                format!("expected a frequency string such as \"2.4 MHz x2pi\", found {}", type_name(v)),
            )),
        }
    }

    fn positive_frequency(&self, key: &str, omega0: f64) -> Result<Option<f64>> {
        let v = self.frequency(key, omega0)?;
        if let Some(x) = v {
            if x <= 0.0 {
                return Err(self.err(key, "must be positive"));
            }
        }
        Ok(v)
    }

    fn non_negative_frequency(&self, key: &str, omega0: f64) -> Result<Option<f64>> {
        let v = self.frequency(key, omega0)?;
        if let Some(x) = v {
            if x < 0.0 {
                return Err(self.err(key, "must be non-negative"));
            }
        }
        Ok(v)
    }

    /// List or `{start, stop, count}` table. With `omega0`, values carry a
    /// frequency unit (table key `unit`, or strings in a list).
    fn grid(&self, key: &str, omega0: Option<f64>) -> Result<Option<Vec<f64>>> {
        let Some(v) = self.get(key) else {
            return Ok(None);
        };
        let path = self.key_path(key);
        let values = match v {
            Value::Array(items) => {
                let mut out = Vec::with_capacity(items.len());
                for (i, item) in items.iter().enumerate() {
                    let p = format!("{path}[{i}]");
                    let x = match (item, omega0) {
                        (Value::String(s), Some(w0)) => {
                            let (v, unit) = parse_frequency(s).map_err(|m| ConfigError::new(&p, m))?;
                            unit.to_omega0(v, w0)
                        }
                        (other, None) => as_number(other).ok_or_else(|| {
                            ConfigError::new(&p, format!("expected a number, found {}", type_name(other)))
                        })?,
                        (other, Some(_)) => {
                            return Err(ConfigError::new(
                                &p,
                                format!(
                                    "expected a frequency string, found {}; or use a {{start, stop, count, unit}} table",
                                    type_name(other)
                                ),
                            ))
                        }
                    };
                    out.push(x);
                }
                out
            }
            Value::Table(t) => {
                let sec = Section::new(path.clone(), t);
                let start = sec.required("start", sec.number("start")?)?;
                let stop = sec.required("stop", sec.number("stop")?)?;
                let count = sec.required("count", sec.count("count")?)?;
                let spacing = sec.string("spacing")?.unwrap_or("linear");
                let unit = match (sec.string("unit")?, omega0) {
                    (Some(u), Some(_)) => Some(parse_unit(u).map_err(|m| sec.err("unit", m))?),
                    (None, Some(_)) => return Err(sec.err("unit", "frequency grids need a unit")),
                    (Some(_), None) => return Err(sec.err("unit", "this grid is dimensionless")),
                    (None, None) => None,
                };
                sec.finish()?;
                if count == 0 {
                    return Err(ConfigError::new(format!("{path}.count"), "must be at least 1"));
                }
                let raw: Vec<f64> = match spacing {
                    "linear" => (0..count)
                        .map(|i| {
                            if count == 1 {
                                start
                            } else {
                                let k = (count - 1) as f64;
                                (start * (k - i as f64) + stop * i as f64) / k
                            }
                        })
                        .collect(),
                    "log" => {
                        if start <= 0.0 || stop <= 0.0 {
                            return Err(ConfigError::new(
                                format!("{path}.start"),
                                "log grids need positive bounds",
                            ));
                        }
                        let (a, b) = (start.ln(), stop.ln());
                        (0..count)
                            .map(|i| {
                                if count == 1 {
                                    start
                                } else {
                                    (a + (b - a) * i as f64 / (count - 1) as f64).exp()
                                }
                            })
                            .collect()
                    }
                    other => {
                        return Err(ConfigError::new(
                            format!("{path}.spacing"),
                            format!("unknown spacing `{other}` (linear or log)"),
                        ))
                    }
                };
                match (unit, omega0) {
                    (Some(u), Some(w0)) => raw.into_iter().map(|x| u.to_omega0(x, w0)).collect(),
                    _ => raw,
                }
            }
            other => {
                return Err(ConfigError::new(
                    path,
                    format!("expected a list or a {{start, stop, count}} table, found {}", type_name(other)),
                ))
            }
        };
        if values.is_empty() {
            return Err(ConfigError::new(path, "grid must be non-empty"));
        }
        Ok(Some(values))
    }

    fn sub(&self, key: &str) -> Result<Option<Section<'a>>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Table(t)) => Ok(Some(Section::new(self.key_path(key), t))),
            Some(v) => Err(self.err(key, format!("expected a table, found {}", type_name(v)))),
        }
    }

    fn finish(&self) -> Result<()> {
        let used = self.used.borrow();
        match self.table.keys().find(|k| !used.contains(k.as_str())) {
            Some(k) => Err(self.err(k, "unknown key")),
            None => Ok(()),
        }
    }
}

/// Key-sorted JSON rendering of a TOML document, independent of how the
/// keys were ordered in the file.
pub fn canonical_json(v: &Value) -> Json {
    match v {
        Value::String(s) => Json::String(s.clone()),
        Value::Integer(i) => Json::from(*i),
        Value::Float(f) => serde_json::Number::from_f64(*f)
            .map(Json::Number)
            .unwrap_or_else(|| Json::String(f.to_string())),
        Value::Boolean(b) => Json::Bool(*b),
        Value::Datetime(d) => Json::String(d.to_string()),
        Value::Array(a) => Json::Array(a.iter().map(canonical_json).collect()),
        Value::Table(t) => {
            let mut keys: Vec<&String> = t.keys().collect();
            keys.sort();
            let mut m = serde_json::Map::new();
            for k in keys {
                m.insert(k.clone(), canonical_json(&t[k]));
            }
            Json::Object(m)
        }
    }
}

fn canonical_string(v: &Json, out: &mut String) {
    match v {
        Json::Object(m) => {
            let mut keys: Vec<&String> = m.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Json::String((*k).clone()).to_string());
                out.push(':');
                canonical_string(&m[k.as_str()], out);
            }
            out.push('}');
        }
        Json::Array(a) => {
            out.push('[');
            for (i, x) in a.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                canonical_string(x, out);
            }
            out.push(']');
        }
        other => out.push_str(&other.to_string()),
    }
}

pub fn hash_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn config_hash(doc: &Value) -> String {
    let mut s = String::new();
    canonical_string(&canonical_json(doc), &mut s);
    hash_hex(s.as_bytes())
}

fn species(sec: &Section) -> Result<IonSpecies> {
    let name = sec.string("species")?;
    let mass = sec.positive("mass_amu")?;
    let linewidth = match sec.get("linewidth") {
        None => None,
        Some(Value::String(s)) => {
            let (v, unit) = parse_frequency(s).map_err(|m| sec.err("linewidth", m))?;
            match unit {
                FreqUnit::Angular(scale) if v > 0.0 => Some(v * scale),
                FreqUnit::Angular(_) => return Err(sec.err("linewidth", "must be positive")),
                FreqUnit::Omega0 => {
                    return Err(sec.err("linewidth", "give the natural linewidth in physical units"))
                }
            }
        }
        Some(v) => return Err(sec.err("linewidth", format!("expected a frequency string, found {}", type_name(v)))),
    };
    match (name, mass) {
        (Some("Ca40") | Some("40Ca+"), None) => {
            let mut sp = IonSpecies::calcium40();
            if let Some(g) = linewidth {
                sp.linewidth = g;
            }
            Ok(sp)
        }
        (Some(other), None) => Err(sec.err(
            "species",
            format!("unknown species `{other}`; give mass_amu and linewidth instead"),
        )),
        (Some(_), Some(_)) => Err(sec.err("mass_amu", "give either species or mass_amu, not both")),
        (None, Some(m)) => {
            let g = sec.required("linewidth", linewidth)?;
            IonSpecies::singly_charged(m, g).map_err(|e| sec.err("mass_amu", e.to_string()))
        }
        (None, None) => Err(sec.err("species", "missing: give species or mass_amu")),
    }
}

fn array_settings(sec: &Section) -> Result<ArraySettings> {
    let species = species(sec)?;
    let spacing_um = sec.required("spacing_um", sec.positive("spacing_um")?)?;
    let spacing = spacing_um * 1e-6;
    let n_ions = sec.count("n_ions")?;
    if let Some(n) = n_ions {
        if n < 3 {
            return Err(sec.err("n_ions", "need at least 3 ions"));
        }
    }
    let edge_trap = match sec.grid("edge_trap", None)? {
        None => Vec::new(),
        Some(v) => {
            if v.iter().any(|x| *x < 0.0) {
                return Err(sec.err("edge_trap", "entries must be non-negative"));
            }
            if let Some(n) = n_ions {
                if v.len() != n {
                    return Err(sec.err("edge_trap", format!("expected {n} entries, got {}", v.len())));
                }
            }
            v
        }
    };
    sec.finish()?;
    Ok(ArraySettings {
        omega0: unit_scale(&species, spacing),
        species,
        n_ions,
        spacing,
        edge_trap,
    })
}

fn walls(sec: &Section) -> Result<(usize, usize)> {
    match sec.get("walls") {
        None => Err(sec.err("walls", "missing required key")),
        Some(Value::Integer(w)) if *w >= 1 => Ok((*w as usize, *w as usize)),
        Some(Value::Array(a)) if a.len() == 2 => {
            let side = |v: &Value| match v {
                Value::Integer(w) if *w >= 1 => Ok(*w as usize),
                _ => Err(sec.err("walls", "wall thicknesses must be positive integers")),
            };
            Ok((side(&a[0])?, side(&a[1])?))
        }
        Some(_) => Err(sec.err("walls", "expected a positive integer or [left, right]")),
    }
}

fn cavity_settings(sec: &Section, omega0: f64) -> Result<CavitySettings> {
    let n_system = sec.required("n_system", sec.count("n_system")?)?;
    if n_system == 0 {
        return Err(sec.err("n_system", "must be at least 1"));
    }
    let (wall_left, wall_right) = walls(sec)?;
    let tweezer = sec.required("tweezer", sec.positive_frequency("tweezer", omega0)?)? * omega0;
    let window = sec.positive_frequency("window", omega0)?;
    let wall_thickness = match sec.grid("wall_thickness", None)? {
        None => vec![wall_left],
        Some(v) => {
            let mut out = Vec::with_capacity(v.len());
            for x in v {
                if x < 1.0 || x.fract() != 0.0 {
                    return Err(sec.err("wall_thickness", "entries must be positive integers"));
                }
                out.push(x as usize);
            }
            out
        }
    };
    let tweezers = match sec.grid("tweezers", Some(omega0))? {
        None => vec![tweezer],
        Some(v) => {
            if v.iter().any(|x| *x <= 0.0) {
                return Err(sec.err("tweezers", "entries must be positive"));
            }
            v.into_iter().map(|x| x * omega0).collect()
        }
    };
    let verify = match sec.sub("verify")? {
        None => VerifySettings {
            mode: None,
            t_max: None,
            samples: 1000,
        },
        Some(v) => {
            let s = VerifySettings {
                mode: v.count("mode")?,
                t_max: v.positive("t_max")?,
                samples: v.count("samples")?.unwrap_or(1000),
            };
            if s.samples < 2 {
                return Err(v.err("samples", "need at least 2 samples"));
            }
            v.finish()?;
            s
        }
    };
    let center = sec.count("center")?;
    sec.finish()?;
    Ok(CavitySettings {
        n_system,
        wall_left,
        wall_right,
        center,
        tweezer,
        window,
        wall_thickness,
        tweezers,
        verify,
    })
}

fn singlemode_settings(sec: &Section, omega0: f64, species: &IonSpecies) -> Result<SingleModeSettings> {
    let omega = sec.required("omega", sec.positive_frequency("omega", omega0)?)?;
    let kappa = sec.required("kappa", sec.positive_frequency("kappa", omega0)?)?;
    let gamma = sec
        .positive_frequency("gamma", omega0)?
        .unwrap_or(species.linewidth / omega0);
    let n_th = sec
        .non_negative("n_th")?
        .unwrap_or_else(|| doppler_occupation(gamma, omega));
    let delta_b = sec.frequency("delta_b", omega0)?.unwrap_or(0.0);
    let eta_omega = sec.required("eta_omega", sec.grid("eta_omega", Some(omega0))?)?;
    if eta_omega.iter().any(|x| *x < 0.0) {
        return Err(sec.err("eta_omega", "entries must be non-negative"));
    }
    let lineshape = sec.grid("lineshape", Some(omega0))?.unwrap_or_default();
    if lineshape.iter().any(|x| *x <= 0.0) {
        return Err(sec.err("lineshape", "entries must be positive"));
    }
    let lineshape_points = sec.count("lineshape_points")?.unwrap_or(401);
    if lineshape_points < 3 {
        return Err(sec.err("lineshape_points", "need at least 3 points"));
    }
    let lineshape_span = sec.positive("lineshape_span")?.unwrap_or(5.0);
    let evolve = match sec.sub("evolve")? {
        None => None,
        Some(e) => {
            let s = EvolveSettings {
                eta_omega: e.required("eta_omega", e.non_negative_frequency("eta_omega", omega0)?)?,
                t_max_kappa: e.positive("t_max_kappa")?.unwrap_or(30.0),
                samples: e.count("samples")?.unwrap_or(600),
            };
            e.finish()?;
            Some(s)
        }
    };
    sec.finish()?;
    Ok(SingleModeSettings {
        omega,
        kappa,
        n_th,
        gamma,
        delta_b,
        eta_omega,
        lineshape,
        lineshape_points,
        lineshape_span,
        evolve,
    })
}

fn initial_energies(sec: &Section) -> Result<Vec<(f64, f64)>> {
    match sec.get("initial") {
        None => Ok(vec![(0.5, 0.5)]),
        Some(Value::Array(items)) if !items.is_empty() => items
            .iter()
            .enumerate()
            .map(|(i, item)| {
                let p = format!("{}[{i}]", sec.key_path("initial"));
                match item {
                    Value::Array(pair) if pair.len() == 2 => {
                        let e = |v: &Value| {
                            as_number(v)
                                .filter(|x| x.is_finite() && *x >= 0.0)
                                .ok_or_else(|| ConfigError::new(&p, "energies must be non-negative numbers"))
                        };
                        Ok((e(&pair[0])?, e(&pair[1])?))
                    }
                    _ => Err(ConfigError::new(&p, "expected [E_COM0, E_BR0]")),
                }
            })
            .collect(),
        Some(_) => Err(sec.err("initial", "expected a non-empty list of [E_COM0, E_BR0] pairs")),
    }
}

fn twomode_settings(sec: &Section, omega0: f64, species: &IonSpecies) -> Result<TwoModeSettings> {
    let omega_com = sec.required("omega_com", sec.positive_frequency("omega_com", omega0)?)?;
    let kappa_com = sec.required("kappa_com", sec.positive_frequency("kappa_com", omega0)?)?;
    let omega_br = sec.required("omega_br", sec.positive_frequency("omega_br", omega0)?)?;
    let kappa_br = sec.required("kappa_br", sec.positive_frequency("kappa_br", omega0)?)?;
    let gamma = sec
        .positive_frequency("gamma", omega0)?
        .unwrap_or(species.linewidth / omega0);
    let n_th_com = sec
        .non_negative("n_th_com")?
        .unwrap_or_else(|| doppler_occupation(gamma, omega_com));
    let n_th_br = sec
        .non_negative("n_th_br")?
        .unwrap_or_else(|| doppler_occupation(gamma, omega_br));
    let delta = sec.frequency("delta", omega0)?.unwrap_or(omega_br);
    let driven_ion = sec.count("driven_ion")?.unwrap_or(0);
    if driven_ion > 1 {
        return Err(sec.err("driven_ion", "must be 0 or 1"));
    }
    let eta_omega = sec.non_negative_frequency("eta_omega", omega0)?;
    let initial = initial_energies(sec)?;
    let t_max = sec.positive("t_max")?;
    let sample_dt = sec.positive("sample_dt")?.unwrap_or(0.1);
    let rtol = sec.positive("rtol")?.unwrap_or(1e-8);
    let record_every = sec.count("record_every")?.unwrap_or(10).max(1);
    let phase = match sec.sub("phase")? {
        None => None,
        Some(p) => {
            let eta = p.required("eta_omega", p.grid("eta_omega", Some(omega0))?)?;
            if eta.iter().any(|x| *x < 0.0) {
                return Err(p.err("eta_omega", "entries must be non-negative"));
            }
            let e_com0 = p.required("e_com0", p.grid("e_com0", None)?)?;
            if e_com0.iter().any(|x| *x < 0.0) {
                return Err(p.err("e_com0", "energies must be non-negative"));
            }
            let s = PhaseSettings {
                eta_omega: eta,
                e_com0,
                e_br0: p.non_negative("e_br0")?.unwrap_or(0.5),
            };
            p.finish()?;
            Some(s)
        }
    };
    sec.finish()?;
    Ok(TwoModeSettings {
        omega_com,
        kappa_com,
        omega_br,
        kappa_br,
        n_th_com,
        n_th_br,
        gamma,
        delta,
        driven_ion,
        eta_omega,
        initial,
        t_max,
        sample_dt,
        rtol,
        record_every,
        phase,
    })
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let doc: Table = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::new("", format!("malformed TOML: {e}")))?;
        let hash = config_hash(&Value::Table(doc.clone()));
        let root = Section::new("", &doc);

        let run = match root.sub("run")? {
            None => RunSettings {
                kind: None,
                out: None,
                cache: true,
                cache_dir: None,
            },
            Some(r) => {
                let kind = match r.string("kind")? {
                    None => None,
                    Some(k) => Some(RunKind::parse(k).ok_or_else(|| {
                        r.err("kind", format!("unknown run kind `{k}`"))
                    })?),
                };
                let s = RunSettings {
                    kind,
                    out: r.string("out")?.map(PathBuf::from),
                    cache: r.boolean("cache")?.unwrap_or(true),
                    cache_dir: r.string("cache_dir")?.map(PathBuf::from),
                };
                r.finish()?;
                s
            }
        };
        let array_sec = root
            .sub("array")?
            .ok_or_else(|| ConfigError::new("array", "missing required section"))?;
        let array = array_settings(&array_sec)?;
        let w0 = array.omega0;
        let cavity = root
            .sub("cavity")?
            .map(|s| cavity_settings(&s, w0))
            .transpose()?;
        let singlemode = root
            .sub("singlemode")?
            .map(|s| singlemode_settings(&s, w0, &array.species))
            .transpose()?;
        let twomode = root
            .sub("twomode")?
            .map(|s| twomode_settings(&s, w0, &array.species))
            .transpose()?;
        root.finish()?;
        Ok(Self {
            hash,
            run,
            array,
            cavity,
            singlemode,
            twomode,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("", format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Resolve the run kind against the one named on the command line.
    pub fn check_kind(&self, requested: RunKind) -> Result<()> {
        match self.run.kind {
            Some(k) if k != requested => Err(ConfigError::new(
                "run.kind",
                format!("config is for `{}` but `{}` was requested", k.as_str(), requested.as_str()),
            )),
            _ => Ok(()),
        }
    }

    pub fn need_cavity(&self) -> Result<&CavitySettings> {
        self.cavity
            .as_ref()
            .ok_or_else(|| ConfigError::new("cavity", "missing required section"))
    }

    pub fn need_n_ions(&self) -> Result<usize> {
        self.array
            .n_ions
            .ok_or_else(|| ConfigError::new("array.n_ions", "missing required key"))
    }

    pub fn need_singlemode(&self) -> Result<&SingleModeSettings> {
        self.singlemode
            .as_ref()
            .ok_or_else(|| ConfigError::new("singlemode", "missing required section"))
    }

    pub fn need_twomode(&self) -> Result<&TwoModeSettings> {
        self.twomode
            .as_ref()
            .ok_or_else(|| ConfigError::new("twomode", "missing required section"))
    }
}
