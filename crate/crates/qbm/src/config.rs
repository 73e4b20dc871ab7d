//! TOML experiment files.
//!
//! A file names a preset (`two_level` by default, `ratchet`, or `none`); the
//! file's tables are merged key by key over the preset's, except `[coupling]`,
//! which replaces the preset's couplings as a whole when present. Syntax and
//! type errors carry line and column; everything else is collected into one
//! [`ConfigError::Validation`].

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::CMatrix;
use crate::bath::{BathSpec, Dispersion, FormFactor, Occupation, RadialTable};
use crate::dyson::QuadratureGrid;
use crate::lindblad::Alpha;
use crate::particle::{
    HoppingSpec, InternalSystem, PeriodicBox, build_laplacian, build_ratchet, ratchet_bath_1, ratchet_bath_2,
    sigma_x,
};

const TWO_LEVEL: &str = include_str!("../configs/two_level.toml");
const RATCHET: &str = include_str!("../configs/ratchet.toml");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{origin}:{line}:{column}: {message}")]
    Parse { origin: String, line: usize, column: usize, message: String },
    #[error("invalid configuration:\n  - {}", .issues.join("\n  - "))]
    Validation { issues: Vec<String> },
}

impl ConfigError {
    pub fn issues(&self) -> &[String] {
        match self {
            Self::Validation { issues } => issues,
            _ => &[],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Correlations,
    Rates,
    Certify,
    Evolve,
    Kinetic,
    Gillespie,
    Ratchet,
    Dyson,
    Decay,
}

impl Command {
    pub const ALL: [Command; 9] = [
        Self::Correlations,
        Self::Rates,
        Self::Certify,
        Self::Evolve,
        Self::Kinetic,
        Self::Gillespie,
        Self::Ratchet,
        Self::Dyson,
        Self::Decay,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Correlations => "correlations",
            Self::Rates => "rates",
            Self::Certify => "certify",
            Self::Evolve => "evolve",
            Self::Kinetic => "kinetic",
            Self::Gillespie => "gillespie",
            Self::Ratchet => "ratchet",
            Self::Dyson => "dyson",
            Self::Decay => "decay",
        }
    }

    pub fn is_stochastic(self) -> bool {
        self == Self::Gillespie
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A dense matrix as `re` and optional `im` rows, or a named preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixEntry {
    Named(String),
    Dense {
        re: Vec<Vec<f64>>,
        #[serde(default)]
        im: Option<Vec<Vec<f64>>>,
    },
}

/// Radial samples for a tabulated profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileEntry {
    Named(String),
    Table { k: Vec<f64>, values: Vec<f64> },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathSection {
    pub dimension: Option<usize>,
    pub dispersion: Option<ProfileEntry>,
    pub form_factor: Option<ProfileEntry>,
    pub occupation: Option<ProfileEntry>,
    pub support_radius: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InternalSection {
    pub hamiltonian: Option<MatrixEntry>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSection {
    pub operator: Option<MatrixEntry>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoppingSection {
    pub kind: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSection {
    pub dimension: Option<usize>,
    pub side: Option<usize>,
    pub stencil_radius: Option<i64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSection {
    pub psd: Option<f64>,
    pub trace_drift: Option<f64>,
    pub rate: Option<f64>,
    pub tv: Option<f64>,
    pub tail: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelationsSection {
    pub points: Option<Vec<Vec<i64>>>,
    pub times: Option<Vec<f64>>,
    /// Defaults to the coupled baths.
    pub baths: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesSection {
    pub points: Option<Vec<Vec<i64>>>,
    pub omegas: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifySection {
    /// Length of the trace-drift run.
    pub tau: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveSection {
    pub tau_final: Option<f64>,
    pub dtau: Option<f64>,
    pub record_every: Option<usize>,
    pub initial: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KineticSection {
    pub cells: Option<usize>,
    pub tau_final: Option<f64>,
    pub dtau: Option<f64>,
    pub snapshot_every: Option<usize>,
    pub start_momentum: Option<Vec<f64>>,
    pub start_level: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GillespieSection {
    pub trajectories: Option<usize>,
    pub tau_final: Option<f64>,
    pub tv_bins: Option<usize>,
    pub logged_trajectories: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatchetSection {
    pub swap: Option<bool>,
    pub tau_final: Option<f64>,
    pub dtau: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DysonSection {
    pub mode: Option<String>,
    pub bath: Option<String>,
    pub hamiltonian: Option<MatrixEntry>,
    pub operator: Option<MatrixEntry>,
    pub ring_side: Option<usize>,
    pub bath_side: Option<usize>,
    pub lambdas: Option<Vec<f64>>,
    pub tau: Option<f64>,
    pub n_max: Option<usize>,
    pub spectral_times: Option<Vec<f64>>,
    pub nodes_per_panel: Option<usize>,
    pub phase_per_panel: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecaySection {
    pub bath: Option<String>,
    pub witness: Option<String>,
    pub t_min: Option<f64>,
    pub t_max: Option<f64>,
    pub points: Option<usize>,
    pub box_radius: Option<i64>,
}

/// The file as written, merged over its preset. Every key is optional here;
/// [`ConfigFile::validate`] reports the missing ones.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub preset: Option<String>,
    pub seed: Option<u64>,
    pub alpha: Option<toml::Value>,
    pub out_dir: Option<PathBuf>,
    pub internal: Option<InternalSection>,
    #[serde(default)]
    pub bath: BTreeMap<String, BathSection>,
    #[serde(default)]
    pub coupling: BTreeMap<String, CouplingSection>,
    pub hopping: Option<HoppingSection>,
    pub lattice: Option<LatticeSection>,
    pub tolerances: Option<ToleranceSection>,
    pub correlations: Option<CorrelationsSection>,
    pub rates: Option<RatesSection>,
    pub certify: Option<CertifySection>,
    pub evolve: Option<EvolveSection>,
    pub kinetic: Option<KineticSection>,
    pub gillespie: Option<GillespieSection>,
    pub ratchet: Option<RatchetSection>,
    pub dyson: Option<DysonSection>,
    pub decay: Option<DecaySection>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Tolerances {
    pub psd: f64,
    pub trace_drift: f64,
    pub rate: f64,
    pub tv: f64,
    pub tail: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum InitialState {
    /// Ground state of S at the box centre.
    Ground,
    /// Maximally mixed internal state at the box centre.
    Mixed,
}

#[derive(Debug, Clone)]
pub struct CorrelationsPlan {
    pub points: Vec<Vec<i64>>,
    pub times: Vec<f64>,
    pub baths: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RatesPlan {
    pub points: Vec<Vec<i64>>,
    pub omegas: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct EvolvePlan {
    pub tau_final: f64,
    pub dtau: Option<f64>,
    pub record_every: usize,
    pub initial: InitialState,
}

#[derive(Debug, Clone)]
pub struct KineticPlan {
    pub cells: usize,
    pub tau_final: f64,
    pub dtau: f64,
    pub snapshot_every: usize,
    pub start_momentum: Vec<f64>,
    pub start_level: usize,
}

#[derive(Debug, Clone)]
pub struct GillespiePlan {
    pub trajectories: usize,
    pub tau_final: f64,
    pub tv_bins: usize,
    pub logged_trajectories: usize,
}

#[derive(Debug, Clone)]
pub struct RatchetPlan {
    pub swap: bool,
    pub tau_final: f64,
    pub dtau: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DysonMode {
    Scan,
    Compare,
    Spectral,
}

#[derive(Debug, Clone)]
pub struct DysonPlan {
    pub mode: DysonMode,
    pub bath: String,
    /// Internal system with the single coupling used on the ring.
    pub system: InternalSystem,
    pub ring_side: usize,
    pub bath_side: usize,
    pub lambdas: Vec<f64>,
    pub tau: f64,
    pub n_max: usize,
    pub spectral_times: Vec<f64>,
    pub quadrature: QuadratureGrid,
}

#[derive(Debug, Clone)]
pub struct DecayPlan {
    pub bath: String,
    pub witness: Option<String>,
    /// Log-spaced on `[t_min, t_max]`.
    pub times: Vec<f64>,
    pub box_radius: i64,
}

/// A validated experiment.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// Merged file contents after command-line overrides.
    pub source: ConfigFile,
    pub seed: Option<u64>,
    pub alpha: Alpha,
    pub out_dir: PathBuf,
    pub baths: BTreeMap<String, BathSpec>,
    /// Bath labels in coupling order; coupling `i` of `system` couples to bath `i`.
    pub coupled: Vec<String>,
    pub system: InternalSystem,
    pub hopping: HoppingSpec,
    pub lattice: PeriodicBox,
    pub stencil_radius: i64,
    pub tolerances: Tolerances,
    pub correlations: Option<CorrelationsPlan>,
    pub rates: Option<RatesPlan>,
    /// τ of the certify trace-drift run.
    pub certify_tau: Option<f64>,
    pub evolve: Option<EvolvePlan>,
    pub kinetic: Option<KineticPlan>,
    pub gillespie: Option<GillespiePlan>,
    pub ratchet: Option<RatchetPlan>,
    pub dyson: Option<DysonPlan>,
    pub decay: Option<DecayPlan>,
}

impl ExperimentConfig {
    /// SHA-256 of the canonical JSON form of the merged file, without `out_dir`.
    pub fn hash(&self) -> String {
        let source = ConfigFile { out_dir: None, ..self.source.clone() };
        let json = serde_json::to_string(&source).expect("config serialises");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Coupled baths in coupling order.
    pub fn coupled_baths(&self) -> Vec<BathSpec> {
        self.coupled.iter().map(|l| self.baths[l].clone()).collect()
    }

    /// Checks that everything `command` needs is present.
    pub fn require(&self, command: Command) -> Result<(), ConfigError> {
        let mut issues = Vec::new();
        if command.is_stochastic() && self.seed.is_none() {
            issues.push(format!("seed: required by `{command}` (set `seed` or pass --seed)"));
        }
        let missing = match command {
            Command::Correlations => self.correlations.is_none(),
            Command::Rates => self.rates.is_none(),
            Command::Certify => self.certify_tau.is_none(),
            Command::Evolve => self.evolve.is_none(),
            Command::Kinetic => self.kinetic.is_none(),
            Command::Gillespie => self.kinetic.is_none() || self.gillespie.is_none(),
            Command::Ratchet => self.ratchet.is_none(),
            Command::Dyson => self.dyson.is_none(),
            Command::Decay => self.decay.is_none(),
        };
        if missing {
            let sections = if command == Command::Gillespie { "[kinetic] and [gillespie]" } else { "" };
            issues.push(if sections.is_empty() {
                format!("[{command}]: section required by `{command}`")
            } else {
                format!("{sections}: sections required by `{command}`")
            });
        }
        if issues.is_empty() { Ok(()) } else { Err(ConfigError::Validation { issues }) }
    }
}

/// Reads, merges and validates `path`, then checks the needs of `command`.
pub fn parse_config(path: &Path, command: Option<Command>) -> Result<ExperimentConfig, ConfigError> {
    let config = read_config(path)?.validate()?;
    if let Some(c) = command {
        config.require(c)?;
    }
    Ok(config)
}

pub fn read_config(path: &Path) -> Result<ConfigFile, ConfigError> {
    let text =
        std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    parse_str(&text, &path.display().to_string())
}

/// Parses `text` and merges it over its preset.
pub fn parse_str(text: &str, origin: &str) -> Result<ConfigFile, ConfigError> {
    let parse_error = |e: toml::de::Error| {
        let (line, column) = e.span().map_or((0, 0), |s| line_column(text, s.start));
        ConfigError::Parse { origin: origin.to_string(), line, column, message: e.message().trim().to_string() }
    };
    let user: toml::Table = toml::from_str(text).map_err(parse_error)?;
    // Typed pass on the file alone, so type errors point into it.
    let typed: ConfigFile = toml::from_str(text).map_err(parse_error)?;
    let base = match typed.preset.as_deref().unwrap_or("two_level") {
        "two_level" => Some(TWO_LEVEL),
        "ratchet" => Some(RATCHET),
        "none" => None,
        other => {
            return Err(ConfigError::Validation {
                issues: vec![format!("preset: unknown preset {other:?}; use \"two_level\", \"ratchet\" or \"none\"")],
            });
        }
    };
    let Some(base) = base else { return Ok(typed) };
    let mut merged: toml::Table = toml::from_str(base).expect("bundled presets parse");
    if user.contains_key("coupling") {
        merged.remove("coupling");
    }
    merge(&mut merged, user);
    toml::Value::Table(merged).try_into().map_err(|e: toml::de::Error| ConfigError::Parse {
        origin: origin.to_string(),
        line: 0,
        column: 0,
        message: e.message().trim().to_string(),
    })
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

fn merge(into: &mut toml::Table, from: toml::Table) {
    for (key, value) in from {
        match (into.get_mut(&key), value) {
            (Some(toml::Value::Table(a)), toml::Value::Table(b)) => merge(a, b),
            (_, v) => {
                into.insert(key, v);
            }
        }
    }
}

/// `name(a, b, ...)` with numeric arguments; a bare `name` has none.
fn call(s: &str) -> Option<(&str, Vec<f64>)> {
    let s = s.trim();
    let Some(open) = s.find('(') else { return Some((s, Vec::new())) };
    let inner = s[open + 1..].strip_suffix(')')?;
    let args = if inner.trim().is_empty() {
        Vec::new()
    } else {
        inner.split(',').map(|a| a.trim().parse().ok()).collect::<Option<Vec<f64>>>()?
    };
    Some((s[..open].trim(), args))
}

#[derive(Default)]
struct Issues(Vec<String>);

impl Issues {
    fn push(&mut self, msg: impl Into<String>) {
        self.0.push(msg.into());
    }

    fn need<T: Clone>(&mut self, value: &Option<T>, key: &str) -> Option<T> {
        if value.is_none() {
            self.push(format!("{key}: missing"));
        }
        value.clone()
    }

    fn positive(&mut self, value: &Option<f64>, key: &str) -> Option<f64> {
        let v = self.need(value, key)?;
        if !(v > 0.0 && v.is_finite()) {
            self.push(format!("{key}: must be positive, got {v}"));
            return None;
        }
        Some(v)
    }

    fn count(&mut self, value: &Option<usize>, key: &str) -> Option<usize> {
        let v = self.need(value, key)?;
        if v == 0 {
            self.push(format!("{key}: must be at least 1"));
            return None;
        }
        Some(v)
    }

    fn nonempty<T: Clone>(&mut self, value: &Option<Vec<T>>, key: &str) -> Option<Vec<T>> {
        let v = self.need(value, key)?;
        if v.is_empty() {
            self.push(format!("{key}: must not be empty"));
            return None;
        }
        Some(v)
    }
}

fn parse_alpha(value: Option<&toml::Value>) -> Result<Alpha, String> {
    const SUPPORTED: &str = "supported values are 2 and \"inf\"";
    match value {
        None => Ok(Alpha::Two),
        Some(toml::Value::Integer(2)) => Ok(Alpha::Two),
        Some(toml::Value::Float(f)) if *f == 2.0 => Ok(Alpha::Two),
        Some(toml::Value::String(s)) if s == "inf" => Ok(Alpha::AboveTwo),
        Some(other) => Err(format!("alpha: {other} is not supported; {SUPPORTED}")),
    }
}

fn table(entry: &ProfileEntry, key: &str) -> Result<RadialTable, String> {
    match entry {
        ProfileEntry::Table { k, values } => {
            RadialTable::new(k.clone(), values.clone()).map_err(|e| format!("{key}: {e}"))
        }
        ProfileEntry::Named(s) => Err(format!("{key}: unknown preset {s:?}")),
    }
}

fn bath_spec(label: &str, section: &BathSection) -> Result<BathSpec, Vec<String>> {
    let key = |k: &str| format!("bath.{label}.{k}");
    let mut issues = Issues::default();
    let dimension = issues.need(&section.dimension, &key("dimension"));
    let dispersion = match section.dispersion.as_ref() {
        None => Some(Dispersion::Linear),
        Some(ProfileEntry::Named(s)) if s == "linear" => Some(Dispersion::Linear),
        Some(e) => table(e, &key("dispersion")).map(Dispersion::Tabulated).map_err(|m| issues.push(m)).ok(),
    };
    let mut radius = section.support_radius;
    let form_factor = match issues.need(&section.form_factor, &key("form_factor")) {
        None => None,
        Some(ProfileEntry::Named(s)) => match call(&s) {
            Some(("constant", a)) if a.len() == 1 => Some(FormFactor::Constant { amplitude: a[0] }),
            Some((name @ ("smooth_bump" | "acoustic_bump"), a)) if a.len() == 2 => {
                if radius.is_some_and(|r| r != a[0]) {
                    issues.push(format!("{}: radius {} disagrees with {s:?}", key("support_radius"), radius.unwrap()));
                }
                radius = Some(a[0]);
                Some(if name == "smooth_bump" {
                    FormFactor::SmoothBump { amplitude: a[1] }
                } else {
                    FormFactor::AcousticBump { amplitude: a[1] }
                })
            }
            _ => {
                issues.push(format!(
                    "{}: {s:?} is not one of constant(a), smooth_bump(r, a), acoustic_bump(r, a) or a table",
                    key("form_factor")
                ));
                None
            }
        },
        Some(e) => table(&e, &key("form_factor")).map(FormFactor::Tabulated).map_err(|m| issues.push(m)).ok(),
    };
    let occupation = match issues.need(&section.occupation, &key("occupation")) {
        None => None,
        Some(ProfileEntry::Named(s)) => match call(&s) {
            Some(("zero", a)) if a.is_empty() => Some(Occupation::Zero),
            Some(("bose_einstein", a)) if a.len() == 1 => Some(Occupation::BoseEinstein { beta: a[0] }),
            _ => {
                issues.push(format!("{}: {s:?} is not zero, bose_einstein(beta) or a table", key("occupation")));
                None
            }
        },
        Some(e) => table(&e, &key("occupation")).map(Occupation::Tabulated).map_err(|m| issues.push(m)).ok(),
    };
    let radius = issues.need(&radius, &key("support_radius"));
    match (dimension, dispersion, form_factor, occupation, radius) {
        (Some(d), Some(disp), Some(ff), Some(occ), Some(r)) if issues.0.is_empty() => {
            BathSpec::new(label, d, disp, ff, occ, r).map_err(|e| vec![format!("bath.{label}: {e}")])
        }
        _ => Err(issues.0),
    }
}

fn matrix(entry: &MatrixEntry, key: &str, named: impl Fn(&str) -> Option<CMatrix>) -> Result<CMatrix, String> {
    match entry {
        MatrixEntry::Named(s) => named(s).ok_or_else(|| format!("{key}: unknown preset {s:?}")),
        MatrixEntry::Dense { re, im } => {
            let n = re.len();
            if n == 0 || re.iter().any(|r| r.len() != n) {
                return Err(format!("{key}: `re` must be a non-empty square matrix"));
            }
            if let Some(im) = im
                && (im.len() != n || im.iter().any(|r| r.len() != n))
            {
                return Err(format!("{key}: `im` must have the shape of `re`"));
            }
            Ok(CMatrix::from_fn(n, n, |i, j| {
                Complex64::new(re[i][j], im.as_ref().map_or(0.0, |m| m[i][j]))
            }))
        }
    }
}

fn named_hamiltonian(s: &str) -> Option<CMatrix> {
    let (name, args) = call(s)?;
    let system = match (name, args.as_slice()) {
        ("two_level", [e]) => InternalSystem::two_level(*e).ok()?,
        ("ratchet", [e]) => InternalSystem::ratchet(*e).ok()?,
        _ => return None,
    };
    Some(system.hamiltonian().clone())
}

fn named_operator(s: &str) -> Option<CMatrix> {
    match s.trim() {
        "sigma_x" => Some(sigma_x()),
        "ratchet_bath_1" => Some(ratchet_bath_1()),
        "ratchet_bath_2" => Some(ratchet_bath_2()),
        _ => None,
    }
}

impl ConfigFile {
    /// Resolves every section, reporting all violations at once.
    pub fn validate(self) -> Result<ExperimentConfig, ConfigError> {
        let mut issues = Issues::default();
        let alpha = parse_alpha(self.alpha.as_ref()).map_err(|e| issues.push(e)).ok();

        let mut baths = BTreeMap::new();
        for (label, section) in &self.bath {
            match bath_spec(label, section) {
                Ok(spec) => {
                    baths.insert(label.clone(), spec);
                }
                Err(errs) => errs.into_iter().for_each(|e| issues.push(e)),
            }
        }
        let known = |label: &str| self.bath.contains_key(label);

        let internal = self.internal.clone().unwrap_or_default();
        let hamiltonian = issues
            .need(&internal.hamiltonian, "internal.hamiltonian")
            .and_then(|h| matrix(&h, "internal.hamiltonian", named_hamiltonian).map_err(|e| issues.push(e)).ok());
        if self.coupling.is_empty() {
            issues.push("coupling: at least one [coupling.<bath>] section is required");
        }
        let mut coupled = Vec::new();
        let mut operators = Vec::new();
        for (label, section) in &self.coupling {
            let key = format!("coupling.{label}.operator");
            if !known(label) {
                issues.push(format!("coupling.{label}: no bath labelled {label:?}"));
            }
            if let Some(op) = issues.need(&section.operator, &key)
                && let Ok(m) = matrix(&op, &key, named_operator).map_err(|e| issues.push(e))
            {
                coupled.push(label.clone());
                operators.push(m);
            }
        }
        let system = match hamiltonian {
            Some(h) if operators.len() == self.coupling.len() => {
                InternalSystem::new(h, operators).map_err(|e| issues.push(format!("internal: {e}"))).ok()
            }
            _ => None,
        };

        let lattice_section = self.lattice.clone().unwrap_or_default();
        let dim = issues.count(&lattice_section.dimension, "lattice.dimension");
        let side = issues.count(&lattice_section.side, "lattice.side");
        let stencil_radius = issues.need(&lattice_section.stencil_radius, "lattice.stencil_radius");
        if stencil_radius.is_some_and(|r| r < 0) {
            issues.push("lattice.stencil_radius: must be non-negative");
        }
        let lattice = match (dim, side) {
            (Some(d), Some(s)) => PeriodicBox::new(d, s).map_err(|e| issues.push(format!("lattice: {e}"))).ok(),
            _ => None,
        };
        if let (Some(s), Some(r)) = (side, stencil_radius)
            && (s as i64) < 2 * r + 1
        {
            issues.push(format!("lattice.side: {s} is below 2·stencil_radius + 1 = {}", 2 * r + 1));
        }
        for label in &coupled {
            if let (Some(spec), Some(d)) = (baths.get(label), dim)
                && spec.dimension < d
            {
                issues.push(format!("bath.{label}.dimension: {} is below the lattice dimension {d}", spec.dimension));
            }
        }

        let hopping_kind = self.hopping.clone().unwrap_or_default().kind;
        let hopping = match (issues.need(&hopping_kind, "hopping.kind").as_deref(), dim, &system) {
            (Some("laplacian"), Some(d), Some(sys)) => Some(build_laplacian(d, sys.dim())),
            (Some("ratchet"), Some(d), Some(sys)) => {
                if sys.dim() != 4 {
                    issues.push("hopping.kind: the ratchet hopping needs a four-level internal system");
                }
                Some(build_ratchet(d))
            }
            (Some("laplacian" | "ratchet"), _, _) => None,
            (Some(other), _, _) => {
                issues.push(format!("hopping.kind: {other:?} is not \"laplacian\" or \"ratchet\""));
                None
            }
            (None, _, _) => None,
        };

        let tol = self.tolerances.clone().unwrap_or_default();
        let psd = issues.positive(&tol.psd, "tolerances.psd");
        let trace_drift = issues.positive(&tol.trace_drift, "tolerances.trace_drift");
        let rate = issues.positive(&tol.rate, "tolerances.rate");
        let tv = issues.positive(&tol.tv, "tolerances.tv");
        let tail = issues.positive(&tol.tail, "tolerances.tail");
        let tolerances = (|| Some(Tolerances { psd: psd?, trace_drift: trace_drift?, rate: rate?, tv: tv?, tail: tail? }))();

        let correlations = self.correlations.as_ref().and_then(|s| {
            let points = issues.nonempty(&s.points, "correlations.points");
            let times = issues.nonempty(&s.times, "correlations.times");
            let labels = s.baths.clone().unwrap_or_else(|| coupled.clone());
            for l in &labels {
                if !known(l) {
                    issues.push(format!("correlations.baths: no bath labelled {l:?}"));
                }
                if let (Some(spec), Some(points)) = (baths.get(l), &points)
                    && points.iter().any(|p| p.len() != spec.dimension)
                {
                    issues.push(format!("correlations.points: bath {l:?} needs {}-component points", spec.dimension));
                }
            }
            Some(CorrelationsPlan { points: points?, times: times?, baths: labels })
        });

        let rates = self.rates.as_ref().and_then(|s| {
            let points = issues.nonempty(&s.points, "rates.points");
            let omegas = issues.nonempty(&s.omegas, "rates.omegas");
            if let Some(points) = &points {
                for l in &coupled {
                    if baths.get(l).is_some_and(|b| points.iter().any(|p| p.len() != b.dimension)) {
                        issues.push(format!("rates.points: bath {l:?} needs {}-component points", baths[l].dimension));
                    }
                }
            }
            Some(RatesPlan { points: points?, omegas: omegas? })
        });

        let certify_tau = self.certify.as_ref().and_then(|s| issues.positive(&s.tau, "certify.tau"));

        let evolve = self.evolve.as_ref().and_then(|s| {
            let tau_final = issues.positive(&s.tau_final, "evolve.tau_final");
            let dtau = s.dtau.and_then(|_| issues.positive(&s.dtau, "evolve.dtau"));
            let record_every = issues.count(&s.record_every.or(Some(1)), "evolve.record_every");
            let initial = match s.initial.as_deref().unwrap_or("ground") {
                "ground" => Some(InitialState::Ground),
                "mixed" => Some(InitialState::Mixed),
                other => {
                    issues.push(format!("evolve.initial: {other:?} is not \"ground\" or \"mixed\""));
                    None
                }
            };
            Some(EvolvePlan { tau_final: tau_final?, dtau, record_every: record_every?, initial: initial? })
        });

        let kinetic = self.kinetic.as_ref().and_then(|s| {
            let cells = issues.count(&s.cells, "kinetic.cells");
            let tau_final = issues.positive(&s.tau_final, "kinetic.tau_final");
            let dtau = issues.positive(&s.dtau, "kinetic.dtau");
            let start_momentum = issues.need(&s.start_momentum, "kinetic.start_momentum");
            let start_level = issues.need(&s.start_level, "kinetic.start_level");
            if let (Some(k), Some(d)) = (&start_momentum, self.coupling_dimension(&baths, &coupled))
                && k.len() != d
            {
                issues.push(format!("kinetic.start_momentum: needs {d} components"));
            }
            if let (Some(l), Some(sys)) = (start_level, &system)
                && l >= sys.dim()
            {
                issues.push(format!("kinetic.start_level: {l} is not below {}", sys.dim()));
            }
            Some(KineticPlan {
                cells: cells?,
                tau_final: tau_final?,
                dtau: dtau?,
                snapshot_every: s.snapshot_every.unwrap_or(0),
                start_momentum: start_momentum?,
                start_level: start_level?,
            })
        });

        let gillespie = self.gillespie.as_ref().and_then(|s| {
            let trajectories = issues.count(&s.trajectories, "gillespie.trajectories");
            let tau_final = issues.positive(&s.tau_final, "gillespie.tau_final");
            let tv_bins = issues.count(&s.tv_bins.or(Some(4)), "gillespie.tv_bins");
            Some(GillespiePlan {
                trajectories: trajectories?,
                tau_final: tau_final?,
                tv_bins: tv_bins?,
                logged_trajectories: s.logged_trajectories.unwrap_or(0),
            })
        });

        let ratchet = self.ratchet.as_ref().and_then(|s| {
            let tau_final = issues.positive(&s.tau_final, "ratchet.tau_final");
            let dtau = s.dtau.and_then(|_| issues.positive(&s.dtau, "ratchet.dtau"));
            if hopping_kind.as_deref() != Some("ratchet") || coupled.len() != 2 || dim != Some(1) {
                issues.push("ratchet: needs the ratchet hopping on a 1-dimensional lattice with two couplings");
            }
            Some(RatchetPlan { swap: s.swap.unwrap_or(false), tau_final: tau_final?, dtau })
        });

        let dyson = self.dyson.as_ref().and_then(|s| {
            let mode = match issues.need(&s.mode, "dyson.mode").as_deref() {
                Some("scan") => Some(DysonMode::Scan),
                Some("compare") => Some(DysonMode::Compare),
                Some("spectral") => Some(DysonMode::Spectral),
                Some(other) => {
                    issues.push(format!("dyson.mode: {other:?} is not scan, compare or spectral"));
                    None
                }
                None => None,
            };
            let bath = issues.need(&s.bath, "dyson.bath");
            if let Some(b) = &bath
                && !known(b)
            {
                issues.push(format!("dyson.bath: no bath labelled {b:?}"));
            }
            let h = issues
                .need(&s.hamiltonian, "dyson.hamiltonian")
                .and_then(|h| matrix(&h, "dyson.hamiltonian", named_hamiltonian).map_err(|e| issues.push(e)).ok());
            let w = issues
                .need(&s.operator, "dyson.operator")
                .and_then(|w| matrix(&w, "dyson.operator", named_operator).map_err(|e| issues.push(e)).ok());
            let system = match (h, w) {
                (Some(h), Some(w)) => {
                    InternalSystem::new(h, vec![w]).map_err(|e| issues.push(format!("dyson: {e}"))).ok()
                }
                _ => None,
            };
            let ring_side = issues.count(&s.ring_side, "dyson.ring_side");
            let bath_side = s.bath_side.or(ring_side);
            if let (Some(r), Some(b)) = (ring_side, bath_side)
                && b < r
            {
                issues.push(format!("dyson.bath_side: {b} is below the ring side {r}"));
            }
            let lambdas = issues.nonempty(&s.lambdas, "dyson.lambdas");
            if lambdas.as_ref().is_some_and(|l| l.iter().any(|&x| !(x > 0.0))) {
                issues.push("dyson.lambdas: must be positive");
            }
            let tau = issues.positive(&s.tau, "dyson.tau");
            let n_max = issues.need(&s.n_max, "dyson.n_max");
            let spectral_times = s.spectral_times.clone().unwrap_or_default();
            if mode == Some(DysonMode::Spectral) && spectral_times.is_empty() {
                issues.push("dyson.spectral_times: required in spectral mode");
            }
            let default = QuadratureGrid::default();
            let quadrature = QuadratureGrid {
                nodes_per_panel: s.nodes_per_panel.unwrap_or(default.nodes_per_panel),
                phase_per_panel: s.phase_per_panel.unwrap_or(default.phase_per_panel),
            };
            Some(DysonPlan {
                mode: mode?,
                bath: bath?,
                system: system?,
                ring_side: ring_side?,
                bath_side: bath_side?,
                lambdas: lambdas?,
                tau: tau?,
                n_max: n_max?,
                spectral_times,
                quadrature,
            })
        });

        let decay = self.decay.as_ref().and_then(|s| {
            let bath = issues.need(&s.bath, "decay.bath");
            for (key, label) in [("decay.bath", bath.as_ref()), ("decay.witness", s.witness.as_ref())] {
                if let Some(l) = label
                    && !known(l)
                {
                    issues.push(format!("{key}: no bath labelled {l:?}"));
                }
            }
            let t_min = issues.positive(&s.t_min, "decay.t_min");
            let t_max = issues.positive(&s.t_max, "decay.t_max");
            let points = issues.need(&s.points, "decay.points");
            if points.is_some_and(|p| p < 3) {
                issues.push("decay.points: at least 3 are needed for a fit");
            }
            let box_radius = issues.need(&s.box_radius, "decay.box_radius");
            if let (Some(lo), Some(hi)) = (t_min, t_max)
                && hi <= lo
            {
                issues.push("decay.t_max: must exceed t_min");
            }
            let (lo, hi, n) = (t_min?, t_max?, points?);
            let times =
                (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1).max(1) as f64)).collect::<Vec<f64>>();
            Some(DecayPlan { bath: bath?, witness: s.witness.clone(), times, box_radius: box_radius? })
        });

        if !issues.0.is_empty() {
            return Err(ConfigError::Validation { issues: issues.0 });
        }
        let out_dir = self.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
        // Every `None` below has pushed an issue.
        Ok(ExperimentConfig {
            seed: self.seed,
            alpha: alpha.expect("validated"),
            out_dir,
            baths,
            coupled,
            system: system.expect("validated"),
            hopping: hopping.expect("validated"),
            lattice: lattice.expect("validated"),
            stencil_radius: stencil_radius.expect("validated"),
            tolerances: tolerances.expect("validated"),
            correlations,
            rates,
            certify_tau,
            evolve,
            kinetic,
            gillespie,
            ratchet,
            dyson,
            decay,
            source: self,
        })
    }

    fn coupling_dimension(&self, baths: &BTreeMap<String, BathSpec>, coupled: &[String]) -> Option<usize> {
        coupled.first().and_then(|l| baths.get(l)).map(|b| b.dimension)
    }
}

/// Resolves a bundled preset on its own.
pub fn preset(name: &str) -> Result<ExperimentConfig, ConfigError> {
    parse_str(&format!("preset = {name:?}\n"), name)?.validate()
}
