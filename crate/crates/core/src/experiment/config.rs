//! Experiment configuration: TOML schema, presets and validation.
//!
//! The file is read into a `toml::Table`, deep-merged over the selected
//! preset and then walked field by field. Every problem is collected with
//! its dotted path so a single run reports all of them.

use std::fmt;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use toml::{Table, Value};

use super::ExperimentError;
use crate::chernoff::EnergyConvention;
use crate::linalg::ComplexMatrix;
use crate::model::{ArrayGeometry, PriorSupport, Scenario};

pub const DEFAULT_SEED: u64 = 1;

/// One field-level configuration problem.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Fig1,
    Fig2,
    Fig3,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Fig1, Preset::Fig2, Preset::Fig3];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig1 => "fig1",
            Preset::Fig2 => "fig2",
            Preset::Fig3 => "fig3",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }

    /// The preset as a TOML document, in the same schema as user files.
    pub fn source(self) -> &'static str {
        match self {
            Preset::Fig1 => FIG1,
            Preset::Fig2 => FIG2,
            Preset::Fig3 => FIG3,
        }
    }
}

const FIG1: &str = r#"
[scenario]
rx_elements = 20
tx_elements = 1
num_targets = 1
prior_deg = [-60.0, 60.0]

[[sweep]]
variable = "tx_elements"
values = [1, 2, 4, 8, 16, 32]
"#;

const FIG2: &str = r#"
[scenario]
rx_elements = 20
tx_elements = 32
num_targets = 2
prior_deg = [-60.0, 60.0]

[[sweep]]
variable = "num_targets"
values = [2, 5, 8]
"#;

const FIG3: &str = r#"
[scenario]
rx_elements = 20
tx_elements = 32
num_targets = 2
prior_deg = [-60.0, 60.0]

[[sweep]]
variable = "prior_support"
values = [[-60.0, 60.0], [-85.0, 85.0]]

[[sweep]]
variable = "num_targets"
values = [2, 5, 8]
"#;

#[derive(Clone, Debug, PartialEq)]
pub enum TxShape {
    Identity,
    /// `Σ₀[i][j] = ρ^|i−j|`.
    Exponential { rho: f64 },
    /// Explicit Hermitian positive-definite `N×N` matrix.
    Matrix { real: Vec<Vec<f64>>, imag: Vec<Vec<f64>> },
}

impl TxShape {
    fn build(&self, n: usize) -> ComplexMatrix {
        match self {
            TxShape::Identity => ComplexMatrix::identity(n),
            TxShape::Exponential { rho } => ComplexMatrix::from_fn(n, n, |i, j| {
                Complex64::new(rho.powi(i.abs_diff(j) as i32), 0.0)
            }),
            TxShape::Matrix { real, imag } => {
                ComplexMatrix::from_fn(n, n, |i, j| Complex64::new(real[i][j], imag[i][j]))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub rx_elements: usize,
    pub tx_elements: usize,
    pub num_targets: usize,
    pub snapshots: usize,
    pub noise_power: f64,
    pub amplitude_power: f64,
    pub wavelength: f64,
    /// Element spacing in wavelengths.
    pub rx_spacing: f64,
    pub tx_spacing: f64,
    pub prior_deg: (f64, f64),
    pub tx_shape: TxShape,
}

impl ScenarioConfig {
    /// Scenario at SNR 1; callers rescale with [`Scenario::with_snr`].
    pub fn build(&self) -> crate::Result<Scenario> {
        let ula = |n: usize, spacing: f64| {
            ArrayGeometry::new(
                (0..n).map(|i| i as f64 * spacing * self.wavelength).collect(),
                self.wavelength,
            )
        };
        Scenario::with_tx_shape(
            ula(self.rx_elements, self.rx_spacing)?,
            ula(self.tx_elements, self.tx_spacing)?,
            self.num_targets,
            self.snapshots,
            self.noise_power,
            self.noise_power,
            self.amplitude_power,
            PriorSupport::from_degrees(self.prior_deg.0, self.prior_deg.1)?,
            self.tx_shape.build(self.tx_elements),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SnrGrid {
    pub start_db: f64,
    pub stop_db: f64,
    pub step_db: f64,
}

impl SnrGrid {
    /// `start, start + step, …` up to and including `stop` (1e-9 dB slack).
    pub fn points(&self) -> Vec<f64> {
        let count = ((self.stop_db - self.start_db) / self.step_db + 1e-9).floor() as usize + 1;
        (0..count)
            .map(|i| self.start_db + i as f64 * self.step_db)
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepVariable {
    TxElements,
    NumTargets,
    PriorSupport,
    None,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::TxElements => "tx_elements",
            SweepVariable::NumTargets => "num_targets",
            SweepVariable::PriorSupport => "prior_support",
            SweepVariable::None => "none",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        [
            SweepVariable::TxElements,
            SweepVariable::NumTargets,
            SweepVariable::PriorSupport,
            SweepVariable::None,
        ]
        .into_iter()
        .find(|v| v.name() == name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SweepValue {
    TxElements(usize),
    NumTargets(usize),
    PriorSupport(f64, f64),
}

impl SweepValue {
    pub fn apply(&self, scenario: &mut ScenarioConfig) {
        match *self {
            SweepValue::TxElements(n) => scenario.tx_elements = n,
            SweepValue::NumTargets(k) => scenario.num_targets = k,
            SweepValue::PriorSupport(lo, hi) => scenario.prior_deg = (lo, hi),
        }
    }
}

impl fmt::Display for SweepValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepValue::TxElements(n) | SweepValue::NumTargets(n) => write!(f, "{n}"),
            SweepValue::PriorSupport(lo, hi) => write!(f, "{lo}:{hi}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sweep {
    pub variable: SweepVariable,
    pub values: Vec<SweepValue>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnergyMode {
    PlugIn,
    Averaged,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundsConfig {
    pub crb_samples: usize,
    pub energy: EnergyMode,
    pub energy_draws: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimulationConfig {
    pub enabled: bool,
    pub trials: usize,
    pub grid_step_deg: f64,
    /// Falls back to the top-level seed.
    pub seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleConfig {
    pub enabled: bool,
    pub quadrature_points: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub preset: Option<Preset>,
    pub seed: u64,
    pub scenario: ScenarioConfig,
    pub snr_grid: SnrGrid,
    pub sweeps: Vec<Sweep>,
    pub bounds: BoundsConfig,
    pub simulation: SimulationConfig,
    pub oracle: OracleConfig,
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn energy_convention(&self) -> EnergyConvention {
        match self.bounds.energy {
            EnergyMode::PlugIn => EnergyConvention::PlugIn,
            EnergyMode::Averaged => EnergyConvention::Averaged {
                draws: self.bounds.energy_draws,
                seed: self.seed,
            },
        }
    }

    pub fn simulation_seed(&self) -> u64 {
        self.simulation.seed.unwrap_or(self.seed)
    }

    /// Cartesian product of the sweeps, first sweep outermost.
    pub fn combinations(&self) -> Vec<Vec<SweepValue>> {
        let mut out = vec![Vec::new()];
        for sweep in &self.sweeps {
            if sweep.variable == SweepVariable::None {
                continue;
            }
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    sweep.values.iter().map(move |v| {
                        let mut next = prefix.clone();
                        next.push(*v);
                        next
                    })
                })
                .collect();
        }
        out
    }

    /// `sweep_value` column text for one combination.
    pub fn label(combination: &[SweepValue]) -> String {
        if combination.is_empty() {
            return "none".into();
        }
        combination
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(";")
    }

    pub fn scenario_for(&self, combination: &[SweepValue]) -> ScenarioConfig {
        let mut s = self.scenario.clone();
        for v in combination {
            v.apply(&mut s);
        }
        s
    }

    /// Loads `path` over `preset`; the file's own `preset` key is used
    /// when `preset` is `None`. At least one of the two is needed.
    pub fn load(path: Option<&Path>, preset: Option<Preset>) -> Result<Self, ExperimentError> {
        let user = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| ExperimentError::Io {
                    path: p.to_path_buf(),
                    source: e,
                })?;
                Some(parse_table(&text)?)
            }
            None => None,
        };
        let named = match (preset, user.as_ref().and_then(|t| t.get("preset"))) {
            (Some(p), _) => Some(p),
            (None, Some(Value::String(name))) => Some(Preset::from_name(name).ok_or_else(|| {
                ExperimentError::Validation(vec![Violation {
                    path: "preset".into(),
                    message: format!("unknown preset {name:?}, expected fig1, fig2 or fig3"),
                }])
            })?),
            (None, Some(_)) => {
                return Err(ExperimentError::Validation(vec![Violation {
                    path: "preset".into(),
                    message: "expected a string".into(),
                }]))
            }
            (None, None) => None,
        };
        if user.is_none() && named.is_none() {
            return Err(ExperimentError::Validation(vec![Violation {
                path: "<root>".into(),
                message: "neither a config file nor a preset was given".into(),
            }]));
        }
        let mut table = match named {
            Some(p) => parse_table(p.source())?,
            None => Table::new(),
        };
        if let Some(user) = user {
            deep_merge(&mut table, user);
        }
        if let Some(p) = named {
            table.insert("preset".into(), Value::String(p.name().into()));
        }
        from_table(&table)
    }

    /// Parses a complete TOML document (with optional `preset` key).
    pub fn from_toml_str(text: &str) -> Result<Self, ExperimentError> {
        let table = parse_table(text)?;
        let named = match table.get("preset") {
            Some(Value::String(name)) => Preset::from_name(name),
            _ => None,
        };
        match named {
            Some(p) => {
                let mut base = parse_table(p.source())?;
                deep_merge(&mut base, table);
                from_table(&base)
            }
            None => from_table(&table),
        }
    }
}

/// Parses `path` as a complete config.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig, ExperimentError> {
    ExperimentConfig::load(Some(path), None)
}

fn parse_table(text: &str) -> Result<Table, ExperimentError> {
    text.parse::<Table>()
        .map_err(|e| ExperimentError::Parse(e.to_string()))
}

/// Tables merge recursively; everything else (arrays included) is replaced.
fn deep_merge(base: &mut Table, over: Table) {
    for (key, value) in over {
        match (base.get_mut(&key), value) {
            (Some(Value::Table(b)), Value::Table(o)) => deep_merge(b, o),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

/// Collects violations while reading typed fields out of a table.
struct Walker {
    violations: Vec<Violation>,
}

impl Walker {
    fn report(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            path: path.into(),
            message: message.into(),
        });
    }

    fn unknown_keys(&mut self, table: &Table, prefix: &str, known: &[&str]) {
        for key in table.keys() {
            if !known.contains(&key.as_str()) {
                self.report(join(prefix, key), "unknown key");
            }
        }
    }

    fn section<'a>(&mut self, table: &'a Table, prefix: &str, key: &str) -> Option<&'a Table> {
        match table.get(key) {
            None => None,
            Some(Value::Table(t)) => Some(t),
            Some(_) => {
                self.report(join(prefix, key), "expected a table");
                None
            }
        }
    }

    fn uint(&mut self, t: Option<&Table>, prefix: &str, key: &str, default: Option<u64>) -> Option<u64> {
        let path = join(prefix, key);
        match t.and_then(|t| t.get(key)) {
            None => {
                if default.is_none() {
                    self.report(path, "required field is missing");
                }
                default
            }
            Some(v) => {
                let parsed = as_uint(v);
                if parsed.is_none() {
                    self.report(path, format!("expected a nonnegative integer, got {v}"));
                }
                parsed
            }
        }
    }

    fn count(&mut self, t: Option<&Table>, prefix: &str, key: &str, default: Option<usize>) -> Option<usize> {
        let v = self.uint(t, prefix, key, default.map(|d| d as u64))?;
        if v == 0 {
            self.report(join(prefix, key), "must be at least 1");
            return None;
        }
        usize::try_from(v).ok()
    }

    fn float(&mut self, t: Option<&Table>, prefix: &str, key: &str, default: Option<f64>) -> Option<f64> {
        let path = join(prefix, key);
        match t.and_then(|t| t.get(key)) {
            None => {
                if default.is_none() {
                    self.report(path, "required field is missing");
                }
                default
            }
            Some(v) => match as_float(v) {
                Some(x) if x.is_finite() => Some(x),
                Some(_) => {
                    self.report(path, "must be finite");
                    None
                }
                None => {
                    self.report(path, format!("expected a number, got {v}"));
                    None
                }
            },
        }
    }

    fn positive(&mut self, t: Option<&Table>, prefix: &str, key: &str, default: f64) -> Option<f64> {
        let x = self.float(t, prefix, key, Some(default))?;
        if x <= 0.0 {
            self.report(join(prefix, key), format!("must be positive, got {x}"));
            return None;
        }
        Some(x)
    }

    fn boolean(&mut self, t: Option<&Table>, prefix: &str, key: &str, default: bool) -> Option<bool> {
        match t.and_then(|t| t.get(key)) {
            None => Some(default),
            Some(Value::Boolean(b)) => Some(*b),
            Some(v) => {
                self.report(join(prefix, key), format!("expected true or false, got {v}"));
                None
            }
        }
    }

    fn string<'a>(&mut self, t: Option<&'a Table>, prefix: &str, key: &str) -> Option<&'a str> {
        match t.and_then(|t| t.get(key)) {
            None => None,
            Some(Value::String(s)) => Some(s),
            Some(v) => {
                self.report(join(prefix, key), format!("expected a string, got {v}"));
                None
            }
        }
    }

    fn prior(&mut self, v: &Value, path: &str) -> Option<(f64, f64)> {
        let pair = match v {
            Value::Array(a) if a.len() == 2 => (as_float(&a[0]), as_float(&a[1])),
            _ => {
                self.report(path, format!("expected [min_deg, max_deg], got {v}"));
                return None;
            }
        };
        let (Some(lo), Some(hi)) = pair else {
            self.report(path, format!("expected two numbers, got {v}"));
            return None;
        };
        if let Err(e) = PriorSupport::from_degrees(lo, hi) {
            self.report(path, format!("invalid prior support: {e}"));
            return None;
        }
        Some((lo, hi))
    }

    fn matrix(&mut self, t: &Table, prefix: &str, key: &str, n: Option<usize>) -> Option<Vec<Vec<f64>>> {
        let path = join(prefix, key);
        let Some(v) = t.get(key) else {
            self.report(path, "required field is missing");
            return None;
        };
        let rows: Option<Vec<Vec<f64>>> = v.as_array().and_then(|rows| {
            rows.iter()
                .map(|r| r.as_array()?.iter().map(as_float).collect())
                .collect()
        });
        let Some(rows) = rows else {
            self.report(path, "expected an array of numeric rows");
            return None;
        };
        if rows.iter().flatten().any(|x| !x.is_finite()) {
            self.report(path, "entries must be finite");
            return None;
        }
        if let Some(n) = n {
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                self.report(path, format!("expected a {n}x{n} matrix"));
                return None;
            }
        }
        Some(rows)
    }
}

fn join(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_string()
    } else {
        format!("{prefix}.{key}")
    }
}

fn as_uint(v: &Value) -> Option<u64> {
    v.as_integer().and_then(|i| u64::try_from(i).ok())
}

fn as_float(v: &Value) -> Option<f64> {
    match v {
        Value::Float(f) => Some(*f),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

const ROOT_KEYS: &[&str] = &[
    "preset", "seed", "scenario", "snr_grid", "sweep", "bounds", "simulation", "oracle", "output",
];
const SCENARIO_KEYS: &[&str] = &[
    "rx_elements",
    "tx_elements",
    "num_targets",
    "snapshots",
    "noise_power",
    "amplitude_power",
    "wavelength",
    "rx_spacing",
    "tx_spacing",
    "prior_deg",
    "tx_shape",
];

/// Validates a merged table into a config.
pub fn from_table(table: &Table) -> Result<ExperimentConfig, ExperimentError> {
    let mut w = Walker {
        violations: Vec::new(),
    };
    w.unknown_keys(table, "", ROOT_KEYS);
    let preset = match w.string(Some(table), "", "preset") {
        Some(name) => {
            let p = Preset::from_name(name);
            if p.is_none() {
                w.report("preset", format!("unknown preset {name:?}, expected fig1, fig2 or fig3"));
            }
            p
        }
        None => None,
    };
    let seed = w.uint(Some(table), "", "seed", Some(DEFAULT_SEED));

    let sc = w.section(table, "", "scenario");
    if let Some(sc) = sc {
        w.unknown_keys(sc, "scenario", SCENARIO_KEYS);
    }
    if sc.is_none() && !table.contains_key("scenario") {
        w.report("scenario", "required section is missing");
    }
    let rx_elements = w.count(sc, "scenario", "rx_elements", None);
    let tx_elements = w.count(sc, "scenario", "tx_elements", None);
    let num_targets = w.count(sc, "scenario", "num_targets", None);
    let snapshots = w.count(sc, "scenario", "snapshots", Some(40));
    let noise_power = w.positive(sc, "scenario", "noise_power", 1.0);
    let amplitude_power = w.float(sc, "scenario", "amplitude_power", Some(0.5));
    if amplitude_power.is_some_and(|x| x < 0.0) {
        w.report("scenario.amplitude_power", "must be nonnegative");
    }
    let wavelength = w.positive(sc, "scenario", "wavelength", 1.0);
    let rx_spacing = w.positive(sc, "scenario", "rx_spacing", 0.5);
    let tx_spacing = w.positive(sc, "scenario", "tx_spacing", 0.5);
    let prior_deg = match sc.and_then(|s| s.get("prior_deg")) {
        None => Some((-60.0, 60.0)),
        Some(v) => w.prior(v, "scenario.prior_deg"),
    };
    let tx_shape = parse_tx_shape(&mut w, sc, tx_elements);

    let g = w.section(table, "", "snr_grid");
    if let Some(g) = g {
        w.unknown_keys(g, "snr_grid", &["start_db", "stop_db", "step_db"]);
    }
    let start_db = w.float(g, "snr_grid", "start_db", Some(-30.0));
    let stop_db = w.float(g, "snr_grid", "stop_db", Some(30.0));
    let step_db = w.float(g, "snr_grid", "step_db", Some(1.0));
    if step_db.is_some_and(|s| s <= 0.0) {
        w.report("snr_grid.step_db", "must be positive");
    }
    if let (Some(a), Some(b)) = (start_db, stop_db) {
        if b < a {
            w.report("snr_grid.stop_db", format!("must be ≥ start_db ({a})"));
        }
    }
    if let (Some(a), Some(b), Some(s)) = (start_db, stop_db, step_db) {
        if s > 0.0 && (b - a) / s > 1e5 {
            w.report("snr_grid", "more than 100000 grid points");
        }
    }

    let sweeps = parse_sweeps(&mut w, table);

    let b = w.section(table, "", "bounds");
    if let Some(b) = b {
        w.unknown_keys(b, "bounds", &["crb_samples", "energy", "energy_draws"]);
    }
    let crb_samples = w.count(b, "bounds", "crb_samples", Some(2000));
    let energy = match w.string(b, "bounds", "energy") {
        None | Some("plug_in") => Some(EnergyMode::PlugIn),
        Some("averaged") => Some(EnergyMode::Averaged),
        Some(other) => {
            w.report("bounds.energy", format!("expected plug_in or averaged, got {other:?}"));
            None
        }
    };
    let energy_draws = w.count(b, "bounds", "energy_draws", Some(200));

    let s = w.section(table, "", "simulation");
    if let Some(s) = s {
        w.unknown_keys(s, "simulation", &["enabled", "trials", "grid_step_deg", "seed"]);
    }
    let sim_enabled = w.boolean(s, "simulation", "enabled", false);
    let trials = w.count(s, "simulation", "trials", Some(500));
    if trials.is_some_and(|t| t < 10) {
        w.report("simulation.trials", "need at least 10 trials");
    }
    let grid_step_deg = w.positive(s, "simulation", "grid_step_deg", crate::sim::DEFAULT_GRID_STEP_DEG);
    let sim_seed = match s.and_then(|s| s.get("seed")) {
        None => None,
        Some(_) => w.uint(s, "simulation", "seed", None),
    };

    let o = w.section(table, "", "oracle");
    if let Some(o) = o {
        w.unknown_keys(o, "oracle", &["enabled", "quadrature_points"]);
    }
    let oracle_enabled = w.boolean(o, "oracle", "enabled", false);
    let quadrature_points = w.count(o, "oracle", "quadrature_points", Some(64));
    if quadrature_points.is_some_and(|q| q < 64) {
        w.report("oracle.quadrature_points", "must be at least 64");
    }

    let out = w.section(table, "", "output");
    if let Some(out) = out {
        w.unknown_keys(out, "output", &["path"]);
    }
    let output = w.string(out, "output", "path").map(PathBuf::from);

    if !w.violations.is_empty() {
        return Err(ExperimentError::Validation(w.violations));
    }
    // every field is Some once no violation was recorded
    let config = ExperimentConfig {
        preset,
        seed: seed.unwrap(),
        scenario: ScenarioConfig {
            rx_elements: rx_elements.unwrap(),
            tx_elements: tx_elements.unwrap(),
            num_targets: num_targets.unwrap(),
            snapshots: snapshots.unwrap(),
            noise_power: noise_power.unwrap(),
            amplitude_power: amplitude_power.unwrap(),
            wavelength: wavelength.unwrap(),
            rx_spacing: rx_spacing.unwrap(),
            tx_spacing: tx_spacing.unwrap(),
            prior_deg: prior_deg.unwrap(),
            tx_shape: tx_shape.unwrap(),
        },
        snr_grid: SnrGrid {
            start_db: start_db.unwrap(),
            stop_db: stop_db.unwrap(),
            step_db: step_db.unwrap(),
        },
        sweeps,
        bounds: BoundsConfig {
            crb_samples: crb_samples.unwrap(),
            energy: energy.unwrap(),
            energy_draws: energy_draws.unwrap(),
        },
        simulation: SimulationConfig {
            enabled: sim_enabled.unwrap(),
            trials: trials.unwrap(),
            grid_step_deg: grid_step_deg.unwrap(),
            seed: sim_seed,
        },
        oracle: OracleConfig {
            enabled: oracle_enabled.unwrap(),
            quadrature_points: quadrature_points.unwrap(),
        },
        output,
    };
    config.check_combinations()?;
    Ok(config)
}

fn parse_tx_shape(w: &mut Walker, sc: Option<&Table>, n: Option<usize>) -> Option<TxShape> {
    let t = match sc {
        Some(sc) => w.section(sc, "scenario", "tx_shape"),
        None => None,
    };
    let Some(t) = t else {
        return Some(TxShape::Identity);
    };
    let prefix = "scenario.tx_shape";
    match w.string(Some(t), prefix, "kind") {
        None | Some("identity") => {
            w.unknown_keys(t, prefix, &["kind"]);
            Some(TxShape::Identity)
        }
        Some("exponential") => {
            w.unknown_keys(t, prefix, &["kind", "rho"]);
            let rho = w.float(Some(t), prefix, "rho", None)?;
            if !(0.0..1.0).contains(&rho) {
                w.report(join(prefix, "rho"), format!("must lie in [0, 1), got {rho}"));
                return None;
            }
            Some(TxShape::Exponential { rho })
        }
        Some("matrix") => {
            w.unknown_keys(t, prefix, &["kind", "real", "imag"]);
            let real = w.matrix(t, prefix, "real", n);
            let imag = if t.contains_key("imag") {
                w.matrix(t, prefix, "imag", n)
            } else {
                real.as_ref().map(|r| vec![vec![0.0; r.len()]; r.len()])
            };
            let (real, imag) = (real?, imag?);
            let shape = TxShape::Matrix { real, imag };
            let m = shape.build(n?);
            if !m.is_hermitian(1e-12) {
                w.report(prefix, "matrix must be Hermitian");
                return None;
            }
            Some(shape)
        }
        Some(other) => {
            w.report(
                join(prefix, "kind"),
                format!("expected identity, exponential or matrix, got {other:?}"),
            );
            None
        }
    }
}

fn parse_sweeps(w: &mut Walker, table: &Table) -> Vec<Sweep> {
    let entries: Vec<&Table> = match table.get("sweep") {
        None => return Vec::new(),
        Some(Value::Array(a)) => {
            let mut out = Vec::new();
            for (i, v) in a.iter().enumerate() {
                match v {
                    Value::Table(t) => out.push(t),
                    _ => w.report(format!("sweep[{i}]"), "expected a table"),
                }
            }
            out
        }
        Some(Value::Table(t)) => vec![t],
        Some(_) => {
            w.report("sweep", "expected [[sweep]] tables");
            return Vec::new();
        }
    };
    let mut sweeps = Vec::new();
    let mut seen = Vec::new();
    for (i, t) in entries.into_iter().enumerate() {
        let prefix = format!("sweep[{i}]");
        w.unknown_keys(t, &prefix, &["variable", "values"]);
        let variable = match w.string(Some(t), &prefix, "variable") {
            None => {
                w.report(join(&prefix, "variable"), "required field is missing");
                continue;
            }
            Some(name) => match SweepVariable::from_name(name) {
                Some(v) => v,
                None => {
                    w.report(
                        join(&prefix, "variable"),
                        format!("expected tx_elements, num_targets, prior_support or none, got {name:?}"),
                    );
                    continue;
                }
            },
        };
        if variable != SweepVariable::None {
            if seen.contains(&variable) {
                w.report(join(&prefix, "variable"), format!("{} swept twice", variable.name()));
            }
            seen.push(variable);
        }
        let values_path = join(&prefix, "values");
        let raw = match t.get("values") {
            Some(Value::Array(a)) => a.as_slice(),
            None if variable == SweepVariable::None => &[],
            None => {
                w.report(values_path, "required field is missing");
                continue;
            }
            Some(_) => {
                w.report(values_path, "expected an array");
                continue;
            }
        };
        if variable != SweepVariable::None && raw.is_empty() {
            w.report(values_path, "must not be empty when a sweep variable is set");
            continue;
        }
        let mut values = Vec::new();
        for (j, v) in raw.iter().enumerate() {
            let path = format!("{values_path}[{j}]");
            match variable {
                SweepVariable::TxElements | SweepVariable::NumTargets => match as_uint(v) {
                    Some(n) if n >= 1 => {
                        let n = n as usize;
                        values.push(if variable == SweepVariable::TxElements {
                            SweepValue::TxElements(n)
                        } else {
                            SweepValue::NumTargets(n)
                        });
                    }
                    _ => w.report(path, format!("expected a positive integer, got {v}")),
                },
                SweepVariable::PriorSupport => {
                    if let Some((lo, hi)) = w.prior(v, &path) {
                        values.push(SweepValue::PriorSupport(lo, hi));
                    }
                }
                SweepVariable::None => {}
            }
        }
        sweeps.push(Sweep { variable, values });
    }
    sweeps
}

impl ExperimentConfig {
    /// Cross-field checks on every swept scenario.
    fn check_combinations(&self) -> Result<(), ExperimentError> {
        let mut violations = Vec::new();
        for combo in self.combinations() {
            let label = Self::label(&combo);
            let sc = self.scenario_for(&combo);
            if let TxShape::Matrix { real, .. } = &sc.tx_shape {
                if real.len() != sc.tx_elements {
                    violations.push(Violation {
                        path: "scenario.tx_shape".into(),
                        message: format!(
                            "{}x{} matrix does not fit {} transmit elements (sweep {label})",
                            real.len(),
                            real.len(),
                            sc.tx_elements
                        ),
                    });
                    continue;
                }
            }
            let scenario = match sc.build() {
                Ok(s) => s,
                Err(e) => {
                    violations.push(Violation {
                        path: "scenario".into(),
                        message: format!("sweep {label}: {e}"),
                    });
                    continue;
                }
            };
            if self.oracle.enabled && sc.num_targets != 1 {
                violations.push(Violation {
                    path: "oracle.enabled".into(),
                    message: format!("the exact oracle needs num_targets = 1 (sweep {label})"),
                });
            }
            if self.simulation.enabled {
                let limit = scenario.prior().width().to_degrees() / 10.0;
                if self.simulation.grid_step_deg > limit {
                    violations.push(Violation {
                        path: "simulation.grid_step_deg".into(),
                        message: format!("must be ≤ {limit} deg for sweep {label}"),
                    });
                }
            }
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(ExperimentError::Validation(violations))
        }
    }
}
