//! Sweep configuration.
//!
//! A configuration is a flat TOML document (no tables) with a
//! `schema_version`. Every key is validated against the schema below; a
//! violation is a hard error naming the offending key, while an unrecognised
//! key only produces a warning.
//!
//! ```toml
//! schema_version = 1
//! figure = "fig2a"
//! model = "rabi_exact"          # rabi_exact | grwa | dicke | weak
//! quantity = "snr"              # snr | jz | levels | lambda | curvature | asymptote
//! n_spins = 1
//! epsilon_omega = 1.0
//! grid_axis = "beta_omega"
//! grid_start = 1.0
//! grid_stop = 60.0
//! grid_points = 60
//! vary_g_omega = [0.3, 0.4, 0.5]
//! ```
//!
//! With `units = "physical"` the parameters are given as `epsilon_ghz`,
//! `omega_ghz`, `g_ghz` (or `gbar_ghz`) and `temperature_mk`, and are reduced
//! to `omega = 1` before anything is computed.

use std::collections::BTreeSet;

use equiprobe_core::{DeltaConvention, SectorMode, VarianceMode};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{CliError, Result};
use crate::units;

pub const SCHEMA_VERSION: i64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    RabiExact,
    Grwa,
    Dicke,
    Weak,
}

impl Model {
    pub fn as_str(self) -> &'static str {
        match self {
            Model::RabiExact => "rabi_exact",
            Model::Grwa => "grwa",
            Model::Dicke => "dicke",
            Model::Weak => "weak",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "rabi_exact" => Model::RabiExact,
            "grwa" => Model::Grwa,
            "dicke" => Model::Dicke,
            "weak" => Model::Weak,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    /// SNR, weak-coupling SNR and their difference versus the grid.
    Snr,
    /// `<Jz>` with the weak-coupling (or exact) value as reference.
    Jz,
    /// Lowest energy levels, model against the other method.
    Levels,
    /// Variational displacement: root against closed form.
    Lambda,
    /// `d^2 E_g / d eps^2`, model against the other method.
    Curvature,
    /// Low-temperature SNR from the variational ground energy.
    Asymptote,
}

impl Quantity {
    pub fn as_str(self) -> &'static str {
        match self {
            Quantity::Snr => "snr",
            Quantity::Jz => "jz",
            Quantity::Levels => "levels",
            Quantity::Lambda => "lambda",
            Quantity::Curvature => "curvature",
            Quantity::Asymptote => "asymptote",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "snr" => Quantity::Snr,
            "jz" => Quantity::Jz,
            "levels" => Quantity::Levels,
            "lambda" => Quantity::Lambda,
            "curvature" => Quantity::Curvature,
            "asymptote" => Quantity::Asymptote,
            _ => return None,
        })
    }

    fn needs_temperature(self) -> bool {
        matches!(self, Quantity::Snr | Quantity::Jz | Quantity::Asymptote)
    }

    fn allowed_for(self, model: Model) -> bool {
        match model {
            Model::Weak | Model::Dicke => matches!(self, Quantity::Snr | Quantity::Jz),
            Model::RabiExact => !matches!(self, Quantity::Lambda | Quantity::Asymptote),
            Model::Grwa => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    BetaOmega,
    GOmega,
    EpsilonOmega,
    NSpins,
    GbarOmega,
    TemperatureMk,
}

impl Axis {
    pub const ALL: [Axis; 6] =
        [Axis::BetaOmega, Axis::GOmega, Axis::EpsilonOmega, Axis::NSpins, Axis::GbarOmega, Axis::TemperatureMk];

    pub fn as_str(self) -> &'static str {
        match self {
            Axis::BetaOmega => "beta_omega",
            Axis::GOmega => "g_omega",
            Axis::EpsilonOmega => "epsilon_omega",
            Axis::NSpins => "n_spins",
            Axis::GbarOmega => "gbar_omega",
            Axis::TemperatureMk => "temperature_mk",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Axis::ALL.into_iter().find(|a| a.as_str() == s)
    }

    fn allowed_in(self, units: UnitSystem) -> bool {
        match units {
            UnitSystem::Omega => self != Axis::TemperatureMk,
            UnitSystem::Physical => matches!(self, Axis::TemperatureMk | Axis::NSpins),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitSystem {
    /// Everything already divided by the mode frequency.
    Omega,
    /// GHz (ordinary frequency) and mK.
    Physical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub axis: Axis,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub axis: Axis,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub fd_step: f64,
    pub ln_z_tol: f64,
    pub obs_tol: f64,
    pub nmax_start: usize,
    pub nmax_cap: usize,
    /// Fixed Fock cutoff; disables the convergence search.
    pub n_max: Option<usize>,
    pub dimension_cap: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            fd_step: 1e-4,
            ln_z_tol: 1e-8,
            obs_tol: 1e-6,
            nmax_start: 16,
            nmax_cap: 4096,
            n_max: None,
            dimension_cap: equiprobe_core::operators::DEFAULT_DIMENSION_CAP,
        }
    }
}

/// Scalar parameters in the config's own units; `None` means not given.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Scalars {
    pub n_spins: Option<u32>,
    pub epsilon: Option<f64>,
    pub g: Option<f64>,
    pub gbar: Option<f64>,
    /// `beta * omega` in omega units, temperature in mK in physical units.
    pub temperature: Option<f64>,
    /// Mode frequency in GHz (physical units only).
    pub omega_ghz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub figure: Option<String>,
    pub description: Option<String>,
    pub model: Model,
    pub quantity: Quantity,
    pub units: UnitSystem,
    pub scalars: Scalars,
    pub grid: Grid,
    pub series: Vec<Series>,
    pub delta: DeltaConvention,
    pub sector: SectorMode,
    pub variance: VarianceMode,
    pub tol: Tolerances,
    pub level_count: usize,
    pub fit_window: Option<(f64, f64)>,
}

/// A fully resolved parameter point in `omega = 1` units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub n_spins: u32,
    pub epsilon: f64,
    pub g: f64,
    pub gbar: f64,
    pub beta_omega: Option<f64>,
}

/// Parsed configuration plus the warnings raised on the way.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: SweepConfig,
    pub warnings: Vec<String>,
}

const OMEGA_KEYS: [&str; 5] = ["n_spins", "epsilon_omega", "g_omega", "gbar_omega", "beta_omega"];
const PHYSICAL_KEYS: [&str; 6] = ["n_spins", "epsilon_ghz", "omega_ghz", "g_ghz", "gbar_ghz", "temperature_mk"];

struct Reader<'a> {
    table: &'a Table,
    seen: BTreeSet<String>,
}

impl<'a> Reader<'a> {
    fn raw(&mut self, key: &str) -> Option<&'a Value> {
        let v = self.table.get(key);
        if v.is_some() {
            self.seen.insert(key.to_string());
        }
        v
    }

    fn string(&mut self, key: &str) -> Result<Option<&'a str>> {
        match self.raw(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.as_str())),
            Some(v) => Err(type_error(key, "a string", v)),
        }
    }

    fn float(&mut self, key: &str) -> Result<Option<f64>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => as_float(key, v).map(Some),
        }
    }

    fn positive(&mut self, key: &str) -> Result<Option<f64>> {
        let v = self.float(key)?;
        if let Some(x) = v {
            if !(x > 0.0) {
                return Err(CliError::config(key, format!("must be > 0, got {x}")));
            }
        }
        Ok(v)
    }

    fn non_negative(&mut self, key: &str) -> Result<Option<f64>> {
        let v = self.float(key)?;
        if let Some(x) = v {
            if !(x >= 0.0) {
                return Err(CliError::config(key, format!("must be >= 0, got {x}")));
            }
        }
        Ok(v)
    }

    fn integer(&mut self, key: &str, min: i64) -> Result<Option<i64>> {
        match self.raw(key) {
            None => Ok(None),
            Some(Value::Integer(i)) if *i >= min => Ok(Some(*i)),
            Some(Value::Integer(i)) => Err(CliError::config(key, format!("must be >= {min}, got {i}"))),
            Some(v) => Err(type_error(key, "an integer", v)),
        }
    }

    fn floats(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.raw(key) {
            None => Ok(None),
            Some(Value::Array(items)) => {
                if items.is_empty() {
                    return Err(CliError::config(key, "must not be empty"));
                }
                items.iter().enumerate().map(|(i, v)| as_float(&format!("{key}[{i}]"), v)).collect::<Result<_>>().map(Some)
            }
            Some(v) => Err(type_error(key, "an array of numbers", v)),
        }
    }
}

fn type_name(v: &Value) -> &'static str {
    v.type_str()
}

fn type_error(key: &str, want: &str, got: &Value) -> CliError {
    CliError::config(key, format!("expected {want}, found {}", type_name(got)))
}

fn as_float(key: &str, v: &Value) -> Result<f64> {
    let x = match v {
        Value::Float(f) => *f,
        Value::Integer(i) => *i as f64,
        other => return Err(type_error(key, "a number", other)),
    };
    if !x.is_finite() {
        return Err(CliError::config(key, "must be finite"));
    }
    Ok(x)
}

fn choice<T>(r: &mut Reader, key: &str, parse: impl Fn(&str) -> Option<T>, options: &str) -> Result<Option<T>> {
    match r.string(key)? {
        None => Ok(None),
        Some(s) => parse(s).map(Some).ok_or_else(|| CliError::config(key, format!("unknown value `{s}` (expected {options})"))),
    }
}

/// Evenly spaced values, inclusive of both ends; `log` spacing is uniform in
/// the logarithm.
pub fn spaced(start: f64, stop: f64, points: usize, log: bool) -> Vec<f64> {
    if points == 1 {
        return vec![start];
    }
    let last = (points - 1) as f64;
    (0..points)
        .map(|i| {
            if i + 1 == points {
                return stop;
            }
            let t = i as f64 / last;
            if log {
                (start.ln() + t * (stop.ln() - start.ln())).exp()
            } else {
                start + t * (stop - start)
            }
        })
        .collect()
}

impl SweepConfig {
    pub fn from_toml_str(text: &str) -> Result<Loaded> {
        let table: Table = toml::from_str(text).map_err(|e| CliError::config("<document>", e.to_string().trim().to_string()))?;
        Self::from_table(&table)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Loaded> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read { path: path.to_path_buf(), source })?;
        Self::from_toml_str(&text)
    }

    pub fn from_table(table: &Table) -> Result<Loaded> {
        for (key, value) in table {
            if value.is_table() {
                return Err(CliError::config(key, "configs are flat; tables are not allowed"));
            }
        }
        let mut r = Reader { table, seen: BTreeSet::new() };

        let version = r.integer("schema_version", 0)?.ok_or_else(|| CliError::config("schema_version", "missing"))?;
        if version != SCHEMA_VERSION {
            return Err(CliError::config(
                "schema_version",
                format!("unsupported version {version} (this build reads {SCHEMA_VERSION})"),
            ));
        }
        let figure = r.string("figure")?.map(str::to_string);
        let description = r.string("description")?.map(str::to_string);
        let model = choice(&mut r, "model", Model::parse, "rabi_exact, grwa, dicke, weak")?
            .ok_or_else(|| CliError::config("model", "missing"))?;
        let quantity =
            choice(&mut r, "quantity", Quantity::parse, "snr, jz, levels, lambda, curvature, asymptote")?.unwrap_or(Quantity::Snr);
        if !quantity.allowed_for(model) {
            return Err(CliError::config(
                "quantity",
                format!("`{}` is not available for model `{}`", quantity.as_str(), model.as_str()),
            ));
        }
        let units = choice(
            &mut r,
            "units",
            |s| match s {
                "omega" => Some(UnitSystem::Omega),
                "physical" => Some(UnitSystem::Physical),
                _ => None,
            },
            "omega, physical",
        )?
        .unwrap_or(UnitSystem::Omega);

        let n_spins = match r.integer("n_spins", 1)? {
            Some(n) if n > 64 => return Err(CliError::config("n_spins", format!("{n} is beyond the supported range (<= 64)"))),
            n => n.map(|n| n as u32),
        };
        let scalars = match units {
            UnitSystem::Omega => {
                for key in PHYSICAL_KEYS.iter().filter(|k| !OMEGA_KEYS.contains(k)) {
                    if table.contains_key(*key) {
                        return Err(CliError::config(*key, "physical-unit key in an `omega`-unit config"));
                    }
                }
                Scalars {
                    n_spins,
                    epsilon: r.non_negative("epsilon_omega")?,
                    g: r.non_negative("g_omega")?,
                    gbar: r.positive("gbar_omega")?,
                    temperature: r.positive("beta_omega")?,
                    omega_ghz: None,
                }
            }
            UnitSystem::Physical => {
                for key in OMEGA_KEYS.iter().filter(|k| !PHYSICAL_KEYS.contains(k)) {
                    if table.contains_key(*key) {
                        return Err(CliError::config(*key, "omega-unit key in a `physical`-unit config"));
                    }
                }
                let omega_ghz =
                    r.positive("omega_ghz")?.ok_or_else(|| CliError::config("omega_ghz", "required with physical units"))?;
                Scalars {
                    n_spins,
                    epsilon: r.non_negative("epsilon_ghz")?,
                    g: r.non_negative("g_ghz")?,
                    gbar: r.positive("gbar_ghz")?,
                    temperature: r.positive("temperature_mk")?,
                    omega_ghz: Some(omega_ghz),
                }
            }
        };

        let axis_name = r.string("grid_axis")?.ok_or_else(|| CliError::config("grid_axis", "missing"))?;
        let axis = Axis::parse(axis_name)
            .filter(|a| a.allowed_in(units))
            .ok_or_else(|| CliError::config("grid_axis", format!("`{axis_name}` is not a valid axis for these units")))?;
        let explicit = r.floats("grid_values")?;
        let start = r.float("grid_start")?;
        let stop = r.float("grid_stop")?;
        let points = r.integer("grid_points", 1)?;
        let spacing = r.string("grid_spacing")?;
        let values = match (explicit, start, stop, points) {
            (Some(v), None, None, None) => {
                if spacing.is_some() {
                    return Err(CliError::config("grid_spacing", "only meaningful with grid_start/grid_stop"));
                }
                v
            }
            (None, Some(a), Some(b), Some(n)) => {
                let log = match spacing.unwrap_or("linear") {
                    "linear" => false,
                    "log" => true,
                    other => {
                        return Err(CliError::config("grid_spacing", format!("unknown value `{other}` (expected linear, log)")))
                    }
                };
                if log && !(a > 0.0 && b > 0.0) {
                    return Err(CliError::config("grid_start", "log spacing needs positive endpoints"));
                }
                spaced(a, b, n as usize, log)
            }
            (Some(_), _, _, _) => {
                return Err(CliError::config("grid_values", "give either grid_values or grid_start/grid_stop/grid_points"))
            }
            _ => {
                return Err(CliError::config(
                    "grid_points",
                    "grid needs grid_values or all of grid_start, grid_stop, grid_points",
                ))
            }
        };
        check_axis_values(axis, "grid_values", &values)?;
        let grid = Grid { axis, values };

        let mut series = Vec::new();
        for a in Axis::ALL {
            let key = format!("vary_{}", a.as_str());
            if let Some(values) = r.floats(&key)? {
                if !a.allowed_in(units) {
                    return Err(CliError::config(&key, "axis not available for these units"));
                }
                if a == axis {
                    return Err(CliError::config(&key, "the grid axis cannot also be varied per curve"));
                }
                check_axis_values(a, &key, &values)?;
                series.push(Series { axis: a, values });
            }
        }

        let delta = choice(
            &mut r,
            "delta",
            |s| match s {
                "absolute" => Some(DeltaConvention::Absolute),
                "per_spin" => Some(DeltaConvention::PerSpin),
                _ => None,
            },
            "absolute, per_spin",
        )?
        .unwrap_or(if model == Model::Dicke { DeltaConvention::PerSpin } else { DeltaConvention::Absolute });
        let sector = choice(
            &mut r,
            "sector",
            |s| match s {
                "full" => Some(SectorMode::Full),
                "maximal" => Some(SectorMode::Maximal),
                _ => None,
            },
            "full, maximal",
        )?
        .unwrap_or(if quantity == Quantity::Levels { SectorMode::Maximal } else { SectorMode::Full });
        let variance = choice(
            &mut r,
            "variance",
            |s| match s {
                "auto" => Some(VarianceMode::Auto),
                "operator" => Some(VarianceMode::Operator),
                "curvature" => Some(VarianceMode::Curvature),
                _ => None,
            },
            "auto, operator, curvature",
        )?
        .unwrap_or_default();

        let d = Tolerances::default();
        let tol = Tolerances {
            fd_step: r.positive("fd_step")?.unwrap_or(d.fd_step),
            ln_z_tol: r.positive("ln_z_tol")?.unwrap_or(d.ln_z_tol),
            obs_tol: r.positive("obs_tol")?.unwrap_or(d.obs_tol),
            nmax_start: r.integer("nmax_start", 1)?.map_or(d.nmax_start, |v| v as usize),
            nmax_cap: r.integer("nmax_cap", 1)?.map_or(d.nmax_cap, |v| v as usize),
            n_max: r.integer("n_max", 1)?.map(|v| v as usize),
            dimension_cap: r.integer("dimension_cap", 2)?.map_or(d.dimension_cap, |v| v as usize),
        };
        if tol.nmax_start > tol.nmax_cap {
            return Err(CliError::config("nmax_start", "must not exceed nmax_cap"));
        }
        let level_count = r.integer("level_count", 1)?.map_or(6, |v| v as usize);
        let fit_window = match r.floats("fit_window")? {
            None => None,
            Some(v) if v.len() == 2 && v[0] < v[1] => Some((v[0], v[1])),
            Some(_) => return Err(CliError::config("fit_window", "expected [low, high] with low < high")),
        };

        let config = SweepConfig {
            figure,
            description,
            model,
            quantity,
            units,
            scalars,
            grid,
            series,
            delta,
            sector,
            variance,
            tol,
            level_count,
            fit_window,
        };
        config.check_cross_fields()?;

        let mut warnings = Vec::new();
        for key in table.keys() {
            if !r.seen.contains(key) {
                let msg = format!("unknown key `{key}` ignored");
                log::warn!("{msg}");
                warnings.push(msg);
            }
        }
        Ok(Loaded { config, warnings })
    }

    fn varies(&self, axis: Axis) -> bool {
        self.grid.axis == axis || self.series.iter().any(|s| s.axis == axis)
    }

    fn check_cross_fields(&self) -> Result<()> {
        let s = &self.scalars;
        let (eps_key, g_key, gbar_key, t_key) = match self.units {
            UnitSystem::Omega => ("epsilon_omega", "g_omega", "gbar_omega", "beta_omega"),
            UnitSystem::Physical => ("epsilon_ghz", "g_ghz", "gbar_ghz", "temperature_mk"),
        };
        let has = |given: bool, axis: Axis| given || self.varies(axis);
        let has_n = has(s.n_spins.is_some(), Axis::NSpins);
        let has_g = has(s.g.is_some(), Axis::GOmega);
        let has_gbar = has(s.gbar.is_some(), Axis::GbarOmega);
        if !has(s.epsilon.is_some(), Axis::EpsilonOmega) {
            return Err(CliError::config(eps_key, "missing"));
        }
        if self.quantity.needs_temperature() && !has(s.temperature.is_some(), Axis::BetaOmega) && !self.varies(Axis::TemperatureMk) {
            return Err(CliError::config(t_key, "missing (needed for this quantity)"));
        }
        if has_g && has_gbar {
            return Err(CliError::config(gbar_key, "give either the per-spin or the collective coupling, not both"));
        }
        match self.model {
            Model::Dicke => {
                if has_g && !has_n {
                    return Err(CliError::config(g_key, "per-spin coupling needs n_spins to form gbar"));
                }
                if !has_g && !has_gbar {
                    return Err(CliError::config(gbar_key, "missing"));
                }
            }
            Model::Weak => {
                if !has_n {
                    return Err(CliError::config("n_spins", "missing"));
                }
            }
            Model::RabiExact | Model::Grwa => {
                if !has_n {
                    return Err(CliError::config("n_spins", "missing"));
                }
                if !has_g && !has_gbar {
                    return Err(CliError::config(g_key, "missing"));
                }
            }
        }
        if self.model == Model::Grwa && self.quantity == Quantity::Snr && self.variance == VarianceMode::Operator {
            let many = s.n_spins.is_some_and(|n| n > 1) || self.varies(Axis::NSpins);
            if many {
                return Err(CliError::config("variance", "operator variance is unavailable for GRWA with N > 1"));
            }
        }
        Ok(())
    }

    /// Every combination of the `vary_*` axes, in lexicographic order of
    /// axis then value index.
    pub fn curves(&self) -> Vec<Vec<(Axis, f64)>> {
        let mut out: Vec<Vec<(Axis, f64)>> = vec![Vec::new()];
        for s in &self.series {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    s.values.iter().map(move |&v| {
                        let mut c = prefix.clone();
                        c.push((s.axis, v));
                        c
                    })
                })
                .collect();
        }
        out
    }

    /// Applies a curve's series values and a grid value to the scalars and
    /// reduces the result to `omega = 1` units.
    pub fn resolve(&self, curve: &[(Axis, f64)], grid_value: f64) -> Result<Point> {
        let mut s = self.scalars;
        for &(axis, v) in curve.iter().chain(std::iter::once(&(self.grid.axis, grid_value))) {
            match axis {
                Axis::NSpins => s.n_spins = Some(v as u32),
                Axis::EpsilonOmega => s.epsilon = Some(v),
                Axis::GOmega => s.g = Some(v),
                Axis::GbarOmega => s.gbar = Some(v),
                Axis::BetaOmega | Axis::TemperatureMk => s.temperature = Some(v),
            }
        }
        let scale = match self.units {
            UnitSystem::Omega => 1.0,
            UnitSystem::Physical => s.omega_ghz.expect("validated"),
        };
        let n_spins = s.n_spins.unwrap_or(1);
        let n = n_spins as f64;
        let epsilon = s.epsilon.expect("validated") / scale;
        let (g, gbar) = match (s.g, s.gbar) {
            (Some(g), _) => (g / scale, 0.5 * n.sqrt() * g / scale),
            (None, Some(gbar)) => (2.0 * gbar / scale / n.sqrt(), gbar / scale),
            (None, None) => (0.0, 0.0),
        };
        let beta_omega = s.temperature.map(|t| match self.units {
            UnitSystem::Omega => t,
            UnitSystem::Physical => scale / units::thermal_frequency_ghz(t),
        });
        Ok(Point { n_spins, epsilon, g, gbar, beta_omega })
    }

    /// Applies command-line overrides.
    pub fn apply_overrides(&mut self, sector: Option<SectorMode>, fd_step: Option<f64>, tol: Option<f64>) -> Result<()> {
        if let Some(s) = sector {
            self.sector = s;
        }
        if let Some(h) = fd_step {
            if !(h > 0.0 && h.is_finite()) {
                return Err(CliError::config("--fd-step", format!("must be positive, got {h}")));
            }
            self.tol.fd_step = h;
        }
        if let Some(t) = tol {
            if !(t > 0.0 && t.is_finite()) {
                return Err(CliError::config("--tol", format!("must be positive, got {t}")));
            }
            self.tol.obs_tol = t;
            self.tol.ln_z_tol = 1e-2 * t;
        }
        Ok(())
    }
}

fn check_axis_values(axis: Axis, key: &str, values: &[f64]) -> Result<()> {
    for (i, &v) in values.iter().enumerate() {
        let path = format!("{key}[{i}]");
        let ok = match axis {
            Axis::NSpins => v >= 1.0 && v.fract() == 0.0 && v <= 64.0,
            Axis::GOmega | Axis::EpsilonOmega => v >= 0.0,
            Axis::BetaOmega | Axis::GbarOmega | Axis::TemperatureMk => v > 0.0,
        };
        if !ok {
            return Err(CliError::config(path, format!("{v} is not a valid {} value", axis.as_str())));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schema_version = 1
model = "rabi_exact"
n_spins = 2
epsilon_omega = 1.0
g_omega = 0.3
grid_axis = "beta_omega"
grid_values = [1.0, 2.0]
"#;

    fn path_of(e: CliError) -> String {
        match e {
            CliError::Config { path, .. } => path,
            other => panic!("expected a config error, got {other}"),
        }
    }

    #[test]
    fn minimal_config_loads_with_defaults() {
        let l = SweepConfig::from_toml_str(MINIMAL).unwrap();
        assert!(l.warnings.is_empty());
        let c = l.config;
        assert_eq!(c.quantity, Quantity::Snr);
        assert_eq!(c.sector, SectorMode::Full);
        assert_eq!(c.delta, DeltaConvention::Absolute);
        assert_eq!(c.tol, Tolerances::default());
        assert_eq!(c.curves(), vec![vec![]]);
        let p = c.resolve(&[], 2.0).unwrap();
        assert_eq!(p, Point { n_spins: 2, epsilon: 1.0, g: 0.3, gbar: 0.5 * 2f64.sqrt() * 0.3, beta_omega: Some(2.0) });
    }

    #[test]
    fn unknown_key_is_a_warning() {
        let l = SweepConfig::from_toml_str(&format!("{MINIMAL}\ncolour = \"red\"\n")).unwrap();
        assert_eq!(l.warnings.len(), 1);
        assert!(l.warnings[0].contains("colour"));
    }

    #[test]
    fn schema_violations_name_the_field() {
        let cases = [
            (MINIMAL.replace("schema_version = 1", "schema_version = 7"), "schema_version"),
            (MINIMAL.replace("n_spins = 2", "n_spins = 0"), "n_spins"),
            (MINIMAL.replace("g_omega = 0.3", "g_omega = \"big\""), "g_omega"),
            (MINIMAL.replace("[1.0, 2.0]", "[1.0, -2.0]"), "grid_values[1]"),
            (MINIMAL.replace("rabi_exact", "magic"), "model"),
            (MINIMAL.replace("grid_axis = \"beta_omega\"", "grid_axis = \"colour\""), "grid_axis"),
            (MINIMAL.replace("epsilon_omega = 1.0\n", ""), "epsilon_omega"),
            (format!("{MINIMAL}\n[extra]\nx = 1\n"), "extra"),
            (format!("{MINIMAL}\nquantity = \"lambda\"\n"), "quantity"),
            (format!("{MINIMAL}\ngbar_omega = 0.5\n"), "gbar_omega"),
            (format!("{MINIMAL}\nvary_beta_omega = [1.0]\n"), "vary_beta_omega"),
            (format!("{MINIMAL}\nepsilon_ghz = 1.0\n"), "epsilon_ghz"),
        ];
        for (text, want) in cases {
            let err = SweepConfig::from_toml_str(&text).unwrap_err();
            assert_eq!(err.exit_code(), 2);
            assert_eq!(path_of(err), want);
        }
    }

    #[test]
    fn dicke_rejects_per_spin_coupling_without_n() {
        let text = r#"
schema_version = 1
model = "dicke"
epsilon_omega = 0.5
g_omega = 0.3
grid_axis = "beta_omega"
grid_values = [1.0]
"#;
        assert_eq!(path_of(SweepConfig::from_toml_str(text).unwrap_err()), "g_omega");
        let ok = text.replace("g_omega = 0.3", "gbar_omega = 0.9");
        let c = SweepConfig::from_toml_str(&ok).unwrap().config;
        assert_eq!(c.delta, DeltaConvention::PerSpin);
        assert_eq!(c.resolve(&[], 1.0).unwrap().gbar, 0.9);
    }

    #[test]
    fn series_expand_in_order() {
        let text = format!("{}\nvary_n_spins = [1, 2]\nvary_epsilon_omega = [1.0, 0.8]\n", MINIMAL.replace("n_spins = 2\n", ""));
        let c = SweepConfig::from_toml_str(&text).unwrap().config;
        let curves = c.curves();
        assert_eq!(curves.len(), 4);
        assert_eq!(curves[0], vec![(Axis::EpsilonOmega, 1.0), (Axis::NSpins, 1.0)]);
        assert_eq!(curves[1], vec![(Axis::EpsilonOmega, 1.0), (Axis::NSpins, 2.0)]);
        assert_eq!(curves[3], vec![(Axis::EpsilonOmega, 0.8), (Axis::NSpins, 2.0)]);
    }

    #[test]
    fn generated_grid_hits_endpoints() {
        let v = spaced(1.0, 60.0, 60, false);
        assert_eq!(v.len(), 60);
        assert_eq!(v[0], 1.0);
        assert_eq!(v[59], 60.0);
        assert!((v[1] - 2.0).abs() < 1e-14);
        let l = spaced(0.1, 10.0, 3, true);
        assert!((l[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn physical_units_reduce_to_omega() {
        let text = r#"
schema_version = 1
units = "physical"
model = "rabi_exact"
n_spins = 1
epsilon_ghz = 3.84
omega_ghz = 5.588
g_ghz = 5.63
grid_axis = "temperature_mk"
grid_values = [45.0]
"#;
        let c = SweepConfig::from_toml_str(text).unwrap().config;
        let p = c.resolve(&[], 45.0).unwrap();
        assert!((p.epsilon - 3.84 / 5.588).abs() < 1e-15);
        assert!((p.g - 5.63 / 5.588).abs() < 1e-15);
        assert!((p.beta_omega.unwrap() - 5.588 / units::thermal_frequency_ghz(45.0)).abs() < 1e-12);
    }

    #[test]
    fn overrides_validate() {
        let mut c = SweepConfig::from_toml_str(MINIMAL).unwrap().config;
        c.apply_overrides(Some(SectorMode::Maximal), Some(1e-3), Some(1e-5)).unwrap();
        assert_eq!(c.sector, SectorMode::Maximal);
        assert_eq!(c.tol.fd_step, 1e-3);
        assert_eq!(c.tol.obs_tol, 1e-5);
        assert_eq!(path_of(c.apply_overrides(None, Some(-1.0), None).unwrap_err()), "--fd-step");
    }
}
