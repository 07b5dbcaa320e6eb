use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use equiprobe_cli::config::{SweepConfig, SCHEMA_VERSION};
use equiprobe_cli::error::{CliError, Result};
use equiprobe_cli::fit::{fit_rows, ScalingFit};
use equiprobe_cli::output::{self, Format, Rows, SweepOutput};
use equiprobe_cli::{figures, reports, sweep};
use equiprobe_core::rcmap::EquivalenceMode;
use equiprobe_core::SectorMode;
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "equiprobe", version, about = "Equilibrium-probe SNR for spins strongly coupled to a bosonic bath")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Sweep config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file (or directory for `reproduce`); standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    /// Worker threads; all cores by default.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true, value_enum)]
    sector: Option<SectorArg>,
    /// Finite-difference step in epsilon.
    #[arg(long, global = true)]
    fd_step: Option<f64>,
    /// Relative tolerance on converged observables.
    #[arg(long, global = true)]
    tol: Option<f64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SectorArg {
    Full,
    Maximal,
}

impl From<SectorArg> for SectorMode {
    fn from(s: SectorArg) -> Self {
        match s {
            SectorArg::Full => SectorMode::Full,
            SectorArg::Maximal => SectorMode::Maximal,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Counterterm,
    Raw,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// SNR at one parameter point, for one or more temperatures.
    Snr(SnrArgs),
    /// Evaluate the grid described by --config.
    Sweep,
    /// Thermodynamic-limit phase diagram against the collective coupling.
    Dicke(DickeArgs),
    /// Check the Ohmic-residual to Lorentzian mapping.
    MapSpectral(MapArgs),
    /// Fit S ~ T^theta to an SNR table (CSV or JSON).
    Fit(FitArgs),
    /// Run a built-in figure config; `list` prints the known ids.
    Reproduce(ReproduceArgs),
}

#[derive(Args, Debug)]
struct SnrArgs {
    #[arg(long, default_value = "rabi_exact")]
    model: String,
    #[arg(long)]
    n_spins: Option<u32>,
    /// epsilon / omega.
    #[arg(long)]
    epsilon: f64,
    /// g / omega.
    #[arg(long)]
    g: Option<f64>,
    /// Collective coupling gbar / omega.
    #[arg(long)]
    gbar: Option<f64>,
    /// One or more values of beta * omega.
    #[arg(long, value_delimiter = ',', required = true)]
    beta_omega: Vec<f64>,
    /// auto, operator or curvature.
    #[arg(long)]
    variance: Option<String>,
    /// absolute or per_spin.
    #[arg(long)]
    delta: Option<String>,
}

#[derive(Args, Debug)]
struct DickeArgs {
    /// epsilon / omega.
    #[arg(long)]
    epsilon: f64,
    /// Collective couplings gbar / omega.
    #[arg(long, value_delimiter = ',', required = true)]
    gbar: Vec<f64>,
    /// Evaluate the phase and SNR per spin at this beta * omega.
    #[arg(long)]
    beta_omega: Option<f64>,
}

#[derive(Args, Debug)]
struct MapArgs {
    #[arg(long, default_value_t = 0.05)]
    gamma: f64,
    #[arg(long, default_value_t = 0.5)]
    g: f64,
    /// Ohmic cutoffs in units of omega0.
    #[arg(long, value_delimiter = ',', default_values_t = [100.0, 1000.0, 10000.0])]
    omega_c: Vec<f64>,
    #[arg(long, default_value_t = 0.1)]
    grid_start: f64,
    #[arg(long, default_value_t = 3.0)]
    grid_stop: f64,
    #[arg(long, default_value_t = 30)]
    grid_points: usize,
    /// Distance of the evaluation line above the real axis.
    #[arg(long, default_value_t = 1e-6)]
    delta: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Counterterm)]
    mode: ModeArg,
}

#[derive(Args, Debug)]
struct FitArgs {
    input: PathBuf,
    /// Inclusive beta * omega window.
    #[arg(long, value_delimiter = ',', default_values_t = [20.0, 60.0])]
    window: Vec<f64>,
}

#[derive(Args, Debug)]
struct ReproduceArgs {
    figure_id: String,
}

#[derive(Debug, Serialize)]
struct FitRecord {
    curve: String,
    theta: f64,
    stderr: f64,
    intercept: f64,
    r_squared: f64,
    window_low: f64,
    window_high: f64,
    points: usize,
}

impl FitRecord {
    fn new(curve: &str, f: &ScalingFit) -> Self {
        Self {
            curve: curve.to_string(),
            theta: f.theta,
            stderr: f.stderr,
            intercept: f.intercept,
            r_squared: f.r_squared,
            window_low: f.window.0,
            window_high: f.window.1,
            points: f.points,
        }
    }
}

fn write_bytes(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    use std::io::Write;
    match out {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(|source| CliError::Write { path: parent.to_path_buf(), source })?;
            }
            std::fs::write(p, bytes).map_err(|source| CliError::Write { path: p.to_path_buf(), source })
        }
        None => std::io::stdout()
            .lock()
            .write_all(bytes)
            .map_err(|source| CliError::Write { path: PathBuf::from("<stdout>"), source }),
    }
}

fn records_csv<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Table(e.to_string()))?;
    }
    w.into_inner().map_err(|e| CliError::Table(e.to_string()))
}

fn json<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value).map_err(|e| CliError::Table(e.to_string()))?;
    v.push(b'\n');
    Ok(v)
}

fn prepare(mut loaded: equiprobe_cli::config::Loaded, g: &Global) -> Result<SweepConfig> {
    for w in &loaded.warnings {
        log::warn!("{w}");
    }
    loaded.config.apply_overrides(g.sector.map(Into::into), g.fd_step, g.tol)?;
    Ok(loaded.config)
}

/// Exit status for a finished sweep: the code of the first failed point.
fn sweep_status(out: &SweepOutput) -> i32 {
    out.failures.first().map_or(0, |f| f.exit_code)
}

fn run_and_emit(cfg: &SweepConfig, g: &Global) -> Result<i32> {
    let out = sweep::run_sweep(cfg, g.jobs)?;
    for p in output::emit(&out, g.format.into(), g.out.as_deref())? {
        log::info!("wrote {}", p.display());
    }
    Ok(sweep_status(&out))
}

fn snr_config(a: &SnrArgs) -> Result<SweepConfig> {
    let mut t = toml::Table::new();
    t.insert("schema_version".into(), SCHEMA_VERSION.into());
    t.insert("model".into(), a.model.clone().into());
    if let Some(n) = a.n_spins {
        t.insert("n_spins".into(), i64::from(n).into());
    }
    t.insert("epsilon_omega".into(), a.epsilon.into());
    if let Some(g) = a.g {
        t.insert("g_omega".into(), g.into());
    }
    if let Some(gbar) = a.gbar {
        t.insert("gbar_omega".into(), gbar.into());
    }
    if let Some(v) = &a.variance {
        t.insert("variance".into(), v.clone().into());
    }
    if let Some(d) = &a.delta {
        t.insert("delta".into(), d.clone().into());
    }
    t.insert("grid_axis".into(), "beta_omega".into());
    t.insert("grid_values".into(), toml::Value::Array(a.beta_omega.iter().map(|&b| b.into()).collect()));
    Ok(SweepConfig::from_table(&t)?.config)
}

fn cmd_fit(a: &FitArgs, g: &Global) -> Result<i32> {
    let &[lo, hi] = a.window.as_slice() else {
        return Err(CliError::config("--window", "expected two values, low,high"));
    };
    let window = (lo, hi);
    let bytes = std::fs::read(&a.input).map_err(|source| CliError::Read { path: a.input.clone(), source })?;
    let is_json = a.input.extension().is_some_and(|e| e == "json");
    let curves: Vec<(String, Rows)> = if is_json {
        output::from_json(&bytes)?.curves.into_iter().map(|c| (c.label, c.rows)).collect()
    } else {
        vec![("all".to_string(), output::rows_from_csv(bytes.as_slice())?)]
    };
    let mut records = Vec::new();
    for (label, rows) in &curves {
        let Rows::Snr(rows) = rows else {
            return Err(CliError::Fit(format!("curve `{label}` is not an SNR table")));
        };
        records.push(FitRecord::new(label, &fit_rows(rows, window)?));
    }
    let bytes = match g.format {
        FormatArg::Csv => records_csv(&records)?,
        FormatArg::Json => json(&records)?,
    };
    write_bytes(g.out.as_deref(), &bytes)?;
    Ok(0)
}

fn cmd_reproduce(a: &ReproduceArgs, g: &Global) -> Result<i32> {
    if a.figure_id == "list" {
        let mut text = String::new();
        for id in figures::ids() {
            text.push_str(id);
            text.push('\n');
        }
        write_bytes(None, text.as_bytes())?;
        return Ok(0);
    }
    let cfg = prepare(figures::load(&a.figure_id)?, g)?;
    let out = sweep::run_sweep(&cfg, g.jobs)?;
    let dir = g.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let id = &a.figure_id;
    output::emit(&out, Format::Json, Some(&dir.join(format!("{id}.json"))))?;
    output::emit(&out, Format::Csv, Some(&dir.join(format!("{id}.csv"))))?;
    if let Some(window) = cfg.fit_window {
        let mut records = Vec::new();
        for c in &out.curves {
            if let Rows::Snr(rows) = &c.rows {
                match fit_rows(rows, window) {
                    Ok(f) => records.push(FitRecord::new(&c.label, &f)),
                    Err(e) => log::warn!("fit skipped for {}: {e}", c.label),
                }
            }
        }
        write_bytes(Some(&dir.join(format!("{id}_fit.csv"))), &records_csv(&records)?)?;
    }
    log::info!("{id}: {} curves written to {}", out.curves.len(), dir.display());
    Ok(sweep_status(&out))
}

fn run(cli: Cli) -> Result<i32> {
    let g = &cli.global;
    match &cli.command {
        Command::Snr(a) => {
            let mut cfg = snr_config(a)?;
            cfg.apply_overrides(g.sector.map(Into::into), g.fd_step, g.tol)?;
            run_and_emit(&cfg, g)
        }
        Command::Sweep => {
            let path = g.config.as_deref().ok_or_else(|| CliError::config("--config", "sweep needs a config file"))?;
            let cfg = prepare(SweepConfig::from_path(path)?, g)?;
            run_and_emit(&cfg, g)
        }
        Command::Dicke(a) => {
            let rows = reports::phase_diagram(a.epsilon, &a.gbar, a.beta_omega)?;
            let bytes = match g.format {
                FormatArg::Csv => records_csv(&rows)?,
                FormatArg::Json => json(&rows)?,
            };
            write_bytes(g.out.as_deref(), &bytes)?;
            Ok(0)
        }
        Command::MapSpectral(a) => {
            if a.grid_points == 0 {
                return Err(CliError::config("--grid-points", "must be at least 1"));
            }
            let grid = equiprobe_cli::config::spaced(a.grid_start, a.grid_stop, a.grid_points, false);
            let mode = match a.mode {
                ModeArg::Counterterm => EquivalenceMode::Counterterm,
                ModeArg::Raw => EquivalenceMode::Raw,
            };
            let report = reports::spectral_report(a.gamma, a.g, &a.omega_c, &grid, a.delta, mode)?;
            let bytes = match g.format {
                FormatArg::Csv => records_csv(&report.rows)?,
                FormatArg::Json => json(&report)?,
            };
            write_bytes(g.out.as_deref(), &bytes)?;
            Ok(0)
        }
        Command::Fit(a) => cmd_fit(a, g),
        Command::Reproduce(a) => cmd_reproduce(a, g),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
