use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use terrace_lab::cauchy::{default_tau, run, Kinetics, RunOptions};
use terrace_lab::config::{ConfigError, Initial, RunConfig};
use terrace_lab::output::{write_csv, write_csv_with_meta, write_json};
use terrace_lab::reaction::ReactionSpec;
use terrace_lab::verify::{run_suite, VerifyConfig};
use terrace_lab::wave::{
    minimal_decomposition, solve_wave, speed_identity_residual, NoWave, WaveError, WaveOptions, WaveProfile,
    WaveSolution,
};

const EXIT_OK: u8 = 0;
const EXIT_USAGE: u8 = 1;
const EXIT_NONEXISTENCE: u8 = 2;
const EXIT_FAILED: u8 = 3;

#[derive(Parser)]
#[command(name = "terrace", version, about = "Traveling waves, terraces and Cauchy runs for discontinuous multistable reactions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Suppress the summary on stdout.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the wave between the configured endpoints.
    Wave,
    /// Compute the minimal propagating terrace from 0 to 1.
    Terrace,
    /// Run the Cauchy problem and record snapshots and fronts.
    Simulate,
    /// Run the acceptance suite (built-in defaults without --config).
    Verify,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(e: impl std::fmt::Display) -> Self {
        Self { code: EXIT_USAGE, message: e.to_string() }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Wave(w) => w.into(),
            e => Failure::usage(e),
        }
    }
}

impl From<WaveError> for Failure {
    fn from(e: WaveError) -> Self {
        let code = if matches!(e, WaveError::Inconsistent { .. }) { EXIT_NONEXISTENCE } else { EXIT_USAGE };
        Self { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::usage(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Wave => cmd_wave(&cli),
        Command::Terrace => cmd_terrace(&cli),
        Command::Simulate => cmd_simulate(&cli),
        Command::Verify => cmd_verify(&cli),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

/// Loads the run config with the `--seed` override applied.
fn load(cli: &Cli) -> Result<RunConfig, Failure> {
    let path = cli.config.as_deref().ok_or_else(|| Failure::usage("--config is required"))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn out_dir(cli: &Cli, cfg: &RunConfig) -> Result<PathBuf, Failure> {
    let dir = cli.out.clone().or_else(|| cfg.output.dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

#[derive(Serialize)]
struct WaveSummary {
    theta_lo: f64,
    theta_hi: f64,
    speed: f64,
    eta: f64,
    dphi: f64,
    speed_bracket: (f64, f64),
    speed_identity_residual: f64,
    ode_residual: f64,
    arrival_exponent: Option<f64>,
    departure_exponent: Option<f64>,
}

impl WaveSummary {
    fn of(w: &WaveProfile, r: &terrace_lab::reaction::MultistableReaction) -> Self {
        Self {
            theta_lo: w.theta_lo(),
            theta_hi: w.theta_hi(),
            speed: w.speed(),
            eta: w.eta(),
            dphi: w.step(),
            speed_bracket: w.bracket(),
            speed_identity_residual: speed_identity_residual(w, r),
            ode_residual: w.ode_residual(r),
            arrival_exponent: finite(w.arrival_exponent()),
            departure_exponent: finite(w.departure_exponent()),
        }
    }
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

#[derive(Serialize)]
struct WaveReport<'a> {
    reaction: &'a ReactionSpec,
    found: bool,
    wave: Option<WaveSummary>,
    no_wave: Option<NoWave>,
}

fn write_profile(path: &Path, hash: &str, w: &WaveProfile, s: &WaveSummary) -> std::io::Result<()> {
    let (z, phi, p) = w.samples();
    let rows = (0..z.len()).map(|k| vec![z[k], phi[k], p[k]]);
    let meta = [
        ("c", s.speed),
        ("eta", s.eta),
        ("theta_lo", s.theta_lo),
        ("theta_hi", s.theta_hi),
        ("speed_identity_residual", s.speed_identity_residual),
        ("ode_residual", s.ode_residual),
    ];
    write_csv_with_meta(path, hash, &meta, &["z", "phi", "dphi"], rows)
}

fn cmd_wave(cli: &Cli) -> Result<u8, Failure> {
    let cfg = load(cli)?;
    let r = cfg.validate()?;
    let dir = out_dir(cli, &cfg)?;
    let hash = cfg.hash();
    let sol = solve_wave(&r, cfg.wave.theta_lo, cfg.wave.theta_hi, &cfg.wave.options)?;
    let spec = cfg.reaction.clone();
    let (report, code) = match &sol {
        WaveSolution::Found(w) => {
            let summary = WaveSummary::of(w, &r);
            write_profile(&dir.join("profile.csv"), &hash, w, &summary)?;
            (WaveReport { reaction: &spec, found: true, wave: Some(summary), no_wave: None }, EXIT_OK)
        }
        WaveSolution::NoWave(nw) => {
            (WaveReport { reaction: &spec, found: false, wave: None, no_wave: Some(nw.clone()) }, EXIT_NONEXISTENCE)
        }
    };
    write_json(&dir.join("wave.json"), &hash, &report)?;
    if !cli.quiet {
        match &sol {
            WaveSolution::Found(w) => println!("wave {} -> {}: c = {:.10}, eta = {:.6}", w.theta_hi(), w.theta_lo(), w.speed(), w.eta()),
            WaveSolution::NoWave(nw) => println!("no wave: {nw:?}"),
        }
    }
    Ok(code)
}

#[derive(Serialize)]
struct TerraceReport<'a> {
    reaction: &'a ReactionSpec,
    terrace: terrace_lab::terrace::TerraceSummary,
    waves: Vec<WaveSummary>,
}

fn cmd_terrace(cli: &Cli) -> Result<u8, Failure> {
    let cfg = load(cli)?;
    let r = cfg.validate()?;
    let dir = out_dir(cli, &cfg)?;
    let hash = cfg.hash();
    let t = minimal_decomposition(&r, &cfg.wave.options)?;
    let t = t.with_shifts(t.solution_shifts(0.0), true).map_err(WaveError::from)?;
    let waves: Vec<WaveSummary> = t.waves().iter().map(|w| WaveSummary::of(w, &r)).collect();
    for (j, (w, s)) in t.waves().iter().zip(&waves).enumerate() {
        write_profile(&dir.join(format!("wave_{}.csv", j + 1)), &hash, w, s)?;
    }
    let report = TerraceReport { reaction: &cfg.reaction, terrace: t.summary(), waves };
    write_json(&dir.join("terrace.json"), &hash, &report)?;
    if !cli.quiet {
        println!("terrace with {} wave(s): platforms {:?}, speeds {:?}", t.len(), t.platforms(), t.speeds());
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct Manifest<'a> {
    config: &'a RunConfig,
    variant: &'static str,
    epsilon: Option<f64>,
    dx: f64,
    dt: f64,
    steps: u64,
    snapshot_times: Vec<f64>,
    snapshot_files: Vec<String>,
    platforms: Vec<f64>,
    tau: f64,
    warnings: Vec<String>,
}

fn cmd_simulate(cli: &Cli) -> Result<u8, Failure> {
    let cfg = load(cli)?;
    let r = cfg.validate()?;
    let init = cfg.initial(&r)?;
    let mut state = cfg.grid_state(&r, &init).map_err(Failure::from)?;
    let dir = out_dir(cli, &cfg)?;
    let hash = cfg.hash();
    let variant = cfg.variant();
    let kin = Kinetics::new(&r, variant).map_err(Failure::usage)?;
    let platforms = r.stable_states();
    let tau = cfg.diagnostics.tau.unwrap_or_else(|| default_tau(&platforms));
    let mut warnings = Vec::new();
    let etas = match &init {
        Initial::Terrace(t) => Ok(t.etas()),
        Initial::Data(_) => minimal_decomposition(&r, &WaveOptions { dphi: 1e-3, ..cfg.wave.options }).map(|t| t.etas()),
    };
    let edge_margin = match etas {
        Ok(e) => Some(cfg.diagnostics.edge_margin_etas * e.iter().cloned().fold(0.0, f64::max)),
        Err(e) => {
            warnings.push(format!("edge check skipped: {e}"));
            None
        }
    };
    let opts = RunOptions {
        snapshot_times: cfg.time.snapshot_times(),
        front_dt: cfg.time.front_dt,
        follow: cfg.grid.follow,
        platforms: platforms.clone(),
        tau,
        edge_margin,
    };
    let out = run(&mut state, &kin, cfg.time.t_end, &opts).map_err(Failure::usage)?;
    warnings.extend(out.warnings.iter().cloned());

    let mut files = Vec::new();
    for (k, s) in out.snapshots.iter().enumerate() {
        let name = format!("snapshot_{k:03}.csv");
        write_csv(&dir.join(&name), &hash, &["x", "u"], (0..s.u.len()).map(|i| vec![s.x(i), s.u[i]]))?;
        files.push(name);
    }
    let mut header = vec!["t".to_string(), "x_lower_front".into(), "x_upper_front".into()];
    for j in 1..platforms.len() {
        header.push(format!("x_{j}^u"));
        header.push(format!("x_{j}^l"));
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = out.fronts.samples.iter().map(|f| {
        let mut row = vec![f.t, f.x0, f.x1];
        for b in &f.bands {
            row.push(b.upper);
            row.push(b.lower);
        }
        row
    });
    write_csv(&dir.join("fronts.csv"), &hash, &header_refs, rows)?;
    let epsilon = match variant {
        terrace_lab::cauchy::Variant::Regularized { epsilon } => Some(epsilon),
        _ => None,
    };
    let manifest = Manifest {
        config: &cfg,
        variant: variant.name(),
        epsilon,
        dx: state.dx(),
        dt: out.dt,
        steps: out.steps,
        snapshot_times: out.snapshots.iter().map(|s| s.t).collect(),
        snapshot_files: files,
        platforms,
        tau,
        warnings: warnings.clone(),
    };
    write_json(&dir.join("manifest.json"), &hash, &manifest)?;
    if !cli.quiet {
        println!("simulated to t = {} in {} steps (dt = {:e}), {} snapshot(s)", state.t(), out.steps, out.dt, out.snapshots.len());
        for w in &warnings {
            println!("warning: {w}");
        }
    }
    Ok(EXIT_OK)
}

fn cmd_verify(cli: &Cli) -> Result<u8, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
            toml::from_str::<VerifyConfig>(&text).map_err(|e| Failure::usage(format!("cannot parse {}: {e}", path.display())))?
        }
        None => VerifyConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let quiet = cli.quiet;
    let report = run_suite(&cfg, cli.out.as_deref(), |r| {
        if !quiet {
            println!("{}", r.line());
        }
    })
    .map_err(Failure::usage)?;
    Ok(if report.pass { EXIT_OK } else { EXIT_FAILED })
}
