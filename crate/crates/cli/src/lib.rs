//! Command-line front end: option merging and validation, and the CSV
//! emitters behind the `trace`, `sweep`, `response` and `fixture` subcommands.

use std::fmt;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use cpsto_core::harness::{
    derive_seed, freq_response, reference_grid, run_monte_carlo, run_trial, ChannelMode, Scenario,
    GRID_STO_VALUES,
};
use cpsto_core::sync::Method;
use cpsto_core::{CirFixture, Complex64, OfdmParams};
use serde::Deserialize;

/// Exit status for usage and validation errors.
pub const EXIT_USAGE: i32 = 2;
/// Exit status for failures after validation.
pub const EXIT_RUNTIME: i32 = 1;

#[derive(Debug, Parser)]
#[command(
    name = "cpsto",
    version,
    about = "Cyclic-prefix symbol timing offset estimation for OFDM"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: CommandKind,

    #[command(flatten)]
    pub opts: Opts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum CommandKind {
    /// One realization's metric traces for every selected method.
    Trace,
    /// Monte Carlo hit-rate table over the scenario grid.
    Sweep,
    /// Magnitude and phase response of a tap vector.
    Response,
    /// Print the ten-tap reference channel.
    Fixture,
}

/// Flags shared by all subcommands. Each one overrides the same key in `--config`.
#[derive(Debug, Default, Clone, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Opts {
    /// Key-value TOML file with defaults for the flags below.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// Per-sample SNR in dB; `inf` disables noise.
    #[arg(long = "snr-db", global = true, allow_negative_numbers = true)]
    pub snr_db: Option<f64>,

    /// Cyclic prefix length in samples.
    #[arg(long, global = true)]
    pub cp: Option<usize>,

    /// awgn, rayleigh-fixture or rayleigh-random.
    #[arg(long, global = true)]
    pub channel: Option<String>,

    /// True offsets, comma separated.
    #[arg(
        long,
        global = true,
        value_delimiter = ',',
        allow_negative_numbers = true
    )]
    pub sto: Option<Vec<isize>>,

    /// Monte Carlo trials per scenario cell.
    #[arg(long, global = true)]
    pub trials: Option<usize>,

    /// Master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output CSV path; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// cbm, dbm-mag, dbm-lit or all (comma separated).
    #[arg(long, global = true)]
    pub method: Option<String>,

    /// IDFT size.
    #[arg(long, global = true)]
    pub n: Option<usize>,

    /// Frequency bins for `response`.
    #[arg(long, global = true)]
    pub points: Option<usize>,

    /// Comma-separated complex taps for `response`, e.g. `0.5-0.1j,0.2`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub taps: Option<String>,
}

impl Opts {
    /// Fills every unset field from `file`.
    pub fn or(self, file: Opts) -> Opts {
        Opts {
            config: self.config,
            snr_db: self.snr_db.or(file.snr_db),
            cp: self.cp.or(file.cp),
            channel: self.channel.or(file.channel),
            sto: self.sto.or(file.sto),
            trials: self.trials.or(file.trials),
            seed: self.seed.or(file.seed),
            out: self.out.or(file.out),
            method: self.method.or(file.method),
            n: self.n.or(file.n),
            points: self.points.or(file.points),
            taps: self.taps.or(file.taps),
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "error: {msg}"),
            CliError::Runtime(err) => write!(f, "error: {err:#}"),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(err: anyhow::Error) -> Self {
        CliError::Runtime(err)
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Runtime(err.into())
    }
}

fn usage(field: &str, msg: impl fmt::Display) -> CliError {
    CliError::Usage(format!("invalid {field}: {msg}"))
}

/// Fully validated settings for one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: CommandKind,
    pub snr_db: Option<f64>,
    pub cp_len: Option<usize>,
    pub channel: Option<ChannelMode>,
    pub sto: Option<Vec<isize>>,
    pub trials: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub methods: Vec<Method>,
    pub n: usize,
    pub points: usize,
    pub taps: Option<Vec<Complex64>>,
}

pub const DEFAULT_TRIALS: usize = 1000;
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_POINTS: usize = 256;

impl RunConfig {
    /// Merges flags over the optional config file and validates every
    /// selector before any simulation runs.
    pub fn resolve(command: CommandKind, flags: Opts) -> Result<Self, CliError> {
        let opts = match &flags.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| usage("--config", format!("{}: {e}", path.display())))?;
                let file: Opts = toml::from_str(&text)
                    .map_err(|e| usage("--config", e.message().to_string()))?;
                flags.or(file)
            }
            None => flags,
        };

        let n = opts.n.unwrap_or(OfdmParams::default().n_subcarriers);
        if n < 2 {
            return Err(usage(
                "--n",
                format!("IDFT size must be at least 2, got {n}"),
            ));
        }
        if let Some(cp) = opts.cp {
            if cp == 0 || cp >= n {
                return Err(usage(
                    "--cp",
                    format!("must satisfy 0 < cp < n ({n}), got {cp}"),
                ));
            }
        }
        if let Some(snr) = opts.snr_db {
            if snr.is_nan() || snr == f64::NEG_INFINITY {
                return Err(usage(
                    "--snr-db",
                    format!("must be finite or inf, got {snr}"),
                ));
            }
        }
        let channel = opts
            .channel
            .as_deref()
            .map(str::parse::<ChannelMode>)
            .transpose()
            .map_err(|e| usage("--channel", e))?;
        let methods = match opts.method.as_deref() {
            None | Some("all") => Method::ALL.to_vec(),
            Some(list) => list
                .split(',')
                .map(|m| m.trim().parse::<Method>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| usage("--method", e))?,
        };
        let trials = opts.trials.unwrap_or(DEFAULT_TRIALS);
        if trials == 0 {
            return Err(usage("--trials", "must be at least 1"));
        }
        if let Some(sto) = &opts.sto {
            if sto.is_empty() {
                return Err(usage("--sto", "needs at least one value"));
            }
            let cps = opts.cp.map_or_else(|| cp_grid(n), |cp| vec![cp]);
            for &cp in &cps {
                let reach = (2 * cp).min(n - 1);
                if let Some(bad) = sto.iter().find(|d| d.unsigned_abs() > reach) {
                    return Err(usage(
                        "--sto",
                        format!("{bad} outside the search range ±{reach} for cp {cp}"),
                    ));
                }
            }
            if command == CommandKind::Trace && sto.len() != 1 {
                return Err(usage("--sto", "trace takes a single value"));
            }
        }
        let taps = opts
            .taps
            .as_deref()
            .map(parse_taps)
            .transpose()
            .map_err(|e| usage("--taps", e))?;
        let points = opts.points.unwrap_or(DEFAULT_POINTS);
        let n_taps = taps.as_ref().map_or(CirFixture::TAPS.len(), Vec::len);
        if points < n_taps {
            return Err(usage(
                "--points",
                format!("must be at least the number of taps ({n_taps}), got {points}"),
            ));
        }

        Ok(Self {
            command,
            snr_db: opts.snr_db,
            cp_len: opts.cp,
            channel,
            sto: opts.sto,
            trials,
            seed: opts.seed.unwrap_or(DEFAULT_SEED),
            out: opts.out,
            methods,
            n,
            points,
            taps,
        })
    }

    /// Scenario cells selected by the config: the reference grid filtered by
    /// any of `--snr-db`, `--cp`, `--channel`, with overrides applied.
    pub fn scenarios(&self) -> Result<Vec<Scenario>, CliError> {
        let base = match self.command {
            CommandKind::Trace => vec![Scenario::new(
                OfdmParams {
                    n_subcarriers: self.n,
                    cp_len: self.cp_len.unwrap_or(32.min(self.n - 1)),
                    ..OfdmParams::default()
                },
                self.snr_db.unwrap_or(10.0),
                self.channel.unwrap_or(ChannelMode::Awgn),
            )],
            _ => {
                let mut cells: Vec<(f64, usize, ChannelMode)> = Vec::new();
                for s in reference_grid() {
                    let cell = (
                        self.snr_db.unwrap_or(s.snr_db),
                        self.cp_len.unwrap_or(s.ofdm.cp_len),
                        self.channel.unwrap_or(s.channel),
                    );
                    if !cells.iter().any(|c| {
                        c.0.to_bits() == cell.0.to_bits() && c.1 == cell.1 && c.2 == cell.2
                    }) {
                        cells.push(cell);
                    }
                }
                cells
                    .into_iter()
                    .map(|(snr, cp, channel)| {
                        let ofdm = OfdmParams {
                            n_subcarriers: self.n,
                            cp_len: cp,
                            ..OfdmParams::default()
                        };
                        Scenario::new(ofdm, snr, channel)
                    })
                    .collect()
            }
        };
        base.into_iter()
            .map(|mut s| {
                s.methods = self.methods.clone();
                s.sto_values = self.sto.clone().unwrap_or_else(|| GRID_STO_VALUES.to_vec());
                s.validate().map_err(|e| usage("scenario", e))?;
                Ok(s)
            })
            .collect()
    }
}

/// Default CP grid clipped to the IDFT size.
fn cp_grid(n: usize) -> Vec<usize> {
    cpsto_core::harness::GRID_CP_LENS
        .iter()
        .map(|&cp| cp.min(n - 1))
        .collect()
}

fn parse_taps(s: &str) -> Result<Vec<Complex64>, String> {
    let taps = s
        .split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<Complex64>()
                .map_err(|_| format!("cannot parse tap '{t}'"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if taps.iter().any(|t| !t.re.is_finite() || !t.im.is_finite()) {
        return Err("taps must be finite".into());
    }
    Ok(taps)
}

fn column_name(method: Method) -> &'static str {
    match method {
        Method::Cbm => "cbm_value",
        Method::DbmMagnitude => "dbm_mag_value",
        Method::DbmLiteral => "dbm_lit_value",
    }
}

/// One trial's traces, one row per candidate offset.
pub fn cmd_trace(cfg: &RunConfig, out: &mut impl Write) -> Result<(), CliError> {
    let scenario = cfg.scenarios()?.remove(0);
    let true_sto = cfg.sto.as_ref().map_or(GRID_STO_VALUES[0], |s| s[0]);
    let trial_seed = derive_seed(cfg.seed, &scenario.label, 0);
    let result = run_trial(&scenario, true_sto, trial_seed).map_err(anyhow::Error::from)?;

    writeln!(out, "# cpsto trace")?;
    writeln!(
        out,
        "# scenario={} snr_db={} cp_len={} n={} channel={}",
        scenario.label,
        scenario.snr_db,
        scenario.ofdm.cp_len,
        scenario.ofdm.n_subcarriers,
        scenario.channel
    )?;
    writeln!(out, "# seed={} trial_seed={trial_seed}", cfg.seed)?;
    writeln!(out, "# true_sto={true_sto}")?;
    let estimates: Vec<String> = result
        .estimates
        .iter()
        .map(|(m, d)| format!("{m}={d}"))
        .collect();
    writeln!(out, "# estimate {}", estimates.join(" "))?;

    let traces: Vec<_> = result.traces.values().collect();
    let header: Vec<&str> = std::iter::once("offset")
        .chain(traces.iter().map(|t| column_name(t.method)))
        .collect();
    writeln!(out, "{}", header.join(","))?;
    let offsets = &traces[0].offsets;
    for (row, offset) in offsets.iter().enumerate() {
        write!(out, "{offset}")?;
        for t in &traces {
            write!(out, ",{}", t.values[row])?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Hit-rate table, one row per (scenario cell, method).
pub fn cmd_sweep(cfg: &RunConfig, out: &mut impl Write) -> Result<(), CliError> {
    let scenarios = cfg.scenarios()?;
    writeln!(
        out,
        "# cpsto sweep seed={} trials={} n={}",
        cfg.seed, cfg.trials, cfg.n
    )?;
    writeln!(
        out,
        "snr_db,cp_len,channel,method,n_trials,exact_hit_rate,within_1_rate,mean_abs_error,mse"
    )?;
    for scenario in &scenarios {
        let stats = run_monte_carlo(scenario, cfg.trials, cfg.seed).map_err(anyhow::Error::from)?;
        for m in &stats.methods {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                stats.snr_db,
                stats.cp_len,
                stats.channel,
                m.method,
                stats.n_trials,
                m.exact_hit_rate,
                m.within_1_rate,
                m.mean_abs_error,
                m.mse
            )?;
        }
    }
    Ok(())
}

/// Frequency response of the fixture (or `--taps`) on `--points` bins.
pub fn cmd_response(cfg: &RunConfig, out: &mut impl Write) -> Result<(), CliError> {
    let (taps, source) = match &cfg.taps {
        Some(t) => (t.clone(), "user"),
        None => (CirFixture::taps(), "fixture"),
    };
    let points = freq_response(&taps, cfg.points).map_err(|e| usage("--points", e))?;
    writeln!(out, "# cpsto response taps={source} points={}", cfg.points)?;
    writeln!(out, "normalized_freq,magnitude_db,phase_rad")?;
    for p in points {
        writeln!(
            out,
            "{},{},{}",
            p.normalized_freq, p.magnitude_db, p.phase_rad
        )?;
    }
    Ok(())
}

/// Reference taps, one per line, as `re im` with 4 decimals.
pub fn cmd_fixture(out: &mut impl Write) -> Result<(), CliError> {
    for t in CirFixture::TAPS {
        writeln!(out, "{:.4} {:+.4}j", t.re, t.im)?;
    }
    Ok(())
}

/// Validates, then runs the command into `--out` or standard output.
pub fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = RunConfig::resolve(cli.command, cli.opts)?;
    if cfg.command != CommandKind::Fixture && cfg.command != CommandKind::Response {
        cfg.scenarios()?;
    }
    let mut buf = Vec::new();
    match cfg.command {
        CommandKind::Trace => cmd_trace(&cfg, &mut buf)?,
        CommandKind::Sweep => cmd_sweep(&cfg, &mut buf)?,
        CommandKind::Response => cmd_response(&cfg, &mut buf)?,
        CommandKind::Fixture => cmd_fixture(&mut buf)?,
    }
    match (&cfg.out, cfg.command) {
        (Some(path), CommandKind::Trace | CommandKind::Sweep | CommandKind::Response) => {
            std::fs::write(path, &buf).map_err(|e| {
                CliError::Runtime(anyhow::anyhow!("writing {}: {e}", path.display()))
            })?;
        }
        _ => std::io::stdout().write_all(&buf)?,
    }
    Ok(())
}
