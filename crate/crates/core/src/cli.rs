//! Command-line front end.
//!
//! Configuration comes from an optional flat `key = value` file, then
//! flags; flags win. The seed falls back to `BACKSCATTER_SEED` when neither
//! names one. Results go to a CSV that is written to a temporary file in the
//! target directory and renamed into place once complete.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::Parser;
use num_complex::Complex64;
use thiserror::Error;

use crate::detector::ThresholdKind;
use crate::params::{defaults, derive_params, ParamConfig, SystemParams};
use crate::sim::{sweep, BerRecord, ChannelMode, SweepAxis};

pub const SEED_ENV: &str = "BACKSCATTER_SEED";

pub const CSV_HEADER: &str =
    "snr_db,w,threshold_kind,channel_mode,trials,empirical_ber,stderr,analytic_ber";

#[derive(Debug, Parser, Default)]
#[command(name = "backscatter", version, about = "Ambient backscatter BER simulator")]
pub struct Args {
    /// Flat key = value configuration file.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// SNR in dB: a single value or START:STOP:STEP.
    #[arg(long, value_name = "START:STOP:STEP", allow_hyphen_values = true)]
    pub snr: Option<String>,
    /// Averaging window(s), comma separated.
    #[arg(long, value_name = "LIST")]
    pub w: Option<String>,
    /// optimal, equiprobable or both.
    #[arg(long)]
    pub threshold: Option<String>,
    /// fixed or redraw.
    #[arg(long = "channel-mode")]
    pub channel_mode: Option<String>,
    #[arg(long)]
    pub trials: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    /// Output CSV path.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores). Does not affect results.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error(transparent)]
    Args(#[from] clap::Error),
    #[error("cannot read config file {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid value for {field}: {reason}")]
    Field { field: String, reason: String },
}

impl ConfigError {
    fn field(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError::Field {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Sim(#[from] crate::error::Error),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot start worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

/// Everything one invocation needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: SystemParams,
    pub axis: SweepAxis,
    pub kinds: Vec<ThresholdKind>,
    pub channel_mode: ChannelMode,
    pub out: PathBuf,
    pub workers: Option<usize>,
}

const KNOWN_KEYS: &[&str] = &[
    "c", "n", "l", "m", "k", "eta", "eta_im", "nw", "w", "snr", "trials", "seed", "threshold",
    "channel_mode", "out",
];

/// Parses `key = value` lines. Keys are case-insensitive, `#` starts a
/// comment.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            ConfigError::field(
                format!("line {}", lineno + 1),
                format!("expected key = value, got '{line}'"),
            )
        })?;
        let key = key.trim().to_ascii_lowercase().replace('-', "_");
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(ConfigError::field(key, "unknown key"));
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

fn number<T: std::str::FromStr>(field: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| ConfigError::field(field, format!("'{value}': {e}")))
}

/// `START:STOP:STEP` (inclusive) or a single value.
pub fn parse_snr_axis(spec: &str) -> Result<Vec<f64>, ConfigError> {
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [single] => Ok(vec![number("snr", single)?]),
        [start, stop, step] => {
            let (start, stop, step): (f64, f64, f64) =
                (number("snr", start)?, number("snr", stop)?, number("snr", step)?);
            if !(start.is_finite() && stop.is_finite() && step.is_finite()) || step <= 0.0 {
                return Err(ConfigError::field("snr", "need finite values and STEP > 0"));
            }
            if stop < start {
                return Err(ConfigError::field("snr", "STOP must not be below START"));
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            Ok((0..count).map(|i| start + i as f64 * step).collect())
        }
        _ => Err(ConfigError::field(
            "snr",
            format!("expected START:STOP:STEP or a single value, got '{spec}'"),
        )),
    }
}

pub fn parse_window_list(spec: &str) -> Result<Vec<usize>, ConfigError> {
    let ws = spec
        .split(',')
        .map(|s| number::<usize>("W", s))
        .collect::<Result<Vec<_>, _>>()?;
    if ws.is_empty() {
        return Err(ConfigError::field("W", "empty list"));
    }
    Ok(ws)
}

pub fn parse_threshold_kinds(spec: &str) -> Result<Vec<ThresholdKind>, ConfigError> {
    match spec.trim() {
        "both" => Ok(vec![ThresholdKind::Optimal, ThresholdKind::Equiprobable]),
        other => other
            .parse()
            .map(|k| vec![k])
            .map_err(|e: String| ConfigError::field("threshold", e)),
    }
}

/// Merges file values, flags and the environment seed into a validated run.
pub fn resolve(args: Args, env_seed: Option<String>) -> Result<RunConfig, ConfigError> {
    let mut values = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
                path: path.clone(),
                source,
            })?;
            parse_config_text(&text)?
        }
        None => BTreeMap::new(),
    };
    let flags = [
        ("snr", args.snr),
        ("w", args.w),
        ("threshold", args.threshold),
        ("channel_mode", args.channel_mode),
        ("trials", args.trials),
        ("seed", args.seed),
        ("out", args.out.map(|p| p.to_string_lossy().into_owned())),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            values.insert(key.to_string(), v);
        }
    }
    if !values.contains_key("seed") {
        if let Some(seed) = env_seed {
            values.insert("seed".into(), seed);
        }
    }

    let get = |key: &str| values.get(key).map(String::as_str);
    let mut raw = ParamConfig::default();
    let fields: [(&str, &str, &mut usize); 5] = [
        ("c", "C", &mut raw.cp_len),
        ("n", "N", &mut raw.effective_len),
        ("l", "L", &mut raw.l),
        ("m", "M", &mut raw.m),
        ("k", "K", &mut raw.k),
    ];
    for (key, name, slot) in fields {
        if let Some(v) = get(key) {
            *slot = number(name, v)?;
        }
    }
    if let Some(v) = get("nw") {
        raw.noise_power = number("Nw", v)?;
    }
    let eta_re = get("eta").map(|v| number("eta", v)).transpose()?.unwrap_or(defaults::ETA);
    let eta_im = get("eta_im").map(|v| number("eta_im", v)).transpose()?.unwrap_or(0.0);
    raw.eta = Complex64::new(eta_re, eta_im);
    if let Some(v) = get("trials") {
        raw.trials = number("trials", v)?;
    }
    if let Some(v) = get("seed") {
        raw.seed = number("seed", v)?;
    }

    let snrs = match get("snr") {
        Some(v) => parse_snr_axis(v)?,
        None => vec![defaults::SNR_DB],
    };
    let windows = match get("w") {
        Some(v) => parse_window_list(v)?,
        None => vec![defaults::WINDOW],
    };
    if snrs.len() > 1 && windows.len() > 1 {
        return Err(ConfigError::field("W", "sweep either snr or W, not both"));
    }
    raw.window = windows[0];
    raw.source_power = raw.noise_power * 10f64.powf(snrs[0] / 10.0);

    let params = derive_params(&raw).map_err(invalid_to_field)?;
    for &w in &windows[1..] {
        params.with_window(w).map_err(invalid_to_field)?;
    }
    for &s in &snrs[1..] {
        params.with_snr_db(s).map_err(invalid_to_field)?;
    }

    let axis = if windows.len() > 1 {
        SweepAxis::Window(windows)
    } else {
        SweepAxis::SnrDb(snrs)
    };
    let kinds = parse_threshold_kinds(get("threshold").unwrap_or("optimal"))?;
    let channel_mode = get("channel_mode")
        .unwrap_or("fixed")
        .parse()
        .map_err(|e: String| ConfigError::field("channel-mode", e))?;
    let out = PathBuf::from(get("out").unwrap_or("ber.csv"));
    if args.workers == Some(0) {
        return Err(ConfigError::field("workers", "need at least one worker"));
    }

    Ok(RunConfig {
        params,
        axis,
        kinds,
        channel_mode,
        out,
        workers: args.workers,
    })
}

fn invalid_to_field(e: crate::error::Error) -> ConfigError {
    match e {
        crate::error::Error::InvalidConfig { field, reason } => ConfigError::field(field, reason),
        other => ConfigError::field("config", other.to_string()),
    }
}

/// Parses process arguments and the seed environment variable.
pub fn parse_config<I, T>(args: I) -> Result<RunConfig, ConfigError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = Args::try_parse_from(args)?;
    resolve(args, std::env::var(SEED_ENV).ok())
}

fn float(x: f64) -> String {
    format!("{x:.9e}")
}

pub fn format_csv(records: &[BerRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            float(r.snr_db),
            r.w,
            r.threshold_kind,
            r.channel_mode,
            r.trials,
            float(r.empirical_ber),
            float(r.stderr),
            r.analytic_ber.map(float).unwrap_or_default(),
        );
    }
    out
}

pub fn format_summary(records: &[BerRecord]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>8} {:>4} {:>13} {:>7} {:>10} {:>12} {:>11} {:>12}",
        "snr_db", "W", "threshold", "mode", "trials", "ber", "stderr", "analytic"
    );
    for r in records {
        let analytic = r
            .analytic_ber
            .map(|a| format!("{a:.4e}"))
            .unwrap_or_else(|| "-".into());
        let _ = writeln!(
            out,
            "{:>8.2} {:>4} {:>13} {:>7} {:>10} {:>12.4e} {:>11.3e} {:>12}",
            r.snr_db, r.w, r.threshold_kind, r.channel_mode, r.trials, r.empirical_ber, r.stderr, analytic
        );
    }
    out
}

/// Writes `contents` to `path` through a temporary sibling file, so `path`
/// either holds the full CSV or is left untouched.
pub fn write_atomically(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::Builder::new().prefix(".ber-").suffix(".tmp").tempfile_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Runs the configured sweep on the requested number of workers.
pub fn simulate(config: &RunConfig) -> Result<Vec<BerRecord>, RunError> {
    let job = || sweep(&config.params, &config.axis, &config.kinds, config.channel_mode);
    let records = match config.workers {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build()?.install(job)?,
        None => job()?,
    };
    Ok(records)
}

/// Simulates, writes the CSV and returns the summary table.
pub fn run(config: &RunConfig) -> Result<String, RunError> {
    let records = simulate(config)?;
    write_atomically(&config.out, &format_csv(&records)).map_err(|source| RunError::Io {
        path: config.out.clone(),
        source,
    })?;
    Ok(format_summary(&records))
}
