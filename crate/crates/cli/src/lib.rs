//! Subcommand implementations for the `isac-mi` binary.
//!
//! Every command reads a flat JSON scenario file, writes its outputs into an
//! output directory and finishes by writing `manifest.json` there. Files are
//! written to a temporary name and renamed into place.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use isac_mi::downlink::{self, Mode, RegionRun};
use isac_mi::region::SlopePair;
use isac_mi::validate::{self, Hooks};
use isac_mi::{uplink, CurveRowF64, ScenarioConfig, ScenarioKind};
use serde::Serialize;

/// Environment variable holding the worker count.
pub const THREADS_ENV: &str = "ISAC_MI_THREADS";

pub const MANIFEST_FILE: &str = "manifest.json";

pub const REGION_HEADER: &str = "cr_bits_hz,sr_bits_hz,sweep_param,stderr_cr,stderr_sr";
pub const CURVES_HEADER: &str = "power_db,cr_isac,sr_isac,cr_fdsac,sr_fdsac";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("numerical failure in {op}: {source}")]
    Numerical {
        op: &'static str,
        #[source]
        source: isac_mi::Error,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("validation failed at check '{0}'")]
    Validation(&'static str),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical { .. } => 3,
            CliError::Io { .. } => 4,
            CliError::Validation(_) => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn numerical(op: &'static str) -> impl FnOnce(isac_mi::Error) -> CliError {
    move |source| CliError::Numerical { op, source }
}

/// Which regions `region` evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ModeArg {
    Isac,
    Fdsac,
    Both,
}

impl ModeArg {
    fn modes(self) -> Vec<Mode> {
        match self {
            ModeArg::Isac => vec![Mode::Isac],
            ModeArg::Fdsac => vec![Mode::Fdsac],
            ModeArg::Both => vec![Mode::Isac, Mode::Fdsac],
        }
    }
}

/// Sets the global worker pool from [`THREADS_ENV`], if present.
pub fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got '{raw}'")))?;
    // A pool configured earlier in the same process wins; outputs do not depend on it.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn load_config(path: &Path) -> CliResult<ScenarioConfig> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    ScenarioConfig::from_json(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Record of one CLI run.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub duration_s: f64,
    pub outputs: Vec<String>,
    pub scenario: ScenarioConfig,
}

fn write_atomic(path: &Path, contents: &[u8]) -> CliResult<()> {
    let io_err = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp).map_err(io_err)?;
        f.write_all(contents).map_err(io_err)?;
        f.sync_all().map_err(io_err)?;
    }
    fs::rename(&tmp, path).map_err(io_err)
}

fn prepare_out(out: &Path) -> CliResult<()> {
    fs::create_dir_all(out).map_err(|source| CliError::Io {
        path: out.to_path_buf(),
        source,
    })
}

fn finish(
    out: &Path,
    command: &str,
    scenario: &ScenarioConfig,
    started: Instant,
    outputs: &[PathBuf],
) -> CliResult<()> {
    let manifest = RunManifest {
        command: command.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: scenario.seed,
        duration_s: started.elapsed().as_secs_f64(),
        outputs: outputs
            .iter()
            .map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned())
            .collect(),
        scenario: scenario.clone(),
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_atomic(&out.join(MANIFEST_FILE), json.as_bytes())
}

/// Region CSV: one row per frontier vertex, in order of increasing `cr`.
pub fn region_csv(run: &RegionRun<f64>) -> String {
    let mut s = String::from(REGION_HEADER);
    s.push('\n');
    for sample in run.frontier_samples() {
        let (m, e) = (sample.point.mean, sample.point.stderr);
        writeln!(s, "{},{},{},{},{}", m.cr, m.sr, sample.label, e.cr, e.sr).unwrap();
    }
    s
}

/// Curves CSV. Powers are reported in dB relative to the communication noise.
pub fn curves_csv(rows: &[CurveRowF64], sigma2_c: f64) -> String {
    let mut s = String::from(CURVES_HEADER);
    s.push('\n');
    for r in rows {
        let db = 10.0 * (r.power / sigma2_c).log10();
        let (i, f) = (r.isac.mean, r.fdsac.mean);
        writeln!(s, "{db},{},{},{},{}", i.cr, i.sr, f.cr, f.sr).unwrap();
    }
    s
}

/// Slopes document written by `slopes`.
#[derive(Debug, Clone, Serialize)]
pub struct SlopesReport {
    pub scenario: ScenarioKind,
    pub isac: SlopePair,
    pub fdsac: SlopePair,
}

pub fn region_path(out: &Path, kind: ScenarioKind, mode: Mode) -> PathBuf {
    out.join(format!("region_{}_{}.csv", kind.as_str(), mode.as_str()))
}

pub fn curves_path(out: &Path, kind: ScenarioKind) -> PathBuf {
    out.join(format!("curves_{}.csv", kind.as_str()))
}

pub fn slopes_path(out: &Path, kind: ScenarioKind) -> PathBuf {
    out.join(format!("slopes_{}.json", kind.as_str()))
}

pub fn cmd_region(config: &Path, mode: ModeArg, out: &Path) -> CliResult<Vec<PathBuf>> {
    let started = Instant::now();
    let scenario = load_config(config)?;
    prepare_out(out)?;
    let mut outputs = Vec::new();
    for m in mode.modes() {
        let run = match scenario.kind {
            ScenarioKind::Uplink => uplink::uplink_region::<f64>(&scenario, m).map_err(numerical("uplink_region"))?,
            _ => downlink::downlink_region::<f64>(&scenario, m).map_err(numerical("downlink_region"))?,
        };
        let path = region_path(out, scenario.kind, m);
        write_atomic(&path, region_csv(&run).as_bytes())?;
        outputs.push(path);
    }
    finish(out, "region", &scenario, started, &outputs)?;
    Ok(outputs)
}

pub fn cmd_curves(config: &Path, out: &Path) -> CliResult<Vec<PathBuf>> {
    let started = Instant::now();
    let scenario = load_config(config)?;
    if scenario.snr_sweep.is_empty() {
        return Err(CliError::Config("snr_sweep must not be empty".into()));
    }
    prepare_out(out)?;
    let rows = match scenario.kind {
        ScenarioKind::Uplink => {
            uplink::uplink_curves::<f64>(&scenario, &scenario.snr_sweep).map_err(numerical("uplink_curves"))?
        }
        _ => downlink::downlink_curves::<f64>(&scenario, &scenario.snr_sweep).map_err(numerical("downlink_curves"))?,
    };
    let path = curves_path(out, scenario.kind);
    write_atomic(&path, curves_csv(&rows, scenario.power.sigma2_c).as_bytes())?;
    let outputs = vec![path];
    finish(out, "curves", &scenario, started, &outputs)?;
    Ok(outputs)
}

pub fn cmd_slopes(config: &Path, out: &Path) -> CliResult<Vec<PathBuf>> {
    let started = Instant::now();
    let scenario = load_config(config)?;
    prepare_out(out)?;
    let (isac, fdsac) = match scenario.kind {
        ScenarioKind::Uplink => uplink::uplink_slopes(&scenario).map_err(numerical("uplink_slopes"))?,
        _ => downlink::downlink_slopes(&scenario).map_err(numerical("downlink_slopes"))?,
    };
    let report = SlopesReport {
        scenario: scenario.kind,
        isac,
        fdsac,
    };
    let path = slopes_path(out, scenario.kind);
    let json = serde_json::to_string_pretty(&report).expect("slopes serialize");
    write_atomic(&path, json.as_bytes())?;
    let outputs = vec![path];
    finish(out, "slopes", &scenario, started, &outputs)?;
    Ok(outputs)
}

/// Runs the validation suite with the given kernels, printing one line per
/// check to `sink`. Fails with the name of the first failing check.
pub fn run_validate(hooks: &Hooks, sink: &mut dyn Write) -> CliResult<()> {
    let results = validate::run_checks(hooks, |r| {
        let _ = writeln!(sink, "{r}");
    });
    match results.iter().find(|r| !r.passed) {
        Some(r) => Err(CliError::Validation(r.name)),
        None => Ok(()),
    }
}

pub fn cmd_validate() -> CliResult<()> {
    run_validate(&Hooks::default(), &mut io::stdout().lock())
}
