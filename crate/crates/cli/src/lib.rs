//! Subcommands of the `sleeptemp` binary.
//!
//! Every command computes all of its outputs in memory first and only then
//! writes them, each through a temporary file renamed into place, so a failed
//! run leaves no partial output behind.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::{Map, Value};

use sleeptemp::io::{self, ReportSummary};
use sleeptemp::rr::{filter_artifacts, parse_rr};
use sleeptemp::simulator::closed_loop_run;
use sleeptemp::stager::{classify, smooth_windows, stage_percentages};
use sleeptemp::{
    controller, spectral, ControllerConfig, FrequencyBands, Hypnogram, IngestConfig,
    PipelineConfig, RRSeries, SimConfig, SleepStage, SpectralConfig, SpectralWindow, StagerConfig,
};

#[derive(Debug, Parser)]
#[command(
    name = "sleeptemp",
    version,
    about = "RR intervals to sleep stages to an ambient temperature profile"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-window VLF/LF/HF band powers (windows.csv).
    Analyze(PipelineArgs),
    /// Detected hypnogram and stage percentages (detected.csv, percentages.json).
    Stage(PipelineArgs),
    /// Temperature profile from the detected hypnogram (profile.csv).
    Control(PipelineArgs),
    /// Simulate a night and run the whole pipeline on it.
    Simulate(SimulateArgs),
    /// Summarize a session directory.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// RR interval file.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// JSON configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comfort setpoint in °C; overrides the config file.
    #[arg(long)]
    pub baseline_ta: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// JSON configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Random seed; overrides `sim.seed` in the config file.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comfort setpoint in °C; overrides the config file.
    #[arg(long)]
    pub baseline_ta: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Session directory written by `simulate`, or by `stage` and `control`.
    #[arg(long)]
    pub input: PathBuf,
}

/// Contents of the `--config` JSON file. Every section is optional and every
/// field inside a section falls back to its default, except the controller
/// baseline which has none.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub ingest: IngestConfig,
    pub spectral: SpectralConfig,
    pub bands: FrequencyBands,
    pub stager: StagerConfig,
    pub controller: Map<String, Value>,
    pub sim: SimConfig,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    /// Controller settings with the flag taking precedence over the file.
    pub fn controller(&self, baseline_override: Option<f64>) -> Result<ControllerConfig> {
        let mut section = self.controller.clone();
        if let Some(b) = baseline_override {
            section.insert("baseline_ta".into(), Value::from(b));
        }
        if !section.contains_key("baseline_ta") {
            bail!("missing baseline temperature: pass --baseline-ta <CELSIUS> or set controller.baseline_ta in --config");
        }
        let cfg: ControllerConfig =
            serde_json::from_value(Value::Object(section)).context("invalid controller section")?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn pipeline(&self, controller: ControllerConfig) -> PipelineConfig {
        PipelineConfig {
            spectral: self.spectral,
            bands: self.bands,
            stager: self.stager,
            controller,
        }
    }
}

/// Files a command produces, by name.
pub type Outputs = Vec<(&'static str, String)>;

fn load_rr(path: &Path, cfg: &FileConfig) -> Result<RRSeries> {
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let series = parse_rr(&text).with_context(|| format!("in {}", path.display()))?;
    let filtered = filter_artifacts(&series, &cfg.ingest)?;
    if filtered.replaced > 0 {
        eprintln!(
            "note: replaced {} of {} beats as artifacts",
            filtered.replaced,
            series.len()
        );
    }
    Ok(filtered.series)
}

fn analyze(series: &RRSeries, cfg: &FileConfig) -> Result<Vec<SpectralWindow>> {
    Ok(spectral::windowize(series, &cfg.spectral, &cfg.bands)?)
}

fn detect(windows: &[SpectralWindow], cfg: &FileConfig) -> Result<Hypnogram> {
    let smoothed = smooth_windows(windows, &cfg.stager)?;
    Ok(classify(&smoothed, &cfg.stager)?)
}

pub fn cmd_analyze(input: &Path, cfg: &FileConfig) -> Result<Outputs> {
    let series = load_rr(input, cfg)?;
    let windows = analyze(&series, cfg)?;
    Ok(vec![("windows.csv", io::windows_csv(&windows))])
}

pub fn cmd_stage(input: &Path, cfg: &FileConfig) -> Result<Outputs> {
    let series = load_rr(input, cfg)?;
    let detected = detect(&analyze(&series, cfg)?, cfg)?;
    Ok(vec![
        ("detected.csv", io::hypnogram_csv(&detected)),
        (
            "percentages.json",
            io::percentages_json(&stage_percentages(&detected)?),
        ),
    ])
}

pub fn cmd_control(input: &Path, cfg: &FileConfig, baseline_ta: Option<f64>) -> Result<Outputs> {
    let ctl = cfg.controller(baseline_ta)?;
    if (ctl.tick - cfg.spectral.window_stride).abs() > 1e-9 {
        bail!(
            "controller tick ({} s) must equal the window stride ({} s)",
            ctl.tick,
            cfg.spectral.window_stride
        );
    }
    let series = load_rr(input, cfg)?;
    let detected = detect(&analyze(&series, cfg)?, cfg)?;
    let profile = controller::run(detected.stages(), &ctl)?;
    Ok(vec![("profile.csv", io::profile_csv(&profile))])
}

/// Returns the session files and the epoch accuracy.
pub fn cmd_simulate(
    cfg: &FileConfig,
    seed: Option<u64>,
    baseline_ta: Option<f64>,
) -> Result<(Outputs, f64)> {
    let ctl = cfg.controller(baseline_ta)?;
    let mut sim = cfg.sim;
    if let Some(seed) = seed {
        sim.seed = seed;
    }
    let session = closed_loop_run(&sim, &cfg.pipeline(ctl))?;
    let summary = ReportSummary {
        seed: sim.seed,
        epoch_accuracy: session.epoch_accuracy,
        stage_percentages: session.stage_percentages.clone(),
    };
    let report = serde_json::to_string_pretty(&summary)? + "\n";
    Ok((
        vec![
            ("rr.csv", session.rr.to_csv()),
            ("windows.csv", io::windows_csv(&session.windows)),
            ("truth.csv", io::hypnogram_csv(&session.truth)),
            ("detected.csv", io::hypnogram_csv(&session.detected)),
            ("profile.csv", io::profile_csv(&session.profile)),
            ("report.json", report),
        ],
        session.epoch_accuracy,
    ))
}

fn read_required(dir: &Path, name: &str) -> Result<String> {
    let path = dir.join(name);
    fs::read_to_string(&path).map_err(|e| anyhow!("cannot read {name} in {}: {e}", dir.display()))
}

/// Stage percentages of a session, from `percentages.json` or `report.json`.
pub fn session_percentages(dir: &Path) -> Result<BTreeMap<SleepStage, f64>> {
    if dir.join("percentages.json").exists() {
        let text = read_required(dir, "percentages.json")?;
        return serde_json::from_str(&text).context("invalid percentages.json");
    }
    if dir.join("report.json").exists() {
        let text = read_required(dir, "report.json")?;
        let summary: ReportSummary = serde_json::from_str(&text).context("invalid report.json")?;
        return Ok(summary.stage_percentages);
    }
    bail!(
        "missing percentages.json (or report.json) in {}",
        dir.display()
    )
}

pub fn cmd_report(dir: &Path) -> Result<String> {
    if !dir.is_dir() {
        bail!("session directory {} does not exist", dir.display());
    }
    let profile_text = read_required(dir, "profile.csv")?;
    let profile = io::parse_profile_csv(&profile_text).context("invalid profile.csv")?;
    let percentages = session_percentages(dir)?;

    let mut out = String::new();
    out.push_str("stage  percent\n");
    for stage in SleepStage::ALL {
        let p = percentages.get(&stage).copied().unwrap_or(0.0);
        out.push_str(&format!("{:<6} {p}\n", stage.label()));
    }
    match (profile.min(), profile.max(), profile.last()) {
        (Some((_, min)), Some(max), Some(last)) => out.push_str(&format!(
            "temperature_c  min {min:.2}  max {max:.2}  final {last:.2}\n"
        )),
        _ => out.push_str("temperature_c  (empty profile)\n"),
    }
    if dir.join("report.json").exists() {
        let summary: ReportSummary = serde_json::from_str(&read_required(dir, "report.json")?)
            .context("invalid report.json")?;
        out.push_str(&format!("epoch_accuracy {:.4}\n", summary.epoch_accuracy));
    }
    Ok(out)
}

/// Writes every output through a temporary file. Nothing is written unless
/// the directory can be created.
pub fn write_outputs(dir: &Path, outputs: &Outputs) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let mut staged: Vec<(PathBuf, PathBuf)> = Vec::with_capacity(outputs.len());
    for (name, contents) in outputs {
        let tmp = dir.join(format!(".{name}.tmp"));
        if let Err(e) = fs::write(&tmp, contents) {
            for (t, _) in &staged {
                let _ = fs::remove_file(t);
            }
            let _ = fs::remove_file(&tmp);
            return Err(e).with_context(|| format!("cannot write {}", tmp.display()));
        }
        staged.push((tmp, dir.join(name)));
    }
    for (tmp, dest) in staged {
        fs::rename(&tmp, &dest).with_context(|| format!("cannot write {}", dest.display()))?;
    }
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Analyze(a) => {
            let cfg = FileConfig::load(a.config.as_deref())?;
            write_outputs(&a.out, &cmd_analyze(&a.input, &cfg)?)
        }
        Command::Stage(a) => {
            let cfg = FileConfig::load(a.config.as_deref())?;
            write_outputs(&a.out, &cmd_stage(&a.input, &cfg)?)
        }
        Command::Control(a) => {
            let cfg = FileConfig::load(a.config.as_deref())?;
            write_outputs(&a.out, &cmd_control(&a.input, &cfg, a.baseline_ta)?)
        }
        Command::Simulate(a) => {
            let cfg = FileConfig::load(a.config.as_deref())?;
            let (outputs, accuracy) = cmd_simulate(&cfg, a.seed, a.baseline_ta)?;
            write_outputs(&a.out, &outputs)?;
            println!("epoch_accuracy {accuracy:.4}");
            Ok(())
        }
        Command::Report(a) => {
            print!("{}", cmd_report(&a.input)?);
            Ok(())
        }
    }
}
