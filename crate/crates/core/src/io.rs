//! Plot-ready CSV and JSON forms of the pipeline outputs.
//!
//! All CSVs carry a header row, use `.` as the decimal separator and end
//! every row with a newline.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::controller::{DfaState, ProfilePoint, TemperatureProfile};
use crate::error::{Error, Result};
use crate::spectral::SpectralWindow;
use crate::stager::{Epoch, Hypnogram, SleepStage};

pub const WINDOWS_HEADER: &str = "t_start_s,t_end_s,vlf,lf,hf,lf_hf,hf_peak_hz,hf_peak_psd";
pub const HYPNOGRAM_HEADER: &str = "t_start_s,t_end_s,stage,depth_code";
pub const PROFILE_HEADER: &str = "t_s,ta_c,dfa,stage";

pub fn windows_csv(windows: &[SpectralWindow]) -> String {
    let mut out = format!("{WINDOWS_HEADER}\n");
    for w in windows {
        out.push_str(&format!(
            "{:.3},{:.3},{:e},{:e},{:e},{:.6},{:.6},{:e}\n",
            w.t_start,
            w.t_end,
            w.vlf_power,
            w.lf_power,
            w.hf_power,
            w.lf_hf_ratio,
            w.hf_peak_freq,
            w.hf_peak_power
        ));
    }
    out
}

pub fn hypnogram_csv(h: &Hypnogram) -> String {
    let mut out = format!("{HYPNOGRAM_HEADER}\n");
    for e in h.epochs() {
        out.push_str(&format!(
            "{:.3},{:.3},{},{}\n",
            e.t_start,
            e.t_end,
            e.stage,
            e.stage.depth_code()
        ));
    }
    out
}

pub fn profile_csv(p: &TemperatureProfile) -> String {
    let mut out = format!("{PROFILE_HEADER}\n");
    for pt in &p.points {
        out.push_str(&format!(
            "{:.3},{:.4},{},{}\n",
            pt.t, pt.ta, pt.dfa, pt.stage
        ));
    }
    out
}

/// Data rows of a CSV with the expected header, as (line number, fields).
fn rows<'a>(
    text: &'a str,
    header: &str,
) -> Result<impl Iterator<Item = (usize, Vec<&'a str>)> + 'a> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == header => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                token: format!("expected header {header:?}"),
            })
        }
    }
    Ok(lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(move |(i, l)| {
            let fields: Vec<&str> = l.split(',').map(str::trim).collect();
            (i + 1, fields)
        }))
}

fn field<T: std::str::FromStr>(fields: &[&str], idx: usize, line: usize) -> Result<T> {
    let raw = fields.get(idx).copied().unwrap_or("");
    raw.parse().map_err(|_| Error::Parse {
        line,
        token: raw.to_string(),
    })
}

pub fn parse_hypnogram_csv(text: &str) -> Result<Hypnogram> {
    let epochs = rows(text, HYPNOGRAM_HEADER)?
        .map(|(line, f)| {
            let stage: SleepStage =
                f.get(2)
                    .copied()
                    .unwrap_or("")
                    .parse()
                    .map_err(|_| Error::Parse {
                        line,
                        token: f.get(2).copied().unwrap_or("").to_string(),
                    })?;
            Ok(Epoch {
                t_start: field(&f, 0, line)?,
                t_end: field(&f, 1, line)?,
                stage,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Hypnogram::new(epochs)
}

pub fn parse_profile_csv(text: &str) -> Result<TemperatureProfile> {
    let points = rows(text, PROFILE_HEADER)?
        .map(|(line, f)| {
            let bad = |i: usize| Error::Parse {
                line,
                token: f.get(i).copied().unwrap_or("").to_string(),
            };
            let dfa: DfaState = f
                .get(2)
                .copied()
                .unwrap_or("")
                .parse()
                .map_err(|_| bad(2))?;
            let stage: SleepStage = f
                .get(3)
                .copied()
                .unwrap_or("")
                .parse()
                .map_err(|_| bad(3))?;
            Ok(ProfilePoint {
                t: field(&f, 0, line)?,
                ta: field(&f, 1, line)?,
                dfa,
                stage,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TemperatureProfile { points })
}

/// Stage percentages as a JSON object keyed by stage label.
pub fn percentages_json(p: &BTreeMap<SleepStage, f64>) -> String {
    serde_json::to_string_pretty(p).expect("string keys and finite numbers") + "\n"
}

/// Contents of `report.json` for a simulated session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub seed: u64,
    pub epoch_accuracy: f64,
    pub stage_percentages: BTreeMap<SleepStage, f64>,
}
