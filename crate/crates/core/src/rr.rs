//! RR interval ingestion: parsing, validation and ectopic/artifact repair.
//!
//! Input is line-oriented text holding one RR value per line. `#` starts a
//! comment line and blank lines are skipped. Two-column `t,rr` rows (as
//! written by [`RRSeries::to_csv`]) are accepted too; only the last column is
//! read. Values are taken as seconds when the median is below 10 and as
//! milliseconds otherwise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Medians at or above this are treated as milliseconds.
const MILLISECOND_MEDIAN_CUTOFF: f64 = 10.0;

/// Fraction of replaced beats above which a recording is rejected.
pub const MAX_REPLACED_FRACTION: f64 = 0.2;

/// A timestamped tachogram. `timestamps[i]` is the time (s, from recording
/// start) at which beat `i` closes, i.e. the running sum of `intervals[..=i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RRSeries {
    intervals: Vec<f64>,
    timestamps: Vec<f64>,
    subject_id: String,
}

impl RRSeries {
    /// Builds a series from intervals in seconds.
    pub fn from_intervals(intervals: Vec<f64>, subject_id: impl Into<String>) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::EmptyRecording);
        }
        if let Some((i, &v)) = intervals
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::InvalidSeries(format!(
                "interval {i} is {v}, expected a positive finite value"
            )));
        }
        let timestamps = cumulative_sum(&intervals);
        Ok(Self {
            intervals,
            timestamps,
            subject_id: subject_id.into(),
        })
    }

    pub fn intervals(&self) -> &[f64] {
        &self.intervals
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }

    pub fn with_subject(mut self, subject_id: impl Into<String>) -> Self {
        self.subject_id = subject_id.into();
        self
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Time of the last beat, i.e. the span covered from recording start.
    pub fn duration(&self) -> f64 {
        self.timestamps.last().copied().unwrap_or(0.0)
    }

    /// Canonical CSV form: header `t_s,rr_s`, one row per beat, 6 decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(24 * (self.len() + 1));
        out.push_str("t_s,rr_s\n");
        for (t, rr) in self.timestamps.iter().zip(&self.intervals) {
            out.push_str(&format!("{t:.6},{rr:.6}\n"));
        }
        out
    }
}

fn cumulative_sum(values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .scan(0.0, |acc, v| {
            *acc += v;
            Some(*acc)
        })
        .collect()
}

/// Parses RR text into a series. See the module docs for the accepted format.
pub fn parse_rr(text: &str) -> Result<RRSeries> {
    let mut values = Vec::new();
    let mut lines = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let token = line.rsplit(',').next().unwrap_or(line).trim();
        match token.parse::<f64>() {
            Ok(v) if v.is_finite() => {
                values.push(v);
                lines.push(line_no);
            }
            // A non-numeric first data row is the CSV header.
            Err(_) if values.is_empty() && line.contains(',') && is_header(line) => continue,
            _ => {
                return Err(Error::Parse {
                    line: line_no,
                    token: token.to_string(),
                })
            }
        }
    }
    if values.is_empty() {
        return Err(Error::EmptyRecording);
    }
    if let Some((v, &line)) = values.iter().zip(&lines).find(|(v, _)| **v <= 0.0) {
        return Err(Error::NonPositiveInterval { line, value: *v });
    }
    if median(&values) >= MILLISECOND_MEDIAN_CUTOFF {
        values.iter_mut().for_each(|v| *v /= 1000.0);
    }
    RRSeries::from_intervals(values, "")
}

fn is_header(line: &str) -> bool {
    line.split(',')
        .all(|field| field.trim().parse::<f64>().is_err())
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Limits used to flag physiologically implausible beats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestConfig {
    /// Shortest plausible interval, seconds.
    pub min_rr: f64,
    /// Longest plausible interval, seconds.
    pub max_rr: f64,
    /// Largest allowed change relative to the previous accepted beat.
    pub max_relative_jump: f64,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            min_rr: 0.3,
            max_rr: 2.0,
            max_relative_jump: 0.2,
        }
    }
}

impl IngestConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_rr > 0.0 && self.min_rr < self.max_rr) {
            return Err(Error::InvalidConfig(format!(
                "need 0 < min_rr < max_rr, got {} and {}",
                self.min_rr, self.max_rr
            )));
        }
        if !(self.max_relative_jump > 0.0 && self.max_relative_jump < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "max_relative_jump must lie in (0, 1), got {}",
                self.max_relative_jump
            )));
        }
        Ok(())
    }
}

/// A repaired series together with how many beats were replaced.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome {
    pub series: RRSeries,
    pub replaced: usize,
}

/// Replaces implausible beats by linear interpolation of the nearest accepted
/// neighbours and rejects the recording when more than 20% of beats needed it.
pub fn filter_artifacts(series: &RRSeries, cfg: &IngestConfig) -> Result<FilterOutcome> {
    let outcome = replace_artifacts(series, cfg)?;
    let total = series.len();
    if outcome.replaced as f64 > MAX_REPLACED_FRACTION * total as f64 {
        return Err(Error::DataQuality {
            replaced: outcome.replaced,
            total,
        });
    }
    Ok(outcome)
}

/// The repair step of [`filter_artifacts`] without the data-quality gate.
pub fn replace_artifacts(series: &RRSeries, cfg: &IngestConfig) -> Result<FilterOutcome> {
    cfg.validate()?;
    let rr = series.intervals();
    let mut accepted = vec![false; rr.len()];
    let mut last_good: Option<f64> = None;
    for (i, &v) in rr.iter().enumerate() {
        let in_range = v >= cfg.min_rr && v <= cfg.max_rr;
        let smooth = last_good.is_none_or(|prev| (v - prev).abs() <= cfg.max_relative_jump * prev);
        if in_range && smooth {
            accepted[i] = true;
            last_good = Some(v);
        }
    }

    let replaced = accepted.iter().filter(|ok| !**ok).count();
    if replaced == 0 {
        return Ok(FilterOutcome {
            series: series.clone(),
            replaced,
        });
    }
    if replaced == rr.len() {
        return Err(Error::DataQuality {
            replaced,
            total: rr.len(),
        });
    }

    let mut repaired = rr.to_vec();
    let mut prev_good: Option<usize> = None;
    let mut i = 0;
    while i < rr.len() {
        if accepted[i] {
            prev_good = Some(i);
            i += 1;
            continue;
        }
        let run_end = (i..rr.len()).find(|&j| accepted[j]);
        match (prev_good, run_end) {
            (Some(a), Some(b)) => {
                let span = (b - a) as f64;
                for (j, slot) in repaired.iter_mut().enumerate().take(b).skip(i) {
                    let w = (j - a) as f64 / span;
                    *slot = rr[a] + w * (rr[b] - rr[a]);
                }
            }
            (Some(a), None) => repaired[i..].iter_mut().for_each(|v| *v = rr[a]),
            (None, Some(b)) => repaired[i..b].iter_mut().for_each(|v| *v = rr[b]),
            (None, None) => unreachable!("at least one beat is accepted"),
        }
        i = run_end.unwrap_or(rr.len());
    }

    Ok(FilterOutcome {
        series: RRSeries::from_intervals(repaired, series.subject_id())?,
        replaced,
    })
}
