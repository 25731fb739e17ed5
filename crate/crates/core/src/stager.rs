//! Rule-based sleep staging from smoothed spectral windows.
//!
//! Every epoch starts out as light sleep. An LF/HF ratio below the SWS
//! threshold marks deep sleep, a large swing of the HF peak frequency over the
//! trailing windows marks REM (overriding SWS), and the optional wake rule
//! overrides everything.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{lf_hf_ratio, SpectralWindow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SleepStage {
    Sws,
    Light,
    Rem,
    Wake,
}

impl SleepStage {
    pub const ALL: [SleepStage; 4] = [Self::Sws, Self::Light, Self::Rem, Self::Wake];

    /// Depth code ordered from deepest (1) to awake (4).
    pub fn depth_code(self) -> i32 {
        match self {
            Self::Sws => 1,
            Self::Light => 2,
            Self::Rem => 3,
            Self::Wake => 4,
        }
    }

    pub fn from_depth_code(code: i32) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.depth_code() == code)
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Sws => "SWS",
            Self::Light => "LIGHT",
            Self::Rem => "REM",
            Self::Wake => "WAKE",
        }
    }
}

impl fmt::Display for SleepStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SleepStage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|st| st.label().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown sleep stage {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Epoch {
    pub t_start: f64,
    pub t_end: f64,
    pub stage: SleepStage,
}

impl Epoch {
    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }
}

/// Contiguous, equal-length epochs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Hypnogram {
    epochs: Vec<Epoch>,
}

impl Hypnogram {
    pub fn new(epochs: Vec<Epoch>) -> Result<Self> {
        if let Some(e) = epochs.iter().find(|e| !(e.t_end > e.t_start)) {
            return Err(Error::InvalidArgument(format!(
                "epoch [{}, {}) has no duration",
                e.t_start, e.t_end
            )));
        }
        for pair in epochs.windows(2) {
            if (pair[1].t_start - pair[0].t_end).abs() > 1e-6 {
                return Err(Error::InvalidArgument(format!(
                    "epochs not contiguous at {} s",
                    pair[0].t_end
                )));
            }
            if (pair[1].duration() - pair[0].duration()).abs() > 1e-6 {
                return Err(Error::InvalidArgument(format!(
                    "epoch at {} s differs in length from its predecessor",
                    pair[1].t_start
                )));
            }
        }
        Ok(Self { epochs })
    }

    /// Equal epochs of `epoch_len` seconds starting at t = 0.
    pub fn from_stages(stages: &[SleepStage], epoch_len: f64) -> Result<Self> {
        Self::new(
            stages
                .iter()
                .enumerate()
                .map(|(i, &stage)| Epoch {
                    t_start: i as f64 * epoch_len,
                    t_end: (i + 1) as f64 * epoch_len,
                    stage,
                })
                .collect(),
        )
    }

    pub fn epochs(&self) -> &[Epoch] {
        &self.epochs
    }

    pub fn stages(&self) -> impl Iterator<Item = SleepStage> + '_ {
        self.epochs.iter().map(|e| e.stage)
    }

    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn t_start(&self) -> f64 {
        self.epochs.first().map_or(0.0, |e| e.t_start)
    }

    pub fn t_end(&self) -> f64 {
        self.epochs.last().map_or(0.0, |e| e.t_end)
    }

    /// Stage at time `t`; times past the end map to the last epoch.
    pub fn stage_at(&self, t: f64) -> Option<SleepStage> {
        let idx = self.epochs.partition_point(|e| e.t_end <= t);
        self.epochs
            .get(idx)
            .or_else(|| self.epochs.last())
            .map(|e| e.stage)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StagerConfig {
    /// LF/HF below this marks SWS.
    pub sws_ratio_threshold: f64,
    /// HF peak-frequency range (Hz) above which REM is marked.
    pub rem_peak_variability_threshold: f64,
    /// Odd smoothing span, in windows; also the trailing span of the REM rule.
    pub smoothing_windows: usize,
    pub wake_detection: bool,
    /// Total LF+HF power percentile above which an epoch is WAKE.
    pub wake_power_percentile: f64,
}

impl Default for StagerConfig {
    fn default() -> Self {
        Self {
            sws_ratio_threshold: 1.0,
            rem_peak_variability_threshold: 0.65,
            smoothing_windows: 3,
            wake_detection: false,
            wake_power_percentile: 90.0,
        }
    }
}

impl StagerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sws_ratio_threshold > 0.0 && self.rem_peak_variability_threshold > 0.0) {
            return Err(Error::InvalidConfig(
                "stager thresholds must be positive".into(),
            ));
        }
        if self.smoothing_windows == 0 || self.smoothing_windows.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "smoothing_windows must be odd and at least 1, got {}",
                self.smoothing_windows
            )));
        }
        if !(self.wake_power_percentile > 0.0 && self.wake_power_percentile <= 100.0) {
            return Err(Error::InvalidConfig(format!(
                "wake_power_percentile must lie in (0, 100], got {}",
                self.wake_power_percentile
            )));
        }
        Ok(())
    }
}

/// Centered moving average of band powers over `smoothing_windows` windows,
/// truncated at the edges. The HF peak is kept from the center window.
pub fn smooth_windows(
    windows: &[SpectralWindow],
    cfg: &StagerConfig,
) -> Result<Vec<SpectralWindow>> {
    cfg.validate()?;
    let span = cfg.smoothing_windows;
    if windows.len() < span {
        return Err(Error::InsufficientData(format!(
            "{} windows cannot be smoothed over {span}",
            windows.len()
        )));
    }
    let half = span / 2;
    Ok(windows
        .iter()
        .enumerate()
        .map(|(i, center)| {
            let group = &windows[i.saturating_sub(half)..(i + half + 1).min(windows.len())];
            let n = group.len() as f64;
            let mean = |f: fn(&SpectralWindow) -> f64| group.iter().map(f).sum::<f64>() / n;
            let lf_power = mean(|w| w.lf_power);
            let hf_power = mean(|w| w.hf_power);
            SpectralWindow {
                vlf_power: mean(|w| w.vlf_power),
                lf_power,
                hf_power,
                lf_hf_ratio: lf_hf_ratio(lf_power, hf_power),
                ..*center
            }
        })
        .collect())
}

/// Linear-interpolation percentile (`p` in percent) of unsorted values.
fn percentile(values: &[f64], p: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    sorted[lo] + (rank - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Labels each window; see the module docs for the rule order.
pub fn classify(windows: &[SpectralWindow], cfg: &StagerConfig) -> Result<Hypnogram> {
    cfg.validate()?;
    if windows.is_empty() {
        return Err(Error::InvalidArgument("no windows to classify".into()));
    }
    let wake_cutoff = cfg.wake_detection.then(|| {
        let totals: Vec<f64> = windows.iter().map(|w| w.lf_power + w.hf_power).collect();
        percentile(&totals, cfg.wake_power_percentile)
    });

    let epochs = windows
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let mut stage = SleepStage::Light;
            if w.lf_hf_ratio < cfg.sws_ratio_threshold {
                stage = SleepStage::Sws;
            }
            let trailing = &windows[(i + 1).saturating_sub(cfg.smoothing_windows)..=i];
            let (lo, hi) = trailing
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), w| {
                    (lo.min(w.hf_peak_freq), hi.max(w.hf_peak_freq))
                });
            if hi - lo > cfg.rem_peak_variability_threshold {
                stage = SleepStage::Rem;
            }
            if wake_cutoff.is_some_and(|cut| w.lf_power + w.hf_power > cut) {
                stage = SleepStage::Wake;
            }
            let t_end = match windows.get(i + 1) {
                Some(next) => next.t_start,
                None if i > 0 => w.t_start + (w.t_start - windows[i - 1].t_start),
                None => w.t_end,
            };
            Epoch {
                t_start: w.t_start,
                t_end,
                stage,
            }
        })
        .collect();
    Hypnogram::new(epochs)
}

/// Percent of total time per stage; every stage is present in the map.
pub fn stage_percentages(h: &Hypnogram) -> Result<BTreeMap<SleepStage, f64>> {
    if h.is_empty() {
        return Err(Error::InvalidArgument("empty hypnogram".into()));
    }
    let total: f64 = h.epochs().iter().map(Epoch::duration).sum();
    let mut out: BTreeMap<SleepStage, f64> = SleepStage::ALL.iter().map(|s| (*s, 0.0)).collect();
    for e in h.epochs() {
        *out.get_mut(&e.stage).expect("all stages present") += e.duration();
    }
    out.values_mut().for_each(|v| *v = *v / total * 100.0);
    Ok(out)
}
