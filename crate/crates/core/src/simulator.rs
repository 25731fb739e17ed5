//! Seeded night simulator: ground-truth hypnograms, stage-conditioned RR
//! series, and the end-to-end session used to check the pipeline.
//!
//! The RR model is a two-tone sinusoid plus white noise,
//!
//! ```text
//! RR(t) = base_rr + lf_amp(stage) sin(2π lf_freq t + φ_lf)
//!                 + hf_amp(stage) sin(θ_hf(t)) + noise
//! ```
//!
//! where `θ_hf` advances at `hf_freq`, except in REM blocks where each 5-min
//! block redraws its frequency from `[hf_freq, hf_freq + rem_peak_wander]`.
//! The phase is accumulated so it stays continuous across redraws.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::controller::{self, ControllerConfig, TemperatureProfile};
use crate::error::{Error, Result};
use crate::rr::RRSeries;
use crate::spectral::{windowize, FrequencyBands, SpectralConfig, SpectralWindow};
use crate::stager::{self, classify, smooth_windows, Epoch, Hypnogram, SleepStage, StagerConfig};

/// Ground-truth epoch length and REM redraw block, seconds.
pub const EPOCH_SECONDS: f64 = 300.0;

// Stage shares of a cycle, first cycle to last.
const SWS_SHARE_FIRST: f64 = 0.35;
const SWS_SHARE_LAST: f64 = 0.05;
const REM_SHARE_FIRST: f64 = 0.10;
const REM_SHARE_LAST: f64 = 0.35;

// Independent RNG streams derived from one seed.
const STREAM_CYCLES: u64 = 1;
const STREAM_RR: u64 = 2;

/// LF and HF tone amplitudes (seconds) for one stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToneAmplitudes {
    pub lf: f64,
    pub hf: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StageAmplitudes {
    pub sws: ToneAmplitudes,
    pub light: ToneAmplitudes,
    pub rem: ToneAmplitudes,
    pub wake: ToneAmplitudes,
}

impl Default for StageAmplitudes {
    fn default() -> Self {
        Self {
            sws: ToneAmplitudes { lf: 0.01, hf: 0.03 },
            light: ToneAmplitudes {
                lf: 0.025,
                hf: 0.015,
            },
            rem: ToneAmplitudes {
                lf: 0.035,
                hf: 0.015,
            },
            wake: ToneAmplitudes { lf: 0.04, hf: 0.03 },
        }
    }
}

impl StageAmplitudes {
    pub fn get(&self, stage: SleepStage) -> ToneAmplitudes {
        match stage {
            SleepStage::Sws => self.sws,
            SleepStage::Light => self.light,
            SleepStage::Rem => self.rem,
            SleepStage::Wake => self.wake,
        }
    }

    fn all(&self) -> [ToneAmplitudes; 4] {
        [self.sws, self.light, self.rem, self.wake]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub seed: u64,
    /// Night length, hours.
    pub duration: f64,
    /// Mean sleep-cycle length, minutes.
    pub cycle_mean: f64,
    /// Cycle-length standard deviation, minutes.
    pub cycle_sd: f64,
    /// Mean RR interval, seconds.
    pub base_rr: f64,
    pub lf_freq: f64,
    pub hf_freq: f64,
    pub stage_amp: StageAmplitudes,
    /// Width (Hz) of the REM HF-frequency redraw range.
    pub rem_peak_wander: f64,
    /// Beat-to-beat white noise, seconds.
    pub noise_sd: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            duration: 8.0,
            cycle_mean: 90.0,
            cycle_sd: 20.0,
            base_rr: 0.9,
            lf_freq: 0.10,
            hf_freq: 0.25,
            stage_amp: StageAmplitudes::default(),
            rem_peak_wander: 0.8,
            noise_sd: 0.005,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let amps_ok = self.stage_amp.all().iter().all(|a| {
            a.lf >= 0.0 && a.hf >= 0.0 && a.lf < self.base_rr / 4.0 && a.hf < self.base_rr / 4.0
        });
        let checks = [
            (self.duration > 0.0, "duration must be positive"),
            (self.base_rr > 0.0, "base_rr must be positive"),
            (amps_ok, "stage amplitudes must lie in [0, base_rr / 4)"),
            (
                self.cycle_sd >= 0.0 && self.cycle_mean - 3.0 * self.cycle_sd > 0.0,
                "cycle_mean - 3 * cycle_sd must be positive",
            ),
            (
                self.lf_freq > 0.0 && self.hf_freq > 0.0 && self.rem_peak_wander >= 0.0,
                "tone frequencies must be positive",
            ),
            (self.noise_sd >= 0.0, "noise_sd must be non-negative"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(Error::InvalidConfig(format!("{msg}: {self:?}"))),
            None => Ok(()),
        }
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

/// Planned stage layout of one sleep cycle, in seconds from night start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CyclePlan {
    pub start: f64,
    pub end: f64,
    pub sws_share: f64,
    pub rem_share: f64,
}

impl CyclePlan {
    /// Boundaries LIGHT | SWS | LIGHT | REM within the cycle.
    fn segments(&self) -> [(f64, SleepStage); 4] {
        let len = self.end - self.start;
        let light_half = 0.5 * (1.0 - self.sws_share - self.rem_share) * len;
        let sws = self.sws_share * len;
        let a = self.start + light_half;
        let b = a + sws;
        let c = b + light_half;
        [
            (a, SleepStage::Light),
            (b, SleepStage::Sws),
            (c, SleepStage::Light),
            (self.end, SleepStage::Rem),
        ]
    }

    fn stage_at(&self, t: f64) -> SleepStage {
        self.segments()
            .into_iter()
            .find(|(end, _)| t < *end)
            .map_or(SleepStage::Rem, |(_, s)| s)
    }
}

/// Draws cycle lengths until the night is covered. The last cycle may be
/// cut short by the end of the night; it keeps its planned stage shares.
pub fn plan_cycles(cfg: &SimConfig) -> Result<Vec<CyclePlan>> {
    cfg.validate()?;
    let night = cfg.duration * 3600.0;
    let mut rng = cfg.rng(STREAM_CYCLES);
    let lo = cfg.cycle_mean - 2.0 * cfg.cycle_sd;
    let hi = cfg.cycle_mean + 2.0 * cfg.cycle_sd;
    let dist = Normal::new(cfg.cycle_mean, cfg.cycle_sd)
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;

    let mut bounds = Vec::new();
    let mut t = 0.0;
    while t < night {
        let minutes: f64 = dist.sample(&mut rng);
        let len = minutes.clamp(lo, hi) * 60.0;
        bounds.push((t, t + len));
        t += len;
    }
    let k = bounds.len();
    Ok(bounds
        .into_iter()
        .enumerate()
        .map(|(i, (start, end))| {
            let p = if k > 1 {
                i as f64 / (k - 1) as f64
            } else {
                0.0
            };
            CyclePlan {
                start,
                end,
                sws_share: SWS_SHARE_FIRST + p * (SWS_SHARE_LAST - SWS_SHARE_FIRST),
                rem_share: REM_SHARE_FIRST + p * (REM_SHARE_LAST - REM_SHARE_FIRST),
            }
        })
        .collect())
}

/// Ground-truth hypnogram in 5-minute epochs; each epoch takes the planned
/// stage at its midpoint.
pub fn gen_hypnogram(cfg: &SimConfig) -> Result<Hypnogram> {
    let cycles = plan_cycles(cfg)?;
    let n = ((cfg.duration * 3600.0) / EPOCH_SECONDS).floor().max(1.0) as usize;
    let epochs = (0..n)
        .map(|e| {
            let t_start = e as f64 * EPOCH_SECONDS;
            let mid = t_start + EPOCH_SECONDS / 2.0;
            let cycle = cycles
                .iter()
                .find(|c| mid < c.end)
                .unwrap_or_else(|| cycles.last().expect("at least one cycle"));
            Epoch {
                t_start,
                t_end: t_start + EPOCH_SECONDS,
                stage: cycle.stage_at(mid),
            }
        })
        .collect();
    Hypnogram::new(epochs)
}

/// Synthesizes beats following `truth` until its last epoch ends.
pub fn gen_rr(truth: &Hypnogram, cfg: &SimConfig) -> Result<RRSeries> {
    cfg.validate()?;
    if truth.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot synthesize an empty night".into(),
        ));
    }
    let mut rng = cfg.rng(STREAM_RR);
    let lf_phase = rng.random::<f64>() * 2.0 * PI;
    let hf_phase0 = rng.random::<f64>() * 2.0 * PI;

    // Per-block HF frequency and the HF phase at each block start.
    let end = truth.t_end();
    let blocks = (end / EPOCH_SECONDS).ceil() as usize + 1;
    let mut block_freq = Vec::with_capacity(blocks);
    let mut block_phase = Vec::with_capacity(blocks);
    let mut phase = hf_phase0;
    for b in 0..blocks {
        let mid = (b as f64 + 0.5) * EPOCH_SECONDS;
        let wander = rng.random::<f64>();
        let f = match truth.stage_at(mid) {
            Some(SleepStage::Rem) => cfg.hf_freq + wander * cfg.rem_peak_wander,
            _ => cfg.hf_freq,
        };
        block_freq.push(f);
        block_phase.push(phase);
        phase += 2.0 * PI * f * EPOCH_SECONDS;
    }
    let hf_theta = |t: f64| {
        let b = ((t / EPOCH_SECONDS).floor() as usize).min(blocks - 1);
        block_phase[b] + 2.0 * PI * block_freq[b] * (t - b as f64 * EPOCH_SECONDS)
    };

    let noise = Normal::new(0.0, cfg.noise_sd).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut t = 0.0;
    let mut intervals = Vec::with_capacity((end / cfg.base_rr * 1.1) as usize);
    while t < end {
        let stage = truth.stage_at(t).expect("non-empty hypnogram");
        let amp = cfg.stage_amp.get(stage);
        let rr = cfg.base_rr
            + amp.lf * (2.0 * PI * cfg.lf_freq * t + lf_phase).sin()
            + amp.hf * hf_theta(t).sin()
            + noise.sample(&mut rng);
        intervals.push(rr);
        t += rr;
    }
    RRSeries::from_intervals(intervals, format!("sim-{}", cfg.seed))
}

/// Everything produced by one simulated night.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub rr: RRSeries,
    pub truth: Hypnogram,
    pub detected: Hypnogram,
    pub windows: Vec<SpectralWindow>,
    pub profile: TemperatureProfile,
    pub epoch_accuracy: f64,
    pub stage_percentages: BTreeMap<SleepStage, f64>,
}

/// Fraction of detected epochs whose stage matches the truth at the epoch
/// midpoint.
pub fn epoch_accuracy(truth: &Hypnogram, detected: &Hypnogram) -> f64 {
    if detected.is_empty() {
        return 0.0;
    }
    let hits = detected
        .epochs()
        .iter()
        .filter(|e| truth.stage_at(0.5 * (e.t_start + e.t_end)) == Some(e.stage))
        .count();
    hits as f64 / detected.len() as f64
}

/// Configuration bundle for the full pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub spectral: SpectralConfig,
    pub bands: FrequencyBands,
    pub stager: StagerConfig,
    pub controller: ControllerConfig,
}

impl PipelineConfig {
    pub fn with_baseline(baseline_ta: f64) -> Self {
        Self {
            spectral: SpectralConfig::default(),
            bands: FrequencyBands::default(),
            stager: StagerConfig::default(),
            controller: ControllerConfig::new(baseline_ta),
        }
    }
}

/// Runs the simulator through analysis, staging and control.
pub fn closed_loop_run(sim: &SimConfig, pipeline: &PipelineConfig) -> Result<SessionReport> {
    if (pipeline.controller.tick - pipeline.spectral.window_stride).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!(
            "controller tick {} s must equal the window stride {} s",
            pipeline.controller.tick, pipeline.spectral.window_stride
        )));
    }
    let truth = gen_hypnogram(sim)?;
    let rr = gen_rr(&truth, sim)?;
    let windows = windowize(&rr, &pipeline.spectral, &pipeline.bands)?;
    let smoothed = smooth_windows(&windows, &pipeline.stager)?;
    let detected = classify(&smoothed, &pipeline.stager)?;
    let profile = controller::run(detected.stages(), &pipeline.controller)?;
    Ok(SessionReport {
        epoch_accuracy: epoch_accuracy(&truth, &detected),
        stage_percentages: stager::stage_percentages(&detected)?,
        rr,
        truth,
        detected,
        windows,
        profile,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rr::{filter_artifacts, IngestConfig};

    #[test]
    fn default_night_has_four_to_six_cycles() {
        let cycles = plan_cycles(&SimConfig::default()).unwrap();
        assert!((4..=6).contains(&cycles.len()), "{}", cycles.len());
        assert!(cycles.windows(2).all(|w| w[0].end == w[1].start));
        for c in &cycles {
            let minutes = (c.end - c.start) / 60.0;
            assert!((50.0..=130.0).contains(&minutes));
        }
    }

    #[test]
    fn cycle_shares_follow_linear_trend() {
        let cycles = plan_cycles(&SimConfig::default()).unwrap();
        let first = cycles.first().unwrap();
        let last = cycles.last().unwrap();
        assert_eq!((first.sws_share, first.rem_share), (0.35, 0.10));
        assert!((last.sws_share - 0.05).abs() < 1e-12);
        assert!((last.rem_share - 0.35).abs() < 1e-12);
    }

    #[test]
    fn cycle_stage_order() {
        let c = CyclePlan {
            start: 0.0,
            end: 100.0,
            sws_share: 0.2,
            rem_share: 0.2,
        };
        use SleepStage::*;
        let got: Vec<_> = [1.0, 29.0, 31.0, 49.0, 51.0, 79.0, 81.0, 99.0]
            .iter()
            .map(|t| c.stage_at(*t))
            .collect();
        assert_eq!(got, [Light, Light, Sws, Sws, Light, Light, Rem, Rem]);
    }

    #[test]
    fn hypnogram_is_deterministic_and_mostly_light() {
        let cfg = SimConfig::default();
        let a = gen_hypnogram(&cfg).unwrap();
        assert_eq!(a, gen_hypnogram(&cfg).unwrap());
        assert_eq!(a.len(), 96);
        let p = stager::stage_percentages(&a).unwrap();
        assert!(p[&SleepStage::Light] > 50.0, "{p:?}");
        assert_eq!(p[&SleepStage::Wake], 0.0);
        let other = gen_hypnogram(&SimConfig { seed: 7, ..cfg }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn short_night_is_one_truncated_cycle() {
        let cfg = SimConfig {
            duration: 0.5,
            ..Default::default()
        };
        assert_eq!(plan_cycles(&cfg).unwrap().len(), 1);
        let h = gen_hypnogram(&cfg).unwrap();
        assert_eq!(h.len(), 6);
    }

    #[test]
    fn rr_covers_the_night_and_stays_bounded() {
        let cfg = SimConfig::default();
        let truth = gen_hypnogram(&cfg).unwrap();
        let rr = gen_rr(&truth, &cfg).unwrap();
        assert!(rr.duration() >= truth.t_end());
        assert!(rr.duration() < truth.t_end() + 2.0);
        let a = cfg.stage_amp;
        let widest = a.all().iter().map(|t| t.lf + t.hf).fold(0.0, f64::max);
        let bound = 4.0 * (widest + 3.0 * cfg.noise_sd);
        assert!(rr
            .intervals()
            .iter()
            .all(|v| (v - cfg.base_rr).abs() <= bound));
        assert_eq!(rr, gen_rr(&truth, &cfg).unwrap());
    }

    #[test]
    fn generated_rr_needs_no_repair() {
        for seed in 0..5 {
            let cfg = SimConfig {
                seed,
                ..Default::default()
            };
            let rr = gen_rr(&gen_hypnogram(&cfg).unwrap(), &cfg).unwrap();
            let out = filter_artifacts(&rr, &IngestConfig::default()).unwrap();
            assert_eq!(out.replaced, 0, "seed {seed}");
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        let big = SimConfig {
            stage_amp: StageAmplitudes {
                wake: ToneAmplitudes { lf: 0.3, hf: 0.0 },
                ..Default::default()
            },
            ..Default::default()
        };
        assert!(big.validate().is_err());
        let wide = SimConfig {
            cycle_sd: 40.0,
            ..Default::default()
        };
        assert!(wide.validate().is_err());
    }

    #[test]
    fn accuracy_counts_midpoint_matches() {
        use SleepStage::*;
        let truth = Hypnogram::from_stages(&[Light, Sws, Sws, Rem], 300.0).unwrap();
        let det = Hypnogram::from_stages(&[Light, Sws, Light, Light], 300.0).unwrap();
        assert_eq!(epoch_accuracy(&truth, &det), 0.5);
    }

    #[test]
    fn tick_must_match_stride() {
        let mut p = PipelineConfig::with_baseline(24.0);
        p.controller.tick = 60.0;
        assert!(closed_loop_run(&SimConfig::default(), &p).is_err());
    }
}
