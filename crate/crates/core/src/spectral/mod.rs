//! Frequency-domain HRV: resampling the tachogram onto a uniform grid, a
//! Hann-tapered periodogram per window, and VLF/LF/HF band summaries.
//!
//! # PSD normalization
//!
//! For a detrended window `x` of `N` samples at `fs` Hz and taper `w`, the
//! one-sided density is
//!
//! ```text
//! P[k] = c[k] * |FFT(x * w)[k]|^2 / (fs * sum(w^2)),   c = 1 at DC/Nyquist, else 2
//! ```
//!
//! so that `sum(P) * fs / N == sum((x * w)^2) / sum(w^2)`, which is the
//! variance of `x` for an untapered window and its taper-weighted estimate
//! otherwise. Band powers integrate the piecewise-linear PSD, so adjacent
//! bands add up exactly to the band spanning both.

mod spline;

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rr::RRSeries;

pub use spline::CubicSpline;

/// Slack for floating comparisons on time and frequency axes.
const AXIS_EPS: f64 = 1e-9;

/// A half-open frequency band in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub low: f64,
    pub high: f64,
}

impl Band {
    pub const fn new(low: f64, high: f64) -> Self {
        Self { low, high }
    }
}

/// HRV band edges and the upper limit for the HF peak search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrequencyBands {
    pub vlf: Band,
    pub lf: Band,
    pub hf: Band,
    /// The HF peak is searched over `[hf.low, hf_peak_search_upper]`.
    pub hf_peak_search_upper: f64,
}

impl Default for FrequencyBands {
    fn default() -> Self {
        Self {
            vlf: Band::new(0.0, 0.04),
            lf: Band::new(0.04, 0.15),
            hf: Band::new(0.15, 0.40),
            hf_peak_search_upper: 1.0,
        }
    }
}

impl FrequencyBands {
    pub fn validate(&self, resample_rate: f64) -> Result<()> {
        let ok = self.vlf.low == 0.0
            && self.vlf.high == self.lf.low
            && self.lf.high == self.hf.low
            && self.vlf.low < self.vlf.high
            && self.lf.low < self.lf.high
            && self.hf.low < self.hf.high
            && self.hf.high <= self.hf_peak_search_upper
            && self.hf_peak_search_upper < resample_rate / 2.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "bands must be contiguous from 0 Hz with hf.high <= peak search upper < Nyquist: {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpectralConfig {
    /// Analysis window length, seconds.
    pub window_len: f64,
    /// Distance between window starts, seconds.
    pub window_stride: f64,
    /// Uniform resampling rate, Hz.
    pub resample_rate: f64,
    /// Apply a Hann taper before the FFT.
    pub taper: bool,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            window_len: 300.0,
            window_stride: 300.0,
            resample_rate: 4.0,
            taper: true,
        }
    }
}

impl SpectralConfig {
    pub fn validate(&self, bands: &FrequencyBands) -> Result<()> {
        if !(self.window_len >= 60.0) {
            return Err(Error::InvalidConfig(format!(
                "window_len must be at least 60 s, got {}",
                self.window_len
            )));
        }
        if !(self.window_stride > 0.0 && self.window_stride <= self.window_len) {
            return Err(Error::InvalidConfig(format!(
                "window_stride must lie in (0, window_len], got {}",
                self.window_stride
            )));
        }
        if !(self.resample_rate >= 2.0 * bands.hf_peak_search_upper) {
            return Err(Error::InvalidConfig(format!(
                "resample_rate {} Hz is below twice the HF peak search limit",
                self.resample_rate
            )));
        }
        bands.validate(self.resample_rate)
    }

    /// Samples per analysis window.
    pub fn samples_per_window(&self) -> usize {
        (self.window_len * self.resample_rate).round() as usize
    }
}

/// A uniformly sampled, detrended tachogram.
#[derive(Debug, Clone, PartialEq)]
pub struct EvenSeries {
    pub t0: f64,
    pub rate: f64,
    pub values: Vec<f64>,
}

/// One-sided power spectral density, s²/Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub freqs: Vec<f64>,
    pub psd: Vec<f64>,
}

impl Spectrum {
    pub fn nyquist(&self) -> f64 {
        self.freqs.last().copied().unwrap_or(0.0)
    }

    pub fn bin_width(&self) -> f64 {
        if self.freqs.len() < 2 {
            0.0
        } else {
            self.freqs[1] - self.freqs[0]
        }
    }

    /// Trapezoidal integral over `[0, Nyquist]`.
    pub fn total_power(&self) -> f64 {
        if self.freqs.len() < 2 {
            return 0.0;
        }
        band_power(self, 0.0, self.nyquist()).unwrap_or(0.0)
    }
}

/// Summary of one analysis window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralWindow {
    pub t_start: f64,
    pub t_end: f64,
    pub vlf_power: f64,
    pub lf_power: f64,
    pub hf_power: f64,
    /// `lf_power / hf_power`; NaN when both are zero, +inf when only HF is zero.
    pub lf_hf_ratio: f64,
    pub hf_peak_freq: f64,
    pub hf_peak_power: f64,
    pub beat_count: usize,
}

pub(crate) fn lf_hf_ratio(lf: f64, hf: f64) -> f64 {
    if hf > 0.0 {
        lf / hf
    } else if lf > 0.0 {
        f64::INFINITY
    } else {
        f64::NAN
    }
}

/// Removes the least-squares line (and so the mean) in place.
///
/// Residuals that are all at rounding level relative to the input are set to
/// exactly zero, so a flat or linear input has no spectral power at all.
pub fn detrend(values: &mut [f64]) {
    let n = values.len();
    if n == 0 {
        return;
    }
    if n == 1 {
        values[0] = 0.0;
        return;
    }
    let nf = n as f64;
    let x_mean = (nf - 1.0) / 2.0;
    let y_mean = values.iter().sum::<f64>() / nf;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (i, v) in values.iter().enumerate() {
        let dx = i as f64 - x_mean;
        sxy += dx * (v - y_mean);
        sxx += dx * dx;
    }
    let slope = sxy / sxx;
    let scale = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut residual = 0.0_f64;
    for (i, v) in values.iter_mut().enumerate() {
        *v -= y_mean + slope * (i as f64 - x_mean);
        residual = residual.max(v.abs());
    }
    if residual <= 64.0 * f64::EPSILON * nf.sqrt() * scale {
        values.fill(0.0);
    }
}

fn interpolant(series: &RRSeries) -> Result<CubicSpline> {
    if series.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 beats to resample, got {}",
            series.len()
        )));
    }
    Ok(CubicSpline::new(series.timestamps(), series.intervals()))
}

/// Resamples the whole recording onto a uniform grid starting at t = 0,
/// removing mean and linear trend.
pub fn resample_tachogram(series: &RRSeries, cfg: &SpectralConfig) -> Result<EvenSeries> {
    let spline = interpolant(series)?;
    let span = series.duration();
    if span + AXIS_EPS < cfg.window_len {
        return Err(Error::InsufficientData(format!(
            "recording spans {span:.1} s, shorter than the {:.0} s window",
            cfg.window_len
        )));
    }
    let n = (span * cfg.resample_rate + AXIS_EPS).floor() as usize;
    let mut values = spline.sample_grid(0.0, cfg.resample_rate, n);
    detrend(&mut values);
    Ok(EvenSeries {
        t0: 0.0,
        rate: cfg.resample_rate,
        values,
    })
}

/// Reusable FFT plan for periodograms of one length.
struct PeriodogramPlan {
    fft: Arc<dyn Fft<f64>>,
    taper: Vec<f64>,
    taper_energy: f64,
}

impl PeriodogramPlan {
    fn new(n: usize, taper: bool) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(n);
        let taper: Vec<f64> = if taper { hann(n) } else { vec![1.0; n] };
        let taper_energy = taper.iter().map(|w| w * w).sum();
        Self {
            fft,
            taper,
            taper_energy,
        }
    }

    fn run(&self, values: &[f64], rate: f64) -> Spectrum {
        let n = values.len();
        let mut buf: Vec<Complex<f64>> = values
            .iter()
            .zip(&self.taper)
            .map(|(v, w)| Complex::new(v * w, 0.0))
            .collect();
        self.fft.process(&mut buf);
        let half = n / 2;
        let scale = 1.0 / (rate * self.taper_energy);
        let psd = (0..=half)
            .map(|k| {
                let one_sided = if k == 0 || (n.is_multiple_of(2) && k == half) {
                    1.0
                } else {
                    2.0
                };
                one_sided * buf[k].norm_sqr() * scale
            })
            .collect();
        let freqs = (0..=half).map(|k| k as f64 * rate / n as f64).collect();
        Spectrum { freqs, psd }
    }
}

/// Symmetric Hann window.
fn hann(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let denom = (n - 1) as f64;
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / denom).cos())
        .collect()
}

/// Single (optionally Hann-tapered) periodogram of an already detrended series.
pub fn periodogram(even: &EvenSeries, cfg: &SpectralConfig) -> Result<Spectrum> {
    if even.values.len() < 2 {
        return Err(Error::InsufficientData(
            "periodogram needs at least 2 samples".into(),
        ));
    }
    Ok(PeriodogramPlan::new(even.values.len(), cfg.taper).run(&even.values, even.rate))
}

/// Integral of the piecewise-linear PSD over `[lo, hi]`.
pub fn band_power(spec: &Spectrum, lo: f64, hi: f64) -> Result<f64> {
    let nyq = spec.nyquist();
    if !(lo >= 0.0 && lo < hi && hi <= nyq + AXIS_EPS) {
        return Err(Error::InvalidArgument(format!(
            "band [{lo}, {hi}) must satisfy 0 <= lo < hi <= {nyq}"
        )));
    }
    let hi = hi.min(nyq);
    let f = &spec.freqs;
    let p = &spec.psd;
    let lerp = |i: usize, x: f64| {
        let w = (x - f[i]) / (f[i + 1] - f[i]);
        p[i] + w * (p[i + 1] - p[i])
    };
    let mut total = 0.0;
    for i in 0..f.len() - 1 {
        let a = f[i].max(lo);
        let b = f[i + 1].min(hi);
        if b <= a {
            continue;
        }
        total += 0.5 * (lerp(i, a) + lerp(i, b)) * (b - a);
    }
    Ok(total)
}

/// Reduces a window spectrum to its band summary.
pub fn summarize_spectrum(
    spec: &Spectrum,
    t_start: f64,
    t_end: f64,
    beat_count: usize,
    bands: &FrequencyBands,
) -> Result<SpectralWindow> {
    let vlf_power = band_power(spec, bands.vlf.low, bands.vlf.high)?;
    let lf_power = band_power(spec, bands.lf.low, bands.lf.high)?;
    let hf_power = band_power(spec, bands.hf.low, bands.hf.high)?;

    let mut peak: Option<(f64, f64)> = None;
    for (&f, &p) in spec.freqs.iter().zip(&spec.psd) {
        if f + AXIS_EPS < bands.hf.low || f > bands.hf_peak_search_upper + AXIS_EPS {
            continue;
        }
        if peak.is_none_or(|(_, best)| p > best) {
            peak = Some((f, p));
        }
    }
    let (hf_peak_freq, hf_peak_power) = peak.ok_or_else(|| {
        Error::InsufficientData("no spectral bins inside the HF peak search range".into())
    })?;

    Ok(SpectralWindow {
        t_start,
        t_end,
        vlf_power,
        lf_power,
        hf_power,
        lf_hf_ratio: lf_hf_ratio(lf_power, hf_power),
        hf_peak_freq,
        hf_peak_power,
        beat_count,
    })
}

fn beats_in(series: &RRSeries, t_start: f64, t_end: f64) -> usize {
    let ts = series.timestamps();
    ts.partition_point(|&t| t < t_end) - ts.partition_point(|&t| t < t_start)
}

fn window_from_spline(
    spline: &CubicSpline,
    plan: &PeriodogramPlan,
    series: &RRSeries,
    t_start: f64,
    cfg: &SpectralConfig,
    bands: &FrequencyBands,
) -> Result<SpectralWindow> {
    let t_end = t_start + cfg.window_len;
    let mut values = spline.sample_grid(t_start, cfg.resample_rate, cfg.samples_per_window());
    detrend(&mut values);
    let spec = plan.run(&values, cfg.resample_rate);
    summarize_spectrum(
        &spec,
        t_start,
        t_end,
        beats_in(series, t_start, t_end),
        bands,
    )
}

/// Analyzes the window `[t_start, t_start + window_len)` of a recording.
pub fn analyze_window(
    series: &RRSeries,
    t_start: f64,
    cfg: &SpectralConfig,
    bands: &FrequencyBands,
) -> Result<SpectralWindow> {
    cfg.validate(bands)?;
    let t_end = t_start + cfg.window_len;
    if t_start < 0.0 || series.duration() + AXIS_EPS < t_end {
        return Err(Error::InsufficientData(format!(
            "window [{t_start:.1}, {t_end:.1}) s lies outside the {:.1} s recording",
            series.duration()
        )));
    }
    // Fit on the window's beats plus one neighbour on each side.
    let ts = series.timestamps();
    let lo = ts.partition_point(|&t| t < t_start).saturating_sub(1);
    let hi = (ts.partition_point(|&t| t < t_end) + 1).min(ts.len());
    if hi - lo < 2 {
        return Err(Error::InsufficientData(format!(
            "window starting at {t_start:.1} s holds fewer than 2 beats"
        )));
    }
    let spline = CubicSpline::new(&ts[lo..hi], &series.intervals()[lo..hi]);
    let plan = PeriodogramPlan::new(cfg.samples_per_window(), cfg.taper);
    window_from_spline(&spline, &plan, series, t_start, cfg, bands)
}

/// Splits a recording into consecutive windows starting at t = 0 and
/// analyzes each one. A trailing partial window is dropped.
pub fn windowize(
    series: &RRSeries,
    cfg: &SpectralConfig,
    bands: &FrequencyBands,
) -> Result<Vec<SpectralWindow>> {
    cfg.validate(bands)?;
    let span = series.duration();
    if span + AXIS_EPS < cfg.window_len {
        return Err(Error::InsufficientData(format!(
            "recording spans {span:.1} s, shorter than one {:.0} s window",
            cfg.window_len
        )));
    }
    let spline = interpolant(series)?;
    let plan = PeriodogramPlan::new(cfg.samples_per_window(), cfg.taper);
    let count = ((span - cfg.window_len + AXIS_EPS) / cfg.window_stride).floor() as usize + 1;
    (0..count)
        .map(|k| {
            let t_start = k as f64 * cfg.window_stride;
            window_from_spline(&spline, &plan, series, t_start, cfg, bands)
        })
        .collect()
}

/// Spectrum of one window, for plotting.
pub fn window_spectrum(series: &RRSeries, t_start: f64, cfg: &SpectralConfig) -> Result<Spectrum> {
    let t_end = t_start + cfg.window_len;
    if t_start < 0.0 || series.duration() + AXIS_EPS < t_end {
        return Err(Error::InsufficientData(format!(
            "window [{t_start:.1}, {t_end:.1}) s lies outside the recording"
        )));
    }
    let spline = interpolant(series)?;
    let mut values = spline.sample_grid(t_start, cfg.resample_rate, cfg.samples_per_window());
    detrend(&mut values);
    periodogram(
        &EvenSeries {
            t0: t_start,
            rate: cfg.resample_rate,
            values,
        },
        cfg,
    )
}
