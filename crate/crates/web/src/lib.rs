//! Browser bindings. Each export returns a JSON string for the page to plot;
//! the `*_json` functions behind them are plain Rust so they test natively.

use std::f64::consts::PI;

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use sleeptemp::controller::delta_schedule;
use sleeptemp::simulator::closed_loop_run;
use sleeptemp::spectral::{detrend, periodogram, summarize_spectrum, EvenSeries};
use sleeptemp::{ControllerConfig, FrequencyBands, PipelineConfig, SimConfig, SpectralConfig};

/// Upper edge of the spectrum sent to the page.
const PLOT_MAX_HZ: f64 = 1.0;

fn codes(h: &sleeptemp::Hypnogram) -> Vec<i32> {
    h.stages().map(|s| s.depth_code()).collect()
}

/// Simulated night through the whole pipeline: both hypnograms as depth
/// codes, the temperature profile and the summary numbers.
pub fn simulate_night_json(seed: u64, baseline_ta: f64) -> sleeptemp::Result<Value> {
    let sim = SimConfig {
        seed,
        ..Default::default()
    };
    let session = closed_loop_run(&sim, &PipelineConfig::with_baseline(baseline_ta))?;
    Ok(json!({
        "epoch_s": sleeptemp::simulator::EPOCH_SECONDS,
        "truth": codes(&session.truth),
        "detected": codes(&session.detected),
        "ta": session.profile.temperatures().collect::<Vec<_>>(),
        "lf_hf": session.windows.iter().map(|w| w.lf_hf_ratio).collect::<Vec<_>>(),
        "accuracy": session.epoch_accuracy,
        "percentages": session.stage_percentages,
    }))
}

/// Periodogram of a 5-minute two-tone tachogram sampled at 4 Hz.
pub fn two_tone_spectrum_json(lf_amp: f64, hf_amp: f64, hf_freq: f64) -> sleeptemp::Result<Value> {
    let cfg = SpectralConfig::default();
    let bands = FrequencyBands::default();
    let n = cfg.samples_per_window();
    let fs = cfg.resample_rate;
    let mut values: Vec<f64> = (0..n)
        .map(|j| {
            let t = j as f64 / fs;
            0.9 + lf_amp * (2.0 * PI * 0.10 * t).sin() + hf_amp * (2.0 * PI * hf_freq * t).sin()
        })
        .collect();
    detrend(&mut values);
    let spec = periodogram(
        &EvenSeries {
            t0: 0.0,
            rate: fs,
            values,
        },
        &cfg,
    )?;
    let w = summarize_spectrum(&spec, 0.0, cfg.window_len, 0, &bands)?;
    let keep = spec.freqs.iter().take_while(|&&f| f <= PLOT_MAX_HZ).count();
    // JSON has no NaN/inf; the page shows null as "undefined"
    let ratio = w.lf_hf_ratio.is_finite().then_some(w.lf_hf_ratio);
    Ok(json!({
        "freqs": &spec.freqs[..keep],
        "psd": &spec.psd[..keep],
        "vlf": w.vlf_power,
        "lf": w.lf_power,
        "hf": w.hf_power,
        "lf_hf": ratio,
        "hf_peak_hz": w.hf_peak_freq,
    }))
}

/// Heating and cooling step sizes on a 5-minute grid.
pub fn delta_curve_json(
    neg_delta_0: f64,
    pos_delta_0: f64,
    crossover_hours: f64,
    hours: f64,
) -> sleeptemp::Result<Value> {
    let cfg = ControllerConfig {
        neg_delta_0,
        pos_delta_0,
        crossover_hours,
        ..ControllerConfig::new(24.0)
    };
    cfg.validate()?;
    let steps = (hours * 12.0).round().max(1.0) as usize;
    let mut t_h = Vec::with_capacity(steps + 1);
    let mut pos = Vec::with_capacity(steps + 1);
    let mut neg = Vec::with_capacity(steps + 1);
    for i in 0..=steps {
        let t = i as f64 * 300.0;
        let d = delta_schedule(t, &cfg)?;
        t_h.push(t / 3600.0);
        pos.push(d.pos);
        neg.push(d.neg);
    }
    Ok(json!({ "t_h": t_h, "pos": pos, "neg": neg }))
}

fn to_js(r: sleeptemp::Result<Value>) -> Result<String, JsValue> {
    r.map(|v| v.to_string())
        .map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen]
pub fn simulate_night(seed: u32, baseline_ta: f64) -> Result<String, JsValue> {
    to_js(simulate_night_json(seed.into(), baseline_ta))
}

#[wasm_bindgen]
pub fn two_tone_spectrum(lf_amp: f64, hf_amp: f64, hf_freq: f64) -> Result<String, JsValue> {
    to_js(two_tone_spectrum_json(lf_amp, hf_amp, hf_freq))
}

#[wasm_bindgen]
pub fn delta_curve(
    neg_delta_0: f64,
    pos_delta_0: f64,
    crossover_hours: f64,
    hours: f64,
) -> Result<String, JsValue> {
    to_js(delta_curve_json(
        neg_delta_0,
        pos_delta_0,
        crossover_hours,
        hours,
    ))
}
