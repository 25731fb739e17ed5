//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Runs as part of `cargo test --workspace`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestCaseError, TestRunner};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use sleeptemp::controller::{delta_schedule, run, step, ControllerState};
use sleeptemp::simulator::closed_loop_run;
use sleeptemp::spectral::{detrend, periodogram, summarize_spectrum, EvenSeries, SpectralWindow};
use sleeptemp::stager::classify;
use sleeptemp::{
    ControllerConfig, DfaState, FrequencyBands, PipelineConfig, SimConfig, SleepStage,
    SpectralConfig, StagerConfig,
};
use sleeptemp_cli::{cmd_simulate, FileConfig};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn spectral_correctness() -> Check {
    let started = Instant::now();
    let cfg = SpectralConfig::default();
    let bands = FrequencyBands::default();
    let (a_lf, a_hf) = (0.04, 0.02);
    let fs = 4.0;
    let mut values: Vec<f64> = (0..1200)
        .map(|j| {
            let t = j as f64 / fs;
            0.9 + a_lf * (2.0 * PI * 0.10 * t).sin() + a_hf * (2.0 * PI * 0.25 * t).sin()
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
    )
    .map_err(|e| e.to_string())?;
    let w = summarize_spectrum(&spec, 0.0, 300.0, 0, &bands).map_err(|e| e.to_string())?;
    let (lf_oracle, hf_oracle) = (a_lf * a_lf / 2.0, a_hf * a_hf / 2.0);
    let ratio_err = rel(w.lf_hf_ratio, 4.0);
    let lf_err = rel(w.lf_power, lf_oracle);
    let hf_err = rel(w.hf_power, hf_oracle);

    // Parseval: untapered sum equals the mean square; tapered sum equals the
    // taper-weighted mean square.
    let mut worst = 0.0_f64;
    let n = 1200;
    let hann: Vec<f64> = (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / (n - 1) as f64).cos())
        .collect();
    let hann_sq: f64 = hann.iter().map(|w| w * w).sum();
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                0.05 * z
            })
            .collect();
        for taper in [false, true] {
            let c = SpectralConfig { taper, ..cfg };
            let spec = periodogram(
                &EvenSeries {
                    t0: 0.0,
                    rate: fs,
                    values: x.clone(),
                },
                &c,
            )
            .map_err(|e| e.to_string())?;
            let lhs: f64 = spec.psd.iter().sum::<f64>() * spec.bin_width();
            let rhs = if taper {
                x.iter()
                    .zip(&hann)
                    .map(|(v, w)| (v * w).powi(2))
                    .sum::<f64>()
                    / hann_sq
            } else {
                x.iter().map(|v| v * v).sum::<f64>() / n as f64
            };
            worst = worst.max(rel(lhs, rhs));
        }
    }
    let elapsed = started.elapsed();
    let msg = format!(
        "ratio {:.4} (err {:.2}%), LF err {:.2}%, HF err {:.2}%, Parseval worst rel {:.1e}, {:.0} ms",
        w.lf_hf_ratio,
        100.0 * ratio_err,
        100.0 * lf_err,
        100.0 * hf_err,
        worst,
        elapsed.as_secs_f64() * 1e3
    );
    if ratio_err <= 0.10
        && lf_err <= 0.05
        && hf_err <= 0.05
        && worst <= 1e-6
        && elapsed < Duration::from_secs(1)
    {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn band_constants() -> Check {
    let b = FrequencyBands::default();
    let got = [
        (b.vlf.low, b.vlf.high),
        (b.lf.low, b.lf.high),
        (b.hf.low, b.hf.high),
    ];
    let want = [(0.0, 0.04), (0.04, 0.15), (0.15, 0.40)];
    let msg = format!("VLF {:?} LF {:?} HF {:?}", got[0], got[1], got[2]);
    if got == want {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn window(ratio: f64, peak: f64) -> SpectralWindow {
    SpectralWindow {
        t_start: 0.0,
        t_end: 300.0,
        vlf_power: 1e-4,
        lf_power: 1e-3,
        hf_power: 1e-3,
        lf_hf_ratio: ratio,
        hf_peak_freq: peak,
        hf_peak_power: 1e-2,
        beat_count: 330,
    }
}

fn classifier_rules() -> Check {
    let cfg = StagerConfig::default();
    let ratios = [
        0.0,
        0.5,
        0.999_999,
        1.0,
        1.000_001,
        2.0,
        4.0,
        f64::INFINITY,
        f64::NAN,
    ];
    // trailing-range values around the 0.65 Hz threshold
    let ranges = [0.0, 0.25, 0.5, 0.649_999, 0.650_001, 0.7, 0.75];
    let base = 0.15;
    let mut cases = 0;
    let mut mismatches = Vec::new();
    for &ratio in &ratios {
        for &range in &ranges {
            // the excursion sits on each of the three trailing windows in turn
            for pos in 0..3 {
                let peaks: Vec<f64> = (0..3)
                    .map(|i| if i == pos { base + range } else { base })
                    .collect();
                let windows: Vec<SpectralWindow> = peaks
                    .iter()
                    .enumerate()
                    .map(|(i, &p)| SpectralWindow {
                        t_start: 300.0 * i as f64,
                        t_end: 300.0 * (i + 1) as f64,
                        ..window(ratio, p)
                    })
                    .collect();
                let got = classify(&windows, &cfg).map_err(|e| e.to_string())?;
                let got = got.epochs().last().unwrap().stage;
                let want = if range > 0.65 {
                    SleepStage::Rem
                } else if ratio < 1.0 {
                    SleepStage::Sws
                } else {
                    SleepStage::Light
                };
                cases += 1;
                if got != want {
                    mismatches.push(format!(
                        "ratio {ratio} range {range} pos {pos}: {got} != {want}"
                    ));
                }
            }
        }
    }
    if mismatches.is_empty() {
        Ok(format!("{cases} grid cases, 0 mismatches"))
    } else {
        Err(format!(
            "{} of {cases} mismatched: {}",
            mismatches.len(),
            mismatches.join("; ")
        ))
    }
}

fn dfa_equivalence() -> Check {
    use DfaState::{Minus as M, Neutral as N, Plus as P};
    use SleepStage::*;
    let order = [Sws, Light, Rem, Wake];
    // rows: previous stage, columns: current stage (deeper sleep = lower code)
    let table = [
        [N, P, P, P], // from SWS
        [M, N, P, P], // from LIGHT
        [M, M, N, P], // from REM
        [M, M, M, N], // from WAKE
    ];
    let cfg = ControllerConfig::new(24.0);
    let elapsed = 1800.0;
    let deltas = delta_schedule(elapsed, &cfg).map_err(|e| e.to_string())?;
    let mut mismatches = Vec::new();
    for (i, &prev) in order.iter().enumerate() {
        for (j, &curr) in order.iter().enumerate() {
            let state = ControllerState {
                dfa: DfaState::Neutral,
                ta: 24.0,
                elapsed,
                prev_stage: Some(prev),
            };
            let (_, point) = step(&state, curr, &cfg);
            let want = table[i][j];
            let want_change = match want {
                P => deltas.pos,
                M => -deltas.neg,
                N => 0.0,
            };
            if point.dfa != want || (point.ta - 24.0 - want_change).abs() > 1e-12 {
                mismatches.push(format!(
                    "{prev}->{curr}: {} {:+.4}",
                    point.dfa,
                    point.ta - 24.0
                ));
            }
        }
    }
    if mismatches.is_empty() {
        Ok("16 pairs, 0 mismatches".into())
    } else {
        Err(mismatches.join("; "))
    }
}

fn delta_schedule_check() -> Check {
    let cfg = ControllerConfig::new(24.0);
    let at = |t: f64| delta_schedule(t, &cfg).map_err(|e| e.to_string());
    let d0 = at(0.0)?;
    let dx = at(cfg.crossover_hours * 3600.0)?;
    let mut prev_gap = f64::INFINITY;
    let mut increases = 0;
    for minute in 0..=600 {
        let d = at(minute as f64 * 60.0)?;
        let gap = d.neg - d.pos;
        if gap > prev_gap {
            increases += 1;
        }
        prev_gap = gap;
    }
    let msg = format!(
        "pos(0)={} neg(0)={} |pos-neg| at {} h = {:.1e}, {increases} increases on 1-min grid",
        d0.pos,
        d0.neg,
        cfg.crossover_hours,
        (dx.pos - dx.neg).abs()
    );
    if d0.pos == 0.4 && d0.neg == 0.6 && (dx.pos - dx.neg).abs() <= 1e-9 && increases == 0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn safety() -> Check {
    let mut runner = TestRunner::new(PropConfig {
        cases: 1000,
        failure_persistence: None,
        ..PropConfig::default()
    });
    let stage = prop::sample::select(SleepStage::ALL.to_vec());
    let strategy = (prop::collection::vec(stage, 0..=200), 10.5..40.0f64);
    let result = runner.run(&strategy, |(stages, baseline)| {
        let cfg = ControllerConfig::new(baseline);
        let lo = f64::max(10.0, baseline - 3.0);
        let hi = baseline + 3.0;
        let profile =
            run(stages.iter().copied(), &cfg).map_err(|e| TestCaseError::fail(e.to_string()))?;
        for p in &profile.points {
            prop_assert!(p.ta >= lo && p.ta <= hi, "ta {} outside [{lo}, {hi}]", p.ta);
        }
        Ok(())
    });
    match result {
        Ok(()) => Ok("1000 random sequences, 0 violations".into()),
        Err(e) => Err(e.to_string()),
    }
}

fn end_to_end() -> Check {
    let started = Instant::now();
    let pipeline = PipelineConfig::with_baseline(24.0);
    let seeds = 20u64;
    let mut acc_sum = 0.0;
    let mut min_light = f64::INFINITY;
    let mut shape_failures = Vec::new();
    for seed in 0..seeds {
        let sim = SimConfig {
            seed,
            ..Default::default()
        };
        let session = closed_loop_run(&sim, &pipeline).map_err(|e| e.to_string())?;
        acc_sum += session.epoch_accuracy;
        min_light = min_light.min(session.stage_percentages[&SleepStage::Light]);
        let (imin, vmin) = session.profile.min().ok_or("empty profile")?;
        let last = session.profile.len() - 1;
        let fin = session.profile.last().ok_or("empty profile")?;
        if !(imin < last && vmin < fin) {
            shape_failures.push(seed);
        }
    }
    let mean = acc_sum / seeds as f64;
    let elapsed = started.elapsed();
    let mut msg = format!(
        "mean accuracy {mean:.3} (need >= 0.80), min LIGHT share {min_light:.1}%, \
         min-before-final fails on seeds {shape_failures:?}, {:.1} s",
        elapsed.as_secs_f64()
    );
    let ok = mean >= 0.80
        && min_light > 50.0
        && shape_failures.is_empty()
        && elapsed < Duration::from_secs(600);
    if !ok {
        let _ = write!(
            msg,
            " [REM epochs are not separable at the simulated heart rate; see README]"
        );
    }
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn determinism() -> Check {
    let cfg = FileConfig::default();
    let (a, _) = cmd_simulate(&cfg, Some(42), Some(24.0)).map_err(|e| e.to_string())?;
    let (b, _) = cmd_simulate(&cfg, Some(42), Some(24.0)).map_err(|e| e.to_string())?;
    // and through the filesystem, as the binary writes them
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for (dir, outputs) in dirs.iter().zip([&a, &b]) {
        sleeptemp_cli::write_outputs(dir.path(), outputs).map_err(|e| e.to_string())?;
    }
    let mut differing = Vec::new();
    for (name, _) in &a {
        let x = std::fs::read(dirs[0].path().join(name)).map_err(|e| e.to_string())?;
        let y = std::fs::read(dirs[1].path().join(name)).map_err(|e| e.to_string())?;
        if x != y {
            differing.push(*name);
        }
    }
    let listing = |d: &tempfile::TempDir| {
        let mut names: Vec<_> = std::fs::read_dir(d.path())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        names.sort();
        names
    };
    let same_listing = listing(&dirs[0]) == listing(&dirs[1]);
    if a == b && differing.is_empty() && same_listing {
        Ok(format!("{} files byte-identical", a.len()))
    } else {
        Err(format!(
            "differing files: {differing:?}, same listing: {same_listing}"
        ))
    }
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("spectral correctness", spectral_correctness),
        ("band constants", band_constants),
        ("classifier rules", classifier_rules),
        ("DFA equivalence", dfa_equivalence),
        ("delta schedule", delta_schedule_check),
        ("temperature safety", safety),
        ("end-to-end oracle", end_to_end),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    println!();
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!(
        "\nacceptance: {} passed, {failed} failed\n",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
