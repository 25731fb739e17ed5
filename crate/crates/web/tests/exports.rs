use sleeptemp_web::{delta_curve_json, simulate_night_json, two_tone_spectrum_json};

#[test]
fn night_has_matching_series() {
    let v = simulate_night_json(7, 24.0).unwrap();
    let n = v["truth"].as_array().unwrap().len();
    assert_eq!(n, 96);
    assert_eq!(v["detected"].as_array().unwrap().len(), n);
    assert_eq!(v["ta"].as_array().unwrap().len(), n);
    let total: f64 = v["percentages"]
        .as_object()
        .unwrap()
        .values()
        .map(|x| x.as_f64().unwrap())
        .sum();
    assert!((total - 100.0).abs() < 1e-9);
    assert!(simulate_night_json(7, 5.0).is_err());
}

#[test]
fn spectrum_ratio_follows_amplitudes() {
    let v = two_tone_spectrum_json(0.04, 0.02, 0.25).unwrap();
    assert!((v["lf_hf"].as_f64().unwrap() - 4.0).abs() < 0.4);
    assert!((v["hf_peak_hz"].as_f64().unwrap() - 0.25).abs() < 0.01);
    assert!(
        v["freqs"]
            .as_array()
            .unwrap()
            .last()
            .unwrap()
            .as_f64()
            .unwrap()
            <= 1.0
    );
    // no HF tone: the ratio is not a finite number and is sent as null
    let flat = two_tone_spectrum_json(0.0, 0.0, 0.25).unwrap();
    assert!(flat["lf_hf"].is_null());
}

#[test]
fn delta_curve_crosses_at_the_configured_hour() {
    let v = delta_curve_json(0.6, 0.4, 3.5, 8.0).unwrap();
    let t: Vec<f64> = v["t_h"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    let i = t.iter().position(|&h| (h - 3.5).abs() < 1e-9).unwrap();
    assert!((v["pos"][i].as_f64().unwrap() - v["neg"][i].as_f64().unwrap()).abs() < 1e-9);
    assert_eq!(t.len(), 97);
    assert!(delta_curve_json(0.6, 0.4, 0.0, 8.0).is_err());
}
