use std::f64::consts::TAU;

use modresp_core::extractors::{run_builtin, track_to_cents, BuiltinKind, ExtractorSpec, PitchTrack};
use modresp_core::synth::{fm_harmonic_tone, VfoConfig};
use modresp_core::testbench::{SetupConfig, Testbench};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

const RATE: f64 = 44100.0;

fn analytic(x: &[f64]) -> Vec<Complex64> {
    let n = x.len();
    let mut planner = FftPlanner::new();
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, v) in buf.iter_mut().enumerate() {
        if k > 0 && k < n / 2 {
            *v *= 2.0;
        } else if k > n / 2 {
            *v = Complex64::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|v| v / n as f64).collect()
}

#[test]
fn analytic_phase_recovers_the_instantaneous_frequency() {
    let n = 44100;
    let m: Vec<f64> = (0..n).map(|i| 25.0 * (TAU * 5.0 * i as f64 / n as f64).sin()).collect();
    // Carrier chosen so the phase closes after exactly 240 cycles.
    let sum: f64 = m.iter().map(|c| 2f64.powf(c / 1200.0)).sum();
    let carrier = 240.0 * RATE / sum;
    let vfo = VfoConfig {
        num_harmonics: 1,
        ..VfoConfig::new(carrier, 25.0)
    };
    let tone = fm_harmonic_tone(&m, &vfo).unwrap();
    let z = analytic(&tone);
    let mut worst = 0.0f64;
    for i in 1..n {
        let step = (z[i] * z[i - 1].conj()).arg();
        let measured = step * RATE / TAU;
        let truth = carrier * 2f64.powf(m[i - 1] / 1200.0);
        worst = worst.max((measured / truth - 1.0).abs());
    }
    assert!(worst < 1e-6, "relative error {worst}");
}

#[test]
fn yin_follows_a_vowel_tone_at_110_hz() {
    let m = vec![0.0; 44100];
    let tone = fm_harmonic_tone(&m, &VfoConfig::new(110.0, 25.0)).unwrap();
    let track = run_builtin(&ExtractorSpec::builtin(BuiltinKind::Yin), &tone, RATE).unwrap();
    let good = track.f0.iter().filter(|f| (*f - 110.0).abs() <= 0.5).count();
    assert!(good as f64 >= 0.99 * track.len() as f64, "{good} of {} frames", track.len());
}

#[test]
fn interpolated_track_has_the_triangle_spectrum() {
    let carrier = 200.0;
    let frame = 0.01;
    let analysis_rate = RATE / 8.0;
    let times: Vec<f64> = (0..200).map(|i| i as f64 * frame).collect();
    let f0: Vec<f64> = (0..200)
        .map(|i| if i == 100 { carrier * 2f64.powf(1.0 / 1200.0) } else { carrier })
        .collect();
    let track = PitchTrack {
        times,
        f0,
        source: "staircase".into(),
        frame_interval: frame,
    };
    let cents = track_to_cents(&track, carrier, analysis_rate, 2.0).unwrap().values;
    let n = cents.len();
    // A one-frame step becomes a triangle of half-width `frame`, whose
    // transform is frame * sinc^2(f * frame) per unit time.
    for k in 1..(0.5 * n as f64 * 0.03) as usize {
        let f = k as f64 * analysis_rate / n as f64;
        let w = TAU * k as f64 / n as f64;
        let dft = cents
            .iter()
            .enumerate()
            .fold(Complex64::new(0.0, 0.0), |acc, (i, &c)| acc + Complex64::from_polar(c, -w * i as f64));
        let x = std::f64::consts::PI * f * frame;
        let sinc = if x == 0.0 { 1.0 } else { x.sin() / x };
        let expected = frame * analysis_rate * sinc * sinc;
        if expected > 0.01 * frame * analysis_rate {
            let error_db = 20.0 * (dft.norm() / expected).log10();
            assert!(error_db.abs() < 0.1, "{f} Hz: {error_db} dB");
        }
    }
}

#[test]
fn external_copy_of_the_true_track_measures_zero_gain() {
    let bench = Testbench::new(SetupConfig {
        candidates: 20,
        ..SetupConfig::default()
    })
    .unwrap();
    let carrier = 150.0;
    let dir = tempfile::tempdir().unwrap();
    let rate = bench.analysis_rate();
    let mut csv = String::from("time_s,f0_hz\n");
    for (i, c) in bench.reference_analysis.iter().enumerate() {
        csv.push_str(&format!("{},{}\n", i as f64 / rate, carrier * 2f64.powf(c / 1200.0)));
    }
    let truth = dir.path().join("truth.csv");
    std::fs::write(&truth, csv).unwrap();
    let spec: ExtractorSpec = format!("external:copy=test -s {{input}} && cp '{}' {{output}}", truth.display())
        .parse()
        .unwrap();
    let file = bench.measure(&spec, carrier, Some(dir.path()), false).unwrap().file();
    assert!(dir.path().join("audio.wav").exists());
    assert!(!file.gain_db.is_empty());
    for g in &file.gain_db {
        assert!(g.abs() <= 0.05, "gain {g} dB");
    }
}
