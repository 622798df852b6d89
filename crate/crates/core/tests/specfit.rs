use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use woodpile_core::specfit::{
    fft_spectrum, harmonic_inversion, q_from_peak, synthesize, InversionOptions, ModeEstimate, PeakSelector,
    RingdownSignal, Window,
};
use woodpile_core::Error;

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn nearest(modes: &[ModeEstimate], f: f64) -> &ModeEstimate {
    modes
        .iter()
        .min_by(|a, b| (a.frequency - f).abs().total_cmp(&(b.frequency - f).abs()))
        .expect("at least one mode")
}

/// Random modes with frequencies at least `3/record` apart.
fn random_modes(rng: &mut ChaCha8Rng, n_modes: usize, dt: f64, n: usize) -> Vec<(f64, f64, f64, f64)> {
    let sep = 3.0 / (n as f64 * dt);
    let mut out: Vec<(f64, f64, f64, f64)> = Vec::new();
    while out.len() < n_modes {
        let f = rng.random_range(0.05..0.45) / dt;
        if out.iter().any(|m| (m.0 - f).abs() < sep) {
            continue;
        }
        let q = 10f64.powf(rng.random_range(2.5..4.5));
        let a = rng.random_range(0.2..1.0);
        let phi = rng.random_range(-PI..PI);
        out.push((f, q, a, phi));
    }
    out
}

#[test]
fn randomized_round_trips() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let dt = 1.0;
    let n = 3000;
    let mut worst_f: f64 = 0.0;
    let mut worst_q: f64 = 0.0;
    for case in 0..100 {
        let k = 1 + case % 3;
        let truth = random_modes(&mut rng, k, dt, n);
        let sig = RingdownSignal::new(synthesize(&truth, dt, n), dt);
        let modes = harmonic_inversion(&sig, &InversionOptions::default()).unwrap();
        assert_eq!(modes.len(), k, "case {case}: {truth:?} -> {modes:?}");
        for &(f, q, _, _) in &truth {
            let m = nearest(&modes, f);
            worst_f = worst_f.max(rel(m.frequency, f));
            worst_q = worst_q.max(rel(m.q, q));
        }
    }
    assert!(worst_f < 1e-4, "worst frequency error {worst_f:e}");
    assert!(worst_q < 1e-2, "worst Q error {worst_q:e}");
}

#[test]
fn high_q_from_a_tenth_of_the_decay_time() {
    let q = 7.54e5;
    let f = 0.2;
    let dt = 1.0;
    let tau = q / (PI * f);
    let n = (0.1 * tau / dt) as usize;
    let sig = RingdownSignal::new(synthesize(&[(f, q, 1.0, 0.4)], dt, n), dt);
    let modes = harmonic_inversion(&sig, &InversionOptions::default()).unwrap();
    let m = nearest(&modes, f);
    assert!(rel(m.frequency, f) < 1e-6);
    assert!(rel(m.q, q) < 0.05, "Q {}", m.q);
}

#[test]
fn one_percent_noise() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let noise = Normal::new(0.0, 0.01).unwrap();
    let (f, q, dt, n) = (0.13, 800.0, 1.0, 4000);
    let samples: Vec<f64> = synthesize(&[(f, q, 1.0, 0.0)], dt, n)
        .into_iter()
        .map(|v| v + noise.sample(&mut rng))
        .collect();
    let sig = RingdownSignal::new(samples, dt);
    let opts = InversionOptions {
        max_error: f64::INFINITY,
        min_relative_amplitude: 1e-2,
        ..Default::default()
    };
    let modes = harmonic_inversion(&sig, &opts).unwrap();
    let m = modes.iter().max_by(|a, b| a.amplitude.total_cmp(&b.amplitude)).unwrap();
    assert!(rel(m.frequency, f) < 1e-3, "{m:?}");
    assert!(rel(m.q, q) < 0.1, "{m:?}");
}

#[test]
fn peak_and_inversion_agree_when_resolved() {
    let (f, q, dt, n) = (0.1, 100.0, 1.0, 20_000);
    let sig = RingdownSignal::new(synthesize(&[(f, q, 1.0, 0.0)], dt, n), dt);
    let spec = fft_spectrum(&sig, Window::Rectangular, 4).unwrap();
    let peak = q_from_peak(&spec, PeakSelector::Max).unwrap();
    assert!(rel(peak.q, q) < 0.05, "{peak:?}");
    let modes = harmonic_inversion(&sig, &InversionOptions::default()).unwrap();
    let m = nearest(&modes, f);
    assert!(rel(peak.q, m.q) < 0.1);
}

#[test]
fn unresolved_peak_points_to_harmonic_inversion() {
    let (f, dt) = (0.1, 1.0);
    let n = (1e3 / f) as usize;
    let sig = RingdownSignal::new(synthesize(&[(f, 1e6, 1.0, 0.0)], dt, n), dt);
    let spec = fft_spectrum(&sig, Window::Hann, 1).unwrap();
    match q_from_peak(&spec, PeakSelector::Max) {
        Err(Error::Resolution(msg)) => assert!(msg.contains("harmonic inversion"), "{msg}"),
        other => panic!("expected a resolution error, got {other:?}"),
    }
}

#[test]
fn band_limited_fit_reports_reduced_frequency() {
    // a mode at c/λ = 0.5255 for c = 335.8 nm, sampled as an FDTD probe would be
    let c = 335.8e-9;
    let f = 0.5255 * woodpile_core::constants::C0 / c;
    let dt = 2.83e-17;
    let n = 12_000;
    let samples = synthesize(&[(f, 2e4, 1.0, 0.1), (0.9 * f, 300.0, 0.5, 0.0)], dt, n);
    let mut sig = RingdownSignal::new(samples, dt);
    sig.period = Some(c);
    let unit = woodpile_core::constants::C0 / c;
    sig.band = Some((0.4853 * unit, 0.5689 * unit));
    let modes = harmonic_inversion(&sig, &InversionOptions::default()).unwrap();
    let m = nearest(&modes, f);
    assert!(rel(m.frequency, f) < 1e-5);
    assert!((m.reduced.unwrap() - 0.5255).abs() < 1e-5);
    assert!(rel(m.q, 2e4) < 0.02, "{modes:?}");
    assert!(modes
        .iter()
        .all(|m| m.reduced.unwrap() > 0.4853 && m.reduced.unwrap() < 0.5689));
}
