//! Resonance extraction from ringdown signals: windowed FFT spectra, Q from
//! the spectral linewidth, and harmonic inversion by the matrix-pencil
//! method.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::constants::C0;
use crate::error::{Error, Result};

pub const MIN_SAMPLES: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct RingdownSignal {
    pub samples: Vec<f64>,
    pub dt: f64,
    /// Analysis band `(f_lo, f_hi)` in Hz.
    pub band: Option<(f64, f64)>,
    /// Length used to express frequencies as `c/λ`.
    pub period: Option<f64>,
}

impl RingdownSignal {
    pub fn new(samples: Vec<f64>, dt: f64) -> Self {
        Self {
            samples,
            dt,
            band: None,
            period: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples.len() < MIN_SAMPLES {
            return Err(Error::Domain(format!(
                "ringdown needs at least {MIN_SAMPLES} samples, got {}",
                self.samples.len()
            )));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Domain(format!(
                "sample interval must be positive, got {}",
                self.dt
            )));
        }
        if let Some((lo, hi)) = self.band {
            if !(lo >= 0.0 && hi > lo && hi <= 0.5 / self.dt) {
                return Err(Error::Domain(format!(
                    "analysis band ({lo}, {hi}) Hz must lie within (0, {}) Hz",
                    0.5 / self.dt
                )));
            }
        }
        Ok(())
    }

    pub fn reduced(&self, f: f64) -> Option<f64> {
        self.period.map(|c| f * c / C0)
    }

    /// Read `step,time,value` CSV (header optional). The sample interval is
    /// taken from the time column.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .from_path(path)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
            if rec.len() < 3 {
                return Err(Error::Parse(format!(
                    "{}:{}: expected step,time,value",
                    path.display(),
                    line + 1
                )));
            }
            let t = rec[1].trim().parse::<f64>();
            let v = rec[2].trim().parse::<f64>();
            match (t, v) {
                (Ok(t), Ok(v)) => {
                    times.push(t);
                    values.push(v);
                }
                _ if line == 0 => continue,
                _ => {
                    return Err(Error::Parse(format!(
                        "{}:{}: non-numeric sample",
                        path.display(),
                        line + 1
                    )))
                }
            }
        }
        if times.len() < 2 {
            return Err(Error::Parse(format!("{}: too few samples", path.display())));
        }
        let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
        Ok(Self::new(values, dt))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Window {
    Rectangular,
    #[default]
    Hann,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub frequency: Vec<f64>,
    pub reduced: Option<Vec<f64>>,
    pub magnitude: Vec<f64>,
    /// Bin spacing of the unpadded record (Hz).
    pub resolution: f64,
    /// Zero-padding factor applied before the transform.
    pub pad: usize,
}

/// One-sided magnitude spectrum of a real signal.
pub fn fft_spectrum(signal: &RingdownSignal, window: Window, pad: usize) -> Result<Spectrum> {
    signal.validate()?;
    let n = signal.samples.len();
    let pad = pad.max(1);
    let len = n * pad;
    let mut buf: Vec<Complex64> = signal
        .samples
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let w = match window {
                Window::Rectangular => 1.0,
                Window::Hann => 0.5 - 0.5 * (2.0 * PI * i as f64 / (n - 1) as f64).cos(),
            };
            Complex64::new(v * w, 0.0)
        })
        .collect();
    buf.resize(len, Complex64::default());
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    let half = len / 2 + 1;
    let df = 1.0 / (len as f64 * signal.dt);
    let frequency: Vec<f64> = (0..half).map(|i| i as f64 * df).collect();
    let reduced = signal.period.map(|c| frequency.iter().map(|f| f * c / C0).collect());
    Ok(Spectrum {
        magnitude: buf[..half].iter().map(|z| z.norm()).collect(),
        frequency,
        reduced,
        resolution: 1.0 / (n as f64 * signal.dt),
        pad,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PeakSelector {
    /// Global maximum (DC bin excluded).
    Max,
    /// Maximum within `(f_lo, f_hi)` Hz.
    InBand(f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakQ {
    pub frequency: f64,
    pub fwhm: f64,
    pub q: f64,
}

/// `Q = f/Δf` from the half-power width of a spectral peak.
pub fn q_from_peak(spec: &Spectrum, selector: PeakSelector) -> Result<PeakQ> {
    let power: Vec<f64> = spec.magnitude.iter().map(|m| m * m).collect();
    let n = power.len();
    let (lo, hi) = match selector {
        PeakSelector::Max => (1, n),
        PeakSelector::InBand(a, b) => {
            let df = spec.frequency.get(1).copied().unwrap_or(1.0);
            (
                ((a / df).ceil() as usize).max(1),
                ((b / df).floor() as usize + 1).min(n),
            )
        }
    };
    if lo >= hi {
        return Err(Error::Resolution("empty peak search band".into()));
    }
    let ipk = (lo..hi)
        .max_by(|&a, &b| power[a].partial_cmp(&power[b]).unwrap())
        .unwrap();
    let pmax = power[ipk];
    if !(pmax > 0.0) {
        return Err(Error::Resolution("no spectral peak: the signal is zero".into()));
    }
    let half = 0.5 * pmax;
    let mut left = ipk;
    while left > 0 && power[left - 1] >= half {
        left -= 1;
    }
    let mut right = ipk;
    while right + 1 < n && power[right + 1] >= half {
        right += 1;
    }
    let above = right - left + 1;
    if above < 3 * spec.pad || left == 0 || right + 1 == n {
        return Err(Error::Resolution(format!(
            "peak near {:.6e} Hz spans {above} bin(s) above half maximum; the linewidth is \
             not resolved by this record, use harmonic inversion",
            spec.frequency[ipk]
        )));
    }
    let df = spec.frequency[1] - spec.frequency[0];
    let cross = |a: usize, b: usize| -> f64 {
        // linear interpolation of the half-power crossing between bins a and b
        let t = (half - power[a]) / (power[b] - power[a]);
        spec.frequency[a] + t * (spec.frequency[b] - spec.frequency[a])
    };
    let f_lo = cross(left - 1, left);
    let f_hi = cross(right + 1, right);
    // parabolic refinement of the peak position on log power
    let fpk = if ipk > 0 && ipk + 1 < n && power[ipk - 1] > 0.0 && power[ipk + 1] > 0.0 {
        let (a, b, c) = (power[ipk - 1].ln(), pmax.ln(), power[ipk + 1].ln());
        let denom = a - 2.0 * b + c;
        let delta = if denom.abs() > 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
        spec.frequency[ipk] + delta.clamp(-0.5, 0.5) * df
    } else {
        spec.frequency[ipk]
    };
    let fwhm = f_hi - f_lo;
    Ok(PeakQ {
        frequency: fpk,
        fwhm,
        q: fpk / fwhm,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeEstimate {
    /// Hz
    pub frequency: f64,
    pub reduced: Option<f64>,
    /// Amplitude decay rate (1/s).
    pub decay: f64,
    /// `πf/decay`; negative for growing modes.
    pub q: f64,
    pub amplitude: f64,
    pub phase: f64,
    /// Relative disagreement between two pencil sizes.
    pub error: f64,
    pub growing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InversionOptions {
    pub max_modes: usize,
    /// Singular values below this fraction of the largest are treated as noise.
    pub sv_threshold: f64,
    pub min_relative_amplitude: f64,
    pub max_error: f64,
    /// Upper bound on samples entering the pencil.
    pub max_samples: usize,
}

impl Default for InversionOptions {
    fn default() -> Self {
        Self {
            max_modes: 20,
            sv_threshold: 1e-10,
            min_relative_amplitude: 1e-4,
            max_error: 1e-2,
            max_samples: 1000,
        }
    }
}

/// Poles `s = ln z` (per sample) and complex amplitudes of `x_n = Σ c_k z_k^n`.
fn pencil(x: &[Complex64], order: usize, pencil_len: usize, sv_threshold: f64) -> Result<Vec<Complex64>> {
    let n = x.len();
    let l = pencil_len.clamp(1, n - 2);
    let rows = n - l;
    let y = DMatrix::from_fn(rows, l + 1, |r, c| x[r + c]);
    let svd = y.svd(false, true);
    let vt = svd
        .v_t
        .ok_or_else(|| Error::Numeric("SVD failed in the matrix pencil".into()))?;
    let sv = &svd.singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if !(smax > 0.0) {
        return Ok(Vec::new());
    }
    let mut idx: Vec<usize> = (0..sv.len()).collect();
    idx.sort_by(|&a, &b| sv[b].partial_cmp(&sv[a]).unwrap());
    let rank = idx.iter().take_while(|&&i| sv[i] > sv_threshold * smax).count();
    let m = rank.min(order).min(l).max(1);
    // rows of Y lie in the span of the rows of V^H
    let v = DMatrix::from_fn(l + 1, m, |r, c| vt[(idx[c], r)]);
    let v1 = v.rows(0, l).into_owned();
    let v2 = v.rows(1, l).into_owned();
    // least squares v1·Z = v2 by Householder QR
    let qr = v1.qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..m).map(|i| r[(i, i)].norm()).collect();
    let dmax = diag.iter().cloned().fold(0.0, f64::max);
    let dmin = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(dmin > 1e-13 * dmax) {
        return Err(Error::Numeric(format!(
            "matrix pencil is ill-conditioned (condition estimate {:.3e})",
            dmax / dmin.max(f64::MIN_POSITIVE)
        )));
    }
    let zmat = r
        .solve_upper_triangular(&(qr.q().adjoint() * v2))
        .ok_or_else(|| Error::Numeric("matrix pencil solve failed".into()))?;
    let eig = zmat
        .schur()
        .eigenvalues()
        .ok_or_else(|| Error::Numeric("pencil eigenvalues did not converge".into()))?;
    Ok(eig.iter().map(|z| z.ln()).collect())
}

fn amplitudes(x: &[Complex64], poles: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = x.len();
    let m = poles.len();
    let a = DMatrix::from_fn(n, m, |r, c| (poles[c] * r as f64).exp());
    let b = DMatrix::from_fn(n, 1, |r, _| x[r]);
    let svd = a.svd(true, true);
    let sol = svd
        .solve(&b, 1e-14 * svd.singular_values.max())
        .map_err(|e| Error::Numeric(format!("amplitude solve failed: {e}")))?;
    Ok(sol.iter().cloned().collect())
}

/// Windowed-sinc low-pass taps with cutoff `fc` (cycles per sample).
fn lowpass(fc: f64, taps: usize) -> Vec<f64> {
    let mid = (taps - 1) as f64 / 2.0;
    let mut h: Vec<f64> = (0..taps)
        .map(|j| {
            let t = j as f64 - mid;
            let sinc = if t == 0.0 {
                2.0 * fc
            } else {
                (2.0 * PI * fc * t).sin() / (PI * t)
            };
            let w = 0.42 - 0.5 * (2.0 * PI * j as f64 / (taps - 1) as f64).cos()
                + 0.08 * (4.0 * PI * j as f64 / (taps - 1) as f64).cos();
            sinc * w
        })
        .collect();
    let sum: f64 = h.iter().sum();
    h.iter_mut().for_each(|v| *v /= sum);
    h
}

/// Signal prepared for the pencil: complex samples, sample interval,
/// carrier frequency, and the per-pole gain that maps fitted amplitudes back
/// to the original record.
struct Prepared {
    x: Vec<Complex64>,
    dt: f64,
    carrier: f64,
    /// Filter taps and decimation, if band-limited.
    filter: Option<(Vec<f64>, usize, usize)>,
}

fn prepare(signal: &RingdownSignal, max_samples: usize) -> Prepared {
    match signal.band {
        None => {
            let n = signal.samples.len().min(max_samples.max(MIN_SAMPLES));
            Prepared {
                x: signal.samples[..n].iter().map(|&v| Complex64::new(v, 0.0)).collect(),
                dt: signal.dt,
                carrier: 0.0,
                filter: None,
            }
        }
        Some((lo, hi)) => {
            let dt = signal.dt;
            let carrier = 0.5 * (lo + hi);
            let bw = (hi - lo) * dt; // cycles per sample
            let fc = 0.55 * bw;
            let transition = 0.25 * bw;
            let n = signal.samples.len();
            // short records get a wider transition band rather than no output
            let taps = ((5.5 / transition).ceil() as usize).min(n / 3).max(16) | 1;
            let h = lowpass(fc, taps);
            let avail = n.saturating_sub(taps - 1);
            let mut dec = ((1.0 / (2.0 * bw)).floor() as usize)
                .min(avail / (4 * MIN_SAMPLES))
                .max(1);
            let alias_limit = ((1.0 / (1.25 * bw)).floor() as usize).max(1);
            if avail / dec > max_samples {
                dec = dec.max(avail.div_ceil(max_samples)).min(alias_limit);
            }
            let count = if avail == 0 {
                0
            } else {
                ((avail - 1) / dec + 1).min(max_samples)
            };
            let mixed: Vec<Complex64> = signal
                .samples
                .iter()
                .enumerate()
                .map(|(i, &v)| v * Complex64::from_polar(1.0, -2.0 * PI * carrier * i as f64 * dt))
                .collect();
            let x = (0..count)
                .map(|m| {
                    let end = taps - 1 + m * dec;
                    let mut acc = Complex64::default();
                    for (j, hj) in h.iter().enumerate() {
                        acc += mixed[end - j] * *hj;
                    }
                    acc
                })
                .collect();
            Prepared {
                x,
                dt: dt * dec as f64,
                carrier,
                filter: Some((h, dec, taps - 1)),
            }
        }
    }
}

/// Fit the ringdown as a sum of damped sinusoids.
pub fn harmonic_inversion(signal: &RingdownSignal, opts: &InversionOptions) -> Result<Vec<ModeEstimate>> {
    signal.validate()?;
    let prep = prepare(signal, opts.max_samples);
    let n = prep.x.len();
    if n < 16 {
        return Err(Error::Domain(format!(
            "only {n} samples remain after band-limiting; record too short for the band"
        )));
    }
    let real_input = prep.filter.is_none();
    let order = if real_input {
        2 * opts.max_modes + 1
    } else {
        opts.max_modes
    };
    let poles_a = pencil(&prep.x, order, n / 3, opts.sv_threshold)?;
    let poles_b = pencil(&prep.x, order, n / 2, opts.sv_threshold)?;
    let amps = amplitudes(&prep.x, &poles_a)?;

    let mut modes = Vec::new();
    for (&s, &c) in poles_a.iter().zip(&amps) {
        let scale = s.norm() + 2.0 * PI / n as f64;
        let error = poles_b.iter().map(|t| (t - s).norm()).fold(f64::INFINITY, f64::min) / scale;
        let freq_base = s.im / (2.0 * PI * prep.dt);
        let decay = -s.re / prep.dt;
        let (frequency, amp) = match &prep.filter {
            None => (freq_base, c),
            Some((h, _, delay)) => {
                // undo the filter gain and the transient offset
                let s0 = s / (prep.dt / signal.dt);
                let gain: Complex64 = h.iter().enumerate().map(|(j, &hj)| hj * (-s0 * j as f64).exp()).sum();
                let shift = (s0 * *delay as f64).exp();
                (prep.carrier + freq_base, c / (gain * shift))
            }
        };
        if frequency < -1e-9 / signal.dt && real_input {
            continue;
        }
        let positive = frequency.abs() * signal.dt > 1e-9;
        let amp = if positive { 2.0 * amp } else { amp };
        let q = if decay == 0.0 {
            f64::INFINITY
        } else {
            PI * frequency / decay
        };
        modes.push(ModeEstimate {
            frequency: if positive { frequency } else { 0.0 },
            reduced: signal.reduced(frequency),
            decay,
            q,
            amplitude: amp.norm(),
            phase: amp.arg(),
            error,
            growing: decay < 0.0,
        });
    }
    if let Some((lo, hi)) = signal.band {
        modes.retain(|m| m.frequency >= lo && m.frequency <= hi);
    }
    let amax = modes.iter().map(|m| m.amplitude).fold(0.0, f64::max);
    modes.retain(|m| m.amplitude >= opts.min_relative_amplitude * amax && m.error <= opts.max_error);
    modes.sort_by(|a, b| b.amplitude.partial_cmp(&a.amplitude).unwrap());
    modes.truncate(opts.max_modes);
    Ok(modes)
}

/// `frequency_hz,c_over_lambda,lambda_nm,q,amplitude,error` rows.
pub fn mode_table_csv(modes: &[ModeEstimate]) -> String {
    let mut s = String::from("frequency_hz,c_over_lambda,lambda_nm,q,amplitude,error\n");
    for m in modes {
        let red = m.reduced.map_or("n/a".to_string(), |r| format!("{r:.6}"));
        let lam = if m.frequency > 0.0 {
            format!("{:.4}", C0 / m.frequency * 1e9)
        } else {
            "inf".into()
        };
        let _ = writeln!(
            s,
            "{:.9e},{},{},{:.6e},{:.6e},{:.3e}",
            m.frequency, red, lam, m.q, m.amplitude, m.error
        );
    }
    s
}

/// Damped sinusoids `Σ A cos(2πft + φ)·exp(−πft/Q)` sampled at `dt`.
pub fn synthesize(modes: &[(f64, f64, f64, f64)], dt: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let t = i as f64 * dt;
            modes
                .iter()
                .map(|&(f, q, a, phi)| a * (2.0 * PI * f * t + phi).cos() * (-PI * f * t / q).exp())
                .sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sinusoid_peak_bin() {
        let dt = 1e-3;
        let f0 = 123.4;
        let x: Vec<f64> = (0..8192).map(|i| (2.0 * PI * f0 * i as f64 * dt).sin()).collect();
        let s = fft_spectrum(&RingdownSignal::new(x, dt), Window::Hann, 1).unwrap();
        let ipk = (0..s.magnitude.len())
            .max_by(|&a, &b| s.magnitude[a].partial_cmp(&s.magnitude[b]).unwrap())
            .unwrap();
        assert!((s.frequency[ipk] - f0).abs() <= s.resolution);
    }

    #[test]
    fn zero_signal_and_short_signal() {
        let s = fft_spectrum(&RingdownSignal::new(vec![0.0; 128], 1.0), Window::Hann, 1).unwrap();
        assert!(s.magnitude.iter().all(|&m| m == 0.0));
        assert!(matches!(
            fft_spectrum(&RingdownSignal::new(vec![0.0; 10], 1.0), Window::Hann, 1),
            Err(Error::Domain(_))
        ));
        assert!(matches!(q_from_peak(&s, PeakSelector::Max), Err(Error::Resolution(_))));
    }

    #[test]
    fn q_from_resolved_peak() {
        let f0 = 0.05;
        let x = synthesize(&[(f0, 100.0, 1.0, 0.3)], 1.0, 40_000);
        let s = fft_spectrum(&RingdownSignal::new(x, 1.0), Window::Rectangular, 1).unwrap();
        let pk = q_from_peak(&s, PeakSelector::Max).unwrap();
        assert!((pk.q - 100.0).abs() < 5.0, "{pk:?}");
        assert!((pk.frequency - f0).abs() < 1e-4);
    }

    #[test]
    fn q_unresolved() {
        let x = synthesize(&[(0.05, 1e6, 1.0, 0.0)], 1.0, 20_000);
        let s = fft_spectrum(&RingdownSignal::new(x, 1.0), Window::Rectangular, 1).unwrap();
        assert!(matches!(q_from_peak(&s, PeakSelector::Max), Err(Error::Resolution(_))));
    }

    #[test]
    fn white_noise_has_no_peak() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let x: Vec<f64> = (0..4096).map(|_| rng.random::<f64>() - 0.5).collect();
        let s = fft_spectrum(&RingdownSignal::new(x, 1.0), Window::Rectangular, 1).unwrap();
        assert!(matches!(q_from_peak(&s, PeakSelector::Max), Err(Error::Resolution(_))));
    }

    #[test]
    fn three_modes() {
        let modes = [(0.11, 1e3, 1.0, 0.2), (0.19, 1e4, 0.7, 1.0), (0.31, 1e5, 0.5, -0.4)];
        let x = synthesize(&modes, 1.0, 900);
        let out = harmonic_inversion(&RingdownSignal::new(x, 1.0), &InversionOptions::default()).unwrap();
        assert_eq!(out.len(), 3, "{out:?}");
        for &(f, q, a, _) in &modes {
            let m = out.iter().find(|m| (m.frequency - f).abs() < 1e-3).unwrap();
            assert!(((m.frequency - f) / f).abs() < 1e-4);
            assert!(((m.q - q) / q).abs() < 1e-2);
            assert!(((m.amplitude - a) / a).abs() < 1e-6);
        }
    }

    #[test]
    fn dc_signal() {
        let out =
            harmonic_inversion(&RingdownSignal::new(vec![2.5; 200], 1.0), &InversionOptions::default()).unwrap();
        assert_eq!(out.len(), 1);
        assert!(out[0].frequency.abs() < 1e-12);
        assert!(out[0].decay.abs() < 1e-10);
        assert!((out[0].amplitude - 2.5).abs() < 1e-9);
    }

    #[test]
    fn growing_mode_is_flagged() {
        let x = synthesize(&[(0.1, -500.0, 1.0, 0.0)], 1.0, 300);
        let out = harmonic_inversion(&RingdownSignal::new(x, 1.0), &InversionOptions::default()).unwrap();
        assert_eq!(out.len(), 1);
        assert!(out[0].growing && out[0].q < 0.0);
        assert!(((out[0].q + 500.0) / 500.0).abs() < 1e-6);
    }

    #[test]
    fn band_limited_long_record() {
        // many samples per period, as from a time-stepping run
        let dt = 1.0 / 80.0;
        let modes = [(1.0, 2e4, 1.0, 0.5), (1.35, 300.0, 2.0, 0.0), (0.4, 50.0, 3.0, 0.0)];
        let x = synthesize(&modes, dt, 60_000);
        let mut sig = RingdownSignal::new(x, dt);
        sig.band = Some((0.9, 1.1));
        let out = harmonic_inversion(&sig, &InversionOptions::default()).unwrap();
        assert_eq!(out.len(), 1, "{out:?}");
        assert!(((out[0].frequency - 1.0) / 1.0).abs() < 1e-6);
        assert!(((out[0].q - 2e4) / 2e4).abs() < 1e-3, "{:?}", out[0]);
        assert!((out[0].amplitude - 1.0).abs() < 1e-3, "{:?}", out[0]);
    }

    #[test]
    fn band_limited_short_record() {
        // about 75 samples per period and 50 periods, as early in a ringdown
        let dt = 1.0 / 75.0;
        let modes = [(1.0, 2e3, 1.0, 0.2), (0.6, 80.0, 3.0, 0.0)];
        let mut sig = RingdownSignal::new(synthesize(&modes, dt, 3900), dt);
        sig.band = Some((0.92, 1.08));
        let out = harmonic_inversion(&sig, &InversionOptions::default()).unwrap();
        let m = &out[0];
        assert!((m.frequency - 1.0).abs() < 1e-4, "{out:?}");
        assert!(((m.q - 2e3) / 2e3).abs() < 0.02, "{out:?}");
    }

    #[test]
    fn band_limited_mode_off_centre() {
        let dt = 1.0 / 22.0;
        let mut sig = RingdownSignal::new(synthesize(&[(1.0, 5e3, 1.0, 0.4)], dt, 6000), dt);
        sig.band = Some((0.9, 1.02));
        let out = harmonic_inversion(&sig, &InversionOptions::default()).unwrap();
        assert!((out[0].frequency - 1.0).abs() < 1e-6, "{out:?}");
        assert!(((out[0].q - 5e3) / 5e3).abs() < 1e-4, "{out:?}");
        assert!((out[0].amplitude - 1.0).abs() < 1e-4, "{out:?}");
        assert!((out[0].phase - 0.4).abs() < 1e-4, "{out:?}");
    }

    #[test]
    fn two_modes_exact_on_a_short_clean_record() {
        let truth = [(0.0835392, 2249.4, 0.31, 2.63), (0.3314027, 334.8, 0.43, 0.54)];
        let sig = RingdownSignal::new(synthesize(&truth, 1.0, 1000), 1.0);
        let out = harmonic_inversion(&sig, &InversionOptions::default()).unwrap();
        assert_eq!(out.len(), 2);
        for (f, q, a, _) in truth {
            let m = out.iter().find(|m| (m.frequency - f).abs() < 1e-3).unwrap();
            assert!(((m.frequency - f) / f).abs() < 1e-10, "{m:?}");
            assert!(((m.q - q) / q).abs() < 1e-8, "{m:?}");
            assert!((m.amplitude - a).abs() < 1e-8, "{m:?}");
        }
    }
}
