use proptest::prelude::*;
use woodpile_core::cqed::{
    coupling_rate, coupling_rate_from_oscillator, coupling_regime, eigenfrequencies, local_maxima,
    luminescence_spectrum, metrics_table, purcell_factor, purcell_from_rates, tables, CavitySpec, EmitterSpec,
    PurcellMode,
};

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

/// Number of peaks of the luminescence spectrum on a grid fine enough to
/// resolve features of width `min(κ, γ)/20` around `ω₀`.
fn peak_count(kappa: f64, gamma: f64, g: f64) -> usize {
    let omega0 = 1.0;
    let span = 3.0 * (2.0 * g + kappa + gamma);
    let step = kappa.min(gamma).min(g.max(1e-300)) / 40.0;
    let n = ((2.0 * span / step) as usize).clamp(2001, 400_001);
    let omegas: Vec<f64> = (0..n)
        .map(|i| omega0 - span + 2.0 * span * i as f64 / (n - 1) as f64)
        .collect();
    local_maxima(&luminescence_spectrum(&omegas, omega0, kappa, gamma, g)).len()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn coupling_rate_forms_agree(
        lambda in 300e-9f64..1500e-9,
        q in 10f64..1e7,
        v_n in 0.01f64..10.0,
        n_def in 1.0f64..4.0,
        lambda_os in 300e-9f64..1500e-9,
        gamma in 1e5f64..1e10,
        n_os in 1.0f64..3.5,
    ) {
        let cav = CavitySpec { lambda, q, v_eff: v_n * (lambda / n_def).powi(3), n_def };
        let em = EmitterSpec { lambda: lambda_os, gamma, n_os };
        let a = coupling_rate(&cav, &em);
        let b = coupling_rate_from_oscillator(&cav, &em);
        prop_assert!(rel(a, b) < 1e-9, "{a} vs {b}");
        let fp = purcell_factor(&cav, &em, PurcellMode::ApproxFull);
        let direct = 4.0 * a * a / (cav.kappa_at(lambda_os) * em.radiative_rate());
        prop_assert!(rel(fp, direct) < 1e-12);
    }

    #[test]
    fn eigenvalue_sum(omega0 in 1e9f64..1e16, kappa in 1e3f64..1e13, gamma in 1e3f64..1e13, g in 0.0f64..1e13) {
        let (p, m) = eigenfrequencies(omega0, kappa, gamma, g);
        let sum = p + m;
        prop_assert!(rel(sum.re, 2.0 * omega0) < 1e-12);
        prop_assert!(rel(sum.im, -(kappa + gamma) / 2.0) < 1e-12);
    }

    /// Deep in weak coupling the exact linewidth ratio is `1 + F_p`.
    #[test]
    fn purcell_exact_vs_approx(kappa in 1e10f64..1e13, gamma_frac in 1e-5f64..1e-3, ratio in 1e-3f64..0.1) {
        let gamma = gamma_frac * kappa;
        let g = ratio * (kappa + gamma) / 4.0;
        let exact = purcell_from_rates(g, kappa, gamma, PurcellMode::Exact);
        let approx = purcell_from_rates(g, kappa, gamma, PurcellMode::ApproxFull);
        prop_assert!(rel(exact - 1.0, approx) < 0.05, "{exact} vs {approx}");
    }
}

/// Splitting of the spectrum follows the `4g` vs `|κ−γ|` threshold over a
/// sweep from deep weak to deep strong coupling.
#[test]
fn splitting_sweep() {
    let kappa = 1.0e-3;
    let gamma = 0.2e-3;
    let mut split_seen = 0;
    for i in 0..100 {
        let ratio = 10f64.powf(-1.5 + 2.5 * i as f64 / 99.0);
        let g = ratio * (kappa + gamma) / 4.0;
        let regime = coupling_regime(g, kappa, gamma);
        let peaks = peak_count(kappa, gamma, g);
        assert!(peaks >= 1, "ratio {ratio}: no peak");
        if peaks >= 2 {
            split_seen += 1;
            assert!(regime.split, "ratio {ratio}: two peaks below the splitting threshold");
        }
        if regime.ratio > 1.5 {
            assert_eq!(peaks, 2, "ratio {ratio}: splitting not detected");
        }
    }
    assert!(split_seen > 0);
}

#[test]
fn zero_coupling_single_peak_at_centre() {
    let omegas: Vec<f64> = (0..2001).map(|i| 0.99 + 0.02 * i as f64 / 2000.0).collect();
    let s = luminescence_spectrum(&omegas, 1.0, 1e-3, 1e-4, 0.0);
    let peaks = local_maxima(&s);
    assert_eq!(peaks.len(), 1);
    assert!((omegas[peaks[0]] - 1.0).abs() <= 0.02 / 2000.0);
}

#[test]
fn strong_coupling_peaks_at_closed_form() {
    let (omega0, kappa, gamma, g) = (1.0, 2e-4, 1e-5, 1e-3);
    let n = 200_001;
    let omegas: Vec<f64> = (0..n).map(|i| 0.995 + 0.01 * i as f64 / (n - 1) as f64).collect();
    let step = 0.01 / (n - 1) as f64;
    let s = luminescence_spectrum(&omegas, omega0, kappa, gamma, g);
    let peaks = local_maxima(&s);
    assert_eq!(peaks.len(), 2);
    let half = (g * g - ((kappa - gamma) / 4.0).powi(2)).sqrt();
    // peaks sit at the eigenfrequency real parts to within a fraction of the
    // polariton linewidth
    let tol = (kappa + gamma) / 8.0 + step;
    let (lo, hi) = (omegas[peaks[0]] - (omega0 - half), omegas[peaks[1]] - (omega0 + half));
    assert!(lo.abs() <= tol && hi.abs() <= tol, "{lo:e} {hi:e} vs {tol:e}");
    assert!((lo + hi).abs() <= 2.0 * step, "peaks not symmetric: {lo:e} {hi:e}");
}

#[test]
fn tables_replay_with_quoted_ratios() {
    let nv = EmitterSpec::nv_centre();
    let cavities: Vec<(String, CavitySpec)> = tables::COLUMNS
        .iter()
        .filter_map(|c| c.cavity().map(|cav| (c.name(), cav)))
        .collect();
    let specs: Vec<CavitySpec> = cavities.iter().map(|c| c.1).collect();
    let rows = metrics_table(&specs, &nv, Some(tables::PERIOD)).unwrap();
    for ((name, _), m) in cavities.iter().zip(&rows) {
        let col = tables::COLUMNS.iter().find(|c| &c.name() == name).unwrap();
        let (_, printed) = col.data.unwrap();
        for (row, value, text) in tables::compare(m, &printed) {
            assert!(tables::matches(value, text), "{name} {row}: {value} vs {text}");
        }
    }
    for (name, ratio) in tables::QUOTED_RATIOS {
        let i = cavities.iter().position(|c| c.0 == name).unwrap();
        assert!(
            tables::matches(rows[i].ratio, ratio),
            "{name}: {} vs {ratio}",
            rows[i].ratio
        );
    }
    let d1 = &rows[cavities.iter().position(|c| c.0 == "D1/Ex").unwrap()];
    assert!(rel(d1.g_ghz, 6.37) < 0.01 && rel(d1.f_p, 3.56e5) < 0.01 && rel(d1.e_sp, 1.18e6) < 0.01);
    assert!(d1.strong);
}
