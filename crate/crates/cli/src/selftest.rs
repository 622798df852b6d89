//! Quick installation check: small instances of each solver against
//! closed-form or tabulated answers.

use std::f64::consts::PI;

use woodpile_core::constants::C0;
use woodpile_core::cqed::{metrics, tables, EmitterSpec};
use woodpile_core::fdtd::{run, Boundary, Component, DipoleSource, Pulse, SimulationConfig};
use woodpile_core::geometry::{primitive_cell, DielectricGrid, GridLayout, WoodpileSpec};
use woodpile_core::pwe::{band_structure, KPath, PweOptions};
use woodpile_core::specfit::{harmonic_inversion, synthesize, InversionOptions, RingdownSignal};
use woodpile_core::Result;

fn cmp_rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> Check {
    match f() {
        Ok((passed, detail)) => Check { name, passed, detail },
        Err(e) => Check {
            name,
            passed: false,
            detail: e.to_string(),
        },
    }
}

pub fn run_all() -> Vec<Check> {
    vec![
        check("cqed table replay", || {
            let nv = EmitterSpec::nv_centre();
            let mut worst: f64 = 0.0;
            let mut bad = 0;
            for col in tables::COLUMNS.iter() {
                let (Some(cav), Some((_, printed))) = (col.cavity(), col.data) else {
                    continue;
                };
                let m = metrics(&cav, &nv, Some(tables::PERIOD))?;
                for (_, value, text) in tables::compare(&m, &printed) {
                    worst = worst.max(cmp_rel(value, tables::parse(text)));
                    if !tables::matches(value, text) {
                        bad += 1;
                    }
                }
            }
            Ok((
                bad == 0,
                format!("{bad} mismatches, largest deviation {:.2}%", 100.0 * worst),
            ))
        }),
        check("plane waves in a uniform medium", || {
            let n = 2.0;
            let mut spec = WoodpileSpec::fcc(1.0, 0.2145);
            spec.n_rod = n;
            spec.n_background = n;
            let cell = primitive_cell(&spec)?;
            let path = KPath::from_labels(&["X", "U'", "L"], &cell, 2)?;
            let opts = PweOptions {
                cutoff: 3.0,
                n_bands: 2,
                ..PweOptions::default()
            };
            let bands = band_structure(&cell, &path, &opts)?;
            let unit = cell.scaled(1.0 / cell.c);
            let mut worst: f64 = 0.0;
            for (s, f) in bands.samples.iter().zip(&bands.frequencies) {
                let k = woodpile_core::pwe::KPoint {
                    label: s.label.clone(),
                    frac: s.frac,
                }
                .cartesian(&unit);
                let expect = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt() / (2.0 * PI * n);
                worst = worst.max(cmp_rel(f[0], expect));
            }
            Ok((worst < 1e-3, format!("largest deviation {:.2e}", worst)))
        }),
        check("harmonic inversion round trip", || {
            let dt = 0.05;
            let truth = [(0.11, 2.0e3, 1.0, 0.3), (0.17, 5.0e4, 0.5, -1.0)];
            let sig = RingdownSignal::new(synthesize(&truth, dt, 4000), dt);
            let modes = harmonic_inversion(&sig, &InversionOptions::default())?;
            let mut ok = modes.len() == 2;
            let mut worst: f64 = 0.0;
            for (f, q, _, _) in truth {
                match modes
                    .iter()
                    .min_by(|a, b| (a.frequency - f).abs().total_cmp(&(b.frequency - f).abs()))
                {
                    Some(m) => {
                        worst = worst.max(cmp_rel(m.q, q));
                        ok &= cmp_rel(m.frequency, f) < 1e-4 && cmp_rel(m.q, q) < 1e-2;
                    }
                    None => ok = false,
                }
            }
            Ok((ok, format!("{} modes, largest Q deviation {:.2e}", modes.len(), worst)))
        }),
        check("FDTD energy in a closed box", || {
            let d = 1e-8;
            let layout = GridLayout {
                dims: [16; 3],
                spacing: [d; 3],
                origin: [-8.0 * d; 3],
            };
            let f0 = C0 / (12.0 * d);
            let src = DipoleSource {
                position: [0.0; 3],
                orientation: Component::Ez,
                pulse: Pulse {
                    center: f0,
                    bandwidth: f0,
                    delay: None,
                },
                amplitude: 1.0,
            };
            let mut cfg = SimulationConfig::new(DielectricGrid::uniform(layout, 1.0), src, 1000);
            cfg.boundary = Boundary::Pec;
            cfg.energy_stride = 10;
            let res = run(&cfg)?;
            let after: Vec<f64> = res
                .energy
                .iter()
                .filter(|s| s.time > res.source_off + res.dt)
                .map(|s| s.energy)
                .collect();
            let e0 = after.first().copied().unwrap_or(0.0);
            let drift = after.iter().map(|e| ((e - e0) / e0).abs()).fold(0.0, f64::max);
            Ok((e0 > 0.0 && drift < 1e-8, format!("relative drift {drift:.2e}")))
        }),
    ]
}
