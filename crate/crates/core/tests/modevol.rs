use num_complex::Complex64;
use proptest::prelude::*;
use woodpile_core::geometry::GridLayout;
use woodpile_core::modevol::{energy_density, mode_volume, mode_volume_at, normalized_volume, FieldSnapshot};

fn layout(n: usize, d: f64) -> GridLayout {
    GridLayout {
        dims: [n; 3],
        spacing: [d; 3],
        origin: [-0.5 * n as f64 * d; 3],
    }
}

/// `|E| = 1` in the central half of each axis, ε_r = `eps` everywhere.
fn uniform_box(n: usize, d: f64, eps: f64) -> FieldSnapshot {
    let l = layout(n, d);
    let mut ex = vec![Complex64::default(); l.len()];
    for k in n / 4..3 * n / 4 {
        for j in n / 4..3 * n / 4 {
            for i in n / 4..3 * n / 4 {
                ex[l.index(i, j, k)] = Complex64::new(0.6, 0.8);
            }
        }
    }
    FieldSnapshot {
        layout: l,
        e: [
            ex,
            vec![Complex64::default(); l.len()],
            vec![Complex64::default(); l.len()],
        ],
        eps: vec![eps; l.len()],
        frequency: 4.7e14,
    }
}

#[test]
fn uniform_box_at_two_resolutions() {
    // a 1 µm cube of constant field inside a 2 µm box
    for (n, d) in [(8, 0.25e-6), (16, 0.125e-6)] {
        let mv = mode_volume(&uniform_box(n, d, 4.0)).unwrap();
        assert!(((mv.v_eff - 1e-18) / 1e-18).abs() < 1e-12, "{n}: {}", mv.v_eff);
    }
}

#[test]
fn energy_density_uses_relative_permittivity() {
    let snap = uniform_box(8, 1e-7, 4.0);
    let u = energy_density(&snap).unwrap();
    let max = u.iter().cloned().fold(0.0, f64::max);
    assert!((max - 4.0).abs() < 1e-12);
}

#[test]
fn table_volumes_normalize() {
    assert!((normalized_volume(1.17e-21, 638.98e-9, 3.3) - 0.161).abs() < 5e-4);
    assert!((normalized_volume(6.66e-22, 620.86e-9, 3.3) - 0.100).abs() < 5e-4);
}

#[test]
fn file_round_trip_and_crop() {
    let dir = tempfile::tempdir().unwrap();
    let snap = uniform_box(8, 1e-7, 2.25);
    snap.write(&dir.path().join("f.bin"), &dir.path().join("e.bin"))
        .unwrap();
    let back = FieldSnapshot::read(&dir.path().join("f.bin"), &dir.path().join("e.bin")).unwrap();
    assert_eq!(back.e, snap.e);
    assert_eq!(back.eps, snap.eps);
    assert_eq!(back.frequency, snap.frequency);
    // cropping to the lit cube keeps the volume, since the rest is dark
    let inner = snap.crop([2; 3], [6; 3]).unwrap();
    assert_eq!(inner.layout.dims, [4; 3]);
    let a = mode_volume(&snap).unwrap();
    let b = mode_volume(&inner).unwrap();
    assert!(((a.v_eff - b.v_eff) / a.v_eff).abs() < 1e-12);
    assert_eq!(a.argmax_position, b.argmax_position);
    assert!(snap.crop([0; 3], [9, 8, 8]).is_err());
}

fn random_snapshot(seed: &[f64]) -> FieldSnapshot {
    let l = layout(5, 2e-8);
    let n = l.len();
    let pick = |i: usize, o: usize| seed[(i * 7 + o) % seed.len()];
    FieldSnapshot {
        layout: l,
        e: [0, 1, 2].map(|c| (0..n).map(|i| Complex64::new(pick(i, c), pick(i, c + 3))).collect()),
        eps: (0..n).map(|i| 1.0 + 10.0 * pick(i, 6).abs()).collect(),
        frequency: 1e14,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn field_scale_leaves_volume_unchanged(
        seed in prop::collection::vec(-1.0f64..1.0, 11..40),
        s in 1e-6f64..1e6,
    ) {
        let snap = random_snapshot(&seed);
        prop_assume!(energy_density(&snap).unwrap().iter().any(|&u| u > 0.0));
        let mut scaled = snap.clone();
        for c in scaled.e.iter_mut() {
            c.iter_mut().for_each(|z| *z *= s);
        }
        let a = mode_volume(&snap).unwrap();
        let b = mode_volume(&scaled).unwrap();
        prop_assert!(((a.v_eff - b.v_eff) / a.v_eff).abs() < 1e-12);
        prop_assert_eq!(a.argmax, b.argmax);
    }

    /// The volume never drops below one cell and never exceeds the grid, and
    /// the emitter-position variant is never smaller than the global one.
    #[test]
    fn volume_bounds(seed in prop::collection::vec(-1.0f64..1.0, 11..40)) {
        let snap = random_snapshot(&seed);
        prop_assume!(energy_density(&snap).unwrap().iter().any(|&u| u > 0.0));
        let mv = mode_volume(&snap).unwrap();
        let cell = snap.layout.cell_volume();
        prop_assert!(mv.v_eff >= cell * (1.0 - 1e-12));
        prop_assert!(mv.v_eff <= cell * snap.layout.len() as f64 * (1.0 + 1e-12));
        if let Ok(v) = mode_volume_at(&snap, [0.0; 3]) {
            prop_assert!(v >= mv.v_eff * (1.0 - 1e-12));
        }
    }
}
