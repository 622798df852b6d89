use proptest::prelude::*;
use woodpile_core::geometry::{
    build_scene, primitive_cell, voxelize, DefectPreset, GridLayout, Sampling, VoxelOptions, WoodpileSpec,
};

fn bulk() -> WoodpileSpec {
    WoodpileSpec::fcc(1.0, 0.2145).with_counts(13, 9)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Deep inside a finite crystal, every primitive translation maps the
    /// index field onto itself.
    #[test]
    fn bulk_scene_is_lattice_periodic(
        p in prop::array::uniform3(-0.5f64..0.5),
        t in prop::array::uniform3(-1i32..=1),
    ) {
        let spec = bulk();
        let scene = build_scene(&spec).unwrap();
        let cell = primitive_cell(&spec).unwrap();
        let v = cell.vectors;
        let shift = [0, 1, 2].map(|i| (0..3).map(|j| t[j] as f64 * v[j][i]).sum::<f64>());
        let q = [p[0] + shift[0], p[1] + shift[1], p[2] + shift[2]];
        prop_assert_eq!(scene.index_at(p), scene.index_at(q));
        // the finite scene is offset from the cell by (a/4, a/2, 0)
        let o = [p[0] - 0.25 * spec.a, p[1] - 0.5 * spec.a, p[2]];
        prop_assert_eq!(scene.index_at(p), cell.index_at(o));
    }

    /// The D1 scene is mirror symmetric about the plane through the defect
    /// centre normal to x.
    #[test]
    fn d1_scene_mirror(p in prop::array::uniform3(-1.2f64..1.2)) {
        let spec = WoodpileSpec::fcc(1.0, 0.2145).with_counts(9, 7).with_defect_preset(DefectPreset::D1);
        let scene = build_scene(&spec).unwrap();
        let x0 = scene.defect().unwrap().center()[0];
        let m = [2.0 * x0 - p[0], p[1], p[2]];
        prop_assert_eq!(scene.index_at(p), scene.index_at(m));
    }

    /// Uniform rescaling of the spec rescales the index field.
    #[test]
    fn scaled_spec_scales_the_scene(p in prop::array::uniform3(-1.5f64..1.5), s in 0.2f64..5.0) {
        let spec = WoodpileSpec::fcc(1.0, 0.2145).with_counts(9, 7).with_defect_preset(DefectPreset::D2);
        let a = build_scene(&spec).unwrap();
        let b = build_scene(&spec.scaled(s)).unwrap();
        prop_assert_eq!(a.index_at(p), b.index_at([p[0] * s, p[1] * s, p[2] * s]));
    }
}

/// Fraction of rod cells in an `a × a × c` box, which tiles the crystal.
fn voxel_fill(spec: &WoodpileSpec, n: usize) -> f64 {
    let scene = build_scene(spec).unwrap();
    let nz = ((n as f64) * spec.c / spec.a).round() as usize;
    let layout = GridLayout {
        dims: [n, n, nz],
        spacing: [spec.a / n as f64, spec.a / n as f64, spec.c / nz as f64],
        origin: [0.1 * spec.a, 0.3 * spec.a, -0.2 * spec.c],
    };
    let grid = voxelize(
        &scene,
        layout,
        VoxelOptions {
            sampling: Sampling::Point,
            ..Default::default()
        },
    )
    .unwrap();
    let rod = spec.n_rod * spec.n_rod;
    grid.eps.iter().filter(|&&e| (e - rod).abs() < 1e-12).count() as f64 / grid.eps.len() as f64
}

#[test]
fn voxel_fill_converges_to_analytic() {
    let spec = bulk();
    let exact = primitive_cell(&spec).unwrap().fill_fraction();
    let errs: Vec<f64> = [12, 24, 48, 96]
        .iter()
        .map(|&n| (voxel_fill(&spec, n) - exact).abs())
        .collect();
    // first order: each doubling should at least roughly halve the error
    assert!(errs[3] < 0.5 * errs[0] / 2.0, "{errs:?} vs {exact}");
    assert!(errs[3] < 2e-2, "{errs:?}");
}
