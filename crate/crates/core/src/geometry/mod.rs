//! Woodpile crystal description, scene construction and voxelization.
//!
//! A woodpile is a stack of rod gratings. Every layer holds parallel rods of
//! rectangular cross-section `w × h` at pitch `a`; consecutive layers are
//! rotated by 90° and every second layer is shifted by `a/2`, so the stack
//! repeats after four layers (the stacking period `c`).
//!
//! All lengths are in metres. The finite scene is centred on the defect
//! site: the middle layer lies at `z = 0`, its rods run along `x` and sit at
//! `y = ±a/2, ±3a/2, …`, and the layer directly above has a rod at `x = 0`.

mod cell;
mod scene;
mod voxel;

pub use cell::{primitive_cell, Rod, UnitCell};
pub use scene::{build_scene, Cuboid, CuboidKind, Scene};
pub use voxel::{read_grid, voxelize, write_grid, DielectricGrid, GridHeader, GridLayout, Sampling, VoxelOptions};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used when matching `c/a` against the cubic special cases.
pub const LATTICE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LatticeClass {
    /// `c/a = 1`
    Bcc,
    /// `c/a = √2`
    Fcc,
    CenteredTetragonal,
}

/// Classify the Bravais lattice of an infinite woodpile from its `c/a` ratio.
pub fn classify_lattice(c_over_a: f64) -> Result<LatticeClass> {
    if !(c_over_a > 0.0) || !c_over_a.is_finite() {
        return Err(Error::Domain(format!(
            "c/a must be positive and finite, got {c_over_a}"
        )));
    }
    let close = |target: f64| ((c_over_a - target) / target).abs() < LATTICE_TOLERANCE;
    Ok(if close(1.0) {
        LatticeClass::Bcc
    } else if close(std::f64::consts::SQRT_2) {
        LatticeClass::Fcc
    } else {
        LatticeClass::CenteredTetragonal
    })
}

/// Rod direction of a layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RodAxis {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DefectPreset {
    D0,
    D1,
    D2,
}

impl DefectPreset {
    /// Defect size in units of the stacking period `c`.
    pub fn size_over_c(self) -> [f64; 3] {
        match self {
            DefectPreset::D0 => [0.25, 0.25, 0.5],
            DefectPreset::D1 => [0.5, 0.5, 0.25],
            DefectPreset::D2 => [0.5, 0.5, 0.5],
        }
    }
}

impl std::str::FromStr for DefectPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "D0" | "d0" => Ok(DefectPreset::D0),
            "D1" | "d1" => Ok(DefectPreset::D1),
            "D2" | "d2" => Ok(DefectPreset::D2),
            other => Err(Error::Config(format!("unknown defect preset `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BufferPreset {
    A0,
    A1,
    A2,
}

impl std::str::FromStr for BufferPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A0" | "a0" => Ok(BufferPreset::A0),
            "A1" | "a1" => Ok(BufferPreset::A1),
            "A2" | "a2" => Ok(BufferPreset::A2),
            other => Err(Error::Config(format!("unknown air-buffer preset `{other}`"))),
        }
    }
}

/// Dielectric cuboid inserted at the cavity site.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DefectSpec {
    /// `(d_x, d_y, d_z)`
    pub size: [f64; 3],
    /// Displacement from the canonical site (between two middle-layer rods,
    /// under a rod of the layer above). Zero for every preset.
    pub offset: [f64; 3],
}

impl DefectSpec {
    pub fn new(size: [f64; 3]) -> Self {
        Self { size, offset: [0.0; 3] }
    }

    pub fn preset(preset: DefectPreset, c: f64) -> Self {
        let f = preset.size_over_c();
        Self::new([f[0] * c, f[1] * c, f[2] * c])
    }
}

/// Low-index cuboid carved around the defect.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BufferSpec {
    /// `(b_x, b_y, b_z)`
    pub size: [f64; 3],
}

impl BufferSpec {
    pub fn preset(preset: BufferPreset, a: f64, w: f64, c: f64) -> Self {
        let lateral = match preset {
            BufferPreset::A0 => a - 0.5 * w,
            BufferPreset::A1 => a,
            BufferPreset::A2 => a + 0.5 * w,
        };
        Self {
            size: [lateral, lateral, 0.25 * c],
        }
    }
}

/// How the rod count alternates between `N_rl` and `N_rl + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum RodCountRule {
    /// Each layer gets whichever of `N_rl`, `N_rl + 1` lets its rods sit
    /// symmetrically about the defect site: layers with a rod on the
    /// centre line get the odd count, the others the even count.
    #[default]
    Symmetric,
    /// Layers with rods along `x` get `N_rl + 1`, layers along `y` get `N_rl`.
    ByDirection,
}

/// Parametric description of a finite woodpile crystal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WoodpileSpec {
    /// Stacking period (four layers).
    pub c: f64,
    /// In-layer rod pitch.
    pub a: f64,
    /// Rod width.
    pub w: f64,
    /// Rod height.
    pub h: f64,
    pub layers: usize,
    pub rods_per_layer: usize,
    pub n_rod: f64,
    pub n_defect: f64,
    pub n_background: f64,
    pub defect: Option<DefectSpec>,
    pub buffer: Option<BufferSpec>,
    pub rod_count_rule: RodCountRule,
}

impl WoodpileSpec {
    /// FCC woodpile (`c/a = √2`, `h = c/4`) in GaP-like rods (`n = 3.3`) and
    /// air backfill, 37 layers of 13 rods.
    pub fn fcc(c: f64, w_over_c: f64) -> Self {
        Self {
            c,
            a: c / std::f64::consts::SQRT_2,
            w: w_over_c * c,
            h: 0.25 * c,
            layers: 37,
            rods_per_layer: 13,
            n_rod: 3.3,
            n_defect: 3.3,
            n_background: 1.0,
            defect: None,
            buffer: None,
            rod_count_rule: RodCountRule::Symmetric,
        }
    }

    pub fn with_counts(mut self, layers: usize, rods_per_layer: usize) -> Self {
        self.layers = layers;
        self.rods_per_layer = rods_per_layer;
        self
    }

    pub fn with_defect_preset(mut self, preset: DefectPreset) -> Self {
        self.defect = Some(DefectSpec::preset(preset, self.c));
        self
    }

    pub fn with_buffer_preset(mut self, preset: BufferPreset) -> Self {
        self.buffer = Some(BufferSpec::preset(preset, self.a, self.w, self.c));
        self
    }

    pub fn with_w_over_c(mut self, w_over_c: f64) -> Self {
        self.w = w_over_c * self.c;
        self
    }

    /// Same crystal with every length multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.c *= s;
        out.a *= s;
        out.w *= s;
        out.h *= s;
        if let Some(d) = out.defect.as_mut() {
            d.size.iter_mut().for_each(|v| *v *= s);
            d.offset.iter_mut().for_each(|v| *v *= s);
        }
        if let Some(b) = out.buffer.as_mut() {
            b.size.iter_mut().for_each(|v| *v *= s);
        }
        out
    }

    pub fn lattice_class(&self) -> Result<LatticeClass> {
        classify_lattice(self.c / self.a)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("c", self.c), ("a", self.a), ("w", self.w), ("h", self.h)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.w >= self.a {
            return Err(Error::Config(format!(
                "rod width w = {} must be smaller than the pitch a = {}",
                self.w, self.a
            )));
        }
        if self.h > 0.25 * self.c * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "rod height h = {} exceeds the layer spacing c/4 = {}",
                self.h,
                0.25 * self.c
            )));
        }
        for (name, n) in [
            ("n_rod", self.n_rod),
            ("n_defect", self.n_defect),
            ("n_background", self.n_background),
        ] {
            if !(n >= 1.0) {
                return Err(Error::Config(format!("{name} must be ≥ 1, got {n}")));
            }
        }
        if self.layers == 0 || self.rods_per_layer == 0 {
            return Err(Error::Config("layer and rod counts must be positive".into()));
        }
        if let Some(d) = &self.defect {
            if d.size.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::Config(format!("defect size must be positive: {:?}", d.size)));
            }
        }
        if let Some(b) = &self.buffer {
            if b.size.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::Config(format!("buffer size must be positive: {:?}", b.size)));
            }
            if let Some(d) = &self.defect {
                if (0..3).any(|i| b.size[i] < d.size[i]) {
                    return Err(Error::Config(format!(
                        "air buffer {:?} does not enclose the defect {:?}",
                        b.size, d.size
                    )));
                }
            }
        }
        if (self.defect.is_some() || self.buffer.is_some()) && self.layers < 3 {
            return Err(Error::Config(format!(
                "a defect needs a middle layer with neighbours; {} layer(s) given",
                self.layers
            )));
        }
        Ok(())
    }

    /// Index of the layer holding the defect (0-based, counted from the bottom).
    pub fn middle_layer(&self) -> usize {
        (self.layers - 1) / 2
    }

    /// Rod direction of layer `k`. The middle layer always runs along `x`.
    pub fn layer_axis(&self, k: usize) -> RodAxis {
        let r = k as i64 - self.middle_layer() as i64;
        if r.rem_euclid(2) == 0 {
            RodAxis::X
        } else {
            RodAxis::Y
        }
    }

    /// `true` when layer `k`'s rods sit on half-integer multiples of `a`
    /// (no rod on the centre line).
    pub fn layer_is_half_shifted(&self, k: usize) -> bool {
        let r = (k as i64 - self.middle_layer() as i64).rem_euclid(4);
        r == 0 || r == 3
    }

    /// Lateral rod centres of layer `k`, in units of `a`.
    pub fn rod_offsets(&self, k: usize) -> Vec<f64> {
        let n = self.rods_per_layer;
        let half = self.layer_is_half_shifted(k);
        let count = match self.rod_count_rule {
            RodCountRule::Symmetric => {
                // half-shifted sublattice needs an even count to be symmetric
                let even = if n % 2 == 0 { n } else { n + 1 };
                let odd = if n % 2 == 1 { n } else { n + 1 };
                if half {
                    even
                } else {
                    odd
                }
            }
            RodCountRule::ByDirection => match self.layer_axis(k) {
                RodAxis::X => n + 1,
                RodAxis::Y => n,
            },
        };
        let shift = if half { 0.5 } else { 0.0 };
        // the `count` sublattice sites nearest to the centre line
        let reach = count as i64 + 1;
        let mut sites: Vec<f64> = (-reach..=reach).map(|j| j as f64 + shift).collect();
        sites.sort_by(|p, q| p.abs().partial_cmp(&q.abs()).unwrap().then(p.partial_cmp(q).unwrap()));
        sites.truncate(count);
        sites.sort_by(|p, q| p.partial_cmp(q).unwrap());
        sites
    }

    /// Total lateral extent of the crystal (rod length).
    pub fn lateral_extent(&self) -> f64 {
        let n = self.rods_per_layer;
        let even = if n % 2 == 0 { n } else { n + 1 };
        even as f64 * self.a
    }

    /// Centre height of layer `k`.
    pub fn layer_z(&self, k: usize) -> f64 {
        (k as f64 - self.middle_layer() as f64) * 0.25 * self.c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification_examples() {
        assert_eq!(classify_lattice(1.0).unwrap(), LatticeClass::Bcc);
        assert_eq!(classify_lattice(std::f64::consts::SQRT_2).unwrap(), LatticeClass::Fcc);
        assert_eq!(classify_lattice(1.2).unwrap(), LatticeClass::CenteredTetragonal);
        assert!(matches!(classify_lattice(0.0), Err(Error::Domain(_))));
        assert!(matches!(classify_lattice(-1.0), Err(Error::Domain(_))));
        // relative tolerance is tight
        assert_eq!(classify_lattice(1.0 + 1e-6).unwrap(), LatticeClass::CenteredTetragonal);
    }

    #[test]
    fn reference_dimensions() {
        let spec = WoodpileSpec::fcc(335.8e-9, 0.2145);
        assert!((spec.w - 72.0e-9).abs() < 0.5e-9);
        assert!((spec.h - 84.0e-9).abs() < 0.5e-9);
        assert!((spec.a - 237.0e-9).abs() < 0.5e-9);
        assert_eq!(spec.lattice_class().unwrap(), LatticeClass::Fcc);
        spec.validate().unwrap();
    }

    #[test]
    fn presets_match_captions() {
        let c = 1.0;
        let spec = WoodpileSpec::fcc(c, 0.2145);
        assert_eq!(DefectSpec::preset(DefectPreset::D0, c).size, [0.25, 0.25, 0.5]);
        assert_eq!(DefectSpec::preset(DefectPreset::D1, c).size, [0.5, 0.5, 0.25]);
        assert_eq!(DefectSpec::preset(DefectPreset::D2, c).size, [0.5, 0.5, 0.5]);
        let (a, w) = (spec.a, spec.w);
        assert_eq!(
            BufferSpec::preset(BufferPreset::A0, a, w, c).size,
            [a - 0.5 * w, a - 0.5 * w, 0.25]
        );
        assert_eq!(BufferSpec::preset(BufferPreset::A1, a, w, c).size, [a, a, 0.25]);
        assert_eq!(
            BufferSpec::preset(BufferPreset::A2, a, w, c).size,
            [a + 0.5 * w, a + 0.5 * w, 0.25]
        );
    }

    #[test]
    fn rod_counts_alternate() {
        let spec = WoodpileSpec::fcc(1.0, 0.2145).with_counts(17, 7);
        let counts: Vec<usize> = (0..17).map(|k| spec.rod_offsets(k).len()).collect();
        assert!(counts.iter().all(|&n| n == 7 || n == 8));
        assert!(counts.contains(&7) && counts.contains(&8));
        // every layer symmetric about the centre line
        for k in 0..17 {
            let offs = spec.rod_offsets(k);
            let sum: f64 = offs.iter().sum();
            assert!(sum.abs() < 1e-12, "layer {k} not centred: {offs:?}");
        }
        let mid = spec.middle_layer();
        assert_eq!(spec.layer_axis(mid), RodAxis::X);
        assert!(spec.rod_offsets(mid).contains(&0.5));
        assert!(spec.rod_offsets(mid + 1).contains(&0.0));
    }

    #[test]
    fn by_direction_rule() {
        let mut spec = WoodpileSpec::fcc(1.0, 0.2145).with_counts(5, 4);
        spec.rod_count_rule = RodCountRule::ByDirection;
        for k in 0..5 {
            let n = spec.rod_offsets(k).len();
            match spec.layer_axis(k) {
                RodAxis::X => assert_eq!(n, 5),
                RodAxis::Y => assert_eq!(n, 4),
            }
        }
    }

    #[test]
    fn validation_errors() {
        let spec = WoodpileSpec::fcc(1.0, 0.2145);
        let mut bad = spec.clone();
        bad.w = bad.a * 1.01;
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
        let bad = spec.clone().with_counts(2, 5).with_defect_preset(DefectPreset::D1);
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
        let mut bad = spec.clone().with_defect_preset(DefectPreset::D2);
        bad.buffer = Some(BufferSpec::preset(BufferPreset::A0, bad.a, bad.w, bad.c));
        // A0 is only c/4 tall, D2 is c/2 tall
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
    }
}
