use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::WoodpileSpec;
use crate::error::{Error, Result};

/// One rod segment of the two-rod basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rod {
    pub center: [f64; 3],
    pub size: [f64; 3],
}

impl Rod {
    fn contains(&self, p: [f64; 3]) -> bool {
        (0..3).all(|i| (p[i] - self.center[i]).abs() <= 0.5 * self.size[i])
    }

    /// `∫_rod exp(-i G·r) d³r`
    pub fn fourier(&self, g: [f64; 3]) -> Complex64 {
        let mut mag = 1.0;
        for i in 0..3 {
            let x = 0.5 * g[i] * self.size[i];
            let sinc = if x.abs() < 1e-12 { 1.0 } else { x.sin() / x };
            mag *= self.size[i] * sinc;
        }
        let phase = -(g[0] * self.center[0] + g[1] * self.center[1] + g[2] * self.center[2]);
        Complex64::from_polar(mag, phase)
    }
}

/// Primitive cell of the infinite woodpile.
///
/// The origin sits on an inversion centre, which makes every Fourier
/// coefficient of ε real. Relative to the finite scene the cell origin is at
/// `(a/4, a/2, 0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitCell {
    pub vectors: [[f64; 3]; 3],
    pub rods: Vec<Rod>,
    pub n_rod: f64,
    pub n_background: f64,
    /// Stacking period, the natural length unit for reduced frequencies.
    pub c: f64,
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

impl UnitCell {
    pub fn volume(&self) -> f64 {
        det3(&self.vectors).abs()
    }

    /// Reciprocal vectors `b_i` with `a_i · b_j = 2π δ_ij`.
    pub fn reciprocal(&self) -> [[f64; 3]; 3] {
        let [a1, a2, a3] = self.vectors;
        let v = det3(&self.vectors);
        let s = 2.0 * PI / v;
        [cross(a2, a3), cross(a3, a1), cross(a1, a2)].map(|b| b.map(|x| x * s))
    }

    /// Fractional coordinates of `p` in the lattice basis.
    pub fn fractional(&self, p: [f64; 3]) -> [f64; 3] {
        let b = self.reciprocal();
        b.map(|bi| (bi[0] * p[0] + bi[1] * p[1] + bi[2] * p[2]) / (2.0 * PI))
    }

    pub fn cartesian(&self, f: [f64; 3]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (fi, ai) in f.iter().zip(&self.vectors) {
            for d in 0..3 {
                out[d] += fi * ai[d];
            }
        }
        out
    }

    /// Refractive index of the infinite crystal at `p`.
    pub fn index_at(&self, p: [f64; 3]) -> f64 {
        let f = self.fractional(p).map(|x| x - x.floor());
        let base = self.cartesian(f);
        for n0 in -1..=1 {
            for n1 in -1..=1 {
                for n2 in -1..=1 {
                    let t = self.cartesian([n0 as f64, n1 as f64, n2 as f64]);
                    let q = [base[0] + t[0], base[1] + t[1], base[2] + t[2]];
                    if self.rods.iter().any(|r| r.contains(q)) {
                        return self.n_rod;
                    }
                }
            }
        }
        self.n_background
    }

    /// Volume fraction occupied by rods.
    pub fn fill_fraction(&self) -> f64 {
        self.rods.iter().map(|r| r.size.iter().product::<f64>()).sum::<f64>() / self.volume()
    }

    /// Fourier coefficient of a two-valued function taking `inside` in the
    /// rods and `outside` elsewhere.
    pub fn fourier_two_phase(&self, g: [f64; 3], inside: f64, outside: f64) -> f64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for r in &self.rods {
            acc += r.fourier(g);
        }
        let mut v = (inside - outside) * acc.re / self.volume();
        if g.iter().all(|x| x.abs() < 1e-300) {
            v += outside;
        }
        v
    }

    /// Fourier coefficient of ε_r at reciprocal vector `g`.
    pub fn eps_fourier(&self, g: [f64; 3]) -> f64 {
        self.fourier_two_phase(g, self.n_rod.powi(2), self.n_background.powi(2))
    }

    /// Fourier coefficient of 1/ε_r at reciprocal vector `g`.
    pub fn inv_eps_fourier(&self, g: [f64; 3]) -> f64 {
        self.fourier_two_phase(g, self.n_rod.powi(-2), self.n_background.powi(-2))
    }

    /// Same cell with all lengths multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.vectors = out.vectors.map(|v| v.map(|x| x * s));
        for r in &mut out.rods {
            r.center = r.center.map(|x| x * s);
            r.size = r.size.map(|x| x * s);
        }
        out.c *= s;
        out
    }
}

/// Primitive cell of the bulk crystal described by `spec`.
pub fn primitive_cell(spec: &WoodpileSpec) -> Result<UnitCell> {
    if spec.defect.is_some() || spec.buffer.is_some() {
        return Err(Error::Config(
            "the primitive cell describes the bulk crystal; remove the defect and buffer".into(),
        ));
    }
    for (name, v) in [("c", spec.c), ("a", spec.a), ("w", spec.w), ("h", spec.h)] {
        if !(v > 0.0) {
            return Err(Error::Config(format!("{name} must be positive, got {v}")));
        }
    }
    if spec.w >= spec.a {
        return Err(Error::Config(format!(
            "rod width w = {} must be smaller than the pitch a = {}",
            spec.w, spec.a
        )));
    }
    let (a, c) = (spec.a, spec.c);
    Ok(UnitCell {
        vectors: [[a, 0.0, 0.0], [0.0, a, 0.0], [0.5 * a, 0.5 * a, 0.5 * c]],
        rods: vec![
            Rod {
                center: [0.0; 3],
                size: [a, spec.w, spec.h],
            },
            Rod {
                center: [-0.25 * a, 0.0, 0.25 * c],
                size: [spec.w, a, spec.h],
            },
        ],
        n_rod: spec.n_rod,
        n_background: spec.n_background,
        c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_scene, classify_lattice, LatticeClass};

    #[test]
    fn volume_is_a2c_over_2() {
        let spec = WoodpileSpec::fcc(1.0, 0.2145);
        let cell = primitive_cell(&spec).unwrap();
        assert!((cell.volume() - spec.a * spec.a * spec.c / 2.0).abs() < 1e-14);
        assert!((cell.volume() - spec.a.powi(3) / 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn reciprocal_duality() {
        let spec = WoodpileSpec::fcc(1.3, 0.2);
        let cell = primitive_cell(&spec).unwrap();
        let b = cell.reciprocal();
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|d| cell.vectors[i][d] * b[j][d]).sum();
                let expect = if i == j { 2.0 * PI } else { 0.0 };
                assert!((dot - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn defect_rejected() {
        let spec = WoodpileSpec::fcc(1.0, 0.2145).with_defect_preset(crate::geometry::DefectPreset::D1);
        assert!(matches!(primitive_cell(&spec), Err(Error::Config(_))));
    }

    #[test]
    fn bcc_cell_classifies() {
        let mut spec = WoodpileSpec::fcc(1.0, 0.2145);
        spec.a = spec.c;
        let cell = primitive_cell(&spec).unwrap();
        assert_eq!(
            classify_lattice(cell.c / cell.vectors[0][0]).unwrap(),
            LatticeClass::Bcc
        );
    }

    #[test]
    fn dc_coefficient_is_mean() {
        let spec = WoodpileSpec::fcc(1.0, 0.2145);
        let cell = primitive_cell(&spec).unwrap();
        let f = cell.fill_fraction();
        let mean = f * 3.3f64.powi(2) + (1.0 - f);
        assert!((cell.eps_fourier([0.0; 3]) - mean).abs() < 1e-12);
    }

    #[test]
    fn matches_finite_scene_in_the_bulk() {
        let spec = WoodpileSpec::fcc(1.0, 0.2145).with_counts(13, 7);
        let scene = build_scene(&spec).unwrap();
        let cell = primitive_cell(&spec).unwrap();
        let shift = [0.25 * spec.a, 0.5 * spec.a, 0.0];
        let mut rng = 12345u64;
        let mut next = || {
            rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (rng >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for _ in 0..2000 {
            let p = [2.0 * next(), 2.0 * next(), 1.0 * next()];
            let q = [p[0] - shift[0], p[1] - shift[1], p[2] - shift[2]];
            assert_eq!(scene.index_at(p), cell.index_at(q), "at {p:?}");
        }
    }
}
