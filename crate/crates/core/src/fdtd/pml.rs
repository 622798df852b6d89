//! Convolutional PML (recursive-convolution form) on a uniform Yee grid.

use serde::{Deserialize, Serialize};

use crate::constants::{EPS0, MU0};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpmlSpec {
    pub cells: usize,
    /// Polynomial grading order of σ and κ.
    pub order: f64,
    /// Normal-incidence reflection the σ profile is sized for.
    pub reflection: f64,
    pub kappa_max: f64,
    /// Complex-frequency shift at the inner interface (S/m).
    pub alpha_max: f64,
}

impl Default for CpmlSpec {
    fn default() -> Self {
        Self {
            cells: 8,
            order: 3.0,
            reflection: 1e-8,
            kappa_max: 1.0,
            alpha_max: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Boundary {
    /// Perfect electric conductor walls.
    Pec,
    Cpml(CpmlSpec),
}

impl Default for Boundary {
    fn default() -> Self {
        Boundary::Cpml(CpmlSpec::default())
    }
}

impl Boundary {
    pub fn thickness(&self) -> usize {
        match self {
            Boundary::Pec => 0,
            Boundary::Cpml(s) => s.cells,
        }
    }
}

/// Update coefficients of one axis at the grid positions inside the layers.
#[derive(Debug, Clone, Default)]
pub(crate) struct AxisProfile {
    /// Node indices along the axis (for the half grid, `p` stands for `p+½`).
    pub positions: Vec<usize>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    /// `1/κ − 1`
    pub kinv: Vec<f64>,
}

impl AxisProfile {
    pub fn build(spec: &CpmlSpec, n_cells: usize, spacing: f64, dt: f64, half: bool) -> Self {
        let mut out = Self::default();
        if spec.cells == 0 {
            return out;
        }
        let l = spec.cells as f64;
        let eta0 = (MU0 / EPS0).sqrt();
        let sigma_max = -(spec.order + 1.0) * spec.reflection.ln() / (2.0 * eta0 * l * spacing);
        let top = if half { n_cells } else { n_cells + 1 };
        for p in 0..top {
            let x = p as f64 + if half { 0.5 } else { 0.0 };
            let depth = ((l - x) / l).max((x - (n_cells as f64 - l)) / l).max(0.0);
            if depth <= 0.0 {
                continue;
            }
            let g = depth.powf(spec.order);
            let sigma = sigma_max * g;
            let kappa = 1.0 + (spec.kappa_max - 1.0) * g;
            let alpha = spec.alpha_max * (1.0 - depth);
            let b = (-(sigma / kappa + alpha) * dt / EPS0).exp();
            let c = if sigma > 0.0 {
                sigma / (sigma * kappa + kappa * kappa * alpha) * (b - 1.0)
            } else {
                0.0
            };
            out.positions.push(p);
            out.b.push(b);
            out.c.push(c);
            out.kinv.push(1.0 / kappa - 1.0);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_is_graded_and_symmetric() {
        let spec = CpmlSpec::default();
        let p = AxisProfile::build(&spec, 40, 1e-8, 1e-17, false);
        assert_eq!(p.positions.len(), 16);
        assert_eq!(p.positions[0], 0);
        assert_eq!(*p.positions.last().unwrap(), 40);
        // deepest node has the strongest damping
        assert!(p.b[0] < p.b[1] && p.b[1] < p.b[7]);
        for q in 0..8 {
            assert!((p.b[q] - p.b[15 - q]).abs() < 1e-15);
        }
        let h = AxisProfile::build(&spec, 40, 1e-8, 1e-17, true);
        assert_eq!(h.positions.len(), 16);
        assert_eq!(h.positions[7], 7);
        assert_eq!(h.positions[8], 32);
    }
}
