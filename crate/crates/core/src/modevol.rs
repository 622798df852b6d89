//! Effective mode volume from single-frequency field snapshots.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{read_grid, write_grid, GridHeader, GridLayout};

/// Complex electric field sampled at cell centres, with the matching ε_r.
#[derive(Debug, Clone)]
pub struct FieldSnapshot {
    pub layout: GridLayout,
    pub e: [Vec<Complex64>; 3],
    pub eps: Vec<f64>,
    pub frequency: f64,
}

impl FieldSnapshot {
    pub fn validate(&self) -> Result<()> {
        let n = self.layout.len();
        if self.e.iter().any(|c| c.len() != n) || self.eps.len() != n {
            return Err(Error::Domain(format!("snapshot arrays do not match the {n}-cell grid")));
        }
        if self.layout.spacing.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::Domain("snapshot spacing must be positive".into()));
        }
        Ok(())
    }

    /// Sub-block of cells `lo..hi` (exclusive) on every axis.
    pub fn crop(&self, lo: [usize; 3], hi: [usize; 3]) -> Result<Self> {
        self.validate()?;
        if (0..3).any(|a| lo[a] >= hi[a] || hi[a] > self.layout.dims[a]) {
            return Err(Error::Domain(format!(
                "crop {lo:?}..{hi:?} does not fit the {:?} grid",
                self.layout.dims
            )));
        }
        let dims = [0, 1, 2].map(|a| hi[a] - lo[a]);
        let layout = GridLayout {
            dims,
            spacing: self.layout.spacing,
            origin: [0, 1, 2].map(|a| self.layout.origin[a] + lo[a] as f64 * self.layout.spacing[a]),
        };
        let mut idx = Vec::with_capacity(layout.len());
        for k in lo[2]..hi[2] {
            for j in lo[1]..hi[1] {
                for i in lo[0]..hi[0] {
                    idx.push(self.layout.index(i, j, k));
                }
            }
        }
        Ok(Self {
            layout,
            e: [0, 1, 2].map(|c| idx.iter().map(|&n| self.e[c][n]).collect()),
            eps: idx.iter().map(|&n| self.eps[n]).collect(),
            frequency: self.frequency,
        })
    }

    /// Write the complex field to `field_bin` and ε_r to `eps_bin`, each with
    /// a `.toml` header.
    pub fn write(&self, field_bin: &Path, eps_bin: &Path) -> Result<Vec<PathBuf>> {
        self.validate()?;
        let mut header = GridHeader::new(&self.layout, vec!["Ex".into(), "Ey".into(), "Ez".into()], true);
        header.frequency_hz = Some(self.frequency);
        let data: Vec<f64> = self.e.iter().flatten().flat_map(|z| [z.re, z.im]).collect();
        let mut out = write_grid(field_bin, &header, &data)?;
        let mut eh = GridHeader::new(&self.layout, vec!["eps_r".into()], false);
        eh.frequency_hz = Some(self.frequency);
        out.extend(write_grid(eps_bin, &eh, &self.eps)?);
        Ok(out)
    }

    pub fn read(field_bin: &Path, eps_bin: &Path) -> Result<Self> {
        let (fh, fd) = read_grid(field_bin)?;
        let (eh, ed) = read_grid(eps_bin)?;
        if !fh.complex || fh.components.len() != 3 || eh.complex || eh.components.len() != 1 {
            return Err(Error::Parse(format!(
                "{} must hold three complex components and {} one real component",
                field_bin.display(),
                eps_bin.display()
            )));
        }
        if fh.dims != eh.dims {
            return Err(Error::Domain(format!(
                "field grid {:?} and permittivity grid {:?} differ",
                fh.dims, eh.dims
            )));
        }
        let n: usize = fh.dims.iter().product();
        let comp = |c: usize| -> Vec<Complex64> {
            fd[2 * n * c..2 * n * (c + 1)]
                .chunks_exact(2)
                .map(|p| Complex64::new(p[0], p[1]))
                .collect()
        };
        let snap = Self {
            layout: GridLayout {
                dims: fh.dims,
                spacing: fh.spacing,
                origin: fh.origin,
            },
            e: [comp(0), comp(1), comp(2)],
            eps: ed,
            frequency: fh.frequency_hz.or(eh.frequency_hz).unwrap_or(0.0),
        };
        snap.validate()?;
        Ok(snap)
    }
}

/// `u = ε_r·(|E_x|²+|E_y|²+|E_z|²)` per cell.
pub fn energy_density(snap: &FieldSnapshot) -> Result<Vec<f64>> {
    snap.validate()?;
    Ok((0..snap.layout.len())
        .into_par_iter()
        .map(|i| snap.eps[i] * (snap.e[0][i].norm_sqr() + snap.e[1][i].norm_sqr() + snap.e[2][i].norm_sqr()))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeVolume {
    /// m³
    pub v_eff: f64,
    pub argmax: [usize; 3],
    /// Centre of the argmax cell (m).
    pub argmax_position: [f64; 3],
    pub u_max: f64,
}

fn reduce_max(u: &[f64]) -> (usize, f64) {
    // first index wins ties, independent of thread count
    u.iter().enumerate().fold(
        (0, f64::NEG_INFINITY),
        |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) },
    )
}

fn unravel(layout: &GridLayout, i: usize) -> [usize; 3] {
    let [nx, ny, _] = layout.dims;
    [i % nx, (i / nx) % ny, i / (nx * ny)]
}

/// `∫u d³r / max(u)` with a midpoint sum over cells.
pub fn mode_volume(snap: &FieldSnapshot) -> Result<ModeVolume> {
    let u = energy_density(snap)?;
    let (imax, umax) = reduce_max(&u);
    if !(umax > 0.0) {
        return Err(Error::Domain("mode volume of an all-zero field".into()));
    }
    let total: f64 = u.iter().sum();
    let argmax = unravel(&snap.layout, imax);
    Ok(ModeVolume {
        v_eff: total * snap.layout.cell_volume() / umax,
        argmax,
        argmax_position: snap.layout.cell_center(argmax[0], argmax[1], argmax[2]),
        u_max: umax,
    })
}

/// Mode volume normalized by the energy density at `point` instead of the
/// global maximum.
pub fn mode_volume_at(snap: &FieldSnapshot, point: [f64; 3]) -> Result<f64> {
    let u = energy_density(snap)?;
    let [i, j, k] = snap
        .layout
        .locate(point)
        .ok_or_else(|| Error::Domain(format!("{point:?} lies outside the snapshot grid")))?;
    let local = u[snap.layout.index(i, j, k)];
    if !(local > 0.0) {
        return Err(Error::Domain("zero field at the requested point".into()));
    }
    Ok(u.iter().sum::<f64>() * snap.layout.cell_volume() / local)
}

/// `V_eff/(λ/n)³`
pub fn normalized_volume(v_eff: f64, lambda: f64, n: f64) -> f64 {
    v_eff / (lambda / n).powi(3)
}

/// Energy density along the grid line through cell `through` parallel to
/// `axis`, normalized to its global maximum, as `coordinate,u` CSV.
pub fn line_cut_csv(snap: &FieldSnapshot, axis: usize, through: [usize; 3]) -> Result<String> {
    let u = energy_density(snap)?;
    let (_, umax) = reduce_max(&u);
    let umax = if umax > 0.0 { umax } else { 1.0 };
    let names = ["x", "y", "z"];
    let mut s = format!("{}_m,u_normalized\n", names[axis]);
    let mut idx = through;
    for t in 0..snap.layout.dims[axis] {
        idx[axis] = t;
        let c = snap.layout.cell_center(idx[0], idx[1], idx[2]);
        let _ = writeln!(
            s,
            "{:.9e},{:.9e}",
            c[axis],
            u[snap.layout.index(idx[0], idx[1], idx[2])] / umax
        );
    }
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeVolumeReport {
    pub frequency_hz: f64,
    pub wavelength_nm: f64,
    pub v_eff_um3: f64,
    pub v_n: f64,
    pub n: f64,
    pub argmax_cell: [usize; 3],
    pub argmax_position_nm: [f64; 3],
}

impl ModeVolumeReport {
    pub fn new(mv: &ModeVolume, frequency: f64, n: f64) -> Self {
        let lambda = crate::constants::C0 / frequency;
        Self {
            frequency_hz: frequency,
            wavelength_nm: lambda * 1e9,
            v_eff_um3: mv.v_eff * 1e18,
            v_n: normalized_volume(mv.v_eff, lambda, n),
            n,
            argmax_cell: mv.argmax,
            argmax_position_nm: mv.argmax_position.map(|x| x * 1e9),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn snapshot(dims: [usize; 3], fill: impl Fn(usize, usize, usize) -> (Complex64, f64)) -> FieldSnapshot {
        let layout = GridLayout {
            dims,
            spacing: [0.1, 0.2, 0.3],
            origin: [0.0; 3],
        };
        let n = layout.len();
        let mut e = [
            vec![Complex64::default(); n],
            vec![Complex64::default(); n],
            vec![Complex64::default(); n],
        ];
        let mut eps = vec![1.0; n];
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    let (v, ep) = fill(i, j, k);
                    let idx = layout.index(i, j, k);
                    e[0][idx] = v;
                    eps[idx] = ep;
                }
            }
        }
        FieldSnapshot {
            layout,
            e,
            eps,
            frequency: 1e14,
        }
    }

    #[test]
    fn zero_and_uniform() {
        let s = snapshot([4, 4, 4], |_, _, _| (Complex64::default(), 1.0));
        assert!(energy_density(&s).unwrap().iter().all(|&u| u == 0.0));
        assert!(matches!(mode_volume(&s), Err(Error::Domain(_))));
        let s = snapshot([4, 4, 4], |_, _, _| (Complex64::new(0.6, 0.8), 4.0));
        assert!(energy_density(&s).unwrap().iter().all(|&u| (u - 4.0).abs() < 1e-15));
    }

    #[test]
    fn uniform_box_is_exact() {
        let s = snapshot([10, 8, 6], |i, j, k| {
            let inside = (2..7).contains(&i) && (1..5).contains(&j) && (2..4).contains(&k);
            (
                if inside {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::default()
                },
                2.25,
            )
        });
        let mv = mode_volume(&s).unwrap();
        let expect = (5 * 4 * 2) as f64 * s.layout.cell_volume();
        assert!(((mv.v_eff - expect) / expect).abs() < 1e-12);
    }

    #[test]
    fn single_cell() {
        let s = snapshot([5, 5, 5], |i, j, k| {
            (
                if (i, j, k) == (1, 2, 3) {
                    Complex64::new(0.0, 3.0)
                } else {
                    Complex64::default()
                },
                1.0,
            )
        });
        let mv = mode_volume(&s).unwrap();
        assert!((mv.v_eff - s.layout.cell_volume()).abs() < 1e-18);
        assert_eq!(mv.argmax, [1, 2, 3]);
    }

    #[test]
    fn wrong_shapes() {
        let mut s = snapshot([3, 3, 3], |_, _, _| (Complex64::new(1.0, 0.0), 1.0));
        s.eps.pop();
        assert!(matches!(energy_density(&s), Err(Error::Domain(_))));
    }

    #[test]
    fn normalized_examples() {
        let v = normalized_volume(1.17e-3, 0.63898, 3.3);
        assert!((v - 0.161).abs() < 0.0005, "{v}");
        let v = normalized_volume(6.66e-4, 0.62086, 3.3);
        assert!((v - 0.100).abs() < 0.0005, "{v}");
        assert!((normalized_volume((0.5f64 / 2.0).powi(3), 0.5, 2.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn emitter_position_variant() {
        let s = snapshot([4, 1, 1], |i, _, _| (Complex64::new(1.0 + i as f64, 0.0), 1.0));
        let total: f64 = (1..=4).map(|v| (v * v) as f64).sum::<f64>() * s.layout.cell_volume();
        let at = mode_volume_at(&s, [0.05, 0.1, 0.15]).unwrap();
        assert!((at - total).abs() < 1e-15);
        let cut = line_cut_csv(&s, 0, [0, 0, 0]).unwrap();
        assert_eq!(cut.lines().count(), 5);
    }
}
