use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Scene;
use crate::error::{Error, Result};

/// Uniform Cartesian grid of `dims` cells whose lower corner sits at `origin`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridLayout {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
}

impl GridLayout {
    /// Grid centred on the scene origin that covers `lo..hi` plus `padding`
    /// cells on every side. Axes flagged in `odd` get an odd cell count (a
    /// cell centre on the origin), the others an even count (a node on it).
    pub fn around(
        lo: [f64; 3],
        hi: [f64; 3],
        spacing: [f64; 3],
        padding: [usize; 3],
        odd: [bool; 3],
    ) -> Result<Self> {
        let mut dims = [0usize; 3];
        let mut origin = [0.0; 3];
        for i in 0..3 {
            if !(spacing[i] > 0.0) {
                return Err(Error::Config(format!("grid spacing must be positive: {spacing:?}")));
            }
            let half = lo[i].abs().max(hi[i].abs());
            // small slack so a face that lands on a node is not lost to rounding
            let half_cells = (half / spacing[i] - 1e-9).ceil().max(0.0) as usize;
            let mut n = 2 * (half_cells + padding[i]);
            if odd[i] {
                n += 1;
            }
            dims[i] = n.max(1);
            origin[i] = -0.5 * dims[i] as f64 * spacing[i];
        }
        Ok(Self { dims, spacing, origin })
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn cell_center(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [
            self.origin[0] + (i as f64 + 0.5) * self.spacing[0],
            self.origin[1] + (j as f64 + 0.5) * self.spacing[1],
            self.origin[2] + (k as f64 + 0.5) * self.spacing[2],
        ]
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// Cell containing `p`, if any.
    pub fn locate(&self, p: [f64; 3]) -> Option<[usize; 3]> {
        let mut out = [0; 3];
        for i in 0..3 {
            let t = ((p[i] - self.origin[i]) / self.spacing[i]).floor();
            if t < 0.0 || t >= self.dims[i] as f64 {
                return None;
            }
            out[i] = t as usize;
        }
        Some(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sampling {
    /// Index at the sample point.
    Point,
    /// Mean of ε over `n³` sub-samples filling the cell.
    Average(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoxelOptions {
    pub sampling: Sampling,
    /// Also sample ε at the Yee E-component positions.
    pub yee_edges: bool,
    /// Refuse grids whose ε storage would exceed this many bytes.
    pub memory_cap: u64,
}

impl Default for VoxelOptions {
    fn default() -> Self {
        Self {
            sampling: Sampling::Point,
            yee_edges: false,
            memory_cap: 2 << 30,
        }
    }
}

/// Relative permittivity on a uniform grid.
///
/// `eps` holds one value per cell (sampled at the centre). When present,
/// `edge_eps[c]` holds ε at the `E_c` positions of the Yee lattice, stored on
/// the node lattice `(Nx+1)·(Ny+1)·(Nz+1)` (x fastest). `E_x` sits at
/// `(i+½, j, k)`, `E_y` at `(i, j+½, k)` and `E_z` at `(i, j, k+½)` in node units.
#[derive(Debug, Clone)]
pub struct DielectricGrid {
    pub layout: GridLayout,
    pub eps: Vec<f64>,
    pub edge_eps: Option<[Vec<f64>; 3]>,
}

impl DielectricGrid {
    pub fn uniform(layout: GridLayout, eps: f64) -> Self {
        Self {
            layout,
            eps: vec![eps; layout.len()],
            edge_eps: None,
        }
    }

    pub fn node_dims(&self) -> [usize; 3] {
        self.layout.dims.map(|n| n + 1)
    }

    /// ε at the Yee edge locations, falling back to the average of the
    /// adjacent cells when no dedicated sampling was made.
    pub fn edge_eps_or_average(&self) -> [Vec<f64>; 3] {
        if let Some(e) = &self.edge_eps {
            return e.clone();
        }
        let [nx, ny, nz] = self.layout.dims;
        let [mx, my, mz] = self.node_dims();
        let cell = |i: isize, j: isize, k: isize| -> Option<f64> {
            if i < 0 || j < 0 || k < 0 || i >= nx as isize || j >= ny as isize || k >= nz as isize {
                None
            } else {
                Some(self.eps[self.layout.index(i as usize, j as usize, k as usize)])
            }
        };
        let mean = |vals: [Option<f64>; 4]| -> f64 {
            let (s, n) = vals.iter().flatten().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
            if n == 0 {
                1.0
            } else {
                s / n as f64
            }
        };
        let mut out = [
            vec![1.0; mx * my * mz],
            vec![1.0; mx * my * mz],
            vec![1.0; mx * my * mz],
        ];
        for k in 0..mz {
            for j in 0..my {
                for i in 0..mx {
                    let n = i + mx * (j + my * k);
                    let (ii, jj, kk) = (i as isize, j as isize, k as isize);
                    out[0][n] = mean([
                        cell(ii, jj, kk),
                        cell(ii, jj - 1, kk),
                        cell(ii, jj, kk - 1),
                        cell(ii, jj - 1, kk - 1),
                    ]);
                    out[1][n] = mean([
                        cell(ii, jj, kk),
                        cell(ii - 1, jj, kk),
                        cell(ii, jj, kk - 1),
                        cell(ii - 1, jj, kk - 1),
                    ]);
                    out[2][n] = mean([
                        cell(ii, jj, kk),
                        cell(ii - 1, jj, kk),
                        cell(ii, jj - 1, kk),
                        cell(ii - 1, jj - 1, kk),
                    ]);
                }
            }
        }
        out
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.eps
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

fn sample(scene: &Scene, center: [f64; 3], d: [f64; 3], sampling: Sampling) -> f64 {
    match sampling {
        Sampling::Point => scene.index_at(center).powi(2),
        Sampling::Average(n) => {
            let n = n.max(1);
            let mut acc = 0.0;
            for c in 0..n {
                for b in 0..n {
                    for a in 0..n {
                        let off = |m: usize, di: f64| ((m as f64 + 0.5) / n as f64 - 0.5) * di;
                        let p = [
                            center[0] + off(a, d[0]),
                            center[1] + off(b, d[1]),
                            center[2] + off(c, d[2]),
                        ];
                        acc += scene.index_at(p).powi(2);
                    }
                }
            }
            acc / (n * n * n) as f64
        }
    }
}

/// Sample the scene onto `layout`.
pub fn voxelize(scene: &Scene, layout: GridLayout, opts: VoxelOptions) -> Result<DielectricGrid> {
    let cells = layout.len() as u64;
    let nodes: u64 = layout.dims.iter().map(|&n| n as u64 + 1).product();
    let required = 8 * (cells + if opts.yee_edges { 3 * nodes } else { 0 });
    if required > opts.memory_cap {
        return Err(Error::Resource {
            what: "dielectric grid".into(),
            required,
            cap: opts.memory_cap,
        });
    }
    let [nx, ny, _] = layout.dims;
    let d = layout.spacing;
    let mut eps = vec![0.0; layout.len()];
    eps.par_chunks_mut(nx * ny).enumerate().for_each(|(k, slab)| {
        for j in 0..ny {
            for i in 0..nx {
                slab[i + nx * j] = sample(scene, layout.cell_center(i, j, k), d, opts.sampling);
            }
        }
    });
    let edge_eps = if opts.yee_edges {
        let [mx, my, mz] = layout.dims.map(|n| n + 1);
        let comp = |c: usize| -> Vec<f64> {
            let mut v = vec![0.0; mx * my * mz];
            v.par_chunks_mut(mx * my).enumerate().for_each(|(k, slab)| {
                for j in 0..my {
                    for i in 0..mx {
                        let mut p = [
                            layout.origin[0] + i as f64 * d[0],
                            layout.origin[1] + j as f64 * d[1],
                            layout.origin[2] + k as f64 * d[2],
                        ];
                        p[c] += 0.5 * d[c];
                        slab[i + mx * j] = sample(scene, p, d, opts.sampling);
                    }
                }
            });
            let _ = mz;
            v
        };
        Some([comp(0), comp(1), comp(2)])
    } else {
        None
    };
    Ok(DielectricGrid { layout, eps, edge_eps })
}

/// Sidecar header of a binary grid file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridHeader {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
    /// Names of the stored arrays, in file order.
    pub components: Vec<String>,
    /// `true` when every value is a (re, im) pair.
    pub complex: bool,
    pub byte_order: String,
    pub ordering: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency_hz: Option<f64>,
}

impl GridHeader {
    pub fn new(layout: &GridLayout, components: Vec<String>, complex: bool) -> Self {
        Self {
            dims: layout.dims,
            spacing: layout.spacing,
            origin: layout.origin,
            components,
            complex,
            byte_order: "little-endian f64".into(),
            ordering: "x-fastest".into(),
            frequency_hz: None,
        }
    }

    pub fn values_per_component(&self) -> usize {
        self.dims.iter().product::<usize>() * if self.complex { 2 } else { 1 }
    }
}

fn header_path(bin: &Path) -> PathBuf {
    bin.with_extension("toml")
}

/// Write `data` (all components back to back) to `bin` plus a `.toml` header.
pub fn write_grid(bin: &Path, header: &GridHeader, data: &[f64]) -> Result<Vec<PathBuf>> {
    let expect = header.values_per_component() * header.components.len();
    if data.len() != expect {
        return Err(Error::Domain(format!(
            "grid payload has {} values, header implies {expect}",
            data.len()
        )));
    }
    let mut bytes = Vec::with_capacity(8 * data.len());
    for v in data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = std::fs::File::create(bin).map_err(|e| Error::io(bin, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(bin, e))?;
    let hp = header_path(bin);
    let text = toml::to_string(header).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(&hp, text).map_err(|e| Error::io(&hp, e))?;
    Ok(vec![bin.to_path_buf(), hp])
}

pub fn read_grid(bin: &Path) -> Result<(GridHeader, Vec<f64>)> {
    let hp = header_path(bin);
    let text = std::fs::read_to_string(&hp).map_err(|e| Error::io(&hp, e))?;
    let header: GridHeader = toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", hp.display())))?;
    let mut bytes = Vec::new();
    std::fs::File::open(bin)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(bin, e))?;
    let expect = header.values_per_component() * header.components.len();
    if bytes.len() != 8 * expect {
        return Err(Error::Parse(format!(
            "{}: {} bytes, header implies {}",
            bin.display(),
            bytes.len(),
            8 * expect
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((header, data))
}

impl DielectricGrid {
    pub fn write(&self, bin: &Path) -> Result<Vec<PathBuf>> {
        let header = GridHeader::new(&self.layout, vec!["eps_r".into()], false);
        write_grid(bin, &header, &self.eps)
    }
}
