//! Three-dimensional Yee-grid FDTD with per-edge permittivity, a soft dipole
//! source, CPML or PEC walls, point probes and running DFT monitors.
//!
//! Fields are stored on the node lattice `(Nx+1)·(Ny+1)·(Nz+1)` (x fastest).
//! `E_x[i,j,k]` lives at `(i+½, j, k)` and `H_x[i,j,k]` at `(i, j+½, k+½)`,
//! with the other components placed cyclically. `E` is in V/m and the
//! magnetic field is carried as `η0·H` so both share units.

pub mod pml;
mod setup;

use std::f64::consts::{LN_2, PI};
use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{C0, EPS0};
use crate::error::{Error, Result};
use crate::geometry::DielectricGrid;
use crate::modevol::FieldSnapshot;
use crate::specfit::RingdownSignal;

pub use pml::{Boundary, CpmlSpec};
pub use setup::{default_probe, dominant_mode, CavityRun, RingdownPlan, WoodpileRun, MIDGAP_REDUCED};

use pml::AxisProfile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Component {
    Ex,
    Ey,
    Ez,
}

impl Component {
    pub const ALL: [Component; 3] = [Component::Ex, Component::Ey, Component::Ez];

    pub fn axis(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        ["Ex", "Ey", "Ez"][self as usize]
    }
}

impl FromStr for Component {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "x" | "ex" => Ok(Component::Ex),
            "y" | "ey" => Ok(Component::Ey),
            "z" | "ez" => Ok(Component::Ez),
            _ => Err(Error::Config(format!(
                "unknown field component `{s}` (expected Ex, Ey or Ez)"
            ))),
        }
    }
}

/// Largest stable time step times `safety`.
pub fn courant_dt(spacing: [f64; 3], safety: f64) -> Result<f64> {
    if !(safety > 0.0 && safety <= 1.0) {
        return Err(Error::Domain(format!(
            "Courant safety factor must lie in (0, 1], got {safety}"
        )));
    }
    if spacing.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::Domain(format!("grid spacing must be positive: {spacing:?}")));
    }
    let s: f64 = spacing.iter().map(|d| d.powi(-2)).sum();
    Ok(safety / (C0 * s.sqrt()))
}

/// Gaussian-modulated sinusoid `exp(−((t−t0)/τ)²)·sin(2πf0(t−t0))`. The
/// bandwidth is the full width at half maximum of the amplitude spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    pub center: f64,
    pub bandwidth: f64,
    pub delay: Option<f64>,
}

impl Pulse {
    pub fn width(&self) -> f64 {
        2.0 * LN_2.sqrt() / (PI * self.bandwidth)
    }

    pub fn delay(&self) -> f64 {
        self.delay.unwrap_or(4.0 * self.width())
    }

    /// Time after which the envelope is below `e^-16` of its peak.
    pub fn turn_off(&self) -> f64 {
        self.delay() + 4.0 * self.width()
    }

    pub fn value(&self, t: f64) -> f64 {
        let u = t - self.delay();
        let x = u / self.width();
        (-x * x).exp() * (2.0 * PI * self.center * u).sin()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DipoleSource {
    /// Snapped to the nearest node of the oriented component.
    pub position: [f64; 3],
    pub orientation: Component,
    pub pulse: Pulse,
    /// Peak current density (A/m²).
    pub amplitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeSpec {
    pub position: [f64; 3],
    pub component: Component,
}

/// Node index box `lo..hi` (exclusive), shared by all components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeBox {
    pub lo: [usize; 3],
    pub hi: [usize; 3],
}

impl NodeBox {
    pub fn dims(&self) -> [usize; 3] {
        [0, 1, 2].map(|a| self.hi[a] - self.lo[a])
    }

    pub fn len(&self) -> usize {
        self.dims().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DftMonitor {
    /// Hz
    pub frequencies: Vec<f64>,
    /// Defaults to the whole grid.
    pub region: Option<NodeBox>,
    /// Window opening time; defaults to three pulse delays.
    pub start: Option<f64>,
    /// Accumulate every `stride` steps.
    pub stride: usize,
}

impl DftMonitor {
    pub fn at(frequency: f64) -> Self {
        Self {
            frequencies: vec![frequency],
            region: None,
            start: None,
            stride: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub grid: DielectricGrid,
    /// Defaults to the Courant bound times `safety`.
    pub dt: Option<f64>,
    pub safety: f64,
    pub n_steps: usize,
    pub boundary: Boundary,
    pub source: DipoleSource,
    pub probes: Vec<ProbeSpec>,
    pub monitors: Vec<DftMonitor>,
    /// Worker threads; `None` uses the ambient pool.
    pub threads: Option<usize>,
    /// |E| above this (V/m) is treated as a blow-up.
    pub field_ceiling: f64,
    /// Record the discrete energy every this many steps (0 disables).
    pub energy_stride: usize,
    pub memory_cap: u64,
}

impl SimulationConfig {
    pub fn new(grid: DielectricGrid, source: DipoleSource, n_steps: usize) -> Self {
        Self {
            grid,
            dt: None,
            safety: 0.99,
            n_steps,
            boundary: Boundary::default(),
            source,
            probes: Vec::new(),
            monitors: Vec::new(),
            threads: None,
            field_ceiling: 1e30,
            energy_stride: 0,
            memory_cap: 4 << 30,
        }
    }

    pub fn dt(&self) -> Result<f64> {
        let bound = courant_dt(self.grid.layout.spacing, 1.0)?;
        match self.dt {
            None => Ok(bound * self.safety.clamp(f64::MIN_POSITIVE, 1.0)),
            Some(dt) if dt > 0.0 && dt <= bound * (1.0 + 1e-12) => Ok(dt),
            Some(dt) => Err(Error::Config(format!(
                "time step {dt:.4e} s violates the Courant bound {bound:.4e} s"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dt()?;
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return Err(Error::Config(format!(
                "Courant safety must lie in (0, 1], got {}",
                self.safety
            )));
        }
        if let Boundary::Cpml(p) = self.boundary {
            if p.cells < 4 {
                return Err(Error::Config(format!("PML needs at least 4 cells, got {}", p.cells)));
            }
            if !(p.reflection > 0.0 && p.reflection < 1.0) || p.kappa_max < 1.0 || p.alpha_max < 0.0 {
                return Err(Error::Config("PML grading parameters out of range".into()));
            }
            let min_dim = *self.grid.layout.dims.iter().min().unwrap();
            if 2 * p.cells + 2 > min_dim {
                return Err(Error::Config(format!(
                    "PML of {} cells does not fit a grid with {min_dim} cells on its shortest axis",
                    p.cells
                )));
            }
        }
        let pulse = self.source.pulse;
        if !(pulse.center > 0.0 && pulse.bandwidth > 0.0) {
            return Err(Error::Config(
                "source pulse needs positive centre frequency and bandwidth".into(),
            ));
        }
        for m in &self.monitors {
            if m.frequencies.is_empty() || m.stride == 0 {
                return Err(Error::Config(
                    "DFT monitor needs frequencies and a positive stride".into(),
                ));
            }
            if let Some(s) = m.start {
                if s < pulse.turn_off() {
                    return Err(Error::Config(format!(
                        "DFT window opens at {s:.4e} s, before the source turns off at {:.4e} s",
                        pulse.turn_off()
                    )));
                }
            }
            if let Some(r) = m.region {
                let nodes = self.grid.node_dims();
                if (0..3).any(|a| r.lo[a] >= r.hi[a] || r.hi[a] > nodes[a]) {
                    return Err(Error::Config(format!(
                        "DFT region {r:?} lies outside the node lattice {nodes:?}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Bytes held by fields, coefficients, PML state and monitors.
    pub fn memory_estimate(&self) -> u64 {
        let nodes: u64 = self.grid.node_dims().iter().map(|&n| n as u64).product();
        let mut bytes = self.field_memory();
        for m in &self.monitors {
            let region = m.region.map_or(nodes, |r| r.len() as u64);
            bytes += 3 * 16 * region * m.frequencies.len() as u64;
        }
        bytes
    }

    /// Bytes held by fields, coefficients and PML state.
    pub fn field_memory(&self) -> u64 {
        let nodes: u64 = self.grid.node_dims().iter().map(|&n| n as u64).product();
        let mut bytes = 9 * 8 * nodes;
        let t = self.boundary.thickness() as u64;
        if t > 0 {
            let d = self.grid.layout.dims.map(|n| n as u64 + 1);
            let slab: u64 = (0..3).map(|a| 2 * (t + 1) * nodes / d[a]).sum();
            bytes += 2 * 2 * 8 * slab;
        }
        bytes
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSeries {
    pub component: Component,
    pub node: [usize; 3],
    /// Physical location of the sampled component (m).
    pub position: [f64; 3],
    /// `values[n]` is the field at time `(n+1)·dt`.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct DftSnapshot {
    pub frequency: f64,
    pub region: NodeBox,
    /// Complex amplitudes normalized by the source spectrum, on the region's
    /// node lattice.
    pub e: [Vec<Complex64>; 3],
    pub samples: usize,
}

impl DftSnapshot {
    /// Interpolate to cell centres of `grid` (the monitor must span the grid).
    pub fn to_cells(&self, grid: &DielectricGrid) -> Result<FieldSnapshot> {
        let nodes = grid.node_dims();
        if self.region.lo != [0; 3] || self.region.hi != nodes {
            return Err(Error::Domain(
                "cell interpolation needs a whole-grid DFT monitor".into(),
            ));
        }
        let layout = grid.layout;
        let [nx, ny, nz] = layout.dims;
        let [mx, my, _] = nodes;
        let at = |i: usize, j: usize, k: usize| i + mx * (j + my * k);
        let mut e = [
            vec![Complex64::default(); layout.len()],
            vec![Complex64::default(); layout.len()],
            vec![Complex64::default(); layout.len()],
        ];
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let n = layout.index(i, j, k);
                    let ex = &self.e[0];
                    let ey = &self.e[1];
                    let ez = &self.e[2];
                    e[0][n] = 0.25
                        * (ex[at(i, j, k)] + ex[at(i, j + 1, k)] + ex[at(i, j, k + 1)] + ex[at(i, j + 1, k + 1)]);
                    e[1][n] = 0.25
                        * (ey[at(i, j, k)] + ey[at(i + 1, j, k)] + ey[at(i, j, k + 1)] + ey[at(i + 1, j, k + 1)]);
                    e[2][n] = 0.25
                        * (ez[at(i, j, k)] + ez[at(i + 1, j, k)] + ez[at(i, j + 1, k)] + ez[at(i + 1, j + 1, k)]);
                }
            }
        }
        Ok(FieldSnapshot {
            layout,
            e,
            eps: grid.eps.clone(),
            frequency: self.frequency,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergySample {
    pub step: usize,
    pub time: f64,
    /// J
    pub energy: f64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub dt: f64,
    pub n_steps: usize,
    pub probes: Vec<ProbeSeries>,
    pub snapshots: Vec<DftSnapshot>,
    pub energy: Vec<EnergySample>,
    pub source_node: [usize; 3],
    pub source_off: f64,
    pub cells: usize,
    pub wall_seconds: f64,
    pub steps_per_second: f64,
}

impl RunResult {
    /// `step,time,value` CSV of probe `idx`.
    pub fn probe_csv(&self, idx: usize) -> String {
        let mut s = String::from("step,time_s,value\n");
        for (n, v) in self.probes[idx].values.iter().enumerate() {
            let _ = writeln!(s, "{},{:.9e},{:.12e}", n + 1, (n + 1) as f64 * self.dt, v);
        }
        s
    }

    /// Probe `idx` after the source has turned off.
    pub fn ringdown(&self, idx: usize) -> RingdownSignal {
        let first = (self.source_off / self.dt).ceil() as usize;
        let values = &self.probes[idx].values;
        RingdownSignal::new(values[first.min(values.len())..].to_vec(), self.dt)
    }
}

/// Field arrays and coefficients of one Yee grid.
struct Yee {
    n: [usize; 3],
    m: [usize; 3],
    stride: [usize; 3],
    inv_d: [f64; 3],
    cdt: f64,
    e: [Vec<f64>; 3],
    h: [Vec<f64>; 3],
    /// `1/ε_r` at each E location.
    ie: [Vec<f64>; 3],
}

impl Yee {
    fn new(grid: &DielectricGrid, dt: f64) -> Self {
        let n = grid.layout.dims;
        let m = grid.node_dims();
        let len = m.iter().product();
        let edges = grid.edge_eps_or_average();
        let ie = edges.map(|v| v.iter().map(|e| 1.0 / e).collect());
        Self {
            n,
            m,
            stride: [1, m[0], m[0] * m[1]],
            inv_d: grid.layout.spacing.map(|d| 1.0 / d),
            cdt: C0 * dt,
            e: [vec![0.0; len], vec![0.0; len], vec![0.0; len]],
            h: [vec![0.0; len], vec![0.0; len], vec![0.0; len]],
            ie,
        }
    }

    fn plane(&self) -> usize {
        self.m[0] * self.m[1]
    }

    /// Updated E nodes: interior in the transverse directions.
    fn e_range(&self, c: usize) -> ([usize; 3], [usize; 3]) {
        let mut lo = [1; 3];
        let mut hi = self.n;
        lo[c] = 0;
        hi[c] = self.n[c];
        (lo, hi)
    }

    fn h_range(&self, c: usize) -> ([usize; 3], [usize; 3]) {
        let lo = [0; 3];
        let mut hi = self.n;
        hi[c] = self.m[c];
        (lo, hi)
    }

    fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.m[0] * (j + self.m[1] * k)
    }

    fn update_e(&mut self) {
        let plane = self.plane();
        let mx = self.m[0];
        for c in 0..3 {
            let (a1, a2) = ((c + 1) % 3, (c + 2) % 3);
            let (lo, hi) = self.e_range(c);
            let (s1, s2) = (self.stride[a1], self.stride[a2]);
            let (i1, i2) = (self.inv_d[a1], self.inv_d[a2]);
            let cdt = self.cdt;
            let Yee { e, h, ie, .. } = self;
            let (h1, h2, ie) = (&h[a1], &h[a2], &ie[c]);
            let len = hi[0] - lo[0];
            e[c].par_chunks_mut(plane).enumerate().for_each(|(k, pl)| {
                if k < lo[2] || k >= hi[2] {
                    return;
                }
                for j in lo[1]..hi[1] {
                    let b = mx * j + lo[0];
                    let g = k * plane + b;
                    let out = &mut pl[b..b + len];
                    let ie = &ie[g..g + len];
                    let (h2a, h2b) = (&h2[g..g + len], &h2[g - s1..g - s1 + len]);
                    let (h1a, h1b) = (&h1[g..g + len], &h1[g - s2..g - s2 + len]);
                    for t in 0..len {
                        out[t] += cdt * ie[t] * ((h2a[t] - h2b[t]) * i1 - (h1a[t] - h1b[t]) * i2);
                    }
                }
            });
        }
    }

    /// Advance H by one step; with `dot`, return `Σ H_old·H_new`.
    fn update_h(&mut self, dot: bool) -> f64 {
        let plane = self.plane();
        let mx = self.m[0];
        let mut total = 0.0;
        for c in 0..3 {
            let (a1, a2) = ((c + 1) % 3, (c + 2) % 3);
            let (lo, hi) = self.h_range(c);
            let (s1, s2) = (self.stride[a1], self.stride[a2]);
            let (i1, i2) = (self.inv_d[a1], self.inv_d[a2]);
            let cdt = self.cdt;
            let Yee { e, h, .. } = self;
            let (e1, e2) = (&e[a1], &e[a2]);
            let len = hi[0] - lo[0];
            let sums: Vec<f64> = h[c]
                .par_chunks_mut(plane)
                .enumerate()
                .map(|(k, pl)| {
                    let mut acc = 0.0;
                    if k < lo[2] || k >= hi[2] {
                        return acc;
                    }
                    for j in lo[1]..hi[1] {
                        let b = mx * j + lo[0];
                        let g = k * plane + b;
                        let out = &mut pl[b..b + len];
                        let (e2a, e2b) = (&e2[g + s1..g + s1 + len], &e2[g..g + len]);
                        let (e1a, e1b) = (&e1[g + s2..g + s2 + len], &e1[g..g + len]);
                        if dot {
                            for t in 0..len {
                                let old = out[t];
                                let new = old - cdt * ((e2a[t] - e2b[t]) * i1 - (e1a[t] - e1b[t]) * i2);
                                out[t] = new;
                                acc += old * new;
                            }
                        } else {
                            for t in 0..len {
                                out[t] -= cdt * ((e2a[t] - e2b[t]) * i1 - (e1a[t] - e1b[t]) * i2);
                            }
                        }
                    }
                    acc
                })
                .collect();
            total += sums.iter().sum::<f64>();
        }
        total
    }

    /// `Σ ε_r E²` over all E nodes.
    fn e_energy(&self) -> f64 {
        let plane = self.plane();
        let mut total = 0.0;
        for c in 0..3 {
            let sums: Vec<f64> = self.e[c]
                .par_chunks(plane)
                .zip(self.ie[c].par_chunks(plane))
                .map(|(e, ie)| e.iter().zip(ie).map(|(v, w)| v * v / w).sum::<f64>())
                .collect();
            total += sums.iter().sum::<f64>();
        }
        total
    }

    fn max_abs_e(&self) -> f64 {
        self.e
            .iter()
            .map(|v| {
                v.par_iter()
                    .map(|x| if x.is_finite() { x.abs() } else { f64::INFINITY })
                    .reduce(|| 0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// Nearest node of component `c` to `p`, if inside the updated range.
    fn snap(&self, grid: &DielectricGrid, p: [f64; 3], c: usize) -> Option<[usize; 3]> {
        let l = grid.layout;
        let (lo, hi) = self.e_range(c);
        let mut out = [0; 3];
        for a in 0..3 {
            let mut u = (p[a] - l.origin[a]) / l.spacing[a];
            if a == c {
                u -= 0.5;
            }
            let r = u.round();
            if r < lo[a] as f64 || r >= hi[a] as f64 {
                return None;
            }
            out[a] = r as usize;
        }
        Some(out)
    }

    fn node_position(&self, grid: &DielectricGrid, node: [usize; 3], c: usize) -> [f64; 3] {
        let l = grid.layout;
        [0, 1, 2].map(|a| l.origin[a] + (node[a] as f64 + if a == c { 0.5 } else { 0.0 }) * l.spacing[a])
    }
}

/// Auxiliary convolution state for one (component, derivative axis) pair.
struct PsiBlock {
    c: usize,
    a: usize,
    o: usize,
    sign: f64,
    /// Per axis: (node index, profile slot) pairs to visit.
    lists: [Vec<(usize, usize)>; 3],
    psi: Vec<f64>,
}

struct Cpml {
    e_prof: [AxisProfile; 3],
    h_prof: [AxisProfile; 3],
    e_blocks: Vec<PsiBlock>,
    h_blocks: Vec<PsiBlock>,
}

impl Cpml {
    fn new(spec: &CpmlSpec, yee: &Yee, spacing: [f64; 3], dt: f64) -> Self {
        let e_prof = [0, 1, 2].map(|a| AxisProfile::build(spec, yee.n[a], spacing[a], dt, false));
        let h_prof = [0, 1, 2].map(|a| AxisProfile::build(spec, yee.n[a], spacing[a], dt, true));
        let block = |c: usize, a: usize, (lo, hi): ([usize; 3], [usize; 3]), prof: &AxisProfile| {
            let o = 3 - c - a;
            let sign = if a == (c + 1) % 3 { 1.0 } else { -1.0 };
            let lists = [0, 1, 2].map(|ax| {
                if ax == a {
                    prof.positions
                        .iter()
                        .enumerate()
                        .filter(|(_, &p)| p >= lo[ax] && p < hi[ax])
                        .map(|(q, &p)| (p, q))
                        .collect()
                } else {
                    (lo[ax]..hi[ax]).map(|p| (p, 0)).collect::<Vec<_>>()
                }
            });
            let len = lists.iter().map(|l| l.len()).product();
            PsiBlock {
                c,
                a,
                o,
                sign,
                lists,
                psi: vec![0.0; len],
            }
        };
        let mut e_blocks = Vec::new();
        let mut h_blocks = Vec::new();
        for c in 0..3 {
            for a in (0..3).filter(|&a| a != c) {
                e_blocks.push(block(c, a, yee.e_range(c), &e_prof[a]));
                h_blocks.push(block(c, a, yee.h_range(c), &h_prof[a]));
            }
        }
        Self {
            e_prof,
            h_prof,
            e_blocks,
            h_blocks,
        }
    }

    fn apply_e(&mut self, yee: &mut Yee) {
        for blk in &mut self.e_blocks {
            let prof = &self.e_prof[blk.a];
            let (sa, inv) = (yee.stride[blk.a], yee.inv_d[blk.a]);
            let scale = yee.cdt * blk.sign;
            let (field, src, ie) = (&mut yee.e[blk.c], &yee.h[blk.o], &yee.ie[blk.c]);
            blk.for_rows(yee.m, |n, q, psi| {
                let len = psi.len();
                let (f, w) = (&mut field[n..n + len], &ie[n..n + len]);
                let (s1, s0) = (&src[n..n + len], &src[n - sa..n - sa + len]);
                match q {
                    Coef::Scalar(q) => {
                        let (b, c, k) = (prof.b[q], prof.c[q], prof.kinv[q]);
                        for t in 0..len {
                            let d = (s1[t] - s0[t]) * inv;
                            psi[t] = b * psi[t] + c * d;
                            f[t] += scale * w[t] * (k * d + psi[t]);
                        }
                    }
                    Coef::Run(q) => {
                        let (b, c, k) = (&prof.b[q..q + len], &prof.c[q..q + len], &prof.kinv[q..q + len]);
                        for t in 0..len {
                            let d = (s1[t] - s0[t]) * inv;
                            psi[t] = b[t] * psi[t] + c[t] * d;
                            f[t] += scale * w[t] * (k[t] * d + psi[t]);
                        }
                    }
                }
            });
        }
    }

    fn apply_h(&mut self, yee: &mut Yee) {
        for blk in &mut self.h_blocks {
            let prof = &self.h_prof[blk.a];
            let (sa, inv) = (yee.stride[blk.a], yee.inv_d[blk.a]);
            let scale = yee.cdt * blk.sign;
            let (field, src) = (&mut yee.h[blk.c], &yee.e[blk.o]);
            blk.for_rows(yee.m, |n, q, psi| {
                let len = psi.len();
                let f = &mut field[n..n + len];
                let (s1, s0) = (&src[n + sa..n + sa + len], &src[n..n + len]);
                match q {
                    Coef::Scalar(q) => {
                        let (b, c, k) = (prof.b[q], prof.c[q], prof.kinv[q]);
                        for t in 0..len {
                            let d = (s1[t] - s0[t]) * inv;
                            psi[t] = b * psi[t] + c * d;
                            f[t] -= scale * (k * d + psi[t]);
                        }
                    }
                    Coef::Run(q) => {
                        let (b, c, k) = (&prof.b[q..q + len], &prof.c[q..q + len], &prof.kinv[q..q + len]);
                        for t in 0..len {
                            let d = (s1[t] - s0[t]) * inv;
                            psi[t] = b[t] * psi[t] + c[t] * d;
                            f[t] -= scale * (k[t] * d + psi[t]);
                        }
                    }
                }
            });
        }
    }
}

/// Profile slot of a row: one slot for the whole row, or consecutive slots
/// starting at the given one.
#[derive(Clone, Copy)]
enum Coef {
    Scalar(usize),
    Run(usize),
}

impl PsiBlock {
    /// Visit contiguous x-runs as `(first node index, coefficients, ψ run)`.
    fn for_rows(&mut self, m: [usize; 3], mut f: impl FnMut(usize, Coef, &mut [f64])) {
        // split the x list into runs of consecutive positions
        let mut runs: Vec<(usize, usize, usize)> = Vec::new();
        for &(i, q) in &self.lists[0] {
            match runs.last_mut() {
                Some((i0, q0, len)) if *i0 + *len == i && (self.a != 0 || *q0 + *len == q) => *len += 1,
                _ => runs.push((i, q, 1)),
            }
        }
        let mut cnt = 0;
        for &(k, qk) in &self.lists[2] {
            for &(j, qj) in &self.lists[1] {
                for &(i0, qi, len) in &runs {
                    let coef = match self.a {
                        0 => Coef::Run(qi),
                        1 => Coef::Scalar(qj),
                        _ => Coef::Scalar(qk),
                    };
                    let n = i0 + m[0] * (j + m[1] * k);
                    f(n, coef, &mut self.psi[cnt..cnt + len]);
                    cnt += len;
                }
            }
        }
    }
}

struct MonitorState {
    freqs: Vec<f64>,
    region: NodeBox,
    start: f64,
    stride: usize,
    first: Option<usize>,
    acc: Vec<[Vec<Complex64>; 3]>,
    samples: usize,
}

impl MonitorState {
    fn accumulate(&mut self, yee: &Yee, t: f64, weight: f64) {
        let r = self.region;
        let [dx, dy, _] = r.dims();
        for (fi, &f) in self.freqs.iter().enumerate() {
            let ph = Complex64::from_polar(weight, -2.0 * PI * f * t);
            for c in 0..3 {
                let field = &yee.e[c];
                self.acc[fi][c]
                    .par_chunks_mut(dx * dy)
                    .enumerate()
                    .for_each(|(kk, pl)| {
                        let k = r.lo[2] + kk;
                        for jj in 0..dy {
                            let base = yee.index(r.lo[0], r.lo[1] + jj, k);
                            let row = &field[base..base + dx];
                            for (o, v) in pl[jj * dx..(jj + 1) * dx].iter_mut().zip(row) {
                                *o += ph * *v;
                            }
                        }
                    });
            }
        }
        self.samples += 1;
    }
}

/// Time-step `cfg` and collect probes, snapshots and diagnostics.
pub fn run(cfg: &SimulationConfig) -> Result<RunResult> {
    let mut sim = Simulation::new(cfg)?;
    sim.step_to(cfg.n_steps)?;
    sim.finish()
}

/// A run in progress. Stepping can be paused to inspect probes and to attach
/// DFT monitors once the resonance is known.
pub struct Simulation<'a> {
    cfg: &'a SimulationConfig,
    pool: Option<rayon::ThreadPool>,
    dt: f64,
    yee: Yee,
    cpml: Option<Cpml>,
    src_node: [usize; 3],
    src_index: usize,
    probes: Vec<ProbeSeries>,
    probe_index: Vec<(usize, usize)>,
    monitors: Vec<MonitorState>,
    energy: Vec<EnergySample>,
    step: usize,
    last_clean: usize,
    started: Instant,
}

impl<'a> Simulation<'a> {
    pub fn new(cfg: &'a SimulationConfig) -> Result<Self> {
        cfg.validate()?;
        let required = cfg.memory_estimate();
        if required > cfg.memory_cap {
            return Err(Error::Resource {
                what: "FDTD fields".into(),
                required,
                cap: cfg.memory_cap,
            });
        }
        let pool = match cfg.threads {
            Some(n) => Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n.max(1))
                    .build()
                    .map_err(|e| Error::Config(format!("thread pool: {e}")))?,
            ),
            None => None,
        };
        let dt = cfg.dt()?;
        let grid = &cfg.grid;
        let started = Instant::now();
        let yee = Yee::new(grid, dt);
        let cpml = match &cfg.boundary {
            Boundary::Pec => None,
            Boundary::Cpml(spec) => Some(Cpml::new(spec, &yee, grid.layout.spacing, dt)),
        };

        let src = cfg.source;
        let sc = src.orientation.axis();
        let src_node = yee.snap(grid, src.position, sc).ok_or_else(|| {
            Error::Config(format!("source at {:?} lies outside the updatable grid", src.position))
        })?;
        let src_index = yee.index(src_node[0], src_node[1], src_node[2]);

        let mut probes = Vec::with_capacity(cfg.probes.len());
        let mut probe_index = Vec::with_capacity(cfg.probes.len());
        for p in &cfg.probes {
            let c = p.component.axis();
            let node = yee.snap(grid, p.position, c).ok_or_else(|| {
                Error::Config(format!("probe at {:?} lies outside the updatable grid", p.position))
            })?;
            if c == sc && node == src_node {
                return Err(Error::Config(format!(
                    "probe at {:?} coincides with the source node",
                    p.position
                )));
            }
            probe_index.push((c, yee.index(node[0], node[1], node[2])));
            probes.push(ProbeSeries {
                component: p.component,
                node,
                position: yee.node_position(grid, node, c),
                values: Vec::with_capacity(cfg.n_steps),
            });
        }

        let mut sim = Self {
            cfg,
            pool,
            dt,
            yee,
            cpml,
            src_node,
            src_index,
            probes,
            probe_index,
            monitors: Vec::new(),
            energy: Vec::new(),
            step: 0,
            last_clean: 0,
            started,
        };
        for m in &cfg.monitors {
            sim.add_monitor(m.clone())?;
        }
        Ok(sim)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Steps completed so far.
    pub fn step(&self) -> usize {
        self.step
    }

    pub fn probes(&self) -> &[ProbeSeries] {
        &self.probes
    }

    /// Attach a DFT monitor. Its window cannot open before the current time
    /// or before the source turns off.
    pub fn add_monitor(&mut self, m: DftMonitor) -> Result<()> {
        if m.frequencies.is_empty() || m.stride == 0 {
            return Err(Error::Config(
                "DFT monitor needs frequencies and a positive stride".into(),
            ));
        }
        let pulse = self.cfg.source.pulse;
        let now = self.step as f64 * self.dt;
        if let Some(s) = m.start {
            if s < pulse.turn_off() {
                return Err(Error::Config(format!(
                    "DFT window opens at {s:.4e} s, before the source turns off at {:.4e} s",
                    pulse.turn_off()
                )));
            }
        }
        let nodes = self.yee.m;
        let region = m.region.unwrap_or(NodeBox { lo: [0; 3], hi: nodes });
        if (0..3).any(|a| region.lo[a] >= region.hi[a] || region.hi[a] > nodes[a]) {
            return Err(Error::Config(format!(
                "DFT region {region:?} lies outside the node lattice {nodes:?}"
            )));
        }
        let bytes = 3 * 16 * region.len() as u64 * m.frequencies.len() as u64;
        let held: u64 = self
            .monitors
            .iter()
            .map(|s| 3 * 16 * s.region.len() as u64 * s.freqs.len() as u64)
            .sum();
        let base = self.cfg.field_memory();
        if base + held + bytes > self.cfg.memory_cap {
            return Err(Error::Resource {
                what: "DFT monitor".into(),
                required: base + held + bytes,
                cap: self.cfg.memory_cap,
            });
        }
        let start = m.start.unwrap_or(3.0 * pulse.delay()).max(pulse.turn_off()).max(now);
        self.monitors.push(MonitorState {
            acc: m
                .frequencies
                .iter()
                .map(|_| [0; 3].map(|_| vec![Complex64::default(); region.len()]))
                .collect(),
            freqs: m.frequencies,
            region,
            start,
            stride: m.stride,
            first: None,
            samples: 0,
        });
        Ok(())
    }

    /// Advance until `target` steps have been taken.
    pub fn step_to(&mut self, target: usize) -> Result<()> {
        match self.pool.take() {
            Some(pool) => {
                let r = pool.install(|| self.advance(target));
                self.pool = Some(pool);
                r
            }
            None => self.advance(target),
        }
    }

    fn advance(&mut self, target: usize) -> Result<()> {
        let cfg = self.cfg;
        let dt = self.dt;
        let src = cfg.source;
        let sc = src.orientation.axis();
        let pulse = src.pulse;
        let cell_volume = cfg.grid.layout.cell_volume();
        let drive = dt / EPS0 * src.amplitude;
        while self.step < target {
            let n = self.step;
            let diag = cfg.energy_stride > 0 && n % cfg.energy_stride == 0;
            let ue = if diag { self.yee.e_energy() } else { 0.0 };
            let hh = self.yee.update_h(diag);
            if let Some(p) = self.cpml.as_mut() {
                p.apply_h(&mut self.yee);
            }
            self.yee.update_e();
            if let Some(p) = self.cpml.as_mut() {
                p.apply_e(&mut self.yee);
            }
            let t_src = (n as f64 + 0.5) * dt;
            let si = self.src_index;
            self.yee.e[sc][si] -= drive * self.yee.ie[sc][si] * pulse.value(t_src);

            let t = (n + 1) as f64 * dt;
            for (series, &(c, idx)) in self.probes.iter_mut().zip(&self.probe_index) {
                let v = self.yee.e[c][idx];
                if !v.is_finite() || v.abs() > cfg.field_ceiling {
                    return Err(Error::Unstable {
                        step: n + 1,
                        detail: format!("probe {} reads {v:e} V/m", series.component.name()),
                    });
                }
                series.values.push(v);
            }
            if (n + 1) % 64 == 0 || n + 1 == target {
                let emax = self.yee.max_abs_e();
                if !(emax <= cfg.field_ceiling) {
                    return Err(Error::Unstable {
                        step: n + 1,
                        detail: format!(
                            "max |E| = {emax:e} V/m exceeds the ceiling; fields were finite and bounded at step {}",
                            self.last_clean
                        ),
                    });
                }
                self.last_clean = n + 1;
            }
            for m in &mut self.monitors {
                if t + 0.5 * dt < m.start {
                    continue;
                }
                let first = *m.first.get_or_insert(n);
                if (n - first) % m.stride == 0 {
                    m.accumulate(&self.yee, t, dt * m.stride as f64);
                }
            }
            if diag {
                self.energy.push(EnergySample {
                    step: n,
                    time: n as f64 * dt,
                    energy: 0.5 * EPS0 * cell_volume * (ue + hh),
                });
            }
            self.step += 1;
        }
        Ok(())
    }

    pub fn finish(self) -> Result<RunResult> {
        let dt = self.dt;
        let src = self.cfg.source;
        let pulse = src.pulse;
        let mut snapshots = Vec::new();
        for m in self.monitors {
            for (fi, &f) in m.freqs.iter().enumerate() {
                let spectrum: Complex64 = (0..self.step)
                    .map(|n| {
                        let t = (n as f64 + 0.5) * dt;
                        Complex64::from_polar(src.amplitude * pulse.value(t) * dt, -2.0 * PI * f * t)
                    })
                    .sum();
                if spectrum.norm() == 0.0 {
                    return Err(Error::Numeric(format!("source spectrum vanishes at {f:e} Hz")));
                }
                let inv = 1.0 / spectrum;
                let e = m.acc[fi].clone().map(|v| v.into_iter().map(|z| z * inv).collect());
                snapshots.push(DftSnapshot {
                    frequency: f,
                    region: m.region,
                    e,
                    samples: m.samples,
                });
            }
        }
        let wall = self.started.elapsed().as_secs_f64();
        Ok(RunResult {
            dt,
            n_steps: self.step,
            probes: self.probes,
            snapshots,
            energy: self.energy,
            source_node: self.src_node,
            source_off: pulse.turn_off(),
            cells: self.cfg.grid.layout.len(),
            wall_seconds: wall,
            steps_per_second: self.step as f64 / wall.max(1e-9),
        })
    }
}

/// Geometry of a boundary-quality measurement in a homogeneous medium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReflectionSetup {
    /// Interior cube edge in cells (excluding the absorbing layers).
    pub interior: usize,
    pub spacing: f64,
    pub eps: f64,
    /// Probe distance in front of the boundary, in cells.
    pub standoff: usize,
}

impl Default for ReflectionSetup {
    fn default() -> Self {
        Self {
            interior: 48,
            spacing: 10e-9,
            eps: 1.0,
            standoff: 2,
        }
    }
}

/// Peak reflected over peak incident amplitude (dB) at a probe in front of
/// the +x boundary. The reflected part is isolated by subtracting a run in a
/// domain twice as large, whose own walls are too far to be seen in the
/// recording window.
pub fn pml_reflection_test(setup: &ReflectionSetup, boundary: Boundary) -> Result<f64> {
    if setup.interior < 2 * setup.standoff + 8 {
        return Err(Error::Domain(
            "reflection domain too small for the probe stand-off".into(),
        ));
    }
    let d = setup.spacing;
    let pml = boundary.thickness();
    let speed = C0 / setup.eps.sqrt();
    let dist = (setup.interior / 2 - setup.standoff) as f64 * d;
    let build = |interior: usize| -> Result<SimulationConfig> {
        let cells = interior + 2 * pml;
        let layout = crate::geometry::GridLayout {
            dims: [cells; 3],
            spacing: [d; 3],
            origin: [-0.5 * cells as f64 * d; 3],
        };
        let grid = DielectricGrid::uniform(layout, setup.eps);
        let f0 = speed / (12.0 * d);
        let source = DipoleSource {
            position: [0.0, 0.0, 0.5 * d],
            orientation: Component::Ez,
            pulse: Pulse {
                center: f0,
                bandwidth: f0,
                delay: None,
            },
            amplitude: 1.0,
        };
        let mut cfg = SimulationConfig::new(grid, source, 0);
        cfg.boundary = boundary;
        cfg.probes = vec![ProbeSpec {
            position: [dist, 0.0, 0.5 * d],
            component: Component::Ez,
        }];
        Ok(cfg)
    };
    let mut small = build(setup.interior)?;
    let mut big = build(2 * setup.interior)?;
    let dt = small.dt()?;
    // earliest echo from the reference domain's walls
    let echo_path = setup.interior as f64 * d + (setup.interior as f64 * d - dist);
    let steps = ((small.source.pulse.delay() - 4.0 * small.source.pulse.width() + echo_path / speed) / dt).floor()
        as usize;
    small.n_steps = steps;
    big.n_steps = steps;
    let a = run(&small)?;
    let b = run(&big)?;
    let (pa, pb) = (&a.probes[0].values, &b.probes[0].values);
    let incident = pb.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let reflected = pa.iter().zip(pb).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    if !(incident > 0.0) {
        return Err(Error::Numeric("no incident pulse reached the probe".into()));
    }
    Ok(20.0 * (reflected / incident).log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GridLayout;

    fn vacuum(cells: usize, d: f64) -> DielectricGrid {
        let layout = GridLayout {
            dims: [cells; 3],
            spacing: [d; 3],
            origin: [-0.5 * cells as f64 * d; 3],
        };
        DielectricGrid::uniform(layout, 1.0)
    }

    fn pulse_for(d: f64) -> Pulse {
        let f0 = C0 / (12.0 * d);
        Pulse {
            center: f0,
            bandwidth: f0,
            delay: None,
        }
    }

    #[test]
    fn courant_examples() {
        let dt = courant_dt([10e-9; 3], 0.99).unwrap();
        assert!((dt - 0.99 * 10e-9 / (C0 * 3f64.sqrt())).abs() < 1e-30);
        assert!((dt - 1.906e-17).abs() < 1e-20);
        assert!(matches!(courant_dt([10e-9; 3], 0.0), Err(Error::Domain(_))));
        assert!(matches!(courant_dt([10e-9; 3], 1.5), Err(Error::Domain(_))));
    }

    #[test]
    fn pulse_shape() {
        let p = pulse_for(1e-8);
        assert!(p.value(0.0).abs() < 1e-6);
        assert!(p.value(p.turn_off()).abs() < 1.2e-7);
        let peak = (0..2000)
            .map(|i| p.value(i as f64 * p.turn_off() / 2000.0).abs())
            .fold(0.0, f64::max);
        // odd carrier: zero at the envelope peak, no DC content
        assert!(peak > 0.7 && peak < 1.0);
        let u = 0.3 * p.width();
        assert!((p.value(p.delay() + u) + p.value(p.delay() - u)).abs() < 1e-12);
    }

    #[test]
    fn config_checks() {
        let grid = vacuum(20, 1e-8);
        let src = DipoleSource {
            position: [0.0; 3],
            orientation: Component::Ez,
            pulse: pulse_for(1e-8),
            amplitude: 1.0,
        };
        let mut cfg = SimulationConfig::new(grid, src, 10);
        cfg.boundary = Boundary::Cpml(CpmlSpec {
            cells: 3,
            ..Default::default()
        });
        assert!(matches!(run(&cfg), Err(Error::Config(_))));
        cfg.boundary = Boundary::Pec;
        cfg.dt = Some(1.0);
        assert!(matches!(run(&cfg), Err(Error::Config(_))));
        cfg.dt = None;
        cfg.probes = vec![ProbeSpec {
            position: [0.0; 3],
            component: Component::Ez,
        }];
        assert!(matches!(run(&cfg), Err(Error::Config(_))));
        cfg.probes.clear();
        cfg.memory_cap = 1000;
        assert!(matches!(run(&cfg), Err(Error::Resource { .. })));
    }

    #[test]
    fn pec_energy_is_conserved() {
        let d = 1e-8;
        let src = DipoleSource {
            position: [0.0; 3],
            orientation: Component::Ez,
            pulse: pulse_for(d),
            amplitude: 1.0,
        };
        let mut cfg = SimulationConfig::new(vacuum(16, d), src, 3000);
        cfg.boundary = Boundary::Pec;
        cfg.energy_stride = 10;
        let res = run(&cfg).unwrap();
        let off = res.source_off;
        let after: Vec<f64> = res
            .energy
            .iter()
            .filter(|s| s.time > off + res.dt)
            .map(|s| s.energy)
            .collect();
        let e0 = after[0];
        assert!(e0 > 0.0);
        let drift = after.iter().map(|e| ((e - e0) / e0).abs()).fold(0.0, f64::max);
        assert!(drift < 1e-10, "drift {drift}");
    }

    #[test]
    fn threads_do_not_change_results() {
        let d = 1e-8;
        let src = DipoleSource {
            position: [0.0; 3],
            orientation: Component::Ex,
            pulse: pulse_for(d),
            amplitude: 1.0,
        };
        let mut cfg = SimulationConfig::new(vacuum(24, d), src, 150);
        cfg.probes = vec![ProbeSpec {
            position: [5.0 * d, 0.0, 0.0],
            component: Component::Ex,
        }];
        cfg.threads = Some(1);
        let a = run(&cfg).unwrap();
        cfg.threads = Some(3);
        let b = run(&cfg).unwrap();
        assert_eq!(a.probes[0].values, b.probes[0].values);
    }

    #[test]
    fn snapshot_interpolates_to_cells() {
        let d = 1e-8;
        let src = DipoleSource {
            position: [0.0; 3],
            orientation: Component::Ez,
            pulse: pulse_for(d),
            amplitude: 1.0,
        };
        let mut cfg = SimulationConfig::new(vacuum(12, d), src, 200);
        cfg.boundary = Boundary::Pec;
        cfg.monitors = vec![DftMonitor::at(src.pulse.center)];
        let res = run(&cfg).unwrap();
        let snap = res.snapshots[0].to_cells(&cfg.grid).unwrap();
        assert_eq!(snap.e[2].len(), 12 * 12 * 12);
        assert!(res.snapshots[0].samples > 0);
        assert!(snap.e[2].iter().any(|z| z.norm() > 0.0));
    }
}
