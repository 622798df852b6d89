//! Ready-made ringdown runs on a finite woodpile.

use serde::{Deserialize, Serialize};

use super::{
    Boundary, Component, DftMonitor, DipoleSource, ProbeSpec, Pulse, RunResult, Simulation, SimulationConfig,
};
use crate::constants::C0;
use crate::error::{Error, Result};
use crate::geometry::{build_scene, voxelize, GridLayout, Sampling, VoxelOptions, WoodpileSpec};
use crate::modevol::FieldSnapshot;
use crate::specfit::{harmonic_inversion, InversionOptions, ModeEstimate, RingdownSignal};

/// Midgap reduced frequency `c/λ` of the reference FCC woodpile.
pub const MIDGAP_REDUCED: f64 = 0.527;

/// Probe placement relative to the source: a quarter of the defect extent
/// along the source axis (downwards for `E_z`).
pub fn default_probe(spec: &WoodpileSpec, source: [f64; 3], orientation: Component) -> ProbeSpec {
    let c = orientation.axis();
    let extent = spec.defect.map_or(0.25 * spec.c, |d| d.size[c]);
    let sign = if orientation == Component::Ez { -1.0 } else { 1.0 };
    let mut position = source;
    position[c] += sign * 0.25 * extent;
    ProbeSpec {
        position,
        component: orientation,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WoodpileRun {
    pub spec: WoodpileSpec,
    /// Grid cells per in-layer pitch `a`.
    pub cells_per_a: f64,
    pub orientation: Component,
    pub n_steps: usize,
    pub boundary: Boundary,
    /// Air between the crystal and the absorbing layers (m).
    pub air_gap: f64,
    pub sampling: Sampling,
    /// Pulse centre and bandwidth as `c/λ`.
    pub center_reduced: f64,
    pub bandwidth_reduced: f64,
    /// Probe override; defaults to [`default_probe`].
    pub probe: Option<[f64; 3]>,
    pub memory_cap: u64,
}

impl WoodpileRun {
    pub fn new(spec: WoodpileSpec, orientation: Component) -> Self {
        let c = spec.c;
        Self {
            spec,
            cells_per_a: 16.0,
            orientation,
            n_steps: 20_000,
            boundary: Boundary::default(),
            air_gap: 0.5 * c,
            sampling: Sampling::Average(2),
            center_reduced: MIDGAP_REDUCED,
            bandwidth_reduced: 0.15,
            probe: None,
            memory_cap: 4 << 30,
        }
    }

    pub fn spacing(&self) -> f64 {
        self.spec.a / self.cells_per_a
    }

    /// Reduced frequency `c/λ` of a frequency in Hz.
    pub fn reduced(&self, f: f64) -> f64 {
        f * self.spec.c / C0
    }

    pub fn build(&self) -> Result<SimulationConfig> {
        if !(self.cells_per_a >= 4.0) {
            return Err(Error::Config(format!(
                "resolution of {} cells per pitch is too coarse",
                self.cells_per_a
            )));
        }
        let scene = build_scene(&self.spec)?;
        let (lo, hi) = scene
            .bounds()
            .ok_or_else(|| Error::Config("empty woodpile scene".into()))?;
        let d = self.spacing();
        let pad = (self.air_gap / d).ceil() as usize + self.boundary.thickness();
        let mut odd = [false; 3];
        odd[self.orientation.axis()] = true;
        let layout = GridLayout::around(lo, hi, [d; 3], [pad; 3], odd)?;
        let grid = voxelize(
            &scene,
            layout,
            VoxelOptions {
                sampling: self.sampling,
                yee_edges: true,
                memory_cap: self.memory_cap,
            },
        )?;
        let position = scene.defect().map_or([0.0; 3], |c| c.center());
        let f_unit = C0 / self.spec.c;
        let source = DipoleSource {
            position,
            orientation: self.orientation,
            pulse: Pulse {
                center: self.center_reduced * f_unit,
                bandwidth: self.bandwidth_reduced * f_unit,
                delay: None,
            },
            amplitude: 1.0,
        };
        let probe = match self.probe {
            Some(p) => ProbeSpec {
                position: p,
                component: self.orientation,
            },
            None => default_probe(&self.spec, position, self.orientation),
        };
        let mut cfg = SimulationConfig::new(grid, source, self.n_steps);
        cfg.boundary = self.boundary;
        cfg.probes = vec![probe];
        cfg.memory_cap = self.memory_cap;
        Ok(cfg)
    }
}

/// Settings of a ringdown measurement on a [`WoodpileRun`].
#[derive(Debug, Clone, PartialEq)]
pub struct RingdownPlan {
    /// Search band as `c/λ`.
    pub band: (f64, f64),
    /// Step at which the resonance is first estimated and a field monitor
    /// attached at that frequency. `None` skips the snapshot.
    pub fit_after: Option<usize>,
    pub dft_stride: usize,
    pub inversion: InversionOptions,
    pub threads: Option<usize>,
}

impl RingdownPlan {
    pub fn new(band: (f64, f64)) -> Self {
        Self {
            band,
            fit_after: None,
            dft_stride: 8,
            inversion: InversionOptions::default(),
            threads: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CavityRun {
    pub config: SimulationConfig,
    pub result: RunResult,
    /// Modes fitted at `fit_after`, when requested.
    pub early: Vec<ModeEstimate>,
    /// Modes fitted on the full record.
    pub modes: Vec<ModeEstimate>,
    pub resonance: Option<ModeEstimate>,
    /// Steady-state field at the early resonance estimate, absorbing layers
    /// removed.
    pub snapshot: Option<FieldSnapshot>,
}

/// Strongest decaying mode inside `band` (Hz).
pub fn dominant_mode(modes: &[ModeEstimate], band: (f64, f64)) -> Option<ModeEstimate> {
    modes
        .iter()
        .filter(|m| !m.growing && m.q > 0.0 && m.frequency >= band.0 && m.frequency <= band.1)
        .max_by(|a, b| a.amplitude.total_cmp(&b.amplitude))
        .cloned()
}

impl WoodpileRun {
    /// Run the ringdown, fit the probe record and, when `fit_after` is set,
    /// capture the field of the dominant in-band mode.
    pub fn ringdown(&self, plan: &RingdownPlan) -> Result<CavityRun> {
        let mut config = self.build()?;
        config.threads = plan.threads;
        let f_unit = C0 / self.spec.c;
        let band = (plan.band.0 * f_unit, plan.band.1 * f_unit);
        let off = config.source.pulse.turn_off();
        let c = self.spec.c;
        let fit = |values: &[f64], dt: f64| -> Result<Vec<ModeEstimate>> {
            let first = ((off / dt).ceil() as usize).min(values.len());
            let mut sig = RingdownSignal::new(values[first..].to_vec(), dt);
            sig.band = Some(band);
            sig.period = Some(c);
            harmonic_inversion(&sig, &plan.inversion)
        };
        let mut early = Vec::new();
        let (result, monitor_freq) = {
            let mut sim = Simulation::new(&config)?;
            let mut freq = None;
            if let Some(at) = plan.fit_after {
                sim.step_to(at.min(self.n_steps))?;
                early = fit(&sim.probes()[0].values, sim.dt())?;
                let f0 = dominant_mode(&early, band).ok_or_else(|| {
                    Error::Numeric(format!(
                        "no decaying mode in c/λ {:.4}..{:.4} after {at} steps",
                        plan.band.0, plan.band.1
                    ))
                })?;
                let mut mon = DftMonitor::at(f0.frequency);
                mon.stride = plan.dft_stride.max(1);
                sim.add_monitor(mon)?;
                freq = Some(f0.frequency);
            }
            sim.step_to(self.n_steps)?;
            (sim.finish()?, freq)
        };
        let modes = fit(&result.probes[0].values, result.dt)?;
        let resonance = dominant_mode(&modes, band);
        // the absorbing layers are not part of the physical domain
        let pml = config.boundary.thickness();
        let snapshot = match (monitor_freq, result.snapshots.first()) {
            (Some(_), Some(s)) => {
                let cells = s.to_cells(&config.grid)?;
                let dims = cells.layout.dims;
                Some(cells.crop([pml; 3], dims.map(|n| n - pml))?)
            }
            _ => None,
        };
        Ok(CavityRun {
            config,
            result,
            early,
            modes,
            resonance,
            snapshot,
        })
    }
}
