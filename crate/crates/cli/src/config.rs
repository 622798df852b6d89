//! Pipeline configuration document.
//!
//! A TOML file with one section per stage. `structure` and `output` are
//! required; the presence of `bands`, `fdtd`, `fit` and `emitter` selects
//! which stages run. Physical quantities are strings with a unit.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use woodpile_core::cqed::EmitterSpec;
use woodpile_core::fdtd::{Boundary, Component, CpmlSpec, WoodpileRun};
use woodpile_core::geometry::{BufferPreset, BufferSpec, DefectPreset, DefectSpec, RodCountRule, WoodpileSpec};
use woodpile_core::pwe::{EpsilonRule, PweOptions};
use woodpile_core::specfit::InversionOptions;
use woodpile_core::{Error, Result};

use crate::units::{Frequency, Length};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub structure: StructureSection,
    pub bands: Option<BandsSection>,
    pub fdtd: Option<FdtdSection>,
    pub fit: Option<FitSection>,
    pub emitter: Option<EmitterSection>,
    pub output: OutputSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructureSection {
    /// Stacking period `c`.
    pub period: Length,
    #[serde(default = "default_w_over_c")]
    pub w_over_c: f64,
    #[serde(default = "default_c_over_a")]
    pub c_over_a: f64,
    #[serde(default = "default_h_over_c")]
    pub h_over_c: f64,
    #[serde(default = "default_layers")]
    pub layers: usize,
    #[serde(default = "default_rods")]
    pub rods_per_layer: usize,
    #[serde(default = "default_index")]
    pub n_rod: f64,
    #[serde(default = "default_index")]
    pub n_defect: f64,
    #[serde(default = "one")]
    pub n_background: f64,
    /// `D0`, `D1` or `D2`.
    pub defect: Option<String>,
    /// Explicit defect size, overrides the preset.
    pub defect_size: Option<[Length; 3]>,
    /// `A0`, `A1` or `A2`.
    pub buffer: Option<String>,
    /// `symmetric` or `by-direction`.
    pub rod_count_rule: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandsSection {
    /// Plane-wave cutoff in units of `2π/c`.
    #[serde(default = "default_cutoff")]
    pub cutoff: f64,
    #[serde(default = "default_n_bands")]
    pub n_bands: usize,
    pub path: Option<Vec<String>>,
    #[serde(default = "default_per_segment")]
    pub per_segment: usize,
    /// `inverse-of-eps` or `fourier-of-inverse`.
    pub rule: Option<String>,
    pub seed: Option<u64>,
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub w_over_c_from: f64,
    pub w_over_c_to: f64,
    pub w_over_c_step: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FdtdSection {
    pub cells_per_a: f64,
    pub steps: usize,
    /// Step at which the ringdown is first fitted and the field monitor attached.
    pub fit_after: Option<usize>,
    /// `cpml` or `pec`.
    #[serde(default = "default_boundary")]
    pub boundary: String,
    #[serde(default = "default_pml_cells")]
    pub pml_cells: usize,
    /// `Ex`, `Ey` or `Ez`.
    #[serde(default = "default_source")]
    pub source: String,
    pub air_gap: Option<Length>,
    pub probe: Option<[Length; 3]>,
    #[serde(default = "default_dft_stride")]
    pub dft_stride: usize,
    /// Pulse centre and bandwidth as `c/λ`.
    pub pulse_center_c_over_lambda: Option<f64>,
    pub pulse_bandwidth_c_over_lambda: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    /// Search band as `c/λ`; defaults to the computed gap, then to the bulk gap.
    pub band_c_over_lambda: Option<[f64; 2]>,
    #[serde(default = "default_max_modes")]
    pub max_modes: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmitterSection {
    /// `nv`; explicit keys override preset values.
    pub preset: Option<String>,
    pub wavelength: Option<Length>,
    /// Natural linewidth `γ/2π`.
    pub linewidth: Option<Frequency>,
    pub n_host: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub directory: PathBuf,
    /// Write the complex field and permittivity grids.
    #[serde(default = "yes")]
    pub snapshots: bool,
}

fn default_w_over_c() -> f64 {
    0.2145
}
fn default_c_over_a() -> f64 {
    std::f64::consts::SQRT_2
}
fn default_h_over_c() -> f64 {
    0.25
}
fn default_layers() -> usize {
    37
}
fn default_rods() -> usize {
    13
}
fn default_index() -> f64 {
    3.3
}
fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn default_cutoff() -> f64 {
    8.0
}
fn default_n_bands() -> usize {
    6
}
fn default_per_segment() -> usize {
    8
}
fn default_boundary() -> String {
    "cpml".into()
}
fn default_pml_cells() -> usize {
    8
}
fn default_source() -> String {
    "Ex".into()
}
fn default_dft_stride() -> usize {
    8
}
fn default_max_modes() -> usize {
    20
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.woodpile()?.validate()?;
        if let Some(b) = &self.bands {
            b.options()?;
            if let Some(s) = &b.sweep {
                s.values()?;
            }
        }
        if let Some(f) = &self.fdtd {
            f.boundary()?;
            f.component()?;
            if let Some(at) = f.fit_after {
                if at >= f.steps {
                    return Err(Error::Config(format!(
                        "fdtd.fit_after = {at} must be below fdtd.steps = {}",
                        f.steps
                    )));
                }
            }
        }
        if self.fit.is_some() && self.fdtd.is_none() {
            return Err(Error::Config("section [fit] needs an [fdtd] section".into()));
        }
        if self.emitter.is_some() && self.fit.is_none() {
            return Err(Error::Config("section [emitter] needs a [fit] section".into()));
        }
        if let Some(e) = &self.emitter {
            e.spec()?.validate()?;
        }
        Ok(())
    }

    pub fn woodpile(&self) -> Result<WoodpileSpec> {
        let s = &self.structure;
        let c = s.period.0;
        let mut spec = WoodpileSpec::fcc(c, s.w_over_c).with_counts(s.layers, s.rods_per_layer);
        spec.a = c / s.c_over_a;
        spec.h = s.h_over_c * c;
        spec.n_rod = s.n_rod;
        spec.n_defect = s.n_defect;
        spec.n_background = s.n_background;
        spec.defect = match (&s.defect_size, &s.defect) {
            (Some(size), _) => Some(DefectSpec::new([size[0].0, size[1].0, size[2].0])),
            (None, Some(name)) => Some(DefectSpec::preset(name.parse::<DefectPreset>()?, c)),
            (None, None) => None,
        };
        spec.buffer = match &s.buffer {
            Some(name) => Some(BufferSpec::preset(name.parse::<BufferPreset>()?, spec.a, spec.w, c)),
            None => None,
        };
        spec.rod_count_rule = match s.rod_count_rule.as_deref() {
            None | Some("symmetric") => RodCountRule::Symmetric,
            Some("by-direction") => RodCountRule::ByDirection,
            Some(other) => {
                return Err(Error::Config(format!(
                    "structure.rod_count_rule: unknown rule `{other}` (symmetric, by-direction)"
                )))
            }
        };
        Ok(spec)
    }

    /// Defect-free crystal used for the band structure.
    pub fn bulk(&self) -> Result<WoodpileSpec> {
        let mut spec = self.woodpile()?;
        spec.defect = None;
        spec.buffer = None;
        Ok(spec)
    }

    pub fn run(&self) -> Result<Option<WoodpileRun>> {
        let Some(f) = &self.fdtd else { return Ok(None) };
        let mut run = WoodpileRun::new(self.woodpile()?, f.component()?);
        run.cells_per_a = f.cells_per_a;
        run.n_steps = f.steps;
        run.boundary = f.boundary()?;
        if let Some(g) = f.air_gap {
            run.air_gap = g.0;
        }
        run.probe = f.probe.map(|p| [p[0].0, p[1].0, p[2].0]);
        if let Some(c) = f.pulse_center_c_over_lambda {
            run.center_reduced = c;
        }
        if let Some(b) = f.pulse_bandwidth_c_over_lambda {
            run.bandwidth_reduced = b;
        }
        Ok(Some(run))
    }
}

impl BandsSection {
    pub fn options(&self) -> Result<PweOptions> {
        let rule = match self.rule.as_deref() {
            None | Some("inverse-of-eps") => EpsilonRule::InverseOfEps,
            Some("fourier-of-inverse") => EpsilonRule::FourierOfInverse,
            Some(other) => {
                return Err(Error::Config(format!(
                    "bands.rule: unknown rule `{other}` (inverse-of-eps, fourier-of-inverse)"
                )))
            }
        };
        if !(self.cutoff > 0.0) || self.n_bands < 3 {
            return Err(Error::Config(
                "bands.cutoff must be positive and bands.n_bands at least 3".into(),
            ));
        }
        let mut opts = PweOptions {
            cutoff: self.cutoff,
            n_bands: self.n_bands,
            rule,
            ..PweOptions::default()
        };
        if let Some(seed) = self.seed {
            opts.seed = seed;
        }
        Ok(opts)
    }

    pub fn labels(&self) -> Vec<&str> {
        match &self.path {
            Some(p) => p.iter().map(String::as_str).collect(),
            None => woodpile_core::pwe::DEFAULT_PATH.to_vec(),
        }
    }
}

impl SweepSection {
    pub fn values(&self) -> Result<Vec<f64>> {
        let (a, b, s) = (self.w_over_c_from, self.w_over_c_to, self.w_over_c_step);
        if !(s > 0.0) || !(b >= a) || !(a > 0.0) {
            return Err(Error::Config(format!("bands.sweep: bad range {a}..{b} step {s}")));
        }
        let n = ((b - a) / s + 1e-9).floor() as usize;
        Ok((0..=n).map(|i| a + i as f64 * s).collect())
    }
}

impl FdtdSection {
    pub fn boundary(&self) -> Result<Boundary> {
        match self.boundary.as_str() {
            "pec" => Ok(Boundary::Pec),
            "cpml" => Ok(Boundary::Cpml(CpmlSpec {
                cells: self.pml_cells,
                ..CpmlSpec::default()
            })),
            other => Err(Error::Config(format!(
                "fdtd.boundary: unknown boundary `{other}` (cpml, pec)"
            ))),
        }
    }

    pub fn component(&self) -> Result<Component> {
        self.source.parse()
    }
}

impl FitSection {
    pub fn options(&self) -> InversionOptions {
        InversionOptions {
            max_modes: self.max_modes,
            ..InversionOptions::default()
        }
    }
}

impl EmitterSection {
    pub fn spec(&self) -> Result<EmitterSpec> {
        let mut e = match self.preset.as_deref() {
            Some("nv") | Some("NV") => EmitterSpec::nv_centre(),
            Some(other) => return Err(Error::Config(format!("emitter.preset: unknown preset `{other}` (nv)"))),
            None => {
                if self.wavelength.is_none() || self.linewidth.is_none() || self.n_host.is_none() {
                    return Err(Error::Config(
                        "emitter: without a preset, wavelength, linewidth and n_host are required".into(),
                    ));
                }
                EmitterSpec::nv_centre()
            }
        };
        if let Some(l) = self.wavelength {
            e.lambda = l.0;
        }
        if let Some(f) = self.linewidth {
            e.gamma = 2.0 * std::f64::consts::PI * f.0;
        }
        if let Some(n) = self.n_host {
            e.n_os = n;
        }
        Ok(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[structure]
period = "335.8 nm"

[bands]
cutoff = 6

[output]
directory = "out"
"#;

    #[test]
    fn minimal_bands_config() {
        let cfg = PipelineConfig::from_toml(MINIMAL).unwrap();
        assert!(cfg.fdtd.is_none());
        let spec = cfg.woodpile().unwrap();
        assert!((spec.c - 335.8e-9).abs() < 1e-18);
        assert!((spec.w / spec.c - 0.2145).abs() < 1e-12);
    }

    #[test]
    fn unknown_key_names_key_and_line() {
        let text = MINIMAL.replace("cutoff = 6", "cutoff = 6\ncutof = 7");
        let err = PipelineConfig::from_toml(&text).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Parse(_)));
        assert!(msg.contains("cutof"), "{msg}");
        assert!(msg.contains("line 7"), "{msg}");
    }

    #[test]
    fn units_are_mandatory() {
        let text = MINIMAL.replace("\"335.8 nm\"", "\"335.8\"");
        let err = PipelineConfig::from_toml(&text).unwrap_err();
        assert!(err.to_string().contains("no unit"), "{err}");
    }

    #[test]
    fn fit_requires_fdtd() {
        let text = format!("{MINIMAL}\n[fit]\nmax_modes = 4\n");
        assert!(matches!(PipelineConfig::from_toml(&text), Err(Error::Config(_))));
    }
}
