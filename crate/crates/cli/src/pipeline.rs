//! Staged execution of a [`PipelineConfig`].
//!
//! Stages run in order `geometry`, `bands`, `resonate`, `fit`, `modevol`,
//! `cqed`; a stage runs when its section is present. Each output file is
//! hashed into `manifest.toml`, which is also written when a stage fails.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use woodpile_core::constants::C0;
use woodpile_core::cqed::{metrics, CavityMetrics, CavitySpec};
use woodpile_core::fdtd::{self, CavityRun, RingdownPlan};
use woodpile_core::geometry::{build_scene, primitive_cell};
use woodpile_core::modevol::{line_cut_csv, mode_volume, ModeVolumeReport};
use woodpile_core::pwe::{band_structure, gap_midgap, sweep_rod_width, GapReport, KPath};
use woodpile_core::specfit::{mode_table_csv, ModeEstimate};
use woodpile_core::{Error, Result};

use crate::config::PipelineConfig;
use crate::manifest::{Manifest, StageRecord};
use crate::report::{emit_table, metrics_csv, TableColumn};

/// Search band used when neither `[fit]` nor `[bands]` gives one.
pub const BULK_GAP: (f64, f64) = (0.4853, 0.5689);

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Source text of the configuration, hashed into the manifest.
    pub config_text: String,
    /// Overrides `output.directory`.
    pub out_dir: Option<PathBuf>,
    /// Worker threads recorded in the manifest.
    pub threads: usize,
    /// Progress lines on stderr.
    pub verbose: bool,
}

#[derive(Debug, Clone)]
pub struct PipelineReport {
    pub out_dir: PathBuf,
    pub gap: Option<GapReport>,
    pub modes: Vec<ModeEstimate>,
    pub resonance: Option<ModeEstimate>,
    pub volume: Option<ModeVolumeReport>,
    pub metrics: Option<CavityMetrics>,
    pub manifest: Manifest,
}

struct Runner {
    dir: PathBuf,
    manifest: Manifest,
    verbose: bool,
}

impl Runner {
    fn stage<T>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        if self.verbose {
            eprintln!("[{name}] running");
        }
        let t = Instant::now();
        let r = f(self);
        let wall = t.elapsed().as_secs_f64();
        let rec = StageRecord {
            name: name.to_string(),
            status: if r.is_ok() { "ok" } else { "failed" }.into(),
            wall_seconds: wall,
            error: r.as_ref().err().map(|e| e.to_string()),
        };
        self.manifest.stages.push(rec);
        if self.verbose {
            eprintln!("[{name}] {} in {wall:.1} s", if r.is_ok() { "done" } else { "failed" });
        }
        match r {
            Ok(v) => Ok(v),
            Err(e) => {
                let _ = self.manifest.write(&self.dir);
                Err(Error::Stage {
                    stage: name.to_string(),
                    source: Box::new(e),
                })
            }
        }
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        self.manifest.add_file(&self.dir, &path)?;
        Ok(path)
    }

    fn record(&mut self, paths: &[PathBuf]) -> Result<()> {
        for p in paths {
            self.manifest.add_file(&self.dir, p)?;
        }
        Ok(())
    }
}

pub fn run_pipeline(cfg: &PipelineConfig, opts: &RunOptions) -> Result<PipelineReport> {
    let dir = opts.out_dir.clone().unwrap_or_else(|| cfg.output.directory.clone());
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let seed = match &cfg.bands {
        Some(b) => b.options()?.seed,
        None => woodpile_core::pwe::PweOptions::default().seed,
    };
    let mut r = Runner {
        dir: dir.clone(),
        manifest: Manifest::new(&opts.config_text, opts.threads, seed),
        verbose: opts.verbose,
    };
    let spec = cfg.woodpile()?;

    r.stage("geometry", |r| {
        let scene = build_scene(&spec)?;
        r.write("scene.toml", &scene.to_toml())?;
        Ok(())
    })?;

    let mut gap = None;
    if let Some(bands) = &cfg.bands {
        gap = Some(r.stage("bands", |r| {
            let bulk = cfg.bulk()?;
            let popts = bands.options()?;
            let cell = primitive_cell(&bulk)?;
            let labels = bands.labels();
            let path = KPath::from_labels(&labels, &cell, bands.per_segment)?;
            let bs = band_structure(&cell, &path, &popts)?;
            r.manifest.resolution.pwe_cutoff = Some(popts.cutoff);
            r.manifest.resolution.plane_waves = Some(bs.plane_waves);
            r.write("bands.csv", &bs.to_csv())?;
            let g = gap_midgap(&bs, 2, 3)?;
            r.write("gap.toml", &g.to_toml())?;
            if let Some(sweep) = &bands.sweep {
                let rows = sweep_rod_width(&bulk, &sweep.values()?, &labels, bands.per_segment, &popts)?;
                r.write("sweep.csv", &sweep_csv(&rows))?;
            }
            Ok(g)
        })?);
    }

    let Some(run) = cfg.run()? else {
        let manifest = finish(&mut r)?;
        return Ok(PipelineReport {
            out_dir: dir,
            gap,
            modes: Vec::new(),
            resonance: None,
            volume: None,
            metrics: None,
            manifest,
        });
    };
    let fdtd_cfg = cfg.fdtd.as_ref().expect("run implies fdtd section");
    r.manifest.resolution.cells_per_a = Some(run.cells_per_a);
    r.manifest.resolution.steps = Some(run.n_steps);

    let Some(fit) = &cfg.fit else {
        r.stage("resonate", |r| {
            let sim = run.build()?;
            r.manifest.resolution.grid_cells = Some(sim.grid.layout.dims);
            r.manifest.resolution.dt_s = Some(sim.dt()?);
            let res = fdtd::run(&sim)?;
            r.write("probe.csv", &res.probe_csv(0))?;
            Ok(())
        })?;
        let manifest = finish(&mut r)?;
        return Ok(PipelineReport {
            out_dir: dir,
            gap,
            modes: Vec::new(),
            resonance: None,
            volume: None,
            metrics: None,
            manifest,
        });
    };

    let band = fit
        .band_c_over_lambda
        .map(|b| (b[0], b[1]))
        .or(gap.as_ref().map(|g| (g.lower, g.upper)))
        .unwrap_or(BULK_GAP);
    let want_field = cfg.emitter.is_some() || cfg.output.snapshots;
    let cavity: CavityRun = r.stage("resonate", |r| {
        let mut plan = RingdownPlan::new(band);
        plan.inversion = fit.options();
        plan.dft_stride = fdtd_cfg.dft_stride;
        if want_field {
            plan.fit_after = Some(fdtd_cfg.fit_after.unwrap_or(run.n_steps / 2));
        }
        let cav = run.ringdown(&plan)?;
        r.manifest.resolution.grid_cells = Some(cav.config.grid.layout.dims);
        r.manifest.resolution.dt_s = Some(cav.result.dt);
        r.write("probe.csv", &cav.result.probe_csv(0))?;
        if let (Some(snap), true) = (&cav.snapshot, cfg.output.snapshots) {
            let files = snap.write(&r.dir.join("field.bin"), &r.dir.join("eps.bin"))?;
            r.record(&files)?;
        }
        Ok(cav)
    })?;

    let resonance = r.stage("fit", |r| {
        r.write("modes.csv", &mode_table_csv(&cavity.modes))?;
        if !cavity.early.is_empty() {
            r.write("modes_early.csv", &mode_table_csv(&cavity.early))?;
        }
        cavity
            .resonance
            .clone()
            .ok_or_else(|| Error::Numeric(format!("no decaying mode between c/λ {:.4} and {:.4}", band.0, band.1)))
    })?;

    let mut volume = None;
    if let Some(snap) = &cavity.snapshot {
        volume = Some(r.stage("modevol", |r| {
            let mv = mode_volume(snap)?;
            // the field was captured at the early estimate; report it at the final one
            let rep = ModeVolumeReport::new(&mv, resonance.frequency, spec.n_defect);
            r.write("modevol.toml", &rep.to_toml())?;
            for (axis, name) in ["x", "y", "z"].iter().enumerate() {
                r.write(&format!("cut_{name}.csv"), &line_cut_csv(snap, axis, mv.argmax)?)?;
            }
            Ok(rep)
        })?);
    }

    let mut row = None;
    if let (Some(em), Some(vol)) = (&cfg.emitter, &volume) {
        row = Some(r.stage("cqed", |r| {
            let emitter = em.spec()?;
            let cav = CavitySpec {
                lambda: C0 / resonance.frequency,
                q: resonance.q,
                v_eff: vol.v_eff_um3 * 1e-18,
                n_def: spec.n_defect,
            };
            let m = metrics(&cav, &emitter, Some(spec.c))?;
            let name = format!(
                "{}/{}",
                cfg.structure.defect.as_deref().unwrap_or("custom"),
                fdtd_cfg.source
            );
            r.write("cqed.csv", &metrics_csv(&[(name, Some(m.clone()))]))?;
            let col = TableColumn {
                defect: cfg.structure.defect.clone().unwrap_or_else(|| "custom".into()),
                size: spec
                    .defect
                    .map(|d| {
                        format!(
                            "{:.2}c x {:.2}c x {:.2}c",
                            d.size[0] / spec.c,
                            d.size[1] / spec.c,
                            d.size[2] / spec.c
                        )
                    })
                    .unwrap_or_else(|| "none".into()),
                n_def: spec.n_defect,
                orientation: fdtd_cfg.source.clone(),
                metrics: Some(m.clone()),
            };
            r.write("table.txt", &emit_table(&[col]))?;
            Ok(m)
        })?);
    }

    let manifest = finish(&mut r)?;
    Ok(PipelineReport {
        out_dir: dir,
        gap,
        modes: cavity.modes,
        resonance: Some(resonance),
        volume,
        metrics: row,
        manifest,
    })
}

fn finish(r: &mut Runner) -> Result<Manifest> {
    r.manifest.write(&r.dir)?;
    Ok(r.manifest.clone())
}

pub fn sweep_csv(rows: &[(f64, GapReport)]) -> String {
    let mut s = String::from("w_over_c,lower,upper,midgap,gap_midgap_ratio\n");
    for (w, g) in rows {
        let _ = writeln!(s, "{w:.6},{:.8},{:.8},{:.8},{:.8}", g.lower, g.upper, g.midgap, g.ratio);
    }
    s
}
