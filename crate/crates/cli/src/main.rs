use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use woodpile_cli::config::{BandsSection, PipelineConfig, SweepSection};
use woodpile_cli::pipeline::{run_pipeline, PipelineReport, RunOptions};
use woodpile_cli::report::{emit_table, fixture_columns, metrics_csv};
use woodpile_cli::selftest;
use woodpile_cli::units::{parse_quantity, Dimension};
use woodpile_core::cqed::{metrics, CavitySpec, EmitterSpec};
use woodpile_core::modevol::{mode_volume, FieldSnapshot, ModeVolumeReport};
use woodpile_core::specfit::{
    fft_spectrum, harmonic_inversion, mode_table_csv, q_from_peak, InversionOptions, PeakSelector, RingdownSignal,
    Window,
};
use woodpile_core::{Error, Result};

/// Woodpile photonic-crystal cavity toolkit.
#[derive(Parser)]
#[command(name = "woodpile", version)]
struct Cli {
    /// Worker threads for every parallel stage (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Print stage progress on stderr.
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Band structure and gap of the bulk crystal.
    Bands(BandsArgs),
    /// Gap-midgap ratio as a function of rod width.
    Sweep(SweepArgs),
    /// FDTD ringdown of the configured cavity.
    Resonate(ResonateArgs),
    /// Resonances of a probe record (`step,time,value` CSV).
    Fit(FitArgs),
    /// Effective mode volume of a field snapshot.
    Modevol(ModevolArgs),
    /// Cavity-QED figures of merit, or `cqed table` for the reference tables.
    Cqed(CqedArgs),
    /// Run every stage selected by a configuration file.
    Pipeline(PipelineArgs),
    /// Quick checks of each solver.
    Selftest,
}

#[derive(Args)]
struct BandsArgs {
    /// Configuration file; defaults to the reference crystal.
    config: Option<PathBuf>,
    #[arg(long)]
    cutoff: Option<f64>,
    #[arg(long)]
    n_bands: Option<usize>,
    #[arg(long)]
    per_segment: Option<usize>,
    #[arg(long)]
    w_over_c: Option<f64>,
    /// Comma-separated k-path labels, e.g. `X,U',L,Γ`.
    #[arg(long)]
    path: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0.15)]
    from: f64,
    #[arg(long, default_value_t = 0.30)]
    to: f64,
    #[arg(long, default_value_t = 0.01)]
    step: f64,
    #[arg(long)]
    cutoff: Option<f64>,
    #[arg(long)]
    per_segment: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ResonateArgs {
    config: PathBuf,
    /// Grid cells per in-layer pitch.
    #[arg(long)]
    resolution: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    /// `cpml` or `pec`.
    #[arg(long)]
    boundary: Option<String>,
    /// `Ex`, `Ey` or `Ez`.
    #[arg(long)]
    source: Option<String>,
    /// Probe position, e.g. `41.975nm,0nm,0nm`.
    #[arg(long)]
    probe: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    probe: PathBuf,
    /// Leading samples to drop (the source-driven part of the record).
    #[arg(long, default_value_t = 0)]
    skip: usize,
    /// Search band as `c/λ`, e.g. `0.4853,0.5689`; needs `--period`.
    #[arg(long)]
    band: Option<String>,
    /// Stacking period, e.g. `335.8nm`.
    #[arg(long)]
    period: Option<String>,
    #[arg(long, default_value_t = 20)]
    max_modes: usize,
    /// Also report the FFT half-power estimate of the strongest peak.
    #[arg(long)]
    fft: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ModevolArgs {
    /// Complex field grid written by `resonate`/`pipeline`.
    #[arg(long)]
    field: PathBuf,
    /// Permittivity grid on the same cells.
    #[arg(long)]
    eps: PathBuf,
    /// Index used for `(λ/n)³`.
    #[arg(long, default_value_t = 3.3)]
    n: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[command(args_conflicts_with_subcommands = true)]
struct CqedArgs {
    #[command(subcommand)]
    action: Option<CqedAction>,
    /// Resonance wavelength, e.g. `638.98nm`.
    #[arg(long)]
    wavelength: Option<String>,
    #[arg(long)]
    q: Option<f64>,
    /// Mode volume, e.g. `1.17e-3um^3`.
    #[arg(long, conflicts_with = "v_n")]
    v_eff: Option<String>,
    /// Mode volume in units of `(λ/n_def)³`.
    #[arg(long)]
    v_n: Option<f64>,
    #[arg(long, default_value_t = 3.3)]
    n_def: f64,
    /// Stacking period, for the `c/λ` row.
    #[arg(long)]
    period: Option<String>,
    /// Emitter preset.
    #[arg(long, default_value = "nv")]
    emitter: String,
    /// CSV instead of a table.
    #[arg(long)]
    csv: bool,
}

#[derive(Subcommand)]
enum CqedAction {
    /// Recompute the bundled reference tables from their inputs.
    Table {
        /// `1` (defect sizes) or `2` (air buffers); both when omitted.
        #[arg(long)]
        table: Option<u8>,
        #[arg(long)]
        csv: bool,
    },
}

#[derive(Args)]
struct PipelineArgs {
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

const DEFAULT_CONFIG: &str = r#"
[structure]
period = "335.8 nm"

[bands]

[output]
directory = "."
"#;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.jobs {
        if n == 0 {
            eprintln!("error: --jobs must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} worker threads: {e}");
            return ExitCode::from(4);
        }
    }
    let threads = rayon::current_num_threads();
    match dispatch(cli.command, threads, cli.verbose) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cmd: Command, threads: usize, verbose: bool) -> Result<ExitCode> {
    let opts = |text: String, out: Option<PathBuf>| RunOptions {
        config_text: text,
        out_dir: out,
        threads,
        verbose,
    };
    match cmd {
        Command::Bands(a) => {
            let (mut cfg, text) = load_or_default(a.config.as_deref())?;
            cfg.fdtd = None;
            cfg.fit = None;
            cfg.emitter = None;
            let b = cfg.bands.get_or_insert_with(default_bands);
            b.sweep = None;
            if let Some(v) = a.cutoff {
                b.cutoff = v;
            }
            if let Some(v) = a.n_bands {
                b.n_bands = v;
            }
            if let Some(v) = a.per_segment {
                b.per_segment = v;
            }
            if let Some(p) = a.path {
                b.path = Some(p.split(',').map(|s| s.trim().to_string()).collect());
            }
            if let Some(w) = a.w_over_c {
                cfg.structure.w_over_c = w;
            }
            cfg.validate()?;
            let rep = run_pipeline(&cfg, &opts(text, a.out))?;
            if let Some(g) = &rep.gap {
                print!("{}", g.to_toml());
            }
            print_outputs(&rep);
        }
        Command::Sweep(a) => {
            let (mut cfg, text) = load_or_default(a.config.as_deref())?;
            cfg.fdtd = None;
            cfg.fit = None;
            cfg.emitter = None;
            let b = cfg.bands.get_or_insert_with(default_bands);
            b.sweep = Some(SweepSection {
                w_over_c_from: a.from,
                w_over_c_to: a.to,
                w_over_c_step: a.step,
            });
            if let Some(v) = a.cutoff {
                b.cutoff = v;
            }
            if let Some(v) = a.per_segment {
                b.per_segment = v;
            }
            cfg.validate()?;
            let rep = run_pipeline(&cfg, &opts(text, a.out))?;
            let sweep = rep.out_dir.join("sweep.csv");
            let body = std::fs::read_to_string(&sweep).map_err(|e| Error::io(&sweep, e))?;
            print!("{body}");
            print_outputs(&rep);
        }
        Command::Resonate(a) => {
            let (mut cfg, text) = load(&a.config)?;
            cfg.bands = None;
            cfg.emitter = None;
            let f = cfg
                .fdtd
                .as_mut()
                .ok_or_else(|| Error::Config(format!("{} has no [fdtd] section", a.config.display())))?;
            if let Some(v) = a.resolution {
                f.cells_per_a = v;
            }
            if let Some(v) = a.steps {
                f.steps = v;
                f.fit_after = f.fit_after.filter(|&s| s < v);
            }
            if let Some(v) = a.boundary {
                f.boundary = v;
            }
            if let Some(v) = a.source {
                f.source = v;
            }
            if let Some(p) = a.probe {
                let parts: Vec<&str> = p.split(',').collect();
                if parts.len() != 3 {
                    return Err(Error::Config(format!("--probe needs three lengths, got `{p}`")));
                }
                let mut xyz = [woodpile_cli::units::Length(0.0); 3];
                for (slot, s) in xyz.iter_mut().zip(parts) {
                    *slot = woodpile_cli::units::Length(parse_quantity(s, Dimension::Length)?);
                }
                f.probe = Some(xyz);
            }
            cfg.validate()?;
            let rep = run_pipeline(&cfg, &opts(text, a.out))?;
            if let Some(m) = &rep.resonance {
                println!(
                    "resonance: f = {:.6e} Hz, c/λ = {}, Q = {:.4e}",
                    m.frequency,
                    m.reduced.map_or("n/a".into(), |r| format!("{r:.5}")),
                    m.q
                );
            }
            print_outputs(&rep);
        }
        Command::Fit(a) => {
            let mut sig = RingdownSignal::from_csv(&a.probe)?;
            if a.skip >= sig.samples.len() {
                return Err(Error::Config(format!(
                    "--skip {} drops the whole record of {} samples",
                    a.skip,
                    sig.samples.len()
                )));
            }
            sig.samples.drain(..a.skip);
            if let Some(p) = &a.period {
                sig.period = Some(parse_quantity(p, Dimension::Length)?);
            }
            if let Some(b) = &a.band {
                let c = sig
                    .period
                    .ok_or_else(|| Error::Config("--band is given as c/λ and needs --period".into()))?;
                let v: Vec<f64> = b
                    .split(',')
                    .map(|s| s.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::Config(format!("--band: cannot read `{b}`")))?;
                if v.len() != 2 {
                    return Err(Error::Config(format!("--band needs two values, got `{b}`")));
                }
                let unit = woodpile_core::constants::C0 / c;
                sig.band = Some((v[0] * unit, v[1] * unit));
            }
            let modes = harmonic_inversion(
                &sig,
                &InversionOptions {
                    max_modes: a.max_modes,
                    ..InversionOptions::default()
                },
            )?;
            let table = mode_table_csv(&modes);
            emit(&table, a.out.as_deref())?;
            if a.fft {
                let spec = fft_spectrum(&sig, Window::Hann, 8)?;
                let sel = match sig.band {
                    Some((lo, hi)) => PeakSelector::InBand(lo, hi),
                    None => PeakSelector::Max,
                };
                let pk = q_from_peak(&spec, sel)?;
                eprintln!(
                    "fft peak: f = {:.6e} Hz, FWHM = {:.4e} Hz, Q = {:.4e}",
                    pk.frequency, pk.fwhm, pk.q
                );
            }
        }
        Command::Modevol(a) => {
            let snap = FieldSnapshot::read(&a.field, &a.eps)?;
            if !(snap.frequency > 0.0) {
                return Err(Error::Config(format!("{} carries no frequency", a.field.display())));
            }
            let mv = mode_volume(&snap)?;
            let rep = ModeVolumeReport::new(&mv, snap.frequency, a.n);
            emit(&rep.to_toml(), a.out.as_deref())?;
        }
        Command::Cqed(a) => return cqed(a),
        Command::Pipeline(a) => {
            let (cfg, text) = load(&a.config)?;
            let rep = run_pipeline(&cfg, &opts(text, a.out))?;
            if rep.metrics.is_some() {
                let table = rep.out_dir.join("table.txt");
                print!("{}", std::fs::read_to_string(&table).map_err(|e| Error::io(&table, e))?);
            } else if let Some(g) = &rep.gap {
                print!("{}", g.to_toml());
            }
            print_outputs(&rep);
        }
        Command::Selftest => {
            let checks = selftest::run_all();
            let failed = checks.iter().filter(|c| !c.passed).count();
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if failed > 0 {
                return Ok(ExitCode::from(3));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cqed(a: CqedArgs) -> Result<ExitCode> {
    let emitter = match a.emitter.as_str() {
        "nv" | "NV" => EmitterSpec::nv_centre(),
        other => return Err(Error::Config(format!("unknown emitter preset `{other}` (nv)"))),
    };
    if let Some(CqedAction::Table { table, csv }) = a.action {
        let tables: Vec<u8> = match table {
            Some(t @ (1 | 2)) => vec![t],
            Some(t) => return Err(Error::Config(format!("--table {t}: expected 1 or 2"))),
            None => vec![1, 2],
        };
        for t in tables {
            let cols = fixture_columns(t)?;
            if csv {
                let rows: Vec<_> = cols
                    .iter()
                    .map(|c| (format!("{}/{}", c.defect, c.orientation), c.metrics.clone()))
                    .collect();
                print!("{}", metrics_csv(&rows));
            } else {
                println!("table {t}");
                print!("{}", emit_table(&cols));
                println!();
            }
        }
        return Ok(ExitCode::SUCCESS);
    }
    let need = |what: &str| Error::Config(format!("cqed needs --{what}"));
    let lambda = parse_quantity(
        a.wavelength.as_deref().ok_or_else(|| need("wavelength"))?,
        Dimension::Length,
    )?;
    let q = a.q.ok_or_else(|| need("q"))?;
    let v_eff = match (&a.v_eff, a.v_n) {
        (Some(v), _) => parse_quantity(v, Dimension::Volume)?,
        (None, Some(vn)) => vn * (lambda / a.n_def).powi(3),
        (None, None) => return Err(need("v-eff or --v-n")),
    };
    let period = a
        .period
        .as_deref()
        .map(|p| parse_quantity(p, Dimension::Length))
        .transpose()?;
    let cav = CavitySpec {
        lambda,
        q,
        v_eff,
        n_def: a.n_def,
    };
    let m = metrics(&cav, &emitter, period)?;
    if a.csv {
        print!("{}", metrics_csv(&[("cavity".into(), Some(m))]));
    } else {
        let col = woodpile_cli::report::TableColumn {
            defect: "cavity".into(),
            size: "-".into(),
            n_def: a.n_def,
            orientation: "-".into(),
            metrics: Some(m),
        };
        print!("{}", emit_table(&[col]));
    }
    Ok(ExitCode::SUCCESS)
}

fn default_bands() -> BandsSection {
    PipelineConfig::from_toml(DEFAULT_CONFIG)
        .expect("built-in config parses")
        .bands
        .expect("built-in config has bands")
}

fn load(path: &Path) -> Result<(PipelineConfig, String)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let cfg = PipelineConfig::load(path)?;
    Ok((cfg, text))
}

fn load_or_default(path: Option<&Path>) -> Result<(PipelineConfig, String)> {
    match path {
        Some(p) => load(p),
        None => Ok((PipelineConfig::from_toml(DEFAULT_CONFIG)?, DEFAULT_CONFIG.to_string())),
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn print_outputs(rep: &PipelineReport) {
    eprintln!("outputs in {}:", rep.out_dir.display());
    for f in &rep.manifest.files {
        eprintln!("  {} ({} bytes)", f.path, f.bytes);
    }
}
