//! The `nese` command-line tool.
//!
//! ```text
//! nese run <cfg>                  one configuration over a sequence
//! nese sweep <cfg>                every (box_size, precision) combination
//! nese gen <scene> <out> [--seed N]
//! nese tables                     reproduced calibration tables
//! ```
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 runtime error.
//! `NESE_THREADS` bounds the worker pool used by parallel execution.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::energy::{
    self, energy_csv, frame_energy, periodic_trace, read_harvest_trace, simulate_intermittent,
    Category, EnergyModel, EnergySummary, FrameEnergy, HarvesterSpec, IntermittentReport,
    OffInterval, PowerTable,
};
use crate::engine::{
    BackgroundKind, Engine, EngineOptions, NeseConfig, StepResult, STRICT_BOX_SIZES,
    STRICT_PRECISIONS,
};
use crate::error::{Error, Result};
use crate::frame_io::{load_sequence, write_mask_pgm, write_pgm, Frame, Mask};
use crate::metrics::{score_mask_with, sweep_report, Score, SweepInput, SweepReport, TruthRule};
use crate::nvm_store::NvmParams;
use crate::par::{self, Execution};
use crate::scene_gen::{generate, SceneSpec};
use crate::sensor_model::{BoxCensus, BoxGrid};

/// Frame size of the fabricated array.
pub const STRICT_FRAME_SIZE: usize = 600;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "nese",
    version,
    about = "Near-sensor event detection simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one configuration over a frame sequence.
    Run { config: PathBuf },
    /// Run every (box_size, precision) combination and write a sweep report.
    Sweep { config: PathBuf },
    /// Generate a synthetic scene: frames and ground-truth masks.
    Gen {
        scene: PathBuf,
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the reproduced box-size and precision tables.
    Tables,
}

/// Error plus the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub error: Error,
}

impl CliError {
    fn config(error: Error) -> Self {
        Self {
            code: EXIT_CONFIG,
            error,
        }
    }

    fn runtime(error: Error) -> Self {
        Self {
            code: EXIT_RUNTIME,
            error,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    pub frames_dir: Option<PathBuf>,
    pub pattern: Option<String>,
    /// Ground-truth masks for `frames_dir` input, matched by order.
    pub truth_dir: Option<PathBuf>,
    pub truth_pattern: Option<String>,
    /// Scene spec to synthesize instead of reading frames.
    pub scene: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodicHarvest {
    pub joules: f64,
    pub period: usize,
    pub on_steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarvesterConfig {
    pub capacity: f64,
    pub power_on_threshold: f64,
    #[serde(default)]
    pub initial_charge: f64,
    /// CSV trace file (`joules` header).
    pub trace_file: Option<PathBuf>,
    /// Constant joules per frame.
    pub constant: Option<f64>,
    pub periodic: Option<PeriodicHarvest>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub box_sizes: Vec<usize>,
    pub precisions: Vec<u8>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            box_sizes: STRICT_BOX_SIZES.to_vec(),
            precisions: STRICT_PRECISIONS.to_vec(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimOptions {
    pub execution: Execution,
    pub retention_decay: bool,
    pub background: BackgroundKind,
    pub truth_rule: TruthRule,
    /// Write per-frame change masks (`run` only).
    pub write_masks: Option<bool>,
}

/// Contents of a run/sweep configuration file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub strict_mode: bool,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub engine: NeseConfig,
    #[serde(default)]
    pub nvm: NvmParams,
    #[serde(default)]
    pub energy: EnergyModel,
    pub harvester: Option<HarvesterConfig>,
    pub input: InputConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub options: SimOptions,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.engine.strict = cfg.engine.strict || cfg.strict_mode;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.output_dir = resolve(base, &cfg.output_dir);
        for p in [
            &mut cfg.input.frames_dir,
            &mut cfg.input.truth_dir,
            &mut cfg.input.scene,
        ]
        .into_iter()
        .flatten()
        {
            *p = resolve(base, p);
        }
        if let Some(h) = cfg.harvester.as_mut() {
            if let Some(t) = h.trace_file.as_mut() {
                *t = resolve(base, t);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.engine.validate()?;
        self.nvm.validate()?;
        self.energy.validate()?;
        match (&self.input.frames_dir, &self.input.scene) {
            (Some(_), Some(_)) => {
                return Err(Error::invalid(
                    "input",
                    "set only one of frames_dir and scene",
                ))
            }
            (None, None) => return Err(Error::invalid("input", "set frames_dir or scene")),
            _ => {}
        }
        if let Some(h) = &self.harvester {
            let sources = [
                h.trace_file.is_some(),
                h.constant.is_some(),
                h.periodic.is_some(),
            ];
            if sources.iter().filter(|&&s| s).count() != 1 {
                return Err(Error::invalid(
                    "harvester",
                    "set exactly one of trace_file, constant, periodic",
                ));
            }
        }
        if self.sweep.box_sizes.is_empty() || self.sweep.precisions.is_empty() {
            return Err(Error::invalid("sweep", "ranges must be non-empty"));
        }
        for &b in &self.sweep.box_sizes {
            NeseConfig {
                box_size: b,
                ..self.engine
            }
            .validate()
            .map_err(|e| Error::invalid("sweep.box_sizes", e.to_string()))?;
        }
        for &p in &self.sweep.precisions {
            NeseConfig {
                precision: p,
                ..self.engine
            }
            .validate()
            .map_err(|e| Error::invalid("sweep.precisions", e.to_string()))?;
        }
        Ok(())
    }

    fn engine_options(&self) -> EngineOptions {
        EngineOptions {
            execution: self.options.execution,
            background: self.options.background,
            retention_decay: self.options.retention_decay,
        }
    }

    fn harvester_spec(&self, frames: usize) -> Result<Option<HarvesterSpec>> {
        let Some(h) = &self.harvester else {
            return Ok(None);
        };
        let trace = if let Some(path) = &h.trace_file {
            read_harvest_trace(path)?
        } else if let Some(j) = h.constant {
            energy::constant_trace(j, frames)
        } else if let Some(p) = &h.periodic {
            periodic_trace(p.joules, p.period, p.on_steps, frames)
        } else {
            unreachable!("validated")
        };
        let spec = HarvesterSpec {
            capacity: h.capacity,
            harvest_trace: trace,
            power_on_threshold: h.power_on_threshold,
            frame_period: self.energy.frame_period,
            initial_charge: h.initial_charge,
        };
        spec.validate()?;
        Ok(Some(spec))
    }
}

/// Frames plus optional full-resolution truth.
#[derive(Clone, Debug)]
pub struct Sequence {
    pub frames: Vec<Frame>,
    pub truth: Option<Vec<Mask>>,
}

/// Loads the configured input. Missing paths are configuration errors.
pub fn load_input(cfg: &RunConfig) -> Result<Sequence> {
    let seq = if let Some(dir) = &cfg.input.frames_dir {
        if !dir.is_dir() {
            return Err(Error::Config(format!(
                "input directory {} does not exist",
                dir.display()
            )));
        }
        let frames = load_sequence(dir, cfg.input.pattern.as_deref().unwrap_or("*.pgm"))?;
        let truth = match &cfg.input.truth_dir {
            None => None,
            Some(tdir) => {
                if !tdir.is_dir() {
                    return Err(Error::Config(format!(
                        "truth directory {} does not exist",
                        tdir.display()
                    )));
                }
                let t = load_sequence(tdir, cfg.input.truth_pattern.as_deref().unwrap_or("*.pgm"))?;
                if t.len() != frames.len() || !t[0].same_dims(&frames[0]) {
                    return Err(Error::DimensionMismatch(format!(
                        "{} truth masks of {}x{} for {} frames of {}x{}",
                        t.len(),
                        t[0].width(),
                        t[0].height(),
                        frames.len(),
                        frames[0].width(),
                        frames[0].height()
                    )));
                }
                Some(t.iter().map(|f| Mask::from_frame(f, 128)).collect())
            }
        };
        Sequence { frames, truth }
    } else {
        let path = cfg.input.scene.as_ref().expect("validated");
        if !path.is_file() {
            return Err(Error::Config(format!(
                "scene file {} does not exist",
                path.display()
            )));
        }
        let spec = SceneSpec::load(path)?;
        let (frames, truth) = generate(&spec, cfg.seed)?;
        Sequence {
            frames,
            truth: Some(truth),
        }
    };
    if cfg.strict_mode {
        let f = &seq.frames[0];
        if f.width() != STRICT_FRAME_SIZE || f.height() != STRICT_FRAME_SIZE {
            return Err(Error::invalid(
                "frame size",
                format!(
                    "{}x{} but strict mode requires {STRICT_FRAME_SIZE}x{STRICT_FRAME_SIZE}",
                    f.width(),
                    f.height()
                ),
            ));
        }
    }
    Ok(seq)
}

/// Everything one configuration produced over a sequence.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub config: NeseConfig,
    pub results: Vec<StepResult>,
    pub energies: Vec<FrameEnergy>,
    pub score: Option<Score>,
    pub energy: EnergySummary,
    pub intermittent: Option<IntermittentReport>,
    pub engine: Engine,
}

/// Runs one engine configuration over a sequence (with or without an
/// intermittent supply) and scores it against truth when available.
pub fn execute(
    cfg: &RunConfig,
    engine_cfg: NeseConfig,
    seq: &Sequence,
    harvester: Option<&HarvesterSpec>,
) -> Result<RunOutcome> {
    let mut engine = Engine::init_with(
        engine_cfg,
        &seq.frames[0],
        cfg.nvm,
        cfg.energy.clone(),
        cfg.engine_options(),
    )?;
    let init_write = engine.ledger().get(Category::MramWrite);
    let (results, intermittent) = match harvester {
        None => (engine.run(&seq.frames)?, None),
        Some(h) => {
            let report = simulate_intermittent(&mut engine, &seq.frames, h, cfg.seed)?;
            (report.results().cloned().collect(), Some(report))
        }
    };
    let table = &cfg.energy.power_table;
    let energies = results
        .iter()
        .map(|r| frame_energy(r, &engine_cfg, table, cfg.energy.frame_period))
        .collect::<Result<Vec<_>>>()?;
    let detection = table.detection_power(engine_cfg.box_size, engine_cfg.precision)?;
    let energy = EnergySummary::new(
        results.iter().zip(&energies),
        init_write,
        detection,
        engine.sense_power_extrapolated(),
    );
    let score = match &seq.truth {
        None => None,
        Some(truth) => {
            let mut total = Score::default();
            for r in &results {
                let s = score_mask_with(
                    &r.change_mask,
                    &truth[r.frame_index],
                    Some(engine.grid()),
                    cfg.options.truth_rule,
                )?;
                total = total.merge(&s);
            }
            Some(total)
        }
    };
    Ok(RunOutcome {
        config: engine_cfg,
        results,
        energies,
        score,
        energy,
        intermittent,
        engine,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct IntermittentSummary {
    pub power_cycles: usize,
    pub off_intervals: Vec<OffInterval>,
    pub skipped_frames: Vec<usize>,
    pub retention_flips: usize,
    pub harvested_joules: f64,
    pub consumed_joules: f64,
    pub spilled_joules: f64,
    pub final_stored_joules: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub strict_mode: bool,
    pub config: NeseConfig,
    pub frames: usize,
    pub frames_processed: usize,
    pub event_frames: Vec<usize>,
    pub sensor_mode_entries: usize,
    pub background_updates: Vec<usize>,
    pub transferred_pixel_rows: usize,
    pub frame_period: f64,
    pub frame_period_is_default: bool,
    pub score: Option<Score>,
    pub energy: EnergySummary,
    pub intermittent: Option<IntermittentSummary>,
}

impl RunSummary {
    pub fn new(cfg: &RunConfig, frames: usize, out: &RunOutcome) -> Self {
        let event_frames: Vec<usize> = out
            .results
            .iter()
            .filter(|r| r.sensor_mode_entered)
            .map(|r| r.frame_index)
            .collect();
        Self {
            seed: cfg.seed,
            strict_mode: cfg.strict_mode,
            config: out.config,
            frames,
            frames_processed: out.results.len(),
            sensor_mode_entries: event_frames.len(),
            event_frames,
            background_updates: out
                .results
                .iter()
                .filter(|r| r.background_updated)
                .map(|r| r.frame_index)
                .collect(),
            transferred_pixel_rows: out
                .results
                .iter()
                .flat_map(|r| r.transferred_rows.iter().map(|s| s.len()))
                .sum(),
            frame_period: cfg.energy.frame_period,
            frame_period_is_default: cfg.energy.frame_period == EnergyModel::default().frame_period,
            score: out.score,
            energy: out.energy.clone(),
            intermittent: out.intermittent.as_ref().map(|r| IntermittentSummary {
                power_cycles: r.power_cycles,
                off_intervals: r.off_intervals.clone(),
                skipped_frames: r.skipped_frames.clone(),
                retention_flips: r.retention_flips,
                harvested_joules: r.harvested_joules,
                consumed_joules: r.consumed_joules,
                spilled_joules: r.spilled_joules,
                final_stored_joules: r.final_stored_joules,
            }),
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn load_checked(config: &Path) -> CliResult<(RunConfig, Sequence)> {
    let cfg = RunConfig::load(config).map_err(CliError::config)?;
    let seq = load_input(&cfg).map_err(|e| match e {
        Error::Io { .. } | Error::PgmHeader { .. } | Error::Truncated { .. } => {
            CliError::runtime(e)
        }
        other => CliError::config(other),
    })?;
    Ok((cfg, seq))
}

pub fn cmd_run(config: &Path) -> CliResult<RunSummary> {
    let (cfg, seq) = load_checked(config)?;
    let harvester = cfg
        .harvester_spec(seq.frames.len())
        .map_err(CliError::config)?;
    let out = execute(&cfg, cfg.engine, &seq, harvester.as_ref()).map_err(CliError::runtime)?;
    let summary = RunSummary::new(&cfg, seq.frames.len(), &out);

    let write = || -> Result<()> {
        create_dir(&cfg.output_dir)?;
        if cfg.options.write_masks.unwrap_or(true) {
            let masks = cfg.output_dir.join("masks");
            create_dir(&masks)?;
            for r in &out.results {
                write_mask_pgm(
                    &r.change_mask,
                    masks.join(format!("change_{:04}.pgm", r.frame_index)),
                )?;
            }
        }
        write_text(
            &cfg.output_dir.join("energy.csv"),
            &energy_csv(out.results.iter().zip(&out.energies))?,
        )?;
        write_text(
            &cfg.output_dir.join("summary.json"),
            &(serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n"),
        )?;
        out.engine
            .background()
            .save_snapshot(cfg.output_dir.join("background.nvm"))
    };
    write().map_err(CliError::runtime)?;
    Ok(summary)
}

/// Runs every configured `(box_size, precision)` pair on the same input.
pub fn sweep(cfg: &RunConfig, seq: &Sequence) -> Result<SweepReport> {
    let combos: Vec<(usize, u8)> = cfg
        .sweep
        .box_sizes
        .iter()
        .flat_map(|&b| cfg.sweep.precisions.iter().map(move |&p| (b, p)))
        .collect();
    let harvester = cfg.harvester_spec(seq.frames.len())?;
    // each worker runs its own engine sequentially
    let mut inner = cfg.clone();
    inner.options.execution = Execution::Sequential;
    let results = par::map_slice(cfg.options.execution, &combos, |&(box_size, precision)| {
        let engine_cfg = NeseConfig {
            box_size,
            precision,
            ..cfg.engine
        };
        let out = execute(&inner, engine_cfg, seq, harvester.as_ref())?;
        Ok(SweepInput {
            box_size,
            precision,
            score: out.score.unwrap_or_default(),
            total_joules: out.energy.composite.total,
            detection_power: cfg
                .energy
                .power_table
                .detection_power(box_size, precision)?,
            sense_power_extrapolated: out.energy.sense_power_extrapolated,
        })
    });
    sweep_report(results.into_iter().collect::<Result<Vec<_>>>()?)
}

pub fn cmd_sweep(config: &Path) -> CliResult<SweepReport> {
    let (cfg, seq) = load_checked(config)?;
    let report = sweep(&cfg, &seq).map_err(|e| match e {
        Error::Trace { .. } => CliError::config(e),
        other => CliError::runtime(other),
    })?;
    let write = || -> Result<()> {
        create_dir(&cfg.output_dir)?;
        write_text(&cfg.output_dir.join("sweep.csv"), &report.to_csv()?)?;
        write_text(
            &cfg.output_dir.join("sweep.json"),
            &(report.to_json() + "\n"),
        )
    };
    write().map_err(CliError::runtime)?;
    Ok(report)
}

pub fn cmd_gen(scene: &Path, out: &Path, seed: u64) -> CliResult<usize> {
    if !scene.is_file() {
        return Err(CliError::config(Error::Config(format!(
            "scene file {} does not exist",
            scene.display()
        ))));
    }
    let spec = SceneSpec::load(scene).map_err(CliError::config)?;
    let (frames, truth) = generate(&spec, seed).map_err(CliError::config)?;
    let write = || -> Result<()> {
        let fdir = out.join("frames");
        let tdir = out.join("truth");
        create_dir(&fdir)?;
        create_dir(&tdir)?;
        for (f, t) in frames.iter().zip(&truth) {
            write_pgm(f, fdir.join(format!("frame_{:04}.pgm", f.index())))?;
            write_mask_pgm(t, tdir.join(format!("truth_{:04}.pgm", f.index())))?;
        }
        Ok(())
    };
    write().map_err(CliError::runtime)?;
    Ok(frames.len())
}

/// Text of the reproduced calibration tables.
pub fn render_tables(table: &PowerTable) -> Result<String> {
    let n = STRICT_FRAME_SIZE;
    let mut s = String::new();
    writeln!(s, "Box size effect ({n} x {n} array)").unwrap();
    writeln!(
        s,
        "{:<6}{:>5}{:>6}{:>14}{:>12}{:>9}",
        "box", "ON", "OFF", "Disconnected", "power_uW", "boxes"
    )
    .unwrap();
    for &b in &STRICT_BOX_SIZES {
        let c = BoxCensus::for_box_size(b);
        let grid = BoxGrid::new(n, n, b)?;
        let uw = table
            .box_sense
            .iter()
            .find(|e| e.box_size == b)
            .map(|e| e.microwatts)
            .ok_or_else(|| Error::Calibration(format!("box size {b} sensing power")))?;
        writeln!(
            s,
            "{:<6}{:>5}{:>6}{:>14}{:>12.2}{:>9}",
            format!("{b}x{b}"),
            c.on,
            c.off,
            c.disconnect,
            uw,
            grid.len()
        )
        .unwrap();
    }
    writeln!(s).unwrap();
    writeln!(
        s,
        "Event detection power vs ADC precision ({n} x {n} array)"
    )
    .unwrap();
    writeln!(
        s,
        "{:<6}{:>10}{:>9}{:>12}  note",
        "box", "precision", "xnor", "power_mW"
    )
    .unwrap();
    for &b in &STRICT_BOX_SIZES {
        for &p in &STRICT_PRECISIONS {
            let xnor = energy::xnor_count(b, p, n, n)?;
            let power = table.detection_power(b, p)?;
            writeln!(
                s,
                "{:<6}{:>10}{:>9}{:>12.1}  {}",
                format!("{b}x{b}"),
                p,
                xnor,
                power.watts * 1e3,
                if power.extrapolated {
                    "extrapolated"
                } else {
                    "measured"
                }
            )
            .unwrap();
        }
    }
    writeln!(s).unwrap();
    for (b, r) in table.precision_ratios() {
        writeln!(s, "P({b}x{b}, 4-bit) / P({b}x{b}, 2-bit) = {r:.4}").unwrap();
    }
    Ok(s)
}

pub fn cmd_tables() -> CliResult<String> {
    render_tables(&PowerTable::measured()).map_err(CliError::runtime)
}

fn print_sweep(report: &SweepReport) {
    println!(
        "{:<6}{:>10}{:>8}{:>8}{:>14}{:>12}  note",
        "box", "precision", "f1", "iou", "total_J", "power_mW"
    );
    for r in &report.rows {
        println!(
            "{:<6}{:>10}{:>8.4}{:>8.4}{:>14.6e}{:>12.1}  {}",
            format!("{0}x{0}", r.box_size),
            r.precision,
            r.f1,
            r.iou,
            r.total_joules,
            r.detection_power_mw,
            if r.extrapolated { "extrapolated" } else { "" }
        );
    }
}

#[cfg(feature = "parallel")]
fn configure_threads() {
    if let Some(n) = std::env::var("NESE_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        // only fails if the pool was already built
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
}

#[cfg(not(feature = "parallel"))]
fn configure_threads() {}

/// Entry point; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    configure_threads();
    let outcome = match cli.command {
        Command::Run { config } => cmd_run(&config).map(|s| {
            println!(
                "{} frames ({} processed), {} event frames, background updates at {:?}, {:.6e} J",
                s.frames,
                s.frames_processed,
                s.sensor_mode_entries,
                s.background_updates,
                s.energy.composite.total
            );
        }),
        Command::Sweep { config } => cmd_sweep(&config).map(|r| print_sweep(&r)),
        Command::Gen { scene, out, seed } => cmd_gen(&scene, &out, seed).map(|n| {
            println!("wrote {n} frames and {n} truth masks to {}", out.display());
        }),
        Command::Tables => cmd_tables().map(|t| print!("{t}")),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("nese: {}", e.error);
            e.code
        }
    }
}
