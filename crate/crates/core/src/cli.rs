//! The `softgrip` command line.
//!
//! Exit codes: 0 success, 1 input error, 2 computation failure, 3 protocol
//! violation. Quantities at this boundary are in grams, kilopascals and
//! seconds; everything written to disk is SI unless the column says
//! otherwise.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand};
use log::{info, warn};

use crate::calibration::{
    pressure_grid_kpa, run_campaign, CalibrationCampaign, CalibrationError, RELEASE_DURATION,
};
use crate::chain::{
    simulate_release, static_equilibrium, ChainError, GripperModel, LoadCondition, ParamTable,
    TipForceProbe,
};
use crate::io::write_atomic;
use crate::metrics::{analyze, SettlingOptions};
use crate::pso::{history_csv, log_csv, parameter_boxplots, ParticleRecord, PsoError};
use crate::vision::{angles_from_image, track_tip, MaskSpec, PixelFrame, RasterImage, VisionError};

#[derive(Debug, Parser)]
#[command(name = "softgrip", version, about = "Soft gripper digital twin: simulate, calibrate, measure")]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Static pose, release trajectory or tip force of a model.
    Simulate(SimulateArgs),
    /// Run a calibration campaign.
    Calibrate(CalibrateArgs),
    /// Joint angles or a tip trajectory from images.
    Extract(ExtractArgs),
    /// Plot-ready tables from a calibration output directory.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("mode").required(true).args(["static_pose", "release", "force"])))]
pub struct SimulateArgs {
    /// Model JSON; the reference finger when omitted.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Equilibrium angles under a tip mass, written to angles.csv.
    #[arg(long = "static")]
    pub static_pose: bool,
    /// Tip height after releasing a tip mass, written to trajectory.csv.
    #[arg(long)]
    pub release: bool,
    /// Tip force on the scale, written to force.csv.
    #[arg(long)]
    pub force: bool,
    #[arg(long, default_value_t = 0.0)]
    pub tip_mass_g: f64,
    #[arg(long, default_value_t = 40.0)]
    pub initial_mass_g: f64,
    #[arg(long, default_value_t = RELEASE_DURATION)]
    pub duration_s: f64,
    #[arg(long, default_value_t = 1000.0)]
    pub rate_hz: f64,
    /// Single pressure; the 0–100 kPa grid when omitted.
    #[arg(long)]
    pub pressure_kpa: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub campaign: PathBuf,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Swarm seed; overrides the campaign's.
    #[arg(long)]
    pub seed: u64,
    /// Parameters JSON of earlier stages, used for missing fixed columns.
    #[arg(long)]
    pub prior: Option<PathBuf>,
    /// Evaluate particles in parallel.
    #[arg(long)]
    pub parallel: bool,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// One image, several frames, or a directory of frames.
    #[arg(required = true)]
    pub images: Vec<PathBuf>,
    #[arg(long)]
    pub mask_spec: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Frame rate; turns the input into a tip trajectory.
    #[arg(long)]
    pub fps: Option<f64>,
    /// Pixel size for trajectories; measured on the first frame when omitted.
    #[arg(long)]
    pub mm_per_px: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    pub results_dir: PathBuf,
    /// Where to write the tables; the results directory when omitted.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub const INPUT: i32 = 1;
    pub const COMPUTE: i32 = 2;
    pub const PROTOCOL: i32 = 3;

    fn input(message: impl Into<String>) -> Self {
        Self {
            code: Self::INPUT,
            message: message.into(),
        }
    }

    fn compute(message: impl Into<String>) -> Self {
        Self {
            code: Self::COMPUTE,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<ChainError> for CliError {
    fn from(e: ChainError) -> Self {
        match e {
            ChainError::InvalidModel(_)
            | ChainError::InvalidLoad(_)
            | ChainError::InvalidArgument(_)
            | ChainError::InvalidTimeStep(_)
            | ChainError::DimensionMismatch { .. } => Self::input(e.to_string()),
            _ => Self::compute(e.to_string()),
        }
    }
}

impl From<CalibrationError> for CliError {
    fn from(e: CalibrationError) -> Self {
        match e {
            CalibrationError::StageOrder(_) => Self {
                code: Self::PROTOCOL,
                message: e.to_string(),
            },
            CalibrationError::Chain(c) => c.into(),
            CalibrationError::Pso(PsoError::InvalidConfig(_) | PsoError::Json(_))
            | CalibrationError::Invalid(_)
            | CalibrationError::Mismatch { .. }
            | CalibrationError::Io { .. }
            | CalibrationError::Json(_) => Self::input(e.to_string()),
            CalibrationError::Pso(_) | CalibrationError::Metrics(_) => Self::compute(e.to_string()),
        }
    }
}

impl From<VisionError> for CliError {
    fn from(e: VisionError) -> Self {
        let message = format!("{} stage failed: {e}", e.stage());
        match e {
            VisionError::Image(_) | VisionError::MaskSpec(_) => Self::input(message),
            _ => Self::compute(message),
        }
    }
}

/// Parses `args`, runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { CliError::INPUT } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    let result = match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Calibrate(a) => calibrate(a),
        Command::Extract(a) => extract(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn load_model(path: Option<&Path>) -> Result<GripperModel, CliError> {
    match path {
        None => Ok(GripperModel::default()),
        Some(p) => GripperModel::from_json(&read_text(p)?)
            .map_err(|e| CliError::input(format!("{}: {e}", p.display()))),
    }
}

fn out_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::input(format!("{}: {e}", dir.display())))
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    write_atomic(&path, contents.as_bytes())
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    info!("wrote {}", path.display());
    Ok(path)
}

/// `joint,angle_rad` rows.
pub fn angles_csv(theta: &[f64]) -> String {
    let mut out = String::from("joint,angle_rad\n");
    for (j, a) in theta.iter().enumerate() {
        let _ = writeln!(out, "{j},{a:e}");
    }
    out
}

fn simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let model = load_model(a.model.as_deref())?;
    out_dir(&a.out_dir)?;
    if a.static_pose {
        let theta = static_equilibrium(&model, &LoadCondition::tip_mass(a.tip_mass_g * 1e-3))?;
        write(&a.out_dir, "angles.csv", &angles_csv(&theta))?;
    } else if a.release {
        let series = simulate_release(&model, a.initial_mass_g * 1e-3, a.duration_s, a.rate_hz)?;
        let mut csv = Vec::new();
        series
            .write_csv(&mut csv)
            .map_err(|e| CliError::compute(e.to_string()))?;
        write(&a.out_dir, "trajectory.csv", &String::from_utf8(csv).expect("ASCII CSV"))?;
        match analyze(&series, &SettlingOptions::default()) {
            Ok(report) => {
                println!(
                    "settling time {:.3} s, {} overshoots",
                    report.settling_time, report.overshoot_count
                );
                write(&a.out_dir, "settling.json", &report.to_json())?;
            }
            Err(e) => warn!("no settling report: {e}"),
        }
    } else {
        let probe = TipForceProbe::new(&model)?;
        let pressures = match a.pressure_kpa {
            Some(p) => vec![p],
            None => pressure_grid_kpa(),
        };
        let mut out = String::from("pressure_pa,force_n\n");
        for kpa in pressures {
            let f = probe.measure(kpa * 1e3)?;
            if f.liftoff {
                warn!("tip lifts off the scale at {kpa} kPa");
            }
            let _ = writeln!(out, "{},{:e}", kpa * 1e3, f.force);
        }
        write(&a.out_dir, "force.csv", &out)?;
    }
    Ok(())
}

fn calibrate(a: &CalibrateArgs) -> Result<(), CliError> {
    let mut campaign = CalibrationCampaign::load(&a.campaign)?;
    campaign.pso.seed = a.seed;
    campaign.pso.parallel |= a.parallel;
    if let Some(prior) = &a.prior {
        let table: ParamTable = serde_json::from_str(&read_text(prior)?)
            .map_err(|e| CliError::input(format!("{}: {e}", prior.display())))?;
        let fixed = &mut campaign.fixed;
        fixed.k.get_or_insert_with(|| table.k());
        fixed.c.get_or_insert_with(|| table.c());
        fixed.alpha.get_or_insert_with(|| table.alpha());
    }
    out_dir(&a.out_dir)?;
    let result = run_campaign(&campaign)?;
    let params = serde_json::to_string_pretty(&result.params).expect("params serialize");
    write(&a.out_dir, "params.json", &params)?;
    write(&a.out_dir, "history.csv", &history_csv(&result.history))?;
    write(&a.out_dir, "particles.csv", &log_csv(&result.log))?;
    write(&a.out_dir, "train.csv", &result.train_report.to_csv())?;
    if let Some(v) = &result.validation {
        write(&a.out_dir, "validation.csv", &v.to_csv())?;
    }
    print!("{} fitness {:e}", result.stage.name(), result.train_fitness);
    if let Some(v) = &result.validation {
        print!(", validation {:e}", v.mean_fitness);
    }
    println!();
    Ok(())
}

/// Reads the layout written by [`log_csv`].
pub fn read_particles(path: &Path) -> Result<Vec<ParticleRecord>, CliError> {
    let bad = |m: String| CliError::input(format!("{}: {m}", path.display()));
    let mut reader = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let headers = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    if headers.len() < 3 || (headers.len() - 3) % 2 != 0 || &headers[0] != "iteration" {
        return Err(bad("not a particle log".into()));
    }
    let dim = (headers.len() - 3) / 2;
    let mut log = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let num = |i: usize| -> Result<f64, CliError> {
            record[i].trim().parse().map_err(|e| bad(format!("`{}`: {e}", &record[i])))
        };
        let values = (3..3 + 2 * dim).map(num).collect::<Result<Vec<_>, _>>()?;
        log.push(ParticleRecord {
            iteration: num(0)? as usize,
            particle: num(1)? as usize,
            fitness: num(2)?,
            position: values[..dim].to_vec(),
            best_position: values[dim..].to_vec(),
        });
    }
    Ok(log)
}

fn list_frames(paths: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    if let [dir] = paths {
        if dir.is_dir() {
            let mut frames: Vec<PathBuf> = std::fs::read_dir(dir)
                .map_err(|e| CliError::input(format!("{}: {e}", dir.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| {
                    p.extension()
                        .and_then(|x| x.to_str())
                        .is_some_and(|x| matches!(x.to_ascii_lowercase().as_str(), "ppm" | "pgm" | "pnm" | "png"))
                })
                .collect();
            frames.sort();
            if frames.is_empty() {
                return Err(CliError::input(format!("{}: no image frames", dir.display())));
            }
            return Ok(frames);
        }
    }
    Ok(paths.to_vec())
}

fn extract(a: &ExtractArgs) -> Result<(), CliError> {
    let spec = match &a.mask_spec {
        Some(p) => MaskSpec::from_json(&read_text(p)?)
            .map_err(|e| CliError::input(format!("{}: {e}", p.display())))?,
        None => MaskSpec::default(),
    };
    let model = load_model(a.model.as_deref())?;
    let paths = list_frames(&a.images)?;
    out_dir(&a.out_dir)?;
    let Some(fps) = a.fps else {
        if paths.len() > 1 {
            return Err(CliError::input("several frames need --fps"));
        }
        let img = RasterImage::load(&paths[0])?;
        let found = angles_from_image(&img, &spec, &model)?;
        write(&a.out_dir, "angles.csv", &angles_csv(&found.angles))?;
        println!("{} joints, {:.4} mm per pixel", found.angles.len(), found.meters_per_pixel * 1e3);
        return Ok(());
    };
    if !(fps > 0.0 && fps.is_finite()) {
        return Err(CliError::input(format!("--fps {fps}")));
    }
    let frames = paths
        .iter()
        .map(|p| RasterImage::load(p))
        .collect::<Result<Vec<_>, _>>()?;
    let scale = match a.mm_per_px {
        Some(mm) if mm > 0.0 => mm * 1e-3,
        Some(mm) => return Err(CliError::input(format!("--mm-per-px {mm}"))),
        None => angles_from_image(&frames[0], &spec, &model)?.meters_per_pixel,
    };
    // Heights are measured up from the top image row.
    let frame = PixelFrame {
        origin: [0.0, 0.0],
        scale,
    };
    let track = track_tip(&frames, &spec, fps, &frame)?;
    if !track.gaps.is_empty() {
        warn!("{} frames interpolated: {:?}", track.gaps.len(), track.gaps);
    }
    let mut csv = Vec::new();
    track
        .series
        .write_csv(&mut csv)
        .map_err(|e| CliError::compute(e.to_string()))?;
    write(&a.out_dir, "trajectory.csv", &String::from_utf8(csv).expect("ASCII CSV"))?;
    println!("{} frames, {} gaps", frames.len(), track.gaps.len());
    Ok(())
}

#[derive(Debug, serde::Deserialize)]
struct ReportRow {
    spec: usize,
    kind: String,
    condition: String,
    quantity: String,
    simulated: f64,
    observed: f64,
    #[allow(dead_code)]
    spec_fitness: f64,
}

fn read_report(path: &Path) -> Result<Vec<ReportRow>, CliError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    reader
        .deserialize()
        .collect::<Result<Vec<ReportRow>, _>>()
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

/// Leading number of a condition label such as `50 kPa`.
fn condition_value(label: &str) -> f64 {
    label.split_whitespace().next().and_then(|v| v.parse().ok()).unwrap_or(f64::NAN)
}

fn report(a: &ReportArgs) -> Result<(), CliError> {
    let dir = &a.results_dir;
    if !dir.is_dir() {
        return Err(CliError::input(format!("{}: not a directory", dir.display())));
    }
    let out = a.out_dir.clone().unwrap_or_else(|| dir.clone());
    out_dir(&out)?;
    let inputs = ["history.csv", "particles.csv", "train.csv", "validation.csv"];
    let present: Vec<&str> = inputs.iter().copied().filter(|f| dir.join(f).is_file()).collect();
    if present.is_empty() {
        return Err(CliError::input(format!(
            "{}: none of {} found",
            dir.display(),
            inputs.join(", ")
        )));
    }
    let mut written = 0;

    if present.contains(&"history.csv") {
        let path = dir.join("history.csv");
        let mut reader = csv::Reader::from_path(&path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        let mut csv = String::from("iteration,best_fitness\n");
        let mut best = f64::INFINITY;
        for row in reader.deserialize::<(usize, f64)>() {
            let (i, f) = row.map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
            best = best.min(f);
            let _ = writeln!(csv, "{i},{best:e}");
        }
        write(&out, "fitness_evolution.csv", &csv)?;
        written += 1;
    }

    if present.contains(&"particles.csv") {
        let log = read_particles(&dir.join("particles.csv"))?;
        let mut csv = String::from("group_start,dimension,min,q1,median,q3,max\n");
        for r in parameter_boxplots(&log, 10) {
            let _ = writeln!(
                csv,
                "{},{},{:e},{:e},{:e},{:e},{:e}",
                r.group_start, r.dimension, r.min, r.q1, r.median, r.q3, r.max
            );
        }
        write(&out, "parameter_boxplots.csv", &csv)?;
        written += 1;
    }

    let mut rows = Vec::new();
    for split in ["train", "validation"] {
        if present.contains(&format!("{split}.csv").as_str()) {
            for r in read_report(&dir.join(format!("{split}.csv")))? {
                rows.push((split, r));
            }
        }
    }
    let forces: Vec<_> = rows.iter().filter(|(_, r)| r.kind == "actuation").collect();
    if !forces.is_empty() {
        let mut sorted = forces.clone();
        sorted.sort_by(|a, b| condition_value(&a.1.condition).total_cmp(&condition_value(&b.1.condition)));
        let mut csv = String::from("split,pressure_kpa,simulated_force_n,observed_force_n\n");
        for (split, r) in sorted {
            let _ = writeln!(csv, "{split},{},{:e},{:e}", condition_value(&r.condition), r.simulated, r.observed);
        }
        write(&out, "force_pressure.csv", &csv)?;
        written += 1;
    }
    let releases: Vec<_> = rows.iter().filter(|(_, r)| r.kind == "release").collect();
    if !releases.is_empty() {
        let mut csv = String::from(
            "split,initial_mass_g,simulated_settling_s,observed_settling_s,simulated_overshoots,observed_overshoots\n",
        );
        for (split, t) in releases.iter().filter(|(_, r)| r.quantity == "settling_time") {
            let n = releases
                .iter()
                .find(|(s, r)| s == split && r.spec == t.spec && r.quantity == "overshoots")
                .map(|(_, r)| r);
            let (ns, no) = n.map_or((f64::NAN, f64::NAN), |r| (r.simulated, r.observed));
            let _ = writeln!(
                csv,
                "{split},{},{:e},{:e},{ns},{no}",
                condition_value(&t.condition),
                t.simulated,
                t.observed
            );
        }
        write(&out, "settling_comparison.csv", &csv)?;
        written += 1;
    }
    if written == 0 {
        return Err(CliError::input(format!("{}: nothing to report", dir.display())));
    }
    println!("{written} tables written to {}", out.display());
    Ok(())
}
