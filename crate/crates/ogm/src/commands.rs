//! Subcommand implementations behind the `ogm` binary.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::Args;
use ogm_core::geom::Pose2D;
use ogm_core::pipeline::{self, FrameEvent, OdometryRecord, Pipeline, PipelineConfig};
use ogm_core::scan::FullScan;

use crate::config::ConfigBuilder;
use crate::polygon_io::{self, PolygonRecord};
use crate::sim::{self, NoiseSpec, SensorSpec};
use crate::world::World;
use crate::{bench, logs, pgm};

#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    /// Pipeline configuration file (`key = value` lines).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one configuration key, e.g. `--set epsilon=0.3`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

impl ConfigArgs {
    pub fn load(&self) -> Result<PipelineConfig> {
        let mut b = ConfigBuilder::default();
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            b.read_str(&text).with_context(|| format!("in {}", path.display()))?;
        }
        for pair in &self.overrides {
            b.set_pair(pair).map_err(anyhow::Error::msg)?;
        }
        Ok(b.build()?)
    }
}

#[derive(Debug, Clone, Args)]
pub struct BuildArgs {
    /// Scan log CSV.
    #[arg(long)]
    pub scans: PathBuf,
    /// Odometry log CSV.
    #[arg(long)]
    pub odom: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Write a map snapshot every N frames; 0 writes only the final map.
    #[arg(long, default_value_t = 0)]
    pub snapshot_every: usize,
    /// Also write the binary map and edge key grid with each snapshot.
    #[arg(long)]
    pub debug_maps: bool,
    /// Fail when the mean frame latency exceeds this many milliseconds.
    #[arg(long)]
    pub frame_budget_ms: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// World JSON file.
    #[arg(long)]
    pub world: PathBuf,
    /// Trajectory CSV (`timestamp_us,x_m,y_m,yaw_rad`).
    #[arg(long)]
    pub traj: PathBuf,
    /// Output directory for scans.csv, odom.csv and ground_truth.json.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub sensor: SensorArgs,
    /// Range noise standard deviation, meters.
    #[arg(long, default_value_t = 0.0)]
    pub noise_sigma: f64,
    /// Probability of losing a return.
    #[arg(long, default_value_t = 0.0)]
    pub dropout: f64,
    /// Spurious returns per scan.
    #[arg(long, default_value_t = 0)]
    pub clutter: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct SensorArgs {
    #[arg(long, default_value_t = 145.0)]
    pub aperture_deg: f64,
    #[arg(long, default_value_t = 0.25)]
    pub beam_spacing_deg: f64,
    #[arg(long, default_value_t = 150.0)]
    pub max_range: f64,
    #[arg(long, default_value_t = 1)]
    pub layers: u8,
    #[arg(long, default_value_t = 0.0)]
    pub mount_x: f64,
    #[arg(long, default_value_t = 0.0)]
    pub mount_y: f64,
    #[arg(long, default_value_t = 0.0)]
    pub mount_yaw: f64,
}

impl SensorArgs {
    pub fn spec(&self) -> SensorSpec {
        SensorSpec {
            aperture_deg: self.aperture_deg,
            resolution_deg: self.beam_spacing_deg,
            max_range: self.max_range,
            layers: self.layers,
            mount: Pose2D::new(self.mount_x, self.mount_y, self.mount_yaw),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// World JSON file.
    #[arg(long)]
    pub world: PathBuf,
    /// Trajectory CSV.
    #[arg(long)]
    pub traj: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(flatten)]
    pub sensor: SensorArgs,
    /// Write the machine-readable report here instead of stdout.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Fail when the mean pipeline frame latency exceeds this many milliseconds.
    #[arg(long)]
    pub frame_budget_ms: Option<f64>,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn write_pgm(path: &Path, img: &pgm::Gray) -> Result<()> {
    pgm::write(create(path)?, img).with_context(|| format!("writing {}", path.display()))
}

/// Pairs each scan with its odometry record; unmatched scans are dropped
/// with a warning.
pub fn pair_frames(scans: Vec<FullScan>, odom: &[OdometryRecord], tolerance_us: u64) -> Vec<(FullScan, OdometryRecord)> {
    let mut out = Vec::with_capacity(scans.len());
    for scan in scans {
        match pipeline::match_odometry(odom, scan.timestamp_us, tolerance_us) {
            Some(rec) => out.push((scan, *rec)),
            None => log::warn!("skipping scan at {} us: no odometry within {} us", scan.timestamp_us, tolerance_us),
        }
    }
    out
}

fn check_budget(mean_ms: f64, budget: Option<f64>) -> Result<()> {
    if let Some(b) = budget {
        if mean_ms > b {
            bail!("mean frame latency {mean_ms:.2} ms exceeds the budget of {b} ms");
        }
    }
    Ok(())
}

/// Summary of a `build` or `freespace` run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub frames: usize,
    pub skipped: usize,
    pub mean_frame_ms: f64,
}

fn run_pipeline(args: &BuildArgs, write_maps: bool) -> Result<RunSummary> {
    let cfg = args.config.load()?;
    let scans = logs::read_scans(open(&args.scans)?, cfg.ism.max_range)
        .with_context(|| format!("reading {}", args.scans.display()))?;
    let odom = logs::read_odometry(open(&args.odom)?).with_context(|| format!("reading {}", args.odom.display()))?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;

    let total = scans.len();
    let frames = pair_frames(scans, &odom, cfg.odom_tolerance_us);
    let skipped = total - frames.len();
    let mut pipeline = Pipeline::new(cfg)?;
    let mut polygons = create(&args.out.join("polygons.jsonl"))?;
    let mut elapsed_ms = 0.0;

    for (k, (scan, rec)) in frames.iter().enumerate() {
        let t0 = Instant::now();
        let out = pipeline.run_frame(scan, rec)?;
        elapsed_ms += t0.elapsed().as_secs_f64() * 1e3;
        for ev in &out.events {
            match ev {
                FrameEvent::VehicleCellOccupied { row, col } => {
                    log::warn!("frame {} us: vehicle cell ({row}, {col}) is occupied", out.timestamp_us)
                }
                FrameEvent::ReusedPreviousPolygon => log::warn!("frame {} us: reusing previous polygon", out.timestamp_us),
                FrameEvent::NoPolygon => log::warn!("frame {} us: no polygon available", out.timestamp_us),
            }
        }
        polygon_io::write_record(&mut polygons, &PolygonRecord::from(&out))?;

        let last = k + 1 == frames.len();
        let snapshot = last || (args.snapshot_every > 0 && k % args.snapshot_every == 0);
        if write_maps && snapshot {
            let ts = out.timestamp_us;
            write_pgm(&args.out.join(format!("map_{ts}.pgm")), &pgm::from_probability(&pipeline.grid().normalize()))?;
            if args.debug_maps {
                if let Some(bin) = pipeline.binary_map() {
                    write_pgm(&args.out.join(format!("binary_{ts}.pgm")), &pgm::from_binary(bin))?;
                }
                if let Some(edges) = pipeline.edge_grid() {
                    write_pgm(&args.out.join(format!("edges_{ts}.pgm")), &pgm::from_edges(edges))?;
                }
            }
        }
    }
    polygons.flush()?;

    let mean = if frames.is_empty() { 0.0 } else { elapsed_ms / frames.len() as f64 };
    log::info!("{} frames, {skipped} skipped, mean {mean:.2} ms per frame", frames.len());
    check_budget(mean, args.frame_budget_ms)?;
    Ok(RunSummary {
        frames: frames.len(),
        skipped,
        mean_frame_ms: mean,
    })
}

/// Map snapshots plus the per-frame polygon file.
pub fn build(args: &BuildArgs) -> Result<RunSummary> {
    run_pipeline(args, true)
}

/// Per-frame polygon file only.
pub fn freespace(args: &BuildArgs) -> Result<RunSummary> {
    run_pipeline(args, false)
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let world = World::load(open(&args.world)?).with_context(|| format!("reading {}", args.world.display()))?;
    let traj = logs::read_odometry(open(&args.traj)?).with_context(|| format!("reading {}", args.traj.display()))?;
    let noise = NoiseSpec {
        range_sigma: args.noise_sigma,
        dropout: args.dropout,
        clutter_points: args.clutter,
        seed: args.seed,
    };
    let out = sim::simulate(&world, &traj, &args.sensor.spec(), &noise)?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    logs::write_scans(create(&args.out.join("scans.csv"))?, &out.scans)?;
    logs::write_odometry(create(&args.out.join("odom.csv"))?, &out.odometry)?;
    let mut gt = create(&args.out.join("ground_truth.json"))?;
    serde_json::to_writer(&mut gt, &out.ground_truth)?;
    gt.flush()?;
    log::info!("simulated {} frames", out.scans.len());
    Ok(())
}

pub fn bench(args: &BenchArgs) -> Result<bench::BenchReport> {
    let cfg = args.config.load()?;
    let world = World::load(open(&args.world)?).with_context(|| format!("reading {}", args.world.display()))?;
    let traj = logs::read_odometry(open(&args.traj)?).with_context(|| format!("reading {}", args.traj.display()))?;
    let out = sim::simulate(&world, &traj, &args.sensor.spec(), &NoiseSpec::default())?;
    let frames: Vec<_> = out.scans.into_iter().zip(out.odometry).collect();
    let report = bench::run(&cfg, &frames)?;

    print!("{}", report.to_text());
    let json = serde_json::to_string_pretty(&report)?;
    match &args.report {
        Some(path) => {
            let mut w = create(path)?;
            w.write_all(json.as_bytes())?;
            w.write_all(b"\n")?;
            w.flush()?;
        }
        None => println!("{json}"),
    }
    check_budget(report.pipeline.mean_frame_ms, args.frame_budget_ms)?;
    Ok(report)
}
