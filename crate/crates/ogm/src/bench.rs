//! Enhanced versus conventional sensor model, and integer-shift alignment
//! versus a resampling reference, on identical simulated frames.

use std::time::{Duration, Instant};

use ogm_core::alignment::{PositionCircle, SpeedFilter};
use ogm_core::grid::OccupancyGrid;
use ogm_core::ism::{Rasterizer, UpdateStats};
use ogm_core::pipeline::{OdometryRecord, Pipeline, PipelineConfig};
use ogm_core::scan::{self, FullScan};
use serde::Serialize;

/// Published figures, measured on proprietary recordings. Shown for
/// context only; the synthetic benchmark cannot reproduce them.
pub const PUBLISHED_ISM_REDUCTION_PERCENT: f64 = 44.07;
pub const PUBLISHED_ALIGNMENT_SHARE_PERCENT: f64 = 4.30;

#[derive(Debug, Clone, Serialize)]
pub struct ModelReport {
    pub total_updates: u64,
    pub cells_touched: u64,
    pub max_updates_per_cell: u32,
    pub conflicts: u64,
    pub time_ms: f64,
}

impl ModelReport {
    fn new(stats: &UpdateStats, time: Duration) -> Self {
        Self {
            total_updates: stats.total_updates,
            cells_touched: stats.cells_touched,
            max_updates_per_cell: stats.max_updates_per_cell,
            conflicts: stats.conflicts,
            time_ms: time.as_secs_f64() * 1e3,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AlignmentReport {
    /// Integer shift with the fraction kept in the pose.
    pub integer_shift_ms: f64,
    /// Bilinear resampling of the map for sub-cell translation and rotation.
    pub resample_ms: f64,
    /// Share of full-pipeline time spent in the integer-shift alignment.
    pub share_of_pipeline: f64,
    /// Fraction of a resampling pipeline's time that integer shifting saves.
    pub avoided_fraction: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineTiming {
    pub mean_frame_ms: f64,
    pub max_frame_ms: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReferenceFigures {
    pub ism_time_reduction_percent: f64,
    pub alignment_share_percent: f64,
    pub note: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub frames: usize,
    pub enhanced: ModelReport,
    pub conventional: ModelReport,
    /// Enhanced over conventional total updates.
    pub update_ratio: f64,
    /// `1 - enhanced time / conventional time`.
    pub ism_time_reduction: f64,
    pub alignment: AlignmentReport,
    pub pipeline: PipelineTiming,
    pub reference: ReferenceFigures,
}

impl BenchReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let pct = |v: f64| format!("{:.2}%", v * 100.0);
        s += &format!("frames                      {}\n", self.frames);
        s += "sensor model                enhanced      conventional\n";
        s += &format!(
            "  cell updates              {:<13} {}\n",
            self.enhanced.total_updates, self.conventional.total_updates
        );
        s += &format!(
            "  max updates per cell      {:<13} {}\n",
            self.enhanced.max_updates_per_cell, self.conventional.max_updates_per_cell
        );
        s += &format!(
            "  conflicting cells         {:<13} {}\n",
            self.enhanced.conflicts, self.conventional.conflicts
        );
        s += &format!(
            "  time (ms)                 {:<13.2} {:.2}\n",
            self.enhanced.time_ms, self.conventional.time_ms
        );
        s += &format!("  update ratio              {:.4}\n", self.update_ratio);
        s += &format!("  ISM time reduction        {}\n", pct(self.ism_time_reduction));
        s += "alignment\n";
        s += &format!("  integer shift (ms)        {:.2}\n", self.alignment.integer_shift_ms);
        s += &format!("  resampling (ms)           {:.2}\n", self.alignment.resample_ms);
        s += &format!("  share of pipeline         {}\n", pct(self.alignment.share_of_pipeline));
        s += &format!("  avoided fraction          {}\n", pct(self.alignment.avoided_fraction));
        s += &format!(
            "pipeline frame time (ms)    mean {:.2}, max {:.2}\n",
            self.pipeline.mean_frame_ms, self.pipeline.max_frame_ms
        );
        s += &format!(
            "published reference         ISM reduction {:.2}%, alignment share {:.2}% ({})\n",
            self.reference.ism_time_reduction_percent, self.reference.alignment_share_percent, self.reference.note
        );
        s
    }
}

/// Bilinear resampling of `src` (row-major, `w` x `h`) under a rotation by
/// `dtheta` about the map center followed by a translation of `(dx, dy)`
/// cells. Samples outside the source read as 0.
pub fn resample_bilinear(src: &[f32], w: usize, h: usize, dx: f64, dy: f64, dtheta: f64) -> Vec<f32> {
    let (c, s) = (dtheta.cos(), dtheta.sin());
    let (cx, cy) = (w as f64 / 2.0, h as f64 / 2.0);
    let at = |r: i64, col: i64| -> f64 {
        if r < 0 || col < 0 || r >= h as i64 || col >= w as i64 {
            0.0
        } else {
            f64::from(src[r as usize * w + col as usize])
        }
    };
    let mut out = vec![0.0f32; w * h];
    for r in 0..h {
        for col in 0..w {
            // Inverse map: destination center back into the source frame.
            let x = col as f64 + 0.5 - cx - dx;
            let y = (h - r) as f64 - 0.5 - cy - dy;
            let sx = c * x + s * y + cx - 0.5;
            let sy = -s * x + c * y + cy - 0.5;
            let srow = h as f64 - 1.0 - sy;
            let (r0, c0) = (srow.floor(), sx.floor());
            let (fr, fc) = (srow - r0, sx - c0);
            let (r0, c0) = (r0 as i64, c0 as i64);
            let v = at(r0, c0) * (1.0 - fr) * (1.0 - fc)
                + at(r0, c0 + 1) * (1.0 - fr) * fc
                + at(r0 + 1, c0) * fr * (1.0 - fc)
                + at(r0 + 1, c0 + 1) * fr * fc;
            out[r * w + col] = v as f32;
        }
    }
    out
}

/// Runs both sensor models and both alignment strategies over `frames`
/// (scans paired with odometry), plus the full pipeline for latency.
pub fn run(cfg: &PipelineConfig, frames: &[(FullScan, OdometryRecord)]) -> Result<BenchReport, ogm_core::pipeline::PipelineError> {
    let new_grid = || OccupancyGrid::with_clamp(cfg.width, cfg.height, cfg.resolution, cfg.clamp);
    let new_circle = || -> Result<PositionCircle, ogm_core::pipeline::PipelineError> {
        Ok(PositionCircle::new(cfg.circle(), SpeedFilter::new(cfg.speed_filter.clone())?))
    };
    let (mut grid_e, mut grid_c) = (new_grid()?, new_grid()?);
    let (mut circle_e, mut circle_c) = (new_circle()?, new_circle()?);
    let mut raster = Rasterizer::new();
    let (mut stats_e, mut stats_c) = (UpdateStats::default(), UpdateStats::default());
    let (mut t_e, mut t_c) = (Duration::ZERO, Duration::ZERO);
    let (mut t_shift, mut t_resample) = (Duration::ZERO, Duration::ZERO);
    let mut prev_world: Option<ogm_core::geom::Pose2D> = None;

    for (scan_in, odom) in frames {
        let filtered = if cfg.dbscan_enabled {
            scan::dbscan_filter(scan_in, &cfg.dbscan)
        } else {
            scan_in.clone()
        };
        let prepared = scan::synthesize_virtual_points(&filtered, cfg.virtual_fallback_range);
        let world = odom.pose();

        let t0 = Instant::now();
        let step = circle_e.step(&world, odom.timestamp_us, &mut grid_e, odom.speed)?;
        t_shift += t0.elapsed();
        circle_c.step(&world, odom.timestamp_us, &mut grid_c, odom.speed)?;

        // The reference keeps a vehicle-aligned map and resamples it by the
        // exact sub-cell motion and heading change every frame.
        let (dx, dy, dth) = match prev_world {
            Some(p) => (
                (world.x - p.x) / cfg.resolution,
                (world.y - p.y) / cfg.resolution,
                world.yaw - p.yaw,
            ),
            None => (0.0, 0.0, 0.0),
        };
        let t0 = Instant::now();
        let resampled = resample_bilinear(grid_c.cells(), cfg.width, cfg.height, -dx, -dy, -dth);
        t_resample += t0.elapsed();
        std::hint::black_box(resampled);
        prev_world = Some(world);

        let t0 = Instant::now();
        let sensor = cfg.sensor_pose(&step.local);
        let s = raster.enhanced(&mut grid_e, &prepared, &sensor, &cfg.ism)?;
        t_e += t0.elapsed();
        stats_e.merge(&s);

        let t0 = Instant::now();
        let s = raster.conventional(&mut grid_c, &prepared, &sensor, &cfg.ism)?;
        t_c += t0.elapsed();
        stats_c.merge(&s);
    }

    let mut pipeline = Pipeline::new(cfg.clone())?;
    let mut frame_times = Vec::with_capacity(frames.len());
    for (scan_in, odom) in frames {
        let t0 = Instant::now();
        pipeline.run_frame(scan_in, odom)?;
        frame_times.push(t0.elapsed().as_secs_f64() * 1e3);
    }
    let total_ms: f64 = frame_times.iter().sum();
    let n = frames.len().max(1) as f64;

    let shift_ms = t_shift.as_secs_f64() * 1e3;
    let resample_ms = t_resample.as_secs_f64() * 1e3;
    let with_resample = total_ms - shift_ms + resample_ms;
    Ok(BenchReport {
        frames: frames.len(),
        update_ratio: stats_e.total_updates as f64 / stats_c.total_updates.max(1) as f64,
        ism_time_reduction: 1.0 - t_e.as_secs_f64() / t_c.as_secs_f64().max(f64::MIN_POSITIVE),
        enhanced: ModelReport::new(&stats_e, t_e),
        conventional: ModelReport::new(&stats_c, t_c),
        alignment: AlignmentReport {
            integer_shift_ms: shift_ms,
            resample_ms,
            share_of_pipeline: if total_ms > 0.0 { shift_ms / total_ms } else { 0.0 },
            avoided_fraction: if with_resample > 0.0 {
                (resample_ms - shift_ms) / with_resample
            } else {
                0.0
            },
        },
        pipeline: PipelineTiming {
            mean_frame_ms: total_ms / n,
            max_frame_ms: frame_times.iter().copied().fold(0.0, f64::max),
        },
        reference: ReferenceFigures {
            ism_time_reduction_percent: PUBLISHED_ISM_REDUCTION_PERCENT,
            alignment_share_percent: PUBLISHED_ALIGNMENT_SHARE_PERCENT,
            note: "published on proprietary recordings; not reproducible with synthetic data",
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resample_identity_and_integer_shift() {
        let (w, h) = (8, 6);
        let src: Vec<f32> = (0..w * h).map(|i| i as f32).collect();
        assert_eq!(resample_bilinear(&src, w, h, 0.0, 0.0, 0.0), src);
        // Content moves one cell right (+x).
        let moved = resample_bilinear(&src, w, h, 1.0, 0.0, 0.0);
        for r in 0..h {
            assert_eq!(moved[r * w], 0.0);
            for c in 1..w {
                assert_eq!(moved[r * w + c], src[r * w + c - 1]);
            }
        }
    }
}
