//! Inverse sensor models.
//!
//! The enhanced model treats a full scan as one polygon (sensor origin plus
//! every endpoint in azimuth order). Its edges are traced with Bresenham,
//! its interior filled by scanline, and every affected cell then receives
//! exactly one update: `p_occ` for cells holding a measured endpoint,
//! `p_free` for everything else. Virtual endpoints clear space up to
//! themselves but never mark obstacles.
//!
//! The conventional model casts one Bresenham ray per measured return and
//! updates cells as often as rays cross them. It is kept as the baseline for
//! benchmarks and for the overlap/conflict statistics in [`UpdateStats`].
//!
//! Both models do all floating-point work relative to the sensor's lattice
//! cell, so two grids whose sensor poses differ by whole cells receive
//! bit-identical updates.

use alloc::vec::Vec;

use crate::geom::{GridPose, Point2};
use crate::grid::{logodds, GridError, IsmConfig, OccupancyGrid};
use crate::line;
use crate::scan::FullScan;

const FREE: u8 = 1;
const OCC: u8 = 2;

/// Per-scan update instrumentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct UpdateStats {
    /// Bayes updates applied, all cells together.
    pub total_updates: u64,
    pub free_updates: u64,
    pub occupied_updates: u64,
    /// Distinct cells updated.
    pub cells_touched: u64,
    /// Highest number of updates any single cell received.
    pub max_updates_per_cell: u32,
    /// Cells that received both a free and an occupied update.
    pub conflicts: u64,
}

impl UpdateStats {
    /// Folds the statistics of another scan into `self`.
    pub fn merge(&mut self, other: &UpdateStats) {
        self.total_updates += other.total_updates;
        self.free_updates += other.free_updates;
        self.occupied_updates += other.occupied_updates;
        self.cells_touched += other.cells_touched;
        self.max_updates_per_cell = self.max_updates_per_cell.max(other.max_updates_per_cell);
        self.conflicts += other.conflicts;
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IsmError {
    #[error("sensor at ({x}, {y}) cells lies outside the grid")]
    SensorOutsideGrid { x: f64, y: f64 },
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Scan polygon in absolute grid coordinates: the sensor origin followed by
/// every endpoint in scan order. Empty for an empty scan.
pub fn scan_polygon(scan: &FullScan, pose: &GridPose, resolution: f64) -> Vec<Point2> {
    let ((ax, ay), frac) = pose.split();
    let anchor = Point2::new(ax as f64, ay as f64);
    let mut verts = Vec::new();
    relative_polygon(scan, frac, pose.yaw, resolution, &mut verts);
    verts.into_iter().map(|v| v + anchor).collect()
}

fn relative_polygon(scan: &FullScan, origin: Point2, yaw: f64, resolution: f64, out: &mut Vec<Point2>) {
    out.clear();
    if scan.is_empty() {
        return;
    }
    out.push(origin);
    out.extend(
        scan.points
            .iter()
            .map(|p| origin + Point2::from_angle(yaw + p.azimuth) * (p.range / resolution)),
    );
}

#[inline]
fn lattice(v: Point2) -> (i64, i64) {
    (libm::floor(v.x) as i64, libm::floor(v.y) as i64)
}

/// Smallest `j` with `j + 0.5 >= y`.
fn first_center_at_or_above(y: f64) -> i64 {
    let mut j = libm::floor(y - 0.5) as i64;
    while (j as f64 + 0.5) < y {
        j += 1;
    }
    while ((j - 1) as f64 + 0.5) >= y {
        j -= 1;
    }
    j
}

/// Reusable scratch buffers for scan rasterization.
#[derive(Debug, Default, Clone)]
pub struct Rasterizer {
    labels: Vec<u8>,
    touched: Vec<u32>,
    counts: Vec<u16>,
    flags: Vec<u8>,
    recorded: Vec<u32>,
    stats: UpdateStats,
    verts: Vec<Point2>,
    crossings: Vec<(i64, f64)>,
}

/// Sensor placement resolved against one grid.
struct Frame {
    anchor: (i64, i64),
    width: usize,
    height: usize,
}

impl Frame {
    #[inline]
    fn index(&self, rel: (i64, i64)) -> Option<usize> {
        let x = self.anchor.0 + rel.0;
        let y = self.anchor.1 + rel.1;
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return None;
        }
        Some((self.height - 1 - y as usize) * self.width + x as usize)
    }
}

impl Rasterizer {
    pub fn new() -> Self {
        Self::default()
    }

    fn prepare(&mut self, grid: &OccupancyGrid, pose: &GridPose) -> Result<(Frame, Point2), IsmError> {
        let (anchor, frac) = pose.split();
        if grid.cell_of_lattice(anchor.0, anchor.1).is_none() {
            return Err(IsmError::SensorOutsideGrid { x: pose.x, y: pose.y });
        }
        let n = grid.width() * grid.height();
        if self.labels.len() != n {
            self.labels = alloc::vec![0; n];
            self.counts = alloc::vec![0; n];
            self.flags = alloc::vec![0; n];
        }
        self.stats = UpdateStats::default();
        Ok((
            Frame {
                anchor,
                width: grid.width(),
                height: grid.height(),
            },
            frac,
        ))
    }

    #[inline]
    fn mark(&mut self, frame: &Frame, rel: (i64, i64), label: u8) {
        if let Some(idx) = frame.index(rel) {
            if self.labels[idx] == 0 {
                self.touched.push(idx as u32);
            }
            self.labels[idx] = self.labels[idx].max(label);
        }
    }

    #[inline]
    fn record(&mut self, idx: usize, label: u8) {
        if self.counts[idx] == 0 {
            self.recorded.push(idx as u32);
        }
        self.counts[idx] = self.counts[idx].saturating_add(1);
        self.flags[idx] |= label;
        self.stats.total_updates += 1;
        if label == OCC {
            self.stats.occupied_updates += 1;
        } else {
            self.stats.free_updates += 1;
        }
    }

    fn finish(&mut self) -> UpdateStats {
        let mut stats = self.stats;
        for &idx in &self.recorded {
            let idx = idx as usize;
            stats.cells_touched += 1;
            stats.max_updates_per_cell = stats.max_updates_per_cell.max(self.counts[idx] as u32);
            if self.flags[idx] == FREE | OCC {
                stats.conflicts += 1;
            }
            self.counts[idx] = 0;
            self.flags[idx] = 0;
        }
        self.recorded.clear();
        stats
    }

    /// Applies the enhanced full-scan model: each affected cell is updated
    /// once.
    pub fn enhanced(
        &mut self,
        grid: &mut OccupancyGrid,
        scan: &FullScan,
        pose: &GridPose,
        cfg: &IsmConfig,
    ) -> Result<UpdateStats, IsmError> {
        cfg.validate()?;
        let (frame, frac) = self.prepare(grid, pose)?;
        let mut verts = core::mem::take(&mut self.verts);
        relative_polygon(scan, frac, pose.yaw, grid.resolution(), &mut verts);

        let n = verts.len();
        for i in 0..n {
            let a = lattice(verts[i]);
            let b = lattice(verts[(i + 1) % n]);
            for c in line::canonical(a, b) {
                self.mark(&frame, c, FREE);
            }
        }
        self.fill_interior(&frame, &verts);
        for (k, p) in scan.points.iter().enumerate() {
            if p.is_measured() {
                self.mark(&frame, lattice(verts[k + 1]), OCC);
            }
        }
        self.verts = verts;

        let free = logodds(cfg.p_free) as f32;
        let occ = logodds(cfg.p_occ) as f32;
        let touched = core::mem::take(&mut self.touched);
        for &idx in &touched {
            let idx = idx as usize;
            let label = self.labels[idx];
            grid.add_at(idx, if label == OCC { occ } else { free });
            self.record(idx, label);
            self.labels[idx] = 0;
        }
        self.touched = touched;
        self.touched.clear();
        Ok(self.finish())
    }

    /// Marks cells whose centers lie inside the polygon (even-odd rule).
    fn fill_interior(&mut self, frame: &Frame, verts: &[Point2]) {
        let n = verts.len();
        if n < 3 {
            return;
        }
        let row_lo = -frame.anchor.1;
        let row_hi = frame.height as i64 - frame.anchor.1; // exclusive
        let col_lo = -frame.anchor.0;
        let col_hi = frame.width as i64 - frame.anchor.0; // exclusive

        let mut crossings = core::mem::take(&mut self.crossings);
        crossings.clear();
        for i in 0..n {
            let a = verts[i];
            let b = verts[(i + 1) % n];
            if a.y == b.y {
                continue;
            }
            let (lo, hi) = if a.y < b.y { (a.y, b.y) } else { (b.y, a.y) };
            let j0 = first_center_at_or_above(lo).max(row_lo);
            let j1 = first_center_at_or_above(hi).min(row_hi);
            for j in j0..j1 {
                let yc = j as f64 + 0.5;
                crossings.push((j, (b.x - a.x) * (yc - a.y) / (b.y - a.y) + a.x));
            }
        }
        crossings.sort_unstable_by(|p, q| p.0.cmp(&q.0).then(p.1.total_cmp(&q.1)));

        for row in crossings.chunk_by(|p, q| p.0 == q.0) {
            let j = row[0].0;
            for pair in row.chunks_exact(2) {
                let i0 = first_center_at_or_above(pair[0].1).max(col_lo);
                let i1 = first_center_at_or_above(pair[1].1).min(col_hi);
                for i in i0..i1 {
                    self.mark(frame, (i, j), FREE);
                }
            }
        }
        self.crossings = crossings;
    }

    /// Applies the conventional per-beam model: one ray per measured return,
    /// free along the ray and occupied at its end cell.
    pub fn conventional(
        &mut self,
        grid: &mut OccupancyGrid,
        scan: &FullScan,
        pose: &GridPose,
        cfg: &IsmConfig,
    ) -> Result<UpdateStats, IsmError> {
        cfg.validate()?;
        let (frame, frac) = self.prepare(grid, pose)?;
        let mut verts = core::mem::take(&mut self.verts);
        relative_polygon(scan, frac, pose.yaw, grid.resolution(), &mut verts);

        let free = logodds(cfg.p_free) as f32;
        let occ = logodds(cfg.p_occ) as f32;
        if !verts.is_empty() {
            let origin = lattice(verts[0]);
            for (k, p) in scan.points.iter().enumerate() {
                if !p.is_measured() {
                    continue;
                }
                let end = lattice(verts[k + 1]);
                for c in line::canonical(origin, end) {
                    if let Some(idx) = frame.index(c) {
                        let label = if c == end { OCC } else { FREE };
                        grid.add_at(idx, if label == OCC { occ } else { free });
                        self.record(idx, label);
                    }
                }
            }
        }
        self.verts = verts;
        Ok(self.finish())
    }
}

/// One-shot enhanced update; see [`Rasterizer::enhanced`].
pub fn rasterize_scan_enhanced(
    grid: &mut OccupancyGrid,
    scan: &FullScan,
    pose: &GridPose,
    cfg: &IsmConfig,
) -> Result<UpdateStats, IsmError> {
    Rasterizer::new().enhanced(grid, scan, pose, cfg)
}

/// One-shot conventional update; see [`Rasterizer::conventional`].
pub fn rasterize_scan_conventional(
    grid: &mut OccupancyGrid,
    scan: &FullScan,
    pose: &GridPose,
    cfg: &IsmConfig,
) -> Result<UpdateStats, IsmError> {
    Rasterizer::new().conventional(grid, scan, pose, cfg)
}
