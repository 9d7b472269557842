//! The local occupancy grid and its Bayes (log-odds) cell update.

use alloc::vec::Vec;

use crate::geom::{GridPose, Point2, Pose2D};

/// Inverse sensor model probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsmConfig {
    pub p_free: f64,
    pub p_unknown: f64,
    pub p_occ: f64,
    /// Meters.
    pub max_range: f64,
}

impl Default for IsmConfig {
    fn default() -> Self {
        Self {
            p_free: 0.40,
            p_unknown: 0.5,
            p_occ: 0.65,
            max_range: crate::scan::DEFAULT_MAX_RANGE,
        }
    }
}

impl IsmConfig {
    pub fn validate(&self) -> Result<(), GridError> {
        let ok = 0.0 < self.p_free
            && self.p_free < self.p_unknown
            && self.p_unknown <= 0.5
            && 0.5 <= self.p_unknown
            && self.p_unknown < self.p_occ
            && self.p_occ < 1.0
            && self.max_range > 0.0;
        if ok {
            Ok(())
        } else {
            Err(GridError::InvalidIsm)
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GridError {
    #[error("probability {0} outside (0, 1)")]
    InvalidProbability(f64),
    #[error("inverse sensor model needs 0 < p_free < p_unknown = 0.5 < p_occ < 1")]
    InvalidIsm,
    #[error("grid dimensions must be non-zero and the resolution positive")]
    InvalidShape,
    #[error("log-odds clamp bounds must satisfy min < 0 < max")]
    InvalidClamp,
}

/// `ln(p / (1 - p))`.
pub fn logodds(p: f64) -> f64 {
    libm::log(p / (1.0 - p))
}

/// One Bayes update of a cell from observation probability `p`.
pub fn logodds_update(old: f32, p: f64, clamp: (f32, f32)) -> Result<f32, GridError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(GridError::InvalidProbability(p));
    }
    Ok((old + logodds(p) as f32).clamp(clamp.0, clamp.1))
}

/// Occupancy probability of a log-odds value.
#[inline]
pub fn probability(l: f32) -> f32 {
    1.0 - 1.0 / (1.0 + libm::expf(l))
}

/// Default log-odds saturation bounds.
pub const DEFAULT_CLAMP: (f32, f32) = (-5.0, 5.0);

/// H x W log-odds raster. Row 0 is the top (north) edge of the map.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    resolution: f64,
    clamp: (f32, f32),
    cells: Vec<f32>,
}

impl OccupancyGrid {
    pub fn new(width: usize, height: usize, resolution: f64) -> Result<Self, GridError> {
        Self::with_clamp(width, height, resolution, DEFAULT_CLAMP)
    }

    pub fn with_clamp(
        width: usize,
        height: usize,
        resolution: f64,
        clamp: (f32, f32),
    ) -> Result<Self, GridError> {
        if width == 0 || height == 0 || !(resolution > 0.0) {
            return Err(GridError::InvalidShape);
        }
        if !(clamp.0 < 0.0 && clamp.1 > 0.0) {
            return Err(GridError::InvalidClamp);
        }
        Ok(Self {
            width,
            height,
            resolution,
            clamp,
            cells: alloc::vec![0.0; width * height],
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Meters per cell.
    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn clamp_bounds(&self) -> (f32, f32) {
        self.clamp
    }

    pub fn cells(&self) -> &[f32] {
        &self.cells
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.cells[row * self.width + col]
    }

    /// Sets a cell, clamped to the saturation bounds.
    pub fn set(&mut self, row: usize, col: usize, value: f32) {
        self.cells[row * self.width + col] = value.clamp(self.clamp.0, self.clamp.1);
    }

    /// Adds a log-odds increment to the cell at flat index `idx`.
    #[inline]
    pub(crate) fn add_at(&mut self, idx: usize, delta: f32) {
        let c = &mut self.cells[idx];
        *c = (*c + delta).clamp(self.clamp.0, self.clamp.1);
    }

    pub fn clear(&mut self) {
        self.cells.fill(0.0);
    }

    /// Cell holding grid point `(x, y)` (cell units), if inside the map.
    pub fn cell_at(&self, p: Point2) -> Option<(usize, usize)> {
        self.cell_of_lattice(libm::floor(p.x) as i64, libm::floor(p.y) as i64)
    }

    /// Maps lattice cell `(x, y)` (column, rows counted from the bottom) to
    /// `(row, col)`.
    #[inline]
    pub fn cell_of_lattice(&self, x: i64, y: i64) -> Option<(usize, usize)> {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return None;
        }
        Some((self.height - 1 - y as usize, x as usize))
    }

    /// Grid-unit coordinates of the center of `(row, col)`.
    pub fn cell_center(&self, row: usize, col: usize) -> Point2 {
        Point2::new(col as f64 + 0.5, (self.height - row) as f64 - 0.5)
    }

    /// Metric local-map coordinates of the center of `(row, col)`.
    pub fn cell_center_m(&self, row: usize, col: usize) -> Point2 {
        self.cell_center(row, col) * self.resolution
    }

    /// Converts a metric local-map pose to cell units (snapped to the
    /// position lattice).
    pub fn to_grid_pose(&self, pose: &Pose2D) -> GridPose {
        GridPose::new(
            crate::geom::snap(pose.x / self.resolution),
            crate::geom::snap(pose.y / self.resolution),
            pose.yaw,
        )
    }

    pub fn to_metric_pose(&self, pose: &GridPose) -> Pose2D {
        Pose2D::new(pose.x * self.resolution, pose.y * self.resolution, pose.yaw)
    }

    /// Translates the content by whole cells: afterwards
    /// `cell(r, c) == old cell(r - drow, c - dcol)`. Vacated cells become
    /// unknown (log-odds 0); shifts of a full dimension or more blank the map.
    pub fn shift(&mut self, drow: i64, dcol: i64) {
        let (h, w) = (self.height as i64, self.width as i64);
        if drow == 0 && dcol == 0 {
            return;
        }
        if drow.abs() >= h || dcol.abs() >= w {
            self.clear();
            return;
        }
        let width = self.width;
        for k in 0..h {
            // Copy order avoids overwriting rows still to be read.
            let r = if drow > 0 { h - 1 - k } else { k };
            let dst = r as usize * width;
            let src_r = r - drow;
            if src_r < 0 || src_r >= h {
                self.cells[dst..dst + width].fill(0.0);
                continue;
            }
            let src = src_r as usize * width;
            if dcol >= 0 {
                let d = dcol as usize;
                self.cells.copy_within(src..src + width - d, dst + d);
                self.cells[dst..dst + d].fill(0.0);
            } else {
                let d = (-dcol) as usize;
                self.cells.copy_within(src + d..src + width, dst);
                self.cells[dst + width - d..dst + width].fill(0.0);
            }
        }
    }

    /// Occupancy probabilities of every cell.
    pub fn normalize(&self) -> ProbabilityMap {
        ProbabilityMap {
            width: self.width,
            height: self.height,
            data: self.cells.iter().map(|&l| probability(l)).collect(),
        }
    }
}

/// H x W image of occupancy probabilities, row-major, row 0 on top.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMap {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl ProbabilityMap {
    pub fn filled(width: usize, height: usize, p: f32) -> Self {
        Self {
            width,
            height,
            data: alloc::vec![p; width * height],
        }
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.data[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, p: f32) {
        self.data[row * self.width + col] = p;
    }
}
