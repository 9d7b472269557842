//! Vehicle-on-a-circle alignment of a rolling local map.
//!
//! The local map never rotates and only ever moves by whole cells. The
//! vehicle is placed on a circle around the map center whose radius grows
//! with the filtered speed, behind the center when driving forward (so the
//! map covers more ground ahead) and in front of it when reversing. The
//! fractional part of each frame's shift stays in the local pose instead of
//! resampling the map.
//!
//! All positions here are in cell units snapped to the
//! [lattice](crate::geom::snap), so the integer/fraction split is exact and
//! the local pose never drifts from the world pose by anything but whole
//! cells.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use crate::geom::{snap, GridPose, Point2, Pose2D};
use crate::grid::OccupancyGrid;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AlignmentError {
    #[error("speed filter coefficients must be non-empty and sum to 1 (sum = {0})")]
    InvalidFilter(f64),
    #[error("time step must be positive (got {0} s)")]
    NonPositiveDt(f64),
    #[error("radius_max {radius_max} cells leaves less than {margin} cells to the map edge")]
    RadiusTooLarge { radius_max: f64, margin: usize },
    #[error("k_radius must be non-negative")]
    NegativeGain,
}

/// Reverse motion is only detected when the displacement opposes the
/// heading by more than this (square meters).
const REVERSE_EPS: f64 = 1e-9;

/// Signed speed from two consecutive world poses: magnitude from the
/// displacement, negative when it points against the previous heading.
pub fn estimate_speed(now: &Pose2D, prev: &Pose2D, dt: f64) -> Result<f64, AlignmentError> {
    if !(dt > 0.0) {
        return Err(AlignmentError::NonPositiveDt(dt));
    }
    let d = now.position() - prev.position();
    let magnitude = d.norm() / dt;
    if d.dot(Point2::from_angle(prev.yaw)) < -REVERSE_EPS {
        Ok(-magnitude)
    } else {
        Ok(magnitude)
    }
}

/// FIR low-pass over the last `n` raw speeds with coefficients summing to 1.
/// `a[0]` weights the newest sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedFilter {
    coeffs: Vec<f64>,
    history: VecDeque<f64>,
}

impl SpeedFilter {
    pub fn new(coeffs: Vec<f64>) -> Result<Self, AlignmentError> {
        let sum: f64 = coeffs.iter().sum();
        if coeffs.is_empty() || (sum - 1.0).abs() > 1e-9 {
            return Err(AlignmentError::InvalidFilter(sum));
        }
        Ok(Self {
            history: VecDeque::with_capacity(coeffs.len()),
            coeffs,
        })
    }

    /// Mean of the last `n` speeds.
    pub fn moving_average(n: usize) -> Result<Self, AlignmentError> {
        Self::new(alloc::vec![1.0 / n as f64; n])
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    /// Feeds the newest raw speed and returns the filtered speed. Before `n`
    /// samples exist the missing history repeats the first sample.
    pub fn push(&mut self, speed: f64) -> f64 {
        if self.history.is_empty() {
            self.history.extend(core::iter::repeat_n(speed, self.coeffs.len()));
        } else {
            self.history.pop_back();
            self.history.push_front(speed);
        }
        self.coeffs.iter().zip(&self.history).map(|(a, s)| a * s).sum()
    }

    pub fn reset(&mut self) {
        self.history.clear();
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleConfig {
    /// Circle radius per unit speed, cells per (m/s).
    pub k_radius: f64,
    /// Cells.
    pub radius_max: f64,
    /// Minimum distance in cells between the vehicle cell and the map edge.
    pub edge_margin: usize,
}

impl CircleConfig {
    pub const DEFAULT_K_RADIUS: f64 = 0.4;
    pub const DEFAULT_EDGE_MARGIN: usize = 10;

    /// Defaults for a `width` x `height` map: the radius is capped at 35 %
    /// of the shorter side and never closer than the margin to the edge.
    pub fn for_grid(width: usize, height: usize) -> Self {
        let margin = Self::DEFAULT_EDGE_MARGIN;
        Self {
            k_radius: Self::DEFAULT_K_RADIUS,
            radius_max: default_radius_max(width, height, margin),
            edge_margin: margin,
        }
    }

    /// Largest radius that keeps the vehicle cell `edge_margin` cells inside.
    pub fn radius_limit(&self, width: usize, height: usize) -> f64 {
        width.min(height) as f64 / 2.0 - self.edge_margin as f64 - 1.0
    }

    pub fn validate(&self, width: usize, height: usize) -> Result<(), AlignmentError> {
        if !(self.k_radius >= 0.0) {
            return Err(AlignmentError::NegativeGain);
        }
        if !(self.radius_max >= 0.0 && self.radius_max <= self.radius_limit(width, height)) {
            return Err(AlignmentError::RadiusTooLarge {
                radius_max: self.radius_max,
                margin: self.edge_margin,
            });
        }
        Ok(())
    }
}

pub fn default_radius_max(width: usize, height: usize, margin: usize) -> f64 {
    let side = width.min(height) as f64;
    (0.35 * side).min(side / 2.0 - margin as f64 - 1.0).max(0.0)
}

/// Circle radius in cells for a filtered speed.
pub fn circle_radius(filtered_speed: f64, cfg: &CircleConfig) -> f64 {
    (cfg.k_radius * filtered_speed.abs()).clamp(0.0, cfg.radius_max)
}

/// Vehicle position on the circle, in cell units of a `width` x `height`
/// map. Returns the pose and the radius.
pub fn circle_pose_cells(
    filtered_speed: f64,
    yaw: f64,
    width: usize,
    height: usize,
    cfg: &CircleConfig,
) -> (GridPose, f64) {
    let r = circle_radius(filtered_speed, cfg);
    let sign = if filtered_speed < 0.0 { -1.0 } else { 1.0 };
    let center = Point2::new(width as f64 / 2.0, height as f64 / 2.0);
    let p = center - Point2::from_angle(yaw) * (sign * r);
    (GridPose::new(snap(p.x), snap(p.y), yaw), r)
}

/// Vehicle position on the circle in the metric local-map frame.
pub fn circle_pose(filtered_speed: f64, yaw: f64, grid: &OccupancyGrid, cfg: &CircleConfig) -> Pose2D {
    let (p, _) = circle_pose_cells(filtered_speed, yaw, grid.width(), grid.height(), cfg);
    grid.to_metric_pose(&p)
}

/// `P_world(t) - P_world(t-1) + P_local(t-1) - P_c(t)` in cell units.
pub fn compute_shift(
    world_now: &Pose2D,
    world_prev: &Pose2D,
    local_prev: &Pose2D,
    circle: &Pose2D,
    resolution: f64,
) -> Point2 {
    let c = |v: f64| snap(v / resolution);
    Point2::new(
        c(world_now.x) - c(world_prev.x) + c(local_prev.x) - c(circle.x),
        c(world_now.y) - c(world_prev.y) + c(local_prev.y) - c(circle.y),
    )
}

/// Splits a shift into its floor and the fraction in `[0, 1)`.
pub fn split_shift(shift: Point2) -> ((i64, i64), Point2) {
    let fx = libm::floor(shift.x);
    let fy = libm::floor(shift.y);
    ((fx as i64, fy as i64), Point2::new(shift.x - fx, shift.y - fy))
}

/// Shifts map content for an integer pose shift `(dx, dy)` cells: the map
/// moves down by `dy` rows and left by `dx` columns.
pub fn shift_map(grid: &mut OccupancyGrid, cell_shift: (i64, i64)) {
    grid.shift(cell_shift.1, -cell_shift.0);
}

/// Outcome of one alignment step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignmentStep {
    pub local: GridPose,
    pub circle: GridPose,
    pub radius_cells: f64,
    pub speed: f64,
    pub filtered_speed: f64,
    /// Full shift in cells before the integer/fraction split.
    pub shift: Point2,
    /// Integer part `(dx, dy)` applied to the map.
    pub cell_shift: (i64, i64),
}

#[derive(Debug, Clone, Copy)]
struct Previous {
    world: Pose2D,
    world_cells: Point2,
    timestamp_us: u64,
}

/// Sequential alignment state: filter history, previous poses and the
/// cumulative integer shift.
#[derive(Debug, Clone)]
pub struct PositionCircle {
    cfg: CircleConfig,
    filter: SpeedFilter,
    prev: Option<Previous>,
    local: GridPose,
    total_shift: (i64, i64),
}

impl PositionCircle {
    pub fn new(cfg: CircleConfig, filter: SpeedFilter) -> Self {
        Self {
            cfg,
            filter,
            prev: None,
            local: GridPose::default(),
            total_shift: (0, 0),
        }
    }

    pub fn config(&self) -> &CircleConfig {
        &self.cfg
    }

    /// Current vehicle pose in cell units of the local map.
    pub fn local(&self) -> GridPose {
        self.local
    }

    pub fn is_initialized(&self) -> bool {
        self.prev.is_some()
    }

    /// Sum of all integer shifts `(dx, dy)` applied so far.
    pub fn total_shift(&self) -> (i64, i64) {
        self.total_shift
    }

    /// Advances to world pose `world` at `timestamp_us`, shifting `grid` by
    /// the integer part of the pose shift.
    ///
    /// The first call initializes the state with zero speed and places the
    /// vehicle on the circle without shifting. `speed_override` replaces the
    /// pose-derived speed when an external speed source is available.
    pub fn step(
        &mut self,
        world: &Pose2D,
        timestamp_us: u64,
        grid: &mut OccupancyGrid,
        speed_override: Option<f64>,
    ) -> Result<AlignmentStep, AlignmentError> {
        let res = grid.resolution();
        let world_cells = Point2::new(snap(world.x / res), snap(world.y / res));

        let (speed, prev) = match self.prev {
            None => (speed_override.unwrap_or(0.0), None),
            Some(p) => {
                let dt = (timestamp_us as f64 - p.timestamp_us as f64) * 1e-6;
                let speed = match speed_override {
                    Some(s) if dt > 0.0 => s,
                    _ => estimate_speed(world, &p.world, dt)?,
                };
                (speed, Some(p))
            }
        };
        let filtered = self.filter.push(speed);
        let (circle, radius) = circle_pose_cells(filtered, world.yaw, grid.width(), grid.height(), &self.cfg);

        // Initially the previous local pose is the circle point and the
        // previous world pose the current one, so nothing shifts.
        let (world_prev_cells, local_prev) = match prev {
            None => (world_cells, circle.position()),
            Some(p) => (p.world_cells, self.local.position()),
        };
        let shift = world_cells - world_prev_cells + local_prev - circle.position();
        let (cell_shift, frac) = split_shift(shift);

        shift_map(grid, cell_shift);
        self.local = GridPose::new(circle.x + frac.x, circle.y + frac.y, world.yaw);
        self.total_shift.0 += cell_shift.0;
        self.total_shift.1 += cell_shift.1;
        self.prev = Some(Previous {
            world: *world,
            world_cells,
            timestamp_us,
        });

        Ok(AlignmentStep {
            local: self.local,
            circle,
            radius_cells: radius,
            speed,
            filtered_speed: filtered,
            shift,
            cell_shift,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::vec;

    #[test]
    fn speed_from_pose_deltas() {
        let p = Pose2D::new(3.0, 4.0, 0.0);
        assert_eq!(estimate_speed(&p, &p, 0.04).unwrap(), 0.0);
        let fwd = Pose2D::new(4.0, 4.0, 0.0);
        assert!((estimate_speed(&fwd, &p, 0.04).unwrap() - 25.0).abs() < 1e-12);
        let back = Pose2D::new(2.0, 4.0, 0.0);
        assert!((estimate_speed(&back, &p, 0.04).unwrap() + 25.0).abs() < 1e-12);
        assert!(estimate_speed(&fwd, &p, 0.0).is_err());
        // Pure lateral motion counts as forward.
        let side = Pose2D::new(3.0, 5.0, 0.0);
        assert!(estimate_speed(&side, &p, 1.0).unwrap() > 0.0);
    }

    #[test]
    fn moving_average_filter() {
        let mut f = SpeedFilter::moving_average(3).unwrap();
        f.push(2.0);
        f.push(4.0);
        assert!((f.push(6.0) - 4.0).abs() < 1e-12);
        let mut id = SpeedFilter::new(vec![1.0]).unwrap();
        assert_eq!(id.push(7.5), 7.5);
        assert_eq!(id.push(-1.0), -1.0);
    }

    #[test]
    fn filter_rejects_bad_coefficients() {
        assert!(SpeedFilter::new(vec![0.5, 0.6]).is_err());
        assert!(SpeedFilter::new(vec![]).is_err());
    }

    #[test]
    fn circle_at_rest_is_map_center() {
        let cfg = CircleConfig::for_grid(300, 300);
        let (p, r) = circle_pose_cells(0.0, 1.0, 300, 300, &cfg);
        assert_eq!((p.x, p.y, r), (150.0, 150.0, 0.0));
    }

    #[test]
    fn forward_motion_puts_vehicle_behind_center() {
        let cfg = CircleConfig::for_grid(300, 300);
        let (p, r) = circle_pose_cells(20.0, 0.0, 300, 300, &cfg);
        assert_eq!(r, 8.0);
        assert_eq!(p.x, 142.0);
        assert_eq!(p.y, 150.0);
        let (q, _) = circle_pose_cells(-20.0, 0.0, 300, 300, &cfg);
        assert_eq!(q.x, 158.0);
    }

    #[test]
    fn huge_speed_clamps_to_radius_max() {
        let cfg = CircleConfig::for_grid(300, 300);
        assert_eq!(cfg.radius_max, 105.0);
        let (p, r) = circle_pose_cells(1e6, 0.3, 300, 300, &cfg);
        assert_eq!(r, 105.0);
        let margin = cfg.edge_margin as f64;
        assert!(p.x >= margin && p.x < 300.0 - margin);
        assert!(p.y >= margin && p.y < 300.0 - margin);
    }

    #[test]
    fn shift_examples() {
        let res = 0.2;
        let o = Pose2D::new(0.0, 0.0, 0.0);
        let c = Pose2D::new(30.0, 30.0, 0.0);
        assert_eq!(compute_shift(&o, &o, &c, &c, res), Point2::new(0.0, 0.0));
        let s = compute_shift(&Pose2D::new(1.0, 0.0, 0.0), &o, &c, &c, res);
        assert_eq!(s, Point2::new(5.0, 0.0));
        let s = compute_shift(&Pose2D::new(0.7, -0.44, 0.0), &o, &c, &c, res);
        assert!((s.x - 3.5).abs() < 1e-7 && (s.y + 2.2).abs() < 1e-7);
    }

    #[test]
    fn split_uses_floor_convention() {
        let ((ix, iy), f) = split_shift(Point2::new(snap(3.7), snap(-2.2)));
        assert_eq!((ix, iy), (3, -3));
        assert!((f.x - 0.7).abs() < 1e-7 && (f.y - 0.8).abs() < 1e-7);
    }

    #[test]
    fn standing_still_never_shifts() {
        let mut grid = OccupancyGrid::new(100, 100, 0.2).unwrap();
        grid.set(10, 10, 2.0);
        let before = grid.clone();
        let mut pc = PositionCircle::new(CircleConfig::for_grid(100, 100), SpeedFilter::moving_average(5).unwrap());
        let w = Pose2D::new(12.3, -4.5, 0.7);
        let first = pc.step(&w, 0, &mut grid, None).unwrap();
        for k in 1..20 {
            let s = pc.step(&w, k * 40_000, &mut grid, None).unwrap();
            assert_eq!(s.cell_shift, (0, 0));
            assert_eq!(s.local, first.local);
        }
        assert_eq!(grid, before);
    }

    #[test]
    fn straight_drive_keeps_fixed_circle_point() {
        let mut grid = OccupancyGrid::new(300, 300, 0.2).unwrap();
        let mut pc = PositionCircle::new(CircleConfig::for_grid(300, 300), SpeedFilter::moving_average(5).unwrap());
        let v = 10.0;
        let mut circles = Vec::new();
        for k in 0..60u64 {
            let w = Pose2D::new(v * 0.04 * k as f64, 0.0, 0.0);
            let s = pc.step(&w, k * 40_000, &mut grid, None).unwrap();
            circles.push(s.circle);
            assert_eq!(s.local.yaw, w.yaw);
        }
        // After the filter warms up the circle point is constant: 4 cells
        // behind center; the fraction of 0.4 m/frame = 2 cells stays zero.
        let last = circles[circles.len() - 1];
        assert_eq!(last.x, 146.0);
        assert!(circles[10..].iter().all(|c| *c == last));
        assert_eq!(pc.local().x, 146.0);
    }

    proptest! {
        #[test]
        fn split_reconstructs_shift(x in -1e4f64..1e4, y in -1e4f64..1e4) {
            let s = Point2::new(snap(x), snap(y));
            let ((ix, iy), f) = split_shift(s);
            prop_assert!(f.x >= 0.0 && f.x < 1.0 && f.y >= 0.0 && f.y < 1.0);
            prop_assert_eq!(ix as f64 + f.x, s.x);
            prop_assert_eq!(iy as f64 + f.y, s.y);
        }

        #[test]
        fn radius_monotone_until_clamp(a in 0.0f64..500.0, b in 0.0f64..500.0) {
            let cfg = CircleConfig::for_grid(300, 300);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(circle_radius(lo, &cfg) <= circle_radius(hi, &cfg));
            prop_assert!(circle_radius(-hi, &cfg) == circle_radius(hi, &cfg));
        }

        #[test]
        fn constant_input_is_fixed_point(s in -50.0f64..50.0, raw in proptest::collection::vec(0.01f64..1.0, 1..8)) {
            let total: f64 = raw.iter().sum();
            let coeffs: Vec<f64> = raw.iter().map(|a| a / total).collect();
            let mut f = SpeedFilter::new(coeffs.clone()).unwrap();
            let mut out = 0.0;
            for _ in 0..coeffs.len() + 2 {
                out = f.push(s);
            }
            prop_assert!((out - s).abs() <= 1e-9 * s.abs().max(1.0));
        }
    }
}
