//! Per-frame processing from a raw full scan to the free-space polygon.

use alloc::vec::Vec;

use crate::alignment::{AlignmentError, AlignmentStep, CircleConfig, PositionCircle, SpeedFilter};
use crate::freespace::{self, BinaryMap, Connectivity, EdgeIndexGrid, FreespaceError};
use crate::geom::{snap, GridPose, Point2, Pose2D};
use crate::grid::{GridError, IsmConfig, OccupancyGrid, DEFAULT_CLAMP};
use crate::ism::{IsmError, Rasterizer, UpdateStats};
use crate::scan::{self, DbscanParams, FullScan};
use crate::simplify::{self, FreeSpacePolygon, SimplifyError};

/// Vehicle pose from odometry. `speed` (m/s, signed) overrides the speed
/// derived from pose differences when present.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdometryRecord {
    pub timestamp_us: u64,
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    pub speed: Option<f64>,
}

impl OdometryRecord {
    pub fn new(timestamp_us: u64, x: f64, y: f64, yaw: f64) -> Self {
        Self {
            timestamp_us,
            x,
            y,
            yaw,
            speed: None,
        }
    }

    pub fn pose(&self) -> Pose2D {
        Pose2D::new(self.x, self.y, self.yaw)
    }
}

/// Record nearest in time to `timestamp_us` if it lies within `tolerance_us`.
/// `records` must be sorted by timestamp; ties go to the earlier record.
pub fn match_odometry(records: &[OdometryRecord], timestamp_us: u64, tolerance_us: u64) -> Option<&OdometryRecord> {
    let i = records.partition_point(|r| r.timestamp_us < timestamp_us);
    let gap = |r: &OdometryRecord| r.timestamp_us.abs_diff(timestamp_us);
    let before = i.checked_sub(1).map(|k| &records[k]);
    let after = records.get(i);
    let best = match (before, after) {
        (Some(b), Some(a)) => Some(if gap(a) < gap(b) { a } else { b }),
        (b, a) => b.or(a),
    }?;
    (gap(best) <= tolerance_us).then_some(best)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub width: usize,
    pub height: usize,
    /// Meters per cell.
    pub resolution: f64,
    pub ism: IsmConfig,
    pub clamp: (f32, f32),
    pub dbscan_enabled: bool,
    pub dbscan: DbscanParams,
    /// Range for virtual points when a scan has no measured return, meters.
    pub virtual_fallback_range: f64,
    /// Speed filter coefficients, newest sample first.
    pub speed_filter: Vec<f64>,
    pub k_radius: f64,
    /// Cells.
    pub radius_max: f64,
    pub edge_margin: usize,
    pub hysteresis_low: f64,
    pub hysteresis_high: f64,
    pub connectivity: Connectivity,
    /// Cells.
    pub opening_radius: usize,
    /// Meters.
    pub epsilon: f64,
    pub max_vertices: usize,
    /// Sensor pose in the vehicle frame (meters, radians).
    pub mount: Pose2D,
    pub odom_tolerance_us: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let (w, h) = (300, 300);
        let circle = CircleConfig::for_grid(w, h);
        Self {
            width: w,
            height: h,
            resolution: 0.2,
            ism: IsmConfig::default(),
            clamp: DEFAULT_CLAMP,
            dbscan_enabled: true,
            dbscan: DbscanParams::default(),
            virtual_fallback_range: 0.0,
            speed_filter: alloc::vec![0.2; 5],
            k_radius: circle.k_radius,
            radius_max: circle.radius_max,
            edge_margin: circle.edge_margin,
            hysteresis_low: freespace::DEFAULT_LOW,
            hysteresis_high: freespace::DEFAULT_HIGH,
            connectivity: Connectivity::Eight,
            opening_radius: freespace::DEFAULT_OPENING_RADIUS,
            epsilon: simplify::DEFAULT_EPSILON,
            max_vertices: simplify::DEFAULT_MAX_VERTICES,
            mount: Pose2D::default(),
            odom_tolerance_us: 20_000,
        }
    }
}

impl PipelineConfig {
    /// Default settings for a `width` x `height` map, with the circle radius
    /// cap recomputed for that size.
    pub fn with_grid(width: usize, height: usize, resolution: f64) -> Self {
        let circle = CircleConfig::for_grid(width, height);
        Self {
            width,
            height,
            resolution,
            radius_max: circle.radius_max,
            ..Self::default()
        }
    }

    /// Sensor pose in cell units for a vehicle pose in cell units. The
    /// mount offset is snapped to the position lattice.
    pub fn sensor_pose(&self, vehicle: &GridPose) -> GridPose {
        let m = self.mount;
        let offset = Point2::new(m.x, m.y).rotated(vehicle.yaw) * (1.0 / self.resolution);
        GridPose::new(
            vehicle.x + snap(offset.x),
            vehicle.y + snap(offset.y),
            vehicle.yaw + m.yaw,
        )
    }

    pub fn circle(&self) -> CircleConfig {
        CircleConfig {
            k_radius: self.k_radius,
            radius_max: self.radius_max,
            edge_margin: self.edge_margin,
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        OccupancyGrid::with_clamp(self.width, self.height, self.resolution, self.clamp)?;
        self.ism.validate()?;
        SpeedFilter::new(self.speed_filter.clone())?;
        self.circle().validate(self.width, self.height)?;
        let (low, high) = (self.hysteresis_low, self.hysteresis_high);
        if !(0.0 <= low && low <= high && high <= 1.0) {
            return Err(FreespaceError::InvalidThresholds { low, high }.into());
        }
        if !(self.epsilon >= 0.0) {
            return Err(SimplifyError::InvalidEpsilon(self.epsilon).into());
        }
        if self.max_vertices < 3 {
            return Err(SimplifyError::BudgetTooSmall {
                min: 3,
                got: self.max_vertices,
            }
            .into());
        }
        if !(self.dbscan.eps > 0.0) || self.dbscan.min_pts == 0 {
            return Err(PipelineError::InvalidDbscan);
        }
        if !(self.virtual_fallback_range >= 0.0) {
            return Err(PipelineError::InvalidFallbackRange);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Ism(#[from] IsmError),
    #[error(transparent)]
    Alignment(#[from] AlignmentError),
    #[error(transparent)]
    Freespace(#[from] FreespaceError),
    #[error(transparent)]
    Simplify(#[from] SimplifyError),
    #[error("DBSCAN needs eps > 0 and min_pts >= 1")]
    InvalidDbscan,
    #[error("virtual point fallback range must be non-negative")]
    InvalidFallbackRange,
    #[error("scan at {scan_us} us has no odometry within {tolerance_us} us (nearest {odom_us} us)")]
    TimeGap { scan_us: u64, odom_us: u64, tolerance_us: u64 },
    #[error("frame at {got} us is not after the previous frame at {previous} us")]
    OutOfOrder { previous: u64, got: u64 },
}

/// Non-fatal conditions reported with a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameEvent {
    /// The vehicle cell is occupied after opening; no edges were extracted.
    VehicleCellOccupied { row: usize, col: usize },
    /// The previous frame's polygon was returned instead of a new one.
    ReusedPreviousPolygon,
    /// No polygon is available yet.
    NoPolygon,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutput {
    pub timestamp_us: u64,
    pub world_pose: Pose2D,
    /// Vehicle pose in the metric local-map frame.
    pub local_pose: Pose2D,
    pub polygon: FreeSpacePolygon,
    pub stats: UpdateStats,
    pub alignment: AlignmentStep,
    /// Number of in-sight edge cells before simplification.
    pub edge_cells: usize,
    pub events: Vec<FrameEvent>,
}

/// Rolling map state carried from frame to frame.
#[derive(Debug, Clone)]
pub struct Pipeline {
    cfg: PipelineConfig,
    grid: OccupancyGrid,
    circle: PositionCircle,
    rasterizer: Rasterizer,
    polygon: Option<FreeSpacePolygon>,
    binary: Option<BinaryMap>,
    edges: Option<EdgeIndexGrid>,
    last_timestamp: Option<u64>,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig) -> Result<Self, PipelineError> {
        cfg.validate()?;
        let grid = OccupancyGrid::with_clamp(cfg.width, cfg.height, cfg.resolution, cfg.clamp)?;
        let circle = PositionCircle::new(cfg.circle(), SpeedFilter::new(cfg.speed_filter.clone())?);
        Ok(Self {
            cfg,
            grid,
            circle,
            rasterizer: Rasterizer::new(),
            polygon: None,
            binary: None,
            edges: None,
            last_timestamp: None,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn grid(&self) -> &OccupancyGrid {
        &self.grid
    }

    /// Opened binary map of the last frame.
    pub fn binary_map(&self) -> Option<&BinaryMap> {
        self.binary.as_ref()
    }

    /// Edge key grid of the last frame that produced edges.
    pub fn edge_grid(&self) -> Option<&EdgeIndexGrid> {
        self.edges.as_ref()
    }

    pub fn position_circle(&self) -> &PositionCircle {
        &self.circle
    }

    /// Sensor pose in cell units for a vehicle pose in cell units.
    pub fn sensor_pose(&self, vehicle: &GridPose) -> GridPose {
        self.cfg.sensor_pose(vehicle)
    }

    /// Runs one frame. Fails without touching the state when the odometry
    /// is too far from the scan in time or frames arrive out of order.
    pub fn run_frame(&mut self, scan: &FullScan, odom: &OdometryRecord) -> Result<FrameOutput, PipelineError> {
        let gap = scan.timestamp_us.abs_diff(odom.timestamp_us);
        if gap > self.cfg.odom_tolerance_us {
            return Err(PipelineError::TimeGap {
                scan_us: scan.timestamp_us,
                odom_us: odom.timestamp_us,
                tolerance_us: self.cfg.odom_tolerance_us,
            });
        }
        if let Some(prev) = self.last_timestamp {
            if scan.timestamp_us <= prev {
                return Err(PipelineError::OutOfOrder {
                    previous: prev,
                    got: scan.timestamp_us,
                });
            }
        }

        let filtered = if self.cfg.dbscan_enabled {
            scan::dbscan_filter(scan, &self.cfg.dbscan)
        } else {
            scan.clone()
        };
        let prepared = scan::synthesize_virtual_points(&filtered, self.cfg.virtual_fallback_range);

        let world = odom.pose();
        let step = self.circle.step(&world, odom.timestamp_us, &mut self.grid, odom.speed)?;
        self.last_timestamp = Some(scan.timestamp_us);

        let sensor = self.sensor_pose(&step.local);
        let stats = self.rasterizer.enhanced(&mut self.grid, &prepared, &sensor, &self.cfg.ism)?;

        let probs = self.grid.normalize();
        let bin = freespace::binarize_hysteresis(
            &probs,
            self.cfg.hysteresis_low,
            self.cfg.hysteresis_high,
            self.cfg.connectivity,
        )?;
        let bin = freespace::opening(&bin, self.cfg.opening_radius);

        let mut events = Vec::new();
        let vehicle = freespace::vehicle_cell(&step.local, self.cfg.width, self.cfg.height)?;
        let mut edge_cells = 0;
        let polygon = match EdgeIndexGrid::build(&bin, vehicle) {
            Ok(edges) => {
                let cells = edges.edges();
                edge_cells = cells.len();
                let pts: Vec<Point2> = cells.iter().map(|e| self.grid.cell_center_m(e.row, e.col)).collect();
                let poly = simplify::simplify_polygon(&pts, self.cfg.epsilon, self.cfg.max_vertices)?;
                self.edges = Some(edges);
                self.polygon = Some(poly.clone());
                poly
            }
            Err(FreespaceError::VehicleOccupied { row, col }) => {
                events.push(FrameEvent::VehicleCellOccupied { row, col });
                match &self.polygon {
                    Some(p) => {
                        events.push(FrameEvent::ReusedPreviousPolygon);
                        p.clone()
                    }
                    None => {
                        events.push(FrameEvent::NoPolygon);
                        FreeSpacePolygon::default()
                    }
                }
            }
            Err(e) => return Err(e.into()),
        };
        self.binary = Some(bin);

        Ok(FrameOutput {
            timestamp_us: scan.timestamp_us,
            world_pose: world,
            local_pose: self.grid.to_metric_pose(&step.local),
            polygon,
            stats,
            alignment: step,
            edge_cells,
            events,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scan::ScanPoint;

    fn small_config() -> PipelineConfig {
        let mut cfg = PipelineConfig::with_grid(120, 120, 0.2);
        cfg.opening_radius = 2;
        cfg
    }

    /// Semicircular wall at `r` meters over a 145 degree fan.
    fn arc_scan(ts: u64, r: f64) -> FullScan {
        let n = 290;
        let pts = (0..n)
            .map(|k| {
                let az = (-72.5 + (k as f64 + 0.5) * 0.5).to_radians();
                ScanPoint::measured(az, r, 0)
            })
            .collect();
        FullScan::new(ts, pts)
    }

    #[test]
    fn odometry_matching() {
        let recs: Vec<OdometryRecord> = [0u64, 40_000, 80_000]
            .iter()
            .map(|&t| OdometryRecord::new(t, 0.0, 0.0, 0.0))
            .collect();
        assert_eq!(match_odometry(&recs, 45_000, 20_000).unwrap().timestamp_us, 40_000);
        assert_eq!(match_odometry(&recs, 60_000, 20_000).unwrap().timestamp_us, 40_000);
        assert!(match_odometry(&recs, 130_000, 20_000).is_none());
        assert_eq!(match_odometry(&recs, 95_000, 20_000).unwrap().timestamp_us, 80_000);
    }

    #[test]
    fn default_config_is_valid() {
        let cfg = PipelineConfig::default();
        cfg.validate().unwrap();
        assert_eq!((cfg.width, cfg.height, cfg.resolution), (300, 300, 0.2));
        assert_eq!(cfg.radius_max, 105.0);
    }

    #[test]
    fn rejects_time_gap_and_reordering() {
        let mut p = Pipeline::new(small_config()).unwrap();
        let scan = arc_scan(100_000, 5.0);
        let far = OdometryRecord::new(200_000, 0.0, 0.0, 0.0);
        assert!(matches!(p.run_frame(&scan, &far), Err(PipelineError::TimeGap { .. })));
        let odom = OdometryRecord::new(100_000, 0.0, 0.0, 0.0);
        p.run_frame(&scan, &odom).unwrap();
        assert!(matches!(p.run_frame(&scan, &odom), Err(PipelineError::OutOfOrder { .. })));
    }

    #[test]
    fn stationary_frames_reach_fixed_point() {
        let mut p = Pipeline::new(small_config()).unwrap();
        let mut outputs = Vec::new();
        for k in 0..20u64 {
            let ts = k * 40_000;
            let out = p.run_frame(&arc_scan(ts, 6.0), &OdometryRecord::new(ts, 1.0, 2.0, 0.3)).unwrap();
            assert!(out.polygon.len() <= p.config().max_vertices);
            assert_eq!(out.stats.max_updates_per_cell, 1);
            outputs.push(out);
        }
        let (a, b) = (&outputs[18], &outputs[19]);
        assert_eq!(a.polygon, b.polygon);
        assert!(a.polygon.len() >= 3);
    }

    #[test]
    fn empty_scan_keeps_shape() {
        let mut p = Pipeline::new(small_config()).unwrap();
        let mut last = None;
        for k in 0..10u64 {
            let ts = k * 40_000;
            last = Some(p.run_frame(&arc_scan(ts, 6.0), &OdometryRecord::new(ts, 0.0, 0.0, 0.0)).unwrap());
        }
        let empty = FullScan::new(400_000, Vec::new());
        let out = p.run_frame(&empty, &OdometryRecord::new(400_000, 0.0, 0.0, 0.0)).unwrap();
        assert_eq!(out.stats.total_updates, 0);
        assert_eq!(out.polygon, last.unwrap().polygon);
    }

    #[test]
    fn mount_offset_rotates_with_vehicle() {
        let mut cfg = small_config();
        cfg.mount = Pose2D::new(1.0, 0.0, 0.0);
        let p = Pipeline::new(cfg).unwrap();
        let s = p.sensor_pose(&GridPose::new(60.0, 60.0, core::f64::consts::FRAC_PI_2));
        assert!((s.x - 60.0).abs() < 1e-6 && (s.y - 65.0).abs() < 1e-6);
    }
}
