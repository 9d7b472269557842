//! Laser scan types and scan preprocessing.
//!
//! Raw returns are cleaned in two passes before they reach the map:
//! [`dbscan_filter`] drops clutter (rain, dust, ground touches) that forms
//! tiny clusters, and [`synthesize_virtual_points`] replaces max-range
//! returns by virtual points that clear space but never mark obstacles.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::geom::Point2;

/// Detection range of the reference sensor, meters.
pub const DEFAULT_MAX_RANGE: f64 = 150.0;
/// Horizontal aperture of the reference sensor, degrees.
pub const DEFAULT_APERTURE_DEG: f64 = 145.0;
/// Horizontal beam spacing of the reference sensor, degrees.
pub const DEFAULT_BEAM_SPACING_DEG: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PointKind {
    /// A real echo.
    Measured,
    /// Synthesized stand-in for an unreflected beam.
    Virtual,
    /// Beam without echo, range set to the sensor maximum.
    MaxRange,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanPoint {
    /// Radians in the sensor frame, counterclockwise, 0 = boresight.
    pub azimuth: f64,
    /// Meters.
    pub range: f64,
    pub layer: u8,
    pub kind: PointKind,
}

impl ScanPoint {
    pub fn measured(azimuth: f64, range: f64, layer: u8) -> Self {
        Self {
            azimuth,
            range,
            layer,
            kind: PointKind::Measured,
        }
    }

    pub fn max_range(azimuth: f64, max_range: f64, layer: u8) -> Self {
        Self {
            azimuth,
            range: max_range,
            layer,
            kind: PointKind::MaxRange,
        }
    }

    pub fn is_measured(&self) -> bool {
        self.kind == PointKind::Measured
    }

    /// Endpoint in the sensor frame.
    pub fn to_cartesian(&self) -> Point2 {
        Point2::from_angle(self.azimuth) * self.range
    }
}

/// Azimuth order with ties broken by layer.
fn scan_order(a: &ScanPoint, b: &ScanPoint) -> Ordering {
    a.azimuth
        .total_cmp(&b.azimuth)
        .then_with(|| a.layer.cmp(&b.layer))
}

/// One sweep of the scanner, all layers merged and sorted by azimuth.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FullScan {
    pub timestamp_us: u64,
    pub points: Vec<ScanPoint>,
}

impl FullScan {
    /// Builds a scan, sorting points by azimuth (then layer).
    pub fn new(timestamp_us: u64, mut points: Vec<ScanPoint>) -> Self {
        points.sort_by(scan_order);
        Self {
            timestamp_us,
            points,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_sorted(&self) -> bool {
        self.points
            .windows(2)
            .all(|w| scan_order(&w[0], &w[1]) != Ordering::Greater)
    }

    /// Checks range and aperture bounds and strict per-layer azimuth order.
    pub fn check(&self, max_range: f64, aperture: f64) -> Result<(), ScanError> {
        let half = aperture / 2.0;
        for (i, p) in self.points.iter().enumerate() {
            if !(p.range >= 0.0 && p.range <= max_range) {
                return Err(ScanError::RangeOutOfBounds { index: i, range: p.range });
            }
            if p.azimuth.abs() > half + 1e-9 {
                return Err(ScanError::OutsideAperture { index: i, azimuth: p.azimuth });
            }
        }
        let mut last: BTreeMap<u8, f64> = BTreeMap::new();
        for (i, p) in self.points.iter().enumerate() {
            if let Some(prev) = last.insert(p.layer, p.azimuth) {
                if prev >= p.azimuth {
                    return Err(ScanError::NotSorted { index: i });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScanError {
    #[error("point {index}: range {range} m outside [0, max range]")]
    RangeOutOfBounds { index: usize, range: f64 },
    #[error("point {index}: azimuth {azimuth} rad outside the sensor aperture")]
    OutsideAperture { index: usize, azimuth: f64 },
    #[error("point {index}: azimuths not strictly increasing within its layer")]
    NotSorted { index: usize },
}

/// DBSCAN parameters for clutter removal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DbscanParams {
    /// Neighborhood radius, meters.
    pub eps: f64,
    /// Neighbors (the point itself included) needed for a core point.
    pub min_pts: usize,
    /// Clusters with fewer members are dropped as clutter.
    pub min_cluster_size: usize,
}

impl Default for DbscanParams {
    fn default() -> Self {
        Self {
            eps: 0.8,
            min_pts: 3,
            min_cluster_size: 5,
        }
    }
}

/// Which of `points` survive DBSCAN clutter removal.
///
/// Points with at least `min_pts` neighbors within `eps` (themselves
/// included) are core points; cores within `eps` of each other form one
/// cluster. A non-core point within `eps` of some core is a border point of
/// every cluster owning such a core, and counts toward each of their sizes.
/// A point is kept iff it belongs to at least one cluster of
/// `min_cluster_size` or more members. Noise is dropped.
///
/// Sharing border points this way makes the result independent of point
/// order and makes the filter idempotent.
pub fn dbscan_keep_mask(points: &[Point2], params: &DbscanParams) -> Vec<bool> {
    let n = points.len();
    if n == 0 {
        return Vec::new();
    }
    let neighbors = neighbor_lists(points, params.eps);
    let is_core: Vec<bool> = neighbors.iter().map(|nb| nb.len() >= params.min_pts).collect();

    // Connected components of the core graph.
    const NONE: usize = usize::MAX;
    let mut cluster = alloc::vec![NONE; n];
    let mut n_clusters = 0;
    let mut stack = Vec::new();
    for seed in 0..n {
        if !is_core[seed] || cluster[seed] != NONE {
            continue;
        }
        cluster[seed] = n_clusters;
        stack.push(seed);
        while let Some(i) = stack.pop() {
            for &j in &neighbors[i] {
                if is_core[j] && cluster[j] == NONE {
                    cluster[j] = n_clusters;
                    stack.push(j);
                }
            }
        }
        n_clusters += 1;
    }

    // Border memberships, deduplicated per point.
    let mut size = alloc::vec![0usize; n_clusters];
    let mut memberships: Vec<Vec<usize>> = alloc::vec![Vec::new(); n];
    for i in 0..n {
        if is_core[i] {
            memberships[i].push(cluster[i]);
        } else {
            for &j in &neighbors[i] {
                if is_core[j] {
                    memberships[i].push(cluster[j]);
                }
            }
            memberships[i].sort_unstable();
            memberships[i].dedup();
        }
        for &c in &memberships[i] {
            size[c] += 1;
        }
    }

    memberships
        .iter()
        .map(|m| m.iter().any(|&c| size[c] >= params.min_cluster_size))
        .collect()
}

/// Neighbor index lists (self included) using an `eps`-sized bin grid.
fn neighbor_lists(points: &[Point2], eps: f64) -> Vec<Vec<usize>> {
    let eps2 = eps * eps;
    let bin_of = |p: Point2| -> (i64, i64) {
        (libm::floor(p.x / eps) as i64, libm::floor(p.y / eps) as i64)
    };
    let mut bins: BTreeMap<(i64, i64), Vec<usize>> = BTreeMap::new();
    for (i, &p) in points.iter().enumerate() {
        bins.entry(bin_of(p)).or_default().push(i);
    }
    points
        .iter()
        .map(|&p| {
            let (bx, by) = bin_of(p);
            let mut out = Vec::new();
            for gx in bx - 1..=bx + 1 {
                for gy in by - 1..=by + 1 {
                    if let Some(members) = bins.get(&(gx, gy)) {
                        for &j in members {
                            let d = points[j] - p;
                            if d.dot(d) <= eps2 {
                                out.push(j);
                            }
                        }
                    }
                }
            }
            out
        })
        .collect()
}

/// Removes clutter clusters and noise from the measured points of `scan`.
///
/// Only measured points take part in clustering; virtual and max-range
/// points pass through. Point order is preserved.
pub fn dbscan_filter(scan: &FullScan, params: &DbscanParams) -> FullScan {
    let measured: Vec<usize> = (0..scan.points.len())
        .filter(|&i| scan.points[i].is_measured())
        .collect();
    let coords: Vec<Point2> = measured.iter().map(|&i| scan.points[i].to_cartesian()).collect();
    let keep_measured = dbscan_keep_mask(&coords, params);

    let mut keep = alloc::vec![true; scan.points.len()];
    for (k, &i) in measured.iter().enumerate() {
        keep[i] = keep_measured[k];
    }
    FullScan {
        timestamp_us: scan.timestamp_us,
        points: scan
            .points
            .iter()
            .zip(keep)
            .filter_map(|(p, k)| k.then_some(*p))
            .collect(),
    }
}

/// Replaces every max-range point by a virtual point.
///
/// The virtual range is the smaller of the ranges of the nearest measured
/// points before and after it in azimuth order (other max-range and virtual
/// points are skipped). With a measured neighbor on one side only, that
/// neighbor's range is used; with none at all, `fallback_range` is.
pub fn synthesize_virtual_points(scan: &FullScan, fallback_range: f64) -> FullScan {
    let n = scan.points.len();
    let mut before = alloc::vec![None; n];
    let mut last = None;
    for (i, p) in scan.points.iter().enumerate() {
        before[i] = last;
        if p.is_measured() {
            last = Some(p.range);
        }
    }
    let mut after = alloc::vec![None; n];
    last = None;
    for (i, p) in scan.points.iter().enumerate().rev() {
        after[i] = last;
        if p.is_measured() {
            last = Some(p.range);
        }
    }

    let points = scan
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            if p.kind != PointKind::MaxRange {
                return *p;
            }
            let range = match (before[i], after[i]) {
                (Some(a), Some(b)) => a.min(b),
                (Some(a), None) | (None, Some(a)) => a,
                (None, None) => fallback_range,
            };
            ScanPoint {
                range,
                kind: PointKind::Virtual,
                ..*p
            }
        })
        .collect();
    FullScan {
        timestamp_us: scan.timestamp_us,
        points,
    }
}
