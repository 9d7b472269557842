//! Laser scanner simulation against a polygon world.

use ogm_core::geom::{Point2, Pose2D};
use ogm_core::pipeline::OdometryRecord;
use ogm_core::scan::{self, FullScan, ScanPoint};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::FormatError;
use crate::world::World;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorSpec {
    pub aperture_deg: f64,
    pub resolution_deg: f64,
    pub max_range: f64,
    pub layers: u8,
    /// Sensor pose in the vehicle frame.
    pub mount: Pose2D,
}

impl Default for SensorSpec {
    fn default() -> Self {
        Self {
            aperture_deg: scan::DEFAULT_APERTURE_DEG,
            resolution_deg: scan::DEFAULT_BEAM_SPACING_DEG,
            max_range: scan::DEFAULT_MAX_RANGE,
            layers: 1,
            mount: Pose2D::default(),
        }
    }
}

impl SensorSpec {
    pub fn beam_count(&self) -> usize {
        (self.aperture_deg / self.resolution_deg).round() as usize
    }

    /// Beam azimuths in radians, centered on boresight.
    pub fn azimuths(&self) -> Vec<f64> {
        let n = self.beam_count();
        (0..n)
            .map(|k| (-self.aperture_deg / 2.0 + (k as f64 + 0.5) * self.resolution_deg).to_radians())
            .collect()
    }

    /// World pose of the sensor for a vehicle pose.
    pub fn sensor_pose(&self, vehicle: &Pose2D) -> Pose2D {
        let off = Point2::new(self.mount.x, self.mount.y).rotated(vehicle.yaw);
        Pose2D::new(vehicle.x + off.x, vehicle.y + off.y, vehicle.yaw + self.mount.yaw)
    }
}

/// Optional measurement corruption; all zero by default.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseSpec {
    /// Standard deviation of additive range noise, meters.
    pub range_sigma: f64,
    /// Probability that a return is lost (reported without echo).
    pub dropout: f64,
    /// Spurious returns added per scan.
    pub clutter_points: usize,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn is_noiseless(&self) -> bool {
        self.range_sigma == 0.0 && self.dropout == 0.0 && self.clutter_points == 0
    }
}

/// Noise-free visible boundary of one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthFrame {
    pub timestamp_us: u64,
    pub sensor_pose: [f64; 3],
    /// True range per beam; `None` when nothing is hit within max range.
    pub ranges: Vec<Option<f64>>,
    /// World-frame beam endpoints (at max range for misses), in beam order.
    pub boundary: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub scans: Vec<FullScan>,
    pub odometry: Vec<OdometryRecord>,
    pub ground_truth: Vec<GroundTruthFrame>,
}

/// Casts every beam of every layer for each trajectory pose. Beams that hit
/// nothing within range are emitted without echo.
pub fn simulate(
    world: &World,
    trajectory: &[OdometryRecord],
    sensor: &SensorSpec,
    noise: &NoiseSpec,
) -> Result<SimOutput, FormatError> {
    if !(sensor.resolution_deg > 0.0 && sensor.aperture_deg > 0.0 && sensor.max_range > 0.0 && sensor.layers > 0) {
        return Err(FormatError::invalid("sensor spec needs positive aperture, resolution, range and layers"));
    }
    if !(noise.range_sigma >= 0.0 && (0.0..=1.0).contains(&noise.dropout)) {
        return Err(FormatError::invalid("noise sigma must be >= 0 and dropout in [0, 1]"));
    }
    let mut rng = StdRng::seed_from_u64(noise.seed);
    let jitter = Normal::new(0.0, noise.range_sigma).map_err(FormatError::invalid)?;
    let azimuths = sensor.azimuths();
    let mut out = SimOutput {
        scans: Vec::with_capacity(trajectory.len()),
        odometry: trajectory.to_vec(),
        ground_truth: Vec::with_capacity(trajectory.len()),
    };
    for rec in trajectory {
        let pose = rec.pose();
        if !world.in_bounds(pose.position()) {
            return Err(FormatError::invalid(format!(
                "trajectory pose at {} us lies outside the world bounds",
                rec.timestamp_us
            )));
        }
        let sp = sensor.sensor_pose(&pose);
        let origin = sp.position();
        let ranges: Vec<Option<f64>> = azimuths
            .iter()
            .map(|&az| world.cast_ray(origin, Point2::from_angle(sp.yaw + az), sensor.max_range))
            .collect();

        let mut points = Vec::with_capacity(azimuths.len() * sensor.layers as usize);
        for layer in 0..sensor.layers {
            for (&az, &r) in azimuths.iter().zip(&ranges) {
                let point = match r {
                    Some(_) if noise.dropout > 0.0 && rng.random_bool(noise.dropout) => {
                        ScanPoint::max_range(az, sensor.max_range, layer)
                    }
                    Some(r) => {
                        let noisy = if noise.range_sigma > 0.0 { r + jitter.sample(&mut rng) } else { r };
                        ScanPoint::measured(az, noisy.clamp(0.0, sensor.max_range), layer)
                    }
                    None => ScanPoint::max_range(az, sensor.max_range, layer),
                };
                points.push(point);
            }
        }
        // Clutter lives on its own layer at off-grid azimuths.
        let half = (sensor.aperture_deg / 2.0).to_radians();
        for _ in 0..noise.clutter_points {
            let az = rng.random_range(-half..half);
            let r = rng.random_range(0.5..sensor.max_range.min(30.0));
            points.push(ScanPoint::measured(az, r, sensor.layers));
        }

        let boundary = azimuths
            .iter()
            .zip(&ranges)
            .map(|(&az, r)| {
                let p = origin + Point2::from_angle(sp.yaw + az) * r.unwrap_or(sensor.max_range);
                [p.x, p.y]
            })
            .collect();
        out.ground_truth.push(GroundTruthFrame {
            timestamp_us: rec.timestamp_us,
            sensor_pose: [sp.x, sp.y, sp.yaw],
            ranges,
            boundary,
        });
        out.scans.push(FullScan::new(rec.timestamp_us, points));
    }
    Ok(out)
}

/// Poses along a straight line at constant speed, one per `period_us`.
pub fn straight_trajectory(start: Pose2D, speed: f64, frames: usize, period_us: u64) -> Vec<OdometryRecord> {
    let dir = Point2::from_angle(start.yaw);
    (0..frames)
        .map(|k| {
            let t = k as f64 * period_us as f64 * 1e-6;
            let p = start.position() + dir * (speed * t);
            OdometryRecord::new(k as u64 * period_us, p.x, p.y, start.yaw)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ogm_core::scan::PointKind;

    fn one_pose() -> Vec<OdometryRecord> {
        vec![OdometryRecord::new(0, 10.0, 20.0, 0.0)]
    }

    #[test]
    fn beam_layout() {
        let s = SensorSpec::default();
        assert_eq!(s.beam_count(), 580);
        let az = s.azimuths();
        assert!((az[0].to_degrees() + 72.375).abs() < 1e-9);
        assert!((az[579].to_degrees() - 72.375).abs() < 1e-9);
    }

    #[test]
    fn wall_ten_meters_ahead() {
        let world = World {
            bounds: [50.0, 50.0],
            obstacles: vec![vec![[20.0, 0.0], [21.0, 0.0], [21.0, 40.0], [20.0, 40.0]]],
        };
        let sensor = SensorSpec {
            aperture_deg: 1.0,
            resolution_deg: 1.0,
            ..SensorSpec::default()
        };
        let out = simulate(&world, &one_pose(), &sensor, &NoiseSpec::default()).unwrap();
        let p = out.scans[0].points[0];
        assert_eq!(p.azimuth, 0.0);
        assert_eq!(p.range, 10.0);
        assert_eq!(p.kind, PointKind::Measured);
    }

    #[test]
    fn open_field_has_no_echoes() {
        let world = World {
            bounds: [50.0, 50.0],
            obstacles: vec![],
        };
        let out = simulate(&world, &one_pose(), &SensorSpec::default(), &NoiseSpec::default()).unwrap();
        assert!(out.scans[0].points.iter().all(|p| p.kind == PointKind::MaxRange));
    }

    #[test]
    fn noise_is_seeded() {
        let world = World::box_room([40.0, 40.0], 5.0, 5.0, 30.0, 30.0, 0.5);
        let noise = NoiseSpec {
            range_sigma: 0.05,
            dropout: 0.1,
            clutter_points: 4,
            seed: 9,
        };
        let traj = one_pose();
        let a = simulate(&world, &traj, &SensorSpec::default(), &noise).unwrap();
        let b = simulate(&world, &traj, &SensorSpec::default(), &noise).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.scans[0].len(), 584);
    }
}
