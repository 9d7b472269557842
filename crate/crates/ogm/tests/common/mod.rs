//! Scenarios shared by the integration tests.
#![allow(dead_code)]

use ogm::sim::{self, NoiseSpec, SensorSpec, SimOutput};
use ogm::world::World;
use ogm_core::geom::Pose2D;

pub fn rect(x1: f64, y1: f64, x2: f64, y2: f64) -> Vec<[f64; 2]> {
    vec![[x1, y1], [x2, y1], [x2, y2], [x1, y2]]
}

/// 10 m wide corridor along x with parked boxes on alternating sides.
pub fn corridor_world() -> World {
    let mut obstacles = vec![rect(0.0, 14.0, 400.0, 15.0), rect(0.0, 25.0, 400.0, 26.0)];
    for k in 0..20 {
        let x = 60.0 + 15.0 * k as f64;
        let y = if k % 2 == 0 { 15.5 } else { 22.5 };
        obstacles.push(rect(x, y, x + 4.0, y + 2.0));
    }
    World {
        bounds: [400.0, 40.0],
        obstacles,
    }
}

/// Straight drive down the corridor center at 10 m/s, one frame per 40 ms.
pub fn corridor_drive(frames: usize) -> SimOutput {
    let traj = sim::straight_trajectory(Pose2D::new(50.0, 20.0, 0.0), 10.0, frames, 40_000);
    sim::simulate(&corridor_world(), &traj, &SensorSpec::default(), &NoiseSpec::default()).unwrap()
}
