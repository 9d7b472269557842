//! Points, poses and the exact cell lattice used for map positions.

use core::f64::consts::{PI, TAU};
use core::ops::{Add, Mul, Sub};

/// Scale of the position lattice: positions in cell units are multiples of
/// `1 / LATTICE_SCALE`.
pub const LATTICE_SCALE: f64 = 16_777_216.0; // 2^24

/// Snaps a coordinate in cell units onto the position lattice.
///
/// Sums and differences of snapped values are exact in `f64` while their
/// magnitude stays below 2^28 cells, so integer map shifts never perturb the
/// fractional part of a pose.
#[inline]
pub fn snap(v: f64) -> f64 {
    libm::round(v * LATTICE_SCALE) / LATTICE_SCALE
}

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(a: f64) -> f64 {
    let r = libm::remainder(a, TAU);
    if r <= -PI {
        r + TAU
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, o: Point2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Point2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        libm::hypot(self.x, self.y)
    }

    pub fn distance(self, o: Point2) -> f64 {
        (self - o).norm()
    }

    /// Unit vector at `angle` radians.
    pub fn from_angle(angle: f64) -> Self {
        Self::new(libm::cos(angle), libm::sin(angle))
    }

    pub fn rotated(self, angle: f64) -> Self {
        let (s, c) = (libm::sin(angle), libm::cos(angle));
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, k: f64) -> Point2 {
        Point2::new(self.x * k, self.y * k)
    }
}

/// Distance from `p` to the closed segment `a`-`b`.
pub fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.distance(a + ab * t)
}

/// Vehicle or sensor pose in meters and radians.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    /// Heading in `(-pi, pi]`, counterclockwise from +x.
    pub yaw: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        Self {
            x,
            y,
            yaw: normalize_angle(yaw),
        }
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }
}

/// Pose expressed in grid cell units of a particular map.
///
/// `x` grows with the column index and `y` grows toward the top of the map
/// (row 0 is the top row), so cell `(row, col)` covers
/// `x in [col, col + 1)` and `y in [H - 1 - row, H - row)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GridPose {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

impl GridPose {
    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        Self { x, y, yaw }
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    /// Integer lattice cell `(floor x, floor y)` and the offset inside it.
    pub fn split(&self) -> ((i64, i64), Point2) {
        let fx = libm::floor(self.x);
        let fy = libm::floor(self.y);
        ((fx as i64, fy as i64), Point2::new(self.x - fx, self.y - fy))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angle_wraps_into_half_open_interval() {
        assert_eq!(normalize_angle(PI), PI);
        assert_eq!(normalize_angle(-PI), PI);
        assert!((normalize_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((normalize_angle(-0.5) + 0.5).abs() < 1e-15);
        assert!((normalize_angle(7.0) - (7.0 - TAU)).abs() < 1e-12);
    }

    #[test]
    fn snapped_values_add_exactly() {
        let a = snap(3.4999999999999996);
        assert_eq!(a, 3.5);
        let b = snap(-2.2);
        let c = snap(1234.56789);
        // (a + b) + c == a + (b + c) holds bitwise on the lattice.
        assert_eq!((a + b) + c, a + (b + c));
        assert_eq!(((c + 17.0) - 17.0).to_bits(), c.to_bits());
    }

    #[test]
    fn segment_distance_clamps_to_endpoints() {
        let a = Point2::new(0.0, 0.0);
        let b = Point2::new(2.0, 0.0);
        assert_eq!(point_segment_distance(Point2::new(1.0, 3.0), a, b), 3.0);
        assert_eq!(point_segment_distance(Point2::new(5.0, 4.0), a, b), 5.0);
        assert_eq!(point_segment_distance(Point2::new(1.0, 1.0), a, a), 2f64.sqrt());
    }
}
