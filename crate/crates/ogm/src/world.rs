//! Synthetic polygon worlds for simulation.

use std::io::{Read, Write};

use ogm_core::geom::Point2;
use serde::{Deserialize, Serialize};

use crate::error::FormatError;

/// Obstacle polygons in world meters inside `[0, w] x [0, h]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub bounds: [f64; 2],
    pub obstacles: Vec<Vec<[f64; 2]>>,
}

fn pt(p: [f64; 2]) -> Point2 {
    Point2::new(p[0], p[1])
}

/// Proper or touching intersection of closed segments `ab` and `cd`.
fn segments_intersect(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
    let orient = |p: Point2, q: Point2, r: Point2| (q - p).cross(r - p);
    let on = |p: Point2, q: Point2, r: Point2| {
        r.x >= p.x.min(q.x) && r.x <= p.x.max(q.x) && r.y >= p.y.min(q.y) && r.y <= p.y.max(q.y)
    };
    let (d1, d2) = (orient(c, d, a), orient(c, d, b));
    let (d3, d4) = (orient(a, b, c), orient(a, b, d));
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on(c, d, a)) || (d2 == 0.0 && on(c, d, b)) || (d3 == 0.0 && on(a, b, c)) || (d4 == 0.0 && on(a, b, d))
}

fn poly_edges(poly: &[[f64; 2]]) -> impl Iterator<Item = (Point2, Point2)> + '_ {
    let n = poly.len();
    (0..n).map(move |i| (pt(poly[i]), pt(poly[(i + 1) % n])))
}

/// Even-odd point-in-polygon test.
pub fn polygon_contains(poly: &[[f64; 2]], p: Point2) -> bool {
    let mut inside = false;
    let n = poly.len();
    for i in 0..n {
        let (a, b) = (pt(poly[i]), pt(poly[(i + 1) % n]));
        if (a.y > p.y) != (b.y > p.y) {
            let x = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
            if p.x < x {
                inside = !inside;
            }
        }
    }
    inside
}

impl World {
    pub fn load<R: Read>(input: R) -> Result<Self, FormatError> {
        let world: World = serde_json::from_reader(input)?;
        world.validate()?;
        Ok(world)
    }

    pub fn save<W: Write>(&self, out: W) -> Result<(), FormatError> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    /// Every edge of every obstacle as a pair of points.
    pub fn edges(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        self.obstacles.iter().flat_map(|poly| poly_edges(poly))
    }

    /// Obstacles must have at least three finite vertices, be simple and
    /// must not touch or overlap each other.
    pub fn validate(&self) -> Result<(), FormatError> {
        if !(self.bounds[0] > 0.0 && self.bounds[1] > 0.0) {
            return Err(FormatError::invalid("world bounds must be positive"));
        }
        for (k, poly) in self.obstacles.iter().enumerate() {
            if poly.len() < 3 {
                return Err(FormatError::invalid(format!("obstacle {k} has fewer than 3 vertices")));
            }
            if poly.iter().flatten().any(|v| !v.is_finite()) {
                return Err(FormatError::invalid(format!("obstacle {k} has a non-finite vertex")));
            }
            let n = poly.len();
            for i in 0..n {
                for j in i + 1..n {
                    let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                    if adjacent {
                        continue;
                    }
                    let (a, b) = (pt(poly[i]), pt(poly[(i + 1) % n]));
                    let (c, d) = (pt(poly[j]), pt(poly[(j + 1) % n]));
                    if segments_intersect(a, b, c, d) {
                        return Err(FormatError::invalid(format!("obstacle {k} is not simple")));
                    }
                }
            }
        }
        for (i, p) in self.obstacles.iter().enumerate() {
            for (j, q) in self.obstacles.iter().enumerate().skip(i + 1) {
                let crossing = poly_edges(p).any(|(a, b)| poly_edges(q).any(|(c, d)| segments_intersect(a, b, c, d)));
                if crossing || polygon_contains(p, pt(q[0])) || polygon_contains(q, pt(p[0])) {
                    return Err(FormatError::invalid(format!("obstacles {i} and {j} overlap")));
                }
            }
        }
        Ok(())
    }

    pub fn in_bounds(&self, p: Point2) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x <= self.bounds[0] && p.y <= self.bounds[1]
    }

    /// Point lies inside some obstacle.
    pub fn in_obstacle(&self, p: Point2) -> bool {
        self.obstacles.iter().any(|poly| polygon_contains(poly, p))
    }

    /// Distance along the unit direction `dir` from `origin` to the nearest
    /// obstacle edge within `max_range`.
    pub fn cast_ray(&self, origin: Point2, dir: Point2, max_range: f64) -> Option<f64> {
        let mut best: Option<f64> = None;
        for (a, b) in self.edges() {
            let e = b - a;
            let denom = dir.cross(e);
            if denom == 0.0 {
                continue;
            }
            let ao = a - origin;
            let t = ao.cross(e) / denom;
            let s = ao.cross(dir) / denom;
            if t >= 0.0 && (0.0..=1.0).contains(&s) && t <= max_range && best.is_none_or(|d| t < d) {
                best = Some(t);
            }
        }
        best
    }

    /// Axis-aligned rectangular room of wall thickness `wall` with its
    /// inner corner at `(x0, y0)` and inner size `w x h`, built from four
    /// non-touching wall slabs.
    pub fn box_room(bounds: [f64; 2], x0: f64, y0: f64, w: f64, h: f64, wall: f64) -> Self {
        let rect = |x1: f64, y1: f64, x2: f64, y2: f64| vec![[x1, y1], [x2, y1], [x2, y2], [x1, y2]];
        let gap = 1e-3;
        World {
            bounds,
            obstacles: vec![
                // South and north walls span the full outer width.
                rect(x0 - wall, y0 - wall, x0 + w + wall, y0),
                rect(x0 - wall, y0 + h, x0 + w + wall, y0 + h + wall),
                // West and east walls fit between them.
                rect(x0 - wall, y0 + gap, x0, y0 + h - gap),
                rect(x0 + w, y0 + gap, x0 + w + wall, y0 + h - gap),
            ],
        }
    }
}
