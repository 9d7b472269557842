//! Douglas-Peucker simplification with a vertex budget.
//!
//! Splits are processed greatest-deviation-first from a priority queue, so
//! when the budget stops the refinement early the kept vertices are the most
//! significant ones. Without the budget the result is the usual
//! Douglas-Peucker output.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::geom::{point_segment_distance, Point2};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimplifyError {
    #[error("vertex budget {got} is below the minimum of {min}")]
    BudgetTooSmall { min: usize, got: usize },
    #[error("tolerance must be a non-negative number (got {0})")]
    InvalidEpsilon(f64),
}

/// Default tolerance in meters.
pub const DEFAULT_EPSILON: f64 = 0.5;
/// Default vertex budget.
pub const DEFAULT_MAX_VERTICES: usize = 40;

/// Simplified free-space boundary in local-map meters.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FreeSpacePolygon {
    pub vertices: Vec<Point2>,
    pub closed: bool,
}

impl FreeSpacePolygon {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }
}

#[derive(Debug, Clone, Copy)]
struct Split {
    dist: f64,
    at: usize,
    lo: usize,
    hi: usize,
}

impl PartialEq for Split {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Split {}

impl PartialOrd for Split {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Split {
    // Max-heap on distance; equal distances pop the lower index first.
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist.total_cmp(&other.dist).then_with(|| other.at.cmp(&self.at))
    }
}

/// Farthest vertex strictly between `lo` and `hi` from the chord.
fn farthest(points: &[Point2], lo: usize, hi: usize) -> Option<Split> {
    let (a, b) = (points[lo], points[hi]);
    let mut best: Option<Split> = None;
    for (k, &p) in points.iter().enumerate().take(hi).skip(lo + 1) {
        let dist = point_segment_distance(p, a, b);
        if best.is_none_or(|s| dist > s.dist) {
            best = Some(Split { dist, at: k, lo, hi });
        }
    }
    best
}

/// Refines the chords between consecutive `anchors` until every vertex is
/// within `epsilon` or `budget` vertices are kept. `kept` counts the anchors
/// already in the output.
fn refine(points: &[Point2], anchors: &[usize], epsilon: f64, budget: usize, mut kept: usize) -> Vec<usize> {
    let mut keep = vec![false; points.len()];
    let mut heap = BinaryHeap::new();
    for w in anchors.windows(2) {
        keep[w[0]] = true;
        keep[w[1]] = true;
        heap.extend(farthest(points, w[0], w[1]));
    }
    while kept < budget {
        let Some(split) = heap.pop() else { break };
        if split.dist <= epsilon {
            break;
        }
        keep[split.at] = true;
        kept += 1;
        heap.extend(farthest(points, split.lo, split.at));
        heap.extend(farthest(points, split.at, split.hi));
    }
    keep.iter().enumerate().filter(|(_, &k)| k).map(|(i, _)| i).collect()
}

fn check(epsilon: f64, budget: usize, min: usize) -> Result<(), SimplifyError> {
    if !(epsilon >= 0.0) {
        return Err(SimplifyError::InvalidEpsilon(epsilon));
    }
    if budget < min {
        return Err(SimplifyError::BudgetTooSmall { min, got: budget });
    }
    Ok(())
}

/// Open polyline: both endpoints are always kept. Returns the indices of
/// the kept vertices in input order.
pub fn douglas_peucker_capped(points: &[Point2], epsilon: f64, max_vertices: usize) -> Result<Vec<usize>, SimplifyError> {
    check(epsilon, max_vertices, 2)?;
    match points.len() {
        0 => Ok(Vec::new()),
        1 => Ok(vec![0]),
        n => Ok(refine(points, &[0, n - 1], epsilon, max_vertices, 2)),
    }
}

/// Closed polygon given without a repeated first vertex. Anchored at vertex
/// 0 and the vertex farthest from it; both arcs share the budget.
pub fn simplify_closed(points: &[Point2], epsilon: f64, max_vertices: usize) -> Result<Vec<usize>, SimplifyError> {
    check(epsilon, max_vertices, 3)?;
    let n = points.len();
    if n <= 3 {
        return Ok((0..n).collect());
    }
    let mut far = 0;
    let mut far_d = 0.0;
    for (k, p) in points.iter().enumerate().skip(1) {
        let d = p.distance(points[0]);
        if d > far_d {
            far = k;
            far_d = d;
        }
    }
    if far == 0 {
        return Ok(vec![0]);
    }
    // Close the ring by repeating vertex 0 at index n.
    let mut ring = Vec::with_capacity(n + 1);
    ring.extend_from_slice(points);
    ring.push(points[0]);
    let mut idx = refine(&ring, &[0, far, n], epsilon, max_vertices, 2);
    idx.pop();
    Ok(idx)
}

/// Simplifies a closed boundary and returns the kept vertices.
pub fn simplify_polygon(points: &[Point2], epsilon: f64, max_vertices: usize) -> Result<FreeSpacePolygon, SimplifyError> {
    let idx = simplify_closed(points, epsilon, max_vertices)?;
    Ok(FreeSpacePolygon {
        vertices: idx.iter().map(|&i| points[i]).collect(),
        closed: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pts(v: &[(f64, f64)]) -> Vec<Point2> {
        v.iter().map(|&(x, y)| Point2::new(x, y)).collect()
    }

    /// Classic recursive Douglas-Peucker that also records every split as
    /// (deviation, index).
    fn classic(points: &[Point2], lo: usize, hi: usize, eps: f64, splits: &mut Vec<(f64, usize)>) {
        if hi <= lo + 1 {
            return;
        }
        let (mut best, mut at) = (-1.0, lo);
        for k in lo + 1..hi {
            let d = point_segment_distance(points[k], points[lo], points[hi]);
            if d > best {
                best = d;
                at = k;
            }
        }
        if best > eps {
            splits.push((best, at));
            classic(points, lo, at, eps, splits);
            classic(points, at, hi, eps, splits);
        }
    }

    fn within(points: &[Point2], idx: &[usize], closed: bool, eps: f64) -> bool {
        let mut chain: Vec<usize> = idx.to_vec();
        if closed {
            chain.push(idx[0] + points.len());
        }
        let at = |i: usize| points[i % points.len()];
        chain.windows(2).all(|w| (w[0]..=w[1]).all(|k| point_segment_distance(at(k), at(w[0]), at(w[1])) <= eps + 1e-9))
    }

    fn random_closed(seed: u64, n: usize) -> Vec<Point2> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        (0..n)
            .map(|k| {
                let a = k as f64 / n as f64 * core::f64::consts::TAU;
                let r = rng.random_range(5.0..30.0);
                Point2::new(r * a.cos(), r * a.sin())
            })
            .collect()
    }

    #[test]
    fn collinear_reduces_to_endpoints() {
        let p = pts(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0), (5.0, 5.0)]);
        assert_eq!(douglas_peucker_capped(&p, 0.1, 10).unwrap(), vec![0, 3]);
    }

    #[test]
    fn budget_below_minimum_is_rejected() {
        let p = pts(&[(0.0, 0.0), (1.0, 0.0)]);
        assert!(douglas_peucker_capped(&p, 0.1, 1).is_err());
        assert!(simplify_closed(&p, 0.1, 2).is_err());
        assert!(douglas_peucker_capped(&p, -1.0, 5).is_err());
    }

    #[test]
    fn zigzag_matches_truncated_uncapped_run() {
        // Built top-down: each vertex sits off the chord of its parent split
        // by less than the parent's own offset, so children never outrank
        // their parents.
        let p = pts(&[
            (0.0, 0.0),
            (1.0, 1.5),
            (2.0, 1.0),
            (3.0, 5.5),
            (4.0, 8.0),
            (5.0, 5.65),
            (6.0, 1.5),
            (7.0, 1.55),
            (8.0, 0.0),
        ]);
        let mut splits = Vec::new();
        classic(&p, 0, p.len() - 1, 0.0, &mut splits);
        splits.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        for n in 2..=9 {
            let mut expected: Vec<usize> = vec![0, 8];
            expected.extend(splits.iter().take(n - 2).map(|s| s.1));
            expected.sort();
            assert_eq!(douglas_peucker_capped(&p, 0.0, n).unwrap(), expected, "N = {n}");
        }
    }

    #[test]
    fn uncapped_equals_classic() {
        for seed in 0..20 {
            let p = random_closed(seed, 60);
            for eps in [0.5, 2.0, 6.0] {
                let mut splits = Vec::new();
                classic(&p, 0, p.len() - 1, eps, &mut splits);
                let mut expected: Vec<usize> = splits.iter().map(|s| s.1).collect();
                expected.extend([0, p.len() - 1]);
                expected.sort();
                assert_eq!(douglas_peucker_capped(&p, eps, usize::MAX).unwrap(), expected);
            }
        }
    }

    #[test]
    fn closed_square_keeps_corners() {
        let mut p = Vec::new();
        for k in 0..10 {
            p.push(Point2::new(k as f64, 0.0));
        }
        for k in 0..10 {
            p.push(Point2::new(10.0, k as f64));
        }
        for k in 0..10 {
            p.push(Point2::new(10.0 - k as f64, 10.0));
        }
        for k in 0..10 {
            p.push(Point2::new(0.0, 10.0 - k as f64));
        }
        let idx = simplify_closed(&p, 0.1, 40).unwrap();
        assert_eq!(idx, vec![0, 10, 20, 30]);
        let poly = simplify_polygon(&p, 0.1, 3).unwrap();
        assert_eq!(poly.len(), 3);
        assert!(poly.closed);
    }

    #[test]
    fn tiny_inputs() {
        assert!(douglas_peucker_capped(&[], 0.1, 2).unwrap().is_empty());
        let tri = pts(&[(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]);
        assert_eq!(simplify_closed(&tri, 5.0, 3).unwrap(), vec![0, 1, 2]);
    }

    proptest! {
        #[test]
        fn budget_and_subsequence(seed in any::<u64>(), n in 4usize..120, eps in 0.0f64..5.0, cap in 3usize..50) {
            let p = random_closed(seed, n);
            let idx = simplify_closed(&p, eps, cap).unwrap();
            prop_assert!(idx.len() <= cap);
            prop_assert!(idx.len() >= 3);
            prop_assert!(idx.windows(2).all(|w| w[0] < w[1]));
            if idx.len() < cap {
                prop_assert!(within(&p, &idx, true, eps));
            }
        }

        #[test]
        fn zero_epsilon_keeps_general_position_input(seed in any::<u64>(), n in 4usize..60) {
            let p = random_closed(seed, n);
            let idx = simplify_closed(&p, 0.0, n).unwrap();
            prop_assert_eq!(idx, (0..n).collect::<Vec<_>>());
        }

        #[test]
        fn cap_binding_ignores_smaller_epsilon(seed in any::<u64>(), n in 10usize..120, cap in 3usize..10) {
            let p = random_closed(seed, n);
            let a = simplify_closed(&p, 0.05, cap).unwrap();
            prop_assume!(a.len() == cap);
            prop_assert_eq!(simplify_closed(&p, 0.025, cap).unwrap(), a);
        }

        #[test]
        fn epsilon_binding_ignores_larger_budget(seed in any::<u64>(), n in 10usize..120, eps in 1.0f64..8.0) {
            let p = random_closed(seed, n);
            let a = simplify_closed(&p, eps, 200).unwrap();
            prop_assert_eq!(simplify_closed(&p, eps, 400).unwrap(), a);
        }
    }
}
