//! Binarization, opening and in-sight edge detection on the normalized map.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::geom::GridPose;
use crate::grid::ProbabilityMap;
use crate::line::Bresenham;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FreespaceError {
    #[error("hysteresis thresholds need 0 <= low <= high <= 1 (low {low}, high {high})")]
    InvalidThresholds { low: f64, high: f64 },
    #[error("cell ({row}, {col}) is outside the {height}x{width} map")]
    OutOfBounds { row: i64, col: i64, height: usize, width: usize },
    #[error("vehicle cell ({row}, {col}) is occupied")]
    VehicleOccupied { row: usize, col: usize },
    #[error("map must be at least 2x2")]
    Degenerate,
}

/// Free/occupied image; `true` is free (foreground).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMap {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl BinaryMap {
    pub fn new(width: usize, height: usize, free: bool) -> Self {
        Self {
            width,
            height,
            data: vec![free; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    #[inline]
    pub fn is_free(&self, row: usize, col: usize) -> bool {
        self.data[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, free: bool) {
        self.data[row * self.width + col] = free;
    }

    pub fn count_free(&self) -> usize {
        self.data.iter().filter(|&&f| f).count()
    }

    /// Every free cell of `self` is free in `other`.
    pub fn is_subset_of(&self, other: &BinaryMap) -> bool {
        self.data.iter().zip(&other.data).all(|(&a, &b)| !a || b)
    }

    fn contains(&self, row: i64, col: i64) -> bool {
        row >= 0 && col >= 0 && (row as usize) < self.height && (col as usize) < self.width
    }

    fn check_cell(&self, cell: (i64, i64)) -> Result<(usize, usize), FreespaceError> {
        if self.contains(cell.0, cell.1) {
            Ok((cell.0 as usize, cell.1 as usize))
        } else {
            Err(FreespaceError::OutOfBounds {
                row: cell.0,
                col: cell.1,
                height: self.height,
                width: self.width,
            })
        }
    }
}

/// Neighborhood used by the hysteresis flood fill.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Connectivity {
    Four,
    #[default]
    Eight,
}

impl Connectivity {
    fn offsets(self) -> &'static [(i64, i64)] {
        const FOUR: [(i64, i64); 4] = [(-1, 0), (0, -1), (0, 1), (1, 0)];
        const EIGHT: [(i64, i64); 8] = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];
        match self {
            Connectivity::Four => &FOUR,
            Connectivity::Eight => &EIGHT,
        }
    }
}

pub const DEFAULT_LOW: f64 = 0.40;
pub const DEFAULT_HIGH: f64 = 0.50;
pub const DEFAULT_OPENING_RADIUS: usize = 5;

/// Slack added to both thresholds. A single `p_free` update stored as f32
/// log-odds reads back as 0.40000004, which must still count as a seed.
pub const THRESHOLD_SLACK: f64 = 1e-6;

/// Hysteresis thresholding on occupancy probability: cells with
/// `P <= low` are free seeds, and cells with `P <= high` become free when
/// connected to a seed through such cells. Both comparisons allow
/// [`THRESHOLD_SLACK`].
pub fn binarize_hysteresis(
    map: &ProbabilityMap,
    low: f64,
    high: f64,
    connectivity: Connectivity,
) -> Result<BinaryMap, FreespaceError> {
    if !(0.0 <= low && low <= high && high <= 1.0) {
        return Err(FreespaceError::InvalidThresholds { low, high });
    }
    let (low, high) = (low + THRESHOLD_SLACK, high + THRESHOLD_SLACK);
    let (w, h) = (map.width, map.height);
    let mut out = BinaryMap::new(w, h, false);
    let mut queue = VecDeque::new();
    for (i, &p) in map.data.iter().enumerate() {
        if f64::from(p) <= low {
            out.data[i] = true;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        let (r, c) = ((i / w) as i64, (i % w) as i64);
        for &(dr, dc) in connectivity.offsets() {
            let (nr, nc) = (r + dr, c + dc);
            if !out.contains(nr, nc) {
                continue;
            }
            let j = nr as usize * w + nc as usize;
            if !out.data[j] && f64::from(map.data[j]) <= high {
                out.data[j] = true;
                queue.push_back(j);
            }
        }
    }
    Ok(out)
}

const FAR: f64 = f64::INFINITY;

/// 1D squared distance transform of `f` (lower envelope of parabolas),
/// skipping infinite samples.
fn edt_1d(f: &[f64], d: &mut [f64], v: &mut Vec<usize>, z: &mut Vec<f64>) {
    v.clear();
    z.clear();
    for (q, &fq) in f.iter().enumerate() {
        if fq == FAR {
            continue;
        }
        let qf = q as f64;
        loop {
            match v.last() {
                None => {
                    v.push(q);
                    z.push(f64::NEG_INFINITY);
                    break;
                }
                Some(&p) => {
                    let pf = p as f64;
                    let s = ((fq + qf * qf) - (f[p] + pf * pf)) / (2.0 * qf - 2.0 * pf);
                    if s <= *z.last().unwrap() {
                        v.pop();
                        z.pop();
                    } else {
                        v.push(q);
                        z.push(s);
                        break;
                    }
                }
            }
        }
    }
    if v.is_empty() {
        d.fill(FAR);
        return;
    }
    let mut k = 0;
    for (q, out) in d.iter_mut().enumerate() {
        let qf = q as f64;
        while k + 1 < v.len() && z[k + 1] < qf {
            k += 1;
        }
        let p = v[k] as f64;
        *out = (qf - p) * (qf - p) + f[v[k]];
    }
}

/// Squared Euclidean distance from every cell to the nearest cell where
/// `feature` is true (infinite when there is none).
pub fn squared_distance_transform(width: usize, height: usize, feature: impl Fn(usize) -> bool) -> Vec<f64> {
    let mut grid: Vec<f64> = (0..width * height).map(|i| if feature(i) { 0.0 } else { FAR }).collect();
    let n = width.max(height);
    let (mut f, mut d) = (vec![0.0; n], vec![0.0; n]);
    let (mut v, mut z) = (Vec::with_capacity(n), Vec::with_capacity(n + 1));
    for c in 0..width {
        for r in 0..height {
            f[r] = grid[r * width + c];
        }
        edt_1d(&f[..height], &mut d[..height], &mut v, &mut z);
        for r in 0..height {
            grid[r * width + c] = d[r];
        }
    }
    for r in 0..height {
        let row = &mut grid[r * width..(r + 1) * width];
        f[..width].copy_from_slice(row);
        edt_1d(&f[..width], &mut d[..width], &mut v, &mut z);
        row.copy_from_slice(&d[..width]);
    }
    grid
}

/// Erosion of the free set by a disc of `radius` cells. Cells outside the
/// map do not constrain the result.
pub fn erode(bin: &BinaryMap, radius: usize) -> BinaryMap {
    let r2 = (radius * radius) as f64;
    let dist = squared_distance_transform(bin.width, bin.height, |i| !bin.data[i]);
    BinaryMap {
        width: bin.width,
        height: bin.height,
        data: dist.iter().map(|&d| d > r2).collect(),
    }
}

/// Dilation of the free set by a disc of `radius` cells, clipped to the map.
pub fn dilate(bin: &BinaryMap, radius: usize) -> BinaryMap {
    let r2 = (radius * radius) as f64;
    let dist = squared_distance_transform(bin.width, bin.height, |i| bin.data[i]);
    BinaryMap {
        width: bin.width,
        height: bin.height,
        data: dist.iter().map(|&d| d <= r2).collect(),
    }
}

/// Morphological opening of the free set with a disc of `radius` cells.
pub fn opening(bin: &BinaryMap, radius: usize) -> BinaryMap {
    if radius == 0 {
        return bin.clone();
    }
    dilate(&erode(bin, radius), radius)
}

/// Walks the Bresenham line `from -> to` (cells as `(row, col)`) and returns
/// the first occupied cell, or `to` when the line is clear.
pub fn bresenham_first_occupied(
    bin: &BinaryMap,
    from: (usize, usize),
    to: (usize, usize),
) -> Result<(usize, usize), FreespaceError> {
    let from_i = (from.0 as i64, from.1 as i64);
    let (r, c) = bin.check_cell(from_i)?;
    bin.check_cell((to.0 as i64, to.1 as i64))?;
    if !bin.is_free(r, c) {
        return Err(FreespaceError::VehicleOccupied { row: r, col: c });
    }
    Ok(first_occupied_unchecked(bin, from, to))
}

fn first_occupied_unchecked(bin: &BinaryMap, from: (usize, usize), to: (usize, usize)) -> (usize, usize) {
    for (r, c) in Bresenham::new((from.0 as i64, from.1 as i64), (to.0 as i64, to.1 as i64)) {
        let (r, c) = (r as usize, c as usize);
        if !bin.is_free(r, c) {
            return (r, c);
        }
    }
    to
}

/// Vehicle cell `(row, col)` for a pose in cell units of a `height`-row map.
pub fn vehicle_cell(pose: &GridPose, width: usize, height: usize) -> Result<(usize, usize), FreespaceError> {
    let ((x, y), _) = pose.split();
    let row = height as i64 - 1 - y;
    if x < 0 || y < 0 || x >= width as i64 || row < 0 {
        return Err(FreespaceError::OutOfBounds {
            row,
            col: x,
            height,
            width,
        });
    }
    Ok((row as usize, x as usize))
}

/// One in-sight edge cell with its sort key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeCell {
    pub key: u32,
    pub row: usize,
    pub col: usize,
}

/// Per-cell sort keys written by the in-sight edge scan (0 = unset).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeIndexGrid {
    width: usize,
    height: usize,
    keys: Vec<u32>,
    written: Vec<usize>,
}

impl EdgeIndexGrid {
    /// Casts a ray from `vehicle` to every border cell and records the first
    /// occupied cell (or the border cell itself) under the target's key.
    ///
    /// With 1-based row `i` and column `j`, the left column gets key `i`,
    /// the bottom row `H + j`, the right column `2H + W - i + 1` and the top
    /// row `2H + 2W - j + 1`, so ascending keys run counter-clockwise from
    /// the top-left corner. Left/right columns are cast first, then top/bottom
    /// rows; a cell hit again keeps the later key.
    pub fn build(bin: &BinaryMap, vehicle: (usize, usize)) -> Result<Self, FreespaceError> {
        let (h, w) = (bin.height, bin.width);
        if h < 2 || w < 2 {
            return Err(FreespaceError::Degenerate);
        }
        bin.check_cell((vehicle.0 as i64, vehicle.1 as i64))?;
        if !bin.is_free(vehicle.0, vehicle.1) {
            return Err(FreespaceError::VehicleOccupied {
                row: vehicle.0,
                col: vehicle.1,
            });
        }
        let mut grid = Self {
            width: w,
            height: h,
            keys: vec![0; w * h],
            written: Vec::with_capacity(2 * (w + h)),
        };
        let (hh, ww) = (h as u32, w as u32);
        for i in 1..=h {
            grid.cast(bin, vehicle, (i - 1, 0), i as u32);
            grid.cast(bin, vehicle, (i - 1, w - 1), 2 * hh + ww - i as u32 + 1);
        }
        for j in 1..=w {
            grid.cast(bin, vehicle, (0, j - 1), 2 * hh + 2 * ww - j as u32 + 1);
            grid.cast(bin, vehicle, (h - 1, j - 1), hh + j as u32);
        }
        Ok(grid)
    }

    fn cast(&mut self, bin: &BinaryMap, from: (usize, usize), to: (usize, usize), key: u32) {
        let (r, c) = first_occupied_unchecked(bin, from, to);
        let idx = r * self.width + c;
        self.keys[idx] = key;
        self.written.push(idx);
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn key(&self, row: usize, col: usize) -> u32 {
        self.keys[row * self.width + col]
    }

    pub fn keys(&self) -> &[u32] {
        &self.keys
    }

    /// Cells with a non-zero key, ascending by key.
    pub fn edges(&self) -> Vec<EdgeCell> {
        let mut out: Vec<EdgeCell> = Vec::with_capacity(self.written.len());
        for &idx in &self.written {
            let key = self.keys[idx];
            out.push(EdgeCell {
                key,
                row: idx / self.width,
                col: idx % self.width,
            });
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Sorted in-sight edge cells seen from the vehicle pose (cell units).
pub fn insight_edges(bin: &BinaryMap, pose: &GridPose) -> Result<Vec<EdgeCell>, FreespaceError> {
    let vehicle = vehicle_cell(pose, bin.width, bin.height)?;
    Ok(EdgeIndexGrid::build(bin, vehicle)?.edges())
}

/// Free cells seen from `vehicle`: the union of every border ray up to, but
/// excluding, its first occupied cell.
pub fn insight_region(bin: &BinaryMap, vehicle: (usize, usize)) -> Result<BinaryMap, FreespaceError> {
    bresenham_first_occupied(bin, vehicle, vehicle)?;
    let (h, w) = (bin.height, bin.width);
    let mut out = BinaryMap::new(w, h, false);
    let targets = (0..h)
        .flat_map(|r| [(r, 0), (r, w - 1)])
        .chain((0..w).flat_map(|c| [(0, c), (h - 1, c)]));
    for to in targets {
        for (r, c) in Bresenham::new((vehicle.0 as i64, vehicle.1 as i64), (to.0 as i64, to.1 as i64)) {
            let (r, c) = (r as usize, c as usize);
            if !bin.is_free(r, c) {
                break;
            }
            out.set(r, c, true);
        }
    }
    Ok(out)
}

/// Winding-number containment of `p` in the closed polygon through `verts`
/// (both as `(row, col)` cells); points on the boundary count as inside.
pub fn cell_polygon_contains(verts: &[(usize, usize)], p: (usize, usize)) -> bool {
    let pt = (p.1 as i64, p.0 as i64);
    let n = verts.len();
    if n == 0 {
        return false;
    }
    let mut winding = 0i64;
    for k in 0..n {
        let a = (verts[k].1 as i64, verts[k].0 as i64);
        let b = (verts[(k + 1) % n].1 as i64, verts[(k + 1) % n].0 as i64);
        let cross = (b.0 - a.0) * (pt.1 - a.1) - (b.1 - a.1) * (pt.0 - a.0);
        let on_segment = cross == 0
            && pt.0 >= a.0.min(b.0)
            && pt.0 <= a.0.max(b.0)
            && pt.1 >= a.1.min(b.1)
            && pt.1 <= a.1.max(b.1);
        if on_segment {
            return true;
        }
        if a.1 <= pt.1 {
            if b.1 > pt.1 && cross > 0 {
                winding += 1;
            }
        } else if b.1 <= pt.1 && cross < 0 {
            winding -= 1;
        }
    }
    winding != 0
}
