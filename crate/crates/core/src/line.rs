//! Bresenham line walking on integer cell coordinates.
//!
//! Along the major axis the walk advances one cell per step; the minor
//! coordinate after `k` steps is `round(k * d_minor / d_major)` with exact
//! halves rounded away from the start cell. Because the tie rule depends on
//! the start, a line and its reverse can differ by one cell at ties;
//! [`canonical`] fixes the direction when only the cell set matters.

/// Iterator over the cells of a Bresenham line, both endpoints included.
#[derive(Debug, Clone)]
pub struct Bresenham {
    start: (i64, i64),
    step_major: (i64, i64),
    step_minor: (i64, i64),
    major_len: i64,
    twice_minor: i64,
    twice_major: i64,
    k: i64,
    minor: i64,
    rem: i64,
}

impl Bresenham {
    pub fn new(from: (i64, i64), to: (i64, i64)) -> Self {
        let dx = to.0 - from.0;
        let dy = to.1 - from.1;
        let (ax, ay) = (dx.abs(), dy.abs());
        let (sx, sy) = (dx.signum(), dy.signum());
        let (step_major, step_minor, n, m) = if ax >= ay {
            ((sx, 0), (0, sy), ax, ay)
        } else {
            ((0, sy), (sx, 0), ay, ax)
        };
        Self {
            start: from,
            step_major,
            step_minor,
            major_len: n,
            twice_minor: 2 * m,
            twice_major: 2 * n,
            k: 0,
            minor: 0,
            rem: n,
        }
    }

    /// Number of cells remaining, including the current one.
    pub fn remaining(&self) -> usize {
        (self.major_len - self.k + 1).max(0) as usize
    }
}

impl Iterator for Bresenham {
    type Item = (i64, i64);

    fn next(&mut self) -> Option<(i64, i64)> {
        if self.k > self.major_len {
            return None;
        }
        let cell = (
            self.start.0 + self.step_major.0 * self.k + self.step_minor.0 * self.minor,
            self.start.1 + self.step_major.1 * self.k + self.step_minor.1 * self.minor,
        );
        self.k += 1;
        self.rem += self.twice_minor;
        if self.rem >= self.twice_major {
            self.rem -= self.twice_major;
            self.minor += 1;
        }
        Some(cell)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.remaining();
        (n, Some(n))
    }
}

impl ExactSizeIterator for Bresenham {}

/// Line between `a` and `b` walked from the lexicographically smaller end,
/// so `canonical(a, b)` and `canonical(b, a)` visit the same cells.
pub fn canonical(a: (i64, i64), b: (i64, i64)) -> Bresenham {
    if a <= b {
        Bresenham::new(a, b)
    } else {
        Bresenham::new(b, a)
    }
}
