//! Border following and Freeman chain codes.
//!
//! Borders are found with Suzuki–Abe border following over the 8-connected
//! foreground. Outer borders come out counter-clockwise on screen and hole
//! borders clockwise, both with the ink on the left of the direction of travel.

use super::components::NEIGHBORS_8;
use super::image::BinaryImage;

/// Pixel coordinate, x to the right and y down.
pub type Point = (i32, i32);

/// Chain code for a unit step: 1 = east, counter-clockwise in 45° steps to 8 = south-east.
pub fn chain_code(from: Point, to: Point) -> Option<u8> {
    let d = (to.0 - from.0, to.1 - from.1);
    NEIGHBORS_8
        .iter()
        .position(|&(dx, dy)| (dx as i32, dy as i32) == d)
        .map(|i| i as u8 + 1)
}

/// Unit step for a chain code.
pub fn code_step(code: u8) -> Point {
    let (dx, dy) = NEIGHBORS_8[(code - 1) as usize];
    (dx as i32, dy as i32)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contour {
    pub points: Vec<Point>,
    /// `chain[i]` encodes the step from `points[i]` to the next point.
    pub chain: Vec<u8>,
    pub closed: bool,
    pub hole: bool,
}

impl Contour {
    /// Closed contour from a cyclic point list; a single point carries an empty chain.
    pub fn closed(points: Vec<Point>, hole: bool) -> Self {
        let n = points.len();
        let chain = if n < 2 {
            Vec::new()
        } else {
            (0..n)
                .map(|i| chain_code(points[i], points[(i + 1) % n]).expect("8-adjacent points"))
                .collect()
        };
        Contour {
            points,
            chain,
            closed: true,
            hole,
        }
    }

    pub fn open(points: Vec<Point>) -> Self {
        let chain = points
            .windows(2)
            .map(|w| chain_code(w[0], w[1]).expect("8-adjacent points"))
            .collect();
        Contour {
            points,
            chain,
            closed: false,
            hole: false,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Point at `i` steps from `start` along the contour. Closed contours wrap.
    #[inline]
    pub fn at(&self, i: isize) -> Point {
        let n = self.points.len() as isize;
        self.points[i.rem_euclid(n) as usize]
    }

    /// Twice the signed area, positive for counter-clockwise on screen.
    pub fn signed_area2(&self) -> i64 {
        let n = self.points.len();
        (0..n)
            .map(|i| {
                let (x0, y0) = self.points[i];
                let (x1, y1) = self.points[(i + 1) % n];
                // y flipped so that screen-up is positive
                x0 as i64 * (-y1 as i64) - x1 as i64 * (-y0 as i64)
            })
            .sum()
    }

    /// Rebuilds the point list by replaying the chain from the first point.
    pub fn replay(&self) -> Vec<Point> {
        let mut out = Vec::with_capacity(self.points.len());
        let Some(&first) = self.points.first() else {
            return out;
        };
        out.push(first);
        let mut p = first;
        let steps = if self.closed {
            self.chain.len().saturating_sub(1)
        } else {
            self.chain.len()
        };
        for &c in &self.chain[..steps] {
            let (dx, dy) = code_step(c);
            p = (p.0 + dx, p.1 + dy);
            out.push(p);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceOptions {
    pub include_holes: bool,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions {
            include_holes: true,
        }
    }
}

pub fn trace_contours(img: &BinaryImage) -> Vec<Contour> {
    trace_contours_with(img, TraceOptions::default())
}

pub fn trace_contours_with(img: &BinaryImage, opts: TraceOptions) -> Vec<Contour> {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let mut f: Vec<i32> = img.mask().iter().map(|&b| b as i32).collect();
    let at = |f: &[i32], x: i64, y: i64| -> i32 {
        if x < 0 || y < 0 || x >= w || y >= h {
            0
        } else {
            f[(y * w + x) as usize]
        }
    };
    let mut nbd = 1i32;
    let mut out = Vec::new();

    for y in 0..h {
        for x in 0..w {
            let v = at(&f, x, y);
            if v == 0 {
                continue;
            }
            let start_dir = if v == 1 && at(&f, x - 1, y) == 0 {
                Some((4usize, false))
            } else if v >= 1 && at(&f, x + 1, y) == 0 {
                Some((0usize, true))
            } else {
                None
            };
            let Some((dir2, hole)) = start_dir else {
                continue;
            };
            nbd += 1;
            let points = follow_border(&mut f, w, h, (x, y), dir2, nbd);
            if hole && !opts.include_holes {
                continue;
            }
            out.push(Contour::closed(points, hole));
        }
    }
    out
}

fn follow_border(f: &mut [i32], w: i64, h: i64, start: (i64, i64), dir2: usize, nbd: i32) -> Vec<Point> {
    let idx = |x: i64, y: i64| (y * w + x) as usize;
    let nonzero = |f: &[i32], x: i64, y: i64| x >= 0 && y >= 0 && x < w && y < h && f[idx(x, y)] != 0;
    let step = |p: (i64, i64), d: usize| (p.0 + NEIGHBORS_8[d].0, p.1 + NEIGHBORS_8[d].1);

    // clockwise search (decreasing direction index) starting at dir2
    let first = (0..8)
        .map(|k| (dir2 + 8 - k) % 8)
        .find(|&d| {
            let q = step(start, d);
            nonzero(f, q.0, q.1)
        });
    let Some(d1) = first else {
        f[idx(start.0, start.1)] = -nbd;
        return vec![(start.0 as i32, start.1 as i32)];
    };
    let p1 = step(start, d1);
    let mut prev = p1;
    let mut cur = start;
    let mut points = Vec::new();
    loop {
        points.push((cur.0 as i32, cur.1 as i32));
        let back = dir_to(cur, prev);
        let mut east_examined_zero = false;
        let mut next = None;
        for k in 1..=8 {
            let d = (back + k) % 8;
            let q = step(cur, d);
            if nonzero(f, q.0, q.1) {
                next = Some(q);
                break;
            }
            if d == 0 {
                east_examined_zero = true;
            }
        }
        let next = next.expect("prev is nonzero");
        let i = idx(cur.0, cur.1);
        if east_examined_zero {
            f[i] = -nbd;
        } else if f[i] == 1 {
            f[i] = nbd;
        }
        if next == start && cur == p1 {
            break;
        }
        prev = cur;
        cur = next;
    }
    points
}

fn dir_to(from: (i64, i64), to: (i64, i64)) -> usize {
    let d = (to.0 - from.0, to.1 - from.1);
    NEIGHBORS_8.iter().position(|&n| n == d).expect("adjacent")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_pixel() {
        let img = BinaryImage::from_ascii(&["...", ".#.", "..."]);
        let cs = trace_contours(&img);
        assert_eq!(cs.len(), 1);
        assert_eq!(cs[0].points, vec![(1, 1)]);
        assert!(cs[0].closed && cs[0].chain.is_empty());
    }

    #[test]
    fn filled_square_has_eight_boundary_points() {
        let img = BinaryImage::from_ascii(&[".....", ".###.", ".###.", ".###.", "....."]);
        let cs = trace_contours(&img);
        assert_eq!(cs.len(), 1);
        let c = &cs[0];
        assert_eq!(c.len(), 8);
        let mut pts = c.points.clone();
        pts.sort();
        let mut expect: Vec<Point> = (1..4)
            .flat_map(|y| (1..4).map(move |x| (x, y)))
            .filter(|&p| p != (2, 2))
            .collect();
        expect.sort();
        assert_eq!(pts, expect);
        assert!(c.signed_area2() > 0, "outer border counter-clockwise");
        assert_eq!(c.chain.len(), c.points.len());
    }

    #[test]
    fn east_step_is_code_one() {
        assert_eq!(chain_code((0, 0), (1, 0)), Some(1));
        assert_eq!(chain_code((0, 0), (1, -1)), Some(2));
        assert_eq!(chain_code((0, 0), (0, -1)), Some(3));
        assert_eq!(chain_code((0, 0), (1, 1)), Some(8));
        assert_eq!(chain_code((0, 0), (2, 0)), None);
    }

    #[test]
    fn ring_has_clockwise_hole() {
        let img = BinaryImage::from_ascii(&[
            "......", ".####.", ".#..#.", ".#..#.", ".####.", "......",
        ]);
        let cs = trace_contours(&img);
        assert_eq!(cs.len(), 2);
        assert!(!cs[0].hole && cs[0].signed_area2() > 0);
        assert!(cs[1].hole && cs[1].signed_area2() < 0);
        let outer_only = trace_contours_with(&img, TraceOptions { include_holes: false });
        assert_eq!(outer_only.len(), 1);
    }

    #[test]
    fn replay_reproduces_points() {
        let img = BinaryImage::from_ascii(&[
            "..#.....", ".###..#.", "#.#.###.", "..#..#..", ".....##.", "#.......",
        ]);
        for c in trace_contours(&img) {
            assert_eq!(c.replay(), c.points);
            for w in c.points.windows(2) {
                assert!(chain_code(w[0], w[1]).is_some());
            }
        }
    }

    #[test]
    fn line_contour_goes_out_and_back() {
        let img = BinaryImage::from_ascii(&[".....", ".###.", "....."]);
        let cs = trace_contours(&img);
        assert_eq!(cs[0].points.len(), 4);
        assert_eq!(cs[0].chain, vec![1, 1, 5, 5]);
    }
}
