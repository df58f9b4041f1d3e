//! Two-subiteration thinning and junction detection on the resulting skeleton.
//!
//! Candidates are marked per subiteration with the usual Zhang–Suen tests and
//! then removed one at a time, re-checking the local crossing number against
//! the current image. A pixel is only removed while it has a single run of ink
//! neighbours, so no component ever disappears or splits.

use super::components::NEIGHBORS_8;
use super::image::BinaryImage;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkeletonOptions {
    /// Two-branch points with a corner angle below this (degrees) count as L junctions.
    pub corner_angle_deg: f64,
    /// Pixels walked along each branch to estimate its direction.
    pub branch_probe: usize,
}

impl Default for SkeletonOptions {
    fn default() -> Self {
        SkeletonOptions {
            corner_angle_deg: 120.0,
            branch_probe: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Junction {
    pub x: usize,
    pub y: usize,
    pub branches: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Skeleton {
    pub image: BinaryImage,
    pub junctions: Vec<Junction>,
}

pub fn skeletonize(img: &BinaryImage) -> Skeleton {
    skeletonize_with(img, SkeletonOptions::default())
}

pub fn skeletonize_with(img: &BinaryImage, opts: SkeletonOptions) -> Skeleton {
    let image = thin(img);
    let junctions = find_junctions(&image, &opts);
    Skeleton { image, junctions }
}

/// Neighbours P2..P9 clockwise from north, as in the classic formulation.
#[inline]
fn ring(img: &BinaryImage, x: usize, y: usize) -> [bool; 8] {
    let (x, y) = (x as i64, y as i64);
    [
        img.get_signed(x, y - 1),
        img.get_signed(x + 1, y - 1),
        img.get_signed(x + 1, y),
        img.get_signed(x + 1, y + 1),
        img.get_signed(x, y + 1),
        img.get_signed(x - 1, y + 1),
        img.get_signed(x - 1, y),
        img.get_signed(x - 1, y - 1),
    ]
}

/// Number of 0 -> 1 transitions around the ring.
#[inline]
pub fn crossing_number(img: &BinaryImage, x: usize, y: usize) -> usize {
    let p = ring(img, x, y);
    (0..8).filter(|&i| !p[i] && p[(i + 1) % 8]).count()
}

#[inline]
fn removable(p: &[bool; 8]) -> bool {
    let b = p.iter().filter(|&&v| v).count();
    let a = (0..8).filter(|&i| !p[i] && p[(i + 1) % 8]).count();
    (2..=6).contains(&b) && a == 1
}

pub fn thin(img: &BinaryImage) -> BinaryImage {
    let mut cur = img.clone();
    let (w, h) = (img.width(), img.height());
    let mut marked = Vec::new();
    loop {
        let mut changed = false;
        for pass in 0..2 {
            marked.clear();
            for y in 0..h {
                for x in 0..w {
                    if !cur.get(x, y) {
                        continue;
                    }
                    let p = ring(&cur, x, y);
                    if !removable(&p) {
                        continue;
                    }
                    let (n, e, s, wst) = (p[0], p[2], p[4], p[6]);
                    let ok = if pass == 0 {
                        !(n && e && s) && !(e && s && wst)
                    } else {
                        !(n && e && wst) && !(n && s && wst)
                    };
                    if ok {
                        marked.push((x, y));
                    }
                }
            }
            for &(x, y) in &marked {
                if removable(&ring(&cur, x, y)) {
                    cur.set(x, y, false);
                    changed = true;
                }
            }
        }
        if !changed {
            remove_staircases(&mut cur);
            return cur;
        }
    }
}

/// Ring neighbours P2..P9 that are 8-adjacent to each other: consecutive
/// entries, plus the edge neighbours on either side of a diagonal.
#[inline]
fn ring_components(p: &[bool; 8]) -> usize {
    let mut label = [usize::MAX; 8];
    let mut n = 0;
    for s in 0..8 {
        if !p[s] || label[s] != usize::MAX {
            continue;
        }
        label[s] = n;
        let mut stack = vec![s];
        while let Some(i) = stack.pop() {
            let mut adj = vec![(i + 1) % 8, (i + 7) % 8];
            if i % 2 == 0 {
                // edge neighbours also touch the next edge neighbour across the diagonal
                adj.push((i + 2) % 8);
                adj.push((i + 6) % 8);
            }
            for j in adj {
                if p[j] && label[j] == usize::MAX {
                    label[j] = n;
                    stack.push(j);
                }
            }
        }
        n += 1;
    }
    n
}

/// Deletes the inner corner pixels of two-pixel-wide diagonal staircases that
/// the two-subiteration scheme leaves behind, so diagonal strokes end up one
/// pixel wide and 8-connected.
fn remove_staircases(img: &mut BinaryImage) {
    let (w, h) = (img.width(), img.height());
    loop {
        let mut changed = false;
        for y in 0..h {
            for x in 0..w {
                if !img.get(x, y) {
                    continue;
                }
                let p = ring(img, x, y);
                let edges = [p[0], p[2], p[4], p[6]];
                if edges.iter().filter(|&&e| e).count() != 2 {
                    continue;
                }
                // the two edge neighbours must be perpendicular with an empty diagonal between them
                let corner = (0..4).find(|&k| edges[k] && edges[(k + 1) % 4]);
                let Some(k) = corner else { continue };
                if p[2 * k + 1] {
                    continue;
                }
                let b = p.iter().filter(|&&v| v).count();
                if b >= 2 && ring_components(&p) == 1 {
                    img.set(x, y, false);
                    changed = true;
                }
            }
        }
        if !changed {
            return;
        }
    }
}

fn find_junctions(skel: &BinaryImage, opts: &SkeletonOptions) -> Vec<Junction> {
    let (w, h) = (skel.width(), skel.height());
    let mut is_branch_point = vec![false; w * h];
    let mut corner_candidates = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !skel.get(x, y) {
                continue;
            }
            let cn = crossing_number(skel, x, y);
            if cn >= 3 {
                is_branch_point[y * w + x] = true;
            } else if cn == 2 {
                if let Some(angle) = corner_angle(skel, x, y, opts.branch_probe) {
                    if angle < opts.corner_angle_deg {
                        corner_candidates.push((angle, x, y));
                    }
                }
            }
        }
    }

    // Adjacent branch points form one junction anchored at its first pixel in scan order.
    let mut junctions = Vec::new();
    let mut seen = vec![false; w * h];
    for start in 0..w * h {
        if !is_branch_point[start] || seen[start] {
            continue;
        }
        let mut cluster = vec![start];
        seen[start] = true;
        let mut i = 0;
        while i < cluster.len() {
            let (cx, cy) = ((cluster[i] % w) as i64, (cluster[i] / w) as i64);
            for (dx, dy) in NEIGHBORS_8 {
                let (nx, ny) = (cx + dx, cy + dy);
                if nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h {
                    let j = ny as usize * w + nx as usize;
                    if is_branch_point[j] && !seen[j] {
                        seen[j] = true;
                        cluster.push(j);
                    }
                }
            }
            i += 1;
        }
        let ring = count_branches(skel, &cluster);
        let branches = if ring >= 3 {
            ring
        } else {
            cluster
                .iter()
                .map(|&j| crossing_number(skel, j % w, j / w))
                .max()
                .unwrap_or(3)
        };
        junctions.push(Junction {
            x: start % w,
            y: start / w,
            branches,
        });
    }

    // Corners: keep the sharpest candidate in each neighbourhood, away from branch points.
    corner_candidates.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then((a.2, a.1).cmp(&(b.2, b.1)))
    });
    let radius = opts.branch_probe as i64;
    let mut corners: Vec<Junction> = Vec::new();
    for (_, x, y) in corner_candidates {
        let near = |j: &Junction| {
            (j.x as i64 - x as i64).abs() <= radius && (j.y as i64 - y as i64).abs() <= radius
        };
        if junctions.iter().any(near) || corners.iter().any(near) {
            continue;
        }
        corners.push(Junction { x, y, branches: 2 });
    }
    junctions.extend(corners);
    junctions.sort_by_key(|j| (j.y, j.x));
    junctions
}

/// Groups of skeleton pixels at Chebyshev distance exactly 2 from the cluster.
fn count_branches(skel: &BinaryImage, cluster: &[usize]) -> usize {
    let w = skel.width();
    let pts: Vec<(i64, i64)> = cluster.iter().map(|&j| ((j % w) as i64, (j / w) as i64)).collect();
    let dist = |x: i64, y: i64| {
        pts.iter()
            .map(|&(cx, cy)| (cx - x).abs().max((cy - y).abs()))
            .min()
            .unwrap()
    };
    let (minx, maxx) = (pts.iter().map(|p| p.0).min().unwrap(), pts.iter().map(|p| p.0).max().unwrap());
    let (miny, maxy) = (pts.iter().map(|p| p.1).min().unwrap(), pts.iter().map(|p| p.1).max().unwrap());
    let mut ring_pts = Vec::new();
    for y in miny - 2..=maxy + 2 {
        for x in minx - 2..=maxx + 2 {
            if skel.get_signed(x, y) && dist(x, y) == 2 {
                ring_pts.push((x, y));
            }
        }
    }
    let mut group = vec![usize::MAX; ring_pts.len()];
    let mut groups = 0;
    for i in 0..ring_pts.len() {
        if group[i] != usize::MAX {
            continue;
        }
        group[i] = groups;
        let mut stack = vec![i];
        while let Some(a) = stack.pop() {
            for b in 0..ring_pts.len() {
                if group[b] == usize::MAX
                    && (ring_pts[a].0 - ring_pts[b].0).abs() <= 1
                    && (ring_pts[a].1 - ring_pts[b].1).abs() <= 1
                {
                    group[b] = groups;
                    stack.push(b);
                }
            }
        }
        groups += 1;
    }
    groups
}

/// Angle in degrees between the two branches leaving a two-branch skeleton point.
fn corner_angle(skel: &BinaryImage, x: usize, y: usize, probe: usize) -> Option<f64> {
    let p = ring(skel, x, y);
    // ring order P2..P9 mapped to offsets
    const OFF: [(i64, i64); 8] = [(0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1)];
    let mut runs: Vec<Vec<(i64, i64)>> = Vec::new();
    let start = (0..8).find(|&i| !p[i])?;
    for k in 1..=8 {
        let i = (start + k) % 8;
        if p[i] {
            if !p[(i + 7) % 8] {
                runs.push(Vec::new());
            }
            runs.last_mut().unwrap().push(OFF[i]);
        }
    }
    if runs.len() != 2 {
        return None;
    }
    let origin = (x as i64, y as i64);
    let mut visited = vec![origin];
    for r in &runs {
        visited.extend(r.iter().map(|&(dx, dy)| (origin.0 + dx, origin.1 + dy)));
    }
    let mut ends = Vec::with_capacity(2);
    for r in &runs {
        // prefer the edge neighbour of a run as the first step
        let first = *r.iter().find(|&&(dx, dy)| dx == 0 || dy == 0).unwrap_or(&r[0]);
        let mut cur = (origin.0 + first.0, origin.1 + first.1);
        for _ in 1..probe {
            let next = OFF
                .iter()
                .filter(|&&(dx, dy)| dx == 0 || dy == 0)
                .chain(OFF.iter().filter(|&&(dx, dy)| dx != 0 && dy != 0))
                .map(|&(dx, dy)| (cur.0 + dx, cur.1 + dy))
                .find(|&q| skel.get_signed(q.0, q.1) && !visited.contains(&q));
            match next {
                Some(q) => {
                    visited.push(q);
                    cur = q;
                }
                None => break,
            }
        }
        ends.push(cur);
    }
    let v1 = ((ends[0].0 - origin.0) as f64, (ends[0].1 - origin.1) as f64);
    let v2 = ((ends[1].0 - origin.0) as f64, (ends[1].1 - origin.1) as f64);
    let cos = (v1.0 * v2.0 + v1.1 * v2.1) / ((v1.0.hypot(v1.1)) * (v2.0.hypot(v2.1)));
    Some(cos.clamp(-1.0, 1.0).acos().to_degrees())
}

#[cfg(test)]
mod tests {
    use super::super::components::connected_components;
    use super::*;

    #[test]
    fn plus_sign_has_one_four_way_junction() {
        let img = BinaryImage::from_ascii(&[
            "....#....",
            "....#....",
            "....#....",
            "....#....",
            "#########",
            "....#....",
            "....#....",
            "....#....",
            "....#....",
        ]);
        let sk = skeletonize(&img);
        assert_eq!(sk.image, img, "1-px strokes are already thin");
        assert_eq!(sk.junctions, vec![Junction { x: 4, y: 4, branches: 4 }]);
    }

    #[test]
    fn straight_line_has_no_junction() {
        let img = BinaryImage::from_ascii(&["..........", ".########.", ".........."]);
        assert!(skeletonize(&img).junctions.is_empty());
    }

    #[test]
    fn l_polyline_has_one_corner() {
        let img = BinaryImage::from_ascii(&[
            ".......", ".#.....", ".#.....", ".#.....", ".#.....", ".#####.", ".......",
        ]);
        let sk = skeletonize(&img);
        // the elbow pixel itself is cut to a diagonal step by the staircase pass
        assert_eq!(sk.junctions.len(), 1);
        let j = sk.junctions[0];
        assert_eq!(j.branches, 2);
        assert!(j.x.abs_diff(1) <= 1 && j.y.abs_diff(5) <= 1, "{j:?}");
    }

    #[test]
    fn t_junction() {
        let img = BinaryImage::from_ascii(&[
            ".........", ".#######.", "....#....", "....#....", "....#....", "....#....",
        ]);
        let sk = skeletonize(&img);
        assert_eq!(sk.junctions, vec![Junction { x: 4, y: 1, branches: 3 }]);
    }

    #[test]
    fn thick_bar_thins_to_single_line() {
        let mut rows = vec![".".repeat(20); 7];
        for r in rows.iter_mut().take(5).skip(2) {
            *r = format!(".{}.", "#".repeat(18));
        }
        let refs: Vec<&str> = rows.iter().map(|s| s.as_str()).collect();
        let img = BinaryImage::from_ascii(&refs);
        let sk = skeletonize(&img);
        for x in 3..17 {
            let col: usize = (0..7).filter(|&y| sk.image.get(x, y)).count();
            assert_eq!(col, 1, "column {x}");
        }
        assert!(sk.junctions.is_empty());
    }

    #[test]
    fn two_by_two_block_survives() {
        let img = BinaryImage::from_ascii(&["....", ".##.", ".##.", "...."]);
        let sk = skeletonize(&img);
        assert!(sk.image.count_ink() >= 1);
        assert_eq!(connected_components(&sk.image).len(), 1);
    }
}
