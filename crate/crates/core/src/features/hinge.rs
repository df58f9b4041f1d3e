//! Hinge and its joint-distribution relatives.

use std::f64::consts::{PI, TAU};

use super::{angle_bin, orientation, positions, FeatureKind, FeatureVector, HingeConfig, Histogram};
use crate::imgcore::Contour;

/// Index of the unordered bin pair `lo < hi` among `bins * (bins - 1) / 2`.
pub fn hinge_pair_index(lo: usize, hi: usize, bins: usize) -> usize {
    debug_assert!(lo < hi && hi < bins);
    lo * (2 * bins - lo - 1) / 2 + (hi - lo - 1)
}

/// Orientations of the backward and forward legs at contour index `i`.
#[inline]
fn legs(c: &Contour, i: isize, len: usize) -> (f64, f64) {
    let p = c.at(i);
    let l = len as isize;
    (orientation(p, c.at(i - l)), orientation(p, c.at(i + l)))
}

pub fn hinge(contours: &[Contour], cfg: &HingeConfig) -> FeatureVector {
    let bins = cfg.hinge_bins;
    let mut h = Histogram::new(FeatureKind::Hinge, bins * (bins - 1) / 2);
    for c in contours {
        let Some(range) = positions(c, cfg.leg_length, cfg.leg_length) else {
            h.skip();
            continue;
        };
        for i in range {
            let (a, b) = legs(c, i, cfg.leg_length);
            let (ba, bb) = (angle_bin(a, bins), angle_bin(b, bins));
            if ba != bb {
                h.add(hinge_pair_index(ba.min(bb), ba.max(bb), bins));
            }
        }
    }
    h.finish()
}

/// Hinge kernels at two contour points: `x_j` is the first point after `x_i`
/// whose Manhattan distance from it reaches `cohinge_distance`.
pub fn cohinge(contours: &[Contour], cfg: &HingeConfig) -> FeatureVector {
    let bins = cfg.cohinge_bins;
    let leg = cfg.leg_length;
    let mut h = Histogram::new(FeatureKind::CoHinge, bins.pow(4));
    for c in contours {
        let Some(range) = positions(c, leg, leg) else {
            h.skip();
            continue;
        };
        let n = c.len() as isize;
        let last = range.end;
        for i in range {
            let p = c.at(i);
            let limit = if c.closed { n } else { last - i };
            let partner = (1..limit).find(|&k| {
                let q = c.at(i + k);
                ((q.0 - p.0).abs() + (q.1 - p.1).abs()) as usize >= cfg.cohinge_distance
            });
            let Some(k) = partner else { continue };
            let (ai, bi) = legs(c, i, leg);
            let (aj, bj) = legs(c, i + k, leg);
            let idx = ((angle_bin(ai, bins) * bins + angle_bin(bi, bins)) * bins + angle_bin(aj, bins)) * bins
                + angle_bin(bj, bins);
            h.add(idx);
        }
    }
    h.finish()
}

/// Contour steps per piece when estimating a fragment's arc length.
const ARC_PIECE: usize = 3;

#[inline]
fn dist(a: (i32, i32), b: (i32, i32)) -> f64 {
    ((b.0 - a.0) as f64).hypot((b.1 - a.1) as f64)
}

/// Chord over arc length of the `s`-step fragment starting at `from`; 1 for a straight fragment.
///
/// The arc is measured as a polyline through every third contour point, which
/// keeps pixel staircases from reading as curvature.
fn fragment_curvature(c: &Contour, from: isize, s: usize) -> f64 {
    let mut arc = 0.0;
    let mut k = 0;
    while k < s {
        let next = (k + ARC_PIECE).min(s);
        arc += dist(c.at(from + k as isize), c.at(from + next as isize));
        k = next;
    }
    let chord = dist(c.at(from), c.at(from + s as isize));
    if arc == 0.0 {
        return 0.0;
    }
    (chord / arc).min(1.0)
}

#[inline]
fn curvature_bin(v: f64, bins: usize) -> usize {
    ((v * bins as f64) as usize).min(bins - 1)
}

/// Hinge orientations joined with the curvature of both legs, summed over several leg lengths.
pub fn quadhinge(contours: &[Contour], cfg: &HingeConfig) -> FeatureVector {
    let ob = cfg.quad_orient_bins;
    let cb = cfg.quad_curv_bins;
    let mut h = Histogram::new(FeatureKind::QuadHinge, ob * ob * cb * cb);
    for c in contours {
        let mut used = false;
        for &s in &cfg.quad_scales {
            let Some(range) = positions(c, s, s) else { continue };
            used = true;
            for i in range {
                let (a, b) = legs(c, i, s);
                let c1 = fragment_curvature(c, i - s as isize, s);
                let c2 = fragment_curvature(c, i, s);
                let idx = ((angle_bin(a, ob) * ob + angle_bin(b, ob)) * cb + curvature_bin(c1, cb)) * cb
                    + curvature_bin(c2, cb);
                h.add(idx);
            }
        }
        if !used {
            h.skip();
        }
    }
    h.finish()
}

/// Shortest signed angular difference, in (-π, π].
#[inline]
pub(crate) fn wrap_angle(d: f64) -> f64 {
    let mut d = d % TAU;
    if d <= -PI {
        d += TAU;
    } else if d > PI {
        d -= TAU;
    }
    d
}

#[inline]
fn delta_bin(d: f64, bins: usize) -> usize {
    (((d + PI) / TAU * bins as f64) as usize).min(bins - 1)
}

/// First derivative of the hinge orientations along the contour.
pub fn deltahinge(contours: &[Contour], cfg: &HingeConfig) -> FeatureVector {
    let bins = cfg.delta_bins;
    let leg = cfg.leg_length;
    let step = cfg.delta_step;
    let mut h = Histogram::new(FeatureKind::DeltaHinge, bins * bins);
    for c in contours {
        let Some(range) = positions(c, leg, leg + step) else {
            h.skip();
            continue;
        };
        for i in range {
            let (a0, b0) = legs(c, i, leg);
            let (a1, b1) = legs(c, i + step as isize, leg);
            let da = wrap_angle(a0 - a1) / step as f64;
            let db = wrap_angle(b0 - b1) / step as f64;
            h.add(delta_bin(da, bins) * bins + delta_bin(db, bins));
        }
    }
    h.finish()
}

#[cfg(test)]
mod tests {
    use super::super::test_shapes::{ellipse, stroke};
    use super::super::{contours_for, extract_image};
    use super::*;
    use crate::imgcore::BinaryImage;

    fn cfg() -> HingeConfig {
        HingeConfig::default()
    }

    fn line(n: i32) -> Contour {
        Contour::open((0..n).map(|x| (x, 5)).collect())
    }

    #[test]
    fn pair_index_is_a_bijection() {
        let mut seen = vec![false; 253];
        for lo in 0..23 {
            for hi in lo + 1..23 {
                let i = hinge_pair_index(lo, hi, 23);
                assert!(!seen[i]);
                seen[i] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn dims() {
        let img = stroke(60, 60, &ellipse(30.0, 30.0, 20.0, 12.0, 0.3), 2.0);
        let cs = contours_for(&img, &cfg());
        assert_eq!(hinge(&cs, &cfg()).dim(), 253);
        assert_eq!(cohinge(&cs, &cfg()).dim(), 10000);
        assert_eq!(quadhinge(&cs, &cfg()).dim(), 5184);
        assert_eq!(deltahinge(&cs, &cfg()).dim(), 529);
    }

    #[test]
    fn straight_line_is_antiparallel() {
        let v = hinge(&[line(30)], &cfg());
        let idx = hinge_pair_index(0, 11, 23);
        assert_eq!(v.values[idx], 1.0);

        // closed 1-px line contour: the interior is still dominated by (0°, 180°)
        let img = BinaryImage::from_ascii(&[&".".repeat(40), &format!(".{}.", "#".repeat(38)), &".".repeat(40)]);
        let v = extract_image(FeatureKind::Hinge, &img, &cfg()).unwrap();
        let argmax = (0..253).max_by(|&a, &b| v.values[a].total_cmp(&v.values[b])).unwrap();
        assert_eq!(argmax, idx);
    }

    #[test]
    fn l_corner_pairs_east_and_north_legs() {
        // open polyline going down then turning east at (0, 10)
        let mut pts: Vec<(i32, i32)> = (0..=10).map(|y| (0, y)).collect();
        pts.extend((1..=10).map(|x| (x, 10)));
        let v = hinge(&[Contour::open(pts)], &cfg());
        // at the corner the backward leg points north (90°) and the forward leg east (0°)
        let corner = hinge_pair_index(0, angle_bin(0.5 * PI, 23), 23);
        assert!(v.values[corner] > 0.0);
        let arms = [hinge_pair_index(5, 17, 23), hinge_pair_index(0, 11, 23)];
        for i in 0..253 {
            if i != corner && !arms.contains(&i) {
                assert!(v.values[i] <= v.values[corner], "bin {i}");
            }
        }
    }

    #[test]
    fn cohinge_straight_line_on_diagonal() {
        let v = cohinge(&[line(40)], &cfg());
        // legs 180° and 0° at both points
        let (a, b) = (5, 0);
        let idx = ((a * 10 + b) * 10 + a) * 10 + b;
        assert_eq!(v.values[idx], 1.0);
        assert!(cohinge(&[], &cfg()).empty);
    }

    #[test]
    fn quadhinge_curvature_bins() {
        let v = quadhinge(&[line(40)], &cfg());
        let nz: Vec<usize> = (0..5184).filter(|&i| v.values[i] > 0.0).collect();
        assert_eq!(nz.len(), 1);
        // backward leg 180° -> bin 6, forward 0° -> bin 0, both curvatures in the top bin
        assert_eq!(nz[0], ((6 * 12) * 6 + 5) * 6 + 5);
    }

    #[test]
    fn semicircle_curvature_is_two_over_pi() {
        let c = 2.0 / PI;
        assert!((c - 0.6366).abs() < 1e-4);
        assert_eq!(curvature_bin(c, 6), 3);
        assert_eq!(curvature_bin(1.0, 6), 5);
        // digitized: a half circle of radius 20 measured as one fragment
        let r = 20.0f64;
        let pts: Vec<(i32, i32)> = {
            let mut out: Vec<(i32, i32)> = Vec::new();
            for k in 0..=2000 {
                let t = k as f64 / 2000.0 * PI;
                let p = ((r * t.cos()).round() as i32, (-r * t.sin()).round() as i32);
                if out.last() != Some(&p) {
                    out.push(p);
                }
            }
            // drop 4-connected staircase corners so the path is 8-connected and minimal
            let mut thin: Vec<(i32, i32)> = Vec::new();
            for (k, &p) in out.iter().enumerate() {
                if let (Some(&a), Some(&b)) = (thin.last(), out.get(k + 1)) {
                    if (a.0 - b.0).abs() <= 1 && (a.1 - b.1).abs() <= 1 {
                        continue;
                    }
                }
                thin.push(p);
            }
            thin
        };
        let contour = Contour::open(pts.clone());
        let cv = fragment_curvature(&contour, 0, pts.len() - 1);
        assert!((cv - 2.0 / PI).abs() < 0.05, "{cv}");
    }

    #[test]
    fn deltahinge_straight_line_center_bin() {
        let v = deltahinge(&[line(40)], &cfg());
        assert_eq!(v.values[11 * 23 + 11], 1.0);
    }

    #[test]
    fn wrap() {
        assert!((wrap_angle(1.5 * TAU) - PI).abs() < 1e-12);
        assert!((wrap_angle(-0.25 * TAU) + 0.5 * PI).abs() < 1e-12);
        assert!((wrap_angle(0.75 * TAU) + 0.5 * PI).abs() < 1e-12);
    }

    #[test]
    fn short_contours_skip_and_flag() {
        let v = hinge(&[line(5)], &cfg());
        assert!(v.empty);
        assert_eq!(v.skipped_contours, 1);
        assert!(v.values.iter().all(|&x| x == 0.0));
    }
}
