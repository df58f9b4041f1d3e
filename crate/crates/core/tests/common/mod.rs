#![allow(dead_code)]

use scriptdate::imgcore::BinaryImage;

/// Disc-stamped polyline.
pub fn stroke(w: usize, h: usize, pts: &[(f64, f64)], radius: f64) -> BinaryImage {
    let mut img = BinaryImage::blank(w, h);
    for seg in pts.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let len = (b.0 - a.0).hypot(b.1 - a.1).max(1e-9);
        let steps = (len * 4.0).ceil() as usize;
        for s in 0..=steps {
            let t = s as f64 / steps as f64;
            let (cx, cy) = (a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1));
            let r = radius.ceil() as i64 + 1;
            for dy in -r..=r {
                for dx in -r..=r {
                    let (x, y) = (cx.round() as i64 + dx, cy.round() as i64 + dy);
                    if x >= 0
                        && y >= 0
                        && (x as usize) < w
                        && (y as usize) < h
                        && (x as f64 - cx).hypot(y as f64 - cy) <= radius
                    {
                        img.set(x as usize, y as usize, true);
                    }
                }
            }
        }
    }
    img
}

pub fn ellipse(cx: f64, cy: f64, rx: f64, ry: f64, rot: f64) -> Vec<(f64, f64)> {
    (0..=144)
        .map(|k| {
            let t = k as f64 / 144.0 * std::f64::consts::TAU;
            let (x, y) = (rx * t.cos(), ry * t.sin());
            (cx + x * rot.cos() - y * rot.sin(), cy + x * rot.sin() + y * rot.cos())
        })
        .collect()
}
