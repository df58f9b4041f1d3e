use super::{FeatureKind, FeatureVector, HingeConfig, Histogram};
use crate::imgcore::Contour;

/// Chain codes sampled at three points `l` steps apart.
pub fn tcc(contours: &[Contour], cfg: &HingeConfig) -> FeatureVector {
    let l = cfg.tcc_distance;
    let mut h = Histogram::new(FeatureKind::Tcc, 512);
    for c in contours {
        let n = c.chain.len();
        if n < 2 * l + 1 {
            h.skip();
            continue;
        }
        let starts = if c.closed { n } else { n - 2 * l };
        for i in 0..starts {
            let code = |k: usize| (c.chain[(i + k) % n] - 1) as usize;
            h.add(code(0) * 64 + code(l) * 8 + code(2 * l));
        }
    }
    h.finish()
}

/// Bin of the triple `(a, b, c)` of chain codes in 1..=8.
pub fn tcc_index(a: u8, b: u8, c: u8) -> usize {
    (a as usize - 1) * 64 + (b as usize - 1) * 8 + (c as usize - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn east_line_is_single_bin() {
        let c = Contour::open((0..30).map(|x| (x, 0)).collect());
        let v = tcc(&[c], &HingeConfig::default());
        assert_eq!(v.dim(), 512);
        assert_eq!(v.values[tcc_index(1, 1, 1)], 1.0);
    }

    #[test]
    fn empty_input_is_flagged_zero() {
        let v = tcc(&[], &HingeConfig::default());
        assert!(v.empty && v.values.iter().all(|&x| x == 0.0));
    }
}
