use super::image::BinaryImage;

/// One 8-connected ink region; pixels in raster order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    pub pixels: Vec<(usize, usize)>,
}

impl Component {
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn to_mask(&self, width: usize, height: usize) -> BinaryImage {
        let mut img = BinaryImage::blank(width, height);
        for &(x, y) in &self.pixels {
            img.set(x, y, true);
        }
        img
    }
}

pub(crate) const NEIGHBORS_8: [(i64, i64); 8] = [
    (1, 0),
    (1, -1),
    (0, -1),
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

/// Label image: 0 for background, component index + 1 otherwise.
pub fn label_components(img: &BinaryImage) -> (Vec<u32>, usize) {
    let (w, h) = (img.width(), img.height());
    let mut labels = vec![0u32; w * h];
    let mut count = 0usize;
    let mut stack = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !img.get(x, y) || labels[y * w + x] != 0 {
                continue;
            }
            count += 1;
            let label = count as u32;
            labels[y * w + x] = label;
            stack.push((x, y));
            while let Some((cx, cy)) = stack.pop() {
                for (dx, dy) in NEIGHBORS_8 {
                    let (nx, ny) = (cx as i64 + dx, cy as i64 + dy);
                    if img.get_signed(nx, ny) {
                        let idx = ny as usize * w + nx as usize;
                        if labels[idx] == 0 {
                            labels[idx] = label;
                            stack.push((nx as usize, ny as usize));
                        }
                    }
                }
            }
        }
    }
    (labels, count)
}

/// 8-connected components, ordered by their first pixel in raster scan.
pub fn connected_components(img: &BinaryImage) -> Vec<Component> {
    let (labels, count) = label_components(img);
    let mut comps = vec![Component { pixels: Vec::new() }; count];
    let w = img.width();
    for (i, &l) in labels.iter().enumerate() {
        if l > 0 {
            comps[l as usize - 1].pixels.push((i % w, i / w));
        }
    }
    comps
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_squares() {
        let img = BinaryImage::from_ascii(&["##..", "##..", "....", "..##", "..##"]);
        let comps = connected_components(&img);
        assert_eq!(comps.len(), 2);
        assert_eq!(comps[0].pixels[0], (0, 0));
        assert_eq!(comps[1].pixels[0], (2, 3));
    }

    #[test]
    fn diagonal_pair_is_one_component() {
        let img = BinaryImage::from_ascii(&["#.", ".#"]);
        assert_eq!(connected_components(&img).len(), 1);
    }

    #[test]
    fn empty() {
        assert!(connected_components(&BinaryImage::blank(5, 5)).is_empty());
    }

    #[test]
    fn partition() {
        let img = BinaryImage::from_ascii(&["#.#.#", "..#..", "#...#", "##.##"]);
        let comps = connected_components(&img);
        let total: usize = comps.iter().map(Component::len).sum();
        assert_eq!(total, img.count_ink());
        let mut seen = std::collections::HashSet::new();
        for c in &comps {
            for p in &c.pixels {
                assert!(seen.insert(*p));
            }
        }
    }
}
