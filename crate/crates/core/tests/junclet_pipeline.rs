use std::path::Path;

use scriptdate::imgcore::BinaryImage;
use scriptdate::junclets::{descriptor_set, directions, extract_junctions, ray_length, JuncletConfig};
use scriptdate::manifest::{DatasetManifest, Sample};
use scriptdate::Error;

mod common;
use common::stroke;

fn crossings(w: usize, h: usize) -> BinaryImage {
    let mut img = stroke(w, h, &[(10.0, 10.0), (70.0, 50.0)], 1.5);
    for part in [
        stroke(w, h, &[(10.0, 50.0), (70.0, 12.0)], 1.5),
        stroke(w, h, &[(40.0, 5.0), (40.0, 30.0)], 1.5),
    ] {
        for y in 0..h {
            for x in 0..w {
                if part.get(x, y) {
                    img.set(x, y, true);
                }
            }
        }
    }
    img
}

fn sample(id: &str, path: &Path) -> Sample {
    Sample {
        id: id.into(),
        path: path.to_path_buf(),
        label_year: 1300,
        writer: None,
        source_id: None,
        seed: None,
    }
}

#[test]
fn junction_count_survives_shifts_and_quarter_turns() {
    let img = crossings(80, 64);
    let n = extract_junctions(&img).len();
    assert!(n >= 1);
    assert_eq!(extract_junctions(&img.translate(5, -3)).len(), n);
    assert_eq!(extract_junctions(&img.rotate90()).len(), n);
    let base = extract_junctions(&img);
    let moved = extract_junctions(&img.translate(5, -3));
    for (a, b) in base.iter().zip(&moved) {
        assert_eq!(a.values, b.values);
        assert_eq!((a.origin.0 + 5, a.origin.1 - 3), b.origin);
    }
    let diag = 80f64.hypot(64.0);
    for d in &base {
        assert!(img.get(d.origin.0, d.origin.1));
        assert!((d.values.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let o = (d.origin.0 as f64, d.origin.1 as f64);
        assert!(directions().iter().all(|&dir| ray_length(&img, o, dir) <= diag));
    }
}

#[test]
fn descriptor_sets_follow_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.png");
    let b = dir.path().join("b.png");
    let blank = dir.path().join("c.png");
    crossings(80, 64).save_png(&a).unwrap();
    crossings(80, 64).save_png(&b).unwrap();
    BinaryImage::blank(30, 30).save_png(&blank).unwrap();
    let m = DatasetManifest::new(vec![sample("a", &a), sample("b", &b), sample("c", &blank)]).unwrap();
    let sets = descriptor_set(&m, &JuncletConfig::default()).unwrap();
    assert_eq!(sets.len(), 3);
    assert_eq!(sets[0], sets[1]);
    assert!(!sets[0].is_empty());
    assert!(sets[2].is_empty());
    let origins: Vec<(usize, usize)> = sets[0].iter().map(|d| (d.origin.1, d.origin.0)).collect();
    let mut sorted = origins.clone();
    sorted.sort();
    assert_eq!(origins, sorted);
}

#[test]
fn unreadable_image_names_the_sample() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("broken.png");
    std::fs::write(&bad, b"nope").unwrap();
    let m = DatasetManifest::new(vec![sample("broken-one", &bad)]).unwrap();
    match descriptor_set(&m, &JuncletConfig::default()) {
        Err(Error::Sample { id, .. }) => assert_eq!(id, "broken-one"),
        other => panic!("unexpected {other:?}"),
    }
}
