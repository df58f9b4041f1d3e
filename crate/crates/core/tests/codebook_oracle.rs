use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use scriptdate::codebook::{encode, initial_grid, train_som, train_sotm, Codebook, SomParams};

fn random_patterns(rng: &mut impl Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..dim).map(|_| rng.gen::<f64>()).collect()).collect()
}

fn params(epochs: usize, seed: u64) -> SomParams {
    SomParams {
        epochs,
        seed,
        ..SomParams::default()
    }
}

fn three_years(rng: &mut impl Rng) -> BTreeMap<i32, Vec<Vec<f64>>> {
    [1300, 1325, 1350]
        .into_iter()
        .map(|y| (y, random_patterns(rng, 30, 120)))
        .collect()
}

#[test]
fn encode_matches_linear_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cb = train_sotm(&three_years(&mut rng), 25, &params(3, 1)).unwrap();
    let nodes: Vec<&[f64]> = cb.subs.iter().flat_map(|s| (0..s.len()).map(move |i| s.node(i))).collect();
    assert_eq!(nodes.len(), 75);
    for d in random_patterns(&mut rng, 1000, 120) {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (j, node) in nodes.iter().enumerate() {
            let dist: f64 = node.iter().zip(&d).map(|(a, b)| (a - b) * (a - b)).sum();
            if dist < best_d {
                best_d = dist;
                best = j;
            }
        }
        let v = encode(std::slice::from_ref(&d), &cb);
        assert_eq!(v.values[best], 1.0);
        assert_eq!(v.values.iter().filter(|&&x| x != 0.0).count(), 1);
    }
}

#[test]
fn single_year_chain_is_a_plain_som() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pats = random_patterns(&mut rng, 40, 120);
    let p = params(20, 77);
    let by_year = BTreeMap::from([(1400, pats.clone())]);
    let chained = train_sotm(&by_year, 16, &p).unwrap();
    let plain = train_som(initial_grid(&pats, 16, 1400, 77).unwrap(), &pats, &p).unwrap();
    assert_eq!(chained.subs.len(), 1);
    assert_eq!(chained.subs[0], plain);
}

#[test]
fn sub_codebooks_follow_ascending_years_and_size() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut by_year = BTreeMap::new();
    for y in [1550, 1300, 1425, -100] {
        by_year.insert(y, random_patterns(&mut rng, 10, 120));
    }
    let cb = train_sotm(&by_year, 25, &params(2, 0)).unwrap();
    assert_eq!(cb.years(), vec![-100, 1300, 1425, 1550]);
    assert_eq!(cb.total_size(), 25 * 4);
    let v = encode(&by_year[&1300], &cb);
    assert_eq!(v.dim(), 100);
    assert!((v.values.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn chained_training_is_reproducible() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let data = three_years(&mut rng);
    let a = train_sotm(&data, 9, &params(10, 4)).unwrap();
    let b = train_sotm(&data, 9, &params(10, 4)).unwrap();
    assert_eq!(a, b);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cb.bin");
    a.save(&path).unwrap();
    assert_eq!(Codebook::load(&path).unwrap(), a);
}

#[test]
fn training_lowers_quantization_error() {
    let mut ratios = Vec::new();
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        // clustered data so a trained map has structure to find
        let centers = random_patterns(&mut rng, 4, 120);
        let pats: Vec<Vec<f64>> = (0..80)
            .map(|i| centers[i % 4].iter().map(|c| c + 0.05 * rng.gen::<f64>()).collect())
            .collect();
        let init = initial_grid(&pats, 9, 0, seed).unwrap();
        let before = init.quantization_error(&pats);
        let after = train_som(init, &pats, &params(30, seed)).unwrap().quantization_error(&pats);
        ratios.push(after / before);
    }
    ratios.sort_by(f64::total_cmp);
    let median = 0.5 * (ratios[9] + ratios[10]);
    assert!(median <= 1.0, "median ratio {median}");
}
