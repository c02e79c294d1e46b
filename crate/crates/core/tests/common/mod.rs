#![allow(dead_code)]

use mtclm::likelihood::sigmoid;
use mtclm::{MtclmParams, OrdinalDataset};
use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

pub fn normal_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((n, p), || rng.sample(StandardNormal))
}

/// Ordered thresholds with gaps of at least 0.3.
pub fn random_params(rng: &mut ChaCha8Rng, p: usize, k_max: usize, scale: f64) -> MtclmParams {
    let mut zeta = Vec::with_capacity(k_max - 1);
    let mut z = rng.gen_range(-1.5..-0.5);
    for _ in 0..k_max - 1 {
        zeta.push(z);
        z += rng.gen_range(0.3..1.5);
    }
    MtclmParams {
        alpha: rng.gen_range(-0.5..0.5),
        beta: (0..p)
            .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
            .collect(),
        zeta,
        gamma: (0..p)
            .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
            .collect(),
    }
}

/// Draws responses from the two-part model itself.
pub fn sample_labels(rng: &mut ChaCha8Rng, x: &Array2<f64>, params: &MtclmParams) -> Vec<usize> {
    let k_max = params.k_max();
    x.rows()
        .into_iter()
        .map(|row| {
            let s: f64 = params.alpha
                + row
                    .iter()
                    .zip(&params.beta)
                    .map(|(a, b)| a * b)
                    .sum::<f64>();
            if rng.gen::<f64>() < sigmoid(s) {
                return 0;
            }
            let e: f64 = row.iter().zip(&params.gamma).map(|(a, b)| a * b).sum();
            let u: f64 = rng.gen();
            (1..k_max)
                .find(|&k| u < sigmoid(params.zeta[k - 1] + e))
                .unwrap_or(k_max)
        })
        .collect()
}

/// Dataset drawn from random parameters; every level is present.
pub fn random_dataset(
    seed: u64,
    n: usize,
    p: usize,
    k_max: usize,
    scale: f64,
) -> (OrdinalDataset, MtclmParams) {
    let mut r = rng(seed);
    loop {
        let params = random_params(&mut r, p, k_max, scale);
        let x = normal_matrix(&mut r, n, p);
        let y = sample_labels(&mut r, &x, &params);
        if (0..=k_max).all(|k| y.contains(&k)) {
            return (OrdinalDataset::new(x, y, k_max).unwrap(), params);
        }
    }
}

pub fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

pub fn flat(p: &MtclmParams) -> Vec<f64> {
    let mut v = vec![p.alpha];
    v.extend(&p.beta);
    v.extend(&p.zeta);
    v.extend(&p.gamma);
    v
}
