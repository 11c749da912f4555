#![allow(dead_code)]

use opwg_core::mesh::{generate_uniform, Mesh};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform `n×n` mesh with interior vertices moved by up to `amount·h`.
pub fn jittered_mesh(n: usize, amount: f64, rng: &mut impl Rng) -> Mesh {
    let base = generate_uniform(n).unwrap();
    let h = 1.0 / n as f64;
    let vertices = base
        .vertices
        .iter()
        .map(|&[x, y]| {
            let interior = x > 1e-12 && x < 1.0 - 1e-12 && y > 1e-12 && y < 1.0 - 1e-12;
            if interior {
                [x + amount * h * rng.gen_range(-1.0..1.0), y + amount * h * rng.gen_range(-1.0..1.0)]
            } else {
                [x, y]
            }
        })
        .collect();
    Mesh::from_parts(vertices, base.triangles.clone()).unwrap()
}

pub fn random_vector(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
