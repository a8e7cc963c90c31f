//! Fixed benchmark instances.

use nts_core::{Channel, Distribution};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn bsc(eps: f64) -> Channel {
    Channel::new(vec![vec![1.0 - eps, eps], vec![eps, 1.0 - eps]]).unwrap()
}

pub fn uniform(k: usize) -> Distribution {
    Distribution::new(vec![1.0 / k as f64; k]).unwrap()
}

/// Dense random channel with strictly positive entries.
pub fn random_channel(nx: usize, ny: usize, seed: u64) -> Channel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..nx)
        .map(|_| {
            let raw: Vec<f64> = (0..ny).map(|_| rng.gen_range(0.05..1.0)).collect();
            let s: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / s).collect()
        })
        .collect();
    Channel::new(rows).unwrap()
}
