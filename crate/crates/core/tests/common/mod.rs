#![allow(dead_code)]

use nts_core::{Channel, Distribution};
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Strictly positive probability vector of length `k`.
pub fn arb_probs(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..1.0, k).prop_map(|w| {
        let s: f64 = w.iter().sum();
        w.iter().map(|v| v / s).collect()
    })
}

/// Channel with `2..=3` inputs and outputs and an input distribution.
pub fn arb_instance() -> impl Strategy<Value = (Channel, Distribution)> {
    (2usize..=3, 2usize..=3).prop_flat_map(|(nx, ny)| {
        (prop::collection::vec(arb_probs(ny), nx), arb_probs(nx)).prop_map(|(rows, q)| {
            (Channel::new(rows).unwrap(), Distribution::new(q).unwrap())
        })
    })
}

pub fn random_probs(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..k).map(|_| -rng.gen::<f64>().ln()).collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|v| v / s).collect()
}

pub fn random_instance(rng: &mut ChaCha8Rng, nx: usize, ny: usize) -> (Channel, Distribution) {
    let rows = (0..nx).map(|_| random_probs(rng, ny)).collect();
    (
        Channel::new(rows).unwrap(),
        Distribution::new(random_probs(rng, nx)).unwrap(),
    )
}

pub fn bsc(eps: f64) -> Channel {
    Channel::bsc(eps).unwrap()
}

pub fn dist(v: &[f64]) -> Distribution {
    Distribution::new(v.to_vec()).unwrap()
}

/// `ln 2 − H_b(eps)`.
pub fn bsc_capacity(eps: f64) -> f64 {
    2f64.ln() + eps * eps.ln() + (1.0 - eps) * (1.0 - eps).ln()
}
