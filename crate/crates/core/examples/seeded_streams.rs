//! Sub-streams keyed by (seed, purpose, indices) give the same numbers
//! whatever order they are drawn in.
//!
//! ```bash
//! cargo run --example seeded_streams
//! ```

use rand::Rng;
use rayon::prelude::*;
use splidar::rng::{substream, Purpose};

fn main() {
    let serial: Vec<f64> = (0..8u64).map(|k| substream(42, Purpose::Trial, &[0, k]).random()).collect();
    let parallel: Vec<f64> = (0..8u32)
        .into_par_iter()
        .map(|k| substream(42, Purpose::Trial, &[0, k as u64]).random())
        .collect();
    for (k, (a, b)) in serial.iter().zip(&parallel).enumerate() {
        println!("trial {k}: {a:.12} {b:.12}");
    }
    assert_eq!(serial, parallel);
    let other: f64 = substream(42, Purpose::Frame, &[0, 0]).random();
    println!("frame stream (0, 0): {other:.12}");
}
