#![allow(dead_code)]

use dmpp_core::model::{Demonstration, DmpModel, Gains, TrainingOptions};
use nalgebra::DMatrix;

pub fn min_jerk(s: f64) -> f64 {
    s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
}

/// `n` dofs, each a scaled min-jerk with a small sinusoidal bend.
pub fn demo(n: usize, duration: f64, samples: usize) -> Demonstration {
    let times: Vec<f64> = (0..samples)
        .map(|i| duration * i as f64 / (samples - 1) as f64)
        .collect();
    let pos = DMatrix::from_fn(n, samples, |r, j| {
        let s = j as f64 / (samples - 1) as f64;
        (1.0 + 0.5 * r as f64) * min_jerk(s)
            + 0.2 * (std::f64::consts::PI * s).sin() * (r % 2) as f64
    });
    Demonstration::new(times, pos).unwrap()
}

pub fn model(kernels: usize, n: usize, duration: f64) -> DmpModel {
    let opts = TrainingOptions {
        kernels,
        ..TrainingOptions::default()
    };
    DmpModel::train(
        &demo(n, duration, 500),
        &opts,
        Gains::critically_damped(n, 300.0).unwrap(),
    )
    .unwrap()
    .0
}
