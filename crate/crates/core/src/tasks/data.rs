//! Synthetic datasets.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }

    /// First `n_train` rows and the rest.
    pub fn split(&self, n_train: usize) -> Result<(Dataset, Dataset)> {
        if n_train == 0 || n_train >= self.len() {
            return Err(Error::invalid(
                "train_fraction",
                format!("split at {n_train} leaves an empty side of {} rows", self.len()),
            ));
        }
        let (xa, xb) = self.x.split_at(n_train);
        let (ya, yb) = self.y.split_at(n_train);
        Ok((
            Dataset { x: xa.to_vec(), y: ya.to_vec() },
            Dataset { x: xb.to_vec(), y: yb.to_vec() },
        ))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoSample {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
}

/// Noiseless regression target `Σx_i + Σcos(x_i²) + Σcos|x_i|`.
pub fn krr_signal(x: &[f64]) -> f64 {
    x.iter().map(|v| v + (v * v).cos() + v.abs().cos()).sum()
}

/// `x ~ U[−1, 1)^5`, `y = krr_signal(x) + ε`, `ε ~ N(0, 1/4)`.
pub fn synth_krr_data(n: usize, seed: u64) -> Dataset {
    let mut rng = rng_from_seed(seed);
    let noise = Normal::new(0.0, 0.5).expect("valid normal");
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        y.push(krr_signal(&row) + noise.sample(&mut rng));
        x.push(row);
    }
    Dataset { x, y }
}

/// Two samples on the first quadrant of the unit circle.
///
/// Both draw angles uniformly from `[0, π/2]`. In the second sample, points
/// falling in one of three arcs of width `π/12` (centered at `π/12`, `π/4`,
/// `5π/12`, half the quadrant in total) are pushed radially out to radius `1 + gap`.
pub fn synth_circle_data(n: usize, gap: f64, seed: u64) -> Result<TwoSample> {
    if n == 0 {
        return Err(Error::invalid("n", "must be at least 1"));
    }
    if !(gap >= 0.0 && gap.is_finite()) {
        return Err(Error::invalid("gap", format!("must be finite and non-negative, got {gap}")));
    }
    let mut rng = rng_from_seed(seed);
    let mut draw = |radius: &dyn Fn(f64) -> f64| -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| {
                let t = rng.random_range(0.0..=PI / 2.0);
                let r = radius(t);
                vec![r * t.cos(), r * t.sin()]
            })
            .collect()
    };
    let x = draw(&|_| 1.0);
    let y = draw(&|t| if in_shifted_arc(t) { 1.0 + gap } else { 1.0 });
    Ok(TwoSample { x, y })
}

fn in_shifted_arc(angle: f64) -> bool {
    [PI / 12.0, PI / 4.0, 5.0 * PI / 12.0]
        .iter()
        .any(|c| (angle - c).abs() <= PI / 24.0)
}

/// `n` pairs with `x_i, u_i ~ N(0, I_d)` and `y_i = x_i + (5i/n)·u_i/‖u_i‖`,
/// so pair `i` (1-based) sits at distance exactly `5i/n`.
pub fn synth_toy_pairs(n: usize, dim: usize, seed: u64) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    if n == 0 {
        return Err(Error::invalid("n", "must be at least 1"));
    }
    if dim == 0 {
        return Err(Error::invalid("dim", "must be at least 1"));
    }
    let mut rng = rng_from_seed(seed);
    Ok((1..=n)
        .map(|i| {
            let x: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            let mut u: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            let mut norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
            while norm == 0.0 {
                u = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
                norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
            }
            let dist = 5.0 * i as f64 / n as f64;
            let y = x.iter().zip(&u).map(|(a, d)| a + dist * d / norm).collect();
            (x, y)
        })
        .collect())
}
