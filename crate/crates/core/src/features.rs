//! Random Fourier features for shift-invariant kernels.
//!
//! A [`RffMap`] freezes a frequency matrix `Ω ∈ ℝ^{d×m}` and a phase vector
//! `ξ ∈ [0, 2π)^m`; embedding a point returns the unnormalized feature vector
//! `cos(Ωᵀx + ξ)`. Normalization happens only in the estimators.
//!
//! Sampling is deterministic in the seed. The stream is consumed in a fixed
//! order: all of `Ω` first, column by column (each column is one frequency
//! `ω_j`, its `d` coordinates drawn consecutively), then all of `ξ`.
//! Gaussian coordinates come from `rand_distr::StandardNormal` (ziggurat
//! method) scaled by `√(2γ)`; phases are `2π·U[0,1)`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{check_len, Error, Result};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    /// `k(x, y) = exp(-γ‖x − y‖²)`, spectral measure `N(0, 2γ·I_d)`.
    Rbf,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub gamma: f64,
    pub dim: usize,
}

impl KernelSpec {
    pub fn rbf(gamma: f64, dim: usize) -> Result<Self> {
        let spec = KernelSpec {
            family: KernelFamily::Rbf,
            gamma,
            dim,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::invalid("gamma", format!("must be positive, got {}", self.gamma)));
        }
        if self.dim == 0 {
            return Err(Error::invalid("dim", "must be at least 1"));
        }
        Ok(())
    }

    /// Exact kernel value.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_len(self.dim, x.len())?;
        match self.family {
            KernelFamily::Rbf => crate::kernels::rbf_kernel(x, y, self.gamma),
        }
    }

    /// Standard deviation of each frequency coordinate under the spectral measure.
    fn frequency_scale(&self) -> f64 {
        match self.family {
            KernelFamily::Rbf => (2.0 * self.gamma).sqrt(),
        }
    }
}

/// A frozen random Fourier feature map.
#[derive(Debug, Clone, PartialEq)]
pub struct RffMap {
    spec: KernelSpec,
    /// Column-major `d × m`: frequency `j` is `omega[j*d..(j+1)*d]`.
    omega: Vec<f64>,
    xi: Vec<f64>,
    seed: Option<u64>,
}

impl RffMap {
    pub fn sample(spec: KernelSpec, m: usize, seed: u64) -> Result<Self> {
        spec.validate()?;
        if m == 0 {
            return Err(Error::invalid("m", "feature count must be at least 1"));
        }
        let mut rng = rng_from_seed(seed);
        let scale = spec.frequency_scale();
        let omega: Vec<f64> = (0..m * spec.dim)
            .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let xi: Vec<f64> = (0..m).map(|_| 2.0 * PI * rng.random::<f64>()).collect();
        Ok(RffMap {
            spec,
            omega,
            xi,
            seed: Some(seed),
        })
    }

    /// Build a map from explicit frequencies (column-major `d × m`) and phases.
    pub fn from_parts(spec: KernelSpec, omega: Vec<f64>, xi: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        if xi.is_empty() {
            return Err(Error::invalid("m", "feature count must be at least 1"));
        }
        check_len(xi.len() * spec.dim, omega.len())?;
        Ok(RffMap {
            spec,
            omega,
            xi,
            seed: None,
        })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn m(&self) -> usize {
        self.xi.len()
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn frequency(&self, j: usize) -> &[f64] {
        let d = self.spec.dim;
        &self.omega[j * d..(j + 1) * d]
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    /// `z(x) = cos(Ωᵀx + ξ)`, every entry in `[-1, 1]`.
    pub fn embed(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.spec.dim, x.len())?;
        Ok(self
            .omega
            .chunks_exact(self.spec.dim)
            .zip(&self.xi)
            .map(|(w, &phase)| {
                let proj: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum();
                (proj + phase).cos()
            })
            .collect())
    }

    pub fn embed_batch(&self, points: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        points.par_iter().map(|x| self.embed(x)).collect()
    }
}

/// `(2/m)·⟨z(x), z(y)⟩`.
pub fn rff_kernel_estimate(zx: &[f64], zy: &[f64]) -> Result<f64> {
    check_len(zx.len(), zy.len())?;
    if zx.is_empty() {
        return Err(Error::invalid("m", "empty feature vectors"));
    }
    Ok(2.0 * dot(zx, zy) / zx.len() as f64)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(gamma: f64, d: usize) -> KernelSpec {
        KernelSpec::rbf(gamma, d).unwrap()
    }

    #[test]
    fn sample_shape_and_phase_range() {
        let map = RffMap::sample(spec(0.5, 1), 4, 7).unwrap();
        assert_eq!(map.omega().len(), 4);
        assert_eq!(map.m(), 4);
        assert!(map.xi().iter().all(|&p| (0.0..2.0 * PI).contains(&p)));
    }

    #[test]
    fn sample_is_deterministic() {
        let a = RffMap::sample(spec(0.2, 3), 50, 11).unwrap();
        let b = RffMap::sample(spec(0.2, 3), 50, 11).unwrap();
        assert_eq!(a, b);
        let c = RffMap::sample(spec(0.2, 3), 50, 12).unwrap();
        assert_ne!(a.omega(), c.omega());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(RffMap::sample(spec(0.5, 2), 0, 1).is_err());
        assert!(KernelSpec::rbf(0.0, 2).is_err());
        assert!(KernelSpec::rbf(-1.0, 2).is_err());
        assert!(KernelSpec::rbf(1.0, 0).is_err());
    }

    #[test]
    fn frequency_second_moment() {
        // E‖ω‖² = d·2γ = 2 for d = 5, γ = 0.2; ‖ω‖²/(2γ) ~ χ²_5 so Var‖ω‖² = 2d(2γ)² = 1.6.
        let m = 100_000;
        let map = RffMap::sample(spec(0.2, 5), m, 3).unwrap();
        let sq: Vec<f64> = (0..m)
            .map(|j| map.frequency(j).iter().map(|w| w * w).sum())
            .collect();
        let mean = sq.iter().sum::<f64>() / m as f64;
        let se = (1.6f64 / m as f64).sqrt();
        assert!((mean - 2.0).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn embed_degenerate_maps() {
        let s = spec(1.0, 2);
        let minus = RffMap::from_parts(s, vec![0.0; 6], vec![PI; 3]).unwrap();
        let plus = RffMap::from_parts(s, vec![0.0; 6], vec![0.0; 3]).unwrap();
        let x = [0.3, -7.0];
        assert!(minus.embed(&x).unwrap().iter().all(|&v| (v + 1.0).abs() < 1e-15));
        assert!(plus.embed(&x).unwrap().iter().all(|&v| v == 1.0));

        let one = RffMap::from_parts(spec(1.0, 1), vec![2.0], vec![PI / 2.0]).unwrap();
        let z = one.embed(&[PI / 4.0]).unwrap();
        assert!((z[0] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn embed_dimension_mismatch() {
        let map = RffMap::sample(spec(1.0, 3), 8, 0).unwrap();
        assert!(matches!(
            map.embed(&[1.0, 2.0]),
            Err(Error::DimensionMismatch { expected: 3, actual: 2 })
        ));
    }

    #[test]
    fn estimate_arithmetic() {
        assert_eq!(rff_kernel_estimate(&[1.0; 6], &[1.0; 6]).unwrap(), 2.0);
        assert_eq!(rff_kernel_estimate(&[1.0, -1.0], &[1.0, 1.0]).unwrap(), 0.0);
        assert!(rff_kernel_estimate(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn estimate_converges_to_rbf() {
        // ‖x − y‖² = 5, γ = 0.2 → e^{-1}.
        let s = spec(0.2, 2);
        let x = [0.5, -0.25];
        let y = [x[0] + 1.0, x[1] + 2.0];
        let exact = (-1.0f64).exp();
        for seed in 0..20 {
            let map = RffMap::sample(s, 100_000, seed).unwrap();
            let est = rff_kernel_estimate(&map.embed(&x).unwrap(), &map.embed(&y).unwrap()).unwrap();
            assert!((est - exact).abs() < 0.02, "seed {seed}: {est}");
        }
    }

    #[test]
    fn single_feature_product_is_half_kernel() {
        // E[z(x)z(y)] = k(x,y)/2 with m = 1; Var ≤ 1/4.
        let s = spec(0.5, 2);
        let x = [0.1, 0.4];
        let y = [0.9, -0.3];
        let n = 100_000u64;
        let prods: Vec<f64> = (0..n)
            .map(|seed| {
                let map = RffMap::sample(s, 1, seed).unwrap();
                map.embed(&x).unwrap()[0] * map.embed(&y).unwrap()[0]
            })
            .collect();
        let mean = prods.iter().sum::<f64>() / n as f64;
        let var = prods.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let target = s.eval(&x, &y).unwrap() / 2.0;
        assert!((mean - target).abs() < 4.0 * (var / n as f64).sqrt());
    }

    #[test]
    fn exact_kernel_is_shift_invariant() {
        let s = spec(0.7, 3);
        let x = [0.2, -1.0, 3.0];
        let y = [1.5, 0.0, 2.0];
        let t = [10.0, -4.0, 0.25];
        let shift = |v: &[f64]| v.iter().zip(&t).map(|(a, b)| a + b).collect::<Vec<_>>();
        let k0 = s.eval(&x, &y).unwrap();
        let k1 = s.eval(&shift(&x), &shift(&y)).unwrap();
        assert!((k0 - k1).abs() < 1e-14);
    }

    proptest::proptest! {
        #[test]
        fn embed_is_bounded(x in proptest::collection::vec(-50.0f64..50.0, 4), seed in 0u64..1000) {
            let map = RffMap::sample(spec(2.0, 4), 32, seed).unwrap();
            proptest::prop_assert!(map.embed(&x).unwrap().iter().all(|v| v.abs() <= 1.0));
        }
    }
}
