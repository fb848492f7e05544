//! Exact and approximate kernels, Gram matrices and spectral checks.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::condense::CondensedFeature;
use crate::error::{check_len, Error, Result};
use crate::features::dot;
use crate::pipeline::Pipeline;
use crate::rng::QrffRng;

/// `exp(−γ‖x − y‖²)`.
pub fn rbf_kernel(x: &[f64], y: &[f64], gamma: f64) -> Result<f64> {
    check_len(x.len(), y.len())?;
    if !(gamma > 0.0) {
        return Err(Error::invalid("gamma", format!("must be positive, got {gamma}")));
    }
    let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((-gamma * sq).exp())
}

fn sign(v: f64) -> f64 {
    if v >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

fn check_pair(a: &[f64], b: &[f64]) -> Result<()> {
    check_len(a.len(), b.len())?;
    if a.is_empty() {
        return Err(Error::invalid("m", "empty feature vectors"));
    }
    Ok(())
}

/// One-bit universal estimate `(1/m)⟨sign z(x), sign z(y)⟩`, with `sign(0) = +1`.
pub fn universal_estimate(zx: &[f64], zy: &[f64]) -> Result<f64> {
    check_pair(zx, zy)?;
    let agree: f64 = zx.iter().zip(zy).map(|(a, b)| sign(*a) * sign(*b)).sum();
    Ok(agree / zx.len() as f64)
}

/// Semi-quantized estimate `(π/2m)⟨z(x), q(y)⟩`; not symmetric in its arguments.
pub fn semiq_estimate(zx: &[f64], qy: &[f64]) -> Result<f64> {
    check_pair(zx, qy)?;
    Ok(std::f64::consts::PI / (2.0 * zx.len() as f64) * dot(zx, qy))
}

/// `(2/m)⟨q(x), q(y)⟩` for stochastically rounded features.
pub fn stocq_estimate(qx: &[f64], qy: &[f64]) -> Result<f64> {
    check_pair(qx, qy)?;
    Ok(2.0 / qx.len() as f64 * dot(qx, qy))
}

/// `⟨Ṽq(x), Ṽq(y)⟩`, divided by the squared prescale factor.
pub fn condensed_estimate(a: &CondensedFeature, b: &CondensedFeature) -> Result<f64> {
    check_len(a.p(), b.p())?;
    if a.source != b.source {
        return Err(Error::Incompatible(format!(
            "sources differ: {:?} vs {:?}",
            a.source, b.source
        )));
    }
    if a.prescale != b.prescale {
        return Err(Error::Incompatible(format!(
            "prescale differs: {} vs {}",
            a.prescale, b.prescale
        )));
    }
    Ok(dot(&a.y, &b.y) / (a.prescale * a.prescale))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GramKind {
    Exact,
    Rff,
    CondensedRff,
    Universal,
    SemiQ,
    StocQ,
    SigmaDelta,
    Beta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub entries: DMatrix<f64>,
    pub kind: GramKind,
}

impl GramMatrix {
    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&symmetrized(&self.entries))
    }
}

/// Pairwise matrix of `f` over `items`, filled from the upper triangle.
pub fn gram_with<T, F>(items: &[T], kind: GramKind, f: F) -> Result<GramMatrix>
where
    T: Sync,
    F: Fn(&T, &T) -> Result<f64> + Sync,
{
    let n = items.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (i..n).map(|j| f(&items[i], &items[j])).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let mut entries = DMatrix::zeros(n, n);
    for (i, row) in rows.into_iter().enumerate() {
        for (offset, v) in row.into_iter().enumerate() {
            let j = i + offset;
            entries[(i, j)] = v;
            entries[(j, i)] = v;
        }
    }
    Ok(GramMatrix { entries, kind })
}

pub fn gram_exact(points: &[Vec<f64>], gamma: f64) -> Result<GramMatrix> {
    gram_with(points, GramKind::Exact, |a, b| rbf_kernel(a, b, gamma))
}

/// Gram of condensed features; equals `Y·Yᵀ / prescale²` for the stacked rows `Y`.
pub fn gram_condensed(features: &[CondensedFeature]) -> Result<GramMatrix> {
    let kind = match features.first().map(|f| f.source) {
        Some(crate::condense::FeatureSource::Beta { .. }) => GramKind::Beta,
        Some(crate::condense::FeatureSource::SigmaDelta { .. }) => GramKind::SigmaDelta,
        _ => GramKind::CondensedRff,
    };
    gram_with(features, kind, condensed_estimate)
}

/// `δ = (8 + 26/(3p)) / (λ(2^b − 1)²)`.
pub fn spectral_delta(p: usize, lambda: usize, bits: u8) -> f64 {
    let levels = ((1u64 << bits) - 1) as f64;
    (8.0 + 26.0 / (3.0 * p as f64)) / (lambda as f64 * levels * levels)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SandwichParams {
    pub eta: f64,
    pub delta1: f64,
    pub delta2: f64,
    /// `δ` of the quantizer, used to flag `Δ₂ < δ/η`.
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralCheckReport {
    pub delta: f64,
    /// `λ_min((K̂ + ηI) − (1 − Δ₁)(K + ηI))`.
    pub lower_margin: f64,
    /// `λ_min((1 + Δ₂)(K + ηI) − (K̂ + ηI))`.
    pub upper_margin: f64,
    pub holds: bool,
    /// False when `Δ₂ < δ/η`, outside the regime the guarantee covers.
    pub delta2_admissible: bool,
}

pub const SANDWICH_TOLERANCE: f64 = 1e-10;

fn symmetrized(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    SymmetricEigen::new(a.clone()).eigenvalues.min()
}

fn check_symmetric(a: &DMatrix<f64>) -> Result<()> {
    if !a.is_square() {
        return Err(Error::NotSymmetric(f64::INFINITY));
    }
    let scale = a.amax().max(1.0);
    let asym = (a - a.transpose()).amax();
    if asym > 1e-8 * scale {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(())
}

/// Check `(1−Δ₁)(K + ηI) ≼ K̂ + ηI ≼ (1+Δ₂)(K + ηI)` through the smallest
/// eigenvalues of the two difference matrices.
pub fn spectral_sandwich_check(
    exact: &GramMatrix,
    approx: &GramMatrix,
    params: SandwichParams,
) -> Result<SpectralCheckReport> {
    check_len(exact.n(), approx.n())?;
    check_symmetric(&exact.entries)?;
    check_symmetric(&approx.entries)?;
    if !(params.eta > 0.0) {
        return Err(Error::invalid("eta", "must be positive"));
    }
    if params.delta1 < 0.0 || params.delta2 < 0.0 {
        return Err(Error::invalid("delta", "Δ₁ and Δ₂ must be non-negative"));
    }
    let n = exact.n();
    let eye = DMatrix::<f64>::identity(n, n) * params.eta;
    let k = symmetrized(&exact.entries) + &eye;
    let k_hat = symmetrized(&approx.entries) + &eye;
    let lower_margin = min_eigenvalue(&(&k_hat - &k * (1.0 - params.delta1)));
    let upper_margin = min_eigenvalue(&(&k * (1.0 + params.delta2) - &k_hat));
    Ok(SpectralCheckReport {
        delta: params.delta,
        lower_margin,
        upper_margin,
        holds: lower_margin >= -SANDWICH_TOLERANCE && upper_margin >= -SANDWICH_TOLERANCE,
        delta2_admissible: params.delta2 >= params.delta / params.eta,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanReport {
    pub max_error: f64,
    pub mean_error: f64,
    pub errors: Vec<f64>,
}

/// Absolute error of the pipeline's estimate against the exact kernel on
/// every pair of a finite grid.
pub fn sup_error_scan(
    pipeline: &Pipeline,
    grid: &[(Vec<f64>, Vec<f64>)],
    rng: &mut QrffRng,
) -> Result<ScanReport> {
    if grid.is_empty() {
        return Err(Error::invalid("grid", "must contain at least one pair"));
    }
    let spec = *pipeline.map().spec();
    let errors = grid
        .iter()
        .map(|(x, y)| {
            let a = pipeline.encode(x, rng)?;
            let b = pipeline.encode(y, rng)?;
            Ok((pipeline.estimate(&a, &b)? - spec.eval(x, y)?).abs())
        })
        .collect::<Result<Vec<f64>>>()?;
    let max_error = errors.iter().copied().fold(0.0, f64::max);
    let mean_error = errors.iter().sum::<f64>() / errors.len() as f64;
    Ok(ScanReport {
        max_error,
        mean_error,
        errors,
    })
}
