//! Maximum mean discrepancy and its permutation test.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{check_len, Error, Result};
use crate::pipeline::{Encoding, Pipeline};

fn check_square(k: &DMatrix<f64>, n: usize) -> Result<()> {
    check_len(n, k.nrows())?;
    check_len(n, k.ncols())
}

/// Biased (V-statistic) squared MMD from the three blocks of kernel values.
pub fn mmd_squared(kxx: &DMatrix<f64>, kyy: &DMatrix<f64>, kxy: &DMatrix<f64>) -> Result<f64> {
    let n = kxx.nrows();
    if n == 0 {
        return Err(Error::invalid("sample", "both samples must be non-empty"));
    }
    check_square(kxx, n)?;
    check_square(kyy, n)?;
    check_square(kxy, n)?;
    let n2 = (n * n) as f64;
    Ok(kxx.sum() / n2 + kyy.sum() / n2 - 2.0 * kxy.sum() / n2)
}

/// `sᵀKs` with `s_i = 1/n_x` on the first sample and `−1/n_y` on the second.
fn pooled_statistic(k: &DMatrix<f64>, first: &[bool]) -> f64 {
    let nx = first.iter().filter(|&&f| f).count() as f64;
    let ny = first.len() as f64 - nx;
    let s = DVector::from_iterator(
        first.len(),
        first.iter().map(|&f| if f { 1.0 / nx } else { -1.0 / ny }),
    );
    (k * &s).dot(&s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MmdReport {
    pub statistic: f64,
    /// Empirical `(1 − level)`-quantile of the permutation null.
    pub threshold: f64,
    pub reject: bool,
}

/// Fraction of rejections over repeated tests.
pub fn power(reports: &[MmdReport]) -> f64 {
    if reports.is_empty() {
        return 0.0;
    }
    reports.iter().filter(|r| r.reject).count() as f64 / reports.len() as f64
}

/// Permutation test on a pooled `2n × 2n` kernel matrix whose first `n`
/// rows belong to the first sample. The threshold is the `⌈(1−level)t⌉`-th
/// smallest of `t` null statistics; the null is rejected when the observed
/// statistic exceeds it.
pub fn permutation_test_pooled<R: Rng + ?Sized>(
    pooled: &DMatrix<f64>,
    permutations: usize,
    level: f64,
    rng: &mut R,
) -> Result<MmdReport> {
    let total = pooled.nrows();
    check_square(pooled, total)?;
    if total < 2 || !total.is_multiple_of(2) {
        return Err(Error::invalid("sample", "need two non-empty samples of equal size"));
    }
    if permutations == 0 {
        return Err(Error::invalid("permutations", "must be at least 1"));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid("level", format!("must lie in (0, 1), got {level}")));
    }
    let mut labels: Vec<bool> = (0..total).map(|i| i < total / 2).collect();
    let statistic = pooled_statistic(pooled, &labels);
    let mut null: Vec<f64> = (0..permutations)
        .map(|_| {
            labels.shuffle(rng);
            pooled_statistic(pooled, &labels)
        })
        .collect();
    null.sort_by(f64::total_cmp);
    let index = (((1.0 - level) * permutations as f64).ceil() as usize).clamp(1, permutations) - 1;
    let threshold = null[index];
    Ok(MmdReport {
        statistic,
        threshold,
        reject: statistic > threshold,
    })
}

/// Permutation test on encoded samples: builds the pooled approximate Gram once
/// and reshuffles its labels. SemiQ entries average both argument orders.
pub fn permutation_test<R: Rng + ?Sized>(
    x: &[Encoding],
    y: &[Encoding],
    pipeline: &Pipeline,
    permutations: usize,
    level: f64,
    rng: &mut R,
) -> Result<MmdReport> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::invalid("sample", "both samples must be non-empty"));
    }
    check_len(x.len(), y.len())?;
    let pooled: Vec<Encoding> = x.iter().chain(y).cloned().collect();
    let gram = pipeline.gram(&pooled)?;
    permutation_test_pooled(&gram.entries, permutations, level, rng)
}
