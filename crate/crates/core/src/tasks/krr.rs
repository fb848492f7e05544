//! Kernel ridge regression with a linear kernel on explicit features, or on
//! a precomputed Gram matrix.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::kernels::GramMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct KrrModel {
    pub alpha: Vec<f64>,
    pub training_features: DMatrix<f64>,
    pub eta: f64,
}

fn check_finite(name: &'static str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(name))
    }
}

/// Solve `(G + ηI)α = targets` by Cholesky, retrying once with a diagonal
/// jitter of `10⁻¹⁰·trace/N` if the factorization fails.
pub fn solve_regularized(gram: &DMatrix<f64>, targets: &[f64], eta: f64) -> Result<Vec<f64>> {
    if !gram.is_square() {
        return Err(Error::DimensionMismatch { expected: gram.nrows(), actual: gram.ncols() });
    }
    check_len(gram.nrows(), targets.len())?;
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::invalid("eta", format!("must be positive, got {eta}")));
    }
    check_finite("gram", gram.as_slice())?;
    check_finite("targets", targets)?;
    let n = gram.nrows();
    let rhs = DVector::from_column_slice(targets);
    let mut a = (gram + gram.transpose()) * 0.5 + DMatrix::identity(n, n) * eta;
    if let Some(chol) = a.clone().cholesky() {
        return Ok(chol.solve(&rhs).iter().copied().collect());
    }
    let jitter = 1e-10 * a.trace().abs() / n.max(1) as f64;
    for i in 0..n {
        a[(i, i)] += jitter;
    }
    a.cholesky()
        .map(|chol| chol.solve(&rhs).iter().copied().collect())
        .ok_or_else(|| Error::Solve(format!("G + ηI is not positive definite (n = {n}, η = {eta})")))
}

/// Dual coefficients for a precomputed (exact or approximate) Gram matrix.
pub fn krr_train_gram(gram: &GramMatrix, targets: &[f64], eta: f64) -> Result<Vec<f64>> {
    solve_regularized(&gram.entries, targets, eta)
}

/// Linear-kernel ridge regression on the rows of `features` (`N × p`).
pub fn krr_train(features: &DMatrix<f64>, targets: &[f64], eta: f64) -> Result<KrrModel> {
    if features.nrows() == 0 {
        return Err(Error::invalid("features", "need at least one training row"));
    }
    check_finite("features", features.as_slice())?;
    let gram = features * features.transpose();
    let alpha = solve_regularized(&gram, targets, eta)?;
    Ok(KrrModel {
        alpha,
        training_features: features.clone(),
        eta,
    })
}

/// `(test · trainᵀ) · α`.
pub fn krr_predict(model: &KrrModel, test_features: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_len(model.training_features.ncols(), test_features.ncols())?;
    if test_features.nrows() == 0 {
        return Ok(Vec::new());
    }
    let w = model.training_features.transpose() * DVector::from_column_slice(&model.alpha);
    Ok((test_features * w).iter().copied().collect())
}

/// Predictions `cross · α` from an `M × N` matrix of kernel values against the training set.
pub fn krr_predict_gram(alpha: &[f64], cross: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_len(cross.ncols(), alpha.len())?;
    Ok((cross * DVector::from_column_slice(alpha)).iter().copied().collect())
}

pub fn mse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_len(truth.len(), pred.len())?;
    if pred.is_empty() {
        return Err(Error::invalid("test set", "must not be empty"));
    }
    Ok(pred.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / pred.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{KernelSpec, RffMap};
    use crate::kernels::{gram_exact, rbf_kernel};
    use crate::pipeline::{Method, Pipeline, Role};
    use crate::rng::rng_from_seed;
    use crate::tasks::data::synth_krr_data;
    use proptest::prelude::*;
    use rand::Rng;

    fn residual(features: &DMatrix<f64>, model: &KrrModel, targets: &[f64]) -> f64 {
        let g = features * features.transpose();
        let n = g.nrows();
        let a = DVector::from_column_slice(&model.alpha);
        let r = (g + DMatrix::identity(n, n) * model.eta) * a - DVector::from_column_slice(targets);
        r.norm()
    }

    #[test]
    fn zero_features_return_targets() {
        let f = DMatrix::zeros(3, 4);
        let model = krr_train(&f, &[1.0, -2.0, 0.5], 1.0).unwrap();
        assert_eq!(model.alpha, vec![1.0, -2.0, 0.5]);
        let pred = krr_predict(&model, &DMatrix::zeros(2, 4)).unwrap();
        assert_eq!(pred, vec![0.0, 0.0]);
        assert!(krr_predict(&model, &DMatrix::zeros(0, 4)).unwrap().is_empty());
        assert!(krr_predict(&model, &DMatrix::zeros(1, 3)).is_err());
    }

    #[test]
    fn orthonormal_rows_halve_targets() {
        let f = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let model = krr_train(&f, &[4.0, -6.0], 1.0).unwrap();
        assert!((model.alpha[0] - 2.0).abs() < 1e-15 && (model.alpha[1] + 3.0).abs() < 1e-15);
    }

    #[test]
    fn small_eta_interpolates() {
        let f = DMatrix::from_row_slice(2, 2, &[0.6, 0.8, -0.8, 0.6]);
        let model = krr_train(&f, &[3.0, 7.0], 1e-9).unwrap();
        let pred = krr_predict(&model, &f.rows(1, 1).into_owned()).unwrap();
        assert!((pred[0] - 7.0).abs() < 1e-6);
    }

    #[test]
    fn residual_contract() {
        let mut rng = rng_from_seed(4);
        let f = DMatrix::from_fn(80, 30, |_, _| rng.random_range(-1.0..1.0));
        let y: Vec<f64> = (0..80).map(|_| rng.random_range(-5.0..5.0)).collect();
        let model = krr_train(&f, &y, 0.5).unwrap();
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(residual(&f, &model, &y) <= 1e-8 * norm);
    }

    #[test]
    fn rejects_bad_inputs() {
        let f = DMatrix::from_row_slice(1, 1, &[f64::NAN]);
        assert!(matches!(krr_train(&f, &[1.0], 1.0), Err(Error::NonFinite(_))));
        let ok = DMatrix::from_row_slice(1, 1, &[1.0]);
        assert!(matches!(krr_train(&ok, &[f64::INFINITY], 1.0), Err(Error::NonFinite(_))));
        assert!(krr_train(&ok, &[1.0], 0.0).is_err());
        assert!(krr_train(&ok, &[1.0, 2.0], 1.0).is_err());
    }

    #[test]
    fn gram_solver_matches_closed_form() {
        let gram = GramMatrix {
            entries: DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]),
            kind: crate::kernels::GramKind::Exact,
        };
        let alpha = krr_train_gram(&gram, &[1.0, 2.0], 1.0).unwrap();
        // [[2, .5], [.5, 2]]⁻¹ [1, 2]
        assert!((alpha[0] - 1.0 / 3.75).abs() < 1e-12);
        assert!((alpha[1] - 3.5 / 3.75).abs() < 1e-12);
    }

    #[test]
    fn feature_and_gram_routes_agree() {
        let data = synth_krr_data(120, 0);
        let (train, test) = data.split(100).unwrap();
        let map = RffMap::sample(KernelSpec::rbf(0.2, 5).unwrap(), 64, 1).unwrap();
        let p = Pipeline::new(map, Method::Rff).unwrap();
        let tr = p.encode_batch(&train.x, 0).unwrap();
        let te = p.encode_batch(&test.x, 1).unwrap();
        let ftr = p.feature_matrix(&tr, Role::Train).unwrap();
        let fte = p.feature_matrix(&te, Role::Query).unwrap();
        let model = krr_train(&ftr, &train.y, 1.0).unwrap();
        let fast = krr_predict(&model, &fte).unwrap();
        let alpha = krr_train_gram(&p.gram(&tr).unwrap(), &train.y, 1.0).unwrap();
        let cross = DMatrix::from_fn(te.len(), tr.len(), |i, j| p.estimate(&tr[j], &te[i]).unwrap());
        let slow = krr_predict_gram(&alpha, &cross).unwrap();
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn exact_krr_beats_mean_predictor() {
        let data = synth_krr_data(600, 3);
        let (train, test) = data.split(500).unwrap();
        let gram = gram_exact(&train.x, 0.2).unwrap();
        let alpha = krr_train_gram(&gram, &train.y, 1.0).unwrap();
        let cross = DMatrix::from_fn(test.len(), train.len(), |i, j| {
            rbf_kernel(&test.x[i], &train.x[j], 0.2).unwrap()
        });
        let err = mse(&krr_predict_gram(&alpha, &cross).unwrap(), &test.y).unwrap();
        let mean = test.y.iter().sum::<f64>() / test.y.len() as f64;
        let base = mse(&vec![mean; test.len()], &test.y).unwrap();
        assert!(err < 0.5 * base, "{err} vs {base}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn larger_eta_shrinks_alpha(seed in 0u64..10_000, eta in 0.01f64..5.0, factor in 1.0f64..10.0) {
            let mut rng = rng_from_seed(seed);
            let f = DMatrix::from_fn(12, 5, |_, _| rng.random_range(-1.0..1.0));
            let y: Vec<f64> = (0..12).map(|_| rng.random_range(-3.0..3.0)).collect();
            let a = krr_train(&f, &y, eta).unwrap();
            let b = krr_train(&f, &y, eta * factor).unwrap();
            let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!(norm(&b.alpha) <= norm(&a.alpha) * (1.0 + 1e-10));
        }
    }
}
