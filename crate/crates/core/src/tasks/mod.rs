//! Downstream tasks: kernel ridge regression and MMD two-sample testing.

pub mod data;
pub mod krr;
pub mod mmd;

pub use data::{krr_signal, synth_circle_data, synth_krr_data, synth_toy_pairs, Dataset, TwoSample};
pub use krr::{krr_predict, krr_predict_gram, krr_train, krr_train_gram, mse, solve_regularized, KrrModel};
pub use mmd::{mmd_squared, permutation_test, permutation_test_pooled, power, MmdReport};
