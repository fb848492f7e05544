//! Sanity checks on the statistical oracles used by the other suites.

mod common;

use common::{kolmogorov_sf, ks_uniform, median, ols_slope, std_error};

#[test]
fn kolmogorov_reference_points() {
    // Tabulated critical values: P(K > 1.3581) = 0.05, P(K > 1.6276) = 0.01.
    assert!((kolmogorov_sf(1.3581) - 0.05).abs() < 1e-4);
    assert!((kolmogorov_sf(1.6276) - 0.01).abs() < 1e-4);
    assert_eq!(kolmogorov_sf(0.0), 1.0);
}

#[test]
fn ks_accepts_grid_and_rejects_shifted_grid() {
    let grid: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
    let (d, p) = ks_uniform(&grid, 0.0, 1.0);
    assert!(d <= 0.0005 + 1e-12 && p > 0.99);
    let shifted: Vec<f64> = grid.iter().map(|v| v * 0.8).collect();
    assert!(ks_uniform(&shifted, 0.0, 1.0).1 < 1e-6);
}

#[test]
fn small_helpers() {
    assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
    assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    let xs = [1.0, 2.0, 3.0, 4.0];
    let ys: Vec<f64> = xs.iter().map(|x| 2.0 - 0.5 * x).collect();
    assert!((ols_slope(&xs, &ys) + 0.5).abs() < 1e-12);
    assert!((std_error(&[1.0, -1.0, 1.0, -1.0]) - (4.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-12);
}
