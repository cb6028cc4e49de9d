mod oracles;

use oracles::*;

#[test]
fn svdd_gradients_match_central_differences() {
    for check in svdd_gradient_check(11) {
        assert_eq!(check.checked, FD_SAMPLES, "{check:?}");
        assert!(check.max_rel_err < 1e-4, "{check:?}");
    }
}

#[test]
fn autoencoder_gradients_match_central_differences() {
    let checks = ae_gradient_check(12);
    assert_eq!(checks.len(), 8);
    for check in checks {
        assert!(check.max_rel_err < 1e-4, "{check:?}");
    }
}

#[test]
fn buffer_matches_weighted_sum() {
    assert!(buffer_check(1000, 13) <= 1e-12);
}

#[test]
fn pca_matches_jacobi() {
    let c = pca_check(100, 14);
    assert!(c.max_value_err <= 1e-8, "{c:?}");
    assert!(c.max_vector_err <= 1e-8, "{c:?}");
    assert_eq!(c.k_mismatches, 0);
}

#[test]
fn jacobi_oracle_diagonalizes() {
    let a = vec![vec![4.0, 1.0, 0.5], vec![1.0, 3.0, 0.2], vec![0.5, 0.2, 1.0]];
    let (values, vectors) = jacobi_eigen(&a);
    for (l, v) in values.iter().zip(&vectors) {
        for i in 0..3 {
            let av: f64 = (0..3).map(|j| a[i][j] * v[j]).sum();
            assert!((av - l * v[i]).abs() < 1e-12);
        }
    }
    assert!((values.iter().sum::<f64>() - 8.0).abs() < 1e-12);
}

#[test]
fn eer_matches_sweep_and_bisection() {
    let (eer, threshold) = eer_check(100, 15);
    assert!(eer <= 1e-9, "eer deviation {eer}");
    assert!(threshold <= 1e-9, "threshold deviation {threshold}");
}

#[test]
fn eer_oracle_known_values() {
    assert_eq!(eer_oracle(&[0.0, 0.0], &[1.0, 1.0]), (0.0, 0.5));
    let (eer, _) = eer_oracle(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]);
    assert!((eer - 0.5).abs() < 1e-12);
}

#[test]
fn baseline_encoders_match_oracles() {
    let c = encoder_check(50, 16);
    assert_eq!(c.rp_mismatches, 0);
    assert!(c.rp_diagonal_ok);
    assert!(c.gaf_max_err <= 1e-12, "{c:?}");
    assert!(c.gaf_symmetric);
    assert_eq!(c.mtf_mismatches, 0);
    assert!(c.mtf_in_unit);
}
