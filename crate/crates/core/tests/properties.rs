use proptest::prelude::*;

use dnrisk::evaluation::{auc, auc_mann_whitney, calibration_curve, CalibrationOptions};
use dnrisk::explain::{base_value, tree_shap};
use dnrisk::learners::{fit_gbdt, fit_random_forest_with, ForestParams, GbdtParams};
use dnrisk::{Execution, FeatureMatrix};

fn labelled() -> impl Strategy<Value = (Vec<u8>, Vec<f64>)> {
    (4usize..120).prop_flat_map(|n| {
        (
            proptest::collection::vec(0u8..2, n),
            proptest::collection::vec(0u8..6, n).prop_map(|v| v.into_iter().map(f64::from).collect()),
        )
    })
}

fn design() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<u8>)> {
    (20usize..60, 1usize..5).prop_flat_map(|(n, p)| {
        (
            proptest::collection::vec(proptest::collection::vec(-2.0f64..2.0, p), n),
            proptest::collection::vec(0u8..2, n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trapezoid_auc_equals_pair_count((mut y, s) in labelled()) {
        y[0] = 0;
        y[1] = 1;
        let a = auc(&y, &s).unwrap();
        let b = auc_mann_whitney(&y, &s).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn fitted_gbdt_is_locally_accurate((rows, mut y) in design()) {
        y[0] = 0;
        y[1] = 1;
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        let params = GbdtParams { n_estimators: 10, max_depth: 3, subsample: 0.8, ..GbdtParams::default() };
        let m = fit_gbdt(&x, &y, &params, 3).unwrap();
        let shap = tree_shap(&m, &x).unwrap();
        let base = base_value(&m);
        for (i, row) in x.rows().enumerate() {
            let total = base + shap.row(i).iter().sum::<f64>();
            prop_assert!((total - m.margin(row)).abs() <= 1e-9);
        }
    }

    #[test]
    fn forest_is_schedule_independent((rows, mut y) in design()) {
        y[0] = 0;
        y[1] = 1;
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        let params = ForestParams { n_estimators: 12, max_depth: 4, ..ForestParams::default() };
        let a = fit_random_forest_with(&x, &y, &params, 5, Execution::Sequential).unwrap();
        let b = fit_random_forest_with(&x, &y, &params, 5, Execution::Parallel).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn calibration_bootstrap_is_schedule_independent() {
    let probs: Vec<f64> = (0..400).map(|i| (i as f64 + 0.5) / 400.0).collect();
    let y: Vec<u8> = probs
        .iter()
        .enumerate()
        .map(|(i, &p)| u8::from((i * 7919 % 400) as f64 / 400.0 < p))
        .collect();
    let opts = |exec| CalibrationOptions {
        n_bootstrap: 500,
        exec,
        ..CalibrationOptions::default()
    };
    let a = calibration_curve(&y, &probs, &opts(Execution::Sequential)).unwrap();
    let b = calibration_curve(&y, &probs, &opts(Execution::Parallel)).unwrap();
    assert_eq!(a, b);
}
