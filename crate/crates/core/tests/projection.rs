//! Properties of the capped-simplex projection.

use cache_regret_core::geometry::project_capped_simplex;
use proptest::prelude::*;

fn input() -> impl Strategy<Value = (Vec<f64>, usize)> {
    (1usize..40).prop_flat_map(|n| (prop::collection::vec(-3.0f64..4.0, n), 1..=n))
}

proptest! {
    #[test]
    fn feasible_and_clipped((v, c) in input()) {
        let p = project_capped_simplex(&v, c).unwrap();
        let y = &p.projected;
        prop_assert!(y.iter().all(|&x| (0.0..=1.0).contains(&x)));
        prop_assert!(y.iter().sum::<f64>() <= c as f64 + 1e-9);
        prop_assert!(p.multiplier >= 0.0);
        for (yi, vi) in y.iter().zip(&v) {
            prop_assert!((yi - (vi - p.multiplier).clamp(0.0, 1.0)).abs() <= 1e-9);
        }
    }

    #[test]
    fn idempotent((v, c) in input()) {
        let y = project_capped_simplex(&v, c).unwrap().projected;
        let z = project_capped_simplex(&y, c).unwrap().projected;
        for (a, b) in y.iter().zip(&z) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn non_expansive((v, c) in input(), shift in prop::collection::vec(-1.0f64..1.0, 40)) {
        let w: Vec<f64> = v.iter().zip(&shift).map(|(a, b)| a + b).collect();
        let pv = project_capped_simplex(&v, c).unwrap().projected;
        let pw = project_capped_simplex(&w, c).unwrap().projected;
        let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        prop_assert!(d(&pv, &pw) <= d(&v, &w) + 1e-9);
    }
}

#[test]
fn feasible_input_is_fixed() {
    let v = [0.2, 0.5, 0.0, 1.0];
    let p = project_capped_simplex(&v, 2).unwrap();
    assert_eq!(p.projected, v);
    assert_eq!(p.multiplier, 0.0);
}

#[test]
fn rejects_bad_input() {
    assert!(project_capped_simplex(&[0.5, f64::NAN], 1).is_err());
    assert!(project_capped_simplex(&[0.5, 0.5], 0).is_err());
}
