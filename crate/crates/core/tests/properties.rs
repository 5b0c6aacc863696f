use convdiss::diagnostics::{lebesgue_norm, sup_norm};
use convdiss::experiments::{rough_coefficients, ROUGH_MODES};
use convdiss::grid::{diff_operator, make_grid, solve_banded, BcScheme, Field};
use convdiss::stepper::{adapt_dt, estimate_blowup_time, StepControls};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn scheme(order: usize, pick: u8) -> BcScheme {
    match (order, pick % 2) {
        (1 | 2, 0) => BcScheme::DirichletPair,
        (3, 0) => BcScheme::KdVMixed,
        _ => BcScheme::SimplySupported,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn banded_solve_matches_dense(
        n in 8usize..48,
        order in 1usize..=4,
        pick in 0u8..2,
        dt in 1e-6f64..1e-2,
        seed in proptest::collection::vec(-1.0f64..1.0, 48),
    ) {
        let g = make_grid(n).unwrap();
        let op = diff_operator(g, order, scheme(order, pick)).unwrap();
        let sign = if order >= 3 { -1.0 } else { 1.0 };
        let op = op.scaled(sign);
        let mut rhs = vec![0.0; n + 1];
        rhs[1..n].copy_from_slice(&seed[..n - 1]);
        let u = solve_banded(&op, dt, &Field::new(g, rhs.clone()).unwrap()).unwrap();
        let dense = op.to_dense();
        let m = n - 1;
        let a = DMatrix::from_fn(m, m, |i, j| if i == j { 1.0 } else { 0.0 } - dt * dense[i][j]);
        let x = a.lu().solve(&DVector::from_column_slice(&rhs[1..n])).unwrap();
        let scale = 1.0 + x.amax();
        for i in 0..m {
            prop_assert!((u.values()[i + 1] - x[i]).abs() <= 1e-9 * scale);
        }
        prop_assert_eq!(u.values()[0], 0.0);
        prop_assert_eq!(u.values()[n], 0.0);
    }

    #[test]
    fn controller_stays_in_bounds(err in 0.0f64..1e6, dt in 1e-12f64..0.05, order in 1u32..=2) {
        let c = StepControls::default();
        let next = adapt_dt(err, dt, order, &c);
        prop_assert!(next >= c.dt_min && next <= c.dt_max);
    }

    #[test]
    fn estimator_recovers_power_law(t_blow in 0.5f64..10.0, q in 0.5f64..3.0) {
        let samples: Vec<(f64, f64)> = (1..=8)
            .map(|k| {
                let t = t_blow * (1.0 - 0.5f64.powi(k));
                (t, (t_blow - t).powf(-1.0 / q))
            })
            .collect();
        let est = estimate_blowup_time(&samples, q).unwrap();
        prop_assert!((est - t_blow).abs() <= 1e-9 * t_blow);
    }

    #[test]
    fn l2_bounded_by_sup(values in proptest::collection::vec(-5.0f64..5.0, 15)) {
        let mut v = vec![0.0];
        v.extend(values);
        v.push(0.0);
        let u = Field::new(make_grid(16).unwrap(), v).unwrap();
        prop_assert!(lebesgue_norm(&u, 2.0).unwrap() <= 2f64.sqrt() * sup_norm(&u) + 1e-12);
    }

    #[test]
    fn rough_coefficients_are_reproducible(seed in any::<u64>()) {
        let c = rough_coefficients(seed);
        prop_assert_eq!(c.len(), ROUGH_MODES);
        prop_assert_eq!(&c, &rough_coefficients(seed));
        for (m, v) in c.iter().enumerate() {
            prop_assert!(v.abs() <= 1.0 / (m + 1) as f64);
        }
    }
}
