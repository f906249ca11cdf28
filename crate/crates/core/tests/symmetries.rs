use fbnorm::{norm_const, norm_const_grad, CanonicalParams, QuadSettings};
use proptest::prelude::*;

fn params_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..=8).prop_flat_map(|p| {
        (
            prop::collection::vec(0.0f64..50.0, p),
            prop::collection::vec(-10.0f64..10.0, p),
        )
    })
}

fn log_c(theta: &[f64], gamma: &[f64]) -> f64 {
    let params = CanonicalParams::new(theta.to_vec(), gamma.to_vec()).unwrap();
    norm_const(&params, &QuadSettings::default())
        .unwrap()
        .log_value
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(250))]

    #[test]
    fn shift_identity((theta, gamma) in params_strategy(), c in -20.0f64..20.0) {
        let shifted: Vec<f64> = theta.iter().map(|t| t + c).collect();
        // e^c C(θ + cI) = C(θ)
        let lhs = c + log_c(&shifted, &gamma);
        let rhs = log_c(&theta, &gamma);
        prop_assert!((lhs - rhs).abs() < 1e-8, "{lhs} vs {rhs}");
    }

    #[test]
    fn gamma_sign_invariance((theta, gamma) in params_strategy(), flips in prop::collection::vec(any::<bool>(), 8)) {
        let flipped: Vec<f64> = gamma.iter().zip(&flips).map(|(g, f)| if *f { -g } else { *g }).collect();
        prop_assert_eq!(log_c(&theta, &gamma).to_bits(), log_c(&theta, &flipped).to_bits());
    }

    #[test]
    fn permutation_invariance((theta, gamma) in params_strategy(), seed in any::<u64>()) {
        let p = theta.len();
        let mut order: Vec<usize> = (0..p).collect();
        let mut s = seed;
        for i in (1..p).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            order.swap(i, (s >> 33) as usize % (i + 1));
        }
        let tp: Vec<f64> = order.iter().map(|&i| theta[i]).collect();
        let gp: Vec<f64> = order.iter().map(|&i| gamma[i]).collect();
        let (a, b) = (log_c(&theta, &gamma), log_c(&tp, &gp));
        prop_assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }

    #[test]
    fn positive_with_small_imaginary_residual((theta, gamma) in params_strategy()) {
        let params = CanonicalParams::new(theta, gamma).unwrap();
        let r = norm_const(&params, &QuadSettings::default()).unwrap();
        prop_assert!(r.value.unwrap() > 0.0);
        prop_assert!(r.imag_residual < 1e-8);
    }

    #[test]
    fn gradient_trace_identity((theta, gamma) in params_strategy()) {
        let params = CanonicalParams::new(theta, gamma.clone()).unwrap();
        let g = norm_const_grad(&params, &QuadSettings::default()).unwrap();
        let c = g.log_value.exp();
        let total: f64 = g.dtheta.iter().sum();
        prop_assert!((total + c).abs() < 1e-8 * c, "{total} vs {}", -c);
        prop_assert!((g.dlog_theta.iter().sum::<f64>() + 1.0).abs() < 1e-8);
    }
}

#[test]
fn zero_gamma_components_have_zero_derivative() {
    let params = CanonicalParams::new(vec![0.0, 1.0, 4.0, 9.0], vec![0.0, 3.0, 0.0, -2.0]).unwrap();
    let g = norm_const_grad(&params, &QuadSettings::default()).unwrap();
    assert_eq!(g.dgamma[0], 0.0);
    assert_eq!(g.dgamma[2], 0.0);
}
