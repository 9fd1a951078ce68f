use dmpp_core::basis::BasisModel;
use proptest::prelude::*;

proptest! {
    #[test]
    fn normalised_and_differentiable(k in 2usize..80, width in 0.3..3.0f64, s in 0.0..1.0f64) {
        let b = BasisModel::new(k, width).unwrap();
        let v = b.eval(s);
        prop_assert!((v.value.sum() - 1.0).abs() < 1e-12);
        prop_assert!(v.value.iter().all(|&p| p >= 0.0));
        let h = 1e-6;
        let fd = (b.phi(s + h) - b.phi(s - h)) / (2.0 * h);
        let scale = 1.0 + v.d1.amax();
        prop_assert!((fd - &v.d1).amax() < 1e-5 * scale);
        let fd2 = (b.eval(s + h).d1 - b.eval(s - h).d1) / (2.0 * h);
        let scale2 = 1.0 + v.d2.amax();
        prop_assert!((fd2 - &v.d2).amax() < 1e-5 * scale2);
    }

    #[test]
    fn extreme_phases_stay_finite(k in 2usize..200, width in 0.01..5.0f64, s in -1.0..2.0f64) {
        let b = BasisModel::new(k, width).unwrap();
        let v = b.eval(s);
        prop_assert!(v.value.iter().chain(v.d1.iter()).chain(v.d2.iter()).all(|x| x.is_finite()));
    }
}
