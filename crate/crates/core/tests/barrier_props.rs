use dmpp_core::environment::Obstacle;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn ellipsoid() -> Obstacle {
    let sigma = DMatrix::from_row_slice(3, 3, &[0.09, 0.01, 0.0, 0.01, 0.04, 0.0, 0.0, 0.0, 0.16]);
    Obstacle::ellipsoid(DVector::from_row_slice(&[0.5, -0.2, 0.1]), sigma, 0.6, 1.5).unwrap()
}

fn plane() -> Obstacle {
    Obstacle::plane(
        DVector::from_row_slice(&[0.2, 0.3, 1.0]),
        DVector::from_row_slice(&[0.0, 0.0, -0.5]),
        0.2,
        2.0,
    )
    .unwrap()
}

/// `f = -k_o dV/dy` by central differences of `k_o V`.
fn check(o: &Obstacle, y: &DVector<f64>) -> Result<(), TestCaseError> {
    let f = o.repulsive_force(y, 0).unwrap();
    let h = 1e-7;
    for i in 0..y.len() {
        let mut yp = y.clone();
        let mut ym = y.clone();
        yp[i] += h;
        ym[i] -= h;
        let g = o.gain * (o.potential(&yp) - o.potential(&ym)) / (2.0 * h);
        prop_assert!(
            (f[i] + g).abs() < 1e-5 * (1.0 + f.amax()),
            "{} vs {}",
            f[i],
            -g
        );
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn ellipsoid_force_is_barrier_gradient(dir in (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64), scale in 1.05..1.5f64) {
        let o = ellipsoid();
        let d = DVector::from_row_slice(&[dir.0, dir.1, dir.2]);
        prop_assume!(d.norm() > 0.1);
        let y = DVector::from_row_slice(&[0.5, -0.2, 0.1]) + d.normalize() * (0.2 * scale);
        prop_assume!(o.surface_value(&y) > 0.02 && o.surface_value(&y) < o.d0);
        check(&o, &y)?;
    }

    #[test]
    fn plane_force_is_barrier_gradient(x in -1.0..1.0f64, y in -1.0..1.0f64, z in -0.55..0.0f64) {
        let o = plane();
        let p = DVector::from_row_slice(&[x, y, z]);
        prop_assume!(o.surface_value(&p) > 0.01);
        check(&o, &p)?;
    }
}
