use canosys::evans::evans_real_zeros;
use canosys::{
    count_zeros_winding, eigenvalues_in, sturm_liouville_to_canonical, BoundaryCondition, EvansOptions, Geometry,
    LagrangianFrame, Rectangle, ScalarFn, SpectralOptions, SymplecticDim,
};

fn poschl_teller(ell: u32, geometry: Geometry) -> canosys::CanonicalProblem {
    let (left, right) = match geometry {
        Geometry::FullLine { .. } => (BoundaryCondition::Asymptotic, BoundaryCondition::Asymptotic),
        _ => {
            let f = BoundaryCondition::Frame(LagrangianFrame::dirichlet(SymplecticDim::new(1).unwrap()));
            (f.clone(), f)
        }
    };
    sturm_liouville_to_canonical(
        ScalarFn::Constant(1.0),
        ScalarFn::poschl_teller(ell),
        ScalarFn::Constant(1.0),
        geometry,
        left,
        right,
    )
    .unwrap()
}

// bound states of -ℓ(ℓ+1) sech² are -(ℓ - k)², k < ℓ
fn closed_form(ell: u32) -> Vec<f64> {
    (0..ell).map(|k| -((ell - k) as f64).powi(2)).collect()
}

#[test]
fn evans_zeros_match_the_truncated_bounded_problem() {
    for ell in 1..=3 {
        let expected = closed_form(ell);
        let lo = expected[0] - 1.0;
        let line = poschl_teller(ell, Geometry::FullLine { half_length: 15.0 });
        let zeros = evans_real_zeros(&line, lo, -0.2, 200, 1e-6, &EvansOptions::default()).unwrap();
        let bounded = poschl_teller(ell, Geometry::Bounded { a: -15.0, b: 15.0 });
        let eig = eigenvalues_in(&bounded, lo, -0.2, 200, &SpectralOptions::default()).unwrap();
        let eig: Vec<f64> = eig.eigenpairs.iter().map(|p| p.lambda).collect();
        assert_eq!(zeros.len(), expected.len(), "ell = {ell}: {zeros:?}");
        assert_eq!(eig.len(), expected.len(), "ell = {ell}: {eig:?}");
        for ((z, e), c) in zeros.iter().zip(&eig).zip(&expected) {
            assert!((z - c).abs() < 1e-4, "ell = {ell}: evans {z} vs {c}");
            assert!((e - c).abs() < 1e-4, "ell = {ell}: bounded {e} vs {c}");
            assert!((z - e).abs() < 1e-4, "ell = {ell}: evans {z} vs bounded {e}");
        }
    }
}

#[test]
fn winding_counts_every_bound_state() {
    let line = poschl_teller(3, Geometry::FullLine { half_length: 15.0 });
    let all = count_zeros_winding(&line, Rectangle::new(-10.0, -0.5, -1.0, 1.0).unwrap(), &EvansOptions::default())
        .unwrap();
    assert_eq!(all.count, 3);
    // the mean of the enclosed zeros is the mean of the closed form
    let mean = all.mean_zero().unwrap();
    assert!((mean.re + 14.0 / 3.0).abs() < 1e-4 && mean.im.abs() < 1e-6, "{mean}");
    let none = count_zeros_winding(&line, Rectangle::new(-3.5, -1.5, -1.0, 1.0).unwrap(), &EvansOptions::default())
        .unwrap();
    assert_eq!(none.count, 0);
}
