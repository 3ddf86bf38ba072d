//! Property tests for projector algebra, projections, right-hand sides and trace distance.

use nalgebra::{Complex, DMatrix};
use proptest::prelude::*;

use radpair_core::analysis::trace_distance;
use radpair_core::master::{rhs_mixture, rhs_normalized, rhs_traced};
use radpair_core::spin::{conditional_projected_state, validate_density, Axis, CMatrix, DENSITY_TOL};
use radpair_core::{DensityMatrix, Model, ModelSpec, Preset, SpinSystem};

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |a, z| a.max(z.norm()))
}

/// ρ = G G† / Tr{G G†} for a random complex G.
fn random_density(dim: usize) -> impl Strategy<Value = DensityMatrix> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), dim * dim).prop_map(move |v| {
        let g = DMatrix::from_iterator(dim, dim, v.into_iter().map(|(re, im)| Complex::new(re, im)));
        let m = &g * g.adjoint();
        let tr = m.trace().re;
        let m = m.unscale(tr);
        DensityMatrix::new((&m + m.adjoint()).scale(0.5)).expect("Gram matrices are valid states")
    })
}

/// Random state supported entirely in the triplet subspace.
fn random_triplet_density() -> impl Strategy<Value = DensityMatrix> {
    random_density(4).prop_map(|rho| {
        let qt = SpinSystem::new(0).unwrap().triplet_projector();
        conditional_projected_state(&rho, &qt).unwrap()
    })
}

#[test]
fn projector_identities_exact() {
    for n in 0..=2 {
        let sys = SpinSystem::new(n).unwrap();
        let p = sys.projectors();
        let qs = p.singlet().matrix();
        let qt = p.triplet().matrix();
        let id = CMatrix::identity(sys.dim(), sys.dim());
        assert!(max_abs(&(qs * qs - qs)) < 1e-14, "QS² n={n}");
        assert!(max_abs(&(qt * qt - qt)) < 1e-14, "QT² n={n}");
        assert!(max_abs(&(qs * qt)) < 1e-14, "QS·QT n={n}");
        assert!(max_abs(&(qt * qs)) < 1e-14, "QT·QS n={n}");
        assert!(max_abs(&(qs + qt - id)) < 1e-14, "QS+QT n={n}");
        assert!((qs.trace().re - (1 << n) as f64).abs() < 1e-14);
    }
}

#[test]
fn total_spin_squared_is_two_on_triplets() {
    // S² = Σ_a (S1a + S2a)² is 2·QT on the electron pair.
    let sys = SpinSystem::new(0).unwrap();
    let mut s2 = CMatrix::zeros(4, 4);
    for axis in Axis::ALL {
        let total = sys.spin_operator(0, axis).unwrap().into_matrix() + sys.spin_operator(1, axis).unwrap().into_matrix();
        s2 += &total * &total;
    }
    let qt = sys.triplet_projector().into_matrix();
    assert!(max_abs(&(s2 - qt.scale(2.0))) < 1e-14);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn projection_has_unit_trace_and_stays_in_range(rho in random_density(8), singlet in any::<bool>()) {
        let sys = SpinSystem::new(1).unwrap();
        let q = if singlet { sys.singlet_projector() } else { sys.triplet_projector() };
        let out = conditional_projected_state(&rho, &q).unwrap();
        prop_assert!((out.trace() - 1.0).abs() < 1e-12);
        let qoq = q.matrix() * out.matrix() * q.matrix();
        prop_assert!(max_abs(&(qoq - out.matrix())) < 1e-12);
        prop_assert!(validate_density(&out, DENSITY_TOL).ok);
    }

    #[test]
    fn trace_preserving_rhs_are_traceless(rho in random_density(4)) {
        let sys = SpinSystem::new(0).unwrap();
        let spec = ModelSpec::new(&sys, Model::Normalized, 1.7).unwrap();
        let n = rhs_normalized(&rho, &spec).unwrap();
        let m = rhs_mixture(&rho, &spec).unwrap();
        prop_assert!(n.trace().norm() < 1e-12);
        prop_assert!(m.trace().norm() < 1e-12);
        prop_assert!(n.is_hermitian(1e-12) && m.is_hermitian(1e-12));
    }

    #[test]
    fn traced_rhs_trace_law(rho in random_density(4)) {
        let sys = SpinSystem::new(0).unwrap();
        let spec = ModelSpec::new(&sys, Model::TraceDecaying, 0.8).unwrap();
        let out = rhs_traced(&rho, &spec).unwrap();
        let expected = -0.8 * spec.projectors().singlet_weight(rho.matrix());
        prop_assert!((out.trace().re - expected).abs() < 1e-12);
        prop_assert!(out.is_hermitian(1e-12));
    }

    #[test]
    fn triplet_states_are_fixed_points(rho in random_triplet_density()) {
        let sys = SpinSystem::new(0).unwrap();
        let spec = ModelSpec::new(&sys, Model::Mixture, 1.0).unwrap();
        prop_assert!(rhs_traced(&rho, &spec).unwrap().max_abs() < 1e-12);
        prop_assert!(rhs_normalized(&rho, &spec).unwrap().max_abs() < 1e-12);
        prop_assert!(rhs_mixture(&rho, &spec).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn trace_distance_is_a_metric(a in random_density(4), b in random_density(4), c in random_density(4)) {
        let ab = trace_distance(&a, &b).unwrap();
        let bc = trace_distance(&b, &c).unwrap();
        let ac = trace_distance(&a, &c).unwrap();
        prop_assert!(ac <= ab + bc + 1e-10);
        prop_assert!((ab - trace_distance(&b, &a).unwrap()).abs() < 1e-12);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&ab));
        prop_assert!(trace_distance(&a, &a).unwrap() < 1e-14);
    }
}

#[test]
fn presets_validate_for_every_size() {
    for n in 0..=2 {
        let sys = SpinSystem::new(n).unwrap();
        for preset in Preset::ALL {
            assert!(validate_density(&sys.density_from_preset(preset), DENSITY_TOL).ok);
        }
    }
}
