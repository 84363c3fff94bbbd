//! Property tests for the reflection machinery: the fast scan against the
//! exhaustive oracle, exact scale invariance, reflection involution, cap
//! nesting, and the monotonicity consequence of the reported plane.

use std::sync::Arc;

use proptest::prelude::*;

use parasym_core::domain::{Domain, Reflected};
use parasym_core::field::Field;
use parasym_core::reflection::{
    capital_lambda, capital_lambda_bruteforce, monotone_defect, symmetry_defect,
};

fn interval_domain() -> impl Strategy<Value = Arc<Domain>> {
    (4usize..=32, 0.5f64..3.0)
        .prop_map(|(half_cells, half_length)| {
            Domain::build_interval(half_length, 2 * half_cells).unwrap()
        })
}

fn rows_domain() -> impl Strategy<Value = Arc<Domain>> {
    (
        proptest::collection::vec(1usize..=8, 2..=6),
        0.1f64..1.0,
    )
        .prop_map(|(half_cells, h)| {
            let rows = Domain::rows_from_half_cells(&half_cells);
            Domain::build_symmetric_2d(h, &rows).unwrap()
        })
}

fn any_domain() -> impl Strategy<Value = Arc<Domain>> {
    prop_oneof![interval_domain(), rows_domain()]
}

fn field_on(domain: Arc<Domain>) -> impl Strategy<Value = Field> {
    let n = domain.interior_count();
    proptest::collection::vec(-1.0f64..1.0, n)
        .prop_map(move |values| Field::from_values(&domain, values).unwrap())
}

fn domain_and_field() -> impl Strategy<Value = Field> {
    any_domain().prop_flat_map(field_on)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn fast_scan_equals_exhaustive_oracle(z in domain_and_field()) {
        let fast = capital_lambda(&z, 1e-9);
        let brute = capital_lambda_bruteforce(&z, 1e-9).unwrap();
        prop_assert_eq!(fast, brute);
    }

    #[test]
    fn scaling_by_powers_of_two_is_invisible(
        z in domain_and_field(),
        exponent in -24i32..24,
    ) {
        let base = capital_lambda(&z, 1e-9);
        let scaled = capital_lambda(&z.scaled(2f64.powi(exponent)), 1e-9);
        prop_assert_eq!(base.lambda, scaled.lambda);
        prop_assert_eq!(base.witness.map(|w| (w.k_mu, w.node)),
                        scaled.witness.map(|w| (w.k_mu, w.node)));
    }

    #[test]
    fn generic_positive_scalings_agree(
        z in domain_and_field(),
        c in 1e-3f64..1e3,
    ) {
        let base = capital_lambda(&z, 1e-9);
        let scaled = capital_lambda(&z.scaled(c), 1e-9);
        prop_assert_eq!(base.lambda.k, scaled.lambda.k);
    }

    #[test]
    fn reflection_is_an_involution(domain in any_domain(), k_frac in 0.0f64..1.0) {
        let k = ((domain.half_steps() as f64) * k_frac) as usize;
        for i in 0..domain.interior_count() {
            let node = domain.node_of_interior(i);
            if let Reflected::Node { node: image, .. } = domain.reflect_node(k, node) {
                match domain.reflect_node(k, image) {
                    Reflected::Node { node: back, .. } => prop_assert_eq!(back, node),
                    Reflected::OffGrid => prop_assert!(false, "involution left the grid"),
                }
            }
        }
    }

    #[test]
    fn mirror_preserves_the_interior_mask(domain in any_domain()) {
        for i in 0..domain.interior_count() {
            let node = domain.node_of_interior(i);
            match domain.reflect_node(0, node) {
                Reflected::Node { in_interior, .. } => prop_assert!(in_interior),
                Reflected::OffGrid => prop_assert!(false, "mirror fell off the grid"),
            }
        }
    }

    #[test]
    fn caps_nest_as_the_plane_moves_right(domain in rows_domain()) {
        for k in 0..domain.half_steps().saturating_sub(1) {
            let coarse = domain.components_at(k);
            for comp in domain.components_at(k + 1) {
                let hits = coarse
                    .iter()
                    .filter(|big| comp.iter().all(|i| big.binary_search(i).is_ok()))
                    .count();
                prop_assert_eq!(hits, 1);
            }
        }
    }

    #[test]
    fn reported_plane_certifies_monotonicity(z in domain_and_field()) {
        let result = capital_lambda(&z, 1e-9);
        prop_assert!(monotone_defect(&z, result.lambda.value) <= result.tol_abs);
    }

    #[test]
    fn even_nonincreasing_profiles_have_zero_lambda(
        domain in interval_domain(),
        decay in 0.2f64..3.0,
        height in 0.1f64..2.0,
    ) {
        let z = Field::from_fn(&domain, |x, _| height * (-decay * x.abs()).exp());
        prop_assert_eq!(symmetry_defect(&z), 0.0);
        let result = capital_lambda(&z, 1e-9);
        prop_assert!(result.lambda.is_zero());
        prop_assert!(result.witness.is_none());
    }
}
