use hyperdamp::damping::{DampingField, DampingPreset};
use hyperdamp::geometry::{hyperbolic_distance, Complex, FundamentalDomain, GeodesicState, MobiusTransform};
use hyperdamp::mesh::{assemble, build_mesh, AssembledOperators};
use hyperdamp::words::{count_words, WordParameters};
use proptest::prelude::*;
use std::f64::consts::{PI, TAU};
use std::sync::OnceLock;

fn disk_point() -> impl Strategy<Value = Complex> {
    (0.0..0.95f64, 0.0..TAU).prop_map(|(r, t)| Complex::from_polar(r, t))
}

fn state_near_origin() -> impl Strategy<Value = GeodesicState> {
    ((0.0..0.6f64, 0.0..TAU).prop_map(|(r, t)| Complex::from_polar(r, t)), -PI..PI)
        .prop_map(|(z, d)| GeodesicState::new(z, d))
}

fn bump_ops() -> &'static AssembledOperators {
    static OPS: OnceLock<AssembledOperators> = OnceLock::new();
    OPS.get_or_init(|| {
        let mesh = build_mesh(2).unwrap();
        assemble(&mesh, &DampingPreset::SingleBump.field().unwrap()).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mobius_maps_are_isometries(z1 in disk_point(), z2 in disk_point(), angle in 0.0..TAU, len in 0.0..3.0f64, rot in 0.0..TAU) {
        let g = MobiusTransform::translation(angle, len).compose(&MobiusTransform::rotation(rot)).unwrap();
        let d0 = hyperbolic_distance(z1, z2).unwrap();
        let d1 = hyperbolic_distance(g.apply(z1), g.apply(z2)).unwrap();
        prop_assert!((d0 - d1).abs() <= 1e-8 * (1.0 + d0));
    }

    #[test]
    fn flow_is_a_semigroup(s in state_near_origin(), t1 in 0.0..5.0f64, t2 in 0.0..5.0f64) {
        let domain = FundamentalDomain::bolza();
        let two = domain.flow(&domain.flow(&s, t1).unwrap(), t2).unwrap();
        let one = domain.flow(&s, t1 + t2).unwrap();
        prop_assert!(two.separation(&one) <= 1e-8);
    }

    #[test]
    fn unwrap_lands_in_the_octagon(z in disk_point()) {
        let domain = FundamentalDomain::bolza();
        if let Ok((rep, deck)) = domain.unwrap(z) {
            prop_assert!(domain.contains(rep));
            prop_assert!((deck.apply(rep) - z).norm() <= 1e-9 * (1.0 + 1.0 / (1.0 - z.norm_sqr())));
        }
    }

    #[test]
    fn bump_field_is_invariant_under_generators(z in (0.0..0.7f64, 0.0..TAU).prop_map(|(r, t)| Complex::from_polar(r, t)), j in 0usize..8) {
        let a = DampingPreset::AxisAvoidingBump.field().unwrap();
        let g = a.domain().pairings()[j];
        let v0 = a.evaluate(z).unwrap();
        let v1 = a.evaluate(g.apply(z)).unwrap();
        prop_assert!((v0 - v1).abs() <= 1e-10);
    }

    #[test]
    fn integrated_damping_is_nondecreasing_in_time(s in state_near_origin()) {
        let a = DampingPreset::SingleBump.field().unwrap();
        let grid: Vec<f64> = (1..=12).map(|k| 0.75 * k as f64).collect();
        let avgs = a.flow_averages_on_grid(&s, &grid).unwrap();
        let integrals: Vec<f64> = grid.iter().zip(&avgs).map(|(t, v)| t * v).collect();
        for w in integrals.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-12);
        }
        for v in &avgs {
            prop_assert!(*v >= -1e-12 && *v <= a.sup_norm() + 1e-12);
        }
    }

    #[test]
    fn damping_form_is_bounded_by_the_mass_form(v in prop::collection::vec(-1.0..1.0f64, 1..200), shift in -1.0..1.0f64) {
        let ops = bump_ops();
        let x: Vec<f64> = (0..ops.dof_count).map(|i| v[i % v.len()] + shift * (i as f64).sin()).collect();
        let av = ops.a.quadratic_form(&x);
        let mv = ops.m.quadratic_form(&x);
        prop_assert!(av >= -1e-12 * mv);
        prop_assert!(av <= ops.damping_sup * mv * (1.0 + 1e-12));
        prop_assert!(ops.k.quadratic_form(&x) >= -1e-10 * mv);
    }

    #[test]
    fn word_counts_partition_the_cube(n0 in 1u64..60, tenths in 1u32..10) {
        let p = WordParameters::with_n0(n0, tenths as f64 / 10.0).unwrap();
        let c = count_words(&p).unwrap();
        prop_assert_eq!(&c.z_count + &c.q_count, c.total.clone());
        prop_assert_eq!(c.total, num_bigint::BigUint::from(2u32).pow(n0 as u32));
    }
}

#[test]
fn constant_averages_are_exact() {
    let a = DampingField::constant(0.25).unwrap();
    let s = GeodesicState::new(Complex::new(0.1, -0.2), 1.0);
    for t in [0.3, 1.0, 7.5, 19.0] {
        assert!((a.flow_average(&s, t).unwrap() - 0.25).abs() < 1e-12);
    }
}
