use std::f64::consts::PI;

use cone_exponents::{
    AngularKernel, ConeShape, ConeSpec, ExponentKind, ExponentResult, GridMeta, HomogeneousProfile, IndexedKernel,
    OperatorKind, OperatorSpec, QuadratureConfig, Validate,
};
use proptest::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

fn round_trip<T: Serialize + DeserializeOwned + Validate + PartialEq + std::fmt::Debug>(v: &T) {
    let text = serde_json::to_string(v).unwrap();
    let back: T = serde_json::from_str(&text).unwrap();
    assert_eq!(&back, v);
    assert_eq!(back.validate(), v.validate());
}

fn kind() -> impl Strategy<Value = OperatorKind> {
    prop_oneof![
        Just(OperatorKind::FractionalLaplacian),
        Just(OperatorKind::PucciPlus),
        Just(OperatorKind::PucciMinus),
        Just(OperatorKind::IsaacsFinite),
    ]
}

// arbitrary, often invalid, specs: the round trip must preserve the verdict too
fn operator() -> impl Strategy<Value = OperatorSpec> {
    (kind(), -0.5f64..3.0, -0.5f64..3.0, -0.2f64..1.2, prop::option::of(prop::collection::vec(0.5f64..2.5, 1..6)))
        .prop_map(|(kind, lambda_lower, lambda_upper, alpha, dens)| OperatorSpec {
            kind,
            lambda_lower,
            lambda_upper,
            alpha,
            kernels: dens.map(|d| vec![IndexedKernel { a: 0, b: 0, kernel: AngularKernel { density: d } }]),
        })
}

fn cone() -> impl Strategy<Value = ConeSpec> {
    let shape = prop_oneof![
        Just(ConeShape::FullSpace),
        prop::collection::vec(-1.0f64..1.0, 1..4).prop_map(|axis| ConeShape::HalfSpace { axis }),
        (-1.0f64..7.0).prop_map(|aperture| ConeShape::PlanarSector { aperture }),
        (-1.0f64..4.0).prop_map(|half_angle| ConeShape::AxisymmetricCap { half_angle }),
    ];
    (1usize..5, shape).prop_map(|(dimension, shape)| ConeSpec { dimension, shape })
}

fn quadrature() -> impl Strategy<Value = QuadratureConfig> {
    (1e-7f64..0.2, 0.01f64..1.2, 0.5f64..8.0, 1usize..12, 1usize..12, 1usize..20, 1e-8f64..1e-2).prop_map(
        |(r_min, eta, r_max, n_radial, n_angular, n_azimuthal, tol)| QuadratureConfig {
            r_min,
            eta,
            r_max,
            n_radial,
            n_angular,
            n_azimuthal,
            tol,
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn operator_round_trip(op in operator()) {
        round_trip(&op);
    }

    #[test]
    fn cone_round_trip(c in cone()) {
        round_trip(&c);
    }

    #[test]
    fn quadrature_round_trip(q in quadrature()) {
        round_trip(&q);
    }

    #[test]
    fn profile_round_trip(
        beta in -1.0f64..3.0,
        c in cone(),
        samples in prop::collection::vec(-0.5f64..2.0, 1..12),
        g in -0.2f64..1.2,
    ) {
        round_trip(&HomogeneousProfile { beta, cone: c, samples, boundary_grading: g });
    }

    #[test]
    fn exponent_result_round_trip(value in -1.0f64..3.0, lo in -1.0f64..3.0, w in 0.0f64..0.1, nodes in 0usize..40) {
        let r = ExponentResult {
            value,
            residual: w,
            bracket: (lo, lo + w),
            grid_meta: GridMeta { quadrature: QuadratureConfig::default(), profile_nodes: nodes, boundary_grading: 0.5 },
            kind: ExponentKind::BetaPlus,
            notes: vec![],
        };
        let back: ExponentResult = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        prop_assert_eq!(&back, &r);
        prop_assert_eq!(back.check_bounds(2, 0.5), r.check_bounds(2, 0.5));
    }

    // any unit axis in the plane canonicalises to the sector of aperture π
    #[test]
    fn half_plane_duality(t in 0.0f64..(2.0 * PI)) {
        let h = ConeSpec { dimension: 2, shape: ConeShape::HalfSpace { axis: vec![t.cos(), t.sin()] } };
        prop_assert!(h.validate().is_empty());
        prop_assert_eq!(h.canonical(), ConeSpec::sector(PI).canonical());
    }

    #[test]
    fn scaled_operator_keeps_its_verdict(c in 0.1f64..10.0, alpha in 0.05f64..0.95) {
        for op in [OperatorSpec::fractional(alpha), OperatorSpec::pucci_plus(alpha, 1.0, 2.0)] {
            prop_assert!(op.validate().is_empty());
            let s = op.scaled(c);
            prop_assert!(s.validate().is_empty());
            prop_assert!((s.lambda_upper - c * op.lambda_upper).abs() < 1e-12 * c);
        }
    }
}

fn messages<T: Validate>(v: &T) -> Vec<String> {
    v.validate().iter().map(ToString::to_string).collect()
}

#[test]
fn fractional_with_two_constants() {
    let op = OperatorSpec { kind: OperatorKind::FractionalLaplacian, lambda_lower: 1.0, lambda_upper: 2.0, alpha: 0.5, kernels: None };
    let m = messages(&op);
    assert_eq!(m.len(), 1);
    assert!(m[0].contains("FractionalLaplacian requires λ=Λ"), "{m:?}");
}

#[test]
fn sector_outside_the_plane() {
    let c = ConeSpec { dimension: 3, shape: ConeShape::PlanarSector { aperture: PI / 2.0 } };
    let m = messages(&c);
    assert_eq!(m.len(), 1);
    assert!(m[0].contains("PlanarSector requires N=2"), "{m:?}");
}

#[test]
fn inner_radius_beyond_the_ball() {
    let q = QuadratureConfig { r_min: 0.1, eta: 0.05, ..QuadratureConfig::default() };
    let m = messages(&q);
    assert_eq!(m.len(), 1);
    assert!(m[0].contains("requires r_min < eta"), "{m:?}");
}

#[test]
fn isaacs_kernels_must_be_bounded_and_even() {
    let odd = AngularKernel::planar_from_fn(16, |t| 1.5 + 0.4 * t.cos());
    let op = OperatorSpec::isaacs(0.5, 1.0, 2.0, vec![IndexedKernel { a: 0, b: 0, kernel: odd }]);
    assert!(!op.validate().is_empty());
    let high = AngularKernel::constant(3.0);
    let op = OperatorSpec::isaacs(0.5, 1.0, 2.0, vec![IndexedKernel { a: 0, b: 0, kernel: high }]);
    assert!(!op.validate().is_empty());
    assert!(OperatorSpec { kernels: Some(vec![]), ..OperatorSpec::pucci_plus(0.5, 1.0, 2.0) }
        .validate()
        .is_empty());
    let empty = OperatorSpec { kind: OperatorKind::IsaacsFinite, kernels: Some(vec![]), ..OperatorSpec::pucci_plus(0.5, 1.0, 2.0) };
    assert!(!empty.validate().is_empty());
}

#[test]
fn profiles_vanish_on_the_boundary() {
    let p = HomogeneousProfile { beta: 1.0, cone: ConeSpec::sector(PI), samples: vec![0.0, 0.5, 1.0, 0.5, 0.2], boundary_grading: 0.5 };
    assert!(!p.validate().is_empty());
    let p = HomogeneousProfile { samples: vec![0.0, 0.5, 1.0, 0.5, 0.0], ..p };
    assert!(p.validate().is_empty());
    let p = HomogeneousProfile { samples: vec![0.0, -0.1, 1.0, 0.5, 0.0], ..p };
    assert!(!p.validate().is_empty());
}
