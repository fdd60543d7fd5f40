use std::f64::consts::PI;

use cone_exponents::exponents::{
    c_of_beta, critical_exponents, critical_exponents_with, dimension_like, g_of_beta, EigenMap, ProfileResolution,
    ScanPlan,
};
use cone_exponents::roots::ROOT_TOL;
use cone_exponents::{ConeSpec, Error, OperatorSpec, QuadratureConfig};
use proptest::prelude::*;

fn coarse() -> QuadratureConfig {
    QuadratureConfig::coarse()
}

fn res() -> ProfileResolution {
    ProfileResolution::with_nodes(12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    // the fractional symbol is a multiple of β(β - (N - 2α)) in sign
    #[test]
    fn fractional_symbol_sign(alpha in 0.15f64..0.85, dim in 2usize..4, t in 0.02f64..0.98) {
        let n = dim as f64;
        let (lo, hi) = (-2.0 * alpha, n);
        let beta = lo + t * (hi - lo);
        let root = n - 2.0 * alpha;
        prop_assume!(beta.abs() > 0.05 && (beta - root).abs() > 0.05);
        let c = c_of_beta(beta, &OperatorSpec::fractional(alpha), dim, &coarse()).unwrap();
        prop_assert_eq!(c > 0.0, beta * (beta - root) > 0.0, "c({}) = {}", beta, c);
    }

    #[test]
    fn fractional_symbol_kelvin_symmetry(alpha in 0.15f64..0.85, t in 0.02f64..0.98) {
        let n = 2.0;
        let beta = -2.0 * alpha + t * (n + 2.0 * alpha);
        let op = OperatorSpec::fractional(alpha);
        let a = c_of_beta(beta, &op, 2, &coarse()).unwrap();
        let b = c_of_beta(n - 2.0 * alpha - beta, &op, 2, &coarse()).unwrap();
        prop_assert!((a - b).abs() <= 2.0 * coarse().tol * (1.0 + a.abs()), "{a} vs {b}");
    }

    #[test]
    fn g_is_the_clipped_symbol(beta in -0.95f64..1.95) {
        prop_assume!(beta.abs() > 1e-3);
        let op = OperatorSpec::pucci_plus(0.5, 1.0, 2.0);
        let c = c_of_beta(beta, &op, 2, &coarse()).unwrap();
        let g = g_of_beta(beta, &op, 2, &coarse()).unwrap();
        prop_assert!(g >= c);
        prop_assert!(g >= -beta.abs());
        prop_assert!(g == c || g == -beta.abs());
    }
}

#[test]
fn g_at_zero_is_refused() {
    assert_eq!(g_of_beta(0.0, &OperatorSpec::fractional(0.5), 2, &coarse()), Err(Error::BetaZero));
}

#[test]
fn mu_sign_pattern_on_the_half_plane() {
    // β⁺ = 1.5 and β⁻ = -0.5 for α = 1/2
    let mut map = EigenMap::new(&OperatorSpec::fractional(0.5), &ConeSpec::sector(PI), &coarse(), &res()).unwrap();
    for (beta, positive) in [(-0.8, false), (-0.25, true), (0.75, true), (1.75, false)] {
        let mu = map.mu(beta).unwrap();
        assert_eq!(mu > 0.0, positive, "μ({beta}) = {mu}");
    }
}

#[test]
fn eigenpair_residual_and_collatz_wielandt() {
    for op in [OperatorSpec::fractional(0.5), OperatorSpec::pucci_plus(0.5, 1.0, 2.0), OperatorSpec::pucci_minus(0.5, 1.0, 2.0)] {
        let mut map = EigenMap::new(&op, &ConeSpec::sector(PI / 2.0), &coarse(), &res()).unwrap();
        let pair = map.pair(0.7).unwrap();
        assert!(pair.residual < 1e-8, "{:?}: residual {}", op.kind, pair.residual);
        let (lo, hi) = pair.collatz_wielandt;
        assert!(lo <= pair.mu + 1e-8 && pair.mu <= hi + 1e-8, "{lo} {} {hi}", pair.mu);
        assert!(hi - lo < 1e-6, "{:?}: interval {lo} {hi}", op.kind);
        assert!(pair.f.iter().all(|&v| v > 0.0));
        assert!((pair.f.iter().cloned().fold(0.0, f64::max) - 1.0).abs() < 1e-12);
    }
}

#[test]
fn exponents_do_not_depend_on_the_scan_placement() {
    let cone = ConeSpec::sector(PI / 2.0);
    let op = OperatorSpec::pucci_plus(0.5, 1.0, 2.0);
    let a = critical_exponents_with(&cone, &op, &coarse(), &res(), &ScanPlan::default()).unwrap();
    let b = critical_exponents_with(&cone, &op, &coarse(), &res(), &ScanPlan { offset: 0.5, ..ScanPlan::default() }).unwrap();
    assert!((a.beta_plus.value - b.beta_plus.value).abs() < ROOT_TOL, "{} {}", a.beta_plus.value, b.beta_plus.value);
    let (am, bm) = (a.beta_minus.unwrap().value, b.beta_minus.unwrap().value);
    assert!((am - bm).abs() < ROOT_TOL, "{am} {bm}");
}

#[test]
fn exponents_settle_under_grid_refinement() {
    let cone = ConeSpec::sector(PI / 2.0);
    let op = OperatorSpec::fractional(0.5);
    let v: Vec<f64> = [8, 12, 16]
        .iter()
        .map(|&n| critical_exponents(&cone, &op, &coarse(), &ProfileResolution::with_nodes(n)).unwrap().beta_plus.value)
        .collect();
    let (d1, d2) = ((v[1] - v[0]).abs(), (v[2] - v[1]).abs());
    assert!(d1 < ROOT_TOL && d2 <= d1, "{v:?}");
}

#[test]
fn dimension_like_numbers_ignore_a_common_scale() {
    let op = OperatorSpec::pucci_plus(0.5, 1.0, 2.0);
    let (p, m) = dimension_like(&op, 2, &coarse()).unwrap();
    let (ps, ms) = dimension_like(&op.scaled(3.0), 2, &coarse()).unwrap();
    assert!((p.value - ps.value).abs() < ROOT_TOL);
    assert!((m.value - ms.value).abs() < ROOT_TOL);
    assert!(p.value < 2.0 && 2.0 < m.value, "{} {}", p.value, m.value);
}

#[test]
fn dimension_like_is_refused_for_isaacs() {
    let op = cone_exponents::acceptance::two_kernel_isaacs();
    assert!(matches!(dimension_like(&op, 2, &coarse()), Err(Error::Precondition(_))));
}

#[test]
fn exponents_need_a_proper_cone() {
    let r = critical_exponents(&ConeSpec::full_space(2), &OperatorSpec::fractional(0.5), &coarse(), &res());
    assert!(r.is_err());
}
