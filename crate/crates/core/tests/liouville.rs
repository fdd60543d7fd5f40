use std::f64::consts::PI;

use cone_exponents::branch::{solve_auxiliary, AuxiliaryStart};
use cone_exponents::cache::{CacheKey, CacheRecord, ExponentCache};
use cone_exponents::exponents::{CriticalExponents, ProfileResolution, ScanPlan};
use cone_exponents::liouville::{
    barrier_subsolution_check, gamma_iteration, gamma_limit, hopf_window, liouville_threshold, liouville_verdict,
    Verdict,
};
use cone_exponents::{ConeSpec, Error, ExponentKind, ExponentResult, GridMeta, OperatorSpec, QuadratureConfig};
use proptest::prelude::*;

fn result(value: f64, kind: ExponentKind) -> ExponentResult {
    ExponentResult {
        value,
        residual: 0.0,
        bracket: (value - 1e-4, value + 1e-4),
        grid_meta: GridMeta { quadrature: QuadratureConfig::coarse(), profile_nodes: 12, boundary_grading: 0.5 },
        kind,
        notes: vec![],
    }
}

fn exponents(plus: f64, minus: Option<f64>, hypotheses: bool) -> CriticalExponents {
    CriticalExponents {
        beta_plus: result(plus, ExponentKind::BetaPlus),
        beta_minus: minus.map(|m| result(m, ExponentKind::BetaMinus)),
        diagnostics: vec![],
        minus_hypotheses: hypotheses,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    // p = 1 + 2α/β exactly when β is the fixed point 2α/(p - 1)
    #[test]
    fn threshold_inverts_the_gamma_limit(alpha in 0.05f64..0.95, beta in 0.01f64..3.0) {
        let p = liouville_threshold(beta, alpha).unwrap();
        let g = gamma_limit(p, alpha).unwrap();
        prop_assert!((g - beta).abs() < 1e-12 * (1.0 + beta), "{g} vs {beta}");
    }

    #[test]
    fn gamma_limit_is_a_fixed_point(alpha in 0.05f64..0.95, p in 1.01f64..6.0) {
        let g = gamma_limit(p, alpha).unwrap();
        prop_assert!(((2.0 * alpha + g) / p - g).abs() < 1e-12 * (1.0 + g));
    }

    #[test]
    fn gamma_iteration_increases_to_its_limit(alpha in 0.05f64..0.95, p in 1.5f64..6.0) {
        let seq = gamma_iteration(p, alpha, 200).unwrap();
        prop_assert!(seq.windows(2).all(|w| w[1] >= w[0]));
        let g = gamma_limit(p, alpha).unwrap();
        prop_assert!((seq[200] - g).abs() < 1e-9 * (1.0 + g));
    }

    #[test]
    fn gamma_iteration_diverges_below_one(alpha in 0.05f64..0.95, p in 0.2f64..1.0) {
        prop_assert!(gamma_limit(p, alpha).is_none());
        let seq = gamma_iteration(p, alpha, 50).unwrap();
        prop_assert!(seq[50] >= 50.0 * 2.0 * alpha);
    }

    #[test]
    fn positive_thresholds_exceed_one(alpha in 0.05f64..0.95, beta in 0.01f64..3.0) {
        prop_assert!(liouville_threshold(beta, alpha).unwrap() > 1.0);
    }

    #[test]
    fn hopf_window_brackets_the_growth(alpha in 0.05f64..0.95, t in 0.0f64..1.0) {
        let beta_minus = -2.0 * alpha * t;
        let w = hopf_window(beta_minus, alpha);
        prop_assert_eq!(w.is_empty(), t >= 1.0);
        let mid = 0.5 * (w.lo + w.hi);
        prop_assert!(w.contains(mid) || w.is_empty() || w.lo == w.hi);
        prop_assert!(!w.contains(beta_minus) && !w.contains(-2.0 * alpha));
    }
}

#[test]
fn threshold_rejects_zero_and_out_of_range() {
    assert_eq!(liouville_threshold(0.0, 0.5), Err(Error::BetaZero));
    assert!(liouville_threshold(-1.2, 0.5).is_err());
}

#[test]
fn verdicts_on_the_half_plane() {
    let ex = exponents(1.5, Some(-0.5), true);
    let op = OperatorSpec::fractional(0.5);
    // thresholds 5/3 and -1
    let cases = [
        (1.0, Verdict::NoPositiveSupersolution),
        (1.66, Verdict::NoPositiveSupersolution),
        (1.7, Verdict::Inconclusive),
        (-0.5, Verdict::Inconclusive),
        (-1.5, Verdict::UnboundedSupersolutionsOnly),
    ];
    for (p, want) in cases {
        assert_eq!(liouville_verdict(p, &op, Some(&ex)).unwrap(), want, "p = {p}");
    }
}

#[test]
fn negative_exponents_only_decide_for_pucci_minus_under_the_hypotheses() {
    let op = OperatorSpec::pucci_minus(0.5, 1.0, 2.0);
    let with = exponents(1.77, Some(-0.58), true);
    assert_eq!(liouville_verdict(-0.5, &op, Some(&with)).unwrap(), Verdict::NoPositiveSupersolution);
    let without = exponents(1.77, Some(-0.58), false);
    assert_eq!(liouville_verdict(-0.5, &op, Some(&without)).unwrap(), Verdict::Inconclusive);
    let plus = OperatorSpec::pucci_plus(0.5, 1.0, 2.0);
    assert_eq!(liouville_verdict(-0.5, &plus, Some(&with)).unwrap(), Verdict::Inconclusive);
}

#[test]
fn verdict_needs_exponents() {
    assert_eq!(liouville_verdict(1.0, &OperatorSpec::fractional(0.5), None), Err(Error::MissingExponents));
}

#[test]
fn subsolution_barrier_above_the_critical_exponent() {
    let cfg = QuadratureConfig::coarse();
    let res = ProfileResolution::with_nodes(12);
    let cone = ConeSpec::sector(PI);
    let op = OperatorSpec::fractional(0.5);
    let near = barrier_subsolution_check(&cone, &op, 1.6, 1.5, 1e-2, &cfg, &res).unwrap();
    let far = barrier_subsolution_check(&cone, &op, 1.8, 1.5, 1e-2, &cfg, &res).unwrap();
    assert!(near.pass && far.pass, "{} {}", near.observed, far.observed);
    assert!(near.observed < far.observed, "{} {}", near.observed, far.observed);
    let too_close = barrier_subsolution_check(&cone, &op, 1.505, 1.5, 1e-2, &cfg, &res);
    assert!(matches!(too_close, Err(Error::Precondition(_))));
}

#[test]
fn auxiliary_solution_stays_below_its_bound() {
    let cfg = QuadratureConfig::coarse();
    let res = ProfileResolution::with_nodes(12);
    let cone = ConeSpec::sector(PI);
    for op in [OperatorSpec::fractional(0.5), OperatorSpec::pucci_plus(0.5, 1.0, 2.0)] {
        for start in [AuxiliaryStart::Zero, AuxiliaryStart::Super] {
            let s = solve_auxiliary(0.5, 0.5, None, &cone, &op, &cfg, &res, start).unwrap();
            assert!(s.state.u.iter().all(|&v| v >= -1e-12));
            assert!(s.state.norm <= s.bound * (1.0 + 1e-9), "{} > {}", s.state.norm, s.bound);
        }
    }
    let mixed = solve_auxiliary(0.5, -0.5, None, &cone, &OperatorSpec::fractional(0.5), &cfg, &res, AuxiliaryStart::Zero);
    assert!(mixed.is_err());
}

fn key(tol: f64) -> CacheKey {
    CacheKey {
        operator: OperatorSpec::fractional(0.5),
        cone: ConeSpec::sector(PI),
        scan: ScanPlan::default(),
        quadrature: QuadratureConfig { tol, ..QuadratureConfig::coarse() },
        resolution: ProfileResolution::with_nodes(12),
    }
}

#[test]
fn cache_misses_on_any_changed_setting() {
    let mut cache = ExponentCache::memory();
    cache.insert(CacheRecord { key: key(1e-3), exponents: exponents(1.5, Some(-0.5), true) }).unwrap();
    assert!(cache.lookup(&key(1e-3)).is_some());
    assert!(cache.lookup(&key(1e-4)).is_none());
    let mut other = key(1e-3);
    other.resolution.grading = Some(0.5);
    assert!(cache.lookup(&other).is_none());
    other = key(1e-3);
    other.scan.offset = 0.5;
    assert!(cache.lookup(&other).is_none());
}

#[test]
fn cache_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested").join("cache.jsonl");
    let ex = exponents(1.5 + 1e-13, Some(-0.5), true);
    {
        let mut cache = ExponentCache::open(&path).unwrap();
        assert!(cache.records().is_empty());
        cache.insert(CacheRecord { key: key(1e-3), exponents: ex.clone() }).unwrap();
    }
    std::fs::write(&path, format!("{}not json\n", std::fs::read_to_string(&path).unwrap())).unwrap();
    let cache = ExponentCache::open(&path).unwrap();
    assert_eq!(cache.records().len(), 1);
    assert_eq!(cache.lookup(&key(1e-3)), Some(&ex));
}
