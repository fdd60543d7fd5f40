//! Lane–Emden thresholds, the γ-iteration, truncated barriers and verdicts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::{principal_eigenvalue, CriticalExponents, ProfileResolution};
use crate::geometry::{scale, Geometry, Vec3};
use crate::grid::AngularGrid;
use crate::model::{ConeShape, ConeSpec, HomogeneousProfile, OperatorKind, OperatorSpec, QuadratureConfig};
use crate::quadrature::{integrate_field, RadialLaw};

/// Smallest admissible distance between a barrier exponent and β±.
pub const BARRIER_MARGIN: f64 = 1e-2;

/// Radii of the subsolution samples (`|x| ≥ 1`).
pub const OUTER_RADII: [f64; 5] = [1.0, 1.5, 2.0, 3.0, 4.0];
/// Radii of the supersolution samples (`|x| ≤ 1`).
pub const INNER_RADII: [f64; 5] = [0.2, 0.4, 0.6, 0.8, 1.0];

/// `(β + 2α)/β`.
pub fn liouville_threshold(beta: f64, alpha: f64) -> Result<f64> {
    if beta == 0.0 {
        return Err(Error::BetaZero);
    }
    if !(beta > -2.0 * alpha) {
        return Err(Error::BetaOutOfRange { beta, lo: -2.0 * alpha, hi: f64::INFINITY });
    }
    Ok((beta + 2.0 * alpha) / beta)
}

/// `γ_0 = 2α/p`, `γ_i = (2α + γ_{i-1})/p`, returning `γ_0..=γ_k`.
pub fn gamma_iteration(p: f64, alpha: f64, k: usize) -> Result<Vec<f64>> {
    if !(p > 0.0) {
        return Err(Error::Precondition(format!("γ-iteration needs p > 0, got {p}")));
    }
    let two_alpha = 2.0 * alpha;
    let mut out = Vec::with_capacity(k + 1);
    let mut g = two_alpha / p;
    out.push(g);
    for _ in 0..k {
        g = (two_alpha + g) / p;
        out.push(g);
    }
    Ok(out)
}

/// `2α/(p - 1)`, the limit of the γ-iteration for p > 1.
pub fn gamma_limit(p: f64, alpha: f64) -> Option<f64> {
    (p > 1.0).then(|| 2.0 * alpha / (p - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum BarrierMode {
    /// Linear in `|x|` inside `|x| < ε`.
    InnerLinear { eps: f64 },
    /// Like `|x|^{-1}` beyond `|x| > R`.
    OuterInverse { radius: f64 },
}

/// Homogeneous profile truncated near the vertex or at infinity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncatedBarrier {
    pub base: HomogeneousProfile,
    pub mode: BarrierMode,
}

impl TruncatedBarrier {
    pub fn law(&self) -> RadialLaw {
        let beta = self.base.beta;
        match self.mode {
            BarrierMode::InnerLinear { eps } => RadialLaw::InnerLinear { beta, eps },
            BarrierMode::OuterInverse { radius } => RadialLaw::OuterInverse { beta, radius },
        }
    }

    pub fn value(&self, x: &Vec3) -> Result<f64> {
        let geometry = Geometry::from_cone(&self.base.cone)?;
        let grid = AngularGrid::for_profile(&self.base)?;
        let r = crate::geometry::norm(x);
        Ok(match geometry.angle(x) {
            Some(theta) => grid.eval(&self.base.samples, theta) * self.law().value(r),
            None => 0.0,
        })
    }

    /// `F(w)(x)` by direct quadrature.
    pub fn evaluate(&self, x: &Vec3, op: &OperatorSpec, cfg: &QuadratureConfig) -> Result<f64> {
        let geometry = Geometry::from_cone(&self.base.cone)?;
        let grid = AngularGrid::for_profile(&self.base)?;
        let f = |t: f64| grid.eval(&self.base.samples, t);
        Ok(integrate_field(geometry, self.law(), &f, x, op, cfg)?.total())
    }
}

/// Interior grid directions inside the inner 60% of ω.
pub fn inner_directions(cone: &ConeSpec, grid: &AngularGrid) -> Result<Vec<Vec3>> {
    let geometry = Geometry::from_cone(cone)?;
    let keep = |t: f64| match cone.canonical().shape {
        ConeShape::PlanarSector { aperture } => (t - 0.5 * aperture).abs() <= 0.3 * aperture,
        ConeShape::AxisymmetricCap { half_angle } => t <= 0.6 * half_angle,
        _ => true,
    };
    Ok(grid
        .interior()
        .into_iter()
        .map(|j| grid.nodes()[j])
        .filter(|&t| keep(t))
        .map(|t| geometry.direction(t))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierCheck {
    pub beta: f64,
    /// ε or R.
    pub parameter: f64,
    /// Minimum of the scaled operator values over the samples.
    pub observed: f64,
    pub pass: bool,
    /// `(|x|, scaled value)` per sample.
    pub samples: Vec<(f64, f64)>,
}

fn barrier_check(
    barrier: &TruncatedBarrier,
    op: &OperatorSpec,
    cfg: &QuadratureConfig,
    radii: &[f64],
    factor: impl Fn(f64) -> f64,
) -> Result<BarrierCheck> {
    let grid = AngularGrid::for_profile(&barrier.base)?;
    let dirs = inner_directions(&barrier.base.cone, &grid)?;
    let mut samples = Vec::with_capacity(dirs.len() * radii.len());
    for &r in radii {
        for d in &dirs {
            let v = barrier.evaluate(&scale(d, r), op, cfg)?;
            samples.push((r, v * factor(r)));
        }
    }
    let observed = samples.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    let parameter = match barrier.mode {
        BarrierMode::InnerLinear { eps } => eps,
        BarrierMode::OuterInverse { radius } => radius,
    };
    Ok(BarrierCheck { beta: barrier.base.beta, parameter, observed, pass: observed > 0.0, samples })
}

/// Profile of the eigenfunction at `beta_star`, carried to homogeneity `beta`.
fn eigen_profile(
    beta_star: f64,
    beta: f64,
    cone: &ConeSpec,
    op: &OperatorSpec,
    cfg: &QuadratureConfig,
    res: &ProfileResolution,
) -> Result<HomogeneousProfile> {
    let (_, mut f) = principal_eigenvalue(beta_star, cone, op, cfg, res)?;
    f.beta = beta;
    Ok(f)
}

/// `min F(w)(x) |x|^{β+2α}` over `|x| ≥ 1` in the inner cone, where `w` is
/// the β⁺-eigenfunction with homogeneity `β > β⁺`, made linear inside `ε`.
pub fn barrier_subsolution_check(
    cone: &ConeSpec,
    op: &OperatorSpec,
    beta: f64,
    beta_plus: f64,
    eps: f64,
    cfg: &QuadratureConfig,
    res: &ProfileResolution,
) -> Result<BarrierCheck> {
    let n = cone.dimension as f64;
    if !(beta >= beta_plus + BARRIER_MARGIN && beta < n) {
        return Err(Error::Precondition(format!("β = {beta} must lie in [β⁺ + {BARRIER_MARGIN}, N), β⁺ = {beta_plus}")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Precondition(format!("ε = {eps} must lie in (0, 1)")));
    }
    let base = eigen_profile(beta_plus, beta, cone, op, cfg, res)?;
    let barrier = TruncatedBarrier { base, mode: BarrierMode::InnerLinear { eps } };
    let e = beta + 2.0 * op.alpha;
    barrier_check(&barrier, op, cfg, &OUTER_RADII, |r| r.powf(e))
}

/// `min F(W)(x) R^{β+2α}` over `|x| ≤ 1` in the inner cone, where `W` is the
/// β⁻-eigenfunction with homogeneity `β < β⁻`, made like `|x|^{-1}` beyond R.
pub fn barrier_supersolution_check(
    cone: &ConeSpec,
    op: &OperatorSpec,
    beta: f64,
    beta_minus: f64,
    radius: f64,
    cfg: &QuadratureConfig,
    res: &ProfileResolution,
) -> Result<BarrierCheck> {
    let two_alpha = 2.0 * op.alpha;
    if !(beta <= beta_minus - BARRIER_MARGIN && beta > -two_alpha) {
        return Err(Error::Precondition(format!("β = {beta} must lie in (-2α, β⁻ - {BARRIER_MARGIN}], β⁻ = {beta_minus}")));
    }
    let sigma = INNER_RADII[INNER_RADII.len() - 1];
    if !(radius >= 2.0 * sigma) {
        return Err(Error::Precondition(format!("R = {radius} must be at least 2σ = {}", 2.0 * sigma)));
    }
    let base = eigen_profile(beta_minus, beta, cone, op, cfg, res)?;
    let barrier = TruncatedBarrier { base, mode: BarrierMode::OuterInverse { radius } };
    let scaled = radius.powf(beta + two_alpha);
    barrier_check(&barrier, op, cfg, &INNER_RADII, |_| scaled)
}

/// Halvings of ε, or doublings of R, tried by the searches.
pub const BARRIER_ROUNDS: usize = 6;

/// [`barrier_subsolution_check`] with ε halved until the check passes.
pub fn barrier_subsolution_search(
    cone: &ConeSpec,
    op: &OperatorSpec,
    beta: f64,
    beta_plus: f64,
    eps0: f64,
    cfg: &QuadratureConfig,
    res: &ProfileResolution,
) -> Result<BarrierCheck> {
    let mut eps = eps0;
    let mut check = barrier_subsolution_check(cone, op, beta, beta_plus, eps, cfg, res)?;
    for _ in 0..BARRIER_ROUNDS {
        if check.pass {
            break;
        }
        eps *= 0.5;
        check = barrier_subsolution_check(cone, op, beta, beta_plus, eps, cfg, res)?;
    }
    Ok(check)
}

/// [`barrier_supersolution_check`] with R doubled until the check passes.
pub fn barrier_supersolution_search(
    cone: &ConeSpec,
    op: &OperatorSpec,
    beta: f64,
    beta_minus: f64,
    r0: f64,
    cfg: &QuadratureConfig,
    res: &ProfileResolution,
) -> Result<BarrierCheck> {
    let mut radius = r0;
    let mut check = barrier_supersolution_check(cone, op, beta, beta_minus, radius, cfg, res)?;
    for _ in 0..BARRIER_ROUNDS {
        if check.pass {
            break;
        }
        radius *= 2.0;
        check = barrier_supersolution_check(cone, op, beta, beta_minus, radius, cfg, res)?;
    }
    Ok(check)
}

/// Open interval of Hopf exponents `(-2α, β⁻)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HopfWindow {
    pub lo: f64,
    pub hi: f64,
}

impl HopfWindow {
    pub fn is_empty(&self) -> bool {
        self.lo >= self.hi
    }

    pub fn contains(&self, beta: f64) -> bool {
        beta > self.lo && beta < self.hi
    }

    /// Range of the growth exponents `|β|` of `t^{-β}`.
    pub fn growth_exponents(&self) -> (f64, f64) {
        (self.hi.abs(), self.lo.abs())
    }
}

pub fn hopf_window(beta_minus: f64, alpha: f64) -> HopfWindow {
    HopfWindow { lo: -2.0 * alpha, hi: beta_minus }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    NoPositiveSupersolution,
    Inconclusive,
    UnboundedSupersolutionsOnly,
}

/// Classify `p` for `F(u) + u^p ≤ 0` in the cone from its exponents.
pub fn liouville_verdict(p: f64, op: &OperatorSpec, exponents: Option<&CriticalExponents>) -> Result<Verdict> {
    let ex = exponents.ok_or(Error::MissingExponents)?;
    let alpha = op.alpha;
    let plus = liouville_threshold(ex.beta_plus.value, alpha)?;
    if p > 0.0 && p <= plus {
        return Ok(Verdict::NoPositiveSupersolution);
    }
    if let Some(m) = &ex.beta_minus {
        let minus = liouville_threshold(m.value, alpha)?;
        if p >= minus && p <= 0.0 && op.kind == OperatorKind::PucciMinus && ex.minus_hypotheses {
            return Ok(Verdict::NoPositiveSupersolution);
        }
        if p < minus {
            return Ok(Verdict::UnboundedSupersolutionsOnly);
        }
    }
    Ok(Verdict::Inconclusive)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_arithmetic() {
        assert_eq!(liouville_threshold(1.0, 0.5).unwrap(), 2.0);
        assert!((liouville_threshold(1.5, 0.5).unwrap() - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(liouville_threshold(-0.5, 0.5).unwrap(), -1.0);
        assert_eq!(liouville_threshold(0.0, 0.5), Err(Error::BetaZero));
    }

    #[test]
    fn gamma_sequence() {
        let g = gamma_iteration(2.0, 0.5, 2).unwrap();
        assert_eq!(g, vec![0.5, 0.75, 0.875]);
        let g = gamma_iteration(1.0, 0.5, 3).unwrap();
        assert_eq!(g, vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn hopf_window_bounds() {
        let w = hopf_window(-0.5, 0.5);
        assert_eq!((w.lo, w.hi), (-1.0, -0.5));
        assert_eq!(w.growth_exponents(), (0.5, 1.0));
        assert!(hopf_window(-1.0, 0.5).is_empty());
    }
}
