//! Radial symbols, principal eigenvalues and critical exponents.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::eigen::{principal_eigenpair, EigenPair};
use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::model::{
    ConeShape, ConeSpec, ExponentKind, ExponentResult, GridMeta, HomogeneousProfile, OperatorKind, OperatorSpec,
    QuadratureConfig,
};
use crate::operator::ReducedOperator;
use crate::quadrature::{integrate_field, RadialLaw};
use crate::roots::{bisect, describe, linspace, scan, sign_changes, ROOT_TOL};

/// Number of scan intervals across an admissible range.
pub const SCAN_STEPS: usize = 20;

/// Halvings toward the end of the range when the uniform scan finds no root.
const ENDPOINT_STEPS: usize = 8;

/// Angular resolution of cone profiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileResolution {
    /// Grid nodes, boundary included.
    pub nodes: usize,
    /// Boundary grading exponent; `None` selects the boundary exponent of
    /// the operator (α for the fractional Laplacian).
    #[serde(default)]
    pub grading: Option<f64>,
}

impl Default for ProfileResolution {
    fn default() -> Self {
        Self { nodes: 16, grading: None }
    }
}

impl ProfileResolution {
    pub fn with_nodes(nodes: usize) -> Self {
        Self { nodes, ..Self::default() }
    }

    /// Grading exponent actually used for `op`.
    pub fn grading_for(&self, op: &OperatorSpec, cfg: &QuadratureConfig) -> Result<f64> {
        match self.grading {
            Some(g) => Ok(g),
            None => boundary_exponent(op, cfg),
        }
    }
}

fn full_geometry(dim: usize) -> Result<Geometry> {
    match dim {
        2 => Ok(Geometry::FullPlane),
        3 => Ok(Geometry::FullSpace3),
        n => Err(Error::Unsupported(format!("radial symbol in dimension {n}"))),
    }
}

/// `c(β)` with `F(|x|^{-β}) = c(β) |x|^{-β-2α}`, evaluated at `x = e_1`.
pub fn c_of_beta(beta: f64, op: &OperatorSpec, dim: usize, cfg: &QuadratureConfig) -> Result<f64> {
    let hi = dim as f64;
    let lo = -2.0 * op.alpha;
    if !(beta > lo && beta < hi) {
        return Err(Error::BetaOutOfRange { beta, lo, hi });
    }
    let g = full_geometry(dim)?;
    Ok(integrate_field(g, RadialLaw::Power { beta }, &|_| 1.0, &[1.0, 0.0, 0.0], op, cfg)?.total())
}

/// `max{c(β), -β}` for β > 0 and `max{c(β), β}` for β < 0.
pub fn g_of_beta(beta: f64, op: &OperatorSpec, dim: usize, cfg: &QuadratureConfig) -> Result<f64> {
    if beta == 0.0 {
        return Err(Error::BetaZero);
    }
    let c = c_of_beta(beta, op, dim, cfg)?;
    Ok(if beta > 0.0 { c.max(-beta) } else { c.max(beta) })
}

/// Exponent `s ∈ (0, 2α)` with `F((x_N)_+^s) = 0` in the half-space.
pub fn boundary_exponent(op: &OperatorSpec, cfg: &QuadratureConfig) -> Result<f64> {
    if op.kind == OperatorKind::FractionalLaplacian {
        return Ok(op.alpha);
    }
    let g = Geometry::Sector { aperture: PI };
    let x = [0.0, 1.0, 0.0];
    let value = |s: f64| -> Result<f64> {
        let f = |t: f64| t.sin().max(0.0).powf(s);
        Ok(integrate_field(g, RadialLaw::Power { beta: -s }, &f, &x, op, cfg)?.total())
    };
    let two_alpha = 2.0 * op.alpha;
    let pts = linspace(0.02 * two_alpha, 0.98 * two_alpha, 24);
    let samples = scan(&pts, &value)?;
    let k = *sign_changes(&samples).first().ok_or_else(|| Error::RootNotBracketed {
        lo: pts[0],
        hi: pts[pts.len() - 1],
        scan: describe(&samples),
    })?;
    Ok(bisect(value, samples[k], samples[k + 1], 1e-7)?.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    RadialSymbol,
    ConeEigenvalue,
}

/// Sampled `c(β)` or `μ(β)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolCurve {
    pub betas: Vec<f64>,
    pub values: Vec<f64>,
    pub kind: CurveKind,
}

impl SymbolCurve {
    pub fn radial_symbol(op: &OperatorSpec, dim: usize, cfg: &QuadratureConfig, betas: &[f64]) -> Result<Self> {
        let values = betas.iter().map(|&b| c_of_beta(b, op, dim, cfg)).collect::<Result<_>>()?;
        Ok(Self { betas: betas.to_vec(), values, kind: CurveKind::RadialSymbol })
    }

    pub fn cone_eigenvalue(map: &mut EigenMap, betas: &[f64]) -> Result<Self> {
        let values = betas.iter().map(|&b| map.mu(b)).collect::<Result<_>>()?;
        Ok(Self { betas: betas.to_vec(), values, kind: CurveKind::ConeEigenvalue })
    }

    pub fn sign_changes(&self) -> usize {
        let s: Vec<(f64, f64)> = self.betas.iter().copied().zip(self.values.iter().copied()).collect();
        sign_changes(&s).len()
    }

    /// Discrete second divided differences, one per interior sample.
    pub fn second_differences(&self) -> Vec<f64> {
        (1..self.betas.len().saturating_sub(1))
            .map(|k| {
                let (b0, b1, b2) = (self.betas[k - 1], self.betas[k], self.betas[k + 1]);
                let (v0, v1, v2) = (self.values[k - 1], self.values[k], self.values[k + 1]);
                2.0 * ((v2 - v1) / (b2 - b1) - (v1 - v0) / (b1 - b0)) / (b2 - b0)
            })
            .collect()
    }

    pub fn is_strictly_convex(&self) -> bool {
        self.second_differences().iter().all(|d| *d > 0.0)
    }
}

fn grid_meta(cfg: &QuadratureConfig, nodes: usize, grading: f64) -> GridMeta {
    GridMeta { quadrature: cfg.clone(), profile_nodes: nodes, boundary_grading: grading }
}

/// `(Ñ⁺, Ñ⁻)`: the nonzero roots of the radial symbols of `M⁺` and `M⁻`
/// (both equal to the fractional root for the fractional Laplacian), plus 2α.
pub fn dimension_like(op: &OperatorSpec, dim: usize, cfg: &QuadratureConfig) -> Result<(ExponentResult, ExponentResult)> {
    let (plus, minus) = match op.kind {
        OperatorKind::FractionalLaplacian => (op.clone(), op.clone()),
        OperatorKind::PucciPlus | OperatorKind::PucciMinus => (op.pucci_plus_envelope(), op.pucci_minus_envelope()),
        OperatorKind::IsaacsFinite => {
            return Err(Error::Precondition("dimension-like numbers are defined for Pucci and fractional operators".into()))
        }
    };
    let p = symbol_root(&plus, dim, cfg, ExponentKind::NTildePlus)?;
    let m = if minus == plus { ExponentResult { kind: ExponentKind::NTildeMinus, ..p.clone() } } else { symbol_root(&minus, dim, cfg, ExponentKind::NTildeMinus)? };
    Ok((p, m))
}

/// Nonzero root of `c`, located through `c(β)/β`, which is increasing by
/// convexity of `c` and `c(0) = 0`.
fn symbol_root(op: &OperatorSpec, dim: usize, cfg: &QuadratureConfig, kind: ExponentKind) -> Result<ExponentResult> {
    let two_alpha = 2.0 * op.alpha;
    let n = dim as f64;
    let h = |b: f64| -> Result<f64> {
        let b = if b.abs() < 1e-9 { 1e-6 } else { b };
        Ok(c_of_beta(b, op, dim, cfg)? / b)
    };
    let pts: Vec<f64> = linspace(-two_alpha, n, SCAN_STEPS)[1..SCAN_STEPS].iter().copied().filter(|b| b.abs() > 1e-9).collect();
    let samples = scan(&pts, h)?;
    let k = *sign_changes(&samples).first().ok_or_else(|| Error::RootNotBracketed {
        lo: pts[0],
        hi: pts[pts.len() - 1],
        scan: describe(&samples),
    })?;
    let (root, bracket) = bisect(h, samples[k], samples[k + 1], ROOT_TOL)?;
    let residual = c_of_beta(root, op, dim, cfg)?.abs();
    let mut notes = vec![format!("scan c(β)/β: {}", describe(&samples))];
    if (root).abs() < cfg.tol.max(ROOT_TOL) {
        notes.push("NearDegenerate: Ñ is within tolerance of 2α".into());
    }
    Ok(ExponentResult {
        value: root + two_alpha,
        residual,
        bracket: (bracket.0 + two_alpha, bracket.1 + two_alpha),
        grid_meta: grid_meta(cfg, 0, op.alpha),
        kind,
        notes,
    })
}

/// `μ(β)` for one operator and cone, reusing the last eigenfunction as the
/// start of the next policy iteration.
#[derive(Debug, Clone)]
pub struct EigenMap {
    pub op: OperatorSpec,
    pub cone: ConeSpec,
    pub cfg: QuadratureConfig,
    pub nodes: usize,
    pub grading: f64,
    last: Option<Vec<f64>>,
    /// Every `(β, μ)` evaluated so far, in call order.
    pub log: Vec<(f64, f64)>,
}

impl EigenMap {
    pub fn new(op: &OperatorSpec, cone: &ConeSpec, cfg: &QuadratureConfig, res: &ProfileResolution) -> Result<Self> {
        let grading = res.grading_for(op, cfg)?;
        Ok(Self { op: op.clone(), cone: cone.clone(), cfg: cfg.clone(), nodes: res.nodes, grading, last: None, log: vec![] })
    }

    pub fn operator(&self, beta: f64) -> Result<ReducedOperator> {
        ReducedOperator::new(&self.op, &self.cone, beta, &self.cfg, self.nodes, self.grading)
    }

    pub fn pair(&mut self, beta: f64) -> Result<EigenPair> {
        let r = self.operator(beta)?;
        let pair = principal_eigenpair(&r, self.last.as_deref())?;
        self.last = Some(pair.f.clone());
        self.log.push((beta, pair.mu));
        Ok(pair)
    }

    pub fn mu(&mut self, beta: f64) -> Result<f64> {
        Ok(self.pair(beta)?.mu)
    }

    pub fn meta(&self) -> GridMeta {
        grid_meta(&self.cfg, self.nodes, self.grading)
    }
}

/// `(μ(β), f)`: principal eigenvalue of `-G_β` and its eigenfunction, with
/// maximum 1.
pub fn principal_eigenvalue(
    beta: f64,
    cone: &ConeSpec,
    op: &OperatorSpec,
    cfg: &QuadratureConfig,
    res: &ProfileResolution,
) -> Result<(f64, HomogeneousProfile)> {
    let mut map = EigenMap::new(op, cone, cfg, res)?;
    let r = map.operator(beta)?;
    let pair = map.pair(beta)?;
    Ok((pair.mu, r.profile(&pair.f)))
}

/// Placement of the bracket scans.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPlan {
    pub steps: usize,
    /// Shift of the scan points, as a fraction of one step.
    pub offset: f64,
}

impl Default for ScanPlan {
    fn default() -> Self {
        Self { steps: SCAN_STEPS, offset: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalExponents {
    pub beta_plus: ExponentResult,
    pub beta_minus: Option<ExponentResult>,
    /// Why `beta_minus` is absent, if it is.
    pub diagnostics: Vec<String>,
    /// Whether Ñ⁺ < 2α or ω lies in a half-sphere.
    pub minus_hypotheses: bool,
}

/// Whether ω lies in a closed half-sphere.
pub fn in_half_sphere(cone: &ConeSpec) -> bool {
    match cone.canonical().shape {
        ConeShape::PlanarSector { aperture } => aperture <= PI + 1e-12,
        ConeShape::AxisymmetricCap { half_angle } => half_angle <= PI / 2.0 + 1e-12,
        ConeShape::HalfSpace { .. } => true,
        ConeShape::FullSpace => false,
    }
}

/// `β⁺ ∈ (0, N)` and `β⁻ ∈ (-2α, 0)`: the roots of `μ`.
pub fn critical_exponents(
    cone: &ConeSpec,
    op: &OperatorSpec,
    cfg: &QuadratureConfig,
    res: &ProfileResolution,
) -> Result<CriticalExponents> {
    critical_exponents_with(cone, op, cfg, res, &ScanPlan::default())
}

pub fn critical_exponents_with(
    cone: &ConeSpec,
    op: &OperatorSpec,
    cfg: &QuadratureConfig,
    res: &ProfileResolution,
    plan: &ScanPlan,
) -> Result<CriticalExponents> {
    if !cone.is_proper() {
        return Err(Error::Precondition("critical exponents need a proper cone".into()));
    }
    let mut map = EigenMap::new(op, cone, cfg, res)?;
    let n = cone.dimension as f64;
    let two_alpha = 2.0 * op.alpha;
    let steps = plan.steps.max(2);
    let shift = plan.offset.clamp(0.0, 0.99);

    let plus_pts: Vec<f64> = (0..steps).map(|k| (k as f64 + shift) * n / steps as f64).collect();
    let beta_plus = find_crossing(&mut map, &plus_pts, n, ExponentKind::BetaPlus, op, cone.dimension)?
        .ok_or_else(|| Error::RootNotBracketed { lo: 0.0, hi: n, scan: describe(&map.log) })?;

    let minus_pts: Vec<f64> = (0..steps).map(|k| -(k as f64 + shift) * two_alpha / steps as f64).collect();
    let mut diagnostics = vec![];
    let mut beta_minus = find_crossing(&mut map, &minus_pts, -two_alpha, ExponentKind::BetaMinus, op, cone.dimension)?;
    let minus_hypotheses = in_half_sphere(cone)
        || dimension_like(&op.pucci_plus_envelope(), cone.dimension, cfg).map(|(p, _)| p.value < two_alpha).unwrap_or(false);
    match beta_minus.as_mut() {
        None => diagnostics.push(format!("no sign change of μ on (-2α, 0): {}", describe(&map.log))),
        Some(r) if !minus_hypotheses => {
            r.notes.push("found outside the sufficient conditions (Ñ⁺ < 2α or ω in a half-sphere)".into())
        }
        Some(_) => {}
    }
    Ok(CriticalExponents { beta_plus, beta_minus, diagnostics, minus_hypotheses })
}

/// Scan `μ` along `pts` (starting next to β = 0) for a change from positive to
/// negative and bisect it. `end` is the open end of the range.
fn find_crossing(
    map: &mut EigenMap,
    pts: &[f64],
    end: f64,
    kind: ExponentKind,
    op: &OperatorSpec,
    dim: usize,
) -> Result<Option<ExponentResult>> {
    let mut samples = scan(pts, |b| map.mu(b))?;
    let downward = |s: &[(f64, f64)]| -> Vec<usize> {
        sign_changes(s).into_iter().filter(|&k| s[k].1 > 0.0 && s[k + 1].1 < 0.0).collect()
    };
    let mut crossings = downward(&samples);
    // μ → -∞ at the ends of the range, so a late root sits in the last step
    if crossings.is_empty() {
        let last = samples[samples.len() - 1].0;
        for j in 1..=ENDPOINT_STEPS {
            let b = end - (end - last) * 0.5f64.powi(j as i32);
            let mu = map.mu(b)?;
            samples.push((b, mu));
            if mu < 0.0 {
                break;
            }
        }
        crossings = downward(&samples);
    }
    let mut notes = vec![format!("scan μ: {}", describe(&samples))];
    let k = match crossings.len() {
        0 => return Ok(None),
        1 => crossings[0],
        _ => {
            // keep the candidate nearest to the root of the radial symbol
            let (p, _) = dimension_like(&symbol_operator(op), dim, &map.cfg)?;
            let root = p.value - 2.0 * op.alpha;
            let predicted = if kind == ExponentKind::BetaPlus { root.max(0.0) } else { root.min(0.0) };
            notes.push(format!(
                "several sign changes at {:?}; predicted {predicted:.4}",
                crossings.iter().map(|&k| samples[k].0).collect::<Vec<_>>()
            ));
            *crossings
                .iter()
                .min_by(|&&a, &&b| {
                    let da = (0.5 * (samples[a].0 + samples[a + 1].0) - predicted).abs();
                    let db = (0.5 * (samples[b].0 + samples[b + 1].0) - predicted).abs();
                    da.total_cmp(&db)
                })
                .unwrap()
        }
    };
    let (lo, hi) = (samples[k], samples[k + 1]);
    let (value, bracket) = bisect(|b| map.mu(b), lo, hi, ROOT_TOL)?;
    let residual = map.mu(value)?.abs();
    Ok(Some(ExponentResult { value, residual, bracket, grid_meta: map.meta(), kind, notes }))
}

/// Operator whose radial symbol predicts the exponents of `op`.
fn symbol_operator(op: &OperatorSpec) -> OperatorSpec {
    match op.kind {
        OperatorKind::IsaacsFinite => op.pucci_plus_envelope(),
        _ => op.clone(),
    }
}

/// `|β⁺ + β⁻ - (N - 2α)|` for the fractional Laplacian.
pub fn kelvin_relation_check(cone: &ConeSpec, alpha: f64, cfg: &QuadratureConfig, res: &ProfileResolution) -> Result<f64> {
    let ex = critical_exponents(cone, &OperatorSpec::fractional(alpha), cfg, res)?;
    let minus = ex.beta_minus.ok_or(Error::MissingExponents)?;
    Ok((ex.beta_plus.value + minus.value - (cone.dimension as f64 - 2.0 * alpha)).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symbol_vanishes_at_zero() {
        let v = c_of_beta(0.0, &OperatorSpec::pucci_plus(0.5, 1.0, 2.0), 2, &QuadratureConfig::coarse()).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn g_picks_the_max() {
        let cfg = QuadratureConfig::coarse();
        let op = OperatorSpec::fractional(0.5);
        // between the roots 0 and 1 the symbol is negative
        let c = c_of_beta(0.5, &op, 2, &cfg).unwrap();
        assert!(c < 0.0);
        assert_eq!(g_of_beta(0.5, &op, 2, &cfg).unwrap(), c.max(-0.5));
        assert_eq!(g_of_beta(0.0, &op, 2, &cfg), Err(Error::BetaZero));
    }

    #[test]
    fn fractional_boundary_exponent_is_alpha() {
        assert_eq!(boundary_exponent(&OperatorSpec::fractional(0.3), &QuadratureConfig::coarse()).unwrap(), 0.3);
        // with λ = Λ the Pucci operator is a multiple of the fractional one
        let s = boundary_exponent(&OperatorSpec::pucci_plus(0.5, 2.0, 2.0), &QuadratureConfig::coarse()).unwrap();
        assert!((s - 0.5).abs() < 1e-5, "{s}");
    }

    #[test]
    fn convexity_of_sampled_curve() {
        let c = SymbolCurve { betas: vec![0.0, 1.0, 2.0, 3.0], values: vec![1.0, 0.0, 0.5, 2.0], kind: CurveKind::RadialSymbol };
        assert!(c.is_strictly_convex());
        assert_eq!(c.sign_changes(), 0);
        let d = SymbolCurve { values: vec![1.0, -1.0, 0.5, 0.0], ..c };
        assert!(!d.is_strictly_convex());
        assert_eq!(d.sign_changes(), 2);
    }
}
