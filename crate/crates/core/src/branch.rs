//! Auxiliary problem and the fixed-point branch whose norm blows up at β⁺.
//!
//! Written on the interior nodes, the auxiliary problem for β, γ > 0 reads
//! `-G_β[u] + (g + γ) u = (g + β) ψ + β`; for β, γ < 0 the same form holds
//! with |β|, |γ| and `g = max{c, β}`. Since `-G_β` is a sup (or inf-sup) of
//! linear operators, policy iteration solves it exactly.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::{g_of_beta, ProfileResolution};
use crate::model::{ConeSpec, HomogeneousProfile, OperatorKind, OperatorSpec, QuadratureConfig};
use crate::operator::{IsaacsRows, ReducedOperator};
use crate::roots::linspace;

const MAX_HOWARD_ITERATIONS: usize = 60;

/// One point of the auxiliary problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchState {
    pub beta: f64,
    pub gamma: f64,
    /// `ψ` on the full profile grid.
    pub psi: Vec<f64>,
    /// `u` on the full profile grid.
    pub u: Vec<f64>,
    pub norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuxiliaryStart {
    /// The subsolution 0.
    Zero,
    /// The supersolution `k·1`.
    Super,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxiliarySolution {
    pub state: BranchState,
    /// Supersolution level `k`.
    pub bound: f64,
    pub c_star: f64,
    pub iterations: usize,
}

/// `-G_β` as a family of linear operators.
enum Family<'a> {
    Linear(DMatrix<f64>),
    Pucci(&'a ReducedOperator),
    Isaacs(IsaacsRows),
}

impl<'a> Family<'a> {
    fn new(r: &'a ReducedOperator) -> Result<Self> {
        if r.is_linear() {
            return Ok(Family::Linear(r.matrix()?));
        }
        Ok(match r.op.kind {
            OperatorKind::IsaacsFinite => Family::Isaacs(IsaacsRows::new(&r.op, r.kernel_matrices()?)),
            _ => Family::Pucci(r),
        })
    }

    /// Matrix of `G_β` with the policy frozen at `u`.
    fn at(&self, u: &DVector<f64>) -> Result<DMatrix<f64>> {
        match self {
            Family::Linear(a) => Ok(a.clone()),
            Family::Pucci(r) => r.policy_matrix(u.as_slice()),
            Family::Isaacs(rows) => Ok(rows.policy_matrix(u)),
        }
    }

    fn is_linear(&self) -> bool {
        matches!(self, Family::Linear(_))
    }
}

/// Policy iteration for `-G_β[u] + κ u = rhs`.
fn howard(fam: &Family, kappa: f64, rhs: &DVector<f64>, mut u: DVector<f64>) -> Result<(DVector<f64>, usize)> {
    let m = rhs.len();
    let mut last: Option<DMatrix<f64>> = None;
    for it in 1..=MAX_HOWARD_ITERATIONS {
        let g = fam.at(&u)?;
        if last.as_ref() == Some(&g) {
            return Ok((u, it - 1));
        }
        let system = DMatrix::identity(m, m) * kappa - &g;
        let next = system.lu().solve(rhs).ok_or(Error::NoConvergence { iterations: it, lo: f64::NAN, hi: f64::NAN })?;
        let step = (&next - &u).amax();
        u = next;
        if fam.is_linear() || step <= 1e-12 * u.amax().max(1.0) {
            return Ok((u, it));
        }
        last = Some(g);
    }
    Err(Error::NoConvergence { iterations: MAX_HOWARD_ITERATIONS, lo: f64::NAN, hi: f64::NAN })
}

fn same_sign(beta: f64, gamma: f64) -> Result<()> {
    if beta == 0.0 || gamma == 0.0 || beta.signum() != gamma.signum() {
        return Err(Error::Precondition(format!("β = {beta} and γ = {gamma} must be nonzero with equal signs")));
    }
    Ok(())
}

/// Grid sup of `(g(t) + |t|)/|t|` over `t` between 0 and `max(|β|, |γ|)`
/// on the side of β.
pub fn c_star(beta: f64, gamma: f64, op: &OperatorSpec, dim: usize, cfg: &QuadratureConfig) -> Result<f64> {
    let top = beta.abs().max(gamma.abs());
    let limit = if beta > 0.0 { dim as f64 } else { 2.0 * op.alpha };
    let top = top.min(0.999 * limit);
    let mut best: f64 = 0.0;
    for t in linspace(top / 8.0, top, 7) {
        let b = t * beta.signum();
        best = best.max((g_of_beta(b, op, dim, cfg)? + t) / t);
    }
    Ok(best)
}

/// Solve the reduced auxiliary problem. `psi` lives on the profile grid of
/// `res` (`None` is ψ ≡ 0).
#[allow(clippy::too_many_arguments)]
pub fn solve_auxiliary(
    beta: f64,
    gamma: f64,
    psi: Option<&HomogeneousProfile>,
    cone: &ConeSpec,
    op: &OperatorSpec,
    cfg: &QuadratureConfig,
    res: &ProfileResolution,
    start: AuxiliaryStart,
) -> Result<AuxiliarySolution> {
    same_sign(beta, gamma)?;
    let grading = res.grading_for(op, cfg)?;
    let r = ReducedOperator::new(op, cone, beta, cfg, res.nodes, grading)?;
    let fam = Family::new(&r)?;
    solve_with(&r, &fam, gamma, psi, start)
}

fn solve_with(
    r: &ReducedOperator,
    fam: &Family,
    gamma: f64,
    psi: Option<&HomogeneousProfile>,
    start: AuxiliaryStart,
) -> Result<AuxiliarySolution> {
    let beta = r.beta;
    let dim = r.cone.dimension;
    let m = r.size();
    let psi_v = match psi {
        Some(p) => {
            if p.beta != beta {
                return Err(Error::Precondition(format!("ψ has β = {} but the problem has β = {beta}", p.beta)));
            }
            r.from_samples(&p.samples)?
        }
        None => vec![0.0; m],
    };
    if psi_v.iter().any(|v| *v < 0.0) {
        return Err(Error::Precondition("ψ must be nonnegative".into()));
    }
    let (b, gm) = (beta.abs(), gamma.abs());
    let c = crate::exponents::c_of_beta(beta, &r.op, dim, &r.cfg)?;
    let g = if beta > 0.0 { c.max(-beta) } else { c.max(beta) };
    let kappa = g + gm;
    let psi_sup = psi_v.iter().fold(0.0f64, |a, v| a.max(*v));
    let c_star = c_star(beta, gamma, &r.op, dim, &r.cfg)?;
    let bound = b * (1.0 + c_star * psi_sup) / (g - c + gm);

    let psi_d = DVector::from_column_slice(&psi_v);
    let rhs = psi_d * (g + b) + DVector::from_element(m, b);
    let u0 = match start {
        AuxiliaryStart::Zero => DVector::zeros(m),
        AuxiliaryStart::Super => DVector::from_element(m, bound),
    };
    let (u, iterations) = howard(fam, kappa, &rhs, u0)?;
    let min = u.min();
    if min < -1e-8 * u.amax().max(1.0) {
        return Err(Error::LostPositivity { min });
    }
    let norm = u.max();
    if norm > bound * (1.0 + 1e-6) {
        return Err(Error::BoundViolated { value: norm, bound });
    }
    let u: Vec<f64> = u.iter().map(|v| v.max(0.0)).collect();
    Ok(AuxiliarySolution {
        state: BranchState { beta, gamma, psi: r.to_samples(&psi_v), u: r.to_samples(&u), norm },
        bound,
        c_star,
        iterations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub beta: f64,
    pub gamma: f64,
    /// `None` when no nonnegative fixed point exists at this β.
    pub norm: Option<f64>,
    pub iterations: usize,
    /// `sup |A(u) - u|` after one application of the auxiliary map.
    pub fixed_point_defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub points: Vec<BranchPoint>,
    /// γ used by each pass.
    pub gammas: Vec<f64>,
    /// Linear extrapolation of `1/norm` to zero from the last two points.
    pub blow_up: Option<f64>,
}

/// Fixed points `u = A(β, u)` of the auxiliary map with `ψ = u` along
/// `beta_grid`; γ starts at `gamma` and is reset once to the extrapolated
/// blow-up of the first pass.
pub fn fixed_point_branch(
    cone: &ConeSpec,
    op: &OperatorSpec,
    cfg: &QuadratureConfig,
    res: &ProfileResolution,
    beta_grid: &[f64],
    gamma: f64,
) -> Result<Branch> {
    if beta_grid.len() < 2 {
        return Err(Error::Precondition("the branch needs at least two β values".into()));
    }
    let sign = beta_grid[0].signum();
    let monotone = beta_grid.windows(2).all(|w| (w[1] - w[0]) * sign > 0.0);
    if !monotone || beta_grid.iter().any(|b| b.signum() != sign || *b == 0.0) {
        return Err(Error::Precondition("β grid must move away from 0 on one side".into()));
    }
    let grading = res.grading_for(op, cfg)?;
    let ops: Vec<ReducedOperator> = beta_grid
        .iter()
        .map(|&b| ReducedOperator::new(op, cone, b, cfg, res.nodes, grading))
        .collect::<Result<_>>()?;
    let fams: Vec<Family> = ops.iter().map(Family::new).collect::<Result<_>>()?;

    let mut gammas = vec![gamma];
    let mut points = branch_pass(&ops, &fams, gamma)?;
    let mut blow_up = extrapolate(&points);
    if let Some(next) = blow_up {
        if next.signum() == sign {
            gammas.push(next);
            points = branch_pass(&ops, &fams, next)?;
            blow_up = extrapolate(&points);
        }
    }
    Ok(Branch { points, gammas, blow_up })
}

fn branch_pass(ops: &[ReducedOperator], fams: &[Family], gamma: f64) -> Result<Vec<BranchPoint>> {
    let mut out = Vec::with_capacity(ops.len());
    let mut diverged = false;
    for (r, fam) in ops.iter().zip(fams) {
        let beta = r.beta;
        if diverged || beta.abs() >= gamma.abs() {
            diverged = true;
            out.push(BranchPoint { beta, gamma, norm: None, iterations: 0, fixed_point_defect: f64::NAN });
            continue;
        }
        // the fixed point solves -G u + (|γ| - |β|) u = |β|
        let m = r.size();
        let rhs = DVector::from_element(m, beta.abs());
        let solved = howard(fam, gamma.abs() - beta.abs(), &rhs, DVector::zeros(m));
        let (u, iterations) = match solved {
            Ok(v) if v.0.min() > 0.0 && v.0.iter().all(|x| x.is_finite()) => v,
            _ => {
                diverged = true;
                out.push(BranchPoint { beta, gamma, norm: None, iterations: 0, fixed_point_defect: f64::NAN });
                continue;
            }
        };
        let psi = r.profile(u.as_slice());
        let image = solve_with(r, fam, gamma, Some(&psi), AuxiliaryStart::Zero)?;
        let image_v = r.from_samples(&image.state.u)?;
        let defect = (DVector::from_vec(image_v) - &u).amax();
        out.push(BranchPoint { beta, gamma, norm: Some(u.max()), iterations, fixed_point_defect: defect });
    }
    Ok(out)
}

fn extrapolate(points: &[BranchPoint]) -> Option<f64> {
    let alive: Vec<(f64, f64)> = points.iter().filter_map(|p| p.norm.map(|n| (p.beta, 1.0 / n))).collect();
    let [.., (b0, y0), (b1, y1)] = alive.as_slice() else { return None };
    if y1 >= y0 {
        return None;
    }
    Some(b1 - y1 * (b1 - b0) / (y1 - y0))
}
