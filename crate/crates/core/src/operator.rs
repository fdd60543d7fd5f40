//! The reduced operator `G_β` acting on angular profiles.
//!
//! For `u = f(x/|x|)|x|^{-β}` the value `F(u)(e)` at a unit vector `e` equals
//! `|x|^{β+2α} F(u)(x)` for every `x` on the ray of `e`, so the operator is a
//! map between functions on ω. It is evaluated at the interior nodes of the
//! profile grid. Every quadrature point contributes a second difference that
//! is linear in the samples through the interpolation stencils; collecting
//! those coefficients yields dense matrices for linear operators, for a
//! frozen Pucci policy and for each kernel of an Isaacs family.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{norm, scale, Geometry, Vec3};
use crate::grid::AngularGrid;
use crate::model::{ConeSpec, HomogeneousProfile, OperatorKind, OperatorSpec, QuadratureConfig, Validate};
use crate::quadrature::{integrate_field, LineQuadrature, QuadPoint, RadialLaw};

/// Second difference at one quadrature point as a combination of unknowns.
#[derive(Debug, Clone, Copy, Default)]
struct Local {
    idx: [u32; 9],
    coef: [f64; 9],
    len: usize,
}

impl Local {
    #[inline]
    fn add(&mut self, j: usize, c: f64) {
        for k in 0..self.len {
            if self.idx[k] as usize == j {
                self.coef[k] += c;
                return;
            }
        }
        self.idx[self.len] = j as u32;
        self.coef[self.len] = c;
        self.len += 1;
    }

    #[inline]
    fn dot(&self, f: &[f64]) -> f64 {
        let mut s = 0.0;
        for k in 0..self.len {
            s += self.coef[k] * f[self.idx[k] as usize];
        }
        s
    }

    #[inline]
    fn scatter(&self, w: f64, row: &mut [f64]) {
        for k in 0..self.len {
            row[self.idx[k] as usize] += w * self.coef[k];
        }
    }
}

/// `G_β` for one operator, cone, exponent and profile grid.
#[derive(Debug, Clone)]
pub struct ReducedOperator {
    pub op: OperatorSpec,
    pub cone: ConeSpec,
    pub beta: f64,
    pub cfg: QuadratureConfig,
    geometry: Geometry,
    grid: AngularGrid,
    /// Node index of each unknown.
    unknowns: Vec<usize>,
    /// Unknown index of each node, if interior.
    slot: Vec<Option<usize>>,
}

impl ReducedOperator {
    pub fn new(
        op: &OperatorSpec,
        cone: &ConeSpec,
        beta: f64,
        cfg: &QuadratureConfig,
        profile_nodes: usize,
        grading: f64,
    ) -> Result<Self> {
        let n = cone.dimension as f64;
        let lo = -2.0 * op.alpha;
        if !(beta > lo && beta < n) {
            return Err(Error::BetaOutOfRange { beta, lo, hi: n });
        }
        let v: Vec<String> = op
            .validate()
            .into_iter()
            .chain(cone.validate())
            .chain(cfg.validate())
            .map(|v| format!("{}: {}", v.field, v.message))
            .collect();
        if !v.is_empty() {
            return Err(Error::Invalid(v.join("; ")));
        }
        let geometry = Geometry::from_cone(cone)?;
        let nodes = if geometry.is_full() { 1 } else { profile_nodes };
        let grid = AngularGrid::new(geometry, nodes, grading)?;
        let unknowns = grid.interior();
        let mut slot = vec![None; grid.len()];
        for (k, &j) in unknowns.iter().enumerate() {
            slot[j] = Some(k);
        }
        Ok(Self { op: op.clone(), cone: cone.clone(), beta, cfg: cfg.clone(), geometry, grid, unknowns, slot })
    }

    /// Operator on the grid of `profile`, at the profile's exponent.
    pub fn for_profile(op: &OperatorSpec, profile: &HomogeneousProfile, cfg: &QuadratureConfig) -> Result<Self> {
        Self::new(op, &profile.cone, profile.beta, cfg, profile.samples.len(), profile.boundary_grading)
    }

    /// Same grid and operator at another exponent.
    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        Self::new(&self.op, &self.cone, beta, &self.cfg, self.grid.len(), self.grid.grading())
    }

    /// Same grid and exponent for another operator.
    pub fn with_op(&self, op: &OperatorSpec) -> Result<Self> {
        Self::new(op, &self.cone, self.beta, &self.cfg, self.grid.len(), self.grid.grading())
    }

    pub fn grid(&self) -> &AngularGrid {
        &self.grid
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    /// Number of unknowns (interior nodes).
    pub fn size(&self) -> usize {
        self.unknowns.len()
    }

    /// Node indices of the unknowns.
    pub fn unknown_nodes(&self) -> &[usize] {
        &self.unknowns
    }

    /// Unit vector of unknown `k`.
    pub fn direction(&self, k: usize) -> Vec3 {
        self.geometry.direction(self.grid.nodes()[self.unknowns[k]])
    }

    /// Full sample vector (zeros on ∂ω) from unknowns.
    pub fn to_samples(&self, v: &[f64]) -> Vec<f64> {
        let mut s = vec![0.0; self.grid.len()];
        for (k, &j) in self.unknowns.iter().enumerate() {
            s[j] = v[k];
        }
        s
    }

    /// Unknowns from a full sample vector.
    pub fn from_samples(&self, s: &[f64]) -> Result<Vec<f64>> {
        if s.len() != self.grid.len() {
            return Err(Error::GridMismatch { expected: self.grid.len(), got: s.len() });
        }
        Ok(self.unknowns.iter().map(|&j| s[j]).collect())
    }

    /// Profile with the given unknowns.
    pub fn profile(&self, v: &[f64]) -> HomogeneousProfile {
        HomogeneousProfile {
            beta: self.beta,
            cone: self.cone.clone(),
            samples: self.to_samples(v),
            boundary_grading: self.grid.grading(),
        }
    }

    /// Unknowns of the boundary weight, a positive start vector.
    pub fn positive_start(&self) -> Vec<f64> {
        self.unknowns.iter().map(|&j| self.grid.weight(self.grid.nodes()[j])).collect()
    }

    /// Whether kernels are rotation invariant, so the reflection of a
    /// sector about its bisector commutes with the operator.
    fn isotropic(&self) -> bool {
        self.op.kernels.iter().flatten().all(|k| k.kernel.density.len() == 1)
    }

    /// Index of the unknown mirrored about the bisector, if the geometry has one.
    fn mirror(&self, k: usize) -> Option<usize> {
        match self.geometry {
            Geometry::Sector { .. } if self.isotropic() => Some(self.size() - 1 - k),
            _ => None,
        }
    }

    /// Unknowns whose rows must be computed; the rest follow by reflection
    /// when `f` (if any) is itself mirror symmetric.
    fn rows_to_walk(&self, f: Option<&[f64]>) -> Vec<usize> {
        let m = self.size();
        let symmetric = self.mirror(0).is_some()
            && f.is_none_or(|f| {
                let s = f.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                (0..m).all(|k| (f[k] - f[m - 1 - k]).abs() <= 1e-13 * s)
            });
        if symmetric {
            (0..m.div_ceil(2)).collect()
        } else {
            (0..m).collect()
        }
    }

    #[inline]
    fn side(&self, z: &Vec3, loc: &mut Local) {
        if let Some(th) = self.geometry.angle(z) {
            let st = self.grid.stencil(th);
            let r = norm(z).powf(-self.beta);
            for k in 0..st.len {
                if let Some(s) = self.slot[st.idx[k] as usize] {
                    loc.add(s, st.coef[k] * r);
                }
            }
        }
    }

    /// Visit every quadrature point of the evaluation at unknown `k`.
    fn walk(&self, k: usize, mut sink: impl FnMut(&QuadPoint, &Local)) {
        let x = self.direction(k);
        let mut quad = LineQuadrature::new(self.geometry, RadialLaw::Power { beta: self.beta }, self.op.alpha, &self.cfg);
        quad.visit(&x, |q| {
            let mut loc = Local::default();
            self.side(&q.zp, &mut loc);
            self.side(&q.zm, &mut loc);
            loc.add(k, -2.0);
            sink(q, &loc);
        });
    }

    fn dim(&self) -> usize {
        self.geometry.dim()
    }

    /// `G_β[f]` at the interior nodes, `f` given by its unknowns.
    pub fn apply_unknowns(&self, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.size() {
            return Err(Error::GridMismatch { expected: self.size(), got: f.len() });
        }
        let rows = self.rows_to_walk(Some(f));
        let (lam, big) = (self.op.lambda_lower, self.op.lambda_upper);
        let dim = self.dim();
        let values: Vec<(usize, f64)> = rows
            .par_iter()
            .map(|&k| {
                let value = match self.op.kind {
                    OperatorKind::IsaacsFinite => {
                        let kernels = self.op.kernels.as_deref().unwrap_or_default();
                        let mut totals = vec![0.0; kernels.len()];
                        self.walk(k, |q, loc| {
                            let d = loc.dot(f);
                            for (t, kern) in totals.iter_mut().zip(kernels) {
                                *t += q.weight * kern.kernel.eval(dim, &q.sigma) * d;
                            }
                        });
                        totals[crate::quadrature::isaacs_select(&self.op, &totals)]
                    }
                    kind => {
                        let mut acc = 0.0;
                        self.walk(k, |q, loc| {
                            let d = loc.dot(f);
                            acc += q.weight
                                * match kind {
                                    OperatorKind::PucciPlus => crate::quadrature::s_plus(d, lam, big),
                                    OperatorKind::PucciMinus => crate::quadrature::s_minus(d, lam, big),
                                    _ => big * d,
                                };
                        });
                        acc
                    }
                };
                (k, value)
            })
            .collect();
        let mut out = vec![0.0; self.size()];
        for (k, v) in values {
            out[k] = v;
            if rows.len() < self.size() {
                out[self.size() - 1 - k] = v;
            }
        }
        Ok(out)
    }

    /// `G_β[f]` at every node of the profile grid (zero on ∂ω).
    pub fn apply(&self, f: &HomogeneousProfile) -> Result<Vec<f64>> {
        if (f.beta - self.beta).abs() > 1e-14 * (1.0 + self.beta.abs()) {
            return Err(Error::Precondition(format!("profile has beta {} but the operator {}", f.beta, self.beta)));
        }
        let v = self.apply_unknowns(&self.from_samples(&f.samples)?)?;
        Ok(self.to_samples(&v))
    }

    /// Assemble rows with per-point weights `factor(q, loc) ∈ R^kernels`.
    fn assemble(&self, f: Option<&[f64]>, count: usize, factor: impl Fn(&QuadPoint, &Local, &mut [f64]) + Sync) -> Vec<DMatrix<f64>> {
        let m = self.size();
        let rows = self.rows_to_walk(f);
        let computed: Vec<(usize, Vec<Vec<f64>>)> = rows
            .par_iter()
            .map(|&k| {
                let mut out = vec![vec![0.0; m]; count];
                let mut fac = vec![0.0; count];
                self.walk(k, |q, loc| {
                    factor(q, loc, &mut fac);
                    for (row, &c) in out.iter_mut().zip(&fac) {
                        loc.scatter(q.weight * c, row);
                    }
                });
                (k, out)
            })
            .collect();
        let mut mats = vec![DMatrix::zeros(m, m); count];
        for (k, rows_k) in computed {
            for (mat, row) in mats.iter_mut().zip(&rows_k) {
                for j in 0..m {
                    mat[(k, j)] = row[j];
                    if rows.len() < m {
                        mat[(m - 1 - k, m - 1 - j)] = row[j];
                    }
                }
            }
        }
        mats
    }

    /// Whether `G_β` is linear in the profile.
    pub fn is_linear(&self) -> bool {
        match self.op.kind {
            OperatorKind::FractionalLaplacian => true,
            OperatorKind::PucciPlus | OperatorKind::PucciMinus => self.op.lambda_lower == self.op.lambda_upper,
            OperatorKind::IsaacsFinite => self.op.kernels.as_ref().is_some_and(|k| k.len() == 1),
        }
    }

    /// Matrix of a linear operator: `G_β[f] = A f` on unknowns.
    pub fn matrix(&self) -> Result<DMatrix<f64>> {
        if !self.is_linear() {
            return Err(Error::Precondition(format!("{:?} is not linear", self.op.kind)));
        }
        if self.op.kind == OperatorKind::IsaacsFinite {
            return Ok(self.kernel_matrices()?.remove(0));
        }
        let c = self.op.lambda_upper;
        Ok(self.assemble(None, 1, |_, _, fac| fac[0] = c).remove(0))
    }

    /// Matrix of the linear operator selected by `f`: `L f = G_β[f]`, and
    /// `L ≤ G_β` (Pucci plus) or `L ≥ G_β` (Pucci minus) on every profile.
    pub fn policy_matrix(&self, f: &[f64]) -> Result<DMatrix<f64>> {
        if f.len() != self.size() {
            return Err(Error::GridMismatch { expected: self.size(), got: f.len() });
        }
        let (lam, big) = (self.op.lambda_lower, self.op.lambda_upper);
        match self.op.kind {
            OperatorKind::PucciPlus => Ok(self
                .assemble(Some(f), 1, |_, loc, fac| fac[0] = if loc.dot(f) > 0.0 { big } else { lam })
                .remove(0)),
            OperatorKind::PucciMinus => Ok(self
                .assemble(Some(f), 1, |_, loc, fac| fac[0] = if loc.dot(f) > 0.0 { lam } else { big })
                .remove(0)),
            OperatorKind::FractionalLaplacian => self.matrix(),
            OperatorKind::IsaacsFinite => {
                let mats = self.kernel_matrices()?;
                let sel = IsaacsRows::new(&self.op, mats);
                Ok(sel.policy_matrix(&DVector::from_column_slice(f)))
            }
        }
    }

    /// One matrix per kernel of an Isaacs family, in family order.
    pub fn kernel_matrices(&self) -> Result<Vec<DMatrix<f64>>> {
        let kernels = match (&self.op.kind, &self.op.kernels) {
            (OperatorKind::IsaacsFinite, Some(k)) if !k.is_empty() => k,
            _ => return Err(Error::Precondition("kernel matrices need an Isaacs family".into())),
        };
        let dim = self.dim();
        Ok(self.assemble(None, kernels.len(), |q, _, fac| {
            for (c, kern) in fac.iter_mut().zip(kernels) {
                *c = kern.kernel.eval(dim, &q.sigma);
            }
        }))
    }
}

/// Row-wise `inf_a sup_b` over the matrices of an Isaacs family.
#[derive(Debug, Clone)]
pub struct IsaacsRows {
    /// `(a, b, L_ab)`.
    pub family: Vec<(usize, usize, DMatrix<f64>)>,
    outer: Vec<usize>,
}

impl IsaacsRows {
    pub fn new(op: &OperatorSpec, mats: Vec<DMatrix<f64>>) -> Self {
        let kernels = op.kernels.as_deref().unwrap_or_default();
        let family = kernels.iter().zip(mats).map(|(k, m)| (k.a, k.b, m)).collect();
        Self { family, outer: op.isaacs_outer_indices() }
    }

    pub fn outer_indices(&self) -> &[usize] {
        &self.outer
    }

    pub fn size(&self) -> usize {
        self.family.first().map_or(0, |f| f.2.nrows())
    }

    /// `F[f]` row by row.
    pub fn apply(&self, f: &DVector<f64>) -> DVector<f64> {
        let products: Vec<DVector<f64>> = self.family.iter().map(|(_, _, m)| m * f).collect();
        DVector::from_fn(self.size(), |i, _| {
            self.outer
                .iter()
                .map(|&a| {
                    self.family
                        .iter()
                        .zip(&products)
                        .filter(|((ka, _, _), _)| *ka == a)
                        .map(|(_, p)| p[i])
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .fold(f64::INFINITY, f64::min)
        })
    }

    /// Rows of the kernel realising `inf_a sup_b` at `f`.
    pub fn policy_matrix(&self, f: &DVector<f64>) -> DMatrix<f64> {
        let outer = self.outer_policy(f);
        self.inner_matrix(&outer, f)
    }

    /// Per row, the outer index `a` minimising `sup_b (L_ab f)_i`.
    pub fn outer_policy(&self, f: &DVector<f64>) -> Vec<usize> {
        let products: Vec<DVector<f64>> = self.family.iter().map(|(_, _, m)| m * f).collect();
        (0..self.size())
            .map(|i| {
                let mut best = (f64::INFINITY, self.outer[0]);
                for &a in &self.outer {
                    let v = self
                        .family
                        .iter()
                        .zip(&products)
                        .filter(|((ka, _, _), _)| *ka == a)
                        .map(|(_, p)| p[i])
                        .fold(f64::NEG_INFINITY, f64::max);
                    if v < best.0 {
                        best = (v, a);
                    }
                }
                best.1
            })
            .collect()
    }

    /// Rows of `sup_b L_{a(i) b}` selected at `f`, for a fixed outer policy.
    pub fn inner_matrix(&self, outer: &[usize], f: &DVector<f64>) -> DMatrix<f64> {
        let products: Vec<DVector<f64>> = self.family.iter().map(|(_, _, m)| m * f).collect();
        let m = self.size();
        let mut out = DMatrix::zeros(m, m);
        for i in 0..m {
            let mut best: Option<(f64, usize)> = None;
            for (k, (a, _, _)) in self.family.iter().enumerate() {
                if *a == outer[i] && best.is_none_or(|(v, _)| products[k][i] > v) {
                    best = Some((products[k][i], k));
                }
            }
            let k = best.map_or(0, |b| b.1);
            out.set_row(i, &self.family[k].2.row(i));
        }
        out
    }
}

/// `max_e |F(u)(r e) - r^{-β-2α} F(u)(e)|` over the interior nodes, each
/// side evaluated by direct quadrature.
pub fn scale_invariance_check(r_op: &ReducedOperator, f: &HomogeneousProfile, r: f64) -> Result<f64> {
    let grid = AngularGrid::for_profile(f)?;
    let samples = &f.samples;
    let angular = |th: f64| grid.eval(samples, th);
    let law = RadialLaw::Power { beta: f.beta };
    let factor = r.powf(-f.beta - 2.0 * r_op.op.alpha);
    let devs: Vec<f64> = (0..r_op.size())
        .into_par_iter()
        .map(|k| -> Result<f64> {
            let e = r_op.direction(k);
            let a = integrate_field(r_op.geometry, law, &angular, &e, &r_op.op, &r_op.cfg)?.total();
            if r == 1.0 {
                return Ok(0.0);
            }
            let b = integrate_field(r_op.geometry, law, &angular, &scale(&e, r), &r_op.op, &r_op.cfg)?.total();
            Ok((b - factor * a).abs())
        })
        .collect::<Result<_>>()?;
    Ok(devs.into_iter().fold(0.0, f64::max))
}

/// `(min (Isaacs - M⁻), min (M⁺ - Isaacs))` over the interior nodes.
pub fn pucci_sandwich_check(
    f: &HomogeneousProfile,
    isaacs: &OperatorSpec,
    cfg: &QuadratureConfig,
) -> Result<(f64, f64)> {
    let r = ReducedOperator::for_profile(isaacs, f, cfg)?;
    let mid = r.apply(f)?;
    let lo = r.with_op(&isaacs.pucci_minus_envelope())?.apply(f)?;
    let hi = r.with_op(&isaacs.pucci_plus_envelope())?.apply(f)?;
    let mut gaps = (f64::INFINITY, f64::INFINITY);
    for &j in r.unknown_nodes() {
        gaps.0 = gaps.0.min(mid[j] - lo[j]);
        gaps.1 = gaps.1.min(hi[j] - mid[j]);
    }
    Ok(gaps)
}
