//! Singular integrals `∫ φ(δ(u,x,y)) K(y) dy` for homogeneous and truncated
//! homogeneous functions supported in a cone.
//!
//! The integral is split at the pair of balls `|x ∓ y| < ρ_0` around the
//! vertex. Outside them it is written in polar coordinates around `y = 0`,
//! visiting only half of the directions since `δ(u,x,y) = δ(u,x,-y)`; along
//! each direction σ the radial integral runs over the line `x + tσ`, paired
//! as `t = ±r`. The integrand is only piecewise smooth on that line: it has
//! `dist^α`-type kinks where the line crosses ∂C, a peak where it passes
//! close to the vertex, and kinks where it crosses the truncation sphere of
//! a barrier. Each of those points becomes a breakpoint with geometric
//! grading toward it. Inside the balls, polar coordinates centred at the
//! vertex make `u = f(ω) ρ^{-β}` separable, and the radial singularity is
//! removed by a power substitution.
//!
//! The region `|y| < r_min` is not sampled: its contribution is extrapolated
//! from the second-difference ratio `δ/r²` at the innermost node. The tail
//! is mapped to a finite interval by `r = R s^{-1/κ}` with κ matched to the
//! far-field decay.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{axpy, dot, norm, scale, sphere_crossings, Geometry, Vec3};
use crate::grid::AngularGrid;
use crate::model::{HomogeneousProfile, OperatorKind, OperatorSpec, QuadratureConfig, Validate};

const GRADING_RATIO: f64 = 0.2;
/// Resolution of `dist^α` kinks, relative to `|x|`.
const KINK_SCALE: f64 = 1e-4;
/// Resolution of angular kinks.
const ANGULAR_KINK_SCALE: f64 = 1e-4;
/// Innermost panel of the radial variable in the vertex ball.
const BALL_FLOOR: f64 = 1e-4;
/// Innermost panel of the mapped tail variable.
const TAIL_FLOOR: f64 = 1e-5;

type Rule = Vec<(f64, f64)>;

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss(n: usize) -> &'static [(f64, f64)] {
    const MAX: usize = 128;
    static RULES: OnceLock<Vec<OnceLock<Rule>>> = OnceLock::new();
    let rules = RULES.get_or_init(|| (0..=MAX).map(|_| OnceLock::new()).collect());
    let n = n.clamp(1, MAX);
    rules[n].get_or_init(|| {
        let rule = gauss_quad::GaussLegendre::new(n.try_into().unwrap());
        let mut v: Vec<(f64, f64)> =
            rule.as_node_weight_pairs().iter().map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w)).collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        v
    })
}

/// `u(x+y) + u(x-y) - 2u(x)`, arranged as two first differences.
pub fn second_difference(u: impl Fn(&Vec3) -> f64, x: &Vec3, y: &Vec3) -> f64 {
    let ux = u(x);
    let p = u(&axpy(x, 1.0, y));
    let m = u(&axpy(x, -1.0, y));
    (p - ux) + (m - ux)
}

/// Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct Compensated {
    sum: f64,
    c: f64,
}

impl Compensated {
    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.c += (self.sum - t) + v;
        } else {
            self.c += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.c
    }
}

/// Radial factor of a (possibly truncated) homogeneous function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum RadialLaw {
    /// `|x|^{-β}`.
    Power { beta: f64 },
    /// `|x|^{-β}` for `|x| ≥ ε`, `|x| ε^{-β-1}` inside.
    InnerLinear { beta: f64, eps: f64 },
    /// `|x|^{-β}` for `|x| ≤ R`, `|x|^{-1} R^{1-β}` outside.
    OuterInverse { beta: f64, radius: f64 },
}

impl RadialLaw {
    #[inline]
    pub fn value(&self, r: f64) -> f64 {
        match *self {
            RadialLaw::Power { beta } => r.powf(-beta),
            RadialLaw::InnerLinear { beta, eps } => {
                if r >= eps {
                    r.powf(-beta)
                } else {
                    r * eps.powf(-beta - 1.0)
                }
            }
            RadialLaw::OuterInverse { beta, radius } => {
                if r <= radius {
                    r.powf(-beta)
                } else {
                    radius.powf(1.0 - beta) / r
                }
            }
        }
    }

    pub fn beta(&self) -> f64 {
        match *self {
            RadialLaw::Power { beta } | RadialLaw::InnerLinear { beta, .. } | RadialLaw::OuterInverse { beta, .. } => {
                beta
            }
        }
    }

    /// Decay exponent at infinity.
    pub fn far_exponent(&self) -> f64 {
        match *self {
            RadialLaw::OuterInverse { .. } => 1.0,
            _ => self.beta(),
        }
    }

    /// Blow-up exponent at the vertex.
    pub fn near_exponent(&self) -> f64 {
        match *self {
            RadialLaw::InnerLinear { .. } => -1.0,
            _ => self.beta(),
        }
    }

    fn kink_radius(&self) -> Option<f64> {
        match *self {
            RadialLaw::Power { .. } => None,
            RadialLaw::InnerLinear { eps, .. } => Some(eps),
            RadialLaw::OuterInverse { radius, .. } => Some(radius),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Core,
    /// `y ∈ B_η(x) ∪ B_η(-x)`, integrated in polar coordinates around the vertex.
    Near,
}

/// One quadrature node. The node stands for the pair `±y`, with
/// `zp = x + y` and `zm = x - y`.
#[derive(Debug, Clone, Copy)]
pub struct QuadPoint {
    pub zp: Vec3,
    pub zm: Vec3,
    /// `y / |y|`.
    pub sigma: Vec3,
    /// Includes `|y|^{-N-2α}`, the Jacobian and the factor 2 for the pairing.
    pub weight: f64,
    /// Part of `weight` standing for the extrapolated `|y| < r_min` region.
    pub extrapolated: f64,
    pub region: Region,
}

#[derive(Debug, Clone, Copy)]
struct Break {
    r: f64,
    scale: f64,
    kink: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum End {
    Kink,
    Smooth,
}

/// Generates quadrature nodes for one evaluation point; buffers are reused.
///
/// The integral is split into the pair of balls `|x ∓ y| < ρ_0` around the
/// vertex, where `ρ_0 = min(η|x|, dist(x, ∂C))`, and the rest. The rest is
/// integrated along lines through `x`; the balls in polar coordinates centred
/// at the vertex, where `u = f(ω) ρ^{-β}` is exactly separable.
pub struct LineQuadrature<'a> {
    geometry: Geometry,
    law: RadialLaw,
    alpha: f64,
    cfg: &'a QuadratureConfig,
    ts: Vec<f64>,
    breaks: Vec<Break>,
    radial: Vec<(f64, f64)>,
    inner_weight: f64,
    rho0: f64,
}

impl<'a> LineQuadrature<'a> {
    pub fn new(geometry: Geometry, law: RadialLaw, alpha: f64, cfg: &'a QuadratureConfig) -> Self {
        Self {
            geometry,
            law,
            alpha,
            cfg,
            ts: Vec::with_capacity(8),
            breaks: Vec::with_capacity(8),
            radial: Vec::with_capacity(512),
            inner_weight: 0.0,
            rho0: 0.0,
        }
    }

    /// Radius of the vertex ball used for evaluation point `x`.
    pub fn vertex_ball_radius(&self, x: &Vec3) -> f64 {
        (self.cfg.eta * norm(x)).min(self.geometry.boundary_distance(x))
    }

    /// Calls `visit` for every node of the rule at evaluation point `x`.
    pub fn visit(&mut self, x: &Vec3, mut visit: impl FnMut(&QuadPoint)) {
        let xn = norm(x);
        self.rho0 = self.vertex_ball_radius(x);
        let mut dirs: Vec<(Vec3, f64)> = Vec::new();
        self.directions(x, xn, &mut dirs);
        for (sigma, wdir) in dirs {
            self.radial_rule(x, xn, &sigma);
            for (i, &(r, wr)) in self.radial.iter().enumerate() {
                let zp = axpy(x, r, &sigma);
                let zm = axpy(x, -r, &sigma);
                let extrapolated = if i == 0 { 2.0 * wdir * self.inner_weight } else { 0.0 };
                visit(&QuadPoint { zp, zm, sigma, weight: 2.0 * wdir * wr, extrapolated, region: Region::Core });
            }
        }
        self.vertex_ball(x, &mut visit);
    }

    /// Radial nodes `(r, w)` along the line `x ± rσ`; `w` includes `r^{-1-2α}`.
    pub fn line_nodes(&mut self, x: &Vec3, sigma: &Vec3) -> &[(f64, f64)] {
        self.rho0 = self.vertex_ball_radius(x);
        self.radial_rule(x, norm(x), sigma);
        &self.radial
    }

    fn directions(&self, x: &Vec3, xn: f64, out: &mut Vec<(Vec3, f64)>) {
        let tangency = self.law.kink_radius().filter(|&e| e < xn).map(|e| (e / xn).asin());
        let ball = (self.rho0 / xn).min(1.0).asin();
        match self.geometry.dim() {
            2 => {
                let phi_x = x[1].atan2(x[0]);
                let pi = std::f64::consts::PI;
                let mut cuts: Vec<f64> = vec![ball, pi - ball];
                for a in self.geometry.boundary_ray_angles() {
                    cuts.push((a - phi_x).rem_euclid(pi));
                    // the line leaves the ray inside the ball
                    let p = [self.rho0 * a.cos() - x[0], self.rho0 * a.sin() - x[1]];
                    cuts.push((p[1].atan2(p[0]) - phi_x).rem_euclid(pi));
                }
                if let Some(t) = tangency {
                    cuts.push(t);
                    cuts.push(pi - t);
                }
                cuts.retain(|&c| c > 1e-12 && c < pi - 1e-12);
                cuts.sort_by(f64::total_cmp);
                cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
                let mut ends = vec![0.0];
                ends.extend(cuts);
                ends.push(pi);
                let mut nodes = Vec::new();
                for k in 0..ends.len() - 1 {
                    let left = if k == 0 { End::Smooth } else { End::Kink };
                    let right = if k + 2 == ends.len() { End::Smooth } else { End::Kink };
                    angular_arc(ends[k], ends[k + 1], left, right, self.cfg.n_angular, &mut nodes);
                }
                for (psi, w) in nodes {
                    let phi = phi_x + psi;
                    out.push(([phi.cos(), phi.sin(), 0.0], w));
                }
            }
            _ => {
                let xh = scale(x, 1.0 / xn);
                let (a, b) = symmetric_frame(&xh);
                let half = std::f64::consts::FRAC_PI_2;
                let mut ends = vec![0.0];
                let mut cuts = vec![ball];
                cuts.extend(tangency);
                cuts.retain(|&c| c > 1e-12 && c < half - 1e-12);
                cuts.sort_by(f64::total_cmp);
                ends.extend(cuts);
                ends.push(half);
                let mut chis = Vec::new();
                for k in 0..ends.len() - 1 {
                    let left = if k == 0 { End::Smooth } else { End::Kink };
                    let right = if k + 2 == ends.len() { End::Smooth } else { End::Kink };
                    angular_arc(ends[k], ends[k + 1], left, right, self.cfg.n_angular, &mut chis);
                }
                let azimuth = self.azimuth_rule();
                for (chi, wc) in chis {
                    let (sc, cc) = chi.sin_cos();
                    for &(ph, wp) in &azimuth {
                        let (sp, cp) = ph.sin_cos();
                        let s = [
                            cc * xh[0] + sc * (cp * a[0] + sp * b[0]),
                            cc * xh[1] + sc * (cp * a[1] + sp * b[1]),
                            cc * xh[2] + sc * (cp * a[2] + sp * b[2]),
                        ];
                        out.push((s, wc * sc * wp));
                    }
                }
            }
        }
    }

    /// Trapezoid rule on `[0, π]`, doubled: the integrand is symmetric under
    /// reflection in the plane spanned by `x` and the cone axis.
    fn azimuth_rule(&self) -> Vec<(f64, f64)> {
        if self.geometry.is_full() && matches!(self.law, RadialLaw::Power { .. } | RadialLaw::InnerLinear { .. }) {
            // nothing depends on the azimuth around x
            return vec![(0.0, 2.0 * std::f64::consts::PI)];
        }
        let n = self.cfg.n_azimuthal.max(2);
        let h = std::f64::consts::PI / n as f64;
        (0..=n)
            .map(|j| {
                let w = if j == 0 || j == n { 0.5 * h } else { h };
                (j as f64 * h, 2.0 * w)
            })
            .collect()
    }

    fn radial_rule(&mut self, x: &Vec3, xn: f64, sigma: &Vec3) {
        self.radial.clear();
        self.ts.clear();
        self.breaks.clear();
        self.geometry.boundary_crossings(x, sigma, &mut self.ts);
        let kink = KINK_SCALE * xn;
        for &t in &self.ts {
            self.breaks.push(Break { r: t.abs(), scale: kink, kink: true });
        }
        if let Some(rho) = self.law.kink_radius() {
            self.ts.clear();
            sphere_crossings(x, sigma, rho, &mut self.ts);
            for &t in &self.ts {
                self.breaks.push(Break { r: t.abs(), scale: kink, kink: true });
            }
        }
        let rho0 = self.rho0;
        self.ts.clear();
        sphere_crossings(x, sigma, rho0, &mut self.ts);
        let excluded = (self.ts.len() == 2).then(|| {
            let (a, b) = (self.ts[0].abs(), self.ts[1].abs());
            (a.min(b), a.max(b))
        });
        for &t in &self.ts {
            self.breaks.push(Break { r: t.abs(), scale: f64::INFINITY, kink: false });
        }
        let xs = dot(x, sigma);
        let d = (xn * xn - xs * xs).max(0.0).sqrt();
        if xs.abs() > 1e-14 * xn && d >= rho0 {
            self.breaks.push(Break { r: xs.abs(), scale: 0.25 * (d - rho0).max(0.25 * d), kink: false });
        }
        self.breaks.retain(|b| b.r > 1e-14 * xn && b.r.is_finite());
        self.breaks.sort_by(|a, b| a.r.total_cmp(&b.r));
        let mut merged: Vec<Break> = Vec::with_capacity(self.breaks.len());
        for b in self.breaks.drain(..) {
            match merged.last_mut() {
                Some(last) if (b.r - last.r).abs() <= 1e-12 * xn => {
                    last.scale = last.scale.min(b.scale);
                    last.kink |= b.kink;
                }
                _ => merged.push(b),
            }
        }
        // kinks are resolved relative to the distance to their neighbours;
        // smooth breaks at least down to that distance
        for k in 0..merged.len() {
            let below = if k == 0 { merged[0].r } else { merged[k].r - merged[k - 1].r };
            let above = merged.get(k + 1).map_or(f64::INFINITY, |n| n.r - merged[k].r);
            let gap = below.min(above);
            let limit = if merged[k].kink { KINK_SCALE * gap } else { 0.5 * gap };
            // the weight r^{-1-2α} varies on the scale r itself
            merged[k].scale = merged[k].scale.min(limit).min(0.25 * merged[k].r);
        }

        let p = self.cfg.n_radial;
        let two_alpha = 2.0 * self.alpha;
        let r_min = self.cfg.r_min * xn;
        let tail_start = merged.last().map_or(0.0, |b| 2.0 * b.r).max(self.cfg.r_max * xn);

        // [0, b_1]: graded toward 0 down to r_lo, then toward b_1
        let first = merged.first().map_or(tail_start, |b| b.r);
        let r_lo = r_min.min(0.25 * first);
        let mut panels: Vec<(f64, f64)> = Vec::with_capacity(64);
        let first_scale = merged.first().map(|b| b.scale);
        graded_interval(0.0, first, Some(r_lo), first_scale, true, &mut panels);
        for k in 0..merged.len() {
            let a = merged[k];
            let (b, bs) = match merged.get(k + 1) {
                Some(nb) => (nb.r, Some(nb.scale)),
                None => (tail_start, None),
            };
            let mid = 0.5 * (a.r + b);
            if b > a.r && !excluded.is_some_and(|(lo, hi)| mid > lo && mid < hi) {
                graded_interval(a.r, b, Some(a.scale), bs, false, &mut panels);
            }
        }
        let rule = gauss(p);
        for &(lo, hi) in &panels {
            let h = hi - lo;
            for &(s, w) in rule {
                let r = lo + h * s;
                self.radial.push((r, w * h * r.powf(-1.0 - two_alpha)));
            }
        }
        // extrapolated |y| < r_lo contribution, carried by the innermost node;
        // δ(rσ)/r² is even in r, so the ratio is accurate to O(r²)
        if let Some(first) = self.radial.first_mut() {
            let r0 = first.0;
            let extra = r_lo.powf(2.0 - two_alpha) / ((2.0 - two_alpha) * r0 * r0);
            first.1 += extra;
            self.inner_weight = extra;
        }
        // tail: r = R s^{-1/κ}
        let far = self.law.far_exponent();
        let kappa = if far >= 0.0 { two_alpha } else { (two_alpha + far).max(1e-3) };
        // radii beyond 1e150 would overflow |y|². The mapped integrand tends
        // to a constant as s → 0, so a panel reaching past that collapses
        // to one node at its right end.
        let s_cut = (tail_start / 1e150).powf(kappa);
        let s_floor = TAIL_FLOOR.max(s_cut).min(0.5);
        let mut tail_panels = Vec::with_capacity(16);
        graded_toward_left(0.0, 1.0, s_floor, &mut tail_panels);
        let collapsed = below_cut(&tail_panels, rule, s_cut).then(|| tail_panels.remove(0).1);
        let pref = tail_start.powf(-two_alpha) / kappa;
        let mut push = |sv: f64, wh: f64| {
            let r = tail_start * sv.powf(-1.0 / kappa);
            self.radial.push((r, wh * pref * sv.powf(two_alpha / kappa - 1.0)));
        };
        if let Some(h0) = collapsed {
            push(h0, h0);
        }
        for &(lo, hi) in &tail_panels {
            let h = hi - lo;
            for &(s, w) in rule {
                push(lo + h * s, w * h);
            }
        }
    }

    /// Nodes for `2 ∫_{|z|<ρ_0} φ(δ(u, x, x - z)) K(x - z) dz`.
    fn vertex_ball(&self, x: &Vec3, visit: &mut impl FnMut(&QuadPoint)) {
        let rho0 = self.rho0;
        let dim = self.geometry.dim();
        let n = dim as f64;
        let p = self.cfg.n_radial;
        let rule = gauss(p);
        let big_n = n + 2.0 * self.alpha;

        // radial rules on [0, ρ_0]: (ρ, weight including ρ^{N-1})
        let beta_near = self.law.near_exponent();
        let mut breaks: Vec<f64> = self.law.kink_radius().filter(|&k| k < rho0).into_iter().collect();
        breaks.push(rho0);
        let mut inside: Vec<(f64, f64)> = Vec::new();
        let mut outside: Vec<(f64, f64)> = Vec::new();
        let mut lo = 0.0;
        for (k, &hi) in breaks.iter().enumerate() {
            let mut panels = Vec::new();
            if k == 0 && beta_near > 0.0 {
                // ρ = hi s^{1/q}: ρ^{N-1-β} dρ becomes a constant multiple of ds
                let q = n - beta_near;
                // radii below 1e-90 would overflow |z|^{-β}; as in the tail,
                // a panel reaching past that collapses to one node
                let s_cut = (1e-90 / hi).powf(q);
                graded_toward_left(0.0, 1.0, BALL_FLOOR.max(s_cut).min(0.5), &mut panels);
                let collapsed = below_cut(&panels, rule, s_cut).then(|| panels.remove(0).1);
                let mut push = |sv: f64, wh: f64| {
                    inside.push((hi * sv.powf(1.0 / q), wh * hi.powi(dim as i32) / q * sv.powf(n / q - 1.0)));
                };
                if let Some(h0) = collapsed {
                    push(h0, h0);
                }
                for &(a, b) in &panels {
                    for &(s, w) in rule {
                        push(a + (b - a) * s, w * (b - a));
                    }
                }
            } else if k == 0 {
                graded_toward_left(0.0, hi, BALL_FLOOR * hi, &mut panels);
                push_panels(&panels, rule, dim, &mut inside);
            } else {
                graded_interval(lo, hi, Some(KINK_SCALE * (hi - lo)), None, false, &mut panels);
                push_panels(&panels, rule, dim, &mut inside);
            }
            lo = hi;
        }
        push_panels(&[(0.0, 0.5 * rho0), (0.5 * rho0, rho0)], rule, dim, &mut outside);

        let mut emit = |omega: &Vec3, w_omega: f64, radial: &[(f64, f64)]| {
            for &(rho, wr) in radial {
                let z = scale(omega, rho);
                let y = axpy(x, -1.0, &z);
                let yn = norm(&y);
                let sigma = scale(&y, 1.0 / yn);
                let zp = axpy(x, 1.0, &y);
                let weight = 2.0 * w_omega * wr * yn.powf(-big_n);
                visit(&QuadPoint { zp, zm: z, sigma, weight, extrapolated: 0.0, region: Region::Near });
            }
        };
        let pa = self.cfg.n_angular;
        let two_pi = 2.0 * std::f64::consts::PI;
        match self.geometry {
            Geometry::FullPlane => {
                let mut nodes = Vec::new();
                for k in 0..4 {
                    let a = k as f64 * two_pi / 4.0;
                    angular_arc(a, a + two_pi / 4.0, End::Smooth, End::Smooth, pa, &mut nodes);
                }
                for (th, w) in nodes {
                    emit(&[th.cos(), th.sin(), 0.0], w, &inside);
                }
            }
            Geometry::Sector { aperture } => {
                let mut nodes = Vec::new();
                angular_arc(0.0, aperture, End::Kink, End::Kink, pa, &mut nodes);
                for &(th, w) in &nodes {
                    emit(&[th.cos(), th.sin(), 0.0], w, &inside);
                }
                nodes.clear();
                let rest = two_pi - aperture;
                angular_arc(aperture, aperture + 0.5 * rest, End::Smooth, End::Smooth, pa, &mut nodes);
                angular_arc(aperture + 0.5 * rest, two_pi, End::Smooth, End::Smooth, pa, &mut nodes);
                for (th, w) in nodes {
                    emit(&[th.cos(), th.sin(), 0.0], w, &outside);
                }
            }
            Geometry::FullSpace3 | Geometry::Cap { .. } => {
                let theta0 = match self.geometry {
                    Geometry::Cap { half_angle } => half_angle,
                    _ => std::f64::consts::PI,
                };
                let phi_x = x[1].atan2(x[0]);
                let azimuth = self.azimuth_rule_ball();
                let mut nodes = Vec::new();
                let cap_end = if theta0 < std::f64::consts::PI { End::Kink } else { End::Smooth };
                angular_arc(0.0, theta0, End::Smooth, cap_end, pa, &mut nodes);
                let n_in = nodes.len();
                if theta0 < std::f64::consts::PI {
                    angular_arc(theta0, std::f64::consts::PI, End::Smooth, End::Smooth, pa, &mut nodes);
                }
                for (k, &(th, w)) in nodes.iter().enumerate() {
                    let (st, ct) = th.sin_cos();
                    let radial = if k < n_in { &inside } else { &outside };
                    for &(ph, wp) in &azimuth {
                        let (sp, cp) = (phi_x + ph).sin_cos();
                        emit(&[st * cp, st * sp, ct], w * st * wp, radial);
                    }
                }
            }
        }
    }

    fn azimuth_rule_ball(&self) -> Vec<(f64, f64)> {
        let n = self.cfg.n_azimuthal.max(2);
        let h = std::f64::consts::PI / n as f64;
        (0..=n)
            .map(|j| {
                let w = if j == 0 || j == n { 0.5 * h } else { h };
                (j as f64 * h, 2.0 * w)
            })
            .collect()
    }
}

fn push_panels(panels: &[(f64, f64)], rule: &[(f64, f64)], dim: usize, out: &mut Vec<(f64, f64)>) {
    for &(a, b) in panels {
        for &(s, w) in rule {
            let rho = a + (b - a) * s;
            out.push((rho, w * (b - a) * rho.powi(dim as i32 - 1)));
        }
    }
}

/// Orthonormal `(a, b)` completing `xh`, with `b` normal to the plane of
/// `xh` and the cone axis `e_3`.
fn symmetric_frame(xh: &Vec3) -> (Vec3, Vec3) {
    let mut b = [-xh[1], xh[0], 0.0];
    let nb = norm(&b);
    b = if nb > 1e-12 { scale(&b, 1.0 / nb) } else { [0.0, 1.0, 0.0] };
    let a = [xh[1] * b[2] - xh[2] * b[1], xh[2] * b[0] - xh[0] * b[2], xh[0] * b[1] - xh[1] * b[0]];
    (a, b)
}

/// Gauss nodes on `[a, b]`, split at the midpoint and graded toward kink ends.
fn angular_arc(a: f64, b: f64, left: End, right: End, p: usize, out: &mut Vec<(f64, f64)>) {
    let mid = 0.5 * (a + b);
    let rule = gauss(p);
    let mut push_half = |end: f64, other: f64, kind: End| {
        let h = other - end; // signed
        let mut panels = Vec::new();
        let floor = if kind == End::Kink { ANGULAR_KINK_SCALE / h.abs().max(1e-300) } else { 1.0 };
        graded_toward_left(0.0, 1.0, floor, &mut panels);
        for &(lo, hi) in &panels {
            let w0 = hi - lo;
            for &(s, w) in rule {
                let sv = lo + w0 * s;
                out.push((end + h * sv, w * w0 * h.abs()));
            }
        }
    };
    push_half(a, mid, left);
    push_half(b, mid, right);
}

/// Whether the lowest node of the innermost panel falls below `cut`.
fn below_cut(panels: &[(f64, f64)], rule: &[(f64, f64)], cut: f64) -> bool {
    let first = rule.iter().map(|n| n.0).fold(f64::INFINITY, f64::min);
    panels.first().is_some_and(|&(lo, hi)| lo + (hi - lo) * first < cut)
}

/// Panels on `[a, b]` graded geometrically toward `a` until the innermost
/// panel is no wider than `floor`; the innermost panel starts at `a`.
fn graded_toward_left(a: f64, b: f64, floor: f64, out: &mut Vec<(f64, f64)>) {
    let start = out.len();
    let h = b - a;
    let mut hi = h;
    let mut lo = h * GRADING_RATIO;
    while lo > floor && lo > 0.0 {
        out.push((a + lo, a + hi));
        hi = lo;
        lo *= GRADING_RATIO;
    }
    out.push((a, a + hi));
    out[start..].reverse();
}

/// Panels on `[a, b]`, graded toward each end that carries a scale. When
/// `cut_left` is set the region below the left scale is removed instead of
/// being covered by an innermost panel.
fn graded_interval(
    a: f64,
    b: f64,
    left: Option<f64>,
    right: Option<f64>,
    cut_left: bool,
    out: &mut Vec<(f64, f64)>,
) {
    let mid = 0.5 * (a + b);
    let half = mid - a;
    let start = out.len();
    match left {
        Some(s) if s < half => {
            let mut hi = half;
            let mut lo = half * GRADING_RATIO;
            while lo > s {
                out.push((a + lo, a + hi));
                hi = lo;
                lo *= GRADING_RATIO;
            }
            if cut_left {
                if a + s < a + hi {
                    out.push((a + s, a + hi));
                }
            } else {
                out.push((a, a + hi));
            }
        }
        Some(s) if cut_left => {
            if a + s < mid {
                out.push((a + s, mid));
            }
        }
        _ => out.push((a, mid)),
    }
    out[start..].reverse();
    match right {
        Some(s) if s < half => {
            let mut lo = half;
            let mut next = half * GRADING_RATIO;
            let mut tmp = Vec::new();
            while next > s {
                tmp.push((b - lo, b - next));
                lo = next;
                next *= GRADING_RATIO;
            }
            tmp.push((b - lo, b));
            out.extend(tmp);
        }
        _ => out.push((mid, b)),
    }
}

/// Split value of one operator evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SplitIntegral {
    pub core: f64,
    pub near_pm_x: (f64, f64),
    pub inner_bound: f64,
    pub outer_bound: f64,
}

impl SplitIntegral {
    pub fn total(&self) -> f64 {
        self.core + self.near_pm_x.0 + self.near_pm_x.1
    }

    /// Reported uncertainty, excluding the refinement estimate.
    pub fn uncertainty(&self) -> f64 {
        self.inner_bound + self.outer_bound
    }
}

#[derive(Default, Clone, Copy)]
struct Parts {
    core: Compensated,
    near: Compensated,
}

impl Parts {
    #[inline]
    fn add(&mut self, region: Region, v: f64) {
        match region {
            Region::Core => self.core.add(v),
            Region::Near => self.near.add(v),
        }
    }

    fn total(&self) -> f64 {
        self.core.value() + self.near.value()
    }

    fn split(&self) -> SplitIntegral {
        SplitIntegral {
            core: self.core.value(),
            near_pm_x: (0.5 * self.near.value(), 0.5 * self.near.value()),
            inner_bound: 0.0,
            outer_bound: 0.0,
        }
    }
}

#[inline]
pub fn s_plus(t: f64, lambda: f64, big_lambda: f64) -> f64 {
    if t > 0.0 {
        big_lambda * t
    } else {
        lambda * t
    }
}

#[inline]
pub fn s_minus(t: f64, lambda: f64, big_lambda: f64) -> f64 {
    if t > 0.0 {
        lambda * t
    } else {
        big_lambda * t
    }
}

/// Evaluate `F(u)(x)` for `u(z) = angular(θ(z)) · law(|z|)` in the cone of
/// `geometry` (zero outside).
pub fn integrate_field(
    geometry: Geometry,
    law: RadialLaw,
    angular: &(impl Fn(f64) -> f64 + ?Sized),
    x: &Vec3,
    op: &OperatorSpec,
    cfg: &QuadratureConfig,
) -> Result<SplitIntegral> {
    let u = |z: &Vec3| -> f64 {
        match geometry.angle(z) {
            Some(th) => angular(th) * law.value(norm(z)),
            None => 0.0,
        }
    };
    let ux = u(x);
    let dim = geometry.dim();
    let (lam, big) = (op.lambda_lower, op.lambda_upper);
    let mut quad = LineQuadrature::new(geometry, law, op.alpha, cfg);
    match op.kind {
        OperatorKind::IsaacsFinite => {
            let kernels = op.kernels.as_deref().unwrap_or_default();
            let mut parts = vec![Parts::default(); kernels.len()];
            let mut inner = 0.0f64;
            quad.visit(x, |q| {
                let d = (u(&q.zp) - ux) + (u(&q.zm) - ux);
                for (k, kern) in kernels.iter().enumerate() {
                    parts[k].add(q.region, q.weight * kern.kernel.eval(dim, &q.sigma) * d);
                }
                inner += (q.extrapolated * d).abs();
            });
            let totals: Vec<f64> = parts.iter().map(Parts::total).collect();
            let pick = isaacs_select(op, &totals);
            let mut s = parts[pick].split();
            s.inner_bound = inner * cfg.r_min / cfg.eta;
            Ok(s)
        }
        kind => {
            let mut parts = Parts::default();
            let mut inner = 0.0f64;
            quad.visit(x, |q| {
                let d = (u(&q.zp) - ux) + (u(&q.zm) - ux);
                let v = match kind {
                    OperatorKind::PucciPlus => s_plus(d, lam, big),
                    OperatorKind::PucciMinus => s_minus(d, lam, big),
                    _ => big * d,
                };
                parts.add(q.region, q.weight * v);
                inner += (q.extrapolated * v).abs();
            });
            let mut s = parts.split();
            s.inner_bound = inner * cfg.r_min / cfg.eta;
            Ok(s)
        }
    }
}

/// Index of the kernel realising `inf_a sup_b` of the per-kernel totals.
pub fn isaacs_select(op: &OperatorSpec, totals: &[f64]) -> usize {
    let kernels = op.kernels.as_deref().unwrap_or_default();
    let mut best: Option<(f64, usize)> = None;
    for a in op.isaacs_outer_indices() {
        let mut inner: Option<(f64, usize)> = None;
        for (k, kern) in kernels.iter().enumerate() {
            if kern.a == a && inner.is_none_or(|(v, _)| totals[k] > v) {
                inner = Some((totals[k], k));
            }
        }
        if let Some((v, k)) = inner {
            if best.is_none_or(|(bv, _)| v < bv) {
                best = Some((v, k));
            }
        }
    }
    best.map_or(0, |(_, k)| k)
}

/// `F(u)(x)` for a sampled homogeneous profile.
pub fn integrate_extremal(
    profile: &HomogeneousProfile,
    x: &Vec3,
    op: &OperatorSpec,
    cfg: &QuadratureConfig,
) -> Result<SplitIntegral> {
    check_inputs(profile, op, cfg)?;
    if norm(x) == 0.0 {
        return Err(Error::Precondition("evaluation point must be nonzero".into()));
    }
    let geometry = Geometry::from_cone(&profile.cone)?;
    let grid = AngularGrid::for_profile(profile)?;
    let samples = &profile.samples;
    let angular = |th: f64| grid.eval(samples, th);
    integrate_field(geometry, RadialLaw::Power { beta: profile.beta }, &angular, x, op, cfg)
}

pub(crate) fn check_inputs(profile: &HomogeneousProfile, op: &OperatorSpec, cfg: &QuadratureConfig) -> Result<()> {
    let n = profile.cone.dimension as f64;
    let lo = -2.0 * op.alpha;
    if !(profile.beta > lo && profile.beta < n) {
        return Err(Error::BetaOutOfRange { beta: profile.beta, lo, hi: n });
    }
    let v: Vec<String> = op
        .validate()
        .into_iter()
        .chain(cfg.validate())
        .chain(profile.validate())
        .map(|v| format!("{}: {}", v.field, v.message))
        .collect();
    if !v.is_empty() {
        return Err(Error::Invalid(v.join("; ")));
    }
    Ok(())
}

/// Maximum number of doublings attempted by [`refine_until`].
pub const MAX_REFINEMENTS: usize = 4;

/// Doubles the resolution until two successive totals differ by less than
/// `cfg.tol`. Returns the last value and the last observed difference.
pub fn refine_until(
    profile: &HomogeneousProfile,
    x: &Vec3,
    op: &OperatorSpec,
    cfg: &QuadratureConfig,
) -> Result<(f64, f64)> {
    check_inputs(profile, op, cfg)?;
    let geometry = Geometry::from_cone(&profile.cone)?;
    let grid = AngularGrid::for_profile(profile)?;
    let angular = |th: f64| grid.eval(&profile.samples, th);
    refine_field(geometry, RadialLaw::Power { beta: profile.beta }, &angular, x, op, cfg)
}

/// [`refine_until`] for a field given by a radial law and an angular function.
pub fn refine_field(
    geometry: Geometry,
    law: RadialLaw,
    angular: &(impl Fn(f64) -> f64 + ?Sized),
    x: &Vec3,
    op: &OperatorSpec,
    cfg: &QuadratureConfig,
) -> Result<(f64, f64)> {
    if norm(x) == 0.0 {
        return Err(Error::Precondition("evaluation point must be nonzero".into()));
    }
    let mut cfg = cfg.clone();
    let mut prev = integrate_field(geometry, law, angular, x, op, &cfg)?.total();
    let mut diff = f64::INFINITY;
    for _ in 0..MAX_REFINEMENTS {
        cfg = cfg.refined();
        let next = integrate_field(geometry, law, angular, x, op, &cfg)?.total();
        diff = (next - prev).abs();
        prev = next;
        if diff < cfg.tol {
            return Ok((prev, diff));
        }
    }
    Err(Error::ToleranceNotMet { last_diff: diff, tol: cfg.tol })
}

/// Area of the unit sphere `S^{N-1}`.
pub fn sphere_area(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI,
        n => 2.0 * std::f64::consts::PI / (n as f64 - 2.0) * sphere_area(n - 2),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn full(dim: usize) -> Geometry {
        if dim == 2 {
            Geometry::FullPlane
        } else {
            Geometry::FullSpace3
        }
    }

    #[test]
    fn gauss_rule_integrates_polynomials() {
        let r = gauss(5);
        let v: f64 = r.iter().map(|&(x, w)| w * x.powi(9)).sum();
        assert!((v - 0.1).abs() < 1e-14);
    }

    #[test]
    fn second_difference_kills_affine() {
        let u = |z: &Vec3| 3.0 * z[0] - 2.0 * z[1] + 0.5;
        let d = second_difference(u, &[0.3, -1.2, 0.0], &[0.7, 0.4, 0.0]);
        assert!(d.abs() < 1e-14);
        let q = |z: &Vec3| dot(z, z);
        let y = [0.7, 0.4, -0.1];
        let d = second_difference(q, &[0.3, -1.2, 2.0], &y);
        assert!((d - 2.0 * dot(&y, &y)).abs() < 1e-13);
    }

    #[test]
    fn second_difference_of_radial_power() {
        let beta = 0.7;
        let u = |z: &Vec3| norm(z).powf(-beta);
        let e1 = [1.0, 0.0, 0.0];
        let y = [0.2, 0.5, 0.0];
        let expect = norm(&axpy(&e1, 1.0, &y)).powf(-beta) + norm(&axpy(&e1, -1.0, &y)).powf(-beta) - 2.0;
        assert!((second_difference(u, &e1, &y) - expect).abs() < 1e-14);
    }

    #[test]
    fn zero_homogeneity_constant_gives_zero() {
        let cfg = QuadratureConfig::default();
        for dim in [2, 3] {
            let v = integrate_field(
                full(dim),
                RadialLaw::Power { beta: 0.0 },
                &|_| 1.0,
                &[1.0, 0.0, 0.0],
                &OperatorSpec::pucci_plus(0.5, 1.0, 2.0),
                &cfg,
            )
            .unwrap();
            assert!(v.total().abs() < 1e-12);
        }
    }

    #[test]
    fn graded_intervals_cover() {
        let mut p = vec![];
        graded_interval(0.0, 3.0, Some(1e-4), Some(1e-3), true, &mut p);
        let mut prev = 1e-4;
        for &(a, b) in &p {
            assert!((a - prev).abs() < 1e-12 && b > a);
            prev = b;
        }
        assert!((prev - 3.0).abs() < 1e-12);
    }

    /// `∫ 2|y|² e^{-|y|²} |y|^{-N-2α} dy = σ_{N-1} Γ(1-α)`.
    #[test]
    fn gaussian_weighted_quadratic_matches_closed_form() {
        // Γ(1/2) and Γ(3/4)
        for (alpha, gamma) in [(0.5, PI.sqrt()), (0.25, 1.225_416_702_465_177_6)] {
            for dim in [2usize, 3] {
                let x = [1.0, 0.0, 0.0];
                let cfg = QuadratureConfig::default();
                let mut quad = LineQuadrature::new(full(dim), RadialLaw::Power { beta: 0.0 }, alpha, &cfg);
                let mut acc = Compensated::default();
                quad.visit(&x, |q| {
                    let y = axpy(&q.zp, -1.0, &x);
                    let r2 = dot(&y, &y);
                    acc.add(q.weight * 2.0 * r2 * (-r2).exp());
                });
                let expect = sphere_area(dim) * gamma;
                assert!((acc.value() - expect).abs() < 1e-6 * expect, "dim {dim}: {} vs {expect}", acc.value());
            }
        }
    }

    #[test]
    fn fundamental_solution_is_harmonic() {
        // |x|^{2α-N} is annihilated by the fractional Laplacian away from 0
        for (dim, alpha) in [(2usize, 0.5), (2, 0.25), (3, 0.75), (3, 0.3)] {
            let beta = dim as f64 - 2.0 * alpha;
            let v = integrate_field(
                full(dim),
                RadialLaw::Power { beta },
                &|_| 1.0,
                &[1.0, 0.0, 0.0],
                &OperatorSpec::fractional(alpha),
                &QuadratureConfig::default(),
            )
            .unwrap();
            let scale = v.core.abs() + v.near_pm_x.0.abs() + v.near_pm_x.1.abs();
            assert!(v.total().abs() < 1e-6 * scale, "dim {dim} α {alpha}: {}", v.total());
        }
    }

    #[test]
    fn half_plane_power_is_harmonic() {
        for alpha in [0.25, 0.5, 0.75] {
            let g = Geometry::Sector { aperture: PI };
            for th in [0.2, 1.0, PI / 2.0, 2.5] {
                let x = g.direction(th);
                let v = integrate_field(
                    g,
                    RadialLaw::Power { beta: -alpha },
                    &|t: f64| t.sin().powf(alpha),
                    &x,
                    &OperatorSpec::fractional(alpha),
                    &QuadratureConfig::default(),
                )
                .unwrap();
                assert!(v.total().abs() < 1e-5, "α {alpha} θ {th}: {}", v.total());
            }
        }
    }

    #[test]
    fn kelvin_half_plane_power_is_harmonic() {
        for alpha in [0.25, 0.5, 0.75] {
            let g = Geometry::Sector { aperture: PI };
            for th in [0.3, 1.4, 2.9] {
                let v = integrate_field(
                    g,
                    RadialLaw::Power { beta: 2.0 - alpha },
                    &|t: f64| t.sin().powf(alpha),
                    &g.direction(th),
                    &OperatorSpec::fractional(alpha),
                    &QuadratureConfig::default(),
                )
                .unwrap();
                assert!(v.total().abs() < 1e-5, "α {alpha} θ {th}: {}", v.total());
            }
        }
    }

    #[test]
    fn cap_half_space_power_is_harmonic() {
        let alpha = 0.5;
        let g = Geometry::Cap { half_angle: PI / 2.0 };
        for th in [0.0, 0.7, 1.3] {
            let v = integrate_field(
                g,
                RadialLaw::Power { beta: -alpha },
                &|t: f64| t.cos().powf(alpha),
                &g.direction(th),
                &OperatorSpec::fractional(alpha),
                &QuadratureConfig { n_azimuthal: 48, ..Default::default() },
            )
            .unwrap();
            assert!(v.total().abs() < 1e-3, "θ {th}: {}", v.total());
        }
    }
}
