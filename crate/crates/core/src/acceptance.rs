//! The acceptance suite: twelve numbered checks with fixed tolerances.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::branch::{fixed_point_branch, solve_auxiliary, AuxiliaryStart};
use crate::cache::{CacheKey, ExponentCache};
use crate::error::{Error, Result};
use crate::exponents::{dimension_like, CriticalExponents, ProfileResolution, ScanPlan, SymbolCurve};
use crate::geometry::Geometry;
use crate::liouville::{barrier_subsolution_search, barrier_supersolution_search, gamma_iteration, liouville_threshold};
use crate::model::{AngularKernel, ConeSpec, IndexedKernel, OperatorSpec, QuadratureConfig};
use crate::quadrature::{refine_field, RadialLaw};
use crate::roots::{linspace, ROOT_TOL};

pub const CRITERIA: [(u8, &str); 12] = [
    (1, "half-space anchor"),
    (2, "threshold reproduction"),
    (3, "dimension-like anchor"),
    (4, "symbol structure"),
    (5, "harmonicity residual"),
    (6, "monotonicity"),
    (7, "exponent bounds"),
    (8, "branch blow-up"),
    (9, "Kelvin relation"),
    (10, "barrier inequalities"),
    (11, "auxiliary bound"),
    (12, "gamma iteration"),
];

/// Apertures of the sector sweeps.
pub const APERTURES: [f64; 5] = [PI / 3.0, PI / 2.0, 0.75 * PI, PI, 1.5 * PI];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub quadrature: QuadratureConfig,
    pub resolution: ProfileResolution,
}

impl Default for Settings {
    fn default() -> Self {
        Self { quadrature: QuadratureConfig::coarse(), resolution: ProfileResolution::with_nodes(12) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub id: u8,
    pub name: String,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mark = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "[{mark}] {:>2} {}: {}", self.id, self.name, self.detail)
    }
}

/// The four operators of the sweeps, all with α = 1/2 and (λ, Λ) = (1, 2).
pub fn sweep_operators() -> Vec<(&'static str, OperatorSpec)> {
    vec![
        ("fractional", OperatorSpec::fractional(0.5)),
        ("M+", OperatorSpec::pucci_plus(0.5, 1.0, 2.0)),
        ("Isaacs", two_kernel_isaacs()),
        ("M-", OperatorSpec::pucci_minus(0.5, 1.0, 2.0)),
    ]
}

/// `sup` of two anisotropic kernels with densities `3/2 ± cos(2θ)/2`.
pub fn two_kernel_isaacs() -> OperatorSpec {
    let k1 = AngularKernel::planar_from_fn(32, |t| 1.5 + 0.5 * (2.0 * t).cos());
    let k2 = AngularKernel::planar_from_fn(32, |t| 1.5 - 0.5 * (2.0 * t).cos());
    OperatorSpec::isaacs(
        0.5,
        1.0,
        2.0,
        vec![IndexedKernel { a: 0, b: 0, kernel: k1 }, IndexedKernel { a: 0, b: 1, kernel: k2 }],
    )
}

pub struct Suite {
    pub settings: Settings,
    pub cache: ExponentCache,
}

type Check = Result<(bool, String)>;

impl Suite {
    pub fn new(settings: Settings, cache: ExponentCache) -> Self {
        Self { settings, cache }
    }

    pub fn exponents(&mut self, cone: &ConeSpec, op: &OperatorSpec) -> Result<CriticalExponents> {
        let key = CacheKey {
            operator: op.clone(),
            cone: cone.clone(),
            scan: ScanPlan::default(),
            quadrature: self.settings.quadrature.clone(),
            resolution: self.settings.resolution,
        };
        Ok(self.cache.get_or_compute(&key)?.0)
    }

    fn cfg(&self) -> &QuadratureConfig {
        &self.settings.quadrature
    }

    /// Run the criteria in `ids` (all when empty), reporting in id order.
    /// The bounds check runs last so it sees every exponent computed.
    pub fn run(&mut self, ids: &[u8], mut report: impl FnMut(&Outcome)) -> Vec<Outcome> {
        let mut order: Vec<u8> = if ids.is_empty() { CRITERIA.iter().map(|c| c.0).collect() } else { ids.to_vec() };
        order.sort_unstable();
        order.dedup();
        if let Some(k) = order.iter().position(|&i| i == 7) {
            order.remove(k);
            order.push(7);
        }
        let mut out: Vec<Outcome> = order
            .into_iter()
            .map(|id| {
                let o = self.run_one(id);
                report(&o);
                o
            })
            .collect();
        out.sort_by_key(|o| o.id);
        out
    }

    pub fn run_one(&mut self, id: u8) -> Outcome {
        let start = std::time::Instant::now();
        let name = CRITERIA.iter().find(|c| c.0 == id).map_or("unknown", |c| c.1).to_string();
        let result = match id {
            1 => self.half_space_anchor(),
            2 => self.threshold_reproduction(),
            3 => self.dimension_like_anchor(),
            4 => self.symbol_structure(),
            5 => self.harmonicity_residual(),
            6 => self.monotonicity(),
            7 => self.exponent_bounds(),
            8 => self.branch_blow_up(),
            9 => self.kelvin_relation(),
            10 => self.barrier_inequalities(),
            11 => self.auxiliary_bound(),
            12 => gamma_limit_check(),
            _ => Err(Error::Invalid(format!("no criterion {id}"))),
        };
        let (pass, detail) = match result {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e:?}")),
        };
        Outcome { id, name, pass, detail, seconds: start.elapsed().as_secs_f64() }
    }

    fn half_space(&mut self, alpha: f64) -> Result<(f64, f64)> {
        let ex = self.exponents(&ConeSpec::sector(PI), &OperatorSpec::fractional(alpha))?;
        let minus = ex.beta_minus.ok_or(Error::MissingExponents)?;
        Ok((ex.beta_plus.value, minus.value))
    }

    fn half_space_anchor(&mut self) -> Check {
        let mut pass = true;
        let mut parts = vec![];
        for alpha in [0.25, 0.5, 0.75] {
            let (p, m) = self.half_space(alpha)?;
            let ok = (p - (2.0 - alpha)).abs() < 1e-2 && (m + alpha).abs() < 1e-2;
            pass &= ok;
            parts.push(format!("α={alpha}: β⁺={p:.5} β⁻={m:.5}"));
        }
        Ok((pass, parts.join(", ")))
    }

    fn threshold_reproduction(&mut self) -> Check {
        let mut pass = true;
        let mut parts = vec![];
        for alpha in [0.25, 0.5, 0.75] {
            let (p, m) = self.half_space(alpha)?;
            let n = 2.0;
            let expect = (n + alpha) / (n - alpha);
            let tp = liouville_threshold(p, alpha)?;
            // β⁺ is pinned to 1e-2; carry that through dp/dβ = -2α/β²
            let allowed = 2.0 * alpha / (p * p) * 1e-2;
            let tm = liouville_threshold(m, alpha)?;
            let ok = (tp - expect).abs() <= allowed && (tm + 1.0).abs() < 1e-2;
            pass &= ok;
            parts.push(format!("α={alpha}: p⁺={tp:.5} (want {expect:.5} ± {allowed:.1e}) p⁻={tm:.5}"));
        }
        Ok((pass, parts.join(", ")))
    }

    fn dimension_like_anchor(&mut self) -> Check {
        let cfg = self.cfg().clone();
        let mut pass = true;
        let mut parts = vec![];
        let alpha = 0.5;
        for dim in [2usize, 3] {
            let n = dim as f64;
            let (p, m) = dimension_like(&OperatorSpec::fractional(alpha), dim, &cfg)?;
            let ok = (p.value - n).abs() < 1e-3 && (m.value - n).abs() < 1e-3;
            pass &= ok;
            parts.push(format!("N={dim} fractional Ñ={:.6}", p.value));
            let (pp, pm) = dimension_like(&OperatorSpec::pucci_plus(alpha, 1.0, 2.0), dim, &cfg)?;
            let ok = pm.value >= n && n >= pp.value && pm.value > 2.0 * alpha;
            pass &= ok;
            parts.push(format!("N={dim} Pucci Ñ⁺={:.4} Ñ⁻={:.4}", pp.value, pm.value));
        }
        Ok((pass, parts.join(", ")))
    }

    fn symbol_structure(&mut self) -> Check {
        let cfg = self.cfg().clone();
        let mut pass = true;
        let mut parts = vec![];
        for (name, op) in [("fractional", OperatorSpec::fractional(0.5)), ("M+", OperatorSpec::pucci_plus(0.5, 1.0, 2.0))] {
            let betas = linspace(-1.0 + 0.05, 2.0 - 0.05, 39);
            let c = SymbolCurve::radial_symbol(&op, 2, &cfg, &betas)?;
            let mid = c.values[c.values.len() / 2].abs();
            let ends = c.values[0].abs().min(c.values[c.values.len() - 1].abs());
            let ok = c.sign_changes() == 2 && c.is_strictly_convex() && ends > 10.0 * mid;
            pass &= ok;
            // the sampled values must be resolved to tol under refinement
            let mut spread: f64 = 0.0;
            for beta in [-0.5, 0.5, 1.5] {
                let law = RadialLaw::Power { beta };
                let (_, d) = refine_field(Geometry::FullPlane, law, &|_| 1.0, &[1.0, 0.0, 0.0], &op, &cfg)?;
                spread = spread.max(d);
            }
            parts.push(format!(
                "{name}: {} sign changes, convex {}, |c| ends {ends:.1} vs mid {mid:.3}, refinement {spread:.1e}",
                c.sign_changes(),
                c.is_strictly_convex()
            ));
        }
        Ok((pass, parts.join(", ")))
    }

    fn harmonicity_residual(&mut self) -> Check {
        let cfg = self.cfg().clone();
        let alpha = 0.5;
        let op = OperatorSpec::fractional(alpha);
        let g = Geometry::Sector { aperture: PI };
        let f = |t: f64| t.sin().max(0.0).powf(alpha);
        let mut worst: f64 = 0.0;
        for r in [1.0, 2.0] {
            for k in 1..=5 {
                let t = k as f64 * PI / 6.0;
                let x = [r * t.cos(), r * t.sin(), 0.0];
                let (v, _) = refine_field(g, RadialLaw::Power { beta: -alpha }, &f, &x, &op, &cfg)?;
                worst = worst.max(v.abs());
            }
        }
        Ok((worst < cfg.tol, format!("max |F(u)| = {worst:.2e} over 10 points, tol {:.0e}", cfg.tol)))
    }

    fn monotonicity(&mut self) -> Check {
        let tol = 2.0 * ROOT_TOL;
        let mut pass = true;
        let mut parts = vec![];
        let mut table: Vec<Vec<(f64, Option<f64>)>> = vec![];
        for (name, op) in sweep_operators() {
            let mut row = vec![];
            for &a in &APERTURES {
                let ex = self.exponents(&ConeSpec::sector(a), &op)?;
                row.push((ex.beta_plus.value, ex.beta_minus.map(|m| m.value)));
            }
            let plus_dec = row.windows(2).all(|w| w[1].0 < w[0].0);
            let minus: Vec<f64> = row.iter().filter_map(|r| r.1).collect();
            let minus_inc = minus.windows(2).all(|w| w[1] > w[0]);
            pass &= plus_dec && minus_inc;
            parts.push(format!(
                "{name} β⁺ [{}] β⁻ [{}]",
                row.iter().map(|r| format!("{:.4}", r.0)).collect::<Vec<_>>().join(" "),
                row.iter().map(|r| r.1.map_or("-".into(), |m| format!("{m:.4}"))).collect::<Vec<_>>().join(" ")
            ));
            table.push(row);
        }
        // rows: fractional, M+, Isaacs, M-
        let mut chain = true;
        for ((p_plus, i), p_minus) in table[1].iter().zip(&table[2]).zip(&table[3]) {
            chain &= p_plus.0 <= i.0 + tol && i.0 <= p_minus.0 + tol;
            if let (Some(a), Some(b), Some(c)) = (p_minus.1, i.1, p_plus.1) {
                chain &= a <= b + tol && b <= c + tol && c <= tol;
            }
        }
        pass &= chain;
        parts.push(format!("operator chain {}", if chain { "holds" } else { "violated" }));
        Ok((pass, parts.join("; ")))
    }

    fn exponent_bounds(&mut self) -> Check {
        let mut violations = vec![];
        let mut count = 0;
        for rec in self.cache.records() {
            let dim = rec.key.cone.dimension;
            let alpha = rec.key.operator.alpha;
            for r in std::iter::once(&rec.exponents.beta_plus).chain(rec.exponents.beta_minus.iter()) {
                count += 1;
                violations.extend(r.check_bounds(dim, alpha).into_iter().map(|v| v.message));
            }
        }
        if count == 0 {
            return Ok((false, "no exponents computed".into()));
        }
        let detail = if violations.is_empty() {
            format!("{count} exponents inside their ranges")
        } else {
            violations.join("; ")
        };
        Ok((violations.is_empty(), detail))
    }

    fn branch_blow_up(&mut self) -> Check {
        let cone = ConeSpec::sector(PI);
        let op = OperatorSpec::fractional(0.5);
        let (p, _) = self.half_space(0.5)?;
        let cfg = self.cfg().clone();
        let b = fixed_point_branch(&cone, &op, &cfg, &self.settings.resolution, &[0.8, 1.0, 1.2, 1.3, 1.4], p)?;
        let blow = b.blow_up.ok_or(Error::BranchDiverged { beta: p })?;
        Ok(((blow - p).abs() < 5e-2, format!("blow-up {blow:.4} vs β⁺ {p:.4}")))
    }

    fn kelvin_relation(&mut self) -> Check {
        let mut pass = true;
        let mut parts = vec![];
        for a in [PI / 2.0, PI, 1.5 * PI] {
            let ex = self.exponents(&ConeSpec::sector(a), &OperatorSpec::fractional(0.5))?;
            let m = ex.beta_minus.ok_or(Error::MissingExponents)?;
            let dev = (ex.beta_plus.value + m.value - 1.0).abs();
            pass &= dev < 2e-2;
            parts.push(format!("aperture {:.3}π: {dev:.2e}", a / PI));
        }
        Ok((pass, parts.join(", ")))
    }

    fn barrier_inequalities(&mut self) -> Check {
        let cone = ConeSpec::sector(PI);
        let op = OperatorSpec::fractional(0.5);
        let (p, m) = self.half_space(0.5)?;
        let cfg = self.cfg().clone();
        let res = self.settings.resolution;
        let mut pass = true;
        let mut parts = vec![];
        for d in [0.1, 0.3] {
            let c = barrier_subsolution_search(&cone, &op, p + d, p, 1e-2, &cfg, &res)?;
            pass &= c.pass;
            parts.push(format!("sub β={:.3} ε={} ρ={:.4}", c.beta, c.parameter, c.observed));
        }
        let c = barrier_supersolution_search(&cone, &op, m - 0.1, m, 10.0, &cfg, &res)?;
        pass &= c.pass;
        parts.push(format!("super β={:.3} R={} c={:.4}", c.beta, c.parameter, c.observed));
        Ok((pass, parts.join(", ")))
    }

    fn auxiliary_bound(&mut self) -> Check {
        let cone = ConeSpec::sector(PI);
        let op = OperatorSpec::pucci_plus(0.5, 1.0, 2.0);
        let cfg = self.cfg().clone();
        let res = self.settings.resolution;
        let mut pass = true;
        let mut worst_ratio: f64 = 0.0;
        let mut worst_gap: f64 = 0.0;
        for beta in [0.3, 0.6, 0.9] {
            for gamma in [0.5, 1.0, 1.5] {
                let lo = solve_auxiliary(beta, gamma, None, &cone, &op, &cfg, &res, AuxiliaryStart::Zero)?;
                let hi = solve_auxiliary(beta, gamma, None, &cone, &op, &cfg, &res, AuxiliaryStart::Super)?;
                let ratio = lo.state.norm / (beta / gamma);
                let gap = lo.state.u.iter().zip(&hi.state.u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                pass &= ratio <= 1.0 && gap <= cfg.tol;
                worst_ratio = worst_ratio.max(ratio);
                worst_gap = worst_gap.max(gap);
            }
        }
        Ok((pass, format!("max sup u/(β/γ) = {worst_ratio:.4}, max start difference {worst_gap:.1e}")))
    }
}

fn gamma_limit_check() -> Check {
    let g = gamma_iteration(5.0 / 3.0, 0.5, 60)?;
    let last = g[g.len() - 1];
    Ok(((last - 1.5).abs() < 1e-6, format!("γ_60 = {last:.12}")))
}
