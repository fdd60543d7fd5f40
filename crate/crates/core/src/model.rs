//! Domain types shared across the crate.
//!
//! Everything here is plain data: immutable after construction, serializable
//! to the JSON config format, and checked through [`Validate`], which reports
//! every violated invariant instead of failing on the first.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

/// One violated invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl Violation {
    fn new(field: &str, message: impl Into<String>) -> Self {
        Self { field: field.to_string(), message: message.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

pub trait Validate {
    /// Empty iff every invariant holds.
    fn validate(&self) -> Vec<Violation>;

    fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    FractionalLaplacian,
    PucciPlus,
    PucciMinus,
    IsaacsFinite,
}

/// Angular density `a(σ)` of a kernel `K(y) = a(y/|y|) |y|^{-N-2α}`.
///
/// In the plane the density is tabulated at `values.len()` equally spaced
/// directions covering the full circle, starting at angle 0. In three
/// dimensions it is zonal about `e_3`: tabulated at equally spaced polar
/// angles from 0 to π inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngularKernel {
    pub density: Vec<f64>,
}

impl AngularKernel {
    pub fn constant(value: f64) -> Self {
        Self { density: vec![value] }
    }

    /// Planar density sampled from `a` at `n` directions (n even).
    pub fn planar_from_fn(n: usize, a: impl Fn(f64) -> f64) -> Self {
        let density = (0..n).map(|k| a(2.0 * PI * k as f64 / n as f64)).collect();
        Self { density }
    }

    /// Density at the direction `sigma` (unit vector) in dimension `dim`.
    pub fn eval(&self, dim: usize, sigma: &[f64; 3]) -> f64 {
        let n = self.density.len();
        if n == 1 {
            return self.density[0];
        }
        if dim == 2 {
            let mut phi = sigma[1].atan2(sigma[0]);
            if phi < 0.0 {
                phi += 2.0 * PI;
            }
            let s = phi / (2.0 * PI) * n as f64;
            let k = (s.floor() as usize) % n;
            let t = s - s.floor();
            self.density[k] * (1.0 - t) + self.density[(k + 1) % n] * t
        } else {
            let chi = sigma[2].clamp(-1.0, 1.0).acos();
            let s = chi / PI * (n - 1) as f64;
            let k = (s.floor() as usize).min(n - 2);
            let t = s - k as f64;
            self.density[k] * (1.0 - t) + self.density[k + 1] * t
        }
    }

    /// Evenness check `a(σ) = a(-σ)` at the tabulated directions.
    pub fn is_even(&self, dim: usize) -> bool {
        let n = self.density.len();
        if n == 1 {
            return true;
        }
        let tol = 1e-12;
        if dim == 2 {
            n.is_multiple_of(2) && (0..n / 2).all(|k| (self.density[k] - self.density[k + n / 2]).abs() <= tol)
        } else {
            (0..n).all(|k| (self.density[k] - self.density[n - 1 - k]).abs() <= tol)
        }
    }
}

/// A kernel of an Isaacs family, tagged by its index pair `(a, b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexedKernel {
    pub a: usize,
    pub b: usize,
    pub kernel: AngularKernel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    pub kind: OperatorKind,
    /// Lower ellipticity constant λ.
    pub lambda_lower: f64,
    /// Upper ellipticity constant Λ.
    pub lambda_upper: f64,
    /// Order α in (0, 1).
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernels: Option<Vec<IndexedKernel>>,
}

impl OperatorSpec {
    pub fn fractional(alpha: f64) -> Self {
        Self::fractional_scaled(alpha, 1.0)
    }

    pub fn fractional_scaled(alpha: f64, c: f64) -> Self {
        Self { kind: OperatorKind::FractionalLaplacian, lambda_lower: c, lambda_upper: c, alpha, kernels: None }
    }

    pub fn pucci_plus(alpha: f64, lambda: f64, big_lambda: f64) -> Self {
        Self { kind: OperatorKind::PucciPlus, lambda_lower: lambda, lambda_upper: big_lambda, alpha, kernels: None }
    }

    pub fn pucci_minus(alpha: f64, lambda: f64, big_lambda: f64) -> Self {
        Self { kind: OperatorKind::PucciMinus, lambda_lower: lambda, lambda_upper: big_lambda, alpha, kernels: None }
    }

    pub fn isaacs(alpha: f64, lambda: f64, big_lambda: f64, kernels: Vec<IndexedKernel>) -> Self {
        Self {
            kind: OperatorKind::IsaacsFinite,
            lambda_lower: lambda,
            lambda_upper: big_lambda,
            alpha,
            kernels: Some(kernels),
        }
    }

    /// Same operator with both ellipticity constants (and all kernel
    /// densities) multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.lambda_lower *= c;
        out.lambda_upper *= c;
        if let Some(ks) = out.kernels.as_mut() {
            for k in ks {
                k.kernel.density.iter_mut().for_each(|v| *v *= c);
            }
        }
        out
    }

    /// The Pucci maximal operator with the same constants.
    pub fn pucci_plus_envelope(&self) -> Self {
        Self::pucci_plus(self.alpha, self.lambda_lower, self.lambda_upper)
    }

    pub fn pucci_minus_envelope(&self) -> Self {
        Self::pucci_minus(self.alpha, self.lambda_lower, self.lambda_upper)
    }

    /// Distinct first indices `a` of an Isaacs family, in increasing order.
    pub fn isaacs_outer_indices(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.kernels.iter().flatten().map(|k| k.a).collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

impl Validate for OperatorSpec {
    fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if !(self.lambda_lower > 0.0) {
            out.push(Violation::new("lambda_lower", "requires λ > 0"));
        }
        if !(self.lambda_lower <= self.lambda_upper) {
            out.push(Violation::new("lambda_upper", "requires λ ≤ Λ"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            out.push(Violation::new("alpha", "requires 0 < α < 1"));
        }
        if self.kind == OperatorKind::FractionalLaplacian && self.lambda_lower != self.lambda_upper {
            out.push(Violation::new("kind", "FractionalLaplacian requires λ=Λ"));
        }
        if self.kind == OperatorKind::IsaacsFinite {
            match &self.kernels {
                None => out.push(Violation::new("kernels", "IsaacsFinite requires a nonempty kernel family")),
                Some(ks) if ks.is_empty() => {
                    out.push(Violation::new("kernels", "IsaacsFinite requires a nonempty kernel family"))
                }
                Some(ks) => {
                    for (i, k) in ks.iter().enumerate() {
                        if k.kernel.density.is_empty() {
                            out.push(Violation::new("kernels", format!("kernel {i} has no samples")));
                            continue;
                        }
                        let bad = k
                            .kernel
                            .density
                            .iter()
                            .any(|&v| !(v >= self.lambda_lower && v <= self.lambda_upper));
                        if bad {
                            out.push(Violation::new("kernels", format!("kernel {i} density leaves [λ, Λ]")));
                        }
                        // The plane (even count) and zonal (odd count allowed) tables differ;
                        // a kernel is accepted if it is even in either reading.
                        if !(k.kernel.is_even(2) || k.kernel.is_even(3)) {
                            out.push(Violation::new("kernels", format!("kernel {i} density is not even")));
                        }
                    }
                }
            }
        } else if self.kernels.as_ref().is_some_and(|k| !k.is_empty()) {
            out.push(Violation::new("kernels", "kernels are only meaningful for IsaacsFinite"));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum ConeShape {
    FullSpace,
    HalfSpace { axis: Vec<f64> },
    PlanarSector { aperture: f64 },
    AxisymmetricCap { half_angle: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeSpec {
    pub dimension: usize,
    pub shape: ConeShape,
}

impl ConeSpec {
    pub fn full_space(dimension: usize) -> Self {
        Self { dimension, shape: ConeShape::FullSpace }
    }

    pub fn half_space(dimension: usize) -> Self {
        let mut axis = vec![0.0; dimension];
        axis[dimension - 1] = 1.0;
        Self { dimension, shape: ConeShape::HalfSpace { axis } }
    }

    pub fn sector(aperture: f64) -> Self {
        Self { dimension: 2, shape: ConeShape::PlanarSector { aperture } }
    }

    pub fn cap(half_angle: f64) -> Self {
        Self { dimension: 3, shape: ConeShape::AxisymmetricCap { half_angle } }
    }

    /// Rotation-invariant normal form: half-spaces become the sector of
    /// aperture π (N = 2) or the cap of half-angle π/2 (N = 3).
    pub fn canonical(&self) -> ConeSpec {
        match (&self.shape, self.dimension) {
            (ConeShape::HalfSpace { .. }, 2) => ConeSpec::sector(PI),
            (ConeShape::HalfSpace { .. }, 3) => ConeSpec::cap(PI / 2.0),
            (ConeShape::HalfSpace { .. }, n) => ConeSpec::half_space(n),
            _ => self.clone(),
        }
    }

    pub fn is_proper(&self) -> bool {
        !matches!(self.shape, ConeShape::FullSpace)
    }
}

impl Validate for ConeSpec {
    fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.dimension < 2 {
            out.push(Violation::new("dimension", "requires N ≥ 2"));
        }
        match &self.shape {
            ConeShape::FullSpace => {}
            ConeShape::HalfSpace { axis } => {
                if axis.len() != self.dimension {
                    out.push(Violation::new("shape.axis", "axis length must equal N"));
                }
                let norm = axis.iter().map(|v| v * v).sum::<f64>().sqrt();
                if (norm - 1.0).abs() > 1e-9 {
                    out.push(Violation::new("shape.axis", "axis must be a unit vector"));
                }
            }
            ConeShape::PlanarSector { aperture } => {
                if self.dimension != 2 {
                    out.push(Violation::new("shape", "PlanarSector requires N=2"));
                }
                if !(*aperture > 0.0 && *aperture < 2.0 * PI) {
                    out.push(Violation::new("shape.aperture", "requires aperture in (0, 2π)"));
                }
            }
            ConeShape::AxisymmetricCap { half_angle } => {
                if self.dimension != 3 {
                    out.push(Violation::new("shape", "AxisymmetricCap requires N=3"));
                }
                if !(*half_angle > 0.0 && *half_angle < PI) {
                    out.push(Violation::new("shape.half_angle", "requires half-angle in (0, π)"));
                }
            }
        }
        out
    }
}

/// `u(x) = f(x/|x|) |x|^{-β}` in the cone, zero outside.
///
/// `samples` holds `f` at every node of the angular grid determined by
/// `(cone, samples.len(), boundary_grading)`, boundary nodes included.
/// Full-space profiles are constant and carry a single sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogeneousProfile {
    pub beta: f64,
    pub cone: ConeSpec,
    pub samples: Vec<f64>,
    pub boundary_grading: f64,
}

impl Validate for HomogeneousProfile {
    fn validate(&self) -> Vec<Violation> {
        let mut out = self.cone.validate();
        for v in &mut out {
            v.field = format!("cone.{}", v.field);
        }
        if !self.beta.is_finite() {
            out.push(Violation::new("beta", "beta must be finite"));
        }
        if !(self.boundary_grading > 0.0 && self.boundary_grading < 1.0) {
            out.push(Violation::new("boundary_grading", "requires 0 < g < 1"));
        }
        if self.samples.iter().any(|v| !(*v >= 0.0)) {
            out.push(Violation::new("samples", "samples must be nonnegative"));
        }
        match self.cone.canonical().shape {
            ConeShape::FullSpace => {
                if self.samples.len() != 1 {
                    out.push(Violation::new("samples", "full-space profiles carry exactly one sample"));
                }
            }
            ConeShape::PlanarSector { .. } => {
                if self.samples.len() < 4 {
                    out.push(Violation::new("samples", "a sector profile needs at least 4 nodes"));
                } else if self.samples[0] != 0.0 || *self.samples.last().unwrap() != 0.0 {
                    out.push(Violation::new("samples", "f must vanish on ∂ω"));
                }
            }
            ConeShape::AxisymmetricCap { .. } => {
                if self.samples.len() < 3 {
                    out.push(Violation::new("samples", "a cap profile needs at least 3 nodes"));
                } else if *self.samples.last().unwrap() != 0.0 {
                    out.push(Violation::new("samples", "f must vanish on ∂ω"));
                }
            }
            ConeShape::HalfSpace { .. } => {
                out.push(Violation::new("cone", "half-spaces are only supported for N ∈ {2, 3}"));
            }
        }
        out
    }
}

/// Controls a single operator evaluation. Lengths are relative to `|x|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    /// Inner radial cutoff around `y = 0`.
    pub r_min: f64,
    /// Radius of the balls around `y = ±x`; also the angular window of the
    /// directions whose line passes close to the vertex.
    pub eta: f64,
    /// Start of the mapped radial tail.
    pub r_max: f64,
    /// Gauss points per radial panel.
    pub n_radial: usize,
    /// Gauss points per angular panel.
    pub n_angular: usize,
    /// Trapezoid points in the azimuth (N = 3 only).
    pub n_azimuthal: usize,
    /// Target absolute tolerance for one evaluation.
    pub tol: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self { r_min: 1e-5, eta: 0.05, r_max: 4.0, n_radial: 8, n_angular: 8, n_azimuthal: 16, tol: 1e-4 }
    }
}

impl QuadratureConfig {
    /// Cheaper settings for sweeps and tests.
    pub fn coarse() -> Self {
        Self { n_radial: 6, n_angular: 6, n_azimuthal: 12, tol: 1e-3, ..Self::default() }
    }

    /// Error left by extrapolating the `|y| < r_min` region from the sampled
    /// second-difference ratio: `O(r_min^{3-2α})`.
    pub fn inner_truncation_estimate(&self, alpha: f64) -> f64 {
        self.r_min.powf(3.0 - 2.0 * alpha) / (3.0 - 2.0 * alpha)
    }

    /// Largest `|y|^{-N-2α}`-weighted contribution beyond `r_max` that is
    /// not captured by the mapped tail rule (zero: the tail is integrated in
    /// full). Returned for reporting symmetry with the inner estimate.
    pub fn outer_truncation_estimate(&self, alpha: f64, beta: f64) -> f64 {
        let _ = (alpha, beta);
        0.0
    }

    /// Invariant checks that depend on the exponent under evaluation.
    pub fn validate_for(&self, alpha: f64, beta: f64) -> Vec<Violation> {
        let mut out = self.validate();
        if self.inner_truncation_estimate(alpha) >= self.tol / 4.0 {
            out.push(Violation::new("r_min", "inner truncation estimate exceeds tol/4"));
        }
        if self.outer_truncation_estimate(alpha, beta) >= self.tol / 4.0 {
            out.push(Violation::new("r_max", "outer truncation estimate exceeds tol/4"));
        }
        out
    }

    /// Doubled resolution used by the refinement loop.
    pub fn refined(&self) -> Self {
        Self {
            r_min: self.r_min * 0.5,
            r_max: self.r_max * 2.0,
            n_radial: self.n_radial * 2,
            n_angular: self.n_angular * 2,
            n_azimuthal: self.n_azimuthal * 2,
            ..self.clone()
        }
    }
}

impl Validate for QuadratureConfig {
    fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if !(self.r_min > 0.0) {
            out.push(Violation::new("r_min", "requires r_min > 0"));
        }
        if !(self.r_min < self.eta) {
            out.push(Violation::new("eta", "requires r_min < eta"));
        }
        if !(self.eta < 1.0) {
            out.push(Violation::new("eta", "requires eta < 1"));
        }
        if !(self.r_max > 1.0) {
            out.push(Violation::new("r_max", "requires r_max > 1"));
        }
        for (name, n) in [("n_radial", self.n_radial), ("n_angular", self.n_angular), ("n_azimuthal", self.n_azimuthal)] {
            if n < 2 {
                out.push(Violation::new(name, format!("requires {name} ≥ 2")));
            }
        }
        if !(self.tol > 0.0) {
            out.push(Violation::new("tol", "requires tol > 0"));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExponentKind {
    NTildePlus,
    NTildeMinus,
    BetaPlus,
    BetaMinus,
}

/// Resolution metadata attached to every computed exponent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub quadrature: QuadratureConfig,
    /// Number of angular nodes of the profile grid (boundary included);
    /// zero for whole-space computations.
    pub profile_nodes: usize,
    pub boundary_grading: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentResult {
    pub value: f64,
    pub residual: f64,
    pub bracket: (f64, f64),
    pub grid_meta: GridMeta,
    pub kind: ExponentKind,
    /// Free-form diagnostics (scan records, hypothesis flags).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl ExponentResult {
    /// Range the exponent must lie in: `(0, N)` for β⁺, `(-2α, 0)` for β⁻.
    pub fn admissible_range(&self, dimension: usize, alpha: f64) -> (f64, f64) {
        match self.kind {
            ExponentKind::BetaPlus => (0.0, dimension as f64),
            ExponentKind::BetaMinus => (-2.0 * alpha, 0.0),
            ExponentKind::NTildePlus | ExponentKind::NTildeMinus => (2.0 * alpha, f64::INFINITY),
        }
    }

    pub fn check_bounds(&self, dimension: usize, alpha: f64) -> Vec<Violation> {
        let (lo, hi) = self.admissible_range(dimension, alpha);
        let mut out = Vec::new();
        if !(self.value > lo && self.value < hi) {
            out.push(Violation::new("value", format!("{:?} = {} outside ({lo}, {hi})", self.kind, self.value)));
        }
        if !(self.bracket.0 <= self.value && self.value <= self.bracket.1) {
            out.push(Violation::new("bracket", "bracket does not enclose the value"));
        }
        out
    }
}
