//! Angular grids and the interpolation of sampled profiles.
//!
//! A profile is stored at the nodes of a 1-D polar grid (sector angle in the
//! plane, polar angle of an axisymmetric cap). Between nodes it is
//! reconstructed as `f(θ) = w(θ) H(θ)` where `w` vanishes like `dist^g` on
//! the boundary of ω and `H` is the C¹ cubic Hermite interpolant of
//! `f_j / w(θ_j)` with three-point slopes. The reconstruction is linear in
//! the samples, reproduces them exactly, and stays C^{1,1} inside ω so that
//! second differences decay quadratically.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::model::HomogeneousProfile;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Layout {
    Constant,
    /// Nodes `0 = θ_0 < … < θ_M = aperture`, both ends on ∂ω.
    Sector { aperture: f64 },
    /// Nodes `0 = θ_0 < … < θ_M = half_angle`; `θ_0` is the pole.
    Cap { half_angle: f64 },
}

/// Interpolation stencil: `f(θ) = Σ coef[k] · f[idx[k]]` for `k < len`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Stencil {
    pub idx: [u32; 4],
    pub coef: [f64; 4],
    pub len: usize,
}

impl Stencil {
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
    pub fn apply(&self, f: &[f64]) -> f64 {
        let mut s = 0.0;
        for k in 0..self.len {
            s += self.coef[k] * f[self.idx[k] as usize];
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct AngularGrid {
    layout: Layout,
    nodes: Vec<f64>,
    grading: f64,
    power: f64,
    inv_w: Vec<f64>,
    /// Three-point slope weights `(k-1, k, k+1)` at each node.
    dcoef: Vec<[f64; 3]>,
}

/// Node-clustering power for a boundary grading exponent `g`.
pub fn grading_power(g: f64) -> f64 {
    1.0 + g
}

impl AngularGrid {
    pub fn new(geometry: Geometry, n_nodes: usize, grading: f64) -> Result<Self> {
        let layout = match geometry {
            Geometry::FullPlane | Geometry::FullSpace3 => Layout::Constant,
            Geometry::Sector { aperture } => Layout::Sector { aperture },
            Geometry::Cap { half_angle } => Layout::Cap { half_angle },
        };
        let min_nodes = match layout {
            Layout::Constant => 1,
            Layout::Sector { .. } => 4,
            Layout::Cap { .. } => 3,
        };
        if n_nodes < min_nodes || (layout == Layout::Constant && n_nodes != 1) {
            return Err(Error::Invalid(format!("{n_nodes} nodes is not a valid grid size for {layout:?}")));
        }
        let power = grading_power(grading);
        let m = (n_nodes - 1).max(1) as f64;
        let nodes: Vec<f64> = match layout {
            Layout::Constant => vec![0.0],
            Layout::Sector { aperture } => (0..n_nodes).map(|k| aperture * sym_map(k as f64 / m, power)).collect(),
            Layout::Cap { half_angle } => {
                (0..n_nodes).map(|k| half_angle * (1.0 - (1.0 - k as f64 / m).powf(power))).collect()
            }
        };
        let mut grid = Self { layout, nodes, grading, power, inv_w: vec![], dcoef: vec![] };
        grid.inv_w = (0..n_nodes)
            .map(|j| if grid.is_interior(j) { 1.0 / grid.weight(grid.nodes[j]) } else { 0.0 })
            .collect();
        grid.dcoef = (0..n_nodes).map(|k| grid.slope_weights(k)).collect();
        Ok(grid)
    }

    pub fn for_profile(p: &HomogeneousProfile) -> Result<Self> {
        Self::new(Geometry::from_cone(&p.cone)?, p.samples.len(), p.boundary_grading)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn grading(&self) -> f64 {
        self.grading
    }

    /// Whether node `j` lies in the open set ω.
    pub fn is_interior(&self, j: usize) -> bool {
        match self.layout {
            Layout::Constant => true,
            Layout::Sector { .. } => j > 0 && j + 1 < self.nodes.len(),
            Layout::Cap { .. } => j + 1 < self.nodes.len(),
        }
    }

    pub fn interior(&self) -> Vec<usize> {
        (0..self.len()).filter(|&j| self.is_interior(j)).collect()
    }

    /// Index of the node mirrored about the bisector of a sector, if the grid has one.
    pub fn mirror(&self, j: usize) -> Option<usize> {
        match self.layout {
            Layout::Sector { .. } => Some(self.len() - 1 - j),
            _ => None,
        }
    }

    /// Boundary weight `w(θ)`, vanishing like `dist^g` on ∂ω.
    #[inline]
    pub fn weight(&self, theta: f64) -> f64 {
        match self.layout {
            Layout::Constant => 1.0,
            Layout::Sector { aperture } => (PI * theta / aperture).sin().max(0.0).powf(self.grading),
            Layout::Cap { half_angle } => {
                let c0 = half_angle.cos();
                ((theta.cos() - c0) / (1.0 - c0)).max(0.0).powf(self.grading)
            }
        }
    }

    /// Samples of `θ ↦ value(θ)` at every node, forced to zero on ∂ω.
    pub fn sample(&self, value: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..self.len()).map(|j| if self.is_interior(j) { value(self.nodes[j]) } else { 0.0 }).collect()
    }

    /// Samples of the boundary weight itself (a natural positive start vector).
    pub fn weight_samples(&self) -> Vec<f64> {
        self.sample(|t| self.weight(t))
    }

    fn slope_weights(&self, k: usize) -> [f64; 3] {
        let n = self.len();
        if n < 3 || k == 0 || k + 1 >= n {
            // boundary nodes and the cap pole carry zero slope
            return [0.0; 3];
        }
        let a = self.nodes[k] - self.nodes[k - 1];
        let b = self.nodes[k + 1] - self.nodes[k];
        let s = a + b;
        [-b / (a * s), (b / a - a / b) / s, a / (b * s)]
    }

    /// Element index `k` with `θ_k ≤ θ ≤ θ_{k+1}`.
    #[inline]
    fn locate(&self, theta: f64) -> usize {
        let n = self.len();
        let m = (n - 1) as f64;
        let s = match self.layout {
            Layout::Constant => return 0,
            Layout::Sector { aperture } => sym_map_inv(theta / aperture, self.power),
            Layout::Cap { half_angle } => 1.0 - (1.0 - (theta / half_angle).min(1.0)).powf(1.0 / self.power),
        };
        let mut k = ((s * m).floor().max(0.0) as usize).min(n - 2);
        while k > 0 && theta < self.nodes[k] {
            k -= 1;
        }
        while k + 2 < n && theta > self.nodes[k + 1] {
            k += 1;
        }
        k
    }

    /// Map a hermite-basis index to the node whose sample stands in for it.
    #[inline]
    fn substitute(&self, j: usize) -> usize {
        let n = self.len();
        match self.layout {
            Layout::Sector { .. } if j == 0 => 1,
            Layout::Sector { .. } | Layout::Cap { .. } if j == n - 1 => n - 2,
            _ => j,
        }
    }

    /// Linear stencil of the reconstruction at `theta` (assumed inside ω).
    #[inline]
    pub fn stencil(&self, theta: f64) -> Stencil {
        let mut st = Stencil::default();
        if self.layout == Layout::Constant {
            st.add(0, 1.0);
            return st;
        }
        let k = self.locate(theta);
        let h = self.nodes[k + 1] - self.nodes[k];
        let t = ((theta - self.nodes[k]) / h).clamp(0.0, 1.0);
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        // coefficients of H at nodes k-1 .. k+2
        let mut c = [0.0f64; 4];
        c[1] += h00;
        c[2] += h01;
        let dk = self.dcoef[k];
        let dk1 = self.dcoef[k + 1];
        for m in 0..3 {
            c[m] += h * h10 * dk[m];
            c[m + 1] += h * h11 * dk1[m];
        }
        let w = self.weight(theta);
        let n = self.len() as isize;
        for (m, &cm) in c.iter().enumerate() {
            if cm == 0.0 {
                continue;
            }
            let j = k as isize + m as isize - 1;
            if j < 0 || j >= n {
                continue;
            }
            let j = self.substitute(j as usize);
            st.add(j, w * cm * self.inv_w[j]);
        }
        st
    }

    #[inline]
    pub fn eval(&self, samples: &[f64], theta: f64) -> f64 {
        self.stencil(theta).apply(samples)
    }
}

#[inline]
fn sym_map(s: f64, q: f64) -> f64 {
    if s <= 0.5 {
        0.5 * (2.0 * s).powf(q)
    } else {
        1.0 - 0.5 * (2.0 * (1.0 - s)).powf(q)
    }
}

#[inline]
fn sym_map_inv(v: f64, q: f64) -> f64 {
    let v = v.clamp(0.0, 1.0);
    if v <= 0.5 {
        0.5 * (2.0 * v).powf(1.0 / q)
    } else {
        1.0 - 0.5 * (2.0 * (1.0 - v)).powf(1.0 / q)
    }
}
