//! Cone membership and line/boundary intersections in the plane and in 3-space.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{ConeShape, ConeSpec};

pub type Vec3 = [f64; 3];

#[inline]
pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn axpy(x: &Vec3, t: f64, s: &Vec3) -> Vec3 {
    [x[0] + t * s[0], x[1] + t * s[1], x[2] + t * s[2]]
}

#[inline]
pub fn scale(a: &Vec3, t: f64) -> Vec3 {
    [a[0] * t, a[1] * t, a[2] * t]
}

/// Concrete cone geometry used by the quadrature engine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Geometry {
    FullPlane,
    FullSpace3,
    /// `{0 < θ < aperture}` with θ the polar angle in the plane.
    Sector { aperture: f64 },
    /// `{polar angle from e_3 < half_angle}`.
    Cap { half_angle: f64 },
}

impl Geometry {
    pub fn from_cone(cone: &ConeSpec) -> Result<Self> {
        match (cone.canonical().shape, cone.dimension) {
            (ConeShape::FullSpace, 2) => Ok(Geometry::FullPlane),
            (ConeShape::FullSpace, 3) => Ok(Geometry::FullSpace3),
            (ConeShape::PlanarSector { aperture }, 2) => Ok(Geometry::Sector { aperture }),
            (ConeShape::AxisymmetricCap { half_angle }, 3) => Ok(Geometry::Cap { half_angle }),
            (_, n) => Err(Error::Unsupported(format!("numerical evaluation in dimension {n} for {:?}", cone.shape))),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Geometry::FullPlane | Geometry::Sector { .. } => 2,
            Geometry::FullSpace3 | Geometry::Cap { .. } => 3,
        }
    }

    pub fn is_full(&self) -> bool {
        matches!(self, Geometry::FullPlane | Geometry::FullSpace3)
    }

    /// Angular coordinate of `z` if it lies in the open cone.
    #[inline]
    pub fn angle(&self, z: &Vec3) -> Option<f64> {
        match *self {
            Geometry::FullPlane | Geometry::FullSpace3 => Some(0.0),
            Geometry::Sector { aperture } => {
                let mut th = z[1].atan2(z[0]);
                if th < 0.0 {
                    th += 2.0 * PI;
                }
                (th > 0.0 && th < aperture).then_some(th)
            }
            Geometry::Cap { half_angle } => {
                let th = z[0].hypot(z[1]).atan2(z[2]);
                (th < half_angle).then_some(th)
            }
        }
    }

    /// Unit vector with angular coordinate `theta` (in the `x_1 x_3` plane for caps).
    pub fn direction(&self, theta: f64) -> Vec3 {
        match self {
            Geometry::FullPlane | Geometry::Sector { .. } => [theta.cos(), theta.sin(), 0.0],
            Geometry::FullSpace3 | Geometry::Cap { .. } => [theta.sin(), 0.0, theta.cos()],
        }
    }

    /// Parameters `t` at which the line `x + tσ` crosses the cone boundary.
    pub fn boundary_crossings(&self, x: &Vec3, sigma: &Vec3, out: &mut Vec<f64>) {
        match *self {
            Geometry::FullPlane | Geometry::FullSpace3 => {}
            Geometry::Sector { aperture } => {
                for a in [0.0, aperture] {
                    let b = [a.cos(), a.sin(), 0.0];
                    let sb = sigma[0] * b[1] - sigma[1] * b[0];
                    if sb.abs() < 1e-300 {
                        continue;
                    }
                    let xb = x[0] * b[1] - x[1] * b[0];
                    let t = -xb / sb;
                    let p = axpy(x, t, sigma);
                    if dot(&p, &b) > 0.0 {
                        out.push(t);
                    }
                }
            }
            Geometry::Cap { half_angle } => {
                let c0 = half_angle.cos();
                let k = [0.0, 0.0, 1.0];
                if c0.abs() < 1e-14 {
                    if sigma[2].abs() > 1e-300 {
                        out.push(-x[2] / sigma[2]);
                    }
                    return;
                }
                let c2 = c0 * c0;
                let a = sigma[2] * sigma[2] - c2 * dot(sigma, sigma);
                let b = 2.0 * (x[2] * sigma[2] - c2 * dot(x, sigma));
                let c = x[2] * x[2] - c2 * dot(x, x);
                let mut push = |t: f64| {
                    let p = axpy(x, t, sigma);
                    if dot(&p, &k) * c0 > 0.0 {
                        out.push(t);
                    }
                };
                if a.abs() < 1e-14 * b.abs().max(1e-300) {
                    if b.abs() > 1e-300 {
                        push(-c / b);
                    }
                    return;
                }
                let disc = b * b - 4.0 * a * c;
                if disc < 0.0 {
                    return;
                }
                let sq = disc.sqrt();
                let qv = -0.5 * (b + b.signum() * sq);
                if qv != 0.0 {
                    push(qv / a);
                    push(c / qv);
                } else {
                    push(0.0);
                }
            }
        }
    }

    /// Distance from a point of the cone to its boundary.
    pub fn boundary_distance(&self, z: &Vec3) -> f64 {
        let r = norm(z);
        let margin = match *self {
            Geometry::FullPlane | Geometry::FullSpace3 => return f64::INFINITY,
            Geometry::Sector { aperture } => {
                let mut th = z[1].atan2(z[0]);
                if th < 0.0 {
                    th += 2.0 * PI;
                }
                th.min(aperture - th)
            }
            Geometry::Cap { half_angle } => half_angle - z[0].hypot(z[1]).atan2(z[2]),
        };
        if margin >= PI / 2.0 {
            r
        } else {
            r * margin.max(0.0).sin()
        }
    }

    /// Directions (as planar angles) of the boundary rays of a sector.
    pub fn boundary_ray_angles(&self) -> Vec<f64> {
        match *self {
            Geometry::Sector { aperture } => vec![0.0, aperture],
            _ => vec![],
        }
    }
}

/// Parameters `t` at which `|x + tσ| = radius`.
pub fn sphere_crossings(x: &Vec3, sigma: &Vec3, radius: f64, out: &mut Vec<f64>) {
    let b = dot(x, sigma);
    let c = dot(x, x) - radius * radius;
    let disc = b * b - c;
    if disc <= 0.0 {
        return;
    }
    let sq = disc.sqrt();
    out.push(-b - sq);
    out.push(-b + sq);
}
