//! Bracketing scans and bisection.

use crate::error::{Error, Result};

/// Bracket width at which bisection stops.
pub const ROOT_TOL: f64 = 1e-3;

/// Evaluate `f` at each point, in order.
pub fn scan(points: &[f64], mut f: impl FnMut(f64) -> Result<f64>) -> Result<Vec<(f64, f64)>> {
    points.iter().map(|&x| Ok((x, f(x)?))).collect()
}

/// Indices `k` with a strict sign change between samples `k` and `k + 1`.
pub fn sign_changes(samples: &[(f64, f64)]) -> Vec<usize> {
    (0..samples.len().saturating_sub(1))
        .filter(|&k| (samples[k].1 > 0.0 && samples[k + 1].1 < 0.0) || (samples[k].1 < 0.0 && samples[k + 1].1 > 0.0))
        .collect()
}

/// Bisection on `[a, b]` with `f(a)` and `f(b)` of opposite signs, down to a
/// bracket of width `tol`; the root is then placed by linear interpolation
/// inside the final bracket. Returns `(root, bracket)`.
pub fn bisect(
    mut f: impl FnMut(f64) -> Result<f64>,
    (mut a, mut fa): (f64, f64),
    (mut b, mut fb): (f64, f64),
    tol: f64,
) -> Result<(f64, (f64, f64))> {
    if fa == 0.0 {
        return Ok((a, (a, a)));
    }
    if fb == 0.0 {
        return Ok((b, (b, b)));
    }
    if fa.signum() == fb.signum() {
        return Err(Error::RootNotBracketed { lo: a, hi: b, scan: format!("f({a}) = {fa}, f({b}) = {fb}") });
    }
    while (b - a).abs() > tol {
        let m = 0.5 * (a + b);
        let fm = f(m)?;
        if fm == 0.0 {
            return Ok((m, (m, m)));
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
            fb = fm;
        }
    }
    let root = a - fa * (b - a) / (fb - fa);
    Ok((root, (a.min(b), a.max(b))))
}

/// `k + 1` equally spaced points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, k: usize) -> Vec<f64> {
    (0..=k).map(|i| a + (b - a) * i as f64 / k as f64).collect()
}

/// Render a scan for diagnostics.
pub fn describe(samples: &[(f64, f64)]) -> String {
    samples.iter().map(|(x, y)| format!("{x:.4}:{y:+.4e}")).collect::<Vec<_>>().join(" ")
}
