//! Principal eigenpairs of `-G_β` on the interior nodes.
//!
//! Linear operators are assembled once and handed to a dense eigensolver.
//! Pucci operators are handled by policy iteration: the policy (which of λ,
//! Λ multiplies each quadrature point) is frozen at the current profile, the
//! frozen linear operator is solved exactly, and the profile is updated. For
//! `M⁺ = sup_K L_K` the eigenvalues decrease monotonically to the principal
//! eigenvalue of `-M⁺`; for `M⁻` they increase. Isaacs families are treated
//! the same way with an outer loop over the index `a` and an inner loop over
//! `b`, entirely on the per-kernel matrices.

use nalgebra::{DMatrix, DVector, Schur};

use crate::error::{Error, Result};
use crate::model::OperatorKind;
use crate::operator::{IsaacsRows, ReducedOperator};

const MAX_POLICY_ITERATIONS: usize = 40;

/// Result of a principal eigenvalue computation.
#[derive(Debug, Clone)]
pub struct EigenPair {
    /// Principal eigenvalue μ of `-G_β`.
    pub mu: f64,
    /// Eigenfunction at the unknowns, positive with maximum 1.
    pub f: Vec<f64>,
    /// Collatz–Wielandt interval `[min, max]` of `(-G_β f)_i / f_i`.
    pub collatz_wielandt: (f64, f64),
    /// `max_i |G_β[f]_i + μ f_i|`.
    pub residual: f64,
    /// Number of operator assemblies or policy updates used.
    pub iterations: usize,
}

/// Smallest real eigenvalue of `t` and its eigenvector, scaled to a maximum
/// entry of 1 and checked for positivity.
pub fn matrix_principal(t: &DMatrix<f64>) -> Result<(f64, DVector<f64>)> {
    let m = t.nrows();
    if m == 1 {
        return Ok((t[(0, 0)], DVector::from_element(1, 1.0)));
    }
    if t.iter().any(|v| !v.is_finite()) {
        return Err(Error::NoConvergence { iterations: 0, lo: f64::NAN, hi: f64::NAN });
    }
    let eig = Schur::try_new(t.clone(), f64::EPSILON, 10_000)
        .ok_or(Error::NoConvergence { iterations: 10_000, lo: f64::NAN, hi: f64::NAN })?
        .complex_eigenvalues();
    let scale = t.amax().max(1e-300);
    let (mut mu, mut im) = (f64::INFINITY, 0.0);
    for z in eig.iter() {
        if z.re < mu {
            mu = z.re;
            im = z.im;
        }
    }
    if !mu.is_finite() || im.abs() > 1e-8 * scale {
        return Err(Error::NoConvergence { iterations: 0, lo: mu, hi: mu });
    }
    // inverse iteration just below μ
    let shift = mu - 1e-9 * scale;
    let shifted = t - DMatrix::identity(m, m) * shift;
    let lu = shifted.lu();
    let mut v = DVector::from_element(m, 1.0);
    for _ in 0..4 {
        v = lu.solve(&v).ok_or(Error::NoConvergence { iterations: 0, lo: mu, hi: mu })?;
        let n = v.amax();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::NoConvergence { iterations: 0, lo: mu, hi: mu });
        }
        v /= n;
    }
    if v.sum() < 0.0 {
        v = -v;
    }
    let top = v.max();
    v /= top;
    let min = v.min();
    if min < -1e-8 {
        return Err(Error::LostPositivity { min });
    }
    v.apply(|x| *x = x.max(0.0));
    Ok((mu, v))
}

fn collatz_wielandt(tf: &DVector<f64>, f: &DVector<f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..f.len() {
        if f[i] > 0.0 {
            let q = tf[i] / f[i];
            lo = lo.min(q);
            hi = hi.max(q);
        }
    }
    (lo, hi)
}

fn finish(mu: f64, f: DVector<f64>, g: &DVector<f64>, iterations: usize) -> EigenPair {
    let tf = -g;
    let cw = collatz_wielandt(&tf, &f);
    let residual = (g + &f * mu).amax();
    let mu = if cw.0 <= cw.1 { mu.clamp(cw.0, cw.1) } else { mu };
    EigenPair { mu, f: f.iter().copied().collect(), collatz_wielandt: cw, residual, iterations }
}

/// Principal eigenpair of `-G_β`. `start` (unknowns) seeds the policy
/// iterations of nonlinear operators.
pub fn principal_eigenpair(r: &ReducedOperator, start: Option<&[f64]>) -> Result<EigenPair> {
    let m = r.size();
    let f0 = match start {
        Some(s) if s.len() == m && s.iter().all(|v| *v > 0.0) => DVector::from_column_slice(s),
        _ => DVector::from_column_slice(&r.positive_start()),
    };
    if r.is_linear() {
        let a = r.matrix()?;
        let (mu, f) = matrix_principal(&(-&a))?;
        let g = &a * &f;
        return Ok(finish(mu, f, &g, 1));
    }
    match r.op.kind {
        OperatorKind::PucciPlus | OperatorKind::PucciMinus => pucci_eigenpair(r, f0),
        OperatorKind::IsaacsFinite => {
            let rows = IsaacsRows::new(&r.op, r.kernel_matrices()?);
            isaacs_eigenpair(&rows, f0)
        }
        OperatorKind::FractionalLaplacian => unreachable!("fractional operators are linear"),
    }
}

fn pucci_eigenpair(r: &ReducedOperator, mut f: DVector<f64>) -> Result<EigenPair> {
    let tol = r.cfg.tol;
    let mut last: Option<f64> = None;
    let mut interval = (f64::NEG_INFINITY, f64::INFINITY);
    for it in 0..MAX_POLICY_ITERATIONS {
        let l = r.policy_matrix(f.as_slice())?;
        let g = &l * &f;
        if let Some(mu) = last {
            let pair = finish(mu, f.clone(), &g, it);
            interval = pair.collatz_wielandt;
            if interval.1 - interval.0 <= tol {
                return Ok(pair);
            }
        }
        let (mu, v) = matrix_principal(&(-&l))?;
        f = v;
        last = Some(mu);
    }
    Err(Error::NoConvergence { iterations: MAX_POLICY_ITERATIONS, lo: interval.0, hi: interval.1 })
}

/// Nested policy iteration for `-inf_a sup_b L_ab` on assembled matrices.
pub fn isaacs_eigenpair(rows: &IsaacsRows, mut f: DVector<f64>) -> Result<EigenPair> {
    let mut outer = rows.outer_policy(&f);
    let mut total = 0;
    let mut mu = f64::NAN;
    for _ in 0..MAX_POLICY_ITERATIONS {
        // inner: sup over b for the frozen a-policy, eigenvalues decrease
        let mut l = rows.inner_matrix(&outer, &f);
        let mut converged = false;
        for _ in 0..MAX_POLICY_ITERATIONS {
            total += 1;
            let (m, v) = matrix_principal(&(-&l))?;
            mu = m;
            f = v;
            let next = rows.inner_matrix(&outer, &f);
            if next == l || (&next * &f - &l * &f).amax() <= 1e-13 * (&l * &f).amax() {
                converged = true;
                break;
            }
            l = next;
        }
        if !converged {
            return Err(Error::NoConvergence { iterations: total, lo: mu, hi: mu });
        }
        // outer: switch a only where it strictly lowers sup_b
        let candidate = rows.outer_policy(&f);
        let current = rows.inner_matrix(&outer, &f) * &f;
        let proposed = rows.inner_matrix(&candidate, &f) * &f;
        let scale = current.amax().max(1e-300);
        let mut changed = false;
        for i in 0..outer.len() {
            if candidate[i] != outer[i] && proposed[i] < current[i] - 1e-12 * scale {
                outer[i] = candidate[i];
                changed = true;
            }
        }
        if !changed {
            let g = rows.apply(&f);
            return Ok(finish(mu, f, &g, total));
        }
    }
    Err(Error::NoConvergence { iterations: total, lo: mu, hi: mu })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn principal_of_m_matrix() {
        // symmetric tridiagonal: eigenvalues 2 - 2cos(kπ/(n+1))
        let n = 8;
        let mut t = DMatrix::zeros(n, n);
        for i in 0..n {
            t[(i, i)] = 2.0;
            if i + 1 < n {
                t[(i, i + 1)] = -1.0;
                t[(i + 1, i)] = -1.0;
            }
        }
        let (mu, v) = matrix_principal(&t).unwrap();
        let expect = 2.0 - 2.0 * (std::f64::consts::PI / (n + 1) as f64).cos();
        assert!((mu - expect).abs() < 1e-12);
        assert!(v.iter().all(|x| *x > 0.0));
        assert!(((&t * &v) - &v * mu).amax() < 1e-10);
    }
}
