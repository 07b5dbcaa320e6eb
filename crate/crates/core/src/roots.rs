//! Bracketed scalar root finding.
//!
//! Brent's method: inverse quadratic interpolation and secant steps guarded
//! by bisection, so the bracket shrinks on every iteration and the result is
//! a deterministic function of the inputs.

use crate::error::{Error, Result};

const MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Finds a root of `f` in `[lo, hi]`.
///
/// Terminates when the bracket is narrower than `xtol` (absolute, plus a
/// few ulps of |x|) or when |f(x)| < `ftol`.
pub fn brent<F>(mut f: F, lo: f64, hi: f64, xtol: f64, ftol: f64) -> Result<Root>
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(Root { x: a, residual: 0.0, iterations: 0 });
    }
    if fb == 0.0 {
        return Ok(Root { x: b, residual: 0.0, iterations: 0 });
    }
    if fa.signum() == fb.signum() || !fa.is_finite() || !fb.is_finite() {
        return Err(Error::Bracket { lo, hi, f_lo: fa, f_hi: fb });
    }

    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;

    for iter in 1..=MAX_ITER {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb.abs() < ftol {
            return Ok(Root { x: b, residual: fb, iterations: iter });
        }

        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }

        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
    }
    Err(Error::RootNotConverged { iterations: MAX_ITER, residual: fb })
}

/// Smallest root in `[lo, hi]`: scans `samples` equal subintervals for the
/// first sign change and refines it with [`brent`].
pub fn smallest_root<F>(mut f: F, lo: f64, hi: f64, samples: usize, xtol: f64, ftol: f64) -> Result<Root>
where
    F: FnMut(f64) -> f64,
{
    let samples = samples.max(1);
    let step = (hi - lo) / samples as f64;
    let mut x0 = lo;
    let mut f0 = f(x0);
    if f0 == 0.0 {
        return Ok(Root { x: x0, residual: 0.0, iterations: 0 });
    }
    for k in 1..=samples {
        let x1 = if k == samples { hi } else { lo + step * k as f64 };
        let f1 = f(x1);
        if f1 == 0.0 || f1.signum() != f0.signum() {
            return brent(&mut f, x0, x1, xtol, ftol);
        }
        x0 = x1;
        f0 = f1;
    }
    Err(Error::Bracket { lo, hi, f_lo: f(lo), f_hi: f0 })
}
