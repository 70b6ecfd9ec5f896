//! Bracketed bisection for the scalar fixed-point equations.

use crate::error::{Error, Result};

/// Finds the root of `f` on `[lo, hi]`, requiring a sign change between the
/// endpoints. Bisects until the bracket width falls below
/// `min(abs_tol, rel_tol * |mid|)` or the bracket collapses to adjacent
/// floats, so roots close to zero are resolved to full relative precision
/// while large roots stop at the float resolution.
pub fn bisect<F>(f: F, mut lo: f64, mut hi: f64, abs_tol: f64, rel_tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::NoBracket("endpoints have the same sign"));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break; // hit f64 resolution
        }
        let fmid = f(mid);
        if fmid == 0.0 {
            return Ok(mid);
        }
        if fmid.signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= abs_tol.min(rel_tol * mid.abs()) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
