//! Safeguarded Newton iteration for monotone increasing scalar equations.
//!
//! Every inverse problem in the models (inversion level from a voltage, SCM
//! bias point) reduces to finding the root of a strictly increasing function.
//! The solver keeps a sign-change bracket at all times and falls back to
//! bisection whenever the Newton step would leave it.

use crate::error::{Error, Result};
use crate::real::Real;

/// Iteration cap shared by all solvers.
pub const MAX_ITERATIONS: usize = 200;

/// Maximum number of bracket growth steps on each side.
const MAX_EXPANSIONS: usize = 64;

/// Search interval and the hard limits it may grow to.
#[derive(Debug, Clone, Copy)]
pub struct Bracket<R> {
    pub lo: R,
    pub hi: R,
    pub lo_limit: R,
    pub hi_limit: R,
}

/// Finds `x` in the bracket with `residual(x) == 0`, where `residual` returns
/// `(value, derivative)` and is strictly increasing.
///
/// The bracket is widened geometrically toward its limits until it encloses a
/// sign change. Errors with [`Error::NoSolution`] when the limits are reached
/// without one, and [`Error::Convergence`] when the iteration cap is hit.
pub fn solve_increasing<R, F>(residual: F, bracket: Bracket<R>, tol: R, what: &str) -> Result<R>
where
    R: Real,
    F: Fn(R) -> (R, R),
{
    let Bracket {
        mut lo,
        mut hi,
        lo_limit,
        hi_limit,
    } = bracket;
    let mut f_lo = residual(lo).0;
    let mut grow = hi - lo;
    let mut n = 0;
    while f_lo > R::zero() {
        if lo <= lo_limit || n == MAX_EXPANSIONS {
            return Err(Error::NoSolution(format!(
                "{what}: target below the reachable range"
            )));
        }
        hi = lo;
        lo = (lo - grow).max(lo_limit);
        grow = grow + grow;
        f_lo = residual(lo).0;
        n += 1;
    }
    let mut f_hi = residual(hi).0;
    let mut grow = hi - lo;
    n = 0;
    while f_hi < R::zero() {
        if hi >= hi_limit || n == MAX_EXPANSIONS {
            return Err(Error::NoSolution(format!(
                "{what}: target above the reachable range"
            )));
        }
        lo = hi;
        hi = (hi + grow).min(hi_limit);
        grow = grow + grow;
        f_hi = residual(hi).0;
        n += 1;
    }
    if f_lo.is_nan() || f_hi.is_nan() {
        return Err(Error::domain(format!(
            "{what}: residual is NaN at the bracket ends"
        )));
    }

    let half = R::lit(0.5);
    let mut x = (lo + hi) * half;
    for _ in 0..MAX_ITERATIONS {
        let (fx, dfx) = residual(x);
        if fx.is_nan() {
            return Err(Error::domain(format!("{what}: residual is NaN at x = {x}")));
        }
        if fx == R::zero() {
            return Ok(x);
        }
        if fx < R::zero() {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - fx / dfx;
        let next = if dfx > R::zero() && newton > lo && newton < hi {
            newton
        } else {
            (lo + hi) * half
        };
        if (next - x).abs() <= tol || hi - lo <= tol {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::Convergence {
        what: what.to_string(),
        iterations: MAX_ITERATIONS,
    })
}

/// Golden-section minimization of a unimodal function on `[lo, hi]`.
pub fn golden_section_min<R, F>(f: F, mut lo: R, mut hi: R, tol: R, what: &str) -> Result<R>
where
    R: Real,
    F: Fn(R) -> R,
{
    if !(hi > lo) {
        return Err(Error::input(format!("{what}: empty search interval")));
    }
    let inv_phi = R::lit(0.618_033_988_749_894_8);
    let mut c = hi - (hi - lo) * inv_phi;
    let mut d = lo + (hi - lo) * inv_phi;
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..MAX_ITERATIONS {
        if (hi - lo).abs() <= tol {
            return Ok((lo + hi) * R::lit(0.5));
        }
        if fc.is_nan() || fd.is_nan() {
            return Err(Error::domain(format!("{what}: objective is NaN")));
        }
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - (hi - lo) * inv_phi;
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + (hi - lo) * inv_phi;
            fd = f(d);
        }
    }
    Err(Error::Convergence {
        what: what.to_string(),
        iterations: MAX_ITERATIONS,
    })
}
