//! Self-cascode MOSFET (SCM) bias solving.
//!
//! M1 is stacked on M2 with a shared gate; the intermediate node voltage V_X
//! sets the inversion level of M2 and, through the ratio
//! `alpha = i_f1 / i_f2`, that of M1. The reference current is then
//! `I_SQ2 * i_f2 * S2 / N`.

use crate::devmodel::{
    self, acm_f, check_temperature, sqrt1p_m1, ut, FlavorParams, TechnologyParams,
};
use crate::error::{Error, Result};
use crate::real::Real;
use crate::roots;

/// SCM sizing parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ScmDesign<R> {
    /// Inversion-level ratio i_f1 / i_f2, strictly above 1.
    pub alpha: R,
    /// Current ratio of the pMOS mirror M3:M4.
    pub n_mirror: R,
    /// Aspect ratio of M2.
    pub s2: R,
    /// I_SQ2 / I_SQ1.
    pub isq_ratio: R,
    /// Flavor of M1 and M2.
    pub flavor: String,
}

impl<R: Real> ScmDesign<R> {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > R::one()) {
            return Err(Error::input(format!(
                "alpha must exceed 1, got {}",
                self.alpha
            )));
        }
        if !(self.n_mirror >= R::one()) {
            return Err(Error::input(format!(
                "mirror ratio N must be >= 1, got {}",
                self.n_mirror
            )));
        }
        if !(self.s2 > R::zero()) || !(self.isq_ratio > R::zero()) {
            return Err(Error::input("S2 and the I_SQ ratio must be positive"));
        }
        Ok(())
    }

    /// Aspect ratio of M1 implied by Kirchhoff's current law.
    pub fn s1(&self) -> Result<R> {
        Ok(self.s2 * scm_s1_over_s2(self.alpha, self.n_mirror, self.isq_ratio)?)
    }

    /// Solves the SCM for a given bias voltage at temperature `t`.
    pub fn solve(&self, v_x: R, t: R, tech: &TechnologyParams<R>) -> Result<ScmBiasSolution<R>> {
        let flavor = tech.flavor(&self.flavor)?;
        let i_f2 = scm_solve_if2(v_x, self.alpha, t)?;
        let isq2 = devmodel::isq_acm(flavor, t, tech.t0)?;
        Ok(ScmBiasSolution {
            i_f2,
            i_f1: self.alpha * i_f2,
            v_x,
            i_ref: reference_current(isq2, i_f2, self.s2, self.n_mirror),
            s_iref: sensitivity_siref(i_f2, self.alpha, t)?,
        })
    }
}

/// Solved SCM operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScmBiasSolution<R> {
    pub i_f2: R,
    pub i_f1: R,
    pub v_x: R,
    pub i_ref: R,
    /// Relative sensitivity of I_REF to V_X (1/V).
    pub s_iref: R,
}

fn check_alpha<R: Real>(alpha: R) -> Result<()> {
    if alpha > R::one() && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("alpha must exceed 1, got {alpha}")))
    }
}

/// V_X / U_T for a given M2 inversion level, free of cancellation.
///
/// Uses `sqrt(1+ai) - sqrt(1+i) = (a-1) i / (sqrt(1+ai) + sqrt(1+i))` and
/// `(sqrt(1+ai)-1)/(sqrt(1+i)-1) = a (sqrt(1+i)+1)/(sqrt(1+ai)+1)`.
#[inline]
fn vx_normalized<R: Real>(i_f2: R, alpha: R) -> R {
    let s_a = (R::one() + alpha * i_f2).sqrt();
    let s_1 = (R::one() + i_f2).sqrt();
    (alpha - R::one()) * i_f2 / (s_a + s_1) + (alpha * (s_1 + R::one()) / (s_a + R::one())).ln()
}

/// SCM bias voltage V_X as a function of the inversion level of M2.
pub fn scm_vx<R: Real>(i_f2: R, alpha: R, t: R) -> Result<R> {
    check_temperature(t)?;
    check_alpha(alpha)?;
    if !(i_f2 > R::zero()) || !i_f2.is_finite() {
        return Err(Error::domain(format!("i_f2 must be positive, got {i_f2}")));
    }
    Ok(ut(t) * vx_normalized(i_f2, alpha))
}

/// Inverts [`scm_vx`]: the unique `i_f2` producing `v_x`.
///
/// `v_x` must exceed `U_T ln(alpha)`, the infimum of V_X as `i_f2 -> 0`.
pub fn scm_solve_if2<R: Real>(v_x: R, alpha: R, t: R) -> Result<R> {
    check_temperature(t)?;
    check_alpha(alpha)?;
    if !v_x.is_finite() {
        return Err(Error::domain("V_X must be finite"));
    }
    let u = ut(t);
    let floor = u * alpha.ln();
    if !(v_x > floor) {
        return Err(Error::NoSolution(format!(
            "V_X = {v_x} V is not above U_T ln(alpha) = {floor} V"
        )));
    }
    let target = v_x / u;
    let half = R::lit(0.5);
    // x = ln(i_f2); d(V_X/U_T)/dx = (sqrt(1+a i) - sqrt(1+i)) / 2
    let x = roots::solve_increasing(
        |x: R| {
            let i = x.exp();
            let s_a = (R::one() + alpha * i).sqrt();
            let s_1 = (R::one() + i).sqrt();
            let d = (alpha - R::one()) * i / (s_a + s_1);
            (vx_normalized(i, alpha) - target, d * half)
        },
        devmodel::log_level_bracket(),
        R::solver_tol(),
        "scm_solve_if2",
    )?;
    Ok(x.exp())
}

/// Aspect-ratio ratio S1/S2 required for current balance in the SCM.
pub fn scm_s1_over_s2<R: Real>(alpha: R, n_mirror: R, isq_ratio: R) -> Result<R> {
    check_alpha(alpha)?;
    if !(n_mirror >= R::one()) {
        return Err(Error::domain(format!(
            "mirror ratio N must be >= 1, got {n_mirror}"
        )));
    }
    Ok(isq_ratio * (R::one() + n_mirror) / n_mirror / (alpha - R::one()))
}

/// Reference current `I_SQ2 * i_f2 * S2 / N`.
pub fn reference_current<R: Real>(isq2: R, i_f2: R, s2: R, n_mirror: R) -> R {
    isq2 * i_f2 * s2 / n_mirror
}

/// Relative sensitivity of I_REF to V_X:
/// `2/(i_f2 U_T) * [alpha/(sqrt(1+alpha i_f2)-1) - 1/(sqrt(1+i_f2)-1)]^-1`.
pub fn sensitivity_siref<R: Real>(i_f2: R, alpha: R, t: R) -> Result<R> {
    check_temperature(t)?;
    if alpha == R::one() {
        return Err(Error::domain("alpha = 1 makes the sensitivity singular"));
    }
    check_alpha(alpha)?;
    if !(i_f2 > R::zero()) {
        return Err(Error::domain(format!("i_f2 must be positive, got {i_f2}")));
    }
    let bracket = alpha / sqrt1p_m1(alpha * i_f2) - R::one() / sqrt1p_m1(i_f2);
    if !(bracket > R::zero()) {
        return Err(Error::domain("sensitivity bracket vanished"));
    }
    Ok(R::lit(2.0) / (i_f2 * ut(t)) / bracket)
}

/// Gate voltage establishing `i_f2` in M2 with a grounded source:
/// `V_T0(T) + n * F(i_f2)`.
pub fn scm_gate_voltage<R: Real>(i_f2: R, flavor: &FlavorParams<R>, t: R, t0: R) -> Result<R> {
    Ok(devmodel::vt0_at(flavor, t, t0) + flavor.n * acm_f(i_f2, t)?)
}
