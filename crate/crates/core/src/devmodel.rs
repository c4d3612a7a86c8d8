//! Device-level equations: thermal voltage, ACM all-region model,
//! subthreshold current and body effect.
//!
//! Temperatures are absolute (K) and voltages are in volts throughout.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::real::Real;
use crate::roots::{self, Bracket};

/// Boltzmann constant (J/K), exact since the 2019 SI redefinition.
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Elementary charge (C), exact.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// 0 degC in kelvin.
pub const ZERO_CELSIUS: f64 = 273.15;
/// Default reference temperature, 25 degC.
pub const T0_DEFAULT: f64 = 298.15;

/// k/q in V/K.
pub fn k_over_q<R: Real>() -> R {
    R::lit(BOLTZMANN / ELEMENTARY_CHARGE)
}

pub fn celsius_to_kelvin<R: Real>(c: R) -> R {
    c + R::lit(ZERO_CELSIUS)
}

pub fn kelvin_to_celsius<R: Real>(k: R) -> R {
    k - R::lit(ZERO_CELSIUS)
}

/// Body-effect law of one device flavor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BodyModel<R> {
    /// Square-root law with body factor `gamma_b` (sqrt(V)) and Fermi
    /// potential `phi_fp` (V), whose drift is linear in temperature.
    Bulk {
        gamma_b: R,
        phi_fp: R,
        phi_fp_tslope: R,
    },
    /// Linear back-gate coupling, `dVT = -gamma_b_star * V_BS`.
    FdSoi { gamma_b_star: R },
}

impl<R: Real> BodyModel<R> {
    pub fn validate(&self) -> Result<()> {
        match *self {
            BodyModel::Bulk {
                gamma_b, phi_fp, ..
            } => {
                if !(gamma_b > R::zero()) || !(phi_fp > R::zero()) {
                    return Err(Error::input(
                        "bulk body model needs gamma_b > 0 and phi_fp > 0",
                    ));
                }
            }
            BodyModel::FdSoi { gamma_b_star } => {
                if !(gamma_b_star > R::zero() && gamma_b_star < R::one()) {
                    return Err(Error::input("FD-SOI body model needs 0 < gamma_b_star < 1"));
                }
            }
        }
        Ok(())
    }
}

/// Physical parameters of one device flavor (threshold-voltage type).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlavorParams<R> {
    /// Subthreshold slope factor.
    pub n: R,
    /// Temperature exponent of the carrier mobility.
    pub m: R,
    /// ACM specific sheet current at T0 (A).
    pub isq0_acm: R,
    /// Subthreshold specific sheet current at T0 (A).
    pub isq0_sub: R,
    /// Threshold voltage at zero V_BS and T0 (V).
    pub vt0: R,
    /// dV_T0/dT (V/K).
    pub vt0_tslope: R,
    pub body: BodyModel<R>,
}

impl<R: Real> FlavorParams<R> {
    pub fn validate(&self) -> Result<()> {
        if !(self.n > R::one()) {
            return Err(Error::input(format!("n must exceed 1, got {}", self.n)));
        }
        if !(self.m >= R::one() && self.m <= R::lit(2.5)) {
            return Err(Error::input(format!(
                "m must lie in [1, 2.5], got {}",
                self.m
            )));
        }
        if !(self.isq0_acm > R::zero()) || !(self.isq0_sub > R::zero()) {
            return Err(Error::input("specific sheet currents must be positive"));
        }
        if !self.vt0.is_finite() || !self.vt0_tslope.is_finite() {
            return Err(Error::input("threshold voltage parameters must be finite"));
        }
        self.body.validate()
    }
}

/// A technology: reference temperature plus named device flavors.
#[derive(Debug, Clone, PartialEq)]
pub struct TechnologyParams<R> {
    pub name: String,
    /// Reference temperature (K).
    pub t0: R,
    pub flavors: BTreeMap<String, FlavorParams<R>>,
}

impl<R: Real> TechnologyParams<R> {
    pub fn new(
        name: impl Into<String>,
        t0: R,
        flavors: BTreeMap<String, FlavorParams<R>>,
    ) -> Result<Self> {
        let tech = TechnologyParams {
            name: name.into(),
            t0,
            flavors,
        };
        tech.validate()?;
        Ok(tech)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t0 > R::zero()) {
            return Err(Error::input("T0 must be positive"));
        }
        if self.flavors.is_empty() {
            return Err(Error::input("technology needs at least one flavor"));
        }
        for (name, f) in &self.flavors {
            f.validate()
                .map_err(|e| Error::input(format!("flavor '{name}': {e}")))?;
        }
        Ok(())
    }

    pub fn flavor(&self, name: &str) -> Result<&FlavorParams<R>> {
        self.flavors.get(name).ok_or_else(|| {
            Error::input(format!(
                "unknown flavor '{name}' in technology '{}'",
                self.name
            ))
        })
    }
}

/// Bias state of a transistor in the ACM model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint<R> {
    pub i_f: R,
    pub i_r: R,
    /// Aspect ratio W/L.
    pub s: R,
}

impl<R: Real> OperatingPoint<R> {
    pub fn new(i_f: R, i_r: R, s: R) -> Result<Self> {
        if !(i_f > R::zero()) || !(i_r >= R::zero()) || !(s > R::zero()) {
            return Err(Error::domain(
                "operating point needs i_f > 0, i_r >= 0, S > 0",
            ));
        }
        Ok(OperatingPoint { i_f, i_r, s })
    }
}

pub(crate) fn check_temperature<R: Real>(t: R) -> Result<()> {
    if t > R::zero() && t.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "temperature must be positive, got {t} K"
        )))
    }
}

#[inline]
pub(crate) fn ut<R: Real>(t: R) -> R {
    k_over_q::<R>() * t
}

/// Thermal voltage kT/q.
pub fn thermal_voltage<R: Real>(t: R) -> Result<R> {
    check_temperature(t)?;
    Ok(ut(t))
}

fn isq_scaled<R: Real>(isq0: R, m: R, t: R, t0: R) -> Result<R> {
    check_temperature(t)?;
    check_temperature(t0)?;
    Ok(isq0 * (t / t0).powf(R::lit(2.0) - m))
}

/// ACM specific sheet current at temperature `t`, scaling as T^(2-m).
pub fn isq_acm<R: Real>(flavor: &FlavorParams<R>, t: R, t0: R) -> Result<R> {
    isq_scaled(flavor.isq0_acm, flavor.m, t, t0)
}

/// Subthreshold specific sheet current at temperature `t`, scaling as T^(2-m).
pub fn isq_sub<R: Real>(flavor: &FlavorParams<R>, t: R, t0: R) -> Result<R> {
    isq_scaled(flavor.isq0_sub, flavor.m, t, t0)
}

/// Threshold voltage at zero V_BS and temperature `t`.
pub fn vt0_at<R: Real>(flavor: &FlavorParams<R>, t: R, t0: R) -> R {
    flavor.vt0 + flavor.vt0_tslope * (t - t0)
}

/// `sqrt(1 + i) - 1` without cancellation for small `i`.
#[inline]
pub(crate) fn sqrt1p_m1<R: Real>(i: R) -> R {
    i / ((R::one() + i).sqrt() + R::one())
}

/// Unchecked ACM voltage function, in units of U_T.
#[inline]
pub(crate) fn acm_f_normalized<R: Real>(i_f: R) -> R {
    let s = (R::one() + i_f).sqrt();
    s - R::lit(2.0) + sqrt1p_m1(i_f).ln()
}

/// ACM relation between pinch-off/source voltage and forward inversion level:
/// `U_T * (sqrt(1+i_f) - 2 + ln(sqrt(1+i_f) - 1))`.
pub fn acm_f<R: Real>(i_f: R, t: R) -> Result<R> {
    check_temperature(t)?;
    if !(i_f > R::zero()) || !i_f.is_finite() {
        return Err(Error::domain(format!(
            "inversion level must be positive, got {i_f}"
        )));
    }
    Ok(ut(t) * acm_f_normalized(i_f))
}

/// Log-domain search interval shared by the inversion-level solvers.
pub(crate) fn log_level_bracket<R: Real>() -> Bracket<R> {
    Bracket {
        lo: R::lit(1e-12).ln(),
        hi: R::lit(1e7).ln(),
        lo_limit: R::min_positive_value().ln() + R::lit(2.0),
        hi_limit: R::max_value().ln() * R::lit(0.5),
    }
}

/// Inverse of [`acm_f`]: the unique `i_f > 0` with `acm_f(i_f, t) == v`.
pub fn acm_f_inverse<R: Real>(v: R, t: R) -> Result<R> {
    check_temperature(t)?;
    if !v.is_finite() {
        return Err(Error::domain("voltage must be finite"));
    }
    let target = v / ut(t);
    let half = R::lit(0.5);
    // x = ln(i_f); dF/dx = (sqrt(1+i_f) + 1) / 2 in U_T units
    let x = roots::solve_increasing(
        |x: R| {
            let i = x.exp();
            let s = (R::one() + i).sqrt();
            (acm_f_normalized(i) - target, (s + R::one()) * half)
        },
        log_level_bracket(),
        R::solver_tol(),
        "acm_f_inverse",
    )
    .map_err(|e| match e {
        Error::NoSolution(m) => Error::Convergence {
            what: m,
            iterations: roots::MAX_ITERATIONS,
        },
        other => other,
    })?;
    Ok(x.exp())
}

/// ACM drain current `I_SQ * S * (i_f - i_r)`.
pub fn acm_drain_current<R: Real>(op: &OperatingPoint<R>, isq: R) -> R {
    isq * op.s * (op.i_f - op.i_r)
}

/// Subthreshold drain current `I_SQ(T) * S * exp((V_GS - V_T) / (n U_T))`,
/// valid for V_DS > 4 U_T.
pub fn subthreshold_current<R: Real>(
    flavor: &FlavorParams<R>,
    s: R,
    vgs: R,
    vt: R,
    t: R,
    t0: R,
) -> Result<R> {
    let isq = isq_sub(flavor, t, t0)?;
    Ok(isq * s * ((vgs - vt) / (flavor.n * ut(t))).exp())
}

/// Threshold-voltage shift caused by a body-to-source voltage.
pub fn delta_vt<R: Real>(body: &BodyModel<R>, vbs: R, t: R, t0: R) -> Result<R> {
    match *body {
        BodyModel::Bulk {
            gamma_b,
            phi_fp,
            phi_fp_tslope,
        } => {
            let two_phi = R::lit(2.0) * (phi_fp + phi_fp_tslope * (t - t0));
            if !(two_phi - vbs > R::zero()) || !(two_phi > R::zero()) {
                return Err(Error::domain(format!(
                    "bulk body effect undefined: 2*phi_fp = {two_phi} V, V_BS = {vbs} V"
                )));
            }
            Ok(gamma_b * ((two_phi - vbs).sqrt() - two_phi.sqrt()))
        }
        BodyModel::FdSoi { gamma_b_star } => Ok(-gamma_b_star * vbs),
    }
}

/// Linearized body factor from the subthreshold slope factor, `n - 1`.
pub fn gamma_from_n<R: Real>(n: R) -> Result<R> {
    if n > R::one() {
        Ok(n - R::one())
    } else {
        Err(Error::domain(format!(
            "slope factor must exceed 1, got {n}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flavor(m: f64) -> FlavorParams<f64> {
        FlavorParams {
            n: 1.2,
            m,
            isq0_acm: 100e-9,
            isq0_sub: 50e-9,
            vt0: 0.4,
            vt0_tslope: 0.0,
            body: BodyModel::FdSoi { gamma_b_star: 0.15 },
        }
    }

    #[test]
    fn thermal_voltage_values() {
        assert!((thermal_voltage(298.15_f64).unwrap() - 25.693e-3).abs() < 1e-6);
        assert!((thermal_voltage(233.15_f64).unwrap() - 20.092e-3).abs() < 1e-6);
        assert!(thermal_voltage(0.0).is_err());
        assert!(thermal_voltage(-3.0).is_err());
    }

    #[test]
    fn isq_power_law() {
        let f = flavor(2.0);
        assert_eq!(isq_acm(&f, 2.0 * 298.15, 298.15).unwrap(), 100e-9);
        let f = flavor(1.5);
        let v = isq_acm(&f, 358.15, 298.15).unwrap();
        assert!((v - 109.6e-9).abs() < 0.05e-9, "{v}");
        assert_eq!(isq_acm(&f, 298.15, 298.15).unwrap(), 100e-9);
        assert_eq!(isq_sub(&f, 298.15, 298.15).unwrap(), 50e-9);
        let f = flavor(1.63);
        let v = isq_sub(&f, 233.15, 298.15).unwrap();
        assert!((v - 50e-9 * (233.15f64 / 298.15).powf(0.37)).abs() < 1e-20);
    }

    #[test]
    fn acm_f_anchor_points() {
        assert_eq!(acm_f(3.0, 298.15).unwrap(), 0.0);
        assert_eq!(acm_f(3.0, 400.0).unwrap(), 0.0);
        let v: f64 = acm_f(8.0, 298.15).unwrap();
        assert!((v - 43.50e-3).abs() < 0.01e-3, "{v}");
        assert!(acm_f(0.0, 298.15).is_err());
        assert!(acm_f(-1.0, 298.15).is_err());
    }

    #[test]
    fn acm_f_inverse_anchor_points() {
        assert!((acm_f_inverse(0.0_f64, 298.15).unwrap() - 3.0).abs() < 1e-10);
        let v: f64 = acm_f(250.6, 298.15).unwrap();
        let i = acm_f_inverse(v, 298.15).unwrap();
        assert!((i - 250.6).abs() / 250.6 < 1e-8);
    }

    #[test]
    fn acm_f_inverse_deep_weak_inversion() {
        // bisection on the forward function as the oracle
        let t = 298.15;
        let (mut lo, mut hi) = (-200.0f64, 0.0f64);
        for _ in 0..300 {
            let mid = 0.5 * (lo + hi);
            if acm_f(mid.exp(), t).unwrap() < -1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let oracle = (0.5 * (lo + hi)).exp();
        let i = acm_f_inverse(-1.0, t).unwrap();
        assert!(i > 0.0 && i.is_finite());
        assert!((i - oracle).abs() / oracle < 1e-8, "{i} vs {oracle}");
    }

    #[test]
    fn drain_current() {
        let op = OperatingPoint::new(1.0, 1.0, 3.0).unwrap();
        assert_eq!(acm_drain_current(&op, 1e-7), 0.0);
        let op = OperatingPoint::new(1.0, 0.0, 2.0).unwrap();
        assert!((acm_drain_current(&op, 100e-9_f64) - 200e-9).abs() < 1e-21);
        assert!(OperatingPoint::new(0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn subthreshold_anchor_points() {
        let f = flavor(1.5);
        let t = 298.15;
        let base = subthreshold_current(&f, 2.0, 0.3, 0.3, t, t).unwrap();
        assert!((base - 100e-9).abs() < 1e-20);
        let nut = f.n * thermal_voltage(t).unwrap();
        let e = subthreshold_current(&f, 2.0, 0.3 + nut, 0.3, t, t).unwrap();
        assert!((e / base - std::f64::consts::E).abs() < 1e-12);
        let g = FlavorParams { n: 1.21, ..f };
        let r = subthreshold_current(&g, 1.0, 0.0, 0.1, t, t).unwrap() / 50e-9;
        assert!((r - 0.0401).abs() < 5e-5, "{r}");
    }

    #[test]
    fn body_effect() {
        let soi = BodyModel::FdSoi { gamma_b_star: 0.15 };
        let bulk = BodyModel::Bulk {
            gamma_b: 0.4,
            phi_fp: 0.4,
            phi_fp_tslope: 0.0,
        };
        assert_eq!(delta_vt(&soi, 0.0, 300.0, 298.15).unwrap(), 0.0);
        assert_eq!(delta_vt(&bulk, 0.0, 300.0, 298.15).unwrap(), 0.0);
        assert!((delta_vt(&soi, 0.2_f64, 298.15, 298.15).unwrap() + 0.030).abs() < 1e-15);
        let d: f64 = delta_vt(&bulk, 0.2, 298.15, 298.15).unwrap();
        assert!((d + 47.9e-3).abs() < 0.05e-3, "{d}");
        assert!(delta_vt(&bulk, 0.9, 298.15, 298.15).is_err());
    }

    #[test]
    fn gamma_from_slope_factor() {
        assert!((gamma_from_n(1.2_f64).unwrap() - 0.2).abs() < 1e-15);
        assert!((gamma_from_n(1.21_f64).unwrap() - 0.21).abs() < 1e-15);
        assert!(gamma_from_n(1.0).is_err());
    }

    #[test]
    fn technology_validation() {
        let mut fl = BTreeMap::new();
        assert!(TechnologyParams::<f64>::new("x", 298.15, fl.clone()).is_err());
        fl.insert("a".to_string(), flavor(1.5));
        assert!(TechnologyParams::new("x", 0.0, fl.clone()).is_err());
        let t = TechnologyParams::new("x", 298.15, fl.clone()).unwrap();
        assert!(t.flavor("a").is_ok());
        assert!(t.flavor("b").is_err());
        fl.insert(
            "bad".to_string(),
            FlavorParams {
                n: 0.9,
                ..flavor(1.5)
            },
        );
        assert!(TechnologyParams::new("x", 298.15, fl).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let v = acm_f(8.0f32, 298.15).unwrap();
        let i = acm_f_inverse(v, 298.15f32).unwrap();
        assert!((i - 8.0).abs() / 8.0 < 1e-4);
    }
}
