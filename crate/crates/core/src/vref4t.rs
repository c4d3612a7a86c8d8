//! Four-transistor subthreshold voltage reference generating the SCM bias.
//!
//! M7 and M9 are zero-V_GS leakage sources feeding the diode-connected M6, so
//! `V_X = V_GS6`. M8/M9 form a 2T reference whose output forward-biases the
//! body of M7, lowering its threshold and adding a CWT offset to the PTAT
//! voltage set by S9/S6.

use crate::devmodel::{self, check_temperature, delta_vt, isq_sub, ut, vt0_at, TechnologyParams};
use crate::error::{Error, Result};
use crate::real::Real;
use crate::roots;
use crate::series::TempSeries;

#[derive(Debug, Clone, PartialEq)]
pub struct Vref4tDesign<R> {
    pub s6: R,
    pub s7: R,
    pub s8: R,
    pub s9: R,
    /// Flavor shared by M6, M7 and M9.
    pub flavor67_9: String,
    pub flavor8: String,
    /// Fixed V_BS7 (V); when set, M8 is not modeled.
    pub vbs7_override: Option<R>,
}

impl<R: Real> Vref4tDesign<R> {
    pub fn validate(&self) -> Result<()> {
        if !(self.s6 > R::zero() && self.s8 > R::zero() && self.s9 > R::zero()) {
            return Err(Error::input("S6, S8 and S9 must be positive"));
        }
        if !(self.s7 >= R::zero()) {
            return Err(Error::input("S7 must be non-negative"));
        }
        Ok(())
    }
}

/// Device whose unit count is set by the calibration code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrimTarget {
    /// Parallel units on M9: trims the PTAT slope of V_X.
    M9Slope,
    /// Parallel units on M7: trims the CWT offset of V_X.
    M7Offset,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationConfig<R> {
    pub target: TrimTarget,
    /// Aspect ratio of one unit finger.
    pub unit_aspect: R,
    /// Code width; codes span `0..2^bits`.
    pub bits: u32,
    /// Units that are always on.
    pub base_units: u32,
    /// Code programmed in the nominal (uncalibrated) design.
    pub nominal_code: u32,
}

impl<R: Real> CalibrationConfig<R> {
    pub fn validate(&self) -> Result<()> {
        if self.bits == 0 || self.bits > 16 {
            return Err(Error::input(format!(
                "calibration bits must be in 1..=16, got {}",
                self.bits
            )));
        }
        if !(self.unit_aspect > R::zero()) {
            return Err(Error::input(
                "calibration unit aspect ratio must be positive",
            ));
        }
        if self.nominal_code >= self.code_count() {
            return Err(Error::input(format!(
                "nominal code {} outside 0..{}",
                self.nominal_code,
                self.code_count()
            )));
        }
        Ok(())
    }

    pub fn code_count(&self) -> u32 {
        1u32 << self.bits
    }

    /// Aspect ratio of the trimmed device at `code`.
    pub fn trimmed_aspect(&self, code: u32) -> R {
        R::lit(f64::from(self.base_units + code)) * self.unit_aspect
    }
}

/// How the SCM bias voltage is produced.
#[derive(Debug, Clone, PartialEq)]
pub enum VxModel<R> {
    /// PTAT voltage with a CWT offset: `v_off + n U_T ln(k_ptat)`.
    Generic {
        v_off: R,
        k_ptat: R,
        n: R,
    },
    FourT(Vref4tDesign<R>),
}

impl<R: Real> VxModel<R> {
    pub fn validate(&self) -> Result<()> {
        match self {
            VxModel::Generic { v_off, k_ptat, n } => {
                if !(*k_ptat >= R::one()) || !(*v_off >= R::zero()) || !(*n > R::one()) {
                    return Err(Error::input(
                        "generic V_X model needs k_ptat >= 1, v_off >= 0, n > 1",
                    ));
                }
                Ok(())
            }
            VxModel::FourT(d) => d.validate(),
        }
    }

    pub fn vx(&self, tech: &TechnologyParams<R>, t: R) -> Result<R> {
        match self {
            VxModel::Generic { v_off, k_ptat, n } => vx_generic(*v_off, *k_ptat, *n, t),
            VxModel::FourT(d) => vx_4t(d, tech, t),
        }
    }

    pub fn four_t(&self) -> Option<&Vref4tDesign<R>> {
        match self {
            VxModel::FourT(d) => Some(d),
            VxModel::Generic { .. } => None,
        }
    }
}

/// Body-to-source voltage of M7, set by the M8/M9 2T reference.
pub fn vbs7<R: Real>(design: &Vref4tDesign<R>, tech: &TechnologyParams<R>, t: R) -> Result<R> {
    check_temperature(t)?;
    if let Some(v) = design.vbs7_override {
        return Ok(v);
    }
    let f9 = tech.flavor(&design.flavor67_9)?;
    let f8 = tech.flavor(&design.flavor8)?;
    let ratio = isq_sub(f9, t, tech.t0)? * design.s9 / (isq_sub(f8, t, tech.t0)? * design.s8);
    if !(ratio > R::zero()) {
        return Err(Error::domain("V_BS7 log argument must be positive"));
    }
    let vt08 = vt0_at(f8, t, tech.t0);
    let vt09 = vt0_at(f9, t, tech.t0);
    Ok((f8.n / f9.n * vt08 - vt09) + f8.n * ut(t) * ratio.ln())
}

/// Evenly spaced temperatures from `tlo` to `thi`, about 5 K apart.
fn sweep_points<R: Real>(tlo: R, thi: R) -> Vec<R> {
    let count = ((thi - tlo).as_f64() / 5.0).round().max(1.0) as usize + 1;
    (0..count)
        .map(|i| tlo + (thi - tlo) * R::lit(i as f64 / (count - 1) as f64))
        .collect()
}

/// Spread `max - min` of V_BS7 over `[tlo, thi]`.
pub fn vbs7_spread<R: Real>(
    design: &Vref4tDesign<R>,
    tech: &TechnologyParams<R>,
    tlo: R,
    thi: R,
) -> Result<R> {
    let (mut lo, mut hi) = (R::infinity(), R::neg_infinity());
    for t in sweep_points(tlo, thi) {
        let v = vbs7(design, tech, t)?;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Ok(hi - lo)
}

/// S9/S8 that makes V_BS7 constant with temperature over `[tlo, thi]`.
///
/// Golden-section search on `ln(S9/S8)` over `[0.1, 100]`, minimizing the
/// spread of V_BS7. The spread and the box TC share their minimizer, and the
/// spread stays defined where V_BS7 averages to zero.
pub fn size_s9_over_s8_for_cwt<R: Real>(
    design: &Vref4tDesign<R>,
    tech: &TechnologyParams<R>,
    tlo: R,
    thi: R,
) -> Result<R> {
    if !(thi > tlo) {
        return Err(Error::input("CWT sizing needs Thi > Tlo"));
    }
    check_temperature(tlo)?;
    let probe = Vref4tDesign {
        s8: R::one(),
        s9: R::one(),
        vbs7_override: None,
        ..design.clone()
    };
    // resolve flavor errors up front rather than inside the search
    vbs7(&probe, tech, tlo)?;
    let objective = |log_ratio: R| {
        let d = Vref4tDesign {
            s9: log_ratio.exp(),
            ..probe.clone()
        };
        vbs7_spread(&d, tech, tlo, thi).unwrap_or(R::infinity())
    };
    let x = roots::golden_section_min(
        objective,
        R::lit(0.1).ln(),
        R::lit(100.0).ln(),
        R::lit(1e-9),
        "S9/S8 sizing",
    )?;
    Ok(x.exp())
}

/// PTAT voltage with a CWT offset: `v_off + n U_T ln(k_ptat)`.
pub fn vx_generic<R: Real>(v_off: R, k_ptat: R, n: R, t: R) -> Result<R> {
    check_temperature(t)?;
    if !(k_ptat > R::zero()) {
        return Err(Error::domain("K_PTAT must be positive"));
    }
    Ok(v_off + n * ut(t) * k_ptat.ln())
}

/// Threshold shift of M7 at temperature `t`.
pub fn delta_vt7<R: Real>(design: &Vref4tDesign<R>, tech: &TechnologyParams<R>, t: R) -> Result<R> {
    let f = tech.flavor(&design.flavor67_9)?;
    delta_vt(&f.body, vbs7(design, tech, t)?, t, tech.t0)
}

/// Output of the 4T reference:
/// `n U_T ln(S9/S6 + S7/S6 * exp(-dV_T7 / (n U_T)))`.
pub fn vx_4t<R: Real>(design: &Vref4tDesign<R>, tech: &TechnologyParams<R>, t: R) -> Result<R> {
    check_temperature(t)?;
    if !(design.s6 > R::zero()) {
        return Err(Error::domain("S6 must be positive"));
    }
    let n = tech.flavor(&design.flavor67_9)?.n;
    let nu = n * ut(t);
    let dvt7 = delta_vt7(design, tech, t)?;
    Ok(nu * (design.s9 / design.s6 + design.s7 / design.s6 * (-dvt7 / nu).exp()).ln())
}

/// CWT offset of V_X relative to the pure M6/M9 PTAT reference at `t0`.
pub fn voff<R: Real>(design: &Vref4tDesign<R>, tech: &TechnologyParams<R>, t0: R) -> Result<R> {
    check_temperature(t0)?;
    if !(design.s9 > R::zero()) {
        return Err(Error::domain("S9 must be positive"));
    }
    let n = tech.flavor(&design.flavor67_9)?.n;
    let nu = n * ut(t0);
    let dvt7 = delta_vt7(design, tech, t0)?;
    Ok(nu * (R::one() + design.s7 / design.s9 * (-dvt7 / nu).exp()).ln())
}

/// M7 threshold shift that yields a requested CWT offset at `t0`.
pub fn delta_vt7_for_voff<R: Real>(voff: R, s7_over_s9: R, n: R, t0: R) -> Result<R> {
    check_temperature(t0)?;
    if !(voff > R::zero()) || !(s7_over_s9 > R::zero()) {
        return Err(Error::domain(
            "offset back-solve needs V_off > 0 and S7/S9 > 0",
        ));
    }
    let nu = n * ut(t0);
    Ok(-nu * (((voff / nu).exp() - R::one()) / s7_over_s9).ln())
}

/// V_X sampled over `temps` (K).
pub fn vx_series<R: Real>(
    model: &VxModel<R>,
    tech: &TechnologyParams<R>,
    temps: &[R],
) -> Result<TempSeries<R>> {
    let values = temps
        .iter()
        .map(|&t| model.vx(tech, t))
        .collect::<Result<Vec<_>>>()?;
    TempSeries::from_parts(temps, &values)
}

/// Returns `design` with the trimmed device set to `code` units.
pub fn apply_calibration<R: Real>(
    design: &Vref4tDesign<R>,
    cal: &CalibrationConfig<R>,
    code: u32,
) -> Result<Vref4tDesign<R>> {
    cal.validate()?;
    if code >= cal.code_count() {
        return Err(Error::input(format!(
            "calibration code {code} outside 0..{}",
            cal.code_count()
        )));
    }
    let mut out = design.clone();
    match cal.target {
        TrimTarget::M9Slope => out.s9 = cal.trimmed_aspect(code),
        TrimTarget::M7Offset => out.s7 = cal.trimmed_aspect(code),
    }
    Ok(out)
}

/// Supply-current share of the 4T reference, I_DS7 + I_DS9 at V_GS = 0.
pub fn leakage_current<R: Real>(
    design: &Vref4tDesign<R>,
    tech: &TechnologyParams<R>,
    t: R,
) -> Result<R> {
    let f = tech.flavor(&design.flavor67_9)?;
    let vt9 = vt0_at(f, t, tech.t0);
    let vt7 = vt9 + delta_vt7(design, tech, t)?;
    let i7 = devmodel::subthreshold_current(f, design.s7, R::zero(), vt7, t, tech.t0)?;
    let i9 = devmodel::subthreshold_current(f, design.s9, R::zero(), vt9, t, tech.t0)?;
    Ok(i7 + i9)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::devmodel::{k_over_q, BodyModel, FlavorParams};
    use crate::series::{ptat_slope, taylor_params, taylor_residual};
    use std::collections::BTreeMap;

    const T0: f64 = 298.15;

    fn flavor(n: f64, vt0: f64, slope: f64) -> FlavorParams<f64> {
        FlavorParams {
            n,
            m: 1.5,
            isq0_acm: 1e-7,
            isq0_sub: 5e-8,
            vt0,
            vt0_tslope: slope,
            body: BodyModel::FdSoi { gamma_b_star: 0.15 },
        }
    }

    fn tech(f8: FlavorParams<f64>) -> TechnologyParams<f64> {
        let mut m = BTreeMap::new();
        m.insert("a".into(), flavor(1.2, 0.3, 0.0));
        m.insert("b".into(), f8);
        TechnologyParams::new("t", T0, m).unwrap()
    }

    fn generic_design(s7: f64, s9: f64) -> Vref4tDesign<f64> {
        Vref4tDesign {
            s6: 1.0,
            s7,
            s8: 1.0,
            s9,
            flavor67_9: "a".into(),
            flavor8: "b".into(),
            vbs7_override: Some(0.2),
        }
    }

    fn grid() -> Vec<f64> {
        (0..26).map(|i| 233.15 + 5.0 * i as f64).collect()
    }

    #[test]
    fn vbs7_cancellations() {
        let tk = tech(flavor(1.2, 0.3, 0.0));
        let mut d = generic_design(2.0, 1.0);
        d.vbs7_override = None;
        assert!(vbs7(&d, &tk, T0).unwrap().abs() < 1e-15);
        d.s9 = std::f64::consts::E;
        let v = vbs7(&d, &tk, T0).unwrap();
        assert!((v - 1.2 * 25.693e-3).abs() < 2e-6, "{v}");
        d.vbs7_override = Some(0.123);
        assert_eq!(vbs7(&d, &tk, 400.0).unwrap(), 0.123);
    }

    #[test]
    fn cwt_sizing_degenerate_is_unity() {
        let tk = tech(flavor(1.2, 0.3, 0.0));
        let d = generic_design(2.0, 8.0);
        let r = size_s9_over_s8_for_cwt(&d, &tk, 233.15, 358.15).unwrap();
        assert!((r - 1.0).abs() < 1e-6, "{r}");
    }

    #[test]
    fn cwt_sizing_matches_closed_form() {
        // M8 threshold falls 0.1 mV/K faster than M9's
        let s = -1e-4;
        let tk = tech(flavor(1.2, 0.45, s));
        let d = generic_design(2.0, 8.0);
        let r = size_s9_over_s8_for_cwt(&d, &tk, 233.15, 358.15).unwrap();
        let closed = (-s / (1.2 * k_over_q::<f64>())).exp();
        assert!((r / closed - 1.0).abs() < 0.01, "{r} vs {closed}");
        let sized = Vref4tDesign {
            s9: r,
            vbs7_override: None,
            ..d
        };
        assert!(vbs7_spread(&sized, &tk, 233.15, 358.15).unwrap() < 1e-7);
    }

    #[test]
    fn vx_4t_values() {
        let tk = tech(flavor(1.2, 0.3, 0.0));
        let pure = generic_design(0.0, 8.0);
        let nu = 1.2 * ut(T0);
        assert!((vx_4t(&pure, &tk, T0).unwrap() - nu * 8f64.ln()).abs() < 1e-12);
        let v = vx_4t(&generic_design(2.0, 8.0), &tk, T0).unwrap();
        assert!((v - 79.8e-3).abs() < 0.1e-3, "{v}");
        let mut sym = generic_design(1.0, 1.0);
        sym.vbs7_override = Some(0.0);
        assert!((vx_4t(&sym, &tk, T0).unwrap() - nu * 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn vx_generic_values() {
        let v = vx_generic(20e-3, 8.0, 1.2, T0).unwrap();
        assert!((v - 84.12e-3).abs() < 0.01e-3, "{v}");
        assert_eq!(vx_generic(20e-3, 1.0, 1.2, 250.0).unwrap(), 20e-3);
        let model = VxModel::Generic {
            v_off: 20e-3,
            k_ptat: 8.0,
            n: 1.2,
        };
        let tk = tech(flavor(1.2, 0.3, 0.0));
        let s = vx_series(&model, &tk, &grid()).unwrap();
        let expected = 1.2 * k_over_q::<f64>() * 8f64.ln();
        assert!((ptat_slope(&s).unwrap() - expected).abs() < 1e-12);
        assert!((ptat_slope(&s).unwrap() * 1e3 - 0.2150).abs() < 1e-4);
        let (v0, _) = taylor_params(&s).unwrap();
        assert!((v0 - 20e-3).abs() < 1e-9);
    }

    #[test]
    fn voff_values() {
        let tk = tech(flavor(1.2, 0.3, 0.0));
        assert_eq!(voff(&generic_design(0.0, 8.0), &tk, T0).unwrap(), 0.0);
        let v = voff(&generic_design(2.0, 8.0), &tk, T0).unwrap();
        assert!((v - 15.7e-3).abs() < 0.1e-3, "{v}");
        let d = generic_design(2.0, 8.0);
        let consistency = vx_4t(&d, &tk, T0).unwrap() - 1.2 * ut(T0) * 8f64.ln();
        assert!((consistency - v).abs() < 1e-12);
    }

    #[test]
    fn voff_back_solve() {
        let dv = delta_vt7_for_voff(17.3e-3, 0.25, 1.21, T0).unwrap();
        let nu = 1.21 * ut(T0);
        let v = nu * (1.0 + 0.25 * (-dv / nu).exp()).ln();
        assert!((v - 17.3e-3).abs() < 1e-12);
        assert!(dv < 0.0);
    }

    #[test]
    fn fd_soi_offset_is_nearly_linear() {
        let tk = tech(flavor(1.2, 0.3, 0.0));
        let s = vx_series(&VxModel::FourT(generic_design(2.0, 8.0)), &tk, &grid()).unwrap();
        assert!(taylor_residual(&s).unwrap() < 0.5e-3);
    }

    #[test]
    fn calibration_codes() {
        let d = generic_design(2.0, 8.0);
        let cal = CalibrationConfig {
            target: TrimTarget::M9Slope,
            unit_aspect: 0.5,
            bits: 5,
            base_units: 1,
            nominal_code: 15,
        };
        let c0 = apply_calibration(&d, &cal, 0).unwrap();
        assert_eq!(c0.s9, 0.5);
        assert_eq!(
            Vref4tDesign {
                s9: d.s9,
                ..c0.clone()
            },
            d
        );
        assert!(apply_calibration(&d, &cal, 32).is_err());

        let tk = tech(flavor(1.2, 0.3, 0.0));
        let slopes: Vec<f64> = (0..32)
            .map(|c| {
                let dd = apply_calibration(&d, &cal, c).unwrap();
                ptat_slope(&vx_series(&VxModel::FourT(dd), &tk, &grid()).unwrap()).unwrap()
            })
            .collect();
        assert!(slopes.windows(2).all(|w| w[1] > w[0]));

        let cal7 = CalibrationConfig {
            target: TrimTarget::M7Offset,
            ..cal
        };
        let offs: Vec<f64> = (0..32)
            .map(|c| voff(&apply_calibration(&d, &cal7, c).unwrap(), &tk, T0).unwrap())
            .collect();
        assert!(offs.windows(2).all(|w| w[1] > w[0]));
        let c5 = apply_calibration(&d, &cal7, 5).unwrap();
        assert_eq!(Vref4tDesign { s7: d.s7, ..c5 }, d);
    }

    #[test]
    fn leakage_grows_with_temperature() {
        let tk = tech(flavor(1.2, 0.3, -0.5e-3));
        let d = generic_design(2.0, 8.0);
        let a = leakage_current(&d, &tk, 250.0).unwrap();
        let b = leakage_current(&d, &tk, 350.0).unwrap();
        assert!(b > a && a > 0.0);
    }
}
