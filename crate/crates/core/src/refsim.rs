//! Composite current reference: V_X source driving the SCM, evaluated over
//! temperature and process corners.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::devmodel;
use crate::devmodel::{celsius_to_kelvin, kelvin_to_celsius, ut, TechnologyParams};
use crate::error::{Error, Result};
use crate::real::Real;
use crate::scm::{reference_current, scm_gate_voltage, scm_solve_if2, ScmDesign};
use crate::series::{ptat_slope, tc_box, TempSeries};
use crate::vref4t::{
    apply_calibration, leakage_current, voff, vx_series, CalibrationConfig, VxModel,
};

/// Temperatures from `lo_c` to `hi_c` (degC) in `step_c` increments, in K.
///
/// The end point is included when it falls on the grid.
pub fn temperature_grid<R: Real>(lo_c: f64, hi_c: f64, step_c: f64) -> Result<Vec<R>> {
    if !(step_c > 0.0) || !(hi_c >= lo_c) || !lo_c.is_finite() || !hi_c.is_finite() {
        return Err(Error::input(format!(
            "invalid temperature grid {lo_c}:{hi_c}:{step_c}"
        )));
    }
    let count = ((hi_c - lo_c) / step_c + 1e-9).floor() as usize + 1;
    Ok((0..count)
        .map(|i| celsius_to_kelvin(R::lit(lo_c + step_c * i as f64)))
        .collect())
}

/// The -40..85 degC grid in 5 degC steps (26 points), in K.
pub fn default_temperature_grid<R: Real>() -> Vec<R> {
    temperature_grid(-40.0, 85.0, 5.0).expect("static grid")
}

/// Per-flavor parameter deltas of a process corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlavorDelta<R> {
    pub vt0_shift: R,
    pub isq_scale: R,
    pub n_shift: R,
}

impl<R: Real> Default for FlavorDelta<R> {
    fn default() -> Self {
        FlavorDelta {
            vt0_shift: R::zero(),
            isq_scale: R::one(),
            n_shift: R::zero(),
        }
    }
}

impl<R: Real> FlavorDelta<R> {
    fn then(self, other: FlavorDelta<R>) -> Self {
        FlavorDelta {
            vt0_shift: self.vt0_shift + other.vt0_shift,
            isq_scale: self.isq_scale * other.isq_scale,
            n_shift: self.n_shift + other.n_shift,
        }
    }
}

/// Synthetic process corner. `global` applies to every flavor; entries in
/// `per_flavor` stack on top of it.
#[derive(Debug, Clone, PartialEq)]
pub struct Corner<R> {
    pub name: String,
    pub global: FlavorDelta<R>,
    pub per_flavor: BTreeMap<String, FlavorDelta<R>>,
}

impl<R: Real> Corner<R> {
    pub fn identity() -> Self {
        Corner {
            name: "nominal".into(),
            global: FlavorDelta::default(),
            per_flavor: BTreeMap::new(),
        }
    }

    pub fn global(name: impl Into<String>, delta: FlavorDelta<R>) -> Self {
        Corner {
            name: name.into(),
            global: delta,
            per_flavor: BTreeMap::new(),
        }
    }

    pub fn on_flavor(
        name: impl Into<String>,
        flavor: impl Into<String>,
        delta: FlavorDelta<R>,
    ) -> Self {
        let mut per_flavor = BTreeMap::new();
        per_flavor.insert(flavor.into(), delta);
        Corner {
            name: name.into(),
            global: FlavorDelta::default(),
            per_flavor,
        }
    }

    /// Technology with the corner deltas applied.
    pub fn apply(&self, tech: &TechnologyParams<R>) -> Result<TechnologyParams<R>> {
        for key in self.per_flavor.keys() {
            tech.flavor(key)?;
        }
        let mut out = tech.clone();
        for (name, f) in out.flavors.iter_mut() {
            let d = match self.per_flavor.get(name) {
                Some(extra) => self.global.then(*extra),
                None => self.global,
            };
            if !(d.isq_scale > R::zero()) {
                return Err(Error::input(format!(
                    "corner '{}': isq_scale must be positive",
                    self.name
                )));
            }
            f.vt0 = f.vt0 + d.vt0_shift;
            f.isq0_acm = f.isq0_acm * d.isq_scale;
            f.isq0_sub = f.isq0_sub * d.isq_scale;
            f.n = f.n + d.n_shift;
            if !(f.n > R::one()) {
                return Err(Error::input(format!(
                    "corner '{}' drives n of flavor '{name}' to {} (must exceed 1)",
                    self.name, f.n
                )));
            }
        }
        Ok(out)
    }
}

/// A V_X source, an SCM and the voltages bounding the supply.
#[derive(Debug, Clone, PartialEq)]
pub struct CurrentReferenceDesign<R> {
    pub vx_model: VxModel<R>,
    pub scm: ScmDesign<R>,
    pub cal: Option<CalibrationConfig<R>>,
    pub tech: TechnologyParams<R>,
    /// |V_SG4| of the mirror at T0 (V).
    pub vsg4: R,
    /// V_GS5 of the buffer at T0 (V).
    pub vgs5: R,
    /// V_GS8 of the 2T reference at T0 (V).
    pub vgs8: R,
}

impl<R: Real> CurrentReferenceDesign<R> {
    pub fn validate(&self) -> Result<()> {
        self.scm.validate()?;
        self.vx_model.validate()?;
        self.tech.validate()?;
        self.tech.flavor(&self.scm.flavor)?;
        if let Some(cal) = &self.cal {
            cal.validate()?;
        }
        Ok(())
    }

    /// Same design with the calibration code programmed into the 4T reference.
    pub fn with_code(&self, code: u32) -> Result<Self> {
        let cal = self
            .cal
            .as_ref()
            .ok_or_else(|| Error::input("design has no calibration configuration"))?;
        let d = self
            .vx_model
            .four_t()
            .ok_or_else(|| Error::input("calibration needs the four-transistor V_X model"))?;
        Ok(CurrentReferenceDesign {
            vx_model: VxModel::FourT(apply_calibration(d, cal, code)?),
            ..self.clone()
        })
    }
}

/// Solved state at one temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimPoint<R> {
    /// Temperature (K).
    pub t: R,
    pub v_x: R,
    pub i_f2: R,
    pub i_ref: R,
}

fn unsolvable<R: Real>(t: R, e: Error) -> Error {
    match e {
        Error::NoSolution(reason) | Error::Domain(reason) => Error::Unsolvable {
            temperature_c: kelvin_to_celsius(t).as_f64(),
            reason,
        },
        Error::Convergence { what, .. } => Error::Unsolvable {
            temperature_c: kelvin_to_celsius(t).as_f64(),
            reason: format!("solver did not converge ({what})"),
        },
        other => other,
    }
}

fn solve_point<R: Real>(
    design: &CurrentReferenceDesign<R>,
    tech: &TechnologyParams<R>,
    t: R,
) -> Result<SimPoint<R>> {
    let flavor = tech.flavor(&design.scm.flavor)?;
    let v_x = design.vx_model.vx(tech, t).map_err(|e| unsolvable(t, e))?;
    let i_f2 = scm_solve_if2(v_x, design.scm.alpha, t).map_err(|e| unsolvable(t, e))?;
    let isq2 = devmodel::isq_acm(flavor, t, tech.t0)?;
    Ok(SimPoint {
        t,
        v_x,
        i_f2,
        i_ref: reference_current(isq2, i_f2, design.scm.s2, design.scm.n_mirror),
    })
}

/// Solves the reference at every temperature in `ts` (K), in grid order.
pub fn simulate_points<R: Real>(
    design: &CurrentReferenceDesign<R>,
    corner: &Corner<R>,
    ts: &[R],
) -> Result<Vec<SimPoint<R>>> {
    if ts.is_empty() {
        return Err(Error::input("temperature grid is empty"));
    }
    design.scm.validate()?;
    let tech = corner.apply(&design.tech)?;
    ts.par_iter()
        .map(|&t| solve_point(design, &tech, t))
        .collect()
}

/// I_REF(T) over `ts` (K).
pub fn simulate_iref<R: Real>(
    design: &CurrentReferenceDesign<R>,
    corner: &Corner<R>,
    ts: &[R],
) -> Result<TempSeries<R>> {
    let pts = simulate_points(design, corner, ts)?;
    TempSeries::new(pts.iter().map(|p| (p.t, p.i_ref)).collect())
}

/// Term of the minimum-supply expression that sets V_DD,min.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VddBranch {
    /// SCM gate voltage V_G.
    Gate,
    /// V_X + V_SG4.
    Mirror,
    /// V_X + V_GS5 + V_GS8.
    Buffer,
}

impl VddBranch {
    pub fn label(self) -> &'static str {
        match self {
            VddBranch::Gate => "V_G",
            VddBranch::Mirror => "V_X+V_SG4",
            VddBranch::Buffer => "V_X+V_GS5+V_GS8",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VddMin<R> {
    pub value: R,
    pub branch: VddBranch,
}

/// Minimum supply `4 U_T + max(V_G, V_X + V_SG4, V_X + V_GS5 + V_GS8)`.
///
/// Ties keep the earlier branch in the order gate, mirror, buffer.
pub fn vdd_min<R: Real>(design: &CurrentReferenceDesign<R>, t: R) -> Result<VddMin<R>> {
    let p = solve_point(design, &design.tech, t)?;
    let flavor = design.tech.flavor(&design.scm.flavor)?;
    let v_g = scm_gate_voltage(p.i_f2, flavor, t, design.tech.t0)?;
    let mut best = (v_g, VddBranch::Gate);
    for cand in [
        (p.v_x + design.vsg4, VddBranch::Mirror),
        (p.v_x + design.vgs5 + design.vgs8, VddBranch::Buffer),
    ] {
        if cand.0 > best.0 {
            best = cand;
        }
    }
    Ok(VddMin {
        value: R::lit(4.0) * ut(t) + best.0,
        branch: best.1,
    })
}

/// Supply current `(N + 1) I_REF + i_vref`.
///
/// With `i_vref = None` the four-transistor reference's leakage
/// `I_DS7 + I_DS9` is used; the generic model requires an explicit value.
pub fn supply_current<R: Real>(
    design: &CurrentReferenceDesign<R>,
    t: R,
    i_vref: Option<R>,
) -> Result<R> {
    let p = solve_point(design, &design.tech, t)?;
    let branch = match (i_vref, &design.vx_model) {
        (Some(i), _) => i,
        (None, VxModel::FourT(d)) => leakage_current(d, &design.tech, t)?,
        (None, VxModel::Generic { .. }) => {
            return Err(Error::input(
                "the generic V_X model needs an explicit reference-branch current",
            ))
        }
    };
    Ok((design.scm.n_mirror + R::one()) * p.i_ref + branch)
}

/// Outcome of one calibration code.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeResult<R> {
    pub code: u32,
    /// Box TC of I_REF (ppm/degC); `None` when some temperature is unsolvable.
    pub tc: Option<R>,
    /// CWT offset of V_X at T0 (V).
    pub voff: Option<R>,
    /// End-point PTAT slope of V_X (V/K).
    pub slope: Option<R>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult<R> {
    pub best_code: u32,
    pub best_tc: R,
    pub per_code: Vec<CodeResult<R>>,
}

fn evaluate_code<R: Real>(
    design: &CurrentReferenceDesign<R>,
    tech: &TechnologyParams<R>,
    corner: &Corner<R>,
    ts: &[R],
    code: u32,
) -> Result<CodeResult<R>> {
    let coded = design.with_code(code)?;
    let d4 = coded.vx_model.four_t().expect("checked by with_code");
    let voff = voff(d4, tech, tech.t0).ok();
    let slope = vx_series(&coded.vx_model, tech, ts)
        .and_then(|s| ptat_slope(&s))
        .ok();
    let (tc, note) = match simulate_iref(&coded, corner, ts).and_then(|s| tc_box(&s)) {
        Ok(tc) => (Some(tc), None),
        Err(
            e @ (Error::Unsolvable { .. }
            | Error::Domain(_)
            | Error::Convergence { .. }
            | Error::NoSolution(_)),
        ) => (None, Some(e.to_string())),
        Err(e) => return Err(e),
    };
    Ok(CodeResult {
        code,
        tc,
        voff,
        slope,
        note,
    })
}

/// Exhaustive search over calibration codes for the lowest I_REF TC.
///
/// Unsolvable codes are kept in the table with a note; ties go to the
/// lower code.
pub fn calibrate_tc<R: Real>(
    design: &CurrentReferenceDesign<R>,
    corner: &Corner<R>,
    ts: &[R],
) -> Result<CalibrationResult<R>> {
    let cal = design
        .cal
        .as_ref()
        .ok_or_else(|| Error::input("design has no calibration configuration"))?;
    cal.validate()?;
    if design.vx_model.four_t().is_none() {
        return Err(Error::input(
            "calibration needs the four-transistor V_X model",
        ));
    }
    let tech = corner.apply(&design.tech)?;
    let per_code = (0..cal.code_count())
        .into_par_iter()
        .map(|code| evaluate_code(design, &tech, corner, ts, code))
        .collect::<Result<Vec<_>>>()?;
    let mut best: Option<(u32, R)> = None;
    for r in &per_code {
        if let Some(tc) = r.tc {
            if best.is_none_or(|(_, b)| tc < b) {
                best = Some((r.code, tc));
            }
        }
    }
    let (best_code, best_tc) = best.ok_or_else(|| {
        Error::Domain(format!(
            "no calibration code is solvable at corner '{}'",
            corner.name
        ))
    })?;
    Ok(CalibrationResult {
        best_code,
        best_tc,
        per_code,
    })
}

/// Evaluates `f` on every `(row, col)` cell in parallel; cells where `f`
/// fails are `None`. Output is in row-major grid order.
pub fn par_grid<R, T, F>(rows: &[R], cols: &[R], f: F) -> Vec<Vec<Option<T>>>
where
    R: Real,
    T: Send,
    F: Fn(R, R) -> Result<T> + Sync,
{
    rows.par_iter()
        .map(|&r| cols.par_iter().map(|&c| f(r, c).ok()).collect())
        .collect()
}

/// Per-corner results for one design.
#[derive(Debug, Clone, PartialEq)]
pub struct CornerReport<R> {
    pub corner: String,
    pub series: TempSeries<R>,
    pub tc: R,
}

/// Composite summary of a design across corners.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceReport<R> {
    pub design: CurrentReferenceDesign<R>,
    pub corners: Vec<CornerReport<R>>,
    /// V_DD,min at T0.
    pub vdd_min: VddMin<R>,
    /// Supply current at T0, when the reference-branch current is known.
    pub supply_current: Option<R>,
}

pub fn report<R: Real>(
    design: &CurrentReferenceDesign<R>,
    corners: &[Corner<R>],
    ts: &[R],
) -> Result<ReferenceReport<R>> {
    design.validate()?;
    let corners = corners
        .iter()
        .map(|c| {
            let series = simulate_iref(design, c, ts)?;
            let tc = tc_box(&series)?;
            Ok(CornerReport {
                corner: c.name.clone(),
                series,
                tc,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let t0 = design.tech.t0;
    Ok(ReferenceReport {
        design: design.clone(),
        corners,
        vdd_min: vdd_min(design, t0)?,
        supply_current: supply_current(design, t0, None).ok(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::devmodel::{BodyModel, FlavorParams};
    use crate::vref4t::{TrimTarget, Vref4tDesign};

    const T0: f64 = 298.15;

    fn tech(m: f64) -> TechnologyParams<f64> {
        let mut fl = BTreeMap::new();
        fl.insert(
            "x".to_string(),
            FlavorParams {
                n: 1.2,
                m,
                isq0_acm: 100e-9,
                isq0_sub: 50e-9,
                vt0: 0.35,
                vt0_tslope: -0.6e-3,
                body: BodyModel::FdSoi { gamma_b_star: 0.2 },
            },
        );
        TechnologyParams::new("t", T0, fl).unwrap()
    }

    fn generic(v_off: f64, k: f64, alpha: f64, m: f64) -> CurrentReferenceDesign<f64> {
        CurrentReferenceDesign {
            vx_model: VxModel::Generic {
                v_off,
                k_ptat: k,
                n: 1.2,
            },
            scm: ScmDesign {
                alpha,
                n_mirror: 3.0,
                s2: 0.1,
                isq_ratio: 1.0,
                flavor: "x".into(),
            },
            cal: None,
            tech: tech(m),
            vsg4: 0.0,
            vgs5: 0.0,
            vgs8: 0.0,
        }
    }

    #[test]
    fn grids() {
        let g: Vec<f64> = default_temperature_grid();
        assert_eq!(g.len(), 26);
        assert!((g[0] - 233.15).abs() < 1e-12 && (g[25] - 358.15).abs() < 1e-9);
        assert_eq!(temperature_grid::<f64>(0.0, 10.0, 3.0).unwrap().len(), 4);
        assert!(temperature_grid::<f64>(0.0, 10.0, 0.0).is_err());
    }

    #[test]
    fn identity_corner_is_bit_exact() {
        let d = generic(20e-3, 8.0, 1.5, 1.5);
        let ts = default_temperature_grid();
        let a = simulate_iref(&d, &Corner::identity(), &ts).unwrap();
        let b = simulate_iref(&d, &Corner::global("zero", FlavorDelta::default()), &ts).unwrap();
        assert_eq!(a, b);
        let tk = Corner::identity().apply(&d.tech).unwrap();
        assert_eq!(tk, d.tech);
    }

    #[test]
    fn corner_rejects_bad_deltas() {
        let d = generic(20e-3, 8.0, 1.5, 1.5);
        let bad_n = Corner::global(
            "n",
            FlavorDelta {
                n_shift: -0.3,
                ..Default::default()
            },
        );
        assert!(bad_n.apply(&d.tech).is_err());
        let bad_f = Corner::on_flavor("f", "nope", FlavorDelta::default());
        assert!(bad_f.apply(&d.tech).is_err());
    }

    #[test]
    fn pure_ptat_point_is_flat() {
        let d = generic(20e-3, 8.0, 1.5, 1.5);
        let ts = default_temperature_grid();
        let s = simulate_iref(&d, &Corner::identity(), &ts).unwrap();
        let r25 = s.nearest(298.15);
        for v in s.values() {
            assert!((v / r25 - 1.0).abs() < 0.02);
        }
    }

    #[test]
    fn pure_ptat_tracks_power_law() {
        let d = generic(0.0, 8.0, 1.5, 1.5);
        let ts = default_temperature_grid();
        let pts = simulate_points(&d, &Corner::identity(), &ts).unwrap();
        let i0 = pts[0].i_f2;
        for p in &pts {
            assert!((p.i_f2 / i0 - 1.0).abs() < 1e-9);
            let expect = pts[0].i_ref * (p.t / pts[0].t).powf(0.5);
            assert!((p.i_ref / expect - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn unsolvable_names_temperature() {
        // V_X stays at 1 mV, below U_T ln 2
        let d = generic(1e-3, 1.0, 2.0, 1.5);
        let e = simulate_iref(&d, &Corner::identity(), &default_temperature_grid()).unwrap_err();
        match e {
            Error::Unsolvable { temperature_c, .. } => assert!((temperature_c + 40.0).abs() < 1e-9),
            other => panic!("{other:?}"),
        }
        assert!(simulate_iref(&d, &Corner::identity(), &[]).is_err());
    }

    #[test]
    fn s2_leaves_tc_unchanged() {
        let ts = default_temperature_grid();
        let d = generic(20e-3, 8.0, 1.6, 1.5);
        let mut d2 = d.clone();
        d2.scm.s2 *= 2.0;
        let a = tc_box(&simulate_iref(&d, &Corner::identity(), &ts).unwrap()).unwrap();
        let b = tc_box(&simulate_iref(&d2, &Corner::identity(), &ts).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn vdd_min_branches() {
        let mut d = generic(20e-3, 8.0, 1.5, 1.5);
        let p = solve_point(&d, &d.tech, T0).unwrap();
        let vg = scm_gate_voltage(p.i_f2, d.tech.flavor("x").unwrap(), T0, T0).unwrap();
        let v = vdd_min(&d, T0).unwrap();
        assert_eq!(v.branch, VddBranch::Gate);
        assert!((v.value - (4.0 * ut(T0) + vg)).abs() < 1e-15);

        // shift V_T0 so that V_G = 0.70 V at 25 degC
        let f = d.tech.flavors.get_mut("x").unwrap();
        f.vt0 += 0.70 - vg;
        let v = vdd_min(&d, T0).unwrap();
        assert!((v.value - 0.80).abs() < 0.01, "{}", v.value);

        d.vgs8 = 1.0;
        let v = vdd_min(&d, T0).unwrap();
        assert_eq!(v.branch, VddBranch::Buffer);
        d.vsg4 = 2.0;
        assert_eq!(vdd_min(&d, T0).unwrap().branch, VddBranch::Mirror);
    }

    #[test]
    fn supply_current_values() {
        let mut d = generic(20e-3, 8.0, 1.5, 1.5);
        let p = solve_point(&d, &d.tech, T0).unwrap();
        d.scm.s2 *= 2.5e-9 / p.i_ref;
        let i = supply_current(&d, T0, Some(0.0)).unwrap();
        assert!((i - 10e-9).abs() < 1e-18);
        let j = supply_current(&d, T0, Some(1e-9)).unwrap();
        assert!(((j - i) - 1e-9).abs() < 1e-20);
        assert!(supply_current(&d, T0, None).is_err());
    }

    fn four_t_design() -> CurrentReferenceDesign<f64> {
        let mut d = generic(0.0, 1.0, 1.6, 1.5);
        d.vx_model = VxModel::FourT(Vref4tDesign {
            s6: 1.0,
            s7: 2.0,
            s8: 1.0,
            s9: 8.0,
            flavor67_9: "x".into(),
            flavor8: "x".into(),
            vbs7_override: Some(0.2),
        });
        d.cal = Some(CalibrationConfig {
            target: TrimTarget::M7Offset,
            unit_aspect: 0.25,
            bits: 4,
            base_units: 1,
            nominal_code: 7,
        });
        d
    }

    #[test]
    fn leakage_grows_exponentially_in_t() {
        let d = four_t_design();
        let ts = default_temperature_grid::<f64>();
        let cur: Vec<f64> = ts
            .iter()
            .map(|&t| {
                supply_current(&d, t, None).unwrap() - supply_current(&d, t, Some(0.0)).unwrap()
            })
            .collect();
        assert!(cur.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn calibration_is_argmin() {
        let d = four_t_design();
        let ts = default_temperature_grid();
        let r = calibrate_tc(&d, &Corner::identity(), &ts).unwrap();
        assert_eq!(r.per_code.len(), 16);
        for c in &r.per_code {
            if let Some(tc) = c.tc {
                assert!(r.best_tc <= tc);
            }
        }
        let offs: Vec<f64> = r.per_code.iter().map(|c| c.voff.unwrap()).collect();
        assert!(offs.windows(2).all(|w| w[1] > w[0]));
        let code_tc = tc_box(
            &simulate_iref(&d.with_code(r.best_code).unwrap(), &Corner::identity(), &ts).unwrap(),
        )
        .unwrap();
        assert_eq!(code_tc, r.best_tc);
    }

    #[test]
    fn calibration_requires_config() {
        let d = generic(20e-3, 8.0, 1.5, 1.5);
        assert!(calibrate_tc(&d, &Corner::identity(), &default_temperature_grid()).is_err());
    }

    #[test]
    fn grid_order_and_gaps() {
        let g = par_grid(&[1.0, 2.0], &[10.0, 20.0, 30.0], |a: f64, b: f64| {
            if b > 25.0 {
                Err(Error::domain("skip"))
            } else {
                Ok(a * b)
            }
        });
        assert_eq!(
            g,
            vec![
                vec![Some(10.0), Some(20.0), None],
                vec![Some(20.0), Some(40.0), None]
            ]
        );
    }
}
