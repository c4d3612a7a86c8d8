//! Four-step sizing flow: CWT V_BS7 sizing of the 4T reference, an alpha
//! guess from the analytic TC map, aspect ratios from the SCM equations,
//! and a final pass at a refined alpha.

use crate::devmodel::{acm_f, isq_acm, ut, TechnologyParams};
use crate::error::{Error, Result};
use crate::real::Real;
use crate::refsim::{par_grid, simulate_iref, Corner, CurrentReferenceDesign};
use crate::scm::{scm_s1_over_s2, scm_solve_if2, sensitivity_siref, ScmDesign};
use crate::series::tc_box;
use crate::vref4t::{size_s9_over_s8_for_cwt, vx_4t, CalibrationConfig, Vref4tDesign, VxModel};

#[derive(Debug, Clone, PartialEq)]
pub struct SizingInputs<R> {
    /// Target I_REF at T0 (A).
    pub i_ref_target: R,
    pub n_mirror: R,
    /// I_SQ2 / I_SQ1 of the SCM pair.
    pub isq_ratio: R,
    pub s7_over_s6: R,
    /// S9/S6 of the design point.
    pub s9_over_s6: R,
    /// S9/S6 rows of the TC map.
    pub s9_rows: Vec<R>,
    pub alpha_lo: R,
    pub alpha_hi: R,
    pub alpha_step: R,
    pub tech: TechnologyParams<R>,
    pub scm_flavor: String,
    pub flavor67_9: String,
    pub flavor8: String,
    /// Fixed V_BS7; skips the S9/S8 sizing when set.
    pub vbs7_override: Option<R>,
    pub mirror_flavor: String,
    pub buffer_flavor: String,
    /// Inversion level of the mirror devices M3/M4.
    pub if_mirror: R,
    /// Inversion level of the buffer M5.
    pub if_buffer: R,
    /// Analysis temperatures (K).
    pub temps: Vec<R>,
    pub cal: Option<CalibrationConfig<R>>,
}

impl<R: Real> SizingInputs<R> {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: R| v > R::zero() && v.is_finite();
        if !pos(self.i_ref_target) {
            return Err(Error::input("target reference current must be positive"));
        }
        if !(self.n_mirror >= R::one()) || !pos(self.isq_ratio) {
            return Err(Error::input(
                "mirror ratio must be >= 1 and the I_SQ ratio positive",
            ));
        }
        if !(self.s7_over_s6 >= R::zero())
            || !pos(self.s9_over_s6)
            || self.s9_rows.iter().any(|&s| !pos(s))
        {
            return Err(Error::input(
                "S7/S6 must be non-negative and S9/S6 positive",
            ));
        }
        if !(self.alpha_lo > R::one()
            && self.alpha_hi <= R::lit(4.0)
            && self.alpha_hi >= self.alpha_lo)
            || !pos(self.alpha_step)
        {
            return Err(Error::input(
                "alpha range must lie within (1, 4] with a positive step",
            ));
        }
        if !pos(self.if_mirror) || !pos(self.if_buffer) {
            return Err(Error::input(
                "mirror and buffer inversion levels must be positive",
            ));
        }
        if self.temps.len() < 2 {
            return Err(Error::input("sizing needs at least two temperatures"));
        }
        for f in [
            &self.scm_flavor,
            &self.flavor67_9,
            &self.flavor8,
            &self.mirror_flavor,
            &self.buffer_flavor,
        ] {
            self.tech.flavor(f)?;
        }
        Ok(())
    }

    /// The alpha grid `alpha_lo, alpha_lo + step, ..., <= alpha_hi`.
    pub fn alpha_grid(&self) -> Vec<R> {
        let count = ((self.alpha_hi - self.alpha_lo) / self.alpha_step + R::lit(1e-9))
            .floor()
            .to_usize()
            .unwrap_or(0)
            + 1;
        (0..count)
            .map(|i| self.alpha_lo + self.alpha_step * R::lit(i as f64))
            .collect()
    }

    fn scm(&self, alpha: R, s2: R) -> ScmDesign<R> {
        ScmDesign {
            alpha,
            n_mirror: self.n_mirror,
            s2,
            isq_ratio: self.isq_ratio,
            flavor: self.scm_flavor.clone(),
        }
    }

    fn reference(&self, vref: Vref4tDesign<R>, alpha: R) -> CurrentReferenceDesign<R> {
        CurrentReferenceDesign {
            vx_model: VxModel::FourT(vref),
            scm: self.scm(alpha, R::one()),
            cal: self.cal,
            tech: self.tech.clone(),
            vsg4: R::zero(),
            vgs5: R::zero(),
            vgs8: R::zero(),
        }
    }
}

/// Named inequality `value > 4 U_T` with its margin.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintCheck<R> {
    pub name: String,
    pub value: R,
    /// `value - 4 U_T` (V).
    pub margin: R,
    pub pass: bool,
}

impl<R: Real> ConstraintCheck<R> {
    fn new(name: &str, value: R, t: R) -> Self {
        let margin = value - R::lit(4.0) * ut(t);
        ConstraintCheck {
            name: name.to_string(),
            value,
            margin,
            pass: margin > R::zero(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SizingReport<R> {
    pub alpha_opt: R,
    /// Box TC of I_REF over the input temperatures (ppm/degC).
    pub tc_analytic: Option<R>,
    pub s_iref: R,
    pub s1: R,
    pub s2: R,
    pub s3: R,
    pub s4: R,
    pub s5: R,
    pub vx_t0: R,
    pub if1: R,
    pub if2: R,
    pub constraint_checks: Vec<ConstraintCheck<R>>,
    /// Relative deviation of the emitted S1/S2 from the current-balance ratio.
    pub s1_s2_residual: R,
    pub vref: Vref4tDesign<R>,
    /// True for the step (d) report.
    pub is_final: bool,
}

/// Step (a): sizes the 4T reference with S6 = 1 and returns V_X at T0.
pub fn step1_vref<R: Real>(inputs: &SizingInputs<R>) -> Result<(Vref4tDesign<R>, R)> {
    let mut d = Vref4tDesign {
        s6: R::one(),
        s7: inputs.s7_over_s6,
        s8: R::one(),
        s9: inputs.s9_over_s6,
        flavor67_9: inputs.flavor67_9.clone(),
        flavor8: inputs.flavor8.clone(),
        vbs7_override: inputs.vbs7_override,
    };
    if inputs.vbs7_override.is_none() {
        let (lo, hi) = temp_span(&inputs.temps)?;
        let r = size_s9_over_s8_for_cwt(&d, &inputs.tech, lo, hi).map_err(|e| Error::Sizing {
            step: "a",
            reason: e.to_string(),
        })?;
        d.s8 = d.s9 / r;
    }
    let vx = vx_4t(&d, &inputs.tech, inputs.tech.t0)?;
    Ok((d, vx))
}

fn temp_span<R: Real>(ts: &[R]) -> Result<(R, R)> {
    let lo = ts.iter().copied().fold(R::infinity(), R::min);
    let hi = ts.iter().copied().fold(R::neg_infinity(), R::max);
    if !(hi > lo) {
        return Err(Error::input("temperature grid must span a range"));
    }
    Ok((lo, hi))
}

/// 4T design at another S9/S6, keeping S9/S8 (and so V_BS7) unchanged.
fn with_s9<R: Real>(d: &Vref4tDesign<R>, s9: R) -> Vref4tDesign<R> {
    Vref4tDesign {
        s9,
        s8: d.s8 * s9 / d.s9,
        ..d.clone()
    }
}

/// Box TC of I_REF for a 4T design and alpha.
fn tc_at<R: Real>(
    inputs: &SizingInputs<R>,
    vref: &Vref4tDesign<R>,
    alpha: R,
    ts: &[R],
) -> Result<R> {
    let design = inputs.reference(vref.clone(), alpha);
    tc_box(&simulate_iref(&design, &Corner::identity(), ts)?)
}

/// TC over the (S9/S6, alpha) grid; unsolvable cells are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct TcMap<R> {
    pub s9_rows: Vec<R>,
    pub alphas: Vec<R>,
    pub tc: Vec<Vec<Option<R>>>,
}

impl<R: Real> TcMap<R> {
    /// Minimizing `(alpha, tc)` of a row; ties go to the lower alpha.
    pub fn row_min(&self, row: usize) -> Option<(R, R)> {
        argmin(&self.alphas, &self.tc[row])
    }
}

fn argmin<R: Real>(alphas: &[R], tcs: &[Option<R>]) -> Option<(R, R)> {
    let mut best: Option<(R, R)> = None;
    for (&a, tc) in alphas.iter().zip(tcs) {
        if let Some(tc) = *tc {
            if best.is_none_or(|(_, b)| tc < b) {
                best = Some((a, tc));
            }
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaGuess<R> {
    pub alpha: R,
    pub tc: R,
    pub map: TcMap<R>,
}

/// Step (b): the alpha minimizing the analytic I_REF TC at the design's
/// S9/S6, plus the full map over `inputs.s9_rows`.
pub fn step2_alpha_guess<R: Real>(inputs: &SizingInputs<R>, ts: &[R]) -> Result<AlphaGuess<R>> {
    inputs.validate()?;
    let (vref, _) = step1_vref(inputs)?;
    let alphas = inputs.alpha_grid();
    let tc = par_grid(&inputs.s9_rows, &alphas, |s9, a| {
        tc_at(inputs, &with_s9(&vref, s9), a, ts)
    });
    let map = TcMap {
        s9_rows: inputs.s9_rows.clone(),
        alphas,
        tc,
    };
    let row = match map.s9_rows.iter().position(|&s| s == inputs.s9_over_s6) {
        Some(i) => map.tc[i].clone(),
        None => par_grid(&[inputs.s9_over_s6], &map.alphas, |s9, a| {
            tc_at(inputs, &with_s9(&vref, s9), a, ts)
        })
        .remove(0),
    };
    let (alpha, tc) = argmin(&map.alphas, &row).ok_or_else(|| Error::Sizing {
        step: "b",
        reason: format!(
            "no alpha in [{}, {}] is solvable over the temperature range at S9/S6 = {}",
            inputs.alpha_lo, inputs.alpha_hi, inputs.s9_over_s6
        ),
    })?;
    Ok(AlphaGuess { alpha, tc, map })
}

/// V_GS (or |V_SG|) of a saturated device at inversion level `i_f`, T0.
fn gate_source<R: Real>(tech: &TechnologyParams<R>, flavor: &str, i_f: R) -> Result<R> {
    let f = tech.flavor(flavor)?;
    Ok(f.vt0.abs() + f.n * acm_f(i_f, tech.t0)?)
}

/// Step (c): aspect ratios for a given alpha and V_X at T0.
pub fn step3_aspect_ratios<R: Real>(
    inputs: &SizingInputs<R>,
    vref: &Vref4tDesign<R>,
    vx_t0: R,
    alpha: R,
) -> Result<SizingReport<R>> {
    let tech = &inputs.tech;
    let t0 = tech.t0;
    let if2 = scm_solve_if2(vx_t0, alpha, t0)?;
    let if1 = alpha * if2;
    let s_iref = sensitivity_siref(if2, alpha, t0)?;
    let isq2 = isq_acm(tech.flavor(&inputs.scm_flavor)?, t0, t0)?;
    let s2 = inputs.n_mirror * inputs.i_ref_target / (isq2 * if2);
    let ratio = scm_s1_over_s2(alpha, inputs.n_mirror, inputs.isq_ratio)?;
    let s1 = s2 * ratio;
    let isq_m = isq_acm(tech.flavor(&inputs.mirror_flavor)?, t0, t0)?;
    let s4 = inputs.i_ref_target / (isq_m * inputs.if_mirror);
    let s3 = inputs.n_mirror * s4;
    let isq_b = isq_acm(tech.flavor(&inputs.buffer_flavor)?, t0, t0)?;
    let s5 = inputs.n_mirror * inputs.i_ref_target / (isq_b * inputs.if_buffer);
    let vsg4 = gate_source(tech, &inputs.mirror_flavor, inputs.if_mirror)?;
    let vgs5 = gate_source(tech, &inputs.buffer_flavor, inputs.if_buffer)?;
    let checks = vec![
        ConstraintCheck::new("V_SG4 > 4U_T", vsg4, t0),
        ConstraintCheck::new("V_Y = V_X + V_GS5 > 4U_T", vx_t0 + vgs5, t0),
    ];
    let tc_analytic = tc_at(inputs, vref, alpha, &inputs.temps).ok();
    Ok(SizingReport {
        alpha_opt: alpha,
        tc_analytic,
        s_iref,
        s1,
        s2,
        s3,
        s4,
        s5,
        vx_t0,
        if1,
        if2,
        constraint_checks: checks,
        s1_s2_residual: ((s1 / s2) / ratio - R::one()).abs(),
        vref: vref.clone(),
        is_final: false,
    })
}

/// Step (d): step (c) rerun at an externally refined alpha.
pub fn step4_finalize<R: Real>(
    inputs: &SizingInputs<R>,
    vref: &Vref4tDesign<R>,
    vx_t0: R,
    alpha_sim: R,
) -> Result<SizingReport<R>> {
    let mut r = step3_aspect_ratios(inputs, vref, vx_t0, alpha_sim)?;
    r.is_final = true;
    Ok(r)
}

/// One point of the TC-versus-S2/S1 curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct S2S1Point<R> {
    pub alpha: R,
    pub s2_over_s1: R,
    pub tc: Option<R>,
}

/// Analytic TC at the design's S9/S6 against S2/S1, the layout proxy of alpha.
pub fn tc_vs_s2_over_s1<R: Real>(inputs: &SizingInputs<R>, ts: &[R]) -> Result<Vec<S2S1Point<R>>> {
    inputs.validate()?;
    let (vref, _) = step1_vref(inputs)?;
    let alphas = inputs.alpha_grid();
    let tcs = par_grid(&[inputs.s9_over_s6], &alphas, |_, a| {
        tc_at(inputs, &vref, a, ts)
    })
    .remove(0);
    alphas
        .iter()
        .zip(tcs)
        .map(|(&alpha, tc)| {
            Ok(S2S1Point {
                alpha,
                s2_over_s1: R::one() / scm_s1_over_s2(alpha, inputs.n_mirror, inputs.isq_ratio)?,
                tc,
            })
        })
        .collect()
}

/// Minimum of a TC-versus-S2/S1 curve; ties go to the lower alpha.
pub fn curve_min<R: Real>(curve: &[S2S1Point<R>]) -> Option<S2S1Point<R>> {
    let mut best: Option<S2S1Point<R>> = None;
    for p in curve {
        if let Some(tc) = p.tc {
            if best.is_none_or(|b| tc < b.tc.expect("set")) {
                best = Some(*p);
            }
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowResult<R> {
    pub vref: Vref4tDesign<R>,
    pub vx_t0: R,
    pub guess: AlphaGuess<R>,
    pub step3: SizingReport<R>,
    pub final_report: SizingReport<R>,
}

/// Runs steps (a) through (d). Without `alpha_sim` the final pass reuses
/// the guessed alpha.
pub fn run_flow<R: Real>(inputs: &SizingInputs<R>, alpha_sim: Option<R>) -> Result<FlowResult<R>> {
    inputs.validate()?;
    let (vref, vx_t0) = step1_vref(inputs)?;
    let guess = step2_alpha_guess(inputs, &inputs.temps)?;
    let wrap = |step: &'static str| {
        move |e: Error| Error::Sizing {
            step,
            reason: e.to_string(),
        }
    };
    let step3 = step3_aspect_ratios(inputs, &vref, vx_t0, guess.alpha).map_err(wrap("c"))?;
    let final_report = step4_finalize(inputs, &vref, vx_t0, alpha_sim.unwrap_or(guess.alpha))
        .map_err(wrap("d"))?;
    Ok(FlowResult {
        vref,
        vx_t0,
        guess,
        step3,
        final_report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use crate::refsim::default_temperature_grid;

    fn fixed_vbs7_inputs() -> SizingInputs<f64> {
        let mut i = presets::generic_sizing_inputs();
        i.vbs7_override = Some(0.2);
        i
    }

    #[test]
    fn step1_fixed_vbs7_point() {
        let (d, vx) = step1_vref(&fixed_vbs7_inputs()).unwrap();
        assert_eq!(d.s6, 1.0);
        assert!((vx - 79.8e-3).abs() < 0.5e-3, "{vx}");
        let mut i = fixed_vbs7_inputs();
        i.s7_over_s6 = 0.0;
        let (_, vx) = step1_vref(&i).unwrap();
        assert!((vx - 1.2 * ut(298.15) * 8f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn alpha_grid_shape() {
        let i = fixed_vbs7_inputs();
        let g = i.alpha_grid();
        assert_eq!(g.len(), 79);
        assert!((g[78] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn step2_is_row_argmin() {
        let mut i = fixed_vbs7_inputs();
        i.s9_rows = vec![4.0, 8.0];
        let ts = default_temperature_grid();
        let g = step2_alpha_guess(&i, &ts).unwrap();
        let (a, tc) = g.map.row_min(1).unwrap();
        assert_eq!((a, tc), (g.alpha, g.tc));
        assert!(g.map.tc[1].iter().flatten().all(|&v| v >= g.tc));
    }

    #[test]
    fn step3_inverts_reference_current() {
        let i = fixed_vbs7_inputs();
        let (d, vx) = step1_vref(&i).unwrap();
        let r = step3_aspect_ratios(&i, &d, vx, 1.5).unwrap();
        let isq = isq_acm(i.tech.flavor(&i.scm_flavor).unwrap(), 298.15, 298.15).unwrap();
        let iref = crate::scm::reference_current(isq, r.if2, r.s2, i.n_mirror);
        assert!((iref / i.i_ref_target - 1.0).abs() < 1e-12);
        assert!(r.s1_s2_residual < 1e-9);
        assert_eq!(r.if1, 1.5 * r.if2);

        let mut half = i.clone();
        half.i_ref_target *= 0.5;
        let h = step3_aspect_ratios(&half, &d, vx, 1.5).unwrap();
        assert!((h.s2 / r.s2 - 0.5).abs() < 1e-12 && (h.s1 / r.s1 - 0.5).abs() < 1e-12);
        assert_eq!((h.if2, h.s_iref), (r.if2, r.s_iref));
    }

    #[test]
    fn step3_rejects_infimum_violation() {
        let i = fixed_vbs7_inputs();
        let (d, _) = step1_vref(&i).unwrap();
        assert!(matches!(
            step3_aspect_ratios(&i, &d, 1e-3, 1.5),
            Err(Error::NoSolution(_))
        ));
    }

    #[test]
    fn checks_margin_sign() {
        let c = ConstraintCheck::new("x", 0.05_f64, 298.15);
        assert!(!c.pass && (c.margin - (0.05 - 4.0 * ut(298.15))).abs() < 1e-15);
        assert!(ConstraintCheck::new("y", 0.2, 298.15).pass);
    }

    #[test]
    fn step4_matches_step3_at_same_alpha() {
        let i = fixed_vbs7_inputs();
        let (d, vx) = step1_vref(&i).unwrap();
        let a = step3_aspect_ratios(&i, &d, vx, 1.7).unwrap();
        let b = step4_finalize(&i, &d, vx, 1.7).unwrap();
        assert_eq!(
            SizingReport {
                is_final: false,
                ..b
            },
            a
        );
    }

    #[test]
    fn s2_over_s1_increasing() {
        let mut i = fixed_vbs7_inputs();
        i.alpha_step = 0.1;
        let c = tc_vs_s2_over_s1(&i, &default_temperature_grid()).unwrap();
        assert!(c.windows(2).all(|w| w[1].s2_over_s1 > w[0].s2_over_s1));
        let m = curve_min(&c).unwrap();
        assert!(c.iter().filter_map(|p| p.tc).all(|t| t >= m.tc.unwrap()));
    }

    #[test]
    fn flow_reports_step_b_on_infeasible_offset() {
        let mut i = fixed_vbs7_inputs();
        i.s7_over_s6 = 0.0;
        i.s9_over_s6 = 1.0;
        i.s9_rows = vec![1.0];
        let e = run_flow(&i, None).unwrap_err();
        assert!(matches!(e, Error::Sizing { step: "b", .. }), "{e:?}");
    }

    #[test]
    fn cwt_sizing_sets_s8() {
        let i = presets::gf22_sizing_inputs();
        let (d, _) = step1_vref(&i).unwrap();
        assert!((d.s9 / d.s8 - 4.38).abs() < 0.2, "{}", d.s9 / d.s8);
    }
}
