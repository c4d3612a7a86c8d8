//! Ready-made technologies and designs used by the examples and tests.
//!
//! Parameter values are illustrative fits, not foundry data.

use std::collections::BTreeMap;

use crate::devmodel::{BodyModel, FlavorParams, TechnologyParams, T0_DEFAULT};
use crate::refsim::{default_temperature_grid, CurrentReferenceDesign};
use crate::scm::ScmDesign;
use crate::sizing::SizingInputs;
use crate::vref4t::{
    delta_vt7_for_voff, vbs7, CalibrationConfig, TrimTarget, Vref4tDesign, VxModel,
};

/// Single-flavor FD-SOI technology with n = 1.2, m = 1.5, gamma* = 0.15.
pub fn generic_tech() -> TechnologyParams<f64> {
    let mut fl = BTreeMap::new();
    fl.insert(
        "generic".to_string(),
        FlavorParams {
            n: 1.2,
            m: 1.5,
            isq0_acm: 100e-9,
            isq0_sub: 100e-9,
            vt0: 0.30,
            vt0_tslope: -0.6e-3,
            body: BodyModel::FdSoi { gamma_b_star: 0.15 },
        },
    );
    TechnologyParams::new("generic", T0_DEFAULT, fl).expect("valid preset")
}

/// CWT offset targeted by the 22-nm-style design (V).
pub const GF22_VOFF: f64 = 17.3e-3;

fn gf22_flavors(gamma_b_star: f64) -> BTreeMap<String, FlavorParams<f64>> {
    let base = FlavorParams {
        n: 1.21,
        m: 1.63,
        isq0_acm: 200e-9,
        isq0_sub: 200e-9,
        vt0: 0.28,
        vt0_tslope: -0.6e-3,
        body: BodyModel::FdSoi { gamma_b_star },
    };
    let mut fl = BTreeMap::new();
    fl.insert("slvt".to_string(), base);
    // higher threshold that falls faster with T: S9/S8 = 4.38 makes V_BS7 CWT near 188 mV
    fl.insert(
        "lvt".to_string(),
        FlavorParams {
            vt0: base.vt0 + 0.142_08,
            vt0_tslope: base.vt0_tslope - 1.5401e-4,
            ..base
        },
    );
    fl.insert(
        "pslvt".to_string(),
        FlavorParams {
            isq0_acm: 60e-9,
            isq0_sub: 60e-9,
            vt0: -0.30,
            ..base
        },
    );
    fl
}

/// 22-nm FD-SOI-style technology.
///
/// gamma* of `slvt` is chosen so that the reference below produces a CWT
/// offset of 17.3 mV at T0 with S7/S6 = 2 and S9/S6 = 8.
pub fn gf22_style_tech() -> TechnologyParams<f64> {
    let probe =
        TechnologyParams::new("gf22-style", T0_DEFAULT, gf22_flavors(0.2)).expect("valid preset");
    let d = gf22_vref();
    let v = vbs7(&d, &probe, T0_DEFAULT).expect("preset V_BS7");
    let dvt = delta_vt7_for_voff(GF22_VOFF, d.s7 / d.s9, 1.21, T0_DEFAULT).expect("preset offset");
    TechnologyParams::new("gf22-style", T0_DEFAULT, gf22_flavors(-dvt / v)).expect("valid preset")
}

/// 4T reference of the 22-nm-style design: S7/S6 = 2, S9/S6 = 8, S9/S8 = 4.38.
pub fn gf22_vref() -> Vref4tDesign<f64> {
    Vref4tDesign {
        s6: 1.0,
        s7: 2.0,
        s8: 8.0 / 4.38,
        s9: 8.0,
        flavor67_9: "slvt".into(),
        flavor8: "lvt".into(),
        vbs7_override: None,
    }
}

/// M7 offset trim of the 22-nm-style design; the nominal code gives S7 = 2.
pub fn gf22_calibration() -> CalibrationConfig<f64> {
    CalibrationConfig {
        target: TrimTarget::M7Offset,
        unit_aspect: 0.125,
        bits: 5,
        base_units: 1,
        nominal_code: 15,
    }
}

/// Complete 22-nm-style current reference at alpha = 1.825.
pub fn gf22_design() -> CurrentReferenceDesign<f64> {
    CurrentReferenceDesign {
        vx_model: VxModel::FourT(gf22_vref()),
        scm: ScmDesign {
            alpha: 1.825,
            n_mirror: 3.0,
            s2: 0.12,
            isq_ratio: 1.0,
            flavor: "slvt".into(),
        },
        cal: Some(gf22_calibration()),
        tech: gf22_style_tech(),
        vsg4: 0.40,
        vgs5: 0.25,
        vgs8: 0.30,
    }
}

/// Sizing inputs for the 22-nm-style flow (2.5 nA, N = 3).
pub fn gf22_sizing_inputs() -> SizingInputs<f64> {
    SizingInputs {
        i_ref_target: 2.5e-9,
        n_mirror: 3.0,
        isq_ratio: 1.0,
        s7_over_s6: 2.0,
        s9_over_s6: 8.0,
        s9_rows: (2..=16).map(f64::from).collect(),
        alpha_lo: 1.05,
        alpha_hi: 3.0,
        alpha_step: 0.025,
        tech: gf22_style_tech(),
        scm_flavor: "slvt".into(),
        flavor67_9: "slvt".into(),
        flavor8: "lvt".into(),
        vbs7_override: None,
        mirror_flavor: "pslvt".into(),
        buffer_flavor: "slvt".into(),
        if_mirror: 10.0,
        if_buffer: 1.0,
        temps: default_temperature_grid(),
        cal: Some(gf22_calibration()),
    }
}

/// Sizing inputs on [`generic_tech`] with V_BS7 fixed at 0.2 V.
pub fn generic_sizing_inputs() -> SizingInputs<f64> {
    SizingInputs {
        tech: generic_tech(),
        scm_flavor: "generic".into(),
        flavor67_9: "generic".into(),
        flavor8: "generic".into(),
        mirror_flavor: "generic".into(),
        buffer_flavor: "generic".into(),
        vbs7_override: Some(0.2),
        cal: None,
        ..gf22_sizing_inputs()
    }
}

/// 0.11-um bulk-style technology with square-root body effect.
pub fn bulk110_style_tech() -> TechnologyParams<f64> {
    let base = FlavorParams {
        n: 1.3,
        m: 1.5,
        isq0_acm: 80e-9,
        isq0_sub: 80e-9,
        vt0: 0.45,
        vt0_tslope: -0.8e-3,
        body: BodyModel::Bulk {
            gamma_b: 0.35,
            phi_fp: 0.42,
            phi_fp_tslope: -0.8e-3,
        },
    };
    let mut fl = BTreeMap::new();
    fl.insert("nmos".to_string(), base);
    fl.insert(
        "nmos_hvt".to_string(),
        FlavorParams {
            vt0: 0.55,
            vt0_tslope: -0.9e-3,
            ..base
        },
    );
    fl.insert(
        "pmos".to_string(),
        FlavorParams {
            vt0: -0.42,
            isq0_acm: 25e-9,
            isq0_sub: 25e-9,
            ..base
        },
    );
    TechnologyParams::new("bulk110-style", T0_DEFAULT, fl).expect("valid preset")
}
