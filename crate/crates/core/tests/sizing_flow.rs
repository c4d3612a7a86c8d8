use scmref::devmodel::{celsius_to_kelvin, T0_DEFAULT};
use scmref::presets;
use scmref::refsim::{
    calibrate_tc, default_temperature_grid, simulate_iref, vdd_min, Corner, FlavorDelta,
};
use scmref::series::{tc_box, TempSeries};
use scmref::sizing::{run_flow, step2_alpha_guess, step3_aspect_ratios, step4_finalize};
use scmref::vref4t::{size_s9_over_s8_for_cwt, vbs7};

#[test]
fn gf22_cwt_vbs7_anchor() {
    let tech = presets::gf22_style_tech();
    let d = presets::gf22_vref();
    let (lo, hi) = (celsius_to_kelvin(-40.0), celsius_to_kelvin(85.0));
    let r = size_s9_over_s8_for_cwt(&d, &tech, lo, hi).unwrap();
    assert!((r - 4.38).abs() < 0.2, "{r}");
    let ts = default_temperature_grid();
    let vals: Vec<f64> = ts.iter().map(|&t| vbs7(&d, &tech, t).unwrap()).collect();
    let s = TempSeries::from_parts(&ts, &vals).unwrap();
    assert!((s.nearest(T0_DEFAULT) - 0.188).abs() < 2e-3);
    assert!(tc_box(&s).unwrap() < 50.0);
}

#[test]
fn gf22_inversion_levels_near_table_values() {
    let inputs = presets::gf22_sizing_inputs();
    let (d, vx) = scmref::sizing::step1_vref(&inputs).unwrap();
    let r = step3_aspect_ratios(&inputs, &d, vx, 1.65).unwrap();
    assert_eq!(r.if1, 1.65 * r.if2);
    assert!((r.if2 / 100.50 - 1.0).abs() < 0.2, "{}", r.if2);
    assert!((r.if1 / 165.82 - 1.0).abs() < 0.2, "{}", r.if1);
}

#[test]
fn refined_alpha_raises_if2_and_lowers_s2() {
    let inputs = presets::gf22_sizing_inputs();
    let (d, vx) = scmref::sizing::step1_vref(&inputs).unwrap();
    let guess = step3_aspect_ratios(&inputs, &d, vx, 1.825).unwrap();
    let fin = step4_finalize(&inputs, &d, vx, 1.65).unwrap();
    assert!(fin.if2 > guess.if2 && fin.s2 < guess.s2);
    assert!(fin.is_final);
    let fresh = inputs.clone();
    let design = scmref::Design {
        vx_model: scmref::Vx::FourT(d.clone()),
        scm: scmref::Scm {
            alpha: 1.65,
            n_mirror: fresh.n_mirror,
            s2: fin.s2,
            isq_ratio: fresh.isq_ratio,
            flavor: fresh.scm_flavor.clone(),
        },
        cal: None,
        tech: fresh.tech.clone(),
        vsg4: 0.0,
        vgs5: 0.0,
        vgs8: 0.0,
    };
    let tc = tc_box(&simulate_iref(&design, &Corner::identity(), &fresh.temps).unwrap()).unwrap();
    assert!((fin.tc_analytic.unwrap() / tc - 1.0).abs() < 1e-12);
}

#[test]
fn valley_alpha_is_non_decreasing_in_s9() {
    let inputs = presets::gf22_sizing_inputs();
    let g = step2_alpha_guess(&inputs, &inputs.temps).unwrap();
    let minima: Vec<f64> = (0..g.map.s9_rows.len())
        .map(|r| g.map.row_min(r).unwrap().0)
        .collect();
    assert!(minima.windows(2).all(|w| w[1] >= w[0]), "{minima:?}");
    let row8 = g.map.s9_rows.iter().position(|&s| s == 8.0).unwrap();
    assert_eq!(g.map.row_min(row8).unwrap(), (g.alpha, g.tc));
}

#[test]
fn full_flow_reports() {
    let inputs = presets::gf22_sizing_inputs();
    let f = run_flow(&inputs, Some(1.65)).unwrap();
    assert_eq!(f.step3.alpha_opt, f.guess.alpha);
    assert_eq!(f.final_report.alpha_opt, 1.65);
    assert!(f.final_report.s1_s2_residual < 1e-9);
    assert_eq!(f.final_report.constraint_checks.len(), 2);
}

#[test]
fn gf22_vdd_min_is_gate_limited() {
    let d = presets::gf22_design();
    let v = vdd_min(&d, T0_DEFAULT).unwrap();
    assert!(v.value > 0.0 && v.value < 1.2, "{}", v.value);
}

#[test]
fn nominal_corner_calibration_keeps_nominal_neighbourhood() {
    let d = presets::gf22_design();
    let ts = default_temperature_grid();
    let r = calibrate_tc(&d, &Corner::identity(), &ts).unwrap();
    let nominal = d.cal.unwrap().nominal_code as usize;
    assert!(r.best_tc <= r.per_code[nominal].tc.unwrap());
    let skew = Corner::global(
        "n+0.05",
        FlavorDelta {
            n_shift: 0.05,
            ..Default::default()
        },
    );
    let s = calibrate_tc(&d, &skew, &ts).unwrap();
    let nom_tc = s.per_code[nominal].tc.unwrap();
    assert!(s.best_tc <= nom_tc);
    if nom_tc > 150.0 {
        assert!(s.best_tc < nom_tc);
    }
    let offs: Vec<f64> = s.per_code.iter().map(|c| c.voff.unwrap()).collect();
    assert!(offs.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn single_precision_matches_double() {
    let d64 = presets::gf22_design();
    let ts64 = default_temperature_grid::<f64>();
    let tc64 = tc_box(&simulate_iref(&d64, &Corner::identity(), &ts64).unwrap()).unwrap();

    let mut fl = std::collections::BTreeMap::new();
    for (k, f) in &d64.tech.flavors {
        let body = match f.body {
            scmref::devmodel::BodyModel::FdSoi { gamma_b_star } => {
                scmref::devmodel::BodyModel::FdSoi {
                    gamma_b_star: gamma_b_star as f32,
                }
            }
            scmref::devmodel::BodyModel::Bulk { .. } => unreachable!(),
        };
        fl.insert(
            k.clone(),
            scmref::devmodel::FlavorParams::<f32> {
                n: f.n as f32,
                m: f.m as f32,
                isq0_acm: f.isq0_acm as f32,
                isq0_sub: f.isq0_sub as f32,
                vt0: f.vt0 as f32,
                vt0_tslope: f.vt0_tslope as f32,
                body,
            },
        );
    }
    let tech = scmref::Technology32::new("f32", 298.15, fl).unwrap();
    let v = d64.vx_model.four_t().unwrap();
    let d32 = scmref::Design32 {
        vx_model: scmref::vref4t::VxModel::FourT(scmref::vref4t::Vref4tDesign {
            s6: v.s6 as f32,
            s7: v.s7 as f32,
            s8: v.s8 as f32,
            s9: v.s9 as f32,
            flavor67_9: v.flavor67_9.clone(),
            flavor8: v.flavor8.clone(),
            vbs7_override: None,
        }),
        scm: scmref::scm::ScmDesign {
            alpha: 1.825,
            n_mirror: 3.0,
            s2: 0.12,
            isq_ratio: 1.0,
            flavor: "slvt".into(),
        },
        cal: None,
        tech,
        vsg4: 0.0,
        vgs5: 0.0,
        vgs8: 0.0,
    };
    let ts32 = default_temperature_grid::<f32>();
    let tc32 =
        tc_box(&simulate_iref(&d32, &scmref::refsim::Corner::identity(), &ts32).unwrap()).unwrap();
    assert!(
        (f64::from(tc32) / tc64 - 1.0).abs() < 0.01,
        "{tc32} vs {tc64}"
    );
}
