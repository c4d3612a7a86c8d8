use std::fmt::Write as _;
use std::fs::File;
use std::path::{Path, PathBuf};

use scmref::devmodel::{acm_f, celsius_to_kelvin, delta_vt, isq_acm, isq_sub, kelvin_to_celsius};
use scmref::fom::{rank, read_records, soa_records, ReferenceRecord};
use scmref::refsim::{
    calibrate_tc, par_grid, simulate_points, supply_current, vdd_min, Corner,
    CurrentReferenceDesign,
};
use scmref::series::{ls_box, ptat_slope, tc_box, TempSeries};
use scmref::sizing::run_flow;
use scmref::vref4t::{voff, vx_series, VxModel};

use crate::config::{flag_grid, kelvin, RunConfig};
use crate::error::{CliError, CliResult};
use crate::output::{fmt_g, io_err, Sink, Table};

pub struct Ctx {
    pub cfg: RunConfig,
    pub sink: Sink,
}

impl Ctx {
    fn g(&self, x: f64) -> String {
        fmt_g(x, self.cfg.precision)
    }

    fn opt(&self, x: Option<f64>) -> String {
        x.map_or_else(String::new, |v| self.g(v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelOp {
    AcmF,
    Isq,
    DeltaVt,
}

pub struct ModelArgs {
    pub op: ModelOp,
    pub if_grid: Option<String>,
    pub t_grid: Option<String>,
    pub vbs_grid: Option<String>,
    pub flavor: Option<String>,
}

pub fn model(ctx: &Ctx, args: &ModelArgs) -> CliResult<()> {
    let tech = ctx.cfg.technology()?;
    let temps_c = |default: &str| flag_grid("T", args.t_grid.as_deref().unwrap_or(default));
    let mut table = match args.op {
        ModelOp::AcmF => {
            let ifs = flag_grid(
                "if",
                args.if_grid.as_deref().unwrap_or("0.01,0.1,1,3,10,100"),
            )?;
            let ts = temps_c("25")?;
            kelvin(&ts)?;
            let mut t = Table::new("model_acm_f", &["i_f", "T_degC", "F_V"]);
            for &i in &ifs {
                for &tc in &ts {
                    let f = acm_f(i, celsius_to_kelvin(tc))?;
                    t.push(vec![ctx.g(i), ctx.g(tc), ctx.g(f)]);
                }
            }
            t
        }
        ModelOp::Isq => {
            let ts = temps_c("-40:85:5")?;
            kelvin(&ts)?;
            let flavor = pick_flavor(&tech, args.flavor.as_deref())?;
            let fp = tech.flavor(&flavor)?;
            let mut t = Table::new("model_isq", &["T_degC", "flavor", "isq_acm_A", "isq_sub_A"]);
            for &tc in &ts {
                let k = celsius_to_kelvin(tc);
                t.push(vec![
                    ctx.g(tc),
                    flavor.clone(),
                    ctx.g(isq_acm(fp, k, tech.t0)?),
                    ctx.g(isq_sub(fp, k, tech.t0)?),
                ]);
            }
            t
        }
        ModelOp::DeltaVt => {
            let vbs = flag_grid("vbs", args.vbs_grid.as_deref().unwrap_or("0:0.4:0.05"))?;
            let ts = temps_c("25")?;
            kelvin(&ts)?;
            let flavor = pick_flavor(&tech, args.flavor.as_deref())?;
            let fp = tech.flavor(&flavor)?;
            let mut t = Table::new("model_delta_vt", &["V_BS_V", "T_degC", "flavor", "dVT_V"]);
            for &v in &vbs {
                for &tc in &ts {
                    let d = delta_vt(&fp.body, v, celsius_to_kelvin(tc), tech.t0)?;
                    t.push(vec![ctx.g(v), ctx.g(tc), flavor.clone(), ctx.g(d)]);
                }
            }
            t
        }
    };
    table.leading.push(format!("technology {}", tech.name));
    ctx.sink.emit(&table)
}

fn pick_flavor(tech: &scmref::Technology, flag: Option<&str>) -> CliResult<String> {
    match flag {
        Some(f) if tech.flavors.contains_key(f) => Ok(f.to_string()),
        Some(f) => Err(CliError::config(format!(
            "--flavor: '{f}' is not defined; available: {}",
            tech.flavors.keys().cloned().collect::<Vec<_>>().join(", ")
        ))),
        None => Ok(tech.flavors.keys().next().cloned().unwrap_or_default()),
    }
}

pub fn simulate(ctx: &Ctx) -> CliResult<()> {
    let design = ctx.cfg.design()?;
    let corner = ctx.cfg.corner(&design.tech)?;
    let ts = ctx.cfg.temperatures()?;
    let pts = simulate_points(&design, &corner, &ts)?;
    let series = TempSeries::new(pts.iter().map(|p| (p.t, p.i_ref)).collect())?;
    let tc = tc_box(&series)?;

    let mut t = Table::new("simulate", &["T_degC", "V_X_V", "i_f2", "I_REF_A"]);
    for p in &pts {
        t.push(vec![
            ctx.g(kelvin_to_celsius(p.t)),
            ctx.g(p.v_x),
            ctx.g(p.i_f2),
            ctx.g(p.i_ref),
        ]);
    }
    t.leading.push(format!("corner {}", corner.name));
    t.footer.push(format!("tc_ppmC = {}", ctx.g(tc)));
    let t0 = design.tech.t0;
    if let Ok(v) = vdd_min(&design, t0) {
        t.footer.push(format!(
            "vdd_min_V = {} ({})",
            ctx.g(v.value),
            v.branch.label()
        ));
    }
    if let Ok(i) = supply_current(&design, t0, ctx.cfg.i_vref()?) {
        t.footer.push(format!("supply_current_A = {}", ctx.g(i)));
    }
    ctx.sink.emit(&t)?;
    ctx.sink.note(&format!(
        "TC = {} ppm/degC over {} temperatures",
        ctx.g(tc),
        ts.len()
    ));
    Ok(())
}

const SWEEP_PARAMS: [&str; 5] = ["s9_over_s6", "s7_over_s6", "alpha", "k_ptat", "v_off"];
const SWEEP_METRICS: [&str; 4] = ["tc", "s_iref", "voff", "ptat_slope"];

fn with_param(
    design: &CurrentReferenceDesign<f64>,
    name: &str,
    v: f64,
) -> CurrentReferenceDesign<f64> {
    let mut d = design.clone();
    match (name, &mut d.vx_model) {
        ("alpha", _) => d.scm.alpha = v,
        ("s9_over_s6", VxModel::FourT(f)) => {
            let ratio = f.s9 / f.s8;
            f.s9 = v * f.s6;
            f.s8 = f.s9 / ratio;
        }
        ("s7_over_s6", VxModel::FourT(f)) => f.s7 = v * f.s6,
        ("k_ptat", VxModel::Generic { k_ptat, .. }) => *k_ptat = v,
        ("v_off", VxModel::Generic { v_off, .. }) => *v_off = v,
        _ => unreachable!("parameter checked against the model"),
    }
    d
}

fn metric(
    design: &CurrentReferenceDesign<f64>,
    corner: &Corner<f64>,
    ts: &[f64],
    name: &str,
) -> scmref::error::Result<f64> {
    let tech = corner.apply(&design.tech)?;
    match name {
        "tc" => tc_box(&scmref::refsim::simulate_iref(design, corner, ts)?),
        "s_iref" => {
            let v_x = design.vx_model.vx(&tech, tech.t0)?;
            Ok(design.scm.solve(v_x, tech.t0, &tech)?.s_iref)
        }
        "voff" => match &design.vx_model {
            VxModel::FourT(d) => voff(d, &tech, tech.t0),
            VxModel::Generic { v_off, .. } => Ok(*v_off),
        },
        _ => ptat_slope(&vx_series(&design.vx_model, &tech, ts)?),
    }
}

pub fn sweep(ctx: &Ctx) -> CliResult<()> {
    let ini = &ctx.cfg.ini;
    let design = ctx.cfg.design()?;
    let corner = ctx.cfg.corner(&design.tech)?;
    let ts = ctx.cfg.temperatures()?;
    let four_t = design.vx_model.four_t().is_some();

    let param = |key: &str| -> CliResult<Option<(String, Vec<f64>)>> {
        let Some(name) = ini.str("sweep", key) else {
            return Ok(None);
        };
        if !SWEEP_PARAMS.contains(&name) {
            return Err(CliError::config(format!(
                "[sweep] {key}: unknown parameter '{name}'; expected one of {}",
                SWEEP_PARAMS.join(", ")
            )));
        }
        let needs_four_t = name.starts_with('s');
        if name != "alpha" && needs_four_t != four_t {
            return Err(CliError::config(format!(
                "[sweep] {key}: '{name}' does not apply to the {} V_X model",
                if four_t { "four_t" } else { "generic" }
            )));
        }
        let grid = ctx
            .cfg
            .sweep_grid(name)?
            .ok_or_else(|| CliError::config(format!("[sweep] needs a '{name}' grid for {key}")))?;
        if grid.is_empty() {
            return Err(CliError::config(format!("[sweep] grid '{name}' is empty")));
        }
        Ok(Some((name.to_string(), grid)))
    };
    let (p1, g1) = param("param1")?
        .ok_or_else(|| CliError::config("[sweep] is missing required key 'param1'"))?;
    let second = param("param2")?;
    if second.as_ref().is_some_and(|(n, _)| *n == p1) {
        return Err(CliError::config("[sweep] param1 and param2 must differ"));
    }
    let metrics: Vec<String> = ini
        .str("sweep", "metrics")
        .unwrap_or("tc,s_iref")
        .split(',')
        .map(|m| m.trim().to_string())
        .collect();
    for m in &metrics {
        if !SWEEP_METRICS.contains(&m.as_str()) {
            return Err(CliError::config(format!(
                "[sweep] metrics: unknown metric '{m}'; expected any of {}",
                SWEEP_METRICS.join(", ")
            )));
        }
    }

    let (p2, g2) = second
        .clone()
        .unwrap_or_else(|| (String::new(), vec![f64::NAN]));
    let grid = par_grid(&g1, &g2, |a, b| {
        let mut d = with_param(&design, &p1, a);
        if !p2.is_empty() {
            d = with_param(&d, &p2, b);
        }
        metrics
            .iter()
            .map(|m| metric(&d, &corner, &ts, m))
            .collect::<scmref::error::Result<Vec<f64>>>()
    });

    let mut t = Table::new("sweep", &["param1", "param2", "metric", "value"]);
    t.leading.push(format!("param1 = {p1}"));
    if second.is_some() {
        t.leading.push(format!("param2 = {p2}"));
    }
    t.leading
        .push("units: tc ppm/degC, s_iref 1/V, voff V, ptat_slope V/K".into());
    let mut evaluated = 0usize;
    for (a, row) in g1.iter().zip(&grid) {
        for (b, cell) in g2.iter().zip(row) {
            let Some(values) = cell else { continue };
            evaluated += 1;
            let b = if second.is_some() {
                ctx.g(*b)
            } else {
                String::new()
            };
            for (m, v) in metrics.iter().zip(values) {
                t.push(vec![ctx.g(*a), b.clone(), m.clone(), ctx.g(*v)]);
            }
        }
    }
    let total = g1.len() * g2.len();
    t.footer.push(format!(
        "cells = {evaluated} of {total} ({} skipped)",
        total - evaluated
    ));
    ctx.sink.emit(&t)?;
    ctx.sink
        .note(&format!("{evaluated} of {total} cells evaluated"));
    Ok(())
}

pub fn size(ctx: &Ctx) -> CliResult<()> {
    let inputs = ctx.cfg.sizing()?;
    let flow = run_flow(&inputs, ctx.cfg.alpha_sim()?)?;
    let g = |x: f64| ctx.g(x);
    let fin = &flow.final_report;

    let mut text = String::new();
    let v = &flow.vref;
    let _ = writeln!(text, "step (a) voltage reference");
    let _ = writeln!(
        text,
        "  S6 = {}  S7 = {}  S8 = {}  S9 = {}",
        g(v.s6),
        g(v.s7),
        g(v.s8),
        g(v.s9)
    );
    match v.vbs7_override {
        Some(vb) => {
            let _ = writeln!(text, "  V_BS7 fixed at {} V", g(vb));
        }
        None => {
            let _ = writeln!(text, "  S9/S8 = {} (CWT V_BS7)", g(v.s9 / v.s8));
        }
    }
    let _ = writeln!(text, "  V_X(T0) = {} V", g(flow.vx_t0));
    let _ = writeln!(text, "step (b) alpha guess");
    let _ = writeln!(
        text,
        "  alpha_guess = {}  TC = {} ppm/degC",
        g(flow.guess.alpha),
        g(flow.guess.tc)
    );
    for (label, r) in [
        ("step (c) aspect ratios", &flow.step3),
        ("step (d) final", fin),
    ] {
        let _ = writeln!(text, "{label}");
        let _ = writeln!(
            text,
            "  alpha = {}  TC = {} ppm/degC  S_IREF = {} 1/V",
            g(r.alpha_opt),
            ctx.opt(r.tc_analytic),
            g(r.s_iref)
        );
        let _ = writeln!(text, "  i_f1 = {}  i_f2 = {}", g(r.if1), g(r.if2));
        let _ = writeln!(
            text,
            "  S1 = {}  S2 = {}  S3 = {}  S4 = {}  S5 = {}",
            g(r.s1),
            g(r.s2),
            g(r.s3),
            g(r.s4),
            g(r.s5)
        );
    }
    let identity_ok = fin.s1_s2_residual < 1e-9;
    let _ = writeln!(
        text,
        "S1/S2 current-balance identity: {} (relative residual {})",
        if identity_ok { "PASS" } else { "FAIL" },
        g(fin.s1_s2_residual)
    );
    for c in &fin.constraint_checks {
        let _ = writeln!(
            text,
            "constraint {}: {} (value {} V, margin {} V)",
            c.name,
            if c.pass { "PASS" } else { "FAIL" },
            g(c.value),
            g(c.margin)
        );
    }

    let mut t = Table::new("size", &["quantity", "value"]);
    let mut put = |k: &str, v: String| t.push(vec![k.to_string(), v]);
    put("s9_over_s8", g(v.s9 / v.s8));
    put("vx_t0_V", g(flow.vx_t0));
    put("alpha_guess", g(flow.guess.alpha));
    put("tc_guess_ppmC", g(flow.guess.tc));
    put("alpha_final", g(fin.alpha_opt));
    put("tc_final_ppmC", ctx.opt(fin.tc_analytic));
    put("s_iref_per_V", g(fin.s_iref));
    put("if1", g(fin.if1));
    put("if2", g(fin.if2));
    for (k, x) in [
        ("S1", fin.s1),
        ("S2", fin.s2),
        ("S3", fin.s3),
        ("S4", fin.s4),
        ("S5", fin.s5),
    ] {
        put(k, g(x));
    }
    put("s1_s2_residual", g(fin.s1_s2_residual));

    let map = &flow.guess.map;
    let mut m = Table::new("size_tc_map", &["s9_over_s6", "alpha", "tc_ppmC"]);
    for (s9, row) in map.s9_rows.iter().zip(&map.tc) {
        for (a, tc) in map.alphas.iter().zip(row) {
            m.push(vec![g(*s9), g(*a), ctx.opt(*tc)]);
        }
    }

    ctx.sink.emit_text("size_report.txt", &text)?;
    ctx.sink.emit(&t)?;
    ctx.sink.emit(&m)?;
    let failed: Vec<&str> = fin
        .constraint_checks
        .iter()
        .filter(|c| !c.pass)
        .map(|c| c.name.as_str())
        .chain((!identity_ok).then_some("S1/S2 current-balance identity"))
        .collect();
    if !failed.is_empty() {
        return Err(CliError::Constraint(failed.join("; ")));
    }
    Ok(())
}

pub fn calibrate(ctx: &Ctx) -> CliResult<()> {
    let design = ctx.cfg.design()?;
    if design.cal.is_none() {
        return Err(CliError::config("calibrate needs cal.* keys in [design]"));
    }
    let corner = ctx.cfg.corner(&design.tech)?;
    let ts = ctx.cfg.temperatures()?;
    let r = calibrate_tc(&design, &corner, &ts)?;
    let mut t = Table::new(
        "calibrate",
        &["code", "tc_ppmC", "voff_mV", "slope_mV_per_C"],
    );
    t.leading.push(format!("corner {}", corner.name));
    for c in &r.per_code {
        t.push(vec![
            c.code.to_string(),
            ctx.opt(c.tc),
            ctx.opt(c.voff.map(|v| v * 1e3)),
            ctx.opt(c.slope.map(|v| v * 1e3)),
        ]);
        if let Some(note) = &c.note {
            t.footer.push(format!("code {}: {note}", c.code));
        }
    }
    t.footer.push(format!(
        "selected code = {} (tc_ppmC = {})",
        r.best_code,
        ctx.g(r.best_tc)
    ));
    ctx.sink.emit(&t)?;
    ctx.sink.note(&format!(
        "selected code {} with TC {} ppm/degC",
        r.best_code,
        ctx.g(r.best_tc)
    ));
    Ok(())
}

fn read_columns(path: &Path) -> CliResult<(Vec<String>, Vec<csv::StringRecord>)> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file);
    let schema = |e: csv::Error| CliError::config(format!("{}: {e}", path.display()));
    let headers = rdr
        .headers()
        .map_err(schema)?
        .iter()
        .map(str::to_string)
        .collect();
    let rows = rdr
        .records()
        .collect::<Result<Vec<_>, _>>()
        .map_err(schema)?;
    Ok((headers, rows))
}

fn pairs(
    path: &Path,
    headers: &[String],
    rows: &[csv::StringRecord],
    x: &str,
    y: &str,
) -> CliResult<Vec<(f64, f64)>> {
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .expect("column checked")
    };
    let (xi, yi) = (col(x), col(y));
    let mut out = Vec::new();
    for (n, r) in rows.iter().enumerate() {
        let (a, b) = (r.get(xi).unwrap_or(""), r.get(yi).unwrap_or(""));
        if a.is_empty() || b.is_empty() {
            continue;
        }
        let num = |s: &str, c: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| {
                    CliError::config(format!(
                        "{}: data row {}: column '{c}' is not a number: '{s}'",
                        path.display(),
                        n + 1
                    ))
                })
        };
        out.push((num(a, x)?, num(b, y)?));
    }
    out.sort_by(|p, q| p.0.total_cmp(&q.0));
    Ok(out)
}

pub fn metrics(ctx: &Ctx, files: &[PathBuf]) -> CliResult<()> {
    let mut t = Table::new("metrics", &["file", "metric", "value", "unit"]);
    for path in files {
        let (headers, rows) = read_columns(path)?;
        let has = |c: &str| headers.iter().any(|h| h == c);
        if !has("I_REF_A") || !(has("T_degC") || has("VDD_V")) {
            return Err(CliError::config(format!(
                "{}: needs columns T_degC,I_REF_A and/or VDD_V,I_REF_A; found {}",
                path.display(),
                headers.join(",")
            )));
        }
        let name = path.display().to_string();
        if has("T_degC") {
            let p = pairs(path, &headers, &rows, "T_degC", "I_REF_A")?;
            let s = TempSeries::new(
                p.into_iter()
                    .map(|(c, i)| (celsius_to_kelvin(c), i))
                    .collect(),
            )
            .map_err(|e| CliError::config(format!("{name}: {e}")))?;
            t.push(vec![
                name.clone(),
                "tc".into(),
                ctx.g(tc_box(&s)?),
                "ppm/degC".into(),
            ]);
        }
        if has("VDD_V") {
            let p = pairs(path, &headers, &rows, "VDD_V", "I_REF_A")?;
            t.push(vec![
                name.clone(),
                "ls".into(),
                ctx.g(ls_box(&p)?),
                "%/V".into(),
            ]);
        }
    }
    ctx.sink.emit(&t)
}

pub fn fom(ctx: &Ctx, files: &[PathBuf]) -> CliResult<()> {
    let mut records: Vec<ReferenceRecord<f64>> = Vec::new();
    if files.is_empty() {
        records = soa_records();
    }
    for path in files {
        let file = File::open(path).map_err(|e| io_err(path, e))?;
        let recs =
            read_records(file).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        records.extend(recs);
    }
    let ranking = rank(&records);
    let mut t = Table::new("fom", &["rank", "label", "fom", "fom2"]);
    for (i, r) in ranking.ranked.iter().enumerate() {
        t.push(vec![
            (i + 1).to_string(),
            r.record.label.clone(),
            ctx.g(r.fom),
            ctx.opt(r.fom2),
        ]);
    }
    for (label, reason) in &ranking.excluded {
        ctx.sink
            .note(&format!("warning: excluded '{label}': {reason}"));
        t.footer.push(format!("excluded {label}: {reason}"));
    }
    ctx.sink.emit(&t)
}
