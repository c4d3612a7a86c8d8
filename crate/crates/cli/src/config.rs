//! INI run configuration.
//!
//! Four sections, `key = value` lines, `#` comments (full-line or after a
//! value), case-sensitive keys. Temperatures are given in degC.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use scmref::devmodel::{celsius_to_kelvin, BodyModel, FlavorParams, TechnologyParams, T0_DEFAULT};
use scmref::presets;
use scmref::refsim::{default_temperature_grid, Corner, CurrentReferenceDesign, FlavorDelta};
use scmref::scm::ScmDesign;
use scmref::sizing::SizingInputs;
use scmref::vref4t::{CalibrationConfig, TrimTarget, Vref4tDesign, VxModel};

use crate::error::{CliError, CliResult};

pub const SECTIONS: [&str; 4] = ["technology", "design", "sweep", "output"];

const FLAVOR_FIELDS: &[&str] = &[
    "n",
    "m",
    "isq0_acm",
    "isq0_sub",
    "vt0",
    "vt0_tslope",
    "body",
    "gamma_b_star",
    "gamma_b",
    "phi_fp",
    "phi_fp_tslope",
];
const TECH_KEYS: &[&str] = &["preset", "name", "t0_C"];
const DESIGN_KEYS: &[&str] = &[
    "preset",
    "vx_model",
    "v_off",
    "k_ptat",
    "n",
    "s6",
    "s7",
    "s8",
    "s9",
    "flavor67_9",
    "flavor8",
    "vbs7",
    "alpha",
    "n_mirror",
    "s2",
    "isq_ratio",
    "scm_flavor",
    "vsg4",
    "vgs5",
    "vgs8",
    "i_vref",
    "cal.target",
    "cal.unit_aspect",
    "cal.bits",
    "cal.base_units",
    "cal.nominal_code",
    "corner.name",
    "i_ref_target",
    "s7_over_s6",
    "s9_over_s6",
    "mirror_flavor",
    "buffer_flavor",
    "if_mirror",
    "if_buffer",
    "alpha_sim",
    "cal",
];
const CORNER_FIELDS: &[&str] = &["n_shift", "vt0_shift", "isq_scale"];
const SWEEP_KEYS: &[&str] = &[
    "T",
    "alpha",
    "s9_over_s6",
    "s7_over_s6",
    "k_ptat",
    "v_off",
    "param1",
    "param2",
    "metrics",
];
const OUTPUT_KEYS: &[&str] = &["precision", "dir"];

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

/// Parsed INI file: section -> key -> value, with source line numbers.
#[derive(Debug, Clone, Default)]
pub struct Ini {
    source: String,
    sections: BTreeMap<String, BTreeMap<String, Entry>>,
}

impl Ini {
    pub fn parse(text: &str, source: &str) -> CliResult<Ini> {
        let mut ini = Ini {
            source: source.to_string(),
            ..Default::default()
        };
        let mut current: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| CliError::config(format!("{source}:{line_no}: {msg}"));
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| err(format!("unterminated section header '{line}'")))?
                    .trim();
                if !SECTIONS.contains(&name) {
                    return Err(err(format!(
                        "unknown section [{name}]; expected one of {}",
                        SECTIONS.join(", ")
                    )));
                }
                if ini.sections.contains_key(name) {
                    return Err(err(format!("section [{name}] appears twice")));
                }
                ini.sections.insert(name.to_string(), BTreeMap::new());
                current = Some(name.to_string());
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected 'key = value', got '{line}'")))?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(err("empty key".into()));
            }
            let section = current
                .as_ref()
                .ok_or_else(|| err(format!("key '{key}' appears before any section header")))?;
            if !key_allowed(section, key) {
                return Err(err(format!("unknown key '{key}' in [{section}]")));
            }
            let map = ini.sections.get_mut(section).expect("section inserted");
            if let Some(prev) = map.get(key) {
                return Err(err(format!(
                    "duplicate key '{key}' (first set on line {})",
                    prev.line
                )));
            }
            map.insert(
                key.to_string(),
                Entry {
                    value: value.to_string(),
                    line: line_no,
                },
            );
        }
        Ok(ini)
    }

    pub fn load(path: &Path) -> CliResult<Ini> {
        let text = fs::read_to_string(path).map_err(|e| crate::output::io_err(path, e))?;
        Ini::parse(&text, &path.display().to_string())
    }

    pub fn has_section(&self, section: &str) -> bool {
        self.sections.contains_key(section)
    }

    fn entry(&self, section: &str, key: &str) -> Option<&Entry> {
        self.sections.get(section).and_then(|m| m.get(key))
    }

    fn keys(&self, section: &str) -> impl Iterator<Item = (&String, &Entry)> {
        self.sections.get(section).into_iter().flatten()
    }

    fn bad(&self, section: &str, key: &str, msg: impl std::fmt::Display) -> CliError {
        let line = self.entry(section, key).map_or(0, |e| e.line);
        CliError::config(format!("{}:{line}: [{section}] {key}: {msg}", self.source))
    }

    fn missing(&self, section: &str, key: &str) -> CliError {
        CliError::config(format!(
            "{}: [{section}] is missing required key '{key}'",
            self.source
        ))
    }

    pub fn str(&self, section: &str, key: &str) -> Option<&str> {
        self.entry(section, key).map(|e| e.value.as_str())
    }

    pub fn f64(&self, section: &str, key: &str) -> CliResult<Option<f64>> {
        match self.str(section, key) {
            None => Ok(None),
            Some(v) => match v.parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(Some(x)),
                _ => Err(self.bad(section, key, format!("expected a finite number, got '{v}'"))),
            },
        }
    }

    pub fn u32(&self, section: &str, key: &str) -> CliResult<Option<u32>> {
        match self.str(section, key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| {
                self.bad(
                    section,
                    key,
                    format!("expected a non-negative integer, got '{v}'"),
                )
            }),
        }
    }

    fn req_f64(&self, section: &str, key: &str) -> CliResult<f64> {
        self.f64(section, key)?
            .ok_or_else(|| self.missing(section, key))
    }

    pub fn grid(&self, section: &str, key: &str) -> CliResult<Option<Grid>> {
        match self.str(section, key) {
            None => Ok(None),
            Some(v) => Grid::parse(v)
                .map(Some)
                .map_err(|m| self.bad(section, key, m)),
        }
    }
}

fn key_allowed(section: &str, key: &str) -> bool {
    match section {
        "technology" => {
            TECH_KEYS.contains(&key)
                || key
                    .split_once('.')
                    .is_some_and(|(f, field)| !f.is_empty() && FLAVOR_FIELDS.contains(&field))
        }
        "design" => {
            DESIGN_KEYS.contains(&key)
                || key
                    .strip_prefix("corner.")
                    .and_then(|r| r.split_once('.'))
                    .is_some_and(|(f, field)| !f.is_empty() && CORNER_FIELDS.contains(&field))
        }
        "sweep" => SWEEP_KEYS.contains(&key),
        "output" => OUTPUT_KEYS.contains(&key),
        _ => false,
    }
}

/// A grid given as `lo:hi:step`, a comma list, or a single value.
#[derive(Debug, Clone, PartialEq)]
pub enum Grid {
    Range { lo: f64, hi: f64, step: f64 },
    List(Vec<f64>),
}

impl Grid {
    pub fn parse(s: &str) -> Result<Grid, String> {
        let num = |t: &str| -> Result<f64, String> {
            t.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| format!("'{}' is not a finite number", t.trim()))
        };
        let s = s.trim();
        if s.is_empty() {
            return Err("empty grid".into());
        }
        if s.contains(':') {
            let parts: Vec<&str> = s.split(':').collect();
            let [lo, hi, step] = parts[..] else {
                return Err(format!("range '{s}' must be lo:hi:step"));
            };
            let (lo, hi, step) = (num(lo)?, num(hi)?, num(step)?);
            if step <= 0.0 || hi < lo {
                return Err(format!("range '{s}' needs hi >= lo and step > 0"));
            }
            Ok(Grid::Range { lo, hi, step })
        } else {
            let v = s.split(',').map(num).collect::<Result<Vec<_>, _>>()?;
            Ok(Grid::List(v))
        }
    }

    pub fn values(&self) -> Vec<f64> {
        match *self {
            Grid::Range { lo, hi, step } => {
                let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
                (0..count).map(|i| lo + step * i as f64).collect()
            }
            Grid::List(ref v) => v.clone(),
        }
    }
}

/// Parses a grid given on the command line.
pub fn flag_grid(flag: &str, s: &str) -> CliResult<Vec<f64>> {
    Grid::parse(s)
        .map(|g| g.values())
        .map_err(|m| CliError::config(format!("--{flag}: {m}")))
}

/// Converts a degC grid to K, rejecting empty grids.
pub fn kelvin(grid: &[f64]) -> CliResult<Vec<f64>> {
    if grid.is_empty() {
        return Err(CliError::config("temperature grid is empty"));
    }
    Ok(grid.iter().map(|&c| celsius_to_kelvin(c)).collect())
}

/// The typed view of a config file.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub ini: Ini,
    pub precision: usize,
    pub out_dir: Option<String>,
}

impl RunConfig {
    pub fn new(ini: Ini) -> CliResult<RunConfig> {
        let precision = match ini.u32("output", "precision")? {
            None => 9,
            Some(p) if (1..=17).contains(&p) => p as usize,
            Some(_) => return Err(ini.bad("output", "precision", "must be in 1..=17")),
        };
        let out_dir = ini.str("output", "dir").map(str::to_string);
        Ok(RunConfig {
            ini,
            precision,
            out_dir,
        })
    }

    pub fn empty() -> RunConfig {
        RunConfig::new(Ini::default()).expect("empty config is valid")
    }

    /// Technology from `[technology]`: an optional preset, then per-flavor
    /// overrides as `<flavor>.<field>`.
    pub fn technology(&self) -> CliResult<TechnologyParams<f64>> {
        let ini = &self.ini;
        let sec = "technology";
        let mut tech = match ini.str(sec, "preset") {
            Some("generic") => presets::generic_tech(),
            Some("gf22") => presets::gf22_style_tech(),
            Some("bulk110") => presets::bulk110_style_tech(),
            Some(other) => {
                return Err(ini.bad(
                    sec,
                    "preset",
                    format!("unknown preset '{other}' (generic, gf22, bulk110)"),
                ))
            }
            None if !ini.has_section(sec) => presets::generic_tech(),
            None => TechnologyParams {
                name: "custom".into(),
                t0: T0_DEFAULT,
                flavors: BTreeMap::new(),
            },
        };
        if let Some(name) = ini.str(sec, "name") {
            tech.name = name.to_string();
        }
        if let Some(t0) = ini.f64(sec, "t0_C")? {
            tech.t0 = celsius_to_kelvin(t0);
        }
        let mut grouped: BTreeMap<&str, BTreeMap<&str, &String>> = BTreeMap::new();
        for (key, _) in ini.keys(sec) {
            if let Some((flavor, field)) = key.split_once('.') {
                grouped.entry(flavor).or_default().insert(field, key);
            }
        }
        for (flavor, fields) in grouped {
            let get = |field: &str| -> CliResult<Option<f64>> {
                fields.get(field).map_or(Ok(None), |k| ini.f64(sec, k))
            };
            let existing = tech.flavors.get(flavor).copied();
            let need = |field: &str| -> CliResult<f64> {
                get(field)?.ok_or_else(|| ini.missing(sec, &format!("{flavor}.{field}")))
            };
            let mut f = match existing {
                Some(f) => f,
                None => {
                    let isq = need("isq0_acm")?;
                    FlavorParams {
                        n: need("n")?,
                        m: need("m")?,
                        isq0_acm: isq,
                        isq0_sub: isq,
                        vt0: need("vt0")?,
                        vt0_tslope: 0.0,
                        body: BodyModel::FdSoi { gamma_b_star: 0.15 },
                    }
                }
            };
            macro_rules! set {
                ($field:ident) => {
                    if let Some(v) = get(stringify!($field))? {
                        f.$field = v;
                    }
                };
            }
            set!(n);
            set!(m);
            set!(isq0_acm);
            set!(isq0_sub);
            set!(vt0);
            set!(vt0_tslope);
            let body_key = format!("{flavor}.body");
            let kind = match ini.str(sec, &body_key) {
                Some("fdsoi") => "fdsoi",
                Some("bulk") => "bulk",
                Some(other) => {
                    return Err(ini.bad(
                        sec,
                        &body_key,
                        format!("expected 'fdsoi' or 'bulk', got '{other}'"),
                    ))
                }
                None => match (existing, f.body) {
                    (None, _) if get("gamma_b")?.is_some() => "bulk",
                    (_, BodyModel::Bulk { .. }) => "bulk",
                    _ => "fdsoi",
                },
            };
            f.body = match (kind, f.body) {
                ("fdsoi", BodyModel::FdSoi { gamma_b_star }) => BodyModel::FdSoi {
                    gamma_b_star: get("gamma_b_star")?.unwrap_or(gamma_b_star),
                },
                ("fdsoi", _) => BodyModel::FdSoi {
                    gamma_b_star: need("gamma_b_star")?,
                },
                (
                    _,
                    BodyModel::Bulk {
                        gamma_b,
                        phi_fp,
                        phi_fp_tslope,
                    },
                ) => BodyModel::Bulk {
                    gamma_b: get("gamma_b")?.unwrap_or(gamma_b),
                    phi_fp: get("phi_fp")?.unwrap_or(phi_fp),
                    phi_fp_tslope: get("phi_fp_tslope")?.unwrap_or(phi_fp_tslope),
                },
                _ => BodyModel::Bulk {
                    gamma_b: need("gamma_b")?,
                    phi_fp: need("phi_fp")?,
                    phi_fp_tslope: get("phi_fp_tslope")?.unwrap_or(0.0),
                },
            };
            tech.flavors.insert(flavor.to_string(), f);
        }
        tech.validate()
            .map_err(|e| CliError::config(format!("{}: [technology] {e}", ini.source)))?;
        Ok(tech)
    }

    fn flavor_key(
        &self,
        tech: &TechnologyParams<f64>,
        key: &str,
        default: Option<&str>,
    ) -> CliResult<String> {
        let name = match self.ini.str("design", key) {
            Some(v) => v.to_string(),
            None => match default {
                Some(d) => d.to_string(),
                None => return Err(self.ini.missing("design", key)),
            },
        };
        if !tech.flavors.contains_key(&name) {
            return Err(self.ini.bad(
                "design",
                key,
                format!("flavor '{name}' is not defined in [technology]"),
            ));
        }
        Ok(name)
    }

    fn first_flavor(tech: &TechnologyParams<f64>) -> String {
        tech.flavors.keys().next().cloned().unwrap_or_default()
    }

    fn calibration(
        &self,
        base: Option<CalibrationConfig<f64>>,
    ) -> CliResult<Option<CalibrationConfig<f64>>> {
        let ini = &self.ini;
        let sec = "design";
        let any = [
            "cal.target",
            "cal.unit_aspect",
            "cal.bits",
            "cal.base_units",
            "cal.nominal_code",
        ]
        .iter()
        .any(|k| ini.str(sec, k).is_some());
        if ini.str(sec, "cal") == Some("none") {
            return Ok(None);
        }
        if !any {
            return Ok(base);
        }
        let target = match ini.str(sec, "cal.target") {
            Some("m7") => Some(TrimTarget::M7Offset),
            Some("m9") => Some(TrimTarget::M9Slope),
            Some(o) => {
                return Err(ini.bad(
                    sec,
                    "cal.target",
                    format!("expected 'm7' or 'm9', got '{o}'"),
                ))
            }
            None => base.map(|b| b.target),
        }
        .ok_or_else(|| ini.missing(sec, "cal.target"))?;
        let cal = CalibrationConfig {
            target,
            unit_aspect: match ini.f64(sec, "cal.unit_aspect")? {
                Some(v) => v,
                None => base
                    .map(|b| b.unit_aspect)
                    .ok_or_else(|| ini.missing(sec, "cal.unit_aspect"))?,
            },
            bits: ini
                .u32(sec, "cal.bits")?
                .or(base.map(|b| b.bits))
                .unwrap_or(5),
            base_units: ini
                .u32(sec, "cal.base_units")?
                .or(base.map(|b| b.base_units))
                .unwrap_or(0),
            nominal_code: ini
                .u32(sec, "cal.nominal_code")?
                .or(base.map(|b| b.nominal_code))
                .unwrap_or(0),
        };
        cal.validate()
            .map_err(|e| CliError::config(format!("{}: [design] {e}", ini.source)))?;
        Ok(Some(cal))
    }

    fn design_preset(&self) -> CliResult<Option<&str>> {
        match self.ini.str("design", "preset") {
            None => Ok(None),
            Some(p @ ("gf22" | "generic")) => Ok(Some(p)),
            Some(o) => Err(self.ini.bad(
                "design",
                "preset",
                format!("unknown preset '{o}' (gf22, generic)"),
            )),
        }
    }

    /// Current-reference design from `[design]`.
    pub fn design(&self) -> CliResult<CurrentReferenceDesign<f64>> {
        let ini = &self.ini;
        let sec = "design";
        if !ini.has_section(sec) {
            return Err(CliError::config(format!(
                "{}: missing [design] section",
                ini.source
            )));
        }
        let tech = self.technology()?;
        let base = match self.design_preset()? {
            Some("gf22") => Some(presets::gf22_design()),
            _ => None,
        };
        let model_kind = match ini.str(sec, "vx_model") {
            Some(k @ ("generic" | "four_t")) => k,
            Some(o) => {
                return Err(ini.bad(
                    sec,
                    "vx_model",
                    format!("expected 'generic' or 'four_t', got '{o}'"),
                ))
            }
            None => match &base {
                Some(_) => "four_t",
                None => return Err(ini.missing(sec, "vx_model")),
            },
        };
        let or_base = |key: &str, b: Option<f64>| -> CliResult<f64> {
            match ini.f64(sec, key)? {
                Some(v) => Ok(v),
                None => b.ok_or_else(|| ini.missing(sec, key)),
            }
        };
        let first = Self::first_flavor(&tech);
        let vx_model = if model_kind == "generic" {
            VxModel::Generic {
                v_off: ini.req_f64(sec, "v_off")?,
                k_ptat: ini.req_f64(sec, "k_ptat")?,
                n: match ini.f64(sec, "n")? {
                    Some(n) => n,
                    None => {
                        tech.flavor(&self.flavor_key(&tech, "scm_flavor", Some(&first))?)?
                            .n
                    }
                },
            }
        } else {
            let b = base.as_ref().and_then(|d| d.vx_model.four_t().cloned());
            let bf = |f: fn(&Vref4tDesign<f64>) -> f64| b.as_ref().map(f);
            VxModel::FourT(Vref4tDesign {
                s6: ini.f64(sec, "s6")?.or(bf(|d| d.s6)).unwrap_or(1.0),
                s7: or_base("s7", bf(|d| d.s7))?,
                s8: ini.f64(sec, "s8")?.or(bf(|d| d.s8)).unwrap_or(1.0),
                s9: or_base("s9", bf(|d| d.s9))?,
                flavor67_9: self.flavor_key(
                    &tech,
                    "flavor67_9",
                    Some(b.as_ref().map_or(first.as_str(), |d| d.flavor67_9.as_str())),
                )?,
                flavor8: self.flavor_key(
                    &tech,
                    "flavor8",
                    Some(b.as_ref().map_or(first.as_str(), |d| d.flavor8.as_str())),
                )?,
                vbs7_override: ini
                    .f64(sec, "vbs7")?
                    .or(b.as_ref().and_then(|d| d.vbs7_override)),
            })
        };
        let bs = base.as_ref().map(|d| &d.scm);
        let scm = ScmDesign {
            alpha: or_base("alpha", bs.map(|s| s.alpha))?,
            n_mirror: ini
                .f64(sec, "n_mirror")?
                .or(bs.map(|s| s.n_mirror))
                .unwrap_or(3.0),
            s2: ini.f64(sec, "s2")?.or(bs.map(|s| s.s2)).unwrap_or(1.0),
            isq_ratio: ini
                .f64(sec, "isq_ratio")?
                .or(bs.map(|s| s.isq_ratio))
                .unwrap_or(1.0),
            flavor: self.flavor_key(
                &tech,
                "scm_flavor",
                Some(bs.map_or(first.as_str(), |s| s.flavor.as_str())),
            )?,
        };
        let cal = self.calibration(base.as_ref().and_then(|d| d.cal))?;
        let design = CurrentReferenceDesign {
            vx_model,
            scm,
            cal,
            tech,
            vsg4: ini
                .f64(sec, "vsg4")?
                .or(base.as_ref().map(|d| d.vsg4))
                .unwrap_or(0.0),
            vgs5: ini
                .f64(sec, "vgs5")?
                .or(base.as_ref().map(|d| d.vgs5))
                .unwrap_or(0.0),
            vgs8: ini
                .f64(sec, "vgs8")?
                .or(base.as_ref().map(|d| d.vgs8))
                .unwrap_or(0.0),
        };
        design
            .validate()
            .map_err(|e| CliError::config(format!("{}: [design] {e}", ini.source)))?;
        Ok(design)
    }

    /// Corner from `corner.all.<field>` and `corner.<flavor>.<field>` keys.
    pub fn corner(&self, tech: &TechnologyParams<f64>) -> CliResult<Corner<f64>> {
        let ini = &self.ini;
        let sec = "design";
        let mut corner = Corner::identity();
        if let Some(name) = ini.str(sec, "corner.name") {
            corner.name = name.to_string();
        }
        for (key, _) in ini.keys(sec) {
            let Some((target, field)) = key.strip_prefix("corner.").and_then(|r| r.split_once('.'))
            else {
                continue;
            };
            if target != "all" && !tech.flavors.contains_key(target) {
                return Err(ini.bad(
                    sec,
                    key,
                    format!("flavor '{target}' is not defined in [technology]"),
                ));
            }
            let v = ini.req_f64(sec, key)?;
            let delta = if target == "all" {
                &mut corner.global
            } else {
                corner
                    .per_flavor
                    .entry(target.to_string())
                    .or_insert_with(FlavorDelta::default)
            };
            match field {
                "n_shift" => delta.n_shift = v,
                "vt0_shift" => delta.vt0_shift = v,
                _ => delta.isq_scale = v,
            }
        }
        if ini.str(sec, "corner.name").is_none() && corner != Corner::identity() {
            corner.name = "custom".into();
        }
        Ok(corner)
    }

    /// Temperatures (K) from `[sweep] T`, defaulting to -40..85 degC in 5 degC steps.
    pub fn temperatures(&self) -> CliResult<Vec<f64>> {
        match self.ini.grid("sweep", "T")? {
            None => Ok(default_temperature_grid()),
            Some(g) => kelvin(&g.values())
                .map_err(|_| self.ini.bad("sweep", "T", "temperature grid is empty")),
        }
    }

    pub fn sweep_grid(&self, key: &str) -> CliResult<Option<Vec<f64>>> {
        Ok(self.ini.grid("sweep", key)?.map(|g| g.values()))
    }

    pub fn i_vref(&self) -> CliResult<Option<f64>> {
        self.ini.f64("design", "i_vref")
    }

    pub fn alpha_sim(&self) -> CliResult<Option<f64>> {
        self.ini.f64("design", "alpha_sim")
    }

    /// Sizing inputs from `[design]` plus the `[sweep]` alpha, S9/S6 and T grids.
    pub fn sizing(&self) -> CliResult<SizingInputs<f64>> {
        let ini = &self.ini;
        let sec = "design";
        if !ini.has_section(sec) {
            return Err(CliError::config(format!(
                "{}: missing [design] section",
                ini.source
            )));
        }
        let tech = self.technology()?;
        let base = match self.design_preset()? {
            Some("gf22") => Some(presets::gf22_sizing_inputs()),
            Some(_) => Some(presets::generic_sizing_inputs()),
            None => None,
        };
        let first = Self::first_flavor(&tech);
        let num = |key: &str, b: Option<f64>, default: Option<f64>| -> CliResult<f64> {
            match ini.f64(sec, key)? {
                Some(v) => Ok(v),
                None => b.or(default).ok_or_else(|| ini.missing(sec, key)),
            }
        };
        let flavor = |key: &str, b: Option<&str>, fallback: &str| {
            self.flavor_key(&tech, key, Some(b.unwrap_or(fallback)))
        };
        let b = base.as_ref();
        let scm_flavor = flavor("scm_flavor", b.map(|x| x.scm_flavor.as_str()), &first)?;
        let (alpha_lo, alpha_hi, alpha_step) = match ini.grid("sweep", "alpha")? {
            Some(Grid::Range { lo, hi, step }) => (lo, hi, step),
            Some(Grid::List(_)) => {
                return Err(ini.bad("sweep", "alpha", "sizing needs a lo:hi:step range"))
            }
            None => b.map_or((1.05, 3.0, 0.025), |x| {
                (x.alpha_lo, x.alpha_hi, x.alpha_step)
            }),
        };
        let s9_over_s6 = num("s9_over_s6", b.map(|x| x.s9_over_s6), None)?;
        let s9_rows = match self.sweep_grid("s9_over_s6")? {
            Some(v) => v,
            None => b.map_or_else(|| vec![s9_over_s6], |x| x.s9_rows.clone()),
        };
        let inputs = SizingInputs {
            i_ref_target: num("i_ref_target", b.map(|x| x.i_ref_target), None)?,
            n_mirror: num("n_mirror", b.map(|x| x.n_mirror), Some(3.0))?,
            isq_ratio: num("isq_ratio", b.map(|x| x.isq_ratio), Some(1.0))?,
            s7_over_s6: num("s7_over_s6", b.map(|x| x.s7_over_s6), None)?,
            s9_over_s6,
            s9_rows,
            alpha_lo,
            alpha_hi,
            alpha_step,
            flavor67_9: flavor("flavor67_9", b.map(|x| x.flavor67_9.as_str()), &scm_flavor)?,
            flavor8: flavor("flavor8", b.map(|x| x.flavor8.as_str()), &scm_flavor)?,
            vbs7_override: ini.f64(sec, "vbs7")?.or(b.and_then(|x| x.vbs7_override)),
            mirror_flavor: flavor(
                "mirror_flavor",
                b.map(|x| x.mirror_flavor.as_str()),
                &scm_flavor,
            )?,
            buffer_flavor: flavor(
                "buffer_flavor",
                b.map(|x| x.buffer_flavor.as_str()),
                &scm_flavor,
            )?,
            if_mirror: num("if_mirror", b.map(|x| x.if_mirror), Some(10.0))?,
            if_buffer: num("if_buffer", b.map(|x| x.if_buffer), Some(1.0))?,
            temps: self.temperatures()?,
            cal: self.calibration(b.and_then(|x| x.cal))?,
            scm_flavor,
            tech,
        };
        inputs
            .validate()
            .map_err(|e| CliError::config(format!("{}: {e}", ini.source)))?;
        Ok(inputs)
    }
}
