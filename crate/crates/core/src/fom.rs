//! Figures of merit and ranking of published current references.

use std::collections::BTreeMap;
use std::io::Read;

use crate::error::{Error, Result};
use crate::real::Real;

/// Comparison table of nA-range CWT current references, measured values.
pub const SOA_CSV: &str = include_str!("../data/soa.csv");

/// Column names of the record CSV schema, in order.
pub const RECORD_COLUMNS: [&str; 9] = [
    "label", "i_ref_A", "power_W", "vdd_V", "area_mm2", "t_min_C", "t_max_C", "tc_ppmC", "ls_pctV",
];

/// One published reference. Missing cells are `None`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReferenceRecord<R> {
    pub label: String,
    /// Reference current (A).
    pub i_ref: Option<R>,
    /// Power (W) at `vdd`.
    pub power: Option<R>,
    pub vdd: Option<R>,
    /// Silicon area (mm^2).
    pub area: Option<R>,
    /// Temperature range (degC).
    pub t_min: Option<R>,
    pub t_max: Option<R>,
    /// ppm/degC.
    pub tc: Option<R>,
    /// %/V.
    pub ls: Option<R>,
    /// Columns outside the schema.
    pub extra: BTreeMap<String, String>,
}

fn need<R: Copy>(v: Option<R>, what: &str, label: &str) -> Result<R> {
    v.ok_or_else(|| Error::input(format!("'{label}' has no {what}")))
}

/// `TC / (Tmax - Tmin) * area`, in ppm/degC^2 x mm^2.
pub fn fom<R: Real>(rec: &ReferenceRecord<R>) -> Result<R> {
    let tc = need(rec.tc, "TC", &rec.label)?;
    let area = need(rec.area, "area", &rec.label)?;
    let range = need(rec.t_max, "maximum temperature", &rec.label)?
        - need(rec.t_min, "minimum temperature", &rec.label)?;
    if !(range > R::zero()) {
        return Err(Error::domain(format!(
            "'{}' has an empty temperature range",
            rec.label
        )));
    }
    if !(area > R::zero()) || !(tc >= R::zero()) {
        return Err(Error::domain(format!(
            "'{}' needs area > 0 and TC >= 0",
            rec.label
        )));
    }
    Ok(tc / range * area)
}

/// FoM weighted by power per unit reference current, `fom * P / (1 V * I_REF)`.
pub fn fom2<R: Real>(rec: &ReferenceRecord<R>) -> Result<R> {
    let i_ref = need(rec.i_ref, "reference current", &rec.label)?;
    let power = need(rec.power, "power", &rec.label)?;
    if !(i_ref > R::zero()) {
        return Err(Error::domain(format!(
            "'{}' has a non-positive reference current",
            rec.label
        )));
    }
    Ok(fom(rec)? * power / i_ref)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedRecord<R> {
    pub record: ReferenceRecord<R>,
    pub fom: R,
    /// `None` when current or power is missing.
    pub fom2: Option<R>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ranking<R> {
    /// Ascending FoM, ties by label.
    pub ranked: Vec<RankedRecord<R>>,
    /// Records without a computable FoM, with the reason.
    pub excluded: Vec<(String, String)>,
}

/// Sorts records by ascending FoM (lower is better).
pub fn rank<R: Real>(records: &[ReferenceRecord<R>]) -> Ranking<R> {
    let mut ranked = Vec::new();
    let mut excluded = Vec::new();
    for rec in records {
        match fom(rec) {
            Ok(f) => ranked.push(RankedRecord {
                record: rec.clone(),
                fom: f,
                fom2: fom2(rec).ok(),
            }),
            Err(e) => excluded.push((rec.label.clone(), e.to_string())),
        }
    }
    ranked.sort_by(|a, b| {
        a.fom
            .partial_cmp(&b.fom)
            .expect("finite FoM")
            .then_with(|| a.record.label.cmp(&b.record.label))
    });
    Ranking { ranked, excluded }
}

fn parse_cell<R: Real>(cell: &str, column: &str, line: u64) -> Result<Option<R>> {
    let cell = cell.trim();
    if cell.is_empty() {
        return Ok(None);
    }
    let v: f64 = cell.parse().map_err(|_| {
        Error::input(format!(
            "line {line}: column '{column}' is not a number: '{cell}'"
        ))
    })?;
    if !v.is_finite() {
        return Err(Error::input(format!(
            "line {line}: column '{column}' is not finite"
        )));
    }
    Ok(Some(R::lit(v)))
}

/// Reads records from CSV with the [`RECORD_COLUMNS`] header; extra
/// columns are kept in `extra`, empty cells are missing values.
pub fn read_records<R: Real, Rd: Read>(input: Rd) -> Result<Vec<ReferenceRecord<R>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = rdr
        .headers()
        .map_err(|e| Error::input(format!("cannot read CSV header: {e}")))?
        .clone();
    let mut index = BTreeMap::new();
    for col in RECORD_COLUMNS {
        let i = headers
            .iter()
            .position(|h| h == col)
            .ok_or_else(|| Error::input(format!("missing column '{col}'")))?;
        index.insert(col, i);
    }
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| Error::input(format!("malformed CSV: {e}")))?;
        let line = row.position().map_or(0, |p| p.line());
        let get = |col: &str| row.get(index[col]).unwrap_or("");
        let num = |col: &str| parse_cell::<R>(get(col), col, line);
        let label = get("label").to_string();
        if label.is_empty() {
            return Err(Error::input(format!("line {line}: empty label")));
        }
        let extra = headers
            .iter()
            .enumerate()
            .filter(|(_, h)| !RECORD_COLUMNS.contains(h))
            .map(|(i, h)| (h.to_string(), row.get(i).unwrap_or("").to_string()))
            .collect();
        out.push(ReferenceRecord {
            label,
            i_ref: num("i_ref_A")?,
            power: num("power_W")?,
            vdd: num("vdd_V")?,
            area: num("area_mm2")?,
            t_min: num("t_min_C")?,
            t_max: num("t_max_C")?,
            tc: num("tc_ppmC")?,
            ls: num("ls_pctV")?,
            extra,
        });
    }
    Ok(out)
}

/// The bundled comparison table.
pub fn soa_records<R: Real>() -> Vec<ReferenceRecord<R>> {
    read_records(SOA_CSV.as_bytes()).expect("bundled table parses")
}
