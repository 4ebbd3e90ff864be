//! CSV emission and ingestion. Numbers are written with six significant
//! digits so output is byte-identical across platforms.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fringes::{FringeCount, FringeProfile, FringeSample};
use crate::inference::{Budget, FitResult, Measurement, MonteCarloReport};
use crate::lattice::{Reflection, ReflectionClass};
use crate::planner::ReflectionPlan;

pub const SIGNIFICANT_DIGITS: usize = 6;

/// Formats `x` with six significant digits: fixed notation for decimal
/// exponents in [-4, 5], scientific otherwise; trailing zeros trimmed.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..=5).contains(&exp) {
        let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, x))
    } else {
        format!("{}e{}", trim_zeros(mantissa.to_string()), exp)
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    let t = s.trim_end_matches('0').trim_end_matches('.');
    if t == "-0" {
        "0".into()
    } else {
        t.into()
    }
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(r)
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str]) -> Result<()> {
    let got: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if got != expected {
        return Err(Error::InvalidInput(format!(
            "expected CSV header {}, got {}",
            expected.join(","),
            got.join(",")
        )));
    }
    Ok(())
}

fn deserialize_all<R: Read, T: for<'de> Deserialize<'de>>(r: R, header: &[&str]) -> Result<Vec<T>> {
    let mut rdr = reader(r);
    check_header(&mut rdr, header)?;
    rdr.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub const PLAN_HEADER: [&str; 9] = [
    "hkl",
    "class",
    "f",
    "lambda_min",
    "lambda_max",
    "two_theta_min",
    "two_theta_max",
    "F2_fm2",
    "pure",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRow {
    pub hkl: String,
    pub class: String,
    pub f: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub two_theta_min: f64,
    pub two_theta_max: f64,
    #[serde(rename = "F2_fm2")]
    pub f2_fm2: f64,
    pub pure: bool,
}

impl PlanRow {
    pub fn reflection(&self) -> Result<Reflection> {
        self.hkl.parse()
    }

    pub fn class(&self) -> Result<ReflectionClass> {
        self.class.parse()
    }
}

pub fn write_plan<W: Write>(w: W, plans: &[ReflectionPlan]) -> Result<()> {
    let mut wr = writer(w);
    wr.write_record(PLAN_HEADER)?;
    for p in plans {
        wr.write_record([
            p.reflection.label(),
            p.class.as_str().to_string(),
            fmt_sig(p.f),
            fmt_sig(p.window.lambda.0),
            fmt_sig(p.window.lambda.1),
            fmt_sig(p.window.two_theta.0),
            fmt_sig(p.window.two_theta.1),
            fmt_sig(p.f2_fm2),
            p.pure.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_plan<R: Read>(r: R) -> Result<Vec<PlanRow>> {
    deserialize_all(r, &PLAN_HEADER)
}

pub const PROFILE_HEADER: [&str; 4] = ["lambda_A", "two_theta_deg", "argument_rad", "intensity_norm"];

/// Writes the profile followed by a `#` summary line with both fringe counts.
pub fn write_profile<W: Write>(mut w: W, profile: &FringeProfile, count: &FringeCount) -> Result<()> {
    {
        let mut wr = writer(&mut w);
        wr.write_record(PROFILE_HEADER)?;
        for s in &profile.samples {
            wr.write_record([
                fmt_sig(s.lambda),
                fmt_sig(s.two_theta),
                fmt_sig(s.argument),
                fmt_sig(s.intensity),
            ])?;
        }
        wr.flush()?;
    }
    writeln!(w, "{}", profile_summary(profile, count))?;
    Ok(())
}

pub fn profile_summary(profile: &FringeProfile, count: &FringeCount) -> String {
    format!(
        "# hkl={} thickness_cm={} periods={} maxima={} zeros={} delta_argument_rad={}",
        profile.reflection.label().replace(' ', "_"),
        fmt_sig(profile.thickness_cm),
        count.periods,
        count.maxima,
        count.zeros,
        fmt_sig(count.delta_argument()),
    )
}

/// Samples and the `key=value` pairs of the summary line.
pub fn read_profile(text: &str) -> Result<(Vec<FringeSample>, BTreeMap<String, String>)> {
    #[derive(Deserialize)]
    struct Row {
        #[serde(rename = "lambda_A")]
        lambda: f64,
        two_theta_deg: f64,
        argument_rad: f64,
        intensity_norm: f64,
    }
    let rows: Vec<Row> = deserialize_all(text.as_bytes(), &PROFILE_HEADER)?;
    let samples = rows
        .into_iter()
        .map(|r| FringeSample {
            lambda: r.lambda,
            two_theta: r.two_theta_deg,
            argument: r.argument_rad,
            intensity: r.intensity_norm,
        })
        .collect();
    let mut summary = BTreeMap::new();
    for line in text.lines().filter(|l| l.starts_with('#')) {
        for kv in line.trim_start_matches('#').split_whitespace() {
            if let Some((k, v)) = kv.split_once('=') {
                summary.insert(k.to_string(), v.to_string());
            }
        }
    }
    Ok((samples, summary))
}

pub const MEASUREMENT_HEADER: [&str; 5] = ["h", "k", "l", "b_meas_fm", "sigma_fm"];

pub fn write_measurements<W: Write>(w: W, ms: &[Measurement]) -> Result<()> {
    let mut wr = writer(w);
    wr.write_record(MEASUREMENT_HEADER)?;
    for m in ms {
        let r = m.reflection;
        wr.write_record([
            r.h.to_string(),
            r.k.to_string(),
            r.l.to_string(),
            fmt_sig(m.b_meas),
            fmt_sig(m.sigma),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

/// Reads measurements; an empty `sigma_fm` cell takes `default_sigma`.
pub fn read_measurements<R: Read>(r: R, default_sigma: f64) -> Result<Vec<Measurement>> {
    #[derive(Deserialize)]
    struct Row {
        h: i32,
        k: i32,
        l: i32,
        b_meas_fm: f64,
        sigma_fm: Option<f64>,
    }
    let rows: Vec<Row> = deserialize_all(r, &MEASUREMENT_HEADER)?;
    rows.into_iter()
        .map(|row| {
            let m = Measurement::new(
                Reflection::new(row.h, row.k, row.l),
                row.b_meas_fm,
                row.sigma_fm.unwrap_or(default_sigma),
            );
            if !(m.sigma > 0.0) || !(m.b_meas > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "measurement {} needs b_meas > 0 and σ > 0",
                    m.reflection
                )));
            }
            Ok(m)
        })
        .collect()
}

pub const PARAMETER_HEADER: [&str; 4] = ["method", "parameter", "value", "sigma"];
pub const COVARIANCE_HEADER: [&str; 4] = ["method", "row", "col", "covariance"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterRow {
    pub method: String,
    pub parameter: String,
    pub value: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceRow {
    pub method: String,
    pub row: String,
    pub col: String,
    pub covariance: f64,
}

pub fn write_parameters<W: Write>(w: W, rows: &[ParameterRow]) -> Result<()> {
    let mut wr = writer(w);
    wr.write_record(PARAMETER_HEADER)?;
    for r in rows {
        wr.write_record([
            r.method.clone(),
            r.parameter.clone(),
            fmt_sig(r.value),
            fmt_sig(r.sigma),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_parameters<R: Read>(r: R) -> Result<Vec<ParameterRow>> {
    deserialize_all(r, &PARAMETER_HEADER)
}

/// Covariance entries of a fit, upper triangle included twice (full matrix).
pub fn covariance_rows(method: &str, fit: &FitResult) -> Vec<CovarianceRow> {
    let mut out = Vec::new();
    for (i, a) in fit.names.iter().enumerate() {
        for (j, b) in fit.names.iter().enumerate() {
            out.push(CovarianceRow {
                method: method.into(),
                row: a.clone(),
                col: b.clone(),
                covariance: fit.covariance[i][j],
            });
        }
    }
    out
}

pub fn write_covariance<W: Write>(w: W, rows: &[CovarianceRow]) -> Result<()> {
    let mut wr = writer(w);
    wr.write_record(COVARIANCE_HEADER)?;
    for r in rows {
        wr.write_record([r.method.clone(), r.row.clone(), r.col.clone(), fmt_sig(r.covariance)])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_covariance<R: Read>(r: R) -> Result<Vec<CovarianceRow>> {
    deserialize_all(r, &COVARIANCE_HEADER)
}

pub const BUDGET_HEADER: [&str; 3] = ["configuration", "sigma_B_A2", "sigma_bne_fm"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetRow {
    pub configuration: String,
    #[serde(rename = "sigma_B_A2")]
    pub sigma_b_factor: f64,
    pub sigma_bne_fm: f64,
}

pub fn budget_rows(b: &Budget) -> Vec<BudgetRow> {
    let mut rows = vec![BudgetRow {
        configuration: "two_stage".into(),
        sigma_b_factor: b.two_stage.sigma_b_factor,
        sigma_bne_fm: b.two_stage.sigma_b_ne,
    }];
    if let Some(j) = b.joint {
        rows.push(BudgetRow {
            configuration: "joint".into(),
            sigma_b_factor: j.sigma_b_factor,
            sigma_bne_fm: j.sigma_b_ne,
        });
    }
    rows
}

pub fn write_budget<W: Write>(w: W, rows: &[BudgetRow]) -> Result<()> {
    let mut wr = writer(w);
    wr.write_record(BUDGET_HEADER)?;
    for r in rows {
        wr.write_record([
            r.configuration.clone(),
            fmt_sig(r.sigma_b_factor),
            fmt_sig(r.sigma_bne_fm),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_budget<R: Read>(r: R) -> Result<Vec<BudgetRow>> {
    deserialize_all(r, &BUDGET_HEADER)
}

pub const RADIUS_HEADER: [&str; 5] = ["label", "b_ne_fm", "b_ne_sigma_fm", "r2_fm2", "r2_sigma_fm2"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusRow {
    pub label: String,
    pub b_ne_fm: f64,
    pub b_ne_sigma_fm: f64,
    pub r2_fm2: f64,
    pub r2_sigma_fm2: f64,
}

pub fn write_radius<W: Write>(w: W, rows: &[RadiusRow]) -> Result<()> {
    let mut wr = writer(w);
    wr.write_record(RADIUS_HEADER)?;
    for r in rows {
        wr.write_record([
            r.label.clone(),
            fmt_sig(r.b_ne_fm),
            fmt_sig(r.b_ne_sigma_fm),
            fmt_sig(r.r2_fm2),
            fmt_sig(r.r2_sigma_fm2),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_radius<R: Read>(r: R) -> Result<Vec<RadiusRow>> {
    deserialize_all(r, &RADIUS_HEADER)
}

pub const MC_HEADER: [&str; 6] = [
    "parameter",
    "truth",
    "mean",
    "analytic_sigma",
    "empirical_sigma",
    "ratio",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McRow {
    pub parameter: String,
    pub truth: f64,
    pub mean: f64,
    pub analytic_sigma: f64,
    pub empirical_sigma: f64,
    pub ratio: f64,
}

pub fn mc_rows(rep: &MonteCarloReport) -> Vec<McRow> {
    let (a, e, q) = (rep.analytic_sigma(), rep.empirical_sigma(), rep.sigma_ratio());
    rep.names
        .iter()
        .enumerate()
        .map(|(i, n)| McRow {
            parameter: n.clone(),
            truth: rep.truth[i],
            mean: rep.empirical_mean[i],
            analytic_sigma: a[i],
            empirical_sigma: e[i],
            ratio: q[i],
        })
        .collect()
}

pub fn write_mc<W: Write>(w: W, rows: &[McRow]) -> Result<()> {
    let mut wr = writer(w);
    wr.write_record(MC_HEADER)?;
    for r in rows {
        wr.write_record([
            r.parameter.clone(),
            fmt_sig(r.truth),
            fmt_sig(r.mean),
            fmt_sig(r.analytic_sigma),
            fmt_sig(r.empirical_sigma),
            fmt_sig(r.ratio),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_mc<R: Read>(r: R) -> Result<Vec<McRow>> {
    deserialize_all(r, &MC_HEADER)
}
