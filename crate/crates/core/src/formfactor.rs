//! Normalized atomic form factors f(Q) with f(0) = 1.
//!
//! Tables hold samples in (Q/4π, f). Evaluation uses a monotone piecewise
//! cubic Hermite interpolant on (x = (Q/4π)², y = ln f), with Fritsch-Carlson
//! slope limiting so the interpolant never overshoots the samples. Beyond the
//! last sample the interpolant continues linearly in (x, y) for up to
//! [`EXTRAPOLATION_MARGIN`] of the last tabulated Q.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::lattice::{q_over_4pi, CrystalSpec, Reflection};

/// Fractional extension of the domain past the last sample.
pub const EXTRAPOLATION_MARGIN: f64 = 0.05;

pub const CSV_HEADER: [&str; 2] = ["q_over_4pi_A_inv", "f"];

/// Silicon samples at the planned reflections.
const SILICON_SAMPLES: [((i32, i32, i32), f64); 9] = [
    ((1, 1, 1), 0.7526),
    ((4, 2, 2), 0.4788),
    ((5, 1, 1), 0.4600),
    ((5, 3, 1), 0.4150),
    ((6, 2, 0), 0.3902),
    ((5, 3, 3), 0.3764),
    ((5, 5, 1), 0.3432),
    ((7, 1, 1), 0.3432),
    ((6, 4, 2), 0.3249),
];

const GERMANIUM_SAMPLES: [((i32, i32, i32), f64); 1] = [((1, 1, 1), 0.8542)];

#[derive(Debug, Clone, PartialEq)]
pub struct FormFactorTable {
    element: String,
    /// (Q/4π, f), strictly increasing in Q, first sample (0, 1).
    samples: Vec<(f64, f64)>,
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl FormFactorTable {
    /// Builds a table from samples in any order. Samples sharing a Q value are
    /// merged (they must agree on f). A `(0, 1)` sample is required.
    pub fn new(element: impl Into<String>, samples: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let element = element.into();
        let mut raw: Vec<(f64, f64)> = samples.into_iter().collect();
        if raw.iter().any(|(q, f)| !q.is_finite() || !f.is_finite()) {
            return Err(Error::InvalidTable("non-finite sample".into()));
        }
        raw.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(raw.len());
        for (q, f) in raw {
            match merged.last() {
                Some(&(lq, lf)) if (q - lq).abs() <= 1e-12 * q.abs().max(1.0) => {
                    if (f - lf).abs() > 1e-12 {
                        return Err(Error::InvalidTable(format!(
                            "conflicting f values {lf} and {f} at Q/4π = {q}"
                        )));
                    }
                }
                _ => merged.push((q, f)),
            }
        }
        Self::from_sorted(element, merged)
    }

    fn from_sorted(element: String, samples: Vec<(f64, f64)>) -> Result<Self> {
        match samples.first() {
            Some(&(q, f)) if q == 0.0 && f == 1.0 => {}
            _ => return Err(Error::InvalidTable("first sample must be (0, 1)".into())),
        }
        for w in samples.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::InvalidTable("Q must be strictly increasing".into()));
            }
            if !(w[1].1 < w[0].1) {
                return Err(Error::InvalidTable("f must be strictly decreasing in Q".into()));
            }
        }
        if samples.iter().any(|&(_, f)| !(f > 0.0 && f <= 1.0)) {
            return Err(Error::InvalidTable("f must lie in (0, 1]".into()));
        }
        if samples.len() < 2 {
            return Err(Error::InvalidTable(
                "at least one sample beyond Q = 0 is required".into(),
            ));
        }
        let xs: Vec<f64> = samples.iter().map(|&(q, _)| q * q).collect();
        let ys: Vec<f64> = samples.iter().map(|&(_, f)| f.ln()).collect();
        let slopes = monotone_slopes(&xs, &ys);
        Ok(Self {
            element,
            samples,
            xs,
            ys,
            slopes,
        })
    }

    /// Samples tabulated at reflections of `crystal`.
    pub fn from_reflections(element: &str, crystal: &CrystalSpec, rows: &[((i32, i32, i32), f64)]) -> Result<Self> {
        let samples = std::iter::once((0.0, 1.0)).chain(
            rows.iter()
                .map(|&((h, k, l), f)| (q_over_4pi(crystal, Reflection::new(h, k, l)), f)),
        );
        Self::new(element, samples)
    }

    pub fn silicon() -> Self {
        Self::from_reflections("Si", &CrystalSpec::silicon(), &SILICON_SAMPLES)
            .expect("built-in silicon table is valid")
    }

    pub fn germanium() -> Self {
        Self::from_reflections("Ge", &CrystalSpec::germanium(), &GERMANIUM_SAMPLES)
            .expect("built-in germanium table is valid")
    }

    pub fn builtin(element: &str) -> Option<Self> {
        match element.to_ascii_lowercase().as_str() {
            "si" | "silicon" => Some(Self::silicon()),
            "ge" | "germanium" => Some(Self::germanium()),
            _ => None,
        }
    }

    pub fn element(&self) -> &str {
        &self.element
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn max_tabulated_q(&self) -> f64 {
        self.samples.last().map(|s| s.0).unwrap_or(0.0)
    }

    /// Largest Q/4π accepted by [`f_at`](Self::f_at).
    pub fn domain_limit(&self) -> f64 {
        self.max_tabulated_q() * (1.0 + EXTRAPOLATION_MARGIN)
    }

    /// f at Q/4π (Å⁻¹).
    pub fn f_at(&self, q_over_4pi: f64) -> Result<f64> {
        let q = q_over_4pi.abs();
        if !q.is_finite() || q > self.domain_limit() {
            return Err(Error::FormFactorDomain {
                element: self.element.clone(),
                q: q_over_4pi,
                max: self.domain_limit(),
            });
        }
        let x = q * q;
        let n = self.xs.len();
        if x >= self.xs[n - 1] {
            if x == self.xs[n - 1] {
                return Ok(self.samples[n - 1].1);
            }
            let y = self.ys[n - 1] + self.slopes[n - 1] * (x - self.xs[n - 1]);
            return Ok(y.exp());
        }
        // first index with xs[i] > x
        let i = self.xs.partition_point(|&v| v <= x);
        let k = i - 1;
        if x == self.xs[k] {
            return Ok(self.samples[k].1);
        }
        let h = self.xs[k + 1] - self.xs[k];
        let t = (x - self.xs[k]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let y = h00 * self.ys[k] + h10 * h * self.slopes[k] + h01 * self.ys[k + 1] + h11 * h * self.slopes[k + 1];
        Ok(y.exp())
    }

    pub fn read_csv<R: Read>(element: &str, reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != CSV_HEADER {
            return Err(Error::InvalidTable(format!(
                "expected header {}, found {}",
                CSV_HEADER.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut samples = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| Error::InvalidTable(format!("bad number in row {rec:?}")))
            };
            samples.push((parse(0)?, parse(1)?));
        }
        // File order must already be strictly increasing.
        Self::from_sorted(element.to_string(), samples)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(CSV_HEADER)?;
        for &(q, f) in &self.samples {
            w.write_record([format!("{q}"), format!("{f}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Fritsch-Carlson derivative estimates for a monotone cubic Hermite interpolant.
fn monotone_slopes(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|k| (ys[k + 1] - ys[k]) / h[k]).collect();
    if n == 2 {
        return vec![delta[0], delta[0]];
    }
    let mut d = vec![0.0; n];
    for k in 1..n - 1 {
        if delta[k - 1] * delta[k] <= 0.0 {
            d[k] = 0.0;
        } else {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
        }
    }
    d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if s.signum() != d0.signum() {
        0.0
    } else if d0.signum() != d1.signum() && s.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        s
    }
}
