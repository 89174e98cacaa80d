// SPDX-License-Identifier: Apache-2.0

//! Error metrics for approximate arithmetic and the exhaustive 8x8 sweep.
//!
//! * ED: `|exact - approx|`
//! * ER: percentage of cases with nonzero ED
//! * RED: `ED / |exact|`
//! * MRED: mean RED, in percent
//! * NMED: mean ED over the largest exact output (65,025 for 8x8), in percent
//!
//! A case with `exact = 0` and `approx != 0` has no RED. It is left out of
//! the MRED average and counted in `zero_exact_nonzero_approx` instead.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{ConfigError, MetricsError};
use crate::lut::ProductLut;
use crate::multiplier::{exact_oracle, Multiplier, MultiplierConfig, MAX_PRODUCT};

pub type Case = (u64, u64);

#[inline]
pub fn error_distance(exact: u64, approx: u64) -> u64 {
    exact.abs_diff(approx)
}

/// `None` when `exact` is zero and `approx` is not.
pub fn relative_error_distance(exact: u64, approx: u64) -> Option<f64> {
    let ed = error_distance(exact, approx);
    match (exact, ed) {
        (_, 0) => Some(0.0),
        (0, _) => None,
        (e, d) => Some(d as f64 / e as f64),
    }
}

pub fn error_rate(cases: &[Case]) -> Result<f64, MetricsError> {
    if cases.is_empty() {
        return Err(MetricsError::Empty);
    }
    let wrong = cases.iter().filter(|(e, a)| e != a).count();
    Ok(100.0 * wrong as f64 / cases.len() as f64)
}

pub fn mred(cases: &[Case]) -> Result<f64, MetricsError> {
    let reds: Vec<f64> = cases
        .iter()
        .filter_map(|&(e, a)| relative_error_distance(e, a))
        .collect();
    if reds.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(100.0 * reds.iter().sum::<f64>() / reds.len() as f64)
}

pub fn nmed(cases: &[Case], max_exact: i64) -> Result<f64, MetricsError> {
    if max_exact <= 0 {
        return Err(MetricsError::NonPositiveMax(max_exact));
    }
    if cases.is_empty() {
        return Err(MetricsError::Empty);
    }
    let total: u64 = cases.iter().map(|&(e, a)| error_distance(e, a)).sum();
    Ok(100.0 * total as f64 / cases.len() as f64 / max_exact as f64)
}

/// Aggregated statistics of a set of `(exact, approx)` cases. Partial reports
/// merge associatively; merge in a fixed order for bit-identical RED sums.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub design_label: String,
    pub max_exact: u64,
    pub n_cases: u64,
    pub error_cases: u64,
    pub sum_ed: u64,
    pub max_ed: u64,
    pub red_sum: f64,
    pub red_cases: u64,
    pub zero_exact_nonzero_approx: u64,
    pub histogram: BTreeMap<u64, u64>,
}

impl ErrorReport {
    pub fn new(label: impl Into<String>, max_exact: u64) -> Self {
        Self {
            design_label: label.into(),
            max_exact,
            n_cases: 0,
            error_cases: 0,
            sum_ed: 0,
            max_ed: 0,
            red_sum: 0.0,
            red_cases: 0,
            zero_exact_nonzero_approx: 0,
            histogram: BTreeMap::new(),
        }
    }

    pub fn record(&mut self, exact: u64, approx: u64) {
        let ed = error_distance(exact, approx);
        self.n_cases += 1;
        self.sum_ed += ed;
        self.max_ed = self.max_ed.max(ed);
        if ed != 0 {
            self.error_cases += 1;
        }
        match relative_error_distance(exact, approx) {
            Some(red) => {
                self.red_sum += red;
                self.red_cases += 1;
            }
            None => self.zero_exact_nonzero_approx += 1,
        }
        *self.histogram.entry(ed).or_insert(0) += 1;
    }

    pub fn merge(&mut self, other: &ErrorReport) {
        self.n_cases += other.n_cases;
        self.error_cases += other.error_cases;
        self.sum_ed += other.sum_ed;
        self.max_ed = self.max_ed.max(other.max_ed);
        self.red_sum += other.red_sum;
        self.red_cases += other.red_cases;
        self.zero_exact_nonzero_approx += other.zero_exact_nonzero_approx;
        for (&ed, &n) in &other.histogram {
            *self.histogram.entry(ed).or_insert(0) += n;
        }
    }

    fn ratio(num: f64, den: u64) -> f64 {
        if den == 0 {
            0.0
        } else {
            num / den as f64
        }
    }

    pub fn er_percent(&self) -> f64 {
        100.0 * Self::ratio(self.error_cases as f64, self.n_cases)
    }

    pub fn mean_ed(&self) -> f64 {
        Self::ratio(self.sum_ed as f64, self.n_cases)
    }

    pub fn nmed_percent(&self) -> f64 {
        100.0 * self.mean_ed() / self.max_exact as f64
    }

    pub fn mred_percent(&self) -> f64 {
        100.0 * Self::ratio(self.red_sum, self.red_cases)
    }

    pub const CSV_HEADER: &'static str = "design,er,nmed,mred,max_ed,mean_ed";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.3},{:.3},{:.3},{},{:.6}",
            self.design_label,
            self.er_percent(),
            self.nmed_percent(),
            self.mred_percent(),
            self.max_ed,
            self.mean_ed()
        )
    }

    pub fn to_csv(&self) -> String {
        format!("{}\n{}\n", Self::CSV_HEADER, self.csv_row())
    }

    pub fn histogram_csv(&self) -> String {
        let mut out = String::from("ed,count\n");
        for (ed, n) in &self.histogram {
            let _ = writeln!(out, "{ed},{n}");
        }
        out
    }

    pub fn summary_row(&self) -> SummaryRow {
        SummaryRow {
            design: self.design_label.clone(),
            er: self.er_percent(),
            nmed: self.nmed_percent(),
            mred: self.mred_percent(),
            max_ed: self.max_ed,
            mean_ed: self.mean_ed(),
        }
    }
}

/// One row of a report CSV, as read back for comparison tables.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub design: String,
    pub er: f64,
    pub nmed: f64,
    pub mred: f64,
    pub max_ed: u64,
    pub mean_ed: f64,
}

impl SummaryRow {
    /// Parses every data row of a report CSV.
    pub fn parse_csv(text: &str) -> Result<Vec<SummaryRow>, String> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next() {
            Some(h) if h.trim() == ErrorReport::CSV_HEADER => {}
            _ => return Err(format!("expected header `{}`", ErrorReport::CSV_HEADER)),
        }
        lines
            .map(|line| {
                let f: Vec<&str> = line.split(',').map(str::trim).collect();
                if f.len() != 6 {
                    return Err(format!("expected 6 fields in `{line}`"));
                }
                let num = |s: &str| s.parse::<f64>().map_err(|e| format!("`{s}`: {e}"));
                Ok(SummaryRow {
                    design: f[0].to_string(),
                    er: num(f[1])?,
                    nmed: num(f[2])?,
                    mred: num(f[3])?,
                    max_ed: f[4].parse().map_err(|e| format!("`{}`: {e}", f[4]))?,
                    mean_ed: num(f[5])?,
                })
            })
            .collect()
    }
}

/// Text table with the columns Design, ER (%), NMED (%), MRED (%).
pub fn render_table(rows: &[SummaryRow]) -> String {
    let width = rows
        .iter()
        .map(|r| r.design.len())
        .chain(std::iter::once(6))
        .max()
        .unwrap_or(6);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<width$}  {:>9}  {:>9}  {:>9}",
        "Design", "ER (%)", "NMED (%)", "MRED (%)"
    );
    let _ = writeln!(out, "{}", "-".repeat(width + 33));
    for r in rows {
        let _ = writeln!(
            out,
            "{:<width$}  {:>9.3}  {:>9.3}  {:>9.3}",
            r.design, r.er, r.nmed, r.mred
        );
    }
    out
}

/// Compares `m` against the exact product on all 65,536 operand pairs.
///
/// Rows of the operand space are evaluated in parallel and merged in
/// ascending order, so the result does not depend on the thread count.
pub fn sweep_multiplier(m: &Multiplier) -> ErrorReport {
    let label = m.config().label();
    let rows: Vec<ErrorReport> = (0..=255u8)
        .into_par_iter()
        .map(|a| {
            let mut r = ErrorReport::new(label.clone(), MAX_PRODUCT as u64);
            for b in 0..=255u8 {
                r.record(exact_oracle(a, b) as u64, m.evaluate(a, b) as u64);
            }
            r
        })
        .collect();
    let mut total = ErrorReport::new(label, MAX_PRODUCT as u64);
    for r in &rows {
        total.merge(r);
    }
    total
}

pub fn exhaustive_sweep(cfg: &MultiplierConfig) -> Result<ErrorReport, ConfigError> {
    Ok(sweep_multiplier(&Multiplier::new(cfg.clone())?))
}

pub fn build_product_lut(cfg: &MultiplierConfig) -> Result<ProductLut, ConfigError> {
    Ok(ProductLut::from_multiplier(&Multiplier::new(cfg.clone())?))
}
