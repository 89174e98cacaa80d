// SPDX-License-Identifier: Apache-2.0

//! 8x8 unsigned multipliers built from a partial-product AND array, a
//! compressor-tree reduction, and an exact final addition.

mod circuit;
mod plan;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use circuit::{ApproxEvent, Multiplier, Trace};
pub use plan::{build_plan, Placement, ReductionPlan};

use crate::compressor::{proposed_truth_table, CompressorTruthTable};
use crate::error::ConfigError;

pub const OPERAND_BITS: usize = 8;
/// Columns of the initial partial-product matrix.
pub const PP_COLUMNS: usize = 2 * OPERAND_BITS - 1;
pub const RESULT_BITS: usize = 2 * OPERAND_BITS;
/// Largest exact product, `255 * 255`.
pub const MAX_PRODUCT: u32 = 255 * 255;

/// Bits of the AND array grouped by weight: column `j` holds `a_i & b_(j-i)`
/// in ascending `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialProductMatrix {
    columns: Vec<Vec<bool>>,
}

impl PartialProductMatrix {
    pub fn columns(&self) -> &[Vec<bool>] {
        &self.columns
    }

    pub fn heights(&self) -> Vec<usize> {
        self.columns.iter().map(Vec::len).collect()
    }

    pub fn value(&self) -> u32 {
        self.columns
            .iter()
            .enumerate()
            .map(|(j, c)| (c.iter().filter(|&&b| b).count() as u32) << j)
            .sum()
    }

    /// Weighted value of the lowest `width` columns.
    pub fn low_value(&self, width: usize) -> u32 {
        self.columns
            .iter()
            .take(width)
            .enumerate()
            .map(|(j, c)| (c.iter().filter(|&&b| b).count() as u32) << j)
            .sum()
    }
}

pub fn generate_pp(a: u8, b: u8) -> PartialProductMatrix {
    let columns = (0..PP_COLUMNS)
        .map(|j| {
            pp_rows(j)
                .map(|i| (a >> i) & (b >> (j - i)) & 1 == 1)
                .collect()
        })
        .collect();
    PartialProductMatrix { columns }
}

/// Row indices `i` contributing `a_i b_(j-i)` to column `j`.
pub(crate) fn pp_rows(j: usize) -> impl Iterator<Item = usize> {
    let lo = j.saturating_sub(OPERAND_BITS - 1);
    let hi = j.min(OPERAND_BITS - 1);
    lo..=hi
}

#[inline]
pub fn exact_oracle(a: u8, b: u8) -> u16 {
    a as u16 * b as u16
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "EXACT")]
    Exact,
    /// Approximate compressors in the low columns, exact ones from
    /// `exact_column_threshold` up.
    #[serde(rename = "DESIGN1_HYBRID")]
    Design1Hybrid,
    /// Low columns truncated, a constant added back, approximate elsewhere.
    #[serde(rename = "DESIGN2_TRUNCATED")]
    Design2Truncated,
    /// Approximate compressors in every column.
    #[serde(rename = "PROPOSED_FULL_APPROX")]
    ProposedFullApprox,
}

impl Family {
    pub const ALL: [Family; 4] = [
        Family::Exact,
        Family::Design1Hybrid,
        Family::Design2Truncated,
        Family::ProposedFullApprox,
    ];

    pub const fn name(self) -> &'static str {
        match self {
            Family::Exact => "EXACT",
            Family::Design1Hybrid => "DESIGN1_HYBRID",
            Family::Design2Truncated => "DESIGN2_TRUNCATED",
            Family::ProposedFullApprox => "PROPOSED_FULL_APPROX",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "EXACT" => Ok(Family::Exact),
            "DESIGN1_HYBRID" | "DESIGN1" | "HYBRID" => Ok(Family::Design1Hybrid),
            "DESIGN2_TRUNCATED" | "DESIGN2" | "TRUNCATED" => Ok(Family::Design2Truncated),
            "PROPOSED_FULL_APPROX" | "PROPOSED" => Ok(Family::ProposedFullApprox),
            _ => Err(ConfigError::UnknownFamily(s.to_string())),
        }
    }
}

pub const DEFAULT_EXACT_COLUMN_THRESHOLD: usize = 8;
pub const DEFAULT_TRUNCATION_WIDTH: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiplierConfig {
    pub family: Family,
    pub approx_table: CompressorTruthTable,
    /// First column that uses exact compressors (DESIGN1 only).
    pub exact_column_threshold: usize,
    /// Number of least-significant columns dropped (DESIGN2 only).
    pub truncation_width: usize,
    /// Constant added after reduction (DESIGN2 only). `None` derives the
    /// mean truncated value.
    pub compensation: Option<u32>,
}

impl MultiplierConfig {
    pub fn new(family: Family) -> Self {
        Self {
            family,
            approx_table: proposed_truth_table(),
            exact_column_threshold: DEFAULT_EXACT_COLUMN_THRESHOLD,
            truncation_width: DEFAULT_TRUNCATION_WIDTH,
            compensation: None,
        }
    }

    pub fn exact() -> Self {
        Self::new(Family::Exact)
    }

    pub fn proposed() -> Self {
        Self::new(Family::ProposedFullApprox)
    }

    pub fn design1(threshold: usize) -> Self {
        Self {
            exact_column_threshold: threshold,
            ..Self::new(Family::Design1Hybrid)
        }
    }

    pub fn design2(truncation_width: usize) -> Self {
        Self {
            truncation_width,
            ..Self::new(Family::Design2Truncated)
        }
    }

    pub fn with_table(mut self, table: CompressorTruthTable) -> Self {
        self.approx_table = table;
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.truncation_width > 7 {
            return Err(ConfigError::TruncationWidth(self.truncation_width));
        }
        if self.exact_column_threshold > 14 {
            return Err(ConfigError::Threshold(self.exact_column_threshold));
        }
        if self.compensation.is_some() && self.family != Family::Design2Truncated {
            return Err(ConfigError::NotTruncated("a compensation constant"));
        }
        Ok(())
    }

    /// Whether a 4:2 placement in `column` uses the exact compressor.
    pub fn exact_in_column(&self, column: usize) -> bool {
        match self.family {
            Family::Exact => true,
            Family::Design1Hybrid => column >= self.exact_column_threshold,
            Family::Design2Truncated | Family::ProposedFullApprox => false,
        }
    }

    /// Columns dropped before reduction.
    pub fn truncated_columns(&self) -> usize {
        match self.family {
            Family::Design2Truncated => self.truncation_width,
            _ => 0,
        }
    }

    /// The constant added after reduction; derived when not set.
    pub fn resolved_compensation(&self) -> Result<u32, ConfigError> {
        match (self.family, self.compensation) {
            (Family::Design2Truncated, Some(c)) => Ok(c),
            (Family::Design2Truncated, None) => derive_compensation(self),
            _ => Ok(0),
        }
    }

    /// Human-readable label used in reports.
    pub fn label(&self) -> String {
        match self.family {
            Family::Exact => "EXACT".to_string(),
            Family::ProposedFullApprox => {
                format!("PROPOSED_FULL_APPROX[{}]", self.approx_table.name())
            }
            Family::Design1Hybrid => format!(
                "DESIGN1_HYBRID[{}]@k={}",
                self.approx_table.name(),
                self.exact_column_threshold
            ),
            Family::Design2Truncated => format!(
                "DESIGN2_TRUNCATED[{}]@w={}",
                self.approx_table.name(),
                self.truncation_width
            ),
        }
    }

    /// Stable digest of every field that affects behavior.
    pub fn config_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.family.name());
        h.update(self.approx_table.to_csv());
        if self.family == Family::Design1Hybrid {
            h.update(format!("threshold={}", self.exact_column_threshold));
        }
        if self.family == Family::Design2Truncated {
            h.update(format!(
                "trunc={};comp={:?}",
                self.truncation_width, self.compensation
            ));
        }
        hex::encode(h.finalize())
    }
}

/// Mean value discarded by truncation, over all 65,536 operand pairs,
/// rounded to the nearest integer (halves away from zero).
pub fn derive_compensation(cfg: &MultiplierConfig) -> Result<u32, ConfigError> {
    if cfg.family != Family::Design2Truncated {
        return Err(ConfigError::NotTruncated("derive_compensation"));
    }
    cfg.validate()?;
    let width = cfg.truncation_width;
    let total: u64 = (0..=255u8)
        .flat_map(|a| (0..=255u8).map(move |b| (a, b)))
        .map(|(a, b)| generate_pp(a, b).low_value(width) as u64)
        .sum();
    Ok(((total + 32_768) / 65_536) as u32)
}

/// Builds the multiplier described by `cfg` and evaluates one product.
/// Use [`Multiplier`] directly when evaluating many products.
pub fn evaluate(cfg: &MultiplierConfig, a: u8, b: u8) -> Result<u16, ConfigError> {
    Ok(Multiplier::new(cfg.clone())?.evaluate(a, b))
}
