// SPDX-License-Identifier: Apache-2.0

use std::fmt::Write as _;

use super::{pp_rows, MultiplierConfig, PP_COLUMNS};
use crate::error::ConfigError;

/// Internal column count; carries may spill past bit 15 and are dropped by
/// the final 16-bit adder.
pub(crate) const PLAN_COLUMNS: usize = PP_COLUMNS + 3;
const MAX_STAGES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Placement {
    /// Two-output approximate compressor: 4 bits in, sum here, carry next.
    Approx42,
    /// Exact compressor: 4 bits plus a `cin` taken from a `cout` of the
    /// previous column in the same stage, when one is free.
    Exact42,
    FullAdder,
    HalfAdder,
    /// One bit forwarded unchanged.
    Pass,
}

impl Placement {
    pub const fn inputs(self) -> usize {
        match self {
            Placement::Approx42 | Placement::Exact42 => 4,
            Placement::FullAdder => 3,
            Placement::HalfAdder => 2,
            Placement::Pass => 1,
        }
    }

    pub const fn name(self) -> &'static str {
        match self {
            Placement::Approx42 => "APPROX_42",
            Placement::Exact42 => "EXACT_42",
            Placement::FullAdder => "FULL_ADDER",
            Placement::HalfAdder => "HALF_ADDER",
            Placement::Pass => "PASS",
        }
    }

    pub const fn is_compressor(self) -> bool {
        matches!(self, Placement::Approx42 | Placement::Exact42)
    }
}

/// Placement of reducers per stage and column.
///
/// Within a column, placements consume the column's bits front to back and
/// are always ordered compressors, then at most one adder, then passes. The
/// bits of a column at the next stage are, in order: carries from the column
/// below, sums of this column's compressors, unused `cout`s from the column
/// below, the adder sum, then passed bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReductionPlan {
    pub label: String,
    pub truncated_columns: usize,
    pub compensation: u32,
    /// Column heights entering stage 0, after truncation.
    pub initial_heights: Vec<usize>,
    /// `stages[s][j]` lists the placements in column `j` of stage `s`.
    pub stages: Vec<Vec<Vec<Placement>>>,
}

impl ReductionPlan {
    pub fn stage_count(&self) -> usize {
        self.stages.len()
    }

    pub fn count(&self, kind: Placement) -> usize {
        self.stages
            .iter()
            .flatten()
            .flatten()
            .filter(|&&p| p == kind)
            .count()
    }

    /// Text dump, one line per stage per non-empty column, e.g.
    /// `stage=0 col=6 APPROX_42(x1) FULL_ADDER(x1)`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# plan {} stages={} truncated_columns={} compensation={}",
            self.label,
            self.stages.len(),
            self.truncated_columns,
            self.compensation
        );
        for (s, stage) in self.stages.iter().enumerate() {
            for (j, col) in stage.iter().enumerate() {
                if col.is_empty() {
                    continue;
                }
                let _ = write!(out, "stage={s} col={j}");
                let mut i = 0;
                while i < col.len() {
                    let kind = col[i];
                    let run = col[i..].iter().take_while(|&&p| p == kind).count();
                    let _ = write!(out, " {}(x{run})", kind.name());
                    i += run;
                }
                out.push('\n');
            }
        }
        out
    }
}

/// Deterministic reduction of the partial-product matrix.
///
/// Each stage scans columns from the least significant. A column emits a 4:2
/// compressor while at least four of its bits are unconsumed; with three left
/// it emits a full adder, and with two a half adder, but only if the column
/// would otherwise hold more than two bits at the next stage. Everything else
/// passes. Stages repeat until every column holds at most two bits.
pub fn build_plan(cfg: &MultiplierConfig) -> Result<ReductionPlan, ConfigError> {
    cfg.validate()?;
    let truncated = cfg.truncated_columns();
    let mut heights = vec![0usize; PLAN_COLUMNS];
    for (j, h) in heights.iter_mut().enumerate().take(PP_COLUMNS) {
        if j >= truncated {
            *h = pp_rows(j).count();
        }
    }
    let initial_heights = heights.clone();
    let mut stages = Vec::new();

    while heights.iter().any(|&h| h > 2) {
        assert!(stages.len() < MAX_STAGES, "reduction failed to converge");
        let mut stage = vec![Vec::new(); PLAN_COLUMNS];
        let mut next = vec![0usize; PLAN_COLUMNS + 1];
        let mut free_couts = [0usize; PLAN_COLUMNS + 1];

        for j in 0..PLAN_COLUMNS {
            let placements: &mut Vec<Placement> = &mut stage[j];
            let mut left = heights[j];
            while left >= 4 {
                if cfg.exact_in_column(j) {
                    free_couts[j] = free_couts[j].saturating_sub(1);
                    free_couts[j + 1] += 1;
                    placements.push(Placement::Exact42);
                } else {
                    placements.push(Placement::Approx42);
                }
                next[j] += 1;
                next[j + 1] += 1;
                left -= 4;
            }
            next[j] += free_couts[j];
            free_couts[j] = 0;

            let over_target = next[j] + left > 2;
            if left == 3 && over_target {
                placements.push(Placement::FullAdder);
                next[j] += 1;
                next[j + 1] += 1;
                left = 0;
            } else if left == 2 && over_target {
                placements.push(Placement::HalfAdder);
                next[j] += 1;
                next[j + 1] += 1;
                left = 0;
            }
            placements.extend(std::iter::repeat_n(Placement::Pass, left));
            next[j] += left;
        }
        // Anything past the last tracked column is beyond the 16-bit result.
        next.truncate(PLAN_COLUMNS);
        heights = next;
        stages.push(stage);
    }

    Ok(ReductionPlan {
        label: cfg.label(),
        truncated_columns: truncated,
        compensation: cfg.resolved_compensation()?,
        initial_heights,
        stages,
    })
}
