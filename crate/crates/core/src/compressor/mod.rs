// SPDX-License-Identifier: Apache-2.0

//! Behavioral and structural models of 4:2 compressors.
//!
//! Truth-table indices read the input bits as `x4 x3 x2 x1`, so `x1` is bit 0
//! of the index and `x4` is bit 3.

mod netlist;

use std::collections::BTreeMap;
use std::fmt;

pub use netlist::{
    exact_netlist, proposed_netlist, CriticalPath, Gate, GateKind, GateNetlist, Signal,
};

use crate::error::TableError;

/// The four primary inputs of a 4:2 compressor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CompressorInputs {
    pub x1: bool,
    pub x2: bool,
    pub x3: bool,
    pub x4: bool,
}

impl CompressorInputs {
    /// Decodes a pattern index; bits above the low nibble are ignored.
    pub const fn from_index(index: u8) -> Self {
        Self {
            x1: index & 1 != 0,
            x2: index & 2 != 0,
            x3: index & 4 != 0,
            x4: index & 8 != 0,
        }
    }

    pub const fn index(self) -> u8 {
        self.x1 as u8 | (self.x2 as u8) << 1 | (self.x3 as u8) << 2 | (self.x4 as u8) << 3
    }

    pub const fn popcount(self) -> u8 {
        self.x1 as u8 + self.x2 as u8 + self.x3 as u8 + self.x4 as u8
    }
}

/// `(carry, sum)` of a two-output compressor. Carry weighs twice the sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct CompressorOutputs {
    pub carry: bool,
    pub sum: bool,
}

impl CompressorOutputs {
    pub const fn new(carry: bool, sum: bool) -> Self {
        Self { carry, sum }
    }

    /// Output pair encoding `value`, which must be at most 3.
    pub const fn from_value(value: u8) -> Self {
        Self {
            carry: value & 2 != 0,
            sum: value & 1 != 0,
        }
    }

    pub const fn value(self) -> u8 {
        2 * self.carry as u8 + self.sum as u8
    }
}

/// Outputs of the exact five-input compressor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ExactOutputs {
    pub cout: bool,
    pub carry: bool,
    pub sum: bool,
}

impl ExactOutputs {
    pub const fn value(self) -> u8 {
        2 * self.cout as u8 + 2 * self.carry as u8 + self.sum as u8
    }
}

const fn full_adder(a: bool, b: bool, c: bool) -> (bool, bool) {
    let carry = (a & b) | (b & c) | (a & c);
    (carry, a ^ b ^ c)
}

/// Exact 4:2 compressor built from two cascaded full adders.
///
/// The first adder takes `x1, x2, x3` and produces `cout`, so `cout` never
/// depends on `cin`. The second adder folds its sum with `x4` and `cin`.
pub const fn exact_compressor(inputs: CompressorInputs, cin: bool) -> ExactOutputs {
    let (cout, partial) = full_adder(inputs.x1, inputs.x2, inputs.x3);
    let (carry, sum) = full_adder(partial, inputs.x4, cin);
    ExactOutputs { cout, carry, sum }
}

/// Maps each of the 16 input patterns of a two-output compressor to `(carry, sum)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CompressorTruthTable {
    name: String,
    entries: [CompressorOutputs; 16],
}

impl CompressorTruthTable {
    pub fn new(name: impl Into<String>, entries: [CompressorOutputs; 16]) -> Self {
        Self {
            name: name.into(),
            entries,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn entries(&self) -> &[CompressorOutputs; 16] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, index: u8) -> CompressorOutputs {
        self.entries[(index & 0xF) as usize]
    }

    #[inline]
    pub fn eval(&self, inputs: CompressorInputs) -> CompressorOutputs {
        self.get(inputs.index())
    }

    /// Approximate value minus the true bit count for `index`.
    pub fn value_error(&self, index: u8) -> i8 {
        self.get(index).value() as i8 - (index & 0xF).count_ones() as i8
    }

    pub fn error_indices(&self) -> Vec<u8> {
        (0..16u8).filter(|&i| self.value_error(i) != 0).collect()
    }

    pub fn error_combinations(&self) -> usize {
        self.error_indices().len()
    }

    /// Probability mass of the erroneous rows, as a numerator over 256.
    pub fn error_probability_256(&self) -> u32 {
        self.error_indices()
            .into_iter()
            .map(pattern_weight_256)
            .sum()
    }

    /// Renders the table as CSV with header `x4,x3,x2,x1,carry,sum`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x4,x3,x2,x1,carry,sum\n");
        for index in 0..16u8 {
            let i = CompressorInputs::from_index(index);
            let o = self.get(index);
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                i.x4 as u8, i.x3 as u8, i.x2 as u8, i.x1 as u8, o.carry as u8, o.sum as u8
            ));
        }
        out
    }

    /// Parses the CSV produced by [`to_csv`](Self::to_csv). Rows may come in
    /// any order but every pattern must appear exactly once.
    pub fn from_csv(name: impl Into<String>, text: &str) -> Result<Self, TableError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(n, l)| (n + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        match lines.next() {
            Some((_, header)) if header.replace(' ', "") == "x4,x3,x2,x1,carry,sum" => {}
            other => {
                return Err(TableError::Csv {
                    line: other.map_or(1, |(line, _)| line),
                    msg: "expected header `x4,x3,x2,x1,carry,sum`".into(),
                });
            }
        }
        let mut seen: [Option<CompressorOutputs>; 16] = [None; 16];
        for (line, row) in lines {
            let bits = row
                .split(',')
                .map(|f| match f.trim() {
                    "0" => Ok(false),
                    "1" => Ok(true),
                    other => Err(TableError::Csv {
                        line,
                        msg: format!("expected 0 or 1, found `{other}`"),
                    }),
                })
                .collect::<Result<Vec<_>, _>>()?;
            if bits.len() != 6 {
                return Err(TableError::Csv {
                    line,
                    msg: format!("expected 6 fields, found {}", bits.len()),
                });
            }
            let index = CompressorInputs {
                x4: bits[0],
                x3: bits[1],
                x2: bits[2],
                x1: bits[3],
            }
            .index();
            if seen[index as usize].is_some() {
                return Err(TableError::Csv {
                    line,
                    msg: format!("duplicate row for pattern {index:04b}"),
                });
            }
            seen[index as usize] = Some(CompressorOutputs::new(bits[4], bits[5]));
        }
        let mut entries = [CompressorOutputs::default(); 16];
        for (index, slot) in seen.iter().enumerate() {
            entries[index] = slot.ok_or_else(|| TableError::Csv {
                line: 0,
                msg: format!("missing row for pattern {index:04b}"),
            })?;
        }
        Ok(Self::new(name, entries))
    }
}

impl fmt::Display for CompressorTruthTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.name)?;
        writeln!(f, "x4 x3 x2 x1 | exact prob   | carry sum | appr diff")?;
        for index in 0..16u8 {
            let i = CompressorInputs::from_index(index);
            let o = self.get(index);
            writeln!(
                f,
                " {}  {}  {}  {} |   {}   {:>3}/256 |   {}    {}  |  {}   {:>2}",
                i.x4 as u8,
                i.x3 as u8,
                i.x2 as u8,
                i.x1 as u8,
                i.popcount(),
                pattern_weight_256(index),
                o.carry as u8,
                o.sum as u8,
                o.value(),
                self.value_error(index)
            )?;
        }
        Ok(())
    }
}

/// Occurrence weight of a pattern over 256 when each input is a partial
/// product bit, i.e. one with probability 1/4: `3^(4 - popcount)`.
pub const fn pattern_weight_256(index: u8) -> u32 {
    3u32.pow(4 - (index & 0xF).count_ones())
}

/// Rows of the proposed compressor, transcribed in `x4 x3 x2 x1` order as
/// `(carry, sum)`.
const PROPOSED_ROWS: [(u8, u8); 16] = [
    (0, 0), // 0000
    (0, 1), // 0001
    (0, 1), // 0010
    (1, 0), // 0011
    (0, 1), // 0100
    (1, 0), // 0101
    (1, 0), // 0110
    (1, 1), // 0111
    (0, 1), // 1000
    (1, 0), // 1001
    (1, 0), // 1010
    (1, 1), // 1011
    (1, 0), // 1100
    (1, 1), // 1101
    (1, 1), // 1110
    (1, 1), // 1111: value 3, one short
];

/// The single-error approximate compressor: exact everywhere except `1111`,
/// which reports 3.
pub fn proposed_truth_table() -> CompressorTruthTable {
    let mut entries = [CompressorOutputs::default(); 16];
    for (slot, &(c, s)) in entries.iter_mut().zip(PROPOSED_ROWS.iter()) {
        *slot = CompressorOutputs::new(c == 1, s == 1);
    }
    CompressorTruthTable::new("proposed", entries)
}

/// How erroneous rows of a generated table are filled.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum ClampPolicy {
    /// Every error index reports value 3.
    #[default]
    SaturateToThree,
    /// Explicit outputs per error index; unlisted error indices saturate.
    Override(BTreeMap<u8, CompressorOutputs>),
}

/// Builds a table that is exact on every pattern except `error_indices`.
///
/// Pattern `1111` cannot be encoded exactly and must be listed. An index whose
/// resulting output would be exact is rejected, so the error-combination count
/// of the result always equals the number of distinct listed indices.
pub fn table_from_error_pattern(
    error_indices: &[u32],
    clamp: &ClampPolicy,
) -> Result<CompressorTruthTable, TableError> {
    let mut is_error = [false; 16];
    for &i in error_indices {
        if i >= 16 {
            return Err(TableError::IndexOutOfRange(i));
        }
        is_error[i as usize] = true;
    }
    if let ClampPolicy::Override(map) = clamp {
        if let Some(&bad) = map.keys().find(|&&k| k >= 16) {
            return Err(TableError::IndexOutOfRange(bad as u32));
        }
    }
    if !is_error[15] {
        return Err(TableError::UnencodableAllOnes);
    }
    let mut entries = [CompressorOutputs::default(); 16];
    for index in 0..16u8 {
        let exact = index.count_ones() as u8;
        entries[index as usize] = if is_error[index as usize] {
            let out = match clamp {
                ClampPolicy::Override(map) => map
                    .get(&index)
                    .copied()
                    .unwrap_or(CompressorOutputs::from_value(3)),
                ClampPolicy::SaturateToThree => CompressorOutputs::from_value(3),
            };
            if out.value() == exact {
                return Err(TableError::NotAnError {
                    index,
                    value: out.value(),
                });
            }
            out
        } else {
            CompressorOutputs::from_value(exact)
        };
    }
    let mut listed: Vec<u32> = error_indices.to_vec();
    listed.sort_unstable();
    listed.dedup();
    let label = listed
        .iter()
        .map(|i| format!("{i:04b}"))
        .collect::<Vec<_>>()
        .join("+");
    Ok(CompressorTruthTable::new(
        format!("pattern[{label}]"),
        entries,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_compressor_examples() {
        let zero = exact_compressor(CompressorInputs::from_index(0), false);
        assert_eq!(zero, ExactOutputs::default());

        let ones = exact_compressor(CompressorInputs::from_index(0xF), true);
        assert_eq!(
            ones,
            ExactOutputs {
                cout: true,
                carry: true,
                sum: true
            }
        );
        assert_eq!(ones.value(), 5);

        // x1=1, x2=0, x3=1, x4=0, cin=1: first adder sees 1+0+1.
        let mixed = exact_compressor(CompressorInputs::from_index(0b0101), true);
        assert_eq!(
            mixed,
            ExactOutputs {
                cout: true,
                carry: false,
                sum: true
            }
        );
        assert_eq!(mixed.value(), 3);
    }

    #[test]
    fn exact_compressor_sum_identity_all_32() {
        for index in 0..16u8 {
            let inputs = CompressorInputs::from_index(index);
            for cin in [false, true] {
                let out = exact_compressor(inputs, cin);
                assert_eq!(out.value(), inputs.popcount() + cin as u8);
                assert_eq!(out.cout, exact_compressor(inputs, !cin).cout);
            }
        }
    }

    #[test]
    fn proposed_table_rows() {
        let t = proposed_truth_table();
        assert_eq!(t.get(0b1111), CompressorOutputs::new(true, true));
        assert_eq!(t.value_error(0b1111), -1);
        assert_eq!(t.get(0b0000), CompressorOutputs::new(false, false));
        assert_eq!(t.get(0b0110), CompressorOutputs::new(true, false));
        assert_eq!(t.get(0b0110).value(), 2);
        for index in 0..15u8 {
            assert_eq!(
                t.get(index).value() as u32,
                index.count_ones(),
                "row {index:04b}"
            );
        }
        assert_eq!(t.error_indices(), vec![15]);
        assert_eq!(t.error_combinations(), 1);
        assert_eq!(t.error_probability_256(), 1);
    }

    #[test]
    fn probability_column_sums_to_256() {
        let weights: Vec<u32> = (0..16).map(pattern_weight_256).collect();
        assert_eq!(weights.iter().sum::<u32>(), 256);
        assert_eq!(weights[0], 81);
        assert_eq!(weights[1], 27);
        assert_eq!(weights[3], 9);
        assert_eq!(weights[7], 3);
        assert_eq!(weights[15], 1);
    }

    #[test]
    fn csv_golden_and_round_trip() {
        let t = proposed_truth_table();
        let csv = t.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("x4,x3,x2,x1,carry,sum"));
        assert_eq!(lines.next(), Some("0,0,0,0,0,0"));
        assert_eq!(lines.clone().count(), 15);
        assert_eq!(lines.last(), Some("1,1,1,1,1,1"));
        let back = CompressorTruthTable::from_csv("proposed", &csv).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn csv_rejects_malformed() {
        assert!(CompressorTruthTable::from_csv("t", "a,b\n").is_err());
        assert!(CompressorTruthTable::from_csv("t", "").is_err());
        let t = proposed_truth_table().to_csv();
        let missing: String = t.lines().take(16).map(|l| format!("{l}\n")).collect();
        assert!(CompressorTruthTable::from_csv("t", &missing).is_err());
        let dup = format!("{t}0,0,0,0,0,0\n");
        assert!(CompressorTruthTable::from_csv("t", &dup).is_err());
        let bad = t.replace("0,0,0,1,0,1", "0,0,0,1,0,2");
        assert!(matches!(
            CompressorTruthTable::from_csv("t", &bad),
            Err(TableError::Csv { line: 3, .. })
        ));
    }

    #[test]
    fn error_pattern_saturate() {
        let t = table_from_error_pattern(&[15], &ClampPolicy::SaturateToThree).unwrap();
        assert_eq!(t.entries(), proposed_truth_table().entries());

        let four = table_from_error_pattern(&[15, 0, 1, 2], &ClampPolicy::default()).unwrap();
        assert_eq!(four.error_combinations(), 4);
        assert_eq!(four.get(0).value(), 3);
    }

    #[test]
    fn error_pattern_override_and_validation() {
        let mut map = BTreeMap::new();
        map.insert(15u8, CompressorOutputs::from_value(2));
        map.insert(3u8, CompressorOutputs::from_value(1));
        let t = table_from_error_pattern(&[15, 3], &ClampPolicy::Override(map)).unwrap();
        assert_eq!(t.value_error(15), -2);
        assert_eq!(t.value_error(3), -1);
        assert_eq!(t.error_probability_256(), 1 + 9);

        assert_eq!(
            table_from_error_pattern(&[3], &ClampPolicy::default()),
            Err(TableError::UnencodableAllOnes)
        );
        assert_eq!(
            table_from_error_pattern(&[15, 16], &ClampPolicy::default()),
            Err(TableError::IndexOutOfRange(16))
        );
        // popcount 3 saturates to the exact value
        assert!(matches!(
            table_from_error_pattern(&[15, 7], &ClampPolicy::default()),
            Err(TableError::NotAnError { index: 7, .. })
        ));
    }
}
