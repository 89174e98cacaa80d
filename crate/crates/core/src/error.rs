// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NetlistError {
    #[error("gate {gate} ({kind}) expects {expected} inputs, got {got}")]
    FanIn {
        gate: usize,
        kind: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("gate {gate} references unknown node {reference}")]
    Unresolved { gate: usize, reference: String },
    #[error("netlist contains a combinational cycle through gate {0}")]
    Cycle(usize),
    #[error("expected {expected} primary input values, got {got}")]
    InputCount { expected: usize, got: usize },
    #[error("netlist has no output named `{0}`")]
    MissingOutput(String),
    #[error("netlist has no outputs")]
    NoOutputs,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TableError {
    #[error("pattern index {0} is outside 0..16")]
    IndexOutOfRange(u32),
    #[error("pattern 1111 has popcount 4 and must be listed as an error index")]
    UnencodableAllOnes,
    #[error("pattern {index:04b} is listed as an error but its output {value} is exact")]
    NotAnError { index: u8, value: u8 },
    #[error("csv line {line}: {msg}")]
    Csv { line: usize, msg: String },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("truncation width {0} exceeds 7")]
    TruncationWidth(usize),
    #[error("exact column threshold {0} exceeds 14")]
    Threshold(usize),
    #[error("unknown multiplier family `{0}`")]
    UnknownFamily(String),
    #[error("{0} requires the DESIGN2_TRUNCATED family")]
    NotTruncated(&'static str),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("metric requires a non-empty case sequence")]
    Empty,
    #[error("normalizing maximum must be positive, got {0}")]
    NonPositiveMax(i64),
}

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("accumulator overflow in {0}")]
    Overflow(&'static str),
    #[error("lookup table must hold 65536 entries, got {0}")]
    LutSize(usize),
    #[error("bundle: {0}")]
    Bundle(String),
    #[error("idx: {0}")]
    Idx(String),
    #[error("pgm: {0}")]
    Pgm(String),
    #[error("image of {width}x{height} is smaller than the {window}x{window} window")]
    TooSmall {
        width: usize,
        height: usize,
        window: usize,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlanError {
    #[error("stage {stage} column {column}: placements consume {consumed} bits but {available} are present")]
    BitCount {
        stage: usize,
        column: usize,
        consumed: usize,
        available: usize,
    },
    #[error("stage {stage} column {column}: {placement} is not allowed for this family")]
    Placement {
        stage: usize,
        column: usize,
        placement: &'static str,
    },
    #[error("plan leaves column {column} with {height} bits after the final stage")]
    Unreduced { column: usize, height: usize },
    #[error(transparent)]
    Config(#[from] ConfigError),
}
