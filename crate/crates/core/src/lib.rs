// SPDX-License-Identifier: Apache-2.0

//! Bit-exact behavioral models of approximate 4:2 compressors and 8x8
//! unsigned multipliers built from them.
//!
//! The crate covers the compressor cell (truth tables and gate netlists),
//! the partial-product reduction tree, exhaustive error metrics over all
//! 65,536 operand pairs, and a small quantized inference engine whose
//! multiplications go through a product lookup table.

pub mod cli;
pub mod compressor;
pub mod error;
pub mod lut;
pub mod metrics;
pub mod multiplier;
pub mod nn;

pub use compressor::{proposed_truth_table, CompressorTruthTable};
pub use lut::ProductLut;
pub use metrics::{exhaustive_sweep, ErrorReport};
pub use multiplier::{Family, Multiplier, MultiplierConfig};
