// SPDX-License-Identifier: Apache-2.0

use crate::error::NnError;

/// Sign-magnitude 8-bit tensor: `real ≈ (negative ? -1 : 1) · magnitude · scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedTensor {
    pub shape: Vec<usize>,
    pub magnitudes: Vec<u8>,
    pub negative: Vec<bool>,
    pub scale: f32,
}

pub(crate) fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl QuantizedTensor {
    pub fn new(
        shape: Vec<usize>,
        magnitudes: Vec<u8>,
        negative: Vec<bool>,
        scale: f32,
    ) -> Result<Self, NnError> {
        let n = numel(&shape);
        if magnitudes.len() != n || negative.len() != n {
            return Err(NnError::Shape(format!(
                "shape {shape:?} holds {n} elements, got {} magnitudes and {} signs",
                magnitudes.len(),
                negative.len()
            )));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(NnError::Shape(format!(
                "scale must be positive, got {scale}"
            )));
        }
        let negative = negative
            .into_iter()
            .zip(&magnitudes)
            .map(|(s, &m)| s && m != 0)
            .collect();
        Ok(Self {
            shape,
            magnitudes,
            negative,
            scale,
        })
    }

    /// Non-negative tensor straight from 8-bit pixels.
    pub fn from_pixels(shape: Vec<usize>, pixels: &[u8], scale: f32) -> Result<Self, NnError> {
        Self::new(shape, pixels.to_vec(), vec![false; pixels.len()], scale)
    }

    pub fn len(&self) -> usize {
        self.magnitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.magnitudes.is_empty()
    }

    /// Signed magnitude of element `i`.
    #[inline]
    pub fn signed(&self, i: usize) -> i32 {
        let m = self.magnitudes[i] as i32;
        if self.negative[i] {
            -m
        } else {
            m
        }
    }

    pub fn dequantize(&self) -> Vec<f32> {
        (0..self.len())
            .map(|i| self.signed(i) as f32 * self.scale)
            .collect()
    }

    pub fn reshape(mut self, shape: Vec<usize>) -> Result<Self, NnError> {
        if numel(&shape) != self.len() {
            return Err(NnError::Shape(format!(
                "cannot reshape {:?} to {shape:?}",
                self.shape
            )));
        }
        self.shape = shape;
        Ok(self)
    }
}

/// Symmetric per-tensor quantization: `scale = max|v| / 255`,
/// `magnitude = round(|v| · 255 / max|v|)`, signs kept separately. An
/// all-zero tensor gets scale 1.
pub fn quantize(values: &[f32], shape: &[usize]) -> Result<QuantizedTensor, NnError> {
    if numel(shape) != values.len() {
        return Err(NnError::Shape(format!(
            "shape {shape:?} does not hold {} values",
            values.len()
        )));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(NnError::Shape(format!(
            "cannot quantize non-finite value {v}"
        )));
    }
    let max = values.iter().fold(0.0f32, |m, v| m.max(v.abs()));
    if max == 0.0 {
        return QuantizedTensor::new(
            shape.to_vec(),
            vec![0; values.len()],
            vec![false; values.len()],
            1.0,
        );
    }
    let magnitudes = values
        .iter()
        .map(|v| (v.abs() as f64 * 255.0 / max as f64).round().min(255.0) as u8)
        .collect();
    let negative = values.iter().map(|&v| v < 0.0).collect();
    QuantizedTensor::new(shape.to_vec(), magnitudes, negative, max / 255.0)
}

/// Exact 32-bit accumulators of a MAC layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccTensor {
    pub shape: Vec<usize>,
    pub values: Vec<i32>,
}

impl AccTensor {
    /// Maps accumulators to 8-bit magnitudes: `round(|acc| · multiplier)`,
    /// saturating at 255, rounding halves away from zero.
    pub fn requantize(&self, multiplier: f64, scale: f32) -> Result<QuantizedTensor, NnError> {
        let magnitudes = self
            .values
            .iter()
            .map(|&v| ((v as f64).abs() * multiplier).round().min(255.0) as u8)
            .collect();
        let negative = self.values.iter().map(|&v| v < 0).collect();
        QuantizedTensor::new(self.shape.clone(), magnitudes, negative, scale)
    }
}
