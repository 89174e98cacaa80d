// SPDX-License-Identifier: Apache-2.0

//! Weight bundles: the JSON interchange format for trained networks, and the
//! decoded [`Network`] that runs on a product LUT.
//!
//! A MAC layer (`conv2d`, `dense`) stores 8-bit weight magnitudes in
//! `weights_b64` (row-major), packed sign bits in `signs_b64` (LSB first, 1 =
//! negative), the real weight step in `weight_scale`, float biases, and the
//! activation step of its output in `scale`. The last layer must be a MAC
//! layer; its accumulators are the network output and its `scale` is unused.

use std::path::Path;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use serde::{Deserialize, Serialize};

use super::layers::{argmax, conv2d, dense, flatten, maxpool2, relu};
use super::quality::GrayImage;
use super::tensor::{numel, AccTensor, QuantizedTensor};
use crate::error::NnError;
use crate::lut::ProductLut;

pub const BUNDLE_VERSION: u32 = 1;

fn default_input_scale() -> f32 {
    1.0 / 255.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Conv2d,
    Dense,
    Relu,
    Maxpool2,
    Flatten,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Classify,
    Denoise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub kind: LayerKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub shape: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_scale: Option<f32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights_b64: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signs_b64: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bias: Vec<f32>,
    #[serde(default)]
    pub padding: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleMetadata {
    pub source: String,
    pub dataset: String,
    pub version: String,
    pub task: Task,
    /// Denoiser predicts the noise, which is subtracted from its input.
    #[serde(default)]
    pub residual: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightBundle {
    pub version: u32,
    pub input_shape: Vec<usize>,
    #[serde(default = "default_input_scale")]
    pub input_scale: f32,
    pub layers: Vec<LayerRecord>,
    pub metadata: BundleMetadata,
}

impl WeightBundle {
    pub fn from_json(text: &str) -> Result<Self, NnError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String, NnError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, NnError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn decode(&self) -> Result<Network, NnError> {
        Network::from_bundle(self)
    }
}

pub fn pack_signs(negative: &[bool]) -> Vec<u8> {
    let mut out = vec![0u8; negative.len().div_ceil(8)];
    for (i, _) in negative.iter().enumerate().filter(|(_, &n)| n) {
        out[i / 8] |= 1 << (i % 8);
    }
    out
}

pub fn unpack_signs(bytes: &[u8], n: usize) -> Result<Vec<bool>, NnError> {
    if bytes.len() != n.div_ceil(8) {
        return Err(NnError::Bundle(format!(
            "{} sign bytes cannot hold exactly {n} signs",
            bytes.len()
        )));
    }
    Ok((0..n).map(|i| bytes[i / 8] >> (i % 8) & 1 == 1).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Conv2d {
        weights: QuantizedTensor,
        bias: Vec<f32>,
        padding: usize,
        out_scale: f32,
    },
    Dense {
        weights: QuantizedTensor,
        bias: Vec<f32>,
        out_scale: f32,
    },
    Relu,
    Maxpool2,
    Flatten,
}

impl Layer {
    pub fn kind(&self) -> LayerKind {
        match self {
            Layer::Conv2d { .. } => LayerKind::Conv2d,
            Layer::Dense { .. } => LayerKind::Dense,
            Layer::Relu => LayerKind::Relu,
            Layer::Maxpool2 => LayerKind::Maxpool2,
            Layer::Flatten => LayerKind::Flatten,
        }
    }

    fn is_mac(&self) -> bool {
        matches!(self, Layer::Conv2d { .. } | Layer::Dense { .. })
    }

    /// Output shape for a given input shape, or a shape error.
    fn out_shape(&self, s: &[usize]) -> Result<Vec<usize>, NnError> {
        let bad = |what: &str| NnError::Bundle(format!("{what} cannot take input of shape {s:?}"));
        match self {
            Layer::Conv2d {
                weights, padding, ..
            } => {
                let (&[c, h, w], &[oc, ic, kh, kw]) = (s, weights.shape.as_slice()) else {
                    return Err(bad("conv2d"));
                };
                let (ph, pw) = (h + 2 * padding, w + 2 * padding);
                if c != ic || kh == 0 || kw == 0 || kh > ph || kw > pw {
                    return Err(bad("conv2d"));
                }
                Ok(vec![oc, ph - kh + 1, pw - kw + 1])
            }
            Layer::Dense { weights, .. } => {
                if numel(s) != weights.shape[1] {
                    return Err(bad("dense"));
                }
                Ok(vec![weights.shape[0]])
            }
            Layer::Relu => Ok(s.to_vec()),
            Layer::Maxpool2 => match *s {
                [c, h, w] if h >= 2 && w >= 2 => Ok(vec![c, h / 2, w / 2]),
                _ => Err(bad("maxpool2")),
            },
            Layer::Flatten => Ok(vec![numel(s)]),
        }
    }
}

fn positive(v: Option<f32>, what: &str, i: usize) -> Result<f32, NnError> {
    match v {
        Some(x) if x.is_finite() && x > 0.0 => Ok(x),
        Some(x) => Err(NnError::Bundle(format!(
            "layer {i}: {what} must be positive, got {x}"
        ))),
        None => Err(NnError::Bundle(format!("layer {i}: missing {what}"))),
    }
}

fn decode_layer(i: usize, rec: &LayerRecord, last: bool) -> Result<Layer, NnError> {
    let mac = |rank: usize| -> Result<(QuantizedTensor, Vec<f32>, f32), NnError> {
        if rec.shape.len() != rank || rec.shape.contains(&0) {
            return Err(NnError::Bundle(format!(
                "layer {i}: weight shape must have {rank} non-zero dims, got {:?}",
                rec.shape
            )));
        }
        let n = numel(&rec.shape);
        let b64 = |field: &Option<String>, name: &str| -> Result<Vec<u8>, NnError> {
            let text = field
                .as_deref()
                .ok_or_else(|| NnError::Bundle(format!("layer {i}: missing {name}")))?;
            B64.decode(text)
                .map_err(|e| NnError::Bundle(format!("layer {i}: {name}: {e}")))
        };
        let mags = b64(&rec.weights_b64, "weights_b64")?;
        if mags.len() != n {
            return Err(NnError::Bundle(format!(
                "layer {i}: {} weight bytes for shape {:?}",
                mags.len(),
                rec.shape
            )));
        }
        let signs = match &rec.signs_b64 {
            Some(_) => unpack_signs(&b64(&rec.signs_b64, "signs_b64")?, n)?,
            None => vec![false; n],
        };
        if rec.bias.len() != rec.shape[0] {
            return Err(NnError::Bundle(format!(
                "layer {i}: {} biases for {} outputs",
                rec.bias.len(),
                rec.shape[0]
            )));
        }
        if rec.bias.iter().any(|b| !b.is_finite()) {
            return Err(NnError::Bundle(format!("layer {i}: non-finite bias")));
        }
        let w_scale = positive(rec.weight_scale, "weight_scale", i)?;
        let weights = QuantizedTensor::new(rec.shape.clone(), mags, signs, w_scale)?;
        let out_scale = if last {
            rec.scale.unwrap_or(1.0)
        } else {
            positive(rec.scale, "scale", i)?
        };
        Ok((weights, rec.bias.clone(), out_scale))
    };
    Ok(match rec.kind {
        LayerKind::Conv2d => {
            let (weights, bias, out_scale) = mac(4)?;
            Layer::Conv2d {
                weights,
                bias,
                padding: rec.padding,
                out_scale,
            }
        }
        LayerKind::Dense => {
            let (weights, bias, out_scale) = mac(2)?;
            Layer::Dense {
                weights,
                bias,
                out_scale,
            }
        }
        LayerKind::Relu => Layer::Relu,
        LayerKind::Maxpool2 => Layer::Maxpool2,
        LayerKind::Flatten => Layer::Flatten,
    })
}

/// Raw output of the final MAC layer; `real ≈ acc · real_scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkOutput {
    pub acc: AccTensor,
    pub real_scale: f64,
}

enum State {
    Q(QuantizedTensor),
    Acc {
        acc: AccTensor,
        real_scale: f64,
        out_scale: f32,
    },
}

impl State {
    fn into_quantized(self) -> Result<QuantizedTensor, NnError> {
        match self {
            State::Q(q) => Ok(q),
            State::Acc {
                acc,
                real_scale,
                out_scale,
            } => acc.requantize(real_scale / out_scale as f64, out_scale),
        }
    }
}

fn bias_to_acc(bias: &[f32], real_scale: f64) -> Result<Vec<i32>, NnError> {
    bias.iter()
        .map(|&b| {
            let v = (b as f64 / real_scale).round();
            if v.abs() > i32::MAX as f64 {
                Err(NnError::Overflow("bias"))
            } else {
                Ok(v as i32)
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub input_shape: Vec<usize>,
    pub input_scale: f32,
    pub layers: Vec<Layer>,
    pub metadata: BundleMetadata,
}

impl Network {
    pub fn from_bundle(b: &WeightBundle) -> Result<Self, NnError> {
        if b.version != BUNDLE_VERSION {
            return Err(NnError::Bundle(format!(
                "unsupported bundle version {}, expected {BUNDLE_VERSION}",
                b.version
            )));
        }
        if !(b.input_scale.is_finite() && b.input_scale > 0.0) {
            return Err(NnError::Bundle(format!(
                "input_scale must be positive, got {}",
                b.input_scale
            )));
        }
        let n = b.layers.len();
        let layers = b
            .layers
            .iter()
            .enumerate()
            .map(|(i, rec)| decode_layer(i, rec, i + 1 == n))
            .collect::<Result<Vec<_>, _>>()?;
        let net = Self {
            input_shape: b.input_shape.clone(),
            input_scale: b.input_scale,
            layers,
            metadata: b.metadata.clone(),
        };
        // zero spatial dims mean "any size" for purely convolutional nets
        let probe: Vec<usize> = if net.fully_convolutional() {
            net.input_shape
                .iter()
                .map(|&d| if d == 0 { 64 } else { d })
                .collect()
        } else {
            net.input_shape.clone()
        };
        net.output_shape(&probe)?;
        Ok(net)
    }

    pub fn to_bundle(&self) -> WeightBundle {
        let layers = self
            .layers
            .iter()
            .map(|l| {
                let mut rec = LayerRecord {
                    kind: l.kind(),
                    shape: Vec::new(),
                    scale: None,
                    weight_scale: None,
                    weights_b64: None,
                    signs_b64: None,
                    bias: Vec::new(),
                    padding: 0,
                };
                let (w, bias, out_scale) = match l {
                    Layer::Conv2d {
                        weights,
                        bias,
                        padding,
                        out_scale,
                    } => {
                        rec.padding = *padding;
                        (weights, bias, out_scale)
                    }
                    Layer::Dense {
                        weights,
                        bias,
                        out_scale,
                    } => (weights, bias, out_scale),
                    _ => return rec,
                };
                rec.shape = w.shape.clone();
                rec.scale = Some(*out_scale);
                rec.weight_scale = Some(w.scale);
                rec.weights_b64 = Some(B64.encode(&w.magnitudes));
                rec.signs_b64 = Some(B64.encode(pack_signs(&w.negative)));
                rec.bias = bias.clone();
                rec
            })
            .collect();
        WeightBundle {
            version: BUNDLE_VERSION,
            input_shape: self.input_shape.clone(),
            input_scale: self.input_scale,
            layers,
            metadata: self.metadata.clone(),
        }
    }

    /// Purely convolutional networks accept any spatial size.
    pub fn fully_convolutional(&self) -> bool {
        self.layers
            .iter()
            .all(|l| matches!(l, Layer::Conv2d { .. } | Layer::Relu))
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>, NnError> {
        if !self.layers.last().is_some_and(Layer::is_mac) {
            return Err(NnError::Bundle("last layer must be conv2d or dense".into()));
        }
        self.layers
            .iter()
            .try_fold(input.to_vec(), |s, l| l.out_shape(&s))
    }

    fn check_input(&self, shape: &[usize]) -> Result<(), NnError> {
        let ok = if self.fully_convolutional() {
            shape.len() == 3 && self.input_shape.first() == shape.first()
        } else {
            shape == self.input_shape.as_slice()
        };
        if !ok {
            return Err(NnError::Shape(format!(
                "network expects input {:?}, got {shape:?}",
                self.input_shape
            )));
        }
        Ok(())
    }

    fn forward(
        &self,
        input: &QuantizedTensor,
        lut: &ProductLut,
        upto: usize,
    ) -> Result<State, NnError> {
        self.check_input(&input.shape)?;
        let mut state = State::Q(input.clone());
        for layer in &self.layers[..upto] {
            state = match layer {
                Layer::Conv2d {
                    weights,
                    bias,
                    padding,
                    out_scale,
                } => {
                    let x = state.into_quantized()?;
                    let real_scale = x.scale as f64 * weights.scale as f64;
                    let b = bias_to_acc(bias, real_scale)?;
                    State::Acc {
                        acc: conv2d(&x, weights, &b, *padding, lut)?,
                        real_scale,
                        out_scale: *out_scale,
                    }
                }
                Layer::Dense {
                    weights,
                    bias,
                    out_scale,
                } => {
                    let x = state.into_quantized()?;
                    let real_scale = x.scale as f64 * weights.scale as f64;
                    let b = bias_to_acc(bias, real_scale)?;
                    State::Acc {
                        acc: dense(&x, weights, &b, lut)?,
                        real_scale,
                        out_scale: *out_scale,
                    }
                }
                Layer::Relu => State::Q(relu(state.into_quantized()?)),
                Layer::Maxpool2 => State::Q(maxpool2(&state.into_quantized()?)?),
                Layer::Flatten => State::Q(flatten(state.into_quantized()?)),
            };
        }
        Ok(state)
    }

    pub fn infer(
        &self,
        input: &QuantizedTensor,
        lut: &ProductLut,
    ) -> Result<NetworkOutput, NnError> {
        match self.forward(input, lut, self.layers.len())? {
            State::Acc {
                acc, real_scale, ..
            } => Ok(NetworkOutput { acc, real_scale }),
            State::Q(_) => Err(NnError::Bundle("last layer must be conv2d or dense".into())),
        }
    }

    fn pixels_to_input(
        &self,
        shape: Vec<usize>,
        pixels: &[u8],
    ) -> Result<QuantizedTensor, NnError> {
        QuantizedTensor::from_pixels(shape, pixels, self.input_scale)
    }

    /// Class index for one 8-bit image; ties go to the lower class.
    pub fn classify(&self, pixels: &[u8], lut: &ProductLut) -> Result<usize, NnError> {
        let x = self.pixels_to_input(self.input_shape.clone(), pixels)?;
        let out = self.infer(&x, lut)?;
        argmax(&out.acc.values).ok_or_else(|| NnError::Bundle("empty output".into()))
    }

    /// Runs a single-channel image-to-image network. Output pixels are
    /// `clamp(round(255 · y))` where `y` is the network output in units of
    /// full scale, or the noisy input minus it for residual networks.
    pub fn denoise(&self, noisy: &GrayImage, lut: &ProductLut) -> Result<GrayImage, NnError> {
        let shape = vec![1, noisy.height, noisy.width];
        let x = self.pixels_to_input(shape.clone(), &noisy.pixels)?;
        let out = self.infer(&x, lut)?;
        if out.acc.shape != shape {
            return Err(NnError::Shape(format!(
                "denoiser maps {shape:?} to {:?}",
                out.acc.shape
            )));
        }
        let pixels = out
            .acc
            .values
            .iter()
            .zip(&noisy.pixels)
            .map(|(&a, &p)| {
                let y = a as f64 * out.real_scale;
                let v = if self.metadata.residual {
                    p as f64 - 255.0 * y
                } else {
                    255.0 * y
                };
                v.round().clamp(0.0, 255.0) as u8
            })
            .collect();
        GrayImage::new(noisy.width, noisy.height, pixels)
    }

    /// Sets every inner MAC layer's output scale so that the largest
    /// activation seen over `inputs` maps to magnitude 255. Layers are
    /// fixed in order, each using the scales already chosen upstream.
    pub fn calibrate(
        &mut self,
        inputs: &[QuantizedTensor],
        lut: &ProductLut,
    ) -> Result<(), NnError> {
        let last = self.layers.len().saturating_sub(1);
        for i in 0..last {
            if !self.layers[i].is_mac() {
                continue;
            }
            let mut peak = 0.0f64;
            for x in inputs {
                if let State::Acc {
                    acc, real_scale, ..
                } = self.forward(x, lut, i + 1)?
                {
                    let m = acc
                        .values
                        .iter()
                        .map(|v| v.unsigned_abs())
                        .max()
                        .unwrap_or(0);
                    peak = peak.max(m as f64 * real_scale);
                }
            }
            let s = if peak > 0.0 {
                (peak / 255.0) as f32
            } else {
                1.0
            };
            match &mut self.layers[i] {
                Layer::Conv2d { out_scale, .. } | Layer::Dense { out_scale, .. } => *out_scale = s,
                _ => unreachable!(),
            }
        }
        Ok(())
    }
}
