// SPDX-License-Identifier: Apache-2.0

//! Quantized inference where every multiply is a lookup into a
//! [`ProductLut`](crate::lut::ProductLut).

pub mod bundle;
pub mod io;
pub mod layers;
pub mod noise;
pub mod quality;
pub mod tensor;

pub use bundle::{
    BundleMetadata, Layer, LayerKind, LayerRecord, Network, NetworkOutput, Task, WeightBundle,
};
pub use layers::{argmax, conv2d, dense, flatten, maxpool2, relu};
pub use noise::add_gaussian_noise;
pub use quality::{psnr, ssim, GrayImage, Psnr};
pub use tensor::{quantize, AccTensor, QuantizedTensor};
