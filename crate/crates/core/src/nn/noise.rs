// SPDX-License-Identifier: Apache-2.0

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::quality::GrayImage;
use crate::error::NnError;

pub const DEFAULT_SEED: u64 = 42;

/// Additive white Gaussian noise in pixel units, rounded and clamped to
/// `0..=255`. Same seed, same image.
pub fn add_gaussian_noise(img: &GrayImage, sigma: f64, seed: u64) -> Result<GrayImage, NnError> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(NnError::Shape(format!(
            "noise sigma must be non-negative, got {sigma}"
        )));
    }
    let dist = Normal::new(0.0, sigma)
        .map_err(|e| NnError::Shape(format!("invalid noise sigma {sigma}: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pixels = img
        .pixels
        .iter()
        .map(|&p| (p as f64 + dist.sample(&mut rng)).round().clamp(0.0, 255.0) as u8)
        .collect();
    GrayImage::new(img.width, img.height, pixels)
}
