// SPDX-License-Identifier: Apache-2.0

//! Integer layers. Every product goes through a [`ProductLut`] on the
//! magnitudes, with the sign applied afterwards; sums are exact.

use rayon::prelude::*;

use super::tensor::{AccTensor, QuantizedTensor};
use crate::error::NnError;
use crate::lut::ProductLut;

fn shape_err(msg: String) -> NnError {
    NnError::Shape(msg)
}

fn to_i32(v: i64, layer: &'static str) -> Result<i32, NnError> {
    i32::try_from(v).map_err(|_| NnError::Overflow(layer))
}

/// Signed product of elements of two sign-magnitude tensors, weight first.
#[inline]
fn mac_term(
    lut: &ProductLut,
    w: &QuantizedTensor,
    wi: usize,
    x: &QuantizedTensor,
    xi: usize,
) -> i64 {
    let p = lut.get(w.magnitudes[wi], x.magnitudes[xi]) as i64;
    if w.negative[wi] != x.negative[xi] {
        -p
    } else {
        p
    }
}

/// Stride-1 2-D convolution with symmetric zero padding.
///
/// `input` is `[C, H, W]`, `weights` `[OC, C, KH, KW]`, `bias` holds one
/// accumulator-domain value per output channel. Output is
/// `[OC, H + 2p - KH + 1, W + 2p - KW + 1]`.
pub fn conv2d(
    input: &QuantizedTensor,
    weights: &QuantizedTensor,
    bias: &[i32],
    padding: usize,
    lut: &ProductLut,
) -> Result<AccTensor, NnError> {
    let &[c, h, w] = input.shape.as_slice() else {
        return Err(shape_err(format!(
            "conv2d input must be [C,H,W], got {:?}",
            input.shape
        )));
    };
    let &[oc, ic, kh, kw] = weights.shape.as_slice() else {
        return Err(shape_err(format!(
            "conv2d weights must be [OC,C,KH,KW], got {:?}",
            weights.shape
        )));
    };
    if ic != c {
        return Err(shape_err(format!(
            "conv2d expects {ic} input channels, got {c}"
        )));
    }
    if bias.len() != oc {
        return Err(shape_err(format!(
            "conv2d bias has {} entries for {oc} channels",
            bias.len()
        )));
    }
    let (ph, pw) = (h + 2 * padding, w + 2 * padding);
    if kh == 0 || kw == 0 || kh > ph || kw > pw {
        return Err(shape_err(format!(
            "kernel {kh}x{kw} does not fit padded input {ph}x{pw}"
        )));
    }
    let (oh, ow) = (ph - kh + 1, pw - kw + 1);
    let mut out = vec![0i32; oc * oh * ow];

    out.par_chunks_mut(oh * ow)
        .enumerate()
        .try_for_each(|(o, plane)| -> Result<(), NnError> {
            for y in 0..oh {
                for x in 0..ow {
                    let mut acc = bias[o] as i64;
                    for ci in 0..c {
                        for ky in 0..kh {
                            let iy = (y + ky).wrapping_sub(padding);
                            if iy >= h {
                                continue;
                            }
                            for kx in 0..kw {
                                let ix = (x + kx).wrapping_sub(padding);
                                if ix >= w {
                                    continue;
                                }
                                let wi = ((o * c + ci) * kh + ky) * kw + kx;
                                let xi = (ci * h + iy) * w + ix;
                                acc += mac_term(lut, weights, wi, input, xi);
                            }
                        }
                    }
                    plane[y * ow + x] = to_i32(acc, "conv2d")?;
                }
            }
            Ok(())
        })?;

    Ok(AccTensor {
        shape: vec![oc, oh, ow],
        values: out,
    })
}

/// Fully connected layer; `weights` is `[OUT, IN]`, `input` any shape with
/// `IN` elements.
pub fn dense(
    input: &QuantizedTensor,
    weights: &QuantizedTensor,
    bias: &[i32],
    lut: &ProductLut,
) -> Result<AccTensor, NnError> {
    let &[out_n, in_n] = weights.shape.as_slice() else {
        return Err(shape_err(format!(
            "dense weights must be [OUT,IN], got {:?}",
            weights.shape
        )));
    };
    if input.len() != in_n {
        return Err(shape_err(format!(
            "dense expects {in_n} inputs, got {}",
            input.len()
        )));
    }
    if bias.len() != out_n {
        return Err(shape_err(format!(
            "dense bias has {} entries for {out_n} outputs",
            bias.len()
        )));
    }
    let values = (0..out_n)
        .into_par_iter()
        .map(|o| {
            let acc = (0..in_n).fold(bias[o] as i64, |acc, i| {
                acc + mac_term(lut, weights, o * in_n + i, input, i)
            });
            to_i32(acc, "dense")
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(AccTensor {
        shape: vec![out_n],
        values,
    })
}

pub fn relu(mut t: QuantizedTensor) -> QuantizedTensor {
    for (m, n) in t.magnitudes.iter_mut().zip(t.negative.iter_mut()) {
        if *n {
            *m = 0;
            *n = false;
        }
    }
    t
}

/// 2x2 max pooling, stride 2, trailing odd row/column dropped.
pub fn maxpool2(t: &QuantizedTensor) -> Result<QuantizedTensor, NnError> {
    let &[c, h, w] = t.shape.as_slice() else {
        return Err(shape_err(format!(
            "maxpool2 input must be [C,H,W], got {:?}",
            t.shape
        )));
    };
    let (oh, ow) = (h / 2, w / 2);
    if oh == 0 || ow == 0 {
        return Err(shape_err(format!("maxpool2 input {h}x{w} is too small")));
    }
    let mut mags = Vec::with_capacity(c * oh * ow);
    let mut negs = Vec::with_capacity(c * oh * ow);
    for ci in 0..c {
        for y in 0..oh {
            for x in 0..ow {
                let best = [(0, 0), (0, 1), (1, 0), (1, 1)]
                    .iter()
                    .map(|(dy, dx)| (ci * h + 2 * y + dy) * w + 2 * x + dx)
                    .max_by_key(|&i| t.signed(i))
                    .expect("window is non-empty");
                mags.push(t.magnitudes[best]);
                negs.push(t.negative[best]);
            }
        }
    }
    QuantizedTensor::new(vec![c, oh, ow], mags, negs, t.scale)
}

pub fn flatten(t: QuantizedTensor) -> QuantizedTensor {
    let n = t.len();
    t.reshape(vec![n]).expect("same element count")
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[i32]) -> Option<usize> {
    let mut best: Option<(usize, i32)> = None;
    for (i, &v) in values.iter().enumerate() {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::tensor::quantize;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> QuantizedTensor {
        let n = shape.iter().product();
        let mags = (0..n).map(|_| rng.random()).collect();
        let negs = (0..n).map(|_| rng.random()).collect();
        QuantizedTensor::new(shape.to_vec(), mags, negs, 1.0).unwrap()
    }

    /// Plain integer convolution with explicit padding checks.
    fn conv_reference(x: &QuantizedTensor, w: &QuantizedTensor, b: &[i32], pad: i64) -> Vec<i64> {
        let (c, h, wd) = (x.shape[0] as i64, x.shape[1] as i64, x.shape[2] as i64);
        let (oc, kh, kw) = (w.shape[0] as i64, w.shape[2] as i64, w.shape[3] as i64);
        let (oh, ow) = (h + 2 * pad - kh + 1, wd + 2 * pad - kw + 1);
        let mut out = Vec::new();
        for o in 0..oc {
            for y in 0..oh {
                for xx in 0..ow {
                    let mut s = b[o as usize] as i64;
                    for ci in 0..c {
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let (iy, ix) = (y + ky - pad, xx + kx - pad);
                                if iy < 0 || ix < 0 || iy >= h || ix >= wd {
                                    continue;
                                }
                                let wv =
                                    w.signed((((o * c + ci) * kh + ky) * kw + kx) as usize) as i64;
                                let xv = x.signed(((ci * h + iy) * wd + ix) as usize) as i64;
                                s += wv * xv;
                            }
                        }
                    }
                    out.push(s);
                }
            }
        }
        out
    }

    #[test]
    fn conv_matches_integer_reference() {
        let lut = ProductLut::exact();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for pad in 0..=2 {
            let x = random_tensor(&mut rng, &[2, 6, 5]);
            let w = random_tensor(&mut rng, &[3, 2, 3, 3]);
            let b = vec![5, -100, 0];
            let got = conv2d(&x, &w, &b, pad, &lut).unwrap();
            let want = conv_reference(&x, &w, &b, pad as i64);
            assert_eq!(
                got.values.iter().map(|&v| v as i64).collect::<Vec<_>>(),
                want
            );
            assert_eq!(got.shape, vec![3, 6 + 2 * pad - 2, 5 + 2 * pad - 2]);
        }
    }

    #[test]
    fn conv_small_example() {
        // 1x3x3 input, single 2x2 kernel of ones
        let x =
            QuantizedTensor::from_pixels(vec![1, 3, 3], &[1, 2, 3, 4, 5, 6, 7, 8, 9], 1.0).unwrap();
        let w = QuantizedTensor::from_pixels(vec![1, 1, 2, 2], &[1, 1, 1, 1], 1.0).unwrap();
        let out = conv2d(&x, &w, &[0], 0, &ProductLut::exact()).unwrap();
        assert_eq!(out.values, vec![12, 16, 24, 28]);
    }

    #[test]
    fn conv_uses_lut() {
        let lut = ProductLut::from_fn(|a, b| {
            if a == 2 && b == 3 {
                100
            } else {
                a as u16 * b as u16
            }
        });
        let x = QuantizedTensor::new(vec![1, 1, 2], vec![3, 3], vec![false, true], 1.0).unwrap();
        let w = QuantizedTensor::from_pixels(vec![1, 1, 1, 1], &[2], 1.0).unwrap();
        let out = conv2d(&x, &w, &[1], 0, &lut).unwrap();
        assert_eq!(out.values, vec![101, -99]);
    }

    #[test]
    fn conv_shape_errors() {
        let lut = ProductLut::exact();
        let x = QuantizedTensor::from_pixels(vec![1, 2, 2], &[0; 4], 1.0).unwrap();
        let w = QuantizedTensor::from_pixels(vec![1, 2, 1, 1], &[0; 2], 1.0).unwrap();
        assert!(matches!(
            conv2d(&x, &w, &[0], 0, &lut),
            Err(NnError::Shape(_))
        ));
        let w = QuantizedTensor::from_pixels(vec![1, 1, 3, 3], &[0; 9], 1.0).unwrap();
        assert!(conv2d(&x, &w, &[0], 0, &lut).is_err());
        assert!(conv2d(&x, &w, &[0], 1, &lut).is_ok());
        assert!(conv2d(&x, &w, &[0, 0], 1, &lut).is_err());
    }

    #[test]
    fn overflow_is_reported() {
        let n = 40_000;
        let x = QuantizedTensor::from_pixels(vec![n], &vec![255; n], 1.0).unwrap();
        let w = QuantizedTensor::from_pixels(vec![1, n], &vec![255; n], 1.0).unwrap();
        assert!(matches!(
            dense(&x, &w, &[0], &ProductLut::exact()),
            Err(NnError::Overflow("dense"))
        ));
    }

    #[test]
    fn dense_example() {
        let x = quantize(&[1.0, -0.5], &[2]).unwrap();
        let w = QuantizedTensor::new(
            vec![2, 2],
            vec![1, 2, 3, 4],
            vec![false, true, false, false],
            1.0,
        )
        .unwrap();
        let out = dense(&x, &w, &[10, 0], &ProductLut::exact()).unwrap();
        // x = [255, -128]
        assert_eq!(out.values, vec![10 + 255 + 256, 765 - 512]);
    }

    #[test]
    fn pooling_and_relu() {
        let t = QuantizedTensor::new(
            vec![1, 3, 3],
            vec![5, 1, 9, 2, 7, 9, 9, 9, 9],
            vec![true, false, false, false, true, false, false, false, false],
            0.5,
        )
        .unwrap();
        let p = maxpool2(&t).unwrap();
        assert_eq!(p.shape, vec![1, 1, 1]);
        assert_eq!((p.magnitudes[0], p.negative[0]), (2, false));

        let all_neg =
            QuantizedTensor::new(vec![1, 2, 2], vec![4, 3, 9, 8], vec![true; 4], 1.0).unwrap();
        let p = maxpool2(&all_neg).unwrap();
        assert_eq!((p.magnitudes[0], p.negative[0]), (3, true));

        let r = relu(t);
        assert_eq!(r.magnitudes[..5], [0, 1, 9, 2, 0]);
        assert!(r.negative.iter().all(|n| !n));
    }

    #[test]
    fn argmax_ties_and_empty() {
        assert_eq!(argmax(&[1, 5, 5, 2]), Some(1));
        assert_eq!(argmax(&[-3, -3]), Some(0));
        assert_eq!(argmax(&[]), None);
    }

    fn luts() -> &'static (ProductLut, ProductLut, i64) {
        static LUTS: std::sync::OnceLock<(ProductLut, ProductLut, i64)> =
            std::sync::OnceLock::new();
        LUTS.get_or_init(|| {
            let cfg = crate::multiplier::MultiplierConfig::proposed();
            let m = crate::multiplier::Multiplier::new(cfg).unwrap();
            let approx = ProductLut::from_multiplier(&m);
            let exact = ProductLut::exact();
            let max_ed = approx
                .entries()
                .iter()
                .zip(exact.entries())
                .map(|(a, e)| (*a as i64 - *e as i64).abs())
                .max()
                .unwrap();
            (approx, exact, max_ed)
        })
    }

    proptest! {
        #[test]
        fn dense_error_bounded_by_max_ed(seed in any::<u64>(), n in 1usize..64) {
            let (approx, exact, max_ed) = luts();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = random_tensor(&mut rng, &[n]);
            let w = random_tensor(&mut rng, &[3, n]);
            let a = dense(&x, &w, &[0; 3], approx).unwrap();
            let e = dense(&x, &w, &[0; 3], exact).unwrap();
            for (av, ev) in a.values.iter().zip(&e.values) {
                prop_assert!(((*av as i64) - (*ev as i64)).abs() <= n as i64 * *max_ed);
            }
        }

        #[test]
        fn argmax_is_a_maximum(v in prop::collection::vec(any::<i32>(), 1..50)) {
            let i = argmax(&v).unwrap();
            prop_assert!(v.iter().all(|&x| x <= v[i]));
            prop_assert!(v[..i].iter().all(|&x| x < v[i]));
        }
    }
}
