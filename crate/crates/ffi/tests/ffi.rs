// SPDX-License-Identifier: Apache-2.0

use std::ffi::{c_char, CStr};
use std::ptr;

use axmul_ffi::*;
use sha2::{Digest, Sha256};

const PROPOSED_LUT_SHA256: &str =
    "2fd5eecef9e446971249c3f0bb47a69d16f576970b58d7072722c67f198dec7a";

fn last_error() -> String {
    let mut buf = [0 as c_char; 256];
    let n = unsafe { axm_last_error(buf.as_mut_ptr(), buf.len()) };
    assert!(n > 0, "no error recorded");
    unsafe { CStr::from_ptr(buf.as_ptr()) }
        .to_string_lossy()
        .into_owned()
}

struct Handle(*mut AxmMultiplier);

impl Drop for Handle {
    fn drop(&mut self) {
        unsafe { axm_multiplier_free(self.0) }
    }
}

fn new(family: u32, param: u32) -> Handle {
    let mut h = ptr::null_mut();
    let s = unsafe { axm_multiplier_new(family, param, &mut h) };
    assert_eq!(s, AxmStatus::AxmOk);
    assert!(!h.is_null());
    Handle(h)
}

#[test]
fn eval_matches_known_products() {
    let exact = new(AXM_FAMILY_EXACT, AXM_DEFAULT_PARAM);
    let prop = new(AXM_FAMILY_PROPOSED, AXM_DEFAULT_PARAM);
    let mut out = 0u16;
    unsafe {
        assert_eq!(
            axm_multiplier_eval(exact.0, 255, 255, &mut out),
            AxmStatus::AxmOk
        );
        assert_eq!(out, 65025);
        assert_eq!(
            axm_multiplier_eval(prop.0, 255, 255, &mut out),
            AxmStatus::AxmOk
        );
        assert_eq!(out, 59337);
    }
}

#[test]
fn lut_digest_and_small_buffer() {
    let h = new(AXM_FAMILY_PROPOSED, AXM_DEFAULT_PARAM);
    let mut buf = vec![0u16; AXM_LUT_ENTRIES];
    let s = unsafe { axm_multiplier_build_lut(h.0, buf.as_mut_ptr(), buf.len()) };
    assert_eq!(s, AxmStatus::AxmOk);
    let bytes: Vec<u8> = buf.iter().flat_map(|v| v.to_le_bytes()).collect();
    assert_eq!(hex::encode(Sha256::digest(&bytes)), PROPOSED_LUT_SHA256);

    let s = unsafe { axm_multiplier_build_lut(h.0, buf.as_mut_ptr(), 100) };
    assert_eq!(s, AxmStatus::AxmBufferTooSmall);
    assert!(last_error().contains("65536"));
}

#[test]
fn sweep_summary() {
    let h = new(AXM_FAMILY_PROPOSED, AXM_DEFAULT_PARAM);
    let mut r = AxmErrorSummary::default();
    assert_eq!(
        unsafe { axm_multiplier_sweep(h.0, &mut r) },
        AxmStatus::AxmOk
    );
    assert_eq!(r.n_cases, 65536);
    assert_eq!(r.error_cases, 4229);
    assert_eq!(r.max_ed, 5688);
    assert!((r.er_percent - 6.453).abs() < 1e-3);

    let d1 = new(AXM_FAMILY_DESIGN1, 8);
    assert_eq!(
        unsafe { axm_multiplier_sweep(d1.0, &mut r) },
        AxmStatus::AxmOk
    );
    assert_eq!(r.error_cases, 1821);

    let d2 = new(AXM_FAMILY_DESIGN2, AXM_DEFAULT_PARAM);
    assert_eq!(
        unsafe { axm_multiplier_sweep(d2.0, &mut r) },
        AxmStatus::AxmOk
    );
    assert_eq!(r.zero_exact_nonzero_approx, 511);
}

#[test]
fn null_pointers_are_rejected() {
    let mut out = 0u16;
    let mut h = ptr::null_mut();
    unsafe {
        assert_eq!(
            axm_multiplier_new(0, AXM_DEFAULT_PARAM, ptr::null_mut()),
            AxmStatus::AxmNullPointer
        );
        assert_eq!(
            axm_multiplier_eval(ptr::null(), 1, 1, &mut out),
            AxmStatus::AxmNullPointer
        );
        assert_eq!(
            axm_multiplier_sweep(ptr::null(), ptr::null_mut()),
            AxmStatus::AxmNullPointer
        );
        assert_eq!(
            axm_multiplier_new_with_table(3, AXM_DEFAULT_PARAM, ptr::null(), &mut h),
            AxmStatus::AxmNullPointer
        );
        assert_eq!(
            axm_proposed_truth_table(ptr::null_mut()),
            AxmStatus::AxmNullPointer
        );
        axm_multiplier_free(ptr::null_mut());
    }
    assert!(h.is_null());
}

#[test]
fn invalid_arguments_set_last_error() {
    let mut h = ptr::null_mut();
    let s = unsafe { axm_multiplier_new(9, AXM_DEFAULT_PARAM, &mut h) };
    assert_eq!(s, AxmStatus::AxmInvalidArgument);
    assert!(h.is_null());
    assert_eq!(last_error(), "unknown family 9");

    let s = unsafe { axm_multiplier_new(AXM_FAMILY_PROPOSED, 3, &mut h) };
    assert_eq!(s, AxmStatus::AxmInvalidArgument);

    let s = unsafe { axm_multiplier_new(AXM_FAMILY_DESIGN2, 40, &mut h) };
    assert_eq!(s, AxmStatus::AxmInvalidArgument);

    let bad = [4u8; 16];
    let s = unsafe { axm_multiplier_new_with_table(3, AXM_DEFAULT_PARAM, bad.as_ptr(), &mut h) };
    assert_eq!(s, AxmStatus::AxmInvalidArgument);
    assert!(last_error().contains("exceeds 3"));

    // success clears the message
    let _ok = new(AXM_FAMILY_EXACT, AXM_DEFAULT_PARAM);
    assert_eq!(unsafe { axm_last_error(ptr::null_mut(), 0) }, 0);
}

#[test]
fn last_error_truncates() {
    let mut h = ptr::null_mut();
    unsafe { axm_multiplier_new(77, AXM_DEFAULT_PARAM, &mut h) };
    let mut buf = [1 as c_char; 4];
    let n = unsafe { axm_last_error(buf.as_mut_ptr(), buf.len()) };
    assert_eq!(n, "unknown family 77".len() + 1);
    assert_eq!(unsafe { CStr::from_ptr(buf.as_ptr()) }.to_bytes(), b"unk");
}

#[test]
fn truth_table_and_custom_table() {
    let mut t = [0u8; 16];
    assert_eq!(
        unsafe { axm_proposed_truth_table(t.as_mut_ptr()) },
        AxmStatus::AxmOk
    );
    for (i, &v) in t.iter().enumerate() {
        let want = if i == 15 {
            3
        } else {
            (i as u32).count_ones() as u8
        };
        assert_eq!(v, want, "pattern {i}");
    }

    let mut h = ptr::null_mut();
    let s = unsafe { axm_multiplier_new_with_table(3, AXM_DEFAULT_PARAM, t.as_ptr(), &mut h) };
    assert_eq!(s, AxmStatus::AxmOk);
    let h = Handle(h);
    let mut out = 0u16;
    unsafe { axm_multiplier_eval(h.0, 255, 255, &mut out) };
    assert_eq!(out, 59337);
}

#[test]
fn plan_dump_size_query() {
    let h = new(AXM_FAMILY_PROPOSED, AXM_DEFAULT_PARAM);
    let mut needed = 0usize;
    let s = unsafe { axm_multiplier_plan_dump(h.0, ptr::null_mut(), 0, &mut needed) };
    assert_eq!(s, AxmStatus::AxmBufferTooSmall);
    assert!(needed > 1);
    let mut buf = vec![0 as c_char; needed];
    let s = unsafe { axm_multiplier_plan_dump(h.0, buf.as_mut_ptr(), buf.len(), &mut needed) };
    assert_eq!(s, AxmStatus::AxmOk);
    let text = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap();
    let golden = include_str!("../../core/tests/golden/proposed_plan.txt");
    assert_eq!(text, golden);
}

#[test]
fn image_quality() {
    let a: Vec<u8> = (0..16 * 16).map(|i| (i * 7 % 256) as u8).collect();
    let mut b = a.clone();
    let mut v = 0.0;
    unsafe {
        assert_eq!(
            axm_psnr(a.as_ptr(), b.as_ptr(), 16, 16, &mut v),
            AxmStatus::AxmOk
        );
        assert!(v.is_infinite() && v > 0.0);
        assert_eq!(
            axm_ssim(a.as_ptr(), b.as_ptr(), 16, 16, &mut v),
            AxmStatus::AxmOk
        );
        assert!((v - 1.0).abs() < 1e-12);
        b[0] ^= 0x10;
        assert_eq!(
            axm_psnr(a.as_ptr(), b.as_ptr(), 16, 16, &mut v),
            AxmStatus::AxmOk
        );
        let mse = 256.0 / 256.0;
        assert!((v - 10.0 * (255.0f64 * 255.0 / mse).log10()).abs() < 1e-9);
        assert_eq!(
            axm_ssim(a.as_ptr(), b.as_ptr(), 8, 8, &mut v),
            AxmStatus::AxmInvalidArgument
        );
        assert_eq!(
            axm_psnr(ptr::null(), b.as_ptr(), 16, 16, &mut v),
            AxmStatus::AxmNullPointer
        );
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(axm_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_entry_point() {
    let h = include_str!("../include/axmul.h");
    assert!(h.starts_with("/* SPDX-License-Identifier: Apache-2.0 */"));
    for name in [
        "axm_multiplier_new",
        "axm_multiplier_new_with_table",
        "axm_multiplier_free",
        "axm_multiplier_eval",
        "axm_multiplier_sweep",
        "axm_multiplier_build_lut",
        "axm_multiplier_plan_dump",
        "axm_proposed_truth_table",
        "axm_psnr",
        "axm_ssim",
        "axm_last_error",
        "axm_version",
        "AXM_BUFFER_TOO_SMALL",
        "typedef struct AxmMultiplier AxmMultiplier",
    ] {
        assert!(h.contains(name), "{name} missing from header");
    }
}
