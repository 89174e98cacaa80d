// SPDX-License-Identifier: Apache-2.0

//! C ABI over `axmul`.
//!
//! Every fallible call returns an [`AxmStatus`]. On failure a message is kept
//! per thread and can be copied out with [`axm_last_error`]. Panics never
//! cross the boundary; they surface as `AXM_PANIC`.
//!
//! Multipliers are opaque handles from `axm_multiplier_new*`, released with
//! [`axm_multiplier_free`]. A handle is immutable after creation and may be
//! shared between threads.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use axmul::compressor::{CompressorOutputs, CompressorTruthTable};
use axmul::lut::LUT_ENTRIES;
use axmul::metrics::sweep_multiplier;
use axmul::multiplier::{Family, Multiplier, MultiplierConfig};
use axmul::nn::{psnr, ssim, GrayImage, Psnr};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxmStatus {
    AxmOk = 0,
    AxmNullPointer = 1,
    AxmInvalidArgument = 2,
    AxmBufferTooSmall = 3,
    AxmPanic = 4,
}

pub const AXM_FAMILY_EXACT: u32 = 0;
pub const AXM_FAMILY_DESIGN1: u32 = 1;
pub const AXM_FAMILY_DESIGN2: u32 = 2;
pub const AXM_FAMILY_PROPOSED: u32 = 3;
/// Pass as `param` to keep the family default (threshold 8, width 4).
pub const AXM_DEFAULT_PARAM: u32 = u32::MAX;
pub const AXM_LUT_ENTRIES: usize = 65536;

/// Opaque multiplier handle.
pub struct AxmMultiplier {
    inner: Multiplier,
}

/// Exhaustive-sweep metrics; percentages are in percent.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AxmErrorSummary {
    pub n_cases: u64,
    pub error_cases: u64,
    pub max_ed: u64,
    pub zero_exact_nonzero_approx: u64,
    pub er_percent: f64,
    pub nmed_percent: f64,
    pub mred_percent: f64,
    pub mean_ed: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: AxmStatus, msg: impl Into<String>) -> AxmStatus {
    set_error(msg);
    status
}

/// Runs `f`, translating panics into `AxmPanic`.
fn guard(f: impl FnOnce() -> AxmStatus) -> AxmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == AxmStatus::AxmOk {
                LAST_ERROR.with(|e| *e.borrow_mut() = None);
            }
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(AxmStatus::AxmPanic, format!("panic: {msg}"))
        }
    }
}

fn config(family: u32, param: u32) -> Result<MultiplierConfig, String> {
    let fam = match family {
        AXM_FAMILY_EXACT => Family::Exact,
        AXM_FAMILY_DESIGN1 => Family::Design1Hybrid,
        AXM_FAMILY_DESIGN2 => Family::Design2Truncated,
        AXM_FAMILY_PROPOSED => Family::ProposedFullApprox,
        other => return Err(format!("unknown family {other}")),
    };
    let mut cfg = MultiplierConfig::new(fam);
    if param != AXM_DEFAULT_PARAM {
        match fam {
            Family::Design1Hybrid => cfg.exact_column_threshold = param as usize,
            Family::Design2Truncated => cfg.truncation_width = param as usize,
            _ => return Err(format!("{} takes no parameter", fam.name())),
        }
    }
    Ok(cfg)
}

unsafe fn create(cfg: MultiplierConfig, out: *mut *mut AxmMultiplier) -> AxmStatus {
    match Multiplier::new(cfg) {
        Ok(m) => {
            *out = Box::into_raw(Box::new(AxmMultiplier { inner: m }));
            AxmStatus::AxmOk
        }
        Err(e) => fail(AxmStatus::AxmInvalidArgument, e.to_string()),
    }
}

/// Creates a multiplier. `param` is the exact-column threshold for
/// DESIGN1, the truncation width for DESIGN2, otherwise
/// `AXM_DEFAULT_PARAM`.
#[no_mangle]
pub unsafe extern "C" fn axm_multiplier_new(
    family: u32,
    param: u32,
    out: *mut *mut AxmMultiplier,
) -> AxmStatus {
    guard(|| {
        if out.is_null() {
            return fail(AxmStatus::AxmNullPointer, "out is null");
        }
        match config(family, param) {
            Ok(cfg) => create(cfg, out),
            Err(e) => fail(AxmStatus::AxmInvalidArgument, e),
        }
    })
}

/// Like [`axm_multiplier_new`] with a custom approximate cell. `values[i]`
/// is the cell output `2*carry + sum` (0..=3) for input pattern `i`, where
/// bit 0 of `i` is x1.
#[no_mangle]
pub unsafe extern "C" fn axm_multiplier_new_with_table(
    family: u32,
    param: u32,
    values: *const u8,
    out: *mut *mut AxmMultiplier,
) -> AxmStatus {
    guard(|| {
        if out.is_null() || values.is_null() {
            return fail(AxmStatus::AxmNullPointer, "null argument");
        }
        let values = std::slice::from_raw_parts(values, 16);
        if let Some(v) = values.iter().find(|&&v| v > 3) {
            return fail(
                AxmStatus::AxmInvalidArgument,
                format!("cell value {v} exceeds 3"),
            );
        }
        let mut entries = [CompressorOutputs::default(); 16];
        for (e, &v) in entries.iter_mut().zip(values) {
            *e = CompressorOutputs::from_value(v);
        }
        match config(family, param) {
            Ok(cfg) => create(
                cfg.with_table(CompressorTruthTable::new("custom", entries)),
                out,
            ),
            Err(e) => fail(AxmStatus::AxmInvalidArgument, e),
        }
    })
}

/// Releases a handle. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn axm_multiplier_free(m: *mut AxmMultiplier) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

#[no_mangle]
pub unsafe extern "C" fn axm_multiplier_eval(
    m: *const AxmMultiplier,
    a: u8,
    b: u8,
    out: *mut u16,
) -> AxmStatus {
    guard(|| {
        let (Some(m), false) = (m.as_ref(), out.is_null()) else {
            return fail(AxmStatus::AxmNullPointer, "null argument");
        };
        *out = m.inner.evaluate(a, b);
        AxmStatus::AxmOk
    })
}

/// Exhaustive comparison against the exact product over all operand pairs.
#[no_mangle]
pub unsafe extern "C" fn axm_multiplier_sweep(
    m: *const AxmMultiplier,
    out: *mut AxmErrorSummary,
) -> AxmStatus {
    guard(|| {
        let (Some(m), false) = (m.as_ref(), out.is_null()) else {
            return fail(AxmStatus::AxmNullPointer, "null argument");
        };
        let r = sweep_multiplier(&m.inner);
        *out = AxmErrorSummary {
            n_cases: r.n_cases,
            error_cases: r.error_cases,
            max_ed: r.max_ed,
            zero_exact_nonzero_approx: r.zero_exact_nonzero_approx,
            er_percent: r.er_percent(),
            nmed_percent: r.nmed_percent(),
            mred_percent: r.mred_percent(),
            mean_ed: r.mean_ed(),
        };
        AxmStatus::AxmOk
    })
}

/// Fills `buf[(a << 8) | b]` for every operand pair. `len` must be at
/// least `AXM_LUT_ENTRIES`.
#[no_mangle]
pub unsafe extern "C" fn axm_multiplier_build_lut(
    m: *const AxmMultiplier,
    buf: *mut u16,
    len: usize,
) -> AxmStatus {
    guard(|| {
        let (Some(m), false) = (m.as_ref(), buf.is_null()) else {
            return fail(AxmStatus::AxmNullPointer, "null argument");
        };
        if len < LUT_ENTRIES {
            return fail(
                AxmStatus::AxmBufferTooSmall,
                format!("need {LUT_ENTRIES} entries, got {len}"),
            );
        }
        let dst = std::slice::from_raw_parts_mut(buf, LUT_ENTRIES);
        for (i, d) in dst.iter_mut().enumerate() {
            *d = m.inner.evaluate((i >> 8) as u8, i as u8);
        }
        AxmStatus::AxmOk
    })
}

/// Copies `text` plus NUL into `buf`; `needed` receives the full size.
unsafe fn copy_out(text: &str, buf: *mut c_char, len: usize, needed: *mut usize) -> AxmStatus {
    let bytes = text.as_bytes();
    if !needed.is_null() {
        *needed = bytes.len() + 1;
    }
    if buf.is_null() || len < bytes.len() + 1 {
        return fail(
            AxmStatus::AxmBufferTooSmall,
            format!("need {} bytes, got {len}", bytes.len() + 1),
        );
    }
    std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), bytes.len());
    *buf.add(bytes.len()) = 0;
    AxmStatus::AxmOk
}

/// Text dump of the reduction plan. Call with a null `buf` to learn the
/// size through `needed`.
#[no_mangle]
pub unsafe extern "C" fn axm_multiplier_plan_dump(
    m: *const AxmMultiplier,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> AxmStatus {
    guard(|| {
        let Some(m) = m.as_ref() else {
            return fail(AxmStatus::AxmNullPointer, "null handle");
        };
        copy_out(&m.inner.plan().dump(), buf, len, needed)
    })
}

/// Writes the 16 cell values (`2*carry + sum`) of the proposed compressor.
#[no_mangle]
pub unsafe extern "C" fn axm_proposed_truth_table(out: *mut u8) -> AxmStatus {
    guard(|| {
        if out.is_null() {
            return fail(AxmStatus::AxmNullPointer, "out is null");
        }
        let t = axmul::proposed_truth_table();
        let dst = std::slice::from_raw_parts_mut(out, 16);
        for (i, d) in dst.iter_mut().enumerate() {
            *d = t.get(i as u8).value();
        }
        AxmStatus::AxmOk
    })
}

unsafe fn images(
    reference: *const u8,
    test: *const u8,
    width: usize,
    height: usize,
) -> Result<(GrayImage, GrayImage), AxmStatus> {
    if reference.is_null() || test.is_null() {
        return Err(fail(AxmStatus::AxmNullPointer, "null image"));
    }
    let n = width
        .checked_mul(height)
        .ok_or_else(|| fail(AxmStatus::AxmInvalidArgument, "image too large"))?;
    let a = std::slice::from_raw_parts(reference, n).to_vec();
    let b = std::slice::from_raw_parts(test, n).to_vec();
    let mk = |p| {
        GrayImage::new(width, height, p)
            .map_err(|e| fail(AxmStatus::AxmInvalidArgument, e.to_string()))
    };
    Ok((mk(a)?, mk(b)?))
}

/// PSNR in dB for 8-bit images; `+inf` when they are identical.
#[no_mangle]
pub unsafe extern "C" fn axm_psnr(
    reference: *const u8,
    test: *const u8,
    width: usize,
    height: usize,
    out: *mut f64,
) -> AxmStatus {
    guard(|| {
        if out.is_null() {
            return fail(AxmStatus::AxmNullPointer, "out is null");
        }
        let (a, b) = match images(reference, test, width, height) {
            Ok(v) => v,
            Err(s) => return s,
        };
        match psnr(&a, &b) {
            Ok(Psnr::Finite(v)) => *out = v,
            Ok(Psnr::Infinite) => *out = f64::INFINITY,
            Err(e) => return fail(AxmStatus::AxmInvalidArgument, e.to_string()),
        }
        AxmStatus::AxmOk
    })
}

/// Mean SSIM with an 11x11 Gaussian window; both sides must be >= 11.
#[no_mangle]
pub unsafe extern "C" fn axm_ssim(
    reference: *const u8,
    test: *const u8,
    width: usize,
    height: usize,
    out: *mut f64,
) -> AxmStatus {
    guard(|| {
        if out.is_null() {
            return fail(AxmStatus::AxmNullPointer, "out is null");
        }
        let (a, b) = match images(reference, test, width, height) {
            Ok(v) => v,
            Err(s) => return s,
        };
        match ssim(&a, &b) {
            Ok(v) => *out = v,
            Err(e) => return fail(AxmStatus::AxmInvalidArgument, e.to_string()),
        }
        AxmStatus::AxmOk
    })
}

/// Copies this thread's last error message (NUL-terminated, truncated to
/// fit) and returns its full length including the NUL, or 0 if none.
#[no_mangle]
pub unsafe extern "C" fn axm_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len) - 1;
            std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Library version, static NUL-terminated string.
#[no_mangle]
pub extern "C" fn axm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
