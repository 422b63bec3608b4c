//! C ABI for `constructive`.
//!
//! Fallible functions return a status code and write results through out-pointers. The
//! codes match the exit statuses of the `constructive` binary, plus `CFT_ERR_PANIC`.
//! After a failure, `cft_last_error` returns a message for the calling thread. Handles
//! are opaque and must be released with their `_free` function. Strings returned
//! through `char **` out-pointers are released with `cft_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use constructive::borel::{self, PowerSeries, RemainderSample};
use constructive::cli::{self, ExperimentConfig, ReportBundle};
use constructive::combinatorics::{self, Forest, ForestEdge, LabeledGraph};
use constructive::mlve_toy::{self, SliceModel};
use constructive::tensor_quartic::{self, GeneralizedColor, Growth, T43Graph, Tensor};
use constructive::vector_lve::{self, CardioidVariant, Dimension, ModelPoint, SamplingOptions};
use constructive::{CostGuard, Error};

pub const CFT_OK: i32 = 0;
/// Bad arguments, null pointers or invalid UTF-8.
pub const CFT_ERR_USAGE: i32 = 2;
/// Domain, connectivity, structure or fit failures.
pub const CFT_ERR_DOMAIN: i32 = 3;
pub const CFT_ERR_SIZE_LIMIT: i32 = 4;
pub const CFT_ERR_NUMERIC: i32 = 5;
pub const CFT_ERR_SINGULARITY: i32 = 6;
pub const CFT_ERR_IO: i32 = 7;
pub const CFT_ERR_PANIC: i32 = 8;

pub const CFT_GRAPH_DIVERGENT_TADPOLE: i32 = 0;
pub const CFT_GRAPH_CONVERGENT_TADPOLE: i32 = 1;
pub const CFT_GRAPH_LINEAR_VACUUM: i32 = 2;
pub const CFT_GRAPH_LOG_VACUUM: i32 = 3;

pub const CFT_GROWTH_BOUNDED: i32 = 0;
pub const CFT_GROWTH_LOGARITHMIC: i32 = 1;
pub const CFT_GROWTH_LINEAR: i32 = 2;

pub const CFT_CARDIOID_STANDARD: i32 = 0;
pub const CFT_CARDIOID_EXTENDED: i32 = 1;
pub const CFT_CARDIOID_UNIFORM_HALF_DISK: i32 = 2;

/// Result of one CLI command run in-process.
pub struct CftReport(ReportBundle);

/// Power series with real coefficients.
pub struct CftSeries(PowerSeries);

/// Complex tensor with `side^rank` entries.
pub struct CftTensor(Tensor);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CftLveSum {
    pub re: f64,
    pub im: f64,
    pub tail_bound: f64,
    pub std_error: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CftRemainderFit {
    pub k: f64,
    pub sigma: f64,
    pub residual: f64,
    pub k_envelope: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CftPowerCount {
    /// One of the `CFT_GROWTH_*` values.
    pub growth: i32,
    pub difference_ratio: f64,
    pub log_fit_residual: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CftWeightCheck {
    pub trees: usize,
    /// Exact rational weights sum to one.
    pub sums_to_one: bool,
    /// Enumeration and integral routes give identical rationals for every tree.
    pub routes_agree: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Fail(i32, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(cli::exit_code(&e), e.to_string())
    }
}

type Out<T> = std::result::Result<T, Fail>;

fn usage(msg: &str) -> Fail {
    Fail(CFT_ERR_USAGE, msg.to_string())
}

fn set_error(msg: Option<String>) {
    let msg = msg.map(|m| CString::new(m.replace('\0', " ")).unwrap_or_default());
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn guarded<F: FnOnce() -> Out<()>>(f: F) -> i32 {
    set_error(None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CFT_OK,
        Ok(Err(Fail(code, msg))) => {
            set_error(Some(msg));
            code
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(Some(format!("panic: {msg}")));
            CFT_ERR_PANIC
        }
    }
}

fn put<T>(p: *mut T, v: T) -> Out<()> {
    if p.is_null() {
        return Err(usage("null output pointer"));
    }
    unsafe { p.write(v) };
    Ok(())
}

fn handle<'a, T>(p: *const T) -> Out<&'a T> {
    unsafe { p.as_ref() }.ok_or_else(|| usage("null handle"))
}

fn slice<'a, T>(p: *const T, len: usize) -> Out<&'a [T]> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(usage("null array"));
    }
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

fn text<'a>(p: *const c_char) -> Out<&'a str> {
    if p.is_null() {
        return Err(usage("null string"));
    }
    unsafe { CStr::from_ptr(p) }.to_str().map_err(|_| usage("string is not UTF-8"))
}

fn put_string(p: *mut *mut c_char, s: String) -> Out<()> {
    let c = CString::new(s).map_err(|_| usage("output contains NUL"))?;
    if p.is_null() {
        return Err(usage("null output pointer"));
    }
    unsafe { p.write(c.into_raw()) };
    Ok(())
}

fn put_box<T>(p: *mut *mut T, v: T) -> Out<()> {
    put(p, ptr::null_mut())?;
    put(p, Box::into_raw(Box::new(v)))
}

fn put_complex(re: *mut f64, im: *mut f64, z: Complex64) -> Out<()> {
    put(re, z.re)?;
    put(im, z.im)
}

fn guard(accept_exponential_cost: bool) -> CostGuard {
    CostGuard { accept_exponential_cost }
}

fn edge_pairs(pairs: *const usize, edge_count: usize) -> Out<Vec<(usize, usize)>> {
    let flat = slice(pairs, 2 * edge_count)?;
    Ok(flat.chunks_exact(2).map(|p| (p[0], p[1])).collect())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cft_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or null if the last call succeeded.
/// Valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn cft_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cft_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Runs one command from a TOML configuration in the format read by `--config`.
///
/// # Safety
/// `config` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cft_run_toml(config: *const c_char, out: *mut *mut CftReport) -> i32 {
    guarded(|| {
        let cfg = ExperimentConfig::from_toml_str(text(config)?)?;
        let bundle = cli::run(&cfg)?;
        put_box(out, CftReport(bundle))
    })
}

/// # Safety
/// `report` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cft_report_record_count(report: *const CftReport, out: *mut usize) -> i32 {
    guarded(|| put(out, handle(report)?.0.records.len()))
}

/// Summary object as JSON text.
///
/// # Safety
/// `report` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cft_report_summary_json(report: *const CftReport, out: *mut *mut c_char) -> i32 {
    guarded(|| put_string(out, handle(report)?.0.summary.to_string()))
}

/// Full JSONL output as written by the binary.
///
/// # Safety
/// `report` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cft_report_jsonl(report: *const CftReport, include_meta: bool, out: *mut *mut c_char) -> i32 {
    guarded(|| put_string(out, handle(report)?.0.to_jsonl(include_meta)))
}

/// # Safety
/// `report` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cft_report_csv(report: *const CftReport, out: *mut *mut c_char) -> i32 {
    guarded(|| put_string(out, handle(report)?.0.to_csv()?))
}

/// # Safety
/// `report` must be null or a handle from `cft_run_toml`, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cft_report_free(report: *mut CftReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Number of forests of the complete graph on `n` vertices, by enumeration.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cft_forest_count(n: usize, accept_exponential_cost: bool, out: *mut u64) -> i32 {
    guarded(|| {
        let mut count = 0u64;
        combinatorics::for_each_forest(n, guard(accept_exponential_cost), |_| count += 1)?;
        put(out, count)
    })
}

/// Residual of the forest formula on `K_n` for the coupling table `t` of length `n(n-1)/2`.
///
/// # Safety
/// `t` must hold `len` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cft_forest_formula_residual(
    n: usize,
    t: *const f64,
    len: usize,
    accept_exponential_cost: bool,
    out: *mut f64,
) -> i32 {
    guarded(|| {
        let chk = combinatorics::forest_formula_verify(n, slice(t, len)?, guard(accept_exponential_cost))?;
        put(out, chk.residual)
    })
}

/// Smallest eigenvalue of the forest matrix. `pairs` holds `2 * edge_count` vertex
/// indices and `w[k]` is the weight of edge `k`.
///
/// # Safety
/// `pairs` and `w` must hold `2 * edge_count` and `edge_count` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cft_forest_min_eigenvalue(
    n: usize,
    pairs: *const usize,
    edge_count: usize,
    w: *const f64,
    out: *mut f64,
) -> i32 {
    guarded(|| {
        let edges = edge_pairs(pairs, edge_count)?
            .into_iter()
            .enumerate()
            .map(|(id, (u, v))| ForestEdge { id, u, v })
            .collect();
        let forest = Forest::new(n, edges)?;
        let m = combinatorics::forest_matrix(&forest, slice(w, edge_count)?)?;
        put(out, combinatorics::min_eigenvalue(&m))
    })
}

/// Barycentric weights of every spanning tree of a connected graph, computed by the
/// ordering enumeration and by the integral route.
///
/// # Safety
/// `pairs` must hold `2 * edge_count` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cft_tree_weight_check(
    n: usize,
    pairs: *const usize,
    edge_count: usize,
    accept_exponential_cost: bool,
    out: *mut CftWeightCheck,
) -> i32 {
    guarded(|| {
        let g = guard(accept_exponential_cost);
        let graph = LabeledGraph::new(n, edge_pairs(pairs, edge_count)?)?;
        if !graph.is_connected() {
            return Err(Error::Connectivity("graph is not connected".into()).into());
        }
        let trees = combinatorics::spanning_trees_of(&graph, g)?;
        let mut total = None;
        let mut routes_agree = true;
        for tree in &trees {
            let exact = combinatorics::tree_weight_exact(&graph, tree, g)?;
            let integral = combinatorics::tree_weight_integral(&graph, tree, g)?;
            routes_agree &= exact.ratio() == integral.ratio();
            total = Some(match total {
                None => exact.ratio(),
                Some(t) => t + exact.ratio(),
            });
        }
        let sums_to_one = total.is_some_and(|t| t.numer() == t.denom());
        put(out, CftWeightCheck { trees: trees.len(), sums_to_one, routes_agree })
    })
}

/// Number of two-level trees on `n` vertices, by enumeration.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cft_two_level_tree_count(n: usize, accept_exponential_cost: bool, out: *mut usize) -> i32 {
    guarded(|| put(out, mlve_toy::enumerate_two_level_trees(n, guard(accept_exponential_cost))?.len()))
}

/// Perturbative series of the zero-dimensional quartic integral, `orders + 1` coefficients.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cft_d0_series_new(orders: usize, out: *mut *mut CftSeries) -> i32 {
    guarded(|| put_box(out, CftSeries(borel::d0_phi4_series(orders)?)))
}

/// # Safety
/// `series` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cft_series_len(series: *const CftSeries, out: *mut usize) -> i32 {
    guarded(|| put(out, handle(series)?.0.coeffs.len()))
}

/// # Safety
/// `series` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cft_series_coeff(series: *const CftSeries, k: usize, out: *mut f64) -> i32 {
    guarded(|| {
        let c = handle(series)?.0.coeffs.get(k).copied();
        put(out, c.ok_or_else(|| Fail(CFT_ERR_DOMAIN, format!("coefficient {k} out of range")))?)
    })
}

/// `|a_{k+1} / a_k| / k` for `k >= 1`.
///
/// # Safety
/// `series` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cft_series_ratio_over_n(series: *const CftSeries, k: usize, out: *mut f64) -> i32 {
    guarded(|| {
        let r = borel::growth_ratios(&handle(series)?.0).into_iter().find(|&(n, _)| n == k);
        put(out, r.ok_or_else(|| Fail(CFT_ERR_DOMAIN, format!("no ratio at order {k}")))?.1)
    })
}

/// Sum of the first `terms` terms at `x`.
///
/// # Safety
/// `series` must be a live handle; `re` and `im` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cft_series_partial_sum(
    series: *const CftSeries,
    x_re: f64,
    x_im: f64,
    terms: usize,
    re: *mut f64,
    im: *mut f64,
) -> i32 {
    guarded(|| put_complex(re, im, handle(series)?.0.partial_sum(Complex64::new(x_re, x_im), terms)))
}

/// # Safety
/// `series` must be null or a handle from `cft_d0_series_new`, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cft_series_free(series: *mut CftSeries) {
    if !series.is_null() {
        drop(Box::from_raw(series));
    }
}

/// Normalized zero-dimensional quartic integral at complex coupling.
///
/// # Safety
/// `re` and `im` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cft_d0_partition(lambda_re: f64, lambda_im: f64, re: *mut f64, im: *mut f64) -> i32 {
    guarded(|| put_complex(re, im, borel::d0_phi4_partition(Complex64::new(lambda_re, lambda_im))?.value))
}

/// Fits `|R_n| <= K σ^n n! |λ|^n` to `len` samples.
///
/// # Safety
/// The three arrays must hold `len` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cft_remainder_fit(
    orders: *const usize,
    lambda_abs: *const f64,
    remainder_abs: *const f64,
    len: usize,
    out: *mut CftRemainderFit,
) -> i32 {
    guarded(|| {
        let (o, l, r) = (slice(orders, len)?, slice(lambda_abs, len)?, slice(remainder_abs, len)?);
        let samples: Vec<RemainderSample> = (0..len)
            .map(|k| RemainderSample { order: o[k], lambda_abs: l[k], remainder_abs: r[k] })
            .collect();
        let fit = borel::remainder_fit(&samples)?;
        put(out, CftRemainderFit { k: fit.k, sigma: fit.sigma, residual: fit.residual, k_envelope: fit.k_envelope })
    })
}

/// Oracle two-point function of the O(N) model at real `z < 0`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cft_lve_oracle_g2(z: f64, n: u64, out: *mut f64) -> i32 {
    guarded(|| put(out, vector_lve::oracle_g2(&ModelPoint::real(z, n)?)?.value))
}

/// `G2 - Σ_{k<order} g_k z^k` against the oracle.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cft_lve_taylor_remainder(z: f64, n: u64, order: usize, out: *mut f64) -> i32 {
    guarded(|| put(out, vector_lve::taylor_remainder(&ModelPoint::real(z, n)?, order)?))
}

/// Closed-form large-N two-point function.
///
/// # Safety
/// `re` and `im` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cft_catalan_g2(z_re: f64, z_im: f64, re: *mut f64, im: *mut f64) -> i32 {
    guarded(|| put_complex(re, im, vector_lve::catalan_g2(Complex64::new(z_re, z_im))?))
}

/// Loop vertex expansion truncated at `n_max`. `n = 0` selects N = ∞; `samples` and
/// `seed` drive the Monte Carlo orders.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cft_lve_partial_sum(
    z_re: f64,
    z_im: f64,
    n: u64,
    n_max: usize,
    samples: u64,
    seed: u64,
    out: *mut CftLveSum,
) -> i32 {
    guarded(|| {
        let dim = if n == 0 { Dimension::Infinite } else { Dimension::Finite(n) };
        let p = ModelPoint::new(Complex64::new(z_re, z_im), dim)?;
        let opts = SamplingOptions { samples, seed, ..Default::default() };
        let s = vector_lve::lve_partial_sum(&p, n_max, &opts)?;
        put(out, CftLveSum { re: s.value.re, im: s.value.im, tail_bound: s.tail_bound, std_error: s.std_error })
    })
}

/// Uniform bound on the resolvent norm at coupling `λ`; infinite on the cut.
#[no_mangle]
pub extern "C" fn cft_resolvent_bound(lambda_re: f64, lambda_im: f64) -> f64 {
    catch_unwind(|| vector_lve::resolvent_bound(Complex64::new(lambda_re, lambda_im))).unwrap_or(f64::NAN)
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cft_cardioid_contains(lambda_re: f64, lambda_im: f64, variant: i32, out: *mut bool) -> i32 {
    guarded(|| {
        let v = match variant {
            CFT_CARDIOID_STANDARD => CardioidVariant::Standard,
            CFT_CARDIOID_EXTENDED => CardioidVariant::Extended,
            CFT_CARDIOID_UNIFORM_HALF_DISK => CardioidVariant::UniformHalfDisk,
            _ => return Err(usage("unknown cardioid variant")),
        };
        put(out, vector_lve::cardioid_contains(Complex64::new(lambda_re, lambda_im), v))
    })
}

/// Oracle `log Z` of the sliced toy model with slices `j_min..=j_max` and scale `m`.
///
/// # Safety
/// `re` and `im` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cft_mlve_oracle_log_z(
    m: u64,
    j_min: u32,
    j_max: u32,
    lambda_re: f64,
    lambda_im: f64,
    re: *mut f64,
    im: *mut f64,
) -> i32 {
    guarded(|| {
        let model = SliceModel::new(m, j_min, j_max, Complex64::new(lambda_re, lambda_im), CostGuard::default())?;
        put_complex(re, im, mlve_toy::oracle_log_z(&model)?.value)
    })
}

/// Multiscale expansion of `log Z` truncated at `n_max` vertices.
///
/// # Safety
/// `re` and `im` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cft_mlve_truncated_log_z(
    m: u64,
    j_min: u32,
    j_max: u32,
    lambda_re: f64,
    lambda_im: f64,
    n_max: usize,
    accept_exponential_cost: bool,
    re: *mut f64,
    im: *mut f64,
) -> i32 {
    guarded(|| {
        let g = guard(accept_exponential_cost);
        let model = SliceModel::new(m, j_min, j_max, Complex64::new(lambda_re, lambda_im), g)?;
        put_complex(re, im, mlve_toy::mlve_truncated_sum(&model, n_max, g)?.value)
    })
}

/// Largest `|det|` among the fermionic minors and terms of random two-level trees on `n`
/// vertices, with random interpolation weights and slices in `1..=2`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cft_mlve_max_fermionic_minor(n: usize, samples: usize, seed: u64, out: *mut f64) -> i32 {
    guarded(|| {
        let trees = mlve_toy::enumerate_two_level_trees(n, CostGuard::default())?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let tree = trees.choose(&mut rng).ok_or_else(|| usage("no two-level trees"))?;
            let w: Vec<f64> = (0..tree.fermionic().len()).map(|_| rng.gen::<f64>()).collect();
            let y = tree.block_matrix(&w)?;
            let slices: Vec<u32> = (0..n).map(|_| rng.gen_range(1..=2)).collect();
            let f = mlve_toy::fermionic_factor(tree, &slices, &y)?;
            worst = f.minors.iter().chain(&f.terms).fold(worst, |m, d| m.max(d.abs()));
        }
        put(out, worst)
    })
}

/// Number of connected quartic invariants of rank `d`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cft_invariant_count(d: usize, out: *mut usize) -> i32 {
    guarded(|| put(out, tensor_quartic::enumerate_quartic_invariants(d)?.len()))
}

/// Canonical color mask (bit `c - 1` for color `c`) of invariant `index`, and whether it
/// is melonic.
///
/// # Safety
/// `mask` and `melonic` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cft_invariant_mask(d: usize, index: usize, mask: *mut u32, melonic: *mut bool) -> i32 {
    guarded(|| {
        let all = tensor_quartic::enumerate_quartic_invariants(d)?;
        let c = all.get(index).ok_or_else(|| Fail(CFT_ERR_DOMAIN, format!("invariant {index} out of range")))?;
        put(mask, c.mask())?;
        put(melonic, c.is_melonic())
    })
}

/// Free-measure expectation of the invariant with color mask `mask`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cft_expected_invariant(d: usize, n: usize, mask: u32, out: *mut f64) -> i32 {
    guarded(|| {
        let c = GeneralizedColor::from_mask(d, mask)?;
        put(out, tensor_quartic::expected_invariant(d, n, &c))
    })
}

fn put_tensor(out: *mut *mut CftTensor, t: Tensor) -> Out<()> {
    put_box(out, CftTensor(t))
}

/// Gaussian tensor with `E|T_n|² = N^{-(rank-1)}`, seeded.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cft_tensor_gaussian(
    rank: usize,
    side: usize,
    seed: u64,
    accept_exponential_cost: bool,
    out: *mut *mut CftTensor,
) -> i32 {
    guarded(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        put_tensor(out, Tensor::gaussian(rank, side, &mut rng, guard(accept_exponential_cost))?)
    })
}

/// Tensor from row-major real and imaginary parts, `side^rank` each.
///
/// # Safety
/// `re` and `im` must hold `len` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cft_tensor_from_parts(
    rank: usize,
    side: usize,
    re: *const f64,
    im: *const f64,
    len: usize,
    accept_exponential_cost: bool,
    out: *mut *mut CftTensor,
) -> i32 {
    guarded(|| {
        let (re, im) = (slice(re, len)?, slice(im, len)?);
        let data = re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect();
        put_tensor(out, Tensor::new(rank, side, data, guard(accept_exponential_cost))?)
    })
}

/// New tensor with the `side × side` matrix `u` (row-major parts) applied on `color`.
///
/// # Safety
/// `tensor` must be a live handle; `u_re` and `u_im` must hold `side²` values; `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn cft_tensor_act(
    tensor: *const CftTensor,
    color: usize,
    u_re: *const f64,
    u_im: *const f64,
    out: *mut *mut CftTensor,
) -> i32 {
    guarded(|| {
        let t = &handle(tensor)?.0;
        let n = t.side();
        let (re, im) = (slice(u_re, n * n)?, slice(u_im, n * n)?);
        let u = DMatrix::from_fn(n, n, |i, j| Complex64::new(re[i * n + j], im[i * n + j]));
        put_tensor(out, t.act(color, &u)?)
    })
}

/// `T̄·T`.
///
/// # Safety
/// `tensor` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cft_tensor_norm_sqr(tensor: *const CftTensor, out: *mut f64) -> i32 {
    guarded(|| put(out, handle(tensor)?.0.norm_sqr()))
}

/// Value of the quartic invariant with color mask `mask`.
///
/// # Safety
/// `tensor` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cft_tensor_invariant(tensor: *const CftTensor, mask: u32, out: *mut f64) -> i32 {
    guarded(|| {
        let t = &handle(tensor)?.0;
        let c = GeneralizedColor::from_mask(t.rank(), mask)?;
        put(out, tensor_quartic::evaluate_invariant(t, &c)?)
    })
}

/// # Safety
/// `tensor` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cft_tensor_free(tensor: *mut CftTensor) {
    if !tensor.is_null() {
        drop(Box::from_raw(tensor));
    }
}

/// Runs the rarefaction recursion for `steps` steps from `p0` resolvents on an order-`n`
/// tree; reports the final `q` and whether every step contracted.
///
/// # Safety
/// `final_q` and `all_contract` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cft_rarefaction(
    n: usize,
    p0: u64,
    steps: usize,
    final_q: *mut f64,
    all_contract: *mut bool,
) -> i32 {
    guarded(|| {
        let trace = tensor_quartic::rarefaction_trace(n, p0, steps)?;
        put(final_q, trace.last().map_or(f64::NAN, |s| s.q))?;
        put(all_contract, trace.iter().all(|s| s.contracts))
    })
}

/// Cutoff growth of one order-one T43 graph (`CFT_GRAPH_*`).
///
/// # Safety
/// `cutoffs` must hold `len` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cft_power_count(graph: i32, cutoffs: *const u64, len: usize, out: *mut CftPowerCount) -> i32 {
    guarded(|| {
        let g = match graph {
            CFT_GRAPH_DIVERGENT_TADPOLE => T43Graph::DivergentTadpole,
            CFT_GRAPH_CONVERGENT_TADPOLE => T43Graph::ConvergentTadpole,
            CFT_GRAPH_LINEAR_VACUUM => T43Graph::LinearVacuum,
            CFT_GRAPH_LOG_VACUUM => T43Graph::LogVacuum,
            _ => return Err(usage("unknown graph")),
        };
        let rep = tensor_quartic::power_counting_t43(g, slice(cutoffs, len)?)?;
        let growth = match rep.growth {
            Growth::Bounded => CFT_GROWTH_BOUNDED,
            Growth::Logarithmic => CFT_GROWTH_LOGARITHMIC,
            Growth::Linear => CFT_GROWTH_LINEAR,
        };
        put(
            out,
            CftPowerCount { growth, difference_ratio: rep.difference_ratio, log_fit_residual: rep.log_fit_residual },
        )
    })
}
