use std::ffi::{CStr, CString};
use std::ptr;

use constructive::cli::exit_code;
use constructive::Error;
use constructive_ffi::*;

fn last_error() -> Option<String> {
    let p = cft_last_error();
    (!p.is_null()).then(|| unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned())
}

fn take_string(p: *mut std::ffi::c_char) -> String {
    let s = unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned();
    unsafe { cft_string_free(p) };
    s
}

fn run(config: &str) -> (i32, *mut CftReport) {
    let c = CString::new(config).unwrap();
    let mut r = ptr::null_mut();
    (unsafe { cft_run_toml(c.as_ptr(), &mut r) }, r)
}

#[test]
fn status_codes_mirror_exit_codes() {
    let cases = [
        (Error::Usage("x".into()), CFT_ERR_USAGE),
        (Error::Domain("x".into()), CFT_ERR_DOMAIN),
        (Error::Connectivity("x".into()), CFT_ERR_DOMAIN),
        (Error::Structure("x".into()), CFT_ERR_DOMAIN),
        (Error::Fit("x".into()), CFT_ERR_DOMAIN),
        (Error::SizeLimit { what: "x", value: 2, limit: 1 }, CFT_ERR_SIZE_LIMIT),
        (Error::Numeric { message: "x".into(), achieved: 1.0 }, CFT_ERR_NUMERIC),
        (Error::Singularity("x".into()), CFT_ERR_SINGULARITY),
        (Error::Io("x".into()), CFT_ERR_IO),
    ];
    for (e, code) in cases {
        assert_eq!(exit_code(&e), code, "{e}");
    }
}

#[test]
fn version_and_error_slot() {
    let v = unsafe { CStr::from_ptr(cft_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
    let mut x = 0.0;
    assert_eq!(unsafe { cft_lve_oracle_g2(-0.01, 1, ptr::null_mut()) }, CFT_ERR_USAGE);
    assert!(last_error().unwrap().contains("null"));
    assert_eq!(unsafe { cft_lve_oracle_g2(-0.01, 1, &mut x) }, CFT_OK);
    assert!(last_error().is_none());
    assert_eq!(unsafe { cft_lve_oracle_g2(-0.01, 0, &mut x) }, CFT_ERR_DOMAIN);
    assert!(last_error().is_some());
    unsafe {
        cft_string_free(ptr::null_mut());
        cft_report_free(ptr::null_mut());
        cft_series_free(ptr::null_mut());
        cft_tensor_free(ptr::null_mut());
    }
}

#[test]
fn error_slot_is_per_thread() {
    assert_eq!(unsafe { cft_invariant_count(4, ptr::null_mut()) }, CFT_ERR_USAGE);
    let other = std::thread::spawn(|| last_error()).join().unwrap();
    assert!(other.is_none());
    assert!(last_error().is_some());
}

#[test]
fn run_toml_report_round_trip() {
    let (code, r) = run("command = \"invariants\"\nd = 4\nseed = 3\n");
    assert_eq!(code, CFT_OK);
    let mut n = 0;
    assert_eq!(unsafe { cft_report_record_count(r, &mut n) }, CFT_OK);
    assert_eq!(n, 7);
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { cft_report_summary_json(r, &mut s) }, CFT_OK);
    let summary: serde_json::Value = serde_json::from_str(&take_string(s)).unwrap();
    assert_eq!(summary["count"], 7);
    assert_eq!(summary["necklace"], 3);
    assert_eq!(unsafe { cft_report_jsonl(r, false, &mut s) }, CFT_OK);
    assert_eq!(take_string(s).lines().count(), 1 + 7 + 1);
    assert_eq!(unsafe { cft_report_jsonl(r, true, &mut s) }, CFT_OK);
    assert!(take_string(s).lines().last().unwrap().contains("\"meta\""));
    assert_eq!(unsafe { cft_report_csv(r, &mut s) }, CFT_OK);
    assert_eq!(take_string(s).lines().count(), 1 + 7);
    unsafe { cft_report_free(r) };
}

#[test]
fn run_toml_failures() {
    assert_eq!(run("bogus = 1").0, CFT_ERR_USAGE);
    assert_eq!(run("command = \"nope\"").0, CFT_ERR_USAGE);
    assert_eq!(run("command = \"invariants\"\nd = 9\n").0, CFT_ERR_DOMAIN);
    assert_eq!(run("command = \"forest-verify\"\nn = 7\n").0, CFT_ERR_SIZE_LIMIT);
    assert_eq!(run("command = \"mlve-demo\"\nlambda = 0.0\nlambda_im = 0.3\n").0, CFT_ERR_SINGULARITY);
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { cft_run_toml(ptr::null(), &mut r) }, CFT_ERR_USAGE);
    let bad = [0xffu8, 0];
    assert_eq!(unsafe { cft_run_toml(bad.as_ptr().cast(), &mut r) }, CFT_ERR_USAGE);
    assert!(r.is_null());
}

#[test]
fn forest_counts_and_guard() {
    let mut count = 0;
    for (n, expect) in [(1, 1), (2, 2), (3, 7), (4, 38), (5, 291)] {
        assert_eq!(unsafe { cft_forest_count(n, false, &mut count) }, CFT_OK);
        assert_eq!(count, expect);
    }
    assert_eq!(unsafe { cft_forest_count(12, false, &mut count) }, CFT_ERR_SIZE_LIMIT);
}

#[test]
fn forest_formula_and_matrix() {
    let t = [0.3, -0.7, 0.1, 0.9, -0.2, 0.5];
    let mut res = 1.0;
    assert_eq!(unsafe { cft_forest_formula_residual(4, t.as_ptr(), t.len(), false, &mut res) }, CFT_OK);
    assert!(res < 1e-8);
    assert_eq!(unsafe { cft_forest_formula_residual(4, t.as_ptr(), 5, false, &mut res) }, CFT_ERR_DOMAIN);

    // Path 0-1-2 with weights a, b: X = [[1,a,min],[a,1,b],[min,b,1]].
    let pairs = [0usize, 1, 1, 2];
    let w = [0.5, 0.25];
    let mut eig = 0.0;
    assert_eq!(unsafe { cft_forest_min_eigenvalue(3, pairs.as_ptr(), 2, w.as_ptr(), &mut eig) }, CFT_OK);
    let m = nalgebra::Matrix3::<f64>::new(1.0, 0.5, 0.25, 0.5, 1.0, 0.25, 0.25, 0.25, 1.0);
    let expect = m.symmetric_eigenvalues().min();
    assert!((eig - expect).abs() < 1e-12);
    let cycle = [0usize, 1, 1, 2, 2, 0];
    let w3 = [0.5; 3];
    assert_eq!(unsafe { cft_forest_min_eigenvalue(3, cycle.as_ptr(), 3, w3.as_ptr(), &mut eig) }, CFT_ERR_DOMAIN);
    let bad_w = [0.5, 1.5];
    assert_eq!(unsafe { cft_forest_min_eigenvalue(3, pairs.as_ptr(), 2, bad_w.as_ptr(), &mut eig) }, CFT_ERR_DOMAIN);
}

#[test]
fn tree_weights_through_both_routes() {
    let mut chk = CftWeightCheck::default();
    let triangle = [0usize, 1, 1, 2, 0, 2];
    assert_eq!(unsafe { cft_tree_weight_check(3, triangle.as_ptr(), 3, false, &mut chk) }, CFT_OK);
    assert_eq!(chk, CftWeightCheck { trees: 3, sums_to_one: true, routes_agree: true });
    let k4: Vec<usize> = (0..4).flat_map(|i| (i + 1..4).flat_map(move |j| [i, j])).collect();
    assert_eq!(unsafe { cft_tree_weight_check(4, k4.as_ptr(), 6, false, &mut chk) }, CFT_OK);
    assert_eq!(chk.trees, 16);
    assert!(chk.sums_to_one && chk.routes_agree);
    let split = [0usize, 1, 2, 3];
    assert_eq!(unsafe { cft_tree_weight_check(4, split.as_ptr(), 2, false, &mut chk) }, CFT_ERR_DOMAIN);
    assert!(last_error().unwrap().contains("connected"));
}

#[test]
fn two_level_counts() {
    let mut c = 0;
    for n in 1..=5usize {
        assert_eq!(unsafe { cft_two_level_tree_count(n, false, &mut c) }, CFT_OK);
        let expect = if n == 1 { 1 } else { (1 << (n - 1)) * n.pow(n as u32 - 2) };
        assert_eq!(c, expect);
    }
}

#[test]
fn d0_series_handle() {
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { cft_d0_series_new(20, &mut s) }, CFT_OK);
    let (mut len, mut a) = (0, 0.0);
    assert_eq!(unsafe { cft_series_len(s, &mut len) }, CFT_OK);
    assert_eq!(len, 21);
    for (k, expect) in [(0, 1.0), (1, -3.0), (2, 52.5), (3, -1732.5)] {
        assert_eq!(unsafe { cft_series_coeff(s, k, &mut a) }, CFT_OK);
        assert_eq!(a, expect);
    }
    assert_eq!(unsafe { cft_series_coeff(s, 21, &mut a) }, CFT_ERR_DOMAIN);
    let mut r = 0.0;
    assert_eq!(unsafe { cft_series_ratio_over_n(s, 19, &mut r) }, CFT_OK);
    assert!((r - 77.0 * 79.0 / 380.0).abs() < 1e-9);
    assert_eq!(unsafe { cft_series_ratio_over_n(s, 20, &mut r) }, CFT_ERR_DOMAIN);
    let (mut re, mut im, mut zr, mut zi) = (0.0, 0.0, 0.0, 0.0);
    assert_eq!(unsafe { cft_series_partial_sum(s, 0.001, 0.0, 6, &mut re, &mut im) }, CFT_OK);
    assert_eq!(unsafe { cft_d0_partition(0.001, 0.0, &mut zr, &mut zi) }, CFT_OK);
    assert!((re - zr).abs() < 1e-9 && im == 0.0 && zi.abs() < 1e-15);
    unsafe { cft_series_free(s) };
    assert_eq!(unsafe { cft_series_len(ptr::null(), &mut len) }, CFT_ERR_USAGE);
}

#[test]
fn remainder_fit_synthetic() {
    let (k, sigma) = (0.7f64, 3.0f64);
    let mut orders = Vec::new();
    let mut lams = Vec::new();
    let mut rems = Vec::new();
    for l in [0.01f64, 0.05] {
        for n in 2..=6usize {
            let fact: f64 = (1..=n).map(|i| i as f64).product();
            orders.push(n);
            lams.push(l);
            rems.push(k * sigma.powi(n as i32) * fact * l.powi(n as i32));
        }
    }
    let mut fit = CftRemainderFit::default();
    let code = unsafe { cft_remainder_fit(orders.as_ptr(), lams.as_ptr(), rems.as_ptr(), orders.len(), &mut fit) };
    assert_eq!(code, CFT_OK);
    assert!((fit.k / k - 1.0).abs() < 1e-8 && (fit.sigma / sigma - 1.0).abs() < 1e-9);
    assert_eq!(unsafe { cft_remainder_fit(ptr::null(), ptr::null(), ptr::null(), 0, &mut fit) }, CFT_ERR_DOMAIN);
}

#[test]
fn vector_model_entry_points() {
    let (mut g, mut re, mut im) = (0.0, 0.0, 0.0);
    assert_eq!(unsafe { cft_lve_oracle_g2(-0.03, 4, &mut g) }, CFT_OK);
    assert!((g - 0.965_289_655_929_456).abs() < 1e-12);
    let mut sum = CftLveSum::default();
    assert_eq!(unsafe { cft_lve_partial_sum(-0.03, 0.0, 4, 4, 20_000, 1, &mut sum) }, CFT_OK);
    assert!((sum.re - g).abs() <= sum.tail_bound + 4.0 * sum.std_error);
    assert_eq!(unsafe { cft_lve_partial_sum(-0.02, 0.01, 0, 6, 2, 0, &mut sum) }, CFT_OK);
    assert_eq!(unsafe { cft_catalan_g2(-0.02, 0.01, &mut re, &mut im) }, CFT_OK);
    assert!(((sum.re - re).powi(2) + (sum.im - im).powi(2)).sqrt() <= sum.tail_bound);
    assert_eq!(sum.std_error, 0.0);
    let mut r = 0.0;
    assert_eq!(unsafe { cft_lve_taylor_remainder(-0.002, 3, 3, &mut r) }, CFT_OK);
    assert!(r != 0.0 && r.abs() < 1e-5);
    assert_eq!(cft_resolvent_bound(0.3, 0.0), 1.0);
    assert!(cft_resolvent_bound(-0.3, 1e-300) > 1e10 || cft_resolvent_bound(-0.3, 0.0).is_infinite());
    let mut inside = false;
    assert_eq!(unsafe { cft_cardioid_contains(0.05, 0.0, CFT_CARDIOID_UNIFORM_HALF_DISK, &mut inside) }, CFT_OK);
    assert!(inside);
    assert_eq!(unsafe { cft_cardioid_contains(-0.9, 0.0, CFT_CARDIOID_STANDARD, &mut inside) }, CFT_OK);
    assert!(!inside);
    assert_eq!(unsafe { cft_cardioid_contains(0.1, 0.0, 9, &mut inside) }, CFT_ERR_USAGE);
}

#[test]
fn mlve_entry_points() {
    let (mut a, mut b, mut c, mut d) = (0.0, 0.0, 0.0, 0.0);
    assert_eq!(unsafe { cft_mlve_oracle_log_z(2, 1, 3, 0.1, 0.0, &mut a, &mut b) }, CFT_OK);
    assert_eq!(unsafe { cft_mlve_truncated_log_z(2, 1, 3, 0.1, 0.0, 2, false, &mut c, &mut d) }, CFT_OK);
    assert!(a < 0.0 && b.abs() < 1e-15);
    assert!((a - c).abs() < 1e-5 && d.abs() < 1e-12);
    assert_eq!(unsafe { cft_mlve_oracle_log_z(2, 1, 3, 0.0, 0.4, &mut a, &mut b) }, CFT_ERR_SINGULARITY);
    assert_eq!(unsafe { cft_mlve_truncated_log_z(2, 1, 3, 0.1, 0.0, 0, false, &mut c, &mut d) }, CFT_ERR_DOMAIN);
    let mut worst = 0.0;
    assert_eq!(unsafe { cft_mlve_max_fermionic_minor(3, 50, 1, &mut worst) }, CFT_OK);
    assert!(worst > 0.0 && worst <= 1.0 + 1e-12);
}

#[test]
fn tensor_handles() {
    let (mut count, mut mask, mut melonic) = (0, 0u32, false);
    assert_eq!(unsafe { cft_invariant_count(4, &mut count) }, CFT_OK);
    assert_eq!(count, 7);
    let mut necklaces = 0;
    for k in 0..count {
        assert_eq!(unsafe { cft_invariant_mask(4, k, &mut mask, &mut melonic) }, CFT_OK);
        assert_eq!(mask.count_ones() == 1, melonic);
        necklaces += usize::from(!melonic);
    }
    assert_eq!(necklaces, 3);
    assert_eq!(unsafe { cft_invariant_mask(4, 7, &mut mask, &mut melonic) }, CFT_ERR_DOMAIN);

    // Rank 2, side 2: T = diag(1, i). T.T = 2; V_{1} = Tr((T T^†)^2) = 2.
    let re = [1.0, 0.0, 0.0, 0.0];
    let im = [0.0, 0.0, 0.0, 1.0];
    let mut t = ptr::null_mut();
    assert_eq!(unsafe { cft_tensor_from_parts(2, 2, re.as_ptr(), im.as_ptr(), 4, false, &mut t) }, CFT_OK);
    let (mut norm, mut v) = (0.0, 0.0);
    assert_eq!(unsafe { cft_tensor_norm_sqr(t, &mut norm) }, CFT_OK);
    assert_eq!(norm, 2.0);
    assert_eq!(unsafe { cft_tensor_invariant(t, 1, &mut v) }, CFT_OK);
    assert!((v - 2.0).abs() < 1e-15);
    assert_eq!(unsafe { cft_tensor_invariant(t, 3, &mut v) }, CFT_ERR_DOMAIN);
    let swap_re = [0.0, 1.0, 1.0, 0.0];
    let zero = [0.0; 4];
    let mut u = ptr::null_mut();
    assert_eq!(unsafe { cft_tensor_act(t, 1, swap_re.as_ptr(), zero.as_ptr(), &mut u) }, CFT_OK);
    assert_eq!(unsafe { cft_tensor_invariant(u, 1, &mut v) }, CFT_OK);
    assert!((v - 2.0).abs() < 1e-15);
    assert_eq!(unsafe { cft_tensor_act(t, 3, swap_re.as_ptr(), zero.as_ptr(), &mut u) }, CFT_ERR_DOMAIN);
    unsafe {
        cft_tensor_free(u);
        cft_tensor_free(t);
    }
    assert_eq!(unsafe { cft_tensor_from_parts(2, 2, re.as_ptr(), im.as_ptr(), 3, false, &mut t) }, CFT_ERR_DOMAIN);

    let mut g = ptr::null_mut();
    assert_eq!(unsafe { cft_tensor_gaussian(3, 3, 9, false, &mut g) }, CFT_OK);
    let mut g2 = ptr::null_mut();
    assert_eq!(unsafe { cft_tensor_gaussian(3, 3, 9, false, &mut g2) }, CFT_OK);
    let (mut a, mut b) = (0.0, 0.0);
    unsafe {
        cft_tensor_norm_sqr(g, &mut a);
        cft_tensor_norm_sqr(g2, &mut b);
        cft_tensor_free(g);
        cft_tensor_free(g2);
    }
    assert_eq!(a, b);
    let mut e = 0.0;
    assert_eq!(unsafe { cft_expected_invariant(3, 2, 1, &mut e) }, CFT_OK);
    assert_eq!(e, 2.0 + 1.0);
}

#[test]
fn rarefaction_and_power_counting() {
    let (mut q, mut ok) = (1.0, false);
    assert_eq!(unsafe { cft_rarefaction(2, 4, 120, &mut q, &mut ok) }, CFT_OK);
    assert!(ok && q < 1e-3);
    let cutoffs = [8u64, 16, 32, 64];
    let mut pc = CftPowerCount::default();
    for (graph, growth) in [
        (CFT_GRAPH_DIVERGENT_TADPOLE, CFT_GROWTH_LOGARITHMIC),
        (CFT_GRAPH_CONVERGENT_TADPOLE, CFT_GROWTH_BOUNDED),
        (CFT_GRAPH_LINEAR_VACUUM, CFT_GROWTH_LINEAR),
        (CFT_GRAPH_LOG_VACUUM, CFT_GROWTH_LOGARITHMIC),
    ] {
        assert_eq!(unsafe { cft_power_count(graph, cutoffs.as_ptr(), 4, &mut pc) }, CFT_OK);
        assert_eq!(pc.growth, growth, "graph {graph}");
    }
    assert_eq!(unsafe { cft_power_count(7, cutoffs.as_ptr(), 4, &mut pc) }, CFT_ERR_USAGE);
}

#[test]
fn header_declares_every_export() {
    let header = include_str!("../include/constructive.h");
    let source = include_str!("../src/lib.rs");
    assert!(header.starts_with("#ifndef CONSTRUCTIVE_H"));
    let mut exports = 0;
    for line in source.lines().filter(|l| l.contains("extern \"C\" fn cft_")) {
        let name = line.split("fn ").nth(1).unwrap().split('(').next().unwrap();
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
        exports += 1;
    }
    assert!(exports >= 40);
    for opaque in ["CftReport", "CftSeries", "CftTensor"] {
        assert!(header.contains(&format!("typedef struct {opaque} {opaque};")));
    }
    for code in ["CFT_OK 0", "CFT_ERR_USAGE 2", "CFT_ERR_SIZE_LIMIT 4", "CFT_ERR_PANIC 8"] {
        assert!(header.contains(&format!("#define {code}")));
    }
}
