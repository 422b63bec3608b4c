//! Shared integration rules: Gauss rules from `gauss-quad`, adaptive Gauss-Kronrod for
//! complex integrands, half-line horizon extension and the ordered-cell rule for
//! integrands built from minima over `[0,1]^k`.

use std::num::NonZeroUsize;
use std::ops::{Add, Mul};

use gauss_quad::hermite::GaussHermite;
use gauss_quad::laguerre::GaussLaguerre;
use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex64;
use num_traits::Zero;

use crate::error::{Error, Result};

/// Value with an absolute error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate<T> {
    pub value: T,
    pub error: f64,
}

fn nz(m: usize) -> NonZeroUsize {
    NonZeroUsize::new(m.max(1)).unwrap()
}

/// Gauss-Legendre nodes and weights mapped to `[0,1]`.
pub fn legendre_unit(m: usize) -> Vec<(f64, f64)> {
    GaussLegendre::new(nz(m))
        .as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w))
        .collect()
}

/// Nodes and weights for expectations under the standard normal law.
pub fn normal_rule(m: usize) -> Vec<(f64, f64)> {
    let s = std::f64::consts::PI.sqrt();
    GaussHermite::new(nz(m))
        .as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (x * std::f64::consts::SQRT_2, w / s))
        .collect()
}

/// Nodes and weights for expectations under Gamma(shape, 1) with integer shape.
pub fn gamma_rule(m: usize, shape: u32) -> Vec<(f64, f64)> {
    let alpha = f64::from(shape) - 1.0;
    let norm: f64 = (1..shape).map(f64::from).product();
    GaussLaguerre::new(nz(m), alpha.try_into().expect("shape >= 1"))
        .as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (x, w / norm))
        .collect()
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: FnMut(f64) -> Complex64>(f: &mut F, a: f64, b: f64) -> (Complex64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kron += s * WGK[j];
        if j % 2 == 1 {
            gauss += s * WG[j / 2];
        }
    }
    let value = kron * h;
    let err = ((kron - gauss) * h).norm();
    (value, err)
}

/// Adaptive Gauss-Kronrod 7/15 on `[a,b]`, bisecting the worst panel until the summed
/// error estimate drops below `max(abs_tol, rel_tol*|I|)`.
pub fn adaptive<F: FnMut(f64) -> Complex64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_panels: usize,
) -> Result<Estimate<Complex64>> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::domain("integration limits must be finite"));
    }
    if a == b {
        return Ok(Estimate {
            value: Complex64::zero(),
            error: 0.0,
        });
    }
    let (v, e) = gk15(&mut f, a, b);
    let mut panels = vec![(a, b, v, e)];
    loop {
        let total: Complex64 = panels.iter().map(|p| p.2).sum();
        let err: f64 = panels.iter().map(|p| p.3).sum();
        if !total.re.is_finite() || !total.im.is_finite() {
            return Err(Error::numeric("non-finite integrand", f64::INFINITY));
        }
        if err <= abs_tol.max(rel_tol * total.norm()) {
            return Ok(Estimate {
                value: total,
                error: err,
            });
        }
        if panels.len() >= max_panels {
            return Err(Error::numeric("adaptive quadrature did not converge", err));
        }
        let (idx, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .unwrap();
        let (lo, hi, _, _) = panels.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&mut f, lo, mid);
        let (v2, e2) = gk15(&mut f, mid, hi);
        panels.push((lo, mid, v1, e1));
        panels.push((mid, hi, v2, e2));
    }
}

/// Integral over `[a, ∞)` by successive panels of doubling length, stopping once two
/// consecutive panels contribute less than `rel_tol` of the running total.
pub fn half_line<F: FnMut(f64) -> Complex64>(
    mut f: F,
    a: f64,
    first_panel: f64,
    rel_tol: f64,
) -> Result<Estimate<Complex64>> {
    let mut lo = a;
    let mut len = first_panel;
    let mut total = Complex64::zero();
    let mut err = 0.0;
    let mut quiet = 0;
    for _ in 0..60 {
        let est = adaptive(&mut f, lo, lo + len, rel_tol * total.norm(), rel_tol, 4000)?;
        total += est.value;
        err += est.error;
        if est.value.norm() + est.error <= rel_tol * total.norm() {
            quiet += 1;
            if quiet == 2 {
                return Ok(Estimate { value: total, error: err + est.value.norm() });
            }
        } else {
            quiet = 0;
        }
        lo += len;
        len *= 2.0;
    }
    Err(Error::numeric("integration horizon did not converge", err))
}

/// Calls `f` on every permutation of `0..k` (Heap's algorithm).
pub fn for_each_permutation<F: FnMut(&[usize])>(k: usize, mut f: F) {
    let mut p: Vec<usize> = (0..k).collect();
    let mut c = vec![0usize; k];
    f(&p);
    let mut i = 0;
    while i < k {
        if c[i] < i {
            if i % 2 == 0 {
                p.swap(0, i);
            } else {
                p.swap(c[i], i);
            }
            f(&p);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

/// Tensor Gauss-Legendre rule of order `m` applied cell by cell over the `k!` orderings
/// `w_{π(0)} > w_{π(1)} > ...` of `[0,1]^k`, each cell mapped to a cube by
/// `y_i = u_1 ⋯ u_i`. Exact-to-rounding for integrands that are polynomial or smooth
/// within each ordering cell, such as functions of forest-matrix entries.
pub fn ordered_cells<T, F>(k: usize, m: usize, mut f: F) -> T
where
    T: Zero + Copy + Add<Output = T> + Mul<f64, Output = T>,
    F: FnMut(&[f64]) -> T,
{
    if k == 0 {
        return f(&[]);
    }
    let rule = legendre_unit(m);
    let mut total = T::zero();
    let mut w = vec![0.0; k];
    let mut idx = vec![0usize; k];
    for_each_permutation(k, |perm| {
        idx.iter_mut().for_each(|x| *x = 0);
        loop {
            let mut y = 1.0;
            let mut jac = 1.0;
            for i in 0..k {
                let (u, wu) = rule[idx[i]];
                y *= u;
                w[perm[i]] = y;
                jac *= wu * u.powi((k - 1 - i) as i32);
            }
            total = total + f(&w) * jac;
            let mut d = 0;
            loop {
                if d == k {
                    return;
                }
                idx[d] += 1;
                if idx[d] < m {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
        }
    });
    total
}

/// [`ordered_cells`] with order doubling from 4 until two estimates agree within
/// `tol·max(1, |value|)`.
pub fn ordered_cells_converged<F>(k: usize, tol: f64, mut f: F) -> Result<Estimate<Complex64>>
where
    F: FnMut(&[f64]) -> Complex64,
{
    let mut m = 4;
    let mut prev = ordered_cells(k, m, &mut f);
    if k == 0 {
        return Ok(Estimate { value: prev, error: 0.0 });
    }
    loop {
        let next_m = m * 2;
        let next = ordered_cells(k, next_m, &mut f);
        let diff = (next - prev).norm();
        if diff <= tol * next.norm().max(1.0) {
            return Ok(Estimate { value: next, error: diff });
        }
        if next_m >= 32 {
            return Err(Error::numeric("cell quadrature did not reach tolerance", diff));
        }
        prev = next;
        m = next_m;
    }
}
