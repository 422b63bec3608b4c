//! Loop vertex expansion of the two-point function of the quartic O(N) vector model,
//! `G₂ = Σ_T zⁿ ∫dw ∏_i dμ(β_i) exp((z/2N) β·X^T(w)·β)` over rooted plane trees.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, SQRT_2};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::Serialize;

use crate::combinatorics::{forest_matrix_with_paths, Forest, ForestEdge};
use crate::error::{CostGuard, Error, Result};
use crate::quadrature::{adaptive, gamma_rule, ordered_cells, Estimate};

/// Largest tree order enumerated without the exponential-cost flag.
pub const MAX_TREE_ORDER: u64 = 12;
/// Largest N accepted by the one-dimensional oracles.
pub const MAX_ORACLE_N: u64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CardioidVariant {
    /// `ρ < cos²(φ/2)`.
    Standard,
    /// Quarter disks `4ρ < 1` for `|φ| < π/2` joined to `4ρ < cos²(|φ|/2 - π/4)` for
    /// `π/2 ≤ |φ| < 3π/2`, with `φ` read on the Riemann surface of the logarithm.
    Extended,
    /// `16ρ < 1` and `|φ| ≤ π/2`.
    UniformHalfDisk,
}

/// Membership for `λ = ρ e^{iφ}` with explicit angle bookkeeping.
pub fn cardioid_contains_polar(rho: f64, phi: f64, variant: CardioidVariant) -> bool {
    if rho == 0.0 {
        return true;
    }
    let a = phi.abs();
    match variant {
        CardioidVariant::Standard => a <= PI && rho < (phi / 2.0).cos().powi(2),
        CardioidVariant::Extended => {
            if a < FRAC_PI_2 {
                4.0 * rho < 1.0
            } else if a < 1.5 * PI {
                4.0 * rho < (a / 2.0 - FRAC_PI_4).cos().powi(2)
            } else {
                false
            }
        }
        CardioidVariant::UniformHalfDisk => a <= FRAC_PI_2 && 16.0 * rho < 1.0,
    }
}

/// Membership with the principal angle of `λ`.
pub fn cardioid_contains(lambda: Complex64, variant: CardioidVariant) -> bool {
    let (rho, phi) = lambda.to_polar();
    cardioid_contains_polar(rho, phi, variant)
}

/// `sup_τ |1/(1 - i√λ τ)| = 1/cos(φ/2)` for real τ and principal `√λ`.
pub fn resolvent_bound(lambda: Complex64) -> f64 {
    1.0 / (lambda.arg() / 2.0).cos()
}

/// Plane tree with a marked root, vertices labeled in preorder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RootedPlaneTree {
    children: Vec<Vec<usize>>,
    parent: Vec<Option<usize>>,
}

impl RootedPlaneTree {
    /// Tree of a Dyck word: `true` descends to a new child, `false` returns to the parent.
    pub fn from_dyck(word: &[bool]) -> Result<Self> {
        let mut children = vec![Vec::new()];
        let mut parent = vec![None];
        let mut stack = vec![0usize];
        for &up in word {
            if up {
                let v = children.len();
                let top = *stack.last().unwrap();
                children[top].push(v);
                children.push(Vec::new());
                parent.push(Some(top));
                stack.push(v);
            } else {
                if stack.len() == 1 {
                    return Err(Error::structure("unbalanced Dyck word"));
                }
                stack.pop();
            }
        }
        if stack.len() != 1 {
            return Err(Error::structure("unbalanced Dyck word"));
        }
        Ok(RootedPlaneTree { children, parent })
    }

    pub fn order(&self) -> usize {
        self.children.len() - 1
    }

    pub fn children(&self) -> &[Vec<usize>] {
        &self.children
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.parent[v]
    }

    /// Corner counts: tree degree, plus one at the root for the cilium. Sum is `2n+1`.
    pub fn corner_degrees(&self) -> Vec<u32> {
        self.children
            .iter()
            .map(|c| c.len() as u32 + 1)
            .collect()
    }

    /// Edges `(parent(v), v)` for `v = 1..=n` as a forest on `n+1` vertices.
    pub fn forest(&self) -> Forest {
        let edges = (1..self.children.len())
            .map(|v| ForestEdge {
                id: v - 1,
                u: self.parent[v].unwrap(),
                v,
            })
            .collect();
        Forest::new(self.children.len(), edges).expect("plane tree is acyclic")
    }
}

/// All rooted plane trees with `n` edges (Catalan many), in lexicographic Dyck order.
pub fn enumerate_rooted_plane_trees(n: usize, guard: CostGuard) -> Result<Vec<RootedPlaneTree>> {
    guard.check("plane tree order", n as u64, MAX_TREE_ORDER)?;
    let mut out = Vec::new();
    let mut word = Vec::with_capacity(2 * n);
    fn rec(n: usize, open: usize, close: usize, word: &mut Vec<bool>, out: &mut Vec<RootedPlaneTree>) {
        if close == n {
            out.push(RootedPlaneTree::from_dyck(word).unwrap());
            return;
        }
        if open < n {
            word.push(true);
            rec(n, open + 1, close, word, out);
            word.pop();
        }
        if close < open {
            word.push(false);
            rec(n, open, close + 1, word, out);
            word.pop();
        }
    }
    rec(n, 0, 0, &mut word, &mut out);
    Ok(out)
}

/// `(1 - √(1-4z))/(2z)`, the generating function of Catalan numbers.
pub fn catalan_g2(z: Complex64) -> Result<Complex64> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::domain("z must be finite"));
    }
    if z.norm() < 1e-8 {
        return Ok(Complex64::one() + z + z * z * 2.0 + z * z * z * 5.0);
    }
    let one = Complex64::one();
    Ok((one - (one - z * 4.0).sqrt()) / (z * 2.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dimension {
    Finite(u64),
    Infinite,
}

impl Dimension {
    pub fn inverse(&self) -> f64 {
        match *self {
            Dimension::Finite(n) => 1.0 / n as f64,
            Dimension::Infinite => 0.0,
        }
    }
}

/// Coupling and vector dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelPoint {
    pub z: Complex64,
    pub n: Dimension,
}

impl ModelPoint {
    pub fn new(z: Complex64, n: Dimension) -> Result<Self> {
        if matches!(n, Dimension::Finite(0)) {
            return Err(Error::domain("N must be positive"));
        }
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::domain("z must be finite"));
        }
        Ok(ModelPoint { z, n })
    }

    pub fn real(z: f64, n: u64) -> Result<Self> {
        ModelPoint::new(Complex64::new(z, 0.0), Dimension::Finite(n))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Quadrature,
    MonteCarlo,
    ClosedFormLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TreeAmplitude {
    pub value: Complex64,
    pub std_error: f64,
    pub method: Method,
}

/// Sampling controls. Trees of order at most `quadrature_max_order` are integrated by
/// tensor Gauss rules, larger ones by Monte Carlo with `samples` draws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SamplingOptions {
    pub samples: u64,
    pub seed: u64,
    pub quadrature_max_order: usize,
}

impl Default for SamplingOptions {
    fn default() -> Self {
        SamplingOptions {
            samples: 20_000,
            seed: 0,
            quadrature_max_order: 2,
        }
    }
}

fn tree_stream(order: usize, index: usize) -> u64 {
    ((order as u64) << 32) | index as u64
}

pub(crate) fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn quadratic_form(x: &nalgebra::DMatrix<f64>, b: &[f64]) -> f64 {
    let n = b.len();
    let mut s = 0.0;
    for i in 0..n {
        let mut r = 0.0;
        for j in 0..n {
            r += x[(i, j)] * b[j];
        }
        s += b[i] * r;
    }
    s
}

fn check_point(p: &ModelPoint) -> Result<()> {
    if !cardioid_contains(-p.z, CardioidVariant::UniformHalfDisk) {
        return Err(Error::domain(format!(
            "z = {} outside the uniform half-disk 16|z| < 1, Re z <= 0",
            p.z
        )));
    }
    Ok(())
}

fn tree_term_quadrature(tree: &RootedPlaneTree, c: Complex64, mb: usize, mw: usize) -> Complex64 {
    let degs = tree.corner_degrees();
    let rules: Vec<Vec<(f64, f64)>> = degs.iter().map(|&d| gamma_rule(mb, d)).collect();
    let paths = tree.forest().paths();
    let k = degs.len();
    ordered_cells(tree.order(), mw, |w| {
        let x = forest_matrix_with_paths(&paths, w);
        let mut idx = vec![0usize; k];
        let mut beta = vec![0.0; k];
        let mut acc = Complex64::zero();
        loop {
            let mut wt = 1.0;
            for i in 0..k {
                let (b, wb) = rules[i][idx[i]];
                beta[i] = b;
                wt *= wb;
            }
            acc += (c * quadratic_form(&x, &beta)).exp() * wt;
            let mut d = 0;
            loop {
                if d == k {
                    return acc;
                }
                idx[d] += 1;
                if idx[d] < mb {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
        }
    })
}

/// Welford accumulator for complex samples; variance is `E|v - mean|²`.
#[derive(Default)]
pub(crate) struct Moments {
    count: u64,
    mean: Complex64,
    m2_re: f64,
    m2_im: f64,
}

impl Moments {
    pub(crate) fn push(&mut self, v: Complex64) {
        self.count += 1;
        let d = v - self.mean;
        self.mean += d / self.count as f64;
        let d2 = v - self.mean;
        self.m2_re += d.re * d2.re;
        self.m2_im += d.im * d2.im;
    }

    pub(crate) fn mean(&self) -> Complex64 {
        self.mean
    }

    /// Standard errors of the real and imaginary parts of the mean.
    pub(crate) fn std_errors(&self) -> (f64, f64) {
        if self.count < 2 {
            return (f64::INFINITY, f64::INFINITY);
        }
        let n = self.count as f64;
        ((self.m2_re / (n - 1.0) / n).sqrt(), (self.m2_im / (n - 1.0) / n).sqrt())
    }
}

/// One tree term `zⁿ E[exp((z/2N) β·X^T(w)·β)]`, `β_i ~ Gamma(d_i)`, `w ~ U[0,1]ⁿ`.
/// `stream` selects an independent random stream for Monte Carlo.
pub fn lve_tree_term(
    tree: &RootedPlaneTree,
    p: &ModelPoint,
    opts: &SamplingOptions,
    stream: u64,
) -> Result<TreeAmplitude> {
    check_point(p)?;
    let n = tree.order();
    let zn = p.z.powu(n as u32);
    if p.n == Dimension::Infinite {
        return Ok(TreeAmplitude { value: zn, std_error: 0.0, method: Method::ClosedFormLimit });
    }
    let c = p.z * (0.5 * p.n.inverse());
    if n <= opts.quadrature_max_order {
        let fine = tree_term_quadrature(tree, c, 24, 6);
        let coarse = tree_term_quadrature(tree, c, 16, 4);
        return Ok(TreeAmplitude {
            value: zn * fine,
            std_error: zn.norm() * (fine - coarse).norm(),
            method: Method::Quadrature,
        });
    }
    if opts.samples < 2 {
        return Err(Error::domain("Monte Carlo needs at least 2 samples"));
    }
    let degs = tree.corner_degrees();
    let gammas: Vec<Gamma<f64>> = degs.iter().map(|&d| Gamma::new(f64::from(d), 1.0).unwrap()).collect();
    let paths = tree.forest().paths();
    let mut rng = rng_for(opts.seed, stream);
    let mut w = vec![0.0; n];
    let mut beta = vec![0.0; n + 1];
    let mut acc = Moments::default();
    for _ in 0..opts.samples {
        w.iter_mut().for_each(|x| *x = rng.gen::<f64>());
        for (b, g) in beta.iter_mut().zip(&gammas) {
            *b = g.sample(&mut rng);
        }
        let x = forest_matrix_with_paths(&paths, &w);
        acc.push((c * quadratic_form(&x, &beta)).exp());
    }
    let (se_re, se_im) = acc.std_errors();
    Ok(TreeAmplitude {
        value: zn * acc.mean(),
        std_error: zn.norm() * se_re.hypot(se_im),
        method: Method::MonteCarlo,
    })
}

/// `Σ_{n>n_max} C_n (κ|z|)ⁿ` with `κ = 4/cos²(φ/2)`, `φ = arg(-z)`; infinite when the
/// series diverges.
pub fn lve_tail_bound(z: Complex64, n_max: usize) -> f64 {
    if z == Complex64::zero() {
        return 0.0;
    }
    let kappa = 4.0 / ((-z).arg() / 2.0).cos().powi(2);
    let x = kappa * z.norm();
    if 4.0 * x >= 1.0 {
        return f64::INFINITY;
    }
    let mut term = 1.0;
    for k in 0..=n_max {
        term *= x * 2.0 * (2 * k + 1) as f64 / (k + 2) as f64;
    }
    let mut total = 0.0;
    let mut k = n_max + 1;
    while term > 1e-18 * total && k < 100_000 {
        total += term;
        term *= x * 2.0 * (2 * k + 1) as f64 / (k + 2) as f64;
        k += 1;
    }
    total + term / (1.0 - 4.0 * x)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LveSum {
    pub value: Complex64,
    pub tail_bound: f64,
    pub std_error: f64,
    /// Sum of tree terms at each order `0..=n_max`.
    pub orders: Vec<Complex64>,
}

/// Truncated loop vertex expansion up to trees of order `n_max`.
pub fn lve_partial_sum(p: &ModelPoint, n_max: usize, opts: &SamplingOptions) -> Result<LveSum> {
    check_point(p)?;
    let mut value = Complex64::zero();
    let mut var = 0.0;
    let mut orders = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let mut s = Complex64::zero();
        for (i, t) in enumerate_rooted_plane_trees(n, CostGuard::default())?.iter().enumerate() {
            let a = lve_tree_term(t, p, opts, tree_stream(n, i))?;
            s += a.value;
            var += a.std_error * a.std_error;
        }
        orders.push(s);
        value += s;
    }
    Ok(LveSum {
        value,
        tail_bound: lve_tail_bound(p.z, n_max),
        std_error: var.sqrt(),
        orders,
    })
}

fn oracle_domain(p: &ModelPoint) -> Result<(f64, u64)> {
    let n = match p.n {
        Dimension::Finite(n) => n,
        Dimension::Infinite => return Err(Error::domain("oracle needs finite N")),
    };
    if n > MAX_ORACLE_N {
        return Err(Error::SizeLimit { what: "oracle N", value: n, limit: MAX_ORACLE_N });
    }
    if p.z.im != 0.0 || p.z.re > 0.0 || p.z.re <= -0.25 {
        return Err(Error::domain("oracle needs real z in (-1/4, 0]"));
    }
    Ok((p.z.re, n))
}

fn ln_gamma_int(n: u64) -> f64 {
    (2..n).map(|k| (k as f64).ln()).sum()
}

/// `∫_0^∞ ρ^k ρ^{N-1} e^{-ρ + zρ²/2N} dρ/(N-1)!` for the radial law of `|φ|²`.
fn radial_moment(z: f64, n: u64, k: i32) -> Result<Estimate<f64>> {
    let nf = n as f64;
    let lg = ln_gamma_int(n);
    let upper = nf + 60.0 * nf.sqrt() + 60.0;
    let est = adaptive(
        |r| {
            if r == 0.0 {
                return Complex64::new(if n == 1 && k == 0 { 1.0 } else { 0.0 }, 0.0);
            }
            let e = (nf - 1.0 + f64::from(k)) * r.ln() - r + z * r * r / (2.0 * nf) - lg;
            Complex64::new(e.exp(), 0.0)
        },
        0.0,
        upper,
        1e-300,
        1e-14,
        4000,
    )?;
    Ok(Estimate { value: est.value.re, error: est.error })
}

/// `G₂ = ⟨|φ|²⟩/N` by one-dimensional radial quadrature.
pub fn oracle_g2(p: &ModelPoint) -> Result<Estimate<f64>> {
    let (z, n) = oracle_domain(p)?;
    if z == 0.0 {
        return Ok(Estimate { value: 1.0, error: 0.0 });
    }
    let zed = radial_moment(z, n, 0)?;
    let m1 = radial_moment(z, n, 1)?;
    let value = m1.value / (n as f64 * zed.value);
    let error = value * (m1.error / m1.value.abs() + zed.error / zed.value.abs());
    Ok(Estimate { value, error })
}

/// Normalized partition function from the intermediate-field integral
/// `√(N/2π) ∫ e^{-N[τ²/2 + log(1 - √z τ)]} dτ`.
pub fn partition_tau(z: f64, n: u64) -> Result<f64> {
    let nf = n as f64;
    let a = (-z).max(0.0).sqrt();
    let l = 12.0 / nf.sqrt();
    let est = adaptive(
        |t| {
            let base = Complex64::new(1.0, -a * t);
            Complex64::new((-0.5 * nf * t * t).exp(), 0.0) * base.powf(-nf)
        },
        -l,
        l,
        1e-300,
        1e-15,
        4000,
    )?;
    Ok(est.value.re * (nf / (2.0 * PI)).sqrt())
}

fn log_derivative<F: Fn(f64) -> Result<f64>>(f: F, z: f64) -> Result<f64> {
    let h = 1e-4 * z.abs();
    let d = |h: f64| -> Result<f64> { Ok((f(z + h)?.ln() - f(z - h)?.ln()) / (2.0 * h)) };
    let d1 = d(h)?;
    let d2 = d(h / 2.0)?;
    Ok((4.0 * d2 - d1) / 3.0)
}

/// `1 + 2z d/dz (1/N) log Z` with `Z` from [`partition_tau`].
pub fn g2_from_tau_representation(p: &ModelPoint) -> Result<f64> {
    let (z, n) = oracle_domain(p)?;
    if z == 0.0 {
        return Ok(1.0);
    }
    let h = 1e-4 * z.abs();
    if z - h <= -0.25 {
        return Err(Error::domain("finite-difference stencil leaves the oracle domain"));
    }
    let dlog = log_derivative(|x| partition_tau(x, n), z)?;
    Ok(1.0 + 2.0 * z * dlog / n as f64)
}

/// `|⟨|φ|²⟩/N - (1 + 2z d/dz (1/N) log Z)|` with both sides from radial quadrature.
pub fn schwinger_dyson_residual(p: &ModelPoint) -> Result<f64> {
    let (z, n) = oracle_domain(p)?;
    if z == 0.0 {
        return Ok(0.0);
    }
    let g2 = oracle_g2(p)?.value;
    let dlog = log_derivative(|x| radial_moment(x, n, 0).map(|e| e.value), z)?;
    Ok((g2 - 1.0 - 2.0 * z * dlog / n as f64).abs())
}

/// Exact Taylor coefficients of `G₂(z)` at fixed N from Gamma(N) moments of `|φ|²`.
pub fn perturbative_coefficients(n: u64, count: usize) -> Result<Vec<BigRational>> {
    if n == 0 {
        return Err(Error::domain("N must be positive"));
    }
    let rising = |m: usize| -> BigInt { (0..m as u64).fold(BigInt::one(), |acc, i| acc * (n + i)) };
    let two_n = BigInt::from(2 * n);
    let mut zc = Vec::with_capacity(count);
    let mut num = Vec::with_capacity(count);
    let mut scale = BigInt::one();
    for k in 0..count {
        if k > 0 {
            scale *= &two_n * BigInt::from(k as u64);
        }
        zc.push(BigRational::new(rising(2 * k), scale.clone()));
        num.push(BigRational::new(rising(2 * k + 1), scale.clone() * BigInt::from(n)));
    }
    let mut out: Vec<BigRational> = Vec::with_capacity(count);
    for k in 0..count {
        let mut acc = num[k].clone();
        for j in 0..k {
            acc -= &out[j] * &zc[k - j];
        }
        out.push(acc);
    }
    Ok(out)
}

/// Signed remainder `G₂(z) - Σ_{k<order} g_k zᵏ` against [`oracle_g2`].
pub fn taylor_remainder(p: &ModelPoint, order: usize) -> Result<f64> {
    let (z, n) = oracle_domain(p)?;
    if z == 0.0 {
        return Ok(0.0);
    }
    let coeffs = perturbative_coefficients(n, order)?;
    let partial: f64 = coeffs
        .iter()
        .enumerate()
        .map(|(k, c)| c.to_f64().unwrap() * z.powi(k as i32))
        .sum();
    Ok(oracle_g2(p)?.value - partial)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanCut {
    pub mean: f64,
    pub cut: f64,
    pub mean_std_error: f64,
    pub cut_std_error: f64,
}

/// Mean `(G₊+G₋)/2` and cut `(G₊-G₋)/2i` of the continuation to `0 < z < 1/8`, from the
/// rotated representation with phase `(2n+1)π/4 - Σβ/√2 + (z/2N) β·X·β`. The exactly
/// known N = ∞ part is subtracted as a control variate.
pub fn mean_cut_functions(z: f64, n: Dimension, n_max: usize, opts: &SamplingOptions) -> Result<MeanCut> {
    if !(z > 0.0 && z < 0.125) {
        return Err(Error::domain("mean and cut functions need 0 < z < 1/8"));
    }
    if matches!(n, Dimension::Finite(0)) {
        return Err(Error::domain("N must be positive"));
    }
    if opts.samples < 2 {
        return Err(Error::domain("Monte Carlo needs at least 2 samples"));
    }
    let c = z * 0.5 * n.inverse();
    let (mut mean, mut cut, mut var_m, mut var_c) = (0.0, 0.0, 0.0, 0.0);
    for order in 0..=n_max {
        let zn = z.powi(order as i32);
        let weight = 2f64.powi(order as i32) * SQRT_2;
        let phase0 = (2 * order + 1) as f64 * FRAC_PI_4;
        for (i, tree) in enumerate_rooted_plane_trees(order, CostGuard::default())?.iter().enumerate() {
            mean += zn;
            if c == 0.0 {
                continue;
            }
            let gammas: Vec<Gamma<f64>> = tree
                .corner_degrees()
                .iter()
                .map(|&d| Gamma::new(f64::from(d), SQRT_2).unwrap())
                .collect();
            let paths = tree.forest().paths();
            let mut rng = rng_for(opts.seed, tree_stream(order, i));
            let mut w = vec![0.0; order];
            let mut beta = vec![0.0; order + 1];
            let mut acc = Moments::default();
            for _ in 0..opts.samples {
                w.iter_mut().for_each(|x| *x = rng.gen::<f64>());
                for (b, g) in beta.iter_mut().zip(&gammas) {
                    *b = g.sample(&mut rng);
                }
                let x = forest_matrix_with_paths(&paths, &w);
                let a = phase0 - beta.iter().sum::<f64>() / SQRT_2;
                let q = c * quadratic_form(&x, &beta);
                acc.push(Complex64::from_polar(1.0, a) * (Complex64::from_polar(1.0, q) - 1.0));
            }
            let m = acc.mean() * (weight * zn);
            let (se_re, se_im) = acc.std_errors();
            mean += m.re;
            cut += m.im;
            var_m += (se_re * weight * zn).powi(2);
            var_c += (se_im * weight * zn).powi(2);
        }
    }
    Ok(MeanCut {
        mean,
        cut,
        mean_std_error: var_m.sqrt(),
        cut_std_error: var_c.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cardioid_examples() {
        assert!(cardioid_contains(Complex64::new(0.5, 0.0), CardioidVariant::Standard));
        assert!(!cardioid_contains(Complex64::new(-0.1, 0.0), CardioidVariant::Standard));
        assert!(cardioid_contains(Complex64::new(0.05, 0.0), CardioidVariant::UniformHalfDisk));
        assert!(!cardioid_contains(Complex64::new(0.07, 0.0), CardioidVariant::UniformHalfDisk));
        for v in [CardioidVariant::Standard, CardioidVariant::Extended, CardioidVariant::UniformHalfDisk] {
            assert!(cardioid_contains(Complex64::zero(), v));
        }
    }

    #[test]
    fn extended_seam_is_continuous() {
        let eps = 1e-12;
        for rho in [0.1, 0.2, 0.249] {
            let below = cardioid_contains_polar(rho, FRAC_PI_2 - eps, CardioidVariant::Extended);
            let at = cardioid_contains_polar(rho, FRAC_PI_2, CardioidVariant::Extended);
            assert_eq!(below, at);
        }
        assert!(cardioid_contains_polar(0.005, 1.4 * PI, CardioidVariant::Extended));
        assert!(!cardioid_contains_polar(0.005, 1.5 * PI, CardioidVariant::Extended));
    }

    #[test]
    fn catalan_values() {
        assert!((catalan_g2(Complex64::new(0.25, 0.0)).unwrap().re - 2.0).abs() < 1e-12);
        assert!((catalan_g2(Complex64::new(0.1, 0.0)).unwrap().re - 1.127_016_653_792_583).abs() < 1e-9);
        assert_eq!(catalan_g2(Complex64::zero()).unwrap(), Complex64::one());
    }

    #[test]
    fn tree_degrees() {
        for n in 0..6 {
            for t in enumerate_rooted_plane_trees(n, CostGuard::default()).unwrap() {
                assert_eq!(t.corner_degrees().iter().sum::<u32>() as usize, 2 * n + 1);
            }
        }
    }

    #[test]
    fn infinite_n_is_power() {
        let p = ModelPoint::new(Complex64::new(-0.05, 0.0), Dimension::Infinite).unwrap();
        let s = lve_partial_sum(&p, 6, &SamplingOptions::default()).unwrap();
        let c = catalan_g2(p.z).unwrap();
        assert!((s.value - c).norm() <= s.tail_bound);
        assert_eq!(s.std_error, 0.0);
    }

    #[test]
    fn tail_bound_shape() {
        // n_max = 0 at z=-0.05: Σ_{n≥1} C_n 0.2^n = G(0.2) - 1
        let g = (1.0 - (1.0f64 - 0.8).sqrt()) / 0.4;
        assert!((lve_tail_bound(Complex64::new(-0.05, 0.0), 0) - (g - 1.0)).abs() < 1e-12);
        assert!(lve_tail_bound(Complex64::new(0.0, 0.06), 3).is_infinite());
    }

    #[test]
    fn first_coefficients() {
        let c = perturbative_coefficients(1, 3).unwrap();
        assert_eq!(c[0], BigRational::one());
        assert_eq!(c[1], BigRational::from_integer(2.into()));
        let c = perturbative_coefficients(4, 2).unwrap();
        assert_eq!(c[1], BigRational::new(5.into(), 4.into()));
    }

    #[test]
    fn outside_half_disk_rejected() {
        let p = ModelPoint::real(0.01, 2).unwrap();
        let t = &enumerate_rooted_plane_trees(1, CostGuard::default()).unwrap()[0];
        assert!(lve_tree_term(t, &p, &SamplingOptions::default(), 0).is_err());
    }
}
