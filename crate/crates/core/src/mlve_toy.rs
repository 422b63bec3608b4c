//! Multiscale loop vertex expansion of the sliced toy model
//! `Z = ∫dν(σ) exp(-Σ_j V_j(σ))`, `V_j(σ) = Σ_{p∈I_j} log₂(1 - iλσ/p)`.

use std::collections::HashMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_traits::Zero;
use serde::Serialize;

use crate::combinatorics::{enumerate_spanning_trees, forest_matrix, Forest, ForestEdge};
use crate::error::{CostGuard, Error, Result};
use crate::quadrature::{adaptive, normal_rule, ordered_cells, Estimate};

/// Largest cutoff `M^{j_max} - 1` without the exponential-cost flag.
pub const MAX_CUTOFF: u64 = 1 << 20;
/// Largest derivative order of a slice vertex.
pub const MAX_VERTEX_DERIVATIVE: usize = 4;
/// Largest truncation order of the multiscale sum.
pub const MAX_MLVE_ORDER: usize = 3;

/// `log₂(1-x) = x + log(1-x)`, with its Taylor series for `|x| < 0.1`.
pub fn log2_fn(x: Complex64) -> Result<Complex64> {
    if x == Complex64::new(1.0, 0.0) {
        return Err(Error::Singularity("log₂(1-x) at x = 1".into()));
    }
    if x.norm() < 0.1 {
        let mut acc = Complex64::zero();
        let mut pow = x;
        for k in 2..=18 {
            pow *= x;
            acc -= pow / k as f64;
        }
        return Ok(acc);
    }
    Ok(x + (Complex64::new(1.0, 0.0) - x).ln())
}

/// `L_N = Σ_{p=1}^N 1/p`, compensated sum from the smallest term up.
pub fn harmonic_counterterm(n: u64) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("cutoff must be positive"));
    }
    if n > 20_000 {
        return Err(Error::SizeLimit { what: "harmonic cutoff", value: n, limit: 20_000 });
    }
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for p in (1..=n).rev() {
        let x = 1.0 / p as f64;
        let t = sum + x;
        comp += if sum.abs() >= x { (sum - t) + x } else { (x - t) + sum };
        sum = t;
    }
    Ok(sum + comp)
}

/// Slices `I_j = [M^{j-1}, M^j - 1]` for `j_min ≤ j ≤ j_max`, coupling `λ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SliceModel {
    m: u64,
    j_min: u32,
    j_max: u32,
    lambda: Complex64,
}

impl SliceModel {
    pub fn new(m: u64, j_min: u32, j_max: u32, lambda: Complex64, guard: CostGuard) -> Result<Self> {
        if m < 2 || j_min < 1 || j_min > j_max {
            return Err(Error::domain("need M >= 2 and 1 <= j_min <= j_max"));
        }
        let cutoff = m.checked_pow(j_max).ok_or(Error::SizeLimit {
            what: "cutoff M^j_max",
            value: u64::MAX,
            limit: MAX_CUTOFF,
        })?;
        guard.check("cutoff M^j_max", cutoff, MAX_CUTOFF)?;
        if !(lambda.re.is_finite() && lambda.im.is_finite()) {
            return Err(Error::domain("λ must be finite"));
        }
        if lambda.re == 0.0 && lambda.im != 0.0 {
            return Err(Error::Singularity("imaginary λ puts poles on the real σ axis".into()));
        }
        Ok(SliceModel { m, j_min, j_max, lambda })
    }

    pub fn lambda(&self) -> Complex64 {
        self.lambda
    }

    pub fn slices(&self) -> std::ops::RangeInclusive<u32> {
        self.j_min..=self.j_max
    }

    pub fn slice_range(&self, j: u32) -> std::ops::RangeInclusive<u64> {
        self.m.pow(j - 1)..=self.m.pow(j) - 1
    }

    /// Cutoff `N = M^{j_max} - 1`.
    pub fn cutoff(&self) -> u64 {
        self.m.pow(self.j_max) - 1
    }

    fn check_slice(&self, j: u32) -> Result<()> {
        if !self.slices().contains(&j) {
            return Err(Error::domain(format!("slice {j} outside {}..={}", self.j_min, self.j_max)));
        }
        Ok(())
    }

    /// `V_j(σ)`.
    pub fn slice_potential(&self, j: u32, sigma: f64) -> Result<Complex64> {
        self.check_slice(j)?;
        let il = Complex64::i() * self.lambda * sigma;
        self.slice_range(j).map(|p| log2_fn(il / p as f64)).sum()
    }

    fn total_potential(&self, sigma: f64) -> Result<Complex64> {
        self.slices().map(|j| self.slice_potential(j, sigma)).sum()
    }
}

fn expm1(z: Complex64) -> Complex64 {
    if z.norm() < 0.1 {
        let mut term = z;
        let mut acc = z;
        for k in 2..=12 {
            term *= z / k as f64;
            acc += term;
        }
        acc
    } else {
        z.exp() - 1.0
    }
}

/// `W_j^{(m)}(σ)` for `m = 0..=k`, where `W_j = e^{-V_j} - 1`, by Faà di Bruno with
/// complete Bell polynomials of the derivatives of `-V_j`.
pub fn slice_vertex_derivatives(model: &SliceModel, j: u32, sigma: f64, k: usize) -> Result<Vec<Complex64>> {
    if k > MAX_VERTEX_DERIVATIVE {
        return Err(Error::domain(format!("derivative order {k} above {MAX_VERTEX_DERIVATIVE}")));
    }
    model.check_slice(j)?;
    let mut v = Complex64::zero();
    let mut dv = vec![Complex64::zero(); k + 1];
    for p in model.slice_range(j) {
        let a = Complex64::i() * model.lambda / p as f64;
        let x = a * sigma;
        v += log2_fn(x)?;
        if k >= 1 {
            let r = (Complex64::new(1.0, 0.0) - x).inv();
            dv[1] -= a * x * r;
            let ar = a * r;
            let mut pow = ar;
            let mut fact = 1.0;
            for (m, slot) in dv.iter_mut().enumerate().skip(2) {
                pow *= ar;
                fact *= (m - 1) as f64;
                *slot -= pow * fact;
            }
        }
    }
    let g: Vec<Complex64> = dv.iter().map(|d| -d).collect();
    let e = (-v).exp();
    let mut bell = vec![Complex64::new(1.0, 0.0)];
    for m in 0..k {
        let mut next = Complex64::zero();
        for i in 0..=m {
            next += binomial(m, i) * bell[m - i] * g[i + 1];
        }
        bell.push(next);
    }
    let mut out = Vec::with_capacity(k + 1);
    out.push(expm1(-v));
    out.extend(bell.iter().skip(1).map(|b| b * e));
    Ok(out)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `log Z` by adaptive quadrature of the single σ integral.
pub fn oracle_log_z(model: &SliceModel) -> Result<Estimate<Complex64>> {
    let z = oracle_z_on(model, &[-14.0, 14.0])?;
    Ok(Estimate {
        value: z.value.ln(),
        error: z.error / z.value.norm(),
    })
}

/// `Z` integrated panel by panel over the breakpoints `cuts` (first and last are the limits).
pub fn oracle_z_on(model: &SliceModel, cuts: &[f64]) -> Result<Estimate<Complex64>> {
    let norm = (2.0 * std::f64::consts::PI).sqrt();
    let mut total = Complex64::zero();
    let mut err = 0.0;
    let mut failure = None;
    for w in cuts.windows(2) {
        let est = adaptive(
            |s| match model.total_potential(s) {
                Ok(v) => (-v - 0.5 * s * s).exp() / norm,
                Err(e) => {
                    failure.get_or_insert(e);
                    Complex64::zero()
                }
            },
            w[0],
            w[1],
            1e-15,
            1e-13,
            4000,
        )?;
        total += est.value;
        err += est.error;
    }
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(Estimate { value: total, error: err })
}

/// Spanning tree of K_n with each edge marked bosonic or fermionic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TwoLevelTree {
    bosonic: Forest,
    fermionic: Forest,
}

impl TwoLevelTree {
    pub fn new(bosonic: Forest, fermionic: Forest) -> Result<Self> {
        let n = bosonic.vertex_count();
        if fermionic.vertex_count() != n {
            return Err(Error::structure("levels live on different vertex sets"));
        }
        let mut all: Vec<ForestEdge> = bosonic.edges().to_vec();
        all.extend_from_slice(fermionic.edges());
        let union = Forest::new(n, all)?;
        if !union.is_spanning_tree() {
            return Err(Error::structure("two-level tree must span"));
        }
        Ok(TwoLevelTree { bosonic, fermionic })
    }

    pub fn vertex_count(&self) -> usize {
        self.bosonic.vertex_count()
    }

    pub fn bosonic(&self) -> &Forest {
        &self.bosonic
    }

    pub fn fermionic(&self) -> &Forest {
        &self.fermionic
    }

    /// Bosonic blocks (components of the bosonic forest) and each vertex's block.
    pub fn blocks(&self) -> (Vec<Vec<usize>>, Vec<usize>) {
        let blocks = self.bosonic.components();
        let mut label = vec![0; self.vertex_count()];
        for (b, block) in blocks.iter().enumerate() {
            for &v in block {
                label[v] = b;
            }
        }
        (blocks, label)
    }

    /// `Y(w_F)`: fermionic edges contracted to a forest on blocks, then its forest matrix.
    pub fn block_matrix(&self, w_f: &[f64]) -> Result<DMatrix<f64>> {
        let (blocks, label) = self.blocks();
        let edges = self
            .fermionic
            .edges()
            .iter()
            .enumerate()
            .map(|(k, e)| ForestEdge { id: k, u: label[e.u], v: label[e.v] })
            .collect();
        forest_matrix(&Forest::new(blocks.len(), edges)?, w_f)
    }
}

/// All two-level trees on n labeled vertices: `n^{n-2} 2^{n-1}` of them.
pub fn enumerate_two_level_trees(n: usize, guard: CostGuard) -> Result<Vec<TwoLevelTree>> {
    if n == 0 {
        return Err(Error::domain("need at least one vertex"));
    }
    let mut out = Vec::new();
    for tree in enumerate_spanning_trees(n, guard)? {
        let k = tree.len();
        for bits in 0u32..(1 << k) {
            let (mut b, mut f) = (Vec::new(), Vec::new());
            for (i, e) in tree.edges().iter().enumerate() {
                if bits >> i & 1 == 1 { f.push(*e) } else { b.push(*e) }
            }
            out.push(TwoLevelTree { bosonic: Forest::new(n, b)?, fermionic: Forest::new(n, f)? });
        }
    }
    Ok(out)
}

/// Grassmann polynomial over at most 32 generators: sorted monomial bitmask -> coefficient.
#[derive(Debug, Clone, Default)]
struct Grassmann(HashMap<u32, f64>);

impl Grassmann {
    fn monomial(mask: u32) -> Self {
        Grassmann(HashMap::from([(mask, 1.0)]))
    }

    /// Left derivative with respect to generator `g`.
    fn derive(&self, g: u32) -> Self {
        let bit = 1u32 << g;
        let mut out = HashMap::new();
        for (&mask, &c) in &self.0 {
            if mask & bit != 0 {
                let sign = if (mask & (bit - 1)).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                *out.entry(mask & !bit).or_insert(0.0) += sign * c;
            }
        }
        Grassmann(out)
    }

    /// `[exp(Σ cov(a,b) ∂_{χ̄_a} ∂_{χ_b}) f]_0`, generator `2v` is `χ_v` and `2v+1` is `χ̄_v`.
    fn gaussian(&self, cov: impl Fn(usize, usize) -> f64, vertices: usize) -> f64 {
        let mut cur = self.clone();
        let mut total = cur.0.get(&0).copied().unwrap_or(0.0);
        let mut k = 1.0;
        while cur.0.keys().any(|&m| m != 0) {
            let mut next = Grassmann::default();
            for a in 0..vertices {
                for b in 0..vertices {
                    let c = cov(a, b);
                    if c == 0.0 {
                        continue;
                    }
                    let d = cur.derive(2 * b as u32).derive(2 * a as u32 + 1);
                    for (m, v) in d.0 {
                        *next.0.entry(m).or_insert(0.0) += c * v / k;
                    }
                }
            }
            next.0.retain(|_, v| *v != 0.0);
            cur = next;
            total += cur.0.get(&0).copied().unwrap_or(0.0);
            k += 1.0;
        }
        total
    }
}

/// Hard-core prefactor, the signed term of each of the `2^k` fermionic edge orientations,
/// and the Y-minors (one per slice and orientation) whose products give those terms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FermionicFactor {
    pub prefactor: f64,
    pub terms: Vec<f64>,
    pub minors: Vec<f64>,
    pub value: f64,
}

/// Fermionic integral of `∏_a χ^{B(a)}_{j_a} χ̄^{B(a)}_{j_a}` under the derivatives of the
/// fermionic edges, covariance `Y ⊗ 𝕀` over blocks and slices.
pub fn fermionic_factor(tree: &TwoLevelTree, slices: &[u32], y: &DMatrix<f64>) -> Result<FermionicFactor> {
    let n = tree.vertex_count();
    if slices.len() != n {
        return Err(Error::domain("one slice per vertex required"));
    }
    if n > 16 {
        return Err(Error::SizeLimit { what: "fermionic vertices", value: n as u64, limit: 16 });
    }
    let (blocks, label) = tree.blocks();
    check_block_matrix(y, blocks.len())?;
    let hard_core = blocks.iter().all(|b| {
        b.iter().enumerate().all(|(i, &u)| b[i + 1..].iter().all(|&v| slices[u] != slices[v]))
    });
    let linked = tree.fermionic().edges().iter().all(|e| slices[e.u] == slices[e.v]);
    if !(hard_core && linked) {
        return Ok(FermionicFactor { prefactor: 0.0, terms: Vec::new(), minors: Vec::new(), value: 0.0 });
    }
    let start = Grassmann::monomial(((1u64 << (2 * n)) - 1) as u32);
    let fe = tree.fermionic().edges();
    let cov = |a: usize, b: usize| if slices[a] == slices[b] { y[(label[a], label[b])] } else { 0.0 };
    let mut terms = Vec::with_capacity(1 << fe.len());
    let mut minors = Vec::new();
    for orient in 0u32..(1 << fe.len()) {
        let mut g = start.clone();
        let mut removed = vec![(false, false); n];
        for (i, e) in fe.iter().enumerate() {
            let (bar, plain) = if orient >> i & 1 == 0 { (e.u, e.v) } else { (e.v, e.u) };
            g = g.derive(2 * plain as u32).derive(2 * bar as u32 + 1);
            removed[plain].0 = true;
            removed[bar].1 = true;
        }
        terms.push(g.gaussian(cov, n));
        let mut used: Vec<u32> = slices.to_vec();
        used.sort_unstable();
        used.dedup();
        for j in used {
            let rows: Vec<usize> = (0..n).filter(|&a| slices[a] == j && !removed[a].1).map(|a| label[a]).collect();
            let cols: Vec<usize> = (0..n).filter(|&a| slices[a] == j && !removed[a].0).map(|a| label[a]).collect();
            if rows.is_empty() {
                continue;
            }
            let m = DMatrix::from_fn(rows.len(), cols.len(), |r, c| y[(rows[r], cols[c])]);
            minors.push(if m.is_square() { m.determinant() } else { 0.0 });
        }
    }
    let value = terms.iter().sum();
    Ok(FermionicFactor { prefactor: 1.0, terms, minors, value })
}

fn check_block_matrix(y: &DMatrix<f64>, blocks: usize) -> Result<()> {
    if y.nrows() != blocks || y.ncols() != blocks {
        return Err(Error::domain(format!("Y must be {blocks}x{blocks}")));
    }
    for i in 0..blocks {
        if (y[(i, i)] - 1.0).abs() > 1e-12 {
            return Err(Error::domain("Y must have unit diagonal"));
        }
        for j in 0..blocks {
            let v = y[(i, j)];
            if !(-1e-12..=1.0 + 1e-12).contains(&v) || (v - y[(j, i)]).abs() > 1e-12 {
                return Err(Error::domain("Y must be symmetric with entries in [0,1]"));
            }
        }
    }
    if crate::combinatorics::min_eigenvalue(y) < -1e-10 {
        return Err(Error::domain("Y must be positive semidefinite"));
    }
    Ok(())
}

/// Truncated multiscale expansion of `log Z` with per-order contributions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MlveSum {
    pub value: Complex64,
    pub orders: Vec<Complex64>,
}

/// Gaussian expectation `E[∏_a W^{(k_a)}_{j_a}(σ_a)]` over a bosonic block, integrated over
/// the block's edge weights; `edges` are local vertex pairs.
fn block_integral(
    model: &SliceModel,
    vertices: &[(u32, usize)],
    edges: &[(usize, usize)],
) -> Result<Complex64> {
    let s = vertices.len();
    let m = match s {
        1 => 64,
        2 => 32,
        _ => 12,
    };
    let rule = normal_rule(m);
    let forest = Forest::new(
        s,
        edges.iter().enumerate().map(|(k, &(u, v))| ForestEdge { id: k, u, v }).collect(),
    )?;
    let mut failure = None;
    let val = ordered_cells(edges.len(), 6, |w| {
        let x = forest_matrix(&forest, w).expect("weights in range");
        let eig = x.symmetric_eigen();
        let l = DMatrix::from_fn(s, s, |i, c| eig.eigenvectors[(i, c)] * eig.eigenvalues[c].max(0.0).sqrt());
        let mut idx = vec![0usize; s];
        let mut acc = Complex64::zero();
        loop {
            let mut wt = 1.0;
            for &i in &idx {
                wt *= rule[i].1;
            }
            let mut prod = Complex64::new(wt, 0.0);
            for (a, &(j, k)) in vertices.iter().enumerate() {
                let sigma: f64 = (0..s).map(|c| l[(a, c)] * rule[idx[c]].0).sum();
                match slice_vertex_derivatives(model, j, sigma, k) {
                    Ok(d) => prod *= d[k],
                    Err(e) => {
                        failure.get_or_insert(e);
                        return Complex64::zero();
                    }
                }
            }
            acc += prod;
            let mut d = 0;
            loop {
                if d == s {
                    return acc;
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
    match failure {
        Some(e) => Err(e),
        None => Ok(val),
    }
}

/// `log Z ≈ Σ_{n≤n_max} (1/n!) Σ_{two-level trees, slice labels} ∫dw ∫dν ∂ ∏[W χ χ̄]`.
/// Bosonic blocks are integrated by tensor Gauss-Hermite rules over `X(w_B)`, the
/// fermionic factor by the cell rule over `w_F`.
pub fn mlve_truncated_sum(model: &SliceModel, n_max: usize, guard: CostGuard) -> Result<MlveSum> {
    if n_max == 0 || n_max > MAX_MLVE_ORDER {
        return Err(Error::domain(format!("n_max must be in 1..={MAX_MLVE_ORDER}")));
    }
    let slices: Vec<u32> = model.slices().collect();
    let assignments = (slices.len() as u64).pow(n_max as u32);
    guard.check("slice assignments", assignments, 20_000)?;
    let mut cache: HashMap<(Vec<(u32, usize)>, Vec<(usize, usize)>), Complex64> = HashMap::new();
    let mut orders = Vec::with_capacity(n_max);
    let mut fact = 1.0;
    for n in 1..=n_max {
        fact *= n as f64;
        let mut order_sum = Complex64::zero();
        for tree in enumerate_two_level_trees(n, guard)? {
            let (blocks, label) = tree.blocks();
            let mut deg = vec![0usize; n];
            for e in tree.bosonic().edges() {
                deg[e.u] += 1;
                deg[e.v] += 1;
            }
            let mut js = vec![0usize; n];
            loop {
                let assign: Vec<u32> = js.iter().map(|&i| slices[i]).collect();
                let probe = fermionic_factor(&tree, &assign, &DMatrix::identity(blocks.len(), blocks.len()))?;
                if probe.prefactor != 0.0 {
                    let k = tree.fermionic().len();
                    let ferm: f64 = ordered_cells(k, 8, |w| {
                        let y = tree.block_matrix(w).expect("weights in range");
                        fermionic_factor(&tree, &assign, &y).map(|f| f.value).unwrap_or(f64::NAN)
                    });
                    if !ferm.is_finite() {
                        return Err(Error::numeric("fermionic factor failed", f64::NAN));
                    }
                    let mut bos = Complex64::new(1.0, 0.0);
                    for block in &blocks {
                        let local: Vec<(u32, usize)> = block.iter().map(|&a| (assign[a], deg[a])).collect();
                        let edges: Vec<(usize, usize)> = tree
                            .bosonic()
                            .edges()
                            .iter()
                            .filter(|e| label[e.u] == label[block[0]])
                            .map(|e| {
                                let pu = block.iter().position(|&v| v == e.u).unwrap();
                                let pv = block.iter().position(|&v| v == e.v).unwrap();
                                (pu, pv)
                            })
                            .collect();
                        let key = (local.clone(), edges.clone());
                        let val = match cache.get(&key) {
                            Some(v) => *v,
                            None => {
                                let v = block_integral(model, &local, &edges)?;
                                cache.insert(key, v);
                                v
                            }
                        };
                        bos *= val;
                    }
                    order_sum += bos * ferm / fact;
                }
                let mut d = 0;
                while d < n {
                    js[d] += 1;
                    if js[d] < slices.len() {
                        break;
                    }
                    js[d] = 0;
                    d += 1;
                }
                if d == n {
                    break;
                }
            }
        }
        orders.push(order_sum);
    }
    Ok(MlveSum { value: orders.iter().sum(), orders })
}
