//! Quartic tensor models: generalized-color invariants, Gaussian moments, propagators,
//! T⁴₃ power counting, intermediate-field trees with face counting, resolvents and the
//! iterated Cauchy-Schwarz bound.

use nalgebra::DMatrix;
use num_bigint::BigUint;
use num_complex::Complex64;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::combinatorics::Dsu;
use crate::error::{CostGuard, Error, Result};
use crate::vector_lve::{
    cardioid_contains, enumerate_rooted_plane_trees, resolvent_bound, rng_for, CardioidVariant, RootedPlaneTree,
};

/// Largest tensor size `N^d` without the exponential-cost flag.
pub const MAX_TENSOR_ENTRIES: u64 = 4096;
/// Largest rank handled.
pub const MAX_RANK: usize = 8;

/// Nonempty proper subset of colors `{1..d}`, stored as its canonical representative:
/// the smaller of `C` and `D∖C`, ties broken lexicographically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GeneralizedColor {
    rank: u8,
    mask: u32,
}

impl Serialize for GeneralizedColor {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.colors())
    }
}

fn elements(mask: u32, rank: usize) -> Vec<usize> {
    (0..rank).filter(|c| mask >> c & 1 == 1).map(|c| c + 1).collect()
}

impl GeneralizedColor {
    /// From 1-based colors.
    pub fn new(rank: usize, colors: &[usize]) -> Result<Self> {
        if !(2..=MAX_RANK).contains(&rank) {
            return Err(Error::domain(format!("rank must be in 2..={MAX_RANK}")));
        }
        let mut mask = 0u32;
        for &c in colors {
            if c == 0 || c > rank {
                return Err(Error::domain(format!("color {c} outside 1..={rank}")));
            }
            mask |= 1 << (c - 1);
        }
        Self::from_mask(rank, mask)
    }

    pub fn from_mask(rank: usize, mask: u32) -> Result<Self> {
        let full = (1u32 << rank) - 1;
        if mask == 0 || mask & full == full || mask & !full != 0 {
            return Err(Error::domain("generalized color must be a nonempty proper subset"));
        }
        let comp = full & !mask;
        let key = |m: u32| (m.count_ones(), elements(m, rank));
        let mask = if key(comp) < key(mask) { comp } else { mask };
        Ok(GeneralizedColor { rank: rank as u8, mask })
    }

    pub fn rank(&self) -> usize {
        self.rank as usize
    }

    pub fn mask(&self) -> u32 {
        self.mask
    }

    pub fn contains(&self, color: usize) -> bool {
        color >= 1 && self.mask >> (color - 1) & 1 == 1
    }

    pub fn colors(&self) -> Vec<usize> {
        elements(self.mask, self.rank())
    }

    pub fn size(&self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn is_melonic(&self) -> bool {
        self.size() == 1 || self.size() + 1 == self.rank()
    }
}

/// The `2^{d-1} - 1` connected quartic invariants of rank `d`, ordered by size then lexicographically.
pub fn enumerate_quartic_invariants(d: usize) -> Result<Vec<GeneralizedColor>> {
    if !(2..=MAX_RANK).contains(&d) {
        return Err(Error::domain(format!("rank must be in 2..={MAX_RANK}")));
    }
    let mut out: Vec<GeneralizedColor> = (1..(1u32 << d) - 1)
        .map(|m| GeneralizedColor::from_mask(d, m).unwrap())
        .collect();
    out.sort_by_key(|c| (c.size(), c.colors()));
    out.dedup();
    Ok(out)
}

/// Complex tensor with `d` indices in `0..n`, row-major with color 1 most significant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tensor {
    rank: usize,
    side: usize,
    data: Vec<Complex64>,
}

impl Tensor {
    pub fn new(rank: usize, side: usize, data: Vec<Complex64>, guard: CostGuard) -> Result<Self> {
        if !(2..=MAX_RANK).contains(&rank) || side == 0 {
            return Err(Error::domain("need rank in 2..=8 and positive side"));
        }
        let len = (side as u64).checked_pow(rank as u32).unwrap_or(u64::MAX);
        guard.check("tensor entries", len, MAX_TENSOR_ENTRIES)?;
        if data.len() as u64 != len {
            return Err(Error::domain(format!("expected {len} entries, got {}", data.len())));
        }
        Ok(Tensor { rank, side, data })
    }

    /// Entries i.i.d. complex Gaussian with `E|T_n|² = N^{-(d-1)}`.
    pub fn gaussian<R: Rng>(rank: usize, side: usize, rng: &mut R, guard: CostGuard) -> Result<Self> {
        let len = (side as u64).checked_pow(rank as u32).unwrap_or(u64::MAX);
        guard.check("tensor entries", len, MAX_TENSOR_ENTRIES)?;
        let s = (0.5 * (side as f64).powi(1 - rank as i32)).sqrt();
        let data = (0..len)
            .map(|_| Complex64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)) * s)
            .collect();
        Tensor::new(rank, side, data, guard)
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum()
    }

    /// Applies the unitary `u` on color `color` (1-based).
    pub fn act(&self, color: usize, u: &DMatrix<Complex64>) -> Result<Tensor> {
        if color == 0 || color > self.rank || u.nrows() != self.side || u.ncols() != self.side {
            return Err(Error::domain("color or matrix size mismatch"));
        }
        let n = self.side;
        let stride = n.pow((self.rank - color) as u32);
        let mut out = vec![Complex64::zero(); self.data.len()];
        for (idx, slot) in out.iter_mut().enumerate() {
            let i = idx / stride % n;
            let base = idx - i * stride;
            *slot = (0..n).map(|k| u[(i, k)] * self.data[base + k * stride]).sum();
        }
        Ok(Tensor { rank: self.rank, side: n, data: out })
    }

    /// Matrix `M[(C-indices), (D∖C-indices)]`.
    fn split(&self, color: &GeneralizedColor) -> DMatrix<Complex64> {
        let d = self.rank;
        let n = self.side;
        let rows = n.pow(color.size() as u32);
        let cols = n.pow((d - color.size()) as u32);
        let mut m = DMatrix::zeros(rows, cols);
        for (idx, &v) in self.data.iter().enumerate() {
            let (mut r, mut c) = (0, 0);
            for col in 1..=d {
                let digit = idx / n.pow((d - col) as u32) % n;
                if color.contains(col) { r = r * n + digit } else { c = c * n + digit }
            }
            m[(r, c)] = v;
        }
        m
    }
}

/// `V_C(T̄,T) = Tr(P²)` with `P = T ·_{D∖C} T̄`, the quartic invariant exchanging colors in `C`.
pub fn evaluate_invariant(t: &Tensor, color: &GeneralizedColor) -> Result<f64> {
    if color.rank() != t.rank() {
        return Err(Error::domain("color rank differs from tensor rank"));
    }
    let m = t.split(color);
    let p = &m * m.adjoint();
    Ok(p.iter().map(|x| x.norm_sqr()).sum())
}

/// `E[V_C] = N^{2-|C|} + N^{2-d+|C|}` under `E|T_n|² = N^{-(d-1)}` (two Wick pairings).
pub fn expected_invariant(d: usize, n: usize, color: &GeneralizedColor) -> f64 {
    let nf = n as f64;
    let c = color.size() as i32;
    nf.powi(2 - c) + nf.powi(2 - d as i32 + c)
}

#[derive(Debug, Clone, Serialize)]
pub struct InvariantMoment {
    pub color: GeneralizedColor,
    pub mean: f64,
    pub std_error: f64,
    pub expected: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GaussianMomentReport {
    pub norm_mean: f64,
    pub norm_std_error: f64,
    pub norm_expected: f64,
    pub invariants: Vec<InvariantMoment>,
}

/// Monte Carlo moments of `T̄·T` and every `V_C` under the free measure.
pub fn gaussian_moment_check(d: usize, n: usize, samples: u64, seed: u64, guard: CostGuard) -> Result<GaussianMomentReport> {
    if samples < 2 {
        return Err(Error::domain("need at least 2 samples"));
    }
    let colors = enumerate_quartic_invariants(d)?;
    let mut rng = rng_for(seed, 0);
    let mut norm = Vec::with_capacity(samples as usize);
    let mut inv = vec![Vec::with_capacity(samples as usize); colors.len()];
    for _ in 0..samples {
        let t = Tensor::gaussian(d, n, &mut rng, guard)?;
        norm.push(t.norm_sqr());
        for (c, acc) in colors.iter().zip(inv.iter_mut()) {
            acc.push(evaluate_invariant(&t, c)?);
        }
    }
    let stats = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0);
        (m, (var / v.len() as f64).sqrt())
    };
    let (nm, ns) = stats(&norm);
    Ok(GaussianMomentReport {
        norm_mean: nm,
        norm_std_error: ns,
        norm_expected: n as f64,
        invariants: colors
            .iter()
            .zip(&inv)
            .map(|(c, v)| {
                let (m, s) = stats(v);
                InvariantMoment { color: *c, mean: m, std_error: s, expected: expected_invariant(d, n, c) }
            })
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum PropagatorSpec {
    /// Identity times `scale`.
    PureTensor { scale: f64 },
    /// `1/(Σ n_j² + m²)`.
    Tft { mass_sq: f64 },
    /// `δ(Σ n_j)/(Σ n_j² + m²)`.
    Boulatov { mass_sq: f64 },
}

/// Diagonal kernel on multi-indices with components in `[-cutoff, cutoff]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagonalKernel {
    rank: usize,
    cutoff: i64,
    values: Vec<f64>,
}

impl DiagonalKernel {
    pub fn side(&self) -> usize {
        (2 * self.cutoff + 1) as usize
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, index: &[i64]) -> Result<f64> {
        if index.len() != self.rank || index.iter().any(|x| x.abs() > self.cutoff) {
            return Err(Error::domain("index outside kernel range"));
        }
        let side = self.side() as i64;
        let flat = index.iter().fold(0i64, |acc, &x| acc * side + x + self.cutoff);
        Ok(self.values[flat as usize])
    }
}

pub fn build_propagator(spec: PropagatorSpec, rank: usize, cutoff: u32, guard: CostGuard) -> Result<DiagonalKernel> {
    if !(1..=MAX_RANK).contains(&rank) {
        return Err(Error::domain("rank out of range"));
    }
    let side = 2 * cutoff as u64 + 1;
    guard.check("propagator entries", side.saturating_pow(rank as u32), MAX_TENSOR_ENTRIES)?;
    let mass = match spec {
        PropagatorSpec::PureTensor { scale } => {
            if !(scale > 0.0 && scale.is_finite()) {
                return Err(Error::domain("scale must be positive"));
            }
            None
        }
        PropagatorSpec::Tft { mass_sq } | PropagatorSpec::Boulatov { mass_sq } => {
            if mass_sq <= 0.0 {
                return Err(Error::Singularity("zero mode diverges for m² <= 0".into()));
            }
            Some(mass_sq)
        }
    };
    let c = cutoff as i64;
    let len = side.pow(rank as u32) as usize;
    let values = (0..len)
        .map(|flat| {
            let idx: Vec<i64> = (0..rank)
                .map(|k| (flat / (side as usize).pow((rank - 1 - k) as u32) % side as usize) as i64 - c)
                .collect();
            let p2: i64 = idx.iter().map(|x| x * x).sum();
            match spec {
                PropagatorSpec::PureTensor { scale } => scale,
                PropagatorSpec::Tft { .. } => 1.0 / (p2 as f64 + mass.unwrap()),
                PropagatorSpec::Boulatov { .. } => {
                    if idx.iter().sum::<i64>() == 0 { 1.0 / (p2 as f64 + mass.unwrap()) } else { 0.0 }
                }
            }
        })
        .collect();
    Ok(DiagonalKernel { rank, cutoff: c, values })
}

/// The order-one graphs of the rank-3 quartic melonic model with propagator `1/(n²+1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum T43Graph {
    /// Loop sharing two strands with the external line: `Σ_{n₂,n₃} C(0,n₂,n₃)`.
    DivergentTadpole,
    /// Loop sharing one strand: `Σ_{n₁} C(n₁,0,0)`.
    ConvergentTadpole,
    /// `Σ_{a,b,c,e,f} C(a,b,c) C(a,e,f)`.
    LinearVacuum,
    /// `Σ_{a,b,c,e} C(a,c,e) C(b,c,e)`.
    LogVacuum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Growth {
    Bounded,
    Logarithmic,
    Linear,
}

#[derive(Debug, Clone, Serialize)]
pub struct PowerCountReport {
    pub graph: T43Graph,
    pub cutoffs: Vec<u64>,
    pub values: Vec<f64>,
    /// `values[k+1] - values[k]`.
    pub differences: Vec<f64>,
    /// Ratio of the last two differences; about 2, 1 and ≤ 1/2 for linear, logarithmic
    /// and convergent sequences on doubling cutoffs.
    pub difference_ratio: f64,
    pub growth: Growth,
    /// Least-squares fit `value ≈ a + b log Λ` and its largest relative misfit.
    pub log_slope: f64,
    pub log_fit_residual: f64,
}

fn t43_value(graph: T43Graph, cutoff: i64) -> f64 {
    let prop = |a: i64, b: i64, c: i64| 1.0 / ((a * a + b * b + c * c) as f64 + 1.0);
    let range = -cutoff..=cutoff;
    match graph {
        T43Graph::DivergentTadpole => range.clone().flat_map(|b| range.clone().map(move |c| prop(0, b, c))).sum(),
        T43Graph::ConvergentTadpole => range.map(|a| prop(a, 0, 0)).sum(),
        T43Graph::LinearVacuum => range
            .clone()
            .map(|a| {
                let s: f64 = range.clone().flat_map(|b| range.clone().map(move |c| prop(a, b, c))).sum();
                s * s
            })
            .sum(),
        T43Graph::LogVacuum => range
            .clone()
            .flat_map(|c| range.clone().map(move |e| (c, e)))
            .map(|(c, e)| {
                let f: f64 = range.clone().map(|a| prop(a, c, e)).sum();
                f * f
            })
            .sum(),
    }
}

/// Cutoff sequence for the four order-one T⁴₃ graphs and their growth classification.
pub fn power_counting_t43(graph: T43Graph, cutoffs: &[u64]) -> Result<PowerCountReport> {
    if cutoffs.len() < 3 || cutoffs.windows(2).any(|w| w[1] <= w[0]) || cutoffs[0] == 0 {
        return Err(Error::domain("need at least 3 increasing positive cutoffs"));
    }
    if *cutoffs.last().unwrap() > 512 {
        return Err(Error::SizeLimit { what: "T43 cutoff", value: *cutoffs.last().unwrap(), limit: 512 });
    }
    let values: Vec<f64> = cutoffs.iter().map(|&c| t43_value(graph, c as i64)).collect();
    let differences: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let k = differences.len();
    let ratio = differences[k - 1] / differences[k - 2];
    let growth = if ratio > 1.5 {
        Growth::Linear
    } else if ratio > 0.75 {
        Growth::Logarithmic
    } else {
        Growth::Bounded
    };
    let xs: Vec<f64> = cutoffs.iter().map(|&c| (c as f64).ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = values.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&values).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let resid = xs
        .iter()
        .zip(&values)
        .map(|(x, y)| ((y - icpt - slope * x) / y).abs())
        .fold(0.0, f64::max);
    Ok(PowerCountReport {
        graph,
        cutoffs: cutoffs.to_vec(),
        values,
        differences,
        difference_ratio: ratio,
        growth,
        log_slope: slope,
        log_fit_residual: resid,
    })
}

/// Plane tree of loop vertices joined by intermediate-field propagators, each carrying a
/// generalized color. `rotation[v]` lists the edges at `v` in cyclic order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ColoredTree {
    rank: usize,
    vertex_count: usize,
    edges: Vec<(usize, usize, GeneralizedColor)>,
    rotation: Vec<Vec<usize>>,
}

impl ColoredTree {
    pub fn new(
        rank: usize,
        vertex_count: usize,
        edges: Vec<(usize, usize, GeneralizedColor)>,
        rotation: Vec<Vec<usize>>,
    ) -> Result<Self> {
        if vertex_count == 0 || edges.len() + 1 != vertex_count || rotation.len() != vertex_count {
            return Err(Error::structure("a tree on k vertices needs k-1 edges and k rotations"));
        }
        let mut dsu = Dsu::new(vertex_count);
        for &(u, v, c) in &edges {
            if u >= vertex_count || v >= vertex_count || u == v {
                return Err(Error::structure("edge endpoints out of range"));
            }
            if c.rank() != rank {
                return Err(Error::structure("edge color has the wrong rank"));
            }
            if !dsu.union(u, v) {
                return Err(Error::structure("edges contain a cycle"));
            }
        }
        for (v, rot) in rotation.iter().enumerate() {
            let mut want: Vec<usize> =
                (0..edges.len()).filter(|&e| edges[e].0 == v || edges[e].1 == v).collect();
            let mut got = rot.clone();
            want.sort_unstable();
            got.sort_unstable();
            if want != got {
                return Err(Error::structure(format!("rotation at vertex {v} does not list its edges")));
            }
        }
        Ok(ColoredTree { rank, vertex_count, edges, rotation })
    }

    /// Edges `(parent(v), v)` with ids `v-1`; rotations list the parent edge first.
    pub fn from_plane_tree(tree: &RootedPlaneTree, colors: &[GeneralizedColor]) -> Result<Self> {
        let n = tree.order();
        if colors.len() != n {
            return Err(Error::structure("one color per edge required"));
        }
        let rank = colors.first().map(|c| c.rank()).unwrap_or(2);
        let edges = (1..=n).map(|v| (tree.parent(v).unwrap(), v, colors[v - 1])).collect();
        let rotation = (0..=n)
            .map(|v| {
                let mut r: Vec<usize> = tree.parent(v).map(|_| v - 1).into_iter().collect();
                r.extend(tree.children()[v].iter().map(|&c| c - 1));
                r
            })
            .collect();
        ColoredTree::new(rank, n + 1, edges, rotation)
    }

    /// Single loop vertex with no insertions.
    pub fn bare_loop(rank: usize) -> Self {
        ColoredTree { rank, vertex_count: 1, edges: Vec::new(), rotation: vec![Vec::new()] }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn order(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize, GeneralizedColor)] {
        &self.edges
    }

    /// Corners as `(vertex, position)`; corner `(v,i)` follows edge `rotation[v][i]`.
    /// A vertex without edges has the single corner `(v,0)`.
    pub fn corners(&self) -> Vec<(usize, usize)> {
        (0..self.vertex_count)
            .flat_map(|v| (0..self.rotation[v].len().max(1)).map(move |i| (v, i)))
            .collect()
    }

    fn corner_index(&self, v: usize, i: usize) -> usize {
        (0..v).map(|u| self.rotation[u].len().max(1)).sum::<usize>() + i
    }

    /// Corner indices in contour order starting from corner 0, with the edge crossed after each.
    pub fn contour(&self) -> Vec<(usize, Option<usize>)> {
        if self.edges.is_empty() {
            return vec![(0, None)];
        }
        let start = self.corners()[0];
        let (mut v, mut i) = start;
        let mut out = Vec::with_capacity(2 * self.order());
        loop {
            let k = self.rotation[v].len();
            let e = self.rotation[v][(i + 1) % k];
            out.push((self.corner_index(v, i), Some(e)));
            let (a, b, _) = self.edges[e];
            let u = if a == v { b } else { a };
            let pos = self.rotation[u].iter().position(|&x| x == e).unwrap();
            v = u;
            i = pos;
            if (v, i) == start {
                return out;
            }
        }
    }

    /// Faces per color: strands of colors in an edge's color cross to the other end,
    /// the remaining strands run along the loop vertex.
    pub fn faces(&self) -> usize {
        let corners = self.corners().len();
        let mut total = 0;
        for color in 1..=self.rank {
            let mut dsu = Dsu::new(corners);
            let mut ends = Vec::with_capacity(2);
            for (e, &(u, v, c)) in self.edges.iter().enumerate() {
                ends.clear();
                for x in [u, v] {
                    let k = self.rotation[x].len();
                    let p = self.rotation[x].iter().position(|&y| y == e).unwrap();
                    ends.push((self.corner_index(x, (p + k - 1) % k), self.corner_index(x, p)));
                }
                let ((b1, a1), (b2, a2)) = (ends[0], ends[1]);
                if c.contains(color) {
                    dsu.union(b1, a2);
                    dsu.union(a1, b2);
                } else {
                    dsu.union(b1, a1);
                    dsu.union(b2, a2);
                }
            }
            total += dsu.partition().len();
        }
        total
    }

    /// `λⁿ N^{F-(d-1)n}`.
    pub fn perturbative_amplitude(&self, lambda: Complex64, n_side: usize) -> Complex64 {
        let n = self.order() as i32;
        let exp = self.faces() as i32 - (self.rank as i32 - 1) * n;
        lambda.powi(n) * (n_side as f64).powi(exp)
    }
}

/// `G ⊗ 1_{D∖C}` on `V^{⊗d}` for `G` acting on the colors of `C`.
pub fn embed(g: &DMatrix<Complex64>, color: &GeneralizedColor, n: usize) -> DMatrix<Complex64> {
    let d = color.rank();
    let dim = n.pow(d as u32);
    let (sub_c, sub_r) = split_index_maps(color, n);
    let mut out = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            if sub_r[i] == sub_r[j] {
                out[(i, j)] = g[(sub_c[i], sub_c[j])];
            }
        }
    }
    out
}

/// Partial trace over the colors outside `C`.
pub fn partial_trace(q: &DMatrix<Complex64>, color: &GeneralizedColor, n: usize) -> DMatrix<Complex64> {
    let d = color.rank();
    let dim = n.pow(d as u32);
    let small = n.pow(color.size() as u32);
    let (sub_c, sub_r) = split_index_maps(color, n);
    let mut out = DMatrix::zeros(small, small);
    for i in 0..dim {
        for j in 0..dim {
            if sub_r[i] == sub_r[j] {
                out[(sub_c[i], sub_c[j])] += q[(i, j)];
            }
        }
    }
    out
}

fn split_index_maps(color: &GeneralizedColor, n: usize) -> (Vec<usize>, Vec<usize>) {
    let d = color.rank();
    let dim = n.pow(d as u32);
    let mut sub_c = vec![0; dim];
    let mut sub_r = vec![0; dim];
    for idx in 0..dim {
        let (mut a, mut b) = (0, 0);
        for col in 1..=d {
            let digit = idx / n.pow((d - col) as u32) % n;
            if color.contains(col) { a = a * n + digit } else { b = b * n + digit }
        }
        sub_c[idx] = a;
        sub_r[idx] = b;
    }
    (sub_c, sub_r)
}

/// Exact contraction of a colored tree with operator `ops(corner)` at each corner
/// (`None` is the identity): every propagator of color `C` is summed as
/// `Σ_{ab} (E_{ab}⊗1)(E_{ba}⊗1)`, which reduces leaf-to-root to partial traces.
pub fn tree_amplitude<'a, F>(tree: &ColoredTree, n: usize, ops: F) -> Complex64
where
    F: Fn(usize) -> Option<&'a DMatrix<Complex64>>,
{
    let dim = n.pow(tree.rank as u32);
    if tree.edges.is_empty() {
        return match ops(0) {
            Some(o) => o.trace(),
            None => Complex64::new(dim as f64, 0.0),
        };
    }
    fn inserted<'a, F: Fn(usize) -> Option<&'a DMatrix<Complex64>>>(
        tree: &ColoredTree,
        n: usize,
        v: usize,
        from: Option<usize>,
        ops: &F,
    ) -> DMatrix<Complex64> {
        let dim = n.pow(tree.rank as u32);
        let rot = &tree.rotation[v];
        let k = rot.len();
        let start = from.map(|e| rot.iter().position(|&x| x == e).unwrap()).unwrap_or(0);
        let mut m = DMatrix::<Complex64>::identity(dim, dim);
        for step in 0..k {
            let pos = (start + step) % k;
            if step > 0 || from.is_none() {
                let e = rot[pos];
                if Some(e) != from {
                    let (a, b, c) = tree.edges[e];
                    let child = if a == v { b } else { a };
                    let q = inserted(tree, n, child, Some(e), ops);
                    m = &m * embed(&partial_trace(&q, &c, n), &c, n);
                }
            }
            if let Some(o) = ops(tree.corner_index(v, pos)) {
                m = &m * o;
            }
        }
        m
    }
    inserted(tree, n, 0, None, &ops).trace()
}

/// Tree with resolvents `R` at the corners in `a` and `R†` at those in `a_dag`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ResolventDressedTree {
    pub tree: ColoredTree,
    pub a: Vec<usize>,
    pub a_dag: Vec<usize>,
}

impl ResolventDressedTree {
    pub fn new(tree: ColoredTree, a: Vec<usize>, a_dag: Vec<usize>) -> Result<Self> {
        let corners = tree.corners().len();
        let mut all: Vec<usize> = a.iter().chain(&a_dag).copied().collect();
        all.sort_unstable();
        if all.windows(2).any(|w| w[0] == w[1]) || all.last().is_some_and(|&c| c >= corners) {
            return Err(Error::structure("resolvent corners must be distinct corners of the tree"));
        }
        Ok(ResolventDressedTree { tree, a, a_dag })
    }

    pub fn resolvent_count(&self) -> usize {
        self.a.len() + self.a_dag.len()
    }

    /// `A_T^{A,A†}` for a given resolvent.
    pub fn amplitude(&self, r: &DMatrix<Complex64>, n: usize) -> Complex64 {
        let rd = r.adjoint();
        tree_amplitude(&self.tree, n, |c| {
            if self.a.contains(&c) {
                Some(r)
            } else if self.a_dag.contains(&c) {
                Some(&rd)
            } else {
                None
            }
        })
    }
}

/// Hermitian intermediate field of one generalized color, a matrix on `V^{⊗C}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorField {
    pub color: GeneralizedColor,
    pub sigma: DMatrix<Complex64>,
}

/// `R = [1 - i√λ C^{1/2} (Σ_C σ_C⊗1) C^{1/2}]^{-1}` for `λ` in the standard cardioid.
pub fn resolvent_build(
    fields: &[ColorField],
    lambda: Complex64,
    n: usize,
    propagator: Option<&DiagonalKernel>,
) -> Result<DMatrix<Complex64>> {
    if !cardioid_contains(lambda, CardioidVariant::Standard) {
        return Err(Error::domain("λ outside the cardioid"));
    }
    let rank = fields.first().map(|f| f.color.rank()).ok_or_else(|| Error::domain("no fields"))?;
    let dim = n.checked_pow(rank as u32).unwrap_or(usize::MAX);
    if dim as u64 > MAX_TENSOR_ENTRIES {
        return Err(Error::SizeLimit { what: "resolvent dimension", value: dim as u64, limit: MAX_TENSOR_ENTRIES });
    }
    let mut h = DMatrix::<Complex64>::zeros(dim, dim);
    for f in fields {
        let small = n.pow(f.color.size() as u32);
        if f.color.rank() != rank || f.sigma.nrows() != small || f.sigma.ncols() != small {
            return Err(Error::domain("field shape does not match its color"));
        }
        if (&f.sigma - f.sigma.adjoint()).iter().any(|x| x.norm() > 1e-12) {
            return Err(Error::domain("intermediate field must be Hermitian"));
        }
        h += embed(&f.sigma, &f.color, n);
    }
    if let Some(k) = propagator {
        if k.values().len() != dim {
            return Err(Error::domain("propagator size mismatch"));
        }
        let s: Vec<f64> = k.values().iter().map(|v| v.sqrt()).collect();
        for i in 0..dim {
            for j in 0..dim {
                h[(i, j)] *= s[i] * s[j];
            }
        }
    }
    let m = DMatrix::<Complex64>::identity(dim, dim) - h * (Complex64::i() * lambda.sqrt());
    m.try_inverse().ok_or_else(|| Error::Singularity("resolvent not invertible".into()))
}

/// Largest singular value.
pub fn operator_norm(m: &DMatrix<Complex64>) -> f64 {
    m.clone().singular_values().iter().copied().fold(0.0, f64::max)
}

/// Random Hermitian field with i.i.d. Gaussian entries of unit scale.
pub fn random_field<R: Rng>(color: GeneralizedColor, n: usize, rng: &mut R) -> ColorField {
    let s = n.pow(color.size() as u32);
    let g = DMatrix::from_fn(s, s, |_, _| {
        Complex64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    });
    ColorField { color, sigma: (&g + g.adjoint()) * Complex64::new(0.5, 0.0) }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IcsSplit {
    pub gamma: usize,
    pub opposite: usize,
    pub half_one: Vec<usize>,
    pub half_two: Vec<usize>,
    pub cut_edges: Vec<usize>,
}

/// Splits the contour at a resolvent corner `gamma` and its opposite corner, `n` steps
/// further along the contour of `2n` corners. An edge is cut when its two contour
/// traversals start in different halves.
pub fn ics_split(dressed: &ResolventDressedTree, gamma: usize) -> Result<IcsSplit> {
    let tree = &dressed.tree;
    let n = tree.order();
    if n == 0 {
        return Err(Error::domain("order-zero tree has no opposite corner"));
    }
    if dressed.resolvent_count() > 0 && !dressed.a.contains(&gamma) && !dressed.a_dag.contains(&gamma) {
        return Err(Error::domain(format!("corner {gamma} carries no resolvent")));
    }
    let contour = tree.contour();
    let pos = contour
        .iter()
        .position(|&(c, _)| c == gamma)
        .ok_or_else(|| Error::domain(format!("corner {gamma} not in tree")))?;
    let at = |k: usize| contour[(pos + k) % (2 * n)];
    let half_one: Vec<usize> = (0..n).map(|k| at(k).0).collect();
    let half_two: Vec<usize> = (n..2 * n).map(|k| at(k).0).collect();
    let mut side = vec![Vec::new(); n];
    for k in 0..2 * n {
        side[at(k).1.unwrap()].push(k < n);
    }
    let cut_edges = (0..n).filter(|&e| side[e][0] != side[e][1]).collect();
    Ok(IcsSplit { gamma, opposite: at(n).0, half_one, half_two, cut_edges })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RarefactionStep {
    pub r: usize,
    pub p: String,
    pub q: f64,
    /// `q_r ≤ q_{r-1}(1 - 1/2n)`, checked in integers as `n p_r ≤ (2n-1) p_{r-1}`.
    pub contracts: bool,
}

/// `p_{r+1} = 2p_r - 2⌈p_r/(2n)⌉`, `q_r = 2^{-r} p_r`.
pub fn rarefaction_trace(n: usize, p0: u64, steps: usize) -> Result<Vec<RarefactionStep>> {
    if n == 0 || p0 > 2 * n as u64 {
        return Err(Error::domain("need n >= 1 and p0 <= 2n"));
    }
    if steps > 4000 {
        return Err(Error::SizeLimit { what: "rarefaction steps", value: steps as u64, limit: 4000 });
    }
    let two_n = BigUint::from(2 * n as u64);
    let mut p = BigUint::from(p0);
    let mut out = Vec::with_capacity(steps + 1);
    let mut prev: Option<BigUint> = None;
    for r in 0..=steps {
        let q = p.to_f64().unwrap_or(f64::INFINITY) * 0.5f64.powi(r as i32);
        let contracts = prev.as_ref().is_none_or(|pp| &p * n <= pp * (2 * n - 1));
        out.push(RarefactionStep { r, p: p.to_string(), q, contracts });
        let m = (&p + &two_n - BigUint::one()) / &two_n;
        prev = Some(p.clone());
        p = (&p - &m) * 2u32;
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct IcsReport {
    pub order: usize,
    pub resolvents: usize,
    pub k: f64,
    pub sup_free: f64,
    pub bound: f64,
    pub max_amplitude: f64,
    pub max_ratio: f64,
    pub violations: usize,
    pub samples: usize,
    pub rarefaction_final_q: f64,
}

/// Largest resolvent-free amplitude `N^F` over all plane trees of order `n` with edge
/// colors drawn from `colors`.
pub fn sup_free_amplitude(n: usize, colors: &[GeneralizedColor], side: usize) -> Result<f64> {
    if colors.is_empty() {
        return Err(Error::domain("need at least one color"));
    }
    let mut best = 0usize;
    for t in enumerate_rooted_plane_trees(n, CostGuard::default())? {
        let mut pick = vec![0usize; n];
        loop {
            let cs: Vec<GeneralizedColor> = pick.iter().map(|&i| colors[i]).collect();
            let faces = if n == 0 { colors[0].rank() } else { ColoredTree::from_plane_tree(&t, &cs)?.faces() };
            best = best.max(faces);
            let mut d = 0;
            while d < n {
                pick[d] += 1;
                if pick[d] < colors.len() {
                    break;
                }
                pick[d] = 0;
                d += 1;
            }
            if d == n {
                break;
            }
        }
    }
    Ok((side as f64).powi(best as i32))
}

/// Checks `|A_T^{A,A†}| ≤ K^{2n} sup_{T'} A^∅_{T'}` over random Hermitian fields of the
/// given colors, `K = 1/cos(φ/2)`, and records the rarefaction sequence for `p = |A|+|A†|`.
pub fn ics_verify(
    dressed: &ResolventDressedTree,
    colors: &[GeneralizedColor],
    side: usize,
    lambda: Complex64,
    samples: usize,
    seed: u64,
) -> Result<IcsReport> {
    let n = dressed.tree.order();
    let k = resolvent_bound(lambda);
    let sup_free = sup_free_amplitude(n, colors, side)?;
    let bound = k.powi(2 * n as i32) * sup_free;
    let mut rng = rng_for(seed, 0);
    let mut max_amp: f64 = 0.0;
    let mut violations = 0;
    for _ in 0..samples {
        let fields: Vec<ColorField> = colors.iter().map(|&c| random_field(c, side, &mut rng)).collect();
        let r = resolvent_build(&fields, lambda, side, None)?;
        let amp = dressed.amplitude(&r, side).norm();
        max_amp = max_amp.max(amp);
        if amp > bound * (1.0 + 1e-10) {
            violations += 1;
        }
    }
    let p = dressed.resolvent_count() as u64;
    let trace = if n == 0 { Vec::new() } else { rarefaction_trace(n, p.min(2 * n as u64), 60 * n)? };
    Ok(IcsReport {
        order: n,
        resolvents: dressed.resolvent_count(),
        k,
        sup_free,
        bound,
        max_amplitude: max_amp,
        max_ratio: max_amp / bound,
        violations,
        samples,
        rarefaction_final_q: trace.last().map(|s| s.q).unwrap_or(0.0),
    })
}
