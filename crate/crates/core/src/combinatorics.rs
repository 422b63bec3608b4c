//! Forests and jungles of labeled graphs, Kruskal leading trees, Hepp-sector tree
//! weights and the Brydges-Kennedy-Abdesselam-Rivasseau forest formula.

use nalgebra::DMatrix;
use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{CostGuard, Error, Result};
use crate::quadrature::{for_each_permutation, ordered_cells, ordered_cells_converged};

/// Largest vertex count for forest enumeration without the exponential-cost flag.
pub const MAX_FOREST_VERTICES: u64 = 8;
/// Largest edge count for exhaustive edge-ordering enumeration.
pub const MAX_ORDERING_EDGES: u64 = 10;
/// Largest vertex count for the numerical forest-formula check.
pub const MAX_FORMULA_VERTICES: u64 = 6;
/// Largest number of jungles produced without the exponential-cost flag.
pub const MAX_JUNGLES: u64 = 2_000_000;

pub(crate) struct Dsu(Vec<usize>);

impl Dsu {
    pub(crate) fn new(n: usize) -> Self {
        Dsu((0..n).collect())
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    /// Joins the classes of `a` and `b`; false if they were already joined.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.0[ra.max(rb)] = ra.min(rb);
        true
    }

    pub(crate) fn partition(&mut self) -> Vec<Vec<usize>> {
        let n = self.0.len();
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        let mut slot = vec![usize::MAX; n];
        for v in 0..n {
            let r = self.find(v);
            if slot[r] == usize::MAX {
                slot[r] = blocks.len();
                blocks.push(Vec::new());
            }
            blocks[slot[r]].push(v);
        }
        blocks
    }
}

/// Finite multigraph on vertices `0..n`; self-loops and parallel edges allowed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LabeledGraph {
    vertex_count: usize,
    edges: Vec<(usize, usize)>,
}

impl LabeledGraph {
    pub fn new(vertex_count: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        if let Some(&(u, v)) = edges.iter().find(|&&(u, v)| u >= vertex_count || v >= vertex_count) {
            return Err(Error::structure(format!(
                "edge ({u},{v}) out of range for {vertex_count} vertices"
            )));
        }
        Ok(LabeledGraph { vertex_count, edges })
    }

    /// Complete graph K_n with edges in lexicographic order (0,1),(0,2),…,(n-2,n-1).
    pub fn complete(n: usize) -> Self {
        let mut edges = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                edges.push((i, j));
            }
        }
        LabeledGraph { vertex_count: n, edges }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_connected(&self) -> bool {
        let mut dsu = Dsu::new(self.vertex_count);
        let mut comps = self.vertex_count;
        for &(u, v) in &self.edges {
            if dsu.union(u, v) {
                comps -= 1;
            }
        }
        comps <= 1
    }
}

/// Index of the pair `i<j` in [`LabeledGraph::complete`] order.
pub fn complete_edge_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = (i.min(j), i.max(j));
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct ForestEdge {
    /// Index of the edge in its ambient graph.
    pub id: usize,
    pub u: usize,
    pub v: usize,
}

/// Acyclic edge subset of a labeled graph, edges sorted by ambient index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Forest {
    vertex_count: usize,
    edges: Vec<ForestEdge>,
}

impl Forest {
    pub fn new(vertex_count: usize, mut edges: Vec<ForestEdge>) -> Result<Self> {
        edges.sort_by_key(|e| e.id);
        if edges.windows(2).any(|w| w[0].id == w[1].id) {
            return Err(Error::structure("repeated edge index in forest"));
        }
        let mut dsu = Dsu::new(vertex_count);
        for e in &edges {
            if e.u >= vertex_count || e.v >= vertex_count {
                return Err(Error::structure(format!("edge {} out of range", e.id)));
            }
            if !dsu.union(e.u, e.v) {
                return Err(Error::structure(format!("edge {} closes a cycle", e.id)));
            }
        }
        Ok(Forest { vertex_count, edges })
    }

    /// Forest of K_n from unordered pairs; ids follow [`complete_edge_index`].
    pub fn from_pairs(n: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let edges = pairs
            .iter()
            .map(|&(u, v)| {
                if u == v || u >= n || v >= n {
                    return Err(Error::structure(format!("invalid pair ({u},{v})")));
                }
                Ok(ForestEdge {
                    id: complete_edge_index(n, u, v),
                    u: u.min(v),
                    v: u.max(v),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Forest::new(n, edges)
    }

    /// Edges of `graph` selected by index.
    pub fn from_graph(graph: &LabeledGraph, ids: &[usize]) -> Result<Self> {
        let edges = ids
            .iter()
            .map(|&id| {
                let &(u, v) = graph
                    .edges()
                    .get(id)
                    .ok_or_else(|| Error::structure(format!("edge index {id} out of range")))?;
                Ok(ForestEdge { id, u, v })
            })
            .collect::<Result<Vec<_>>>()?;
        Forest::new(graph.vertex_count(), edges)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edges(&self) -> &[ForestEdge] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn is_spanning_tree(&self) -> bool {
        self.edges.len() + 1 == self.vertex_count.max(1)
    }

    pub fn edge_ids(&self) -> Vec<usize> {
        self.edges.iter().map(|e| e.id).collect()
    }

    /// Bitmask over ambient edge indices (indices below 64).
    pub fn mask(&self) -> u64 {
        self.edges.iter().fold(0, |m, e| m | (1u64 << e.id))
    }

    /// Connected components, blocks ordered by smallest vertex.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut dsu = Dsu::new(self.vertex_count);
        for e in &self.edges {
            dsu.union(e.u, e.v);
        }
        dsu.partition()
    }

    /// For each vertex pair the positions (into [`Forest::edges`]) of the edges on the
    /// connecting path, or `None` when disconnected.
    pub fn paths(&self) -> Vec<Vec<Option<Vec<usize>>>> {
        let n = self.vertex_count;
        let mut adj = vec![Vec::new(); n];
        for (k, e) in self.edges.iter().enumerate() {
            adj[e.u].push((e.v, k));
            adj[e.v].push((e.u, k));
        }
        let mut out = vec![vec![None; n]; n];
        for s in 0..n {
            out[s][s] = Some(Vec::new());
            let mut stack = vec![s];
            while let Some(x) = stack.pop() {
                let base = out[s][x].clone().unwrap();
                for &(y, k) in &adj[x] {
                    if out[s][y].is_none() {
                        let mut p = base.clone();
                        p.push(k);
                        out[s][y] = Some(p);
                        stack.push(y);
                    }
                }
            }
        }
        out
    }
}

/// Calls `f` on every forest of K_n in ascending order of edge bitmask.
pub fn for_each_forest<F: FnMut(&Forest)>(n: usize, guard: CostGuard, mut f: F) -> Result<()> {
    guard.check("forest vertices", n as u64, MAX_FOREST_VERTICES)?;
    let graph = LabeledGraph::complete(n);
    if graph.edge_count() > 64 {
        return Err(Error::SizeLimit {
            what: "edges of K_n",
            value: graph.edge_count() as u64,
            limit: 64,
        });
    }
    let mut chosen = Vec::new();
    let labels: Vec<usize> = (0..n).collect();
    // Deciding the highest index first, excluded before included, yields ascending masks.
    fn rec<F: FnMut(&Forest)>(
        graph: &LabeledGraph,
        k: usize,
        labels: &[usize],
        chosen: &mut Vec<ForestEdge>,
        f: &mut F,
    ) {
        if k == 0 {
            let mut edges = chosen.clone();
            edges.sort_by_key(|e| e.id);
            f(&Forest {
                vertex_count: graph.vertex_count(),
                edges,
            });
            return;
        }
        let id = k - 1;
        let (u, v) = graph.edges()[id];
        rec(graph, id, labels, chosen, f);
        let (lu, lv) = (labels[u], labels[v]);
        if lu != lv {
            let merged: Vec<usize> = labels.iter().map(|&l| if l == lv { lu } else { l }).collect();
            chosen.push(ForestEdge { id, u, v });
            rec(graph, id, &merged, chosen, f);
            chosen.pop();
        }
    }
    rec(&graph, graph.edge_count(), &labels, &mut chosen, &mut f);
    Ok(())
}

/// All forests of K_n (including the empty forest), ascending by edge bitmask.
pub fn enumerate_forests(n: usize, guard: CostGuard) -> Result<Vec<Forest>> {
    let mut out = Vec::new();
    for_each_forest(n, guard, |f| out.push(f.clone()))?;
    Ok(out)
}

/// Spanning trees of K_n, ascending by edge bitmask.
pub fn enumerate_spanning_trees(n: usize, guard: CostGuard) -> Result<Vec<Forest>> {
    let mut out = Vec::new();
    for_each_forest(n, guard, |f| {
        if f.is_spanning_tree() {
            out.push(f.clone())
        }
    })?;
    Ok(out)
}

/// Spanning trees of an arbitrary multigraph (self-loops never belong to a tree).
pub fn spanning_trees_of(graph: &LabeledGraph, guard: CostGuard) -> Result<Vec<Forest>> {
    guard.check("graph edges", graph.edge_count() as u64, 2 * MAX_ORDERING_EDGES)?;
    let n = graph.vertex_count();
    let need = n.saturating_sub(1);
    let mut out = Vec::new();
    let mut pick = Vec::new();
    fn rec(
        graph: &LabeledGraph,
        start: usize,
        need: usize,
        pick: &mut Vec<usize>,
        out: &mut Vec<Forest>,
    ) {
        if pick.len() == need {
            if let Ok(f) = Forest::from_graph(graph, pick) {
                out.push(f);
            }
            return;
        }
        for id in start..graph.edge_count() {
            let (u, v) = graph.edges()[id];
            if u == v {
                continue;
            }
            pick.push(id);
            rec(graph, id + 1, need, pick, out);
            pick.pop();
        }
    }
    rec(graph, 0, need, &mut pick, &mut out);
    out.retain(|f| f.len() == need);
    Ok(out)
}

/// Permutation of edge indices: `order()[r]` is the edge of rank `r` (smallest rank first).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EdgeOrdering(Vec<usize>);

impl EdgeOrdering {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; order.len()];
        for &e in &order {
            if e >= order.len() || std::mem::replace(&mut seen[e], true) {
                return Err(Error::structure("edge ordering is not a permutation"));
            }
        }
        Ok(EdgeOrdering(order))
    }

    pub fn order(&self) -> &[usize] {
        &self.0
    }
}

fn kruskal_ids(graph: &LabeledGraph, order: &[usize], dsu: &mut Dsu, out: &mut Vec<usize>) {
    out.clear();
    for &id in order {
        let (u, v) = graph.edges()[id];
        if u != v && dsu.union(u, v) {
            out.push(id);
        }
    }
    out.sort_unstable();
}

/// Leading spanning tree of `graph` under `sigma`: edges are scanned in order and kept
/// unless they are self-loops or close a cycle.
pub fn kruskal_leading_tree(graph: &LabeledGraph, sigma: &EdgeOrdering) -> Result<Forest> {
    if sigma.order().len() != graph.edge_count() {
        return Err(Error::structure(format!(
            "ordering has {} entries for {} edges",
            sigma.order().len(),
            graph.edge_count()
        )));
    }
    let mut ids = Vec::new();
    kruskal_ids(graph, sigma.order(), &mut Dsu::new(graph.vertex_count()), &mut ids);
    if ids.len() + 1 < graph.vertex_count() {
        return Err(Error::Connectivity("graph is not connected".into()));
    }
    Forest::from_graph(graph, &ids)
}

/// Exact tree weight `numerator/denominator` with the unreduced denominator |E|!.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TreeWeight {
    #[serde(serialize_with = "ser_big")]
    pub numerator: BigUint,
    #[serde(serialize_with = "ser_big")]
    pub denominator: BigUint,
}

fn ser_big<S: serde::Serializer>(x: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&x.to_string())
}

impl TreeWeight {
    pub fn to_f64(&self) -> f64 {
        BigRational::new(self.numerator.clone().into(), self.denominator.clone().into())
            .to_f64()
            .unwrap_or(f64::NAN)
    }

    pub fn ratio(&self) -> BigRational {
        BigRational::new(self.numerator.clone().into(), self.denominator.clone().into())
    }
}

pub fn factorial(n: u64) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, k| acc * k)
}

fn check_tree_of(graph: &LabeledGraph, tree: &Forest) -> Result<()> {
    if !graph.is_connected() {
        return Err(Error::Connectivity("graph is not connected".into()));
    }
    if tree.vertex_count() != graph.vertex_count() || !tree.is_spanning_tree() {
        return Err(Error::structure("not a spanning tree of the graph"));
    }
    for e in tree.edges() {
        let ok = graph
            .edges()
            .get(e.id)
            .is_some_and(|&(u, v)| (u, v) == (e.u, e.v) || (v, u) == (e.u, e.v));
        if !ok || e.u == e.v {
            return Err(Error::structure(format!("edge {} is not a graph edge", e.id)));
        }
    }
    Ok(())
}

/// Number of edge orderings whose leading tree has each edge-id set, over all |E|! orderings.
pub fn leading_tree_counts(
    graph: &LabeledGraph,
    guard: CostGuard,
) -> Result<std::collections::HashMap<Vec<usize>, u64>> {
    guard.check("edges for ordering enumeration", graph.edge_count() as u64, MAX_ORDERING_EDGES)?;
    if !graph.is_connected() {
        return Err(Error::Connectivity("graph is not connected".into()));
    }
    let mut counts = std::collections::HashMap::new();
    let mut ids = Vec::new();
    for_each_permutation(graph.edge_count(), |perm| {
        kruskal_ids(graph, perm, &mut Dsu::new(graph.vertex_count()), &mut ids);
        *counts.entry(ids.clone()).or_insert(0u64) += 1;
    });
    Ok(counts)
}

/// Fraction of edge orderings whose Kruskal leading tree is `tree`, by enumeration.
pub fn tree_weight_exact(graph: &LabeledGraph, tree: &Forest, guard: CostGuard) -> Result<TreeWeight> {
    check_tree_of(graph, tree)?;
    let counts = leading_tree_counts(graph, guard)?;
    let hits = counts.get(&tree.edge_ids()).copied().unwrap_or(0);
    Ok(TreeWeight {
        numerator: BigUint::from(hits),
        denominator: factorial(graph.edge_count() as u64),
    })
}

/// Tree weight from `∫ dw_T ∏_{ℓ∉T} X^T_{i(ℓ)j(ℓ)}(w_T)`, evaluated exactly cell by cell:
/// on `w_{π(1)} > … > w_{π(k)}` the integrand is a monomial and integrates to
/// `∏_j 1/Σ_{i≥j}(a_i+1)`.
pub fn tree_weight_integral(
    graph: &LabeledGraph,
    tree: &Forest,
    guard: CostGuard,
) -> Result<TreeWeight> {
    check_tree_of(graph, tree)?;
    guard.check("edges for ordering enumeration", graph.edge_count() as u64, MAX_ORDERING_EDGES)?;
    let k = tree.len();
    let paths = tree.paths();
    let tree_ids = tree.edge_ids();
    let loops: Vec<&Vec<usize>> = graph
        .edges()
        .iter()
        .enumerate()
        .filter(|(id, _)| !tree_ids.contains(id))
        .filter(|(_, &(u, v))| u != v)
        .map(|(_, &(u, v))| paths[u][v].as_ref().expect("tree spans the graph"))
        .collect();
    let mut rank = vec![0usize; k];
    let mut exps = vec![0u64; k];
    let mut total = BigRational::zero();
    for_each_permutation(k, |perm| {
        for (r, &pos) in perm.iter().enumerate() {
            rank[pos] = r;
        }
        exps.iter_mut().for_each(|a| *a = 0);
        for path in &loops {
            let low = path.iter().map(|&p| rank[p]).max().unwrap();
            exps[low] += 1;
        }
        let mut denom = BigUint::one();
        let mut s = 0u64;
        for a in exps.iter().rev() {
            s += a + 1;
            denom *= s;
        }
        total += BigRational::new(1.into(), denom.into());
    });
    let scaled = total * BigRational::from_integer(factorial(graph.edge_count() as u64).into());
    if !scaled.is_integer() {
        return Err(Error::numeric("tree weight times |E|! is not an integer", 0.0));
    }
    Ok(TreeWeight {
        numerator: scaled.to_integer().to_biguint().expect("nonnegative"),
        denominator: factorial(graph.edge_count() as u64),
    })
}

fn check_weights(w: &[f64], expected: usize) -> Result<()> {
    if w.len() != expected {
        return Err(Error::domain(format!(
            "expected {expected} edge weights, got {}",
            w.len()
        )));
    }
    if let Some(x) = w.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::domain(format!("weight {x} outside [0,1]")));
    }
    Ok(())
}

/// `X^F(w)`: unit diagonal, path minimum of `w` for connected pairs, zero otherwise.
/// `w` is indexed like [`Forest::edges`].
pub fn forest_matrix(forest: &Forest, w: &[f64]) -> Result<DMatrix<f64>> {
    check_weights(w, forest.len())?;
    Ok(forest_matrix_with_paths(&forest.paths(), w))
}

pub(crate) fn forest_matrix_with_paths(paths: &[Vec<Option<Vec<usize>>>], w: &[f64]) -> DMatrix<f64> {
    let n = paths.len();
    DMatrix::from_fn(n, n, |i, j| match &paths[i][j] {
        None => 0.0,
        Some(p) => p.iter().fold(1.0_f64, |m, &k| m.min(w[k])),
    })
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockTerm {
    pub coefficient: f64,
    pub partition: Vec<Vec<usize>>,
}

/// Barycentric decomposition `X^F(w) = (1-w_1) Id + Σ_k (w_k - w_{k+1}) X^{Π_k} + w_last X^{Π_last}`
/// with weights sorted descending (ties by ascending edge index). Zero terms are dropped.
pub fn block_decomposition(forest: &Forest, w: &[f64]) -> Result<Vec<BlockTerm>> {
    check_weights(w, forest.len())?;
    let mut order: Vec<usize> = (0..forest.len()).collect();
    order.sort_by(|&a, &b| w[b].total_cmp(&w[a]).then(forest.edges()[a].id.cmp(&forest.edges()[b].id)));
    let n = forest.vertex_count();
    let mut dsu = Dsu::new(n);
    let mut terms = Vec::new();
    let mut prev = 1.0;
    let mut partition = dsu.partition();
    for &k in &order {
        let c = prev - w[k];
        if c != 0.0 {
            terms.push(BlockTerm { coefficient: c, partition: partition.clone() });
        }
        let e = forest.edges()[k];
        dsu.union(e.u, e.v);
        partition = dsu.partition();
        prev = w[k];
    }
    if prev != 0.0 {
        terms.push(BlockTerm { coefficient: prev, partition });
    }
    Ok(terms)
}

/// Block matrix of a partition: 1 inside blocks, 0 across.
pub fn partition_matrix(n: usize, partition: &[Vec<usize>]) -> DMatrix<f64> {
    let mut label = vec![0; n];
    for (b, block) in partition.iter().enumerate() {
        for &v in block {
            label[v] = b;
        }
    }
    DMatrix::from_fn(n, n, |i, j| if label[i] == label[j] { 1.0 } else { 0.0 })
}

/// Both sides of a forest-formula identity.
#[derive(Debug, Clone, Serialize)]
pub struct FormulaCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub forests: usize,
    pub quadrature_error: f64,
}

/// Forest formula on K_n for `f(X) = exp(Σ_{i<j} t_ij X_ij)`, where `∂_F f = ∏_{ℓ∈F} t_ℓ f`.
/// `t` follows [`LabeledGraph::complete`] edge order.
pub fn forest_formula_verify(n: usize, t: &[f64], guard: CostGuard) -> Result<FormulaCheck> {
    guard.check("forest formula vertices", n as u64, MAX_FORMULA_VERTICES)?;
    let pairs = LabeledGraph::complete(n);
    if t.len() != pairs.edge_count() {
        return Err(Error::domain(format!(
            "expected {} couplings, got {}",
            pairs.edge_count(),
            t.len()
        )));
    }
    if t.iter().any(|x| !x.is_finite()) {
        return Err(Error::domain("couplings must be finite"));
    }
    let lhs = t.iter().sum::<f64>().exp();
    let mut rhs = 0.0;
    let mut qerr = 0.0;
    let mut count = 0;
    let mut failure = None;
    for_each_forest(n, guard, |forest| {
        if failure.is_some() {
            return;
        }
        count += 1;
        let prefactor: f64 = forest.edges().iter().map(|e| t[e.id]).product();
        if prefactor == 0.0 {
            return;
        }
        let paths = forest.paths();
        let links: Vec<(f64, &Vec<usize>)> = pairs
            .edges()
            .iter()
            .zip(t)
            .filter_map(|(&(i, j), &tij)| paths[i][j].as_ref().map(|p| (tij, p)))
            .collect();
        let est = ordered_cells_converged(forest.len(), 1e-12, |w| {
            let s: f64 = links
                .iter()
                .map(|(tij, p)| tij * p.iter().fold(1.0_f64, |m, &k| m.min(w[k])))
                .sum();
            num_complex::Complex64::new(s.exp(), 0.0)
        });
        match est {
            Ok(e) => {
                rhs += prefactor * e.value.re;
                qerr += prefactor.abs() * e.error;
            }
            Err(e) => failure = Some(e),
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(FormulaCheck {
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
        forests: count,
        quadrature_error: qerr,
    })
}

/// Real polynomial `Σ_k coeffs[k] x^k`.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct Polynomial {
    pub coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Polynomial { coeffs }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.iter().rposition(|&c| c != 0.0).unwrap_or(0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self, k: usize) -> Polynomial {
        let coeffs = (k..self.coeffs.len())
            .map(|i| self.coeffs[i] * ((i - k + 1)..=i).map(|m| m as f64).product::<f64>())
            .collect();
        Polynomial { coeffs }
    }
}

/// `E[∏_i τ_i^{k_i}]` for a centered Gaussian vector with covariance `cov`, by the
/// recursion `E[τ_a F] = Σ_b cov_ab E[∂_b F]`.
pub fn gaussian_moment(cov: &DMatrix<f64>, powers: &[u32]) -> f64 {
    let mut memo = std::collections::HashMap::new();
    moment_rec(cov, powers.to_vec(), &mut memo)
}

fn moment_rec(
    cov: &DMatrix<f64>,
    powers: Vec<u32>,
    memo: &mut std::collections::HashMap<Vec<u32>, f64>,
) -> f64 {
    let Some(a) = powers.iter().position(|&k| k > 0) else {
        return 1.0;
    };
    if powers.iter().sum::<u32>() % 2 == 1 {
        return 0.0;
    }
    if let Some(&v) = memo.get(&powers) {
        return v;
    }
    let mut rest = powers.clone();
    rest[a] -= 1;
    let mut total = 0.0;
    for b in 0..rest.len() {
        if rest[b] == 0 || cov[(a, b)] == 0.0 {
            continue;
        }
        let mut next = rest.clone();
        next[b] -= 1;
        total += cov[(a, b)] * f64::from(rest[b]) * moment_rec(cov, next, memo);
    }
    memo.insert(powers, total);
    total
}

/// Replica identity `∫dμ_C(τ) ∏_i f_i(τ) = Σ_F ∫dw ∫dμ_{C X^F(w)} ∏_{(i,j)∈F} C∂_i∂_j ∏_i f_i(τ_i)`
/// for a scalar covariance `c` and polynomials of degree at most 4.
pub fn gaussian_replica_verify(c: f64, polys: &[Polynomial], guard: CostGuard) -> Result<FormulaCheck> {
    let n = polys.len();
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::domain("covariance must be positive"));
    }
    if n == 0 || polys.iter().any(|p| p.degree() > 4) {
        return Err(Error::domain("need at least one polynomial of degree <= 4"));
    }
    guard.check("replicas", n as u64, MAX_FORMULA_VERTICES)?;
    let sd = c.sqrt();
    let rule = crate::quadrature::normal_rule(2 * n + 4);
    let lhs: f64 = rule
        .iter()
        .map(|&(x, w)| w * polys.iter().map(|p| p.eval(sd * x)).product::<f64>())
        .sum();
    let mut rhs = 0.0;
    let mut count = 0;
    for_each_forest(n, guard, |forest| {
        count += 1;
        let mut deg = vec![0usize; n];
        for e in forest.edges() {
            deg[e.u] += 1;
            deg[e.v] += 1;
        }
        let derived: Vec<Polynomial> = polys.iter().zip(&deg).map(|(p, &d)| p.derivative(d)).collect();
        if derived.iter().any(|p| p.coeffs.iter().all(|&x| x == 0.0)) {
            return;
        }
        let mut monomials: Vec<(f64, Vec<u32>)> = vec![(1.0, Vec::new())];
        for p in &derived {
            let mut next = Vec::new();
            for (coef, pw) in &monomials {
                for (k, &a) in p.coeffs.iter().enumerate() {
                    if a != 0.0 {
                        let mut q = pw.clone();
                        q.push(k as u32);
                        next.push((coef * a, q));
                    }
                }
            }
            monomials = next;
        }
        let paths = forest.paths();
        let scale = c.powi(forest.len() as i32);
        let val: f64 = ordered_cells(forest.len(), 8, |w| {
            let cov = forest_matrix_with_paths(&paths, w) * c;
            monomials.iter().map(|(a, pw)| a * gaussian_moment(&cov, pw)).sum::<f64>()
        });
        rhs += scale * val;
    })?;
    Ok(FormulaCheck {
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
        forests: count,
        quadrature_error: 0.0,
    })
}

/// Nested forests `F_1 ⊆ … ⊆ F_m` of K_n; `levels[k]` is `F_{k+1}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Jungle {
    levels: Vec<Forest>,
}

impl Jungle {
    pub fn new(levels: Vec<Forest>) -> Result<Self> {
        for pair in levels.windows(2) {
            let outer = pair[1].edge_ids();
            if pair[0].vertex_count() != pair[1].vertex_count()
                || pair[0].edges().iter().any(|e| !outer.contains(&e.id))
            {
                return Err(Error::structure("jungle levels are not nested"));
            }
        }
        if levels.is_empty() {
            return Err(Error::structure("jungle needs at least one level"));
        }
        Ok(Jungle { levels })
    }

    pub fn levels(&self) -> &[Forest] {
        &self.levels
    }

    /// Top forest `F_m`; weights for [`jungle_matrices`] are indexed by its edges.
    pub fn top(&self) -> &Forest {
        self.levels.last().unwrap()
    }
}

/// All m-level jungles on K_n: each edge of a top forest gets the level where it first appears.
pub fn enumerate_jungles(n: usize, m: usize, guard: CostGuard) -> Result<Vec<Jungle>> {
    if m == 0 {
        return Err(Error::domain("jungles need m >= 1"));
    }
    let tops = enumerate_forests(n, guard)?;
    let total: f64 = tops.iter().map(|f| (m as f64).powi(f.len() as i32)).sum();
    guard.check("jungles", total.min(u64::MAX as f64) as u64, MAX_JUNGLES)?;
    let mut out = Vec::with_capacity(total as usize);
    for top in tops {
        let k = top.len();
        let mut level = vec![0usize; k];
        loop {
            let levels = (0..m)
                .map(|lv| Forest {
                    vertex_count: n,
                    edges: top
                        .edges()
                        .iter()
                        .zip(&level)
                        .filter(|(_, &l)| l <= lv)
                        .map(|(e, _)| *e)
                        .collect(),
                })
                .collect();
            out.push(Jungle { levels });
            let mut d = 0;
            while d < k {
                level[d] += 1;
                if level[d] < m {
                    break;
                }
                level[d] = 0;
                d += 1;
            }
            if d == k {
                break;
            }
        }
    }
    Ok(out)
}

/// Level matrices of a jungle: entry is 1 if `i,j` are joined by `F_{k-1}`, 0 if not joined
/// by `F_k`, otherwise the minimum of `w` over the `F_k∖F_{k-1}` edges of the path.
pub fn jungle_matrices(jungle: &Jungle, w: &[f64]) -> Result<Vec<DMatrix<f64>>> {
    let top = jungle.top();
    check_weights(w, top.len())?;
    let n = top.vertex_count();
    let mut out = Vec::with_capacity(jungle.levels.len());
    let empty = Forest { vertex_count: n, edges: Vec::new() };
    for (k, level) in jungle.levels.iter().enumerate() {
        let lower = if k == 0 { &empty } else { &jungle.levels[k - 1] };
        let lower_ids = lower.edge_ids();
        let paths = level.paths();
        let lower_comp = component_labels(lower);
        let weights: Vec<f64> = level
            .edges()
            .iter()
            .map(|e| {
                let pos = top.edges().iter().position(|t| t.id == e.id).unwrap();
                if lower_ids.contains(&e.id) { 1.0 } else { w[pos] }
            })
            .collect();
        out.push(DMatrix::from_fn(n, n, |i, j| {
            if lower_comp[i] == lower_comp[j] {
                1.0
            } else {
                match &paths[i][j] {
                    None => 0.0,
                    Some(p) => p.iter().fold(1.0_f64, |m, &q| m.min(weights[q])),
                }
            }
        }));
    }
    Ok(out)
}

fn component_labels(f: &Forest) -> Vec<usize> {
    let mut dsu = Dsu::new(f.vertex_count());
    for e in f.edges() {
        dsu.union(e.u, e.v);
    }
    (0..f.vertex_count()).map(|v| dsu.find(v)).collect()
}

/// Number of labeled vacuum Feynman graphs of order n in the quartic scalar model, `(4n-1)!!`.
pub fn count_labeled_phi4_graphs(n: u64) -> BigUint {
    (1..=2 * n).fold(BigUint::one(), |acc, k| acc * (2 * k - 1))
}
