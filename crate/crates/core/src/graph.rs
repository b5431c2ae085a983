//! Weighted undirected graphs, Laplacians, spectra and synthetic blockmodels.
//!
//! Everything here is dense: the networks this crate targets have at most a
//! few thousand nodes, where exact factorizations are cheap and easy to
//! verify.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Undirected graph with nonnegative edge weights and symmetric adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl WeightedGraph {
    /// Builds a graph on `n` nodes. Self-loops, negative or non-finite
    /// weights, out-of-range endpoints and repeated unordered pairs are
    /// rejected; duplicates are never summed.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut stored = Vec::new();
        let mut adjacency = vec![Vec::new(); n];
        for (u, v, w) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({u}, {v}) out of range for {n} nodes"
                )));
            }
            if u == v {
                return Err(Error::InvalidGraph(format!("self-loop at node {u}")));
            }
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidGraph(format!(
                    "edge ({u}, {v}) has invalid weight {w}"
                )));
            }
            let key = (u.min(v), u.max(v));
            if !seen.insert(key) {
                return Err(Error::InvalidGraph(format!(
                    "duplicate edge ({}, {})",
                    key.0, key.1
                )));
            }
            adjacency[u].push((v, w));
            adjacency[v].push((u, w));
            stored.push((u, v, w));
        }
        for row in &mut adjacency {
            row.sort_by_key(|&(j, _)| j);
        }
        Ok(Self {
            n,
            edges: stored,
            adjacency,
        })
    }

    /// Graph on `n` nodes with no edges.
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            edges: Vec::new(),
            adjacency: vec![Vec::new(); n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    /// Neighbors of `i` with their weights, sorted by neighbor index.
    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> f64 {
        self.adjacency[i].iter().map(|&(_, w)| w).sum()
    }

    pub fn max_degree(&self) -> f64 {
        (0..self.n).map(|i| self.degree(i)).fold(0.0, f64::max)
    }

    pub fn weight_matrix(&self) -> DMatrix<f64> {
        let mut w = DMatrix::zeros(self.n, self.n);
        for &(u, v, wt) in &self.edges {
            w[(u, v)] = wt;
            w[(v, u)] = wt;
        }
        w
    }

    /// `xᵀLx` evaluated edge by edge.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.edges
            .iter()
            .map(|&(u, v, w)| w * (x[u] - x[v]).powi(2))
            .sum()
    }

    /// `Lx` without materializing `L`.
    pub fn laplacian_apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                self.adjacency[i]
                    .iter()
                    .map(|&(j, w)| w * (x[i] - x[j]))
                    .sum()
            })
            .collect()
    }

    /// Connected components (through positive-weight edges), each sorted,
    /// ordered by their smallest node.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut label = vec![usize::MAX; self.n];
        let mut out = Vec::new();
        for start in 0..self.n {
            if label[start] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut stack = vec![start];
            let mut members = Vec::new();
            label[start] = id;
            while let Some(u) = stack.pop() {
                members.push(u);
                for &(v, w) in &self.adjacency[u] {
                    if w > 0.0 && label[v] == usize::MAX {
                        label[v] = id;
                        stack.push(v);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }
}

/// Combinatorial Laplacian `L = D − W`.
pub fn laplacian(graph: &WeightedGraph) -> DMatrix<f64> {
    let n = graph.n();
    let mut l = DMatrix::zeros(n, n);
    for &(u, v, w) in graph.edges() {
        l[(u, v)] -= w;
        l[(v, u)] -= w;
        l[(u, u)] += w;
        l[(v, v)] += w;
    }
    l
}

/// Laplacian of the subgraph made of the edges incident to `i`.
pub fn restricted_laplacian(graph: &WeightedGraph, i: usize) -> Result<DMatrix<f64>> {
    let n = graph.n();
    if i >= n {
        return Err(Error::InvalidParameter(format!(
            "node {i} out of range for {n} nodes"
        )));
    }
    let mut l = DMatrix::zeros(n, n);
    for &(j, w) in graph.neighbors(i) {
        l[(i, i)] += w;
        l[(j, j)] += w;
        l[(i, j)] -= w;
        l[(j, i)] -= w;
    }
    Ok(l)
}

/// Flips `v` so that its largest-magnitude entry is positive; among entries
/// tied in magnitude the lowest index decides.
pub(crate) fn orient(v: &mut [f64]) {
    let peak = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if peak == 0.0 {
        return;
    }
    if let Some(&lead) = v.iter().find(|x| x.abs() >= peak * (1.0 - 1e-9)) {
        if lead < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Eigenpairs of a symmetric matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: DVector<f64>,
    /// Orthonormal eigenvectors as columns, oriented by [`orient`].
    pub eigenvectors: DMatrix<f64>,
}

impl SpectralDecomposition {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let lambda = DMatrix::from_diagonal(&self.eigenvalues);
        &self.eigenvectors * lambda * self.eigenvectors.transpose()
    }

    /// Largest eigenvalue (the spectral radius for a Laplacian).
    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn spectral_decomposition(matrix: &DMatrix<f64>) -> Result<SpectralDecomposition> {
    let n = matrix.nrows();
    if matrix.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: matrix.ncols(),
        });
    }
    let scale = matrix.amax().max(1.0);
    let asymmetry = (matrix - matrix.transpose()).amax();
    if asymmetry > 1e-8 * scale {
        return Err(Error::NonSymmetricInput { asymmetry });
    }
    let sym = (matrix + matrix.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
        orient(&mut v);
        eigenvectors.set_column(col, &DVector::from_vec(v));
    }
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

pub const CENTRALITY_TOL: f64 = 1e-10;
pub const CENTRALITY_MAX_ITER: usize = 10_000;

/// Eigenvector centrality of the weight matrix, unit 2-norm, nonnegative.
///
/// Power iteration runs on `W + I` (same eigenvectors, no oscillation on
/// bipartite graphs) separately per connected component. The component with
/// the largest spectral radius carries all the mass; exact ties go to the
/// component holding the lowest node index.
pub fn eigenvector_centrality(
    graph: &WeightedGraph,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    if !graph.edges().iter().any(|&(_, _, w)| w > 0.0) {
        return Err(Error::InvalidParameter(
            "eigenvector centrality needs at least one weighted edge".into(),
        ));
    }
    let n = graph.n();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for comp in graph.components() {
        if comp.len() < 2 {
            continue;
        }
        let (radius, vector) = component_power_iteration(graph, &comp, tol, max_iter)?;
        let better = match &best {
            None => true,
            Some((r, _)) => radius > r * (1.0 + 1e-9) + 1e-300,
        };
        if better {
            let mut full = vec![0.0; n];
            for (&node, &x) in comp.iter().zip(&vector) {
                full[node] = x;
            }
            best = Some((radius, full));
        }
    }
    let (_, mut pi) = best.expect("a weighted edge implies a nontrivial component");
    orient(&mut pi);
    for x in &mut pi {
        if *x < 0.0 {
            // Perron vector: negative entries are round-off.
            *x = 0.0;
        }
    }
    Ok(pi)
}

fn component_power_iteration(
    graph: &WeightedGraph,
    comp: &[usize],
    tol: f64,
    max_iter: usize,
) -> Result<(f64, Vec<f64>)> {
    let m = comp.len();
    let mut local = vec![usize::MAX; graph.n()];
    for (k, &node) in comp.iter().enumerate() {
        local[node] = k;
    }
    let apply_w = |x: &[f64]| -> Vec<f64> {
        comp.iter()
            .map(|&u| {
                graph
                    .neighbors(u)
                    .iter()
                    .map(|&(v, w)| w * x[local[v]])
                    .sum()
            })
            .collect()
    };
    let mut x = vec![1.0 / (m as f64).sqrt(); m];
    for _ in 0..max_iter {
        let wx = apply_w(&x);
        let mut next: Vec<f64> = wx.iter().zip(&x).map(|(a, b)| a + b).collect();
        let norm = next.iter().map(|v| v * v).sum::<f64>().sqrt();
        next.iter_mut().for_each(|v| *v /= norm);
        let change = next
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        x = next;
        if change <= tol {
            let wx = apply_w(&x);
            let radius = x.iter().zip(&wx).map(|(a, b)| a * b).sum();
            return Ok((radius, x));
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
    })
}

/// One-hot community membership, the regression design of a blockmodel.
#[derive(Debug, Clone, PartialEq)]
pub struct CommunityEmbedding {
    pub membership: Vec<usize>,
    pub sizes: Vec<usize>,
}

impl CommunityEmbedding {
    /// Contiguous blocks: the first `sizes[0]` nodes form community 0, etc.
    pub fn contiguous(sizes: &[usize]) -> Self {
        let membership = sizes
            .iter()
            .enumerate()
            .flat_map(|(k, &s)| std::iter::repeat_n(k, s))
            .collect();
        Self {
            membership,
            sizes: sizes.to_vec(),
        }
    }

    pub fn n(&self) -> usize {
        self.membership.len()
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let mut x = DMatrix::zeros(self.n(), self.sizes.len());
        for (i, &k) in self.membership.iter().enumerate() {
            x[(i, k)] = 1.0;
        }
        x
    }
}

/// Stochastic blockmodel with unit weights: each pair is joined
/// independently with `p_in` inside a community and `p_out` across.
pub fn generate_blockmodel(
    sizes: &[usize],
    p_in: f64,
    p_out: f64,
    seed: u64,
) -> Result<(WeightedGraph, CommunityEmbedding)> {
    for (name, p) in [("p_in", p_in), ("p_out", p_out)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("{name} = {p} not in [0, 1]")));
        }
    }
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(Error::InvalidParameter(
            "community sizes must be positive".into(),
        ));
    }
    let embedding = CommunityEmbedding::contiguous(sizes);
    let n = embedding.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let p = if embedding.membership[u] == embedding.membership[v] {
                p_in
            } else {
                p_out
            };
            if rng.random::<f64>() < p {
                edges.push((u, v, 1.0));
            }
        }
    }
    Ok((WeightedGraph::new(n, edges)?, embedding))
}

/// Erdős–Rényi graph with unit weights.
pub fn generate_gnp(n: usize, p: f64, seed: u64) -> Result<WeightedGraph> {
    Ok(generate_blockmodel(&[n.max(1)], p, 0.0, seed)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn k2() -> WeightedGraph {
        WeightedGraph::new(2, [(0, 1, 1.0)]).unwrap()
    }

    fn complete(n: usize) -> WeightedGraph {
        let edges = (0..n).flat_map(|u| ((u + 1)..n).map(move |v| (u, v, 1.0)));
        WeightedGraph::new(n, edges).unwrap()
    }

    #[test]
    fn rejects_malformed_edges() {
        assert!(WeightedGraph::new(2, [(0, 0, 1.0)]).is_err());
        assert!(WeightedGraph::new(2, [(0, 2, 1.0)]).is_err());
        assert!(WeightedGraph::new(2, [(0, 1, -1.0)]).is_err());
        assert!(WeightedGraph::new(3, [(0, 1, 1.0), (1, 0, 2.0)]).is_err());
    }

    #[test]
    fn laplacian_small_cases() {
        assert_eq!(laplacian(&WeightedGraph::empty(2)), DMatrix::zeros(2, 2));
        assert_eq!(
            laplacian(&k2()),
            DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0])
        );
        let path = WeightedGraph::new(3, [(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        assert_eq!(
            laplacian(&path),
            DMatrix::from_row_slice(3, 3, &[1.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 1.0])
        );
    }

    #[test]
    fn restricted_laplacian_cases() {
        let g = WeightedGraph::new(3, [(0, 1, 1.0)]).unwrap();
        assert_eq!(restricted_laplacian(&g, 2).unwrap(), DMatrix::zeros(3, 3));
        assert_eq!(restricted_laplacian(&k2(), 0).unwrap(), laplacian(&k2()));
        let tri = complete(3);
        let l0 = restricted_laplacian(&tri, 0).unwrap();
        assert_eq!(
            l0,
            DMatrix::from_row_slice(3, 3, &[2.0, -1.0, -1.0, -1.0, 1.0, 0.0, -1.0, 0.0, 1.0])
        );
        assert!(restricted_laplacian(&tri, 3).is_err());
    }

    #[test]
    fn spectra_of_known_graphs() {
        let zero = spectral_decomposition(&DMatrix::zeros(3, 3)).unwrap();
        assert!(zero.eigenvalues.iter().all(|&l| l.abs() < 1e-14));

        let s = spectral_decomposition(&laplacian(&k2())).unwrap();
        assert_abs_diff_eq!(s.eigenvalues[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.eigenvalues[1], 2.0, epsilon = 1e-12);

        let s = spectral_decomposition(&laplacian(&complete(5))).unwrap();
        assert_abs_diff_eq!(s.eigenvalues[0], 0.0, epsilon = 1e-10);
        for k in 1..5 {
            assert_abs_diff_eq!(s.eigenvalues[k], 5.0, epsilon = 1e-10);
        }
        let u1 = s.eigenvectors.column(0);
        for x in u1.iter() {
            assert_abs_diff_eq!(*x, 1.0 / 5f64.sqrt(), epsilon = 1e-10);
        }
    }

    #[test]
    fn non_symmetric_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(
            spectral_decomposition(&m),
            Err(Error::NonSymmetricInput { .. })
        ));
    }

    #[test]
    fn centrality_cases() {
        let pi = eigenvector_centrality(&k2(), CENTRALITY_TOL, CENTRALITY_MAX_ITER).unwrap();
        assert_abs_diff_eq!(pi[0], 0.5f64.sqrt(), epsilon = 1e-9);
        assert_abs_diff_eq!(pi[1], 0.5f64.sqrt(), epsilon = 1e-9);

        // Star K_{1,3}: dominant eigenvector ∝ (√3, 1, 1, 1).
        let star = WeightedGraph::new(4, [(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)]).unwrap();
        let pi = eigenvector_centrality(&star, CENTRALITY_TOL, CENTRALITY_MAX_ITER).unwrap();
        let norm = 6f64.sqrt();
        assert_abs_diff_eq!(pi[0], 3f64.sqrt() / norm, epsilon = 1e-8);
        for &x in &pi[1..] {
            assert_abs_diff_eq!(x, 1.0 / norm, epsilon = 1e-8);
        }

        let two = WeightedGraph::new(4, [(0, 1, 1.0), (2, 3, 2.0)]).unwrap();
        let pi = eigenvector_centrality(&two, CENTRALITY_TOL, CENTRALITY_MAX_ITER).unwrap();
        assert_eq!(&pi[..2], &[0.0, 0.0]);
        assert_abs_diff_eq!(pi[2], 0.5f64.sqrt(), epsilon = 1e-9);

        // Exact tie between components: lowest index wins.
        let tie = WeightedGraph::new(4, [(2, 3, 1.0), (0, 1, 1.0)]).unwrap();
        let pi = eigenvector_centrality(&tie, CENTRALITY_TOL, CENTRALITY_MAX_ITER).unwrap();
        assert!(pi[0] > 0.7 && pi[2] == 0.0);

        assert!(eigenvector_centrality(&WeightedGraph::empty(3), 1e-10, 10).is_err());
    }

    #[test]
    fn blockmodel_small_cases() {
        let (g, x) = generate_blockmodel(&[3], 1.0, 0.0, 1).unwrap();
        assert_eq!(g.edges().len(), 3);
        assert_eq!(x.sizes, vec![3]);

        let (g, x) = generate_blockmodel(&[2, 2], 1.0, 0.0, 7).unwrap();
        assert_eq!(g.edges(), &[(0, 1, 1.0), (2, 3, 1.0)]);
        assert_eq!(
            x.matrix(),
            DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0])
        );
        assert!(generate_blockmodel(&[2], 1.5, 0.0, 0).is_err());
    }

    #[test]
    fn blockmodel_edge_count_concentrates() {
        let (g, _) = generate_blockmodel(&[50, 50], 0.5, 0.05, 2024).unwrap();
        let within = 2.0_f64 * 1225.0;
        let across = 2500.0;
        let mean = within * 0.5 + across * 0.05;
        let sd = (within * 0.25 + across * 0.05 * 0.95).sqrt();
        assert!((g.edges().len() as f64 - mean).abs() <= 3.0 * sd);
    }

    #[test]
    fn blockmodel_is_seed_deterministic() {
        let a = generate_blockmodel(&[10, 5], 0.4, 0.1, 99).unwrap().0;
        let b = generate_blockmodel(&[10, 5], 0.4, 0.1, 99).unwrap().0;
        assert_eq!(a, b);
    }
}
