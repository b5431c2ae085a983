//! Deviator recovery by robust regression.
//!
//! Intrinsic opinions are assumed to follow `s = Xv` for a node embedding
//! `X`. Reports of strategic agents break that model, so a hard-thresholding
//! regression (TORRENT) that keeps only the best-fitting rows recovers `v`,
//! and the nodes whose reconstructed report is furthest from `Xv̂` are the
//! suspects.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::detection::reconstruct_intrinsic;
use crate::error::{check_len, Error, Result};
use crate::fj::{OpinionProfile, OpinionRole, SusceptibilityProfile};
use crate::graph::{laplacian, spectral_decomposition, CommunityEmbedding, WeightedGraph};
use crate::strategic::StrategicSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    OneHotCommunity,
    SpectralEmbedding,
    ExternalFile,
}

/// Node features, one row per node.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    x: DMatrix<f64>,
    provenance: Provenance,
}

impl EmbeddingMatrix {
    pub fn new(x: DMatrix<f64>, provenance: Provenance) -> Result<Self> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("embedding has non-finite entries".into()));
        }
        Ok(Self { x, provenance })
    }

    pub fn one_hot(communities: &CommunityEmbedding) -> Self {
        Self {
            x: communities.matrix(),
            provenance: Provenance::OneHotCommunity,
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }
}

/// Columns `u_2 … u_{d+1}` of the Laplacian eigenbasis.
pub fn spectral_embedding(graph: &WeightedGraph, d: usize) -> Result<EmbeddingMatrix> {
    let n = graph.n();
    if d == 0 || d >= n {
        return Err(Error::InvalidParameter(format!(
            "embedding dimension {d} must lie in [1, {}]",
            n.saturating_sub(1)
        )));
    }
    let spec = spectral_decomposition(&laplacian(graph))?;
    let x = spec.eigenvectors.columns(1, d).into_owned();
    Ok(EmbeddingMatrix {
        x,
        provenance: Provenance::SpectralEmbedding,
    })
}

/// Per-column `(x − min)/(max − min)`; constant columns become 0.
pub fn min_max_normalize(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = x.clone();
    for mut col in out.column_iter_mut() {
        let lo = col.min();
        let hi = col.max();
        let span = hi - lo;
        if span > 0.0 {
            col.apply(|v| *v = (*v - lo) / span);
        } else {
            col.fill(0.0);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TorrentVariant {
    #[default]
    FullyCorrective,
    GradientStep,
}

pub const TORRENT_TOL: f64 = 1e-10;

/// `⌈10 (ln n)²⌉`, at least 1.
pub fn default_max_iter(n: usize) -> usize {
    let l = (n.max(2) as f64).ln();
    ((10.0 * l * l).ceil() as usize).max(1)
}

#[derive(Debug, Clone)]
pub struct TorrentFit {
    pub weights: DVector<f64>,
    pub iterations: usize,
    pub active_set: Vec<usize>,
    pub active_set_trace: Vec<usize>,
}

fn active_size(n: usize, beta: f64) -> usize {
    (((1.0 - beta) * n as f64 - 1e-9).ceil() as usize).clamp(1, n)
}

/// Indices of the `m` smallest `|r_i|`, ties to the lower index, returned sorted.
fn smallest_residuals(r: &DVector<f64>, m: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..r.len()).collect();
    idx.sort_by(|&a, &b| r[a].abs().total_cmp(&r[b].abs()).then(a.cmp(&b)));
    idx.truncate(m);
    idx.sort_unstable();
    idx
}

fn rows(x: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    x.select_rows(idx)
}

fn check_rank(xa: &DMatrix<f64>) -> Result<()> {
    let d = xa.ncols();
    let sv = xa.clone().svd(false, false).singular_values;
    let top = sv.max();
    let cutoff = top * f64::EPSILON * xa.nrows().max(d) as f64;
    let rank = sv.iter().filter(|&&s| s > cutoff).count();
    if rank < d || top == 0.0 {
        return Err(Error::RankDeficientActiveSet { rank, columns: d });
    }
    Ok(())
}

fn least_squares(xa: &DMatrix<f64>, ya: &DVector<f64>) -> Result<DVector<f64>> {
    check_rank(xa)?;
    xa.clone()
        .svd(true, true)
        .solve(ya, 0.0)
        .map_err(|_| Error::SingularSystem)
}

/// Hard-thresholding robust regression of `y` on `x`, keeping the
/// `⌈(1 − β)n⌉` best-fitting rows each round.
pub fn torrent(
    x: &DMatrix<f64>,
    y: &[f64],
    beta: f64,
    variant: TorrentVariant,
    tol: f64,
    max_iter: Option<usize>,
) -> Result<TorrentFit> {
    let n = x.nrows();
    let d = x.ncols();
    check_len(n, y.len())?;
    if !(0.0..0.5).contains(&beta) {
        return Err(Error::InvalidParameter(format!("beta = {beta} not in [0, 1/2)")));
    }
    let m = active_size(n, beta);
    if m < d {
        return Err(Error::RankDeficientActiveSet { rank: m, columns: d });
    }
    let max_iter = max_iter.unwrap_or_else(|| default_max_iter(n));
    let y = DVector::from_column_slice(y);
    let scale = 1.0_f64.max(x.amax() * y.amax() * n as f64);
    let eta = match variant {
        TorrentVariant::FullyCorrective => 0.0,
        TorrentVariant::GradientStep => {
            let norm = x.clone().svd(false, false).singular_values.max();
            if norm == 0.0 {
                return Err(Error::RankDeficientActiveSet { rank: 0, columns: d });
            }
            1.0 / (norm * norm)
        }
    };

    let mut active: Vec<usize> = (0..n).collect();
    let mut w = DVector::zeros(d);
    let mut trace = Vec::new();
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let xa = rows(x, &active);
        let ya = y.select_rows(&active);
        let w_next = match variant {
            TorrentVariant::FullyCorrective => least_squares(&xa, &ya)?,
            TorrentVariant::GradientStep => {
                check_rank(&xa)?;
                &w + xa.transpose() * (&ya - &xa * &w) * eta
            }
        };
        let step = (&w_next - &w).norm();
        w = w_next;
        let r = &y - x * &w;
        let next = smallest_residuals(&r, m);
        trace.push(next.len());
        let repeated = next == active;
        let settled = match variant {
            TorrentVariant::FullyCorrective => {
                let xa = rows(x, &next);
                let ra = r.select_rows(&next);
                repeated || (xa.transpose() * ra).amax() <= tol * scale
            }
            TorrentVariant::GradientStep => false,
        };
        active = next;
        if settled || (iterations > 1 && step <= tol) {
            break;
        }
    }
    Ok(TorrentFit {
        weights: w,
        iterations,
        active_set: active,
        active_set_trace: trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecoveryWarning {
    /// The k-th and (k+1)-th largest diffs are within 1e−9.
    InsufficientSeparation,
}

#[derive(Debug, Clone)]
pub struct RecoveryResult {
    pub s_hat: OpinionProfile,
    pub s_prime_hat: OpinionProfile,
    pub strategic_set: StrategicSet,
    pub weights: DVector<f64>,
    pub diffs: Vec<f64>,
    pub iterations: usize,
    pub active_set_trace: Vec<usize>,
    pub warning: Option<RecoveryWarning>,
}

/// Indices of the `k` largest values, ties to the lower index.
pub fn top_k(values: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Reconstructs the reported opinions, regresses them on the embedding with
/// `β = k/n` and returns the `k` worst-fitting nodes.
pub fn recover_deviators(
    embedding: &EmbeddingMatrix,
    graph: &WeightedGraph,
    alpha: &SusceptibilityProfile,
    z_prime: &[f64],
    k: usize,
    variant: TorrentVariant,
) -> Result<RecoveryResult> {
    let n = graph.n();
    check_len(n, embedding.n())?;
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!("k = {k} not in [1, {n}]")));
    }
    let s_prime_hat = reconstruct_intrinsic(graph, alpha, z_prime)?;
    let design = match variant {
        TorrentVariant::FullyCorrective => embedding.matrix().clone(),
        TorrentVariant::GradientStep => min_max_normalize(embedding.matrix()),
    };
    let beta = k as f64 / n as f64;
    let fit = torrent(&design, &s_prime_hat, beta, variant, TORRENT_TOL, None)?;
    let s_hat: Vec<f64> = (&design * &fit.weights).iter().copied().collect();
    let diffs: Vec<f64> = s_hat.iter().zip(s_prime_hat.iter()).map(|(a, b)| (a - b).abs()).collect();
    let order = top_k(&diffs, n);
    let warning = (k < n && (diffs[order[k - 1]] - diffs[order[k]]).abs() <= 1e-9)
        .then_some(RecoveryWarning::InsufficientSeparation);
    let strategic_set = StrategicSet::new(order[..k].to_vec(), n)?;
    Ok(RecoveryResult {
        s_hat: OpinionProfile::trusted(OpinionRole::IntrinsicTrue, s_hat),
        s_prime_hat,
        strategic_set,
        weights: fit.weights,
        diffs,
        iterations: fit.iterations,
        active_set_trace: fit.active_set_trace,
        warning,
    })
}

/// Mean of the true-positive and true-negative rates of `estimate` against
/// `truth`. With an empty truth only the true-negative rate is defined.
pub fn balanced_accuracy(truth: &StrategicSet, estimate: &StrategicSet, n: usize) -> f64 {
    let t = truth.mask(n);
    let e = estimate.mask(n);
    let (mut tp, mut tn, mut pos, mut neg) = (0usize, 0usize, 0usize, 0usize);
    for (a, b) in t.iter().zip(&e) {
        if *a {
            pos += 1;
            tp += usize::from(*b);
        } else {
            neg += 1;
            tn += usize::from(!*b);
        }
    }
    let tpr = (pos > 0).then(|| tp as f64 / pos as f64);
    let tnr = (neg > 0).then(|| tn as f64 / neg as f64);
    match (tpr, tnr) {
        (Some(a), Some(b)) => 0.5 * (a + b),
        (Some(a), None) => a,
        (None, Some(b)) => b,
        (None, None) => 1.0,
    }
}

/// Mean of `|(ŝ_i − s_i)/s_i|` over entries with `|s_i| ≥ 1e−12`, and the
/// number of excluded entries.
pub fn relative_recovery_error(s_hat: &[f64], s: &[f64]) -> (f64, usize) {
    let mut sum = 0.0;
    let mut used = 0usize;
    for (a, b) in s_hat.iter().zip(s) {
        if b.abs() >= 1e-12 {
            sum += ((a - b) / b).abs();
            used += 1;
        }
    }
    let mean = if used == 0 { 0.0 } else { sum / used as f64 };
    (mean, s.len() - used)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertificateMethod {
    BruteForce,
    BlockmodelClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SscSssCertificate {
    pub gamma: f64,
    /// Smallest `λ_min(X_SᵀX_S)` over subsets of size `(1 − γ)n`.
    pub xi: f64,
    /// Largest `λ_max(X_SᵀX_S)` over subsets of size `γn`.
    pub big_xi: f64,
    pub condition_value: f64,
    pub certified: bool,
    pub method: CertificateMethod,
}

impl SscSssCertificate {
    fn build(gamma: f64, xi: f64, big_xi: f64, method: CertificateMethod) -> Self {
        let condition_value = if xi > 0.0 {
            4.0 * (big_xi / xi).sqrt()
        } else {
            f64::INFINITY
        };
        Self {
            gamma,
            xi,
            big_xi,
            condition_value,
            certified: condition_value < 1.0,
            method,
        }
    }
}

pub const BRUTE_FORCE_MAX_N: usize = 20;

fn subset_sizes(n: usize, gamma: f64) -> Result<(usize, usize)> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidParameter(format!("gamma = {gamma} not in (0, 1)")));
    }
    let small = ((gamma * n as f64).round() as usize).clamp(1, n);
    let large = (((1.0 - gamma) * n as f64).round() as usize).clamp(1, n);
    Ok((small, large))
}

fn gram_extremes(x: &DMatrix<f64>, subset: &[usize]) -> (f64, f64) {
    let xs = x.select_rows(subset);
    let eig = SymmetricEigen::new(xs.transpose() * xs).eigenvalues;
    (eig.min(), eig.max())
}

/// Exact SSC/SSS constants by enumerating every row subset.
pub fn ssc_sss_bruteforce(x: &DMatrix<f64>, gamma: f64) -> Result<SscSssCertificate> {
    let n = x.nrows();
    if n > BRUTE_FORCE_MAX_N {
        return Err(Error::TooLarge { n, max: BRUTE_FORCE_MAX_N });
    }
    let (small, large) = subset_sizes(n, gamma)?;
    let xi = (0..n)
        .combinations(large)
        .map(|s| gram_extremes(x, &s).0)
        .fold(f64::INFINITY, f64::min);
    let big_xi = (0..n)
        .combinations(small)
        .map(|s| gram_extremes(x, &s).1)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(SscSssCertificate::build(gamma, xi.max(0.0), big_xi, CertificateMethod::BruteForce))
}

/// `(ξ, Ξ)` for one-hot community features: `ξ = max(0, n_K − (n − ⌊(1−γ)n⌉))`
/// and `Ξ = min(⌊γn⌉, n_1)`.
pub fn blockmodel_extremes(sizes: &[usize], gamma: f64) -> Result<(f64, f64)> {
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(Error::InvalidParameter("community sizes must be positive".into()));
    }
    let n: usize = sizes.iter().sum();
    let (small, large) = subset_sizes(n, gamma)?;
    let largest = *sizes.iter().max().unwrap();
    let smallest = *sizes.iter().min().unwrap();
    let xi = smallest.saturating_sub(n - large);
    let big_xi = small.min(largest);
    Ok((xi as f64, big_xi as f64))
}

/// Closed-form certificate for one-hot blockmodel features. Three or more
/// communities need `n_K > 16K/(16K + 1) · n/K`.
pub fn blockmodel_constants(sizes: &[usize], gamma: f64) -> Result<SscSssCertificate> {
    let (xi, big_xi) = blockmodel_extremes(sizes, gamma)?;
    let k = sizes.len();
    if k >= 3 {
        let n: usize = sizes.iter().sum();
        let kf = k as f64;
        let required = 16.0 * kf / (16.0 * kf + 1.0) * n as f64 / kf;
        let smallest = *sizes.iter().min().unwrap();
        if smallest as f64 <= required {
            return Err(Error::SizeConditionViolated { smallest, required });
        }
    }
    Ok(SscSssCertificate::build(gamma, xi, big_xi, CertificateMethod::BlockmodelClosedForm))
}

/// Largest `|S|` certified by [`blockmodel_constants`] at `γ = |S|/n`, or 0.
pub fn certified_deviator_bound(sizes: &[usize]) -> Result<usize> {
    let n: usize = sizes.iter().sum();
    let mut best = 0;
    for k in 1..n {
        if blockmodel_constants(sizes, k as f64 / n as f64)?.certified {
            best = k;
        } else {
            break;
        }
    }
    Ok(best)
}
