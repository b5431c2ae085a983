//! The misreporting meta-game: strategic agents pick reported intrinsic
//! opinions `s′_i` to minimize their own cost at the resulting FJ
//! equilibrium `z′ = B s′`, charged against their truthful `s_i`.
//!
//! Each agent's first-order condition is linear in `s′`:
//! `e_iᵀ 𝕋_i s′ = α_i B_ii s_i` with
//! `𝕋_i = (1−α_i) BᵀL_iB + α_i Bᵀe_ie_iᵀB`, so the equilibrium solves an
//! `|S| × |S|` system once the honest entries are moved to the right side.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::fj::{raw_agent_cost, OpinionProfile, OpinionRole, ResponseMatrix};
use crate::graph::WeightedGraph;

/// Sorted, duplicate-free set of strategic agents.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StrategicSet {
    members: Vec<usize>,
}

impl StrategicSet {
    pub fn new(mut members: Vec<usize>, n: usize) -> Result<Self> {
        members.sort_unstable();
        if let Some(w) = members.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter(format!(
                "node {} listed twice in strategic set",
                w[0]
            )));
        }
        if let Some(&bad) = members.iter().find(|&&i| i >= n) {
            return Err(Error::InvalidParameter(format!(
                "strategic node {bad} out of range for {n} nodes"
            )));
        }
        Ok(Self { members })
    }

    pub fn all(n: usize) -> Self {
        Self {
            members: (0..n).collect(),
        }
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.members.binary_search(&i).is_ok()
    }

    /// Indicator vector over `n` nodes.
    pub fn mask(&self, n: usize) -> Vec<bool> {
        let mut m = vec![false; n];
        for &i in &self.members {
            m[i] = true;
        }
        m
    }
}

/// Row `e_iᵀ𝕋_i` of agent `i`'s first-order condition, built from `B` in
/// `O(deg(i)·n)`.
fn condition_row(i: usize, graph: &WeightedGraph, response: &ResponseMatrix) -> Vec<f64> {
    let b = response.matrix();
    let alpha = response.alpha().alpha()[i];
    let n = b.ncols();
    let bii = b[(i, i)];
    let mut row: Vec<f64> = (0..n).map(|k| alpha * bii * b[(i, k)]).collect();
    for &(j, w) in graph.neighbors(i) {
        let coeff = (1.0 - alpha) * w * (bii - b[(j, i)]);
        for (k, r) in row.iter_mut().enumerate() {
            *r += coeff * (b[(i, k)] - b[(j, k)]);
        }
    }
    row
}

/// Corollary-style reduced system `T̃ x = ỹ` over the strategic agents.
#[derive(Debug, Clone)]
pub struct NashSystem {
    /// `|S| × |S|` coefficient block (columns of `T` restricted to `S`).
    pub t_tilde: DMatrix<f64>,
    pub y_tilde: DVector<f64>,
    /// `row_index[r]` is the agent whose condition is row `r`.
    pub row_index: Vec<usize>,
}

pub fn build_system(
    graph: &WeightedGraph,
    response: &ResponseMatrix,
    s: &[f64],
    set: &StrategicSet,
) -> Result<NashSystem> {
    let n = graph.n();
    check_len(n, response.n())?;
    check_len(n, s.len())?;
    if set.is_empty() {
        return Err(Error::InvalidParameter("strategic set is empty".into()));
    }
    let m = set.len();
    let mask = set.mask(n);
    let alpha = response.alpha().alpha();
    let b = response.matrix();
    let mut t_tilde = DMatrix::zeros(m, m);
    let mut y_tilde = DVector::zeros(m);
    for (r, &i) in set.members().iter().enumerate() {
        let row = condition_row(i, graph, response);
        let mut y = alpha[i] * b[(i, i)] * s[i];
        for (j, &coef) in row.iter().enumerate() {
            if !mask[j] {
                y -= coef * s[j];
            }
        }
        for (c, &j) in set.members().iter().enumerate() {
            t_tilde[(r, c)] = row[j];
        }
        y_tilde[r] = y;
    }
    Ok(NashSystem {
        t_tilde,
        y_tilde,
        row_index: set.members().to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Uniqueness {
    Unique,
    /// `T̃` numerically singular; the minimum-norm consistent solution is
    /// returned.
    NonUnique,
}

pub const CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Clone)]
pub struct StrategicOutcome {
    pub s_prime: OpinionProfile,
    pub z_prime: OpinionProfile,
    /// `‖T̃x − ỹ‖₂` at the returned point.
    pub residual: f64,
    /// `max_{i∈S} |∂c_i/∂s′_i|` at the returned point.
    pub max_gradient: f64,
    pub uniqueness: Uniqueness,
    pub condition: f64,
}

fn assemble(s: &[f64], set: &StrategicSet, x: &[f64]) -> Vec<f64> {
    let mut out = s.to_vec();
    for (&i, &v) in set.members().iter().zip(x) {
        out[i] = v;
    }
    out
}

fn system_residual(system: &NashSystem, s_prime: &[f64]) -> f64 {
    let x = DVector::from_iterator(
        system.row_index.len(),
        system.row_index.iter().map(|&i| s_prime[i]),
    );
    (&system.t_tilde * x - &system.y_tilde).norm()
}

/// Solves the equilibrium system. An empty strategic set returns the
/// truthful outcome.
pub fn solve_nash(
    system: Option<&NashSystem>,
    graph: &WeightedGraph,
    response: &ResponseMatrix,
    s: &[f64],
    set: &StrategicSet,
) -> Result<StrategicOutcome> {
    check_len(graph.n(), s.len())?;
    let Some(system) = system.filter(|_| !set.is_empty()) else {
        let z = response.apply(s)?;
        return Ok(StrategicOutcome {
            s_prime: OpinionProfile::trusted(OpinionRole::IntrinsicReported, s.to_vec()),
            z_prime: OpinionProfile::trusted(OpinionRole::Expressed, z),
            residual: 0.0,
            max_gradient: 0.0,
            uniqueness: Uniqueness::Unique,
            condition: 1.0,
        });
    };
    if system.row_index != set.members() {
        return Err(Error::InvalidParameter(
            "system was built for a different strategic set".into(),
        ));
    }
    let svd = system.t_tilde.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };

    let (x, uniqueness) = if condition < CONDITION_LIMIT {
        let x = system
            .t_tilde
            .clone()
            .lu()
            .solve(&system.y_tilde)
            .ok_or(Error::SingularSystem)?;
        (x, Uniqueness::Unique)
    } else {
        let eps = smax * 1e-12;
        let x = svd
            .solve(&system.y_tilde, eps)
            .map_err(|_| Error::SingularSystem)?;
        (x, Uniqueness::NonUnique)
    };
    let residual = (&system.t_tilde * &x - &system.y_tilde).norm();
    if residual > 1e-6 * system.y_tilde.norm().max(f64::MIN_POSITIVE) && residual > 1e-12 {
        return Err(Error::NoNashEquilibrium { residual });
    }
    let s_prime = assemble(s, set, x.as_slice());
    let z_prime = response.apply(&s_prime)?;
    let mut outcome = StrategicOutcome {
        s_prime: OpinionProfile::trusted(OpinionRole::IntrinsicReported, s_prime),
        z_prime: OpinionProfile::trusted(OpinionRole::Expressed, z_prime),
        residual,
        max_gradient: 0.0,
        uniqueness,
        condition,
    };
    outcome.max_gradient = verify_nash(&outcome, graph, response, s, set)?;
    Ok(outcome)
}

/// Builds and solves the system in one call.
pub fn solve_strategic(
    graph: &WeightedGraph,
    response: &ResponseMatrix,
    s: &[f64],
    set: &StrategicSet,
) -> Result<StrategicOutcome> {
    if set.is_empty() {
        return solve_nash(None, graph, response, s, set);
    }
    let system = build_system(graph, response, s, set)?;
    solve_nash(Some(&system), graph, response, s, set)
}

/// The all-deviate candidate `s′ = (1/α̃)B⁻¹ diag(B) s`,
/// `z′ = (1/α̃) diag(B) s` for a shared susceptibility. Diagnostics
/// (`residual`, `max_gradient`) are measured against the true first-order
/// conditions.
pub fn closed_form_all_deviate(
    graph: &WeightedGraph,
    response: &ResponseMatrix,
    s: &[f64],
) -> Result<StrategicOutcome> {
    let n = graph.n();
    check_len(n, s.len())?;
    let alpha = response
        .alpha()
        .shared_value()
        .ok_or(Error::SharedAlphaRequired)?;
    let at = alpha / (1.0 - alpha);
    let b = response.matrix();
    let z_prime: Vec<f64> = (0..n).map(|i| b[(i, i)] * s[i] / at).collect();
    let s_prime = response.apply_inverse(&z_prime)?;
    let set = StrategicSet::all(n);
    let system = build_system(graph, response, s, &set)?;
    let mut outcome = StrategicOutcome {
        residual: system_residual(&system, &s_prime),
        s_prime: OpinionProfile::trusted(OpinionRole::IntrinsicReported, s_prime),
        z_prime: OpinionProfile::trusted(OpinionRole::Expressed, z_prime),
        max_gradient: 0.0,
        uniqueness: Uniqueness::Unique,
        condition: f64::NAN,
    };
    outcome.max_gradient = verify_nash(&outcome, graph, response, s, &set)?;
    Ok(outcome)
}

/// `∂c_i/∂s′_i` at `z′ = Bs′`:
/// `2[(1−α_i) Σ_j w_ij (z′_i − z′_j)(B_ii − B_ji) + α_i B_ii (z′_i − s_i)]`.
fn analytic_gradient(
    i: usize,
    z_prime: &[f64],
    s: &[f64],
    graph: &WeightedGraph,
    response: &ResponseMatrix,
) -> f64 {
    let b = response.matrix();
    let alpha = response.alpha().alpha()[i];
    let social: f64 = graph
        .neighbors(i)
        .iter()
        .map(|&(j, w)| w * (z_prime[i] - z_prime[j]) * (b[(i, i)] - b[(j, i)]))
        .sum();
    2.0 * ((1.0 - alpha) * social + alpha * b[(i, i)] * (z_prime[i] - s[i]))
}

pub const FD_STEP: f64 = 1e-6;
pub const FD_AGREEMENT: f64 = 1e-4;

/// Largest first-order violation over the strategic agents. Each analytic
/// derivative is cross-checked against a central finite difference of the
/// agent's cost; disagreement is reported as [`Error::GradientMismatch`].
pub fn verify_nash(
    outcome: &StrategicOutcome,
    graph: &WeightedGraph,
    response: &ResponseMatrix,
    s: &[f64],
    set: &StrategicSet,
) -> Result<f64> {
    let n = graph.n();
    check_len(n, s.len())?;
    check_len(n, outcome.s_prime.len())?;
    let z = response.apply(&outcome.s_prime)?;
    let alpha = response.alpha().alpha();
    let b = response.matrix();
    let mut worst: f64 = 0.0;
    let mut plus = z.clone();
    let mut minus = z.clone();
    for &i in set.members() {
        let analytic = analytic_gradient(i, &z, s, graph, response);
        // z′(s′ ± h e_i) = z′ ± h B e_i
        for k in 0..n {
            plus[k] = z[k] + FD_STEP * b[(k, i)];
            minus[k] = z[k] - FD_STEP * b[(k, i)];
        }
        let numeric = (raw_agent_cost(i, &plus, s, graph, alpha)
            - raw_agent_cost(i, &minus, s, graph, alpha))
            / (2.0 * FD_STEP);
        if (analytic - numeric).abs() > FD_AGREEMENT * analytic.abs().max(1.0) {
            return Err(Error::GradientMismatch {
                agent: i,
                analytic,
                numeric,
            });
        }
        worst = worst.max(analytic.abs());
    }
    Ok(worst)
}

/// Agent `i`'s best reply given everyone else's reports: the root of its
/// first-order condition, which is linear in `s′_i`.
pub fn best_response(
    i: usize,
    s_prime: &[f64],
    graph: &WeightedGraph,
    response: &ResponseMatrix,
    s: &[f64],
) -> Result<f64> {
    let n = graph.n();
    check_len(n, s.len())?;
    check_len(n, s_prime.len())?;
    if i >= n {
        return Err(Error::InvalidParameter(format!("agent {i} out of range")));
    }
    let row = condition_row(i, graph, response);
    let coefficient = row[i];
    if coefficient.abs() < 1e-12 {
        return Err(Error::DegenerateCoefficient { agent: i });
    }
    let alpha = response.alpha().alpha()[i];
    let rest: f64 = row
        .iter()
        .zip(s_prime)
        .enumerate()
        .filter(|&(k, _)| k != i)
        .map(|(_, (r, x))| r * x)
        .sum();
    Ok((alpha * response.matrix()[(i, i)] * s[i] - rest) / coefficient)
}

/// Round-robin best responses over `S` in ascending order, starting from
/// the truthful reports. Returns the reports and the number of sweeps.
pub fn iterate_best_responses(
    graph: &WeightedGraph,
    response: &ResponseMatrix,
    s: &[f64],
    set: &StrategicSet,
    tol: f64,
    max_sweeps: usize,
) -> Result<(Vec<f64>, usize)> {
    let mut current = s.to_vec();
    for sweep in 1..=max_sweeps {
        let mut change: f64 = 0.0;
        for &i in set.members() {
            let next = best_response(i, &current, graph, response, s)?;
            change = change.max((next - current[i]).abs());
            current[i] = next;
        }
        if change <= tol {
            return Ok((current, sweep));
        }
    }
    Err(Error::NoConvergence {
        iterations: max_sweeps,
    })
}
