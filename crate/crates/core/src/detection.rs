//! Platform-side manipulation detection.
//!
//! The platform inverts the equilibrium map on the observed expressed
//! opinions, `ŝ′ = Â⁻¹((I − Â)L̂ + Â) z′`, and tests the reconstructed
//! reports against a reference mean with a one-sample t-test. A χ² sign
//! test covers populations whose opinions are ±1.

use crate::error::{check_len, Error, Result};
use crate::fj::{OpinionProfile, OpinionRole, SusceptibilityProfile};
use crate::graph::WeightedGraph;
use crate::stats::{chi_square_sf, student_t_two_sided};

/// `ŝ′ = Â⁻¹((I − Â)L̂ + Â) z′ = z′ + L̂z′ / α̃`.
pub fn reconstruct_intrinsic(
    graph: &WeightedGraph,
    alpha: &SusceptibilityProfile,
    z_prime: &[f64],
) -> Result<OpinionProfile> {
    let n = graph.n();
    check_len(n, alpha.len())?;
    check_len(n, z_prime.len())?;
    let lz = graph.laplacian_apply(z_prime);
    let values = z_prime
        .iter()
        .zip(&lz)
        .zip(alpha.alpha_tilde())
        .map(|((z, l), at)| z + l / at)
        .collect();
    Ok(OpinionProfile::trusted(OpinionRole::IntrinsicReported, values))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Degeneracy {
    /// Sample is constant but away from the reference mean: `p = 0`.
    ZeroVariance,
    /// Sample is constant and equal to the reference mean: `p = 1`.
    DegenerateSample,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    pub t_statistic: f64,
    pub p_value: f64,
    pub dof: usize,
    pub degeneracy: Option<Degeneracy>,
}

/// Two-sided one-sample t-test of `mean(data) = mu0`.
pub fn t_test_one_sample(data: &[f64], mu0: f64) -> Result<TTest> {
    let n = data.len();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let mean = data.iter().sum::<f64>() / n as f64;
    let var = data.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    let dof = n - 1;
    let scale = 1.0_f64.max(mean.abs()).max(mu0.abs());
    if sd <= 1e-12 * scale {
        let gap = mean - mu0;
        let (t_statistic, p_value, degeneracy) = if gap.abs() <= 1e-12 * scale {
            (0.0, 1.0, Degeneracy::DegenerateSample)
        } else {
            (f64::INFINITY.copysign(gap), 0.0, Degeneracy::ZeroVariance)
        };
        return Ok(TTest {
            t_statistic,
            p_value,
            dof,
            degeneracy: Some(degeneracy),
        });
    }
    let t_statistic = (mean - mu0) / (sd / (n as f64).sqrt());
    Ok(TTest {
        t_statistic,
        p_value: student_t_two_sided(t_statistic, dof as f64),
        dof,
        degeneracy: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Manipulation,
    NoManipulation,
}

#[derive(Debug, Clone)]
pub struct DetectionOutcome {
    pub verdict: Verdict,
    pub t_statistic: f64,
    pub p_value: f64,
    pub dof: usize,
    pub reconstructed: OpinionProfile,
    pub significance: f64,
    pub degeneracy: Option<Degeneracy>,
}

pub const DEFAULT_SIGNIFICANCE: f64 = 0.05;

/// Reconstructs the reported intrinsic opinions and flags manipulation when
/// the t-test rejects at `significance`.
pub fn detect_manipulation(
    graph: &WeightedGraph,
    alpha: &SusceptibilityProfile,
    z_prime: &[f64],
    mu0: f64,
    significance: f64,
) -> Result<DetectionOutcome> {
    if !(significance > 0.0 && significance <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "significance {significance} not in (0, 1]"
        )));
    }
    let reconstructed = reconstruct_intrinsic(graph, alpha, z_prime)?;
    let test = t_test_one_sample(&reconstructed, mu0)?;
    let verdict = if test.p_value < significance {
        Verdict::Manipulation
    } else {
        Verdict::NoManipulation
    };
    Ok(DetectionOutcome {
        verdict,
        t_statistic: test.t_statistic,
        p_value: test.p_value,
        dof: test.dof,
        reconstructed,
        significance,
        degeneracy: test.degeneracy,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareTest {
    pub chi2: f64,
    pub p_value: f64,
    pub positives: usize,
    pub negatives: usize,
}

/// Goodness-of-fit of the sign counts against `P(+1) = p0`, one degree of
/// freedom. Zero counts as positive.
pub fn chi_square_sign_test(data: &[f64], p0: f64) -> Result<ChiSquareTest> {
    if data.is_empty() {
        return Err(Error::EmptySample);
    }
    let positives = data.iter().filter(|&&x| x >= 0.0).count();
    chi_square_from_counts(positives, data.len() - positives, p0)
}

pub fn chi_square_from_counts(positives: usize, negatives: usize, p0: f64) -> Result<ChiSquareTest> {
    if !(p0 > 0.0 && p0 < 1.0) {
        return Err(Error::InvalidParameter(format!("p0 = {p0} not in (0, 1)")));
    }
    let n = (positives + negatives) as f64;
    if n == 0.0 {
        return Err(Error::EmptySample);
    }
    let expect_pos = n * p0;
    let expect_neg = n * (1.0 - p0);
    let chi2 = (positives as f64 - expect_pos).powi(2) / expect_pos
        + (negatives as f64 - expect_neg).powi(2) / expect_neg;
    Ok(ChiSquareTest {
        chi2,
        p_value: chi_square_sf(chi2, 1.0),
        positives,
        negatives,
    })
}
