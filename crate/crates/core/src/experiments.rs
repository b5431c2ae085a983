//! Scenario configuration and batch experiments with CSV output.
//!
//! Every trial draws from its own `ChaCha8Rng` seeded with
//! `scenario.seed + trial`, so any single trial can be replayed on its own.

use std::fmt::Write as _;

use nalgebra::DVector;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, Normal};

use crate::detection::{detect_manipulation, Verdict};
use crate::error::{Error, Result};
use crate::fj::{
    disagreement, polarization, raw_total_cost, OpinionProfile, ResponseMatrix,
    SusceptibilityProfile, DEGENERATE_COST,
};
use crate::graph::{eigenvector_centrality, WeightedGraph, CENTRALITY_MAX_ITER, CENTRALITY_TOL};
use crate::recovery::{
    balanced_accuracy, recover_deviators, relative_recovery_error, EmbeddingMatrix, TorrentVariant,
};
use crate::strategic::{solve_strategic, StrategicOutcome, StrategicSet, Uniqueness};

/// Largest admissible first-order residual in emitted rows.
pub const GRADIENT_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum OpinionSource {
    Gaussian { mean: f64, sd: f64 },
    /// `+1` with probability `p`, else `−1`.
    Rademacher { p: f64 },
    /// `s = Xv` with the scenario embedding.
    FromEmbedding { weights: Vec<f64> },
    Fixed(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SetSpec {
    Explicit(StrategicSet),
    TopCentralityFraction(f64),
    RandomFraction(f64),
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub graph: WeightedGraph,
    pub opinions: OpinionSource,
    pub alpha: SusceptibilityProfile,
    pub set: SetSpec,
    pub embedding: Option<EmbeddingMatrix>,
    pub variant: TorrentVariant,
    pub seed: u64,
}

fn check_fraction(p: f64) -> Result<()> {
    if p > 0.0 && p <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("fraction {p} not in (0, 1]")))
    }
}

fn set_size(p: f64, n: usize) -> usize {
    ((p * n as f64 - 1e-9).ceil() as usize).clamp(1, n)
}

/// The `⌈pn⌉` most central nodes, ties to the lower index.
pub fn select_top_centrality(graph: &WeightedGraph, p: f64) -> Result<StrategicSet> {
    check_fraction(p)?;
    let n = graph.n();
    let k = set_size(p, n);
    if k == n {
        return Ok(StrategicSet::all(n));
    }
    let pi = eigenvector_centrality(graph, CENTRALITY_TOL, CENTRALITY_MAX_ITER)?;
    // Power-iteration noise must not decide ties.
    let key: Vec<i64> = pi.iter().map(|c| (c * 1e9).round() as i64).collect();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| key[b].cmp(&key[a]).then(a.cmp(&b)));
    idx.truncate(k);
    StrategicSet::new(idx, n)
}

/// `⌈pn⌉` nodes drawn uniformly without replacement.
pub fn select_random_fraction(n: usize, p: f64, rng: &mut ChaCha8Rng) -> Result<StrategicSet> {
    check_fraction(p)?;
    StrategicSet::new(sample(rng, n, set_size(p, n)).into_vec(), n)
}

impl Scenario {
    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn rng(&self, trial: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed.wrapping_add(trial))
    }

    pub fn draw_opinions(&self, rng: &mut ChaCha8Rng) -> Result<OpinionProfile> {
        let n = self.n();
        let values = match &self.opinions {
            OpinionSource::Gaussian { mean, sd } => {
                let dist = Normal::new(*mean, *sd)
                    .map_err(|e| Error::InvalidParameter(format!("gaussian opinions: {e}")))?;
                (0..n).map(|_| dist.sample(rng)).collect()
            }
            OpinionSource::Rademacher { p } => {
                let dist = Bernoulli::new(*p)
                    .map_err(|e| Error::InvalidParameter(format!("rademacher opinions: {e}")))?;
                (0..n).map(|_| if dist.sample(rng) { 1.0 } else { -1.0 }).collect()
            }
            OpinionSource::FromEmbedding { weights } => {
                let x = self.embedding.as_ref().ok_or_else(|| {
                    Error::InvalidParameter("opinions from embedding need an embedding".into())
                })?;
                crate::error::check_len(x.d(), weights.len())?;
                (x.matrix() * DVector::from_column_slice(weights)).iter().copied().collect()
            }
            OpinionSource::Fixed(v) => v.clone(),
        };
        crate::error::check_len(n, values.len())?;
        OpinionProfile::intrinsic(values)
    }

    pub fn draw_set(&self, rng: &mut ChaCha8Rng) -> Result<StrategicSet> {
        match &self.set {
            SetSpec::Explicit(s) => {
                StrategicSet::new(s.members().to_vec(), self.n())
            }
            SetSpec::TopCentralityFraction(p) => select_top_centrality(&self.graph, *p),
            SetSpec::RandomFraction(p) => select_random_fraction(self.n(), *p, rng),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub frac: Option<f64>,
    pub alpha: Option<f64>,
    /// `None` when the truthful baseline is degenerate.
    pub pol_ratio: Option<f64>,
    pub dis_ratio: Option<f64>,
    pub pom: Option<f64>,
    pub set_size: usize,
    pub max_gradient: f64,
    pub uniqueness: Uniqueness,
}

impl SweepRow {
    pub fn is_degenerate(&self) -> bool {
        self.pol_ratio.is_none() || self.dis_ratio.is_none() || self.pom.is_none()
    }
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den >= DEGENERATE_COST).then(|| num / den)
}

fn sweep_row(
    graph: &WeightedGraph,
    alpha: &SusceptibilityProfile,
    s: &OpinionProfile,
    set: &StrategicSet,
    frac: Option<f64>,
) -> Result<SweepRow> {
    let response = ResponseMatrix::new(graph, alpha)?;
    let z = response.apply(s)?;
    let out: StrategicOutcome = solve_strategic(graph, &response, s, set)?;
    if out.max_gradient > GRADIENT_LIMIT {
        return Err(Error::UnverifiedEquilibrium {
            max_gradient: out.max_gradient,
        });
    }
    let zp = out.z_prime.values();
    let a = alpha.alpha();
    Ok(SweepRow {
        frac,
        alpha: alpha.shared_value(),
        pol_ratio: ratio(polarization(zp), polarization(&z)),
        dis_ratio: ratio(disagreement(zp, graph), disagreement(&z, graph)),
        pom: ratio(raw_total_cost(zp, s, graph, a), raw_total_cost(&z, s, graph, a)),
        set_size: set.len(),
        max_gradient: out.max_gradient,
        uniqueness: out.uniqueness,
    })
}

/// One row per shared susceptibility in `alphas`, on the trial-0 opinions
/// and strategic set of `scenario`.
pub fn sweep_alpha(scenario: &Scenario, alphas: &[f64]) -> Result<Vec<SweepRow>> {
    let mut rng = scenario.rng(0);
    let s = scenario.draw_opinions(&mut rng)?;
    let set = scenario.draw_set(&mut rng)?;
    alphas
        .iter()
        .map(|&a| {
            let alpha = SusceptibilityProfile::shared(scenario.n(), a)?;
            sweep_row(&scenario.graph, &alpha, &s, &set, None)
        })
        .collect()
}

/// One row per fraction `p`, with the top `⌈pn⌉` central nodes strategic.
pub fn sweep_strategic_fraction(scenario: &Scenario, fractions: &[f64]) -> Result<Vec<SweepRow>> {
    let mut rng = scenario.rng(0);
    let s = scenario.draw_opinions(&mut rng)?;
    fractions
        .iter()
        .map(|&p| {
            let set = select_top_centrality(&scenario.graph, p)?;
            sweep_row(&scenario.graph, &scenario.alpha, &s, &set, Some(p))
        })
        .collect()
}

fn cell(v: Option<f64>) -> String {
    match v {
        Some(x) => x.to_string(),
        None => "DEGENERATE".into(),
    }
}

fn alpha_cell(v: Option<f64>) -> String {
    v.map_or_else(|| "HETERO".into(), |x| x.to_string())
}

pub fn sweep_alpha_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("alpha,pol_ratio,dis_ratio,pom\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{}",
            alpha_cell(r.alpha),
            cell(r.pol_ratio),
            cell(r.dis_ratio),
            cell(r.pom)
        )
        .unwrap();
    }
    out
}

pub fn sweep_fraction_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("frac,alpha,pol_ratio,dis_ratio,pom\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.frac.map_or_else(String::new, |f| f.to_string()),
            alpha_cell(r.alpha),
            cell(r.pol_ratio),
            cell(r.dis_ratio),
            cell(r.pom)
        )
        .unwrap();
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRow {
    pub trial: u64,
    pub set_size: usize,
    pub p_value: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionReport {
    pub rows: Vec<DetectionRow>,
    /// Share of `|S| = 0` trials flagged, if any ran.
    pub type_i_rate: Option<f64>,
    /// Share of `|S| > 0` trials not flagged, if any ran.
    pub type_ii_rate: Option<f64>,
}

/// Per trial: Gaussian `s`, strategic equilibrium on the scenario set, then
/// `shift·σ` added to each strategic report before the platform observes
/// `z′`. Detection uses the exact graph and the generating mean as `μ0`.
pub fn detection_experiment(
    scenario: &Scenario,
    n_trials: u64,
    shift: f64,
    significance: f64,
) -> Result<DetectionReport> {
    let OpinionSource::Gaussian { mean, sd } = scenario.opinions else {
        return Err(Error::InvalidParameter(
            "detection experiment needs Gaussian opinions".into(),
        ));
    };
    let g = &scenario.graph;
    let response = ResponseMatrix::new(g, &scenario.alpha)?;
    let mut rows = Vec::with_capacity(n_trials as usize);
    for trial in 0..n_trials {
        let mut rng = scenario.rng(trial);
        let s = scenario.draw_opinions(&mut rng)?;
        let set = scenario.draw_set(&mut rng)?;
        let out = solve_strategic(g, &response, &s, &set)?;
        if out.max_gradient > GRADIENT_LIMIT {
            return Err(Error::UnverifiedEquilibrium {
                max_gradient: out.max_gradient,
            });
        }
        let mut reported = out.s_prime.into_values();
        for &i in set.members() {
            reported[i] += shift * sd;
        }
        let z_prime = response.apply(&reported)?;
        let d = detect_manipulation(g, &scenario.alpha, &z_prime, mean, significance)?;
        rows.push(DetectionRow {
            trial,
            set_size: set.len(),
            p_value: d.p_value,
            verdict: d.verdict,
        });
    }
    let rate = |null: bool| {
        let group: Vec<&DetectionRow> = rows.iter().filter(|r| (r.set_size == 0) == null).collect();
        let wrong = group
            .iter()
            .filter(|r| (r.verdict == Verdict::Manipulation) == null)
            .count();
        (!group.is_empty()).then(|| wrong as f64 / group.len() as f64)
    };
    Ok(DetectionReport {
        type_i_rate: rate(true),
        type_ii_rate: rate(false),
        rows,
    })
}

pub fn detection_csv(report: &DetectionReport) -> String {
    let mut out = String::from("trial,set_size,p_value,verdict\n");
    for r in &report.rows {
        let v = match r.verdict {
            Verdict::Manipulation => "manipulation",
            Verdict::NoManipulation => "none",
        };
        writeln!(out, "{},{},{},{}", r.trial, r.set_size, r.p_value, v).unwrap();
    }
    let fmt = |v: Option<f64>| v.map_or_else(|| "NA".into(), |x| x.to_string());
    writeln!(
        out,
        "# type_i_rate={} type_ii_rate={}",
        fmt(report.type_i_rate),
        fmt(report.type_ii_rate)
    )
    .unwrap();
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryRow {
    pub frac: f64,
    pub trial: u64,
    pub recovery_error: f64,
    pub balanced_accuracy: f64,
    /// Entries left out of the relative error because `|s_i| < 1e−12`.
    pub excluded: usize,
    pub exact: bool,
}

/// Per fraction and trial: uniformly random `S` of size `⌈pn⌉` (`p = 0`
/// is the truthful control), strategic equilibrium, then deviator recovery
/// with `k = |S|` (at least 1).
pub fn recovery_experiment(
    scenario: &Scenario,
    fractions: &[f64],
    n_trials: u64,
) -> Result<Vec<RecoveryRow>> {
    let embedding = scenario
        .embedding
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("recovery experiment needs an embedding".into()))?;
    let g = &scenario.graph;
    let n = g.n();
    let response = ResponseMatrix::new(g, &scenario.alpha)?;
    let mut rows = Vec::new();
    for &frac in fractions {
        if frac != 0.0 {
            check_fraction(frac)?;
        }
        for trial in 0..n_trials {
            let mut rng = scenario.rng(trial);
            let s = scenario.draw_opinions(&mut rng)?;
            let set = if frac == 0.0 {
                StrategicSet::default()
            } else {
                select_random_fraction(n, frac, &mut rng)?
            };
            let out = solve_strategic(g, &response, &s, &set)?;
            if out.max_gradient > GRADIENT_LIMIT {
                return Err(Error::UnverifiedEquilibrium {
                    max_gradient: out.max_gradient,
                });
            }
            let k = set.len().max(1);
            let rec = recover_deviators(
                embedding,
                g,
                &scenario.alpha,
                &out.z_prime,
                k,
                scenario.variant,
            )?;
            let (recovery_error, excluded) = relative_recovery_error(&rec.s_hat, &s);
            rows.push(RecoveryRow {
                frac,
                trial,
                recovery_error,
                balanced_accuracy: balanced_accuracy(&set, &rec.strategic_set, n),
                excluded,
                exact: rec.strategic_set == set,
            });
        }
    }
    Ok(rows)
}

pub fn recovery_csv(rows: &[RecoveryRow]) -> String {
    let mut out = String::from("frac,trial,recovery_error,balanced_accuracy\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{}",
            r.frac, r.trial, r.recovery_error, r.balanced_accuracy
        )
        .unwrap();
    }
    let excluded: usize = rows.iter().map(|r| r.excluded).sum();
    writeln!(out, "# excluded_near_zero={excluded}").unwrap();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_blockmodel, generate_gnp};
    use approx::assert_abs_diff_eq;

    fn k2_scenario(s: Vec<f64>) -> Scenario {
        Scenario {
            graph: WeightedGraph::new(2, [(0, 1, 1.0)]).unwrap(),
            opinions: OpinionSource::Fixed(s),
            alpha: SusceptibilityProfile::shared(2, 0.5).unwrap(),
            set: SetSpec::TopCentralityFraction(1.0),
            embedding: None,
            variant: TorrentVariant::FullyCorrective,
            seed: 0,
        }
    }

    #[test]
    fn top_centrality_examples() {
        let star = WeightedGraph::new(5, (1..5).map(|j| (0, j, 1.0))).unwrap();
        assert_eq!(select_top_centrality(&star, 0.2).unwrap().members(), &[0]);
        let k2 = WeightedGraph::new(2, [(0, 1, 1.0)]).unwrap();
        assert_eq!(select_top_centrality(&k2, 0.5).unwrap().members(), &[0]);
        assert_eq!(select_top_centrality(&star, 1.0).unwrap().len(), 5);
        assert_eq!(select_top_centrality(&star, 0.01).unwrap().len(), 1);
        assert!(select_top_centrality(&star, 0.0).is_err());
    }

    #[test]
    fn k2_sweep_row() {
        let rows = sweep_alpha(&k2_scenario(vec![1.0, 0.0]), &[0.5]).unwrap();
        // Nash point s′ = (5/4, −1/4), z′ = (3/4, 1/4) against truthful z = (2/3, 1/3).
        assert_abs_diff_eq!(rows[0].pom.unwrap(), 45.0 / 32.0, epsilon = 1e-10);
        assert_abs_diff_eq!(rows[0].pol_ratio.unwrap(), 9.0 / 4.0, epsilon = 1e-10);
        assert_abs_diff_eq!(rows[0].dis_ratio.unwrap(), 9.0 / 4.0, epsilon = 1e-10);
        assert!(rows[0].max_gradient <= GRADIENT_LIMIT);
        let csv = sweep_alpha_csv(&rows);
        assert!(csv.starts_with("alpha,pol_ratio,dis_ratio,pom\n0.5,"));
    }

    #[test]
    fn consensus_rows_are_degenerate() {
        let rows = sweep_alpha(&k2_scenario(vec![0.3, 0.3]), &[0.2, 0.7]).unwrap();
        assert!(rows.iter().all(SweepRow::is_degenerate));
        assert!(sweep_alpha_csv(&rows).lines().skip(1).all(|l| l.ends_with("DEGENERATE,DEGENERATE,DEGENERATE")));
    }

    #[test]
    fn full_fraction_matches_alpha_sweep() {
        let (g, _) = generate_blockmodel(&[8, 6], 0.6, 0.1, 4).unwrap();
        let sc = Scenario {
            graph: g,
            opinions: OpinionSource::Gaussian { mean: 0.0, sd: 1.0 },
            alpha: SusceptibilityProfile::shared(14, 0.4).unwrap(),
            set: SetSpec::TopCentralityFraction(1.0),
            embedding: None,
            variant: TorrentVariant::FullyCorrective,
            seed: 9,
        };
        let a = sweep_alpha(&sc, &[0.4]).unwrap();
        let f = sweep_strategic_fraction(&sc, &[1.0, 0.05]).unwrap();
        assert_eq!(a[0].pom, f[0].pom);
        assert_eq!(f[1].set_size, 1);
        assert_eq!(sweep_fraction_csv(&f), sweep_fraction_csv(&sweep_strategic_fraction(&sc, &[1.0, 0.05]).unwrap()));
    }

    #[test]
    fn detection_level_one_always_flags() {
        let g = generate_gnp(30, 0.2, 1).unwrap();
        let sc = Scenario {
            graph: g,
            opinions: OpinionSource::Gaussian { mean: 1.0, sd: 2.0 },
            alpha: SusceptibilityProfile::shared(30, 0.5).unwrap(),
            set: SetSpec::Explicit(StrategicSet::default()),
            embedding: None,
            variant: TorrentVariant::FullyCorrective,
            seed: 3,
        };
        let rep = detection_experiment(&sc, 10, 5.0, 1.0).unwrap();
        assert!(rep.rows.iter().all(|r| r.verdict == Verdict::Manipulation));
        assert_eq!(rep.type_i_rate, Some(1.0));
        assert_eq!(rep.type_ii_rate, None);
        assert!(detection_csv(&rep).ends_with("# type_i_rate=1 type_ii_rate=NA\n"));
    }

    #[test]
    fn recovery_control_and_certified() {
        let (g, comm) = generate_blockmodel(&[50, 50], 0.3, 0.02, 8).unwrap();
        let sc = Scenario {
            graph: g,
            opinions: OpinionSource::FromEmbedding { weights: vec![1.0, -1.0] },
            alpha: SusceptibilityProfile::shared(100, 0.5).unwrap(),
            set: SetSpec::RandomFraction(0.02),
            embedding: Some(EmbeddingMatrix::one_hot(&comm)),
            variant: TorrentVariant::FullyCorrective,
            seed: 21,
        };
        let rows = recovery_experiment(&sc, &[0.0, 0.02], 3).unwrap();
        for r in &rows[..3] {
            assert!(r.recovery_error <= 1e-8);
        }
        for r in &rows[3..] {
            assert!(r.exact);
            assert_eq!(r.balanced_accuracy, 1.0);
        }
        assert!(recovery_csv(&rows).starts_with("frac,trial,recovery_error,balanced_accuracy\n0,0,"));
    }
}
