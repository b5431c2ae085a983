//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero if any fail.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use misreport::experiments::{
    detection_csv, recovery_csv, sweep_alpha_csv, sweep_fraction_csv, OpinionSource, Scenario,
    SetSpec,
};
use misreport::recovery::{blockmodel_extremes, TORRENT_TOL};
use misreport::*;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn random_graph(rng: &mut ChaCha8Rng, n: usize) -> WeightedGraph {
    let p = rng.random_range(0.1..0.6);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < p {
                edges.push((u, v, rng.random_range(0.5..2.0)));
            }
        }
    }
    WeightedGraph::new(n, edges).unwrap()
}

/// `∂c_i/∂s′_i` written out from the chain rule through `z′ = Bs′`.
fn own_gradient(g: &WeightedGraph, b: &DMatrix<f64>, alpha: &[f64], s: &[f64], sp: &[f64], i: usize) -> f64 {
    let z = b * DVector::from_column_slice(sp);
    let social: f64 = g
        .neighbors(i)
        .iter()
        .map(|&(j, w)| w * (z[i] - z[j]) * (b[(i, i)] - b[(j, i)]))
        .sum();
    2.0 * ((1.0 - alpha[i]) * social + alpha[i] * b[(i, i)] * (z[i] - s[i]))
}

fn finite_difference(
    g: &WeightedGraph,
    alpha: &SusceptibilityProfile,
    s: &OpinionProfile,
    sp: &[f64],
    i: usize,
) -> f64 {
    let h = 1e-6;
    let cost = |x: f64| {
        let mut v = sp.to_vec();
        v[i] = x;
        let z = fj_equilibrium(g, alpha, &v).unwrap();
        agent_cost(i, &z, s, g, alpha).unwrap()
    };
    (cost(sp[i] + h) - cost(sp[i] - h)) / (2.0 * h)
}

fn criterion_1() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_grad: f64 = 0.0;
    let mut worst_fd: f64 = 0.0;
    let mut failures = 0;
    for _ in 0..200 {
        let n = rng.random_range(3..=30);
        let g = random_graph(&mut rng, n);
        let alpha = SusceptibilityProfile::new((0..n).map(|_| rng.random_range(0.05..0.95)).collect()).unwrap();
        let s: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut members: Vec<usize> = (0..n).filter(|_| rng.random::<f64>() < 0.5).collect();
        if members.is_empty() {
            members.push(rng.random_range(0..n));
        }
        let set = StrategicSet::new(members, n).unwrap();
        let r = ResponseMatrix::new(&g, &alpha).unwrap();
        let out = match solve_strategic(&g, &r, &s, &set) {
            Ok(o) => o,
            Err(_) => {
                failures += 1;
                continue;
            }
        };
        let s_true = OpinionProfile::intrinsic(s.clone()).unwrap();
        for &i in set.members() {
            let analytic = own_gradient(&g, r.matrix(), alpha.alpha(), &s, &out.s_prime, i);
            let numeric = finite_difference(&g, &alpha, &s_true, &out.s_prime, i);
            worst_grad = worst_grad.max(analytic.abs());
            worst_fd = worst_fd.max((analytic - numeric).abs());
        }
    }
    Verdict {
        pass: failures == 0 && worst_grad <= 1e-6 && worst_fd <= 1e-4,
        detail: format!(
            "200 instances, solver errors {failures}, max |grad| {worst_grad:.2e} (<= 1e-6), max analytic-FD gap {worst_fd:.2e} (<= 1e-4)"
        ),
    }
}

struct SharedInstance {
    g: WeightedGraph,
    alpha: f64,
    s: Vec<f64>,
}

fn shared_suite() -> Vec<SharedInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    (0..100)
        .map(|_| {
            let n = rng.random_range(3..=25);
            SharedInstance {
                g: random_graph(&mut rng, n),
                alpha: rng.random_range(0.1..0.9),
                s: (0..n).map(|_| rng.random_range(-2.0..2.0)).collect(),
            }
        })
        .collect()
}

fn criterion_2() -> Verdict {
    let mut agree = 0;
    let mut worst: f64 = 0.0;
    for inst in shared_suite() {
        let n = inst.g.n();
        let alpha = SusceptibilityProfile::shared(n, inst.alpha).unwrap();
        let r = ResponseMatrix::new(&inst.g, &alpha).unwrap();
        let nash = solve_strategic(&inst.g, &r, &inst.s, &StrategicSet::all(n)).unwrap();
        let cf = closed_form_all_deviate(&inst.g, &r, &inst.s).unwrap();
        let scale = cf.s_prime.iter().fold(1e-300_f64, |m, x| m.max(x.abs()));
        let gap = nash
            .s_prime
            .iter()
            .zip(cf.s_prime.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
            / scale;
        worst = worst.max(gap);
        if gap <= 1e-6 {
            agree += 1;
        }
    }

    let g = WeightedGraph::new(2, [(0, 1, 1.0)]).unwrap();
    let alpha = SusceptibilityProfile::shared(2, 0.5).unwrap();
    let r = ResponseMatrix::new(&g, &alpha).unwrap();
    let s = OpinionProfile::intrinsic(vec![1.0, 0.0]).unwrap();
    let k2 = solve_strategic(&g, &r, &s, &StrategicSet::all(2)).unwrap();
    let z = fj_equilibrium(&g, &alpha, &s).unwrap();
    let k2_pom = pom(&k2.z_prime, &z, &s, &g, &alpha).unwrap();
    let k2_ok = (k2.s_prime[0] - 4.0 / 3.0).abs() <= 1e-10
        && (k2.s_prime[1] + 2.0 / 3.0).abs() <= 1e-10
        && (k2.z_prime[0] - 2.0 / 3.0).abs() <= 1e-10
        && k2.z_prime[1].abs() <= 1e-10
        && (k2_pom - 2.25).abs() <= 1e-10;
    Verdict {
        pass: agree == 100 && k2_ok,
        detail: format!(
            "solve_nash = closed form on {agree}/100 (worst relative gap {worst:.3e}); K2 Nash s'=({:.6},{:.6}) z'=({:.6},{:.6}) PoM={:.6} vs expected (4/3,-2/3),(2/3,0),9/4",
            k2.s_prime[0], k2.s_prime[1], k2.z_prime[0], k2.z_prime[1], k2_pom
        ),
    }
}

fn sorted_eigenvalues(m: DMatrix<f64>) -> Vec<f64> {
    let sym = (&m + m.transpose()) * 0.5;
    let mut v: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

fn spectra_match(got: &[f64], mut want: Vec<f64>) -> bool {
    want.sort_by(f64::total_cmp);
    let scale = want.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
    got.iter().zip(&want).all(|(a, b)| (a - b).abs() <= 1e-7 * scale)
}

fn criterion_3() -> Verdict {
    let suite = shared_suite();
    let (mut bound_ok, mut b_ok, mut q_ok, mut cost_ok) = (0, 0, 0, 0);
    let mut worst_ratio: f64 = 0.0;
    for inst in &suite {
        let n = inst.g.n();
        let a = inst.alpha;
        let at = a / (1.0 - a);
        let alpha = SusceptibilityProfile::shared(n, a).unwrap();
        let r = ResponseMatrix::new(&inst.g, &alpha).unwrap();
        let s = OpinionProfile::intrinsic(inst.s.clone()).unwrap();
        let z = r.apply(&s).unwrap();
        let lambdas = spectral_decomposition(&laplacian(&inst.g)).unwrap().eigenvalues;
        let lambda_n = lambdas.max();

        let nash = solve_strategic(&inst.g, &r, &s, &StrategicSet::all(n)).unwrap();
        match pom(&nash.z_prime, &z, &s, &inst.g, &alpha) {
            Ok(p) => {
                let bound = pom_upper_bound_shared(lambda_n, at);
                worst_ratio = worst_ratio.max(p / bound);
                if p <= bound * (1.0 + 1e-7) {
                    bound_ok += 1;
                }
            }
            Err(_) => bound_ok += 1,
        }

        let b = r.matrix().clone();
        let l = laplacian(&inst.g);
        if spectra_match(&sorted_eigenvalues(b.clone()), lambdas.iter().map(|x| at / (x + at)).collect()) {
            b_ok += 1;
        }
        let identity = DMatrix::<f64>::identity(n, n);
        let q = &b * &l * &b + (&identity - &b * 2.0 + &b * &b) * at;
        if spectra_match(&sorted_eigenvalues(q.clone()), lambdas.iter().map(|x| at * at / (x + at)).collect()) {
            q_ok += 1;
        }
        let sv = DVector::from_column_slice(&s);
        let c = total_cost(&z, &s, &inst.g, &alpha).unwrap();
        let via_q = (1.0 - a) * sv.dot(&(&q * &sv));
        if (c - via_q).abs() <= 1e-7 * c.abs().max(1.0) {
            cost_ok += 1;
        }
    }
    Verdict {
        pass: bound_ok == 100 && b_ok == 100 && q_ok == 100 && cost_ok == 100,
        detail: format!(
            "PoM <= (l_n+4a)(l_n+a)^2/a^5 on {bound_ok}/100 (max PoM/bound {worst_ratio:.3}); spectrum(B)=a/(l+a) on {b_ok}/100; spectrum(Q)=a^2/(l+a) on {q_ok}/100; C(z)=(1-alpha)s'Qs on {cost_ok}/100"
        ),
    }
}

fn criterion_4() -> Verdict {
    let n = 200;
    let graph = generate_gnp(n, 0.05, 4).unwrap();
    let base = Scenario {
        graph,
        opinions: OpinionSource::Gaussian { mean: 0.0, sd: 1.0 },
        alpha: SusceptibilityProfile::shared(n, 0.5).unwrap(),
        set: SetSpec::Explicit(StrategicSet::default()),
        embedding: None,
        variant: TorrentVariant::FullyCorrective,
        seed: 400,
    };
    let null = detection_experiment(&base, 500, 5.0, 0.05).unwrap();
    let corrupted = Scenario {
        set: SetSpec::RandomFraction(0.05),
        seed: 4000,
        ..base
    };
    let alt = detection_experiment(&corrupted, 500, 5.0, 0.05).unwrap();
    let type_i = null.type_i_rate.unwrap();
    let type_ii = alt.type_ii_rate.unwrap();
    Verdict {
        pass: (0.01..=0.10).contains(&type_i) && type_ii <= 0.05,
        detail: format!(
            "n=200, 500 trials each: Type I {type_i:.3} (in [0.01, 0.10]); Type II at 5% agents shifted 5 sd: {type_ii:.3} (<= 0.05)"
        ),
    }
}

fn criterion_5() -> Verdict {
    let (graph, comm) = generate_blockmodel(&[50, 50], 0.2, 0.02, 5).unwrap();
    let embedding = EmbeddingMatrix::one_hot(&comm);
    let scenario = Scenario {
        graph,
        opinions: OpinionSource::FromEmbedding { weights: vec![1.0, -1.0] },
        alpha: SusceptibilityProfile::shared(100, 0.5).unwrap(),
        set: SetSpec::RandomFraction(0.02),
        embedding: Some(embedding.clone()),
        variant: TorrentVariant::FullyCorrective,
        seed: 500,
    };
    let rows = recovery_experiment(&scenario, &[0.02], 50).unwrap();
    let exact = rows.iter().filter(|r| r.exact).count();
    let worst_err = rows.iter().map(|r| r.recovery_error).fold(0.0, f64::max);
    let worst_acc = rows.iter().map(|r| r.balanced_accuracy).fold(1.0, f64::min);

    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let x = DMatrix::from_fn(100, 4, |_, _| rng.random_range(-1.0..1.0));
    let y: Vec<f64> = (0..100).map(|_| rng.random_range(-3.0..3.0)).collect();
    let fit = torrent(&x, &y, 0.0, TorrentVariant::FullyCorrective, TORRENT_TOL, None).unwrap();
    let yv = DVector::from_column_slice(&y);
    let ols = (x.transpose() * &x).cholesky().unwrap().solve(&(x.transpose() * yv));
    let ols_gap = (fit.weights - ols).amax();
    Verdict {
        pass: exact == 50 && worst_err <= 1e-6 && worst_acc == 1.0 && ols_gap <= 1e-10,
        detail: format!(
            "blockmodel 50/50, |S|=2, 50 trials: S_hat = S in {exact}/50, max recovery error {worst_err:.2e}, min balanced accuracy {worst_acc}; TORRENT(beta=0) vs OLS gap {ols_gap:.2e}"
        ),
    }
}

fn splits(n: usize, parts: usize, max_part: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return if n >= 1 && n <= max_part { vec![vec![n]] } else { vec![] };
    }
    let mut out = Vec::new();
    for first in (1..=max_part.min(n)).rev() {
        for mut rest in splits(n - first, parts - 1, first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

fn criterion_6() -> Verdict {
    let (mut checked, mut mismatched, mut cert_mismatch) = (0usize, 0usize, 0usize);
    let cases = (2..=16)
        .flat_map(|n| splits(n, 2, n))
        .chain((3..=12).flat_map(|n| splits(n, 3, n)));
    for sizes in cases {
        let n: usize = sizes.iter().sum();
        let x = CommunityEmbedding::contiguous(&sizes).matrix();
        for j in 1..=n / 2 {
            let gamma = j as f64 / n as f64;
            let brute = ssc_sss_bruteforce(&x, gamma).unwrap();
            let (xi, big_xi) = blockmodel_extremes(&sizes, gamma).unwrap();
            checked += 1;
            if (brute.xi - xi).abs() > 1e-9 || (brute.big_xi - big_xi).abs() > 1e-9 {
                mismatched += 1;
            }
            let closed_certified = match blockmodel_constants(&sizes, gamma) {
                Ok(c) => c.certified,
                Err(Error::SizeConditionViolated { .. }) => xi > 0.0 && 4.0 * (big_xi / xi).sqrt() < 1.0,
                Err(_) => !brute.certified,
            };
            if closed_certified != brute.certified {
                cert_mismatch += 1;
            }
        }
    }
    Verdict {
        pass: mismatched == 0 && cert_mismatch == 0,
        detail: format!(
            "{checked} (split, gamma) cases: constant mismatches {mismatched}, certification disagreements {cert_mismatch}"
        ),
    }
}

fn all_csv(seed: u64) -> String {
    let (graph, comm) = generate_blockmodel(&[15, 15], 0.3, 0.05, seed).unwrap();
    let gaussian = Scenario {
        graph: graph.clone(),
        opinions: OpinionSource::Gaussian { mean: 0.0, sd: 1.0 },
        alpha: SusceptibilityProfile::shared(30, 0.5).unwrap(),
        set: SetSpec::RandomFraction(0.1),
        embedding: Some(EmbeddingMatrix::one_hot(&comm)),
        variant: TorrentVariant::FullyCorrective,
        seed,
    };
    let embedded = Scenario {
        opinions: OpinionSource::FromEmbedding { weights: vec![1.0, -1.0] },
        ..gaussian.clone()
    };
    let alphas = [0.1, 0.3, 0.5, 0.7, 0.9];
    let mut out = sweep_alpha_csv(&sweep_alpha(&gaussian, &alphas).unwrap());
    out += &sweep_fraction_csv(&sweep_strategic_fraction(&gaussian, &[0.05, 0.1, 0.5, 1.0]).unwrap());
    out += &detection_csv(&detection_experiment(&gaussian, 20, 5.0, 0.05).unwrap());
    out += &recovery_csv(&recovery_experiment(&embedded, &[0.0, 0.05, 0.1], 5).unwrap());
    out
}

fn criterion_7() -> Verdict {
    let a = all_csv(77);
    let b = all_csv(77);
    let c = all_csv(78);
    Verdict {
        pass: a == b && a != c,
        detail: format!(
            "sweep-alpha, sweep-frac, detect-exp, recover-exp CSV ({} bytes): identical on rerun {}, differs for another seed {}",
            a.len(),
            a == b,
            a != c
        ),
    }
}

type Criterion = (&'static str, fn() -> Verdict, Duration);

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("1 Nash first-order conditions", criterion_1, Duration::from_secs(30)),
        ("2 closed-form oracle", criterion_2, Duration::from_secs(10)),
        ("3 PoM bound and spectral identities", criterion_3, Duration::from_secs(10)),
        ("4 detection calibration", criterion_4, Duration::from_secs(60)),
        ("5 exact recovery", criterion_5, Duration::from_secs(30)),
        ("6 SSC/SSS cross-oracle", criterion_6, Duration::from_secs(60)),
        ("7 determinism", criterion_7, Duration::from_secs(60)),
    ];
    let mut failed = 0;
    for (name, run, limit) in criteria {
        let start = Instant::now();
        let v = run();
        let elapsed = start.elapsed();
        let pass = v.pass && elapsed <= limit;
        if !pass {
            failed += 1;
        }
        println!(
            "{} criterion {name}: {} [{:.2}s, limit {}s]",
            if pass { "PASS" } else { "FAIL" },
            v.detail,
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
    }
    println!("acceptance: {} passed, {failed} failed", 7 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
