use std::fmt::Write as _;
use std::path::Path;

use misreport::experiments::{
    detection_csv, recovery_csv, sweep_alpha_csv, sweep_fraction_csv, OpinionSource, Scenario,
    SetSpec,
};
use misreport::io::{
    format_edge_list, format_values, load_alpha, read_edge_list, read_embedding, read_set,
    read_values,
};
use misreport::recovery::{blockmodel_extremes, relative_recovery_error, BRUTE_FORCE_MAX_N};
use misreport::{
    blockmodel_constants, detect_manipulation, detection_experiment, disagreement,
    generate_blockmodel, metrics, polarization, recover_deviators, recovery_experiment,
    select_top_centrality, solve_strategic, ssc_sss_bruteforce, sweep_alpha,
    sweep_strategic_fraction, CommunityEmbedding, EmbeddingMatrix, OpinionProfile,
    ResponseMatrix, SscSssCertificate, StrategicSet, SusceptibilityProfile, TorrentVariant,
    Verdict, WeightedGraph,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{AlphaArgs, Command, GraphArgs, OpinionArgs, OutArgs, SetArgs, VariantArg};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] misreport::Error),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if !e.is_input_error() => 3,
            _ => 2,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn emit(out: &OutArgs, text: &str) -> Result<()> {
    match &out.out {
        Some(p) => std::fs::write(p, text).map_err(misreport::Error::from)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn graph(args: &GraphArgs) -> Result<WeightedGraph> {
    Ok(read_edge_list(&args.graph, args.nodes)?)
}

fn alpha(args: &AlphaArgs, n: usize) -> Result<SusceptibilityProfile> {
    Ok(load_alpha(&args.alpha, n)?)
}

fn values(path: &Path, n: usize) -> Result<Vec<f64>> {
    let v = read_values(path)?;
    if v.len() != n {
        return Err(misreport::Error::DimensionMismatch {
            expected: n,
            found: v.len(),
        }
        .into());
    }
    Ok(v)
}

fn variant(v: VariantArg) -> TorrentVariant {
    match v {
        VariantArg::Fc => TorrentVariant::FullyCorrective,
        VariantArg::Gd => TorrentVariant::GradientStep,
    }
}

fn set_spec(args: &SetArgs, n: usize) -> Result<SetSpec> {
    match (&args.set, args.top_frac, args.random_frac) {
        (Some(p), _, _) => Ok(SetSpec::Explicit(read_set(p, n)?)),
        (_, Some(f), _) => Ok(SetSpec::TopCentralityFraction(f)),
        (_, _, Some(f)) => Ok(SetSpec::RandomFraction(f)),
        _ => Err(CliError::Usage(
            "one of --set, --top-frac or --random-frac is required".into(),
        )),
    }
}

fn opinion_source(args: &OpinionArgs, n: usize) -> Result<OpinionSource> {
    if let Some(p) = &args.opinions {
        return Ok(OpinionSource::Fixed(values(p, n)?));
    }
    if let Some(g) = &args.gaussian {
        let (mean, sd) = mean_sd(g)?;
        return Ok(OpinionSource::Gaussian { mean, sd });
    }
    if let Some(p) = args.rademacher {
        return Ok(OpinionSource::Rademacher { p });
    }
    if let Some(w) = &args.weights {
        return Ok(OpinionSource::FromEmbedding { weights: w.clone() });
    }
    Err(CliError::Usage(
        "one of --opinions, --gaussian, --rademacher or --weights is required".into(),
    ))
}

fn mean_sd(v: &[f64]) -> Result<(f64, f64)> {
    match v {
        [m, s] => Ok((*m, *s)),
        _ => Err(CliError::Usage("--gaussian takes `mean,sd`".into())),
    }
}

fn embedding(path: Option<&Path>, n: usize) -> Result<Option<EmbeddingMatrix>> {
    let Some(p) = path else { return Ok(None) };
    let e = read_embedding(p)?;
    if e.n() != n {
        return Err(misreport::Error::DimensionMismatch {
            expected: n,
            found: e.n(),
        }
        .into());
    }
    Ok(Some(e))
}

fn certificate_line(c: &SscSssCertificate) -> String {
    format!(
        "{:?},{},{},{},{},{}",
        c.method, c.gamma, c.xi, c.big_xi, c.condition_value, c.certified
    )
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Equilibrium {
            graph: g,
            alpha: a,
            opinions,
            out,
        } => {
            let g = graph(&g)?;
            let a = alpha(&a, g.n())?;
            let s = values(&opinions, g.n())?;
            let z = misreport::fj_equilibrium(&g, &a, &s)?;
            emit(&out, &format_values(&z))
        }
        Command::Strategic {
            graph: g,
            alpha: a,
            opinions,
            set,
            seed,
            out,
        } => {
            let g = graph(&g)?;
            let n = g.n();
            let a = alpha(&a, n)?;
            let s = values(&opinions, n)?;
            let set = match set_spec(&set, n)? {
                SetSpec::Explicit(s) => s,
                SetSpec::TopCentralityFraction(p) => select_top_centrality(&g, p)?,
                SetSpec::RandomFraction(p) => misreport::experiments::select_random_fraction(
                    n,
                    p,
                    &mut ChaCha8Rng::seed_from_u64(seed),
                )?,
            };
            let r = ResponseMatrix::new(&g, &a)?;
            let o = solve_strategic(&g, &r, &s, &set)?;
            let mut text = String::from("node,strategic,s,s_prime,z_prime\n");
            for (i, si) in s.iter().enumerate() {
                writeln!(
                    text,
                    "{i},{},{},{},{}",
                    u8::from(set.contains(i)),
                    si,
                    o.s_prime[i],
                    o.z_prime[i]
                )
                .unwrap();
            }
            writeln!(
                text,
                "# max_gradient={} residual={} condition={} uniqueness={:?}",
                o.max_gradient, o.residual, o.condition, o.uniqueness
            )
            .unwrap();
            emit(&out, &text)
        }
        Command::Metrics {
            graph: g,
            alpha: a,
            opinions,
            zprime,
            out,
        } => {
            let g = graph(&g)?;
            let n = g.n();
            let a = alpha(&a, n)?;
            let s = OpinionProfile::intrinsic(values(&opinions, n)?)?;
            let z = misreport::fj_equilibrium(&g, &a, &s)?;
            let m = metrics(&z, &s, &g, &a)?;
            let mut text = String::from("metric,value\n");
            writeln!(text, "polarization,{}", m.polarization).unwrap();
            writeln!(text, "disagreement,{}", m.disagreement).unwrap();
            writeln!(text, "total_cost,{}", m.total_cost).unwrap();
            writeln!(text, "mean_opinion,{}", m.mean_opinion).unwrap();
            if let Some(p) = zprime {
                let zp = values(&p, n)?;
                let mp = metrics(&zp, &s, &g, &a)?;
                writeln!(text, "pol_ratio,{}", polarization(&zp) / m.polarization).unwrap();
                writeln!(text, "dis_ratio,{}", disagreement(&zp, &g) / m.disagreement).unwrap();
                writeln!(text, "pom,{}", misreport::pom(&zp, &z, &s, &g, &a)?).unwrap();
                writeln!(text, "total_cost_corrupted,{}", mp.total_cost).unwrap();
            }
            emit(&out, &text)
        }
        Command::Detect {
            graph: g,
            alpha: a,
            zprime,
            mu0,
            significance,
            csv,
            out,
        } => {
            let g = graph(&g)?;
            let a = alpha(&a, g.n())?;
            let zp = values(&zprime, g.n())?;
            let d = detect_manipulation(&g, &a, &zp, mu0, significance)?;
            let verdict = match d.verdict {
                Verdict::Manipulation => "manipulation",
                Verdict::NoManipulation => "none",
            };
            let text = if csv {
                format!(
                    "verdict,t,p_value,dof\n{verdict},{},{},{}\n",
                    d.t_statistic, d.p_value, d.dof
                )
            } else {
                format!(
                    "verdict: {verdict}\nt: {}\np: {}\ndof: {}\n",
                    d.t_statistic, d.p_value, d.dof
                )
            };
            emit(&out, &text)
        }
        Command::Recover {
            graph: g,
            alpha: a,
            zprime,
            embeddings,
            k,
            variant: v,
            opinions,
            out,
        } => {
            let g = graph(&g)?;
            let n = g.n();
            let a = alpha(&a, n)?;
            let zp = values(&zprime, n)?;
            let x = embedding(Some(&embeddings), n)?.expect("path given");
            let rec = recover_deviators(&x, &g, &a, &zp, k, variant(v))?;
            let mut text = String::from("node,diff,in_S_hat\n");
            for (i, d) in rec.diffs.iter().enumerate() {
                writeln!(text, "{i},{d},{}", u8::from(rec.strategic_set.contains(i))).unwrap();
            }
            write!(text, "# iterations={}", rec.iterations).unwrap();
            if let Some(p) = opinions {
                let s = values(&p, n)?;
                let (err, excluded) = relative_recovery_error(&rec.s_hat, &s);
                write!(text, " recovery_error={err} excluded={excluded}").unwrap();
            }
            if let Some(w) = rec.warning {
                write!(text, " warning={w:?}").unwrap();
            }
            text.push('\n');
            emit(&out, &text)
        }
        Command::SweepAlpha {
            graph: g,
            opinions,
            embeddings,
            set,
            alphas,
            seed,
            out,
        } => {
            let g = graph(&g)?;
            let n = g.n();
            let scenario = Scenario {
                opinions: opinion_source(&opinions, n)?,
                alpha: SusceptibilityProfile::shared(n, 0.5)?,
                set: set_spec(&set, n)?,
                embedding: embedding(embeddings.as_deref(), n)?,
                variant: TorrentVariant::FullyCorrective,
                seed,
                graph: g,
            };
            emit(&out, &sweep_alpha_csv(&sweep_alpha(&scenario, &alphas)?))
        }
        Command::SweepFrac {
            graph: g,
            alpha: a,
            opinions,
            embeddings,
            fracs,
            seed,
            out,
        } => {
            let g = graph(&g)?;
            let n = g.n();
            let scenario = Scenario {
                opinions: opinion_source(&opinions, n)?,
                alpha: alpha(&a, n)?,
                set: SetSpec::TopCentralityFraction(1.0),
                embedding: embedding(embeddings.as_deref(), n)?,
                variant: TorrentVariant::FullyCorrective,
                seed,
                graph: g,
            };
            emit(&out, &sweep_fraction_csv(&sweep_strategic_fraction(&scenario, &fracs)?))
        }
        Command::DetectExp {
            graph: g,
            alpha: a,
            gaussian,
            set,
            trials,
            shift,
            significance,
            seed,
            out,
        } => {
            let g = graph(&g)?;
            let n = g.n();
            let set = if set.set.is_none() && set.top_frac.is_none() && set.random_frac.is_none() {
                SetSpec::Explicit(StrategicSet::default())
            } else {
                set_spec(&set, n)?
            };
            let (mean, sd) = mean_sd(&gaussian)?;
            let scenario = Scenario {
                opinions: OpinionSource::Gaussian { mean, sd },
                alpha: alpha(&a, n)?,
                set,
                embedding: None,
                variant: TorrentVariant::FullyCorrective,
                seed,
                graph: g,
            };
            let report = detection_experiment(&scenario, trials, shift, significance)?;
            emit(&out, &detection_csv(&report))
        }
        Command::RecoverExp {
            graph: g,
            alpha: a,
            opinions,
            embeddings,
            fracs,
            trials,
            variant: v,
            seed,
            out,
        } => {
            let g = graph(&g)?;
            let n = g.n();
            let scenario = Scenario {
                opinions: opinion_source(&opinions, n)?,
                alpha: alpha(&a, n)?,
                set: SetSpec::RandomFraction(1.0),
                embedding: embedding(Some(&embeddings), n)?,
                variant: variant(v),
                seed,
                graph: g,
            };
            emit(&out, &recovery_csv(&recovery_experiment(&scenario, &fracs, trials)?))
        }
        Command::GenBlockmodel {
            sizes,
            p_in,
            p_out,
            seed,
            embedding_out,
            out,
        } => {
            let (g, comm) = generate_blockmodel(&sizes, p_in, p_out, seed)?;
            if let Some(p) = embedding_out {
                std::fs::write(p, one_hot_csv(&comm)).map_err(misreport::Error::from)?;
            }
            emit(&out, &format_edge_list(&g))
        }
        Command::SscCert { sizes, gamma, out } => {
            let mut text = String::from("method,gamma,xi,big_xi,condition_value,certified\n");
            let n: usize = sizes.iter().sum();
            if n <= BRUTE_FORCE_MAX_N {
                let x = CommunityEmbedding::contiguous(&sizes).matrix();
                writeln!(text, "{}", certificate_line(&ssc_sss_bruteforce(&x, gamma)?)).unwrap();
            }
            match blockmodel_constants(&sizes, gamma) {
                Ok(c) => writeln!(text, "{}", certificate_line(&c)).unwrap(),
                Err(e @ misreport::Error::SizeConditionViolated { .. }) => {
                    let (xi, big_xi) = blockmodel_extremes(&sizes, gamma)?;
                    writeln!(text, "# closed form not certified: {e}; xi={xi} big_xi={big_xi}")
                        .unwrap();
                }
                Err(e) => return Err(e.into()),
            }
            emit(&out, &text)
        }
    }
}

fn one_hot_csv(comm: &CommunityEmbedding) -> String {
    let x = comm.matrix();
    let mut text = (0..x.ncols()).map(|k| format!("c{k}")).collect::<Vec<_>>().join(",");
    text.push('\n');
    for row in x.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        text.push_str(&cells.join(","));
        text.push('\n');
    }
    text
}
