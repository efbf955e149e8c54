use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use btties_core::dataset::{read_judgements_csv, write_judgements_csv, ComparisonDataset, Judgement};
use btties_core::exec::Execution;
use btties_core::sim::bench::{run_efficiency_study, run_scalability_study, run_sensitivity_study, BenchReport, ScenarioFile};
use btties_core::sim::{effective_sample_size, simulate_prior_covariance_wishart, PriorSource, SimulationScenario};
use btties_core::{build_spatial_covariance, run_gibbs, run_mhrw_baseline, summarize, SamplerConfig, SamplerKind, WardGraph};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{FitArgs, ServeArgs, SimulateArgs, Study};

pub fn fit(args: FitArgs) -> Result<()> {
    let labels = match &args.wards {
        Some(path) => Some(read_labels(path)?),
        None => None,
    };
    let graph = WardGraph::read_adjacency_csv(open(&args.adjacency)?, labels)
        .with_context(|| format!("reading {}", args.adjacency.display()))?;
    let events = read_judgements_csv(open(&args.judgements)?, graph.labels())
        .with_context(|| format!("reading {}", args.judgements.display()))?;
    let dataset = ComparisonDataset::from_judgements(graph.n_wards(), events)?;
    tracing::info!(
        wards = graph.n_wards(),
        comparisons = dataset.n_comparisons(),
        ties = dataset.tie_events(),
        skips = dataset.skips(),
        "dataset loaded"
    );

    let mut prior = build_spatial_covariance(&graph, args.alpha2.unwrap_or(1.0))?;
    if let Some(a) = args.alpha2 {
        prior = prior.with_alpha2(a)?;
    }
    let config = SamplerConfig {
        n_iterations: args.iterations,
        burn_in: args.burn_in,
        seed: args.seed,
        fixed_delta: args.delta,
        learn_alpha2: args.alpha2.is_none(),
        execution: if args.sequential { Execution::Sequential } else { Execution::default() },
        ..Default::default()
    };
    let samples = if args.mhrw {
        run_mhrw_baseline(&dataset, &prior, &config)?
    } else {
        run_gibbs(&dataset, &prior, &config)?
    };
    let summary = summarize(&samples, graph.labels());

    if let Some(path) = &args.draws {
        let mut w = BufWriter::new(create(path)?);
        samples.write_ndjson(&mut w)?;
        w.flush()?;
    }
    if let Some(path) = &args.out {
        serde_json::to_writer_pretty(BufWriter::new(create(path)?), &summary)?;
    }

    let mut out = std::io::stdout().lock();
    writeln!(out, "{} draws in {:.1}s ({})", summary.n_draws, samples.elapsed_secs, samples.sampler)?;
    writeln!(out, "delta  {}", summary.delta)?;
    writeln!(out, "alpha2 {}", summary.alpha2)?;
    writeln!(out, "tie probability at equal quality: {:.4}", (summary.delta.median / 2.0).tanh())?;
    writeln!(out, "{:<24} {:>9} {:>9} {:>9} {:>9}", "ward", "median", "variance", "q2.5", "q97.5")?;
    for w in &summary.wards {
        writeln!(out, "{:<24} {:>9.4} {:>9.4} {:>9.4} {:>9.4}", w.label, w.median, w.variance, w.q025, w.q975)?;
    }
    Ok(())
}

pub fn simulate(args: SimulateArgs) -> Result<()> {
    let graph = WardGraph::near_square_grid(args.wards);
    let scenario = SimulationScenario {
        n_wards: args.wards,
        n_comparisons: args.comparisons.unwrap_or(10 * args.wards),
        true_delta: args.delta,
        alpha2: args.alpha2,
        prior: if args.wishart { PriorSource::Wishart } else { PriorSource::Graph(graph.clone()) },
        seed: args.seed,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let prior = match &scenario.prior {
        PriorSource::Graph(g) => build_spatial_covariance(g, args.alpha2)?,
        PriorSource::Wishart => simulate_prior_covariance_wishart(args.wards, args.alpha2, &mut rng)?,
    };
    let lambda = prior.sample(&mut rng);
    let mut events = Vec::with_capacity(scenario.n_comparisons);
    let dataset = btties_core::sim::simulate_comparisons(&scenario, &lambda, &mut rng)?;
    // Expand the counts back into one event per judgement.
    let n = dataset.n_wards();
    for i in 0..n {
        for j in 0..n {
            for _ in 0..dataset.wins(i, j) {
                events.push(event(i, j, btties_core::Outcome::I));
            }
            if i < j {
                for _ in 0..dataset.ties(i, j) {
                    events.push(event(i, j, btties_core::Outcome::Tie));
                }
            }
        }
    }

    std::fs::create_dir_all(&args.out_dir)?;
    let labels = graph.labels();
    write_judgements_csv(create(&args.out_dir.join("judgements.csv"))?, &events, labels)?;
    graph.write_adjacency_csv(create(&args.out_dir.join("adjacency.csv"))?)?;
    let mut truth = csv::Writer::from_writer(create(&args.out_dir.join("truth.csv"))?);
    truth.write_record(["ward", "lambda"])?;
    for (label, value) in labels.iter().zip(&lambda) {
        truth.write_record([label.as_str(), &value.to_string()])?;
    }
    truth.flush()?;
    println!(
        "wrote {} judgements ({} ties) over {} wards to {}",
        events.len(),
        dataset.tie_events(),
        n,
        args.out_dir.display()
    );
    Ok(())
}

fn event(i: usize, j: usize, outcome: btties_core::Outcome) -> Judgement {
    Judgement {
        judge_id: "sim".into(),
        ward_i: i,
        ward_j: j,
        outcome,
        timestamp: String::new(),
    }
}

pub fn bench(study: Study, config: Option<PathBuf>, out: Option<PathBuf>) -> Result<()> {
    let file = match &config {
        Some(path) => ScenarioFile::load(path).with_context(|| format!("reading {}", path.display()))?,
        None => ScenarioFile::default(),
    };
    let report = match study {
        Study::Efficiency => run_efficiency_study(&file.efficiency()?)?,
        Study::Scalability => run_scalability_study(&file.scalability()?)?,
        Study::Sensitivity => run_sensitivity_study(&file.sensitivity()?)?,
    };
    match &out {
        Some(path) => report.write_csv_file(path)?,
        None => report.write_csv(std::io::stdout().lock())?,
    }
    print_overview(&report);
    Ok(())
}

/// Per-scenario medians, on stderr so the CSV on stdout stays clean.
fn print_overview(report: &BenchReport) {
    let mut scenarios: Vec<&str> = report.rows.iter().map(|r| r.scenario.as_str()).collect();
    scenarios.dedup();
    for scenario in scenarios {
        for sampler in [SamplerKind::PolyaGamma, SamplerKind::RandomWalk] {
            let rows: Vec<_> = report.rows_for(scenario, sampler).collect();
            if rows.is_empty() {
                continue;
            }
            let med = |f: &dyn Fn(&btties_core::sim::bench::BenchRow) -> f64| {
                btties_core::stats::median(&rows.iter().map(|r| f(r)).collect::<Vec<_>>())
            };
            eprintln!(
                "{scenario:<20} {sampler:<8} runs={:<3} wall={:>8.2}s ess/s(delta)={:>8.2} ess/s(lambda)={:>8.2} tau={:.3} coverage={:.3}",
                rows.len(),
                med(&|r| r.wall_secs),
                med(&|r| r.ess_per_sec_delta),
                med(&|r| r.ess_per_sec_lambda),
                med(&|r| r.kendall_tau),
                med(&|r| r.coverage),
            );
        }
    }
}

pub fn ess(path: &Path) -> Result<()> {
    let chains = read_chains(path)?;
    if chains.is_empty() {
        bail!("{} holds no chains", path.display());
    }
    let mut out = std::io::stdout().lock();
    writeln!(out, "{:<16} {:>8} {:>12}", "chain", "draws", "ess")?;
    for (name, values) in chains {
        let ess = effective_sample_size(&values).with_context(|| format!("chain `{name}`"))?;
        writeln!(out, "{name:<16} {:>8} {ess:>12.1}", values.len())?;
    }
    Ok(())
}

/// Named chains from NDJSON draws (`delta`, `alpha2`, `lambda[k]`) or from a
/// CSV of numeric columns with an optional header row.
fn read_chains(path: &Path) -> Result<Vec<(String, Vec<f64>)>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    if first.trim_start().starts_with('{') {
        let mut delta = Vec::new();
        let mut alpha2 = Vec::new();
        let mut lambda: Vec<Vec<f64>> = Vec::new();
        for (k, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let v: serde_json::Value = serde_json::from_str(line).with_context(|| format!("line {}", k + 1))?;
            delta.extend(v["delta"].as_f64());
            alpha2.extend(v["alpha2"].as_f64());
            if let Some(row) = v["lambda"].as_array() {
                lambda.resize(row.len(), Vec::new());
                for (w, x) in row.iter().enumerate() {
                    lambda[w].push(x.as_f64().context("non-numeric lambda")?);
                }
            }
        }
        let mut out = vec![("delta".to_string(), delta), ("alpha2".to_string(), alpha2)];
        out.extend(lambda.into_iter().enumerate().map(|(w, c)| (format!("lambda[{w}]"), c)));
        out.retain(|(_, c)| !c.is_empty());
        return Ok(out);
    }

    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(BufReader::new(text.as_bytes()));
    let mut names: Vec<String> = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for (k, record) in rdr.records().enumerate() {
        let record = record?;
        let parsed: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(row) => {
                if columns.is_empty() {
                    columns = vec![Vec::new(); row.len()];
                }
                for (c, x) in columns.iter_mut().zip(row) {
                    c.push(x);
                }
            }
            Err(_) if k == 0 => names = record.iter().map(String::from).collect(),
            Err(e) => bail!("line {}: {e}", k + 1),
        }
    }
    Ok(columns
        .into_iter()
        .enumerate()
        .map(|(c, values)| (names.get(c).cloned().unwrap_or_else(|| format!("column{}", c + 1)), values))
        .collect())
}

pub fn serve(args: ServeArgs) -> Result<()> {
    // Environment wins over flags.
    let port = match std::env::var("PORT") {
        Ok(v) => v.parse().with_context(|| format!("PORT={v}"))?,
        Err(_) => args.port,
    };
    let data_dir = std::env::var_os("DATA_DIR").map(PathBuf::from).unwrap_or(args.data_dir);
    let app = btties_service::App::open(btties_service::ServiceConfig {
        data_dir,
        seed: args.seed,
        compact_every: btties_service::app::DEFAULT_COMPACT_EVERY,
    })?;
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(btties_service::serve(app, (args.host, port).into()))?;
    Ok(())
}

fn read_labels(path: &Path) -> Result<Vec<String>> {
    let mut labels = Vec::new();
    for line in BufReader::new(open(path)?).lines() {
        let line = line?;
        let label = line.trim();
        if !label.is_empty() {
            labels.push(label.to_string());
        }
    }
    Ok(labels)
}

fn open(path: &Path) -> Result<File> {
    File::open(path).with_context(|| format!("opening {}", path.display()))
}

fn create(path: &Path) -> Result<File> {
    File::create(path).with_context(|| format!("creating {}", path.display()))
}
