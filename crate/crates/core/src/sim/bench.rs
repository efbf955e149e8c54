//! Efficiency, scalability and sensitivity studies, and their CSV reports.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::ComparisonDataset;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::gibbs::{run_gibbs, PosteriorSamples, SamplerConfig, SamplerKind};
use crate::graph::WardGraph;
use crate::mhrw::run_mhrw_baseline;
use crate::sim::{
    calibrate_delta_for_tie_share, effective_sample_size, simulate_comparisons, PriorSource, SimulationScenario,
};
use crate::spatial::SpatialPrior;
use crate::stats;
use crate::summary::IntervalSummary;

/// One fitted run: a `(scenario, run, sampler)` row of a report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub scenario: String,
    pub run: usize,
    pub sampler: SamplerKind,
    pub n_wards: usize,
    pub n_comparisons: usize,
    pub true_delta: f64,
    pub iterations: usize,
    pub wall_secs: f64,
    pub ess_delta: f64,
    pub ess_per_sec_delta: f64,
    /// Average over wards of the ESS of each `λ_i`.
    pub ess_lambda: f64,
    pub ess_per_sec_lambda: f64,
    pub tie_fraction: f64,
    pub kendall_tau: f64,
    /// Share of wards whose 95% interval covers the true `λ_i`.
    pub coverage: f64,
    /// Mean absolute error of the posterior medians after removing the
    /// average from both medians and truth.
    pub mean_abs_error: f64,
    pub delta_median: f64,
    pub alpha2_median: f64,
    /// Fraction of ward pairs ordered differently from a reference fit, when
    /// the scenario has one.
    pub rank_disagreement: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn extend(&mut self, other: BenchReport) {
        self.rows.extend(other.rows);
    }

    pub fn rows_for<'a>(&'a self, scenario: &'a str, sampler: SamplerKind) -> impl Iterator<Item = &'a BenchRow> + 'a {
        self.rows
            .iter()
            .filter(move |r| r.scenario == scenario && r.sampler == sampler)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Fit diagnostics against a known truth.
pub fn evaluate(
    scenario: &str,
    run: usize,
    samples: &PosteriorSamples,
    dataset: &ComparisonDataset,
    lambda_true: &[f64],
    true_delta: f64,
) -> Result<BenchRow> {
    let n = samples.n_wards;
    let mut medians = Vec::with_capacity(n);
    let mut covered = 0usize;
    let mut ess_sum = 0.0;
    for w in 0..n {
        let chain = samples.lambda_chain(w);
        let interval = IntervalSummary::from_draws(&chain);
        medians.push(interval.median);
        covered += interval.contains(lambda_true[w]) as usize;
        ess_sum += effective_sample_size(&chain)?;
    }
    let ess_lambda = ess_sum / n as f64;
    let ess_delta = effective_sample_size(&samples.delta_draws)?;
    let wall = samples.elapsed_secs.max(1e-9);
    Ok(BenchRow {
        scenario: scenario.to_string(),
        run,
        sampler: samples.sampler,
        n_wards: n,
        n_comparisons: dataset.n_comparisons() as usize,
        true_delta,
        iterations: samples.burn_in + samples.n_draws(),
        wall_secs: wall,
        ess_delta,
        ess_per_sec_delta: ess_delta / wall,
        ess_lambda,
        ess_per_sec_lambda: ess_lambda / wall,
        tie_fraction: dataset.tie_share(),
        kendall_tau: stats::kendall_tau(&medians, lambda_true),
        coverage: covered as f64 / n as f64,
        mean_abs_error: centred_mean_abs_error(&medians, lambda_true),
        delta_median: stats::median(&samples.delta_draws),
        alpha2_median: stats::median(&samples.alpha2_draws),
        rank_disagreement: None,
    })
}

/// Mean absolute difference after subtracting each vector's average.
pub fn centred_mean_abs_error(estimate: &[f64], truth: &[f64]) -> f64 {
    let (me, mt) = (stats::mean(estimate), stats::mean(truth));
    estimate
        .iter()
        .zip(truth)
        .map(|(e, t)| ((e - me) - (t - mt)).abs())
        .sum::<f64>()
        / estimate.len() as f64
}

/// Posterior medians of `λ`.
pub fn lambda_medians(samples: &PosteriorSamples) -> Vec<f64> {
    (0..samples.n_wards).map(|w| stats::median(&samples.lambda_chain(w))).collect()
}

/// Prior, truth and data for one replicate.
pub struct Replicate {
    pub prior: SpatialPrior,
    pub lambda_true: Vec<f64>,
    pub dataset: ComparisonDataset,
}

/// Builds the prior, draws `λ` from it and simulates the comparisons, all
/// from `scenario.seed`.
pub fn simulate_replicate(scenario: &SimulationScenario) -> Result<Replicate> {
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let prior = scenario.build_prior(&mut rng)?;
    let lambda_true = prior.sample(&mut rng);
    let dataset = simulate_comparisons(scenario, &lambda_true, &mut rng)?;
    Ok(Replicate {
        prior,
        lambda_true,
        dataset,
    })
}

/// Settings shared by every study.
#[derive(Clone, Debug)]
pub struct StudySettings {
    pub gibbs: SamplerConfig,
    /// Iterations and burn-in for the random-walk baseline.
    pub mhrw_iterations: usize,
    pub mhrw_burn_in: usize,
    /// How independent replicates are scheduled. Each fit runs sequentially
    /// inside, so wall times stay comparable.
    pub replicate_execution: Execution,
}

impl Default for StudySettings {
    fn default() -> Self {
        Self {
            gibbs: SamplerConfig {
                execution: Execution::Sequential,
                ..Default::default()
            },
            mhrw_iterations: 20_000,
            mhrw_burn_in: 1_000,
            replicate_execution: Execution::Sequential,
        }
    }
}

impl StudySettings {
    fn gibbs_config(&self, seed: u64) -> SamplerConfig {
        SamplerConfig {
            seed,
            execution: Execution::Sequential,
            ..self.gibbs.clone()
        }
    }

    fn mhrw_config(&self, seed: u64) -> SamplerConfig {
        SamplerConfig {
            seed,
            n_iterations: self.mhrw_iterations,
            burn_in: self.mhrw_burn_in,
            execution: Execution::Sequential,
            ..self.gibbs.clone()
        }
    }
}

#[derive(Clone, Debug)]
pub struct EfficiencyConfig {
    pub graph: WardGraph,
    pub n_comparisons: usize,
    pub alpha2: f64,
    /// One replicate per seed; `δ` is drawn from `U[0, 1]` for each.
    pub seeds: Vec<u64>,
    pub settings: StudySettings,
}

impl Default for EfficiencyConfig {
    fn default() -> Self {
        Self {
            graph: WardGraph::surrogate_county().0,
            n_comparisons: 800,
            alpha2: 1.0,
            seeds: (0..25).collect(),
            settings: StudySettings::default(),
        }
    }
}

/// Fits both samplers to replicate datasets and reports their efficiency.
pub fn run_efficiency_study(config: &EfficiencyConfig) -> Result<BenchReport> {
    let runs: Vec<(usize, u64)> = config.seeds.iter().copied().enumerate().collect();
    let results = config.settings.replicate_execution.map(runs, |(run, seed)| -> Result<Vec<BenchRow>> {
        let true_delta = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_de17a).random::<f64>();
        let scenario = SimulationScenario {
            n_wards: config.graph.n_wards(),
            n_comparisons: config.n_comparisons,
            true_delta,
            alpha2: config.alpha2,
            prior: PriorSource::Graph(config.graph.clone()),
            seed,
        };
        let rep = simulate_replicate(&scenario)?;
        let pg = run_gibbs(&rep.dataset, &rep.prior, &config.settings.gibbs_config(seed))?;
        let rw = run_mhrw_baseline(&rep.dataset, &rep.prior, &config.settings.mhrw_config(seed))?;
        Ok(vec![
            evaluate("efficiency", run, &pg, &rep.dataset, &rep.lambda_true, true_delta)?,
            evaluate("efficiency", run, &rw, &rep.dataset, &rep.lambda_true, true_delta)?,
        ])
    });
    collect(results)
}

#[derive(Clone, Debug)]
pub struct ScalabilityConfig {
    pub sizes: Vec<usize>,
    pub runs_per_size: usize,
    pub comparisons_per_ward: usize,
    pub true_delta: f64,
    pub alpha2: f64,
    /// Largest size at which the baseline also runs; `None` skips it.
    pub mhrw_max_wards: Option<usize>,
    pub seed: u64,
    pub settings: StudySettings,
}

impl Default for ScalabilityConfig {
    fn default() -> Self {
        Self {
            sizes: vec![16, 32, 64, 128, 256, 512, 1024],
            runs_per_size: 10,
            comparisons_per_ward: 10,
            true_delta: 0.5,
            alpha2: 1.0,
            mhrw_max_wards: Some(512),
            seed: 0,
            settings: StudySettings::default(),
        }
    }
}

/// Times the samplers on Wishart-prior datasets of increasing size.
pub fn run_scalability_study(config: &ScalabilityConfig) -> Result<BenchReport> {
    let mut jobs = Vec::new();
    for &n in &config.sizes {
        for run in 0..config.runs_per_size {
            jobs.push((n, run));
        }
    }
    let results = config.settings.replicate_execution.map(jobs, |(n, run)| -> Result<Vec<BenchRow>> {
        let seed = config.seed.wrapping_add((n as u64) << 32).wrapping_add(run as u64);
        let scenario = SimulationScenario {
            n_wards: n,
            n_comparisons: config.comparisons_per_ward * n,
            true_delta: config.true_delta,
            alpha2: config.alpha2,
            prior: PriorSource::Wishart,
            seed,
        };
        let rep = simulate_replicate(&scenario)?;
        let name = format!("scalability_{n}");
        let pg = run_gibbs(&rep.dataset, &rep.prior, &config.settings.gibbs_config(seed))?;
        let mut rows = vec![evaluate(&name, run, &pg, &rep.dataset, &rep.lambda_true, config.true_delta)?];
        if config.mhrw_max_wards.is_some_and(|max| n <= max) {
            let rw = run_mhrw_baseline(&rep.dataset, &rep.prior, &config.settings.mhrw_config(seed))?;
            rows.push(evaluate(&name, run, &rw, &rep.dataset, &rep.lambda_true, config.true_delta)?);
        }
        Ok(rows)
    });
    collect(results)
}

#[derive(Clone, Debug)]
pub struct SensitivityConfig {
    pub graph: WardGraph,
    pub n_comparisons: usize,
    pub alpha2: f64,
    pub true_delta: f64,
    /// Target tie shares at equal qualities.
    pub tie_shares: Vec<f64>,
    /// Divisor applied to the lower interval end of the learned `α²` to get
    /// the "very strong" correlation setting.
    pub very_strong_factor: f64,
    pub seeds: Vec<u64>,
    pub settings: StudySettings,
}

impl Default for SensitivityConfig {
    fn default() -> Self {
        Self {
            graph: WardGraph::surrogate_county().0,
            n_comparisons: 800,
            alpha2: 1.0,
            true_delta: 0.5,
            tie_shares: vec![0.05, 0.2, 0.5, 0.75],
            very_strong_factor: 10.0,
            seeds: (0..5).collect(),
            settings: StudySettings::default(),
        }
    }
}

/// Scenario name of a tie-share run, e.g. `ties_20`.
pub fn tie_scenario_name(share: f64) -> String {
    format!("ties_{:02}", (share * 100.0).round() as u32)
}

/// Two families on matched seeds: `α²` fixed at levels read off the learned
/// interval versus learned, and data simulated at `δ` calibrated to each
/// target tie share.
pub fn run_sensitivity_study(config: &SensitivityConfig) -> Result<BenchReport> {
    let runs: Vec<(usize, u64)> = config.seeds.iter().copied().enumerate().collect();
    let results = config.settings.replicate_execution.map(runs, |(run, seed)| -> Result<Vec<BenchRow>> {
        let mut rows = Vec::new();
        let base = SimulationScenario {
            n_wards: config.graph.n_wards(),
            n_comparisons: config.n_comparisons,
            true_delta: config.true_delta,
            alpha2: config.alpha2,
            prior: PriorSource::Graph(config.graph.clone()),
            seed,
        };

        let rep = simulate_replicate(&base)?;
        let learned_cfg = config.settings.gibbs_config(seed);
        let learned = run_gibbs(&rep.dataset, &rep.prior, &learned_cfg)?;
        let reference = lambda_medians(&learned);
        rows.push(evaluate("alpha2_learned", run, &learned, &rep.dataset, &rep.lambda_true, base.true_delta)?);
        let interval = IntervalSummary::from_draws(&learned.alpha2_draws);
        let levels = [
            ("alpha2_very_strong", interval.lower / config.very_strong_factor),
            ("alpha2_strong", interval.lower),
            ("alpha2_weak", interval.upper),
        ];
        for (name, alpha2) in levels {
            let prior = rep.prior.clone().with_alpha2(alpha2)?;
            let cfg = SamplerConfig {
                learn_alpha2: false,
                ..learned_cfg.clone()
            };
            let fit = run_gibbs(&rep.dataset, &prior, &cfg)?;
            let mut row = evaluate(name, run, &fit, &rep.dataset, &rep.lambda_true, base.true_delta)?;
            row.rank_disagreement = Some(stats::rank_disagreement(&lambda_medians(&fit), &reference));
            rows.push(row);
        }

        for &share in &config.tie_shares {
            let delta = calibrate_delta_for_tie_share(share)?;
            let scenario = SimulationScenario {
                true_delta: delta,
                ..base.clone()
            };
            // Same seed, so the prior draw of λ and the pair schedule are shared.
            let rep = simulate_replicate(&scenario)?;
            let fit = run_gibbs(&rep.dataset, &rep.prior, &learned_cfg)?;
            rows.push(evaluate(&tie_scenario_name(share), run, &fit, &rep.dataset, &rep.lambda_true, delta)?);
        }
        Ok(rows)
    });
    collect(results)
}

fn collect(results: Vec<Result<Vec<BenchRow>>>) -> Result<BenchReport> {
    let mut report = BenchReport::default();
    for r in results {
        report.rows.extend(r?);
    }
    Ok(report)
}

/// Ward count: one size or a ladder of sizes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WardCount {
    One(usize),
    Many(Vec<usize>),
}

impl WardCount {
    pub fn sizes(&self) -> Vec<usize> {
        match self {
            WardCount::One(n) => vec![*n],
            WardCount::Many(v) => v.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorKind {
    Graph,
    Wishart,
}

/// Scenario file (TOML). Keys left out fall back to the study defaults.
///
/// ```toml
/// wards = 95            # or a ladder: [16, 64, 256]
/// comparisons = 800     # total; scalability uses comparisons_per_ward
/// delta = 0.5           # omitted in the efficiency study: drawn from U[0, 1]
/// alpha2 = 1.0
/// prior = "graph"       # or "wishart"
/// iterations = 5000
/// burn_in = 100
/// seeds = [1, 2, 3]
/// ```
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub wards: Option<WardCount>,
    pub comparisons: Option<usize>,
    pub comparisons_per_ward: Option<usize>,
    pub delta: Option<f64>,
    pub alpha2: Option<f64>,
    pub prior: Option<PriorKind>,
    pub iterations: Option<usize>,
    pub burn_in: Option<usize>,
    pub seeds: Option<Vec<u64>>,
    pub mhrw_iterations: Option<usize>,
    pub mhrw_burn_in: Option<usize>,
    pub mhrw_max_wards: Option<usize>,
    pub runs_per_size: Option<usize>,
    pub tie_shares: Option<Vec<f64>>,
    /// Path to an adjacency CSV replacing the built-in graph.
    pub adjacency: Option<String>,
    pub parallel_replicates: Option<bool>,
}

impl ScenarioFile {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    fn settings(&self) -> StudySettings {
        let mut s = StudySettings::default();
        if let Some(n) = self.iterations {
            s.gibbs.n_iterations = n;
        }
        if let Some(b) = self.burn_in {
            s.gibbs.burn_in = b;
        }
        if let Some(n) = self.mhrw_iterations {
            s.mhrw_iterations = n;
        }
        if let Some(b) = self.mhrw_burn_in {
            s.mhrw_burn_in = b;
        }
        if self.parallel_replicates == Some(true) {
            s.replicate_execution = Execution::Parallel;
        }
        s
    }

    /// The graph for graph-prior studies: the adjacency file if given, a
    /// near-square grid of `wards` if given, else the 95-ward surrogate.
    fn graph(&self) -> Result<WardGraph> {
        if let Some(path) = &self.adjacency {
            return WardGraph::read_adjacency_csv(std::fs::File::open(path)?, None);
        }
        match &self.wards {
            Some(WardCount::One(n)) => Ok(WardGraph::near_square_grid(*n)),
            Some(WardCount::Many(_)) => Err(Error::InvalidParameter(
                "this study takes a single ward count".into(),
            )),
            None => Ok(WardGraph::surrogate_county().0),
        }
    }

    fn check_prior(&self, allowed: PriorKind) -> Result<()> {
        match self.prior {
            Some(p) if p != allowed => Err(Error::InvalidParameter(format!(
                "this study uses a {allowed:?} prior, config asks for {p:?}"
            ))),
            _ => Ok(()),
        }
    }

    pub fn efficiency(&self) -> Result<EfficiencyConfig> {
        self.check_prior(PriorKind::Graph)?;
        let d = EfficiencyConfig::default();
        Ok(EfficiencyConfig {
            graph: self.graph()?,
            n_comparisons: self.comparisons.unwrap_or(d.n_comparisons),
            alpha2: self.alpha2.unwrap_or(d.alpha2),
            seeds: self.seeds.clone().unwrap_or(d.seeds),
            settings: self.settings(),
        })
    }

    pub fn scalability(&self) -> Result<ScalabilityConfig> {
        self.check_prior(PriorKind::Wishart)?;
        let d = ScalabilityConfig::default();
        let seeds = self.seeds.clone().unwrap_or_default();
        Ok(ScalabilityConfig {
            sizes: self.wards.as_ref().map(WardCount::sizes).unwrap_or(d.sizes),
            runs_per_size: self.runs_per_size.unwrap_or(if seeds.is_empty() { d.runs_per_size } else { seeds.len() }),
            comparisons_per_ward: self.comparisons_per_ward.unwrap_or(d.comparisons_per_ward),
            true_delta: self.delta.unwrap_or(d.true_delta),
            alpha2: self.alpha2.unwrap_or(d.alpha2),
            mhrw_max_wards: self.mhrw_max_wards.or(d.mhrw_max_wards),
            seed: seeds.first().copied().unwrap_or(d.seed),
            settings: self.settings(),
        })
    }

    pub fn sensitivity(&self) -> Result<SensitivityConfig> {
        self.check_prior(PriorKind::Graph)?;
        let d = SensitivityConfig::default();
        Ok(SensitivityConfig {
            graph: self.graph()?,
            n_comparisons: self.comparisons.unwrap_or(d.n_comparisons),
            alpha2: self.alpha2.unwrap_or(d.alpha2),
            true_delta: self.delta.unwrap_or(d.true_delta),
            tie_shares: self.tie_shares.clone().unwrap_or(d.tie_shares),
            very_strong_factor: d.very_strong_factor,
            seeds: self.seeds.clone().unwrap_or(d.seeds),
            settings: self.settings(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_scenario_file() {
        let f = ScenarioFile::from_toml(
            "wards = [16, 64]\ndelta = 0.5\nprior = \"wishart\"\niterations = 300\nburn_in = 50\nseeds = [4, 5]\n",
        )
        .unwrap();
        let s = f.scalability().unwrap();
        assert_eq!(s.sizes, vec![16, 64]);
        assert_eq!(s.runs_per_size, 2);
        assert_eq!(s.settings.gibbs.n_iterations, 300);
        assert!(f.efficiency().is_err());
        assert!(ScenarioFile::from_toml("colour = 3").is_err());
    }

    #[test]
    fn tiny_efficiency_study() {
        let config = EfficiencyConfig {
            graph: WardGraph::cycle(6),
            n_comparisons: 60,
            seeds: vec![1, 2],
            settings: StudySettings {
                gibbs: SamplerConfig {
                    n_iterations: 200,
                    burn_in: 50,
                    ..Default::default()
                },
                mhrw_iterations: 400,
                mhrw_burn_in: 100,
                replicate_execution: Execution::Parallel,
            },
            ..Default::default()
        };
        let report = run_efficiency_study(&config).unwrap();
        assert_eq!(report.rows.len(), 4);
        assert_eq!(report.rows_for("efficiency", SamplerKind::RandomWalk).count(), 2);
        for row in &report.rows {
            assert!(row.wall_secs > 0.0 && (0.0..=1.0).contains(&row.coverage));
        }
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 5);
    }
}
