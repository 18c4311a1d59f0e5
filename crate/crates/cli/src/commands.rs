// SPDX-License-Identifier: MIT OR Apache-2.0

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use boundedcp::bar_model::{simulate_mcp_bar, InitialState, Stitching};
use boundedcp::cusum::{
    critical_value, cusum_statistic, decide, simulate_critical_values, CriticalValueSource, TestOutcome,
    DEFAULT_CV_GRID, DEFAULT_CV_REPS, DEFAULT_CV_SEED, DEFAULT_K0,
};
use boundedcp::evaluation::{
    model_fit_stats, scenario, scenario_ids, segmentation_experiment, size_power_experiment, ExperimentConfig,
    FitStats, MetricReport, ModelSource,
};
use boundedcp::rng::stream_rng;
use boundedcp::segmentation::{
    exhaustive_m_sweep, s_ga, segment_ranges, GaConfig, MdlFit, SegmentConditioning, SegmentLikelihood,
};
use boundedcp::{BarError, BarParams, BoundedSeries, Method, SegmentedModel};
use clap::{ArgAction, Args, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::report::{emit, load_series, to_json, CliResult, Failure, InputInfo, Manifest, Report};
use crate::series_io::format_series;

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a BAR(1) or piecewise BAR(1) series.
    Simulate(SimulateArgs),
    /// CUSUM test of "no parameter change".
    Test(TestArgs),
    /// Estimate the number and locations of change-points (MDL + genetic search).
    Segment(SegmentArgs),
    /// Monte Carlo studies: CUSUM size/power or segmentation accuracy.
    Experiment(ExperimentArgs),
}

pub fn run(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Simulate(a) => simulate(a),
        Command::Test(a) => test(a),
        Command::Segment(a) => segment(a),
        Command::Experiment(a) => experiment(a),
    }
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse::<Method>().map_err(|e| e.to_string())
}

fn unknown_scenario(id: &str) -> Failure {
    Failure::usage(format!("unknown scenario '{id}'; valid ids: {}", scenario_ids().join(", ")))
}

fn stem_manifest_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

// ---------------------------------------------------------------------------
// simulate

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StitchingArg {
    /// Each segment continues from the last value of the previous one.
    Continuous,
    /// Each segment restarts from its stationary marginal.
    Restart,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// Series length.
    #[arg(long)]
    n: usize,
    /// Upper bound N (required with --p/--rho).
    #[arg(long)]
    upper_bound: Option<u32>,
    /// Marginal mean parameter p for a single-regime series.
    #[arg(long, requires = "rho")]
    p: Option<f64>,
    /// Autocorrelation ρ for a single-regime series.
    #[arg(long, requires = "p")]
    rho: Option<f64>,
    /// Piecewise model file (TOML, or JSON by extension) with `upper_bound`,
    /// `change_points` and `segment_params = [{ p, rho }, ...]`.
    #[arg(long, conflicts_with_all = ["p", "rho", "scenario"])]
    model: Option<PathBuf>,
    /// Built-in design (T1…T33, A1…A3, B1…B3) at this n.
    #[arg(long, conflicts_with_all = ["p", "rho"])]
    scenario: Option<String>,
    #[arg(long, value_enum, default_value_t = StitchingArg::Continuous)]
    stitching: StitchingArg,
    /// Master seed (falls back to $BOUNDEDCP_SEED, then 0).
    #[arg(long, env = "BOUNDEDCP_SEED")]
    seed: Option<u64>,
    /// Series output path; `-` for stdout.
    #[arg(short, long, default_value = "-")]
    output: PathBuf,
    /// Manifest path. Defaults to `<output>.manifest.json` when writing a file.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

fn read_model_file(path: &Path) -> CliResult<SegmentedModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
    let parsed = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| e.to_string())
    } else {
        toml::from_str(&text).map_err(|e| e.to_string())
    };
    parsed.map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn simulation_model(a: &SimulateArgs) -> CliResult<SegmentedModel> {
    let model = if let Some(path) = &a.model {
        read_model_file(path)?
    } else if let Some(id) = &a.scenario {
        scenario(id).ok_or_else(|| unknown_scenario(id))?.model(a.n).map_err(|e| Failure::usage(e.to_string()))?
    } else {
        let (Some(p), Some(rho)) = (a.p, a.rho) else {
            return Err(Failure::usage("give --p and --rho, --model, or --scenario"));
        };
        let nb = a.upper_bound.ok_or_else(|| Failure::usage("--upper-bound is required with --p/--rho"))?;
        let params = BarParams::new(p, rho).map_err(|e| Failure::usage(e.to_string()))?;
        SegmentedModel::new(nb, vec![], vec![params]).map_err(|e| Failure::usage(e.to_string()))?
    };
    if let Some(nb) = a.upper_bound {
        if nb != model.upper_bound() {
            return Err(Failure::usage(format!("--upper-bound {nb} disagrees with the model's N = {}", model.upper_bound())));
        }
    }
    Ok(model)
}

#[derive(Serialize)]
struct SimulateResult<'a> {
    model: &'a SegmentedModel,
    initial: Option<u32>,
}

fn simulate(a: SimulateArgs) -> CliResult<()> {
    let seed = a.seed.unwrap_or(0);
    let manifest = Manifest::new("simulate", &a, seed, a.seed.is_some());
    let model = simulation_model(&a)?;
    let stitching = match a.stitching {
        StitchingArg::Continuous => Stitching::Continuous,
        StitchingArg::Restart => Stitching::Restart,
    };
    let series = simulate_mcp_bar(&model, a.n, &mut stream_rng(seed, 0), InitialState::Stationary, stitching)
        .map_err(|e| Failure::usage(e.to_string()))?;
    emit(&a.output, &format_series(series.counts()))?;
    let manifest_path = match (&a.manifest, a.output == Path::new("-")) {
        (Some(p), _) => Some(p.clone()),
        (None, false) => Some(stem_manifest_path(&a.output)),
        (None, true) => None,
    };
    if let Some(path) = manifest_path {
        let manifest = manifest.finish();
        let report = Report {
            manifest: &manifest,
            input: Some(InputInfo { n: series.len(), upper_bound: series.upper_bound() }),
            result: SimulateResult { model: &model, initial: series.initial() },
        };
        emit(&path, &to_json(&report))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// test

#[derive(Debug, Args, Serialize)]
pub struct TestArgs {
    /// Series file (`-` for stdin).
    input: PathBuf,
    /// Upper bound N; inferred as the observed maximum (with a warning) if absent.
    #[arg(long)]
    upper_bound: Option<u32>,
    /// Estimator(s) to base the statistic on.
    #[arg(long = "method", value_parser = parse_method, default_values = ["cls", "mql", "cml"])]
    methods: Vec<Method>,
    /// Significance level(s). Levels other than 0.01 and 0.05 use simulated critical values.
    #[arg(long = "gamma", default_values_t = [0.01, 0.05])]
    gammas: Vec<f64>,
    /// Smallest prefix considered by the CUSUM sweep.
    #[arg(long, default_value_t = DEFAULT_K0)]
    k0: usize,
    /// Grid size for simulated critical values.
    #[arg(long, default_value_t = DEFAULT_CV_GRID)]
    cv_grid: usize,
    /// Replications for simulated critical values.
    #[arg(long, default_value_t = DEFAULT_CV_REPS)]
    cv_reps: usize,
    /// Seed for simulated critical values (falls back to $BOUNDEDCP_SEED).
    #[arg(long, env = "BOUNDEDCP_SEED")]
    seed: Option<u64>,
    /// Write the JSON report here (`-` prints it instead of the table).
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Serialize)]
struct TestResult {
    k0: usize,
    tests: Vec<TestOutcome>,
}

fn critical_values(a: &TestArgs, seed: u64) -> CliResult<Vec<(f64, CriticalValueSource)>> {
    let mut out = vec![(f64::NAN, CriticalValueSource::Table); a.gammas.len()];
    let mut missing = Vec::new();
    for (i, &g) in a.gammas.iter().enumerate() {
        match critical_value(g) {
            Ok(cv) => out[i].0 = cv,
            Err(BarError::UnsupportedLevel(_)) => missing.push(i),
            Err(e) => return Err(e.into()),
        }
    }
    if !missing.is_empty() {
        let levels: Vec<f64> = missing.iter().map(|&i| a.gammas[i]).collect();
        eprintln!(
            "note: no tabulated critical value for level(s) {levels:?}; simulating (grid {}, {} replications, seed {seed})",
            a.cv_grid, a.cv_reps
        );
        let cvs = simulate_critical_values(&levels, a.cv_grid, a.cv_reps, seed)?;
        let source = CriticalValueSource::Simulated { grid: a.cv_grid, reps: a.cv_reps, seed };
        for (&i, cv) in missing.iter().zip(cvs) {
            out[i] = (cv, source);
        }
    }
    Ok(out)
}

fn test(a: TestArgs) -> CliResult<()> {
    let seed = a.seed.unwrap_or(DEFAULT_CV_SEED);
    let mut manifest = Manifest::new("test", &a, seed, a.seed.is_some());
    let input = load_series(&a.input, a.upper_bound)?;
    manifest.input_sha256 = Some(input.sha256.clone());
    let series = &input.series;
    let cvs = critical_values(&a, seed)?;
    let mut tests = Vec::new();
    for &method in &a.methods {
        let stat = cusum_statistic(series, method, a.k0)?;
        for (&g, &(cv, source)) in a.gammas.iter().zip(&cvs) {
            tests.push(decide(&stat, g, cv, source));
        }
    }
    let result = TestResult { k0: a.k0, tests };
    let manifest = manifest.finish();
    let report = Report { manifest: &manifest, input: Some(input_info(series)), result: &result };
    write_outputs(a.json.as_deref(), &report, || test_table(series, &result))
}

fn input_info(series: &BoundedSeries) -> InputInfo {
    InputInfo { n: series.len(), upper_bound: series.upper_bound() }
}

fn test_table(series: &BoundedSeries, r: &TestResult) -> String {
    let mut s = format!("n = {}, N = {}, k0 = {}\n", series.len(), series.upper_bound(), r.k0);
    s.push_str("method  statistic   argmax_k  rho_hat   p_hat    gamma   critical  source     decision\n");
    for t in &r.tests {
        let source = match t.critical_value_source {
            CriticalValueSource::Table => "table",
            CriticalValueSource::Simulated { .. } => "simulated",
        };
        let _ = writeln!(
            s,
            "{:<7} {:<11.4} {:<9} {:<9.4} {:<8.4} {:<7} {:<9.4} {:<10} {}",
            t.method.to_string(),
            t.statistic,
            t.argmax_k,
            t.full_sample.params.rho(),
            t.full_sample.params.p(),
            t.gamma,
            t.critical_value,
            source,
            if t.reject { "reject H0" } else { "do not reject" }
        );
    }
    s
}

fn write_outputs<T: Serialize>(json: Option<&Path>, report: &T, text: impl FnOnce() -> String) -> CliResult<()> {
    match json {
        Some(p) if p == Path::new("-") => emit(p, &to_json(report)),
        Some(p) => {
            emit(p, &to_json(report))?;
            emit(Path::new("-"), &text())
        }
        None => emit(Path::new("-"), &text()),
    }
}

// ---------------------------------------------------------------------------
// segment

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LikelihoodArg {
    /// Score each segment at its closed-form CLS estimate.
    ClsPlugin,
    /// Score each segment at its CML estimate.
    FullCml,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConditioningArg {
    /// Each segment conditions on its own first observation.
    OwnFirst,
    /// Each segment conditions on the last observation of the previous one.
    Previous,
}

/// Genetic-search settings shared by `segment` and `experiment`.
#[derive(Debug, Clone, Args, Serialize)]
pub struct GaArgs {
    /// Minimum relative spacing between change-points (default 10/n).
    #[arg(long)]
    epsilon_lambda: Option<f64>,
    /// Crossover fraction.
    #[arg(long, default_value_t = 0.55)]
    cf: f64,
    /// Maximum generations per level.
    #[arg(long, default_value_t = 300)]
    generations: usize,
    /// Population size is this times the number of change-points.
    #[arg(long, default_value_t = 10)]
    population_scale: usize,
    /// Largest number of change-points considered.
    #[arg(long, default_value_t = 10)]
    max_cp: usize,
    /// Stop a level after this many generations without improvement (0 disables).
    #[arg(long, default_value_t = 50)]
    stall_generations: usize,
    /// Also score the no-change model [segment: on; experiment: off].
    #[arg(long, action = ArgAction::Set, num_args = 0..=1, default_missing_value = "true")]
    compare_m0: Option<bool>,
    #[arg(long, value_enum, default_value_t = LikelihoodArg::ClsPlugin)]
    likelihood: LikelihoodArg,
    #[arg(long, value_enum, default_value_t = ConditioningArg::OwnFirst)]
    conditioning: ConditioningArg,
}

impl GaArgs {
    fn config(&self, seed: u64, default_compare_m0: bool) -> CliResult<GaConfig> {
        let cfg = GaConfig {
            population_scale: self.population_scale,
            crossover_fraction: self.cf,
            max_generations: self.generations,
            stall_generations: (self.stall_generations > 0).then_some(self.stall_generations),
            epsilon_lambda: self.epsilon_lambda,
            max_changepoints_cap: self.max_cp,
            seed,
            compare_m0: self.compare_m0.unwrap_or(default_compare_m0),
            likelihood: match self.likelihood {
                LikelihoodArg::ClsPlugin => SegmentLikelihood::ClsPlugin,
                LikelihoodArg::FullCml => SegmentLikelihood::FullCml,
            },
            conditioning: match self.conditioning {
                ConditioningArg::OwnFirst => SegmentConditioning::OwnFirstObservation,
                ConditioningArg::Previous => SegmentConditioning::PreviousObservation,
            },
            ..GaConfig::default()
        };
        cfg.validate().map_err(|e| Failure::usage(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Debug, Args, Serialize)]
pub struct SegmentArgs {
    /// Series file (`-` for stdin).
    input: PathBuf,
    /// Upper bound N; inferred as the observed maximum (with a warning) if absent.
    #[arg(long)]
    upper_bound: Option<u32>,
    #[command(flatten)]
    ga: GaArgs,
    /// Search every feasible number of change-points instead of stopping early.
    #[arg(long)]
    exhaustive_m: bool,
    /// Master seed (falls back to $BOUNDEDCP_SEED, then 0).
    #[arg(long, env = "BOUNDEDCP_SEED")]
    seed: Option<u64>,
    /// Write the JSON report here (`-` prints it instead of the summary).
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Serialize)]
struct SegmentResult<'a> {
    fit: &'a MdlFit,
    fit_stats: FitStats,
    /// How `k` in AIC/BIC is counted.
    k_convention: &'static str,
}

fn segment(a: SegmentArgs) -> CliResult<()> {
    let seed = a.seed.unwrap_or(0);
    let mut manifest = Manifest::new("segment", &a, seed, a.seed.is_some());
    let cfg = a.ga.config(seed, true)?;
    let input = load_series(&a.input, a.upper_bound)?;
    manifest.input_sha256 = Some(input.sha256.clone());
    let series = &input.series;
    let fit = if a.exhaustive_m { exhaustive_m_sweep(series, &cfg)? } else { s_ga(series, &cfg)? };
    let stats = model_fit_stats(series, &fit);
    let result = SegmentResult { fit: &fit, fit_stats: stats, k_convention: "2(m+1)+m" };
    let manifest = manifest.finish();
    let report = Report { manifest: &manifest, input: Some(input_info(series)), result: &result };
    write_outputs(a.json.as_deref(), &report, || segment_summary(series, &fit, &stats))
}

fn roman(i: usize) -> String {
    const R: [&str; 12] = ["I", "II", "III", "IV", "V", "VI", "VII", "VIII", "IX", "X", "XI", "XII"];
    R.get(i).map_or_else(|| (i + 1).to_string(), |s| s.to_string())
}

fn segment_summary(series: &BoundedSeries, fit: &MdlFit, st: &FitStats) -> String {
    let n = series.len();
    let join = |v: Vec<String>| if v.is_empty() { "-".to_string() } else { v.join(", ") };
    let mut s = format!(
        "n = {n}, N = {}, epsilon_lambda = {:.4} (minimum spacing {})\n",
        series.upper_bound(),
        fit.epsilon_lambda,
        fit.min_spacing
    );
    let _ = writeln!(s, "m_hat = {}", fit.m_hat);
    let _ = writeln!(s, "tau_hat = {}", join(fit.tau_hat.iter().map(|t| t.to_string()).collect()));
    let _ = writeln!(s, "lambda_hat = {}", join(fit.lambda_hat.iter().map(|l| format!("{l:.4}")).collect()));
    s.push_str("segment  range       rho_hat   p_hat     loglik\n");
    for (j, ((a, b), (e, ll))) in segment_ranges(n, &fit.tau_hat)
        .into_iter()
        .zip(fit.segment_estimates.iter().zip(&fit.per_segment_loglik))
        .enumerate()
    {
        let _ = writeln!(
            s,
            "{:<8} {:<11} {:<9.4} {:<9.4} {:.4}{}",
            roman(j),
            format!("{a}-{b}"),
            e.params.rho(),
            e.params.p(),
            ll,
            if e.clamped { "  (clamped)" } else { "" }
        );
    }
    let _ = write!(s, "MDL = {:.4}", fit.mdl);
    if let Some(m0) = fit.mdl_m0 {
        let _ = write!(s, " (no change: {m0:.4})");
    }
    let _ = writeln!(s, "\nAIC = {:.4}, BIC = {:.4}, RMS = {:.4} (k = {})", st.aic, st.bic, st.rms, st.k);
    s
}

// ---------------------------------------------------------------------------
// experiment

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Battery {
    /// Rejection rates of the CUSUM tests.
    SizePower,
    /// Accuracy of the S-GA segmentation.
    Segmentation,
}

#[derive(Debug, Args, Serialize)]
pub struct ExperimentArgs {
    #[arg(long, value_enum)]
    battery: Option<Battery>,
    /// Built-in scenario id (repeatable).
    #[arg(long = "scenario")]
    scenarios: Vec<String>,
    /// Battery file (TOML): battery, scenarios, n, reps, seed, and `[[custom]]` models.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Sample size (repeatable). Default: 200, 500, 1000 (size-power) or 200, 500, 800.
    #[arg(long = "n")]
    sizes: Vec<usize>,
    /// Replications per scenario and n. Default: 1000 (size-power) or 200.
    #[arg(long)]
    reps: Option<usize>,
    /// Master seed (falls back to $BOUNDEDCP_SEED, then 0).
    #[arg(long, env = "BOUNDEDCP_SEED")]
    seed: Option<u64>,
    #[arg(long = "method", value_parser = parse_method, default_values = ["cls", "mql", "cml"])]
    methods: Vec<Method>,
    #[arg(long = "gamma", default_values_t = [0.01, 0.05])]
    gammas: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_K0)]
    k0: usize,
    #[command(flatten)]
    ga: GaArgs,
    /// CSV table path (default: stdout).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// JSON report path (`-` for stdout, replacing the CSV).
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct BatterySpec {
    battery: Option<Battery>,
    #[serde(default)]
    scenarios: Vec<String>,
    #[serde(default)]
    n: Vec<usize>,
    reps: Option<usize>,
    seed: Option<u64>,
    #[serde(default)]
    custom: Vec<CustomModel>,
}

#[derive(Debug, Deserialize, Serialize)]
struct CustomModel {
    name: String,
    #[serde(flatten)]
    model: SegmentedModel,
}

#[derive(Serialize)]
struct ExperimentResult {
    battery: Battery,
    /// How `(scenario, n, replication)` maps to random streams.
    seeding: &'static str,
    reports: Vec<MetricReport>,
}

fn experiment(a: ExperimentArgs) -> CliResult<()> {
    let spec = match &a.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
            Some(toml::from_str::<BatterySpec>(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?)
        }
        None => None,
    };
    let battery = a
        .battery
        .or_else(|| spec.as_ref().and_then(|s| s.battery))
        .ok_or_else(|| Failure::usage("choose --battery size-power|segmentation (or set `battery` in --spec)"))?;
    let explicit_seed = a.seed.or_else(|| spec.as_ref().and_then(|s| s.seed));
    let seed = explicit_seed.unwrap_or(0);
    let manifest = Manifest::new("experiment", &(&a, &spec), seed, explicit_seed.is_some());

    let mut sources: Vec<(String, ModelSource)> = Vec::new();
    for id in a.scenarios.iter().chain(spec.iter().flat_map(|s| s.scenarios.iter())) {
        let sc = scenario(id).ok_or_else(|| unknown_scenario(id))?;
        sources.push((sc.id.to_string(), ModelSource::Scenario(sc.id.to_string())));
    }
    for c in spec.iter().flat_map(|s| s.custom.iter()) {
        sources.push((c.name.clone(), ModelSource::Custom(c.model.clone())));
    }
    if sources.is_empty() {
        return Err(unknown_scenario("(none given)"));
    }
    let mut sizes = a.sizes.clone();
    if sizes.is_empty() {
        sizes = spec.as_ref().map(|s| s.n.clone()).unwrap_or_default();
    }
    if sizes.is_empty() {
        sizes = match battery {
            Battery::SizePower => vec![200, 500, 1000],
            Battery::Segmentation => vec![200, 500, 800],
        };
    }
    let reps = a.reps.or_else(|| spec.as_ref().and_then(|s| s.reps)).unwrap_or(match battery {
        Battery::SizePower => 1000,
        Battery::Segmentation => 200,
    });
    let ga = a.ga.config(0, false)?;

    let mut reports = Vec::new();
    for (label, source) in sources {
        let mut cfg = ExperimentConfig::new(source, sizes.clone(), reps, seed);
        cfg.methods = a.methods.clone();
        cfg.gammas = a.gammas.clone();
        cfg.k0 = a.k0;
        cfg.ga = ga.clone();
        cfg.validate()?;
        let rows = match battery {
            Battery::SizePower => size_power_experiment(&cfg)?,
            Battery::Segmentation => segmentation_experiment(&cfg)?,
        };
        reports.extend(rows.into_iter().map(|r| MetricReport { scenario: label.clone(), ..r }));
    }
    let result = ExperimentResult {
        battery,
        seeding: "replication r at size n simulates from stream r of derive_seed(seed, n)",
        reports,
    };
    let manifest = manifest.finish();
    let csv = experiment_csv(&result)?;
    if let Some(p) = &a.json {
        emit(p, &to_json(&Report { manifest: &manifest, input: None, result: &result }))?;
    }
    match &a.csv {
        Some(p) => emit(p, &csv),
        None if a.json.as_deref() == Some(Path::new("-")) => Ok(()),
        None => emit(Path::new("-"), &csv),
    }
}

fn num(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        format!("{x:.6}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn list<T>(v: &[T], f: impl Fn(&T) -> String) -> String {
    v.iter().map(f).collect::<Vec<_>>().join(";")
}

fn experiment_csv(r: &ExperimentResult) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Failure::data(format!("csv: {e}"));
    match r.battery {
        Battery::SizePower => {
            w.write_record([
                "scenario",
                "n",
                "method",
                "gamma",
                "critical_value",
                "critical_value_source",
                "rate",
                "rejections",
                "valid",
                "skipped",
            ])
            .map_err(io)?;
            for rep in &r.reports {
                for row in &rep.size_or_power {
                    let source = match row.critical_value_source {
                        CriticalValueSource::Table => "table",
                        CriticalValueSource::Simulated { .. } => "simulated",
                    };
                    w.write_record([
                        rep.scenario.clone(),
                        rep.n.to_string(),
                        row.method.to_string(),
                        row.gamma.to_string(),
                        num(row.critical_value),
                        source.to_string(),
                        num(row.rate),
                        row.rejections.to_string(),
                        row.valid.to_string(),
                        row.skipped.to_string(),
                    ])
                    .map_err(io)?;
                }
            }
        }
        Battery::Segmentation => {
            w.write_record([
                "scenario",
                "n",
                "replications",
                "skipped",
                "m_true",
                "cr_m",
                "zeta_under",
                "zeta_over",
                "d_mean",
                "bias",
                "mse",
                "m_histogram",
            ])
            .map_err(io)?;
            for rep in &r.reports {
                let Some(s) = &rep.segmentation else { continue };
                w.write_record([
                    rep.scenario.clone(),
                    rep.n.to_string(),
                    rep.replications.to_string(),
                    rep.skipped.to_string(),
                    s.m_true.to_string(),
                    num(s.cr_m),
                    opt(s.zeta_under),
                    opt(s.zeta_over),
                    opt(s.d_mean),
                    list(&s.bias, |&x| num(x)),
                    list(&s.mse, |&x| num(x)),
                    list(&s.m_histogram, |c| c.to_string()),
                ])
                .map_err(io)?;
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| Failure::data(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}
