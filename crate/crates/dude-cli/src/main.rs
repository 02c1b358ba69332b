//! `dude` — sweep runner and report generator for two-tier decoupled-access
//! analysis. Closed forms and Monte Carlo estimates are emitted side by side
//! as CSV, with a JSON manifest that pins everything needed for bit-exact
//! reproduction.

mod report;
mod sweep;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use dude_core::analytic::{ul_throughput_case2_with, Case2DistanceLaw};
use dude_core::association::case2_peak_density_ratio;
use dude_core::montecarlo::{collect_case2_distances, ks_statistic, EstimatorMode};
use dude_core::scenario::Scenario;
use dude_core::units::{per_m2_to_per_km2, watts_to_dbm};
use dude_core::{case_probabilities, thinning_probability, AssociationPolicy};

use report::{ensure_out_dir, sha256_hex, RunManifest, RuntimeEntry};
use sweep::{run_sweep, Engine, RunOptions, SweepOutput, SweepSpec};

#[derive(Parser)]
#[command(
    name = "dude",
    version,
    about = "Decoupled downlink/uplink association: closed forms vs Monte Carlo"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Master seed override (default: the scenario's master_seed).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Monte Carlo trials (deployments) per estimate.
    #[arg(long, global = true, default_value_t = 2000)]
    trials: u64,

    /// Probe devices per trial.
    #[arg(long, global = true, default_value_t = 50)]
    probes: u32,

    /// Estimator mode: full | translated.
    #[arg(long, global = true, default_value = "full")]
    mode: String,

    /// Relative tolerance override for the spectral-efficiency quadrature.
    #[arg(long, global = true)]
    quad_rel_tol: Option<f64>,

    /// Grid nodes for the regular-lattice engine.
    #[arg(long, global = true, default_value_t = 400)]
    grid_nodes: usize,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ScenarioArg {
    /// Scenario TOML file.
    #[arg(long)]
    scenario: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a scenario, printing the derived quantities.
    Validate(ScenarioArg),
    /// Sweep association-case probabilities (closed form and/or Monte Carlo).
    Assoc {
        #[command(flatten)]
        scenario: ScenarioArg,
        /// Sweep TOML file.
        #[arg(long)]
        sweep: PathBuf,
    },
    /// Conditional serving-distance law at the configured scenario.
    Distance {
        #[command(flatten)]
        scenario: ScenarioArg,
        /// Also dump raw conditional distance samples.
        #[arg(long)]
        dump_raw: bool,
    },
    /// Sweep Case-2 spectral efficiency and throughput.
    Capacity {
        #[command(flatten)]
        scenario: ScenarioArg,
        #[arg(long)]
        sweep: PathBuf,
    },
    /// DRP-vs-DUDe throughput mapping across a density sweep.
    Compare {
        #[command(flatten)]
        scenario: ScenarioArg,
        /// Density ratios λ_S/λ_M to evaluate.
        #[arg(long, value_delimiter = ',', default_value = "1,2,5,10,15,20")]
        ratios: Vec<f64>,
    },
    /// Association probabilities over a regular grid vs the PPP closed forms.
    Grid {
        #[command(flatten)]
        scenario: ScenarioArg,
        #[arg(long)]
        sweep: PathBuf,
    },
}

/// Exit codes: 0 success, 1 config error, 2 numeric failure, 3 partial results.
enum CliError {
    Config(anyhow::Error),
    Numeric(anyhow::Error),
    Partial(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numeric(_) => 2,
            CliError::Partial(_) => 3,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Config(err) => eprintln!("config error: {err:#}"),
                CliError::Numeric(err) => eprintln!("numeric failure: {err:#}"),
                CliError::Partial(msg) => eprintln!("partial results: {msg}"),
            }
            ExitCode::from(e.code())
        }
    }
}

fn load_scenario(path: &Path, seed: Option<u64>) -> Result<(Scenario, String), CliError> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(CliError::Config)?;
    let mut scenario = dude_core::scenario_from_toml_str(&text)
        .map_err(|e| CliError::Config(anyhow!("{}: {e}", path.display())))?;
    if let Some(seed) = seed {
        scenario.master_seed = seed;
    }
    Ok((scenario, sha256_hex(text.as_bytes())))
}

fn load_sweep(path: &Path) -> Result<(SweepSpec, String), CliError> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(CliError::Config)?;
    let spec = SweepSpec::from_toml_str(&text)
        .map_err(|e| CliError::Config(anyhow!("{}: {e:#}", path.display())))?;
    Ok((spec, sha256_hex(text.as_bytes())))
}

fn run_options(cli: &Cli, scenario: &Scenario) -> Result<RunOptions, CliError> {
    let estimator_mode = match cli.mode.as_str() {
        "full" => EstimatorMode::FullDeployment,
        "translated" => EstimatorMode::TranslatedOrigin,
        other => {
            return Err(CliError::Config(anyhow!(
                "unknown estimator mode '{other}' (expected full | translated)"
            )))
        }
    };
    Ok(RunOptions {
        master_seed: cli.seed.unwrap_or(scenario.master_seed),
        n_trials: cli.trials,
        probes_per_trial: cli.probes,
        estimator_mode,
        quad_rel_tol: cli.quad_rel_tol,
        grid_n_bs: cli.grid_nodes,
    })
}

fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Validate(arg) => {
            let (s, _) = load_scenario(&arg.scenario, cli.seed)?;
            print_validation(&s);
            Ok(())
        }
        Command::Assoc { scenario, sweep } => run_sweep_command(
            &cli,
            scenario,
            sweep,
            "assoc",
            Some(vec![SweepOutput::CaseProbs]),
            None,
        ),
        Command::Capacity { scenario, sweep } => run_sweep_command(
            &cli,
            scenario,
            sweep,
            "capacity",
            Some(vec![
                SweepOutput::SpectralEfficiency,
                SweepOutput::Throughput,
            ]),
            None,
        ),
        Command::Grid { scenario, sweep } => run_sweep_command(
            &cli,
            scenario,
            sweep,
            "grid",
            Some(vec![SweepOutput::CaseProbs]),
            Some(vec![Engine::Analytic, Engine::McGrid]),
        ),
        Command::Distance { scenario, dump_raw } => run_distance(&cli, scenario, *dump_raw),
        Command::Compare { scenario, ratios } => run_compare(&cli, scenario, ratios),
    }
}

fn print_validation(s: &Scenario) {
    println!("scenario OK");
    println!(
        "  macro: {:.2} dBm, {} /km² (effective {:.6})",
        watts_to_dbm(s.macro_tier.tx_power_w).unwrap_or(f64::NAN),
        per_m2_to_per_km2(s.macro_tier.intensity_per_m2),
        per_m2_to_per_km2(s.lambda_m_eff()),
    );
    println!(
        "  small: {:.2} dBm, {} /km² (effective {:.6})",
        watts_to_dbm(s.small_tier.tx_power_w).unwrap_or(f64::NAN),
        per_m2_to_per_km2(s.small_tier.intensity_per_m2),
        per_m2_to_per_km2(s.lambda_s_eff()),
    );
    println!(
        "  window: {:?} half-extent {:.1} m, edge {:?}",
        s.window.shape, s.window.half_extent_m, s.window.edge_policy
    );
    match thinning_probability(s) {
        Ok(p) => println!("  interferer thinning p = {p:.3e}"),
        Err(e) => println!("  interferer thinning: {e}"),
    }
    match case_probabilities(s) {
        Ok(p) => println!(
            "  case probabilities: p1 {:.4}, p2 {:.4}, p3 {:.4}, p4 {:.4}",
            p.p1, p.p2, p.p3, p.p4
        ),
        Err(e) => println!("  case probabilities: {e}"),
    }
    if let Ok(r) = case2_peak_density_ratio(s) {
        println!("  decoupling peaks at density ratio {r:.3}");
    }
}

fn run_sweep_command(
    cli: &Cli,
    scenario_arg: &ScenarioArg,
    sweep_path: &Path,
    command: &str,
    forced_outputs: Option<Vec<SweepOutput>>,
    forced_engines: Option<Vec<Engine>>,
) -> Result<(), CliError> {
    let (scenario, scenario_hash) = load_scenario(&scenario_arg.scenario, cli.seed)?;
    let (mut spec, sweep_hash) = load_sweep(sweep_path)?;
    if let Some(outputs) = forced_outputs {
        spec.outputs = outputs;
    }
    if let Some(engines) = forced_engines {
        spec.engines = engines;
    }
    let opts = run_options(cli, &scenario)?;
    ensure_out_dir(&cli.out_dir).map_err(CliError::Config)?;

    let result = run_sweep(&scenario, &spec, &opts);

    let mut manifest = RunManifest::new(
        command,
        opts.master_seed,
        opts.n_trials,
        opts.probes_per_trial,
        mode_label(opts.estimator_mode),
    );
    manifest.scenario_path = scenario_arg.scenario.display().to_string();
    manifest.scenario_sha256 = scenario_hash;
    manifest.sweep_path = Some(sweep_path.display().to_string());
    manifest.sweep_sha256 = Some(sweep_hash);
    manifest.failures = result
        .failures
        .iter()
        .map(|f| format!("value {}: {}", f.value, f.message))
        .collect();
    manifest.runtime_ms = result
        .rows
        .iter()
        .map(|r| RuntimeEntry {
            value: r.value,
            metric: r.metric.clone(),
            engine: r.engine.label().to_string(),
            ms: r.runtime_ms,
        })
        .collect();

    let written = report::write_metric_csvs(&result, spec.variable.label(), &cli.out_dir)
        .map_err(CliError::Numeric)?;
    manifest.outputs = written.clone();
    manifest.write(&cli.out_dir).map_err(CliError::Numeric)?;

    for name in &written {
        println!("wrote {}", cli.out_dir.join(name).display());
    }
    for f in &result.failures {
        eprintln!("point {} failed: {}", f.value, f.message);
    }
    if result.failures.is_empty() {
        Ok(())
    } else if result.rows.is_empty() && result.curves.is_empty() {
        Err(CliError::Numeric(anyhow!(
            "all {} sweep points failed; first: {}",
            result.failures.len(),
            result.failures[0].message
        )))
    } else {
        Err(CliError::Partial(format!(
            "{} of {} sweep points failed",
            result.failures.len(),
            spec.values.len()
        )))
    }
}

fn run_distance(cli: &Cli, scenario_arg: &ScenarioArg, dump_raw: bool) -> Result<(), CliError> {
    use std::io::Write;

    let (scenario, scenario_hash) = load_scenario(&scenario_arg.scenario, cli.seed)?;
    let opts = run_options(cli, &scenario)?;
    ensure_out_dir(&cli.out_dir).map_err(CliError::Config)?;
    let mc = opts.mc_config();

    let mut curves = std::fs::File::create(cli.out_dir.join("distance_pdf.csv"))
        .context("creating distance_pdf.csv")
        .map_err(CliError::Numeric)?;
    writeln!(curves, "# policy [-], engine [-], x [m], density [1/m]")
        .and_then(|_| writeln!(curves, "policy,engine,x_m,density_per_m"))
        .context("writing distance_pdf.csv")
        .map_err(CliError::Numeric)?;

    let mut summary = std::fs::File::create(cli.out_dir.join("distance_summary.csv"))
        .context("creating distance_summary.csv")
        .map_err(CliError::Numeric)?;
    writeln!(
        summary,
        "# policy [-], analytic_mean [m], mc_mean [m], ks [-], n_samples [-]"
    )
    .and_then(|_| writeln!(summary, "policy,analytic_mean_m,mc_mean_m,ks,n_samples"))
    .context("writing distance_summary.csv")
    .map_err(CliError::Numeric)?;

    let mut outputs = vec!["distance_pdf.csv".to_string(), "distance_summary.csv".to_string()];
    let mut raw_file = if dump_raw {
        let mut f = std::fs::File::create(cli.out_dir.join("distance_raw.csv"))
            .context("creating distance_raw.csv")
            .map_err(CliError::Numeric)?;
        writeln!(f, "# policy [-], distance [m]")
            .and_then(|_| writeln!(f, "policy,distance_m"))
            .context("writing distance_raw.csv")
            .map_err(CliError::Numeric)?;
        outputs.push("distance_raw.csv".to_string());
        Some(f)
    } else {
        None
    };

    for policy in [AssociationPolicy::Dude, AssociationPolicy::Drp] {
        let law = Case2DistanceLaw::new(policy, &scenario)
            .map_err(|e| CliError::Numeric(anyhow!("{e}")))?;
        let mut x_hi = 10.0;
        while law.ccdf(x_hi) > 1e-3 {
            x_hi *= 1.25;
        }
        for i in 0..=240 {
            let x = x_hi * i as f64 / 240.0;
            writeln!(curves, "{},analytic,{},{}", policy.label(), x, law.pdf(x))
                .context("writing distance_pdf.csv")
                .map_err(CliError::Numeric)?;
        }

        let mut samples = collect_case2_distances(policy, &scenario, &mc)
            .map_err(|e| CliError::Numeric(anyhow!("{e}")))?;
        let hist = dude_core::EmpiricalDistribution::from_samples(
            &samples.distances_m,
            dude_core::EmpiricalDistribution::auto_bins(samples.distances_m.len()),
        );
        for i in 0..hist.counts.len() {
            writeln!(
                curves,
                "{},mc_ppp,{},{}",
                policy.label(),
                0.5 * (hist.bin_edges[i] + hist.bin_edges[i + 1]),
                hist.density(i)
            )
            .context("writing distance_pdf.csv")
            .map_err(CliError::Numeric)?;
        }
        if let Some(f) = raw_file.as_mut() {
            for d in &samples.distances_m {
                writeln!(f, "{},{d}", policy.label())
                    .context("writing distance_raw.csv")
                    .map_err(CliError::Numeric)?;
            }
        }
        let n = samples.distances_m.len();
        let mc_mean = samples.distances_m.iter().sum::<f64>() / n as f64;
        samples.distances_m.sort_by(f64::total_cmp);
        let ks = ks_statistic(&samples.distances_m, |x| law.cdf(x));
        writeln!(
            summary,
            "{},{},{},{},{}",
            policy.label(),
            law.mean(),
            mc_mean,
            ks,
            n
        )
        .context("writing distance_summary.csv")
        .map_err(CliError::Numeric)?;
        println!(
            "{}: analytic mean {:.2} m, MC mean {:.2} m, KS {:.4} over {} samples",
            policy.label(),
            law.mean(),
            mc_mean,
            ks,
            n
        );
    }

    let mut manifest = RunManifest::new(
        "distance",
        opts.master_seed,
        opts.n_trials,
        opts.probes_per_trial,
        mode_label(opts.estimator_mode),
    );
    manifest.scenario_path = scenario_arg.scenario.display().to_string();
    manifest.scenario_sha256 = scenario_hash;
    manifest.outputs = outputs;
    manifest.write(&cli.out_dir).map_err(CliError::Numeric)?;
    Ok(())
}

fn run_compare(cli: &Cli, scenario_arg: &ScenarioArg, ratios: &[f64]) -> Result<(), CliError> {
    use std::io::Write;

    if ratios.is_empty() {
        return Err(CliError::Config(anyhow!("ratios list is empty")));
    }
    let (scenario, scenario_hash) = load_scenario(&scenario_arg.scenario, cli.seed)?;
    let opts = run_options(cli, &scenario)?;
    ensure_out_dir(&cli.out_dir).map_err(CliError::Config)?;
    let quad = opts.quad_spec();

    let mut rows = Vec::new();
    for &ratio in ratios {
        let (s, _) = sweep::apply_variable(
            &scenario,
            sweep::SweepVariable::DensityRatio,
            ratio,
            opts.grid_n_bs,
        )
        .map_err(CliError::Config)?;
        let drp = ul_throughput_case2_with(AssociationPolicy::Drp, &s, &quad)
            .map_err(|e| CliError::Numeric(anyhow!("ratio {ratio} (DRP): {e}")))?;
        let dude = ul_throughput_case2_with(AssociationPolicy::Dude, &s, &quad)
            .map_err(|e| CliError::Numeric(anyhow!("ratio {ratio} (DUDe): {e}")))?;
        rows.push((
            ratio,
            drp.bits_per_sec / 1e3,
            dude.bits_per_sec / 1e3,
            dude.bits_per_sec / drp.bits_per_sec,
        ));
    }

    let path = cli.out_dir.join("compare.csv");
    let mut f = std::fs::File::create(&path)
        .context("creating compare.csv")
        .map_err(CliError::Numeric)?;
    writeln!(
        f,
        "# density_ratio [-], drp [kbps], dude [kbps], gain_ratio [-]"
    )
    .and_then(|_| writeln!(f, "density_ratio,drp_kbps,dude_kbps,gain_ratio"))
    .context("writing compare.csv")
    .map_err(CliError::Numeric)?;
    for (ratio, drp, dude, gain) in &rows {
        writeln!(f, "{ratio},{drp},{dude},{gain}")
            .context("writing compare.csv")
            .map_err(CliError::Numeric)?;
        println!("ratio {ratio}: DRP {drp:.3} kbps → DUDe {dude:.3} kbps (gain ×{gain:.1})");
    }

    let mut manifest = RunManifest::new(
        "compare",
        opts.master_seed,
        opts.n_trials,
        opts.probes_per_trial,
        mode_label(opts.estimator_mode),
    );
    manifest.scenario_path = scenario_arg.scenario.display().to_string();
    manifest.scenario_sha256 = scenario_hash;
    manifest.outputs = vec!["compare.csv".to_string()];
    manifest.write(&cli.out_dir).map_err(CliError::Numeric)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn mode_label(mode: EstimatorMode) -> &'static str {
    match mode {
        EstimatorMode::FullDeployment => "full_deployment",
        EstimatorMode::TranslatedOrigin => "translated_origin",
    }
}
