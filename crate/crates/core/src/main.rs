use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gqte::bayes_engine::{diagnostics, SamplerConfig};
use gqte::cli_io::{error_line, exit_code, load_data, DrawArchive};
use gqte::density_families::{FamilyKind, GsmPriorDefaults};
use gqte::df_selection::{select_df, DEFAULT_DF_MAX};
use gqte::functionals::{estimate, GqteFunctional};
use gqte::pipeline::{fit_model, DfChoice, ModelChoice};
use gqte::quantile_core::{BasisFamily, LinkFunction, PercentGrid};
use gqte::sim_study::{run_study, Estimator, ScenarioId, ScenarioSpec};
use gqte::{Error, Result};

#[derive(Parser)]
#[command(name = "gqte", version, about = "Bayesian generalized quantile treatment effects")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the model and write a draw archive.
    Fit(FitArgs),
    /// Evaluate a functional from a draw archive.
    Report(ReportArgs),
    /// Print the L1 discrepancy for each candidate df.
    SelectDf(SelectArgs),
    /// Run a simulation study and print relative MSE and bias.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Case sample (headerless, one positive value per line).
    #[arg(long)]
    cases: PathBuf,
    /// Control sample.
    #[arg(long)]
    controls: PathBuf,
    /// Apply y -> y^E to both samples on ingest.
    #[arg(long, value_name = "E")]
    power_transform: Option<f64>,
}

#[derive(Args)]
struct ModelArgs {
    /// Case density family: uniform, lognormal, pareto, gamma or gsm.
    #[arg(long, default_value = "lognormal")]
    family: String,
    /// Number of mixture components for gsm.
    #[arg(long, default_value_t = GsmPriorDefaults::default().components)]
    gsm_components: usize,
    /// identity or log.
    #[arg(long, default_value = "log")]
    link: LinkFunction,
    /// spline, polynomial, normal-quantile or log-survival.
    #[arg(long, default_value = "spline")]
    basis: BasisFamily,
}

impl ModelArgs {
    fn family(&self) -> Result<FamilyKind> {
        FamilyKind::parse(&self.family, self.gsm_components).map_err(Error::Input)
    }
}

#[derive(Args)]
struct SamplerArgs {
    /// Post-burn-in iterations.
    #[arg(long, default_value_t = 20_000)]
    iters: usize,
    #[arg(long, default_value_t = 5_000)]
    burnin: usize,
    #[arg(long, default_value_t = 1)]
    thin: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

impl SamplerArgs {
    fn config(&self) -> SamplerConfig {
        SamplerConfig {
            iterations: self.iters,
            burn_in: self.burnin,
            thin: self.thin,
            seed: self.seed,
            ..Default::default()
        }
    }
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Basis dimension, or "auto" to choose it by the L1 criterion.
    #[arg(long, default_value = "auto")]
    df: String,
    /// Largest candidate when --df auto.
    #[arg(long, default_value_t = DEFAULT_DF_MAX)]
    df_max: usize,
    #[command(flatten)]
    sampler: SamplerArgs,
    /// Archive path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    archive: PathBuf,
    /// qte, ate, moment:R, variance, sd, tailweight or ir:P.
    #[arg(long, default_value = "qte")]
    functional: String,
    /// First grid percentile for qte and tailweight.
    #[arg(long, default_value_t = 0.01)]
    grid_start: f64,
    #[arg(long, default_value_t = 0.99)]
    grid_end: f64,
    #[arg(long, default_value_t = 99)]
    grid_points: usize,
    /// csv or json.
    #[arg(long, default_value = "csv")]
    format: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SelectArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = DEFAULT_DF_MAX)]
    df_max: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// A, B, C, D or E.
    #[arg(long)]
    scenario: String,
    #[arg(long, default_value_t = 20)]
    replicates: usize,
    /// Comma-separated: baseline, oracle, gqte-<family>.
    #[arg(long, default_value = "baseline,gqte-lognormal")]
    estimators: String,
    #[arg(long, default_value_t = 100)]
    n1: usize,
    #[arg(long, default_value_t = 1000)]
    n2: usize,
    /// Post-burn-in iterations per GQTE chain.
    #[arg(long, default_value_t = 2_000)]
    iters: usize,
    #[arg(long, default_value_t = 500)]
    burnin: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => Ok(fs::write(path, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn parse_df(df: &str, df_max: usize) -> Result<DfChoice> {
    if df.eq_ignore_ascii_case("auto") {
        if df_max == 0 {
            return Err(Error::Input("--df-max must be at least 1".into()));
        }
        return Ok(DfChoice::Auto { max: df_max });
    }
    df.parse()
        .map(DfChoice::Fixed)
        .map_err(|_| Error::Input(format!("--df expects a non-negative integer or 'auto', got '{df}'")))
}

fn check_power(power: Option<f64>) -> Result<()> {
    match power {
        Some(e) if !(e > 0.0 && e.is_finite()) => {
            Err(Error::Input(format!("--power-transform must be positive, got {e}")))
        }
        _ => Ok(()),
    }
}

fn cmd_fit(args: &FitArgs) -> Result<()> {
    check_power(args.data.power_transform)?;
    let model = ModelChoice::new(
        args.model.family()?,
        args.model.link,
        args.model.basis,
        parse_df(&args.df, args.df_max)?,
    );
    let data = load_data(&args.data.cases, &args.data.controls, args.data.power_transform)?;
    let fit = fit_model(&data, &model, &args.sampler.config())?;
    let summary = diagnostics(&fit.draws)?;
    if let Some(sel) = &fit.selection {
        println!("selected df: {}", sel.chosen);
    }
    println!("basis: {} (df {})", fit.spec.basis.family().name(), fit.spec.basis.df());
    print!("{summary}");
    DrawArchive::new(model, fit, data, args.data.power_transform).write(&args.out)
}

fn cmd_report(args: &ReportArgs) -> Result<()> {
    let archive = DrawArchive::read(&args.archive)?;
    let mut functional: GqteFunctional = args.functional.parse()?;
    if functional.grid().is_some() {
        let grid = PercentGrid::equispaced(args.grid_start, args.grid_end, args.grid_points)?;
        functional = functional.with_grid(grid);
    }
    let est = estimate(&functional, &archive.draws, &archive.data, &archive.spec)?;
    let text = match args.format.as_str() {
        "csv" => est.to_csv(),
        "json" => serde_json::to_string_pretty(&est)? + "\n",
        other => return Err(Error::Input(format!("unknown format '{other}' (expected csv or json)"))),
    };
    emit(args.out.as_deref(), &text)
}

fn cmd_select(args: &SelectArgs) -> Result<()> {
    check_power(args.data.power_transform)?;
    let data = load_data(&args.data.cases, &args.data.controls, args.data.power_transform)?;
    let sel = select_df(&data, args.model.family()?, args.model.link, args.model.basis, args.df_max)?;
    let mut text = format!("# chosen,{}\ndf,discrepancy\n", sel.chosen);
    for c in &sel.candidates {
        text.push_str(&format!("{},{}\n", c.df, c.discrepancy));
    }
    emit(args.out.as_deref(), &text)
}

fn parse_estimator(token: &str, sampler: &SamplerConfig) -> Result<Estimator> {
    match token.trim() {
        "baseline" => Ok(Estimator::Baseline),
        "oracle" => Ok(Estimator::Oracle),
        t => match t.strip_prefix("gqte-") {
            Some(family) => {
                let kind = FamilyKind::parse(family, GsmPriorDefaults::default().components).map_err(Error::Input)?;
                Ok(Estimator::gqte(kind, sampler.clone()))
            }
            None => Err(Error::Input(format!(
                "unknown estimator '{t}' (expected baseline, oracle or gqte-<family>)"
            ))),
        },
    }
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let id: ScenarioId = args.scenario.parse()?;
    let sampler = SamplerConfig {
        iterations: args.iters,
        burn_in: args.burnin,
        ..Default::default()
    };
    let estimators = args
        .estimators
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| parse_estimator(t, &sampler))
        .collect::<Result<Vec<_>>>()?;
    let spec = ScenarioSpec::new(id).with_sizes(args.n1, args.n2);
    let report = run_study(&spec, &estimators, args.replicates, args.seed)?;
    emit(args.out.as_deref(), &report.to_csv())
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("GQTE_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Input(format!("GQTE_THREADS must be a positive integer, got '{v}'")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Input(format!("cannot size the worker pool: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Report(a) => cmd_report(a),
        Command::SelectDf(a) => cmd_select(a),
        Command::Simulate(a) => cmd_simulate(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let rendered = e.to_string();
            let first = rendered.lines().next().unwrap_or("invalid arguments");
            eprintln!("error[usage]: {}", first.trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
