use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};

use focksep::config::{parse_config, RunConfig};
use focksep::diagnostics::{collision_frequencies, trial_seed, zero_one_experiment, Experiment};
use focksep::kernel::trace_identity_check;
use focksep::radial_law::LawCache;
use focksep::report::{emit_report, svg_scatter, Emit, Format, RhoRow, RhoTable, TraceReport};
use focksep::verify::run_suite;
use focksep::weight::classify_critical_sum_with_band;
use focksep::{Error, HybridSampler, PoissonSampler, RadialModel, RadialWeight, Result, SampleKind};

#[derive(Parser)]
#[command(name = "focksep", version, about = "Separation statistics for hybrid radial point processes")]
struct Cli {
    /// JSON run configuration (a bare weight object is accepted too).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the seed of the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "json")]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Convergence verdict for the critical sum.
    Classify,
    /// Tabulates rho at the configured points.
    Rho,
    /// Draws one hybrid or Poisson sample.
    Sample,
    /// Cell collision frequencies against their predictions.
    Collide,
    /// Runs the identity and bound suite; exits with 2 on failure.
    Verify,
    /// Compares the squared cell probabilities with the kernel double integral.
    TraceIdentity,
    /// Critical-sum verdict next to the empirical separation trend.
    ZeroOne,
}

fn load_config(cli: &Cli) -> Result<Option<RunConfig>> {
    let Some(path) = &cli.config else { return Ok(None) };
    let text = std::fs::read_to_string(path)?;
    let mut cfg = parse_config(&text)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(w) = cli.workers {
        cfg.workers = Some(w);
    }
    Ok(Some(cfg))
}

fn require(cfg: Option<RunConfig>) -> Result<RunConfig> {
    cfg.ok_or_else(|| Error::InvalidParameter("this command needs --config".into()))
}

fn write(result: &dyn Emit, format: Format, out: &Path) -> Result<()> {
    let path = emit_report(result, format, out)?;
    println!("{}", path.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<ExitCode> {
    let cfg = load_config(cli)?;
    let workers = cli.workers.or(cfg.as_ref().and_then(|c| c.workers));
    if workers == Some(0) {
        return Err(Error::InvalidParameter("--workers must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.as_ref().and_then(|c| c.out.as_ref().map(PathBuf::from)))
        .unwrap_or_else(|| PathBuf::from("."));
    pool.install(|| dispatch(cli.command, cfg, cli, &out))
}

fn dispatch(command: Command, cfg: Option<RunConfig>, cli: &Cli, out: &Path) -> Result<ExitCode> {
    let format = cli.format;
    let cache = LawCache::from_env();
    match command {
        Command::Verify => {
            let solver = cfg.as_ref().map(|c| c.solver).unwrap_or_default();
            let seed = cli.seed.or(cfg.as_ref().map(|c| c.seed)).unwrap_or(0);
            let report = run_suite(&solver, seed)?;
            for c in &report.checks {
                let tag = match (c.passed, c.required) {
                    (true, _) => "ok",
                    (false, true) => "FAIL",
                    (false, false) => "info",
                };
                eprintln!("{tag:>4}  {}  {:.3e} (limit {:.3e})", c.name, c.measured, c.threshold);
            }
            write(&report, format, out)?;
            return Ok(if report.passed { ExitCode::SUCCESS } else { ExitCode::from(2) });
        }
        Command::Classify => {
            let cfg = require(cfg)?;
            let w = RadialWeight::from_spec(&cfg.weight)?;
            let report = classify_critical_sum_with_band(&w, cfg.classify.n_max, &cfg.solver, cfg.classify.band)?;
            write(&report, format, out)?;
        }
        Command::Rho => {
            let cfg = require(cfg)?;
            let w = RadialWeight::from_spec(&cfg.weight)?;
            let rows = cfg
                .rho
                .x
                .iter()
                .map(|&x| Ok(RhoRow { x, rho: w.rho_at(x, &cfg.solver)? }))
                .collect::<Result<_>>()?;
            write(&RhoTable { weight: cfg.weight.clone(), rows }, format, out)?;
        }
        Command::Sample => {
            let cfg = require(cfg)?;
            let p = &cfg.sample;
            let w = RadialWeight::from_spec(&cfg.weight)?;
            let model = Arc::new(RadialModel::new(&w, &cfg.solver)?);
            let sample = match p.kind {
                SampleKind::Hybrid => HybridSampler::new(model, p.window_r, p.eps, cache.as_ref())?.sample(cfg.seed),
                SampleKind::Poisson => PoissonSampler::new(&model, p.window_r)?.sample(cfg.seed, p.intensity_scale)?,
            };
            write(&sample, format, out)?;
            if format == Format::Json {
                let path = out.join("sample.jsonl");
                std::fs::write(&path, sample.to_jsonl())?;
                println!("{}", path.display());
            }
        }
        Command::Collide => {
            let cfg = require(cfg)?;
            let report = collision_frequencies(&cfg.collide_experiment(), &cfg.solver, cache.as_ref())?;
            write(&report, format, out)?;
        }
        Command::TraceIdentity => {
            let cfg = require(cfg)?;
            let w = RadialWeight::from_spec(&cfg.weight)?;
            let model = Arc::new(RadialModel::new(&w, &cfg.solver)?);
            let quadrature = cfg.trace_quadrature();
            let results = cfg
                .trace_identity
                .n
                .iter()
                .map(|&n| trace_identity_check(model.clone(), n, quadrature))
                .collect::<Result<_>>()?;
            write(&TraceReport { weight: cfg.weight.clone(), quadrature, results }, format, out)?;
        }
        Command::ZeroOne => {
            let cfg = require(cfg)?;
            let exp_cfg = cfg.zero_one_experiment();
            if format == Format::Svg {
                // one scatter per window, all from the first trial
                let exp = Experiment::prepare(exp_cfg.clone(), &cfg.solver, cache.as_ref())?;
                let first = exp.sampler.sample(trial_seed(exp_cfg.base_seed, 0));
                std::fs::create_dir_all(out)?;
                for &r in &exp_cfg.r_list {
                    let path = out.join(format!("zero_one_R{r}.svg"));
                    std::fs::write(&path, svg_scatter(&first.restrict(r)))?;
                    println!("{}", path.display());
                }
            } else {
                let report = zero_one_experiment(&exp_cfg, &cfg.solver, cache.as_ref())?;
                write(&report, format, out)?;
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    // usage errors exit with 1 so that 2 stays reserved for verification failures
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
