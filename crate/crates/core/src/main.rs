use clap::{Args, Parser, Subcommand};
use difflab::estimator::{estimate_f, l2_error};
use difflab::harness::config::{load_config, ExperimentConfig, ExperimentKind};
use difflab::harness::{io, study};
use difflab::model::{alpha_d, check_remark_conditions, rate_sequences, s_star, GridField, RateParams};
use difflab::rng::cell_seed;
use difflab::sim::sample_path;
use difflab::{DiffusivityField, Error, Result};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

#[derive(Parser, Debug)]
#[command(name = "difflab", version, about = "Diffusivity estimation from discretely observed reflected diffusions")]
struct Cli {
    /// Experiment configuration (JSON, or TOML with a .toml extension).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one observation path and write it as CSV.
    Simulate {
        /// Number of transitions (defaults to the first entry of n_grid, else 1000).
        #[arg(long)]
        n: Option<usize>,
    },
    /// Fit the least-squares estimator to an observation CSV.
    Estimate(InputArgs),
    /// Run pCN chains for the pseudo-posterior, or a contraction study with `--study`.
    Posterior {
        #[command(flatten)]
        input: InputArgs,
        /// Run the posterior contraction study over the configured N grid.
        #[arg(long)]
        study: bool,
    },
    /// Median L2 error against N over replicates.
    RateStudy,
    /// Worst-case risk over corners of the Assouad hypercube.
    AssouadStudy,
    /// Monte Carlo KL diagnostics over epsilon and N grids.
    KlSweep,
    /// Print the smoothness thresholds and rate sequences.
    Ratecalc {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        a: f64,
        #[arg(long)]
        s: f64,
        /// Sample size for the sequences.
        #[arg(long, default_value_t = 10000.0)]
        n: f64,
    },
}

#[derive(Args, Debug)]
struct InputArgs {
    /// Observation CSV written by `simulate`.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Number of transitions to simulate when no input is given.
    #[arg(long)]
    n: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn config_for(cli: &Cli, kind: ExperimentKind) -> Result<(ExperimentConfig, Vec<u8>)> {
    let (mut cfg, bytes) = match &cli.config {
        Some(p) => (load_config(p)?, std::fs::read(p)?),
        None => (ExperimentConfig::new(kind), Vec::new()),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok((cfg, bytes))
}

fn out_dir(cli: &Cli, cfg: &ExperimentConfig) -> Result<PathBuf> {
    let dir = cli.out.clone().or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn default_n(cfg: &ExperimentConfig, n: Option<usize>) -> usize {
    n.or_else(|| cfg.n_grid.first().copied()).unwrap_or(1000)
}

fn simulate(cfg: &ExperimentConfig, n: usize) -> Result<difflab::sim::ObservationSet> {
    let sde = cfg.sde(Arc::new(cfg.truth.field()), cfg.truth.sup(), n, cell_seed(cfg.seed, &[n as u64]))?;
    let mut obs = sample_path(&sde)?;
    obs.truth_id = Some(serde_json::to_string(&cfg.truth).map_err(|e| Error::Parse(e.to_string()))?);
    Ok(obs)
}

fn observations(cfg: &ExperimentConfig, args: &InputArgs) -> Result<difflab::sim::ObservationSet> {
    match &args.input {
        Some(p) => {
            let obs = io::read_observations(p)?;
            if obs.dim != cfg.dim() {
                return Err(Error::DimensionMismatch { expected: cfg.dim(), got: obs.dim });
            }
            Ok(obs)
        }
        None => simulate(cfg, default_n(cfg, args.n)),
    }
}

fn dump_nodes(cfg: &ExperimentConfig) -> Vec<Vec<f64>> {
    let (lo, hi) = cfg.domain.bounding_box();
    let per = if cfg.dim() == 1 { 257 } else { 65 };
    GridField::nodes(&lo, &hi, &vec![per; cfg.dim()])
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Ratecalc { d, a, s, n } => ratecalc(*d, *a, *s, *n),
        Command::Simulate { n } => {
            let (cfg, _) = config_for(&cli, ExperimentKind::Simulate)?;
            let n = default_n(&cfg, *n);
            let obs = simulate(&cfg, n)?;
            let path = out_dir(&cli, &cfg)?.join("observations.csv");
            io::write_observations(&path, &obs)?;
            println!("wrote {} ({} transitions, D = {})", path.display(), obs.n(), obs.d_interval);
            Ok(())
        }
        Command::Estimate(args) => {
            let (cfg, _) = config_for(&cli, ExperimentKind::Estimate)?;
            let obs = observations(&cfg, args)?;
            let dir = out_dir(&cli, &cfg)?;
            estimate(&cfg, &obs, &dir)
        }
        Command::Posterior { study: true, .. } => run_study(&cli, ExperimentKind::Posterior),
        Command::Posterior { input: args, .. } => {
            let (cfg, _) = config_for(&cli, ExperimentKind::Posterior)?;
            let obs = observations(&cfg, args)?;
            let dir = out_dir(&cli, &cfg)?;
            posterior(&cfg, &obs, &dir)
        }
        Command::RateStudy => run_study(&cli, ExperimentKind::RateStudy),
        Command::AssouadStudy => run_study(&cli, ExperimentKind::AssouadStudy),
        Command::KlSweep => run_study(&cli, ExperimentKind::KlSweep),
    }
}

fn estimate(cfg: &ExperimentConfig, obs: &difflab::sim::ObservationSet, dir: &Path) -> Result<()> {
    let regions = cfg.regions()?;
    let family = cfg.family()?;
    let basis = cfg.basis_for(&family, &regions, obs.n().max(2))?;
    let est = estimate_f(obs, &basis, cfg.truncation())?;
    io::write_coefficients(&dir.join("coefficients.csv"), &est.coeffs)?;
    let nodes = dump_nodes(cfg);
    let fh: Vec<f64> = nodes.iter().map(|x| est.f_hat.value(x)).collect();
    let fs: Vec<f64> = nodes.iter().map(|x| est.f_hat_star.value(x)).collect();
    io::write_field_dump(&dir.join("field.csv"), &nodes, &fh, &fs)?;
    let r = &est.report;
    println!("J0 = {}, J = {}, coefficients = {}", basis.j0, basis.j, est.coeffs.values.len());
    println!("active rows = {} of {}, rank = {}, method = {:?}", r.active_rows, r.n, r.rank, r.method);
    let truth = cfg.truth.field();
    println!("l2 error vs configured truth = {:.6e}", l2_error(&est.f_hat_star, &truth, &regions.domain, basis.j));
    Ok(())
}

fn posterior(cfg: &ExperimentConfig, obs: &difflab::sim::ObservationSet, dir: &Path) -> Result<()> {
    let regions = cfg.regions()?;
    let family = cfg.family()?;
    let basis = cfg.basis_for(&family, &regions, obs.n().max(2))?;
    let truth = cfg.truth.field();
    let (_, summary) = study::posterior_for(cfg, obs, &basis, Some(&truth), cfg.seed)?;
    io::write_chain_trace(&dir.join("chain_trace.csv"), &summary.trace)?;
    let mean_f: DiffusivityField = summary.mean_diffusivity(cfg.prior.f_min);
    let nodes = dump_nodes(cfg);
    let vals: Vec<f64> = nodes.iter().map(|x| mean_f.value(x)).collect();
    io::write_field_dump(&dir.join("posterior_mean.csv"), &nodes, &vals, &vals)?;
    println!("acceptance = {:.3}, beta = {:.4}, ess = {:.1}", summary.acceptance, summary.beta, summary.ess);
    println!("posterior mean l2 error vs configured truth = {:.6e}", l2_error(&mean_f, &truth, &regions.domain, basis.j));
    for w in &summary.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn run_study(cli: &Cli, kind: ExperimentKind) -> Result<()> {
    let (mut cfg, bytes) = config_for(cli, kind)?;
    if cli.config.is_none() {
        return Err(Error::Config("studies need --config".into()));
    }
    cfg.experiment = kind;
    let t = Instant::now();
    let result = match cfg.experiment {
        ExperimentKind::RateStudy => study::run_rate_study(&cfg)?,
        ExperimentKind::AssouadStudy => study::run_assouad_study(&cfg)?,
        ExperimentKind::Posterior => study::run_posterior_study(&cfg)?,
        _ => study::run_kl_sweep(&cfg)?,
    };
    let dir = out_dir(cli, &cfg)?;
    study::write_study(&dir, &cfg, &bytes, &result, t.elapsed().as_secs_f64())?;
    for row in &result.summary {
        println!("N = {:>8}  median error = {:.4e}  aux = {:.4e}  ok = {}", row.n, row.median_error, row.aux, row.successes);
    }
    for row in &result.kl_rows {
        println!("eps = {:<6} N = {:>7}  mean = {:.4e}  var_sum = {:.4e}", row.epsilon, row.n, row.mean, row.var_sum);
    }
    if let Some(s) = &result.slope {
        println!("slope = {:.4} (stderr {:.4})", s.slope, s.stderr);
    }
    if let Some(s) = &result.aux_slope {
        println!("aux slope = {:.4} (stderr {:.4})", s.slope, s.stderr);
    }
    if result.failures() > 0 {
        eprintln!("warning: {} cells failed", result.failures());
    }
    Ok(())
}

fn ratecalc(d: usize, a: f64, s: f64, n: f64) -> Result<()> {
    let star = s_star(d, a)?;
    let remark = check_remark_conditions(d, a, s)?;
    let seq = rate_sequences(&RateParams { d, a, s, n })?;
    println!("alpha_d = {}", alpha_d(d));
    println!("s* = {}", fmt(star));
    println!("eps_N = {:.6e}", seq.eps_n);
    println!("D = {:.6e}", seq.d_interval);
    println!("E_N = {:.6e}", seq.e_n);
    println!("V_N = {:.6e}", seq.v_n);
    let cond = if (s - remark.threshold).abs() <= 1e-9 * remark.threshold.abs().max(1.0) {
        format!("boundary case: s = {} equals the threshold {}", fmt(s), fmt(remark.threshold))
    } else if remark.holds {
        format!("holds: s = {} > {}", fmt(s), fmt(remark.threshold))
    } else {
        format!("fails: s = {} <= {}", fmt(s), fmt(remark.threshold))
    };
    println!("condition: {cond}");
    if s < star - 1e-9 * star {
        println!("note: s is below s*");
    }
    Ok(())
}

/// Prints values that are integers up to rounding without the noise.
fn fmt(x: f64) -> String {
    if (x - x.round()).abs() < 1e-9 {
        format!("{}", x.round())
    } else {
        format!("{x}")
    }
}
