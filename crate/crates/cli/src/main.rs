use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use lowrank::analysis::{
    check_meta_concentration, check_prop1, check_var_spectrum, check_wishart_spectrum, RscReport,
};
use lowrank::harness::{
    collapse_metric, emit_csv, emit_plot, run_experiment_with_workers, worker_pool,
    ExperimentConfig,
};
use lowrank::matcore::operator_norm;
use lowrank::models::{
    generate_exact_lowrank, generate_near_lowrank, read_observation_set, sample_compressed,
    sample_identity, sample_multivar, sample_var, write_observation_set, GroundTruth, ModelKind,
    ModelParams, ObservationSet, VarParams,
};
use lowrank::regsel::{
    lambda_compressed, lambda_generic, lambda_multivar, lambda_var, LambdaChoice,
};
use lowrank::rng::{mix_seed, stream};
use lowrank::solver::{relative_error, solve, SolverConfig};
use lowrank::{DenseMatrix, Result};

#[derive(Parser)]
#[command(
    name = "lowrank",
    version,
    about = "Nuclear-norm estimation of low-rank matrices"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a ground truth and observations and write them to a file.
    Generate(GenerateArgs),
    /// Solve a stored observation set and print a summary.
    Solve(SolveArgs),
    /// Run a sample-size sweep from a config file, writing CSV and SVG.
    Experiment(ExperimentArgs),
    /// Monte-Carlo checks of the spectral and concentration inequalities.
    Check(CheckArgs),
    /// Print the closed-form regularization weight for a model.
    Lambda(LambdaArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    model: ModelKind,
    #[arg(long)]
    p: usize,
    /// Rows of Θ*; defaults to p.
    #[arg(long)]
    k: Option<usize>,
    /// Rank of an exactly low-rank truth.
    #[arg(long, default_value_t = 1)]
    r: usize,
    /// Vector samples (regression, VAR) or scalar observations (compressed).
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    nu: f64,
    /// Operator-norm bound of the VAR transition matrix.
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    /// Draw a near-low-rank truth in the ℓ_q ball instead.
    #[arg(long, requires = "rq")]
    q: Option<f64>,
    #[arg(long)]
    rq: Option<f64>,
    /// Singular value scale of an exactly low-rank truth.
    #[arg(long, default_value_t = 10.0)]
    scale: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    /// Observation-set file written by `generate`.
    input: PathBuf,
    /// `auto` for the model's closed-form rule, or a weight on the solver's scale.
    #[arg(long, default_value = "auto")]
    lambda: String,
    #[arg(long, default_value_t = 5000)]
    max_iters: usize,
    /// Also write the summary here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// CSV path; overrides the config's `output`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckSuite {
    Wishart,
    Var,
    Prop1,
    Meta,
}

#[derive(Args)]
struct CheckArgs {
    suite: CheckSuite,
    #[arg(long, default_value_t = 50)]
    p: usize,
    #[arg(long)]
    k: Option<usize>,
    /// Rank of the VAR transition matrix.
    #[arg(long, default_value_t = 10)]
    r: usize,
    /// Samples (wishart, var), observations (prop1) or dimension (meta).
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    nu: f64,
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    /// Deviation level for the concentration check.
    #[arg(long, default_value_t = 0.2)]
    t: f64,
    /// Test matrices per operator draw (prop1).
    #[arg(long, default_value_t = 100)]
    tests: usize,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Per-trial CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LambdaArgs {
    #[arg(long)]
    model: ModelKind,
    #[arg(long)]
    p: usize,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    nu: f64,
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    /// Largest eigenvalue of the regression covariance.
    #[arg(long, default_value_t = 1.0)]
    sigma_max: f64,
    /// Operator norm of the VAR stationary covariance.
    #[arg(long, default_value_t = 1.0)]
    sigma_op: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Solve(a) => solve_cmd(a),
        Command::Experiment(a) => experiment(a),
        Command::Check(a) => check(a),
        Command::Lambda(a) => lambda(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn generate(a: GenerateArgs) -> Result<()> {
    let k = a.k.unwrap_or(a.p);
    let truth_seed = mix_seed(&[a.seed, stream::TRUTH]);
    let data_seed = mix_seed(&[a.seed, stream::DESIGN]);
    let truth = |k: usize, p: usize, scale: f64| -> Result<GroundTruth> {
        match (a.q, a.rq) {
            (Some(q), Some(rq)) => generate_near_lowrank(k, p, q, rq, truth_seed),
            _ => generate_exact_lowrank(k, p, a.r, scale, truth_seed),
        }
    };
    let obs = match a.model {
        ModelKind::Identity => sample_identity(&truth(k, a.p, a.scale)?, a.nu, data_seed)?,
        ModelKind::Multivar => {
            let sigma = DenseMatrix::identity(a.p, a.p);
            sample_multivar(&truth(k, a.p, a.scale)?, a.n, &sigma, a.nu, data_seed)?
        }
        ModelKind::Var => {
            if a.q.is_some() {
                return Err(lowrank::Error::InvalidParameter(
                    "VAR generation uses an exactly low-rank transition matrix".into(),
                ));
            }
            let t = generate_exact_lowrank(a.p, a.p, a.r, a.gamma, truth_seed)?;
            sample_var(
                &VarParams::new(t.theta_star, a.nu, a.n, a.gamma)?,
                data_seed,
            )?
        }
        ModelKind::Compressed => sample_compressed(&truth(k, a.p, a.scale)?, a.n, a.nu, data_seed)?,
    };
    write_observation_set(&obs, &a.out)?;
    let shape = obs.shape();
    println!(
        "wrote {} set: k={} p={} N={} samples={} to {}",
        obs.kind(),
        shape.k,
        shape.p,
        shape.n_obs,
        obs.samples(),
        a.out.display()
    );
    Ok(())
}

fn auto_lambda(obs: &ObservationSet) -> Result<LambdaChoice> {
    let shape = obs.shape();
    let nu = obs.noise_level;
    match &obs.params {
        ModelParams::Multivar { sigma_x } if nu > 0.0 => {
            let sig_max = sigma_x.clone().symmetric_eigen().eigenvalues.max();
            lambda_multivar(nu, sig_max, shape.k, shape.p, obs.samples())
        }
        ModelParams::Var(v) => lambda_var(operator_norm(&v.sigma)?, v.gamma, v.dim(), v.n),
        ModelParams::Compressed if nu > 0.0 => lambda_compressed(nu, shape.k, shape.p, shape.n_obs),
        _ => lambda_generic(obs, 50, mix_seed(&[obs.seed, stream::LAMBDA])),
    }
}

fn solve_cmd(a: SolveArgs) -> Result<()> {
    let obs = read_observation_set(&a.input)?;
    let choice = if a.lambda == "auto" {
        auto_lambda(&obs)?
    } else {
        let v: f64 = a.lambda.parse().map_err(|_| {
            lowrank::Error::InvalidParameter(format!("bad --lambda {:?}", a.lambda))
        })?;
        LambdaChoice::manual(v)?
    };
    let mut cfg = SolverConfig::new(choice.solver_weight());
    cfg.max_iters = a.max_iters;
    let res = solve(&obs, &cfg)?;
    let mut s = String::new();
    let _ = writeln!(s, "rule: {}", choice.rule.tag());
    let _ = writeln!(s, "lambda_rule_value: {}", choice.value);
    let _ = writeln!(s, "lambda_solver: {}", cfg.lambda);
    let _ = writeln!(s, "iterations: {}", res.iterations);
    let _ = writeln!(s, "converged: {}", res.converged);
    let _ = writeln!(s, "objective: {}", res.final_objective());
    let _ = writeln!(s, "rank: {}", res.rank);
    let _ = writeln!(s, "optimality_residual: {}", res.optimality_residual);
    if let Some(ts) = &obs.theta_star {
        let _ = writeln!(s, "frob_error: {}", (&res.theta_hat - ts).norm());
        let _ = writeln!(s, "relative_error: {}", relative_error(&res.theta_hat, ts));
    }
    print!("{s}");
    if let Some(out) = a.out {
        std::fs::write(out, s)?;
    }
    Ok(())
}

fn experiment(a: ExperimentArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::from_file(&a.config)?;
    if let Some(out) = a.out {
        cfg.output_path = Some(out);
    }
    let csv_path = cfg
        .output_path
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.csv", cfg.model)));
    cfg.output_path = Some(csv_path.clone());
    let records = run_experiment_with_workers(&cfg, a.workers)?;
    emit_csv(&records, &csv_path)?;
    let plot = cfg.plot_path().expect("output path set");
    emit_plot(&records, &plot)?;
    let failures: Vec<_> = records.iter().filter(|r| !r.is_ok()).collect();
    println!("records: {} ({} failed)", records.len(), failures.len());
    for f in &failures {
        println!(
            "failed: p={} N={} trial={}: {}",
            f.p,
            f.n,
            f.trial,
            f.failure.as_deref().unwrap_or("")
        );
    }
    if cfg.p_list.len() >= 2 {
        for &t in &cfg.rescaled_grid {
            if let Ok(spread) = collapse_metric(&records, t) {
                println!("t={t}: spread {spread:.4}");
            }
        }
    }
    println!("csv: {}", csv_path.display());
    println!("plot: {}", plot.display());
    Ok(())
}

fn check(a: CheckArgs) -> Result<()> {
    let pool = worker_pool(a.workers)?;
    let report: RscReport = pool.install(|| match a.suite {
        CheckSuite::Wishart => {
            check_wishart_spectrum(a.p, a.n, &DenseMatrix::identity(a.p, a.p), a.trials, a.seed)
        }
        CheckSuite::Var => {
            let t =
                generate_exact_lowrank(a.p, a.p, a.r, a.gamma, mix_seed(&[a.seed, stream::TRUTH]))?;
            check_var_spectrum(&t.theta_star, a.nu, a.n, a.trials, a.seed)
        }
        CheckSuite::Prop1 => check_prop1(a.k.unwrap_or(a.p), a.p, a.n, a.trials, a.tests, a.seed),
        CheckSuite::Meta => {
            check_meta_concentration(&DenseMatrix::identity(a.n, a.n), a.n, a.t, a.trials, a.seed)
        }
    })?;
    print!("{}", report.summary());
    if let Some(out) = a.out {
        report.write_csv(out)?;
    }
    Ok(())
}

fn lambda(a: LambdaArgs) -> Result<()> {
    let k = a.k.unwrap_or(a.p);
    let choice = match a.model {
        ModelKind::Multivar => lambda_multivar(a.nu, a.sigma_max, k, a.p, a.n)?,
        ModelKind::Var => lambda_var(a.sigma_op, a.gamma, a.p, a.n)?,
        ModelKind::Compressed => lambda_compressed(a.nu, k, a.p, a.n)?,
        ModelKind::Identity => {
            return Err(lowrank::Error::InvalidParameter(
                "no closed-form rule for the identity model".into(),
            ))
        }
    };
    println!("rule: {}", choice.rule.tag());
    println!("lambda: {}", choice.value);
    println!("solver_weight: {}", choice.solver_weight());
    Ok(())
}
