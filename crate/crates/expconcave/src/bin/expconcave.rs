//! Benchmark CLI: replicated experiments, condition diagnostics, regret
//! measurement, and bound evaluation.
//!
//! Exit codes: 0 on success, 1 on validation errors (bad flags, missing or
//! malformed config), 2 on runtime failures (a run that produced error
//! rows still writes its partial CSV before exiting with 2).

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use expconcave::boost::{
    bayes_redundancy, boosted_erm_bound, meta_bound, PsiSetting, RedundancySpec,
};
use expconcave::config::{default_out_dir, experiment_from_config, Config};
use expconcave::diagnostics::{
    bernstein_check, central_check, conditional_variance_check, erm_selection_threshold,
    ProblemInstance, DEFAULT_FLAG_SIGMAS,
};
use expconcave::erm::erm_whp_bound;
use expconcave::harness::{self, fit_rate, run_experiment, summarize, RateFit, SUMMARY_HEADER};
use expconcave::online::{
    ewoo_run, o2b_excess_bound, ogd_run, ons_run, regret_bound, regret_of, LearnerKind,
    RegretBoundParams,
};
use expconcave::seeds::derive_seed;

#[derive(Parser)]
#[command(
    name = "expconcave",
    version,
    about = "Stochastic exp-concave optimization benchmarks: experiments, diagnostics, regret runs, and bound evaluation"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a replicated experiment from a config file; writes records.csv,
    /// summary.csv, and rates.csv
    Run(RunArgs),
    /// Empirical verification of the concentration conditions
    Diag {
        #[command(subcommand)]
        which: DiagCmd,
    },
    /// Online learner runs with measured regret against the bound
    Regret(RegretArgs),
    /// Evaluate the excess-risk and regret bound formulas
    Bounds {
        #[command(subcommand)]
        which: BoundsCmd,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Path to the experiment config
    #[arg(long)]
    config: PathBuf,
    /// Override the master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker thread cap (0 = one per CPU)
    #[arg(long)]
    threads: Option<usize>,
    /// Override the confidence level delta
    #[arg(long)]
    delta: Option<f64>,
}

#[derive(Args)]
struct DiagArgs {
    /// Problem instance name
    #[arg(long)]
    problem: String,
    /// Monte Carlo samples per test point
    #[arg(long, default_value_t = 100_000)]
    m: usize,
    /// Master seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Flag threshold in standard errors
    #[arg(long, default_value_t = DEFAULT_FLAG_SIGMAS)]
    flag_sigmas: f64,
    /// Override the label noise level
    #[arg(long)]
    sigma: Option<f64>,
}

#[derive(Subcommand)]
enum DiagCmd {
    /// Check E[exp(-eta excess loss)] <= 1 across test points
    Central {
        #[command(flatten)]
        common: DiagArgs,
        /// Multiply the instance's eta (values > 1 probe invalid rates)
        #[arg(long, default_value_t = 1.0)]
        eta_scale: f64,
    },
    /// Check the second-moment-over-mean ratio of the excess loss
    Bernstein {
        #[command(flatten)]
        common: DiagArgs,
    },
    /// Check the conditional variance inequality along an EWOO run
    Variance {
        #[command(flatten)]
        common: DiagArgs,
        /// Rounds of the online run
        #[arg(long, default_value_t = 32)]
        rounds: usize,
        /// EWOO grid resolution override
        #[arg(long)]
        resolution: Option<usize>,
    },
}

#[derive(Copy, Clone, ValueEnum)]
enum LearnerArg {
    Ewoo,
    Ons,
    Ogd,
}

impl LearnerArg {
    fn kind(self) -> LearnerKind {
        match self {
            Self::Ewoo => LearnerKind::Ewoo,
            Self::Ons => LearnerKind::Ons,
            Self::Ogd => LearnerKind::Ogd,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Self::Ewoo => "ewoo",
            Self::Ons => "ons",
            Self::Ogd => "ogd",
        }
    }
}

#[derive(Args)]
struct RegretArgs {
    /// Problem instance name
    #[arg(long)]
    problem: String,
    /// Online learner
    #[arg(long, value_enum)]
    learner: LearnerArg,
    /// Rounds per sequence
    #[arg(long, default_value_t = 256)]
    n: usize,
    /// Number of seeded sequences
    #[arg(long, default_value_t = 20)]
    sequences: usize,
    /// Master seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exp-concavity rate override
    #[arg(long)]
    eta: Option<f64>,
    /// EWOO grid resolution override
    #[arg(long)]
    resolution: Option<usize>,
    /// Gradient bound override
    #[arg(long = "G")]
    g: Option<f64>,
    /// Diameter bound override
    #[arg(long = "D")]
    d_bound: Option<f64>,
    /// Strong convexity override (OGD)
    #[arg(long)]
    nu: Option<f64>,
    /// Label noise override
    #[arg(long)]
    sigma: Option<f64>,
}

#[derive(Copy, Clone, ValueEnum)]
enum SettingArg {
    Smooth,
    Glm,
}

#[derive(Subcommand)]
enum BoundsCmd {
    /// High-probability ERM excess-risk bound
    Erm {
        #[arg(long = "B")]
        b: f64,
        #[arg(long)]
        eta: f64,
        #[arg(long = "L")]
        l: f64,
        #[arg(long = "R")]
        r: f64,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        delta: f64,
    },
    /// Confidence-boost bound with psi(m) = coeff / m
    Boost {
        #[arg(long)]
        psi_coeff: f64,
        #[arg(long = "C")]
        c: f64,
        #[arg(long, default_value_t = 1.0)]
        q: f64,
        #[arg(long = "B")]
        b: f64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        delta: f64,
    },
    /// Boosted-ERM bound in a known base-learner setting
    Boosted {
        #[arg(long, value_enum)]
        setting: SettingArg,
        #[arg(long)]
        eta: f64,
        #[arg(long)]
        d: usize,
        #[arg(long = "B")]
        b: f64,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long = "R", default_value_t = 0.0)]
        r: f64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        delta: f64,
    },
    /// Online-to-batch excess-risk bound from realized regret
    O2b {
        #[arg(long)]
        regret: f64,
        #[arg(long)]
        eta: f64,
        #[arg(long = "B")]
        b: f64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        delta: f64,
    },
    /// Worst-case regret bound of an online learner
    Regret {
        #[arg(long, value_enum)]
        learner: LearnerArg,
        #[arg(long, default_value_t = 1.0)]
        eta: f64,
        #[arg(long = "G", default_value_t = 1.0)]
        g: f64,
        #[arg(long = "D", default_value_t = 1.0)]
        d_bound: f64,
        #[arg(long, default_value_t = 1.0)]
        nu: f64,
        #[arg(long, default_value_t = 1)]
        dim: usize,
        #[arg(long)]
        n: usize,
    },
    /// Finite-class ERM selection threshold under a Bernstein condition
    Selection {
        #[arg(long = "C")]
        c: f64,
        #[arg(long, default_value_t = 1.0)]
        q: f64,
        #[arg(long = "B")]
        b: f64,
        #[arg(long)]
        classes: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        delta: f64,
    },
    /// Prior-weighted redundancy functional of a finite class
    Redundancy {
        /// Comma-separated excess risks
        #[arg(long)]
        excess: String,
        /// `uniform` or comma-separated weights
        #[arg(long, default_value = "uniform")]
        prior: String,
        #[arg(long)]
        eta: f64,
        #[arg(long)]
        horizon: usize,
    },
}

enum CliError {
    Validation(String),
    Runtime(String),
}

impl From<expconcave::Error> for CliError {
    fn from(e: expconcave::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}

fn main() {
    std::process::exit(real_main());
}

fn real_main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.cmd {
        Cmd::Run(args) => cmd_run(args),
        Cmd::Diag { which } => cmd_diag(which),
        Cmd::Regret(args) => cmd_regret(args),
        Cmd::Bounds { which } => cmd_bounds(which),
    };
    match result {
        Ok(code) => code,
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            2
        }
    }
}

fn cmd_run(args: RunArgs) -> Result<i32, CliError> {
    if !args.config.exists() {
        return Err(CliError::Validation(format!(
            "config file not found: {}",
            args.config.display()
        )));
    }
    let cfg = Config::from_file(&args.config)?;
    let mut exp = experiment_from_config(&cfg)?;
    if let Some(seed) = args.seed {
        exp.master_seed = seed;
    }
    if let Some(out) = args.out {
        exp.out_dir = out;
    }
    if let Some(threads) = args.threads {
        exp.threads = threads;
    }
    if let Some(delta) = args.delta {
        exp.delta = delta;
    }
    exp.validate()?;
    exp.problem_instance()?;

    let start = Instant::now();
    let records = run_experiment(&exp).map_err(|e| CliError::Runtime(e.to_string()))?;
    let summary = summarize(&records, exp.delta);
    harness::write_text(&exp.out_dir.join("summary.csv"), &harness::summary_to_csv(&summary))
        .map_err(|e| CliError::Runtime(e.to_string()))?;

    // Rate fits per algorithm on the (1 - delta)-quantile column.
    let mut rates: Vec<(&'static str, RateFit)> = Vec::new();
    for &alg in &exp.algorithms {
        let mut ns = Vec::new();
        let mut qs = Vec::new();
        for row in summary.iter().filter(|r| r.algorithm == alg.name()) {
            ns.push(row.n as f64);
            qs.push(row.quantile);
        }
        match fit_rate(&ns, &qs) {
            Ok(fit) => rates.push((alg.name(), fit)),
            Err(e) => println!("rate fit skipped for {}: {e}", alg.name()),
        }
    }
    harness::write_text(&exp.out_dir.join("rates.csv"), &harness::rates_to_csv(&rates))
        .map_err(|e| CliError::Runtime(e.to_string()))?;

    println!("{SUMMARY_HEADER}");
    for row in &summary {
        println!(
            "{},{},{},{},{},{},{}",
            row.algorithm, row.n, row.median, row.quantile, row.quantile_level, row.mean,
            row.stderr
        );
    }
    for (alg, fit) in &rates {
        println!(
            "rate {}: slope {:.4} intercept {:.4} r2 {:.4} ({} points)",
            alg, fit.slope, fit.intercept, fit.r_squared, fit.points_used
        );
    }
    let failures = records.iter().filter(|r| !r.ok()).count();
    println!(
        "wrote {} records ({} failed) to {} in {:.1}s",
        records.len(),
        failures,
        exp.out_dir.display(),
        start.elapsed().as_secs_f64()
    );
    if failures > 0 {
        eprintln!("error: {failures} replicate(s) failed; see the error column in records.csv");
        return Ok(2);
    }
    Ok(0)
}

fn out_dir_or_default(out: Option<PathBuf>) -> Result<PathBuf, CliError> {
    let dir = out.unwrap_or_else(default_out_dir);
    std::fs::create_dir_all(&dir).map_err(|e| {
        CliError::Runtime(format!("cannot create output directory {}: {e}", dir.display()))
    })?;
    Ok(dir)
}

fn diag_points(problem: &ProblemInstance, seed: u64) -> Result<Vec<Vec<f64>>, CliError> {
    let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, "diag_points", 0, 0));
    Ok(problem.test_points(&mut rng)?)
}

fn cmd_diag(which: DiagCmd) -> Result<i32, CliError> {
    match which {
        DiagCmd::Central { common, eta_scale } => {
            let problem = ProblemInstance::by_name(&common.problem, common.sigma)?;
            let points = diag_points(&problem, common.seed)?;
            let eta = problem.loss.eta() * eta_scale;
            let report =
                central_check(&problem, eta, &points, common.m, common.seed, common.flag_sigmas)
                    .map_err(|e| CliError::Runtime(e.to_string()))?;
            let dir = out_dir_or_default(common.out)?;
            let mut csv = String::from("point,estimate,stderr,flagged\n");
            for row in &report.rows {
                csv.push_str(&format!(
                    "{},{},{},{}\n",
                    row.index, row.estimate, row.stderr, row.flagged
                ));
            }
            harness::write_text(&dir.join("diag_central.csv"), &csv)
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            println!(
                "central condition on {}: eta={} m={} flagged {} of {} points",
                problem.name(),
                eta,
                common.m,
                report.flagged,
                report.rows.len()
            );
            Ok(0)
        }
        DiagCmd::Bernstein { common } => {
            let problem = ProblemInstance::by_name(&common.problem, common.sigma)?;
            let points = diag_points(&problem, common.seed)?;
            let report = bernstein_check(
                &problem,
                problem.loss.eta(),
                problem.loss.diameter(),
                &points,
                common.m,
                common.seed,
                common.flag_sigmas,
            )
            .map_err(|e| CliError::Runtime(e.to_string()))?;
            let dir = out_dir_or_default(common.out)?;
            let mut csv =
                String::from("point,mean,mean_se,second_moment,second_moment_se,ratio,included\n");
            for row in &report.rows {
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    row.index,
                    row.mean,
                    row.mean_se,
                    row.second_moment,
                    row.second_moment_se,
                    row.ratio,
                    row.included
                ));
            }
            harness::write_text(&dir.join("diag_bernstein.csv"), &csv)
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            println!(
                "bernstein condition on {}: C_hat={} bound={} holds={}",
                problem.name(),
                report.c_hat,
                report.bound,
                report.holds
            );
            Ok(0)
        }
        DiagCmd::Variance { common, rounds, resolution } => {
            let problem = ProblemInstance::by_name(&common.problem, common.sigma)?;
            let mut rng =
                ChaCha12Rng::seed_from_u64(derive_seed(common.seed, "diag_variance", 0, 0));
            let sequence = problem.sample(&mut rng, rounds);
            let res = resolution.unwrap_or(problem.online.resolution);
            let run = ewoo_run(&problem.loss, &problem.domain, &sequence, problem.loss.eta(), res)
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            let check = conditional_variance_check(
                &problem,
                &run,
                problem.loss.eta(),
                problem.loss.diameter(),
                common.m,
                common.seed,
                common.flag_sigmas,
            )
            .map_err(|e| CliError::Runtime(e.to_string()))?;
            let dir = out_dir_or_default(common.out)?;
            let mut csv = String::from("round,variance,variance_se,bound,excess_risk,flagged\n");
            for row in &check.rows {
                csv.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    row.round, row.variance, row.variance_se, row.bound, row.excess_risk,
                    row.flagged
                ));
            }
            harness::write_text(&dir.join("diag_variance.csv"), &csv)
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            println!(
                "conditional variance on {}: flagged {} of {} rounds",
                problem.name(),
                check.flagged,
                check.rows.len()
            );
            Ok(0)
        }
    }
}

fn cmd_regret(args: RegretArgs) -> Result<i32, CliError> {
    let problem = ProblemInstance::by_name(&args.problem, args.sigma)?;
    let eta = args.eta.unwrap_or(problem.loss.eta());
    let g = args.g.unwrap_or(problem.online.g);
    let d_bound = args.d_bound.unwrap_or(problem.online.d);
    let nu = args.nu.unwrap_or(problem.online.nu);
    let resolution = args.resolution.unwrap_or(problem.online.resolution);
    let kind = args.learner.kind();
    let bound = regret_bound(
        kind,
        &RegretBoundParams { eta, g_bound: g, d_bound, nu, dim: problem.dim(), n: args.n as f64 },
    )?;
    let mut csv = String::from("sequence,seed,learner,n,regret,bound,violation\n");
    let mut max_regret = f64::NEG_INFINITY;
    let mut violations = 0usize;
    for s in 0..args.sequences {
        let seed = derive_seed(args.seed, args.learner.name(), args.n as u64, s as u64);
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let sequence = problem.sample(&mut rng, args.n);
        let run = match kind {
            LearnerKind::Ewoo => {
                ewoo_run(&problem.loss, &problem.domain, &sequence, eta, resolution)
            }
            LearnerKind::Ons => ons_run(&problem.loss, &problem.domain, &sequence, eta, g, d_bound),
            LearnerKind::Ogd => ogd_run(&problem.loss, &problem.domain, &sequence, nu, g),
        }
        .map_err(|e| CliError::Runtime(e.to_string()))?;
        let trace = regret_of(&problem.loss, &problem.domain, &sequence, &run)
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        let violation = trace.regret > bound;
        if violation {
            violations += 1;
        }
        max_regret = max_regret.max(trace.regret);
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            s,
            seed,
            args.learner.name(),
            args.n,
            trace.regret,
            bound,
            violation
        ));
    }
    let dir = out_dir_or_default(args.out)?;
    harness::write_text(&dir.join("regret.csv"), &csv)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    println!(
        "{} on {}: max regret {} vs bound {} over {} sequences ({} violations)",
        args.learner.name(),
        problem.name(),
        max_regret,
        bound,
        args.sequences,
        violations
    );
    Ok(0)
}

fn parse_weights(s: &str, len: usize) -> Result<Vec<f64>, CliError> {
    if s == "uniform" {
        return Ok(vec![1.0 / len as f64; len]);
    }
    let w: Result<Vec<f64>, _> = s.split(',').map(|t| t.trim().parse::<f64>()).collect();
    w.map_err(|_| CliError::Validation(format!("cannot parse weights `{s}`")))
}

fn cmd_bounds(which: BoundsCmd) -> Result<i32, CliError> {
    match which {
        BoundsCmd::Erm { b, eta, l, r, d, n, delta } => {
            let v = erm_whp_bound(b, eta, l, r, d, n, delta)?;
            println!("erm_whp_bound = {v}");
        }
        BoundsCmd::Boost { psi_coeff, c, q, b, n, delta } => {
            let v = meta_bound(|m| psi_coeff / m, c, q, b, n, delta)?;
            println!("meta_bound = {v}");
        }
        BoundsCmd::Boosted { setting, eta, d, b, beta, r, n, delta } => {
            let s = match setting {
                SettingArg::Smooth => PsiSetting::Smooth { beta, eta, b, r, d },
                SettingArg::Glm => PsiSetting::Glm { eta, d, b },
            };
            let v = boosted_erm_bound(s, n, delta)?;
            println!("boosted_erm_bound = {v}");
        }
        BoundsCmd::O2b { regret, eta, b, n, delta } => {
            let v = o2b_excess_bound(regret, eta, b, n, delta)?;
            println!("o2b_excess_bound = {v}");
        }
        BoundsCmd::Regret { learner, eta, g, d_bound, nu, dim, n } => {
            let v = regret_bound(
                learner.kind(),
                &RegretBoundParams { eta, g_bound: g, d_bound, nu, dim, n: n as f64 },
            )?;
            println!("regret_bound = {v}");
        }
        BoundsCmd::Selection { c, q, b, classes, n, delta } => {
            let v = erm_selection_threshold(c, q, b, classes, n, delta)?;
            println!("erm_selection_threshold = {v}");
        }
        BoundsCmd::Redundancy { excess, prior, eta, horizon } => {
            let excess_risks: Result<Vec<f64>, _> =
                excess.split(',').map(|t| t.trim().parse::<f64>()).collect();
            let excess_risks = excess_risks.map_err(|_| {
                CliError::Validation(format!("cannot parse excess list `{excess}`"))
            })?;
            let prior = parse_weights(&prior, excess_risks.len())?;
            let rep = bayes_redundancy(&RedundancySpec { prior, excess_risks, eta, horizon })?;
            println!("bayes_redundancy = {}", rep.value);
            println!("concentrated_bound = {}", rep.concentrated_bound);
        }
    }
    Ok(0)
}
