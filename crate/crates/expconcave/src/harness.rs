//! Monte Carlo experiment orchestration.
//!
//! An experiment runs a list of algorithms over a grid of sample sizes with
//! `R` independent replicates per cell. Each replicate draws a fresh seeded
//! sample, trains, and records the oracle excess risk (and realized regret
//! for the online-to-batch algorithms). Seeds derive from
//! `(master seed, algorithm, n, replicate)`, so results are bit-identical
//! regardless of worker-thread count and adding an algorithm never perturbs
//! other cells' samples.
//!
//! Outputs are plain CSV. To keep artifacts byte-reproducible, the
//! `elapsed_ms` column is written as 0; measured timings are kept on the
//! in-memory records and reported on the run log instead.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::boost::{confidence_boost, pm_cb, pm_ewoo, pm_mixture};
use crate::diagnostics::ProblemInstance;
use crate::erm::{erm_fit, penalized_erm_fit, Regularizer, SolverConfig};
use crate::online::{average_iterates, ewoo_run, ogd_run, ons_run, regret_of};
use crate::seeds::{child_seed, derive_seed};
use crate::stats::{self, upper_quantile};
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlgorithmSpec {
    Erm,
    PenalizedErm,
    ConfidenceBoost,
    EwooO2b,
    OnsO2b,
    OgdO2b,
    Pm,
    PmEwoo,
    PmCb,
}

impl AlgorithmSpec {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Erm => "erm",
            Self::PenalizedErm => "penalized_erm",
            Self::ConfidenceBoost => "confidence_boost",
            Self::EwooO2b => "ewoo_o2b",
            Self::OnsO2b => "ons_o2b",
            Self::OgdO2b => "ogd_o2b",
            Self::Pm => "pm",
            Self::PmEwoo => "pm_ewoo",
            Self::PmCb => "pm_cb",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "erm" => Self::Erm,
            "penalized_erm" => Self::PenalizedErm,
            "confidence_boost" => Self::ConfidenceBoost,
            "ewoo_o2b" => Self::EwooO2b,
            "ons_o2b" => Self::OnsO2b,
            "ogd_o2b" => Self::OgdO2b,
            "pm" => Self::Pm,
            "pm_ewoo" => Self::PmEwoo,
            "pm_cb" => Self::PmCb,
            other => {
                return Err(Error::invalid("algorithm", format!("unknown algorithm `{other}`")))
            }
        })
    }

}

/// Optional overrides for the online learners; anything unset falls back to
/// the problem instance's analytically derived defaults.
#[derive(Debug, Clone, Copy, Default)]
pub struct OnlineOverrides {
    pub eta: Option<f64>,
    pub resolution: Option<usize>,
    pub g: Option<f64>,
    pub d: Option<f64>,
    pub nu: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoostBase {
    Erm,
    PenalizedErm,
}

/// Optional overrides applied on top of a built-in problem instance: loss
/// constants, the feasible set, and the expert class file.
#[derive(Debug, Clone, Default)]
pub struct InstanceOverrides {
    /// Must match the instance's loss kind when present.
    pub loss_kind: Option<String>,
    pub loss_eta: Option<f64>,
    pub loss_b: Option<f64>,
    pub loss_l: Option<f64>,
    pub domain: Option<crate::domains::ConvexDomain>,
    pub class_file: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment_id: String,
    pub problem: String,
    pub noise_sigma: Option<f64>,
    pub algorithms: Vec<AlgorithmSpec>,
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    pub delta: f64,
    pub master_seed: u64,
    pub out_dir: PathBuf,
    /// 0 means one worker per available CPU.
    pub threads: usize,
    pub solver: SolverConfig,
    pub online: OnlineOverrides,
    pub boost_delta: Option<f64>,
    pub boost_base: BoostBase,
    /// Prior override for the aggregation algorithms.
    pub msa_prior: Option<Vec<f64>>,
    pub overrides: InstanceOverrides,
}

impl ExperimentConfig {
    pub fn new(problem: &str, algorithms: Vec<AlgorithmSpec>, n_grid: Vec<usize>) -> Self {
        Self {
            experiment_id: "experiment".to_string(),
            problem: problem.to_string(),
            noise_sigma: None,
            algorithms,
            n_grid,
            replicates: 1,
            delta: 0.05,
            master_seed: 0,
            out_dir: PathBuf::from("out"),
            threads: 0,
            solver: SolverConfig::default(),
            online: OnlineOverrides::default(),
            boost_delta: None,
            boost_base: BoostBase::Erm,
            msa_prior: None,
            overrides: InstanceOverrides::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() {
            return Err(Error::invalid("algorithms", "need at least one algorithm"));
        }
        if self.n_grid.is_empty() {
            return Err(Error::invalid("n_grid", "need at least one sample size"));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("n_grid", "must be strictly ascending"));
        }
        if self.replicates < 1 {
            return Err(Error::invalid("replicates", "need at least one replicate"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::invalid("delta", "must lie in (0,1)"));
        }
        Ok(())
    }

    pub fn problem_instance(&self) -> Result<ProblemInstance> {
        let mut inst = ProblemInstance::by_name(&self.problem, self.noise_sigma)?;
        let ov = &self.overrides;
        if let Some(domain) = &ov.domain {
            inst = inst.with_domain(domain.clone())?;
        }
        if let Some(kind) = &ov.loss_kind {
            let actual = inst.loss.kind().to_string();
            if *kind != actual {
                return Err(Error::invalid(
                    "loss_kind",
                    format!("instance `{}` uses the {actual} loss, config says {kind}", inst.name()),
                ));
            }
        }
        if let Some(b) = ov.loss_b {
            inst.loss = inst.loss.clone().with_diameter(b);
        }
        if let Some(l) = ov.loss_l {
            inst.loss = inst.loss.clone().with_lipschitz(l);
        }
        if let Some(eta) = ov.loss_eta {
            inst.loss = inst.loss.clone().with_eta(eta)?;
        }
        if let Some(path) = &ov.class_file {
            let class = crate::boost::ExpertClass::from_csv_file(path)?;
            inst = inst.with_expert_class(class, self.msa_prior.clone())?;
        }
        Ok(inst)
    }
}

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct ReplicateRecord {
    pub experiment_id: String,
    pub algorithm: &'static str,
    pub n: usize,
    pub replicate: usize,
    pub seed: u64,
    pub excess_risk: f64,
    pub excess_risk_stderr: f64,
    pub regret: Option<f64>,
    /// Measured wall time; informational only, written as 0 in the CSV.
    pub elapsed_ms: u64,
    pub error: Option<String>,
}

impl ReplicateRecord {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }
}

pub const RECORDS_HEADER: &str =
    "experiment_id,algorithm,n,replicate,seed,excess_risk,excess_risk_stderr,regret,elapsed_ms,error";
pub const SUMMARY_HEADER: &str = "algorithm,n,median,quantile,quantile_level,mean,stderr";
pub const RATES_HEADER: &str = "algorithm,slope,intercept,r_squared,points_used";

fn sanitize(msg: &str) -> String {
    msg.replace([',', '\n', '\r'], ";")
}

pub fn records_to_csv(records: &[ReplicateRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(RECORDS_HEADER);
    out.push('\n');
    for r in records {
        let (excess, stderr) = if r.ok() {
            (r.excess_risk.to_string(), r.excess_risk_stderr.to_string())
        } else {
            (String::new(), String::new())
        };
        let regret = r.regret.map(|v| v.to_string()).unwrap_or_default();
        let error = r.error.as_deref().map(sanitize).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},0,{}\n",
            r.experiment_id, r.algorithm, r.n, r.replicate, r.seed, excess, stderr, regret, error
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// Running
// ---------------------------------------------------------------------------

/// Deterministic parallel map: results are collected by item index, so the
/// output does not depend on scheduling.
pub fn parallel_map<T, F>(count: usize, threads: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let threads = if threads == 0 {
        std::thread::available_parallelism().map(|p| p.get()).unwrap_or(1)
    } else {
        threads
    };
    let threads = threads.max(1).min(count.max(1));
    if threads == 1 {
        return (0..count).map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<T>>> = (0..count).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= count {
                    break;
                }
                let v = f(i);
                *slots[i].lock().unwrap() = Some(v);
            });
        }
    });
    slots.into_iter().map(|s| s.into_inner().unwrap().expect("slot filled")).collect()
}

fn run_one(
    cfg: &ExperimentConfig,
    problem: &ProblemInstance,
    alg: AlgorithmSpec,
    n: usize,
    replicate: usize,
) -> ReplicateRecord {
    let seed = derive_seed(cfg.master_seed, alg.name(), n as u64, replicate as u64);
    let start = Instant::now();
    let mut record = ReplicateRecord {
        experiment_id: cfg.experiment_id.clone(),
        algorithm: alg.name(),
        n,
        replicate,
        seed,
        excess_risk: f64::NAN,
        excess_risk_stderr: f64::NAN,
        regret: None,
        elapsed_ms: 0,
        error: None,
    };
    match run_one_inner(cfg, problem, alg, n, seed) {
        Ok((excess, stderr, regret)) => {
            record.excess_risk = excess;
            record.excess_risk_stderr = stderr;
            record.regret = regret;
        }
        Err(e) => record.error = Some(e.to_string()),
    }
    record.elapsed_ms = start.elapsed().as_millis() as u64;
    record
}

fn run_one_inner(
    cfg: &ExperimentConfig,
    problem: &ProblemInstance,
    alg: AlgorithmSpec,
    n: usize,
    seed: u64,
) -> Result<(f64, f64, Option<f64>)> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let sample = problem.sample(&mut rng, n);
    let loss = &problem.loss;
    let domain = &problem.domain;
    let eta = cfg.online.eta.unwrap_or(loss.eta());
    let resolution = cfg.online.resolution.unwrap_or(problem.online.resolution);
    let g = cfg.online.g.unwrap_or(problem.online.g);
    let d_bound = cfg.online.d.unwrap_or(problem.online.d);
    let nu = cfg.online.nu.unwrap_or(problem.online.nu);
    let boost_delta = cfg.boost_delta.unwrap_or(cfg.delta);
    let oracle_seed = child_seed(seed, u64::MAX);

    // Aggregation algorithms evaluate through the expert-class oracle.
    if matches!(alg, AlgorithmSpec::Pm | AlgorithmSpec::PmEwoo | AlgorithmSpec::PmCb) {
        let msa = problem
            .msa()
            .ok_or_else(|| Error::invalid("problem", "algorithm needs an expert class"))?;
        let prior = cfg.msa_prior.clone().unwrap_or_else(|| msa.prior.clone());
        let mix = match alg {
            AlgorithmSpec::Pm => pm_mixture(loss, &msa.class, &prior, msa.eta, &sample)?,
            AlgorithmSpec::PmEwoo => {
                pm_ewoo(&msa.class, &prior, loss, &sample, boost_delta, msa.eta)?
            }
            AlgorithmSpec::PmCb => pm_cb(
                &msa.class,
                &prior,
                loss,
                &sample,
                boost_delta,
                msa.eta,
                msa.alpha,
                msa.lipschitz,
            )?,
            _ => unreachable!(),
        };
        let excess = problem.mixture_excess(&mix)?;
        return Ok((excess, 0.0, None));
    }

    let (hypothesis, regret) = match alg {
        AlgorithmSpec::Erm => (erm_fit(loss, domain, &sample, &cfg.solver)?, None),
        AlgorithmSpec::PenalizedErm => {
            let reg = Regularizer::half_squared_norm(regularizer_diameter(problem));
            (penalized_erm_fit(loss, domain, &sample, &reg, &cfg.solver)?, None)
        }
        AlgorithmSpec::ConfidenceBoost => {
            let solver = cfg.solver;
            let out = match cfg.boost_base {
                BoostBase::Erm => confidence_boost(
                    |batch| erm_fit(loss, domain, batch, &solver),
                    loss,
                    &sample,
                    boost_delta,
                )?,
                BoostBase::PenalizedErm => {
                    let reg = Regularizer::half_squared_norm(regularizer_diameter(problem));
                    confidence_boost(
                        |batch| penalized_erm_fit(loss, domain, batch, &reg, &solver),
                        loss,
                        &sample,
                        boost_delta,
                    )?
                }
            };
            (out.hypothesis, None)
        }
        AlgorithmSpec::EwooO2b => {
            let run = ewoo_run(loss, domain, &sample, eta, resolution)?;
            let trace = regret_of(loss, domain, &sample, &run)?;
            (average_iterates(&run)?, Some(trace.regret))
        }
        AlgorithmSpec::OnsO2b => {
            let run = ons_run(loss, domain, &sample, eta, g, d_bound)?;
            let trace = regret_of(loss, domain, &sample, &run)?;
            (average_iterates(&run)?, Some(trace.regret))
        }
        AlgorithmSpec::OgdO2b => {
            let run = ogd_run(loss, domain, &sample, nu, g)?;
            let trace = regret_of(loss, domain, &sample, &run)?;
            (average_iterates(&run)?, Some(trace.regret))
        }
        _ => unreachable!(),
    };
    let (excess, stderr) = problem.excess_risk_seeded(&hypothesis, oracle_seed)?;
    Ok((excess, stderr, regret))
}

/// Range of the `||f||^2 / 2` regularizer over the domain.
fn regularizer_diameter(problem: &ProblemInstance) -> f64 {
    let c = problem.domain.centroid();
    let reach = crate::linalg::norm2(&c) + problem.domain.diameter();
    reach * reach / 2.0
}

/// Run every (algorithm, n, replicate) cell, write `records.csv` into the
/// output directory, and return the records sorted by
/// (algorithm, n, replicate). Re-running with the same configuration
/// produces byte-identical CSV output regardless of `threads`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ReplicateRecord>> {
    cfg.validate()?;
    let problem = cfg.problem_instance()?;
    let mut items = Vec::new();
    for &alg in &cfg.algorithms {
        for &n in &cfg.n_grid {
            for rep in 0..cfg.replicates {
                items.push((alg, n, rep));
            }
        }
    }
    let mut records = parallel_map(items.len(), cfg.threads, |i| {
        let (alg, n, rep) = items[i];
        run_one(cfg, &problem, alg, n, rep)
    });
    records.sort_by(|a, b| {
        (a.algorithm, a.n, a.replicate).cmp(&(b.algorithm, b.n, b.replicate))
    });
    fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| Error::invalid("out", format!("cannot create output directory: {e}")))?;
    write_text(&cfg.out_dir.join("records.csv"), &records_to_csv(&records))?;
    Ok(records)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = fs::File::create(path)
        .map_err(|e| Error::invalid("out", format!("cannot write {}: {e}", path.display())))?;
    f.write_all(text.as_bytes())
        .map_err(|e| Error::invalid("out", format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Summaries
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub algorithm: &'static str,
    pub n: usize,
    pub median: f64,
    /// Upper order statistic at level `1 - delta`.
    pub quantile: f64,
    pub quantile_level: f64,
    pub mean: f64,
    pub stderr: f64,
}

/// Per-cell summaries of the successful replicates. Cells with no
/// successful replicate are omitted.
pub fn summarize(records: &[ReplicateRecord], delta: f64) -> Vec<SummaryRow> {
    use std::collections::BTreeMap;
    let mut cells: BTreeMap<(&'static str, usize), Vec<f64>> = BTreeMap::new();
    for r in records {
        if r.ok() {
            cells.entry((r.algorithm, r.n)).or_default().push(r.excess_risk);
        }
    }
    let level = 1.0 - delta;
    cells
        .into_iter()
        .map(|((algorithm, n), values)| SummaryRow {
            algorithm,
            n,
            median: stats::median(&values),
            quantile: upper_quantile(&values, level),
            quantile_level: level,
            mean: stats::mean(&values),
            stderr: stats::stderr_mean(&values),
        })
        .collect()
}

pub fn summary_to_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.algorithm, r.n, r.median, r.quantile, r.quantile_level, r.mean, r.stderr
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// Rate fits and bound comparisons
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points_used: usize,
    pub points_excluded: usize,
}

/// Ordinary least squares on `(log n, log value)`. Nonpositive or
/// non-finite values are excluded; fewer than three surviving points is an
/// error.
pub fn fit_rate(n_values: &[f64], summary_values: &[f64]) -> Result<RateFit> {
    if n_values.len() != summary_values.len() {
        return Err(Error::invalid("fit_rate", "length mismatch"));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut excluded = 0;
    for (&n, &v) in n_values.iter().zip(summary_values) {
        if v > 0.0 && v.is_finite() && n > 0.0 {
            xs.push(n.ln());
            ys.push(v.ln());
        } else {
            excluded += 1;
        }
    }
    if xs.len() < 3 {
        return Err(Error::precondition(format!(
            "rate fit needs at least 3 positive points, got {}",
            xs.len()
        )));
    }
    let (slope, intercept, r_squared) = stats::ols(&xs, &ys)?;
    Ok(RateFit { slope, intercept, r_squared, points_used: xs.len(), points_excluded: excluded })
}

pub fn rates_to_csv(rows: &[(&'static str, RateFit)]) -> String {
    let mut out = String::from(RATES_HEADER);
    out.push('\n');
    for (alg, fit) in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            alg, fit.slope, fit.intercept, fit.r_squared, fit.points_used
        ));
    }
    out
}

#[derive(Debug, Clone, Copy)]
pub struct BoundRow {
    pub n: usize,
    pub quantile: f64,
    pub bound: f64,
    pub ratio: f64,
    pub violation: bool,
}

/// Compare the empirical `(1 - delta)`-quantile against a bound curve,
/// per sample size. Pass records of a single algorithm.
pub fn compare_bounds(
    records: &[ReplicateRecord],
    bound_curve: impl Fn(usize) -> f64,
    delta: f64,
) -> Vec<BoundRow> {
    use std::collections::BTreeMap;
    let mut cells: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in records {
        if r.ok() {
            cells.entry(r.n).or_default().push(r.excess_risk);
        }
    }
    cells
        .into_iter()
        .map(|(n, values)| {
            let quantile = upper_quantile(&values, 1.0 - delta);
            let bound = bound_curve(n);
            BoundRow { n, quantile, bound, ratio: quantile / bound, violation: quantile > bound }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_cfg() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(
            "sq_interval",
            vec![AlgorithmSpec::Erm],
            vec![16],
        );
        cfg.out_dir = std::env::temp_dir().join(format!("expc_test_{}", std::process::id()));
        cfg
    }

    #[test]
    fn single_cell_yields_one_row() {
        let mut cfg = base_cfg();
        cfg.experiment_id = "one".into();
        let records = run_experiment(&cfg).unwrap();
        assert_eq!(records.len(), 1);
        assert!(records[0].ok());
        assert!(records[0].excess_risk >= -1e-12);
        let _ = std::fs::remove_dir_all(&cfg.out_dir);
    }

    #[test]
    fn row_count_is_full_product() {
        let mut cfg = base_cfg();
        cfg.algorithms = vec![AlgorithmSpec::Erm, AlgorithmSpec::EwooO2b];
        cfg.n_grid = vec![16, 32, 64];
        cfg.replicates = 2;
        let records = run_experiment(&cfg).unwrap();
        assert_eq!(records.len(), 12);
        let _ = std::fs::remove_dir_all(&cfg.out_dir);
    }

    #[test]
    fn csv_bytes_identical_across_thread_counts() {
        let mut cfg = base_cfg();
        cfg.algorithms = vec![AlgorithmSpec::Erm, AlgorithmSpec::ConfidenceBoost];
        cfg.n_grid = vec![32, 64];
        cfg.replicates = 3;
        cfg.master_seed = 99;
        cfg.threads = 1;
        let a = records_to_csv(&run_experiment(&cfg).unwrap());
        cfg.threads = 4;
        let b = records_to_csv(&run_experiment(&cfg).unwrap());
        assert_eq!(a, b);
        let _ = std::fs::remove_dir_all(&cfg.out_dir);
    }

    #[test]
    fn msa_algorithm_on_wrong_problem_records_error_row() {
        let mut cfg = base_cfg();
        cfg.algorithms = vec![AlgorithmSpec::Pm];
        let records = run_experiment(&cfg).unwrap();
        assert_eq!(records.len(), 1);
        assert!(!records[0].ok());
        assert!(records[0].error.as_deref().unwrap().contains("expert class"));
        let _ = std::fs::remove_dir_all(&cfg.out_dir);
    }

    fn rec(alg: &'static str, n: usize, rep: usize, excess: f64) -> ReplicateRecord {
        ReplicateRecord {
            experiment_id: "t".into(),
            algorithm: alg,
            n,
            replicate: rep,
            seed: 0,
            excess_risk: excess,
            excess_risk_stderr: 0.0,
            regret: None,
            elapsed_ms: 0,
            error: None,
        }
    }

    #[test]
    fn summarize_single_replicate_collapses() {
        let rows = summarize(&[rec("erm", 8, 0, 0.5)], 0.05);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].median, 0.5);
        assert_eq!(rows[0].quantile, 0.5);
        assert_eq!(rows[0].mean, 0.5);
    }

    #[test]
    fn summarize_quantile_is_upper_order_statistic() {
        let records: Vec<ReplicateRecord> =
            (1..=100).map(|i| rec("erm", 8, i, i as f64)).collect();
        let rows = summarize(&records, 0.05);
        assert_eq!(rows[0].quantile, 95.0);
        assert_eq!(rows[0].quantile_level, 0.95);
    }

    #[test]
    fn summarize_equivariant_under_shift() {
        let vals = [0.3, 0.9, 0.1, 0.7, 0.5];
        let records: Vec<ReplicateRecord> =
            vals.iter().enumerate().map(|(i, v)| rec("erm", 8, i, *v)).collect();
        let shifted: Vec<ReplicateRecord> =
            vals.iter().enumerate().map(|(i, v)| rec("erm", 8, i, v + 2.0)).collect();
        let a = summarize(&records, 0.2);
        let b = summarize(&shifted, 0.2);
        assert!((a[0].quantile + 2.0 - b[0].quantile).abs() < 1e-12);
        assert!((a[0].median + 2.0 - b[0].median).abs() < 1e-12);
    }

    #[test]
    fn summarize_order_invariant() {
        let mut records: Vec<ReplicateRecord> =
            (0..20).map(|i| rec("erm", 8, i, (i as f64 * 37.0) % 11.0)).collect();
        let a = summarize(&records, 0.1);
        records.reverse();
        let b = summarize(&records, 0.1);
        assert_eq!(a, b);
    }

    #[test]
    fn fit_rate_exact_inverse_law() {
        let ns = [256.0, 512.0, 1024.0, 2048.0];
        let vals: Vec<f64> = ns.iter().map(|n| 3.0 / n).collect();
        let fit = fit_rate(&ns, &vals).unwrap();
        assert!((fit.slope + 1.0).abs() < 1e-10);
        assert!((fit.r_squared - 1.0).abs() < 1e-10);
    }

    #[test]
    fn fit_rate_constant_has_zero_slope() {
        let ns = [256.0, 512.0, 1024.0];
        let vals = [0.7, 0.7, 0.7];
        let fit = fit_rate(&ns, &vals).unwrap();
        assert!(fit.slope.abs() < 1e-12);
    }

    #[test]
    fn fit_rate_log_law_slope_range() {
        let ns: Vec<f64> = (8..=12).map(|k| (1usize << k) as f64).collect();
        let vals: Vec<f64> = ns.iter().map(|n| 2.0 * n.ln() / n).collect();
        let fit = fit_rate(&ns, &vals).unwrap();
        assert!(fit.slope > -1.0 && fit.slope < -0.8, "slope {}", fit.slope);
    }

    #[test]
    fn fit_rate_excludes_nonpositive_and_errors_when_starved() {
        let ns = [2.0, 4.0, 8.0, 16.0];
        let vals = [1.0, 0.0, -1.0, 0.5];
        assert!(matches!(fit_rate(&ns, &vals), Err(Error::Precondition { .. })));
        let vals_ok = [1.0, 0.5, 0.0, 0.25];
        let fit = fit_rate(&ns, &vals_ok).unwrap();
        assert_eq!(fit.points_used, 3);
        assert_eq!(fit.points_excluded, 1);
    }

    #[test]
    fn compare_bounds_extremes() {
        let records: Vec<ReplicateRecord> =
            (0..10).map(|i| rec("erm", 8, i, 0.1 + i as f64 * 0.01)).collect();
        let huge = compare_bounds(&records, |_| 1e50, 0.05);
        assert!(huge.iter().all(|r| !r.violation));
        let zero = compare_bounds(&records, |_| 0.0, 0.05);
        assert!(zero.iter().all(|r| r.violation));
    }

    #[test]
    fn csv_error_rows_leave_numeric_fields_empty() {
        let mut r = rec("erm", 8, 0, 0.5);
        r.error = Some("boom, with commas\nand lines".into());
        let csv = records_to_csv(&[r]);
        let line = csv.lines().nth(1).unwrap();
        assert_eq!(line.split(',').count(), 10);
        assert!(line.ends_with("boom; with commas;and lines"));
        assert!(!line.contains("0.5"));
    }
}
