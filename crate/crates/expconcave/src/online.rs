//! Online convex optimization learners and their regret machinery.
//!
//! Three learners are implemented for loss sequences over a convex domain:
//!
//! - **OGD**: projected gradient with step `1/(nu t)` for `nu`-strongly
//!   convex per-round losses.
//! - **ONS** (Online Newton Step, Hazan-Agarwal-Kale 2007): rank-one
//!   second-order updates `A_t = A_{t-1} + g_t g_t^T` with generalized
//!   projection in the `A_t` norm. Inverses are maintained by
//!   Sherman-Morrison with periodic recomputation to control drift.
//! - **EWOO** (Exponentially Weighted Online Optimization): plays the
//!   exponentially weighted mean of the feasible set under cumulative loss,
//!   approximated by deterministic grid quadrature with log-sum-exp
//!   stabilization. Grids over boxes use trapezoid quadrature weights;
//!   balls and simplices use equal weights.
//!
//! All learners are prequential: the iterate at round `t` depends only on
//! the first `t - 1` outcomes, so a run on a prefix reproduces the same
//! iterates bit for bit.
//!
//! The module also provides regret measurement against the empirical
//! minimizer, online-to-batch conversion by iterate averaging with its
//! high-probability excess-risk bound, the progressive mixture rule over a
//! finite expert class, and the worst-case regret bound formulas.

use crate::domains::{ConvexDomain, DomainKind};
use crate::erm::{erm_fit, SolverConfig};
use crate::linalg::{self, SymMat};
use crate::losses::{LossModel, Outcome};
use crate::stats::logsumexp;
use crate::{Error, Result};

/// Iteration cap and tolerance for the generalized projections inside ONS.
const PROJ_NORM_TOL: f64 = 1e-8;
const PROJ_NORM_MAX_ITERS: usize = 200_000;
/// Sherman-Morrison inverses are recomputed from scratch this often.
const ONS_INV_REFRESH: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LearnerKind {
    Ogd,
    Ons,
    Ewoo,
}

/// Parameters a run was configured with; fields not applicable to the
/// learner are `None`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunParams {
    pub eta: Option<f64>,
    pub gamma: Option<f64>,
    pub g_bound: Option<f64>,
    pub d_bound: Option<f64>,
    pub nu: Option<f64>,
    pub resolution: Option<usize>,
}

/// Trace of one online run: the iterate and incurred loss per round.
#[derive(Debug, Clone)]
pub struct OnlineRun {
    pub kind: LearnerKind,
    /// `f_1 .. f_n`; `f_t` depends only on the first `t - 1` outcomes.
    pub iterates: Vec<Vec<f64>>,
    pub per_round_loss: Vec<f64>,
    pub params: RunParams,
    pub warnings: Vec<String>,
}

impl OnlineRun {
    pub fn rounds(&self) -> usize {
        self.iterates.len()
    }
}

/// Online gradient descent with step `1/(nu t)`.
pub fn ogd_run(
    loss: &LossModel,
    domain: &ConvexDomain,
    sequence: &[Outcome],
    nu: f64,
    g_bound: f64,
) -> Result<OnlineRun> {
    if !(nu > 0.0) {
        return Err(Error::invalid("nu", "must be positive"));
    }
    let mut f = domain.project(&domain.centroid())?;
    let mut iterates = Vec::with_capacity(sequence.len());
    let mut per_round_loss = Vec::with_capacity(sequence.len());
    let mut warnings = Vec::new();
    for (t, z) in sequence.iter().enumerate() {
        iterates.push(f.clone());
        per_round_loss.push(loss.eval(&f, z)?);
        let g = loss.grad(&f, z)?;
        let gn = linalg::norm2(&g);
        if gn > g_bound {
            warnings.push(format!("round {t}: gradient norm {gn} exceeds G={g_bound}"));
        }
        let step = 1.0 / (nu * (t + 1) as f64);
        f = domain.project(&linalg::add_scaled(&f, -step, &g))?;
    }
    Ok(OnlineRun {
        kind: LearnerKind::Ogd,
        iterates,
        per_round_loss,
        params: RunParams { nu: Some(nu), g_bound: Some(g_bound), ..Default::default() },
        warnings,
    })
}

/// Online Newton Step with `gamma = min(1/(4 G D), eta) / 2` and
/// `A_0 = I / (gamma D)^2`.
pub fn ons_run(
    loss: &LossModel,
    domain: &ConvexDomain,
    sequence: &[Outcome],
    eta: f64,
    g_bound: f64,
    d_bound: f64,
) -> Result<OnlineRun> {
    if !(eta > 0.0) {
        return Err(Error::invalid("eta", "must be positive"));
    }
    if !(g_bound > 0.0) || !(d_bound > 0.0) {
        return Err(Error::invalid("G", "G and D must be positive"));
    }
    let d = domain.dim();
    let gamma = 0.5 * (1.0 / (4.0 * g_bound * d_bound)).min(eta);
    let eps = 1.0 / (gamma * gamma * d_bound * d_bound);
    let mut a = SymMat::eye(d, eps);
    let mut a_inv = SymMat::eye(d, 1.0 / eps);
    let mut f = domain.project(&domain.centroid())?;
    let mut iterates = Vec::with_capacity(sequence.len());
    let mut per_round_loss = Vec::with_capacity(sequence.len());
    let mut warnings = Vec::new();
    for (t, z) in sequence.iter().enumerate() {
        iterates.push(f.clone());
        per_round_loss.push(loss.eval(&f, z)?);
        let g = loss.grad(&f, z)?;
        let gn = linalg::norm2(&g);
        if gn > g_bound {
            warnings.push(format!("round {t}: gradient norm {gn} exceeds G={g_bound}"));
        }
        a.add_outer(&g, 1.0);
        if (t + 1) % ONS_INV_REFRESH == 0 {
            a_inv = a.inverse()?;
        } else {
            // Sherman-Morrison: (A + g g^T)^{-1} = A^{-1} - (A^{-1} g)(A^{-1} g)^T / (1 + g^T A^{-1} g)
            let u = a_inv.matvec(&g);
            let denom = 1.0 + linalg::dot(&g, &u);
            a_inv.add_outer(&u, -1.0 / denom);
        }
        let target = linalg::add_scaled(&f, -1.0 / gamma, &a_inv.matvec(&g));
        f = domain.project_norm(&target, &a, PROJ_NORM_TOL, PROJ_NORM_MAX_ITERS)?;
    }
    Ok(OnlineRun {
        kind: LearnerKind::Ons,
        iterates,
        per_round_loss,
        params: RunParams {
            eta: Some(eta),
            gamma: Some(gamma),
            g_bound: Some(g_bound),
            d_bound: Some(d_bound),
            ..Default::default()
        },
        warnings,
    })
}

/// Quadrature weight of each grid point: trapezoid weights on boxes (half
/// weight at axis endpoints), equal weights elsewhere.
fn quadrature_log_weights(domain: &ConvexDomain, grid: &[Vec<f64>]) -> Vec<f64> {
    match domain.kind() {
        DomainKind::Box { lo, hi } => grid
            .iter()
            .map(|q| {
                let mut lw = 0.0;
                for i in 0..q.len() {
                    let tol = 1e-9 * (1.0 + (hi[i] - lo[i]).abs());
                    if (q[i] - lo[i]).abs() <= tol || (q[i] - hi[i]).abs() <= tol {
                        lw += 0.5f64.ln();
                    }
                }
                lw
            })
            .collect(),
        _ => vec![0.0; grid.len()],
    }
}

/// Exponentially weighted online optimization over a deterministic grid.
///
/// The iterate at round `t` is the weighted mean of the grid under weights
/// `exp(-eta * cumulative loss)`; before any data this is the grid centroid.
pub fn ewoo_run(
    loss: &LossModel,
    domain: &ConvexDomain,
    sequence: &[Outcome],
    eta: f64,
    resolution: usize,
) -> Result<OnlineRun> {
    if !(eta > 0.0) {
        return Err(Error::invalid("eta", "must be positive"));
    }
    if domain.dim() > 3 {
        return Err(Error::UnsupportedDimension { dim: domain.dim(), max: 3 });
    }
    if resolution < 8 {
        return Err(Error::precondition(format!(
            "EWOO quadrature needs resolution >= 8, got {resolution}"
        )));
    }
    let grid = domain.grid_points(resolution)?;
    let quad_lw = quadrature_log_weights(domain, &grid);
    let dim = domain.dim();
    let mut cum = vec![0.0; grid.len()];
    let mut iterates = Vec::with_capacity(sequence.len());
    let mut per_round_loss = Vec::with_capacity(sequence.len());
    let mut logw = vec![0.0; grid.len()];
    for z in sequence {
        for i in 0..grid.len() {
            logw[i] = quad_lw[i] - eta * cum[i];
        }
        let shift = logsumexp(&logw);
        let mut f = vec![0.0; dim];
        for (i, point) in grid.iter().enumerate() {
            let w = (logw[i] - shift).exp();
            for (acc, v) in f.iter_mut().zip(point) {
                *acc += w * v;
            }
        }
        per_round_loss.push(loss.eval(&f, z)?);
        iterates.push(f);
        for (c, point) in cum.iter_mut().zip(&grid) {
            *c += loss.eval(point, z)?;
        }
    }
    Ok(OnlineRun {
        kind: LearnerKind::Ewoo,
        iterates,
        per_round_loss,
        params: RunParams {
            eta: Some(eta),
            resolution: Some(resolution),
            ..Default::default()
        },
        warnings: Vec::new(),
    })
}

/// Cumulative loss of a run minus the cumulative loss of the best fixed
/// hypothesis in hindsight (computed by ERM on the full sequence).
#[derive(Debug, Clone)]
pub struct RegretTrace {
    pub cumulative_loss: f64,
    pub comparator_loss: f64,
    pub regret: f64,
    pub comparator: Vec<f64>,
}

pub fn regret_of(
    loss: &LossModel,
    domain: &ConvexDomain,
    sequence: &[Outcome],
    run: &OnlineRun,
) -> Result<RegretTrace> {
    if run.iterates.len() != sequence.len() || run.per_round_loss.len() != sequence.len() {
        return Err(Error::invalid("run", "run length does not match the sequence"));
    }
    let comparator = if domain.diameter() == 0.0 {
        domain.centroid()
    } else {
        erm_fit(loss, domain, sequence, &SolverConfig::default())?
    };
    let cumulative_loss: f64 = run.per_round_loss.iter().sum();
    let mut comparator_loss = 0.0;
    for z in sequence {
        comparator_loss += loss.eval(&comparator, z)?;
    }
    Ok(RegretTrace {
        cumulative_loss,
        comparator_loss,
        regret: cumulative_loss - comparator_loss,
        comparator,
    })
}

/// Online-to-batch conversion: coordinate-wise mean of the iterates. Lies in
/// the domain by convexity.
pub fn average_iterates(run: &OnlineRun) -> Result<Vec<f64>> {
    if run.iterates.is_empty() {
        return Err(Error::precondition("average_iterates requires a nonempty run"));
    }
    let dim = run.iterates[0].len();
    let mut avg = vec![0.0; dim];
    for it in &run.iterates {
        for (a, v) in avg.iter_mut().zip(it) {
            *a += v;
        }
    }
    let n = run.iterates.len() as f64;
    for a in &mut avg {
        *a /= n;
    }
    Ok(avg)
}

// ---------------------------------------------------------------------------
// Progressive mixture
// ---------------------------------------------------------------------------

/// State of a progressive mixture run over a finite expert class. Weight
/// vectors index the caller's expert list.
#[derive(Debug, Clone)]
pub struct MixtureState {
    pub prior: Vec<f64>,
    /// Gibbs posterior after all rounds.
    pub posterior: Vec<f64>,
    /// Cesaro average `(1/(n+1)) sum_{t=0..n} posterior_t`; the rule's
    /// output. Its prediction at `x` is the weighted mean of expert
    /// predictions.
    pub cesaro: Vec<f64>,
    pub rounds: usize,
}

fn normalize_prior(prior: &[f64]) -> Result<Vec<f64>> {
    if prior.is_empty() {
        return Err(Error::invalid("prior", "must be nonempty"));
    }
    if prior.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
        return Err(Error::invalid("prior", "entries must be nonnegative and finite"));
    }
    let s: f64 = prior.iter().sum();
    if s <= 0.0 {
        return Err(Error::invalid("prior", "must have positive mass"));
    }
    Ok(prior.iter().map(|p| p / s).collect())
}

/// Progressive mixture from a precomputed loss table: `losses[e][t]` is the
/// loss of expert `e` on round `t`.
pub fn progressive_mixture_from_losses(
    losses: &[Vec<f64>],
    prior: &[f64],
    eta: f64,
) -> Result<MixtureState> {
    if !(eta > 0.0) {
        return Err(Error::invalid("eta", "must be positive"));
    }
    let k = losses.len();
    if k == 0 {
        return Err(Error::precondition("progressive mixture requires a nonempty class"));
    }
    if prior.len() != k {
        return Err(Error::invalid("prior", "length must match the class size"));
    }
    let n = losses[0].len();
    if losses.iter().any(|row| row.len() != n) {
        return Err(Error::invalid("losses", "ragged loss table"));
    }
    let prior = normalize_prior(prior)?;
    let ln_prior: Vec<f64> = prior.iter().map(|p| p.ln()).collect();
    let mut cum = vec![0.0; k];
    let mut cesaro = prior.clone();
    let mut posterior = prior.clone();
    let mut logw = vec![0.0; k];
    for t in 0..n {
        for e in 0..k {
            cum[e] += losses[e][t];
            logw[e] = ln_prior[e] - eta * cum[e];
        }
        let shift = logsumexp(&logw);
        for e in 0..k {
            posterior[e] = (logw[e] - shift).exp();
        }
        for e in 0..k {
            cesaro[e] += posterior[e];
        }
    }
    let denom = (n + 1) as f64;
    for c in &mut cesaro {
        *c /= denom;
    }
    debug_assert!((cesaro.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    Ok(MixtureState { prior, posterior, cesaro, rounds: n })
}

/// Progressive mixture over a finite set of hypotheses in the domain.
pub fn progressive_mixture_run(
    loss: &LossModel,
    class: &[Vec<f64>],
    prior: &[f64],
    eta: f64,
    sample: &[Outcome],
) -> Result<MixtureState> {
    if class.is_empty() {
        return Err(Error::precondition("progressive mixture requires a nonempty class"));
    }
    let mut table = vec![vec![0.0; sample.len()]; class.len()];
    for (e, f) in class.iter().enumerate() {
        for (t, z) in sample.iter().enumerate() {
            table[e][t] = loss.eval(f, z)?;
        }
    }
    progressive_mixture_from_losses(&table, prior, eta)
}

// ---------------------------------------------------------------------------
// Bound formulas
// ---------------------------------------------------------------------------

/// Parameters for the worst-case regret bounds.
#[derive(Debug, Clone, Copy)]
pub struct RegretBoundParams {
    pub eta: f64,
    pub g_bound: f64,
    pub d_bound: f64,
    pub nu: f64,
    pub dim: usize,
    pub n: f64,
}

/// Worst-case regret bound of each learner over `n` rounds:
/// ONS `5 (1/eta + G D) d log n`, EWOO `(1/eta) d (1 + log(n+1))`,
/// OGD `(G^2 / 2 nu)(1 + log n)`.
pub fn regret_bound(kind: LearnerKind, p: &RegretBoundParams) -> Result<f64> {
    if !(p.n > 0.0) {
        return Err(Error::invalid("n", "must be positive"));
    }
    match kind {
        LearnerKind::Ons => {
            if !(p.eta > 0.0 && p.g_bound > 0.0 && p.d_bound > 0.0) {
                return Err(Error::invalid("params", "ONS needs positive eta, G, D"));
            }
            Ok(5.0 * (1.0 / p.eta + p.g_bound * p.d_bound) * p.dim as f64 * p.n.ln())
        }
        LearnerKind::Ewoo => {
            if !(p.eta > 0.0) {
                return Err(Error::invalid("params", "EWOO needs positive eta"));
            }
            Ok((1.0 / p.eta) * p.dim as f64 * (1.0 + (p.n + 1.0).ln()))
        }
        LearnerKind::Ogd => {
            if !(p.nu > 0.0 && p.g_bound > 0.0) {
                return Err(Error::invalid("params", "OGD needs positive nu and G"));
            }
            Ok((p.g_bound * p.g_bound / (2.0 * p.nu)) * (1.0 + p.n.ln()))
        }
    }
}

/// High-probability excess-risk bound for the averaged iterate of an online
/// run with realized regret `r_n` under a `B`-bounded `eta`-exp-concave
/// loss, valid for `n >= 3`:
///
/// `R/n + 4 sqrt((1/eta + B) log(4 log n / delta)) sqrt(R)/n
///      + 16 (1/eta + B) log(4 log n / delta) / n`.
///
/// Negative realized regret is clamped to zero before taking square roots.
pub fn o2b_excess_bound(r_n: f64, eta: f64, b: f64, n: usize, delta: f64) -> Result<f64> {
    if n < 3 {
        return Err(Error::precondition(format!("requires n >= 3, got {n}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid("delta", format!("must lie in (0,1), got {delta}")));
    }
    if !(eta > 0.0) {
        return Err(Error::invalid("eta", "must be positive"));
    }
    if !(b >= 0.0) {
        return Err(Error::invalid("B", "must be nonnegative"));
    }
    let r = r_n.max(0.0);
    let n_f = n as f64;
    let c = 1.0 / eta + b;
    let lg = (4.0 * n_f.ln() / delta).ln();
    Ok(r / n_f + 4.0 * (c * lg).sqrt() * r.sqrt() / n_f + 16.0 * c * lg / n_f)
}
