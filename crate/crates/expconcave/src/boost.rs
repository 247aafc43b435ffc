//! Two-phase confidence boosting and model-selection aggregation.
//!
//! The core meta-algorithm runs a base learner on `K` disjoint phase-I
//! sample batches and then selects among the `K` resulting hypotheses by
//! finite-class ERM on a fresh phase-II batch. Under a Bernstein condition
//! the selection phase loses only a `log(1/delta)` factor instead of the
//! `1/sqrt(n)` resolution a Hoeffding-based selection would pay; the
//! [`meta_bound`] evaluator computes the resulting excess-risk bound.
//!
//! On top of it sit two aggregation pipelines for finite expert classes
//! under supervised losses. Both first run the progressive mixture rule on
//! disjoint batches and then learn over the convex hull of the resulting
//! mixtures, reparameterized as a probability simplex in the candidate
//! predictions:
//!
//! - [`pm_ewoo`]: refines the candidates with EWOO over the simplex and
//!   averages its iterates (no Lipschitz assumption used anywhere).
//! - [`pm_cb`]: boosts simplex ERM with the confidence-boost device, using
//!   a second tranche of phase-I batches.
//!
//! [`bayes_redundancy`] evaluates the prior-weighted complexity functional
//! appearing in the aggregation bounds, in closed form via its Gibbs
//! minimizer.

use crate::domains::ConvexDomain;
use crate::erm::{erm_finite, erm_fit, SolverConfig};
use crate::linalg;
use crate::losses::{LossKind, LossModel, Outcome};
use crate::online::{average_iterates, ewoo_run, progressive_mixture_from_losses};
use crate::stats::logsumexp;
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Split plans
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitVariant {
    /// `K = ceil(log(2/delta))` phase-I batches of `n/(2K)` points each,
    /// phase II gets `n/2`.
    Cb,
    /// `K = ceil(log(3/delta))`, with `2K` phase-I batches of `n/(4K)`
    /// points each (two tranches of `K`), phase II gets `n/2`.
    PmCb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitPlan {
    pub variant: SplitVariant,
    pub k: usize,
    /// Points per phase-I batch.
    pub n_phase1: usize,
    /// Points in the phase-II selection batch.
    pub n_phase2: usize,
    /// Total points used; the batches partition a prefix of the sample.
    pub consumed: usize,
    /// Leftover points from floor division, never touched.
    pub discarded: usize,
}

impl SplitPlan {
    fn phase1_batches(&self) -> usize {
        match self.variant {
            SplitVariant::Cb => self.k,
            SplitVariant::PmCb => 2 * self.k,
        }
    }
}

/// Compute the sample split for a boosted run. Sizes use floor division and
/// the remainder is discarded (and recorded).
pub fn split_plan(n: usize, delta: f64, variant: SplitVariant) -> Result<SplitPlan> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid("delta", format!("must lie in (0,1), got {delta}")));
    }
    let (k, batches, denom) = match variant {
        SplitVariant::Cb => {
            let k = ((2.0 / delta).ln().ceil() as usize).max(1);
            (k, k, 2 * k)
        }
        SplitVariant::PmCb => {
            let k = ((3.0 / delta).ln().ceil() as usize).max(1);
            (k, 2 * k, 4 * k)
        }
    };
    let n_phase1 = n / denom;
    let n_phase2 = n / 2;
    if n_phase1 < 1 || n_phase2 < 1 {
        return Err(Error::precondition(format!(
            "sample of {n} points is too small for {batches} phase-I batches (K={k})"
        )));
    }
    let consumed = batches * n_phase1 + n_phase2;
    debug_assert!(consumed <= n);
    Ok(SplitPlan { variant, k, n_phase1, n_phase2, consumed, discarded: n - consumed })
}

// ---------------------------------------------------------------------------
// ConfidenceBoost
// ---------------------------------------------------------------------------

/// Result of a boosted run. The hypothesis is always one of the phase-I
/// candidates.
#[derive(Debug, Clone)]
pub struct BoostOutcome {
    pub hypothesis: Vec<f64>,
    pub chosen: usize,
    pub candidates: Vec<Vec<f64>>,
    pub plan: Option<SplitPlan>,
}

/// Core of the meta-algorithm with the batches supplied by the caller: run
/// the base learner on each batch, then pick the candidate with the lowest
/// empirical risk on the selection batch.
pub fn confidence_boost_with_batches<A>(
    base: A,
    loss: &LossModel,
    batches: &[&[Outcome]],
    selection: &[Outcome],
) -> Result<BoostOutcome>
where
    A: Fn(&[Outcome]) -> Result<Vec<f64>>,
{
    if batches.is_empty() {
        return Err(Error::precondition("confidence boost needs at least one phase-I batch"));
    }
    let mut candidates = Vec::with_capacity(batches.len());
    for (j, batch) in batches.iter().enumerate() {
        let f = base(batch).map_err(|e| {
            Error::precondition(format!("base learner failed on phase-I batch {j}: {e}"))
        })?;
        candidates.push(f);
    }
    let (chosen, hypothesis) = erm_finite(loss, &candidates, selection)?;
    Ok(BoostOutcome { hypothesis, chosen, candidates, plan: None })
}

/// Run the base learner on `K` disjoint phase-I batches carved from a
/// prefix of `sample` and select among the results by ERM on the phase-II
/// batch.
pub fn confidence_boost<A>(
    base: A,
    loss: &LossModel,
    sample: &[Outcome],
    delta: f64,
) -> Result<BoostOutcome>
where
    A: Fn(&[Outcome]) -> Result<Vec<f64>>,
{
    let plan = split_plan(sample.len(), delta, SplitVariant::Cb)?;
    let batches: Vec<&[Outcome]> = (0..plan.k)
        .map(|j| &sample[j * plan.n_phase1..(j + 1) * plan.n_phase1])
        .collect();
    let start = plan.k * plan.n_phase1;
    let selection = &sample[start..start + plan.n_phase2];
    let mut out = confidence_boost_with_batches(base, loss, &batches, selection)?;
    out.plan = Some(plan);
    Ok(out)
}

// ---------------------------------------------------------------------------
// Bound evaluators
// ---------------------------------------------------------------------------

/// Excess-risk bound for the boosted run of a base learner whose expected
/// excess risk on `m` points is at most `psi(m)`, under a `(C, q)`-Bernstein
/// condition and excess-loss diameter `B`:
///
/// `e psi(n/2K) + max{ 4^(1/q) e psi(n/2K),
///                     (4 (C + B^(2-q)/3) (log(1/delta) + log K) / n)^(1/(2-q)) }`
///
/// with `K = ceil(log(2/delta))` in both occurrences.
pub fn meta_bound(
    psi: impl Fn(f64) -> f64,
    c: f64,
    q: f64,
    b: f64,
    n: usize,
    delta: f64,
) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid("delta", format!("must lie in (0,1), got {delta}")));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::invalid("q", format!("must lie in (0,1], got {q}")));
    }
    if !(c > 0.0) {
        return Err(Error::invalid("C", "must be positive"));
    }
    if !(b >= 0.0) {
        return Err(Error::invalid("B", "must be nonnegative"));
    }
    if n == 0 {
        return Err(Error::invalid("n", "must be positive"));
    }
    let k = ((2.0 / delta).ln().ceil()).max(1.0);
    let m = n as f64 / (2.0 * k);
    let phase1 = std::f64::consts::E * psi(m);
    let arm1 = 4.0f64.powf(1.0 / q) * phase1;
    let arm2 = (4.0 * (c + b.powf(2.0 - q) / 3.0) * ((1.0 / delta).ln() + k.ln()) / n as f64)
        .powf(1.0 / (2.0 - q));
    Ok(phase1 + arm1.max(arm2))
}

/// The two base-learner settings with known `O(d/n)` in-expectation rates.
#[derive(Debug, Clone, Copy)]
pub enum PsiSetting {
    /// Penalized ERM under a `beta`-smooth loss (`beta >= 1`) with a
    /// 1-strongly-convex regularizer of diameter `r`:
    /// `psi(m) = (24 beta d / eta + 100 B d + r) / m`.
    Smooth { beta: f64, eta: f64, b: f64, r: f64, d: usize },
    /// Plain ERM for generalized linear losses that are strongly convex and
    /// Lipschitz in the prediction: `psi(m) = 2 d / (eta m)`.
    Glm { eta: f64, d: usize, b: f64 },
}

/// Bound for the boosted run in one of the two known base-learner settings,
/// with `C = 4 (1/eta + B)` and `q = 1`.
pub fn boosted_erm_bound(setting: PsiSetting, n: usize, delta: f64) -> Result<f64> {
    match setting {
        PsiSetting::Smooth { beta, eta, b, r, d } => {
            if !(beta >= 1.0) {
                return Err(Error::precondition(format!(
                    "smooth setting requires beta >= 1, got {beta}"
                )));
            }
            if !(eta > 0.0) {
                return Err(Error::invalid("eta", "must be positive"));
            }
            let coeff = 24.0 * beta * d as f64 / eta + 100.0 * b * d as f64 + r;
            meta_bound(|m| coeff / m, 4.0 * (1.0 / eta + b), 1.0, b, n, delta)
        }
        PsiSetting::Glm { eta, d, b } => {
            if !(eta > 0.0) {
                return Err(Error::invalid("eta", "must be positive"));
            }
            let coeff = 2.0 * d as f64 / eta;
            meta_bound(|m| coeff / m, 4.0 * (1.0 / eta + b), 1.0, b, n, delta)
        }
    }
}

// ---------------------------------------------------------------------------
// Expert classes and reparameterization
// ---------------------------------------------------------------------------

/// A predictor in a finite aggregation class.
#[derive(Debug, Clone, PartialEq)]
pub enum Expert {
    /// `x -> <w, x>`
    Linear(Vec<f64>),
    Constant(f64),
}

impl Expert {
    pub fn predict(&self, x: &[f64]) -> f64 {
        match self {
            Expert::Linear(w) => linalg::dot(w, x),
            Expert::Constant(c) => *c,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpertClass {
    pub experts: Vec<Expert>,
}

impl ExpertClass {
    pub fn new(experts: Vec<Expert>) -> Result<Self> {
        if experts.is_empty() {
            return Err(Error::invalid("experts", "class must be nonempty"));
        }
        Ok(Self { experts })
    }

    /// Load linear experts from a CSV of parameter vectors, one expert per
    /// line; `#` starts a comment.
    pub fn from_csv_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::invalid("class_file", format!("cannot read {}: {e}", path.display()))
        })?;
        let mut experts = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let w: Vec<f64> = line
                .split(',')
                .map(|s| {
                    s.trim().parse::<f64>().map_err(|_| {
                        Error::invalid(
                            "class_file",
                            format!("line {}: not a number: `{s}`", lineno + 1),
                        )
                    })
                })
                .collect::<Result<_>>()?;
            if w.is_empty() {
                return Err(Error::invalid(
                    "class_file",
                    format!("line {}: empty row", lineno + 1),
                ));
            }
            experts.push(Expert::Linear(w));
        }
        Self::new(experts)
    }

    pub fn len(&self) -> usize {
        self.experts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.experts.is_empty()
    }

    pub fn predictions(&self, x: &[f64]) -> Vec<f64> {
        self.experts.iter().map(|e| e.predict(x)).collect()
    }
}

/// A convex combination of the experts of a class; predicts the weighted
/// mean of the expert predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMixture {
    pub weights: Vec<f64>,
}

impl ClassMixture {
    pub fn point_mass(k: usize, index: usize) -> Self {
        let mut weights = vec![0.0; k];
        weights[index] = 1.0;
        Self { weights }
    }

    pub fn predict(&self, class: &ExpertClass, x: &[f64]) -> f64 {
        linalg::dot(&self.weights, &class.predictions(x))
    }
}

/// The convex hull of `K` candidate predictors, reparameterized as the
/// probability simplex over their predictions: the induced loss at simplex
/// point `q` on outcome `(x, y)` is the original supervised loss at the
/// prediction `<q, (c_1(x), .., c_K(x))>`.
///
/// Exp-concavity in the prediction is inherited, so the induced loss keeps
/// the original `eta` and diameter.
#[derive(Debug, Clone)]
pub struct Reparam {
    pub domain: ConvexDomain,
    pub loss: LossModel,
    class: ExpertClass,
    candidates: Vec<ClassMixture>,
}

pub fn reparameterize(
    loss: &LossModel,
    class: &ExpertClass,
    candidates: Vec<ClassMixture>,
) -> Result<Reparam> {
    if candidates.is_empty() {
        return Err(Error::invalid("candidates", "need at least one candidate"));
    }
    if loss.kind() == LossKind::Custom {
        return Err(Error::invalid("loss", "aggregation requires a supervised loss form"));
    }
    for c in &candidates {
        if c.weights.len() != class.len() {
            return Err(Error::invalid("candidates", "weight length does not match class"));
        }
    }
    Ok(Reparam {
        domain: ConvexDomain::simplex(candidates.len())?,
        loss: loss.clone(),
        class: class.clone(),
        candidates,
    })
}

impl Reparam {
    pub fn k(&self) -> usize {
        self.candidates.len()
    }

    /// Map an outcome to the transformed space: inputs become the vector of
    /// candidate predictions.
    pub fn transform(&self, z: &Outcome) -> Outcome {
        let preds = self.class.predictions(&z.x);
        let tx: Vec<f64> =
            self.candidates.iter().map(|c| linalg::dot(&c.weights, &preds)).collect();
        Outcome::new(tx, z.y)
    }

    pub fn transform_sample(&self, sample: &[Outcome]) -> Vec<Outcome> {
        sample.iter().map(|z| self.transform(z)).collect()
    }

    /// Map a simplex point over the candidates back to a mixture over the
    /// original class.
    pub fn map_back(&self, q: &[f64]) -> ClassMixture {
        let k = self.class.len();
        let mut weights = vec![0.0; k];
        for (qi, cand) in q.iter().zip(&self.candidates) {
            for (w, cw) in weights.iter_mut().zip(&cand.weights) {
                *w += qi * cw;
            }
        }
        ClassMixture { weights }
    }
}

// ---------------------------------------------------------------------------
// Aggregation pipelines
// ---------------------------------------------------------------------------

/// Progressive mixture over an expert class on one batch; returns the
/// Cesaro-averaged mixture.
pub fn pm_mixture(
    loss: &LossModel,
    class: &ExpertClass,
    prior: &[f64],
    eta: f64,
    batch: &[Outcome],
) -> Result<ClassMixture> {
    let mut table = vec![vec![0.0; batch.len()]; class.len()];
    for (e, expert) in class.experts.iter().enumerate() {
        for (t, z) in batch.iter().enumerate() {
            table[e][t] = loss.eval_pred(z.y, expert.predict(&z.x))?;
        }
    }
    let st = progressive_mixture_from_losses(&table, prior, eta)?;
    Ok(ClassMixture { weights: st.cesaro })
}

/// EWOO grids over the candidate simplex get denser when there are fewer
/// candidates.
fn simplex_resolution(k: usize) -> usize {
    match k {
        1 => 8,
        2 => 64,
        _ => 40,
    }
}

/// Quadrature cap: EWOO over the candidate simplex supports at most this
/// many candidates.
pub const PM_EWOO_MAX_K: usize = 3;

/// Aggregation by progressive mixtures refined with EWOO: run the mixture
/// rule on `K` disjoint phase-I batches, reparameterize the `K` outputs
/// onto the simplex, run EWOO on the phase-II batch over that simplex, and
/// return the averaged iterate mapped back to a mixture of the original
/// experts.
pub fn pm_ewoo(
    class: &ExpertClass,
    prior: &[f64],
    loss: &LossModel,
    sample: &[Outcome],
    delta: f64,
    eta: f64,
) -> Result<ClassMixture> {
    let plan = split_plan(sample.len(), delta, SplitVariant::Cb)?;
    if plan.k > PM_EWOO_MAX_K {
        return Err(Error::UnsupportedDimension { dim: plan.k, max: PM_EWOO_MAX_K });
    }
    let mut candidates = Vec::with_capacity(plan.k);
    for j in 0..plan.k {
        let batch = &sample[j * plan.n_phase1..(j + 1) * plan.n_phase1];
        candidates.push(pm_mixture(loss, class, prior, eta, batch)?);
    }
    let reparam = reparameterize(loss, class, candidates)?;
    let start = plan.k * plan.n_phase1;
    let phase2 = reparam.transform_sample(&sample[start..start + plan.n_phase2]);
    if phase2.is_empty() {
        // Degenerate split: nothing to refine with, stay at the hull center.
        return Ok(reparam.map_back(&reparam.domain.centroid()));
    }
    let run = ewoo_run(&reparam.loss, &reparam.domain, &phase2, eta, simplex_resolution(plan.k))?;
    let q = average_iterates(&run)?;
    Ok(reparam.map_back(&q))
}

/// Aggregation by progressive mixtures selected with the confidence-boost
/// device, under the supplied plan: the first `K` phase-I batches feed the
/// mixture runs, batches `K+1 .. 2K` feed the inner boost's phase I on the
/// reparameterized simplex, and the phase-II batch drives the final
/// selection.
pub fn pm_cb_with_plan(
    class: &ExpertClass,
    prior: &[f64],
    loss: &LossModel,
    sample: &[Outcome],
    plan: &SplitPlan,
    eta: f64,
) -> Result<ClassMixture> {
    let needed = plan.phase1_batches() * plan.n_phase1 + plan.n_phase2;
    if sample.len() < needed {
        return Err(Error::precondition(format!(
            "plan consumes {needed} points but the sample has {}",
            sample.len()
        )));
    }
    let k = plan.k;
    let n1 = plan.n_phase1;
    let mut candidates = Vec::with_capacity(k);
    for j in 0..k {
        candidates.push(pm_mixture(loss, class, prior, eta, &sample[j * n1..(j + 1) * n1])?);
    }
    let reparam = reparameterize(loss, class, candidates)?;
    let inner_batches: Vec<Vec<Outcome>> = (k..plan.phase1_batches())
        .map(|j| reparam.transform_sample(&sample[j * n1..(j + 1) * n1]))
        .collect();
    let inner_refs: Vec<&[Outcome]> = inner_batches.iter().map(|b| b.as_slice()).collect();
    let start = plan.phase1_batches() * n1;
    let selection = reparam.transform_sample(&sample[start..start + plan.n_phase2]);
    let base =
        |batch: &[Outcome]| erm_fit(&reparam.loss, &reparam.domain, batch, &SolverConfig::default());
    let hypothesis = if inner_refs.is_empty() {
        // Single candidate and no second tranche: the mixture itself.
        reparam.domain.centroid()
    } else {
        confidence_boost_with_batches(base, &reparam.loss, &inner_refs, &selection)?.hypothesis
    };
    Ok(reparam.map_back(&hypothesis))
}

/// Full aggregation pipeline with the `PmCb` split of the sample. `alpha`
/// and `lipschitz` are the strong convexity and Lipschitz constants of the
/// supervised loss in the prediction; they certify the guarantee and are
/// validated but not otherwise consumed by the computation.
pub fn pm_cb(
    class: &ExpertClass,
    prior: &[f64],
    loss: &LossModel,
    sample: &[Outcome],
    delta: f64,
    eta: f64,
    alpha: f64,
    lipschitz: f64,
) -> Result<ClassMixture> {
    if !(alpha > 0.0) {
        return Err(Error::invalid("alpha", "must be positive"));
    }
    if !(lipschitz > 0.0) {
        return Err(Error::invalid("L", "must be positive"));
    }
    let plan = split_plan(sample.len(), delta, SplitVariant::PmCb)?;
    pm_cb_with_plan(class, prior, loss, sample, &plan, eta)
}

// ---------------------------------------------------------------------------
// Bayesian redundancy
// ---------------------------------------------------------------------------

/// Inputs for the redundancy functional: a prior over a finite class and
/// the oracle excess risk of each member, at learning rate `eta` and
/// horizon `m`.
#[derive(Debug, Clone)]
pub struct RedundancySpec {
    pub prior: Vec<f64>,
    pub excess_risks: Vec<f64>,
    pub eta: f64,
    pub horizon: usize,
}

#[derive(Debug, Clone)]
pub struct RedundancyReport {
    /// The infimum over posteriors of expected excess risk plus
    /// KL-to-prior divided by `eta (m + 1)`.
    pub value: f64,
    /// Value of the functional at the point mass on the best expert; an
    /// upper bound on `value`.
    pub concentrated_bound: f64,
    /// The Gibbs minimizer achieving `value`.
    pub gibbs_weights: Vec<f64>,
}

/// Evaluate the redundancy functional in closed form: the minimizing
/// posterior is the Gibbs distribution `rho* ~ prior * exp(-eta (m+1) dR)`,
/// giving `-(1/(eta (m+1))) log sum_f prior(f) exp(-eta (m+1) dR(f))`.
pub fn bayes_redundancy(spec: &RedundancySpec) -> Result<RedundancyReport> {
    if spec.prior.len() != spec.excess_risks.len() || spec.prior.is_empty() {
        return Err(Error::invalid(
            "prior",
            "prior and excess risks must have equal nonzero length",
        ));
    }
    if !(spec.eta > 0.0) {
        return Err(Error::invalid("eta", "must be positive"));
    }
    if spec.excess_risks.iter().any(|r| !r.is_finite() || *r < -1e-9) {
        return Err(Error::invalid("excess_risks", "must be finite and nonnegative"));
    }
    let s: f64 = spec.prior.iter().sum();
    if !(s > 0.0) || spec.prior.iter().any(|p| !(*p >= 0.0)) {
        return Err(Error::invalid("prior", "must be nonnegative with positive mass"));
    }
    let scale = spec.eta * (spec.horizon as f64 + 1.0);
    let logits: Vec<f64> = spec
        .prior
        .iter()
        .zip(&spec.excess_risks)
        .map(|(p, r)| (p / s).ln() - scale * r)
        .collect();
    let lse = logsumexp(&logits);
    let value = -lse / scale;
    let gibbs_weights: Vec<f64> = logits.iter().map(|l| (l - lse).exp()).collect();
    let best = spec
        .excess_risks
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("nonempty");
    let concentrated_bound = spec.excess_risks[best] + (s / spec.prior[best]).ln() / scale;
    Ok(RedundancyReport { value, concentrated_bound, gibbs_weights })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::LossModel;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn sq_sample(rng: &mut ChaCha12Rng, n: usize, w: f64) -> Vec<Outcome> {
        (0..n)
            .map(|_| {
                let x = if rng.random::<bool>() { 1.0 } else { -1.0 };
                Outcome::new(vec![x], w * x + rng.random_range(-0.2..0.2))
            })
            .collect()
    }

    #[test]
    fn split_plan_cb_wide_delta() {
        let p = split_plan(100, 0.8, SplitVariant::Cb).unwrap();
        assert_eq!(p.k, 1);
        assert_eq!(p.n_phase1, 50);
        assert_eq!(p.n_phase2, 50);
        assert_eq!(p.discarded, 0);
    }

    #[test]
    fn split_plan_cb_worked_example() {
        let p = split_plan(1024, 0.05, SplitVariant::Cb).unwrap();
        assert_eq!(p.k, 4); // ceil(log 40) = 4
        assert_eq!(p.n_phase1, 128);
        assert_eq!(p.n_phase2, 512);
        assert_eq!(p.consumed, 1024);
    }

    #[test]
    fn split_plan_pmcb_worked_example() {
        let p = split_plan(1024, 0.05, SplitVariant::PmCb).unwrap();
        assert_eq!(p.k, 5); // ceil(log 60) = 5
        assert_eq!(p.n_phase1, 51);
        assert_eq!(p.n_phase2, 512);
        assert_eq!(p.consumed, 2 * 5 * 51 + 512);
        assert_eq!(p.discarded, 1024 - p.consumed);
    }

    #[test]
    fn split_plan_rejects_tiny_samples() {
        assert!(matches!(split_plan(3, 0.05, SplitVariant::Cb), Err(Error::Precondition { .. })));
    }

    #[test]
    fn split_batches_partition_a_prefix() {
        for (n, delta, variant) in [
            (1000usize, 0.05, SplitVariant::Cb),
            (777, 0.3, SplitVariant::Cb),
            (2048, 0.1, SplitVariant::PmCb),
        ] {
            let p = split_plan(n, delta, variant).unwrap();
            let batches = p.phase1_batches();
            assert_eq!(p.consumed, batches * p.n_phase1 + p.n_phase2);
            assert!(p.consumed <= n);
            assert!(p.n_phase1 >= 1 && p.n_phase2 >= 1 && p.k >= 1);
        }
    }

    #[test]
    fn boost_single_batch_equals_base_run() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let loss = LossModel::squared(2.0).unwrap();
        let dom = ConvexDomain::interval(-1.0, 1.0).unwrap();
        let sample = sq_sample(&mut rng, 64, 0.5);
        // delta = 0.8 -> K = 1: output equals the base learner on the first
        // half.
        let base = |b: &[Outcome]| erm_fit(&loss, &dom, b, &SolverConfig::default());
        let out = confidence_boost(&base, &loss, &sample, 0.8).unwrap();
        assert_eq!(out.plan.unwrap().k, 1);
        let direct = base(&sample[..32]).unwrap();
        assert_eq!(out.hypothesis, direct);
        assert_eq!(out.chosen, 0);
    }

    #[test]
    fn boost_constant_base_returns_constant() {
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let loss = LossModel::squared(2.0).unwrap();
        let sample = sq_sample(&mut rng, 200, 0.5);
        let base = |_: &[Outcome]| Ok(vec![0.42]);
        let out = confidence_boost(&base, &loss, &sample, 0.05).unwrap();
        assert_eq!(out.hypothesis, vec![0.42]);
    }

    #[test]
    fn boost_output_is_one_of_the_candidates() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let loss = LossModel::squared(2.0).unwrap();
        let dom = ConvexDomain::interval(-1.0, 1.0).unwrap();
        let sample = sq_sample(&mut rng, 512, 0.5);
        let base = |b: &[Outcome]| erm_fit(&loss, &dom, b, &SolverConfig::default());
        let out = confidence_boost(&base, &loss, &sample, 0.05).unwrap();
        assert!(out.candidates.iter().any(|c| c == &out.hypothesis));
        assert_eq!(out.candidates[out.chosen], out.hypothesis);
    }

    #[test]
    fn boost_propagates_base_failure_with_batch_index() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let loss = LossModel::squared(2.0).unwrap();
        let sample = sq_sample(&mut rng, 1024, 0.5);
        let calls = std::cell::Cell::new(0usize);
        let base = |_: &[Outcome]| {
            let c = calls.get();
            calls.set(c + 1);
            if c == 2 {
                Err(Error::Convergence { residual: 1.0, iters: 10 })
            } else {
                Ok(vec![0.0])
            }
        };
        let err = confidence_boost(&base, &loss, &sample, 0.05).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("batch 2"), "message should carry the batch index: {msg}");
    }

    #[test]
    fn meta_bound_max_first_arm_vanishes_with_zero_psi() {
        // q = 1, psi = 0: bound reduces to 4 (C + B/3)(log(1/d) + log K)/n.
        let (c, b, n, delta) = (8.0, 1.0, 1000usize, 0.05);
        let v = meta_bound(|_| 0.0, c, 1.0, b, n, delta).unwrap();
        let k = (2.0f64 / delta).ln().ceil();
        let expect = 4.0 * (c + b / 3.0) * ((1.0 / delta).ln() + k.ln()) / n as f64;
        assert!((v - expect).abs() < 1e-15);
    }

    #[test]
    fn meta_bound_worked_value() {
        // C = 4(1/eta + B) = 8 for eta = B = 1; q = 1, delta = 0.8 (K = 1),
        // n = 1000, psi(m) = 2/m. Both psi terms evaluate at m = n/(2K) =
        // 500.
        let v = meta_bound(|m| 2.0 / m, 8.0, 1.0, 1.0, 1000, 0.8).unwrap();
        let e = std::f64::consts::E;
        let phase1 = e * (2.0 / 500.0);
        let arm1 = 4.0 * phase1;
        let arm2 = 4.0 * (8.0 + 1.0 / 3.0) * (1.0f64 / 0.8).ln() / 1000.0;
        assert!((v - (phase1 + arm1.max(arm2))).abs() < 1e-15);
        assert!((v - 0.054366).abs() < 1e-6, "got {v}");
        assert!(arm1 > arm2);
    }

    #[test]
    fn meta_bound_continuous_at_q_one() {
        let at_one = meta_bound(|m| 2.0 / m, 8.0, 1.0, 1.0, 1000, 0.1).unwrap();
        let near_one = meta_bound(|m| 2.0 / m, 8.0, 1.0 - 1e-6, 1.0, 1000, 0.1).unwrap();
        assert!(((at_one - near_one) / at_one).abs() < 1e-5);
    }

    #[test]
    fn meta_bound_scales_inversely_with_n() {
        let mut prev = f64::INFINITY;
        for n in [100usize, 200, 400, 800] {
            let v = meta_bound(|m| 2.0 / m, 8.0, 1.0, 1.0, n, 0.1).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn boosted_bound_smooth_requires_beta_at_least_one() {
        assert!(matches!(
            boosted_erm_bound(
                PsiSetting::Smooth { beta: 0.5, eta: 1.0, b: 1.0, r: 1.0, d: 2 },
                1000,
                0.1
            ),
            Err(Error::Precondition { .. })
        ));
    }

    #[test]
    fn boosted_bound_glm_composes_meta_bound() {
        let v = boosted_erm_bound(PsiSetting::Glm { eta: 1.0, d: 2, b: 1.0 }, 1000, 0.8).unwrap();
        let direct = meta_bound(|m| 4.0 / m, 8.0, 1.0, 1.0, 1000, 0.8).unwrap();
        assert_eq!(v, direct);
    }

    #[test]
    fn boosted_bound_glm_linear_in_d_when_psi_arm_active() {
        let v1 = boosted_erm_bound(PsiSetting::Glm { eta: 1.0, d: 1, b: 0.0 }, 100, 0.8).unwrap();
        let v3 = boosted_erm_bound(PsiSetting::Glm { eta: 1.0, d: 3, b: 0.0 }, 100, 0.8).unwrap();
        assert!((v3 / v1 - 3.0).abs() < 1e-9);
    }

    #[test]
    fn smooth_psi_reduces_to_pure_smooth_term() {
        // With B = 0 and R = 0 the smooth psi is 24 beta d / (eta m).
        let eta = 0.5;
        let d = 2;
        let v = boosted_erm_bound(
            PsiSetting::Smooth { beta: 1.0, eta, b: 0.0, r: 0.0, d },
            500,
            0.3,
        )
        .unwrap();
        let direct =
            meta_bound(|m| 24.0 * d as f64 / (eta * m), 4.0 / eta, 1.0, 0.0, 500, 0.3).unwrap();
        assert_eq!(v, direct);
    }

    #[test]
    fn reparam_single_candidate_is_point_simplex() {
        let loss = LossModel::squared(2.0).unwrap();
        let class = ExpertClass::new(vec![Expert::Linear(vec![0.5])]).unwrap();
        let reparam =
            reparameterize(&loss, &class, vec![ClassMixture::point_mass(1, 0)]).unwrap();
        assert_eq!(reparam.domain.dim(), 1);
        let z = Outcome::new(vec![1.0], 0.3);
        let tz = reparam.transform(&z);
        let v = reparam.loss.eval(&[1.0], &tz).unwrap();
        assert!((v - loss.eval_pred(0.3, 0.5).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn reparam_basis_vectors_reproduce_expert_losses() {
        let loss = LossModel::squared(2.0).unwrap();
        let class = ExpertClass::new(vec![
            Expert::Linear(vec![0.5, 0.1]),
            Expert::Linear(vec![-0.2, 0.4]),
            Expert::Constant(0.3),
        ])
        .unwrap();
        let candidates: Vec<ClassMixture> =
            (0..3).map(|j| ClassMixture::point_mass(3, j)).collect();
        let reparam = reparameterize(&loss, &class, candidates).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(33);
        for _ in 0..50 {
            let z = Outcome::new(
                vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
                rng.random_range(-1.0..1.0),
            );
            let tz = reparam.transform(&z);
            for j in 0..3 {
                let mut q = vec![0.0; 3];
                q[j] = 1.0;
                let induced = reparam.loss.eval(&q, &tz).unwrap();
                let direct = loss.eval_pred(z.y, class.experts[j].predict(&z.x)).unwrap();
                assert!((induced - direct).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn reparam_induced_loss_midpoint_exp_concave() {
        let loss = LossModel::squared(1.0).unwrap();
        let class = ExpertClass::new(vec![
            Expert::Linear(vec![0.5, 0.1]),
            Expert::Linear(vec![-0.2, 0.4]),
        ])
        .unwrap();
        let candidates: Vec<ClassMixture> =
            (0..2).map(|j| ClassMixture::point_mass(2, j)).collect();
        let reparam = reparameterize(&loss, &class, candidates).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(44);
        let eta = reparam.loss.eta();
        for _ in 0..1000 {
            let z = Outcome::new(
                vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
                rng.random_range(-1.0..1.0),
            );
            let tz = reparam.transform(&z);
            let q1 = reparam.domain.sample_uniform(&mut rng);
            let q2 = reparam.domain.sample_uniform(&mut rng);
            let mid: Vec<f64> = q1.iter().zip(&q2).map(|(a, b)| 0.5 * (a + b)).collect();
            let lhs = (-eta * reparam.loss.eval(&mid, &tz).unwrap()).exp();
            let rhs = 0.5
                * ((-eta * reparam.loss.eval(&q1, &tz).unwrap()).exp()
                    + (-eta * reparam.loss.eval(&q2, &tz).unwrap()).exp());
            assert!(rhs - lhs <= 1e-12);
        }
    }

    fn msa_fixture(rng: &mut ChaCha12Rng, n: usize) -> (ExpertClass, LossModel, Vec<Outcome>) {
        let class = ExpertClass::new(vec![
            Expert::Linear(vec![0.5]),
            Expert::Linear(vec![0.2]),
            Expert::Linear(vec![-0.3]),
        ])
        .unwrap();
        let loss = LossModel::squared(1.0).unwrap();
        let sample = sq_sample(rng, n, 0.5);
        (class, loss, sample)
    }

    #[test]
    fn pm_ewoo_identical_experts_predict_identically() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let class = ExpertClass::new(vec![Expert::Linear(vec![0.4]); 4]).unwrap();
        let loss = LossModel::squared(1.0).unwrap();
        let sample = sq_sample(&mut rng, 256, 0.4);
        let prior = vec![0.25; 4];
        let mix = pm_ewoo(&class, &prior, &loss, &sample, 0.8, 0.05).unwrap();
        for x in [vec![1.0], vec![-1.0], vec![0.3]] {
            let p = mix.predict(&class, &x);
            let e = class.experts[0].predict(&x);
            assert!((p - e).abs() < 1e-9);
        }
    }

    #[test]
    fn pm_ewoo_rejects_small_delta_beyond_quadrature_cap() {
        let mut rng = ChaCha12Rng::seed_from_u64(10);
        let (class, loss, sample) = msa_fixture(&mut rng, 4096);
        let prior = vec![1.0 / 3.0; 3];
        // delta = 0.01 -> K = ceil(log 200) = 6 > 3.
        assert!(matches!(
            pm_ewoo(&class, &prior, &loss, &sample, 0.01, 0.05),
            Err(Error::UnsupportedDimension { dim: 6, max: 3 })
        ));
    }

    #[test]
    fn pm_ewoo_weights_stay_on_simplex() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let (class, loss, sample) = msa_fixture(&mut rng, 1024);
        let prior = vec![1.0 / 3.0; 3];
        let mix = pm_ewoo(&class, &prior, &loss, &sample, 0.3, 0.05).unwrap();
        assert!(mix.weights.iter().all(|w| *w >= -1e-12));
        assert!((mix.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn pm_cb_single_candidate_returns_the_mixture() {
        // A hand-built K = 1 plan with no second tranche degenerates to the
        // progressive mixture itself.
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        let (class, loss, sample) = msa_fixture(&mut rng, 64);
        let prior = vec![1.0 / 3.0; 3];
        let plan = SplitPlan {
            variant: SplitVariant::Cb,
            k: 1,
            n_phase1: 32,
            n_phase2: 32,
            consumed: 64,
            discarded: 0,
        };
        let mix = pm_cb_with_plan(&class, &prior, &loss, &sample, &plan, 0.05).unwrap();
        let direct = pm_mixture(&loss, &class, &prior, 0.05, &sample[..32]).unwrap();
        for (a, b) in mix.weights.iter().zip(&direct.weights) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn pm_cb_prior_mass_one_recovers_the_minimizer() {
        // With all prior mass on the data-generating expert the mixtures
        // stay concentrated, so the pipeline reproduces its predictions.
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        let class = ExpertClass::new(vec![
            Expert::Linear(vec![0.5]),
            Expert::Linear(vec![-0.5]),
            Expert::Linear(vec![0.0]),
        ])
        .unwrap();
        let loss = LossModel::squared(1.0).unwrap();
        let sample = sq_sample(&mut rng, 4096, 0.5);
        let prior = vec![1.0, 0.0, 0.0];
        let mix = pm_cb(&class, &prior, &loss, &sample, 0.3, 0.05, 2.0, 4.0).unwrap();
        let pred = mix.predict(&class, &[1.0]);
        assert!((pred - 0.5).abs() < 1e-9, "prediction {pred}, weights {:?}", mix.weights);
    }

    #[test]
    fn pm_cb_favors_dominant_expert_under_uniform_prior() {
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        let class = ExpertClass::new(vec![
            Expert::Linear(vec![0.5]),
            Expert::Linear(vec![-0.5]),
            Expert::Linear(vec![0.0]),
        ])
        .unwrap();
        let loss = LossModel::squared(1.0).unwrap();
        let sample = sq_sample(&mut rng, 4096, 0.5);
        let prior = vec![1.0 / 3.0; 3];
        let mix = pm_cb(&class, &prior, &loss, &sample, 0.3, 0.05, 2.0, 4.0).unwrap();
        assert!(
            mix.weights[0] > mix.weights[1] && mix.weights[0] > mix.weights[2],
            "weights {:?}",
            mix.weights
        );
    }

    #[test]
    fn pm_cb_validates_constants() {
        let mut rng = ChaCha12Rng::seed_from_u64(14);
        let (class, loss, sample) = msa_fixture(&mut rng, 512);
        let prior = vec![1.0 / 3.0; 3];
        assert!(pm_cb(&class, &prior, &loss, &sample, 0.3, 0.05, 0.0, 4.0).is_err());
        assert!(pm_cb(&class, &prior, &loss, &sample, 0.3, 0.05, 2.0, 0.0).is_err());
    }

    #[test]
    fn redundancy_zero_excess_gives_zero() {
        let r = bayes_redundancy(&RedundancySpec {
            prior: vec![0.25; 4],
            excess_risks: vec![0.0; 4],
            eta: 1.0,
            horizon: 9,
        })
        .unwrap();
        assert!(r.value.abs() < 1e-12);
    }

    #[test]
    fn redundancy_worked_value() {
        let r = bayes_redundancy(&RedundancySpec {
            prior: vec![0.25; 4],
            excess_risks: vec![0.0, 1.0, 1.0, 1.0],
            eta: 1.0,
            horizon: 9,
        })
        .unwrap();
        let expect = -0.1 * ((1.0 + 3.0 * (-10.0f64).exp()) / 4.0).ln();
        assert!((r.value - expect).abs() < 1e-12);
        assert!((r.value - 0.138616).abs() < 1e-6, "got {}", r.value);
        assert!((r.concentrated_bound - 4.0f64.ln() / 10.0).abs() < 1e-12);
        assert!(r.value <= r.concentrated_bound);
    }

    #[test]
    fn redundancy_below_concentrated_bound_on_random_instances() {
        let mut rng = ChaCha12Rng::seed_from_u64(15);
        for _ in 0..100 {
            let k = rng.random_range(2..8);
            let mut prior: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
            let s: f64 = prior.iter().sum();
            for p in &mut prior {
                *p /= s;
            }
            let mut excess: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..2.0)).collect();
            let zero_at = rng.random_range(0..k);
            excess[zero_at] = 0.0;
            let r = bayes_redundancy(&RedundancySpec {
                prior,
                excess_risks: excess,
                eta: rng.random_range(0.05..2.0),
                horizon: rng.random_range(1..200),
            })
            .unwrap();
            assert!(r.value <= r.concentrated_bound + 1e-12);
        }
    }

    #[test]
    fn redundancy_gibbs_beats_simplex_grid() {
        let spec = RedundancySpec {
            prior: vec![0.4, 0.3, 0.2, 0.1],
            excess_risks: vec![0.0, 0.3, 0.7, 1.5],
            eta: 0.8,
            horizon: 12,
        };
        let r = bayes_redundancy(&spec).unwrap();
        let scale = spec.eta * 13.0;
        let objective = |rho: &[f64]| {
            let mut v = 0.0;
            for i in 0..4 {
                v += rho[i] * spec.excess_risks[i];
                if rho[i] > 0.0 {
                    v += rho[i] * (rho[i] / spec.prior[i]).ln() / scale;
                }
            }
            v
        };
        let dom = ConvexDomain::simplex(4).unwrap();
        for g in dom.grid_points(40).unwrap() {
            assert!(r.value <= objective(&g) + 1e-12);
        }
        assert!((objective(&r.gibbs_weights) - r.value).abs() < 1e-12);
    }
}
