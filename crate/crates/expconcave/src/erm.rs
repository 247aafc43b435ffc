//! Empirical risk minimization over convex domains and finite candidate
//! sets, plus the high-probability ERM excess-risk bound evaluator.
//!
//! The continuous solver is projected gradient with a backtracking step on
//! the projection arc. For the convex objectives used here the accepted
//! steps decrease the objective monotonically and the projected-gradient
//! mapping residual certifies convergence.

use crate::domains::ConvexDomain;
use crate::linalg;
use crate::losses::{LossModel, Outcome};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    /// Halve the step until sufficient decrease holds; grow it again after
    /// accepted iterations.
    Backtracking,
    /// Fixed step, typically `1/beta` for a beta-smooth objective.
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Tolerance on the projected-gradient mapping norm.
    pub tol: f64,
    pub step_rule: StepRule,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { max_iters: 5000, tol: 1e-8, step_rule: StepRule::Backtracking }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::invalid("max_iters", "must be at least 1"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid("tol", "must be positive"));
        }
        if let StepRule::Fixed(s) = self.step_rule {
            if !(s > 0.0) {
                return Err(Error::invalid("step", "fixed step must be positive"));
            }
        }
        Ok(())
    }
}

/// A 1-strongly convex regularizer with its gradient and diameter over the
/// feasible set.
#[derive(Clone)]
pub struct Regularizer {
    value: std::sync::Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    grad: std::sync::Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>,
    diameter: f64,
}

impl std::fmt::Debug for Regularizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Regularizer").field("diameter", &self.diameter).finish()
    }
}

impl Regularizer {
    pub fn new(
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        diameter: f64,
    ) -> Self {
        Self {
            value: std::sync::Arc::new(value),
            grad: std::sync::Arc::new(grad),
            diameter,
        }
    }

    /// `Gamma(f) = ||f||^2 / 2`, 1-strongly convex; `diameter` should be its
    /// range over the feasible set (`r_max^2 / 2` for a ball of radius
    /// `r_max` around the origin).
    pub fn half_squared_norm(diameter: f64) -> Self {
        Self::new(
            |f| 0.5 * linalg::dot(f, f),
            |f| f.to_vec(),
            diameter,
        )
    }

    pub fn value(&self, f: &[f64]) -> f64 {
        (self.value)(f)
    }

    pub fn grad(&self, f: &[f64]) -> Vec<f64> {
        (self.grad)(f)
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }
}

/// Minimize a convex objective over the domain by projected gradient.
///
/// Exposed for reuse by the online learners (comparator computation) and
/// the aggregation pipelines.
pub fn pgd_minimize(
    objective: &dyn Fn(&[f64]) -> f64,
    gradient: &dyn Fn(&[f64]) -> Vec<f64>,
    domain: &ConvexDomain,
    cfg: &SolverConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let mut x = domain.project(&domain.centroid())?;
    let mut fx = objective(&x);
    if !fx.is_finite() {
        return Err(Error::invalid("objective", "non-finite at initial point"));
    }
    let mut step = match cfg.step_rule {
        StepRule::Fixed(s) => s,
        StepRule::Backtracking => 1.0,
    };
    let mut residual = f64::INFINITY;
    for _ in 0..cfg.max_iters {
        let g = gradient(&x);
        if !linalg::all_finite(&g) {
            return Err(Error::invalid("gradient", "non-finite entry"));
        }
        let (next, fnext, used) = match cfg.step_rule {
            StepRule::Fixed(s) => {
                let cand = domain.project(&linalg::add_scaled(&x, -s, &g))?;
                let fc = objective(&cand);
                (cand, fc, s)
            }
            StepRule::Backtracking => {
                let mut s = step;
                loop {
                    let cand = domain.project(&linalg::add_scaled(&x, -s, &g))?;
                    let fc = objective(&cand);
                    let move2 = {
                        let d = linalg::dist2(&cand, &x);
                        d * d
                    };
                    // Sufficient decrease along the projection arc; holds
                    // whenever s <= 1/L for an L-smooth objective.
                    if fc <= fx - 0.5 * move2 / s || move2 == 0.0 {
                        break (cand, fc, s);
                    }
                    s *= 0.5;
                    if s < 1e-18 {
                        break (cand, fc, s);
                    }
                }
            }
        };
        residual = linalg::dist2(&next, &x) / used;
        x = next;
        fx = fnext;
        if let StepRule::Backtracking = cfg.step_rule {
            step = (used * 2.0).min(1e12);
        }
        if residual <= cfg.tol {
            return Ok(x);
        }
    }
    Err(Error::Convergence { residual, iters: cfg.max_iters })
}

fn empirical_risk(loss: &LossModel, f: &[f64], sample: &[Outcome]) -> Result<f64> {
    let mut s = 0.0;
    for z in sample {
        s += loss.eval(f, z)?;
    }
    Ok(s / sample.len() as f64)
}

fn empirical_grad(loss: &LossModel, f: &[f64], sample: &[Outcome]) -> Result<Vec<f64>> {
    let mut g = vec![0.0; f.len()];
    for z in sample {
        let gz = loss.grad(f, z)?;
        for (a, b) in g.iter_mut().zip(&gz) {
            *a += b;
        }
    }
    let n = sample.len() as f64;
    for a in &mut g {
        *a /= n;
    }
    Ok(g)
}

/// Empirical risk minimizer over the domain.
pub fn erm_fit(
    loss: &LossModel,
    domain: &ConvexDomain,
    sample: &[Outcome],
    cfg: &SolverConfig,
) -> Result<Vec<f64>> {
    if sample.is_empty() {
        return Err(Error::precondition("erm_fit requires a nonempty sample"));
    }
    let obj = |f: &[f64]| empirical_risk(loss, f, sample).unwrap_or(f64::INFINITY);
    let grd = |f: &[f64]| {
        empirical_grad(loss, f, sample).unwrap_or_else(|_| vec![f64::NAN; f.len()])
    };
    pgd_minimize(&obj, &grd, domain, cfg)
}

/// ERM with the vanishing penalty `Gamma(f) / n` added to the empirical
/// risk, where `n` is the sample size.
pub fn penalized_erm_fit(
    loss: &LossModel,
    domain: &ConvexDomain,
    sample: &[Outcome],
    reg: &Regularizer,
    cfg: &SolverConfig,
) -> Result<Vec<f64>> {
    if sample.is_empty() {
        return Err(Error::precondition("penalized_erm_fit requires a nonempty sample"));
    }
    let w = 1.0 / sample.len() as f64;
    let obj = |f: &[f64]| {
        empirical_risk(loss, f, sample).map(|r| r + w * reg.value(f)).unwrap_or(f64::INFINITY)
    };
    let grd = |f: &[f64]| match empirical_grad(loss, f, sample) {
        Ok(mut g) => {
            let rg = reg.grad(f);
            for (a, b) in g.iter_mut().zip(&rg) {
                *a += w * b;
            }
            g
        }
        Err(_) => vec![f64::NAN; f.len()],
    };
    pgd_minimize(&obj, &grd, domain, cfg)
}

/// ERM over a finite candidate set: the candidate with the smallest
/// empirical mean loss, ties broken by lowest index.
pub fn erm_finite(
    loss: &LossModel,
    candidates: &[Vec<f64>],
    sample: &[Outcome],
) -> Result<(usize, Vec<f64>)> {
    if candidates.is_empty() {
        return Err(Error::precondition("erm_finite requires at least one candidate"));
    }
    let mut best_idx = 0;
    let mut best_risk = f64::INFINITY;
    for (i, c) in candidates.iter().enumerate() {
        let r = if sample.is_empty() { 0.0 } else { empirical_risk(loss, c, sample)? };
        if r < best_risk {
            best_risk = r;
            best_idx = i;
        }
    }
    Ok((best_idx, candidates[best_idx].clone()))
}

/// High-probability excess-risk bound for ERM over an `R`-bounded convex
/// set in `d` dimensions under an `L`-Lipschitz, `eta`-exp-concave loss
/// whose excess loss is bounded by `B`:
///
/// `(8 max(B, 1/eta) (d log(16 L R n) + log(1/delta)) + 1) / n`, valid for
/// `n >= 5`.
pub fn erm_whp_bound(
    b: f64,
    eta: f64,
    l: f64,
    r: f64,
    d: usize,
    n: usize,
    delta: f64,
) -> Result<f64> {
    if n < 5 {
        return Err(Error::precondition(format!("requires n >= 5, got {n}")));
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
    if !(l > 0.0) || !(r > 0.0) {
        return Err(Error::invalid("L", "L and R must be positive"));
    }
    let n_f = n as f64;
    let lead = b.max(1.0 / eta);
    let inner = d as f64 * (16.0 * l * r * n_f).ln() + (1.0 / delta).ln();
    Ok((8.0 * lead * inner + 1.0) / n_f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn z(x: Vec<f64>, y: f64) -> Outcome {
        Outcome::new(x, y)
    }

    #[test]
    fn single_point_interpolation() {
        let loss = LossModel::squared(1.0).unwrap();
        let dom = ConvexDomain::interval(-1.0, 1.0).unwrap();
        let f = erm_fit(&loss, &dom, &[z(vec![1.0], 0.5)], &SolverConfig::default()).unwrap();
        assert!((f[0] - 0.5).abs() < 1e-7);
    }

    #[test]
    fn minimizer_outside_domain_clamps_to_boundary() {
        let loss = LossModel::squared(2.0).unwrap();
        let dom = ConvexDomain::unit_ball(1);
        let f = erm_fit(&loss, &dom, &[z(vec![1.0], 2.0)], &SolverConfig::default()).unwrap();
        assert!((f[0] - 1.0).abs() < 1e-7, "got {}", f[0]);
    }

    #[test]
    fn least_squares_matches_normal_equations() {
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        let loss = LossModel::squared(2.0).unwrap();
        let dom = ConvexDomain::l2_ball(vec![0.0, 0.0], 10.0).unwrap();
        let sample: Vec<Outcome> = (0..20)
            .map(|_| {
                let x = vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
                let y = 0.4 * x[0] - 0.3 * x[1] + rng.random_range(-0.1..0.1);
                z(x, y)
            })
            .collect();
        let f = erm_fit(&loss, &dom, &sample, &SolverConfig::default()).unwrap();

        // Independent oracle: solve the 2x2 normal equations directly.
        let mut xtx = [[0.0; 2]; 2];
        let mut xty = [0.0; 2];
        for s in &sample {
            for i in 0..2 {
                for j in 0..2 {
                    xtx[i][j] += s.x[i] * s.x[j];
                }
                xty[i] += s.x[i] * s.y;
            }
        }
        let det = xtx[0][0] * xtx[1][1] - xtx[0][1] * xtx[1][0];
        let sol = [
            (xtx[1][1] * xty[0] - xtx[0][1] * xty[1]) / det,
            (xtx[0][0] * xty[1] - xtx[1][0] * xty[0]) / det,
        ];
        assert!(linalg::dist2(&f, &sol) < 1e-5, "pgd {f:?} vs normal equations {sol:?}");
    }

    #[test]
    fn objective_decreases_monotonically() {
        // Re-run the solver loop manually and track objective values.
        let loss = LossModel::squared(2.0).unwrap();
        let dom = ConvexDomain::unit_ball(2);
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let sample: Vec<Outcome> = (0..30)
            .map(|_| {
                let x = vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
                z(x.clone(), 0.8 * x[0] + rng.random_range(-0.2..0.2))
            })
            .collect();
        let obj = |f: &[f64]| empirical_risk(&loss, f, &sample).unwrap();
        let grd = |f: &[f64]| empirical_grad(&loss, f, &sample).unwrap();
        let mut x = dom.centroid();
        let mut fx = obj(&x);
        let mut step = 1.0;
        for _ in 0..100 {
            let g = grd(&x);
            let mut s = step;
            let (next, fnext) = loop {
                let cand = dom.project(&linalg::add_scaled(&x, -s, &g)).unwrap();
                let fc = obj(&cand);
                let d = linalg::dist2(&cand, &x);
                if fc <= fx - 0.5 * d * d / s || d == 0.0 {
                    break (cand, fc);
                }
                s *= 0.5;
            };
            assert!(fnext <= fx + 1e-15, "objective increased: {fnext} > {fx}");
            x = next;
            fx = fnext;
            step = s * 2.0;
        }
    }

    #[test]
    fn erm_beats_grid_candidates() {
        let loss = LossModel::squared(2.0).unwrap();
        let dom = ConvexDomain::unit_ball(2);
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let sample: Vec<Outcome> = (0..40)
            .map(|_| {
                let x = vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
                z(x.clone(), 0.3 * x[0] - 0.6 * x[1] + rng.random_range(-0.1..0.1))
            })
            .collect();
        let f = erm_fit(&loss, &dom, &sample, &SolverConfig::default()).unwrap();
        let risk_f = empirical_risk(&loss, &f, &sample).unwrap();
        for g in dom.grid_points(32).unwrap() {
            let rg = empirical_risk(&loss, &g, &sample).unwrap();
            assert!(risk_f <= rg + 1e-6, "grid point {g:?} beats ERM: {rg} < {risk_f}");
        }
    }

    #[test]
    fn penalty_vanishes_at_large_n() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let loss = LossModel::squared(2.0).unwrap();
        let dom = ConvexDomain::interval(-1.0, 1.0).unwrap();
        let sample: Vec<Outcome> = (0..1_000_000)
            .map(|_| {
                let x = if rng.random::<bool>() { 1.0 } else { -1.0 };
                z(vec![x], 0.5 * x + rng.random_range(-0.05..0.05))
            })
            .collect();
        let reg = Regularizer::half_squared_norm(0.5);
        let plain = erm_fit(&loss, &dom, &sample, &SolverConfig::default()).unwrap();
        let pen = penalized_erm_fit(&loss, &dom, &sample, &reg, &SolverConfig::default()).unwrap();
        assert!((plain[0] - pen[0]).abs() < 1e-4);
    }

    #[test]
    fn penalized_single_sample_closed_form() {
        // argmin (1 - f)^2 + f^2/2 = 2/3; cross-checked by 1-d grid search.
        let loss = LossModel::squared(2.0).unwrap();
        let dom = ConvexDomain::interval(-1.0, 1.0).unwrap();
        let reg = Regularizer::half_squared_norm(0.5);
        let sample = [z(vec![1.0], 1.0)];
        let f = penalized_erm_fit(&loss, &dom, &sample, &reg, &SolverConfig::default()).unwrap();
        assert!((f[0] - 2.0 / 3.0).abs() < 1e-7, "got {}", f[0]);

        let obj = |v: f64| (1.0 - v) * (1.0 - v) + 0.5 * v * v;
        let grid_best = (0..=200_000)
            .map(|k| -1.0 + 2.0 * k as f64 / 200_000.0)
            .min_by(|a, b| obj(*a).total_cmp(&obj(*b)))
            .unwrap();
        assert!((f[0] - grid_best).abs() < 1e-4);
    }

    #[test]
    fn constant_regularizer_matches_plain_erm() {
        let loss = LossModel::squared(2.0).unwrap();
        let dom = ConvexDomain::interval(-1.0, 1.0).unwrap();
        let reg = Regularizer::new(|_| 3.0, |f| vec![0.0; f.len()], 0.0);
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let sample: Vec<Outcome> = (0..50)
            .map(|_| z(vec![1.0], rng.random_range(-0.5..0.5)))
            .collect();
        let plain = erm_fit(&loss, &dom, &sample, &SolverConfig::default()).unwrap();
        let pen = penalized_erm_fit(&loss, &dom, &sample, &reg, &SolverConfig::default()).unwrap();
        assert!((plain[0] - pen[0]).abs() < 1e-9);
    }

    #[test]
    fn erm_finite_basics() {
        let loss = LossModel::squared(2.0).unwrap();
        let sample: Vec<Outcome> = vec![z(vec![1.0], 0.0)];
        // One candidate.
        let (i, _) = erm_finite(&loss, &[vec![0.3]], &sample).unwrap();
        assert_eq!(i, 0);
        // Identical losses tie-break to the lowest index.
        let (i, _) = erm_finite(&loss, &[vec![0.5], vec![-0.5]], &sample).unwrap();
        assert_eq!(i, 0);
    }

    #[test]
    fn erm_finite_picks_minimum_mean() {
        // Constant predictors with empirical risks {0.7, 0.2, 0.9} on a
        // crafted sample: use y values so that (y - c)^2 averages to those.
        let loss = LossModel::squared(2.0).unwrap();
        let sample = vec![z(vec![1.0], 0.0)];
        let cands = vec![
            vec![0.7f64.sqrt()],
            vec![0.2f64.sqrt()],
            vec![0.9f64.sqrt()],
        ];
        let (i, _) = erm_finite(&loss, &cands, &sample).unwrap();
        assert_eq!(i, 1);
    }

    #[test]
    fn erm_finite_invariant_under_constant_shift() {
        // Adding a constant to every candidate's per-sample loss through a
        // custom loss must not change the argmin.
        let sample: Vec<Outcome> = (0..10).map(|k| z(vec![k as f64 / 10.0], 0.3)).collect();
        let base = LossModel::squared(2.0).unwrap();
        let shifted = LossModel::custom(
            |f, zz| {
                let r = zz.y - linalg::dot(f, &zz.x);
                r * r + 5.0
            },
            |f, zz| {
                let r = zz.y - linalg::dot(f, &zz.x);
                zz.x.iter().map(|xi| -2.0 * r * xi).collect()
            },
            1.0,
            0.0,
            1.0,
        )
        .unwrap();
        let cands = vec![vec![0.1], vec![0.9], vec![0.4]];
        let (i0, _) = erm_finite(&base, &cands, &sample).unwrap();
        let (i1, _) = erm_finite(&shifted, &cands, &sample).unwrap();
        assert_eq!(i0, i1);
    }

    #[test]
    fn whp_bound_worked_value() {
        let v = erm_whp_bound(1.0, 1.0 / 16.0, 1.0, 1.0, 2, 100, 0.1).unwrap();
        let direct = (8.0 * 16.0 * (2.0 * (1600.0f64).ln() + 10.0f64.ln()) + 1.0) / 100.0;
        assert!((v - direct).abs() < 1e-12);
        assert!((v - 21.845).abs() < 5e-3, "got {v}");
    }

    #[test]
    fn whp_bound_decreases_when_n_doubles() {
        let mut prev = f64::INFINITY;
        for n in [5usize, 10, 20, 40, 80, 160] {
            let v = erm_whp_bound(1.0, 0.1, 1.0, 1.0, 2, n, 0.05).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn whp_bound_delta_limit_drops_log_term() {
        let near_one = erm_whp_bound(1.0, 0.5, 1.0, 1.0, 0, 100, 1.0 - 1e-12).unwrap();
        let expect = (8.0 * 2.0 * 0.0 + 1.0) / 100.0; // d = 0 kills the log(16LRn) term
        assert!((near_one - expect).abs() < 1e-9, "{near_one} vs {expect}");
    }

    #[test]
    fn whp_bound_requires_n_at_least_5() {
        assert!(matches!(
            erm_whp_bound(1.0, 0.1, 1.0, 1.0, 2, 4, 0.1),
            Err(Error::Precondition { .. })
        ));
    }

    #[test]
    fn solver_reports_convergence_failure() {
        let loss = LossModel::squared(2.0).unwrap();
        let dom = ConvexDomain::interval(-1.0, 1.0).unwrap();
        let cfg = SolverConfig { max_iters: 1, tol: 1e-16, step_rule: StepRule::Backtracking };
        let sample = [z(vec![1.0], 0.9)];
        match erm_fit(&loss, &dom, &sample, &cfg) {
            Err(Error::Convergence { residual, iters }) => {
                assert_eq!(iters, 1);
                assert!(residual.is_finite());
            }
            other => panic!("expected convergence error, got {other:?}"),
        }
    }
}
