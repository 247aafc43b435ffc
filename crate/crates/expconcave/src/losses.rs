//! Loss models: evaluation, gradients, and regularity constants.
//!
//! A [`LossModel`] bundles a loss `l(f, z)` over hypotheses `f` in R^d and
//! outcomes `z = (x, y)` with the constants the bound evaluators consume:
//! the exp-concavity parameter `eta`, a Lipschitz constant `L` in `f`, and a
//! diameter `B`.
//!
//! Two readings of `B` are in circulation and both are supported by
//! configuration: the built-in eta rules (`eta_of`) read `B` as the bound
//! under which the loss map stays exp-concave at that rate, while the
//! excess-risk bound evaluators read the stored diameter as a bound on
//! `|l_f(z) - l_{f*}(z)|`. The synthetic problem instances choose both
//! analytically so each consumer gets a valid constant.

use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::domains::ConvexDomain;
use crate::linalg::{all_finite, dot};
use crate::{Error, Result};

/// One observed data point. Supervised losses read it as the pair `(x, y)`;
/// general losses may treat it as an opaque outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub x: Vec<f64>,
    pub y: f64,
}

impl Outcome {
    pub fn new(x: Vec<f64>, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn is_finite(&self) -> bool {
        self.y.is_finite() && all_finite(&self.x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Squared,
    Logistic,
    Custom,
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Squared => write!(f, "squared"),
            Self::Logistic => write!(f, "logistic"),
            Self::Custom => write!(f, "custom"),
        }
    }
}

type EvalFn = Arc<dyn Fn(&[f64], &Outcome) -> f64 + Send + Sync>;
type GradFn = Arc<dyn Fn(&[f64], &Outcome) -> Vec<f64> + Send + Sync>;

/// A loss with its regularity constants. Immutable after construction, so it
/// can be shared freely across replicate workers.
#[derive(Clone)]
pub struct LossModel {
    kind: LossKind,
    eta: f64,
    lipschitz: f64,
    diameter: f64,
    strong_convexity: f64,
    smoothness: f64,
    custom_eval: Option<EvalFn>,
    custom_grad: Option<GradFn>,
}

impl fmt::Debug for LossModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LossModel")
            .field("kind", &self.kind)
            .field("eta", &self.eta)
            .field("lipschitz", &self.lipschitz)
            .field("diameter", &self.diameter)
            .field("strong_convexity", &self.strong_convexity)
            .field("smoothness", &self.smoothness)
            .finish()
    }
}

/// Exp-concavity parameter for the built-in losses at diameter `B`:
/// squared admits `1/(4B)^2`, logistic admits `e^(-B)/4`.
///
/// Custom losses must supply their own `eta` at construction.
pub fn eta_of(kind: LossKind, b: f64) -> Result<f64> {
    if !(b > 0.0) || !b.is_finite() {
        return Err(Error::invalid("B", format!("must be positive and finite, got {b}")));
    }
    match kind {
        LossKind::Squared => Ok(1.0 / (16.0 * b * b)),
        LossKind::Logistic => Ok((-b).exp() / 4.0),
        LossKind::Custom => {
            Err(Error::invalid("kind", "custom losses configure eta explicitly"))
        }
    }
}

impl LossModel {
    /// Squared loss `(y - <f, x>)^2`.
    pub fn squared(b: f64) -> Result<Self> {
        Ok(Self {
            kind: LossKind::Squared,
            eta: eta_of(LossKind::Squared, b)?,
            lipschitz: 0.0,
            diameter: b,
            strong_convexity: 0.0,
            smoothness: 0.0,
            custom_eval: None,
            custom_grad: None,
        })
    }

    /// Logistic loss `log(1 + exp(-y <f, x>))` with labels in {-1, +1}.
    pub fn logistic(b: f64) -> Result<Self> {
        Ok(Self {
            kind: LossKind::Logistic,
            eta: eta_of(LossKind::Logistic, b)?,
            lipschitz: 0.0,
            diameter: b,
            strong_convexity: 0.0,
            smoothness: 0.0,
            custom_eval: None,
            custom_grad: None,
        })
    }

    /// Custom loss. The constants are taken on trust here; callers can run
    /// [`midpoint_exp_concavity`] against their domain and data to validate
    /// `eta` empirically.
    pub fn custom(
        eval: impl Fn(&[f64], &Outcome) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&[f64], &Outcome) -> Vec<f64> + Send + Sync + 'static,
        eta: f64,
        lipschitz: f64,
        b: f64,
    ) -> Result<Self> {
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(Error::invalid("eta", format!("must be positive, got {eta}")));
        }
        if !(b >= 0.0) || !b.is_finite() {
            return Err(Error::invalid("B", format!("must be nonnegative, got {b}")));
        }
        if !(lipschitz >= 0.0) || !lipschitz.is_finite() {
            return Err(Error::invalid("L", format!("must be nonnegative, got {lipschitz}")));
        }
        Ok(Self {
            kind: LossKind::Custom,
            eta,
            lipschitz,
            diameter: b,
            strong_convexity: 0.0,
            smoothness: 0.0,
            custom_eval: Some(Arc::new(eval)),
            custom_grad: Some(Arc::new(grad)),
        })
    }

    pub fn with_eta(mut self, eta: f64) -> Result<Self> {
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(Error::invalid("eta", format!("must be positive, got {eta}")));
        }
        self.eta = eta;
        Ok(self)
    }

    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz = l;
        self
    }

    pub fn with_diameter(mut self, b: f64) -> Self {
        self.diameter = b;
        self
    }

    pub fn with_strong_convexity(mut self, alpha: f64) -> Self {
        self.strong_convexity = alpha;
        self
    }

    pub fn with_smoothness(mut self, beta: f64) -> Self {
        self.smoothness = beta;
        self
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// Configured diameter bound `B`.
    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn strong_convexity(&self) -> f64 {
        self.strong_convexity
    }

    pub fn smoothness(&self) -> f64 {
        self.smoothness
    }

    /// Evaluate `l(f, z)`.
    pub fn eval(&self, f: &[f64], z: &Outcome) -> Result<f64> {
        if !z.is_finite() {
            return Err(Error::invalid("outcome", "non-finite entries"));
        }
        let v = match self.kind {
            LossKind::Squared => {
                self.check_dim(f, z)?;
                let r = z.y - dot(f, &z.x);
                r * r
            }
            LossKind::Logistic => {
                self.check_dim(f, z)?;
                softplus(-z.y * dot(f, &z.x))
            }
            LossKind::Custom => (self.custom_eval.as_ref().expect("custom eval"))(f, z),
        };
        if !v.is_finite() {
            return Err(Error::invalid("eval", format!("non-finite loss value {v}")));
        }
        Ok(v)
    }

    /// Gradient of the loss in the hypothesis.
    pub fn grad(&self, f: &[f64], z: &Outcome) -> Result<Vec<f64>> {
        let g = match self.kind {
            LossKind::Squared => {
                self.check_dim(f, z)?;
                let r = z.y - dot(f, &z.x);
                z.x.iter().map(|xi| -2.0 * r * xi).collect()
            }
            LossKind::Logistic => {
                self.check_dim(f, z)?;
                // d/du log(1 + e^(-y u)) = -y * sigmoid(-y u)
                let s = sigmoid(-z.y * dot(f, &z.x));
                z.x.iter().map(|xi| -z.y * s * xi).collect()
            }
            LossKind::Custom => (self.custom_grad.as_ref().expect("custom grad"))(f, z),
        };
        if !all_finite(&g) {
            return Err(Error::invalid("grad", "non-finite gradient entry"));
        }
        Ok(g)
    }

    /// Supervised form `phi_y(yhat)` for the built-in kinds. This is the loss
    /// as a function of the prediction, used by the aggregation pipelines
    /// where hypotheses are predictors rather than parameter vectors.
    pub fn eval_pred(&self, y: f64, yhat: f64) -> Result<f64> {
        match self.kind {
            LossKind::Squared => Ok((y - yhat) * (y - yhat)),
            LossKind::Logistic => Ok(softplus(-y * yhat)),
            LossKind::Custom => Err(Error::invalid(
                "kind",
                "custom losses have no supervised prediction form",
            )),
        }
    }

    fn check_dim(&self, f: &[f64], z: &Outcome) -> Result<()> {
        if f.len() != z.x.len() {
            return Err(Error::invalid(
                "hypothesis",
                format!("dimension {} does not match input dimension {}", f.len(), z.x.len()),
            ));
        }
        Ok(())
    }
}

/// Numerically stable `log(1 + e^u)`.
fn softplus(u: f64) -> f64 {
    if u > 0.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// Result of a midpoint exp-concavity sweep: the largest observed violation
/// of `exp(-eta l((f1+f2)/2, z)) >= (exp(-eta l(f1,z)) + exp(-eta l(f2,z)))/2`.
#[derive(Debug, Clone, Copy)]
pub struct MidpointReport {
    pub trials: usize,
    pub max_violation: f64,
}

impl MidpointReport {
    pub fn holds(&self, slack: f64) -> bool {
        self.max_violation <= slack
    }
}

/// Empirical midpoint exp-concavity check over random hypothesis pairs drawn
/// uniformly from `domain` and outcomes drawn by `draw`.
pub fn midpoint_exp_concavity<R: Rng>(
    loss: &LossModel,
    domain: &ConvexDomain,
    rng: &mut R,
    trials: usize,
    mut draw: impl FnMut(&mut R) -> Outcome,
) -> Result<MidpointReport> {
    let eta = loss.eta();
    let mut max_violation = f64::NEG_INFINITY;
    for _ in 0..trials {
        let f1 = domain.sample_uniform(rng);
        let f2 = domain.sample_uniform(rng);
        let z = draw(rng);
        let mid: Vec<f64> = f1.iter().zip(&f2).map(|(a, b)| 0.5 * (a + b)).collect();
        let lhs = (-eta * loss.eval(&mid, &z)?).exp();
        let rhs = 0.5 * ((-eta * loss.eval(&f1, &z)?).exp() + (-eta * loss.eval(&f2, &z)?).exp());
        max_violation = max_violation.max(rhs - lhs);
    }
    Ok(MidpointReport { trials, max_violation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::ConvexDomain;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn z(x: Vec<f64>, y: f64) -> Outcome {
        Outcome::new(x, y)
    }

    #[test]
    fn squared_eval_examples() {
        let loss = LossModel::squared(1.0).unwrap();
        // y = 1, <f, x> = 0 -> (1 - 0)^2 = 1
        assert_eq!(loss.eval(&[0.0], &z(vec![1.0], 1.0)).unwrap(), 1.0);
        // zero residual
        assert_eq!(loss.eval(&[0.5], &z(vec![1.0], 0.5)).unwrap(), 0.0);
    }

    #[test]
    fn logistic_eval_at_zero_margin() {
        let loss = LossModel::logistic(1.0).unwrap();
        let v = loss.eval(&[0.0, 0.0], &z(vec![1.0, 0.0], 1.0)).unwrap();
        assert!((v - 2.0f64.ln()).abs() < 1e-12, "expected log 2, got {v}");
    }

    #[test]
    fn squared_grad_example() {
        let loss = LossModel::squared(1.0).unwrap();
        let g = loss.grad(&[0.0, 0.0], &z(vec![1.0, 0.0], 1.0)).unwrap();
        assert!((g[0] + 2.0).abs() < 1e-12);
        assert_eq!(g[1], 0.0);
    }

    #[test]
    fn grad_zero_at_minimizer() {
        let loss = LossModel::squared(1.0).unwrap();
        let g = loss.grad(&[0.7], &z(vec![1.0], 0.7)).unwrap();
        assert_eq!(g[0], 0.0);
    }

    #[test]
    fn logistic_grad_at_zero_margin() {
        let loss = LossModel::logistic(1.0).unwrap();
        let g = loss.grad(&[0.0, 0.0], &z(vec![1.0, 0.0], 1.0)).unwrap();
        assert!((g[0] + 0.5).abs() < 1e-12);
        assert_eq!(g[1], 0.0);
    }

    #[test]
    fn grad_matches_finite_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for loss in [LossModel::squared(1.0).unwrap(), LossModel::logistic(1.0).unwrap()] {
            for _ in 0..200 {
                let f: Vec<f64> = (0..2).map(|_| rng.random_range(-0.7..0.7)).collect();
                let x: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
                let y = if loss.kind() == LossKind::Logistic {
                    if rng.random::<bool>() {
                        1.0
                    } else {
                        -1.0
                    }
                } else {
                    rng.random_range(-1.0..1.0)
                };
                let zz = z(x, y);
                let g = loss.grad(&f, &zz).unwrap();
                let h = 1e-5;
                for i in 0..2 {
                    let mut fp = f.clone();
                    let mut fm = f.clone();
                    fp[i] += h;
                    fm[i] -= h;
                    let fd =
                        (loss.eval(&fp, &zz).unwrap() - loss.eval(&fm, &zz).unwrap()) / (2.0 * h);
                    let scale = g[i].abs().max(1.0);
                    assert!(
                        (fd - g[i]).abs() / scale <= 1e-5,
                        "kind {:?} coord {i}: fd {fd} vs grad {}",
                        loss.kind(),
                        g[i]
                    );
                }
            }
        }
    }

    #[test]
    fn eta_of_values() {
        assert!((eta_of(LossKind::Squared, 1.0).unwrap() - 1.0 / 16.0).abs() < 1e-15);
        let e = eta_of(LossKind::Logistic, 1.0).unwrap();
        assert!((e - (-1.0f64).exp() / 4.0).abs() < 1e-15);
        assert!((e - 0.0919699).abs() < 1e-7);
        assert!((eta_of(LossKind::Squared, 0.25).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eta_of_rejects_nonpositive_b() {
        assert!(eta_of(LossKind::Squared, 0.0).is_err());
        assert!(eta_of(LossKind::Logistic, -1.0).is_err());
    }

    #[test]
    fn eta_of_monotone_in_b() {
        for kind in [LossKind::Squared, LossKind::Logistic] {
            let mut prev = f64::INFINITY;
            for i in 1..60 {
                let b = 0.1 * i as f64;
                let e = eta_of(kind, b).unwrap();
                assert!(e <= prev + 1e-18, "eta_of not nonincreasing at B={b}");
                prev = e;
            }
        }
    }

    #[test]
    fn eval_and_grad_are_pure() {
        let loss = LossModel::logistic(1.0).unwrap();
        let f = [0.3, -0.2];
        let zz = z(vec![0.5, 0.5], 1.0);
        let a = loss.eval(&f, &zz).unwrap();
        let b = loss.eval(&f, &zz).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        let ga = loss.grad(&f, &zz).unwrap();
        let gb = loss.grad(&f, &zz).unwrap();
        assert!(ga.iter().zip(&gb).all(|(p, q)| p.to_bits() == q.to_bits()));
    }

    #[test]
    fn midpoint_exp_concavity_smoke() {
        // Full 1e4-trial sweeps run in the acceptance suite; this is the
        // same check at reduced scale.
        let domain = ConvexDomain::l2_ball(vec![0.0, 0.0], 1.0).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let sq = LossModel::squared(1.0).unwrap();
        let rep = midpoint_exp_concavity(&sq, &domain, &mut rng, 2000, |r| {
            let theta: f64 = r.random_range(0.0..std::f64::consts::TAU);
            Outcome::new(vec![theta.cos(), theta.sin()], r.random_range(-1.0..1.0))
        })
        .unwrap();
        assert!(rep.holds(1e-12), "violation {}", rep.max_violation);
    }

    #[test]
    fn lipschitz_spot_check() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let loss = LossModel::squared(1.0).unwrap().with_lipschitz(4.0);
        // residuals stay within [-2, 2] here, so L = 4 covers |l(f) - l(f')|.
        for _ in 0..2000 {
            let f1: Vec<f64> = (0..2).map(|_| rng.random_range(-0.7..0.7)).collect();
            let f2: Vec<f64> = (0..2).map(|_| rng.random_range(-0.7..0.7)).collect();
            let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let zz = z(vec![theta.cos(), theta.sin()], rng.random_range(-1.0..1.0));
            let dl = (loss.eval(&f1, &zz).unwrap() - loss.eval(&f2, &zz).unwrap()).abs();
            let df = crate::linalg::dist2(&f1, &f2);
            assert!(dl <= loss.lipschitz() * df + 1e-12);
        }
    }
}
