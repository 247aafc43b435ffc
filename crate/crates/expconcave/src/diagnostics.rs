//! Synthetic problem instances with exact risk oracles, and empirical
//! verifiers for the concentration conditions the bounds rely on.
//!
//! Every built-in instance is constructed so that its risk minimizer and
//! regularity constants are known analytically: the noise is a Gaussian
//! truncated at three standard deviations, inputs live on a sphere or ball
//! of known radius, and the domain contains the generating parameter. The
//! excess-loss diameter `B`, exp-concavity rate `eta`, and Lipschitz
//! constant `L` carried by each instance are therefore valid by
//! construction rather than estimated.
//!
//! Built-ins (`ProblemInstance::by_name`):
//!
//! - `sq_ball_2d`: squared loss, unit ball in R^2, closed-form oracle.
//! - `sq_interval`: squared loss on [-1, 1], inputs +-1 (per-round strongly
//!   convex), closed-form oracle.
//! - `logistic_2d`: well-specified logistic labels on the unit ball;
//!   risk evaluated by periodic trapezoid quadrature over the input angle
//!   (spectrally accurate, reported with zero standard error).
//! - `experts_8`: eight linear experts under squared loss with one
//!   dominant expert; mixture excess risk in closed form.
//! - `realizable_1d`: noiseless labels, so the excess loss is pointwise
//!   nonnegative and the minimizer has zero loss almost surely.

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};

use crate::boost::{ClassMixture, Expert, ExpertClass};
use crate::domains::{ConvexDomain, DomainKind, MEMBERSHIP_TOL};
use crate::linalg;
use crate::losses::{eta_of, LossKind, LossModel, Outcome};
use crate::online::OnlineRun;
use crate::seeds::child_seed;
use crate::{Error, Result};
use rand::SeedableRng;

/// How population risk is evaluated for an instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RiskOracle {
    /// Exact expression (or deterministic quadrature); standard error 0.
    ClosedForm,
    /// Fresh-sample Monte Carlo with the given sample count.
    MonteCarlo(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum XLaw {
    /// Uniform on the sphere of the given radius (`{-r, +r}` in 1-d).
    Sphere(f64),
    /// Uniform in the ball of the given radius.
    Ball(f64),
}

impl XLaw {
    fn radius(&self) -> f64 {
        match self {
            XLaw::Sphere(r) | XLaw::Ball(r) => *r,
        }
    }

    /// `E[x x^T] = c I`; `c = r^2/d` on the sphere, `r^2/(d+2)` in the ball.
    fn second_moment(&self, dim: usize) -> f64 {
        match self {
            XLaw::Sphere(r) => r * r / dim as f64,
            XLaw::Ball(r) => r * r / (dim as f64 + 2.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum LabelLaw {
    /// `y = <w*, x> + eps`, `eps` Gaussian truncated at 3 sigma.
    LinearTruncGauss { sigma: f64 },
    /// `y in {-1, +1}` with `P(y = 1 | x) = sigmoid(<w*, x>)`.
    LogisticBinary,
}

/// Default online-learner parameters derived from the instance's constants.
#[derive(Debug, Clone, Copy)]
pub struct OnlineDefaults {
    /// Gradient norm bound.
    pub g: f64,
    /// Domain diameter bound.
    pub d: f64,
    /// Per-round strong convexity (0 if absent).
    pub nu: f64,
    /// EWOO grid resolution.
    pub resolution: usize,
}

/// Expert class, prior, and supervised-loss constants for the aggregation
/// pipelines.
#[derive(Debug, Clone)]
pub struct MsaSetup {
    pub class: ExpertClass,
    pub prior: Vec<f64>,
    /// Exp-concavity rate of the loss in the prediction over the class's
    /// prediction range.
    pub eta: f64,
    /// Strong convexity of the loss in the prediction.
    pub alpha: f64,
    /// Lipschitz constant of the loss in the prediction.
    pub lipschitz: f64,
}

#[derive(Debug, Clone)]
pub struct ProblemInstance {
    name: String,
    pub loss: LossModel,
    pub domain: ConvexDomain,
    pub f_star: Vec<f64>,
    pub oracle: RiskOracle,
    pub noise_sigma: f64,
    pub online: OnlineDefaults,
    x_law: XLaw,
    label_law: LabelLaw,
    second_moment: f64,
    msa: Option<MsaSetup>,
    /// Quadrature nodes for the logistic oracle.
    quadrature_nodes: usize,
}

pub const BUILTIN_NAMES: [&str; 5] =
    ["sq_ball_2d", "sq_interval", "logistic_2d", "experts_8", "realizable_1d"];

const DEFAULT_SIGMA: f64 = 0.1;

impl ProblemInstance {
    /// Construct a built-in instance by name, optionally overriding the
    /// label-noise standard deviation.
    pub fn by_name(name: &str, noise_sigma: Option<f64>) -> Result<Self> {
        match name {
            "sq_ball_2d" => Self::squared_linear(
                "sq_ball_2d",
                ConvexDomain::unit_ball(2),
                vec![0.5, -0.3],
                XLaw::Sphere(1.0),
                noise_sigma.unwrap_or(DEFAULT_SIGMA),
            ),
            "sq_interval" => Self::squared_linear(
                "sq_interval",
                ConvexDomain::interval(-1.0, 1.0)?,
                vec![0.5],
                XLaw::Sphere(1.0),
                noise_sigma.unwrap_or(DEFAULT_SIGMA),
            ),
            "realizable_1d" => Self::squared_linear(
                "realizable_1d",
                ConvexDomain::interval(-1.0, 1.0)?,
                vec![0.5],
                XLaw::Sphere(1.0),
                noise_sigma.unwrap_or(0.0),
            ),
            "logistic_2d" => Self::logistic_2d(),
            "experts_8" => {
                Self::experts_8(noise_sigma.unwrap_or(DEFAULT_SIGMA))
            }
            other => Err(Error::invalid(
                "problem",
                format!("unknown problem `{other}`; built-ins: {BUILTIN_NAMES:?}"),
            )),
        }
    }

    /// Squared loss with linear labels and truncated Gaussian noise. All
    /// constants are derived analytically from the geometry.
    pub fn squared_linear(
        name: &str,
        domain: ConvexDomain,
        w_star: Vec<f64>,
        x_law: XLaw,
        sigma: f64,
    ) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::invalid("noise_sigma", "must be nonnegative and finite"));
        }
        if !domain.contains(&w_star, MEMBERSHIP_TOL) {
            return Err(Error::invalid("w_star", "risk minimizer must lie in the domain"));
        }
        let dim = domain.dim();
        let x_rad = x_law.radius();
        let reach = max_dist_to(&domain, &w_star);
        let delta_max = reach * x_rad;
        // sup_z |l_f - l_f*| = sup |d^2 + 2 eps d| over |d| <= delta_max,
        // |eps| <= 3 sigma.
        let b_excess = delta_max * delta_max + 6.0 * sigma * delta_max;
        let residual_max = delta_max + 3.0 * sigma;
        let eta = eta_of(LossKind::Squared, b_excess)?;
        // Exp-concavity in f needs eta <= 1/(2 r_max^2); the diameter-based
        // rate is far below it for every built-in geometry.
        if eta > 1.0 / (2.0 * residual_max * residual_max) {
            return Err(Error::invalid("eta", "diameter-based rate exceeds the valid range"));
        }
        let lipschitz = 2.0 * residual_max * x_rad;
        let nu = if dim == 1 && matches!(x_law, XLaw::Sphere(_)) { 2.0 * x_rad * x_rad } else { 0.0 };
        let loss = LossModel::squared(b_excess)?
            .with_lipschitz(lipschitz)
            .with_smoothness(2.0 * x_rad * x_rad)
            .with_strong_convexity(nu);
        let online = OnlineDefaults {
            g: lipschitz,
            d: domain.diameter(),
            nu,
            resolution: default_resolution(dim),
        };
        Ok(Self {
            name: name.to_string(),
            loss,
            second_moment: x_law.second_moment(dim),
            domain,
            f_star: w_star,
            oracle: RiskOracle::ClosedForm,
            noise_sigma: sigma,
            online,
            x_law,
            label_law: LabelLaw::LinearTruncGauss { sigma },
            msa: None,
            quadrature_nodes: 0,
        })
    }

    fn logistic_2d() -> Result<Self> {
        let domain = ConvexDomain::unit_ball(2);
        let w_star = vec![0.6, 0.4];
        let x_law = XLaw::Sphere(1.0);
        let u_max = max_norm(&domain) * x_law.radius();
        // Loss range over |u| <= u_max has diameter exactly u_max for the
        // logistic loss: log(1+e^u) - log(1+e^-u) = u.
        let b = u_max;
        let lipschitz = sigmoid(u_max) * x_law.radius();
        let loss = LossModel::logistic(b)?
            .with_lipschitz(lipschitz)
            .with_smoothness(0.25 * x_law.radius() * x_law.radius());
        let online = OnlineDefaults {
            g: lipschitz,
            d: domain.diameter(),
            nu: 0.0,
            resolution: default_resolution(2),
        };
        Ok(Self {
            name: "logistic_2d".to_string(),
            loss,
            second_moment: x_law.second_moment(2),
            domain,
            f_star: w_star,
            oracle: RiskOracle::ClosedForm,
            noise_sigma: 0.0,
            online,
            x_law,
            label_law: LabelLaw::LogisticBinary,
            msa: None,
            quadrature_nodes: 2048,
        })
    }

    fn experts_8(sigma: f64) -> Result<Self> {
        let weights: [[f64; 2]; 8] = [
            [0.5, 0.2],
            [0.8, 0.2],
            [0.5, 0.5],
            [0.1, 0.3],
            [0.0, 0.0],
            [-0.3, 0.5],
            [0.8, -0.4],
            [-0.5, -0.2],
        ];
        let inst = Self::squared_linear(
            "experts_8",
            ConvexDomain::unit_ball(2),
            weights[0].to_vec(),
            XLaw::Sphere(1.0),
            sigma,
        )?;
        let class = ExpertClass::new(
            weights.iter().map(|w| Expert::Linear(w.to_vec())).collect(),
        )?;
        inst.with_expert_class(class, None)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn msa(&self) -> Option<&MsaSetup> {
        self.msa.as_ref()
    }

    /// Override the exp-concavity rate carried by the loss (used to probe
    /// the diagnostics' power with deliberately invalid rates).
    pub fn with_eta(mut self, eta: f64) -> Result<Self> {
        self.loss = self.loss.with_eta(eta)?;
        Ok(self)
    }

    /// Rebuild the instance over a different feasible set, recomputing all
    /// analytic constants. Supported for the squared-linear label law.
    pub fn with_domain(self, domain: ConvexDomain) -> Result<Self> {
        match self.label_law {
            LabelLaw::LinearTruncGauss { sigma } => {
                let rebuilt = Self::squared_linear(
                    &self.name,
                    domain,
                    self.f_star.clone(),
                    self.x_law,
                    sigma,
                )?;
                match self.msa {
                    Some(msa) => rebuilt.with_expert_class(msa.class, Some(msa.prior)),
                    None => Ok(rebuilt),
                }
            }
            LabelLaw::LogisticBinary => Err(Error::invalid(
                "domain",
                "domain overrides are supported for the squared-linear instances only",
            )),
        }
    }

    /// Attach (or replace) the expert class used by the aggregation
    /// algorithms, deriving the supervised-loss constants from the class's
    /// prediction range.
    pub fn with_expert_class(
        mut self,
        class: ExpertClass,
        prior: Option<Vec<f64>>,
    ) -> Result<Self> {
        let x_rad = self.x_law.radius();
        let pred_max = class
            .experts
            .iter()
            .map(|e| match e {
                Expert::Linear(w) => linalg::norm2(w) * x_rad,
                Expert::Constant(c) => c.abs(),
            })
            .fold(0.0, f64::max);
        let y_max = match self.label_law {
            LabelLaw::LinearTruncGauss { sigma } => {
                linalg::norm2(&self.f_star) * x_rad + 3.0 * sigma
            }
            LabelLaw::LogisticBinary => 1.0,
        };
        let b_pred = pred_max.max(y_max);
        if !(b_pred > 0.0) {
            return Err(Error::invalid("experts", "degenerate prediction range"));
        }
        let (eta, alpha, lipschitz) = match self.loss.kind() {
            LossKind::Squared => (
                eta_of(LossKind::Squared, b_pred)?,
                2.0,
                2.0 * (pred_max + y_max),
            ),
            LossKind::Logistic => {
                let s = sigmoid(pred_max);
                (eta_of(LossKind::Logistic, b_pred)?, 2.0 * s * (1.0 - s), s)
            }
            LossKind::Custom => {
                return Err(Error::invalid("loss", "expert classes need a supervised loss"))
            }
        };
        let prior = match prior {
            Some(p) => {
                if p.len() != class.len() {
                    return Err(Error::invalid("prior", "length must match the class size"));
                }
                p
            }
            None => vec![1.0 / class.len() as f64; class.len()],
        };
        self.msa = Some(MsaSetup { prior, eta, alpha, lipschitz, class });
        Ok(self)
    }

    pub fn sample<R: Rng>(&self, rng: &mut R, n: usize) -> Vec<Outcome> {
        (0..n).map(|_| self.sample_one(rng)).collect()
    }

    pub fn sample_one<R: Rng>(&self, rng: &mut R) -> Outcome {
        let x = self.sample_x(rng);
        let y = match self.label_law {
            LabelLaw::LinearTruncGauss { sigma } => {
                linalg::dot(&self.f_star, &x) + trunc_gauss(rng, sigma)
            }
            LabelLaw::LogisticBinary => {
                let p = sigmoid(linalg::dot(&self.f_star, &x));
                if rng.random::<f64>() < p {
                    1.0
                } else {
                    -1.0
                }
            }
        };
        Outcome::new(x, y)
    }

    fn sample_x<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let dim = self.domain.dim();
        match self.x_law {
            XLaw::Sphere(r) => {
                if dim == 1 {
                    vec![if rng.random::<bool>() { r } else { -r }]
                } else {
                    let mut v: Vec<f64> = (0..dim)
                        .map(|_| Normal::new(0.0, 1.0).unwrap().sample(rng))
                        .collect();
                    let n = linalg::norm2(&v).max(1e-300);
                    for vi in &mut v {
                        *vi *= r / n;
                    }
                    v
                }
            }
            XLaw::Ball(r) => {
                let mut v: Vec<f64> = (0..dim)
                    .map(|_| Normal::new(0.0, 1.0).unwrap().sample(rng))
                    .collect();
                let n = linalg::norm2(&v).max(1e-300);
                let scale = r * rng.random::<f64>().powf(1.0 / dim as f64) / n;
                for vi in &mut v {
                    *vi *= scale;
                }
                v
            }
        }
    }

    /// Population excess risk of `f` by the instance's oracle. For Monte
    /// Carlo instances the randomness derives from `seed`.
    pub fn excess_risk_seeded(&self, f: &[f64], seed: u64) -> Result<(f64, f64)> {
        match self.oracle {
            RiskOracle::ClosedForm => self.excess_risk(f),
            RiskOracle::MonteCarlo(m) => {
                let mut rng = ChaCha12Rng::seed_from_u64(seed);
                self.excess_risk_mc(f, m, &mut rng)
            }
        }
    }

    /// Closed-form excess risk; errors if the instance only has a Monte
    /// Carlo oracle or if `f` is outside the domain.
    pub fn excess_risk(&self, f: &[f64]) -> Result<(f64, f64)> {
        if !self.domain.contains(f, 1e-9) {
            return Err(Error::invalid("hypothesis", "outside the feasible set"));
        }
        match self.label_law {
            LabelLaw::LinearTruncGauss { .. } => {
                // E[(y - <f,x>)^2] - E[(y - <w*,x>)^2]
                //   = (f - w*)^T E[x x^T] (f - w*).
                let d = linalg::sub(f, &self.f_star);
                Ok((self.second_moment * linalg::dot(&d, &d), 0.0))
            }
            LabelLaw::LogisticBinary => {
                let r_f = self.logistic_risk_quadrature(f);
                let r_star = self.logistic_risk_quadrature(&self.f_star);
                Ok((r_f - r_star, 0.0))
            }
        }
    }

    /// Monte Carlo excess risk from `m` fresh outcomes.
    pub fn excess_risk_mc<R: Rng>(&self, f: &[f64], m: usize, rng: &mut R) -> Result<(f64, f64)> {
        if !self.domain.contains(f, 1e-9) {
            return Err(Error::invalid("hypothesis", "outside the feasible set"));
        }
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..m {
            let z = self.sample_one(rng);
            let v = self.loss.eval(f, &z)? - self.loss.eval(&self.f_star, &z)?;
            sum += v;
            sumsq += v * v;
        }
        let mean = sum / m as f64;
        let var = (sumsq / m as f64 - mean * mean).max(0.0);
        Ok((mean, (var / m as f64).sqrt()))
    }

    /// Risk under the logistic label law by periodic trapezoid quadrature
    /// over the input angle; spectrally accurate for these smooth periodic
    /// integrands.
    fn logistic_risk_quadrature(&self, f: &[f64]) -> f64 {
        let n = self.quadrature_nodes.max(512);
        let mut acc = 0.0;
        for k in 0..n {
            let theta = std::f64::consts::TAU * k as f64 / n as f64;
            let x = [theta.cos() * self.x_law.radius(), theta.sin() * self.x_law.radius()];
            let u_star = self.f_star[0] * x[0] + self.f_star[1] * x[1];
            let u = f[0] * x[0] + f[1] * x[1];
            let p = sigmoid(u_star);
            acc += p * softplus(-u) + (1.0 - p) * softplus(u);
        }
        acc / n as f64
    }

    /// Closed-form excess risk of a mixture over the instance's expert
    /// class (linear experts under squared loss).
    pub fn mixture_excess(&self, mix: &ClassMixture) -> Result<f64> {
        let msa = self
            .msa
            .as_ref()
            .ok_or_else(|| Error::invalid("problem", "instance has no expert class"))?;
        if mix.weights.len() != msa.class.len() {
            return Err(Error::invalid("mixture", "weight length does not match the class"));
        }
        let dim = self.domain.dim();
        let mut w_mix = vec![0.0; dim];
        for (q, e) in mix.weights.iter().zip(&msa.class.experts) {
            match e {
                Expert::Linear(w) => {
                    for (acc, wi) in w_mix.iter_mut().zip(w) {
                        *acc += q * wi;
                    }
                }
                Expert::Constant(_) => {
                    return Err(Error::invalid("experts", "closed form needs linear experts"));
                }
            }
        }
        let d = linalg::sub(&w_mix, &self.f_star);
        Ok(self.second_moment * linalg::dot(&d, &d))
    }

    /// One fresh excess-loss draw `l_f(Z) - l_f*(Z)`.
    pub fn excess_loss_sample<R: Rng>(&self, f: &[f64], rng: &mut R) -> Result<f64> {
        let z = self.sample_one(rng);
        Ok(self.loss.eval(f, &z)? - self.loss.eval(&self.f_star, &z)?)
    }

    /// Test points for the condition checks: a coarse grid (resolution 10,
    /// dimensions up to 2) plus 100 uniform random domain points.
    pub fn test_points<R: Rng>(&self, rng: &mut R) -> Result<Vec<Vec<f64>>> {
        let mut points = if self.domain.dim() <= 2 {
            self.domain.grid_points(10)?
        } else {
            Vec::new()
        };
        for _ in 0..100 {
            points.push(self.domain.sample_uniform(rng));
        }
        Ok(points)
    }
}

fn default_resolution(dim: usize) -> usize {
    match dim {
        1 => 512,
        2 => 32,
        _ => 16,
    }
}

fn max_norm(domain: &ConvexDomain) -> f64 {
    max_dist_to(domain, &vec![0.0; domain.dim()])
}

/// `sup_{f in domain} ||f - w||`.
fn max_dist_to(domain: &ConvexDomain, w: &[f64]) -> f64 {
    match domain.kind() {
        DomainKind::L2Ball { center, radius } => linalg::dist2(center, w) + radius,
        DomainKind::Box { lo, hi } => {
            // Farthest corner, coordinate by coordinate.
            let mut s = 0.0;
            for i in 0..lo.len() {
                let d = (lo[i] - w[i]).abs().max((hi[i] - w[i]).abs());
                s += d * d;
            }
            s.sqrt()
        }
        DomainKind::Simplex { dim } => {
            let mut worst = 0.0f64;
            for j in 0..*dim {
                let mut s = 0.0;
                for (i, wi) in w.iter().enumerate() {
                    let v = if i == j { 1.0 - wi } else { -wi };
                    s += v * v;
                }
                worst = worst.max(s.sqrt());
            }
            worst
        }
    }
}

fn trunc_gauss<R: Rng>(rng: &mut R, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    let normal = Normal::new(0.0, sigma).unwrap();
    loop {
        let v = normal.sample(rng);
        if v.abs() <= 3.0 * sigma {
            return v;
        }
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

fn softplus(u: f64) -> f64 {
    if u > 0.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

// ---------------------------------------------------------------------------
// Condition checks
// ---------------------------------------------------------------------------

/// Default number of standard errors beyond which a check flags.
pub const DEFAULT_FLAG_SIGMAS: f64 = 3.0;

#[derive(Debug, Clone)]
pub struct CentralRow {
    pub index: usize,
    /// Monte Carlo estimate of `E[exp(-eta (l_f - l_f*))]`.
    pub estimate: f64,
    pub stderr: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone)]
pub struct CentralReport {
    pub rows: Vec<CentralRow>,
    pub flagged: usize,
    pub eta: f64,
    pub samples: usize,
}

/// Estimate `E[exp(-eta excess loss)]` at each test point and flag any
/// point whose estimate exceeds `1 + flag_sigmas * stderr`. Each point uses
/// an independent seed derived from `seed`, so estimates are reproducible
/// and monotone comparisons across `eta` values see identical samples.
pub fn central_check(
    problem: &ProblemInstance,
    eta: f64,
    test_points: &[Vec<f64>],
    m: usize,
    seed: u64,
    flag_sigmas: f64,
) -> Result<CentralReport> {
    if !(eta > 0.0) {
        return Err(Error::invalid("eta", "must be positive"));
    }
    if m == 0 {
        return Err(Error::invalid("m", "need at least one sample"));
    }
    let mut rows = Vec::with_capacity(test_points.len());
    let mut flagged = 0;
    for (index, f) in test_points.iter().enumerate() {
        let mut rng = ChaCha12Rng::seed_from_u64(child_seed(seed, index as u64));
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..m {
            let v = (-eta * problem.excess_loss_sample(f, &mut rng)?).exp();
            sum += v;
            sumsq += v * v;
        }
        let mean = sum / m as f64;
        let var = (sumsq / m as f64 - mean * mean).max(0.0);
        let stderr = (var / m as f64).sqrt();
        let is_flagged = mean > 1.0 + flag_sigmas * stderr;
        if is_flagged {
            flagged += 1;
        }
        rows.push(CentralRow { index, estimate: mean, stderr, flagged: is_flagged });
    }
    Ok(CentralReport { rows, flagged, eta, samples: m })
}

#[derive(Debug, Clone)]
pub struct BernsteinRow {
    pub index: usize,
    pub mean: f64,
    pub mean_se: f64,
    pub second_moment: f64,
    pub second_moment_se: f64,
    /// `E[X^2] / E[X]`; only meaningful when `included`.
    pub ratio: f64,
    /// Points whose mean excess clears five standard errors enter the
    /// `c_hat` maximum; the rest are too close to the minimizer to divide.
    pub included: bool,
}

#[derive(Debug, Clone)]
pub struct BernsteinReport {
    pub rows: Vec<BernsteinRow>,
    /// Largest observed second-moment-to-mean ratio.
    pub c_hat: f64,
    /// The claimed constant `4 (1/eta + B)`.
    pub bound: f64,
    /// Monte Carlo allowance added to the bound when judging `holds`.
    pub margin: f64,
    pub holds: bool,
}

/// Estimate the Bernstein ratio `E[X^2] / E[X]` of the excess loss at each
/// test point and compare the largest against `4 (1/eta + B)`.
pub fn bernstein_check(
    problem: &ProblemInstance,
    eta: f64,
    b: f64,
    test_points: &[Vec<f64>],
    m: usize,
    seed: u64,
    flag_sigmas: f64,
) -> Result<BernsteinReport> {
    if !(eta > 0.0) || !(b >= 0.0) {
        return Err(Error::invalid("eta", "need positive eta and nonnegative B"));
    }
    if m == 0 {
        return Err(Error::invalid("m", "need at least one sample"));
    }
    let mut rows = Vec::with_capacity(test_points.len());
    let mut c_hat = f64::NEG_INFINITY;
    let mut margin = 0.0;
    for (index, f) in test_points.iter().enumerate() {
        let mut rng = ChaCha12Rng::seed_from_u64(child_seed(seed, index as u64));
        let mut s1 = 0.0;
        let mut s2 = 0.0;
        let mut s4 = 0.0;
        for _ in 0..m {
            let v = problem.excess_loss_sample(f, &mut rng)?;
            s1 += v;
            s2 += v * v;
            s4 += v * v * v * v;
        }
        let mf = m as f64;
        let mean = s1 / mf;
        let m2 = s2 / mf;
        let mean_se = ((m2 - mean * mean).max(0.0) / mf).sqrt();
        let m2_se = ((s4 / mf - m2 * m2).max(0.0) / mf).sqrt();
        let included = mean > 5.0 * mean_se && mean > 0.0;
        let ratio = if included { m2 / mean } else { f64::NAN };
        if included && ratio > c_hat {
            c_hat = ratio;
            let rel = (m2_se / m2).hypot(mean_se / mean);
            margin = flag_sigmas * ratio * rel;
        }
        rows.push(BernsteinRow {
            index,
            mean,
            mean_se,
            second_moment: m2,
            second_moment_se: m2_se,
            ratio,
            included,
        });
    }
    let bound = 4.0 * (1.0 / eta + b);
    let holds = !c_hat.is_finite() || c_hat <= bound + margin;
    let c_hat = if c_hat.is_finite() { c_hat } else { f64::NAN };
    Ok(BernsteinReport { rows, c_hat, bound, margin, holds })
}

#[derive(Debug, Clone)]
pub struct VarianceRow {
    pub round: usize,
    /// Sample variance of the excess loss at the round's iterate.
    pub variance: f64,
    pub variance_se: f64,
    /// `4 (1/eta + B)` times the oracle excess risk of the iterate.
    pub bound: f64,
    pub excess_risk: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone)]
pub struct MartingaleCheck {
    pub rows: Vec<VarianceRow>,
    pub flagged: usize,
    pub samples_per_round: usize,
}

/// Check the conditional-variance inequality along an online run: treating
/// each iterate as fixed, the variance of its excess loss must stay below
/// `4 (1/eta + B)` times its excess risk.
pub fn conditional_variance_check(
    problem: &ProblemInstance,
    run: &OnlineRun,
    eta: f64,
    b: f64,
    m: usize,
    seed: u64,
    flag_sigmas: f64,
) -> Result<MartingaleCheck> {
    if !(eta > 0.0) || !(b >= 0.0) {
        return Err(Error::invalid("eta", "need positive eta and nonnegative B"));
    }
    if m < 2 {
        return Err(Error::invalid("m", "need at least two samples"));
    }
    let coeff = 4.0 * (1.0 / eta + b);
    let mut rows = Vec::with_capacity(run.iterates.len());
    let mut flagged = 0;
    for (round, f) in run.iterates.iter().enumerate() {
        let mut rng = ChaCha12Rng::seed_from_u64(child_seed(seed, round as u64));
        let mf = m as f64;
        let mut vals = Vec::with_capacity(m);
        let mut s1 = 0.0;
        for _ in 0..m {
            let v = problem.excess_loss_sample(f, &mut rng)?;
            s1 += v;
            vals.push(v);
        }
        let mean = s1 / mf;
        let mut s2c = 0.0;
        let mut s4c = 0.0;
        for v in &vals {
            let d = v - mean;
            s2c += d * d;
            s4c += d * d * d * d;
        }
        let variance = s2c / (mf - 1.0);
        // Asymptotic standard error of the sample variance.
        let m4 = s4c / mf;
        let variance_se = ((m4 - variance * variance).max(0.0) / mf).sqrt();
        let (excess, _) = problem.excess_risk_seeded(f, child_seed(seed, 1_000_000 + round as u64))?;
        let bound = coeff * excess;
        let is_flagged = variance > bound + flag_sigmas * variance_se;
        if is_flagged {
            flagged += 1;
        }
        rows.push(VarianceRow {
            round,
            variance,
            variance_se,
            bound,
            excess_risk: excess,
            flagged: is_flagged,
        });
    }
    Ok(MartingaleCheck { rows, flagged, samples_per_round: m })
}

/// Excess-risk level below which finite-class ERM under a `(C, q)`-Bernstein
/// condition cannot be forced to select a bad candidate, for a subclass of
/// `class_size` candidates:
///
/// `(2 (C + B^(2-q)/3) log((class_size - 1)/delta) / n)^(1/(2-q))`.
pub fn erm_selection_threshold(
    c: f64,
    q: f64,
    b: f64,
    class_size: usize,
    n: usize,
    delta: f64,
) -> Result<f64> {
    if class_size < 2 {
        return Err(Error::precondition(format!(
            "threshold needs a subclass of at least 2, got {class_size}"
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid("delta", format!("must lie in (0,1), got {delta}")));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::invalid("q", format!("must lie in (0,1], got {q}")));
    }
    if !(c > 0.0) || !(b >= 0.0) || n == 0 {
        return Err(Error::invalid("C", "need positive C and n, nonnegative B"));
    }
    let level = 2.0 * (c + b.powf(2.0 - q) / 3.0) * ((class_size as f64 - 1.0) / delta).ln()
        / n as f64;
    Ok(level.powf(1.0 / (2.0 - q)))
}
