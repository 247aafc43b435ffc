//! Convex feasible sets: L2 balls, axis-aligned boxes, and probability
//! simplices, with the projection and enumeration primitives the solvers
//! need.
//!
//! Simplex projection is the exact sort-and-threshold method (Duchi,
//! Shalev-Shwartz, Singer, Chandra 2008). Matrix-norm projection is solved
//! by projected gradient on the quadratic objective, which is guaranteed
//! convergent for PSD weight matrices at the small dimensions used here.

use rand::Rng;

use crate::linalg::{self, SymMat};
use crate::{Error, Result};

/// Membership tolerance used by `contains` and grid filtering.
pub const MEMBERSHIP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum DomainKind {
    L2Ball { center: Vec<f64>, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Simplex { dim: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexDomain {
    kind: DomainKind,
    dim: usize,
    diameter: f64,
}

impl ConvexDomain {
    pub fn l2_ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::invalid("center", "must be nonempty"));
        }
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(Error::invalid("radius", format!("must be nonnegative, got {radius}")));
        }
        if !linalg::all_finite(&center) {
            return Err(Error::invalid("center", "non-finite entry"));
        }
        let dim = center.len();
        Ok(Self { kind: DomainKind::L2Ball { center, radius }, dim, diameter: 2.0 * radius })
    }

    pub fn unit_ball(dim: usize) -> Self {
        Self::l2_ball(vec![0.0; dim], 1.0).expect("unit ball")
    }

    pub fn box_bounds(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::invalid("bounds", "lo/hi must be nonempty and equal length"));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a <= b) || !a.is_finite() || !b.is_finite()) {
            return Err(Error::invalid("bounds", "need finite lo <= hi per coordinate"));
        }
        let dim = lo.len();
        let diameter = lo.iter().zip(&hi).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt();
        Ok(Self { kind: DomainKind::Box { lo, hi }, dim, diameter })
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::box_bounds(vec![lo], vec![hi])
    }

    /// Probability simplex with `dim` coordinates.
    pub fn simplex(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "must be positive"));
        }
        // Distance between two vertices e_i, e_j; a single point for dim = 1.
        let diameter = if dim == 1 { 0.0 } else { std::f64::consts::SQRT_2 };
        Ok(Self { kind: DomainKind::Simplex { dim }, dim, diameter })
    }

    pub fn kind(&self) -> &DomainKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Euclidean diameter `sup ||f - f'||`.
    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn contains(&self, p: &[f64], tol: f64) -> bool {
        if p.len() != self.dim {
            return false;
        }
        match &self.kind {
            DomainKind::L2Ball { center, radius } => linalg::dist2(p, center) <= radius + tol,
            DomainKind::Box { lo, hi } => {
                p.iter().zip(lo).all(|(v, a)| *v >= a - tol)
                    && p.iter().zip(hi).all(|(v, b)| *v <= b + tol)
            }
            DomainKind::Simplex { .. } => {
                p.iter().all(|v| *v >= -tol) && (p.iter().sum::<f64>() - 1.0).abs() <= tol
            }
        }
    }

    /// Euclidean projection onto the set.
    pub fn project(&self, p: &[f64]) -> Result<Vec<f64>> {
        if p.len() != self.dim {
            return Err(Error::invalid(
                "point",
                format!("dimension {} does not match domain dimension {}", p.len(), self.dim),
            ));
        }
        if !linalg::all_finite(p) {
            return Err(Error::invalid("point", "non-finite entry"));
        }
        Ok(match &self.kind {
            DomainKind::L2Ball { center, radius } => {
                let d = linalg::dist2(p, center);
                if d <= *radius {
                    p.to_vec()
                } else {
                    let s = radius / d;
                    center.iter().zip(p).map(|(c, v)| c + s * (v - c)).collect()
                }
            }
            DomainKind::Box { lo, hi } => {
                p.iter().zip(lo.iter().zip(hi)).map(|(v, (a, b))| v.clamp(*a, *b)).collect()
            }
            DomainKind::Simplex { dim } => project_simplex(p, *dim),
        })
    }

    /// Projection in the norm induced by a PSD matrix `A`:
    /// `argmin_q (q - p)^T A (q - p)` over the set.
    ///
    /// Callers are expected to regularize `A` (e.g. `A + eps I`); a strictly
    /// positive definite `A` gives a unique minimizer. Solved by projected
    /// gradient with a fixed step from the Gershgorin bound, to a
    /// projected-gradient-mapping residual of `tol`.
    pub fn project_norm(&self, p: &[f64], a: &SymMat, tol: f64, max_iters: usize) -> Result<Vec<f64>> {
        if p.len() != self.dim || a.dim() != self.dim {
            return Err(Error::invalid("point", "dimension mismatch with domain or matrix"));
        }
        if !a.is_psd(1e-10) {
            return Err(Error::invalid("matrix", "not symmetric positive semidefinite"));
        }
        if self.contains(p, MEMBERSHIP_TOL) {
            return Ok(p.to_vec());
        }
        let lip = 2.0 * a.gershgorin_bound();
        if lip == 0.0 {
            // A = 0: objective is constant, any feasible point is optimal.
            return self.project(p);
        }
        let step = 1.0 / lip;
        let mut q = self.project(p)?;
        for iter in 0..max_iters {
            let diff = linalg::sub(&q, p);
            let grad = linalg::scale(&a.matvec(&diff), 2.0);
            let next = self.project(&linalg::add_scaled(&q, -step, &grad))?;
            let residual = linalg::dist2(&next, &q) / step;
            q = next;
            if residual <= tol {
                return Ok(q);
            }
            if iter + 1 == max_iters {
                return Err(Error::Convergence { residual, iters: max_iters });
            }
        }
        Ok(q)
    }

    /// Deterministic covering grid with spacing at most `diameter /
    /// resolution`; every returned point is a member of the set.
    ///
    /// Balls and boxes enumerate an axis-aligned lattice (filtered by
    /// membership for balls) and support `dim <= 3`; the simplex enumerates
    /// barycentric lattice points for any `dim` with `resolution <= 64`.
    pub fn grid_points(&self, resolution: usize) -> Result<Vec<Vec<f64>>> {
        if resolution == 0 {
            return Err(Error::invalid("resolution", "must be positive"));
        }
        match &self.kind {
            DomainKind::L2Ball { center, radius } => {
                if self.dim > 3 {
                    return Err(Error::UnsupportedDimension { dim: self.dim, max: 3 });
                }
                let lo: Vec<f64> = center.iter().map(|c| c - radius).collect();
                let hi: Vec<f64> = center.iter().map(|c| c + radius).collect();
                let lattice = box_lattice(&lo, &hi, resolution);
                Ok(lattice
                    .into_iter()
                    .filter(|q| linalg::dist2(q, center) <= radius + MEMBERSHIP_TOL)
                    .collect())
            }
            DomainKind::Box { lo, hi } => {
                if self.dim > 3 {
                    return Err(Error::UnsupportedDimension { dim: self.dim, max: 3 });
                }
                Ok(box_lattice(lo, hi, resolution))
            }
            DomainKind::Simplex { dim } => {
                if resolution > 64 {
                    return Err(Error::precondition(format!(
                        "simplex grids support resolution <= 64, got {resolution}"
                    )));
                }
                let mut out = Vec::new();
                let mut point = vec![0usize; *dim];
                simplex_compositions(*dim, resolution, 0, resolution, &mut point, &mut out);
                Ok(out)
            }
        }
    }

    /// Mean of the covering grid; used as the canonical initial iterate.
    pub fn centroid(&self) -> Vec<f64> {
        match &self.kind {
            DomainKind::L2Ball { center, .. } => center.clone(),
            DomainKind::Box { lo, hi } => {
                lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect()
            }
            DomainKind::Simplex { dim } => vec![1.0 / *dim as f64; *dim],
        }
    }

    /// Uniform sample from the set (rejection from the bounding box for
    /// balls, exponential spacings for the simplex).
    pub fn sample_uniform<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        match &self.kind {
            DomainKind::L2Ball { center, radius } => loop {
                let q: Vec<f64> =
                    center.iter().map(|c| rng.random_range(c - radius..=c + radius)).collect();
                if linalg::dist2(&q, center) <= *radius {
                    return q;
                }
            },
            DomainKind::Box { lo, hi } => {
                lo.iter().zip(hi).map(|(a, b)| rng.random_range(*a..=*b)).collect()
            }
            DomainKind::Simplex { dim } => {
                let mut e: Vec<f64> =
                    (0..*dim).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
                let s: f64 = e.iter().sum();
                for v in &mut e {
                    *v /= s;
                }
                e
            }
        }
    }
}

/// Exact Euclidean projection onto the probability simplex.
fn project_simplex(p: &[f64], dim: usize) -> Vec<f64> {
    let mut u = p.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    let mut support = 0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            tau = t;
            support = j + 1;
        }
    }
    debug_assert!(support >= 1 && support <= dim);
    let _ = support;
    p.iter().map(|v| (v - tau).max(0.0)).collect()
}

fn box_lattice(lo: &[f64], hi: &[f64], resolution: usize) -> Vec<Vec<f64>> {
    let dim = lo.len();
    let axis: Vec<Vec<f64>> = (0..dim)
        .map(|i| {
            (0..=resolution)
                .map(|k| lo[i] + (hi[i] - lo[i]) * k as f64 / resolution as f64)
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(axis[0].len().pow(dim as u32));
    let mut idx = vec![0usize; dim];
    loop {
        out.push((0..dim).map(|i| axis[i][idx[i]]).collect());
        let mut carry = dim;
        for i in (0..dim).rev() {
            idx[i] += 1;
            if idx[i] <= resolution {
                carry = i;
                break;
            }
            idx[i] = 0;
        }
        if carry == dim {
            break;
        }
    }
    out
}

fn simplex_compositions(
    dim: usize,
    resolution: usize,
    coord: usize,
    remaining: usize,
    point: &mut Vec<usize>,
    out: &mut Vec<Vec<f64>>,
) {
    if coord == dim - 1 {
        point[coord] = remaining;
        out.push(point.iter().map(|k| *k as f64 / resolution as f64).collect());
        return;
    }
    for k in 0..=remaining {
        point[coord] = k;
        simplex_compositions(dim, resolution, coord + 1, remaining - k, point, out);
    }
}
