//! Brute-force verifiers for the dual worst-case cost, best responses and
//! gradients. Restricted to one or two periods; they exist to certify the
//! fast paths, not to replace them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::game::{ActionSpace, AffinePriceCost, AggregateSpace, PlayerClass};
use crate::robust::{
    augmented_cost, augmented_gradient, is_smooth_point, robust_cost, RobustnessParams, WassersteinOrder,
};

/// Largest dimension the grid oracles accept.
pub const MAX_ORACLE_DIM: usize = 2;

/// Default grid resolution per dimension.
pub const DEFAULT_GRID_POINTS: usize = 201;

/// A finitely supported distribution over the aggregate box.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        check_dim(atoms.len(), weights.len())?;
        if atoms.is_empty() {
            return Err(Error::InvalidParameter("a distribution needs at least one atom".into()));
        }
        let n = atoms[0].len();
        for a in &atoms {
            check_dim(n, a.len())?;
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidParameter("weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { atoms, weights })
    }

    pub fn dirac(point: Vec<f64>) -> Self {
        Self {
            atoms: vec![point],
            weights: vec![1.0],
        }
    }

    pub fn atoms(&self) -> &[Vec<f64>] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_supported_in(&self, support: &AggregateSpace) -> bool {
        self.atoms.iter().all(|a| support.contains(a))
    }

    /// `E[J(x, s)]` under this distribution.
    pub fn expected_cost(&self, x: &[f64], cost: &AffinePriceCost) -> f64 {
        self.atoms
            .iter()
            .zip(&self.weights)
            .map(|(a, w)| w * cost.evaluate(x, a))
            .sum()
    }
}

fn dist_pow(a: &[f64], b: &[f64], order: WassersteinOrder) -> f64 {
    let sq: f64 = a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum();
    match order {
        WassersteinOrder::Two => sq,
        WassersteinOrder::One => sq.sqrt(),
    }
}

/// `W_p(mu, delta_sigma) = (sum_j w_j |a_j - sigma|^p)^(1/p)`; the coupling
/// with a Dirac marginal is unique.
pub fn wasserstein_to_dirac(mu: &DiscreteDistribution, sigma: &[f64], order: WassersteinOrder) -> f64 {
    let moment: f64 = mu
        .atoms
        .iter()
        .zip(&mu.weights)
        .map(|(a, w)| w * dist_pow(a, sigma, order))
        .sum();
    match order {
        WassersteinOrder::Two => moment.sqrt(),
        WassersteinOrder::One => moment,
    }
}

fn grid_axis(top: f64, points: usize) -> Vec<f64> {
    if points <= 1 {
        return vec![0.0];
    }
    (0..points).map(|i| top * i as f64 / (points - 1) as f64).collect()
}

fn grid_points(uppers: &[f64], points: usize) -> Vec<Vec<f64>> {
    let axes: Vec<Vec<f64>> = uppers.iter().map(|u| grid_axis(*u, points)).collect();
    let mut out = vec![Vec::new()];
    for axis in &axes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(*v);
                    p
                })
            })
            .collect();
    }
    out
}

/// Result of [`grid_two_point_worst_case`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridWorstCase {
    pub value: f64,
    pub distribution: DiscreteDistribution,
    /// Set when no grid atom lies inside the ball; `value` is then the
    /// nominal cost.
    pub coarse: bool,
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Best distribution on a uniform grid of the support within the
/// Wasserstein ball.
///
/// Maximising `E[J]` subject to one moment constraint and normalisation has
/// an optimum on at most two atoms. Mapping each atom to the point
/// (transport cost, cost value), the best pair is the vertex or edge of the
/// upper concave hull of those points at transport budget `epsilon^p`, so the
/// hull replaces the quadratic enumeration of pairs with the same answer.
pub fn grid_two_point_worst_case(
    x: &[f64],
    sigma: &[f64],
    params: &RobustnessParams,
    cost: &AffinePriceCost,
    grid_points_per_dim: usize,
) -> Result<GridWorstCase> {
    let n = params.support.dim;
    if n > MAX_ORACLE_DIM {
        return Err(Error::InvalidParameter(format!(
            "grid oracle supports at most {MAX_ORACLE_DIM} dimensions, got {n}"
        )));
    }
    check_dim(n, x.len())?;
    check_dim(n, sigma.len())?;
    check_dim(n, cost.dim())?;
    let budget = params.radius_power();
    let atoms = grid_points(&vec![params.support.sigma_max; n], grid_points_per_dim);

    let mut pts: Vec<(f64, f64, usize)> = atoms
        .iter()
        .enumerate()
        .map(|(i, a)| (dist_pow(a, sigma, params.order), cost.evaluate(x, a), i))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));

    if pts[0].0 > budget {
        log::warn!("grid too coarse: no atom within radius {}", params.epsilon);
        return Ok(GridWorstCase {
            value: cost.evaluate(x, sigma),
            distribution: DiscreteDistribution::dirac(sigma.to_vec()),
            coarse: true,
        });
    }

    // Upper hull, left to right.
    let mut hull: Vec<(f64, f64, usize)> = Vec::new();
    for p in pts {
        if hull.last().is_some_and(|h| h.0 == p.0) {
            continue;
        }
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            if cross((a.0, a.1), (b.0, b.1), (p.0, p.1)) >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    // Only the rising part of the envelope matters under a `<=` budget.
    let peak = hull
        .iter()
        .enumerate()
        .fold(0, |best, (i, h)| if h.1 > hull[best].1 { i } else { best });
    hull.truncate(peak + 1);

    let last = hull[hull.len() - 1];
    if budget >= last.0 {
        return Ok(GridWorstCase {
            value: last.1,
            distribution: DiscreteDistribution::dirac(atoms[last.2].clone()),
            coarse: false,
        });
    }
    let j = hull
        .iter()
        .position(|h| h.0 > budget)
        .expect("budget below the last hull vertex");
    let (lo, hi) = (hull[j - 1], hull[j]);
    let w = ((hi.0 - budget) / (hi.0 - lo.0)).clamp(0.0, 1.0);
    let value = w * lo.1 + (1.0 - w) * hi.1;
    let distribution = DiscreteDistribution::new(vec![atoms[lo.2].clone(), atoms[hi.2].clone()], vec![w, 1.0 - w])?;
    Ok(GridWorstCase {
        value,
        distribution,
        coarse: false,
    })
}

/// Minimises `f` over the projections of a uniform grid of the action box.
pub fn brute_force_minimize<F: FnMut(&[f64]) -> f64>(
    space: &ActionSpace,
    grid_points_per_dim: usize,
    mut f: F,
) -> Result<(Vec<f64>, f64)> {
    if space.dim() > MAX_ORACLE_DIM {
        return Err(Error::InvalidParameter(format!(
            "brute-force search supports at most {MAX_ORACLE_DIM} dimensions, got {}",
            space.dim()
        )));
    }
    let mut best: Option<(Vec<f64>, f64)> = None;
    for p in grid_points(space.upper(), grid_points_per_dim) {
        let x = space.project(&p)?;
        let v = f(&x);
        if best.as_ref().is_none_or(|b| v < b.1) {
            best = Some((x, v));
        }
    }
    Ok(best.expect("grid is never empty"))
}

/// Grid search for the robust best response of `class` to a fixed aggregate.
pub fn brute_force_best_response(
    class: &PlayerClass,
    sigma: &[f64],
    params: &RobustnessParams,
    grid_points_per_dim: usize,
) -> Result<(Vec<f64>, f64)> {
    let mut failure = None;
    let out = brute_force_minimize(&class.space, grid_points_per_dim, |x| {
        match robust_cost(x, sigma, params, &class.cost) {
            Ok(r) => r.value,
            Err(e) => {
                failure.get_or_insert(e);
                f64::INFINITY
            }
        }
    })?;
    match failure {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

/// Largest mixed relative error `|g_i - fd_i| / max(1, |g_i|)` between an
/// analytic gradient and central differences with step
/// `h = 1e-6 (1 + |point|)`.
pub fn finite_difference_check<F: Fn(&[f64]) -> f64>(f: F, gradient: &[f64], point: &[f64]) -> f64 {
    let norm = point.iter().map(|v| v * v).sum::<f64>().sqrt();
    let h = 1e-6 * (1.0 + norm);
    let mut worst: f64 = 0.0;
    let mut probe = point.to_vec();
    for i in 0..point.len() {
        probe[i] = point[i] + h;
        let up = f(&probe);
        probe[i] = point[i] - h;
        let down = f(&probe);
        probe[i] = point[i];
        let fd = (up - down) / (2.0 * h);
        worst = worst.max((gradient[i] - fd).abs() / gradient[i].abs().max(1.0));
    }
    worst
}

/// Outcome of [`check_augmented_gradient`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GradientCheck {
    Checked(f64),
    /// The point sits on (or next to) a kink of the inner maximiser.
    SkippedKink,
}

/// Finite-difference check of the Danskin gradient of the augmented cost in
/// `(x, lambda)`, skipped at nonsmooth points.
pub fn check_augmented_gradient(
    x: &[f64],
    lambda: f64,
    sigma: &[f64],
    params: &RobustnessParams,
    cost: &AffinePriceCost,
) -> Result<GradientCheck> {
    let mut point = x.to_vec();
    point.push(lambda);
    let norm = point.iter().map(|v| v * v).sum::<f64>().sqrt();
    let margin = 1e-4 * (1.0 + norm);
    if !is_smooth_point(x, lambda, sigma, cost, &params.support, margin) {
        return Ok(GradientCheck::SkippedKink);
    }
    let g = augmented_gradient(x, lambda, sigma, params, cost)?;
    let mut grad = g.x;
    grad.push(g.lambda);
    let n = x.len();
    let f = |z: &[f64]| augmented_cost(&z[..n], z[n], sigma, params, cost).unwrap_or(f64::NAN);
    Ok(GradientCheck::Checked(finite_difference_check(f, &grad, &point)))
}

/// One random instance of the dual-versus-grid comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct AgreementCase {
    pub dim: usize,
    pub epsilon: f64,
    pub dual: f64,
    pub grid: f64,
    /// Allowed `|dual - grid|`: the larger of `1e-3` and the Lipschitz
    /// constant of `J(x, .)` (sup-norm) times the grid spacing.
    pub bound: f64,
}

impl AgreementCase {
    pub fn passed(&self) -> bool {
        (self.dual - self.grid).abs() <= self.bound
    }
}

/// Compares [`robust_cost`] with [`grid_two_point_worst_case`] on `count`
/// seeded random instances with one or two periods and `p = 2`.
pub fn dual_oracle_agreement(seed: u64, count: usize, grid_points_per_dim: usize) -> Result<Vec<AgreementCase>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.gen_range(1..=MAX_ORACLE_DIM);
            let sigma_max = rng.gen_range(0.5..4.0);
            let alpha: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.5..2.0)).collect();
            let beta: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0)).collect();
            let sigma: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..sigma_max)).collect();
            let epsilon = rng.gen_range(0.01..1.5 * sigma_max * (n as f64).sqrt());
            let cost = AffinePriceCost::new(alpha, beta)?;
            let params = RobustnessParams::quadratic(epsilon, AggregateSpace::new(sigma_max, n)?)?;
            let dual = robust_cost(&x, &sigma, &params, &cost)?.value;
            let grid = grid_two_point_worst_case(&x, &sigma, &params, &cost, grid_points_per_dim)?.value;
            let lipschitz: f64 = x.iter().zip(&cost.alpha).map(|(xi, a)| (xi * a).abs()).sum();
            let spacing = sigma_max / (grid_points_per_dim.max(2) - 1) as f64;
            Ok(AgreementCase {
                dim: n,
                epsilon,
                dual,
                grid,
                bound: (lipschitz * spacing).max(1e-3),
            })
        })
        .collect()
}
