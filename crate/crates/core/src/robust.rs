//! Worst-case cost over a Wasserstein ball centred at the aggregate.
//!
//! For an affine-price cost `J(x, s) = sum_k x_k (alpha_k s_k + beta_k)` and
//! the ball of radius `epsilon` around the Dirac at `sigma` (type-2
//! Wasserstein, Euclidean ground norm, support `[0, sigma_max]^n`), the
//! worst-case expectation equals the one-dimensional dual
//!
//! ```text
//! min_{lambda in [0, M]}  max_{s in box} { J(x, s) - lambda |sigma - s|^2 } + lambda epsilon^2
//! ```
//!
//! whose inner maximisation is separable and solved in closed form. The same
//! inner problem, written through its box multipliers `tau_l, tau_u`, gives
//! the epigraph form evaluated by [`example1_objective`].

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::game::{AffinePriceCost, AggregateSpace, PlayerClass};
use crate::search::{bisect_nondecreasing, golden_section};

/// Order `p` of the Wasserstein distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum WassersteinOrder {
    One,
    Two,
}

impl WassersteinOrder {
    pub fn as_u32(self) -> u32 {
        match self {
            Self::One => 1,
            Self::Two => 2,
        }
    }

    /// Conjugate exponent `q` with `1/p + 1/q = 1`.
    pub fn conjugate(self) -> f64 {
        match self {
            Self::One => f64::INFINITY,
            Self::Two => 2.0,
        }
    }

    /// `t^p` for `t >= 0`.
    pub fn power(self, t: f64) -> f64 {
        match self {
            Self::One => t,
            Self::Two => t * t,
        }
    }
}

impl TryFrom<u32> for WassersteinOrder {
    type Error = Error;

    fn try_from(p: u32) -> Result<Self> {
        match p {
            1 => Ok(Self::One),
            2 => Ok(Self::Two),
            other => Err(Error::UnsupportedOrder(other)),
        }
    }
}

impl From<WassersteinOrder> for u32 {
    fn from(p: WassersteinOrder) -> u32 {
        p.as_u32()
    }
}

/// Radius, order and support of the ambiguity set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustnessParams {
    pub epsilon: f64,
    pub order: WassersteinOrder,
    pub support: AggregateSpace,
}

impl RobustnessParams {
    pub fn new(epsilon: f64, order: WassersteinOrder, support: AggregateSpace) -> Result<Self> {
        if !epsilon.is_finite() || epsilon < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be finite and nonnegative, got {epsilon}"
            )));
        }
        Ok(Self {
            epsilon,
            order,
            support,
        })
    }

    /// Type-2 ball with the given radius.
    pub fn quadratic(epsilon: f64, support: AggregateSpace) -> Result<Self> {
        Self::new(epsilon, WassersteinOrder::Two, support)
    }

    /// `epsilon^p`.
    pub fn radius_power(&self) -> f64 {
        self.order.power(self.epsilon)
    }

    pub fn is_nominal(&self) -> bool {
        self.epsilon == 0.0
    }

    fn require_quadratic(&self) -> Result<()> {
        match self.order {
            WassersteinOrder::Two => Ok(()),
            other => Err(Error::UnsupportedOrder(other.as_u32())),
        }
    }
}

/// Conjugate penalty `psi_p` of the dual program (Euclidean norm, which is
/// self-dual): `|w|^2 / 4` for `p = 2`, the indicator of the unit ball for
/// `p = 1`.
pub fn psi_p(w: &[f64], order: WassersteinOrder) -> f64 {
    let norm_sq: f64 = w.iter().map(|v| v * v).sum();
    match order {
        WassersteinOrder::Two => {
            let q = order.conjugate();
            (q - 1.0).powf(q - 1.0) / q.powf(q) * norm_sq
        }
        WassersteinOrder::One => {
            if norm_sq.sqrt() <= 1.0 {
                0.0
            } else {
                f64::INFINITY
            }
        }
    }
}

/// Value and maximiser of the inner problem.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerMax {
    pub value: f64,
    pub sigma_hat: Vec<f64>,
}

/// `max_{s in [0, sigma_max]^n} J(x, s) - lambda |s - sigma|^2` for `p = 2`.
///
/// Separable: with `a_k = alpha_k x_k` the maximiser is
/// `clip(sigma_k + a_k / (2 lambda), 0, sigma_max)` when `lambda > 0`; at
/// `lambda = 0` the problem is linear and the maximiser sits on the upper
/// corner where `a_k > 0`, the lower one where `a_k < 0`, and at `sigma_k`
/// when `a_k = 0`.
pub fn inner_max_affine(
    x: &[f64],
    sigma: &[f64],
    lambda: f64,
    cost: &AffinePriceCost,
    support: &AggregateSpace,
) -> Result<InnerMax> {
    check_dim(cost.dim(), x.len())?;
    check_dim(cost.dim(), sigma.len())?;
    if !(lambda >= 0.0) {
        return Err(Error::NegativeMultiplier(lambda));
    }
    let top = support.sigma_max;
    let mut value = 0.0;
    let mut sigma_hat = Vec::with_capacity(x.len());
    for k in 0..x.len() {
        let a = cost.alpha[k] * x[k];
        let s = if lambda > 0.0 {
            (sigma[k] + a / (2.0 * lambda)).clamp(0.0, top)
        } else if a > 0.0 {
            top
        } else if a < 0.0 {
            0.0
        } else {
            sigma[k]
        };
        let d = s - sigma[k];
        value += a * s - lambda * d * d + x[k] * cost.beta[k];
        sigma_hat.push(s);
    }
    Ok(InnerMax { value, sigma_hat })
}

/// Cost of the augmented game: inner maximum plus `lambda epsilon^p`.
pub fn augmented_cost(
    x: &[f64],
    lambda: f64,
    sigma: &[f64],
    params: &RobustnessParams,
    cost: &AffinePriceCost,
) -> Result<f64> {
    if params.is_nominal() {
        return Err(Error::ZeroRadius);
    }
    params.require_quadratic()?;
    let inner = inner_max_affine(x, sigma, lambda, cost, &params.support)?;
    Ok(inner.value + lambda * params.radius_power())
}

/// Danskin gradient of [`augmented_cost`] in `(x, lambda)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedGradient {
    pub x: Vec<f64>,
    pub lambda: f64,
}

/// Gradient of the augmented cost evaluated at the inner maximiser:
/// `d/dx_k = alpha_k s_k + beta_k`, `d/dlambda = epsilon^2 - |sigma - s|^2`.
/// Valid wherever the maximiser is unique and away from clip boundaries.
pub fn augmented_gradient(
    x: &[f64],
    lambda: f64,
    sigma: &[f64],
    params: &RobustnessParams,
    cost: &AffinePriceCost,
) -> Result<AugmentedGradient> {
    if params.is_nominal() {
        return Err(Error::ZeroRadius);
    }
    params.require_quadratic()?;
    let inner = inner_max_affine(x, sigma, lambda, cost, &params.support)?;
    Ok(gradient_at(&inner.sigma_hat, sigma, params, cost))
}

pub(crate) fn gradient_at(
    sigma_hat: &[f64],
    sigma: &[f64],
    params: &RobustnessParams,
    cost: &AffinePriceCost,
) -> AugmentedGradient {
    let x = sigma_hat
        .iter()
        .zip(&cost.alpha)
        .zip(&cost.beta)
        .map(|((s, a), b)| a * s + b)
        .collect();
    let spread: f64 = sigma_hat.iter().zip(sigma).map(|(s, c)| (s - c) * (s - c)).sum();
    AugmentedGradient {
        x,
        lambda: params.radius_power() - spread,
    }
}

/// True when `(x, lambda)` is a smooth point of the augmented cost: the
/// multiplier is positive and no unclipped maximiser lies within `margin`
/// of a face of the support box.
pub fn is_smooth_point(
    x: &[f64],
    lambda: f64,
    sigma: &[f64],
    cost: &AffinePriceCost,
    support: &AggregateSpace,
    margin: f64,
) -> bool {
    if !(lambda > margin) {
        return false;
    }
    x.iter().zip(sigma).enumerate().all(|(k, (xk, s))| {
        let a = cost.alpha[k] * xk;
        if a == 0.0 {
            return true;
        }
        let u = s + a / (2.0 * lambda);
        (u - 0.0).abs() > margin && (u - support.sigma_max).abs() > margin
    })
}

/// Result of [`robust_cost`].
#[derive(Debug, Clone, PartialEq)]
pub struct WorstCaseResult {
    pub value: f64,
    pub lambda_star: f64,
    pub sigma_hat_star: Vec<f64>,
}

fn sup_abs_cost(weights: impl Iterator<Item = f64>, cost: &AffinePriceCost, top: f64) -> f64 {
    weights
        .zip(cost.alpha.iter().zip(&cost.beta))
        .map(|(w, (a, b))| w.abs() * (a * top + b).abs().max(b.abs()))
        .sum()
}

/// Upper bound `M = 2 U / epsilon^p` on the optimal multiplier of any class
/// member, with `U = sum_k cap_k max(|alpha_k sigma_max + beta_k|, |beta_k|)`
/// bounding `|J|` over the action set and the support box.
pub fn big_m(class: &PlayerClass, params: &RobustnessParams) -> Result<f64> {
    if params.is_nominal() {
        return Err(Error::ZeroRadius);
    }
    check_dim(class.dim(), params.support.dim)?;
    let bound = sup_abs_cost(
        class.space.upper().iter().copied(),
        &class.cost,
        params.support.sigma_max,
    );
    Ok(2.0 * bound / params.radius_power())
}

/// The same bound for one fixed action.
pub fn multiplier_cap(x: &[f64], cost: &AffinePriceCost, params: &RobustnessParams) -> Result<f64> {
    if params.is_nominal() {
        return Err(Error::ZeroRadius);
    }
    check_dim(cost.dim(), x.len())?;
    let bound = sup_abs_cost(x.iter().copied(), cost, params.support.sigma_max);
    Ok(2.0 * bound / params.radius_power())
}

fn centred(sigma: &[f64], support: &AggregateSpace) -> Vec<f64> {
    if support.contains(sigma) {
        sigma.to_vec()
    } else {
        log::warn!("aggregate lies outside [0, {}]^n; clipping it", support.sigma_max);
        support.clip(sigma)
    }
}

/// Worst-case expected cost over the ball around `delta_sigma`.
///
/// For `epsilon = 0` this is the nominal cost. Otherwise the dual function
/// (convex in the multiplier) is minimised over `[0, M]` by golden-section
/// search to absolute tolerance `1e-9 (1 + M)`. Aggregates outside the
/// support are clipped with a warning.
pub fn robust_cost(
    x: &[f64],
    sigma: &[f64],
    params: &RobustnessParams,
    cost: &AffinePriceCost,
) -> Result<WorstCaseResult> {
    check_dim(cost.dim(), x.len())?;
    check_dim(cost.dim(), sigma.len())?;
    let sigma = centred(sigma, &params.support);
    if params.is_nominal() {
        return Ok(WorstCaseResult {
            value: cost.evaluate(x, &sigma),
            lambda_star: 0.0,
            sigma_hat_star: sigma,
        });
    }
    params.require_quadratic()?;

    let cap = multiplier_cap(x, cost, params)?;
    let dual = |lambda: f64| {
        inner_max_affine(x, &sigma, lambda, cost, &params.support)
            .map(|m| m.value + lambda * params.radius_power())
            .unwrap_or(f64::INFINITY)
    };
    let best = golden_section(dual, 0.0, cap, 1e-9 * (1.0 + cap));
    let inner = inner_max_affine(x, &sigma, best.arg, cost, &params.support)?;
    Ok(WorstCaseResult {
        value: best.value,
        lambda_star: best.arg,
        sigma_hat_star: inner.sigma_hat,
    })
}

/// Optional proximal pull on the multiplier: adds
/// `(lambda - center)^2 * weight / 2` to the dual function.
#[derive(Debug, Clone, Copy)]
pub(crate) struct MultiplierProx {
    pub center: f64,
    pub weight: f64,
}

/// Minimiser over `[0, cap]` of the dual function (plus an optional proximal
/// term) found by bisection on its derivative
/// `epsilon^2 - |sigma - s(lambda)|^2 (+ weight (lambda - center))`, which is
/// nondecreasing because the spread of the inner maximiser shrinks as
/// `lambda` grows.
pub(crate) fn optimal_multiplier(
    x: &[f64],
    sigma: &[f64],
    params: &RobustnessParams,
    cost: &AffinePriceCost,
    cap: f64,
    prox: Option<MultiplierProx>,
) -> f64 {
    let top = params.support.sigma_max;
    let eps_p = params.radius_power();
    let derivative = |lambda: f64| {
        let mut spread = 0.0;
        for k in 0..x.len() {
            let a = cost.alpha[k] * x[k];
            let s = if lambda > 0.0 {
                (sigma[k] + a / (2.0 * lambda)).clamp(0.0, top)
            } else if a > 0.0 {
                top
            } else if a < 0.0 {
                0.0
            } else {
                sigma[k]
            };
            spread += (s - sigma[k]) * (s - sigma[k]);
        }
        let pull = prox.map_or(0.0, |p| p.weight * (lambda - p.center));
        eps_p - spread + pull
    };
    bisect_nondecreasing(derivative, 0.0, cap, 400)
}

/// Epigraph form of the augmented cost for affine prices and a box support:
///
/// ```text
/// lambda eps^2 + sum_k [x_k (alpha_k sigma_k + beta_k) + sigma_k (tl_k - tu_k) + sigma_max tu_k]
///              + |tl - tu + alpha .* x|^2 / (4 lambda)
/// ```
pub fn example1_objective(
    x: &[f64],
    lambda: f64,
    sigma: &[f64],
    tau_lower: &[f64],
    tau_upper: &[f64],
    params: &RobustnessParams,
    cost: &AffinePriceCost,
) -> Result<f64> {
    let n = cost.dim();
    for v in [x, sigma, tau_lower, tau_upper] {
        check_dim(n, v.len())?;
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "the epigraph form needs a positive multiplier, got {lambda}"
        )));
    }
    if tau_lower.iter().chain(tau_upper).any(|t| !(*t >= 0.0)) {
        return Err(Error::InvalidParameter("box multipliers must be nonnegative".into()));
    }
    let top = params.support.sigma_max;
    let mut linear = 0.0;
    let mut quad = 0.0;
    for k in 0..n {
        linear += x[k] * (cost.alpha[k] * sigma[k] + cost.beta[k])
            + sigma[k] * (tau_lower[k] - tau_upper[k])
            + top * tau_upper[k];
        let w = tau_lower[k] - tau_upper[k] + cost.alpha[k] * x[k];
        quad += w * w;
    }
    Ok(lambda * params.radius_power() + linear + quad / (4.0 * lambda))
}

/// Minimising box multipliers of [`example1_objective`] and the resulting value.
#[derive(Debug, Clone, PartialEq)]
pub struct Example1Duals {
    pub tau_lower: Vec<f64>,
    pub tau_upper: Vec<f64>,
    pub value: f64,
}

/// Closed-form minimisation of the epigraph objective over `tau_l, tau_u >= 0`.
///
/// Per period, the unconstrained inner maximiser `u = sigma_k + a_k / (2 lambda)`
/// decides which multiplier is active: `tau_u = a_k - 2 lambda (sigma_max - sigma_k)`
/// when `u > sigma_max`, `tau_l = -a_k - 2 lambda sigma_k` when `u < 0`, and
/// both vanish otherwise.
pub fn example1_solve_duals(
    x: &[f64],
    lambda: f64,
    sigma: &[f64],
    params: &RobustnessParams,
    cost: &AffinePriceCost,
) -> Result<Example1Duals> {
    check_dim(cost.dim(), x.len())?;
    check_dim(cost.dim(), sigma.len())?;
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "the epigraph form needs a positive multiplier, got {lambda}"
        )));
    }
    let top = params.support.sigma_max;
    let n = x.len();
    let mut tau_lower = vec![0.0; n];
    let mut tau_upper = vec![0.0; n];
    for k in 0..n {
        let a = cost.alpha[k] * x[k];
        let u = sigma[k] + a / (2.0 * lambda);
        if u > top {
            tau_upper[k] = a - 2.0 * lambda * (top - sigma[k]);
        } else if u < 0.0 {
            tau_lower[k] = -a - 2.0 * lambda * sigma[k];
        }
    }
    let value = example1_objective(x, lambda, sigma, &tau_lower, &tau_upper, params, cost)?;
    Ok(Example1Duals {
        tau_lower,
        tau_upper,
        value,
    })
}
