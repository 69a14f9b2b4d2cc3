//! Equilibrium computation by synchronous proximal best responses.
//!
//! Robust equilibria are computed as Wardrop equilibria of the augmented
//! game whose players choose an action together with a multiplier
//! `lambda in [0, M]`. Each iteration, every class solves
//!
//! ```text
//! argmin_{x, lambda}  J_aug((x, lambda), sigma_t) + |x - x_t|^2 / (2 rho) + ((lambda - lambda_t) / M)^2 / (2 rho)
//! ```
//!
//! against the shared aggregate `sigma_t`; the multiplier is measured in
//! units of its cap so that the proximal term stays meaningful when `M` is
//! huge (small radii). The multiplier block is minimised exactly for each
//! candidate action, and the remaining action problem is solved by
//! projected gradient with a backtracking step.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{aggregate_actions, validate_game, AffinePriceCost, GameInstance, PlayerClass, StrategyProfile};
use crate::robust::{big_m, inner_max_affine, optimal_multiplier, robust_cost, MultiplierProx, RobustnessParams};

/// Starting point of the iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// Budget spread evenly over open periods.
    Uniform,
    /// The projection of the zero action.
    Zero,
    /// One action per class.
    Given(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    pub rho: f64,
    pub max_iter: usize,
    pub tol_fix: f64,
    pub tol_sub: f64,
    /// Iteration cap of each proximal subproblem.
    pub max_inner: usize,
    pub init: Init,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            rho: 1.0,
            max_iter: 500,
            tol_fix: 1e-6,
            tol_sub: 1e-8,
            max_inner: 10_000,
            init: Init::Uniform,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "rho must be positive, got {}",
                self.rho
            )));
        }
        if !(self.tol_fix > 0.0) || !(self.tol_sub > 0.0) {
            return Err(Error::InvalidParameter("tolerances must be positive".into()));
        }
        if self.max_iter == 0 || self.max_inner == 0 {
            return Err(Error::InvalidParameter("iteration caps must be positive".into()));
        }
        Ok(())
    }
}

/// Per-class action and multiplier.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxState {
    pub x: Vec<f64>,
    pub lambda: f64,
}

/// A profile of the augmented game.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedProfile {
    pub actions: Vec<Vec<f64>>,
    pub lambdas: Vec<f64>,
    /// Multiplier cap `M` per class (zero on the nominal path).
    pub caps: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl AugmentedProfile {
    pub fn strategy(&self, game: &GameInstance) -> Result<StrategyProfile> {
        StrategyProfile::new(game, self.actions.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// Last fixed-point residual `|z_{t+1} - z_t|_inf`, multipliers in units of their cap.
    pub residual: f64,
    pub converged: bool,
    /// Per-class best-response gaps, filled in when the run converged.
    pub gaps: Vec<f64>,
    /// Per-class robust costs at the returned profile.
    pub costs: Vec<f64>,
    pub certified: bool,
    /// Proximal subproblems that hit their iteration cap.
    pub inner_failures: usize,
    pub wall_time: Duration,
}

/// Relative tolerance used to certify converged runs.
pub const CERTIFY_REL_TOL: f64 = 1e-4;

/// Wall-clock timer; reads zero on `wasm32-unknown-unknown`, which has no clock.
struct Stopwatch {
    #[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))]
    started: std::time::Instant,
}

impl Stopwatch {
    fn start() -> Self {
        Self {
            #[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))]
            started: std::time::Instant::now(),
        }
    }

    fn elapsed(&self) -> Duration {
        #[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))]
        return self.started.elapsed();
        #[cfg(all(target_arch = "wasm32", target_os = "unknown"))]
        return Duration::ZERO;
    }
}

/// Result of one proximal step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: ProxState,
    pub inner_iterations: usize,
    /// Gradient-mapping norm of the subproblem at exit.
    pub residual: f64,
    pub converged: bool,
}

struct PgSettings {
    step0: f64,
    step_max: f64,
    tol: f64,
    max_iter: usize,
    /// Stop once the value has not dropped by more than `1e-14 (1 + |f|)`
    /// over this many iterations (0 disables). Needed where the minimiser
    /// sits on a kink and the step residual never vanishes.
    stall_window: usize,
}

struct PgOutcome {
    x: Vec<f64>,
    value: f64,
    iterations: usize,
    residual: f64,
    converged: bool,
}

fn norm2(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|a| a * a).sum::<f64>().sqrt()
}

/// Projected gradient with a local-Lipschitz backtracking test
/// `t |g(x+) - g(x)| <= |x+ - x|`, which avoids comparing nearly equal
/// function values close to the optimum.
fn projected_gradient<F, P>(mut eval: F, project: P, x0: Vec<f64>, s: &PgSettings) -> Result<PgOutcome>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
    P: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let mut x = x0;
    let (mut fx, mut gx) = eval(&x);
    let mut t = s.step0.min(s.step_max);
    let mut residual = f64::INFINITY;
    let (mut record, mut record_it) = (fx, 0);
    for it in 0..s.max_iter {
        let (xn, fnew, gnew, d_inf) = loop {
            let y: Vec<f64> = x.iter().zip(&gx).map(|(a, g)| a - t * g).collect();
            let xn = project(&y)?;
            let d_norm = norm2(xn.iter().zip(&x).map(|(a, b)| a - b));
            let d_inf = xn.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if d_norm == 0.0 {
                break (xn, fx, gx.clone(), 0.0);
            }
            let (fnew, gnew) = eval(&xn);
            let g_diff = norm2(gnew.iter().zip(&gx).map(|(a, b)| a - b));
            if fnew.is_finite() && t * g_diff <= d_norm {
                break (xn, fnew, gnew, d_inf);
            }
            t *= 0.5;
            if t < 1e-300 {
                return Ok(PgOutcome {
                    x,
                    value: fx,
                    iterations: it,
                    residual,
                    converged: false,
                });
            }
        };
        residual = d_inf / t;
        x = xn;
        fx = fnew;
        gx = gnew;
        if residual <= s.tol {
            return Ok(PgOutcome {
                x,
                value: fx,
                iterations: it + 1,
                residual,
                converged: true,
            });
        }
        if fx < record - 1e-14 * (1.0 + fx.abs()) {
            (record, record_it) = (fx, it);
        } else if s.stall_window > 0 && it - record_it >= s.stall_window {
            return Ok(PgOutcome {
                x,
                value: fx,
                iterations: it + 1,
                residual,
                converged: false,
            });
        }
        t = (t * 1.5).min(s.step_max);
    }
    Ok(PgOutcome {
        x,
        value: fx,
        iterations: s.max_iter,
        residual,
        converged: false,
    })
}

fn price_gradient(sigma_hat: &[f64], cost: &AffinePriceCost) -> Vec<f64> {
    sigma_hat
        .iter()
        .zip(&cost.alpha)
        .zip(&cost.beta)
        .map(|((s, a), b)| a * s + b)
        .collect()
}

/// Proximal best response of one class against the aggregate `sigma`.
///
/// With `epsilon = 0` the multiplier is dropped and the step is the exact
/// projection `P(x_t - rho p(sigma))`.
pub fn proximal_step(
    class: &PlayerClass,
    state: &ProxState,
    sigma: &[f64],
    params: &RobustnessParams,
    opts: &SolverOptions,
) -> Result<StepOutcome> {
    let cost = &class.cost;
    if params.is_nominal() {
        let prices = cost.price(sigma);
        let y: Vec<f64> = state.x.iter().zip(&prices).map(|(x, p)| x - opts.rho * p).collect();
        return Ok(StepOutcome {
            state: ProxState {
                x: class.space.project(&y)?,
                lambda: 0.0,
            },
            inner_iterations: 1,
            residual: 0.0,
            converged: true,
        });
    }

    let sigma = params.support.clip(sigma);
    let cap = big_m(class, params)?;
    let prox = (cap > 0.0).then(|| MultiplierProx {
        center: state.lambda,
        weight: 1.0 / (opts.rho * cap * cap),
    });
    let eps_p = params.radius_power();
    let rho = opts.rho;
    let x_t = &state.x;

    let multiplier = |x: &[f64]| optimal_multiplier(x, &sigma, params, cost, cap, prox);
    let eval = |x: &[f64]| -> (f64, Vec<f64>) {
        let lambda = multiplier(x);
        let Ok(inner) = inner_max_affine(x, &sigma, lambda, cost, &params.support) else {
            return (f64::INFINITY, vec![0.0; x.len()]);
        };
        let pull = prox.map_or(0.0, |p| 0.5 * p.weight * (lambda - p.center).powi(2));
        let dist: f64 = x.iter().zip(x_t).map(|(a, b)| (a - b) * (a - b)).sum();
        let value = inner.value + lambda * eps_p + pull + dist / (2.0 * rho);
        let grad = price_gradient(&inner.sigma_hat, cost)
            .into_iter()
            .zip(x.iter().zip(x_t))
            .map(|(g, (a, b))| g + (a - b) / rho)
            .collect();
        (value, grad)
    };
    let settings = PgSettings {
        step0: rho,
        step_max: rho,
        tol: opts.tol_sub,
        max_iter: opts.max_inner,
        stall_window: 0,
    };
    let out = projected_gradient(eval, |y| class.space.project(y), x_t.clone(), &settings)?;
    let lambda = multiplier(&out.x);
    Ok(StepOutcome {
        state: ProxState { x: out.x, lambda },
        inner_iterations: out.iterations,
        residual: out.residual,
        converged: out.converged,
    })
}

fn initial_actions(game: &GameInstance, init: &Init) -> Result<Vec<Vec<f64>>> {
    match init {
        Init::Uniform => game.classes.iter().map(|c| c.space.uniform_point()).collect(),
        Init::Zero => game
            .classes
            .iter()
            .map(|c| c.space.project(&vec![0.0; c.dim()]))
            .collect(),
        Init::Given(actions) => {
            if actions.len() != game.classes.len() {
                return Err(Error::DimensionMismatch {
                    expected: game.classes.len(),
                    got: actions.len(),
                });
            }
            actions
                .iter()
                .zip(&game.classes)
                .map(|(x, c)| c.space.project(x))
                .collect()
        }
    }
}

fn ensure_valid(game: &GameInstance, params: &RobustnessParams) -> Result<()> {
    let diagnostics = validate_game(game);
    if !diagnostics.passed() {
        return Err(Error::InvalidParameter(diagnostics.issues.join("; ")));
    }
    if params.support != game.support {
        return Err(Error::InvalidParameter(
            "robustness support differs from the game's aggregate support".into(),
        ));
    }
    Ok(())
}

/// Strategically robust Wardrop equilibrium by synchronous proximal best
/// responses on the augmented game. A run that hits `max_iter` is returned
/// with `converged = false`; converged runs are certified with
/// [`verify_equilibrium`].
pub fn solve_srwe(
    game: &GameInstance,
    params: &RobustnessParams,
    opts: &SolverOptions,
) -> Result<(AugmentedProfile, SolveReport)> {
    if params.is_nominal() {
        let (profile, report) = solve_wardrop(game, opts)?;
        let classes = game.classes.len();
        let sigma = profile.sigma().to_vec();
        return Ok((
            AugmentedProfile {
                actions: profile.into_actions(),
                lambdas: vec![0.0; classes],
                caps: vec![0.0; classes],
                sigma,
            },
            report,
        ));
    }
    opts.validate()?;
    ensure_valid(game, params)?;
    let started = Stopwatch::start();

    let caps = game
        .classes
        .iter()
        .map(|c| big_m(c, params))
        .collect::<Result<Vec<_>>>()?;
    let mut actions = initial_actions(game, &opts.init)?;
    let mut lambdas: Vec<f64> = caps.iter().map(|m| m.min(1.0).min(m / 2.0)).collect();
    let mut sigma = aggregate_actions(&actions, game)?;

    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let mut inner_failures = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        iterations += 1;
        residual = 0.0;
        let mut next_actions = Vec::with_capacity(actions.len());
        let mut next_lambdas = Vec::with_capacity(actions.len());
        for (i, class) in game.classes.iter().enumerate() {
            let state = ProxState {
                x: actions[i].clone(),
                lambda: lambdas[i],
            };
            let step = proximal_step(class, &state, &sigma, params, opts)?;
            if !step.converged {
                inner_failures += 1;
            }
            let dx = step
                .state
                .x
                .iter()
                .zip(&actions[i])
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let dl = if caps[i] > 0.0 {
                (step.state.lambda - lambdas[i]).abs() / caps[i]
            } else {
                0.0
            };
            residual = residual.max(dx).max(dl);
            next_actions.push(step.state.x);
            next_lambdas.push(step.state.lambda);
        }
        actions = next_actions;
        lambdas = next_lambdas;
        sigma = aggregate_actions(&actions, game)?;
        if residual <= opts.tol_fix {
            converged = true;
            break;
        }
    }
    if inner_failures > 0 {
        log::warn!("{inner_failures} proximal subproblems hit their iteration cap");
    }

    let profile = AugmentedProfile {
        actions,
        lambdas,
        caps,
        sigma,
    };
    let mut report = SolveReport {
        iterations,
        residual,
        converged,
        gaps: Vec::new(),
        costs: Vec::new(),
        certified: false,
        inner_failures,
        wall_time: Duration::ZERO,
    };
    if converged {
        let cert = verify_equilibrium(&profile.actions, game, params, CERTIFY_REL_TOL)?;
        report.gaps = cert.gaps;
        report.costs = cert.costs;
        report.certified = cert.certified;
    }
    report.wall_time = started.elapsed();
    Ok((profile, report))
}

/// Wardrop equilibrium (no robustness) by the same proximal scheme on the
/// nominal costs.
pub fn solve_wardrop(game: &GameInstance, opts: &SolverOptions) -> Result<(StrategyProfile, SolveReport)> {
    opts.validate()?;
    let params = RobustnessParams::quadratic(0.0, game.support)?;
    ensure_valid(game, &params)?;
    let started = Stopwatch::start();

    let mut actions = initial_actions(game, &opts.init)?;
    let mut sigma = aggregate_actions(&actions, game)?;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        iterations += 1;
        residual = 0.0;
        let mut next = Vec::with_capacity(actions.len());
        for (x, class) in actions.iter().zip(&game.classes) {
            let state = ProxState {
                x: x.clone(),
                lambda: 0.0,
            };
            let step = proximal_step(class, &state, &sigma, &params, opts)?;
            let dx = step
                .state
                .x
                .iter()
                .zip(x)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            residual = residual.max(dx);
            next.push(step.state.x);
        }
        actions = next;
        sigma = aggregate_actions(&actions, game)?;
        if residual <= opts.tol_fix {
            converged = true;
            break;
        }
    }
    let profile = StrategyProfile::new(game, actions)?;
    let mut report = SolveReport {
        iterations,
        residual,
        converged,
        gaps: Vec::new(),
        costs: Vec::new(),
        certified: false,
        inner_failures: 0,
        wall_time: Duration::ZERO,
    };
    if converged {
        let cert = verify_equilibrium(profile.actions(), game, &params, CERTIFY_REL_TOL)?;
        report.gaps = cert.gaps;
        report.costs = cert.costs;
        report.certified = cert.certified;
    }
    report.wall_time = started.elapsed();
    Ok((profile, report))
}

/// A robust best response to a fixed aggregate.
#[derive(Debug, Clone, PartialEq)]
pub struct BestResponse {
    pub x: Vec<f64>,
    pub value: f64,
}

/// Minimises the worst-case cost of `class` over its action set while the
/// aggregate stays at `sigma`. The multiplier is minimised exactly for each
/// candidate action; the action problem is solved by projected gradient from
/// the given starting points, keeping the best result.
pub fn best_response(
    class: &PlayerClass,
    sigma: &[f64],
    params: &RobustnessParams,
    starts: &[Vec<f64>],
) -> Result<BestResponse> {
    let cost = &class.cost;
    let sigma = params.support.clip(sigma);
    if params.is_nominal() {
        let x = class.space.minimize_linear(&cost.price(&sigma))?;
        let value = cost.evaluate(&x, &sigma);
        return Ok(BestResponse { x, value });
    }
    let cap = big_m(class, params)?;
    let eps_p = params.radius_power();
    let eval = |x: &[f64]| -> (f64, Vec<f64>) {
        let lambda = optimal_multiplier(x, &sigma, params, cost, cap, None);
        match inner_max_affine(x, &sigma, lambda, cost, &params.support) {
            Ok(inner) => (inner.value + lambda * eps_p, price_gradient(&inner.sigma_hat, cost)),
            Err(_) => (f64::INFINITY, vec![0.0; x.len()]),
        }
    };
    let settings = PgSettings {
        step0: 1.0,
        step_max: 1e3,
        tol: 1e-10,
        max_iter: 20_000,
        stall_window: 200,
    };
    let mut best: Option<BestResponse> = None;
    for start in starts {
        let x0 = class.space.project(start)?;
        let out = projected_gradient(eval, |y| class.space.project(y), x0, &settings)?;
        if out.value.is_finite() && best.as_ref().is_none_or(|b| out.value < b.value) {
            best = Some(BestResponse {
                x: out.x,
                value: out.value,
            });
        }
    }
    best.ok_or(Error::NonConvergence {
        what: "best response",
        iterations: settings.max_iter,
        residual: f64::INFINITY,
    })
}

/// Outcome of [`verify_equilibrium`].
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    /// `robust_cost(x) - min_x' robust_cost(x')` per class; `+inf` if the
    /// inner minimisation failed.
    pub gaps: Vec<f64>,
    pub costs: Vec<f64>,
    pub certified: bool,
}

/// Per-class best-response gaps at a profile, with the aggregate held fixed
/// during each deviation. A class passes when its gap is at most
/// `rel_tol (1 + |cost|)`.
pub fn verify_equilibrium(
    actions: &[Vec<f64>],
    game: &GameInstance,
    params: &RobustnessParams,
    rel_tol: f64,
) -> Result<Certificate> {
    let sigma = aggregate_actions(actions, game)?;
    let mut gaps = Vec::with_capacity(actions.len());
    let mut costs = Vec::with_capacity(actions.len());
    let mut certified = true;
    for (x, class) in actions.iter().zip(&game.classes) {
        let current = robust_cost(x, &sigma, params, &class.cost)?.value;
        let starts = [
            class.space.uniform_point()?,
            class.space.project(&vec![0.0; class.dim()])?,
            x.clone(),
        ];
        let gap = match best_response(class, &sigma, params, &starts) {
            Ok(best) => current - best.value,
            Err(_) => f64::INFINITY,
        };
        if !(gap <= rel_tol * (1.0 + current.abs())) {
            certified = false;
        }
        gaps.push(gap);
        costs.push(current);
    }
    Ok(Certificate { gaps, costs, certified })
}

/// `sum_k (alpha_k sigma_k + beta_k)(sigma_k + d_k)`.
pub fn social_cost(sigma: &[f64], prices: &AffinePriceCost) -> f64 {
    sigma
        .iter()
        .enumerate()
        .map(|(k, s)| (prices.alpha[k] * s + prices.beta[k]) * (s + prices.base_demand[k]))
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SocialOptimum {
    pub sigma: Vec<f64>,
    pub value: f64,
    pub actions: Vec<Vec<f64>>,
}

/// Minimises the social cost over all reachable aggregates by projected
/// gradient on the class actions.
pub fn solve_social_optimum(game: &GameInstance) -> Result<SocialOptimum> {
    let prices = game.shared_prices()?.clone();
    if prices.alpha.iter().any(|a| *a < 0.0) {
        return Err(Error::InvalidParameter(
            "the social optimum needs nondecreasing prices".into(),
        ));
    }
    let weights = game.weights();
    let n = game.dim();
    let split = |flat: &[f64]| -> Vec<Vec<f64>> { flat.chunks(n).map(<[f64]>::to_vec).collect() };
    let eval = |flat: &[f64]| -> (f64, Vec<f64>) {
        let mut sigma = vec![0.0; n];
        for (chunk, w) in flat.chunks(n).zip(&weights) {
            for (s, v) in sigma.iter_mut().zip(chunk) {
                *s += w * v;
            }
        }
        let value = social_cost(&sigma, &prices);
        let marginal: Vec<f64> = (0..n)
            .map(|k| 2.0 * prices.alpha[k] * sigma[k] + prices.alpha[k] * prices.base_demand[k] + prices.beta[k])
            .collect();
        let grad = weights
            .iter()
            .flat_map(|w| marginal.iter().map(move |m| w * m))
            .collect();
        (value, grad)
    };
    let project = |flat: &[f64]| -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(flat.len());
        for (chunk, class) in flat.chunks(n).zip(&game.classes) {
            out.extend(class.space.project(chunk)?);
        }
        Ok(out)
    };
    let x0: Vec<f64> = game
        .classes
        .iter()
        .map(|c| c.space.uniform_point())
        .collect::<Result<Vec<_>>>()?
        .concat();
    let settings = PgSettings {
        step0: 1.0,
        step_max: 1e4,
        tol: 1e-10,
        max_iter: 200_000,
        stall_window: 0,
    };
    let out = projected_gradient(eval, project, x0, &settings)?;
    if !out.converged {
        return Err(Error::NonConvergence {
            what: "social optimum",
            iterations: out.iterations,
            residual: out.residual,
        });
    }
    let actions = split(&out.x);
    let sigma = aggregate_actions(&actions, game)?;
    Ok(SocialOptimum {
        value: social_cost(&sigma, &prices),
        sigma,
        actions,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoaOutcome {
    pub poa: f64,
    pub equilibrium_cost: f64,
    pub optimal_cost: f64,
}

/// Social cost at the robust equilibrium divided by the optimal social cost.
pub fn price_of_anarchy(game: &GameInstance, params: &RobustnessParams, opts: &SolverOptions) -> Result<PoaOutcome> {
    let (profile, report) = solve_srwe(game, params, opts)?;
    if !report.converged {
        return Err(Error::NonConvergence {
            what: "equilibrium solver",
            iterations: report.iterations,
            residual: report.residual,
        });
    }
    let optimum = solve_social_optimum(game)?;
    Ok(poa_from(
        social_cost(&profile.sigma, game.shared_prices()?),
        optimum.value,
    ))
}

pub(crate) fn poa_from(equilibrium_cost: f64, optimal_cost: f64) -> PoaOutcome {
    let poa = if optimal_cost > 0.0 {
        equilibrium_cost / optimal_cost
    } else if equilibrium_cost <= 0.0 {
        1.0
    } else {
        f64::INFINITY
    };
    PoaOutcome {
        poa,
        equilibrium_cost,
        optimal_cost,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{ActionSpace, AggregateSpace};

    fn game(alpha: Vec<f64>, beta: Vec<f64>, upper: Vec<f64>, budget: f64, count: usize) -> GameInstance {
        let n = alpha.len();
        let top = 2.0 * upper.iter().copied().fold(0.0, f64::max);
        let class = PlayerClass::new(
            ActionSpace::new(upper, budget).unwrap(),
            AffinePriceCost::new(alpha, beta).unwrap(),
            count,
        )
        .unwrap();
        GameInstance::new(vec![class], AggregateSpace::new(top, n).unwrap()).unwrap()
    }

    #[test]
    fn wardrop_fills_the_cheapest_hour() {
        let g = game(vec![0.0, 0.0], vec![1.0, 2.0], vec![1.0, 1.0], 1.0, 1);
        let (p, report) = solve_wardrop(&g, &SolverOptions::default()).unwrap();
        assert!(report.converged && report.certified);
        assert_eq!(p.actions()[0], vec![1.0, 0.0]);
    }

    #[test]
    fn tiny_step_barely_moves() {
        let g = game(vec![1.0, 0.5], vec![0.2, 0.1], vec![2.0, 2.0], 1.0, 10);
        let params = RobustnessParams::quadratic(0.5, g.support).unwrap();
        let state = ProxState {
            x: vec![0.4, 0.6],
            lambda: 0.7,
        };
        let opts = SolverOptions {
            rho: 1e-9,
            ..SolverOptions::default()
        };
        let out = proximal_step(&g.classes[0], &state, &[0.4, 0.6], &params, &opts).unwrap();
        assert!((out.state.x[0] - 0.4).abs() < 1e-6 && (out.state.x[1] - 0.6).abs() < 1e-6);
        // The multiplier is measured in units of its cap.
        let cap = big_m(&g.classes[0], &params).unwrap();
        assert!((out.state.lambda - 0.7).abs() / cap < 1e-6);
    }

    #[test]
    fn constant_prices_drive_the_multiplier_to_zero() {
        let g = game(vec![0.0, 0.0, 0.0], vec![3.0, 1.0, 2.0], vec![1.0; 3], 1.0, 1);
        let params = RobustnessParams::quadratic(1.0, g.support).unwrap();
        let state = ProxState {
            x: vec![1.0 / 3.0; 3],
            lambda: 1.0,
        };
        let out = proximal_step(
            &g.classes[0],
            &state,
            &[1.0 / 3.0; 3],
            &params,
            &SolverOptions::default(),
        )
        .unwrap();
        assert_eq!(out.state.lambda, 0.0);
        assert!(out.state.x[1] > 1.0 / 3.0 && out.state.x[0] < 1.0 / 3.0);
    }

    #[test]
    fn identical_classes_stay_identical() {
        let class = PlayerClass::new(
            ActionSpace::new(vec![2.0; 4], 3.0).unwrap(),
            AffinePriceCost::new(vec![1.0; 4], vec![0.3, 0.1, 0.0, 0.2]).unwrap(),
            50,
        )
        .unwrap();
        let g = GameInstance::new(vec![class.clone(), class], AggregateSpace::new(4.0, 4).unwrap()).unwrap();
        let params = RobustnessParams::quadratic(1.0, g.support).unwrap();
        let (p, report) = solve_srwe(&g, &params, &SolverOptions::default()).unwrap();
        assert!(report.converged);
        assert_eq!(p.actions[0], p.actions[1]);
        assert_eq!(p.lambdas[0], p.lambdas[1]);
    }

    #[test]
    fn zero_radius_branches_to_wardrop() {
        let g = game(vec![1.0; 3], vec![0.5, 0.0, 0.2], vec![2.0; 3], 2.0, 5);
        let params = RobustnessParams::quadratic(0.0, g.support).unwrap();
        let (aug, _) = solve_srwe(&g, &params, &SolverOptions::default()).unwrap();
        let (w, _) = solve_wardrop(&g, &SolverOptions::default()).unwrap();
        assert_eq!(aug.actions, w.actions());
        assert_eq!(aug.lambdas, vec![0.0]);
    }

    #[test]
    fn perturbed_profile_fails_certification() {
        let g = game(vec![1.0; 4], vec![0.0, 0.5, 1.0, 1.5], vec![2.0; 4], 3.0, 10);
        let params = RobustnessParams::quadratic(0.5, g.support).unwrap();
        let (p, report) = solve_srwe(&g, &params, &SolverOptions::default()).unwrap();
        assert!(report.certified, "{report:?}");
        let mut x = p.actions[0].clone();
        let peak = (0..4).max_by(|a, b| x[*a].total_cmp(&x[*b])).unwrap();
        let donor = (0..4).min_by(|a, b| x[*a].total_cmp(&x[*b])).unwrap();
        let moved = 0.1 * 3.0;
        let from = (0..4).find(|k| *k != peak && x[*k] >= moved).unwrap_or(donor);
        x[from] -= moved;
        x[peak] += moved;
        let cert = verify_equilibrium(&[x], &g, &params, CERTIFY_REL_TOL).unwrap();
        assert!(!cert.certified);
        assert!(cert.gaps[0] > 0.0);
    }

    #[test]
    fn greedy_point_has_zero_gap() {
        let g = game(vec![0.0; 3], vec![2.0, 1.0, 3.0], vec![1.0; 3], 1.5, 1);
        let params = RobustnessParams::quadratic(0.8, g.support).unwrap();
        let cert = verify_equilibrium(&[vec![0.5, 1.0, 0.0]], &g, &params, CERTIFY_REL_TOL).unwrap();
        assert!(cert.gaps[0].abs() < 1e-9, "{:?}", cert.gaps);
    }

    #[test]
    fn social_cost_examples() {
        let zero = AffinePriceCost::new(vec![0.0; 2], vec![0.15; 2]).unwrap();
        assert_eq!(social_cost(&[0.0, 0.0], &zero), 0.0);
        assert!((social_cost(&[1.0, 2.0], &zero) - 0.45).abs() < 1e-15);
        let lin = AffinePriceCost::new(vec![0.15; 2], vec![0.0; 2]).unwrap();
        assert!((social_cost(&[1.0, 2.0], &lin) - 0.15 * 5.0).abs() < 1e-15);
    }

    #[test]
    fn social_optimum_is_uniform_on_a_linear_window() {
        let g = game(vec![0.15; 4], vec![0.0; 4], vec![2.0; 4], 3.0, 100);
        let opt = solve_social_optimum(&g).unwrap();
        for s in &opt.sigma {
            assert!((s - 0.75).abs() < 1e-8);
        }
        let (w, _) = solve_wardrop(&g, &SolverOptions::default()).unwrap();
        assert!(opt.value <= social_cost(w.sigma(), &g.classes[0].cost) + 1e-12);
    }

    #[test]
    fn social_optimum_with_constant_prices_uses_cheapest_hours() {
        let g = game(vec![0.0; 3], vec![0.3, 0.1, 0.1], vec![1.0; 3], 1.5, 1);
        let opt = solve_social_optimum(&g).unwrap();
        assert!(opt.sigma[0].abs() < 1e-9);
        assert!((opt.value - 0.15).abs() < 1e-9);
    }
}
