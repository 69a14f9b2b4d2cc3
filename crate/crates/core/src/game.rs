//! Aggregative games with box-plus-budget action sets and affine prices.
//!
//! Players are grouped into classes that share an action set and a cost.
//! A class of `count` members contributes `count / N` of its action to the
//! mean aggregate, so a homogeneous population of any size costs the same as
//! a single player to simulate.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Slack allowed on the budget constraint when testing membership.
pub const BUDGET_SLACK: f64 = 1e-12;

/// Bisection tolerance on the budget shift used by [`ActionSpace::project`].
const SHIFT_TOL: f64 = 1e-12;

/// The polytope `{x : 0 <= x_k <= upper_k, sum_k x_k >= budget}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSpace {
    upper: Vec<f64>,
    budget: f64,
}

impl ActionSpace {
    /// Builds the set. Caps and budget must be finite and nonnegative; a
    /// budget larger than the total cap is accepted here and reported by
    /// [`validate_game`].
    pub fn new(upper: Vec<f64>, budget: f64) -> Result<Self> {
        if upper.is_empty() {
            return Err(Error::InvalidParameter("action space has dimension 0".into()));
        }
        if let Some(bad) = upper.iter().find(|u| !u.is_finite() || **u < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "per-period caps must be finite and nonnegative, got {bad}"
            )));
        }
        if !budget.is_finite() || budget < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "budget must be finite and nonnegative, got {budget}"
            )));
        }
        Ok(Self { upper, budget })
    }

    pub fn dim(&self) -> usize {
        self.upper.len()
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn cap_total(&self) -> f64 {
        self.upper.iter().sum()
    }

    pub fn max_cap(&self) -> f64 {
        self.upper.iter().copied().fold(0.0, f64::max)
    }

    pub fn is_nonempty(&self) -> bool {
        self.cap_total() >= self.budget
    }

    fn ensure_nonempty(&self) -> Result<()> {
        if self.is_nonempty() {
            Ok(())
        } else {
            Err(Error::InfeasibleSpace {
                cap_total: self.cap_total(),
                budget: self.budget,
            })
        }
    }

    /// Membership test with absolute tolerance `tol` on every constraint.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim()
            && x.iter().zip(&self.upper).all(|(v, u)| *v >= -tol && *v <= u + tol)
            && x.iter().sum::<f64>() >= self.budget - tol
    }

    /// Euclidean projection onto the polytope.
    ///
    /// If clipping to the box already meets the budget the clip is the
    /// projection. Otherwise the budget is active and the projection is
    /// `clip(y + nu, 0, upper)` for the unique shift `nu > 0` that makes the
    /// sum equal to the budget; `nu` is bracketed by bisection and then
    /// solved exactly on the identified active set.
    pub fn project(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), y.len())?;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("cannot project a non-finite point".into()));
        }
        self.ensure_nonempty()?;

        let clipped = self.shifted_clip(y, 0.0);
        let slack = BUDGET_SLACK * (1.0 + self.budget);
        if clipped.iter().sum::<f64>() >= self.budget - slack {
            return Ok(clipped);
        }

        let sum_at = |nu: f64| -> f64 { y.iter().zip(&self.upper).map(|(v, u)| (v + nu).clamp(0.0, *u)).sum() };
        let mut lo = 0.0;
        let mut hi = y.iter().zip(&self.upper).map(|(v, u)| u - v).fold(0.0, f64::max);
        while hi - lo > SHIFT_TOL * (1.0 + hi.abs()) {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if sum_at(mid) >= self.budget {
                hi = mid;
            } else {
                lo = mid;
            }
        }

        // Exact shift on the active set identified by the bracket.
        let mid = 0.5 * (lo + hi);
        let mut fixed = 0.0;
        let mut free_sum = 0.0;
        let mut free = 0usize;
        for (v, u) in y.iter().zip(&self.upper) {
            let s = v + mid;
            if s >= *u {
                fixed += u;
            } else if s > 0.0 {
                free_sum += v;
                free += 1;
            }
        }
        let mut nu = hi;
        if free > 0 {
            let exact = (self.budget - fixed - free_sum) / free as f64;
            let width = (hi - lo).max(SHIFT_TOL);
            if exact >= lo - width && exact <= hi + width {
                nu = exact;
            }
        }
        let mut x = self.shifted_clip(y, nu);
        if x.iter().sum::<f64>() < self.budget - slack {
            x = self.shifted_clip(y, hi);
        }
        Ok(x)
    }

    fn shifted_clip(&self, y: &[f64], nu: f64) -> Vec<f64> {
        y.iter()
            .zip(&self.upper)
            .map(|(v, u)| (v + nu).clamp(0.0, *u))
            .collect()
    }

    /// Exact minimizer of the linear function `c . x` over the polytope.
    ///
    /// Periods with negative coefficient are filled to their cap; the rest
    /// of the budget goes to the cheapest periods, lowest index first on ties.
    pub fn minimize_linear(&self, c: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), c.len())?;
        self.ensure_nonempty()?;
        let mut x = vec![0.0; self.dim()];
        for (k, ck) in c.iter().enumerate() {
            if *ck < 0.0 {
                x[k] = self.upper[k];
            }
        }
        let mut remaining = self.budget - x.iter().sum::<f64>();
        if remaining > 0.0 {
            let mut order: Vec<usize> = (0..self.dim()).filter(|k| c[*k] >= 0.0).collect();
            order.sort_by(|a, b| c[*a].total_cmp(&c[*b]).then(a.cmp(b)));
            for k in order {
                if remaining <= 0.0 {
                    break;
                }
                let take = self.upper[k].min(remaining);
                x[k] = take;
                remaining -= take;
            }
        }
        Ok(x)
    }

    /// The budget spread evenly over periods with a positive cap, projected
    /// onto the set (the projection only acts when a cap is too small).
    pub fn uniform_point(&self) -> Result<Vec<f64>> {
        let open = self.upper.iter().filter(|u| **u > 0.0).count();
        let share = if open == 0 { 0.0 } else { self.budget / open as f64 };
        let y: Vec<f64> = self.upper.iter().map(|u| if *u > 0.0 { share } else { 0.0 }).collect();
        self.project(&y)
    }
}

/// Per-period affine prices `p_k(s) = alpha_k s + beta_k`.
///
/// `base_demand` does not enter the players' cost directly (it is already
/// folded into `beta` when the prices come from [`AffinePriceCost::from_capacity`]);
/// it is kept for the social cost and for reporting total demand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinePriceCost {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub base_demand: Vec<f64>,
    pub capacity: Option<Vec<f64>>,
}

impl AffinePriceCost {
    /// Prices with explicit slopes and intercepts and zero base demand.
    pub fn new(alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        check_dim(alpha.len(), beta.len())?;
        if alpha.iter().chain(&beta).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("price coefficients must be finite".into()));
        }
        let n = alpha.len();
        Ok(Self {
            alpha,
            beta,
            base_demand: vec![0.0; n],
            capacity: None,
        })
    }

    /// Prices `(s + d_k) / kappa_k` from capacities and base demand.
    ///
    /// A nonpositive capacity is stored as given (producing non-finite
    /// coefficients) so that [`validate_game`] can report it.
    pub fn from_capacity(capacity: Vec<f64>, base_demand: Vec<f64>) -> Result<Self> {
        check_dim(capacity.len(), base_demand.len())?;
        let alpha = capacity.iter().map(|c| 1.0 / c).collect();
        let beta = capacity.iter().zip(&base_demand).map(|(c, d)| d / c).collect();
        Ok(Self {
            alpha,
            beta,
            base_demand,
            capacity: Some(capacity),
        })
    }

    pub fn with_base_demand(mut self, base_demand: Vec<f64>) -> Result<Self> {
        check_dim(self.dim(), base_demand.len())?;
        self.base_demand = base_demand;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    pub fn price(&self, sigma: &[f64]) -> Vec<f64> {
        self.alpha
            .iter()
            .zip(&self.beta)
            .zip(sigma)
            .map(|((a, b), s)| a * s + b)
            .collect()
    }

    /// `sum_k x_k (alpha_k sigma_k + beta_k)`.
    pub fn evaluate(&self, x: &[f64], sigma: &[f64]) -> f64 {
        x.iter().zip(self.price(sigma)).map(|(xk, pk)| xk * pk).sum()
    }
}

/// Players sharing one action set and one cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerClass {
    pub space: ActionSpace,
    pub cost: AffinePriceCost,
    pub count: usize,
}

impl PlayerClass {
    pub fn new(space: ActionSpace, cost: AffinePriceCost, count: usize) -> Result<Self> {
        check_dim(space.dim(), cost.dim())?;
        if count == 0 {
            return Err(Error::InvalidParameter(
                "a player class needs at least one member".into(),
            ));
        }
        Ok(Self { space, cost, count })
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }
}

/// The box `[0, sigma_max]^n` the players believe the aggregate lives in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateSpace {
    pub sigma_max: f64,
    pub dim: usize,
}

impl AggregateSpace {
    pub fn new(sigma_max: f64, dim: usize) -> Result<Self> {
        if !sigma_max.is_finite() || sigma_max <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "sigma_max must be finite and positive, got {sigma_max}"
            )));
        }
        Ok(Self { sigma_max, dim })
    }

    pub fn contains(&self, sigma: &[f64]) -> bool {
        sigma.len() == self.dim && sigma.iter().all(|s| *s >= 0.0 && *s <= self.sigma_max)
    }

    pub fn clip(&self, sigma: &[f64]) -> Vec<f64> {
        sigma.iter().map(|s| s.clamp(0.0, self.sigma_max)).collect()
    }

    /// Euclidean diameter `sigma_max * sqrt(n)`.
    pub fn diameter(&self) -> f64 {
        self.sigma_max * (self.dim as f64).sqrt()
    }
}

/// A game: player classes plus the aggregate support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameInstance {
    pub classes: Vec<PlayerClass>,
    pub support: AggregateSpace,
}

impl GameInstance {
    pub fn new(classes: Vec<PlayerClass>, support: AggregateSpace) -> Result<Self> {
        let first = classes
            .first()
            .ok_or_else(|| Error::InvalidParameter("a game needs at least one class".into()))?;
        let n = first.dim();
        for class in &classes {
            check_dim(n, class.dim())?;
        }
        check_dim(n, support.dim)?;
        Ok(Self { classes, support })
    }

    pub fn dim(&self) -> usize {
        self.support.dim
    }

    pub fn total_players(&self) -> usize {
        self.classes.iter().map(|c| c.count).sum()
    }

    /// Aggregate weight `count / N` of each class.
    pub fn weights(&self) -> Vec<f64> {
        let n = self.total_players() as f64;
        self.classes.iter().map(|c| c.count as f64 / n).collect()
    }

    /// The price function shared by all classes, required by the social
    /// cost. Fails if classes disagree on prices or base demand.
    pub fn shared_prices(&self) -> Result<&AffinePriceCost> {
        let first = &self.classes[0].cost;
        for class in &self.classes[1..] {
            let c = &class.cost;
            if c.alpha != first.alpha || c.beta != first.beta || c.base_demand != first.base_demand {
                return Err(Error::InvalidParameter(
                    "social cost needs all classes to face the same prices".into(),
                ));
            }
        }
        Ok(first)
    }
}

/// One action per class (all members of a class play the same action) and
/// the aggregate they induce.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyProfile {
    actions: Vec<Vec<f64>>,
    sigma: Vec<f64>,
}

impl StrategyProfile {
    pub fn new(game: &GameInstance, actions: Vec<Vec<f64>>) -> Result<Self> {
        let sigma = aggregate_actions(&actions, game)?;
        Ok(Self { actions, sigma })
    }

    pub fn actions(&self) -> &[Vec<f64>] {
        &self.actions
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn into_actions(self) -> Vec<Vec<f64>> {
        self.actions
    }

    /// True if every class action lies in its action set up to `tol`.
    pub fn is_feasible(&self, game: &GameInstance, tol: f64) -> bool {
        self.actions
            .iter()
            .zip(&game.classes)
            .all(|(x, c)| c.space.contains(x, tol))
    }
}

/// Mean aggregate `sigma_k = (1/N) sum_i x_k^i`, expanded by class counts.
pub fn aggregate(profile: &StrategyProfile, game: &GameInstance) -> Result<Vec<f64>> {
    aggregate_actions(profile.actions(), game)
}

pub(crate) fn aggregate_actions(actions: &[Vec<f64>], game: &GameInstance) -> Result<Vec<f64>> {
    check_dim(game.classes.len(), actions.len())?;
    let n = game.dim();
    let total = game.total_players() as f64;
    let mut sigma = vec![0.0; n];
    for (x, class) in actions.iter().zip(&game.classes) {
        check_dim(n, x.len())?;
        let w = class.count as f64;
        for (s, v) in sigma.iter_mut().zip(x) {
            *s += w * v;
        }
    }
    for s in &mut sigma {
        *s /= total;
    }
    Ok(sigma)
}

/// `sum_k x_k (alpha_k sigma_k + beta_k)`.
pub fn nominal_cost(x: &[f64], sigma: &[f64], cost: &AffinePriceCost) -> Result<f64> {
    check_dim(cost.dim(), x.len())?;
    check_dim(cost.dim(), sigma.len())?;
    Ok(cost.evaluate(x, sigma))
}

/// Outcome of [`validate_game`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub issues: Vec<String>,
}

impl Diagnostics {
    pub fn passed(&self) -> bool {
        self.issues.is_empty()
    }
}

/// Checks that action sets are nonempty, capacities positive, prices
/// finite, and that the aggregate support contains every reachable
/// aggregate.
pub fn validate_game(game: &GameInstance) -> Diagnostics {
    let mut issues = Vec::new();
    for (i, class) in game.classes.iter().enumerate() {
        if !class.space.is_nonempty() {
            issues.push(format!(
                "class {i}: action set is empty (budget {} exceeds total cap {})",
                class.space.budget(),
                class.space.cap_total()
            ));
        }
        if let Some(kappa) = &class.cost.capacity {
            if let Some(k) = kappa.iter().position(|c| !(*c > 0.0)) {
                issues.push(format!("class {i}: capacity at period {k} is not positive"));
            }
        }
        if class.cost.alpha.iter().chain(&class.cost.beta).any(|v| !v.is_finite()) {
            issues.push(format!("class {i}: price coefficients are not finite"));
        }
        if class.space.max_cap() > game.support.sigma_max {
            issues.push(format!(
                "class {i}: cap {} exceeds sigma_max {}, so the aggregate can leave its support",
                class.space.max_cap(),
                game.support.sigma_max
            ));
        }
    }
    Diagnostics { issues }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_class_game(upper: Vec<f64>, budget: f64, count: usize, sigma_max: f64) -> GameInstance {
        let n = upper.len();
        let space = ActionSpace::new(upper, budget).unwrap();
        let cost = AffinePriceCost::new(vec![1.0; n], vec![0.0; n]).unwrap();
        let class = PlayerClass::new(space, cost, count).unwrap();
        GameInstance::new(vec![class], AggregateSpace::new(sigma_max, n).unwrap()).unwrap()
    }

    #[test]
    fn aggregate_is_the_player_mean() {
        let space = ActionSpace::new(vec![1.0, 1.0], 0.0).unwrap();
        let cost = AffinePriceCost::new(vec![1.0; 2], vec![0.0; 2]).unwrap();
        let a = PlayerClass::new(space.clone(), cost.clone(), 1).unwrap();
        let b = PlayerClass::new(space, cost, 1).unwrap();
        let game = GameInstance::new(vec![a, b], AggregateSpace::new(1.0, 2).unwrap()).unwrap();
        let p = StrategyProfile::new(&game, vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(aggregate(&p, &game).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn homogeneous_profile_equals_its_mean() {
        let game = one_class_game(vec![2.0; 24], 2.0, 100, 4.0);
        let mut x = vec![0.0; 24];
        x[0] = 2.0;
        let p = StrategyProfile::new(&game, vec![x.clone()]).unwrap();
        assert_eq!(p.sigma(), x.as_slice());
        assert!(p.sigma().iter().all(|s| *s <= 2.0));
    }

    #[test]
    fn aggregate_rejects_dimension_mismatch() {
        let game = one_class_game(vec![1.0; 3], 0.0, 1, 1.0);
        assert!(matches!(
            StrategyProfile::new(&game, vec![vec![0.0; 2]]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn nominal_cost_examples() {
        let cost = AffinePriceCost::new(vec![1.0], vec![0.0]).unwrap();
        assert_eq!(nominal_cost(&[0.0], &[0.7], &cost).unwrap(), 0.0);
        assert_eq!(nominal_cost(&[1.0], &[0.5], &cost).unwrap(), 0.5);
        let flat = AffinePriceCost::new(vec![0.0, 0.0], vec![1.0, 3.0]).unwrap();
        let c1 = nominal_cost(&[1.0, 2.0], &[0.1, 0.2], &flat).unwrap();
        let c2 = nominal_cost(&[1.0, 2.0], &[5.0, 9.0], &flat).unwrap();
        assert_eq!(c1, 7.0);
        assert_eq!(c1, c2);
    }

    #[test]
    fn capacity_pricing() {
        let cost = AffinePriceCost::from_capacity(vec![2.0, 1.0], vec![4.0, 0.0]).unwrap();
        assert_eq!(cost.alpha, vec![0.5, 1.0]);
        assert_eq!(cost.beta, vec![2.0, 0.0]);
    }

    #[test]
    fn projection_examples() {
        let s = ActionSpace::new(vec![1.0, 1.0], 1.0).unwrap();
        assert_eq!(s.project(&[0.3, 0.9]).unwrap(), vec![0.3, 0.9]);
        let p = s.project(&[0.0, 0.0]).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12);
        assert_eq!(s.project(&[2.0, 2.0]).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn projection_of_infeasible_space_fails() {
        let s = ActionSpace::new(vec![1.0, 1.0], 3.0).unwrap();
        assert!(matches!(s.project(&[0.0, 0.0]), Err(Error::InfeasibleSpace { .. })));
    }

    #[test]
    fn projection_respects_zero_caps() {
        let s = ActionSpace::new(vec![0.0, 2.0, 2.0, 0.0], 3.0).unwrap();
        let p = s.project(&[5.0, -1.0, -1.0, 5.0]).unwrap();
        assert_eq!(p[0], 0.0);
        assert_eq!(p[3], 0.0);
        assert!((p[1] - 1.5).abs() < 1e-12 && (p[2] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn linear_minimizer_prefers_cheap_then_low_index() {
        let s = ActionSpace::new(vec![1.0, 1.0, 1.0], 1.5).unwrap();
        assert_eq!(s.minimize_linear(&[2.0, 1.0, 1.0]).unwrap(), vec![0.0, 1.0, 0.5]);
        assert_eq!(s.minimize_linear(&[-1.0, 1.0, 1.0]).unwrap(), vec![1.0, 0.5, 0.0]);
    }

    #[test]
    fn uniform_point_spreads_over_open_periods() {
        let s = ActionSpace::new(vec![0.0, 2.0, 2.0, 2.0], 3.0).unwrap();
        assert_eq!(s.uniform_point().unwrap(), vec![0.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn validation_reports_each_assumption() {
        assert!(validate_game(&one_class_game(vec![2.0; 4], 3.0, 10, 4.0)).passed());

        let empty = one_class_game(vec![1.0, 1.0], 3.0, 1, 4.0);
        let d = validate_game(&empty);
        assert!(!d.passed());
        assert!(d.issues[0].contains("empty"));

        let small_support = one_class_game(vec![2.0, 2.0], 1.0, 1, 1.5);
        let d = validate_game(&small_support);
        assert!(d.issues.iter().any(|m| m.contains("sigma_max")));

        let space = ActionSpace::new(vec![1.0, 1.0], 1.0).unwrap();
        let cost = AffinePriceCost::from_capacity(vec![1.0, 0.0], vec![0.0, 0.0]).unwrap();
        let class = PlayerClass::new(space, cost, 1).unwrap();
        let game = GameInstance::new(vec![class], AggregateSpace::new(2.0, 2).unwrap()).unwrap();
        assert!(validate_game(&game).issues.iter().any(|m| m.contains("capacity")));
    }
}
