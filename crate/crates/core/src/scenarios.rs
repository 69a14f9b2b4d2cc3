//! EV-charging games and the experiments run on them.
//!
//! Hours are indexed from noon: hour 0 is 12:00-13:00, hour 5 starts at
//! 17:00, hour 12 at midnight and hour 22 at 10:00.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{
    poa_from, social_cost, solve_social_optimum, solve_srwe, PoaOutcome, SolveReport, SolverOptions,
};
use crate::error::{Error, Result};
use crate::game::{ActionSpace, AffinePriceCost, AggregateSpace, GameInstance, PlayerClass};
use crate::robust::{RobustnessParams, WassersteinOrder};

const DEFAULT_DEMAND_CSV: &str = include_str!("../data/default_demand.csv");

/// A half-open range of hours `[start, end)`, wrapping past the horizon
/// when `start > end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HourWindow {
    pub start: usize,
    pub end: usize,
}

impl HourWindow {
    pub fn contains(&self, hour: usize) -> bool {
        if self.start <= self.end {
            hour >= self.start && hour < self.end
        } else {
            hour >= self.start || hour < self.end
        }
    }

    fn check(&self, hours: usize) -> Result<()> {
        if self.start > hours || self.end > hours {
            return Err(Error::Config(format!(
                "window [{}, {}) exceeds the {hours}-hour horizon",
                self.start, self.end
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvChargingConfig {
    pub hours: usize,
    pub players: usize,
    /// Per-hour charging cap inside the availability window (kW).
    pub cap_kw: f64,
    pub window: HourWindow,
    /// Energy each vehicle needs (kWh).
    pub budget_kwh: f64,
    /// Normalised production capacity (kW), the same every hour.
    pub capacity_kw: f64,
    /// Base demand override; the shipped profile is used when absent.
    pub demand_kw: Option<Vec<f64>>,
    /// Upper edge of the aggregate support; `2 * cap_kw` when absent.
    pub sigma_max: Option<f64>,
}

impl Default for EvChargingConfig {
    fn default() -> Self {
        Self {
            hours: 24,
            players: 100,
            cap_kw: 2.0,
            window: HourWindow { start: 5, end: 22 },
            budget_kwh: 9.0,
            capacity_kw: 1.0,
            demand_kw: None,
            sigma_max: None,
        }
    }
}

impl EvChargingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hours == 0 || self.players == 0 {
            return Err(Error::Config("hours and players must be positive".into()));
        }
        self.window.check(self.hours)?;
        let open = (0..self.hours).filter(|h| self.window.contains(*h)).count();
        if !(self.cap_kw > 0.0) || open == 0 {
            return Err(Error::Config(
                "the charging window must contain an hour with a positive cap".into(),
            ));
        }
        if !(self.budget_kwh >= 0.0) || self.budget_kwh > self.cap_kw * open as f64 {
            return Err(Error::Config(format!(
                "budget {} kWh is not reachable with {open} hours at {} kW",
                self.budget_kwh, self.cap_kw
            )));
        }
        if !(self.capacity_kw > 0.0) {
            return Err(Error::Config("capacity_kw must be positive".into()));
        }
        if let Some(d) = &self.demand_kw {
            if d.len() != self.hours {
                return Err(Error::Config(format!(
                    "demand_kw has {} values for a {}-hour horizon",
                    d.len(),
                    self.hours
                )));
            }
        }
        Ok(())
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma_max.unwrap_or(2.0 * self.cap_kw)
    }

    /// The configured base demand, or the shipped profile.
    pub fn demand(&self) -> Result<Vec<f64>> {
        match &self.demand_kw {
            Some(d) => Ok(d.clone()),
            None => {
                let d = default_demand_profile();
                if d.len() != self.hours {
                    return Err(Error::Config(format!(
                        "the shipped demand profile covers 24 hours, not {}",
                        self.hours
                    )));
                }
                Ok(d)
            }
        }
    }
}

/// Parses a `hour,demand_kw` table.
pub fn parse_demand_profile<R: std::io::Read>(reader: R) -> Result<Vec<f64>> {
    #[derive(Deserialize)]
    struct Row {
        hour: usize,
        demand_kw: f64,
    }
    let mut rows: Vec<Row> = csv::Reader::from_reader(reader)
        .deserialize()
        .collect::<std::result::Result<_, _>>()?;
    rows.sort_by_key(|r| r.hour);
    for (i, r) in rows.iter().enumerate() {
        if r.hour != i {
            return Err(Error::Config(format!("demand profile is missing hour {i}")));
        }
    }
    Ok(rows.into_iter().map(|r| r.demand_kw).collect())
}

pub fn load_demand_profile(path: &Path) -> Result<Vec<f64>> {
    parse_demand_profile(std::fs::File::open(path)?)
}

/// The shipped 24-hour non-EV demand profile (kW), hour 0 at noon.
pub fn default_demand_profile() -> Vec<f64> {
    parse_demand_profile(DEFAULT_DEMAND_CSV.as_bytes()).expect("shipped demand profile is well formed")
}

/// One homogeneous class with prices `(sigma_k + d_k) / kappa`.
pub fn build_ev_charging(cfg: &EvChargingConfig) -> Result<GameInstance> {
    cfg.validate()?;
    let n = cfg.hours;
    let upper = (0..n)
        .map(|h| if cfg.window.contains(h) { cfg.cap_kw } else { 0.0 })
        .collect();
    let space = ActionSpace::new(upper, cfg.budget_kwh)?;
    let cost = AffinePriceCost::from_capacity(vec![cfg.capacity_kw; n], cfg.demand()?)?;
    let class = PlayerClass::new(space, cost, cfg.players)?;
    GameInstance::new(vec![class], AggregateSpace::new(cfg.sigma_max(), n)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerturbationConfig {
    /// Bump sizes added to the aggregate (kW).
    pub magnitudes: Vec<f64>,
    /// Consecutive hours each bump lasts.
    pub duration: usize,
    pub trials: usize,
    /// Bump size whose cost distribution is histogrammed.
    pub histogram_magnitude: f64,
    pub bin_width: f64,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        Self {
            magnitudes: vec![1.0, 2.0, 4.0],
            duration: 2,
            trials: 200,
            histogram_magnitude: 2.0,
            bin_width: 1.0,
        }
    }
}

impl PerturbationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.duration == 0 || self.trials == 0 {
            return Err(Error::Config("duration and trials must be at least 1".into()));
        }
        if !(self.bin_width > 0.0) {
            return Err(Error::Config("bin_width must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PoaConfig {
    pub epsilons: Vec<f64>,
    pub hours: usize,
    pub players: usize,
    pub cap_kw: f64,
    pub budget_kwh: f64,
    /// Hours priced at `constant_price`.
    pub constant_window: HourWindow,
    pub constant_price: f64,
    /// Hours priced at `linear_slope * sigma`.
    pub linear_window: HourWindow,
    pub linear_slope: f64,
    pub sigma_max: Option<f64>,
}

impl Default for PoaConfig {
    fn default() -> Self {
        Self {
            epsilons: (0..=20).map(|i| i as f64 / 10.0).collect(),
            hours: 24,
            players: 100,
            cap_kw: 2.0,
            budget_kwh: 9.0,
            // 17:00 to 02:00; the 01:00-02:00 hour is priced as constant.
            constant_window: HourWindow { start: 5, end: 14 },
            constant_price: 0.15,
            // 02:00 to 10:00.
            linear_window: HourWindow { start: 14, end: 22 },
            linear_slope: 0.15,
            sigma_max: None,
        }
    }
}

impl PoaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epsilons.iter().any(|e| !(*e >= 0.0)) {
            return Err(Error::Config("epsilon grid must be nonnegative".into()));
        }
        if self.epsilons.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Config("epsilon grid must be sorted".into()));
        }
        self.constant_window.check(self.hours)?;
        self.linear_window.check(self.hours)?;
        if (0..self.hours).any(|h| self.constant_window.contains(h) && self.linear_window.contains(h)) {
            return Err(Error::Config("pricing windows overlap".into()));
        }
        Ok(())
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma_max.unwrap_or(2.0 * self.cap_kw)
    }
}

/// The game with no base demand, constant prices on one window and linear
/// prices on another; vehicles can charge on either window only.
pub fn build_poa_game(cfg: &PoaConfig) -> Result<GameInstance> {
    cfg.validate()?;
    let n = cfg.hours;
    let mut alpha = vec![0.0; n];
    let mut beta = vec![0.0; n];
    let mut upper = vec![0.0; n];
    for h in 0..n {
        if cfg.constant_window.contains(h) {
            beta[h] = cfg.constant_price;
            upper[h] = cfg.cap_kw;
        } else if cfg.linear_window.contains(h) {
            alpha[h] = cfg.linear_slope;
            upper[h] = cfg.cap_kw;
        }
    }
    let space = ActionSpace::new(upper, cfg.budget_kwh)?;
    let class = PlayerClass::new(space, AffinePriceCost::new(alpha, beta)?, cfg.players)?;
    GameInstance::new(vec![class], AggregateSpace::new(cfg.sigma_max(), n)?)
}

/// Equilibrium of one robustness level.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumRun {
    pub epsilon: f64,
    pub actions: Vec<Vec<f64>>,
    pub lambdas: Vec<f64>,
    pub sigma: Vec<f64>,
    pub report: SolveReport,
}

/// Solves the game for every radius (in parallel, results in input order).
pub fn solve_sweep(
    game: &GameInstance,
    epsilons: &[f64],
    order: WassersteinOrder,
    opts: &SolverOptions,
) -> Result<Vec<EquilibriumRun>> {
    epsilons
        .par_iter()
        .map(|&epsilon| {
            let params = RobustnessParams::new(epsilon, order, game.support)?;
            let (profile, report) = solve_srwe(game, &params, opts)?;
            Ok(EquilibriumRun {
                epsilon,
                actions: profile.actions,
                lambdas: profile.lambdas,
                sigma: profile.sigma,
                report,
            })
        })
        .collect()
}

/// Per-hour EV aggregate and total demand for each converged radius.
#[derive(Debug, Clone, PartialEq)]
pub struct ValleyFilling {
    pub base_demand: Vec<f64>,
    /// Converged runs only, in input order.
    pub runs: Vec<EquilibriumRun>,
    /// Radii whose run did not converge.
    pub failed: Vec<f64>,
}

impl ValleyFilling {
    pub fn total_demand(&self, run: &EquilibriumRun) -> Vec<f64> {
        run.sigma.iter().zip(&self.base_demand).map(|(s, d)| s + d).collect()
    }
}

pub fn run_valley_filling(
    game: &GameInstance,
    epsilons: &[f64],
    order: WassersteinOrder,
    opts: &SolverOptions,
) -> Result<ValleyFilling> {
    let base_demand = game.shared_prices()?.base_demand.clone();
    let mut runs = Vec::new();
    let mut failed = Vec::new();
    for run in solve_sweep(game, epsilons, order, opts)? {
        if run.report.converged {
            runs.push(run);
        } else {
            log::warn!("epsilon = {}: solver did not converge; row omitted", run.epsilon);
            failed.push(run.epsilon);
        }
    }
    Ok(ValleyFilling {
        base_demand,
        runs,
        failed,
    })
}

/// Min, mean and max realised individual cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostStats {
    pub min: f64,
    pub avg: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationRow {
    pub epsilon: f64,
    /// One entry per configured magnitude.
    pub stats: Vec<CostStats>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub bin_centers: Vec<f64>,
    /// `counts[i][b]`: players of run `i` whose cost fell in bin `b`.
    pub counts: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationStudy {
    pub magnitudes: Vec<f64>,
    pub rows: Vec<PerturbationRow>,
    pub histogram: Histogram,
    /// Start hour of each trial's bump.
    pub starts: Vec<usize>,
}

/// Bump of size `magnitude` on `duration` consecutive hours from `start`,
/// wrapping around the horizon.
pub fn bump(n: usize, start: usize, duration: usize, magnitude: f64) -> Vec<f64> {
    let mut b = vec![0.0; n];
    for j in 0..duration.min(n) {
        b[(start + j) % n] += magnitude;
    }
    b
}

/// Realised costs of fixed equilibrium strategies when the aggregate is
/// bumped after the fact. The same seeded start hours are used for every
/// radius and magnitude.
pub fn run_perturbation(
    game: &GameInstance,
    runs: &[EquilibriumRun],
    pcfg: &PerturbationConfig,
    seed: u64,
) -> Result<PerturbationStudy> {
    pcfg.validate()?;
    let n = game.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts: Vec<usize> = (0..pcfg.trials).map(|_| rng.gen_range(0..n)).collect();

    // (cost, multiplicity) samples for one run and magnitude.
    let samples = |run: &EquilibriumRun, magnitude: f64| -> Vec<(f64, u64)> {
        let mut out = Vec::with_capacity(starts.len() * game.classes.len());
        for &start in &starts {
            let shifted: Vec<f64> = run
                .sigma
                .iter()
                .zip(bump(n, start, pcfg.duration, magnitude))
                .map(|(s, b)| s + b)
                .collect();
            for (x, class) in run.actions.iter().zip(&game.classes) {
                out.push((class.cost.evaluate(x, &shifted), class.count as u64));
            }
        }
        out
    };

    let mut rows = Vec::with_capacity(runs.len());
    for run in runs {
        let stats = pcfg
            .magnitudes
            .iter()
            .map(|&m| {
                let s = samples(run, m);
                let total: u64 = s.iter().map(|(_, c)| c).sum();
                CostStats {
                    min: s.iter().map(|(v, _)| *v).fold(f64::INFINITY, f64::min),
                    max: s.iter().map(|(v, _)| *v).fold(f64::NEG_INFINITY, f64::max),
                    avg: s.iter().map(|(v, c)| v * *c as f64).sum::<f64>() / total as f64,
                }
            })
            .collect();
        rows.push(PerturbationRow {
            epsilon: run.epsilon,
            stats,
        });
    }

    let per_run: Vec<Vec<(f64, u64)>> = runs.iter().map(|r| samples(r, pcfg.histogram_magnitude)).collect();
    let histogram = histogram(&per_run, pcfg.bin_width);
    Ok(PerturbationStudy {
        magnitudes: pcfg.magnitudes.clone(),
        rows,
        histogram,
        starts,
    })
}

fn histogram(per_run: &[Vec<(f64, u64)>], width: f64) -> Histogram {
    let all = per_run.iter().flatten().map(|(v, _)| *v);
    let lo = all.clone().fold(f64::INFINITY, f64::min);
    let hi = all.fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() {
        return Histogram {
            bin_centers: Vec::new(),
            counts: vec![Vec::new(); per_run.len()],
        };
    }
    let first = (lo / width).floor() * width;
    let bins = (((hi - first) / width).floor() as usize + 1).max(1);
    let bin_centers = (0..bins).map(|b| first + (b as f64 + 0.5) * width).collect();
    let counts = per_run
        .iter()
        .map(|samples| {
            let mut c = vec![0u64; bins];
            for (v, m) in samples {
                let b = (((v - first) / width).floor() as usize).min(bins - 1);
                c[b] += m;
            }
            c
        })
        .collect();
    Histogram { bin_centers, counts }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoaPoint {
    pub epsilon: f64,
    pub outcome: PoaOutcome,
}

/// Price of anarchy across the configured radii. The social optimum is
/// solved once; any non-converged equilibrium aborts the sweep.
pub fn run_poa(pcfg: &PoaConfig, opts: &SolverOptions) -> Result<Vec<PoaPoint>> {
    let game = build_poa_game(pcfg)?;
    let optimum = solve_social_optimum(&game)?;
    let prices = game.shared_prices()?.clone();
    let runs = solve_sweep(&game, &pcfg.epsilons, WassersteinOrder::Two, opts)?;
    runs.into_iter()
        .map(|run| {
            if !run.report.converged {
                return Err(Error::NonConvergence {
                    what: "equilibrium solver",
                    iterations: run.report.iterations,
                    residual: run.report.residual,
                });
            }
            Ok(PoaPoint {
                epsilon: run.epsilon,
                outcome: poa_from(social_cost(&run.sigma, &prices), optimum.value),
            })
        })
        .collect()
}
