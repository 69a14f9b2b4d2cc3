//! Browser bindings for the EV-charging demo page. The exported functions
//! return flat `Float64Array`s; the page slices them.

use srwe::equilibrium::SolverOptions;
use srwe::game::{AffinePriceCost, AggregateSpace};
use srwe::oracle::grid_two_point_worst_case;
use srwe::robust::{robust_cost, RobustnessParams, WassersteinOrder};
use srwe::scenarios::{build_ev_charging, run_poa, solve_sweep, EvChargingConfig, PoaConfig};
use wasm_bindgen::prelude::*;

/// EV aggregate then base demand, 24 values each, for the default game.
pub fn charging_profile_values(epsilon: f64) -> Result<Vec<f64>, String> {
    let game = build_ev_charging(&EvChargingConfig::default()).map_err(|e| e.to_string())?;
    let run = solve_sweep(&game, &[epsilon], WassersteinOrder::Two, &SolverOptions::default())
        .map_err(|e| e.to_string())?
        .remove(0);
    if !run.report.converged {
        return Err(format!("no convergence at epsilon {epsilon}"));
    }
    let mut out = run.sigma;
    out.extend_from_slice(&game.classes[0].cost.base_demand);
    Ok(out)
}

/// Interleaved `(epsilon, price of anarchy)` pairs on `0, step, ..., eps_max`.
pub fn poa_curve_values(eps_max: f64, step: f64) -> Result<Vec<f64>, String> {
    if !(step > 0.0 && eps_max >= 0.0) || eps_max / step > 200.0 {
        return Err("need step > 0, eps_max >= 0 and at most 200 points".into());
    }
    let count = (eps_max / step + 1e-9).floor() as usize;
    let cfg = PoaConfig {
        epsilons: (0..=count).map(|i| i as f64 * step).collect(),
        ..PoaConfig::default()
    };
    let points = run_poa(&cfg, &SolverOptions::default()).map_err(|e| e.to_string())?;
    Ok(points.iter().flat_map(|p| [p.epsilon, p.outcome.poa]).collect())
}

/// One-period worst case: dual value, optimal multiplier, worst-case
/// aggregate and the 201-point grid value.
pub fn worst_case_1d_values(
    x: f64,
    alpha: f64,
    beta: f64,
    sigma: f64,
    sigma_max: f64,
    epsilon: f64,
) -> Result<Vec<f64>, String> {
    let cost = AffinePriceCost::new(vec![alpha], vec![beta]).map_err(|e| e.to_string())?;
    let support = AggregateSpace::new(sigma_max, 1).map_err(|e| e.to_string())?;
    let params = RobustnessParams::quadratic(epsilon, support).map_err(|e| e.to_string())?;
    let dual = robust_cost(&[x], &[sigma], &params, &cost).map_err(|e| e.to_string())?;
    let grid = grid_two_point_worst_case(&[x], &[sigma], &params, &cost, 201).map_err(|e| e.to_string())?;
    Ok(vec![dual.value, dual.lambda_star, dual.sigma_hat_star[0], grid.value])
}

#[wasm_bindgen]
pub fn charging_profile(epsilon: f64) -> Result<Vec<f64>, JsValue> {
    charging_profile_values(epsilon).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn poa_curve(eps_max: f64, step: f64) -> Result<Vec<f64>, JsValue> {
    poa_curve_values(eps_max, step).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn worst_case_1d(
    x: f64,
    alpha: f64,
    beta: f64,
    sigma: f64,
    sigma_max: f64,
    epsilon: f64,
) -> Result<Vec<f64>, JsValue> {
    worst_case_1d_values(x, alpha, beta, sigma, sigma_max, epsilon).map_err(|e| JsValue::from_str(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_has_both_curves() {
        let v = charging_profile_values(2.0).unwrap();
        assert_eq!(v.len(), 48);
        assert!((v[..24].iter().sum::<f64>() - 9.0).abs() < 1e-8);
        assert!(v[24..].iter().all(|d| (5.8..=9.5).contains(d)));
    }

    #[test]
    fn worst_case_matches_hand_value() {
        let v = worst_case_1d_values(1.0, 1.0, 0.0, 0.5, 1.0, 0.3).unwrap();
        assert!((v[0] - 0.8).abs() < 1e-9);
        assert!((v[2] - 0.8).abs() < 1e-6);
        assert!((v[3] - 0.8).abs() < 1e-2);
        assert!(worst_case_1d_values(1.0, 1.0, 0.0, 0.5, -1.0, 0.3).is_err());
    }

    #[test]
    fn poa_curve_pairs() {
        let v = poa_curve_values(0.5, 0.5).unwrap();
        assert_eq!(v.len(), 4);
        assert_eq!(v[0], 0.0);
        assert!(v[1] > v[3] && v[3] >= 1.0 - 1e-6);
        assert!(poa_curve_values(1.0, 0.0).is_err());
    }
}
