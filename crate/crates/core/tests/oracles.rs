use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use srwe::equilibrium::{best_response, proximal_step, ProxState, SolverOptions};
use srwe::game::{ActionSpace, AffinePriceCost, AggregateSpace, PlayerClass};
use srwe::oracle::{brute_force_best_response, grid_two_point_worst_case, wasserstein_to_dirac, DiscreteDistribution};
use srwe::robust::{big_m, robust_cost, RobustnessParams, WassersteinOrder};

struct Case {
    cost: AffinePriceCost,
    x: Vec<f64>,
    sigma: Vec<f64>,
    params: RobustnessParams,
}

fn random_case(rng: &mut ChaCha8Rng, n: usize) -> Case {
    let top = rng.gen_range(0.5..3.0);
    let cost = AffinePriceCost::new(
        (0..n).map(|_| rng.gen_range(-0.5..2.0)).collect(),
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    )
    .unwrap();
    Case {
        cost,
        x: (0..n).map(|_| rng.gen_range(0.0..2.0)).collect(),
        sigma: (0..n).map(|_| rng.gen_range(0.0..top)).collect(),
        params: RobustnessParams::quadratic(rng.gen_range(0.02..1.5 * top), AggregateSpace::new(top, n).unwrap())
            .unwrap(),
    }
}

fn grid(top: f64, n: usize, m: usize) -> Vec<Vec<f64>> {
    let axis: Vec<f64> = (0..m).map(|i| top * i as f64 / (m - 1) as f64).collect();
    match n {
        1 => axis.iter().map(|a| vec![*a]).collect(),
        _ => axis
            .iter()
            .flat_map(|a| axis.iter().map(move |b| vec![*a, *b]))
            .collect(),
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}

/// Literal enumeration of every ordered atom pair with the weight that makes
/// the transport budget tight.
fn pair_enumeration(c: &Case, m: usize) -> f64 {
    let atoms = grid(c.params.support.sigma_max, c.x.len(), m);
    let budget = c.params.epsilon * c.params.epsilon;
    let vals: Vec<(f64, f64)> = atoms
        .iter()
        .map(|a| (sq_dist(a, &c.sigma), c.cost.evaluate(&c.x, a)))
        .collect();
    let mut best = f64::NEG_INFINITY;
    for &(da, ja) in &vals {
        if da > budget {
            continue;
        }
        best = best.max(ja);
        for &(db, jb) in &vals {
            if db > budget {
                let w = (db - budget) / (db - da);
                best = best.max(w * ja + (1.0 - w) * jb);
            }
        }
    }
    best
}

#[test]
fn hull_matches_pair_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for i in 0..60 {
        let n = 1 + i % 2;
        let m = if n == 1 { 101 } else { 13 };
        let c = random_case(&mut rng, n);
        let hull = grid_two_point_worst_case(&c.x, &c.sigma, &c.params, &c.cost, m).unwrap();
        if hull.coarse {
            continue;
        }
        let pairs = pair_enumeration(&c, m);
        assert!(
            (hull.value - pairs).abs() <= 1e-9 * (1.0 + pairs.abs()),
            "case {i}: hull {} vs pairs {pairs}",
            hull.value
        );
        let w = wasserstein_to_dirac(&hull.distribution, &c.sigma, WassersteinOrder::Two);
        assert!(w <= c.params.epsilon + 1e-12);
    }
}

#[test]
fn grid_value_sandwiches_below_the_dual() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..150 {
        let n = rng.gen_range(1..=2);
        let c = random_case(&mut rng, n);
        let dual = robust_cost(&c.x, &c.sigma, &c.params, &c.cost).unwrap().value;
        let g = grid_two_point_worst_case(&c.x, &c.sigma, &c.params, &c.cost, 201).unwrap();
        let lipschitz: f64 = c.x.iter().zip(&c.cost.alpha).map(|(x, a)| (x * a).abs()).sum();
        let spacing = c.params.support.sigma_max / 200.0;
        assert!(g.value <= dual + 1e-9, "grid {} above dual {dual}", g.value);
        assert!(
            dual <= g.value + lipschitz * spacing + 1e-9,
            "dual {dual} far above grid {}",
            g.value
        );
    }
}

#[test]
fn refining_nested_grids_never_lowers_the_value() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    for _ in 0..60 {
        let n = rng.gen_range(1..=2);
        let c = random_case(&mut rng, n);
        let values: Vec<f64> = [11, 21, 41]
            .iter()
            .map(|m| grid_two_point_worst_case(&c.x, &c.sigma, &c.params, &c.cost, *m).unwrap())
            .filter(|g| !g.coarse)
            .map(|g| g.value)
            .collect();
        for w in values.windows(2) {
            assert!(w[1] >= w[0] - 1e-12, "refinement lowered the value: {values:?}");
        }
    }
}

#[test]
fn third_atom_never_helps() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..30 {
        let n = rng.gen_range(1..=2);
        let c = random_case(&mut rng, n);
        let m = 21;
        let best = grid_two_point_worst_case(&c.x, &c.sigma, &c.params, &c.cost, m).unwrap();
        if best.coarse {
            continue;
        }
        let atoms = grid(c.params.support.sigma_max, n, m);
        let budget = c.params.epsilon * c.params.epsilon;
        for _ in 0..2000 {
            let picks: Vec<Vec<f64>> = (0..3).map(|_| atoms[rng.gen_range(0..atoms.len())].clone()).collect();
            let raw: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
            let transport: f64 = picks.iter().zip(&weights).map(|(a, w)| w * sq_dist(a, &c.sigma)).sum();
            if transport > budget {
                continue;
            }
            let value: f64 = picks
                .iter()
                .zip(&weights)
                .map(|(a, w)| w * c.cost.evaluate(&c.x, a))
                .sum();
            assert!(value <= best.value + 1e-9, "three atoms reach {value} > {}", best.value);
        }
    }
}

#[test]
fn discrete_distribution_helpers() {
    let mu = DiscreteDistribution::new(vec![vec![0.0], vec![1.0]], vec![0.5, 0.5]).unwrap();
    assert!((wasserstein_to_dirac(&mu, &[0.0], WassersteinOrder::Two) - 0.5f64.sqrt()).abs() < 1e-15);
    assert_eq!(wasserstein_to_dirac(&mu, &[0.0], WassersteinOrder::One), 0.5);
    let scaled = DiscreteDistribution::new(vec![vec![0.0], vec![3.0]], vec![0.5, 0.5]).unwrap();
    assert!((wasserstein_to_dirac(&scaled, &[0.0], WassersteinOrder::Two) - 3.0 * 0.5f64.sqrt()).abs() < 1e-14);
    let dirac = DiscreteDistribution::dirac(vec![0.4, 0.2]);
    assert_eq!(wasserstein_to_dirac(&dirac, &[0.4, 0.2], WassersteinOrder::Two), 0.0);
}

fn small_class(rng: &mut ChaCha8Rng) -> PlayerClass {
    let upper = vec![rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0)];
    let budget = rng.gen_range(0.0..upper[0] + upper[1]);
    let cost = AffinePriceCost::new(
        vec![rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0)],
        vec![rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)],
    )
    .unwrap();
    PlayerClass::new(ActionSpace::new(upper, budget).unwrap(), cost, 10).unwrap()
}

#[test]
fn best_response_matches_grid_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    for _ in 0..25 {
        let class = small_class(&mut rng);
        let sigma = vec![rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0)];
        let eps = if rng.gen_bool(0.2) {
            0.0
        } else {
            rng.gen_range(0.05..2.0)
        };
        let params = RobustnessParams::quadratic(eps, AggregateSpace::new(2.0, 2).unwrap()).unwrap();
        let starts = [
            class.space.uniform_point().unwrap(),
            class.space.project(&[0.0, 0.0]).unwrap(),
        ];
        let fast = best_response(&class, &sigma, &params, &starts).unwrap();
        let (_, grid_value) = brute_force_best_response(&class, &sigma, &params, 201).unwrap();
        assert!(
            fast.value <= grid_value + 1e-8,
            "fast {} above grid {grid_value}",
            fast.value
        );
        // The grid point nearest the optimum is at most one spacing away.
        let slope: f64 = class.cost.alpha.iter().map(|a| a * 4.0 + 2.0).sum();
        assert!(grid_value - fast.value <= slope * 2.0 / 200.0 + 1e-8);
    }
}

#[test]
fn best_response_is_a_fixed_point_of_the_proximal_step() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..20 {
        let class = small_class(&mut rng);
        let sigma = vec![rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0)];
        let params =
            RobustnessParams::quadratic(rng.gen_range(0.1..2.0), AggregateSpace::new(2.0, 2).unwrap()).unwrap();
        let starts = [
            class.space.uniform_point().unwrap(),
            class.space.project(&[0.0, 0.0]).unwrap(),
        ];
        let br = best_response(&class, &sigma, &params, &starts).unwrap();
        let lambda = robust_cost(&br.x, &sigma, &params, &class.cost).unwrap().lambda_star;
        let cap = big_m(&class, &params).unwrap();
        let step = proximal_step(
            &class,
            &ProxState {
                x: br.x.clone(),
                lambda,
            },
            &sigma,
            &params,
            &SolverOptions::default(),
        )
        .unwrap();
        let after = robust_cost(&step.state.x, &sigma, &params, &class.cost).unwrap().value;
        assert!(
            after >= br.value - 1e-7,
            "step improved on the best response: {after} < {}",
            br.value
        );
        assert!(step.state.lambda <= cap);
        let moved = step
            .state
            .x
            .iter()
            .zip(&br.x)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(moved < 1e-3, "best response moved by {moved}");
    }
}
