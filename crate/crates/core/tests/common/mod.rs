#![allow(dead_code)]

use agc_dispatch::model::{CostCoefficients, Generator, Scenario};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// G1 a=0.5 b=1, G2 a=1 b=2, D=6+4, K=1, β=1.5, τ=1, started at its optimum (7, 3).
pub fn reference() -> Scenario {
    Scenario {
        generators: vec![
            Generator::new("G1", CostCoefficients::new(0.5, 1.0, 0.0), 7.0),
            Generator::new("G2", CostCoefficients::new(1.0, 2.0, 0.0), 3.0),
        ],
        loads: vec![6.0, 4.0],
        gain_k: 1.0,
        beta: 1.5,
        tau: 1.0,
    }
}

/// Deterministic randomized suite: N ∈ {1,2,3}, a ∈ [0.1,5], b ∈ [0,20],
/// D ∈ [1,50] split over one or two loads, K, τ ∈ [0.5,2], and β chosen so
/// that K/β = f/S with f ∈ [0.2,1.8] (inside the dual-ascent stability range).
///
/// Initial powers share one random marginal cost, so every scenario starts
/// economically (though generally not balanced).
pub fn random_scenarios(count: usize, seed: u64) -> Vec<Scenario> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let n = 1 + i % 3;
            let costs: Vec<CostCoefficients> = (0..n)
                .map(|_| {
                    CostCoefficients::new(
                        rng.random_range(0.1..5.0),
                        rng.random_range(0.0..20.0),
                        rng.random_range(0.0..100.0),
                    )
                })
                .collect();
            let demand: f64 = rng.random_range(1.0..50.0);
            let loads = if rng.random_bool(0.5) {
                let share: f64 = rng.random_range(0.2..0.8);
                vec![share * demand, (1.0 - share) * demand]
            } else {
                vec![demand]
            };
            let sensitivity: f64 = costs.iter().map(|c| 1.0 / (2.0 * c.a)).sum();
            let gain_k: f64 = rng.random_range(0.5..2.0);
            let tau: f64 = rng.random_range(0.5..2.0);
            let alpha = rng.random_range(0.2..1.8) / sensitivity;
            let price: f64 = rng.random_range(0.0..60.0);
            Scenario {
                generators: costs
                    .iter()
                    .enumerate()
                    .map(|(j, c)| Generator::new(format!("G{}", j + 1), *c, c.output_at_price(price)))
                    .collect(),
                loads,
                gain_k,
                beta: gain_k / alpha,
                tau,
            }
        })
        .collect()
}
