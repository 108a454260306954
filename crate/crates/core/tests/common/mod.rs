#![allow(dead_code)]

use mefcons::disturbance::DisturbanceProfile;
use mefcons::filter::{params_for_topology, FilterParams};
use mefcons::graph::{make_graph, random_strongly_connected, GraphFamily, NetworkTopology};
use mefcons::simulate::{RiccatiMode, Scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One seeded random network with uniform R, S = G and per-node B.
pub struct SweepCase {
    pub seed: u64,
    pub topology: NetworkTopology<f64>,
    pub params: Vec<FilterParams<f64>>,
    pub x0: Vec<f64>,
    pub e0: Vec<f64>,
}

pub fn sweep_case(seed: u64) -> SweepCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=8);
    let topology = random_strongly_connected(n, 0.5, (1.0, 2.0), &mut rng).unwrap();
    let r = rng.random_range(0.25..0.75);
    let s = rng.random_range(0.5..1.0);
    let b: Vec<f64> = (0..n).map(|_| rng.random_range(1.5..3.0)).collect();
    let params = params_for_topology(&topology, &b, &vec![r; n], &vec![s; n], &vec![s; n], None).unwrap();
    let x0 = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let e0 = (0..n).map(|_| rng.random_range(-0.5..0.5)).collect();
    SweepCase {
        seed,
        topology,
        params,
        x0,
        e0,
    }
}

pub fn scenario(
    topology: NetworkTopology<f64>,
    params: Vec<FilterParams<f64>>,
    x0: Vec<f64>,
    e0: &[f64],
    disturbance: DisturbanceProfile,
    step: f64,
    horizon: f64,
) -> Scenario<f64> {
    let prior = x0.iter().zip(e0).map(|(x, e)| x + e).collect();
    Scenario {
        topology,
        params,
        x0,
        prior,
        disturbance,
        step,
        horizon,
        riccati: RiccatiMode::Steady,
        record_measurements: false,
    }
}

/// Complete graph with all of `R`, `S`, `G`, `B`, `a_ij` equal to 1.
pub fn unit_complete(n: usize) -> (NetworkTopology<f64>, Vec<FilterParams<f64>>) {
    let topology = make_graph(&GraphFamily::Complete, n, 1.0).unwrap();
    let ones = vec![1.0; n];
    let params = params_for_topology(&topology, &ones, &ones, &ones, &ones, None).unwrap();
    (topology, params)
}
