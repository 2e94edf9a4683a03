//! Reference configurations for the synthetic experiments.

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::abm::AbmConfig;
use crate::filter::{GammaSpec, Priors};
use crate::hawkes::HawkesParams;
use crate::rng::{self, Domain};

/// Excitation pattern of the six-node covert-network scenario, before
/// scaling. Node 4 has a low baseline but strong outgoing influence.
pub const COVERT_ALPHA: [[f64; 6]; 6] = [
    [1.0, 0.5, 0.5, 0.0, 0.0, 0.0],
    [1.0, 1.0, 0.5, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.2, 0.0, 0.0, 0.0],
    [0.0, 1.0, 2.5, 0.5, 2.5, 0.0],
    [0.0, 0.0, 0.0, 0.4, 1.5, 0.5],
    [0.0, 0.0, 0.0, 0.4, 0.5, 1.5],
];

/// Six-node truth: `mu = 2 s1` except node 4 at `0.75 s1`, `beta = 5`,
/// `alpha = s2 * COVERT_ALPHA`.
pub fn perfect_model(s1: f64, s2: f64) -> HawkesParams {
    let mu = (0..6).map(|j| if j == 3 { 0.75 * s1 } else { 2.0 * s1 }).collect();
    let alpha = COVERT_ALPHA
        .iter()
        .map(|row| row.iter().map(|a| a * s2).collect())
        .collect();
    HawkesParams {
        mu,
        beta: vec![5.0; 6],
        alpha,
    }
}

/// Initial-ensemble priors: baseline and decay `gamma(mean 4 s1, var 8)`,
/// excitation `gamma(mean s2, var 1/4)`.
pub fn perfect_model_priors(s1: f64, s2: f64) -> Priors {
    Priors {
        baseline: GammaSpec::new(4.0 * s1, 8.0).expect("positive"),
        decay: GammaSpec::new(4.0 * s1, 8.0).expect("positive"),
        excitation: GammaSpec::new(s2, 0.25).expect("positive"),
    }
}

/// Excitation structure of the agent-based scenario (row = receiving location).
pub const ABM_W: [[f64; 6]; 6] = [
    [3.0, 3.0, 0.0, 0.0, 0.0, 0.0],
    [3.0, 3.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 3.0, 3.0, 0.0, 0.0],
    [0.0, 6.0, 6.0, 1.5, 6.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 3.0, 3.0],
    [0.0, 0.0, 0.0, 0.0, 3.0, 3.0],
];

pub fn abm_reference() -> AbmConfig {
    AbmConfig {
        mu: vec![2.0, 2.0, 2.0, 0.5, 2.0, 2.0],
        omega: 5.0,
        eta: 0.25,
        gamma: 3.0,
        w: ABM_W.iter().map(|r| r.to_vec()).collect(),
        dt: 0.1,
        event_law: Default::default(),
        spawn_law: Default::default(),
    }
}

/// Knobs for a random sparse network with a common decay rate and
/// gamma-distributed baselines.
#[derive(Debug, Clone)]
pub struct SparseNetworkSpec {
    pub m: usize,
    pub beta: f64,
    pub baseline: GammaSpec,
    /// Expected number of incoming off-diagonal edges per node.
    pub mean_in_degree: f64,
    pub edge_weight: (f64, f64),
    pub self_weight: (f64, f64),
}

impl SparseNetworkSpec {
    /// Decay 7 and baselines `gamma(mean 20/3, var 200/9)`.
    pub fn large_reference(m: usize) -> Self {
        SparseNetworkSpec {
            m,
            beta: 7.0,
            baseline: GammaSpec::new(20.0 / 3.0, 200.0 / 9.0).expect("positive"),
            mean_in_degree: 2.0,
            edge_weight: (1.0, 2.5),
            self_weight: (0.5, 1.5),
        }
    }
}

pub fn sparse_network(spec: &SparseNetworkSpec, seed: u64) -> HawkesParams {
    let m = spec.m;
    let mut rng = rng::stream(seed, Domain::Synthetic, 0, 0);
    let base = Gamma::new(spec.baseline.shape(), spec.baseline.scale()).expect("valid gamma");
    let mu = (0..m).map(|_| base.sample(&mut rng)).collect();
    let p = (spec.mean_in_degree / (m.max(2) - 1) as f64).min(1.0);
    let alpha = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| {
                    if i == j {
                        rng.random_range(spec.self_weight.0..=spec.self_weight.1)
                    } else if rng.random::<f64>() < p {
                        rng.random_range(spec.edge_weight.0..=spec.edge_weight.1)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    HawkesParams {
        mu,
        beta: vec![spec.beta; m],
        alpha,
    }
}
