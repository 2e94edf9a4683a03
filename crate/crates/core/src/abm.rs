//! Agent-based event generator on a set of locations.
//!
//! Each location has an attractiveness `A_s = mu_s + B_s`. Agents at a
//! location either generate an event (and leave the simulation) or walk to a
//! neighbouring location chosen in proportion to attractiveness. Events feed
//! back into `B` through the excitation matrix `W`, and `B` diffuses between
//! neighbours while decaying at rate `omega`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hawkes::{draw_poisson, CountSeries};
use crate::rng::{self, Domain, StreamRng};

/// Per-agent event probability over one step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventLaw {
    /// `1 - exp(-A dt)`.
    #[default]
    Exponential,
    /// `(1 - exp(-A)) dt`.
    Printed,
}

/// Number of agents entering each location per step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpawnLaw {
    /// `Poisson(gamma dt)`.
    #[default]
    Poisson,
    /// Accumulates `gamma dt` and releases one agent per whole unit.
    Deterministic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbmConfig {
    /// Baseline attractiveness per location.
    pub mu: Vec<f64>,
    pub omega: f64,
    pub eta: f64,
    /// Agent spawn rate per location per unit time.
    pub gamma: f64,
    /// `w[s][s2]`: excitation of location `s` by an event at `s2`.
    pub w: Vec<Vec<f64>>,
    pub dt: f64,
    #[serde(default)]
    pub event_law: EventLaw,
    #[serde(default)]
    pub spawn_law: SpawnLaw,
}

impl AbmConfig {
    pub fn m(&self) -> usize {
        self.mu.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.m();
        if m == 0 {
            return Err(Error::invalid("ABM needs at least one location"));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::invalid(format!("dt = {} must be > 0", self.dt)));
        }
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return Err(Error::invalid(format!("omega = {} must be > 0", self.omega)));
        }
        if self.omega * self.dt >= 1.0 {
            return Err(Error::invalid(format!(
                "omega*dt = {} must be < 1 for a non-negative, non-oscillating field",
                self.omega * self.dt
            )));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::invalid(format!("eta = {} must lie in [0, 1]", self.eta)));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::invalid(format!("gamma = {} must be > 0", self.gamma)));
        }
        if self.event_law == EventLaw::Printed && self.dt > 1.0 {
            return Err(Error::invalid("printed event law needs dt <= 1 to be a probability"));
        }
        if let Some(mu) = self.mu.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::invalid(format!("baseline attractiveness {mu} must be >= 0")));
        }
        if self.w.len() != m {
            return Err(Error::Dimension {
                what: "W rows",
                expected: m,
                got: self.w.len(),
            });
        }
        for row in &self.w {
            if row.len() != m {
                return Err(Error::Dimension {
                    what: "W row length",
                    expected: m,
                    got: row.len(),
                });
            }
            if let Some(v) = row.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                return Err(Error::invalid(format!("W entry {v} must be >= 0")));
            }
        }
        Ok(())
    }

    /// `D(s)`: locations `s2 != s` with `w[s][s2] > 0`.
    pub fn neighborhoods(&self) -> Vec<Vec<usize>> {
        self.w
            .iter()
            .enumerate()
            .map(|(s, row)| {
                row.iter()
                    .enumerate()
                    .filter(|&(s2, &v)| s2 != s && v > 0.0)
                    .map(|(s2, _)| s2)
                    .collect()
            })
            .collect()
    }

    pub fn event_probability(&self, attractiveness: f64) -> f64 {
        let a = attractiveness.max(0.0);
        match self.event_law {
            EventLaw::Exponential => 1.0 - (-a * self.dt).exp(),
            EventLaw::Printed => (1.0 - (-a).exp()) * self.dt,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbmState {
    /// Dynamic attractiveness component.
    pub b: Vec<f64>,
    /// Agents present at each location.
    pub agents: Vec<u64>,
    pub t: f64,
    spawn_credit: Vec<f64>,
}

impl AbmState {
    pub fn new(m: usize) -> Self {
        AbmState {
            b: vec![0.0; m],
            agents: vec![0; m],
            t: 0.0,
            spawn_credit: vec![0.0; m],
        }
    }

    pub fn attractiveness(&self, cfg: &AbmConfig) -> Vec<f64> {
        cfg.mu.iter().zip(&self.b).map(|(m, b)| m + b).collect()
    }
}

/// Next dynamic attractiveness given the events of the current step.
pub fn attractiveness_update(state: &AbmState, events: &[u64], cfg: &AbmConfig) -> Result<Vec<f64>> {
    let m = cfg.m();
    if events.len() != m || state.b.len() != m {
        return Err(Error::Dimension {
            what: "event vector length",
            expected: m,
            got: events.len(),
        });
    }
    let keep = 1.0 - cfg.omega * cfg.dt;
    let hoods = cfg.neighborhoods();
    Ok((0..m)
        .map(|s| {
            let hood = &hoods[s];
            let diffused = if hood.is_empty() {
                state.b[s]
            } else {
                let z = hood.len() as f64;
                (1.0 - cfg.eta) * state.b[s] + cfg.eta / z * hood.iter().map(|&j| state.b[j]).sum::<f64>()
            };
            let excitation: f64 = cfg.w[s]
                .iter()
                .zip(events)
                .filter(|(w, _)| **w > 0.0)
                .map(|(w, &e)| w * e as f64)
                .sum();
            diffused * keep + excitation
        })
        .collect())
}

/// Probability of moving to each location of `hood`, proportional to
/// attractiveness. Falls back to uniform when every neighbour has zero
/// attractiveness.
pub fn movement_probabilities(attractiveness: &[f64], hood: &[usize]) -> Vec<f64> {
    let total: f64 = hood.iter().map(|&j| attractiveness[j].max(0.0)).sum();
    if total > 0.0 {
        hood.iter().map(|&j| attractiveness[j].max(0.0) / total).collect()
    } else {
        vec![1.0 / hood.len() as f64; hood.len()]
    }
}

fn pick<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    probs.len() - 1
}

/// Outcome of one agent step.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentStep {
    pub events: Vec<u64>,
    pub spawns: Vec<u64>,
    pub state: AbmState,
}

/// Events, movement and spawning for one step. Location `s` draws every
/// decision for the agents it hosts, and its spawns, from `rngs[s]`.
/// `B` is left unchanged; see [`attractiveness_update`].
pub fn step_agents(state: &AbmState, cfg: &AbmConfig, rngs: &mut [StreamRng]) -> Result<AgentStep> {
    let hoods = cfg.neighborhoods();
    step_agents_with(state, cfg, &hoods, rngs)
}

fn step_agents_with(
    state: &AbmState,
    cfg: &AbmConfig,
    hoods: &[Vec<usize>],
    rngs: &mut [StreamRng],
) -> Result<AgentStep> {
    let m = cfg.m();
    if rngs.len() != m || state.agents.len() != m {
        return Err(Error::Dimension {
            what: "per-location streams",
            expected: m,
            got: rngs.len(),
        });
    }
    let attr = state.attractiveness(cfg);
    let mut events = vec![0u64; m];
    let mut agents = vec![0u64; m];
    let mut spawns = vec![0u64; m];
    let mut credit = state.spawn_credit.clone();
    for s in 0..m {
        let rng = &mut rngs[s];
        let p = cfg.event_probability(attr[s]);
        let hood = &hoods[s];
        let probs = if hood.is_empty() {
            Vec::new()
        } else {
            movement_probabilities(&attr, hood)
        };
        for _ in 0..state.agents[s] {
            if rng.random::<f64>() < p {
                events[s] += 1;
            } else if hood.is_empty() {
                agents[s] += 1;
            } else {
                agents[hood[pick(&probs, rng)]] += 1;
            }
        }
        spawns[s] = match cfg.spawn_law {
            SpawnLaw::Poisson => draw_poisson(cfg.gamma * cfg.dt, rng),
            SpawnLaw::Deterministic => {
                credit[s] += cfg.gamma * cfg.dt;
                let whole = credit[s].floor();
                credit[s] -= whole;
                whole as u64
            }
        };
    }
    for (a, n) in agents.iter_mut().zip(&spawns) {
        *a += n;
    }
    Ok(AgentStep {
        events,
        spawns,
        state: AbmState {
            b: state.b.clone(),
            agents,
            t: state.t,
            spawn_credit: credit,
        },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbmRun {
    pub counts: CountSeries,
    /// Agents present at each location at the start of every step.
    pub agent_trace: Vec<Vec<u64>>,
}

pub fn simulate_abm(cfg: &AbmConfig, n_steps: usize, seed: u64) -> Result<CountSeries> {
    Ok(simulate_abm_traced(cfg, n_steps, seed)?.counts)
}

pub fn simulate_abm_traced(cfg: &AbmConfig, n_steps: usize, seed: u64) -> Result<AbmRun> {
    let ids: Vec<u64> = (0..cfg.m() as u64).collect();
    simulate_with_streams(cfg, n_steps, seed, &ids)
}

pub(crate) fn simulate_with_streams(cfg: &AbmConfig, n_steps: usize, seed: u64, stream_ids: &[u64]) -> Result<AbmRun> {
    cfg.validate()?;
    let m = cfg.m();
    let mut rngs: Vec<StreamRng> = stream_ids
        .iter()
        .map(|&id| rng::stream(seed, Domain::Abm, id, 0))
        .collect();
    let hoods = cfg.neighborhoods();
    let mut counts = CountSeries::new(m, cfg.dt)?;
    let mut trace = Vec::with_capacity(n_steps);
    let mut state = AbmState::new(m);
    for _ in 0..n_steps {
        trace.push(state.agents.clone());
        let step = step_agents_with(&state, cfg, &hoods, &mut rngs)?;
        let b = attractiveness_update(&state, &step.events, cfg)?;
        counts.push_row(&step.events)?;
        state = step.state;
        state.b = b;
        state.t += cfg.dt;
    }
    Ok(AbmRun {
        counts,
        agent_trace: trace,
    })
}
