//! Discrete-time multivariate Hawkes process driven by counts.
//!
//! Each node carries a piecewise-constant intensity that relaxes towards its
//! baseline and jumps by `alpha[i][j]` for every event observed at node `j`
//! in the previous bin.

use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Domain};

/// Parameters of an `m`-node process. Row `i` of `alpha` is the receiving
/// node: `alpha[i][j]` is the jump in node `i`'s intensity per event at `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HawkesParams {
    pub mu: Vec<f64>,
    pub beta: Vec<f64>,
    pub alpha: Vec<Vec<f64>>,
}

impl HawkesParams {
    pub fn new(mu: Vec<f64>, beta: Vec<f64>, alpha: Vec<Vec<f64>>) -> Result<Self> {
        let p = HawkesParams { mu, beta, alpha };
        p.validate()?;
        Ok(p)
    }

    pub fn m(&self) -> usize {
        self.mu.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.mu.len();
        if m == 0 {
            return Err(Error::invalid("parameter set has no nodes"));
        }
        if self.beta.len() != m {
            return Err(Error::Dimension {
                what: "beta length",
                expected: m,
                got: self.beta.len(),
            });
        }
        if self.alpha.len() != m {
            return Err(Error::Dimension {
                what: "alpha rows",
                expected: m,
                got: self.alpha.len(),
            });
        }
        for (i, row) in self.alpha.iter().enumerate() {
            if row.len() != m {
                return Err(Error::Dimension {
                    what: "alpha row length",
                    expected: m,
                    got: row.len(),
                });
            }
            if let Some(j) = row.iter().position(|a| !(a.is_finite() && *a >= 0.0)) {
                return Err(Error::invalid(format!(
                    "alpha[{i}][{j}] = {} must be finite and >= 0",
                    row[j]
                )));
            }
        }
        for (i, (&mu, &beta)) in self.mu.iter().zip(&self.beta).enumerate() {
            if !(mu.is_finite() && mu > 0.0) {
                return Err(Error::invalid(format!("mu[{i}] = {mu} must be > 0")));
            }
            if !(beta.is_finite() && beta > 0.0) {
                return Err(Error::invalid(format!("beta[{i}] = {beta} must be > 0")));
            }
        }
        Ok(())
    }

    /// Nodes for which `beta * dt >= 1`, i.e. where one step overshoots the
    /// baseline instead of relaxing towards it.
    pub fn unstable_nodes(&self, dt: f64) -> Vec<usize> {
        self.beta
            .iter()
            .enumerate()
            .filter(|(_, b)| **b * dt >= 1.0)
            .map(|(i, _)| i)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntensityVector {
    pub lambda: Vec<f64>,
    pub k: usize,
}

/// Time-indexed event counts: `n_steps` rows of `m` non-negative cells.
#[derive(Debug, Clone, PartialEq)]
pub struct CountSeries {
    m: usize,
    counts: Vec<u64>,
    pub dt: f64,
    pub node_labels: Option<Vec<String>>,
}

impl CountSeries {
    pub fn new(m: usize, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid(format!("dt = {dt} must be > 0")));
        }
        if m == 0 {
            return Err(Error::invalid("count series needs at least one node"));
        }
        Ok(CountSeries {
            m,
            counts: Vec::new(),
            dt,
            node_labels: None,
        })
    }

    pub fn from_rows(rows: Vec<Vec<u64>>, m: usize, dt: f64) -> Result<Self> {
        let mut s = CountSeries::new(m, dt)?;
        for row in rows {
            s.push_row(&row)?;
        }
        Ok(s)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.m {
            return Err(Error::Dimension {
                what: "node labels",
                expected: self.m,
                got: labels.len(),
            });
        }
        self.node_labels = Some(labels);
        Ok(self)
    }

    pub fn push_row(&mut self, row: &[u64]) -> Result<()> {
        if row.len() != self.m {
            return Err(Error::Dimension {
                what: "count row width",
                expected: self.m,
                got: row.len(),
            });
        }
        self.counts.extend_from_slice(row);
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n_steps(&self) -> usize {
        self.counts.len() / self.m
    }

    pub fn row(&self, k: usize) -> &[u64] {
        &self.counts[k * self.m..(k + 1) * self.m]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u64]> {
        self.counts.chunks_exact(self.m)
    }

    pub fn node_totals(&self) -> Vec<u64> {
        let mut totals = vec![0u64; self.m];
        for row in self.rows() {
            for (t, c) in totals.iter_mut().zip(row) {
                *t += c;
            }
        }
        totals
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Label of node `i`, defaulting to its 1-based index.
    pub fn label(&self, i: usize) -> String {
        match &self.node_labels {
            Some(l) => l[i].clone(),
            None => format!("node_{}", i + 1),
        }
    }
}

/// One forecast step for a single node.
#[inline]
pub fn forecast_intensity(
    lambda: f64,
    mu: f64,
    beta: f64,
    alpha_row: &[f64],
    counts: &[u64],
    dt: f64,
) -> f64 {
    let excitation: f64 = alpha_row
        .iter()
        .zip(counts)
        .filter(|(_, &c)| c > 0)
        .map(|(a, &c)| a * c as f64)
        .sum();
    mu + (lambda - mu) * (1.0 - beta * dt) + excitation
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntensityStep {
    pub next: IntensityVector,
    /// Nodes whose `beta * dt >= 1`. The step is still computed for them.
    pub unstable_nodes: Vec<usize>,
}

/// Advances every node's intensity from bin `k` to `k + 1` given the counts
/// observed in bin `k`.
pub fn step_intensity(
    lambda_k: &IntensityVector,
    params: &HawkesParams,
    counts_k: &[u64],
    dt: f64,
) -> Result<IntensityStep> {
    let m = params.m();
    if lambda_k.lambda.len() != m {
        return Err(Error::Dimension {
            what: "intensity length",
            expected: m,
            got: lambda_k.lambda.len(),
        });
    }
    if counts_k.len() != m {
        return Err(Error::Dimension {
            what: "count vector length",
            expected: m,
            got: counts_k.len(),
        });
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid(format!("dt = {dt} must be > 0")));
    }
    let unstable_nodes = params.unstable_nodes(dt);
    if !unstable_nodes.is_empty() {
        log::warn!("beta*dt >= 1 at nodes {unstable_nodes:?}; intensity may undershoot baseline");
    }
    let lambda = (0..m)
        .map(|i| {
            forecast_intensity(
                lambda_k.lambda[i],
                params.mu[i],
                params.beta[i],
                &params.alpha[i],
                counts_k,
                dt,
            )
        })
        .collect();
    Ok(IntensityStep {
        next: IntensityVector {
            lambda,
            k: lambda_k.k + 1,
        },
        unstable_nodes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub dt: f64,
    pub n_steps: usize,
    pub seed: u64,
    /// Steps simulated and discarded before recording starts.
    #[serde(default)]
    pub burn_in: usize,
}

pub fn simulate(params: &HawkesParams, dt: f64, n_steps: usize, seed: u64) -> Result<CountSeries> {
    simulate_with(
        params,
        &SimOptions {
            dt,
            n_steps,
            seed,
            burn_in: 0,
        },
    )
}

/// Forward simulation starting from `lambda_0 = mu`. Node `i` draws its
/// counts from its own stream keyed on `(seed, i)`.
pub fn simulate_with(params: &HawkesParams, opts: &SimOptions) -> Result<CountSeries> {
    params.validate()?;
    if opts.n_steps == 0 {
        return Err(Error::invalid("n_steps must be >= 1"));
    }
    let dt = opts.dt;
    let unstable = params.unstable_nodes(dt);
    if !unstable.is_empty() {
        return Err(Error::invalid(format!(
            "beta*dt >= 1 at nodes {unstable:?}: simulated intensities would overshoot the baseline"
        )));
    }
    let m = params.m();
    let mut out = CountSeries::new(m, dt)?;
    let mut streams: Vec<_> = (0..m)
        .map(|i| rng::stream(opts.seed, Domain::HawkesSim, i as u64, 0))
        .collect();
    let mut lambda = params.mu.clone();
    let mut next = vec![0.0; m];
    let mut counts = vec![0u64; m];
    for k in 0..opts.burn_in + opts.n_steps {
        for (i, rng) in streams.iter_mut().enumerate() {
            counts[i] = draw_poisson(lambda[i] * dt, rng);
        }
        if k >= opts.burn_in {
            out.push_row(&counts)?;
        }
        for i in 0..m {
            next[i] = forecast_intensity(
                lambda[i],
                params.mu[i],
                params.beta[i],
                &params.alpha[i],
                &counts,
                dt,
            );
        }
        std::mem::swap(&mut lambda, &mut next);
    }
    Ok(out)
}

pub(crate) fn draw_poisson<R: rand::Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if !(mean > 0.0) {
        return 0;
    }
    // Poisson::new only fails for non-positive or non-finite means.
    match Poisson::new(mean) {
        Ok(d) => d.sample(rng) as u64,
        Err(_) => 0,
    }
}

/// Spectral radius of the branching matrix `diag(1/beta) * alpha`.
pub fn branching_ratio(params: &HawkesParams) -> f64 {
    let m = params.m();
    let b: Vec<Vec<f64>> = (0..m)
        .map(|i| params.alpha[i].iter().map(|a| a / params.beta[i]).collect())
        .collect();
    perron_root(&b)
}

// Collatz-Wielandt bracketing on (B + I)/2, which keeps the iterate strictly
// positive and removes periodicity.
fn perron_root(b: &[Vec<f64>]) -> f64 {
    let m = b.len();
    let mut x = vec![1.0; m];
    let mut upper = f64::INFINITY;
    for _ in 0..20_000 {
        let y: Vec<f64> = (0..m)
            .map(|i| 0.5 * (x[i] + b[i].iter().zip(&x).map(|(a, v)| a * v).sum::<f64>()))
            .collect();
        let ratios = y.iter().zip(&x).map(|(a, v)| a / v);
        let (lo, hi) = ratios.fold((f64::INFINITY, 0.0f64), |(lo, hi), r| (lo.min(r), hi.max(r)));
        upper = hi;
        let norm = y.iter().cloned().fold(0.0, f64::max);
        x = y.into_iter().map(|v| v / norm).collect();
        if hi - lo < 1e-13 {
            break;
        }
    }
    2.0 * upper - 1.0
}

/// Mean intensity `lambda = mu + diag(1/beta) alpha lambda` of the
/// stationary regime.
pub fn stationary_rate(params: &HawkesParams) -> Result<Vec<f64>> {
    params.validate()?;
    let rho = branching_ratio(params);
    if rho >= 1.0 {
        return Err(Error::Supercritical(rho));
    }
    let m = params.m();
    // (I - diag(1/beta) alpha) x = mu
    let mut a: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let d = if i == j { 1.0 } else { 0.0 };
                    d - params.alpha[i][j] / params.beta[i]
                })
                .collect()
        })
        .collect();
    let mut rhs = params.mu.clone();
    solve_in_place(&mut a, &mut rhs)?;
    Ok(rhs)
}

fn solve_in_place(a: &mut [Vec<f64>], b: &mut [f64]) -> Result<()> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))
            .unwrap_or(col);
        if a[pivot][col].abs() < 1e-300 {
            return Err(Error::invalid("singular system in stationary rate"));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * b[c]).sum();
        b[r] = (b[r] - s) / a[r][r];
    }
    Ok(())
}
