//! Error and variance reduction against a known truth.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{History, Moments, ALPHA, BETA, MU};
use crate::hawkes::HawkesParams;

/// Metrics of one node at one snapshot. Normalised errors are the rmse of
/// the ensemble mean divided by the rmse of the initial ensemble mean; they
/// are `None` when the initial error is zero. Variance ratios are current
/// over initial ensemble variance, averaged over the group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeMetrics {
    pub step: usize,
    pub node: usize,
    pub baseline: Option<f64>,
    pub decay: Option<f64>,
    /// Over the node's excitation row `alpha[i][.]`.
    pub excitation: Option<f64>,
    /// Over the whole parameter row.
    pub overall: Option<f64>,
    pub var_baseline: Option<f64>,
    pub var_decay: Option<f64>,
    pub var_excitation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub step: usize,
    /// `||alpha_hat - alpha||_F / s2`.
    pub scaled_frobenius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub s2: f64,
    pub nodes: Vec<NodeMetrics>,
    pub steps: Vec<StepMetrics>,
}

impl ErrorReport {
    pub fn last_step(&self) -> Option<usize> {
        self.steps.last().map(|s| s.step)
    }

    /// Node rows of the final snapshot.
    pub fn final_nodes(&self) -> Vec<&NodeMetrics> {
        let last = self.last_step();
        self.nodes.iter().filter(|n| Some(n.step) == last).collect()
    }

    pub fn final_frobenius(&self) -> Option<f64> {
        self.steps.last().map(|s| s.scaled_frobenius)
    }
}

fn rmse(est: &[f64], truth: &[f64]) -> f64 {
    let n = est.len() as f64;
    (est.iter().zip(truth).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n).sqrt()
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    if den > 0.0 {
        Some(num / den)
    } else {
        None
    }
}

fn mean_ratio(cur: &[f64], init: &[f64]) -> Option<f64> {
    let r: Option<Vec<f64>> = cur.iter().zip(init).map(|(c, i)| ratio(*c, *i)).collect();
    r.map(|v| v.iter().sum::<f64>() / v.len() as f64)
}

pub fn scaled_frobenius(alpha_hat: &[Vec<f64>], alpha: &[Vec<f64>], s2: f64) -> f64 {
    let sq: f64 = alpha_hat
        .iter()
        .zip(alpha)
        .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)))
        .sum();
    sq.sqrt() / s2
}

/// Truth row of node `i` in the filter's parameter layout.
pub fn truth_row(truth: &HawkesParams, i: usize) -> Vec<f64> {
    let mut row = vec![truth.mu[i], truth.beta[i]];
    row.extend_from_slice(&truth.alpha[i]);
    row
}

fn node_metrics(cur: &Moments, init: &Moments, truth: &HawkesParams, i: usize) -> NodeMetrics {
    let t = truth_row(truth, i);
    let (c, c0) = (&cur.means[i], &init.means[i]);
    let (v, v0) = (&cur.variances[i], &init.variances[i]);
    let group = |lo: usize, hi: usize| ratio(rmse(&c[lo..hi], &t[lo..hi]), rmse(&c0[lo..hi], &t[lo..hi]));
    let d = t.len();
    NodeMetrics {
        step: cur.step,
        node: i,
        baseline: group(MU, MU + 1),
        decay: group(BETA, BETA + 1),
        excitation: group(ALPHA, d),
        overall: group(0, d),
        var_baseline: mean_ratio(&v[MU..MU + 1], &v0[MU..MU + 1]),
        var_decay: mean_ratio(&v[BETA..BETA + 1], &v0[BETA..BETA + 1]),
        var_excitation: mean_ratio(&v[ALPHA..], &v0[ALPHA..]),
    }
}

/// Metrics for every recorded snapshot, starting with the initial ensemble.
pub fn error_metrics(history: &History, truth: &HawkesParams, s2: f64) -> Result<ErrorReport> {
    truth.validate()?;
    if !(s2.is_finite() && s2 > 0.0) {
        return Err(Error::invalid(format!("s2 = {s2} must be > 0")));
    }
    let init = history
        .initial
        .as_ref()
        .ok_or_else(|| Error::invalid("history has no initial moments; enable moment recording"))?;
    let m = truth.m();
    if init.means.len() != m {
        return Err(Error::Dimension {
            what: "history nodes vs truth",
            expected: m,
            got: init.means.len(),
        });
    }
    let mut nodes = Vec::new();
    let mut steps = Vec::new();
    for snap in std::iter::once(init).chain(&history.snapshots) {
        nodes.extend((0..m).map(|i| node_metrics(snap, init, truth, i)));
        let alpha_hat: Vec<Vec<f64>> = snap.means.iter().map(|r| r[ALPHA..].to_vec()).collect();
        steps.push(StepMetrics {
            step: snap.step,
            scaled_frobenius: scaled_frobenius(&alpha_hat, &truth.alpha, s2),
        });
    }
    Ok(ErrorReport { s2, nodes, steps })
}
