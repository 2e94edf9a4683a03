//! Ensemble Poisson-Gamma filter for the count-driven Hawkes model.
//!
//! Every node owns an ensemble of `(lambda, q)` pairs where
//! `q = [mu, beta, alpha_1, .., alpha_m]` is the node's parameter row. One
//! assimilation step per node:
//!
//! 1. forecast each member's intensity with its own parameters;
//! 2. move the intensity members with the Poisson-Gamma analysis;
//! 3. regress the parameters on the member-wise intensity increments;
//! 4. keep the analysed pair as the next state.
//!
//! Nodes only share the observed count vectors, so the step runs in parallel
//! over nodes. Each node draws from a stream keyed on `(seed, node, step)`,
//! which makes results independent of the worker count.

mod analysis;
mod regress;

pub use analysis::{
    analytic_posterior, perturbed_observations, pg_analysis, pg_analysis_into, AnalysisDiagnostics,
    AnalysisOptions, PerturbationLaw, PerturbedObservations,
};
pub use regress::{enkf_regress, enkf_regress_in_place};

use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hawkes::CountSeries;
use crate::rng::{self, Domain};

/// Column of the baseline in a parameter row.
pub const MU: usize = 0;
/// Column of the decay rate in a parameter row.
pub const BETA: usize = 1;
/// First excitation column; `alpha[i][j]` sits at `ALPHA + j`.
pub const ALPHA: usize = 2;

/// A gamma law described by its mean and variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaSpec {
    pub mean: f64,
    pub variance: f64,
}

impl GammaSpec {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        let g = GammaSpec { mean, variance };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mean.is_finite() && self.mean > 0.0) {
            return Err(Error::invalid(format!("gamma mean {} must be > 0", self.mean)));
        }
        if !(self.variance.is_finite() && self.variance > 0.0) {
            return Err(Error::invalid(format!(
                "gamma variance {} must be > 0",
                self.variance
            )));
        }
        Ok(())
    }

    pub fn shape(&self) -> f64 {
        self.mean * self.mean / self.variance
    }

    pub fn scale(&self) -> f64 {
        self.variance / self.mean
    }

    fn distribution(&self) -> Result<Gamma<f64>> {
        self.validate()?;
        Gamma::new(self.shape(), self.scale())
            .map_err(|e| Error::invalid(format!("gamma({}, {}): {e}", self.mean, self.variance)))
    }
}

/// Priors of the initial ensemble, one per parameter group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Priors {
    pub baseline: GammaSpec,
    pub decay: GammaSpec,
    pub excitation: GammaSpec,
}

/// `M` joint samples of one node's intensity and parameter row.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeEnsemble {
    pub node_index: usize,
    /// Intensity samples, one per member.
    pub lambda: Vec<f64>,
    /// Row-major `M x (m + 2)` parameter samples.
    pub q: Vec<f64>,
    dim: usize,
}

impl NodeEnsemble {
    pub fn new(node_index: usize, lambda: Vec<f64>, q: Vec<f64>, dim: usize) -> Result<Self> {
        if lambda.len() < 2 {
            return Err(Error::invalid(format!(
                "ensemble size {} must be >= 2",
                lambda.len()
            )));
        }
        if dim < ALPHA + 1 || q.len() != lambda.len() * dim {
            return Err(Error::Dimension {
                what: "parameter block",
                expected: lambda.len() * dim,
                got: q.len(),
            });
        }
        Ok(NodeEnsemble {
            node_index,
            lambda,
            q,
            dim,
        })
    }

    pub fn size(&self) -> usize {
        self.lambda.len()
    }

    /// Parameter row length, `m + 2`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of nodes in the network this ensemble belongs to.
    pub fn m(&self) -> usize {
        self.dim - ALPHA
    }

    pub fn member(&self, s: usize) -> &[f64] {
        &self.q[s * self.dim..(s + 1) * self.dim]
    }

    pub fn members(&self) -> impl Iterator<Item = &[f64]> {
        self.q.chunks_exact(self.dim)
    }

    pub fn column(&self, p: usize) -> impl Iterator<Item = f64> + '_ {
        self.members().map(move |row| row[p])
    }

    pub fn param_means(&self) -> Vec<f64> {
        self.shifted_sums().0
    }

    /// Unbiased (divisor `M - 1`) variance of each parameter column.
    pub fn param_variances(&self) -> Vec<f64> {
        self.shifted_sums().1
    }

    // Moments accumulated relative to the first member, so that a column of
    // identical values has exactly its value as mean and zero variance.
    fn shifted_sums(&self) -> (Vec<f64>, Vec<f64>) {
        let reference = self.member(0).to_vec();
        let mut sum = vec![0.0; self.dim];
        let mut sq = vec![0.0; self.dim];
        for row in self.members() {
            for ((v, r), (a, b)) in row.iter().zip(&reference).zip(sum.iter_mut().zip(sq.iter_mut())) {
                let d = v - r;
                *a += d;
                *b += d * d;
            }
        }
        let n = self.size() as f64;
        let mean = reference.iter().zip(&sum).map(|(r, s)| r + s / n).collect();
        let var = sum
            .iter()
            .zip(&sq)
            .map(|(s, q)| ((q - s * s / n) / (n - 1.0)).max(0.0))
            .collect();
        (mean, var)
    }

    fn is_finite(&self) -> bool {
        self.lambda.iter().chain(&self.q).all(|v| v.is_finite())
    }
}

/// Draws the initial ensembles. Member intensities start at the member's own
/// baseline sample.
pub fn init_ensemble(m: usize, size: usize, priors: &Priors, seed: u64) -> Result<Vec<NodeEnsemble>> {
    if m == 0 {
        return Err(Error::invalid("network needs at least one node"));
    }
    if size < 2 {
        return Err(Error::invalid(format!("ensemble size {size} must be >= 2")));
    }
    let baseline = priors.baseline.distribution()?;
    let decay = priors.decay.distribution()?;
    let excitation = priors.excitation.distribution()?;
    let dim = m + ALPHA;
    (0..m)
        .map(|i| {
            let mut rng = rng::stream(seed, Domain::EnsembleInit, i as u64, 0);
            let mut q = Vec::with_capacity(size * dim);
            let mut lambda = Vec::with_capacity(size);
            for _ in 0..size {
                let mu = baseline.sample(&mut rng);
                q.push(mu);
                q.push(decay.sample(&mut rng));
                q.extend((0..m).map(|_| excitation.sample(&mut rng)));
                lambda.push(mu);
            }
            NodeEnsemble::new(i, lambda, q, dim)
        })
        .collect()
}

/// Placeholder for covariance localisation; only the identity is available.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Localization {
    #[default]
    None,
}

/// Which histories `run_filter` keeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HistoryFlags {
    /// Per-step per-node analysis diagnostics.
    pub diagnostics: bool,
    /// Parameter means and variances at every `stride`-th step.
    pub moments: bool,
    pub stride: usize,
}

impl Default for HistoryFlags {
    fn default() -> Self {
        HistoryFlags {
            diagnostics: false,
            moments: true,
            stride: 1,
        }
    }
}

fn default_floor() -> f64 {
    1e-8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub ensemble_size: usize,
    pub dt: f64,
    pub seed: u64,
    #[serde(default = "default_floor")]
    pub positivity_floor: f64,
    #[serde(default)]
    pub perturbation: PerturbationLaw,
    #[serde(default)]
    pub history: HistoryFlags,
    #[serde(default)]
    pub localization: Localization,
}

impl FilterConfig {
    pub fn new(ensemble_size: usize, dt: f64, seed: u64) -> Self {
        FilterConfig {
            ensemble_size,
            dt,
            seed,
            positivity_floor: default_floor(),
            perturbation: PerturbationLaw::default(),
            history: HistoryFlags::default(),
            localization: Localization::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ensemble_size < 2 {
            return Err(Error::invalid(format!(
                "ensemble_size = {} violates the ensemble-size invariant M >= 2",
                self.ensemble_size
            )));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::invalid(format!("dt = {} must be > 0", self.dt)));
        }
        if !(self.positivity_floor.is_finite() && self.positivity_floor > 0.0) {
            return Err(Error::invalid(format!(
                "positivity_floor = {} must be > 0",
                self.positivity_floor
            )));
        }
        if self.history.stride == 0 {
            return Err(Error::invalid("history stride must be >= 1"));
        }
        Ok(())
    }
}

/// Ensembles plus the count vector of the last assimilated bin, which the
/// next forecast needs.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub ensembles: Vec<NodeEnsemble>,
    pub prev_counts: Option<Vec<u64>>,
    /// Number of bins assimilated so far.
    pub step: usize,
}

impl FilterState {
    pub fn new(ensembles: Vec<NodeEnsemble>) -> Result<Self> {
        let m = ensembles.len();
        if m == 0 {
            return Err(Error::invalid("filter needs at least one node ensemble"));
        }
        let size = ensembles[0].size();
        for (i, e) in ensembles.iter().enumerate() {
            if e.m() != m {
                return Err(Error::Dimension {
                    what: "ensemble parameter row (m + 2)",
                    expected: m + ALPHA,
                    got: e.dim(),
                });
            }
            if e.size() != size {
                return Err(Error::Dimension {
                    what: "ensemble size",
                    expected: size,
                    got: e.size(),
                });
            }
            if e.node_index != i {
                return Err(Error::invalid(format!(
                    "ensemble at position {i} carries node index {}",
                    e.node_index
                )));
            }
        }
        Ok(FilterState {
            ensembles,
            prev_counts: None,
            step: 0,
        })
    }

    pub fn m(&self) -> usize {
        self.ensembles.len()
    }
}

/// Assimilates one count vector. The first call has no previous counts to
/// forecast with and analyses the initial intensities directly.
pub fn assimilate_step(
    state: &mut FilterState,
    counts: &[u64],
    cfg: &FilterConfig,
) -> Result<Vec<AnalysisDiagnostics>> {
    let m = state.m();
    if counts.len() != m {
        return Err(Error::Dimension {
            what: "count vector length",
            expected: m,
            got: counts.len(),
        });
    }
    let nonzero: Option<Vec<(usize, f64)>> = state.prev_counts.as_ref().map(|prev| {
        prev.iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(j, &c)| (j, c as f64))
            .collect()
    });
    let step = state.step;
    let opts = AnalysisOptions {
        dt: cfg.dt,
        law: cfg.perturbation,
        floor: cfg.positivity_floor,
    };
    let diags = state
        .ensembles
        .par_iter_mut()
        .map(|ens| {
            let i = ens.node_index;
            let d = update_node(ens, nonzero.as_deref(), counts[i], step, cfg, &opts)?;
            if !ens.is_finite() {
                return Err(Error::NonFinite { step, node: i });
            }
            Ok(d)
        })
        .collect::<Result<Vec<_>>>()?;
    state.prev_counts = Some(counts.to_vec());
    state.step += 1;
    Ok(diags)
}

fn update_node(
    ens: &mut NodeEnsemble,
    prev: Option<&[(usize, f64)]>,
    count: u64,
    step: usize,
    cfg: &FilterConfig,
    opts: &AnalysisOptions,
) -> Result<AnalysisDiagnostics> {
    let dt = cfg.dt;
    let dim = ens.dim;
    let floor = cfg.positivity_floor;
    let lambda_f: Vec<f64> = match prev {
        None => ens.lambda.clone(),
        Some(nz) => ens
            .q
            .chunks_exact(dim)
            .zip(&ens.lambda)
            .map(|(row, &l)| {
                let (mu, beta) = (row[MU], row[BETA]);
                let alpha = &row[ALPHA..];
                let excitation: f64 = nz.iter().map(|&(j, c)| alpha[j] * c).sum();
                let f = mu + (l - mu) * (1.0 - beta * dt) + excitation;
                if f.is_nan() {
                    f
                } else {
                    f.max(floor)
                }
            })
            .collect(),
    };
    if let Some(l) = lambda_f.iter().find(|l| !l.is_finite()) {
        log::error!("non-finite forecast {l} at node {} step {step}", ens.node_index);
        return Err(Error::NonFinite {
            step,
            node: ens.node_index,
        });
    }
    let mut rng = rng::stream(cfg.seed, Domain::Analysis, ens.node_index as u64, step as u64);
    let mut lambda_a = vec![0.0; lambda_f.len()];
    let diag = pg_analysis_into(&lambda_f, count, opts, &mut rng, &mut lambda_a)?;
    enkf_regress_in_place(&mut ens.q, dim, &lambda_f, &lambda_a, floor)?;
    ens.lambda = lambda_a;
    Ok(diag)
}

/// Parameter means and variances of every node at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    /// Bins assimilated when the snapshot was taken.
    pub step: usize,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
}

impl Moments {
    pub fn of(ensembles: &[NodeEnsemble], step: usize) -> Self {
        Moments {
            step,
            means: ensembles.iter().map(NodeEnsemble::param_means).collect(),
            variances: ensembles.iter().map(NodeEnsemble::param_variances).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRecord {
    pub step: usize,
    pub node: usize,
    #[serde(flatten)]
    pub diag: AnalysisDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct History {
    pub initial: Option<Moments>,
    pub snapshots: Vec<Moments>,
    pub diagnostics: Vec<DiagnosticRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterResult {
    pub config: FilterConfig,
    pub state: FilterState,
    pub history: History,
}

impl FilterResult {
    pub fn ensembles(&self) -> &[NodeEnsemble] {
        &self.state.ensembles
    }
}

/// Runs the filter over every row of `data`.
pub fn run_filter(data: &CountSeries, init: Vec<NodeEnsemble>, cfg: &FilterConfig) -> Result<FilterResult> {
    cfg.validate()?;
    let state = FilterState::new(init)?;
    if state.m() != data.m() {
        return Err(Error::Dimension {
            what: "node ensembles vs data width",
            expected: data.m(),
            got: state.m(),
        });
    }
    resume_filter(data, state, cfg)
}

/// Continues from an existing state, assimilating every row of `data`.
pub fn resume_filter(data: &CountSeries, mut state: FilterState, cfg: &FilterConfig) -> Result<FilterResult> {
    cfg.validate()?;
    if state.m() != data.m() {
        return Err(Error::Dimension {
            what: "node ensembles vs data width",
            expected: data.m(),
            got: state.m(),
        });
    }
    let flags = cfg.history;
    let mut history = History::default();
    if flags.moments {
        history.initial = Some(Moments::of(&state.ensembles, state.step));
    }
    let n = data.n_steps();
    for (k, row) in data.rows().enumerate() {
        let step = state.step;
        let diags = assimilate_step(&mut state, row, cfg)?;
        if flags.diagnostics {
            history.diagnostics.extend(
                diags
                    .into_iter()
                    .enumerate()
                    .map(|(node, diag)| DiagnosticRecord { step, node, diag }),
            );
        }
        if flags.moments && ((k + 1) % flags.stride == 0 || k + 1 == n) {
            history.snapshots.push(Moments::of(&state.ensembles, state.step));
        }
        if (k + 1) % 10_000 == 0 {
            log::info!("assimilated {} / {n} steps", k + 1);
        }
    }
    Ok(FilterResult {
        config: cfg.clone(),
        state,
        history,
    })
}

/// Runs `f` on a dedicated pool with `workers` threads.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}
