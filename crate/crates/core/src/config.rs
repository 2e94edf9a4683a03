//! Experiment configuration (TOML) and its field-level validation.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::abm::AbmConfig;
use crate::error::{Error, Result};
use crate::filter::{FilterConfig, GammaSpec, HistoryFlags, PerturbationLaw, Priors};
use crate::hawkes::HawkesParams;
use crate::network::{Measure, ThresholdRule};
use crate::scenario;

/// Commented reference configuration listing every field and its default.
pub const REFERENCE: &str = include_str!("../config/reference.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    SimulateHawkes,
    SimulateAbm,
    Aggregate,
    Filter,
    Analyze,
    #[serde(rename = "experiment-1")]
    Experiment1,
    #[serde(rename = "experiment-2")]
    Experiment2,
    Sweep,
}

impl Mode {
    pub const ALL: [Mode; 8] = [
        Mode::SimulateHawkes,
        Mode::SimulateAbm,
        Mode::Aggregate,
        Mode::Filter,
        Mode::Analyze,
        Mode::Experiment1,
        Mode::Experiment2,
        Mode::Sweep,
    ];

    pub fn from_name(name: &str) -> Option<Mode> {
        Mode::ALL.into_iter().find(|m| m.name() == name)
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::SimulateHawkes => "simulate-hawkes",
            Mode::SimulateAbm => "simulate-abm",
            Mode::Aggregate => "aggregate",
            Mode::Filter => "filter",
            Mode::Analyze => "analyze",
            Mode::Experiment1 => "experiment-1",
            Mode::Experiment2 => "experiment-2",
            Mode::Sweep => "sweep",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Counts CSV (filter), event CSV (aggregate).
    pub input: Option<PathBuf>,
    /// Hawkes parameters JSON for simulate-hawkes.
    pub params: Option<PathBuf>,
    /// ABM configuration JSON; replaces `[abm]`.
    pub abm: Option<PathBuf>,
    /// Known truth for error metrics in filter mode.
    pub truth: Option<PathBuf>,
    /// Filter snapshot directory for analyze.
    pub snapshot: Option<PathBuf>,
    /// Snapshot to resume the filter from.
    pub resume: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Simulation {
    pub dt: f64,
    pub n_steps: usize,
    pub burn_in: usize,
}

impl Default for Simulation {
    fn default() -> Self {
        Simulation {
            dt: 0.1,
            n_steps: 2000,
            burn_in: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioScalars {
    pub s1: f64,
    pub s2: f64,
}

impl Default for ScenarioScalars {
    fn default() -> Self {
        ScenarioScalars { s1: 1.5, s2: 1.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSection {
    pub ensemble_size: usize,
    pub positivity_floor: f64,
    pub perturbation: PerturbationLaw,
    pub history: HistoryFlags,
}

impl Default for FilterSection {
    fn default() -> Self {
        let f = FilterConfig::new(500, 0.1, 0);
        FilterSection {
            ensemble_size: f.ensemble_size,
            positivity_floor: f.positivity_floor,
            perturbation: f.perturbation,
            history: f.history,
        }
    }
}

impl FilterSection {
    pub fn to_config(&self, dt: f64, seed: u64) -> FilterConfig {
        FilterConfig {
            ensemble_size: self.ensemble_size,
            positivity_floor: self.positivity_floor,
            perturbation: self.perturbation,
            history: self.history,
            ..FilterConfig::new(self.ensemble_size, dt, seed)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestSection {
    /// Bin width in hours.
    pub dt: f64,
    pub min_node_total: u64,
    pub dead_day_threshold: u64,
    pub day_length: f64,
    pub t0: Option<f64>,
    pub t1: Option<f64>,
    pub clean: bool,
}

impl Default for IngestSection {
    fn default() -> Self {
        IngestSection {
            dt: 0.1,
            min_node_total: 0,
            dead_day_threshold: 0,
            day_length: crate::ingest::HOURS_PER_DAY,
            t0: None,
            t1: None,
            clean: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    pub threshold: ThresholdRule,
    pub measures: Vec<Measure>,
    pub rank_distributions: bool,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection {
            threshold: ThresholdRule::Relative(1.0),
            measures: Measure::ALL.to_vec(),
            rank_distributions: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    /// `(s1, s2)` pairs run by experiment-1.
    pub scenarios: Vec<(f64, f64)>,
    /// Recorded moments every this many steps.
    pub stride: usize,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            scenarios: vec![(1.5, 1.5), (1.5, 0.5), (0.5, 1.5), (0.5, 0.5)],
            stride: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub s1: f64,
    pub s2_values: Vec<f64>,
    /// Also vary `s1` over these at `s2 = s2_fixed`.
    pub s1_values: Vec<f64>,
    pub s2_fixed: f64,
    pub replicates: u64,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            s1: 1.5,
            s2_values: vec![0.25, 0.5, 0.75, 1.0, 1.25, 1.5],
            s1_values: vec![],
            s2_fixed: 1.5,
            replicates: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Option<Mode>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub paths: Paths,
    #[serde(default)]
    pub simulation: Simulation,
    #[serde(default)]
    pub scenario: ScenarioScalars,
    #[serde(default)]
    pub filter: FilterSection,
    /// Defaults to the scenario priors of `s1`, `s2`.
    #[serde(default)]
    pub priors: Option<Priors>,
    /// Defaults to the six-location reference configuration.
    #[serde(default)]
    pub abm: Option<AbmConfig>,
    #[serde(default)]
    pub ingest: IngestSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

/// One validation finding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

struct Issues(Vec<Issue>);

impl Issues {
    fn push(&mut self, field: impl Into<String>, message: impl Into<String>) {
        self.0.push(Issue {
            field: field.into(),
            message: message.into(),
        });
    }

    fn positive(&mut self, field: &str, v: f64) {
        if !(v.is_finite() && v > 0.0) {
            self.push(field, format!("must be a finite number > 0, got {v}"));
        }
    }

    fn gamma(&mut self, field: &str, g: &GammaSpec) {
        if let Err(e) = g.validate() {
            self.push(field, e.to_string());
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new("")));
        Ok(cfg)
    }

    /// Makes relative input paths relative to the config file's directory.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(v) = p.as_mut() {
                if v.is_relative() {
                    *v = base.join(&*v);
                }
            }
        };
        let p = &mut self.paths;
        for slot in [&mut p.input, &mut p.params, &mut p.abm, &mut p.truth, &mut p.snapshot, &mut p.resume] {
            fix(slot);
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn priors(&self) -> Priors {
        self.priors
            .unwrap_or_else(|| scenario::perfect_model_priors(self.scenario.s1, self.scenario.s2))
    }

    pub fn abm_config(&self) -> Result<AbmConfig> {
        match (&self.paths.abm, &self.abm) {
            (Some(p), _) => crate::io::read_json(p),
            (None, Some(a)) => Ok(a.clone()),
            (None, None) => Ok(scenario::abm_reference()),
        }
    }

    /// Hawkes truth for simulate-hawkes: the params file or the scenario.
    pub fn hawkes_params(&self) -> Result<HawkesParams> {
        match &self.paths.params {
            Some(p) => crate::io::read_params(p),
            None => Ok(scenario::perfect_model(self.scenario.s1, self.scenario.s2)),
        }
    }

    /// Field-level problems; empty when the config can run as `mode`.
    pub fn validate(&self) -> Vec<Issue> {
        let mut is = Issues(Vec::new());
        let Some(mode) = self.mode else {
            is.push("mode", "missing; set it in the file or use a subcommand");
            return is.0;
        };
        if self.seed.is_none() {
            is.push("seed", "is mandatory (set it in the file or pass --seed)");
        }
        let needs_filter = matches!(mode, Mode::Filter | Mode::Experiment1 | Mode::Experiment2 | Mode::Sweep);
        if needs_filter {
            let f = &self.filter;
            if f.ensemble_size < 2 {
                is.push(
                    "filter.ensemble_size",
                    format!("{} violates the ensemble-size invariant M >= 2", f.ensemble_size),
                );
            }
            is.positive("filter.positivity_floor", f.positivity_floor);
            if f.history.stride == 0 {
                is.push("filter.history.stride", "must be >= 1");
            }
            if let Some(p) = &self.priors {
                is.gamma("priors.baseline", &p.baseline);
                is.gamma("priors.decay", &p.decay);
                is.gamma("priors.excitation", &p.excitation);
            }
        }
        if matches!(mode, Mode::Experiment1 | Mode::Sweep | Mode::SimulateHawkes) || (mode == Mode::Filter && self.priors.is_none()) {
            is.positive("scenario.s1", self.scenario.s1);
            is.positive("scenario.s2", self.scenario.s2);
        }
        if matches!(mode, Mode::SimulateHawkes | Mode::SimulateAbm | Mode::Experiment1 | Mode::Experiment2 | Mode::Sweep) {
            is.positive("simulation.dt", self.simulation.dt);
            if self.simulation.n_steps == 0 {
                is.push("simulation.n_steps", "must be >= 1");
            }
        }
        match mode {
            Mode::SimulateHawkes => self.check_hawkes(&mut is),
            Mode::SimulateAbm | Mode::Experiment2 => match self.abm_config() {
                Ok(a) => {
                    if let Err(e) = a.validate() {
                        is.push(if self.paths.abm.is_some() { "paths.abm" } else { "abm" }, e.to_string());
                    }
                    if mode == Mode::Experiment2 && (a.dt - self.simulation.dt).abs() > 0.0 {
                        is.push("abm.dt", format!("{} differs from simulation.dt = {}", a.dt, self.simulation.dt));
                    }
                }
                Err(e) => is.push("paths.abm", e.to_string()),
            },
            Mode::Aggregate => {
                if self.paths.input.is_none() {
                    is.push("paths.input", "event CSV is required for aggregate");
                }
                is.positive("ingest.dt", self.ingest.dt);
                is.positive("ingest.day_length", self.ingest.day_length);
                if let (Some(a), Some(b)) = (self.ingest.t0, self.ingest.t1) {
                    if b < a {
                        is.push("ingest.t1", format!("{b} is before t0 = {a}"));
                    }
                }
            }
            Mode::Filter => {
                if self.paths.input.is_none() {
                    is.push("paths.input", "counts CSV is required for filter");
                }
                if let Some(p) = &self.paths.truth {
                    if let Err(e) = crate::io::read_params(p) {
                        is.push("paths.truth", e.to_string());
                    }
                }
            }
            Mode::Analyze => {
                if self.paths.snapshot.is_none() {
                    is.push("paths.snapshot", "filter snapshot directory is required for analyze");
                }
                self.check_analysis(&mut is);
            }
            Mode::Experiment1 => {
                if self.experiment.scenarios.is_empty() {
                    is.push("experiment.scenarios", "needs at least one (s1, s2) pair");
                }
                for (k, (s1, s2)) in self.experiment.scenarios.iter().enumerate() {
                    is.positive(&format!("experiment.scenarios[{k}].s1"), *s1);
                    is.positive(&format!("experiment.scenarios[{k}].s2"), *s2);
                }
                if self.experiment.stride == 0 {
                    is.push("experiment.stride", "must be >= 1");
                }
                self.check_decay(&mut is, 5.0, "experiment truth decay 5");
                self.check_analysis(&mut is);
            }
            Mode::Sweep => {
                let s = &self.sweep;
                if s.s2_values.is_empty() && s.s1_values.is_empty() {
                    is.push("sweep.s2_values", "needs at least one value");
                }
                is.positive("sweep.s1", s.s1);
                is.positive("sweep.s2_fixed", s.s2_fixed);
                for (k, v) in s.s2_values.iter().enumerate() {
                    is.positive(&format!("sweep.s2_values[{k}]"), *v);
                }
                for (k, v) in s.s1_values.iter().enumerate() {
                    is.positive(&format!("sweep.s1_values[{k}]"), *v);
                }
                if s.replicates == 0 {
                    is.push("sweep.replicates", "must be >= 1");
                }
                self.check_decay(&mut is, 5.0, "experiment truth decay 5");
            }
        }
        if mode == Mode::Experiment2 {
            self.check_analysis(&mut is);
        }
        is.0
    }

    fn check_decay(&self, is: &mut Issues, beta: f64, what: &str) {
        let dt = self.simulation.dt;
        if beta * dt >= 1.0 {
            is.push(
                "simulation.dt",
                format!(
                    "{what} with dt = {dt} gives beta*dt = {} >= 1; the discrete intensity then \
                     overshoots below the baseline and oscillates, so the simulation is unstable",
                    beta * dt
                ),
            );
        }
    }

    fn check_hawkes(&self, is: &mut Issues) {
        let field = if self.paths.params.is_some() { "paths.params" } else { "scenario" };
        match self.hawkes_params() {
            Ok(p) => {
                let dt = self.simulation.dt;
                let bad = p.unstable_nodes(dt);
                if !bad.is_empty() {
                    let worst = bad.iter().map(|&i| p.beta[i]).fold(f64::NAN, f64::max);
                    is.push(
                        "simulation.dt",
                        format!(
                            "beta*dt >= 1 at node(s) {:?} (beta up to {worst}, dt = {dt}); the discrete \
                             intensity then overshoots below the baseline and oscillates, so the \
                             simulation is unstable",
                            bad.iter().map(|i| i + 1).collect::<Vec<_>>()
                        ),
                    );
                }
            }
            Err(e) => is.push(field, e.to_string()),
        }
    }

    fn check_analysis(&self, is: &mut Issues) {
        let v = match self.analysis.threshold {
            ThresholdRule::Relative(c) => c,
            ThresholdRule::Absolute(w) => w,
        };
        if !v.is_finite() || (matches!(self.analysis.threshold, ThresholdRule::Relative(_)) && v < 0.0) {
            is.push("analysis.threshold", format!("value {v} is not usable"));
        }
    }
}
