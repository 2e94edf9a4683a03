//! File formats: count series CSV with a JSON sidecar, parameter JSON,
//! filter snapshots and analysis exports.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{AnalysisDiagnostics, DiagnosticRecord, FilterConfig, FilterState, NodeEnsemble, ALPHA};
use crate::hawkes::{CountSeries, HawkesParams};
use crate::metrics::ErrorReport;
use crate::network::{InfluenceNetwork, RankDistribution};

pub fn create_file(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn open_file(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(create_file(path)?))
}

fn csv_reader(path: &Path) -> Result<csv::Reader<BufReader<File>>> {
    Ok(csv::Reader::from_reader(open_file(path)?))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = create_file(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(open_file(path)?)?)
}

pub fn write_params(path: &Path, params: &HawkesParams) -> Result<()> {
    write_json(path, params)
}

pub fn read_params(path: &Path) -> Result<HawkesParams> {
    let p: HawkesParams = read_json(path)?;
    p.validate()?;
    Ok(p)
}

/// Sidecar stored next to a counts CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesMeta {
    pub dt: f64,
    pub n_steps: usize,
    pub m: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<HawkesParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_labels: Option<Vec<String>>,
}

pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

fn node_header(m: usize) -> Vec<String> {
    (1..=m).map(|i| format!("node_{i}")).collect()
}

/// Writes `t,node_1..node_m` rows, `t` being the step index.
pub fn write_counts_csv(path: &Path, series: &CountSeries) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["t".to_string()];
    header.extend(node_header(series.m()));
    w.write_record(&header)?;
    let mut rec = Vec::with_capacity(series.m() + 1);
    for (k, row) in series.rows().enumerate() {
        rec.clear();
        rec.push(k.to_string());
        rec.extend(row.iter().map(u64::to_string));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_counts_csv(path: &Path, dt: f64) -> Result<CountSeries> {
    let mut r = csv_reader(path)?;
    let m = r.headers()?.len().checked_sub(1).filter(|&m| m > 0).ok_or_else(|| {
        Error::invalid(format!("{}: expected a t column and at least one node column", path.display()))
    })?;
    let mut series = CountSeries::new(m, dt)?;
    let mut row = vec![0u64; m];
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        for (cell, field) in row.iter_mut().zip(rec.iter().skip(1)) {
            *cell = field.trim().parse().map_err(|_| {
                Error::invalid(format!(
                    "{} row {}: count {field:?} is not a non-negative integer",
                    path.display(),
                    line + 1
                ))
            })?;
        }
        series.push_row(&row)?;
    }
    Ok(series)
}

/// Counts CSV plus its JSON sidecar.
pub fn write_series(path: &Path, series: &CountSeries, seed: Option<u64>, params: Option<&HawkesParams>) -> Result<()> {
    write_counts_csv(path, series)?;
    let meta = SeriesMeta {
        dt: series.dt,
        n_steps: series.n_steps(),
        m: series.m(),
        seed,
        params: params.cloned(),
        node_labels: series.node_labels.clone(),
    };
    write_json(&sidecar_path(path), &meta)
}

/// Reads a counts CSV; `dt` falls back to the sidecar when not given.
pub fn read_series(path: &Path, dt: Option<f64>) -> Result<(CountSeries, Option<SeriesMeta>)> {
    let side = sidecar_path(path);
    let meta: Option<SeriesMeta> = if side.exists() { Some(read_json(&side)?) } else { None };
    let dt = dt.or(meta.as_ref().map(|m| m.dt)).ok_or_else(|| {
        Error::invalid(format!("{}: no sidecar found, so dt must be given", path.display()))
    })?;
    let mut series = read_counts_csv(path, dt)?;
    if let Some(labels) = meta.as_ref().and_then(|m| m.node_labels.clone()) {
        series = series.with_labels(labels)?;
    }
    Ok((series, meta))
}

pub fn write_agent_trace(path: &Path, trace: &[Vec<u64>]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let m = trace.first().map_or(0, Vec::len);
    let mut header = vec!["t".to_string()];
    header.extend(node_header(m));
    w.write_record(&header)?;
    for (k, row) in trace.iter().enumerate() {
        w.write_record(std::iter::once(k.to_string()).chain(row.iter().map(u64::to_string)))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Row-labelled float matrix with a `label_1..` header.
pub fn write_matrix_csv(path: &Path, corner: &str, col_prefix: &str, row_labels: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let n = rows.first().map_or(0, Vec::len);
    w.write_record(std::iter::once(corner.to_string()).chain((1..=n).map(|j| format!("{col_prefix}{j}"))))?;
    for (label, row) in row_labels.iter().zip(rows) {
        w.write_record(std::iter::once(label.clone()).chain(row.iter().map(f64::to_string)))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSummary {
    pub node: usize,
    pub label: String,
    pub mu: f64,
    pub beta: f64,
    pub alpha: Vec<f64>,
    pub mu_sd: f64,
    pub beta_sd: f64,
    pub alpha_sd: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSummary {
    pub config: FilterConfig,
    pub steps: usize,
    pub nodes: Vec<NodeSummary>,
}

impl FilterSummary {
    pub fn of(cfg: &FilterConfig, state: &FilterState, labels: &[String]) -> Self {
        let nodes = state
            .ensembles
            .iter()
            .zip(labels)
            .map(|(e, label)| {
                let mean = e.param_means();
                let sd: Vec<f64> = e.param_variances().iter().map(|v| v.sqrt()).collect();
                NodeSummary {
                    node: e.node_index,
                    label: label.clone(),
                    mu: mean[0],
                    beta: mean[1],
                    alpha: mean[ALPHA..].to_vec(),
                    mu_sd: sd[0],
                    beta_sd: sd[1],
                    alpha_sd: sd[ALPHA..].to_vec(),
                }
            })
            .collect();
        FilterSummary {
            config: cfg.clone(),
            steps: state.step,
            nodes,
        }
    }

    pub fn alpha_mean(&self) -> Vec<Vec<f64>> {
        self.nodes.iter().map(|n| n.alpha.clone()).collect()
    }
}

/// Per-step analysis diagnostics. `rmse_norm` is written when supplied,
/// keyed by `(step, node)` in the same order as `records`.
pub fn write_diagnostics(path: &Path, records: &[DiagnosticRecord], rmse_norm: Option<&[Option<f64>]>) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "step",
        "node",
        "prior_mean",
        "posterior_mean",
        "prior_rel_var",
        "posterior_rel_var",
        "innovation",
        "degenerate",
        "rmse_norm",
    ])?;
    for (k, r) in records.iter().enumerate() {
        let AnalysisDiagnostics {
            prior_mean,
            posterior_mean,
            prior_rel_var,
            posterior_rel_var,
            innovation,
            degenerate,
        } = r.diag;
        let rmse = rmse_norm
            .and_then(|v| v.get(k).copied().flatten())
            .map_or(String::new(), |v| v.to_string());
        w.write_record([
            r.step.to_string(),
            (r.node + 1).to_string(),
            prior_mean.to_string(),
            posterior_mean.to_string(),
            prior_rel_var.to_string(),
            posterior_rel_var.to_string(),
            innovation.to_string(),
            degenerate.to_string(),
            rmse,
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SnapshotMeta {
    step: usize,
    m: usize,
    ensemble_size: usize,
    prev_counts: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    node_labels: Option<Vec<String>>,
}

/// Writes `node_<i>.csv` (one row per member: lambda, mu, beta, alpha_1..)
/// and `state.json` into `dir`. Floats use shortest round-trip formatting,
/// so [`read_snapshot`] restores the state exactly.
pub fn write_snapshot(dir: &Path, state: &FilterState, labels: Option<&[String]>) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let m = state.m();
    let mut header = vec!["lambda".to_string(), "mu".to_string(), "beta".to_string()];
    header.extend((1..=m).map(|j| format!("alpha_{j}")));
    for e in &state.ensembles {
        let path = dir.join(format!("node_{}.csv", e.node_index + 1));
        let mut w = csv_writer(&path)?;
        w.write_record(&header)?;
        for (s, row) in e.members().enumerate() {
            w.write_record(std::iter::once(e.lambda[s]).chain(row.iter().copied()).map(|v| v.to_string()))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    let meta = SnapshotMeta {
        step: state.step,
        m,
        ensemble_size: state.ensembles[0].size(),
        prev_counts: state.prev_counts.clone(),
        node_labels: labels.map(<[String]>::to_vec),
    };
    write_json(&dir.join("state.json"), &meta)
}

pub fn read_snapshot(dir: &Path) -> Result<FilterState> {
    read_labelled_snapshot(dir).map(|(s, _)| s)
}

/// Snapshot state plus the node labels stored with it, if any.
pub fn read_labelled_snapshot(dir: &Path) -> Result<(FilterState, Option<Vec<String>>)> {
    let meta: SnapshotMeta = read_json(&dir.join("state.json"))?;
    let dim = meta.m + ALPHA;
    let mut ensembles = Vec::with_capacity(meta.m);
    for i in 0..meta.m {
        let path = dir.join(format!("node_{}.csv", i + 1));
        let mut r = csv_reader(&path)?;
        let mut lambda = Vec::with_capacity(meta.ensemble_size);
        let mut q = Vec::with_capacity(meta.ensemble_size * dim);
        for rec in r.records() {
            let rec = rec?;
            if rec.len() != dim + 1 {
                return Err(Error::Dimension {
                    what: "snapshot columns",
                    expected: dim + 1,
                    got: rec.len(),
                });
            }
            let mut vals = rec.iter().map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::invalid(format!("{}: bad number {f:?}", path.display())))
            });
            lambda.push(vals.next().expect("non-empty record")?);
            for v in vals {
                q.push(v?);
            }
        }
        if lambda.len() != meta.ensemble_size {
            return Err(Error::Dimension {
                what: "snapshot members",
                expected: meta.ensemble_size,
                got: lambda.len(),
            });
        }
        ensembles.push(NodeEnsemble::new(i, lambda, q, dim)?);
    }
    let mut state = FilterState::new(ensembles)?;
    state.step = meta.step;
    state.prev_counts = meta.prev_counts;
    Ok((state, meta.node_labels))
}

/// Edge list `src,dst,weight,weight_sd` of the off-diagonal edges.
pub fn write_edges_csv(path: &Path, net: &InfluenceNetwork) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["src", "dst", "weight", "weight_sd"])?;
    for (src, dst, weight) in net.edges() {
        w.write_record([
            net.node_labels[src].clone(),
            net.node_labels[dst].clone(),
            weight.to_string(),
            net.edge_sd[dst][src].to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct NetworkJson<'a> {
    #[serde(flatten)]
    net: &'a InfluenceNetwork,
    self_excitation: Vec<f64>,
}

pub fn write_network_json(path: &Path, net: &InfluenceNetwork) -> Result<()> {
    write_json(
        path,
        &NetworkJson {
            net,
            self_excitation: net.self_excitation(),
        },
    )
}

/// `rank,node_1..`: row `r` counts the members placing each node at rank `r`.
pub fn write_rank_distribution(path: &Path, dist: &RankDistribution, labels: &[String]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(std::iter::once("rank".to_string()).chain(labels.iter().cloned()))?;
    for (r, row) in dist.counts.iter().enumerate() {
        w.write_record(std::iter::once((r + 1).to_string()).chain(row.iter().map(u64::to_string)))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |v| v.to_string())
}

/// Node-level error and variance-reduction curves.
pub fn write_error_csv(path: &Path, report: &ErrorReport) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "step",
        "node",
        "rmse_baseline",
        "rmse_decay",
        "rmse_excitation",
        "rmse_overall",
        "var_baseline",
        "var_decay",
        "var_excitation",
    ])?;
    for n in &report.nodes {
        w.write_record([
            n.step.to_string(),
            (n.node + 1).to_string(),
            opt(n.baseline),
            opt(n.decay),
            opt(n.excitation),
            opt(n.overall),
            opt(n.var_baseline),
            opt(n.var_decay),
            opt(n.var_excitation),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_frobenius_csv(path: &Path, report: &ErrorReport) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["step", "scaled_frobenius"])?;
    for s in &report.steps {
        w.write_record([s.step.to_string(), s.scaled_frobenius.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
