//! Poisson-Gamma analysis of an intensity ensemble against one count.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Law of the perturbed observations fed to the stochastic update.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbationLaw {
    /// `gamma(shape dN, rate 1)`: mean `dN`, relative variance `1/dN`. This
    /// is the law under which the ensemble reproduces the conjugate
    /// posterior spread.
    #[default]
    PoissonMatched,
    /// `gamma(shape dN^2, rate dN)`: mean `dN`, variance 1.
    UnitVariance,
}

impl PerturbationLaw {
    fn gamma(self, dn: u64) -> Result<Gamma<f64>> {
        let n = dn as f64;
        let (shape, scale) = match self {
            PerturbationLaw::PoissonMatched => (n, 1.0),
            PerturbationLaw::UnitVariance => (n * n, 1.0 / n),
        };
        Gamma::new(shape, scale).map_err(|e| Error::invalid(format!("perturbation gamma: {e}")))
    }
}

/// Exact gamma-conjugate update of an intensity with mean `mean` and
/// relative variance `rel_var` after observing `dn` events in a bin of
/// length `dt`. Returns `(mean, rel_var)` of the posterior.
pub fn analytic_posterior(mean: f64, rel_var: f64, dn: u64, dt: f64) -> Result<(f64, f64)> {
    if !(mean.is_finite() && mean > 0.0) {
        return Err(Error::invalid(format!("prior mean {mean} must be > 0")));
    }
    if !(rel_var.is_finite() && rel_var > 0.0) {
        return Err(Error::invalid(format!("prior relative variance {rel_var} must be > 0")));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid(format!("dt = {dt} must be > 0")));
    }
    let precision = 1.0 / rel_var;
    let n = dn as f64;
    let post_mean = mean + mean / (precision + mean * dt) * (n - mean * dt);
    let post_rel_var = 1.0 / (precision + n);
    Ok((post_mean, post_rel_var))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedObservations {
    pub draws: Vec<f64>,
    pub mean: f64,
}

/// `size` independent perturbed observations of the count `dn`.
pub fn perturbed_observations<R: Rng + ?Sized>(
    dn: u64,
    size: usize,
    law: PerturbationLaw,
    rng: &mut R,
) -> Result<PerturbedObservations> {
    if dn == 0 {
        return Err(Error::invalid("perturbed observations need dN >= 1"));
    }
    if size < 2 {
        return Err(Error::invalid(format!("ensemble size {size} must be >= 2")));
    }
    let g = law.gamma(dn)?;
    let draws: Vec<f64> = (0..size).map(|_| g.sample(rng)).collect();
    let mean = draws.iter().sum::<f64>() / size as f64;
    Ok(PerturbedObservations { draws, mean })
}

/// Per-node record of one analysis step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisDiagnostics {
    pub prior_mean: f64,
    pub posterior_mean: f64,
    pub prior_rel_var: f64,
    /// Relative variance of the analysis deviations actually applied.
    pub posterior_rel_var: f64,
    /// `dN - prior_mean * dt`.
    pub innovation: f64,
    /// Set when the prior ensemble had no spread and only the mean formula
    /// could be applied.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct AnalysisOptions {
    pub dt: f64,
    pub law: PerturbationLaw,
    pub floor: f64,
}

/// Stochastic ensemble analysis; returns the updated members.
pub fn pg_analysis<R: Rng + ?Sized>(
    lambda_f: &[f64],
    dn: u64,
    opts: &AnalysisOptions,
    rng: &mut R,
) -> Result<(Vec<f64>, AnalysisDiagnostics)> {
    let mut out = vec![0.0; lambda_f.len()];
    let diag = pg_analysis_into(lambda_f, dn, opts, rng, &mut out)?;
    Ok((out, diag))
}

pub fn pg_analysis_into<R: Rng + ?Sized>(
    lambda_f: &[f64],
    dn: u64,
    opts: &AnalysisOptions,
    rng: &mut R,
    out: &mut [f64],
) -> Result<AnalysisDiagnostics> {
    let size = lambda_f.len();
    if size < 2 {
        return Err(Error::invalid(format!("ensemble size {size} must be >= 2")));
    }
    if out.len() != size {
        return Err(Error::Dimension {
            what: "analysis output",
            expected: size,
            got: out.len(),
        });
    }
    if let Some(l) = lambda_f.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
        return Err(Error::invalid(format!("forecast intensity {l} must be > 0")));
    }
    let dt = opts.dt;
    let n = dn as f64;
    let mean = lambda_f.iter().sum::<f64>() / size as f64;
    // out holds the relative deviations until the final pass
    for (u, l) in out.iter_mut().zip(lambda_f) {
        *u = (l - mean) / mean;
    }
    let rel_var = out.iter().map(|u| u * u).sum::<f64>() / (size - 1) as f64;
    let innovation = n - mean * dt;

    if rel_var == 0.0 {
        log::debug!("degenerate intensity ensemble (zero spread); mean-only update");
        out.fill(mean);
        return Ok(AnalysisDiagnostics {
            prior_mean: mean,
            posterior_mean: mean,
            prior_rel_var: 0.0,
            posterior_rel_var: 0.0,
            innovation,
            degenerate: true,
        });
    }

    let post_mean = mean + mean / (1.0 / rel_var + mean * dt) * innovation;
    if dn > 0 {
        let gain = rel_var / (rel_var + 1.0 / n);
        let pert = perturbed_observations(dn, size, opts.law, rng)?;
        for (a, e) in out.iter_mut().zip(&pert.draws) {
            let t = (e - pert.mean) / pert.mean;
            *a += gain * (t - *a);
        }
    }
    let post_rel_var = out.iter().map(|a| a * a).sum::<f64>() / (size - 1) as f64;
    for a in out.iter_mut() {
        *a = (post_mean * (1.0 + *a)).max(opts.floor);
    }
    Ok(AnalysisDiagnostics {
        prior_mean: mean,
        posterior_mean: post_mean,
        prior_rel_var: rel_var,
        posterior_rel_var: post_rel_var,
        innovation,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{self, Domain};
    use approx::assert_abs_diff_eq;

    fn opts(dt: f64) -> AnalysisOptions {
        AnalysisOptions {
            dt,
            law: PerturbationLaw::PoissonMatched,
            floor: 1e-8,
        }
    }

    #[test]
    fn posterior_after_one_event() {
        let (m, r) = analytic_posterior(2.0, 0.5, 1, 0.1).unwrap();
        assert_abs_diff_eq!(m, 2.0 + 2.0 / 2.2 * 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(m, 2.727_272_727_272_727, epsilon = 1e-12);
        assert_abs_diff_eq!(r, 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn posterior_with_zero_innovation() {
        let (m, r) = analytic_posterior(10.0, 0.25, 1, 0.1).unwrap();
        assert_abs_diff_eq!(m, 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r, 1.0 / 5.0, epsilon = 1e-15);
    }

    #[test]
    fn posterior_without_events_keeps_relative_variance() {
        let (m, r) = analytic_posterior(2.0, 0.5, 0, 0.1).unwrap();
        assert_abs_diff_eq!(m, 1.818_181_818_181_818, epsilon = 1e-12);
        assert_eq!(r, 0.5);
    }

    #[test]
    fn posterior_rejects_bad_prior() {
        assert!(analytic_posterior(0.0, 0.5, 1, 0.1).is_err());
        assert!(analytic_posterior(1.0, 0.0, 1, 0.1).is_err());
        assert!(analytic_posterior(1.0, 0.5, 1, 0.0).is_err());
    }

    #[test]
    fn perturbed_observation_moments() {
        let size = 100_000;
        let mut rng = rng::stream(1, Domain::Analysis, 0, 0);
        let p = perturbed_observations(1, size, PerturbationLaw::UnitVariance, &mut rng).unwrap();
        assert!((p.mean - 1.0).abs() < 3.0 / (size as f64).sqrt());

        let p = perturbed_observations(4, size, PerturbationLaw::UnitVariance, &mut rng).unwrap();
        let var = p.draws.iter().map(|d| (d - p.mean).powi(2)).sum::<f64>() / (size - 1) as f64;
        assert!((var - 1.0).abs() < 0.05, "variance {var}");

        let p = perturbed_observations(4, size, PerturbationLaw::PoissonMatched, &mut rng).unwrap();
        let var = p.draws.iter().map(|d| (d - p.mean).powi(2)).sum::<f64>() / (size - 1) as f64;
        assert!((var - 4.0).abs() < 0.2, "variance {var}");
        assert!((p.mean - 4.0).abs() < 3.0 * (4.0 / size as f64).sqrt());
    }

    #[test]
    fn perturbed_observations_are_deterministic_and_validated() {
        let draw = || {
            let mut rng = rng::stream(9, Domain::Analysis, 3, 4);
            perturbed_observations(3, 16, PerturbationLaw::PoissonMatched, &mut rng).unwrap()
        };
        assert_eq!(draw(), draw());
        let mut rng = rng::stream(9, Domain::Analysis, 3, 4);
        assert!(perturbed_observations(0, 16, PerturbationLaw::PoissonMatched, &mut rng).is_err());
        assert!(perturbed_observations(2, 1, PerturbationLaw::PoissonMatched, &mut rng).is_err());
    }

    #[test]
    fn zero_count_only_shifts_the_mean() {
        // mean 2, relative variance exactly 0.5 for M = 3
        let lambda_f = [1.0, 2.0, 3.0];
        let mut rng = rng::stream(2, Domain::Analysis, 0, 0);
        let (post, diag) = pg_analysis(&lambda_f, 0, &opts(0.1), &mut rng).unwrap();
        assert_abs_diff_eq!(diag.prior_rel_var, 0.25, epsilon = 1e-15);
        let (m_expect, _) = analytic_posterior(2.0, 0.25, 0, 0.1).unwrap();
        assert_abs_diff_eq!(diag.posterior_mean, m_expect, epsilon = 1e-13);
        assert_eq!(diag.posterior_rel_var, diag.prior_rel_var);
        for (a, f) in post.iter().zip(&lambda_f) {
            assert_abs_diff_eq!((a - m_expect) / m_expect, (f - 2.0) / 2.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn zero_count_with_relative_variance_half() {
        // sample variance 2, mean 2: P_r = 0.5
        let lambda_f = [1.0, 3.0];
        let mut rng = rng::stream(2, Domain::Analysis, 0, 0);
        let (post, diag) = pg_analysis(&lambda_f, 0, &opts(0.1), &mut rng).unwrap();
        assert_abs_diff_eq!(diag.prior_rel_var, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(diag.posterior_mean, 1.818_181_818_181_818, epsilon = 1e-12);
        let mean_post = post.iter().sum::<f64>() / 2.0;
        assert_abs_diff_eq!(mean_post, 1.818_181_818_181_818, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_ensemble_is_fixed_point() {
        let lambda_f = [3.0; 8];
        let mut rng = rng::stream(2, Domain::Analysis, 0, 0);
        for dn in [0, 1, 5] {
            let (post, diag) = pg_analysis(&lambda_f, dn, &opts(0.1), &mut rng).unwrap();
            assert!(diag.degenerate);
            assert_eq!(post, lambda_f.to_vec());
        }
    }

    #[test]
    fn analysis_rejects_bad_ensembles() {
        let mut rng = rng::stream(2, Domain::Analysis, 0, 0);
        assert!(pg_analysis(&[1.0], 1, &opts(0.1), &mut rng).is_err());
        assert!(pg_analysis(&[1.0, -1.0], 1, &opts(0.1), &mut rng).is_err());
        assert!(pg_analysis(&[1.0, f64::NAN], 1, &opts(0.1), &mut rng).is_err());
    }

    #[test]
    fn analysis_members_stay_nonnegative() {
        // deviations are a convex mix of two quantities bounded below by -1
        let mut rng = rng::stream(5, Domain::Analysis, 0, 0);
        let g = Gamma::new(0.5, 4.0).unwrap();
        let lambda_f: Vec<f64> = (0..2000).map(|_| g.sample(&mut rng) + 1e-6).collect();
        for dn in [1, 3, 10] {
            let (post, _) = pg_analysis(&lambda_f, dn, &opts(0.5), &mut rng).unwrap();
            assert!(post.iter().all(|l| *l >= 1e-8));
        }
    }
}
