//! Ensemble regression of parameter samples on intensity innovations.

use crate::error::{Error, Result};

/// Updates the `size x dim` row-major parameter block `q` in place from the
/// forecast and analysed intensities of the same members. Entries are
/// clamped below at `floor`. Returns the gain vector, or `None` when both
/// intensity ensembles have zero spread and `q` was left untouched.
pub fn enkf_regress_in_place(
    q: &mut [f64],
    dim: usize,
    lambda_f: &[f64],
    lambda_a: &[f64],
    floor: f64,
) -> Result<Option<Vec<f64>>> {
    let size = lambda_f.len();
    if lambda_a.len() != size {
        return Err(Error::Dimension {
            what: "analysed intensity ensemble",
            expected: size,
            got: lambda_a.len(),
        });
    }
    if dim == 0 || q.len() != size * dim {
        return Err(Error::Dimension {
            what: "parameter block",
            expected: size * dim,
            got: q.len(),
        });
    }
    if size < 2 {
        return Err(Error::invalid(format!("ensemble size {size} must be >= 2")));
    }
    let mean_f = lambda_f.iter().sum::<f64>() / size as f64;
    let mean_a = lambda_a.iter().sum::<f64>() / size as f64;
    let var_f: f64 = lambda_f.iter().map(|l| (l - mean_f).powi(2)).sum();
    let var_a: f64 = lambda_a.iter().map(|l| (l - mean_a).powi(2)).sum();
    let denom = var_f + var_a;
    if denom == 0.0 {
        return Ok(None);
    }

    // Cross-covariance with q measured from the first member; the offset
    // cancels against the centred intensity deviations and keeps identical
    // members at exactly zero.
    let mut gain = vec![0.0; dim];
    let (reference, _) = q.split_at(dim);
    let reference = reference.to_vec();
    for (row, lf) in q.chunks_exact(dim).zip(lambda_f) {
        let y = lf - mean_f;
        for ((g, v), r) in gain.iter_mut().zip(row).zip(&reference) {
            *g += (v - r) * y;
        }
    }
    for g in gain.iter_mut() {
        *g /= denom;
    }
    for ((row, lf), la) in q.chunks_exact_mut(dim).zip(lambda_f).zip(lambda_a) {
        let innov = la - lf;
        for (v, g) in row.iter_mut().zip(&gain) {
            *v = (*v + g * innov).max(floor);
        }
    }
    Ok(Some(gain))
}

/// Copying variant of [`enkf_regress_in_place`] with negative entries
/// clamped to zero.
pub fn enkf_regress(q: &[f64], dim: usize, lambda_f: &[f64], lambda_a: &[f64]) -> Result<Vec<f64>> {
    let mut out = q.to_vec();
    enkf_regress_in_place(&mut out, dim, lambda_f, lambda_a, 0.0)?;
    Ok(out)
}
