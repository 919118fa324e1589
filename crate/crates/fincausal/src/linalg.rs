//! Small shared numeric helpers: OLS with rank diagnostics, moments,
//! correlation, quantiles.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative pivot tolerance for rank checks.
const RANK_TOL: f64 = 1e-10;

pub(crate) fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Population variance (1/n).
pub(crate) fn var_pop(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64
}

/// Sample variance (1/(n-1)).
pub(crate) fn var_sample(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Population covariance (1/n), matching [`var_pop`].
pub(crate) fn cov_pop(x: &[f64], y: &[f64]) -> f64 {
    let mx = mean(x);
    let my = mean(y);
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - mx) * (b - my))
        .sum::<f64>()
        / x.len() as f64
}

/// Pearson correlation; errors on zero variance of either input.
pub(crate) fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let vx = var_pop(x);
    let vy = var_pop(y);
    if vx <= 0.0 || vy <= 0.0 {
        return Err(Error::ZeroVariance("correlation input".into()));
    }
    Ok(cov_pop(x, y) / (vx * vy).sqrt())
}

/// Solves the least-squares problem `min ||y - X b||` through the normal
/// equations. On rank deficiency, reports which columns are redundant.
///
/// `column_label(j)` names column `j` in the error message.
pub(crate) fn ols_solve(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    column_label: impl Fn(usize) -> String,
) -> Result<DVector<f64>> {
    let gram = x.transpose() * x;
    let rhs = x.transpose() * y;
    match solve_spd(&gram, &rhs) {
        Some(beta) => Ok(beta),
        None => Err(Error::RankDeficient { columns: deficient_columns(&gram, column_label) }),
    }
}

/// Cholesky solve of a symmetric positive-definite system, `None` if the
/// matrix is numerically singular.
pub(crate) fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    if !spd_well_conditioned(a) {
        return None;
    }
    a.clone().cholesky().map(|c| c.solve(b))
}

/// Inverse of a symmetric positive-definite matrix, `None` if singular.
pub(crate) fn invert_spd(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if !spd_well_conditioned(a) {
        return None;
    }
    a.clone().cholesky().map(|c| c.inverse())
}

/// Guard against Gram matrices that Cholesky happens to factor despite being
/// numerically rank deficient.
fn spd_well_conditioned(a: &DMatrix<f64>) -> bool {
    let max_diag = (0..a.nrows()).map(|i| a[(i, i)].abs()).fold(0.0f64, f64::max);
    if max_diag <= 0.0 {
        return false;
    }
    match a.clone().cholesky() {
        Some(c) => {
            let l = c.l();
            (0..a.nrows()).all(|i| l[(i, i)] * l[(i, i)] > RANK_TOL * max_diag)
        }
        None => false,
    }
}

/// Greedy forward selection on the Gram matrix: returns the columns that are
/// (numerically) linear combinations of the ones already kept.
fn deficient_columns(gram: &DMatrix<f64>, column_label: impl Fn(usize) -> String) -> Vec<String> {
    let p = gram.nrows();
    let max_diag = (0..p).map(|i| gram[(i, i)].abs()).fold(0.0f64, f64::max);
    let mut kept: Vec<usize> = Vec::new();
    let mut offending = Vec::new();
    for j in 0..p {
        let mut trial = kept.clone();
        trial.push(j);
        let sub = gram.select_rows(&trial).select_columns(&trial);
        let ok = match sub.clone().cholesky() {
            Some(c) => {
                let l = c.l();
                let last = trial.len() - 1;
                l[(last, last)] * l[(last, last)] > RANK_TOL * max_diag.max(1e-300)
            }
            None => false,
        };
        if ok {
            kept.push(j);
        } else {
            offending.push(column_label(j));
        }
    }
    if offending.is_empty() {
        offending.push("<unidentified>".to_string());
    }
    offending
}

/// Quantile conventions for tail statistics. The default matches linear
/// interpolation between order statistics (R type 7).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum QuantileConvention {
    #[default]
    Linear,
    Lower,
    Nearest,
}

/// Quantile of `sorted` (ascending) at probability `q` in `[0, 1]`.
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64, convention: QuantileConvention) -> f64 {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q;
    match convention {
        QuantileConvention::Linear => {
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        }
        QuantileConvention::Lower => sorted[h.floor() as usize],
        QuantileConvention::Nearest => sorted[h.round() as usize],
    }
}

/// Standardizes to zero mean, unit population variance. Errors on zero
/// variance.
pub(crate) fn standardize(x: &[f64]) -> Result<Vec<f64>> {
    let m = mean(x);
    let sd = var_pop(x).sqrt();
    if sd <= 0.0 || !sd.is_finite() {
        return Err(Error::ZeroVariance("standardization input".into()));
    }
    Ok(x.iter().map(|v| (v - m) / sd).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ols_recovers_exact_coefficients() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let y = DVector::from_vec(vec![1.0, 3.0, 5.0, 7.0]);
        let beta = ols_solve(&x, &y, |j| format!("c{j}")).unwrap();
        assert_abs_diff_eq!(beta[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(beta[1], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn ols_names_collinear_columns() {
        // third column duplicates the second
        let x = DMatrix::from_row_slice(
            4,
            3,
            &[1.0, 1.0, 1.0, 1.0, 2.0, 2.0, 1.0, 3.0, 3.0, 1.0, 4.0, 4.0],
        );
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        match ols_solve(&x, &y, |j| format!("c{j}")) {
            Err(Error::RankDeficient { columns }) => assert_eq!(columns, vec!["c2".to_string()]),
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }

    #[test]
    fn quantile_linear_interpolates() {
        let v: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        assert_abs_diff_eq!(
            quantile_sorted(&v, 0.95, QuantileConvention::Linear),
            95.05,
            epsilon = 1e-12
        );
        assert_eq!(quantile_sorted(&v, 0.0, QuantileConvention::Linear), 1.0);
        assert_eq!(quantile_sorted(&v, 1.0, QuantileConvention::Linear), 100.0);
        assert_eq!(quantile_sorted(&[7.0], 0.3, QuantileConvention::Linear), 7.0);
    }
}
