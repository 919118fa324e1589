//! Reduced-form vector autoregression: per-equation OLS estimation, BIC lag
//! selection, residual extraction.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::panel::ReturnPanel;

/// A fitted VAR(L) model.
#[derive(Debug, Clone)]
pub struct VarModel {
    pub lag: usize,
    pub names: Vec<String>,
    pub intercept: DVector<f64>,
    /// `coef[l-1]` maps `y_{t-l}` to `y_t`.
    pub coef: Vec<DMatrix<f64>>,
    /// `N x (T - L)` residual matrix.
    pub residuals: DMatrix<f64>,
    /// Gaussian log-likelihood at the MLE residual covariance.
    pub loglik_proxy: f64,
    /// Number of estimated coefficients, `N * (N*L + 1)`.
    pub n_params: usize,
}

impl VarModel {
    /// Effective sample size (number of residual columns).
    pub fn t_effective(&self) -> usize {
        self.residuals.ncols()
    }

    /// MLE residual covariance `E E' / m`.
    pub fn residual_covariance(&self) -> DMatrix<f64> {
        let m = self.residuals.ncols() as f64;
        &self.residuals * self.residuals.transpose() / m
    }
}

/// Fits a VAR(`lag`) by equationwise ordinary least squares with intercept.
pub fn fit_var(panel: &ReturnPanel, lag: usize) -> Result<VarModel> {
    let n = panel.n_factors();
    let t = panel.n_obs();
    if lag == 0 {
        return Err(Error::Config("VAR lag must be at least 1".into()));
    }
    if t <= lag || t - lag <= n * lag + 1 {
        return Err(Error::InsufficientData(format!(
            "VAR({lag}) with {n} factors needs more than {} observations, got {t}",
            lag + n * lag + 1
        )));
    }
    let m = t - lag; // rows of the regression
    let p = n * lag + 1; // intercept + all lagged values
    let y = panel.values();

    let mut x = DMatrix::<f64>::zeros(m, p);
    for row in 0..m {
        let t_idx = row + lag;
        x[(row, 0)] = 1.0;
        for l in 1..=lag {
            for j in 0..n {
                x[(row, 1 + (l - 1) * n + j)] = y[(j, t_idx - l)];
            }
        }
    }
    let label = |col: usize| -> String {
        if col == 0 {
            "intercept".to_string()
        } else {
            let l = (col - 1) / n + 1;
            let j = (col - 1) % n;
            format!("{}(lag {})", panel.names()[j], l)
        }
    };

    let mut intercept = DVector::<f64>::zeros(n);
    let mut coef = vec![DMatrix::<f64>::zeros(n, n); lag];
    let mut residuals = DMatrix::<f64>::zeros(n, m);
    for i in 0..n {
        let yi = DVector::from_iterator(m, (0..m).map(|row| y[(i, row + lag)]));
        let beta = linalg::ols_solve(&x, &yi, label)?;
        intercept[i] = beta[0];
        for l in 1..=lag {
            for j in 0..n {
                coef[l - 1][(i, j)] = beta[1 + (l - 1) * n + j];
            }
        }
        let fitted = &x * &beta;
        for row in 0..m {
            residuals[(i, row)] = yi[row] - fitted[row];
        }
    }

    let n_params = n * p;
    let sigma = &residuals * residuals.transpose() / m as f64;
    let loglik_proxy = match log_det_spd(&sigma) {
        Some(ld) => {
            let nn = n as f64;
            -0.5 * m as f64 * (nn * (2.0 * std::f64::consts::PI).ln() + ld + nn)
        }
        None => f64::NEG_INFINITY,
    };

    Ok(VarModel {
        lag,
        names: panel.names().to_vec(),
        intercept,
        coef,
        residuals,
        loglik_proxy,
        n_params,
    })
}

fn log_det_spd(a: &DMatrix<f64>) -> Option<f64> {
    let chol = a.clone().cholesky()?;
    let l = chol.l();
    let mut ld = 0.0;
    for i in 0..a.nrows() {
        let d = l[(i, i)];
        if d <= 0.0 || !d.is_finite() {
            return None;
        }
        ld += 2.0 * d.ln();
    }
    Some(ld)
}

/// Bayesian information criterion of a fitted model on `t_effective`
/// observations: `t_eff * log det(Sigma) + n_params * log(t_eff)`.
/// Lower is better.
pub fn bic(model: &VarModel, t_effective: usize) -> Result<f64> {
    let sigma = model.residual_covariance();
    let ld = log_det_spd(&sigma).ok_or(Error::SingularCovariance)?;
    let t = t_effective as f64;
    Ok(t * ld + model.n_params as f64 * t.ln())
}

/// Selects the lag order in `1..=max_lag` by BIC.
///
/// All candidates are scored on the common effective sample: the first
/// `max_lag` observations are reserved as presample for every candidate, so
/// each fit explains exactly `T - max_lag` rows.
pub fn select_lag(panel: &ReturnPanel, max_lag: usize) -> Result<usize> {
    if max_lag == 0 {
        return Err(Error::Config("max_lag must be at least 1".into()));
    }
    let t = panel.n_obs();
    if t <= max_lag + 1 {
        return Err(Error::InsufficientData("panel shorter than max_lag".into()));
    }
    let t_eff = t - max_lag;
    let mut best: Option<(usize, f64)> = None;
    for l in 1..=max_lag {
        let sub = panel.on_dates(&panel.dates()[max_lag - l..])?;
        let model = fit_var(&sub, l)?;
        debug_assert_eq!(model.t_effective(), t_eff);
        let score = bic(&model, t_eff)?;
        let better = match best {
            None => true,
            Some((_, s)) => score < s,
        };
        if better {
            best = Some((l, score));
        }
    }
    Ok(best.expect("at least one candidate").0)
}
