//! DirectLiNGAM causal ordering on VAR residuals and the two-stage
//! composition producing instantaneous and lagged structural matrices.
//!
//! Stage 1 (module [`crate::var`]) leaves reduced-form residuals `z`. Stage 2
//! orders the variables by repeatedly extracting the one most independent of
//! the residuals of regressing the others on it, estimates the instantaneous
//! matrix `W0` by OLS along that ordering, and maps the VAR coefficient
//! matrices `M^l` into structural form via `W^l = (I - W0) M^l`.
//!
//! Independence is scored with the maximum-entropy differential-entropy
//! approximation `H(u) ~= H_gauss - k1 (E[log cosh u] - gamma)^2
//! - k2 (E[u exp(-u^2/2)])^2`.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg;
use crate::panel::ReturnPanel;
use crate::var::{fit_var, VarModel};

const K1: f64 = 79.047;
const K2: f64 = 7.4129;
const GAMMA: f64 = 0.37457;

/// Centered residual series, one row per variable.
#[derive(Debug, Clone)]
pub struct ResidualPanel {
    values: DMatrix<f64>,
    names: Vec<String>,
}

impl ResidualPanel {
    /// Builds a residual panel, centering each variable's series.
    pub fn new(mut values: DMatrix<f64>, names: Vec<String>) -> Result<Self> {
        if values.nrows() != names.len() {
            return Err(Error::DimensionMismatch("residual rows vs names".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("residual panel"));
        }
        let m = values.ncols() as f64;
        for i in 0..values.nrows() {
            let mean = values.row(i).sum() / m;
            for j in 0..values.ncols() {
                values[(i, j)] -= mean;
            }
        }
        Ok(Self { values, names })
    }

    pub fn from_var(model: &VarModel) -> Self {
        // VAR residuals are centered by the intercept fit already
        Self { values: model.residuals.clone(), names: model.names.clone() }
    }

    pub fn n_vars(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_obs(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    fn row_vec(&self, i: usize) -> Vec<f64> {
        self.values.row(i).iter().copied().collect()
    }
}

/// Estimated structural model: instantaneous matrix, lagged matrices, and
/// the causal ordering that identifies them.
#[derive(Debug, Clone)]
pub struct CausalModel {
    pub lag: usize,
    pub names: Vec<String>,
    /// Instantaneous effects; `w0[(i, j)]` is the effect of variable `j` on
    /// variable `i` at the same time step. Zero diagonal; entries not
    /// permitted by the ordering are structural (exact) zeros.
    pub w0: DMatrix<f64>,
    /// Lagged structural effects, `w[l-1] = (I - W0) M^l`.
    pub w: Vec<DMatrix<f64>>,
    /// Causal ordering (variable indices from exogenous to sink).
    pub ordering: Vec<usize>,
    /// The reduced-form stage the model was built from.
    pub var: VarModel,
}

impl CausalModel {
    /// True iff `P W0 P'` is strictly lower triangular for the permutation
    /// induced by `ordering`, checking structural zeros exactly.
    pub fn verify_acyclic(&self) -> bool {
        let n = self.names.len();
        let mut position = vec![0usize; n];
        for (pos, &v) in self.ordering.iter().enumerate() {
            position[v] = pos;
        }
        for i in 0..n {
            for j in 0..n {
                if position[j] >= position[i] && self.w0[(i, j)] != 0.0 {
                    return false;
                }
            }
        }
        true
    }
}

/// Maximum-entropy approximation of the differential entropy of a centered,
/// unit-variance sample. For a standard Gaussian the value is
/// `(1 + log 2 pi) / 2`; any departure from Gaussianity lowers it.
pub fn entropy_approx(u: &[f64]) -> Result<f64> {
    if u.len() < 50 {
        return Err(Error::InsufficientData("entropy_approx needs at least 50 values".into()));
    }
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("entropy_approx input"));
    }
    let var = linalg::var_pop(u);
    if !(0.99..=1.01).contains(&var) {
        return Err(Error::Numerical(format!(
            "entropy_approx expects unit variance input, got {var:.4}"
        )));
    }
    let n = u.len() as f64;
    let mut log_cosh_sum = 0.0;
    let mut gauss_sum = 0.0;
    for &v in u {
        // log cosh v, stable for large |v|
        let a = v.abs();
        log_cosh_sum += a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2;
        gauss_sum += v * (-0.5 * v * v).exp();
    }
    let h_gauss = 0.5 * (1.0 + (2.0 * std::f64::consts::PI).ln());
    let t1 = log_cosh_sum / n - GAMMA;
    let t2 = gauss_sum / n;
    Ok(h_gauss - K1 * t1 * t1 - K2 * t2 * t2)
}

/// Residual of regressing `z_j` on `z_i`:
/// `z_j - (cov(z_j, z_i) / var(z_i)) z_i`. The result has zero sample
/// covariance with `z_i`.
pub fn pairwise_residual(z_j: &[f64], z_i: &[f64]) -> Result<Vec<f64>> {
    if z_j.len() != z_i.len() {
        return Err(Error::DimensionMismatch("pairwise_residual inputs".into()));
    }
    let var = linalg::var_pop(z_i);
    if var <= 0.0 {
        return Err(Error::ZeroVariance("pairwise_residual regressor".into()));
    }
    let b = linalg::cov_pop(z_j, z_i) / var;
    Ok(z_j.iter().zip(z_i).map(|(a, c)| a - b * c).collect())
}

/// Working state of the iterative ordering: standardized columns of the
/// not-yet-extracted variables.
pub(crate) struct OrderingState {
    cols: Vec<Vec<f64>>,
    remaining: Vec<usize>,
}

impl OrderingState {
    pub(crate) fn new(res: &ResidualPanel) -> Result<Self> {
        let cols = (0..res.n_vars())
            .map(|i| linalg::standardize(&res.row_vec(i)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { cols, remaining: (0..res.n_vars()).collect() })
    }

    pub(crate) fn remaining(&self) -> &[usize] {
        &self.remaining
    }

    /// Total dependence score of every remaining candidate.
    ///
    /// For candidate `i` the score accumulates `min(0, d_ij)^2` over the
    /// other variables `j`, where `d_ij` contrasts the entropies of the two
    /// regression directions; it is zero when `i` looks exogenous against
    /// every `j`, negative evidence otherwise.
    pub(crate) fn step_scores(&self) -> Result<Vec<f64>> {
        let k = self.cols.len();
        if k == 1 {
            return Ok(vec![0.0]);
        }
        let entropies: Vec<f64> =
            self.cols.iter().map(|c| entropy_approx(c)).collect::<Result<Vec<_>>>()?;
        // antisymmetric pair contrasts d[(a, b)] for a < b
        let pairs: Vec<(usize, usize)> =
            (0..k).flat_map(|a| (a + 1..k).map(move |b| (a, b))).collect();
        let contrasts: Vec<f64> = pairs
            .par_iter()
            .map(|&(a, b)| self.pair_contrast(a, b, entropies[a], entropies[b]))
            .collect::<Result<Vec<_>>>()?;
        let mut scores = vec![0.0; k];
        for (&(a, b), &d) in pairs.iter().zip(&contrasts) {
            let neg = d.min(0.0);
            scores[a] += neg * neg;
            let neg = (-d).min(0.0);
            scores[b] += neg * neg;
        }
        Ok(scores)
    }

    /// Entropy contrast of the two regression directions between positions
    /// `a` and `b`: positive favours `a` as the upstream variable.
    fn pair_contrast(&self, a: usize, b: usize, h_a: f64, h_b: f64) -> Result<f64> {
        let r_a_on_b = linalg::standardize(&pairwise_residual(&self.cols[a], &self.cols[b])?)?;
        let r_b_on_a = linalg::standardize(&pairwise_residual(&self.cols[b], &self.cols[a])?)?;
        Ok((h_b + entropy_approx(&r_a_on_b)?) - (h_a + entropy_approx(&r_b_on_a)?))
    }

    /// Score of a single candidate position (used by the exhaustive oracle).
    pub(crate) fn candidate_score(&self, pos: usize) -> Result<f64> {
        let k = self.cols.len();
        if k == 1 {
            return Ok(0.0);
        }
        let h_cand = entropy_approx(&self.cols[pos])?;
        let mut total = 0.0;
        for j in 0..k {
            if j == pos {
                continue;
            }
            let h_j = entropy_approx(&self.cols[j])?;
            let d = self.pair_contrast(pos, j, h_cand, h_j)?;
            let neg = d.min(0.0);
            total += neg * neg;
        }
        Ok(total)
    }

    /// Extracts the candidate at `pos`: the others are replaced by their
    /// standardized residuals against it.
    pub(crate) fn extract(&mut self, pos: usize) -> Result<usize> {
        let selected = self.cols.remove(pos);
        let original = self.remaining.remove(pos);
        for col in self.cols.iter_mut() {
            *col = linalg::standardize(&pairwise_residual(col, &selected)?)?;
        }
        Ok(original)
    }
}

/// DirectLiNGAM causal ordering: repeatedly appends the variable most
/// independent of the residuals of regressing the remaining variables on it.
/// Ties break towards the lowest original index.
pub fn causal_order(res: &ResidualPanel) -> Result<Vec<usize>> {
    let n = res.n_vars();
    if n == 0 {
        return Err(Error::InsufficientData("empty residual panel".into()));
    }
    if n == 1 {
        return Ok(vec![0]);
    }
    let mut state = OrderingState::new(res)?;
    let mut ordering = Vec::with_capacity(n);
    while state.remaining().len() > 1 {
        let scores = state.step_scores()?;
        let mut best = 0usize;
        for (pos, s) in scores.iter().enumerate() {
            if *s < scores[best]
                || (*s == scores[best] && state.remaining()[pos] < state.remaining()[best])
            {
                best = pos;
            }
        }
        ordering.push(state.extract(best)?);
    }
    ordering.push(state.remaining()[0]);
    Ok(ordering)
}

/// Estimates the instantaneous matrix given an ordering: each variable is
/// regressed by OLS on all its predecessors in `ordering`; entries for
/// non-predecessors are exact zeros. No pruning or thresholding is applied.
pub fn estimate_w0(res: &ResidualPanel, ordering: &[usize]) -> Result<DMatrix<f64>> {
    let n = res.n_vars();
    let m = res.n_obs();
    if ordering.len() != n {
        return Err(Error::DimensionMismatch("ordering length vs variables".into()));
    }
    let mut seen = vec![false; n];
    for &v in ordering {
        if v >= n || seen[v] {
            return Err(Error::Config("ordering is not a permutation".into()));
        }
        seen[v] = true;
    }

    let mut w0 = DMatrix::<f64>::zeros(n, n);
    for pos in 1..n {
        let target = ordering[pos];
        let parents = &ordering[..pos];
        let mut x = DMatrix::<f64>::zeros(m, pos + 1);
        for row in 0..m {
            x[(row, 0)] = 1.0;
            for (c, &p) in parents.iter().enumerate() {
                x[(row, c + 1)] = res.values()[(p, row)];
            }
        }
        let y = nalgebra::DVector::from_iterator(m, res.values().row(target).iter().copied());
        let names = res.names();
        let beta = linalg::ols_solve(&x, &y, |c| {
            if c == 0 { "intercept".to_string() } else { names[parents[c - 1]].clone() }
        })?;
        for (c, &p) in parents.iter().enumerate() {
            w0[(target, p)] = beta[c + 1];
        }
    }
    Ok(w0)
}

/// Full two-stage estimation: VAR fit, DirectLiNGAM on the residuals, and
/// structural composition `W^l = (I - W0) M^l`.
pub fn var_lingam(panel: &ReturnPanel, lag: usize) -> Result<CausalModel> {
    let var = fit_var(panel, lag)?;
    let residuals = ResidualPanel::from_var(&var);
    let ordering = causal_order(&residuals)?;
    let w0 = estimate_w0(&residuals, &ordering)?;
    let n = panel.n_factors();
    let identity = DMatrix::<f64>::identity(n, n);
    let mixing = &identity - &w0;
    let w: Vec<DMatrix<f64>> = var.coef.iter().map(|m| &mixing * m).collect();
    let model = CausalModel { lag, names: panel.names().to_vec(), w0, w, ordering, var };
    debug_assert!(model.verify_acyclic());
    Ok(model)
}

/// Topological order of the nonzero pattern of an instantaneous matrix, or
/// `None` if the pattern contains a cycle. Entry `(i, j) != 0` is read as an
/// edge `j -> i`.
pub fn dag_order(w0: &DMatrix<f64>) -> Option<Vec<usize>> {
    let n = w0.nrows();
    let mut in_deg = vec![0usize; n]; // number of parents not yet emitted
    for i in 0..n {
        for j in 0..n {
            if i != j && w0[(i, j)] != 0.0 {
                in_deg[i] += 1;
            }
        }
    }
    let mut order = Vec::with_capacity(n);
    let mut ready: Vec<usize> = (0..n).filter(|&i| in_deg[i] == 0).collect();
    ready.reverse();
    while let Some(v) = ready.pop() {
        order.push(v);
        for i in 0..n {
            if i != v && w0[(i, v)] != 0.0 {
                in_deg[i] -= 1;
                if in_deg[i] == 0 {
                    ready.push(i);
                }
            }
        }
    }
    if order.len() == n {
        Some(order)
    } else {
        None
    }
}
