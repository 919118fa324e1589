//! Ground-truth structural VAR generators and brute-force oracles for
//! validating the estimators at desk scale.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lingam::{dag_order, OrderingState, ResidualPanel};
use crate::netinfer::FactorNetwork;
use crate::panel::{weekday_calendar, ReturnPanel};

/// Noise distribution of the generated disturbances (unit variance before
/// per-variable scaling).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Laplace,
    Uniform,
    StudentT { df: f64 },
    Gaussian,
}

/// Specification of a ground-truth structural VAR.
///
/// `w0` holds instantaneous effects (must describe a DAG), `w[l-1]` the
/// structural lag-`l` effects. The implied reduced-form VAR must be
/// stationary.
#[derive(Debug, Clone)]
pub struct SvarSpec {
    pub names: Vec<String>,
    pub lag: usize,
    pub n_obs: usize,
    pub w0: DMatrix<f64>,
    pub w: Vec<DMatrix<f64>>,
    pub noise: NoiseKind,
    pub noise_scale: Vec<f64>,
    pub seed: u64,
    pub burn_in: usize,
}

/// Default burn-in, generous for spectral radii up to 0.9.
pub const DEFAULT_BURN_IN: usize = 500;

impl SvarSpec {
    /// Random DAG instance: instantaneous and lagged edges drawn with
    /// probability `density`, coefficients of magnitude 0.3..0.7 with random
    /// sign, lagged matrices rescaled for stationarity.
    pub fn random_dag(
        n: usize,
        lag: usize,
        n_obs: usize,
        density: f64,
        noise: NoiseKind,
        seed: u64,
    ) -> Result<Self> {
        if n == 0 || lag == 0 {
            return Err(Error::Config("random_dag needs n >= 1 and lag >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_da6);
        // random causal ordering for the instantaneous layer
        let mut order: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let mut position = vec![0usize; n];
        for (pos, &v) in order.iter().enumerate() {
            position[v] = pos;
        }
        let mut draw = |rng: &mut ChaCha8Rng| {
            let magnitude = 0.3 + 0.4 * rng.random::<f64>();
            if rng.random::<bool>() { magnitude } else { -magnitude }
        };
        let mut w0 = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if position[j] < position[i] && rng.random::<f64>() < density {
                    w0[(i, j)] = draw(&mut rng);
                }
            }
        }
        let mut w = Vec::with_capacity(lag);
        for _ in 0..lag {
            let mut m = DMatrix::<f64>::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    if rng.random::<f64>() < density {
                        m[(i, j)] = draw(&mut rng);
                    }
                }
            }
            w.push(m);
        }
        let mut spec = SvarSpec {
            names: (0..n).map(|i| format!("F{}", i + 1)).collect(),
            lag,
            n_obs,
            w0,
            w,
            noise,
            noise_scale: vec![1.0; n],
            seed,
            burn_in: DEFAULT_BURN_IN,
        };
        // damp the lagged dynamics until the companion matrix is stable
        while spec.spectral_radius()? >= 0.9 {
            for m in spec.w.iter_mut() {
                *m *= 0.8;
            }
        }
        Ok(spec)
    }

    pub fn n_vars(&self) -> usize {
        self.names.len()
    }

    /// True edge set implied by the nonzero pattern.
    pub fn truth(&self) -> TruthAdjacency {
        let n = self.n_vars();
        let mut edges = BTreeSet::new();
        for i in 0..n {
            for j in 0..n {
                if self.w0[(i, j)] != 0.0 {
                    edges.insert(TrueEdge { src: j, dst: i, lag: 0 });
                }
                for l in 1..=self.lag {
                    if self.w[l - 1][(i, j)] != 0.0 {
                        edges.insert(TrueEdge { src: j, dst: i, lag: l as u32 });
                    }
                }
            }
        }
        TruthAdjacency { names: self.names.clone(), edges }
    }

    fn validate(&self) -> Result<()> {
        let n = self.n_vars();
        if self.w0.nrows() != n || self.w0.ncols() != n {
            return Err(Error::DimensionMismatch("w0 shape vs names".into()));
        }
        if self.w.len() != self.lag {
            return Err(Error::DimensionMismatch("lagged matrix count vs lag".into()));
        }
        if self.w.iter().any(|m| m.nrows() != n || m.ncols() != n) {
            return Err(Error::DimensionMismatch("lagged matrix shape".into()));
        }
        if self.noise_scale.len() != n || self.noise_scale.iter().any(|s| *s <= 0.0) {
            return Err(Error::Config("noise_scale must be positive per variable".into()));
        }
        if let NoiseKind::StudentT { df } = self.noise {
            if df <= 2.0 {
                return Err(Error::Config("StudentT noise needs df > 2 for finite variance".into()));
            }
        }
        if dag_order(&self.w0).is_none() {
            return Err(Error::CyclicStructure);
        }
        let rho = self.spectral_radius()?;
        if rho >= 1.0 {
            return Err(Error::NonStationary { rho });
        }
        Ok(())
    }

    /// Spectral radius of the companion matrix of the implied reduced-form
    /// VAR `M^l = (I - W0)^{-1} W^l`.
    fn spectral_radius(&self) -> Result<f64> {
        let n = self.n_vars();
        let identity = DMatrix::<f64>::identity(n, n);
        let mixing = (&identity - &self.w0)
            .try_inverse()
            .ok_or(Error::CyclicStructure)?;
        let reduced: Vec<DMatrix<f64>> = self.w.iter().map(|m| &mixing * m).collect();
        let dim = n * self.lag;
        let mut companion = DMatrix::<f64>::zeros(dim, dim);
        for (l, m) in reduced.iter().enumerate() {
            companion.view_mut((0, l * n), (n, n)).copy_from(m);
        }
        for i in n..dim {
            companion[(i, i - n)] = 1.0;
        }
        let rho = companion
            .complex_eigenvalues()
            .iter()
            .map(|e| e.norm())
            .fold(0.0f64, f64::max);
        Ok(rho)
    }
}

/// One true directed edge `src -> dst` at the given lag (indices into the
/// spec's name list).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct TrueEdge {
    pub src: usize,
    pub dst: usize,
    pub lag: u32,
}

/// Ground-truth adjacency of a generated panel.
#[derive(Debug, Clone)]
pub struct TruthAdjacency {
    pub names: Vec<String>,
    pub edges: BTreeSet<TrueEdge>,
}

/// Simulates the structural recursion
/// `y_t = (I - W0)^{-1} (sum_l W^l y_{t-l} + e_t)` after burn-in.
///
/// Deterministic given the seed; the noise stream is keyed by distance from
/// the end of the sample, so lengthening the burn-in leaves the retained
/// draws unchanged.
pub fn generate(spec: &SvarSpec) -> Result<(ReturnPanel, TruthAdjacency)> {
    spec.validate()?;
    let n = spec.n_vars();
    let identity = DMatrix::<f64>::identity(n, n);
    let mixing = (&identity - &spec.w0).try_inverse().ok_or(Error::CyclicStructure)?;

    let total = spec.burn_in + spec.n_obs;
    let mut history: Vec<nalgebra::DVector<f64>> =
        vec![nalgebra::DVector::zeros(n); spec.lag];
    let mut kept = DMatrix::<f64>::zeros(n, spec.n_obs);
    for step in 0..total {
        let steps_from_end = (total - step) as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(steps_from_end);
        let mut shock = nalgebra::DVector::<f64>::zeros(n);
        for i in 0..n {
            shock[i] = sample_unit_noise(spec.noise, &mut rng) * spec.noise_scale[i];
        }
        for (l, prev) in history.iter().enumerate() {
            shock += &spec.w[l] * prev;
        }
        let y = &mixing * shock;
        if step >= spec.burn_in {
            kept.set_column(step - spec.burn_in, &y);
        }
        history.rotate_right(1);
        history[0] = y;
    }

    let dates = weekday_calendar(chrono::NaiveDate::from_ymd_opt(2000, 1, 3).unwrap(), spec.n_obs);
    let panel = ReturnPanel::new(dates, spec.names.clone(), kept)?;
    Ok((panel, spec.truth()))
}

fn sample_unit_noise(kind: NoiseKind, rng: &mut ChaCha8Rng) -> f64 {
    match kind {
        NoiseKind::Laplace => {
            let u: f64 = rng.random::<f64>() - 0.5;
            -u.signum() * (1.0 - 2.0 * u.abs()).ln() / std::f64::consts::SQRT_2
        }
        NoiseKind::Uniform => (rng.random::<f64>() - 0.5) * 2.0 * 3.0f64.sqrt(),
        NoiseKind::StudentT { df } => {
            let t = rand_distr::StudentT::new(df).expect("df validated");
            t.sample(rng) * ((df - 2.0) / df).sqrt()
        }
        NoiseKind::Gaussian => {
            <rand_distr::StandardNormal as Distribution<f64>>::sample(
                &rand_distr::StandardNormal,
                rng,
            )
        }
    }
}

/// Structure-recovery quality of an estimated network against the truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryMetrics {
    pub precision: f64,
    pub recall: f64,
    /// Structural Hamming distance: missing + extra + reversed, where a
    /// reversed instantaneous edge counts once instead of twice.
    pub shd: usize,
}

/// Compares the significant edges of `net` to a ground-truth adjacency.
pub fn recovery_metrics(net: &FactorNetwork, truth: &TruthAdjacency) -> Result<RecoveryMetrics> {
    let index_of = |name: &str| -> Result<usize> {
        truth
            .names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownFactor(name.to_string()))
    };
    let mut estimated: BTreeSet<TrueEdge> = BTreeSet::new();
    for e in net.edges.iter().filter(|e| e.significant) {
        estimated.insert(TrueEdge { src: index_of(&e.src)?, dst: index_of(&e.dst)?, lag: e.lag });
    }
    let tp = estimated.intersection(&truth.edges).count();
    let precision = if estimated.is_empty() { 1.0 } else { tp as f64 / estimated.len() as f64 };
    let recall = if truth.edges.is_empty() { 1.0 } else { tp as f64 / truth.edges.len() as f64 };

    // reversed: instantaneous estimate j->i where truth has i->j and neither
    // matches directly
    let reversed: Vec<TrueEdge> = estimated
        .iter()
        .filter(|e| {
            e.lag == 0
                && !truth.edges.contains(e)
                && truth.edges.contains(&TrueEdge { src: e.dst, dst: e.src, lag: 0 })
                && !estimated.contains(&TrueEdge { src: e.dst, dst: e.src, lag: 0 })
        })
        .copied()
        .collect();
    let r = reversed.len();
    let extra = estimated.difference(&truth.edges).count() - r;
    let missing = truth.edges.difference(&estimated).count() - r;
    Ok(RecoveryMetrics { precision, recall, shd: missing + extra + r })
}

/// Exhaustive ordering oracle: enumerates all `N!` orderings, accumulating
/// the same per-step dependence score the greedy search uses, and returns
/// the global minimizer. Restricted to `N <= 6`.
pub fn brute_force_order(res: &ResidualPanel) -> Result<Vec<usize>> {
    let n = res.n_vars();
    if n > 6 {
        return Err(Error::Config(format!("brute_force_order is limited to N <= 6, got {n}")));
    }
    if n == 0 {
        return Err(Error::InsufficientData("empty residual panel".into()));
    }
    if n == 1 {
        return Ok(vec![0]);
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    for perm in permutations(n) {
        let mut state = OrderingState::new(res)?;
        let mut total = 0.0;
        for &next in &perm[..n - 1] {
            let pos = state
                .remaining()
                .iter()
                .position(|&v| v == next)
                .expect("permutation member");
            total += state.candidate_score(pos)?;
            state.extract(pos)?;
        }
        let better = match &best {
            None => true,
            Some((score, _)) => total < *score,
        };
        if better {
            best = Some((total, perm));
        }
    }
    Ok(best.expect("at least one permutation").1)
}

/// Lexicographic permutations of `0..n`.
fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(n);
    let mut used = vec![false; n];
    fn recurse(n: usize, current: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        if current.len() == n {
            out.push(current.clone());
            return;
        }
        for v in 0..n {
            if !used[v] {
                used[v] = true;
                current.push(v);
                recurse(n, current, used, out);
                current.pop();
                used[v] = false;
            }
        }
    }
    recurse(n, &mut current, &mut used, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lingam::causal_order;
    use crate::netinfer::NetworkEdge;
    use approx::assert_abs_diff_eq;

    fn scalar_spec(coef: f64, t: usize, seed: u64) -> SvarSpec {
        SvarSpec {
            names: vec!["F1".into()],
            lag: 1,
            n_obs: t,
            w0: DMatrix::zeros(1, 1),
            w: vec![DMatrix::from_element(1, 1, coef)],
            noise: NoiseKind::Laplace,
            noise_scale: vec![1.0],
            seed,
            burn_in: DEFAULT_BURN_IN,
        }
    }

    #[test]
    fn pure_noise_has_no_autocorrelation() {
        let mut spec = scalar_spec(0.0, 5000, 1);
        spec.w0 = DMatrix::zeros(1, 1);
        let (panel, truth) = generate(&spec).unwrap();
        assert!(truth.edges.is_empty());
        let x: Vec<f64> = panel.values().row(0).iter().copied().collect();
        let rho = crate::linalg::pearson(&x[1..], &x[..x.len() - 1]).unwrap();
        assert!(rho.abs() < 0.05, "lag-1 autocorrelation {rho}");
    }

    #[test]
    fn ar1_autocorrelation_matches_theory() {
        let (panel, _) = generate(&scalar_spec(0.5, 100_000, 2)).unwrap();
        let x: Vec<f64> = panel.values().row(0).iter().copied().collect();
        let rho = crate::linalg::pearson(&x[1..], &x[..x.len() - 1]).unwrap();
        assert_abs_diff_eq!(rho, 0.5, epsilon = 0.02);
    }

    #[test]
    fn instantaneous_chain_slope_matches_coefficient() {
        let mut w0 = DMatrix::zeros(2, 2);
        w0[(1, 0)] = 0.8;
        let spec = SvarSpec {
            names: vec!["F1".into(), "F2".into()],
            lag: 1,
            n_obs: 50_000,
            w0,
            w: vec![DMatrix::zeros(2, 2)],
            noise: NoiseKind::Uniform,
            noise_scale: vec![1.0, 1.0],
            seed: 3,
            burn_in: DEFAULT_BURN_IN,
        };
        let (panel, truth) = generate(&spec).unwrap();
        assert_eq!(truth.edges.len(), 1);
        let x: Vec<f64> = panel.values().row(0).iter().copied().collect();
        let y: Vec<f64> = panel.values().row(1).iter().copied().collect();
        let slope = crate::linalg::cov_pop(&y, &x) / crate::linalg::var_pop(&x);
        assert_abs_diff_eq!(slope, 0.8, epsilon = 0.02);
    }

    #[test]
    fn generation_is_seed_deterministic() {
        let spec = scalar_spec(0.4, 500, 11);
        let (a, _) = generate(&spec).unwrap();
        let (b, _) = generate(&spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn doubling_burn_in_barely_moves_sample_moments() {
        let spec = scalar_spec(0.6, 10_000, 12);
        let mut long = spec.clone();
        long.burn_in = 2 * spec.burn_in;
        let (a, _) = generate(&spec).unwrap();
        let (b, _) = generate(&long).unwrap();
        let xa: Vec<f64> = a.values().row(0).iter().copied().collect();
        let xb: Vec<f64> = b.values().row(0).iter().copied().collect();
        let va = crate::linalg::var_pop(&xa);
        let vb = crate::linalg::var_pop(&xb);
        assert!(
            (va - vb).abs() / va < 0.005,
            "variance moved {va} -> {vb} when doubling burn-in"
        );
    }

    #[test]
    fn non_stationary_spec_is_rejected() {
        let spec = scalar_spec(1.05, 100, 4);
        assert!(matches!(generate(&spec), Err(Error::NonStationary { .. })));
    }

    #[test]
    fn cyclic_instantaneous_spec_is_rejected() {
        let mut w0 = DMatrix::zeros(2, 2);
        w0[(0, 1)] = 0.5;
        w0[(1, 0)] = 0.5;
        let spec = SvarSpec { w0, ..scalar_spec(0.0, 100, 5) };
        let spec = SvarSpec { names: vec!["F1".into(), "F2".into()],
            w: vec![DMatrix::zeros(2, 2)], noise_scale: vec![1.0, 1.0], ..spec };
        assert!(matches!(generate(&spec), Err(Error::CyclicStructure)));
    }

    #[test]
    fn random_dag_specs_are_valid_and_deterministic() {
        let a = SvarSpec::random_dag(5, 1, 100, 0.3, NoiseKind::Laplace, 9).unwrap();
        let b = SvarSpec::random_dag(5, 1, 100, 0.3, NoiseKind::Laplace, 9).unwrap();
        assert_eq!(a.w0, b.w0);
        assert_eq!(a.w[0], b.w[0]);
        a.validate().unwrap();
        assert!(dag_order(&a.w0).is_some());
    }

    fn network_from_edges(names: &[&str], edges: Vec<(usize, usize, u32)>) -> FactorNetwork {
        FactorNetwork::from_parts(
            crate::panel::WindowSpec {
                index: 0,
                start_date: chrono::NaiveDate::from_ymd_opt(2000, 1, 1).unwrap(),
                end_date: chrono::NaiveDate::from_ymd_opt(2001, 6, 30).unwrap(),
                length_months: 18,
                step_months: 3,
            },
            crate::netinfer::NetworkKind::Causal,
            0.05,
            names.iter().map(|s| s.to_string()).collect(),
            1,
            edges
                .into_iter()
                .map(|(src, dst, lag)| NetworkEdge {
                    src: names[src].to_string(),
                    dst: names[dst].to_string(),
                    lag,
                    weight: 0.5,
                    significant: true,
                })
                .collect(),
        )
    }

    #[test]
    fn recovery_metrics_cases() {
        let names = ["F1", "F2", "F3"];
        let truth = TruthAdjacency {
            names: names.iter().map(|s| s.to_string()).collect(),
            edges: [
                TrueEdge { src: 0, dst: 1, lag: 0 },
                TrueEdge { src: 1, dst: 2, lag: 1 },
            ]
            .into_iter()
            .collect(),
        };

        // perfect recovery
        let net = network_from_edges(&names, vec![(0, 1, 0), (1, 2, 1)]);
        let m = recovery_metrics(&net, &truth).unwrap();
        assert_eq!((m.precision, m.recall, m.shd), (1.0, 1.0, 0));

        // empty estimate
        let net = network_from_edges(&names, vec![]);
        let m = recovery_metrics(&net, &truth).unwrap();
        assert_eq!(m.recall, 0.0);
        assert_eq!(m.shd, 2);

        // one reversed instantaneous edge counts once
        let net = network_from_edges(&names, vec![(1, 0, 0), (1, 2, 1)]);
        let m = recovery_metrics(&net, &truth).unwrap();
        assert_eq!(m.shd, 1);
        assert!(m.precision < 1.0 && m.recall < 1.0);
    }

    #[test]
    fn brute_force_agrees_with_greedy_on_strong_signal() {
        use rand::{Rng, SeedableRng};
        let mut hits = 0;
        for seed in 0..10u64 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(500 + seed);
            let m = 5000;
            let mut noise =
                |rng: &mut rand_chacha::ChaCha8Rng| (rng.random::<f64>() - 0.5) * 2.0 * 3.0f64.sqrt();
            let x1: Vec<f64> = (0..m).map(|_| noise(&mut rng)).collect();
            let x2: Vec<f64> = x1.iter().map(|v| 0.8 * v + noise(&mut rng)).collect();
            let x3: Vec<f64> = x2.iter().map(|v| 0.8 * v + noise(&mut rng)).collect();
            let values = DMatrix::from_fn(3, m, |i, j| match i {
                0 => x1[j],
                1 => x2[j],
                _ => x3[j],
            });
            let res = ResidualPanel::new(
                values,
                vec!["F1".into(), "F2".into(), "F3".into()],
            )
            .unwrap();
            let greedy = causal_order(&res).unwrap();
            let oracle = brute_force_order(&res).unwrap();
            if greedy == oracle {
                hits += 1;
            }
        }
        assert!(hits >= 8, "greedy matched the oracle in {hits}/10 runs");
    }

    #[test]
    fn brute_force_single_variable() {
        let res = ResidualPanel::new(DMatrix::from_row_slice(1, 4, &[1.0, -1.0, 2.0, 0.0]), vec!["F1".into()]).unwrap();
        assert_eq!(brute_force_order(&res).unwrap(), vec![0]);
    }
}
