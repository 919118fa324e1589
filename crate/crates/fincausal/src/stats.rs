//! Descriptive statistics, cross-correlation functions, and
//! expected-shortfall z-score indicators.

use chrono::Months;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, QuantileConvention};
use crate::panel::{IndicatorSeries, WindowSpec};

/// Annualised summary statistics of one daily return series.
///
/// `avg_comp_ret_ann`, `vol_ann` and the daily percentile/extreme fields are
/// in percent; `risk_adj_ret` and `sortino` are ratios of the two annualised
/// percent figures; `kurtosis` is excess kurtosis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryStats {
    pub avg_comp_ret_ann: f64,
    pub vol_ann: f64,
    pub risk_adj_ret: f64,
    pub sortino: f64,
    pub skew: f64,
    pub kurtosis: f64,
    pub pctile_1: f64,
    pub pctile_5: f64,
    pub min: f64,
    pub max: f64,
}

/// Summary statistics of a daily return series (decimal fractions).
///
/// The annualised compounded return is `(prod(1+r))^(periods/T) - 1`,
/// volatility is the sample standard deviation scaled by `sqrt(periods)`,
/// and the Sortino denominator is the annualised root mean square of the
/// negative returns only (zero threshold, full-sample count).
pub fn summary_stats(returns: &[f64], periods_per_year: f64) -> Result<SummaryStats> {
    if returns.len() < 2 {
        return Err(Error::InsufficientData("summary_stats needs at least 2 observations".into()));
    }
    if returns.iter().any(|r| !r.is_finite()) {
        return Err(Error::NonFinite("summary_stats input"));
    }
    let t = returns.len() as f64;
    let var = linalg::var_sample(returns);
    if var <= 0.0 {
        return Err(Error::ZeroVariance("returns".into()));
    }

    let growth: f64 = returns.iter().map(|r| (1.0 + r).ln()).sum();
    let avg_comp = (growth * periods_per_year / t).exp() - 1.0;
    let vol = var.sqrt() * periods_per_year.sqrt();

    let downside_ms: f64 = returns.iter().filter(|r| **r < 0.0).map(|r| r * r).sum::<f64>() / t;
    let downside_vol = downside_ms.sqrt() * periods_per_year.sqrt();
    let sortino = if downside_vol > 0.0 { avg_comp / downside_vol } else { f64::INFINITY };

    let m = linalg::mean(returns);
    let m2 = returns.iter().map(|r| (r - m).powi(2)).sum::<f64>() / t;
    let m3 = returns.iter().map(|r| (r - m).powi(3)).sum::<f64>() / t;
    let m4 = returns.iter().map(|r| (r - m).powi(4)).sum::<f64>() / t;
    let skew = m3 / m2.powf(1.5);
    let kurtosis = m4 / (m2 * m2) - 3.0;

    let mut sorted: Vec<f64> = returns.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = |p: f64| linalg::quantile_sorted(&sorted, p, QuantileConvention::Linear) * 100.0;

    Ok(SummaryStats {
        avg_comp_ret_ann: avg_comp * 100.0,
        vol_ann: vol * 100.0,
        risk_adj_ret: avg_comp / vol,
        sortino,
        skew,
        kurtosis,
        pctile_1: q(0.01),
        pctile_5: q(0.05),
        min: sorted[0] * 100.0,
        max: sorted[sorted.len() - 1] * 100.0,
    })
}

/// Cross-correlation function of two equal-length series.
///
/// Returns `2*max_lag + 1` values; the entry for lag `l` (ordered from
/// `-max_lag` to `+max_lag`) is the Pearson correlation of `(x_t, y_{t-l})`
/// over the overlapping range, so the middle entry is the plain lag-0
/// correlation.
pub fn ccf(x: &[f64], y: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "ccf inputs have lengths {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() <= max_lag + 2 {
        return Err(Error::InsufficientData(format!(
            "ccf needs more than max_lag + 2 = {} observations",
            max_lag + 2
        )));
    }
    let n = x.len();
    let mut out = Vec::with_capacity(2 * max_lag + 1);
    for signed in -(max_lag as isize)..=(max_lag as isize) {
        let l = signed.unsigned_abs();
        let (xs, ys) = if signed >= 0 {
            (&x[l..n], &y[0..n - l])
        } else {
            (&x[0..n - l], &y[l..n])
        };
        out.push(linalg::pearson(xs, ys)?);
    }
    Ok(out)
}

/// Historical expected shortfall: mean of the values strictly above the
/// `q`-quantile (default convention: linear interpolation).
pub fn tail_es(values: &[f64], q: f64) -> Result<f64> {
    tail_es_with(values, q, QuantileConvention::Linear)
}

/// [`tail_es`] with an explicit quantile convention.
pub fn tail_es_with(values: &[f64], q: f64, convention: QuantileConvention) -> Result<f64> {
    if values.len() < 20 {
        return Err(Error::InsufficientData("tail_es needs at least 20 observations".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("tail_es input"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let threshold = linalg::quantile_sorted(&sorted, q, convention);
    let tail: Vec<f64> = sorted.iter().copied().filter(|v| *v > threshold).collect();
    if tail.is_empty() {
        return Err(Error::DegenerateTail { q });
    }
    Ok(linalg::mean(&tail))
}

/// Which indicator a z-score series describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndicatorKind {
    /// Volatility expectation swings (per-day percent change between close
    /// and open).
    Fear,
    /// Yield-spread level (or its daily first difference when configured).
    BusinessCycle,
}

/// Options for [`indicator_zscores`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ZScoreOptions {
    /// Length of the trailing history used for the rolling mean/stdev.
    pub history_years: u32,
    /// Minimum number of trailing windows required before a z-score is
    /// defined.
    pub min_history: usize,
    /// Tail quantile for the expected shortfall.
    pub q: f64,
    /// Use the daily first difference of the level instead of the level
    /// itself (business-cycle indicator only).
    pub use_difference: bool,
    /// Include the current window in the trailing statistics.
    pub include_current: bool,
    pub quantile_convention: QuantileConvention,
}

impl Default for ZScoreOptions {
    fn default() -> Self {
        Self {
            history_years: 10,
            min_history: 4,
            q: 0.95,
            use_difference: false,
            include_current: true,
            quantile_convention: QuantileConvention::Linear,
        }
    }
}

/// Per-window expected-shortfall values and their trailing z-scores.
#[derive(Debug, Clone, Serialize)]
pub struct ZScoreSeries {
    pub kind: IndicatorKind,
    pub window_index: Vec<usize>,
    pub es_value: Vec<f64>,
    /// `None` where fewer than `min_history` trailing windows exist.
    pub zscore: Vec<Option<f64>>,
}

/// Windowed expected-shortfall z-scores of an indicator series.
///
/// For each window the daily observable is reduced to its tail expected
/// shortfall, and the z-score standardises that value against the trailing
/// `history_years` of per-window shortfalls.
pub fn indicator_zscores(
    series: &IndicatorSeries,
    windows: &[WindowSpec],
    kind: IndicatorKind,
    opts: &ZScoreOptions,
) -> Result<ZScoreSeries> {
    if windows.is_empty() {
        return Err(Error::Config("indicator_zscores needs at least one window".into()));
    }
    let mut es_value = Vec::with_capacity(windows.len());
    for w in windows {
        let obs = window_observable(series, w, kind, opts.use_difference)?;
        es_value.push(tail_es_with(&obs, opts.q, opts.quantile_convention)?);
    }
    let starts: Vec<chrono::NaiveDate> = windows.iter().map(|w| w.start_date).collect();
    let zscore = trailing_zscores(
        &es_value,
        &starts,
        opts.history_years,
        opts.min_history,
        opts.include_current,
    )?;
    Ok(ZScoreSeries {
        kind,
        window_index: windows.iter().map(|w| w.index).collect(),
        es_value,
        zscore,
    })
}

/// Daily observable of an indicator inside one window.
fn window_observable(
    series: &IndicatorSeries,
    w: &WindowSpec,
    kind: IndicatorKind,
    use_difference: bool,
) -> Result<Vec<f64>> {
    let in_window: Vec<usize> = series
        .dates()
        .iter()
        .enumerate()
        .filter(|(_, d)| **d >= w.start_date && **d <= w.end_date)
        .map(|(i, _)| i)
        .collect();
    if in_window.is_empty() {
        return Err(Error::UndersizedSlice { index: w.index, got: 0, min: 1 });
    }
    let values = match kind {
        IndicatorKind::Fear => in_window
            .iter()
            .map(|&i| {
                let open = series.open()[i];
                if open == 0.0 {
                    return Err(Error::Numerical("indicator open value is zero".into()));
                }
                Ok(100.0 * (series.close()[i] - open) / open)
            })
            .collect::<Result<Vec<f64>>>()?,
        IndicatorKind::BusinessCycle => {
            let levels: Vec<f64> = in_window.iter().map(|&i| series.close()[i]).collect();
            if use_difference {
                levels.windows(2).map(|p| p[1] - p[0]).collect()
            } else {
                levels
            }
        }
    };
    Ok(values)
}

/// Standardises each value against the trailing history whose window start
/// dates fall within `history_years` of the current start.
///
/// Entries with fewer than `min_history` trailing values are `None`. A
/// trailing stdev of zero yields 0.0 when the deviation is also zero
/// (constant history) and an error otherwise.
pub fn trailing_zscores(
    values: &[f64],
    window_starts: &[chrono::NaiveDate],
    history_years: u32,
    min_history: usize,
    include_current: bool,
) -> Result<Vec<Option<f64>>> {
    if values.len() != window_starts.len() {
        return Err(Error::DimensionMismatch("values vs window_starts".into()));
    }
    let min_history = min_history.max(2);
    let mut out = Vec::with_capacity(values.len());
    for k in 0..values.len() {
        let cutoff = window_starts[k]
            .checked_sub_months(Months::new(12 * history_years))
            .unwrap_or(chrono::NaiveDate::MIN);
        let hi = if include_current { k + 1 } else { k };
        let trailing: Vec<f64> = (0..hi)
            .filter(|&j| window_starts[j] >= cutoff)
            .map(|j| values[j])
            .collect();
        if trailing.len() < min_history {
            out.push(None);
            continue;
        }
        let mu = linalg::mean(&trailing);
        let sd = linalg::var_sample(&trailing).sqrt();
        let dev = values[k] - mu;
        if sd <= 0.0 {
            if dev.abs() <= f64::EPSILON * mu.abs().max(1.0) {
                out.push(Some(0.0));
            } else {
                return Err(Error::ZeroVariance("trailing expected-shortfall history".into()));
            }
        } else {
            out.push(Some(dev / sd));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::make_windows;
    use approx::assert_abs_diff_eq;
    use chrono::NaiveDate;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    /// Literal spreadsheet-style recomputation, kept deliberately separate
    /// from the implementation above.
    fn summary_oracle(r: &[f64], periods: f64) -> SummaryStats {
        let t = r.len() as f64;
        let mut prod = 1.0;
        for v in r {
            prod *= 1.0 + v;
        }
        let avg_comp = prod.powf(periods / t) - 1.0;
        let mean = r.iter().sum::<f64>() / t;
        let var = r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (t - 1.0);
        let vol = var.sqrt() * periods.sqrt();
        let downside =
            (r.iter().map(|v| v.min(0.0).powi(2)).sum::<f64>() / t).sqrt() * periods.sqrt();
        let m2 = r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / t;
        let m3 = r.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / t;
        let m4 = r.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / t;
        let mut sorted = r.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let pct = |p: f64| {
            let h = (sorted.len() - 1) as f64 * p;
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(sorted.len() - 1);
            (sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])) * 100.0
        };
        SummaryStats {
            avg_comp_ret_ann: avg_comp * 100.0,
            vol_ann: vol * 100.0,
            risk_adj_ret: avg_comp / vol,
            sortino: avg_comp / downside,
            skew: m3 / m2.powf(1.5),
            kurtosis: m4 / (m2 * m2) - 3.0,
            pctile_1: pct(0.01),
            pctile_5: pct(0.05),
            min: sorted[0] * 100.0,
            max: sorted[sorted.len() - 1] * 100.0,
        }
    }

    #[test]
    fn summary_stats_matches_independent_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let r: Vec<f64> = (0..2000)
            .map(|_| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng) * 0.01)
            .collect();
        let got = summary_stats(&r, 252.0).unwrap();
        let want = summary_oracle(&r, 252.0);
        assert_abs_diff_eq!(got.avg_comp_ret_ann, want.avg_comp_ret_ann, epsilon = 1e-10);
        assert_abs_diff_eq!(got.vol_ann, want.vol_ann, epsilon = 1e-10);
        assert_abs_diff_eq!(got.risk_adj_ret, want.risk_adj_ret, epsilon = 1e-10);
        assert_abs_diff_eq!(got.sortino, want.sortino, epsilon = 1e-10);
        assert_abs_diff_eq!(got.skew, want.skew, epsilon = 1e-10);
        assert_abs_diff_eq!(got.kurtosis, want.kurtosis, epsilon = 1e-10);
        assert_abs_diff_eq!(got.pctile_1, want.pctile_1, epsilon = 1e-10);
        assert_abs_diff_eq!(got.pctile_5, want.pctile_5, epsilon = 1e-10);
    }

    #[test]
    fn summary_stats_degenerate_input_errors() {
        let r = vec![0.0; 100];
        assert!(matches!(summary_stats(&r, 252.0), Err(Error::ZeroVariance(_))));
    }

    #[test]
    fn ccf_self_correlation_is_one() {
        let x: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let c = ccf(&x, &x, 0).unwrap();
        assert_eq!(c.len(), 1);
        assert_abs_diff_eq!(c[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn ccf_detects_exact_lag() {
        // y_t = x_{t-1}: correlation 1 at lag 1, near 0 elsewhere
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x: Vec<f64> = (0..5001)
            .map(|_| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
            .collect();
        let y: Vec<f64> = x[..5000].to_vec();
        let x = x[1..].to_vec();
        let c = ccf(&x, &y, 2).unwrap();
        assert_eq!(c.len(), 5);
        assert_abs_diff_eq!(c[3], 1.0, epsilon = 1e-9); // lag +1
        for (i, v) in c.iter().enumerate() {
            if i != 3 {
                assert!(v.abs() < 0.05, "lag {} has correlation {}", i as isize - 2, v);
            }
        }
    }

    #[test]
    fn ccf_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..400).map(|_| rng.random::<f64>()).collect();
        let y: Vec<f64> = (0..400).map(|_| rng.random::<f64>()).collect();
        let cxy = ccf(&x, &y, 5).unwrap();
        let cyx = ccf(&y, &x, 5).unwrap();
        for l in 0..11 {
            assert_abs_diff_eq!(cxy[l], cyx[10 - l], epsilon = 1e-12);
        }
    }

    #[test]
    fn tail_es_integer_grid() {
        let v: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        // 0.95-quantile (linear) = 95.05, strict exceedances {96..100}
        assert_abs_diff_eq!(tail_es(&v, 0.95).unwrap(), 98.0, epsilon = 1e-12);
    }

    #[test]
    fn tail_es_degenerate_and_single_exceedance() {
        let flat = vec![1.0; 30];
        assert!(matches!(tail_es(&flat, 0.95), Err(Error::DegenerateTail { .. })));

        let mut v = vec![0.0; 19];
        v.push(10.0);
        assert_abs_diff_eq!(tail_es(&v, 0.95).unwrap(), 10.0, epsilon = 1e-12);

        assert!(matches!(tail_es(&[1.0; 10], 0.95), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn tail_es_bounded_below_by_quantile() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let v: Vec<f64> = (0..200).map(|_| rng.random::<f64>() * 10.0).collect();
            let mut sorted = v.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let q = linalg::quantile_sorted(&sorted, 0.95, QuantileConvention::Linear);
            assert!(tail_es(&v, 0.95).unwrap() >= q);
        }
    }

    #[test]
    fn trailing_zscores_hand_computed() {
        // quarterly starts, es = 1,2,...,6, min_history = 4
        let starts: Vec<NaiveDate> = (0..6)
            .map(|k| d("2000-01-01").checked_add_months(Months::new(3 * k)).unwrap())
            .collect();
        let es: Vec<f64> = (1..=6).map(|v| v as f64).collect();
        let z = trailing_zscores(&es, &starts, 10, 4, true).unwrap();
        assert_eq!(z[0], None);
        assert_eq!(z[1], None);
        assert_eq!(z[2], None);
        assert_abs_diff_eq!(z[3].unwrap(), 1.5 / (5.0f64 / 3.0).sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(z[4].unwrap(), 2.0 / (10.0f64 / 4.0).sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(z[5].unwrap(), 2.5 / (17.5f64 / 5.0).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn trailing_zscores_constant_history_is_zero() {
        let starts: Vec<NaiveDate> = (0..5)
            .map(|k| d("2000-01-01").checked_add_months(Months::new(3 * k)).unwrap())
            .collect();
        let es = vec![2.5; 5];
        let z = trailing_zscores(&es, &starts, 10, 2, true).unwrap();
        assert_eq!(z[4], Some(0.0));
    }

    #[test]
    fn trailing_zscores_respects_history_horizon() {
        // yearly starts with a 2-year horizon: only the last 3 values count
        let starts: Vec<NaiveDate> = (0..5)
            .map(|k| d("2000-01-01").checked_add_months(Months::new(12 * k)).unwrap())
            .collect();
        let es = vec![100.0, 100.0, 1.0, 2.0, 3.0];
        let z = trailing_zscores(&es, &starts, 2, 2, true).unwrap();
        // window 4: trailing set is {1,2,3}; z = (3-2)/1
        assert_abs_diff_eq!(z[4].unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn indicator_zscores_end_to_end() {
        // weekday indicator with a volatility burst in one window
        let mut dates = Vec::new();
        let mut day = d("2000-01-03");
        while dates.len() < 1200 {
            if !matches!(day.weekday(), chrono::Weekday::Sat | chrono::Weekday::Sun) {
                dates.push(day);
            }
            day = day.succ_opt().unwrap();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let open: Vec<f64> = (0..dates.len()).map(|_| 20.0 + rng.random::<f64>()).collect();
        let close: Vec<f64> = open
            .iter()
            .enumerate()
            .map(|(i, o)| {
                let swing = if i > 900 { 0.2 } else { 0.01 };
                o * (1.0 + swing * (rng.random::<f64>() - 0.5))
            })
            .collect();
        let series = IndicatorSeries::new(dates.clone(), open, close).unwrap();
        let windows = make_windows(dates[0], *dates.last().unwrap(), 18, 3).unwrap();
        let zs = indicator_zscores(&series, &windows, IndicatorKind::Fear, &ZScoreOptions {
            min_history: 2,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(zs.window_index.len(), windows.len());
        assert!(zs.zscore[0].is_none());
        // the burst window should carry the largest defined z-score
        let last_defined = zs.zscore.iter().rev().find_map(|z| *z).unwrap();
        assert!(last_defined > 1.0, "expected elevated z-score, got {last_defined}");
    }

    proptest! {
        #[test]
        fn percentile_ordering_invariant(values in proptest::collection::vec(-0.2f64..0.2, 10..200)) {
            if let Ok(s) = summary_stats(&values, 252.0) {
                prop_assert!(s.min <= s.pctile_1 + 1e-12);
                prop_assert!(s.pctile_1 <= s.pctile_5 + 1e-12);
                prop_assert!(s.pctile_5 <= s.max + 1e-12);
                prop_assert!(s.vol_ann >= 0.0);
            }
        }

        #[test]
        fn zscore_affine_invariance(
            base in proptest::collection::vec(0.1f64..5.0, 8..30),
            scale in 0.1f64..10.0,
            shift in -5.0f64..5.0,
        ) {
            let starts: Vec<NaiveDate> = (0..base.len())
                .map(|k| d("2000-01-01").checked_add_months(Months::new(3 * k as u32)).unwrap())
                .collect();
            let shifted: Vec<f64> = base.iter().map(|v| v * scale + shift).collect();
            let z1 = trailing_zscores(&base, &starts, 10, 4, true);
            let z2 = trailing_zscores(&shifted, &starts, 10, 4, true);
            if let (Ok(z1), Ok(z2)) = (z1, z2) {
                for (a, b) in z1.iter().zip(&z2) {
                    match (a, b) {
                        (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-6),
                        (None, None) => {}
                        _ => prop_assert!(false, "definedness must match"),
                    }
                }
            }
        }
    }
}
