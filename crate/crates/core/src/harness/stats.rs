//! Protocol statistics: smoothing, upper median, improvement metrics and the
//! two-sided Welch t-test.

use statrs::function::beta::beta_reg;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("empty input")]
    Empty,
    #[error("smoothing window must be at least 1")]
    ZeroWindow,
    #[error("t-test needs at least 2 samples per arm, got {0}")]
    TooFewSamples(usize),
    #[error("both samples have zero variance; the t statistic is undefined")]
    ZeroVariance,
    #[error("no environment has positive baseline and SUFT margins over random")]
    NoValidEnvs,
    #[error("non-finite input value")]
    NonFinite,
}

/// Trailing moving average; the first `window - 1` points average over what
/// is available.
pub fn smooth(series: &[f64], window: usize) -> Result<Vec<f64>, StatsError> {
    if window == 0 {
        return Err(StatsError::ZeroWindow);
    }
    let mut out = Vec::with_capacity(series.len());
    let mut sum = 0.0;
    for (i, &v) in series.iter().enumerate() {
        sum += v;
        if i >= window {
            sum -= series[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    Ok(out)
}

/// Element at index `n / 2` of the sorted values: the higher of the two
/// middle elements for even `n`.
pub fn upper_median(values: &[f64]) -> Result<f64, StatsError> {
    if values.is_empty() {
        return Err(StatsError::Empty);
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(StatsError::NonFinite);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[sorted.len() / 2])
}

/// `((higher - random) - (lower - random)) / (lower - random) * 100`, or
/// `None` when either margin over random is not positive.
pub fn improvement_pct(higher: f64, lower: f64, random: f64) -> Option<f64> {
    let (h, l) = (higher - random, lower - random);
    (h > 0.0 && l > 0.0).then(|| (h - l) / l * 100.0)
}

/// `log10(pct + 1)`; `None` where the logarithm is undefined (`pct <= -1`).
pub fn log_improvement(pct: f64) -> Option<f64> {
    (pct > -1.0).then(|| (pct + 1.0).log10())
}

/// `(suft - random) / (baseline - random) * 100` for one environment, or
/// `None` when either margin is not positive.
pub fn reward_ratio_pct(suft: f64, baseline: f64, random: f64) -> Option<f64> {
    let (s, b) = (suft - random, baseline - random);
    (s > 0.0 && b > 0.0).then(|| s / b * 100.0)
}

/// Mean of [`reward_ratio_pct`] over the valid `(suft, baseline, random)`
/// triples; invalid environments are skipped.
pub fn mean_reward_ratio_pct(per_env: &[(f64, f64, f64)]) -> Result<f64, StatsError> {
    let ratios: Vec<f64> = per_env
        .iter()
        .filter_map(|&(s, b, r)| reward_ratio_pct(s, b, r))
        .collect();
    if ratios.is_empty() {
        return Err(StatsError::NoValidEnvs);
    }
    Ok(ratios.iter().sum::<f64>() / ratios.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchResult {
    pub t: f64,
    pub df: f64,
    pub p_value: f64,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Two-sided Welch t-test with Welch-Satterthwaite degrees of freedom.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<WelchResult, StatsError> {
    for s in [a, b] {
        if s.len() < 2 {
            return Err(StatsError::TooFewSamples(s.len()));
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(StatsError::NonFinite);
        }
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (sa, sb) = (va / a.len() as f64, vb / b.len() as f64);
    let se2 = sa + sb;
    if se2 == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2
        / (sa * sa / (a.len() as f64 - 1.0) + sb * sb / (b.len() as f64 - 1.0));
    // P(|T| > |t|) = I_{df / (df + t^2)}(df / 2, 1 / 2)
    let x = df / (df + t * t);
    let p_value = beta_reg(df / 2.0, 0.5, x).clamp(0.0, 1.0);
    Ok(WelchResult { t, df, p_value })
}
