//! Statistical helpers shared by the experiment harness and the test
//! suites: two-sample Kolmogorov–Smirnov, Pearson chi-square, censored
//! medians, and least squares through the origin.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Kolmogorov survival function `Q(lambda) = 2 sum_{j>=1} (-1)^{j-1} e^{-2 j^2 lambda^2}`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=200 {
        let term = (-2.0 * (j as f64) * (j as f64) * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-12 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Two-sample Kolmogorov–Smirnov test with the asymptotic p-value
/// (effective-size correction of Stephens). On heavily tied discrete data
/// the p-value is conservative.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    assert!(!a.is_empty() && !b.is_empty());
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_unstable_by(f64::total_cmp);
    ys.sort_unstable_by(f64::total_cmp);
    let (na, nb) = (xs.len() as f64, ys.len() as f64);
    let mut i = 0usize;
    let mut j = 0usize;
    let mut d: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        let v = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= v {
            i += 1;
        }
        while j < ys.len() && ys[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = (na * nb / (na + nb)).sqrt();
    let lambda = (ne + 0.12 + 0.11 / ne) * d;
    KsResult {
        statistic: d,
        p_value: kolmogorov_q(lambda),
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

fn chi_square_p(statistic: f64, df: usize) -> f64 {
    if df == 0 {
        return 1.0;
    }
    let dist = ChiSquared::new(df as f64).expect("df > 0");
    (1.0 - dist.cdf(statistic)).clamp(0.0, 1.0)
}

/// Pearson chi-square test of independence on an `r x c` contingency table.
///
/// Columns whose expected count falls below 5 in any row are pooled into the
/// previous kept column, the usual remedy for sparse categories.
pub fn chi_square_contingency(table: &[Vec<u64>]) -> ChiSquareResult {
    let rows = table.len();
    assert!(rows >= 2);
    let cols = table[0].len();
    assert!(table.iter().all(|r| r.len() == cols));

    let row_totals: Vec<f64> = table.iter().map(|r| r.iter().sum::<u64>() as f64).collect();
    let col_totals: Vec<f64> = (0..cols)
        .map(|c| table.iter().map(|r| r[c] as f64).sum())
        .collect();
    let grand: f64 = row_totals.iter().sum();
    assert!(grand > 0.0);

    // Decide which columns stand alone; pool the rest.
    let min_row = row_totals.iter().cloned().fold(f64::INFINITY, f64::min);
    let keep: Vec<bool> = col_totals
        .iter()
        .map(|&ct| ct > 0.0 && min_row * ct / grand >= 5.0)
        .collect();
    let mut merged: Vec<Vec<f64>> = vec![Vec::new(); rows];
    let mut pooled = vec![0.0f64; rows];
    let mut pooled_any = false;
    for c in 0..cols {
        if keep[c] {
            for r in 0..rows {
                merged[r].push(table[r][c] as f64);
            }
        } else if col_totals[c] > 0.0 {
            for r in 0..rows {
                pooled[r] += table[r][c] as f64;
            }
            pooled_any = true;
        }
    }
    if pooled_any {
        for r in 0..rows {
            merged[r].push(pooled[r]);
        }
    }
    let eff_cols = merged[0].len();
    if eff_cols < 2 {
        // No variation to test.
        return ChiSquareResult {
            statistic: 0.0,
            df: 0,
            p_value: 1.0,
        };
    }
    let col_totals: Vec<f64> = (0..eff_cols).map(|c| merged.iter().map(|r| r[c]).sum()).collect();
    let mut statistic = 0.0;
    for r in 0..rows {
        for c in 0..eff_cols {
            let expected = row_totals[r] * col_totals[c] / grand;
            if expected > 0.0 {
                let diff = merged[r][c] - expected;
                statistic += diff * diff / expected;
            }
        }
    }
    let df = (rows - 1) * (eff_cols - 1);
    ChiSquareResult {
        statistic,
        df,
        p_value: chi_square_p(statistic, df),
    }
}

/// Median of completed observations with right-censoring at a budget.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub enum CensoredMedian {
    /// The median itself is a completed observation.
    Value(f64),
    /// More than half the observations were censored; the median is only
    /// known to be at least the budget.
    AtLeast(f64),
}

impl CensoredMedian {
    pub fn value(&self) -> f64 {
        match *self {
            CensoredMedian::Value(v) => v,
            CensoredMedian::AtLeast(v) => v,
        }
    }

    pub fn is_censored(&self) -> bool {
        matches!(self, CensoredMedian::AtLeast(_))
    }
}

/// Censoring-aware median: censored observations all exceed every completed
/// one, so they sit at the top of the order.
pub fn censored_median(completed: &[u64], censored: usize, budget: u64) -> CensoredMedian {
    let total = completed.len() + censored;
    assert!(total > 0);
    let mut sorted = completed.to_vec();
    sorted.sort_unstable();
    let mid = total / 2;
    if total % 2 == 1 {
        if mid < sorted.len() {
            CensoredMedian::Value(sorted[mid] as f64)
        } else {
            CensoredMedian::AtLeast(budget as f64)
        }
    } else if mid < sorted.len() {
        CensoredMedian::Value((sorted[mid - 1] as f64 + sorted[mid] as f64) / 2.0)
    } else if mid - 1 < sorted.len() {
        CensoredMedian::AtLeast((sorted[mid - 1] as f64 + budget as f64) / 2.0)
    } else {
        CensoredMedian::AtLeast(budget as f64)
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample mean and (n-1)-normalized standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let m = mean(xs);
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64;
    (m, var.sqrt())
}

/// Least squares fit of `y = c * x` through the origin; returns `c` and the
/// per-point relative residuals `(y - c x) / y`.
pub fn fit_through_origin(points: &[(f64, f64)]) -> (f64, Vec<f64>) {
    let sxx: f64 = points.iter().map(|(x, _)| x * x).sum();
    let sxy: f64 = points.iter().map(|(x, y)| x * y).sum();
    let c = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let residuals = points
        .iter()
        .map(|(x, y)| if *y != 0.0 { (y - c * x) / y } else { 0.0 })
        .collect();
    (c, residuals)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kolmogorov_limits() {
        assert!((kolmogorov_q(0.0) - 1.0).abs() < 1e-12);
        assert!(kolmogorov_q(3.0) < 1e-6);
        // Known value: Q(1.0) ~ 0.26999967.
        assert!((kolmogorov_q(1.0) - 0.26999967).abs() < 1e-6);
    }

    #[test]
    fn ks_identical_samples_pass() {
        let a: Vec<f64> = (0..1000).map(|i| (i % 37) as f64).collect();
        let r = ks_two_sample(&a, &a);
        assert_eq!(r.statistic, 0.0);
        assert!(r.p_value > 0.99);
    }

    #[test]
    fn ks_disjoint_samples_fail() {
        let a: Vec<f64> = (0..500).map(|i| i as f64).collect();
        let b: Vec<f64> = (0..500).map(|i| (i + 1000) as f64).collect();
        let r = ks_two_sample(&a, &b);
        assert!((r.statistic - 1.0).abs() < 1e-12);
        assert!(r.p_value < 1e-10);
    }

    #[test]
    fn chi_square_known_value() {
        // 2x2 table with chi^2 = 12, df = 1.
        let table = vec![vec![90u64, 60], vec![60, 90]];
        let r = chi_square_contingency(&table);
        assert_eq!(r.df, 1);
        assert!((r.statistic - 12.0).abs() < 1e-9, "{}", r.statistic);
        assert!(r.p_value < 0.001);
    }

    #[test]
    fn chi_square_uniform_table_passes() {
        let table = vec![vec![100u64, 100, 100], vec![100, 100, 100]];
        let r = chi_square_contingency(&table);
        assert_eq!(r.statistic, 0.0);
        assert!(r.p_value > 0.999);
    }

    #[test]
    fn chi_square_pools_sparse_columns() {
        // Third column has expectation < 5 and gets pooled.
        let table = vec![vec![500u64, 480, 2], vec![480, 500, 3]];
        let r = chi_square_contingency(&table);
        assert_eq!(r.df, 1);
        assert!(r.p_value > 0.01);
    }

    #[test]
    fn censored_median_cases() {
        assert_eq!(
            censored_median(&[1, 2, 3, 4, 5], 0, 100),
            CensoredMedian::Value(3.0)
        );
        assert_eq!(
            censored_median(&[1, 2, 3, 4], 0, 100),
            CensoredMedian::Value(2.5)
        );
        // Half censored: even count straddles the budget.
        assert_eq!(
            censored_median(&[1, 2], 2, 100),
            CensoredMedian::AtLeast(51.0)
        );
        assert_eq!(
            censored_median(&[], 3, 100),
            CensoredMedian::AtLeast(100.0)
        );
        // Censoring below half leaves the median observable.
        assert_eq!(
            censored_median(&[1, 2, 3, 4], 1, 100),
            CensoredMedian::Value(3.0)
        );
    }

    #[test]
    fn fit_recovers_slope() {
        let points: Vec<(f64, f64)> = (1..=10).map(|i| (i as f64, 3.5 * i as f64)).collect();
        let (c, residuals) = fit_through_origin(&points);
        assert!((c - 3.5).abs() < 1e-12);
        assert!(residuals.iter().all(|r| r.abs() < 1e-12));
    }
}
