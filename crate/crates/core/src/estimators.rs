//! Subsample statistics, combined estimators and their automatic-inference
//! squared standard errors.
//!
//! With `B` subsamples of size `n` from a store of `N` records, the combined
//! estimator is the average of the per-subsample statistics, and its squared
//! standard error is
//!
//! ```text
//! SE^2 = c / (B - 1) * sum_b (stat_b - mean(stat))^2,   c = n * (1/(nB) + 1/N)
//! ```
//!
//! applied componentwise for vector statistics.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Neumaier compensated sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.comp += other.comp;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().collect::<CompensatedSum>().value()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StatisticKind {
    Mean,
    SinMean,
    /// Coefficient of variation, sample sd (n - 1) over sample mean.
    Cv,
    /// Pearson correlation of the first two fields.
    Correlation,
    /// OLS coefficients, intercept first. The first field is the response.
    OlsCoefficients,
}

impl StatisticKind {
    pub fn name(self) -> &'static str {
        match self {
            StatisticKind::Mean => "mean",
            StatisticKind::SinMean => "sin-mean",
            StatisticKind::Cv => "cv",
            StatisticKind::Correlation => "correlation",
            StatisticKind::OlsCoefficients => "ols",
        }
    }
}

impl std::str::FromStr for StatisticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "mean" => StatisticKind::Mean,
            "sin" | "sin-mean" => StatisticKind::SinMean,
            "cv" => StatisticKind::Cv,
            "corr" | "correlation" => StatisticKind::Correlation,
            "ols" => StatisticKind::OlsCoefficients,
            other => return Err(Error::config(format!("unknown statistic {other:?}"))),
        })
    }
}

/// A statistic computed on one subsample. Scalars have length 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsampleStatistic {
    pub kind: StatisticKind,
    pub value: Vec<f64>,
}

impl SubsampleStatistic {
    pub fn scalar(kind: StatisticKind, v: f64) -> Self {
        SubsampleStatistic {
            kind,
            value: vec![v],
        }
    }
}

/// A combined estimate and its squared standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinedEstimate {
    pub point: Vec<f64>,
    pub se2: Vec<f64>,
    pub n: usize,
    pub b: usize,
    pub big_n: u64,
    pub c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopulationMoments {
    pub mu: f64,
    pub sigma2: f64,
    /// E(X - mu)^4 = gamma * sigma^4.
    pub gamma: f64,
}

impl PopulationMoments {
    pub fn new(mu: f64, sigma2: f64, gamma: f64) -> Result<Self> {
        if !(sigma2 > 0.0) {
            return Err(Error::config("sigma2 must be positive"));
        }
        if !(gamma >= 1.0) {
            return Err(Error::config("gamma must be at least 1"));
        }
        Ok(PopulationMoments { mu, sigma2, gamma })
    }

    pub fn normal(mu: f64, sigma2: f64) -> Self {
        PopulationMoments {
            mu,
            sigma2,
            gamma: 3.0,
        }
    }
}

/// Arithmetic mean with compensated accumulation.
pub fn subsample_mean(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Undefined("mean of an empty subsample"));
    }
    Ok(compensated_sum(values.iter().copied()) / values.len() as f64)
}

/// Average of the `B` subsample means.
pub fn combined_mean(means: &[f64]) -> Result<f64> {
    if means.is_empty() {
        return Err(Error::Undefined("combined mean of no subsamples"));
    }
    subsample_mean(means)
}

/// `c = n (1/(nB) + 1/N)`.
pub fn scaler_c(n: usize, b: usize, big_n: u64) -> Result<f64> {
    if n == 0 || b == 0 || big_n == 0 {
        return Err(Error::config("n, B and N must be positive"));
    }
    if n as u64 > big_n {
        return Err(Error::config("n must not exceed N"));
    }
    let n = n as f64;
    Ok(n * (1.0 / (n * b as f64) + 1.0 / big_n as f64))
}

/// `c / (B - 1) * sum (v_b - mean)^2` for scalar values.
pub fn se2_scalar(values: &[f64], c: f64) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::config("SE^2 needs at least two subsamples"));
    }
    let m = subsample_mean(values)?;
    let ss = compensated_sum(values.iter().map(|v| (v - m) * (v - m)));
    Ok(c * ss / (values.len() - 1) as f64)
}

/// Componentwise SE^2 over `B >= 2` statistics of one kind.
pub fn se2_combined(stats: &[SubsampleStatistic], c: f64) -> Result<Vec<f64>> {
    let dim = check_homogeneous(stats)?;
    if stats.len() < 2 {
        return Err(Error::config("SE^2 needs at least two subsamples"));
    }
    let mut column = Vec::with_capacity(stats.len());
    (0..dim)
        .map(|j| {
            column.clear();
            column.extend(stats.iter().map(|s| s.value[j]));
            se2_scalar(&column, c)
        })
        .collect()
}

fn check_homogeneous(stats: &[SubsampleStatistic]) -> Result<usize> {
    let first = stats
        .first()
        .ok_or(Error::Undefined("no subsample statistics"))?;
    for s in stats {
        if s.kind != first.kind || s.value.len() != first.value.len() {
            return Err(Error::MixedKinds);
        }
    }
    Ok(first.value.len())
}

/// Plug-in estimator `g(combined mean)`. Carries no standard error.
pub fn plugin_estimate(combined_mean: f64, g: impl Fn(f64) -> f64) -> Result<f64> {
    let v = g(combined_mean);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Undefined("transform not defined at the combined mean"))
    }
}

/// Aggregate estimator: componentwise average of the subsample statistics.
pub fn aggregate_statistic(stats: &[SubsampleStatistic]) -> Result<SubsampleStatistic> {
    let dim = check_homogeneous(stats)?;
    let value = (0..dim)
        .map(|j| compensated_sum(stats.iter().map(|s| s.value[j])) / stats.len() as f64)
        .collect();
    Ok(SubsampleStatistic {
        kind: stats[0].kind,
        value,
    })
}

/// Combine `B` subsample statistics into the aggregate estimate with its SE^2.
pub fn combine(stats: &[SubsampleStatistic], n: usize, big_n: u64) -> Result<CombinedEstimate> {
    let c = scaler_c(n, stats.len(), big_n)?;
    let point = aggregate_statistic(stats)?.value;
    let se2 = se2_combined(stats, c)?;
    Ok(CombinedEstimate {
        point,
        se2,
        n,
        b: stats.len(),
        big_n,
        c,
    })
}

/// Exact variance of the mean over all `K = N - n + 1` windows:
///
/// ```text
/// sigma^2 * [(N - n + 1) + (n - 1)(3N - 4n + 2)/3] / [n (N - n + 1)^2]
/// ```
///
/// evaluated as an integer fraction before the final division. The closed
/// form assumes `n <= K`; the per-record window counts are symmetric under
/// swapping `n` and `K`, so larger `n` is evaluated at `n' = K`.
pub fn all_windows_variance(big_n: u64, n: u64, sigma2: f64) -> Result<f64> {
    if n == 0 || n > big_n {
        return Err(Error::config("need 1 <= n <= N"));
    }
    let n = n.min(big_n - n + 1);
    let (nn, n) = (big_n as u128, n as u128);
    let k = nn - n + 1;
    // Multiply through by 3: 3N - 4n + 2 = 3(N - n + 1) - n - 1 > 0.
    let num = 3 * k + (n - 1) * (3 * k - n - 1);
    let den = 3 * n * k * k;
    let g = gcd(num, den);
    Ok(sigma2 * ((num / g) as f64 / (den / g) as f64))
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// `d/dx g` squared at `mu` for the transforms that have a closed form.
pub fn gdot2(kind: StatisticKind, mu: f64) -> Result<f64> {
    match kind {
        StatisticKind::Mean => Ok(1.0),
        StatisticKind::SinMean => Ok(mu.cos().powi(2)),
        other => Err(Error::NoClosedForm(other.name())),
    }
}

/// Leading-order variance of the combined estimator,
/// `gdot^2(mu) sigma^2 (1/(nB) + 1/N)`.
pub fn theoretical_var_star(
    kind: StatisticKind,
    moments: &PopulationMoments,
    n: usize,
    b: usize,
    big_n: u64,
) -> Result<f64> {
    let g2 = gdot2(kind, moments.mu)?;
    Ok(g2 * moments.sigma2 * (1.0 / (n as f64 * b as f64) + 1.0 / big_n as f64))
}

fn mean_and_ss(values: impl Iterator<Item = f64> + Clone, len: usize) -> (f64, f64) {
    let m = compensated_sum(values.clone()) / len as f64;
    let ss = compensated_sum(values.map(|v| (v - m) * (v - m)));
    (m, ss)
}

/// Sample sd (denominator `n - 1`) over sample mean.
pub fn cv_statistic(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::Undefined("CV needs at least two records"));
    }
    let (m, ss) = mean_and_ss(values.iter().copied(), values.len());
    if m == 0.0 {
        return Err(Error::Undefined("CV with zero mean"));
    }
    Ok((ss / (values.len() - 1) as f64).sqrt() / m)
}

/// Pearson sample correlation.
pub fn correlation_statistic(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Undefined("correlation needs two equal series of length >= 2"));
    }
    let (mx, sxx) = mean_and_ss(x.iter().copied(), x.len());
    let (my, syy) = mean_and_ss(y.iter().copied(), y.len());
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Undefined("correlation with zero variance"));
    }
    let sxy = compensated_sum(x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)));
    Ok(sxy / (sxx * syy).sqrt())
}

/// Running `X'X` and `X'y` for least squares with an intercept column.
///
/// Rows are `(y, x_1, .., x_p)`. Accumulators are compensated so that the
/// order in which blocks are merged has negligible effect.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalEquations {
    dim: usize,
    xtx: Vec<CompensatedSum>,
    xty: Vec<CompensatedSum>,
    rows: u64,
}

impl NormalEquations {
    /// `p` regressors (the intercept is added).
    pub fn new(p: usize) -> Self {
        let dim = p + 1;
        NormalEquations {
            dim,
            xtx: vec![CompensatedSum::new(); dim * dim],
            xty: vec![CompensatedSum::new(); dim],
            rows: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> u64 {
        self.rows
    }

    /// Add one `(y, x_1, .., x_p)` row.
    pub fn push(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.dim {
            return Err(Error::Malformed(format!(
                "regression row has {} fields, expected {}",
                row.len(),
                self.dim
            )));
        }
        let y = row[0];
        let x = |j: usize| if j == 0 { 1.0 } else { row[j] };
        for i in 0..self.dim {
            let xi = x(i);
            // Upper triangle only; mirrored on solve.
            for j in i..self.dim {
                self.xtx[i * self.dim + j].add(xi * x(j));
            }
            self.xty[i].add(xi * y);
        }
        self.rows += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &NormalEquations) -> Result<()> {
        if other.dim != self.dim {
            return Err(Error::Malformed("merging normal equations of different size".into()));
        }
        for (a, b) in self.xtx.iter_mut().zip(&other.xtx) {
            a.merge(b);
        }
        for (a, b) in self.xty.iter_mut().zip(&other.xty) {
            a.merge(b);
        }
        self.rows += other.rows;
        Ok(())
    }

    pub fn xtx(&self) -> DMatrix<f64> {
        let d = self.dim;
        DMatrix::from_fn(d, d, |i, j| {
            let (a, b) = if i <= j { (i, j) } else { (j, i) };
            self.xtx[a * d + b].value()
        })
    }

    pub fn xty(&self) -> DVector<f64> {
        DVector::from_iterator(self.dim, self.xty.iter().map(CompensatedSum::value))
    }

    /// Solve by Cholesky factorization of `X'X`.
    pub fn solve(&self) -> Result<Vec<f64>> {
        if self.rows <= self.dim as u64 {
            return Err(Error::RankDeficient);
        }
        let xtx = self.xtx();
        let max_diag = xtx.diagonal().max();
        let chol = xtx.cholesky().ok_or(Error::RankDeficient)?;
        let min_pivot = chol.l_dirty().diagonal().iter().fold(f64::INFINITY, |m, v| m.min(v * v));
        if !(min_pivot > 1e-12 * max_diag) {
            return Err(Error::RankDeficient);
        }
        Ok(chol.solve(&self.xty()).iter().copied().collect())
    }
}

/// OLS with intercept on rows `(y, x_1, .., x_p)`; coefficients intercept
/// first.
pub fn ols_fit(rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = rows.first().ok_or(Error::RankDeficient)?;
    if first.len() < 2 {
        return Err(Error::Malformed("regression rows need a response and a regressor".into()));
    }
    let mut ne = NormalEquations::new(first.len() - 1);
    for r in rows {
        ne.push(r)?;
    }
    ne.solve()
}

/// Compute `kind` on one subsample of parsed rows.
pub fn compute_statistic(kind: StatisticKind, rows: &[Vec<f64>]) -> Result<SubsampleStatistic> {
    let first_col = || rows.iter().map(|r| r[0]).collect::<Vec<f64>>();
    let value = match kind {
        StatisticKind::Mean => vec![subsample_mean(&first_col())?],
        StatisticKind::SinMean => vec![subsample_mean(&first_col())?.sin()],
        StatisticKind::Cv => vec![cv_statistic(&first_col())?],
        StatisticKind::Correlation => {
            if rows.iter().any(|r| r.len() < 2) {
                return Err(Error::Malformed("correlation needs two fields per row".into()));
            }
            let y: Vec<f64> = rows.iter().map(|r| r[1]).collect();
            vec![correlation_statistic(&first_col(), &y)?]
        }
        StatisticKind::OlsCoefficients => ols_fit(rows)?,
    };
    Ok(SubsampleStatistic { kind, value })
}
