//! Streaming moments, batch-means confidence intervals and tail-index estimators.

use alloc::vec::Vec;
use num_traits::Float;

/// Welford accumulator; `merge` is associative so ensembles reduce in any order.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RunningStats {
    pub n: u64,
    pub mean: f64,
    /// Sum of squared deviations from the mean.
    pub m2: f64,
    pub min: f64,
    pub max: f64,
}

impl Default for RunningStats {
    fn default() -> Self {
        RunningStats { n: 0, mean: 0.0, m2: 0.0, min: f64::INFINITY, max: f64::NEG_INFINITY }
    }
}

impl RunningStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
        self.min = self.min.min(x);
        self.max = self.max.max(x);
    }

    pub fn merge(&self, o: &RunningStats) -> RunningStats {
        if self.n == 0 {
            return *o;
        }
        if o.n == 0 {
            return *self;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        let (na, nb) = (self.n as f64, o.n as f64);
        RunningStats {
            n,
            mean: self.mean + d * nb / n as f64,
            m2: self.m2 + o.m2 + d * d * na * nb / n as f64,
            min: self.min.min(o.min),
            max: self.max.max(o.max),
        }
    }

    /// Unbiased sample variance; zero below two samples.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std_err(&self) -> f64 {
        if self.n == 0 {
            f64::INFINITY
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

impl FromIterator<f64> for RunningStats {
    fn from_iter<I: IntoIterator<Item = f64>>(it: I) -> Self {
        let mut s = RunningStats::new();
        for x in it {
            s.push(x);
        }
        s
    }
}

/// Two-sided 97.5% Student-t quantile.
///
/// Exact table to 30 degrees of freedom, then the Cornish–Fisher expansion.
pub fn t_quantile_975(dof: u64) -> f64 {
    const T: [f64; 30] = [
        12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179, 2.160, 2.145, 2.131,
        2.120, 2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042,
    ];
    match dof {
        0 => f64::INFINITY,
        1..=30 => T[dof as usize - 1],
        _ => {
            let z = 1.959963984540054;
            let n = dof as f64;
            let z3 = z * z * z;
            let z5 = z3 * z * z;
            z + (z3 + z) / (4.0 * n) + (5.0 * z5 + 16.0 * z3 + 3.0 * z) / (96.0 * n * n)
        }
    }
}

/// Mean with a 95% confidence interval.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Interval {
    pub mean: f64,
    pub half_width: f64,
    pub batches: usize,
}

impl Interval {
    pub fn lo(&self) -> f64 {
        self.mean - self.half_width
    }

    pub fn hi(&self) -> f64 {
        self.mean + self.half_width
    }

    pub fn excludes_zero(&self) -> bool {
        self.lo() > 0.0 || self.hi() < 0.0
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo() <= x && x <= self.hi()
    }
}

/// 95% t-interval treating the batch means as independent and equally weighted.
pub fn batch_means_ci(batch_means: &[f64]) -> Interval {
    let s: RunningStats = batch_means.iter().copied().collect();
    let b = batch_means.len();
    Interval {
        mean: s.mean,
        half_width: if b < 2 { f64::INFINITY } else { t_quantile_975(b as u64 - 1) * s.std_err() },
        batches: b,
    }
}

/// Time-weighted averages over consecutive windows of equal duration.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeBatches {
    width: f64,
    sums: Vec<f64>,
    cur: f64,
    cur_t: f64,
}

impl TimeBatches {
    /// `width` is the duration of each window.
    pub fn new(width: f64) -> Self {
        TimeBatches { width, sums: Vec::new(), cur: 0.0, cur_t: 0.0 }
    }

    /// Adds `value` held over an interval of length `dt`, splitting it across windows.
    pub fn push(&mut self, value: f64, mut dt: f64) {
        while dt > 0.0 {
            let take = dt.min(self.width - self.cur_t);
            self.cur += value * take;
            self.cur_t += take;
            dt -= take;
            if self.cur_t >= self.width * (1.0 - 1e-12) {
                self.sums.push(self.cur / self.cur_t);
                self.cur = 0.0;
                self.cur_t = 0.0;
            }
        }
    }

    /// Completed window averages; a partial trailing window is dropped.
    pub fn means(&self) -> &[f64] {
        &self.sums
    }
}

/// Ordinary least squares `y = a + b x`; returns `(a, b)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    if sxx == 0.0 {
        return None;
    }
    let b = sxy / sxx;
    Some((my - b * mx, b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum TailMethod {
    Hill,
    RankRegression,
}

/// Survival index `alpha` of `P(X > x) ~ x^{-alpha}`.
///
/// A density decaying like `|x|^{-a}` has survival index `a - 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TailEstimate {
    pub exponent: f64,
    pub stderr: f64,
    pub k_used: usize,
    pub method: TailMethod,
    /// No stability plateau was found.
    pub unstable: bool,
}

impl TailEstimate {
    pub fn density_exponent(&self) -> f64 {
        self.exponent + 1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TailError {
    TooFewSamples(usize),
}

impl core::fmt::Display for TailError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            TailError::TooFewSamples(n) => write!(f, "tail estimation needs at least 100 positive samples, got {n}"),
        }
    }
}

impl core::error::Error for TailError {}

pub const MIN_K: usize = 50;

fn sorted_positive_desc(samples: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = samples.iter().copied().filter(|x| *x > 0.0 && x.is_finite()).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Hill estimate from the `k` largest of the descending-sorted sample.
pub fn hill_at(desc: &[f64], k: usize) -> f64 {
    let lk = desc[k].ln();
    let s: f64 = desc[..k].iter().map(|x| x.ln() - lk).sum();
    k as f64 / s
}

/// Hill estimator with `k` chosen from the flattest stretch of the Hill plot.
///
/// `k` runs over a log-spaced grid from `max(MIN_K, n/500)` to a tenth of the
/// sample; the lower cut keeps noise at tiny `k` from passing for a plateau.
/// Each window of seventeen neighbouring grid points (about a decade in `k`)
/// gets a least-squares trend of `log(estimate)` against `log k`; the window
/// minimizing `|drift across window| + 3/sqrt(k)` wins. A drift above
/// [`PLATEAU_TOL`] marks the result unstable.
pub fn hill(samples: &[f64]) -> Result<TailEstimate, TailError> {
    let desc = sorted_positive_desc(samples);
    let n = desc.len();
    if n < 2 * MIN_K {
        return Err(TailError::TooFewSamples(n));
    }
    let k_max = (n / 10).max(MIN_K + 1).min(n - 1);
    let mut ks = Vec::new();
    let mut k = MIN_K.max(n / 500).min(k_max / 4).max(MIN_K) as f64;
    while (k as usize) <= k_max {
        let ki = k as usize;
        if ks.last() != Some(&ki) {
            ks.push(ki);
        }
        k *= 1.15;
    }
    let est: Vec<f64> = ks.iter().map(|&k| hill_at(&desc, k)).collect();
    let w = ks.len().min(17);
    let lk: Vec<f64> = ks.iter().map(|&k| (k as f64).ln()).collect();
    let le: Vec<f64> = est.iter().map(|e| e.ln()).collect();
    let (mut best, mut best_score, mut best_drift) = (ks.len() / 2, f64::INFINITY, f64::INFINITY);
    if w >= 3 {
        for i in 0..=ks.len() - w {
            let Some((_, slope)) = linear_fit(&lk[i..i + w], &le[i..i + w]) else { continue };
            let drift = (slope * (lk[i + w - 1] - lk[i])).abs();
            let c = i + w / 2;
            let score = drift + 3.0 / (ks[c] as f64).sqrt();
            if score < best_score {
                best_score = score;
                best_drift = drift;
                best = c;
            }
        }
    }
    let k = ks[best];
    let a = est[best];
    Ok(TailEstimate {
        exponent: a,
        stderr: a / (k as f64).sqrt(),
        k_used: k,
        method: TailMethod::Hill,
        unstable: !(best_drift <= PLATEAU_TOL),
    })
}

/// Largest relative drift of the Hill plot across the chosen window.
pub const PLATEAU_TOL: f64 = 0.1;

/// Hill estimate at a fixed `k`.
pub fn hill_fixed(samples: &[f64], k: usize) -> Result<TailEstimate, TailError> {
    let desc = sorted_positive_desc(samples);
    if desc.len() <= k || k < MIN_K {
        return Err(TailError::TooFewSamples(desc.len()));
    }
    let a = hill_at(&desc, k);
    Ok(TailEstimate { exponent: a, stderr: a / (k as f64).sqrt(), k_used: k, method: TailMethod::Hill, unstable: false })
}

/// Slope of `log(rank - 1/2)` against `log x` over the top `k` order statistics.
pub fn rank_regression(samples: &[f64], k: usize) -> Result<TailEstimate, TailError> {
    let desc = sorted_positive_desc(samples);
    if desc.len() <= k || k < MIN_K {
        return Err(TailError::TooFewSamples(desc.len()));
    }
    let xs: Vec<f64> = desc[..k].iter().map(|x| x.ln()).collect();
    let ys: Vec<f64> = (0..k).map(|i| (i as f64 + 0.5).ln()).collect();
    let (_, b) = linear_fit(&xs, &ys).ok_or(TailError::TooFewSamples(k))?;
    let a = -b;
    Ok(TailEstimate {
        exponent: a,
        stderr: a * (2.0 / k as f64).sqrt(),
        k_used: k,
        method: TailMethod::RankRegression,
        unstable: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_pass(x: &[f64]) -> (f64, f64) {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        (m, x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0))
    }

    #[test]
    fn t_quantiles() {
        assert_eq!(t_quantile_975(1), 12.706);
        assert!((t_quantile_975(60) - 2.0003).abs() < 1e-3);
        assert!((t_quantile_975(1000) - 1.9623).abs() < 1e-3);
    }

    #[test]
    fn time_batches_split_steps() {
        let mut b = TimeBatches::new(1.0);
        b.push(2.0, 0.5);
        b.push(4.0, 1.0);
        b.push(1.0, 0.5);
        assert_eq!(b.means(), &[3.0, 2.5]);
    }

    #[test]
    fn linear_fit_exact() {
        let (a, b) = linear_fit(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]).unwrap();
        assert!((a - 1.0).abs() < 1e-15 && (b - 2.0).abs() < 1e-15);
    }

    fn pareto(alpha: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| (1.0 - rng.random::<f64>()).powf(-1.0 / alpha)).collect()
    }

    #[test]
    fn hill_on_pareto() {
        let e = hill(&pareto(3.0, 100_000, 1)).unwrap();
        assert!((e.exponent - 3.0).abs() < 0.1, "{e:?}");
        assert!(!e.unstable);
        let r = rank_regression(&pareto(3.0, 100_000, 2), 2000).unwrap();
        assert!((r.exponent - 3.0).abs() < 0.2, "{r:?}");
    }

    #[test]
    fn hill_flags_exponential() {
        for seed in 0..8 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..100_000).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
            assert!(hill(&x).unwrap().unstable, "seed {seed}");
        }
    }

    #[test]
    fn hill_stable_on_pareto_seeds() {
        for seed in 10..18 {
            let e = hill(&pareto(3.0, 100_000, seed)).unwrap();
            assert!(!e.unstable && (e.exponent - 3.0).abs() < 0.1, "seed {seed}: {e:?}");
        }
    }

    #[test]
    fn hill_needs_samples() {
        assert!(hill(&[1.0; 10]).is_err());
    }

    proptest! {
        #[test]
        fn welford_matches_two_pass(x in proptest::collection::vec(-1e3f64..1e3, 2..200)) {
            let s: RunningStats = x.iter().copied().collect();
            let (m, v) = two_pass(&x);
            prop_assert!((s.mean - m).abs() <= 1e-9 * (1.0 + m.abs()));
            prop_assert!((s.variance() - v).abs() <= 1e-8 * (1.0 + v));
        }

        #[test]
        fn merge_is_concatenation(x in proptest::collection::vec(-1e3f64..1e3, 2..200), cut in 0usize..200) {
            let cut = cut.min(x.len());
            let a: RunningStats = x[..cut].iter().copied().collect();
            let b: RunningStats = x[cut..].iter().copied().collect();
            let all: RunningStats = x.iter().copied().collect();
            let m = a.merge(&b);
            prop_assert_eq!(m.n, all.n);
            prop_assert!((m.mean - all.mean).abs() <= 1e-9 * (1.0 + all.mean.abs()));
            prop_assert!((m.variance() - all.variance()).abs() <= 1e-8 * (1.0 + all.variance()));
            prop_assert_eq!(m.min, all.min);
            prop_assert_eq!(m.max, all.max);
        }
    }
}
