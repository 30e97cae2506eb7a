//! Empirical estimators: lagged covariances, the lattice correlogram,
//! Kolmogorov-Smirnov distance, empirical characteristic functions and
//! replicate standard errors.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::conv::KahanSum;
use crate::error::{Error, Result};
use crate::field::FieldSample;

/// Asymptotic Kolmogorov constants `c(alpha)` for alpha = .1, .05, .01.
pub const KS_CONSTANTS: [(f64, f64); 3] = [(0.10, 1.224), (0.05, 1.358), (0.01, 1.628)];

/// Divisor used for lag-`k` sums.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Normalization {
    /// Divide by the series length `n`.
    #[default]
    Biased,
    /// Divide by the number of pairs `n - k`.
    PairCount,
}

/// What is subtracted before forming products.
#[derive(Clone, Debug, Default, PartialEq)]
pub enum Centering {
    #[default]
    SampleMean,
    /// A known mean per component.
    Known(Vec<f64>),
}

/// Lagged `d x d` covariance matrices of one series.
#[derive(Clone, Debug)]
pub struct LagCovariance {
    pub lags: Vec<usize>,
    /// `matrices[k][a][b]` estimates `cov(X_a(t), X_b(t + lag_k))`.
    pub matrices: Vec<Vec<Vec<f64>>>,
    /// Some component has zero sample variance.
    pub degenerate: bool,
}

/// `(1/n) sum (X_t - m)(X_{t+k} - m)'` for `k = 0..=max_lag` on a row-major
/// `n x d` array.
pub fn autocovariance(
    values: &[f64],
    d: usize,
    max_lag: usize,
    centering: &Centering,
    norm: Normalization,
) -> Result<LagCovariance> {
    if d == 0 || !values.len().is_multiple_of(d) {
        return Err(Error::Dimension {
            expected: d,
            got: values.len(),
        });
    }
    let n = values.len() / d;
    if n == 0 || 4 * max_lag >= n {
        return Err(Error::Statistics(format!("max_lag {max_lag} must be below n/4 with n = {n}")));
    }
    let mean = match centering {
        Centering::SampleMean => (0..d).map(|a| column_mean(values, d, a)).collect(),
        Centering::Known(m) if m.len() == d => m.clone(),
        Centering::Known(m) => {
            return Err(Error::Dimension {
                expected: d,
                got: m.len(),
            })
        }
    };
    let centered: Vec<f64> = values.iter().enumerate().map(|(i, v)| v - mean[i % d]).collect();
    let matrices: Vec<Vec<Vec<f64>>> = (0..=max_lag)
        .into_par_iter()
        .map(|k| {
            let div = match norm {
                Normalization::Biased => n as f64,
                Normalization::PairCount => (n - k) as f64,
            };
            (0..d)
                .map(|a| {
                    (0..d)
                        .map(|b| {
                            let mut s = KahanSum::default();
                            for t in 0..n - k {
                                s.add(centered[t * d + a] * centered[(t + k) * d + b]);
                            }
                            s.value() / div
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let degenerate = (0..d).any(|a| matrices[0][a][a] == 0.0);
    Ok(LagCovariance {
        lags: (0..=max_lag).collect(),
        matrices,
        degenerate,
    })
}

/// `(1/n) sum (a_t - abar)(b_{t+k} - bbar)` for `k = 0..=max_lag`.
pub fn cross_covariance(a: &[f64], b: &[f64], max_lag: usize, norm: Normalization) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            got: b.len(),
        });
    }
    let n = a.len();
    if n == 0 || 4 * max_lag >= n {
        return Err(Error::Statistics(format!("max_lag {max_lag} must be below n/4 with n = {n}")));
    }
    let ma = column_mean(a, 1, 0);
    let mb = column_mean(b, 1, 0);
    Ok((0..=max_lag)
        .into_par_iter()
        .map(|k| {
            let mut s = KahanSum::default();
            for t in 0..n - k {
                s.add((a[t] - ma) * (b[t + k] - mb));
            }
            let div = match norm {
                Normalization::Biased => n,
                Normalization::PairCount => n - k,
            };
            s.value() / div as f64
        })
        .collect())
}

fn column_mean(values: &[f64], d: usize, a: usize) -> f64 {
    let mut s = KahanSum::default();
    let mut count = 0usize;
    for v in values.iter().skip(a).step_by(d) {
        s.add(*v);
        count += 1;
    }
    s.value() / count as f64
}

/// Per-lag estimates averaged over independent replicates.
#[derive(Clone, Debug)]
pub struct LagStatistics {
    pub lags: Vec<usize>,
    pub estimates: Vec<f64>,
    pub se: Vec<f64>,
    pub n: usize,
    pub replicates: usize,
}

impl LagStatistics {
    /// `per_replicate[r][k]` is replicate `r`'s estimate at `lags[k]`.
    pub fn from_replicates(lags: Vec<usize>, per_replicate: &[Vec<f64>], n: usize) -> Result<Self> {
        let r = per_replicate.len();
        if r < 2 {
            return Err(Error::Statistics("need at least two replicates".into()));
        }
        if let Some(bad) = per_replicate.iter().find(|v| v.len() != lags.len()) {
            return Err(Error::Dimension {
                expected: lags.len(),
                got: bad.len(),
            });
        }
        let mut estimates = Vec::with_capacity(lags.len());
        let mut se = Vec::with_capacity(lags.len());
        for k in 0..lags.len() {
            let col: Vec<f64> = per_replicate.iter().map(|v| v[k]).collect();
            let (m, s) = mean_se(&col);
            if !m.is_finite() {
                return Err(Error::Statistics(format!("non-finite estimate at lag {}", lags[k])));
            }
            estimates.push(m);
            se.push(s);
        }
        Ok(LagStatistics {
            lags,
            estimates,
            se,
            n,
            replicates: r,
        })
    }

    /// Largest `|estimate - target| / se` over the lags.
    pub fn max_z(&self, target: impl Fn(usize) -> f64) -> f64 {
        self.lags
            .iter()
            .zip(self.estimates.iter().zip(&self.se))
            .map(|(&l, (e, s))| (e - target(l)).abs() / s.max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max)
    }
}

/// Sample mean and its standard error `sd / sqrt(r)`.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let r = xs.len() as f64;
    let mut s = KahanSum::default();
    xs.iter().for_each(|x| s.add(*x));
    let m = s.value() / r;
    if xs.len() < 2 {
        return (m, f64::NAN);
    }
    let mut q = KahanSum::default();
    xs.iter().for_each(|x| q.add((x - m) * (x - m)));
    (m, (q.value() / (r - 1.0) / r).sqrt())
}

/// Lattice correlogram over lags `s` with `|s_k| <= window_k`.
#[derive(Clone, Debug)]
pub struct Correlogram {
    pub window: Vec<usize>,
    /// Values in row-major order over the lag grid, first axis slowest.
    pub values: Vec<f64>,
    /// `|N_s|` for each lag.
    pub counts: Vec<usize>,
}

impl Correlogram {
    fn slot(&self, lag: &[i64]) -> Option<usize> {
        let mut idx = 0usize;
        for (&l, &w) in lag.iter().zip(&self.window) {
            if l.unsigned_abs() as usize > w {
                return None;
            }
            idx = idx * (2 * w + 1) + (l + w as i64) as usize;
        }
        Some(idx)
    }

    pub fn get(&self, lag: &[i64]) -> Option<f64> {
        if lag.len() != self.window.len() {
            return None;
        }
        self.slot(lag).map(|i| self.values[i])
    }

    pub fn count(&self, lag: &[i64]) -> Option<usize> {
        if lag.len() != self.window.len() {
            return None;
        }
        self.slot(lag).map(|i| self.counts[i])
    }

    /// All lag vectors in storage order.
    pub fn lags(&self) -> Vec<Vec<i64>> {
        let total: usize = self.window.iter().map(|w| 2 * w + 1).product();
        (0..total)
            .map(|mut i| {
                let mut lag = vec![0i64; self.window.len()];
                for (k, &w) in self.window.iter().enumerate().rev() {
                    let side = 2 * w + 1;
                    lag[k] = (i % side) as i64 - w as i64;
                    i /= side;
                }
                lag
            })
            .collect()
    }
}

/// `sum_{t - t' = s} (X(t) - Xbar)(X(t') - Xbar) / |N_s|` for component `comp`.
pub fn field_correlogram(field: &FieldSample, comp: usize, window: &[usize]) -> Result<Correlogram> {
    let n = field.extents.len();
    if window.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: window.len(),
        });
    }
    if comp >= field.dim {
        return Err(Error::Dimension {
            expected: field.dim,
            got: comp,
        });
    }
    for (k, (&w, &e)) in window.iter().zip(&field.extents).enumerate() {
        if 2 * w > e {
            return Err(Error::Statistics(format!(
                "window {w} on axis {} exceeds half the extent {e}",
                k + 1
            )));
        }
    }
    let x = field.component(comp);
    let mean = column_mean(&x, 1, 0);
    let c: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let shell = Correlogram {
        window: window.to_vec(),
        values: Vec::new(),
        counts: Vec::new(),
    };
    let lags = shell.lags();
    let ext = &field.extents;
    let results: Vec<(f64, usize)> = lags
        .par_iter()
        .map(|s| {
            // t ranges over sites with t - s inside the lattice
            let ranges: Vec<(usize, usize)> = s
                .iter()
                .zip(ext)
                .map(|(&sk, &e)| {
                    let lo = sk.max(0) as usize;
                    let hi = (e as i64 + sk.min(0)) as usize;
                    (lo, hi)
                })
                .collect();
            let count: usize = ranges.iter().map(|(lo, hi)| hi - lo).product();
            if count == 0 {
                return (f64::NAN, 0);
            }
            let mut t: Vec<usize> = ranges.iter().map(|r| r.0).collect();
            let mut acc = KahanSum::default();
            let offset = s.iter().zip(ext).fold(0i64, |a, (&sk, &e)| a * e as i64 + sk);
            loop {
                let i = field.index(&t);
                acc.add(c[i] * c[(i as i64 - offset) as usize]);
                let mut k = n;
                loop {
                    if k == 0 {
                        return (acc.value() / count as f64, count);
                    }
                    k -= 1;
                    t[k] += 1;
                    if t[k] < ranges[k].1 {
                        break;
                    }
                    t[k] = ranges[k].0;
                }
            }
        })
        .collect();
    if results.iter().any(|r| r.1 == 0) {
        return Err(Error::Statistics("empty pair set".into()));
    }
    Ok(Correlogram {
        window: window.to_vec(),
        values: results.iter().map(|r| r.0).collect(),
        counts: results.iter().map(|r| r.1).collect(),
    })
}

#[derive(Clone, Debug)]
pub struct KsResult {
    pub statistic: f64,
    pub n: usize,
    /// `(alpha, c(alpha)/sqrt(n))`.
    pub critical: Vec<(f64, f64)>,
}

impl KsResult {
    /// The statistic lies below the critical value at `alpha`.
    pub fn passes(&self, alpha: f64) -> bool {
        self.critical
            .iter()
            .find(|(a, _)| (*a - alpha).abs() < 1e-12)
            .map(|(_, c)| self.statistic <= *c)
            .unwrap_or(false)
    }

    pub fn critical_at(&self, alpha: f64) -> Option<f64> {
        self.critical.iter().find(|(a, _)| (*a - alpha).abs() < 1e-12).map(|c| c.1)
    }
}

/// `sup_x |F_n(x) - F(x)|`, comparing both sides of every sample point.
/// `left` gives `F(x-)`; pass `None` for a continuous `F`.
pub fn ks_distance(samples: &[f64], cdf: &dyn Fn(f64) -> f64, left: Option<&dyn Fn(f64) -> f64>) -> Result<KsResult> {
    let n = samples.len();
    if n < 100 {
        return Err(Error::Statistics(format!("need at least 100 samples, got {n}")));
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::Statistics("NaN sample".into()));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let nf = n as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < n {
        let x = xs[i];
        let mut j = i;
        while j < n && xs[j] == x {
            j += 1;
        }
        let below = i as f64 / nf;
        let at = j as f64 / nf;
        let f = cdf(x);
        let f_left = left.map(|l| l(x)).unwrap_or(f);
        d = d.max((at - f).abs()).max((below - f_left).abs());
        i = j;
    }
    Ok(KsResult {
        statistic: d,
        n,
        critical: KS_CONSTANTS.iter().map(|&(a, c)| (a, c / nf.sqrt())).collect(),
    })
}

/// Mean of `exp(i theta' x)` over the rows of an `n x d` array, with the
/// `1/sqrt(n)` error scale.
pub fn empirical_cf(values: &[f64], d: usize, theta: &[f64]) -> Result<(Complex64, f64)> {
    if theta.len() != d || d == 0 || !values.len().is_multiple_of(d) || values.is_empty() {
        return Err(Error::Dimension {
            expected: d,
            got: theta.len(),
        });
    }
    let n = values.len() / d;
    let (mut re, mut im) = (KahanSum::default(), KahanSum::default());
    for row in values.chunks(d) {
        let phase: f64 = row.iter().zip(theta).map(|(x, t)| x * t).sum();
        re.add(phase.cos());
        im.add(phase.sin());
    }
    Ok((Complex64::new(re.value(), im.value()) / n as f64, 1.0 / (n as f64).sqrt()))
}
