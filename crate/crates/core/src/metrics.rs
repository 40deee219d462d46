//! Histograms on [0, 1), histogram similarity measures, and the correlation
//! and regression helpers used for agreement analysis.
//!
//! `compare(p, q)` treats `p` as the empirical histogram and `q` as the model;
//! D_KL and ChiSq are not symmetric and use that direction.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::special::beta_reg;

pub const DEFAULT_BIN_WIDTH: f64 = 0.05;
const KL_SMOOTHING: f64 = 1e-10;

/// Fixed-width histogram over [0, 1) with right-open bins.
///
/// `weights` are raw counts for empirical histograms and bin probabilities for
/// histograms built from a distribution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    bin_width: f64,
    weights: Vec<f64>,
}

fn bin_count(bin_width: f64) -> Result<usize> {
    if !(bin_width > 0.0 && bin_width <= 1.0) {
        return Err(Error::InvalidBinWidth(bin_width));
    }
    let bins = (1.0 / bin_width).round();
    if (bins * bin_width - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidBinWidth(bin_width));
    }
    Ok(bins as usize)
}

impl Histogram {
    /// Counts `values` into bins `[k w, (k + 1) w)`; values at or above 1 go
    /// into the last bin and values below 0 into the first.
    pub fn from_values(values: &[f64], bin_width: f64) -> Result<Self> {
        let bins = bin_count(bin_width)?;
        let mut weights = vec![0.0; bins];
        for &x in values {
            let k = ((x * bins as f64).floor().max(0.0) as usize).min(bins - 1);
            weights[k] += 1.0;
        }
        Ok(Self { bin_width, weights })
    }

    /// Bin probabilities of a distribution given its CDF.
    pub fn from_cdf(cdf: impl Fn(f64) -> f64, bin_width: f64) -> Result<Self> {
        let bins = bin_count(bin_width)?;
        let edges: Vec<f64> = (0..=bins).map(|k| cdf(k as f64 / bins as f64)).collect();
        let weights = edges.windows(2).map(|e| (e[1] - e[0]).max(0.0)).collect();
        Ok(Self { bin_width, weights })
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    pub fn bins(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Bin probabilities, `None` for an empty histogram.
    pub fn probabilities(&self) -> Option<Vec<f64>> {
        let total = self.total();
        (total > 0.0).then(|| self.weights.iter().map(|w| w / total).collect())
    }

    /// Density heights (`probability / width`), `None` for an empty histogram.
    pub fn density(&self) -> Option<Vec<f64>> {
        self.probabilities().map(|p| p.into_iter().map(|p| p / self.bin_width).collect())
    }
}

pub fn histogramize(values: &[f64], bin_width: f64) -> Result<Histogram> {
    Histogram::from_values(values, bin_width)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistogramMetrics {
    pub d_kl: f64,
    pub corr: f64,
    pub chisq: f64,
    pub intersect: f64,
    pub bhattacharyya: f64,
}

/// Similarity of an empirical histogram `p` to a model histogram `q`.
///
/// Corr is Pearson over the density heights (0 when either is flat); D_KL is
/// computed after adding `1e-10` to every bin and renormalizing; ChiSq sums
/// `(p - q)^2 / p` over bins with `p > 0`.
pub fn compare(p: &Histogram, q: &Histogram) -> Result<HistogramMetrics> {
    if p.bins() != q.bins() {
        return Err(Error::BinMismatch { left: p.bins(), right: q.bins() });
    }
    let pp = p.probabilities().ok_or(Error::EmptyDataset)?;
    let qq = q.probabilities().ok_or(Error::EmptyDataset)?;

    let corr = match pearson(&p.density().expect("non-empty"), &q.density().expect("non-empty")) {
        Ok(r) => r,
        Err(Error::ZeroVariance) => {
            if pp == qq {
                1.0
            } else {
                0.0
            }
        }
        Err(e) => return Err(e),
    };

    let smooth = |v: &[f64]| -> Vec<f64> {
        let total: f64 = v.iter().map(|x| x + KL_SMOOTHING).sum();
        v.iter().map(|x| (x + KL_SMOOTHING) / total).collect()
    };
    let (ps, qs) = (smooth(&pp), smooth(&qq));
    let d_kl = ps.iter().zip(&qs).map(|(a, b)| a * (a / b).ln()).sum::<f64>().max(0.0);

    let chisq = pp
        .iter()
        .zip(&qq)
        .filter(|(a, _)| **a > 0.0)
        .map(|(a, b)| (a - b).powi(2) / a)
        .sum();
    let intersect = pp.iter().zip(&qq).map(|(a, b)| a.min(*b)).sum::<f64>().min(1.0);
    let coefficient: f64 = pp.iter().zip(&qq).map(|(a, b)| (a * b).sqrt()).sum();
    let bhattacharyya = (1.0 - coefficient).max(0.0).sqrt();

    Ok(HistogramMetrics { d_kl, corr, chisq, intersect, bhattacharyya })
}

fn check_pair(xs: &[f64], ys: &[f64]) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch { left: xs.len(), right: ys.len() });
    }
    if xs.len() < 3 {
        return Err(Error::InsufficientData { needed: 3, got: xs.len() });
    }
    Ok(())
}

struct Moments {
    mean_x: f64,
    mean_y: f64,
    sxx: f64,
    syy: f64,
    sxy: f64,
}

fn moments(xs: &[f64], ys: &[f64]) -> Result<Moments> {
    check_pair(xs, ys)?;
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mean_x, y - mean_y);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    // Relative threshold: constant vectors leave only rounding noise.
    let tiny = |s: f64, m: f64| s <= 1e-24 * n * m.abs().max(1.0).powi(2);
    if tiny(sxx, mean_x) || tiny(syy, mean_y) {
        return Err(Error::ZeroVariance);
    }
    Ok(Moments { mean_x, mean_y, sxx, syy, sxy })
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let m = moments(xs, ys)?;
    Ok((m.sxy / (m.sxx * m.syy).sqrt()).clamp(-1.0, 1.0))
}

/// Ranks starting at 1, ties sharing their average rank.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_pair(xs, ys)?;
    pearson(&average_ranks(xs), &average_ranks(ys))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares of `ys` on `xs`.
pub fn linreg(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    let m = moments(xs, ys)?;
    let slope = m.sxy / m.sxx;
    let r = m.sxy / (m.sxx * m.syy).sqrt();
    Ok(LinearFit { slope, intercept: m.mean_y - slope * m.mean_x, r_squared: (r * r).min(1.0) })
}

/// Two-sided p-value of a Pearson correlation `r` over `n` pairs (Student t
/// with `n - 2` degrees of freedom).
pub fn pearson_p_value(r: f64, n: usize) -> f64 {
    if n < 3 {
        return 1.0;
    }
    let df = (n - 2) as f64;
    let r2 = (r * r).min(1.0);
    if r2 >= 1.0 {
        return 0.0;
    }
    let t2 = df * r2 / (1.0 - r2);
    beta_reg(df / 2.0, 0.5, df / (df + t2))
}
