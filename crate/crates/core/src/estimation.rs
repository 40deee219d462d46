//! Maximum-likelihood fitting: single Beta/Gaussian fits, shape-constrained
//! Beta fits for the tail styles, two-component EM, and the grid search for
//! the tail weight of the whole-profile mixture.

use serde::Serialize;

use crate::distributions::{
    BetaParams, Component, Family, GaussianParams, MainDist, Mixture2,
};
use crate::error::{Error, Result};
use crate::special::{digamma, ln_beta, log_add_exp, trigamma};

/// Numerical box for Beta shapes.
const MIN_SHAPE: f64 = 1e-4;
const MAX_SHAPE: f64 = 1e6;
/// Offset used to keep strict shape inequalities strict.
pub const SHAPE_MARGIN: f64 = 1e-6;
/// Floor on fitted Gaussian spreads.
const MIN_SIGMA: f64 = 1e-4;

/// Relative log-likelihood difference below which grid points tie.
pub const GRID_TIE_TOLERANCE: f64 = 1e-12;

const EM_TOLERANCE: f64 = 1e-6;
const EM_MAX_ITER: usize = 500;

pub fn aic(loglik: f64, k: usize) -> f64 {
    2.0 * k as f64 - 2.0 * loglik
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitResult<P> {
    pub params: P,
    pub loglik: f64,
    /// Number of free parameters.
    pub k: usize,
    pub aic: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl<P> FitResult<P> {
    pub fn new(params: P, loglik: f64, k: usize) -> Self {
        Self { params, loglik, k, aic: aic(loglik, k), converged: true, iterations: 0 }
    }

    pub fn map<Q>(self, f: impl FnOnce(P) -> Q) -> FitResult<Q> {
        FitResult {
            params: f(self.params),
            loglik: self.loglik,
            k: self.k,
            aic: self.aic,
            converged: self.converged,
            iterations: self.iterations,
        }
    }
}

/// Shape restriction of a tail response style.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum ShapeClass {
    /// U-shape: `alpha < 1`, `beta < 1`.
    Ers,
    /// Decreasing: `alpha <= 1`, `beta > 1`.
    Drs,
    /// Increasing: `alpha > 1`, `beta <= 1`.
    Ars,
}

impl ShapeClass {
    pub const ALL: [ShapeClass; 3] = [ShapeClass::Ers, ShapeClass::Drs, ShapeClass::Ars];

    pub fn contains(&self, p: &BetaParams) -> bool {
        let (a, b) = (p.alpha(), p.beta());
        match self {
            ShapeClass::Ers => a < 1.0 && b < 1.0,
            ShapeClass::Drs => a <= 1.0 && b > 1.0,
            ShapeClass::Ars => a > 1.0 && b <= 1.0,
        }
    }

    fn bounds(&self) -> (Interval, Interval) {
        let below = Interval { lo: MIN_SHAPE, hi: 1.0 - SHAPE_MARGIN };
        let at_most = Interval { lo: MIN_SHAPE, hi: 1.0 };
        let above = Interval { lo: 1.0 + SHAPE_MARGIN, hi: MAX_SHAPE };
        match self {
            ShapeClass::Ers => (below, below),
            ShapeClass::Drs => (at_most, above),
            ShapeClass::Ars => (above, at_most),
        }
    }
}

impl std::fmt::Display for ShapeClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ShapeClass::Ers => "ERS",
            ShapeClass::Drs => "DRS",
            ShapeClass::Ars => "ARS",
        })
    }
}

#[derive(Debug, Clone, Copy)]
struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

const FREE: Interval = Interval { lo: MIN_SHAPE, hi: MAX_SHAPE };

/// Weighted means of `ln x` and `ln(1 - x)`: the Beta sufficient statistics.
#[derive(Debug, Clone, Copy)]
struct BetaStats {
    ln_x: f64,
    ln_1mx: f64,
}

impl BetaStats {
    fn weighted(ln_x: &[f64], ln_1mx: &[f64], weights: Option<&[f64]>) -> Self {
        match weights {
            None => {
                let n = ln_x.len() as f64;
                Self { ln_x: ln_x.iter().sum::<f64>() / n, ln_1mx: ln_1mx.iter().sum::<f64>() / n }
            }
            Some(w) => {
                let total: f64 = w.iter().sum();
                let a = ln_x.iter().zip(w).map(|(l, w)| l * w).sum::<f64>();
                let b = ln_1mx.iter().zip(w).map(|(l, w)| l * w).sum::<f64>();
                Self { ln_x: a / total, ln_1mx: b / total }
            }
        }
    }

    /// Mean log-likelihood per unit weight. Concave in `(a, b)`.
    fn objective(&self, a: f64, b: f64) -> f64 {
        (a - 1.0) * self.ln_x + (b - 1.0) * self.ln_1mx - ln_beta(a, b)
    }

    fn gradient(&self, a: f64, b: f64) -> (f64, f64) {
        let s = digamma(a + b);
        (self.ln_x - digamma(a) + s, self.ln_1mx - digamma(b) + s)
    }
}

/// Unconstrained maximizer by damped Newton iterations.
fn newton_beta(stats: &BetaStats, start: (f64, f64)) -> (f64, f64) {
    let (mut a, mut b) = (start.0.clamp(MIN_SHAPE, MAX_SHAPE), start.1.clamp(MIN_SHAPE, MAX_SHAPE));
    let mut f = stats.objective(a, b);
    for _ in 0..200 {
        let (ga, gb) = stats.gradient(a, b);
        let t = trigamma(a + b);
        // Hessian of the objective; negative definite.
        let haa = t - trigamma(a);
        let hbb = t - trigamma(b);
        let hab = t;
        let det = haa * hbb - hab * hab;
        if !det.is_finite() || det <= 0.0 {
            break;
        }
        let da = -(hbb * ga - hab * gb) / det;
        let db = -(haa * gb - hab * ga) / det;
        let mut step = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            let na = a + step * da;
            let nb = b + step * db;
            if na > 0.0 && nb > 0.0 {
                let nf = stats.objective(na, nb);
                if nf >= f {
                    a = na;
                    b = nb;
                    f = nf;
                    moved = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !moved || (step * da).abs() <= 1e-13 * a.max(1.0) && (step * db).abs() <= 1e-13 * b.max(1.0)
        {
            break;
        }
        if a > MAX_SHAPE || b > MAX_SHAPE {
            break;
        }
    }
    (a, b)
}

/// Maximizes a concave function of one variable on `range` given its first
/// and second derivatives.
fn maximize_1d(range: Interval, d1: impl Fn(f64) -> f64, d2: impl Fn(f64) -> f64) -> f64 {
    if d1(range.lo) <= 0.0 {
        return range.lo;
    }
    if d1(range.hi) >= 0.0 {
        return range.hi;
    }
    let (mut lo, mut hi) = (range.lo, range.hi);
    let mut x = (lo * hi).sqrt();
    for _ in 0..200 {
        let g = d1(x);
        if g > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - g / d2(x);
        x = if newton > lo && newton < hi && newton.is_finite() { newton } else { (lo * hi).sqrt() };
        if hi - lo <= 1e-14 * hi || g.abs() < 1e-14 {
            break;
        }
    }
    x
}

/// Maximizer of the Beta log-likelihood over the box `ra x rb`.
fn maximize_beta_box(stats: &BetaStats, ra: Interval, rb: Interval, start: (f64, f64)) -> (f64, f64) {
    let (a, b) = newton_beta(stats, start);
    if ra.contains(a) && rb.contains(b) {
        return (a, b);
    }
    // The objective is concave, so with the free optimum outside the box the
    // constrained optimum lies on one of its four edges.
    let mut best = (f64::NEG_INFINITY, (a, b));
    let mut consider = |pa: f64, pb: f64| {
        let f = stats.objective(pa, pb);
        if f > best.0 {
            best = (f, (pa, pb));
        }
    };
    for &fixed_a in &[ra.lo, ra.hi] {
        let pb = maximize_1d(
            rb,
            |b| stats.ln_1mx - digamma(b) + digamma(fixed_a + b),
            |b| trigamma(fixed_a + b) - trigamma(b),
        );
        consider(fixed_a, pb);
    }
    for &fixed_b in &[rb.lo, rb.hi] {
        let pa = maximize_1d(
            ra,
            |a| stats.ln_x - digamma(a) + digamma(a + fixed_b),
            |a| trigamma(a + fixed_b) - trigamma(a),
        );
        consider(pa, fixed_b);
    }
    best.1
}

fn moment_start(values: &[f64], weights: Option<&[f64]>) -> (f64, f64) {
    let (mean, std) = weighted_mean_std(values, weights);
    let std = std.min(0.99 * (mean * (1.0 - mean)).sqrt()).max(1e-9);
    match BetaParams::from_moments(mean.clamp(1e-9, 1.0 - 1e-9), std) {
        Ok(p) => (p.alpha(), p.beta()),
        Err(_) => (1.0, 1.0),
    }
}

fn weighted_mean_std(values: &[f64], weights: Option<&[f64]>) -> (f64, f64) {
    match weights {
        None => {
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            (mean, var.sqrt())
        }
        Some(w) => {
            let total: f64 = w.iter().sum();
            let mean = values.iter().zip(w).map(|(x, w)| x * w).sum::<f64>() / total;
            let var = values.iter().zip(w).map(|(x, w)| w * (x - mean).powi(2)).sum::<f64>() / total;
            (mean, var.sqrt())
        }
    }
}

fn check_unit_data(data: &[f64]) -> Result<()> {
    match data.iter().find(|&&x| !(x > 0.0 && x < 1.0)) {
        Some(&x) => Err(Error::Domain { value: x }),
        None => Ok(()),
    }
}

fn is_degenerate(data: &[f64]) -> bool {
    data.iter().all(|&x| x == data[0])
}

fn logs(data: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (data.iter().map(|x| x.ln()).collect(), data.iter().map(|x| (-x).ln_1p()).collect())
}

/// Plain maximum-likelihood fit of one Beta or Gaussian.
pub fn fit_unimodal(data: &[f64], family: Family) -> Result<FitResult<Component>> {
    if data.len() < 3 {
        return Err(Error::InsufficientData { needed: 3, got: data.len() });
    }
    check_unit_data(data)?;
    if is_degenerate(data) {
        return Err(Error::DegenerateData);
    }
    let comp = match family {
        Family::Gaussian => {
            let (mu, sigma) = weighted_mean_std(data, None);
            Component::Gaussian(GaussianParams::new(mu, sigma.max(MIN_SIGMA))?)
        }
        Family::Beta => {
            let (lx, l1x) = logs(data);
            let stats = BetaStats::weighted(&lx, &l1x, None);
            let (a, b) = newton_beta(&stats, moment_start(data, None));
            Component::Beta(BetaParams::new(a.clamp(MIN_SHAPE, MAX_SHAPE), b.clamp(MIN_SHAPE, MAX_SHAPE))?)
        }
    };
    let loglik = data.iter().map(|&x| comp.ln_pdf(x)).sum();
    Ok(FitResult::new(comp, loglik, 2))
}

/// Beta maximum likelihood restricted to the region of `shape`.
///
/// When the free optimum violates the restriction the result sits on the
/// region boundary (a shape clamped to 1, or to `1 -/+ SHAPE_MARGIN` for
/// strict inequalities).
pub fn fit_beta_constrained(data: &[f64], shape: ShapeClass, min_n: usize) -> Result<FitResult<BetaParams>> {
    let needed = min_n.max(2);
    if data.len() < needed {
        return Err(Error::InsufficientData { needed, got: data.len() });
    }
    check_unit_data(data)?;
    if is_degenerate(data) {
        return Err(Error::DegenerateData);
    }
    let (lx, l1x) = logs(data);
    let stats = BetaStats::weighted(&lx, &l1x, None);
    let (ra, rb) = shape.bounds();
    let (a, b) = maximize_beta_box(&stats, ra, rb, moment_start(data, None));
    let params = BetaParams::new(a, b)?;
    debug_assert!(shape.contains(&params), "{shape} fit escaped its region: {params:?}");
    let loglik = lx.iter().zip(&l1x).map(|(&l, &m)| params.ln_pdf_logs(l, m)).sum();
    Ok(FitResult::new(params, loglik, 2))
}

/// Two-component EM fit. See [`fit_mixture2_em_traced`].
pub fn fit_mixture2_em(data: &[f64], family: Family, min_n: usize) -> Result<FitResult<Mixture2>> {
    fit_mixture2_em_traced(data, family, min_n).map(|(fit, _)| fit)
}

/// Two-component EM returning the log-likelihood after every iteration.
///
/// Initialization is deterministic: the sorted data are split at the median
/// and each half is moment-matched, with equal starting weights. The M-step
/// moment-matches each component on its responsibilities; Beta components are
/// then refined to the weighted maximum-likelihood point, and a component
/// update is only kept if it does not lower that component's expected
/// complete-data log-likelihood, so the observed log-likelihood never
/// decreases. Iteration stops when the relative change falls below `1e-6` or
/// after 500 iterations; the latter is reported through `converged = false`.
pub fn fit_mixture2_em_traced(
    data: &[f64],
    family: Family,
    min_n: usize,
) -> Result<(FitResult<Mixture2>, Vec<f64>)> {
    let needed = min_n.max(4);
    if data.len() < needed {
        return Err(Error::InsufficientData { needed, got: data.len() });
    }
    check_unit_data(data)?;
    if is_degenerate(data) {
        return Err(Error::DegenerateData);
    }
    let n = data.len();
    let (lx, l1x) = logs(data);

    let mut sorted = data.to_vec();
    sorted.sort_by(f64::total_cmp);
    let half = n / 2;
    let init = |part: &[f64]| -> Result<Component> {
        match family {
            Family::Gaussian => {
                let (m, s) = weighted_mean_std(part, None);
                Ok(Component::Gaussian(GaussianParams::new(m, s.max(MIN_SIGMA))?))
            }
            Family::Beta => {
                let (a, b) = moment_start(part, None);
                Ok(Component::Beta(BetaParams::new(a, b)?))
            }
        }
    };
    let mut comps = [init(&sorted[..half])?, init(&sorted[half..])?];
    let mut weights = [0.5, 0.5];

    let comp_ln_pdf = |c: &Component, i: usize| -> f64 {
        match c {
            Component::Beta(p) => p.ln_pdf_logs(lx[i], l1x[i]),
            Component::Gaussian(g) => g.ln_pdf(data[i]),
        }
    };

    let mut resp = [vec![0.0; n], vec![0.0; n]];
    let e_step = |comps: &[Component; 2], weights: &[f64; 2], resp: &mut [Vec<f64>; 2]| -> f64 {
        let lw = weights.map(|w| if w > 0.0 { w.ln() } else { f64::NEG_INFINITY });
        let mut ll = 0.0;
        #[allow(clippy::needless_range_loop)]
        for i in 0..n {
            let l0 = lw[0] + comp_ln_pdf(&comps[0], i);
            let l1 = lw[1] + comp_ln_pdf(&comps[1], i);
            let total = log_add_exp(l0, l1);
            resp[0][i] = (l0 - total).exp();
            resp[1][i] = (l1 - total).exp();
            ll += total;
        }
        ll
    };

    let mut ll = e_step(&comps, &weights, &mut resp);
    let mut trace = vec![ll];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < EM_MAX_ITER {
        iterations += 1;
        for j in 0..2 {
            let r = &resp[j];
            let mass: f64 = r.iter().sum();
            weights[j] = mass / n as f64;
            if mass < 1e-10 {
                continue;
            }
            let expected = |c: &Component| -> f64 {
                r.iter().enumerate().map(|(i, &ri)| if ri > 0.0 { ri * comp_ln_pdf(c, i) } else { 0.0 }).sum()
            };
            let candidate = match family {
                Family::Gaussian => {
                    let (m, s) = weighted_mean_std(data, Some(r));
                    GaussianParams::new(m, s.max(MIN_SIGMA)).map(Component::Gaussian)
                }
                Family::Beta => {
                    let stats = BetaStats::weighted(&lx, &l1x, Some(r));
                    let (a, b) = maximize_beta_box(&stats, FREE, FREE, moment_start(data, Some(r)));
                    BetaParams::new(a, b).map(Component::Beta)
                }
            };
            if let Ok(c) = candidate {
                if expected(&c) >= expected(&comps[j]) {
                    comps[j] = c;
                }
            }
        }
        let total = weights[0] + weights[1];
        weights = [weights[0] / total, weights[1] / total];
        let next = e_step(&comps, &weights, &mut resp);
        debug_assert!(
            next >= ll - 1e-8 * ll.abs().max(1.0),
            "EM log-likelihood decreased: {ll} -> {next}"
        );
        trace.push(next);
        let change = (next - ll).abs() / ll.abs().max(1e-300);
        ll = next;
        if change < EM_TOLERANCE {
            converged = true;
            break;
        }
    }

    let mixture = Mixture2::new(weights[0].clamp(0.0, 1.0), comps[0], comps[1])?.canonical();
    let mut fit = FitResult::new(mixture, ll, 5);
    fit.converged = converged;
    fit.iterations = iterations;
    Ok((fit, trace))
}

/// Log-likelihood of `w * sub + (1 - w) * main` on `data` for each `w` in
/// `{0, step, ..., 1}`.
pub fn weight_grid_logliks(data: &[f64], main: &MainDist, sub: &BetaParams, step: f64) -> Vec<(f64, f64)> {
    let steps = (1.0 / step).round() as usize;
    let lm: Vec<f64> = data.iter().map(|&x| main.ln_pdf_unit(x)).collect();
    let ls: Vec<f64> = data.iter().map(|&x| sub.ln_pdf_logs(x.ln(), (-x).ln_1p())).collect();
    (0..=steps)
        .map(|i| {
            let w = i as f64 / steps as f64;
            let ll = if i == 0 {
                lm.iter().sum()
            } else if i == steps {
                ls.iter().sum()
            } else {
                let (lw, l1w) = (w.ln(), (-w).ln_1p());
                lm.iter().zip(&ls).map(|(&m, &s)| log_add_exp(lw + s, l1w + m)).sum()
            };
            (w, ll)
        })
        .collect()
}

/// Grid search of the tail weight with `main` and `sub` held fixed.
///
/// Ties (log-likelihoods within [`GRID_TIE_TOLERANCE`], relative) go to the
/// smaller weight. The returned fit counts `k_main + 3` parameters (two tail
/// shapes and the weight).
pub fn fit_weight_grid(
    data: &[f64],
    main: &MainDist,
    k_main: usize,
    sub: &BetaParams,
    step: f64,
) -> FitResult<f64> {
    let mut best = (0.0, f64::NEG_INFINITY);
    for (w, ll) in weight_grid_logliks(data, main, sub, step) {
        if ll > best.1 + GRID_TIE_TOLERANCE * best.1.abs().max(1.0) || best.1 == f64::NEG_INFINITY && ll > best.1 {
            best = (w, ll);
        }
    }
    FitResult::new(best.0, best.1, k_main + 3)
}
