//! Beta, Gaussian and uniform densities on the unit interval, their
//! two-component mixtures, and the whole-profile mixture
//! `w_sub * Sub + (1 - w_sub) * Main`.
//!
//! Densities are evaluated in log space; `pdf` methods are thin wrappers.
//! Gaussian components live on the real line when fitted, but whenever a
//! density is used as a distribution *on (0, 1)* (the `*_unit` methods) it is
//! renormalized by its mass inside the interval.

use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{beta_reg, ln_beta, log_add_exp, normal_cdf, normal_ln_pdf};

/// Values are kept inside `[UNIT_EPS, 1 - UNIT_EPS]` after normalization and
/// sampling.
pub const UNIT_EPS: f64 = 1e-6;

pub(crate) fn clamp_unit(x: f64) -> f64 {
    x.clamp(UNIT_EPS, 1.0 - UNIT_EPS)
}

fn check_unit(x: f64) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain { value: x })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Beta,
    #[serde(alias = "normal")]
    Gaussian,
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "beta" => Ok(Family::Beta),
            "gaussian" | "normal" => Ok(Family::Gaussian),
            other => Err(Error::InvalidConfig(format!("unknown family '{other}'"))),
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::Beta => "beta",
            Family::Gaussian => "gaussian",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaParams {
    alpha: f64,
    beta: f64,
}

impl BetaParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if alpha.is_finite() && beta.is_finite() && alpha > 0.0 && beta > 0.0 {
            Ok(Self { alpha, beta })
        } else {
            Err(Error::InvalidParams(format!(
                "beta shapes must be positive and finite (alpha={alpha}, beta={beta})"
            )))
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Log-density from precomputed `ln x` and `ln(1 - x)`.
    #[inline]
    pub fn ln_pdf_logs(&self, ln_x: f64, ln_1mx: f64) -> f64 {
        (self.alpha - 1.0) * ln_x + (self.beta - 1.0) * ln_1mx - ln_beta(self.alpha, self.beta)
    }

    pub fn ln_pdf(&self, x: f64) -> Result<f64> {
        check_unit(x)?;
        Ok(self.ln_pdf_logs(x.ln(), (-x).ln_1p()))
    }

    pub fn pdf(&self, x: f64) -> Result<f64> {
        self.ln_pdf(x).map(f64::exp)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else if x >= 1.0 {
            1.0
        } else {
            beta_reg(self.alpha, self.beta, x)
        }
    }

    /// Location of the density peak. Shapes at or below 1 put the peak on the
    /// boundary; the symmetric U-shape (`alpha == beta <= 1`) reports 0.5.
    pub fn mode(&self) -> f64 {
        let (a, b) = (self.alpha, self.beta);
        if a > 1.0 && b > 1.0 {
            (a - 1.0) / (a + b - 2.0)
        } else if a <= 1.0 && b > 1.0 {
            0.0
        } else if b <= 1.0 && a > 1.0 {
            1.0
        } else if a == b {
            0.5
        } else if a < b {
            // U-shape leaning left: the unbounded end with the heavier singularity.
            0.0
        } else {
            1.0
        }
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    /// `(mean, std)`.
    pub fn moments(&self) -> (f64, f64) {
        let (a, b) = (self.alpha, self.beta);
        let s = a + b;
        (a / s, (a * b / (s * s * (s + 1.0))).sqrt())
    }

    /// Inverse of [`BetaParams::moments`].
    pub fn from_moments(mean: f64, std: f64) -> Result<Self> {
        let var = std * std;
        if !(mean > 0.0 && mean < 1.0) || std.is_nan() || std <= 0.0 || var >= mean * (1.0 - mean) {
            return Err(Error::InfeasibleMoments { mean, std });
        }
        let nu = mean * (1.0 - mean) / var - 1.0;
        Self::new(mean * nu, (1.0 - mean) * nu)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let dist = rand_distr::Beta::new(self.alpha, self.beta).expect("validated shapes");
        dist.sample(rng)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianParams {
    mu: f64,
    sigma: f64,
}

impl GaussianParams {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if mu.is_finite() && sigma.is_finite() && sigma > 0.0 {
            Ok(Self { mu, sigma })
        } else {
            Err(Error::InvalidParams(format!(
                "gaussian needs finite mu and positive sigma (mu={mu}, sigma={sigma})"
            )))
        }
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Log-density on the real line.
    #[inline]
    pub fn ln_pdf(&self, x: f64) -> f64 {
        normal_ln_pdf((x - self.mu) / self.sigma) - self.sigma.ln()
    }

    /// Probability mass inside (0, 1).
    pub fn unit_mass(&self) -> f64 {
        normal_cdf((1.0 - self.mu) / self.sigma) - normal_cdf(-self.mu / self.sigma)
    }

    fn ln_unit_mass(&self) -> f64 {
        self.unit_mass().max(f64::MIN_POSITIVE).ln()
    }

    pub fn cdf_unit(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        let lo = normal_cdf(-self.mu / self.sigma);
        ((normal_cdf((x - self.mu) / self.sigma) - lo) / self.unit_mass().max(f64::MIN_POSITIVE))
            .clamp(0.0, 1.0)
    }

    /// Mean of the distribution truncated to (0, 1).
    pub fn unit_mean(&self) -> f64 {
        let a = -self.mu / self.sigma;
        let b = (1.0 - self.mu) / self.sigma;
        let z = self.unit_mass();
        if z < 1e-300 {
            return self.mu.clamp(0.0, 1.0);
        }
        self.mu + self.sigma * (normal_ln_pdf(a).exp() - normal_ln_pdf(b).exp()) / z
    }

    /// Draw from the distribution truncated to (0, 1).
    pub fn sample_unit<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let normal = rand_distr::Normal::new(self.mu, self.sigma).expect("validated sigma");
        for _ in 0..10_000 {
            let x = normal.sample(rng);
            if x > 0.0 && x < 1.0 {
                return x;
            }
        }
        clamp_unit(self.mu)
    }
}

/// One component of a unimodal or bimodal main profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Component {
    Beta(BetaParams),
    Gaussian(GaussianParams),
}

impl Component {
    pub fn family(&self) -> Family {
        match self {
            Component::Beta(_) => Family::Beta,
            Component::Gaussian(_) => Family::Gaussian,
        }
    }

    /// Log-density as fitted: Beta on (0, 1), Gaussian on the real line.
    #[inline]
    pub fn ln_pdf(&self, x: f64) -> f64 {
        match self {
            Component::Beta(p) => p.ln_pdf_logs(x.ln(), (-x).ln_1p()),
            Component::Gaussian(p) => p.ln_pdf(x),
        }
    }

    /// Log-density of the component as a distribution on (0, 1).
    #[inline]
    pub fn ln_pdf_unit(&self, x: f64) -> f64 {
        match self {
            Component::Beta(p) => p.ln_pdf_logs(x.ln(), (-x).ln_1p()),
            Component::Gaussian(p) => p.ln_pdf(x) - p.ln_unit_mass(),
        }
    }

    pub fn cdf_unit(&self, x: f64) -> f64 {
        match self {
            Component::Beta(p) => p.cdf(x),
            Component::Gaussian(p) => p.cdf_unit(x),
        }
    }

    /// Location parameter as reported: Beta mean or Gaussian mu.
    pub fn mean(&self) -> f64 {
        match self {
            Component::Beta(p) => p.mean(),
            Component::Gaussian(p) => p.mu,
        }
    }

    pub fn unit_mean(&self) -> f64 {
        match self {
            Component::Beta(p) => p.mean(),
            Component::Gaussian(p) => p.unit_mean(),
        }
    }

    /// Peak location used by the bimodal separation measure.
    pub fn peak(&self) -> f64 {
        match self {
            Component::Beta(p) => p.mode(),
            Component::Gaussian(p) => p.mu,
        }
    }

    /// The two native parameters: `(alpha, beta)` or `(mu, sigma)`.
    pub fn raw(&self) -> (f64, f64) {
        match self {
            Component::Beta(p) => (p.alpha, p.beta),
            Component::Gaussian(p) => (p.mu, p.sigma),
        }
    }

    pub fn sample_unit<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Component::Beta(p) => p.sample(rng),
            Component::Gaussian(p) => p.sample_unit(rng),
        }
    }
}

/// Two-component mixture of one family. `w2` is always `1 - w1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Mixture2 {
    w1: f64,
    w2: f64,
    comp1: Component,
    comp2: Component,
}

impl Mixture2 {
    pub fn new(w1: f64, comp1: Component, comp2: Component) -> Result<Self> {
        if !(0.0..=1.0).contains(&w1) {
            return Err(Error::InvalidParams(format!("mixture weight {w1} outside [0, 1]")));
        }
        if comp1.family() != comp2.family() {
            return Err(Error::InvalidParams("mixture components differ in family".into()));
        }
        Ok(Self { w1, w2: 1.0 - w1, comp1, comp2 })
    }

    pub fn w1(&self) -> f64 {
        self.w1
    }

    pub fn w2(&self) -> f64 {
        self.w2
    }

    pub fn comp1(&self) -> &Component {
        &self.comp1
    }

    pub fn comp2(&self) -> &Component {
        &self.comp2
    }

    pub fn family(&self) -> Family {
        self.comp1.family()
    }

    /// Components ordered by descending weight, ties by ascending mean.
    pub fn canonical(self) -> Self {
        let swap = self.w2 > self.w1
            || (self.w2 == self.w1 && self.comp2.mean() < self.comp1.mean());
        if swap {
            Self { w1: self.w2, w2: self.w1, comp1: self.comp2, comp2: self.comp1 }
        } else {
            self
        }
    }

    fn mix(&self, l1: f64, l2: f64) -> f64 {
        let a = if self.w1 > 0.0 { self.w1.ln() + l1 } else { f64::NEG_INFINITY };
        let b = if self.w2 > 0.0 { self.w2.ln() + l2 } else { f64::NEG_INFINITY };
        log_add_exp(a, b)
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        self.mix(self.comp1.ln_pdf(x), self.comp2.ln_pdf(x))
    }

    pub fn ln_pdf_unit(&self, x: f64) -> f64 {
        self.mix(self.comp1.ln_pdf_unit(x), self.comp2.ln_pdf_unit(x))
    }

    pub fn cdf_unit(&self, x: f64) -> f64 {
        self.w1 * self.comp1.cdf_unit(x) + self.w2 * self.comp2.cdf_unit(x)
    }

    pub fn unit_mean(&self) -> f64 {
        self.w1 * self.comp1.unit_mean() + self.w2 * self.comp2.unit_mean()
    }

    pub fn sample_unit<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if rng.random::<f64>() < self.w1 {
            self.comp1.sample_unit(rng)
        } else {
            self.comp2.sample_unit(rng)
        }
    }
}

/// Flat density on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UniformBase {
    lo: f64,
    hi: f64,
}

impl UniformBase {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_finite() && hi.is_finite() && lo < hi {
            Ok(Self { lo, hi })
        } else {
            Err(Error::InvalidParams(format!("uniform needs lo < hi (lo={lo}, hi={hi})")))
        }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if x >= self.lo && x <= self.hi {
            -(self.hi - self.lo).ln()
        } else {
            f64::NEG_INFINITY
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        ((x - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0)
    }

    pub fn mean(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.lo + (self.hi - self.lo) * rng.random::<f64>()
    }
}

/// Density of the main (center-range) profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum MainDist {
    Base(UniformBase),
    Unimodal(Component),
    Bimodal(Mixture2),
}

impl MainDist {
    pub fn ln_pdf(&self, x: f64) -> f64 {
        match self {
            MainDist::Base(u) => u.ln_pdf(x),
            MainDist::Unimodal(c) => c.ln_pdf(x),
            MainDist::Bimodal(m) => m.ln_pdf(x),
        }
    }

    pub fn ln_pdf_unit(&self, x: f64) -> f64 {
        match self {
            MainDist::Base(u) => u.ln_pdf(x),
            MainDist::Unimodal(c) => c.ln_pdf_unit(x),
            MainDist::Bimodal(m) => m.ln_pdf_unit(x),
        }
    }

    pub fn cdf_unit(&self, x: f64) -> f64 {
        match self {
            MainDist::Base(u) => u.cdf(x),
            MainDist::Unimodal(c) => c.cdf_unit(x),
            MainDist::Bimodal(m) => m.cdf_unit(x),
        }
    }

    pub fn unit_mean(&self) -> f64 {
        match self {
            MainDist::Base(u) => u.mean(),
            MainDist::Unimodal(c) => c.unit_mean(),
            MainDist::Bimodal(m) => m.unit_mean(),
        }
    }

    pub fn sample_unit<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            MainDist::Base(u) => u.sample(rng),
            MainDist::Unimodal(c) => c.sample_unit(rng),
            MainDist::Bimodal(m) => m.sample_unit(rng),
        }
    }
}

/// Whole response-profile mixture: `w_sub * Sub + (1 - w_sub) * Main`.
///
/// A profile without a main part must put all weight on the sub component; a
/// profile without a sub component has `w_sub == 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileMixture {
    main: Option<MainDist>,
    sub: Option<BetaParams>,
    w_sub: f64,
}

impl ProfileMixture {
    pub fn new(main: Option<MainDist>, sub: Option<BetaParams>, w_sub: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&w_sub) {
            return Err(Error::InvalidParams(format!("sub weight {w_sub} outside [0, 1]")));
        }
        match (&main, &sub) {
            (None, None) => Err(Error::InvalidParams("profile needs a main or a sub part".into())),
            (None, Some(_)) if w_sub != 1.0 => {
                Err(Error::InvalidParams("profile without main needs w_sub = 1".into()))
            }
            (Some(_), None) if w_sub != 0.0 => {
                Err(Error::InvalidParams("profile without sub needs w_sub = 0".into()))
            }
            _ => Ok(Self { main, sub, w_sub }),
        }
    }

    pub fn main(&self) -> Option<&MainDist> {
        self.main.as_ref()
    }

    pub fn sub(&self) -> Option<&BetaParams> {
        self.sub.as_ref()
    }

    pub fn w_sub(&self) -> f64 {
        self.w_sub
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        let sub = match &self.sub {
            Some(s) if self.w_sub > 0.0 => self.w_sub.ln() + s.ln_pdf_logs(x.ln(), (-x).ln_1p()),
            _ => f64::NEG_INFINITY,
        };
        let main = match &self.main {
            Some(m) if self.w_sub < 1.0 => (-self.w_sub).ln_1p() + m.ln_pdf_unit(x),
            _ => f64::NEG_INFINITY,
        };
        log_add_exp(sub, main)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let sub = self.sub.map_or(0.0, |s| s.cdf(x));
        let main = self.main.map_or(0.0, |m| m.cdf_unit(x));
        self.w_sub * sub + (1.0 - self.w_sub) * main
    }

    pub fn mean(&self) -> f64 {
        let sub = self.sub.map_or(0.0, |s| s.mean());
        let main = self.main.map_or(0.0, |m| m.unit_mean());
        self.w_sub * sub + (1.0 - self.w_sub) * main
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let use_sub = match (&self.main, &self.sub) {
            (None, _) => true,
            (_, None) => false,
            _ => rng.random::<f64>() < self.w_sub,
        };
        let x = if use_sub {
            self.sub.expect("checked").sample(rng)
        } else {
            self.main.expect("checked").sample_unit(rng)
        };
        clamp_unit(x)
    }
}

/// `n` i.i.d. draws from `profile`, each inside `[UNIT_EPS, 1 - UNIT_EPS]`.
pub fn sample_profile<R: Rng + ?Sized>(profile: &ProfileMixture, n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| profile.sample(rng)).collect()
}
