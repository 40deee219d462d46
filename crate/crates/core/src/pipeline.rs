//! Per-user response-profile estimation.
//!
//! 1. Raw responses are mapped onto (0, 1); when any response sits on a scale
//!    end, every value is squeezed by `x' = (x (N - 1) + 0.5) / N`.
//! 2. Values in `[th, 1 - th]` form the main subset, the rest the tail subset.
//! 3. The main subset is fitted by a flat null on `[th, 1 - th]`, a unimodal
//!    model and a two-component mixture; the mixture is only eligible for
//!    users with bipolar items and peaks at least `accept_bidist` apart.
//! 4. The tail subset is fitted by Beta densities restricted to the ERS, DRS
//!    and ARS shapes.
//! 5. With the main model fixed, each tail candidate gets a mixture weight on
//!    a grid, and the combination (or the main model alone) with the lowest
//!    AIC on the whole dataset becomes the profile.

use serde::{Deserialize, Serialize};

use crate::distributions::{
    clamp_unit, BetaParams, Component, Family, MainDist, Mixture2, ProfileMixture, UniformBase,
};
use crate::error::{Error, Result};
use crate::estimation::{
    fit_beta_constrained, fit_mixture2_em, fit_unimodal, fit_weight_grid, FitResult, ShapeClass,
};
use crate::metrics::{compare, Histogram, HistogramMetrics, DEFAULT_BIN_WIDTH};

/// AIC differences below this are ties, resolved toward fewer parameters.
pub const AIC_TIE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Unipolar,
    Bipolar,
}

impl std::fmt::Display for Polarity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Polarity::Unipolar => "unipolar",
            Polarity::Bipolar => "bipolar",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub user_id: String,
    pub item_id: String,
    pub polarity: Polarity,
    pub raw_value: f64,
    pub scale_min: f64,
    pub scale_max: f64,
}

impl ResponseRecord {
    fn validate(&self, index: usize) -> Result<()> {
        let bad = |reason: String| Err(Error::InvalidScale { index, reason });
        if !(self.scale_min.is_finite() && self.scale_max.is_finite()) || self.scale_min >= self.scale_max {
            return bad(format!("scale [{}, {}] is not a valid range", self.scale_min, self.scale_max));
        }
        if !self.raw_value.is_finite() || self.raw_value < self.scale_min || self.raw_value > self.scale_max {
            return bad(format!(
                "value {} outside scale [{}, {}]",
                self.raw_value, self.scale_min, self.scale_max
            ));
        }
        Ok(())
    }
}

/// One user's records with their normalized values (same order).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UserDataset {
    pub user_id: String,
    pub records: Vec<ResponseRecord>,
    pub normalized: Vec<f64>,
    pub has_bipolar: bool,
}

impl UserDataset {
    pub fn len(&self) -> usize {
        self.normalized.len()
    }

    pub fn is_empty(&self) -> bool {
        self.normalized.is_empty()
    }

    /// Dataset from values already on (0, 1), e.g. simulated data, carried by
    /// a single item with the given polarity.
    pub fn from_unit_values(user_id: &str, values: &[f64], polarity: Polarity) -> Result<Self> {
        let records = values
            .iter()
            .map(|&v| ResponseRecord {
                user_id: user_id.to_string(),
                item_id: "item".to_string(),
                polarity,
                raw_value: v,
                scale_min: 0.0,
                scale_max: 1.0,
            })
            .collect();
        normalize(records)
    }

    /// Dataset made of the given records and already-normalized values.
    pub(crate) fn from_parts(user_id: String, records: Vec<ResponseRecord>, normalized: Vec<f64>) -> Self {
        let has_bipolar = records.iter().any(|r| r.polarity == Polarity::Bipolar);
        Self { user_id, records, normalized, has_bipolar }
    }
}

/// Maps raw responses onto the open unit interval.
pub fn normalize(records: Vec<ResponseRecord>) -> Result<UserDataset> {
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for (i, r) in records.iter().enumerate() {
        r.validate(i)?;
    }
    let mut values: Vec<f64> = records
        .iter()
        .map(|r| ((r.raw_value - r.scale_min) / (r.scale_max - r.scale_min)).clamp(0.0, 1.0))
        .collect();
    if values.iter().any(|&x| x == 0.0 || x == 1.0) {
        let n = values.len() as f64;
        for x in &mut values {
            *x = (*x * (n - 1.0) + 0.5) / n;
        }
    }
    for x in &mut values {
        *x = clamp_unit(*x);
    }
    let user_id = records[0].user_id.clone();
    Ok(UserDataset::from_parts(user_id, records, values))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HyperParams {
    /// Split threshold; the main range is `[th, 1 - th]`.
    pub th: f64,
    /// Minimum peak separation for a bimodal main profile.
    pub accept_bidist: f64,
    pub family: Family,
    /// Resolution of the tail-weight grid.
    pub w_step: f64,
    pub min_sub_n: usize,
    pub min_main_n: usize,
    pub min_bimodal_n: usize,
    /// Histogram bin width for the fit metrics.
    pub bin_width: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            th: 0.15,
            accept_bidist: 0.15,
            family: Family::Gaussian,
            w_step: 0.1,
            min_sub_n: 5,
            min_main_n: 10,
            min_bimodal_n: 10,
            bin_width: DEFAULT_BIN_WIDTH,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.th > 0.0 && self.th < 0.5) {
            return bad(format!("th must lie in (0, 0.5), got {}", self.th));
        }
        if !(0.0..=1.0).contains(&self.accept_bidist) {
            return bad(format!("accept_bidist must lie in [0, 1], got {}", self.accept_bidist));
        }
        let steps = (1.0 / self.w_step).round();
        if !(self.w_step > 0.0 && self.w_step <= 1.0) || (steps * self.w_step - 1.0).abs() > 1e-9 {
            return bad(format!("w_step {} does not divide 1 into an integer grid", self.w_step));
        }
        if self.min_main_n < 3 || self.min_bimodal_n < 4 || self.min_sub_n < 2 {
            return bad("sample-count floors must be at least 3 (main), 4 (bimodal), 2 (sub)".into());
        }
        Histogram::from_values(&[], self.bin_width).map_err(|_| {
            Error::InvalidConfig(format!("bin width {} does not divide [0, 1)", self.bin_width))
        })?;
        Ok(())
    }
}

/// Splits values into the main range `[th, 1 - th]` and the tails.
pub fn split(values: &[f64], th: f64) -> (Vec<f64>, Vec<f64>) {
    values.iter().partition(|&&x| x >= th && x <= 1.0 - th)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum MainKind {
    Base,
    #[serde(rename = "MRS")]
    Mrs,
    #[serde(rename = "BiMRS")]
    BiMrs,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MainProfile {
    pub kind: MainKind,
    pub fit: FitResult<MainDist>,
}

impl MainProfile {
    pub fn dist(&self) -> &MainDist {
        &self.fit.params
    }
}

/// One evaluated main model and whether the selection rules allowed it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MainCandidate {
    pub kind: MainKind,
    pub loglik: f64,
    pub k: usize,
    pub aic: f64,
    pub separation: Option<f64>,
    pub eligible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MainSelection {
    pub main: MainProfile,
    pub candidates: Vec<MainCandidate>,
}

/// Peak separation of a two-component main model: difference of Beta modes
/// or of Gaussian means.
pub fn separation(mixture: &Mixture2) -> f64 {
    (mixture.comp2().peak() - mixture.comp1().peak()).abs()
}

/// Selects the main profile on the center-range data.
pub fn estimate_main(d_main: &[f64], has_bipolar: bool, hp: &HyperParams) -> Result<MainSelection> {
    let base_dist = UniformBase::new(hp.th, 1.0 - hp.th)?;
    let base_ll = d_main.iter().map(|&x| base_dist.ln_pdf(x)).sum();
    let base = FitResult::new(MainDist::Base(base_dist), base_ll, 0);
    let mut candidates = vec![MainCandidate {
        kind: MainKind::Base,
        loglik: base.loglik,
        k: 0,
        aic: base.aic,
        separation: None,
        eligible: true,
    }];
    if d_main.len() < hp.min_main_n {
        return Ok(MainSelection { main: MainProfile { kind: MainKind::Base, fit: base }, candidates });
    }

    let mrs = fit_unimodal(d_main, hp.family).ok().map(|f| f.map(MainDist::Unimodal));
    if let Some(f) = &mrs {
        candidates.push(MainCandidate {
            kind: MainKind::Mrs,
            loglik: f.loglik,
            k: f.k,
            aic: f.aic,
            separation: None,
            eligible: true,
        });
    }
    let bimrs = if d_main.len() >= hp.min_bimodal_n {
        fit_mixture2_em(d_main, hp.family, hp.min_bimodal_n).ok()
    } else {
        None
    };
    let mut bimrs_selectable = None;
    if let Some(f) = &bimrs {
        let sep = separation(&f.params);
        let eligible = has_bipolar && sep >= hp.accept_bidist;
        candidates.push(MainCandidate {
            kind: MainKind::BiMrs,
            loglik: f.loglik,
            k: f.k,
            aic: f.aic,
            separation: Some(sep),
            eligible,
        });
        let best_other = base.aic.min(mrs.as_ref().map_or(f64::INFINITY, |m| m.aic));
        if eligible && f.aic < best_other - AIC_TIE {
            bimrs_selectable = Some(f.map(MainDist::Bimodal));
        }
    }

    let main = if let Some(fit) = bimrs_selectable {
        MainProfile { kind: MainKind::BiMrs, fit }
    } else {
        match mrs {
            Some(fit) if fit.aic < base.aic - AIC_TIE => MainProfile { kind: MainKind::Mrs, fit },
            _ => MainProfile { kind: MainKind::Base, fit: base },
        }
    };
    Ok(MainSelection { main, candidates })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubCandidate {
    pub shape: ShapeClass,
    pub fit: FitResult<BetaParams>,
}

/// Fits the three tail shapes; empty when the tail subset is below
/// `min_sub_n`.
pub fn estimate_subs(d_sub: &[f64], hp: &HyperParams) -> Vec<SubCandidate> {
    if d_sub.len() < hp.min_sub_n {
        return Vec::new();
    }
    ShapeClass::ALL
        .iter()
        .filter_map(|&shape| {
            fit_beta_constrained(d_sub, shape, hp.min_sub_n).ok().map(|fit| SubCandidate { shape, fit })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum SubKind {
    None,
    #[serde(rename = "ERS")]
    Ers,
    #[serde(rename = "DRS")]
    Drs,
    #[serde(rename = "ARS")]
    Ars,
}

impl From<ShapeClass> for SubKind {
    fn from(s: ShapeClass) -> Self {
        match s {
            ShapeClass::Ers => SubKind::Ers,
            ShapeClass::Drs => SubKind::Drs,
            ShapeClass::Ars => SubKind::Ars,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubProfile {
    pub kind: SubKind,
    pub params: Option<BetaParams>,
    pub w_ade: f64,
}

impl SubProfile {
    pub const NONE: SubProfile = SubProfile { kind: SubKind::None, params: None, w_ade: 0.0 };
}

/// One whole-profile model scored on the full dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WholeCandidate {
    pub sub: SubKind,
    pub w_ade: f64,
    pub loglik: f64,
    pub k: usize,
    pub aic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileDiagnostics {
    pub n: usize,
    pub n_main: usize,
    pub n_sub: usize,
    pub main_candidates: Vec<MainCandidate>,
    pub whole_candidates: Vec<WholeCandidate>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResponseProfile {
    pub family: Family,
    pub main: MainProfile,
    pub sub: SubProfile,
    /// Log-likelihood of the selected whole profile on the full dataset.
    pub loglik: f64,
    pub k: usize,
    pub aic: f64,
    /// Empirical histogram against the fitted profile.
    pub metrics: Option<HistogramMetrics>,
    pub diagnostics: ProfileDiagnostics,
}

impl ResponseProfile {
    pub fn mixture(&self) -> ProfileMixture {
        let sub = if self.sub.kind == SubKind::None { None } else { self.sub.params };
        ProfileMixture::new(Some(*self.main.dist()), sub, self.sub.w_ade)
            .expect("profile invariants hold by construction")
    }

    pub fn density(&self, x: f64) -> f64 {
        self.mixture().pdf(x)
    }

    /// Mean of the leftmost main component (the lower peak), if the main
    /// profile has a peak at all.
    pub fn left_peak_mean(&self) -> Option<f64> {
        match self.main.dist() {
            MainDist::Base(_) => None,
            MainDist::Unimodal(c) => Some(c.mean()),
            MainDist::Bimodal(m) => Some(m.comp1().mean().min(m.comp2().mean())),
        }
    }
}

/// Model histogram matching an empirical one for `profile`.
pub fn model_histogram(profile: &ProfileMixture, bin_width: f64) -> Result<Histogram> {
    Histogram::from_cdf(|x| profile.cdf(x), bin_width)
}

/// Whole response-profile estimation for one user.
pub fn estimate_profile(data: &UserDataset, hp: &HyperParams) -> Result<ResponseProfile> {
    let values = &data.normalized;
    if values.len() < hp.min_main_n {
        return Err(Error::InsufficientData { needed: hp.min_main_n, got: values.len() });
    }
    let (d_main, d_sub) = split(values, hp.th);
    let selection = estimate_main(&d_main, data.has_bipolar, hp)?;
    let main = selection.main;
    let subs = estimate_subs(&d_sub, hp);

    let main_ll: f64 = values.iter().map(|&x| main.dist().ln_pdf_unit(x)).sum();
    let alone = WholeCandidate {
        sub: SubKind::None,
        w_ade: 0.0,
        loglik: main_ll,
        k: main.fit.k,
        aic: crate::estimation::aic(main_ll, main.fit.k),
    };
    let mut whole = vec![alone];
    let mut best = (alone, SubProfile::NONE);
    for cand in &subs {
        let fit = fit_weight_grid(values, main.dist(), main.fit.k, &cand.fit.params, hp.w_step);
        let scored = WholeCandidate {
            sub: cand.shape.into(),
            w_ade: fit.params,
            loglik: fit.loglik,
            k: fit.k,
            aic: fit.aic,
        };
        whole.push(scored);
        // Candidates come in a fixed order with equal parameter counts, so a
        // strict improvement keeps the earlier (or the main-only) model on ties.
        if scored.aic < best.0.aic - AIC_TIE && fit.params > 0.0 {
            best = (
                scored,
                SubProfile { kind: cand.shape.into(), params: Some(cand.fit.params), w_ade: fit.params },
            );
        }
    }

    let (chosen, sub) = best;
    let mut profile = ResponseProfile {
        family: hp.family,
        main,
        sub,
        loglik: chosen.loglik,
        k: chosen.k,
        aic: chosen.aic,
        metrics: None,
        diagnostics: ProfileDiagnostics {
            n: values.len(),
            n_main: d_main.len(),
            n_sub: d_sub.len(),
            main_candidates: selection.candidates,
            whole_candidates: whole,
        },
    };
    let empirical = Histogram::from_values(values, hp.bin_width)?;
    let model = model_histogram(&profile.mixture(), hp.bin_width)?;
    profile.metrics = compare(&empirical, &model).ok();
    Ok(profile)
}

/// Convenience: the fitted component parameters of a main profile in report
/// order, `(w1, comp1, Option<comp2>)`.
pub fn main_components(main: &MainProfile) -> Option<(f64, Component, Option<Component>)> {
    match main.dist() {
        MainDist::Base(_) => None,
        MainDist::Unimodal(c) => Some((1.0, *c, None)),
        MainDist::Bimodal(m) => Some((m.w1(), *m.comp1(), Some(*m.comp2()))),
    }
}
