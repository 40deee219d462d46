//! Ground-truth pseudo-data and the parameter-recovery experiment.
//!
//! Each built-in condition is a Beta-mixture response profile. Recovery draws
//! `n` values per condition, estimates a profile under every hyperparameter
//! cell, and scores agreement between estimated and true parameters by pooled
//! Pearson correlation and least squares. Parameters enter the pool only when
//! the estimated model class matches the true one; Gaussian estimates are
//! compared against the moment-converted Beta truth.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::distributions::{sample_profile, BetaParams, Component, Family, MainDist, Mixture2, ProfileMixture};
use crate::error::{Error, Result};
use crate::estimation::ShapeClass;
use crate::metrics::{linreg, pearson, pearson_p_value};
use crate::pipeline::{estimate_profile, HyperParams, MainKind, Polarity, ResponseProfile, SubKind, UserDataset};
use crate::rng::{derive_seed, seeded};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "model")]
pub enum MainSpec {
    #[serde(rename = "MRS")]
    Unimodal { alpha1: f64, beta1: f64 },
    #[serde(rename = "BiMRS")]
    Bimodal { w1: f64, alpha1: f64, beta1: f64, alpha2: f64, beta2: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailSpec {
    pub w_ade: f64,
    pub alpha_ade: f64,
    pub beta_ade: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundTruthCondition {
    pub id: u32,
    pub label: String,
    pub main: Option<MainSpec>,
    pub tail: Option<TailSpec>,
}

impl GroundTruthCondition {
    pub fn main_kind(&self) -> MainKind {
        match self.main {
            None => MainKind::Base,
            Some(MainSpec::Unimodal { .. }) => MainKind::Mrs,
            Some(MainSpec::Bimodal { .. }) => MainKind::BiMrs,
        }
    }

    pub fn sub_kind(&self) -> SubKind {
        match self.tail {
            None => SubKind::None,
            Some(t) => {
                let p = BetaParams::new(t.alpha_ade, t.beta_ade).expect("valid built-in shape");
                ShapeClass::ALL.iter().find(|s| s.contains(&p)).map_or(SubKind::None, |&s| s.into())
            }
        }
    }

    pub fn w_ade(&self) -> f64 {
        self.tail.map_or(0.0, |t| t.w_ade)
    }

    pub fn profile(&self) -> Result<ProfileMixture> {
        let main = match self.main {
            None => None,
            Some(MainSpec::Unimodal { alpha1, beta1 }) => {
                Some(MainDist::Unimodal(Component::Beta(BetaParams::new(alpha1, beta1)?)))
            }
            Some(MainSpec::Bimodal { w1, alpha1, beta1, alpha2, beta2 }) => Some(MainDist::Bimodal(Mixture2::new(
                w1,
                Component::Beta(BetaParams::new(alpha1, beta1)?),
                Component::Beta(BetaParams::new(alpha2, beta2)?),
            )?)),
        };
        let sub = self.tail.map(|t| BetaParams::new(t.alpha_ade, t.beta_ade)).transpose()?;
        ProfileMixture::new(main, sub, self.w_ade())
    }

    /// `n` values drawn from the condition under `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<f64>> {
        Ok(sample_profile(&self.profile()?, n, &mut seeded(seed)))
    }
}

/// The 21 simulated response profiles.
pub fn builtin_conditions() -> Vec<GroundTruthCondition> {
    let uni = |alpha1, beta1| Some(MainSpec::Unimodal { alpha1, beta1 });
    let bi = |alpha1, beta1, alpha2, beta2| Some(MainSpec::Bimodal { w1: 0.5, alpha1, beta1, alpha2, beta2 });
    let tail = |w_ade, alpha_ade, beta_ade| Some(TailSpec { w_ade, alpha_ade, beta_ade });
    let rows: [(u32, &str, Option<MainSpec>, Option<TailSpec>); 21] = [
        (11, "ERS", None, tail(1.0, 0.1, 0.1)),
        (12, "DRS", None, tail(1.0, 1.0, 30.0)),
        (13, "ARS", None, tail(1.0, 30.0, 1.0)),
        (14, "MRS-a", uni(10.0, 10.0), None),
        (15, "MRS-b", uni(15.0, 45.0), None),
        (16, "MRS-c", uni(45.0, 15.0), None),
        (17, "BiMRS-a", bi(15.0, 45.0, 45.0, 15.0), None),
        (18, "BiMRS-b", bi(15.0, 30.0, 30.0, 15.0), None),
        (19, "BiMRS-c", bi(15.0, 20.0, 20.0, 15.0), None),
        (21, "ERS-05_MRS-05", uni(10.0, 10.0), tail(0.5, 0.1, 0.1)),
        (22, "ERS-03_MRS-07", uni(10.0, 10.0), tail(0.3, 0.1, 0.1)),
        (23, "ERS-01_MRS-09", uni(10.0, 10.0), tail(0.1, 0.1, 0.1)),
        (24, "DRS-05_MRS-05", uni(10.0, 10.0), tail(0.5, 1.0, 30.0)),
        (25, "DRS-03_MRS-07", uni(10.0, 10.0), tail(0.3, 1.0, 30.0)),
        (26, "DRS-01_MRS-09", uni(10.0, 10.0), tail(0.1, 1.0, 30.0)),
        (31, "ERS-05_BiMRS-05", bi(15.0, 30.0, 30.0, 15.0), tail(0.5, 0.1, 0.1)),
        (32, "ERS-03_BiMRS-07", bi(15.0, 30.0, 30.0, 15.0), tail(0.3, 0.1, 0.1)),
        (33, "ERS-01_BiMRS-09", bi(15.0, 30.0, 30.0, 15.0), tail(0.1, 0.1, 0.1)),
        (34, "DRS-05_BiMRS-05", bi(15.0, 30.0, 30.0, 15.0), tail(0.5, 1.0, 30.0)),
        (35, "DRS-03_BiMRS-07", bi(15.0, 30.0, 30.0, 15.0), tail(0.3, 1.0, 30.0)),
        (36, "DRS-01_BiMRS-09", bi(15.0, 30.0, 30.0, 15.0), tail(0.1, 1.0, 30.0)),
    ];
    rows.into_iter()
        .map(|(id, label, main, tail)| GroundTruthCondition { id, label: label.to_string(), main, tail })
        .collect()
}

pub fn find_condition(id: u32) -> Result<GroundTruthCondition> {
    builtin_conditions()
        .into_iter()
        .find(|c| c.id == id)
        .ok_or_else(|| Error::InvalidConfig(format!("unknown condition #{id}")))
}

/// Seed of the data drawn for `(condition, repeat)`. Independent of the
/// hyperparameters, so every grid cell sees the same samples.
pub fn data_seed(seed: u64, condition_id: u32, repeat: usize) -> u64 {
    derive_seed(derive_seed(seed, condition_id as u64), repeat as u64)
}

/// Hyperparameter cells to evaluate. Every combination is one cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryGrid {
    pub families: Vec<Family>,
    pub th: Vec<f64>,
    pub accept_bidist: Vec<f64>,
}

impl Default for RecoveryGrid {
    fn default() -> Self {
        Self {
            families: vec![Family::Gaussian, Family::Beta],
            th: vec![0.05, 0.15, 0.25, 0.35, 0.45],
            accept_bidist: vec![0.0, 0.15, 0.30],
        }
    }
}

impl RecoveryGrid {
    pub fn cells(&self, base: &HyperParams) -> Vec<HyperParams> {
        let mut out = Vec::new();
        for &family in &self.families {
            for &th in &self.th {
                for &accept_bidist in &self.accept_bidist {
                    out.push(HyperParams { family, th, accept_bidist, ..*base });
                }
            }
        }
        out
    }
}

/// A matched `(truth, estimate)` parameter pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamPair {
    pub name: String,
    pub truth: f64,
    pub estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionOutcome {
    pub id: u32,
    pub label: String,
    pub repeat: usize,
    pub main_kind: Option<MainKind>,
    pub sub_kind: Option<SubKind>,
    pub w_ade: Option<f64>,
    pub is_mrs: u8,
    pub is_bimrs: u8,
    pub is_ers: u8,
    pub is_drs: u8,
    pub is_ars: u8,
    pub main_matches: bool,
    pub sub_matches: bool,
    /// Histogram correlation between the sample and the fitted profile.
    pub corr: Option<f64>,
    pub pairs: Vec<ParamPair>,
    #[serde(skip_serializing)]
    pub profile: Option<ResponseProfile>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Agreement {
    pub r: f64,
    pub p: f64,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_pairs: usize,
}

impl Agreement {
    /// Agreement of estimates (`y`) against ground truth (`x`).
    pub fn from_pairs(pairs: &[&ParamPair]) -> Option<Self> {
        let xs: Vec<f64> = pairs.iter().map(|p| p.truth).collect();
        let ys: Vec<f64> = pairs.iter().map(|p| p.estimate).collect();
        let r = pearson(&xs, &ys).ok()?;
        let fit = linreg(&xs, &ys).ok()?;
        Some(Self {
            r,
            p: pearson_p_value(r, xs.len()),
            slope: fit.slope,
            intercept: fit.intercept,
            r_squared: fit.r_squared,
            n_pairs: xs.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryReport {
    pub family: Family,
    pub th: f64,
    pub accept_bidist: f64,
    pub n_per_condition: usize,
    pub repeats: usize,
    pub agreement: Option<Agreement>,
    pub main_mismatches: usize,
    pub sub_mismatches: usize,
    pub outcomes: Vec<ConditionOutcome>,
}

impl RecoveryReport {
    pub fn outcome(&self, id: u32, repeat: usize) -> Option<&ConditionOutcome> {
        self.outcomes.iter().find(|o| o.id == id && o.repeat == repeat)
    }

    pub fn median_corr(&self) -> Option<f64> {
        let mut c: Vec<f64> = self.outcomes.iter().filter_map(|o| o.corr).collect();
        if c.is_empty() {
            return None;
        }
        c.sort_by(f64::total_cmp);
        Some(crate::bootstrap::percentile(&c, 0.5))
    }
}

/// True component parameters in the units of `family`.
fn truth_component(family: Family, alpha: f64, beta: f64) -> (f64, f64) {
    let p = BetaParams::new(alpha, beta).expect("valid built-in shape");
    match family {
        Family::Beta => (alpha, beta),
        Family::Gaussian => p.moments(),
    }
}

fn component_names(family: Family, index: u8) -> (String, String) {
    match family {
        Family::Beta => (format!("alpha{index}"), format!("beta{index}")),
        Family::Gaussian => (format!("mu{index}"), format!("sigma{index}")),
    }
}

fn matched_pairs(cond: &GroundTruthCondition, profile: &ResponseProfile) -> Vec<ParamPair> {
    let family = profile.family;
    let mut pairs = Vec::new();
    let mut push = |name: String, truth: f64, estimate: f64| pairs.push(ParamPair { name, truth, estimate });

    if cond.main_kind() == profile.main.kind {
        match (cond.main, profile.main.dist()) {
            (Some(MainSpec::Unimodal { alpha1, beta1 }), MainDist::Unimodal(c)) => {
                let (t1, t2) = truth_component(family, alpha1, beta1);
                let (e1, e2) = c.raw();
                let (n1, n2) = component_names(family, 1);
                push("w1".into(), 1.0, 1.0);
                push(n1, t1, e1);
                push(n2, t2, e2);
            }
            (Some(MainSpec::Bimodal { w1, alpha1, beta1, alpha2, beta2 }), MainDist::Bimodal(m)) => {
                // Reported components are ordered by weight; align them with the
                // truth (lower-mean component first) by location.
                let mut est = [(m.w1(), *m.comp1()), (m.w2(), *m.comp2())];
                est.sort_by(|a, b| a.1.mean().total_cmp(&b.1.mean()));
                let truth = [(w1, alpha1, beta1), (1.0 - w1, alpha2, beta2)];
                for (i, ((tw, ta, tb), (ew, ec))) in truth.iter().zip(est).enumerate() {
                    let (t1, t2) = truth_component(family, *ta, *tb);
                    let (e1, e2) = ec.raw();
                    let (n1, n2) = component_names(family, i as u8 + 1);
                    push(format!("w{}", i + 1), *tw, ew);
                    push(n1, t1, e1);
                    push(n2, t2, e2);
                }
            }
            _ => {}
        }
    }
    if let (Some(t), Some(b)) = (cond.tail, profile.sub.params) {
        if cond.sub_kind() == profile.sub.kind {
            push("w_ade".into(), t.w_ade, profile.sub.w_ade);
            push("alpha_ade".into(), t.alpha_ade, b.alpha());
            push("beta_ade".into(), t.beta_ade, b.beta());
        }
    }
    pairs
}

fn evaluate(cond: &GroundTruthCondition, repeat: usize, data: &UserDataset, hp: &HyperParams) -> ConditionOutcome {
    let mut out = ConditionOutcome {
        id: cond.id,
        label: cond.label.clone(),
        repeat,
        main_kind: None,
        sub_kind: None,
        w_ade: None,
        is_mrs: 0,
        is_bimrs: 0,
        is_ers: 0,
        is_drs: 0,
        is_ars: 0,
        main_matches: false,
        sub_matches: false,
        corr: None,
        pairs: Vec::new(),
        profile: None,
        error: None,
    };
    match estimate_profile(data, hp) {
        Ok(p) => {
            out.main_kind = Some(p.main.kind);
            out.sub_kind = Some(p.sub.kind);
            out.w_ade = Some(p.sub.w_ade);
            out.is_mrs = (p.main.kind == MainKind::Mrs) as u8;
            out.is_bimrs = (p.main.kind == MainKind::BiMrs) as u8;
            out.is_ers = (p.sub.kind == SubKind::Ers) as u8;
            out.is_drs = (p.sub.kind == SubKind::Drs) as u8;
            out.is_ars = (p.sub.kind == SubKind::Ars) as u8;
            out.main_matches = cond.main_kind() == p.main.kind;
            out.sub_matches = cond.sub_kind() == p.sub.kind;
            out.corr = p.metrics.map(|m| m.corr);
            out.pairs = matched_pairs(cond, &p);
            out.profile = Some(p);
        }
        Err(e) => out.error = Some(e.to_string()),
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryConfig {
    pub n_per_condition: usize,
    pub repeats: usize,
    pub seed: u64,
}

/// Runs every condition under every grid cell; one report per cell, in grid
/// order. Output is independent of thread scheduling.
pub fn run_recovery(
    conditions: &[GroundTruthCondition],
    grid: &RecoveryGrid,
    base: &HyperParams,
    config: &RecoveryConfig,
) -> Result<Vec<RecoveryReport>> {
    let cells = grid.cells(base);
    for hp in &cells {
        hp.validate()?;
    }
    if config.n_per_condition < base.min_main_n {
        return Err(Error::InvalidConfig(format!(
            "n per condition must be at least {}, got {}",
            base.min_main_n, config.n_per_condition
        )));
    }
    if config.repeats == 0 {
        return Err(Error::InvalidConfig("repeats must be at least 1".into()));
    }

    // Simulated data is treated as balanced and eligible for the bimodal model.
    let mut datasets = BTreeMap::new();
    for cond in conditions {
        for repeat in 0..config.repeats {
            let values = cond.sample(config.n_per_condition, data_seed(config.seed, cond.id, repeat))?;
            let ds = UserDataset::from_unit_values(&format!("#{}", cond.id), &values, Polarity::Bipolar)?;
            datasets.insert((cond.id, repeat), ds);
        }
    }

    let jobs: Vec<(usize, &GroundTruthCondition, usize)> = (0..cells.len())
        .flat_map(|c| conditions.iter().flat_map(move |cond| (0..config.repeats).map(move |r| (c, cond, r))))
        .collect();
    let outcomes: Vec<(usize, ConditionOutcome)> = jobs
        .par_iter()
        .map(|&(c, cond, r)| (c, evaluate(cond, r, &datasets[&(cond.id, r)], &cells[c])))
        .collect();

    let mut per_cell: Vec<Vec<ConditionOutcome>> = vec![Vec::new(); cells.len()];
    for (c, o) in outcomes {
        per_cell[c].push(o);
    }
    Ok(cells
        .iter()
        .zip(per_cell)
        .map(|(hp, outcomes)| {
            let pairs: Vec<&ParamPair> = outcomes.iter().flat_map(|o| &o.pairs).collect();
            RecoveryReport {
                family: hp.family,
                th: hp.th,
                accept_bidist: hp.accept_bidist,
                n_per_condition: config.n_per_condition,
                repeats: config.repeats,
                agreement: Agreement::from_pairs(&pairs),
                main_mismatches: outcomes.iter().filter(|o| !o.main_matches).count(),
                sub_mismatches: outcomes.iter().filter(|o| !o.sub_matches).count(),
                outcomes,
            }
        })
        .collect())
}
