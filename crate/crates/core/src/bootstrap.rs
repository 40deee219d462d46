//! Two-level stratified bootstrap for unbalanced repeated measures.
//!
//! Level 1 draws `level1_n` records with replacement from every item; level 2
//! pools the level-1 draws by polarity and draws `level2_n` records from each
//! pool. Each replicate is profiled independently and the replicates are
//! summarized by percentiles and one-hot style features.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::distributions::Family;
use crate::error::{Error, Result};
use crate::pipeline::{
    estimate_profile, main_components, HyperParams, MainKind, Polarity, ResponseProfile, SubKind, UserDataset,
};
use crate::rng::stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SamplingPlan {
    pub level1_n: usize,
    pub level2_n: usize,
    pub replicates: usize,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        Self { level1_n: 300, level2_n: 1800, replicates: 1000 }
    }
}

impl SamplingPlan {
    pub fn validate(&self) -> Result<()> {
        if self.level1_n == 0 || self.level2_n == 0 || self.replicates == 0 {
            return Err(Error::InvalidConfig(format!(
                "sampling counts must be at least 1, got level1_n={}, level2_n={}, replicates={}",
                self.level1_n, self.level2_n, self.replicates
            )));
        }
        Ok(())
    }
}

/// One resample of `data` under `plan`. Output is grouped by polarity
/// (unipolar first), so it is reproducible for a given generator state.
pub fn stratified_resample<R: Rng + ?Sized>(data: &UserDataset, plan: &SamplingPlan, rng: &mut R) -> Result<UserDataset> {
    plan.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut strata: BTreeMap<Polarity, BTreeMap<&str, Vec<usize>>> = BTreeMap::new();
    for (i, r) in data.records.iter().enumerate() {
        strata.entry(r.polarity).or_default().entry(r.item_id.as_str()).or_default().push(i);
    }

    let mut picked = Vec::with_capacity(plan.level2_n * strata.len());
    for (polarity, items) in &strata {
        let mut pool = Vec::with_capacity(plan.level1_n * items.len());
        for (item, rows) in items {
            if rows.is_empty() {
                return Err(Error::EmptyStratum(format!("{polarity}/{item}")));
            }
            pool.extend((0..plan.level1_n).map(|_| rows[rng.random_range(0..rows.len())]));
        }
        picked.extend((0..plan.level2_n).map(|_| pool[rng.random_range(0..pool.len())]));
    }

    let records = picked.iter().map(|&i| data.records[i].clone()).collect();
    let normalized = picked.iter().map(|&i| data.normalized[i]).collect();
    Ok(UserDataset::from_parts(data.user_id.clone(), records, normalized))
}

/// Replicate profiles in replicate order; `None` marks a replicate whose
/// resample could not be profiled.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapRun {
    pub profiles: Vec<Option<ResponseProfile>>,
}

impl BootstrapRun {
    pub fn failures(&self) -> usize {
        self.profiles.iter().filter(|p| p.is_none()).count()
    }

    pub fn successes(&self) -> Vec<ResponseProfile> {
        self.profiles.iter().flatten().cloned().collect()
    }

    pub fn summary(&self) -> Result<BootstrapSummary> {
        let mut summary = aggregate(&self.successes())?;
        summary.failed_replicates = self.failures();
        Ok(summary)
    }
}

/// Runs `plan.replicates` resample-and-estimate cycles in parallel. Replicate
/// `i` draws from the stream derived from `(seed, i)`.
pub fn bootstrap_profiles(data: &UserDataset, hp: &HyperParams, plan: &SamplingPlan, seed: u64) -> Result<BootstrapRun> {
    plan.validate()?;
    hp.validate()?;
    let profiles = (0..plan.replicates)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i as u64);
            stratified_resample(data, plan, &mut rng).and_then(|d| estimate_profile(&d, hp)).ok()
        })
        .collect();
    Ok(BootstrapRun { profiles })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParamStats {
    pub median: f64,
    pub p5: f64,
    pub p25: f64,
    pub p75: f64,
    pub p95: f64,
    /// Replicates in which the parameter exists.
    pub n: usize,
}

/// Percentile `q` in [0, 1] of sorted values, interpolating linearly between
/// order statistics.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl ParamStats {
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(Self {
            median: percentile(&v, 0.5),
            p5: percentile(&v, 0.05),
            p25: percentile(&v, 0.25),
            p75: percentile(&v, 0.75),
            p95: percentile(&v, 0.95),
            n: v.len(),
        })
    }

    pub fn is_ordered(&self) -> bool {
        self.p5 <= self.p25 && self.p25 <= self.median && self.median <= self.p75 && self.p75 <= self.p95
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct OneHot {
    pub is_mrs: u8,
    pub is_bimrs: u8,
    pub is_ers: u8,
    pub is_drs: u8,
    pub is_ars: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapSummary {
    pub family: Family,
    pub replicates: usize,
    pub failed_replicates: usize,
    pub main_kind: MainKind,
    pub sub_kind: SubKind,
    pub one_hot: OneHot,
    /// Keyed by parameter symbol (`w1`, `mu1`/`alpha1`, ..., `w_ade`).
    pub params: BTreeMap<String, ParamStats>,
    /// Keyed by metric name plus `loglik` and `aic`.
    pub metrics: BTreeMap<String, ParamStats>,
}

fn component_keys(family: Family, index: u8) -> (String, String) {
    match family {
        Family::Gaussian => (format!("mu{index}"), format!("sigma{index}")),
        Family::Beta => (format!("alpha{index}"), format!("beta{index}")),
    }
}

fn modal<T: Copy + Ord>(items: impl Iterator<Item = T>) -> Option<T> {
    let mut counts: BTreeMap<T, usize> = BTreeMap::new();
    for it in items {
        *counts.entry(it).or_default() += 1;
    }
    // Ties go to the earliest (simplest) kind in declaration order.
    counts.iter().fold(None, |best: Option<(T, usize)>, (&k, &c)| match best {
        Some((_, bc)) if bc >= c => best,
        _ => Some((k, c)),
    })
    .map(|(k, _)| k)
}

/// Summarizes replicate profiles; order-independent.
pub fn aggregate(profiles: &[ResponseProfile]) -> Result<BootstrapSummary> {
    let first = profiles.first().ok_or(Error::EmptyReplicates)?;
    let family = first.family;

    let mut values: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut metric_values: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let push = |map: &mut BTreeMap<String, Vec<f64>>, k: &str, v: f64| map.entry(k.to_string()).or_default().push(v);
    for p in profiles {
        if let Some((w1, c1, c2)) = main_components(&p.main) {
            push(&mut values, "w1", w1);
            for (i, c) in std::iter::once(c1).chain(c2).enumerate() {
                let (a, b) = component_keys(family, i as u8 + 1);
                let (x, y) = c.raw();
                push(&mut values, &a, x);
                push(&mut values, &b, y);
            }
            if c2.is_some() {
                push(&mut values, "w2", 1.0 - w1);
            }
        }
        push(&mut values, "w_ade", p.sub.w_ade);
        if let (k, Some(b)) = (p.sub.kind, p.sub.params) {
            if k != SubKind::None {
                push(&mut values, "alpha_ade", b.alpha());
                push(&mut values, "beta_ade", b.beta());
            }
        }
        if let Some(m) = p.metrics {
            for (k, v) in [
                ("d_kl", m.d_kl),
                ("corr", m.corr),
                ("chisq", m.chisq),
                ("intersect", m.intersect),
                ("bhattacharyya", m.bhattacharyya),
            ] {
                push(&mut metric_values, k, v);
            }
        }
        push(&mut metric_values, "loglik", p.loglik);
        push(&mut metric_values, "aic", p.aic);
    }
    let stats = |m: BTreeMap<String, Vec<f64>>| -> BTreeMap<String, ParamStats> {
        m.into_iter().filter_map(|(k, v)| ParamStats::from_values(&v).map(|s| (k, s))).collect()
    };
    let params = stats(values);

    let main_kind = modal(profiles.iter().map(|p| p.main.kind)).expect("non-empty");
    let median_w = params.get("w_ade").map_or(0.0, |s| s.median);
    let sub_kind = if median_w > 0.0 {
        modal(profiles.iter().map(|p| p.sub.kind).filter(|&k| k != SubKind::None)).unwrap_or(SubKind::None)
    } else {
        SubKind::None
    };
    let one_hot = OneHot {
        is_mrs: (main_kind == MainKind::Mrs) as u8,
        is_bimrs: (main_kind == MainKind::BiMrs) as u8,
        is_ers: (sub_kind == SubKind::Ers) as u8,
        is_drs: (sub_kind == SubKind::Drs) as u8,
        is_ars: (sub_kind == SubKind::Ars) as u8,
    };

    Ok(BootstrapSummary {
        family,
        replicates: profiles.len(),
        failed_replicates: 0,
        main_kind,
        sub_kind,
        one_hot,
        params,
        metrics: stats(metric_values),
    })
}
