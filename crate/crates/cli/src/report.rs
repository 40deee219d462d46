//! Output records. Keys follow the symbols of the published tables (`w1`,
//! `mu1`, `sigma1`, ..., `w_ade`, `is_bimrs`, ...), and every record is checked
//! before anything is written.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rprofile_core::bootstrap::{BootstrapSummary, OneHot, ParamStats};
use rprofile_core::distributions::Family;
use rprofile_core::metrics::HistogramMetrics;
use rprofile_core::pipeline::{
    main_components, HyperParams, MainKind, ProfileDiagnostics, ResponseProfile, SubKind,
};
use rprofile_core::simulation::RecoveryReport;
use serde::ser::SerializeStruct;
use serde::Serialize;

use crate::CliError;

/// Point estimates of the profile parameters; absent ones serialize as null.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Theta {
    pub family: Family,
    pub w1: Option<f64>,
    pub loc1: Option<f64>,
    pub scale1: Option<f64>,
    pub w2: Option<f64>,
    pub loc2: Option<f64>,
    pub scale2: Option<f64>,
    pub w_ade: f64,
    pub alpha_ade: Option<f64>,
    pub beta_ade: Option<f64>,
}

impl Theta {
    pub fn from_profile(p: &ResponseProfile) -> Self {
        let mut t = Theta {
            family: p.family,
            w1: None,
            loc1: None,
            scale1: None,
            w2: None,
            loc2: None,
            scale2: None,
            w_ade: p.sub.w_ade,
            alpha_ade: None,
            beta_ade: None,
        };
        if let Some((w1, c1, c2)) = main_components(&p.main) {
            let (a, b) = c1.raw();
            (t.w1, t.loc1, t.scale1) = (Some(w1), Some(a), Some(b));
            if let Some(c2) = c2 {
                let (a, b) = c2.raw();
                (t.w2, t.loc2, t.scale2) = (Some(1.0 - w1), Some(a), Some(b));
            }
        }
        if let (false, Some(b)) = (p.sub.kind == SubKind::None, p.sub.params) {
            (t.alpha_ade, t.beta_ade) = (Some(b.alpha()), Some(b.beta()));
        }
        t
    }

    fn values(&self) -> [Option<f64>; 9] {
        [
            self.w1,
            self.loc1,
            self.scale1,
            self.w2,
            self.loc2,
            self.scale2,
            Some(self.w_ade),
            self.alpha_ade,
            self.beta_ade,
        ]
    }
}

impl Serialize for Theta {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let names: [&'static str; 9] = match self.family {
            Family::Gaussian => ["w1", "mu1", "sigma1", "w2", "mu2", "sigma2", "w_ade", "alpha_ade", "beta_ade"],
            Family::Beta => ["w1", "alpha1", "beta1", "w2", "alpha2", "beta2", "w_ade", "alpha_ade", "beta_ade"],
        };
        let mut st = s.serialize_struct("Theta", names.len())?;
        for (name, value) in names.iter().zip(self.values()) {
            st.serialize_field(name, &value)?;
        }
        st.end()
    }
}

pub fn one_hot(main: MainKind, sub: SubKind) -> OneHot {
    OneHot {
        is_mrs: (main == MainKind::Mrs) as u8,
        is_bimrs: (main == MainKind::BiMrs) as u8,
        is_ers: (sub == SubKind::Ers) as u8,
        is_drs: (sub == SubKind::Drs) as u8,
        is_ars: (sub == SubKind::Ars) as u8,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProfileReport {
    pub user_id: String,
    pub n: usize,
    pub family: Family,
    pub main: MainKind,
    pub sub: SubKind,
    #[serde(flatten)]
    pub theta: Theta,
    pub left_peak_mean: Option<f64>,
    #[serde(flatten)]
    pub one_hot: OneHot,
    pub loglik: f64,
    pub k: usize,
    pub aic: f64,
    pub metrics: Option<HistogramMetrics>,
    pub diagnostics: ProfileDiagnostics,
}

impl ProfileReport {
    pub fn new(user_id: &str, profile: &ResponseProfile) -> Self {
        Self {
            user_id: user_id.to_string(),
            n: profile.diagnostics.n,
            family: profile.family,
            main: profile.main.kind,
            sub: profile.sub.kind,
            theta: Theta::from_profile(profile),
            left_peak_mean: profile.left_peak_mean(),
            one_hot: one_hot(profile.main.kind, profile.sub.kind),
            loglik: profile.loglik,
            k: profile.k,
            aic: profile.aic,
            metrics: profile.metrics,
            diagnostics: profile.diagnostics.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |m: String| Err(CliError::Invariant(format!("user {}: {m}", self.user_id)));
        if self.theta.values().iter().flatten().any(|v| !v.is_finite()) || !self.loglik.is_finite() {
            return fail("non-finite parameter or log-likelihood".into());
        }
        if !(0.0..=1.0).contains(&self.theta.w_ade) {
            return fail(format!("w_ade {} outside [0, 1]", self.theta.w_ade));
        }
        check_one_hot(&self.one_hot).map_err(|m| CliError::Invariant(format!("user {}: {m}", self.user_id)))?;
        // The selected whole-profile model must be AIC-best among the evaluated ones.
        let best = self.diagnostics.whole_candidates.iter().map(|c| c.aic).fold(f64::INFINITY, f64::min);
        if self.aic > best + 1e-9 {
            return fail(format!("selected AIC {} exceeds best candidate {best}", self.aic));
        }
        Ok(())
    }
}

fn check_one_hot(o: &OneHot) -> Result<(), String> {
    if o.is_mrs + o.is_bimrs > 1 || o.is_ers + o.is_drs + o.is_ars > 1 {
        return Err(format!("inconsistent one-hot features {o:?}"));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct Skipped {
    pub user_id: String,
    pub n: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitOutput {
    pub settings: HyperParams,
    pub users: Vec<ProfileReport>,
    pub skipped: Vec<Skipped>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BootstrapReport {
    pub user_id: String,
    pub n: usize,
    pub family: Family,
    pub replicates: usize,
    pub failed_replicates: usize,
    pub main: MainKind,
    pub sub: SubKind,
    #[serde(flatten)]
    pub one_hot: OneHot,
    /// Median and 5/25/75/95 percentiles per parameter.
    pub params: BTreeMap<String, ParamStats>,
    pub metrics: BTreeMap<String, ParamStats>,
}

impl BootstrapReport {
    pub fn new(user_id: &str, n: usize, s: BootstrapSummary) -> Self {
        Self {
            user_id: user_id.to_string(),
            n,
            family: s.family,
            replicates: s.replicates + s.failed_replicates,
            failed_replicates: s.failed_replicates,
            main: s.main_kind,
            sub: s.sub_kind,
            one_hot: s.one_hot,
            params: s.params,
            metrics: s.metrics,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |m: String| Err(CliError::Invariant(format!("user {}: {m}", self.user_id)));
        for (name, st) in self.params.iter().chain(&self.metrics) {
            let all = [st.p5, st.p25, st.median, st.p75, st.p95];
            if all.iter().any(|v| !v.is_finite()) {
                return fail(format!("non-finite percentile for {name}"));
            }
            if !st.is_ordered() {
                return fail(format!("percentiles of {name} are not ordered: {st:?}"));
            }
        }
        check_one_hot(&self.one_hot).map_err(|m| CliError::Invariant(format!("user {}: {m}", self.user_id)))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BootstrapOutput {
    pub settings: HyperParams,
    pub level1_n: usize,
    pub level2_n: usize,
    pub seed: u64,
    pub users: Vec<BootstrapReport>,
    pub skipped: Vec<Skipped>,
}

/// One row per grid cell, mirroring the agreement table.
#[derive(Debug, Clone, Serialize)]
pub struct RecoveryRow {
    pub family: Family,
    pub th: f64,
    pub accept_bidist: f64,
    pub r: Option<f64>,
    pub p: Option<f64>,
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub r_squared: Option<f64>,
    pub n_pairs: usize,
    pub median_corr: Option<f64>,
    pub main_mismatches: usize,
    pub sub_mismatches: usize,
}

impl RecoveryRow {
    pub fn new(r: &RecoveryReport) -> Self {
        let a = r.agreement;
        Self {
            family: r.family,
            th: r.th,
            accept_bidist: r.accept_bidist,
            r: a.map(|a| a.r),
            p: a.map(|a| a.p),
            slope: a.map(|a| a.slope),
            intercept: a.map(|a| a.intercept),
            r_squared: a.map(|a| a.r_squared),
            n_pairs: a.map_or(0, |a| a.n_pairs),
            median_corr: r.median_corr(),
            main_mismatches: r.main_mismatches,
            sub_mismatches: r.sub_mismatches,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = self.r.is_some_and(|r| !(-1.0..=1.0).contains(&r))
            || self.r_squared.is_some_and(|r2| !(0.0..=1.0).contains(&r2))
            || [self.slope, self.intercept, self.p].iter().flatten().any(|v| !v.is_finite());
        if bad {
            return Err(CliError::Invariant(format!("agreement out of range: {self:?}")));
        }
        Ok(())
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut out = serde_json::to_vec_pretty(value).map_err(|e| CliError::Invariant(format!("serialization: {e}")))?;
    out.push(b'\n');
    Ok(out)
}

pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| CliError::Invariant(format!("serialization: {e}")))?;
    }
    w.into_inner().map_err(|e| CliError::Invariant(format!("serialization: {e}")))
}

/// Writes `bytes` to `path` through a temporary file in the same directory
/// and a rename, or to standard output when `path` is `None`.
pub fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Input(format!("writing output: {e}"));
    let Some(path) = path else {
        return std::io::stdout().lock().write_all(bytes).map_err(io);
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        std::fs::set_permissions(tmp.path(), std::fs::Permissions::from_mode(0o644)).map_err(io)?;
    }
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}
