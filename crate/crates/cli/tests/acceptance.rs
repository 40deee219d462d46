//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! The process exits 0 even when a criterion fails so that the regular test
//! run stays usable; set `RPROFILE_ACCEPTANCE_STRICT=1` to turn any FAIL into
//! a nonzero exit.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rprofile_core::bootstrap::{stratified_resample, ParamStats, SamplingPlan};
use rprofile_core::distributions::{BetaParams, Component, Family, Mixture2};
use rprofile_core::estimation::fit_mixture2_em_traced;
use rprofile_core::metrics::{compare, Histogram};
use rprofile_core::pipeline::{
    estimate_main, estimate_profile, normalize, separation, split, HyperParams, MainKind, Polarity, ResponseRecord,
    UserDataset,
};
use rprofile_core::rng::seeded;
use rprofile_core::simulation::{builtin_conditions, find_condition, run_recovery, RecoveryConfig, RecoveryGrid};
use serde_json::Value;

struct Outcome {
    pass: bool,
    detail: String,
}

fn rprofile(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_rprofile")).args(args).output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out.stdout)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Row {
    family: String,
    th: f64,
    accept: f64,
    r: f64,
    slope: f64,
    r_squared: f64,
}

fn read_rows(path: &Path) -> Vec<Row> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let headers = rdr.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let num = |rec: &csv::StringRecord, name: &str| rec[col(name)].parse::<f64>().unwrap_or(f64::NAN);
    rdr.records()
        .map(|rec| {
            let rec = rec.unwrap();
            Row {
                family: rec[col("family")].to_string(),
                th: num(&rec, "th"),
                accept: num(&rec, "accept_bidist"),
                r: num(&rec, "r"),
                slope: num(&rec, "slope"),
                r_squared: num(&rec, "r_squared"),
            }
        })
        .collect()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-9
}

fn describe(r: &Row) -> String {
    format!("{}/th={}/accept={}: r={:.3} slope={:.3} R2={:.3}", r.family, r.th, r.accept, r.r, r.slope, r.r_squared)
}

fn criterion_1(rows: &[Row]) -> Outcome {
    let row = rows.iter().find(|r| r.family == "beta" && close(r.th, 0.15) && close(r.accept, 0.15)).unwrap();
    Outcome {
        pass: row.r >= 0.95 && (0.85..=1.15).contains(&row.slope) && row.r_squared >= 0.90,
        detail: describe(row),
    }
}

fn criterion_2(rows: &[Row]) -> Outcome {
    let cells: Vec<&Row> = rows.iter().filter(|r| r.family == "gaussian" && close(r.th, 0.15)).collect();
    let pass = cells.iter().all(|r| r.r >= 0.95 && (0.85..=1.05).contains(&r.slope) && r.r_squared >= 0.90);
    Outcome { pass, detail: cells.iter().map(|r| describe(r)).collect::<Vec<_>>().join("; ") }
}

fn criterion_3(rows: &[Row]) -> Outcome {
    let cells: Vec<&Row> = rows.iter().filter(|r| r.family == "gaussian" && close(r.th, 0.45)).collect();
    Outcome {
        pass: cells.iter().all(|r| r.r <= 0.80),
        detail: cells.iter().map(|r| describe(r)).collect::<Vec<_>>().join("; "),
    }
}

fn criterion_4(dir: &Path) -> Result<Outcome, String> {
    let mut kinds = Vec::new();
    for accept in ["0.15", "0.30"] {
        let out = dir.join(format!("gate-{accept}.csv"));
        rprofile(&["recover", "--condition", "19", "--th", "0.05", "--accept", accept, "--output", s(&out)])?;
        let reports: Value = serde_json::from_str(&std::fs::read_to_string(out.with_extension("json")).unwrap()).unwrap();
        kinds.push(reports[0]["outcomes"][0]["is_bimrs"].as_u64().unwrap());
    }
    Ok(Outcome {
        pass: kinds == [1, 0],
        detail: format!("#19 th=0.05: is_BiMRS={} at accept=0.15, {} at accept=0.30", kinds[0], kinds[1]),
    })
}

/// Violations of the one-hot and weight expectations among `outcomes`.
fn one_hot_violations(outcomes: &[Value]) -> Vec<String> {
    let truth: BTreeMap<u32, f64> = builtin_conditions().iter().map(|c| (c.id, c.w_ade())).collect();
    let mut bad = Vec::new();
    for o in outcomes {
        let id = o["id"].as_u64().unwrap() as u32;
        let is = |k: &str| o[k].as_u64().unwrap_or(0);
        let bimodal = matches!(id, 17..=19 | 31..=36);
        let unimodal = matches!(id, 14..=16 | 21..=26);
        if bimodal && is("is_bimrs") != 1 || unimodal && is("is_bimrs") != 0 {
            bad.push(format!("#{id} is_BiMRS={}", is("is_bimrs")));
        }
        if matches!(id, 11 | 21..=23 | 31..=33) && is("is_ers") != 1 {
            bad.push(format!("#{id} is_ERS={}", is("is_ers")));
        }
        if id >= 21 {
            let w = o["w_ade"].as_f64().unwrap_or(f64::NAN);
            let off = (w - truth[&id]).abs();
            if off.is_nan() || off > 0.1 + 1e-9 {
                bad.push(format!("#{id} w_ADE={w} (truth {})", truth[&id]));
            }
        }
    }
    bad
}

fn criterion_5(rec_json: &Path) -> Outcome {
    let reports: Value = serde_json::from_str(&std::fs::read_to_string(rec_json).unwrap()).unwrap();
    let d = HyperParams::default();
    let family = serde_json::to_value(d.family).unwrap();
    let cell = reports
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["family"] == family && close(r["th"].as_f64().unwrap(), d.th) && close(r["accept_bidist"].as_f64().unwrap(), d.accept_bidist))
        .unwrap();
    let bad = one_hot_violations(cell["outcomes"].as_array().unwrap());

    // Sampling variability context: the same checks over 40 independent draws.
    let mut rates = Vec::new();
    for family in [Family::Gaussian, Family::Beta] {
        let grid = RecoveryGrid { families: vec![family], th: vec![d.th], accept_bidist: vec![d.accept_bidist] };
        let config = RecoveryConfig { n_per_condition: 1000, repeats: 40, seed: 42 };
        let report = &run_recovery(&builtin_conditions(), &grid, &d, &config).unwrap()[0];
        let passing = (0..40)
            .filter(|&k| {
                let outcomes: Vec<Value> =
                    report.outcomes.iter().filter(|o| o.repeat == k).map(|o| serde_json::to_value(o).unwrap()).collect();
                one_hot_violations(&outcomes).is_empty()
            })
            .count();
        rates.push(format!("{family:?} {passing}/40"));
    }
    let verdict = if bad.is_empty() { "all conditions as expected".to_string() } else { bad.join(", ") };
    Outcome {
        pass: bad.is_empty(),
        detail: format!("seed 42: {verdict}; draws passing every check: {}", rates.join(", ")),
    }
}

fn criterion_6() -> Outcome {
    let mut bad = Vec::new();
    let mut check = |name: &str, got: f64, want: f64| {
        if (got - want).abs() > 1e-9 {
            bad.push(format!("{name}: {got} vs {want}"));
        }
    };
    let records = |raws: &[f64]| -> Vec<ResponseRecord> {
        raws.iter()
            .map(|&raw_value| ResponseRecord {
                user_id: "u".into(),
                item_id: "i".into(),
                polarity: Polarity::Bipolar,
                raw_value,
                scale_min: 0.0,
                scale_max: 100.0,
            })
            .collect()
    };
    let ten = normalize(records(&[0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0])).unwrap();
    check("normalize 0 (N=10)", ten.normalized[0], 0.05);
    let mut hundred = vec![50.0; 99];
    hundred.push(100.0);
    check("normalize 100 (N=100)", normalize(records(&hundred)).unwrap().normalized[99], 0.995);

    let mix = |a1, b1, a2, b2| {
        let c = |a, b| Component::Beta(BetaParams::new(a, b).unwrap());
        Mixture2::new(0.5, c(a1, b1), c(a2, b2)).unwrap()
    };
    check("separation #17", separation(&mix(15.0, 45.0, 45.0, 15.0)), 30.0 / 58.0);
    check("separation #19", separation(&mix(15.0, 20.0, 20.0, 15.0)), 5.0 / 33.0);

    let (m, sd) = BetaParams::new(10.0, 10.0).unwrap().moments();
    check("moments (10,10) mean", m, 0.5);
    check("moments (10,10) sd", sd, (100.0f64 / (400.0 * 21.0)).sqrt());
    if (sd - 0.10911).abs() > 5e-6 {
        bad.push(format!("moments (10,10) sd {sd} does not round to 0.10911"));
    }
    Outcome {
        pass: bad.is_empty(),
        detail: if bad.is_empty() { "7 analytic cases within 1e-9".into() } else { bad.join("; ") },
    }
}

fn criterion_7(dir: &Path) -> Result<Outcome, String> {
    let mut bad: Vec<String> = Vec::new();
    let conditions = builtin_conditions();
    let mut cases = 0;

    for c in &conditions {
        for seed in 0..3u64 {
            let values = c.sample(400, 100 * c.id as u64 + seed).unwrap();
            for family in [Family::Beta, Family::Gaussian] {
                // EM log-likelihood never decreases.
                let (_, trace) = fit_mixture2_em_traced(&values, family, 10).unwrap();
                if trace.windows(2).any(|w| w[1] < w[0] - 1e-8 * w[0].abs().max(1.0)) {
                    bad.push(format!("EM decreased on #{} seed {seed}", c.id));
                }
                for th in [0.05, 0.15, 0.25, 0.35] {
                    let hp = HyperParams { family, th, ..HyperParams::default() };
                    for polarity in [Polarity::Bipolar, Polarity::Unipolar] {
                        cases += 1;
                        let data = UserDataset::from_unit_values("u", &values, polarity).unwrap();
                        let p = estimate_profile(&data, &hp).unwrap();
                        if p.diagnostics.whole_candidates.iter().any(|w| p.aic > w.aic + 1e-9) {
                            bad.push(format!("non-AIC-best selection on #{} ({family:?}, th={th})", c.id));
                        }
                        if polarity == Polarity::Unipolar && p.main.kind == MainKind::BiMrs {
                            bad.push(format!("BiMRS without bipolar data on #{}", c.id));
                        }
                    }
                }
                // Raising the gate never turns a non-BiMRS selection into BiMRS.
                let (d_main, _) = split(&values, 0.15);
                let kinds: Vec<MainKind> = (0..=10)
                    .map(|i| {
                        let hp = HyperParams { family, accept_bidist: i as f64 * 0.05, ..HyperParams::default() };
                        estimate_main(&d_main, true, &hp).unwrap().main.kind
                    })
                    .collect();
                if kinds.windows(2).any(|w| w[0] != MainKind::BiMrs && w[1] == MainKind::BiMrs) {
                    bad.push(format!("gate not monotone on #{} seed {seed}", c.id));
                }
                // Histogram comparison of a histogram with itself is the identity.
                let h = Histogram::from_values(&values, 0.05).unwrap();
                let m = compare(&h, &h).unwrap();
                if m.d_kl.abs() > 1e-12 || m.chisq != 0.0 || (m.intersect - 1.0).abs() > 1e-12 || m.bhattacharyya > 1e-6 || (m.corr - 1.0).abs() > 1e-12 {
                    bad.push(format!("histogram identity broken on #{}", c.id));
                }
            }
        }
    }

    for k in 1..200usize {
        let v: Vec<f64> = (0..k).map(|i| ((i * 7919) % 101) as f64 - 50.0).collect();
        if !ParamStats::from_values(&v).unwrap().is_ordered() {
            bad.push(format!("percentiles out of order for {k} values"));
        }
    }

    // Stratum balance: three items of very different sizes, 10^4 draws.
    let mut records = Vec::new();
    for (item, count) in [("A", 5), ("B", 50), ("C", 500)] {
        for j in 0..count {
            records.push(ResponseRecord {
                user_id: "u".into(),
                item_id: item.into(),
                polarity: Polarity::Unipolar,
                raw_value: 1.0 + j as f64,
                scale_min: 0.0,
                scale_max: 1000.0,
            });
        }
    }
    let data = normalize(records).unwrap();
    let plan = SamplingPlan { level1_n: 300, level2_n: 10_000, replicates: 1 };
    let out = stratified_resample(&data, &plan, &mut seeded(42)).unwrap();
    let mut counts: BTreeMap<&str, f64> = BTreeMap::new();
    for r in &out.records {
        *counts.entry(r.item_id.as_str()).or_default() += 1.0;
    }
    let expected = 10_000.0 / 3.0;
    let chisq: f64 = counts.values().map(|c| (c - expected).powi(2) / expected).sum();
    // Chi-square survival function with two degrees of freedom.
    let p_balance = (-chisq / 2.0).exp();
    if p_balance <= 0.001 {
        bad.push(format!("stratum balance p={p_balance}"));
    }

    // Byte-identical reruns through the command line.
    let sim = dir.join("det.csv");
    rprofile(&["simulate", "--condition", "31", "--n", "500", "--output", s(&sim)])?;
    let boot = |name: &str| -> Result<Vec<u8>, String> {
        let out = dir.join(name);
        rprofile(&["bootstrap", "--input", s(&sim), "--replicates", "50", "--seed", "3", "--output", s(&out)])?;
        Ok(std::fs::read(out).unwrap())
    };
    if boot("b1.json")? != boot("b2.json")? {
        bad.push("bootstrap reruns differ".into());
    }
    if rprofile(&["recover", "--condition", "34", "--repeats", "2"])? != rprofile(&["recover", "--condition", "34", "--repeats", "2"])? {
        bad.push("recover reruns differ".into());
    }

    Ok(Outcome {
        pass: bad.is_empty(),
        detail: if bad.is_empty() {
            format!("{cases} profile fits, EM traces, gate sweeps and identities clean; stratum balance p={p_balance:.3}; reruns identical")
        } else {
            bad.join("; ")
        },
    })
}

/// DailySense-shaped cohort: ESM answers on two bipolar items and DRM answers
/// on five unipolar items, on a 0-100 integer scale.
fn cohort_csv(path: &Path) -> usize {
    let shapes = [("p11", 66, 14), ("p12", 42, 13), ("p18", 15, 14)];
    let esm = find_condition(31).unwrap();
    let drm = find_condition(24).unwrap();
    let mut text = String::from("user_id,item_id,polarity,value\n");
    for (u, (user, n_esm, n_drm)) in shapes.iter().enumerate() {
        let bipolar = esm.sample(2 * n_esm, 10 + u as u64).unwrap();
        for (i, v) in bipolar.iter().enumerate() {
            text.push_str(&format!("{user},esm{},bipolar,{}\n", i % 2, (v * 100.0).round()));
        }
        let unipolar = drm.sample(*n_drm, 20 + u as u64).unwrap();
        for (i, v) in unipolar.iter().enumerate() {
            text.push_str(&format!("{user},drm{},unipolar,{}\n", i % 5, (v * 100.0).round()));
        }
    }
    std::fs::write(path, text).unwrap();
    shapes.len()
}

fn criterion_8(dir: &Path) -> Result<Outcome, String> {
    let input = dir.join("cohort.csv");
    let users = cohort_csv(&input);
    let out = dir.join("boot.json");
    let start = Instant::now();
    rprofile(&["bootstrap", "--input", s(&input), "--level1-n", "300", "--level2-n", "1800", "--replicates", "1000", "--output", s(&out)])?;
    let per_user = start.elapsed().as_secs_f64() / users as f64;

    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let reports = v["users"].as_array().unwrap();
    let mut bad = Vec::new();
    let mut summaries = 0;
    for u in reports {
        if u["replicates"] != 1000 {
            bad.push(format!("{}: {} replicates", u["user_id"], u["replicates"]));
        }
        for (name, st) in u["params"].as_object().unwrap().iter().chain(u["metrics"].as_object().unwrap()) {
            summaries += 1;
            let q: Vec<f64> = ["p5", "p25", "median", "p75", "p95"].iter().map(|k| st[k].as_f64().unwrap_or(f64::NAN)).collect();
            if !q.windows(2).all(|w| w[0] <= w[1]) {
                bad.push(format!("{} {name}: {q:?}", u["user_id"]));
            }
        }
    }
    if reports.len() != users {
        bad.push(format!("{} of {users} users summarized", reports.len()));
    }
    let pass = bad.is_empty() && per_user < 600.0;
    Ok(Outcome {
        pass,
        detail: format!(
            "{users} users x 1000 replicates in {per_user:.1} s/user; {summaries} summaries ordered{}",
            if bad.is_empty() { String::new() } else { format!("; violations: {}", bad.join(", ")) }
        ),
    })
}

fn main() {
    let dir = tempfile::tempdir().expect("temporary directory");
    let rec = dir.path().join("recovery.csv");
    let recovery = rprofile(&["recover", "--output", s(&rec)]).map(|_| read_rows(&rec));

    let names = [
        "parameter recovery, Beta th=0.15 accept=0.15",
        "parameter recovery, Gaussian th=0.15",
        "degradation at th=0.45",
        "separation gate on #19",
        "one-hot and weight recovery with defaults",
        "analytic cases",
        "property suites",
        "bootstrap shape check",
    ];
    let failed = |e: String| Outcome { pass: false, detail: e };
    let results: Vec<Outcome> = vec![
        recovery.as_ref().map(|r| criterion_1(r)).unwrap_or_else(|e| failed(e.clone())),
        recovery.as_ref().map(|r| criterion_2(r)).unwrap_or_else(|e| failed(e.clone())),
        recovery.as_ref().map(|r| criterion_3(r)).unwrap_or_else(|e| failed(e.clone())),
        criterion_4(dir.path()).unwrap_or_else(failed),
        if recovery.is_ok() { criterion_5(&rec.with_extension("json")) } else { failed("recovery run failed".into()) },
        criterion_6(),
        criterion_7(dir.path()).unwrap_or_else(failed),
        criterion_8(dir.path()).unwrap_or_else(failed),
    ];

    let mut passed = 0;
    for (i, (name, r)) in names.iter().zip(&results).enumerate() {
        passed += r.pass as usize;
        println!("criterion {}: {} - {name}: {}", i + 1, if r.pass { "PASS" } else { "FAIL" }, r.detail);
    }
    println!("acceptance: {passed}/{} criteria pass", results.len());
    let strict = std::env::var("RPROFILE_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && passed < results.len() {
        std::process::exit(1);
    }
}
