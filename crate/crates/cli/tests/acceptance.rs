//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use fcer_core::distill::{
    apply_head, batch_loss_and_grad, fuse_ensemble, reference_maps, sigma_max, train_head, DistillSample,
    TrainConfig, UncertaintyHead, ValidationSample,
};
use fcer_core::fcer::{
    aggregate_mean_std, build_fcer, evaluate_fire, evaluate_unmasked, regions, resolve_anchor, rounded_percent,
    saturation_radius, AnchorPolicy, ModelOutput, SweepConfig,
};
use fcer_core::metrics::{average_precision_scores, average_surface_distance, roc_auc_scores, uq_auprc, MetricName};
use fcer_core::morphology::{dilate, squared_distance_transform};
use fcer_core::oracle;
use fcer_core::stats::{rank_biserial, wilcoxon_diffs, Alternative, TestMode};
use fcer_core::synth::{generate_scenario, ScenarioSpec};
use fcer_core::{BinaryMask, FireEvent, GeoConfig, Grid, ProbabilityMap, UncertaintyMap};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, Option<Duration>);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// Per-year rows of the published results table, in column order
// AP, ASD [km], Brier, NLL, AUROC, AUPRC.
const COLUMNS: [&str; 6] = ["AP", "ASD", "Brier", "NLL", "AUROC", "AUPRC"];
const DECIMALS: [i32; 6] = [2, 2, 3, 3, 3, 3];
const ENSEMBLE_YEARS: [[f64; 6]; 4] = [
    [0.53, 1.21, 0.159, 0.505, 0.562, 0.251],
    [0.37, 1.13, 0.163, 0.517, 0.527, 0.233],
    [0.51, 1.52, 0.173, 0.549, 0.568, 0.270],
    [0.60, 1.68, 0.150, 0.476, 0.577, 0.243],
];
#[allow(clippy::approx_constant)]
const STUDENT_YEARS: [[f64; 6]; 4] = [
    [0.51, 1.22, 0.160, 0.510, 0.603, 0.281],
    [0.35, 1.22, 0.169, 0.541, 0.619, 0.318],
    [0.50, 1.71, 0.172, 0.548, 0.605, 0.291],
    [0.58, 1.51, 0.151, 0.481, 0.689, 0.339],
];
const ENSEMBLE_MEAN: [(f64, f64); 6] = [
    (0.50, 0.08),
    (1.39, 0.22),
    (0.161, 0.008),
    (0.512, 0.026),
    (0.558, 0.019),
    (0.249, 0.014),
];
const STUDENT_MEAN: [(f64, f64); 6] = [
    (0.49, 0.09),
    (1.41, 0.21),
    (0.163, 0.008),
    (0.520, 0.027),
    (0.629, 0.035),
    (0.307, 0.023),
];

fn table_aggregation() -> Outcome {
    let mut bad = Vec::new();
    for (method, years, printed) in [
        ("Ensemble", ENSEMBLE_YEARS, ENSEMBLE_MEAN),
        ("DUDES", STUDENT_YEARS, STUDENT_MEAN),
    ] {
        for (c, name) in COLUMNS.iter().enumerate() {
            let vals: Vec<f64> = years.iter().map(|y| y[c]).collect();
            let (mean, std) = aggregate_mean_std(&vals).map_err(|e| e.to_string())?;
            // a printed value stands for anything that rounds to it
            let tol = 0.5 * 10f64.powi(-DECIMALS[c]) + 1e-9;
            let (pm, ps) = printed[c];
            if (mean - pm).abs() > tol || (std - ps).abs() > tol {
                bad.push(format!("{method} {name}: computed {mean:.4}±{std:.4}, printed {pm}±{ps}"));
            }
        }
    }
    ensure(bad.is_empty(), || format!("{} of 12 rows differ: {}", bad.len(), bad.join("; ")))?;
    Ok("12/12 rows reproduce".into())
}

fn baseline_percentages() -> Outcome {
    let cases = [
        ("DUDES AUROC", 0.629, 0.5, 26),
        ("DUDES AUPRC", 0.307, 0.205, 50),
        ("Ensemble AUROC", 0.558, 0.5, 12),
        ("Ensemble AUPRC", 0.249, 0.205, 23),
    ];
    let mut bad = Vec::new();
    for (name, v, b, want) in cases {
        let got = rounded_percent(v, b).map_err(|e| e.to_string())?;
        if got != want {
            bad.push(format!("{name}: {v} vs {b} gives {got:+}%, printed {want:+}%"));
        }
    }
    ensure(bad.is_empty(), || bad.join("; "))?;
    Ok("+26%, +50%, +12%, +23%".into())
}

fn random_mask(rng: &mut ChaCha8Rng, max: usize) -> BinaryMask {
    let h = rng.random_range(1..=max);
    let w = rng.random_range(1..=max);
    let density = rng.random_range(0.05..0.6);
    BinaryMask::from_bools(h, w, (0..h * w).map(|_| rng.random_bool(density))).unwrap()
}

fn random_ranking(rng: &mut ChaCha8Rng, max_side: usize) -> (Vec<f64>, Vec<bool>) {
    loop {
        let n = rng.random_range(2..=max_side * max_side);
        let levels = rng.random_range(2..20);
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64 / levels as f64).collect();
        let labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.3)).collect();
        if labels.iter().any(|&l| l) && labels.iter().any(|&l| !l) {
            return (scores, labels);
        }
    }
}

fn oracle_equivalence() -> Outcome {
    const N: usize = 200;
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    for i in 0..N {
        let (s, l) = random_ranking(&mut rng, 32);
        let ap = average_precision_scores(&s, &l).unwrap();
        let ap_o = oracle::average_precision(&s, &l).unwrap();
        ensure((ap - ap_o).abs() <= 1e-12, || format!("AP instance {i}: {ap} vs {ap_o}"))?;
        let auc = roc_auc_scores(&s, &l).unwrap();
        let auc_o = oracle::auroc(&s, &l).unwrap();
        ensure((auc - auc_o).abs() <= 1e-12, || format!("AUROC instance {i}: {auc} vs {auc_o}"))?;

        let n = s.len();
        let unc = UncertaintyMap::from_vec(1, n, s.iter().map(|&v| v as f32).collect()).unwrap();
        let err = BinaryMask::from_bools(1, n, l.iter().copied()).unwrap();
        let widened: Vec<f64> = unc.values().iter().map(|&v| f64::from(v)).collect();
        let (pr, _) = uq_auprc(&unc, &err, None).unwrap();
        let pr_o = oracle::auprc(&widened, &l).unwrap();
        ensure((pr - pr_o).abs() <= 1e-12, || format!("AUPRC instance {i}: {pr} vs {pr_o}"))?;
    }

    let geo = GeoConfig::default();
    let mut checked = 0;
    while checked < N {
        let a = random_mask(&mut rng, 16);
        let b = BinaryMask::from_bools(a.height(), a.width(), (0..a.len()).map(|_| rng.random_bool(0.3))).unwrap();
        if a.is_empty_mask() || b.is_empty_mask() {
            continue;
        }
        let fast = average_surface_distance(&a, &b, &geo).unwrap();
        let slow = oracle::average_surface_distance(&a, &b, geo.meters_per_pixel).unwrap();
        // meters scale the pixel sum, so compare in pixels
        let (fp, sp) = (fast / geo.meters_per_pixel, slow / geo.meters_per_pixel);
        ensure((fp - sp).abs() <= 1e-12, || format!("ASD instance {checked}: {fast} vs {slow}"))?;

        ensure(
            squared_distance_transform(&a).unwrap().values() == oracle::squared_edt(&a).unwrap().as_slice(),
            || format!("EDT instance {checked}"),
        )?;
        let r = f64::from(rng.random_range(0..=8u32));
        ensure(dilate(&a, r).unwrap() == oracle::dilate(&a, r).unwrap(), || {
            format!("dilation instance {checked} radius {r}")
        })?;
        checked += 1;
    }
    Ok(format!("{N} instances each for AP, AUROC, AUPRC, ASD, EDT, dilation"))
}

fn wilcoxon_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2002);
    let mut samples = 0;
    for n in 1..=12usize {
        for k in 0..20 {
            // half the samples use small integers to force ties and zeros
            let diffs: Vec<f64> = if k % 2 == 0 {
                (0..n).map(|_| f64::from(rng.random_range(-4i32..=4))).collect()
            } else {
                (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
            };
            let Ok(slow) = oracle::wilcoxon(&diffs) else {
                continue;
            };
            let g = wilcoxon_diffs(&diffs, Alternative::Greater, Some(TestMode::Exact)).unwrap();
            let l = wilcoxon_diffs(&diffs, Alternative::Less, Some(TestMode::Exact)).unwrap();
            ensure((g.w_plus, g.w_minus) == (slow.w_plus, slow.w_minus), || format!("n={n}: rank sums differ"))?;
            ensure(
                (g.p_value - slow.p_greater).abs() <= 1e-12 && (l.p_value - slow.p_less).abs() <= 1e-12,
                || format!("n={n} {diffs:?}: p {} / {} vs {} / {}", g.p_value, l.p_value, slow.p_greater, slow.p_less),
            )?;
            let r = rank_biserial(g.w_plus, g.w_minus).unwrap();
            let want = (slow.w_plus - slow.w_minus) / (slow.w_plus + slow.w_minus);
            ensure(r == want, || format!("n={n}: rank-biserial {r} vs {want}"))?;
            samples += 1;
        }
    }
    ensure(samples >= 100, || format!("only {samples} usable samples"))?;

    let mut worst: f64 = 0.0;
    for n in 20..=25usize {
        for _ in 0..50 {
            let diffs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0) + 0.2).collect();
            for alt in [Alternative::Greater, Alternative::Less] {
                let exact = wilcoxon_diffs(&diffs, alt, Some(TestMode::Exact)).unwrap().p_value;
                let normal = wilcoxon_diffs(&diffs, alt, Some(TestMode::Normal)).unwrap().p_value;
                worst = worst.max((exact - normal).abs());
            }
        }
    }
    ensure(worst <= 0.01, || format!("normal approximation off by {worst:.4}"))?;
    Ok(format!("{samples} exact samples match enumeration; normal max |dp| = {worst:.4}"))
}

fn anchor_resolution() -> Outcome {
    let geo = GeoConfig::default();
    let px = resolve_anchor(&[1390.0], &geo, AnchorPolicy::MeanAsd).map_err(|e| e.to_string())?;
    ensure(px == 4, || format!("1.39 km resolved to {px} px"))?;
    Ok("1.39 km at 375 m/px -> 4 px".into())
}

fn ensemble_output(e: &FireEvent) -> ModelOutput {
    let t = fuse_ensemble(&e.members).unwrap();
    ModelOutput {
        prob: t.mean_prob,
        unc: t.uncertainty,
    }
}

fn fcer_structure() -> Outcome {
    let events = generate_scenario(&ScenarioSpec {
        grid_size: 40,
        n_fires: 12,
        blob_radius_range_px: (2.0, 8.0),
        rng_seed: 3003,
        ..ScenarioSpec::default()
    })
    .map_err(|e| e.to_string())?;
    let refs = reference_maps(&events).map_err(|e| e.to_string())?;
    let config = SweepConfig::default();
    let geo = GeoConfig::default();

    for (e, reference) in events.iter().zip(&refs) {
        let (h, w) = e.shape();
        let sat = saturation_radius(h, w);
        let radii: Vec<u32> = (0..=sat).collect();
        let rs = regions(&e.gt, &radii).unwrap();
        for (r, pair) in rs.windows(2).enumerate() {
            ensure(pair[0].is_subset_of(&pair[1]), || format!("{}: region {r} not inside {}", e.id, r + 1))?;
        }
        let out = ensemble_output(e);
        let at_sat = evaluate_fire(e, &out, reference, &[sat], &config, &geo).unwrap();
        let unmasked = evaluate_unmasked(e, &out, reference, &config, &geo).unwrap();
        for m in MetricName::ALL {
            ensure(at_sat.records[0].get(m) == unmasked.get(m), || {
                format!("{}: {m:?} at saturation differs from unmasked", e.id)
            })?;
        }
    }

    let region_metrics = [
        MetricName::Brier,
        MetricName::Nll,
        MetricName::Auroc,
        MetricName::Auprc,
        MetricName::ErrorPrevalence,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(3004);
    for trial in 0..50 {
        let i = trial % events.len();
        let (e, reference) = (&events[i], &refs[i]);
        let r = rng.random_range(0..=8);
        let region = build_fcer(&e.gt, r).unwrap();
        let out = ensemble_output(e);
        let base = evaluate_fire(e, &out, reference, &[r], &config, &geo).unwrap();
        let (h, w) = e.shape();
        let mut scramble = |g: &Grid<f32>| {
            let vals = g
                .values()
                .iter()
                .enumerate()
                .map(|(k, &v)| if region.is_set(k) { v } else { rng.random::<f32>() })
                .collect();
            Grid::new(h, w, vals).unwrap()
        };
        let edited = ModelOutput {
            prob: ProbabilityMap::new(scramble(out.prob.grid())).unwrap(),
            unc: UncertaintyMap::new(scramble(out.unc.grid())).unwrap(),
        };
        let edited_ref = ProbabilityMap::new(scramble(reference.grid())).unwrap();
        let again = evaluate_fire(e, &edited, &edited_ref, &[r], &config, &geo).unwrap();
        for m in region_metrics {
            ensure(base.records[0].get(m) == again.records[0].get(m), || {
                format!("fuzz trial {trial}: {m:?} changed after edits outside radius {r}")
            })?;
        }
    }
    Ok(format!("{} fires nested and saturated; 50 fuzz trials invariant", events.len()))
}

fn teacher_normalization() -> Outcome {
    const N: usize = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(4004);
    let members: Vec<ProbabilityMap> = (0..3)
        .map(|_| ProbabilityMap::from_vec(1, N, (0..N).map(|_| rng.random::<f32>()).collect()).unwrap())
        .collect();
    let t = fuse_ensemble(&members).map_err(|e| e.to_string())?;
    let (lo, hi) = t
        .uncertainty
        .values()
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    ensure((0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi), || {
        format!("uncertainty range [{lo}, {hi}]")
    })?;

    let corner: Vec<ProbabilityMap> =
        [0.0f32, 0.0, 1.0].iter().map(|&p| ProbabilityMap::from_vec(1, 1, vec![p]).unwrap()).collect();
    let peak = fuse_ensemble(&corner).unwrap().uncertainty.values()[0];
    ensure(peak == 1.0, || format!("(0,0,1) gives {peak}"))?;

    let mut best: f64 = 0.0;
    for a in 0..=100 {
        for b in 0..=100 {
            for c in 0..=100 {
                let p = [a, b, c].map(|v| f64::from(v) / 100.0);
                let m = p.iter().sum::<f64>() / 3.0;
                let ss: f64 = p.iter().map(|v| (v - m) * (v - m)).sum();
                best = best.max((ss / 2.0).sqrt());
            }
        }
    }
    let want = (1.0f64 / 3.0).sqrt();
    ensure((best - want).abs() <= 1e-12 && (sigma_max(3) - want).abs() <= 1e-12, || {
        format!("grid max {best}, sigma_max(3) {}, sqrt(1/3) {want}", sigma_max(3))
    })?;
    Ok(format!("range [{lo:.4}, {hi:.4}] over {N} triples; grid max {best:.6}"))
}

fn synthetic_pack(n_fires: usize, seed: u64) -> (Vec<FireEvent>, Vec<ProbabilityMap>) {
    let events = generate_scenario(&ScenarioSpec {
        grid_size: 32,
        n_fires,
        blob_radius_range_px: (2.0, 6.0),
        rng_seed: seed,
        ..ScenarioSpec::default()
    })
    .unwrap();
    let refs = reference_maps(&events).unwrap();
    (events, refs)
}

fn mean_auroc(head: &UncertaintyHead, val: &[ValidationSample]) -> f64 {
    let v: Vec<f64> = val.iter().filter_map(|s| s.auroc(head).unwrap()).collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn distillation() -> Outcome {
    // (a) gradient against central differences
    let (events, _) = synthetic_pack(4, 5005);
    let samples: Vec<DistillSample> = events
        .iter()
        .map(|e| DistillSample::new(e.features.clone().unwrap(), fuse_ensemble(&e.members).unwrap().uncertainty).unwrap())
        .collect();
    let batch: Vec<&DistillSample> = samples.iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(5006);
    let step = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let head = UncertaintyHead::new((0..6).map(|_| rng.random_range(-0.3..0.3)).collect(), rng.random_range(-2.0..1.0));
        let (_, gw, gb) = batch_loss_and_grad(&head, &batch);
        for (k, a) in gw.into_iter().chain([gb]).enumerate() {
            let (mut hp, mut hm) = (head.clone(), head.clone());
            if k < 6 {
                hp.weights[k] += step;
                hm.weights[k] -= step;
            } else {
                hp.bias += step;
                hm.bias -= step;
            }
            let fd = (batch_loss_and_grad(&hp, &batch).0 - batch_loss_and_grad(&hm, &batch).0) / (2.0 * step);
            worst = worst.max((a - fd).abs() / fd.abs().max(1e-6));
        }
    }
    ensure(worst <= 1e-4, || format!("gradient relative error {worst:.2e}"))?;

    // (b) recovery of a known generating head
    let (events, refs) = synthetic_pack(120, 5007);
    let truth = UncertaintyHead::new(vec![0.05, 0.05, 0.05, -0.8, 0.1, 0.0], 0.3);
    let sample = |e: &FireEvent| {
        let f = e.features.clone().unwrap();
        let t = apply_head(&truth, &f).unwrap();
        DistillSample::new(f, t).unwrap()
    };
    let train: Vec<DistillSample> = events[..100].iter().map(sample).collect();
    let val: Vec<ValidationSample> = events[100..]
        .iter()
        .zip(&refs[100..])
        .map(|(e, r)| ValidationSample::new(sample(e), &e.gt, r, 4, 0.5).unwrap())
        .collect();
    let cfg = TrainConfig {
        max_epochs: 400,
        ..TrainConfig::default()
    };
    let out = train_head(&train, &val, &cfg).map_err(|e| e.to_string())?;
    let got = out.best_val_auroc.unwrap_or(f64::NAN);
    let want = mean_auroc(&truth, &val);
    ensure(out.best_val_rmsle < 1e-2 && (got - want).abs() <= 0.02, || {
        format!("recovery: val RMSLE {:.2e}, AUROC {got:.4} vs generating {want:.4}", out.best_val_rmsle)
    })?;
    let recovery = format!("recovered RMSLE {:.1e}, AUROC {got:.3} vs {want:.3}", out.best_val_rmsle);

    // (c) student distilled from the ensemble, scored on held-out fires
    let (events, refs) = synthetic_pack(100, 5008);
    let sample = |e: &FireEvent| {
        DistillSample::new(e.features.clone().unwrap(), fuse_ensemble(&e.members).unwrap().uncertainty).unwrap()
    };
    let split = |lo: usize, hi: usize| -> Vec<ValidationSample> {
        events[lo..hi]
            .iter()
            .zip(&refs[lo..hi])
            .map(|(e, r)| ValidationSample::new(sample(e), &e.gt, r, 4, 0.5).unwrap())
            .collect()
    };
    let train: Vec<DistillSample> = events[..60].iter().map(sample).collect();
    let out = train_head(&train, &split(60, 80), &TrainConfig::default()).map_err(|e| e.to_string())?;
    let heldout = mean_auroc(&out.head, &split(80, 100));
    ensure(heldout >= 0.6, || format!("held-out AUROC {heldout:.4} below 0.6"))?;
    Ok(format!("grad rel err {worst:.1e}; {recovery}; held-out AUROC {heldout:.3}"))
}

fn fcer(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_fcer"))
        .args(args)
        .env("SOURCE_DATE_EPOCH", "0")
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!("fcer {} failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr).trim())
    })
}

fn pipeline(root: &Path, jobs: &str) -> Result<(), String> {
    let p = |name: &str| root.join(name).to_string_lossy().into_owned();
    let (data, student, sweep, stats) = (p("data"), p("student"), p("sweep"), p("stats"));
    fcer(&["--jobs", jobs, "synth", "--out", &data, "--seed", "7", "--fires", "16", "--grid-size", "32"])?;
    fcer(&["--jobs", jobs, "distill", "--data", &data, "--out", &student, "--crop", "32", "--epochs", "20"])?;
    let head = format!("student:{data}:{}", root.join("student/head.json").display());
    let ens = format!("ensemble:{data}");
    fcer(&["--jobs", jobs, "sweep", "--model-a", &ens, "--model-b", &head, "--out", &sweep, "--crop", "32"])?;
    fcer(&["--jobs", jobs, "stats", "--sweep", &sweep, "--out", &stats])
}

fn collect(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            collect(root, &path, out);
        } else if path.file_name().is_some_and(|n| n != "manifest.json") {
            out.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
        }
    }
}

fn end_to_end_determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut runs = Vec::new();
    for (name, jobs) in [("a", "1"), ("b", "1"), ("c", "4")] {
        let root = tmp.path().join(name);
        pipeline(&root, jobs)?;
        let mut files = BTreeMap::new();
        collect(&root, &root, &mut files);
        runs.push(files);
    }
    let base = &runs[0];
    ensure(base.len() > 10, || format!("only {} output files", base.len()))?;
    for (k, run) in runs.iter().enumerate().skip(1) {
        ensure(run.keys().eq(base.keys()), || format!("run {k} produced a different file set"))?;
        for (path, bytes) in base {
            ensure(&run[path] == bytes, || format!("run {k}: {} differs", path.display()))?;
        }
    }
    Ok(format!("{} files byte-identical across 2 runs and --jobs 1/4", base.len()))
}

fn main() {
    let secs = |s: u64| Some(Duration::from_secs(s));
    let criteria: [Criterion; 9] = [
        ("table aggregation", table_aggregation, secs(1)),
        ("baseline percentages", baseline_percentages, secs(1)),
        ("oracle equivalence", oracle_equivalence, secs(60)),
        ("wilcoxon exactness", wilcoxon_exactness, None),
        ("anchor resolution", anchor_resolution, None),
        ("fcer structure", fcer_structure, None),
        ("teacher normalization", teacher_normalization, None),
        ("distillation correctness", distillation, secs(300)),
        ("end-to-end determinism", end_to_end_determinism, None),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let outcome = match (outcome, budget) {
            (Ok(_), Some(b)) if elapsed > *b => Err(format!("exceeded the {}s budget", b.as_secs())),
            (o, _) => o,
        };
        let secs = elapsed.as_secs_f64();
        match outcome {
            Ok(detail) => println!("[PASS] {}. {name} ({secs:.2}s): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {}. {name} ({secs:.2}s): {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
