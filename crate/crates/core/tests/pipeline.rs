use fcer_core::dataset::load_dataset;
use fcer_core::distill::{fuse_ensemble, reference_maps};
use fcer_core::fcer::{run_paired_sweep, run_sweep, year_summaries, ModelOutput, SweepConfig};
use fcer_core::metrics::MetricName;
use fcer_core::oracle;
use fcer_core::synth::{generate_scenario, write_scenario, ScenarioSpec};
use fcer_core::{FireEvent, GeoConfig, UncertaintyMap};

fn spec() -> ScenarioSpec {
    ScenarioSpec {
        grid_size: 32,
        n_fires: 10,
        blob_radius_range_px: (2.0, 6.0),
        rng_seed: 17,
        ..ScenarioSpec::default()
    }
}

fn geo() -> GeoConfig {
    GeoConfig {
        crop_size: 32,
        ..GeoConfig::default()
    }
}

fn ensemble(events: &[FireEvent]) -> Vec<ModelOutput> {
    events
        .iter()
        .map(|e| {
            let t = fuse_ensemble(&e.members).unwrap();
            ModelOutput {
                prob: t.mean_prob,
                unc: t.uncertainty,
            }
        })
        .collect()
}

#[test]
fn written_pack_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let events = generate_scenario(&spec()).unwrap();
    write_scenario(dir.path(), &events).unwrap();
    let mut loaded = load_dataset(dir.path(), &geo()).unwrap();
    let mut expected = events.clone();
    expected.sort_by(|a, b| (a.year, &a.id).cmp(&(b.year, &b.id)));
    loaded.sort_by(|a, b| (a.year, &a.id).cmp(&(b.year, &b.id)));
    assert_eq!(loaded, expected);
}

#[test]
fn anchor_aggregates_match_oracle_recomputation() {
    let dir = tempfile::tempdir().unwrap();
    write_scenario(dir.path(), &generate_scenario(&spec()).unwrap()).unwrap();
    let events = load_dataset(dir.path(), &geo()).unwrap();
    let refs = reference_maps(&events).unwrap();
    let outputs = ensemble(&events);
    let result = run_sweep(&events, &outputs, &refs, &SweepConfig::default(), &geo()).unwrap();

    for year in year_summaries(&result) {
        let (mut auroc, mut auprc, mut brier) = (Vec::new(), Vec::new(), Vec::new());
        for ((e, out), reference) in events.iter().zip(&outputs).zip(&refs) {
            if e.year != year.year {
                continue;
            }
            let region = oracle::dilate(&e.gt, f64::from(year.anchor_px)).unwrap();
            let (mut s, mut l, mut sq) = (Vec::new(), Vec::new(), 0.0);
            for i in region.indices() {
                let err = (f64::from(reference.values()[i]) >= 0.5) != e.gt.is_set(i);
                s.push(f64::from(out.unc.values()[i]));
                l.push(err);
                let y = if e.gt.is_set(i) { 1.0 } else { 0.0 };
                sq += (f64::from(out.prob.values()[i]) - y).powi(2);
            }
            brier.push(sq / s.len() as f64);
            if let Ok(a) = oracle::auroc(&s, &l) {
                auroc.push(a);
                auprc.push(oracle::auprc(&s, &l).unwrap());
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let check = |m: MetricName, want: &[f64]| {
            let got = year.metrics[&m].mean.unwrap();
            assert!((got - mean(want)).abs() <= 1e-12, "{} {m:?}: {got} vs {}", year.year, mean(want));
            assert_eq!(year.metrics[&m].n, want.len());
        };
        check(MetricName::Auroc, &auroc);
        check(MetricName::Auprc, &auprc);
        check(MetricName::Brier, &brier);
    }
}

#[test]
fn paired_sweep_of_identical_models_is_identical() {
    let events = generate_scenario(&spec()).unwrap();
    let refs = reference_maps(&events).unwrap();
    let outputs = ensemble(&events);
    let (a, b) = run_paired_sweep(&events, &outputs, &outputs, &refs, &SweepConfig::default(), &geo()).unwrap();
    assert_eq!(a, b);
    let single = run_sweep(&events, &outputs, &refs, &SweepConfig::default(), &geo()).unwrap();
    assert_eq!(a, single);
}

#[test]
fn student_map_changes_only_uncertainty_metrics() {
    let events = generate_scenario(&spec()).unwrap();
    let refs = reference_maps(&events).unwrap();
    let ens = ensemble(&events);
    let flat: Vec<ModelOutput> = ens
        .iter()
        .map(|o| ModelOutput {
            prob: o.prob.clone(),
            unc: UncertaintyMap::from_vec(32, 32, vec![0.5; 32 * 32]).unwrap(),
        })
        .collect();
    let (a, b) = run_paired_sweep(&events, &ens, &flat, &refs, &SweepConfig::default(), &geo()).unwrap();
    for (ra, rb) in a.records.iter().zip(&b.records) {
        assert_eq!(ra.brier, rb.brier);
        assert_eq!(ra.ap, rb.ap);
        if let Some(x) = rb.auroc {
            assert_eq!(x, 0.5);
        }
    }
}
