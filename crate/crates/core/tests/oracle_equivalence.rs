use fcer_core::metrics::{
    average_precision_scores, average_surface_distance, roc_auc_scores, uq_auprc, uq_auroc,
};
use fcer_core::morphology::{dilate, squared_distance_transform};
use fcer_core::oracle;
use fcer_core::stats::{rank_biserial, wilcoxon_diffs, Alternative, TestMode};
use fcer_core::{BinaryMask, GeoConfig, UncertaintyMap};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TRIALS: usize = 200;

fn random_mask(rng: &mut ChaCha8Rng, max: usize) -> BinaryMask {
    let h = rng.random_range(1..=max);
    let w = rng.random_range(1..=max);
    let density = rng.random_range(0.05..0.6);
    BinaryMask::from_bools(h, w, (0..h * w).map(|_| rng.random_bool(density))).unwrap()
}

/// Scores quantized to a few levels so ties are common.
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

#[test]
fn ranking_metrics_match_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..TRIALS {
        let (s, l) = random_ranking(&mut rng, 32);
        let fast_ap = average_precision_scores(&s, &l).unwrap();
        assert!((fast_ap - oracle::average_precision(&s, &l).unwrap()).abs() <= 1e-12);
        assert_eq!(roc_auc_scores(&s, &l).unwrap(), oracle::auroc(&s, &l).unwrap());
    }
}

#[test]
fn uncertainty_metrics_match_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..TRIALS {
        let (s, l) = random_ranking(&mut rng, 16);
        let n = s.len();
        let unc = UncertaintyMap::from_vec(1, n, s.iter().map(|&v| v as f32).collect()).unwrap();
        let err = BinaryMask::from_bools(1, n, l.iter().copied()).unwrap();
        let widened: Vec<f64> = unc.values().iter().map(|&v| f64::from(v)).collect();
        assert_eq!(uq_auroc(&unc, &err, None).unwrap(), oracle::auroc(&widened, &l).unwrap());
        let (auprc, _) = uq_auprc(&unc, &err, None).unwrap();
        assert!((auprc - oracle::auprc(&widened, &l).unwrap()).abs() <= 1e-12);
    }
}

#[test]
fn asd_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let geo = GeoConfig::default();
    let mut checked = 0;
    while checked < TRIALS {
        let a = random_mask(&mut rng, 16);
        let b = BinaryMask::from_bools(a.height(), a.width(), (0..a.len()).map(|_| rng.random_bool(0.3))).unwrap();
        if a.is_empty_mask() || b.is_empty_mask() {
            continue;
        }
        let fast = average_surface_distance(&a, &b, &geo).unwrap();
        let slow = oracle::average_surface_distance(&a, &b, geo.meters_per_pixel).unwrap();
        assert!((fast - slow).abs() <= 1e-12 * slow.max(1.0), "{fast} vs {slow}");
        checked += 1;
    }
}

#[test]
fn edt_and_dilation_match_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut checked = 0;
    while checked < TRIALS {
        let m = random_mask(&mut rng, 16);
        if m.is_empty_mask() {
            continue;
        }
        assert_eq!(squared_distance_transform(&m).unwrap().values(), oracle::squared_edt(&m).unwrap().as_slice());
        let r = rng.random_range(0..=8) as f64;
        assert_eq!(dilate(&m, r).unwrap(), oracle::dilate(&m, r).unwrap());
        checked += 1;
    }
}

#[test]
fn boundary_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..TRIALS {
        let m = random_mask(&mut rng, 16);
        assert_eq!(fcer_core::morphology::extract_boundary(&m), oracle::boundary(&m));
    }
}

#[test]
fn wilcoxon_exact_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for trial in 0..TRIALS {
        let n = 1 + trial % 12;
        // integer-valued differences produce zeros and tied magnitudes
        let diffs: Vec<f64> = (0..n).map(|_| rng.random_range(-4i32..=4) as f64).collect();
        let slow = match oracle::wilcoxon(&diffs) {
            Ok(o) => o,
            Err(_) => continue,
        };
        let g = wilcoxon_diffs(&diffs, Alternative::Greater, Some(TestMode::Exact)).unwrap();
        let l = wilcoxon_diffs(&diffs, Alternative::Less, Some(TestMode::Exact)).unwrap();
        assert_eq!((g.w_plus, g.w_minus), (slow.w_plus, slow.w_minus));
        assert!((g.p_value - slow.p_greater).abs() <= 1e-12);
        assert!((l.p_value - slow.p_less).abs() <= 1e-12);
        if g.w_plus + g.w_minus > 0.0 {
            let r = rank_biserial(g.w_plus, g.w_minus).unwrap();
            assert_eq!(r, (slow.w_plus - slow.w_minus) / (slow.w_plus + slow.w_minus));
        }
    }
}
