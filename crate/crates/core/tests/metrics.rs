mod common;

use common::{frame_map, gt_record, id_switch_fixture, random_sequence};
use panotrack_core::geometry::Canvas;
use panotrack_core::metrics::N_ALPHAS;
use panotrack_core::metrics::{evaluate, evaluate_counts, pool, EvalOptions};
use panotrack_core::mot_io::{AnnotationRecord, FrameMap};
use panotrack_core::SequenceMeta;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn meta(n_frames: u32) -> SequenceMeta {
    SequenceMeta {
        name: "m".into(),
        image_width: 1000,
        image_height: 400,
        frame_rate: 10.0,
        n_frames,
        panoramic: true,
    }
}

fn opts() -> EvalOptions {
    EvalOptions::default()
}

#[test]
fn id_switch_fixture_values() {
    let (gt, pred) = id_switch_fixture();
    let r = evaluate(&gt, &pred, &meta(10), &opts()).unwrap();
    assert_eq!(r.mota, 0.9);
    assert_eq!(r.idf1, 0.6);
    assert_eq!((r.tp, r.fp, r.fn_, r.idsw), (10, 0, 0, 1));
    // every box matches exactly, so DetA = 1 at every α; the two predicted
    // ids cover 6 and 4 of the 10 frames: AssA = (6·0.6 + 4·0.4) / 10
    assert!((r.deta - 1.0).abs() < 1e-12);
    assert!((r.assa - 0.52).abs() < 1e-12);
    assert!((r.hota - 0.52f64.sqrt()).abs() < 1e-12);
}

#[test]
fn hota_counts_only_thresholds_below_the_overlap() {
    // predictions shifted 8 px on 40-px-wide boxes: IoU = 32/48 = 2/3
    let gt = frame_map((1..=5).map(|f| gt_record(f, 1, 100.0, 50.0)));
    let pred = frame_map((1..=5).map(|f| gt_record(f, 1, 108.0, 50.0)));
    let r = evaluate(&gt, &pred, &meta(5), &opts()).unwrap();
    let kept = (1..=N_ALPHAS).filter(|k| 0.05 * *k as f64 <= 2.0 / 3.0).count();
    assert_eq!(kept, 13);
    assert!((r.hota - kept as f64 / N_ALPHAS as f64).abs() < 1e-12);
    assert_eq!(r.mota, 1.0);
    // localisation is 1 by convention at levels without true positives
    let loca = (kept as f64 * 2.0 / 3.0 + (N_ALPHAS - kept) as f64) / N_ALPHAS as f64;
    assert!((r.loca - loca).abs() < 1e-12);
}

#[test]
fn self_evaluation_is_perfect() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..20 {
        let n = rng.random_range(5..40);
        let x = random_sequence(&mut rng, n, 1000.0, 400.0);
        let r = evaluate(&x, &x, &meta(n), &opts()).unwrap();
        assert!((r.hota - 1.0).abs() < 1e-12, "{r:?}");
        assert!((r.mota - 1.0).abs() < 1e-12);
        assert!((r.idf1 - 1.0).abs() < 1e-12);
        assert!(r.ospa.abs() < 1e-12);
        assert_eq!((r.fp, r.fn_, r.idsw), (0, 0, 0));
    }
}

fn id_overlap_oracle(gt: &FrameMap, pred: &FrameMap, canvas: &Canvas, thr: f64) -> (f64, u64, u64) {
    let ids = |m: &FrameMap| {
        let mut v: Vec<i64> = m.values().flatten().map(|r| r.track_id).collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let (gi, pi) = (ids(gt), ids(pred));
    let mut w = vec![0.0; gi.len() * pi.len()];
    for (f, gs) in gt {
        for g in gs {
            for p in pred.get(f).into_iter().flatten() {
                if canvas.iou(&g.rect(), &p.rect()) >= thr {
                    let (a, b) = (gi.binary_search(&g.track_id).unwrap(), pi.binary_search(&p.track_id).unwrap());
                    w[a * pi.len() + b] += 1.0;
                }
            }
        }
    }
    let ok = vec![true; w.len()];
    let n = |m: &FrameMap| m.values().map(|v| v.len() as u64).sum::<u64>();
    (common::brute_force_max_weight(gi.len(), pi.len(), &w, &ok), n(gt), n(pred))
}

#[test]
fn idf1_matches_brute_force_identity_matching() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let canvas = meta(1).canvas();
    for _ in 0..100 {
        let n = rng.random_range(3..12);
        let gt = random_sequence(&mut rng, n, 1000.0, 400.0);
        // keep the enumeration small
        if gt.values().flatten().any(|r| r.track_id > 4) {
            continue;
        }
        // predictions: gt with shuffled ids, dropped boxes and spurious ones
        let relabel: i64 = rng.random_range(0..3);
        let mut recs: Vec<AnnotationRecord> = Vec::new();
        for r in gt.values().flatten() {
            if rng.random_bool(0.8) {
                let id = if r.frame as i64 % 3 == relabel { r.track_id + 10 } else { r.track_id };
                recs.push(AnnotationRecord {
                    track_id: id,
                    left: r.left + rng.random_range(-6.0..6.0),
                    ..*r
                });
            }
        }
        for f in 1..=n {
            if rng.random_bool(0.2) {
                recs.push(gt_record(f, 99, rng.random_range(0.0..1000.0), 300.0));
            }
        }
        let pred = frame_map(recs);
        let r = evaluate_counts(&gt, &pred, &meta(n), &opts()).unwrap();
        let (idtp, g, p) = id_overlap_oracle(&gt, &pred, &canvas, 0.5);
        let want = if g + p == 0 { 1.0 } else { 2.0 * idtp / (g + p) as f64 };
        assert!((r.identity.idf1() - want).abs() < 1e-12, "{} vs {want}", r.identity.idf1());
    }
}

#[test]
fn pooling_is_not_the_mean() {
    let perfect = frame_map((1..=10).map(|f| gt_record(f, 1, 100.0, 50.0)));
    let missed = frame_map([gt_record(1, 1, 100.0, 50.0)]);
    let a = evaluate_counts(&perfect, &perfect, &meta(10), &opts()).unwrap();
    let b = evaluate_counts(&missed, &FrameMap::new(), &meta(1), &opts()).unwrap();
    assert_eq!(a.result().mota, 1.0);
    assert_eq!(b.result().mota, 0.0);
    let pooled = pool([&a, &b], &opts()).result();
    assert!((pooled.mota - 10.0 / 11.0).abs() < 1e-12);
    assert!((pooled.mota - 0.5).abs() > 0.1);
    assert_eq!((pooled.tp, pooled.fn_), (10, 1));
}

#[test]
fn false_positives_never_help() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    for _ in 0..20 {
        let n = rng.random_range(5..20);
        let gt = random_sequence(&mut rng, n, 1000.0, 300.0);
        let mut pred = gt.clone();
        let mut last = evaluate(&gt, &pred, &meta(n), &opts()).unwrap();
        for k in 0..5 {
            let f = rng.random_range(1..=n);
            // far below every gt box (gt tops are < 300 and heights ≤ 100)
            pred.entry(f).or_default().push(gt_record(f, 500 + k, rng.random_range(0.0..1000.0), 400.0 + 10.0 * k as f64));
            let r = evaluate(&gt, &pred, &meta(n), &opts()).unwrap();
            assert_eq!(r.fp, last.fp + 1);
            assert!(r.mota <= last.mota && r.hota <= last.hota && r.idf1 <= last.idf1 && r.deta <= last.deta);
            last = r;
        }
    }
}

#[test]
fn thresholds_are_coherent() {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    for _ in 0..10 {
        let n = rng.random_range(5..20);
        let gt = random_sequence(&mut rng, n, 1000.0, 400.0);
        let pred = frame_map(gt.values().flatten().map(|r| AnnotationRecord {
            left: r.left + rng.random_range(-15.0..15.0),
            ..*r
        }));
        let c = evaluate_counts(&gt, &pred, &meta(n), &opts()).unwrap();
        for a in 1..N_ALPHAS {
            assert!(c.hota.tp[a] <= c.hota.tp[a - 1]);
            assert!(c.hota.deta_at(a) <= c.hota.deta_at(a - 1) + 1e-15);
        }
        let mut last_tp = u64::MAX;
        for thr in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let r = evaluate(&gt, &pred, &meta(n), &EvalOptions { iou_threshold: thr, ..opts() }).unwrap();
            assert!(r.tp <= last_tp);
            assert_eq!(r.tp + r.fn_, c.clear.tp + c.clear.fn_);
            last_tp = r.tp;
        }
    }
}

#[test]
fn seam_split_box_needs_the_panoramic_flag() {
    let gt = frame_map([gt_record(1, 1, 980.0, 50.0)]);
    let pred = frame_map([gt_record(1, 1, -16.0, 50.0)]);
    let pano = evaluate(&gt, &pred, &meta(1), &opts()).unwrap();
    assert_eq!(pano.tp, 1);
    let flat = evaluate(&gt, &pred, &meta(1), &EvalOptions { panoramic: Some(false), ..opts() }).unwrap();
    assert_eq!(flat.tp, 0);
}

#[test]
fn bad_inputs_are_rejected() {
    let gt = frame_map([gt_record(5, 1, 100.0, 50.0)]);
    assert!(evaluate(&gt, &FrameMap::new(), &meta(3), &opts()).is_err());
    let dup = frame_map([gt_record(1, 1, 100.0, 50.0), gt_record(1, 1, 300.0, 50.0)]);
    assert!(evaluate(&dup, &FrameMap::new(), &meta(3), &opts()).is_err());
    assert!(evaluate(&FrameMap::new(), &FrameMap::new(), &meta(3), &EvalOptions { iou_threshold: 0.0, ..opts() }).is_err());
}
