mod common;

use panotrack_core::ssm_block::{
    check_invariants, dssm_forward, mitigate_distortion, multiscale_forward, random_map, recurrence, scan_direction, ssm_scan, Conv2d, DssmParams,
    FeatureMap, NeckParams, ScaleParams, ScanOrder, SsmCoeffs,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn max_diff(a: &FeatureMap, b: &FeatureMap) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn block_matches_straight_line_oracle() {
    for (seed, n_scans, n_kernels) in [(1, 4, 3), (2, 2, 2), (3, 1, 1), (4, 4, 4)] {
        let p = DssmParams::random(2, n_kernels, n_scans, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        let x = random_map((1, 2, 4, 4), &mut rng);
        let err = max_diff(&dssm_forward(&x, &p).unwrap(), &common::dssm_oracle(&x, &p));
        assert!(err <= 1e-10, "seed {seed}: {err:e}");
    }
    // batch of two with different per-sample routing, non-square map
    let p = DssmParams::random(3, 3, 4, 9).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x = random_map((2, 3, 5, 3), &mut rng);
    assert!(max_diff(&dssm_forward(&x, &p).unwrap(), &common::dssm_oracle(&x, &p)) <= 1e-10);
}

#[test]
fn convolution_wraps_horizontally_by_hand() {
    // in[x][y]: column 0 = (1, 2), column 1 = (3, 4); 3x3 kernel of ones.
    let x = FeatureMap::from_shape_vec((1, 1, 2, 2), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    let mut k = Conv2d::zeros(1, 1, 3);
    k.weight.iter_mut().for_each(|w| *w = 1.0);
    let y = k.apply(&x).unwrap();
    // both horizontal neighbours of a column are the other column
    // (wrap), and every vertical window covers both rows
    assert_eq!(y.as_slice().unwrap(), &[17.0, 17.0, 13.0, 13.0]);
}

#[test]
fn two_kernel_mixing_by_hand() {
    // d = β everywhere, s = 1/2, so the pooled modulation is β/2 and the
    // logits are ±β/2: α₁ = 1 / (1 + e^{-β}). With β = ln 3, α₁ = 3/4 and
    // the mixed 1x1 kernel is 3/4·1 + 1/4·3 = 3/2.
    let beta = 3f64.ln();
    let mut p = DssmParams::identity(1);
    let mut k1 = Conv2d::zeros(1, 1, 1);
    k1.weight[0] = 1.0;
    let mut k2 = Conv2d::zeros(1, 1, 1);
    k2.weight[0] = 3.0;
    p.dyn_kernels = vec![k1, k2];
    p.routing = vec![1.0, -1.0];
    let x = FeatureMap::from_shape_vec((1, 1, 2, 2), vec![1.0, -2.0, 0.5, 4.0]).unwrap();
    let d = FeatureMap::from_elem(x.dim(), beta);
    let s = FeatureMap::from_elem(x.dim(), 0.5);
    let out = mitigate_distortion(&d, &s, &x, &p).unwrap();
    let want = x.mapv(|v| 1.5 * v);
    assert!(max_diff(&out, &want) < 1e-15);
}

#[test]
fn recurrence_by_hand() {
    let y = recurrence(&[1.0, 1.0, 1.0], SsmCoeffs { a: 0.5, b: 1.0, c: 2.0 });
    assert_eq!(y, [2.0, 3.0, 3.5]);
    let y = recurrence(&[2.0, 0.0, 0.0, 0.0], SsmCoeffs { a: -0.5, b: 0.5, c: 1.0 });
    assert_eq!(y, [1.0, -0.5, 0.25, -0.125]);
}

#[test]
fn constant_map_reaches_the_single_direction_steady_state_inside() {
    let p = DssmParams::random(2, 2, 4, 21).unwrap();
    let x = FeatureMap::from_elem((1, 2, 40, 40), 1.5);
    let all = ssm_scan(&x, &p).unwrap();
    let one = scan_direction(&x, ScanOrder::Forward, &p.ssm).unwrap();
    for c in 0..2 {
        let k = p.ssm[c];
        let steady = 1.5 * k.b * k.c / (1.0 - k.a);
        for (xx, yy) in [(20, 20), (15, 25), (25, 12)] {
            assert!((all[[0, c, xx, yy]] - one[[0, c, xx, yy]]).abs() <= 1e-6);
            assert!((all[[0, c, xx, yy]] - steady).abs() <= 1e-6);
        }
    }
}

#[test]
fn scans_are_linear() {
    let p = DssmParams::random(2, 2, 4, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (a, b) = (random_map((2, 2, 6, 7), &mut rng), random_map((2, 2, 6, 7), &mut rng));
    let lhs = ssm_scan(&(&a * 2.5 - &b * 0.25), &p).unwrap();
    let rhs = ssm_scan(&a, &p).unwrap() * 2.5 - ssm_scan(&b, &p).unwrap() * 0.25;
    assert!(max_diff(&lhs, &rhs) <= 1e-10);
}

#[test]
fn neck_applies_the_block_where_placed() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let s3 = random_map((1, 2, 8, 8), &mut rng);
    let s4 = random_map((1, 3, 4, 4), &mut rng);
    let s5 = random_map((1, 4, 2, 2), &mut rng);
    let mut p = NeckParams::identity([2, 3, 4]);
    p.scales[1] = ScaleParams::random(3, 7).unwrap();
    let out = multiscale_forward(&s3, &s4, &s5, &p).unwrap();
    assert_eq!(out[0], s3);
    assert_eq!(out[2], s5);
    assert_eq!(out[1], dssm_forward(&s4, &p.scales[1].block).unwrap());
    p.placement = [false; 3];
    let out = multiscale_forward(&s3, &s4, &s5, &p).unwrap();
    assert_eq!(out[1], p.scales[1].plain.apply(&s4).unwrap());
}

#[test]
fn invariant_suite_holds_for_many_seeds() {
    for seed in 0..10 {
        for c in check_invariants(seed).unwrap() {
            assert!(c.passed, "seed {seed} {}: {}", c.name, c.detail);
        }
    }
}
