use mmlimit::category::*;
use mmlimit::gallery::{gen_inverse_example, gen_merging_chain, random_direct_system};
use mmlimit::mmspace::{ball, BallKind, PointMap, PointedSpace};
use mmlimit::Evidence;

fn open_mass(s: &PointedSpace, c: usize, r: f64) -> f64 {
    ball(s, c, r, BallKind::Open).unwrap().iter().map(|x| s.weights()[x]).sum()
}

#[test]
fn direct_columns_are_monotone_on_random_systems() {
    for seed in 0..30 {
        let sys = random_direct_system(seed, 5).unwrap();
        assert!(verify_system(&sys).unwrap().is_pass());
        for r in [0.5, 1.0, 4.0, 16.0, 64.0] {
            let col: Vec<f64> = sys.spaces.iter().map(|s| open_mass(s, s.base(), r)).collect();
            assert!(col.windows(2).all(|w| w[0] <= w[1]), "seed {seed} radius {r}: {col:?}");
        }
    }
}

#[test]
fn maps_into_limit_are_morphisms() {
    for seed in 0..20 {
        let sys = random_direct_system(seed, 4).unwrap();
        let lim = direct_limit_stage(&sys, sys.len(), 0.0, &[1.0]).unwrap();
        for (i, f) in lim.maps_into_limit.iter().enumerate() {
            let v = verify_morphism(f, &sys.spaces[i], &lim.space).unwrap();
            assert!(v.is_pass(), "seed {seed} stage {i}: {v:?}");
        }
        assert!(direct_limit_stability(&sys, sys.len() - 1, 0.0).unwrap(), "seed {seed}");
    }
}

#[test]
fn merging_chain_limit_is_coarsest_grid() {
    let sys = gen_merging_chain().unwrap();
    let lim = direct_limit_stage(&sys, 6, 0.0, &[0.01, 0.02, 0.05]).unwrap();
    assert_eq!(lim.space, sys.spaces[5]);
    assert_eq!(lim.report.existence, Evidence::PassEvidence);
    assert!(lim.report.columns_monotone);
    // Balls smaller than the spacing hold only the basepoint, whose mass doubles.
    assert_eq!(lim.report.columns[0], vec![1.0 / 64.0, 2.0 / 64.0, 4.0 / 64.0, 8.0 / 64.0, 16.0 / 64.0, 32.0 / 64.0]);
    for n in 1..6 {
        assert!(direct_limit_stability(&sys, n, 0.0).unwrap());
    }
}

#[test]
fn composition_of_morphisms_is_a_morphism() {
    let sys = random_direct_system(3, 5).unwrap();
    for i in 0..sys.len() {
        for j in i..sys.len() {
            let f = sys.composite(i, j).unwrap();
            assert!(check_morphism(&f, &sys.spaces[i], &sys.spaces[j]).unwrap().verdict().is_pass());
        }
    }
}

#[test]
fn inverse_threads_are_monotone() {
    let sys = gen_inverse_example(4, 5).unwrap();
    let th = threads(&sys, 4).unwrap();
    assert_eq!(th.threads.len(), sys.spaces[3].n());
    assert!(th.uncovered.iter().all(|&u| u == 0));
    // Spot-check thread pairs: distances non-decreasing, ball masses non-increasing.
    for (a, ta) in th.threads.iter().enumerate().step_by(7) {
        for tb in th.threads.iter().skip(a).step_by(11) {
            let d: Vec<f64> = (0..4).map(|i| sys.spaces[i].d(ta[i], tb[i])).collect();
            assert!(d.windows(2).all(|w| w[0] <= w[1]), "{d:?}");
        }
        for r in [0.5, 0.25] {
            let m: Vec<f64> = (0..4).map(|i| open_mass(&sys.spaces[i], ta[i], r)).collect();
            assert!(m.windows(2).all(|w| w[0] >= w[1]), "{m:?}");
        }
    }
}

#[test]
fn inverse_limit_thread_distances_are_the_sup() {
    let sys = gen_inverse_example(3, 4).unwrap();
    let lim = inverse_limit_stage(&sys, 3, 1e-9, &[0.5], true).unwrap();
    let space = lim.space.unwrap();
    for a in 0..space.n() {
        for b in 0..space.n() {
            let sup = (0..3).map(|i| sys.spaces[i].d(lim.projections[i].apply(a), lim.projections[i].apply(b))).fold(0.0, f64::max);
            assert_eq!(space.d(a, b), sup);
        }
    }
    let cols = lim.report.thread_columns.unwrap();
    assert!(cols.iter().all(|t| t[0].windows(2).all(|w| w[0] >= w[1])));
}

#[test]
fn missing_coverage_drops_threads() {
    let s = PointedSpace::from_fn(3, vec![0.5, 0.5, 0.0], 0, |i, j| (i as f64 - j as f64).abs()).unwrap();
    let t = PointedSpace::from_fn(3, vec![0.5, 0.25, 0.25], 0, |i, j| (i as f64 - j as f64).abs()).unwrap();
    // Atom 2 of the finer stage projects onto a zero-mass point.
    let sys = SystemOfSpaces::new(SystemKind::Inverse, vec![s, t], vec![PointMap::new(vec![0, 1, 2])]).unwrap();
    let th = threads(&sys, 2).unwrap();
    assert_eq!(th.threads, vec![vec![0, 0], vec![1, 1]]);
}

#[test]
fn shape_mismatch_is_an_error() {
    let s = PointedSpace::from_fn(2, vec![0.5; 2], 0, |i, j| (i as f64 - j as f64).abs()).unwrap();
    assert!(SystemOfSpaces::new(SystemKind::Direct, vec![s.clone(), s], vec![PointMap::new(vec![0])]).is_err());
}
