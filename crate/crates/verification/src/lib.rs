//! Shared oracles for the acceptance suite: seeded constructions with known
//! properties and brute-force checks written independently of the library.

use mmlimit::approx::WeakApprox;
use mmlimit::gallery::random_space;
use mmlimit::mmspace::{IndexSet, PointMap, PointedSpace};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A map that is an `(R, ε)`-approximation by construction.
pub struct Constructed {
    pub x: PointedSpace,
    pub y: PointedSpace,
    pub f: PointMap,
    pub radius: f64,
    pub eps: f64,
}

fn close(d: &mut [Vec<f64>]) {
    let n = d.len();
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
}

/// `X` is a random space with a few twins at distance `≤ ε/2`, `Y` is the
/// path closure of the twin-free distances perturbed upward by `≤ ε/2` with a
/// few pendant points at distance `ε/2`, and `f` sends twins together. Every
/// distance moves by at most `ε` and every new point of `Y` is `ε/2` from an
/// image, so `f` is an `(R, ε)`-approximation for every `R`. Distances are
/// multiples of `1/8` throughout, so all sums are exact.
pub fn constructed_approximation(seed: u64, max_points: usize, min_ratio: f64) -> Constructed {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let core_n = rng.gen_range(2..=max_points.saturating_sub(6).max(2));
    let core = random_space(&mut rng, core_n).unwrap();
    let eps = [0.5, 1.0, 1.5, 2.0][rng.gen_range(0..4)];
    let half = eps / 2.0;

    // Twins of X: x' with d(x', z) = d(x, z) + t for a t ≤ ε/2.
    let twins: Vec<(usize, f64)> = (0..rng.gen_range(0..=3)).map(|_| (rng.gen_range(0..core_n), rng.gen_range(1..=4) as f64 * half / 4.0)).collect();
    let nx = core_n + twins.len();
    let dx = |i: usize, j: usize| -> f64 {
        let (a, ta) = if i < core_n { (i, 0.0) } else { twins[i - core_n] };
        let (b, tb) = if j < core_n { (j, 0.0) } else { twins[j - core_n] };
        if i == j {
            0.0
        } else {
            core.d(a, b) + ta + tb
        }
    };
    let wx: Vec<f64> = (0..nx).map(|i| if i < core_n { core.weights()[i] } else { rng.gen_range(1..=4) as f64 / 8.0 }).collect();
    let x = PointedSpace::from_fn(nx, wx, core.base(), dx).unwrap();

    let mut dy: Vec<Vec<f64>> = (0..core_n)
        .map(|i| (0..core_n).map(|j| if i == j { 0.0 } else { core.d(i, j) }).collect())
        .collect();
    for i in 0..core_n {
        for j in i + 1..core_n {
            let u = rng.gen_range(0..=4) as f64 * half / 4.0;
            dy[i][j] += u;
            dy[j][i] += u;
        }
    }
    close(&mut dy);
    let pendants: Vec<usize> = (0..rng.gen_range(0..=3)).map(|_| rng.gen_range(0..core_n)).collect();
    let ny = core_n + pendants.len();
    let anchor = |i: usize| if i < core_n { (i, 0.0) } else { (pendants[i - core_n], half) };
    let dyf = |i: usize, j: usize| -> f64 {
        if i == j {
            return 0.0;
        }
        let ((a, ta), (b, tb)) = (anchor(i), anchor(j));
        dy[a][b] + ta + tb
    };
    let wy: Vec<f64> = (0..ny).map(|_| rng.gen_range(1..=8) as f64 / 8.0).collect();
    let y = PointedSpace::from_fn(ny, wy, core.base(), dyf).unwrap();

    let f = PointMap::new((0..nx).map(|i| if i < core_n { i } else { twins[i - core_n].0 }).collect());
    let radius = min_ratio * eps + rng.gen_range(1..=40) as f64 / 2.0;
    Constructed { x, y, f, radius, eps }
}

/// Weakens a constructed approximation: up to two points of the ball are
/// dropped from the good set and remapped arbitrarily, as long as the source
/// and target residuals (recomputed by [`brute_residuals`]) stay within `ε`.
pub fn constructed_weak(seed: u64, max_points: usize) -> (PointedSpace, PointedSpace, WeakApprox) {
    let c = constructed_approximation(seed, max_points, 4.5);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let ball: IndexSet = (0..c.x.n()).filter(|&i| c.x.d(c.x.base(), i) < c.radius).collect();
    let mut w = WeakApprox { map: c.f.clone(), good: ball.clone(), radius: c.radius, eps: c.eps };
    for _ in 0..2 {
        let i = ball.iter().nth(rng.gen_range(0..ball.len())).unwrap();
        if i == c.x.base() || !w.good.contains(i) {
            continue;
        }
        let mut trial = w.clone();
        trial.good = trial.good.iter().filter(|&g| g != i).collect();
        trial.map.img[i] = rng.gen_range(0..c.y.n());
        let (s, t) = brute_residuals(&c.x, &c.y, &trial);
        if s <= c.eps && t <= c.eps {
            w = trial;
        }
    }
    (c.x, c.y, w)
}

/// Source and target residual masses of a weak approximation, by direct scan.
pub fn brute_residuals(x: &PointedSpace, y: &PointedSpace, w: &WeakApprox) -> (f64, f64) {
    let src: f64 = (0..x.n()).filter(|&i| x.d(x.base(), i) < w.radius && !w.good.contains(i)).map(|i| x.weights()[i]).sum();
    let tgt: f64 = (0..y.n())
        .filter(|&j| y.d(y.base(), j) < w.radius - w.eps)
        .filter(|&j| !w.good.iter().any(|i| y.d(w.map.apply(i), j) < w.eps))
        .map(|j| y.weights()[j])
        .sum();
    (src, tgt)
}

/// `sup |d_Y(f a, f b) − d_X(a, b)|` over all pairs.
pub fn brute_distortion(x: &PointedSpace, y: &PointedSpace, f: &PointMap) -> f64 {
    let mut worst = 0.0f64;
    for a in 0..x.n() {
        for b in 0..x.n() {
            worst = worst.max((y.d(f.apply(a), f.apply(b)) - x.d(a, b)).abs());
        }
    }
    worst
}

/// Every metric axiom over all triples, with exact comparisons.
pub fn brute_is_metric(s: &PointedSpace) -> bool {
    let n = s.n();
    for i in 0..n {
        if s.d(i, i) != 0.0 {
            return false;
        }
        for j in 0..n {
            let d = s.d(i, j);
            if !(d.is_finite() && d == s.d(j, i) && (i == j || d > 0.0)) {
                return false;
            }
            for k in 0..n {
                if d > s.d(i, k) + s.d(k, j) {
                    return false;
                }
            }
        }
    }
    true
}

/// Open-ball mass, computed by a direct scan.
pub fn brute_ball_mass(s: &PointedSpace, c: usize, r: f64) -> f64 {
    (0..s.n()).filter(|&x| s.d(c, x) < r).map(|x| s.weights()[x]).sum()
}
