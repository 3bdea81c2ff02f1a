//! Strict and weak `(R, ε)`-approximations between pointed spaces: verifiers,
//! the explicit quasi-inverse and rough-inverse constructions, a seeded search
//! for weak approximations, and the glued common space.
//!
//! Approximations are stored as total maps. Points outside the `R`-ball are
//! sent to a far sentinel as described on each constructor.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MmError, Result};
use crate::mmspace::{ball_unchecked, support, BallKind, IndexSet, PointMap, PointedSpace};
use crate::verdict::Verdict;

/// A map together with the good set `X̃` on which it is required to be almost
/// isometric, and the parameters `(R, ε)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakApprox {
    #[serde(flatten)]
    pub map: PointMap,
    pub good: IndexSet,
    #[serde(rename = "R")]
    pub radius: f64,
    pub eps: f64,
}

impl WeakApprox {
    /// Checks `0 < ε < R`, `good ⊆ B(p_X, R)` and `p_X ∈ good`.
    pub fn check_invariants(&self, src: &PointedSpace, dst: &PointedSpace) -> Result<()> {
        self.map.check_shape(src, dst)?;
        check_params(self.radius, self.eps)?;
        if let Some(&bad) = self.good.as_slice().iter().find(|&&i| i >= src.n()) {
            return Err(MmError::IndexOutOfRange { index: bad, n: src.n() });
        }
        if !self.good.contains(src.base()) {
            return Err(MmError::Parameter("good set must contain the basepoint".into()));
        }
        let b = ball_unchecked(src, src.base(), self.radius, BallKind::Open);
        if !self.good.is_subset(&b) {
            return Err(MmError::Parameter("good set must lie in the open R-ball around the basepoint".into()));
        }
        Ok(())
    }
}

fn check_params(radius: f64, eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < radius && radius.is_finite()) {
        return Err(MmError::Parameter(format!("need 0 < eps < R, got R={radius}, eps={eps}")));
    }
    Ok(())
}

/// Largest `|d_X(x,y) − d_Y(f x, f y)|` over pairs of `subset`.
pub fn distortion(src: &PointedSpace, dst: &PointedSpace, f: &PointMap, subset: &IndexSet) -> f64 {
    let idx = subset.as_slice();
    let mut worst = 0.0f64;
    for (a, &x) in idx.iter().enumerate() {
        let fx = f.apply(x);
        for &y in &idx[a + 1..] {
            let gap = (src.d(x, y) - dst.d(fx, f.apply(y))).abs();
            if gap > worst {
                worst = gap;
            }
        }
    }
    worst
}

/// Points of `ball` that are not within distance `< eps` of `image`.
fn uncovered(dst: &PointedSpace, ball: &IndexSet, image: &IndexSet, eps: f64) -> IndexSet {
    ball.iter().filter(|&y| !image.iter().any(|j| dst.d(y, j) < eps)).collect()
}

/// Checks the three conditions of a strict `(R, ε)`-approximation: basepoint
/// preservation, distortion at most `ε` on `B(p_X, R)`, and
/// `B(p_Y, R − ε) ⊂ f(B(p_X, R))^ε`.
pub fn verify_approximation(src: &PointedSpace, dst: &PointedSpace, f: &PointMap, radius: f64, eps: f64) -> Result<Verdict> {
    f.check_shape(src, dst)?;
    check_params(radius, eps)?;
    if f.apply(src.base()) != dst.base() {
        return Ok(Verdict::fail("basepoint not preserved"));
    }
    let dom = ball_unchecked(src, src.base(), radius, BallKind::Open);
    let dist = distortion(src, dst, f, &dom);
    if dist > eps {
        return Ok(Verdict::fail(format!("distortion {dist:.6} > {eps:.6}")));
    }
    let target = ball_unchecked(dst, dst.base(), radius - eps, BallKind::Open);
    let missing = uncovered(dst, &target, &f.image_of(&dom), eps);
    if let Some(y) = missing.iter().next() {
        return Ok(Verdict::fail(format!("target point {y} is not within {eps:.6} of the image")));
    }
    Ok(Verdict::Pass)
}

fn resolve_order(order: Option<&[usize]>, n: usize) -> Result<Vec<usize>> {
    match order {
        None => Ok((0..n).collect()),
        Some(o) => {
            let mut seen = vec![false; n];
            if o.len() != n {
                return Err(MmError::Parameter(format!("order has {} entries, expected {n}", o.len())));
            }
            for &i in o {
                if i >= n || seen[i] {
                    return Err(MmError::Parameter("order is not a permutation".into()));
                }
                seen[i] = true;
            }
            Ok(o.to_vec())
        }
    }
}

/// Builds the quasi-inverse `φ: Y → X` of a verified `(R, ε)`-approximation
/// with `4ε < R`.
///
/// Each `y ∈ B(p_Y, R − ε) \ {p_Y}` goes to the first source point of
/// `B(p_X, R)` (scanning `order`, default index order) whose image lies within
/// `ε` of `y`. Every other target point goes to the first point outside
/// `B(p_X, R − ε)`, or to `p_X` if there is none. The result is checked to be a
/// `(R − ε, 3ε)`-approximation with both `3ε` displacement bounds before it is
/// returned.
pub fn quasi_inverse(
    src: &PointedSpace,
    dst: &PointedSpace,
    f: &PointMap,
    radius: f64,
    eps: f64,
    order: Option<&[usize]>,
) -> Result<PointMap> {
    let v = verify_approximation(src, dst, f, radius, eps)?;
    if let Some(reason) = v.reason() {
        return Err(MmError::Precondition(format!("not a verified approximation: {reason}")));
    }
    if !(4.0 * eps < radius) {
        return Err(MmError::Precondition(format!("need 4·eps < R, got R={radius}, eps={eps}")));
    }
    let order = resolve_order(order, src.n())?;
    let dom = ball_unchecked(src, src.base(), radius, BallKind::Open);
    let scan: Vec<usize> = order.iter().copied().filter(|&x| dom.contains(x)).collect();
    let inner = ball_unchecked(src, src.base(), radius - eps, BallKind::Open);
    let far = order.iter().copied().find(|&x| !inner.contains(x)).unwrap_or(src.base());
    let target = ball_unchecked(dst, dst.base(), radius - eps, BallKind::Open);

    let mut img = vec![far; dst.n()];
    img[dst.base()] = src.base();
    for y in target.iter().filter(|&y| y != dst.base()) {
        let x = scan
            .iter()
            .copied()
            .find(|&x| dst.d(f.apply(x), y) < eps)
            .ok_or_else(|| MmError::Internal(format!("no source point within eps of target {y}")))?;
        img[y] = x;
    }
    let phi = PointMap::new(img);

    let back = verify_approximation(dst, src, &phi, radius - eps, 3.0 * eps)?;
    if let Some(reason) = back.reason() {
        return Err(MmError::Internal(format!("quasi-inverse failed verification: {reason}")));
    }
    check_displacements(src, dst, f, &phi, &IndexSet::full(src.n()), &target, radius, eps)?;
    Ok(phi)
}

/// Asserts `d(x, φψx) < 3ε` on `B(p_X, R − 4ε) ∩ src_set` and
/// `d(y, ψφy) < 3ε` on `B(p_Y, R − ε) ∩ dst_set`.
#[allow(clippy::too_many_arguments)]
fn check_displacements(
    src: &PointedSpace,
    dst: &PointedSpace,
    psi: &PointMap,
    phi: &PointMap,
    src_set: &IndexSet,
    dst_set: &IndexSet,
    radius: f64,
    eps: f64,
) -> Result<()> {
    let three = 3.0 * eps;
    let near = ball_unchecked(src, src.base(), radius - 4.0 * eps, BallKind::Open);
    for x in near.iter().filter(|&x| src_set.contains(x)) {
        let back = phi.apply(psi.apply(x));
        if !(src.d(x, back) < three) {
            return Err(MmError::Internal(format!("source displacement bound fails at {x}")));
        }
    }
    let target = ball_unchecked(dst, dst.base(), radius - eps, BallKind::Open);
    for y in target.iter().filter(|&y| dst_set.contains(y)) {
        let back = psi.apply(phi.apply(y));
        if !(dst.d(y, back) < three) {
            return Err(MmError::Internal(format!("target displacement bound fails at {y}")));
        }
    }
    Ok(())
}

/// Checks both ball inclusions for a verified approximation `ψ` and its
/// quasi-inverse `φ`, for every `y ∈ B(p_Y, r′)`:
/// `B(y, r − 3ε) ⊂ ψ(B(φ(y), r))^{3ε}` and
/// `ψ^{-1}(B(y, r − 3ε)) ⊂ B(φ(y), r + 4ε)`.
///
/// `ψ` is an approximation on `B(p_X, R)`, so the preimage in the second
/// inclusion is taken inside that ball.
#[allow(clippy::too_many_arguments)]
pub fn verify_ball_inclusions(
    src: &PointedSpace,
    dst: &PointedSpace,
    psi: &PointMap,
    phi: &PointMap,
    radius: f64,
    r: f64,
    r_prime: f64,
    eps: f64,
) -> Result<Verdict> {
    psi.check_shape(src, dst)?;
    phi.check_shape(dst, src)?;
    if !(r + r_prime < radius - 3.0 * eps && r > 3.0 * eps && r_prime > 0.0 && eps > 0.0) {
        return Err(MmError::Parameter(format!(
            "need r + r' < R − 3ε and r > 3ε, got R={radius}, r={r}, r'={r_prime}, eps={eps}"
        )));
    }
    let three = 3.0 * eps;
    let dom = ball_unchecked(src, src.base(), radius, BallKind::Open);
    for y in ball_unchecked(dst, dst.base(), r_prime, BallKind::Open).iter() {
        let center = phi.apply(y);
        let small = ball_unchecked(dst, y, r - three, BallKind::Open);
        let source_ball = ball_unchecked(src, center, r, BallKind::Open);
        let image = psi.image_of(&source_ball);
        if let Some(z) = uncovered(dst, &small, &image, three).iter().next() {
            return Ok(Verdict::fail(format!("first inclusion fails at y={y}, witness z={z}")));
        }
        let bound = r + 4.0 * eps;
        for x in dom.iter() {
            if small.contains(psi.apply(x)) && !(src.d(x, center) < bound) {
                return Ok(Verdict::fail(format!("second inclusion fails at y={y}, witness x={x}")));
            }
        }
    }
    Ok(Verdict::Pass)
}

/// Residual masses of a weak approximation: source mass of `B(p_X,R) \ X̃`
/// and target mass of `B(p_Y, R − ε) \ ψ(X̃)^ε`.
pub fn weak_residuals(src: &PointedSpace, dst: &PointedSpace, w: &WeakApprox) -> (f64, f64) {
    let dom = ball_unchecked(src, src.base(), w.radius, BallKind::Open);
    let src_res: f64 = dom.difference(&w.good).iter().map(|i| src.weights()[i]).sum();
    let target = ball_unchecked(dst, dst.base(), w.radius - w.eps, BallKind::Open);
    let image = w.map.image_of(&w.good);
    let tgt_res: f64 = uncovered(dst, &target, &image, w.eps).iter().map(|j| dst.weights()[j]).sum();
    (src_res, tgt_res)
}

/// Checks the conditions of a weak `(R, ε)`-approximation: basepoint
/// preservation, distortion at most `ε` on the good set, and both residual
/// masses at most `ε`.
pub fn verify_weak_approximation(src: &PointedSpace, dst: &PointedSpace, w: &WeakApprox) -> Result<Verdict> {
    w.check_invariants(src, dst)?;
    if w.map.apply(src.base()) != dst.base() {
        return Ok(Verdict::fail("basepoint not preserved"));
    }
    let dist = distortion(src, dst, &w.map, &w.good);
    if dist > w.eps {
        return Ok(Verdict::fail(format!("distortion {dist:.6} > {:.6}", w.eps)));
    }
    let (src_res, tgt_res) = weak_residuals(src, dst, w);
    if src_res > w.eps {
        return Ok(Verdict::fail(format!("source residual mass {src_res:.6} > {:.6}", w.eps)));
    }
    if tgt_res > w.eps {
        return Ok(Verdict::fail(format!("target residual mass {tgt_res:.6} > {:.6}", w.eps)));
    }
    Ok(Verdict::Pass)
}

/// Builds the rough inverse of a verified weak `(R, ε)`-approximation with
/// `4ε < R`: a weak `(R − ε, 3ε)`-approximation `Y → X` whose good set is
/// `Ỹ = ψ(X̃)^ε ∩ B(p_Y, R − ε)`.
///
/// Points of `Ỹ \ {p_Y}` go to the first good source point (in `order`)
/// whose image is within `ε`; points outside `Ỹ` go to the first point
/// outside `B(p_X, R)`, or to `p_X` if there is none.
pub fn rough_inverse_weak(src: &PointedSpace, dst: &PointedSpace, w: &WeakApprox, order: Option<&[usize]>) -> Result<WeakApprox> {
    let v = verify_weak_approximation(src, dst, w)?;
    if let Some(reason) = v.reason() {
        return Err(MmError::Precondition(format!("not a verified weak approximation: {reason}")));
    }
    if !(4.0 * w.eps < w.radius) {
        return Err(MmError::Precondition(format!("need 4·eps < R, got R={}, eps={}", w.radius, w.eps)));
    }
    let (radius, eps) = (w.radius, w.eps);
    let order = resolve_order(order, src.n())?;
    let scan: Vec<usize> = order.iter().copied().filter(|&x| w.good.contains(x)).collect();
    let dom = ball_unchecked(src, src.base(), radius, BallKind::Open);
    let far = order.iter().copied().find(|&x| !dom.contains(x)).unwrap_or(src.base());

    let image = w.map.image_of(&w.good);
    let target = ball_unchecked(dst, dst.base(), radius - eps, BallKind::Open);
    let good_y: IndexSet = target.iter().filter(|&y| image.iter().any(|j| dst.d(y, j) < eps)).collect();

    let mut img = vec![far; dst.n()];
    img[dst.base()] = src.base();
    for y in good_y.iter().filter(|&y| y != dst.base()) {
        let x = scan
            .iter()
            .copied()
            .find(|&x| dst.d(w.map.apply(x), y) < eps)
            .ok_or_else(|| MmError::Internal(format!("no good source point within eps of {y}")))?;
        img[y] = x;
    }
    let inverse = WeakApprox { map: PointMap::new(img), good: good_y, radius: radius - eps, eps: 3.0 * eps };
    let back = verify_weak_approximation(dst, src, &inverse)?;
    if let Some(reason) = back.reason() {
        return Err(MmError::Internal(format!("rough inverse failed verification: {reason}")));
    }
    check_displacements(src, dst, &w.map, &inverse.map, &w.good, &inverse.good, radius, eps)?;
    Ok(inverse)
}

/// Descending geometric grid of candidate `ε` values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsGrid {
    /// First grid value; `None` means half the larger diameter of the two spaces.
    pub start: Option<f64>,
    pub floor: f64,
    pub ratio: f64,
}

impl Default for EpsGrid {
    fn default() -> Self {
        EpsGrid { start: None, floor: 1e-6, ratio: 0.9 }
    }
}

impl EpsGrid {
    pub fn values(&self, diameter: f64) -> Result<Vec<f64>> {
        if !(self.ratio > 0.0 && self.ratio < 1.0 && self.floor > 0.0) {
            return Err(MmError::Parameter(format!(
                "grid needs 0 < ratio < 1 and floor > 0, got ratio={}, floor={}",
                self.ratio, self.floor
            )));
        }
        let start = self.start.unwrap_or(diameter / 2.0).max(self.floor);
        let mut out = Vec::new();
        let mut e = start;
        while e >= self.floor {
            out.push(e);
            e *= self.ratio;
        }
        if out.last().is_some_and(|&last| last > self.floor) {
            out.push(self.floor);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub budget: usize,
    pub seed: u64,
    pub grid: EpsGrid,
    /// Record one event per accepted local-search move.
    pub trace: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { budget: 10_000, seed: 0, grid: EpsGrid::default(), trace: false }
    }
}

/// One accepted local-search move.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub eps: f64,
    pub iteration: usize,
    pub net_index: usize,
    pub source_point: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub witness: WeakApprox,
    /// Smallest grid value with a verified witness, `+∞` when none verified.
    pub achieved_eps: f64,
    pub verified: bool,
    /// Infeasibility score of the witness (≤ 0 iff it verifies).
    pub score: f64,
    pub trace: Vec<TraceEvent>,
}

/// Net spacings tried for each target `ε`, as fractions of `ε`.
const NET_FRACTIONS: [f64; 4] = [0.5, 1.0 / 3.0, 0.25, 1.0 / 6.0];

/// Consecutive failing grid values tolerated before the scan stops.
const FAIL_STREAK: usize = 3;

/// Farthest-point net of `candidates` started at `start`, ties to the lowest
/// index; stops once every candidate is within `spacing` of the net.
pub fn farthest_point_net(s: &PointedSpace, candidates: &IndexSet, start: usize, spacing: f64) -> Vec<usize> {
    let mut net = vec![start];
    let mut gap: Vec<(usize, f64)> = candidates.iter().map(|c| (c, s.d(c, start))).collect();
    loop {
        let mut best: Option<(usize, f64)> = None;
        for &(c, g) in &gap {
            if g > spacing && best.is_none_or(|(_, bg)| g > bg) {
                best = Some((c, g));
            }
        }
        let Some((next, _)) = best else { break };
        net.push(next);
        for entry in gap.iter_mut() {
            entry.1 = entry.1.min(s.d(entry.0, next));
        }
    }
    net
}

struct Construction<'a> {
    src: &'a PointedSpace,
    dst: &'a PointedSpace,
    radius: f64,
    eps: f64,
    ball_radius: f64,
    net: Vec<usize>,
    candidates: Vec<usize>,
    far: usize,
}

impl Construction<'_> {
    /// ψ and the good set induced by the representatives `reps[k]` of `net[k]`.
    fn build(&self, reps: &[usize]) -> WeakApprox {
        let (src, dst) = (self.src, self.dst);
        let dom = ball_unchecked(src, src.base(), self.radius, BallKind::Open);
        let mut img = vec![self.far; src.n()];
        let mut good = Vec::new();
        for x in 0..src.n() {
            if let Some(k) = reps.iter().position(|&r| src.d(r, x) < self.ball_radius) {
                img[x] = self.net[k];
                if dom.contains(x) {
                    good.push(x);
                }
            }
        }
        img[src.base()] = dst.base();
        let mut good = IndexSet::from_unsorted(good);
        if !good.contains(src.base()) {
            good = good.union(&IndexSet::singleton(src.base()));
        }
        WeakApprox { map: PointMap::new(img), good, radius: self.radius, eps: self.eps }
    }

    fn score(&self, w: &WeakApprox) -> f64 {
        let dist = distortion(self.src, self.dst, &w.map, &w.good);
        let (a, b) = weak_residuals(self.src, self.dst, w);
        (dist - self.eps).max(a - self.eps).max(b - self.eps)
    }

    /// Assigns representatives net point by net point, choosing the source
    /// point whose distance profile to the already-assigned representatives
    /// best matches the target profile.
    fn greedy(&self) -> Vec<usize> {
        let mut reps = vec![self.src.base()];
        for k in 1..self.net.len() {
            let t = self.net[k];
            let mut best: Option<(usize, f64)> = None;
            let fresh: Vec<usize> = self.candidates.iter().copied().filter(|c| !reps.contains(c)).collect();
            let pool = if fresh.is_empty() { &self.candidates } else { &fresh };
            for &x in pool {
                let cost = reps
                    .iter()
                    .zip(&self.net)
                    .map(|(&rx, &rt)| (self.src.d(x, rx) - self.dst.d(t, rt)).abs())
                    .fold(0.0, f64::max);
                if best.is_none_or(|(_, bc)| cost < bc) {
                    best = Some((x, cost));
                }
            }
            reps.push(best.map(|b| b.0).unwrap_or(self.src.base()));
        }
        reps
    }
}

/// Searches for a weak approximation `X → Y` at radius `R` over a descending
/// grid of `ε` values and returns the smallest grid value whose construction
/// verifies.
///
/// For each `ε`, a farthest-point net of `B(p_Y, R) ∩ spt(𝔪_Y)` is built at a
/// few spacings `s < ε`; net points get source representatives (greedy
/// profile matching, then seeded swap search), each source point is sent to
/// the net point of the first `2s`-ball around a representative that contains
/// it, and the good set is the union of those balls inside `B(p_X, R)`.
/// Deterministic for a fixed configuration.
pub fn search_weak_approximation(
    src: &PointedSpace,
    dst: &PointedSpace,
    radius: f64,
    cfg: &SearchConfig,
) -> Result<SearchOutcome> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(MmError::NonPositiveRadius(radius));
    }
    let diam = src.diameter().max(dst.diameter());
    let grid: Vec<f64> = cfg.grid.values(diam)?.into_iter().filter(|&e| e < radius).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut trace = Vec::new();

    let dst_ball = ball_unchecked(dst, dst.base(), radius, BallKind::Open);
    let net_candidates = dst_ball.intersection(&support(dst)).union(&IndexSet::singleton(dst.base()));
    let src_ball = ball_unchecked(src, src.base(), radius, BallKind::Open);
    let rep_candidates: Vec<usize> = src_ball.iter().collect();
    let far = (0..dst.n()).find(|&j| !dst_ball.contains(j)).unwrap_or(dst.base());

    let mut best_pass: Option<(WeakApprox, f64)> = None;
    let mut best_fail: Option<(WeakApprox, f64)> = None;
    let mut streak = 0usize;

    for &eps in &grid {
        let mut passed: Option<WeakApprox> = None;
        let mut closest: Option<(Construction, Vec<usize>, f64)> = None;
        for frac in NET_FRACTIONS {
            let spacing = eps * frac;
            let c = Construction {
                src,
                dst,
                radius,
                eps,
                ball_radius: 2.0 * spacing,
                net: farthest_point_net(dst, &net_candidates, dst.base(), spacing),
                candidates: rep_candidates.clone(),
                far,
            };
            let reps = c.greedy();
            let w = c.build(&reps);
            let score = c.score(&w);
            if score <= 0.0 && verify_weak_approximation(src, dst, &w)?.is_pass() {
                passed = Some(w);
                break;
            }
            if closest.as_ref().is_none_or(|(_, _, s)| score < *s) {
                closest = Some((c, reps, score));
            }
        }
        if passed.is_none() {
            if let Some((c, mut reps, mut score)) = closest {
                if c.net.len() > 1 && !c.candidates.is_empty() {
                    for iteration in 0..cfg.budget {
                        let k = rng.gen_range(1..c.net.len());
                        let x = c.candidates[rng.gen_range(0..c.candidates.len())];
                        let mut trial = reps.clone();
                        if let Some(other) = trial.iter().position(|&r| r == x) {
                            trial.swap(k, other);
                        } else {
                            trial[k] = x;
                        }
                        if trial[0] != src.base() {
                            continue;
                        }
                        let w = c.build(&trial);
                        let s = c.score(&w);
                        if s < score {
                            reps = trial;
                            score = s;
                            if cfg.trace {
                                trace.push(TraceEvent { eps, iteration, net_index: k, source_point: x, score: s });
                            }
                            if s <= 0.0 {
                                break;
                            }
                        }
                    }
                }
                let w = c.build(&reps);
                if score <= 0.0 && verify_weak_approximation(src, dst, &w)?.is_pass() {
                    passed = Some(w);
                } else if best_fail.as_ref().is_none_or(|(_, s)| score < *s) {
                    best_fail = Some((w, score));
                }
            }
        }
        match passed {
            Some(w) => {
                let s = Construction {
                    src,
                    dst,
                    radius,
                    eps,
                    ball_radius: 0.0,
                    net: Vec::new(),
                    candidates: Vec::new(),
                    far,
                }
                .score(&w);
                best_pass = Some((w, s));
                streak = 0;
            }
            None => {
                streak += 1;
                if best_pass.is_some() || streak >= FAIL_STREAK {
                    break;
                }
            }
        }
    }

    match (best_pass, best_fail) {
        (Some((w, score)), _) => Ok(SearchOutcome { achieved_eps: w.eps, witness: w, verified: true, score, trace }),
        (None, Some((w, score))) => Ok(SearchOutcome { witness: w, achieved_eps: f64::INFINITY, verified: false, score, trace }),
        (None, None) => Err(MmError::Parameter(format!("no grid value below R={radius}"))),
    }
}

/// Disjoint union of `X` and `Y` with the cross distance
/// `Φ(x, y) = min_{x̃ ∈ X̃} d_X(x̃, x) + d_Y(ψ(x̃), y) + ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct Glued {
    pub space: PointedSpace,
    pub embed_x: PointMap,
    pub embed_y: PointMap,
}

/// Glues `X` and `Y` along a verified weak approximation. `X` occupies indices
/// `0..n_X`, `Y` the rest; both measures are copied, so the total mass is the
/// sum of the two. The basepoint is `p_X`.
pub fn glue(src: &PointedSpace, dst: &PointedSpace, w: &WeakApprox) -> Result<Glued> {
    let v = verify_weak_approximation(src, dst, w)?;
    if let Some(reason) = v.reason() {
        return Err(MmError::Precondition(format!("not a verified weak approximation: {reason}")));
    }
    let (nx, ny) = (src.n(), dst.n());
    let n = nx + ny;
    let mut dist = vec![0.0; n * n];
    for i in 0..nx {
        for j in 0..nx {
            dist[i * n + j] = src.d(i, j);
        }
    }
    for i in 0..ny {
        for j in 0..ny {
            dist[(nx + i) * n + nx + j] = dst.d(i, j);
        }
    }
    for x in 0..nx {
        for y in 0..ny {
            let phi = w
                .good
                .iter()
                .map(|g| src.d(g, x) + dst.d(w.map.apply(g), y) + w.eps)
                .fold(f64::INFINITY, f64::min);
            dist[x * n + nx + y] = phi;
            dist[(nx + y) * n + x] = phi;
        }
    }
    let mut weight = src.weights().to_vec();
    weight.extend_from_slice(dst.weights());
    let space = PointedSpace::from_flat(dist, weight, src.base())?;
    Ok(Glued {
        space,
        embed_x: PointMap::identity(nx),
        embed_y: PointMap::new((nx..n).collect()),
    })
}
