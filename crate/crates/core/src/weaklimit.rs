//! Weak convergence of measures on a common finite host: an enumerated
//! bounded-Lipschitz test family, the δ-metric it induces, tail diagnostics
//! standing in for limits along an ultrafilter, tightness, and the lifting of
//! a target measure along approximations.
//!
//! Sequence statistics use the tail `i ≥ ⌊len/2⌋`.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::approx::verify_approximation;
use crate::error::{MmError, Result};
use crate::mmspace::{ball_unchecked, BallKind, IndexSet, Measure, PointMap, PointedSpace};
use crate::verdict::Verdict;

/// Relative slack added to recorded Lipschitz constants to absorb rounding
/// in the normalization step.
const LIP_SLACK: f64 = 1e-12;

/// Relative rounding allowance for residual masses in the tightness greedy.
const MASS_SLACK: f64 = 1e-12;

/// Hard cap on the family length per unit of depth.
pub const FAMILY_CAP_PER_DEPTH: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFamily {
    pub n: usize,
    pub depth: u32,
    pub fns: Vec<Vec<f64>>,
    pub lip: Vec<f64>,
}

impl TestFamily {
    pub fn len(&self) -> usize {
        self.fns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fns.is_empty()
    }

    /// Bound on the omitted tail `Σ_{n > len} 2^{-n} |∫ f_n d(μ − ν)|`.
    pub fn truncation_bound(&self, mu: &Measure, nu: &Measure) -> f64 {
        0.5f64.powi(self.fns.len() as i32) * (abs_mass(mu) + abs_mass(nu))
    }

    /// Largest `|f(x) − f(y)| / d(x, y)` over pairs, per function.
    pub fn empirical_lip(&self, s: &PointedSpace) -> Vec<f64> {
        self.fns
            .iter()
            .map(|f| {
                let mut worst = 0.0f64;
                for x in 0..s.n() {
                    for y in x + 1..s.n() {
                        worst = worst.max((f[x] - f[y]).abs() / s.d(x, y));
                    }
                }
                worst
            })
            .collect()
    }
}

fn abs_mass(mu: &Measure) -> f64 {
    mu.weight.iter().map(|w| w.abs()).sum()
}

/// One raw generator `max{α − β·d(·, y)/D, γ}`.
#[derive(Clone)]
struct Generator {
    values: Vec<f64>,
    slope: f64,
}

fn dyadic_grid(depth: u32) -> Vec<f64> {
    let step = 0.5f64.powi(depth as i32);
    let kmax = 1i64 << (2 * depth).min(62);
    let bound = (2.0 / step) as i64;
    let k = kmax.min(bound);
    (-k..=k).map(|i| i as f64 * step).collect()
}

fn key(v: &[f64]) -> Vec<u64> {
    // Normalizes -0.0 so that f and -f of a zero entry hash alike.
    v.iter().map(|x| if *x == 0.0 { 0u64 } else { x.to_bits() }).collect()
}

/// Enumerates the test family on `s`.
///
/// Generators `max{α − β·d(·, y)/D, γ}` run over `α, β, γ` in the dyadic grid
/// `{k/2^depth : |k| ≤ 4^depth} ∩ [−2, 2]` and `y` over all points, where `D`
/// is the diameter (1 for a single point). Order: `β = 0` first, then positive
/// `β` descending, then negative `β` descending; within each `β`, `α`
/// descending, `γ` ascending, `y` innermost. Maxima of up to `min(depth, 3)`
/// distinct generators follow. Each candidate is emitted as `f` then `−f`,
/// normalized by its sup-norm; zero and duplicate functions are skipped and
/// the list is capped at `64·depth`.
pub fn build_test_family(s: &PointedSpace, depth: u32) -> Result<TestFamily> {
    if depth == 0 {
        return Err(MmError::Parameter("family depth must be at least 1".into()));
    }
    let n = s.n();
    let cap = FAMILY_CAP_PER_DEPTH * depth as usize;
    let diam = s.diameter();
    let scale = if diam > 0.0 { diam } else { 1.0 };
    let grid = dyadic_grid(depth);

    let mut betas: Vec<f64> = vec![0.0];
    betas.extend(grid.iter().rev().copied().filter(|&b| b > 0.0));
    betas.extend(grid.iter().rev().copied().filter(|&b| b < 0.0));

    let mut fam = TestFamily { n, depth, fns: Vec::new(), lip: Vec::new() };
    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    let mut raw_seen: HashSet<Vec<u64>> = HashSet::new();
    let mut generators: Vec<Generator> = Vec::new();

    let mut emit = |values: &[f64], slope: f64, fam: &mut TestFamily| -> bool {
        let sup = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if sup == 0.0 {
            return fam.fns.len() >= cap;
        }
        for sign in [1.0, -1.0] {
            if fam.fns.len() >= cap {
                return true;
            }
            let f: Vec<f64> = values.iter().map(|v| sign * v / sup).collect();
            if seen.insert(key(&f)) {
                fam.fns.push(f);
                fam.lip.push(slope / scale / sup * (1.0 + LIP_SLACK));
            }
        }
        fam.fns.len() >= cap
    };

    'singles: for &beta in &betas {
        for &alpha in grid.iter().rev() {
            for &gamma in &grid {
                for y in 0..n {
                    let values: Vec<f64> = (0..n).map(|x| (alpha - beta * s.d(x, y) / scale).max(gamma)).collect();
                    if raw_seen.insert(key(&values)) {
                        generators.push(Generator { values: values.clone(), slope: beta.abs() });
                    }
                    if emit(&values, beta.abs(), &mut fam) {
                        break 'singles;
                    }
                }
            }
        }
    }

    let arity = depth.min(3) as usize;
    if fam.fns.len() < cap && arity >= 2 {
        let g = generators.len();
        'pairs: for a in 0..g {
            for b in a + 1..g {
                let v = combine(&[&generators[a], &generators[b]]);
                if emit(&v.values, v.slope, &mut fam) {
                    break 'pairs;
                }
            }
        }
        if fam.fns.len() < cap && arity >= 3 {
            'triples: for a in 0..g {
                for b in a + 1..g {
                    for c in b + 1..g {
                        let v = combine(&[&generators[a], &generators[b], &generators[c]]);
                        if emit(&v.values, v.slope, &mut fam) {
                            break 'triples;
                        }
                    }
                }
            }
        }
    }
    Ok(fam)
}

fn combine(parts: &[&Generator]) -> Generator {
    let n = parts[0].values.len();
    let values = (0..n).map(|x| parts.iter().map(|g| g.values[x]).fold(f64::NEG_INFINITY, f64::max)).collect();
    let slope = parts.iter().map(|g| g.slope).fold(0.0, f64::max);
    Generator { values, slope }
}

/// `Σ f·w` with Neumaier compensation, so long sums of equal non-dyadic weights
/// land within an ulp or two of the exact value.
fn dot(f: &[f64], w: &[f64]) -> f64 {
    let (mut sum, mut carry) = (0.0f64, 0.0f64);
    for (a, b) in f.iter().zip(w) {
        let x = a * b;
        let t = sum + x;
        carry += if sum.abs() >= x.abs() { (sum - t) + x } else { (x - t) + sum };
        sum = t;
    }
    sum + carry
}

pub fn integrate(f: &[f64], mu: &Measure) -> Result<f64> {
    if f.len() != mu.len() {
        return Err(MmError::Shape(format!("function has {} values, measure has {} atoms", f.len(), mu.len())));
    }
    Ok(dot(f, &mu.weight))
}

fn check_host(fam: &TestFamily, mu: &Measure) -> Result<()> {
    if mu.len() != fam.n {
        return Err(MmError::Shape(format!("measure has {} atoms, family host has {}", mu.len(), fam.n)));
    }
    Ok(())
}

/// Integrals are quantized to multiples of `2^-INTEGRAL_BITS`.
const INTEGRAL_BITS: i32 = 60;

/// Each weighted summand of δ is rounded up to a multiple of `2^-DELTA_BITS`.
const DELTA_BITS: i32 = 40;

/// The integrals `∫ f_n dμ` of one measure against a family, quantized so that
/// δ can be evaluated in exact integer arithmetic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Integrals(Vec<i128>);

impl Integrals {
    pub fn new(mu: &Measure, fam: &TestFamily) -> Result<Self> {
        check_host(fam, mu)?;
        let scale = 2f64.powi(INTEGRAL_BITS);
        Ok(Integrals(
            fam.fns
                .iter()
                .map(|f| (dot(f, &mu.weight) * scale).round() as i128)
                .collect(),
        ))
    }

    /// δ between two quantized integral vectors.
    ///
    /// Summand `n` is `⌈2^{-n} |Δ_n|⌉` on the `2^-40` grid. Rounding up is
    /// subadditive, so the triangle inequality holds exactly, and the integer
    /// total converts to `f64` without rounding while δ stays below `2^13`.
    pub fn delta(&self, other: &Integrals) -> f64 {
        let mut total: i128 = 0;
        for (n, (a, b)) in self.0.iter().zip(&other.0).enumerate() {
            let gap = (a - b).abs();
            let shift = n as i32 + 1 + INTEGRAL_BITS - DELTA_BITS;
            let term = if shift >= 126 {
                i128::from(gap > 0)
            } else {
                (gap + (1i128 << shift) - 1) >> shift
            };
            total = total.saturating_add(term);
        }
        total as f64 * 0.5f64.powi(DELTA_BITS)
    }
}

/// `δ(μ, ν) = Σ_n 2^{-n} |∫ f_n d(μ − ν)|`, truncated at the family length and
/// evaluated on a fixed dyadic grid (each summand rounded up by at most
/// `2^-40`), which keeps it an exact pseudometric in floating point.
pub fn delta_metric(mu: &Measure, nu: &Measure, fam: &TestFamily) -> Result<f64> {
    Ok(Integrals::new(mu, fam)?.delta(&Integrals::new(nu, fam)?))
}

/// `max_n |∫ f_n d(μ − ν)|`.
pub fn max_gap(mu: &Measure, nu: &Measure, fam: &TestFamily) -> Result<f64> {
    check_host(fam, mu)?;
    check_host(fam, nu)?;
    let diff: Vec<f64> = mu.weight.iter().zip(&nu.weight).map(|(a, b)| a - b).collect();
    Ok(fam
        .fns
        .iter()
        .map(|f| f.iter().zip(&diff).map(|(a, b)| a * b).sum::<f64>().abs())
        .fold(0.0, f64::max))
}

fn tail_start(len: usize) -> usize {
    len / 2
}

/// Pairwise δ matrix, computed in parallel with a fixed summation order.
pub fn delta_matrix(seq: &[Measure], fam: &TestFamily) -> Result<Vec<Vec<f64>>> {
    let ints: Vec<Integrals> = seq.par_iter().map(|mu| Integrals::new(mu, fam)).collect::<Result<_>>()?;
    let rows: Vec<Vec<f64>> = (0..seq.len())
        .into_par_iter()
        .map(|i| (0..seq.len()).map(|j| if i < j { ints[i].delta(&ints[j]) } else { 0.0 }).collect())
        .collect();
    let mut m = rows;
    for i in 0..seq.len() {
        for j in 0..i {
            m[i][j] = m[j][i];
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CauchyReport {
    pub verdict: Verdict,
    /// `N_k` for each achieved schedule entry.
    pub tails: Vec<usize>,
    /// `(k, i, j)`: first unachievable schedule index and the violating pair.
    pub violation: Option<(usize, usize, usize)>,
}

/// Eventual proxy for the asymptotic Cauchy property: for each `ε_k` finds the
/// smallest `N_k` with `δ(μ_i, μ_j) ≤ ε_k` for all `i, j ≥ N_k`, where the tail
/// must keep at least two measures.
pub fn is_asymptotically_cauchy(seq: &[Measure], fam: &TestFamily, schedule: &[f64]) -> Result<CauchyReport> {
    if seq.len() < 2 {
        return Err(MmError::Parameter("need at least two measures".into()));
    }
    if schedule.windows(2).any(|w| w[1] > w[0]) {
        return Err(MmError::Parameter("eps schedule must be non-increasing".into()));
    }
    let m = delta_matrix(seq, fam)?;
    let len = seq.len();
    // worst[N] = (max δ over i, j ≥ N, argmax pair)
    let mut worst = vec![(0.0f64, len - 2, len - 1); len];
    let mut acc = (0.0f64, len - 2, len - 1);
    for start in (0..len - 1).rev() {
        for j in start + 1..len {
            if m[start][j] > acc.0 {
                acc = (m[start][j], start, j);
            }
        }
        worst[start] = acc;
    }
    let mut tails = Vec::new();
    for (k, &eps) in schedule.iter().enumerate() {
        match (0..len - 1).find(|&s| worst[s].0 <= eps) {
            Some(s) => tails.push(s),
            None => {
                let (gap, i, j) = worst[len - 2];
                return Ok(CauchyReport {
                    verdict: Verdict::fail(format!("eps[{k}] = {eps} not achieved: delta({i},{j}) = {gap}")),
                    tails,
                    violation: Some((k, i, j)),
                });
            }
        }
    }
    Ok(CauchyReport { verdict: Verdict::Pass, tails, violation: None })
}

/// One portmanteau inequality on a basepoint-centered ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallCheck {
    pub radius: f64,
    pub kind: BallKind,
    pub limit_mass: f64,
    pub tail_liminf: f64,
    pub tail_limsup: f64,
    /// Open: `μ(U) ≤ liminf μ_i(U) + tol`. Closed: `μ(F) ≥ limsup μ_i(F) − tol`.
    pub holds: bool,
}

/// Checks the open-ball lower and closed-ball upper semicontinuity
/// inequalities for `candidate` on every ball centered at the basepoint with
/// radius equal to a distance from it.
pub fn portmanteau(host: &PointedSpace, candidate: &Measure, seq: &[Measure], tol: f64) -> Result<Vec<BallCheck>> {
    if candidate.len() != host.n() || seq.iter().any(|m| m.len() != host.n()) {
        return Err(MmError::Shape("measures must live on the host".into()));
    }
    let p = host.base();
    let mut radii: Vec<f64> = host.row(p).iter().copied().filter(|&r| r > 0.0).collect();
    radii.sort_by(f64::total_cmp);
    radii.dedup();
    let tail = &seq[tail_start(seq.len())..];
    let mut out = Vec::new();
    for &r in &radii {
        for kind in [BallKind::Open, BallKind::Closed] {
            let b = ball_unchecked(host, p, r, kind);
            let column: Vec<f64> = tail.iter().map(|m| m.mass_of(&b)).collect();
            let lo = column.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = column.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let limit_mass = candidate.mass_of(&b);
            let holds = match kind {
                BallKind::Open => limit_mass <= lo + tol,
                BallKind::Closed => limit_mass >= hi - tol,
            };
            out.push(BallCheck { radius: r, kind, limit_mass, tail_liminf: lo, tail_limsup: hi, holds });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakLimitReport {
    pub limit: Option<Measure>,
    /// Atom with the largest tail oscillation and that oscillation.
    pub worst_atom: (usize, f64),
    pub portmanteau: Vec<BallCheck>,
    /// δ from the last measure to the limit, when there is one.
    pub delta_to_limit: Option<f64>,
}

/// Returns the atomwise tail limit when every atom's tail oscillation is at
/// most `tol`, together with the portmanteau checks for it.
pub fn weak_limit(host: &PointedSpace, seq: &[Measure], fam: &TestFamily, tol: f64) -> Result<WeakLimitReport> {
    if seq.is_empty() {
        return Err(MmError::Parameter("empty measure sequence".into()));
    }
    for mu in seq {
        check_host(fam, mu)?;
    }
    let tail = &seq[tail_start(seq.len())..];
    let mut worst = (0usize, 0.0f64);
    for a in 0..fam.n {
        let lo = tail.iter().map(|m| m.weight[a]).fold(f64::INFINITY, f64::min);
        let hi = tail.iter().map(|m| m.weight[a]).fold(f64::NEG_INFINITY, f64::max);
        if hi - lo > worst.1 {
            worst = (a, hi - lo);
        }
    }
    if worst.1 > tol {
        return Ok(WeakLimitReport { limit: None, worst_atom: worst, portmanteau: Vec::new(), delta_to_limit: None });
    }
    let limit = seq[seq.len() - 1].clone();
    let checks = portmanteau(host, &limit, seq, tol)?;
    let delta = delta_metric(&seq[seq.len() - 1], &limit, fam)?;
    Ok(WeakLimitReport { limit: Some(limit), worst_atom: worst, portmanteau: checks, delta_to_limit: Some(delta) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TightnessReport {
    pub centers: Vec<usize>,
    /// Union of the chosen balls.
    pub set: IndexSet,
    /// Tail-limsup of `μ_i(X \ T)`.
    pub residual: f64,
    /// `μ_i(X \ T)` for every measure of the sequence.
    pub residual_column: Vec<f64>,
    /// Number of balls covering `T`.
    pub cover_size: usize,
    pub verdict: Verdict,
}

/// Greedily grows `T` as a union of open balls of `radius` (default `eps`;
/// radius 0 means single atoms), each step adding the center whose ball most
/// reduces the tail-limsup of the mass outside `T`, until that residual is at
/// most `eps`.
pub fn prokhorov_tightness(host: &PointedSpace, seq: &[Measure], eps: f64, radius: Option<f64>) -> Result<TightnessReport> {
    if !(eps >= 0.0) {
        return Err(MmError::Parameter(format!("eps must be non-negative, got {eps}")));
    }
    let radius = radius.unwrap_or(eps);
    if !(radius >= 0.0) {
        return Err(MmError::Parameter(format!("radius must be non-negative, got {radius}")));
    }
    if seq.is_empty() || seq.iter().any(|m| m.len() != host.n()) {
        return Err(MmError::Shape("need a nonempty sequence of measures on the host".into()));
    }
    let n = host.n();
    let tail = &seq[tail_start(seq.len())..];
    let mut inside = vec![false; n];
    let mut residual: Vec<f64> = tail.iter().map(|m| m.total()).collect();
    let limsup = |r: &[f64]| r.iter().copied().fold(0.0f64, f64::max);
    let candidates: Vec<usize> = (0..n).filter(|&a| tail.iter().any(|m| m.weight[a] > 0.0)).collect();
    let ball_of = |c: usize| -> Vec<usize> {
        if radius > 0.0 {
            ball_unchecked(host, c, radius, BallKind::Open).into_vec()
        } else {
            vec![c]
        }
    };
    // Residuals are float sums of atom weights; allow rounding at the scale of the total mass.
    let slack = MASS_SLACK * residual.iter().copied().fold(0.0f64, f64::max);
    // The limsup alone plateaus while several tail measures share the maximum,
    // so ties are broken by the summed tail residual.
    let key = |r: &[f64]| (limsup(r), r.iter().sum::<f64>());
    let mut centers = Vec::new();
    let mut current = key(&residual);
    while current.0 > eps + slack {
        let mut best: Option<(usize, (f64, f64), Vec<f64>)> = None;
        for &c in &candidates {
            let fresh: Vec<usize> = ball_of(c).into_iter().filter(|&a| !inside[a]).collect();
            if fresh.is_empty() {
                continue;
            }
            let after: Vec<f64> = tail
                .iter()
                .zip(&residual)
                .map(|(m, r)| r - fresh.iter().map(|&a| m.weight[a]).sum::<f64>())
                .collect();
            let value = key(&after);
            if value < current && best.as_ref().is_none_or(|(_, v, _)| value < *v) {
                best = Some((c, value, after));
            }
        }
        let Some((c, value, after)) = best else { break };
        for a in ball_of(c) {
            inside[a] = true;
        }
        centers.push(c);
        residual = after;
        current = value;
    }
    let set: IndexSet = (0..n).filter(|&a| inside[a]).collect();
    let outside: IndexSet = (0..n).filter(|&a| !inside[a]).collect();
    let residual_column: Vec<f64> = seq.iter().map(|m| m.mass_of(&outside)).collect();
    let residual = limsup(&residual_column[tail_start(seq.len())..]);
    let verdict = if residual <= eps + slack {
        Verdict::Pass
    } else {
        Verdict::fail(format!("residual {residual} > {eps} after {} centers", centers.len()))
    };
    Ok(TightnessReport { cover_size: centers.len(), centers, set, residual, residual_column, verdict })
}

/// One stage of a lifting problem: a source space with an `(R, ε)`
/// approximation into the common target.
#[derive(Debug, Clone)]
pub struct LiftStage<'a> {
    pub space: &'a PointedSpace,
    pub map: &'a PointMap,
    pub radius: f64,
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftReport {
    pub measures: Vec<Measure>,
    /// `J_i` as positions in the atom order.
    pub j_sets: Vec<IndexSet>,
    /// `c_i` computed with the target normalized to a probability measure.
    pub c: Vec<f64>,
    /// For each prefix length `k`, the first stage from which every later
    /// available stage contains `{1, …, k}` in `J_i`.
    pub prefix_entry: Vec<Option<usize>>,
    /// Atoms missing from `J_i` at the last stage.
    pub unrepresented: Vec<usize>,
    pub c_tail_monotone: bool,
}

/// Lifts `target` to every stage by picking, for each atom index `j ∈ J_i`,
/// the first source point of `B(p_i, R_i)` whose smallest `ε_i`-close atom is
/// `j`. Atoms are the target's support in `order` (default index order). The
/// lifted measures carry the target's total mass.
pub fn lift_measure(stages: &[LiftStage], target: &PointedSpace, order: Option<&[usize]>, tol: f64) -> Result<LiftReport> {
    let atoms: Vec<usize> = match order {
        Some(o) => o.iter().copied().filter(|&a| target.weights().get(a).is_some_and(|w| *w > 0.0)).collect(),
        None => (0..target.n()).filter(|&a| target.weights()[a] > 0.0).collect(),
    };
    let total: f64 = atoms.iter().map(|&a| target.weights()[a]).sum();
    if !(total > 0.0) {
        return Err(MmError::Parameter("target measure has no mass".into()));
    }
    let lambda: Vec<f64> = atoms.iter().map(|&a| target.weights()[a] / total).collect();

    let mut measures = Vec::new();
    let mut j_sets = Vec::new();
    let mut cs = Vec::new();
    for (i, st) in stages.iter().enumerate() {
        let v = verify_approximation(st.space, target, st.map, st.radius, st.eps)?;
        if let Some(reason) = v.reason() {
            return Err(MmError::Precondition(format!("stage {i}: {reason}")));
        }
        let dom = ball_unchecked(st.space, st.space.base(), st.radius, BallKind::Open);
        let mut rep: Vec<Option<usize>> = vec![None; atoms.len()];
        for x in dom.iter() {
            let fx = st.map.apply(x);
            if let Some(j) = atoms.iter().position(|&a| target.d(fx, a) < st.eps) {
                rep[j].get_or_insert(x);
            }
        }
        let js: IndexSet = (0..atoms.len()).filter(|&j| rep[j].is_some()).collect();
        if js.is_empty() {
            return Err(MmError::NoRepresentableAtoms(i));
        }
        let c: f64 = js.iter().map(|j| lambda[j]).sum();
        let mut w = vec![0.0; st.space.n()];
        for j in js.iter() {
            if let Some(x) = rep[j] {
                w[x] += lambda[j] / c * total;
            }
        }
        measures.push(Measure::new(w));
        j_sets.push(js);
        cs.push(c);
    }

    let prefix_entry = (1..=atoms.len())
        .map(|k| {
            let mut entry = None;
            for i in (0..j_sets.len()).rev() {
                if (0..k).all(|j| j_sets[i].contains(j)) {
                    entry = Some(i);
                } else {
                    break;
                }
            }
            entry
        })
        .collect();
    let unrepresented = match j_sets.last() {
        Some(last) => (0..atoms.len()).filter(|&j| !last.contains(j)).map(|j| atoms[j]).collect(),
        None => Vec::new(),
    };
    let tail = &cs[tail_start(cs.len())..];
    let c_tail_monotone = tail.windows(2).all(|w| w[1] >= w[0] - tol);
    Ok(LiftReport { measures, j_sets, c: cs, prefix_entry, unrepresented, c_tail_monotone })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_point() -> PointedSpace {
        PointedSpace::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]], vec![0.5, 0.5], 0).unwrap()
    }

    fn line(n: usize) -> PointedSpace {
        let h = 1.0 / (n - 1) as f64;
        PointedSpace::from_fn(n, vec![1.0 / n as f64; n], 0, |i, j| (i as f64 - j as f64).abs() * h).unwrap()
    }

    #[test]
    fn point_family_is_constants() {
        let p = PointedSpace::from_flat(vec![0.0], vec![1.0], 0).unwrap();
        let fam = build_test_family(&p, 1).unwrap();
        assert_eq!(fam.fns, vec![vec![1.0], vec![-1.0]]);
    }

    #[test]
    fn two_point_family_contains_sign_function() {
        let fam = build_test_family(&two_point(), 2).unwrap();
        assert!(fam.fns.contains(&vec![1.0, -1.0]));
        assert!(fam.fns.contains(&vec![-1.0, 1.0]));
    }

    #[test]
    fn family_functions_are_normalized_and_lipschitz() {
        let s = line(9);
        let fam = build_test_family(&s, 3).unwrap();
        assert_eq!(fam.len(), 192);
        for (f, (emp, lip)) in fam.fns.iter().zip(fam.empirical_lip(&s).iter().zip(&fam.lip)) {
            assert_eq!(f.iter().fold(0.0f64, |m, v| m.max(v.abs())), 1.0);
            assert!(emp <= lip);
            for x in 0..9 {
                for y in 0..9 {
                    assert!((f[x] - f[y]).abs() <= lip * s.d(x, y));
                }
            }
        }
    }

    #[test]
    fn family_is_deterministic() {
        let s = line(7);
        assert_eq!(build_test_family(&s, 2).unwrap(), build_test_family(&s, 2).unwrap());
    }

    #[test]
    fn integrate_examples() {
        assert_eq!(integrate(&[1.0, 1.0], &Measure::new(vec![0.3, 0.4])).unwrap(), 0.7);
        assert_eq!(integrate(&[0.0, 0.0], &Measure::new(vec![0.3, 0.4])).unwrap(), 0.0);
        assert_eq!(integrate(&[1.0, -1.0], &Measure::new(vec![0.25, 0.75])).unwrap(), -0.5);
        assert!(integrate(&[1.0], &Measure::new(vec![0.25, 0.75])).is_err());
    }

    #[test]
    fn delta_two_diracs_matches_brute_force() {
        let fam = build_test_family(&two_point(), 2).unwrap();
        let oracle: f64 = fam.fns.iter().enumerate().map(|(k, f)| 0.5f64.powi(k as i32 + 1) * (f[0] - f[1]).abs()).sum();
        let d = delta_metric(&Measure::dirac(2, 0), &Measure::dirac(2, 1), &fam).unwrap();
        assert!(d >= oracle - 1e-15 && d <= oracle + fam.len() as f64 * 2f64.powi(-40));
        assert!(d > 0.0);
    }

    #[test]
    fn delta_is_homogeneous() {
        let s = line(5);
        let fam = build_test_family(&s, 2).unwrap();
        let mu = Measure::new(vec![0.1, 0.2, 0.3, 0.25, 0.15]);
        let nu = Measure::new(vec![0.3, 0.1, 0.1, 0.25, 0.25]);
        let a = delta_metric(&mu.scaled(2.0), &nu.scaled(2.0), &fam).unwrap();
        let b = delta_metric(&mu, &nu, &fam).unwrap();
        assert!((a - 2.0 * b).abs() <= 2.0 * fam.len() as f64 * 2f64.powi(-40));
        assert_eq!(delta_metric(&mu, &mu, &fam).unwrap(), 0.0);
    }

    #[test]
    fn delta_triangle_is_exact() {
        let s = line(6);
        let fam = build_test_family(&s, 2).unwrap();
        let ms: Vec<Measure> = (0..12)
            .map(|k| Measure::new((0..6).map(|a| ((a * 7 + k * 13) % 11) as f64 / 11.0 + 1e-3 * k as f64).collect()))
            .collect();
        for a in &ms {
            for b in &ms {
                assert_eq!(delta_metric(a, b, &fam).unwrap(), delta_metric(b, a, &fam).unwrap());
                for c in &ms {
                    let ac = delta_metric(a, c, &fam).unwrap();
                    assert!(ac <= delta_metric(a, b, &fam).unwrap() + delta_metric(b, c, &fam).unwrap());
                }
            }
        }
    }

    #[test]
    fn cauchy_examples() {
        let fam = build_test_family(&two_point(), 2).unwrap();
        let gap = delta_metric(&Measure::dirac(2, 0), &Measure::dirac(2, 1), &fam).unwrap();

        let constant = vec![Measure::new(vec![0.5, 0.5]); 10];
        let r = is_asymptotically_cauchy(&constant, &fam, &[1.0, 0.1, 0.0]).unwrap();
        assert!(r.verdict.is_pass());
        assert_eq!(r.tails, vec![0, 0, 0]);

        let harmonic: Vec<Measure> = (1..=200).map(|i| Measure::new(vec![1.0 / i as f64, 1.0 - 1.0 / i as f64])).collect();
        let r = is_asymptotically_cauchy(&harmonic, &fam, &[gap, gap / 10.0, gap / 100.0]).unwrap();
        assert!(r.verdict.is_pass());
        assert!(r.tails.windows(2).all(|w| w[0] <= w[1]));

        let alternating: Vec<Measure> = (0..10).map(|i| Measure::dirac(2, i % 2)).collect();
        let r = is_asymptotically_cauchy(&alternating, &fam, &[2.0 * gap, gap, gap * 0.999]).unwrap();
        assert_eq!(r.tails.len(), 2);
        assert_eq!(r.violation, Some((2, 8, 9)));
    }

    #[test]
    fn weak_limit_of_interpolation() {
        let s = line(4);
        let fam = build_test_family(&s, 2).unwrap();
        let start = [1.0, 0.0, 0.0, 0.0];
        let target = [0.1, 0.2, 0.3, 0.4];
        let mut seq: Vec<Measure> = (0..=50)
            .map(|t| {
                let a = t as f64 / 50.0;
                Measure::new((0..4).map(|k| (1.0 - a) * start[k] + a * target[k]).collect())
            })
            .collect();
        seq.extend(std::iter::repeat_n(Measure::new(target.to_vec()), 50));
        let r = weak_limit(&s, &seq, &fam, 1e-9).unwrap();
        let lim = r.limit.unwrap();
        for k in 0..4 {
            assert!((lim.weight[k] - target[k]).abs() <= 1e-9);
        }
        assert!(r.portmanteau.iter().all(|c| c.holds));
    }

    #[test]
    fn weak_limit_reports_oscillation() {
        let s = two_point();
        let fam = build_test_family(&s, 2).unwrap();
        let seq: Vec<Measure> = (0..6).map(|i| Measure::dirac(2, i % 2)).collect();
        let r = weak_limit(&s, &seq, &fam, 1e-9).unwrap();
        assert!(r.limit.is_none());
        assert_eq!(r.worst_atom, (0, 1.0));
    }

    #[test]
    fn tightness_single_measure() {
        let s = line(5);
        let mu = Measure::new(vec![0.0, 0.5, 0.0, 0.5, 0.0]);
        let r = prokhorov_tightness(&s, &[mu], 0.0, None).unwrap();
        assert!(r.verdict.is_pass());
        assert_eq!(r.set, IndexSet::from_unsorted(vec![1, 3]));
        assert_eq!(r.cover_size, 2);
    }

    #[test]
    fn tightness_on_simplex_needs_half_the_points() {
        let s = PointedSpace::from_fn(50, vec![0.02; 50], 0, |_, _| 1.0).unwrap();
        let r = prokhorov_tightness(&s, &[s.measure()], 0.5, Some(1.0)).unwrap();
        assert!(r.verdict.is_pass());
        assert_eq!(r.cover_size, 25);
    }

    #[test]
    fn lift_identity_returns_target() {
        let s = line(6);
        let id = PointMap::identity(6);
        let stages: Vec<LiftStage> = (0..3).map(|_| LiftStage { space: &s, map: &id, radius: 5.0, eps: 0.1 }).collect();
        let r = lift_measure(&stages, &s, None, 1e-12).unwrap();
        for (m, c) in r.measures.iter().zip(&r.c) {
            assert!((c - 1.0).abs() < 1e-15);
            for k in 0..6 {
                assert!((m.weight[k] - s.weights()[k]).abs() < 1e-15);
            }
        }
        assert!(r.unrepresented.is_empty());
        assert_eq!(r.prefix_entry, vec![Some(0); 6]);
    }

    #[test]
    fn lift_flags_unreachable_atom() {
        // The target has an extra far atom that no stage can represent.
        let target = PointedSpace::from_rows(
            &[vec![0.0, 1.0, 3.0], vec![1.0, 0.0, 2.0], vec![3.0, 2.0, 0.0]],
            vec![0.25, 0.25, 0.5],
            0,
        )
        .unwrap();
        let src = two_point();
        let map = PointMap::identity(2);
        let stages = vec![LiftStage { space: &src, map: &map, radius: 2.5, eps: 0.5 }];
        let r = lift_measure(&stages, &target, None, 1e-12).unwrap();
        assert_eq!(r.unrepresented, vec![2]);
        assert_eq!(r.c, vec![0.5]);
        assert_eq!(r.measures[0].weight, vec![0.5, 0.5]);
    }
}
