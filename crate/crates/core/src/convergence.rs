//! Sequence-level diagnostics: bounded finiteness, greedy covers with
//! mass-counting failure certificates, the bmttb compactness check, wpmGH
//! convergence against a finite limit, and tangent sequences.
//!
//! A finite prefix can certify failure but only give evidence of success.
//! Head/tail splits use `head = [0, max(1, ⌊len/2⌋))` and `tail = [⌊len/2⌋, len)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::approx::{search_weak_approximation, SearchConfig};
use crate::error::{MmError, Result};
use crate::mmspace::{ball, ball_unchecked, normalize_at_basepoint, pushforward, restrict, BallKind, IndexSet, Measure, PointedSpace};
use crate::verdict::{Evidence, Verdict};
use crate::weaklimit::{build_test_family, delta_metric, TestFamily};

/// Relative rounding allowance shared by the greedy stopping rule and the
/// failure certificate, so that the two can never disagree.
const MASS_SLACK: f64 = 1e-12;

fn head_tail(len: usize) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
    (0..(len / 2).max(1), len / 2..len)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UbfProfile {
    pub radii: Vec<f64>,
    /// `table[i][k] = m_i(B(p_i, R_k))`.
    pub table: Vec<Vec<f64>>,
    pub sup: Vec<f64>,
    pub tail_limsup: Vec<f64>,
}

/// Open basepoint-ball masses of every space at every radius, with the sup and
/// tail-limsup columns.
pub fn uniform_bounded_finiteness(seq: &[PointedSpace], radii: &[f64]) -> Result<UbfProfile> {
    if let Some(&r) = radii.iter().find(|&&r| !(r > 0.0)) {
        return Err(MmError::NonPositiveRadius(r));
    }
    let table: Vec<Vec<f64>> = seq
        .par_iter()
        .map(|s| radii.iter().map(|&r| ball_unchecked(s, s.base(), r, BallKind::Open).iter().map(|i| s.weights()[i]).sum()).collect())
        .collect();
    let column = |k: usize, rows: &[Vec<f64>]| rows.iter().map(|row| row[k]).fold(0.0f64, f64::max);
    let (_, tail) = head_tail(seq.len());
    let sup = (0..radii.len()).map(|k| column(k, &table)).collect();
    let tail_limsup = (0..radii.len()).map(|k| column(k, &table[tail.clone()])).collect();
    Ok(UbfProfile { radii: radii.to_vec(), table, sup, tail_limsup })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub max_ball_mass: f64,
    pub total_ball_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverReport {
    /// Centers in the order they were picked.
    pub centers: Vec<usize>,
    pub residual_mass: f64,
    #[serde(rename = "M")]
    pub m: usize,
    /// `trajectory[k]` is the residual after `k` centers.
    pub trajectory: Vec<f64>,
    pub certificate: Option<Certificate>,
}

impl CoverReport {
    /// Residual after at most `m` centers.
    pub fn residual_at(&self, m: usize) -> f64 {
        self.trajectory[m.min(self.trajectory.len() - 1)]
    }
}

fn check_cover_params(radius: f64, r: f64) -> Result<()> {
    if !(radius > 0.0) {
        return Err(MmError::NonPositiveRadius(radius));
    }
    if !(r > 0.0) {
        return Err(MmError::NonPositiveRadius(r));
    }
    Ok(())
}

/// Largest mass of `B̄(p, R) ∩ B(x, r)` over all `x`, and the mass of `B̄(p, R)`.
fn ball_masses(s: &PointedSpace, radius: f64, r: f64) -> Certificate {
    let target = ball_unchecked(s, s.base(), radius, BallKind::Closed);
    let w = s.weights();
    let total = target.iter().map(|a| w[a]).sum();
    let max = (0..s.n())
        .map(|x| target.iter().filter(|&a| s.d(x, a) < r).map(|a| w[a]).sum::<f64>())
        .fold(0.0f64, f64::max);
    Certificate { max_ball_mass: max, total_ball_mass: total }
}

/// Greedy cover of `B̄(p, R)` by open `r`-balls centered anywhere in `s`: each
/// step picks the center covering the most uncovered mass (ties to the lowest
/// index) until the residual is at most `target_eps` or nothing more can be
/// covered.
pub fn greedy_cover(s: &PointedSpace, radius: f64, r: f64, target_eps: f64) -> Result<CoverReport> {
    check_cover_params(radius, r)?;
    let w = s.weights();
    let target = ball_unchecked(s, s.base(), radius, BallKind::Closed);
    let atoms: Vec<usize> = target.iter().filter(|&a| w[a] > 0.0).collect();
    let total: f64 = atoms.iter().map(|&a| w[a]).sum();
    let slack = MASS_SLACK * total;
    // Only points within R + r of the basepoint can cover anything.
    let candidates: Vec<usize> = (0..s.n()).filter(|&x| s.d(x, s.base()) < radius + r).collect();
    // reach[k]: atoms (positions in `atoms`) inside the ball of candidate k.
    let reach: Vec<Vec<usize>> = candidates
        .par_iter()
        .map(|&x| (0..atoms.len()).filter(|&t| s.d(x, atoms[t]) < r).collect())
        .collect();
    let mut reached_by: Vec<Vec<usize>> = vec![Vec::new(); atoms.len()];
    for (k, list) in reach.iter().enumerate() {
        for &t in list {
            reached_by[t].push(k);
        }
    }
    let mut covered = vec![false; atoms.len()];
    // Gains are always recomputed as sums in index order, never updated by
    // subtraction, so equal gains compare equal and ties go to the lowest index.
    let gain_of = |k: usize, covered: &[bool]| reach[k].iter().filter(|&&t| !covered[t]).map(|&t| w[atoms[t]]).sum::<f64>();
    let mut gain: Vec<f64> = (0..candidates.len()).map(|k| gain_of(k, &covered)).collect();
    let residual_of = |covered: &[bool]| (0..atoms.len()).filter(|&t| !covered[t]).map(|t| w[atoms[t]]).sum::<f64>();

    let mut centers = Vec::new();
    let mut residual = residual_of(&covered);
    let mut trajectory = vec![residual];
    while residual > target_eps + slack {
        let mut best: Option<(usize, f64)> = None;
        for (k, &g) in gain.iter().enumerate() {
            if g > 0.0 && best.is_none_or(|(_, bg)| g > bg) {
                best = Some((k, g));
            }
        }
        let Some((k, _)) = best else { break };
        centers.push(candidates[k]);
        let fresh: Vec<usize> = reach[k].iter().copied().filter(|&t| !covered[t]).collect();
        for &t in &fresh {
            covered[t] = true;
        }
        let mut touched: Vec<usize> = fresh.iter().flat_map(|&t| reached_by[t].iter().copied()).collect();
        touched.sort_unstable();
        touched.dedup();
        for j in touched {
            gain[j] = gain_of(j, &covered);
        }
        residual = residual_of(&covered);
        trajectory.push(residual);
    }
    Ok(CoverReport { m: centers.len(), centers, residual_mass: residual, trajectory, certificate: None })
}

/// True when `M` open `r`-balls provably cannot cover `B̄(p, R)` up to mass
/// `eps`: `M · max_x 𝔪(B̄(p,R) ∩ B(x,r)) < 𝔪(B̄(p,R)) − eps`. Never a false
/// positive.
pub fn cover_failure_certificate(s: &PointedSpace, radius: f64, r: f64, m: usize, eps: f64) -> Result<bool> {
    check_cover_params(radius, r)?;
    Ok(certificate_fires(&ball_masses(s, radius, r), m, eps))
}

fn certificate_fires(c: &Certificate, m: usize, eps: f64) -> bool {
    (m as f64) * c.max_ball_mass < c.total_ball_mass - eps - MASS_SLACK * c.total_ball_mass
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BmttbTriple {
    pub radius: f64,
    pub r: f64,
    pub eps: f64,
    pub covers: Vec<CoverReport>,
    /// Largest greedy `M` over the whole prefix (the sup form).
    pub m_sup: usize,
    /// Largest greedy `M` over the head of the prefix.
    pub m_head: usize,
    /// Tail-limsup of the greedy residual with `m_head` centers.
    pub tail_residual: f64,
    pub evidence: Evidence,
    pub verdict: Verdict,
    /// Index of a space whose certificate fires at `m_head`.
    pub certified_at: Option<usize>,
}

/// Checks the bmttb condition on a finite prefix for each `(R, r, ε)`.
///
/// The head of the prefix fixes `M` (its largest greedy cover size). The
/// verdict is a certified failure when some later space provably needs more
/// than `M` balls, pass evidence when greedy covers the whole tail with `M`
/// balls, and inconclusive otherwise. Always prefix-limited.
pub fn bmttb_check(seq: &[PointedSpace], params: &[(f64, f64, f64)]) -> Result<Vec<BmttbTriple>> {
    if seq.is_empty() {
        return Err(MmError::Parameter("empty space sequence".into()));
    }
    let (head, tail) = head_tail(seq.len());
    let mut out = Vec::new();
    for &(radius, r, eps) in params {
        if !(eps >= 0.0) {
            return Err(MmError::Parameter(format!("eps must be non-negative, got {eps}")));
        }
        let mut covers: Vec<CoverReport> = seq.par_iter().map(|s| greedy_cover(s, radius, r, eps)).collect::<Result<_>>()?;
        let m_sup = covers.iter().map(|c| c.m).max().unwrap_or(0);
        let m_head = covers[head.clone()].iter().map(|c| c.m).max().unwrap_or(0);
        let tail_residual = covers[tail.clone()].iter().map(|c| c.residual_at(m_head)).fold(0.0f64, f64::max);
        let slack = MASS_SLACK * covers.iter().map(|c| c.trajectory[0]).fold(0.0f64, f64::max);

        let mut certified_at = None;
        for i in tail.clone() {
            let cert = ball_masses(&seq[i], radius, r);
            if certificate_fires(&cert, m_head, eps) {
                covers[i].certificate = Some(cert);
                certified_at = Some(i);
                break;
            }
        }
        let (evidence, verdict) = if let Some(i) = certified_at {
            let c = covers[i].certificate.as_ref().map(|c| (c.max_ball_mass, c.total_ball_mass)).unwrap_or_default();
            (
                Evidence::FailCertified,
                Verdict::fail(format!(
                    "space {i} needs more than {m_head} balls: {m_head} x {} < {} - {eps}",
                    c.0, c.1
                )),
            )
        } else if tail_residual <= eps + slack {
            (Evidence::PassEvidence, Verdict::Pass)
        } else {
            (Evidence::Inconclusive, Verdict::fail(format!("greedy-fail (inconclusive): tail residual {tail_residual} with {m_head} balls")))
        };
        out.push(BmttbTriple { radius, r, eps, covers, m_sup, m_head, tail_residual, evidence, verdict, certified_at });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WpmghStage {
    pub radius: f64,
    pub eps: f64,
    pub achieved_eps: f64,
    /// δ between the pushed-forward stage measure and the limit measure, over
    /// the family functions supported in `B(p, R_i)`.
    pub delta: f64,
    pub functions_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WpmghReport {
    pub stages: Vec<WpmghStage>,
    pub verdict: Verdict,
}

/// Family functions whose nonzero entries all lie in `B(p, R)`, in order.
fn supported_in(fam: &TestFamily, limit: &PointedSpace, radius: f64) -> TestFamily {
    let b = ball_unchecked(limit, limit.base(), radius, BallKind::Open);
    let keep: Vec<usize> = (0..fam.len())
        .filter(|&k| fam.fns[k].iter().enumerate().all(|(x, v)| *v == 0.0 || b.contains(x)))
        .collect();
    TestFamily {
        n: fam.n,
        depth: fam.depth,
        fns: keep.iter().map(|&k| fam.fns[k].clone()).collect(),
        lip: keep.iter().map(|&k| fam.lip[k]).collect(),
    }
}

/// Checks wpmGH convergence of `seq` to `limit` along a schedule of
/// `(R_i, ε_i)`: every stage needs a verified weak approximation with
/// achieved `ε ≤ ε_i`, and the last stage's measure gap must be at most `tol`
/// with the gaps non-increasing over the tail.
pub fn wpmgh_sequence_check(
    seq: &[PointedSpace],
    limit: &PointedSpace,
    schedule: &[(f64, f64)],
    fam_depth: u32,
    tol: f64,
    cfg: &SearchConfig,
) -> Result<WpmghReport> {
    if schedule.len() != seq.len() {
        return Err(MmError::Parameter(format!("schedule has {} entries for {} spaces", schedule.len(), seq.len())));
    }
    if seq.is_empty() {
        return Err(MmError::Parameter("empty space sequence".into()));
    }
    if schedule.windows(2).any(|w| w[1].0 < w[0].0 || w[1].1 > w[0].1) {
        return Err(MmError::Parameter("schedule must have R non-decreasing and eps non-increasing".into()));
    }
    let fam = build_test_family(limit, fam_depth)?;
    let target = limit.measure();
    let stages: Vec<WpmghStage> = seq
        .par_iter()
        .zip(schedule.par_iter())
        .map(|(s, &(radius, eps))| {
            let out = search_weak_approximation(s, limit, radius, cfg)?;
            let pushed = pushforward(&s.measure(), &out.witness.map, limit.n())?;
            let sub = supported_in(&fam, limit, radius);
            let delta = delta_metric(&pushed, &target, &sub)?;
            Ok(WpmghStage { radius, eps, achieved_eps: out.achieved_eps, delta, functions_used: sub.len() })
        })
        .collect::<Result<_>>()?;

    let mut verdict = Verdict::Pass;
    if let Some((i, st)) = stages.iter().enumerate().find(|(_, st)| !(st.achieved_eps <= st.eps)) {
        verdict = Verdict::fail(format!("stage {i}: achieved eps {} > {}", st.achieved_eps, st.eps));
    } else {
        let last = &stages[stages.len() - 1];
        let (_, tail) = head_tail(stages.len());
        let tail = &stages[tail];
        if last.delta > tol {
            verdict = Verdict::fail(format!("last-stage measure gap {} > {tol}", last.delta));
        } else if tail.windows(2).any(|w| w[1].delta > w[0].delta + tol) {
            verdict = Verdict::fail("measure gap increases over the tail");
        }
    }
    Ok(WpmghReport { stages, verdict })
}

/// Symmetrized discrepancy: the larger of the achieved `ε` of the searches in
/// both directions and the δ gaps of the matched pushforwards.
pub fn wpmgh_discrepancy(x: &PointedSpace, y: &PointedSpace, radius: f64, fam_depth: u32, cfg: &SearchConfig) -> Result<f64> {
    let one_way = |a: &PointedSpace, b: &PointedSpace| -> Result<(f64, f64)> {
        let out = search_weak_approximation(a, b, radius, cfg)?;
        let fam = build_test_family(b, fam_depth)?;
        let pushed = pushforward(&a.measure(), &out.witness.map, b.n())?;
        Ok((out.achieved_eps, delta_metric(&pushed, &b.measure(), &fam)?))
    };
    let (e1, g1) = one_way(x, y)?;
    let (e2, g2) = one_way(y, x)?;
    Ok(e1.max(e2).max(g1).max(g2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoublingProfile {
    pub scales: Vec<f64>,
    /// `𝔪(B(x, 2r)) / 𝔪(B(x, r))`, infinite when the denominator vanishes.
    pub ratios: Vec<f64>,
    /// Largest ratio over the smallest quarter of the scales.
    pub summary_max: f64,
}

/// Doubling ratios at `point` for each scale (descending).
pub fn pointwise_doubling_profile(s: &PointedSpace, point: usize, scales: &[f64]) -> Result<DoublingProfile> {
    s.check_index(point)?;
    if scales.is_empty() {
        return Err(MmError::Parameter("no scales given".into()));
    }
    if scales.windows(2).any(|w| w[1] > w[0]) {
        return Err(MmError::Parameter("scales must be descending".into()));
    }
    let w = s.weights();
    let mut ratios = Vec::new();
    for &r in scales {
        let small: f64 = ball(s, point, r, BallKind::Open)?.iter().map(|i| w[i]).sum();
        let big: f64 = ball(s, point, 2.0 * r, BallKind::Open)?.iter().map(|i| w[i]).sum();
        ratios.push(if small > 0.0 { big / small } else { f64::INFINITY });
    }
    let quarter = scales.len().div_ceil(4);
    let summary_max = ratios[scales.len() - quarter..].iter().copied().fold(0.0f64, f64::max);
    Ok(DoublingProfile { scales: scales.to_vec(), ratios, summary_max })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentReport {
    pub spaces: Vec<PointedSpace>,
    pub doubling: DoublingProfile,
    pub bmttb: Vec<BmttbTriple>,
}

/// Rescaled, basepoint-normalized copies of `s` at `point`, one per scale,
/// with the bmttb check for `params` and the doubling profile attached.
///
/// With `window = Some(w)` each copy keeps only the points within rescaled
/// distance `w` of `point` (`w ≥ 1`, so the normalizing ball is kept); this
/// bounds memory on large hosts and changes nothing for covers of `B̄(p, R)`
/// when `w ≥ R + r`.
pub fn tangent_sequence(
    s: &PointedSpace,
    point: usize,
    scales: &[f64],
    params: &[(f64, f64, f64)],
    window: Option<f64>,
) -> Result<TangentReport> {
    s.check_index(point)?;
    if let Some(w) = window {
        if !(w >= 1.0) {
            return Err(MmError::Parameter(format!("window must be at least 1, got {w}")));
        }
    }
    let doubling = pointwise_doubling_profile(s, point, scales)?;
    let spaces: Vec<PointedSpace> = scales
        .par_iter()
        .map(|&r| {
            if !(r > 0.0) {
                return Err(MmError::NonPositiveScale(r));
            }
            let local = match window {
                Some(w) => {
                    let keep: IndexSet = ball_unchecked(s, point, w * r, BallKind::Closed);
                    restrict(s, &keep, point)?
                }
                None => s.with_base(point)?,
            };
            normalize_at_basepoint(&local, r)
        })
        .collect::<Result<_>>()?;
    let bmttb = bmttb_check(&spaces, params)?;
    Ok(TangentReport { spaces, doubling, bmttb })
}

/// Mass of `μ` outside `set`.
pub fn mass_outside(mu: &Measure, set: &IndexSet) -> f64 {
    (0..mu.len()).filter(|&i| !set.contains(i)).map(|i| mu.weight[i]).sum()
}
