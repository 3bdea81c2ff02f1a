//! Morphisms of pointed metric measure spaces, finite prefixes of direct and
//! inverse systems, and stage-wise direct and inverse limits.

use serde::{Deserialize, Serialize};

use crate::error::{MmError, Result};
use crate::mmspace::{ball_unchecked, pushforward, restrict, support, BallKind, IndexSet, PointMap, PointedSpace};
use crate::verdict::{Evidence, Verdict};

/// Absolute tolerance for the atomwise pushforward inequality.
pub const PUSHFORWARD_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    Direct,
    Inverse,
}

/// The three morphism conditions checked separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorphismCheck {
    pub basepoint: Verdict,
    pub lipschitz: Verdict,
    pub pushforward: Verdict,
    /// Largest `(f_*𝔪_X)(y) − 𝔪_Y(y)`.
    pub max_excess: f64,
    /// `f_*𝔪_X = 𝔪_Y` bit for bit.
    pub pushforward_equal: bool,
}

impl MorphismCheck {
    pub fn verdict(&self) -> Verdict {
        let reasons: Vec<&str> = [&self.basepoint, &self.lipschitz, &self.pushforward].iter().filter_map(|v| v.reason()).collect();
        if reasons.is_empty() {
            Verdict::Pass
        } else {
            Verdict::fail(reasons.join("; "))
        }
    }
}

fn require_object(s: &PointedSpace, what: &str) -> Result<()> {
    if s.weights()[s.base()] > 0.0 {
        Ok(())
    } else {
        Err(MmError::NotAnObject(format!("{what} basepoint {} has zero mass", s.base())))
    }
}

fn check_morphism_inner(f: &PointMap, x: &PointedSpace, y: &PointedSpace, scan_lipschitz: bool) -> Result<MorphismCheck> {
    f.check_shape(x, y)?;
    require_object(x, "source")?;
    require_object(y, "target")?;
    let basepoint = if f.apply(x.base()) == y.base() {
        Verdict::Pass
    } else {
        Verdict::fail(format!("(i) basepoint {} maps to {}, not {}", x.base(), f.apply(x.base()), y.base()))
    };
    let mut lipschitz = Verdict::Pass;
    if scan_lipschitz {
        let spt = support(x).into_vec();
        'outer: for (k, &a) in spt.iter().enumerate() {
            let fa = f.apply(a);
            for &b in &spt[k + 1..] {
                if y.d(fa, f.apply(b)) > x.d(a, b) {
                    lipschitz = Verdict::fail(format!("(ii) not 1-Lipschitz at ({a},{b})"));
                    break 'outer;
                }
            }
        }
    }
    let pushed = pushforward(&x.measure(), f, y.n())?;
    let mut max_excess = f64::NEG_INFINITY;
    let mut witness = None;
    for (j, (p, m)) in pushed.weight.iter().zip(y.weights()).enumerate() {
        let excess = p - m;
        if excess > max_excess {
            max_excess = excess;
        }
        if excess > PUSHFORWARD_TOL && witness.is_none() {
            witness = Some(j);
        }
    }
    let pushforward = match witness {
        Some(j) => Verdict::fail(format!("(iii) pushforward exceeds target at atom {j}")),
        None => Verdict::Pass,
    };
    let pushforward_equal = pushed.weight == y.weights();
    Ok(MorphismCheck { basepoint, lipschitz, pushforward, max_excess, pushforward_equal })
}

/// Checks the three morphism conditions: basepoint preservation, 1-Lipschitz
/// on the support (exact comparisons), and `f_*𝔪_X ≤ 𝔪_Y` atomwise up to
/// `1e-12`. Both spaces must have their basepoint in the support.
pub fn check_morphism(f: &PointMap, x: &PointedSpace, y: &PointedSpace) -> Result<MorphismCheck> {
    check_morphism_inner(f, x, y, true)
}

pub fn verify_morphism(f: &PointMap, x: &PointedSpace, y: &PointedSpace) -> Result<Verdict> {
    Ok(check_morphism(f, x, y)?.verdict())
}

/// A finite prefix of a direct system (`bonds[i]: X_i → X_{i+1}`) or an inverse
/// system (`bonds[i]: X_{i+1} → X_i`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemOfSpaces {
    pub kind: SystemKind,
    pub spaces: Vec<PointedSpace>,
    pub bonds: Vec<PointMap>,
}

impl SystemOfSpaces {
    pub fn new(kind: SystemKind, spaces: Vec<PointedSpace>, bonds: Vec<PointMap>) -> Result<Self> {
        if spaces.is_empty() {
            return Err(MmError::Shape("a system needs at least one space".into()));
        }
        if bonds.len() + 1 != spaces.len() {
            return Err(MmError::Shape(format!("{} spaces need {} bonds, got {}", spaces.len(), spaces.len() - 1, bonds.len())));
        }
        for (i, b) in bonds.iter().enumerate() {
            match kind {
                SystemKind::Direct => b.check_shape(&spaces[i], &spaces[i + 1])?,
                SystemKind::Inverse => b.check_shape(&spaces[i + 1], &spaces[i])?,
            }
        }
        Ok(SystemOfSpaces { kind, spaces, bonds })
    }

    pub fn len(&self) -> usize {
        self.spaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spaces.is_empty()
    }

    /// `φ_{ij}: X_i → X_j` for a direct system or `P_{ij}: X_j → X_i` for an
    /// inverse one (`i ≤ j`), composed from the bonds; `i = j` is the identity.
    pub fn composite(&self, i: usize, j: usize) -> Result<PointMap> {
        if i > j || j >= self.len() {
            return Err(MmError::Parameter(format!("need i <= j < {}, got ({i}, {j})", self.len())));
        }
        Ok(match self.kind {
            SystemKind::Direct => (i..j).fold(PointMap::identity(self.spaces[i].n()), |acc, k| acc.then(&self.bonds[k])),
            SystemKind::Inverse => (i..j).rev().fold(PointMap::identity(self.spaces[j].n()), |acc, k| acc.then(&self.bonds[k])),
        })
    }

    fn endpoints(&self, i: usize, j: usize) -> (&PointedSpace, &PointedSpace) {
        match self.kind {
            SystemKind::Direct => (&self.spaces[i], &self.spaces[j]),
            SystemKind::Inverse => (&self.spaces[j], &self.spaces[i]),
        }
    }

    /// The first `n` stages.
    pub fn prefix(&self, n: usize) -> Result<SystemOfSpaces> {
        if n == 0 || n > self.len() {
            return Err(MmError::Parameter(format!("prefix length {n} outside 1..={}", self.len())));
        }
        Ok(SystemOfSpaces { kind: self.kind, spaces: self.spaces[..n].to_vec(), bonds: self.bonds[..n - 1].to_vec() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCheck {
    pub i: usize,
    pub j: usize,
    pub check: MorphismCheck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemCheck {
    pub verdict: Verdict,
    pub pairs: Vec<PairCheck>,
}

/// Checks every bond and every composite `(i < j)`.
///
/// Bonds get the full pairwise Lipschitz scan. For longer composites the
/// Lipschitz inequality follows from the chain of bond inequalities, which
/// compare the very same stored distances, so it is exact and not rescanned;
/// basepoints and pushforwards are recomputed for every composite.
pub fn check_system(sys: &SystemOfSpaces) -> Result<SystemCheck> {
    let mut pairs = Vec::new();
    let mut verdict = Verdict::Pass;
    for j in 1..sys.len() {
        for i in 0..j {
            let f = sys.composite(i, j)?;
            let (src, dst) = sys.endpoints(i, j);
            let mut check = check_morphism_inner(&f, src, dst, j == i + 1)?;
            if j > i + 1 {
                check.lipschitz = chain_lipschitz(&pairs, i, j);
            }
            if let Some(reason) = check.verdict().reason() {
                verdict = verdict.and(Verdict::fail(format!("stages {i}->{j}: {reason}")));
            }
            pairs.push(PairCheck { i, j, check });
        }
    }
    Ok(SystemCheck { verdict, pairs })
}

fn chain_lipschitz(pairs: &[PairCheck], i: usize, j: usize) -> Verdict {
    let bad = pairs.iter().find(|p| p.j == p.i + 1 && p.i >= i && p.j <= j && !p.check.lipschitz.is_pass());
    match bad {
        Some(p) => Verdict::fail(format!("(ii) bond {}->{} is not 1-Lipschitz", p.i, p.j)),
        None => Verdict::Pass,
    }
}

pub fn verify_system(sys: &SystemOfSpaces) -> Result<Verdict> {
    Ok(check_system(sys)?.verdict)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectReport {
    /// Smallest `d_{N−2}(x, y) − d_{N−1}(φx, φy)` over support pairs.
    pub min_decrement: Option<f64>,
    /// `columns[k][i] = 𝔪_i(B(p_i, R_k))`.
    pub radii: Vec<f64>,
    pub columns: Vec<Vec<f64>>,
    pub columns_monotone: bool,
    pub stage_mass: Vec<f64>,
    pub existence: Evidence,
    pub existence_reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectLimit {
    pub space: PointedSpace,
    pub maps_into_limit: Vec<PointMap>,
    /// `classes[x]` for each point of the last stage (`None` off the support).
    pub classes: Vec<Option<usize>>,
    pub report: DirectReport,
}

/// Geometric growth factor that marks a ball-mass column as unbounded.
const GROWTH_FACTOR: f64 = 1.5;
/// Number of trailing steps inspected by the existence heuristic.
const GROWTH_STEPS: usize = 3;

/// The stage-`N` shadow of the direct limit: support classes of the last
/// stage (points within `tol` merged), with class masses summed and stage-`N`
/// distances, together with the maps from every earlier stage.
///
/// Existence can only be judged heuristically from a prefix. It is `fail`
/// when some ball-mass column and the total stage mass both grow by at least
/// `1.5×` over each of the last three steps, `pass` when the total stage mass
/// has stopped growing, and `inconclusive` otherwise.
pub fn direct_limit_stage(sys: &SystemOfSpaces, n: usize, tol: f64, radii: &[f64]) -> Result<DirectLimit> {
    if sys.kind != SystemKind::Direct {
        return Err(MmError::Parameter("direct limit needs a direct system".into()));
    }
    let sys = sys.prefix(n)?;
    if let Some(reason) = verify_system(&sys)?.reason() {
        return Err(MmError::Precondition(format!("system invalid: {reason}")));
    }
    if let Some(&r) = radii.iter().find(|&&r| !(r > 0.0)) {
        return Err(MmError::NonPositiveRadius(r));
    }
    let last = &sys.spaces[n - 1];
    let spt = support(last);

    let mut reps: Vec<usize> = Vec::new();
    let mut classes: Vec<Option<usize>> = vec![None; last.n()];
    for x in spt.iter() {
        let c = match reps.iter().position(|&r| last.d(r, x) <= tol) {
            Some(c) => c,
            None => {
                reps.push(x);
                reps.len() - 1
            }
        };
        classes[x] = Some(c);
    }
    let base_class = classes[last.base()].ok_or_else(|| MmError::NotAnObject("last stage basepoint has zero mass".into()))?;
    let mut weight = vec![0.0; reps.len()];
    for x in spt.iter() {
        if let Some(c) = classes[x] {
            weight[c] += last.weights()[x];
        }
    }
    let rep_set = IndexSet::from_unsorted(reps.clone());
    let restricted = restrict(last, &rep_set, reps[base_class])?;
    // `restrict` orders points by index; reps are increasing, so positions agree.
    let space = restricted.with_weights(weight)?;

    let mut maps_into_limit = Vec::new();
    for i in 0..n {
        let phi = sys.composite(i, n - 1)?;
        let s = &sys.spaces[i];
        let w = s.weights();
        let img = (0..s.n())
            .map(|x| if w[x] > 0.0 { classes[phi.apply(x)].unwrap_or(base_class) } else { base_class })
            .collect();
        maps_into_limit.push(PointMap::new(img));
    }

    let min_decrement = if n >= 2 {
        let prev = &sys.spaces[n - 2];
        let phi = &sys.bonds[n - 2];
        let sp = support(prev).into_vec();
        let mut m = f64::INFINITY;
        for (k, &a) in sp.iter().enumerate() {
            for &b in &sp[k + 1..] {
                let dec = prev.d(a, b) - last.d(phi.apply(a), phi.apply(b));
                if dec < -10.0 * f64::EPSILON * prev.d(a, b) {
                    return Err(MmError::NumericDirectSystem(format!("distance grows between stages at ({a},{b})")));
                }
                m = m.min(dec);
            }
        }
        Some(if m.is_finite() { m } else { 0.0 })
    } else {
        None
    };

    let columns: Vec<Vec<f64>> = radii
        .iter()
        .map(|&r| sys.spaces.iter().map(|s| ball_unchecked(s, s.base(), r, BallKind::Open).iter().map(|x| s.weights()[x]).sum()).collect())
        .collect();
    let columns_monotone = columns.iter().all(|c| c.windows(2).all(|w| w[1] >= w[0] - PUSHFORWARD_TOL));
    let stage_mass: Vec<f64> = sys.spaces.iter().map(|s| s.total_mass()).collect();

    let grows = |c: &[f64]| {
        c.len() > GROWTH_STEPS && c[c.len() - GROWTH_STEPS - 1..].windows(2).all(|w| w[0] > 0.0 && w[1] >= GROWTH_FACTOR * w[0])
    };
    let (existence, existence_reason) = if columns.iter().any(|c| grows(c)) && grows(&stage_mass) {
        (Evidence::FailCertified, "ball masses grow geometrically with the total mass: unbounded profile".to_string())
    } else if n >= 2 && stage_mass[n - 1] <= stage_mass[n - 2] {
        (Evidence::PassEvidence, "total mass stopped growing; ball masses are bounded on the prefix".to_string())
    } else {
        (Evidence::Inconclusive, "prefix does not settle bounded finiteness".to_string())
    };

    Ok(DirectLimit {
        space,
        maps_into_limit,
        classes,
        report: DirectReport {
            min_decrement,
            radii: radii.to_vec(),
            columns,
            columns_monotone,
            stage_mass,
            existence,
            existence_reason,
        },
    })
}

/// Commuting-triangle check between the stage-`N` and stage-`N+1` limits: the
/// class map induced by the bond `N−1 → N` must carry each stage map into
/// the stage map of the longer prefix, exactly on indices.
pub fn direct_limit_stability(sys: &SystemOfSpaces, n: usize, tol: f64) -> Result<bool> {
    if n + 1 > sys.len() {
        return Err(MmError::Parameter(format!("need at least {} stages", n + 1)));
    }
    let a = direct_limit_stage(sys, n, tol, &[])?;
    let b = direct_limit_stage(sys, n + 1, tol, &[])?;
    let bond = &sys.bonds[n - 1];
    let reps: Vec<usize> = {
        let mut r = vec![usize::MAX; a.space.n()];
        for (x, c) in a.classes.iter().enumerate() {
            if let Some(c) = *c {
                if r[c] == usize::MAX {
                    r[c] = x;
                }
            }
        }
        r
    };
    let class_map: Vec<Option<usize>> = reps.iter().map(|&x| b.classes[bond.apply(x)]).collect();
    for i in 0..n {
        let s = &sys.spaces[i];
        for x in (0..s.n()).filter(|&x| s.weights()[x] > 0.0) {
            if class_map[a.maps_into_limit[i].apply(x)] != Some(b.maps_into_limit[i].apply(x)) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// A bond-compatible tuple `(x_1, …, x_N)` of support points.
pub type Thread = Vec<usize>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreadsReport {
    pub threads: Vec<Thread>,
    /// Per stage, the support atoms that no thread passes through.
    pub uncovered: Vec<usize>,
}

/// All threads through the first `n` stages, one per support atom of stage
/// `n`, ordered by that atom's index.
pub fn threads(sys: &SystemOfSpaces, n: usize) -> Result<ThreadsReport> {
    if sys.kind != SystemKind::Inverse {
        return Err(MmError::Parameter("threads need an inverse system".into()));
    }
    let sys = sys.prefix(n)?;
    let last = &sys.spaces[n - 1];
    let maps: Vec<PointMap> = (0..n).map(|i| sys.composite(i, n - 1)).collect::<Result<_>>()?;
    let mut hit: Vec<Vec<bool>> = sys.spaces.iter().map(|s| vec![false; s.n()]).collect();
    let mut out = Vec::new();
    for x in support(last).iter() {
        let t: Thread = maps.iter().map(|m| m.apply(x)).collect();
        if t.iter().enumerate().all(|(i, &xi)| sys.spaces[i].weights()[xi] > 0.0) {
            for (i, &xi) in t.iter().enumerate() {
                hit[i][xi] = true;
            }
            out.push(t);
        }
    }
    let uncovered = sys
        .spaces
        .iter()
        .zip(&hit)
        .map(|(s, h)| (0..s.n()).filter(|&x| s.weights()[x] > 0.0 && !h[x]).count())
        .collect();
    Ok(ThreadsReport { threads: out, uncovered })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InverseReport {
    pub radii: Vec<f64>,
    /// `base_columns[k][i] = 𝔪_i(B(p_i, r_k))`.
    pub base_columns: Vec<Vec<f64>>,
    /// Whether `P_{i,N}(p_N) = p_i` for every stage.
    pub basepoint_thread: bool,
    /// First stage where the basepoints disagree.
    pub basepoint_mismatch: Option<usize>,
    pub thread_count: usize,
    pub uncovered: Vec<usize>,
    /// `thread_columns[t][k][i] = 𝔪_i(B(x_i, r_k))` when requested.
    pub thread_columns: Option<Vec<Vec<Vec<f64>>>>,
    pub existence: Evidence,
    pub existence_reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InverseLimit {
    /// Threads with stage-`N` distances and stage-`N` atom weights (a lower
    /// envelope of the non-increasing stage masses); `None` when there are no
    /// threads.
    pub space: Option<PointedSpace>,
    /// `projections[i]` sends thread `t` to its stage-`i` point.
    pub projections: Vec<PointMap>,
    pub report: InverseReport,
}

/// The stage-`N` shadow of the inverse limit.
///
/// Bonds must be 1-Lipschitz with dominated pushforwards. A missing
/// basepoint thread is reported as a certified failure rather than an error.
/// Otherwise existence is `fail` when a basepoint-ball mass column is
/// non-increasing and drops below `tol`, `pass` when every column keeps at
/// least half of its tail-start value, and `inconclusive` otherwise.
pub fn inverse_limit_stage(sys: &SystemOfSpaces, n: usize, tol: f64, radii: &[f64], thread_columns: bool) -> Result<InverseLimit> {
    if sys.kind != SystemKind::Inverse {
        return Err(MmError::Parameter("inverse limit needs an inverse system".into()));
    }
    if n < 2 {
        return Err(MmError::Parameter("inverse limit needs at least two stages".into()));
    }
    if let Some(&r) = radii.iter().find(|&&r| !(r > 0.0)) {
        return Err(MmError::NonPositiveRadius(r));
    }
    let sys = sys.prefix(n)?;
    let check = check_system(&sys)?;
    if let Some(p) = check.pairs.iter().find(|p| !p.check.lipschitz.is_pass() || !p.check.pushforward.is_pass()) {
        let reason = p.check.verdict().reason().unwrap_or_default().to_string();
        return Err(MmError::Precondition(format!("stages {}->{}: {reason}", p.i, p.j)));
    }
    let last = &sys.spaces[n - 1];
    let to_last: Vec<PointMap> = (0..n).map(|i| sys.composite(i, n - 1)).collect::<Result<_>>()?;
    let basepoint_mismatch = (0..n).find(|&i| to_last[i].apply(last.base()) != sys.spaces[i].base());

    let th = threads(&sys, n)?;
    let atoms: Vec<usize> = th.threads.iter().map(|t| t[n - 1]).collect();
    let space = if atoms.is_empty() {
        None
    } else {
        let set = IndexSet::from_unsorted(atoms.clone());
        // Thread distances are stage-N distances: bonds are 1-Lipschitz, so
        // the stage-wise distances along two threads are non-decreasing.
        Some(restrict(last, &set, last.base())?)
    };
    let projections: Vec<PointMap> = (0..n).map(|i| PointMap::new(th.threads.iter().map(|t| t[i]).collect())).collect();

    let base_columns: Vec<Vec<f64>> = radii
        .iter()
        .map(|&r| sys.spaces.iter().map(|s| ball_unchecked(s, s.base(), r, BallKind::Open).iter().map(|x| s.weights()[x]).sum()).collect())
        .collect();

    let thread_columns = thread_columns.then(|| {
        // Ball masses around every atom, stage by stage, then read off per thread.
        let per_stage: Vec<Vec<Vec<f64>>> = sys
            .spaces
            .iter()
            .map(|s| {
                radii
                    .iter()
                    .map(|&r| (0..s.n()).map(|x| ball_unchecked(s, x, r, BallKind::Open).iter().map(|y| s.weights()[y]).sum()).collect())
                    .collect()
            })
            .collect();
        th.threads
            .iter()
            .map(|t| (0..radii.len()).map(|k| (0..n).map(|i| per_stage[i][k][t[i]]).collect()).collect())
            .collect()
    });

    let (existence, existence_reason) = if let Some(i) = basepoint_mismatch {
        (
            Evidence::FailCertified,
            format!("basepoint thread absent: the stage-{} basepoint does not project to the basepoint of stage {i}", n - 1),
        )
    } else if let Some(k) = base_columns
        .iter()
        .position(|c| c.windows(2).all(|w| w[1] <= w[0]) && c.iter().any(|&m| m < tol))
    {
        (Evidence::FailCertified, format!("basepoint-ball mass at radius {} drops below {tol}", radii[k]))
    } else if base_columns.iter().all(|c| {
        let start = c[c.len() / 2];
        c[c.len() - 1] >= 0.5 * start && start > tol
    }) {
        (Evidence::PassEvidence, "basepoint-ball masses stay bounded away from zero on the prefix".to_string())
    } else {
        (Evidence::Inconclusive, "basepoint-ball masses decay without reaching the tolerance".to_string())
    };

    Ok(InverseLimit {
        space,
        projections,
        report: InverseReport {
            radii: radii.to_vec(),
            base_columns,
            basepoint_thread: basepoint_mismatch.is_none(),
            basepoint_mismatch,
            thread_count: th.threads.len(),
            uncovered: th.uncovered,
            thread_columns,
            existence,
            existence_reason,
        },
    })
}
