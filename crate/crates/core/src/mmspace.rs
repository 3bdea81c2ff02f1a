//! Finite pointed metric measure spaces and the primitive ball/measure
//! operations the rest of the crate is built on.
//!
//! A [`PointedSpace`] stores a dense distance matrix, one atomic weight per
//! point and a basepoint. Spaces are immutable once built; every operation
//! returns a new value.

use serde::{Deserialize, Serialize};

use crate::error::{MmError, Result};

/// Relative tolerance used by the triangle-inequality check.
pub const TRIANGLE_REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BallKind {
    Open,
    Closed,
}

/// Sorted list of distinct point indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize)]
#[serde(transparent)]
pub struct IndexSet(Vec<usize>);

impl<'de> Deserialize<'de> for IndexSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Vec::<usize>::deserialize(d).map(IndexSet::from_unsorted)
    }
}

impl IndexSet {
    pub fn empty() -> Self {
        IndexSet(Vec::new())
    }

    /// Builds a set from arbitrary indices, sorting and removing duplicates.
    pub fn from_unsorted(mut idx: Vec<usize>) -> Self {
        idx.sort_unstable();
        idx.dedup();
        IndexSet(idx)
    }

    pub fn full(n: usize) -> Self {
        IndexSet((0..n).collect())
    }

    pub fn singleton(i: usize) -> Self {
        IndexSet(vec![i])
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn is_subset(&self, other: &IndexSet) -> bool {
        self.iter().all(|i| other.contains(i))
    }

    pub fn union(&self, other: &IndexSet) -> IndexSet {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        IndexSet::from_unsorted(v)
    }

    pub fn intersection(&self, other: &IndexSet) -> IndexSet {
        IndexSet(self.iter().filter(|&i| other.contains(i)).collect())
    }

    pub fn difference(&self, other: &IndexSet) -> IndexSet {
        IndexSet(self.iter().filter(|&i| !other.contains(i)).collect())
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }
}

impl FromIterator<usize> for IndexSet {
    fn from_iter<T: IntoIterator<Item = usize>>(iter: T) -> Self {
        IndexSet::from_unsorted(iter.into_iter().collect())
    }
}

/// Nonnegative atomic measure on the points of some host space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measure {
    pub weight: Vec<f64>,
}

impl Measure {
    pub fn new(weight: Vec<f64>) -> Self {
        Measure { weight }
    }

    pub fn zero(n: usize) -> Self {
        Measure { weight: vec![0.0; n] }
    }

    pub fn dirac(n: usize, at: usize) -> Self {
        let mut weight = vec![0.0; n];
        weight[at] = 1.0;
        Measure { weight }
    }

    pub fn len(&self) -> usize {
        self.weight.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weight.is_empty()
    }

    /// Total mass, summed in index order.
    pub fn total(&self) -> f64 {
        self.weight.iter().sum()
    }

    /// Mass of a set of atoms, summed in index order.
    pub fn mass_of(&self, set: &IndexSet) -> f64 {
        set.iter().map(|i| self.weight[i]).sum()
    }

    pub fn scaled(&self, c: f64) -> Measure {
        Measure::new(self.weight.iter().map(|w| w * c).collect())
    }
}

/// Distance storage. Dense matrices are the general case; the scaled-basis
/// form holds points `inv·e_axis` of `ℓ∞` (`inv = 0` is the origin) and
/// evaluates distances symbolically, so very large instances stay small.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Metric {
    Dense { dist: Vec<f64> },
    ScaledBasis { axis: Vec<u32>, inv: Vec<f64> },
}

/// A finite pointed metric measure space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointedSpace {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
    n: usize,
    metric: Metric,
    weight: Vec<f64>,
    base: usize,
}

/// One violated invariant of a [`PointedSpace`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub indices: Vec<usize>,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    NonFinite,
    Diagonal,
    Symmetry,
    Positivity,
    Triangle,
    NegativeWeight,
    Basepoint,
}

/// All invariant violations found by [`validate_space`]. Empty means valid.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl PointedSpace {
    /// Builds a space from a row-major `n × n` distance matrix. Only shapes are
    /// checked here; metric axioms are checked by [`validate_space`].
    pub fn from_flat(dist: Vec<f64>, weight: Vec<f64>, base: usize) -> Result<Self> {
        let n = weight.len();
        if dist.len() != n * n {
            return Err(MmError::Shape(format!(
                "distance matrix has {} entries, expected {}",
                dist.len(),
                n * n
            )));
        }
        if n == 0 {
            return Err(MmError::Shape("space must have at least one point".into()));
        }
        if base >= n {
            return Err(MmError::IndexOutOfRange { index: base, n });
        }
        Ok(PointedSpace { labels: None, n, metric: Metric::Dense { dist }, weight, base })
    }

    /// Points `inv[i]·e_{axis[i]}` with `ℓ∞` distances: `|inv_i − inv_j|` on a
    /// common axis and `max(inv_i, inv_j)` across axes.
    pub fn from_scaled_basis(axis: Vec<u32>, inv: Vec<f64>, weight: Vec<f64>, base: usize) -> Result<Self> {
        let n = weight.len();
        if axis.len() != n || inv.len() != n {
            return Err(MmError::Shape(format!("{} axes and {} scales for {n} weights", axis.len(), inv.len())));
        }
        if n == 0 {
            return Err(MmError::Shape("space must have at least one point".into()));
        }
        if base >= n {
            return Err(MmError::IndexOutOfRange { index: base, n });
        }
        Ok(PointedSpace { labels: None, n, metric: Metric::ScaledBasis { axis, inv }, weight, base })
    }

    pub fn from_rows(rows: &[Vec<f64>], weight: Vec<f64>, base: usize) -> Result<Self> {
        if rows.iter().any(|r| r.len() != rows.len()) {
            return Err(MmError::Shape("distance matrix is not square".into()));
        }
        if rows.len() != weight.len() {
            return Err(MmError::Shape(format!(
                "{} distance rows but {} weights",
                rows.len(),
                weight.len()
            )));
        }
        Self::from_flat(rows.iter().flatten().copied().collect(), weight, base)
    }

    /// Builds a space from a distance function evaluated on index pairs.
    pub fn from_fn(n: usize, weight: Vec<f64>, base: usize, d: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                dist[i * n + j] = if i == j { 0.0 } else { d(i, j) };
            }
        }
        Self::from_flat(dist, weight, base)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(MmError::Shape(format!("{} labels for {} points", labels.len(), self.n)));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn with_weights(&self, weight: Vec<f64>) -> Result<Self> {
        if weight.len() != self.n {
            return Err(MmError::Shape(format!("{} weights for {} points", weight.len(), self.n)));
        }
        Ok(PointedSpace { weight, ..self.clone() })
    }

    pub fn with_base(&self, base: usize) -> Result<Self> {
        if base >= self.n {
            return Err(MmError::IndexOutOfRange { index: base, n: self.n });
        }
        Ok(PointedSpace { base, ..self.clone() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn base(&self) -> usize {
        self.base
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    #[inline]
    pub fn d(&self, i: usize, j: usize) -> f64 {
        match &self.metric {
            Metric::Dense { dist } => dist[i * self.n + j],
            Metric::ScaledBasis { axis, inv } => {
                if i == j {
                    0.0
                } else if axis[i] == axis[j] {
                    (inv[i] - inv[j]).abs()
                } else {
                    inv[i].max(inv[j])
                }
            }
        }
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.n).map(|j| self.d(i, j)).collect()
    }

    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    /// Row-major distance matrix.
    pub fn dense_distances(&self) -> Vec<f64> {
        match &self.metric {
            Metric::Dense { dist } => dist.clone(),
            Metric::ScaledBasis { .. } => (0..self.n * self.n).map(|k| self.d(k / self.n, k % self.n)).collect(),
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weight
    }

    pub fn measure(&self) -> Measure {
        Measure::new(self.weight.clone())
    }

    pub fn total_mass(&self) -> f64 {
        self.weight.iter().sum()
    }

    pub fn diameter(&self) -> f64 {
        match &self.metric {
            Metric::Dense { dist } => dist.iter().copied().fold(0.0, f64::max),
            Metric::ScaledBasis { axis, inv } => {
                let hi = inv.iter().copied().fold(0.0, f64::max);
                if axis.iter().any(|&a| a != axis[0]) {
                    // The largest scale paired with any point on another axis.
                    hi
                } else {
                    hi - inv.iter().copied().fold(f64::INFINITY, f64::min)
                }
            }
        }
    }

    /// Smallest distance between distinct points, `+∞` for a single point.
    pub fn min_positive_distance(&self) -> f64 {
        let mut m = f64::INFINITY;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                m = m.min(self.d(i, j));
            }
        }
        m
    }

    pub fn check_index(&self, i: usize) -> Result<()> {
        if i < self.n {
            Ok(())
        } else {
            Err(MmError::IndexOutOfRange { index: i, n: self.n })
        }
    }

    /// Distance from `i` to the nearest point of `set` (`+∞` if empty).
    pub fn dist_to_set(&self, i: usize, set: &IndexSet) -> f64 {
        set.iter().map(|j| self.d(i, j)).fold(f64::INFINITY, f64::min)
    }
}

/// Checks every metric and measure invariant and lists the violations.
pub fn validate_space(s: &PointedSpace) -> ValidationReport {
    let n = s.n;
    let mut violations = Vec::new();
    let mut push = |kind, indices: Vec<usize>, message: String| {
        violations.push(Violation { kind, indices, message });
    };
    let mut finite = true;
    for i in 0..n {
        for j in 0..n {
            let d = s.d(i, j);
            if !d.is_finite() || d < 0.0 {
                finite = false;
                push(ViolationKind::NonFinite, vec![i, j], format!("distance at ({i},{j}) is not a finite nonnegative real"));
            }
        }
    }
    for i in 0..n {
        if s.d(i, i) != 0.0 {
            push(ViolationKind::Diagonal, vec![i], format!("diagonal nonzero at {i}"));
        }
        for j in (i + 1)..n {
            if s.d(i, j) != s.d(j, i) {
                push(ViolationKind::Symmetry, vec![i, j], format!("symmetry violated at ({i},{j})"));
            }
            if s.d(i, j) <= 0.0 {
                push(ViolationKind::Positivity, vec![i, j], format!("positivity violated at ({i},{j})"));
            }
        }
    }
    if finite {
        let tol = TRIANGLE_REL_TOL * s.diameter();
        for i in 0..n {
            for k in (i + 1)..n {
                let dik = s.d(i, k);
                if let Some(j) = (0..n).find(|&j| dik > s.d(i, j) + s.d(j, k) + tol) {
                    push(
                        ViolationKind::Triangle,
                        vec![i, j, k],
                        format!("triangle violated at ({i},{k}) via {j}"),
                    );
                }
            }
        }
    }
    for (i, &w) in s.weight.iter().enumerate() {
        if !(w.is_finite() && w >= 0.0) {
            push(ViolationKind::NegativeWeight, vec![i], format!("weight at {i} is not a finite nonnegative real"));
        }
    }
    if s.base >= n {
        push(ViolationKind::Basepoint, vec![s.base], "basepoint out of range".into());
    }
    ValidationReport { violations }
}

/// Points of positive weight.
pub fn support(s: &PointedSpace) -> IndexSet {
    IndexSet((0..s.n).filter(|&i| s.weight[i] > 0.0).collect())
}

/// Open or closed ball. Radius comparisons are exact.
pub fn ball(s: &PointedSpace, c: usize, r: f64, kind: BallKind) -> Result<IndexSet> {
    if !(r > 0.0) {
        return Err(MmError::NonPositiveRadius(r));
    }
    s.check_index(c)?;
    Ok(ball_unchecked(s, c, r, kind))
}

pub(crate) fn ball_unchecked(s: &PointedSpace, c: usize, r: f64, kind: BallKind) -> IndexSet {
    let row = s.row(c);
    let inside = |d: f64| match kind {
        BallKind::Open => d < r,
        BallKind::Closed => d <= r,
    };
    IndexSet((0..s.n).filter(|&i| inside(row[i])).collect())
}

/// Open `r`-neighbourhood `{x : dist(x, a) < r}`.
pub fn neighborhood(s: &PointedSpace, a: &IndexSet, r: f64) -> Result<IndexSet> {
    if !(r > 0.0) {
        return Err(MmError::NonPositiveRadius(r));
    }
    Ok(IndexSet((0..s.n).filter(|&i| a.iter().any(|j| s.d(i, j) < r)).collect()))
}

pub fn ball_mass(s: &PointedSpace, c: usize, r: f64, kind: BallKind) -> Result<f64> {
    let b = ball(s, c, r, kind)?;
    Ok(b.iter().map(|i| s.weight[i]).sum())
}

/// Divides every distance by `r`; weights and basepoint are unchanged.
pub fn rescale(s: &PointedSpace, r: f64) -> Result<PointedSpace> {
    if !(r > 0.0) {
        return Err(MmError::NonPositiveScale(r));
    }
    Ok(PointedSpace {
        metric: Metric::Dense { dist: s.dense_distances().iter().map(|d| d / r).collect() },
        ..s.clone()
    })
}

/// Rescales distances by `1/r` and divides the measure by the mass of the open
/// basepoint ball of radius `r`.
pub fn normalize_at_basepoint(s: &PointedSpace, r: f64) -> Result<PointedSpace> {
    let mass = ball_mass(s, s.base, r, BallKind::Open)?;
    if !(mass > 0.0) {
        return Err(MmError::BasepointNotInSupport(r));
    }
    let scaled = rescale(s, r)?;
    Ok(PointedSpace {
        weight: s.weight.iter().map(|w| w / mass).collect(),
        ..scaled
    })
}

/// Induced subspace on `a`, with basepoint `new_base` (an index of `s`).
pub fn restrict(s: &PointedSpace, a: &IndexSet, new_base: usize) -> Result<PointedSpace> {
    if a.is_empty() {
        return Err(MmError::Parameter("cannot restrict to the empty set".into()));
    }
    if let Some(&bad) = a.as_slice().iter().find(|&&i| i >= s.n) {
        return Err(MmError::IndexOutOfRange { index: bad, n: s.n });
    }
    let pos = a
        .as_slice()
        .binary_search(&new_base)
        .map_err(|_| MmError::Parameter(format!("base {new_base} is not in the restriction set")))?;
    let idx = a.as_slice();
    let m = idx.len();
    let metric = match &s.metric {
        Metric::Dense { .. } => {
            let mut dist = Vec::with_capacity(m * m);
            for &i in idx {
                for &j in idx {
                    dist.push(s.d(i, j));
                }
            }
            Metric::Dense { dist }
        }
        Metric::ScaledBasis { axis, inv } => Metric::ScaledBasis {
            axis: idx.iter().map(|&i| axis[i]).collect(),
            inv: idx.iter().map(|&i| inv[i]).collect(),
        },
    };
    let labels = s.labels.as_ref().map(|l| idx.iter().map(|&i| l[i].clone()).collect());
    Ok(PointedSpace {
        labels,
        n: m,
        metric,
        weight: idx.iter().map(|&i| s.weight[i]).collect(),
        base: pos,
    })
}

/// Total map between point sets, stored as source index → target index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PointMap {
    pub img: Vec<usize>,
}

impl PointMap {
    pub fn new(img: Vec<usize>) -> Self {
        PointMap { img }
    }

    pub fn identity(n: usize) -> Self {
        PointMap { img: (0..n).collect() }
    }

    pub fn constant(n: usize, to: usize) -> Self {
        PointMap { img: vec![to; n] }
    }

    pub fn len(&self) -> usize {
        self.img.len()
    }

    pub fn is_empty(&self) -> bool {
        self.img.is_empty()
    }

    #[inline]
    pub fn apply(&self, i: usize) -> usize {
        self.img[i]
    }

    /// `other ∘ self`.
    pub fn then(&self, other: &PointMap) -> PointMap {
        PointMap { img: self.img.iter().map(|&j| other.img[j]).collect() }
    }

    /// Checks that the map is total from `src` into `dst`.
    pub fn check_shape(&self, src: &PointedSpace, dst: &PointedSpace) -> Result<()> {
        if self.img.len() != src.n() {
            return Err(MmError::Shape(format!(
                "map has {} entries but source has {} points",
                self.img.len(),
                src.n()
            )));
        }
        if let Some(&bad) = self.img.iter().find(|&&j| j >= dst.n()) {
            return Err(MmError::IndexOutOfRange { index: bad, n: dst.n() });
        }
        Ok(())
    }

    pub fn image_of(&self, set: &IndexSet) -> IndexSet {
        set.iter().map(|i| self.img[i]).collect()
    }
}

/// Image measure: `weight_Y[j] = Σ_{f(i) = j} weight_X[i]`, summed in source
/// index order.
pub fn pushforward(mu: &Measure, f: &PointMap, n_target: usize) -> Result<Measure> {
    if mu.len() != f.len() {
        return Err(MmError::Shape(format!("measure has {} atoms, map has {} entries", mu.len(), f.len())));
    }
    let mut out = vec![0.0; n_target];
    for (i, &w) in mu.weight.iter().enumerate() {
        let j = f.img[i];
        if j >= n_target {
            return Err(MmError::IndexOutOfRange { index: j, n: n_target });
        }
        out[j] += w;
    }
    Ok(Measure::new(out))
}
