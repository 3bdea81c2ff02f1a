//! Deterministic generators for the worked examples and a few standard test
//! geometries, each with the quantitative facts it is known to satisfy.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::category::{SystemKind, SystemOfSpaces};
use crate::error::{MmError, Result};
use crate::mmspace::{Measure, PointMap, PointedSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Stated in the source literature.
    Paper,
    /// Computed independently from the construction.
    Derived,
    Trivial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fact {
    pub description: String,
    pub expected: f64,
    pub provenance: Provenance,
}

impl Fact {
    fn new(description: impl Into<String>, expected: f64, provenance: Provenance) -> Self {
        Fact { description: description.into(), expected, provenance }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fixture<T> {
    pub name: String,
    pub params: serde_json::Value,
    pub value: T,
    pub facts: Vec<Fact>,
}

/// `i` points at mutual distance 1, each of mass `1/i`, based at the first.
pub fn gen_uniform_simplex(i: usize) -> Result<PointedSpace> {
    if i == 0 {
        return Err(MmError::Parameter("simplex needs at least one point".into()));
    }
    PointedSpace::from_fn(i, vec![1.0 / i as f64; i], 0, |a, b| if a == b { 0.0 } else { 1.0 })
}

pub fn simplex_fixture(i: usize) -> Result<Fixture<PointedSpace>> {
    let value = gen_uniform_simplex(i)?;
    let facts = vec![
        Fact::new("mass of the open unit ball at the basepoint", 1.0 / i as f64, Provenance::Paper),
        Fact::new("mass of the open ball of radius 2 at the basepoint", 1.0, Provenance::Paper),
        Fact::new("fewest unit balls leaving mass at most 1/2 outside", (i as f64 / 2.0).ceil(), Provenance::Paper),
    ];
    Ok(Fixture { name: "simplex".into(), params: serde_json::json!({ "i": i }), value, facts })
}

/// Index of `e_j/k` (both 1-based) in a stage with `k ≤ big_k`.
pub fn inverse_example_index(j: usize, k: usize, big_k: usize) -> usize {
    (j - 1) * big_k + (k - 1)
}

/// Stage `i` (1-based) of the inverse example: points `e_j/k` for
/// `j ≤ 2^i`, `k ≤ K` in `ℓ∞`, with mass `2^{-k}2^{-i}` and basepoint `e_1/i`.
pub fn inverse_example_stage(i: usize, big_k: usize) -> Result<PointedSpace> {
    if i == 0 || i > big_k || i >= 32 || big_k > 1000 {
        return Err(MmError::Parameter(format!("need 1 <= i <= K <= 1000 and i < 32, got i={i}, K={big_k}")));
    }
    let axes = 1usize << i;
    let n = axes * big_k;
    let mut axis = Vec::with_capacity(n);
    let mut inv = Vec::with_capacity(n);
    let mut weight = Vec::with_capacity(n);
    for j in 1..=axes {
        for k in 1..=big_k {
            axis.push((j - 1) as u32);
            inv.push(1.0 / k as f64);
            weight.push(2f64.powi(-(k as i32) - i as i32));
        }
    }
    PointedSpace::from_scaled_basis(axis, inv, weight, inverse_example_index(1, i, big_k))
}

/// Stages `1..=i_max` of the inverse example with bonds
/// `e_{2j−1}/k, e_{2j}/k ↦ e_j/k`.
pub fn gen_inverse_example(i_max: usize, big_k: usize) -> Result<SystemOfSpaces> {
    if i_max < 2 || i_max > big_k {
        return Err(MmError::Parameter(format!("need 2 <= i_max <= K, got i_max={i_max}, K={big_k}")));
    }
    let spaces: Vec<PointedSpace> = (1..=i_max).map(|i| inverse_example_stage(i, big_k)).collect::<Result<_>>()?;
    let bonds = (1..i_max)
        .map(|i| {
            let img = (1..=1usize << (i + 1))
                .flat_map(|j| (1..=big_k).map(move |k| inverse_example_index(j.div_ceil(2), k, big_k)))
                .collect();
            PointMap::new(img)
        })
        .collect();
    SystemOfSpaces::new(SystemKind::Inverse, spaces, bonds)
}

pub fn inverse_example_fixture(i_max: usize, big_k: usize) -> Result<Fixture<SystemOfSpaces>> {
    let value = gen_inverse_example(i_max, big_k)?;
    let mut facts = vec![Fact::new("total mass of every stage", 1.0 - 2f64.powi(-(big_k as i32)), Provenance::Derived)];
    for q in 2..=4 {
        facts.push(Fact::new(
            format!("upper bound on the basepoint ball mass at radius 1/{q}, every stage"),
            2f64.powi(2 - q),
            Provenance::Paper,
        ));
    }
    Ok(Fixture { name: "inverse-example".into(), params: serde_json::json!({ "i_max": i_max, "K": big_k }), value, facts })
}

/// Index of `e_j/n` (both 1-based) in the Prokhorov host; the origin is 0.
pub fn prokhorov_index(j: usize, n: usize, big_j: usize) -> usize {
    1 + (n - 1) * big_j + (j - 1)
}

/// Host `{0} ∪ {e_j/n : j ≤ J, n ≤ N}` in `ℓ∞` with uniform mass and
/// basepoint 0, and the measures `(1/k)Σ_{j≤k} δ_{e_j/n}` in `(n, k)`
/// lexicographic order.
pub fn gen_prokhorov_sharp(big_j: usize, big_n: usize) -> Result<(PointedSpace, Vec<Measure>)> {
    if big_j == 0 || big_n == 0 {
        return Err(MmError::Parameter("J and N must be positive".into()));
    }
    let n_pts = 1 + big_j * big_n;
    let mut axis = vec![0u32];
    let mut inv = vec![0.0];
    for n in 1..=big_n {
        for j in 1..=big_j {
            axis.push((j - 1) as u32);
            inv.push(1.0 / n as f64);
        }
    }
    let host = PointedSpace::from_scaled_basis(axis, inv, vec![1.0 / n_pts as f64; n_pts], 0)?;
    let mut seq = Vec::with_capacity(big_j * big_n);
    for n in 1..=big_n {
        for k in 1..=big_j {
            let mut w = vec![0.0; n_pts];
            for j in 1..=k {
                w[prokhorov_index(j, n, big_j)] = 1.0 / k as f64;
            }
            seq.push(Measure::new(w));
        }
    }
    Ok((host, seq))
}

pub fn prokhorov_fixture(big_j: usize, big_n: usize) -> Result<Fixture<(PointedSpace, Vec<Measure>)>> {
    let value = gen_prokhorov_sharp(big_j, big_n)?;
    let facts = (2..=big_n)
        .map(|n| Fact::new(format!("tent gap to the value at 0 for n = {n}"), 2.0 / n as f64, Provenance::Paper))
        .collect();
    Ok(Fixture { name: "prokhorov".into(), params: serde_json::json!({ "J": big_j, "N": big_n }), value, facts })
}

/// Evenly spaced grid on `[0, extent]` with counting measure, based at the
/// middle point.
pub fn gen_doubling_grid(points: usize, extent: f64) -> Result<PointedSpace> {
    if points < 3 || points % 2 == 0 {
        return Err(MmError::Parameter(format!("grid needs an odd number of points >= 3, got {points}")));
    }
    if !(extent > 0.0 && extent.is_finite()) {
        return Err(MmError::Parameter(format!("extent must be positive, got {extent}")));
    }
    let h = extent / (points - 1) as f64;
    PointedSpace::from_fn(points, vec![1.0; points], points / 2, |a, b| a.abs_diff(b) as f64 * h)
}

pub fn grid_fixture(points: usize, extent: f64) -> Result<Fixture<PointedSpace>> {
    let value = gen_doubling_grid(points, extent)?;
    let facts = vec![
        Fact::new("grid step", extent / (points - 1) as f64, Provenance::Trivial),
        Fact::new("bound on the doubling ratio at the base for 4h <= r <= extent/4", 2.5, Provenance::Derived),
    ];
    Ok(Fixture { name: "grid".into(), params: serde_json::json!({ "points": points, "extent": extent }), value, facts })
}

/// Grid spacing of the merging chain.
pub const MERGE_STEP: f64 = 1.0 / 64.0;

/// Direct system of line grids with `2^{6−i}+1` points at spacing `1/64`
/// (`i = 0..=5`), bonds `k ↦ ⌊k/2⌋`, masses pushed forward from `1/64` per
/// point, based at the middle. The spacing stays fixed, because halving a
/// grid of fixed extent would stretch neighbouring pairs.
pub fn gen_merging_chain() -> Result<SystemOfSpaces> {
    let mut spaces = Vec::new();
    let mut bonds = Vec::new();
    let mut weight = vec![MERGE_STEP; 65];
    for i in 0..=5u32 {
        let n = (1usize << (6 - i)) + 1;
        spaces.push(PointedSpace::from_fn(n, weight.clone(), n / 2, |a, b| a.abs_diff(b) as f64 * MERGE_STEP)?);
        if i < 5 {
            let bond = PointMap::new((0..n).map(|k| k / 2).collect());
            let mut next = vec![0.0; n / 2 + 1];
            for (k, w) in weight.iter().enumerate() {
                next[k / 2] += w;
            }
            bonds.push(bond);
            weight = next;
        }
    }
    SystemOfSpaces::new(SystemKind::Direct, spaces, bonds)
}

fn shortest_paths(d: &mut [Vec<u64>]) {
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

/// Random metric on `n` points with integer distances (shortest paths over
/// random edge lengths in `1..=20`) and weights in `{1,…,8}/8`, some zeroed
/// off the basepoint.
pub fn random_space(rng: &mut impl Rng, n: usize) -> Result<PointedSpace> {
    if n == 0 {
        return Err(MmError::Parameter("space needs at least one point".into()));
    }
    let mut d = vec![vec![0u64; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let w = rng.gen_range(1..=20);
            d[i][j] = w;
            d[j][i] = w;
        }
    }
    shortest_paths(&mut d);
    let base = rng.gen_range(0..n);
    let weight = (0..n)
        .map(|i| if i != base && rng.gen_bool(0.15) { 0.0 } else { rng.gen_range(1..=8) as f64 / 8.0 })
        .collect();
    PointedSpace::from_fn(n, weight, base, |i, j| d[i][j] as f64)
}

/// A seeded random direct system. Each bond merges a few support classes,
/// takes the quotient path metric scaled by `c ∈ {13,…,16}/16`, may add a
/// far point, and adds dyadic mass on top of the pushforward. All numbers
/// are dyadic, so every check on it is exact.
pub fn random_direct_system(seed: u64, stages: usize) -> Result<SystemOfSpaces> {
    if stages == 0 {
        return Err(MmError::Parameter("need at least one stage".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n0 = rng.gen_range(3..=8);
    let first = random_space(&mut rng, n0)?;
    // Scale integer distances by 2^10 so the 16ths below stay exact.
    let mut dist: Vec<Vec<u64>> = (0..n0).map(|i| (0..n0).map(|j| (first.d(i, j) as u64) << 10).collect()).collect();
    let mut spaces = vec![first];
    let mut bonds = Vec::new();
    for _ in 1..stages {
        let prev = spaces.last().unwrap();
        let n = prev.n();
        // Merge each point into a random earlier one with small probability.
        let mut class: Vec<usize> = (0..n).collect();
        for x in 1..n {
            if rng.gen_bool(0.25) {
                class[x] = class[rng.gen_range(0..x)];
            }
        }
        let mut ids: Vec<usize> = class.clone();
        ids.sort_unstable();
        ids.dedup();
        let to_new: Vec<usize> = class.iter().map(|c| ids.binary_search(c).unwrap()).collect();
        let m = ids.len();
        let mut q = vec![vec![u64::MAX / 4; m]; m];
        for a in 0..n {
            for b in 0..n {
                let (u, v) = (to_new[a], to_new[b]);
                if u == v {
                    q[u][v] = 0;
                } else {
                    q[u][v] = q[u][v].min(dist[a][b]);
                }
            }
        }
        shortest_paths(&mut q);
        let c = rng.gen_range(13..=16u64);
        for (u, row) in q.iter_mut().enumerate() {
            for (v, x) in row.iter_mut().enumerate() {
                if u != v {
                    *x = (*x / 16 * c).max(1);
                }
            }
        }
        // Flooring can break the triangle inequality by one unit; re-close it.
        shortest_paths(&mut q);
        let mut weight = vec![0.0; m];
        for x in 0..n {
            weight[to_new[x]] += prev.weights()[x];
        }
        for w in weight.iter_mut() {
            *w += [0.0, 0.125, 0.25][rng.gen_range(0..3)];
        }
        let mut m_total = m;
        if rng.gen_bool(0.5) {
            let far = q.iter().flatten().copied().max().unwrap_or(0).max(1 << 10);
            for row in q.iter_mut() {
                row.push(far);
            }
            let mut last = vec![far; m + 1];
            last[m] = 0;
            q.push(last);
            weight.push(0.25);
            m_total += 1;
        }
        let base = to_new[prev.base()];
        let space = PointedSpace::from_fn(m_total, weight, base, |i, j| q[i][j] as f64 / 1024.0)?;
        bonds.push(PointMap::new(to_new));
        spaces.push(space);
        dist = q;
    }
    SystemOfSpaces::new(SystemKind::Direct, spaces, bonds)
}
