//! JSON documents for spaces, measures, approximations and manifests.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::approx::WeakApprox;
use crate::error::{MmError, Result};
use crate::mmspace::{Measure, Metric, PointMap, PointedSpace};

/// Distances either as a full matrix or as a named generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DistDoc {
    Matrix(Vec<Vec<f64>>),
    Generated { generator: String, #[serde(default)] params: Value },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceDoc {
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    pub dist: DistDoc,
    pub weight: Vec<f64>,
    pub base: usize,
}

#[derive(Deserialize)]
struct ScaledBasisParams {
    axis: Vec<u32>,
    inv: Vec<f64>,
}

#[derive(Deserialize)]
struct LineGridParams {
    step: f64,
}

impl SpaceDoc {
    /// Generators: `linf_scaled_basis {axis, inv}`, `line_grid {step}` and
    /// `simplex {}` (all distinct points at distance 1).
    pub fn to_space(&self) -> Result<PointedSpace> {
        if self.weight.len() != self.n {
            return Err(MmError::Shape(format!("n = {} but {} weights", self.n, self.weight.len())));
        }
        let s = match &self.dist {
            DistDoc::Matrix(rows) => {
                if rows.len() != self.n {
                    return Err(MmError::Shape(format!("n = {} but {} distance rows", self.n, rows.len())));
                }
                PointedSpace::from_rows(rows, self.weight.clone(), self.base)?
            }
            DistDoc::Generated { generator, params } => {
                let bad = |e: serde_json::Error| MmError::Parameter(format!("generator {generator}: {e}"));
                match generator.as_str() {
                    "linf_scaled_basis" => {
                        let p: ScaledBasisParams = serde_json::from_value(params.clone()).map_err(bad)?;
                        PointedSpace::from_scaled_basis(p.axis, p.inv, self.weight.clone(), self.base)?
                    }
                    "line_grid" => {
                        let p: LineGridParams = serde_json::from_value(params.clone()).map_err(bad)?;
                        PointedSpace::from_fn(self.n, self.weight.clone(), self.base, |a, b| a.abs_diff(b) as f64 * p.step)?
                    }
                    "simplex" => PointedSpace::from_fn(self.n, self.weight.clone(), self.base, |a, b| if a == b { 0.0 } else { 1.0 })?,
                    other => return Err(MmError::Parameter(format!("unknown generator {other:?}"))),
                }
            }
        };
        match &self.labels {
            Some(l) => s.with_labels(l.clone()),
            None => Ok(s),
        }
    }

    pub fn from_space(s: &PointedSpace) -> SpaceDoc {
        let dist = match s.metric() {
            Metric::Dense { .. } => DistDoc::Matrix((0..s.n()).map(|i| s.row(i)).collect()),
            Metric::ScaledBasis { axis, inv } => DistDoc::Generated {
                generator: "linf_scaled_basis".into(),
                params: serde_json::json!({ "axis": axis, "inv": inv }),
            },
        };
        SpaceDoc {
            n: s.n(),
            labels: s.labels().map(|l| l.to_vec()),
            dist,
            weight: s.weights().to_vec(),
            base: s.base(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureDoc {
    pub weight: Vec<f64>,
}

impl From<&Measure> for MeasureDoc {
    fn from(m: &Measure) -> Self {
        MeasureDoc { weight: m.weight.clone() }
    }
}

impl From<MeasureDoc> for Measure {
    fn from(m: MeasureDoc) -> Self {
        Measure::new(m.weight)
    }
}

/// A manifest entry: a path relative to the manifest, or the document inline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry<T> {
    File(String),
    Inline(T),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManifestKind {
    Sequence,
    Direct,
    Inverse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BondDoc {
    pub img: Vec<usize>,
}

/// A sequence of spaces, or a system when `kind` is direct/inverse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(default = "default_kind")]
    pub kind: ManifestKind,
    pub spaces: Vec<Entry<SpaceDoc>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bonds: Vec<BondDoc>,
}

fn default_kind() -> ManifestKind {
    ManifestKind::Sequence
}

impl Manifest {
    pub fn bond_maps(&self) -> Vec<PointMap> {
        self.bonds.iter().map(|b| PointMap::new(b.img.clone())).collect()
    }
}

/// A host space with a sequence of measures on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasuresManifest {
    pub host: Entry<SpaceDoc>,
    pub measures: Vec<Entry<MeasureDoc>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftStageDoc {
    pub space: Entry<SpaceDoc>,
    pub img: Vec<usize>,
    #[serde(rename = "R")]
    pub radius: f64,
    pub eps: f64,
}

/// Spaces with approximations into a common target, for measure lifting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftManifest {
    pub target: Entry<SpaceDoc>,
    pub stages: Vec<LiftStageDoc>,
}

pub fn parse_space(text: &str) -> Result<PointedSpace> {
    let doc: SpaceDoc = serde_json::from_str(text).map_err(|e| MmError::Parameter(format!("space document: {e}")))?;
    doc.to_space()
}

pub fn parse_weak_approx(text: &str) -> Result<WeakApprox> {
    serde_json::from_str(text).map_err(|e| MmError::Parameter(format!("approximation document: {e}")))
}

pub fn space_to_json(s: &PointedSpace) -> String {
    serde_json::to_string(&SpaceDoc::from_space(s)).expect("space documents serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery::{gen_inverse_example, gen_uniform_simplex};

    #[test]
    fn dense_roundtrip() {
        let s = gen_uniform_simplex(3).unwrap().with_labels(vec!["a".into(), "b".into(), "c".into()]).unwrap();
        assert_eq!(parse_space(&space_to_json(&s)).unwrap(), s);
    }

    #[test]
    fn scaled_basis_roundtrip() {
        let sys = gen_inverse_example(2, 3).unwrap();
        let s = &sys.spaces[1];
        let text = space_to_json(s);
        assert!(text.contains("linf_scaled_basis"));
        assert_eq!(&parse_space(&text).unwrap(), s);
    }

    #[test]
    fn generators_and_errors() {
        let g = parse_space(r#"{"n":3,"dist":{"generator":"line_grid","params":{"step":0.5}},"weight":[1,1,1],"base":1}"#).unwrap();
        assert_eq!(g.d(0, 2), 1.0);
        let s = parse_space(r#"{"n":2,"dist":{"generator":"simplex"},"weight":[0.5,0.5],"base":0}"#).unwrap();
        assert_eq!(s.d(0, 1), 1.0);
        assert!(parse_space(r#"{"n":2,"dist":{"generator":"torus"},"weight":[1,1],"base":0}"#).is_err());
        assert!(parse_space(r#"{"n":3,"dist":[[0,1],[1,0]],"weight":[1,1],"base":0}"#).is_err());
        assert!(parse_space("not json").is_err());
    }

    #[test]
    fn manifest_entries() {
        let m: Manifest = serde_json::from_str(
            r#"{"kind":"inverse","spaces":["a.json",{"n":1,"dist":[[0]],"weight":[1],"base":0}],"bonds":[{"img":[0]}]}"#,
        )
        .unwrap();
        assert_eq!(m.kind, ManifestKind::Inverse);
        assert!(matches!(m.spaces[0], Entry::File(_)));
        assert!(matches!(m.spaces[1], Entry::Inline(_)));
        let seq: Manifest = serde_json::from_str(r#"{"spaces":[]}"#).unwrap();
        assert_eq!(seq.kind, ManifestKind::Sequence);
    }

    #[test]
    fn weak_approx_document() {
        let w = parse_weak_approx(r#"{"img":[0,1],"good":[0],"R":2.0,"eps":0.5}"#).unwrap();
        assert_eq!(w.map.img, vec![0, 1]);
        assert_eq!(w.radius, 2.0);
    }
}
