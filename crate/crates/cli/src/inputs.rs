//! File loading with content hashes recorded for the report header.

use std::fs;
use std::path::{Path, PathBuf};

use mmlimit::io::{Entry, LiftManifest, Manifest, MeasureDoc, MeasuresManifest, SpaceDoc};
use mmlimit::mmspace::{Measure, PointedSpace};
use mmlimit::weaklimit::{build_test_family, TestFamily};
use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct InputRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Default)]
pub struct Inputs {
    pub records: Vec<InputRecord>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn dir_of(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

impl Inputs {
    pub fn read(&mut self, path: &Path) -> Result<String, CliError> {
        let bytes = fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let shown = path.display().to_string();
        if !self.records.iter().any(|r| r.path == shown) {
            self.records.push(InputRecord { path: shown, sha256: sha256_hex(&bytes) });
        }
        String::from_utf8(bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }

    pub fn json<T: DeserializeOwned>(&mut self, path: &Path) -> Result<T, CliError> {
        let text = self.read(path)?;
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }

    pub fn space(&mut self, path: &Path) -> Result<PointedSpace, CliError> {
        let doc: SpaceDoc = self.json(path)?;
        Ok(doc.to_space()?)
    }

    fn space_entry(&mut self, e: &Entry<SpaceDoc>, dir: &Path) -> Result<PointedSpace, CliError> {
        match e {
            Entry::File(f) => self.space(&dir.join(f)),
            Entry::Inline(doc) => Ok(doc.to_space()?),
        }
    }

    fn measure_entry(&mut self, e: &Entry<MeasureDoc>, dir: &Path) -> Result<Measure, CliError> {
        match e {
            Entry::File(f) => Ok(self.json::<MeasureDoc>(&dir.join(f))?.into()),
            Entry::Inline(doc) => Ok(doc.clone().into()),
        }
    }

    pub fn manifest(&mut self, path: &Path) -> Result<(Manifest, Vec<PointedSpace>), CliError> {
        let m: Manifest = self.json(path)?;
        let dir = dir_of(path);
        let spaces = m.spaces.iter().map(|e| self.space_entry(e, &dir)).collect::<Result<_, _>>()?;
        Ok((m, spaces))
    }

    pub fn measures(&mut self, path: &Path) -> Result<(PointedSpace, Vec<Measure>), CliError> {
        let m: MeasuresManifest = self.json(path)?;
        let dir = dir_of(path);
        let host = self.space_entry(&m.host, &dir)?;
        let seq: Vec<Measure> = m.measures.iter().map(|e| self.measure_entry(e, &dir)).collect::<Result<_, _>>()?;
        if let Some((i, mu)) = seq.iter().enumerate().find(|(_, mu)| mu.len() != host.n()) {
            return Err(CliError::Input(format!("measure {i} has {} atoms, host has {}", mu.len(), host.n())));
        }
        Ok((host, seq))
    }

    pub fn lift(&mut self, path: &Path) -> Result<(LiftManifest, PointedSpace, Vec<PointedSpace>), CliError> {
        let m: LiftManifest = self.json(path)?;
        let dir = dir_of(path);
        let target = self.space_entry(&m.target, &dir)?;
        let spaces = m.stages.iter().map(|s| self.space_entry(&s.space, &dir)).collect::<Result<_, _>>()?;
        Ok((m, target, spaces))
    }
}

/// Test family for `host` at `depth`, read from or written to `cache_dir`
/// under a key made of the space hash and the depth.
pub fn family(host: &PointedSpace, depth: u32, cache_dir: Option<&Path>) -> Result<TestFamily, CliError> {
    let Some(dir) = cache_dir else {
        return Ok(build_test_family(host, depth)?);
    };
    let key = sha256_hex(mmlimit::io::space_to_json(host).as_bytes());
    let file = dir.join(format!("family-{}-d{depth}.json", &key[..16]));
    if let Ok(text) = fs::read_to_string(&file) {
        if let Ok(fam) = serde_json::from_str::<TestFamily>(&text) {
            if fam.n == host.n() && fam.depth == depth {
                return Ok(fam);
            }
        }
    }
    let fam = build_test_family(host, depth)?;
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let text = serde_json::to_string(&fam).map_err(|e| CliError::Io(e.to_string()))?;
    fs::write(&file, text).map_err(|e| CliError::Io(format!("{}: {e}", file.display())))?;
    Ok(fam)
}
