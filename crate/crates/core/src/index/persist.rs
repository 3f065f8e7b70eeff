//! On-disk index layout:
//!
//! ```text
//! <dir>/manifest.json     format tag, version, namespaces, counts
//! <dir>/entities.jsonl    one KbRecord per line, sorted by IRI
//! <dir>/properties.jsonl  same for properties
//! <dir>/statements.jsonl  one Statement per line, sorted
//! ```
//!
//! Inverted indexes are rebuilt on load; the files are a pure function of the
//! ingested dumps.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use super::{IndexError, KbIndex, Namespaces, Statement};
use crate::model::KbRecord;

pub const FORMAT_TAG: &str = "kgforge-index";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format: String,
    version: u32,
    namespaces: Namespaces,
    entities: usize,
    properties: usize,
    statements: usize,
}

impl KbIndex {
    pub fn save(&self, dir: &Path) -> Result<(), IndexError> {
        fs::create_dir_all(dir).map_err(IndexError::io(format!("creating {}", dir.display())))?;
        write_lines(&dir.join("entities.jsonl"), self.entities().records())?;
        write_lines(&dir.join("properties.jsonl"), self.properties().records())?;
        write_lines(&dir.join("statements.jsonl"), self.statements().iter())?;
        let manifest = Manifest {
            format: FORMAT_TAG.into(),
            version: FORMAT_VERSION,
            namespaces: self.namespaces().clone(),
            entities: self.entities().len(),
            properties: self.properties().len(),
            statements: self.statements().len(),
        };
        let mut body = serde_json::to_string_pretty(&manifest).map_err(|e| IndexError::Format(e.to_string()))?;
        body.push('\n');
        let path = dir.join("manifest.json");
        fs::write(&path, body).map_err(IndexError::io(format!("writing {}", path.display())))
    }

    pub fn load(dir: &Path) -> Result<Self, IndexError> {
        let path = dir.join("manifest.json");
        let raw = fs::read_to_string(&path).map_err(IndexError::io(format!("reading {}", path.display())))?;
        let manifest: Manifest =
            serde_json::from_str(&raw).map_err(|e| IndexError::Format(format!("{}: {e}", path.display())))?;
        if manifest.format != FORMAT_TAG || manifest.version != FORMAT_VERSION {
            return Err(IndexError::Format(format!(
                "unsupported index format {} v{} (expected {FORMAT_TAG} v{FORMAT_VERSION})",
                manifest.format, manifest.version
            )));
        }
        let entities: Vec<KbRecord> = read_lines(&dir.join("entities.jsonl"))?;
        let properties: Vec<KbRecord> = read_lines(&dir.join("properties.jsonl"))?;
        let statements: Vec<Statement> = read_lines(&dir.join("statements.jsonl"))?;
        if (entities.len(), properties.len(), statements.len())
            != (manifest.entities, manifest.properties, manifest.statements)
        {
            return Err(IndexError::Format("record counts disagree with manifest".into()));
        }
        Ok(KbIndex::from_parts(manifest.namespaces, entities, properties, statements.into_iter().collect()))
    }
}

fn write_lines<'a, T: Serialize + 'a>(path: &Path, items: impl IntoIterator<Item = &'a T>) -> Result<(), IndexError> {
    let file = fs::File::create(path).map_err(IndexError::io(format!("creating {}", path.display())))?;
    let mut out = std::io::BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut out, item).map_err(|e| IndexError::Format(e.to_string()))?;
        out.write_all(b"\n").map_err(IndexError::io(format!("writing {}", path.display())))?;
    }
    out.flush().map_err(IndexError::io(format!("writing {}", path.display())))
}

fn read_lines<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, IndexError> {
    let file = fs::File::open(path).map_err(IndexError::io(format!("opening {}", path.display())))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(IndexError::io(format!("reading {}", path.display())))?;
        if line.is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| IndexError::Format(format!("{} line {}: {e}", path.display(), n + 1)))?,
        );
    }
    Ok(out)
}
