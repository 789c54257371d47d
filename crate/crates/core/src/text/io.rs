//! JSON Lines readers and writers for corpora, tag sidecars and derived datasets.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{DatasetRecord, RawRecord, SidecarEntry, SidecarTags};
use crate::error::{Error, Result};

/// Parses one JSON object per non-blank line; errors carry the 1-based line number.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| Error::Malformed {
            path: path.to_path_buf(),
            line: i + 1,
            reason: e.to_string(),
        })?;
        out.push(value);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_corpus(path: &Path) -> Result<Vec<RawRecord>> {
    read_jsonl(path)
}

pub fn read_sidecar(path: &Path) -> Result<SidecarTags> {
    let entries: Vec<SidecarEntry> = read_jsonl(path)?;
    Ok(SidecarTags::new(entries))
}

pub fn read_dataset(path: &Path) -> Result<Vec<DatasetRecord>> {
    read_jsonl(path)
}

pub fn write_dataset(path: &Path, records: &[DatasetRecord]) -> Result<()> {
    write_jsonl(path, records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::Label;

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.jsonl");
        std::fs::write(
            &p,
            "{\"id\":\"a\",\"headline\":\"h 1\",\"body\":\"b.\",\"label\":\"congruent\"}\n\n{\"id\":\"b\",\"headline\":",
        )
        .unwrap();
        let err = read_corpus(&p).unwrap_err();
        match err {
            Error::Malformed { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn bad_label_is_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.jsonl");
        std::fs::write(&p, "{\"id\":\"a\",\"headline\":\"h\",\"body\":\"b\",\"label\":\"maybe\"}\n").unwrap();
        assert!(matches!(read_corpus(&p), Err(Error::Malformed { line: 1, .. })));
    }

    #[test]
    fn corpus_reads() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.jsonl");
        let recs = vec![RawRecord {
            id: "x".into(),
            headline: "5 things".into(),
            body: "One. Two.".into(),
            label: Label::Incongruent,
        }];
        write_jsonl(&p, &recs).unwrap();
        assert_eq!(read_corpus(&p).unwrap(), recs);
    }
}
