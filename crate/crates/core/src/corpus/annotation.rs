//! Four-column `uri start end speaker` annotation files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{Annotation, Segment, Turn};
use crate::error::{Error, Result};

/// Parses annotation text. Blank lines and `#` comments are skipped.
pub fn parse_annotations(text: &str, source: &str) -> Result<BTreeMap<String, Annotation>> {
    let mut by_uri: BTreeMap<String, Vec<Turn>> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |message: String| Error::Annotation {
            path: source.to_string(),
            line: idx + 1,
            message,
        };
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 4 {
            return Err(bad(format!("expected 4 columns, found {}", cols.len())));
        }
        let start: f64 = cols[1]
            .parse()
            .map_err(|_| bad(format!("bad start time {:?}", cols[1])))?;
        let end: f64 = cols[2]
            .parse()
            .map_err(|_| bad(format!("bad end time {:?}", cols[2])))?;
        let segment = Segment::new(start, end).map_err(|e| bad(e.to_string()))?;
        by_uri.entry(cols[0].to_string()).or_default().push(Turn {
            segment,
            speaker: cols[3].to_string(),
        });
    }
    by_uri
        .into_iter()
        .map(|(uri, entries)| Ok((uri.clone(), Annotation::new(uri, entries)?)))
        .collect()
}

pub fn load_annotations(path: impl AsRef<Path>) -> Result<BTreeMap<String, Annotation>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_annotations(&text, &path.display().to_string())
}

/// Loads a file holding exactly one uri.
pub fn load_annotation(path: impl AsRef<Path>) -> Result<Annotation> {
    let path = path.as_ref();
    let mut all = load_annotations(path)?;
    match all.len() {
        0 => Err(Error::Empty("annotation file")),
        1 => Ok(all.pop_first().unwrap().1),
        n => Err(Error::Config(format!(
            "{} holds {n} uris; use load_annotations",
            path.display()
        ))),
    }
}

/// Formats turns with shortest round-trip float representation.
pub fn write_annotations<'a>(annotations: impl IntoIterator<Item = &'a Annotation>) -> String {
    let mut out = String::new();
    for ann in annotations {
        for t in ann.entries() {
            writeln!(out, "{} {} {} {}", ann.uri, t.segment.start, t.segment.end, t.speaker).unwrap();
        }
    }
    out
}

pub fn save_annotations<'a>(
    path: impl AsRef<Path>,
    annotations: impl IntoIterator<Item = &'a Annotation>,
) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_annotations(annotations)).map_err(|e| Error::io(path, e))
}
