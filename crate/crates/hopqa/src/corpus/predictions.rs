//! Prediction file schema: one document with an `answer` map and an `sp`
//! map, both keyed by example id.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The on-disk prediction document. Map keys are sorted, so serialization
/// is byte-stable for a given content.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionFile {
    pub answer: BTreeMap<String, String>,
    pub sp: BTreeMap<String, Vec<(String, usize)>>,
}

impl PredictionFile {
    /// Inserts one prediction; sp pairs are stored sorted and deduplicated.
    pub fn insert(
        &mut self,
        id: &str,
        answer: &str,
        sp: &BTreeSet<(String, usize)>,
    ) -> Result<()> {
        if self.answer.contains_key(id) {
            return Err(Error::data(format!("duplicate prediction id \"{id}\"")));
        }
        self.answer.insert(id.to_string(), answer.to_string());
        self.sp.insert(id.to_string(), sp.iter().cloned().collect());
        Ok(())
    }

    pub fn sp_set(&self, id: &str) -> BTreeSet<(String, usize)> {
        self.sp.get(id).map(|v| v.iter().cloned().collect()).unwrap_or_default()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.answer.keys().map(|s| s.as_str())
    }

    pub fn len(&self) -> usize {
        self.answer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.answer.is_empty()
    }
}

/// Writes the prediction document to disk.
pub fn serialize_predictions(predictions: &PredictionFile, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(BufWriter::new(file), predictions)?;
    Ok(())
}

/// Parses a prediction document, rejecting files whose two maps disagree on
/// ids.
pub fn load_predictions(path: &Path) -> Result<PredictionFile> {
    let file = std::fs::File::open(path)?;
    let parsed: PredictionFile = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
    for id in parsed.answer.keys() {
        if !parsed.sp.contains_key(id) {
            return Err(Error::data(format!("prediction id \"{id}\" missing from sp map")));
        }
    }
    for id in parsed.sp.keys() {
        if !parsed.answer.contains_key(id) {
            return Err(Error::data(format!("prediction id \"{id}\" missing from answer map")));
        }
    }
    Ok(parsed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pred.json");
        let mut preds = PredictionFile::default();
        let sp: BTreeSet<(String, usize)> = [("T".to_string(), 0)].into_iter().collect();
        preds.insert("a", "yes", &sp).unwrap();
        serialize_predictions(&preds, &path).unwrap();
        let loaded = load_predictions(&path).unwrap();
        assert_eq!(loaded, preds);
    }

    #[test]
    fn empty_mapping_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pred.json");
        serialize_predictions(&PredictionFile::default(), &path).unwrap();
        let loaded = load_predictions(&path).unwrap();
        assert!(loaded.is_empty());
        let raw = std::fs::read_to_string(&path).unwrap();
        assert!(raw.contains("\"answer\""));
        assert!(raw.contains("\"sp\""));
    }

    #[test]
    fn serialization_is_byte_stable() {
        let dir = tempfile::tempdir().unwrap();
        let mut preds = PredictionFile::default();
        let sp: BTreeSet<(String, usize)> =
            [("B".to_string(), 1), ("A".to_string(), 0)].into_iter().collect();
        preds.insert("z", "x", &sp).unwrap();
        preds.insert("a", "y", &sp).unwrap();
        let p1 = dir.path().join("one.json");
        let p2 = dir.path().join("two.json");
        serialize_predictions(&preds, &p1).unwrap();
        serialize_predictions(&preds, &p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn duplicate_ids_rejected() {
        let mut preds = PredictionFile::default();
        let sp = BTreeSet::new();
        preds.insert("a", "x", &sp).unwrap();
        assert!(preds.insert("a", "x", &sp).is_err());
    }

    #[test]
    fn mismatched_maps_rejected_on_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pred.json");
        std::fs::write(&path, r#"{"answer": {"a": "x"}, "sp": {}}"#).unwrap();
        assert!(load_predictions(&path).is_err());
    }
}
