//! Line-delimited JSON datasets.
//!
//! Classification line:
//! `{"id": str, "label": int?, "student_logits": [num..], "teacher_logits": [num..]?,
//!   "teacher_pred": int?, "student_cost": num?, "teacher_cost": num?,
//!   "cost_unit": "flops"|"ms"?, "input": any?}`
//!
//! Detection line:
//! `{"id": str, "boxes": [{"class_logits": [num..], "reg_samples": [[{"s": num, "q": num}..] x4]}..],
//!   "reference": any?}`
//!
//! Blank lines are skipped. Line numbers in errors are 1-based.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::energy::{DetectionBox, DetectionSample};
use crate::error::{Error, Result};
use crate::logits::LogitVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostUnit {
    Flops,
    Ms,
}

/// One labeled (or unlabeled) sample with the Student's logits and whatever
/// is known about the Teacher's answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<usize>,
    pub student_logits: LogitVector,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub teacher_logits: Option<LogitVector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub teacher_pred: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub student_cost: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub teacher_cost: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost_unit: Option<CostUnit>,
    /// Opaque model input forwarded to remote backends.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<serde_json::Value>,
}

impl CalibrationRecord {
    pub fn new(id: impl Into<String>, student_logits: LogitVector) -> Self {
        Self {
            id: id.into(),
            label: None,
            student_logits,
            teacher_logits: None,
            teacher_pred: None,
            student_cost: None,
            teacher_cost: None,
            cost_unit: None,
            input: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, cost) in [
            ("student_cost", self.student_cost),
            ("teacher_cost", self.teacher_cost),
        ] {
            if let Some(c) = cost {
                if !(c.is_finite() && c >= 0.0) {
                    return Err(Error::invalid(format!(
                        "{name} must be finite and non-negative, got {c}"
                    )));
                }
            }
        }
        if let Some(label) = self.label {
            // a Teacher with a wider label space (specialized Students)
            // widens the admissible range
            let bound = self
                .teacher_logits
                .as_ref()
                .map_or(0, LogitVector::len)
                .max(self.student_logits.len());
            if label >= bound {
                return Err(Error::invalid(format!(
                    "label {label} out of range for {bound} classes"
                )));
            }
        }
        Ok(())
    }

    /// The Teacher's answer: the stored prediction, else the argmax of the
    /// stored Teacher logits.
    pub fn teacher_prediction(&self) -> Option<usize> {
        self.teacher_pred
            .or_else(|| self.teacher_logits.as_ref().map(LogitVector::argmax))
    }

    pub fn student_prediction(&self) -> usize {
        self.student_logits.argmax()
    }
}

/// Parses one classification line without cross-line checks.
pub fn parse_classification_line(line: &str) -> Result<CalibrationRecord, String> {
    let record: CalibrationRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
    record.validate().map_err(|e| e.to_string())?;
    Ok(record)
}

fn schema(line: usize, message: impl Into<String>) -> Error {
    Error::Schema {
        line,
        message: message.into(),
    }
}

/// Reads and validates a classification dataset: per-line schema, unique ids,
/// and a consistent Student (and Teacher) logit length across the file.
pub fn read_classification<R: BufRead>(reader: R) -> Result<Vec<CalibrationRecord>> {
    let mut records = Vec::new();
    let mut ids = HashSet::new();
    let mut student_len = None;
    let mut teacher_len = None;
    for (index, line) in reader.lines().enumerate() {
        let number = index + 1;
        let line = line.map_err(|e| schema(number, format!("read failure: {e}")))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = parse_classification_line(&line).map_err(|m| schema(number, m))?;
        let len = record.student_logits.len();
        if *student_len.get_or_insert(len) != len {
            return Err(schema(
                number,
                format!(
                    "student_logits has {len} entries, earlier lines have {}",
                    student_len.unwrap()
                ),
            ));
        }
        if let Some(teacher) = &record.teacher_logits {
            let len = teacher.len();
            if *teacher_len.get_or_insert(len) != len {
                return Err(schema(
                    number,
                    format!(
                        "teacher_logits has {len} entries, earlier lines have {}",
                        teacher_len.unwrap()
                    ),
                ));
            }
        }
        if !ids.insert(record.id.clone()) {
            return Err(schema(number, format!("duplicate id '{}'", record.id)));
        }
        records.push(record);
    }
    Ok(records)
}

pub fn load_classification_dataset(path: impl AsRef<Path>) -> Result<Vec<CalibrationRecord>> {
    let file = File::open(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    read_classification(BufReader::new(file))
}

pub fn classification_line(record: &CalibrationRecord) -> String {
    serde_json::to_string(record).expect("validated records always serialize")
}

pub fn write_classification<W: Write>(records: &[CalibrationRecord], mut out: W) -> Result<()> {
    for record in records {
        writeln!(out, "{}", classification_line(record))?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_classification_dataset(
    path: impl AsRef<Path>,
    records: &[CalibrationRecord],
) -> Result<()> {
    let file = File::create(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    write_classification(records, BufWriter::new(file))
}

/// SHA-256 over the canonical serialization of the records, hex encoded.
pub fn dataset_digest(records: &[CalibrationRecord]) -> String {
    let mut hasher = Sha256::new();
    for record in records {
        hasher.update(classification_line(record).as_bytes());
        hasher.update(b"\n");
    }
    hex::encode(hasher.finalize())
}

/// One detection dataset line.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRecord {
    pub id: String,
    pub sample: DetectionSample,
    pub reference: Option<serde_json::Value>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDetectionRecord {
    id: String,
    boxes: Vec<DetectionBox>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reference: Option<serde_json::Value>,
}

pub fn parse_detection_line(line: &str) -> Result<DetectionRecord, String> {
    let raw: RawDetectionRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let sample = DetectionSample::new(raw.boxes).map_err(|e| e.to_string())?;
    Ok(DetectionRecord {
        id: raw.id,
        sample,
        reference: raw.reference,
    })
}

pub fn detection_line(record: &DetectionRecord) -> String {
    let raw = RawDetectionRecord {
        id: record.id.clone(),
        boxes: record.sample.boxes().to_vec(),
        reference: record.reference.clone(),
    };
    serde_json::to_string(&raw).expect("validated records always serialize")
}

/// Reads a detection dataset; class counts must agree across the file.
pub fn read_detection<R: BufRead>(reader: R) -> Result<Vec<DetectionRecord>> {
    let mut records = Vec::new();
    let mut ids = HashSet::new();
    let mut classes = None;
    for (index, line) in reader.lines().enumerate() {
        let number = index + 1;
        let line = line.map_err(|e| schema(number, format!("read failure: {e}")))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = parse_detection_line(&line).map_err(|m| schema(number, m))?;
        let c = record.sample.num_classes();
        if *classes.get_or_insert(c) != c {
            return Err(schema(
                number,
                format!(
                    "boxes have {c} class logits, earlier lines have {}",
                    classes.unwrap()
                ),
            ));
        }
        if !ids.insert(record.id.clone()) {
            return Err(schema(number, format!("duplicate id '{}'", record.id)));
        }
        records.push(record);
    }
    Ok(records)
}

pub fn load_detection_dataset(path: impl AsRef<Path>) -> Result<Vec<DetectionRecord>> {
    let file = File::open(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    read_detection(BufReader::new(file))
}

pub fn write_detection<W: Write>(records: &[DetectionRecord], mut out: W) -> Result<()> {
    for record in records {
        writeln!(out, "{}", detection_line(record))?;
    }
    out.flush()?;
    Ok(())
}
