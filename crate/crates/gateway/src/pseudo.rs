//! Teacher pseudo-labelling for Student distillation.

use std::io::{BufRead, Write};

use cascadeflow_core::dataset::{
    classification_line, parse_classification_line, CalibrationRecord,
};
use thiserror::Error;

use crate::backend::{Backend, BackendDescriptor, BackendError, InferenceRequest, Task};

#[derive(Debug, Error)]
pub enum PseudoLabelSource {
    #[error("line {line}: {message}")]
    Input { line: usize, message: String },
    #[error("record '{id}': {source}")]
    Teacher {
        id: String,
        #[source]
        source: BackendError,
    },
    #[error("teacher backend: {0}")]
    Open(BackendError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Failure partway through a run. `written` records were already flushed.
#[derive(Debug, Error)]
#[error("pseudo-labelling stopped after {written} records: {source}")]
pub struct PseudoLabelError {
    pub written: usize,
    #[source]
    pub source: PseudoLabelSource,
}

/// Labels every record in `input` with the Teacher's answer and writes it to
/// `out`, one record per line as it completes. When the Teacher returns
/// logits the label is their argmax and the logits are kept on the record;
/// otherwise its predicted class is used.
pub async fn generate_pseudo_labels<R: BufRead, W: Write>(
    input: R,
    teacher: &BackendDescriptor,
    mut out: W,
) -> Result<usize, PseudoLabelError> {
    let fail = |written, source| PseudoLabelError { written, source };
    let backend = Backend::open(teacher, Task::Classification)
        .map_err(|e| fail(0, PseudoLabelSource::Open(e)))?;
    let mut written = 0;
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| fail(written, e.into()))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = parse_classification_line(&line).map_err(|message| {
            fail(
                written,
                PseudoLabelSource::Input {
                    line: i + 1,
                    message,
                },
            )
        })?;
        let labelled = label(&backend, record)
            .await
            .map_err(|source| fail(written, source))?;
        writeln!(out, "{}", classification_line(&labelled))
            .and_then(|_| out.flush())
            .map_err(|e| fail(written, e.into()))?;
        written += 1;
    }
    Ok(written)
}

async fn label(
    backend: &Backend,
    mut record: CalibrationRecord,
) -> Result<CalibrationRecord, PseudoLabelSource> {
    let request = InferenceRequest {
        id: Some(record.id.clone()),
        input: record.input.clone(),
    };
    let teacher_error = |source| PseudoLabelSource::Teacher {
        id: record.id.clone(),
        source,
    };
    let output = backend.infer(&request).await.map_err(teacher_error)?;
    match output.logits {
        Some(logits) => {
            record.label = Some(logits.argmax());
            record.teacher_logits = Some(logits);
            record.teacher_pred = None;
        }
        None => {
            let class = output.prediction.as_u64().ok_or_else(|| {
                teacher_error(BackendError::Malformed("teacher returned no class".into()))
            })?;
            record.label = Some(class as usize);
            record.teacher_logits = None;
            record.teacher_pred = Some(class as usize);
        }
    }
    Ok(record)
}
