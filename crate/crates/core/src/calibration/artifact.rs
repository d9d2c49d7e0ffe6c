//! Line-oriented artifacts written by calibration commands.
//!
//! A curve artifact is a header line followed by one line per point:
//!
//! ```text
//! {"kind":"tradeoff_curve","policy":{...},"dataset_digest":"..."}
//! {"threshold":"-inf","accuracy":0.91,"expected_cost":1.0,"student_fraction":1.0}
//! ...
//! ```
//!
//! Histogram and separation artifacts are a single tagged line each.

use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

use super::histogram::Histogram;
use super::separation::SeparationDiagnostic;
use super::sweep::{TradeoffCurve, TradeoffPoint};
use crate::error::{Error, Result};
use crate::policy::RouterPolicy;

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum Header {
    TradeoffCurve {
        policy: RouterPolicy,
        dataset_digest: String,
    },
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum SingleLine<'a> {
    Histogram(&'a Histogram),
    Separation(&'a SeparationDiagnostic),
}

pub fn write_curve<W: Write>(curve: &TradeoffCurve, mut out: W) -> Result<()> {
    let header = Header::TradeoffCurve {
        policy: curve.policy,
        dataset_digest: curve.dataset_digest.clone(),
    };
    writeln!(out, "{}", to_line(&header)?)?;
    for point in &curve.points {
        writeln!(out, "{}", to_line(point)?)?;
    }
    out.flush()?;
    Ok(())
}

pub fn curve_to_string(curve: &TradeoffCurve) -> String {
    let mut buf = Vec::new();
    write_curve(curve, &mut buf).expect("in-memory write");
    String::from_utf8(buf).expect("json is utf-8")
}

fn to_line<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string(value).map_err(|e| Error::invalid(e.to_string()))
}

fn schema(line: usize, message: impl ToString) -> Error {
    Error::Schema {
        line,
        message: message.to_string(),
    }
}

/// Parses and validates a curve artifact.
pub fn read_curve<R: BufRead>(reader: R) -> Result<TradeoffCurve> {
    let mut lines = reader
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty()));
    let (number, first) = lines
        .next()
        .ok_or_else(|| schema(1, "empty curve artifact"))?;
    let first = first.map_err(|e| schema(number, e))?;
    let Header::TradeoffCurve {
        policy,
        dataset_digest,
    } = serde_json::from_str(&first).map_err(|e| schema(number, e))?;
    let mut points = Vec::new();
    for (number, line) in lines {
        let line = line.map_err(|e| schema(number, e))?;
        let point: TradeoffPoint = serde_json::from_str(&line).map_err(|e| schema(number, e))?;
        points.push(point);
    }
    let curve = TradeoffCurve {
        policy,
        dataset_digest,
        points,
    };
    curve.validate()?;
    Ok(curve)
}

pub fn parse_curve(text: &str) -> Result<TradeoffCurve> {
    read_curve(text.as_bytes())
}

pub fn write_histogram<W: Write>(histogram: &Histogram, mut out: W) -> Result<()> {
    writeln!(out, "{}", to_line(&SingleLine::Histogram(histogram))?)?;
    Ok(())
}

pub fn write_separation<W: Write>(diag: &SeparationDiagnostic, mut out: W) -> Result<()> {
    writeln!(out, "{}", to_line(&SingleLine::Separation(diag))?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve() -> TradeoffCurve {
        TradeoffCurve {
            policy: RouterPolicy::energy(0.0),
            dataset_digest: "abc".into(),
            points: vec![
                TradeoffPoint {
                    threshold: f64::NEG_INFINITY,
                    accuracy: 0.5,
                    expected_cost: 1.0,
                    student_fraction: 1.0,
                },
                TradeoffPoint {
                    threshold: 2.5,
                    accuracy: 0.75,
                    expected_cost: 2.0,
                    student_fraction: 0.5,
                },
                TradeoffPoint {
                    threshold: f64::INFINITY,
                    accuracy: 0.8,
                    expected_cost: 5.0,
                    student_fraction: 0.0,
                },
            ],
        }
    }

    #[test]
    fn curve_round_trip() {
        let text = curve_to_string(&curve());
        assert!(text.starts_with(r#"{"kind":"tradeoff_curve","policy":{"score_type":"energy""#));
        assert!(text.contains(r#"{"threshold":"-inf","accuracy":0.5"#));
        assert_eq!(parse_curve(&text).unwrap(), curve());
    }

    #[test]
    fn rejects_malformed() {
        assert!(parse_curve("").is_err());
        assert!(parse_curve(r#"{"kind":"other"}"#).is_err());
        let mut text = curve_to_string(&curve());
        text.push_str(
            r#"{"threshold":1.0,"accuracy":0.5,"expected_cost":1.0,"student_fraction":0.5}"#,
        );
        // threshold goes backwards
        assert!(matches!(parse_curve(&text), Err(Error::InvalidInput(_))));
        let bad = curve_to_string(&curve()).replace("0.75", "1.75");
        assert!(parse_curve(&bad).is_err());
        let garbage = format!("{}\nnot json\n", curve_to_string(&curve()).trim_end());
        assert!(matches!(
            parse_curve(&garbage),
            Err(Error::Schema { line: 5, .. })
        ));
    }

    #[test]
    fn single_line_artifacts() {
        let mut buf = Vec::new();
        let h = Histogram {
            edges: vec![0.0, 1.0],
            counts: vec![3],
        };
        write_histogram(&h, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "{\"kind\":\"histogram\",\"edges\":[0.0,1.0],\"counts\":[3]}\n"
        );
    }
}
