//! Source specifications: inline lists, `{"q": [...]}` documents and matrix documents.

use std::fs;
use std::path::Path;

use bernoulli_rdp::graph::EdgeSource;
use bernoulli_rdp::{flatten, load_matrix, BernoulliVectorSource, EdgeProbabilityMatrix, RdpError, Result};
use serde::Deserialize;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct QDocument {
    q: Vec<f64>,
}

/// Interprets `spec` as a file path when such a file exists, otherwise as a
/// comma-separated list of probabilities.
pub fn parse_source(spec: &str) -> Result<BernoulliVectorSource> {
    let path = Path::new(spec);
    if path.is_file() {
        let text = fs::read_to_string(path).map_err(|e| RdpError::Parse(format!("{}: {e}", path.display())))?;
        return parse_document(&text);
    }
    parse_inline(spec)
}

pub fn parse_inline(list: &str) -> Result<BernoulliVectorSource> {
    let q = list
        .split(',')
        .map(|s| {
            let s = s.trim();
            s.parse::<f64>().map_err(|_| RdpError::Parse(format!("not a number: {s:?}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    BernoulliVectorSource::normalize(&q)
}

/// A `{"q": [...]}` document or a matrix document (flattened to its edges).
pub fn parse_document(text: &str) -> Result<BernoulliVectorSource> {
    if let Ok(doc) = serde_json::from_str::<QDocument>(text) {
        return BernoulliVectorSource::normalize(&doc.q);
    }
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| RdpError::Parse(e.to_string()))?;
    if value.get("n_vertices").is_some() {
        return Ok(flatten(&load_matrix(text.as_bytes())?).source);
    }
    if value.get("q").is_some() {
        // Well-formed JSON with a bad "q" field: report the typed error.
        return serde_json::from_value::<QDocument>(value)
            .map_err(|e| RdpError::Parse(e.to_string()))
            .and_then(|doc| BernoulliVectorSource::normalize(&doc.q));
    }
    Err(RdpError::Parse("expected a {\"q\": [...]} or {\"n_vertices\": .., \"probs\": [...]} document".into()))
}

pub fn read_matrix(path: &Path) -> Result<(EdgeProbabilityMatrix, EdgeSource)> {
    let file = fs::File::open(path).map_err(|e| RdpError::Parse(format!("{}: {e}", path.display())))?;
    let matrix = load_matrix(std::io::BufReader::new(file))?;
    let flat = flatten(&matrix);
    Ok((matrix, flat))
}
