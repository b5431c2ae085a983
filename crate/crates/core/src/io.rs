//! Plain-text readers and writers for graphs, opinion vectors, strategic
//! sets and embeddings.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fj::SusceptibilityProfile;
use crate::graph::WeightedGraph;
use crate::recovery::{EmbeddingMatrix, Provenance};
use crate::strategic::StrategicSet;

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_f64(line: usize, tok: &str) -> Result<f64> {
    let v: f64 = tok
        .trim()
        .parse()
        .map_err(|_| parse_err(line, format!("expected a number, found {tok:?}")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("non-finite value {tok:?}")));
    }
    Ok(v)
}

fn parse_index(line: usize, tok: &str) -> Result<usize> {
    tok.trim()
        .parse()
        .map_err(|_| parse_err(line, format!("expected a node index, found {tok:?}")))
}

/// Edge list `u v [w]`. The node count is `max(min_n, largest index + 1)`.
pub fn parse_edge_list(text: &str, min_n: usize) -> Result<WeightedGraph> {
    let mut edges = Vec::new();
    let mut n = min_n;
    for (line, l) in content_lines(text) {
        let toks: Vec<&str> = l.split_whitespace().collect();
        if !(2..=3).contains(&toks.len()) {
            return Err(parse_err(line, "expected `u v [w]`"));
        }
        let u = parse_index(line, toks[0])?;
        let v = parse_index(line, toks[1])?;
        let w = match toks.get(2) {
            Some(t) => parse_f64(line, t)?,
            None => 1.0,
        };
        n = n.max(u + 1).max(v + 1);
        edges.push((u, v, w));
    }
    WeightedGraph::new(n, edges)
}

pub fn read_edge_list(path: &Path, min_n: usize) -> Result<WeightedGraph> {
    parse_edge_list(&std::fs::read_to_string(path)?, min_n)
}

pub fn format_edge_list(graph: &WeightedGraph) -> String {
    let mut out = format!("# n = {}\n", graph.n());
    for &(u, v, w) in graph.edges() {
        writeln!(out, "{u} {v} {w}").unwrap();
    }
    out
}

/// One value per line, or `node,value` rows (optional header) covering
/// every node exactly once.
pub fn parse_values(text: &str) -> Result<Vec<f64>> {
    let lines: Vec<(usize, &str)> = content_lines(text).collect();
    if lines.iter().all(|(_, l)| !l.contains(',')) {
        return lines.iter().map(|&(line, l)| parse_f64(line, l)).collect();
    }
    let mut pairs = Vec::with_capacity(lines.len());
    for (k, &(line, l)) in lines.iter().enumerate() {
        let (a, b) = l
            .split_once(',')
            .ok_or_else(|| parse_err(line, "expected `node,value`"))?;
        match parse_index(line, a) {
            Ok(node) => pairs.push((node, parse_f64(line, b)?)),
            Err(_) if k == 0 => continue,
            Err(e) => return Err(e),
        }
    }
    let n = pairs.len();
    let mut values = vec![None; n];
    for (node, v) in pairs {
        match values.get_mut(node) {
            Some(slot @ None) => *slot = Some(v),
            Some(Some(_)) => {
                return Err(Error::InvalidParameter(format!("node {node} listed twice")))
            }
            None => {
                return Err(Error::InvalidParameter(format!(
                    "node {node} out of range for {n} rows"
                )))
            }
        }
    }
    Ok(values.into_iter().map(|v| v.unwrap()).collect())
}

pub fn read_values(path: &Path) -> Result<Vec<f64>> {
    parse_values(&std::fs::read_to_string(path)?)
}

pub fn format_values(values: &[f64]) -> String {
    let mut out = String::new();
    for v in values {
        writeln!(out, "{v}").unwrap();
    }
    out
}

/// A single value means a shared susceptibility.
pub fn parse_alpha(text: &str, n: usize) -> Result<SusceptibilityProfile> {
    let values = parse_values(text)?;
    match values.as_slice() {
        [a] => SusceptibilityProfile::shared(n, *a),
        _ if values.len() == n => SusceptibilityProfile::new(values),
        _ => Err(Error::DimensionMismatch {
            expected: n,
            found: values.len(),
        }),
    }
}

/// `spec` is either a number (shared α) or a path to a susceptibility file.
pub fn load_alpha(spec: &str, n: usize) -> Result<SusceptibilityProfile> {
    match spec.trim().parse::<f64>() {
        Ok(a) => SusceptibilityProfile::shared(n, a),
        Err(_) => parse_alpha(&std::fs::read_to_string(spec)?, n),
    }
}

pub fn parse_set(text: &str, n: usize) -> Result<StrategicSet> {
    let members = content_lines(text)
        .map(|(line, l)| parse_index(line, l))
        .collect::<Result<Vec<_>>>()?;
    StrategicSet::new(members, n)
}

pub fn read_set(path: &Path, n: usize) -> Result<StrategicSet> {
    parse_set(&std::fs::read_to_string(path)?, n)
}

/// CSV embedding, row k holding the features of node k; a non-numeric first
/// row is treated as a header.
pub fn parse_embedding(text: &str) -> Result<EmbeddingMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, (line, l)) in content_lines(text).enumerate() {
        let parsed: Result<Vec<f64>> = l.split(',').map(|t| parse_f64(line, t)).collect();
        match parsed {
            Ok(r) => {
                if let Some(first) = rows.first() {
                    if first.len() != r.len() {
                        return Err(parse_err(
                            line,
                            format!("expected {} columns, found {}", first.len(), r.len()),
                        ));
                    }
                }
                rows.push(r);
            }
            Err(_) if k == 0 => continue,
            Err(e) => return Err(e),
        }
    }
    if rows.is_empty() {
        return Err(Error::EmptySample);
    }
    let d = rows[0].len();
    let x = DMatrix::from_row_iterator(rows.len(), d, rows.into_iter().flatten());
    EmbeddingMatrix::new(x, Provenance::ExternalFile)
}

pub fn read_embedding(path: &Path) -> Result<EmbeddingMatrix> {
    parse_embedding(&std::fs::read_to_string(path)?)
}
