//! Signal CSV files and graph documents.
//!
//! Signal files hold one row per node and one column per snapshot, with an
//! optional header row of snapshot labels. Values are written with 17
//! significant digits so a write/read cycle is exact.
//!
//! Graph files are JSON:
//!
//! ```json
//! { "n": 4, "k": 2, "edges": [ { "i": 0, "j": 1, "w": 1.0 }, { "i": 2, "j": 3, "w": 1.0 } ] }
//! ```

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{CandidateGraph, EdgeSelection, SelectionKind, SignalMatrix};

pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_error(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

/// Parses signal CSV text. A first row that does not parse as numbers is a header.
/// With `transpose`, rows are snapshots and columns are nodes.
pub fn parse_signals(text: &str, transpose: bool) -> Result<SignalMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_error(line, 0, e.to_string())
        })?;
        let line = record.position().map_or(idx + 1, |p| p.line() as usize);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, usize> = record
            .iter()
            .enumerate()
            .map(|(c, f)| f.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or(c))
            .collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if rows.is_empty() && width.is_none() => {
                // header row of snapshot labels
                width = Some(record.len());
                continue;
            }
            Err(c) => {
                return Err(parse_error(
                    line,
                    c + 1,
                    format!("'{}' is not a finite number", &record[c]),
                ))
            }
        };
        match width {
            Some(w) if w != values.len() => {
                return Err(parse_error(
                    line,
                    values.len().min(w) + 1,
                    format!("expected {w} fields, found {}", values.len()),
                ))
            }
            _ => width = Some(values.len()),
        }
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(parse_error(0, 0, "no data rows"));
    }
    let (r, c) = (rows.len(), rows[0].len());
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let m = DMatrix::from_row_slice(r, c, &flat);
    SignalMatrix::new(if transpose { m.transpose() } else { m })
}

pub fn read_signals(path: &Path, transpose: bool) -> Result<SignalMatrix> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    parse_signals(&text, transpose)
}

pub fn write_signals_to<W: Write>(out: W, x: &SignalMatrix) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let m = x.as_matrix();
    for row in m.row_iter() {
        w.write_record(row.iter().map(|v| format_float(*v)))
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_signals(path: &Path, x: &SignalMatrix) -> Result<()> {
    write_signals_to(BufWriter::new(File::create(path)?), x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub i: usize,
    pub j: usize,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    pub n: usize,
    pub k: usize,
    pub edges: Vec<GraphEdge>,
}

impl GraphFile {
    pub fn from_selection(w: &EdgeSelection, graph: &CandidateGraph) -> Result<Self> {
        let mut edges = Vec::new();
        for m in w.support() {
            let e = graph.edge_from_index(m)?;
            edges.push(GraphEdge {
                i: e.i,
                j: e.j,
                w: w.weights()[m],
            });
        }
        Ok(GraphFile {
            n: graph.n(),
            k: w.k(),
            edges,
        })
    }

    /// Boolean when every weight is 1 and there are exactly `k` edges, relaxed otherwise.
    pub fn to_selection(&self) -> Result<(EdgeSelection, CandidateGraph)> {
        let graph = CandidateGraph::new(self.n)?;
        let mut weights = vec![0.0; graph.m_total()];
        let mut seen = vec![false; graph.m_total()];
        for e in &self.edges {
            let m = graph.edge_index(e.i, e.j)?;
            if seen[m] {
                return Err(Error::domain(format!("duplicate edge ({}, {})", e.i, e.j)));
            }
            if !(0.0..=1.0).contains(&e.w) {
                return Err(Error::domain(format!("edge ({}, {}) has weight {} outside [0, 1]", e.i, e.j, e.w)));
            }
            seen[m] = true;
            weights[m] = e.w;
        }
        let boolean = self.edges.iter().all(|e| e.w == 1.0) && self.edges.len() == self.k;
        let sel = if boolean {
            EdgeSelection::boolean_from_weights(weights)?
        } else {
            EdgeSelection::relaxed(weights, self.k)?
        };
        Ok((sel, graph))
    }

    pub fn kind(&self) -> SelectionKind {
        if self.edges.iter().all(|e| e.w == 1.0) && self.edges.len() == self.k {
            SelectionKind::Boolean
        } else {
            SelectionKind::Relaxed
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| parse_error(e.line(), e.column(), e.to_string()))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("graph file serializes");
        s.push('\n');
        s
    }
}

pub fn read_graph(path: &Path) -> Result<GraphFile> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    GraphFile::parse(&text)
}

pub fn write_graph(path: &Path, g: &GraphFile) -> Result<()> {
    std::fs::write(path, g.to_json())?;
    Ok(())
}
