//! Text formats.
//!
//! Graphs: a header line `n directed` (`directed` is `0`/`1`, also accepted
//! as `false`/`true` or `und`/`dir`), then `n` lines of `n` characters `0` or
//! `1`, row `i` holding the adjacency of node `i`.
//!
//! Vectors: numbers separated by commas, whitespace or newlines; lines
//! starting with `#` are ignored.

use std::io::{BufRead, Write};
use std::path::Path;

use opinion_mf_core::rand_graph::Graph;
use serde::Serialize;

use crate::error::{invalid, Error, Result};

pub fn write_graph<W: Write>(g: &Graph, mut w: W) -> Result<()> {
    let n = g.n();
    writeln!(w, "{} {}", n, u8::from(g.is_directed()))?;
    let adj = g.adjacency();
    let mut line = String::with_capacity(n + 1);
    for i in 0..n {
        line.clear();
        line.extend(adj[i * n..(i + 1) * n].iter().map(|&b| if b { '1' } else { '0' }));
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    Ok(())
}

fn format_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Format { line, msg: msg.into() }
}

pub fn read_graph<R: BufRead>(r: R) -> Result<Graph> {
    let mut lines = r.lines().enumerate().filter(|(_, l)| l.as_ref().map_or(true, |l| !l.trim().is_empty()));
    let (_, header) = lines.next().ok_or_else(|| format_err(1, "missing header"))?;
    let header = header?;
    let mut parts = header.split_whitespace();
    let n: usize = parts
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| format_err(1, "header must start with the node count"))?;
    let directed = match parts.next() {
        Some("1" | "true" | "dir" | "directed") => true,
        Some("0" | "false" | "und" | "undirected") => false,
        _ => return Err(format_err(1, "header must be `n directed` with directed in {0, 1}")),
    };
    let mut adj = Vec::with_capacity(n * n);
    for row in 0..n {
        let (idx, line) = lines.next().ok_or_else(|| format_err(row + 2, "missing adjacency row"))?;
        let line = line?;
        let line = line.trim();
        if line.len() != n {
            return Err(format_err(idx + 1, format!("expected {n} characters, found {}", line.len())));
        }
        for c in line.chars() {
            match c {
                '0' => adj.push(false),
                '1' => adj.push(true),
                _ => return Err(format_err(idx + 1, format!("unexpected character {c:?}"))),
            }
        }
    }
    if let Some((idx, _)) = lines.next() {
        return Err(format_err(idx + 1, "trailing content after the adjacency rows"));
    }
    Ok(Graph::from_adjacency(n, directed, &adj)?)
}

pub fn parse_vector(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.starts_with('#') {
            continue;
        }
        for token in line.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
            let v: f64 = token.parse().map_err(|_| format_err(idx + 1, format!("not a number: {token:?}")))?;
            out.push(v);
        }
    }
    Ok(out)
}

pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    parse_vector(&text)
}

pub fn write_csv<T: Serialize, W: Write>(rows: &[T], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for row in rows {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}

/// Provenance attached to every JSON document and written next to CSV files.
#[derive(Debug, Clone, Serialize)]
pub struct RunMetadata {
    pub tool: &'static str,
    pub version: &'static str,
    pub generator: &'static str,
    pub threads: usize,
}

impl RunMetadata {
    pub fn new(threads: usize) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            generator: opinion_mf_core::rng::GENERATOR_ID,
            threads,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use opinion_mf_core::rand_graph::{self, ErModel};

    #[test]
    fn graph_round_trip() {
        for model in [ErModel::undirected(7, 0.4).unwrap(), ErModel::directed(6, 0.3).unwrap()] {
            let g = rand_graph::sample(&model, 99);
            let mut buf = Vec::new();
            write_graph(&g, &mut buf).unwrap();
            assert_eq!(read_graph(buf.as_slice()).unwrap(), g);
        }
    }

    #[test]
    fn graph_format_text() {
        let g = Graph::from_edges(3, true, &[(0, 1), (0, 2)]).unwrap();
        let mut buf = Vec::new();
        write_graph(&g, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "3 1\n011\n000\n000\n");
    }

    #[test]
    fn graph_format_errors() {
        assert!(read_graph("".as_bytes()).is_err());
        assert!(read_graph("2 maybe\n01\n10\n".as_bytes()).is_err());
        assert!(read_graph("2 0\n01\n".as_bytes()).is_err());
        assert!(read_graph("2 0\n01\n00\n".as_bytes()).is_err());
        assert!(read_graph("2 0\n11\n11\n".as_bytes()).is_err());
        assert!(read_graph("2 0\n01\n10\n01\n".as_bytes()).is_err());
        assert!(read_graph("2 und\n0x\n10\n".as_bytes()).is_err());
        assert!(read_graph("2 und\n01\n10\n".as_bytes()).is_ok());
    }

    #[test]
    fn vectors() {
        assert_eq!(parse_vector("0, 1\n# note\n0.5 0.25\n").unwrap(), vec![0.0, 1.0, 0.5, 0.25]);
        assert!(parse_vector("0, one").is_err());
    }
}
