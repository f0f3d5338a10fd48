//! Plain-text formats for graphs, delays and matrices.
//!
//! Graph files start with `nodes N` followed by one `from to` pair per line.
//! Indices are 0-based and self-loops are added automatically. Delay files
//! hold `from to delay` triples. Matrix files are dense, one row per line.
//! Blank lines and `#` comments are ignored everywhere.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::builtin;
use crate::digraph::Digraph;
use crate::error::{Error, Result};
use crate::gossip::DelaySpec;

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.split('#').next().unwrap_or("").trim();
        (!line.is_empty()).then_some((i + 1, line))
    })
}

fn parse_fields<const K: usize>(line_no: usize, line: &str) -> Result<[usize; K]> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != K {
        return Err(Error::Parse {
            line: line_no,
            message: format!("expected {K} fields, found {}", fields.len()),
        });
    }
    let mut out = [0; K];
    for (o, f) in out.iter_mut().zip(&fields) {
        *o = f.parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("not a non-negative integer: {f:?}"),
        })?;
    }
    Ok(out)
}

pub fn parse_graph(text: &str) -> Result<Digraph> {
    let mut lines = content_lines(text);
    let (line_no, header) = lines.next().ok_or(Error::Parse {
        line: 0,
        message: "empty graph file".into(),
    })?;
    let n = match header.split_whitespace().collect::<Vec<_>>()[..] {
        ["nodes", n] => n.parse::<usize>().ok(),
        _ => None,
    }
    .ok_or_else(|| Error::Parse {
        line: line_no,
        message: "expected header `nodes N`".into(),
    })?;
    let mut edges = Vec::new();
    for (line_no, line) in lines {
        let [from, to] = parse_fields::<2>(line_no, line)?;
        if from >= n || to >= n {
            return Err(Error::Parse {
                line: line_no,
                message: format!("edge {from} -> {to} out of range for {n} nodes"),
            });
        }
        edges.push((from, to));
    }
    Digraph::with_self_loops(n, edges)
}

/// Inverse of [`parse_graph`]; self-loops are left implicit.
pub fn write_graph(g: &Digraph) -> String {
    let mut out = format!("nodes {}\n", g.node_count());
    for (from, to) in g.edges().filter(|(f, t)| f != t) {
        writeln!(out, "{from} {to}").unwrap();
    }
    out
}

pub fn parse_delays(text: &str) -> Result<DelaySpec> {
    let mut spec = DelaySpec::new();
    let mut seen = std::collections::BTreeSet::new();
    for (line_no, line) in content_lines(text) {
        let [from, to, delay] = parse_fields::<3>(line_no, line)?;
        if !seen.insert((from, to)) {
            return Err(Error::Parse {
                line: line_no,
                message: format!("second delay for {from} -> {to}"),
            });
        }
        spec.insert(from, to, delay);
    }
    Ok(spec)
}

pub fn write_delays(spec: &DelaySpec) -> String {
    let mut out = String::new();
    for ((from, to), delay) in spec.iter() {
        writeln!(out, "{from} {to} {delay}").unwrap();
    }
    out
}

pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line_no, line) in content_lines(text) {
        let row = line
            .split_whitespace()
            .map(|f| {
                f.parse::<f64>().map_err(|_| Error::Parse {
                    line: line_no,
                    message: format!("not a number: {f:?}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("row has {} entries, expected {}", row.len(), first.len()),
                });
            }
        }
        rows.push(row);
    }
    let n = rows.len();
    if n == 0 || rows[0].len() != n {
        return Err(Error::InvalidMatrix(format!(
            "expected a square matrix, found {n} rows of {} entries",
            rows.first().map_or(0, Vec::len)
        )));
    }
    Ok(DMatrix::from_fn(n, n, |r, c| rows[r][c]))
}

/// Row-major, space separated, in shortest round-trip notation.
pub fn write_matrix(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for r in 0..m.nrows() {
        let row: Vec<String> = m.row(r).iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

/// Reads a whole file; the error names the path.
pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

/// Resolves `builtin:<name>` or reads a graph file. Builtins may carry
/// their own delays.
pub fn load_graph(source: &str) -> Result<(Digraph, DelaySpec)> {
    if let Some(name) = source.strip_prefix("builtin:") {
        return builtin::named(name)
            .ok_or_else(|| Error::InvalidGraph(format!("unknown builtin graph {name:?}")));
    }
    Ok((
        parse_graph(&read_text(Path::new(source))?)?,
        DelaySpec::new(),
    ))
}

pub fn load_delays(path: &Path) -> Result<DelaySpec> {
    parse_delays(&read_text(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin::five_node_example;
    use crate::digraph::random_digraph;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn graph_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..20 {
            let g = random_digraph(n, 0.3, &mut rng).unwrap();
            assert_eq!(parse_graph(&write_graph(&g)).unwrap(), g);
        }
        let text = "# example\nnodes 5\n2 3\n3 1  # delayed in fig3\n1 2\n1 0\n0 2\n4 2\n2 4\n\n";
        assert_eq!(parse_graph(text).unwrap(), five_node_example());
    }

    #[test]
    fn graph_errors() {
        assert!(matches!(parse_graph(""), Err(Error::Parse { line: 0, .. })));
        assert!(matches!(
            parse_graph("5\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_graph("nodes 3\n0 1\n1 3\n"),
            Err(Error::Parse { line: 3, .. })
        ));
        assert!(matches!(
            parse_graph("nodes 3\n0 1 2\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_graph("nodes 3\n0 -1\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(parse_graph("nodes 0\n").is_err());
    }

    #[test]
    fn delays_round_trip() {
        let spec: DelaySpec = [((0, 1), 3), ((4, 2), 1), ((2, 0), 7)]
            .into_iter()
            .collect();
        assert_eq!(parse_delays(&write_delays(&spec)).unwrap(), spec);
        // A zero delay is the same as no entry.
        assert!(parse_delays("0 1 0\n").unwrap().is_empty());
        assert!(parse_delays("0 1 2\n0 1 3\n").is_err());
        assert!(parse_delays("0 1\n").is_err());
    }

    #[test]
    fn matrix_round_trip() {
        let m = DMatrix::from_row_slice(
            3,
            3,
            &[0.5, 0.25, 0.25, 1.0 / 3.0, 2.0 / 3.0, 0.0, 0.0, 0.1, 0.9],
        );
        assert_eq!(parse_matrix(&write_matrix(&m)).unwrap(), m);
        assert!(parse_matrix("1 0\n0\n").is_err());
        assert!(matches!(
            parse_matrix("1 0\n"),
            Err(Error::InvalidMatrix(_))
        ));
        assert!(parse_matrix("1 x\n0 1\n").is_err());
    }

    #[test]
    fn sources() {
        let (g, d) = load_graph("builtin:fig3").unwrap();
        assert_eq!(g, five_node_example());
        assert_eq!(d.max_delay(), 2);
        assert!(matches!(
            load_graph("builtin:nope"),
            Err(Error::InvalidGraph(_))
        ));
        assert!(matches!(
            load_graph("/nonexistent/graph.txt"),
            Err(Error::Io(_))
        ));
    }
}
