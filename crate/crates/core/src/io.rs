//! Plain-text mesh and field files, and CSV tables.
//!
//! Mesh file:
//!
//! ```text
//! nodes <n>
//! x y            (n lines)
//! triangles <t>
//! i j k          (t lines, 0-based)
//! ```
//!
//! Field file: a header `field <n> epsilon <ε> a <a>` followed by one nodal
//! value per line, in mesh node order. Values are written with the shortest
//! representation that round-trips exactly.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::continuation::{BranchPoint, SweepRow};
use crate::discretization::Mesh;
use crate::error::{Error, Result};
use crate::solver::MultiStartReport;

/// A field file's contents.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldFile {
    pub epsilon: f64,
    pub a: f64,
    pub values: Vec<f64>,
}

fn format_err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Format(format!("line {line}: {msg}"))
}

/// Non-blank lines with their 1-based line numbers.
struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            inner: text.lines().enumerate(),
            last: 0,
        }
    }

    fn next_tokens(&mut self, what: &str) -> Result<(usize, Vec<&'a str>)> {
        for (k, line) in self.inner.by_ref() {
            self.last = k + 1;
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if !tokens.is_empty() {
                return Ok((k + 1, tokens));
            }
        }
        Err(format_err(self.last + 1, format!("unexpected end of file, expected {what}")))
    }

    fn expect_end(&mut self) -> Result<()> {
        for (k, line) in self.inner.by_ref() {
            if !line.trim().is_empty() {
                return Err(format_err(k + 1, "trailing content"));
            }
        }
        Ok(())
    }
}

fn parse<T: std::str::FromStr>(line: usize, token: &str) -> Result<T> {
    token.parse().map_err(|_| format_err(line, format!("cannot parse {token:?}")))
}

fn keyword_count(lines: &mut Lines, keyword: &str) -> Result<usize> {
    let (k, tokens) = lines.next_tokens(keyword)?;
    match tokens.as_slice() {
        [kw, n] if *kw == keyword => parse(k, n),
        _ => Err(format_err(k, format!("expected `{keyword} <count>`"))),
    }
}

pub fn mesh_to_string(mesh: &Mesh) -> String {
    let mut s = format!("nodes {}\n", mesh.nodes.len());
    for p in &mesh.nodes {
        s.push_str(&format!("{} {}\n", p[0], p[1]));
    }
    s.push_str(&format!("triangles {}\n", mesh.triangles.len()));
    for t in &mesh.triangles {
        s.push_str(&format!("{} {} {}\n", t[0], t[1], t[2]));
    }
    s
}

/// Parses and validates a mesh.
pub fn parse_mesh(text: &str) -> Result<Mesh> {
    let mut lines = Lines::new(text);
    let n = keyword_count(&mut lines, "nodes")?;
    let mut nodes = Vec::with_capacity(n);
    for _ in 0..n {
        let (k, tokens) = lines.next_tokens("a node")?;
        match tokens.as_slice() {
            [x, y] => nodes.push([parse(k, x)?, parse(k, y)?]),
            _ => return Err(format_err(k, "expected `x y`")),
        }
    }
    let t = keyword_count(&mut lines, "triangles")?;
    let mut triangles = Vec::with_capacity(t);
    for _ in 0..t {
        let (k, tokens) = lines.next_tokens("a triangle")?;
        match tokens.as_slice() {
            [i, j, l] => triangles.push([parse(k, i)?, parse(k, j)?, parse(k, l)?]),
            _ => return Err(format_err(k, "expected `i j k`")),
        }
    }
    lines.expect_end()?;
    Mesh::new(nodes, triangles)
}

pub fn write_mesh(path: &Path, mesh: &Mesh) -> Result<()> {
    fs::write(path, mesh_to_string(mesh))?;
    Ok(())
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn read_mesh(path: &Path) -> Result<Mesh> {
    parse_mesh(&read_text(path)?)
}

pub fn field_to_string(values: &[f64], epsilon: f64, a: f64) -> String {
    let mut s = format!("field {} epsilon {} a {}\n", values.len(), epsilon, a);
    for v in values {
        s.push_str(&format!("{v}\n"));
    }
    s
}

/// Parses a field file; a short or overlong value list is a format error.
pub fn parse_field(text: &str) -> Result<FieldFile> {
    let mut lines = Lines::new(text);
    let (k, tokens) = lines.next_tokens("a field header")?;
    let (n, epsilon, a) = match tokens.as_slice() {
        ["field", n, "epsilon", eps, "a", a] => (parse::<usize>(k, n)?, parse(k, eps)?, parse(k, a)?),
        _ => return Err(format_err(k, "expected `field <n> epsilon <eps> a <a>`")),
    };
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        let (k, tokens) = lines.next_tokens("a field value")?;
        match tokens.as_slice() {
            [v] => {
                let v: f64 = parse(k, v)?;
                if !v.is_finite() {
                    return Err(format_err(k, "non-finite value"));
                }
                values.push(v);
            }
            _ => return Err(format_err(k, "expected one value")),
        }
    }
    lines.expect_end()?;
    Ok(FieldFile { epsilon, a, values })
}

pub fn write_field(path: &Path, values: &[f64], epsilon: f64, a: f64) -> Result<()> {
    fs::write(path, field_to_string(values, epsilon, a))?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<FieldFile> {
    parse_field(&read_text(path)?)
}

/// One row of a multi-start batch summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchRow {
    pub epsilon: f64,
    pub start_id: usize,
    pub converged: bool,
    pub classification: String,
    pub mean: Option<f64>,
    pub sup_fluct: Option<f64>,
    pub residual_norm: Option<f64>,
    pub iters: Option<usize>,
}

pub fn batch_rows(report: &MultiStartReport) -> Vec<BatchRow> {
    report
        .outcomes
        .iter()
        .map(|o| match &o.result {
            Ok(rec) => BatchRow {
                epsilon: o.epsilon,
                start_id: o.start_id,
                converged: true,
                classification: rec.classification.label().to_string(),
                mean: Some(rec.mean),
                sup_fluct: Some(rec.sup_fluct),
                residual_norm: Some(rec.residual_norm),
                iters: Some(rec.newton_iters),
            },
            Err(_) => BatchRow {
                epsilon: o.epsilon,
                start_id: o.start_id,
                converged: false,
                classification: "failed".to_string(),
                mean: None,
                sup_fluct: None,
                residual_norm: None,
                iters: None,
            },
        })
        .collect()
}

/// One row of a branch file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchRow {
    pub epsilon: f64,
    pub mean: f64,
    pub sup_fluct: f64,
    pub stability_indicator: f64,
    pub residual_norm: f64,
}

impl From<&BranchPoint> for BranchRow {
    fn from(p: &BranchPoint) -> Self {
        Self {
            epsilon: p.epsilon,
            mean: p.solution.mean,
            sup_fluct: p.solution.sup_fluct,
            stability_indicator: p.stability_indicator,
            residual_norm: p.solution.residual_norm,
        }
    }
}

/// Writes rows with a header line to any writer.
pub fn write_csv<W: Write, R: Serialize>(writer: W, rows: &[R]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

fn write_csv_file<R: Serialize>(path: &Path, rows: &[R]) -> Result<()> {
    write_csv(fs::File::create(path)?, rows)
}

/// Batch summary CSV for one or more multi-start runs.
pub fn write_batch_csv(path: &Path, reports: &[MultiStartReport]) -> Result<()> {
    let rows: Vec<BatchRow> = reports.iter().flat_map(batch_rows).collect();
    write_csv_file(path, &rows)
}

pub fn write_branch_csv(path: &Path, branch: &[BranchPoint]) -> Result<()> {
    let rows: Vec<BranchRow> = branch.iter().map(BranchRow::from).collect();
    write_csv_file(path, &rows)
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    write_csv_file(path, rows)
}
