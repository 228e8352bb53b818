//! File access and the tab-separated output formats.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use kinetic_rknn::dataset::{self, Dataset, Query};
use kinetic_rknn::kinetic::{EventKind, EventReport};
use kinetic_rknn::{Error, KnnTable, PointId, ProximityGraph, RknnAnswer};

use crate::error::CliError;

pub fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

pub fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

fn located(path: &Path, e: Error) -> CliError {
    match e {
        Error::Parse { line, message } => CliError::Parse {
            path: path.to_owned(),
            line,
            message,
        },
        other => other.into(),
    }
}

pub fn load_dataset(path: &Path) -> Result<Dataset, CliError> {
    Dataset::parse(&read(path)?).map_err(|e| located(path, e))
}

pub fn load_queries(path: &Path, dimension: usize) -> Result<Vec<Query>, CliError> {
    dataset::parse_queries(&read(path)?, dimension).map_err(|e| located(path, e))
}

/// `edge` lines followed by `knn` lines.
pub fn graph_text(graph: &ProximityGraph, knn: &KnnTable) -> String {
    let mut out = String::new();
    for (a, b) in graph.edges() {
        writeln!(out, "edge\t{a}\t{b}").unwrap();
    }
    for (p, row) in knn.rows() {
        for (rank, (q, dist)) in row.iter().enumerate() {
            writeln!(out, "knn\t{p}\t{}\t{q}\t{dist}", rank + 1).unwrap();
        }
    }
    out
}

/// Reads the `edge` lines of a graph file.
pub fn load_graph(path: &Path) -> Result<ProximityGraph, CliError> {
    let text = read(path)?;
    let mut graph = ProximityGraph::new();
    for (i, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.first() != Some(&"edge") {
            continue;
        }
        let id = |s: &str| -> Result<PointId, CliError> {
            s.trim().parse().map(PointId).map_err(|_| CliError::Parse {
                path: path.to_owned(),
                line: i + 1,
                message: format!("bad point id {s:?}"),
            })
        };
        if fields.len() != 3 {
            return Err(CliError::Parse {
                path: path.to_owned(),
                line: i + 1,
                message: "edge record needs two ids".into(),
            });
        }
        graph.insert_undirected(id(fields[1])?, id(fields[2])?);
    }
    Ok(graph)
}

fn id_list(ids: &[PointId]) -> String {
    if ids.is_empty() {
        return "-".into();
    }
    ids.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

pub fn answer_line(index: usize, k: usize, answer: &RknnAnswer) -> String {
    format!(
        "query\t{index}\t{}\t{k}\t{}\t{}\t{}",
        answer.time,
        id_list(&answer.members),
        answer.candidates_examined,
        u8::from(answer.coincident)
    )
}

fn pairs(edges: &[(PointId, PointId)]) -> String {
    if edges.is_empty() {
        return "-".into();
    }
    edges.iter().map(|(a, b)| format!("{a}-{b}")).collect::<Vec<_>>().join(",")
}

pub const REPORT_HEADER: &str = "# time\tkind\tline\tcone\ta\tb\towner\tadded\tremoved";

pub fn report_line(r: &EventReport) -> String {
    let kind = match r.kind {
        EventKind::USwap => "u",
        EventKind::XSwap => "x",
        EventKind::Distance => "dist",
    };
    let opt = |v: Option<usize>| v.map_or("-".to_string(), |x| x.to_string());
    format!(
        "{}\t{kind}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
        r.time,
        opt(r.line),
        opt(r.cone),
        r.points.0,
        r.points.1,
        r.owner.map_or("-".to_string(), |o| o.to_string()),
        pairs(&r.added),
        pairs(&r.removed)
    )
}
