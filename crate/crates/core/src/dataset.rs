//! Line-oriented dataset and query files.
//!
//! A dataset starts with the header `d s n k` followed by `n` records
//! `id c10 c11 ... ; c20 c21 ... ; ...`, one coefficient group per coordinate
//! with the constant term first. A query file has one `t x1 ... xd k` per
//! line. Blank lines and lines starting with `#` are ignored in both.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::trajectories::Trajectory;
use crate::{PointId, Site};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub dimension: usize,
    pub degree: usize,
    pub k: usize,
    /// Sorted by id, ids are `0..n`.
    pub trajectories: Vec<Trajectory>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub time: f64,
    pub point: Vec<f64>,
    pub k: usize,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn number<T: FromStr>(tok: &str, line: usize, what: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| parse_err(line, format!("{what}: cannot parse {tok:?}")))
}

fn finite(tok: &str, line: usize, what: &str) -> Result<f64> {
    let v: f64 = number(tok, line, what)?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("{what}: {tok:?} is not finite")));
    }
    Ok(v)
}

/// Non-comment lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    /// Whether every trajectory is constant.
    pub fn is_static(&self) -> bool {
        self.trajectories.iter().all(|t| t.degree() == 0)
    }

    pub fn positions(&self, t: f64) -> Vec<Site> {
        self.trajectories.iter().map(|tr| (tr.id, tr.position(t))).collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = content_lines(text);
        let (hline, header) = lines.next().ok_or_else(|| parse_err(1, "missing header `d s n k`"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(parse_err(hline, "header must be `d s n k`"));
        }
        let dimension: usize = number(fields[0], hline, "dimension")?;
        let degree: usize = number(fields[1], hline, "degree")?;
        let n: usize = number(fields[2], hline, "point count")?;
        let k: usize = number(fields[3], hline, "k")?;
        if dimension < 1 {
            return Err(parse_err(hline, "dimension must be at least 1"));
        }

        let mut slots: Vec<Option<Trajectory>> = vec![None; n];
        let mut last = hline;
        for (ln, record) in lines.by_ref().take(n) {
            last = ln;
            let (head, rest) = record
                .split_once(char::is_whitespace)
                .ok_or_else(|| parse_err(ln, "record has no coefficients"))?;
            let id: u32 = number(head, ln, "point id")?;
            let idx = id as usize;
            if idx >= n {
                return Err(parse_err(ln, format!("point id {id} outside 0..{n}")));
            }
            if slots[idx].is_some() {
                return Err(parse_err(ln, format!("duplicate point id {id}")));
            }
            let groups: Vec<&str> = rest.split(';').collect();
            if groups.len() != dimension {
                return Err(parse_err(
                    ln,
                    format!("point {id}: expected {dimension} coefficient groups, found {}", groups.len()),
                ));
            }
            let mut coeffs = Vec::with_capacity(dimension);
            for (j, g) in groups.iter().enumerate() {
                let cs = g
                    .split_whitespace()
                    .map(|tok| finite(tok, ln, &format!("point {id} coordinate {}", j + 1)))
                    .collect::<Result<Vec<f64>>>()?;
                if cs.is_empty() {
                    return Err(parse_err(ln, format!("point {id}: coordinate {} has no coefficients", j + 1)));
                }
                if cs.len() > degree + 1 {
                    return Err(parse_err(
                        ln,
                        format!("point {id}: coordinate {} exceeds degree {degree}", j + 1),
                    ));
                }
                coeffs.push(cs);
            }
            slots[idx] = Some(Trajectory::new(PointId(id), coeffs));
        }
        if let Some((ln, _)) = lines.next() {
            return Err(parse_err(ln, format!("more than {n} records")));
        }
        let trajectories = slots
            .into_iter()
            .enumerate()
            .map(|(i, s)| s.ok_or_else(|| parse_err(last, format!("missing record for point id {i}"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { dimension, degree, k, trajectories })
    }

    /// Serializes with every coordinate padded to `degree + 1` coefficients.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {} {} {}\n", self.dimension, self.degree, self.len(), self.k);
        for tr in &self.trajectories {
            write!(out, "{}", tr.id).unwrap();
            for (j, c) in tr.coords().iter().enumerate() {
                if j > 0 {
                    out.push_str(" ;");
                }
                for i in 0..=self.degree {
                    write!(out, " {}", c.coeffs().get(i).copied().unwrap_or(0.0)).unwrap();
                }
            }
            out.push('\n');
        }
        out
    }

    /// `n` trajectories with coefficients uniform in `[-1, 1]`.
    pub fn generate(n: usize, dimension: usize, degree: usize, k: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trajectories = (0..n)
            .map(|i| {
                let coeffs = (0..dimension)
                    .map(|_| (0..=degree).map(|_| rng.gen_range(-1.0..=1.0)).collect())
                    .collect();
                Trajectory::new(PointId(i as u32), coeffs)
            })
            .collect();
        Self { dimension, degree, k, trajectories }
    }
}

/// Parses a query file for points of dimension `dimension`.
pub fn parse_queries(text: &str, dimension: usize) -> Result<Vec<Query>> {
    content_lines(text)
        .map(|(ln, line)| {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != dimension + 2 {
                return Err(parse_err(ln, format!("query needs `t x1 .. x{dimension} k`, found {} fields", f.len())));
            }
            let time = finite(f[0], ln, "query time")?;
            let point = f[1..=dimension]
                .iter()
                .map(|tok| finite(tok, ln, "query coordinate"))
                .collect::<Result<Vec<_>>>()?;
            let k = number(f[dimension + 1], ln, "query k")?;
            Ok(Query { time, point, k })
        })
        .collect()
}

pub fn queries_to_text(queries: &[Query]) -> String {
    let mut out = String::new();
    for q in queries {
        write!(out, "{}", q.time).unwrap();
        for x in &q.point {
            write!(out, " {x}").unwrap();
        }
        writeln!(out, " {}", q.k).unwrap();
    }
    out
}
