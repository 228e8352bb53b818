use std::collections::hash_map::Entry;
use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::time::Instant;

use kinetic_rknn::dataset::{Dataset, Query};
use kinetic_rknn::ksyg_knn::{all_knn, build_ksyg, knng_subgraph_check};
use kinetic_rknn::oracle::{brute_knn, brute_ksyg, brute_rknn};
use kinetic_rknn::rknn_query::{rknn_kinetic, StaticIndex};
use kinetic_rknn::{ConeFamily, KineticState, KnnTable, PointId, ProximityGraph, RknnAnswer, Site};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::CliError;
use crate::io;

/// Largest input the brute-force checks are run on.
const ORACLE_LIMIT: usize = 4096;
/// Largest input the kinetic check of `validate` is run on.
const KINETIC_CHECK_LIMIT: usize = 256;
const RANDOM_QUERIES: usize = 20;
/// Events processed per size in the benchmark sweep.
const SWEEP_EVENTS: usize = 2000;

fn resolve_k(k: Option<usize>, data: &Dataset) -> usize {
    k.unwrap_or(data.k)
}

fn family(data: &Dataset) -> Result<ConeFamily, CliError> {
    Ok(ConeFamily::with_default_angle(data.dimension)?)
}

pub fn build(input: &Path, k: Option<usize>, time: f64, out: &Path) -> Result<(), CliError> {
    let data = io::load_dataset(input)?;
    let k = resolve_k(k, &data);
    let points = data.positions(time);
    let graph = build_ksyg(&points, k, &family(&data)?)?;
    let knn = all_knn(&graph, &points, k)?;
    io::write(out, &io::graph_text(&graph, &knn))?;
    println!("points\t{}", points.len());
    println!("edges\t{}", graph.edge_count());
    Ok(())
}

fn same_members(a: &RknnAnswer, b: &RknnAnswer) -> bool {
    let mut x = a.members.clone();
    let mut y = b.members.clone();
    x.sort();
    y.sort();
    x == y
}

pub fn query(
    input: &Path,
    k: Option<usize>,
    start: f64,
    queries: &Path,
    kinetic: bool,
    validate: bool,
) -> Result<(), CliError> {
    let data = io::load_dataset(input)?;
    let default_k = resolve_k(k, &data);
    let fam = family(&data)?;
    let mut list = io::load_queries(queries, data.dimension)?;
    // A query line carries its own k; 0 means "use the default".
    for q in &mut list {
        if q.k == 0 {
            q.k = default_k;
        }
    }

    let answers = if kinetic {
        kinetic_answers(&data, &fam, start, &list)?
    } else {
        static_answers(&data, &fam, &list)?
    };

    let mut mismatches = 0;
    for (i, (q, answer)) in list.iter().zip(&answers).enumerate() {
        println!("{}", io::answer_line(i, q.k, answer));
        if validate {
            let expect = brute_rknn(&data.positions(q.time), &q.point, q.k)?;
            if !same_members(answer, &expect) {
                mismatches += 1;
                eprintln!("query {i}: expected {:?}, got {:?}", expect.members, answer.members);
            }
        }
    }
    if mismatches > 0 {
        return Err(CliError::Mismatch(format!("{mismatches} answers differ from brute force")));
    }
    Ok(())
}

fn static_answers(data: &Dataset, fam: &ConeFamily, list: &[Query]) -> Result<Vec<RknnAnswer>, CliError> {
    let mut indexes: HashMap<(u64, usize), StaticIndex> = HashMap::new();
    let mut out = Vec::with_capacity(list.len());
    for q in list {
        let key = (q.time.to_bits(), q.k);
        let index = match indexes.entry(key) {
            Entry::Occupied(e) => e.into_mut(),
            Entry::Vacant(e) => e.insert(StaticIndex::build(data.positions(q.time), q.k, fam.clone())?),
        };
        let mut answer = index.query(&q.point)?;
        answer.time = q.time;
        out.push(answer);
    }
    Ok(out)
}

/// One kinetic state per distinct k, each advanced through its queries in
/// file order.
fn kinetic_answers(data: &Dataset, fam: &ConeFamily, start: f64, list: &[Query]) -> Result<Vec<RknnAnswer>, CliError> {
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, q) in list.iter().enumerate() {
        groups.entry(q.k).or_default().push(i);
    }
    let mut out: Vec<Option<RknnAnswer>> = vec![None; list.len()];
    for (k, members) in groups {
        let mut state = KineticState::initialize(&data.trajectories, k, fam.clone(), start)?;
        for i in members {
            let q = &list[i];
            out[i] = Some(rknn_kinetic(&mut state, &q.point, k, q.time)?);
        }
    }
    Ok(out.into_iter().map(|a| a.expect("every query belongs to a group")).collect())
}

/// First point whose k-th distance differs, with both distances.
fn knn_difference(got: &KnnTable, expect: &KnnTable) -> Option<(PointId, Option<f64>, Option<f64>)> {
    for (p, _) in expect.rows() {
        let a = got.kth_distance(p);
        let b = expect.kth_distance(p);
        let close = match (a, b) {
            (Some(x), Some(y)) => (x - y).abs() <= 1e-9 * (1.0 + y.abs()),
            _ => false,
        };
        if !close {
            return Some((p, a, b));
        }
    }
    (got.len() != expect.len()).then_some((PointId(u32::MAX), None, None))
}

fn edge_difference(got: &ProximityGraph, expect: &ProximityGraph) -> Option<String> {
    if let Some((a, b)) = expect.edges().find(|&(a, b)| !got.contains(a, b)) {
        return Some(format!("missing edge {a}-{b}"));
    }
    got.edges()
        .find(|&(a, b)| !expect.contains(a, b))
        .map(|(a, b)| format!("extra edge {a}-{b}"))
}

fn envelope(fam: &ConeFamily, degree: usize, n: usize) -> usize {
    fam.lines().len() * degree.max(1) * n * n.saturating_sub(1) / 2
}

pub fn simulate(
    input: &Path,
    k: Option<usize>,
    from: f64,
    to: f64,
    sample: Option<usize>,
    report: Option<&Path>,
) -> Result<(), CliError> {
    if !(from <= to) {
        return Err(CliError::Usage(format!("--from {from} must not exceed --to {to}")));
    }
    let data = io::load_dataset(input)?;
    let k = resolve_k(k, &data);
    let fam = family(&data)?;
    let mut state = KineticState::initialize(&data.trajectories, k, fam.clone(), from)?;

    let mut stops: Vec<f64> = match sample {
        Some(m) if m > 0 => (1..=m).map(|i| from + (to - from) * i as f64 / m as f64).collect(),
        _ => Vec::new(),
    };
    stops.push(to);
    stops.dedup();
    let check = sample.is_some_and(|m| m > 0);
    if check && data.len() > ORACLE_LIMIT {
        return Err(CliError::Usage(format!("--sample needs at most {ORACLE_LIMIT} points")));
    }

    let mut lines = vec![io::REPORT_HEADER.to_string()];
    let mut mismatches = 0usize;
    for &t in &stops {
        for r in state.advance(t)? {
            lines.push(io::report_line(&r));
        }
        if check {
            let points = state.positions();
            let graph = state.graph();
            if let Some(diff) = edge_difference(&graph, &brute_ksyg(&points, k, &fam)?) {
                mismatches += 1;
                eprintln!("t = {t}: {diff}");
            }
            if let Some((p, a, b)) = knn_difference(&state.knn_table(), &brute_knn(&points, k)?) {
                mismatches += 1;
                eprintln!("t = {t}: k-th distance of {p} is {a:?}, expected {b:?}");
            }
        }
    }
    if let Some(path) = report {
        io::write(path, &(lines.join("\n") + "\n"))?;
    }

    let s = state.stats();
    println!("order_events\t{}", s.order_events);
    println!("u_swaps\t{}", s.u_swaps);
    println!("x_swaps\t{}", s.x_swaps);
    println!("distance_events\t{}", s.distance_events);
    println!("chi_k\t{}", s.chi_k);
    println!("touched_max\t{}", s.touched_max);
    println!("touched_mean\t{:.3}", s.touched_mean());
    println!("edges\t{}", state.edge_count());
    println!("mismatches\t{mismatches}");
    println!("envelope\t{}", envelope(&fam, data.degree, data.len()));
    if mismatches > 0 {
        return Err(CliError::Mismatch(format!("{mismatches} sampled checks failed")));
    }
    Ok(())
}

pub enum Source {
    File(PathBuf),
    Generated { count: u64, n: usize, d: usize, s: usize },
}

struct Outcome {
    name: &'static str,
    pass: Option<bool>,
    detail: String,
    counterexample: Option<String>,
}

impl Outcome {
    fn pass(name: &'static str, detail: String) -> Self {
        Self { name, pass: Some(true), detail, counterexample: None }
    }

    fn fail(name: &'static str, detail: String, counterexample: String) -> Self {
        Self { name, pass: Some(false), detail, counterexample: Some(counterexample) }
    }

    fn skip(name: &'static str, detail: String) -> Self {
        Self { name, pass: None, detail, counterexample: None }
    }
}

fn random_queries(points: &[Site], d: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for (_, p) in points {
        for j in 0..d {
            lo[j] = lo[j].min(p[j]);
            hi[j] = hi[j].max(p[j]);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (0..d).map(|j| lo[j] + (hi[j] - lo[j]) * rng.gen::<f64>()).collect())
        .collect()
}

fn check_dataset(data: &Dataset, k: usize, time: f64, graph_file: Option<&Path>) -> Result<Vec<Outcome>, CliError> {
    let fam = family(data)?;
    let points = data.positions(time);
    let n = points.len();
    let graph = match graph_file {
        Some(path) => io::load_graph(path)?,
        None => build_ksyg(&points, k, &fam)?,
    };
    let mut out = Vec::new();

    let bound = fam.len() * k * n;
    let edges = graph.edge_count();
    out.push(if edges <= bound {
        Outcome::pass("edge_bound", format!("{edges} <= {bound}"))
    } else {
        Outcome::fail("edge_bound", format!("{edges} > {bound}"), format!("{edges} edges"))
    });

    if n > ORACLE_LIMIT {
        for name in ["knng_subgraph", "all_knn_vs_brute", "ksyg_vs_brute", "rknn_vs_brute"] {
            out.push(Outcome::skip(name, format!("n = {n} > {ORACLE_LIMIT}")));
        }
    } else {
        let truth = brute_knn(&points, k)?;
        out.push(if knng_subgraph_check(&graph, &points, k) {
            Outcome::pass("knng_subgraph", format!("n = {n}, k = {k}"))
        } else {
            let (p, q) = truth
                .rows()
                .flat_map(|(p, row)| row.iter().map(move |&(q, _)| (p, q)))
                .find(|&(p, q)| !graph.contains(p, q))
                .unwrap_or((PointId(u32::MAX), PointId(u32::MAX)));
            Outcome::fail("knng_subgraph", format!("n = {n}, k = {k}"), format!("neighbor edge {p}-{q} missing"))
        });

        out.push(match all_knn(&graph, &points, k).map(|t| knn_difference(&t, &truth)) {
            Ok(None) => Outcome::pass("all_knn_vs_brute", format!("{n} rows")),
            Ok(Some((p, a, b))) => Outcome::fail(
                "all_knn_vs_brute",
                format!("{n} rows"),
                format!("point {p}: k-th distance {a:?}, expected {b:?}"),
            ),
            Err(e) => Outcome::fail("all_knn_vs_brute", format!("{n} rows"), e.to_string()),
        });

        let expect = brute_ksyg(&points, k, &fam)?;
        out.push(match edge_difference(&graph, &expect) {
            None => Outcome::pass("ksyg_vs_brute", format!("{edges} edges")),
            Some(diff) => Outcome::fail("ksyg_vs_brute", format!("{edges} edges, expected {}", expect.edge_count()), diff),
        });

        let index = StaticIndex::build(points.clone(), k, fam.clone())?;
        let queries = random_queries(&points, data.dimension, RANDOM_QUERIES, n as u64);
        let mut bad = None;
        for q in &queries {
            let got = index.query(q)?;
            let want = brute_rknn(&points, q, k)?;
            if !same_members(&got, &want) {
                bad = Some(format!("query {q:?}: got {:?}, expected {:?}", got.members, want.members));
                break;
            }
        }
        out.push(match bad {
            None => Outcome::pass("rknn_vs_brute", format!("{RANDOM_QUERIES} queries")),
            Some(c) => Outcome::fail("rknn_vs_brute", format!("{RANDOM_QUERIES} queries"), c),
        });
    }

    if n > KINETIC_CHECK_LIMIT {
        out.push(Outcome::skip("kinetic", format!("n = {n} > {KINETIC_CHECK_LIMIT}")));
    } else {
        let mut state = KineticState::initialize(&data.trajectories, k, fam.clone(), time)?;
        let mut bad = None;
        for step in 1..=5 {
            let t = time + step as f64 / 5.0;
            state.advance(t)?;
            if let Err(e) = state.check_consistency() {
                bad = Some(format!("t = {t}: {e}"));
                break;
            }
        }
        let detail = format!("{} events on [{time}, {}]", state.stats().order_events, time + 1.0);
        out.push(match bad {
            None => Outcome::pass("kinetic", detail),
            Some(c) => Outcome::fail("kinetic", detail, c),
        });
    }
    Ok(out)
}

pub fn validate(source: Source, k: Option<usize>, time: f64, graph: Option<&Path>) -> Result<(), CliError> {
    let datasets: Vec<(String, Dataset)> = match source {
        Source::File(path) => vec![(path.display().to_string(), io::load_dataset(&path)?)],
        Source::Generated { count, n, d, s } => (0..count)
            .map(|seed| (format!("seed {seed}"), Dataset::generate(n, d, s, k.unwrap_or(1), seed)))
            .collect(),
    };
    let mut failed = 0;
    for (label, data) in &datasets {
        let k = resolve_k(k, data);
        for o in check_dataset(data, k, time, graph)? {
            let verdict = match o.pass {
                Some(true) => "pass",
                Some(false) => "FAIL",
                None => "skip",
            };
            println!("check\t{}\t{verdict}\t{label}: {}", o.name, o.detail);
            if let Some(c) = o.counterexample {
                failed += 1;
                println!("counterexample\t{}\t{c}", o.name);
            }
        }
    }
    if failed > 0 {
        return Err(CliError::Mismatch(format!("{failed} checks failed")));
    }
    Ok(())
}

/// Processes up to `cap` events and returns how many were handled.
fn run_events(state: &mut KineticState, until: f64, cap: usize) -> Result<usize, CliError> {
    let mut handled = 0;
    while handled < cap {
        match state.next_event_time() {
            Some(t) if t <= until => handled += state.advance(t)?.len(),
            _ => break,
        }
    }
    Ok(handled)
}

pub fn bench(input: &Path, k: Option<usize>, repeat: usize, time: f64, sweep: bool) -> Result<(), CliError> {
    let data = io::load_dataset(input)?;
    let k = resolve_k(k, &data);
    let fam = family(&data)?;
    let points = data.positions(time);
    let queries = random_queries(&points, data.dimension, 100, 7);
    for round in 0..repeat.max(1) {
        let start = Instant::now();
        let index = StaticIndex::build(points.clone(), k, fam.clone())?;
        let built = start.elapsed();

        let start = Instant::now();
        let mut members = 0;
        for q in &queries {
            members += index.query(q)?.members.len();
        }
        let queried = start.elapsed();

        let start = Instant::now();
        let mut state = KineticState::initialize(&data.trajectories, k, fam.clone(), time)?;
        let initialized = start.elapsed();
        let start = Instant::now();
        let events = run_events(&mut state, time + 1.0, usize::MAX)?;
        let kinetic = start.elapsed();

        println!("round\t{round}\tqueries\t{}\tmembers\t{members}\tevents\t{events}", queries.len());
        eprintln!(
            "round {round}: build {built:?}, {} queries {queried:?}, init {initialized:?}, {events} events {kinetic:?}",
            queries.len()
        );
    }

    if sweep {
        let mut first = None;
        let mut last = 0.0;
        let mut n = 32;
        while n <= 1024 {
            let gen = Dataset::generate(n, 2, 1, 4, n as u64);
            let mut state = KineticState::initialize(&gen.trajectories, 4, ConeFamily::with_default_angle(2)?, 0.0)?;
            let start = Instant::now();
            let events = run_events(&mut state, 1.0, SWEEP_EVENTS)?;
            let mean = state.stats().touched_mean();
            println!("sweep\t{n}\t{events}\t{mean:.3}");
            eprintln!("sweep n = {n}: {events} events in {:?}", start.elapsed());
            first.get_or_insert(mean);
            last = mean;
            n *= 2;
        }
        let ratio = last / first.unwrap_or(1.0).max(f64::MIN_POSITIVE);
        println!("sweep_ratio\t{ratio:.3}\t{}", if ratio < 8.0 { "within" } else { "over" });
    }
    Ok(())
}

pub fn generate(n: usize, d: usize, s: usize, seed: u64, k: usize, out: Option<&Path>) -> Result<(), CliError> {
    let text = Dataset::generate(n, d, s, k, seed).to_text();
    match out {
        Some(path) => io::write(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
