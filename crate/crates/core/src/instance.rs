//! Steiner forest instances, their STP-F text form, validation and random generation.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, ParseError};
use crate::rational::Rational;
use crate::unionfind::UnionFind;

/// Zero-based vertex index. STP-F files use one-based ids.
pub type VertexId = usize;
pub type EdgeId = usize;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub u: VertexId,
    pub v: VertexId,
    pub cost: Rational,
}

impl Edge {
    pub fn other(&self, x: VertexId) -> VertexId {
        if x == self.u {
            self.v
        } else {
            self.u
        }
    }
}

/// Unordered demand pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Demand {
    pub a: VertexId,
    pub b: VertexId,
}

impl Demand {
    pub fn new(a: VertexId, b: VertexId) -> Self {
        Demand { a, b }
    }

    fn normalized(self) -> Self {
        Demand {
            a: self.a.min(self.b),
            b: self.a.max(self.b),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub vertex_count: usize,
    pub edges: Vec<Edge>,
    pub demands: Vec<Demand>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Violation {
    DanglingEdge { edge: EdgeId, vertex: VertexId },
    SelfLoop { edge: EdgeId },
    NegativeCost { edge: EdgeId },
    DanglingDemand { demand: usize, vertex: VertexId },
    TrivialDemand { demand: usize },
    InfeasibleDemand { demand: usize },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::DanglingEdge { edge, vertex } => {
                write!(f, "edge {edge} references unknown vertex {vertex}")
            }
            Violation::SelfLoop { edge } => write!(f, "edge {edge} is a self-loop"),
            Violation::NegativeCost { edge } => write!(f, "edge {edge} has negative cost"),
            Violation::DanglingDemand { demand, vertex } => {
                write!(f, "demand {demand} references unknown vertex {vertex}")
            }
            Violation::TrivialDemand { demand } => {
                write!(f, "demand {demand} pairs a vertex with itself")
            }
            Violation::InfeasibleDemand { demand } => {
                write!(f, "demand {demand} spans two graph components")
            }
        }
    }
}

impl Instance {
    pub fn new(vertex_count: usize, edges: Vec<Edge>, demands: Vec<Demand>) -> Self {
        Instance {
            vertex_count,
            edges,
            demands,
        }
    }

    /// Convenience constructor from integer costs.
    pub fn from_int_edges(
        vertex_count: usize,
        edges: &[(VertexId, VertexId, i64)],
        demands: &[(VertexId, VertexId)],
    ) -> Self {
        Instance {
            vertex_count,
            edges: edges
                .iter()
                .map(|&(u, v, c)| Edge {
                    u,
                    v,
                    cost: Rational::from_int(c),
                })
                .collect(),
            demands: demands.iter().map(|&(a, b)| Demand::new(a, b)).collect(),
        }
    }

    pub fn edge_cost_sum<'a, I: IntoIterator<Item = &'a EdgeId>>(&self, ids: I) -> Rational {
        ids.into_iter().map(|&e| &self.edges[e].cost).sum()
    }

    /// Vertices that appear in at least one demand, sorted.
    pub fn terminals(&self) -> Vec<VertexId> {
        let set: BTreeSet<VertexId> = self.demands.iter().flat_map(|d| [d.a, d.b]).collect();
        set.into_iter().collect()
    }

    pub fn validate(&self) -> Vec<Violation> {
        let n = self.vertex_count;
        let mut out = Vec::new();
        for (i, e) in self.edges.iter().enumerate() {
            for x in [e.u, e.v] {
                if x >= n {
                    out.push(Violation::DanglingEdge { edge: i, vertex: x });
                }
            }
            if e.u == e.v {
                out.push(Violation::SelfLoop { edge: i });
            }
            if e.cost.is_negative() {
                out.push(Violation::NegativeCost { edge: i });
            }
        }
        let mut uf = UnionFind::new(n);
        for e in &self.edges {
            if e.u < n && e.v < n {
                uf.union(e.u, e.v);
            }
        }
        for (i, d) in self.demands.iter().enumerate() {
            let mut dangling = false;
            for x in [d.a, d.b] {
                if x >= n {
                    out.push(Violation::DanglingDemand {
                        demand: i,
                        vertex: x,
                    });
                    dangling = true;
                }
            }
            if dangling {
                continue;
            }
            if d.a == d.b {
                out.push(Violation::TrivialDemand { demand: i });
            } else if !uf.same(d.a, d.b) {
                out.push(Violation::InfeasibleDemand { demand: i });
            }
        }
        out
    }

    /// Endpoints normalized to `u < v`, edges sorted by `(u, v, cost)`, demands normalized.
    pub fn canonical(&self) -> Instance {
        let mut edges: Vec<Edge> = self
            .edges
            .iter()
            .map(|e| Edge {
                u: e.u.min(e.v),
                v: e.u.max(e.v),
                cost: e.cost.clone(),
            })
            .collect();
        edges.sort_by(|a, b| (a.u, a.v, &a.cost).cmp(&(b.u, b.v, &b.cost)));
        Instance {
            vertex_count: self.vertex_count,
            edges,
            demands: self.demands.iter().map(|d| d.normalized()).collect(),
        }
    }

    /// Canonical STP-F text.
    pub fn to_stpf(&self) -> String {
        let c = self.canonical();
        let mut s = String::new();
        s.push_str("STPF 1\nSECTION Graph\n");
        let _ = writeln!(s, "V {}", c.vertex_count);
        for e in &c.edges {
            let _ = writeln!(s, "E {} {} {}", e.u + 1, e.v + 1, e.cost);
        }
        s.push_str("END\nSECTION Demands\n");
        for d in &c.demands {
            let _ = writeln!(s, "D {} {}", d.a + 1, d.b + 1);
        }
        s.push_str("END\n");
        s
    }

    pub fn parse_stpf(text: &str) -> Result<Instance, ParseError> {
        parse_stpf(text)
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    None,
    Graph,
    Demands,
}

fn perr(line: usize, column: usize, reason: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        line,
        column,
        reason: reason.into(),
    }
}

/// Parses the STP-F format:
///
/// ```text
/// STPF 1
/// SECTION Graph
/// V 3
/// E 1 2 1.5
/// E 2 3 1/3
/// END
/// SECTION Demands
/// D 1 3
/// END
/// ```
///
/// Blank lines and `#` comments are ignored. A section is closed by `END`; a
/// trailing `END` after the last section is accepted as well.
pub fn parse_stpf(text: &str) -> Result<Instance, ParseError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("")))
        .filter(|(_, l)| !l.trim().is_empty());

    match lines.next() {
        Some((_, l)) if l.split_whitespace().collect::<Vec<_>>() == ["STPF", "1"] => {}
        Some((ln, _)) => return Err(perr(ln, 1, "expected header `STPF 1`")),
        None => return Err(perr(1, 1, "empty input")),
    }

    let mut section = Section::None;
    let mut vertex_count: Option<usize> = None;
    let mut edges = Vec::new();
    let mut demands = Vec::new();
    let mut seen_graph = false;
    let mut finished = false;

    for (ln, raw) in lines {
        if finished {
            return Err(perr(ln, 1, "content after final END"));
        }
        let tokens: Vec<(usize, &str)> = tokenize(raw);
        let (col0, head) = tokens[0];
        match (section, head) {
            (Section::None, "SECTION") => {
                let Some(&(col, name)) = tokens.get(1) else {
                    return Err(perr(ln, col0, "missing section name"));
                };
                section = match name {
                    "Graph" => {
                        seen_graph = true;
                        Section::Graph
                    }
                    "Demands" => Section::Demands,
                    other => return Err(perr(ln, col, format!("unknown section {other:?}"))),
                };
                expect_arity(&tokens, 2, ln)?;
            }
            (Section::None, "END") => finished = true,
            (Section::None, other) => {
                return Err(perr(ln, col0, format!("unexpected {other:?} outside a section")))
            }
            (_, "END") => {
                expect_arity(&tokens, 1, ln)?;
                section = Section::None;
            }
            (Section::Graph, "V") => {
                expect_arity(&tokens, 2, ln)?;
                if vertex_count.is_some() {
                    return Err(perr(ln, col0, "duplicate V line"));
                }
                vertex_count = Some(parse_usize(tokens[1], ln)?);
            }
            (Section::Graph, "E") => {
                expect_arity(&tokens, 4, ln)?;
                let n = vertex_count.ok_or_else(|| perr(ln, col0, "E before V"))?;
                let u = parse_vertex(tokens[1], n, ln)?;
                let v = parse_vertex(tokens[2], n, ln)?;
                let (ccol, ctext) = tokens[3];
                let cost: Rational = ctext
                    .parse()
                    .map_err(|e: crate::rational::ParseRationalError| perr(ln, ccol, e.reason))?;
                if cost.is_negative() {
                    return Err(ParseError::NegativeCost { line: ln });
                }
                edges.push(Edge { u, v, cost });
            }
            (Section::Demands, "D") => {
                expect_arity(&tokens, 3, ln)?;
                let n = vertex_count
                    .ok_or_else(|| perr(ln, col0, "demands before the graph section"))?;
                let a = parse_vertex(tokens[1], n, ln)?;
                let b = parse_vertex(tokens[2], n, ln)?;
                demands.push(Demand::new(a, b));
            }
            (_, other) => {
                return Err(perr(ln, col0, format!("unexpected keyword {other:?}")));
            }
        }
    }
    if section != Section::None {
        return Err(perr(text.lines().count().max(1), 1, "unterminated section"));
    }
    if !seen_graph {
        return Err(perr(1, 1, "missing SECTION Graph"));
    }
    let vertex_count = vertex_count.ok_or_else(|| perr(1, 1, "missing V line"))?;
    Ok(Instance {
        vertex_count,
        edges,
        demands,
    })
}

fn tokenize(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in line.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((s + 1, &line[s..i]));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((s + 1, &line[s..]));
    }
    out
}

fn expect_arity(tokens: &[(usize, &str)], n: usize, ln: usize) -> Result<(), ParseError> {
    if tokens.len() != n {
        let col = tokens.get(n).or(tokens.last()).map_or(1, |t| t.0);
        return Err(perr(
            ln,
            col,
            format!("expected {} fields, found {}", n, tokens.len()),
        ));
    }
    Ok(())
}

fn parse_usize((col, tok): (usize, &str), ln: usize) -> Result<usize, ParseError> {
    tok.parse()
        .map_err(|_| perr(ln, col, format!("expected a non-negative integer, found {tok:?}")))
}

fn parse_vertex(t: (usize, &str), n: usize, ln: usize) -> Result<VertexId, ParseError> {
    let id = parse_usize(t, ln)?;
    if id == 0 || id > n {
        return Err(ParseError::DanglingVertex {
            line: ln,
            vertex: id,
            vertex_count: n,
        });
    }
    Ok(id - 1)
}

/// Parameters for [`generate_random`].
#[derive(Clone, Debug, PartialEq)]
pub struct GenParams {
    pub n: usize,
    /// Probability that a given vertex pair is joined by an edge.
    pub density: f64,
    pub demand_count: usize,
    /// Edge costs are drawn uniformly from `1..=max_cost`.
    pub max_cost: u32,
    /// Replace every edge cost by the shortest-path distance between its endpoints.
    pub metric: bool,
}

/// Deterministic random instance. Disconnected samples are patched by joining
/// components with random edges, so every demand is feasible.
pub fn generate_random(params: &GenParams, seed: u64) -> Result<Instance, Error> {
    let GenParams {
        n,
        density,
        demand_count,
        max_cost,
        metric,
    } = *params;
    if n < 2 {
        return Err(Error::InvalidParams("n must be at least 2".into()));
    }
    if demand_count == 0 {
        return Err(Error::InvalidParams("at least one demand is required".into()));
    }
    if !(0.0..=1.0).contains(&density) {
        return Err(Error::InvalidParams("density must lie in [0, 1]".into()));
    }
    if density == 0.0 {
        return Err(Error::InvalidParams(
            "density 0 cannot carry any demand".into(),
        ));
    }
    if max_cost == 0 {
        return Err(Error::InvalidParams("max_cost must be positive".into()));
    }
    if demand_count > n * (n - 1) / 2 {
        return Err(Error::InvalidParams(format!(
            "{demand_count} distinct demands do not fit on {n} vertices"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    let mut uf = UnionFind::new(n);
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.random_bool(density) {
                pairs.push((u, v));
                uf.union(u, v);
            }
        }
    }
    // patch connectivity: join each component to a random vertex of an earlier one
    for v in 1..n {
        if !uf.same(0, v) {
            let mut u = rng.random_range(0..v);
            while !uf.same(0, u) {
                u = rng.random_range(0..v);
            }
            pairs.push((u, v));
            uf.union(u, v);
        }
    }
    pairs.sort_unstable();
    let mut edges: Vec<Edge> = pairs
        .into_iter()
        .map(|(u, v)| Edge {
            u,
            v,
            cost: Rational::from_int(rng.random_range(1..=max_cost) as i64),
        })
        .collect();

    if metric {
        let inst = Instance::new(n, edges.clone(), Vec::new());
        let sp = crate::paths::ShortestPaths::all_pairs(&inst);
        for e in &mut edges {
            e.cost = sp.distance(e.u, e.v).expect("edge endpoints connected").clone();
        }
    }

    let mut chosen = BTreeSet::new();
    let mut demands = Vec::with_capacity(demand_count);
    while demands.len() < demand_count {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a == b {
            continue;
        }
        let d = Demand::new(a.min(b), a.max(b));
        if chosen.insert(d) {
            demands.push(d);
        }
    }
    Ok(Instance {
        vertex_count: n,
        edges,
        demands,
    })
}

/// An edge subset together with its cost and per-demand connectivity.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SolutionForest {
    pub edge_ids: BTreeSet<EdgeId>,
    pub total_cost: Rational,
    pub satisfied: Vec<bool>,
}

impl SolutionForest {
    pub fn from_edges<I: IntoIterator<Item = EdgeId>>(inst: &Instance, edges: I) -> Self {
        let edge_ids: BTreeSet<EdgeId> = edges.into_iter().collect();
        let total_cost = inst.edge_cost_sum(&edge_ids);
        let mut uf = UnionFind::new(inst.vertex_count);
        for &e in &edge_ids {
            uf.union(inst.edges[e].u, inst.edges[e].v);
        }
        let satisfied = inst.demands.iter().map(|d| uf.same(d.a, d.b)).collect();
        SolutionForest {
            edge_ids,
            total_cost,
            satisfied,
        }
    }

    pub fn empty(inst: &Instance) -> Self {
        Self::from_edges(inst, std::iter::empty())
    }

    pub fn is_feasible(&self) -> bool {
        self.satisfied.iter().all(|&s| s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "STPF 1\nSECTION Graph\nV 3\nE 1 2 1.5\nE 2 3 1/3\nEND\nSECTION Demands\nD 1 3\nEND\n";

    #[test]
    fn parses_small_file() {
        let inst = parse_stpf(SMALL).unwrap();
        assert_eq!(inst.vertex_count, 3);
        assert_eq!(inst.edges[0].cost, Rational::new(3, 2));
        assert_eq!(inst.edges[1].cost, Rational::new(1, 3));
        assert_eq!(inst.demands, vec![Demand::new(0, 2)]);
        assert!(inst.validate().is_empty());
    }

    #[test]
    fn empty_graph_is_vacuously_feasible() {
        let inst = parse_stpf("STPF 1\nSECTION Graph\nV 0\nEND\n").unwrap();
        assert_eq!(inst.vertex_count, 0);
        assert!(inst.edges.is_empty() && inst.demands.is_empty());
        assert!(inst.validate().is_empty());
    }

    #[test]
    fn dangling_vertex_is_reported() {
        let text = "STPF 1\nSECTION Graph\nV 8\nE 1 99 5\nEND\n";
        assert_eq!(
            parse_stpf(text),
            Err(ParseError::DanglingVertex {
                line: 4,
                vertex: 99,
                vertex_count: 8
            })
        );
    }

    #[test]
    fn negative_cost_is_reported() {
        let text = "STPF 1\nSECTION Graph\nV 2\nE 1 2 -1\nEND\n";
        assert_eq!(parse_stpf(text), Err(ParseError::NegativeCost { line: 4 }));
    }

    #[test]
    fn syntax_errors_carry_position() {
        let text = "STPF 1\nSECTION Graph\nV 2\nE 1 2 x\nEND\n";
        match parse_stpf(text) {
            Err(ParseError::Syntax { line, column, .. }) => assert_eq!((line, column), (4, 7)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_stpf("STPF 2\n"),
            Err(ParseError::Syntax { line: 1, .. })
        ));
        assert!(parse_stpf("STPF 1\nSECTION Graph\nV 2\n").is_err());
    }

    #[test]
    fn validate_flags_disconnected_demand_and_self_loop() {
        let inst = Instance::from_int_edges(4, &[(0, 1, 1), (2, 3, 1)], &[(0, 2)]);
        assert_eq!(
            inst.validate(),
            vec![Violation::InfeasibleDemand { demand: 0 }]
        );
        let inst = Instance::from_int_edges(2, &[(0, 0, 1), (0, 1, 1)], &[(0, 1)]);
        assert_eq!(inst.validate(), vec![Violation::SelfLoop { edge: 0 }]);
    }

    #[test]
    fn generator_is_deterministic_and_valid() {
        let p = GenParams {
            n: 8,
            density: 0.5,
            demand_count: 3,
            max_cost: 9,
            metric: false,
        };
        assert_eq!(generate_random(&p, 7).unwrap(), generate_random(&p, 7).unwrap());
        let p = GenParams {
            n: 12,
            density: 0.4,
            demand_count: 5,
            ..p
        };
        assert!(generate_random(&p, 1).unwrap().validate().is_empty());
    }

    #[test]
    fn generator_two_vertices() {
        let p = GenParams {
            n: 2,
            density: 1.0,
            demand_count: 1,
            max_cost: 4,
            metric: false,
        };
        let inst = generate_random(&p, 3).unwrap();
        assert_eq!(inst.edges.len(), 1);
        assert_eq!(inst.demands, vec![Demand::new(0, 1)]);
    }

    #[test]
    fn generator_rejects_zero_density() {
        let p = GenParams {
            n: 5,
            density: 0.0,
            demand_count: 1,
            max_cost: 4,
            metric: false,
        };
        assert!(generate_random(&p, 3).is_err());
    }

    #[test]
    fn metric_generator_satisfies_triangle_inequality_on_edges() {
        let p = GenParams {
            n: 9,
            density: 0.6,
            demand_count: 4,
            max_cost: 20,
            metric: true,
        };
        let inst = generate_random(&p, 11).unwrap();
        let sp = crate::paths::ShortestPaths::all_pairs(&inst);
        for e in &inst.edges {
            assert_eq!(sp.distance(e.u, e.v), Some(&e.cost));
        }
    }

    #[test]
    fn generated_files_round_trip_verbatim() {
        let p = GenParams {
            n: 10,
            density: 0.3,
            demand_count: 4,
            max_cost: 7,
            metric: false,
        };
        let inst = generate_random(&p, 5).unwrap();
        assert_eq!(parse_stpf(&inst.to_stpf()).unwrap(), inst);
    }
}
