//! Ground truth for small instances: exact Steiner forests, exhaustive
//! autarkic collections, and independent re-checks of moat traces.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::autarkic::{AutarkicCollection, AutarkicTuple, TupleKind};
use crate::contract::Contraction;
use crate::error::{Error, Result};
use crate::instance::{EdgeId, Instance, SolutionForest, VertexId};
use crate::moat::{actively_connected_classes, run_timed_moat, MoatTrace, RunMode, SetId, SetKind};
use crate::paths::{ShortestPaths, SteinerSolver};
use crate::rational::Rational;
use crate::unionfind::UnionFind;

#[derive(Clone, Debug)]
pub struct OracleLimits {
    /// Above this, the terminal-partition search is replaced by edge-subset search.
    pub max_terminals: usize,
    pub max_tuples: usize,
    /// Edge-subset search is refused above this many edges.
    pub max_edges: usize,
    pub time_budget: Duration,
}

impl Default for OracleLimits {
    fn default() -> Self {
        OracleLimits {
            max_terminals: 10,
            max_tuples: 12,
            max_edges: 24,
            time_budget: Duration::from_secs(20),
        }
    }
}

/// A minimum-cost feasible forest from which no edge can be dropped.
pub fn exact_steiner_forest(inst: &Instance, limits: &OracleLimits) -> Result<SolutionForest> {
    let violations = inst.validate();
    if !violations.is_empty() {
        return Err(Error::Invalid(violations));
    }
    let terminals = inst.terminals();
    let raw = if terminals.len() <= limits.max_terminals {
        by_partition(inst, &terminals)
    } else if inst.edges.len() <= limits.max_edges {
        by_edge_subsets(inst, limits)?
    } else {
        return Err(Error::OracleLimit(format!(
            "{} terminals and {} edges exceed {} and {}",
            terminals.len(),
            inst.edges.len(),
            limits.max_terminals,
            limits.max_edges
        )));
    };
    Ok(make_minimal(inst, raw))
}

fn feasible(inst: &Instance, edges: impl IntoIterator<Item = EdgeId>) -> bool {
    let mut uf = UnionFind::new(inst.vertex_count);
    for e in edges {
        uf.union(inst.edges[e].u, inst.edges[e].v);
    }
    inst.demands.iter().all(|d| uf.same(d.a, d.b))
}

/// Drops zero-cost edges that no demand needs, highest id first.
fn make_minimal(inst: &Instance, edges: BTreeSet<EdgeId>) -> SolutionForest {
    let order: Vec<EdgeId> = edges
        .iter()
        .rev()
        .copied()
        .filter(|&e| inst.edges[e].cost.is_zero())
        .collect();
    let mut kept = edges;
    for e in order {
        kept.remove(&e);
        if !feasible(inst, kept.iter().copied()) {
            kept.insert(e);
        }
    }
    SolutionForest::from_edges(inst, kept)
}

/// Splits the terminals into blocks that each hold whole demands and
/// connects every block by an exact Steiner tree.
fn by_partition(inst: &Instance, terminals: &[VertexId]) -> BTreeSet<EdgeId> {
    let t = terminals.len();
    if t == 0 {
        return BTreeSet::new();
    }
    let index = |v: VertexId| terminals.binary_search(&v).expect("terminal");
    let pairs: Vec<usize> = inst
        .demands
        .iter()
        .map(|d| (1 << index(d.a)) | (1 << index(d.b)))
        .collect();
    let full = (1usize << t) - 1;
    let closed: Vec<bool> = (0..=full)
        .map(|m| pairs.iter().all(|&p| m & p == 0 || m & p == p))
        .collect();
    let solver = SteinerSolver::new(inst);
    let tree_cost = solver.all_subset_costs(terminals);
    let mut best: Vec<Option<(Rational, usize)>> = vec![None; full + 1];
    best[0] = Some((Rational::zero(), 0));
    for mask in 1..=full {
        if !closed[mask] {
            continue;
        }
        let low = mask & mask.wrapping_neg();
        let rest = mask ^ low;
        let mut sub = rest;
        loop {
            let block = sub | low;
            if closed[block] {
                if let (Some(c), Some((r, _))) = (&tree_cost[block], &best[mask ^ block]) {
                    let total = c + r;
                    if best[mask].as_ref().is_none_or(|(b, _)| total < *b) {
                        best[mask] = Some((total, block));
                    }
                }
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & rest;
        }
    }
    let mut blocks = Vec::new();
    let mut mask = full;
    while mask != 0 {
        let (_, block) = best[mask].as_ref().expect("feasible instance");
        blocks.push(*block);
        mask ^= block;
    }
    solver
        .subset_trees(terminals, &blocks)
        .into_iter()
        .flatten()
        .collect()
}

struct Search<'a> {
    inst: &'a Instance,
    order: Vec<EdgeId>,
    chosen: Vec<bool>,
    best: Option<(Rational, Vec<bool>)>,
    started: Instant,
    budget: Duration,
    nodes: u64,
}

impl Search<'_> {
    fn reachable(&self, depth: usize) -> bool {
        let edges = self
            .order
            .iter()
            .enumerate()
            .filter(|&(i, &e)| i >= depth || self.chosen[e])
            .map(|(_, &e)| e);
        feasible(self.inst, edges)
    }

    fn go(&mut self, depth: usize, cost: Rational) -> Result<()> {
        self.nodes += 1;
        if self.nodes.is_multiple_of(4096) && self.started.elapsed() > self.budget {
            return Err(Error::OracleLimit("time budget exhausted".into()));
        }
        if depth == self.order.len() {
            if self.best.as_ref().is_none_or(|(b, _)| cost < *b) {
                self.best = Some((cost, self.chosen.clone()));
            }
            return Ok(());
        }
        let e = self.order[depth];
        if self.reachable(depth + 1) {
            self.go(depth + 1, cost.clone())?;
        }
        let with = &cost + &self.inst.edges[e].cost;
        if self.best.as_ref().is_none_or(|(b, _)| with < *b) {
            self.chosen[e] = true;
            self.go(depth + 1, with)?;
            self.chosen[e] = false;
        }
        Ok(())
    }
}

/// Branch and bound over edge subsets, most expensive edges decided first.
fn by_edge_subsets(inst: &Instance, limits: &OracleLimits) -> Result<BTreeSet<EdgeId>> {
    let mut order: Vec<EdgeId> = (0..inst.edges.len()).collect();
    order.sort_by(|&a, &b| inst.edges[b].cost.cmp(&inst.edges[a].cost).then(a.cmp(&b)));
    let mut search = Search {
        inst,
        order,
        chosen: vec![false; inst.edges.len()],
        best: None,
        started: Instant::now(),
        budget: limits.time_budget,
        nodes: 0,
    };
    search.go(0, Rational::zero())?;
    let (_, chosen) = search.best.expect("validated instances are feasible");
    Ok((0..inst.edges.len()).filter(|&e| chosen[e]).collect())
}

/// Best crossing-free subset by exhaustive search.
pub fn brute_force_max_profit(
    tuples: &[AutarkicTuple],
    limits: &OracleLimits,
) -> Result<AutarkicCollection> {
    let n = tuples.len();
    if n > limits.max_tuples {
        return Err(Error::OracleLimit(format!(
            "{n} tuples exceed {}",
            limits.max_tuples
        )));
    }
    let mut best_mask = 0usize;
    let mut best = Rational::zero();
    'masks: for mask in 1usize..1 << n {
        let members: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        for (x, &i) in members.iter().enumerate() {
            for &j in &members[x + 1..] {
                if tuples[i].crosses(&tuples[j]) {
                    continue 'masks;
                }
            }
        }
        let profit: Rational = members.iter().map(|&i| &tuples[i].profit).sum();
        if profit > best {
            best = profit;
            best_mask = mask;
        }
    }
    Ok(AutarkicCollection::new(
        (0..n)
            .filter(|i| best_mask >> i & 1 == 1)
            .map(|i| tuples[i].clone())
            .collect(),
    ))
}

/// One failed trace check.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "check", rename_all = "kebab-case")]
pub enum LedgerViolation {
    NotLaminar { a: SetId, b: SetId },
    DualOverload { edge: EdgeId, load: Rational, cost: Rational },
    TightEdgeSlack { edge: EdgeId, load: Rational, cost: Rational },
    DualIdentity { y_total: Rational, integral: Rational },
    UnsepRatio { y_sep: Rational, y_unsep: Rational },
    BudgetLeft { set: SetId, budget: Rational },
    BudgetBalance { generated: Rational, spent: Rational },
    SetGrowth { set: SetId },
    SetKind { set: SetId },
    Fingerprint { set: SetId },
    DeactivationSplit { class: usize },
    ContractedLoad { edge: EdgeId, original: Rational, contracted: Rational },
    ContractedActiveSets { time: Rational },
}

/// Checks every structural identity of a trace, then compares it against a
/// timed run on a sampled contraction of actively connected sets.
pub fn verify_ledgers(inst: &Instance, trace: &MoatTrace) -> Vec<LedgerViolation> {
    let mut out = verify_trace(inst, trace);
    let plan = sample_plan(trace, 0x5eed);
    out.extend(verify_contraction(inst, trace, &plan));
    out
}

/// Structural checks only.
pub fn verify_trace(inst: &Instance, trace: &MoatTrace) -> Vec<LedgerViolation> {
    let mut out = Vec::new();
    let sets = &trace.support;

    for (i, a) in sets.iter().enumerate() {
        for b in &sets[i + 1..] {
            let common = a.vertices.iter().filter(|v| b.contains(**v)).count();
            if common != 0 && common != a.vertices.len() && common != b.vertices.len() {
                out.push(LedgerViolation::NotLaminar { a: a.id, b: b.id });
            }
        }
    }

    for (id, e) in inst.edges.iter().enumerate() {
        let load = trace.load(e.u, e.v);
        if load > e.cost {
            out.push(LedgerViolation::DualOverload {
                edge: id,
                load,
                cost: e.cost.clone(),
            });
        }
    }
    for te in &trace.tight_edges {
        let e = &inst.edges[te.edge];
        let load = trace.load(e.u, e.v);
        if load != e.cost {
            out.push(LedgerViolation::TightEdgeSlack {
                edge: te.edge,
                load,
                cost: e.cost.clone(),
            });
        }
    }

    let y_total: Rational = sets.iter().map(|s| &s.y).sum();
    let integral = trace.timeline_integral();
    if y_total != integral {
        out.push(LedgerViolation::DualIdentity { y_total, integral });
    }

    if let RunMode::Extended { epsilon } = &trace.mode {
        let mut y_sep = Rational::zero();
        let mut y_unsep = Rational::zero();
        for s in sets {
            if s.sep_fingerprint.is_empty() {
                y_unsep += &s.y;
            } else {
                y_sep += &s.y;
            }
        }
        if y_unsep != epsilon * &y_sep {
            out.push(LedgerViolation::UnsepRatio { y_sep, y_unsep });
        }
        for (&set, budget) in &trace.budgets_final {
            if !budget.is_zero() {
                out.push(LedgerViolation::BudgetLeft {
                    set,
                    budget: budget.clone(),
                });
            }
        }
        if trace.budget_generated != trace.budget_spent {
            out.push(LedgerViolation::BudgetBalance {
                generated: trace.budget_generated.clone(),
                spent: trace.budget_spent.clone(),
            });
        }
    }

    let mut active_time = vec![Rational::zero(); sets.len()];
    for iv in &trace.timeline {
        let len = iv.len();
        for &id in &iv.active {
            active_time[id] += &len;
        }
    }
    for s in sets {
        let fp: Vec<usize> = inst
            .demands
            .iter()
            .enumerate()
            .filter(|(_, d)| s.contains(d.a) != s.contains(d.b))
            .map(|(i, _)| i)
            .collect();
        if fp != s.sep_fingerprint {
            out.push(LedgerViolation::Fingerprint { set: s.id });
        }
        if s.y != &s.growth_end - &s.birth || s.y != active_time[s.id] || s.y.is_negative() {
            out.push(LedgerViolation::SetGrowth { set: s.id });
        }
        let kind = if s.y.is_zero() {
            SetKind::ZeroGrowth
        } else if fp.is_empty() {
            SetKind::Unsep
        } else {
            SetKind::Sep
        };
        if kind != s.kind {
            out.push(LedgerViolation::SetKind { set: s.id });
        }
    }

    let classes = actively_connected_classes(trace);
    for (ci, c) in classes.classes.iter().enumerate() {
        if c.iter().any(|&v| trace.deactivation[v] != trace.deactivation[c[0]]) {
            out.push(LedgerViolation::DeactivationSplit { class: ci });
        }
    }
    out
}

/// Up to three random subsets (2–3 vertices) of actively connected classes.
pub fn sample_plan(trace: &MoatTrace, seed: u64) -> Vec<Vec<VertexId>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes = actively_connected_classes(trace);
    let mut big: Vec<&Vec<VertexId>> = classes.classes.iter().filter(|c| c.len() >= 2).collect();
    big.shuffle(&mut rng);
    big.into_iter()
        .take(3)
        .map(|c| {
            let size = rng.random_range(2..=c.len().min(3));
            let mut pick: Vec<VertexId> = c.choose_multiple(&mut rng, size).copied().collect();
            pick.sort_unstable();
            pick
        })
        .collect()
}

fn active_at<'t>(trace: &'t MoatTrace, t: &Rational) -> &'t [SetId] {
    trace
        .timeline
        .iter()
        .find(|iv| iv.start <= *t && *t < iv.end)
        .map_or(&[], |iv| iv.active.as_slice())
}

/// Contracts `sets` (each actively connected), runs the timed moat growing on
/// the result, and checks that active sets and edge loads agree with `trace`.
/// Loads are compared at the instant the edge's endpoints join in the
/// contracted run, or at the end if they never do.
pub fn verify_contraction(
    inst: &Instance,
    trace: &MoatTrace,
    sets: &[Vec<VertexId>],
) -> Vec<LedgerViolation> {
    let mut out = Vec::new();
    let contraction = Contraction::new(inst, sets);
    let deac = contraction.max_over_members(&trace.deactivation);
    let small = run_timed_moat(&contraction.inst, &deac);
    let map = &contraction.vertex_map;

    let mut cuts: BTreeSet<Rational> = BTreeSet::new();
    for iv in trace.timeline.iter().chain(&small.timeline) {
        cuts.insert(iv.start.clone());
        cuts.insert(iv.end.clone());
    }
    let cuts: Vec<Rational> = cuts.into_iter().collect();
    let half = Rational::new(1, 2);
    for w in cuts.windows(2) {
        let mid = (&w[0] + &w[1]) * &half;
        let mut uf = UnionFind::new(contraction.inst.vertex_count);
        let mut touched = BTreeSet::new();
        for &id in active_at(trace, &mid) {
            let vs = &trace.support[id].vertices;
            for &v in vs {
                uf.union(map[vs[0]], map[v]);
                touched.insert(map[v]);
            }
        }
        let expected: BTreeSet<Vec<VertexId>> = uf
            .groups()
            .into_iter()
            .filter(|g| touched.contains(&g[0]))
            .collect();
        let actual: BTreeSet<Vec<VertexId>> = active_at(&small, &mid)
            .iter()
            .map(|&id| small.support[id].vertices.clone())
            .collect();
        if expected != actual {
            out.push(LedgerViolation::ContractedActiveSets { time: mid });
        }
    }

    let end = trace.end_time().max(small.end_time());
    for (id, e) in inst.edges.iter().enumerate() {
        let (u, v) = (map[e.u], map[e.v]);
        if u == v {
            continue;
        }
        let when = small
            .support
            .iter()
            .filter(|s| s.contains(u) && s.contains(v))
            .map(|s| &s.birth)
            .min()
            .cloned()
            .unwrap_or_else(|| end.clone());
        let original = trace.load_at(e.u, e.v, &when);
        let contracted = small.load_at(u, v, &when);
        if original != contracted {
            out.push(LedgerViolation::ContractedLoad {
                edge: id,
                original,
                contracted,
            });
        }
    }
    out
}

/// Problems with one autarkic tuple, re-derived from the instance and trace.
pub fn check_tuple(inst: &Instance, trace: &MoatTrace, tuple: &AutarkicTuple) -> Vec<String> {
    let mut out = Vec::new();
    let members: Vec<&crate::moat::SupportSet> =
        tuple.member_set_ids.iter().map(|&i| &trace.support[i]).collect();
    let expected_len = match tuple.kind {
        TupleKind::Pair => 2,
        TupleKind::Triple => 3,
    };
    if members.len() != expected_len {
        out.push(format!("{} members for a {:?}", members.len(), tuple.kind));
        return out;
    }
    let sep_of = |vs: &dyn Fn(VertexId) -> bool| -> Vec<usize> {
        inst.demands
            .iter()
            .enumerate()
            .filter(|(_, d)| vs(d.a) != vs(d.b))
            .map(|(i, _)| i)
            .collect()
    };
    let seps: Vec<Vec<usize>> = members.iter().map(|m| sep_of(&|v| m.contains(v))).collect();
    for (i, a) in members.iter().enumerate() {
        if seps[i].is_empty() {
            out.push(format!("member {} separates nothing", a.id));
        }
        if !a.y.is_positive() {
            out.push(format!("member {} has no dual value", a.id));
        }
        for b in &members[i + 1..] {
            if a.vertices.iter().any(|&v| b.contains(v)) {
                out.push(format!("members {} and {} overlap", a.id, b.id));
            }
        }
    }
    let start = members.iter().map(|m| &m.birth).max().expect("nonempty");
    let stop = members.iter().map(|m| &m.growth_end).min().expect("nonempty");
    if start >= stop {
        out.push("members are never active together".into());
    }
    match tuple.kind {
        TupleKind::Pair => {
            if seps[0] != seps[1] {
                out.push("pair members separate different demands".into());
            }
        }
        TupleKind::Triple => {
            let inside = |v: VertexId| members.iter().any(|m| m.contains(v));
            if !sep_of(&inside).is_empty() {
                out.push("a demand leaves the triple".into());
            }
        }
    }
    let union: BTreeSet<usize> = seps.iter().flatten().copied().collect();
    if union.into_iter().collect::<Vec<_>>() != tuple.sep_union {
        out.push("sep_union disagrees with the members".into());
    }
    let fps: BTreeSet<&Vec<usize>> = seps.iter().collect();
    let coverage: Rational = trace
        .support
        .iter()
        .filter(|u| u.y.is_positive())
        .filter(|u| fps.contains(&sep_of(&|v| u.contains(v))))
        .map(|u| &u.y)
        .sum();
    if coverage != tuple.coverage {
        out.push(format!("coverage {} != {}", tuple.coverage, coverage));
    }
    let cost = inst.edge_cost_sum(&tuple.connector);
    if cost != tuple.cost {
        out.push(format!("cost {} != connector cost {}", tuple.cost, cost));
    }
    if tuple.profit != Rational::from_int(2) * &tuple.coverage - &tuple.cost {
        out.push("profit is not 2·coverage − cost".into());
    }
    let mut uf = UnionFind::new(inst.vertex_count);
    for &e in &tuple.connector {
        uf.union(inst.edges[e].u, inst.edges[e].v);
    }
    let sp = ShortestPaths::all_pairs(inst);
    for r in &tuple.representatives {
        let d = &inst.demands[r.demand];
        let (i, j) = r.between;
        if !(seps[i].contains(&r.demand) && seps[j].contains(&r.demand)) {
            out.push(format!("representative {} is not shared by its members", r.demand));
        }
        if !uf.same(d.a, d.b) {
            out.push(format!("connector misses representative {}", r.demand));
        }
        if tuple.kind == TupleKind::Pair && sp.distance(d.a, d.b) != Some(&cost) {
            out.push("pair connector is not a shortest path".into());
        }
    }
    out
}
