//! Autarkic pairs and triples of simultaneously active moats.
//!
//! A pair is two disjoint active sets that separate exactly the same
//! demands; a triple is three disjoint active sets whose demands all stay
//! inside their union. Buying a cheap connector for a tuple and contracting
//! it removes those demands from the residual instance. Tuples form a
//! laminar family under member-wise containment, so a maximum-profit
//! collection with pairwise disjoint separated-demand sets is found by a
//! bottom-up dynamic program.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;

use crate::contract::Contraction;
use crate::error::{Error, Result};
use crate::instance::{EdgeId, Instance, SolutionForest, VertexId};
use crate::moat::{extract_forest, run_extended_moat, MoatTrace, SetId};
use crate::paths::SteinerSolver;
use crate::rational::Rational;

/// Cheapest demands tried per member pair when picking triple representatives.
pub const TRIPLE_REPRESENTATIVES: usize = 8;
pub const DEFAULT_MAX_TRIPLES: usize = 50_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TupleKind {
    Pair,
    Triple,
}

/// A demand chosen to be joined by the connector, between members `between.0`
/// and `between.1` (positions in `member_set_ids`).
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Representative {
    pub demand: usize,
    pub between: (usize, usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AutarkicTuple {
    pub kind: TupleKind,
    /// Sorted.
    pub member_set_ids: Vec<SetId>,
    pub witness_time: Rational,
    pub sep_union: Vec<usize>,
    pub representatives: Vec<Representative>,
    pub connector: BTreeSet<EdgeId>,
    /// Vertices merged when the connector is contracted.
    pub connector_vertices: Vec<VertexId>,
    pub cost: Rational,
    pub coverage: Rational,
    pub profit: Rational,
}

impl AutarkicTuple {
    pub fn crosses(&self, other: &AutarkicTuple) -> bool {
        sorted_intersect(&self.sep_union, &other.sep_union)
    }
}

fn sorted_intersect(a: &[usize], b: &[usize]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return true,
        }
    }
    false
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AutarkicCollection {
    pub tuples: Vec<AutarkicTuple>,
    pub total_coverage: Rational,
    pub total_cost: Rational,
    pub total_profit: Rational,
}

impl AutarkicCollection {
    pub fn new(tuples: Vec<AutarkicTuple>) -> Self {
        let total_coverage = tuples.iter().map(|t| &t.coverage).sum();
        let total_cost = tuples.iter().map(|t| &t.cost).sum();
        let total_profit = tuples.iter().map(|t| &t.profit).sum();
        AutarkicCollection {
            tuples,
            total_coverage,
            total_cost,
            total_profit,
        }
    }

    pub fn empty() -> Self {
        Self::new(Vec::new())
    }

    pub fn is_crossing_free(&self) -> bool {
        self.tuples
            .iter()
            .enumerate()
            .all(|(i, p)| self.tuples[i + 1..].iter().all(|q| !p.crosses(q)))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("collection serializes")
    }
}

#[derive(Clone, Debug)]
pub struct TupleConfig {
    pub include_triples: bool,
    pub max_triples: usize,
}

impl Default for TupleConfig {
    fn default() -> Self {
        TupleConfig {
            include_triples: true,
            max_triples: DEFAULT_MAX_TRIPLES,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TupleList {
    pub tuples: Vec<AutarkicTuple>,
    /// Triples found beyond `max_triples` and discarded.
    pub dropped_triples: usize,
}

/// Lists every autarkic pair (and triple, if enabled) of the trace with its
/// connector, coverage and profit. Tuples are ordered by kind, then member ids.
pub fn enumerate_tuples(
    inst: &Instance,
    trace: &MoatTrace,
    solver: &SteinerSolver<'_>,
    config: &TupleConfig,
) -> TupleList {
    let n = trace.vertex_count;
    let mut pairs: BTreeSet<Vec<SetId>> = BTreeSet::new();
    let mut triples: BTreeSet<Vec<SetId>> = BTreeSet::new();
    let mut dropped: BTreeSet<Vec<SetId>> = BTreeSet::new();
    let mut holder = vec![usize::MAX; n];
    for iv in &trace.timeline {
        for &id in &iv.active {
            for &v in &trace.support[id].vertices {
                holder[v] = id;
            }
        }
        for &id in &iv.active {
            let set = &trace.support[id];
            if set.sep_fingerprint.is_empty() {
                continue;
            }
            let mut partners = BTreeSet::new();
            let mut escapes = false;
            for &d in &set.sep_fingerprint {
                let dem = &inst.demands[d];
                let outside = if set.contains(dem.a) { dem.b } else { dem.a };
                if holder[outside] == usize::MAX {
                    escapes = true;
                    break;
                }
                partners.insert(holder[outside]);
            }
            if escapes {
                continue;
            }
            let partners: Vec<SetId> = partners.into_iter().collect();
            match partners.len() {
                1 => {
                    let other = &trace.support[partners[0]];
                    if other.sep_fingerprint == set.sep_fingerprint {
                        let mut ids = vec![id, partners[0]];
                        ids.sort_unstable();
                        pairs.insert(ids);
                    }
                }
                2 if config.include_triples => {
                    let mut ids = vec![id, partners[0], partners[1]];
                    ids.sort_unstable();
                    if !triples.contains(&ids) && closed(inst, trace, &ids) {
                        if triples.len() < config.max_triples {
                            triples.insert(ids);
                        } else {
                            dropped.insert(ids);
                        }
                    }
                }
                _ => {}
            }
        }
        for &id in &iv.active {
            for &v in &trace.support[id].vertices {
                holder[v] = usize::MAX;
            }
        }
    }

    let mut coverage_by_fp: HashMap<&[usize], Rational> = HashMap::new();
    for s in trace.supp() {
        *coverage_by_fp
            .entry(s.sep_fingerprint.as_slice())
            .or_insert_with(Rational::zero) += &s.y;
    }
    let mut builder = Builder {
        inst,
        trace,
        solver,
        coverage_by_fp,
        tree_cache: HashMap::new(),
    };
    let mut tuples = Vec::new();
    for ids in &pairs {
        if let Some(t) = builder.pair(ids) {
            tuples.push(t);
        }
    }
    for ids in &triples {
        if let Some(t) = builder.triple(ids) {
            tuples.push(t);
        }
    }
    TupleList {
        tuples,
        dropped_triples: dropped.len(),
    }
}

/// No demand has exactly one endpoint in the union of the sets.
fn closed(inst: &Instance, trace: &MoatTrace, ids: &[SetId]) -> bool {
    let inside = |v: VertexId| ids.iter().any(|&i| trace.support[i].contains(v));
    ids.iter().all(|&i| {
        trace.support[i]
            .sep_fingerprint
            .iter()
            .all(|&d| inside(inst.demands[d].a) && inside(inst.demands[d].b))
    })
}

struct Builder<'a, 's> {
    inst: &'a Instance,
    trace: &'a MoatTrace,
    solver: &'a SteinerSolver<'s>,
    coverage_by_fp: HashMap<&'a [usize], Rational>,
    tree_cache: HashMap<Vec<VertexId>, Option<(Rational, BTreeSet<EdgeId>)>>,
}

impl Builder<'_, '_> {
    fn witness(&self, ids: &[SetId]) -> Rational {
        ids.iter()
            .map(|&i| self.trace.support[i].birth.clone())
            .max()
            .expect("nonempty")
    }

    fn coverage(&self, ids: &[SetId]) -> Rational {
        let fps: BTreeSet<&[usize]> = ids
            .iter()
            .map(|&i| self.trace.support[i].sep_fingerprint.as_slice())
            .collect();
        fps.into_iter()
            .filter_map(|fp| self.coverage_by_fp.get(fp))
            .sum()
    }

    fn distance(&self, d: usize) -> Option<&Rational> {
        let dem = &self.inst.demands[d];
        self.solver.paths().distance(dem.a, dem.b)
    }

    fn finish(
        &self,
        kind: TupleKind,
        ids: &[SetId],
        representatives: Vec<Representative>,
        cost: Rational,
        connector: BTreeSet<EdgeId>,
    ) -> AutarkicTuple {
        let mut sep: BTreeSet<usize> = BTreeSet::new();
        for &i in ids {
            sep.extend(self.trace.support[i].sep_fingerprint.iter().copied());
        }
        let mut verts: BTreeSet<VertexId> = BTreeSet::new();
        for r in &representatives {
            verts.insert(self.inst.demands[r.demand].a);
            verts.insert(self.inst.demands[r.demand].b);
        }
        for &e in &connector {
            verts.insert(self.inst.edges[e].u);
            verts.insert(self.inst.edges[e].v);
        }
        let coverage = self.coverage(ids);
        let profit = Rational::from_int(2) * &coverage - &cost;
        AutarkicTuple {
            kind,
            member_set_ids: ids.to_vec(),
            witness_time: self.witness(ids),
            sep_union: sep.into_iter().collect(),
            representatives,
            connector,
            connector_vertices: verts.into_iter().collect(),
            cost,
            coverage,
            profit,
        }
    }

    fn pair(&mut self, ids: &[SetId]) -> Option<AutarkicTuple> {
        let fp = &self.trace.support[ids[0]].sep_fingerprint;
        let mut best: Option<(&Rational, usize)> = None;
        for &d in fp {
            if let Some(dist) = self.distance(d) {
                if best.is_none_or(|(b, _)| dist < b) {
                    best = Some((dist, d));
                }
            }
        }
        let (cost, d) = best?;
        let cost = cost.clone();
        let dem = &self.inst.demands[d];
        let connector = self.solver.paths().path(self.inst, dem.a, dem.b)?.into_iter().collect();
        Some(self.finish(
            TupleKind::Pair,
            ids,
            vec![Representative { demand: d, between: (0, 1) }],
            cost,
            connector,
        ))
    }

    fn triple(&mut self, ids: &[SetId]) -> Option<AutarkicTuple> {
        let sets: Vec<_> = ids.iter().map(|&i| &self.trace.support[i]).collect();
        let mut options: Vec<((usize, usize), Vec<usize>)> = Vec::new();
        for i in 0..3 {
            for j in i + 1..3 {
                let fj: BTreeSet<usize> = sets[j].sep_fingerprint.iter().copied().collect();
                let mut common: Vec<(Rational, usize)> = sets[i]
                    .sep_fingerprint
                    .iter()
                    .filter(|d| fj.contains(d))
                    .filter_map(|&d| self.distance(d).map(|x| (x.clone(), d)))
                    .collect();
                if common.is_empty() {
                    continue;
                }
                common.sort();
                common.truncate(TRIPLE_REPRESENTATIVES);
                options.push(((i, j), common.into_iter().map(|(_, d)| d).collect()));
            }
        }
        let mut best: Option<(Rational, BTreeSet<EdgeId>, Vec<usize>)> = None;
        let mut pick = vec![0usize; options.len()];
        loop {
            let chosen: Vec<usize> = pick.iter().zip(&options).map(|(&p, (_, ds))| ds[p]).collect();
            let mut terms: Vec<VertexId> = chosen
                .iter()
                .flat_map(|&d| [self.inst.demands[d].a, self.inst.demands[d].b])
                .collect();
            terms.sort_unstable();
            terms.dedup();
            if let Some((cost, edges)) = self.tree(&terms) {
                if best.as_ref().is_none_or(|(b, ..)| cost < *b) {
                    best = Some((cost, edges, chosen));
                }
            }
            // odometer over the candidate lists
            let mut k = 0;
            while k < pick.len() {
                pick[k] += 1;
                if pick[k] < options[k].1.len() {
                    break;
                }
                pick[k] = 0;
                k += 1;
            }
            if k == pick.len() {
                break;
            }
        }
        let (cost, connector, chosen) = best?;
        let representatives = options
            .iter()
            .zip(chosen)
            .map(|((between, _), demand)| Representative {
                demand,
                between: *between,
            })
            .collect();
        Some(self.finish(TupleKind::Triple, ids, representatives, cost, connector))
    }

    fn tree(&mut self, terms: &[VertexId]) -> Option<(Rational, BTreeSet<EdgeId>)> {
        if let Some(hit) = self.tree_cache.get(terms) {
            return hit.clone();
        }
        let made = self.solver.tree(terms).ok().map(|t| (t.cost, t.edges));
        self.tree_cache.insert(terms.to_vec(), made.clone());
        made
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LaminarOrder {
    Subset,
    Superset,
    Disjoint,
}

fn is_subset(a: &[VertexId], b: &[VertexId]) -> bool {
    a.len() <= b.len() && a.iter().all(|v| b.binary_search(v).is_ok())
}

fn tuple_within(trace: &MoatTrace, p: &AutarkicTuple, q: &AutarkicTuple) -> bool {
    p.member_set_ids.iter().all(|&a| {
        q.member_set_ids
            .iter()
            .any(|&b| is_subset(&trace.support[a].vertices, &trace.support[b].vertices))
    })
}

fn tuples_disjoint(trace: &MoatTrace, p: &AutarkicTuple, q: &AutarkicTuple) -> bool {
    p.member_set_ids.iter().all(|&a| {
        q.member_set_ids.iter().all(|&b| {
            let (x, y) = (&trace.support[a].vertices, &trace.support[b].vertices);
            !x.iter().any(|v| y.binary_search(v).is_ok())
        })
    })
}

/// Relation of `p` to `q` under member-wise containment.
pub fn laminar_order(
    trace: &MoatTrace,
    p: &AutarkicTuple,
    q: &AutarkicTuple,
) -> Result<LaminarOrder> {
    if tuples_disjoint(trace, p, q) {
        Ok(LaminarOrder::Disjoint)
    } else if tuple_within(trace, p, q) {
        Ok(LaminarOrder::Subset)
    } else if tuple_within(trace, q, p) {
        Ok(LaminarOrder::Superset)
    } else {
        let key = |t: &AutarkicTuple| t.member_set_ids[0];
        Err(Error::LaminarityBroken(key(p), key(q)))
    }
}

/// Maximum-profit crossing-free collection. Ties favour leaving a tuple out.
pub fn max_profit_collection(
    trace: &MoatTrace,
    tuples: &[AutarkicTuple],
) -> Result<AutarkicCollection> {
    let n = tuples.len();
    // below[q]: indices p ≠ q with p ⊆ q
    let mut below: Vec<Vec<usize>> = vec![Vec::new(); n];
    for p in 0..n {
        for q in p + 1..n {
            match laminar_order(trace, &tuples[p], &tuples[q])? {
                LaminarOrder::Subset => below[q].push(p),
                LaminarOrder::Superset => below[p].push(q),
                LaminarOrder::Disjoint => {}
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&q| (below[q].len(), q));
    let maximal = |within: &[usize]| -> Vec<usize> {
        within
            .iter()
            .copied()
            .filter(|&p| !within.iter().any(|&r| r != p && below[r].contains(&p)))
            .collect()
    };
    let mut best: Vec<Option<(Rational, Vec<usize>)>> = vec![None; n];
    let union_of = |best: &[Option<(Rational, Vec<usize>)>], tops: &[usize]| {
        let mut profit = Rational::zero();
        let mut chosen = Vec::new();
        for &p in tops {
            let (pp, pc) = best[p].as_ref().expect("children solved first");
            profit += pp;
            chosen.extend(pc.iter().copied());
        }
        (profit, chosen)
    };
    for &q in &order {
        let excluded = union_of(&best, &maximal(&below[q]));
        let compatible: Vec<usize> = below[q]
            .iter()
            .copied()
            .filter(|&p| !tuples[p].crosses(&tuples[q]))
            .collect();
        let (mut inc_profit, mut inc_chosen) = union_of(&best, &maximal(&compatible));
        inc_profit += &tuples[q].profit;
        inc_chosen.push(q);
        best[q] = Some(if inc_profit > excluded.0 {
            (inc_profit, inc_chosen)
        } else {
            excluded
        });
    }
    let all: Vec<usize> = (0..n).collect();
    let (_, mut chosen) = union_of(&best, &maximal(&all));
    chosen.sort_unstable();
    Ok(AutarkicCollection::new(
        chosen.into_iter().map(|i| tuples[i].clone()).collect(),
    ))
}

/// `F3` together with the run on the contracted instance.
pub struct F3Build {
    pub forest: SolutionForest,
    pub contracted_trace: MoatTrace,
    pub contracted: Instance,
    pub connector_cost: Rational,
}

/// Buys every connector, contracts the connectors, solves the residual
/// instance with moat growing (classic when `classic_gw`), and lifts back.
pub fn build_f3(
    inst: &Instance,
    coll: &AutarkicCollection,
    epsilon: &Rational,
    classic_gw: bool,
) -> F3Build {
    let groups: Vec<Vec<VertexId>> = coll.tuples.iter().map(|t| t.connector_vertices.clone()).collect();
    let contraction = Contraction::new(inst, &groups);
    let eps = if classic_gw { Rational::zero() } else { epsilon.clone() };
    let contracted_trace = run_extended_moat(&contraction.inst, &eps);
    let residual = extract_forest(&contraction.inst, &contracted_trace);
    let mut edges: BTreeSet<EdgeId> = contraction.lift(&residual.edge_ids).into_iter().collect();
    let mut connectors = BTreeSet::new();
    for t in &coll.tuples {
        connectors.extend(t.connector.iter().copied());
    }
    let connector_cost = inst.edge_cost_sum(&connectors);
    edges.extend(connectors);
    F3Build {
        forest: SolutionForest::from_edges(inst, edges),
        contracted_trace,
        contracted: contraction.inst,
        connector_cost,
    }
}

/// Tuple counts by kind, for reports.
pub fn kind_counts(tuples: &[AutarkicTuple]) -> BTreeMap<TupleKind, usize> {
    let mut out = BTreeMap::new();
    for t in tuples {
        *out.entry(t.kind).or_insert(0) += 1;
    }
    out
}
