//! Event-driven moat growing.
//!
//! Two activity rules share one engine:
//!
//! * the extended rule, where a component is active while it separates a
//!   demand (accruing budget at rate ε) or while it still holds budget
//!   (spending it at unit rate);
//! * the timed rule, where a component is active while `t < deac[v]` for one
//!   of its members.
//!
//! Every quantity is an exact [`Rational`]. At an event instant all edges with
//! zero slack are merged first (ascending edge id), then activity is
//! re-evaluated on the merged components.

mod classes;
mod forest;

use std::collections::BTreeMap;

use serde::Serialize;

use crate::instance::{EdgeId, Instance, VertexId};
use crate::rational::Rational;
use crate::unionfind::UnionFind;

pub use classes::{actively_connected_classes, ActiveClasses};
pub use forest::{excess, extract_forest, lambda_diagnostic};

pub type SetId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SetKind {
    Sep,
    Unsep,
    ZeroGrowth,
}

/// One component that existed during the run, with its dual value.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SupportSet {
    pub id: SetId,
    /// Sorted.
    pub vertices: Vec<VertexId>,
    pub birth: Rational,
    /// Time the set stopped growing; equals `birth` for zero-growth sets.
    pub growth_end: Rational,
    pub y: Rational,
    pub parent: Option<SetId>,
    pub kind: SetKind,
    /// Sorted indices of the demands with exactly one endpoint inside.
    pub sep_fingerprint: Vec<usize>,
}

impl SupportSet {
    pub fn contains(&self, v: VertexId) -> bool {
        self.vertices.binary_search(&v).is_ok()
    }

    /// Dual value accumulated by time `t`.
    pub fn y_at(&self, t: &Rational) -> Rational {
        if *t <= self.birth {
            Rational::zero()
        } else if *t >= self.growth_end {
            self.y.clone()
        } else {
            t - &self.birth
        }
    }

    pub fn in_support(&self) -> bool {
        self.y.is_positive()
    }

    /// Whether the set is growing at some instant of `[from, to)`-style overlap.
    pub fn active_at(&self, t: &Rational) -> bool {
        self.birth <= *t && *t < self.growth_end
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Interval {
    pub start: Rational,
    pub end: Rational,
    /// Sorted ids of the sets growing throughout `[start, end)`.
    pub active: Vec<SetId>,
}

impl Interval {
    pub fn len(&self) -> Rational {
        &self.end - &self.start
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MergeEvent {
    pub time: Rational,
    pub merged: Vec<SetId>,
    pub into: SetId,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TightEdge {
    pub edge: EdgeId,
    pub time: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum RunMode {
    Extended { epsilon: Rational },
    Timed,
}

/// Complete history of one run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MoatTrace {
    pub mode: RunMode,
    pub vertex_count: usize,
    pub support: Vec<SupportSet>,
    pub timeline: Vec<Interval>,
    /// `deactivation[v]`: first instant at which `v` is not in an active component.
    pub deactivation: Vec<Rational>,
    pub merge_events: Vec<MergeEvent>,
    /// Edges added to the tight forest, in the order they were added.
    pub tight_edges: Vec<TightEdge>,
    /// Budgets of the final components, keyed by set id (extended rule only).
    pub budgets_final: BTreeMap<SetId, Rational>,
    pub budget_generated: Rational,
    pub budget_spent: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DualSummary {
    pub y_sep_total: Rational,
    pub y_unsep_total: Rational,
    pub y_total: Rational,
}

impl MoatTrace {
    /// ε of the extended rule; zero for timed runs.
    pub fn epsilon(&self) -> Rational {
        match &self.mode {
            RunMode::Extended { epsilon } => epsilon.clone(),
            RunMode::Timed => Rational::zero(),
        }
    }

    pub fn summary(&self) -> DualSummary {
        let mut sep = Rational::zero();
        let mut unsep = Rational::zero();
        for s in &self.support {
            match s.kind {
                SetKind::Sep => sep += &s.y,
                SetKind::Unsep => unsep += &s.y,
                SetKind::ZeroGrowth => {}
            }
        }
        DualSummary {
            y_total: &sep + &unsep,
            y_sep_total: sep,
            y_unsep_total: unsep,
        }
    }

    pub fn y_total(&self) -> Rational {
        self.support.iter().map(|s| &s.y).sum()
    }

    /// Sets with positive dual value.
    pub fn supp(&self) -> impl Iterator<Item = &SupportSet> {
        self.support.iter().filter(|s| s.in_support())
    }

    pub fn end_time(&self) -> Rational {
        self.timeline
            .last()
            .map_or_else(Rational::zero, |iv| iv.end.clone())
    }

    /// `∫ |active sets| dt` over the timeline.
    pub fn timeline_integral(&self) -> Rational {
        self.timeline
            .iter()
            .map(|iv| iv.len() * Rational::from_int(iv.active.len() as i64))
            .sum()
    }

    /// Dual load `∑ y_U(t)` over sets whose boundary separates `u` and `v`.
    pub fn load_at(&self, u: VertexId, v: VertexId, t: &Rational) -> Rational {
        self.support
            .iter()
            .filter(|s| s.contains(u) != s.contains(v))
            .map(|s| s.y_at(t))
            .sum()
    }

    /// Final dual load on the cut between `u` and `v`.
    pub fn load(&self, u: VertexId, v: VertexId) -> Rational {
        self.support
            .iter()
            .filter(|s| s.contains(u) != s.contains(v))
            .map(|s| s.y.clone())
            .sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }
}

enum Rule<'a> {
    Extended(&'a Rational),
    Timed(&'a [Rational]),
}

struct Component {
    set: SetId,
    members: Vec<VertexId>,
    budget: Rational,
    demand_active: bool,
    active: bool,
}

struct Engine<'a> {
    inst: &'a Instance,
    rule: Rule<'a>,
    /// Cheapest edge per endpoint pair, ascending id.
    edges: Vec<EdgeId>,
    uf: UnionFind,
    /// Components keyed by union-find root.
    comps: BTreeMap<VertexId, Component>,
    /// Accumulated dual of all sets containing each vertex.
    load: Vec<Rational>,
    support: Vec<SupportSet>,
    timeline: Vec<Interval>,
    deac: Vec<Option<Rational>>,
    merges: Vec<MergeEvent>,
    tight: Vec<TightEdge>,
    generated: Rational,
    spent: Rational,
    now: Rational,
}

fn representative_edges(inst: &Instance) -> Vec<EdgeId> {
    let mut best: BTreeMap<(VertexId, VertexId), EdgeId> = BTreeMap::new();
    for (i, e) in inst.edges.iter().enumerate() {
        if e.u == e.v {
            continue;
        }
        let key = (e.u.min(e.v), e.u.max(e.v));
        match best.get(&key) {
            Some(&j) if inst.edges[j].cost <= e.cost => {}
            _ => {
                best.insert(key, i);
            }
        }
    }
    let mut out: Vec<EdgeId> = best.into_values().collect();
    out.sort_unstable();
    out
}

fn fingerprint(inst: &Instance, members: &[VertexId]) -> Vec<usize> {
    inst.demands
        .iter()
        .enumerate()
        .filter(|(_, d)| {
            members.binary_search(&d.a).is_ok() != members.binary_search(&d.b).is_ok()
        })
        .map(|(i, _)| i)
        .collect()
}

impl<'a> Engine<'a> {
    fn new(inst: &'a Instance, rule: Rule<'a>) -> Self {
        let n = inst.vertex_count;
        let mut eng = Engine {
            inst,
            rule,
            edges: representative_edges(inst),
            uf: UnionFind::new(n),
            comps: BTreeMap::new(),
            load: vec![Rational::zero(); n],
            support: Vec::with_capacity(2 * n),
            timeline: Vec::new(),
            deac: vec![None; n],
            merges: Vec::new(),
            tight: Vec::new(),
            generated: Rational::zero(),
            spent: Rational::zero(),
            now: Rational::zero(),
        };
        for v in 0..n {
            let set = eng.new_set(vec![v]);
            eng.comps.insert(
                v,
                Component {
                    set,
                    members: vec![v],
                    budget: Rational::zero(),
                    demand_active: false,
                    active: false,
                },
            );
        }
        eng
    }

    fn new_set(&mut self, members: Vec<VertexId>) -> SetId {
        let id = self.support.len();
        let fp = fingerprint(self.inst, &members);
        self.support.push(SupportSet {
            id,
            vertices: members,
            birth: self.now.clone(),
            growth_end: self.now.clone(),
            y: Rational::zero(),
            parent: None,
            kind: SetKind::ZeroGrowth,
            sep_fingerprint: fp,
        });
        id
    }

    fn slack(&self, e: EdgeId) -> Rational {
        let edge = &self.inst.edges[e];
        &edge.cost - &self.load[edge.u] - &self.load[edge.v]
    }

    /// Merge everything joined by zero-slack edges, then re-evaluate activity.
    fn settle(&mut self) {
        let mut touched: BTreeMap<VertexId, Vec<VertexId>> = BTreeMap::new();
        let roots_before: Vec<VertexId> = (0..self.inst.vertex_count).map(|v| self.uf.find(v)).collect();
        let mut any = false;
        for idx in 0..self.edges.len() {
            let e = self.edges[idx];
            let (u, v) = (self.inst.edges[e].u, self.inst.edges[e].v);
            if self.uf.same(u, v) || !self.slack(e).is_zero() {
                continue;
            }
            self.uf.union(u, v);
            self.tight.push(TightEdge {
                edge: e,
                time: self.now.clone(),
            });
            any = true;
        }
        if any {
            for (v, &old_root) in roots_before.iter().enumerate() {
                if v == old_root {
                    let r = self.uf.find(v);
                    touched.entry(r).or_default().push(old_root);
                }
            }
            for (new_root, old_roots) in touched {
                if old_roots.len() < 2 {
                    // unchanged component; rekey if the root moved
                    let old = old_roots[0];
                    if old != new_root {
                        let c = self.comps.remove(&old).expect("component exists");
                        self.comps.insert(new_root, c);
                    }
                    continue;
                }
                let parts: Vec<Component> = old_roots
                    .iter()
                    .map(|r| self.comps.remove(r).expect("component exists"))
                    .collect();
                let mut members: Vec<VertexId> =
                    parts.iter().flat_map(|c| c.members.iter().copied()).collect();
                members.sort_unstable();
                let budget: Rational = parts.iter().map(|c| &c.budget).sum();
                let merged: Vec<SetId> = parts.iter().map(|c| c.set).collect();
                let into = self.new_set(members.clone());
                for &s in &merged {
                    self.support[s].parent = Some(into);
                }
                self.merges.push(MergeEvent {
                    time: self.now.clone(),
                    merged,
                    into,
                });
                self.comps.insert(
                    new_root,
                    Component {
                        set: into,
                        members,
                        budget,
                        demand_active: false,
                        active: false,
                    },
                );
            }
        }
        self.classify();
    }

    fn classify(&mut self) {
        let now = self.now.clone();
        for comp in self.comps.values_mut() {
            match self.rule {
                Rule::Extended(_) => {
                    comp.demand_active = !self.support[comp.set].sep_fingerprint.is_empty();
                    comp.active = comp.demand_active || comp.budget.is_positive();
                }
                Rule::Timed(deac) => {
                    comp.demand_active = false;
                    comp.active = comp.members.iter().any(|&v| now < deac[v]);
                }
            }
            if !comp.active {
                for &v in &comp.members {
                    if self.deac[v].is_none() {
                        self.deac[v] = Some(now.clone());
                    }
                }
            }
        }
    }

    fn next_event(&self) -> Option<Rational> {
        let mut next: Option<Rational> = None;
        let mut consider = |t: Rational| {
            if next.as_ref().is_none_or(|cur| t < *cur) {
                next = Some(t);
            }
        };
        let active_of = |v: VertexId, uf: &mut UnionFind| -> bool {
            let r = uf.find(v);
            self.comps[&r].active
        };
        let mut uf = self.uf.clone();
        for &e in &self.edges {
            let (u, v) = (self.inst.edges[e].u, self.inst.edges[e].v);
            if uf.same(u, v) {
                continue;
            }
            let rate = active_of(u, &mut uf) as i64 + active_of(v, &mut uf) as i64;
            if rate > 0 {
                consider(&self.now + &(self.slack(e) / Rational::from_int(rate)));
            }
        }
        for comp in self.comps.values() {
            if !comp.active {
                continue;
            }
            match self.rule {
                Rule::Extended(_) => {
                    if !comp.demand_active {
                        consider(&self.now + &comp.budget);
                    }
                }
                Rule::Timed(deac) => {
                    let last = comp
                        .members
                        .iter()
                        .map(|&v| &deac[v])
                        .max()
                        .expect("component has members");
                    consider(last.clone());
                }
            }
        }
        next
    }

    fn advance(&mut self, to: Rational) {
        let dt = &to - &self.now;
        debug_assert!(dt.is_positive());
        let mut active_sets = Vec::new();
        for comp in self.comps.values_mut() {
            if !comp.active {
                continue;
            }
            active_sets.push(comp.set);
            let set = &mut self.support[comp.set];
            set.y += &dt;
            set.growth_end = to.clone();
            for &v in &comp.members {
                self.load[v] += &dt;
            }
            if let Rule::Extended(eps) = self.rule {
                if comp.demand_active {
                    let gain = eps * &dt;
                    comp.budget += &gain;
                    self.generated += &gain;
                } else {
                    comp.budget -= &dt;
                    self.spent += &dt;
                }
            }
        }
        active_sets.sort_unstable();
        self.timeline.push(Interval {
            start: self.now.clone(),
            end: to.clone(),
            active: active_sets,
        });
        self.now = to;
    }

    fn run(mut self) -> MoatTrace {
        self.settle();
        while let Some(t) = self.next_event() {
            self.advance(t);
            self.settle();
        }
        for s in &mut self.support {
            s.kind = if !s.y.is_positive() {
                SetKind::ZeroGrowth
            } else if s.sep_fingerprint.is_empty() {
                SetKind::Unsep
            } else {
                SetKind::Sep
            };
        }
        let now = self.now.clone();
        let deactivation = self
            .deac
            .into_iter()
            .map(|d| d.unwrap_or_else(|| now.clone()))
            .collect();
        let budgets_final = match self.rule {
            Rule::Extended(_) => self
                .comps
                .values()
                .map(|c| (c.set, c.budget.clone()))
                .collect(),
            Rule::Timed(_) => BTreeMap::new(),
        };
        let mode = match self.rule {
            Rule::Extended(eps) => RunMode::Extended {
                epsilon: eps.clone(),
            },
            Rule::Timed(_) => RunMode::Timed,
        };
        MoatTrace {
            mode,
            vertex_count: self.inst.vertex_count,
            support: self.support,
            timeline: self.timeline,
            deactivation,
            merge_events: self.merges,
            tight_edges: self.tight,
            budgets_final,
            budget_generated: self.generated,
            budget_spent: self.spent,
        }
    }
}

/// ε-extended moat growing. `inst` must validate cleanly.
pub fn run_extended_moat(inst: &Instance, epsilon: &Rational) -> MoatTrace {
    assert!(!epsilon.is_negative(), "epsilon must be non-negative");
    Engine::new(inst, Rule::Extended(epsilon)).run()
}

/// Moat growing driven by a fixed deactivation vector: a component grows
/// while `t < deac[v]` for at least one member `v`.
pub fn run_timed_moat(inst: &Instance, deac: &[Rational]) -> MoatTrace {
    assert_eq!(deac.len(), inst.vertex_count, "one deactivation time per vertex");
    Engine::new(inst, Rule::Timed(deac)).run()
}
