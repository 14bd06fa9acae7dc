//! Contracting actively connected sets.
//!
//! The gain of a collection of actively connected sets is twice the time
//! integral of the drop in active-set count when active sets touched by the
//! same member are merged. It is monotone and submodular, so a density greedy
//! with partial enumeration over expensive elements finds a collection with
//! good gain minus Steiner cost. Contracting that collection and re-running
//! the timed moat growing yields the forest `F2`.
//!
//! Only sets of at most `k` vertices are enumerated. For an actively
//! connected set, a `k`-restricted Steiner tree splits it into pieces of at
//! most `k` vertices with the same gain and a small cost overhead, so larger
//! sets need not be considered. The precondition matters: a set that is not
//! actively connected can merge active moats that none of its pieces touches.

use std::collections::{BTreeSet, HashMap};

use serde::Serialize;

use crate::contract::Contraction;
use crate::error::{Error, Result};
use crate::instance::{EdgeId, Instance, SolutionForest, VertexId};
use crate::moat::{actively_connected_classes, extract_forest, run_timed_moat, ActiveClasses, MoatTrace};
use crate::paths::SteinerSolver;
use crate::rational::Rational;
use crate::unionfind::UnionFind;

pub const DEFAULT_K: usize = 3;
pub const DEFAULT_CANDIDATE_CAP: usize = 200_000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CandidateSet {
    pub vertices: Vec<VertexId>,
    pub steiner_cost: Rational,
    pub steiner_tree: BTreeSet<EdgeId>,
    pub class_witness: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ContractionPlan {
    pub selected: Vec<CandidateSet>,
    pub gain_value: Rational,
    pub cost_value: Rational,
}

impl ContractionPlan {
    pub fn empty() -> Self {
        ContractionPlan {
            selected: Vec::new(),
            gain_value: Rational::zero(),
            cost_value: Rational::zero(),
        }
    }

    pub fn profit(&self) -> Rational {
        &self.gain_value - &self.cost_value
    }

    pub fn vertex_sets(&self) -> Vec<Vec<VertexId>> {
        self.selected.iter().map(|c| c.vertices.clone()).collect()
    }
}

const NO_SLOT: u32 = u32::MAX;

/// Evaluates gains against one trace.
pub struct GainEvaluator<'t> {
    trace: &'t MoatTrace,
    classes: ActiveClasses,
    /// `2 · length` of each timeline interval.
    weights: Vec<Rational>,
    /// `slots[i][v]`: index of the active set holding `v` in interval `i`.
    slots: Vec<Vec<u32>>,
    active_counts: Vec<usize>,
}

impl<'t> GainEvaluator<'t> {
    pub fn new(trace: &'t MoatTrace) -> Self {
        let n = trace.vertex_count;
        let mut weights = Vec::with_capacity(trace.timeline.len());
        let mut slots = Vec::with_capacity(trace.timeline.len());
        let mut active_counts = Vec::with_capacity(trace.timeline.len());
        for iv in &trace.timeline {
            weights.push(Rational::from_int(2) * iv.len());
            let mut map = vec![NO_SLOT; n];
            for (slot, &id) in iv.active.iter().enumerate() {
                for &v in &trace.support[id].vertices {
                    map[v] = slot as u32;
                }
            }
            slots.push(map);
            active_counts.push(iv.active.len());
        }
        GainEvaluator {
            trace,
            classes: actively_connected_classes(trace),
            weights,
            slots,
            active_counts,
        }
    }

    pub fn trace(&self) -> &'t MoatTrace {
        self.trace
    }

    pub fn classes(&self) -> &ActiveClasses {
        &self.classes
    }

    pub fn check(&self, set: &[VertexId]) -> Result<()> {
        if self.classes.same_class(set) {
            Ok(())
        } else {
            Err(Error::NotActivelyConnected(set.to_vec()))
        }
    }

    pub fn gain_of(&self, sets: &[Vec<VertexId>]) -> Result<Rational> {
        for s in sets {
            self.check(s)?;
        }
        let mut state = self.state();
        for s in sets {
            state.add(s);
        }
        Ok(state.gain)
    }

    /// Incremental state for the empty collection.
    pub fn state(&self) -> GainState<'_, 't> {
        GainState {
            eval: self,
            ufs: self.active_counts.iter().map(|&c| UnionFind::new(c)).collect(),
            gain: Rational::zero(),
        }
    }
}

/// `gain(𝒮)` for a collection of vertex sets; errors if a set is not actively connected.
pub fn gain_of(trace: &MoatTrace, sets: &[Vec<VertexId>]) -> Result<Rational> {
    GainEvaluator::new(trace).gain_of(sets)
}

/// Per-interval merge state of the active sets under a growing collection.
#[derive(Clone)]
pub struct GainState<'e, 't> {
    eval: &'e GainEvaluator<'t>,
    ufs: Vec<UnionFind>,
    pub gain: Rational,
}

impl GainState<'_, '_> {
    fn hit_roots(&self, uf: &mut UnionFind, map: &[u32], set: &[VertexId]) -> Vec<usize> {
        let mut roots: Vec<usize> = set
            .iter()
            .filter(|&&v| map[v] != NO_SLOT)
            .map(|&v| uf.find(map[v] as usize))
            .collect();
        roots.sort_unstable();
        roots.dedup();
        roots
    }

    pub fn marginal(&self, set: &[VertexId]) -> Rational {
        let mut total = Rational::zero();
        for (i, map) in self.eval.slots.iter().enumerate() {
            let mut uf = self.ufs[i].clone();
            let hits = self.hit_roots(&mut uf, map, set).len();
            if hits > 1 {
                total += &self.eval.weights[i] * &Rational::from_int(hits as i64 - 1);
            }
        }
        total
    }

    pub fn add(&mut self, set: &[VertexId]) {
        for i in 0..self.ufs.len() {
            let map = &self.eval.slots[i];
            let mut merges = 0i64;
            let mut first: Option<usize> = None;
            for &v in set {
                if map[v] == NO_SLOT {
                    continue;
                }
                let slot = map[v] as usize;
                match first {
                    None => first = Some(slot),
                    Some(f) => {
                        if self.ufs[i].union(f, slot) {
                            merges += 1;
                        }
                    }
                }
            }
            if merges > 0 {
                self.gain += &self.eval.weights[i] * &Rational::from_int(merges);
            }
        }
    }
}

/// All subsets of size `2..=k` of every actively connected class, with their
/// exact Steiner costs.
pub fn enumerate_restricted_sets(
    trace: &MoatTrace,
    inst: &Instance,
    k: usize,
    cap: usize,
    solver: &SteinerSolver<'_>,
) -> Result<Vec<CandidateSet>> {
    if k < 2 || k > solver.k_max() {
        return Err(Error::InvalidParams(format!(
            "k = {k} must lie in 2..={}",
            solver.k_max()
        )));
    }
    let classes = actively_connected_classes(trace);
    let mut count: u128 = 0;
    for c in &classes.classes {
        for size in 2..=k.min(c.len()) {
            count += binomial(c.len(), size);
        }
    }
    if count > cap as u128 {
        return Err(Error::CandidateCap { count, cap });
    }
    let sp = solver.paths();
    let mut out = Vec::with_capacity(count as usize);
    for (ci, class) in classes.classes.iter().enumerate() {
        for size in 2..=k.min(class.len()) {
            for_each_combination(class.len(), size, |idx| {
                let vertices: Vec<VertexId> = idx.iter().map(|&i| class[i]).collect();
                let tree = if size == 2 {
                    sp.distance(vertices[0], vertices[1]).map(|d| {
                        (
                            d.clone(),
                            sp.path(inst, vertices[0], vertices[1])
                                .expect("reachable")
                                .into_iter()
                                .collect(),
                        )
                    })
                } else {
                    solver.tree(&vertices).ok().map(|t| (t.cost, t.edges))
                };
                if let Some((steiner_cost, steiner_tree)) = tree {
                    out.push(CandidateSet {
                        vertices,
                        steiner_cost,
                        steiner_tree,
                        class_witness: ci,
                    });
                }
            });
        }
    }
    Ok(out)
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
    }
    r
}

pub(crate) fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Knobs for [`maximize_profit`].
#[derive(Clone, Debug)]
pub struct GreedyConfig {
    /// Appears only in the approximation guarantee; recorded, not used.
    pub alpha: Rational,
    /// Expensive elements guessed up front number at most `⌈1/γ⌉`.
    pub gamma: Rational,
    /// Hard cap on the guessed set size, applied on top of `⌈1/γ⌉`.
    pub max_guess: usize,
}

impl Default for GreedyConfig {
    fn default() -> Self {
        GreedyConfig {
            alpha: Rational::new(9, 100),
            gamma: Rational::new(1, 100),
            max_guess: 1,
        }
    }
}

struct Picks<'e, 't> {
    state: GainState<'e, 't>,
    selected: Vec<CandidateSet>,
    cost: Rational,
}

impl<'e, 't> Picks<'e, 't> {
    fn profit(&self) -> Rational {
        &self.state.gain - &self.cost
    }

    fn to_plan(&self) -> ContractionPlan {
        ContractionPlan {
            selected: self.selected.clone(),
            gain_value: self.state.gain.clone(),
            cost_value: self.cost.clone(),
        }
    }
}

/// Merges a candidate into the current picks, uniting it with every pick it
/// overlaps. Returns the resulting pick list and cost delta, or `None` when
/// the union would exceed the exact Steiner limit.
fn merge_in(
    selected: &[CandidateSet],
    cand: &CandidateSet,
    unions: &mut UnionCache<'_, '_>,
) -> Option<(Vec<CandidateSet>, Rational)> {
    let overlapping: Vec<usize> = selected
        .iter()
        .enumerate()
        .filter(|(_, s)| s.vertices.iter().any(|v| cand.vertices.binary_search(v).is_ok()))
        .map(|(i, _)| i)
        .collect();
    if overlapping.is_empty() {
        let mut next = selected.to_vec();
        next.push(cand.clone());
        return Some((next, cand.steiner_cost.clone()));
    }
    let mut verts: BTreeSet<VertexId> = cand.vertices.iter().copied().collect();
    let mut removed_cost = Rational::zero();
    for &i in &overlapping {
        verts.extend(selected[i].vertices.iter().copied());
        removed_cost += &selected[i].steiner_cost;
    }
    let verts: Vec<VertexId> = verts.into_iter().collect();
    let merged = unions.get(&verts, cand.class_witness)?;
    let delta = &merged.steiner_cost - &removed_cost;
    let mut next: Vec<CandidateSet> = selected
        .iter()
        .enumerate()
        .filter(|(i, _)| !overlapping.contains(i))
        .map(|(_, s)| s.clone())
        .collect();
    next.push(merged);
    Some((next, delta))
}

struct UnionCache<'s, 'a> {
    solver: &'s SteinerSolver<'a>,
    cache: HashMap<Vec<VertexId>, Option<CandidateSet>>,
}

impl UnionCache<'_, '_> {
    fn get(&mut self, verts: &[VertexId], class: usize) -> Option<CandidateSet> {
        if let Some(hit) = self.cache.get(verts) {
            return hit.clone();
        }
        let made = self.solver.tree(verts).ok().map(|t| CandidateSet {
            vertices: verts.to_vec(),
            steiner_cost: t.cost,
            steiner_tree: t.edges,
            class_witness: class,
        });
        self.cache.insert(verts.to_vec(), made.clone());
        made
    }
}

/// Picks a disjoint collection of candidates with large `gain − cost`.
///
/// Elements whose own gain does not exceed their cost are discarded first:
/// by submodularity they can never raise the objective. For every threshold
/// cost `τ` (and for an empty low-cost pool) and every guess of at most
/// `min(⌈1/γ⌉, max_guess)` elements costlier than `τ`, a density greedy runs
/// over the elements of cost at most `τ`. The best prefix of any run wins;
/// the empty plan is the baseline, so the result never has negative profit.
pub fn maximize_profit(
    candidates: &[CandidateSet],
    eval: &GainEvaluator<'_>,
    solver: &SteinerSolver<'_>,
    config: &GreedyConfig,
) -> Result<ContractionPlan> {
    if !config.gamma.is_positive() {
        return Err(Error::InvalidParams("gamma must be positive".into()));
    }
    for c in candidates {
        eval.check(&c.vertices)?;
    }
    let empty = eval.state();
    let pool: Vec<&CandidateSet> = candidates
        .iter()
        .filter(|c| empty.marginal(&c.vertices) > c.steiner_cost)
        .collect();
    let mut best = ContractionPlan::empty();
    if pool.is_empty() {
        return Ok(best);
    }
    let guess_limit = (Rational::one() / &config.gamma)
        .ceil_to_u64()
        .map_or(config.max_guess, |g| (g as usize).min(config.max_guess));

    let mut thresholds: Vec<Option<&Rational>> = vec![None];
    let mut costs: Vec<&Rational> = pool.iter().map(|c| &c.steiner_cost).collect();
    costs.sort();
    costs.dedup();
    thresholds.extend(costs.into_iter().map(Some));

    let mut unions = UnionCache {
        solver,
        cache: HashMap::new(),
    };
    let mut best_profit = Rational::zero();
    for tau in thresholds {
        let (low, high): (Vec<usize>, Vec<usize>) = (0..pool.len())
            .partition(|&i| tau.is_some_and(|t| pool[i].steiner_cost <= *t));
        for size in 0..=guess_limit.min(high.len()) {
            let mut runs: Vec<Vec<usize>> = Vec::new();
            for_each_combination(high.len(), size, |idx| {
                runs.push(idx.iter().map(|&i| high[i]).collect());
            });
            for guess in runs {
                let Some(start) = seed_picks(eval, &pool, &guess, &mut unions) else {
                    continue;
                };
                greedy(eval, &pool, &low, start, &mut unions, &mut |p| {
                    let profit = p.profit();
                    if profit > best_profit {
                        best_profit = profit;
                        best = p.to_plan();
                    }
                });
            }
        }
    }
    Ok(best)
}

fn seed_picks<'e, 't>(
    eval: &'e GainEvaluator<'t>,
    pool: &[&CandidateSet],
    guess: &[usize],
    unions: &mut UnionCache<'_, '_>,
) -> Option<Picks<'e, 't>> {
    let mut picks = Picks {
        state: eval.state(),
        selected: Vec::new(),
        cost: Rational::zero(),
    };
    for &g in guess {
        let (next, delta) = merge_in(&picks.selected, pool[g], unions)?;
        picks.state.add(&pool[g].vertices);
        picks.selected = next;
        picks.cost += &delta;
    }
    Some(picks)
}

fn greedy<'e, 't>(
    _eval: &'e GainEvaluator<'t>,
    pool: &[&CandidateSet],
    low: &[usize],
    mut picks: Picks<'e, 't>,
    unions: &mut UnionCache<'_, '_>,
    report: &mut dyn FnMut(&Picks<'e, 't>),
) {
    report(&picks);
    let mut used = vec![false; pool.len()];
    loop {
        // (gain delta, cost delta, index, merged picks)
        let mut best: Option<(Rational, Rational, usize, Vec<CandidateSet>)> = None;
        for &i in low {
            if used[i] {
                continue;
            }
            let dg = picks.state.marginal(&pool[i].vertices);
            if !dg.is_positive() {
                used[i] = true;
                continue;
            }
            let Some((next, dc)) = merge_in(&picks.selected, pool[i], unions) else {
                used[i] = true;
                continue;
            };
            let wins = match &best {
                None => true,
                Some((bg, bc, ..)) => denser(&dg, &dc, bg, bc),
            };
            if wins {
                best = Some((dg, dc, i, next));
            }
        }
        let Some((_, dc, i, next)) = best else {
            return;
        };
        used[i] = true;
        picks.state.add(&pool[i].vertices);
        picks.selected = next;
        picks.cost += &dc;
        report(&picks);
    }
}

/// `a_g / a_c > b_g / b_c` with zero costs treated as infinite density.
fn denser(ag: &Rational, ac: &Rational, bg: &Rational, bc: &Rational) -> bool {
    match (ac.is_positive(), bc.is_positive()) {
        (false, true) => true,
        (true, false) => false,
        (false, false) => ag > bg,
        (true, true) => ag * bc > bg * ac,
    }
}

/// `F2` together with the contracted timed run that produced it.
pub struct F2Build {
    pub forest: SolutionForest,
    pub contracted_trace: MoatTrace,
    pub contracted: Instance,
}

/// Contract each plan set, re-run the timed moat growing with inherited
/// deactivation times, prune, lift, and add the plan's Steiner trees.
pub fn build_f2(inst: &Instance, trace: &MoatTrace, plan: &ContractionPlan) -> F2Build {
    let contraction = Contraction::new(inst, &plan.vertex_sets());
    let deac = contraction.max_over_members(&trace.deactivation);
    let contracted_trace = run_timed_moat(&contraction.inst, &deac);
    let residual = extract_forest(&contraction.inst, &contracted_trace);
    let mut edges: BTreeSet<EdgeId> = contraction.lift(&residual.edge_ids).into_iter().collect();
    for s in &plan.selected {
        edges.extend(s.steiner_tree.iter().copied());
    }
    F2Build {
        forest: SolutionForest::from_edges(inst, edges),
        contracted_trace,
        contracted: contraction.inst,
    }
}
