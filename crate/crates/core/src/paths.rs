//! Shortest paths and exact Steiner trees on small terminal sets.
//!
//! Steiner trees use the Dreyfus–Wagner recursion over the metric closure:
//! `dp[X][v]` is the cheapest tree spanning `X ∪ {v}`, built from a split of
//! `X` at a branching vertex followed by a shortest path to `v`. When all edge
//! costs share a denominator small enough, the table runs on scaled `i64`
//! values; otherwise it falls back to exact rationals.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive};

use crate::error::{Error, Result};
use crate::instance::{EdgeId, Instance, SolutionForest, VertexId};
use crate::rational::Rational;
use crate::unionfind::UnionFind;

/// Default bound on exact Steiner tree terminals (the size of a triple connector).
pub const DEFAULT_K_MAX: usize = 6;

/// All-pairs shortest paths with deterministic predecessor choice.
#[derive(Clone, Debug)]
pub struct ShortestPaths {
    dist: Vec<Vec<Option<Rational>>>,
    /// `pred[s][t]` is the last edge on the chosen `s`–`t` path.
    pred: Vec<Vec<Option<EdgeId>>>,
}

impl ShortestPaths {
    pub fn all_pairs(inst: &Instance) -> Self {
        let n = inst.vertex_count;
        let mut adj: Vec<Vec<(EdgeId, VertexId)>> = vec![Vec::new(); n];
        for (i, e) in inst.edges.iter().enumerate() {
            if e.u != e.v {
                adj[e.u].push((i, e.v));
                adj[e.v].push((i, e.u));
            }
        }
        let mut dist = Vec::with_capacity(n);
        let mut pred = Vec::with_capacity(n);
        for s in 0..n {
            let (d, p) = dijkstra(inst, &adj, s);
            dist.push(d);
            pred.push(p);
        }
        ShortestPaths { dist, pred }
    }

    pub fn distance(&self, s: VertexId, t: VertexId) -> Option<&Rational> {
        self.dist[s][t].as_ref()
    }

    /// Edge ids from `s` to `t` in path order; `None` if unreachable.
    pub fn path(&self, inst: &Instance, s: VertexId, t: VertexId) -> Option<Vec<EdgeId>> {
        self.dist[s][t].as_ref()?;
        let mut out = Vec::new();
        let mut cur = t;
        while cur != s {
            let e = self.pred[s][cur].expect("reachable vertex has a predecessor");
            out.push(e);
            cur = inst.edges[e].other(cur);
        }
        out.reverse();
        Some(out)
    }
}

fn dijkstra(
    inst: &Instance,
    adj: &[Vec<(EdgeId, VertexId)>],
    s: VertexId,
) -> (Vec<Option<Rational>>, Vec<Option<EdgeId>>) {
    let n = inst.vertex_count;
    let mut dist: Vec<Option<Rational>> = vec![None; n];
    let mut pred = vec![None; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[s] = Some(Rational::zero());
    heap.push(Reverse((Rational::zero(), s)));
    while let Some(Reverse((d, u))) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        for &(e, v) in &adj[u] {
            if done[v] {
                continue;
            }
            let nd = &d + &inst.edges[e].cost;
            let better = match &dist[v] {
                None => true,
                Some(old) => nd < *old,
            };
            if better {
                dist[v] = Some(nd.clone());
                pred[v] = Some(e);
                heap.push(Reverse((nd, v)));
            }
        }
    }
    (dist, pred)
}

/// Shortest `s`–`t` distance and path; `None` when `t` is unreachable.
pub fn shortest_path(inst: &Instance, s: VertexId, t: VertexId) -> Option<(Rational, Vec<EdgeId>)> {
    let sp = ShortestPaths::all_pairs(inst);
    let d = sp.distance(s, t)?.clone();
    Some((d, sp.path(inst, s, t)?))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SteinerTree {
    pub terminals: Vec<VertexId>,
    pub cost: Rational,
    pub edges: BTreeSet<EdgeId>,
}

trait Weight: Clone + Ord {
    fn plus(&self, other: &Self) -> Self;
}

impl Weight for i64 {
    fn plus(&self, other: &Self) -> Self {
        self + other
    }
}

impl Weight for Rational {
    fn plus(&self, other: &Self) -> Self {
        self + other
    }
}

#[derive(Clone, Copy, Debug)]
enum Back {
    None,
    Split(u32),
    From(u32),
}

/// Dreyfus–Wagner table over a fixed terminal list.
struct DwTable<W> {
    n: usize,
    terminals: Vec<VertexId>,
    /// `dp[mask * n + v]`: cheapest tree on `mask ∪ {v}`.
    dp: Vec<Option<W>>,
    dp_back: Vec<Back>,
    /// `merged[mask * n + v]`: cheapest tree on `mask ∪ {v}` with `v` as a branch point.
    merged: Vec<Option<W>>,
    merged_back: Vec<Back>,
}

fn add_opt<W: Weight>(a: &Option<W>, b: &Option<W>) -> Option<W> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.plus(y)),
        _ => None,
    }
}

fn better<W: Weight>(cand: &Option<W>, cur: &Option<W>) -> bool {
    match (cand, cur) {
        (Some(_), None) => true,
        (Some(c), Some(o)) => c < o,
        _ => false,
    }
}

impl<W: Weight> DwTable<W> {
    fn build(dist: &[Vec<Option<W>>], zero: W, terminals: &[VertexId]) -> Self {
        let n = dist.len();
        let t = terminals.len();
        let masks = 1usize << t;
        let mut dp: Vec<Option<W>> = vec![None; masks * n];
        let mut dp_back = vec![Back::None; masks * n];
        let mut merged: Vec<Option<W>> = vec![None; masks * n];
        let mut merged_back = vec![Back::None; masks * n];
        for mask in 1..masks {
            if mask.count_ones() == 1 {
                let term = terminals[mask.trailing_zeros() as usize];
                merged[mask * n + term] = Some(zero.clone());
            } else {
                let low = mask & mask.wrapping_neg();
                let rest = mask ^ low;
                // submasks s of mask containing `low`, s != mask
                let mut sub = rest;
                loop {
                    let s = sub | low;
                    if s != mask {
                        let other = mask ^ s;
                        for v in 0..n {
                            let cand = add_opt(&dp[s * n + v], &dp[other * n + v]);
                            if better(&cand, &merged[mask * n + v]) {
                                merged[mask * n + v] = cand;
                                merged_back[mask * n + v] = Back::Split(s as u32);
                            }
                        }
                    }
                    if sub == 0 {
                        break;
                    }
                    sub = (sub - 1) & rest;
                }
            }
            for v in 0..n {
                let mut best: Option<W> = None;
                let mut arg = Back::None;
                for u in 0..n {
                    let cand = add_opt(&merged[mask * n + u], &dist[u][v]);
                    if better(&cand, &best) {
                        best = cand;
                        arg = Back::From(u as u32);
                    }
                }
                dp[mask * n + v] = best;
                dp_back[mask * n + v] = arg;
            }
        }
        DwTable {
            n,
            terminals: terminals.to_vec(),
            dp,
            dp_back,
            merged,
            merged_back,
        }
    }

    /// Cost of the cheapest tree spanning the terminals in `mask`.
    fn cost(&self, mask: usize) -> Option<&W> {
        if mask == 0 {
            return None;
        }
        let root = self.terminals[mask.trailing_zeros() as usize];
        self.dp[mask * self.n + root].as_ref()
    }

    fn collect(&self, mask: usize, sp: &ShortestPaths, inst: &Instance, out: &mut BTreeSet<EdgeId>) {
        let root = self.terminals[mask.trailing_zeros() as usize];
        self.collect_dp(mask, root, sp, inst, out);
    }

    fn collect_dp(
        &self,
        mask: usize,
        v: usize,
        sp: &ShortestPaths,
        inst: &Instance,
        out: &mut BTreeSet<EdgeId>,
    ) {
        let Back::From(u) = self.dp_back[mask * self.n + v] else {
            unreachable!("dp entry without predecessor")
        };
        let u = u as usize;
        out.extend(sp.path(inst, u, v).expect("finite entry has a path"));
        if let Back::Split(s) = self.merged_back[mask * self.n + u] {
            let s = s as usize;
            self.collect_dp(s, u, sp, inst, out);
            self.collect_dp(mask ^ s, u, sp, inst, out);
        }
        debug_assert!(self.merged[mask * self.n + u].is_some());
    }
}

/// Shortest-path metric, scaled to integers when the costs allow it.
enum Metric {
    Scaled { dist: Vec<Vec<Option<i64>>>, scale: BigInt },
    Exact,
}

enum Table {
    Scaled(DwTable<i64>, BigInt),
    Exact(DwTable<Rational>),
}

impl Table {
    fn cost(&self, mask: usize) -> Option<Rational> {
        match self {
            Table::Scaled(t, scale) => t
                .cost(mask)
                .map(|&c| Rational::from(num_rational::BigRational::new(BigInt::from(c), scale.clone()))),
            Table::Exact(t) => t.cost(mask).cloned(),
        }
    }

    fn collect(&self, mask: usize, sp: &ShortestPaths, inst: &Instance, out: &mut BTreeSet<EdgeId>) {
        match self {
            Table::Scaled(t, _) => t.collect(mask, sp, inst, out),
            Table::Exact(t) => t.collect(mask, sp, inst, out),
        }
    }
}

/// Exact Steiner trees on small terminal sets of one instance.
pub struct SteinerSolver<'a> {
    inst: &'a Instance,
    sp: ShortestPaths,
    metric: Metric,
    k_max: usize,
}

fn lcm(a: &BigInt, b: &BigInt) -> BigInt {
    use num_integer::Integer;
    a.lcm(b)
}

impl<'a> SteinerSolver<'a> {
    pub fn new(inst: &'a Instance) -> Self {
        Self::with_k_max(inst, DEFAULT_K_MAX)
    }

    pub fn with_k_max(inst: &'a Instance, k_max: usize) -> Self {
        let sp = ShortestPaths::all_pairs(inst);
        let metric = scaled_metric(inst, &sp);
        SteinerSolver {
            inst,
            sp,
            metric,
            k_max,
        }
    }

    pub fn instance(&self) -> &'a Instance {
        self.inst
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn paths(&self) -> &ShortestPaths {
        &self.sp
    }

    /// Cheapest tree connecting `terminals` (duplicates ignored).
    pub fn tree(&self, terminals: &[VertexId]) -> Result<SteinerTree> {
        let terms: Vec<VertexId> = terminals.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
        if terms.len() > self.k_max {
            return Err(Error::TooManyTerminals {
                got: terms.len(),
                limit: self.k_max,
            });
        }
        self.tree_unbounded(&terms)
    }

    pub(crate) fn tree_unbounded(&self, terms: &[VertexId]) -> Result<SteinerTree> {
        if terms.len() <= 1 {
            return Ok(SteinerTree {
                terminals: terms.to_vec(),
                cost: Rational::zero(),
                edges: BTreeSet::new(),
            });
        }
        let table = self.table(terms);
        let full = (1usize << terms.len()) - 1;
        let Some(cost) = table.cost(full) else {
            return Err(Error::NoTree(terms.to_vec()));
        };
        let mut raw = BTreeSet::new();
        table.collect(full, &self.sp, self.inst, &mut raw);
        let edges = prune_to_tree(self.inst, &raw, terms);
        debug_assert_eq!(self.inst.edge_cost_sum(&edges), cost);
        Ok(SteinerTree {
            terminals: terms.to_vec(),
            cost,
            edges,
        })
    }

    fn table(&self, terms: &[VertexId]) -> Table {
        match &self.metric {
            Metric::Scaled { dist, scale } => {
                Table::Scaled(DwTable::build(dist, 0i64, terms), scale.clone())
            }
            Metric::Exact => {
                let n = self.inst.vertex_count;
                let dist: Vec<Vec<Option<Rational>>> = (0..n)
                    .map(|u| (0..n).map(|v| self.sp.distance(u, v).cloned()).collect())
                    .collect();
                Table::Exact(DwTable::build(&dist, Rational::zero(), terms))
            }
        }
    }

    /// Costs of the cheapest tree for every subset of `terminals`, indexed by bitmask.
    pub(crate) fn all_subset_costs(&self, terminals: &[VertexId]) -> Vec<Option<Rational>> {
        let table = self.table(terminals);
        let masks = 1usize << terminals.len();
        (0..masks)
            .map(|m| {
                if m.count_ones() <= 1 {
                    Some(Rational::zero())
                } else {
                    table.cost(m)
                }
            })
            .collect()
    }

    /// Edges of the cheapest tree on the terminal subset `mask`, sharing one table.
    pub(crate) fn subset_trees(
        &self,
        terminals: &[VertexId],
        masks: &[usize],
    ) -> Vec<BTreeSet<EdgeId>> {
        let table = self.table(terminals);
        masks
            .iter()
            .map(|&m| {
                let mut raw = BTreeSet::new();
                if m.count_ones() >= 2 {
                    table.collect(m, &self.sp, self.inst, &mut raw);
                }
                let terms: Vec<VertexId> = (0..terminals.len())
                    .filter(|i| m >> i & 1 == 1)
                    .map(|i| terminals[i])
                    .collect();
                prune_to_tree(self.inst, &raw, &terms)
            })
            .collect()
    }
}

fn scaled_metric(inst: &Instance, sp: &ShortestPaths) -> Metric {
    let mut scale = BigInt::one();
    let mut total = Rational::zero();
    for e in &inst.edges {
        scale = lcm(&scale, e.cost.denom());
        total += &e.cost;
    }
    // every DP entry is bounded by (|T| + 1) * total; keep a wide margin
    let bound = total * Rational::from(num_rational::BigRational::from_integer(scale.clone()))
        * Rational::from_int(64);
    if bound.numer().to_i64().is_none() {
        return Metric::Exact;
    }
    let n = inst.vertex_count;
    let dist = (0..n)
        .map(|u| {
            (0..n)
                .map(|v| {
                    sp.distance(u, v).map(|d| {
                        let scaled = d.numer() * &scale / d.denom();
                        scaled.to_i64().expect("bounded by total cost")
                    })
                })
                .collect()
        })
        .collect();
    Metric::Scaled { dist, scale }
}

/// Spanning forest of `edges` (cheapest first) with non-terminal leaves pruned.
fn prune_to_tree(inst: &Instance, edges: &BTreeSet<EdgeId>, terminals: &[VertexId]) -> BTreeSet<EdgeId> {
    let mut sorted: Vec<EdgeId> = edges.iter().copied().collect();
    sorted.sort_by(|&a, &b| inst.edges[a].cost.cmp(&inst.edges[b].cost).then(a.cmp(&b)));
    let mut uf = UnionFind::new(inst.vertex_count);
    let mut kept: BTreeSet<EdgeId> = sorted
        .into_iter()
        .filter(|&e| uf.union(inst.edges[e].u, inst.edges[e].v))
        .collect();
    let is_terminal: BTreeSet<VertexId> = terminals.iter().copied().collect();
    loop {
        let mut degree = std::collections::BTreeMap::<VertexId, Vec<EdgeId>>::new();
        for &e in &kept {
            degree.entry(inst.edges[e].u).or_default().push(e);
            degree.entry(inst.edges[e].v).or_default().push(e);
        }
        let leaves: Vec<EdgeId> = degree
            .iter()
            .filter(|(v, es)| es.len() == 1 && !is_terminal.contains(v))
            .map(|(_, es)| es[0])
            .collect();
        if leaves.is_empty() {
            return kept;
        }
        for e in leaves {
            kept.remove(&e);
        }
    }
}

/// Minimum-cost edge set connecting `terminals`, with at most `k_max` terminals.
pub fn steiner_tree_exact(
    inst: &Instance,
    terminals: &[VertexId],
    k_max: usize,
) -> Result<SolutionForest> {
    let solver = SteinerSolver::with_k_max(inst, k_max);
    let tree = solver.tree(terminals)?;
    Ok(SolutionForest::from_edges(inst, tree.edges))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn ladder_s_to_t_uses_direct_edge() {
        let (inst, names) = fixtures::ladder(3);
        let (d, path) = shortest_path(&inst, names.s, names.t).unwrap();
        assert_eq!(d, Rational::from_int(2));
        assert_eq!(path.len(), 1);
        assert_eq!(inst.edges[path[0]].cost, Rational::from_int(2));
    }

    #[test]
    fn identity_path_is_empty() {
        let (inst, names) = fixtures::ladder(3);
        assert_eq!(
            shortest_path(&inst, names.s, names.s),
            Some((Rational::zero(), vec![]))
        );
    }

    #[test]
    fn path_a1_to_a3_is_eight() {
        let (inst, v) = fixtures::long_path(100);
        let (d, path) = shortest_path(&inst, v.a[0], v.a[2]).unwrap();
        assert_eq!(d, Rational::from_int(8));
        assert_eq!(path.len(), 3);
    }

    #[test]
    fn unreachable_has_no_path() {
        let inst = Instance::from_int_edges(3, &[(0, 1, 1)], &[]);
        assert!(shortest_path(&inst, 0, 2).is_none());
        assert!(matches!(
            steiner_tree_exact(&inst, &[0, 2], 6),
            Err(Error::NoTree(_))
        ));
    }

    #[test]
    fn steiner_cases() {
        let (inst, v) = fixtures::long_path(100);
        let t = steiner_tree_exact(&inst, &[v.a[0], v.a[2]], 6).unwrap();
        assert_eq!(t.total_cost, Rational::from_int(8));
        let t = steiner_tree_exact(&inst, &[v.a[1]], 6).unwrap();
        assert_eq!(t.total_cost, Rational::zero());
        assert!(t.edge_ids.is_empty());

        let (inst, names) = fixtures::ladder(3);
        let t = steiner_tree_exact(&inst, &names.b, 6).unwrap();
        assert_eq!(t.total_cost, Rational::from_int(2));
        assert_eq!(t.edge_ids.len(), 2);
    }

    #[test]
    fn too_many_terminals_rejected() {
        let (inst, _) = fixtures::ladder(4);
        let all: Vec<usize> = (0..inst.vertex_count).collect();
        assert!(matches!(
            steiner_tree_exact(&inst, &all, 6),
            Err(Error::TooManyTerminals { got: 10, limit: 6 })
        ));
    }

    #[test]
    fn rational_fallback_agrees_with_scaled() {
        let mut inst = Instance::from_int_edges(
            5,
            &[(0, 1, 3), (1, 2, 4), (2, 3, 1), (3, 4, 2), (0, 4, 9), (1, 3, 2)],
            &[],
        );
        let scaled = SteinerSolver::new(&inst).tree(&[0, 2, 4]).unwrap();
        // a huge denominator forces the exact path
        inst.edges.push(crate::instance::Edge {
            u: 0,
            v: 2,
            cost: "1000000000000000000000/3".parse().unwrap(),
        });
        let solver = SteinerSolver::new(&inst);
        assert!(matches!(solver.metric, Metric::Exact));
        let exact = solver.tree(&[0, 2, 4]).unwrap();
        assert_eq!(scaled.cost, exact.cost);
        assert_eq!(exact.cost, Rational::from_int(8));
    }
}
