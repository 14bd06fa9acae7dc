//! The two worked instances used throughout the tests and the CLI: the
//! matching ladder (`ladder`) and the active-connectivity counterexample (`long_path`).

use crate::instance::{Demand, Edge, Instance, SolutionForest, VertexId};
use crate::rational::Rational;

#[derive(Clone, Debug)]
pub struct LadderNames {
    pub s: VertexId,
    pub t: VertexId,
    pub a: Vec<VertexId>,
    pub b: Vec<VertexId>,
}

/// Ladder with `k` rungs: unit edges `a_i–b_i`, a unit path
/// `s–b_1–…–b_k–t`, and a direct `s–t` edge of cost 2. Demands are `{s,t}`
/// followed by each `{a_i,b_i}`.
pub fn ladder(k: usize) -> (Instance, LadderNames) {
    assert!(k >= 1);
    let s = 0;
    let a: Vec<VertexId> = (1..=k).collect();
    let b: Vec<VertexId> = (k + 1..=2 * k).collect();
    let t = 2 * k + 1;
    let one = Rational::one();
    let mut edges = Vec::new();
    for i in 0..k {
        edges.push(Edge { u: a[i], v: b[i], cost: one.clone() });
    }
    edges.push(Edge { u: s, v: b[0], cost: one.clone() });
    for i in 0..k - 1 {
        edges.push(Edge { u: b[i], v: b[i + 1], cost: one.clone() });
    }
    edges.push(Edge { u: b[k - 1], v: t, cost: one.clone() });
    edges.push(Edge { u: s, v: t, cost: Rational::from_int(2) });
    let mut demands = vec![Demand::new(s, t)];
    demands.extend((0..k).map(|i| Demand::new(a[i], b[i])));
    (Instance::new(2 * k + 2, edges, demands), LadderNames { s, t, a, b })
}

/// Optimal ladder solution: the rungs plus the direct `s–t` edge.
pub fn ladder_opt(inst: &Instance, names: &LadderNames) -> SolutionForest {
    let k = names.a.len();
    let mut edges: Vec<usize> = (0..k).collect();
    edges.push(inst.edges.len() - 1);
    SolutionForest::from_edges(inst, edges)
}

#[derive(Clone, Debug)]
pub struct PathNames {
    pub a: [VertexId; 3],
    pub b: [VertexId; 3],
}

/// Path `a_1 –3– a_2 –2– b_2 –3– a_3 –M– b_1 –1– b_3` with demands
/// `{a_1,b_1}, {a_2,b_2}, {a_3,b_3}`.
pub fn long_path(m: i64) -> (Instance, PathNames) {
    let (a1, a2, b2, a3, b1, b3) = (0, 1, 2, 3, 4, 5);
    let inst = Instance::from_int_edges(
        6,
        &[(a1, a2, 3), (a2, b2, 2), (b2, a3, 3), (a3, b1, m), (b1, b3, 1)],
        &[(a1, b1), (a2, b2), (a3, b3)],
    );
    (inst, PathNames { a: [a1, a2, a3], b: [b1, b2, b3] })
}

/// One edge of cost `c` joining the only demand pair.
pub fn single_edge(c: i64) -> Instance {
    Instance::from_int_edges(2, &[(0, 1, c)], &[(0, 1)])
}
