//! Vertex contraction and lifting forests back to the original instance.

use crate::instance::{Demand, Edge, EdgeId, Instance, VertexId};
use crate::unionfind::UnionFind;

pub(crate) struct Contraction {
    pub inst: Instance,
    /// Original vertex → contracted vertex.
    pub vertex_map: Vec<VertexId>,
    /// Contracted edge → original edge.
    pub edge_map: Vec<EdgeId>,
    /// Members of each contracted vertex, sorted.
    pub members: Vec<Vec<VertexId>>,
}

impl Contraction {
    /// Contracts each group to a single vertex; overlapping groups merge.
    /// Contracted vertices are numbered by their smallest original member.
    /// Edges that become loops and demands that become trivial are dropped.
    pub fn new(inst: &Instance, groups: &[Vec<VertexId>]) -> Self {
        let mut uf = UnionFind::new(inst.vertex_count);
        for g in groups {
            for w in g.windows(2) {
                uf.union(w[0], w[1]);
            }
        }
        let members = uf.groups();
        let mut vertex_map = vec![0; inst.vertex_count];
        for (i, m) in members.iter().enumerate() {
            for &v in m {
                vertex_map[v] = i;
            }
        }
        let mut edges = Vec::new();
        let mut edge_map = Vec::new();
        for (i, e) in inst.edges.iter().enumerate() {
            let (u, v) = (vertex_map[e.u], vertex_map[e.v]);
            if u != v {
                edges.push(Edge {
                    u,
                    v,
                    cost: e.cost.clone(),
                });
                edge_map.push(i);
            }
        }
        let demands = inst
            .demands
            .iter()
            .map(|d| Demand::new(vertex_map[d.a], vertex_map[d.b]))
            .filter(|d| d.a != d.b)
            .collect();
        Contraction {
            inst: Instance::new(members.len(), edges, demands),
            vertex_map,
            edge_map,
            members,
        }
    }

    pub fn lift<'a, I: IntoIterator<Item = &'a EdgeId>>(&self, edges: I) -> Vec<EdgeId> {
        edges.into_iter().map(|&e| self.edge_map[e]).collect()
    }

    /// Per contracted vertex, the largest value of `f` over its members.
    pub fn max_over_members<T: Ord + Clone>(&self, f: &[T]) -> Vec<T> {
        self.members
            .iter()
            .map(|m| m.iter().map(|&v| &f[v]).max().expect("nonempty").clone())
            .collect()
    }
}
