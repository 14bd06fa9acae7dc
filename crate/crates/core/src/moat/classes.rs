use serde::Serialize;

use crate::instance::VertexId;
use crate::rational::Rational;
use crate::unionfind::UnionFind;

use super::MoatTrace;

/// Partition of the vertices into actively connected classes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ActiveClasses {
    /// Sorted member lists, ordered by smallest member.
    pub classes: Vec<Vec<VertexId>>,
    pub class_of: Vec<usize>,
    /// Common deactivation time of each class.
    pub deactivation: Vec<Rational>,
}

impl ActiveClasses {
    pub fn same_class(&self, vs: &[VertexId]) -> bool {
        vs.windows(2).all(|w| self.class_of[w[0]] == self.class_of[w[1]])
    }
}

/// Two vertices are actively connected when they share a component at some
/// time `t` and neither has deactivated before `t`. Sharing a component is
/// monotone in time, so it suffices to test at the instant they first meet.
pub fn actively_connected_classes(trace: &MoatTrace) -> ActiveClasses {
    let n = trace.vertex_count;
    let mut uf = UnionFind::new(n);
    for ev in &trace.merge_events {
        let set = &trace.support[ev.into];
        let mut alive = set
            .vertices
            .iter()
            .copied()
            .filter(|&v| trace.deactivation[v] >= ev.time);
        if let Some(first) = alive.next() {
            for v in alive {
                uf.union(first, v);
            }
        }
    }
    let classes = uf.groups();
    let mut class_of = vec![0; n];
    for (i, c) in classes.iter().enumerate() {
        for &v in c {
            class_of[v] = i;
        }
    }
    let deactivation = classes
        .iter()
        .map(|c| trace.deactivation[c[0]].clone())
        .collect();
    ActiveClasses {
        classes,
        class_of,
        deactivation,
    }
}
