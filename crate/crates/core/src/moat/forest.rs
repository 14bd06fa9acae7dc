//! Primal side of a moat run: the tight forest pruned by reverse delete, and
//! the excess / Λ diagnostics of a solution against the duals.

use crate::error::{Error, Result};
use crate::instance::{EdgeId, Instance, SolutionForest};
use crate::rational::Rational;
use crate::unionfind::UnionFind;

use super::MoatTrace;

fn demands_connected(inst: &Instance, edges: &[EdgeId], skip: usize) -> bool {
    let mut uf = UnionFind::new(inst.vertex_count);
    for (i, &e) in edges.iter().enumerate() {
        if i != skip {
            uf.union(inst.edges[e].u, inst.edges[e].v);
        }
    }
    inst.demands.iter().all(|d| uf.same(d.a, d.b))
}

/// Tight forest of `trace` with redundant edges removed by reverse delete.
///
/// Edges are scanned by decreasing tightening time, ties by decreasing edge id;
/// an edge is dropped when every demand stays connected without it.
pub fn extract_forest(inst: &Instance, trace: &MoatTrace) -> SolutionForest {
    let mut order: Vec<(Rational, EdgeId)> = trace
        .tight_edges
        .iter()
        .map(|t| (t.time.clone(), t.edge))
        .collect();
    order.sort();
    let mut kept: Vec<EdgeId> = order.into_iter().map(|(_, e)| e).collect();
    let mut i = kept.len();
    while i > 0 {
        i -= 1;
        if demands_connected(inst, &kept, i) {
            kept.remove(i);
        }
    }
    SolutionForest::from_edges(inst, kept)
}

/// `c(F) − y(U_sep)`; rejects infeasible forests.
pub fn excess(forest: &SolutionForest, trace: &MoatTrace) -> Result<Rational> {
    if let Some(i) = forest.satisfied.iter().position(|&s| !s) {
        return Err(Error::InfeasibleForest(i));
    }
    Ok(&forest.total_cost - &trace.summary().y_sep_total)
}

/// `Λ = ∑ y_U` over support sets whose cut contains at least two forest edges.
pub fn lambda_diagnostic(inst: &Instance, forest: &SolutionForest, trace: &MoatTrace) -> Rational {
    trace
        .supp()
        .filter(|s| {
            forest
                .edge_ids
                .iter()
                .filter(|&&e| s.contains(inst.edges[e].u) != s.contains(inst.edges[e].v))
                .count()
                >= 2
        })
        .map(|s| s.y.clone())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::moat::run_extended_moat;

    #[test]
    fn ladder_gw_forest_costs_2k_plus_1() {
        for k in [3, 10] {
            let (inst, _) = fixtures::ladder(k);
            let tr = run_extended_moat(&inst, &Rational::new(1, 100));
            let f = extract_forest(&inst, &tr);
            assert!(f.is_feasible());
            assert_eq!(f.total_cost, Rational::from_int(2 * k as i64 + 1));
        }
    }

    #[test]
    fn no_demands_gives_empty_forest() {
        let inst = Instance::from_int_edges(3, &[(0, 1, 1), (1, 2, 1)], &[]);
        let tr = run_extended_moat(&inst, &Rational::new(1, 10));
        let f = extract_forest(&inst, &tr);
        assert!(f.edge_ids.is_empty());
        assert!(f.total_cost.is_zero());
    }

    #[test]
    fn path_forest_crosses_the_expensive_edge() {
        let (inst, v) = fixtures::long_path(100);
        let tr = run_extended_moat(&inst, &Rational::new(1, 10));
        let f = extract_forest(&inst, &tr);
        assert!(f.is_feasible());
        let m_edge = inst
            .edges
            .iter()
            .position(|e| (e.u, e.v) == (v.a[2], v.b[0]))
            .unwrap();
        assert!(f.edge_ids.contains(&m_edge));
        assert!(f.total_cost <= Rational::from_int(2) * tr.y_total());
    }

    #[test]
    fn excess_on_ladder() {
        let (inst, names) = fixtures::ladder(3);
        let tr = run_extended_moat(&inst, &Rational::new(1, 100));
        let opt = fixtures::ladder_opt(&inst, &names);
        assert_eq!(opt.total_cost, Rational::from_int(5));
        assert_eq!(excess(&opt, &tr).unwrap(), Rational::from_int(1));
        let gw = extract_forest(&inst, &tr);
        assert_eq!(excess(&gw, &tr).unwrap(), Rational::from_int(3));
        let empty = SolutionForest::empty(&inst);
        assert!(matches!(excess(&empty, &tr), Err(Error::InfeasibleForest(0))));
    }

    #[test]
    fn excess_zero_on_single_edge() {
        let inst = Instance::from_int_edges(2, &[(0, 1, 7)], &[(0, 1)]);
        let tr = run_extended_moat(&inst, &Rational::new(1, 10));
        let f = SolutionForest::from_edges(&inst, [0]);
        assert!(excess(&f, &tr).unwrap().is_zero());
    }

    #[test]
    fn lambda_cases() {
        let (inst, names) = fixtures::ladder(3);
        let tr = run_extended_moat(&inst, &Rational::new(1, 100));
        let opt = fixtures::ladder_opt(&inst, &names);
        assert!(lambda_diagnostic(&inst, &opt, &tr).is_zero());
        assert!(lambda_diagnostic(&inst, &SolutionForest::empty(&inst), &tr).is_zero());

        // all edges: enumerate cuts directly
        let all = SolutionForest::from_edges(&inst, 0..inst.edges.len());
        let mut want = Rational::zero();
        for s in tr.supp() {
            let crossing = inst
                .edges
                .iter()
                .filter(|e| s.vertices.contains(&e.u) != s.vertices.contains(&e.v))
                .count();
            if crossing >= 2 {
                want += &s.y;
            }
        }
        // s, b_1..b_3, t have degree >= 2; each singleton carries 1/2
        assert_eq!(want, Rational::new(5, 2));
        assert_eq!(lambda_diagnostic(&inst, &all, &tr), want);
    }
}
