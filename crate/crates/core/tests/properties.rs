use proptest::prelude::*;

use sforest_core::autarkic::{
    build_f3, enumerate_tuples, laminar_order, max_profit_collection, AutarkicCollection,
    TupleConfig,
};
use sforest_core::gain::{
    build_f2, enumerate_restricted_sets, maximize_profit, GainEvaluator, GreedyConfig,
    DEFAULT_CANDIDATE_CAP,
};
use sforest_core::moat::{actively_connected_classes, extract_forest};
use sforest_core::oracle::{
    brute_force_max_profit, check_tuple, exact_steiner_forest, verify_contraction, verify_trace,
    OracleLimits,
};
use sforest_core::paths::{ShortestPaths, SteinerSolver};
use sforest_core::pipeline::{solve, solve_full, PipelineParams};
use sforest_core::{generate_random, run_extended_moat, run_timed_moat, GenParams, Instance, Rational};

fn instance(n: usize, seed: u64, demands: usize, metric: bool) -> Instance {
    let max_pairs = n * (n - 1) / 2;
    generate_random(
        &GenParams {
            n,
            density: 0.35,
            demand_count: demands.min(max_pairs),
            max_cost: 9,
            metric,
        },
        seed,
    )
    .expect("valid generator parameters")
}

fn epsilon(pick: u8) -> Rational {
    match pick % 4 {
        0 => Rational::zero(),
        1 => Rational::new(1, 10),
        2 => Rational::new(83, 10000),
        _ => Rational::new(1, 3),
    }
}

fn arb_instance(max_n: usize) -> impl Strategy<Value = Instance> {
    (3usize..=max_n, any::<u64>(), 1usize..=4, any::<bool>())
        .prop_map(|(n, seed, d, metric)| instance(n, seed, d, metric))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn serialization_round_trips(inst in arb_instance(12)) {
        let text = inst.to_stpf();
        let back = Instance::parse_stpf(&text).unwrap();
        prop_assert_eq!(&back, &inst.canonical());
        prop_assert_eq!(back.to_stpf(), text);
    }

    #[test]
    fn distances_are_a_metric(inst in arb_instance(12)) {
        let sp = ShortestPaths::all_pairs(&inst);
        let n = inst.vertex_count;
        for u in 0..n {
            prop_assert_eq!(sp.distance(u, u), Some(&Rational::zero()));
            for v in 0..n {
                prop_assert_eq!(sp.distance(u, v), sp.distance(v, u));
                for w in 0..n {
                    if let (Some(a), Some(b), Some(c)) = (sp.distance(u, w), sp.distance(u, v), sp.distance(v, w)) {
                        prop_assert!(*a <= b + c);
                    }
                }
            }
        }
    }

    #[test]
    fn steiner_trees_agree_with_paths_and_grow(inst in arb_instance(10), picks in prop::collection::vec(any::<prop::sample::Index>(), 2..5)) {
        let solver = SteinerSolver::new(&inst);
        let n = inst.vertex_count;
        let terms: Vec<usize> = picks.iter().map(|i| i.index(n)).collect();
        let (s, t) = (terms[0], terms[1]);
        if let Some(d) = solver.paths().distance(s, t) {
            prop_assert_eq!(&solver.tree(&[s, t]).unwrap().cost, d);
            let mut prev = Rational::zero();
            for k in 2..=terms.len() {
                let tree = solver.tree(&terms[..k]).unwrap();
                prop_assert!(tree.cost >= prev);
                prop_assert_eq!(inst.edge_cost_sum(&tree.edges), tree.cost.clone());
                prev = tree.cost;
            }
        }
    }

    #[test]
    fn traces_satisfy_their_ledgers(inst in arb_instance(12), e in any::<u8>()) {
        let tr = run_extended_moat(&inst, &epsilon(e));
        prop_assert_eq!(verify_trace(&inst, &tr), vec![]);
        let f1 = extract_forest(&inst, &tr);
        prop_assert!(f1.is_feasible());
        prop_assert!(f1.total_cost <= Rational::from_int(2) * tr.y_total());
    }

    #[test]
    fn timed_rerun_reproduces_duals(inst in arb_instance(12), e in any::<u8>()) {
        let tr = run_extended_moat(&inst, &epsilon(e));
        let timed = run_timed_moat(&inst, &tr.deactivation);
        let ys = |t: &sforest_core::MoatTrace| {
            let mut v: Vec<(Vec<usize>, Rational)> = t.supp().map(|s| (s.vertices.clone(), s.y.clone())).collect();
            v.sort();
            v
        };
        prop_assert_eq!(ys(&timed), ys(&tr));
    }

    #[test]
    fn contraction_keeps_loads_and_active_sets(inst in arb_instance(12), e in any::<u8>(), seed in any::<u64>()) {
        let tr = run_extended_moat(&inst, &epsilon(e));
        let plan = sforest_core::oracle::sample_plan(&tr, seed);
        prop_assert_eq!(verify_contraction(&inst, &tr, &plan), vec![]);
    }

    #[test]
    fn gain_is_monotone_and_submodular(inst in arb_instance(10), e in any::<u8>(), picks in prop::collection::vec(any::<prop::sample::Index>(), 4)) {
        let tr = run_extended_moat(&inst, &epsilon(e));
        let solver = SteinerSolver::new(&inst);
        let cands = enumerate_restricted_sets(&tr, &inst, 3, DEFAULT_CANDIDATE_CAP, &solver).unwrap();
        prop_assume!(!cands.is_empty());
        let sets: Vec<Vec<usize>> = picks.iter().map(|i| cands[i.index(cands.len())].vertices.clone()).collect();
        let eval = GainEvaluator::new(&tr);
        let g = |c: &[Vec<usize>]| eval.gain_of(c).unwrap();
        let small = &sets[..1];
        let big = &sets[..3];
        let s = &sets[3];
        let with = |base: &[Vec<usize>]| {
            let mut v = base.to_vec();
            v.push(s.clone());
            v
        };
        prop_assert!(g(big) >= g(small));
        prop_assert!(g(&with(small)) - g(small) >= g(&with(big)) - g(big));
    }

    #[test]
    fn greedy_plan_dominates_singletons(inst in arb_instance(10), e in any::<u8>()) {
        let tr = run_extended_moat(&inst, &epsilon(e));
        let solver = SteinerSolver::new(&inst);
        let eval = GainEvaluator::new(&tr);
        let cands = enumerate_restricted_sets(&tr, &inst, 2, DEFAULT_CANDIDATE_CAP, &solver).unwrap();
        let plan = maximize_profit(&cands, &eval, &solver, &GreedyConfig::default()).unwrap();
        prop_assert!(!plan.profit().is_negative());
        prop_assert_eq!(&plan.gain_value, &eval.gain_of(&plan.vertex_sets()).unwrap());
        let trees: Rational = plan.selected.iter().map(|c| &c.steiner_cost).sum();
        prop_assert_eq!(&plan.cost_value, &trees);
        for c in &cands {
            let single = eval.gain_of(std::slice::from_ref(&c.vertices)).unwrap() - &c.steiner_cost;
            prop_assert!(plan.profit() >= single);
        }
        let f2 = build_f2(&inst, &tr, &plan);
        prop_assert!(f2.forest.is_feasible());
        let two = Rational::from_int(2);
        prop_assert_eq!(&two * &f2.contracted_trace.y_total(), &two * &tr.y_total() - &plan.gain_value);
        prop_assert!(f2.forest.total_cost <= &two * &tr.y_total() - &plan.gain_value + &plan.cost_value);
    }

    #[test]
    fn tuples_are_valid_and_laminar(inst in arb_instance(10), e in any::<u8>(), d in 2usize..=6) {
        let inst = instance(inst.vertex_count.max(4), inst.edges.len() as u64, d, false);
        let tr = run_extended_moat(&inst, &epsilon(e));
        let solver = SteinerSolver::new(&inst);
        let tuples = enumerate_tuples(&inst, &tr, &solver, &TupleConfig::default()).tuples;
        for t in &tuples {
            prop_assert_eq!(check_tuple(&inst, &tr, t), Vec::<String>::new());
        }
        for (i, p) in tuples.iter().enumerate() {
            for q in &tuples[i + 1..] {
                prop_assert!(laminar_order(&tr, p, q).is_ok());
            }
        }
        let coll = max_profit_collection(&tr, &tuples).unwrap();
        prop_assert!(coll.is_crossing_free());
        let again = AutarkicCollection::new(coll.tuples.clone());
        prop_assert_eq!(&again.total_profit, &coll.total_profit);
        if tuples.len() <= 12 {
            let brute = brute_force_max_profit(&tuples, &OracleLimits::default()).unwrap();
            prop_assert_eq!(&brute.total_profit, &coll.total_profit);
        }
        let f3 = build_f3(&inst, &coll, &epsilon(e), false);
        prop_assert!(f3.forest.is_feasible());
        let bound = &f3.connector_cost + &(Rational::from_int(2) * f3.contracted_trace.y_total());
        prop_assert!(f3.forest.total_cost <= bound);
    }

    #[test]
    fn classes_share_deactivation(inst in arb_instance(12), e in any::<u8>()) {
        let tr = run_extended_moat(&inst, &epsilon(e));
        let classes = actively_connected_classes(&tr);
        for c in &classes.classes {
            prop_assert!(c.iter().all(|&v| tr.deactivation[v] == tr.deactivation[c[0]]));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn exact_never_loses(inst in arb_instance(9)) {
        let sol = solve_full(&inst, &PipelineParams::default()).unwrap();
        let opt = exact_steiner_forest(&inst, &OracleLimits::default()).unwrap();
        prop_assert!(opt.is_feasible());
        for f in &sol.forests {
            prop_assert!(f.is_feasible());
            prop_assert!(opt.total_cost <= f.total_cost);
        }
    }

    #[test]
    fn solve_is_deterministic(inst in arb_instance(10)) {
        let params = PipelineParams::default();
        let mut a = solve(&inst, &params).unwrap();
        let mut b = solve(&inst, &params).unwrap();
        a.timings = None;
        b.timings = None;
        prop_assert_eq!(a.to_json(), b.to_json());
    }
}
