//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line to
//! stderr (uncaptured), and the test fails if any criterion fails.

use std::io::Write;
use std::process::Command;
use std::time::{Duration, Instant};

use sforest_core::autarkic::{enumerate_tuples, laminar_order, max_profit_collection, TupleConfig, TupleKind};
use sforest_core::fixtures;
use sforest_core::gain::{build_f2, gain_of, CandidateSet, ContractionPlan, GainEvaluator};
use sforest_core::moat::actively_connected_classes;
use sforest_core::oracle::{brute_force_max_profit, exact_steiner_forest, verify_ledgers, OracleLimits};
use sforest_core::paths::SteinerSolver;
use sforest_core::pipeline::{solve, solve_full, PipelineParams};
use sforest_core::{generate_random, run_extended_moat, Error, GenParams, Instance, Rational};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn report(n: usize, title: &str, outcome: &Outcome, elapsed: Duration) -> bool {
    let (tag, detail) = match outcome {
        Ok(d) => ("PASS", d),
        Err(d) => ("FAIL", d),
    };
    let line = format!(
        "criterion {n} [{tag}] {title}: {detail} ({:.3} s)\n",
        elapsed.as_secs_f64()
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    outcome.is_ok()
}

fn random_instance(i: u64, max_n: usize, max_demands: usize) -> Instance {
    let n = 4 + (i as usize * 7) % (max_n - 3);
    let demand_count = 1 + (i as usize * 3) % max_demands;
    let density = [0.25, 0.35, 0.5][(i % 3) as usize];
    generate_random(
        &GenParams {
            n,
            density,
            demand_count: demand_count.min(n * (n - 1) / 2),
            max_cost: 12,
            metric: i.is_multiple_of(5),
        },
        1000 + i,
    )
    .expect("valid generator parameters")
}

fn sweep_epsilon(i: u64) -> Rational {
    [Rational::zero(), Rational::new(1, 10), Rational::new(83, 10000)][(i % 3) as usize].clone()
}

fn ladder() -> Outcome {
    let eps = Rational::new(83, 10000);
    let (inst, _) = fixtures::ladder(10);
    let tr = run_extended_moat(&inst, &eps);
    let half = Rational::new(1, 2);
    for s in tr.supp() {
        if s.vertices.len() == 1 {
            ensure!(s.y == half, "singleton {:?} has y = {}", s.vertices, s.y);
        }
    }
    let whole = tr
        .supp()
        .find(|s| s.vertices.len() == inst.vertex_count)
        .ok_or("no support set spans all vertices")?;
    ensure!(whole.y == &eps * &Rational::from_int(11), "whole set has y = {}", whole.y);
    let report = solve(&inst, &PipelineParams::default()).map_err(|e| e.to_string())?;
    ensure!(report.f1.cost == Rational::from_int(21), "F1 = {}", report.f1.cost);
    let exact = exact_steiner_forest(&inst, &OracleLimits::default()).map_err(|e| e.to_string())?;
    ensure!(exact.total_cost == Rational::from_int(12), "exact = {}", exact.total_cost);
    ensure!(report.best_cost <= Rational::from_int(14), "best = {}", report.best_cost);
    Ok(format!(
        "F1 = {}, exact = {}, best = {} via {:?}, whole-set y = {}",
        report.f1.cost, exact.total_cost, report.best_cost, report.best, whole.y
    ))
}

fn path_fixture() -> Outcome {
    let (inst, v) = fixtures::long_path(100);
    let tr = run_extended_moat(&inst, &Rational::new(1, 10));
    let six_fifths = Rational::new(6, 5);
    ensure!(tr.deactivation[v.a[1]] == six_fifths, "deac(a2) = {}", tr.deactivation[v.a[1]]);
    ensure!(tr.deactivation[v.b[1]] == six_fifths, "deac(b2) = {}", tr.deactivation[v.b[1]]);
    let mut bad = vec![v.a[0], v.a[1], v.b[1], v.a[2]];
    bad.sort_unstable();
    let two = Rational::from_int(2);
    let shared = tr
        .support
        .iter()
        .any(|s| s.birth <= two && bad.iter().all(|&x| s.contains(x)));
    ensure!(shared, "no component holds {{a1, a2, b2, a3}} at t = 2");
    let classes = actively_connected_classes(&tr);
    let spanned: std::collections::BTreeSet<usize> = bad.iter().map(|&x| classes.class_of[x]).collect();
    ensure!(spanned.len() >= 2, "set lies in one class");
    ensure!(
        matches!(gain_of(&tr, &[bad.clone()]), Err(Error::NotActivelyConnected(_))),
        "gain_of accepted the set"
    );
    for i in 0..3 {
        let mut pair = vec![v.a[i], v.b[i]];
        pair.sort_unstable();
        gain_of(&tr, &[pair]).map_err(|e| format!("pair {i} rejected: {e}"))?;
    }
    Ok(format!(
        "deac(a2) = deac(b2) = 6/5, set spans {} classes and is rejected, all 3 demand pairs accepted",
        spanned.len()
    ))
}

fn ledger_sweep() -> Outcome {
    let mut sets = 0;
    for i in 0..200 {
        let inst = random_instance(i, 14, 5);
        let tr = run_extended_moat(&inst, &sweep_epsilon(i));
        let found = verify_ledgers(&inst, &tr);
        ensure!(found.is_empty(), "instance {i}: {:?}", found);
        sets += tr.support.len();
    }
    Ok(format!("200 traces, {sets} support sets, no violations"))
}

fn forest_bound() -> Outcome {
    let two = Rational::from_int(2);
    let mut tight = 0;
    for i in 0..200 {
        let inst = random_instance(i, 14, 5);
        let params = PipelineParams {
            epsilon: sweep_epsilon(i),
            ..PipelineParams::default()
        };
        let sol = solve_full(&inst, &params).map_err(|e| format!("instance {i}: {e}"))?;
        let y = sol.trace.y_total();
        ensure!(sol.forests[0].total_cost <= &two * &y, "instance {i}: c(F1) > 2y");
        if sol.forests[0].total_cost == &two * &y {
            tight += 1;
        }
        for (k, f) in sol.forests.iter().enumerate() {
            ensure!(f.is_feasible(), "instance {i}: F{} infeasible", k + 1);
        }
    }
    Ok(format!("200 instances, c(F1) <= 2y everywhere ({tight} with equality), all forests feasible"))
}

fn submodularity() -> Outcome {
    let mut checked = 0;
    let mut strict = 0;
    let mut inst_id = 0u64;
    let mut instances = 0;
    while instances < 20 {
        inst_id += 1;
        let inst = random_instance(inst_id, 12, 5);
        let tr = run_extended_moat(&inst, &sweep_epsilon(inst_id));
        let classes = actively_connected_classes(&tr);
        let pool: Vec<Vec<usize>> = classes
            .classes
            .iter()
            .filter(|c| c.len() >= 2)
            .flat_map(|c| {
                let mut out = Vec::new();
                for i in 0..c.len() {
                    for j in i + 1..c.len() {
                        out.push(vec![c[i], c[j]]);
                        if j + 1 < c.len() {
                            out.push(vec![c[i], c[j], c[j + 1]]);
                        }
                    }
                }
                out
            })
            .collect();
        if pool.len() < 4 {
            continue;
        }
        instances += 1;
        let eval = GainEvaluator::new(&tr);
        let g = |c: &[Vec<usize>]| eval.gain_of(c).expect("actively connected");
        for t in 0..25usize {
            let pick = |k: usize| pool[(t * 31 + k * 17 + inst_id as usize) % pool.len()].clone();
            let small: Vec<Vec<usize>> = (0..t % 3).map(pick).collect();
            let mut big = small.clone();
            big.extend((3..3 + 1 + t % 3).map(pick));
            let s = pick(9);
            let with = |base: &[Vec<usize>]| {
                let mut v = base.to_vec();
                v.push(s.clone());
                v
            };
            let lhs = g(&with(&small)) - g(&small);
            let rhs = g(&with(&big)) - g(&big);
            ensure!(lhs >= rhs, "instance {inst_id}: marginal {lhs} < {rhs}");
            if lhs > rhs {
                strict += 1;
            }
            checked += 1;
        }
    }
    ensure!(checked == 500, "only {checked} triples checked");
    Ok(format!("500 triples over 20 instances, {strict} strict"))
}

fn contraction_ledger() -> Outcome {
    let two = Rational::from_int(2);
    let mut plans = 0;
    let mut id = 0u64;
    let mut nonempty = 0;
    while plans < 50 {
        id += 1;
        let inst = random_instance(id, 12, 5);
        let tr = run_extended_moat(&inst, &sweep_epsilon(id));
        let solver = SteinerSolver::new(&inst);
        let sets = sforest_core::oracle::sample_plan(&tr, id);
        let mut selected = Vec::new();
        for s in &sets {
            let t = solver.tree(s).map_err(|e| e.to_string())?;
            selected.push(CandidateSet {
                vertices: s.clone(),
                steiner_cost: t.cost,
                steiner_tree: t.edges,
                class_witness: 0,
            });
        }
        let gain = gain_of(&tr, &sets).map_err(|e| e.to_string())?;
        let cost: Rational = selected.iter().map(|c| &c.steiner_cost).sum();
        let plan = ContractionPlan {
            selected,
            gain_value: gain.clone(),
            cost_value: cost.clone(),
        };
        let f2 = build_f2(&inst, &tr, &plan);
        let y = tr.y_total();
        ensure!(
            &two * &f2.contracted_trace.y_total() == &two * &y - &gain,
            "instance {id}: contracted dual {} vs {}",
            f2.contracted_trace.y_total(),
            &y - &(&gain / &two)
        );
        ensure!(
            f2.forest.total_cost <= &two * &y - &gain + &cost,
            "instance {id}: c(F2) = {} above bound",
            f2.forest.total_cost
        );
        ensure!(f2.forest.is_feasible(), "instance {id}: F2 infeasible");
        if !sets.is_empty() {
            nonempty += 1;
        }
        plans += 1;
    }
    Ok(format!("50 plans ({nonempty} nonempty), dual identity and cost bound exact"))
}

fn dp_vs_brute_force() -> Outcome {
    let limits = OracleLimits::default();
    let mut traces = 0;
    let mut id = 0u64;
    let (mut pairs, mut triples, mut pair_checks) = (0, 0, 0);
    while traces < 100 {
        id += 1;
        ensure!(id < 5000, "ran out of instances after {traces} traces");
        let inst = random_instance(id, 10, 6);
        let tr = run_extended_moat(&inst, &sweep_epsilon(id));
        let solver = SteinerSolver::new(&inst);
        let tuples = enumerate_tuples(&inst, &tr, &solver, &TupleConfig::default()).tuples;
        if tuples.is_empty() || tuples.len() > 12 {
            continue;
        }
        traces += 1;
        for (i, p) in tuples.iter().enumerate() {
            for q in &tuples[i + 1..] {
                laminar_order(&tr, p, q).map_err(|e| format!("instance {id}: {e}"))?;
                pair_checks += 1;
            }
        }
        let dp = max_profit_collection(&tr, &tuples).map_err(|e| e.to_string())?;
        let brute = brute_force_max_profit(&tuples, &limits).map_err(|e| e.to_string())?;
        ensure!(
            dp.total_profit == brute.total_profit,
            "instance {id}: DP {} vs brute force {}",
            dp.total_profit,
            brute.total_profit
        );
        pairs += tuples.iter().filter(|t| t.kind == TupleKind::Pair).count();
        triples += tuples.iter().filter(|t| t.kind == TupleKind::Triple).count();
    }
    Ok(format!(
        "100 traces ({pairs} pairs, {triples} triples), profits equal, {pair_checks} tuple pairs laminar"
    ))
}

fn oracle_dominance() -> Outcome {
    let limits = OracleLimits::default();
    let mut ratios: Vec<Rational> = Vec::new();
    let mut id = 0u64;
    while ratios.len() < 50 {
        id += 1;
        let inst = random_instance(id, 12, 5);
        if inst.terminals().len() > 10 {
            continue;
        }
        let eps = sweep_epsilon(id);
        let params = PipelineParams {
            epsilon: eps.clone(),
            ..PipelineParams::default()
        };
        let report = solve(&inst, &params).map_err(|e| e.to_string())?;
        let exact = exact_steiner_forest(&inst, &limits).map_err(|e| e.to_string())?;
        ensure!(exact.total_cost <= report.best_cost, "instance {id}: exact above best");
        let ratio = if exact.total_cost.is_zero() {
            Rational::one()
        } else {
            &report.best_cost / &exact.total_cost
        };
        let cap = Rational::from_int(2) * (Rational::one() + &eps);
        ensure!(ratio <= cap, "instance {id}: ratio {ratio} above {cap}");
        ratios.push(ratio);
    }
    ratios.sort();
    let mean = ratios.iter().map(Rational::to_f64).sum::<f64>() / ratios.len() as f64;
    let optimal = ratios.iter().filter(|r| **r == Rational::one()).count();
    Ok(format!(
        "50 instances, ratio min {:.4} median {:.4} mean {:.4} max {:.4}, {optimal} optimal",
        ratios[0].to_f64(),
        ratios[ratios.len() / 2].to_f64(),
        mean,
        ratios[ratios.len() - 1].to_f64()
    ))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (ladder, _) = fixtures::ladder(10);
    let (path, _) = fixtures::long_path(100);
    std::fs::write(dir.path().join("ladder.stpf"), ladder.to_stpf()).map_err(|e| e.to_string())?;
    std::fs::write(dir.path().join("path.stpf"), path.to_stpf()).map_err(|e| e.to_string())?;
    for i in 0..6 {
        let inst = random_instance(i, 10, 4);
        std::fs::write(dir.path().join(format!("r{i}.stpf")), inst.to_stpf()).map_err(|e| e.to_string())?;
    }
    let bin = env!("CARGO_BIN_EXE_sforest");
    let run = |args: &[&str]| -> Result<Vec<u8>, String> {
        let out = Command::new(bin).args(args).output().map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr)));
        }
        Ok(out.stdout)
    };
    let file = dir.path().join("ladder.stpf");
    let file = file.to_str().ok_or("path")?;
    let d = dir.path().to_str().ok_or("path")?;
    let solve_a = run(&["solve", file])?;
    let solve_b = run(&["solve", file])?;
    ensure!(solve_a == solve_b, "solve output differs between runs");
    let bench_a = run(&["bench", d, "--seed", "1"])?;
    let bench_b = run(&["bench", d, "--seed", "1"])?;
    ensure!(bench_a == bench_b, "bench output differs between runs");
    ensure!(bench_a.len() > 100, "bench output suspiciously short");
    Ok(format!(
        "solve ({} bytes) and bench ({} bytes, 8 instances) identical across runs",
        solve_a.len(),
        bench_a.len()
    ))
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 9] = [
        ("ladder fixture", ladder),
        ("path fixture and active connectivity", path_fixture),
        ("dual ledger sweep", ledger_sweep),
        ("forest cost bound", forest_bound),
        ("gain submodularity", submodularity),
        ("contracted dual ledger", contraction_ledger),
        ("laminar DP against brute force", dp_vs_brute_force),
        ("oracle dominance", oracle_dominance),
        ("determinism", determinism),
    ];
    let limits = [1.0, 1.0, 30.0, f64::INFINITY, f64::INFINITY, f64::INFINITY, f64::INFINITY, f64::INFINITY, f64::INFINITY];
    let mut failed = Vec::new();
    for (i, (title, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let mut outcome = f();
        let elapsed = start.elapsed();
        if outcome.is_ok() && elapsed.as_secs_f64() >= limits[i] {
            outcome = Err(format!("took longer than {} s", limits[i]));
        }
        if !report(i + 1, title, &outcome, elapsed) {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
