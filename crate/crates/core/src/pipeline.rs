//! The full algorithm: one extended moat run, three candidate forests, and
//! the cheapest of them, with a report of everything that was selected.

use std::time::{Duration, Instant};

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::autarkic::{
    build_f3, enumerate_tuples, max_profit_collection, AutarkicCollection, TupleConfig, TupleKind,
    DEFAULT_MAX_TRIPLES,
};
use crate::error::{Error, Result};
use crate::gain::{
    build_f2, enumerate_restricted_sets, maximize_profit, ContractionPlan, GainEvaluator,
    GreedyConfig, DEFAULT_CANDIDATE_CAP, DEFAULT_K,
};
use crate::instance::{EdgeId, Instance, SolutionForest, VertexId};
use crate::moat::{excess, extract_forest, lambda_diagnostic, run_extended_moat, MoatTrace};
use crate::oracle::{exact_steiner_forest, OracleLimits};
use crate::paths::{SteinerSolver, DEFAULT_K_MAX};
use crate::rational::Rational;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PipelineParams {
    pub epsilon: Rational,
    pub alpha: Rational,
    pub gamma: Rational,
    pub k: usize,
    pub include_triples: bool,
    /// Run the residual instance of `F3` with ε = 0.
    pub classic_gw: bool,
    /// Recorded in the report; the pipeline itself draws no random numbers.
    pub seed: u64,
    pub max_guess: usize,
    pub candidate_cap: usize,
    pub max_triples: usize,
}

impl Default for PipelineParams {
    fn default() -> Self {
        PipelineParams {
            epsilon: Rational::new(83, 10000),
            alpha: Rational::new(9, 100),
            gamma: Rational::new(1, 100),
            k: DEFAULT_K,
            include_triples: true,
            classic_gw: false,
            seed: 0,
            max_guess: 1,
            candidate_cap: DEFAULT_CANDIDATE_CAP,
            max_triples: DEFAULT_MAX_TRIPLES,
        }
    }
}

impl PipelineParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if self.epsilon.is_negative() {
            return bad(format!("epsilon = {} is negative", self.epsilon));
        }
        if self.alpha.is_negative() || self.alpha > Rational::one() {
            return bad(format!("alpha = {} is outside [0, 1]", self.alpha));
        }
        if !self.gamma.is_positive() {
            return bad(format!("gamma = {} is not positive", self.gamma));
        }
        if self.k < 2 || self.k > DEFAULT_K_MAX {
            return bad(format!("k = {} is outside 2..={DEFAULT_K_MAX}", self.k));
        }
        Ok(())
    }

    /// `α + γ + δ_k`, where `δ_k` is the smallest slack that absorbs the
    /// `1 + 1/⌊log₂ k⌋` overhead of `k`-restricted trees. `None` for `k < 4`.
    pub fn implied_alpha_plus_delta(&self) -> Option<Rational> {
        let log = (usize::BITS - 1 - self.k.leading_zeros()) as i64;
        if log < 2 {
            return None;
        }
        let s = Rational::new(1, log);
        let delta_k = Rational::from_int(2) * &self.alpha * &s / (Rational::one() - &s);
        Some(&self.alpha + &self.gamma + delta_k)
    }
}

fn exact_and_approx<S: Serializer>(r: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
    let mut st = s.serialize_struct("Value", 2)?;
    st.serialize_field("exact", &r.to_fraction_string())?;
    st.serialize_field("approx", &r.approx())?;
    st.end()
}

fn maybe_exact_and_approx<S: Serializer>(
    r: &Option<Rational>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    match r {
        Some(r) => exact_and_approx(r, s),
        None => s.serialize_none(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Candidate {
    F1,
    F2,
    F3,
}

#[derive(Clone, Debug, Serialize)]
pub struct ForestSummary {
    #[serde(serialize_with = "exact_and_approx")]
    pub cost: Rational,
    pub feasible: bool,
    pub edges: Vec<EdgeId>,
}

impl ForestSummary {
    fn of(f: &SolutionForest) -> Self {
        ForestSummary {
            cost: f.total_cost.clone(),
            feasible: f.is_feasible(),
            edges: f.edge_ids.iter().copied().collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DualTotals {
    #[serde(serialize_with = "exact_and_approx")]
    pub y_sep_total: Rational,
    #[serde(serialize_with = "exact_and_approx")]
    pub y_unsep_total: Rational,
    #[serde(serialize_with = "exact_and_approx")]
    pub y_total: Rational,
}

#[derive(Clone, Debug, Serialize)]
pub struct PlanSet {
    pub vertices: Vec<VertexId>,
    #[serde(serialize_with = "exact_and_approx")]
    pub cost: Rational,
}

#[derive(Clone, Debug, Serialize)]
pub struct PlanSummary {
    pub candidates: usize,
    pub sets: Vec<PlanSet>,
    #[serde(serialize_with = "exact_and_approx")]
    pub gain: Rational,
    #[serde(serialize_with = "exact_and_approx")]
    pub cost: Rational,
    #[serde(serialize_with = "exact_and_approx")]
    pub profit: Rational,
    /// Dual total of the timed run on the contracted instance.
    #[serde(serialize_with = "exact_and_approx")]
    pub contracted_y_total: Rational,
}

#[derive(Clone, Debug, Serialize)]
pub struct TupleSummary {
    pub kind: TupleKind,
    pub members: Vec<usize>,
    pub separated: Vec<usize>,
    pub representatives: Vec<usize>,
    pub connector: Vec<EdgeId>,
    #[serde(serialize_with = "exact_and_approx")]
    pub coverage: Rational,
    #[serde(serialize_with = "exact_and_approx")]
    pub cost: Rational,
    #[serde(serialize_with = "exact_and_approx")]
    pub profit: Rational,
}

#[derive(Clone, Debug, Serialize)]
pub struct CollectionSummary {
    pub pairs_found: usize,
    pub triples_found: usize,
    pub triples_dropped: usize,
    pub tuples: Vec<TupleSummary>,
    #[serde(serialize_with = "exact_and_approx")]
    pub coverage: Rational,
    #[serde(serialize_with = "exact_and_approx")]
    pub cost: Rational,
    #[serde(serialize_with = "exact_and_approx")]
    pub profit: Rational,
    /// Dual total of the moat run on the contracted instance.
    #[serde(serialize_with = "exact_and_approx")]
    pub contracted_y_total: Rational,
    #[serde(serialize_with = "exact_and_approx")]
    pub connector_cost: Rational,
}

impl CollectionSummary {
    fn of(coll: &AutarkicCollection) -> Vec<TupleSummary> {
        coll.tuples
            .iter()
            .map(|t| TupleSummary {
                kind: t.kind,
                members: t.member_set_ids.clone(),
                separated: t.sep_union.clone(),
                representatives: t.representatives.iter().map(|r| r.demand).collect(),
                connector: t.connector.iter().copied().collect(),
                coverage: t.coverage.clone(),
                cost: t.cost.clone(),
                profit: t.profit.clone(),
            })
            .collect()
    }
}

/// Quantities measured against a reference (usually optimal) solution.
#[derive(Clone, Debug, Serialize)]
pub struct Diagnostics {
    #[serde(serialize_with = "exact_and_approx")]
    pub reference_cost: Rational,
    #[serde(serialize_with = "exact_and_approx")]
    pub excess: Rational,
    #[serde(serialize_with = "exact_and_approx")]
    pub lambda: Rational,
    /// `excess ≥ 0.0116 · c(reference)`.
    pub large_excess: bool,
    /// Autarkic profit `≥ 0.03 · c(reference)`.
    pub large_profit: bool,
    #[serde(serialize_with = "maybe_exact_and_approx")]
    pub ratio: Option<Rational>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Timings {
    pub moat_ms: f64,
    pub f1_ms: f64,
    pub f2_ms: f64,
    pub f3_ms: f64,
    pub total_ms: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ParamsEcho {
    #[serde(serialize_with = "exact_and_approx")]
    pub epsilon: Rational,
    #[serde(serialize_with = "exact_and_approx")]
    pub alpha: Rational,
    #[serde(serialize_with = "exact_and_approx")]
    pub gamma: Rational,
    pub k: usize,
    pub include_triples: bool,
    pub classic_gw: bool,
    pub seed: u64,
    #[serde(serialize_with = "maybe_exact_and_approx")]
    pub implied_alpha_plus_delta: Option<Rational>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub params: ParamsEcho,
    pub vertices: usize,
    pub edges: usize,
    pub demands: usize,
    pub duals: DualTotals,
    pub f1: ForestSummary,
    pub f2: ForestSummary,
    pub f3: ForestSummary,
    pub best: Candidate,
    #[serde(serialize_with = "exact_and_approx")]
    pub best_cost: Rational,
    pub plan: PlanSummary,
    pub autarkic: CollectionSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<Diagnostics>,
    /// Wall-clock times; excluded from serialization unless set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn best_forest(&self) -> &ForestSummary {
        match self.best {
            Candidate::F1 => &self.f1,
            Candidate::F2 => &self.f2,
            Candidate::F3 => &self.f3,
        }
    }
}

/// Everything [`solve`] computed, for callers that need more than the report.
pub struct Solution {
    pub report: Report,
    pub trace: MoatTrace,
    pub forests: [SolutionForest; 3],
    pub plan: ContractionPlan,
    pub collection: AutarkicCollection,
}

impl Solution {
    pub fn best(&self) -> &SolutionForest {
        &self.forests[self.report.best as usize]
    }
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1000.0
}

/// Runs the whole pipeline and returns the report.
pub fn solve(inst: &Instance, params: &PipelineParams) -> Result<Report> {
    Ok(solve_full(inst, params)?.report)
}

pub fn solve_full(inst: &Instance, params: &PipelineParams) -> Result<Solution> {
    params.validate()?;
    let violations = inst.validate();
    if !violations.is_empty() {
        return Err(Error::Invalid(violations));
    }
    let start = Instant::now();
    let trace = run_extended_moat(inst, &params.epsilon);
    let moat_ms = ms(start.elapsed());

    let t = Instant::now();
    let f1 = extract_forest(inst, &trace);
    let f1_ms = ms(t.elapsed());

    let t = Instant::now();
    let solver = SteinerSolver::new(inst);
    let eval = GainEvaluator::new(&trace);
    let candidates = enumerate_restricted_sets(&trace, inst, params.k, params.candidate_cap, &solver)?;
    let greedy = GreedyConfig {
        alpha: params.alpha.clone(),
        gamma: params.gamma.clone(),
        max_guess: params.max_guess,
    };
    let plan = maximize_profit(&candidates, &eval, &solver, &greedy)?;
    let f2 = build_f2(inst, &trace, &plan);
    let f2_ms = ms(t.elapsed());

    let t = Instant::now();
    let config = TupleConfig {
        include_triples: params.include_triples,
        max_triples: params.max_triples,
    };
    let list = enumerate_tuples(inst, &trace, &solver, &config);
    let collection = max_profit_collection(&trace, &list.tuples)?;
    let f3 = build_f3(inst, &collection, &params.epsilon, params.classic_gw);
    let f3_ms = ms(t.elapsed());

    let forests = [f1, f2.forest, f3.forest];
    let mut best = Candidate::F1;
    for (c, f) in [(Candidate::F2, &forests[1]), (Candidate::F3, &forests[2])] {
        if f.total_cost < forests[best as usize].total_cost {
            best = c;
        }
    }
    let summary = trace.summary();
    let pairs_found = list.tuples.iter().filter(|t| t.kind == TupleKind::Pair).count();
    let report = Report {
        params: ParamsEcho {
            epsilon: params.epsilon.clone(),
            alpha: params.alpha.clone(),
            gamma: params.gamma.clone(),
            k: params.k,
            include_triples: params.include_triples,
            classic_gw: params.classic_gw,
            seed: params.seed,
            implied_alpha_plus_delta: params.implied_alpha_plus_delta(),
        },
        vertices: inst.vertex_count,
        edges: inst.edges.len(),
        demands: inst.demands.len(),
        duals: DualTotals {
            y_sep_total: summary.y_sep_total,
            y_unsep_total: summary.y_unsep_total,
            y_total: summary.y_total,
        },
        f1: ForestSummary::of(&forests[0]),
        f2: ForestSummary::of(&forests[1]),
        f3: ForestSummary::of(&forests[2]),
        best,
        best_cost: forests[best as usize].total_cost.clone(),
        plan: PlanSummary {
            candidates: candidates.len(),
            sets: plan
                .selected
                .iter()
                .map(|c| PlanSet {
                    vertices: c.vertices.clone(),
                    cost: c.steiner_cost.clone(),
                })
                .collect(),
            gain: plan.gain_value.clone(),
            cost: plan.cost_value.clone(),
            profit: plan.profit(),
            contracted_y_total: f2.contracted_trace.y_total(),
        },
        autarkic: CollectionSummary {
            pairs_found,
            triples_found: list.tuples.len() - pairs_found,
            triples_dropped: list.dropped_triples,
            tuples: CollectionSummary::of(&collection),
            coverage: collection.total_coverage.clone(),
            cost: collection.total_cost.clone(),
            profit: collection.total_profit.clone(),
            contracted_y_total: f3.contracted_trace.y_total(),
            connector_cost: f3.connector_cost,
        },
        diagnostics: None,
        timings: Some(Timings {
            moat_ms,
            f1_ms,
            f2_ms,
            f3_ms,
            total_ms: ms(start.elapsed()),
        }),
    };
    Ok(Solution {
        report,
        trace,
        forests,
        plan,
        collection,
    })
}

/// Excess and Λ of `reference` against the trace, with the case thresholds.
pub fn diagnostics(
    inst: &Instance,
    solution: &Solution,
    reference: &SolutionForest,
) -> Result<Diagnostics> {
    let c = &reference.total_cost;
    let excess = excess(reference, &solution.trace)?;
    let lambda = lambda_diagnostic(inst, reference, &solution.trace);
    let large_excess = excess >= Rational::new(116, 10000) * c;
    let large_profit = solution.report.autarkic.profit >= Rational::new(3, 100) * c;
    let ratio = ratio(&solution.report.best_cost, c);
    Ok(Diagnostics {
        reference_cost: c.clone(),
        excess,
        lambda,
        large_excess,
        large_profit,
        ratio: Some(ratio),
    })
}

fn ratio(best: &Rational, exact: &Rational) -> Rational {
    if exact.is_zero() {
        Rational::one()
    } else {
        best / exact
    }
}

/// Pipeline report with diagnostics against the exact optimum.
pub fn solve_with_exact(
    inst: &Instance,
    params: &PipelineParams,
    limits: &OracleLimits,
) -> Result<(Report, SolutionForest)> {
    let mut solution = solve_full(inst, params)?;
    let exact = exact_steiner_forest(inst, limits)?;
    solution.report.diagnostics = Some(diagnostics(inst, &solution, &exact)?);
    Ok((solution.report, exact))
}

/// `best / optimum` as an exact rational (1 when the optimum is free).
pub fn compare_with_exact(
    inst: &Instance,
    params: &PipelineParams,
    limits: &OracleLimits,
) -> Result<Rational> {
    let (report, exact) = solve_with_exact(inst, params, limits)?;
    Ok(ratio(&report.best_cost, &exact.total_cost))
}
