use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use sforest_core::fixtures;
use sforest_core::oracle::{exact_steiner_forest, verify_ledgers, OracleLimits};
use sforest_core::pipeline::{solve_full, diagnostics, PipelineParams};
use sforest_core::{generate_random, run_extended_moat, Error, GenParams, Instance, Rational, Violation};

#[derive(Parser)]
#[command(name = "sforest", version, about = "Steiner forest approximation with moat growing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an instance and print the report.
    Solve {
        file: PathBuf,
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        format: FormatArgs,
        /// Also run the exact oracle and report diagnostics against it.
        #[arg(long)]
        exact: bool,
        /// Include wall-clock stage timings.
        #[arg(long)]
        timings: bool,
        #[command(flatten)]
        limits: LimitArgs,
    },
    /// Print the moat-growing trace as JSON.
    Trace {
        file: PathBuf,
        #[arg(long, default_value = "83/10000")]
        epsilon: Rational,
    },
    /// Re-check every trace identity; exits 4 on violations.
    Verify {
        file: PathBuf,
        #[arg(long, default_value = "83/10000")]
        epsilon: Rational,
    },
    /// Write a random instance, or a built-in fixture, in STP-F format.
    Gen {
        /// Emit a built-in instance instead of a random one.
        #[arg(long, value_enum)]
        fixture: Option<Fixture>,
        /// Rungs of the ladder fixture.
        #[arg(long, default_value_t = 10)]
        rungs: usize,
        /// Long edge of the path fixture.
        #[arg(long, default_value_t = 100)]
        long_edge: i64,
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 0.3)]
        density: f64,
        #[arg(long, default_value_t = 3)]
        demands: usize,
        #[arg(long, default_value_t = 10)]
        max_cost: u32,
        /// Replace costs by shortest-path distances.
        #[arg(long)]
        metric: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Solve every `.stpf` file in a directory and print a summary table.
    Bench {
        dir: PathBuf,
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        format: FormatArgs,
        #[command(flatten)]
        limits: LimitArgs,
        /// Include wall-clock times per instance.
        #[arg(long)]
        timings: bool,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Compute an optimal forest by exhaustive search.
    Exact {
        file: PathBuf,
        #[command(flatten)]
        limits: LimitArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Fixture {
    Ladder,
    Path,
}

#[derive(Args, Clone)]
struct ParamArgs {
    #[arg(long, default_value = "83/10000")]
    epsilon: Rational,
    #[arg(long, default_value = "9/100")]
    alpha: Rational,
    #[arg(long, default_value = "1/100")]
    gamma: Rational,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long)]
    no_triples: bool,
    /// Solve the residual instance of the autarkic forest with ε = 0.
    #[arg(long)]
    classic_gw: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl ParamArgs {
    fn params(&self) -> PipelineParams {
        PipelineParams {
            epsilon: self.epsilon.clone(),
            alpha: self.alpha.clone(),
            gamma: self.gamma.clone(),
            k: self.k,
            include_triples: !self.no_triples,
            classic_gw: self.classic_gw,
            seed: self.seed,
            ..PipelineParams::default()
        }
    }
}

#[derive(Args, Clone)]
struct FormatArgs {
    #[arg(long, conflicts_with = "csv")]
    json: bool,
    #[arg(long)]
    csv: bool,
}

#[derive(Args, Clone)]
struct LimitArgs {
    #[arg(long, default_value_t = 10)]
    max_terminals: usize,
    #[arg(long, default_value_t = 24)]
    max_edges: usize,
    /// Seconds.
    #[arg(long, default_value_t = 20)]
    time_budget: u64,
}

impl LimitArgs {
    fn limits(&self) -> OracleLimits {
        OracleLimits {
            max_terminals: self.max_terminals,
            max_edges: self.max_edges,
            time_budget: std::time::Duration::from_secs(self.time_budget),
            ..OracleLimits::default()
        }
    }
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        let code = match error.downcast_ref::<Error>() {
            Some(Error::Invalid(v)) if v.iter().any(|x| matches!(x, Violation::InfeasibleDemand { .. })) => 2,
            Some(Error::OracleLimit(_)) => 3,
            _ => 1,
        };
        Failure { code, error }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn read_instance(path: &Path) -> Result<Instance> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let inst = Instance::parse_stpf(&text).map_err(Error::from)?;
    Ok(inst)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn run(command: Command) -> Result<u8, Failure> {
    match command {
        Command::Solve {
            file,
            params,
            format,
            exact,
            timings,
            limits,
        } => {
            let inst = read_instance(&file)?;
            let mut sol = solve_full(&inst, &params.params())?;
            if exact {
                let opt = exact_steiner_forest(&inst, &limits.limits())?;
                sol.report.diagnostics = Some(diagnostics(&inst, &sol, &opt)?);
            }
            if !timings {
                sol.report.timings = None;
            }
            if format.csv {
                let row = BenchRow::from_report(&name_of(&file), &sol.report, timings);
                emit(None, &rows_to_csv(&[row], timings)?)?;
            } else {
                emit(None, &(sol.report.to_json() + "\n"))?;
            }
            Ok(0)
        }
        Command::Trace { file, epsilon } => {
            let inst = read_instance(&file)?;
            check(&inst)?;
            emit(None, &(run_extended_moat(&inst, &epsilon).to_json() + "\n"))?;
            Ok(0)
        }
        Command::Verify { file, epsilon } => {
            let inst = read_instance(&file)?;
            check(&inst)?;
            let trace = run_extended_moat(&inst, &epsilon);
            let found = verify_ledgers(&inst, &trace);
            let json = serde_json::to_string_pretty(&found).map_err(anyhow::Error::from)?;
            emit(None, &(json + "\n"))?;
            if found.is_empty() {
                Ok(0)
            } else {
                eprintln!("{} ledger violations", found.len());
                Ok(4)
            }
        }
        Command::Gen {
            fixture,
            rungs,
            long_edge,
            n,
            density,
            demands,
            max_cost,
            metric,
            seed,
            out,
        } => {
            let inst = match fixture {
                Some(Fixture::Ladder) => fixtures::ladder(rungs.max(1)).0,
                Some(Fixture::Path) => fixtures::long_path(long_edge).0,
                None => generate_random(
                    &GenParams {
                        n,
                        density,
                        demand_count: demands,
                        max_cost,
                        metric,
                    },
                    seed,
                )?,
            };
            emit(out.as_deref(), &inst.to_stpf())?;
            Ok(0)
        }
        Command::Bench {
            dir,
            params,
            format,
            limits,
            timings,
            out,
        } => {
            let rows = bench(&dir, &params.params(), &limits.limits(), timings)?;
            let text = if format.json {
                serde_json::to_string_pretty(&rows).map_err(anyhow::Error::from)? + "\n"
            } else {
                rows_to_csv(&rows, timings)?
            };
            emit(out.as_deref(), &text)?;
            Ok(0)
        }
        Command::Exact { file, limits } => {
            let inst = read_instance(&file)?;
            let forest = exact_steiner_forest(&inst, &limits.limits())?;
            #[derive(Serialize)]
            struct Out {
                cost: String,
                approx: f64,
                edges: Vec<usize>,
            }
            let json = serde_json::to_string_pretty(&Out {
                cost: forest.total_cost.to_fraction_string(),
                approx: forest.total_cost.approx(),
                edges: forest.edge_ids.iter().copied().collect(),
            })
            .map_err(anyhow::Error::from)?;
            emit(None, &(json + "\n"))?;
            Ok(0)
        }
    }
}

fn check(inst: &Instance) -> Result<(), Error> {
    let v = inst.validate();
    if v.is_empty() {
        Ok(())
    } else {
        Err(Error::Invalid(v))
    }
}

fn name_of(path: &Path) -> String {
    path.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

#[derive(Serialize)]
struct BenchRow {
    instance: String,
    vertices: usize,
    edges: usize,
    demands: usize,
    f1: String,
    f2: String,
    f3: String,
    best: String,
    exact: Option<String>,
    ratio: Option<String>,
    ratio_approx: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    solve_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    exact_ms: Option<f64>,
}

impl BenchRow {
    fn from_report(name: &str, r: &sforest_core::Report, timings: bool) -> Self {
        let ratio = r.diagnostics.as_ref().and_then(|d| d.ratio.clone());
        BenchRow {
            instance: name.to_string(),
            vertices: r.vertices,
            edges: r.edges,
            demands: r.demands,
            f1: r.f1.cost.to_fraction_string(),
            f2: r.f2.cost.to_fraction_string(),
            f3: r.f3.cost.to_fraction_string(),
            best: r.best_cost.to_fraction_string(),
            exact: r.diagnostics.as_ref().map(|d| d.reference_cost.to_fraction_string()),
            ratio_approx: ratio.as_ref().map(Rational::approx),
            ratio: ratio.map(|x| x.to_fraction_string()),
            solve_ms: if timings { r.timings.as_ref().map(|t| t.total_ms) } else { None },
            exact_ms: None,
        }
    }
}

fn rows_to_csv(rows: &[BenchRow], timings: bool) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    let mut header = vec![
        "instance", "vertices", "edges", "demands", "f1", "f2", "f3", "best", "exact", "ratio",
        "ratio_approx",
    ];
    if timings {
        header.extend(["solve_ms", "exact_ms"]);
    }
    w.write_record(&header)?;
    for r in rows {
        let opt = |x: &Option<String>| x.clone().unwrap_or_default();
        let mut rec = vec![
            r.instance.clone(),
            r.vertices.to_string(),
            r.edges.to_string(),
            r.demands.to_string(),
            r.f1.clone(),
            r.f2.clone(),
            r.f3.clone(),
            r.best.clone(),
            opt(&r.exact),
            opt(&r.ratio),
            r.ratio_approx.map(|x| x.to_string()).unwrap_or_default(),
        ];
        if timings {
            let f = |x: Option<f64>| x.map(|v| format!("{v:.3}")).unwrap_or_default();
            rec.push(f(r.solve_ms));
            rec.push(f(r.exact_ms));
        }
        w.write_record(&rec)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?)?)
}

fn bench(dir: &Path, params: &PipelineParams, limits: &OracleLimits, timings: bool) -> Result<Vec<BenchRow>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "stpf"))
        .collect();
    files.sort();
    files
        .par_iter()
        .map(|path| -> Result<BenchRow> {
            let name = name_of(path);
            let inst = read_instance(path)?;
            let sol = solve_full(&inst, params).with_context(|| format!("solving {name}"))?;
            let started = Instant::now();
            let mut report = sol.report.clone();
            let mut exact_ms = None;
            match exact_steiner_forest(&inst, limits) {
                Ok(opt) => {
                    exact_ms = Some(started.elapsed().as_secs_f64() * 1000.0);
                    report.diagnostics = Some(diagnostics(&inst, &sol, &opt)?);
                }
                Err(Error::OracleLimit(_)) => {}
                Err(e) => return Err(e.into()),
            }
            let mut row = BenchRow::from_report(&name, &report, timings);
            if timings {
                row.exact_ms = exact_ms;
            }
            Ok(row)
        })
        .collect()
}
