//! Command-line front end.
//!
//! Exit codes: 0 when every requested check passes, 1 when a check fails
//! (invalid input, infeasible model, disagreement, unverified strategy),
//! 2 for usage errors and 3 for runtime errors.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagram::InfluenceDiagram;
use crate::error::{Error, Result};
use crate::generators::{n_monitoring, pig_farm, random_diagram, NMonitoringSpec, PigFarmSpec, RandomDiagramSpec};
use crate::inference::{oracle_optimize_with, OracleOutcome};
use crate::io::{read_diagram, strategy_to_file, write_diagram};
use crate::mip::{build_model_with, model_stats};
use crate::pipeline::{compare, prepare, run, Backend, PrepareOptions, Prepared, Problem, RunReport, Settings};
use crate::risk::{CvarMode, Objective, RiskSpec};
use crate::rjt::validate_rjt;
use crate::solve::{export_lp, ExternalSolver, SolutionFormat, Status};

const OK: u8 = 0;
const CHECK_FAILED: u8 = 1;
const USAGE: u8 = 2;
const RUNTIME: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "limid-rjt", version, about = "Influence diagrams as MIPs over rooted junction trees")]
struct Cli {
    /// TOML file with solver command, caps and tolerances.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Emit line-delimited JSON instead of a table.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a diagram file.
    Validate { file: PathBuf },
    /// Print the rooted junction tree of a diagram.
    Rjt {
        #[command(flatten)]
        tree: TreeArgs,
        /// Write the tree in Graphviz format.
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Write a generated instance.
    Gen {
        #[arg(value_enum)]
        family: Family,
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the model as an LP file.
    Build {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        out: PathBuf,
        /// Also print model statistics.
        #[arg(long)]
        stats: bool,
    },
    /// Build and solve.
    Solve {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, value_enum, default_value_t = BackendKind::Reference)]
        backend: BackendKind,
        /// Solver command template with `{lp}` and `{sol}` placeholders.
        #[arg(long)]
        solver: Option<String>,
    },
    /// Optimize by enumerating strategies on the diagram.
    Oracle {
        #[command(flatten)]
        problem: ProblemArgs,
    },
    /// Solve with the oracle and every backend and require agreement.
    Compare {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Backends to check; the external one is added when a solver is configured.
        #[arg(long, value_enum, value_delimiter = ',')]
        backend: Vec<BackendKind>,
        #[arg(long)]
        solver: Option<String>,
    },
    /// Solve seeded random instances in parallel.
    Bench {
        #[arg(value_enum)]
        family: BenchFamily,
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, default_value_t = 10)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "meu")]
        objective: String,
        #[arg(long, value_enum, default_value_t = BackendKind::Reference)]
        backend: BackendKind,
        #[arg(long)]
        solver: Option<String>,
        #[arg(long)]
        merge_values: bool,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Family {
    Pigfarm,
    Nmonitoring,
    Random,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BenchFamily {
    Pigfarm,
    Nmonitoring,
}

#[derive(Debug, Clone, Copy, PartialEq, ValueEnum)]
enum BackendKind {
    Reference,
    External,
}

#[derive(Args, Debug)]
struct TreeArgs {
    file: PathBuf,
    /// Topological order by node name.
    #[arg(long, value_delimiter = ',')]
    order: Option<Vec<String>>,
    /// Nodes that must end up in one cluster.
    #[arg(long, value_delimiter = ',')]
    modify: Vec<String>,
    /// Replace the value nodes by their sum.
    #[arg(long)]
    merge_values: bool,
}

#[derive(Args, Debug)]
struct ProblemArgs {
    #[command(flatten)]
    tree: TreeArgs,
    /// `meu` or `cvar:<alpha>`.
    #[arg(long, default_value = "meu")]
    objective: String,
    /// `P(<predicate>)<=p` or `>=p`, optionally suffixed `@<cluster root>`.
    #[arg(long)]
    chance: Vec<String>,
    /// Forbidden predicate, optionally suffixed `@<cluster root>`.
    #[arg(long)]
    logical: Vec<String>,
    /// TOML or JSON file with `limit`, `costs` and optional `cluster`.
    #[arg(long)]
    budget: Vec<PathBuf>,
    /// `<alpha>:<threshold>` requiring CVaR at least the threshold.
    #[arg(long)]
    cvar_at_least: Vec<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Config {
    solver: SolverConfig,
    caps: CapsConfig,
    tolerances: TolConfig,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolverConfig {
    command: Option<String>,
    value_pattern: Option<String>,
    status_pattern: Option<String>,
    infeasible_pattern: Option<String>,
    optimal_pattern: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CapsConfig {
    cluster: Option<u64>,
    strategies: Option<u64>,
    joint: Option<u64>,
    merged_states: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TolConfig {
    external: Option<f64>,
    reference: Option<f64>,
    oracle: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BudgetFile {
    limit: f64,
    #[serde(default)]
    cluster: Option<String>,
    costs: BTreeMap<String, BTreeMap<String, f64>>,
}

struct Env {
    config: Config,
    json: bool,
}

impl Env {
    fn settings(&self) -> Settings {
        let mut s = Settings::default();
        let caps = &self.config.caps;
        if let Some(c) = caps.cluster {
            s.build.cluster_cap = c.into();
        }
        if let Some(c) = caps.strategies {
            s.reference.strategy_cap = c.into();
            s.oracle.strategy_cap = c.into();
        }
        if let Some(c) = caps.joint {
            s.oracle.joint_cap = c.into();
        }
        if let Some(t) = self.config.tolerances.reference {
            s.reference.tol = t;
        }
        if let Some(t) = self.config.tolerances.oracle {
            s.oracle.feasibility_tol = t;
        }
        s
    }

    fn prepare_options(&self, a: &TreeArgs) -> PrepareOptions {
        let mut o = PrepareOptions {
            merge_values: a.merge_values,
            order: a.order.clone(),
            modify: a.modify.clone(),
            ..Default::default()
        };
        if let Some(c) = self.config.caps.merged_states {
            o.merge.state_cap = c.into();
        }
        o
    }

    fn external(&self, flag: Option<&String>) -> Result<Option<ExternalSolver>> {
        let mut solver = match (flag, &self.config.solver.command) {
            (Some(c), _) | (None, Some(c)) => ExternalSolver::new(c.clone()),
            (None, None) => match ExternalSolver::from_env() {
                Some(s) => s,
                None => return Ok(None),
            },
        };
        let sc = &self.config.solver;
        if sc.value_pattern.is_some() || sc.status_pattern.is_some() || sc.infeasible_pattern.is_some() || sc.optimal_pattern.is_some() {
            let d = SolutionFormat::default();
            solver.format = SolutionFormat::from_patterns(
                sc.value_pattern.as_deref().unwrap_or(d.value.as_str()),
                sc.status_pattern.as_deref().unwrap_or(d.status.as_str()),
                sc.infeasible_pattern.as_deref().unwrap_or(d.infeasible.as_str()),
                sc.optimal_pattern.as_deref().unwrap_or(d.optimal.as_str()),
            )?;
        }
        if let Some(t) = self.config.tolerances.external {
            solver.tol = t;
        }
        Ok(Some(solver))
    }

    fn backend(&self, kind: BackendKind, flag: Option<&String>) -> Result<Backend> {
        match kind {
            BackendKind::Reference => Ok(Backend::Reference),
            BackendKind::External => self.external(flag)?.map(Backend::External).ok_or_else(|| {
                Error::Parse(format!(
                    "external backend needs --solver, [solver] command in the config, or {}",
                    crate::solve::SOLVER_ENV
                ))
            }),
        }
    }

    fn emit<T: Serialize>(&self, value: &T, table: &[(&str, String)]) {
        let mut out = std::io::stdout().lock();
        if self.json {
            let _ = writeln!(out, "{}", serde_json::to_string(value).expect("reports serialize"));
        } else {
            let w = table.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
            for (k, v) in table {
                let _ = writeln!(out, "{k:<w$}  {v}");
            }
        }
    }
}

fn split_cluster(text: &str) -> (&str, Option<&str>) {
    match text.rsplit_once('@') {
        Some((body, c)) if !c.trim().is_empty() => (body, Some(c.trim())),
        _ => (text, None),
    }
}

fn read_budget(path: &Path) -> Result<RiskSpec> {
    let text = std::fs::read_to_string(path)?;
    let file: BudgetFile = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text)?
    } else {
        toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?
    };
    Ok(RiskSpec::Budget {
        cluster: file.cluster,
        costs: file.costs,
        limit: file.limit,
    })
}

fn problem_of(a: &ProblemArgs) -> Result<Problem> {
    let mut p = Problem {
        objective: Objective::parse(&a.objective)?,
        constraints: Vec::new(),
    };
    for c in &a.chance {
        let (body, cluster) = split_cluster(c);
        let mut spec = RiskSpec::parse_chance(body)?;
        if let Some(root) = cluster {
            spec = spec.with_cluster(root);
        }
        p.constraints.push(spec);
    }
    for l in &a.logical {
        let (body, cluster) = split_cluster(l);
        let mut spec = RiskSpec::logical(body)?;
        if let Some(root) = cluster {
            spec = spec.with_cluster(root);
        }
        p.constraints.push(spec);
    }
    for b in &a.budget {
        p.constraints.push(read_budget(b)?);
    }
    for c in &a.cvar_at_least {
        let (alpha, t) = c
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("--cvar-at-least expects `<alpha>:<threshold>`, got `{c}`")))?;
        let alpha: f64 = alpha.trim().parse().map_err(|_| Error::Parse(format!("bad alpha `{alpha}`")))?;
        let t: f64 = t.trim().parse().map_err(|_| Error::Parse(format!("bad threshold `{t}`")))?;
        let spec = RiskSpec::Cvar {
            alpha,
            mode: CvarMode::AtLeast(t),
            value_node: None,
        };
        spec.check()?;
        p.constraints.push(spec);
    }
    Ok(p)
}

fn load(env: &Env, a: &TreeArgs) -> Result<Prepared> {
    let d = read_diagram(&a.file)?;
    prepare(&d, &env.prepare_options(a))
}

fn instance_name(path: &Path) -> String {
    path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x}"))
}

fn report_table(r: &RunReport) -> Vec<(&'static str, String)> {
    let mut t = vec![
        ("instance", r.instance.clone()),
        ("objective", r.objective_kind.clone()),
        ("backend", r.backend.clone()),
        ("status", r.status.to_string()),
        ("value", fmt_opt(r.objective)),
        ("verified", r.verified.map_or_else(|| "-".into(), |v| v.to_string())),
        ("variables", r.model_stats.variables.to_string()),
        ("binaries", r.model_stats.binaries.to_string()),
        ("rows", r.model_stats.rows.to_string()),
        ("wall_ms", format!("{:.2}", r.wall_ms)),
    ];
    if let Some(s) = &r.strategy {
        for (dec, labels) in s {
            t.push(("strategy", format!("{dec}: {}", labels.join(" "))));
        }
    }
    if let Some(d) = &r.distribution {
        t.push(("expected", d.expected.to_string()));
        if let Some(c) = d.cvar {
            t.push(("cvar", c.to_string()));
        }
    }
    for n in &r.notes {
        t.push(("note", n.clone()));
    }
    t
}

fn report_ok(r: &RunReport) -> bool {
    r.status == Status::Optimal && r.verified != Some(false)
}

fn cmd_validate(env: &Env, file: &Path) -> Result<u8> {
    let d = read_diagram(file)?;
    let violations: Vec<String> = d.validate().iter().map(|v| v.to_string()).collect();
    #[derive(Serialize)]
    struct Out<'a> {
        file: String,
        nodes: usize,
        valid: bool,
        violations: &'a [String],
    }
    let mut table = vec![
        ("file", file.display().to_string()),
        ("nodes", d.len().to_string()),
        ("valid", violations.is_empty().to_string()),
    ];
    table.extend(violations.iter().map(|v| ("violation", v.clone())));
    env.emit(
        &Out {
            file: file.display().to_string(),
            nodes: d.len(),
            valid: violations.is_empty(),
            violations: &violations,
        },
        &table,
    );
    Ok(if violations.is_empty() { OK } else { CHECK_FAILED })
}

fn cmd_rjt(env: &Env, a: &TreeArgs, dot: Option<&Path>) -> Result<u8> {
    let p = load(env, a)?;
    let (d, t) = (&p.diagram, &p.tree);
    if let Some(path) = dot {
        std::fs::write(path, t.to_dot(d))?;
    }
    let violations: Vec<String> = validate_rjt(t, d).iter().map(|v| v.to_string()).collect();
    #[derive(Serialize)]
    struct ClusterOut {
        root: String,
        members: Vec<String>,
        parent: Option<String>,
    }
    #[derive(Serialize)]
    struct Out {
        clusters: Vec<ClusterOut>,
        width: usize,
        violations: Vec<String>,
    }
    let clusters: Vec<ClusterOut> = t
        .clusters_in_order()
        .map(|c| ClusterOut {
            root: d.name(c.root).into(),
            members: c.members.iter().map(|&m| d.name(m).to_string()).collect(),
            parent: t.parent(c.root).map(|p| d.name(p).to_string()),
        })
        .collect();
    let mut table: Vec<(&str, String)> = clusters
        .iter()
        .map(|c| {
            let parent = c.parent.as_deref().map_or(String::new(), |p| format!("  <- C_{p}"));
            ("cluster", format!("C_{} = {{{}}}{parent}", c.root, c.members.join(", ")))
        })
        .collect();
    table.push(("width", t.width().to_string()));
    table.extend(violations.iter().map(|v| ("violation", v.clone())));
    let code = if violations.is_empty() { OK } else { CHECK_FAILED };
    env.emit(
        &Out {
            clusters,
            width: t.width(),
            violations,
        },
        &table,
    );
    Ok(code)
}

fn cmd_gen(env: &Env, family: Family, n: usize, seed: Option<u64>, out: &Path) -> Result<u8> {
    if n == 0 {
        return Err(Error::Parse("--n must be at least 1".into()));
    }
    let d = match family {
        Family::Pigfarm => {
            let spec = PigFarmSpec::with_periods(n);
            pig_farm(&match seed {
                Some(s) => spec.seeded(s),
                None => spec,
            })
        }
        Family::Nmonitoring => n_monitoring(&NMonitoringSpec::new(n, seed.unwrap_or(0))),
        Family::Random => random_diagram(
            seed.unwrap_or(0),
            &RandomDiagramSpec {
                max_nodes: n.max(1),
                ..Default::default()
            },
        ),
    };
    write_diagram(out, &d)?;
    #[derive(Serialize)]
    struct Out {
        out: String,
        nodes: usize,
        decisions: usize,
        strategies: String,
        seed: Option<u64>,
    }
    let o = Out {
        out: out.display().to_string(),
        nodes: d.len(),
        decisions: d.decisions().len(),
        strategies: d.strategy_count().to_string(),
        seed,
    };
    let table = [
        ("out", o.out.clone()),
        ("nodes", o.nodes.to_string()),
        ("decisions", o.decisions.to_string()),
        ("strategies", o.strategies.clone()),
    ];
    env.emit(&o, &table);
    Ok(OK)
}

fn cmd_build(env: &Env, a: &ProblemArgs, out: &Path, stats: bool) -> Result<u8> {
    let problem = problem_of(a)?;
    let p = load(env, &a.tree)?;
    let m = build_model_with(&p.diagram, &p.tree, &problem.objective, &problem.constraints, &env.settings().build)?;
    std::fs::write(out, export_lp(&m))?;
    let s = model_stats(&m);
    let mut table = vec![
        ("out", out.display().to_string()),
        ("variables", s.variables.to_string()),
        ("binaries", s.binaries.to_string()),
        ("rows", s.rows.to_string()),
    ];
    if stats {
        table.push(("nonzeros", s.nonzeros.to_string()));
        table.push(("largest_cluster", s.largest_cluster.to_string()));
        table.push(("largest_cluster_configs", s.largest_cluster_configs.to_string()));
        for (f, n) in &s.rows_by_family {
            table.push(("rows", format!("{f}: {n}")));
        }
    }
    env.emit(&s, &table);
    Ok(OK)
}

fn cmd_solve(env: &Env, a: &ProblemArgs, kind: BackendKind, solver: Option<&String>) -> Result<u8> {
    let problem = problem_of(a)?;
    let backend = env.backend(kind, solver)?;
    let p = load(env, &a.tree)?;
    let r = run(&instance_name(&a.tree.file), &p, &problem, &backend, &env.settings())?;
    env.emit(&r.report, &report_table(&r.report));
    Ok(if report_ok(&r.report) { OK } else { CHECK_FAILED })
}

fn cmd_oracle(env: &Env, a: &ProblemArgs) -> Result<u8> {
    let problem = problem_of(a)?;
    let p = load(env, &a.tree)?;
    let d: &InfluenceDiagram = &p.diagram;
    let start = std::time::Instant::now();
    let outcome = oracle_optimize_with(d, &problem.objective, &problem.constraints, &env.settings().oracle)?;
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    #[derive(Serialize)]
    struct Out {
        instance: String,
        objective_kind: String,
        status: Status,
        objective: Option<f64>,
        strategy: Option<crate::io::StrategyFile>,
        ties: usize,
        evaluated: String,
        feasible: u128,
        wall_ms: f64,
    }
    let mut o = Out {
        instance: instance_name(&a.tree.file),
        objective_kind: problem.objective.to_string(),
        status: Status::Infeasible,
        objective: None,
        strategy: None,
        ties: 0,
        evaluated: String::new(),
        feasible: 0,
        wall_ms,
    };
    match &outcome {
        OracleOutcome::Optimal(r) => {
            o.status = Status::Optimal;
            o.objective = Some(r.objective);
            o.strategy = Some(strategy_to_file(d, &r.best)?);
            o.ties = r.optimal_set.len();
            o.evaluated = r.evaluated.to_string();
            o.feasible = r.feasible;
        }
        OracleOutcome::Infeasible { evaluated } => o.evaluated = evaluated.to_string(),
    }
    let mut table = vec![
        ("instance", o.instance.clone()),
        ("objective", o.objective_kind.clone()),
        ("status", o.status.to_string()),
        ("value", fmt_opt(o.objective)),
        ("evaluated", o.evaluated.clone()),
        ("optimal strategies", o.ties.to_string()),
        ("wall_ms", format!("{wall_ms:.2}")),
    ];
    if let Some(s) = &o.strategy {
        for (dec, labels) in s {
            table.push(("strategy", format!("{dec}: {}", labels.join(" "))));
        }
    }
    let code = if o.status == Status::Optimal { OK } else { CHECK_FAILED };
    env.emit(&o, &table);
    Ok(code)
}

fn cmd_compare(env: &Env, a: &ProblemArgs, kinds: &[BackendKind], solver: Option<&String>) -> Result<u8> {
    let problem = problem_of(a)?;
    let mut backends = Vec::new();
    if kinds.is_empty() {
        backends.push(Backend::Reference);
        if let Some(s) = env.external(solver)? {
            backends.push(Backend::External(s));
        }
    } else {
        for &k in kinds {
            backends.push(env.backend(k, solver)?);
        }
    }
    let p = load(env, &a.tree)?;
    let c = compare(&instance_name(&a.tree.file), &p, &problem, &backends, &env.settings())?;
    let mut table = vec![
        ("instance", c.instance.clone()),
        ("objective", c.objective_kind.clone()),
        ("oracle", format!("{} {}", c.oracle.status, fmt_opt(c.oracle.objective))),
    ];
    for b in &c.backends {
        table.push(("backend", format!("{} {} {}", b.backend, b.status, fmt_opt(b.objective))));
    }
    table.push(("gap", format!("{:e}", c.gap)));
    table.push(("agree", c.agree.to_string()));
    env.emit(&c, &table);
    Ok(if c.agree { OK } else { CHECK_FAILED })
}

#[derive(Serialize)]
struct Aggregate {
    family: String,
    n: usize,
    trials: u64,
    seed: u64,
    optimal: usize,
    verified: usize,
    mean_objective: Option<f64>,
    mean_wall_ms: f64,
    max_wall_ms: f64,
    instance_scheme: &'static str,
}

#[allow(clippy::too_many_arguments)]
fn cmd_bench(
    env: &Env,
    family: BenchFamily,
    n: usize,
    trials: u64,
    seed: u64,
    objective: &str,
    backend: Backend,
    merge_values: bool,
) -> Result<u8> {
    if n == 0 || trials == 0 {
        return Err(Error::Parse("--n and --trials must be at least 1".into()));
    }
    let problem = Problem {
        objective: Objective::parse(objective)?,
        constraints: Vec::new(),
    };
    let settings = env.settings();
    let mut opts = PrepareOptions {
        merge_values,
        ..Default::default()
    };
    if let Some(c) = env.config.caps.merged_states {
        opts.merge.state_cap = c.into();
    }
    let name = match family {
        BenchFamily::Pigfarm => "pigfarm",
        BenchFamily::Nmonitoring => "nmonitoring",
    };
    let reports: Vec<RunReport> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = seed.wrapping_add(t);
            let d = match family {
                BenchFamily::Pigfarm => pig_farm(&PigFarmSpec::with_periods(n).seeded(s)),
                BenchFamily::Nmonitoring => n_monitoring(&NMonitoringSpec::new(n, s)),
            };
            let p = prepare(&d, &opts)?;
            Ok(run(&format!("{name}-n{n}-s{s}"), &p, &problem, &backend, &settings)?.report)
        })
        .collect::<Result<_>>()?;

    let optimal: Vec<f64> = reports
        .iter()
        .filter(|r| r.status == Status::Optimal)
        .filter_map(|r| r.objective)
        .collect();
    let agg = Aggregate {
        family: name.into(),
        n,
        trials,
        seed,
        optimal: optimal.len(),
        verified: reports.iter().filter(|r| r.verified == Some(true)).count(),
        mean_objective: (!optimal.is_empty()).then(|| optimal.iter().sum::<f64>() / optimal.len() as f64),
        mean_wall_ms: reports.iter().map(|r| r.wall_ms).sum::<f64>() / reports.len() as f64,
        max_wall_ms: reports.iter().map(|r| r.wall_ms).fold(0.0, f64::max),
        instance_scheme: match family {
            BenchFamily::Pigfarm => "interpretation: uniform [0, 0.3] noise per table entry, rows renormalized",
            BenchFamily::Nmonitoring => "interpretation: seeded monotone tables",
        },
    };
    if env.json {
        for r in &reports {
            env.emit(r, &[]);
        }
        env.emit(&agg, &[]);
    } else {
        let mut out = std::io::stdout().lock();
        let _ = writeln!(out, "{:<28} {:<10} {:>16} {:>9} {:>10}", "instance", "status", "objective", "verified", "wall_ms");
        for r in &reports {
            let _ = writeln!(
                out,
                "{:<28} {:<10} {:>16} {:>9} {:>10.2}",
                r.instance,
                r.status.to_string(),
                fmt_opt(r.objective),
                r.verified.map_or_else(|| "-".into(), |v| v.to_string()),
                r.wall_ms
            );
        }
        let _ = writeln!(
            out,
            "{} of {} optimal, {} verified, mean objective {}, mean {:.2} ms, max {:.2} ms",
            agg.optimal,
            agg.trials,
            agg.verified,
            fmt_opt(agg.mean_objective),
            agg.mean_wall_ms,
            agg.max_wall_ms
        );
        let _ = writeln!(out, "instances: {}", agg.instance_scheme);
    }
    Ok(if reports.iter().all(report_ok) { OK } else { CHECK_FAILED })
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    match path {
        None => Ok(Config::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", p.display())))
        }
    }
}

fn dispatch(cli: Cli) -> Result<u8> {
    let env = Env {
        config: load_config(cli.config.as_deref())?,
        json: cli.json,
    };
    match &cli.command {
        Command::Validate { file } => cmd_validate(&env, file),
        Command::Rjt { tree, dot } => cmd_rjt(&env, tree, dot.as_deref()),
        Command::Gen { family, n, seed, out } => cmd_gen(&env, *family, *n, *seed, out),
        Command::Build { problem, out, stats } => cmd_build(&env, problem, out, *stats),
        Command::Solve { problem, backend, solver } => cmd_solve(&env, problem, *backend, solver.as_ref()),
        Command::Oracle { problem } => cmd_oracle(&env, problem),
        Command::Compare { problem, backend, solver } => cmd_compare(&env, problem, backend, solver.as_ref()),
        Command::Bench {
            family,
            n,
            trials,
            seed,
            objective,
            backend,
            solver,
            merge_values,
        } => {
            let b = env.backend(*backend, solver.as_ref())?;
            cmd_bench(&env, *family, *n, *trials, *seed, objective, b, *merge_values)
        }
    }
}

fn error_code(e: &Error) -> u8 {
    match e {
        Error::Parse(_)
        | Error::InvalidAlpha(_)
        | Error::InvalidThreshold(_)
        | Error::UnknownNode(_)
        | Error::UnknownState { .. }
        | Error::InvalidOrder(_)
        | Error::EmptyTarget => USAGE,
        Error::InvalidDiagram(_) => CHECK_FAILED,
        _ => RUNTIME,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_with<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { USAGE } else { OK };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            error_code(&e)
        }
    }
}

pub fn main() {
    std::process::exit(run_with(std::env::args_os()) as i32);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cluster_suffix() {
        assert_eq!(split_cluster("P(H1=ill)<=0.4@H4"), ("P(H1=ill)<=0.4", Some("H4")));
        assert_eq!(split_cluster("H1=ill"), ("H1=ill", None));
    }

    #[test]
    fn usage_errors_name_the_token() {
        let args = ProblemArgs {
            tree: TreeArgs {
                file: "x.json".into(),
                order: None,
                modify: vec![],
                merge_values: false,
            },
            objective: "cvar:1.5".into(),
            chance: vec![],
            logical: vec![],
            budget: vec![],
            cvar_at_least: vec![],
        };
        let e = problem_of(&args).unwrap_err();
        assert_eq!(error_code(&e), USAGE);
        assert!(e.to_string().contains("1.5"));
        assert_eq!(run_with(["limid-rjt", "solve", "--bogus"]), USAGE);
    }

    #[test]
    fn config_rejects_unknown_keys() {
        assert!(toml::from_str::<Config>("[caps]\ncluster = 10\n").is_ok());
        assert!(toml::from_str::<Config>("[caps]\nclusters = 10\n").is_err());
    }
}
