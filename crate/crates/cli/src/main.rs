use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use matchopt::bench::{bench_dcda, doubling_sweep};
use matchopt::da::{init_state, init_state_traced};
use matchopt::dcda::{bound_status, dc_da, egalitarian_dcda, DcDaResult};
use matchopt::gen::{generate_random, GenParams};
use matchopt::io::{
    format_rational, instance_costs, load_instance, matching_entries, parse_rational, solve_report, IoError,
    ReportFile, StudentCostFile,
};
use matchopt::market::CountingRule;
use matchopt::objectives::{builtin, Objective, WeightedSum};
use matchopt::oracle::{enumerate_all_stable, optimum_over, Budget, OracleMode};
use matchopt::solver::{SolveMode, Solver};
use matchopt::stable_sets::{enumerate_stable_sets, AgentSide};
use matchopt::{Instance, Rational};
use serde_json::{json, Value};

const BUDGET_VAR: &str = "MATCHOPT_ORACLE_BUDGET";

#[derive(Parser)]
#[command(name = "matchopt", version, about = "Stable matchings under institutional set objectives")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check an instance file and print its size.
    Validate { instance: PathBuf },
    /// Student-proposing deferred acceptance.
    Da {
        instance: PathBuf,
        /// Attach the proposal/rejection log.
        #[arg(long)]
        trace: bool,
    },
    /// Student-optimal stable matching meeting every diversity bound.
    Dcda { instance: PathBuf },
    /// Smallest uniform relaxation of the bounds that DC-DA can meet.
    EgalDcda { instance: PathBuf },
    /// Every set an agent receives across all stable matchings.
    StableSets {
        instance: PathBuf,
        #[arg(long, value_enum, default_value_t = Side::Institutions)]
        side: Side,
    },
    /// Optimize an objective over all stable matchings.
    Solve(SolveArgs),
    /// List every stable matching (small instances only).
    Enumerate { instance: PathBuf },
    /// Print a seeded random instance.
    Gen(GenArgs),
    /// Time DC-DA over a doubling size sweep.
    Bench {
        #[command(flatten)]
        gen: GenArgs,
        /// Largest edge count in the sweep.
        #[arg(long, default_value_t = 100_000)]
        max_edges: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Side {
    Institutions,
    Students,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Utilitarian,
    Egalitarian,
}

#[derive(Args)]
struct SolveArgs {
    instance: PathBuf,
    /// one2all, one2one, siblings, one2all-max, or mix:name=coef,...
    #[arg(long, default_value = "one2all")]
    objective: String,
    #[arg(long, value_enum, default_value_t = Mode::Utilitarian)]
    mode: Mode,
    /// Break ties toward the students' preferences.
    #[arg(long)]
    student_optimal: bool,
    /// Add student costs read from this file.
    #[arg(long, value_name = "COST_FILE", conflicts_with = "instance_costs")]
    two_sided: Option<PathBuf>,
    /// Add the edge costs declared in the instance.
    #[arg(long)]
    instance_costs: bool,
    /// Attach the edge weight table.
    #[arg(long)]
    weights: bool,
    /// Recompute the optimum by exhaustive enumeration.
    #[arg(long)]
    check: bool,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 6)]
    students: usize,
    #[arg(long, default_value_t = 3)]
    institutions: usize,
    #[arg(long, default_value_t = 2)]
    q_max: u32,
    #[arg(long, default_value_t = 2)]
    categories: usize,
    #[arg(long, default_value_t = 1)]
    categories_per_student: usize,
    #[arg(long, default_value_t = 0.5)]
    bound_density: f64,
    #[arg(long, default_value_t = 0.2)]
    family_rate: f64,
    #[arg(long, default_value_t = 3)]
    list_length: usize,
    #[arg(long, default_value_t = 0.5)]
    correlation: f64,
    #[arg(long)]
    one_to_one: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl GenArgs {
    fn params(&self) -> GenParams {
        GenParams {
            n_students: self.students,
            n_institutions: self.institutions,
            q_max: self.q_max,
            n_categories: self.categories,
            categories_per_student: self.categories_per_student,
            bound_density: self.bound_density,
            family_rate: self.family_rate,
            list_length: self.list_length,
            correlation: self.correlation,
            counting_rule: if self.one_to_one {
                CountingRule::OneToOne
            } else {
                CountingRule::OneToAll
            },
        }
    }
}

/// A report or raw document for stdout, and whether the run certified
/// that no solution exists.
enum Output {
    Report(ReportFile),
    NoSolution(ReportFile),
    Document(String),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(Output::Report(r)) => emit(&r.to_json(), 0),
        Ok(Output::NoSolution(r)) => emit(&r.to_json(), 2),
        Ok(Output::Document(text)) => emit(&text, 0),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

/// Writes to stdout; a closed pipe is not an error.
fn emit(text: &str, code: u8) -> ExitCode {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}").and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        _ => ExitCode::from(code),
    }
}

/// Replaces integer `student`, `institution` and `category` fields by ids.
fn with_ids(inst: &Instance, mut v: Value) -> Value {
    fn walk(inst: &Instance, v: &mut Value) {
        match v {
            Value::Object(map) => {
                for (key, field) in map.iter_mut() {
                    let idx = field.as_u64().map(|n| n as usize);
                    let id = match (key.as_str(), idx) {
                        ("student", Some(k)) if k < inst.num_students() => inst.student_id(k),
                        ("institution", Some(k)) if k < inst.num_institutions() => inst.institution_id(k),
                        ("category", Some(k)) if k < inst.num_categories() => inst.category_id(k),
                        _ => {
                            walk(inst, field);
                            continue;
                        }
                    };
                    *field = Value::String(id.to_string());
                }
            }
            Value::Array(items) => items.iter_mut().for_each(|x| walk(inst, x)),
            _ => {}
        }
    }
    walk(inst, &mut v);
    v
}

fn load(path: &Path) -> Result<Instance, String> {
    load_instance(path).map_err(|e| match e {
        IoError::Invalid(errors) => {
            let lines: Vec<String> = errors.0.iter().map(|e| format!("  {e}")).collect();
            format!("{}: invalid instance\n{}", path.display(), lines.join("\n"))
        }
        other => format!("{}: {other}", path.display()),
    })
}

fn budget() -> Result<Budget, String> {
    let Ok(text) = std::env::var(BUDGET_VAR) else {
        return Ok(Budget::default());
    };
    let parts: Vec<usize> = text
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| format!("{BUDGET_VAR} must be students,institutions,capacity"))?;
    match parts[..] {
        [max_students, max_institutions, max_capacity] => Ok(Budget {
            max_students,
            max_institutions,
            max_capacity,
        }),
        _ => Err(format!("{BUDGET_VAR} must be students,institutions,capacity")),
    }
}

fn objective(spec: &str) -> Result<Box<dyn Objective<Rational>>, String> {
    if let Some(g) = builtin(spec) {
        return Ok(g);
    }
    let Some(mix) = spec.strip_prefix("mix:") else {
        return Err(format!("unknown objective `{spec}`"));
    };
    let mut terms = Vec::new();
    for part in mix.split(',') {
        let (name, coef) = part
            .split_once('=')
            .ok_or_else(|| format!("mix term `{part}` must read name=coefficient"))?;
        let g = builtin(name.trim()).ok_or_else(|| format!("unknown objective `{name}` in mix"))?;
        let w = parse_rational(coef.trim()).map_err(|e| e.to_string())?;
        terms.push((w, g));
    }
    if terms.is_empty() {
        return Err("empty mix".into());
    }
    Ok(Box::new(WeightedSum { terms }))
}

fn run(command: Command) -> Result<Output, String> {
    match command {
        Command::Validate { instance } => {
            let inst = load(&instance)?;
            let mut r = ReportFile::new("validate", &inst);
            r.diagnostics = json!({
                "students": inst.num_students(),
                "institutions": inst.num_institutions(),
                "categories": inst.num_categories(),
                "edges": inst.num_edges(),
                "families": inst.families().len(),
                "counting_rule": inst.counting_rule(),
            });
            Ok(Output::Report(r))
        }
        Command::Da { instance, trace } => {
            let inst = load(&instance)?;
            let started = Instant::now();
            let state = if trace {
                init_state_traced(&inst)
            } else {
                init_state(&inst)
            };
            let wall = started.elapsed();
            let mut r = ReportFile::new("da", &inst);
            r.matching = Some(matching_entries(&inst, &state.matching()));
            r.diagnostics = json!({ "stats": state.stats(), "edges": inst.num_edges() });
            if let Some(failure) = state.failure() {
                r.diagnostics["failure"] = with_ids(&inst, json!(failure));
            }
            r.timing = json!({ "wall_ms": wall.as_secs_f64() * 1e3 });
            if let Some(events) = state.trace() {
                r.extra = Some(json!({ "trace": with_ids(&inst, json!(events)) }));
            }
            Ok(Output::Report(r))
        }
        Command::Dcda { instance } => {
            let inst = load(&instance)?;
            let started = Instant::now();
            let result = dc_da(&inst).map_err(|e| e.to_string())?;
            let mut r = ReportFile::new("dcda", &inst);
            r.timing = json!({ "wall_ms": started.elapsed().as_secs_f64() * 1e3 });
            r.diagnostics = with_ids(&inst, json!(result.report()));
            match result {
                DcDaResult::Solution { matching, .. } => {
                    r.matching = Some(matching_entries(&inst, &matching));
                    Ok(Output::Report(r))
                }
                DcDaResult::NoSolution { witness, .. } => {
                    r.status = "no_solution".into();
                    r.extra = Some(json!({ "witness": with_ids(&inst, json!(witness)) }));
                    Ok(Output::NoSolution(r))
                }
            }
        }
        Command::EgalDcda { instance } => {
            let inst = load(&instance)?;
            let started = Instant::now();
            let (delta, matching, report) = egalitarian_dcda(&inst).map_err(|e| e.to_string())?;
            let mut r = ReportFile::new("egal-dcda", &inst);
            r.timing = json!({ "wall_ms": started.elapsed().as_secs_f64() * 1e3 });
            r.objective = Some(matchopt::io::ObjectiveEntry {
                name: "one2all-max".into(),
                mode: "egalitarian".into(),
                value: delta.to_string(),
            });
            r.matching = Some(matching_entries(&inst, &matching));
            r.diagnostics = with_ids(&inst, json!(report));
            Ok(Output::Report(r))
        }
        Command::StableSets { instance, side } => {
            let inst = load(&instance)?;
            let side = match side {
                Side::Institutions => AgentSide::Institutions,
                Side::Students => AgentSide::Students,
            };
            let started = Instant::now();
            let cat = enumerate_stable_sets(&inst, side);
            type Name = fn(&Instance, usize) -> &str;
            let (agent_id, partner_id): (Name, Name) = match side {
                AgentSide::Institutions => (Instance::institution_id, Instance::student_id),
                AgentSide::Students => (Instance::student_id, Instance::institution_id),
            };
            let agents: Vec<Value> = cat
                .agents
                .iter()
                .map(|a| {
                    let sets: Vec<Value> = a
                        .sets
                        .iter()
                        .map(|s| {
                            json!({
                                "partners": s.partners.iter().map(|&p| partner_id(&inst, p)).collect::<Vec<_>>(),
                                "top": s.top().map(|p| partner_id(&inst, p)),
                                "cutoff": s.cutoff().map(|p| partner_id(&inst, p)),
                            })
                        })
                        .collect();
                    json!({
                        "agent": agent_id(&inst, a.agent),
                        "empty_everywhere": a.empty_everywhere,
                        "sets": sets,
                    })
                })
                .collect();
            let mut r = ReportFile::new("stable-sets", &inst);
            r.timing = json!({ "wall_ms": started.elapsed().as_secs_f64() * 1e3 });
            r.diagnostics = json!({ "side": cat.side, "total_sets": cat.total_sets(), "work": cat.work });
            r.extra = Some(json!({ "catalog": agents }));
            Ok(Output::Report(r))
        }
        Command::Solve(args) => solve(args),
        Command::Enumerate { instance } => {
            let inst = load(&instance)?;
            let budget = budget()?;
            let started = Instant::now();
            let all = enumerate_all_stable(&inst, &budget).map_err(|e| e.to_string())?;
            let mut r = ReportFile::new("enumerate", &inst);
            r.timing = json!({ "wall_ms": started.elapsed().as_secs_f64() * 1e3 });
            r.diagnostics = json!({ "count": all.len() });
            let list: Vec<Value> = all
                .matchings
                .iter()
                .map(|m| json!(matching_entries(&inst, m)))
                .collect();
            r.extra = Some(json!({ "matchings": list }));
            Ok(Output::Report(r))
        }
        Command::Gen(args) => {
            let file = generate_random(&args.params(), args.seed).map_err(|e| e.to_string())?;
            Ok(Output::Document(file.to_json()))
        }
        Command::Bench { gen, max_edges } => {
            let base = gen.params();
            let sweep = doubling_sweep(&base, base.n_students, max_edges);
            let rows = bench_dcda(&sweep, gen.seed).map_err(|e| e.to_string())?;
            let ratios: Vec<Value> = rows
                .windows(2)
                .map(|w| {
                    json!({
                        "edges": w[1].edges as f64 / w[0].edges as f64,
                        "proposals": w[1].proposals as f64 / w[0].proposals.max(1) as f64,
                        "wall": w[1].wall.as_secs_f64() / w[0].wall.as_secs_f64().max(1e-9),
                    })
                })
                .collect();
            let doc = json!({
                "command": "bench",
                "seed": gen.seed,
                "rows": rows,
                "doubling_ratios": ratios,
            });
            Ok(Output::Document(serde_json::to_string_pretty(&doc).expect("serializable")))
        }
    }
}

fn solve(args: SolveArgs) -> Result<Output, String> {
    let inst = load(&args.instance)?;
    let g = objective(&args.objective)?;
    let costs = match (&args.two_sided, args.instance_costs) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            let file: StudentCostFile =
                serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
            Some(file.to_costs(&inst).map_err(|e| format!("{}: {e}", path.display()))?)
        }
        (None, true) => Some(instance_costs(&inst)),
        (None, false) => None,
    };
    if costs.is_some() && (args.student_optimal || matches!(args.mode, Mode::Egalitarian)) {
        return Err("student costs combine only with the plain utilitarian mode".into());
    }
    let mode = match args.mode {
        Mode::Utilitarian => SolveMode::Utilitarian,
        Mode::Egalitarian => SolveMode::Egalitarian,
    };
    let solver = Solver::new(&inst);
    let mut report = match (&costs, args.student_optimal) {
        (Some(h), _) => solver.solve_two_sided(g.as_ref(), h),
        (None, true) => solver.solve_student_optimal(g.as_ref(), mode),
        (None, false) => match mode {
            SolveMode::Utilitarian => solver.solve_utilitarian(g.as_ref()),
            _ => solver.solve_egalitarian(g.as_ref()),
        },
    };
    if args.check {
        let all = enumerate_all_stable(&inst, &budget()?).map_err(|e| e.to_string())?;
        let oracle_mode = match (&costs, mode) {
            (Some(h), _) => OracleMode::TwoSided(h),
            (None, SolveMode::Utilitarian) => OracleMode::Utilitarian,
            (None, _) => OracleMode::Egalitarian,
        };
        let (best, _) = optimum_over(&inst, g.as_ref(), oracle_mode, &all);
        if best != report.value {
            return Err(format!(
                "oracle disagrees: solver {} vs oracle {}",
                format_rational(&report.value),
                format_rational(&best)
            ));
        }
        report.oracle_value = Some(best);
    }
    let mut r = solve_report("solve", &inst, &report, args.weights);
    if inst.counting_rule() == CountingRule::OneToAll {
        let violations: usize = bound_status(&inst, &report.matching)
            .iter()
            .map(|b| b.lower_violation + b.upper_violation)
            .sum();
        if let Value::Object(map) = &mut r.diagnostics {
            map.insert("bound_violations".into(), json!(violations));
        }
    }
    Ok(Output::Report(r))
}
