//! Command-line interface.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mmu_core::benders::Separation;
use mmu_core::eval::{aggregate_realization, apply_outbreaks, sample_budget_set, sample_history, sample_interval_box, OutbreakParams, Realization};
use mmu_core::instgen::{generate_instance, GeneratorConfig};
use mmu_core::model::{expand_sessions, SessionSpec, SteerableScope};
use mmu_core::robust::{build_subsetsum_reduction, separate_budgeted_bruteforce, separate_budgeted_mip};
use mmu_core::{Instance, Plan, SolveConfig, SolveError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::backend::{solver_for, BackendKind, BACKEND_ENV};
use crate::io::{read_cells, read_generator_config, read_instance, read_plan, write_cells, write_instance, write_plan, CellsFile, GeneratorConfigJson, PlanJson};
use crate::report::{write_cdf, write_lines, write_summary, write_sweep, write_violations};
use crate::run::{evaluate_parallel, parse_grid, solve_model, sweep, ModelKind, RunOptions};

/// Exit code for a proven infeasible or robust-infeasible instance.
pub const EXIT_INFEASIBLE: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "mmu", version, about = "Exact strategic planning of mobile medical unit services")]
pub struct Cli {
    /// MILP backend.
    #[arg(long, global = true, env = BACKEND_ENV, default_value = "highs")]
    pub backend: String,
    /// Worker threads for evaluation and sweeps (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Log iteration lines and progress to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic instance plus its cells sidecar.
    Generate(GenerateArgs),
    /// Solve one model and write the plan.
    Solve(SolveArgs),
    /// Evaluate plans on sampled demand realizations.
    Evaluate(EvaluateArgs),
    /// Objective tables over (delta, omega) grids on a fixed geometry.
    Sweep(SweepArgs),
    /// Emit the subset-sum reduction instance for a separation problem.
    ReduceSubsetsum(ReduceArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    DetCompact,
    DetBenders,
    Interval,
    Budgeted,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::DetCompact => ModelKind::DetCompact,
            ModelArg::DetBenders => ModelKind::DetBenders,
            ModelArg::Interval => ModelKind::Interval,
            ModelArg::Budgeted => ModelKind::Budgeted,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum SeparationArg {
    #[default]
    Mincut,
    Lp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum ScopeArg {
    /// Steerable demand may move to any session.
    #[default]
    All,
    /// Steerable demand stays in its own session.
    Same,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SampleMode {
    /// Fresh weekly histories from the cells sidecar.
    History,
    /// Uniform draws from the budgeted uncertainty sets.
    Budgeted,
    /// Uniform draws from the interval boxes.
    Box,
}

/// Generator parameters; flags override the config file.
#[derive(Debug, Args)]
pub struct GeneratorArgs {
    /// JSON generator config (missing keys take defaults).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long)]
    pub delta_km: Option<f64>,
    #[arg(long)]
    pub n_cells: Option<usize>,
    #[arg(long)]
    pub n_sites: Option<usize>,
    #[arg(long)]
    pub n_practices: Option<usize>,
    #[arg(long)]
    pub weeks: Option<usize>,
}

impl GeneratorArgs {
    fn config(&self) -> Result<GeneratorConfig> {
        let mut cfg = match &self.config {
            Some(p) => read_generator_config(p)?,
            None => GeneratorConfig::default(),
        };
        if let Some(x) = self.seed {
            cfg.seed = x;
        }
        if let Some(x) = self.omega {
            cfg.omega = x;
        }
        if let Some(x) = self.delta_km {
            cfg.delta_km = x;
        }
        if let Some(x) = self.n_cells {
            cfg.n_cells = x;
        }
        if let Some(x) = self.n_sites {
            cfg.n_sites = x;
        }
        if let Some(x) = self.n_practices {
            cfg.n_practices = x;
        }
        if let Some(x) = self.weeks {
            cfg.weeks = x;
        }
        cfg.check()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub generator: GeneratorArgs,
    /// Output directory (instance.json, cells.json, generator.json).
    #[arg(long, short)]
    pub out: PathBuf,
}

/// Solver limits shared by solving subcommands.
#[derive(Debug, Args)]
pub struct SolverArgs {
    #[arg(long, value_enum, default_value_t = SeparationArg::Mincut)]
    pub separation: SeparationArg,
    /// Wall-clock limit per MILP solve, seconds.
    #[arg(long)]
    pub time_limit: Option<f64>,
    /// Relative MIP gap; objectives are exact while below 1/gap.
    #[arg(long, default_value_t = 1e-4)]
    pub mip_gap: f64,
    /// Cap on cut-loop iterations.
    #[arg(long)]
    pub max_iterations: Option<usize>,
}

impl SolverArgs {
    fn options(&self) -> RunOptions {
        let separation = match self.separation {
            SeparationArg::Mincut => Separation::MinCut,
            SeparationArg::Lp => Separation::Lp,
        };
        RunOptions { separation, max_iterations: self.max_iterations }
    }

    fn config(&self) -> Result<SolveConfig> {
        if !(self.mip_gap >= 0.0 && self.mip_gap < 1.0) {
            bail!("--mip-gap must lie in [0, 1)");
        }
        if self.time_limit.is_some_and(|t| !(t > 0.0)) {
            bail!("--time-limit must be positive");
        }
        Ok(SolveConfig { time_limit_secs: self.time_limit, threads: 1, mip_gap: self.mip_gap })
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long, short)]
    pub instance: PathBuf,
    #[arg(long, short, value_enum)]
    pub model: ModelArg,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Comma-separated session labels; expands every site and practice per session.
    #[arg(long, value_delimiter = ',')]
    pub sessions: Option<Vec<String>>,
    #[arg(long, value_enum, default_value_t = ScopeArg::All, requires = "sessions")]
    pub session_scope: ScopeArg,
    /// JSON map practice id -> per-session capacities.
    #[arg(long, requires = "sessions")]
    pub practice_caps: Option<PathBuf>,
    /// Write the session-expanded instance here.
    #[arg(long, requires = "sessions")]
    pub expanded_out: Option<PathBuf>,
    /// Plan output path.
    #[arg(long, short, default_value = "plan.json")]
    pub out: PathBuf,
    /// Iteration log output path.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long, short)]
    pub instance: PathBuf,
    /// Plan to evaluate as NAME=PATH; repeatable.
    #[arg(long = "plan", value_parser = parse_named_path)]
    pub plans: Vec<(String, PathBuf)>,
    /// Models to solve and evaluate in place of (or next to) given plans.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub solve: Vec<ModelArg>,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, value_enum, default_value_t = SampleMode::History)]
    pub mode: SampleMode,
    /// Cells sidecar (history mode and outbreaks).
    #[arg(long)]
    pub cells: Option<PathBuf>,
    /// Walk-in probability in history mode (defaults to the sidecar value).
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long, short = 'n', default_value_t = 520)]
    pub realizations: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Number of outbreak centers per realization (0 = none).
    #[arg(long, default_value_t = 0)]
    pub outbreaks: usize,
    #[arg(long, default_value_t = 1.0)]
    pub outbreak_radius_km: f64,
    #[arg(long, default_value_t = 2)]
    pub outbreak_factor: u64,
    /// Box draws per budgeted sample before the exact sampler takes over.
    #[arg(long, default_value_t = 10_000)]
    pub max_attempts: usize,
    /// Output directory (violations.csv, summary.csv, cdf.csv).
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub generator: GeneratorArgs,
    /// Walk-in shares as `a..b` or a comma list.
    #[arg(long, default_value = "0.2..0.45")]
    pub omega_range: String,
    #[arg(long, default_value_t = 0.05)]
    pub omega_step: f64,
    /// Maximum driving distances in km.
    #[arg(long, value_delimiter = ',', default_value = "8")]
    pub delta_list: Vec<f64>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "det-compact,interval,budgeted")]
    pub models: Vec<ModelArg>,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Output directory (objectives.csv, timings.csv).
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReduceArgs {
    /// Multiset A as a comma list.
    #[arg(long, value_delimiter = ',', required = true)]
    pub a: Vec<u64>,
    /// Target B.
    #[arg(long)]
    pub b: u64,
    /// Also solve the separation problem on the emitted instance.
    #[arg(long)]
    pub check: bool,
    /// Output directory (instance.json, plan.json).
    #[arg(long, short)]
    pub out: PathBuf,
}

fn parse_named_path(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => Ok((name.to_string(), PathBuf::from(path))),
        _ => Err(format!("expected NAME=PATH, got `{s}`")),
    }
}

fn verdict(e: &SolveError) -> Option<&'static str> {
    match e {
        SolveError::Infeasible => Some("infeasible: no operation plan covers the nominal demand"),
        SolveError::RobustInfeasible => Some("robust infeasible: no operation plan covers the worst-case demand"),
        _ => None,
    }
}

pub fn run(cli: Cli) -> Result<ExitCode> {
    let backend: BackendKind = cli.backend.parse().map_err(|e: String| anyhow!(e))?;
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global().ok();
    }
    match cli.command {
        Command::Generate(a) => cmd_generate(&a),
        Command::Solve(a) => cmd_solve(&a, backend),
        Command::Evaluate(a) => cmd_evaluate(&a, backend),
        Command::Sweep(a) => cmd_sweep(&a, backend),
        Command::ReduceSubsetsum(a) => cmd_reduce(&a, backend),
    }
}

fn cmd_generate(a: &GenerateArgs) -> Result<ExitCode> {
    let cfg = a.generator.config()?;
    let g = generate_instance(&cfg)?;
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    write_instance(&g.instance, &a.out.join("instance.json"))?;
    write_cells(&CellsFile::new(&g.instance, &g.cells, g.dispersion, g.omega), &a.out.join("cells.json"))?;
    let mut text = serde_json::to_string_pretty(&GeneratorConfigJson::from(cfg))?;
    text.push('\n');
    std::fs::write(a.out.join("generator.json"), text)?;
    for n in &g.notes {
        log::info!("{}", n);
    }
    let (g1, g2) = match g.instance.uncertainty {
        mmu_core::UncertaintyModel::Budgeted { gamma_steerable, gamma_walkin } => (gamma_steerable, gamma_walkin),
        _ => (0, 0),
    };
    println!(
        "origins={} sites={} practices={} gamma_steerable={} gamma_walkin={}",
        g.instance.origins.len(),
        g.instance.sites.len(),
        g.instance.practices.len(),
        g1,
        g2
    );
    Ok(ExitCode::SUCCESS)
}

fn session_spec(a: &SolveArgs, inst: &Instance) -> Result<Option<SessionSpec>> {
    let Some(labels) = &a.sessions else { return Ok(None) };
    let practice_caps = match &a.practice_caps {
        None => None,
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let map: std::collections::BTreeMap<String, Vec<u64>> = serde_json::from_str(&text)?;
            let mut caps = Vec::with_capacity(inst.practices.len());
            for p in &inst.practices {
                let row = map.get(&p.id).ok_or_else(|| anyhow!("practice caps missing `{}`", p.id))?;
                if row.len() != labels.len() {
                    bail!("practice caps for `{}` need {} entries", p.id, labels.len());
                }
                caps.push(row.clone());
            }
            Some(caps)
        }
    };
    let scope = match a.session_scope {
        ScopeArg::All => SteerableScope::AllSessions,
        ScopeArg::Same => SteerableScope::SameSession,
    };
    Ok(Some(SessionSpec { labels: labels.clone(), practice_caps, scope }))
}

fn cmd_solve(a: &SolveArgs, backend: BackendKind) -> Result<ExitCode> {
    let config = a.solver.config()?;
    let base = read_instance(&a.instance)?;
    let inst = match session_spec(a, &base)? {
        Some(spec) => {
            let ex = expand_sessions(&base, &spec)?;
            if let Some(p) = &a.expanded_out {
                write_instance(&ex.instance, p)?;
            }
            ex.instance
        }
        None => base,
    };
    let model: ModelKind = a.model.into();
    let solver = solver_for(backend);
    let report = match solve_model(&inst, model, &a.solver.options(), solver.as_ref(), &config) {
        Ok(r) => r,
        Err(e) => {
            if let Some(v) = verdict(&e) {
                eprintln!("{v}");
                return Ok(ExitCode::from(EXIT_INFEASIBLE));
            }
            return Err(e.into());
        }
    };
    if let Some(p) = &a.log {
        write_lines(&report.trace.iter().map(|r| r.to_string()).collect::<Vec<_>>(), p)?;
    }
    let mut json = PlanJson::from_plan(&inst, &report.plan);
    json.model = Some(model.name().into());
    json.objective = Some(report.objective);
    json.proven_optimal = Some(report.proven_optimal);
    write_plan(&json, &a.out)?;
    if !report.proven_optimal {
        eprintln!("warning: solver limit reached, plan is feasible but not proven optimal");
    }
    println!(
        "model={} backend={} objective={} proven_optimal={} iterations={} cuts={}",
        model,
        solver.name(),
        report.objective,
        report.proven_optimal,
        report.iterations,
        report.cuts
    );
    Ok(ExitCode::SUCCESS)
}

fn realizations(a: &EvaluateArgs, inst: &Instance) -> Result<Vec<Realization>> {
    let cells = match &a.cells {
        Some(p) => Some(read_cells(p)?),
        None => None,
    };
    if a.outbreaks > 0 && cells.is_none() {
        bail!("--outbreaks needs --cells");
    }
    let records = cells.as_ref().map(|c| c.records(inst)).transpose()?;
    let per_cell = match a.mode {
        SampleMode::History => {
            let c = cells.as_ref().ok_or_else(|| anyhow!("history mode needs --cells"))?;
            Some(sample_history(records.as_deref().unwrap_or_default(), c.dispersion, a.omega.unwrap_or(c.omega), a.realizations, a.seed)?)
        }
        _ => None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed ^ 0x5eed_0b5e);
    let params = OutbreakParams { centers: a.outbreaks, radius_km: a.outbreak_radius_km, factor: a.outbreak_factor };
    match per_cell {
        Some(list) => {
            let cells = records.as_deref().unwrap_or_default();
            Ok(list
                .into_iter()
                .map(|r| {
                    let r = if a.outbreaks > 0 {
                        let (r, centers) = apply_outbreaks(cells, &r, &params, &mut rng);
                        log::info!("realization {} outbreak centers {:?}", r.id, centers);
                        r
                    } else {
                        r
                    };
                    aggregate_realization(cells, &r, inst.origins.len())
                })
                .collect())
        }
        None => {
            if a.outbreaks > 0 {
                bail!("outbreaks perturb cells and apply to history mode only");
            }
            Ok(match a.mode {
                SampleMode::Budgeted => sample_budget_set(inst, a.realizations, a.seed, a.max_attempts)?,
                _ => sample_interval_box(inst, a.realizations, a.seed)?,
            })
        }
    }
}

fn cmd_evaluate(a: &EvaluateArgs, backend: BackendKind) -> Result<ExitCode> {
    if a.plans.is_empty() && a.solve.is_empty() {
        bail!("nothing to evaluate: pass --plan NAME=PATH or --solve MODELS");
    }
    let config = a.solver.config()?;
    let inst = read_instance(&a.instance)?;
    let mut plans: Vec<(String, Plan)> = Vec::new();
    for (name, path) in &a.plans {
        let (plan, _) = read_plan(path, &inst)?;
        plans.push((name.clone(), plan));
    }
    let solver = solver_for(backend);
    for &m in &a.solve {
        let m: ModelKind = m.into();
        match solve_model(&inst, m, &a.solver.options(), solver.as_ref(), &config) {
            Ok(r) => plans.push((m.name().into(), r.plan)),
            Err(e) => {
                if let Some(v) = verdict(&e) {
                    eprintln!("{m}: {v}");
                    return Ok(ExitCode::from(EXIT_INFEASIBLE));
                }
                return Err(e.into());
            }
        }
    }
    let rs = realizations(a, &inst)?;
    let report = evaluate_parallel(&inst, &plans, &rs);
    std::fs::create_dir_all(&a.out)?;
    write_violations(&report, &a.out.join("violations.csv"))?;
    write_summary(&report, &a.out.join("summary.csv"))?;
    write_cdf(&report, &a.out.join("cdf.csv"))?;
    for s in &report.summaries {
        println!("model={} mean={:.6} max={} p95={} cost={}", s.model, s.mean, s.max, s.p95, s.cost);
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(a: &SweepArgs, backend: BackendKind) -> Result<ExitCode> {
    let base = a.generator.config()?;
    let config = a.solver.config()?;
    let omegas = parse_grid(&a.omega_range, a.omega_step).map_err(|e| anyhow!(e))?;
    if a.delta_list.is_empty() || a.models.is_empty() {
        bail!("empty --delta-list or --models");
    }
    let models: Vec<ModelKind> = a.models.iter().map(|&m| m.into()).collect();
    let rows = sweep(&base, &a.delta_list, &omegas, &models, &a.solver.options(), &config, || solver_for(backend))?;
    write_sweep(&rows, &a.out.join("objectives.csv"), &a.out.join("timings.csv"))?;
    for r in &rows {
        println!(
            "delta_km={} omega={} model={} objective={}",
            r.delta_km,
            r.omega,
            r.model,
            r.objective.map(|o| o.to_string()).unwrap_or_else(|| "infeasible".into())
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_reduce(a: &ReduceArgs, backend: BackendKind) -> Result<ExitCode> {
    if a.a.iter().any(|&x| x == 0) || a.b == 0 {
        bail!("subset-sum entries and target must be positive");
    }
    let (inst, plan) = build_subsetsum_reduction(&a.a, a.b);
    std::fs::create_dir_all(&a.out)?;
    write_instance(&inst, &a.out.join("instance.json"))?;
    write_plan(&PlanJson::from_plan(&inst, &plan), &a.out.join("plan.json"))?;
    if a.check {
        let solver = solver_for(backend);
        let sep = separate_budgeted_mip(&inst, &plan.sessions, &plan.walkin_route, solver.as_ref(), &SolveConfig::default())?;
        let value = match &sep.witness {
            mmu_core::benders::Witness::Mip(w) => w.objective,
            _ => 0,
        };
        println!("separation_value={} violated={}", value, sep.violated);
        if inst.origins.len() <= mmu_core::robust::BRUTE_FORCE_LIMIT {
            let brute = separate_budgeted_bruteforce(&inst, &plan.sessions, &plan.walkin_route)?;
            println!("bruteforce_violated={}", brute.violated);
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// Parse arguments, set up logging and run.
pub fn main_entry() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).format_timestamp(None).init();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
