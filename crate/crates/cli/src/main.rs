use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mttd::experiments::{self, ExperimentReport};
use mttd::instance::{generate_mt_instance, parse_solomon, synthetic_solomon, vary_sdl_density, Instance, MtConfig, SolomonClass};
use mttd::milp::{brute_force, export_milp};
use mttd::solver::{solve, Mode, SolverConfig, Variant};
use mttd::Error;

const EXIT_ERROR: u8 = 1;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_TIMEOUT: u8 = 4;

#[derive(Parser)]
#[command(name = "mttd", version, about = "Time-dependent mixed-fleet routing with shared delivery locations")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve one instance.
    Solve(SolveArgs),
    /// Generate an instance from Solomon-style records.
    Generate(GenerateArgs),
    /// Derive an SDL-density variant of an instance.
    Density(DensityArgs),
    /// Write the MILP model of a small instance as an LP file.
    ExportMilp(ExportArgs),
    /// Solve a small instance exactly by enumeration.
    Oracle(OracleArgs),
    /// Compare algorithm variants.
    Ablate(AblateArgs),
    /// Local-search operator statistics with and without learned selection.
    OpStats(OpStatsArgs),
    /// Solve every SDL-density level of a base instance.
    SdlSweep(SweepArgs),
    /// Solve a set of instances over several seeds.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    MttdMvrp,
    DmTdvrptw,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    AlnsLs,
    Alns,
    Ls,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Variant {
        match v {
            VariantArg::AlnsLs => Variant::AlnsLs,
            VariantArg::Alns => Variant::Alns,
            VariantArg::Ls => Variant::Ls,
        }
    }
}

#[derive(Args, Clone)]
struct SolverArgs {
    /// Solver configuration file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override any configuration key, e.g. `--set alns.r_max=0.3`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = "MTTD_THREADS")]
    threads: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    stagnation_iterations: Option<usize>,
    /// Seconds without a new best.
    #[arg(long)]
    stagnation_seconds: Option<f64>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long, value_enum)]
    markov: Option<Switch>,
}

impl SolverArgs {
    fn config(&self) -> anyhow::Result<SolverConfig> {
        let mut table: toml::Table = match &self.config {
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
                text.parse().with_context(|| format!("{} is not valid TOML", p.display()))?
            }
            None => toml::Table::new(),
        };
        for kv in &self.set {
            let (key, value) = kv.split_once('=').with_context(|| format!("--set expects KEY=VALUE, got `{kv}`"))?;
            set_key(&mut table, key.trim(), value.trim())?;
        }
        let mut cfg: SolverConfig = table.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.threads {
            cfg.threads = v;
        }
        if let Some(v) = self.batch_size {
            cfg.batch_size = v;
        }
        if self.time_limit.is_some() {
            cfg.time_limit = self.time_limit;
        }
        if self.max_iterations.is_some() {
            cfg.max_iterations = self.max_iterations;
        }
        if self.stagnation_iterations.is_some() {
            cfg.stagnation_iterations = self.stagnation_iterations;
        }
        if self.stagnation_seconds.is_some() {
            cfg.stagnation_seconds = self.stagnation_seconds;
        }
        if let Some(m) = self.mode {
            cfg.mode = match m {
                ModeArg::MttdMvrp => Mode::MttdMvrp,
                ModeArg::DmTdvrptw => Mode::DmTdvrptw,
            };
        }
        if let Some(m) = self.markov {
            cfg.ls.markov = matches!(m, Switch::On);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn set_key(table: &mut toml::Table, key: &str, value: &str) -> anyhow::Result<()> {
    let parsed: toml::Value = match format!("v = {value}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(value.to_string()),
    };
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).with_context(|| format!("empty key in `{key}`"))?;
    let mut cur = table;
    for p in parts {
        cur = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .with_context(|| format!("`{p}` is not a section"))?;
    }
    cur.insert(last.to_string(), parsed);
    Ok(())
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, value_enum, default_value = "alns-ls")]
    variant: VariantArg,
    /// Solution JSON output.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Search record JSON output.
    #[arg(long)]
    record: Option<PathBuf>,
    /// Store wall-clock times in the search record.
    #[arg(long)]
    record_timing: bool,
    /// CSV file to append a report row to.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    /// Customer count of the synthetic seed data.
    #[arg(long, default_value_t = 25)]
    n: usize,
    #[arg(long, default_value = "r")]
    class: SolomonClass,
    /// Seed of the synthetic Solomon-style records.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Seed of the MT attributes (defaults to `--seed`).
    #[arg(long)]
    rng_seed: Option<u64>,
    /// Use records from a Solomon-format file instead of synthetic ones.
    #[arg(long)]
    solomon: Option<PathBuf>,
    /// Keep only the first N customers of the records.
    #[arg(long)]
    take: Option<usize>,
    /// Generator settings (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Probability that a customer accepts AEV service.
    #[arg(long)]
    accept_aev: Option<f64>,
    /// Probability that a customer accepts SDL delivery.
    #[arg(long)]
    accept_sdl: Option<f64>,
    /// Apply an SDL-density level (seeded by `--seed`) after generation.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=7))]
    density_level: Option<u8>,
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct DensityArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=7))]
    level: u8,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Largest customer count attempted.
    #[arg(long, default_value_t = mttd::milp::BRUTE_FORCE_GUARD)]
    guard: usize,
    /// Solution JSON output.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct AblateArgs {
    #[arg(long, required = true, num_args = 1..)]
    instances: Vec<PathBuf>,
    /// Variants to run (all when omitted).
    #[arg(long, value_enum)]
    variant: Vec<VariantArg>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    seeds: Vec<u64>,
    #[arg(long)]
    parallel_instances: bool,
    #[command(flatten)]
    solver: SolverArgs,
    /// Report CSV (stdout when omitted).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct OpStatsArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Learned selection setting(s) to run (both when omitted).
    #[arg(long = "with-markov", value_enum)]
    with_markov: Vec<Switch>,
    #[arg(long, default_value_t = 50)]
    repeats: usize,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Base instance.
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6,7",
          value_parser = clap::value_parser!(u8).range(1..=7))]
    levels: Vec<u8>,
    /// Solves per level, seeded `seed, seed + 1, ...`.
    #[arg(long, default_value_t = 10)]
    runs: u64,
    #[arg(long, default_value_t = 1)]
    density_seed: u64,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, required = true, num_args = 1..)]
    instances: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    seeds: Vec<u64>,
    /// CSV with columns `instance,reference` for the gap column.
    #[arg(long)]
    baseline: Option<PathBuf>,
    #[arg(long)]
    parallel_instances: bool,
    #[arg(long, value_enum, default_value = "alns-ls")]
    variant: VariantArg,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Append per-group mean rows.
    #[arg(long)]
    aggregate: bool,
}

fn load(path: &Path) -> anyhow::Result<Instance> {
    Ok(Instance::from_path(path)?)
}

fn write_out(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_report(path: Option<&Path>, report: &ExperimentReport) -> anyhow::Result<()> {
    write_out(path, &report.to_csv()?)
}

fn warn_dm(inst: &Instance, cfg: &SolverConfig) {
    if cfg.mode == Mode::DmTdvrptw && inst.has_mixed_content() {
        eprintln!("warning: {}: SDL, AEV and fixed-cost content ignored in dm-tdvrptw mode", inst.name());
    }
}

fn cmd_solve(a: SolveArgs) -> anyhow::Result<()> {
    let inst = load(&a.instance)?;
    let mut cfg = a.solver.config()?;
    cfg.variant = a.variant.into();
    cfg.record_timing |= a.record_timing;
    warn_dm(&inst, &cfg);
    let out = solve(&inst, &cfg)?;
    let solved = match cfg.mode {
        Mode::MttdMvrp => inst.clone(),
        Mode::DmTdvrptw => inst.to_dm_tdvrptw()?,
    };
    if let Some(p) = &a.output {
        write_out(Some(p), &out.best.to_file(&solved).to_json())?;
    }
    if let Some(p) = &a.record {
        write_out(Some(p), &serde_json::to_string_pretty(&out.record)?)?;
    }
    if let Some(p) = &a.report {
        let fresh = !p.exists() || fs::metadata(p)?.len() == 0;
        let mut row = experiments::summarize(&experiments::group_of(inst.name()), &inst, experiments::variant_label(cfg.variant), &[cfg.seed], std::slice::from_ref(&out), false);
        row.reference = row.c_best;
        row.gap_pct = 0.0;
        let f = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(p)
            .with_context(|| format!("cannot open {}", p.display()))?;
        experiments::append_rows(f, &[row], fresh)?;
    }
    let routes = out.best.route_sequences().count();
    println!(
        "{}: cost {:.6} routes {} iterations {} time {:.3}s",
        inst.name(),
        out.best.total_cost(),
        routes,
        out.record.iterations.len(),
        out.elapsed
    );
    Ok(())
}

fn cmd_generate(a: GenerateArgs) -> anyhow::Result<()> {
    let mut records = match &a.solomon {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
            parse_solomon(&text)?
        }
        None => synthetic_solomon(a.class, a.n, a.seed),
    };
    if let Some(k) = a.take {
        records.customers.truncate(k);
    }
    let mut cfg = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
            toml::from_str::<MtConfig>(&text).with_context(|| format!("invalid generator settings in {}", p.display()))?
        }
        None => MtConfig::default(),
    };
    if a.name.is_some() {
        cfg.name = a.name.clone();
    }
    if let Some(p) = a.accept_aev {
        cfg.accept_aev = p;
    }
    if let Some(p) = a.accept_sdl {
        cfg.accept_sdl = p;
    }
    let mut inst = generate_mt_instance(&records, a.rng_seed.unwrap_or(a.seed), &cfg)?;
    if let Some(level) = a.density_level {
        inst = vary_sdl_density(&inst, level, a.seed)?;
    }
    inst.write(&a.output)?;
    println!("{}: {} customers written to {}", inst.name(), inst.n(), a.output.display());
    Ok(())
}

fn cmd_density(a: DensityArgs) -> anyhow::Result<()> {
    let base = load(&a.instance)?;
    let inst = vary_sdl_density(&base, a.level, a.seed)?;
    inst.write(&a.output)?;
    println!("{}: written to {}", inst.name(), a.output.display());
    Ok(())
}

fn cmd_export(a: ExportArgs) -> anyhow::Result<()> {
    let inst = load(&a.instance)?;
    let model = export_milp(&inst)?;
    write_out(Some(&a.output), &model.to_lp())?;
    println!(
        "{}: {} variables ({} binary), {} rows",
        inst.name(),
        model.vars.len(),
        model.binary_count(),
        model.rows.len()
    );
    Ok(())
}

fn cmd_oracle(a: OracleArgs) -> anyhow::Result<bool> {
    let inst = load(&a.instance)?;
    let exact = brute_force(&inst, a.guard)?;
    if !exact.feasible {
        println!("{}: infeasible", inst.name());
        return Ok(false);
    }
    if let Some(p) = &a.output {
        write_out(Some(p), &exact.to_solution(&inst)?.to_file(&inst).to_json())?;
    }
    println!("{}: optimum {:.6} routes {}", inst.name(), exact.objective, exact.routes.len());
    Ok(true)
}

fn load_all(paths: &[PathBuf]) -> anyhow::Result<Vec<Instance>> {
    paths.iter().map(|p| load(p)).collect()
}

fn cmd_ablate(a: AblateArgs) -> anyhow::Result<()> {
    let instances = load_all(&a.instances)?;
    let cfg = a.solver.config()?;
    let variants: Vec<Variant> = if a.variant.is_empty() {
        vec![Variant::AlnsLs, Variant::Alns, Variant::Ls]
    } else {
        a.variant.iter().map(|&v| v.into()).collect()
    };
    let report = experiments::ablate(&instances, &variants, &cfg, &a.seeds, a.parallel_instances)?;
    write_report(a.output.as_deref(), &report)
}

fn cmd_op_stats(a: OpStatsArgs) -> anyhow::Result<()> {
    let inst = load(&a.instance)?;
    let cfg = a.solver.config()?;
    let settings = if a.with_markov.is_empty() {
        vec![true, false]
    } else {
        a.with_markov.iter().map(|s| matches!(s, Switch::On)).collect()
    };
    let mut rows = Vec::new();
    for m in settings {
        let (r, total) = experiments::operator_stats(&inst, &cfg, m, a.repeats)?;
        eprintln!("markov {}: success ratio {:.4}", if m { "on" } else { "off" }, experiments::aggregate_success_ratio(&total));
        rows.extend(r);
    }
    write_out(a.output.as_deref(), &experiments::op_stats_csv(&rows)?)
}

fn cmd_sweep(a: SweepArgs) -> anyhow::Result<()> {
    let base = load(&a.instance)?;
    let cfg = a.solver.config()?;
    if a.runs == 0 {
        bail!("--runs must be at least 1");
    }
    let seeds: Vec<u64> = (0..a.runs).map(|k| cfg.seed + k).collect();
    let report = experiments::sdl_sweep(&base, &a.levels, a.density_seed, &cfg, &seeds)?;
    write_report(a.output.as_deref(), &report)
}

fn cmd_bench(a: BenchArgs) -> anyhow::Result<()> {
    let instances = load_all(&a.instances)?;
    let mut cfg = a.solver.config()?;
    cfg.variant = a.variant.into();
    for inst in &instances {
        warn_dm(inst, &cfg);
    }
    let baseline = match &a.baseline {
        Some(p) => Some(experiments::read_baseline(
            fs::File::open(p).with_context(|| format!("cannot open {}", p.display()))?,
        )?),
        None => None,
    };
    let mut report = experiments::bench(
        &instances,
        &cfg,
        experiments::variant_label(cfg.variant),
        &a.seeds,
        a.parallel_instances,
        baseline.as_ref(),
    )?;
    if a.aggregate {
        let agg = report.aggregate();
        report.rows.extend(agg.rows);
    }
    write_report(a.output.as_deref(), &report)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::ConstructionFailed { .. }) => EXIT_INFEASIBLE,
        Some(Error::TimeoutWithoutFeasible) => EXIT_TIMEOUT,
        _ => EXIT_ERROR,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Solve(a) => cmd_solve(a),
        Cmd::Generate(a) => cmd_generate(a),
        Cmd::Density(a) => cmd_density(a),
        Cmd::ExportMilp(a) => cmd_export(a),
        Cmd::Oracle(a) => match cmd_oracle(a) {
            Ok(true) => Ok(()),
            Ok(false) => return ExitCode::from(EXIT_INFEASIBLE),
            Err(e) => Err(e),
        },
        Cmd::Ablate(a) => cmd_ablate(a),
        Cmd::OpStats(a) => cmd_op_stats(a),
        Cmd::SdlSweep(a) => cmd_sweep(a),
        Cmd::Bench(a) => cmd_bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let _ = std::io::stderr().flush();
            ExitCode::from(exit_code(&e))
        }
    }
}
