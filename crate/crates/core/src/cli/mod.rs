//! Command-line experiment runner.
//!
//! Exit codes: 0 success, 2 invalid configuration or arguments, 3 unstable
//! scenario, 4 analytic fixed point or chain solve did not converge.

mod output;
mod sweep;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use output::{analytic_rows, sim_rows, write_rows, MetricRow, HEADER};
pub use sweep::{parse_values, run_sweep, SweepPoint, SweepSpec, SWEEP_HEADER};

use crate::analytic::{analyze, AnalyticOptions, FlowOptions, FogDelayTerm};
use crate::error::{Error, Result};
use crate::model::{presets, validate_config, FogDiscipline, PolicyMode, ScenarioConfig};
use crate::sim::{self, write_trace, SimOptions};
use crate::topology::{self, Topology};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_UNSTABLE: i32 = 3;
pub const EXIT_NO_CONVERGENCE: i32 = 4;

/// Exit code for a failure.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Unstable { .. } | Error::Overload { .. } => EXIT_UNSTABLE,
        Error::NoConvergence { .. } | Error::Numeric { .. } => EXIT_NO_CONVERGENCE,
        _ => EXIT_INVALID,
    }
}

#[derive(Debug, Parser)]
#[command(name = "fogsim", version, about = "IoT-fog-cloud offloading simulator and analytic model")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the discrete-event simulator.
    Simulate(SimulateArgs),
    /// Evaluate the analytic model.
    Analyze(AnalyzeArgs),
    /// Sweep one parameter over a list of values.
    Sweep(SweepArgs),
    /// Check a scenario and print every violation.
    Validate(ScenarioArgs),
    /// Write the generated topology as an edge list.
    ExportTopology(ExportArgs),
    /// List the built-in presets, or print one as TOML.
    Presets { name: Option<String> },
}

#[derive(Debug, Clone, Args)]
pub struct ScenarioArgs {
    /// Scenario TOML file or preset name.
    #[arg(long)]
    pub config: String,
    /// Override a numeric field, e.g. `domain.q=0.3` or `q=0.3`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct SimArgs {
    #[arg(long, default_value_t = 1_000_000)]
    pub requests: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Fog processor discipline; defaults to the scenario's.
    #[arg(long)]
    pub discipline: Option<FogDiscipline>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FogTermArg {
    ClassSojourn,
    MeanWait,
}

#[derive(Debug, Clone, Args)]
pub struct AnlArgs {
    /// Fog term of the delay recursion.
    #[arg(long, value_enum, default_value_t = FogTermArg::ClassSojourn)]
    pub fog_term: FogTermArg,
    /// Plain damped iteration instead of the bracketed secant update.
    #[arg(long)]
    pub damped: bool,
    #[arg(long)]
    pub max_iter: Option<usize>,
}

impl AnlArgs {
    pub fn options(&self) -> AnalyticOptions {
        let mut flow = FlowOptions {
            accelerate: !self.damped,
            ..FlowOptions::default()
        };
        if let Some(n) = self.max_iter {
            flow.max_iter = n;
        }
        AnalyticOptions {
            flow,
            fog_term: match self.fog_term {
                FogTermArg::ClassSojourn => FogDelayTerm::ClassSojourn,
                FogTermArg::MeanWait => FogDelayTerm::MeanWait,
            },
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, value_delimiter = ',', default_value = "afp,lfp,nfp")]
    pub mode: Vec<PolicyMode>,
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-request trace CSV; with several modes the mode is appended to the
    /// file stem.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, value_delimiter = ',', default_value = "afp,lfp,nfp")]
    pub mode: Vec<PolicyMode>,
    #[command(flatten)]
    pub anl: AnlArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EngineArg {
    Sim,
    Anl,
    Both,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// `param=v1,v2,...` or `param=start:stop:step`.
    #[arg(long)]
    pub sweep: String,
    #[arg(long, value_delimiter = ',', default_value = "afp,lfp,nfp")]
    pub mode: Vec<PolicyMode>,
    #[arg(long, value_enum, default_value_t = EngineArg::Sim)]
    pub engine: EngineArg,
    #[arg(long, default_value_t = 1)]
    pub reps: u32,
    #[command(flatten)]
    pub sim: SimArgs,
    #[command(flatten)]
    pub anl: AnlArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ExportArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Loads a scenario file, or a preset when no such file exists.
pub fn load_scenario(spec: &str) -> Result<ScenarioConfig> {
    let path = std::path::Path::new(spec);
    if path.exists() {
        return ScenarioConfig::load(path);
    }
    presets::preset(spec).ok_or_else(|| {
        Error::Parameter(format!(
            "`{spec}` is neither a readable file nor a preset ({})",
            presets::PRESET_NAMES.join(", ")
        ))
    })
}

/// Expands a bare key such as `q` to its dotted path when exactly one
/// section has it.
pub fn resolve_param(cfg: &ScenarioConfig, name: &str) -> Result<String> {
    if name.contains('.') {
        return Ok(name.to_string());
    }
    let doc: toml::Table =
        toml::from_str(&cfg.to_toml_string()).map_err(|e| Error::ConfigParse(e.to_string()))?;
    let mut hits: Vec<String> = doc
        .iter()
        .filter_map(|(section, v)| {
            let t = v.as_table()?;
            t.contains_key(name).then(|| format!("{section}.{name}"))
        })
        .collect();
    if name == "p_cloud" && hits.is_empty() {
        hits.push("iot.p_cloud".into());
    }
    match hits.len() {
        1 => Ok(hits.remove(0)),
        0 => Err(Error::Parameter(format!("unknown parameter `{name}`"))),
        _ => Err(Error::Parameter(format!("ambiguous parameter `{name}`: {}", hits.join(", ")))),
    }
}

pub fn apply_overrides(cfg: &mut ScenarioConfig, overrides: &[String]) -> Result<()> {
    for o in overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| Error::Parameter(format!("override `{o}` is not KEY=VALUE")))?;
        let value: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::Parameter(format!("override `{o}`: `{v}` is not a number")))?;
        let path = resolve_param(cfg, k.trim())?;
        cfg.set_param(&path, value)?;
    }
    Ok(())
}

/// Loads, overrides and validates a scenario, then builds its topology.
pub fn prepare(args: &ScenarioArgs) -> Result<(ScenarioConfig, Topology)> {
    let mut cfg = load_scenario(&args.config)?;
    apply_overrides(&mut cfg, &args.overrides)?;
    let topo = checked_topology(&cfg)?;
    Ok((cfg, topo))
}

pub(crate) fn checked_topology(cfg: &ScenarioConfig) -> Result<Topology> {
    let violations = validate_config(cfg);
    if !violations.is_empty() {
        return Err(Error::InvalidConfig(violations.iter().map(|v| v.to_string()).collect()));
    }
    topology::build(cfg)
}

/// Worker count for sweeps: `FOGSIM_THREADS` if set, else every core.
pub fn thread_count() -> Result<usize> {
    match std::env::var("FOGSIM_THREADS") {
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(Error::Parameter(format!("FOGSIM_THREADS must be a positive integer, got `{s}`"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn open_out(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn trace_path(base: &std::path::Path, mode: PolicyMode, several: bool) -> PathBuf {
    if !several {
        return base.to_path_buf();
    }
    let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("trace");
    let name = match base.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}_{mode}.{ext}"),
        None => format!("{stem}_{mode}"),
    };
    base.with_file_name(name)
}

pub(crate) fn sim_options(cfg: &ScenarioConfig, mode: PolicyMode, args: &SimArgs, seed: u64) -> Result<SimOptions> {
    if args.requests == 0 {
        return Err(Error::Parameter("n_requests must be ≥ 1".into()));
    }
    let mut o = SimOptions::from_config(cfg, mode, args.requests, seed);
    if let Some(d) = args.discipline {
        o.discipline = d;
    }
    Ok(o)
}

fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let (cfg, topo) = prepare(&a.scenario)?;
    let mut rows = Vec::new();
    for &mode in &a.mode {
        let mut o = sim_options(&cfg, mode, &a.sim, a.sim.seed)?;
        o.trace = a.trace.is_some();
        let m = sim::run(&topo, &o)?;
        if let Some(base) = &a.trace {
            let f = BufWriter::new(File::create(trace_path(base, mode, a.mode.len() > 1))?);
            write_trace(&m.trace, f)?;
        }
        rows.extend(sim_rows(&cfg.name, &m));
    }
    write_rows(&rows, open_out(&a.out)?)
}

fn cmd_analyze(a: &AnalyzeArgs) -> Result<()> {
    let (cfg, topo) = prepare(&a.scenario)?;
    let opts = a.anl.options();
    let mut rows = Vec::new();
    for &mode in &a.mode {
        let r = analyze(&topo, mode, &opts)?;
        rows.extend(analytic_rows(&cfg.name, mode, &r));
    }
    write_rows(&rows, open_out(&a.out)?)
}

fn cmd_sweep(a: &SweepArgs) -> Result<i32> {
    let mut cfg = load_scenario(&a.scenario.config)?;
    apply_overrides(&mut cfg, &a.scenario.overrides)?;
    let spec = SweepSpec::parse(&cfg, &a.sweep, a.reps, a.sim.seed)?;
    if a.sim.requests == 0 && a.engine != EngineArg::Anl {
        return Err(Error::Parameter("n_requests must be ≥ 1".into()));
    }
    let threads = thread_count()?;
    let points = run_sweep(&cfg, &spec, &a.mode, a.engine, &a.sim, &a.anl.options(), threads)?;
    sweep::write_points(&cfg.name, &spec, &points, open_out(&a.out)?)?;
    let failed: Vec<&SweepPoint> = points.iter().filter(|p| p.error.is_some()).collect();
    if let Some(first) = failed.first() {
        eprintln!("{} of {} sweep points failed", failed.len(), points.len());
        return Ok(first.exit_code());
    }
    Ok(EXIT_OK)
}

fn cmd_validate(a: &ScenarioArgs) -> Result<()> {
    let mut cfg = load_scenario(&a.config)?;
    apply_overrides(&mut cfg, &a.overrides)?;
    let topo = checked_topology(&cfg)?;
    for w in crate::model::config_warnings(&topo) {
        eprintln!("warning: {w}");
    }
    println!("{}: valid", cfg.name);
    Ok(())
}

fn cmd_export(a: &ExportArgs) -> Result<()> {
    let (_, topo) = prepare(&a.scenario)?;
    let mut out = open_out(&a.out)?;
    out.write_all(topology::to_edge_list(&topo).as_bytes())?;
    out.flush()?;
    Ok(())
}

fn cmd_presets(name: Option<&str>) -> Result<()> {
    match name {
        None => {
            for n in presets::PRESET_NAMES {
                println!("{n}");
            }
        }
        Some(n) => {
            let cfg = presets::preset(n).ok_or_else(|| Error::Parameter(format!("no preset `{n}`")))?;
            print!("{}", cfg.to_toml_string());
        }
    }
    Ok(())
}

fn report(e: &Error) -> i32 {
    eprintln!("error: {e}");
    exit_code(e)
}

/// Runs a parsed command and returns the process exit code.
pub fn execute(cli: &Cli) -> i32 {
    let r = match &cli.command {
        Command::Simulate(a) => cmd_simulate(a).map(|_| EXIT_OK),
        Command::Analyze(a) => cmd_analyze(a).map(|_| EXIT_OK),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Validate(a) => cmd_validate(a).map(|_| EXIT_OK),
        Command::ExportTopology(a) => cmd_export(a).map(|_| EXIT_OK),
        Command::Presets { name } => cmd_presets(name.as_deref()).map(|_| EXIT_OK),
    };
    r.unwrap_or_else(|e| report(&e))
}

/// Parses the process arguments and runs. Argument errors exit with 2.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    execute(&cli)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bare_keys_resolve_to_their_section() {
        let cfg = presets::preset("setting2").unwrap();
        assert_eq!(resolve_param(&cfg, "q").unwrap(), "domain.q");
        assert_eq!(resolve_param(&cfg, "e_m").unwrap(), "domain.e_m");
        assert_eq!(resolve_param(&cfg, "b").unwrap(), "iot.b");
        assert_eq!(resolve_param(&cfg, "p_cloud").unwrap(), "iot.p_cloud");
        assert!(resolve_param(&cfg, "z_light_ms").is_err());
        assert!(resolve_param(&cfg, "bogus").is_err());
    }

    #[test]
    fn overrides_apply_in_order() {
        let mut cfg = presets::preset("setting2").unwrap();
        apply_overrides(&mut cfg, &["q=0.3".into(), "network.n_fog=5".into(), "fog.theta_ms=inf".into()]).unwrap();
        assert_eq!(cfg.domain.q, 0.3);
        assert_eq!(cfg.network.n_fog, 5);
        assert!(cfg.fog.theta_ms.is_infinite());
        assert!(apply_overrides(&mut cfg, &["q".into()]).is_err());
        assert!(apply_overrides(&mut cfg, &["q=x".into()]).is_err());
    }

    #[test]
    fn error_classes_map_to_exit_codes() {
        assert_eq!(exit_code(&Error::Parameter("x".into())), EXIT_INVALID);
        assert_eq!(exit_code(&Error::Overload { rho: 1.2 }), EXIT_UNSTABLE);
        let nc = Error::NoConvergence {
            iterations: 3,
            residual: 1.0,
            trajectory: vec![],
        };
        assert_eq!(exit_code(&nc), EXIT_NO_CONVERGENCE);
    }

    #[test]
    fn trace_names_carry_the_mode() {
        let p = std::path::Path::new("/tmp/t.csv");
        assert_eq!(trace_path(p, PolicyMode::Afp, false), p);
        assert_eq!(trace_path(p, PolicyMode::Lfp, true), std::path::Path::new("/tmp/t_lfp.csv"));
    }
}
