//! Parameter sweeps over a worker pool with ordered output.

use std::io::Write;

use rayon::prelude::*;

use super::{checked_topology, exit_code, resolve_param, sim_options, EngineArg, SimArgs};
use crate::analytic::{analyze, AnalyticOptions};
use crate::error::{Error, Result};
use crate::model::{PolicyMode, RequestType, ScenarioConfig};
use crate::sim;

/// One swept parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    /// Dotted config path.
    pub param: String,
    pub values: Vec<f64>,
    pub reps: u32,
    /// Replication `r` uses seed `base_seed + r`.
    pub base_seed: u64,
}

impl SweepSpec {
    /// Parses `param=v1,v2,...` or `param=start:stop:step`.
    pub fn parse(cfg: &ScenarioConfig, text: &str, reps: u32, base_seed: u64) -> Result<Self> {
        let (name, values) = text
            .split_once('=')
            .ok_or_else(|| Error::Parameter(format!("sweep `{text}` is not param=values")))?;
        let param = resolve_param(cfg, name.trim())?;
        // Fails on unknown or non-numeric fields before any point runs.
        let mut probe = cfg.clone();
        probe.set_param(&param, current_value(cfg, &param)?)?;
        if reps == 0 {
            return Err(Error::Parameter("replications must be ≥ 1".into()));
        }
        Ok(Self {
            param,
            values: parse_values(values)?,
            reps,
            base_seed,
        })
    }
}

fn current_value(cfg: &ScenarioConfig, path: &str) -> Result<f64> {
    if path == "iot.p_cloud" {
        return Ok(cfg.iot.resolved_p_cloud());
    }
    let doc: toml::Table =
        toml::from_str(&cfg.to_toml_string()).map_err(|e| Error::ConfigParse(e.to_string()))?;
    let v = path
        .split_once('.')
        .and_then(|(s, k)| doc.get(s)?.as_table()?.get(k).cloned());
    match v {
        Some(toml::Value::Integer(i)) => Ok(i as f64),
        Some(toml::Value::Float(f)) => Ok(f),
        _ => Err(Error::Parameter(format!("`{path}` is not a numeric parameter"))),
    }
}

/// Explicit list `a,b,c` or inclusive range `start:stop:step`.
pub fn parse_values(text: &str) -> Result<Vec<f64>> {
    let bad = || Error::Parameter(format!("cannot parse sweep values `{text}`"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let values = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        let [a, b, step] = parts[..] else {
            return Err(bad());
        };
        let (a, b, step) = (num(a)?, num(b)?, num(step)?);
        if !(step > 0.0) || !(b >= a) || !a.is_finite() || !b.is_finite() {
            return Err(bad());
        }
        let n = ((b - a) / step + 1e-9).floor() as usize;
        // Rounded so that 0.1:0.9:0.1 gives 0.3, not 0.30000000000000004.
        (0..=n).map(|i| ((a + i as f64 * step) * 1e12).round() / 1e12).collect()
    } else {
        text.split(',').map(num).collect::<Result<Vec<_>>>()?
    };
    if values.is_empty() {
        return Err(bad());
    }
    Ok(values)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointResult {
    pub mean_delay: f64,
    pub mean_delay_ci95: Option<f64>,
    pub light_delay: f64,
    pub light_ci95: Option<f64>,
    pub heavy_delay: f64,
    pub heavy_ci95: Option<f64>,
    pub acceptance_rate: f64,
    pub offload_rate: f64,
    pub cloud_spill_rate: f64,
    pub iterations: Option<usize>,
    pub residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointError {
    pub code: i32,
    pub message: String,
}

/// One data row of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub mode: PolicyMode,
    pub engine: &'static str,
    pub rep: u32,
    pub seed: Option<u64>,
    pub n: Option<u64>,
    pub result: Option<PointResult>,
    pub error: Option<PointError>,
}

impl SweepPoint {
    pub fn status(&self) -> &'static str {
        match &self.error {
            None => "ok",
            Some(e) => match e.code {
                3 => "unstable",
                4 => "no-convergence",
                _ => "invalid",
            },
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.error.as_ref().map_or(0, |e| e.code)
    }
}

#[derive(Debug, Clone, Copy)]
enum Task {
    Sim { value: usize, mode: PolicyMode, rep: u32 },
    Anl { value: usize, mode: PolicyMode },
}

fn point_config(cfg: &ScenarioConfig, spec: &SweepSpec, value: f64) -> Result<ScenarioConfig> {
    let mut c = cfg.clone();
    c.set_param(&spec.param, value)?;
    Ok(c)
}

fn run_task(
    cfg: &ScenarioConfig,
    spec: &SweepSpec,
    task: Task,
    sim_args: &SimArgs,
    anl: &AnalyticOptions,
) -> std::result::Result<PointResult, PointError> {
    let fail = |e: Error| PointError {
        code: exit_code(&e),
        message: e.to_string(),
    };
    let value = match task {
        Task::Sim { value, .. } | Task::Anl { value, .. } => spec.values[value],
    };
    let c = point_config(cfg, spec, value).map_err(fail)?;
    let topo = checked_topology(&c).map_err(fail)?;
    match task {
        Task::Sim { mode, rep, .. } => {
            let o = sim_options(&c, mode, sim_args, spec.base_seed + rep as u64).map_err(fail)?;
            let m = sim::run(&topo, &o).map_err(fail)?;
            let d = |t| m.delay_stats(t);
            Ok(PointResult {
                mean_delay: d(None).mean,
                mean_delay_ci95: Some(d(None).ci95),
                light_delay: d(Some(RequestType::Light)).mean,
                light_ci95: Some(d(Some(RequestType::Light)).ci95),
                heavy_delay: d(Some(RequestType::Heavy)).mean,
                heavy_ci95: Some(d(Some(RequestType::Heavy)).ci95),
                acceptance_rate: m.acceptance_rate(None),
                offload_rate: m.offload_rate(None),
                cloud_spill_rate: m.cloud_spill_rate(None),
                iterations: None,
                residual: None,
            })
        }
        Task::Anl { mode, .. } => {
            let a = analyze(&topo, mode, anl).map_err(fail)?;
            Ok(PointResult {
                mean_delay: a.mean_delay(None),
                mean_delay_ci95: None,
                light_delay: a.mean_delay(Some(RequestType::Light)),
                light_ci95: None,
                heavy_delay: a.mean_delay(Some(RequestType::Heavy)),
                heavy_ci95: None,
                acceptance_rate: a.acceptance_rate(None),
                offload_rate: a.offload_rate(None),
                cloud_spill_rate: a.cloud_spill_rate(None),
                iterations: Some(a.flows.iterations),
                residual: Some(a.flows.residual),
            })
        }
    }
}

/// Runs every point on `threads` workers. Points come back ordered by value,
/// mode, engine (sim before anl) and replication whatever the thread count.
/// The analytic model is deterministic, so it is solved once per (value,
/// mode) and repeated for each replication.
pub fn run_sweep(
    cfg: &ScenarioConfig,
    spec: &SweepSpec,
    modes: &[PolicyMode],
    engine: EngineArg,
    sim_args: &SimArgs,
    anl: &AnalyticOptions,
    threads: usize,
) -> Result<Vec<SweepPoint>> {
    let engines: &[&'static str] = match engine {
        EngineArg::Sim => &["sim"],
        EngineArg::Anl => &["anl"],
        EngineArg::Both => &["sim", "anl"],
    };
    let mut tasks = Vec::new();
    for value in 0..spec.values.len() {
        for &mode in modes {
            for &e in engines {
                if e == "sim" {
                    tasks.extend((0..spec.reps).map(|rep| Task::Sim { value, mode, rep }));
                } else {
                    tasks.push(Task::Anl { value, mode });
                }
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Parameter(format!("cannot start worker pool: {e}")))?;
    let results: Vec<_> =
        pool.install(|| tasks.par_iter().map(|&t| run_task(cfg, spec, t, sim_args, anl)).collect());

    let mut points = Vec::new();
    for (task, r) in tasks.iter().zip(results) {
        let (result, error) = match r {
            Ok(p) => (Some(p), None),
            Err(e) => (None, Some(e)),
        };
        match *task {
            Task::Sim { value, mode, rep } => points.push(SweepPoint {
                value: spec.values[value],
                mode,
                engine: "sim",
                rep,
                seed: Some(spec.base_seed + rep as u64),
                n: Some(sim_args.requests),
                result,
                error,
            }),
            Task::Anl { value, mode } => points.extend((0..spec.reps).map(|rep| SweepPoint {
                value: spec.values[value],
                mode,
                engine: "anl",
                rep,
                seed: None,
                n: None,
                result,
                error: error.clone(),
            })),
        }
    }
    Ok(points)
}

pub const SWEEP_HEADER: [&str; 21] = [
    "scenario",
    "param",
    "param_value",
    "rep",
    "engine",
    "mode",
    "seed",
    "n",
    "status",
    "mean_delay_ms",
    "mean_delay_ci95",
    "light_delay_ms",
    "light_delay_ci95",
    "heavy_delay_ms",
    "heavy_delay_ci95",
    "acceptance_rate",
    "offload_rate",
    "cloud_spill_rate",
    "iterations",
    "residual",
    "message",
];

/// One header plus one row per point.
pub fn write_points<W: Write>(scenario: &str, spec: &SweepSpec, points: &[SweepPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER)?;
    let s = |v: Option<String>| v.unwrap_or_default();
    for p in points {
        let r = p.result.as_ref();
        let f = |g: fn(&PointResult) -> f64| s(r.map(|r| g(r).to_string()));
        let fo = |g: fn(&PointResult) -> Option<f64>| s(r.and_then(g).map(|v| v.to_string()));
        w.write_record([
            scenario.to_string(),
            spec.param.clone(),
            p.value.to_string(),
            p.rep.to_string(),
            p.engine.to_string(),
            p.mode.to_string(),
            s(p.seed.map(|v| v.to_string())),
            s(p.n.map(|v| v.to_string())),
            p.status().to_string(),
            f(|r| r.mean_delay),
            fo(|r| r.mean_delay_ci95),
            f(|r| r.light_delay),
            fo(|r| r.light_ci95),
            f(|r| r.heavy_delay),
            fo(|r| r.heavy_ci95),
            f(|r| r.acceptance_rate),
            f(|r| r.offload_rate),
            f(|r| r.cloud_spill_rate),
            s(r.and_then(|r| r.iterations).map(|v| v.to_string())),
            fo(|r| r.residual),
            s(p.error.as_ref().map(|e| e.message.clone())),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::presets;

    #[test]
    fn value_lists_and_ranges() {
        assert_eq!(parse_values("0,1,2,3,5,7").unwrap(), vec![0.0, 1.0, 2.0, 3.0, 5.0, 7.0]);
        let r = parse_values("0.1:0.9:0.1").unwrap();
        assert_eq!(r.len(), 9);
        assert_eq!(r[2], 0.3);
        assert_eq!(r[8], 0.9);
        assert_eq!(parse_values("2:2:1").unwrap(), vec![2.0]);
        for bad in ["", "a", "1:0:1", "0:1:0", "0:1", "1,,2"] {
            assert!(parse_values(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn spec_checks_the_parameter_up_front() {
        let cfg = presets::preset("setting1").unwrap();
        let s = SweepSpec::parse(&cfg, "q=0.1,0.5", 2, 10).unwrap();
        assert_eq!(s.param, "domain.q");
        assert_eq!(s.values, vec![0.1, 0.5]);
        assert!(SweepSpec::parse(&cfg, "q=0.1", 0, 10).is_err());
        assert!(SweepSpec::parse(&cfg, "nope=1", 1, 10).is_err());
        assert!(SweepSpec::parse(&cfg, "q", 1, 10).is_err());
        assert!(SweepSpec::parse(&cfg, "iot.p_cloud=0.1", 1, 10).is_ok());
    }
}
