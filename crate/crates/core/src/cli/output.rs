//! Long-format result rows shared by `simulate` and `analyze`.

use std::io::Write;

use crate::analytic::Analysis;
use crate::error::Result;
use crate::model::{PolicyMode, RequestType};
use crate::sim::Metrics;

pub const HEADER: [&str; 9] = [
    "scenario",
    "engine",
    "mode",
    "request_type",
    "metric",
    "value",
    "ci95",
    "seed",
    "n",
];

const TYPES: [Option<RequestType>; 3] = [Some(RequestType::Light), Some(RequestType::Heavy), None];

fn type_label(t: Option<RequestType>) -> &'static str {
    t.map_or("all", |t| t.as_str())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub scenario: String,
    pub engine: &'static str,
    pub mode: PolicyMode,
    pub request_type: &'static str,
    pub metric: &'static str,
    pub value: f64,
    pub ci95: Option<f64>,
    pub seed: Option<u64>,
    pub n: Option<u64>,
}

impl MetricRow {
    fn record(&self) -> [String; 9] {
        let opt = |v: Option<String>| v.unwrap_or_default();
        [
            self.scenario.clone(),
            self.engine.to_string(),
            self.mode.to_string(),
            self.request_type.to_string(),
            self.metric.to_string(),
            self.value.to_string(),
            opt(self.ci95.map(|c| c.to_string())),
            opt(self.seed.map(|s| s.to_string())),
            opt(self.n.map(|n| n.to_string())),
        ]
    }
}

/// Mean delay and the three fog-layer rates, per type and overall.
pub fn sim_rows(scenario: &str, m: &Metrics) -> Vec<MetricRow> {
    let mut rows = Vec::new();
    for t in TYPES {
        let d = m.delay_stats(t);
        let row = |metric, value, ci95| MetricRow {
            scenario: scenario.to_string(),
            engine: "sim",
            mode: m.mode,
            request_type: type_label(t),
            metric,
            value,
            ci95,
            seed: Some(m.seed),
            n: Some(m.n_requests),
        };
        rows.push(row("mean_delay_ms", d.mean, Some(d.ci95)));
        rows.push(row("acceptance_rate", m.acceptance_rate(t), None));
        rows.push(row("offload_rate", m.offload_rate(t), None));
        rows.push(row("cloud_spill_rate", m.cloud_spill_rate(t), None));
    }
    rows
}

/// Same metrics as `sim_rows`, plus the fixed-point diagnostics.
pub fn analytic_rows(scenario: &str, mode: PolicyMode, a: &Analysis) -> Vec<MetricRow> {
    let row = |t, metric, value| MetricRow {
        scenario: scenario.to_string(),
        engine: "anl",
        mode,
        request_type: type_label(t),
        metric,
        value,
        ci95: None,
        seed: None,
        n: None,
    };
    let mut rows = Vec::new();
    for t in TYPES {
        rows.push(row(t, "mean_delay_ms", a.mean_delay(t)));
        rows.push(row(t, "acceptance_rate", a.acceptance_rate(t)));
        rows.push(row(t, "offload_rate", a.offload_rate(t)));
        rows.push(row(t, "cloud_spill_rate", a.cloud_spill_rate(t)));
    }
    rows.push(row(None, "iterations", a.flows.iterations as f64));
    rows.push(row(None, "residual", a.flows.residual));
    rows
}

pub fn write_rows<W: Write>(rows: &[MetricRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for r in rows {
        w.write_record(r.record())?;
    }
    w.flush()?;
    Ok(())
}
