//! Queueing model of the network: per-fog Markov chains, acceptance
//! probabilities, the network-wide arrival-rate fixed point, M/G/1 cloud
//! units and the expected service delay of every IoT node.

pub mod acceptance;
pub mod chain;
pub mod cloud;
pub mod delay;
pub mod export;
pub mod flows;

pub use acceptance::{acceptance_prob, erlang_cdfs};
pub use chain::{mean_wait, solve_chain, solve_chain_with, ChainOptions, SteadyState};
pub use cloud::{cloud_load, cloud_wait, CloudLoad};
pub use delay::{
    delay_breakdown, fog_layer_delay, objective, service_delay, DelayBreakdown, FogDelayTerm, IotDelay,
    TypeDelay,
};
pub use export::{write_delays, write_flows};
pub use flows::{solve_flows, CloudFlow, FlowOptions, FlowSolution, FogFlow};

use crate::error::Result;
use crate::model::{PolicyMode, RequestType};
use crate::topology::Topology;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AnalyticOptions {
    pub flow: FlowOptions,
    pub fog_term: FogDelayTerm,
}

/// Flows and delays of one mode.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub flows: FlowSolution,
    pub delays: DelayBreakdown,
}

impl Analysis {
    pub fn mean_delay(&self, rtype: Option<RequestType>) -> f64 {
        self.delays.mean_delay(rtype)
    }

    pub fn acceptance_rate(&self, rtype: Option<RequestType>) -> f64 {
        self.flows.acceptance_rate(rtype)
    }

    pub fn offload_rate(&self, rtype: Option<RequestType>) -> f64 {
        self.flows.offload_rate(rtype)
    }

    pub fn cloud_spill_rate(&self, rtype: Option<RequestType>) -> f64 {
        self.flows.cloud_spill_rate(rtype)
    }
}

pub fn analyze(t: &Topology, mode: PolicyMode, opts: &AnalyticOptions) -> Result<Analysis> {
    let flows = solve_flows(t, mode, &opts.flow)?;
    let delays = delay_breakdown(&flows, t, opts.fog_term)?;
    Ok(Analysis { flows, delays })
}
